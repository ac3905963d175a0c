#include "amvi/perpetual.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace amvi;

namespace {

SchemeParams hand_scheme() { return derive_scheme(test::reference_market(), 0.1, 0.25); }

LatticeValues put_obstacle(const LogGrid& grid) { return sample_payoff({PayoffKind::Put, 100.0}, grid); }

} // namespace

TEST(ContinuousPut, ReferenceCase) {
    // 0.02λ² + 0.03λ - 0.05 = 0 has discriminant 0.0049, so λ₋ = (-0.03 - 0.07)/0.04.
    const ContinuousPut p = continuous_put_solution(test::reference_market());
    EXPECT_NEAR(p.exponent, -2.5, 1e-14);
    EXPECT_NEAR(p.boundary, 500.0 / 7.0, 1e-12);
    const double lambda = p.exponent;
    EXPECT_NEAR(0.02 * lambda * lambda + 0.03 * lambda - 0.05, 0.0, 1e-15);
    const double v100 = (100.0 - 500.0 / 7.0) * std::pow(100.0 / (500.0 / 7.0), -2.5);
    EXPECT_NEAR(p.value(100.0), v100, 1e-12);
    EXPECT_NEAR(p.value(100.0), 12.3200, 5e-5);
    // Smooth pasting: V'(S*) = -1 from the continuation side.
    EXPECT_NEAR(p.delta(p.boundary), -1.0, 1e-12);
    EXPECT_DOUBLE_EQ(continuous_perpetual_put(test::reference_market(), 100.0), p.value(100.0));
}

TEST(ContinuousPut, StoppingRegionAndDecay) {
    const ContinuousPut p = continuous_put_solution(MarketParams(0.04, 0.02, 0.3, 100.0));
    for (double s : {1.0, 10.0, 0.99 * p.boundary}) EXPECT_DOUBLE_EQ(p.value(s), 100.0 - s);
    double previous = p.value(p.boundary);
    for (double s = p.boundary * 1.1; s < 1e7; s *= 1.7) {
        const double v = p.value(s);
        EXPECT_LT(v, previous);
        EXPECT_GT(v, 0.0);
        previous = v;
    }
}

TEST(ContinuousPut, ZeroRateHasNoBoundary) {
    try {
        continuous_put_solution(MarketParams(0.0, 0.0, 0.2, 100.0));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NoBoundary);
    }
}

TEST(CharRoots, HandCase) {
    const CharRoots r = char_roots(hand_scheme());
    // 0.5375ξ² - 1.0125ξ + 0.4625 = 0
    const double disc = std::sqrt(1.0125 * 1.0125 - 4.0 * 0.5375 * 0.4625);
    EXPECT_NEAR(r.xi1, (1.0125 - disc) / 1.075, 1e-12);
    EXPECT_NEAR(r.xi2, (1.0125 + disc) / 1.075, 1e-12);
    EXPECT_NEAR(r.xi1, 0.77865, 1e-5);
    EXPECT_NEAR(r.xi2, 1.10507, 1e-5);
    EXPECT_NEAR(r.xi1 * r.xi2, 0.4625 / 0.5375, 1e-12);
    EXPECT_NEAR(r.xi1 + r.xi2, 1.0125 / 0.5375, 1e-12);
}

TEST(CharRoots, SatisfyEquationAcrossSweep) {
    for (double r : {0.001, 0.02, 0.1}) {
        for (double q : {-0.02, 0.0, 0.08}) {
            for (double sigma : {0.1, 0.4}) {
                for (double dx : {0.005, 0.05}) {
                    const SchemeParams s = derive_scheme(MarketParams(r, q, sigma, 100.0), dx);
                    const CharRoots roots = char_roots(s);
                    for (double xi : {roots.xi1, roots.xi2}) {
                        const double res = s.w() * s.a() * xi * xi - (s.rho() + s.w() - 1.0) * xi + s.w() * (1.0 - s.a());
                        EXPECT_NEAR(res, 0.0, 1e-10);
                    }
                    EXPECT_LT(roots.xi1, 1.0);
                    EXPECT_GT(roots.xi2, 1.0);
                }
            }
        }
    }
}

TEST(CharRoots, SmallRootIsAccurateWhenRhoIsNearOne) {
    // Long-double evaluation of the textbook formula as the reference.
    const SchemeParams s = derive_scheme(MarketParams(1e-9, 0.0, 0.2, 100.0), 0.001);
    const long double w = s.w(), a = s.a(), rho = s.rho();
    const long double b = rho + w - 1.0L;
    const long double disc = std::sqrt(b * b - 4.0L * w * a * w * (1.0L - a));
    const long double xi1 = (b - disc) / (2.0L * w * a);
    EXPECT_NEAR(char_roots(s).xi1, static_cast<double>(xi1), 1e-12);
}

TEST(CharRoots, ZeroRateGivesUnitRoot) {
    const CharRoots r = char_roots(derive_scheme(MarketParams(0.0, 0.0, 0.2, 100.0), 0.01));
    EXPECT_EQ(r.xi1, 1.0);
}

TEST(ClosedForm, SatisfiesSchemeAndObstacle) {
    const MarketParams m = test::reference_market();
    const SchemeParams s = derive_scheme(m, 0.01);
    const LogGrid grid = LogGrid::around_strike(100.0, 0.2, 0.01);
    const PerpetualSolution sol = solve_closed_form(m, grid, s);
    const LatticeValues phi = put_obstacle(grid);
    for (Index j = grid.j_min(); j <= grid.j_max(); ++j) {
        EXPECT_GE(sol.lattice.at(j), phi.at(j) - 1e-15);
        if (j > sol.j_star) {
            EXPECT_NEAR(discrete_bs_apply(sol.lattice, j, s), 0.0, 1e-12) << "j=" << j;
        }
        if (j < sol.j_star) {
            EXPECT_GT(discrete_bs_apply(sol.lattice, j, s), 0.0) << "j=" << j;
        }
        if (j <= sol.j_star) {
            EXPECT_EQ(sol.lattice.at(j), phi.at(j));
        }
    }
    // Variational inequality: the update map leaves the lattice unchanged.
    EXPECT_LE(sup_distance(apply_F(sol.lattice, s, phi), sol.lattice), 1e-12);
    EXPECT_NEAR(sol.c1, sol.lattice.at(0), 1e-12);
}

TEST(ClosedForm, NonincreasingWithoutInteriorMaxima) {
    const MarketParams m(0.02, 0.08, 0.4, 100.0);
    const SchemeParams s = derive_scheme(m, 0.01);
    const PerpetualSolution sol = solve_closed_form(m, perpetual_window(m, 0.01), s);
    const auto v = sol.lattice.values();
    for (std::size_t k = 1; k < v.size(); ++k) EXPECT_LE(v[k], v[k - 1]);
    for (std::size_t k = 1; k + 1 < v.size(); ++k) EXPECT_FALSE(v[k - 1] < v[k] && v[k] > v[k + 1]);
}

TEST(ClosedForm, AgreesWithIndependentPicardIteration) {
    const MarketParams m = test::reference_market();
    const SchemeParams s = derive_scheme(m, 0.01);
    const LogGrid grid = perpetual_window(m, 0.01);
    const LatticeValues phi = put_obstacle(grid);
    const PerpetualSolution sol = solve_closed_form(m, grid, s);
    // Hand-rolled w = 1 update: (aU_{j+1} + (1-a)U_{j-1})/ρ ∨ φ_j.
    auto F = [&](const std::vector<double>& u) {
        std::vector<double> out(u.size());
        for (std::size_t k = 0; k < u.size(); ++k) {
            const double lo = k == 0 ? phi.boundary().left_ghost : u[k - 1];
            const double hi = k + 1 == u.size() ? phi.boundary().right_ghost : u[k + 1];
            out[k] = std::max((s.a() * hi + (1.0 - s.a()) * lo) / s.rho(), phi[k]);
        }
        return out;
    };
    const std::vector<double> picard = test::iterate_to_fixed_point(
        F, std::vector<double>(phi.values().begin(), phi.values().end()), 1e-10 * (s.rho() - 1.0), 2'000'000);
    EXPECT_LE(sup_distance(phi.with_values(picard), sol.lattice), 1e-8);
}

TEST(ClosedForm, Errors) {
    const MarketParams flat(0.0, 0.0, 0.2, 100.0);
    const LogGrid grid = LogGrid::around_strike(100.0, 0.2, 0.01);
    try {
        solve_closed_form(flat, grid, derive_scheme(flat, 0.01));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NoBoundary);
    }
    const MarketParams m = test::reference_market();
    // Window starting right of S* truncates the exercise region.
    try {
        solve_closed_form(m, LogGrid(0.01, std::log(100.0), -10, 200), derive_scheme(m, 0.01));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::PrematureTruncation);
    }
}

TEST(ClosedForm, BoundaryIndexIsTranslationCovariant) {
    const MarketParams m(0.05, 0.02, 0.3, 100.0);
    const SchemeParams s = derive_scheme(m, 0.02);
    const LogGrid base = LogGrid::around_strike(100.0, 0.3, 0.02);
    const PerpetualSolution a = solve_closed_form(m, base, s);
    const LogGrid shifted(0.02, std::log(100.0) - 5 * 0.02, base.j_min() + 5, base.j_max() + 5);
    const PerpetualSolution b = solve_closed_form(m, shifted, s);
    EXPECT_EQ(b.j_star, a.j_star + 5);
    EXPECT_NEAR(b.boundary_price(), a.boundary_price(), 1e-9);
}

TEST(FixedPoint, ZeroObstacleConvergesImmediately) {
    const LatticeValues zero = test::constant_lattice(LogGrid(0.1, 0.0, -20, 20), 0.0);
    const FixedPointResult r = fixed_point_solve(FdOperator(hand_scheme(), zero), zero, 1e-10);
    EXPECT_EQ(r.iterations, 1);
    for (double v : r.solution.values()) EXPECT_EQ(v, 0.0);
}

TEST(FixedPoint, GeometricRateOnHandScheme) {
    const MarketParams m = test::reference_market();
    const SchemeParams s = hand_scheme();
    const LogGrid grid = perpetual_window(m, 0.1);
    const LatticeValues phi = put_obstacle(grid);
    const double tol = 1e-10;
    const FixedPointResult r = fixed_point_solve(FdOperator(s, phi), phi, tol, 0, FixedPointMethod::Picard, true);
    ASSERT_EQ(static_cast<long>(r.step_norms.size()), r.iterations);
    for (std::size_t k = 1; k < r.step_norms.size(); ++k) {
        EXPECT_LE(r.step_norms[k], r.step_norms[k - 1] / s.rho() + 1e-13) << "k=" << k;
    }
    const double predicted = std::log(tol * (s.rho() - 1.0) / r.step_norms.front()) / std::log(1.0 / s.rho());
    EXPECT_LE(static_cast<double>(r.iterations), std::ceil(predicted) + 1.0);
    EXPECT_LE(r.error_bound, tol);
    EXPECT_LE(sup_distance(r.solution, solve_closed_form(m, grid, s).lattice), tol + 1e-12);
}

TEST(FixedPoint, IteratesFromObstacleIncrease) {
    const SchemeParams s = hand_scheme();
    const LogGrid grid = LogGrid::around_strike(100.0, 0.2, 0.1);
    const LatticeValues phi = put_obstacle(grid);
    const FdOperator op(s, phi);
    LatticeValues u = phi;
    for (int k = 0; k < 200; ++k) {
        const LatticeValues next = apply_operator(op, u);
        for (std::size_t i = 0; i < u.size(); ++i) ASSERT_GE(next[i], u[i] - 1e-15);
        u = next;
    }
}

TEST(FixedPoint, DifferentStartsReachSameFixedPoint) {
    const SchemeParams s = hand_scheme();
    const LatticeValues phi = put_obstacle(LogGrid::around_strike(100.0, 0.2, 0.1));
    const double tol = 1e-10;
    const FixedPointResult from_phi = fixed_point_solve(FdOperator(s, phi), phi, tol);
    const LatticeValues top = phi.with_values(std::vector<double>(phi.size(), 100.0));
    const FixedPointResult from_top = fixed_point_solve(FdOperator(s, phi), top, tol);
    EXPECT_LE(sup_distance(from_phi.solution, from_top.solution), 2.0 * tol);
}

TEST(FixedPoint, PolicyMatchesPicard) {
    const MarketParams m(0.05, 0.02, 0.3, 100.0);
    const SchemeParams s = derive_scheme(m, 0.05);
    const LatticeValues phi = put_obstacle(perpetual_window(m, 0.05));
    const FixedPointResult picard = fixed_point_solve(FdOperator(s, phi), phi, 1e-11);
    const FixedPointResult policy = fixed_point_solve(FdOperator(s, phi), phi, 1e-11, 0, FixedPointMethod::Policy);
    EXPECT_LE(sup_distance(picard.solution, policy.solution), 1e-10);
    EXPECT_LT(policy.iterations, 200);
    EXPECT_LE(policy.error_bound, 1e-9);
}

TEST(FixedPoint, ErrorsOnBadInput) {
    const MarketParams flat(0.0, 0.0, 0.2, 100.0);
    const SchemeParams s = derive_scheme(flat, 0.1, 0.25);
    const LatticeValues phi = put_obstacle(LogGrid(0.1, std::log(100.0), -20, 20));
    try {
        fixed_point_solve(FdOperator(s, phi), phi, 1e-10);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NoContraction);
    }
    const FdOperator op(hand_scheme(), phi);
    EXPECT_THROW(fixed_point_solve(op, phi, 0.0), Error);
    try {
        fixed_point_solve(op, phi, 1e-14, 3);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::MaxIterExceeded);
    }
}

TEST(ExerciseBoundary, ClosedFormAndFixedPointAgree) {
    const MarketParams m = test::reference_market();
    const SchemeParams s = derive_scheme(m, 0.01);
    const LogGrid grid = perpetual_window(m, 0.01);
    const LatticeValues phi = put_obstacle(grid);
    const PerpetualSolution sol = solve_closed_form(m, grid, s);
    EXPECT_EQ(exercise_boundary(sol.lattice, phi, 1e-9), sol.j_star);
    const FixedPointResult fixed = fixed_point_solve(FdOperator(s, phi), phi, 1e-10, 0, FixedPointMethod::Policy);
    EXPECT_EQ(exercise_boundary(fixed.solution, phi, 1e-9), sol.j_star);
}

TEST(ExerciseBoundary, Errors) {
    const LogGrid grid(0.1, std::log(100.0), -5, 5);
    const LatticeValues phi = put_obstacle(grid);
    std::vector<double> above(phi.values().begin(), phi.values().end());
    for (double& v : above) v += 1.0;
    try {
        exercise_boundary(phi.with_values(above), phi, 1e-9);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EmptyContactSet);
    }
    std::vector<double> holey(phi.values().begin(), phi.values().end());
    holey[1] += 1.0;
    try {
        exercise_boundary(phi.with_values(holey), phi, 1e-9);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::StructureViolation);
    }
}

TEST(BtmPerpetual, ZeroObstacleStaysZero) {
    const MarketParams m = test::reference_market();
    const BtmParams b = derive_btm(m, 0.01);
    const LatticeValues zero = test::constant_lattice(LogGrid(b.log_step(), 0.0, -30, 30), 0.0);
    const FixedPointResult r = fixed_point_solve(BtmOperator(b, zero), zero, 1e-10);
    for (double v : r.solution.values()) EXPECT_EQ(v, 0.0);
}

TEST(BtmPerpetual, BoundedAndApproachesContinuousPrice) {
    const MarketParams m = test::reference_market();
    const ContinuousPut exact = continuous_put_solution(m);
    double previous = 1e300;
    for (double dt : {1e-2, 1e-3}) {
        const BtmParams b = derive_btm(m, dt);
        const LogGrid grid = perpetual_window(m, b.log_step());
        const FixedPointResult r = btm_perpetual_solve(m, b, grid, 1e-10, FixedPointMethod::Policy);
        const LatticeValues phi = put_obstacle(grid);
        double worst = 0.0;
        for (std::size_t k = 0; k < r.solution.size(); ++k) {
            EXPECT_GE(r.solution[k], phi[k] - 1e-12);
            EXPECT_LE(r.solution[k], 100.0);
            worst = std::max(worst, std::abs(r.solution[k] - exact.value(grid.price(grid.index(k)))));
        }
        EXPECT_LT(worst, previous) << "dt=" << dt;
        EXPECT_LT(worst, 5.0 * std::sqrt(dt));
        previous = worst;
    }
}

TEST(BtmPerpetual, RequiresMatchedSpacing) {
    const MarketParams m = test::reference_market();
    const BtmParams b = derive_btm(m, 0.01);
    EXPECT_THROW(btm_perpetual_solve(m, b, LogGrid::around_strike(100.0, 0.2, 0.03), 1e-10), Error);
}

TEST(PerpetualWindow, CoversBoundaryAndTail) {
    const MarketParams m(0.02, 0.08, 0.4, 100.0);
    const ContinuousPut exact = continuous_put_solution(m);
    const LogGrid grid = perpetual_window(m, 0.005);
    EXPECT_LE(grid.price(grid.j_min()), 0.5 * exact.boundary * 1.01);
    EXPECT_LE(exact.value(grid.price(grid.j_max())), 1e-12 * 1.01);
}
