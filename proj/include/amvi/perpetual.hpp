/**
 * @file perpetual.hpp
 * @brief Perpetual American put: discrete closed form, fixed-point solvers,
 *        exercise-boundary location and the continuous closed form
 */

#pragma once

#include "amvi/error.hpp"
#include "amvi/model.hpp"
#include "amvi/operators.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace amvi {

// ---------------------------------------------------------------------------
// Continuous perpetual put
// ---------------------------------------------------------------------------

/**
 * V(S) = E - S for S <= S*, (E - S*)(S/S*)^λ for S > S*,
 * where λ is the negative root of (σ²/2)λ(λ-1) + (r-q)λ - r = 0 and
 * S* = λE/(λ - 1).
 */
struct ContinuousPut {
    double exponent;
    double boundary;
    double strike;

    double value(double spot) const {
        if (spot <= boundary) return strike - spot;
        return (strike - boundary) * std::pow(spot / boundary, exponent);
    }

    /// dV/dS, one-sided from the continuation side at S*.
    double delta(double spot) const {
        if (spot < boundary) return -1.0;
        return (strike - boundary) * exponent * std::pow(spot / boundary, exponent) / spot;
    }
};

inline ContinuousPut continuous_put_solution(const MarketParams& market) {
    if (market.rate() == 0.0) {
        throw Error(ErrorCode::NoBoundary, "r = 0: the optimal exercise boundary does not exist");
    }
    const double quad = 0.5 * market.variance();
    const double lin = market.log_drift();
    const double cst = -market.rate();
    const double root_disc = std::sqrt(lin * lin - 4.0 * quad * cst);
    // Pick the cancellation-free formula for whichever root it applies to.
    double negative_root = 0.0;
    if (lin >= 0.0) {
        negative_root = (-lin - root_disc) / (2.0 * quad);
    } else {
        const double positive_root = (-lin + root_disc) / (2.0 * quad);
        negative_root = cst / (quad * positive_root);
    }
    const double boundary = negative_root * market.strike() / (negative_root - 1.0);
    return {negative_root, boundary, market.strike()};
}

inline double continuous_perpetual_put(const MarketParams& market, double spot) {
    return continuous_put_solution(market).value(spot);
}

// ---------------------------------------------------------------------------
// Discrete closed form
// ---------------------------------------------------------------------------

/// Roots of waξ² - (ρ+w-1)ξ + w(1-a) = 0, xi1 <= xi2.
struct CharRoots {
    double xi1;
    double xi2;
};

/**
 * The discriminant is expanded as (ρ-1)(ρ-1+2w) + w²(2a-1)², which stays
 * accurate when ρ → 1; the smaller root comes from the product (1-a)/a.
 */
inline CharRoots char_roots(const SchemeParams& scheme) {
    const double w = scheme.w();
    const double a = scheme.a();
    if (a == 0.0 || a == 1.0) {
        throw Error(ErrorCode::DegenerateQuadratic, "a must differ from 0 and 1");
    }
    if (!(a > 0.0 && a < 1.0) || !(w > 0.0)) {
        throw Error(ErrorCode::StabilityViolation, "char_roots needs 0 < a < 1 and w > 0");
    }
    if (scheme.rho() < 1.0) throw Error(ErrorCode::InvalidParameter, "char_roots needs rho >= 1");
    const double growth = scheme.rho() - 1.0;
    const double skew = scheme.drift_ratio();
    const double disc = growth * (growth + 2.0 * w) + w * w * skew * skew;
    const double xi2 = (growth + w + std::sqrt(disc)) / (2.0 * a * w);
    const double xi1 = (1.0 - a) / (a * xi2);
    return {xi1, xi2};
}

/**
 * Discrete perpetual put on a window: U_j = φ_j for j <= j_star and
 * U_j = φ_{j_star} ξ₁^{j - j_star} beyond it.
 */
struct PerpetualSolution {
    CharRoots roots;
    Index j_star;
    double c1;
    double f_raw;
    LatticeValues lattice;

    double boundary_price() const { return lattice.grid().price(j_star); }
};

/**
 * Exercise boundary from the smooth-pasting equality at j_star.
 *
 * Setting U_{j*} = E - X, U_{j*+1} = ξ₁(E - X), U_{j*-1} = E - X e^{-Δx} in the
 * update equation and solving for X = e^{j*Δx + c} gives
 *   X = E [ρ - (1-w) - waξ₁ - w(1-a)] / [ρ - (1-w) - waξ₁ - w(1-a)e^{-Δx}],
 * and with the characteristic equation both brackets share the factor w(1-a):
 *   X = E (1 - ξ₁) / (1 - ξ₁ e^{-Δx}).
 * j_star = floor((ln X - c)/Δx).
 */
inline PerpetualSolution solve_closed_form(const MarketParams& market, const LogGrid& grid,
                                           const SchemeParams& scheme) {
    if (market.rate() == 0.0 || scheme.rho() == 1.0) {
        throw Error(ErrorCode::NoBoundary, "r = 0: the optimal exercise boundary does not exist");
    }
    if (auto report = stability_check(scheme); !report.passed()) {
        throw Error(ErrorCode::StabilityViolation, "violated: " + report.violations.front());
    }
    const CharRoots roots = char_roots(scheme);
    const double xi1 = roots.xi1;
    const double dx = grid.dx();
    const double strike = market.strike();

    const double boundary_price = strike * (1.0 - xi1) / (1.0 - xi1 * std::exp(-dx));
    const double f_raw = (std::log(boundary_price) - grid.anchor()) / dx;
    const auto j_star = static_cast<Index>(std::floor(f_raw));
    if (j_star <= grid.j_min()) {
        throw Error(ErrorCode::PrematureTruncation,
                    "exercise index " + std::to_string(j_star) + " at or below window start " +
                        std::to_string(grid.j_min()));
    }
    if (j_star >= grid.j_max()) {
        throw Error(ErrorCode::PrematureTruncation, "window ends inside the exercise region");
    }

    const double phi_star = strike - grid.price(j_star);
    const double c1 = phi_star * std::pow(xi1, -static_cast<double>(j_star));
    auto value = [&](Index j) {
        if (j <= j_star) return strike - grid.price(j);
        return phi_star * std::pow(xi1, static_cast<double>(j - j_star));
    };

    std::vector<double> values(grid.size());
    for (std::size_t k = 0; k < values.size(); ++k) values[k] = value(grid.index(k));
    LatticeValues lattice(grid, std::move(values),
                          {strike, 0.0, value(grid.j_min() - 1), value(grid.j_max() + 1)});
    return {roots, j_star, c1, f_raw, std::move(lattice)};
}

/**
 * Window for perpetual put solves: the default window around the strike,
 * extended left to half the continuous boundary and right until the
 * continuous price tail drops below tail_tol.
 */
inline LogGrid perpetual_window(const MarketParams& market, double dx, double tail_tol = 1e-12) {
    const LogGrid base = LogGrid::around_strike(market.strike(), market.sigma(), dx);
    const ContinuousPut cont = continuous_put_solution(market);
    const double c = base.anchor();
    const double x_left = std::log(0.5 * cont.boundary);
    const double x_right =
        std::log(cont.boundary) + std::log(tail_tol / (market.strike() - cont.boundary)) / cont.exponent;
    const double j_lo = std::floor((x_left - c) / dx);
    const double j_hi = std::ceil((x_right - c) / dx);
    constexpr double kMaxNodes = 5.0e7;
    if (!(j_hi - j_lo < kMaxNodes)) {
        throw Error(ErrorCode::InvalidParameter, "perpetual window would exceed 5e7 nodes");
    }
    return base.with_window(std::min(base.j_min(), static_cast<Index>(j_lo)),
                            std::max(base.j_max(), static_cast<Index>(j_hi)));
}

// ---------------------------------------------------------------------------
// Fixed-point solvers
// ---------------------------------------------------------------------------

enum class FixedPointMethod {
    /// U ← TU until ‖ΔU‖ <= tol(ρ-1), which bounds the error by tol.
    Picard,
    /// Policy (Howard) iteration on the same fixed-point equation: solve the
    /// linear system for a fixed exercise set, then re-select the set.
    Policy,
};

struct FixedPointResult {
    LatticeValues solution;
    long iterations;
    /// A-posteriori bound on ‖U - U*‖ from the contraction constant.
    double error_bound;
    /// Picard: ‖U_{k+1} - U_k‖ per iteration (when requested).
    std::vector<double> step_norms;
};

namespace detail {

template <LatticeOperator Op>
FixedPointResult picard_solve(const Op& op, const LatticeValues& init, double tol, long max_iter,
                              bool record_steps) {
    const double growth = op.rho() - 1.0;
    const double left = init.boundary().left_ghost;
    const double right = init.boundary().right_ghost;
    std::vector<double> current(init.values().begin(), init.values().end());
    std::vector<double> next(current.size());
    std::vector<double> steps;
    for (long iter = 1; iter <= max_iter; ++iter) {
        apply_into(op, current, left, right, next);
        double step = 0.0;
        for (std::size_t k = 0; k < next.size(); ++k) step = std::max(step, std::abs(next[k] - current[k]));
        if (record_steps) steps.push_back(step);
        current.swap(next);
        if (step <= tol * growth) {
            return {init.with_values(std::move(current)), iter, step / growth, std::move(steps)};
        }
    }
    throw Error(ErrorCode::MaxIterExceeded,
                "Picard iteration did not reach tolerance in " + std::to_string(max_iter) + " steps");
}

// Thomas algorithm; the systems here are M-matrices, so no pivoting.
inline void solve_tridiagonal(std::span<const double> sub, std::span<const double> diag,
                              std::span<const double> sup, std::span<double> rhs) {
    const std::size_t n = diag.size();
    std::vector<double> c(n);
    double denom = diag[0];
    c[0] = sup[0] / denom;
    rhs[0] /= denom;
    for (std::size_t k = 1; k < n; ++k) {
        denom = diag[k] - sub[k] * c[k - 1];
        c[k] = sup[k] / denom;
        rhs[k] = (rhs[k] - sub[k] * rhs[k - 1]) / denom;
    }
    for (std::size_t k = n - 1; k-- > 0;) rhs[k] -= c[k] * rhs[k + 1];
}

template <LatticeOperator Op>
FixedPointResult policy_solve(const Op& op, const LatticeValues& init, long max_iter) {
    const auto phi = op.obstacle().values();
    const StencilWeights wts = op.weights();
    const double left = init.boundary().left_ghost;
    const double right = init.boundary().right_ghost;
    const std::size_t n = init.size();

    auto select = [&](std::span<const double> u, std::vector<char>& exercise) {
        bool changed = false;
        for (std::size_t k = 0; k < n; ++k) {
            const double lower = k == 0 ? left : u[k - 1];
            const double upper = k + 1 == n ? right : u[k + 1];
            // Ties go to continuation; otherwise the flat tail of a put where
            // both φ and its continuation vanish starts out exercised and is
            // released one node per iteration.
            const char ex = phi[k] > op.continuation(lower, u[k], upper) ? 1 : 0;
            changed = changed || ex != exercise[k];
            exercise[k] = ex;
        }
        return changed;
    };

    std::vector<char> exercise(n, 2);
    select(init.values(), exercise);
    std::vector<double> sub(n), diag(n), sup(n), u(n);
    for (long iter = 1; iter <= max_iter; ++iter) {
        for (std::size_t k = 0; k < n; ++k) {
            if (exercise[k]) {
                sub[k] = 0.0;
                diag[k] = 1.0;
                sup[k] = 0.0;
                u[k] = phi[k];
            } else {
                sub[k] = k == 0 ? 0.0 : -wts.lower;
                diag[k] = 1.0 - wts.center;
                sup[k] = k + 1 == n ? 0.0 : -wts.upper;
                u[k] = (k == 0 ? wts.lower * left : 0.0) + (k + 1 == n ? wts.upper * right : 0.0);
            }
        }
        solve_tridiagonal(sub, diag, sup, u);
        if (!select(u, exercise)) {
            std::vector<double> image(n);
            apply_into(op, u, left, right, image);
            double residual = 0.0;
            for (std::size_t k = 0; k < n; ++k) residual = std::max(residual, std::abs(image[k] - u[k]));
            const double bound = residual * op.rho() / (op.rho() - 1.0);
            return {init.with_values(std::move(u)), iter, bound, {}};
        }
    }
    throw Error(ErrorCode::MaxIterExceeded,
                "policy iteration did not settle in " + std::to_string(max_iter) + " steps");
}

} // namespace detail

/**
 * Fixed point of F or B starting from `init`, whose ghost values are the
 * Dirichlet data of the truncated problem.
 *
 * max_iter <= 0 picks a default: 10^7 Picard steps, or window size + 2
 * policy steps (policy iteration terminates within that many).
 */
inline FixedPointResult fixed_point_solve(const OperatorKind& op, const LatticeValues& init, double tol,
                                          long max_iter = 0,
                                          FixedPointMethod method = FixedPointMethod::Picard,
                                          bool record_steps = false) {
    require_same_window(init, obstacle_of(op));
    if (!(tol > 0.0)) throw Error(ErrorCode::InvalidParameter, "tol must be > 0");
    if (!(rho_of(op) > 1.0)) {
        throw Error(ErrorCode::NoContraction, "rho <= 1: the update map is not a contraction");
    }
    return std::visit(
        [&](const auto& concrete) {
            if (method == FixedPointMethod::Picard) {
                return detail::picard_solve(concrete, init, tol, max_iter > 0 ? max_iter : 10'000'000L,
                                            record_steps);
            }
            return detail::policy_solve(concrete, init,
                                        max_iter > 0 ? max_iter : static_cast<long>(init.size()) + 2);
        },
        op);
}

/**
 * Largest j with |U_j - φ_j| <= tol and φ_j > tol, after checking that this
 * contact set is exactly {j_min, ..., j_star}. Nodes where the payoff
 * vanishes never count as exercise.
 */
inline Index exercise_boundary(const LatticeValues& solution, const LatticeValues& obstacle, double tol) {
    require_same_window(solution, obstacle);
    const LogGrid& grid = solution.grid();
    Index last_contact = grid.j_min() - 1;
    Index first_gap = grid.j_max() + 1;
    bool any_contact = false;
    for (std::size_t k = 0; k < solution.size(); ++k) {
        const double gap = solution[k] - obstacle[k];
        if (gap < -tol) {
            throw Error(ErrorCode::InvalidParameter,
                        "solution below obstacle at j = " + std::to_string(grid.index(k)));
        }
        if (std::abs(gap) <= tol && obstacle[k] > tol) {
            any_contact = true;
            last_contact = grid.index(k);
        } else if (first_gap > grid.j_max()) {
            first_gap = grid.index(k);
        }
    }
    if (!any_contact) throw Error(ErrorCode::EmptyContactSet, "solution never touches the obstacle");
    if (first_gap < last_contact) {
        throw Error(ErrorCode::StructureViolation,
                    "contact set is not a left half-line: gap at j = " + std::to_string(first_gap) +
                        " below contact at j = " + std::to_string(last_contact));
    }
    return last_contact;
}

/**
 * Perpetual BTM price: fixed point of B on a lattice with spacing σ√Δt.
 */
inline FixedPointResult btm_perpetual_solve(const MarketParams& market, const BtmParams& btm,
                                            const LogGrid& grid, double tol,
                                            FixedPointMethod method = FixedPointMethod::Picard,
                                            long max_iter = 0) {
    if (std::abs(grid.dx() - btm.log_step()) > 1e-12 * btm.log_step()) {
        throw Error(ErrorCode::InvalidParameter, "BTM lattice spacing must equal sigma*sqrt(dt)");
    }
    const LatticeValues phi = sample_payoff({PayoffKind::Put, market.strike()}, grid);
    return fixed_point_solve(BtmOperator(btm, phi), phi, tol, max_iter, method);
}

} // namespace amvi
