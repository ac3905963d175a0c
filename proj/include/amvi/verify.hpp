/**
 * @file verify.hpp
 * @brief Batch checkers that turn the solver properties into pass/fail reports
 *
 * A CheckReport holds measured quantities, each with its own limit; the
 * report passes exactly when every measurement is within its limit.
 */

#pragma once

#include "amvi/error.hpp"
#include "amvi/finite_horizon.hpp"
#include "amvi/format.hpp"
#include "amvi/model.hpp"
#include "amvi/operators.hpp"
#include "amvi/perpetual.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace amvi {

enum class Bound { AtMost, AtLeast };

struct Measurement {
    std::string name;
    double value;
    double limit;
    Bound bound = Bound::AtMost;

    bool ok() const {
        if (std::isnan(value)) return false;
        return bound == Bound::AtMost ? value <= limit : value >= limit;
    }
};

struct CheckReport {
    std::string check_name;
    std::vector<Measurement> measured;
    std::vector<std::pair<std::string, std::string>> context;

    bool passed() const {
        return std::all_of(measured.begin(), measured.end(), [](const Measurement& m) { return m.ok(); });
    }

    const Measurement* find(std::string_view name) const {
        for (const auto& m : measured) {
            if (m.name == name) return &m;
        }
        return nullptr;
    }

    CheckReport& with(std::string key, std::string value) {
        context.emplace_back(std::move(key), std::move(value));
        return *this;
    }
    CheckReport& with(std::string key, double value) { return with(std::move(key), format_number(value)); }
};

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Individual checkers
// ---------------------------------------------------------------------------

/**
 * On the continuation region {U_j > φ_j + cont_tol}: |I_j(U)| <= eq_tol, and
 * no strict interior local maximum or minimum.
 */
inline CheckReport check_max_principle(const LatticeValues& lattice, const SchemeParams& scheme,
                                       const LatticeValues& obstacle, double cont_tol = 1e-9,
                                       double eq_tol = 1e-10) {
    require_same_window(lattice, obstacle);
    const LogGrid& grid = lattice.grid();
    constexpr double kFlat = 1e-12;
    double worst_residual = 0.0;
    Index worst_j = grid.j_min() - 1;
    double extrema = 0.0;
    Index first_extremum = grid.j_min() - 1;
    double continuation_nodes = 0.0;
    for (Index j = grid.j_min(); j <= grid.j_max(); ++j) {
        const double u = lattice.at(j);
        if (!(u > obstacle.at(j) + cont_tol)) continue;
        continuation_nodes += 1.0;
        const double residual = std::abs(discrete_bs_apply(lattice, j, scheme));
        if (residual > worst_residual) {
            worst_residual = residual;
            worst_j = j;
        }
        const double lower = lattice.with_ghosts(j - 1);
        const double upper = lattice.with_ghosts(j + 1);
        const bool peak = u > lower + kFlat && u > upper + kFlat;
        const bool pit = u < lower - kFlat && u < upper - kFlat;
        if (peak || pit) {
            if (extrema == 0.0) first_extremum = j;
            extrema += 1.0;
        }
    }
    CheckReport report{"max_principle", {}, {}};
    report.measured.push_back({"max_operator_residual", worst_residual, eq_tol});
    report.measured.push_back({"interior_extrema", extrema, 0.0});
    report.with("continuation_nodes", continuation_nodes);
    if (worst_residual > 0.0) report.with("worst_j", static_cast<double>(worst_j));
    if (extrema > 0.0) report.with("first_extremum_j", static_cast<double>(first_extremum));
    return report;
}

/**
 * Largest ‖TU - TV‖/‖U - V‖ over seeded random pairs drawn uniformly in
 * [0, upper] per node; passes when it stays within 1/ρ + 1e-12.
 */
inline CheckReport check_contraction(const OperatorKind& op, long trials, std::uint64_t seed, double upper) {
    if (trials < 1) throw Error(ErrorCode::InvalidParameter, "trials must be >= 1");
    const LatticeValues& phi = obstacle_of(op);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> draw(0.0, upper);
    auto random_lattice = [&] {
        std::vector<double> values(phi.size());
        for (double& v : values) v = draw(rng);
        return phi.with_values(std::move(values));
    };
    double worst = 0.0;
    for (long t = 0; t < trials; ++t) {
        const LatticeValues u = random_lattice();
        const LatticeValues v = random_lattice();
        const double before = sup_distance(u, v);
        const double after = sup_distance(apply(op, u), apply(op, v));
        worst = std::max(worst, before > 0.0 ? after / before : 0.0);
    }
    const double rho = rho_of(op);
    CheckReport report{std::holds_alternative<FdOperator>(op) ? "contraction_F" : "contraction_B", {}, {}};
    report.measured.push_back({"max_lipschitz_ratio", worst, 1.0 / rho + 1e-12});
    report.with("rho", rho).with("trials", static_cast<double>(trials)).with("seed", std::to_string(seed));
    return report;
}

namespace detail {

struct BoundViolations {
    double below_payoff = 0.0;
    double above_cap = 0.0;
    double wrong_direction = 0.0;
};

inline BoundViolations lattice_violations(const LatticeValues& lattice, const Payoff& payoff) {
    BoundViolations out;
    const LogGrid& grid = lattice.grid();
    for (std::size_t k = 0; k < lattice.size(); ++k) {
        const double spot = grid.price(grid.index(k));
        const double v = lattice[k];
        out.below_payoff = std::max(out.below_payoff, payoff(spot) - v);
        const double cap = payoff.kind == PayoffKind::Put ? payoff.strike : spot;
        out.above_cap = std::max(out.above_cap, v - cap);
        if (k > 0) {
            const double rise = v - lattice[k - 1];
            out.wrong_direction =
                std::max(out.wrong_direction, payoff.kind == PayoffKind::Put ? rise : -rise);
        }
    }
    return out;
}

} // namespace detail

/**
 * Put: φ <= U <= E and nonincreasing in j. Call: φ <= U <= S_j and
 * nondecreasing in j.
 */
inline CheckReport check_bounds_and_monotonicity(const LatticeValues& lattice, const Payoff& payoff,
                                                 double tol = 1e-12) {
    const auto v = detail::lattice_violations(lattice, payoff);
    CheckReport report{"bounds_monotonicity", {}, {}};
    report.measured.push_back({"below_payoff", v.below_payoff, tol});
    report.measured.push_back({"above_cap", v.above_cap, tol});
    report.measured.push_back({"monotone_in_j_violation", v.wrong_direction, tol});
    report.with("payoff", payoff.kind == PayoffKind::Put ? "put" : "call");
    return report;
}

/// Surface version: every level as above, plus rows[n] <= rows[n-1] (value decreasing in t).
inline CheckReport check_bounds_and_monotonicity(const PriceSurface& surface, const Payoff& payoff,
                                                 double tol = 1e-12) {
    detail::BoundViolations worst;
    double later_exceeds_earlier = 0.0;
    for (long n = 0; n <= surface.steps(); ++n) {
        const auto v = detail::lattice_violations(surface.level(n), payoff);
        worst.below_payoff = std::max(worst.below_payoff, v.below_payoff);
        worst.above_cap = std::max(worst.above_cap, v.above_cap);
        worst.wrong_direction = std::max(worst.wrong_direction, v.wrong_direction);
        if (n > 0) {
            const auto now = surface.level(n).values();
            const auto before = surface.level(n - 1).values();
            for (std::size_t j = 0; j < now.size(); ++j) {
                later_exceeds_earlier = std::max(later_exceeds_earlier, now[j] - before[j]);
            }
        }
    }
    CheckReport report{"bounds_monotonicity", {}, {}};
    report.measured.push_back({"below_payoff", worst.below_payoff, tol});
    report.measured.push_back({"above_cap", worst.above_cap, tol});
    report.measured.push_back({"monotone_in_j_violation", worst.wrong_direction, tol});
    report.measured.push_back({"monotone_in_t_violation", later_exceeds_earlier, tol});
    report.with("payoff", payoff.kind == PayoffKind::Put ? "put" : "call")
        .with("levels", static_cast<double>(surface.steps() + 1));
    return report;
}

/**
 * FD against BTM on a matched lattice (Δx = σ√Δt, so w = 1).
 *
 * The two maps then differ only through a versus θ, so
 *   ‖F X - B Y‖ <= ‖X - Y‖/ρ + |a - θ| max_j |Y_{j+1} - Y_{j-1}| / ρ,
 * and summing this along the BTM surface bounds the gap at t = 0. The
 * weights themselves must agree to O(Δt); the check uses |a - θ| <= Δt.
 */
inline CheckReport check_engine_consistency(const MarketParams& market, PayoffKind kind, double maturity,
                                            const LogGrid& grid, double dt) {
    const BtmParams btm = derive_btm(market, dt);
    const SchemeParams scheme = derive_scheme(market, grid.dx(), dt);
    if (std::abs(scheme.w() - 1.0) > 1e-12) {
        throw Error(ErrorCode::InvalidParameter, "engine consistency needs dx = sigma*sqrt(dt)");
    }
    const PriceSurface fd = fd_american(market, grid, scheme, kind, maturity);
    const PriceSurface tree = btm_american(market, btm, kind, fd.steps(), grid);
    const double weight_gap = std::abs(scheme.a() - btm.theta());
    const double rho = scheme.rho();

    double bound = 0.0;
    for (long n = tree.steps() - 1; n >= 0; --n) {
        const LatticeValues& next = tree.level(n + 1);
        double spread = 0.0;
        for (Index j = grid.j_min(); j <= grid.j_max(); ++j) {
            spread = std::max(spread, std::abs(next.with_ghosts(j + 1) - next.with_ghosts(j - 1)));
        }
        bound = (bound + weight_gap * spread) / rho;
    }
    CheckReport report{"engine_consistency", {}, {}};
    report.measured.push_back({"a_theta_gap", weight_gap, dt});
    report.measured.push_back({"price_gap", sup_distance(fd.level(0), tree.level(0)), bound * (1.0 + 1e-9) + 1e-12});
    report.with("maturity", maturity).with("steps", static_cast<double>(fd.steps()));
    return report;
}

// ---------------------------------------------------------------------------
// Convergence to the continuous price
// ---------------------------------------------------------------------------

struct DiscretizationError {
    /// sup over S in [lo, hi] of |u_Δx(ln S) - V(S)|, u_Δx(x) = U_j on
    /// [(j-1/2)Δx + c, (j+1/2)Δx + c).
    double extension;
    /// max over nodes S_j in [lo, hi] of |U_j - V(S_j)|.
    double nodal;
};

inline DiscretizationError perpetual_discretization_error(const MarketParams& market, double dx, double lo,
                                                          double hi) {
    const SchemeParams scheme = derive_scheme(market, dx);
    const ContinuousPut exact = continuous_put_solution(market);
    const double c = std::log(market.strike());
    const double x_lo = std::log(lo);
    const double x_hi = std::log(hi);
    const auto j_lo = static_cast<Index>(std::floor((std::min(x_lo, std::log(0.5 * exact.boundary)) - c) / dx)) - 1;
    const auto j_hi = static_cast<Index>(std::ceil((x_hi - c) / dx)) + 1;
    const PerpetualSolution solution = solve_closed_form(market, LogGrid(dx, c, j_lo, j_hi), scheme);
    const LogGrid& grid = solution.lattice.grid();

    DiscretizationError err{0.0, 0.0};
    for (Index j = grid.j_min(); j <= grid.j_max(); ++j) {
        const double u = solution.lattice.at(j);
        const double cell_lo = std::max(grid.log_price(j) - 0.5 * dx, x_lo);
        const double cell_hi = std::min(grid.log_price(j) + 0.5 * dx, x_hi);
        if (cell_lo <= cell_hi) {
            // V is monotone, so the sup over the cell sits at an end point.
            err.extension = std::max({err.extension, std::abs(u - exact.value(std::exp(cell_lo))),
                                      std::abs(u - exact.value(std::exp(cell_hi)))});
        }
        const double x = grid.log_price(j);
        if (x >= x_lo && x <= x_hi) err.nodal = std::max(err.nodal, std::abs(u - exact.value(std::exp(x))));
    }
    return err;
}

struct ConvergenceResult {
    CheckReport report;
    std::vector<double> dx;
    std::vector<DiscretizationError> errors;
    std::vector<double> factors;
};

/**
 * Discrete perpetual put (w = 1) against the continuous price over
 * S in [E/4, 4E] for each Δx; passes when every refinement cuts the
 * extension error by at least `min_factor`.
 */
inline ConvergenceResult convergence_study(const MarketParams& market, std::span<const double> dx_schedule,
                                           double min_factor = 1.5) {
    if (dx_schedule.empty()) throw Error(ErrorCode::InvalidParameter, "empty dx schedule");
    for (std::size_t k = 1; k < dx_schedule.size(); ++k) {
        if (!(dx_schedule[k] < dx_schedule[k - 1])) {
            throw Error(ErrorCode::InvalidParameter, "dx schedule must be strictly decreasing");
        }
    }
    const double lo = 0.25 * market.strike();
    const double hi = 4.0 * market.strike();
    ConvergenceResult result{{"convergence", {}, {}}, {}, {}, {}};
    for (double dx : dx_schedule) {
        result.dx.push_back(dx);
        result.errors.push_back(perpetual_discretization_error(market, dx, lo, hi));
        result.report.measured.push_back({"error[dx=" + format_number(dx) + "]", result.errors.back().extension,
                                          kInfinity});
    }
    for (std::size_t k = 1; k < result.errors.size(); ++k) {
        const double factor = result.errors[k - 1].extension / result.errors[k].extension;
        result.factors.push_back(factor);
        result.report.measured.push_back({"factor[" + format_number(dx_schedule[k - 1]) + "->" +
                                              format_number(dx_schedule[k]) + "]",
                                          factor, min_factor, Bound::AtLeast});
    }
    result.report.with("rate", market.rate()).with("dividend", market.dividend()).with("sigma", market.sigma());
    return result;
}

// ---------------------------------------------------------------------------
// Sweep runner
// ---------------------------------------------------------------------------

struct SweepPoint {
    double rate;
    double dividend;
    double sigma;
    /// Perpetual-solve overrides; defaults come from VerifyConfig (dt: w = 1).
    std::optional<double> dx;
    std::optional<double> dt;
};

inline std::vector<SweepPoint> default_sweep() {
    std::vector<SweepPoint> points;
    for (double r : {0.02, 0.05, 0.1}) {
        for (double q : {0.0, 0.02, 0.08}) {
            for (double s : {0.1, 0.2, 0.4}) points.push_back({r, q, s, std::nullopt, std::nullopt});
        }
    }
    return points;
}

struct VerifyConfig {
    double strike = 100.0;
    std::vector<SweepPoint> sweep = default_sweep();
    double dx = 0.005;
    double finite_dt = 0.01;
    std::vector<double> maturities{0.5, 1.0, 2.0, 4.0, 8.0};
    std::vector<double> convergence_dx{0.04, 0.02, 0.01, 0.005};
    long trials = 1000;
    std::uint64_t seed = 42;
    double agreement_tol = 1e-8;
    unsigned jobs = 1;
};

namespace detail {

inline void add_point_context(CheckReport& report, const SweepPoint& point) {
    report.with("rate", point.rate).with("dividend", point.dividend).with("sigma", point.sigma);
}

inline CheckReport failed_check(std::string name, const SweepPoint& point, const Error& error) {
    CheckReport report{std::move(name), {{"errors", 1.0, 0.0}}, {}};
    add_point_context(report, point);
    report.with("error", error.what());
    return report;
}

inline std::vector<CheckReport> verify_point(const VerifyConfig& cfg, const SweepPoint& point, std::size_t index) {
    std::vector<CheckReport> out;
    auto push = [&](CheckReport report) {
        add_point_context(report, point);
        out.push_back(std::move(report));
    };

    std::optional<MarketParams> market;
    std::optional<SchemeParams> scheme;
    const double dx = point.dx.value_or(cfg.dx);
    try {
        market.emplace(point.rate, point.dividend, point.sigma, cfg.strike);
        scheme = point.dt ? derive_scheme(*market, dx, *point.dt) : derive_scheme(*market, dx);
    } catch (const Error& error) {
        out.push_back(failed_check("stability", point, error));
        return out;
    }
    {
        const StabilityReport stability = stability_check(*scheme);
        CheckReport report{"stability", {{"violations", static_cast<double>(stability.violations.size()), 0.0}}, {}};
        report.with("w", scheme->w()).with("a", scheme->a()).with("rho", scheme->rho());
        push(std::move(report));
    }

    const double strike = cfg.strike;
    const Payoff put{PayoffKind::Put, strike};

    // Perpetual solutions on the tail-aware window.
    std::optional<PerpetualSolution> closed;
    try {
        const LogGrid window = perpetual_window(*market, dx);
        closed = solve_closed_form(*market, window, *scheme);
        const LatticeValues phi = sample_payoff(put, window);
        const FixedPointResult fixed =
            fixed_point_solve(FdOperator(*scheme, phi), phi, cfg.agreement_tol, 0, FixedPointMethod::Policy);
        const Index fixed_star = exercise_boundary(fixed.solution, phi, 1e-9);

        CheckReport unique{"uniqueness", {}, {}};
        unique.measured.push_back({"sup_distance", sup_distance(closed->lattice, fixed.solution), cfg.agreement_tol});
        unique.measured.push_back(
            {"j_star_mismatch", std::abs(static_cast<double>(fixed_star - closed->j_star)), 0.0});
        unique.with("nodes", static_cast<double>(window.size()))
            .with("policy_iterations", static_cast<double>(fixed.iterations));
        push(std::move(unique));

        CheckReport principle = check_max_principle(closed->lattice, *scheme, phi);
        push(std::move(principle));

        // The checker must notice a 1e-3 bump at a continuation node.
        const Index bump_j = std::min(closed->j_star + 5, window.j_max());
        std::vector<double> bumped(closed->lattice.values().begin(), closed->lattice.values().end());
        bumped[window.offset(bump_j)] += 1e-3;
        const CheckReport perturbed = check_max_principle(closed->lattice.with_values(std::move(bumped)), *scheme, phi);
        CheckReport sensitivity{"max_principle_sensitivity", {{"perturbation_detected", perturbed.passed() ? 0.0 : 1.0, 1.0, Bound::AtLeast}}, {}};
        sensitivity.with("perturbed_j", static_cast<double>(bump_j));
        push(std::move(sensitivity));

        push(check_bounds_and_monotonicity(closed->lattice, put));

        const double q = point.dividend;
        const double cap = q > 0.0 ? std::min(point.rate * strike / q, strike) : strike;
        CheckReport bound{"boundary_bound",
                          {{"boundary_excess", closed->boundary_price() - cap * (1.0 + dx), 0.0}}, {}};
        bound.with("S_j_star", closed->boundary_price()).with("cap", cap);
        push(std::move(bound));
    } catch (const Error& error) {
        out.push_back(failed_check("perpetual", point, error));
    }

    // Contraction of F on the perpetual scheme and of B on the finite-horizon step.
    try {
        const LogGrid fd_grid = LogGrid::around_strike(strike, point.sigma, dx);
        const OperatorKind fd = FdOperator(*scheme, sample_payoff(put, fd_grid));
        push(check_contraction(fd, cfg.trials, cfg.seed + 2 * index, 2.0 * strike));

        const BtmParams btm = derive_btm(*market, cfg.finite_dt);
        const LogGrid btm_window = LogGrid::around_strike(strike, point.sigma, btm.log_step());
        const OperatorKind tree = BtmOperator(btm, sample_payoff(put, btm_window));
        push(check_contraction(tree, cfg.trials, cfg.seed + 2 * index + 1, 2.0 * strike));
    } catch (const Error& error) {
        out.push_back(failed_check("contraction", point, error));
    }

    // Finite horizon on the matched lattice Δx = σ√Δt (w = 1).
    try {
        const double fdx = point.sigma * std::sqrt(cfg.finite_dt);
        const LogGrid grid = LogGrid::around_strike(strike, point.sigma, fdx);
        for (Engine engine : {Engine::Fd, Engine::Btm}) {
            const MaturityLimitResult study =
                maturity_limit(*market, engine, PayoffKind::Put, cfg.maturities, 1e-10, grid, cfg.finite_dt);
            const auto& rep = study.report;
            const auto& last = rep.entries.back();
            double worst_increment = kInfinity;
            for (const auto& e : rep.entries) worst_increment = std::min(worst_increment, e.min_increment);
            const std::string tag = engine == Engine::Fd ? "fd" : "btm";

            CheckReport mono{"maturity_monotone_" + tag, {{"min_increment", worst_increment, -1e-12, Bound::AtLeast}}, {}};
            push(std::move(mono));

            CheckReport indep{"time_independence_" + tag, {}, {}};
            indep.measured.push_back({"gap", last.time_gap, last.time_gap_bound});
            indep.with("maturity", last.maturity).with("steps", static_cast<double>(last.steps));
            push(std::move(indep));

            CheckReport limit{"maturity_limit_" + tag, {}, {}};
            limit.measured.push_back({"perpetual_gap", last.perpetual_gap, last.perpetual_bound + 1e-8});
            limit.with("maturity", last.maturity);
            push(std::move(limit));
        }
        const double horizon = cfg.maturities.back();
        push(check_engine_consistency(*market, PayoffKind::Put, horizon, grid, cfg.finite_dt));
        const Payoff put_payoff{PayoffKind::Put, strike};
        {
            CheckReport fd_bounds = check_bounds_and_monotonicity(
                fd_american(*market, grid, derive_scheme(*market, fdx, cfg.finite_dt), PayoffKind::Put, horizon),
                put_payoff);
            fd_bounds.check_name = "surface_bounds_fd";
            push(std::move(fd_bounds));
            const BtmParams btm = derive_btm(*market, cfg.finite_dt);
            CheckReport btm_bounds = check_bounds_and_monotonicity(
                btm_american(*market, btm, PayoffKind::Put, amvi::detail::step_count(horizon, cfg.finite_dt), grid),
                put_payoff);
            btm_bounds.check_name = "surface_bounds_btm";
            push(std::move(btm_bounds));
        }
    } catch (const Error& error) {
        out.push_back(failed_check("finite_horizon", point, error));
    }
    return out;
}

} // namespace detail

/**
 * Every checker over every sweep point, followed by the convergence study and
 * the r = 0 degenerate case. Output order is fixed by the sweep order, not by
 * which worker finished first.
 */
inline std::vector<CheckReport> run_verification(const VerifyConfig& cfg) {
    std::vector<std::vector<CheckReport>> per_point(cfg.sweep.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k = next++; k < cfg.sweep.size(); k = next++) {
            per_point[k] = detail::verify_point(cfg, cfg.sweep[k], k);
        }
    };
    const unsigned jobs = std::max(1u, std::min<unsigned>(cfg.jobs, static_cast<unsigned>(cfg.sweep.size())));
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < jobs; ++t) pool.emplace_back(worker);
    }

    std::vector<CheckReport> reports;
    for (auto& chunk : per_point) {
        for (auto& report : chunk) reports.push_back(std::move(report));
    }

    const MarketParams reference(0.05, 0.0, 0.2, cfg.strike);
    try {
        reports.push_back(convergence_study(reference, cfg.convergence_dx).report);
    } catch (const Error& error) {
        reports.push_back(detail::failed_check("convergence", {0.05, 0.0, 0.2, {}, {}}, error));
    }

    {
        const MarketParams flat(0.0, 0.0, 0.2, cfg.strike);
        const SchemeParams scheme = derive_scheme(flat, cfg.dx);
        const CharRoots roots = char_roots(scheme);
        double no_boundary = 0.0;
        try {
            solve_closed_form(flat, LogGrid::around_strike(cfg.strike, 0.2, cfg.dx), scheme);
        } catch (const Error& error) {
            no_boundary = error.code() == ErrorCode::NoBoundary ? 1.0 : 0.0;
        }
        CheckReport degenerate{"degenerate_r0", {}, {}};
        degenerate.measured.push_back({"xi1_minus_1", std::abs(roots.xi1 - 1.0), 1e-15});
        degenerate.measured.push_back({"no_boundary_raised", no_boundary, 1.0, Bound::AtLeast});
        degenerate.with("rate", 0.0).with("dividend", 0.0).with("sigma", 0.2);
        reports.push_back(std::move(degenerate));
    }
    return reports;
}

} // namespace amvi
