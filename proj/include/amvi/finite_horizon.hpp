/**
 * @file finite_horizon.hpp
 * @brief Finite-maturity American options by explicit FD and BTM backward
 *        induction, and the T → ∞ limit study
 *
 * Time level n sits at t_n = nΔt; rows[N] is the payoff and
 * rows[n] = T(rows[n+1]) for the engine's update map T.
 */

#pragma once

#include "amvi/error.hpp"
#include "amvi/model.hpp"
#include "amvi/operators.hpp"
#include "amvi/perpetual.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace amvi {

struct PriceSurface {
    std::vector<LatticeValues> rows;
    double dt;
    double maturity;

    long steps() const { return static_cast<long>(rows.size()) - 1; }
    const LatticeValues& level(long n) const { return rows.at(static_cast<std::size_t>(n)); }
};

enum class Engine { Fd, Btm };

namespace detail {

inline long step_count(double maturity, double dt) {
    if (!(dt > 0.0)) throw Error(ErrorCode::NonpositiveStep, "dt must be > 0");
    if (!(maturity > 0.0)) throw Error(ErrorCode::InvalidParameter, "maturity must be > 0");
    const double ratio = maturity / dt;
    const double steps = std::round(ratio);
    if (steps < 1.0 || std::abs(ratio - steps) > 1e-9 * std::max(1.0, ratio)) {
        throw Error(ErrorCode::NonIntegerSteps,
                    "maturity " + std::to_string(maturity) + " is not a whole number of steps of " +
                        std::to_string(dt));
    }
    return static_cast<long>(steps);
}

template <LatticeOperator Op>
PriceSurface induct_surface(const Op& op, long steps, double dt) {
    std::vector<LatticeValues> rows;
    rows.reserve(static_cast<std::size_t>(steps) + 1);
    rows.push_back(op.obstacle());
    for (long k = 0; k < steps; ++k) rows.push_back(apply_operator(op, rows.back()));
    std::reverse(rows.begin(), rows.end());
    return {std::move(rows), dt, static_cast<double>(steps) * dt};
}

// Rolling two-buffer induction; returns rows[0] only.
template <LatticeOperator Op>
LatticeValues induct_price(const Op& op, long steps) {
    const LatticeValues& phi = op.obstacle();
    std::vector<double> current(phi.values().begin(), phi.values().end());
    std::vector<double> next(current.size());
    for (long k = 0; k < steps; ++k) {
        apply_into(op, current, phi.boundary().left_ghost, phi.boundary().right_ghost, next);
        current.swap(next);
    }
    return phi.with_values(std::move(current));
}

inline void require_btm_spacing(const BtmParams& btm, const LogGrid& grid) {
    if (std::abs(grid.dx() - btm.log_step()) > 1e-12 * btm.log_step()) {
        throw Error(ErrorCode::InvalidParameter, "BTM lattice spacing must equal sigma*sqrt(dt)");
    }
}

} // namespace detail

inline PriceSurface fd_american(const MarketParams& market, const LogGrid& grid, const SchemeParams& scheme,
                                PayoffKind kind, double maturity) {
    const long steps = detail::step_count(maturity, scheme.dt());
    const FdOperator op(scheme, sample_payoff({kind, market.strike()}, grid));
    return detail::induct_surface(op, steps, scheme.dt());
}

inline LatticeValues fd_american_price(const MarketParams& market, const LogGrid& grid,
                                       const SchemeParams& scheme, PayoffKind kind, double maturity) {
    const long steps = detail::step_count(maturity, scheme.dt());
    return detail::induct_price(FdOperator(scheme, sample_payoff({kind, market.strike()}, grid)), steps);
}

/// Default BTM window: S_j = S0·u^j over j = -J..J, J = max(N, default half-width).
inline LogGrid btm_grid(const MarketParams& market, const BtmParams& btm, long steps, double spot) {
    const LogGrid base = LogGrid::around_strike(market.strike(), market.sigma(), btm.log_step());
    const Index half = std::max<Index>(steps, base.j_max());
    return LogGrid(btm.log_step(), std::log(spot), -half, half);
}

inline PriceSurface btm_american(const MarketParams& market, const BtmParams& btm, PayoffKind kind,
                                 long steps, const LogGrid& grid) {
    if (steps < 1) throw Error(ErrorCode::InvalidParameter, "BTM needs N >= 1");
    detail::require_btm_spacing(btm, grid);
    const BtmOperator op(btm, sample_payoff({kind, market.strike()}, grid));
    return detail::induct_surface(op, steps, btm.dt());
}

inline PriceSurface btm_american(const MarketParams& market, const BtmParams& btm, PayoffKind kind,
                                 long steps, double spot) {
    return btm_american(market, btm, kind, steps, btm_grid(market, btm, steps, spot));
}

inline LatticeValues btm_american_price(const MarketParams& market, const BtmParams& btm, PayoffKind kind,
                                        long steps, const LogGrid& grid) {
    if (steps < 1) throw Error(ErrorCode::InvalidParameter, "BTM needs N >= 1");
    detail::require_btm_spacing(btm, grid);
    return detail::induct_price(BtmOperator(btm, sample_payoff({kind, market.strike()}, grid)), steps);
}

/// ‖rows[0] - rows[1]‖∞.
inline double time_independence_gap(const PriceSurface& surface) {
    if (surface.steps() < 2) throw Error(ErrorCode::TooFewLevels, "need N >= 2 time levels");
    return sup_distance(surface.level(0), surface.level(1));
}

/// 2E/ρ^{N-1}, the contraction bound on the time-independence gap.
inline double time_independence_bound(double strike, double rho, long steps) {
    return 2.0 * strike / std::pow(rho, static_cast<double>(steps - 1));
}

// ---------------------------------------------------------------------------
// Maturity limit
// ---------------------------------------------------------------------------

struct MaturityEntry {
    double maturity;
    long steps;
    /// ‖V₀(T_k) - V₀(T_{k-1})‖; NaN for the first entry.
    double gap_to_previous;
    /// ρ^{-N_{k-1}} ‖V_{N_{k-1}}(T_k) - φ‖, the contraction bound on that gap.
    double gap_bound;
    /// min over shared levels n and j of V_n(T_k) - V_n(T_{k-1}); +∞ for the first entry.
    double min_increment;
    /// ‖V₀(T_k) - U*‖ against the perpetual fixed point on the same lattice.
    double perpetual_gap;
    double perpetual_bound;
    /// ‖rows[0] - rows[1]‖ and 2E/ρ^{N-1}; NaN when N < 2.
    double time_gap;
    double time_gap_bound;
};

struct MaturityLimitReport {
    std::vector<MaturityEntry> entries;
    double rho;
    double perpetual_error_bound;

    bool monotone_in_maturity(double tol = 1e-12) const {
        return std::all_of(entries.begin(), entries.end(),
                           [&](const MaturityEntry& e) { return e.min_increment >= -tol; });
    }

    bool gaps_decreasing() const {
        for (std::size_t k = 2; k < entries.size(); ++k) {
            if (!(entries[k].gap_to_previous < entries[k - 1].gap_to_previous)) return false;
        }
        return true;
    }

    bool gaps_within_bound(double slack = 1e-12) const {
        for (std::size_t k = 1; k < entries.size(); ++k) {
            if (!(entries[k].gap_to_previous <= entries[k].gap_bound + slack)) return false;
        }
        return true;
    }
};

struct MaturityLimitResult {
    LatticeValues limit;
    LatticeValues perpetual;
    MaturityLimitReport report;
};

/**
 * Prices every maturity in `schedule` on one lattice with a shared Δt and
 * compares successive maturities level by level. The perpetual reference is
 * the fixed point of the same update map, found by policy iteration.
 *
 * For Engine::Btm the grid spacing must be σ√Δt.
 */
inline MaturityLimitResult maturity_limit(const MarketParams& market, Engine engine, PayoffKind kind,
                                          std::span<const double> schedule, double tol, const LogGrid& grid,
                                          double dt) {
    if (schedule.empty()) throw Error(ErrorCode::InvalidParameter, "empty maturity schedule");
    for (std::size_t k = 1; k < schedule.size(); ++k) {
        if (!(schedule[k] > schedule[k - 1])) {
            throw Error(ErrorCode::ScheduleNotIncreasing, "maturities must be strictly increasing");
        }
    }
    std::vector<long> steps;
    for (double maturity : schedule) steps.push_back(detail::step_count(maturity, dt));

    const LatticeValues phi = sample_payoff({kind, market.strike()}, grid);
    const OperatorKind op = engine == Engine::Fd
                                ? OperatorKind(FdOperator(derive_scheme(market, grid.dx(), dt), phi))
                                : OperatorKind(BtmOperator(derive_btm(market, dt), phi));
    if (engine == Engine::Btm) detail::require_btm_spacing(std::get<BtmOperator>(op).btm(), grid);
    const double rho = rho_of(op);

    std::optional<FixedPointResult> perpetual;
    if (rho > 1.0) perpetual = fixed_point_solve(op, phi, tol, 0, FixedPointMethod::Policy);

    const double nan = std::numeric_limits<double>::quiet_NaN();
    MaturityLimitReport report{{}, rho, perpetual ? perpetual->error_bound : nan};
    std::optional<PriceSurface> previous;
    for (std::size_t k = 0; k < schedule.size(); ++k) {
        PriceSurface surface = std::visit(
            [&](const auto& concrete) { return detail::induct_surface(concrete, steps[k], dt); }, op);
        MaturityEntry entry{schedule[k], steps[k], nan, nan, std::numeric_limits<double>::infinity(),
                            nan, nan, nan, nan};
        if (previous) {
            const long shared = previous->steps();
            entry.gap_to_previous = sup_distance(surface.level(0), previous->level(0));
            entry.gap_bound =
                sup_distance(surface.level(shared), phi) / std::pow(rho, static_cast<double>(shared));
            for (long n = 0; n <= shared; ++n) {
                const auto now = surface.level(n).values();
                const auto before = previous->level(n).values();
                for (std::size_t j = 0; j < now.size(); ++j) {
                    entry.min_increment = std::min(entry.min_increment, now[j] - before[j]);
                }
            }
        }
        if (perpetual) {
            entry.perpetual_gap = sup_distance(surface.level(0), perpetual->solution);
            entry.perpetual_bound = 2.0 * market.strike() / std::pow(rho, static_cast<double>(steps[k]));
        }
        if (steps[k] >= 2) {
            entry.time_gap = time_independence_gap(surface);
            entry.time_gap_bound = time_independence_bound(market.strike(), rho, steps[k]);
        }
        report.entries.push_back(entry);
        previous = std::move(surface);
    }
    LatticeValues perpetual_solution = perpetual ? perpetual->solution : phi;
    return {previous->level(0), std::move(perpetual_solution), std::move(report)};
}

} // namespace amvi
