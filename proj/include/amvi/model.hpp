/**
 * @file model.hpp
 * @brief Market inputs, log-price grids, scheme constants, payoffs and lattices
 *
 * Everything the solvers share. Prices live on a uniform log grid
 *   S_j = exp(j·dx + c),  j = j_min..j_max
 * and a lattice carries one value per node plus Dirichlet data for the two
 * ghost nodes j_min-1 and j_max+1.
 */

#pragma once

#include "amvi/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace amvi {

using Index = std::int64_t;

/**
 * Black-Scholes environment: rate r, dividend yield q, volatility σ, strike E.
 *
 * q may be negative. r, σ and E are validated on construction.
 */
class MarketParams {
public:
    MarketParams(double rate, double dividend, double sigma, double strike)
        : rate_(rate), dividend_(dividend), sigma_(sigma), strike_(strike)
    {
        if (!std::isfinite(rate) || !std::isfinite(dividend) ||
            !std::isfinite(sigma) || !std::isfinite(strike)) {
            throw Error(ErrorCode::InvalidParameter, "market parameters must be finite");
        }
        if (sigma <= 0.0) throw Error(ErrorCode::InvalidParameter, "sigma must be > 0");
        if (strike <= 0.0) throw Error(ErrorCode::InvalidParameter, "strike must be > 0");
        if (rate < 0.0) throw Error(ErrorCode::InvalidParameter, "rate must be >= 0");
    }

    double rate() const { return rate_; }
    double dividend() const { return dividend_; }
    double sigma() const { return sigma_; }
    double strike() const { return strike_; }
    double variance() const { return sigma_ * sigma_; }

    /// Log-price drift r - q - σ²/2.
    double log_drift() const { return rate_ - dividend_ - 0.5 * sigma_ * sigma_; }

private:
    double rate_;
    double dividend_;
    double sigma_;
    double strike_;
};

/**
 * Finite window j_min..j_max of the uniform log-price lattice.
 */
class LogGrid {
public:
    LogGrid(double dx, double anchor, Index j_min, Index j_max)
        : dx_(dx), anchor_(anchor), j_min_(j_min), j_max_(j_max)
    {
        if (!(dx > 0.0) || !std::isfinite(dx)) {
            throw Error(ErrorCode::NonpositiveStep, "grid step dx must be > 0");
        }
        if (!std::isfinite(anchor)) throw Error(ErrorCode::InvalidParameter, "grid anchor must be finite");
        if (j_min >= j_max) throw Error(ErrorCode::InvalidParameter, "grid window needs j_min < j_max");
    }

    /**
     * Default window: j = 0 at the strike and
     * J = max(ceil(8σ/dx), ceil(ln 20/dx)) nodes on each side, so the
     * price range covers at least [E/20, 20E].
     */
    static LogGrid around_strike(double strike, double sigma, double dx) {
        if (!(dx > 0.0)) throw Error(ErrorCode::NonpositiveStep, "grid step dx must be > 0");
        const auto half = static_cast<Index>(
            std::max(std::ceil(8.0 * sigma / dx), std::ceil(std::log(20.0) / dx)));
        return LogGrid(dx, std::log(strike), -half, half);
    }

    double dx() const { return dx_; }
    double anchor() const { return anchor_; }
    Index j_min() const { return j_min_; }
    Index j_max() const { return j_max_; }
    std::size_t size() const { return static_cast<std::size_t>(j_max_ - j_min_ + 1); }

    bool contains(Index j) const { return j >= j_min_ && j <= j_max_; }

    double log_price(Index j) const { return static_cast<double>(j) * dx_ + anchor_; }
    double price(Index j) const { return std::exp(log_price(j)); }

    std::size_t offset(Index j) const { return static_cast<std::size_t>(j - j_min_); }
    Index index(std::size_t offset) const { return j_min_ + static_cast<Index>(offset); }

    /// Same window with the end points moved; dx and anchor unchanged.
    LogGrid with_window(Index j_min, Index j_max) const { return LogGrid(dx_, anchor_, j_min, j_max); }

    bool operator==(const LogGrid&) const = default;

private:
    double dx_;
    double anchor_;
    Index j_min_;
    Index j_max_;
};

/**
 * Explicit-scheme constants
 *   w = σ²Δt/Δx²,  a = 1/2 + (r-q-σ²/2)Δx/(2σ²),  ρ = 1 + rΔt.
 *
 * The constructor only rejects non-finite input so unstable combinations can
 * still be diagnosed by stability_check(); derive_scheme() is the validating
 * factory.
 */
class SchemeParams {
public:
    SchemeParams(double dt, double w, double a, double rho)
        : dt_(dt), w_(w), a_(a), rho_(rho)
    {
        if (!std::isfinite(dt) || !std::isfinite(w) || !std::isfinite(a) || !std::isfinite(rho)) {
            throw Error(ErrorCode::InvalidParameter, "scheme constants must be finite");
        }
    }

    double dt() const { return dt_; }
    double w() const { return w_; }
    double a() const { return a_; }
    double rho() const { return rho_; }

    /// (r-q-σ²/2)Δx/σ², the quantity bounded by 1 in the convergence hypothesis.
    double drift_ratio() const { return 2.0 * a_ - 1.0; }

private:
    double dt_;
    double w_;
    double a_;
    double rho_;
};

namespace detail {
// w = 1 computed through σ²Δt/Δx² can land a few ulps above 1.
inline constexpr double kRatioSlack = 8.0 * std::numeric_limits<double>::epsilon();

inline std::string scheme_violation(double w, double a) {
    if (!(w > 0.0) || w > 1.0 + kRatioSlack) {
        return "w = " + std::to_string(w) + " violates 0 < w <= 1";
    }
    if (!(a > 0.0 && a < 1.0)) {
        return "a = " + std::to_string(a) + " violates 0 < a < 1";
    }
    return {};
}
} // namespace detail

inline SchemeParams derive_scheme(const MarketParams& market, double dx, double dt) {
    if (!(dx > 0.0) || !(dt > 0.0)) {
        throw Error(ErrorCode::NonpositiveStep, "dx and dt must be > 0");
    }
    const double w = market.variance() * dt / (dx * dx);
    const double a = 0.5 + market.log_drift() * dx / (2.0 * market.variance());
    const double rho = 1.0 + market.rate() * dt;
    if (auto why = detail::scheme_violation(w, a); !why.empty()) {
        throw Error(ErrorCode::StabilityViolation, why);
    }
    return SchemeParams(dt, std::min(w, 1.0), a, rho);
}

/// Δt = Δx²/σ², i.e. w = 1 exactly.
inline SchemeParams derive_scheme(const MarketParams& market, double dx) {
    if (!(dx > 0.0)) throw Error(ErrorCode::NonpositiveStep, "dx must be > 0");
    const double dt = dx * dx / market.variance();
    const double a = 0.5 + market.log_drift() * dx / (2.0 * market.variance());
    if (auto why = detail::scheme_violation(1.0, a); !why.empty()) {
        throw Error(ErrorCode::StabilityViolation, why);
    }
    return SchemeParams(dt, 1.0, a, 1.0 + market.rate() * dt);
}

/**
 * Binomial-tree constants
 *   u = exp(σ√Δt), d = 1/u, ρ = 1 + rΔt, η = 1 + qΔt, θ = (ρ/η - d)/(u - d).
 */
class BtmParams {
public:
    BtmParams(double dt, double up, double down, double rho, double eta, double theta)
        : dt_(dt), up_(up), down_(down), rho_(rho), eta_(eta), theta_(theta)
    {
        if (!(theta > 0.0 && theta < 1.0)) {
            throw Error(ErrorCode::ThetaOutOfRange,
                        "theta = " + std::to_string(theta) + " must lie in (0, 1)");
        }
    }

    double dt() const { return dt_; }
    double up() const { return up_; }
    double down() const { return down_; }
    double rho() const { return rho_; }
    double eta() const { return eta_; }
    double theta() const { return theta_; }

    /// Lattice spacing in log price, σ√Δt.
    double log_step() const { return std::log(up_); }

private:
    double dt_;
    double up_;
    double down_;
    double rho_;
    double eta_;
    double theta_;
};

inline BtmParams derive_btm(const MarketParams& market, double dt) {
    if (!(dt > 0.0)) throw Error(ErrorCode::NonpositiveStep, "dt must be > 0");
    const double up = std::exp(market.sigma() * std::sqrt(dt));
    const double down = 1.0 / up;
    const double rho = 1.0 + market.rate() * dt;
    const double eta = 1.0 + market.dividend() * dt;
    const double theta = (rho / eta - down) / (up - down);
    return BtmParams(dt, up, down, rho, eta, theta);
}

enum class PayoffKind { Put, Call };

struct Payoff {
    PayoffKind kind;
    double strike;

    double operator()(double spot) const {
        return kind == PayoffKind::Put ? std::max(strike - spot, 0.0)
                                       : std::max(spot - strike, 0.0);
    }

    /// Option value as S → 0 and S → ∞.
    double limit_at_zero() const { return kind == PayoffKind::Put ? strike : 0.0; }
    double limit_at_infinity() const {
        return kind == PayoffKind::Put ? 0.0 : std::numeric_limits<double>::infinity();
    }
};

/**
 * Option values over a LogGrid window.
 *
 * left_limit/right_limit record the value at j = ∓∞ (E and 0 for a put).
 * left_ghost/right_ghost are the values stencils read at j_min-1 and j_max+1;
 * operators carry them over unchanged, so they act as Dirichlet data.
 */
class LatticeValues {
public:
    struct Boundary {
        double left_limit;
        double right_limit;
        double left_ghost;
        double right_ghost;
    };

    LatticeValues(LogGrid grid, std::vector<double> values, Boundary boundary)
        : grid_(grid), values_(std::move(values)), boundary_(boundary)
    {
        if (values_.size() != grid_.size()) {
            throw Error(ErrorCode::WindowMismatch, "value count does not match grid window");
        }
        for (double v : values_) {
            if (!std::isfinite(v)) throw Error(ErrorCode::InvalidParameter, "lattice values must be finite");
        }
        if (!std::isfinite(boundary.left_ghost) || !std::isfinite(boundary.right_ghost)) {
            throw Error(ErrorCode::InvalidParameter, "ghost values must be finite");
        }
    }

    const LogGrid& grid() const { return grid_; }
    const Boundary& boundary() const { return boundary_; }
    std::span<const double> values() const { return values_; }
    std::size_t size() const { return values_.size(); }

    double operator[](std::size_t offset) const { return values_[offset]; }

    double at(Index j) const {
        if (!grid_.contains(j)) {
            throw Error(ErrorCode::IndexOutOfWindow, "index " + std::to_string(j) + " outside window");
        }
        return values_[grid_.offset(j)];
    }

    /// Value at j in [j_min-1, j_max+1], reading ghosts outside the window.
    double with_ghosts(Index j) const {
        if (j == grid_.j_min() - 1) return boundary_.left_ghost;
        if (j == grid_.j_max() + 1) return boundary_.right_ghost;
        return at(j);
    }

    /// Same grid and boundary data, new interior values.
    LatticeValues with_values(std::vector<double> values) const {
        return LatticeValues(grid_, std::move(values), boundary_);
    }

private:
    LogGrid grid_;
    std::vector<double> values_;
    Boundary boundary_;
};

inline LatticeValues sample_payoff(const Payoff& payoff, const LogGrid& grid) {
    std::vector<double> values(grid.size());
    for (std::size_t k = 0; k < values.size(); ++k) {
        values[k] = payoff(grid.price(grid.index(k)));
    }
    return LatticeValues(grid, std::move(values),
                         {payoff.limit_at_zero(), payoff.limit_at_infinity(),
                          payoff(grid.price(grid.j_min() - 1)), payoff(grid.price(grid.j_max() + 1))});
}

inline void require_same_window(const LatticeValues& lhs, const LatticeValues& rhs) {
    if (!(lhs.grid() == rhs.grid())) {
        throw Error(ErrorCode::WindowMismatch, "lattices live on different windows");
    }
}

/// sup_j |lhs_j - rhs_j| over the window.
inline double sup_distance(const LatticeValues& lhs, const LatticeValues& rhs) {
    require_same_window(lhs, rhs);
    double worst = 0.0;
    for (std::size_t k = 0; k < lhs.size(); ++k) {
        worst = std::max(worst, std::abs(lhs[k] - rhs[k]));
    }
    return worst;
}

} // namespace amvi
