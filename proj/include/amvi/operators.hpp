/**
 * @file operators.hpp
 * @brief Discrete Black-Scholes operator and the lattice update maps F and B
 *
 * Both update maps have the form
 *   (TU)_j = max{ continuation(U_{j-1}, U_j, U_{j+1}), φ_j }
 * with a continuation value that is a nonnegative combination of the three
 * neighbours with total weight 1/ρ. That shared shape is what makes them
 * monotone and 1/ρ-contractive in the sup norm.
 */

#pragma once

#include "amvi/error.hpp"
#include "amvi/model.hpp"

#include <algorithm>
#include <cmath>
#include <concepts>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace amvi {

/// Weights on U_{j-1}, U_j, U_{j+1} in the continuation value (discount included).
struct StencilWeights {
    double lower;
    double center;
    double upper;
};

struct StabilityReport {
    std::vector<std::string> violations;
    std::vector<std::string> warnings;

    bool passed() const { return violations.empty(); }
};

inline StabilityReport stability_check(const SchemeParams& scheme) {
    StabilityReport report;
    if (!(scheme.w() > 0.0)) report.violations.emplace_back("w > 0");
    if (scheme.w() > 1.0 + detail::kRatioSlack) report.violations.emplace_back("w <= 1");
    if (!(std::abs(scheme.drift_ratio()) < 1.0)) {
        report.violations.emplace_back("|r-q-sigma^2/2|*dx/sigma^2 < 1");
    }
    if (!(scheme.rho() > 1.0)) report.warnings.emplace_back("no contraction: rho=1");
    return report;
}

/**
 * I_j(U) = (ρ + w - 1)U_j - w[aU_{j+1} + (1-a)U_{j-1}]
 *
 * Neighbours outside the window are the lattice's ghost values.
 */
inline double discrete_bs_apply(const LatticeValues& lattice, Index j, const SchemeParams& scheme) {
    if (!lattice.grid().contains(j)) {
        throw Error(ErrorCode::IndexOutOfWindow, "index " + std::to_string(j) + " outside window");
    }
    const double w = scheme.w();
    const double a = scheme.a();
    return (scheme.rho() + w - 1.0) * lattice.at(j)
         - w * (a * lattice.with_ghosts(j + 1) + (1.0 - a) * lattice.with_ghosts(j - 1));
}

/// Explicit finite-difference update F.
class FdOperator {
public:
    FdOperator(SchemeParams scheme, LatticeValues obstacle)
        : scheme_(scheme), obstacle_(std::move(obstacle))
    {
        if (auto report = stability_check(scheme_); !report.passed()) {
            throw Error(ErrorCode::StabilityViolation, "violated: " + report.violations.front());
        }
    }

    double continuation(double lower, double mid, double upper) const {
        const double w = scheme_.w();
        const double a = scheme_.a();
        return ((1.0 - w) * mid + w * (a * upper + (1.0 - a) * lower)) / scheme_.rho();
    }

    StencilWeights weights() const {
        const double w = scheme_.w();
        const double a = scheme_.a();
        const double rho = scheme_.rho();
        return {w * (1.0 - a) / rho, (1.0 - w) / rho, w * a / rho};
    }

    double rho() const { return scheme_.rho(); }
    const SchemeParams& scheme() const { return scheme_; }
    const LatticeValues& obstacle() const { return obstacle_; }

private:
    SchemeParams scheme_;
    LatticeValues obstacle_;
};

/// Binomial-tree update B.
class BtmOperator {
public:
    BtmOperator(BtmParams btm, LatticeValues obstacle)
        : btm_(btm), obstacle_(std::move(obstacle))
    {}

    double continuation(double lower, double /*mid*/, double upper) const {
        const double theta = btm_.theta();
        return (theta * upper + (1.0 - theta) * lower) / btm_.rho();
    }

    StencilWeights weights() const {
        return {(1.0 - btm_.theta()) / btm_.rho(), 0.0, btm_.theta() / btm_.rho()};
    }

    double rho() const { return btm_.rho(); }
    const BtmParams& btm() const { return btm_; }
    const LatticeValues& obstacle() const { return obstacle_; }

private:
    BtmParams btm_;
    LatticeValues obstacle_;
};

using OperatorKind = std::variant<FdOperator, BtmOperator>;

template <class Op>
concept LatticeOperator = requires(const Op& op, double v) {
    { op.continuation(v, v, v) } -> std::convertible_to<double>;
    { op.weights() } -> std::convertible_to<StencilWeights>;
    { op.rho() } -> std::convertible_to<double>;
    { op.obstacle() } -> std::convertible_to<const LatticeValues&>;
};

namespace detail {

/// out_k = max{continuation, φ_k}; `in` and `out` must not alias.
template <LatticeOperator Op>
void apply_into(const Op& op, std::span<const double> in, double left_ghost, double right_ghost,
                std::span<double> out) {
    const auto phi = op.obstacle().values();
    const std::size_t n = in.size();
    for (std::size_t k = 0; k < n; ++k) {
        const double lower = k == 0 ? left_ghost : in[k - 1];
        const double upper = k + 1 == n ? right_ghost : in[k + 1];
        out[k] = std::max(op.continuation(lower, in[k], upper), phi[k]);
    }
}

} // namespace detail

template <LatticeOperator Op>
LatticeValues apply_operator(const Op& op, const LatticeValues& lattice) {
    require_same_window(lattice, op.obstacle());
    std::vector<double> out(lattice.size());
    detail::apply_into(op, lattice.values(), lattice.boundary().left_ghost,
                       lattice.boundary().right_ghost, out);
    return lattice.with_values(std::move(out));
}

inline LatticeValues apply(const OperatorKind& op, const LatticeValues& lattice) {
    return std::visit([&](const auto& concrete) { return apply_operator(concrete, lattice); }, op);
}

inline double rho_of(const OperatorKind& op) {
    return std::visit([](const auto& concrete) { return concrete.rho(); }, op);
}

inline const LatticeValues& obstacle_of(const OperatorKind& op) {
    return std::visit([](const auto& concrete) -> const LatticeValues& { return concrete.obstacle(); }, op);
}

inline LatticeValues apply_F(const LatticeValues& lattice, const SchemeParams& scheme,
                             const LatticeValues& obstacle) {
    return apply_operator(FdOperator(scheme, obstacle), lattice);
}

inline LatticeValues apply_B(const LatticeValues& lattice, const BtmParams& btm,
                             const LatticeValues& obstacle) {
    return apply_operator(BtmOperator(btm, obstacle), lattice);
}

} // namespace amvi
