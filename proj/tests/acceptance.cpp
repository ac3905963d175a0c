// Acceptance criteria, one pass/fail line each.
//
//   amvi_acceptance            run every criterion
//   amvi_acceptance c3 c5b     run the named ones
//
// Exit status is 0 only when every selected criterion passes.

#include "amvi/cli.hpp"
#include "amvi/finite_horizon.hpp"
#include "amvi/perpetual.hpp"
#include "amvi/verify.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace amvi;

constexpr double kStrike = 100.0;
constexpr double kPerpetualDx = 0.005;
constexpr double kDt = 0.01;
const std::vector<double> kMaturities{0.5, 1.0, 2.0, 4.0, 8.0};

struct Outcome {
    bool pass;
    std::string detail;
};

struct Criterion {
    std::string id;
    std::string title;
    double runtime_limit;  // seconds; 0 means none
    std::function<Outcome()> run;
};

std::vector<MarketParams> sweep() {
    std::vector<MarketParams> out;
    for (double r : {0.02, 0.05, 0.1}) {
        for (double q : {0.0, 0.02, 0.08}) {
            for (double s : {0.1, 0.2, 0.4}) out.emplace_back(r, q, s, kStrike);
        }
    }
    return out;
}

std::string point_name(const MarketParams& m) {
    return "(r=" + format_number(m.rate()) + ", q=" + format_number(m.dividend()) + ", sigma=" + format_number(m.sigma()) + ")";
}

LatticeValues put_obstacle(const LogGrid& grid) { return sample_payoff({PayoffKind::Put, kStrike}, grid); }

LogGrid matched_grid(const MarketParams& m) {
    return LogGrid::around_strike(kStrike, m.sigma(), m.sigma() * std::sqrt(kDt));
}

std::string fmt(double v) { return format_number(v); }

Outcome c1_uniqueness() {
    double worst = 0.0;
    std::string where;
    long index_mismatches = 0;
    for (const MarketParams& m : sweep()) {
        const SchemeParams s = derive_scheme(m, kPerpetualDx);
        const LogGrid grid = perpetual_window(m, kPerpetualDx);
        const LatticeValues phi = put_obstacle(grid);
        const PerpetualSolution closed = solve_closed_form(m, grid, s);
        const FixedPointResult fixed = fixed_point_solve(FdOperator(s, phi), phi, 1e-10, 0, FixedPointMethod::Policy);
        const double d = sup_distance(closed.lattice, fixed.solution);
        if (d > worst) {
            worst = d;
            where = point_name(m);
        }
        if (exercise_boundary(fixed.solution, phi, 1e-9) != closed.j_star) ++index_mismatches;
    }
    return {worst <= 1e-8 && index_mismatches == 0,
            "max sup distance " + fmt(worst) + " <= 1e-8 at " + where + ", j* mismatches " +
                std::to_string(index_mismatches)};
}

Outcome c2_contraction() {
    double worst_excess = -kInfinity;
    std::string where;
    std::uint64_t seed = 42;
    for (const MarketParams& m : sweep()) {
        const SchemeParams s = derive_scheme(m, kPerpetualDx);
        const BtmParams b = derive_btm(m, kDt);
        const OperatorKind ops[] = {
            FdOperator(s, put_obstacle(LogGrid::around_strike(kStrike, m.sigma(), kPerpetualDx))),
            BtmOperator(b, put_obstacle(LogGrid::around_strike(kStrike, m.sigma(), b.log_step()))),
        };
        for (const OperatorKind& op : ops) {
            const CheckReport r = check_contraction(op, 1000, seed++, 2.0 * kStrike);
            const double excess = r.find("max_lipschitz_ratio")->value - 1.0 / rho_of(op);
            if (excess > worst_excess) {
                worst_excess = excess;
                where = r.check_name + " " + point_name(m);
            }
        }
    }
    return {worst_excess <= 1e-12,
            "max(ratio - 1/rho) " + fmt(worst_excess) + " <= 1e-12 at " + where + ", 1000 pairs, seeds 42.."};
}

Outcome c3_convergence() {
    const MarketParams m(0.05, 0.0, 0.2, kStrike);
    const std::vector<double> dx{0.04, 0.02, 0.01, 0.005};
    const ConvergenceResult study = convergence_study(m, dx);
    bool ok = true;
    std::ostringstream detail;
    detail << "errors";
    for (std::size_t k = 0; k < study.errors.size(); ++k) {
        detail << ' ' << fmt(study.errors[k].extension);
        if (k > 0) ok = ok && study.errors[k].extension < study.errors[k - 1].extension;
    }
    detail << "; factors";
    for (double f : study.factors) {
        detail << ' ' << fmt(f);
        ok = ok && f >= 1.5;
    }
    const double oracle = continuous_perpetual_put(m, 100.0);
    const SchemeParams s = derive_scheme(m, 0.005);
    const double discrete = solve_closed_form(m, perpetual_window(m, 0.005), s).lattice.at(0);
    ok = ok && std::abs(oracle - 12.3200) <= 5e-4 && std::abs(discrete - 12.3200) <= 5e-4;
    detail << "; V(100) oracle " << fmt(oracle) << ", discrete " << fmt(discrete) << " vs 12.3200 +- 5e-4";
    return {ok, detail.str()};
}

Outcome c4_maturity_monotone() {
    double worst = kInfinity;
    std::string where;
    for (const MarketParams& m : sweep()) {
        for (Engine engine : {Engine::Fd, Engine::Btm}) {
            const MaturityLimitResult r = maturity_limit(m, engine, PayoffKind::Put, kMaturities, 1e-10, matched_grid(m), kDt);
            for (const auto& e : r.report.entries) {
                if (e.min_increment < worst) {
                    worst = e.min_increment;
                    where = std::string(engine == Engine::Fd ? "fd " : "btm ") + point_name(m) + " T=" + fmt(e.maturity);
                }
            }
        }
    }
    return {worst >= -1e-12, "min V_n(T_k) - V_n(T_{k-1}) over shared levels " + fmt(worst) + " >= -1e-12 at " + where};
}

Outcome c5a_time_independence_bound() {
    double worst_ratio = 0.0;
    std::string where;
    for (const MarketParams& m : sweep()) {
        for (Engine engine : {Engine::Fd, Engine::Btm}) {
            const MaturityLimitResult r = maturity_limit(m, engine, PayoffKind::Put, kMaturities, 1e-10, matched_grid(m), kDt);
            for (const auto& e : r.report.entries) {
                const double ratio = e.time_gap / e.time_gap_bound;
                if (!(ratio <= worst_ratio)) {
                    worst_ratio = ratio;
                    where = std::string(engine == Engine::Fd ? "fd " : "btm ") + point_name(m) + " N=" +
                            std::to_string(e.steps);
                }
            }
        }
    }
    return {worst_ratio <= 1.0, "max gap/(2E/rho^(N-1)) " + fmt(worst_ratio) + " <= 1 at " + where};
}

Outcome c5b_time_independence_regression() {
    const MarketParams m(0.05, 0.0, 0.2, kStrike);
    bool ok = true;
    std::ostringstream detail;
    for (Engine engine : {Engine::Fd, Engine::Btm}) {
        const std::vector<double> schedule{8.0};
        const MaturityLimitResult r = maturity_limit(m, engine, PayoffKind::Put, schedule, 1e-10, matched_grid(m), kDt);
        const MaturityEntry& e = r.report.entries.front();
        ok = ok && e.time_gap <= 1e-3 && e.time_gap <= e.time_gap_bound;
        detail << (engine == Engine::Fd ? "fd" : "; btm") << " gap " << fmt(e.time_gap) << " (<= 1e-3), bound "
               << fmt(e.time_gap_bound);
    }
    return {ok, "T=8, dt=0.01, N=800: " + detail.str()};
}

Outcome c6_maturity_limit() {
    double worst_margin = -kInfinity;
    std::string where;
    const std::vector<double> schedule{8.0};
    for (const MarketParams& m : sweep()) {
        const MaturityLimitResult r = maturity_limit(m, Engine::Fd, PayoffKind::Put, schedule, 1e-10, matched_grid(m), kDt);
        const MaturityEntry& e = r.report.entries.front();
        const double margin = e.perpetual_gap - (e.perpetual_bound + 1e-8);
        if (margin > worst_margin) {
            worst_margin = margin;
            where = point_name(m) + " gap " + fmt(e.perpetual_gap) + " bound " + fmt(e.perpetual_bound);
        }
    }
    return {worst_margin <= 0.0, "max gap - (2E/rho^N + 1e-8) " + fmt(worst_margin) + " <= 0 at " + where};
}

Outcome c7_boundary_bound() {
    double worst = -kInfinity;
    std::string where;
    for (const MarketParams& m : sweep()) {
        const PerpetualSolution sol = solve_closed_form(m, perpetual_window(m, kPerpetualDx), derive_scheme(m, kPerpetualDx));
        const double q = m.dividend();
        const double cap = (q > 0.0 ? std::min(m.rate() * kStrike / q, kStrike) : kStrike) * (1.0 + kPerpetualDx);
        const double excess = sol.boundary_price() - cap;
        if (excess > worst) {
            worst = excess;
            where = point_name(m) + " S_j* " + fmt(sol.boundary_price()) + " cap " + fmt(cap);
        }
    }
    return {worst <= 0.0, "max S_j* - min{rE/q, E}(1+dx) " + fmt(worst) + " <= 0 at " + where};
}

Outcome c8_degenerate() {
    const MarketParams flat(0.0, 0.0, 0.2, kStrike);
    const SchemeParams s = derive_scheme(flat, kPerpetualDx);
    const double xi1 = char_roots(s).xi1;
    bool no_boundary = false;
    try {
        solve_closed_form(flat, LogGrid::around_strike(kStrike, 0.2, kPerpetualDx), s);
    } catch (const Error& e) {
        no_boundary = e.code() == ErrorCode::NoBoundary;
    }
    return {xi1 == 1.0 && no_boundary,
            "xi1 = " + fmt(xi1) + ", solve_closed_form " + (no_boundary ? "raised NoBoundary" : "did not raise NoBoundary")};
}

Outcome c9_max_principle() {
    long solved = 0, passed = 0, perturbed = 0, detected = 0;
    for (const MarketParams& m : sweep()) {
        const SchemeParams s = derive_scheme(m, kPerpetualDx);
        const LogGrid grid = perpetual_window(m, kPerpetualDx);
        const LatticeValues phi = put_obstacle(grid);
        const PerpetualSolution closed = solve_closed_form(m, grid, s);
        const FixedPointResult fixed = fixed_point_solve(FdOperator(s, phi), phi, 1e-12, 0, FixedPointMethod::Policy);
        for (const LatticeValues* lattice : {&closed.lattice, &fixed.solution}) {
            ++solved;
            if (check_max_principle(*lattice, s, phi).passed()) ++passed;
            for (Index j : {closed.j_star + 1, closed.j_star + 20, Index{0}, Index{200}}) {
                if (!grid.contains(j) || !(lattice->at(j) > phi.at(j) + 1e-9)) continue;
                std::vector<double> bumped(lattice->values().begin(), lattice->values().end());
                bumped[grid.offset(j)] += 1e-3;
                ++perturbed;
                if (!check_max_principle(lattice->with_values(std::move(bumped)), s, phi).passed()) ++detected;
            }
        }
    }
    return {passed == solved && detected == perturbed && perturbed > 0,
            "passes on " + std::to_string(passed) + "/" + std::to_string(solved) + " solved lattices; flags " +
                std::to_string(detected) + "/" + std::to_string(perturbed) + " single-node 1e-3 perturbations"};
}

Outcome c10_determinism() {
    cli::RunConfig cfg;
    cfg.seed = 42;
    std::string bytes[2];
    for (std::string& b : bytes) {
        const cli::CommandResult r = cli::cmd_verify(cfg);
        std::ostringstream out;
        cli::write_table(r.table, cli::OutputFormat::Csv, out);
        b = out.str();
    }
    return {bytes[0] == bytes[1] && !bytes[0].empty(),
            std::to_string(bytes[0].size()) + " report bytes, runs " + (bytes[0] == bytes[1] ? "identical" : "differ")};
}

} // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> criteria{
        {"c1", "cross-solver uniqueness", 10.0, c1_uniqueness},
        {"c2", "contraction factor of F and B", 5.0, c2_contraction},
        {"c3", "convergence to the continuous price", 5.0, c3_convergence},
        {"c4", "maturity monotonicity", 10.0, c4_maturity_monotone},
        {"c5a", "time-independence bound", 0.0, c5a_time_independence_bound},
        {"c5b", "time-independence regression gap", 0.0, c5b_time_independence_regression},
        {"c6", "maturity limit equals perpetual price", 0.0, c6_maturity_limit},
        {"c7", "exercise boundary bound", 0.0, c7_boundary_bound},
        {"c8", "degenerate r = 0", 0.0, c8_degenerate},
        {"c9", "maximum-principle checker", 0.0, c9_max_principle},
        {"c10", "verify determinism", 0.0, c10_determinism},
    };
    std::vector<std::string> selected(argv + 1, argv + argc);
    int failures = 0;
    int ran = 0;
    for (const Criterion& c : criteria) {
        if (!selected.empty() && std::find(selected.begin(), selected.end(), c.id) == selected.end()) continue;
        ++ran;
        const auto start = std::chrono::steady_clock::now();
        Outcome outcome{false, ""};
        try {
            outcome = c.run();
        } catch (const std::exception& e) {
            outcome = {false, std::string("threw: ") + e.what()};
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::string timing = fmt(std::round(seconds * 1000.0) / 1000.0) + " s";
        if (c.runtime_limit > 0.0) {
            timing += " < " + fmt(c.runtime_limit) + " s";
            if (!(seconds < c.runtime_limit)) outcome.pass = false;
        }
        std::printf("[%s] %-4s %s: %s (%s)\n", outcome.pass ? "PASS" : "FAIL", c.id.c_str(), c.title.c_str(),
                    outcome.detail.c_str(), timing.c_str());
        if (!outcome.pass) ++failures;
    }
    if (ran == 0) {
        std::fprintf(stderr, "no criterion matched\n");
        return 2;
    }
    return failures == 0 ? 0 : 1;
}
