/**
 * @file cli.hpp
 * @brief Command implementations behind the amvi executable
 *
 * Each command turns a RunConfig into a Table (meta fields plus rows) and an
 * exit status. Rendering to CSV or JSON is separate, so one table can be
 * emitted in either format.
 */

#pragma once

#include "amvi/error.hpp"
#include "amvi/finite_horizon.hpp"
#include "amvi/format.hpp"
#include "amvi/model.hpp"
#include "amvi/operators.hpp"
#include "amvi/perpetual.hpp"
#include "amvi/verify.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace amvi::cli {

enum ExitCode : int {
    kSuccess = 0,
    kValidationError = 1,
    kCheckFailure = 2,
    kInternalError = 3,
};

enum class OutputFormat { Csv, Json };
enum class PerpetualSolver { ClosedForm, FixedPoint, Btm };

struct RunConfig {
    // Market
    double rate = 0.05;
    double dividend = 0.0;
    double sigma = 0.2;
    double strike = 100.0;

    // Grid overrides; unset means the command's default
    std::optional<double> dx;
    std::optional<double> dt;
    std::optional<double> spot;

    // price-perpetual
    PerpetualSolver solver = PerpetualSolver::ClosedForm;
    FixedPointMethod method = FixedPointMethod::Policy;
    double tol = 1e-10;
    long max_iter = 0;

    // price-american, limit-study
    Engine engine = Engine::Fd;
    PayoffKind payoff = PayoffKind::Put;
    double maturity = 1.0;
    bool surface = false;
    std::vector<double> maturities{1.0, 2.0, 4.0, 8.0, 16.0};

    // converge
    std::vector<double> dx_list{0.04, 0.02, 0.01, 0.005};

    // verify
    long trials = 1000;
    std::optional<std::vector<SweepPoint>> sweep;

    OutputFormat format = OutputFormat::Csv;
    std::uint64_t seed = 42;
    unsigned jobs = 1;
};

using Cell = nlohmann::ordered_json;

struct Table {
    std::vector<std::pair<std::string, Cell>> meta;
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;
};

struct CommandResult {
    int exit_code;
    Table table;
    std::string message;
};

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

/// The value that `format_number` prints, so JSON and CSV carry the same digits.
inline double round12(double value) {
    if (!std::isfinite(value)) return value;
    const std::string text = format_number(value);
    double out = 0.0;
    std::from_chars(text.data(), text.data() + text.size(), out);
    return out;
}

inline Cell number(double value) { return Cell(round12(value)); }
inline Cell integer(std::int64_t value) { return Cell(value); }
inline Cell text(std::string value) { return Cell(std::move(value)); }

namespace detail {

inline std::string csv_field(const Cell& cell) {
    if (cell.is_number_float()) return format_number(cell.get<double>());
    if (cell.is_number_integer()) return std::to_string(cell.get<std::int64_t>());
    if (cell.is_boolean()) return cell.get<bool>() ? "1" : "0";
    if (cell.is_null()) return "nan";
    const std::string raw = cell.is_string() ? cell.get<std::string>() : cell.dump();
    if (raw.find_first_of(",\"\n") == std::string::npos) return raw;
    std::string quoted = "\"";
    for (char ch : raw) {
        if (ch == '"') quoted += '"';
        quoted += ch;
    }
    return quoted + "\"";
}

inline Cell json_cell(const Cell& cell) {
    // Non-finite doubles have no JSON literal; emit them as strings.
    if (cell.is_number_float() && !std::isfinite(cell.get<double>())) return format_number(cell.get<double>());
    return cell;
}

} // namespace detail

/// "# key=value" meta lines, a header row, then one line per row.
inline void write_csv(const Table& table, std::ostream& out) {
    for (const auto& [key, value] : table.meta) out << "# " << key << '=' << detail::csv_field(value) << '\n';
    for (std::size_t k = 0; k < table.columns.size(); ++k) out << (k ? "," : "") << table.columns[k];
    out << '\n';
    for (const auto& row : table.rows) {
        for (std::size_t k = 0; k < row.size(); ++k) out << (k ? "," : "") << detail::csv_field(row[k]);
        out << '\n';
    }
}

/// {"meta": {...}, "rows": [{column: value, ...}, ...]}
inline void write_json(const Table& table, std::ostream& out) {
    nlohmann::ordered_json doc;
    doc["meta"] = nlohmann::ordered_json::object();
    for (const auto& [key, value] : table.meta) doc["meta"][key] = detail::json_cell(value);
    doc["rows"] = nlohmann::ordered_json::array();
    for (const auto& row : table.rows) {
        nlohmann::ordered_json item = nlohmann::ordered_json::object();
        for (std::size_t k = 0; k < row.size(); ++k) item[table.columns[k]] = detail::json_cell(row[k]);
        doc["rows"].push_back(std::move(item));
    }
    out << doc.dump(1) << '\n';
}

inline void write_table(const Table& table, OutputFormat format, std::ostream& out) {
    if (format == OutputFormat::Json) {
        write_json(table, out);
    } else {
        write_csv(table, out);
    }
}

// ---------------------------------------------------------------------------
// Parsing helpers
// ---------------------------------------------------------------------------

inline double parse_double(std::string_view token, std::string_view what) {
    double value = 0.0;
    const auto result = std::from_chars(token.data(), token.data() + token.size(), value);
    if (result.ec != std::errc() || result.ptr != token.data() + token.size()) {
        throw Error(ErrorCode::InvalidParameter, std::string(what) + ": not a number: '" + std::string(token) + "'");
    }
    return value;
}

/**
 * One sweep point per line as whitespace-separated key=value tokens:
 *   rate=0.05 dividend=0.02 sigma=0.2 [dx=0.005] [dt=2.5e-5]
 * Blank lines and lines starting with '#' are skipped.
 */
inline std::vector<SweepPoint> parse_sweep(std::istream& in) {
    std::vector<SweepPoint> points;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream tokens(line);
        std::string token;
        if (!(tokens >> token) || token.front() == '#') continue;
        SweepPoint point{kInfinity, kInfinity, kInfinity, std::nullopt, std::nullopt};
        do {
            const auto eq = token.find('=');
            const std::string where = "sweep line " + std::to_string(line_no);
            if (eq == std::string::npos) throw Error(ErrorCode::InvalidParameter, where + ": expected key=value");
            const std::string key = token.substr(0, eq);
            const double value = parse_double(std::string_view(token).substr(eq + 1), where);
            if (key == "rate") point.rate = value;
            else if (key == "dividend") point.dividend = value;
            else if (key == "sigma") point.sigma = value;
            else if (key == "dx") point.dx = value;
            else if (key == "dt") point.dt = value;
            else throw Error(ErrorCode::InvalidParameter, where + ": unknown key '" + key + "'");
        } while (tokens >> token);
        if (std::isinf(point.rate) || std::isinf(point.dividend) || std::isinf(point.sigma)) {
            throw Error(ErrorCode::InvalidParameter,
                        "sweep line " + std::to_string(line_no) + ": rate, dividend and sigma are required");
        }
        points.push_back(point);
    }
    if (points.empty()) throw Error(ErrorCode::InvalidParameter, "sweep file has no points");
    return points;
}

inline std::string_view label(PerpetualSolver solver) {
    switch (solver) {
    case PerpetualSolver::ClosedForm: return "closed-form";
    case PerpetualSolver::FixedPoint: return "fixed-point";
    case PerpetualSolver::Btm: return "btm";
    }
    return "?";
}

inline std::string_view label(Engine engine) { return engine == Engine::Fd ? "fd" : "btm"; }
inline std::string_view label(PayoffKind kind) { return kind == PayoffKind::Put ? "put" : "call"; }
inline std::string_view label(FixedPointMethod method) {
    return method == FixedPointMethod::Picard ? "picard" : "policy";
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

namespace detail {

inline void market_meta(Table& table, const MarketParams& market) {
    table.meta.emplace_back("rate", number(market.rate()));
    table.meta.emplace_back("dividend", number(market.dividend()));
    table.meta.emplace_back("sigma", number(market.sigma()));
    table.meta.emplace_back("strike", number(market.strike()));
}

inline void scheme_meta(Table& table, double dx, const SchemeParams& scheme) {
    table.meta.emplace_back("dx", number(dx));
    table.meta.emplace_back("dt", number(scheme.dt()));
    table.meta.emplace_back("w", number(scheme.w()));
    table.meta.emplace_back("a", number(scheme.a()));
    table.meta.emplace_back("rho", number(scheme.rho()));
}

inline void btm_meta(Table& table, const BtmParams& btm) {
    table.meta.emplace_back("dx", number(btm.log_step()));
    table.meta.emplace_back("dt", number(btm.dt()));
    table.meta.emplace_back("rho", number(btm.rho()));
    table.meta.emplace_back("theta", number(btm.theta()));
}

inline void lattice_rows(Table& table, const LatticeValues& values, const LatticeValues& phi, double tol) {
    table.columns = {"j", "S", "value", "payoff", "exercised"};
    const LogGrid& grid = values.grid();
    for (std::size_t k = 0; k < values.size(); ++k) {
        const Index j = grid.index(k);
        table.rows.push_back({integer(j), number(grid.price(j)), number(values[k]), number(phi[k]),
                              integer(std::abs(values[k] - phi[k]) <= tol && phi[k] > tol ? 1 : 0)});
    }
}

/// U at the node whose cell [(j-1/2)Δx, (j+1/2)Δx) + c contains ln S.
inline double value_at(const LatticeValues& values, double spot) {
    const LogGrid& grid = values.grid();
    const auto j = static_cast<Index>(std::floor((std::log(spot) - grid.anchor()) / grid.dx() + 0.5));
    if (!grid.contains(j)) {
        throw Error(ErrorCode::IndexOutOfWindow, "spot " + format_number(spot) + " outside the lattice window");
    }
    return values.at(j);
}

inline Index half_width_for_spot(const MarketParams& market, double dx, double spot) {
    const LogGrid base = LogGrid::around_strike(market.strike(), market.sigma(), dx);
    return base.j_max() + static_cast<Index>(std::ceil(std::abs(std::log(spot / market.strike())) / dx));
}

} // namespace detail

/**
 * Perpetual put on the tail-aware window. Closed form by default; the
 * fixed-point solvers iterate F (or B) and also report the closed-form
 * distance and the iteration count predicted by the 1/ρ rate.
 */
inline CommandResult cmd_price_perpetual(const RunConfig& cfg) {
    const MarketParams market(cfg.rate, cfg.dividend, cfg.sigma, cfg.strike);
    const double dx = cfg.dx.value_or(0.005);
    const double spot = cfg.spot.value_or(cfg.strike);
    const Payoff put{PayoffKind::Put, cfg.strike};
    constexpr double kContact = 1e-9;

    if (market.rate() == 0.0) {
        throw Error(ErrorCode::NoBoundary, "r = 0: the optimal exercise boundary does not exist");
    }
    Table table;
    detail::market_meta(table, market);
    const ContinuousPut exact = continuous_put_solution(market);

    if (cfg.solver == PerpetualSolver::Btm) {
        const double dt = cfg.dt.value_or(dx * dx / market.variance());
        const BtmParams btm = derive_btm(market, dt);
        const LogGrid grid = perpetual_window(market, btm.log_step());
        const LatticeValues phi = sample_payoff(put, grid);
        const FixedPointResult fixed = btm_perpetual_solve(market, btm, grid, cfg.tol, cfg.method, cfg.max_iter);
        const Index j_star = exercise_boundary(fixed.solution, phi, kContact);
        detail::btm_meta(table, btm);
        table.meta.emplace_back("seed", integer(static_cast<std::int64_t>(cfg.seed)));
        table.meta.emplace_back("solver", text(std::string(label(cfg.solver))));
        table.meta.emplace_back("engine", text("btm"));
        table.meta.emplace_back("method", text(std::string(label(cfg.method))));
        table.meta.emplace_back("tol", number(cfg.tol));
        table.meta.emplace_back("iterations", integer(fixed.iterations));
        table.meta.emplace_back("error_bound", number(fixed.error_bound));
        table.meta.emplace_back("j_star", integer(j_star));
        table.meta.emplace_back("S_j_star", number(grid.price(j_star)));
        table.meta.emplace_back("spot", number(spot));
        table.meta.emplace_back("value_at_spot", number(detail::value_at(fixed.solution, spot)));
        table.meta.emplace_back("continuous_price", number(exact.value(spot)));
        table.meta.emplace_back("continuous_boundary", number(exact.boundary));
        detail::lattice_rows(table, fixed.solution, phi, kContact);
        return {kSuccess, std::move(table), {}};
    }

    const SchemeParams scheme = cfg.dt ? derive_scheme(market, dx, *cfg.dt) : derive_scheme(market, dx);
    const LogGrid grid = perpetual_window(market, dx);
    const LatticeValues phi = sample_payoff(put, grid);
    const PerpetualSolution closed = solve_closed_form(market, grid, scheme);
    detail::scheme_meta(table, dx, scheme);
    table.meta.emplace_back("seed", integer(static_cast<std::int64_t>(cfg.seed)));
    table.meta.emplace_back("solver", text(std::string(label(cfg.solver))));
    table.meta.emplace_back("engine", text("fd"));
    table.meta.emplace_back("xi1", number(closed.roots.xi1));
    table.meta.emplace_back("xi2", number(closed.roots.xi2));
    table.meta.emplace_back("j_star", integer(closed.j_star));
    table.meta.emplace_back("S_j_star", number(closed.boundary_price()));
    table.meta.emplace_back("c1", number(closed.c1));

    const LatticeValues* shown = &closed.lattice;
    std::optional<FixedPointResult> fixed;
    if (cfg.solver == PerpetualSolver::FixedPoint) {
        const bool picard = cfg.method == FixedPointMethod::Picard;
        fixed = fixed_point_solve(FdOperator(scheme, phi), phi, cfg.tol, cfg.max_iter, cfg.method, picard);
        shown = &fixed->solution;
        table.meta.emplace_back("method", text(std::string(label(cfg.method))));
        table.meta.emplace_back("tol", number(cfg.tol));
        table.meta.emplace_back("iterations", integer(fixed->iterations));
        table.meta.emplace_back("error_bound", number(fixed->error_bound));
        if (picard && !fixed->step_norms.empty()) {
            // ‖ΔU_k‖ <= ρ^{-k}‖ΔU_0‖, so the stopping rule fires by this step.
            const double first = fixed->step_norms.front();
            const double stop = cfg.tol * (scheme.rho() - 1.0);
            const double predicted =
                first <= stop ? 1.0 : std::ceil(std::log(first / stop) / std::log(scheme.rho())) + 1.0;
            table.meta.emplace_back("predicted_iterations", integer(static_cast<std::int64_t>(predicted)));
        }
        table.meta.emplace_back("closed_form_distance", number(sup_distance(fixed->solution, closed.lattice)));
    }
    table.meta.emplace_back("spot", number(spot));
    table.meta.emplace_back("value_at_spot", number(detail::value_at(*shown, spot)));
    table.meta.emplace_back("continuous_price", number(exact.value(spot)));
    table.meta.emplace_back("continuous_boundary", number(exact.boundary));
    detail::lattice_rows(table, *shown, phi, kContact);
    return {kSuccess, std::move(table), {}};
}

/**
 * Finite-maturity American option on a lattice anchored at the spot (j = 0
 * is S = spot). Defaults: Δt = 0.01 and Δx = σ√Δt for both engines.
 */
inline CommandResult cmd_price_american(const RunConfig& cfg) {
    const MarketParams market(cfg.rate, cfg.dividend, cfg.sigma, cfg.strike);
    const double dt = cfg.dt.value_or(0.01);
    const double matched = market.sigma() * std::sqrt(dt);
    const double dx = cfg.dx.value_or(matched);
    const double spot = cfg.spot.value_or(cfg.strike);
    if (!(spot > 0.0)) throw Error(ErrorCode::InvalidParameter, "spot must be > 0");
    const long steps = amvi::detail::step_count(cfg.maturity, dt);
    const Payoff payoff{cfg.payoff, cfg.strike};

    Table table;
    detail::market_meta(table, market);
    std::optional<PriceSurface> surface;
    std::optional<LatticeValues> price;
    std::optional<LogGrid> grid;
    if (cfg.engine == Engine::Btm) {
        const BtmParams btm = derive_btm(market, dt);
        if (cfg.dx && std::abs(*cfg.dx - btm.log_step()) > 1e-12 * btm.log_step()) {
            throw Error(ErrorCode::InvalidParameter, "btm engine needs dx = sigma*sqrt(dt) = " +
                                                         format_number(btm.log_step()));
        }
        const Index half = std::max<Index>(steps, detail::half_width_for_spot(market, btm.log_step(), spot));
        grid.emplace(btm.log_step(), std::log(spot), -half, half);
        detail::btm_meta(table, btm);
        if (cfg.surface) {
            surface = btm_american(market, btm, cfg.payoff, steps, *grid);
        } else {
            price = btm_american_price(market, btm, cfg.payoff, steps, *grid);
        }
    } else {
        const SchemeParams scheme = derive_scheme(market, dx, dt);
        const Index half = detail::half_width_for_spot(market, dx, spot);
        grid.emplace(dx, std::log(spot), -half, half);
        detail::scheme_meta(table, dx, scheme);
        if (cfg.surface) {
            surface = fd_american(market, *grid, scheme, cfg.payoff, cfg.maturity);
        } else {
            price = fd_american_price(market, *grid, scheme, cfg.payoff, cfg.maturity);
        }
    }
    table.meta.emplace_back("seed", integer(static_cast<std::int64_t>(cfg.seed)));
    table.meta.emplace_back("solver", text("induction"));
    table.meta.emplace_back("engine", text(std::string(label(cfg.engine))));
    table.meta.emplace_back("payoff", text(std::string(label(cfg.payoff))));
    table.meta.emplace_back("maturity", number(cfg.maturity));
    table.meta.emplace_back("steps", integer(steps));
    table.meta.emplace_back("spot", number(spot));

    const LatticeValues phi = sample_payoff(payoff, *grid);
    const LatticeValues& today = surface ? surface->level(0) : *price;
    table.meta.emplace_back("value_at_spot", number(today.at(0)));
    if (!surface) {
        detail::lattice_rows(table, today, phi, 1e-9);
        return {kSuccess, std::move(table), {}};
    }
    table.columns = {"n", "t", "j", "S", "value", "payoff", "exercised"};
    for (long n = 0; n <= surface->steps(); ++n) {
        const LatticeValues& level = surface->level(n);
        for (std::size_t k = 0; k < level.size(); ++k) {
            const Index j = grid->index(k);
            table.rows.push_back({integer(n), number(static_cast<double>(n) * dt), integer(j),
                                  number(grid->price(j)), number(level[k]), number(phi[k]),
                                  integer(std::abs(level[k] - phi[k]) <= 1e-9 && phi[k] > 1e-9 ? 1 : 0)});
        }
    }
    return {kSuccess, std::move(table), {}};
}

/// Maturity schedule table: gaps between successive maturities, to the
/// perpetual fixed point, and between the first two time levels.
inline CommandResult cmd_limit_study(const RunConfig& cfg) {
    const MarketParams market(cfg.rate, cfg.dividend, cfg.sigma, cfg.strike);
    const double dt = cfg.dt.value_or(0.01);
    const double dx = cfg.engine == Engine::Btm ? market.sigma() * std::sqrt(dt)
                                                : cfg.dx.value_or(market.sigma() * std::sqrt(dt));
    if (cfg.engine == Engine::Btm && cfg.dx && std::abs(*cfg.dx - dx) > 1e-12 * dx) {
        throw Error(ErrorCode::InvalidParameter, "btm engine needs dx = sigma*sqrt(dt) = " + format_number(dx));
    }
    const LogGrid grid = LogGrid::around_strike(market.strike(), market.sigma(), dx);
    const MaturityLimitResult study =
        maturity_limit(market, cfg.engine, cfg.payoff, cfg.maturities, cfg.tol, grid, dt);

    Table table;
    detail::market_meta(table, market);
    if (cfg.engine == Engine::Btm) {
        detail::btm_meta(table, derive_btm(market, dt));
    } else {
        detail::scheme_meta(table, dx, derive_scheme(market, dx, dt));
    }
    table.meta.emplace_back("seed", integer(static_cast<std::int64_t>(cfg.seed)));
    table.meta.emplace_back("solver", text("induction"));
    table.meta.emplace_back("engine", text(std::string(label(cfg.engine))));
    table.meta.emplace_back("payoff", text(std::string(label(cfg.payoff))));
    table.meta.emplace_back("perpetual_error_bound", number(study.report.perpetual_error_bound));
    table.columns = {"T",           "steps",           "gap_to_previous", "gap_bound",      "perpetual_gap",
                     "perpetual_bound", "time_gap", "time_gap_bound",  "min_increment"};
    for (const auto& e : study.report.entries) {
        table.rows.push_back({number(e.maturity), integer(e.steps), number(e.gap_to_previous), number(e.gap_bound),
                              number(e.perpetual_gap), number(e.perpetual_bound), number(e.time_gap),
                              number(e.time_gap_bound), number(e.min_increment)});
    }
    return {kSuccess, std::move(table), {}};
}

/// Discretization error of the perpetual put along a Δx schedule.
inline CommandResult cmd_converge(const RunConfig& cfg) {
    const MarketParams market(cfg.rate, cfg.dividend, cfg.sigma, cfg.strike);
    const ConvergenceResult study = convergence_study(market, cfg.dx_list);
    const double spot = cfg.spot.value_or(cfg.strike);
    const ContinuousPut exact = continuous_put_solution(market);

    Table table;
    detail::market_meta(table, market);
    table.meta.emplace_back("seed", integer(static_cast<std::int64_t>(cfg.seed)));
    table.meta.emplace_back("solver", text("closed-form"));
    table.meta.emplace_back("engine", text("fd"));
    table.meta.emplace_back("S_min", number(0.25 * cfg.strike));
    table.meta.emplace_back("S_max", number(4.0 * cfg.strike));
    table.meta.emplace_back("spot", number(spot));
    table.meta.emplace_back("continuous_price", number(exact.value(spot)));
    table.columns = {"dx", "dt", "w", "a", "rho", "sup_error", "nodal_error", "factor", "value_at_spot"};
    for (std::size_t k = 0; k < study.dx.size(); ++k) {
        const double dx = study.dx[k];
        const SchemeParams scheme = derive_scheme(market, dx);
        const LogGrid grid(dx, std::log(cfg.strike),
                           static_cast<Index>(std::floor(std::log(0.5 * exact.boundary / cfg.strike) / dx)) - 1,
                           static_cast<Index>(std::ceil(std::log(4.0 * std::max(spot, cfg.strike) / cfg.strike) / dx)) + 1);
        const PerpetualSolution solution = solve_closed_form(market, grid, scheme);
        table.rows.push_back({number(dx), number(scheme.dt()), number(scheme.w()), number(scheme.a()),
                              number(scheme.rho()), number(study.errors[k].extension), number(study.errors[k].nodal),
                              k == 0 ? Cell(nullptr) : number(study.factors[k - 1]),
                              number(detail::value_at(solution.lattice, spot))});
    }
    const bool ok = study.report.passed();
    return {ok ? kSuccess : kCheckFailure, std::move(table),
            ok ? std::string() : "convergence: an error reduction factor fell below 1.5"};
}

/// Full checker suite; one row per check, exit 2 when any check fails.
inline CommandResult cmd_verify(const RunConfig& cfg) {
    if (cfg.trials < 1) throw Error(ErrorCode::InvalidParameter, "trials must be >= 1");
    VerifyConfig vc;
    vc.strike = cfg.strike;
    if (cfg.sweep) vc.sweep = *cfg.sweep;
    if (cfg.dx) vc.dx = *cfg.dx;
    if (cfg.dt) vc.finite_dt = *cfg.dt;
    vc.trials = cfg.trials;
    vc.seed = cfg.seed;
    vc.jobs = cfg.jobs;
    const std::vector<CheckReport> reports = run_verification(vc);

    Table table;
    table.meta.emplace_back("strike", number(vc.strike));
    table.meta.emplace_back("dx", number(vc.dx));
    table.meta.emplace_back("dt", number(vc.finite_dt));
    table.meta.emplace_back("sweep_points", integer(static_cast<std::int64_t>(vc.sweep.size())));
    table.meta.emplace_back("trials", integer(vc.trials));
    table.meta.emplace_back("seed", integer(static_cast<std::int64_t>(vc.seed)));
    table.meta.emplace_back("solver", text("closed-form,policy"));
    table.meta.emplace_back("engine", text("fd,btm"));
    table.columns = {"check", "status", "rate", "dividend", "sigma", "measurements", "context"};
    long failures = 0;
    for (const auto& report : reports) {
        std::string measurements;
        for (const auto& m : report.measured) {
            if (!measurements.empty()) measurements += "; ";
            measurements += m.name + '=' + format_number(m.value) + (m.bound == Bound::AtMost ? "<=" : ">=") +
                            format_number(m.limit);
        }
        std::string rate, dividend, sigma, context;
        for (const auto& [key, value] : report.context) {
            if (key == "rate") rate = value;
            else if (key == "dividend") dividend = value;
            else if (key == "sigma") sigma = value;
            else context += (context.empty() ? "" : "; ") + key + '=' + value;
        }
        const bool ok = report.passed();
        failures += ok ? 0 : 1;
        table.rows.push_back({text(report.check_name), text(ok ? "pass" : "FAIL"), text(rate), text(dividend),
                              text(sigma), text(measurements), text(context)});
    }
    table.meta.emplace_back("checks", integer(static_cast<std::int64_t>(reports.size())));
    table.meta.emplace_back("failures", integer(failures));
    return {failures == 0 ? kSuccess : kCheckFailure, std::move(table),
            failures == 0 ? std::string() : std::to_string(failures) + " check(s) failed"};
}

/// Maps errors to exit codes: amvi::Error → 1, anything else → 3.
template <class Command>
CommandResult run_guarded(Command&& command, const RunConfig& cfg) {
    try {
        return command(cfg);
    } catch (const Error& error) {
        return {kValidationError, {}, error.what()};
    } catch (const std::exception& error) {
        return {kInternalError, {}, std::string("internal error: ") + error.what()};
    }
}

} // namespace amvi::cli
