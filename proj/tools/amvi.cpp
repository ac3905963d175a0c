// amvi: perpetual and finite-maturity American option pricing by
// variational-inequality lattice schemes, plus the verification sweep.

#include "amvi/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <string>

namespace {

using namespace amvi;
using namespace amvi::cli;

template <class T>
void add_optional(CLI::App& app, const std::string& name, std::optional<T>& target, const std::string& help) {
    app.add_option_function<T>(name, [&target](const T& value) { target = value; }, help);
}

void positive_list(CLI::App& app, const std::string& name, std::vector<double>& target, const std::string& help) {
    app.add_option(name, target, help)->delimiter(',')->check(CLI::PositiveNumber);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"American option pricing by variational-inequality lattice schemes"};
    app.require_subcommand(1);
    app.set_config("--config", "", "flat key=value file; command line flags override it");

    RunConfig cfg;
    std::string output;
    std::string sweep_file;

    app.add_option("--rate", cfg.rate, "risk-free rate r")->capture_default_str();
    app.add_option("--dividend", cfg.dividend, "dividend yield q")->capture_default_str();
    app.add_option("--sigma", cfg.sigma, "volatility sigma")->capture_default_str();
    app.add_option("--strike", cfg.strike, "strike E")->capture_default_str();
    add_optional(app, "--dx", cfg.dx, "log-price step (command default when omitted)");
    add_optional(app, "--dt", cfg.dt, "time step (command default when omitted)");
    add_optional(app, "--spot", cfg.spot, "spot price S for reported values (default: strike)");
    app.add_option("--format", cfg.format, "output format")
        ->transform(CLI::CheckedTransformer(std::map<std::string, OutputFormat>{{"csv", OutputFormat::Csv},
                                                                                {"json", OutputFormat::Json}}));
    app.add_option("--output,-o", output, "output path (default: stdout)");
    app.add_option("--seed", cfg.seed, "seed for randomized checks")->capture_default_str();
    app.add_option("--jobs,-j", cfg.jobs, "concurrent sweep workers")->check(CLI::PositiveNumber)->capture_default_str();
    app.add_option("--tol", cfg.tol, "solver tolerance")->check(CLI::PositiveNumber)->capture_default_str();
    app.add_option("--engine", cfg.engine, "time-stepping engine")
        ->transform(CLI::CheckedTransformer(std::map<std::string, Engine>{{"fd", Engine::Fd}, {"btm", Engine::Btm}}));
    app.add_option("--payoff", cfg.payoff, "payoff")
        ->transform(CLI::CheckedTransformer(
            std::map<std::string, PayoffKind>{{"put", PayoffKind::Put}, {"call", PayoffKind::Call}}));

    auto* perpetual = app.add_subcommand("price-perpetual", "perpetual American put");
    perpetual->add_option("--solver", cfg.solver, "closed-form | fixed-point | btm")
        ->transform(CLI::CheckedTransformer(std::map<std::string, PerpetualSolver>{
            {"closed-form", PerpetualSolver::ClosedForm},
            {"fixed-point", PerpetualSolver::FixedPoint},
            {"btm", PerpetualSolver::Btm}}));
    perpetual->add_option("--method", cfg.method, "fixed-point iteration: picard | policy")
        ->transform(CLI::CheckedTransformer(std::map<std::string, FixedPointMethod>{
            {"picard", FixedPointMethod::Picard}, {"policy", FixedPointMethod::Policy}}));
    perpetual->add_option("--max-iter", cfg.max_iter, "iteration cap (0: solver default)");

    auto* american = app.add_subcommand("price-american", "finite-maturity American option");
    american->add_option("--maturity,-T", cfg.maturity, "maturity T")->capture_default_str();
    american->add_flag("--surface", cfg.surface, "emit every time level, not only t = 0");

    auto* limit = app.add_subcommand("limit-study", "T -> infinity limit over a maturity schedule");
    positive_list(*limit, "--maturities", cfg.maturities, "comma-separated increasing maturities");

    auto* converge = app.add_subcommand("converge", "perpetual put error against the continuous price");
    positive_list(*converge, "--dx-list", cfg.dx_list, "comma-separated decreasing dx values");

    auto* verify = app.add_subcommand("verify", "run every checker over the parameter sweep");
    verify->add_option("--trials", cfg.trials, "random pairs per contraction check")->capture_default_str();
    verify->add_option("--sweep-file", sweep_file, "sweep points, one 'rate=.. dividend=.. sigma=..' per line")
        ->check(CLI::ExistingFile);

    for (auto* sub : {perpetual, american, limit, converge, verify}) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& error) {
        // --help and friends exit 0; every malformed flag is a validation error.
        return app.exit(error) == 0 ? kSuccess : kValidationError;
    }

    if (!sweep_file.empty()) {
        try {
            std::ifstream in(sweep_file);
            cfg.sweep = parse_sweep(in);
        } catch (const amvi::Error& error) {
            std::cerr << "amvi: " << error.what() << '\n';
            return kValidationError;
        }
    }

    CommandResult result{kInternalError, {}, "no command"};
    if (*perpetual) result = run_guarded(cmd_price_perpetual, cfg);
    if (*american) result = run_guarded(cmd_price_american, cfg);
    if (*limit) result = run_guarded(cmd_limit_study, cfg);
    if (*converge) result = run_guarded(cmd_converge, cfg);
    if (*verify) result = run_guarded(cmd_verify, cfg);

    if (!result.message.empty()) std::cerr << "amvi: " << result.message << '\n';
    if (result.table.columns.empty()) return result.exit_code;

    if (output.empty()) {
        write_table(result.table, cfg.format, std::cout);
    } else {
        std::ofstream file(output, std::ios::binary);
        if (!file) {
            std::cerr << "amvi: cannot open " << output << '\n';
            return kValidationError;
        }
        write_table(result.table, cfg.format, file);
    }
    return result.exit_code;
}
