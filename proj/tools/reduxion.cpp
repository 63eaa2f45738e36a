// reduxion: command-line front end.
//
// Exit codes: 0 success, 1 usage, 2 parse/semantic error, 3 runtime error.

#include "reduxion/error.hpp"
#include "reduxion/io.hpp"
#include "reduxion/montecarlo.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

using namespace reduxion;

namespace {

constexpr int kUsage = 1;
constexpr int kInput = 2;
constexpr int kRuntime = 3;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag, const ScenarioSpec& spec) {
    if (flag) return *flag;
    if (const char* env = std::getenv("REDUXION_SEED"); env && *env) {
        std::uint64_t v = 0;
        const char* end = env + std::char_traits<char>::length(env);
        auto [ptr, ec] = std::from_chars(env, end, v);
        if (ec != std::errc() || ptr != end) throw UsageError("REDUXION_SEED is not an unsigned integer: " + std::string(env));
        return v;
    }
    return spec.seed.value_or(0);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Stochastic state-reduction simulator"};
    app.require_subcommand(1);

    bool disable_rule4 = false;
    bool disable_rule2 = false;
    bool exact = false;
    app.add_flag("--disable-rule4", disable_rule4, "Allow current between components sharing a ready state");
    app.add_flag("--disable-rule2", disable_rule2, "Keep conscious states conscious in new components");
    app.add_flag("--exact-conditioning", exact, "Exclude forbidden choices analytically instead of rejecting");

    std::string scenario;
    std::optional<std::uint64_t> seed;
    double dt = 0.0;
    std::string out;
    std::string format = "json";
    std::size_t trials = 1000;
    unsigned parallel = 1;
    bool deterministic = false;
    bool print = false;

    auto* simulate = app.add_subcommand("simulate", "Run one trajectory");
    auto* ensemble = app.add_subcommand("ensemble", "Run a trajectory ensemble");
    auto* currents = app.add_subcommand("currents", "Write the deterministic current ledger as CSV");
    auto* validate_cmd = app.add_subcommand("validate", "Check a scenario and report its structure");
    for (auto* sub : {simulate, ensemble, currents, validate_cmd}) {
        sub->fallthrough();
        sub->add_option("--scenario", scenario, "Builtin name or scenario file")->required();
    }
    for (auto* sub : {simulate, ensemble, currents}) sub->add_option("--dt", dt, "Step size (default: automatic)")->check(CLI::PositiveNumber);
    for (auto* sub : {simulate, ensemble}) {
        sub->add_option("--seed", seed, "Base seed (fallback: REDUXION_SEED)");
        sub->add_option("--format", format, "Output format")->check(CLI::IsMember({"json", "csv"}));
    }
    for (auto* sub : {simulate, ensemble, currents}) sub->add_option("--out", out, "Output path (default: stdout)");
    ensemble->add_option("--trials", trials, "Number of trajectories");
    ensemble->add_option("--parallel", parallel, "Worker threads")->check(CLI::PositiveNumber);
    ensemble->add_flag("--deterministic", deterministic, "Integrate currents without sampling");
    validate_cmd->add_flag("--print", print, "Print the canonical scenario text");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kUsage;
    }

    try {
        const ScenarioSpec spec = load_scenario(scenario);
        SimulationOptions options;
        options.dt = dt;
        options.rules.rule2_enabled = !disable_rule2;
        options.rules.rule4_enabled = !disable_rule4;
        options.conditioning = exact ? Conditioning::Exact : Conditioning::Rejection;

        if (*validate_cmd) {
            const Network net = make_network(spec, options.rules);
            if (print) std::cout << serialize_scenario(spec);
            else std::cout << "ok " << spec.name << ": " << net.size() << " reachable labels, " << spec.channels.size()
                           << " channels, " << spec.terminals.size() << " terminals\n";
            return 0;
        }

        if (*simulate) {
            if (format != "json") throw UsageError("simulate writes json only");
            const std::uint64_t s = resolve_seed(seed, spec);
            options.rules.rng_seed = s;
            Simulator sim(spec, options);
            write_text(trajectory_json(sim.trajectory(s), spec.name, s, sim.dt()), out);
            return 0;
        }

        if (*ensemble) {
            EnsembleConfig cfg;
            cfg.trials = trials;
            cfg.base_seed = resolve_seed(seed, spec);
            cfg.dt = dt;
            cfg.parallelism = parallel;
            cfg.mode = deterministic ? EnsembleConfig::Mode::Deterministic : EnsembleConfig::Mode::Sampled;
            cfg.rules = options.rules;
            cfg.conditioning = options.conditioning;
            const RunStatistics stats = run_ensemble(spec, cfg);
            emit_results(stats, format == "json" ? ResultFormat::Json : ResultFormat::Csv, out);
            std::cerr << "wall time " << stats.wall_time << " s\n";
            return 0;
        }

        Simulator sim(spec, options);
        if (out.empty() || out == "-") {
            write_ledger_csv(sim, std::cout);
        } else {
            std::ofstream file(out, std::ios::binary);
            if (!file) throw Error("cannot open '" + out + "' for writing");
            write_ledger_csv(sim, file);
        }
        return 0;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kUsage;
    } catch (const ParseError& e) {
        std::cerr << scenario << ": parse error at " << e.what() << "\n";
        return kInput;
    } catch (const SemanticError& e) {
        std::cerr << scenario << ": " << e.what() << "\n";
        return kInput;
    } catch (const UnknownScenario& e) {
        std::cerr << e.what() << "\n";
        return kInput;
    } catch (const InvalidOverride& e) {
        std::cerr << e.what() << "\n";
        return kInput;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kRuntime;
    }
}
