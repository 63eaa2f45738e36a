// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include "reduxion/dynamics.hpp"
#include "reduxion/io.hpp"
#include "reduxion/montecarlo.hpp"
#include "reduxion/scenarios.hpp"
#include "support.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace reduxion;

namespace {

struct Verdict {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << " [failed: " << what << "]";
        }
    }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool within(double value, double target, double tol) { return std::abs(value - target) <= tol; }

double frequency(const RunStatistics& s, const std::string& name) {
    const auto it = s.counts.find(name);
    return it == s.counts.end() || s.trials == 0 ? 0.0 : static_cast<double>(it->second) / s.trials;
}

std::vector<std::string> golden(const std::string& name) {
    std::ifstream in(std::string(REDUXION_GOLDEN_DIR) + "/" + name + ".txt");
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);)
        if (!line.empty()) lines.push_back(line);
    return lines;
}

constexpr double kBand = 0.015;
constexpr std::size_t kTrials = 10000;
constexpr unsigned kWorkers = 4;

Verdict bare_apparatus() {
    Verdict v;
    const auto t0 = std::chrono::steady_clock::now();
    const DeterministicRun run = Simulator(build("bare-apparatus")).deterministic();
    const double elapsed = seconds_since(t0);
    double d0 = 0.0, done = 0.0, pulse = 0.0;
    for (const auto& c : run.final_state.components) {
        if (c.label.detector == Detector::D0) d0 += c.modulus;
        else if (c.label.device("M")->phase == DeviceState::Phase::Done) done += c.modulus;
        else pulse += c.modulus;
    }
    v.detail << "D0 " << d0 << ", done " << done << ", pulse " << pulse << ", " << elapsed << " s";
    v.require(within(d0, 0.5, 1e-4), "D0 modulus");
    v.require(within(done, 0.5, 1e-4), "done modulus");
    v.require(pulse <= 1e-6, "pulse drained");
    v.require(elapsed < 1.0, "runtime");
    return v;
}

Verdict decay_closed_form() {
    Verdict v;
    const ScenarioSpec spec = build("bare-apparatus");
    const Network net = make_network(spec);
    const double h = spec.half_life;
    Stepper stepper(net, h / 1000.0);
    DenseState state = stepper.make_state(net.initial(), 1.0, 0.0);
    StepRecord record;
    const ComponentLabel undecayed = test::label("D0.M:idle.I0");
    auto modulus = [&] { return to_superposition(net, state).find(undecayed)->modulus; };
    double worst = 0.0;
    while (state.time < h - 1e-12) {
        stepper.step(state, record);
        worst = std::max(worst, std::abs(modulus() - std::exp(-std::log(2.0) / h * state.time)));
    }
    const double frozen = modulus();
    bool constant = true;
    for (int i = 0; i < 2000; ++i) {
        stepper.step(state, record);
        constant = constant && modulus() == frozen;
    }
    v.detail << "max deviation " << worst << ", plateau " << frozen;
    v.require(worst <= 1e-4, "exponential");
    v.require(constant, "constant after the cutoff");
    return v;
}

Verdict two_outcomes(const std::string& scenario, const std::string& a, const std::string& b) {
    Verdict v;
    const auto t0 = std::chrono::steady_clock::now();
    const RunStatistics s = Simulator(build(scenario)).ensemble(kTrials, 1, kWorkers);
    const double elapsed = seconds_since(t0);
    const double fa = frequency(s, a), fb = frequency(s, b);
    v.detail << a << " " << fa << ", " << b << " " << fb << ", " << elapsed << " s";
    v.require(within(fa, 0.5, kBand), a);
    v.require(within(fb, 0.5, kBand), b);
    v.require(elapsed < 60.0, "runtime");
    return v;
}

Verdict current_integrals() {
    Verdict v;
    const auto ao = Simulator(build("apparatus-observer")).deterministic().current_integrals;
    const auto v1 = Simulator(build("version1-observer")).deterministic().current_integrals;
    const auto nat = Simulator(build("version2-natural")).deterministic().current_integrals;
    const double c = nat.at("into:cat=C"), cn = nat.at("into:cat=CN");
    v.detail << "apparatus-observer " << ao.at("into:ready") << ", version1-observer " << v1.at("into:ready")
             << ", natural C " << c << " + CN " << cn;
    v.require(within(ao.at("into:ready"), 1.0, 2e-3), "apparatus-observer");
    v.require(within(v1.at("into:ready"), 1.0, 2e-3), "version1-observer");
    v.require(within(c + cn, 1.0, 2e-3), "natural total");
    v.require(within(c, 0.5, 2e-3) && within(cn, 0.5, 2e-3), "natural branches");
    return v;
}

Verdict conditioned_certainty() {
    Verdict v;
    const RunStatistics s = Simulator(build("version2-natural")).ensemble(kTrials, 1, kWorkers);
    const std::size_t accepted = s.trials - s.rejected;
    const std::size_t wakeups = s.counts.at("Eq20-natural-wakeup");
    const double rejection = static_cast<double>(s.rejected) / s.trials;
    v.detail << wakeups << "/" << accepted << " accepted trials in Eq20-natural-wakeup, rejection " << rejection;
    v.require(accepted > 0 && wakeups == accepted, "certainty");
    v.require(within(rejection, 0.5, kBand), "rejection rate");
    return v;
}

Verdict rule4_ablation() {
    Verdict v;
    const ScenarioSpec spec = build("apparatus-observer", {{"bin_count", 128}});
    SimulationOptions off;
    off.rules.rule4_enabled = false;
    const double without = frequency(Simulator(spec, off).ensemble(kTrials, 1, kWorkers), "Eq5-residual");
    const double with = frequency(Simulator(spec).ensemble(kTrials, 1, kWorkers), "Eq5-residual");
    v.detail << "Eq5-residual without rule 4 " << without << ", with " << with;
    v.require(without < 0.01, "ablated");
    v.require(within(with, 0.5, kBand), "enabled");
    return v;
}

// Steps random builtins with random parameters and step sizes.
void fuzz_steps(Verdict& v, std::size_t target) {
    std::mt19937_64 gen(20261016);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::size_t steps = 0;
    double worst_total = 0.0, worst_ledger = 0.0;
    const auto& names = builtin_names();
    while (steps < target) {
        const std::string& name = names[gen() % names.size()];
        Overrides o{{"half_life", 0.3 + u(gen)}, {"T", 0.2 + 0.6 * u(gen)}};
        o["bin_count"] = 8 + static_cast<double>(gen() % 120);
        if (name == "version2-natural") o["T_N"] = 0.5 + 1.5 * u(gen);
        if (name.find("observer") != std::string::npos) o["t_ob"] = 0.05 + u(gen);
        const ScenarioSpec spec = build(name, o);
        RuleConfig rules;
        rules.rule4_enabled = gen() % 4 != 0;
        const Network net = make_network(spec, rules);
        double bin_time = spec.half_life;
        for (const auto& d : spec.devices) bin_time = std::min(bin_time, d.duration / d.bin_count);
        Stepper stepper(net, bin_time * (0.05 + 0.95 * u(gen)));
        DenseState state = stepper.make_state(net.initial(), 1.0, 0.0);
        StepRecord record;
        std::vector<double> before;
        for (int i = 0; i < 4000 && steps < target; ++i, ++steps) {
            before = state.modulus;
            const double total = state.total();
            stepper.step(state, record);
            worst_total = std::max(worst_total, std::abs(state.total() - total));
            std::vector<double> flow(state.modulus.size(), 0.0);
            for (const auto& t : record.transfers) {
                flow[t.source] -= t.amount;
                flow[t.target] += t.amount;
            }
            for (std::size_t k = 0; k < state.modulus.size(); ++k)
                worst_ledger = std::max(worst_ledger, std::abs(state.modulus[k] - before[k] - flow[k]));
        }
    }
    v.detail << steps << " steps, conservation " << worst_total << ", ledger " << worst_ledger;
    v.require(worst_total <= 1e-9, "conservation");
    v.require(worst_ledger <= 1e-12, "ledger consistency");
}

// Upwind transport of a decay-shaped injection on n bins; returns (done, residue).
std::pair<double, double> transport(int n, double dt) {
    const double lambda = std::log(2.0);
    PulseBins bins(n);
    double done = 0.0;
    const int steps = static_cast<int>(std::lround(4.0 / dt));
    for (int i = 0; i < steps; ++i) {
        const double a = std::min(i * dt, 1.0), b = std::min((i + 1) * dt, 1.0);
        const auto r = advect(bins, (std::exp(-lambda * a) - std::exp(-lambda * b)) / dt, dt, 1.0);
        done += r.outflow_to_done;
        bins = r.bins;
    }
    return {done, bins.total()};
}

Verdict property_suite() {
    Verdict v;
    fuzz_steps(v, 100000);

    const Simulator v1(build("version1-observer"));
    bool same_logs = true;
    for (std::uint64_t seed = 0; seed < 20; ++seed)
        same_logs = same_logs && trajectory_json(v1.trajectory(seed), "version1-observer", seed, v1.dt()) ==
                                     trajectory_json(v1.trajectory(seed), "version1-observer", seed, v1.dt());
    v.require(same_logs, "seed determinism");

    const Simulator ao(build("apparatus-observer"));
    const bool invariant = results_json(ao.ensemble(3000, 5, 1)) == results_json(ao.ensemble(3000, 5, 7));
    v.require(invariant, "parallelism invariance");

    const auto [coarse, coarse_left] = transport(64, 1.0 / 640.0);
    const auto [fine, fine_left] = transport(640, 1.0 / 6400.0);
    v.detail << ", advection " << coarse << " vs fine " << fine;
    v.require(std::abs(coarse - fine) <= 1e-6 && std::abs(coarse_left - fine_left) <= 1e-6, "advection oracle");
    return v;
}

Verdict structural_fidelity() {
    Verdict v;
    std::size_t matched = 0;
    for (const auto& name : builtin_names()) {
        Overrides o;
        if (name == "version2-natural") o["T_N"] = 1.2;
        const auto got = Simulator(build(name, o)).deterministic().instantiated;
        const auto want = golden(name);
        if (!want.empty() && got == want) ++matched;
        else v.require(false, name);
    }
    const auto v1 = Simulator(build("version1-observer")).deterministic().instantiated;
    const auto v2 = Simulator(build("version2-observer")).deterministic().instantiated;
    v.require(std::find(v1.begin(), v1.end(), "D1.M:z.cat=C1?.observer=B1?") == v1.end(), "Eq11 fourth component");
    v.require(std::find(v2.begin(), v2.end(), "D1.M:done.cat=C?.observer=B1?") == v2.end(), "Eq16 sixth component");
    v.detail << matched << "/" << builtin_names().size() << " builtins match their component lists";
    return v;
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
        {"bare apparatus plateau", bare_apparatus},
        {"decay closed form", decay_closed_form},
        {"version I ensemble", [] { return two_outcomes("version1", "Eq9-unconscious-cat", "Eq10-residual"); }},
        {"version II ensemble", [] { return two_outcomes("version2", "Eq13-awakened", "Eq14-residual"); }},
        {"current integrals", current_integrals},
        {"conditioned certainty", conditioned_certainty},
        {"rule 4 ablation", rule4_ablation},
        {"property suite", property_suite},
        {"structural fidelity", structural_fidelity},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Verdict v;
        try {
            v = criteria[i].second();
        } catch (const std::exception& e) {
            v.pass = false;
            v.detail << "threw: " << e.what();
        }
        if (!v.pass) ++failures;
        std::printf("%s %zu %s: %s\n", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), v.detail.str().c_str());
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
