#include "reduxion/montecarlo.hpp"
#include "reduxion/scenarios.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <set>
#include <sstream>

using namespace reduxion;
using reduxion::test::three_sigma;

namespace {

std::string event_log(const TrajectoryOutcome& o) {
    std::ostringstream out;
    out.precision(17);
    for (const auto& e : o.events) out << e.time << ' ' << e.chosen.to_string() << ' ' << e.hazard_at_choice << '\n';
    out << (o.rejected ? "rejected" : o.terminal) << '\n';
    return out.str();
}

}  // namespace

TEST_CASE("the same seed gives the same trajectory") {
    const Simulator sim(build("version1-observer"));
    for (std::uint64_t seed : {0u, 1u, 99u}) {
        CAPTURE(seed);
        CHECK(event_log(sim.trajectory(seed)) == event_log(sim.trajectory(seed)));
        CHECK(event_log(run_trajectory(build("version1-observer"), seed)) == event_log(sim.trajectory(seed)));
    }
}

TEST_CASE("version1 ends in one of its two outcomes") {
    const Simulator sim(build("version1"));
    std::set<std::string> seen;
    for (std::uint64_t seed = 0; seed < 200; ++seed) seen.insert(sim.trajectory(seed).terminal);
    CHECK(seen == std::set<std::string>{"Eq10-residual", "Eq9-unconscious-cat"});
}

TEST_CASE("the bare apparatus makes no choices") {
    const TrajectoryOutcome o = Simulator(build("bare-apparatus")).trajectory(4);
    CHECK(o.events.empty());
    CHECK(o.terminal == "Eq1-plateau");
    CHECK_FALSE(o.rejected);
}

TEST_CASE("ensemble trials are the individual trajectories") {
    for (const auto& [name, n] : {std::pair<std::string, std::size_t>{"version1-observer", 300}, {"version2-natural", 60}}) {
        CAPTURE(name);
        const Simulator sim(build(name));
        const RunStatistics stats = sim.ensemble(n, 1000, 3);
        std::map<std::string, std::size_t> counts;
        std::size_t rejected = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const auto o = sim.trajectory(1000 + i);
            if (o.rejected) ++rejected;
            else ++counts[o.terminal];
        }
        CHECK(stats.rejected == rejected);
        for (const auto& [k, v] : counts) CHECK(stats.counts.at(k) == v);
    }
}

TEST_CASE("ensemble counts do not depend on the worker count") {
    const Simulator sim(build("apparatus-observer"));
    const auto one = sim.ensemble(2000, 17, 1);
    const auto many = sim.ensemble(2000, 17, 6);
    CHECK(one.counts == many.counts);
    CHECK(one.rejected == many.rejected);
}

TEST_CASE("an empty ensemble") {
    const RunStatistics stats = Simulator(build("version2")).ensemble(0, 0, 4);
    CHECK(stats.trials == 0);
    CHECK(stats.rejected == 0);
    CHECK(stats.unclassified == 0);
    for (const auto& [k, v] : stats.counts) CHECK(v == 0);
}

TEST_CASE("version2 wakes the cat half of the time") {
    const std::size_t n = 10000;
    const RunStatistics stats = Simulator(build("version2")).ensemble(n, 1, 4);
    const double p = static_cast<double>(stats.counts.at("Eq13-awakened")) / n;
    CHECK(p == doctest::Approx(0.5).epsilon(three_sigma(0.5, n)));
    CHECK(stats.counts.at("Eq13-awakened") + stats.counts.at("Eq14-residual") == n);
}

TEST_CASE("without rule 4 the observer never sees the residual") {
    EnsembleConfig cfg;
    cfg.trials = 10000;
    cfg.base_seed = 1;
    cfg.parallelism = 4;
    cfg.rules.rule4_enabled = false;
    const RunStatistics stats = run_ensemble(build("apparatus-observer", {{"bin_count", 128}}), cfg);
    CHECK(stats.frequencies.at("Eq5-residual").value < 0.01);
}

TEST_CASE("conditioning by rejection and exactly") {
    const ScenarioSpec spec = build("version2-natural");
    const std::size_t n = 4000;
    const RunStatistics rejecting = Simulator(spec).ensemble(n, 3, 4);
    CHECK(rejecting.rejected + rejecting.counts.at("Eq20-natural-wakeup") == n);
    REQUIRE(rejecting.rejection);
    CHECK(rejecting.rejection->value == doctest::Approx(0.5).epsilon(three_sigma(0.5, n)));

    SimulationOptions exact;
    exact.conditioning = Conditioning::Exact;
    const RunStatistics conditioned = Simulator(spec, exact).ensemble(n, 3, 4);
    CHECK(conditioned.rejected == 0);
    CHECK(conditioned.counts.at("Eq20-natural-wakeup") == n);
    REQUIRE(conditioned.condition_probability);
    CHECK(*conditioned.condition_probability == doctest::Approx(0.5).epsilon(2e-3));
}

TEST_CASE("deterministic mode reports the current integrals") {
    EnsembleConfig cfg;
    cfg.mode = EnsembleConfig::Mode::Deterministic;
    const RunStatistics stats = run_ensemble(build("version1-observer"), cfg);
    CHECK(stats.current_integrals.at("into:ready") == doctest::Approx(1.0).epsilon(2e-3));
}

TEST_CASE("Wilson score interval") {
    auto oracle = [](double k, double n) {
        const double z = 1.96;
        const double p = k / n;
        const double c = (p + z * z / (2 * n)) / (1 + z * z / n);
        const double h = z * std::sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / (1 + z * z / n);
        return std::pair{c - h, c + h};
    };
    for (auto [k, n] : {std::pair{50, 100}, std::pair{3, 40}, std::pair{9990, 10000}}) {
        CAPTURE(k);
        const Frequency f = wilson_interval(k, n);
        const auto [lo, hi] = oracle(k, n);
        CHECK(f.value == doctest::Approx(static_cast<double>(k) / n));
        CHECK(f.lower == doctest::Approx(lo).epsilon(1e-4));
        CHECK(f.upper == doctest::Approx(hi).epsilon(1e-4));
    }
    CHECK(wilson_interval(0, 10).lower == 0.0);
    CHECK(wilson_interval(10, 10).upper == 1.0);
    const Frequency empty = wilson_interval(0, 0);
    CHECK(empty.value == 0.0);
}

TEST_CASE("every fuzzed trajectory lands in a declared terminal") {
    std::mt19937_64 gen(2024);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::size_t total = 0;
    for (int round = 0; round < 5; ++round) {
        for (const auto& name : builtin_names()) {
            Overrides o;
            o["half_life"] = 0.5 + u(gen);
            o["T"] = 0.2 + 0.6 * u(gen);
            o["bin_count"] = 16 + static_cast<double>(gen() % 112);
            if (name == "version2-natural") o["T_N"] = 0.8 + 1.5 * u(gen);
            if (name.find("observer") != std::string::npos) o["t_ob"] = 0.1 + 0.8 * u(gen);
            CAPTURE(name);
            const RunStatistics stats = Simulator(build(name, o)).ensemble(2860, 50u * round, 4);
            REQUIRE(stats.unclassified == 0);
            total += stats.trials;
        }
    }
    CHECK(total >= 100000);
}
