#pragma once

// Trajectories, ensembles and deterministic current integration.

#include "reduxion/dynamics.hpp"
#include "reduxion/rules.hpp"
#include "reduxion/scenarios.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace reduxion {

enum class Conditioning { Rejection, Exact };

struct SimulationOptions {
    double dt = 0.0;  // 0 selects default_dt
    RuleConfig rules;
    Conditioning conditioning = Conditioning::Rejection;
};

struct EnsembleConfig {
    enum class Mode { Sampled, Deterministic };

    std::size_t trials = 1;
    std::uint64_t base_seed = 0;
    double dt = 0.0;
    unsigned parallelism = 1;
    Mode mode = Mode::Sampled;
    RuleConfig rules;
    Conditioning conditioning = Conditioning::Rejection;
};

struct Frequency {
    double value = 0.0;
    double lower = 0.0;
    double upper = 0.0;
};

/// 95% Wilson score interval.
Frequency wilson_interval(std::size_t successes, std::size_t trials);

struct RunStatistics {
    std::string scenario;
    std::size_t trials = 0;
    std::uint64_t base_seed = 0;
    double dt = 0.0;
    std::map<std::string, std::size_t> counts;
    std::size_t rejected = 0;
    std::size_t unclassified = 0;
    std::map<std::string, Frequency> frequencies;             // over all trials
    std::map<std::string, Frequency> conditional_frequencies;  // over accepted trials
    std::optional<Frequency> rejection;
    std::optional<double> condition_probability;  // exact conditioning only
    std::map<std::string, double> current_integrals;
    double wall_time = 0.0;
};

/// Result of one run with no stochastic choices.
struct DeterministicRun {
    Superposition final_state;
    std::map<std::string, double> current_integrals;
    std::vector<std::string> instantiated;  // sorted group signatures
    std::optional<std::string> terminal;
};

/// Compiled scenario shared by every trajectory.
class Simulator {
public:
    Simulator(ScenarioSpec spec, SimulationOptions options = {});

    const ScenarioSpec& spec() const noexcept { return spec_; }
    const Network& network() const noexcept { return *network_; }
    double dt() const noexcept { return dt_; }
    std::size_t step_count() const noexcept { return steps_; }

    TrajectoryOutcome trajectory(std::uint64_t seed) const;

    /// `on_step` sees every step record; the final superposition and current
    /// integrals are always collected.
    DeterministicRun deterministic(const std::function<void(const StepRecord&)>& on_step = {}) const;

    RunStatistics ensemble(std::size_t trials, std::uint64_t base_seed, unsigned parallelism) const;

private:
    struct Prefix;
    struct Sampling;

    Prefix no_choice_prefix() const;
    double forbidden_total() const;
    TrajectoryOutcome finish(DenseState state, Rng& rng, std::size_t next_step, Sampling& sampling,
                             std::vector<ChoiceEvent> events) const;
    bool quiescent(const DenseState& state) const;

    ScenarioSpec spec_;
    SimulationOptions options_;
    std::shared_ptr<const Network> network_;
    double dt_ = 0.0;
    std::size_t steps_ = 0;
    std::vector<std::uint8_t> forbidden_;  // per node
};

TrajectoryOutcome run_trajectory(const ScenarioSpec& spec, std::uint64_t seed, double dt = 0.0,
                                 const SimulationOptions& options = {});

RunStatistics run_ensemble(const ScenarioSpec& spec, const EnsembleConfig& cfg);

}  // namespace reduxion
