#pragma once

// Built-in experiments and the outcome classifier.

#include "reduxion/channel.hpp"
#include "reduxion/dynamics.hpp"
#include "reduxion/rules.hpp"
#include "reduxion/state.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace reduxion {

struct AgentSpec {
    std::string id;
    std::string kind;  // "cat" or "observer"
    MindState initial;
    std::optional<double> observation_time;

    friend bool operator==(const AgentSpec&, const AgentSpec&) = default;
};

struct DeviceSpec {
    std::string id;
    double duration = 1.0;
    int bin_count = 1;
    bool starts_running = false;
    bool classical = false;  // sharply defined wave, moved rigidly

    friend bool operator==(const DeviceSpec&, const DeviceSpec&) = default;
};

struct Condition {
    LabelPattern forbidden_choice;
    friend bool operator==(const Condition&, const Condition&) = default;
};

/// A named end state: every pattern matches some surviving component and
/// every surviving component matches some pattern.
struct TerminalSpec {
    std::string name;
    std::vector<LabelPattern> components;
    friend bool operator==(const TerminalSpec&, const TerminalSpec&) = default;
};

struct ScenarioSpec {
    std::string name;
    double half_life = 1.0;
    double tau_phys = 0.05;
    double horizon = 4.0;
    std::optional<std::uint64_t> seed;
    Detector detector = Detector::D0;
    std::optional<Indicator> indicator;
    std::vector<AgentSpec> agents;
    std::vector<DeviceSpec> devices;
    std::vector<Channel> channels;
    Compatibility compatibility;
    std::vector<Condition> conditions;
    std::vector<TerminalSpec> terminals;

    ComponentLabel initial_label() const;
    std::vector<std::string> classical_devices() const;
    std::vector<double> device_durations() const;
    const AgentSpec* agent(std::string_view id) const;
    const DeviceSpec* device(std::string_view id) const;

    friend bool operator==(const ScenarioSpec&, const ScenarioSpec&) = default;
};

struct TrajectoryOutcome {
    std::string terminal;  // empty when rejected
    std::vector<ChoiceEvent> events;
    bool rejected = false;
    Superposition final_state;
};

using Overrides = std::map<std::string, double>;

const std::vector<std::string>& builtin_names();

/// Throws UnknownScenario or InvalidOverride.
ScenarioSpec build(std::string_view name, const Overrides& overrides = {});

/// Throws SemanticError naming the first violated invariant.
void validate(const ScenarioSpec& spec);

/// The spec's component network under `rules`.
Network make_network(const ScenarioSpec& spec, const RuleConfig& rules = {});

/// Name of the first declared terminal matching the surviving components.
/// Throws Unclassifiable.
std::string classify_terminal(const Superposition& final, const ScenarioSpec& spec);
TrajectoryOutcome classify(const Superposition& final, const ScenarioSpec& spec);

struct ObservationTrigger {
    std::string agent;
    double time = 0.0;
};

/// Second-observer reduction of a residual superposition: keeps the component
/// on which `trigger.agent` is conscious, at modulus 1. Throws NotResidual.
Superposition prune_phantom(const Superposition& sup, const ScenarioSpec& spec, const ObservationTrigger& trigger);

}  // namespace reduxion
