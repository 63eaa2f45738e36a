#pragma once

// The four reduction rules.
//
//  (1) stochastic choice driven by current flowing into ready components,
//  (2) new non-classical components carry ready, not conscious, minds,
//  (3) a choice makes the chosen ready mind conscious and drops the rest,
//  (4) no current between two components that both hold a ready state of the
//      same agent.

#include "reduxion/channel.hpp"
#include "reduxion/state.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace reduxion {

struct RuleConfig {
    bool rule2_enabled = true;
    bool rule4_enabled = true;
    std::uint64_t rng_seed = 0;

    friend bool operator==(const RuleConfig&, const RuleConfig&) = default;
};

/// Seeded stream; one per trajectory (seed = base_seed + trajectory index).
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    /// Uniform double in [0, 1) built from the top 53 bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    friend bool operator==(const Rng&, const Rng&) = default;

private:
    std::mt19937_64 engine_;
};

struct ChoiceEvent {
    double time = 0.0;
    ComponentLabel chosen;
    double hazard_at_choice = 0.0;
};

struct Hazard {
    double rate = 0.0;  // per second
    double inflow = 0.0;  // total ready-component inflow over the step
    std::vector<std::pair<ComponentLabel, double>> weights;  // ledger order
};

/// Choice rate for one step. J_n is the current flowing into ready component n
/// over the step; the rate is sum(J_n) / (s - consumed), with s the total
/// modulus and `consumed` the ready inflow already accumulated since the last
/// reduction. A non-positive denominator yields an infinite rate.
Hazard rule1_hazard(const CurrentLedger& ledger, const Superposition& sup, double consumed = 0.0);

/// Fires with probability min(1, rate * dt); the winner is drawn proportionally
/// to its weight. Draws nothing when the rate is zero.
std::optional<ChoiceEvent> rule1_sample(double rate, const std::vector<std::pair<ComponentLabel, double>>& weights,
                                        double dt, double time, Rng& rng);

/// Demotes the conscious minds the transition acted on (`touched`) to ready,
/// unless the channel is classically continuous.
ComponentLabel rule2_classify(const ComponentLabel& new_label, const Channel& via,
                              const std::vector<std::string>& touched, const RuleConfig& cfg = {});

/// Every ready mind of `label` made conscious.
ComponentLabel promote_ready(const ComponentLabel& label);

Superposition rule3_collapse(const Superposition& sup, const ChoiceEvent& event);

bool rule4_allows(const ComponentLabel& source, const ComponentLabel& target, const RuleConfig& cfg = {});

}  // namespace reduxion
