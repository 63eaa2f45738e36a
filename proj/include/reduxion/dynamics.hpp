#pragma once

// Rate laws and the explicit stepper.
//
// Each step moves modulus along the channels of a compiled component network.
// Every source computes its outflow from its start-of-step modulus; concurrent
// channels out of one source share it in proportion to their integrated rates,
// which reduces to the plain per-channel fraction when a single channel acts.

#include "reduxion/channel.hpp"
#include "reduxion/rules.hpp"
#include "reduxion/state.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace reduxion {

// ---------------------------------------------------------------------------
// Rate laws

/// lambda * source_modulus before the clock cutoff, zero after it.
double decay_rate(double t, double half_life, double source_modulus);

/// Integrated decay rate over [t, t + dt], truncated at the cutoff.
double decay_exposure(double t, double dt, double half_life);

/// Fraction of a static ramp source not yet transferred at time t.
double ramp_remaining(double t, double start, double duration);

/// Instantaneous transfer rate of a ramp source: m * g(t) / G(t), where g is
/// the raised-cosine bump on [start, start + duration] and G its remaining
/// mass. A static source drains completely by the end of the ramp.
double phys_ramp_rate(double t, double start, double duration, double source_modulus);

/// Integrated ramp rate over [t, t + dt]; infinite when the ramp ends inside
/// the step, zero outside the support.
double ramp_exposure(double t, double dt, double start, double duration);

/// Bins of one advected pulse. `entered` holds the time each bin first
/// received mass (negative when it never has).
struct PulseBins {
    std::vector<double> mass;
    std::vector<double> entered;
    double time = 0.0;

    explicit PulseBins(int bin_count = 1, double t = 0.0);
    double total() const noexcept;
};

struct AdvectResult {
    PulseBins bins;
    double outflow_to_done = 0.0;
};

/// First-order upwind transport at bin_count / duration bins per second.
/// `inflow` (per second) enters bin 0. A bin passes mass on only after it has
/// been occupied for one bin time, so the pulse front never outruns the
/// physical speed. Throws StepTooLarge when dt > duration / bin_count.
AdvectResult advect(const PulseBins& bins, double inflow, double dt, double duration);

/// Upwind front gate shared by advect() and the network stepper.
bool front_may_advance(double step_end, double entered, double bin_time) noexcept;

// ---------------------------------------------------------------------------
// Compiled network

using NodeId = std::uint32_t;

struct Edge {
    NodeId target;
    std::uint16_t channel;
    std::uint32_t moved_devices;  // bitmask of device slots whose state changes
};

/// Closure of every label reachable from the initial label through the
/// channels, Rule 2 classification, Rule 4 filtering, the compatibility
/// predicate and Rule 3 promotions. Immutable once built.
class Network {
public:
    Network(const ComponentLabel& initial, std::vector<Channel> channels, Compatibility compatibility,
            RuleConfig rules, std::vector<std::string> classical_devices = {});

    std::size_t size() const noexcept { return labels_.size(); }
    const ComponentLabel& label(NodeId id) const { return labels_[id]; }
    std::optional<NodeId> find(const ComponentLabel& label) const;
    NodeId initial() const noexcept { return 0; }

    std::span<const Edge> edges(NodeId id) const;
    bool ready(NodeId id) const { return ready_[id] != 0; }
    bool conscious(NodeId id) const { return conscious_[id] != 0; }
    /// Node reached by a Rule 3 promotion; only valid for ready nodes.
    NodeId promoted(NodeId id) const { return promoted_[id]; }

    const std::vector<Channel>& channels() const noexcept { return channels_; }
    const Compatibility& compatibility() const noexcept { return compatibility_; }
    const RuleConfig& rules() const noexcept { return rules_; }

    std::size_t device_count() const noexcept { return device_ids_.size(); }
    const std::string& device_id(std::size_t slot) const { return device_ids_[slot]; }
    bool device_classical(std::size_t slot) const { return classical_[slot] != 0; }
    std::optional<std::size_t> device_slot(const std::string& id) const;

private:
    NodeId intern(ComponentLabel label, std::vector<NodeId>& queue);
    void expand(NodeId id, std::vector<NodeId>& queue);

    std::vector<Channel> channels_;
    Compatibility compatibility_;
    RuleConfig rules_;
    std::vector<std::string> device_ids_;
    std::vector<std::uint8_t> classical_;

    std::vector<ComponentLabel> labels_;
    std::unordered_map<ComponentLabel, NodeId, ComponentLabelHash> index_;
    std::vector<std::uint32_t> edge_begin_;
    std::vector<Edge> edges_;
    std::vector<std::vector<Edge>> pending_edges_;
    std::vector<std::uint8_t> ready_;
    std::vector<std::uint8_t> conscious_;
    std::vector<NodeId> promoted_;
};

// ---------------------------------------------------------------------------
// Dense state and stepping

/// Moduli indexed by network node; only `active` nodes are nonzero.
struct DenseState {
    std::vector<double> modulus;
    std::vector<double> born;
    std::vector<double> entered;  // node * device_count + slot
    std::vector<NodeId> active;
    std::vector<std::uint8_t> live;
    double time = 0.0;

    double total() const noexcept;
};

struct Transfer {
    NodeId source;
    NodeId target;
    std::uint16_t channel;
    double amount;
};

struct StepRecord {
    std::vector<Transfer> transfers;
    double step_time = 0.0;
    double step_size = 0.0;
};

/// Default step: min(half_life, shortest device duration) / 2000.
double default_dt(double half_life, std::span<const double> device_durations);

class Stepper {
public:
    /// Throws StepTooLarge when dt violates an advection channel's bin time.
    Stepper(const Network& network, double dt);

    double dt() const noexcept { return dt_; }
    const Network& network() const noexcept { return *network_; }

    DenseState make_state(NodeId node, double modulus, double time) const;
    /// Resets `state` to a single node, keeping device clocks from `clock_source`
    /// for classical devices and starting the others at `time`.
    void collapse_to(DenseState& state, NodeId node, NodeId clock_source) const;

    void step(DenseState& state, StepRecord& record);

private:
    void prepare_channel_rates(double t);

    const Network* network_;
    double dt_;
    std::vector<double> channel_exposure_;   // per channel this step (decay/ramp)
    std::vector<double> upwind_exposure_;    // per channel, advection only
    std::vector<double> bin_time_;           // per channel, advection only
    std::vector<int> advected_slot_;         // per channel, -1 when not advection
    std::vector<double> outflow_;
    std::vector<std::uint8_t> got_inflow_;
    struct Pending {
        NodeId source;
        std::uint32_t edge;
        double amount;
    };
    std::vector<Pending> pending_;
};

Superposition to_superposition(const Network& network, const DenseState& state);
DenseState to_dense(const Network& network, const Superposition& sup);
CurrentLedger to_ledger(const Network& network, const StepRecord& record);

/// Advances `sup` by one step of the network's channels.
std::pair<Superposition, CurrentLedger> step(const Superposition& sup, const Network& network, double dt);

}  // namespace reduxion
