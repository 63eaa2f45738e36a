#include "reduxion/dynamics.hpp"

#include "reduxion/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <type_traits>

namespace reduxion {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTimeTol = 1e-9;

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

double ramp_density(double t, double start, double duration) {
    const double x = (t - start) / duration;
    if (x <= 0.0 || x >= 1.0) return 0.0;
    return (1.0 - std::cos(2.0 * std::numbers::pi * x)) / duration;
}

}  // namespace

// ---------------------------------------------------------------------------
// Rate laws

double decay_rate(double t, double half_life, double source_modulus) {
    if (t >= half_life || source_modulus <= 0.0) return 0.0;
    return std::numbers::ln2 / half_life * source_modulus;
}

double decay_exposure(double t, double dt, double half_life) {
    const double active = std::min(t + dt, half_life) - t;
    return active > 0.0 ? std::numbers::ln2 / half_life * active : 0.0;
}

double ramp_remaining(double t, double start, double duration) {
    const double x = (t - start) / duration;
    if (x <= 0.0) return 1.0;
    if (x >= 1.0) return 0.0;
    return 1.0 - (x - std::sin(2.0 * std::numbers::pi * x) / (2.0 * std::numbers::pi));
}

double phys_ramp_rate(double t, double start, double duration, double source_modulus) {
    const double g = ramp_density(t, start, duration);
    if (g <= 0.0 || source_modulus <= 0.0) return 0.0;
    return source_modulus * g / ramp_remaining(t, start, duration);
}

double ramp_exposure(double t, double dt, double start, double duration) {
    const double before = ramp_remaining(t, start, duration);
    if (before <= 0.0) return 0.0;
    const double after = ramp_remaining(t + dt, start, duration);
    if (after <= 0.0) return kInf;
    return std::log(before / after);
}

PulseBins::PulseBins(int bin_count, double t)
    : mass(static_cast<std::size_t>(bin_count), 0.0), entered(static_cast<std::size_t>(bin_count), -1.0), time(t) {}

double PulseBins::total() const noexcept {
    double s = 0.0;
    for (double m : mass) s += m;
    return s;
}

bool front_may_advance(double step_end, double entered, double bin_time) noexcept {
    return entered >= 0.0 && step_end - entered >= bin_time * (1.0 - kTimeTol);
}

AdvectResult advect(const PulseBins& bins, double inflow, double dt, double duration) {
    const std::size_t n = bins.mass.size();
    const double bin_time = duration / static_cast<double>(n);
    if (dt > bin_time * (1.0 + 1e-12))
        throw StepTooLarge("advection step " + std::to_string(dt) + " exceeds bin time " + std::to_string(bin_time));
    const double courant = std::min(1.0, dt / bin_time);
    const double step_end = bins.time + dt;

    AdvectResult r{bins, 0.0};
    for (std::size_t k = 0; k < n; ++k) {
        const double m = bins.mass[k];
        if (m <= 0.0 || !front_may_advance(step_end, bins.entered[k], bin_time)) continue;
        const double out = courant * m;
        r.bins.mass[k] -= out;
        if (k + 1 < n) {
            r.bins.mass[k + 1] += out;
            if (r.bins.entered[k + 1] < 0.0) r.bins.entered[k + 1] = step_end;
        } else {
            r.outflow_to_done += out;
        }
    }
    if (inflow > 0.0) {
        r.bins.mass[0] += inflow * dt;
        if (r.bins.entered[0] < 0.0) r.bins.entered[0] = step_end;
    }
    r.bins.time = step_end;
    return r;
}

// ---------------------------------------------------------------------------
// Network

Network::Network(const ComponentLabel& initial, std::vector<Channel> channels, Compatibility compatibility,
                 RuleConfig rules, std::vector<std::string> classical_devices)
    : channels_(std::move(channels)), compatibility_(std::move(compatibility)), rules_(rules) {
    if (!compatibility_.allows(initial)) throw IncompatibleLabel("initial label is contradictory: " + initial.to_string());
    for (const auto& d : initial.devices) {
        device_ids_.push_back(d.id);
        classical_.push_back(std::find(classical_devices.begin(), classical_devices.end(), d.id) !=
                                     classical_devices.end()
                                 ? 1
                                 : 0);
    }
    if (device_ids_.size() > 32) throw Error("at most 32 devices per label");

    std::vector<NodeId> queue;
    intern(initial, queue);
    for (std::size_t i = 0; i < queue.size(); ++i) expand(queue[i], queue);

    edge_begin_.reserve(labels_.size() + 1);
    edge_begin_.push_back(0);
    for (auto& list : pending_edges_) {
        edges_.insert(edges_.end(), list.begin(), list.end());
        edge_begin_.push_back(static_cast<std::uint32_t>(edges_.size()));
    }
    pending_edges_.clear();
    pending_edges_.shrink_to_fit();
}

NodeId Network::intern(ComponentLabel label, std::vector<NodeId>& queue) {
    if (auto it = index_.find(label); it != index_.end()) return it->second;
    const auto id = static_cast<NodeId>(labels_.size());
    ready_.push_back(label.has_kind(MindState::Kind::Ready) ? 1 : 0);
    conscious_.push_back(label.has_kind(MindState::Kind::Conscious) ? 1 : 0);
    promoted_.push_back(id);
    pending_edges_.emplace_back();
    index_.emplace(label, id);
    labels_.push_back(std::move(label));
    queue.push_back(id);
    return id;
}

void Network::expand(NodeId id, std::vector<NodeId>& queue) {
    const ComponentLabel source = labels_[id];
    std::vector<std::string> touched;
    for (std::size_t c = 0; c < channels_.size(); ++c) {
        const Channel& ch = channels_[c];
        if (!ch.source.matches(source)) continue;
        touched.clear();

        std::optional<ComponentLabel> target = std::visit(
            overloaded{
                [&](const Advection& adv) -> std::optional<ComponentLabel> {
                    const DeviceState* dev = source.device(adv.device);
                    if (!dev || dev->phase != DeviceState::Phase::Running) return std::nullopt;
                    ComponentLabel next = source;
                    DeviceState* nd = next.device(adv.device);
                    if (dev->bin + 1 < adv.bin_count) {
                        nd->bin = dev->bin + 1;
                        return next;
                    }
                    nd->phase = DeviceState::Phase::Done;
                    nd->bin = 0;
                    return ch.effect.apply(next, &touched);
                },
                [&](const auto&) -> std::optional<ComponentLabel> { return ch.effect.apply(source, &touched); },
            },
            ch.kind);

        if (!target || *target == source) continue;
        ComponentLabel classified = rule2_classify(*target, ch, touched, rules_);
        if (!compatibility_.allows(classified)) continue;
        if (!rule4_allows(source, classified, rules_)) continue;

        std::uint32_t moved = 0;
        for (std::size_t s = 0; s < source.devices.size(); ++s)
            if (source.devices[s] != classified.devices[s]) moved |= 1u << s;

        const NodeId tid = intern(std::move(classified), queue);
        pending_edges_[id].push_back({tid, static_cast<std::uint16_t>(c), moved});
    }
    if (ready_[id]) {
        const NodeId pid = intern(promote_ready(source), queue);
        promoted_[id] = pid;
    }
}

std::optional<NodeId> Network::find(const ComponentLabel& label) const {
    if (auto it = index_.find(label); it != index_.end()) return it->second;
    return std::nullopt;
}

std::span<const Edge> Network::edges(NodeId id) const {
    return {edges_.data() + edge_begin_[id], edges_.data() + edge_begin_[id + 1]};
}

std::optional<std::size_t> Network::device_slot(const std::string& id) const {
    for (std::size_t s = 0; s < device_ids_.size(); ++s)
        if (device_ids_[s] == id) return s;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Stepping

double DenseState::total() const noexcept {
    double s = 0.0;
    for (NodeId id : active) s += modulus[id];
    return s;
}

double default_dt(double half_life, std::span<const double> device_durations) {
    double shortest = half_life;
    for (double d : device_durations) shortest = std::min(shortest, d);
    return shortest / 2000.0;
}

Stepper::Stepper(const Network& network, double dt) : network_(&network), dt_(dt) {
    if (!(dt > 0.0)) throw StepTooLarge("step size must be positive");
    const auto& channels = network.channels();
    channel_exposure_.assign(channels.size(), 0.0);
    upwind_exposure_.assign(channels.size(), 0.0);
    bin_time_.assign(channels.size(), 0.0);
    advected_slot_.assign(channels.size(), -1);
    for (std::size_t c = 0; c < channels.size(); ++c) {
        if (const auto* adv = std::get_if<Advection>(&channels[c].kind)) {
            const double bin_time = adv->duration / adv->bin_count;
            if (dt > bin_time * (1.0 + 1e-12))
                throw StepTooLarge("step " + std::to_string(dt) + " exceeds bin time " + std::to_string(bin_time) +
                                   " of channel '" + channels[c].name + "'");
            const double courant = dt / bin_time;
            bin_time_[c] = bin_time;
            upwind_exposure_[c] = courant < 1.0 ? -std::log1p(-courant) : kInf;
            if (auto slot = network.device_slot(adv->device)) advected_slot_[c] = static_cast<int>(*slot);
        }
    }
    outflow_.reserve(16);
}

void Stepper::prepare_channel_rates(double t) {
    const auto& channels = network_->channels();
    for (std::size_t c = 0; c < channels.size(); ++c) {
        channel_exposure_[c] = std::visit(overloaded{
                                              [&](const Decay& d) { return decay_exposure(t, dt_, d.half_life); },
                                              [&](const PhysRamp& r) { return ramp_exposure(t, dt_, r.start, r.duration); },
                                              [](const Advection&) { return 0.0; },
                                          },
                                          channels[c].kind);
    }
}

DenseState Stepper::make_state(NodeId node, double modulus, double time) const {
    const std::size_t n = network_->size();
    const std::size_t devices = network_->device_count();
    DenseState s;
    s.modulus.assign(n, 0.0);
    s.born.assign(n, 0.0);
    s.entered.assign(n * devices, -1.0);
    s.live.assign(n, 0);
    s.time = time;
    s.modulus[node] = modulus;
    s.born[node] = time;
    for (std::size_t d = 0; d < devices; ++d) s.entered[node * devices + d] = time;
    s.live[node] = 1;
    s.active.push_back(node);
    return s;
}

void Stepper::collapse_to(DenseState& state, NodeId node, NodeId clock_source) const {
    const std::size_t devices = network_->device_count();
    std::vector<double> clocks(devices);
    for (std::size_t d = 0; d < devices; ++d)
        clocks[d] = network_->device_classical(d) ? state.entered[clock_source * devices + d] : state.time;
    for (NodeId id : state.active) {
        state.modulus[id] = 0.0;
        state.live[id] = 0;
    }
    state.active.clear();
    state.modulus[node] = 1.0;
    state.born[node] = state.time;
    for (std::size_t d = 0; d < devices; ++d) state.entered[node * devices + d] = clocks[d];
    state.live[node] = 1;
    state.active.push_back(node);
}

void Stepper::step(DenseState& state, StepRecord& record) {
    const Network& net = *network_;
    const std::size_t devices = net.device_count();
    const double t = state.time;
    const double step_end = t + dt_;
    prepare_channel_rates(t);

    record.transfers.clear();
    record.step_time = t;
    record.step_size = dt_;
    pending_.clear();
    if (got_inflow_.size() != net.size()) got_inflow_.assign(net.size(), 0);

    struct Candidate {
        std::uint32_t edge;
        double exposure;
    };
    std::vector<Candidate> cand;
    cand.reserve(8);

    const std::size_t active_at_start = state.active.size();
    for (std::size_t a = 0; a < active_at_start; ++a) {
        const NodeId u = state.active[a];
        const double m = state.modulus[u];
        if (m <= 0.0) continue;
        const auto edges = net.edges(u);
        cand.clear();
        int infinite = 0;
        for (std::uint32_t k = 0; k < edges.size(); ++k) {
            const Edge& e = edges[k];
            const int slot = advected_slot_[e.channel];
            double h = 0.0;
            if (slot < 0) {
                h = channel_exposure_[e.channel];
            } else {
                const double entered = state.entered[u * devices + static_cast<std::size_t>(slot)];
                const double bin_time = bin_time_[e.channel];
                if (net.device_classical(static_cast<std::size_t>(slot)) || net.conscious(u)) {
                    if (step_end >= entered + bin_time * (1.0 - kTimeTol)) h = kInf;
                } else if (front_may_advance(step_end, entered, bin_time)) {
                    h = upwind_exposure_[e.channel];
                }
            }
            if (h <= 0.0) continue;
            if (std::isinf(h)) ++infinite;
            cand.push_back({k, h});
        }
        if (cand.empty()) continue;

        const std::uint32_t base = static_cast<std::uint32_t>(edges.data() - net.edges(0).data());
        // Finite channels act first; whatever is left follows the rigid moves.
        double finite = 0.0;
        for (const auto& c : cand)
            if (!std::isinf(c.exposure)) finite += c.exposure;
        double out = 0.0;
        if (finite > 0.0) {
            out = -std::expm1(-finite) * m;
            for (const auto& c : cand) {
                if (std::isinf(c.exposure)) continue;
                const double amount = out * (c.exposure / finite);
                if (amount > 0.0) pending_.push_back({u, base + c.edge, amount});
            }
        }
        if (infinite > 0) {
            const double share = (m - out) / infinite;
            for (const auto& c : cand)
                if (std::isinf(c.exposure) && share > 0.0) pending_.push_back({u, base + c.edge, share});
        }
    }

    const Edge* all_edges = net.edges(0).data();
    for (const auto& p : pending_) {
        const Edge& e = all_edges[p.edge];
        const NodeId u = p.source;
        const NodeId v = e.target;
        state.modulus[u] -= p.amount;
        if (!state.live[v]) {
            state.live[v] = 1;
            state.active.push_back(v);
            state.born[v] = step_end;
            const int adv_slot = advected_slot_[e.channel];
            const bool rigid = adv_slot >= 0 && (net.device_classical(static_cast<std::size_t>(adv_slot)) || net.conscious(u));
            for (std::size_t d = 0; d < devices; ++d) {
                const double src = state.entered[u * devices + d];
                double& dst = state.entered[v * devices + d];
                if (e.moved_devices & (1u << d))
                    dst = (rigid && static_cast<int>(d) == adv_slot) ? src + bin_time_[e.channel] : step_end;
                else
                    dst = src;
            }
        } else {
            for (std::size_t d = 0; d < devices; ++d) {
                if (e.moved_devices & (1u << d)) continue;
                double& dst = state.entered[v * devices + d];
                dst = std::min(dst, state.entered[u * devices + d]);
            }
        }
        state.modulus[v] += p.amount;
        got_inflow_[v] = 1;
        record.transfers.push_back({u, v, e.channel, p.amount});
    }

    std::size_t keep = 0;
    for (std::size_t a = 0; a < state.active.size(); ++a) {
        const NodeId id = state.active[a];
        double& m = state.modulus[id];
        if (m < 0.0) m = 0.0;
        const bool fed = got_inflow_[id] != 0;
        got_inflow_[id] = 0;
        if (m < kPruneThreshold && !fed) {
            m = 0.0;
            state.live[id] = 0;
            continue;
        }
        state.active[keep++] = id;
    }
    state.active.resize(keep);
    state.time = step_end;
}

// ---------------------------------------------------------------------------
// Label-level views

Superposition to_superposition(const Network& network, const DenseState& state) {
    Superposition sup;
    sup.time = state.time;
    for (NodeId id : state.active)
        sup.components.push_back({network.label(id), state.modulus[id], state.born[id]});
    return sup;
}

DenseState to_dense(const Network& network, const Superposition& sup) {
    const std::size_t n = network.size();
    const std::size_t devices = network.device_count();
    DenseState s;
    s.modulus.assign(n, 0.0);
    s.born.assign(n, 0.0);
    s.entered.assign(n * devices, -1.0);
    s.live.assign(n, 0);
    s.time = sup.time;
    for (const auto& c : sup.components) {
        auto id = network.find(c.label);
        if (!id) throw IncompatibleLabel("label outside the scenario network: " + c.label.to_string());
        if (s.live[*id]) throw DuplicateLabel("duplicate component: " + c.label.to_string());
        s.modulus[*id] = c.modulus;
        s.born[*id] = c.born_at;
        for (std::size_t d = 0; d < devices; ++d) s.entered[*id * devices + d] = c.born_at;
        s.live[*id] = 1;
        s.active.push_back(*id);
    }
    return s;
}

CurrentLedger to_ledger(const Network& network, const StepRecord& record) {
    CurrentLedger ledger;
    ledger.step_time = record.step_time;
    ledger.step_size = record.step_size;
    ledger.entries.reserve(record.transfers.size());
    for (const auto& t : record.transfers)
        ledger.entries.push_back({network.label(t.source), network.label(t.target), t.amount,
                                  t.amount / record.step_size, network.channels()[t.channel].name});
    return ledger;
}

std::pair<Superposition, CurrentLedger> step(const Superposition& sup, const Network& network, double dt) {
    Stepper stepper(network, dt);
    DenseState state = to_dense(network, sup);
    StepRecord record;
    stepper.step(state, record);
    return {to_superposition(network, state), to_ledger(network, record)};
}

}  // namespace reduxion
