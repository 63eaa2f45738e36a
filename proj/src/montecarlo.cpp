#include "reduxion/montecarlo.hpp"

#include "reduxion/error.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <thread>

namespace reduxion {

namespace {

constexpr std::size_t kQuiescenceStride = 64;

std::string mind_key(const MindState& m) { return "into:" + m.agent + "=" + m.percept; }

void accumulate_integrals(const Network& net, const StepRecord& record, std::map<std::string, double>& out) {
    for (const auto& t : record.transfers) {
        out["channel:" + net.channels()[t.channel].name] += t.amount;
        if (!net.ready(t.target)) continue;
        out["into:ready"] += t.amount;
        for (const auto& m : net.label(t.target).minds)
            if (m.kind == MindState::Kind::Ready) out[mind_key(m)] += t.amount;
    }
}

}  // namespace

Frequency wilson_interval(std::size_t successes, std::size_t trials) {
    if (trials == 0) return {};
    constexpr double z = 1.959963984540054;
    const double n = static_cast<double>(trials);
    const double p = static_cast<double>(successes) / n;
    const double denom = 1.0 + z * z / n;
    const double center = (p + z * z / (2.0 * n)) / denom;
    const double half = z / denom * std::sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n));
    const double lower = successes == 0 ? 0.0 : std::max(0.0, center - half);
    const double upper = successes == trials ? 1.0 : std::min(1.0, center + half);
    return {p, lower, upper};
}

// Rule-1 bookkeeping between reductions. The per-step choice probability is
// the ready inflow over the step divided by the modulus not yet consumed by
// earlier ready inflow, so a full unit of ready inflow makes a choice certain.
struct Simulator::Sampling {
    double consumed = 0.0;
    double reserve = 0.0;  // forbidden inflow set aside by exact conditioning
    bool collapsed = false;
    bool exact = false;

    void reset() {
        consumed = 0.0;
        reserve = 0.0;
        collapsed = true;
    }
};

struct Simulator::Prefix {
    std::vector<double> probability;  // per step; 0 where no ready inflow
    std::map<std::string, double> integrals;
    Superposition final_state;
    double forbidden = 0.0;
};

Simulator::Simulator(ScenarioSpec spec, SimulationOptions options)
    : spec_(std::move(spec)), options_(options) {
    validate(spec_);
    network_ = std::make_shared<const Network>(make_network(spec_, options_.rules));
    const auto durations = spec_.device_durations();
    dt_ = options_.dt > 0.0 ? options_.dt : default_dt(spec_.half_life, durations);
    steps_ = static_cast<std::size_t>(std::ceil(spec_.horizon / dt_ - 1e-9));
    forbidden_.assign(network_->size(), 0);
    for (NodeId id = 0; id < network_->size(); ++id)
        for (const auto& c : spec_.conditions)
            if (c.forbidden_choice.matches(network_->label(id))) forbidden_[id] = 1;
}

bool Simulator::quiescent(const DenseState& state) const {
    const auto& channels = network_->channels();
    for (NodeId u : state.active) {
        for (const Edge& e : network_->edges(u)) {
            const bool done = std::visit(
                [&](const auto& k) {
                    using K = std::decay_t<decltype(k)>;
                    if constexpr (std::is_same_v<K, Decay>) return state.time >= k.half_life;
                    else if constexpr (std::is_same_v<K, PhysRamp>) return state.time >= k.start + k.duration;
                    else return false;
                },
                channels[e.channel].kind);
            if (!done) return false;
        }
    }
    return true;
}

namespace {

bool eligible(const Network& net, const std::vector<std::uint8_t>& forbidden, NodeId v, bool exclude_forbidden) {
    return net.ready(v) && !(exclude_forbidden && forbidden[v]);
}

double ready_inflow(const Network& net, const std::vector<std::uint8_t>& forbidden, const StepRecord& record,
                    bool exclude_forbidden) {
    double sum = 0.0;
    for (const auto& t : record.transfers)
        if (eligible(net, forbidden, t.target, exclude_forbidden)) sum += t.amount;
    return sum;
}

double choice_probability(double inflow, double total, double consumed, double reserve) {
    if (!(inflow > 0.0)) return 0.0;
    const double remaining = total - consumed - reserve;
    if (remaining <= kModulusFloor) return 1.0;
    return std::min(1.0, inflow / remaining);
}

NodeId select_target(const Network& net, const std::vector<std::uint8_t>& forbidden, const StepRecord& record,
                     bool exclude_forbidden, double u) {
    double total = 0.0;
    for (const auto& t : record.transfers)
        if (eligible(net, forbidden, t.target, exclude_forbidden)) total += t.amount;
    double pick = u * total;
    NodeId last = 0;
    for (const auto& t : record.transfers) {
        if (!eligible(net, forbidden, t.target, exclude_forbidden)) continue;
        if (pick < t.amount) return t.target;
        pick -= t.amount;
        last = t.target;
    }
    return last;
}

DenseState collapsed_state(const Stepper& stepper, const DenseState& state, NodeId chosen) {
    const Network& net = stepper.network();
    const NodeId target = net.promoted(chosen);
    DenseState out = stepper.make_state(target, 1.0, state.time);
    const std::size_t devices = net.device_count();
    for (std::size_t d = 0; d < devices; ++d)
        if (net.device_classical(d)) out.entered[target * devices + d] = state.entered[chosen * devices + d];
    return out;
}

}  // namespace

double Simulator::forbidden_total() const {
    if (spec_.conditions.empty() || options_.conditioning != Conditioning::Exact) return 0.0;
    Stepper stepper(*network_, dt_);
    DenseState state = stepper.make_state(network_->initial(), 1.0, 0.0);
    StepRecord record;
    double sum = 0.0;
    for (std::size_t k = 0; k < steps_; ++k) {
        if (k % kQuiescenceStride == 0 && quiescent(state)) break;
        stepper.step(state, record);
        for (const auto& t : record.transfers)
            if (network_->ready(t.target) && forbidden_[t.target]) sum += t.amount;
    }
    return sum;
}

TrajectoryOutcome Simulator::finish(DenseState state, Rng& rng, std::size_t next_step, Sampling& sampling,
                                    std::vector<ChoiceEvent> events) const {
    Stepper stepper(*network_, dt_);
    StepRecord record;
    TrajectoryOutcome out;
    for (std::size_t k = next_step; k < steps_; ++k) {
        if (k % kQuiescenceStride == 0 && quiescent(state)) break;
        const double total = state.total();
        stepper.step(state, record);
        const bool exclude = sampling.exact && !sampling.collapsed;
        const double inflow = ready_inflow(*network_, forbidden_, record, exclude);
        if (!(inflow > 0.0)) continue;
        const double p = choice_probability(inflow, total, sampling.consumed, sampling.reserve);
        sampling.consumed += inflow;
        if (rng.uniform() >= p) continue;

        const NodeId chosen = select_target(*network_, forbidden_, record, exclude, rng.uniform());
        events.push_back({state.time, network_->label(network_->promoted(chosen)), p / dt_});
        if (forbidden_[chosen]) {
            out.rejected = true;
            out.events = std::move(events);
            out.final_state = to_superposition(*network_, state);
            return out;
        }
        state = collapsed_state(stepper, state, chosen);
        sampling.reset();
    }
    out.final_state = to_superposition(*network_, state);
    out.terminal = classify_terminal(out.final_state, spec_);
    out.events = std::move(events);
    return out;
}

TrajectoryOutcome Simulator::trajectory(std::uint64_t seed) const {
    Rng rng(seed);
    Sampling sampling;
    sampling.exact = options_.conditioning == Conditioning::Exact && !spec_.conditions.empty();
    sampling.reserve = sampling.exact ? forbidden_total() : 0.0;
    Stepper stepper(*network_, dt_);
    return finish(stepper.make_state(network_->initial(), 1.0, 0.0), rng, 0, sampling, {});
}

DeterministicRun Simulator::deterministic(const std::function<void(const StepRecord&)>& on_step) const {
    Stepper stepper(*network_, dt_);
    DenseState state = stepper.make_state(network_->initial(), 1.0, 0.0);
    StepRecord record;
    std::vector<std::uint8_t> seen(network_->size(), 0);
    seen[network_->initial()] = 1;
    DeterministicRun run;
    for (std::size_t k = 0; k < steps_; ++k) {
        stepper.step(state, record);
        for (NodeId id : state.active) seen[id] = 1;
        accumulate_integrals(*network_, record, run.current_integrals);
        if (on_step) on_step(record);
    }
    run.final_state = to_superposition(*network_, state);
    for (NodeId id = 0; id < seen.size(); ++id)
        if (seen[id]) run.instantiated.push_back(network_->label(id).group_signature());
    std::sort(run.instantiated.begin(), run.instantiated.end());
    run.instantiated.erase(std::unique(run.instantiated.begin(), run.instantiated.end()), run.instantiated.end());
    try {
        run.terminal = classify_terminal(run.final_state, spec_);
    } catch (const Unclassifiable&) {
    }
    return run;
}

Simulator::Prefix Simulator::no_choice_prefix() const {
    const bool exact = options_.conditioning == Conditioning::Exact && !spec_.conditions.empty();
    Stepper stepper(*network_, dt_);
    DenseState state = stepper.make_state(network_->initial(), 1.0, 0.0);
    StepRecord record;
    Prefix prefix;
    std::vector<double> inflow(steps_, 0.0), totals(steps_, 0.0);
    std::size_t k = 0;
    for (; k < steps_; ++k) {
        if (k % kQuiescenceStride == 0 && quiescent(state)) break;
        totals[k] = state.total();
        stepper.step(state, record);
        inflow[k] = ready_inflow(*network_, forbidden_, record, exact);
        accumulate_integrals(*network_, record, prefix.integrals);
        for (const auto& t : record.transfers)
            if (network_->ready(t.target) && forbidden_[t.target]) prefix.forbidden += t.amount;
    }
    prefix.final_state = to_superposition(*network_, state);

    Sampling sampling;
    sampling.exact = exact;
    sampling.reserve = exact ? prefix.forbidden : 0.0;
    prefix.probability.assign(steps_, 0.0);
    for (std::size_t j = 0; j < k; ++j) {
        if (!(inflow[j] > 0.0)) continue;
        prefix.probability[j] = choice_probability(inflow[j], totals[j], sampling.consumed, sampling.reserve);
        sampling.consumed += inflow[j];
    }
    return prefix;
}

RunStatistics Simulator::ensemble(std::size_t trials, std::uint64_t base_seed, unsigned parallelism) const {
    const auto started = std::chrono::steady_clock::now();
    RunStatistics stats;
    stats.scenario = spec_.name;
    stats.trials = trials;
    stats.base_seed = base_seed;
    stats.dt = dt_;
    for (const auto& t : spec_.terminals) stats.counts[t.name] = 0;

    const bool exact = options_.conditioning == Conditioning::Exact && !spec_.conditions.empty();
    const Prefix prefix = no_choice_prefix();
    stats.current_integrals = prefix.integrals;
    if (exact) stats.condition_probability = std::max(0.0, 1.0 - prefix.forbidden);

    // First draw of every trial against the shared no-choice path.
    constexpr std::size_t kNever = static_cast<std::size_t>(-1);
    std::vector<Rng> rngs;
    rngs.reserve(trials);
    std::vector<std::size_t> fire(trials, kNever);
    for (std::size_t i = 0; i < trials; ++i) {
        rngs.emplace_back(base_seed + i);
        for (std::size_t k = 0; k < steps_; ++k) {
            const double p = prefix.probability[k];
            if (p > 0.0 && rngs[i].uniform() < p) {
                fire[i] = k;
                break;
            }
        }
    }

    std::vector<TrajectoryOutcome> outcomes(trials);
    std::string no_choice_terminal;
    bool no_choice_classified = false;
    struct Pending {
        std::size_t trial;
        NodeId chosen;
        std::size_t step;
        double time;
        std::vector<double> clocks;
        double probability;
    };
    std::vector<Pending> pending;

    std::vector<std::size_t> order(trials);
    for (std::size_t i = 0; i < trials; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fire[a] < fire[b]; });
    std::size_t cursor = 0;
    while (cursor < trials && fire[order[cursor]] != kNever) ++cursor;
    const std::size_t fired = cursor;

    if (fired > 0) {
        Stepper stepper(*network_, dt_);
        DenseState state = stepper.make_state(network_->initial(), 1.0, 0.0);
        StepRecord record;
        const std::size_t devices = network_->device_count();
        std::size_t next = 0;
        for (std::size_t k = 0; k < steps_ && next < fired; ++k) {
            stepper.step(state, record);
            while (next < fired && fire[order[next]] == k) {
                const std::size_t i = order[next++];
                const NodeId chosen = select_target(*network_, forbidden_, record, exact, rngs[i].uniform());
                std::vector<double> clocks(state.entered.begin() + static_cast<std::ptrdiff_t>(chosen * devices),
                                           state.entered.begin() + static_cast<std::ptrdiff_t>((chosen + 1) * devices));
                pending.push_back({i, chosen, k, state.time, std::move(clocks), prefix.probability[k]});
            }
        }
    }

    auto run_pending = [&](std::size_t begin, std::size_t stride) {
        Stepper stepper(*network_, dt_);
        const std::size_t devices = network_->device_count();
        for (std::size_t j = begin; j < pending.size(); j += stride) {
            const Pending& pd = pending[j];
            const NodeId target = network_->promoted(pd.chosen);
            std::vector<ChoiceEvent> events{{pd.time, network_->label(target), pd.probability / dt_}};
            TrajectoryOutcome& out = outcomes[pd.trial];
            if (forbidden_[pd.chosen]) {
                out.rejected = true;
                out.events = std::move(events);
                continue;
            }
            DenseState state = stepper.make_state(target, 1.0, pd.time);
            for (std::size_t d = 0; d < devices; ++d)
                if (network_->device_classical(d)) state.entered[target * devices + d] = pd.clocks[d];
            Sampling sampling;
            sampling.exact = exact;
            sampling.reset();
            try {
                out = finish(std::move(state), rngs[pd.trial], pd.step + 1, sampling, std::move(events));
            } catch (const Unclassifiable&) {
                out.terminal.clear();
            }
        }
    };

    const unsigned workers = std::max(1u, std::min<unsigned>(parallelism, static_cast<unsigned>(std::max<std::size_t>(1, pending.size()))));
    if (workers == 1) {
        run_pending(0, 1);
    } else {
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(workers);
        for (unsigned w = 0; w < workers; ++w)
            pool.emplace_back([&, w] {
                try {
                    run_pending(w, workers);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        for (auto& t : pool) t.join();
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    }

    for (std::size_t i = 0; i < trials; ++i) {
        if (fire[i] != kNever) continue;
        if (!no_choice_classified) {
            try {
                no_choice_terminal = classify_terminal(prefix.final_state, spec_);
            } catch (const Unclassifiable&) {
                no_choice_terminal.clear();
            }
            no_choice_classified = true;
        }
        outcomes[i].terminal = no_choice_terminal;
    }

    for (const auto& o : outcomes) {
        if (o.rejected) ++stats.rejected;
        else if (o.terminal.empty()) ++stats.unclassified;
        else ++stats.counts[o.terminal];
    }
    const std::size_t accepted = trials - stats.rejected;
    for (const auto& [name, count] : stats.counts) {
        stats.frequencies[name] = wilson_interval(count, trials);
        stats.conditional_frequencies[name] = wilson_interval(count, accepted);
    }
    if (!spec_.conditions.empty()) stats.rejection = wilson_interval(stats.rejected, trials);
    stats.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return stats;
}

TrajectoryOutcome run_trajectory(const ScenarioSpec& spec, std::uint64_t seed, double dt,
                                 const SimulationOptions& options) {
    SimulationOptions o = options;
    if (dt > 0.0) o.dt = dt;
    return Simulator(spec, o).trajectory(seed);
}

RunStatistics run_ensemble(const ScenarioSpec& spec, const EnsembleConfig& cfg) {
    SimulationOptions o{cfg.dt, cfg.rules, cfg.conditioning};
    Simulator sim(spec, o);
    if (cfg.mode == EnsembleConfig::Mode::Deterministic) {
        const auto started = std::chrono::steady_clock::now();
        const DeterministicRun run = sim.deterministic();
        RunStatistics stats;
        stats.scenario = spec.name;
        stats.trials = 1;
        stats.base_seed = cfg.base_seed;
        stats.dt = sim.dt();
        for (const auto& t : spec.terminals) stats.counts[t.name] = 0;
        if (run.terminal) ++stats.counts[*run.terminal];
        else stats.unclassified = 1;
        for (const auto& [name, count] : stats.counts) {
            stats.frequencies[name] = wilson_interval(count, 1);
            stats.conditional_frequencies[name] = wilson_interval(count, 1);
        }
        stats.current_integrals = run.current_integrals;
        stats.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        return stats;
    }
    return sim.ensemble(cfg.trials, cfg.base_seed, cfg.parallelism);
}

}  // namespace reduxion
