#include "reduxion/rules.hpp"

#include "reduxion/error.hpp"

#include <algorithm>
#include <limits>

namespace reduxion {

Hazard rule1_hazard(const CurrentLedger& ledger, const Superposition& sup, double consumed) {
    Hazard h;
    for (const auto& e : ledger.entries) {
        if (e.transferred <= 0.0 || !e.target.has_kind(MindState::Kind::Ready)) continue;
        h.inflow += e.transferred;
        auto it = std::find_if(h.weights.begin(), h.weights.end(),
                               [&](const auto& w) { return w.first == e.target; });
        if (it == h.weights.end()) h.weights.emplace_back(e.target, e.transferred);
        else it->second += e.transferred;
    }
    if (h.inflow <= 0.0 || ledger.step_size <= 0.0) return h;
    const double remaining = total_modulus(sup) - consumed;
    h.rate = remaining > 0.0 ? h.inflow / ledger.step_size / remaining
                             : std::numeric_limits<double>::infinity();
    return h;
}

std::optional<ChoiceEvent> rule1_sample(double rate, const std::vector<std::pair<ComponentLabel, double>>& weights,
                                        double dt, double time, Rng& rng) {
    if (!(rate > 0.0) || weights.empty()) return std::nullopt;
    const double p = std::min(1.0, rate * dt);
    if (rng.uniform() >= p) return std::nullopt;

    double total = 0.0;
    for (const auto& w : weights) total += w.second;
    double pick = rng.uniform() * total;
    for (const auto& [label, weight] : weights) {
        if (pick < weight) return ChoiceEvent{time, label, rate};
        pick -= weight;
    }
    return ChoiceEvent{time, weights.back().first, rate};
}

ComponentLabel rule2_classify(const ComponentLabel& new_label, const Channel& via,
                              const std::vector<std::string>& touched, const RuleConfig& cfg) {
    if (!cfg.rule2_enabled || via.classically_continuous) return new_label;
    ComponentLabel out = new_label;
    for (const auto& agent : touched) {
        MindState* m = out.mind(agent);
        if (m && m->kind == MindState::Kind::Conscious) m->kind = MindState::Kind::Ready;
    }
    return out;
}

ComponentLabel promote_ready(const ComponentLabel& label) {
    ComponentLabel out = label;
    for (auto& m : out.minds)
        if (m.kind == MindState::Kind::Ready) m.kind = MindState::Kind::Conscious;
    return out;
}

Superposition rule3_collapse(const Superposition& sup, const ChoiceEvent& event) {
    const Component* chosen = sup.find(event.chosen);
    if (!chosen) throw NotReady("chosen component not present: " + event.chosen.to_string());
    if (!chosen->label.has_kind(MindState::Kind::Ready))
        throw NotReady("chosen component carries no ready state: " + event.chosen.to_string());
    Superposition out;
    out.time = sup.time;
    out.components.push_back({promote_ready(chosen->label), 1.0, sup.time});
    return out;
}

bool rule4_allows(const ComponentLabel& source, const ComponentLabel& target, const RuleConfig& cfg) {
    if (!cfg.rule4_enabled) return true;
    for (const auto& m : source.minds) {
        if (m.kind != MindState::Kind::Ready) continue;
        const MindState* t = target.mind(m.agent);
        if (t && t->kind == MindState::Kind::Ready) return false;
    }
    return true;
}

}  // namespace reduxion
