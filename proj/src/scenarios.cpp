#include "reduxion/scenarios.hpp"

#include "reduxion/error.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace reduxion {

namespace {

constexpr double kDefaultHalfLife = 1.0;
constexpr double kDefaultT = 0.5;
constexpr double kDefaultTN = 1.8;
constexpr double kDefaultTauPhys = 0.05;
constexpr int kDefaultBins = 128;
constexpr int kInternalAlarmBins = 256;
constexpr double kDefaultHorizon = 4.0;

struct Params {
    double half_life = kDefaultHalfLife;
    double T = kDefaultT;
    double T_N = kDefaultTN;
    double t_ob = 0.0;
    double tau_phys = kDefaultTauPhys;
    int bin_count = kDefaultBins;
    double horizon = kDefaultHorizon;
    std::optional<std::uint64_t> seed;
};

MindState mind(std::string agent, std::string percept, MindState::Kind kind) {
    return MindState{std::move(agent), kind, std::move(percept)};
}

Channel decay_channel(const Params& p, std::string_view source, std::string_view edit) {
    return {"decay", Decay{p.half_life}, LabelPattern::parse(source), LabelEdit::parse(edit), false};
}

Channel advect_channel(const DeviceSpec& d, std::string name, std::string_view edit) {
    return {std::move(name), Advection{d.id, d.duration, d.bin_count}, LabelPattern{}, LabelEdit::parse(edit), true};
}

Channel ramp_channel(std::string name, const Params& p, std::string agent, std::string_view source,
                     std::string_view edit) {
    return {std::move(name), PhysRamp{std::move(agent), p.t_ob, p.tau_phys}, LabelPattern::parse(source),
            LabelEdit::parse(edit), false};
}

TerminalSpec terminal(std::string name, std::initializer_list<std::string_view> patterns) {
    TerminalSpec t{std::move(name), {}};
    for (auto p : patterns) t.components.push_back(LabelPattern::parse(p));
    return t;
}

ScenarioSpec base(std::string name, const Params& p) {
    ScenarioSpec s;
    s.name = std::move(name);
    s.half_life = p.half_life;
    s.tau_phys = p.tau_phys;
    s.horizon = p.horizon;
    s.seed = p.seed;
    s.devices.push_back({"M", p.T, p.bin_count, false, false});
    return s;
}

void add_observer(ScenarioSpec& s, const Params& p) {
    s.agents.push_back({"observer", "observer", mind("observer", "X", MindState::Kind::UnknownX), p.t_ob});
    s.channels.push_back(ramp_channel("look-d0", p, "observer", "D0.observer=X", "observer=X>B0?"));
    s.channels.push_back(ramp_channel("look-d1", p, "observer", "D1.observer=X", "observer=X>B1?"));
}

ScenarioSpec bare_apparatus(const Params& p) {
    ScenarioSpec s = base("bare-apparatus", p);
    s.indicator = Indicator::I0;
    s.channels.push_back(decay_channel(p, "D0.M:idle", "D1.M:0"));
    s.channels.push_back(advect_channel(s.devices[0], "device", "I1"));
    s.terminals.push_back(terminal("Eq1-plateau", {"D0.M:idle.I0", "D1.M:done.I1"}));
    return s;
}

ScenarioSpec apparatus_observer(const Params& p) {
    ScenarioSpec s = base("apparatus-observer", p);
    s.indicator = Indicator::I0;
    s.channels.push_back(decay_channel(p, "D0.M:idle", "D1.M:0.observer=B0>B1"));
    s.channels.push_back(advect_channel(s.devices[0], "device", "I1"));
    add_observer(s, p);
    s.terminals.push_back(terminal("Eq3-tracked-complete", {"D1.M:done.I1.observer=B1!"}));
    s.terminals.push_back(terminal("Eq5-residual", {"D0.M:idle.I0.observer=B0!", "D1.observer=B1?"}));
    s.terminals.push_back(terminal("Eq4-observed-undecayed", {"D0.M:idle.I0.observer=B0!"}));
    return s;
}

ScenarioSpec version1(const Params& p, bool observed) {
    ScenarioSpec s = base(observed ? "version1-observer" : "version1", p);
    s.agents.push_back({"cat", "cat", mind("cat", "C0", MindState::Kind::Conscious), std::nullopt});
    s.channels.push_back(
        decay_channel(p, "D0.M:idle", observed ? "D1.M:0.cat=C0>C1.observer=B0>B1" : "D1.M:0.cat=C0>C1"));
    s.channels.push_back(advect_channel(s.devices[0], "anesthetic", "cat=C1>U-"));
    if (observed) add_observer(s, p);
    s.terminals.push_back(terminal("Eq9-unconscious-cat", {"D1.M:done.cat=U-"}));
    if (observed)
        s.terminals.push_back(
            terminal("Eq10-residual", {"D0.M:idle.cat=C0!.observer=B0!", "D1.cat=C1?.observer=B1?"}));
    else
        s.terminals.push_back(terminal("Eq10-residual", {"D0.M:idle.cat=C0!", "D1.cat=C1?"}));
    return s;
}

ScenarioSpec version2(const Params& p, bool observed) {
    ScenarioSpec s = base(observed ? "version2-observer" : "version2", p);
    s.agents.push_back({"cat", "cat", mind("cat", "U", MindState::Kind::Unconscious), std::nullopt});
    s.channels.push_back(decay_channel(p, "D0.M:idle", observed ? "D1.M:0.observer=B0>B1" : "D1.M:0"));
    s.channels.push_back(advect_channel(s.devices[0], "alarm", "cat=U>C?"));
    if (observed) {
        add_observer(s, p);
        s.terminals.push_back(terminal("Eq15-joint", {"D1.M:done.cat=C!.observer=B1!"}));
        s.terminals.push_back(terminal("Eq18-residual", {"D0.M:idle.cat=U-.observer=B0!", "D1.cat=U-.observer=B1?"}));
    } else {
        s.terminals.push_back(terminal("Eq13-awakened", {"D1.M:done.cat=C!"}));
        s.terminals.push_back(terminal("Eq14-residual", {"D0.M:idle.cat=U-", "D1.M:done.cat=C?"}));
    }
    return s;
}

ScenarioSpec version2_natural(const Params& p) {
    ScenarioSpec s = base("version2-natural", p);
    s.devices.push_back({"N", p.T_N, std::max(kInternalAlarmBins, p.bin_count), true, true});
    s.agents.push_back({"cat", "cat", mind("cat", "U", MindState::Kind::Unconscious), std::nullopt});
    s.channels.push_back(decay_channel(p, "D0.M:idle", "D1.M:0"));
    s.channels.push_back(advect_channel(s.devices[0], "alarm", "cat=U>C?"));
    s.channels.push_back(advect_channel(s.devices[1], "internal-alarm", "cat=U>CN?"));
    s.compatibility.forbidden.emplace_back(LabelPattern::parse("M:done"), LabelPattern::parse("N:done"));
    s.conditions.push_back({LabelPattern::parse("cat=C")});
    s.terminals.push_back(terminal("Eq20-natural-wakeup", {"D0.M:idle.N:done.cat=CN!"}));
    s.terminals.push_back(terminal("Eq13-awakened", {"D1.M:done.cat=C!"}));
    s.terminals.push_back(terminal("Eq19-wakeup-during-alarm", {"D1.M:run.N:done.cat=CN!"}));
    // Woken before the decay clock stopped: the detector stays in superposition
    // and the external pulse cannot reach a body state contradicting C_N.
    s.terminals.push_back(
        terminal("natural-wakeup-decay-pending", {"D0.M:idle.N:done.cat=CN!", "D1.M:run.N:done.cat=CN!"}));
    return s;
}

bool has_observer(std::string_view name) {
    return name == "apparatus-observer" || name == "version1-observer" || name == "version2-observer";
}

double default_observation_time(std::string_view name) {
    if (name == "version1-observer") return 0.3;
    return 0.6;
}

double required_horizon(const ScenarioSpec& s) {
    double longest = 0.0;
    for (const auto& d : s.devices) longest = std::max(longest, d.duration);
    double need = s.half_life + longest;
    for (const auto& a : s.agents)
        if (a.observation_time) need = std::max(need, *a.observation_time + s.tau_phys);
    return need;
}

void check_refs(const ScenarioSpec& s, const LabelPattern& p, const std::string& where) {
    for (const auto& d : p.devices)
        if (!s.device(d.id)) throw SemanticError(where + ": undeclared device '" + d.id + "'");
    for (const auto& m : p.minds)
        if (!s.agent(m.agent)) throw SemanticError(where + ": undeclared agent '" + m.agent + "'");
}

// True when every label matching `source` is left unchanged by `edit`.
bool leaves_unchanged(const LabelPattern& source, const LabelEdit& edit) {
    if (edit.detector && source.detector != edit.detector) return false;
    if (edit.indicator && source.indicator != edit.indicator) return false;
    for (const auto& d : edit.devices) {
        const auto it = std::find_if(source.devices.begin(), source.devices.end(),
                                     [&](const auto& m) { return m.id == d.id; });
        if (it == source.devices.end()) return false;
        using K = LabelPattern::DeviceMatch::Kind;
        using P = DeviceState::Phase;
        const bool same = (d.phase == P::Idle && it->kind == K::Idle) || (d.phase == P::Done && it->kind == K::Done) ||
                          (d.phase == P::Running && it->kind == K::Bin && it->bin == d.bin);
        if (!same) return false;
    }
    for (const auto& m : edit.minds) {
        const auto it = std::find_if(source.minds.begin(), source.minds.end(),
                                     [&](const auto& x) { return x.agent == m.agent; });
        const std::optional<std::string> before = m.from ? m.from : (it != source.minds.end() ? it->percept : std::nullopt);
        if (before != m.to) return false;
        if (m.to_kind && (it == source.minds.end() || it->kind != m.to_kind)) return false;
    }
    return true;
}

void check_refs(const ScenarioSpec& s, const LabelEdit& e, const std::string& where) {
    for (const auto& d : e.devices)
        if (!s.device(d.id)) throw SemanticError(where + ": undeclared device '" + d.id + "'");
    for (const auto& m : e.minds)
        if (!s.agent(m.agent)) throw SemanticError(where + ": undeclared agent '" + m.agent + "'");
}

}  // namespace

// ---------------------------------------------------------------------------
// ScenarioSpec

ComponentLabel ScenarioSpec::initial_label() const {
    ComponentLabel l;
    l.detector = detector;
    l.indicator = indicator;
    for (const auto& d : devices)
        l.devices.push_back(d.starts_running ? DeviceState::running(d.id, 0, d.bin_count)
                                             : DeviceState::idle(d.id, d.bin_count));
    std::sort(l.devices.begin(), l.devices.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    for (const auto& a : agents) l.minds.push_back(a.initial);
    std::sort(l.minds.begin(), l.minds.end(), [](const auto& a, const auto& b) { return a.agent < b.agent; });
    return l;
}

std::vector<std::string> ScenarioSpec::classical_devices() const {
    std::vector<std::string> out;
    for (const auto& d : devices)
        if (d.classical) out.push_back(d.id);
    return out;
}

std::vector<double> ScenarioSpec::device_durations() const {
    std::vector<double> out;
    for (const auto& d : devices) out.push_back(d.duration);
    return out;
}

const AgentSpec* ScenarioSpec::agent(std::string_view id) const {
    for (const auto& a : agents)
        if (a.id == id) return &a;
    return nullptr;
}

const DeviceSpec* ScenarioSpec::device(std::string_view id) const {
    for (const auto& d : devices)
        if (d.id == id) return &d;
    return nullptr;
}

// ---------------------------------------------------------------------------
// Builders

const std::vector<std::string>& builtin_names() {
    static const std::vector<std::string> names{"bare-apparatus",    "apparatus-observer", "version1",
                                                "version1-observer", "version2",           "version2-observer",
                                                "version2-natural"};
    return names;
}

ScenarioSpec build(std::string_view name, const Overrides& overrides) {
    const auto& names = builtin_names();
    if (std::find(names.begin(), names.end(), name) == names.end())
        throw UnknownScenario("unknown scenario '" + std::string(name) + "'");

    Params p;
    p.t_ob = default_observation_time(name);
    bool horizon_set = false;
    for (const auto& [key, value] : overrides) {
        auto positive = [&] {
            if (!(value > 0.0) || !std::isfinite(value))
                throw InvalidOverride("override '" + key + "' must be positive, got " + std::to_string(value));
            return value;
        };
        if (key == "half_life") p.half_life = positive();
        else if (key == "T") p.T = positive();
        else if (key == "tau_phys") p.tau_phys = positive();
        else if (key == "horizon") { p.horizon = positive(); horizon_set = true; }
        else if (key == "T_N") {
            if (name != "version2-natural") throw InvalidOverride("T_N applies only to version2-natural");
            p.T_N = positive();
        } else if (key == "t_ob") {
            if (!has_observer(name)) throw InvalidOverride("t_ob applies only to observer scenarios");
            p.t_ob = positive();
        } else if (key == "bin_count") {
            if (value < 1.0 || value != std::floor(value) || value > 1e6)
                throw InvalidOverride("bin_count must be a positive integer");
            p.bin_count = static_cast<int>(value);
        } else if (key == "seed") {
            if (value < 0.0 || value != std::floor(value) || value >= 0x1.0p64)
                throw InvalidOverride("seed must be a nonnegative integer");
            p.seed = static_cast<std::uint64_t>(value);
        } else {
            throw InvalidOverride("unknown override '" + key + "'");
        }
    }

    ScenarioSpec s;
    if (name == "bare-apparatus") s = bare_apparatus(p);
    else if (name == "apparatus-observer") s = apparatus_observer(p);
    else if (name == "version1") s = version1(p, false);
    else if (name == "version1-observer") s = version1(p, true);
    else if (name == "version2") s = version2(p, false);
    else if (name == "version2-observer") s = version2(p, true);
    else s = version2_natural(p);

    const double need = required_horizon(s);
    if (s.horizon <= need) {
        if (horizon_set)
            throw InvalidOverride("horizon " + std::to_string(s.horizon) + " ends before the plateaus at " +
                                  std::to_string(need));
        s.horizon = std::ceil(need + 0.5);
    }
    validate(s);
    return s;
}

void validate(const ScenarioSpec& s) {
    if (!(s.half_life > 0.0)) throw SemanticError("half_life must be positive");
    if (!(s.tau_phys > 0.0)) throw SemanticError("tau_phys must be positive");
    if (!(s.horizon > 0.0)) throw SemanticError("horizon must be positive");

    std::set<std::string> ids;
    for (const auto& d : s.devices) {
        if (!ids.insert(d.id).second) throw SemanticError("duplicate device '" + d.id + "'");
        if (!(d.duration > 0.0)) throw SemanticError("device '" + d.id + "' duration must be positive");
        if (d.bin_count < 1) throw SemanticError("device '" + d.id + "' bin count must be at least 1");
    }
    if (s.devices.size() > 32) throw SemanticError("at most 32 devices");
    ids.clear();
    for (const auto& a : s.agents) {
        if (!ids.insert(a.id).second) throw SemanticError("duplicate agent '" + a.id + "'");
        if (a.kind != "cat" && a.kind != "observer")
            throw SemanticError("agent '" + a.id + "' kind must be cat or observer");
        if (a.initial.agent != a.id) throw SemanticError("agent '" + a.id + "' initial mind names another agent");
        if (a.observation_time && !(*a.observation_time > 0.0))
            throw SemanticError("agent '" + a.id + "' observation time must be positive");
    }

    ids.clear();
    for (const auto& c : s.channels) {
        const std::string where = "channel '" + c.name + "'";
        if (c.name.empty() || !ids.insert(c.name).second) throw SemanticError("duplicate or empty channel name");
        check_refs(s, c.source, where);
        check_refs(s, c.effect, where);
        if (const auto* d = std::get_if<Decay>(&c.kind)) {
            if (d->half_life != s.half_life) throw SemanticError(where + ": half-life differs from the scenario's");
            if (leaves_unchanged(c.source, c.effect)) throw SemanticError(where + ": target equals source");
        } else if (const auto* a = std::get_if<Advection>(&c.kind)) {
            const DeviceSpec* dev = s.device(a->device);
            if (!dev) throw SemanticError(where + ": undeclared device '" + a->device + "'");
            if (a->duration != dev->duration || a->bin_count != dev->bin_count)
                throw SemanticError(where + ": timing differs from device '" + a->device + "'");
        } else if (const auto* r = std::get_if<PhysRamp>(&c.kind)) {
            const AgentSpec* ag = s.agent(r->agent);
            if (!ag) throw SemanticError(where + ": undeclared agent '" + r->agent + "'");
            if (!ag->observation_time) throw SemanticError(where + ": agent '" + r->agent + "' has no observation time");
            if (r->start != *ag->observation_time || r->duration != s.tau_phys)
                throw SemanticError(where + ": ramp timing differs from the agent's observation");
            if (leaves_unchanged(c.source, c.effect)) throw SemanticError(where + ": target equals source");
        }
    }

    for (const auto& [a, b] : s.compatibility.forbidden) {
        check_refs(s, a, "incompatible pair");
        check_refs(s, b, "incompatible pair");
    }
    if (!s.compatibility.allows(s.initial_label()))
        throw SemanticError("initial label " + s.initial_label().to_string() + " is declared incompatible");
    for (const auto& c : s.conditions) {
        if (c.forbidden_choice.empty()) throw SemanticError("forbid_choice pattern must not be '*'");
        check_refs(s, c.forbidden_choice, "forbid_choice");
    }
    ids.clear();
    for (const auto& t : s.terminals) {
        if (!ids.insert(t.name).second) throw SemanticError("duplicate terminal '" + t.name + "'");
        if (t.components.empty()) throw SemanticError("terminal '" + t.name + "' lists no components");
        for (const auto& p : t.components) check_refs(s, p, "terminal '" + t.name + "'");
    }

    const double need = required_horizon(s);
    if (s.horizon <= need)
        throw SemanticError("horizon must exceed half_life + device durations and every ramp end (" +
                            std::to_string(need) + ")");
}

Network make_network(const ScenarioSpec& spec, const RuleConfig& rules) {
    return Network(spec.initial_label(), spec.channels, spec.compatibility, rules, spec.classical_devices());
}

// ---------------------------------------------------------------------------
// Classification

std::string classify_terminal(const Superposition& final, const ScenarioSpec& spec) {
    std::vector<const ComponentLabel*> surviving;
    for (const auto& c : final.components)
        if (c.modulus > kModulusFloor) surviving.push_back(&c.label);
    if (surviving.empty()) throw Unclassifiable("no surviving components");

    for (const auto& t : spec.terminals) {
        const bool covers = std::all_of(t.components.begin(), t.components.end(), [&](const LabelPattern& p) {
            return std::any_of(surviving.begin(), surviving.end(), [&](const auto* l) { return p.matches(*l); });
        });
        const bool closed = std::all_of(surviving.begin(), surviving.end(), [&](const auto* l) {
            return std::any_of(t.components.begin(), t.components.end(),
                               [&](const LabelPattern& p) { return p.matches(*l); });
        });
        if (covers && closed) return t.name;
    }
    std::string text;
    for (const auto* l : surviving) text += (text.empty() ? "" : " + ") + l->to_string();
    throw Unclassifiable("no terminal of '" + spec.name + "' matches " + text);
}

TrajectoryOutcome classify(const Superposition& final, const ScenarioSpec& spec) {
    TrajectoryOutcome out;
    out.terminal = classify_terminal(final, spec);
    out.final_state = final;
    return out;
}

Superposition prune_phantom(const Superposition& sup, const ScenarioSpec& spec, const ObservationTrigger& trigger) {
    const Network net = make_network(spec);
    const auto durations = spec.device_durations();
    for (const auto& c : sup.components)
        if (!net.find(c.label)) throw NotResidual("component outside the scenario network: " + c.label.to_string());
    auto [probe, ledger] = step(sup, net, default_dt(spec.half_life, durations));
    (void)probe;
    if (!is_residual(sup, ledger)) throw NotResidual("superposition still carries current or has one component");

    Superposition out;
    out.time = std::max(sup.time, trigger.time);
    double kept = 0.0;
    for (const auto& c : sup.components) {
        const MindState* m = c.label.mind(trigger.agent);
        if (c.modulus > kModulusFloor && m && m->kind == MindState::Kind::Conscious) {
            out.components.push_back(c);
            kept += c.modulus;
        }
    }
    if (out.components.empty())
        throw NotResidual("no component carries a conscious state of '" + trigger.agent + "'");
    for (auto& c : out.components) c.modulus /= kept;
    return out;
}

}  // namespace reduxion
