#include "reduxion/io.hpp"

#include "reduxion/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

namespace reduxion {

namespace {

struct Field {
    std::string key;
    std::string value;
    std::size_t line = 0;
    std::size_t key_col = 0;
    std::size_t value_col = 0;
};

std::string_view trim(std::string_view s) {
    const auto a = s.find_first_not_of(" \t");
    if (a == std::string_view::npos) return {};
    const auto b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
}

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt12(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

double parse_number(const Field& f, std::string_view text, std::size_t col) {
    double v = 0.0;
    const char* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end || !std::isfinite(v))
        throw ParseError(f.line, col, "expected a number, got '" + std::string(text) + "'");
    return v;
}

std::uint64_t parse_u64(const Field& f) {
    std::uint64_t v = 0;
    const char* end = f.value.data() + f.value.size();
    auto [ptr, ec] = std::from_chars(f.value.data(), end, v);
    if (ec != std::errc() || ptr != end || f.value.empty())
        throw ParseError(f.line, f.value_col, "expected an unsigned integer, got '" + f.value + "'");
    return v;
}

struct Word {
    std::string_view text;
    std::size_t col;
};

std::vector<Word> words(std::string_view s, std::size_t col) {
    std::vector<Word> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
        const std::size_t start = i;
        while (i < s.size() && s[i] != ' ' && s[i] != '\t') ++i;
        if (i > start) out.push_back({s.substr(start, i - start), col + start});
    }
    return out;
}

/// Splits on `sep`, returning trimmed parts with their columns.
std::vector<Word> split(std::string_view s, char sep, std::size_t col) {
    std::vector<Word> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == sep) {
            std::string_view part = s.substr(start, i - start);
            const auto lead = part.find_first_not_of(" \t");
            out.push_back({trim(part), col + start + (lead == std::string_view::npos ? 0 : lead)});
            start = i + 1;
        }
    }
    return out;
}

LabelPattern pattern_at(const Field& f, const Word& w) {
    try {
        return LabelPattern::parse(w.text);
    } catch (const ParseError& e) {
        throw ParseError(f.line, w.col + e.column() - 1, e.detail());
    }
}

LabelEdit edit_at(const Field& f, const Word& w) {
    try {
        return LabelEdit::parse(w.text);
    } catch (const ParseError& e) {
        throw ParseError(f.line, w.col + e.column() - 1, e.detail());
    }
}

MindState parse_mind(const Field& f, const std::string& agent, const Word& w) {
    if (w.text.size() < 2) throw ParseError(f.line, w.col, "mind state needs a symbol and a marker");
    auto kind = kind_from_marker(w.text.back());
    if (!kind) throw ParseError(f.line, w.col + w.text.size() - 1, "mind marker must be one of ! ? - ~");
    std::string_view sym = w.text.substr(0, w.text.size() - 1);
    for (char c : sym)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_')
            throw ParseError(f.line, w.col, "bad mind symbol '" + std::string(sym) + "'");
    return MindState{agent, *kind, std::string(sym)};
}

const std::set<std::string> kSections{"scenario", "agents", "devices", "channels", "conditions", "terminals"};
const std::set<std::string> kPlainKeys{"name", "half_life", "tau_phys", "horizon", "detector", "indicator", "seed"};
const std::set<std::string> kOverrideKeys{"half_life", "T", "T_N", "t_ob", "tau_phys", "bin_count", "horizon", "seed"};

std::string unquote(std::string_view v) {
    if (v.size() >= 2 && v.front() == '"' && v.back() == '"') return std::string(v.substr(1, v.size() - 2));
    return std::string(v);
}

ScenarioSpec from_builtin(const std::vector<Field>& scenario, const std::map<std::string, std::vector<Field>>& rest) {
    for (const auto& [section, fields] : rest)
        if (!fields.empty())
            throw SemanticError("a builtin scenario takes only [scenario] overrides, found [" + section + "]");
    std::string builtin;
    std::optional<std::string> name;
    Overrides overrides;
    for (const auto& f : scenario) {
        if (f.key == "builtin") builtin = f.value;
        else if (f.key == "name") name = f.value;
        else if (kOverrideKeys.count(f.key)) {
            if (f.key == "seed") overrides[f.key] = static_cast<double>(parse_u64(f));
            else overrides[f.key] = parse_number(f, f.value, f.value_col);
        } else {
            throw ParseError(f.line, f.key_col, "unknown key '" + f.key + "' for a builtin scenario");
        }
    }
    try {
        ScenarioSpec spec = build(builtin, overrides);
        if (name) spec.name = *name;
        return spec;
    } catch (const UnknownScenario& e) {
        throw SemanticError(e.what());
    } catch (const InvalidOverride& e) {
        throw SemanticError(e.what());
    }
}

}  // namespace

ScenarioSpec parse_scenario(std::string_view text) {
    std::map<std::string, std::vector<Field>> sections;
    for (const auto& s : kSections) sections[s];
    std::string current;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
        bool quoted = false;
        for (std::size_t i = 0; i < raw.size(); ++i) {
            if (raw[i] == '"') quoted = !quoted;
            else if (raw[i] == '#' && !quoted) {
                raw = raw.substr(0, i);
                break;
            }
        }
        const std::string_view line = trim(raw);
        if (line.empty()) continue;
        const std::size_t lead = static_cast<std::size_t>(line.data() - raw.data());

        if (line.front() == '[') {
            if (line.back() != ']') throw ParseError(line_no, lead + line.size(), "section header needs ']'");
            std::string name(trim(line.substr(1, line.size() - 2)));
            if (!kSections.count(name)) throw ParseError(line_no, lead + 2, "unknown section [" + name + "]");
            current = name;
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ParseError(line_no, lead + 1, "expected 'key = value'");
        if (current.empty()) throw ParseError(line_no, lead + 1, "key outside any section");
        Field f;
        f.key = std::string(trim(line.substr(0, eq)));
        std::string_view value = line.substr(eq + 1);
        const auto vlead = value.find_first_not_of(" \t");
        f.value_col = lead + eq + 2 + (vlead == std::string_view::npos ? 0 : vlead);
        f.value = unquote(trim(value));
        if (f.value.size() + 2 == trim(value).size()) ++f.value_col;
        f.line = line_no;
        f.key_col = lead + 1;
        if (f.key.empty()) throw ParseError(line_no, lead + 1, "empty key");
        if (f.value.empty()) throw ParseError(line_no, f.value_col, "empty value for '" + f.key + "'");
        auto& list = sections[current];
        if (current != "conditions")
            for (const auto& prior : list)
                if (prior.key == f.key)
                    throw ParseError(line_no, f.key_col, "duplicate key '" + f.key + "' in [" + current + "]");
        list.push_back(std::move(f));
    }

    const auto& scenario = sections["scenario"];
    const bool is_builtin = std::any_of(scenario.begin(), scenario.end(), [](const Field& f) { return f.key == "builtin"; });
    if (is_builtin) {
        std::map<std::string, std::vector<Field>> rest = sections;
        rest.erase("scenario");
        return from_builtin(scenario, rest);
    }

    ScenarioSpec spec;
    bool named = false;
    for (const auto& f : scenario) {
        if (!kPlainKeys.count(f.key)) throw ParseError(f.line, f.key_col, "unknown key '" + f.key + "' in [scenario]");
        if (f.key == "name") {
            spec.name = f.value;
            named = true;
        } else if (f.key == "half_life") spec.half_life = parse_number(f, f.value, f.value_col);
        else if (f.key == "tau_phys") spec.tau_phys = parse_number(f, f.value, f.value_col);
        else if (f.key == "horizon") spec.horizon = parse_number(f, f.value, f.value_col);
        else if (f.key == "seed") spec.seed = parse_u64(f);
        else if (f.key == "detector") {
            if (f.value != "D0" && f.value != "D1") throw ParseError(f.line, f.value_col, "detector must be D0 or D1");
            spec.detector = f.value == "D0" ? Detector::D0 : Detector::D1;
        } else if (f.key == "indicator") {
            if (f.value != "I0" && f.value != "I1") throw ParseError(f.line, f.value_col, "indicator must be I0 or I1");
            spec.indicator = f.value == "I0" ? Indicator::I0 : Indicator::I1;
        }
    }
    if (!named) throw SemanticError("[scenario] needs a name or a builtin");

    for (const auto& f : sections["agents"]) {
        auto w = words(f.value, f.value_col);
        if (w.size() < 2 || w.size() > 3)
            throw ParseError(f.line, f.value_col, "agent needs 'kind mind [observation_time]'");
        AgentSpec a;
        a.id = f.key;
        a.kind = std::string(w[0].text);
        a.initial = parse_mind(f, a.id, w[1]);
        if (w.size() == 3) a.observation_time = parse_number(f, w[2].text, w[2].col);
        spec.agents.push_back(std::move(a));
    }

    for (const auto& f : sections["devices"]) {
        auto w = words(f.value, f.value_col);
        if (w.size() < 3 || w.size() > 4)
            throw ParseError(f.line, f.value_col, "device needs 'duration bins idle|run [classical]'");
        DeviceSpec d;
        d.id = f.key;
        d.duration = parse_number(f, w[0].text, w[0].col);
        const double bins = parse_number(f, w[1].text, w[1].col);
        if (bins < 1.0 || bins != std::floor(bins) || bins > 1e6)
            throw ParseError(f.line, w[1].col, "bin count must be a positive integer");
        d.bin_count = static_cast<int>(bins);
        if (w[2].text == "run") d.starts_running = true;
        else if (w[2].text != "idle") throw ParseError(f.line, w[2].col, "initial phase must be idle or run");
        if (w.size() == 4) {
            if (w[3].text != "classical") throw ParseError(f.line, w[3].col, "expected 'classical'");
            d.classical = true;
        }
        spec.devices.push_back(std::move(d));
    }

    for (const auto& f : sections["channels"]) {
        auto parts = split(f.value, '|', f.value_col);
        if (parts.size() != 3) throw ParseError(f.line, f.value_col, "channel needs 'kind | source | edit'");
        auto head = words(parts[0].text, parts[0].col);
        if (head.empty()) throw ParseError(f.line, parts[0].col, "missing channel kind");
        Channel c;
        c.name = f.key;
        c.source = pattern_at(f, parts[1]);
        c.effect = edit_at(f, parts[2]);
        if (head[0].text == "decay") {
            if (head.size() != 1) throw ParseError(f.line, head[1].col, "decay takes no argument");
            c.kind = Decay{spec.half_life};
        } else if (head[0].text == "advect") {
            if (head.size() != 2) throw ParseError(f.line, head[0].col, "advect needs a device id");
            const DeviceSpec* d = spec.device(head[1].text);
            if (!d) throw SemanticError("channel '" + c.name + "': undeclared device '" + std::string(head[1].text) + "'");
            c.kind = Advection{d->id, d->duration, d->bin_count};
            c.classically_continuous = true;
        } else if (head[0].text == "ramp") {
            if (head.size() != 2) throw ParseError(f.line, head[0].col, "ramp needs an agent id");
            const AgentSpec* a = spec.agent(head[1].text);
            if (!a) throw SemanticError("channel '" + c.name + "': undeclared agent '" + std::string(head[1].text) + "'");
            if (!a->observation_time)
                throw SemanticError("channel '" + c.name + "': agent '" + a->id + "' has no observation time");
            c.kind = PhysRamp{a->id, *a->observation_time, spec.tau_phys};
        } else {
            throw ParseError(f.line, head[0].col, "channel kind must be decay, advect or ramp");
        }
        spec.channels.push_back(std::move(c));
    }

    for (const auto& f : sections["conditions"]) {
        if (f.key == "incompatible") {
            auto parts = split(f.value, '+', f.value_col);
            if (parts.size() != 2) throw ParseError(f.line, f.value_col, "incompatible needs 'pattern + pattern'");
            spec.compatibility.forbidden.emplace_back(pattern_at(f, parts[0]), pattern_at(f, parts[1]));
        } else if (f.key == "forbid_choice") {
            spec.conditions.push_back({pattern_at(f, Word{f.value, f.value_col})});
        } else {
            throw ParseError(f.line, f.key_col, "unknown key '" + f.key + "' in [conditions]");
        }
    }

    for (const auto& f : sections["terminals"]) {
        TerminalSpec t{f.key, {}};
        for (const auto& part : split(f.value, '+', f.value_col)) {
            if (part.text.empty()) throw ParseError(f.line, part.col, "empty terminal pattern");
            t.components.push_back(pattern_at(f, part));
        }
        spec.terminals.push_back(std::move(t));
    }

    validate(spec);
    return spec;
}

std::string serialize_scenario(const ScenarioSpec& spec) {
    std::ostringstream out;
    out << "[scenario]\n";
    out << "name = " << spec.name << "\n";
    out << "half_life = " << fmt17(spec.half_life) << "\n";
    out << "tau_phys = " << fmt17(spec.tau_phys) << "\n";
    out << "horizon = " << fmt17(spec.horizon) << "\n";
    out << "detector = " << (spec.detector == Detector::D0 ? "D0" : "D1") << "\n";
    if (spec.indicator) out << "indicator = " << (*spec.indicator == Indicator::I0 ? "I0" : "I1") << "\n";
    if (spec.seed) out << "seed = " << *spec.seed << "\n";

    out << "\n[agents]\n";
    for (const auto& a : spec.agents) {
        out << a.id << " = " << a.kind << " " << a.initial.percept << kind_marker(a.initial.kind);
        if (a.observation_time) out << " " << fmt17(*a.observation_time);
        out << "\n";
    }
    out << "\n[devices]\n";
    for (const auto& d : spec.devices) {
        out << d.id << " = " << fmt17(d.duration) << " " << d.bin_count << " " << (d.starts_running ? "run" : "idle");
        if (d.classical) out << " classical";
        out << "\n";
    }
    out << "\n[channels]\n";
    for (const auto& c : spec.channels) {
        out << c.name << " = ";
        if (std::holds_alternative<Decay>(c.kind)) out << "decay";
        else if (const auto* a = std::get_if<Advection>(&c.kind)) out << "advect " << a->device;
        else out << "ramp " << std::get<PhysRamp>(c.kind).agent;
        out << " | " << c.source.to_string() << " | " << c.effect.to_string() << "\n";
    }
    out << "\n[conditions]\n";
    for (const auto& [a, b] : spec.compatibility.forbidden)
        out << "incompatible = " << a.to_string() << " + " << b.to_string() << "\n";
    for (const auto& c : spec.conditions) out << "forbid_choice = " << c.forbidden_choice.to_string() << "\n";
    out << "\n[terminals]\n";
    for (const auto& t : spec.terminals) {
        out << t.name << " =";
        for (std::size_t i = 0; i < t.components.size(); ++i)
            out << (i ? " + " : " ") << t.components[i].to_string();
        out << "\n";
    }
    return out.str();
}

ScenarioSpec load_scenario(const std::string& name_or_path) {
    const auto& names = builtin_names();
    if (std::find(names.begin(), names.end(), name_or_path) != names.end()) return build(name_or_path);
    std::ifstream in(name_or_path, std::ios::binary);
    if (!in) throw UnknownScenario("no builtin scenario or readable file named '" + name_or_path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str());
}

namespace {

nlohmann::json frequency_json(const Frequency& f) {
    return {{"value", f.value}, {"lower", f.lower}, {"upper", f.upper}};
}

}  // namespace

std::string results_json(const RunStatistics& stats) {
    nlohmann::json j;
    j["scenario"] = stats.scenario;
    j["trials"] = stats.trials;
    j["seed"] = stats.base_seed;
    j["dt"] = stats.dt;
    j["counts"] = stats.counts;
    j["rejected"] = stats.rejected;
    j["unclassified"] = stats.unclassified;
    j["frequencies"] = nlohmann::json::object();
    for (const auto& [k, f] : stats.frequencies) j["frequencies"][k] = frequency_json(f);
    j["conditional_frequencies"] = nlohmann::json::object();
    for (const auto& [k, f] : stats.conditional_frequencies) j["conditional_frequencies"][k] = frequency_json(f);
    j["rejection"] = stats.rejection ? frequency_json(*stats.rejection) : nlohmann::json(nullptr);
    j["condition_probability"] = stats.condition_probability ? nlohmann::json(*stats.condition_probability)
                                                             : nlohmann::json(nullptr);
    j["current_integrals"] = stats.current_integrals;
    return j.dump(2) + "\n";
}

std::string results_csv(const RunStatistics& stats) {
    std::ostringstream out;
    out << "outcome,count,frequency,lower,upper\n";
    for (const auto& [name, count] : stats.counts) {
        const Frequency f = stats.frequencies.count(name) ? stats.frequencies.at(name) : Frequency{};
        out << name << "," << count << "," << fmt12(f.value) << "," << fmt12(f.lower) << "," << fmt12(f.upper) << "\n";
    }
    const Frequency r = wilson_interval(stats.rejected, stats.trials);
    out << "rejected," << stats.rejected << "," << fmt12(r.value) << "," << fmt12(r.lower) << "," << fmt12(r.upper)
        << "\n";
    return out.str();
}

std::string trajectory_json(const TrajectoryOutcome& outcome, const std::string& scenario, std::uint64_t seed,
                            double dt) {
    nlohmann::json j;
    j["scenario"] = scenario;
    j["seed"] = seed;
    j["dt"] = dt;
    j["rejected"] = outcome.rejected;
    j["terminal"] = outcome.rejected ? nlohmann::json(nullptr) : nlohmann::json(outcome.terminal);
    j["events"] = nlohmann::json::array();
    for (const auto& e : outcome.events)
        j["events"].push_back({{"time", e.time}, {"chosen", e.chosen.to_string()}, {"hazard", e.hazard_at_choice}});
    j["final_state"] = nlohmann::json::array();
    for (const auto& c : outcome.final_state.components)
        if (c.modulus > kModulusFloor)
            j["final_state"].push_back({{"label", c.label.to_string()}, {"modulus", c.modulus}, {"born_at", c.born_at}});
    return j.dump(2) + "\n";
}

void write_text(const std::string& text, const std::string& path) {
    if (path.empty() || path == "-") {
        std::cout << text << std::flush;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path + "' for writing: " + std::strerror(errno));
    out << text;
    if (!out.flush()) throw Error("failed writing '" + path + "'");
}

void emit_results(const RunStatistics& stats, ResultFormat format, const std::string& path) {
    write_text(format == ResultFormat::Json ? results_json(stats) : results_csv(stats), path);
}

void write_ledger_csv(const Simulator& sim, std::ostream& out) {
    const Network& net = sim.network();
    out << "time,source_label,target_label,rate,transferred\n";
    std::vector<std::string> text(net.size());
    auto label = [&](NodeId id) -> const std::string& {
        if (text[id].empty()) text[id] = net.label(id).to_string();
        return text[id];
    };
    std::vector<Transfer> rows;
    sim.deterministic([&](const StepRecord& record) {
        rows = record.transfers;
        std::stable_sort(rows.begin(), rows.end(), [](const Transfer& a, const Transfer& b) { return a.channel < b.channel; });
        const std::string time = fmt12(record.step_time);
        for (const auto& t : rows)
            out << time << ',' << label(t.source) << ',' << label(t.target) << ',' << fmt12(t.amount / record.step_size)
                << ',' << fmt12(t.amount) << '\n';
    });
    if (!out) throw Error("failed writing ledger");
}

}  // namespace reduxion
