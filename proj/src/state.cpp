#include "reduxion/state.hpp"

#include "reduxion/error.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <functional>

namespace reduxion {

namespace {

template <typename T, typename Key>
auto find_by(std::vector<T>& items, std::string_view key, Key T::*member) -> T* {
    auto it = std::find_if(items.begin(), items.end(), [&](const T& v) { return v.*member == key; });
    return it == items.end() ? nullptr : &*it;
}

void hash_combine(std::size_t& seed, std::size_t value) noexcept {
    seed ^= value + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2);
}

std::string_view detector_text(Detector d) { return d == Detector::D0 ? "D0" : "D1"; }
std::string_view indicator_text(Indicator i) { return i == Indicator::I0 ? "I0" : "I1"; }

std::string device_text(const DeviceState& d, bool group) {
    std::string out = d.id + ":";
    switch (d.phase) {
        case DeviceState::Phase::Idle: out += "idle"; break;
        case DeviceState::Phase::Done: out += "done"; break;
        case DeviceState::Phase::Running: out += group ? "z" : std::to_string(d.bin); break;
    }
    return out;
}

std::string label_text(const ComponentLabel& label, bool group) {
    std::string out{detector_text(label.detector)};
    for (const auto& d : label.devices) out += "." + device_text(d, group);
    if (label.indicator) out += "." + std::string(indicator_text(*label.indicator));
    for (const auto& m : label.minds) out += "." + m.agent + "=" + m.percept + kind_marker(m.kind);
    return out;
}

struct Token {
    std::string_view text;
    std::size_t offset;
};

std::vector<Token> split_tokens(std::string_view text) {
    std::vector<Token> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= text.size(); ++i) {
        if (i == text.size() || text[i] == '.') {
            out.push_back({text.substr(start, i - start), start});
            start = i + 1;
        }
    }
    return out;
}

[[noreturn]] void fail(const Token& tok, const std::string& what) {
    throw ParseError(0, tok.offset + 1, what + " '" + std::string(tok.text) + "'");
}

bool is_ident(std::string_view s) {
    if (s.empty()) return false;
    return std::all_of(s.begin(), s.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
    });
}

std::optional<int> parse_int(std::string_view s) {
    int value = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size() || value < 0) return std::nullopt;
    return value;
}

// Splits "Sym!" into ("Sym", Conscious).
std::pair<std::string_view, std::optional<MindState::Kind>> split_marker(std::string_view s) {
    if (!s.empty()) {
        if (auto k = kind_from_marker(s.back())) return {s.substr(0, s.size() - 1), k};
    }
    return {s, std::nullopt};
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

}  // namespace

DeviceState DeviceState::idle(std::string id, int bin_count) {
    return {std::move(id), Phase::Idle, 0, bin_count};
}

DeviceState DeviceState::running(std::string id, int bin, int bin_count) {
    return {std::move(id), Phase::Running, bin, bin_count};
}

DeviceState DeviceState::done(std::string id, int bin_count) {
    return {std::move(id), Phase::Done, 0, bin_count};
}

char kind_marker(MindState::Kind kind) noexcept {
    switch (kind) {
        case MindState::Kind::Conscious: return '!';
        case MindState::Kind::Ready: return '?';
        case MindState::Kind::Unconscious: return '-';
        case MindState::Kind::UnknownX: return '~';
    }
    return '~';
}

std::optional<MindState::Kind> kind_from_marker(char c) noexcept {
    switch (c) {
        case '!': return MindState::Kind::Conscious;
        case '?': return MindState::Kind::Ready;
        case '-': return MindState::Kind::Unconscious;
        case '~': return MindState::Kind::UnknownX;
        default: return std::nullopt;
    }
}

const DeviceState* ComponentLabel::device(std::string_view id) const noexcept {
    for (const auto& d : devices)
        if (d.id == id) return &d;
    return nullptr;
}

DeviceState* ComponentLabel::device(std::string_view id) noexcept {
    return find_by(devices, id, &DeviceState::id);
}

const MindState* ComponentLabel::mind(std::string_view agent) const noexcept {
    for (const auto& m : minds)
        if (m.agent == agent) return &m;
    return nullptr;
}

MindState* ComponentLabel::mind(std::string_view agent) noexcept {
    return find_by(minds, agent, &MindState::agent);
}

bool ComponentLabel::has_kind(MindState::Kind kind) const noexcept {
    return std::any_of(minds.begin(), minds.end(), [kind](const MindState& m) { return m.kind == kind; });
}

std::string ComponentLabel::to_string() const { return label_text(*this, false); }

std::string ComponentLabel::group_signature() const { return label_text(*this, true); }

std::size_t ComponentLabelHash::operator()(const ComponentLabel& label) const noexcept {
    std::size_t seed = static_cast<std::size_t>(label.detector);
    std::hash<std::string> hs;
    for (const auto& d : label.devices) {
        hash_combine(seed, hs(d.id));
        hash_combine(seed, static_cast<std::size_t>(d.phase));
        hash_combine(seed, static_cast<std::size_t>(d.bin));
    }
    hash_combine(seed, label.indicator ? 1 + static_cast<std::size_t>(*label.indicator) : 0);
    for (const auto& m : label.minds) {
        hash_combine(seed, hs(m.agent));
        hash_combine(seed, static_cast<std::size_t>(m.kind));
        hash_combine(seed, hs(m.percept));
    }
    return seed;
}

// ---------------------------------------------------------------------------
// Patterns

bool LabelPattern::matches(const ComponentLabel& label) const {
    if (detector && *detector != label.detector) return false;
    if (indicator && label.indicator != indicator) return false;
    for (const auto& dm : devices) {
        const DeviceState* d = label.device(dm.id);
        if (!d) return false;
        switch (dm.kind) {
            case DeviceMatch::Kind::Idle:
                if (d->phase != DeviceState::Phase::Idle) return false;
                break;
            case DeviceMatch::Kind::Done:
                if (d->phase != DeviceState::Phase::Done) return false;
                break;
            case DeviceMatch::Kind::Running:
                if (d->phase != DeviceState::Phase::Running) return false;
                break;
            case DeviceMatch::Kind::Bin:
                if (d->phase != DeviceState::Phase::Running || d->bin != dm.bin) return false;
                break;
        }
    }
    for (const auto& mm : minds) {
        const MindState* m = label.mind(mm.agent);
        if (!m) return false;
        if (mm.percept && *mm.percept != m->percept) return false;
        if (mm.kind && *mm.kind != m->kind) return false;
    }
    return true;
}

bool LabelPattern::empty() const noexcept {
    return !detector && devices.empty() && !indicator && minds.empty();
}

std::string LabelPattern::to_string() const {
    std::vector<std::string> parts;
    if (detector) parts.emplace_back(detector_text(*detector));
    for (const auto& d : devices) {
        switch (d.kind) {
            case DeviceMatch::Kind::Idle: parts.push_back(d.id + ":idle"); break;
            case DeviceMatch::Kind::Done: parts.push_back(d.id + ":done"); break;
            case DeviceMatch::Kind::Running: parts.push_back(d.id + ":run"); break;
            case DeviceMatch::Kind::Bin: parts.push_back(d.id + ":" + std::to_string(d.bin)); break;
        }
    }
    if (indicator) parts.emplace_back(indicator_text(*indicator));
    for (const auto& m : minds) {
        std::string s = m.agent + "=" + m.percept.value_or("*");
        if (m.kind) s += kind_marker(*m.kind);
        parts.push_back(std::move(s));
    }
    if (parts.empty()) return "*";
    std::string out = parts.front();
    for (std::size_t i = 1; i < parts.size(); ++i) out += "." + parts[i];
    return out;
}

LabelPattern LabelPattern::parse(std::string_view text) {
    LabelPattern p;
    std::string_view body = trim(text);
    if (body == "*") return p;
    const std::size_t lead = static_cast<std::size_t>(body.data() - text.data());
    for (Token tok : split_tokens(body)) {
        tok.offset += lead;
        std::string_view t = tok.text;
        if (t == "D0" || t == "D1") {
            if (p.detector) fail(tok, "duplicate detector");
            p.detector = t == "D0" ? Detector::D0 : Detector::D1;
        } else if (t == "I0" || t == "I1") {
            if (p.indicator) fail(tok, "duplicate indicator");
            p.indicator = t == "I0" ? Indicator::I0 : Indicator::I1;
        } else if (auto colon = t.find(':'); colon != std::string_view::npos) {
            DeviceMatch dm;
            dm.id = std::string(t.substr(0, colon));
            if (!is_ident(dm.id)) fail(tok, "bad device id in");
            std::string_view v = t.substr(colon + 1);
            if (v == "idle") dm.kind = DeviceMatch::Kind::Idle;
            else if (v == "done") dm.kind = DeviceMatch::Kind::Done;
            else if (v == "run") dm.kind = DeviceMatch::Kind::Running;
            else if (auto bin = parse_int(v)) {
                dm.kind = DeviceMatch::Kind::Bin;
                dm.bin = *bin;
            } else {
                fail(tok, "bad device position in");
            }
            p.devices.push_back(std::move(dm));
        } else if (auto eq = t.find('='); eq != std::string_view::npos) {
            MindMatch mm;
            mm.agent = std::string(t.substr(0, eq));
            if (!is_ident(mm.agent)) fail(tok, "bad agent id in");
            auto [sym, kind] = split_marker(t.substr(eq + 1));
            mm.kind = kind;
            if (sym != "*") {
                if (!is_ident(sym)) fail(tok, "bad mind symbol in");
                mm.percept = std::string(sym);
            }
            p.minds.push_back(std::move(mm));
        } else {
            fail(tok, "unrecognized pattern token");
        }
    }
    return p;
}

// ---------------------------------------------------------------------------
// Edits

ComponentLabel LabelEdit::apply(const ComponentLabel& label, std::vector<std::string>* touched) const {
    ComponentLabel out = label;
    if (detector) out.detector = *detector;
    if (indicator) out.indicator = indicator;
    for (const auto& ds : devices) {
        if (DeviceState* d = out.device(ds.id)) {
            d->phase = ds.phase;
            d->bin = ds.phase == DeviceState::Phase::Running ? ds.bin : 0;
        }
    }
    for (const auto& me : minds) {
        MindState* m = out.mind(me.agent);
        if (!m) continue;
        if (me.from && *me.from != m->percept) continue;
        const MindState before = *m;
        m->percept = me.to;
        if (me.to_kind) m->kind = *me.to_kind;
        if (touched && *m != before) touched->push_back(me.agent);
    }
    return out;
}

bool LabelEdit::empty() const noexcept {
    return !detector && devices.empty() && !indicator && minds.empty();
}

std::string LabelEdit::to_string() const {
    std::vector<std::string> parts;
    if (detector) parts.emplace_back(detector_text(*detector));
    for (const auto& d : devices) {
        switch (d.phase) {
            case DeviceState::Phase::Idle: parts.push_back(d.id + ":idle"); break;
            case DeviceState::Phase::Done: parts.push_back(d.id + ":done"); break;
            case DeviceState::Phase::Running: parts.push_back(d.id + ":" + std::to_string(d.bin)); break;
        }
    }
    if (indicator) parts.emplace_back(indicator_text(*indicator));
    for (const auto& m : minds) {
        std::string s = m.agent + "=" + m.from.value_or("*") + ">" + m.to;
        if (m.to_kind) s += kind_marker(*m.to_kind);
        parts.push_back(std::move(s));
    }
    if (parts.empty()) return "*";
    std::string out = parts.front();
    for (std::size_t i = 1; i < parts.size(); ++i) out += "." + parts[i];
    return out;
}

LabelEdit LabelEdit::parse(std::string_view text) {
    LabelEdit e;
    std::string_view body = trim(text);
    if (body == "*") return e;
    const std::size_t lead = static_cast<std::size_t>(body.data() - text.data());
    for (Token tok : split_tokens(body)) {
        tok.offset += lead;
        std::string_view t = tok.text;
        if (t == "D0" || t == "D1") {
            e.detector = t == "D0" ? Detector::D0 : Detector::D1;
        } else if (t == "I0" || t == "I1") {
            e.indicator = t == "I0" ? Indicator::I0 : Indicator::I1;
        } else if (auto colon = t.find(':'); colon != std::string_view::npos) {
            DeviceSet ds;
            ds.id = std::string(t.substr(0, colon));
            if (!is_ident(ds.id)) fail(tok, "bad device id in");
            std::string_view v = t.substr(colon + 1);
            if (v == "idle") ds.phase = DeviceState::Phase::Idle;
            else if (v == "done") ds.phase = DeviceState::Phase::Done;
            else if (auto bin = parse_int(v)) {
                ds.phase = DeviceState::Phase::Running;
                ds.bin = *bin;
            } else {
                fail(tok, "bad device position in");
            }
            e.devices.push_back(std::move(ds));
        } else if (auto eq = t.find('='); eq != std::string_view::npos) {
            MindEdit me;
            me.agent = std::string(t.substr(0, eq));
            if (!is_ident(me.agent)) fail(tok, "bad agent id in");
            std::string_view rhs = t.substr(eq + 1);
            auto arrow = rhs.find('>');
            if (arrow == std::string_view::npos) fail(tok, "mind edit needs 'from>to' in");
            std::string_view from = rhs.substr(0, arrow);
            auto [to, kind] = split_marker(rhs.substr(arrow + 1));
            if (from != "*") {
                if (!is_ident(from)) fail(tok, "bad mind symbol in");
                me.from = std::string(from);
            }
            if (!is_ident(to)) fail(tok, "bad mind symbol in");
            me.to = std::string(to);
            me.to_kind = kind;
            e.minds.push_back(std::move(me));
        } else {
            fail(tok, "unrecognized edit token");
        }
    }
    return e;
}

bool Compatibility::allows(const ComponentLabel& label) const {
    return std::none_of(forbidden.begin(), forbidden.end(), [&](const auto& pair) {
        return pair.first.matches(label) && pair.second.matches(label);
    });
}

// ---------------------------------------------------------------------------
// Superposition

const Component* Superposition::find(const ComponentLabel& label) const noexcept {
    for (const auto& c : components)
        if (c.label == label) return &c;
    return nullptr;
}

Component* Superposition::find(const ComponentLabel& label) noexcept {
    for (auto& c : components)
        if (c.label == label) return &c;
    return nullptr;
}

Superposition insert_component(const Superposition& sup, ComponentLabel label, const Compatibility& compatibility) {
    if (sup.find(label)) throw DuplicateLabel("component already present: " + label.to_string());
    if (!compatibility.allows(label)) throw IncompatibleLabel("contradictory label: " + label.to_string());
    Superposition out = sup;
    out.components.push_back({std::move(label), 0.0, sup.time});
    return out;
}

double total_modulus(const Superposition& sup) noexcept {
    double sum = 0.0;
    for (const auto& c : sup.components) sum += c.modulus;
    return sum;
}

bool is_residual(const Superposition& sup, const CurrentLedger& ledger) {
    for (const auto& e : ledger.entries)
        if (std::abs(e.rate) >= kQuietRate) return false;
    auto surviving = std::count_if(sup.components.begin(), sup.components.end(),
                                   [](const Component& c) { return c.modulus > kModulusFloor; });
    return surviving >= 2;
}

}  // namespace reduxion
