#pragma once

// Shared helpers for the unit and acceptance tests.

#include "reduxion/state.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>

namespace reduxion::test {

/// Builds a label from its canonical text, e.g. "D1.M:17.I0.cat=C1?".
/// Device bin counts default to 128 unless given in `bins`.
inline ComponentLabel label(std::string_view text, const std::map<std::string, int>& bins = {}) {
    ComponentLabel out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t end = text.find('.', pos);
        if (end == std::string_view::npos) end = text.size();
        const std::string tok(text.substr(pos, end - pos));
        pos = end + 1;
        if (tok == "D0" || tok == "D1") {
            out.detector = tok == "D0" ? Detector::D0 : Detector::D1;
        } else if (tok == "I0" || tok == "I1") {
            out.indicator = tok == "I0" ? Indicator::I0 : Indicator::I1;
        } else if (auto colon = tok.find(':'); colon != std::string::npos) {
            const std::string id = tok.substr(0, colon);
            const std::string state = tok.substr(colon + 1);
            const auto it = bins.find(id);
            const int n = it == bins.end() ? 128 : it->second;
            if (state == "idle") out.devices.push_back(DeviceState::idle(id, n));
            else if (state == "done") out.devices.push_back(DeviceState::done(id, n));
            else out.devices.push_back(DeviceState::running(id, std::stoi(state), n));
        } else if (auto eq = tok.find('='); eq != std::string::npos) {
            MindState m;
            m.agent = tok.substr(0, eq);
            m.percept = tok.substr(eq + 1, tok.size() - eq - 2);
            const auto kind = kind_from_marker(tok.back());
            if (!kind) throw std::invalid_argument("bad mind token " + tok);
            m.kind = *kind;
            out.minds.push_back(m);
        } else {
            throw std::invalid_argument("bad label token " + tok);
        }
        if (end == text.size()) break;
    }
    std::sort(out.devices.begin(), out.devices.end(), [](auto& a, auto& b) { return a.id < b.id; });
    std::sort(out.minds.begin(), out.minds.end(), [](auto& a, auto& b) { return a.agent < b.agent; });
    return out;
}

inline Superposition superposition(std::initializer_list<std::pair<std::string_view, double>> parts, double t = 0.0) {
    Superposition s;
    s.time = t;
    for (const auto& [text, m] : parts) s.components.push_back({label(text), m, 0.0});
    return s;
}

/// Three-sigma band for a binomial frequency.
inline double three_sigma(double p, std::size_t n) { return 3.0 * std::sqrt(p * (1.0 - p) / static_cast<double>(n)); }

}  // namespace reduxion::test
