#pragma once

#include "reduxion/state.hpp"

#include <string>
#include <variant>

namespace reduxion {

/// Radioactive decay with a clock that shuts the detector off at `half_life`.
struct Decay {
    double half_life = 1.0;
    friend auto operator<=>(const Decay&, const Decay&) = default;
};

/// Transport of modulus along a device's position bins, ending in Done.
struct Advection {
    std::string device;
    double duration = 1.0;
    int bin_count = 1;
    friend auto operator<=>(const Advection&, const Advection&) = default;
};

/// Physiological interaction of an observing agent, active on [start, start + duration].
struct PhysRamp {
    std::string agent;
    double start = 0.0;
    double duration = 1.0;
    friend auto operator<=>(const PhysRamp&, const PhysRamp&) = default;
};

using ChannelKind = std::variant<Decay, Advection, PhysRamp>;

/// A current-carrying link. For Decay and PhysRamp the target is `effect`
/// applied to the source; for Advection the device moves one bin and `effect`
/// applies only on the final step into Done.
struct Channel {
    std::string name;
    ChannelKind kind;
    LabelPattern source;
    LabelEdit effect;
    bool classically_continuous = false;

    friend bool operator==(const Channel&, const Channel&) = default;
};

}  // namespace reduxion
