#pragma once

// Component labels, superpositions and the per-step current ledger.
//
// A label is the classical record of one branch: detector, device positions,
// optional indicator and one mind slot per agent. The artifact stores square
// moduli only; no phases are ever represented.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace reduxion {

enum class Detector : std::uint8_t { D0, D1 };
enum class Indicator : std::uint8_t { I0, I1 };

struct DeviceState {
    enum class Phase : std::uint8_t { Idle, Running, Done };

    std::string id;
    Phase phase = Phase::Idle;
    int bin = 0;  // meaningful only while Running
    int bin_count = 1;

    static DeviceState idle(std::string id, int bin_count);
    static DeviceState running(std::string id, int bin, int bin_count);
    static DeviceState done(std::string id, int bin_count);

    friend auto operator<=>(const DeviceState&, const DeviceState&) = default;
};

struct MindState {
    enum class Kind : std::uint8_t { UnknownX, Unconscious, Ready, Conscious };

    std::string agent;
    Kind kind = Kind::UnknownX;
    std::string percept;  // symbol, e.g. "B1", "C0", "U", "X"

    bool active() const noexcept { return kind == Kind::Ready || kind == Kind::Conscious; }

    friend auto operator<=>(const MindState&, const MindState&) = default;
};

/// Marker characters used in label text: ! conscious, ? ready, - unconscious, ~ unknown.
char kind_marker(MindState::Kind kind) noexcept;
std::optional<MindState::Kind> kind_from_marker(char c) noexcept;

struct ComponentLabel {
    Detector detector = Detector::D0;
    std::vector<DeviceState> devices;  // sorted by id
    std::optional<Indicator> indicator;
    std::vector<MindState> minds;      // sorted by agent

    const DeviceState* device(std::string_view id) const noexcept;
    DeviceState* device(std::string_view id) noexcept;
    const MindState* mind(std::string_view agent) const noexcept;
    MindState* mind(std::string_view agent) noexcept;

    bool has_kind(MindState::Kind kind) const noexcept;

    /// Canonical text, e.g. "D1.M:17.I0.observer=B1?".
    std::string to_string() const;

    /// Same text with running bins replaced by "z"; groups the members of one
    /// pulse integral under a single signature.
    std::string group_signature() const;

    friend auto operator<=>(const ComponentLabel&, const ComponentLabel&) = default;
};

struct ComponentLabelHash {
    std::size_t operator()(const ComponentLabel& label) const noexcept;
};

/// Partial constraint on a label. Empty pattern ("*") matches everything.
struct LabelPattern {
    struct DeviceMatch {
        enum class Kind : std::uint8_t { Idle, Running, Done, Bin };
        std::string id;
        Kind kind = Kind::Running;
        int bin = 0;
        friend auto operator<=>(const DeviceMatch&, const DeviceMatch&) = default;
    };
    struct MindMatch {
        std::string agent;
        std::optional<std::string> percept;
        std::optional<MindState::Kind> kind;
        friend auto operator<=>(const MindMatch&, const MindMatch&) = default;
    };

    std::optional<Detector> detector;
    std::vector<DeviceMatch> devices;
    std::optional<Indicator> indicator;
    std::vector<MindMatch> minds;

    bool matches(const ComponentLabel& label) const;
    bool empty() const noexcept;
    std::string to_string() const;

    /// Throws ParseError with line 0 and a column relative to `text`.
    static LabelPattern parse(std::string_view text);

    friend auto operator<=>(const LabelPattern&, const LabelPattern&) = default;
};

/// Structural change applied by a channel to its source label.
struct LabelEdit {
    struct DeviceSet {
        std::string id;
        DeviceState::Phase phase = DeviceState::Phase::Idle;
        int bin = 0;
        friend auto operator<=>(const DeviceSet&, const DeviceSet&) = default;
    };
    struct MindEdit {
        std::string agent;
        std::optional<std::string> from;  // unset: any percept
        std::string to;
        std::optional<MindState::Kind> to_kind;  // unset: keep kind
        friend auto operator<=>(const MindEdit&, const MindEdit&) = default;
    };

    std::optional<Detector> detector;
    std::vector<DeviceSet> devices;
    std::optional<Indicator> indicator;
    std::vector<MindEdit> minds;

    /// Returns the edited label; agents whose mind slot changed are appended to
    /// `touched` when it is non-null.
    ComponentLabel apply(const ComponentLabel& label, std::vector<std::string>* touched = nullptr) const;

    bool empty() const noexcept;
    std::string to_string() const;
    static LabelEdit parse(std::string_view text);

    friend auto operator<=>(const LabelEdit&, const LabelEdit&) = default;
};

/// Scenario-declared exclusions: a label matching both sides of any pair is
/// contradictory and never instantiated.
struct Compatibility {
    std::vector<std::pair<LabelPattern, LabelPattern>> forbidden;

    bool allows(const ComponentLabel& label) const;

    friend bool operator==(const Compatibility&, const Compatibility&) = default;
};

struct Component {
    ComponentLabel label;
    double modulus = 0.0;  // square modulus
    double born_at = 0.0;  // seconds
};

struct Superposition {
    std::vector<Component> components;
    double time = 0.0;

    const Component* find(const ComponentLabel& label) const noexcept;
    Component* find(const ComponentLabel& label) noexcept;
};

struct LedgerEntry {
    ComponentLabel source;
    ComponentLabel target;
    double transferred = 0.0;
    double rate = 0.0;  // per second
    std::string channel;
};

/// Every inter-component transfer made during one step.
struct CurrentLedger {
    std::vector<LedgerEntry> entries;
    double step_time = 0.0;
    double step_size = 0.0;
};

inline constexpr double kModulusFloor = 1e-9;    // "surviving" component
inline constexpr double kPruneThreshold = 1e-15;
inline constexpr double kQuietRate = 1e-12;

Superposition insert_component(const Superposition& sup, ComponentLabel label,
                               const Compatibility& compatibility = {});

double total_modulus(const Superposition& sup) noexcept;

/// Currents have ceased and at least two components survive.
bool is_residual(const Superposition& sup, const CurrentLedger& ledger);

}  // namespace reduxion
