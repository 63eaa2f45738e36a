#pragma once

// Scenario files and result serialization.
//
//   [scenario]  name, half_life, tau_phys, horizon, detector, indicator, seed
//               or: builtin = "version1" plus parameter overrides
//   [agents]    id = kind mind [t_ob]            e.g. observer = observer X~ 0.6
//   [devices]   id = duration bins idle|run [classical]
//   [channels]  name = decay | source | edit
//               name = advect DEVICE | source | edit
//               name = ramp AGENT | source | edit
//   [conditions] incompatible = pattern + pattern;  forbid_choice = pattern
//   [terminals] name = pattern + pattern ...

#include "reduxion/montecarlo.hpp"
#include "reduxion/scenarios.hpp"

#include <iosfwd>
#include <string>
#include <string_view>

namespace reduxion {

/// Throws ParseError (1-based line/column) or SemanticError.
ScenarioSpec parse_scenario(std::string_view text);

/// Canonical text; parse_scenario(serialize_scenario(s)) == s.
std::string serialize_scenario(const ScenarioSpec& spec);

/// Builtin name or path to a scenario file.
ScenarioSpec load_scenario(const std::string& name_or_path);

enum class ResultFormat { Json, Csv };

std::string results_json(const RunStatistics& stats);
std::string results_csv(const RunStatistics& stats);
std::string trajectory_json(const TrajectoryOutcome& outcome, const std::string& scenario, std::uint64_t seed,
                            double dt);

/// Writes to `path`, or stdout when path is empty or "-". Throws Error with
/// the path on failure.
void emit_results(const RunStatistics& stats, ResultFormat format, const std::string& path);
void write_text(const std::string& text, const std::string& path);

/// Deterministic run streamed as CSV: time, source_label, target_label, rate,
/// transferred, 12 significant digits, rows ordered by time then channel.
void write_ledger_csv(const Simulator& sim, std::ostream& out);

}  // namespace reduxion
