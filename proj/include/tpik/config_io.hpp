#pragma once

#include <filesystem>

#include <json.hpp>

#include "tpik/sim.hpp"

namespace tpik {

KinematicChain load_chain(const std::filesystem::path& file);
std::vector<TaskSpec> load_hierarchy(const std::filesystem::path& file);

/// Loads a scenario; chain and hierarchy references resolve relative to the
/// scenario file's directory.
ScenarioConfig load_scenario(const std::filesystem::path& file);

nlohmann::ordered_json metrics_to_json(const ScenarioMetrics& metrics);

/// Side-by-side deltas of two runs of the same scenario (optimization tasks
/// disabled vs enabled).
nlohmann::ordered_json comparison_to_json(const ScenarioMetrics& without,
                                          const ScenarioMetrics& with);

}  // namespace tpik
