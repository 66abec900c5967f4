#include "tpik/config_io.hpp"

#include <fstream>

namespace tpik {

namespace {

using nlohmann::json;

json load_json(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) {
    throw ConfigError("cannot open '" + file.string() + "'");
  }
  try {
    return json::parse(in);
  } catch (const json::parse_error& err) {
    throw ConfigError("'" + file.string() + "': " + err.what());
  }
}

double require_number(const json& obj, const std::string& key,
                      const std::string& where) {
  if (!obj.contains(key) || !obj[key].is_number()) {
    throw ConfigError(where + ": missing numeric field '" + key + "'");
  }
  return obj[key].get<double>();
}

Pose parse_pose(const json& obj, const std::string& where) {
  Pose pose;
  if (obj.contains("position")) {
    const auto& p = obj["position"];
    if (!p.is_array() || p.size() != 3) {
      throw ConfigError(where + ": position must be a 3-array");
    }
    pose.position = Eigen::Vector3d(p[0].get<double>(), p[1].get<double>(),
                                    p[2].get<double>());
  }
  if (obj.contains("orientation")) {
    const auto& o = obj["orientation"];
    if (!o.is_array() || o.size() != 4) {
      throw ConfigError(where + ": orientation must be [w, x, y, z]");
    }
    pose.orientation = Eigen::Quaterniond(o[0].get<double>(), o[1].get<double>(),
                                          o[2].get<double>(), o[3].get<double>());
    if (std::abs(pose.orientation.norm() - 1.0) > 1e-9) {
      throw ConfigError(where + ": orientation quaternion must have unit norm");
    }
  }
  return pose;
}

TaskRows parse_rows(const std::string& name, const std::string& where) {
  if (name == "position") return TaskRows::position;
  if (name == "orientation") return TaskRows::orientation;
  if (name == "full") return TaskRows::full;
  if (name == "position_xy") return TaskRows::position_xy;
  throw ConfigError(where + ": unknown rows selector '" + name + "'");
}

Eigen::VectorXd parse_gain(const json& value, int dim, const std::string& where) {
  if (value.is_number()) {
    return Eigen::VectorXd::Constant(dim, value.get<double>());
  }
  if (value.is_array()) {
    if (static_cast<int>(value.size()) != dim) {
      throw ConfigError(where + ": gain array needs " + std::to_string(dim) +
                        " entries");
    }
    Eigen::VectorXd gain(dim);
    for (int i = 0; i < dim; ++i) gain(i) = value[i].get<double>();
    return gain;
  }
  throw ConfigError(where + ": gain must be a number or an array");
}

double default_gain(TaskKind kind) {
  switch (kind) {
    case TaskKind::equality: return 1.5;
    case TaskKind::set_based: return 2.0;
    case TaskKind::optimization: return 0.15;
  }
  return 1.0;
}

TaskSpec parse_task(const json& obj) {
  if (!obj.contains("id") || !obj["id"].is_string()) {
    throw ConfigError("hierarchy: every task needs a string 'id'");
  }
  TaskSpec task;
  task.id = obj["id"].get<std::string>();
  const std::string where = "task '" + task.id + "'";

  const std::string kind = obj.value("kind", "equality");
  if (kind == "equality") {
    task.kind = TaskKind::equality;
  } else if (kind == "set_based") {
    task.kind = TaskKind::set_based;
  } else if (kind == "optimization") {
    task.kind = TaskKind::optimization;
  } else {
    throw ConfigError(where + ": unknown kind '" + kind + "'");
  }

  if (!obj.contains("objective") || !obj["objective"].is_object()) {
    throw ConfigError(where + ": needs an objective object");
  }
  const json& objective = obj["objective"];
  const std::string type = objective.value("type", "");
  if (type == "ee_position") {
    task.objective.type = Objective::Type::ee_position;
  } else if (type == "ee_pose") {
    task.objective.type = Objective::Type::ee_pose;
  } else if (type == "joint_value") {
    task.objective.type = Objective::Type::joint_value;
    task.objective.joint_index =
        static_cast<int>(require_number(objective, "index", where));
  } else if (type == "manipulability") {
    task.objective.type = Objective::Type::manipulability;
    task.objective.rows = parse_rows(objective.value("rows", "position"), where);
    task.objective.fd_delta = objective.value("fd_delta", 1e-6);
  } else {
    throw ConfigError(where + ": unknown objective type '" + type + "'");
  }

  task.priority_rank = obj.value("priority", 1);
  const int dim = task.objective.dimension();
  task.gain = obj.contains("gain")
                  ? parse_gain(obj["gain"], dim, where)
                  : Eigen::VectorXd::Constant(dim, default_gain(task.kind));

  if (obj.contains("thresholds")) {
    const json& th = obj["thresholds"];
    ThresholdSet set;
    if (th.contains("physical_min")) set.physical_min = th["physical_min"].get<double>();
    if (th.contains("physical_max")) set.physical_max = th["physical_max"].get<double>();
    if (th.contains("safety_lower")) set.safety_lower = th["safety_lower"].get<double>();
    if (th.contains("safety_upper")) set.safety_upper = th["safety_upper"].get<double>();
    set.epsilon = th.value("epsilon", 0.05);
    task.thresholds = set;
  }

  if (obj.contains("desired")) {
    const json& desired = obj["desired"];
    if (desired.is_string()) {
      if (desired.get<std::string>() != "trajectory") {
        throw ConfigError(where + ": desired must be \"trajectory\" or a constant");
      }
      task.desired.kind = DesiredSource::Kind::trajectory;
    } else if (desired.is_number()) {
      task.desired.kind = DesiredSource::Kind::constant;
      task.desired.constant_value =
          Eigen::VectorXd::Constant(1, desired.get<double>());
    } else if (desired.is_array()) {
      task.desired.kind = DesiredSource::Kind::constant;
      task.desired.constant_value.resize(desired.size());
      for (size_t i = 0; i < desired.size(); ++i) {
        task.desired.constant_value(i) = desired[i].get<double>();
      }
    } else {
      throw ConfigError(where + ": desired must be \"trajectory\" or a constant");
    }
  } else if (task.kind == TaskKind::optimization) {
    throw ConfigError(where + ": optimization tasks need a constant desired value");
  }

  task.optimization_counterpart = obj.value("optimization_counterpart", true);
  if (obj.contains("optimization_target")) {
    task.optimization_target = obj["optimization_target"].get<double>();
  }
  if (obj.contains("optimization_gain")) {
    task.optimization_gain = obj["optimization_gain"].get<double>();
  }
  return task;
}

}  // namespace

KinematicChain load_chain(const std::filesystem::path& file) {
  const json doc = load_json(file);
  KinematicChain chain;
  chain.name = doc.value("name", file.stem().string());

  if (!doc.contains("joints") || !doc["joints"].is_array()) {
    throw ConfigError("chain '" + chain.name + "': needs a joints array");
  }
  for (const json& j : doc["joints"]) {
    const std::string where =
        "chain '" + chain.name + "' joint " + std::to_string(chain.joints.size() + 1);
    JointDef joint;
    joint.a = require_number(j, "a", where);
    joint.alpha = require_number(j, "alpha", where);
    joint.d = require_number(j, "d", where);
    joint.theta_offset = j.value("theta_offset", 0.0);
    joint.q_min = require_number(j, "q_min", where);
    joint.q_max = require_number(j, "q_max", where);
    chain.joints.push_back(joint);
  }
  if (doc.contains("base_pose")) {
    chain.base_pose = parse_pose(doc["base_pose"], "chain '" + chain.name + "' base_pose");
  }
  if (doc.contains("tool_offset")) {
    chain.tool_offset = parse_pose(doc["tool_offset"], "chain '" + chain.name + "' tool_offset");
  }
  chain.validate();
  return chain;
}

std::vector<TaskSpec> load_hierarchy(const std::filesystem::path& file) {
  const json doc = load_json(file);
  if (!doc.contains("tasks") || !doc["tasks"].is_array() || doc["tasks"].empty()) {
    throw ConfigError("'" + file.string() + "': needs a non-empty tasks array");
  }
  std::vector<TaskSpec> tasks;
  for (const json& entry : doc["tasks"]) {
    tasks.push_back(parse_task(entry));
  }
  for (size_t i = 0; i < tasks.size(); ++i) {
    for (size_t j = i + 1; j < tasks.size(); ++j) {
      if (tasks[i].id == tasks[j].id) {
        throw ConfigError("task '" + tasks[i].id + "': duplicate id");
      }
    }
  }
  return tasks;
}

ScenarioConfig load_scenario(const std::filesystem::path& file) {
  const json doc = load_json(file);
  const std::filesystem::path dir = file.parent_path();

  ScenarioConfig cfg;
  cfg.name = doc.value("name", file.stem().string());
  const std::string where = "scenario '" + cfg.name + "'";

  if (!doc.contains("chain") || !doc["chain"].is_string() ||
      !doc.contains("hierarchy") || !doc["hierarchy"].is_string()) {
    throw ConfigError(where + ": needs chain and hierarchy file references");
  }
  cfg.chain = load_chain(dir / doc["chain"].get<std::string>());
  cfg.hierarchy = load_hierarchy(dir / doc["hierarchy"].get<std::string>());

  if (!doc.contains("path") || !doc["path"].is_object()) {
    throw ConfigError(where + ": needs a path object");
  }
  const json& path = doc["path"];
  if (!path.contains("waypoints") || !path["waypoints"].is_array()) {
    throw ConfigError(where + ": path needs a waypoints array");
  }
  for (const json& wp : path["waypoints"]) {
    cfg.path.waypoints.push_back(parse_pose(wp, where + " waypoint"));
  }
  cfg.path.segment_speed = path.value("segment_speed", 0.1);
  cfg.path.hold_orientation = path.value("hold_orientation", true);
  cfg.path.loop_back = path.value("loop_back", false);

  if (!doc.contains("q0") || !doc["q0"].is_array()) {
    throw ConfigError(where + ": needs a q0 array");
  }
  cfg.q0.resize(doc["q0"].size());
  for (size_t i = 0; i < doc["q0"].size(); ++i) {
    cfg.q0(i) = doc["q0"][i].get<double>();
  }

  cfg.dt = doc.value("dt", 0.005);
  cfg.duration = doc.value("duration", 10.0);
  cfg.with_optimization = doc.value("with_optimization", false);

  if (doc.contains("solver")) {
    const json& solver = doc["solver"];
    cfg.solver.lambda_max = solver.value("lambda_max", cfg.solver.lambda_max);
    cfg.solver.s_min = solver.value("s_min", cfg.solver.s_min);
    cfg.solver.velocity_limit =
        solver.value("velocity_limit", cfg.solver.velocity_limit);
    cfg.solver.deactivation_sign_tol =
        solver.value("deactivation_sign_tol", cfg.solver.deactivation_sign_tol);
    cfg.solver.max_active_set_iterations =
        solver.value("max_active_set_iterations", 0);
    cfg.solver.strict_deactivation = solver.value("strict_deactivation", false);
  }

  cfg.validate();
  return cfg;
}

nlohmann::ordered_json metrics_to_json(const ScenarioMetrics& metrics) {
  nlohmann::ordered_json doc;
  doc["tracking_rmse"] = metrics.tracking_rmse;
  doc["max_tracking_error"] = metrics.max_tracking_error;
  doc["activation_count"] = metrics.activation_count;
  doc["active_time_fraction"] = metrics.active_time_fraction;
  doc["min_manipulability"] = metrics.min_manipulability;
  doc["physical_violation_count"] = metrics.physical_violation_count;
  doc["joints_reaching_limits"] = metrics.joints_reaching_limits;
  return doc;
}

nlohmann::ordered_json comparison_to_json(const ScenarioMetrics& without,
                                          const ScenarioMetrics& with) {
  nlohmann::ordered_json doc;
  doc["rmse"] = {{"without", without.tracking_rmse},
                 {"with", with.tracking_rmse},
                 {"delta", with.tracking_rmse - without.tracking_rmse}};

  nlohmann::ordered_json activations, active_time;
  for (const auto& [id, count] : without.activation_count) {
    const auto it = with.activation_count.find(id);
    const int with_count = it == with.activation_count.end() ? 0 : it->second;
    activations[id] = {{"without", count},
                       {"with", with_count},
                       {"delta", with_count - count}};
  }
  for (const auto& [id, fraction] : without.active_time_fraction) {
    const auto it = with.active_time_fraction.find(id);
    const double with_fraction =
        it == with.active_time_fraction.end() ? 0.0 : it->second;
    active_time[id] = {{"without", fraction},
                       {"with", with_fraction},
                       {"delta", with_fraction - fraction}};
  }
  doc["activations"] = activations;
  doc["active_time"] = active_time;
  doc["joints_reaching_limits"] = {
      {"without", without.joints_reaching_limits},
      {"with", with.joints_reaching_limits},
      {"delta", with.joints_reaching_limits - without.joints_reaching_limits}};
  return doc;
}

}  // namespace tpik
