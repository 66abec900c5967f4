#include "tpik/tasks.hpp"

namespace tpik {

namespace {

constexpr double kValueSlack = 1e-9;

bool deactivation_allowed(const TaskSpec& spec, ActivationMode mode,
                          double value, double directional,
                          const ActivationPolicy& policy) {
  const ThresholdSet& th = *spec.thresholds;
  if (mode == ActivationMode::active_lower) {
    if (!(directional > policy.sign_tolerance)) return false;
    return policy.strict ? value <= th.activation_lower()
                         : value >= *th.safety_lower - kValueSlack;
  }
  if (mode == ActivationMode::active_upper) {
    if (!(directional < -policy.sign_tolerance)) return false;
    return policy.strict ? value >= th.activation_upper()
                         : value <= *th.safety_upper + kValueSlack;
  }
  return false;
}

}  // namespace

void ThresholdSet::validate(const std::string& task_id) const {
  const std::string where = "task '" + task_id + "': ";
  if (!has_lower() && !has_upper()) {
    throw ConfigError(where + "set-based task needs at least one threshold side");
  }
  if (!(epsilon > 0.0)) {
    throw ConfigError(where + "activation margin epsilon must be positive");
  }
  if (has_lower() != physical_min.has_value() ||
      has_upper() != physical_max.has_value()) {
    throw ConfigError(where + "each threshold side needs both its safety and physical bound");
  }
  if (has_lower() && !(*physical_min < *safety_lower)) {
    throw ConfigError(where + "physical_min must be below safety_lower");
  }
  if (has_upper() && !(*safety_upper < *physical_max)) {
    throw ConfigError(where + "safety_upper must be below physical_max");
  }
  if (has_lower() && has_upper()) {
    if (!(*safety_lower < *safety_upper)) {
      throw ConfigError(where + "safety_lower must be below safety_upper");
    }
    if (!(epsilon < (*safety_upper - *safety_lower) / 2.0)) {
      throw ConfigError(where + "epsilon must be below half the safety interval");
    }
  }
}

void TaskSpec::validate(int chain_dof) const {
  const std::string where = "task '" + id + "': ";
  const int m = objective.dimension();
  if (gain.size() != m) {
    throw ConfigError(where + "gain needs " + std::to_string(m) + " entries");
  }
  if ((gain.array() <= 0.0).any()) {
    throw ConfigError(where + "gain entries must be positive");
  }
  if (objective.type == Objective::Type::joint_value &&
      (objective.joint_index < 0 || objective.joint_index >= chain_dof)) {
    throw ConfigError(where + "joint index out of range");
  }
  if (objective.type == Objective::Type::manipulability &&
      !(objective.fd_delta > 0.0)) {
    throw ConfigError(where + "fd_delta must be positive");
  }
  if (kind == TaskKind::set_based) {
    if (m != 1) {
      throw ConfigError(where + "set-based tasks must be scalar");
    }
    if (!thresholds) {
      throw ConfigError(where + "set-based task needs thresholds");
    }
    thresholds->validate(id);
  } else if (thresholds) {
    throw ConfigError(where + "thresholds only apply to set-based tasks");
  }
  if (kind == TaskKind::optimization &&
      desired.kind != DesiredSource::Kind::constant) {
    throw ConfigError(where + "optimization tasks need a constant desired value");
  }
  if (desired.kind == DesiredSource::Kind::constant &&
      desired.constant_value.size() != m) {
    throw ConfigError(where + "constant desired value needs " +
                      std::to_string(m) + " entries");
  }
}

TaskEvaluation evaluate_task(const TaskSpec& spec, const KinematicChain& chain,
                             const Eigen::VectorXd& q) {
  TaskEvaluation out;
  switch (spec.objective.type) {
    case Objective::Type::joint_value: {
      const int idx = spec.objective.joint_index;
      if (idx < 0 || idx >= chain.dof()) {
        throw ConfigError("task '" + spec.id + "': joint index out of range");
      }
      out.value.vec = Eigen::VectorXd::Constant(1, q(idx));
      out.jacobian = Eigen::MatrixXd::Zero(1, chain.dof());
      out.jacobian(0, idx) = 1.0;
      break;
    }
    case Objective::Type::ee_position: {
      const Pose pose = forward_kinematics(chain, q);
      out.value.vec = pose.position;
      out.jacobian = geometric_jacobian(chain, q).topRows(3);
      break;
    }
    case Objective::Type::ee_pose: {
      const Pose pose = forward_kinematics(chain, q);
      out.value.vec = pose.position;
      out.value.orientation = pose.orientation;
      out.jacobian = geometric_jacobian(chain, q);
      break;
    }
    case Objective::Type::manipulability: {
      out.value.vec = Eigen::VectorXd::Constant(
          1, manipulability(chain, q, spec.objective.rows));
      out.jacobian = manipulability_jacobian_numeric(
          chain, q, spec.objective.rows, spec.objective.fd_delta);
      break;
    }
  }
  return out;
}

Eigen::VectorXd task_error(const TaskSpec& spec, const TaskValue& value,
                           const TaskReference& desired) {
  if (spec.objective.type == Objective::Type::ee_pose) {
    if (!value.orientation || !desired.orientation) {
      throw ConfigError("task '" + spec.id + "': pose error needs orientations");
    }
    Eigen::VectorXd err(6);
    err.head<3>() = desired.vec.head<3>() - value.vec.head<3>();
    Eigen::Quaterniond rel = *desired.orientation * value.orientation->conjugate();
    if (rel.w() < 0.0) rel.coeffs() = -rel.coeffs();
    err.tail<3>() = rel.vec();
    return err;
  }
  if (desired.vec.size() != value.vec.size()) {
    throw ConfigError("task '" + spec.id + "': desired value dimension mismatch");
  }
  return desired.vec - value.vec;
}

ActivationDecision update_activation(const TaskSpec& spec,
                                     const SetBasedState& state, double value,
                                     double directional, double time,
                                     const ActivationPolicy& policy) {
  if (spec.kind != TaskKind::set_based || !spec.thresholds) {
    throw std::logic_error("update_activation: task '" + spec.id +
                           "' is not set-based");
  }
  const ThresholdSet& th = *spec.thresholds;

  ActivationDecision out;
  out.state = state;
  out.physical_violation =
      (th.physical_min && value < *th.physical_min) ||
      (th.physical_max && value > *th.physical_max);

  ActivationMode next = state.mode;
  switch (state.mode) {
    case ActivationMode::inactive:
      if (th.has_upper() && value >= th.activation_upper()) {
        next = ActivationMode::active_upper;
      } else if (th.has_lower() && value <= th.activation_lower()) {
        next = ActivationMode::active_lower;
      }
      break;
    case ActivationMode::active_lower:
    case ActivationMode::active_upper:
      if (deactivation_allowed(spec, state.mode, value, directional, policy)) {
        next = ActivationMode::inactive;
      }
      break;
  }

  if (next != state.mode) {
    out.state.mode = next;
    out.state.last_transition_time = time;
    out.state.transition_count += 1;
  }
  return out;
}

double active_desired(const TaskSpec& spec, const SetBasedState& state) {
  if (spec.kind != TaskKind::set_based || !spec.thresholds) {
    throw std::logic_error("active_desired: task '" + spec.id +
                           "' is not set-based");
  }
  switch (state.mode) {
    case ActivationMode::active_lower: return *spec.thresholds->safety_lower;
    case ActivationMode::active_upper: return *spec.thresholds->safety_upper;
    case ActivationMode::inactive: break;
  }
  throw std::logic_error("active_desired: task '" + spec.id + "' is inactive");
}

TaskSpec make_optimization_counterpart(const TaskSpec& spec) {
  if (spec.kind != TaskKind::set_based || !spec.thresholds) {
    throw std::logic_error("make_optimization_counterpart: task '" + spec.id +
                           "' is not set-based");
  }
  const ThresholdSet& th = *spec.thresholds;

  TaskSpec out;
  out.id = spec.id + "_opt";
  out.kind = TaskKind::optimization;
  out.objective = spec.objective;
  out.priority_rank = 1000 + spec.priority_rank;
  out.desired.kind = DesiredSource::Kind::constant;
  out.optimization_counterpart = false;

  double target = 0.0;
  if (th.has_lower() && th.has_upper()) {
    target = (*th.safety_upper + *th.safety_lower) / 2.0;
  } else {
    // One-sided: the target must lie beyond what the chain can reach so the
    // counterpart keeps pushing away from the bounded side.
    if (!spec.optimization_target) {
      throw ConfigError("task '" + spec.id +
                        "': one-sided counterpart needs optimization_target");
    }
    target = *spec.optimization_target;
  }
  out.desired.constant_value = Eigen::VectorXd::Constant(1, target);
  out.gain = Eigen::VectorXd::Constant(
      1, spec.optimization_gain.value_or(0.1 * spec.gain(0)));
  return out;
}

}  // namespace tpik
