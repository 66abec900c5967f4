#pragma once

#include <limits>
#include <optional>
#include <string>

#include "tpik/kinematics.hpp"

namespace tpik {

enum class TaskKind { equality, set_based, optimization };

/// What a task measures: a control objective as a function of q.
struct Objective {
  enum class Type { ee_position, ee_pose, joint_value, manipulability };

  Type type = Type::ee_position;
  int joint_index = 0;                  // joint_value only (0-based)
  TaskRows rows = TaskRows::position;   // manipulability only
  double fd_delta = 1e-6;               // manipulability gradient step

  [[nodiscard]] int dimension() const {
    switch (type) {
      case Type::ee_position: return 3;
      case Type::ee_pose: return 6;
      case Type::joint_value: return 1;
      case Type::manipulability: return 1;
    }
    return 0;
  }
};

/// Nested reference bounds for a set-based task. The activation thresholds
/// sit inside the safety ones by the margin epsilon:
///   physical_min < safety_lower < activation_lower
///                < activation_upper < safety_upper < physical_max
/// Either side may be absent (one-sided task); an absent side drops its
/// physical, safety and activation values together.
struct ThresholdSet {
  std::optional<double> physical_min;
  std::optional<double> physical_max;
  std::optional<double> safety_lower;
  std::optional<double> safety_upper;
  double epsilon = 0.05;

  [[nodiscard]] bool has_lower() const { return safety_lower.has_value(); }
  [[nodiscard]] bool has_upper() const { return safety_upper.has_value(); }
  [[nodiscard]] double activation_lower() const { return *safety_lower + epsilon; }
  [[nodiscard]] double activation_upper() const { return *safety_upper - epsilon; }

  void validate(const std::string& task_id) const;
};

enum class ActivationMode { inactive, active_lower, active_upper };

/// Per-task activation record, owned by the control loop.
struct SetBasedState {
  ActivationMode mode = ActivationMode::inactive;
  double last_transition_time = 0.0;
  int transition_count = 0;
};

/// Where an equality/optimization task gets its reference from.
struct DesiredSource {
  enum class Kind { trajectory, constant };
  Kind kind = Kind::trajectory;
  Eigen::VectorXd constant_value;
};

struct TaskSpec {
  std::string id;
  TaskKind kind = TaskKind::equality;
  Objective objective;
  Eigen::VectorXd gain;  // diagonal of K, one positive entry per task row
  int priority_rank = 1;
  std::optional<ThresholdSet> thresholds;  // set-based only
  DesiredSource desired;

  // Counterpart generation (set-based tasks only).
  bool optimization_counterpart = true;
  std::optional<double> optimization_target;  // one-sided counterparts
  std::optional<double> optimization_gain;    // default: 10% of gain

  void validate(int chain_dof) const;
};

/// Task value at a configuration; pose tasks carry the orientation separately
/// so the error can be formed with quaternion algebra.
struct TaskValue {
  Eigen::VectorXd vec;
  std::optional<Eigen::Quaterniond> orientation;
};

/// Reference for a task: desired value plus optional feedforward velocity
/// (task dimension; empty means zero).
struct TaskReference {
  Eigen::VectorXd vec;
  std::optional<Eigen::Quaterniond> orientation;
  Eigen::VectorXd velocity;
};

struct TaskEvaluation {
  TaskValue value;
  Eigen::MatrixXd jacobian;  // m x n at the evaluated q
};

TaskEvaluation evaluate_task(const TaskSpec& spec, const KinematicChain& chain,
                             const Eigen::VectorXd& q);

/// sigma_d - sigma; pose tasks return [position error; orientation error]
/// with the orientation error the vector part of q_d * q^-1, sign-corrected
/// for the shortest rotation.
Eigen::VectorXd task_error(const TaskSpec& spec, const TaskValue& value,
                           const TaskReference& desired);

struct ActivationPolicy {
  /// Literal threshold test: deactivation additionally requires the value to
  /// be at or beyond the activation threshold of the active side. The default
  /// instead requires the value to be at or inside the safety threshold.
  bool strict = false;
  /// Directional velocities with |J_A qdot| at or below this never deactivate.
  double sign_tolerance = 1e-9;
};

struct ActivationDecision {
  SetBasedState state;
  bool physical_violation = false;
};

/// Pure transition function of the set-based state machine. `directional` is
/// J_A * qdot of the hierarchy solved without this task; it is ignored for
/// activation edges.
ActivationDecision update_activation(const TaskSpec& spec,
                                     const SetBasedState& state, double value,
                                     double directional, double time,
                                     const ActivationPolicy& policy = {});

/// Reference of an active set-based task: the safety threshold of its side.
/// Throws std::logic_error on an inactive state.
double active_desired(const TaskSpec& spec, const SetBasedState& state);

/// Low-priority equality mirror of a set-based task: same objective, desired
/// value at the threshold midpoint (two-sided) or at the scenario-supplied
/// unreachable target (one-sided).
TaskSpec make_optimization_counterpart(const TaskSpec& spec);

}  // namespace tpik
