#pragma once

#include <map>
#include <utility>
#include <vector>

#include "tpik/tasks.hpp"

namespace tpik {

struct SolverConfig {
  double lambda_max = 0.05;  // damping ceiling for the variable-damped inverse
  double s_min = 1e-4;       // singular values below this ramp the damping in
  double velocity_limit = 0.6;        // rad/s per joint, uniform scaling clamp
  double deactivation_sign_tol = 1e-9;
  int max_active_set_iterations = 0;  // 0: number of set-based tasks + 1
  bool strict_deactivation = false;

  void validate() const;
};

/// One priority level ready for composition: Jacobian, error and feedforward
/// evaluated at the current configuration. `velocity` and `projector_rank`
/// are filled by nsb_compose.
struct HierarchyLevel {
  std::string task_id;
  Eigen::MatrixXd jacobian;
  Eigen::VectorXd error;        // sigma_d - sigma
  Eigen::VectorXd feedforward;  // desired task velocity (empty = zero)
  Eigen::VectorXd gain;         // diagonal of K

  Eigen::VectorXd velocity;  // own CLIK solution, before projection
  int projector_rank = 0;    // rank of the null-space projector after this level
};

struct HierarchySolution {
  Eigen::VectorXd qdot;
  std::vector<HierarchyLevel> levels;
  std::vector<std::pair<std::string, ActivationMode>> active_set;
  bool saturated = false;
};

/// SVD-based damped pseudoinverse. Singular values are inverted as
/// s / (s^2 + lambda^2) with lambda ramping smoothly from 0 to lambda_max as
/// the smallest singular value falls below s_min; with every singular value
/// at or above s_min the result is the exact Moore-Penrose pseudoinverse.
Eigen::MatrixXd damped_pseudoinverse(const Eigen::MatrixXd& jac,
                                     const SolverConfig& cfg);

/// N = I - J^+ J for the (augmented) Jacobian.
Eigen::MatrixXd null_space_projector(const Eigen::MatrixXd& jac_augmented,
                                     const SolverConfig& cfg);

/// qdot_i = J^+ (sigma_dot_d + K sigma_tilde).
Eigen::VectorXd clik_velocity(const HierarchyLevel& level,
                              const SolverConfig& cfg);

/// Null-space-based composition over the priority-ordered levels:
/// qdot = qdot_1 + N_1^A qdot_2 + ... + N_{h-1}^A qdot_h, where N_i^A
/// projects into the null space of the stack of Jacobians 1..i. The result
/// is scaled uniformly when its infinity norm exceeds the velocity limit.
HierarchySolution nsb_compose(std::vector<HierarchyLevel> levels,
                              const SolverConfig& cfg);

/// Per-cycle diagnostics of one set-based task.
struct SetBasedDiagnostic {
  std::string task_id;
  double value = 0.0;
  ActivationMode mode = ActivationMode::inactive;
  double desired = std::numeric_limits<double>::quiet_NaN();  // NaN: inactive
  bool physical_violation = false;
};

struct CycleResult {
  HierarchySolution solution;
  std::vector<SetBasedState> states;  // parallel to the task list
  std::vector<SetBasedDiagnostic> set_based;
  bool active_set_converged = true;
};

/// Trajectory references by task id, for tasks whose desired source is the
/// trajectory.
using ReferenceMap = std::map<std::string, TaskReference>;

/// One control cycle: evaluates every task at q, activates set-based tasks
/// whose values crossed an activation threshold, solves the hierarchy
/// (active set-based tasks by priority, then equality, then optimization
/// tasks), and retires active tasks whose exclusion would push their value
/// back toward the valid set. Deactivation candidates are tested
/// highest-priority-first; each committed change restarts the loop.
CycleResult resolve_cycle(const std::vector<TaskSpec>& tasks,
                          const std::vector<SetBasedState>& states,
                          const KinematicChain& chain, const Eigen::VectorXd& q,
                          double time, const SolverConfig& cfg,
                          const ReferenceMap& references);

}  // namespace tpik
