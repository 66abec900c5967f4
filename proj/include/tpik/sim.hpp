#pragma once

#include <iosfwd>
#include <map>

#include "tpik/solver.hpp"

namespace tpik {

/// Raised when the integrated state stops being finite; carries the index of
/// the control cycle at which the run was aborted.
class NumericalAbort : public std::runtime_error {
 public:
  NumericalAbort(int cycle, const std::string& what)
      : std::runtime_error(what), cycle_index(cycle) {}
  int cycle_index;
};

/// Piecewise-linear Cartesian reference through the waypoints at constant
/// segment speed. With loop_back the path is followed forwards and then
/// backwards; after the end the reference holds.
struct WaypointPath {
  std::vector<Pose> waypoints;
  double segment_speed = 0.1;  // m/s
  bool hold_orientation = true;
  bool loop_back = false;

  void validate() const;
};

struct PathSample {
  Pose pose;
  Eigen::Matrix<double, 6, 1> velocity;  // linear; angular
};

PathSample sample_path(const WaypointPath& path, double t);

struct ScenarioConfig {
  std::string name;
  KinematicChain chain;
  std::vector<TaskSpec> hierarchy;  // as listed, priority order
  WaypointPath path;
  Eigen::VectorXd q0;
  double dt = 0.005;
  double duration = 10.0;
  bool with_optimization = false;
  SolverConfig solver;

  void validate() const;
};

struct TaskTraceEntry {
  double value = 0.0;
  ActivationMode mode = ActivationMode::inactive;
  double desired = std::numeric_limits<double>::quiet_NaN();
};

/// One control cycle of a run. `task_entries` follows the set-based tasks in
/// hierarchy order.
struct TraceRecord {
  double t = 0.0;
  Eigen::VectorXd q;
  Pose ee_pose;
  Pose desired_pose;
  double error_norm = 0.0;
  std::vector<TaskTraceEntry> task_entries;
  Eigen::VectorXd qdot;
  bool saturated = false;
  double manipulability = 0.0;
  int physical_violations = 0;
};

struct ScenarioMetrics {
  double tracking_rmse = 0.0;
  double max_tracking_error = 0.0;
  std::map<std::string, int> activation_count;
  std::map<std::string, double> active_time_fraction;
  double min_manipulability = 0.0;
  int physical_violation_count = 0;
  int joints_reaching_limits = 0;
};

struct ScenarioResult {
  std::vector<TraceRecord> trace;
  ScenarioMetrics metrics;
  /// Hierarchy actually solved, including generated optimization
  /// counterparts when the run enables them.
  std::vector<TaskSpec> tasks;
};

ScenarioResult run_scenario(const ScenarioConfig& cfg);

ScenarioMetrics compute_metrics(const std::vector<TraceRecord>& trace,
                                const std::vector<TaskSpec>& tasks);

/// CSV trace: t, q_1..q_n, ee pose, desired position, error norm, then one
/// (value, mode, desired) triple per set-based task. Modes encode as
/// 0 inactive, 1 active at the lower threshold, 2 active at the upper.
void write_trace_csv(std::ostream& os, const std::vector<TraceRecord>& trace,
                     const std::vector<TaskSpec>& tasks);

}  // namespace tpik
