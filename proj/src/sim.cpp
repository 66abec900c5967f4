#include "tpik/sim.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

namespace tpik {

namespace {

struct Segment {
  Pose from;
  Pose to;
  double t_start = 0.0;
  double duration = 0.0;
};

std::vector<Segment> build_segments(const WaypointPath& path) {
  std::vector<Pose> points = path.waypoints;
  if (path.loop_back) {
    for (int i = static_cast<int>(path.waypoints.size()) - 2; i >= 0; --i) {
      points.push_back(path.waypoints[i]);
    }
  }
  std::vector<Segment> segments;
  double t = 0.0;
  for (size_t i = 0; i + 1 < points.size(); ++i) {
    Segment seg;
    seg.from = points[i];
    seg.to = points[i + 1];
    seg.t_start = t;
    seg.duration =
        (seg.to.position - seg.from.position).norm() / path.segment_speed;
    t += seg.duration;
    segments.push_back(seg);
  }
  return segments;
}

int mode_code(ActivationMode mode) {
  switch (mode) {
    case ActivationMode::inactive: return 0;
    case ActivationMode::active_lower: return 1;
    case ActivationMode::active_upper: return 2;
  }
  return 0;
}

void append_number(std::string& line, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), ",%.17g", v);
  line += buf;
}

}  // namespace

void WaypointPath::validate() const {
  if (waypoints.size() < 2) {
    throw ConfigError("path: needs at least two waypoints");
  }
  if (!(segment_speed > 0.0)) {
    throw ConfigError("path: segment_speed must be positive");
  }
  for (const Pose& wp : waypoints) {
    if (!wp.position.allFinite() ||
        std::abs(wp.orientation.norm() - 1.0) > 1e-9) {
      throw ConfigError("path: waypoint poses need finite positions and unit quaternions");
    }
  }
}

PathSample sample_path(const WaypointPath& path, double t) {
  path.validate();
  const std::vector<Segment> segments = build_segments(path);
  t = std::max(t, 0.0);

  PathSample out;
  out.velocity.setZero();

  // Terminal hold: at or past the end (or a fully degenerate path) the
  // reference freezes at the final pose.
  const Segment* active = nullptr;
  for (const Segment& seg : segments) {
    if (seg.duration <= 0.0) continue;  // dwell, zero-length
    if (t < seg.t_start + seg.duration) {
      active = &seg;
      break;
    }
  }
  if (active == nullptr) {
    out.pose = segments.empty() ? path.waypoints.front() : segments.back().to;
    if (path.hold_orientation) {
      out.pose.orientation = path.waypoints.front().orientation;
    }
    return out;
  }

  const double u = (t - active->t_start) / active->duration;
  out.pose.position =
      active->from.position + u * (active->to.position - active->from.position);
  out.velocity.head<3>() =
      (active->to.position - active->from.position) / active->duration;

  if (path.hold_orientation) {
    out.pose.orientation = path.waypoints.front().orientation;
  } else {
    out.pose.orientation =
        active->from.orientation.slerp(u, active->to.orientation);
    Eigen::Quaterniond rel =
        active->to.orientation * active->from.orientation.conjugate();
    if (rel.w() < 0.0) rel.coeffs() = -rel.coeffs();
    const Eigen::AngleAxisd aa(rel);
    out.velocity.tail<3>() = aa.axis() * (aa.angle() / active->duration);
  }
  return out;
}

void ScenarioConfig::validate() const {
  chain.validate();
  path.validate();
  solver.validate();
  if (hierarchy.empty()) {
    throw ConfigError("scenario '" + name + "': hierarchy is empty");
  }
  for (const TaskSpec& task : hierarchy) {
    task.validate(chain.dof());
  }
  if (!(dt > 0.0)) {
    throw ConfigError("scenario '" + name + "': dt must be positive");
  }
  if (!(duration > dt)) {
    throw ConfigError("scenario '" + name + "': duration must exceed dt");
  }
  if (q0.size() != chain.dof()) {
    throw ConfigError("scenario '" + name + "': q0 has wrong dimension");
  }
  for (int i = 0; i < chain.dof(); ++i) {
    if (q0(i) < chain.joints[i].q_min || q0(i) > chain.joints[i].q_max) {
      throw ConfigError("scenario '" + name + "': q0 joint " +
                        std::to_string(i + 1) + " outside physical bounds");
    }
  }
}

ScenarioResult run_scenario(const ScenarioConfig& cfg) {
  cfg.validate();

  ScenarioResult out;
  out.tasks = cfg.hierarchy;
  if (cfg.with_optimization) {
    for (const TaskSpec& task : cfg.hierarchy) {
      if (task.kind == TaskKind::set_based && task.optimization_counterpart) {
        out.tasks.push_back(make_optimization_counterpart(task));
      }
    }
  }
  for (const TaskSpec& task : out.tasks) {
    task.validate(cfg.chain.dof());
  }

  // Rows used for the manipulability trace column: the first manipulability
  // task's selection if the hierarchy has one, tool position rows otherwise
  // (planar rows when the chain is too short for all three).
  TaskRows metric_rows = cfg.chain.dof() >= 3 ? TaskRows::position
                                              : TaskRows::position_xy;
  for (const TaskSpec& task : out.tasks) {
    if (task.objective.type == Objective::Type::manipulability) {
      metric_rows = task.objective.rows;
      break;
    }
  }
  const bool metric_fits = row_count(metric_rows) <= cfg.chain.dof();

  std::vector<SetBasedState> states(out.tasks.size());
  Eigen::VectorXd q = cfg.q0;
  const int cycles = static_cast<int>(std::llround(cfg.duration / cfg.dt)) + 1;
  out.trace.reserve(cycles);

  for (int cycle = 0; cycle < cycles; ++cycle) {
    const double t = cycle * cfg.dt;
    if (!q.allFinite()) {
      throw NumericalAbort(cycle, "scenario '" + cfg.name +
                                      "': non-finite state at cycle " +
                                      std::to_string(cycle));
    }

    const PathSample sample = sample_path(cfg.path, t);
    ReferenceMap refs;
    for (const TaskSpec& task : out.tasks) {
      if (task.kind == TaskKind::set_based) continue;
      if (task.desired.kind != DesiredSource::Kind::trajectory) continue;
      TaskReference ref;
      if (task.objective.type == Objective::Type::ee_position) {
        ref.vec = sample.pose.position;
        ref.velocity = sample.velocity.head<3>();
      } else if (task.objective.type == Objective::Type::ee_pose) {
        ref.vec = sample.pose.position;
        ref.orientation = sample.pose.orientation;
        ref.velocity = sample.velocity;
      } else {
        throw ConfigError("task '" + task.id +
                          "': trajectory reference needs an end-effector objective");
      }
      refs.emplace(task.id, std::move(ref));
    }

    CycleResult result =
        resolve_cycle(out.tasks, states, cfg.chain, q, t, cfg.solver, refs);
    states = result.states;

    TraceRecord rec;
    rec.t = t;
    rec.q = q;
    rec.ee_pose = forward_kinematics(cfg.chain, q);
    rec.desired_pose = sample.pose;
    rec.error_norm = (rec.ee_pose.position - sample.pose.position).norm();
    rec.qdot = result.solution.qdot;
    rec.saturated = result.solution.saturated;
    rec.manipulability =
        metric_fits ? manipulability(cfg.chain, q, metric_rows) : 0.0;
    for (const SetBasedDiagnostic& diag : result.set_based) {
      rec.task_entries.push_back({diag.value, diag.mode, diag.desired});
      if (diag.physical_violation) ++rec.physical_violations;
    }
    out.trace.push_back(std::move(rec));

    q += result.solution.qdot * cfg.dt;
  }

  out.metrics = compute_metrics(out.trace, out.tasks);
  return out;
}

ScenarioMetrics compute_metrics(const std::vector<TraceRecord>& trace,
                                const std::vector<TaskSpec>& tasks) {
  if (trace.empty()) {
    throw ConfigError("compute_metrics: empty trace");
  }

  std::vector<const TaskSpec*> set_based;
  for (const TaskSpec& task : tasks) {
    if (task.kind == TaskKind::set_based) set_based.push_back(&task);
  }

  ScenarioMetrics metrics;
  double sq_sum = 0.0;
  metrics.min_manipulability = std::numeric_limits<double>::infinity();
  std::vector<int> active_records(set_based.size(), 0);
  std::vector<int> activations(set_based.size(), 0);
  std::vector<bool> ever_active(set_based.size(), false);

  for (size_t r = 0; r < trace.size(); ++r) {
    const TraceRecord& rec = trace[r];
    if (rec.task_entries.size() != set_based.size()) {
      throw ConfigError("compute_metrics: trace does not match the hierarchy");
    }
    sq_sum += rec.error_norm * rec.error_norm;
    metrics.max_tracking_error =
        std::max(metrics.max_tracking_error, rec.error_norm);
    metrics.min_manipulability =
        std::min(metrics.min_manipulability, rec.manipulability);
    metrics.physical_violation_count += rec.physical_violations;

    for (size_t k = 0; k < set_based.size(); ++k) {
      const ActivationMode mode = rec.task_entries[k].mode;
      const ActivationMode prev_mode = r == 0
          ? ActivationMode::inactive
          : trace[r - 1].task_entries[k].mode;
      if (mode != ActivationMode::inactive) {
        ++active_records[k];
        ever_active[k] = true;
        if (prev_mode == ActivationMode::inactive) ++activations[k];
      }
    }
  }

  metrics.tracking_rmse = std::sqrt(sq_sum / static_cast<double>(trace.size()));
  for (size_t k = 0; k < set_based.size(); ++k) {
    metrics.activation_count[set_based[k]->id] = activations[k];
    metrics.active_time_fraction[set_based[k]->id] =
        static_cast<double>(active_records[k]) /
        static_cast<double>(trace.size());
    if (ever_active[k] &&
        set_based[k]->objective.type == Objective::Type::joint_value) {
      ++metrics.joints_reaching_limits;
    }
  }
  return metrics;
}

void write_trace_csv(std::ostream& os, const std::vector<TraceRecord>& trace,
                     const std::vector<TaskSpec>& tasks) {
  std::string header = "t";
  const int n = trace.empty() ? 0 : static_cast<int>(trace.front().q.size());
  for (int i = 1; i <= n; ++i) header += ",q_" + std::to_string(i);
  header += ",ee_x,ee_y,ee_z,ee_qw,ee_qx,ee_qy,ee_qz,des_x,des_y,des_z,err_norm";
  for (const TaskSpec& task : tasks) {
    if (task.kind != TaskKind::set_based) continue;
    header += "," + task.id + "_value," + task.id + "_mode," + task.id + "_desired";
  }
  os << header << "\n";

  for (const TraceRecord& rec : trace) {
    std::string line;
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", rec.t);
    line += buf;
    for (int i = 0; i < n; ++i) append_number(line, rec.q(i));
    append_number(line, rec.ee_pose.position.x());
    append_number(line, rec.ee_pose.position.y());
    append_number(line, rec.ee_pose.position.z());
    append_number(line, rec.ee_pose.orientation.w());
    append_number(line, rec.ee_pose.orientation.x());
    append_number(line, rec.ee_pose.orientation.y());
    append_number(line, rec.ee_pose.orientation.z());
    append_number(line, rec.desired_pose.position.x());
    append_number(line, rec.desired_pose.position.y());
    append_number(line, rec.desired_pose.position.z());
    append_number(line, rec.error_norm);
    for (const TaskTraceEntry& entry : rec.task_entries) {
      append_number(line, entry.value);
      line += "," + std::to_string(mode_code(entry.mode));
      append_number(line, entry.desired);
    }
    os << line << "\n";
  }
}

}  // namespace tpik
