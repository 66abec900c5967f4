#include "tpik/solver.hpp"

#include <algorithm>
#include <iostream>

#include <Eigen/SVD>

namespace tpik {

namespace {

int rank_from_singular_values(const Eigen::VectorXd& sv, int max_dim) {
  if (sv.size() == 0) return 0;
  const double tol = std::numeric_limits<double>::epsilon() * max_dim * sv(0);
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i) {
    if (sv(i) > tol) ++rank;
  }
  return rank;
}

Eigen::VectorXd level_rhs(const HierarchyLevel& level) {
  Eigen::VectorXd rhs = level.gain.asDiagonal() * level.error;
  if (level.feedforward.size() > 0) {
    rhs += level.feedforward;
  }
  return rhs;
}

}  // namespace

void SolverConfig::validate() const {
  if (!(lambda_max > 0.0) || !(s_min > 0.0) || !(velocity_limit > 0.0) ||
      !(deactivation_sign_tol > 0.0) || max_active_set_iterations < 0) {
    throw ConfigError("solver: lambda_max, s_min, velocity_limit and "
                      "deactivation_sign_tol must be positive");
  }
}

Eigen::MatrixXd damped_pseudoinverse(const Eigen::MatrixXd& jac,
                                     const SolverConfig& cfg) {
  if (!jac.allFinite()) {
    throw ConfigError("pseudoinverse: Jacobian has non-finite entries");
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      jac, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  const int k = static_cast<int>(sv.size());
  if (k == 0 || sv(0) <= 0.0) {
    return Eigen::MatrixXd::Zero(jac.cols(), jac.rows());
  }

  // Smooth variable damping: zero while the smallest singular value stays
  // above s_min, ramping to lambda_max^2 as it approaches zero.
  const double s_smallest = sv(k - 1);
  double lambda_sq = 0.0;
  if (s_smallest < cfg.s_min) {
    const double ratio = s_smallest / cfg.s_min;
    lambda_sq = (1.0 - ratio * ratio) * cfg.lambda_max * cfg.lambda_max;
  }

  const double rank_tol = std::numeric_limits<double>::epsilon() *
                          std::max(jac.rows(), jac.cols()) * sv(0);
  Eigen::VectorXd inv(k);
  for (int i = 0; i < k; ++i) {
    if (lambda_sq == 0.0 && sv(i) <= rank_tol) {
      inv(i) = 0.0;
    } else {
      inv(i) = sv(i) / (sv(i) * sv(i) + lambda_sq);
    }
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

Eigen::MatrixXd null_space_projector(const Eigen::MatrixXd& jac_augmented,
                                     const SolverConfig& cfg) {
  const Eigen::Index n = jac_augmented.cols();
  return Eigen::MatrixXd::Identity(n, n) -
         damped_pseudoinverse(jac_augmented, cfg) * jac_augmented;
}

Eigen::VectorXd clik_velocity(const HierarchyLevel& level,
                              const SolverConfig& cfg) {
  return damped_pseudoinverse(level.jacobian, cfg) * level_rhs(level);
}

HierarchySolution nsb_compose(std::vector<HierarchyLevel> levels,
                              const SolverConfig& cfg) {
  if (levels.empty()) {
    throw std::logic_error("nsb_compose: empty hierarchy");
  }
  const Eigen::Index n = levels.front().jacobian.cols();

  HierarchySolution out;
  out.qdot = Eigen::VectorXd::Zero(n);

  Eigen::MatrixXd jac_aug(0, n);
  Eigen::MatrixXd projector = Eigen::MatrixXd::Identity(n, n);
  for (HierarchyLevel& level : levels) {
    if (level.jacobian.cols() != n) {
      throw std::logic_error("nsb_compose: level '" + level.task_id +
                             "' has mismatched Jacobian width");
    }
    level.velocity = clik_velocity(level, cfg);
    out.qdot += projector * level.velocity;

    jac_aug.conservativeResize(jac_aug.rows() + level.jacobian.rows(), n);
    jac_aug.bottomRows(level.jacobian.rows()) = level.jacobian;
    projector = null_space_projector(jac_aug, cfg);

    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(jac_aug);
    level.projector_rank = static_cast<int>(n) -
        rank_from_singular_values(svd.singularValues(),
                                  static_cast<int>(std::max(jac_aug.rows(), n)));
  }

  const double max_abs = out.qdot.cwiseAbs().maxCoeff();
  if (max_abs > cfg.velocity_limit) {
    out.qdot *= cfg.velocity_limit / max_abs;
    out.saturated = true;
  }
  out.levels = std::move(levels);
  return out;
}

namespace {

struct TaskOrder {
  int index;
  int class_rank;  // 0 active set-based, 1 equality, 2 optimization
  int priority;
};

// Hierarchy layout for the current activation pattern; `exclude` drops one
// task (deactivation candidate testing).
std::vector<HierarchyLevel> build_levels(
    const std::vector<TaskSpec>& tasks,
    const std::vector<TaskEvaluation>& evals,
    const std::vector<ActivationMode>& modes, const ReferenceMap& references,
    int exclude) {
  std::vector<TaskOrder> order;
  for (int i = 0; i < static_cast<int>(tasks.size()); ++i) {
    if (i == exclude) continue;
    const TaskSpec& task = tasks[i];
    switch (task.kind) {
      case TaskKind::set_based:
        if (modes[i] != ActivationMode::inactive) {
          order.push_back({i, 0, task.priority_rank});
        }
        break;
      case TaskKind::equality:
        order.push_back({i, 1, task.priority_rank});
        break;
      case TaskKind::optimization:
        order.push_back({i, 2, task.priority_rank});
        break;
    }
  }
  std::stable_sort(order.begin(), order.end(),
                   [](const TaskOrder& a, const TaskOrder& b) {
                     if (a.class_rank != b.class_rank)
                       return a.class_rank < b.class_rank;
                     return a.priority < b.priority;
                   });

  std::vector<HierarchyLevel> levels;
  levels.reserve(order.size());
  for (const TaskOrder& entry : order) {
    const TaskSpec& task = tasks[entry.index];
    const TaskEvaluation& eval = evals[entry.index];

    HierarchyLevel level;
    level.task_id = task.id;
    level.jacobian = eval.jacobian;
    level.gain = task.gain;

    if (task.kind == TaskKind::set_based) {
      SetBasedState probe;
      probe.mode = modes[entry.index];
      const double desired = active_desired(task, probe);
      level.error = Eigen::VectorXd::Constant(1, desired - eval.value.vec(0));
    } else if (task.desired.kind == DesiredSource::Kind::constant) {
      TaskReference ref;
      ref.vec = task.desired.constant_value;
      level.error = task_error(task, eval.value, ref);
    } else {
      const auto it = references.find(task.id);
      if (it == references.end()) {
        throw ConfigError("task '" + task.id +
                          "': no trajectory reference supplied this cycle");
      }
      level.error = task_error(task, eval.value, it->second);
      level.feedforward = it->second.velocity;
    }
    levels.push_back(std::move(level));
  }
  return levels;
}

}  // namespace

CycleResult resolve_cycle(const std::vector<TaskSpec>& tasks,
                          const std::vector<SetBasedState>& states,
                          const KinematicChain& chain, const Eigen::VectorXd& q,
                          double time, const SolverConfig& cfg,
                          const ReferenceMap& references) {
  if (tasks.empty()) {
    throw std::logic_error("resolve_cycle: empty hierarchy");
  }
  if (states.size() != tasks.size()) {
    throw std::logic_error("resolve_cycle: states not parallel to tasks");
  }

  const ActivationPolicy policy{cfg.strict_deactivation,
                                cfg.deactivation_sign_tol};

  std::vector<TaskEvaluation> evals;
  evals.reserve(tasks.size());
  for (const TaskSpec& task : tasks) {
    evals.push_back(evaluate_task(task, chain, q));
  }

  std::vector<ActivationMode> modes(tasks.size(), ActivationMode::inactive);
  std::vector<bool> violation(tasks.size(), false);
  int set_based_count = 0;
  for (size_t i = 0; i < tasks.size(); ++i) {
    modes[i] = states[i].mode;
    if (tasks[i].kind != TaskKind::set_based) continue;
    ++set_based_count;
    const ActivationDecision dec = update_activation(
        tasks[i], states[i], evals[i].value.vec(0), 0.0, time, policy);
    violation[i] = dec.physical_violation;
  }

  const int max_iters = cfg.max_active_set_iterations > 0
                            ? cfg.max_active_set_iterations
                            : set_based_count + 1;

  const auto solve = [&](int exclude) -> HierarchySolution {
    std::vector<HierarchyLevel> levels =
        build_levels(tasks, evals, modes, references, exclude);
    if (levels.empty()) {
      HierarchySolution empty;
      empty.qdot = Eigen::VectorXd::Zero(chain.dof());
      return empty;
    }
    return nsb_compose(std::move(levels), cfg);
  };

  // Activation sweep. A crossing task is left out while the hierarchy of the
  // other tasks already pushes its value back toward the valid set; this is
  // the release predicate evaluated at activation time, and keeps a task from
  // flickering while it recovers through the activation band.
  for (size_t i = 0; i < tasks.size(); ++i) {
    if (tasks[i].kind != TaskKind::set_based ||
        states[i].mode != ActivationMode::inactive) {
      continue;
    }
    const double value = evals[i].value.vec(0);
    const ActivationDecision crossing =
        update_activation(tasks[i], states[i], value, 0.0, time, policy);
    if (crossing.state.mode == ActivationMode::inactive) continue;

    const HierarchySolution candidate = solve(static_cast<int>(i));
    const double directional = (evals[i].jacobian * candidate.qdot)(0);
    SetBasedState probe;
    probe.mode = crossing.state.mode;
    const ActivationDecision held = update_activation(
        tasks[i], probe, value, directional, time, policy);
    if (held.state.mode != ActivationMode::inactive) {
      modes[i] = crossing.state.mode;
    }
  }

  // Keeps a candidate release consistent with everything released so far:
  // every retired task must still be pushed toward its valid side by the new
  // solution, otherwise a pair of tasks could each pass their single-exclusion
  // test while their joint exclusion drives both outward again.
  using Release = std::pair<int, ActivationMode>;  // task index, retired side
  const auto still_favorable = [&](const std::vector<Release>& released,
                                   const HierarchySolution& candidate) {
    for (const auto& [r, side] : released) {
      const double dir = (evals[r].jacobian * candidate.qdot)(0);
      SetBasedState probe;
      probe.mode = side;
      const ActivationDecision dec = update_activation(
          tasks[r], probe, evals[r].value.vec(0), dir, time, policy);
      if (dec.state.mode != ActivationMode::inactive) return false;
    }
    return true;
  };

  CycleResult out;
  HierarchySolution solution = solve(-1);
  std::vector<Release> released;
  int iter = 0;
  while (true) {
    int committed = -1;
    for (size_t i = 0; i < tasks.size(); ++i) {
      if (tasks[i].kind != TaskKind::set_based ||
          modes[i] == ActivationMode::inactive) {
        continue;
      }
      const HierarchySolution candidate = solve(static_cast<int>(i));
      const double directional = (evals[i].jacobian * candidate.qdot)(0);
      SetBasedState probe;
      probe.mode = modes[i];
      const ActivationDecision dec = update_activation(
          tasks[i], probe, evals[i].value.vec(0), directional, time, policy);
      if (dec.state.mode == ActivationMode::inactive &&
          still_favorable(released, candidate)) {
        released.emplace_back(static_cast<int>(i), modes[i]);
        modes[i] = ActivationMode::inactive;
        solution = candidate;
        committed = static_cast<int>(i);
        break;
      }
    }
    if (committed < 0) break;
    ++iter;
    if (iter >= max_iters) {
      // Iteration budget exhausted mid-resolution: fall back to the most
      // conservative set, restoring every task that entered the cycle active
      // plus every crossing one.
      for (size_t i = 0; i < tasks.size(); ++i) {
        if (tasks[i].kind != TaskKind::set_based) continue;
        if (states[i].mode != ActivationMode::inactive) {
          modes[i] = states[i].mode;
          continue;
        }
        SetBasedState probe;  // inactive
        const ActivationDecision dec = update_activation(
            tasks[i], probe, evals[i].value.vec(0), 0.0, time, policy);
        modes[i] = dec.state.mode;
      }
      solution = solve(-1);
      out.active_set_converged = false;
      std::cerr << "tpik: active-set iteration limit reached at t=" << time
                << "; keeping all crossing tasks active\n";
      break;
    }
  }

  out.states = states;
  for (size_t i = 0; i < tasks.size(); ++i) {
    if (tasks[i].kind != TaskKind::set_based) continue;
    if (modes[i] != states[i].mode) {
      out.states[i].mode = modes[i];
      out.states[i].last_transition_time = time;
      out.states[i].transition_count += 1;
    }
    SetBasedDiagnostic diag;
    diag.task_id = tasks[i].id;
    diag.value = evals[i].value.vec(0);
    diag.mode = modes[i];
    if (modes[i] != ActivationMode::inactive) {
      diag.desired = active_desired(tasks[i], out.states[i]);
    }
    diag.physical_violation = violation[i];
    out.set_based.push_back(diag);
  }

  for (size_t i = 0; i < tasks.size(); ++i) {
    if (tasks[i].kind == TaskKind::set_based &&
        modes[i] != ActivationMode::inactive) {
      solution.active_set.emplace_back(tasks[i].id, modes[i]);
    }
  }
  out.solution = std::move(solution);
  return out;
}

}  // namespace tpik
