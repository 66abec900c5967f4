#include "tpik/kinematics.hpp"

#include <random>

#include <Eigen/SVD>

namespace tpik {

namespace {

// Transform of one joint: Rz(theta) Tz(d) Tx(a) Rx(alpha).
Pose dh_transform(const JointDef& joint, double q) {
  const double theta = q + joint.theta_offset;
  const Eigen::Quaterniond rot_z(Eigen::AngleAxisd(theta, Eigen::Vector3d::UnitZ()));
  const Eigen::Quaterniond rot_x(Eigen::AngleAxisd(joint.alpha, Eigen::Vector3d::UnitX()));
  Pose out;
  out.position = Eigen::Vector3d(0, 0, joint.d) + rot_z * Eigen::Vector3d(joint.a, 0, 0);
  out.orientation = (rot_z * rot_x).normalized();
  return out;
}

void check_dimension(const KinematicChain& chain, const Eigen::VectorXd& q) {
  if (q.size() != chain.dof()) {
    throw ConfigError("chain '" + chain.name + "': joint vector has " +
                      std::to_string(q.size()) + " entries, expected " +
                      std::to_string(chain.dof()));
  }
  if (!q.allFinite()) {
    throw ConfigError("chain '" + chain.name + "': joint vector contains non-finite entries");
  }
}

}  // namespace

Pose Pose::operator*(const Pose& rhs) const {
  Pose out;
  out.position = position + orientation * rhs.position;
  out.orientation = (orientation * rhs.orientation).normalized();
  return out;
}

Pose Pose::inverse() const {
  Pose out;
  out.orientation = orientation.conjugate();
  out.position = -(out.orientation * position);
  return out;
}

void KinematicChain::validate() const {
  if (joints.empty()) {
    throw ConfigError("chain '" + name + "': needs at least one joint");
  }
  for (size_t i = 0; i < joints.size(); ++i) {
    const JointDef& j = joints[i];
    const bool finite = std::isfinite(j.a) && std::isfinite(j.alpha) &&
                        std::isfinite(j.d) && std::isfinite(j.theta_offset) &&
                        std::isfinite(j.q_min) && std::isfinite(j.q_max);
    if (!finite) {
      throw ConfigError("chain '" + name + "': joint " + std::to_string(i + 1) +
                        " has non-finite parameters");
    }
    if (!(j.q_min < j.q_max)) {
      throw ConfigError("chain '" + name + "': joint " + std::to_string(i + 1) +
                        " needs q_min < q_max");
    }
  }
  if (std::abs(base_pose.orientation.norm() - 1.0) > 1e-9 ||
      std::abs(tool_offset.orientation.norm() - 1.0) > 1e-9) {
    throw ConfigError("chain '" + name + "': pose quaternions must have unit norm");
  }
}

int row_count(TaskRows rows) {
  switch (rows) {
    case TaskRows::position: return 3;
    case TaskRows::orientation: return 3;
    case TaskRows::full: return 6;
    case TaskRows::position_xy: return 2;
  }
  throw std::logic_error("unknown TaskRows value");
}

Eigen::MatrixXd select_rows(const Eigen::MatrixXd& full_jacobian, TaskRows rows) {
  switch (rows) {
    case TaskRows::position: return full_jacobian.topRows(3);
    case TaskRows::orientation: return full_jacobian.bottomRows(3);
    case TaskRows::full: return full_jacobian;
    case TaskRows::position_xy: return full_jacobian.topRows(2);
  }
  throw std::logic_error("unknown TaskRows value");
}

Pose forward_kinematics(const KinematicChain& chain, const Eigen::VectorXd& q) {
  check_dimension(chain, q);
  Pose pose = chain.base_pose;
  for (int i = 0; i < chain.dof(); ++i) {
    pose = pose * dh_transform(chain.joints[i], q(i));
  }
  return pose * chain.tool_offset;
}

Eigen::MatrixXd geometric_jacobian(const KinematicChain& chain,
                                   const Eigen::VectorXd& q) {
  check_dimension(chain, q);
  const int n = chain.dof();

  std::vector<Eigen::Vector3d> axes(n);
  std::vector<Eigen::Vector3d> origins(n);
  Pose pose = chain.base_pose;
  for (int i = 0; i < n; ++i) {
    axes[i] = pose.orientation * Eigen::Vector3d::UnitZ();
    origins[i] = pose.position;
    pose = pose * dh_transform(chain.joints[i], q(i));
  }
  const Eigen::Vector3d tool = (pose * chain.tool_offset).position;

  Eigen::MatrixXd jac(6, n);
  for (int i = 0; i < n; ++i) {
    jac.col(i).head<3>() = axes[i].cross(tool - origins[i]);
    jac.col(i).tail<3>() = axes[i];
  }
  return jac;
}

double manipulability(const KinematicChain& chain, const Eigen::VectorXd& q,
                      TaskRows rows) {
  const Eigen::MatrixXd jac = select_rows(geometric_jacobian(chain, q), rows);
  if (jac.rows() > jac.cols()) {
    throw ConfigError("chain '" + chain.name +
                      "': manipulability needs task rows <= DOF");
  }
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(jac);
  double w = 1.0;
  for (int i = 0; i < svd.singularValues().size(); ++i) {
    w *= svd.singularValues()(i);
  }
  return w;
}

Eigen::RowVectorXd manipulability_jacobian_numeric(const KinematicChain& chain,
                                                   const Eigen::VectorXd& q,
                                                   TaskRows rows,
                                                   double delta_q) {
  if (!(delta_q > 0.0)) {
    throw ConfigError("manipulability Jacobian: delta_q must be positive");
  }
  const int n = chain.dof();
  const double w0 = manipulability(chain, q, rows);
  Eigen::RowVectorXd jac(n);
  Eigen::VectorXd q_inc = q;
  for (int i = 0; i < n; ++i) {
    q_inc(i) = q(i) + delta_q;
    jac(i) = (manipulability(chain, q_inc, rows) - w0) / delta_q;
    q_inc(i) = q(i);
  }
  return jac;
}

FdCheckReport manipulability_fd_check(const KinematicChain& chain,
                                      TaskRows rows, int samples,
                                      double delta_q, unsigned seed) {
  std::mt19937 rng(seed);
  const int n = chain.dof();
  const double central_delta = 1e-7;

  FdCheckReport report;
  report.samples = samples;
  Eigen::VectorXd q(n);
  for (int s = 0; s < samples; ++s) {
    for (int i = 0; i < n; ++i) {
      std::uniform_real_distribution<double> dist(chain.joints[i].q_min,
                                                  chain.joints[i].q_max);
      q(i) = dist(rng);
    }
    const Eigen::RowVectorXd forward =
        manipulability_jacobian_numeric(chain, q, rows, delta_q);

    Eigen::RowVectorXd central(n);
    Eigen::VectorXd q_pert = q;
    for (int i = 0; i < n; ++i) {
      q_pert(i) = q(i) + central_delta;
      const double w_plus = manipulability(chain, q_pert, rows);
      q_pert(i) = q(i) - central_delta;
      const double w_minus = manipulability(chain, q_pert, rows);
      q_pert(i) = q(i);
      central(i) = (w_plus - w_minus) / (2.0 * central_delta);
    }

    const double denom = std::max(central.cwiseAbs().maxCoeff(), 1e-6);
    const double err = (forward - central).cwiseAbs().maxCoeff() / denom;
    report.max_relative_error = std::max(report.max_relative_error, err);
  }
  return report;
}

}  // namespace tpik
