#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Geometry>

namespace tpik {

/// Raised when a configuration file or an operation input violates a
/// documented precondition (dimension mismatch, bad thresholds, malformed
/// field). The message names the offending entity where possible.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Rigid transform: position in meters plus unit quaternion.
struct Pose {
  Eigen::Vector3d position{Eigen::Vector3d::Zero()};
  Eigen::Quaterniond orientation{Eigen::Quaterniond::Identity()};

  Pose operator*(const Pose& rhs) const;
  [[nodiscard]] Pose inverse() const;
};

/// One revolute joint in standard (distal) Denavit-Hartenberg form.
/// Angles in radians, lengths in meters.
struct JointDef {
  double a = 0.0;
  double alpha = 0.0;
  double d = 0.0;
  double theta_offset = 0.0;
  double q_min = -M_PI;  // physical lower bound
  double q_max = M_PI;   // physical upper bound
};

/// Serial chain of revolute joints. Immutable after construction; all
/// operations on it are pure functions and thread-safe.
struct KinematicChain {
  std::string name;
  std::vector<JointDef> joints;
  Pose base_pose;
  Pose tool_offset;

  [[nodiscard]] int dof() const { return static_cast<int>(joints.size()); }

  /// Throws ConfigError unless n >= 1, every joint has q_min < q_max and all
  /// parameters are finite, and both poses carry unit quaternions.
  void validate() const;
};

/// Row selection for task Jacobians and the manipulability measure.
enum class TaskRows { position, orientation, full, position_xy };

int row_count(TaskRows rows);
Eigen::MatrixXd select_rows(const Eigen::MatrixXd& full_jacobian, TaskRows rows);

/// Tool pose in the base frame.
Pose forward_kinematics(const KinematicChain& chain, const Eigen::VectorXd& q);

/// 6 x n geometric Jacobian in the base frame: rows 0-2 map joint rates to
/// linear tool velocity, rows 3-5 to angular velocity.
Eigen::MatrixXd geometric_jacobian(const KinematicChain& chain,
                                   const Eigen::VectorXd& q);

/// sqrt(det(J J^T)) of the selected Jacobian rows, evaluated as the product
/// of singular values so near-singular configurations stay non-negative.
double manipulability(const KinematicChain& chain, const Eigen::VectorXd& q,
                      TaskRows rows);

/// Forward-difference manipulability gradient: entry i is
/// (w(q + delta e_i) - w(q)) / delta.
Eigen::RowVectorXd manipulability_jacobian_numeric(const KinematicChain& chain,
                                                   const Eigen::VectorXd& q,
                                                   TaskRows rows,
                                                   double delta_q = 1e-6);

struct FdCheckReport {
  double max_relative_error = 0.0;
  int samples = 0;
};

/// Compares the forward-difference manipulability Jacobian against a
/// central-difference evaluation at random in-bounds configurations.
FdCheckReport manipulability_fd_check(const KinematicChain& chain,
                                      TaskRows rows, int samples,
                                      double delta_q, unsigned seed);

}  // namespace tpik
