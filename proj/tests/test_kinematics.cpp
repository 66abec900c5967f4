#include <doctest.h>

#include "oracles.hpp"
#include "tpik/config_io.hpp"
#include "tpik/kinematics.hpp"

using namespace tpik;

namespace {

KinematicChain planar_chain(int n, double link = 1.0) {
  KinematicChain chain;
  chain.name = "planar" + std::to_string(n);
  for (int i = 0; i < n; ++i) {
    JointDef j;
    j.a = link;
    j.q_min = -M_PI;
    j.q_max = M_PI;
    chain.joints.push_back(j);
  }
  return chain;
}

KinematicChain shipped_arm7() {
  return load_chain(std::string(TPIK_DATA_DIR) + "/chains/arm7.json");
}

}  // namespace

TEST_CASE("forward kinematics on the planar 2R chain") {
  const KinematicChain chain = planar_chain(2);

  Eigen::VectorXd q = Eigen::VectorXd::Zero(2);
  Pose pose = forward_kinematics(chain, q);
  CHECK(pose.position.isApprox(Eigen::Vector3d(2, 0, 0), 1e-12));

  q << M_PI / 2.0, 0.0;
  pose = forward_kinematics(chain, q);
  CHECK((pose.position - Eigen::Vector3d(0, 2, 0)).norm() < 1e-12);
}

TEST_CASE("forward kinematics matches the transform-chain oracle at zero") {
  const KinematicChain chain = shipped_arm7();
  const Eigen::VectorXd q = Eigen::VectorXd::Zero(chain.dof());

  const Eigen::Matrix4d expected = oracles::chain_matrix(chain, q);
  const Pose pose = forward_kinematics(chain, q);

  CHECK((pose.position - expected.topRightCorner<3, 1>()).norm() < 1e-12);
  CHECK((pose.orientation.toRotationMatrix() - expected.topLeftCorner<3, 3>())
            .norm() < 1e-12);
}

TEST_CASE("forward kinematics matches the transform-chain oracle at random q") {
  const KinematicChain chain = shipped_arm7();
  std::mt19937 rng(7);
  for (int s = 0; s < 20; ++s) {
    const Eigen::VectorXd q = oracles::random_config(chain, rng);
    const Eigen::Matrix4d expected = oracles::chain_matrix(chain, q);
    const Pose pose = forward_kinematics(chain, q);
    CHECK((pose.position - expected.topRightCorner<3, 1>()).norm() < 1e-12);
    CHECK((pose.orientation.toRotationMatrix() - expected.topLeftCorner<3, 3>())
              .norm() < 1e-12);
  }
}

TEST_CASE("forward kinematics rejects dimension mismatches") {
  const KinematicChain chain = planar_chain(2);
  CHECK_THROWS_AS(forward_kinematics(chain, Eigen::VectorXd::Zero(3)), ConfigError);
  Eigen::VectorXd q(2);
  q << 0.0, std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(forward_kinematics(chain, q), ConfigError);
}

TEST_CASE("geometric Jacobian of the planar 2R chain at zero") {
  const KinematicChain chain = planar_chain(2);
  const Eigen::MatrixXd jac =
      geometric_jacobian(chain, Eigen::VectorXd::Zero(2));

  // Analytic planar rows: x row [-l1 s1 - l2 s12, -l2 s12], y row
  // [l1 c1 + l2 c12, l2 c12].
  CHECK(jac.row(0).isZero(1e-12));
  CHECK((jac.row(1) - Eigen::RowVector2d(2, 1)).norm() < 1e-12);
  CHECK((jac.row(5) - Eigen::RowVector2d(1, 1)).norm() < 1e-12);
}

TEST_CASE("geometric Jacobian of a single revolute joint") {
  const KinematicChain chain = planar_chain(1);
  const Eigen::MatrixXd jac =
      geometric_jacobian(chain, Eigen::VectorXd::Zero(1));
  CHECK((jac.col(0).head<3>() - Eigen::Vector3d(0, 1, 0)).norm() < 1e-12);
  CHECK((jac.col(0).tail<3>() - Eigen::Vector3d(0, 0, 1)).norm() < 1e-12);
}

TEST_CASE("Jacobian position rows match finite differences at 100 random configurations") {
  const KinematicChain chain = shipped_arm7();
  std::mt19937 rng(11);
  double worst = 0.0;
  for (int s = 0; s < 100; ++s) {
    const Eigen::VectorXd q = oracles::random_config(chain, rng);
    const Eigen::MatrixXd jac = geometric_jacobian(chain, q).topRows(3);
    const Eigen::MatrixXd fd = oracles::fd_position_jacobian(chain, q);
    worst = std::max(worst, (jac - fd).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("manipulability of the planar 2R chain") {
  const KinematicChain chain = planar_chain(2);
  Eigen::VectorXd q(2);

  // w = l1 l2 |sin q2| on the xy rows.
  q << 0.3, M_PI / 2.0;
  CHECK(manipulability(chain, q, TaskRows::position_xy) == doctest::Approx(1.0).epsilon(1e-9));

  q << 0.7, 0.0;
  CHECK(manipulability(chain, q, TaskRows::position_xy) == doctest::Approx(0.0).epsilon(1e-12));

  std::mt19937 rng(3);
  std::uniform_real_distribution<double> dist(-M_PI, M_PI);
  for (int s = 0; s < 25; ++s) {
    q << dist(rng), dist(rng);
    const double w = manipulability(chain, q, TaskRows::position_xy);
    CHECK(w >= 0.0);
    CHECK(w == doctest::Approx(std::abs(std::sin(q(1)))).epsilon(1e-9));
  }
}

TEST_CASE("manipulability vanishes only at rank loss on the planar chain") {
  const KinematicChain chain = planar_chain(2);
  Eigen::VectorXd q(2);
  for (const double q2 : {0.0, M_PI}) {
    q << 0.4, q2;  // stretched / folded singularities
    CHECK(manipulability(chain, q, TaskRows::position_xy) < 1e-12);
  }
  for (const double q2 : {0.3, 1.0, 2.5}) {
    q << 0.4, q2;
    CHECK(manipulability(chain, q, TaskRows::position_xy) > 0.1);
  }
}

TEST_CASE("near-singular configuration of the shipped chain has manipulability around 1e-5") {
  const KinematicChain chain = shipped_arm7();
  // Almost stretched straight up; only a whisper of shoulder and elbow bend.
  Eigen::VectorXd q(7);
  q << 0.0, 8e-3, 0.0, 8e-3, 0.0, 0.0, 0.0;
  const double w = manipulability(chain, q, TaskRows::position);
  CHECK(w > 1e-6);
  CHECK(w < 1e-4);
}

TEST_CASE("manipulability is invariant under rigid re-basing") {
  const KinematicChain chain = shipped_arm7();
  std::mt19937 rng(17);
  for (int s = 0; s < 10; ++s) {
    const Eigen::VectorXd q = oracles::random_config(chain, rng);

    KinematicChain rebased = chain;
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    Pose shift;
    shift.position = Eigen::Vector3d(dist(rng), dist(rng), dist(rng));
    shift.orientation = Eigen::Quaterniond(dist(rng), dist(rng), dist(rng), dist(rng)).normalized();
    rebased.base_pose = shift * chain.base_pose;

    for (const TaskRows rows : {TaskRows::full, TaskRows::position}) {
      const double w0 = manipulability(chain, q, rows);
      const double w1 = manipulability(rebased, q, rows);
      CHECK(w1 == doctest::Approx(w0).epsilon(1e-9));
    }
  }
}

TEST_CASE("numeric manipulability Jacobian on the planar 2R chain") {
  const KinematicChain chain = planar_chain(2);
  Eigen::VectorXd q(2);
  q << 0.0, M_PI / 4.0;

  const Eigen::RowVectorXd jac =
      manipulability_jacobian_numeric(chain, q, TaskRows::position_xy);
  // dw/dq2 = l1 l2 cos q2, dw/dq1 = 0.
  CHECK(jac(1) == doctest::Approx(std::cos(M_PI / 4.0)).epsilon(1e-4));
  CHECK(std::abs(jac(0)) < 1e-9);
}

TEST_CASE("numeric manipulability Jacobian is near zero at a manipulability maximum") {
  const KinematicChain chain = planar_chain(2);
  Eigen::VectorXd q(2);
  q << 0.9, M_PI / 2.0;  // w = sin q2 peaks here
  const Eigen::RowVectorXd jac =
      manipulability_jacobian_numeric(chain, q, TaskRows::position_xy);
  CHECK(jac.cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("numeric manipulability Jacobian agrees with the central-difference oracle") {
  const KinematicChain chain = shipped_arm7();
  std::mt19937 rng(23);
  double worst = 0.0;
  for (int s = 0; s < 40; ++s) {
    const Eigen::VectorXd q = oracles::random_config(chain, rng);
    const Eigen::RowVectorXd fwd =
        manipulability_jacobian_numeric(chain, q, TaskRows::position);
    const Eigen::RowVectorXd ctr =
        oracles::central_manipulability_gradient(chain, q, TaskRows::position);
    const double denom = std::max(ctr.cwiseAbs().maxCoeff(), 1e-6);
    worst = std::max(worst, (fwd - ctr).cwiseAbs().maxCoeff() / denom);
  }
  CHECK(worst < 1e-3);
}

TEST_CASE("numeric manipulability Jacobian converges to the analytic gradient as the step shrinks") {
  const KinematicChain chain = planar_chain(2);
  Eigen::VectorXd q(2);
  q << 0.2, 0.8;
  const double analytic = std::cos(q(1));

  double prev_err = std::numeric_limits<double>::infinity();
  for (const double delta : {1e-2, 1e-3, 1e-4, 1e-5}) {
    const Eigen::RowVectorXd jac =
        manipulability_jacobian_numeric(chain, q, TaskRows::position_xy, delta);
    const double err = std::abs(jac(1) - analytic);
    CHECK(err < prev_err);
    // Forward differences: error shrinks linearly with the step.
    CHECK(err < 1.0 * delta);
    prev_err = err;
  }
}

TEST_CASE("fd_check reports the forward-difference truncation error") {
  const KinematicChain planar = planar_chain(2);
  const FdCheckReport report =
      manipulability_fd_check(planar, TaskRows::position_xy, 50, 1e-6, 42);
  CHECK(report.samples == 50);
  CHECK(report.max_relative_error < 1e-3);

  // Coarser steps must report larger errors.
  const FdCheckReport coarse =
      manipulability_fd_check(planar, TaskRows::position_xy, 50, 1e-2, 42);
  CHECK(coarse.max_relative_error > report.max_relative_error);
}

TEST_CASE("fd_check on the planar chain matches the analytic-gradient residual") {
  // Replay the sampled configurations and recompute the reported statistic
  // against the closed-form gradient dw/dq = [0, l1 l2 cos q2].
  const KinematicChain planar = planar_chain(2);
  const unsigned seed = 77;
  const double delta = 1e-6;
  const FdCheckReport report =
      manipulability_fd_check(planar, TaskRows::position_xy, 40, delta, seed);

  std::mt19937 rng(seed);
  double expected = 0.0;
  Eigen::VectorXd q(2);
  for (int s = 0; s < 40; ++s) {
    q = oracles::random_config(planar, rng);
    const Eigen::RowVectorXd fwd =
        manipulability_jacobian_numeric(planar, q, TaskRows::position_xy, delta);
    const double sign = std::sin(q(1)) >= 0.0 ? 1.0 : -1.0;
    Eigen::RowVector2d analytic(0.0, sign * std::cos(q(1)));
    const double denom = std::max(analytic.cwiseAbs().maxCoeff(), 1e-6);
    expected = std::max(expected, (fwd - analytic).cwiseAbs().maxCoeff() / denom);
  }
  CHECK(report.max_relative_error == doctest::Approx(expected).epsilon(1e-4));
}
