#include "rta/baseline_ctrl.hpp"

#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"

namespace rta {
namespace {

GTEST_TEST(Lqr, DoubleIntegratorMatchesAnalyticGain) {
  // Per axis: x'' = u, Q = I, R = 1 gives K = [1, sqrt(3)].
  const Mat6 A = cw_a_matrix(0.0);
  const Mat63 B = cw_b_matrix(1.0);
  Mat36 K0;
  K0 << Mat3::Identity(), 2.0 * Mat3::Identity();
  const LqrSolution sol = solve_lqr(A, B, Mat6::Identity(), Mat3::Identity(), K0);
  Mat36 expect;
  expect << Mat3::Identity(), std::sqrt(3.0) * Mat3::Identity();
  EXPECT_LT((sol.K - expect).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LT(care_residual(A, B, Mat6::Identity(), Mat3::Identity(), sol.P).cwiseAbs().maxCoeff(),
            1e-8);
}

GTEST_TEST(Lqr, DefaultGainStabilizesAndSolvesRiccati) {
  const VehicleParams vp;
  const LqrParams lp;
  const Mat6 A = cw_a_matrix(vp.mean_motion);
  const Mat63 B = cw_b_matrix(vp.mass);
  Mat36 K0;
  K0.leftCols<3>() = vp.mass * (A.bottomLeftCorner<3, 3>() + 0.01 * Mat3::Identity());
  K0.rightCols<3>() = vp.mass * (A.bottomRightCorner<3, 3>() + 0.2 * Mat3::Identity());
  const LqrSolution sol = solve_lqr(A, B, lp.Q, lp.R, K0);
  EXPECT_LT(care_residual(A, B, lp.Q, lp.R, sol.P).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LT(Eigen::EigenSolver<Mat6>(A - B * sol.K).eigenvalues().real().maxCoeff(), 0.0);
  EXPECT_EQ(lqr_gain(lp, vp), sol.K);
  // P is symmetric positive definite.
  EXPECT_GT(Eigen::SelfAdjointEigenSolver<Mat6>(sol.P).eigenvalues().minCoeff(), 0.0);
}

GTEST_TEST(Lqr, RandomWeightsMeetResidual) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const VehicleParams vp;
  for (int trial = 0; trial < 20; ++trial) {
    Mat6 M = Mat6::NullaryExpr([&] { return u(rng); });
    Mat3 N = Mat3::NullaryExpr([&] { return u(rng); });
    LqrParams lp;
    lp.Q = M * M.transpose() * 0.1 + 1e-3 * Mat6::Identity();
    lp.R = N * N.transpose() + 0.5 * Mat3::Identity();
    const Mat36 K = lqr_gain(lp, vp);
    const Mat6 A = cw_a_matrix(vp.mean_motion);
    const Mat63 B = cw_b_matrix(vp.mass);
    EXPECT_LT(Eigen::EigenSolver<Mat6>(A - B * K).eigenvalues().real().maxCoeff(), 0.0);
    // Stationarity of the cost: K = R^-1 B^T P with P from the residual-free solve.
    const Mat6 P = solve_lyapunov(A - B * K, lp.Q + K.transpose() * lp.R * K);
    EXPECT_LT(care_residual(A, B, lp.Q, lp.R, P).cwiseAbs().maxCoeff(),
              1e-8 * (1.0 + P.cwiseAbs().maxCoeff()));
  }
}

GTEST_TEST(Lqr, RejectsBadWeights) {
  LqrParams lp;
  lp.R = -Mat3::Identity();
  EXPECT_THROW(lqr_gain(lp), RiccatiDivergence);
  lp = LqrParams{};
  lp.Q(0, 0) = -1.0;
  EXPECT_THROW(lqr_gain(lp), RiccatiDivergence);
  // Unstable seed.
  EXPECT_THROW(solve_lqr(cw_a_matrix(0.0), cw_b_matrix(1.0), Mat6::Identity(), Mat3::Identity(),
                         Mat36::Zero()),
               RiccatiDivergence);
}

GTEST_TEST(Lqr, LyapunovSolveSatisfiesEquation) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Mat6 A = Mat6::NullaryExpr([&] { return u(rng); }) - 4.0 * Mat6::Identity();
  Mat6 C = Mat6::NullaryExpr([&] { return u(rng); });
  C = C * C.transpose();
  const Mat6 X = solve_lyapunov(A, C);
  EXPECT_LT((X * A + A.transpose() * X + C).cwiseAbs().maxCoeff(), 1e-12);
}

GTEST_TEST(LqrForce, ClampedAndInBodyFrame) {
  const VehicleParams vp;
  const LqrParams lp;
  const Mat36 K = lqr_gain(lp, vp);
  SimState s;
  s.p = Vec3(0.5, 0, 0);
  s.q = Quaternion::from_axis_angle(Vec3::UnitZ(), 0.5 * std::numbers::pi);
  const Vec3 f = lqr_force(s, K, lp, vp);
  Vec6 e;
  e << s.p, s.v;
  const Vec3 hill = -K * e;
  EXPECT_LT((quat_rotate(s.q, f) - hill).norm(), 1e-15);
  s.p = Vec3(1e5, -1e5, 1e5);
  const Vec3 big = lqr_force(s, K, lp, vp);
  EXPECT_LE(big.cwiseAbs().maxCoeff(), vp.thrust_max);
}

GTEST_TEST(Pd, ZeroAtTarget) {
  PdParams pd;
  pd.target_q = Quaternion::from_axis_angle(Vec3(1, 2, 3).normalized(), 0.7);
  SimState s;
  s.q = pd.target_q;
  EXPECT_EQ(pd_attitude(s, pd).norm(), 0.0);
}

GTEST_TEST(Pd, SmallAngleOpposesError) {
  PdParams pd;
  pd.target_q = Quaternion::from_axis_angle(Vec3(0, 1, 1).normalized(), 1.1);
  for (int axis = 0; axis < 3; ++axis) {
    const double theta = 0.01;
    SimState s;
    s.q = pd.target_q * Quaternion::from_axis_angle(Vec3::Unit(axis), theta);
    const Vec3 tau = pd_attitude(s, pd);
    // sin(theta/2) = theta/2 - theta^3/48 + ...
    EXPECT_NEAR(tau[axis], -pd.kp * theta / 2.0, pd.kp * theta * theta * theta / 40.0);
    EXPECT_NEAR(tau[axis], -pd.kp * std::sin(theta / 2.0), 1e-16);
    EXPECT_NEAR(tau.norm(), std::abs(tau[axis]), 1e-15);
  }
}

GTEST_TEST(Pd, SignFlipInvariantAndBoxed) {
  std::mt19937_64 rng(5);
  PdParams pd;
  pd.target_q = oracle::random_unit_quaternion(rng);
  const VehicleParams vp;
  for (int k = 0; k < 500; ++k) {
    SimState s;
    s.q = oracle::random_unit_quaternion(rng);
    s.omega = 0.05 * oracle::random_direction(rng);
    SimState flipped = s;
    flipped.q = Quaternion(-s.q.v, -s.q.s);
    const Vec3 a = pd_attitude(s, pd, vp);
    EXPECT_EQ(a, pd_attitude(flipped, pd, vp));
    EXPECT_LE(a.cwiseAbs().maxCoeff(), vp.torque_max);
  }
}

GTEST_TEST(Pointing, AlignsAxis) {
  std::mt19937_64 rng(6);
  for (int k = 0; k < 200; ++k) {
    const Vec3 axis = oracle::random_direction(rng);
    const Vec3 dir = oracle::random_direction(rng);
    EXPECT_LT((quat_rotate(pointing_quaternion(axis, dir), axis) - dir).norm(), 1e-12);
  }
  EXPECT_LT((quat_rotate(pointing_quaternion(Vec3::UnitX(), -Vec3::UnitX()), Vec3::UnitX()) +
             Vec3::UnitX())
                .norm(),
            1e-12);
}

Observation SampleObs() {
  Observation o{};
  for (std::size_t i = 0; i < kObsSize; ++i) o[i] = std::sin(1.0 + 0.37 * static_cast<double>(i)) / 3.0;
  return o;
}

constexpr const char* kZeroStub =
    "read h; echo '{\"v\":1}'; while read l; do echo '{\"F\":[0,0,0],\"tau\":[0,0,0]}'; done";

GTEST_TEST(Bridge, ZeroStubReturnsZero) {
  ExternalPolicy p(kZeroStub);
  SimState s;
  for (int k = 0; k < 20; ++k) {
    const ControlInput u = p.act(s, SampleObs());
    EXPECT_EQ(u.force, Vec3::Zero());
    EXPECT_EQ(u.torque, Vec3::Zero());
  }
}

GTEST_TEST(Bridge, ObservationRoundTrip) {
  const Observation o = SampleObs();
  const std::string line = observation_record(123.0, o).dump();
  EXPECT_EQ(parse_observation_record(line), o);
  // Through the child: the stub echoes the first three observation values as F.
  const std::string echo =
      "read h; echo '{\"v\":1}'; while read l; do echo \"$l\" | sed -E "
      "'s/^\\{\"obs\":\\[([^,]*),([^,]*),([^,]*),.*$/{\"F\":[\\1,\\2,\\3],\"tau\":[0,0,0]}/'; "
      "done";
  ExternalPolicy p(echo);
  SimState s;
  const ControlInput u = p.act(s, o);
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(u.force[k], o[static_cast<std::size_t>(k)], 1e-12);
}

GTEST_TEST(Bridge, MalformedActionRejected) {
  ExternalPolicy p("read h; echo '{\"v\":1}'; read l; echo 'not json'; read l; echo '{\"F\":[1,2]}'");
  SimState s;
  EXPECT_THROW(p.act(s, SampleObs()), MalformedAction);
  EXPECT_THROW(p.act(s, SampleObs()), MalformedAction);
}

GTEST_TEST(Bridge, BadHandshakeRejected) {
  EXPECT_THROW(ExternalPolicy("read h; echo '{\"v\":2}'"), MalformedAction);
  EXPECT_THROW(ExternalPolicy("exit 0"), MalformedAction);
}

GTEST_TEST(Bridge, SilentPolicyTimesOut) {
  ExternalPolicy p("read h; echo '{\"v\":1}'; sleep 5", 0.2);
  SimState s;
  EXPECT_THROW(p.act(s, SampleObs()), BridgeTimeout);
}

}  // namespace
}  // namespace rta
