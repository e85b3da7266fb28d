#include "rta/qp_solver.hpp"

#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"

namespace rta {
namespace {

QpProblem BoxOnly(const Eigen::VectorXd& u_des, double lim) {
  const Eigen::Index n = u_des.size();
  QpProblem qp;
  qp.H = 2.0 * Eigen::MatrixXd::Identity(n, n);
  qp.f_lin = -2.0 * u_des;
  qp.G = Eigen::MatrixXd::Zero(2 * n, n);
  qp.g_lb = Eigen::VectorXd::Constant(2 * n, -lim);
  for (Eigen::Index j = 0; j < n; ++j) {
    qp.G(2 * j, j) = 1.0;
    qp.G(2 * j + 1, j) = -1.0;
  }
  return qp;
}

GTEST_TEST(AdmmQpSolver, ProjectionInsideBox) {
  Eigen::VectorXd u_des(6);
  u_des << 0.3, -0.2, 0.9, 0.0, 0.5, -0.99;
  const QpResult r = AdmmQpSolver().solve(BoxOnly(u_des, 1.0));
  EXPECT_EQ(r.status, QpStatus::Optimal);
  EXPECT_LT((r.x - u_des).cwiseAbs().maxCoeff(), 1e-12);
}

GTEST_TEST(AdmmQpSolver, ProjectionOutsideBoxClips) {
  Eigen::VectorXd u_des(3);
  u_des << 3.0, -0.2, -7.0;
  const QpResult r = AdmmQpSolver().solve(BoxOnly(u_des, 1.0));
  EXPECT_EQ(r.status, QpStatus::Optimal);
  EXPECT_LT((r.x - Eigen::Vector3d(1.0, -0.2, -1.0)).cwiseAbs().maxCoeff(), 1e-9);
}

GTEST_TEST(AdmmQpSolver, SingleActiveRow) {
  QpProblem qp;
  qp.H = Eigen::MatrixXd::Constant(1, 1, 2.0);
  qp.f_lin = Eigen::VectorXd::Constant(1, -2.0);
  qp.G = Eigen::MatrixXd::Constant(1, 1, -1.0);  // -u >= 0
  qp.g_lb = Eigen::VectorXd::Zero(1);
  const QpResult r = AdmmQpSolver().solve(qp);
  EXPECT_EQ(r.status, QpStatus::Optimal);
  EXPECT_NEAR(r.x[0], 0.0, 1e-9);
  EXPECT_NEAR(r.lambda[0], 2.0, 1e-8);
}

GTEST_TEST(AdmmQpSolver, WithoutPolishingStillConverges) {
  QpSettings st;
  st.polish = false;
  std::mt19937_64 rng(3);
  const AdmmQpSolver solver(st);
  for (int i = 0; i < 50; ++i) {
    const QpProblem qp = oracle::random_asif_qp(rng, 1.0);
    const QpResult r = solver.solve(qp);
    const oracle::ActiveSetResult ref = oracle::active_set_qp(qp);
    ASSERT_TRUE(ref.feasible);
    if (r.status != QpStatus::Optimal) continue;
    EXPECT_LT((r.x.head<6>() - ref.x.head<6>()).cwiseAbs().maxCoeff(), 1e-3);
  }
}

GTEST_TEST(AdmmQpSolver, MatchesActiveSetOracle) {
  std::mt19937_64 rng(11);
  const AdmmQpSolver solver;
  int optimal = 0;
  for (int i = 0; i < 500; ++i) {
    const QpProblem qp = oracle::random_asif_qp(rng);
    const QpResult r = solver.solve(qp);
    const oracle::ActiveSetResult ref = oracle::active_set_qp(qp);
    ASSERT_TRUE(ref.feasible);
    EXPECT_LT((r.x.head<6>() - ref.x.head<6>()).cwiseAbs().maxCoeff(), 1e-5) << "problem " << i;
    if (r.status == QpStatus::Optimal) {
      ++optimal;
      EXPECT_LT(oracle::kkt_certificate(qp, r.x, r.lambda).worst(), 1e-5) << "problem " << i;
      // The hard row never relies on a slack.
      EXPECT_GE(qp.G.row(0).dot(r.x) - qp.g_lb[0], -1e-6);
    }
  }
  EXPECT_EQ(optimal, 500);
}

double Objective(const QpProblem& qp, const Eigen::VectorXd& x) {
  return 0.5 * x.dot(qp.H * x) + qp.f_lin.dot(x);
}

// Rows that cannot all hold at once: the optimum pays for slack.
GTEST_TEST(AdmmQpSolver, ConflictingRowsModerateWeightMatchOracle) {
  std::mt19937_64 rng(16);
  const AdmmQpSolver solver;
  for (int i = 0; i < 300; ++i) {
    const QpProblem qp = oracle::random_asif_qp(rng, 100.0, true);
    const QpResult r = solver.solve(qp);
    const oracle::ActiveSetResult ref = oracle::active_set_qp(qp);
    ASSERT_TRUE(ref.feasible);
    ASSERT_EQ(r.status, QpStatus::Optimal) << "problem " << i;
    EXPECT_LT((r.x.head<6>() - ref.x.head<6>()).cwiseAbs().maxCoeff(), 1e-5) << "problem " << i;
  }
}

// At w = 1e12 with slack in play the multipliers reach 1e11 and u is only
// resolved to round-off of the objective, so optimality is compared through
// the objective value instead of u.
GTEST_TEST(AdmmQpSolver, ConflictingRowsFullWeightAreOptimal) {
  std::mt19937_64 rng(17);
  const AdmmQpSolver solver;
  int relaxed = 0;
  for (int i = 0; i < 300; ++i) {
    const QpProblem qp = oracle::random_asif_qp(rng, 1e12, true);
    const QpResult r = solver.solve(qp);
    ASSERT_EQ(r.status, QpStatus::Optimal) << "problem " << i;
    EXPECT_LT(oracle::kkt_certificate(qp, r.x, r.lambda).worst(), 1e-9) << "problem " << i;
    EXPECT_GE(qp.G.row(0).dot(r.x) - qp.g_lb[0], -1e-6);
    if (r.x.tail(qp.num_vars() - 6).cwiseAbs().maxCoeff() > 1e-9) ++relaxed;
    const oracle::ActiveSetResult ref = oracle::active_set_qp(qp);
    if (!ref.feasible || oracle::kkt_certificate(qp, ref.x, ref.lambda).worst() > 1e-9) continue;
    const double f_ref = Objective(qp, ref.x);
    EXPECT_LE(Objective(qp, r.x), f_ref + 1e-12 * (1.0 + std::abs(f_ref))) << "problem " << i;
  }
  EXPECT_GT(relaxed, 150);
}

GTEST_TEST(AdmmQpSolver, OracleSatisfiesItsOwnKkt) {
  std::mt19937_64 rng(12);
  for (int i = 0; i < 100; ++i) {
    const QpProblem qp = oracle::random_asif_qp(rng);
    const oracle::ActiveSetResult ref = oracle::active_set_qp(qp);
    EXPECT_LT(oracle::kkt_certificate(qp, ref.x, ref.lambda).worst(), 1e-8);
  }
}

GTEST_TEST(AdmmQpSolver, WarmStartReproducesSolution) {
  std::mt19937_64 rng(13);
  const AdmmQpSolver solver;
  for (int i = 0; i < 50; ++i) {
    const QpProblem qp = oracle::random_asif_qp(rng);
    const QpResult cold = solver.solve(qp);
    const QpWarmStart warm{cold.x, cold.lambda};
    const QpResult hot = solver.solve(qp, &warm);
    EXPECT_EQ(hot.iterations, 0);
    EXPECT_LT((hot.x - cold.x).cwiseAbs().maxCoeff(), 1e-9);
  }
}

GTEST_TEST(AdmmQpSolver, Deterministic) {
  std::mt19937_64 rng(14);
  const AdmmQpSolver solver;
  for (int i = 0; i < 20; ++i) {
    const QpProblem qp = oracle::random_asif_qp(rng);
    const QpResult a = solver.solve(qp);
    const QpResult b = solver.solve(qp);
    EXPECT_TRUE(a.x == b.x);
    EXPECT_TRUE(a.lambda == b.lambda);
    EXPECT_EQ(a.iterations, b.iterations);
  }
}

// Raising every slack weight tenfold never grows the total squared slack.
// Individual slacks can grow: with u >= 1 - d1 and u <= d2 the optimum is
// u = d2 = w / (1 + 2w), increasing in w.
GTEST_TEST(AdmmQpSolver, SlackMonotoneInWeight) {
  std::mt19937_64 rng(15);
  const AdmmQpSolver solver;
  int relaxed = 0;
  for (int i = 0; i < 100; ++i) {
    QpProblem qp = oracle::random_asif_qp(rng, 10.0, true);
    const QpResult lo = solver.solve(qp);
    for (Eigen::Index j = 6; j < qp.num_vars(); ++j) qp.H(j, j) *= 10.0;
    const QpResult hi = solver.solve(qp);
    ASSERT_EQ(lo.status, QpStatus::Optimal);
    ASSERT_EQ(hi.status, QpStatus::Optimal);
    const double p_lo = lo.x.tail(qp.num_vars() - 6).squaredNorm();
    const double p_hi = hi.x.tail(qp.num_vars() - 6).squaredNorm();
    if (p_lo > 1e-12) ++relaxed;
    EXPECT_LE(p_hi, p_lo * (1.0 + 1e-9) + 1e-15) << "problem " << i;
  }
  EXPECT_GT(relaxed, 50);
}

GTEST_TEST(AdmmQpSolver, SingleSlackShrinksWithWeight) {
  // min u^2 + w d^2 s.t. u >= 1 - d: d = 1 / (1 + w).
  QpProblem qp;
  qp.H = Eigen::Matrix2d{{2.0, 0.0}, {0.0, 2.0}};
  qp.f_lin = Eigen::Vector2d::Zero();
  qp.G = Eigen::RowVector2d(1.0, 1.0);
  qp.g_lb = Eigen::VectorXd::Constant(1, 1.0);
  double prev = 1.0;
  for (double w : {1.0, 10.0, 100.0, 1e6, 1e12}) {
    qp.H(1, 1) = 2.0 * w;
    const QpResult r = AdmmQpSolver().solve(qp);
    ASSERT_EQ(r.status, QpStatus::Optimal);
    EXPECT_NEAR(r.x[1], 1.0 / (1.0 + w), 1e-12);
    EXPECT_LT(r.x[1], prev);
    prev = r.x[1];
  }
}

GTEST_TEST(AdmmQpSolver, RejectsBadInput) {
  QpProblem qp = BoxOnly(Eigen::VectorXd::Zero(2), 1.0);
  qp.f_lin[0] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(AdmmQpSolver().solve(qp), NonFiniteInput);
  qp.f_lin.resize(3);
  qp.f_lin.setZero();
  EXPECT_THROW(AdmmQpSolver().solve(qp), Error);
}

GTEST_TEST(KktResiduals, ReportsViolation) {
  const QpProblem qp = BoxOnly(Eigen::VectorXd::Zero(1), 1.0);
  Eigen::VectorXd x(1), lam = Eigen::VectorXd::Zero(2);
  x << 2.0;
  const QpResiduals r = kkt_residuals(qp, x, lam);
  EXPECT_NEAR(r.primal, 1.0, 1e-15);
  EXPECT_NEAR(r.dual, 4.0, 1e-15);
}

}  // namespace
}  // namespace rta
