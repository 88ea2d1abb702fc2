#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "flex/qp.hpp"
#include "qp_oracle.hpp"

using flex::qp::QuadraticProgram;
using flex::qp::Status;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using flex::testing::random_strictly_convex;

namespace {

QuadraticProgram x_squared_at_least_one() {
  auto p = QuadraticProgram::with_vars(1);
  p.Q(0, 0) = 2.0;  // x^2
  p.add_ineq(VectorXd::Constant(1, -1.0), -1.0, "x>=1");
  return p;
}

}  // namespace

TEST(Qp, BindingLowerBound) {
  const auto p = x_squared_at_least_one();
  const auto sol = flex::qp::solve(p);
  ASSERT_EQ(sol.status, Status::optimal);
  EXPECT_NEAR(sol.x(0), 1.0, 1e-7);
  EXPECT_NEAR(sol.z(0), 2.0, 1e-6);
  EXPECT_LE(sol.residuals.max(), 1e-8);
}

TEST(Qp, EqualityDualBySymmetry) {
  auto p = QuadraticProgram::with_vars(2);
  p.Q.setIdentity();
  p.add_eq(VectorXd::Ones(2), 2.0, "sum");
  const auto sol = flex::qp::solve(p);
  ASSERT_EQ(sol.status, Status::optimal);
  EXPECT_NEAR(sol.x(0), 1.0, 1e-9);
  EXPECT_NEAR(sol.x(1), 1.0, 1e-9);
  EXPECT_NEAR(sol.y(0), 1.0, 1e-9);
}

TEST(Qp, FeasibleUnconstrainedOptimum) {
  auto p = QuadraticProgram::with_vars(1);
  p.Q(0, 0) = 2.0;
  p.add_eq(VectorXd::Ones(1), 0.0, "x=0");
  const auto sol = flex::qp::solve(p);
  ASSERT_EQ(sol.status, Status::optimal);
  EXPECT_NEAR(sol.x(0), 0.0, 1e-12);
  EXPECT_NEAR(sol.y(0), 0.0, 1e-12);
}

TEST(Qp, EqualityAndInequalityMix) {
  // min 1/2|x|^2 s.t. x1 + x2 = 2, x1 <= 0.5  ->  x = (0.5, 1.5), y = 1.5, z = 1.
  auto p = QuadraticProgram::with_vars(2);
  p.Q.setIdentity();
  p.add_eq(VectorXd::Ones(2), 2.0, "sum");
  VectorXd g(2);
  g << 1.0, 0.0;
  p.add_ineq(g, 0.5, "cap");
  const auto sol = flex::qp::solve(p);
  ASSERT_EQ(sol.status, Status::optimal);
  EXPECT_NEAR(sol.x(0), 0.5, 1e-7);
  EXPECT_NEAR(sol.x(1), 1.5, 1e-7);
  EXPECT_NEAR(sol.y(0), 1.5, 1e-6);
  EXPECT_NEAR(sol.z(0), 1.0, 1e-6);
}

TEST(KktResiduals, ZeroPointViolatesLowerBound) {
  const auto p = x_squared_at_least_one();
  const auto r = flex::qp::kkt_residuals(p, VectorXd::Zero(1), VectorXd::Zero(0), VectorXd::Zero(1));
  EXPECT_DOUBLE_EQ(r.primal_ineq, 1.0);
  EXPECT_DOUBLE_EQ(r.dual_stationarity, 0.0);
}

TEST(KktResiduals, SolverPointMeetsContract) {
  const auto p = x_squared_at_least_one();
  const auto sol = flex::qp::solve(p);
  const auto r = flex::qp::kkt_residuals(p, sol.x, sol.y, sol.z);
  EXPECT_LE(r.max(), 1e-8);
}

TEST(KktResiduals, StationarityGrowsLinearlyAlongFreeDirection) {
  auto p = QuadraticProgram::with_vars(2);
  p.Q.setIdentity();
  p.add_eq(VectorXd::Ones(2), 2.0, "sum");
  const auto sol = flex::qp::solve(p);
  VectorXd d(2);
  d << 1.0, -1.0;  // keeps x1 + x2 fixed
  std::vector<double> ratios;
  for (double eps : {1e-1, 1e-2, 1e-3, 1e-4}) {
    const auto r = flex::qp::kkt_residuals(p, sol.x + eps * d, sol.y, sol.z);
    EXPECT_LE(r.primal_eq, 1e-12);
    ratios.push_back(r.dual_stationarity / eps);
  }
  for (double q : ratios) EXPECT_NEAR(q, ratios.front(), 1e-6);
  EXPECT_NEAR(ratios.front(), 1.0, 1e-6);
}

TEST(Qp, InfeasibleCarriesFarkasCertificate) {
  auto p = QuadraticProgram::with_vars(1);
  p.Q(0, 0) = 1.0;
  p.add_ineq(VectorXd::Constant(1, -1.0), -1.0, "x>=1");
  p.add_ineq(VectorXd::Constant(1, 1.0), 0.0, "x<=0");
  const auto sol = flex::qp::solve(p);
  ASSERT_EQ(sol.status, Status::infeasible);
  ASSERT_TRUE(sol.certificate.has_value());
  const auto& cert = *sol.certificate;
  EXPECT_GE(cert.z.minCoeff(), 0.0);
  EXPECT_LT(cert.value, -1e-6);
  EXPECT_LE(cert.residual, 1e-6);
}

TEST(Qp, InconsistentEqualitiesAreInfeasible) {
  auto p = QuadraticProgram::with_vars(1);
  p.Q(0, 0) = 1.0;
  p.add_eq(VectorXd::Ones(1), 1.0, "x=1");
  p.add_eq(VectorXd::Ones(1), 2.0, "x=2");
  const auto sol = flex::qp::solve(p);
  EXPECT_EQ(sol.status, Status::infeasible);
  ASSERT_TRUE(sol.certificate.has_value());
  EXPECT_LT(sol.certificate->value, 0.0);
}

TEST(Qp, UnboundedReportsRay) {
  auto p = QuadraticProgram::with_vars(2);
  p.Q(0, 0) = 1.0;
  p.c(1) = -1.0;
  p.add_ineq((VectorXd(2) << 0.0, -1.0).finished(), 0.0, "x2>=0");
  const auto sol = flex::qp::solve(p);
  ASSERT_EQ(sol.status, Status::unbounded);
  ASSERT_TRUE(sol.certificate.has_value());
  EXPECT_GT(sol.certificate->ray(1), 0.5);
}

TEST(Qp, DimensionMismatchThrows) {
  auto p = QuadraticProgram::with_vars(2);
  p.G = MatrixXd::Zero(1, 3);
  p.h = VectorXd::Zero(1);
  EXPECT_THROW(flex::qp::solve(p), std::invalid_argument);
}

TEST(Qp, AsymmetricHessianRejected) {
  auto p = QuadraticProgram::with_vars(2);
  p.Q(0, 1) = 1.0;
  EXPECT_THROW(p.check(), std::invalid_argument);
}

TEST(Qp, Deterministic) {
  std::mt19937 rng(7);
  const auto p = random_strictly_convex(rng, 5, 1, 3);
  const auto a = flex::qp::solve(p);
  const auto b = flex::qp::solve(p);
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.y, b.y);
  EXPECT_EQ(a.z, b.z);
}

TEST(QpProperty, AgreesWithActiveSetEnumeration) {
  std::mt19937 rng(20240611);
  std::uniform_int_distribution<int> dn(1, 6), dmi(0, 3);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = dn(rng);
    const int me = std::uniform_int_distribution<int>(0, std::min(2, n - 1))(rng);
    const int mi = dmi(rng);
    const auto p = random_strictly_convex(rng, n, me, mi);
    const auto oracle = flex::testing::enumerate_active_sets(p);
    ASSERT_TRUE(oracle.has_value()) << "trial " << trial;
    const auto sol = flex::qp::solve(p);
    ASSERT_EQ(sol.status, Status::optimal) << "trial " << trial;
    EXPECT_LE((sol.x - oracle->x).cwiseAbs().maxCoeff(), 1e-6) << "trial " << trial;
    if (me > 0) {
      EXPECT_LE((sol.y - oracle->y).cwiseAbs().maxCoeff(), 1e-6) << "trial " << trial;
    }
    for (int i = 0; i < mi; ++i) {
      // Multipliers are unique only on nondegenerate binding rows.
      if (oracle->active[static_cast<std::size_t>(i)] && oracle->z(i) > 1e-6) {
        EXPECT_NEAR(sol.z(i), oracle->z(i), 1e-6) << "trial " << trial << " row " << i;
      }
    }
  }
}

TEST(QpProperty, DualityGapWithinTolerance) {
  std::mt19937 rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    const auto p = random_strictly_convex(rng, 4, 1, 3);
    const auto sol = flex::qp::solve(p);
    ASSERT_TRUE(sol.optimal());
    EXPECT_LE(std::abs(sol.objective - sol.dual_objective), 10 * 1e-8 * (1.0 + std::abs(sol.objective)));
  }
}

TEST(QpProperty, PrimalDualSolutionIsLipschitzInLinearTerm) {
  std::mt19937 rng(5);
  const auto base = random_strictly_convex(rng, 4, 1, 3);
  const auto s0 = flex::qp::solve(base);
  ASSERT_TRUE(s0.optimal());
  std::normal_distribution<double> N(0.0, 1.0);
  VectorXd dir(4);
  for (int i = 0; i < 4; ++i) dir(i) = N(rng);
  dir /= dir.norm();
  double worst = 0.0;
  for (double eps : {1e-1, 1e-2, 1e-3, 1e-4}) {
    auto p = base;
    p.c += eps * dir;
    const auto s = flex::qp::solve(p);
    ASSERT_TRUE(s.optimal());
    const double dxyz = std::max({(s.x - s0.x).norm(), (s.y - s0.y).norm(), (s.z - s0.z).norm()});
    worst = std::max(worst, dxyz / eps);
  }
  EXPECT_LT(worst, 1e3);
}

TEST(QpDump, ContainsLabelsAndBlocks) {
  const auto p = x_squared_at_least_one();
  std::ostringstream os;
  flex::qp::write_debug_dump(os, p);
  const auto text = os.str();
  EXPECT_NE(text.find("%ineq 1 x>=1"), std::string::npos);
  EXPECT_NE(text.find("Q 1 1 1"), std::string::npos);
  EXPECT_NE(text.find("G 1 1 1\n1 1 -1"), std::string::npos);
}
