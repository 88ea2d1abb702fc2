#pragma once

// Test-only reference solver: enumerates every active set of a small strictly
// convex QP and returns the unique feasible KKT point. Independent of the
// interior point path in flex/qp.hpp.

#include <Eigen/Dense>

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "flex/qp.hpp"

namespace flex::testing {

struct OracleSolution {
  Eigen::VectorXd x;
  Eigen::VectorXd y;
  Eigen::VectorXd z;
  std::vector<bool> active;
};

inline std::optional<OracleSolution> enumerate_active_sets(const qp::QuadraticProgram& p, double tol = 1e-9) {
  using Eigen::MatrixXd;
  using Eigen::VectorXd;
  const auto n = p.num_vars();
  const auto me = p.num_eq();
  const auto mi = p.num_ineq();
  std::optional<OracleSolution> best;
  for (unsigned mask = 0; mask < (1u << mi); ++mask) {
    std::vector<Eigen::Index> act;
    for (Eigen::Index i = 0; i < mi; ++i)
      if (mask & (1u << i)) act.push_back(i);
    const auto ma = static_cast<Eigen::Index>(act.size());
    // Q x - A'y + G_S' z_S = -c ;  A x = b ;  G_S x = h_S
    MatrixXd K = MatrixXd::Zero(n + me + ma, n + me + ma);
    VectorXd rhs = VectorXd::Zero(n + me + ma);
    K.topLeftCorner(n, n) = p.Q;
    K.block(0, n, n, me) = -p.A.transpose();
    K.block(n, 0, me, n) = p.A;
    for (Eigen::Index k = 0; k < ma; ++k) {
      K.block(0, n + me + k, n, 1) = p.G.row(act[k]).transpose();
      K.block(n + me + k, 0, 1, n) = p.G.row(act[k]);
      rhs(n + me + k) = p.h(act[k]);
    }
    rhs.head(n) = -p.c;
    rhs.segment(n, me) = p.b;
    Eigen::FullPivLU<MatrixXd> lu(K);
    if (!lu.isInvertible()) continue;
    const VectorXd sol = lu.solve(rhs);
    const VectorXd x = sol.head(n);
    const VectorXd zs = sol.tail(ma);
    if (mi > 0 && (p.G * x - p.h).maxCoeff() > tol) continue;
    if (ma > 0 && zs.minCoeff() < -tol) continue;
    OracleSolution o;
    o.x = x;
    o.y = sol.segment(n, me);
    o.z = VectorXd::Zero(mi);
    o.active.assign(static_cast<std::size_t>(mi), false);
    for (Eigen::Index k = 0; k < ma; ++k) {
      o.z(act[k]) = zs(k);
      o.active[static_cast<std::size_t>(act[k])] = true;
    }
    best = std::move(o);
    break;
  }
  return best;
}

/// Strictly convex QP with n variables, me equalities and mi inequalities,
/// all satisfied by a random interior point.
inline qp::QuadraticProgram random_strictly_convex(std::mt19937& rng, int n, int me, int mi) {
  std::normal_distribution<double> N(0.0, 1.0);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  auto p = qp::QuadraticProgram::with_vars(n);
  Eigen::MatrixXd M(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) M(i, j) = N(rng);
  p.Q = M.transpose() * M + 0.5 * Eigen::MatrixXd::Identity(n, n);
  p.Q = 0.5 * (p.Q + p.Q.transpose()).eval();
  for (int i = 0; i < n; ++i) p.c(i) = 3.0 * N(rng);
  Eigen::VectorXd x0(n);
  for (int i = 0; i < n; ++i) x0(i) = N(rng);
  for (int k = 0; k < me; ++k) {
    Eigen::VectorXd row(n);
    for (int i = 0; i < n; ++i) row(i) = N(rng);
    p.add_eq(row, row.dot(x0), "eq" + std::to_string(k));
  }
  for (int k = 0; k < mi; ++k) {
    Eigen::VectorXd row(n);
    for (int i = 0; i < n; ++i) row(i) = N(rng);
    p.add_ineq(row, row.dot(x0) + U(rng), "in" + std::to_string(k));
  }
  return p;
}

}  // namespace flex::testing
