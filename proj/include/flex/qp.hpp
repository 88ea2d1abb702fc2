#pragma once

// Dense convex quadratic programming with primal-dual solution recovery.
//
//   minimize    1/2 x'Qx + c'x
//   subject to  A x  = b      (multipliers y, signed)
//               G x <= h      (multipliers z >= 0)
//
// Multiplier convention: stationarity reads  Qx + c - A'y + G'z = 0.
// With this convention the multiplier of "x1 + x2 = 2" in
// min 1/2|x|^2 is +1, and the multiplier of a binding ">=" row written as
// "-g(x) <= -r" is the usual nonnegative shadow price of raising r.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "flex/errors.hpp"

namespace flex::qp {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct QuadraticProgram {
  MatrixXd Q;
  VectorXd c;
  MatrixXd A;
  VectorXd b;
  MatrixXd G;
  VectorXd h;
  std::vector<std::string> var_labels;
  std::vector<std::string> eq_labels;
  std::vector<std::string> ineq_labels;

  Eigen::Index num_vars() const { return c.size(); }
  Eigen::Index num_eq() const { return b.size(); }
  Eigen::Index num_ineq() const { return h.size(); }

  /// Empty program with n variables and no constraints.
  static QuadraticProgram with_vars(Eigen::Index n) {
    QuadraticProgram qp;
    qp.Q = MatrixXd::Zero(n, n);
    qp.c = VectorXd::Zero(n);
    qp.A.resize(0, n);
    qp.b.resize(0);
    qp.G.resize(0, n);
    qp.h.resize(0);
    qp.var_labels.resize(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) qp.var_labels[static_cast<std::size_t>(i)] = "x" + std::to_string(i);
    return qp;
  }

  /// Throws std::invalid_argument on the first violated invariant.
  void check() const {
    const auto n = c.size();
    if (Q.rows() != n || Q.cols() != n) throw std::invalid_argument("qp: Q must be n x n");
    if (A.cols() != n || A.rows() != b.size()) throw std::invalid_argument("qp: A/b dimension mismatch");
    if (G.cols() != n || G.rows() != h.size()) throw std::invalid_argument("qp: G/h dimension mismatch");
    if ((Q - Q.transpose()).cwiseAbs().maxCoeff() > 1e-12 && n > 0)
      throw std::invalid_argument("qp: Q is not symmetric");
    auto check_labels = [](const std::vector<std::string>& labels, Eigen::Index expect, const char* what) {
      if (labels.empty()) return;
      if (static_cast<Eigen::Index>(labels.size()) != expect)
        throw std::invalid_argument(std::string("qp: wrong number of ") + what + " labels");
      std::set<std::string> seen(labels.begin(), labels.end());
      if (seen.size() != labels.size()) throw std::invalid_argument(std::string("qp: duplicate ") + what + " label");
    };
    check_labels(var_labels, n, "variable");
    check_labels(eq_labels, b.size(), "equality");
    check_labels(ineq_labels, h.size(), "inequality");
  }

  /// Appends an equality row; returns its index.
  Eigen::Index add_eq(const VectorXd& row, double rhs, std::string label) {
    const auto r = A.rows();
    A.conservativeResize(r + 1, c.size());
    A.row(r) = row.transpose();
    b.conservativeResize(r + 1);
    b(r) = rhs;
    eq_labels.push_back(std::move(label));
    return r;
  }

  /// Appends an inequality row (row' x <= rhs); returns its index.
  Eigen::Index add_ineq(const VectorXd& row, double rhs, std::string label) {
    const auto r = G.rows();
    G.conservativeResize(r + 1, c.size());
    G.row(r) = row.transpose();
    h.conservativeResize(r + 1);
    h(r) = rhs;
    ineq_labels.push_back(std::move(label));
    return r;
  }

  double objective(const VectorXd& x) const { return 0.5 * x.dot(Q * x) + c.dot(x); }
};

enum class Status { optimal, infeasible, unbounded, iteration_limit };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::optimal: return "optimal";
    case Status::infeasible: return "infeasible";
    case Status::unbounded: return "unbounded";
    case Status::iteration_limit: return "iteration-limit";
  }
  return "unknown";
}

/// Max-norm KKT residuals of a primal/dual point.
struct KktResiduals {
  double primal_eq = 0.0;
  double primal_ineq = 0.0;
  double dual_stationarity = 0.0;
  double complementarity = 0.0;
  /// max(-z, 0); zero for any point produced by the interior point iteration.
  double dual_feasibility = 0.0;

  double max() const {
    return std::max({primal_eq, primal_ineq, dual_stationarity, complementarity, dual_feasibility});
  }
};

/// Farkas-type evidence. For infeasibility: z >= 0 with G'z - A'y ~ 0 and h'z - b'y < 0.
/// For unboundedness: a direction d with Qd = 0, Ad = 0, Gd <= 0, c'd < 0.
struct Certificate {
  VectorXd y;
  VectorXd z;
  VectorXd ray;
  /// h'z - b'y (infeasible) or c'd (unbounded); negative when the certificate is valid.
  double value = 0.0;
  /// Max-norm of G'z - A'y (infeasible) or of (Qd, Ad, max(Gd,0)) (unbounded).
  double residual = 0.0;
};

struct QpSolution {
  Status status = Status::iteration_limit;
  VectorXd x;
  VectorXd y;
  VectorXd z;
  KktResiduals residuals;
  double objective = 0.0;
  double dual_objective = 0.0;
  int iterations = 0;
  std::optional<Certificate> certificate;

  bool optimal() const { return status == Status::optimal; }
};

struct SolverConfig {
  double tol = 1e-8;
  int max_iter = 200;
  /// Optional primal starting point; ignored when its size does not match.
  VectorXd initial_x;
};

inline KktResiduals kkt_residuals(const QuadraticProgram& qp, const VectorXd& x, const VectorXd& y,
                                  const VectorXd& z) {
  if (x.size() != qp.num_vars() || y.size() != qp.num_eq() || z.size() != qp.num_ineq())
    throw std::invalid_argument("kkt_residuals: dimension mismatch");
  KktResiduals r;
  if (qp.num_eq() > 0) r.primal_eq = (qp.A * x - qp.b).cwiseAbs().maxCoeff();
  if (qp.num_ineq() > 0) {
    const VectorXd slack = qp.h - qp.G * x;
    r.primal_ineq = std::max(0.0, (-slack).maxCoeff());
    r.complementarity = z.cwiseProduct(slack).cwiseAbs().maxCoeff();
    r.dual_feasibility = std::max(0.0, (-z).maxCoeff());
  }
  if (qp.num_vars() > 0) {
    VectorXd g = qp.Q * x + qp.c;
    if (qp.num_eq() > 0) g -= qp.A.transpose() * y;
    if (qp.num_ineq() > 0) g += qp.G.transpose() * z;
    r.dual_stationarity = g.cwiseAbs().maxCoeff();
  }
  return r;
}

/// Lagrangian dual value  -1/2 x'Qx + b'y - h'z  at a stationary point.
inline double dual_objective(const QuadraticProgram& qp, const VectorXd& x, const VectorXd& y, const VectorXd& z) {
  return -0.5 * x.dot(qp.Q * x) + qp.b.dot(y) - qp.h.dot(z);
}

namespace detail {

// Static regularization of the reduced KKT matrix; the Newton residuals are
// always evaluated on the unregularized system.
inline constexpr double kPrimalReg = 1e-11;
inline constexpr double kDualReg = 1e-11;

// Regularized KKT matrix of the equality-only program:
//   [Q + dp I   A'   ]
//   [A         -dd I ]
class NewtonSystem {
public:
  explicit NewtonSystem(const QuadraticProgram& qp) : n_(qp.num_vars()), me_(qp.num_eq()) {
    MatrixXd K = MatrixXd::Zero(n_ + me_, n_ + me_);
    K.topLeftCorner(n_, n_) = qp.Q;
    K.topLeftCorner(n_, n_).diagonal().array() += kPrimalReg;
    if (me_ > 0) {
      K.topRightCorner(n_, me_) = qp.A.transpose();
      K.bottomLeftCorner(me_, n_) = qp.A;
      K.bottomRightCorner(me_, me_).diagonal().array() = -kDualReg;
    }
    lu_.compute(K);
  }

  // Solves [H A'; A 0][dx; -dy] = [r1; r2].
  void solve(const VectorXd& r1, const VectorXd& r2, VectorXd& dx, VectorXd& dy) const {
    VectorXd rhs(n_ + me_);
    rhs << r1, r2;
    const VectorXd sol = lu_.solve(rhs);
    dx = sol.head(n_);
    dy = -sol.tail(me_);
  }

private:
  Eigen::Index n_, me_;
  Eigen::PartialPivLU<MatrixXd> lu_;
};

// Full augmented system of an interior point step, kept unreduced so that the
// widely spread barrier weights z/s do not get squared into one block:
//   [Q + dp I   A'      G'        ] [dx]   [r1]
//   [A         -dd I    0         ] [-dy] = [r2]
//   [G          0      -S/Z - dd I] [dz]   [r3]
class AugmentedSystem {
public:
  AugmentedSystem(const QuadraticProgram& qp, const VectorXd& s_over_z)
      : n_(qp.num_vars()), me_(qp.num_eq()), mi_(qp.num_ineq()) {
    const auto N = n_ + me_ + mi_;
    MatrixXd K = MatrixXd::Zero(N, N);
    K.topLeftCorner(n_, n_) = qp.Q;
    K.topLeftCorner(n_, n_).diagonal().array() += kPrimalReg;
    K.block(0, n_, n_, me_) = qp.A.transpose();
    K.block(n_, 0, me_, n_) = qp.A;
    K.block(n_, n_, me_, me_).diagonal().array() = -kDualReg;
    K.block(0, n_ + me_, n_, mi_) = qp.G.transpose();
    K.block(n_ + me_, 0, mi_, n_) = qp.G;
    K.bottomRightCorner(mi_, mi_).diagonal() = -(s_over_z.array() + kDualReg).matrix();
    lu_.compute(K);
  }

  void solve(const VectorXd& r1, const VectorXd& r2, const VectorXd& r3, VectorXd& dx, VectorXd& dy,
             VectorXd& dz) const {
    VectorXd rhs(n_ + me_ + mi_);
    rhs << r1, r2, r3;
    const VectorXd sol = lu_.solve(rhs);
    dx = sol.head(n_);
    dy = -sol.segment(n_, me_);
    dz = sol.tail(mi_);
  }

private:
  Eigen::Index n_, me_, mi_;
  Eigen::PartialPivLU<MatrixXd> lu_;
};

inline double max_step(const VectorXd& v, const VectorXd& dv) {
  double a = 1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (dv(i) < 0.0) a = std::min(a, -v(i) / dv(i));
  return a;
}

inline bool finite(const VectorXd& v) { return v.allFinite(); }

// Equality-constrained QP (no inequality rows): one KKT solve.
inline QpSolution solve_equality_only(const QuadraticProgram& qp, const SolverConfig& cfg) {
  const auto n = qp.num_vars();
  QpSolution sol;
  sol.z = VectorXd::Zero(0);
  NewtonSystem sys(qp);
  VectorXd x = VectorXd::Zero(n), y = VectorXd::Zero(qp.num_eq());
  // A few refinement sweeps absorb the static regularization.
  for (int it = 0; it < 5; ++it) {
    VectorXd rd = qp.Q * x + qp.c - qp.A.transpose() * y;
    VectorXd re = qp.A * x - qp.b;
    VectorXd dx, dy;
    sys.solve(-rd, -re, dx, dy);
    x += dx;
    y += dy;
    sol.iterations = it + 1;
  }
  sol.x = x;
  sol.y = y;
  sol.residuals = kkt_residuals(qp, x, y, sol.z);
  sol.objective = qp.objective(x);
  sol.dual_objective = dual_objective(qp, x, y, sol.z);
  sol.status = sol.residuals.max() <= cfg.tol ? Status::optimal : Status::iteration_limit;
  return sol;
}

struct IpmOutcome {
  VectorXd x, y, z;
  int iterations = 0;
  bool converged = false;
  bool diverged = false;
};

inline IpmOutcome interior_point(const QuadraticProgram& qp, const SolverConfig& cfg) {
  const auto n = qp.num_vars();
  const auto mi = qp.num_ineq();
  IpmOutcome out;

  // Starting point: solve the KKT system with unit scaling, then shift s and z
  // into the positive orthant.
  VectorXd x, y, s, z;
  {
    AugmentedSystem init(qp, VectorXd::Ones(mi));
    VectorXd dx, dy, dz;
    init.solve(-qp.c, qp.b, qp.h, dx, dy, dz);
    x = dx;
    y = dy;
    if (cfg.initial_x.size() == n) x = cfg.initial_x;
    s = qp.h - qp.G * x;
    z = -s;
    const double as = s.minCoeff();
    if (as <= 0.0) s.array() += 1.0 - as;
    const double az = z.minCoeff();
    if (az <= 0.0) z.array() += 1.0 - az;
  }

  VectorXd best_x = x, best_y = y, best_z = z;
  double best_res = std::numeric_limits<double>::infinity();

  for (int iter = 0; iter < cfg.max_iter; ++iter) {
    out.iterations = iter;
    const VectorXd rd = qp.Q * x + qp.c - qp.A.transpose() * y + qp.G.transpose() * z;
    const VectorXd re = qp.A * x - qp.b;
    const VectorXd ri = qp.G * x + s - qp.h;
    const double mu = s.dot(z) / static_cast<double>(mi);

    const double res = kkt_residuals(qp, x, y, z).max();
    if (res < best_res) {
      best_res = res;
      best_x = x;
      best_y = y;
      best_z = z;
    }
    if (res <= cfg.tol) {
      out.converged = true;
      break;
    }
    if (!finite(x) || !finite(z) || x.cwiseAbs().maxCoeff() > 1e13 || z.cwiseAbs().maxCoeff() > 1e13) {
      out.diverged = true;
      break;
    }

    AugmentedSystem sys(qp, s.cwiseQuotient(z));

    auto direction = [&](const VectorXd& rsz, VectorXd& dx, VectorXd& dy, VectorXd& ds, VectorXd& dz) {
      sys.solve(-rd, -re, -ri + rsz.cwiseQuotient(z), dx, dy, dz);
      ds = -ri - qp.G * dx;
    };

    VectorXd dx, dy, ds, dz;
    direction(s.cwiseProduct(z), dx, dy, ds, dz);
    const double a_aff = std::min(max_step(s, ds), max_step(z, dz));
    const double mu_aff = (s + a_aff * ds).dot(z + a_aff * dz) / static_cast<double>(mi);
    const double sigma = std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3);

    const VectorXd rsz =
        s.cwiseProduct(z) + ds.cwiseProduct(dz) - VectorXd::Constant(mi, sigma * mu);
    direction(rsz, dx, dy, ds, dz);
    const double alpha = std::min(1.0, 0.99 * std::min(max_step(s, ds), max_step(z, dz)));

    x += alpha * dx;
    y += alpha * dy;
    s += alpha * ds;
    z += alpha * dz;
    out.iterations = iter + 1;
  }

  if (!out.converged) {
    const double res = kkt_residuals(qp, x, y, z).max();
    if (res <= cfg.tol) {
      out.converged = true;
    } else if (res > best_res) {
      x = best_x;
      y = best_y;
      z = best_z;
    }
  }
  out.x = std::move(x);
  out.y = std::move(y);
  out.z = std::move(z);
  return out;
}

// Least-squares consistency of A x = b. Returns the residual r = b - A x_ls,
// which satisfies A'r = 0 and b'r = |r|^2.
inline VectorXd equality_residual(const QuadraticProgram& qp) {
  if (qp.num_eq() == 0) return VectorXd::Zero(0);
  const VectorXd xls = qp.A.completeOrthogonalDecomposition().solve(qp.b);
  return qp.b - qp.A * xls;
}

// Phase I:  min t + eps/2 |x|^2  s.t.  Ax = b,  Gx - t <= h,  -t <= 0.
// When the optimum t* is positive its multipliers form a Farkas certificate.
inline std::optional<Certificate> infeasibility_certificate(const QuadraticProgram& qp, double tol) {
  const auto n = qp.num_vars();
  const auto me = qp.num_eq();
  const auto mi = qp.num_ineq();

  const VectorXd r = equality_residual(qp);
  if (me > 0 && r.cwiseAbs().maxCoeff() > tol) {
    Certificate cert;
    cert.y = r;
    cert.z = VectorXd::Zero(mi);
    cert.value = -qp.b.dot(r);
    cert.residual = (qp.A.transpose() * r).cwiseAbs().maxCoeff();
    return cert;
  }
  if (mi == 0) return std::nullopt;

  constexpr double eps = 1e-9;
  QuadraticProgram p1 = QuadraticProgram::with_vars(n + 1);
  p1.Q.topLeftCorner(n, n).diagonal().array() = eps;
  p1.c(n) = 1.0;
  p1.A.resize(me, n + 1);
  p1.A << qp.A, VectorXd::Zero(me);
  p1.b = qp.b;
  p1.G.resize(mi + 1, n + 1);
  p1.G.setZero();
  p1.G.topLeftCorner(mi, n) = qp.G;
  p1.G.block(0, n, mi, 1).setConstant(-1.0);
  p1.G(mi, n) = -1.0;
  p1.h.resize(mi + 1);
  p1.h << qp.h, 0.0;
  p1.eq_labels.clear();
  p1.ineq_labels.clear();

  SolverConfig cfg;
  cfg.tol = 1e-10;
  cfg.max_iter = 300;
  const IpmOutcome o = interior_point(p1, cfg);
  const double t = o.x(n);
  if (t <= std::max(tol, 1e-7)) return std::nullopt;

  Certificate cert;
  cert.y = o.y;
  cert.z = o.z.head(mi).cwiseMax(0.0);
  cert.value = qp.h.dot(cert.z) - qp.b.dot(cert.y);
  VectorXd g = qp.G.transpose() * cert.z;
  if (me > 0) g -= qp.A.transpose() * cert.y;
  cert.residual = g.size() > 0 ? g.cwiseAbs().maxCoeff() : 0.0;
  if (cert.value >= 0.0) return std::nullopt;
  return cert;
}

// Recession direction: min c'd  s.t.  Qd = 0, Ad = 0, Gd <= 0, -1 <= d <= 1.
inline std::optional<Certificate> unbounded_ray(const QuadraticProgram& qp, double tol) {
  const auto n = qp.num_vars();
  QuadraticProgram lp = QuadraticProgram::with_vars(n);
  lp.Q.diagonal().array() = 1e-9;
  lp.c = qp.c;
  lp.A.resize(qp.num_eq() + n, n);
  lp.A << qp.A, qp.Q;
  lp.b = VectorXd::Zero(qp.num_eq() + n);
  lp.G.resize(qp.num_ineq() + 2 * n, n);
  lp.G << qp.G, MatrixXd::Identity(n, n), -MatrixXd::Identity(n, n);
  lp.h.resize(qp.num_ineq() + 2 * n);
  lp.h << VectorXd::Zero(qp.num_ineq()), VectorXd::Ones(2 * n);
  // Qd = 0 rows are often dependent; the least-squares-friendly reduced system
  // copes with that through its dual regularization.
  SolverConfig cfg;
  cfg.tol = 1e-9;
  cfg.max_iter = 300;
  const IpmOutcome o = interior_point(lp, cfg);
  const double val = qp.c.dot(o.x);
  if (!(val < -std::max(tol, 1e-7))) return std::nullopt;
  Certificate cert;
  cert.ray = o.x;
  cert.value = val;
  double res = (qp.Q * o.x).cwiseAbs().maxCoeff();
  if (qp.num_eq() > 0) res = std::max(res, (qp.A * o.x).cwiseAbs().maxCoeff());
  if (qp.num_ineq() > 0) res = std::max(res, std::max(0.0, (qp.G * o.x).maxCoeff()));
  cert.residual = res;
  return cert;
}

}  // namespace detail

/// Solves a convex QP. Deterministic; holds no state between calls.
inline QpSolution solve(const QuadraticProgram& qp, const SolverConfig& cfg = {}) {
  qp.check();
  if (!(cfg.tol > 0.0)) throw ConfigError("qp: tol must be positive");
  if (qp.num_ineq() == 0) {
    QpSolution sol = detail::solve_equality_only(qp, cfg);
    if (!sol.optimal()) {
      if (auto cert = detail::infeasibility_certificate(qp, cfg.tol)) {
        sol.status = Status::infeasible;
        sol.certificate = std::move(cert);
      } else if (auto ray = detail::unbounded_ray(qp, cfg.tol)) {
        sol.status = Status::unbounded;
        sol.certificate = std::move(ray);
      }
    }
    return sol;
  }

  const detail::IpmOutcome o = detail::interior_point(qp, cfg);
  QpSolution sol;
  sol.x = o.x;
  sol.y = o.y;
  sol.z = o.z;
  sol.iterations = o.iterations;
  sol.residuals = kkt_residuals(qp, sol.x, sol.y, sol.z);
  sol.objective = qp.objective(sol.x);
  sol.dual_objective = dual_objective(qp, sol.x, sol.y, sol.z);
  if (o.converged) {
    sol.status = Status::optimal;
    return sol;
  }
  if (auto cert = detail::infeasibility_certificate(qp, std::max(cfg.tol, 1e-7))) {
    sol.status = Status::infeasible;
    sol.certificate = std::move(cert);
  } else if (auto ray = detail::unbounded_ray(qp, cfg.tol)) {
    sol.status = Status::unbounded;
    sol.certificate = std::move(ray);
  } else {
    sol.status = Status::iteration_limit;
  }
  return sol;
}

/// Writes a labeled, coordinate-format text dump (1-based indices, zeros omitted).
inline void write_debug_dump(std::ostream& os, const QuadraticProgram& qp) {
  const auto old_prec = os.precision(17);
  os << "%%QuadraticProgram n=" << qp.num_vars() << " m_eq=" << qp.num_eq() << " m_ineq=" << qp.num_ineq()
     << "\n";
  auto label = [](const std::vector<std::string>& v, Eigen::Index i) {
    return i < static_cast<Eigen::Index>(v.size()) ? v[static_cast<std::size_t>(i)] : std::string("-");
  };
  for (Eigen::Index i = 0; i < qp.num_vars(); ++i) os << "%var " << i + 1 << ' ' << label(qp.var_labels, i) << "\n";
  for (Eigen::Index i = 0; i < qp.num_eq(); ++i) os << "%eq " << i + 1 << ' ' << label(qp.eq_labels, i) << "\n";
  for (Eigen::Index i = 0; i < qp.num_ineq(); ++i)
    os << "%ineq " << i + 1 << ' ' << label(qp.ineq_labels, i) << "\n";
  auto block = [&os](const char* name, const MatrixXd& m) {
    std::size_t nnz = 0;
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) nnz += m(i, j) != 0.0;
    os << name << ' ' << m.rows() << ' ' << m.cols() << ' ' << nnz << "\n";
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j)
        if (m(i, j) != 0.0) os << i + 1 << ' ' << j + 1 << ' ' << m(i, j) << "\n";
  };
  block("Q", qp.Q);
  block("c", qp.c);
  block("A", qp.A);
  block("b", qp.b);
  block("G", qp.G);
  block("h", qp.h);
  os.precision(old_prec);
}

}  // namespace flex::qp
