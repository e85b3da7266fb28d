#pragma once

// Dense operator-splitting (ADMM) solver for small strictly convex QPs
//
//   minimize    1/2 x' H x + f' x
//   subject to  G x >= lb
//
// The iteration follows the OSQP splitting: Ruiz-equilibrated data, a
// factored (H + sigma I + rho G'G) system, over-relaxation and adaptive rho.
// Once the iterates settle, the active set they identify is used to solve the
// equality-constrained subproblem exactly ("polishing"); the polished point is
// kept only if it passes primal and dual feasibility checks. A warm start may
// carry an active-set guess, which is tried before any iteration.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "rta/errors.hpp"

namespace rta {

struct QpProblem {
  Eigen::MatrixXd H;
  Eigen::VectorXd f_lin;
  Eigen::MatrixXd G;
  Eigen::VectorXd g_lb;

  Eigen::Index num_vars() const { return H.rows(); }
  Eigen::Index num_rows() const { return G.rows(); }
};

enum class QpStatus { Optimal, MaxIter, Infeasible };

inline const char* to_string(QpStatus s) {
  switch (s) {
    case QpStatus::Optimal: return "optimal";
    case QpStatus::MaxIter: return "max_iter";
    case QpStatus::Infeasible: return "infeasible";
  }
  return "unknown";
}

struct QpResiduals {
  double primal = 0.0;  // max violation of G x >= lb
  double dual = 0.0;    // |H x + f - G' lambda|_inf
  double gap = 0.0;     // sum lambda_i (G x - lb)_i
};

struct QpResult {
  Eigen::VectorXd x;
  Eigen::VectorXd lambda;  // >= 0, one per row
  QpStatus status = QpStatus::MaxIter;
  int iterations = 0;
  bool polished = false;
  QpResiduals residuals;
};

struct QpSettings {
  double eps_abs = 1e-6;
  double eps_rel = 1e-5;
  int max_iter = 4000;
  double rho = 0.1;
  double sigma = 1e-6;
  double alpha = 1.6;
  int scaling_iter = 10;
  int check_every = 5;
  int adapt_rho_every = 25;
  bool polish = true;
  double polish_tol = 1e-9;
  int polish_refine = 30;
};

struct QpWarmStart {
  Eigen::VectorXd x;
  Eigen::VectorXd lambda;
};

inline QpResiduals kkt_residuals(const QpProblem& qp, const Eigen::VectorXd& x,
                                 const Eigen::VectorXd& lambda) {
  QpResiduals r;
  const Eigen::VectorXd slack = qp.G * x - qp.g_lb;
  r.primal = qp.num_rows() > 0 ? std::max(0.0, -slack.minCoeff()) : 0.0;
  r.dual = (qp.H * x + qp.f_lin - qp.G.transpose() * lambda).cwiseAbs().maxCoeff();
  r.gap = std::abs(lambda.dot(slack));
  return r;
}

class AdmmQpSolver {
 public:
  AdmmQpSolver() = default;
  explicit AdmmQpSolver(QpSettings settings) : settings_(settings) {}

  const QpSettings& settings() const { return settings_; }

  QpResult solve(const QpProblem& qp, const QpWarmStart* warm = nullptr) const {
    const Eigen::Index n = qp.num_vars();
    const Eigen::Index m = qp.num_rows();
    if (qp.H.cols() != n || qp.f_lin.size() != n || qp.G.cols() != n ||
        qp.g_lb.size() != m) {
      throw Error("QpProblem: inconsistent dimensions");
    }
    if (!qp.H.allFinite() || !qp.f_lin.allFinite() || !qp.G.allFinite() ||
        !qp.g_lb.allFinite()) {
      throw NonFiniteInput("QpProblem: non-finite data");
    }

    const bool warm_ok = warm != nullptr && warm->x.size() == n && warm->lambda.size() == m;
    if (warm_ok && settings_.polish) {
      std::vector<Eigen::Index> guess;
      for (Eigen::Index i = 0; i < m; ++i) {
        if (warm->lambda[i] > 0.0) guess.push_back(i);
      }
      if (auto r = polish(qp, guess)) {
        r->iterations = 0;
        return *r;
      }
    }

    Scaled sc = scale(qp);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd z = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd y = Eigen::VectorXd::Zero(m);
    if (warm_ok) {
      x = warm->x.cwiseQuotient(sc.D);
      z = (sc.G * x).cwiseMax(sc.lb);
      y = -sc.c * warm->lambda.cwiseQuotient(sc.E);
    }

    double rho = settings_.rho;
    Eigen::LLT<Eigen::MatrixXd> kkt = factor(sc, rho);
    QpResult out;
    out.status = QpStatus::MaxIter;
    int it = 0;
    for (it = 1; it <= settings_.max_iter; ++it) {
      const Eigen::VectorXd rhs = settings_.sigma * x - sc.f + sc.G.transpose() * (rho * z - y);
      const Eigen::VectorXd x_tilde = kkt.solve(rhs);
      const Eigen::VectorXd z_tilde = sc.G * x_tilde;
      const Eigen::VectorXd x_next = settings_.alpha * x_tilde + (1.0 - settings_.alpha) * x;
      const Eigen::VectorXd z_relaxed = settings_.alpha * z_tilde + (1.0 - settings_.alpha) * z;
      const Eigen::VectorXd z_next = (z_relaxed + y / rho).cwiseMax(sc.lb);
      y += rho * (z_relaxed - z_next);
      x = x_next;
      z = z_next;

      if (it % settings_.check_every != 0 && it != settings_.max_iter) continue;
      const Check chk = check(sc, x, z, y);
      if (chk.converged) {
        out.status = QpStatus::Optimal;
        break;
      }
      if (it % settings_.adapt_rho_every == 0) {
        const double ratio = std::sqrt(chk.prim_rel / std::max(chk.dual_rel, 1e-30));
        const double rho_new = std::clamp(rho * ratio, 1e-6, 1e6);
        if (rho_new > 5.0 * rho || rho_new < 0.2 * rho) {
          rho = rho_new;
          kkt = factor(sc, rho);
        }
      }
    }
    out.iterations = std::min(it, settings_.max_iter);
    out.x = sc.D.cwiseProduct(x);
    out.lambda = (-sc.E.cwiseProduct(y) / sc.c).cwiseMax(0.0);

    if (settings_.polish) {
      std::vector<Eigen::Index> active;
      for (Eigen::Index i = 0; i < m; ++i) {
        if (z[i] - sc.lb[i] < -y[i]) active.push_back(i);
      }
      if (auto r = polish(qp, active)) {
        r->iterations = out.iterations;
        return *r;
      }
    }
    out.residuals = kkt_residuals(qp, out.x, out.lambda);
    return out;
  }

  // Solve the equality-constrained QP on `active` and accept the result only
  // if it is primal and dual feasible for the full problem. A rejected guess
  // is corrected a few times by adding the most violated row or releasing
  // the most negative multiplier.
  std::optional<QpResult> polish(const QpProblem& qp,
                                 std::vector<Eigen::Index> active) const {
    std::sort(active.begin(), active.end());
    auto erase = [&](Eigen::Index row) {
      active.erase(std::find(active.begin(), active.end(), row));
    };
    std::optional<Attempt> prev;
    Eigen::Index last_added = -1;
    for (int pass = 0; pass <= settings_.polish_refine; ++pass) {
      const Attempt a = polish_once(qp, active);
      if (a.result) return a.result;
      if (a.singular && last_added >= 0 && prev) {
        // The added row is spanned by the set. Raising its multiplier lowers
        // the others along the dependency; release the first to reach zero.
        erase(last_added);
        const VecL beta = dependency(qp, active, last_added);
        Eigen::Index out_row = -1;
        long double ratio = std::numeric_limits<long double>::infinity();
        for (std::size_t j = 0; j < active.size(); ++j) {
          const long double bj = beta[static_cast<Eigen::Index>(j)];
          if (bj <= 0.0L) continue;
          const long double t = std::max(0.0L, prev->lam[j]) / bj;
          if (t < ratio) {
            ratio = t;
            out_row = active[j];
          }
        }
        if (out_row < 0) break;
        erase(out_row);
        active.push_back(last_added);
        std::sort(active.begin(), active.end());
        last_added = -1;
        prev.reset();
        continue;
      }
      if (a.singular) {
        if (a.dependent < 0) break;
        erase(a.dependent);
        last_added = -1;
        prev.reset();
      } else if (a.add >= 0) {
        active.push_back(a.add);
        std::sort(active.begin(), active.end());
        last_added = a.add;
        prev = a;
      } else if (a.drop >= 0) {
        erase(a.drop);
        last_added = -1;
        prev.reset();
      } else {
        break;
      }
    }
    return std::nullopt;
  }

 private:
  using MatL = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  using VecL = Eigen::Matrix<long double, Eigen::Dynamic, 1>;

  struct Attempt {
    std::optional<QpResult> result;
    Eigen::Index add = -1;   // most violated inactive row
    Eigen::Index drop = -1;  // active row with the most negative multiplier
    bool singular = false;
    Eigen::Index dependent = -1;  // a row spanned by the others when singular
    std::vector<long double> lam;  // multipliers of the active rows, in order
  };

  // Active-row normals in the variables y = L^T x, one per column.
  static MatL scaled_normals(const QpProblem& qp, const MatL& l_mat,
                             const std::vector<Eigen::Index>& rows) {
    MatL ga(static_cast<Eigen::Index>(rows.size()), qp.num_vars());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      ga.row(static_cast<Eigen::Index>(i)) = qp.G.row(rows[i]).cast<long double>();
    }
    return l_mat.triangularView<Eigen::Lower>().solve(ga.transpose());
  }

  // Coefficients expressing row p through the rows of `set`.
  static VecL dependency(const QpProblem& qp, const std::vector<Eigen::Index>& set,
                         Eigen::Index p) {
    const MatL l_mat = Eigen::LLT<MatL>(qp.H.cast<long double>()).matrixL();
    const MatL at = scaled_normals(qp, l_mat, set);
    const MatL ap = scaled_normals(qp, l_mat, {p});
    return at.colPivHouseholderQr().solve(ap.col(0));
  }

  Attempt polish_once(const QpProblem& qp, const std::vector<Eigen::Index>& active) const {
    const Eigen::Index n = qp.num_vars();
    const Eigen::Index m = qp.num_rows();
    const auto k = static_cast<Eigen::Index>(active.size());
    Attempt out;
    // Equality-constrained solve in variables y = L^T x (H = L L^T), where
    // it becomes a minimum-norm problem: min |y + c|^2 s.t. A y = b. A QR
    // factorization of A^T keeps the error proportional to cond(A) rather
    // than its square, which matters when heavily weighted slacks compete.
    Eigen::LLT<MatL> h_fact(qp.H.cast<long double>());
    if (h_fact.info() != Eigen::Success) return out;
    const MatL l_mat = h_fact.matrixL();
    const VecL c = l_mat.triangularView<Eigen::Lower>().solve(qp.f_lin.cast<long double>());
    VecL y = -c;
    VecL lam_active = VecL::Zero(k);
    VecL lam_floor = VecL::Zero(k);  // below this a multiplier is negative
    if (k > 0) {
      VecL lba(k);
      for (Eigen::Index i = 0; i < k; ++i) lba[i] = qp.g_lb[active[static_cast<std::size_t>(i)]];
      const MatL at = scaled_normals(qp, l_mat, active);
      Eigen::HouseholderQR<MatL> qr(at);
      const MatL r_mat = qr.matrixQR().topLeftCorner(std::min(k, n), k).triangularView<Eigen::Upper>();
      const long double r_max = r_mat.diagonal().cwiseAbs().maxCoeff();
      if (k > n || !(r_max > 0.0L) ||
          r_mat.diagonal().cwiseAbs().minCoeff() < 1e-15L * r_max) {
        out.singular = true;
        Eigen::ColPivHouseholderQR<MatL> piv(at);
        piv.setThreshold(1e-15L);
        if (piv.rank() < k) {
          out.dependent = active[static_cast<std::size_t>(piv.colsPermutation().indices()[k - 1])];
        }
        return out;
      }
      const MatL q1 = qr.householderQ() * MatL::Identity(n, k);
      auto project = [&](const VecL& rhs) -> VecL {
        return q1 * r_mat.transpose().triangularView<Eigen::Lower>().solve(rhs);
      };
      y += project(lba + at.transpose() * c);
      for (int pass = 0; pass < 2; ++pass) y += project(lba - at.transpose() * y);
      lam_active = r_mat.triangularView<Eigen::Upper>().solve(q1.transpose() * (y + c));
      if (!lam_active.allFinite()) return out;
      // A multiplier moves the scaled stationarity by |lambda_i| |a_i|; it
      // is significant once that exceeds round-off in y + c.
      const long double stat_mag = 1.0L + (y + c).cwiseAbs().maxCoeff();
      for (Eigen::Index i = 0; i < k; ++i) {
        lam_floor[i] = -1e-11L * stat_mag / std::max(at.col(i).norm(), 1e-300L);
      }
      out.lam.assign(lam_active.data(), lam_active.data() + k);
    }
    QpResult r;
    r.lambda = Eigen::VectorXd::Zero(m);
    for (Eigen::Index i = 0; i < k; ++i) {
      r.lambda[active[static_cast<std::size_t>(i)]] = static_cast<double>(lam_active[i]);
    }
    r.x = l_mat.transpose().triangularView<Eigen::Upper>().solve(y).cast<double>();
    if (!r.x.allFinite()) return out;

    const double tol = settings_.polish_tol;
    long double most_negative = 0.0L;
    for (Eigen::Index i = 0; i < k; ++i) {
      if (lam_active[i] < lam_floor[i] && lam_active[i] - lam_floor[i] < most_negative) {
        most_negative = lam_active[i] - lam_floor[i];
        out.drop = active[static_cast<std::size_t>(i)];
      }
    }
    const Eigen::VectorXd slack = qp.G * r.x - qp.g_lb;
    double worst = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      const double scaled = slack[i] / (1.0 + std::abs(qp.g_lb[i]));
      if (scaled < -tol && scaled < worst &&
          std::find(active.begin(), active.end(), i) == active.end()) {
        worst = scaled;
        out.add = i;
      }
    }
    if (out.drop >= 0 || out.add >= 0) return out;
    r.lambda = r.lambda.cwiseMax(0.0);
    r.residuals = kkt_residuals(qp, r.x, r.lambda);
    const double dual_scale =
        1.0 + std::max({(qp.H * r.x).cwiseAbs().maxCoeff(), qp.f_lin.cwiseAbs().maxCoeff(),
                        (qp.G.transpose() * r.lambda).cwiseAbs().maxCoeff()});
    if (r.residuals.dual > 1e-7 * dual_scale) return out;
    r.status = QpStatus::Optimal;
    r.polished = true;
    out.result = r;
    return out;
  }

  struct Scaled {
    Eigen::MatrixXd H, G;
    Eigen::VectorXd f, lb;
    Eigen::VectorXd D, E;
    double c = 1.0;
  };

  struct Check {
    bool converged = false;
    double prim_rel = 0.0;
    double dual_rel = 0.0;
  };

  Scaled scale(const QpProblem& qp) const {
    const Eigen::Index n = qp.num_vars();
    const Eigen::Index m = qp.num_rows();
    Scaled s;
    s.H = qp.H;
    s.G = qp.G;
    s.f = qp.f_lin;
    s.D = Eigen::VectorXd::Ones(n);
    s.E = Eigen::VectorXd::Ones(m);
    auto inv_sqrt = [](double v) { return v < 1e-4 ? 1.0 : 1.0 / std::sqrt(std::min(v, 1e4 * 1e4)); };
    for (int k = 0; k < settings_.scaling_iter; ++k) {
      Eigen::VectorXd dx(n), dz(m);
      for (Eigen::Index j = 0; j < n; ++j) {
        double col = s.H.col(j).cwiseAbs().maxCoeff();
        if (m > 0) col = std::max(col, s.G.col(j).cwiseAbs().maxCoeff());
        dx[j] = inv_sqrt(col);
      }
      for (Eigen::Index i = 0; i < m; ++i) dz[i] = inv_sqrt(s.G.row(i).cwiseAbs().maxCoeff());
      s.H = dx.asDiagonal() * s.H * dx.asDiagonal();
      s.G = dz.asDiagonal() * s.G * dx.asDiagonal();
      s.f = dx.cwiseProduct(s.f);
      s.D = s.D.cwiseProduct(dx);
      s.E = s.E.cwiseProduct(dz);
    }
    double mean_col = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) mean_col += s.H.col(j).cwiseAbs().maxCoeff();
    mean_col /= static_cast<double>(std::max<Eigen::Index>(n, 1));
    const double fmax = n > 0 ? s.f.cwiseAbs().maxCoeff() : 0.0;
    double denom = std::max(mean_col, fmax);
    s.c = denom < 1e-4 ? 1.0 : std::clamp(1.0 / denom, 1e-4, 1e4);
    s.H *= s.c;
    s.f *= s.c;
    s.lb = s.E.cwiseProduct(qp.g_lb);
    return s;
  }

  Eigen::LLT<Eigen::MatrixXd> factor(const Scaled& s, double rho) const {
    const Eigen::Index n = s.H.rows();
    Eigen::MatrixXd k = s.H + settings_.sigma * Eigen::MatrixXd::Identity(n, n) +
                        rho * s.G.transpose() * s.G;
    return Eigen::LLT<Eigen::MatrixXd>(k);
  }

  Check check(const Scaled& s, const Eigen::VectorXd& x, const Eigen::VectorXd& z,
              const Eigen::VectorXd& y) const {
    auto inf = [](const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; };
    const Eigen::VectorXd e_inv = s.E.cwiseInverse();
    const Eigen::VectorXd d_inv = s.D.cwiseInverse();
    const Eigen::VectorXd gx = s.G * x;
    const double prim = inf(e_inv.cwiseProduct(gx - z));
    const double prim_scale = std::max(inf(e_inv.cwiseProduct(gx)), inf(e_inv.cwiseProduct(z)));
    const Eigen::VectorXd hx = s.H * x;
    const Eigen::VectorXd gty = s.G.transpose() * y;
    const double dual = inf(d_inv.cwiseProduct(hx + s.f + gty)) / s.c;
    const double dual_scale = std::max({inf(d_inv.cwiseProduct(hx)), inf(d_inv.cwiseProduct(gty)),
                                        inf(d_inv.cwiseProduct(s.f))}) / s.c;
    Check c;
    c.converged = prim <= settings_.eps_abs + settings_.eps_rel * prim_scale &&
                  dual <= settings_.eps_abs + settings_.eps_rel * dual_scale;
    c.prim_rel = prim / std::max(prim_scale, 1e-30);
    c.dual_rel = dual / std::max(dual_scale, 1e-30);
    return c;
  }

  QpSettings settings_;
};

}  // namespace rta
