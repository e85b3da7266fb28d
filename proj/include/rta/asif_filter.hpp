#pragma once

// Active set invariance filter: the admissible control closest to the
// desired one subject to every barrier row,
//
//   argmin |u_des - u|^2 + sum_i w_i delta_i^2
//   s.t.   grad_i . u + affine_i >= delta_i   (slacked rows)
//          grad_i . u + affine_i >= 0         (hard rows)
//          |u_j| <= limit_j
//
// Decision vector: [u (6); one delta per slacked, enforced row].

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "rta/cbf_kit.hpp"
#include "rta/errors.hpp"
#include "rta/qp_solver.hpp"
#include "rta/quat_dyn.hpp"

namespace rta {

struct AsifProblem {
  QpProblem qp;
  std::vector<ConstraintId> row_ids;  // barrier rows, in G order, before the 12 box rows
  std::map<ConstraintId, Eigen::Index> slack_index_map;
  std::vector<ConstraintId> dropped;  // rows without control authority this step
  std::vector<ConstraintEval> evals;  // every configured constraint
  ControlInput u_des;                 // after clamping into the box

  Eigen::Index num_barrier_rows() const { return static_cast<Eigen::Index>(row_ids.size()); }
};

struct QpSolution {
  ControlInput u_act;
  std::map<ConstraintId, double> slacks;
  QpStatus status = QpStatus::Optimal;
  QpResiduals kkt_residuals;
  int iterations = 0;
  bool polished = false;
  bool fast_path = false;
  Eigen::VectorXd x;
  Eigen::VectorXd lambda;
};

struct ConstraintReport {
  ConstraintId id = ConstraintId::Collision;
  double h = 0.0;
  double raw = 0.0;
  double bc = 0.0;     // barrier condition at u_act (enforced rows only)
  double slack = 0.0;
  bool enforced = false;
  bool hard = false;
};

struct FilterReport {
  std::vector<ConstraintReport> constraints;
  QpStatus status = QpStatus::Optimal;
  QpResiduals residuals;
  int iterations = 0;
  bool modified = false;
  bool relaxed = false;
  bool fast_path = false;
};

struct FilterResult {
  ControlInput u_act;
  FilterReport report;
};

inline constexpr double kModifiedTolerance = 1e-9;

class AsifFilter {
 public:
  AsifFilter(CbfModel model, std::vector<ConstraintSpec> specs, QpSettings settings = {})
      : model_(std::move(model)), specs_(std::move(specs)), solver_(settings) {
    for (const auto& s : specs_) s.validate();
  }

  const CbfModel& model() const { return model_; }
  const std::vector<ConstraintSpec>& specs() const { return specs_; }
  const AdmmQpSolver& solver() const { return solver_; }

  void reset() { warm_.reset(); }

  AsifProblem assemble(const SimState& s, const ControlInput& u_des) const {
    return assemble(u_des, model_.evaluate_all(specs_, s));
  }

  // Same, from evaluations of specs() already made at the current state.
  AsifProblem assemble(const ControlInput& u_des, std::vector<ConstraintEval> evals) const {
    if (evals.size() != specs_.size()) {
      throw UnknownConstraint("assemble: one evaluation per configured constraint required");
    }
    const auto& vp = model_.plant().vehicle;
    AsifProblem prob;
    prob.u_des = clamp_control(u_des, vp);
    prob.evals = std::move(evals);

    Eigen::Index n_slack = 0;
    for (std::size_t i = 0; i < specs_.size(); ++i) {
      const auto& e = prob.evals[i];
      if (!e.row.grad_u.allFinite() || !std::isfinite(e.row.affine)) {
        throw NonFiniteState(std::string(constraint_key(e.id)) + ": non-finite barrier row");
      }
      if (e.row.degenerate()) {
        prob.dropped.push_back(e.id);
        continue;
      }
      prob.row_ids.push_back(e.id);
      if (specs_[i].slack_weight) prob.slack_index_map[e.id] = 6 + n_slack++;
    }

    const Eigen::Index n = 6 + n_slack;
    const Eigen::Index mb = prob.num_barrier_rows();
    const Eigen::Index m = mb + 12;
    QpProblem& qp = prob.qp;
    qp.H = Eigen::MatrixXd::Zero(n, n);
    qp.f_lin = Eigen::VectorXd::Zero(n);
    qp.G = Eigen::MatrixXd::Zero(m, n);
    qp.g_lb = Eigen::VectorXd::Zero(m);
    const Vec6 ud = prob.u_des.as_vector();
    for (int j = 0; j < 6; ++j) {
      qp.H(j, j) = 2.0;
      qp.f_lin[j] = -2.0 * ud[j];
    }
    Eigen::Index row = 0;
    for (std::size_t i = 0; i < specs_.size(); ++i) {
      const auto& e = prob.evals[i];
      if (e.row.degenerate()) continue;
      qp.G.row(row).head<6>() = e.row.grad_u.transpose();
      qp.g_lb[row] = -e.row.affine;
      if (auto it = prob.slack_index_map.find(e.id); it != prob.slack_index_map.end()) {
        qp.G(row, it->second) = -1.0;
        qp.H(it->second, it->second) = 2.0 * *specs_[i].slack_weight;
      }
      ++row;
    }
    const Vec6 lim = limits();
    for (int j = 0; j < 6; ++j) {
      qp.G(mb + 2 * j, j) = 1.0;
      qp.g_lb[mb + 2 * j] = -lim[j];
      qp.G(mb + 2 * j + 1, j) = -1.0;
      qp.g_lb[mb + 2 * j + 1] = -lim[j];
    }
    return prob;
  }

  // Solve an assembled problem, warm-started from the previous solve.
  QpSolution solve(const AsifProblem& prob) {
    QpSolution sol = solve_impl(prob);
    remember(prob, sol);
    return sol;
  }

  FilterResult filter(const SimState& s, const ControlInput& u_des) {
    return filter(u_des, model_.evaluate_all(specs_, s));
  }

  FilterResult filter(const ControlInput& u_des, std::vector<ConstraintEval> evals) {
    if (!u_des.force.allFinite() || !u_des.torque.allFinite()) {
      throw NonFiniteInput("filter: desired control is not finite");
    }
    const AsifProblem prob = assemble(u_des, std::move(evals));
    const QpSolution sol = solve(prob);
    FilterResult out;
    out.u_act = sol.u_act;
    out.report = make_report(prob, sol, u_des);
    return out;
  }

  FilterReport make_report(const AsifProblem& prob, const QpSolution& sol,
                           const ControlInput& u_des) const {
    FilterReport rep;
    rep.status = sol.status;
    rep.residuals = sol.kkt_residuals;
    rep.iterations = sol.iterations;
    rep.fast_path = sol.fast_path;
    const Vec6 ua = sol.u_act.as_vector();
    rep.modified = (ua - u_des.as_vector()).cwiseAbs().maxCoeff() > kModifiedTolerance;
    for (std::size_t i = 0; i < specs_.size(); ++i) {
      const auto& e = prob.evals[i];
      ConstraintReport c;
      c.id = e.id;
      c.h = e.h;
      c.raw = e.raw;
      c.hard = !specs_[i].slack_weight.has_value();
      c.enforced = !e.row.degenerate();
      c.bc = e.row.bc(ua);
      if (auto it = sol.slacks.find(e.id); it != sol.slacks.end()) c.slack = it->second;
      if (std::abs(c.slack) > kModifiedTolerance) rep.relaxed = true;
      rep.constraints.push_back(c);
    }
    return rep;
  }

 private:
  struct Memory {
    Vec6 u;
    std::map<ConstraintId, double> slack;
    std::map<ConstraintId, double> lambda;
    std::array<double, 12> box_lambda{};
  };

  Vec6 limits() const {
    const auto& vp = model_.plant().vehicle;
    Vec6 lim;
    lim << Vec3::Constant(vp.thrust_max), Vec3::Constant(vp.torque_max);
    return lim;
  }

  QpSolution solve_impl(const AsifProblem& prob) {
    const QpProblem& qp = prob.qp;
    const Eigen::Index n = qp.num_vars();
    const Eigen::Index mb = prob.num_barrier_rows();
    const Vec6 ud = prob.u_des.as_vector();
    const Vec6 lim = limits();

    QpSolution sol;
    // Desired control already satisfies every row with zero slack: it is the
    // exact minimizer.
    bool inactive = true;
    for (Eigen::Index r = 0; r < mb; ++r) {
      if (qp.G.row(r).head<6>().dot(ud) < qp.g_lb[r]) {
        inactive = false;
        break;
      }
    }
    if (inactive) {
      sol.u_act = prob.u_des;
      sol.x = Eigen::VectorXd::Zero(n);
      sol.x.head<6>() = ud;
      sol.lambda = Eigen::VectorXd::Zero(qp.num_rows());
      for (const auto& [id, col] : prob.slack_index_map) sol.slacks[id] = 0.0;
      sol.status = QpStatus::Optimal;
      sol.fast_path = true;
      return sol;
    }

    // A hard row that the box cannot satisfy makes the problem infeasible:
    // return the box corner that best satisfies it.
    for (Eigen::Index r = 0; r < mb; ++r) {
      if (prob.slack_index_map.count(prob.row_ids[static_cast<std::size_t>(r)])) continue;
      const Vec6 g = qp.G.row(r).head<6>().transpose();
      if (g.cwiseAbs().dot(lim) < qp.g_lb[r]) {
        Vec6 u;
        for (int j = 0; j < 6; ++j) {
          u[j] = g[j] > 0.0 ? lim[j] : (g[j] < 0.0 ? -lim[j] : std::clamp(ud[j], -lim[j], lim[j]));
        }
        sol.u_act = ControlInput::from_vector(u);
        sol.x = Eigen::VectorXd::Zero(n);
        sol.x.head<6>() = u;
        sol.lambda = Eigen::VectorXd::Zero(qp.num_rows());
        for (const auto& [id, col] : prob.slack_index_map) sol.slacks[id] = 0.0;
        sol.status = QpStatus::Infeasible;
        sol.kkt_residuals.primal = qp.g_lb[r] - g.dot(u);
        return sol;
      }
    }

    QpWarmStart warm;
    const QpWarmStart* warm_ptr = nullptr;
    if (warm_) {
      warm.x = Eigen::VectorXd::Zero(n);
      warm.x.head<6>() = warm_->u;
      warm.lambda = Eigen::VectorXd::Zero(qp.num_rows());
      for (const auto& [id, col] : prob.slack_index_map) {
        if (auto it = warm_->slack.find(id); it != warm_->slack.end()) warm.x[col] = it->second;
      }
      for (Eigen::Index r = 0; r < mb; ++r) {
        const ConstraintId id = prob.row_ids[static_cast<std::size_t>(r)];
        if (auto it = warm_->lambda.find(id); it != warm_->lambda.end()) warm.lambda[r] = it->second;
      }
      for (int b = 0; b < 12; ++b) warm.lambda[mb + b] = warm_->box_lambda[static_cast<std::size_t>(b)];
      warm_ptr = &warm;
    }

    const QpResult r = solver_.solve(qp, warm_ptr);
    sol.x = r.x;
    sol.lambda = r.lambda;
    sol.status = r.status;
    sol.iterations = r.iterations;
    sol.polished = r.polished;
    sol.kkt_residuals = r.residuals;
    Vec6 u = r.x.head<6>();
    u = u.cwiseMax(-lim).cwiseMin(lim);
    sol.u_act = ControlInput::from_vector(u);
    for (const auto& [id, col] : prob.slack_index_map) sol.slacks[id] = r.x[col];
    return sol;
  }

  void remember(const AsifProblem& prob, const QpSolution& sol) {
    if (sol.status == QpStatus::Infeasible) {
      warm_.reset();
      return;
    }
    Memory mem;
    mem.u = sol.u_act.as_vector();
    mem.slack = sol.slacks;
    const Eigen::Index mb = prob.num_barrier_rows();
    for (Eigen::Index r = 0; r < mb; ++r) {
      mem.lambda[prob.row_ids[static_cast<std::size_t>(r)]] = sol.lambda[r];
    }
    for (int b = 0; b < 12; ++b) mem.box_lambda[static_cast<std::size_t>(b)] = sol.lambda[mb + b];
    warm_ = mem;
  }

  CbfModel model_;
  std::vector<ConstraintSpec> specs_;
  AdmmQpSolver solver_;
  std::optional<Memory> warm_;
};

}  // namespace rta
