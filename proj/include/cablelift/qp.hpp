#pragma once

// Dense ADMM (operator splitting) solver for small convex QPs of the form
//
//   min 1/2 x'Px + q'x   s.t.  l <= Ax <= u
//
// A Family owns every buffer the iteration touches, so repeated solves of a
// fixed-shape problem with new data do not allocate.

#include "cablelift/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string_view>

namespace cablelift::qp {

enum class Status { Solved, MaxIter, PrimalInfeasible, DualInfeasible, BadData };

inline std::string_view to_string(Status s) {
  switch (s) {
    case Status::Solved: return "solved";
    case Status::MaxIter: return "max_iter";
    case Status::PrimalInfeasible: return "primal_infeasible";
    case Status::DualInfeasible: return "dual_infeasible";
    case Status::BadData: return "bad_data";
  }
  return "unknown";
}

template <typename Scalar>
struct Settings {
  Scalar eps_abs = Scalar(1e-6);
  Scalar eps_rel = Scalar(1e-6);
  Scalar eps_prim_inf = Scalar(1e-6);
  Scalar eps_dual_inf = Scalar(1e-6);
  int max_iter = 4000;
  Scalar rho = Scalar(0.1);
  Scalar sigma = Scalar(1e-6);
  Scalar alpha = Scalar(1.6);
  /// Residual balancing period (iterations); 0 keeps rho fixed.
  int adaptive_rho_interval = 25;
  Scalar adaptive_rho_tolerance = Scalar(5);
  bool polish = true;
  Scalar polish_delta = Scalar(1e-9);
  int polish_refine_iter = 3;
  bool warm_start = true;

  static Settings single_precision() {
    Settings s;
    s.eps_abs = Scalar(1e-4);
    s.eps_rel = Scalar(1e-4);
    s.eps_prim_inf = Scalar(1e-4);
    s.eps_dual_inf = Scalar(1e-4);
    s.polish_delta = Scalar(1e-6);
    return s;
  }
};

template <typename Scalar>
struct Problem {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Matrix P;
  Vector q;
  Matrix A;
  Vector l;
  Vector u;

  Eigen::Index num_variables() const { return q.size(); }
  Eigen::Index num_constraints() const { return l.size(); }
};

template <typename Scalar>
struct Solution {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Vector x;
  Vector y;
  Status status = Status::MaxIter;
  int iterations = 0;
  Scalar primal_residual = std::numeric_limits<Scalar>::infinity();
  Scalar dual_residual = std::numeric_limits<Scalar>::infinity();
  Scalar objective = std::numeric_limits<Scalar>::quiet_NaN();
  bool polished = false;
  bool warm_started = false;
  int rho_updates = 0;
};

/// Fixed-shape problem family: data changes between solves, dimensions never do.
template <typename Scalar = double>
class Family {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Family(Eigen::Index num_variables, Eigen::Index num_constraints, Settings<Scalar> settings = {})
      : n_(num_variables), m_(num_constraints), settings_(settings), rho_(settings.rho) {
    data_.P = Matrix::Zero(n_, n_);
    data_.q = Vector::Zero(n_);
    data_.A = Matrix::Zero(m_, n_);
    data_.l = Vector::Zero(m_);
    data_.u = Vector::Zero(m_);
    x_ = Vector::Zero(n_);
    xt_ = Vector::Zero(n_);
    x_prev_ = Vector::Zero(n_);
    dx_ = Vector::Zero(n_);
    rhs_ = Vector::Zero(n_);
    Px_ = Vector::Zero(n_);
    Aty_ = Vector::Zero(n_);
    tmp_n_ = Vector::Zero(n_);
    z_ = Vector::Zero(m_);
    zt_ = Vector::Zero(m_);
    z_prev_ = Vector::Zero(m_);
    y_ = Vector::Zero(m_);
    y_prev_ = Vector::Zero(m_);
    dy_ = Vector::Zero(m_);
    Ax_ = Vector::Zero(m_);
    rho_vec_ = Vector::Zero(m_);
    tmp_m_ = Vector::Zero(m_);
    K_ = Matrix::Zero(n_, n_);
    llt_ = Eigen::LLT<Matrix>(n_);
    eig_ = Eigen::SelfAdjointEigenSolver<Matrix>(n_);
    kkt_ = Matrix::Zero(n_ + m_, n_ + m_);
    kkt_true_ = Matrix::Zero(n_ + m_, n_ + m_);
    kkt_lu_ = Eigen::PartialPivLU<Matrix>(n_ + m_);
    kkt_rhs_ = Vector::Zero(n_ + m_);
    kkt_sol_ = Vector::Zero(n_ + m_);
    kkt_res_ = Vector::Zero(n_ + m_);
    active_ = Eigen::VectorXi::Zero(m_);
    warm_x_ = Vector::Zero(n_);
    warm_y_ = Vector::Zero(m_);
    sol_.x = Vector::Zero(n_);
    sol_.y = Vector::Zero(m_);
  }

  Eigen::Index num_variables() const { return n_; }
  Eigen::Index num_constraints() const { return m_; }
  const Settings<Scalar>& settings() const { return settings_; }
  Settings<Scalar>& settings() { return settings_; }
  const Problem<Scalar>& data() const { return data_; }

  /// Replaces the problem data. Throws Error(ShapeMismatch) on a shape change.
  /// Returns false (and marks the data bad) on non-finite or non-convex data.
  bool update(const Problem<Scalar>& problem) {
    if (problem.P.rows() != n_ || problem.P.cols() != n_ || problem.q.size() != n_ ||
        problem.A.rows() != m_ || problem.A.cols() != n_ || problem.l.size() != m_ ||
        problem.u.size() != m_) {
      throw Error(ErrorCode::ShapeMismatch, "problem shape differs from family shape");
    }
    data_.P.noalias() = problem.P;
    data_.q = problem.q;
    data_.A = problem.A;
    data_.l = problem.l;
    data_.u = problem.u;
    return ingest();
  }

  /// In-place access for callers that assemble data directly; call commit() afterwards.
  Problem<Scalar>& mutable_data() { return data_; }
  bool commit() { return ingest(); }

  void set_warm_start(const Vector& x, const Vector& y) {
    warm_x_ = x;
    warm_y_ = y;
    has_warm_ = true;
  }
  void clear_warm_start() { has_warm_ = false; }
  bool has_warm_start() const { return has_warm_; }

  const Solution<Scalar>& solve() {
    sol_.polished = false;
    sol_.rho_updates = 0;
    sol_.iterations = 0;
    sol_.warm_started = false;
    if (bad_data_) {
      sol_.status = Status::BadData;
      return sol_;
    }

    // A warm start keeps the step size the previous solve adapted to; the dual
    // iterate is only meaningful at that rho.
    const bool warm = settings_.warm_start && has_warm_;
    if (!warm) rho_ = settings_.rho;
    set_rho_vector();
    factor();

    if (warm) {
      x_ = warm_x_;
      y_ = warm_y_;
      z_.noalias() = data_.A * x_;
      clamp_to_bounds(z_);
      sol_.warm_started = true;
    } else {
      x_.setZero();
      z_.setZero();
      y_.setZero();
    }

    const Scalar alpha = settings_.alpha;
    const Scalar sigma = settings_.sigma;
    Status status = Status::MaxIter;
    Scalar prim = std::numeric_limits<Scalar>::infinity();
    Scalar dual = std::numeric_limits<Scalar>::infinity();

    // Converged warm start: nothing to iterate.
    compute_residuals(prim, dual);
    if (sol_.warm_started && converged(prim, dual)) {
      status = Status::Solved;
    } else {
      for (int k = 1; k <= settings_.max_iter; ++k) {
        sol_.iterations = k;
        x_prev_ = x_;
        z_prev_ = z_;
        y_prev_ = y_;

        tmp_m_ = rho_vec_.cwiseProduct(z_prev_) - y_prev_;
        rhs_.noalias() = sigma * x_prev_ - data_.q;
        rhs_.noalias() += data_.A.transpose() * tmp_m_;
        xt_ = llt_.solve(rhs_);
        zt_.noalias() = data_.A * xt_;

        x_ = alpha * xt_ + (Scalar(1) - alpha) * x_prev_;
        tmp_m_ = alpha * zt_ + (Scalar(1) - alpha) * z_prev_;
        z_ = tmp_m_ + y_prev_.cwiseQuotient(rho_vec_);
        clamp_to_bounds(z_);
        y_ = y_prev_ + rho_vec_.cwiseProduct(tmp_m_ - z_);

        compute_residuals(prim, dual);
        if (converged(prim, dual)) {
          status = Status::Solved;
          break;
        }
        if (primal_infeasible()) {
          status = Status::PrimalInfeasible;
          break;
        }
        if (dual_infeasible()) {
          status = Status::DualInfeasible;
          break;
        }
        if (settings_.adaptive_rho_interval > 0 && k % settings_.adaptive_rho_interval == 0) {
          adapt_rho(prim, dual);
        }
      }
    }

    sol_.status = status;
    sol_.x = x_;
    sol_.y = y_;
    sol_.primal_residual = prim;
    sol_.dual_residual = dual;
    if (status == Status::Solved && settings_.polish) polish();
    // An unconverged iterate is still the best place to resume from; infeasibility
    // certificates are not.
    if (status == Status::Solved || status == Status::MaxIter) {
      warm_x_ = sol_.x;
      warm_y_ = sol_.y;
      has_warm_ = true;
    }
    tmp_n_.noalias() = data_.P * sol_.x;
    sol_.objective = Scalar(0.5) * sol_.x.dot(tmp_n_) + data_.q.dot(sol_.x);
    return sol_;
  }

  const Solution<Scalar>& last_solution() const { return sol_; }

 private:
  static constexpr Scalar kInfinity = Scalar(1e20);
  static constexpr Scalar kRhoMin = Scalar(1e-6);
  static constexpr Scalar kRhoMax = Scalar(1e6);
  static constexpr Scalar kRhoEqualityScale = Scalar(1e3);

  bool ingest() {
    bad_data_ = false;
    // NaN anywhere or infinite cost/matrix entries are rejected; bounds may be +-inf.
    if (!data_.P.allFinite() || !data_.q.allFinite() || !data_.A.allFinite() || data_.l.hasNaN() ||
        data_.u.hasNaN()) {
      bad_data_ = true;
      return false;
    }
    for (Eigen::Index i = 0; i < m_; ++i) {
      if (data_.l[i] > data_.u[i]) {
        bad_data_ = true;
        return false;
      }
      data_.l[i] = std::max(data_.l[i], -kInfinity);
      data_.u[i] = std::min(data_.u[i], kInfinity);
    }
    K_ = data_.P.transpose();
    data_.P = Scalar(0.5) * (data_.P + K_);
    if (n_ > 0) {
      eig_.compute(data_.P, Eigen::EigenvaluesOnly);
      const Scalar scale = std::max(Scalar(1), data_.P.cwiseAbs().maxCoeff());
      const Scalar floor = std::is_same_v<Scalar, float> ? Scalar(-1e-5) : Scalar(-1e-9);
      if (eig_.eigenvalues().minCoeff() < floor * scale) {
        bad_data_ = true;
        return false;
      }
    }
    return true;
  }

  bool is_equality(Eigen::Index i) const {
    return data_.u[i] - data_.l[i] <= Scalar(1e-4) * settings_.eps_abs * (Scalar(1) + std::abs(data_.l[i]));
  }
  bool is_free(Eigen::Index i) const { return data_.l[i] <= -kInfinity && data_.u[i] >= kInfinity; }

  void set_rho_vector() {
    for (Eigen::Index i = 0; i < m_; ++i) {
      if (is_free(i)) {
        rho_vec_[i] = kRhoMin;
      } else if (is_equality(i)) {
        rho_vec_[i] = kRhoEqualityScale * rho_;
      } else {
        rho_vec_[i] = rho_;
      }
    }
  }

  void factor() {
    K_ = data_.P;
    K_.diagonal().array() += settings_.sigma;
    if (m_ > 0) K_.noalias() += data_.A.transpose() * rho_vec_.asDiagonal() * data_.A;
    llt_.compute(K_);
  }

  void clamp_to_bounds(Vector& v) const { v = v.cwiseMax(data_.l).cwiseMin(data_.u); }

  void compute_residuals(Scalar& prim, Scalar& dual) {
    Ax_.noalias() = data_.A * x_;
    Px_.noalias() = data_.P * x_;
    Aty_.noalias() = data_.A.transpose() * y_;
    prim = m_ > 0 ? (Ax_ - z_).cwiseAbs().maxCoeff() : Scalar(0);
    tmp_n_ = Px_ + data_.q + Aty_;
    dual = n_ > 0 ? tmp_n_.cwiseAbs().maxCoeff() : Scalar(0);
  }

  static Scalar inf_norm(const Vector& v) { return v.size() ? v.cwiseAbs().maxCoeff() : Scalar(0); }

  bool converged(Scalar prim, Scalar dual) const {
    const Scalar eps_prim =
        settings_.eps_abs + settings_.eps_rel * std::max(inf_norm(Ax_), inf_norm(z_));
    const Scalar eps_dual = settings_.eps_abs + settings_.eps_rel * std::max({inf_norm(Px_), inf_norm(Aty_),
                                                                             inf_norm(data_.q)});
    return prim <= eps_prim && dual <= eps_dual;
  }

  bool primal_infeasible() {
    if (m_ == 0) return false;
    dy_ = y_ - y_prev_;
    const Scalar norm_dy = inf_norm(dy_);
    if (norm_dy <= std::numeric_limits<Scalar>::epsilon() * Scalar(100)) return false;
    tmp_n_.noalias() = data_.A.transpose() * dy_;
    if (inf_norm(tmp_n_) > settings_.eps_prim_inf * norm_dy) return false;
    Scalar support = 0;
    for (Eigen::Index i = 0; i < m_; ++i) {
      if (dy_[i] > 0) {
        if (data_.u[i] >= kInfinity) return false;
        support += data_.u[i] * dy_[i];
      } else if (dy_[i] < 0) {
        if (data_.l[i] <= -kInfinity) return false;
        support += data_.l[i] * dy_[i];
      }
    }
    return support < -settings_.eps_prim_inf * norm_dy;
  }

  bool dual_infeasible() {
    dx_ = x_ - x_prev_;
    const Scalar norm_dx = inf_norm(dx_);
    if (norm_dx <= std::numeric_limits<Scalar>::epsilon() * Scalar(100)) return false;
    const Scalar tol = settings_.eps_dual_inf * norm_dx;
    tmp_n_.noalias() = data_.P * dx_;
    if (inf_norm(tmp_n_) > tol) return false;
    if (data_.q.dot(dx_) > -tol) return false;
    tmp_m_.noalias() = data_.A * dx_;
    for (Eigen::Index i = 0; i < m_; ++i) {
      const bool upper_finite = data_.u[i] < kInfinity;
      const bool lower_finite = data_.l[i] > -kInfinity;
      if (upper_finite && tmp_m_[i] > tol) return false;
      if (lower_finite && tmp_m_[i] < -tol) return false;
    }
    return true;
  }

  void adapt_rho(Scalar prim, Scalar dual) {
    const Scalar tiny = Scalar(1e-30);
    const Scalar prim_norm = prim / (std::max(inf_norm(Ax_), inf_norm(z_)) + tiny);
    const Scalar dual_norm =
        dual / (std::max({inf_norm(Px_), inf_norm(Aty_), inf_norm(data_.q)}) + tiny);
    Scalar candidate = rho_ * std::sqrt(prim_norm / (dual_norm + tiny));
    candidate = std::clamp(candidate, kRhoMin, kRhoMax);
    if (candidate > rho_ * settings_.adaptive_rho_tolerance ||
        candidate < rho_ / settings_.adaptive_rho_tolerance) {
      rho_ = candidate;
      set_rho_vector();
      factor();
      ++sol_.rho_updates;
    }
  }

  bool solve_polish_kkt() {
    const Scalar delta = settings_.polish_delta;
    kkt_.setZero();
    kkt_true_.setZero();
    kkt_rhs_.setZero();
    kkt_.topLeftCorner(n_, n_) = data_.P;
    kkt_true_.topLeftCorner(n_, n_) = data_.P;
    kkt_.topLeftCorner(n_, n_).diagonal().array() += delta;
    kkt_rhs_.head(n_) = -data_.q;
    for (Eigen::Index i = 0; i < m_; ++i) {
      const Eigen::Index r = n_ + i;
      if (active_[i] != 0) {
        kkt_.block(r, 0, 1, n_) = data_.A.row(i);
        kkt_.block(0, r, n_, 1) = data_.A.row(i).transpose();
        kkt_true_.block(r, 0, 1, n_) = data_.A.row(i);
        kkt_true_.block(0, r, n_, 1) = data_.A.row(i).transpose();
        kkt_(r, r) = -delta;
        kkt_rhs_[r] = active_[i] < 0 ? data_.l[i] : data_.u[i];
      } else {
        kkt_(r, r) = Scalar(1);
        kkt_true_(r, r) = Scalar(1);
      }
    }
    kkt_lu_.compute(kkt_);
    kkt_sol_ = kkt_lu_.solve(kkt_rhs_);
    for (int it = 0; it < settings_.polish_refine_iter; ++it) {
      kkt_res_ = kkt_rhs_;
      kkt_res_.noalias() -= kkt_true_ * kkt_sol_;
      kkt_sol_ += kkt_lu_.solve(kkt_res_);
    }
    return kkt_sol_.allFinite();
  }

  // Guess the active set from the ADMM iterate and solve the equality-constrained
  // KKT system exactly; keep the result only if it is a valid, better KKT point.
  void polish() {
    for (Eigen::Index i = 0; i < m_; ++i) {
      const bool lower = z_[i] - data_.l[i] < -y_[i];
      const bool upper = data_.u[i] - z_[i] < y_[i];
      active_[i] = lower ? -1 : (upper ? 1 : 0);
    }
    // Dependent active rows can give multipliers of the wrong sign; release the worst
    // offender and re-solve, a bounded number of times.
    const Scalar sign_tol = std::max(settings_.eps_abs, Scalar(100) * std::numeric_limits<Scalar>::epsilon());
    bool signs_ok = false;
    for (Eigen::Index attempt = 0; attempt <= m_ && !signs_ok; ++attempt) {
      if (!solve_polish_kkt()) return;
      Eigen::Index worst = -1;
      Scalar worst_val = sign_tol;
      for (Eigen::Index i = 0; i < m_; ++i) {
        if (active_[i] == 0 || is_equality(i)) continue;
        const Scalar wrong = active_[i] < 0 ? kkt_sol_[n_ + i] : -kkt_sol_[n_ + i];
        if (wrong > worst_val) {
          worst_val = wrong;
          worst = i;
        }
      }
      if (worst < 0) {
        signs_ok = true;
      } else {
        active_[worst] = 0;
      }
    }
    if (!signs_ok) return;

    tmp_n_ = kkt_sol_.head(n_);
    tmp_m_ = kkt_sol_.tail(m_);
    Ax_.noalias() = data_.A * tmp_n_;
    zt_ = Ax_;
    clamp_to_bounds(zt_);
    const Scalar prim = inf_norm(Ax_ - zt_);
    Px_.noalias() = data_.P * tmp_n_;
    Aty_.noalias() = data_.A.transpose() * tmp_m_;
    xt_ = Px_ + data_.q + Aty_;
    const Scalar dual = inf_norm(xt_);
    const Scalar tol = settings_.eps_abs;
    if ((prim <= sol_.primal_residual || prim <= tol) && (dual <= sol_.dual_residual || dual <= tol)) {
      sol_.x = tmp_n_;
      sol_.y = tmp_m_;
      sol_.primal_residual = prim;
      sol_.dual_residual = dual;
      sol_.polished = true;
    }
  }

  Eigen::Index n_;
  Eigen::Index m_;
  Settings<Scalar> settings_;
  Problem<Scalar> data_;
  bool bad_data_ = true;
  Scalar rho_ = Scalar(0.1);

  Vector x_, xt_, x_prev_, dx_, rhs_, Px_, Aty_, tmp_n_;
  Vector z_, zt_, z_prev_, y_, y_prev_, dy_, Ax_, rho_vec_, tmp_m_;
  Matrix K_;
  Eigen::LLT<Matrix> llt_;
  Eigen::SelfAdjointEigenSolver<Matrix> eig_;

  Matrix kkt_, kkt_true_;
  Eigen::PartialPivLU<Matrix> kkt_lu_;
  Vector kkt_rhs_, kkt_sol_, kkt_res_;
  Eigen::VectorXi active_;

  bool has_warm_ = false;
  Vector warm_x_, warm_y_;
  Solution<Scalar> sol_;
};

template <typename Scalar>
struct WarmStart {
  typename Problem<Scalar>::Vector x;
  typename Problem<Scalar>::Vector y;
};

/// One-shot solve. Shapes must be consistent; otherwise Error(ShapeMismatch).
template <typename Scalar>
Solution<Scalar> solve(const Problem<Scalar>& problem, const std::optional<WarmStart<Scalar>>& warm = std::nullopt,
                       const Settings<Scalar>& settings = {}) {
  Family<Scalar> family(problem.num_variables(), problem.num_constraints(), settings);
  family.update(problem);
  if (warm) family.set_warm_start(warm->x, warm->y);
  return family.solve();
}

/// Max-norm KKT residuals of (x, y) for the problem: primal, stationarity, and
/// dual sign violation (y_i > 0 only at the upper bound, y_i < 0 only at the lower).
template <typename Scalar>
struct KktResiduals {
  Scalar primal = 0;
  Scalar stationarity = 0;
  Scalar complementarity = 0;
};

template <typename Scalar>
KktResiduals<Scalar> kkt_residuals(const Problem<Scalar>& p, const typename Problem<Scalar>::Vector& x,
                                   const typename Problem<Scalar>::Vector& y) {
  KktResiduals<Scalar> r;
  const typename Problem<Scalar>::Vector Ax = p.A * x;
  const typename Problem<Scalar>::Vector P_sym = Scalar(0.5) * (p.P + p.P.transpose()) * x;
  if (p.l.size() > 0) {
    r.primal = (Ax - Ax.cwiseMax(p.l).cwiseMin(p.u)).cwiseAbs().maxCoeff();
  }
  if (x.size() > 0) r.stationarity = (P_sym + p.q + p.A.transpose() * y).cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    // Complementarity: y_i * (Ax_i - bound) with the bound the multiplier pushes against.
    if (y[i] > 0 && std::isfinite(p.u[i])) {
      r.complementarity = std::max(r.complementarity, std::abs(y[i] * (p.u[i] - Ax[i])));
    } else if (y[i] < 0 && std::isfinite(p.l[i])) {
      r.complementarity = std::max(r.complementarity, std::abs(y[i] * (Ax[i] - p.l[i])));
    } else if (y[i] != 0) {
      r.complementarity = std::max(r.complementarity, std::abs(y[i]));
    }
  }
  return r;
}

}  // namespace cablelift::qp
