#include "spikeopt/collocation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "spikeopt/bounded.hpp"
#include "spikeopt/error.hpp"
#include "spikeopt/kernels.hpp"
#include "spikeopt/numerics/quadrature.hpp"

namespace spikeopt {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double max_abs(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

std::pair<double, double> legendre(int n, double x) {
  if (n == 0) return {1.0, 0.0};
  double p0 = 1.0, p1 = x;
  for (int k = 2; k <= n; ++k) {
    const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
    p0 = p1;
    p1 = p2;
  }
  // L_n' from the three-term relation; at the ends use the closed value.
  double dp;
  if (std::abs(std::abs(x) - 1.0) < 1e-15)
    dp = 0.5 * n * (n + 1.0) * (x > 0.0 ? 1.0 : (n % 2 ? 1.0 : -1.0));
  else
    dp = n * (p0 - x * p1) / (1.0 - x * x);
  return {p1, dp};
}

CollocationGrid lgl_grid(int N) {
  if (N < 2) throw Error(ErrorCode::BadParameter, "LGL grid needs N >= 2");
  CollocationGrid grid;
  grid.N = N;
  grid.nodes.resize(N + 1);
  grid.weights.resize(N + 1);
  grid.legendre.resize(N + 1);
  grid.nodes[0] = -1.0;
  grid.nodes[N] = 1.0;
  for (int j = 1; j < N; ++j) {
    // Newton on (1 - x^2) L_N' from the Chebyshev-Lobatto point.
    double x = -std::cos(std::numbers::pi * j / N);
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= N; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      const double dx = (p0 - x * p1) / ((N + 1.0) * p1);
      x += dx;
      if (std::abs(dx) < 1e-16) break;
    }
    grid.nodes[j] = x;
  }
  const double nn = N * (N + 1.0);
  for (int j = 0; j <= N; ++j) {
    grid.legendre[j] = legendre(N, grid.nodes[j]).first;
    grid.weights[j] = 2.0 / (nn * grid.legendre[j] * grid.legendre[j]);
  }
  grid.D = Eigen::MatrixXd::Zero(N + 1, N + 1);
  for (int j = 0; j <= N; ++j)
    for (int k = 0; k <= N; ++k)
      if (j != k) grid.D(j, k) = grid.legendre[j] / grid.legendre[k] / (grid.nodes[j] - grid.nodes[k]);
  grid.D(0, 0) = -nn / 4.0;
  grid.D(N, N) = nn / 4.0;
  return grid;
}

NlpProblem::NlpProblem(PhaseModel model, double target_T, double M, bool charge_balanced, CollocationGrid grid)
    : model_(std::move(model)), T_(target_T), M_(M), balanced_(charge_balanced), grid_(std::move(grid)) {
  if (!(target_T > 0.0) || !std::isfinite(target_T))
    throw Error(ErrorCode::BadParameter, "target spiking time must be positive");
  if (!(M > 0.0)) throw Error(ErrorCode::BadParameter, "current bound must be positive");
  const Eigen::Index n = grid_.D.rows();
  D_rows_.resize(static_cast<std::size_t>(n * n));
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(D_rows_.data(), n, n) = grid_.D;
}

NlpProblem assemble_nlp(const PhaseModel& model, double target_T, double M, bool charge_balanced,
                        const CollocationGrid& grid) {
  return NlpProblem(model, target_T, M, charge_balanced, grid);
}

double NlpProblem::objective(const Eigen::VectorXd& x) const {
  double s = 0.0;
  for (std::size_t i = 0; i < nodes(); ++i) {
    const double u = x[control_index(i)];
    s += grid_.weights[i] * u * u;
  }
  return 0.5 * T_ * s;
}

Eigen::VectorXd NlpProblem::objective_gradient(const Eigen::VectorXd& x) const {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(num_variables());
  for (std::size_t i = 0; i < nodes(); ++i) g[control_index(i)] = T_ * grid_.weights[i] * x[control_index(i)];
  return g;
}

Eigen::VectorXd NlpProblem::constraints(const Eigen::VectorXd& x) const {
  const std::size_t n = nodes();
  const double h = 0.5 * T_;
  Eigen::VectorXd c(num_constraints());
  const Eigen::VectorXd theta = x.segment(0, n);
  Eigen::VectorXd dtheta(n);
  kernels::gemv(D_rows_, {theta.data(), n}, {dtheta.data(), n});
  for (std::size_t i = 0; i < n; ++i) {
    const double th = theta[i], u = x[control_index(i)];
    c[i] = dtheta[i] - h * (model_.f(th) + u * model_.g(th));
  }
  std::size_t row = n;
  if (balanced_) {
    Eigen::VectorXd dp(n);
    kernels::gemv(D_rows_, {x.data() + n, n}, {dp.data(), n});
    for (std::size_t i = 0; i < n; ++i) c[row + i] = dp[i] - h * x[control_index(i)];
    row += n;
  }
  c[row++] = theta[0];
  c[row++] = theta[n - 1] - kTwoPi;
  if (balanced_) {
    c[row++] = x[p_index(0)];
    c[row++] = x[p_index(n - 1)];
  }
  return c;
}

Eigen::MatrixXd NlpProblem::constraint_jacobian(const Eigen::VectorXd& x) const {
  const std::size_t n = nodes();
  const double h = 0.5 * T_;
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(num_constraints(), num_variables());
  J.block(0, 0, n, n) = grid_.D;
  for (std::size_t i = 0; i < n; ++i) {
    const double th = x[i], u = x[control_index(i)];
    J(i, i) -= h * (model_.df(th) + u * model_.dg(th));
    J(i, control_index(i)) = -h * model_.g(th);
  }
  std::size_t row = n;
  if (balanced_) {
    J.block(row, n, n, n) = grid_.D;
    for (std::size_t i = 0; i < n; ++i) J(row + i, control_index(i)) = -h;
    row += n;
  }
  J(row++, 0) = 1.0;
  J(row++, n - 1) = 1.0;
  if (balanced_) {
    J(row++, p_index(0)) = 1.0;
    J(row++, p_index(n - 1)) = 1.0;
  }
  return J;
}

Eigen::MatrixXd NlpProblem::lagrangian_hessian(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const {
  const std::size_t n = nodes();
  const double h = 0.5 * T_;
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(num_variables(), num_variables());
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t ui = control_index(i);
    const double th = x[i], u = x[ui];
    H(ui, ui) += T_ * grid_.weights[i];
    H(i, i) -= y[i] * h * (model_.d2f(th) + u * model_.d2g(th));
    const double cross = -y[i] * h * model_.dg(th);
    H(i, ui) += cross;
    H(ui, i) += cross;
  }
  return H;
}

Eigen::VectorXd NlpProblem::initial_guess() const {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(num_variables());
  for (std::size_t i = 0; i < nodes(); ++i) x[i] = std::numbers::pi * (grid_.nodes[i] + 1.0);
  return x;
}

Eigen::VectorXd NlpProblem::project(Eigen::VectorXd x) const {
  for (std::size_t i = 0; i < nodes(); ++i) {
    double& u = x[control_index(i)];
    u = std::clamp(u, -M_, M_);
  }
  return x;
}

namespace {

// Defect rows are weighted by the square root of the quadrature weights,
// which keeps the penalty close to an L2 norm of the residual.
struct AugmentedLagrangian {
  const NlpProblem& prob;
  Eigen::VectorXd scale;
  Eigen::VectorXd lambda;
  double rho;

  Eigen::VectorXd scaled_constraints(const Eigen::VectorXd& x) const {
    return scale.cwiseProduct(prob.constraints(x));
  }
  double value(const Eigen::VectorXd& x) const {
    const Eigen::VectorXd c = scaled_constraints(x);
    return prob.objective(x) + lambda.dot(c) + 0.5 * rho * c.squaredNorm();
  }
};

Eigen::VectorXd row_scaling(const NlpProblem& prob) {
  const std::size_t n = prob.nodes();
  Eigen::VectorXd s = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(prob.num_constraints()));
  const std::size_t defect_rows = prob.charge_balanced() ? 2 * n : n;
  for (std::size_t r = 0; r < defect_rows; ++r) {
    const Eigen::Index i = static_cast<Eigen::Index>(r % n);
    s[static_cast<Eigen::Index>(r)] = std::sqrt(prob.grid().weights[static_cast<std::size_t>(i)]);
  }
  return s;
}

// x - P(x - g) restricted to the box on the control block.
Eigen::VectorXd projected_gradient(const NlpProblem& prob, const Eigen::VectorXd& x, const Eigen::VectorXd& g) {
  return x - prob.project(x - g);
}

// min g.d + d'Hd/2 subject to the control box at x + d, by primal-dual
// active sets. H must be positive definite.
Eigen::VectorXd box_qp_step(const NlpProblem& prob, const Eigen::VectorXd& x, const Eigen::VectorXd& g,
                            const Eigen::MatrixXd& H) {
  const Eigen::Index nv = x.size();
  const double M = prob.bound();
  std::vector<Eigen::Index> controls;
  for (std::size_t i = 0; i < prob.nodes(); ++i) controls.push_back(static_cast<Eigen::Index>(prob.control_index(i)));

  // -1 lower, +1 upper, 0 free. Start from bounds that are already tight
  // with the gradient pushing outward.
  std::vector<int> state(static_cast<std::size_t>(nv), 0);
  for (Eigen::Index k : controls) {
    if (x[k] >= M && g[k] < 0.0) state[k] = 1;
    if (x[k] <= -M && g[k] > 0.0) state[k] = -1;
  }
  Eigen::VectorXd d = Eigen::VectorXd::Zero(nv);
  for (int round = 0; round < 50; ++round) {
    std::vector<Eigen::Index> free;
    for (Eigen::Index k = 0; k < nv; ++k) {
      if (state[k] == 0)
        free.push_back(k);
      else
        d[k] = state[k] * M - x[k];
    }
    const Eigen::Index nf = static_cast<Eigen::Index>(free.size());
    Eigen::VectorXd rhs(nf);
    Eigen::MatrixXd Hf(nf, nf);
    for (Eigen::Index a = 0; a < nf; ++a) {
      double r = -g[free[a]];
      for (Eigen::Index k = 0; k < nv; ++k)
        if (state[k] != 0) r -= H(free[a], k) * d[k];
      rhs[a] = r;
      for (Eigen::Index b = 0; b < nf; ++b) Hf(a, b) = H(free[a], free[b]);
    }
    // Levenberg shift on the free block until it factors.
    const double diag_scale = std::max(1.0, Hf.diagonal().cwiseAbs().maxCoeff());
    double shift = 0.0;
    Eigen::LLT<Eigen::MatrixXd> llt(Hf);
    for (int k = 0; k < 60 && llt.info() != Eigen::Success; ++k) {
      shift = shift == 0.0 ? 1e-12 * diag_scale : shift * 10.0;
      llt.compute(Hf + shift * Eigen::MatrixXd::Identity(nf, nf));
    }
    const Eigen::VectorXd df = llt.solve(rhs);
    for (Eigen::Index a = 0; a < nf; ++a) d[free[a]] = df[a];

    // Multipliers of the fixed bounds and primal violations of the free ones.
    const Eigen::VectorXd z = H * d + g;
    bool changed = false;
    for (Eigen::Index k : controls) {
      const double xn = x[k] + d[k];
      int next = state[k];
      if (state[k] == 0) {
        if (xn > M) next = 1;
        if (xn < -M) next = -1;
      } else if (state[k] * z[k] > 0.0) {
        next = 0;
      }
      if (next != state[k]) {
        state[k] = next;
        changed = true;
      }
    }
    if (!changed) break;
  }
  // Guard against round-off past the box.
  for (Eigen::Index k : controls) d[k] = std::clamp(x[k] + d[k], -M, M) - x[k];
  return d;
}

// Minimizes the augmented Lagrangian over the box; returns iterations used.
int projected_newton(const NlpProblem& prob, const AugmentedLagrangian& al, Eigen::VectorXd& x, double tol,
                     int max_iters) {
  int it = 0;
  for (; it < max_iters; ++it) {
    const Eigen::VectorXd c = al.scaled_constraints(x);
    const Eigen::MatrixXd J = al.scale.asDiagonal() * prob.constraint_jacobian(x);
    const Eigen::VectorXd y = al.lambda + al.rho * c;
    const Eigen::VectorXd g = prob.objective_gradient(x) + J.transpose() * y;
    const double pg = max_abs(projected_gradient(prob, x, g));
    if (pg <= tol) break;

    Eigen::MatrixXd H = prob.lagrangian_hessian(x, al.scale.cwiseProduct(y));
    H.noalias() += al.rho * J.transpose() * J;
    const Eigen::VectorXd d = box_qp_step(prob, x, g, H);
    const double slope = g.dot(d);
    if (!(slope < 0.0)) break;

    const double phi0 = al.value(x);
    double alpha = 1.0;
    bool accepted = false;
    // The merit function cannot resolve decreases this small; fall back to
    // the projected gradient.
    if (-slope <= 1e-12 * (1.0 + std::abs(phi0))) {
      const Eigen::VectorXd xt = x + d;
      const Eigen::VectorXd ct = al.scaled_constraints(xt);
      const Eigen::VectorXd gt = prob.objective_gradient(xt) +
                                 (al.scale.asDiagonal() * prob.constraint_jacobian(xt)).transpose() *
                                     (al.lambda + al.rho * ct);
      if (max_abs(projected_gradient(prob, xt, gt)) < pg) {
        x = xt;
        continue;
      }
    }
    for (int ls = 0; ls < 60; ++ls, alpha *= 0.5) {
      const Eigen::VectorXd xt = x + alpha * d;
      const double phi = al.value(xt);
      if (std::isfinite(phi) && phi <= phi0 + 1e-4 * alpha * slope) {
        accepted = true;
        x = xt;
        break;
      }
    }
    if (!accepted) break;
    if (alpha * max_abs(d) <= 1e-15 * (1.0 + max_abs(x))) return it + 1;
  }
  return it;
}

struct Kkt {
  double violation;
  double stationarity;
};

Kkt measure(const NlpProblem& prob, const Eigen::VectorXd& scale, const Eigen::VectorXd& x,
            const Eigen::VectorXd& lambda) {
  const double c_scale = std::max(1.0, 0.5 * prob.target_T() * prob.model().rate_scale());
  const Eigen::VectorXd gf = prob.objective_gradient(x);
  const Eigen::VectorXd grad = gf + (scale.asDiagonal() * prob.constraint_jacobian(x)).transpose() * lambda;
  return {max_abs(prob.constraints(x)) / c_scale,
          max_abs(projected_gradient(prob, x, grad)) / (1.0 + max_abs(gf))};
}

// Newton iterations on the KKT system with the current active bounds held
// fixed. Succeeds only if both measures reach tol with the bounds respected
// and the bound multipliers of the right sign.
bool kkt_acceleration(const NlpProblem& prob, const Eigen::VectorXd& scale, Eigen::VectorXd& x,
                      Eigen::VectorXd& lambda, double tol) {
  const double M = prob.bound();
  const Eigen::Index nv = x.size();
  const Eigen::Index m = scale.size();
  std::vector<int> state(static_cast<std::size_t>(nv), 0);
  {
    const Eigen::VectorXd grad = prob.objective_gradient(x) +
                                 (scale.asDiagonal() * prob.constraint_jacobian(x)).transpose() * lambda;
    for (std::size_t i = 0; i < prob.nodes(); ++i) {
      const Eigen::Index k = static_cast<Eigen::Index>(prob.control_index(i));
      if (x[k] >= M * (1.0 - 1e-9) && grad[k] <= 0.0) state[k] = 1;
      if (x[k] <= -M * (1.0 - 1e-9) && grad[k] >= 0.0) state[k] = -1;
    }
  }
  std::vector<Eigen::Index> free;
  for (Eigen::Index k = 0; k < nv; ++k) {
    if (state[k] == 0)
      free.push_back(k);
    else
      x[k] = state[k] * M;
  }
  const Eigen::Index nf = static_cast<Eigen::Index>(free.size());

  Eigen::VectorXd xt = x, lt = lambda;
  for (int it = 0; it < 8; ++it) {
    const Eigen::MatrixXd J = scale.asDiagonal() * prob.constraint_jacobian(xt);
    const Eigen::VectorXd c = scale.cwiseProduct(prob.constraints(xt));
    const Eigen::VectorXd grad = prob.objective_gradient(xt) + J.transpose() * lt;
    const Eigen::MatrixXd H = prob.lagrangian_hessian(xt, scale.cwiseProduct(lt));
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(nf + m, nf + m);
    Eigen::VectorXd r(nf + m);
    for (Eigen::Index a = 0; a < nf; ++a) {
      for (Eigen::Index b = 0; b < nf; ++b) K(a, b) = H(free[a], free[b]);
      K.block(nf, a, m, 1) = J.col(free[a]);
      K.block(a, nf, 1, m) = J.col(free[a]).transpose();
      r[a] = -grad[free[a]];
    }
    r.tail(m) = -c;
    const Eigen::VectorXd step = K.partialPivLu().solve(r);
    if (!step.allFinite()) return false;
    for (Eigen::Index a = 0; a < nf; ++a) xt[free[a]] += step[a];
    lt += step.tail(m);
    if (xt != prob.project(xt)) return false;
    const Kkt k = measure(prob, scale, xt, lt);
    if (k.violation <= tol && k.stationarity <= tol) {
      x = xt;
      lambda = lt;
      return true;
    }
  }
  return false;
}

}  // namespace

NlpResult solve_nlp(const NlpProblem& prob, const Eigen::VectorXd& guess, const NlpOptions& opts) {
  if (guess.size() != static_cast<Eigen::Index>(prob.num_variables()))
    throw Error(ErrorCode::BadParameter, "initial guess has the wrong size");
  NlpResult res;
  Eigen::VectorXd x = prob.project(guess);
  const Eigen::VectorXd scale = row_scaling(prob);
  AugmentedLagrangian al{prob, scale, Eigen::VectorXd::Zero(scale.size()), opts.penalty};

  double prev_viol = std::numeric_limits<double>::infinity();
  for (int outer = 0; outer < opts.max_outer; ++outer) {
    res.outer_rounds = outer + 1;
    const double g_scale = 1.0 + max_abs(prob.objective_gradient(x));
    res.inner_iterations += projected_newton(prob, al, x, 1e-2 * opts.tol * g_scale, opts.max_inner);

    al.lambda += al.rho * al.scaled_constraints(x);
    Kkt k = measure(prob, scale, x, al.lambda);
    if (k.violation > opts.tol || k.stationarity > opts.tol) {
      Eigen::VectorXd xa = x, la = al.lambda;
      if (k.violation <= opts.acceleration_threshold && kkt_acceleration(prob, scale, xa, la, opts.tol)) {
        x = xa;
        al.lambda = la;
        k = measure(prob, scale, x, al.lambda);
      }
    }
    res.constraint_violation = k.violation;
    res.stationarity = k.stationarity;
    if (k.violation <= opts.tol && k.stationarity <= opts.tol) {
      res.converged = true;
      break;
    }
    if (k.violation > opts.sufficient_decrease * prev_viol) al.rho *= opts.penalty_growth;
    prev_viol = k.violation;
  }
  res.x = x;
  res.multipliers = scale.cwiseProduct(al.lambda);
  res.objective = prob.objective(x);
  return res;
}

double DirectSolution::control_at(double time) const {
  if (control.empty() || !(time >= 0.0 && time <= target_T)) return 0.0;
  const double s = 2.0 * time / target_T - 1.0;
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < tau.size(); ++k) {
    const double diff = s - tau[k];
    if (diff == 0.0) return control[k];
    const double q = bary[k] / diff;
    num += q * control[k];
    den += q;
  }
  return std::clamp(num / den, -bound, bound);
}

namespace {

// Barycentric weights 1 / prod (x_k - x_j), rescaled to max magnitude 1.
std::vector<double> barycentric_weights(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<double> logs(n), sign(n, 1.0);
  for (std::size_t k = 0; k < n; ++k) {
    double l = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == k) continue;
      const double d = x[k] - x[j];
      l -= std::log(std::abs(d));
      if (d < 0.0) sign[k] = -sign[k];
    }
    logs[k] = l;
  }
  const double top = *std::max_element(logs.begin(), logs.end());
  std::vector<double> w(n);
  for (std::size_t k = 0; k < n; ++k) w[k] = sign[k] * std::exp(logs[k] - top);
  return w;
}

DirectSolution unpack(const NlpProblem& prob, NlpResult res) {
  DirectSolution out;
  out.target_T = prob.target_T();
  out.bound = prob.bound();
  out.charge_balanced = prob.charge_balanced();
  const std::size_t n = prob.nodes();
  out.tau = prob.grid().nodes;
  out.bary = barycentric_weights(out.tau);
  out.t.resize(n);
  out.theta.resize(n);
  out.p.assign(n, 0.0);
  out.control.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.t[i] = 0.5 * (out.tau[i] + 1.0) * prob.target_T();
    out.theta[i] = res.x[prob.theta_index(i)];
    if (prob.charge_balanced()) out.p[i] = res.x[prob.p_index(i)];
    out.control[i] = res.x[prob.control_index(i)];
  }
  out.nlp = std::move(res);
  if (!out.charge_balanced) {
    // Charge is not a variable here; integrate the control interpolant.
    const auto I = [&out](double t) { return out.control_at(t); };
    for (std::size_t i = 1; i < n; ++i) out.p[i] = out.p[i - 1] + integrate_interval(I, out.t[i - 1], out.t[i], 1, 8);
  }
  return out;
}

}  // namespace

DirectSolution solve_direct(const PhaseModel& model, double target_T, double M, bool charge_balanced, int N,
                            const NlpOptions& opts) {
  const NlpProblem prob(model, target_T, M, charge_balanced, lgl_grid(N));
  NlpResult res = solve_nlp(prob, prob.initial_guess(), opts);
  if (res.converged) return unpack(prob, std::move(res));

  // Warm start from the indirect solution sampled at the nodes.
  const double bound = M >= 1e12 ? kUnbounded : M;
  const BoundedSolution indirect = solve_bounded(model, target_T, bound, charge_balanced);
  const ControlSolution& sol = indirect.control;
  Eigen::VectorXd x = prob.initial_guess();
  for (std::size_t i = 0; i < prob.nodes(); ++i) {
    const double t = std::min(0.5 * (prob.grid().nodes[i] + 1.0) * target_T, sol.achieved_T);
    x[prob.theta_index(i)] = sol.phase_at(t);
    if (charge_balanced) x[prob.p_index(i)] = sol.trajectory->component_at(t, 1);
    x[prob.control_index(i)] = sol.current_at(t);
  }
  NlpResult warm = solve_nlp(prob, x, opts);
  if (!warm.converged)
    throw Error(ErrorCode::NoConvergence, "collocation did not converge (violation " +
                                              std::to_string(warm.constraint_violation) + ", stationarity " +
                                              std::to_string(warm.stationarity) + ")");
  DirectSolution out = unpack(prob, std::move(warm));
  out.warm_started = true;
  return out;
}

}  // namespace spikeopt
