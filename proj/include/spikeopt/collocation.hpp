#pragma once

#include <vector>

#include <Eigen/Dense>

#include "spikeopt/phase_model.hpp"

namespace spikeopt {

/// Legendre-Gauss-Lobatto nodes on [-1, 1] with quadrature weights and the
/// nodal differentiation matrix.
struct CollocationGrid {
  int N = 0;
  std::vector<double> nodes;
  std::vector<double> weights;
  Eigen::MatrixXd D;
  /// L_N at the nodes.
  std::vector<double> legendre;

  std::size_t size() const { return nodes.size(); }
};

/// Throws Error(BadParameter) for N < 2.
CollocationGrid lgl_grid(int N);

/// Legendre polynomial L_n and its derivative at x.
std::pair<double, double> legendre(int n, double x);

/// Transcription of the minimum-power problem on an LGL grid. Variables are
/// laid out as [theta_0..theta_N, p_0..p_N, I_0..I_N]; the p block is absent
/// without the charge constraint. Physical time is t = (tau + 1) T / 2.
class NlpProblem {
 public:
  NlpProblem(PhaseModel model, double target_T, double M, bool charge_balanced, CollocationGrid grid);

  const PhaseModel& model() const { return model_; }
  const CollocationGrid& grid() const { return grid_; }
  double target_T() const { return T_; }
  double bound() const { return M_; }
  bool charge_balanced() const { return balanced_; }

  std::size_t nodes() const { return grid_.size(); }
  std::size_t num_variables() const { return (balanced_ ? 3 : 2) * nodes(); }
  /// Defects at every node plus the boundary pins.
  std::size_t num_constraints() const { return balanced_ ? 2 * nodes() + 4 : nodes() + 2; }

  std::size_t theta_index(std::size_t i) const { return i; }
  std::size_t p_index(std::size_t i) const { return nodes() + i; }
  std::size_t control_index(std::size_t i) const { return (balanced_ ? 2 : 1) * nodes() + i; }

  double objective(const Eigen::VectorXd& x) const;
  Eigen::VectorXd objective_gradient(const Eigen::VectorXd& x) const;
  Eigen::VectorXd constraints(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd constraint_jacobian(const Eigen::VectorXd& x) const;
  /// Hessian of the objective plus sum_j y_j * Hessian(c_j).
  Eigen::MatrixXd lagrangian_hessian(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const;

  /// theta linear from 0 to 2 pi, p = 0, I = 0.
  Eigen::VectorXd initial_guess() const;
  Eigen::VectorXd project(Eigen::VectorXd x) const;

 private:
  PhaseModel model_;
  double T_;
  double M_;
  bool balanced_;
  CollocationGrid grid_;
  std::vector<double> D_rows_;  // row-major copy of D
};

NlpProblem assemble_nlp(const PhaseModel& model, double target_T, double M, bool charge_balanced,
                        const CollocationGrid& grid);

struct NlpOptions {
  double penalty = 10.0;
  double penalty_growth = 10.0;
  int max_outer = 8;
  int max_inner = 100;
  /// Penalty grows unless the violation falls by this factor per round.
  double sufficient_decrease = 0.25;
  /// Violation below which a Newton step on the KKT system is tried.
  double acceleration_threshold = 1e-3;
  /// Scaled constraint violation and stationarity targets.
  double tol = 1e-7;
};

struct NlpResult {
  Eigen::VectorXd x;
  Eigen::VectorXd multipliers;
  double objective = 0.0;
  double constraint_violation = 0.0;  // scaled max |c|
  double stationarity = 0.0;          // scaled projected Lagrangian gradient
  int outer_rounds = 0;
  int inner_iterations = 0;
  bool converged = false;
};

/// Augmented Lagrangian over the box |I| <= M with a projected Newton inner
/// loop. Never throws on non-convergence; check `converged`.
NlpResult solve_nlp(const NlpProblem& problem, const Eigen::VectorXd& guess, const NlpOptions& opts = {});

/// Collocation result in physical time with node values.
struct DirectSolution {
  NlpResult nlp;
  double target_T = 0.0;
  double bound = 0.0;
  bool charge_balanced = false;
  bool warm_started = false;
  std::vector<double> tau;
  std::vector<double> t;
  std::vector<double> theta;
  std::vector<double> p;
  std::vector<double> control;
  /// Barycentric weights of the nodes.
  std::vector<double> bary;

  /// Polynomial interpolant of the node controls, clipped to the bound; zero
  /// outside [0, T].
  double control_at(double time) const;
  double objective() const { return nlp.objective; }
};

/// Solves from the default guess; on failure warm-starts from the indirect
/// solution. Throws Error(NoConvergence) if both fail.
DirectSolution solve_direct(const PhaseModel& model, double target_T, double M, bool charge_balanced, int N = 150,
                            const NlpOptions& opts = {});

}  // namespace spikeopt
