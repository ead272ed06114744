#pragma once

#include <cstdint>
#include <functional>
#include <optional>

#include <Eigen/Dense>

#include "szc/dynamics.hpp"
#include "szc/geometry.hpp"
#include "szc/protocol.hpp"

namespace szc {

// Randomized truncated-Fourier control ansatz
//
//   alpha(t) = alpha0(t) [ 1 + lambda(t) sum_n ( A_n cos(w_n t) + B_n sin(w_n t) ) ],
//
// with alpha0(t) a linear ramp 0 -> alpha_final and lambda(t) = sin(pi t / T),
// so alpha(0) = 0 and alpha(T) = alpha_final for every parameter choice.
struct CrabAnsatz {
  double duration = 5.0;       // T
  double alpha_final = 200.0;  // E0*L units
  Eigen::VectorXd a;           // A_n
  Eigen::VectorXd b;           // B_n
  Eigen::VectorXd omega;       // w_n

  int components() const { return static_cast<int>(a.size()); }

  double base_ramp(double t) const { return alpha_final * t / duration; }

  // Value of the ansatz; values below zero are reported as-is (the
  // propagator clamps).  t outside [0, T] is a domain error.
  double operator()(double t) const;

  // Parameter vector layout: [A_1..A_Nc, B_1..B_Nc, w_1..w_Nc].
  Eigen::VectorXd pack() const;
  void unpack(const Eigen::VectorXd& params);
};

struct NelderMeadOptions {
  int max_evals = 4000;
  double spread_tol = 1e-10;  // stop when max-min vertex value falls below...
  double point_tol = 1e-9;    // ...and the simplex diameter falls below this
  int restarts = 0;           // simplex rebuilds around the best point
  std::uint64_t seed = 0;     // used by restart randomization
  Eigen::VectorXd initial_step;               // per-dimension; empty: 0.25
  std::optional<Eigen::MatrixXd> initial_simplex;  // (k+1) x k rows = vertices
};

struct NelderMeadResult {
  Eigen::VectorXd best_point;
  double best_value = 0.0;
  int evals = 0;
  int iterations = 0;
  int nonfinite_evals = 0;
  bool converged = false;      // spread fell below spread_tol at least once
  Eigen::MatrixXd final_simplex;
  Eigen::VectorXd final_values;
};

// Derivative-free simplex maximization (reflection 1, expansion 2,
// contraction 0.5, shrink 0.5).  Non-finite objective values are replaced by
// a large penalty so the vertex is rejected.  Deterministic given the seed.
NelderMeadResult nelder_mead_maximize(const std::function<double(const Eigen::VectorXd&)>& objective,
                                      const Eigen::VectorXd& start,
                                      const NelderMeadOptions& options);

struct CrabOptions {
  int n_components = 3;  // N_c
  double alpha_final = 200.0;
  int max_evals = 2000;  // per restart
  int restarts = 5;
  std::uint64_t seed = 1;
  // Stop restarting once the re-evaluated protocol clears both bars.
  double target_cost = 0.9995;
  double target_leakage = 5e-3;  // sum of occupations above level 2
  double spread_tol = 1e-12;
  int dense_knots = 201;  // knot grid of the returned protocol
  // Optimization runs coarse, the returned protocol is re-evaluated fine.
  PropagateOptions opt_fidelity;     // default: n_micro = 200/s, n_basis = 30
  PropagateOptions report_fidelity;  // default: report_fidelity(T)
};

struct CrabResult {
  Protocol protocol;          // dense-knot spline of the best ansatz
  CrabAnsatz ansatz;          // exact parameters of the best ansatz
  Eigen::VectorXd occupations;  // final occupations of `protocol`, report fidelity
  double cost = 0.0;            // crab_cost of those occupations
  double leakage = 0.0;         // occupation above level 2
  int eval_count = 0;           // total objective evaluations across restarts
  int restarts_used = 0;
  bool below_target = false;    // budget exhausted before the targets were met
};

// Maximizes crab_cost(propagate(ansatz)) over {A_n, B_n, w_n} by multi-restart
// Nelder-Mead; restarts randomize w_n = (2 pi n / T)(1 + r_n), r_n uniform in
// [-1/2, 1/2].  N_c = 0 returns the bare ramp and its cost.
CrabResult crab_optimize(const SpbGeometry& geometry, double duration, const CrabOptions& options);

}  // namespace szc
