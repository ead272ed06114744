#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "szc/geometry.hpp"
#include "szc/protocol.hpp"
#include "szc/spectrum.hpp"

namespace szc {

// Wave-function amplitudes over a truncated instantaneous eigenbasis.  The
// alpha field names the basis the amplitudes are expressed in (E0*L units);
// accumulated dynamical phases are absorbed into the amplitudes.
struct AmplitudeState {
  Eigen::VectorXcd amplitudes;
  double alpha = 0.0;
  double t = 0.0;
};

// State concentrated on one instantaneous eigenlevel (1-based) at the given
// barrier strength.
AmplitudeState basis_state(int level, double alpha, int n_basis);
inline AmplitudeState ground_state(double alpha, int n_basis) {
  return basis_state(1, alpha, n_basis);
}

struct PropagateOptions {
  int n_micro = 0;    // 0: auto, 400 per unit time (2000 for T = 5)
  int n_basis = 30;
  double solver_tol = 1e-13;
  // Raw-norm drift beyond this throws ConvergenceError; <= 0 disables the
  // check (norm drift is always reported in the result).
  double norm_tolerance = 1e-6;
  bool record_trajectory = false;
  int record_stride = 0;  // 0: auto, at most ~2000 samples
};

// Coarse tier used inside training loops; fine tier for reported results.
PropagateOptions train_fidelity(double duration);
PropagateOptions report_fidelity(double duration);

struct PropagationResult {
  AmplitudeState final_state;  // expressed in the basis at alpha(T)
  double norm_drift = 0.0;     // |raw final norm^2 - 1|
  int clamped_steps = 0;       // micro-steps where alpha(t) < 0 was clamped to 0
  // Recorded micro-step samples; each entry is expressed in the basis at its
  // own alpha field (the micro-step midpoint value).
  std::vector<AmplitudeState> trajectory;
};

// Propagates through alpha(t) on [0, duration], holding alpha fixed at each
// micro-step midpoint: exact phases exp(-i E_n dt) in that basis, then a
// basis change to the next step via overlap_matrix.  Negative interpolant
// values are clamped to 0 and counted.  The state is never renormalized.
PropagationResult propagate(const AmplitudeState& initial, double duration,
                            const std::function<double(double)>& alpha_of_t,
                            const SpbGeometry& geometry, const PropagateOptions& options);

PropagationResult propagate(const AmplitudeState& initial, const Protocol& protocol,
                            const SpbGeometry& geometry, const PropagateOptions& options);

// Raw occupations |a_n|^2 (global phases cancel; no renormalization).
Eigen::VectorXd occupations(const AmplitudeState& state);

// Cost of a final distribution: C = 1 - sum_{n=1,2} (|c_n|^2 - 1/2)^2.
double crab_cost(const Eigen::VectorXd& final_occupations);

struct SweepRow {
  double d = 0.0;
  double occ1 = 0.0;
  double occ2 = 0.0;
  double occ_higher = 0.0;
  bool ok = false;
};

// One propagation of the protocol per asymmetry d (geometry otherwise taken
// from the template).  Rows whose propagation fails its convergence check are
// marked failed and carry NaNs.  jobs > 1 evaluates rows in a small worker
// pool; results are ordered by d regardless.
std::vector<SweepRow> sweep_protocol(const Protocol& protocol, const SpbGeometry& geometry_template,
                                     const std::vector<double>& d_values,
                                     const PropagateOptions& options, int jobs = 1);

}  // namespace szc
