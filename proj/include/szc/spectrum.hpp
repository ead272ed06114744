#pragma once

#include <vector>

#include <Eigen/Dense>

#include "szc/geometry.hpp"

namespace szc {

// One stationary state of the box-plus-delta-barrier Hamiltonian,
//
//   H = -1/2 d^2/dx^2 + alpha_abs * delta(x - d),    E = k^2 / 2,
//
// written piecewise as
//   psi(x) = A sin(k (x + L/2))   for x <= d,
//   psi(x) = B sin(k (L/2 - x))   for x >  d,
// normalized to unit L2 norm, with psi positive next to the left wall (A > 0).
struct EigenLevel {
  int index = 0;        // 1-based
  double energy = 0.0;  // k^2 / 2
  double k = 0.0;
  double amp_left = 0.0;   // A
  double amp_right = 0.0;  // B
  // True for the analytic branch with a node exactly at the barrier
  // (commensurate compartment widths); such levels do not depend on alpha.
  bool node_at_barrier = false;
};

struct Spectrum {
  SpbGeometry geometry;
  double alpha = 0.0;  // in units of E0*L
  std::vector<EigenLevel> levels;

  int size() const { return static_cast<int>(levels.size()); }
};

// Solves the stationary eigenproblem at fixed barrier strength.
//
// Eigen-wavenumbers are the roots of
//   f(k) = k [cot(k L_L) + cot(k L_R)] + 2 alpha_abs = 0,
// which interleave the poles {j pi / L_L} U {l pi / L_R} of the cotangents:
// each inter-pole interval holds exactly one root, and a coincident pole pair
// is itself an eigenvalue (node-at-barrier state).  Roots are bracketed per
// interval and refined by bisection until the relative k-width is below tol.
//
// alpha is in E0*L units; throws std::domain_error for alpha < 0 and
// BracketingError if a bracket cannot be established.
Spectrum solve_spectrum(const SpbGeometry& geometry, double alpha, int n_levels,
                        double tol = 1e-13);

// Piecewise evaluation of the closed-form eigenfunction.  x must lie inside
// the box.
double eigenfunction_eval(const EigenLevel& level, const SpbGeometry& geometry, double x);

// O[m][n] = <psi_m^from | psi_n^to>, from closed-form integrals of sine
// products split at x = d.  Both spectra must share the same geometry and
// basis size.
Eigen::MatrixXd overlap_matrix(const Spectrum& from, const Spectrum& to);

}  // namespace szc
