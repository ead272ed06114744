#pragma once

#include <vector>

#include "szc/geometry.hpp"

namespace szc::testing {

// Independent reference for the box-plus-delta spectrum: central-difference
// discretization of -1/2 d^2/dx^2 on a uniform Dirichlet grid, the delta
// represented as a single-cell potential of height alpha_abs / h on the grid
// node at x = d.  Eigenvalues of the resulting tridiagonal matrix are found
// by bisection on Sturm-sequence counts.
//
// The cell count is adjusted upward from n_cells_hint (by at most ~200) so
// that x = d falls exactly on a grid node; off-node placement would cost an
// O(h) error, on-node the scheme is O(h^2).
std::vector<double> grid_oracle_eigenvalues(const SpbGeometry& geometry, double alpha_e0l,
                                            int n_levels, int n_cells_hint = 4096);

}  // namespace szc::testing
