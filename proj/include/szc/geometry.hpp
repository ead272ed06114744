#pragma once

#include <numbers>
#include <stdexcept>

namespace szc {

// Natural units hbar = m = 1 throughout.
//
// The box occupies x in [-L/2, L/2]; a delta barrier of strength alpha sits
// at x = d (offset measured from the center).  Barrier strengths are quoted
// in units of E0*L everywhere in this library, where E0 = pi^2/(2 L^2) is the
// ground-state energy of the bare box.
struct SpbGeometry {
  double box_width = 1.0;  // L
  double offset = 0.0;     // d, 0 <= d < L/2

  double left_width() const { return 0.5 * box_width + offset; }    // L_L
  double right_width() const { return 0.5 * box_width - offset; }   // L_R

  // E0 = pi^2 / (2 L^2), the bare-box ground-state energy.
  double ground_energy() const {
    const double pi = std::numbers::pi;
    return pi * pi / (2.0 * box_width * box_width);
  }

  // One unit of barrier strength, E0 * L (energy times length).
  double alpha_unit() const { return ground_energy() * box_width; }

  void validate() const {
    if (!(box_width > 0.0))
      throw std::domain_error("SpbGeometry: box_width must be positive");
    if (!(offset >= 0.0) || !(offset < 0.5 * box_width))
      throw std::domain_error("SpbGeometry: offset must satisfy 0 <= d < L/2");
  }

  bool same_as(const SpbGeometry& other) const {
    return box_width == other.box_width && offset == other.offset;
  }
};

}  // namespace szc
