#include "szc/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "szc/errors.hpp"

namespace szc {

namespace {

constexpr double kPi = std::numbers::pi;

// Relative gap below which two poles from the two compartment families are
// treated as coincident, i.e. as an exact node-at-barrier eigenvalue.
constexpr double kPoleMergeTol = 1e-9;

// Matching function whose roots (away from cotangent poles) are the
// eigen-wavenumbers: f(k) = k [cot(k L_L) + cot(k L_R)] + 2 alpha_abs.
inline double matching(double k, double ll, double lr, double two_alpha) {
  const double xl = k * ll;
  const double xr = k * lr;
  return k * (std::cos(xl) / std::sin(xl) + std::cos(xr) / std::sin(xr)) + two_alpha;
}

struct Pole {
  double k = 0.0;
  bool merged = false;  // poles from both families coincide here
};

// Sorted pole list of cot(k L_L) and cot(k L_R) up to k_cap, with coincident
// pairs merged into single node-at-barrier markers.
std::vector<Pole> pole_list(double ll, double lr, double k_cap) {
  std::vector<Pole> poles;
  std::size_t j = 1, l = 1;
  double pl = kPi / ll, pr = kPi / lr;
  while (pl <= k_cap || pr <= k_cap) {
    const double lo = std::min(pl, pr);
    const double hi = std::max(pl, pr);
    if (hi - lo <= kPoleMergeTol * hi) {
      poles.push_back({0.5 * (pl + pr), true});
      ++j, ++l;
      pl = static_cast<double>(j) * kPi / ll;
      pr = static_cast<double>(l) * kPi / lr;
    } else if (pl < pr) {
      poles.push_back({pl, false});
      pl = static_cast<double>(++j) * kPi / ll;
    } else {
      poles.push_back({pr, false});
      pr = static_cast<double>(++l) * kPi / lr;
    }
  }
  return poles;
}

// Exactly one root of the matching function lies strictly inside (a, b) when
// a and b are consecutive poles (f -> +inf at a+, -inf at b-).  Probes move
// inward from the ends until the signs confirm the bracket, then bisection
// refines to relative width tol.
double bisect_root(double a, double b, double ll, double lr, double two_alpha, double tol) {
  const double width = b - a;
  double lo = 0.0, hi = 0.0;
  double h = 1e-3 * width;
  bool ok = false;
  for (int tries = 0; tries < 60; ++tries, h *= 0.125) {
    lo = a + h;
    if (lo > a && matching(lo, ll, lr, two_alpha) > 0.0) { ok = true; break; }
  }
  if (!ok) {
    std::ostringstream msg;
    msg << "solve_spectrum: no positive-sign probe above pole, k-interval [" << a << ", " << b << "]";
    throw BracketingError(msg.str());
  }
  ok = false;
  h = 1e-3 * width;
  for (int tries = 0; tries < 60; ++tries, h *= 0.125) {
    hi = b - h;
    if (hi < b && hi > lo && matching(hi, ll, lr, two_alpha) < 0.0) { ok = true; break; }
  }
  if (!ok) {
    std::ostringstream msg;
    msg << "solve_spectrum: no negative-sign probe below pole, k-interval [" << a << ", " << b << "]";
    throw BracketingError(msg.str());
  }
  for (int it = 0; it < 200 && (hi - lo) > tol * lo; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (matching(mid, ll, lr, two_alpha) > 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

// Closed-form normalization: integral of (A sin(k u))^2 over [0, W] is
// A^2 (W/2 - sin(2 k W)/(4 k)).
double norm_squared(double a, double b, double k, double ll, double lr) {
  const double il = 0.5 * ll - std::sin(2.0 * k * ll) / (4.0 * k);
  const double ir = 0.5 * lr - std::sin(2.0 * k * lr) / (4.0 * k);
  return a * a * il + b * b * ir;
}

EigenLevel make_level(int index, double k, double ll, double lr, double two_alpha,
                      bool node_at_barrier) {
  const double sl = std::sin(k * ll), cl = std::cos(k * ll);
  const double sr = std::sin(k * lr), cr = std::cos(k * lr);

  double a, b;
  if (node_at_barrier) {
    // psi(d) = 0; derivative continuity fixes the amplitude ratio.
    a = -cr;
    b = cl;
  } else if (std::min(std::abs(sl), std::abs(sr)) > 0.05) {
    // Continuity A sin(k L_L) = B sin(k L_R).
    a = sr;
    b = sl;
  } else {
    // Near a node at the barrier the sines lose relative accuracy; the
    // derivative-jump row of the matching system is well conditioned there:
    // A (k c_L + 2 alpha s_L) + B k c_R = 0.
    a = -k * cr;
    b = k * cl + two_alpha * sl;
  }

  const double nrm = std::sqrt(norm_squared(a, b, k, ll, lr));
  a /= nrm;
  b /= nrm;
  if (a < 0.0) { a = -a; b = -b; }  // canonical sign: psi > 0 at the left wall

  EigenLevel lvl;
  lvl.index = index;
  lvl.k = k;
  lvl.energy = 0.5 * k * k;
  lvl.amp_left = a;
  lvl.amp_right = b;
  lvl.node_at_barrier = node_at_barrier;
  return lvl;
}

// Integral of sin(km u) sin(kn u) over [0, W].  The trig values of km W and
// kn W are passed in so bulk evaluation needs no transcendentals; the
// difference form switches to a direct sin for small arguments where the
// product expansion would cancel.
inline double sine_product_integral(double km, double kn, double w, double sm, double cm,
                                    double sn, double cn) {
  const double diff = km - kn;
  const double sum = km + kn;
  double term_diff;
  if (std::abs(diff) * w < 1e-3) {
    term_diff = (diff == 0.0) ? w : std::sin(diff * w) / diff;
  } else {
    term_diff = (sm * cn - cm * sn) / diff;
  }
  double term_sum;
  if (sum * w < 1e-3) {
    term_sum = (sum == 0.0) ? w : std::sin(sum * w) / sum;
  } else {
    term_sum = (sm * cn + cm * sn) / sum;
  }
  return 0.5 * (term_diff - term_sum);
}

}  // namespace

Spectrum solve_spectrum(const SpbGeometry& geometry, double alpha, int n_levels, double tol) {
  geometry.validate();
  if (!(alpha >= 0.0)) throw std::domain_error("solve_spectrum: alpha must be >= 0");
  if (n_levels < 1) throw std::domain_error("solve_spectrum: n_levels must be >= 1");
  if (!(tol > 0.0)) throw std::domain_error("solve_spectrum: tol must be > 0");

  const double ll = geometry.left_width();
  const double lr = geometry.right_width();
  const double two_alpha = 2.0 * alpha * geometry.alpha_unit();

  // Pole density is L/pi per unit k, one root per inter-pole interval.
  double k_cap = (n_levels + 5) * kPi / geometry.box_width;
  std::vector<Pole> poles = pole_list(ll, lr, k_cap);
  while (static_cast<int>(poles.size()) < n_levels + 2) {
    k_cap *= 1.5;
    poles = pole_list(ll, lr, k_cap);
  }

  Spectrum spec;
  spec.geometry = geometry;
  spec.alpha = alpha;
  spec.levels.reserve(n_levels);

  double prev = 0.0;
  for (const Pole& pole : poles) {
    if (spec.size() >= n_levels) break;
    const double root = bisect_root(prev, pole.k, ll, lr, two_alpha, tol);
    spec.levels.push_back(make_level(spec.size() + 1, root, ll, lr, two_alpha, false));
    if (pole.merged && spec.size() < n_levels)
      spec.levels.push_back(make_level(spec.size() + 1, pole.k, ll, lr, two_alpha, true));
    prev = pole.k;
  }

  for (int i = 1; i < spec.size(); ++i) {
    if (!(spec.levels[i].k > spec.levels[i - 1].k)) {
      std::ostringstream msg;
      msg << "solve_spectrum: non-increasing roots near k-interval [" << spec.levels[i - 1].k
          << ", " << spec.levels[i].k << "]";
      throw BracketingError(msg.str());
    }
  }
  return spec;
}

double eigenfunction_eval(const EigenLevel& level, const SpbGeometry& geometry, double x) {
  const double half = 0.5 * geometry.box_width;
  if (!(x >= -half) || !(x <= half))
    throw std::domain_error("eigenfunction_eval: x outside the box");
  if (x <= geometry.offset) return level.amp_left * std::sin(level.k * (x + half));
  return level.amp_right * std::sin(level.k * (half - x));
}

Eigen::MatrixXd overlap_matrix(const Spectrum& from, const Spectrum& to) {
  if (!from.geometry.same_as(to.geometry))
    throw std::domain_error("overlap_matrix: geometry mismatch");
  if (from.size() != to.size())
    throw std::domain_error("overlap_matrix: basis size mismatch");

  const int n = from.size();
  const double ll = from.geometry.left_width();
  const double lr = from.geometry.right_width();

  Eigen::ArrayXd sl_f(n), cl_f(n), sr_f(n), cr_f(n);
  Eigen::ArrayXd sl_t(n), cl_t(n), sr_t(n), cr_t(n);
  for (int i = 0; i < n; ++i) {
    sl_f[i] = std::sin(from.levels[i].k * ll);
    cl_f[i] = std::cos(from.levels[i].k * ll);
    sr_f[i] = std::sin(from.levels[i].k * lr);
    cr_f[i] = std::cos(from.levels[i].k * lr);
    sl_t[i] = std::sin(to.levels[i].k * ll);
    cl_t[i] = std::cos(to.levels[i].k * ll);
    sr_t[i] = std::sin(to.levels[i].k * lr);
    cr_t[i] = std::cos(to.levels[i].k * lr);
  }

  Eigen::MatrixXd o(n, n);
  for (int m = 0; m < n; ++m) {
    const EigenLevel& fm = from.levels[m];
    for (int j = 0; j < n; ++j) {
      const EigenLevel& tj = to.levels[j];
      const double left = sine_product_integral(fm.k, tj.k, ll, sl_f[m], cl_f[m], sl_t[j], cl_t[j]);
      const double right = sine_product_integral(fm.k, tj.k, lr, sr_f[m], cr_f[m], sr_t[j], cr_t[j]);
      o(m, j) = fm.amp_left * tj.amp_left * left + fm.amp_right * tj.amp_right * right;
    }
  }
  return o;
}

}  // namespace szc
