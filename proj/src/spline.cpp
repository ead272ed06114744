#include "szc/spline.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace szc {

CubicSpline::CubicSpline(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  if (n < 2) throw std::domain_error("CubicSpline: need at least 2 knots");
  if (y.size() != n) throw std::domain_error("CubicSpline: x/y size mismatch");
  for (std::size_t i = 0; i + 1 < n; ++i)
    if (!(x[i + 1] > x[i]))
      throw std::domain_error("CubicSpline: knot times must be strictly increasing");
  for (double v : y)
    if (!std::isfinite(v)) throw std::domain_error("CubicSpline: knot values must be finite");

  x_.assign(x.begin(), x.end());
  y_.assign(y.begin(), y.end());
  m_.assign(n, 0.0);
  if (n == 2) return;  // natural spline of two knots is the straight line

  // Tridiagonal system for interior second derivatives (Thomas algorithm):
  //   (h_{i-1}/6) m_{i-1} + ((h_{i-1}+h_i)/3) m_i + (h_i/6) m_{i+1} = rhs_i
  // with m_0 = m_{n-1} = 0.
  const std::size_t k = n - 2;
  std::vector<double> diag(k), upper(k), rhs(k);
  for (std::size_t i = 0; i < k; ++i) {
    const double h0 = x_[i + 1] - x_[i];
    const double h1 = x_[i + 2] - x_[i + 1];
    diag[i] = (h0 + h1) / 3.0;
    upper[i] = h1 / 6.0;
    rhs[i] = (y_[i + 2] - y_[i + 1]) / h1 - (y_[i + 1] - y_[i]) / h0;
  }
  for (std::size_t i = 1; i < k; ++i) {
    // lower_i == upper_{i-1} by symmetry
    const double w = upper[i - 1] / diag[i - 1];
    diag[i] -= w * upper[i - 1];
    rhs[i] -= w * rhs[i - 1];
  }
  m_[k] = rhs[k - 1] / diag[k - 1];
  for (std::size_t i = k - 1; i >= 1; --i)
    m_[i] = (rhs[i - 1] - upper[i - 1] * m_[i + 1]) / diag[i - 1];
}

double CubicSpline::operator()(double t) const {
  const std::size_t n = x_.size();
  std::size_t i = 0;
  if (t >= x_[n - 2]) {
    i = n - 2;
  } else if (t > x_[0]) {
    i = static_cast<std::size_t>(std::upper_bound(x_.begin(), x_.end(), t) - x_.begin()) - 1;
  }
  const double h = x_[i + 1] - x_[i];
  const double u = (x_[i + 1] - t) / h;
  const double v = (t - x_[i]) / h;
  return u * y_[i] + v * y_[i + 1] +
         ((u * u * u - u) * m_[i] + (v * v * v - v) * m_[i + 1]) * h * h / 6.0;
}

}  // namespace szc
