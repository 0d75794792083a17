#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace triphase {

/// 2x2 real symmetric matrix, stored as (xx, xy, yy).
struct Sym2 {
  double xx = 0.0;
  double xy = 0.0;
  double yy = 0.0;

  double trace() const { return xx + yy; }
  double det() const { return xx * yy - xy * xy; }

  /// Tr(A^-1) = Tr(A)/det(A). Returns +inf for singular matrices.
  double trace_inverse() const {
    double d = det();
    if (d <= 0.0) return std::numeric_limits<double>::infinity();
    return trace() / d;
  }

  /// Eigenvalues, ascending.
  std::array<double, 2> eigenvalues() const {
    double m = 0.5 * (xx + yy);
    double r = std::sqrt(0.25 * (xx - yy) * (xx - yy) + xy * xy);
    return {m - r, m + r};
  }

  /// Symmetric matrix with eigenvalues clamped from below.
  Sym2 clamped_eigenvalues(double floor) const {
    double m = 0.5 * (xx + yy);
    double h = 0.5 * (xx - yy);
    double r = std::sqrt(h * h + xy * xy);
    double lo = m - r, hi = m + r;
    if (lo >= floor) return *this;
    // eigenvector of `hi`: (cos t, sin t) with t from the off-diagonal
    double clo = std::max(lo, floor);
    double chi = std::max(hi, floor);
    if (r == 0.0) return {chi, 0.0, chi};
    double cx = h / r, sx = xy / r;  // cos(2t), sin(2t)
    double a = 0.5 * (chi + clo), b = 0.5 * (chi - clo);
    return {a + b * cx, b * sx, a - b * cx};
  }

  /// Lower-triangular L with L L^T = this (requires PSD; tiny negative
  /// diagonals are clamped to zero).
  std::array<double, 3> cholesky() const {  // (l11, l21, l22)
    double l11 = std::sqrt(std::max(xx, 0.0));
    double l21 = l11 > 0.0 ? xy / l11 : 0.0;
    double l22 = std::sqrt(std::max(yy - l21 * l21, 0.0));
    return {l11, l21, l22};
  }

  friend Sym2 operator*(double s, Sym2 m) { return {s * m.xx, s * m.xy, s * m.yy}; }
  friend Sym2 operator+(Sym2 a, Sym2 b) { return {a.xx + b.xx, a.xy + b.xy, a.yy + b.yy}; }
};

}  // namespace triphase
