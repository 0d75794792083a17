#pragma once

#include <array>
#include <cmath>
#include <utility>

namespace triphase {

struct SimplexResult {
  std::array<double, 2> x{};
  double value = 0.0;
  int evaluations = 0;
};

/// Two-dimensional Nelder-Mead downhill simplex with the standard
/// reflection/expansion/contraction/shrink coefficients (1, 2, 0.5, 0.5).
/// Stops when the simplex diameter falls below `xtol`, the function spread
/// below `ftol`, or after `max_evals` objective evaluations.
template <typename F>
SimplexResult nelder_mead_2d(F&& f, std::array<double, 2> start, double step,
                             int max_evals, double xtol, double ftol) {
  struct Vertex {
    std::array<double, 2> x;
    double fx;
  };
  int evals = 0;
  auto eval = [&](std::array<double, 2> p) {
    ++evals;
    return f(p[0], p[1]);
  };

  std::array<Vertex, 3> s{};
  s[0] = {start, eval(start)};
  s[1] = {{start[0] + step, start[1]}, 0.0};
  s[1].fx = eval(s[1].x);
  s[2] = {{start[0], start[1] + step}, 0.0};
  s[2].fx = eval(s[2].x);

  auto order = [&] {
    if (s[0].fx > s[1].fx) std::swap(s[0], s[1]);
    if (s[1].fx > s[2].fx) std::swap(s[1], s[2]);
    if (s[0].fx > s[1].fx) std::swap(s[0], s[1]);
  };
  order();

  while (evals < max_evals) {
    double diam = 0.0;
    for (int i = 1; i < 3; ++i)
      diam = std::max(diam, std::hypot(s[i].x[0] - s[0].x[0], s[i].x[1] - s[0].x[1]));
    if (diam < xtol && std::abs(s[2].fx - s[0].fx) < ftol) break;

    std::array<double, 2> c = {0.5 * (s[0].x[0] + s[1].x[0]),
                               0.5 * (s[0].x[1] + s[1].x[1])};
    auto point = [&](double t) {
      return std::array<double, 2>{c[0] + t * (c[0] - s[2].x[0]),
                                   c[1] + t * (c[1] - s[2].x[1])};
    };

    auto xr = point(1.0);
    double fr = eval(xr);
    if (fr < s[0].fx) {
      auto xe = point(2.0);
      double fe = eval(xe);
      s[2] = fe < fr ? Vertex{xe, fe} : Vertex{xr, fr};
    } else if (fr < s[1].fx) {
      s[2] = {xr, fr};
    } else {
      bool outside = fr < s[2].fx;
      auto xc = point(outside ? 0.5 : -0.5);
      double fc = eval(xc);
      if (fc < (outside ? fr : s[2].fx)) {
        s[2] = {xc, fc};
      } else {
        for (int i = 1; i < 3; ++i) {
          s[i].x = {0.5 * (s[i].x[0] + s[0].x[0]), 0.5 * (s[i].x[1] + s[0].x[1])};
          s[i].fx = eval(s[i].x);
        }
      }
    }
    order();
  }
  return {s[0].x, s[0].fx, evals};
}

}  // namespace triphase
