#pragma once

// Free hexagonal symbol h(x) = 1 + e^{ix1} + e^{ix2}; bands are +-|h|/3.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <set>
#include <stdexcept>
#include <utility>
#include <vector>

#include <boost/math/tools/roots.hpp>

namespace hexqg {

inline std::complex<double> symbol_h(double x1, double x2) {
  return 1.0 + std::polar(1.0, x1) + std::polar(1.0, x2);
}

// |h|^2 = 3 + 2cos x1 + 2cos x2 + 2cos(x1 - x2)
inline double symbol_h2(double x1, double x2) {
  return 3.0 + 2.0 * std::cos(x1) + 2.0 * std::cos(x2) + 2.0 * std::cos(x1 - x2);
}

inline std::pair<double, double> band_values(double x1, double x2) {
  const double l = std::abs(symbol_h(x1, x2)) / 3.0;
  return {-l, l};
}

struct BandPoint {
  double x1, x2, lambda1, lambda2;
};

struct BandGrid {
  int resolution = 0;
  std::vector<BandPoint> points;  // row-major in (x1, x2), x_i = 2 pi i / resolution
};

inline BandGrid band_grid(int resolution) {
  if (resolution < 1) throw std::invalid_argument("band_grid: resolution must be >= 1");
  BandGrid g;
  g.resolution = resolution;
  g.points.reserve(static_cast<std::size_t>(resolution) * static_cast<std::size_t>(resolution));
  const double dx = 2.0 * std::numbers::pi / resolution;
  for (int i = 0; i < resolution; ++i)
    for (int j = 0; j < resolution; ++j) {
      const double x1 = i * dx, x2 = j * dx;
      const auto [a, b] = band_values(x1, x2);
      g.points.push_back({x1, x2, a, b});
    }
  return g;
}

struct TorusPoint {
  double x1, x2;
};

// Points with lambda_j(x) = mu, by root solves along lines x1 = const.
inline std::vector<TorusPoint> fermi_points(double mu, int count) {
  if (count < 1) throw std::invalid_argument("fermi_points: count must be >= 1");
  if (!(std::abs(mu) < 1.0)) throw std::invalid_argument("fermi_points: mu outside band (-1, 1)");
  if (mu == 0.0) throw std::invalid_argument("fermi_points: mu = 0 is a singular value");
  const double target = 9.0 * mu * mu;
  const double twopi = 2.0 * std::numbers::pi;

  std::vector<TorusPoint> all;
  for (int lines = std::max(count, 8);; lines *= 2) {
    all.clear();
    const int nscan = 256;
    for (int i = 0; i < lines; ++i) {
      const double x1 = twopi * (i + 0.5) / lines;
      auto g = [&](double x2) { return symbol_h2(x1, x2) - target; };
      for (int j = 0; j < nscan; ++j) {
        const double a = twopi * j / nscan, b = twopi * (j + 1) / nscan;
        const double ga = g(a), gb = g(b);
        if (ga == 0.0) {
          all.push_back({x1, a});
        } else if ((ga > 0.0) != (gb > 0.0) && gb != 0.0) {
          std::uintmax_t it = 100;
          auto r = boost::math::tools::toms748_solve(g, a, b, ga, gb, boost::math::tools::eps_tolerance<double>(52), it);
          all.push_back({x1, 0.5 * (r.first + r.second)});
        }
      }
    }
    if (static_cast<int>(all.size()) >= count || lines > (1 << 16)) break;
  }
  if (all.empty()) throw std::runtime_error("fermi_points: no level-set points found");
  std::vector<TorusPoint> out;
  for (int i = 0; i < count; ++i)
    out.push_back(all[static_cast<std::size_t>(i) * all.size() / static_cast<std::size_t>(count)]);
  return out;
}

namespace detail {

inline double snap_third(double v) {
  const double s = std::round(3.0 * v) / 3.0;
  return std::abs(s - v) < 1e-6 ? s : v;
}

}  // namespace detail

// Critical values of the band functions (extrema, saddles, band touching), from a torus grid
// scan followed by Newton refinement and snapping.
inline std::vector<double> critical_values(int resolution = 192) {
  const double dx = 2.0 * std::numbers::pi / resolution;
  auto grad = [](double x1, double x2) {
    return std::pair{-2.0 * std::sin(x1) - 2.0 * std::sin(x1 - x2), -2.0 * std::sin(x2) + 2.0 * std::sin(x1 - x2)};
  };
  auto gnorm = [&](double x1, double x2) {
    auto [g1, g2] = grad(x1, x2);
    return std::hypot(g1, g2);
  };
  std::set<double> vals;
  for (int i = 0; i < resolution; ++i)
    for (int j = 0; j < resolution; ++j) {
      double x1 = i * dx, x2 = j * dx;
      const double g0 = gnorm(x1, x2);
      bool local_min = true;
      for (int di = -1; di <= 1 && local_min; ++di)
        for (int dj = -1; dj <= 1; ++dj)
          if ((di || dj) && gnorm(x1 + di * dx, x2 + dj * dx) < g0) {
            local_min = false;
            break;
          }
      if (!local_min) continue;
      if (symbol_h2(x1, x2) < 1e-20) {
        vals.insert(0.0);
        continue;
      }
      // Newton on grad |h|^2 = 0
      for (int it = 0; it < 50; ++it) {
        auto [g1, g2] = grad(x1, x2);
        const double c12 = 2.0 * std::cos(x1 - x2);
        const double h11 = -2.0 * std::cos(x1) - c12, h22 = -2.0 * std::cos(x2) - c12, h12 = c12;
        const double det = h11 * h22 - h12 * h12;
        if (std::abs(det) < 1e-14) break;
        const double d1 = (h22 * g1 - h12 * g2) / det, d2 = (h11 * g2 - h12 * g1) / det;
        x1 -= d1;
        x2 -= d2;
        if (std::hypot(d1, d2) < 1e-15) break;
      }
      if (gnorm(x1, x2) > 1e-9) continue;
      const double l = std::sqrt(std::max(0.0, symbol_h2(x1, x2))) / 3.0;
      vals.insert(detail::snap_third(l));
      vals.insert(detail::snap_third(-l));
    }
  return {vals.begin(), vals.end()};
}

// Band touching and band extrema; these are the vertex energies excluded from probing.
inline std::vector<double> exceptional_energies(int resolution = 192) {
  const BandGrid g = band_grid(resolution);
  double lo = 0.0, hi = 0.0, gap = 1e300;
  double y1 = 0.0, y2 = 0.0;
  for (const BandPoint& p : g.points) {
    lo = std::min(lo, p.lambda1);
    hi = std::max(hi, p.lambda2);
    if (p.lambda2 - p.lambda1 < gap) {
      gap = p.lambda2 - p.lambda1;
      y1 = p.x1;
      y2 = p.x2;
    }
  }
  std::set<double> out{detail::snap_third(lo), detail::snap_third(hi)};
  // the grid need not contain a touching point: Newton on h(x) = 0 from the smallest gap
  for (int it = 0; it < 50; ++it) {
    const std::complex<double> h = symbol_h(y1, y2);
    const double j11 = -std::sin(y1), j12 = -std::sin(y2), j21 = std::cos(y1), j22 = std::cos(y2);
    const double det = j11 * j22 - j12 * j21;
    if (std::abs(det) < 1e-14) break;
    y1 -= (j22 * h.real() - j12 * h.imag()) / det;
    y2 -= (j11 * h.imag() - j21 * h.real()) / det;
  }
  if (std::abs(symbol_h(y1, y2)) < 1e-12) out.insert(0.0);
  return {out.begin(), out.end()};
}

struct LambdaWindow {
  double a = 0.0;
  double b = 0.0;
  bool closed_right = false;  // only the last window, when lambda_max is not excluded
};

// Excluded points in (0, lambda_max]: sqrt(lambda) in (pi/2) Z, i.e. sin sqrt(lambda) = 0
// or cos sqrt(lambda) in {-1, 0, 1}.
inline std::vector<double> free_excluded_points(double lambda_max) {
  std::vector<double> p;
  for (int j = 1;; ++j) {
    const double r = j * std::numbers::pi / 2.0;
    const double l = r * r;
    if (l > lambda_max) break;
    p.push_back(l);
  }
  return p;
}

inline std::vector<LambdaWindow> windows_from_points(const std::vector<double>& pts, double lambda_max) {
  std::vector<LambdaWindow> w;
  double a = 0.0;
  for (double p : pts) {
    if (p <= a) continue;
    w.push_back({a, p, false});
    a = p;
  }
  if (a < lambda_max) w.push_back({a, lambda_max, true});
  return w;
}

inline std::vector<LambdaWindow> edge_spectrum_windows(double lambda_max) {
  if (!(lambda_max > 0.0)) throw std::invalid_argument("edge_spectrum_windows: lambda_max must be > 0");
  return windows_from_points(free_excluded_points(lambda_max), lambda_max);
}

}  // namespace hexqg
