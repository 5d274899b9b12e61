#pragma once

// Single-edge Schrodinger problems -y'' + q y = lambda y on [0,1].

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/tools/roots.hpp>

namespace hexqg {

namespace detail {

// local 4-point Lagrange cubic on uniform samples over [0,1]
inline double cubic_uniform(const std::vector<double>& v, double z) {
  const int M = static_cast<int>(v.size()) - 1;
  const double t = std::clamp(z, 0.0, 1.0) * M;
  const int np = std::min(4, M + 1);
  const int i0 = std::clamp(static_cast<int>(std::floor(t)) - 1, 0, M + 1 - np);
  double s = 0.0;
  for (int i = i0; i < i0 + np; ++i) {
    double w = 1.0;
    for (int j = i0; j < i0 + np; ++j)
      if (j != i) w *= (t - j) / static_cast<double>(i - j);
    s += w * v[static_cast<std::size_t>(i)];
  }
  return s;
}

}  // namespace detail

class SymmetricPotential {
 public:
  enum class Repr { cosine, samples };

  SymmetricPotential() : repr_(Repr::cosine), data_{0.0} {}

  // q(z) = c0 + sum_m c_m cos(2 pi m z)
  static SymmetricPotential cosine(std::vector<double> c) {
    if (c.empty()) c.push_back(0.0);
    for (double v : c)
      if (!std::isfinite(v)) throw std::invalid_argument("potential: non-finite cosine coefficient");
    SymmetricPotential q;
    q.repr_ = Repr::cosine;
    q.data_ = std::move(c);
    return q;
  }

  // values on z_i = i/M, M even, value[i] == value[M-i]
  static SymmetricPotential samples(std::vector<double> v) {
    if (v.size() < 3 || (v.size() - 1) % 2 != 0)
      throw std::invalid_argument("potential: samples need M+1 values with M even and M >= 2");
    const std::size_t M = v.size() - 1;
    for (std::size_t i = 0; i <= M; ++i) {
      if (!std::isfinite(v[i])) throw std::invalid_argument("potential: non-finite sample");
      if (v[i] != v[M - i]) throw std::invalid_argument("potential: samples are not symmetric (q(z) != q(1-z))");
    }
    SymmetricPotential q;
    q.repr_ = Repr::samples;
    q.data_ = std::move(v);
    return q;
  }

  static SymmetricPotential constant(double c) { return cosine({c}); }
  static SymmetricPotential zero() { return cosine({0.0}); }

  Repr repr() const { return repr_; }
  const std::vector<double>& data() const { return data_; }

  bool is_constant() const {
    if (repr_ == Repr::cosine)
      return std::all_of(data_.begin() + 1, data_.end(), [](double c) { return c == 0.0; });
    return std::all_of(data_.begin(), data_.end(), [&](double v) { return v == data_.front(); });
  }
  double constant_value() const { return data_.front(); }
  bool is_zero() const { return is_constant() && constant_value() == 0.0; }

  double operator()(double z) const {
    if (repr_ == Repr::cosine) {
      double s = data_[0];
      for (std::size_t m = 1; m < data_.size(); ++m)
        s += data_[m] * std::cos(2.0 * std::numbers::pi * static_cast<double>(m) * z);
      return s;
    }
    return interpolate(z);
  }

  bool operator==(const SymmetricPotential&) const = default;

 private:
  double interpolate(double z) const { return detail::cubic_uniform(data_, z); }

  Repr repr_;
  std::vector<double> data_;
};

struct OdeSettings {
  int steps = 2048;
};

struct EdgeCharacteristic {
  double lambda = 0.0;
  double phi1 = 0.0;   // phi(1, lambda), phi(0)=0, phi'(0)=1
  double dphi1 = 0.0;  // phi'(1, lambda)
};

// Both fundamental solutions at z = 1: phi (0,1 data) and theta (1,0 data).
struct Fundamental {
  double phi = 0.0;
  double dphi = 0.0;
  double theta = 0.0;
  double dtheta = 0.0;
};

struct Trajectory {
  std::vector<double> y;   // values on z_i = i/steps
  std::vector<double> dy;  // derivatives on the same nodes
};

class ExcludedEnergy : public std::runtime_error {
 public:
  ExcludedEnergy(double lambda, const std::string& what) : std::runtime_error(what), lambda_(lambda) {}
  double lambda() const { return lambda_; }

 private:
  double lambda_;
};

// Rejection rule for weight blow-up.
inline bool near_dirichlet(double phi1, double dphi1) { return std::abs(phi1) < 1e-8 * std::max(1.0, std::abs(dphi1)); }

// Fixed-step RK4 for y'' = (q - lambda) y with q tabulated on half steps.
class EdgeSolver {
 public:
  explicit EdgeSolver(const SymmetricPotential& q, OdeSettings s = {}) : q_(q), steps_(s.steps) {
    if (steps_ < 2 || steps_ % 2 != 0) throw std::invalid_argument("EdgeSolver: steps must be even and >= 2");
    if (q.is_constant()) {
      closed_ = true;
      qmin_ = qmax_ = q.constant_value();
      return;
    }
    table_.resize(static_cast<std::size_t>(2 * steps_ + 1));
    for (int i = 0; i <= 2 * steps_; ++i) table_[static_cast<std::size_t>(i)] = q(0.5 * i / steps_);
    auto [lo, hi] = std::minmax_element(table_.begin(), table_.end());
    qmin_ = *lo;
    qmax_ = *hi;
  }

  const SymmetricPotential& potential() const { return q_; }
  int steps() const { return steps_; }
  double qmin() const { return qmin_; }
  double qmax() const { return qmax_; }

  Fundamental fundamental(double lambda) const {
    if (!std::isfinite(lambda)) throw std::invalid_argument("propagate: non-finite lambda");
    if (closed_) return closed_form(lambda - qmin_);
    double y1 = 0.0, p1 = 1.0, y2 = 1.0, p2 = 0.0;
    const double h = 1.0 / steps_;
    for (int i = 0; i < steps_; ++i) {
      const double a0 = table_[static_cast<std::size_t>(2 * i)] - lambda;
      const double am = table_[static_cast<std::size_t>(2 * i + 1)] - lambda;
      const double a1 = table_[static_cast<std::size_t>(2 * i + 2)] - lambda;
      rk4(y1, p1, a0, am, a1, h);
      rk4(y2, p2, a0, am, a1, h);
    }
    return {y1, p1, y2, p2};
  }

  EdgeCharacteristic characteristic(double lambda) const {
    if (!std::isfinite(lambda)) throw std::invalid_argument("propagate: non-finite lambda");
    if (closed_) {
      const Fundamental f = closed_form(lambda - qmin_);
      return {lambda, f.phi, f.dphi};
    }
    double y = 0.0, p = 1.0;
    const double h = 1.0 / steps_;
    for (int i = 0; i < steps_; ++i)
      rk4(y, p, table_[static_cast<std::size_t>(2 * i)] - lambda, table_[static_cast<std::size_t>(2 * i + 1)] - lambda,
          table_[static_cast<std::size_t>(2 * i + 2)] - lambda, h);
    return {lambda, y, p};
  }

  // y'' = (q - lambda) y - f, from (y0, dy0) at z = 0; stored on every node.
  Trajectory trajectory(double lambda, double y0, double dy0, const std::function<double(double)>& f = {}) const {
    Trajectory t;
    t.y.resize(static_cast<std::size_t>(steps_ + 1));
    t.dy.resize(static_cast<std::size_t>(steps_ + 1));
    double y = y0, p = dy0;
    t.y[0] = y;
    t.dy[0] = p;
    const double h = 1.0 / steps_;
    double fa = f ? f(0.0) : 0.0;
    for (int i = 0; i < steps_; ++i) {
      const double z = static_cast<double>(i) / steps_;
      const double a0 = qv(2 * i) - lambda, am = qv(2 * i + 1) - lambda, a1 = qv(2 * i + 2) - lambda;
      const double fm = f ? f(z + 0.5 * h) : 0.0;
      const double fb = f ? f(z + h) : 0.0;
      const double k1y = p, k1p = a0 * y - fa;
      const double k2y = p + 0.5 * h * k1p, k2p = am * (y + 0.5 * h * k1y) - fm;
      const double k3y = p + 0.5 * h * k2p, k3p = am * (y + 0.5 * h * k2y) - fm;
      const double k4y = p + h * k3p, k4p = a1 * (y + h * k3y) - fb;
      y += h / 6.0 * (k1y + 2 * k2y + 2 * k3y + k4y);
      p += h / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p);
      t.y[static_cast<std::size_t>(i + 1)] = y;
      t.dy[static_cast<std::size_t>(i + 1)] = p;
      fa = fb;
    }
    return t;
  }

  // Sign changes of phi(., lambda) on (0, 1]: equals #{j : lambda_j < lambda}.
  int node_count(double lambda) const {
    const Trajectory t = trajectory(lambda, 0.0, 1.0);
    int n = 0;
    for (std::size_t i = 2; i < t.y.size(); ++i)
      if ((t.y[i - 1] > 0.0) != (t.y[i] > 0.0)) ++n;
    return n;
  }

 private:
  double qv(int i) const { return closed_ ? qmin_ : table_[static_cast<std::size_t>(i)]; }

  static void rk4(double& y, double& p, double a0, double am, double a1, double h) {
    const double k1y = p, k1p = a0 * y;
    const double k2y = p + 0.5 * h * k1p, k2p = am * (y + 0.5 * h * k1y);
    const double k3y = p + 0.5 * h * k2p, k3p = am * (y + 0.5 * h * k2y);
    const double k4y = p + h * k3p, k4p = a1 * (y + h * k3y);
    y += h / 6.0 * (k1y + 2 * k2y + 2 * k3y + k4y);
    p += h / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p);
  }

  static Fundamental closed_form(double s) {
    if (s > 0.0) {
      const double k = std::sqrt(s);
      return {std::sin(k) / k, std::cos(k), std::cos(k), -k * std::sin(k)};
    }
    if (s < 0.0) {
      const double k = std::sqrt(-s);
      return {std::sinh(k) / k, std::cosh(k), std::cosh(k), k * std::sinh(k)};
    }
    return {1.0, 1.0, 1.0, 0.0};
  }

  SymmetricPotential q_;
  int steps_;
  bool closed_ = false;
  double qmin_ = 0.0, qmax_ = 0.0;
  std::vector<double> table_;
};

inline EdgeCharacteristic propagate(const SymmetricPotential& q, double lambda, OdeSettings s = {}) {
  return EdgeSolver(q, s).characteristic(lambda);
}

class SpectrumError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};


inline std::vector<double> dirichlet_spectrum(const EdgeSolver& solver, int count) {
  if (count < 1) throw std::invalid_argument("dirichlet_spectrum: count must be >= 1");
  const double pi2 = std::numbers::pi * std::numbers::pi;
  const double lo = solver.qmin();
  const double hi = (count + 2.0) * (count + 2.0) * pi2 + solver.qmax();
  const double step = pi2 / 50.0;
  auto f = [&](double l) { return solver.characteristic(l).phi1; };

  std::vector<double> out;
  double a = lo, fa = f(a);
  while (static_cast<int>(out.size()) < count && a < hi) {
    const double b = std::min(a + step, hi);
    const double fb = f(b);
    if (fb == 0.0) {
      out.push_back(b);
    } else if ((fa > 0.0) != (fb > 0.0) && fa != 0.0) {
      auto r = boost::math::tools::bisect(f, a, b, [](double x, double y) { return std::abs(y - x) <= 1e-12; });
      out.push_back(0.5 * (r.first + r.second));
    }
    a = b;
    fa = fb;
  }
  if (static_cast<int>(out.size()) < count) {
    std::ostringstream os;
    os << "dirichlet_spectrum: found " << out.size() << " of " << count << " zeros on [" << lo << ", " << hi << "]";
    throw SpectrumError(os.str());
  }
  return out;
}

inline std::vector<double> dirichlet_spectrum(const SymmetricPotential& q, int count, OdeSettings s = {}) {
  return dirichlet_spectrum(EdgeSolver(q, s), count);
}

// Re-locate eigenvalue j (1-based) starting from a nearby guess; the Sturm count
// check guards the index.  Returns NaN when the local search fails.
inline double refine_dirichlet(const EdgeSolver& solver, int j, double guess) {
  const double step = std::numbers::pi * std::numbers::pi / 200.0;
  auto f = [&](double l) { return solver.characteristic(l).phi1; };
  double a = guess - step, b = guess + step;
  double fa = f(a), fb = f(b);
  for (int it = 0; it < 20 && (fa > 0.0) == (fb > 0.0); ++it) {
    a -= step;
    b += step;
    fa = f(a);
    fb = f(b);
  }
  if ((fa > 0.0) == (fb > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  if (solver.node_count(a) != j - 1 || solver.node_count(b) != j) return std::numeric_limits<double>::quiet_NaN();
  std::uintmax_t iters = 200;
  auto r = boost::math::tools::toms748_solve(f, a, b, fa, fb, boost::math::tools::eps_tolerance<double>(50), iters);
  return 0.5 * (r.first + r.second);
}

// (Phi_e1 f, Phi_e0 f) = (int phi(t)/phi(1) f dt, int phi(1-t)/phi(1) f dt), Simpson on the grid.
inline std::pair<double, double> edge_moments(const EdgeSolver& solver, double lambda,
                                              const std::function<double(double)>& f) {
  const Trajectory t = solver.trajectory(lambda, 0.0, 1.0);
  const int n = solver.steps();
  const double phi1 = t.y.back(), dphi1 = t.dy.back();
  if (near_dirichlet(phi1, dphi1)) throw ExcludedEnergy(lambda, "edge_moments: lambda is a Dirichlet eigenvalue of the edge");
  const double h = 1.0 / n;
  double s1 = 0.0, s0 = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    const double z = static_cast<double>(i) * h;
    const double fz = f(z);
    s1 += w * t.y[static_cast<std::size_t>(i)] * fz;
    s0 += w * t.y[static_cast<std::size_t>(n - i)] * fz;
  }
  return {s1 * h / 3.0 / phi1, s0 * h / 3.0 / phi1};
}

inline std::pair<double, double> edge_moments(const SymmetricPotential& q, double lambda,
                                              const std::function<double(double)>& f, OdeSettings s = {}) {
  return edge_moments(EdgeSolver(q, s), lambda, f);
}

// Cubic interpolation of uniformly sampled data on [0,1].
class SampledFunction {
 public:
  explicit SampledFunction(std::vector<double> v) : v_(std::move(v)) {
    if (v_.size() < 2) throw std::invalid_argument("SampledFunction: need at least two samples");
  }
  double operator()(double z) const { return detail::cubic_uniform(v_, z); }

 private:
  std::vector<double> v_;
};

}  // namespace hexqg
