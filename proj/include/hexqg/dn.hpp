#pragma once

// Interior Dirichlet-to-Neumann maps, vertex and edge forms.

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "hexqg/bands.hpp"
#include "hexqg/hexlattice.hpp"
#include "hexqg/vertex_system.hpp"

namespace hexqg {

enum class DnKind { vertex, edge };

inline const char* kind_name(DnKind k) { return k == DnKind::vertex ? "vertex" : "edge"; }

inline DnKind parse_kind(const std::string& s) {
  if (s == "vertex") return DnKind::vertex;
  if (s == "edge") return DnKind::edge;
  throw std::invalid_argument("unknown D-N kind '" + s + "'");
}

struct DnMatrix {
  double lambda = 0.0;
  DnKind kind = DnKind::vertex;
  int N = 0;
  std::string frame = "r0";
  std::vector<std::string> boundary_order;
  Eigen::MatrixXd entries;

  double asymmetry() const {
    const double m = entries.cwiseAbs().maxCoeff();
    return m > 0.0 ? (entries - entries.transpose()).cwiseAbs().maxCoeff() / m : 0.0;
  }
};

inline const std::vector<double>& hard_coded_exceptional_mu() {
  static const std::vector<double> mu{-1.0, 0.0, 1.0};
  return mu;
}

// Cross-check of the hard-coded set against the band scan; runs once.
inline void verify_exceptional_set() {
  static const bool ok = [] {
    const std::vector<double> scan = exceptional_energies();
    const auto& ref = hard_coded_exceptional_mu();
    if (scan.size() != ref.size()) return false;
    for (std::size_t i = 0; i < ref.size(); ++i)
      if (std::abs(scan[i] - ref[i]) > 1e-9) return false;
    return true;
  }();
  if (!ok) throw std::logic_error("exceptional set mismatch between band scan and the hard-coded {-1, 0, 1}");
}

struct AdmissibleReport {
  bool ok = true;
  double mu = 0.0;
  std::vector<std::string> reasons;
};

// Free reference: mu = -cos sqrt(lambda).  With a background q0 on every edge:
// the reference characteristic phi0 replaces sin sqrt(lambda)/sqrt(lambda) and mu = -phi0'(1).
inline AdmissibleReport admissible_lambda(double lambda, const SymmetricPotential* background = nullptr,
                                          double tol = 1e-9) {
  verify_exceptional_set();
  AdmissibleReport r;
  double phi = 0.0, dphi = 0.0;
  if (!std::isfinite(lambda)) {
    r.ok = false;
    r.reasons.push_back("non-finite lambda");
    return r;
  }
  if (background && !background->is_zero()) {
    const Fundamental f = EdgeSolver(*background).fundamental(lambda);
    phi = f.phi;
    dphi = f.dphi;
  } else {
    const double s = std::sqrt(std::abs(lambda));
    if (lambda > 0.0) {
      phi = std::sin(s);
      dphi = std::cos(s);
    } else {
      phi = lambda == 0.0 ? 1.0 : std::sinh(s);
      dphi = std::cosh(s);
    }
  }
  r.mu = -dphi;
  if (std::abs(phi) < tol) {
    r.ok = false;
    r.reasons.push_back("sigma_V0: reference Dirichlet eigenvalue (phi(1) = 0)");
  }
  for (double t : hard_coded_exceptional_mu())
    if (std::abs(r.mu - t) < tol) {
      r.ok = false;
      std::ostringstream os;
      os << "exceptional vertex energy: mu = " << r.mu << " ~ " << t;
      r.reasons.push_back(os.str());
    }
  if (!(lambda > 0.0)) {
    r.ok = false;
    r.reasons.push_back("lambda must be positive");
  }
  return r;
}

// Excluded points in (0, lambda_max] for a background q0: zeros of phi0(1), phi0'(1), theta0'(1).
inline std::vector<double> excluded_points(double lambda_max, const SymmetricPotential* background = nullptr) {
  if (!background || background->is_zero()) return free_excluded_points(lambda_max);
  const EdgeSolver s(*background);
  std::vector<double> pts;
  const double step = std::numbers::pi * std::numbers::pi / 400.0;
  auto scan = [&](auto&& f) {
    double a = 1e-12, fa = f(a);
    while (a < lambda_max) {
      const double b = std::min(a + step, lambda_max);
      const double fb = f(b);
      if (fb == 0.0) {
        pts.push_back(b);
      } else if (fa != 0.0 && (fa > 0.0) != (fb > 0.0)) {
        auto r = boost::math::tools::bisect(f, a, b, [](double x, double y) { return std::abs(y - x) <= 1e-13; });
        pts.push_back(0.5 * (r.first + r.second));
      }
      a = b;
      fa = fb;
    }
  };
  scan([&](double l) { return s.fundamental(l).phi; });
  scan([&](double l) { return s.fundamental(l).dphi; });
  scan([&](double l) { return s.fundamental(l).dtheta; });
  std::sort(pts.begin(), pts.end());
  std::vector<double> out;
  for (double p : pts)
    if (out.empty() || p - out.back() > 1e-10) out.push_back(p);
  return out;
}

inline std::vector<LambdaWindow> admissible_windows(double lambda_max, const SymmetricPotential* background = nullptr) {
  if (!background || background->is_zero()) return edge_spectrum_windows(lambda_max);
  // slivers between near-coincident points have |mu| within tolerance of 1 throughout
  std::vector<LambdaWindow> w;
  for (const LambdaWindow& x : windows_from_points(excluded_points(lambda_max, background), lambda_max))
    if (admissible_lambda(0.5 * (x.a + x.b), background).ok) w.push_back(x);
  return w;
}

inline DnMatrix interior_dn_vertex(std::shared_ptr<const Domain> dom, const PotentialField& field, double lambda,
                                   OdeSettings settings = {}) {
  const Domain& d = *dom;
  const int nB = d.num_boundary();
  const VertexOperator op = assemble(dom, field, lambda, settings);
  const InteriorSolver solver(op);
  const Eigen::MatrixXd U = solver.solve(Eigen::MatrixXd::Identity(nB, nB));
  DnMatrix m;
  m.lambda = lambda;
  m.kind = DnKind::vertex;
  m.N = d.N;
  m.frame = d.frame.tag();
  m.boundary_order = d.boundary_keys();
  m.entries.resize(nB, nB);
  for (int i = 0; i < nB; ++i) m.entries.row(i) = -U.row(d.attach[static_cast<std::size_t>(i)]);
  return m;
}

inline DnMatrix interior_dn_vertex(const Domain& d, const PotentialField& field, double lambda, OdeSettings s = {}) {
  return interior_dn_vertex(std::make_shared<const Domain>(d), field, lambda, s);
}

// Pendant-edge reference pair (phi(1), theta(1)) used by the affine conversion.
inline std::pair<double, double> pendant_reference(double lambda, const SymmetricPotential* pendant) {
  if (pendant && !pendant->is_zero()) {
    const Fundamental f = EdgeSolver(*pendant).fundamental(lambda);
    return {f.phi, f.theta};
  }
  const Fundamental f = [&] {
    const double s = std::sqrt(std::abs(lambda));
    if (lambda > 0.0) return Fundamental{std::sin(s) / s, std::cos(s), std::cos(s), -s * std::sin(s)};
    if (lambda < 0.0) return Fundamental{std::sinh(s) / s, std::cosh(s), std::cosh(s), s * std::sinh(s)};
    return Fundamental{1.0, 1.0, 1.0, 0.0};
  }();
  return {f.phi, f.theta};
}

// Lambda_E = -(theta(1) I + Lambda_V) / phi(1); free edges: -(sqrt(l)/sin sqrt(l)) (cos sqrt(l) + Lambda_V).
inline DnMatrix dn_vertex_to_edge(const DnMatrix& v, const SymmetricPotential* pendant = nullptr) {
  if (v.kind != DnKind::vertex) throw std::invalid_argument("dn_vertex_to_edge: expects a vertex-kind matrix");
  const auto [phi, theta] = pendant_reference(v.lambda, pendant);
  if (std::abs(phi) < 1e-12) throw ExcludedEnergy(v.lambda, "dn_vertex_to_edge: sin sqrt(lambda) = 0 (lambda in sigma_V0)");
  DnMatrix e = v;
  e.kind = DnKind::edge;
  const int n = static_cast<int>(v.entries.rows());
  e.entries = -(theta * Eigen::MatrixXd::Identity(n, n) + v.entries) / phi;
  return e;
}

inline DnMatrix dn_edge_to_vertex(const DnMatrix& e, const SymmetricPotential* pendant = nullptr) {
  if (e.kind != DnKind::edge) throw std::invalid_argument("dn_edge_to_vertex: expects an edge-kind matrix");
  const auto [phi, theta] = pendant_reference(e.lambda, pendant);
  if (std::abs(phi) < 1e-12) throw ExcludedEnergy(e.lambda, "dn_edge_to_vertex: sin sqrt(lambda) = 0 (lambda in sigma_V0)");
  DnMatrix v = e;
  v.kind = DnKind::vertex;
  const int n = static_cast<int>(e.entries.rows());
  v.entries = -theta * Eigen::MatrixXd::Identity(n, n) - phi * e.entries;
  return v;
}

inline nlohmann::json dn_to_json(const DnMatrix& m) {
  nlohmann::json j;
  j["format"] = "hexqg-dn";
  j["version"] = 1;
  j["lambda"] = m.lambda;
  j["kind"] = kind_name(m.kind);
  j["N"] = m.N;
  j["frame"] = m.frame;
  j["boundary_order"] = m.boundary_order;
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(m.entries.size()));
  for (int i = 0; i < m.entries.rows(); ++i)
    for (int k = 0; k < m.entries.cols(); ++k) flat.push_back(m.entries(i, k));
  j["entries"] = flat;
  return j;
}

inline DnMatrix dn_from_json(const nlohmann::json& j) {
  DnMatrix m;
  m.lambda = j.at("lambda").get<double>();
  m.kind = parse_kind(j.at("kind").get<std::string>());
  m.N = j.value("N", 0);
  m.frame = j.value("frame", std::string("r0"));
  m.boundary_order = j.at("boundary_order").get<std::vector<std::string>>();
  const auto flat = j.at("entries").get<std::vector<double>>();
  const auto n = static_cast<Eigen::Index>(m.boundary_order.size());
  if (static_cast<Eigen::Index>(flat.size()) != n * n)
    throw std::invalid_argument("DnMatrix JSON: entries length does not match boundary_order");
  m.entries.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < n; ++k) m.entries(i, k) = flat[static_cast<std::size_t>(i * n + k)];
  return m;
}

// Re-index a matrix given in one boundary order onto another (same vertex set).
inline DnMatrix reorder(const DnMatrix& m, const std::vector<std::string>& order) {
  std::map<std::string, int> pos;
  for (int i = 0; i < static_cast<int>(m.boundary_order.size()); ++i) pos[m.boundary_order[static_cast<std::size_t>(i)]] = i;
  if (order.size() != m.boundary_order.size()) throw std::invalid_argument("reorder: boundary sets differ");
  std::vector<int> p;
  for (const auto& k : order) {
    auto it = pos.find(k);
    if (it == pos.end()) throw std::invalid_argument("reorder: boundary vertex " + k + " missing from the matrix");
    p.push_back(it->second);
  }
  DnMatrix r = m;
  r.boundary_order = order;
  const int n = static_cast<int>(order.size());
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) r.entries(i, k) = m.entries(p[static_cast<std::size_t>(i)], p[static_cast<std::size_t>(k)]);
  return r;
}

// The inverse side only ever sees DnMatrix values through this interface.
class DnProvider {
 public:
  virtual ~DnProvider() = default;
  // vertex-kind D-N map of the rotated domain (rotation 0, 1, 2), in that domain's boundary order
  virtual DnMatrix get(int rotation, double lambda) = 0;
  virtual int size() const = 0;
};

class ForwardProvider : public DnProvider {
 public:
  ForwardProvider(int N, PotentialField field, OdeSettings s = {}) : N_(N), field_(std::move(field)), settings_(s) {
    for (int r = 0; r < 3; ++r) domains_[static_cast<std::size_t>(r)] = std::make_shared<const Domain>(rotated_domain(N, r));
  }
  DnMatrix get(int rotation, double lambda) override {
    if (rotation < 0 || rotation > 2) throw std::invalid_argument("ForwardProvider: bad rotation");
    return interior_dn_vertex(domains_[static_cast<std::size_t>(rotation)], field_, lambda, settings_);
  }
  int size() const override { return N_; }
  std::shared_ptr<const Domain> domain(int rotation) const { return domains_[static_cast<std::size_t>(rotation)]; }

 private:
  int N_;
  PotentialField field_;
  OdeSettings settings_;
  std::array<std::shared_ptr<const Domain>, 3> domains_;
};

}  // namespace hexqg
