#pragma once

// Reconstruction of edge characteristics phi_e(1, lambda) from interior D-N data.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/tools/roots.hpp>

#include "hexqg/dn.hpp"
#include "hexqg/hexlattice.hpp"

namespace hexqg {

class PartialDataInconsistent : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class RankDeficient : public std::runtime_error {
 public:
  RankDeficient(const std::string& what, std::vector<std::string> null_combos)
      : std::runtime_error(what), combos_(std::move(null_combos)) {}
  const std::vector<std::string>& null_combinations() const { return combos_; }

 private:
  std::vector<std::string> combos_;
};

struct PartialDataResult {
  Eigen::VectorXd f;  // full boundary data in the domain order
  double residual = 0.0;
  double tolerance = 0.0;
  double cond = 0.0;  // condition number of the L x R block
};

// Solve Lambda_{L,R} x = g - Lambda_{L,notR} f2; the R entries of f2 are ignored.
inline PartialDataResult partial_data_solve(const DnMatrix& lam, const Domain& d, const Eigen::VectorXd& f2,
                                            const Eigen::VectorXd& g, double rtol = 1e-9) {
  if (lam.kind != DnKind::vertex) throw std::invalid_argument("partial_data_solve: expects vertex-kind data");
  const int nB = d.num_boundary();
  if (lam.entries.rows() != nB || f2.size() != nB) throw std::invalid_argument("partial_data_solve: size mismatch");
  const int l0 = d.side_begin(Side::L), nl = d.side_size(Side::L);
  const int r0 = d.side_begin(Side::R), nr = d.side_size(Side::R);
  if (g.size() != nl) throw std::invalid_argument("partial_data_solve: g must have |L| entries");

  Eigen::VectorXd f = f2;
  f.segment(r0, nr).setZero();
  const Eigen::VectorXd known = lam.entries.middleRows(l0, nl) * f;
  const Eigen::VectorXd rhs = g - known;
  const Eigen::MatrixXd A = lam.entries.block(l0, r0, nl, nr);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd x = svd.solve(rhs);
  f.segment(r0, nr) = x;

  PartialDataResult r;
  r.f = f;
  const auto& sv = svd.singularValues();
  r.cond = sv.size() && sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1) : INFINITY;
  r.residual = (A * x - rhs).norm();
  r.tolerance = rtol * (g.norm() + known.norm()) + 1e-12;
  if (!(r.residual <= r.tolerance)) {
    std::ostringstream os;
    os << "partial_data_solve: data inconsistent with unique continuation (residual " << r.residual << " > "
       << r.tolerance << ") at lambda = " << lam.lambda;
    throw PartialDataInconsistent(os.str());
  }
  return r;
}

struct SpecialSolutionReport {
  int k = 0;
  int m = 0;
  double lambda = 0.0;
  Eigen::VectorXd full_boundary_data;
  double exit_value = 0.0;
  double product = 0.0;  // P_k = u(alpha_{k,m})
  double below_line_max = 0.0;
  double below_line_scale = 1.0;
  double residual = 0.0;
  double cond = 0.0;

  bool below_line_ok(double tol = 1e-9) const { return below_line_max <= tol * below_line_scale; }
};

// Unit source at alpha_{k,0}, zero on the rest of T, B, L and zero flux on L.
inline SpecialSolutionReport special_solution(const DnMatrix& lam, const Domain& d, int k) {
  const DiagonalLine& line = diagonal_line(d, k);
  const int nB = d.num_boundary();
  Eigen::VectorXd f2 = Eigen::VectorXd::Zero(nB);
  const int src = d.boundary_index(line.vertices.front());
  const int exit = d.boundary_index(line.vertices.back());
  if (src < 0 || d.side(src) != Side::T || exit < 0 || d.side(exit) != Side::R)
    throw std::logic_error("special_solution: line endpoints not on T and R");
  f2(src) = 1.0;
  const PartialDataResult pd = partial_data_solve(lam, d, f2, Eigen::VectorXd::Zero(d.side_size(Side::L)));

  SpecialSolutionReport r;
  r.k = k;
  r.m = line.m();
  r.lambda = lam.lambda;
  r.full_boundary_data = pd.f;
  r.exit_value = pd.f(exit);
  r.product = r.exit_value;
  r.residual = pd.residual;
  r.cond = pd.cond;

  const Eigen::VectorXd flux = lam.entries * pd.f;
  double below = 0.0;
  for (int b = 0; b < nB; ++b) {
    const Eis z = d.boundary[static_cast<std::size_t>(b)];
    const Eis a = d.interior[static_cast<std::size_t>(d.attach[static_cast<std::size_t>(b)])];
    if (d.local_level(a) < line.level) below = std::max(below, std::abs(flux(b)));
    if (d.local_level(z) < line.level) below = std::max(below, std::abs(pd.f(b)));
  }
  r.below_line_max = below;
  r.below_line_scale = 1.0 + lam.entries.cwiseAbs().maxCoeff() * pd.f.cwiseAbs().maxCoeff();
  return r;
}

// Reference characteristic of edges outside the reconstruction window.
inline double reference_phi(double lambda, const SymmetricPotential* background) {
  return pendant_reference(lambda, background).first;
}

struct RatioEquation {
  std::vector<std::pair<int, int>> terms;  // (unknown index, coefficient)
  std::vector<int> parity;                 // unknowns occurring an odd number of times
  double rhs = 0.0;                        // log|P| minus anchored contributions
  int sign = 1;                            // required product of unknown signs
  std::string frame;
  int k = 0;
};

struct RatioSystem {
  double lambda = 0.0;
  std::vector<std::string> unknowns;
  std::vector<RatioEquation> equations;   // with at least one unknown
  std::vector<RatioEquation> consistency;  // fully anchored strips
  double worst_below_line = 0.0;          // max of below_line_max / scale
  double worst_partial_residual = 0.0;    // max of residual / tolerance
};

// Frames and their domains for one rotation set; built once, used at every lambda.
class ProductCollector {
 public:
  ProductCollector(int N, std::vector<Frame> frames, std::vector<std::string> window,
                   std::optional<SymmetricPotential> background = std::nullopt)
      : N_(N), frames_(std::move(frames)), window_(std::move(window)), background_(std::move(background)) {
    if (frames_.empty()) throw std::invalid_argument("collect_products: no frames requested");
    std::set<std::string> seen;
    for (std::size_t i = 0; i < window_.size(); ++i) {
      parse_edge_key(window_[i]);
      if (!seen.insert(window_[i]).second) throw std::invalid_argument("window lists edge " + window_[i] + " twice");
      index_[window_[i]] = static_cast<int>(i);
    }
    for (const Frame& f : frames_) {
      auto d = std::make_shared<const Domain>(build_domain(N_, f));
      for (const auto& key : window_)
        if (!d->strictly_interior(parse_edge_key(key)))
          throw std::invalid_argument("window edge " + key + " is not strictly interior in frame " + f.tag());
      domains_.push_back(d);
    }
  }

  const std::vector<Frame>& frames() const { return frames_; }
  const std::vector<std::string>& window() const { return window_; }
  const Domain& domain(std::size_t i) const { return *domains_[i]; }
  const SymmetricPotential* background() const { return background_ ? &*background_ : nullptr; }

  // Structural coefficient matrix (rows = strips with unknowns); lambda independent.
  Eigen::MatrixXd structure() const {
    std::vector<std::vector<int>> rows;
    for (std::size_t fi = 0; fi < frames_.size(); ++fi)
      for (const DiagonalLine& line : domains_[fi]->lines) {
        std::vector<int> row(window_.size(), 0);
        bool any = false;
        for (const VPair& vp : line.vpairs)
          for (auto [e, c] : {std::pair{vp.right, 1}, std::pair{vp.left, -1}}) {
            auto it = index_.find(edge_key(e));
            if (it != index_.end()) {
              row[static_cast<std::size_t>(it->second)] += c;
              any = true;
            }
          }
        if (any) rows.push_back(row);
      }
    Eigen::MatrixXd A(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(window_.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t j = 0; j < window_.size(); ++j) A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    return A;
  }

  RatioSystem collect(DnProvider& provider, double lambda) const {
    RatioSystem sys;
    sys.lambda = lambda;
    sys.unknowns = window_;
    const double ref = reference_phi(lambda, background());
    const double log_ref = std::log(std::abs(ref));
    const int ref_sign = ref < 0.0 ? -1 : 1;

    std::map<int, DnMatrix> raw;
    for (std::size_t fi = 0; fi < frames_.size(); ++fi) {
      const Frame& fr = frames_[fi];
      const Domain& d = *domains_[fi];
      if (!raw.count(fr.rotation)) raw.emplace(fr.rotation, provider.get(fr.rotation, lambda));
      const DnMatrix lam = reorder(raw.at(fr.rotation), d.boundary_keys());
      for (const DiagonalLine& line : d.lines) {
        const SpecialSolutionReport rep = special_solution(lam, d, line.k);
        sys.worst_below_line = std::max(sys.worst_below_line, rep.below_line_max / rep.below_line_scale);
        if (rep.product == 0.0 || !std::isfinite(rep.product))
          throw PartialDataInconsistent("collect_products: vanishing strip product");
        RatioEquation eq;
        eq.frame = fr.tag();
        eq.k = line.k;
        eq.rhs = std::log(std::abs(rep.product));
        const int m = line.m();
        eq.sign = (rep.product < 0.0 ? -1 : 1) * (m % 2 ? -1 : 1);
        std::map<int, int> coeff, count;
        for (const VPair& vp : line.vpairs)
          for (auto [e, c] : {std::pair{vp.right, 1}, std::pair{vp.left, -1}}) {
            auto it = index_.find(edge_key(e));
            if (it != index_.end()) {
              coeff[it->second] += c;
              ++count[it->second];
            } else {
              eq.rhs -= c * log_ref;
              eq.sign *= ref_sign;
            }
          }
        for (auto [i, c] : coeff)
          if (c != 0) eq.terms.push_back({i, c});
        for (auto [i, n] : count)
          if (n % 2) eq.parity.push_back(i);
        (eq.terms.empty() ? sys.consistency : sys.equations).push_back(std::move(eq));
      }
    }
    return sys;
  }

 private:
  int N_;
  std::vector<Frame> frames_;
  std::vector<std::string> window_;
  std::optional<SymmetricPotential> background_;
  std::vector<std::shared_ptr<const Domain>> domains_;
  std::map<std::string, int> index_;
};

inline RatioSystem collect_products(DnProvider& provider, double lambda, const std::vector<Frame>& frames,
                                    const std::vector<std::string>& window,
                                    std::optional<SymmetricPotential> background = std::nullopt) {
  return ProductCollector(provider.size(), frames, window, std::move(background)).collect(provider, lambda);
}

struct RankReport {
  int rank = 0;
  int unknowns = 0;
  std::vector<std::string> null_combinations;
};

inline std::string describe_combo(const Eigen::VectorXd& v, const std::vector<std::string>& keys) {
  std::ostringstream os;
  os.precision(3);
  bool first = true;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (std::abs(v(i)) > 1e-6) {
      os << (first ? "" : " + ") << v(i) << "*[" << keys[static_cast<std::size_t>(i)] << "]";
      first = false;
    }
  return os.str();
}

inline RankReport rank_report(const Eigen::MatrixXd& A, const std::vector<std::string>& keys) {
  RankReport r;
  r.unknowns = static_cast<int>(A.cols());
  if (A.rows() == 0) {
    r.rank = 0;
    for (int j = 0; j < r.unknowns; ++j) r.null_combinations.push_back("1*[" + keys[static_cast<std::size_t>(j)] + "]");
    return r;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  const double thr = 1e-9 * std::max(1.0, s.size() ? s(0) : 0.0);
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > thr) ++r.rank;
  for (Eigen::Index j = r.rank; j < A.cols(); ++j) r.null_combinations.push_back(describe_combo(svd.matrixV().col(j), keys));
  return r;
}

struct PhiRecovery {
  double lambda = 0.0;
  std::vector<std::string> keys;
  std::vector<double> log_abs;
  std::vector<int> gf2_sign;  // +1/-1 where the sign words determine it, 0 otherwise
  bool gf2_consistent = true;
  int rank = 0;
  double residual = 0.0;     // max |A x - b| over equations
  double consistency = 0.0;  // max |rhs| over fully anchored strips
  int bad_anchor_signs = 0;  // fully anchored strips with the wrong sign

  double magnitude(std::size_t i) const { return std::exp(log_abs[i]); }
};

namespace detail {

// Solve parity equations mod 2; reports which unknowns are uniquely determined.
inline bool gf2_signs(const std::vector<RatioEquation>& eqs, int n, std::vector<int>& sign) {
  std::vector<std::vector<std::uint8_t>> rows;
  for (const auto& e : eqs) {
    std::vector<std::uint8_t> r(static_cast<std::size_t>(n + 1), 0);
    for (int i : e.parity) r[static_cast<std::size_t>(i)] = 1;
    r[static_cast<std::size_t>(n)] = e.sign < 0 ? 1 : 0;
    rows.push_back(std::move(r));
  }
  std::vector<int> pivot_col;
  std::size_t rank = 0;
  for (int c = 0; c < n && rank < rows.size(); ++c) {
    std::size_t p = rank;
    while (p < rows.size() && !rows[p][static_cast<std::size_t>(c)]) ++p;
    if (p == rows.size()) continue;
    std::swap(rows[p], rows[rank]);
    for (std::size_t i = 0; i < rows.size(); ++i)
      if (i != rank && rows[i][static_cast<std::size_t>(c)])
        for (int k = 0; k <= n; ++k) rows[i][static_cast<std::size_t>(k)] ^= rows[rank][static_cast<std::size_t>(k)];
    pivot_col.push_back(c);
    ++rank;
  }
  bool consistent = true;
  for (std::size_t i = rank; i < rows.size(); ++i)
    if (rows[i][static_cast<std::size_t>(n)]) consistent = false;
  sign.assign(static_cast<std::size_t>(n), 0);
  if (!consistent) return false;
  for (std::size_t i = 0; i < rank; ++i) {
    bool alone = true;
    for (int c = 0; c < n; ++c)
      if (c != pivot_col[i] && rows[i][static_cast<std::size_t>(c)]) alone = false;
    if (alone) sign[static_cast<std::size_t>(pivot_col[i])] = rows[i][static_cast<std::size_t>(n)] ? -1 : 1;
  }
  return true;
}

}  // namespace detail

// Least squares in log-magnitudes; signs from the mod-2 sign words where determined.
inline PhiRecovery recover_phi(const RatioSystem& sys) {
  const int n = static_cast<int>(sys.unknowns.size());
  const int m = static_cast<int>(sys.equations.size());
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, n);
  Eigen::VectorXd b(m);
  for (int i = 0; i < m; ++i) {
    for (auto [j, c] : sys.equations[static_cast<std::size_t>(i)].terms) A(i, j) = c;
    b(i) = sys.equations[static_cast<std::size_t>(i)].rhs;
  }
  const RankReport rr = rank_report(A, sys.unknowns);
  if (rr.rank < n) {
    std::ostringstream os;
    os << "recover_phi: ratio system rank " << rr.rank << " < " << n << " unknowns; null space:";
    for (const auto& c : rr.null_combinations) os << " {" << c << "}";
    throw RankDeficient(os.str(), rr.null_combinations);
  }
  PhiRecovery r;
  r.lambda = sys.lambda;
  r.keys = sys.unknowns;
  r.rank = rr.rank;
  const Eigen::VectorXd x = A.colPivHouseholderQr().solve(b);
  r.log_abs.assign(x.data(), x.data() + x.size());
  r.residual = m ? (A * x - b).cwiseAbs().maxCoeff() : 0.0;
  for (const auto& e : sys.consistency) {
    r.consistency = std::max(r.consistency, std::abs(e.rhs));
    if (e.sign != 1) ++r.bad_anchor_signs;
  }
  r.gf2_consistent = detail::gf2_signs(sys.equations, n, r.gf2_sign);
  return r;
}

struct PhiTraceSet {
  std::vector<std::string> keys;
  std::vector<double> lambdas;                 // accepted samples, increasing
  std::vector<std::vector<double>> phi;        // phi[edge][sample], signed
  std::vector<std::pair<double, std::string>> dropped;
  std::vector<std::pair<double, std::string>> sign_breakdowns;
  double worst_residual = 0.0;
  double worst_consistency = 0.0;
};

struct TraceOptions {
  double ratio_residual = 1e-6;  // log-magnitude least-squares residual gate
  double below_line = 1e-9;      // relative below-line vanishing gate
};

namespace detail {

inline double extrapolate(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
  // Lagrange through the last (up to) three points
  const std::size_t n = xs.size(), k = std::min<std::size_t>(3, n);
  double s = 0.0;
  for (std::size_t i = n - k; i < n; ++i) {
    double w = 1.0;
    for (std::size_t j = n - k; j < n; ++j)
      if (j != i) w *= (x - xs[j]) / (xs[i] - xs[j]);
    s += w * ys[i];
  }
  return s;
}

}  // namespace detail

// Sweep the samples, recover magnitudes per lambda and continue signs in lambda.
inline PhiTraceSet recover_phi_traces(DnProvider& provider, const ProductCollector& collector,
                                      std::vector<double> lambdas, const TraceOptions& opt = {}) {
  std::sort(lambdas.begin(), lambdas.end());
  const RankReport rr = rank_report(collector.structure(), collector.window());
  if (rr.rank < rr.unknowns) {
    std::ostringstream os;
    os << "ratio system rank " << rr.rank << " < " << rr.unknowns << " unknowns; null space:";
    for (const auto& c : rr.null_combinations) os << " {" << c << "}";
    throw RankDeficient(os.str(), rr.null_combinations);
  }
  PhiTraceSet out;
  out.keys = collector.window();
  const std::size_t n = out.keys.size();
  out.phi.assign(n, {});
  std::vector<std::vector<double>> xs(n);
  for (double l : lambdas) {
    PhiRecovery rec;
    try {
      const RatioSystem sys = collector.collect(provider, l);
      if (sys.worst_below_line > opt.below_line) {
        std::ostringstream os;
        os << "below-line check " << sys.worst_below_line;
        out.dropped.push_back({l, os.str()});
        continue;
      }
      rec = recover_phi(sys);
    } catch (const RankDeficient&) {
      throw;
    } catch (const std::exception& e) {
      out.dropped.push_back({l, e.what()});
      continue;
    }
    if (rec.residual > opt.ratio_residual || rec.consistency > opt.ratio_residual || !rec.gf2_consistent ||
        rec.bad_anchor_signs) {
      std::ostringstream os;
      os << "ratio gate: residual " << rec.residual << ", anchored " << rec.consistency
         << (rec.gf2_consistent ? "" : ", inconsistent sign words") << (rec.bad_anchor_signs ? ", anchored sign" : "");
      out.dropped.push_back({l, os.str()});
      continue;
    }
    out.worst_residual = std::max(out.worst_residual, rec.residual);
    out.worst_consistency = std::max(out.worst_consistency, rec.consistency);
    out.lambdas.push_back(l);
    for (std::size_t i = 0; i < n; ++i) {
      const double mag = rec.magnitude(i);
      int s = 1;
      if (!out.phi[i].empty()) {
        const double p = detail::extrapolate(xs[i], out.phi[i], l);
        s = std::abs(mag - p) <= std::abs(-mag - p) ? 1 : -1;
      }
      const int g = rec.gf2_sign[i];
      if (g != 0 && g != s) {
        if (!out.phi[i].empty()) out.sign_breakdowns.push_back({l, out.keys[i]});
        s = g;
      }
      out.phi[i].push_back(s * mag);
      xs[i].push_back(l);
    }
  }
  return out;
}

struct ZeroScan {
  std::vector<double> zeros;
  std::vector<std::string> flags;
};

// Sign-change brackets refined with a local polynomial through nearby samples.
inline ZeroScan scan_dirichlet_zeros(const std::vector<double>& lambdas, const std::vector<double>& phi,
                                     const std::vector<double>& punctures = {}, double max_step = 0.0) {
  if (lambdas.size() != phi.size()) throw std::invalid_argument("scan_dirichlet_zeros: size mismatch");
  ZeroScan out;
  const std::size_t n = lambdas.size();
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double a = lambdas[i], b = lambdas[i + 1];
    if (phi[i] == 0.0) {
      out.zeros.push_back(a);
      continue;
    }
    if ((phi[i] > 0.0) == (phi[i + 1] > 0.0) || phi[i + 1] == 0.0) continue;
    const std::size_t lo = i >= 2 ? i - 2 : 0;
    const std::size_t hi = std::min(n - 1, lo + 5);
    const std::size_t lo2 = hi >= 5 ? hi - 5 : 0;
    std::vector<double> X(lambdas.begin() + static_cast<std::ptrdiff_t>(lo2), lambdas.begin() + static_cast<std::ptrdiff_t>(hi + 1));
    std::vector<double> Y(phi.begin() + static_cast<std::ptrdiff_t>(lo2), phi.begin() + static_cast<std::ptrdiff_t>(hi + 1));
    auto poly = [&](double x) {
      // Neville
      std::vector<double> p = Y;
      for (std::size_t k = 1; k < p.size(); ++k)
        for (std::size_t j = 0; j + k < p.size(); ++j)
          p[j] = ((x - X[j + k]) * p[j] + (X[j] - x) * p[j + 1]) / (X[j] - X[j + k]);
      return p[0];
    };
    double fa = poly(a), fb = poly(b);
    double root;
    if ((fa > 0.0) != (fb > 0.0) && fa != 0.0 && fb != 0.0) {
      std::uintmax_t it = 200;
      auto r = boost::math::tools::toms748_solve(poly, a, b, fa, fb, boost::math::tools::eps_tolerance<double>(50), it);
      root = 0.5 * (r.first + r.second);
    } else {
      root = a - phi[i] * (b - a) / (phi[i + 1] - phi[i]);
      out.flags.push_back("interpolant lost the bracket near " + std::to_string(root) + "; secant value used");
    }
    if (max_step > 0.0 && b - a > 2.5 * max_step)
      out.flags.push_back("zero near " + std::to_string(root) + " lies in a sampling gap [" + std::to_string(a) + ", " +
                          std::to_string(b) + "]");
    for (double p : punctures)
      if (p > a && p < b && std::abs(p - root) < 1e-6)
        out.flags.push_back("zero near " + std::to_string(root) + " coincides with excluded energy " + std::to_string(p));
    out.zeros.push_back(root);
  }
  return out;
}

// Sample points at cell centres of each admissible window.
inline std::vector<double> sample_lambdas(const std::vector<LambdaWindow>& windows, double lambda_step,
                                          int samples_per_window) {
  if (!(lambda_step > 0.0)) throw std::invalid_argument("sample_lambdas: lambda_step must be > 0");
  std::vector<double> out;
  for (const LambdaWindow& w : windows) {
    const double width = w.b - w.a;
    if (!(width > 0.0)) continue;
    const int n = std::max(samples_per_window, static_cast<int>(std::ceil(width / lambda_step)));
    for (int i = 0; i < n; ++i) out.push_back(w.a + (i + 0.5) * width / n);
  }
  return out;
}

}  // namespace hexqg
