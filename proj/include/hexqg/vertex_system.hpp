#pragma once

// Weighted vertex operator equivalent to the edge model on a finite domain.
//
// Interior row v:  -(1/3) sum_w u(w)/phi_e(1) + (1/3) sum_e phi_e'(1)/phi_e(1) u(v)
// Boundary rows are the identity (Dirichlet data).

#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "hexqg/edge_ode.hpp"
#include "hexqg/hexlattice.hpp"

namespace hexqg {

// Edge potentials by canonical key; edges not listed carry the background (zero if absent).
struct PotentialField {
  std::map<std::string, SymmetricPotential> potentials;
  std::optional<SymmetricPotential> background;

  const SymmetricPotential& at(const std::string& key) const {
    auto it = potentials.find(key);
    if (it != potentials.end()) return it->second;
    return background ? *background : zero_;
  }
  const SymmetricPotential& reference() const { return background ? *background : zero_; }

 private:
  inline static const SymmetricPotential zero_ = SymmetricPotential::zero();
};

struct EdgeWeight {
  double inv_psi = 0.0;   // 1/psi(1,lambda)
  double dpsi_psi = 0.0;  // psi'(1,lambda)/psi(1,lambda)
};

inline EdgeWeight edge_weight(const EdgeSolver& s, double lambda) {
  const EdgeCharacteristic c = s.characteristic(lambda);
  if (near_dirichlet(c.phi1, c.dphi1)) {
    std::ostringstream os;
    os << "edge_weight: lambda = " << lambda << " is (numerically) a Dirichlet eigenvalue of the edge";
    throw ExcludedEnergy(lambda, os.str());
  }
  return {1.0 / c.phi1, c.dphi1 / c.phi1};
}

inline EdgeWeight edge_weight(const SymmetricPotential& q, double lambda, OdeSettings s = {}) {
  return edge_weight(EdgeSolver(q, s), lambda);
}

// Solvers per distinct potential, shared by all edges carrying it.
class SolverCache {
 public:
  SolverCache(const PotentialField& field, OdeSettings s) : field_(field), settings_(s) {}

  const EdgeSolver& solver(const std::string& key) {
    const SymmetricPotential& q = field_.at(key);
    for (auto& [p, sv] : cache_)
      if (*p == q) return *sv;
    cache_.emplace_back(&q, std::make_shared<EdgeSolver>(q, settings_));
    return *cache_.back().second;
  }

 private:
  const PotentialField& field_;
  OdeSettings settings_;
  std::vector<std::pair<const SymmetricPotential*, std::shared_ptr<EdgeSolver>>> cache_;
};

struct EdgeState {
  Edge edge;
  std::string key;
  int tail = -1;  // vertex index in the operator (interior first, then boundary)
  int head = -1;
  Fundamental fund;
};

struct VertexOperator {
  double lambda = 0.0;
  std::shared_ptr<const Domain> domain;
  Eigen::MatrixXd matrix;  // (nI + nB)^2
  std::vector<EdgeState> edges;
  std::vector<double> qdiag;  // Q_{V,lambda}(v) on interior rows
  OdeSettings settings;

  int num_interior() const { return domain->num_interior(); }
  int vertex_index(const Eis& z) const {
    const int i = domain->interior_index(z);
    if (i >= 0) return i;
    const int b = domain->boundary_index(z);
    return b < 0 ? -1 : num_interior() + b;
  }
};

inline VertexOperator assemble(std::shared_ptr<const Domain> dom, const PotentialField& field, double lambda,
                               OdeSettings settings = {}) {
  const Domain& d = *dom;
  VertexOperator op;
  op.lambda = lambda;
  op.domain = dom;
  op.settings = settings;
  const int nI = d.num_interior(), n = nI + d.num_boundary();
  op.matrix = Eigen::MatrixXd::Zero(n, n);
  op.qdiag.assign(static_cast<std::size_t>(nI), 0.0);

  SolverCache cache(field, settings);
  for (const Edge& e : d.edges) {
    EdgeState st;
    st.edge = e;
    st.key = edge_key(e);
    st.tail = op.vertex_index(e.tail);
    st.head = op.vertex_index(e.head());
    st.fund = cache.solver(st.key).fundamental(lambda);
    if (near_dirichlet(st.fund.phi, st.fund.dphi)) {
      std::ostringstream os;
      os << "assemble: lambda = " << lambda << " is (numerically) a Dirichlet eigenvalue of edge " << st.key;
      throw ExcludedEnergy(lambda, os.str());
    }
    const double w = 1.0 / st.fund.phi, q = st.fund.dphi / st.fund.phi;
    for (auto [v, u] : {std::pair{st.tail, st.head}, std::pair{st.head, st.tail}}) {
      if (v >= nI) continue;
      op.matrix(v, u) += -w / 3.0;
      op.matrix(v, v) += q / 3.0;
      op.qdiag[static_cast<std::size_t>(v)] += q / 3.0;
    }
    op.edges.push_back(std::move(st));
  }
  for (int b = nI; b < n; ++b) op.matrix(b, b) = 1.0;
  return op;
}

inline VertexOperator assemble(const Domain& d, const PotentialField& field, double lambda, OdeSettings s = {}) {
  return assemble(std::make_shared<const Domain>(d), field, lambda, s);
}

class InteriorEigenvalue : public std::runtime_error {
 public:
  InteriorEigenvalue(double lambda, const std::string& what) : std::runtime_error(what), lambda_(lambda) {}
  double lambda() const { return lambda_; }

 private:
  double lambda_;
};

// LU of the interior block, reused across right-hand sides.
class InteriorSolver {
 public:
  static constexpr double kMinRcond = 1e-13;

  explicit InteriorSolver(const VertexOperator& op) : op_(&op) {
    const int nI = op.num_interior();
    lu_.compute(op.matrix.topLeftCorner(nI, nI));
    rcond_ = lu_.rcond();
    if (!(rcond_ > kMinRcond)) {
      std::ostringstream os;
      os << "interior eigenvalue: interior block singular or ill-conditioned at lambda = " << op.lambda
         << " (rcond " << rcond_ << ")";
      throw InteriorEigenvalue(op.lambda, os.str());
    }
  }

  double rcond() const { return rcond_; }

  // interior values for boundary data F (columns) and interior right-hand side G
  Eigen::MatrixXd solve(const Eigen::MatrixXd& F, const Eigen::MatrixXd* G = nullptr) const {
    const int nI = op_->num_interior(), nB = op_->domain->num_boundary();
    if (F.rows() != nB) throw std::invalid_argument("solve_dirichlet: boundary data has wrong length");
    Eigen::MatrixXd rhs = -op_->matrix.topRightCorner(nI, nB) * F;
    if (G) rhs += *G;
    Eigen::MatrixXd U = lu_.solve(rhs);
    const Eigen::MatrixXd res = op_->matrix.topLeftCorner(nI, nI) * U - rhs;
    const double scale = op_->matrix.topLeftCorner(nI, nI).cwiseAbs().maxCoeff() * U.cwiseAbs().maxCoeff() +
                         rhs.cwiseAbs().maxCoeff();
    if (res.size() && res.cwiseAbs().maxCoeff() > 1e-10 * std::max(scale, 1e-300)) {
      std::ostringstream os;
      os << "interior eigenvalue: residual " << res.cwiseAbs().maxCoeff() << " too large at lambda = " << op_->lambda;
      throw InteriorEigenvalue(op_->lambda, os.str());
    }
    return U;
  }

 private:
  const VertexOperator* op_;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
  double rcond_ = 0.0;
};

inline Eigen::VectorXd solve_dirichlet(const VertexOperator& op, const Eigen::VectorXd& f) {
  return InteriorSolver(op).solve(f).col(0);
}

// Values of a vertex function on all operator indices (interior then boundary).
inline Eigen::VectorXd full_vertex_vector(const VertexOperator& op, const Eigen::VectorXd& interior,
                                          const Eigen::VectorXd& boundary) {
  if (interior.size() != static_cast<Eigen::Index>(op.domain->interior.size()) ||
      boundary.size() != static_cast<Eigen::Index>(op.domain->boundary.size()))
    throw std::invalid_argument("full_vertex_vector: size mismatch");
  Eigen::VectorXd u(interior.size() + boundary.size());
  u << interior, boundary;
  return u;
}

struct EdgeTrace {
  std::string key;
  double c0 = 0.0;  // value at the tail (z=0)
  double c1 = 0.0;  // value at the head (z=1)
  std::vector<double> u;   // on z_i = i/steps
  std::vector<double> du;
};

// Homogeneous edge solution with the given endpoint values, integrated from the tail.
inline EdgeTrace edge_trace(const VertexOperator& op, const Eigen::VectorXd& values, const Edge& e,
                            const SymmetricPotential& q) {
  EdgeTrace t;
  t.key = edge_key(e);
  const int i0 = op.vertex_index(e.tail), i1 = op.vertex_index(e.head());
  if (i0 < 0 || i1 < 0) throw std::invalid_argument("edge_trace: edge not in the domain");
  t.c0 = values(i0);
  t.c1 = values(i1);
  const EdgeSolver s(q, op.settings);
  const Fundamental f = s.fundamental(op.lambda);
  if (near_dirichlet(f.phi, f.dphi)) throw ExcludedEnergy(op.lambda, "edge_trace: excluded energy for edge " + t.key);
  const Trajectory tr = s.trajectory(op.lambda, t.c0, (t.c1 - t.c0 * f.theta) / f.phi);
  t.u = tr.y;
  t.du = tr.dy;
  return t;
}

// Outgoing-derivative sum at each interior vertex from a set of traces.
inline std::vector<double> kirchhoff_residuals(const VertexOperator& op, const std::vector<EdgeTrace>& traces) {
  const Domain& d = *op.domain;
  std::vector<double> flux(static_cast<std::size_t>(d.num_interior()), 0.0);
  for (const EdgeTrace& t : traces) {
    const Edge e = parse_edge_key(t.key);
    const int i0 = d.interior_index(e.tail), i1 = d.interior_index(e.head());
    if (i0 >= 0) flux[static_cast<std::size_t>(i0)] += t.du.front();
    if (i1 >= 0) flux[static_cast<std::size_t>(i1)] -= t.du.back();
  }
  return flux;
}

using EdgeSource = std::map<std::string, std::function<double(double)>>;

// Interior Dirichlet resolvent (H - lambda)^{-1} f on the domain's metric graph.
inline std::map<std::string, EdgeTrace> interior_resolvent_apply(std::shared_ptr<const Domain> dom,
                                                                 const PotentialField& field, double lambda,
                                                                 const EdgeSource& f, OdeSettings settings = {}) {
  const VertexOperator op = assemble(dom, field, lambda, settings);
  const Domain& d = *dom;
  const int nI = d.num_interior(), nB = d.num_boundary();

  std::map<std::string, const EdgeState*> by_key;
  for (const EdgeState& st : op.edges) by_key[st.key] = &st;
  for (const auto& [key, fn] : f)
    if (!by_key.count(key)) throw std::invalid_argument("interior_resolvent_apply: source edge " + key + " not in the domain");

  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(nI, 1);
  std::map<std::string, Trajectory> particular;
  SolverCache cache(field, settings);
  for (const auto& [key, fn] : f) {
    const EdgeState& st = *by_key.at(key);
    const EdgeSolver& s = cache.solver(key);
    const auto [m1, m0] = edge_moments(s, lambda, fn);
    if (st.tail < nI) g(st.tail, 0) += m0 / 3.0;
    if (st.head < nI) g(st.head, 0) += m1 / 3.0;
    Trajectory p = s.trajectory(lambda, 0.0, 0.0, fn);
    const Trajectory phi = s.trajectory(lambda, 0.0, 1.0);
    const double c = p.y.back() / phi.y.back();
    for (std::size_t i = 0; i < p.y.size(); ++i) {
      p.y[i] -= c * phi.y[i];
      p.dy[i] -= c * phi.dy[i];
    }
    particular[key] = std::move(p);
  }

  const InteriorSolver solver(op);
  const Eigen::MatrixXd Fb = Eigen::MatrixXd::Zero(nB, 1);
  const Eigen::VectorXd uI = solver.solve(Fb, &g).col(0);
  const Eigen::VectorXd u = full_vertex_vector(op, uI, Eigen::VectorXd::Zero(nB));

  std::map<std::string, EdgeTrace> out;
  for (const EdgeState& st : op.edges) {
    EdgeTrace t = edge_trace(op, u, st.edge, field.at(st.key));
    auto it = particular.find(st.key);
    if (it != particular.end())
      for (std::size_t i = 0; i < t.u.size(); ++i) {
        t.u[i] += it->second.y[i];
        t.du[i] += it->second.dy[i];
      }
    out[st.key] = std::move(t);
  }
  return out;
}

// Debug export: triplets (row key, column key, value).
inline void write_operator_triplets(std::ostream& os, const VertexOperator& op) {
  const Domain& d = *op.domain;
  auto key = [&](int i) {
    const Eis z = i < d.num_interior() ? d.interior[static_cast<std::size_t>(i)]
                                       : d.boundary[static_cast<std::size_t>(i - d.num_interior())];
    return "\"" + vertex_key(z) + "\"";
  };
  os << "# hexqg-csv v1 operator lambda=" << op.lambda << "\n";
  os << "row,col,value\n";
  os.precision(17);
  for (int i = 0; i < op.matrix.rows(); ++i)
    for (int j = 0; j < op.matrix.cols(); ++j)
      if (op.matrix(i, j) != 0.0) os << key(i) << "," << key(j) << "," << op.matrix(i, j) << "\n";
}

}  // namespace hexqg
