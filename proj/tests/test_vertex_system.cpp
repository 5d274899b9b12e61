#include <catch_amalgamated.hpp>

#include <sstream>

#include "oracles.hpp"

using namespace hexqg;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

constexpr double pi = std::numbers::pi;

double simpson(const std::vector<double>& y) {
  const std::size_t n = y.size() - 1;
  double s = 0.0;
  for (std::size_t i = 0; i <= n; ++i) s += (i == 0 || i == n ? 1.0 : (i % 2 ? 4.0 : 2.0)) * y[i];
  return s / (3.0 * static_cast<double>(n));
}

PotentialField random_field(const Domain& d, std::mt19937_64& rng, int edges) {
  PotentialField f;
  std::uniform_int_distribution<int> pick(0, d.num_strict_edges - 1);
  std::uniform_int_distribution<int> modes(1, 3);
  while (static_cast<int>(f.potentials.size()) < edges)
    f.potentials[edge_key(d.edges[static_cast<std::size_t>(pick(rng))])] = oracle::random_cosine(rng, modes(rng), 3.0);
  return f;
}

}  // namespace

TEST_CASE("free edge weights", "[vertex_system]") {
  auto w = edge_weight(SymmetricPotential::zero(), pi * pi / 4);
  CHECK_THAT(w.inv_psi, WithinAbs(pi / 2, 1e-14));
  CHECK_THAT(w.dpsi_psi, WithinAbs(0.0, 1e-14));
  w = edge_weight(SymmetricPotential::zero(), 4.0);
  CHECK_THAT(w.inv_psi, WithinRel(2.0 / std::sin(2.0), 1e-14));
  CHECK_THAT(w.dpsi_psi, WithinRel(2.0 * std::cos(2.0) / std::sin(2.0), 1e-14));
  const auto q = SymmetricPotential::cosine({0.0, 0.3});
  const auto c = propagate(q, 2.0);
  w = edge_weight(q, 2.0);
  CHECK_THAT(w.inv_psi, WithinRel(1.0 / c.phi1, 1e-14));
  CHECK_THAT(w.dpsi_psi, WithinRel(c.dphi1 / c.phi1, 1e-14));
  CHECK_THROWS_AS(edge_weight(SymmetricPotential::zero(), pi * pi), ExcludedEnergy);
}

TEST_CASE("free assembly", "[vertex_system]") {
  const Domain d = build_domain(2);
  const int nI = d.num_interior();
  {
    const VertexOperator op = assemble(d, PotentialField{}, pi * pi / 4);
    for (int i = 0; i < nI; ++i) {
      CHECK_THAT(op.matrix(i, i), WithinAbs(0.0, 1e-14));
      for (int j = 0; j < op.matrix.cols(); ++j)
        if (j != i && op.matrix(i, j) != 0.0) CHECK_THAT(op.matrix(i, j), WithinAbs(-pi / 6, 1e-14));
    }
  }
  const double l = 4.0, s = std::sqrt(l);
  const VertexOperator op = assemble(d, PotentialField{}, l);
  for (int i = 0; i < nI; ++i) {
    CHECK_THAT(op.matrix(i, i), WithinRel(s / std::sin(s) * std::cos(s), 1e-13));
    int nb = 0;
    for (int j = 0; j < op.matrix.cols(); ++j)
      if (j != i && op.matrix(i, j) != 0.0) {
        CHECK_THAT(op.matrix(i, j), WithinRel(-s / std::sin(s) / 3.0, 1e-13));
        ++nb;
      }
    CHECK(nb == 3);
  }
}

TEST_CASE("one perturbed edge changes two rows", "[vertex_system]") {
  const Domain d = build_domain(2);
  const Edge e = d.edges[5];
  PotentialField f;
  f.potentials[edge_key(e)] = SymmetricPotential::cosine({0.5, -0.8});
  const auto a = assemble(d, PotentialField{}, 5.1), b = assemble(d, f, 5.1);
  const Eigen::MatrixXd diff = (a.matrix - b.matrix).cwiseAbs();
  const int t = a.vertex_index(e.tail), h = a.vertex_index(e.head());
  for (int i = 0; i < diff.rows(); ++i) {
    const double row = diff.row(i).maxCoeff();
    if (i == t || i == h) CHECK(row > 1e-3);
    else CHECK(row == 0.0);
  }
}

TEST_CASE("dirichlet solve basics", "[vertex_system]") {
  const Domain d = build_domain(3);
  std::mt19937_64 rng(7);
  const PotentialField f = random_field(d, rng, 4);
  const VertexOperator op = assemble(d, f, 6.3);
  const Eigen::VectorXd zero = solve_dirichlet(op, Eigen::VectorXd::Zero(d.num_boundary()));
  CHECK(zero.cwiseAbs().maxCoeff() == 0.0);
  const Eigen::VectorXd g = Eigen::VectorXd::Random(d.num_boundary());
  const Eigen::VectorXd u = solve_dirichlet(op, g);
  const Eigen::VectorXd full = full_vertex_vector(op, u, g);
  const Eigen::VectorXd res = op.matrix.topRows(d.num_interior()) * full;
  CHECK(res.cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("free solve reproduces a plane wave", "[vertex_system]") {
  const Domain d = build_domain(3);
  const double l = 5.0, mu = std::cos(std::sqrt(l));  // (1/3) sum of neighbours = cos sqrt(l) u

  const Eis z1 = vertex_at({0, 0}, 1);
  std::vector<Cell> offs;
  for (const Eis& w : neighbors(z1)) offs.push_back(cell_of(w));
  auto hsym = [&](double x1, double x2) {
    std::complex<double> h = 0.0;
    for (const Cell& c : offs) h += std::exp(std::complex<double>(0, x1 * static_cast<double>(c.n1) + x2 * static_cast<double>(c.n2)));
    return h;
  };
  // walk from x=0 (|h|=3) towards a Dirac point until |h| = 3|mu|
  std::array<double, 2> K{2 * pi / 3, 4 * pi / 3};
  if (std::abs(hsym(K[0], K[1])) > 1e-9) K = {4 * pi / 3, 2 * pi / 3};
  REQUIRE(std::abs(hsym(K[0], K[1])) < 1e-9);
  double t0 = 0.0, t1 = 1.0;
  for (int i = 0; i < 200; ++i) {
    const double tm = 0.5 * (t0 + t1);
    (std::abs(hsym(tm * K[0], tm * K[1])) > 3 * std::abs(mu) ? t0 : t1) = tm;
  }
  const double x1 = t0 * K[0], x2 = t0 * K[1];
  const std::complex<double> h = hsym(x1, x2);
  const std::complex<double> a2 = std::conj(h) / (3.0 * mu);
  auto wave = [&](const Eis& z) {
    const Cell c = cell_of(z);
    const std::complex<double> e = std::exp(std::complex<double>(0, x1 * static_cast<double>(c.n1) + x2 * static_cast<double>(c.n2)));
    return (sublattice(z) == 1 ? 1.0 : a2) * e;
  };
  // check the wave is a global solution at one vertex of each type
  for (int s : {1, 2}) {
    const Eis z = vertex_at({1, 1}, s);
    std::complex<double> sum = 0.0;
    for (const Eis& w : neighbors(z)) sum += wave(w);
    CHECK(std::abs(sum / 3.0 - mu * wave(z)) < 1e-12);
  }
  for (int part = 0; part < 2; ++part) {
    auto val = [&](const Eis& z) { return part == 0 ? wave(z).real() : wave(z).imag(); };
    Eigen::VectorXd fb(d.num_boundary());
    for (int b = 0; b < d.num_boundary(); ++b) fb(b) = val(d.boundary[static_cast<std::size_t>(b)]);
    const Eigen::VectorXd u = solve_dirichlet(assemble(d, PotentialField{}, l), fb);
    for (int i = 0; i < d.num_interior(); ++i) CHECK_THAT(u(i), WithinAbs(val(d.interior[static_cast<std::size_t>(i)]), 1e-10));
  }
}

TEST_CASE("edge traces on free edges", "[vertex_system]") {
  const Domain d = build_domain(1);
  const Edge e = d.edges[0];
  for (double l : {4.0, pi * pi / 4}) {
    const VertexOperator op = assemble(d, PotentialField{}, l);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(op.matrix.rows());
    v(op.vertex_index(e.tail)) = 1.0;
    const EdgeTrace t = edge_trace(op, v, e, SymmetricPotential::zero());
    const double s = std::sqrt(l);
    const std::size_t n = t.u.size() - 1;
    for (std::size_t i = 0; i <= n; i += n / 8) {
      const double z = static_cast<double>(i) / static_cast<double>(n);
      CHECK_THAT(t.u[i], WithinAbs(std::sin(s * (1 - z)) / std::sin(s), 1e-12));
    }
  }
  const VertexOperator op = assemble(d, PotentialField{}, pi * pi / 4);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(op.matrix.rows());
  v(op.vertex_index(e.tail)) = 1.0;
  v(op.vertex_index(e.head())) = 1.0;
  const EdgeTrace t = edge_trace(op, v, e, SymmetricPotential::zero());
  CHECK_THAT(t.u[t.u.size() / 2], WithinAbs(std::sqrt(2.0), 1e-12));
}

TEST_CASE("Kirchhoff condition after a solve", "[vertex_system]") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    const auto d = std::make_shared<const Domain>(build_domain(2));
    const PotentialField f = random_field(*d, rng, 1 + trial % 5);
    const double l = 3.3 + trial;
    const VertexOperator op = assemble(d, f, l);
    const Eigen::VectorXd g = Eigen::VectorXd::Random(d->num_boundary());
    const Eigen::VectorXd full = full_vertex_vector(op, solve_dirichlet(op, g), g);
    std::vector<EdgeTrace> tr;
    for (const Edge& e : d->edges) tr.push_back(edge_trace(op, full, e, f.at(edge_key(e))));
    double worst = 0.0;
    for (double r : kirchhoff_residuals(op, tr)) worst = std::max(worst, std::abs(r));
    CHECK(worst < 1e-6);
    // traces end on the prescribed endpoint values
    for (const EdgeTrace& t : tr) CHECK_THAT(t.u.back(), WithinAbs(t.c1, 1e-9));
  }
}

TEST_CASE("resolvent against finite differences", "[vertex_system]") {
  const auto d = std::make_shared<const Domain>(build_domain(1));
  auto src = [](double z) { return std::sin(pi * z) + 0.5 * z; };
  const std::string k0 = edge_key(d->edges[2]);
  for (int with_q = 0; with_q < 2; ++with_q) {
    PotentialField f;
    if (with_q) {
      f.potentials[edge_key(d->edges[0])] = SymmetricPotential::cosine({0.3, 1.0, -0.5});
      f.potentials[k0] = SymmetricPotential::cosine({-0.4, 0.6});
    }
    const double l = pi * pi / 4;
    const EdgeSource s{{k0, src}};
    const auto got = interior_resolvent_apply(d, f, l, s);
    const auto ref = oracle::fd_resolvent(*d, f, l, s, 2048);
    double worst = 0.0;
    for (const auto& [key, t] : got) {
      const auto& r = ref.at(key);
      REQUIRE(r.size() == t.u.size());
      for (std::size_t i = 0; i < r.size(); ++i) worst = std::max(worst, std::abs(r[i] - t.u[i]));
    }
    INFO("with potentials: " << with_q);
    CHECK(worst < 1e-5);

    // Kirchhoff for the inhomogeneous solution
    std::vector<EdgeTrace> tr;
    for (const auto& [key, t] : got) tr.push_back(t);
    double kr = 0.0;
    for (double r : kirchhoff_residuals(assemble(d, f, l), tr)) kr = std::max(kr, std::abs(r));
    CHECK(kr < 1e-6);
  }
  const auto zero = interior_resolvent_apply(d, PotentialField{}, 3.0, {});
  for (const auto& [key, t] : zero) CHECK(std::all_of(t.u.begin(), t.u.end(), [](double v) { return v == 0.0; }));
  CHECK_THROWS_AS(interior_resolvent_apply(d, PotentialField{}, 3.0, {{"40,40|1", src}}), std::invalid_argument);
}

TEST_CASE("resolvent is symmetric", "[vertex_system]") {
  const auto d = std::make_shared<const Domain>(build_domain(1));
  PotentialField f;
  f.potentials[edge_key(d->edges[1])] = SymmetricPotential::cosine({0.2, 0.7});
  const std::string a = edge_key(d->edges[1]), b = edge_key(d->edges[4]);
  auto fa = [](double z) { return std::exp(-z) * z; };
  auto gb = [](double z) { return std::cos(3 * z); };
  const double l = 7.7;
  const auto Rf = interior_resolvent_apply(d, f, l, {{a, fa}});
  const auto Rg = interior_resolvent_apply(d, f, l, {{b, gb}});
  auto inner = [](const std::vector<double>& u, const std::function<double(double)>& g) {
    std::vector<double> y(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) y[i] = u[i] * g(static_cast<double>(i) / static_cast<double>(u.size() - 1));
    return simpson(y);
  };
  CHECK_THAT(inner(Rf.at(b).u, gb), WithinRel(inner(Rg.at(a).u, fa), 1e-9));
}

TEST_CASE("operator triplet export", "[vertex_system]") {
  const VertexOperator op = assemble(build_domain(1), PotentialField{}, 3.0);
  std::ostringstream os;
  write_operator_triplets(os, op);
  const std::string s = os.str();
  CHECK(s.rfind("# hexqg-csv v1 operator", 0) == 0);
  CHECK(s.find('"') != std::string::npos);
}
