// Acceptance run: one PASS/FAIL line per criterion.

#include <chrono>
#include <cstdio>
#include <iostream>
#include <sstream>

#include "oracles.hpp"

using namespace hexqg;
namespace fs = std::filesystem;

namespace {

constexpr double pi = std::numbers::pi;

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(int id, const std::string& name, bool ok, const std::string& detail) {
  std::cout << (ok ? "PASS" : "FAIL") << "  [" << id << "] " << name << ": " << detail << std::endl;
  if (!ok) ++failures;
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

PotentialField random_field(const Domain& d, std::mt19937_64& rng, int edges, int modes, double amp) {
  PotentialField f;
  std::uniform_int_distribution<int> pick(0, d.num_strict_edges - 1);
  while (static_cast<int>(f.potentials.size()) < std::min(edges, d.num_strict_edges))
    f.potentials[edge_key(d.edges[static_cast<std::size_t>(pick(rng))])] = oracle::random_cosine(rng, modes, amp);
  return f;
}

// ten vertex energies spread uniformly over (0, 50]
std::vector<double> probe_lambdas() {
  std::vector<double> l;
  for (int i = 0; i < 10; ++i) l.push_back(5.0 * (i + 0.5));
  return l;
}

void criterion1() {
  const auto t0 = Clock::now();
  double worst = 0.0, worst_cond = 0.0;
  std::ostringstream per_n;
  int failed_solves = 0;
  for (int N : {2, 4, 6}) {
    const Domain d = build_domain(N);
    double wn = 0.0;
    int good = 0, probed = 0;
    for (double l : probe_lambdas()) {
      if (!admissible_lambda(l).ok) continue;
      const DnMatrix lam = interior_dn_vertex(d, PotentialField{}, l);
      double wl = 0.0;
      for (const DiagonalLine& line : d.lines) {
        try {
          const SpecialSolutionReport s = special_solution(lam, d, line.k);
          wl = std::max(wl, std::abs(s.product - (line.m() % 2 ? -1.0 : 1.0)));
          worst_cond = std::max(worst_cond, s.cond);
        } catch (const PartialDataInconsistent&) {
          ++failed_solves;
          wl = std::max(wl, 1.0);
        }
      }
      ++probed;
      good += wl <= 1e-10;
      wn = std::max(wn, wl);
    }
    worst = std::max(worst, wn);
    per_n << " N=" << N << ":" << fmt("%.1e", wn) << " (" << good << "/" << probed << " lambda in tol)";
  }
  const double t = seconds_since(t0);
  report(1, "free-lattice telescoping", worst <= 1e-10 && t < 10.0,
         "max |P_k - (-1)^m| per" + per_n.str() + fmt(" (tol 1e-10), max cond %.1e, %.2f s", worst_cond, t) +
             (failed_solves ? ", " + std::to_string(failed_solves) + " partial-data solves rejected" : ""));
}

void criterion2() {
  std::mt19937_64 rng(2024);
  double kir = 0.0, fd = 0.0;
  std::uniform_real_distribution<double> ul(0.5, 40.0);
  for (int trial = 0; trial < 20; ++trial) {
    const auto d = std::make_shared<const Domain>(build_domain(1 + trial % 3));
    const PotentialField f = random_field(*d, rng, 1 + trial % 5, 3, 3.0);
    double l = ul(rng);
    while (!admissible_lambda(l).ok) l += 0.1;
    const VertexOperator op = assemble(d, f, l);
    Eigen::VectorXd g(d->num_boundary());
    std::normal_distribution<double> n01;
    for (auto& x : g) x = n01(rng);
    const Eigen::VectorXd full = full_vertex_vector(op, solve_dirichlet(op, g), g);
    std::vector<EdgeTrace> tr;
    for (const Edge& e : d->edges) tr.push_back(edge_trace(op, full, e, f.at(edge_key(e))));
    for (double r : kirchhoff_residuals(op, tr)) kir = std::max(kir, std::abs(r));
  }
  // resolvent against the monolithic finite-difference graph on N=1
  const auto d1 = std::make_shared<const Domain>(build_domain(1));
  for (int trial = 0; trial < 4; ++trial) {
    const PotentialField f = random_field(*d1, rng, 1 + trial, 3, 3.0);
    const std::string k = edge_key(d1->edges[static_cast<std::size_t>(trial % d1->num_strict_edges)]);
    auto src = [trial](double z) { return std::sin(pi * z) + 0.3 * trial * z; };
    const double l = trial % 2 ? pi * pi / 4 : 6.1;
    const auto got = interior_resolvent_apply(d1, f, l, {{k, src}});
    const auto ref = oracle::fd_resolvent(*d1, f, l, {{k, src}}, 2048);
    for (const auto& [key, t] : got) {
      const auto& r = ref.at(key);
      for (std::size_t i = 0; i < r.size() && i < t.u.size(); ++i) fd = std::max(fd, std::abs(r[i] - t.u[i]));
    }
  }
  report(2, "vertex-reduction fidelity", kir <= 1e-6 && fd <= 1e-5,
         fmt("Kirchhoff residual %.1e (tol 1e-6) over 20 potentials; resolvent vs FD(h=1/2048) %.1e (tol 1e-5)", kir, fd));
}

void criterion3() {
  double round = 0.0, cols = 0.0;
  for (int N : {1, 2}) {
    const auto d = std::make_shared<const Domain>(build_domain(N));
    for (const bool with_bg : {false, true}) {
      PotentialField f;
      if (with_bg) f.background = SymmetricPotential::cosine({0.0, 0.5});
      const SymmetricPotential* pend = with_bg ? &*f.background : nullptr;
      for (double l : {2.0, 7.0, 30.0}) {
        if (!admissible_lambda(l, pend).ok) continue;
        const DnMatrix v = interior_dn_vertex(d, f, l);
        const DnMatrix e = dn_vertex_to_edge(v, pend);
        const double sc = 1.0 + e.entries.cwiseAbs().maxCoeff();
        round = std::max(round, (dn_vertex_to_edge(dn_edge_to_vertex(e, pend), pend).entries - e.entries).cwiseAbs().maxCoeff() / sc);
        const VertexOperator op = assemble(d, f, l);
        const int nB = d->num_boundary();
        for (int j = 0; j < nB; ++j) {
          Eigen::VectorXd g = Eigen::VectorXd::Zero(nB);
          g(j) = 1.0;
          const Eigen::VectorXd full = full_vertex_vector(op, solve_dirichlet(op, g), g);
          for (int i = 0; i < nB; ++i) {
            const Edge& ed = d->edges[static_cast<std::size_t>(d->num_strict_edges + i)];
            const EdgeTrace t = edge_trace(op, full, ed, f.at(edge_key(ed)));
            const double direct = d->is_boundary(ed.tail) ? t.du.front() : -t.du.back();
            cols = std::max(cols, std::abs(direct - e.entries(i, j)) / sc);
          }
        }
      }
    }
  }
  report(3, "vertex/edge conversion", round <= 1e-13 && cols <= 1e-8,
         fmt("round trip %.1e (tol 1e-13); edge-form columns vs boundary derivatives %.1e (tol 1e-8)", round, cols));
}

void criterion4() {
  std::mt19937_64 rng(4);
  double worst = 0.0;
  int count = 0;
  for (int N : {1, 2, 3, 4}) {
    const auto d = std::make_shared<const Domain>(build_domain(N));
    for (int trial = 0; trial < 3; ++trial) {
      PotentialField f = trial ? random_field(*d, rng, 2 + trial, 3, 3.0) : PotentialField{};
      if (trial == 2) f.background = SymmetricPotential::cosine({0.1, 0.5});
      for (double l : probe_lambdas()) {
        if (!admissible_lambda(l, f.background ? &*f.background : nullptr).ok) continue;
        try {
          worst = std::max(worst, interior_dn_vertex(d, f, l).asymmetry());
          ++count;
        } catch (const std::runtime_error&) {
        }
      }
    }
  }
  report(4, "D-N reciprocity", worst <= 1e-10,
         fmt("max relative asymmetry %.1e over %.0f matrices (tol 1e-10)", worst, count));
}

void criterion5() {
  const BandGrid g = band_grid(512);
  double lo = 0.0, hi = 0.0;
  for (const BandPoint& p : g.points) {
    lo = std::min(lo, p.lambda1);
    hi = std::max(hi, p.lambda2);
  }
  double dirac = 0.0;
  for (auto [x1, x2] : {std::pair{2 * pi / 3, -2 * pi / 3}, std::pair{-2 * pi / 3, 2 * pi / 3},
                        std::pair{4 * pi / 3, 2 * pi / 3}, std::pair{2 * pi / 3, 4 * pi / 3}}) {
    const auto [a, b] = band_values(x1, x2);
    dirac = std::max({dirac, std::abs(a), std::abs(b)});
  }
  // admissible windows of (0, 50]: consecutive, exact endpoints at (j pi / 2)^2
  const auto w = edge_spectrum_windows(50.0);
  bool part = !w.empty() && w.front().a == 0.0 && w.back().b == 50.0 && w.back().closed_right;
  for (std::size_t i = 1; i < w.size(); ++i) {
    const double e = (static_cast<double>(i) * pi / 2) * (static_cast<double>(i) * pi / 2);
    part = part && w[i].a == w[i - 1].b && w[i - 1].b == e && !w[i - 1].closed_right;
  }
  part = part && w.size() == 5;
  const bool ok = std::abs(lo + 1.0) <= 1e-4 && std::abs(hi - 1.0) <= 1e-4 && dirac <= 1e-12 && part;
  report(5, "band structure", ok,
         fmt("range [%.6f, %.6f] on 512^2 (tol 1e-4), Dirac |lambda| %.1e (tol 1e-12), ", lo, hi, dirac) +
             "window partition of (0,50] " + (part ? "exact" : "wrong") + " (" + std::to_string(w.size()) + " windows)");
}

void criterion6() {
  std::mt19937_64 rng(6);
  double res = 0.0, diff = 0.0;
  int n = 0, rejected = 0;
  for (int N : {2, 3, 4}) {
    const Domain d = build_domain(N);
    for (int trial = 0; trial < 3; ++trial) {
      const PotentialField f = random_field(d, rng, 3, 3, 1.0);
      for (double l : probe_lambdas()) {
        const DnMatrix lam = interior_dn_vertex(d, f, l);
        Eigen::VectorXd f2(d.num_boundary()), g(d.side_size(Side::L));
        std::normal_distribution<double> n01;
        for (auto& x : f2) x = n01(rng);
        for (auto& x : g) x = n01(rng);
        try {
          const PartialDataResult r = partial_data_solve(lam, d, f2, g);
          const Eigen::VectorXd known = [&] {
            Eigen::VectorXd k = f2;
            k.segment(d.side_begin(Side::R), d.side_size(Side::R)).setZero();
            return k;
          }();
          const double scale = g.norm() + (lam.entries.middleRows(d.side_begin(Side::L), d.side_size(Side::L)) * known).norm();
          res = std::max(res, r.residual / scale);
          const Eigen::VectorXd ref = oracle::mixed_bvp(d, f, l, f2, g);
          diff = std::max(diff, (r.f - ref).cwiseAbs().maxCoeff() / (1.0 + ref.cwiseAbs().maxCoeff()));
          ++n;
        } catch (const PartialDataInconsistent&) {
          ++rejected;
        }
      }
    }
  }
  report(6, "partial-data consistency", res <= 1e-9 && diff <= 1e-8 && rejected == 0,
         fmt("relative residual %.1e (tol 1e-9), R data vs mixed BVP %.1e (tol 1e-8) over %.0f solves", res, diff, n) +
             (rejected ? ", " + std::to_string(rejected) + " rejected" : ""));
}

struct RoundTrip {
  bool ok = true;
  std::string detail;
};

// forward + invert with the planted potentials, compared against the forward spectra
RoundTrip round_trip(const nlohmann::json& cfg, const fs::path& dir) {
  RoundTrip rt;
  const auto t0 = Clock::now();
  const RunConfig c = parse_run_config(cfg, true);
  fs::remove_all(dir);
  const ForwardResult fr = cmd_forward(c, dir / "data");
  const InvertResult inv = cmd_invert(dir / "data", parse_run_config(cfg, false), dir / "out");
  const double t = seconds_since(t0);
  double eig = 0.0, coef = 0.0;
  const int M = c.eigen_needed();
  for (const EdgeReport& e : inv.edges) {
    const SymmetricPotential& q = c.field.at(e.key);
    const auto ref = dirichlet_spectrum(q, M);
    if (static_cast<int>(e.eigenvalues.size()) < M || !e.fit) {
      rt.ok = false;
      continue;
    }
    for (int j = 0; j < M; ++j)
      eig = std::max(eig, std::abs(e.eigenvalues[static_cast<std::size_t>(j)] - ref[static_cast<std::size_t>(j)]) / ref[static_cast<std::size_t>(j)]);
    std::vector<double> want = q.data();
    want.resize(static_cast<std::size_t>(c.basis_size + 1), 0.0);
    const auto& got = e.fit->result.data();
    for (std::size_t m = 0; m < want.size(); ++m) coef = std::max(coef, std::abs(got[m] - want[m]));
  }
  const std::size_t accepted = inv.traces.lambdas.size();
  rt.ok = rt.ok && inv.exit_code() == 0 && eig <= 1e-6 && coef <= 1e-3 && accepted >= 200 && t < 300.0 &&
          c.rotations.size() == 3;
  std::ostringstream os;
  os << inv.edges.size() << " window edges, " << fr.samples << " samples (" << accepted << " accepted, "
     << fr.skipped.size() << " skipped in forward), eigenvalue rel err " << fmt("%.1e", eig) << " (tol 1e-6), coefficient err "
     << fmt("%.1e", coef) << " (tol 1e-3), " << fmt("%.1f", t) << " s (limit 300 s)";
  if (!inv.gate_failures.empty()) os << ", gates: " << inv.gate_failures.front();
  rt.detail = os.str();
  return rt;
}

void criterion7(const fs::path& work) {
  nlohmann::json cfg = {
      {"N", 4},
      {"frames", {"r0", "rp", "rm"}},
      {"potentials",
       {{"1,2|3", {{"type", "cosine"}, {"data", {0.8, -0.6, 0.3}}}},
        {"2,3|1", {{"type", "cosine"}, {"data", {-0.5, 0.9, -0.4}}}},
        {"3,2|5", {{"type", "cosine"}, {"data", {0.2, 0.4, 1.0}}}}}},
      {"window", {"1,2|3", "2,3|1", "3,2|5", "2,2|1", "1,3|5"}},
      {"lambda_windows", "auto"},
      {"lambda_max", 260.0},
      {"basis_size", 2}};
  const RoundTrip rt = round_trip(cfg, work / "planted");
  report(7, "end-to-end round trip", rt.ok, rt.detail);
}

void criterion8(const fs::path& work) {
  nlohmann::json cfg = {{"N", 4},
                        {"frames", {"r0", "rp", "rm"}},
                        {"background", {{"type", "cosine"}, {"data", {0.0, 0.5}}}},
                        {"potentials", {{"2,3|1", {{"type", "cosine"}, {"data", {0.6, 0.5, -0.7}}}}}},
                        {"window", {"2,3|1", "1,2|3", "3,2|5"}},
                        {"lambda_windows", "auto"},
                        {"lambda_max", 260.0},
                        {"basis_size", 2}};
  const RoundTrip rt = round_trip(cfg, work / "background");
  report(8, "round trip over a known background", rt.ok, rt.detail);
}

void criterion9() {
  const SpectralFit a = recover_potential({pi * pi + 2, 4 * pi * pi + 2, 9 * pi * pi + 2}, 0);
  const double e0 = std::abs(a.result.data()[0] - 2.0);
  const auto q = SymmetricPotential::cosine({0.0, 0.3, 0.1});
  const auto target = oracle::scan_spectrum([&](double z) { return q(z); }, 5, -10.0, 0.05);
  const SpectralFit b = recover_potential(target, 2);
  double e2 = 0.0;
  for (std::size_t m = 0; m < 3; ++m) e2 = std::max(e2, std::abs(b.result.data()[m] - q.data()[m]));
  report(9, "Borg standalone", e0 <= 1e-8 && e2 <= 1e-4,
         fmt("constant shift err %.1e (tol 1e-8); two-mode coefficients from 5 eigenvalues err %.1e (tol 1e-4)", e0, e2));
}

}  // namespace

int main(int argc, char** argv) {
  fs::path work = fs::temp_directory_path() / "hexqg_acceptance";
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--work-dir" && i + 1 < argc) {
      work = argv[++i];
    } else {
      std::cerr << "usage: acceptance [--work-dir DIR]\n";
      return 3;
    }
  }
  fs::create_directories(work);
  const std::vector<std::function<void()>> runs{criterion1, criterion2, criterion3, criterion4, criterion5, criterion6,
                                                [&] { criterion7(work); }, [&] { criterion8(work); }, criterion9};
  for (std::size_t i = 0; i < runs.size(); ++i) {
    try {
      runs[i]();
    } catch (const std::exception& e) {
      report(static_cast<int>(i + 1), "criterion", false, std::string("exception: ") + e.what());
    }
  }
  std::cout << (failures ? std::to_string(failures) + " criteria failed" : "all criteria passed") << std::endl;
  return failures ? 1 : 0;
}
