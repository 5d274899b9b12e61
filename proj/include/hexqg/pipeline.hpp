#pragma once

// Batch entry points: forward datasets, inversion reports, band and edge-spectrum exports.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "hexqg/bands.hpp"
#include "hexqg/borg.hpp"
#include "hexqg/dn.hpp"
#include "hexqg/edge_ode.hpp"
#include "hexqg/hexlattice.hpp"
#include "hexqg/inverse.hpp"
#include "hexqg/io.hpp"

namespace hexqg {

namespace fs = std::filesystem;

inline std::vector<double> plan_samples(const RunConfig& c) {
  const SymmetricPotential* bg = c.background();
  if (!c.lambda_grid.empty()) {
    for (double l : c.lambda_grid) {
      const AdmissibleReport r = admissible_lambda(l, bg);
      if (!r.ok) {
        std::ostringstream os;
        os << "lambda grid: lambda = " << l << " is not admissible (" << r.reasons.front() << ")";
        throw InputError(os.str());
      }
    }
    std::vector<double> g = c.lambda_grid;
    std::sort(g.begin(), g.end());
    return g;
  }
  std::vector<LambdaWindow> w;
  if (c.auto_windows) {
    w = admissible_windows(c.lambda_max, bg);
  } else {
    double top = 0.0;
    for (const auto& x : c.windows) {
      if (!(x.a >= 0.0) || !(x.b > x.a)) throw InputError("lambda_windows: need 0 <= a < b");
      top = std::max(top, x.b);
    }
    const std::vector<double> pts = excluded_points(top + 1.0, bg);
    for (const auto& x : c.windows)
      for (double p : pts)
        if (p > x.a && p < x.b) {
          std::ostringstream os;
          os << "lambda_windows: window [" << x.a << ", " << x.b << "] contains the excluded energy " << p;
          throw InputError(os.str());
        }
    w = c.windows;
  }
  return sample_lambdas(w, c.lambda_step, c.samples_per_window);
}

inline std::string dn_file_name(int rotation) { return "dn_" + Frame{rotation, false}.tag() + ".jsonl"; }

struct ForwardResult {
  std::size_t samples = 0;
  std::vector<std::pair<double, std::string>> skipped;
};

inline ForwardResult cmd_forward(const RunConfig& c, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  const std::vector<double> lambdas = plan_samples(c);
  ForwardProvider provider(c.N, c.field, OdeSettings{c.ode_steps});
  std::vector<int> rots = c.rotations;
  std::sort(rots.begin(), rots.end());
  rots.erase(std::unique(rots.begin(), rots.end()), rots.end());

  std::map<int, std::ofstream> files;
  for (int r : rots) {
    files[r].open(out_dir / dn_file_name(r), std::ios::binary | std::ios::trunc);
    if (!files[r]) throw InputError("cannot write " + (out_dir / dn_file_name(r)).string());
  }
  ForwardResult res;
  std::vector<double> written;
  for (double l : lambdas) {
    std::vector<DnMatrix> ms;
    try {
      for (int r : rots) ms.push_back(provider.get(r, l));
    } catch (const std::runtime_error& e) {
      res.skipped.push_back({l, e.what()});
      continue;
    }
    for (std::size_t i = 0; i < rots.size(); ++i) files[rots[i]] << dn_to_json(ms[i]).dump() << "\n";
    written.push_back(l);
  }
  res.samples = written.size();

  nlohmann::json man;
  man["format"] = "hexqg-dn-dataset";
  man["version"] = 1;
  man["N"] = c.N;
  man["kind"] = "vertex";
  man["background"] = c.field.background ? potential_to_json(*c.field.background) : nlohmann::json();
  nlohmann::json fl = nlohmann::json::object();
  for (int r : rots) fl[Frame{r, false}.tag()] = dn_file_name(r);
  man["files"] = fl;
  man["lambdas"] = written;
  nlohmann::json sk = nlohmann::json::array();
  for (const auto& [l, why] : res.skipped) sk.push_back({{"lambda", l}, {"reason", why}});
  man["skipped"] = sk;
  std::ofstream mf(out_dir / "manifest.json", std::ios::binary | std::ios::trunc);
  mf << man.dump(2) << "\n";
  return res;
}

class DatasetError : public InputError {
 public:
  using InputError::InputError;
};

// Replays stored matrices; never sees potentials.
class FileProvider : public DnProvider {
 public:
  explicit FileProvider(const fs::path& dir) : dir_(dir) {
    const nlohmann::json man = read_json_file((dir / "manifest.json").string());
    if (man.value("format", "") != "hexqg-dn-dataset") throw DatasetError("dataset: manifest has the wrong format tag");
    N_ = man.at("N").get<int>();
    if (man.contains("background") && !man["background"].is_null()) background_ = potential_from_json(man["background"]);
    lambdas_ = man.at("lambdas").get<std::vector<double>>();
    for (const auto& [tag, file] : man.at("files").items()) {
      const Frame f = parse_frame(tag);
      files_[f.rotation] = dir / file.get<std::string>();
    }
  }

  int size() const override { return N_; }
  const std::vector<double>& lambdas() const { return lambdas_; }
  const std::optional<SymmetricPotential>& background() const { return background_; }

  void require(const std::vector<int>& rotations) {
    for (int r : rotations)
      if (!files_.count(r) || !fs::exists(files_.at(r)))
        throw DatasetError("frame missing: dataset has no D-N data for frame " + Frame{r, false}.tag());
  }

  DnMatrix get(int rotation, double lambda) override {
    load(rotation);
    const auto& m = data_.at(rotation);
    auto it = m.find(lambda);
    if (it == m.end()) {
      std::ostringstream os;
      os << "dataset: no D-N matrix for frame " << Frame{rotation, false}.tag() << " at lambda = " << lambda;
      throw DatasetError(os.str());
    }
    return it->second;
  }

 private:
  void load(int rotation) {
    if (data_.count(rotation)) return;
    require({rotation});
    std::ifstream in(files_.at(rotation));
    std::map<double, DnMatrix> m;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      DnMatrix d;
      try {
        d = dn_from_json(nlohmann::json::parse(line));
      } catch (const std::exception& e) {
        throw DatasetError(files_.at(rotation).string() + ": " + e.what());
      }
      if (d.N != N_) throw DatasetError("dataset: matrix of size N=" + std::to_string(d.N) + " in an N=" + std::to_string(N_) + " dataset");
      m.emplace(d.lambda, std::move(d));
    }
    data_[rotation] = std::move(m);
  }

  fs::path dir_;
  int N_ = 0;
  std::optional<SymmetricPotential> background_;
  std::vector<double> lambdas_;
  std::map<int, fs::path> files_;
  std::map<int, std::map<double, DnMatrix>> data_;
};

struct EdgeReport {
  std::string key;
  std::vector<double> eigenvalues;
  std::vector<double> reference;
  bool free_like = false;
  std::vector<std::string> flags;
  std::optional<SpectralFit> fit;
};

struct InvertResult {
  nlohmann::json report;
  std::vector<EdgeReport> edges;
  PhiTraceSet traces;
  std::vector<std::string> gate_failures;
  int exit_code() const { return gate_failures.empty() ? 0 : 2; }
};

inline InvertResult cmd_invert(const fs::path& dataset, const RunConfig& c, const fs::path& out_dir = {}) {
  FileProvider provider(dataset);
  if (provider.size() != c.N)
    throw InputError("invert: config N=" + std::to_string(c.N) + " does not match dataset N=" + std::to_string(provider.size()));
  if (c.window.empty()) throw InputError("invert: config must declare a reconstruction window (list of edge keys)");
  provider.require(c.rotations);
  const std::optional<SymmetricPotential> bg = provider.background();

  InvertResult res;
  nlohmann::json& rep = res.report;
  rep["format"] = "hexqg-invert-report";
  rep["version"] = 1;
  rep["N"] = c.N;
  std::vector<std::string> ftags;
  for (const Frame& f : c.frames()) ftags.push_back(f.tag());
  rep["frames"] = ftags;

  ProductCollector collector(c.N, c.frames(), c.window, bg);
  const RankReport rr = rank_report(collector.structure(), c.window);
  rep["rank"] = {{"rank", rr.rank}, {"unknowns", rr.unknowns}, {"null_space", rr.null_combinations}};
  if (rr.rank < rr.unknowns) {
    res.gate_failures.push_back("rank deficient ratio system (" + std::to_string(rr.rank) + " < " +
                                std::to_string(rr.unknowns) + ")");
    rep["gate_failures"] = res.gate_failures;
    return res;
  }

  TraceOptions topt;
  topt.ratio_residual = c.tol.ratio_residual;
  topt.below_line = c.tol.below_line;
  res.traces = recover_phi_traces(provider, collector, provider.lambdas(), topt);
  const PhiTraceSet& tr = res.traces;

  const std::size_t total = provider.lambdas().size();
  rep["samples"] = {{"total", total}, {"accepted", tr.lambdas.size()}, {"dropped", tr.dropped.size()}};
  nlohmann::json dropped = nlohmann::json::array();
  for (const auto& [l, why] : tr.dropped) dropped.push_back({{"lambda", l}, {"reason", why}});
  rep["dropped"] = dropped;
  rep["worst_ratio_residual"] = tr.worst_residual;
  rep["worst_anchor_consistency"] = tr.worst_consistency;
  nlohmann::json sb = nlohmann::json::array();
  for (const auto& [l, k] : tr.sign_breakdowns) sb.push_back({{"lambda", l}, {"edge", k}});
  rep["sign_breakdowns"] = sb;
  if (!tr.sign_breakdowns.empty()) res.gate_failures.push_back("sign continuation breakdown");
  if (total == 0 || static_cast<double>(tr.lambdas.size()) < c.tol.min_accepted * static_cast<double>(total))
    res.gate_failures.push_back("too few samples passed the gates");

  const double lmax = tr.lambdas.empty() ? 0.0 : tr.lambdas.back();
  const std::vector<double> punct = excluded_points(lmax + 1.0, bg ? &*bg : nullptr);
  double max_step = c.lambda_step;
  const int M = c.eigen_needed();
  const SymmetricPotential ref = bg ? *bg : SymmetricPotential::zero();
  std::vector<double> ref_spec = dirichlet_spectrum(ref, M);

  rep["edges"] = nlohmann::json::array();
  for (std::size_t i = 0; i < tr.keys.size(); ++i) {
    EdgeReport er;
    er.key = tr.keys[i];
    const ZeroScan zs = scan_dirichlet_zeros(tr.lambdas, tr.phi[i], punct, max_step);
    er.eigenvalues = zs.zeros;
    er.flags = zs.flags;
    er.reference = ref_spec;
    nlohmann::json ej;
    ej["edge"] = er.key;
    ej["eigenvalues"] = er.eigenvalues;
    ej["flags"] = er.flags;
    if (static_cast<int>(er.eigenvalues.size()) < M) {
      res.gate_failures.push_back("edge " + er.key + ": only " + std::to_string(er.eigenvalues.size()) + " of " +
                                  std::to_string(M) + " eigenvalues below the sampled range");
    } else {
      std::vector<double> target(er.eigenvalues.begin(), er.eigenvalues.begin() + M);
      er.free_like = true;
      for (int j = 0; j < M; ++j)
        if (std::abs(target[static_cast<std::size_t>(j)] - ref_spec[static_cast<std::size_t>(j)]) >
            c.tol.free_rel * ref_spec[static_cast<std::size_t>(j)])
          er.free_like = false;
      try {
        er.fit = recover_potential(target, c.basis_size, 50, OdeSettings{c.ode_steps});
      } catch (const BorgDivergence& e) {
        er.fit = e.best();
        res.gate_failures.push_back("edge " + er.key + ": " + e.what());
      }
      if (er.fit->residual > c.tol.fit_residual)
        res.gate_failures.push_back("edge " + er.key + ": spectral fit residual above tolerance");
      ej["fit"] = {{"coefficients", er.fit->result.data()},
                   {"residuals", er.fit->residuals},
                   {"residual", er.fit->residual},
                   {"iterations", er.fit->iterations},
                   {"converged", er.fit->converged}};
    }
    ej["reference_eigenvalues"] = ref_spec;
    ej["free"] = er.free_like;
    rep["edges"].push_back(ej);
    res.edges.push_back(std::move(er));
  }
  rep["gate_failures"] = res.gate_failures;

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::ofstream(out_dir / "report.json", std::ios::binary | std::ios::trunc) << rep.dump(2) << "\n";
    std::ofstream csv(out_dir / "phi_traces.csv", std::ios::binary | std::ios::trunc);
    std::string cols = "lambda";
    for (const auto& k : tr.keys) cols += ",\"" + k + "\"";
    csv_header(csv, "phi-trace", cols);
    csv.precision(17);
    for (std::size_t s = 0; s < tr.lambdas.size(); ++s) {
      csv << tr.lambdas[s];
      for (std::size_t i = 0; i < tr.keys.size(); ++i) csv << "," << tr.phi[i][s];
      csv << "\n";
    }
  }
  return res;
}

inline void cmd_bands(int resolution, double lambda_max, const std::vector<double>& mus, int fermi_count,
                      const fs::path& out_dir) {
  fs::create_directories(out_dir);
  {
    std::ofstream os(out_dir / "band_surface.csv", std::ios::binary | std::ios::trunc);
    csv_header(os, "band-surface", "x1,x2,lambda1,lambda2");
    os.precision(17);
    for (const BandPoint& p : band_grid(resolution).points)
      os << p.x1 << "," << p.x2 << "," << p.lambda1 << "," << p.lambda2 << "\n";
  }
  {
    std::ofstream os(out_dir / "special_points.csv", std::ios::binary | std::ios::trunc);
    csv_header(os, "band-special-points", "label,x1,x2,lambda1,lambda2");
    os.precision(17);
    const double pi = std::numbers::pi;
    const std::vector<std::tuple<std::string, double, double>> pts{
        {"Gamma", 0.0, 0.0}, {"K", 2 * pi / 3, 4 * pi / 3}, {"K'", 4 * pi / 3, 2 * pi / 3},
        {"M1", pi, 0.0},     {"M2", 0.0, pi},              {"M3", pi, pi}};
    for (const auto& [name, x1, x2] : pts) {
      const auto [a, b] = band_values(x1, x2);
      os << name << "," << x1 << "," << x2 << "," << a << "," << b << "\n";
    }
  }
  {
    std::ofstream os(out_dir / "fermi_curves.csv", std::ios::binary | std::ios::trunc);
    csv_header(os, "fermi-curves", "mu,x1,x2");
    os.precision(17);
    for (double mu : mus)
      for (const TorusPoint& p : fermi_points(mu, fermi_count)) os << mu << "," << p.x1 << "," << p.x2 << "\n";
  }
  {
    std::ofstream os(out_dir / "windows.csv", std::ios::binary | std::ios::trunc);
    csv_header(os, "spectral-windows", "a,b");
    os.precision(17);
    for (const LambdaWindow& w : edge_spectrum_windows(lambda_max)) os << w.a << "," << w.b << "\n";
  }
}

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

// Fast invariant suite for the check command.
inline std::vector<CheckResult> cmd_check() {
  std::vector<CheckResult> out;
  auto add = [&](const std::string& name, bool ok, const std::string& detail) { out.push_back({name, ok, detail}); };
  auto fmt = [](double v) {
    std::ostringstream os;
    os.precision(3);
    os << v;
    return os.str();
  };
  try {
    verify_exceptional_set();
    add("exceptional set {-1,0,1}", true, "band scan agrees");
  } catch (const std::exception& e) {
    add("exceptional set {-1,0,1}", false, e.what());
  }

  const auto d = std::make_shared<const Domain>(build_domain(2));
  double worst = 0.0;
  for (double l : {1.3, 4.0, 11.7}) {
    const DnMatrix m = interior_dn_vertex(d, PotentialField{}, l);
    for (int k = 0; k <= 2; ++k) {
      const SpecialSolutionReport r = special_solution(m, *d, k);
      worst = std::max(worst, std::abs(r.product - (r.m % 2 ? -1.0 : 1.0)));
    }
  }
  add("free telescoping P_k = (-1)^m", worst < 1e-10, "max error " + fmt(worst));

  PotentialField f;
  f.potentials[edge_key(d->edges[3])] = SymmetricPotential::cosine({0.4, 0.7, -0.2});
  const DnMatrix m = interior_dn_vertex(d, f, 7.3);
  add("D-N reciprocity", m.asymmetry() < 1e-10, "relative asymmetry " + fmt(m.asymmetry()));
  const double rt = (dn_edge_to_vertex(dn_vertex_to_edge(m)).entries - m.entries).cwiseAbs().maxCoeff();
  add("vertex/edge conversion round trip", rt < 1e-13 * std::max(1.0, m.entries.cwiseAbs().maxCoeff()), "max error " + fmt(rt));

  const auto [a, b] = band_values(2 * std::numbers::pi / 3, 4 * std::numbers::pi / 3);
  add("Dirac point", std::abs(a) < 1e-12 && std::abs(b) < 1e-12, "lambda = " + fmt(b));

  const EdgeCharacteristic c = propagate(SymmetricPotential::zero(), std::numbers::pi * std::numbers::pi / 4);
  add("free edge closed form", std::abs(c.phi1 - 2 / std::numbers::pi) < 1e-14 && std::abs(c.dphi1) < 1e-14,
      "phi(1) = " + fmt(c.phi1));

  const auto w = edge_spectrum_windows(50.0);
  bool part = !w.empty() && w.front().a == 0.0 && w.back().b == 50.0;
  for (std::size_t i = 1; i < w.size(); ++i) part = part && w[i].a == w[i - 1].b;
  add("window partition of (0, 50]", part, std::to_string(w.size()) + " windows");
  return out;
}

}  // namespace hexqg
