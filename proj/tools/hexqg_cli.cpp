// hexqg command line: forward, invert, bands, edge-spectrum, check.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "hexqg/hexqg.hpp"

namespace {

constexpr int kExitGate = 2;
constexpr int kExitInput = 3;

struct Common {
  std::string config;
  std::string out_dir = ".";
  std::vector<std::string> frames;
  std::string lambda_grid;
  std::vector<std::string> tolerances;
};

void add_common(CLI::App* cmd, Common& c, bool need_config) {
  auto* opt = cmd->add_option("--config", c.config, "run config (JSON)");
  if (need_config) opt->required();
  cmd->add_option("--out-dir", c.out_dir, "output directory");
  cmd->add_option("--frames", c.frames, "rotation datasets, e.g. r0 rp rm");
  cmd->add_option("--lambda-grid", c.lambda_grid, "a:b:n or l1,l2,...");
  cmd->add_option("--tolerance", c.tolerances, "name=value override");
}

hexqg::RunConfig load_config(const Common& c, bool with_potentials) {
  hexqg::RunConfig rc = hexqg::parse_run_config(hexqg::read_json_file(c.config), with_potentials);
  if (!c.frames.empty()) rc.rotations = hexqg::parse_rotations(nlohmann::json(c.frames));
  if (!c.lambda_grid.empty()) rc.lambda_grid = hexqg::parse_lambda_grid(c.lambda_grid);
  for (const auto& t : c.tolerances) {
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw hexqg::InputError("--tolerance expects name=value, got '" + t + "'");
    double v = 0;
    try {
      v = std::stod(t.substr(eq + 1));
    } catch (const std::exception&) {
      throw hexqg::InputError("--tolerance: bad value in '" + t + "'");
    }
    hexqg::apply_tolerance(rc.tol, t.substr(0, eq), v);
  }
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hexqg: forward and inverse problems on the hexagonal quantum graph"};
  app.require_subcommand(1);

  Common fw, inv;
  auto* forward = app.add_subcommand("forward", "write interior D-N datasets");
  add_common(forward, fw, true);

  std::string dataset;
  auto* invert = app.add_subcommand("invert", "recover edge spectra and potentials from a dataset");
  add_common(invert, inv, true);
  invert->add_option("--dataset", dataset, "dataset directory written by forward")->required();

  int resolution = 128, fermi_count = 256;
  double band_lmax = 50.0;
  std::vector<double> mus;
  std::string bands_out = ".";
  auto* bands = app.add_subcommand("bands", "band surface, special points, Fermi curves, windows");
  bands->add_option("--resolution", resolution, "grid points per torus direction");
  bands->add_option("--lambda-max", band_lmax, "upper end of the window list");
  bands->add_option("--mu", mus, "Fermi levels");
  bands->add_option("--fermi-count", fermi_count, "scan lines per Fermi curve");
  bands->add_option("--out-dir", bands_out, "output directory");

  std::string potential = R"({"type":"cosine","data":[0]})";
  int count = 5;
  std::vector<double> char_lambdas;
  int steps = 2048;
  auto* edge = app.add_subcommand("edge-spectrum", "Dirichlet spectrum and characteristic of one edge");
  edge->add_option("--potential", potential, "potential JSON, inline or @file");
  edge->add_option("--count", count, "number of eigenvalues");
  edge->add_option("--lambda", char_lambdas, "also print phi(1), phi'(1) at these energies");
  edge->add_option("--ode-steps", steps, "integration steps");

  auto* check = app.add_subcommand("check", "run the invariant suite");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*forward) {
      const auto cfg = load_config(fw, true);
      const auto res = hexqg::cmd_forward(cfg, fw.out_dir);
      std::cout << "wrote " << res.samples << " samples to " << fw.out_dir << "\n";
      for (const auto& [l, why] : res.skipped) std::cout << "skipped lambda=" << l << ": " << why << "\n";
      return 0;
    }
    if (*invert) {
      const auto cfg = load_config(inv, false);
      const auto res = hexqg::cmd_invert(dataset, cfg, inv.out_dir);
      for (const auto& e : res.edges) {
        std::cout << e.key << (e.free_like ? " free" : " perturbed");
        if (e.fit) {
          std::cout << " c =";
          for (double v : e.fit->result.data()) std::cout << " " << v;
          std::cout << " (residual " << e.fit->residual << ")";
        }
        std::cout << "\n";
      }
      for (const auto& g : res.gate_failures) std::cerr << "gate: " << g << "\n";
      return res.exit_code() == 0 ? 0 : kExitGate;
    }
    if (*bands) {
      hexqg::cmd_bands(resolution, band_lmax, mus, fermi_count, bands_out);
      std::cout << "wrote band files to " << bands_out << "\n";
      return 0;
    }
    if (*edge) {
      nlohmann::json pj;
      if (!potential.empty() && potential[0] == '@') {
        pj = hexqg::read_json_file(potential.substr(1));
      } else {
        try {
          pj = nlohmann::json::parse(potential);
        } catch (const nlohmann::json::exception& e) {
          throw hexqg::InputError(std::string("--potential: ") + e.what());
        }
      }
      const auto q = hexqg::potential_from_json(pj);
      const hexqg::OdeSettings s{steps};
      nlohmann::json out;
      out["eigenvalues"] = hexqg::dirichlet_spectrum(q, count, s);
      nlohmann::json ch = nlohmann::json::array();
      for (double l : char_lambdas) {
        const auto c = hexqg::propagate(q, l, s);
        ch.push_back({{"lambda", l}, {"phi1", c.phi1}, {"dphi1", c.dphi1}});
      }
      out["characteristic"] = ch;
      std::cout << out.dump(2) << "\n";
      return 0;
    }
    if (*check) {
      bool ok = true;
      for (const auto& r : hexqg::cmd_check()) {
        std::cout << (r.pass ? "PASS " : "FAIL ") << r.name << " (" << r.detail << ")\n";
        ok = ok && r.pass;
      }
      return ok ? 0 : kExitGate;
    }
  } catch (const hexqg::InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::invalid_argument& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
