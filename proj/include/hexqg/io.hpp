#pragma once

// File formats: potentials, run configs, CSV headers.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hexqg/bands.hpp"
#include "hexqg/dn.hpp"
#include "hexqg/edge_ode.hpp"
#include "hexqg/hexlattice.hpp"
#include "hexqg/vertex_system.hpp"

namespace hexqg {

class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline SymmetricPotential potential_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw InputError("potential: expected an object {\"type\", \"data\"}");
  if (j.contains("background"))
    throw InputError("potential: per-edge \"background\" is not supported; declare it once at the top level of the config");
  const std::string type = j.value("type", "");
  if (!j.contains("data") || !j["data"].is_array()) throw InputError("potential: missing \"data\" array");
  std::vector<double> data;
  for (const auto& v : j["data"]) {
    if (!v.is_number()) throw InputError("potential: non-numeric entry in \"data\"");
    data.push_back(v.get<double>());
  }
  try {
    if (type == "cosine") return SymmetricPotential::cosine(data);
    if (type == "samples") return SymmetricPotential::samples(data);
  } catch (const std::invalid_argument& e) {
    throw InputError(e.what());
  }
  throw InputError("potential: type must be \"cosine\" or \"samples\"");
}

inline nlohmann::json potential_to_json(const SymmetricPotential& q) {
  return {{"type", q.repr() == SymmetricPotential::Repr::cosine ? "cosine" : "samples"}, {"data", q.data()}};
}

struct Tolerances {
  double ratio_residual = 1e-6;  // log-magnitude least squares
  double below_line = 1e-9;      // relative vanishing below the probing line
  double free_rel = 1e-6;        // eigenvalue match against the reference spectrum
  double fit_residual = 1e-6;    // Borg spectrum mismatch (relative)
  double min_accepted = 0.5;     // fraction of samples that must pass the gates
};

struct RunConfig {
  int N = 0;
  PotentialField field;
  bool auto_windows = true;
  std::vector<LambdaWindow> windows;
  double lambda_max = 0.0;
  double lambda_step = std::numbers::pi * std::numbers::pi / 50.0;
  int samples_per_window = 1;
  std::vector<double> lambda_grid;  // explicit samples override the windows
  std::vector<int> rotations{0, 1, 2};
  std::vector<bool> orientations{false, true};
  std::vector<std::string> window;
  int basis_size = 2;
  int eigen_count = 0;  // 0: basis_size + 3
  Tolerances tol;
  std::uint64_t seed = 0;
  int ode_steps = 2048;

  int eigen_needed() const { return eigen_count > 0 ? eigen_count : basis_size + 3; }
  const SymmetricPotential* background() const { return field.background ? &*field.background : nullptr; }
  std::vector<Frame> frames() const {
    std::vector<Frame> f;
    for (int r : rotations)
      for (bool h : orientations) f.push_back({r, h});
    return f;
  }
};

inline std::vector<int> parse_rotations(const nlohmann::json& j) {
  std::vector<int> r;
  for (const auto& v : j) {
    const Frame f = parse_frame(v.get<std::string>());
    if (f.half_turn) throw InputError("frames: list rotation datasets (r0, rp, rm); orientations are set separately");
    r.push_back(f.rotation);
  }
  if (r.empty()) throw InputError("frames: empty list");
  return r;
}

inline void apply_tolerance(Tolerances& t, const std::string& name, double v) {
  if (name == "ratio_residual") t.ratio_residual = v;
  else if (name == "below_line") t.below_line = v;
  else if (name == "free_rel") t.free_rel = v;
  else if (name == "fit_residual") t.fit_residual = v;
  else if (name == "min_accepted") t.min_accepted = v;
  else throw InputError("unknown tolerance '" + name + "'");
}

// "a:b:n" (n points, inclusive) or "l1,l2,..."
inline std::vector<double> parse_lambda_grid(const std::string& s) {
  std::vector<double> out;
  if (s.find(':') != std::string::npos) {
    double a = 0, b = 0;
    int n = 0;
    char c1 = 0, c2 = 0;
    std::istringstream is(s);
    if (!(is >> a >> c1 >> b >> c2 >> n) || c1 != ':' || c2 != ':' || n < 1 || !(b >= a))
      throw InputError("lambda grid: expected a:b:n");
    for (int i = 0; i < n; ++i) out.push_back(n == 1 ? a : a + (b - a) * i / (n - 1));
    return out;
  }
  std::istringstream is(s);
  std::string tok;
  while (std::getline(is, tok, ',')) {
    try {
      out.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw InputError("lambda grid: bad value '" + tok + "'");
    }
  }
  if (out.empty()) throw InputError("lambda grid: empty");
  return out;
}

// Potentials are read only when with_potentials is set (forward side).
inline RunConfig parse_run_config(const nlohmann::json& j, bool with_potentials) {
  RunConfig c;
  try {
    if (!j.is_object()) throw InputError("config: expected a JSON object");
    if (!j.contains("N") || !j["N"].is_number_integer()) throw InputError("config: missing integer N");
    c.N = j["N"].get<int>();
    if (c.N < 1) throw InputError("config: N must be >= 1");
    if (j.contains("frames")) c.rotations = parse_rotations(j["frames"]);
    if (j.contains("orientations")) {
      c.orientations.clear();
      for (const auto& o : j["orientations"]) {
        const std::string s = o.get<std::string>();
        if (s == "identity") c.orientations.push_back(false);
        else if (s == "half_turn") c.orientations.push_back(true);
        else throw InputError("orientations: expected identity or half_turn, got '" + s + "'");
      }
      if (c.orientations.empty()) throw InputError("orientations: empty list");
    }
    if (j.contains("background") && !j["background"].is_null()) c.field.background = potential_from_json(j["background"]);
    if (with_potentials && j.contains("potentials")) {
      for (const auto& [key, pj] : j["potentials"].items()) {
        Edge e;
        try {
          e = parse_edge_key(key);
        } catch (const std::invalid_argument& ex) {
          throw InputError(ex.what());
        }
        for (int r : c.rotations) {
          const Domain d = rotated_domain(c.N, r);
          if (!d.strictly_interior(e))
            throw InputError("potential on edge " + key + " is outside the strict interior of frame " +
                             Frame{r, false}.tag() + " (support must avoid boundary-adjacent edges)");
        }
        c.field.potentials[key] = potential_from_json(pj);
      }
    }
    if (j.contains("lambda_windows")) {
      const auto& w = j["lambda_windows"];
      if (w.is_string()) {
        if (w.get<std::string>() != "auto") throw InputError("lambda_windows: expected \"auto\" or a list");
      } else {
        c.auto_windows = false;
        for (const auto& p : w) {
          if (!p.is_array() || p.size() != 2) throw InputError("lambda_windows: entries must be [a, b]");
          c.windows.push_back({p[0].get<double>(), p[1].get<double>(), true});
        }
      }
    }
    c.lambda_max = j.value("lambda_max", 0.0);
    if (c.auto_windows && !(c.lambda_max > 0.0) && !j.contains("lambda_grid"))
      throw InputError("config: lambda_max must be > 0 with automatic windows");
    c.lambda_step = j.value("lambda_step", c.lambda_step);
    if (!(c.lambda_step > 0.0)) throw InputError("config: lambda_step must be > 0");
    c.samples_per_window = j.value("samples_per_window", c.samples_per_window);
    if (j.contains("lambda_grid")) {
      const auto& g = j["lambda_grid"];
      c.lambda_grid = g.is_string() ? parse_lambda_grid(g.get<std::string>()) : g.get<std::vector<double>>();
    }
    if (j.contains("window")) c.window = j["window"].get<std::vector<std::string>>();
    for (const auto& k : c.window) try {
        parse_edge_key(k);
      } catch (const std::invalid_argument& ex) {
        throw InputError(ex.what());
      }
    c.basis_size = j.value("basis_size", c.basis_size);
    c.eigen_count = j.value("eigen_count", c.eigen_count);
    if (c.basis_size < 0) throw InputError("config: basis_size must be >= 0");
    if (j.contains("tolerances"))
      for (const auto& [k, v] : j["tolerances"].items()) apply_tolerance(c.tol, k, v.get<double>());
    c.seed = j.value("seed", std::uint64_t{0});
    c.ode_steps = j.value("ode_steps", c.ode_steps);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("config: ") + e.what());
  }
  return c;
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path + ": " + e.what());
  }
}

inline void csv_header(std::ostream& os, const std::string& kind, const std::string& columns) {
  os << "# hexqg-csv v1 " << kind << "\n" << columns << "\n";
}

}  // namespace hexqg
