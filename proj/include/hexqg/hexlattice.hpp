#pragma once

// Hexagonal lattice combinatorics and the parallelogram domain D_N.
//
// Vertices are exact points of Z[w].  Sublattice 1 sits at w^5 + n1 v1 + n2 v2,
// sublattice 2 at 1 + n1 v1 + n2 v2, with v1 = 1 + w and v2 = sqrt(3) i.

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "hexqg/eisenstein.hpp"

namespace hexqg {

inline constexpr Eis kV1{1, 1};   // 1 + w
inline constexpr Eis kV2{-1, 2};  // sqrt(3) i = 2w - 1
inline constexpr Eis kP1{1, -1};  // w^5
inline constexpr Eis kP2{1, 0};   // 1

// 1 or 2 for lattice vertices, 0 for hexagon centres.
inline int sublattice(const Eis& z) {
  switch (floor_mod(z.b - z.a, 3)) {
    case 1: return 1;
    case 2: return 2;
    default: return 0;
  }
}

inline bool is_vertex(const Eis& z) { return sublattice(z) != 0; }

struct Cell {
  std::int64_t n1 = 0;
  std::int64_t n2 = 0;
  bool operator==(const Cell&) const = default;
  auto operator<=>(const Cell&) const = default;
};

inline Cell cell_of(const Eis& z) {
  const int s = sublattice(z);
  if (s == 0) throw std::invalid_argument("cell_of: not a lattice vertex");
  const Eis d = z - (s == 1 ? kP1 : kP2);
  const std::int64_t n2 = (d.b - d.a) / 3;
  return {d.a + n2, n2};
}

inline Eis vertex_at(const Cell& n, int sub) {
  if (sub != 1 && sub != 2) throw std::invalid_argument("vertex_at: sublattice must be 1 or 2");
  return (sub == 1 ? kP1 : kP2) + kV1 * n.n1 + kV2 * n.n2;
}

inline Eis hexagon_center(const Cell& n) { return kV1 * n.n1 + kV2 * n.n2; }

inline std::array<Eis, 3> neighbor_offsets(int sub) {
  if (sub == 1) return {omega_pow(1), omega_pow(3), omega_pow(5)};
  return {omega_pow(0), omega_pow(2), omega_pow(4)};
}

inline std::array<Eis, 3> neighbors(const Eis& z) {
  const int s = sublattice(z);
  if (s == 0) throw std::invalid_argument("neighbors: not a lattice vertex");
  auto off = neighbor_offsets(s);
  return {z + off[0], z + off[1], z + off[2]};
}

inline bool adjacent(const Eis& u, const Eis& v) {
  if (!is_vertex(u) || !is_vertex(v)) return false;
  for (const Eis& w : neighbors(u))
    if (w == v) return true;
  return false;
}

inline std::string vertex_key(const Eis& z) {
  const Cell c = cell_of(z);
  std::ostringstream os;
  os << c.n1 << "," << c.n2 << ":" << sublattice(z);
  return os.str();
}

// Edges are stored tail-on-sublattice-1; dir is k in {1,3,5} with head = tail + w^k.
struct Edge {
  Eis tail;
  int dir = 1;

  Eis head() const { return tail + omega_pow(dir); }
  bool operator==(const Edge&) const = default;
  auto operator<=>(const Edge&) const = default;
};

inline Edge canonical_edge(Eis u, Eis v) {
  if (!adjacent(u, v)) throw std::invalid_argument("canonical_edge: vertices are not adjacent");
  if (sublattice(u) == 2) std::swap(u, v);
  const Eis d = v - u;
  for (int k : {1, 3, 5})
    if (omega_pow(k) == d) return {u, k};
  throw std::logic_error("canonical_edge: unreachable");
}

inline std::string edge_key(const Edge& e) {
  const Cell c = cell_of(e.tail);
  std::ostringstream os;
  os << c.n1 << "," << c.n2 << "|" << e.dir;
  return os.str();
}

inline Edge parse_edge_key(const std::string& key) {
  long long n1 = 0, n2 = 0;
  int dir = 0;
  char c1 = 0, c2 = 0;
  std::istringstream is(key);
  if (!(is >> n1 >> c1 >> n2 >> c2 >> dir) || c1 != ',' || c2 != '|' || (dir != 1 && dir != 3 && dir != 5))
    throw std::invalid_argument("malformed edge key '" + key + "' (expected \"n1,n2|d\" with d in {1,3,5})");
  std::string rest;
  if (is >> rest) throw std::invalid_argument("malformed edge key '" + key + "'");
  return {vertex_at({n1, n2}, 1), dir};
}

// Ind(e) = cell(head) - cell(tail), bookkeeping only.
inline Cell edge_index(const Edge& e) {
  const Cell a = cell_of(e.tail);
  const Cell b = cell_of(e.head());
  return {b.n1 - a.n1, b.n2 - a.n2};
}

enum class Side { T = 0, R = 1, B = 2, L = 3 };

inline const char* side_name(Side s) {
  static const char* names[] = {"T", "R", "B", "L"};
  return names[static_cast<int>(s)];
}

// rotation: 0, 1 (+2pi/3), 2 (-2pi/3); half_turn applies the point reflection first.
struct Frame {
  int rotation = 0;
  bool half_turn = false;

  bool operator==(const Frame&) const = default;
  auto operator<=>(const Frame&) const = default;

  std::string tag() const {
    static const char* r[] = {"r0", "rp", "rm"};
    return std::string(r[rotation]) + (half_turn ? "h" : "");
  }
};

inline Frame parse_frame(const std::string& tag) {
  Frame f;
  std::string t = tag;
  if (!t.empty() && t.back() == 'h') {
    f.half_turn = true;
    t.pop_back();
  }
  if (t == "r0") f.rotation = 0;
  else if (t == "rp") f.rotation = 1;
  else if (t == "rm") f.rotation = 2;
  else throw std::invalid_argument("unknown frame tag '" + tag + "' (expected r0, rp, rm, optionally suffixed by h)");
  return f;
}

// Rigid lattice maps attached to a domain size.
struct LatticeMaps {
  int N = 1;

  Eis twice_center() const { return {0, 3 * static_cast<std::int64_t>(N)}; }
  Eis rotation_center() const {
    const std::int64_t h = N / 2;
    return hexagon_center({h, h});
  }
  Eis half(const Eis& z) const { return twice_center() - z; }
  Eis rotate(const Eis& z, int r) const {
    const Eis c = rotation_center();
    return c + omega_pow(2 * r) * (z - c);
  }
  Eis to_global(const Eis& z, const Frame& f) const {
    return rotate(f.half_turn ? half(z) : z, f.rotation);
  }
  Eis to_local(const Eis& z, const Frame& f) const {
    const Eis u = rotate(z, (3 - f.rotation) % 3);
    return f.half_turn ? half(u) : u;
  }
  Edge map_edge(const Edge& e, const Frame& f) const {
    return canonical_edge(to_global(e.tail, f), to_global(e.head(), f));
  }
};

struct VPair {
  Eis bottom;
  Edge left;   // (bottom, alpha_l), denominator in the ratio
  Edge right;  // (bottom, alpha_{l+1}), numerator in the ratio
};

struct DiagonalLine {
  int k = 0;
  std::int64_t level = 0;     // a_k in the local frame
  std::vector<Eis> vertices;  // alpha_{k,0..m}, global coordinates
  std::vector<VPair> vpairs;  // m entries

  int m() const { return static_cast<int>(vpairs.size()); }
};

class Domain {
 public:
  int N = 1;
  Frame frame;
  std::vector<Eis> interior;
  std::vector<Eis> boundary;       // T, R, B, L concatenated
  std::array<int, 5> side_start{};  // offsets of T, R, B, L and end
  std::vector<int> attach;         // boundary index -> interior index
  std::vector<Edge> edges;         // strictly interior edges first, then pendant edges
  int num_strict_edges = 0;
  std::vector<DiagonalLine> lines;

  int num_interior() const { return static_cast<int>(interior.size()); }
  int num_boundary() const { return static_cast<int>(boundary.size()); }

  int interior_index(const Eis& z) const {
    auto it = interior_index_.find(z);
    return it == interior_index_.end() ? -1 : it->second;
  }
  int boundary_index(const Eis& z) const {
    auto it = boundary_index_.find(z);
    return it == boundary_index_.end() ? -1 : it->second;
  }
  bool is_interior(const Eis& z) const { return interior_index(z) >= 0; }
  bool is_boundary(const Eis& z) const { return boundary_index(z) >= 0; }

  Side side(int b) const {
    for (int s = 3; s >= 0; --s)
      if (b >= side_start[static_cast<std::size_t>(s)]) return static_cast<Side>(s);
    throw std::out_of_range("boundary index");
  }
  int side_size(Side s) const {
    const auto i = static_cast<std::size_t>(s);
    return side_start[i + 1] - side_start[i];
  }
  int side_begin(Side s) const { return side_start[static_cast<std::size_t>(s)]; }

  bool strictly_interior(const Edge& e) const { return is_interior(e.tail) && is_interior(e.head()); }
  bool contains_edge(const Edge& e) const {
    return (is_interior(e.tail) || is_boundary(e.tail)) && (is_interior(e.head()) || is_boundary(e.head())) &&
           (is_interior(e.tail) || is_interior(e.head()));
  }

  Eis to_local(const Eis& z) const { return LatticeMaps{N}.to_local(z, frame); }
  std::int64_t local_level(const Eis& z) const { return to_local(z).level(); }

  std::vector<std::string> boundary_keys() const {
    std::vector<std::string> out;
    out.reserve(boundary.size());
    for (const Eis& z : boundary) out.push_back(vertex_key(z));
    return out;
  }

  void reindex() {
    interior_index_.clear();
    boundary_index_.clear();
    for (int i = 0; i < num_interior(); ++i) interior_index_[interior[static_cast<std::size_t>(i)]] = i;
    for (int i = 0; i < num_boundary(); ++i) boundary_index_[boundary[static_cast<std::size_t>(i)]] = i;
  }

 private:
  std::unordered_map<Eis, int, EisHash> interior_index_;
  std::unordered_map<Eis, int, EisHash> boundary_index_;
};

namespace detail {

// Side lists in the local frame, in the documented order.
inline std::array<std::vector<Eis>, 4> explicit_sides(int N) {
  const std::int64_t n = N;
  std::array<std::vector<Eis>, 4> s;
  for (std::int64_t k = 0; k <= n; ++k) s[0].push_back({-2 - n + k, 2 * n + 2 + k});  // alpha_k
  s[1].push_back({0, 3 * n + 2});                                                    // top corner
  for (std::int64_t k = n; k >= 0; --k) s[1].push_back({2 + n - k, n + 2 * k});
  for (std::int64_t k = 0; k <= n; ++k) s[2].push_back({2 + k, -2 + k});
  s[3].push_back({0, -2});  // 2 w^4
  for (std::int64_t k = 0; k <= n; ++k) s[3].push_back({-2 - k, 2 * k});  // beta_k
  return s;
}

}  // namespace detail

inline Domain build_domain(int N, Frame frame = {}) {
  if (N < 1) throw std::invalid_argument("build_domain: N must be >= 1");
  if (frame.rotation < 0 || frame.rotation > 2) throw std::invalid_argument("build_domain: bad rotation");

  // Omega: corners of the hexagons centred at v(n), n in [0,N]^2
  std::map<Eis, int> corner_count;
  for (int n1 = 0; n1 <= N; ++n1)
    for (int n2 = 0; n2 <= N; ++n2) {
      const Eis c = hexagon_center({n1, n2});
      for (int j = 0; j < 6; ++j) ++corner_count[c + omega_pow(j)];
    }

  std::set<Eis> omega;
  for (const auto& [z, cnt] : corner_count) omega.insert(z);

  std::set<Eis> pendant;
  std::map<Eis, Eis> attach_of;
  for (const auto& [z, cnt] : corner_count) {
    if (cnt != 1) continue;
    for (const Eis& w : neighbors(z))
      if (!omega.count(w)) {
        if (!pendant.insert(w).second) throw std::logic_error("build_domain: pendant vertex shared by two corners");
        attach_of[w] = z;
      }
  }

  const auto sides = detail::explicit_sides(N);
  std::set<Eis> listed;
  for (const auto& s : sides)
    for (const Eis& z : s) {
      if (!pendant.count(z)) throw std::logic_error("build_domain: listed boundary vertex is not a pendant vertex");
      if (!listed.insert(z).second) throw std::logic_error("build_domain: boundary sides overlap");
    }
  if (listed.size() != pendant.size()) throw std::logic_error("build_domain: periphery vertex not covered by side lists");

  const LatticeMaps maps{N};
  auto g = [&](const Eis& z) { return maps.to_global(z, frame); };

  Domain d;
  d.N = N;
  d.frame = frame;

  std::vector<Eis> local_interior(omega.begin(), omega.end());
  std::sort(local_interior.begin(), local_interior.end(), [](const Eis& x, const Eis& y) {
    return std::make_pair(x.level(), x.a) < std::make_pair(y.level(), y.a);
  });
  for (const Eis& z : local_interior) d.interior.push_back(g(z));

  int off = 0;
  for (int s = 0; s < 4; ++s) {
    d.side_start[static_cast<std::size_t>(s)] = off;
    for (const Eis& z : sides[static_cast<std::size_t>(s)]) d.boundary.push_back(g(z));
    off += static_cast<int>(sides[static_cast<std::size_t>(s)].size());
  }
  d.side_start[4] = off;
  d.reindex();

  for (const Eis& zb : d.boundary) d.attach.push_back(d.interior_index(g(attach_of.at(d.to_local(zb)))));

  std::set<Edge> strict;
  for (const Eis& z : d.interior)
    for (const Eis& w : neighbors(z))
      if (d.is_interior(w)) strict.insert(canonical_edge(z, w));
  d.edges.assign(strict.begin(), strict.end());
  d.num_strict_edges = static_cast<int>(d.edges.size());
  for (int b = 0; b < d.num_boundary(); ++b)
    d.edges.push_back(canonical_edge(d.boundary[static_cast<std::size_t>(b)],
                                     d.interior[static_cast<std::size_t>(d.attach[static_cast<std::size_t>(b)])]));

  const Eis step{2, -1};  // 1 + w^5
  for (int k = 0; k <= N; ++k) {
    DiagonalLine line;
    line.k = k;
    const Eis a0 = sides[0][static_cast<std::size_t>(k)];
    line.level = a0.level();
    std::vector<Eis> loc{a0};
    for (int l = 1;; ++l) {
      const Eis z = a0 + step * l;
      loc.push_back(z);
      if (!omega.count(z)) {
        if (!pendant.count(z)) throw std::logic_error("build_domain: diagonal line leaves the domain off the boundary");
        break;
      }
    }
    for (const Eis& z : loc) line.vertices.push_back(g(z));
    for (std::size_t l = 0; l + 1 < loc.size(); ++l) {
      const Eis a = loc[l] + omega_pow(5);
      if (!omega.count(a)) throw std::logic_error("build_domain: V-pair bottom outside the domain");
      line.vpairs.push_back({g(a), canonical_edge(g(a), g(loc[l])), canonical_edge(g(a), g(loc[l + 1]))});
    }
    d.lines.push_back(std::move(line));
  }
  return d;
}

inline Domain rotated_domain(int N, int rotation) { return build_domain(N, Frame{rotation, false}); }

inline const DiagonalLine& diagonal_line(const Domain& d, int k) {
  if (k < 0 || k > d.N) throw std::out_of_range("diagonal_line: k must lie in [0, N]");
  return d.lines[static_cast<std::size_t>(k)];
}

// Point reflection through the domain centre, as index permutations.
struct HalfTurnMap {
  int N = 1;
  std::vector<int> interior;  // interior index -> interior index
  std::vector<int> boundary;  // boundary index -> boundary index

  Eis operator()(const Eis& z) const { return LatticeMaps{N}.half(z); }
  Edge operator()(const Edge& e) const { return canonical_edge((*this)(e.tail), (*this)(e.head())); }
};

inline HalfTurnMap half_turn_map(const Domain& d) {
  if (d.frame != Frame{}) throw std::invalid_argument("half_turn_map: expects the unrotated domain");
  HalfTurnMap h;
  h.N = d.N;
  for (const Eis& z : d.interior) {
    const int j = d.interior_index(h(z));
    if (j < 0) throw std::logic_error("half_turn_map: interior not invariant");
    h.interior.push_back(j);
  }
  for (const Eis& z : d.boundary) {
    const int j = d.boundary_index(h(z));
    if (j < 0) throw std::logic_error("half_turn_map: boundary not invariant");
    h.boundary.push_back(j);
  }
  return h;
}

// Domain description for export.
inline nlohmann::json domain_to_json(const Domain& d) {
  using nlohmann::json;
  json j;
  j["format"] = "hexqg-domain";
  j["version"] = 1;
  j["N"] = d.N;
  j["frame"] = d.frame.tag();
  auto vtx = [](const Eis& z) {
    const Cell c = cell_of(z);
    const auto p = z.to_complex();
    return json{{"key", vertex_key(z)}, {"cell", {c.n1, c.n2}}, {"sub", sublattice(z)}, {"pos", {p.real(), p.imag()}}};
  };
  j["interior"] = json::array();
  for (const Eis& z : d.interior) j["interior"].push_back(vtx(z));
  j["boundary"] = json::object();
  for (int s = 0; s < 4; ++s) {
    json side = json::array();
    for (int b = d.side_begin(static_cast<Side>(s)); b < d.side_start[static_cast<std::size_t>(s) + 1]; ++b)
      side.push_back(vtx(d.boundary[static_cast<std::size_t>(b)]));
    j["boundary"][side_name(static_cast<Side>(s))] = side;
  }
  j["edges"] = json::array();
  for (int i = 0; i < static_cast<int>(d.edges.size()); ++i)
    j["edges"].push_back({{"key", edge_key(d.edges[static_cast<std::size_t>(i)])}, {"strict", i < d.num_strict_edges}});
  return j;
}

}  // namespace hexqg
