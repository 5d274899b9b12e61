#pragma once

// Exact arithmetic on Z[w], w = exp(i*pi/3), w^2 = w - 1.
// Every hexagonal-lattice vertex used here is an element a + b*w.

#include <array>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <ostream>

namespace hexqg {

struct Eis {
  std::int64_t a = 0;
  std::int64_t b = 0;

  constexpr Eis() = default;
  constexpr Eis(std::int64_t a_, std::int64_t b_) : a(a_), b(b_) {}

  constexpr Eis operator+(const Eis& o) const { return {a + o.a, b + o.b}; }
  constexpr Eis operator-(const Eis& o) const { return {a - o.a, b - o.b}; }
  constexpr Eis operator-() const { return {-a, -b}; }
  constexpr Eis operator*(const Eis& o) const {
    // (a + b w)(c + d w) = ac + (ad + bc) w + bd (w - 1)
    return {a * o.a - b * o.b, a * o.b + b * o.a + b * o.b};
  }
  constexpr Eis operator*(std::int64_t s) const { return {a * s, b * s}; }
  constexpr bool operator==(const Eis&) const = default;
  constexpr auto operator<=>(const Eis&) const = default;

  // x1 + sqrt(3) x2 for the point a + b(1/2 + i sqrt(3)/2)
  constexpr std::int64_t level() const { return a + 2 * b; }

  std::complex<double> to_complex() const {
    return {static_cast<double>(a) + 0.5 * static_cast<double>(b),
            0.8660254037844386 * static_cast<double>(b)};
  }
};

inline std::ostream& operator<<(std::ostream& os, const Eis& z) {
  return os << "(" << z.a << "," << z.b << ")";
}

// w^k for k = 0..5
inline constexpr std::array<Eis, 6> kOmega{
    Eis{1, 0}, Eis{0, 1}, Eis{-1, 1}, Eis{-1, 0}, Eis{0, -1}, Eis{1, -1}};

constexpr Eis omega_pow(int k) { return kOmega[static_cast<std::size_t>(((k % 6) + 6) % 6)]; }

constexpr std::int64_t floor_mod(std::int64_t x, std::int64_t m) {
  const std::int64_t r = x % m;
  return r < 0 ? r + m : r;
}

struct EisHash {
  std::size_t operator()(const Eis& z) const noexcept {
    const auto ua = static_cast<std::uint64_t>(z.a);
    const auto ub = static_cast<std::uint64_t>(z.b);
    return std::hash<std::uint64_t>{}(ua * 0x9E3779B97F4A7C15ULL ^ (ub + 0x7F4A7C15ULL));
  }
};

}  // namespace hexqg
