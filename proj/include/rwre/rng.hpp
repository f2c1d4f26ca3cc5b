#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "rwre/lattice.hpp"

namespace rwre {

/// SplitMix64 finalizer: a bijective avalanche mix of 64 bits.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Counter-based key for a lattice site: the same (seed, site) always yields
/// the same 64 bits, and distinct sites give unrelated outputs.
inline std::uint64_t hash_site(std::uint64_t seed, const Site& s, int dim) {
  std::uint64_t h = mix64(seed ^ 0x6a09e667f3bcc909ULL);
  for (int a = 0; a < dim; ++a) {
    h = mix64(h ^ (static_cast<std::uint64_t>(static_cast<std::uint32_t>(s[a])) +
                   (static_cast<std::uint64_t>(a + 1) << 32)));
  }
  return h;
}

/// Top 53 bits mapped to [0, 1).
constexpr double to_unit(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

/// Seed for the index-th member of a named stream family derived from a master seed.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index) {
  return mix64(mix64(master ^ mix64(stream)) ^ mix64(index + 0x243f6a8885a308d3ULL));
}

using Engine = std::mt19937_64;

inline Engine make_engine(std::uint64_t master, std::uint64_t stream, std::uint64_t index) {
  return Engine(derive_seed(master, stream, index));
}

inline double uniform01(Engine& eng) { return to_unit(eng()); }

/// Draw tau with P(tau = n) = (1 - delta) delta^(n-1), n >= 1.
inline std::int64_t draw_geometric_tau(Engine& eng, double delta) {
  if (delta <= 0.0) return 1;
  const double u = 1.0 - uniform01(eng);  // (0, 1]
  const double k = std::floor(std::log(u) / std::log(delta));
  if (!(k < 9.0e18)) return std::int64_t{9'000'000'000'000'000'000};
  return 1 + static_cast<std::int64_t>(k);
}

/// Stream tags keep the seed families of different estimators disjoint.
namespace stream {
inline constexpr std::uint64_t environment = 0x1001;
inline constexpr std::uint64_t walk = 0x2002;
inline constexpr std::uint64_t killing = 0x3003;
inline constexpr std::uint64_t instance = 0x4004;
}  // namespace stream

}  // namespace rwre
