#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <stdexcept>
#include <string>

namespace rwre {

/// Largest lattice dimension supported by the fixed-size coordinate storage.
inline constexpr int kMaxDim = 4;
inline constexpr int kMaxDirs = 2 * kMaxDim;

/// A point of Z^d. Coordinates beyond the active dimension are kept at zero so
/// that points of different (compatible) dimension compare and hash sensibly.
struct Site {
  std::array<int, kMaxDim> c{};

  Site() = default;
  Site(std::initializer_list<int> coords) {
    if (coords.size() > static_cast<std::size_t>(kMaxDim)) {
      throw std::invalid_argument("Site: too many coordinates");
    }
    int i = 0;
    for (int v : coords) c[i++] = v;
  }

  int& operator[](int i) { return c[i]; }
  int operator[](int i) const { return c[i]; }

  friend Site operator+(Site a, const Site& b) {
    for (int i = 0; i < kMaxDim; ++i) a.c[i] += b.c[i];
    return a;
  }
  friend Site operator-(Site a, const Site& b) {
    for (int i = 0; i < kMaxDim; ++i) a.c[i] -= b.c[i];
    return a;
  }
  friend Site operator-(Site a) {
    for (int i = 0; i < kMaxDim; ++i) a.c[i] = -a.c[i];
    return a;
  }
  friend bool operator==(const Site&, const Site&) = default;
  friend auto operator<=>(const Site&, const Site&) = default;

  int norm1() const {
    int s = 0;
    for (int v : c) s += v < 0 ? -v : v;
    return s;
  }
  int norm_inf() const {
    int s = 0;
    for (int v : c) s = std::max(s, v < 0 ? -v : v);
    return s;
  }
  std::string str(int dim) const;
};

/// A unit vector +-e_axis. Directions of Z^d are indexed 2*axis + (sign < 0),
/// i.e. the order (e1, -e1, e2, -e2, ...).
struct Direction {
  int axis = 0;
  int sign = 1;

  static Direction from_index(int idx) { return {idx / 2, (idx % 2 == 0) ? 1 : -1}; }
  int index() const { return 2 * axis + (sign < 0 ? 1 : 0); }
  Direction operator-() const { return {axis, -sign}; }
  Site site() const {
    Site s;
    s.c[axis] = sign;
    return s;
  }
  friend bool operator==(const Direction&, const Direction&) = default;
};

inline int num_directions(int dim) { return 2 * dim; }

/// Index of the opposite direction.
inline int opposite(int dir_index) { return dir_index ^ 1; }

inline Site unit(int dir_index) { return Direction::from_index(dir_index).site(); }

/// Shift a site by one step in direction dir_index.
inline Site step(Site s, int dir_index) {
  s.c[dir_index / 2] += (dir_index % 2 == 0) ? 1 : -1;
  return s;
}

std::string direction_name(int dir_index);

void check_dimension(int dim);

/// Dense, row-major box [lo, hi] of Z^d (inclusive bounds), used by every
/// windowed table in the library.
class Box {
 public:
  Box() = default;
  Box(int dim, Site lo, Site hi);
  static Box centered(int dim, Site center, int radius);

  int dim() const { return dim_; }
  const Site& lo() const { return lo_; }
  const Site& hi() const { return hi_; }
  std::size_t size() const { return size_; }
  int extent(int axis) const { return hi_[axis] - lo_[axis] + 1; }
  std::size_t stride(int axis) const { return stride_[axis]; }

  bool contains(const Site& s) const {
    for (int a = 0; a < dim_; ++a) {
      if (s[a] < lo_[a] || s[a] > hi_[a]) return false;
    }
    return true;
  }
  std::size_t index(const Site& s) const {
    std::size_t idx = 0;
    for (int a = 0; a < dim_; ++a) idx += static_cast<std::size_t>(s[a] - lo_[a]) * stride_[a];
    return idx;
  }
  Site site(std::size_t idx) const {
    Site s;
    for (int a = 0; a < dim_; ++a) {
      s.c[a] = lo_[a] + static_cast<int>(idx / stride_[a]);
      idx %= stride_[a];
    }
    return s;
  }
  /// Smallest l-infinity distance from s to a site outside the box (0 if s is outside).
  int depth(const Site& s) const;
  Box grown(int margin) const;
  Box hull(const Box& other) const;

 private:
  int dim_ = 0;
  Site lo_{};
  Site hi_{};
  std::array<std::size_t, kMaxDim> stride_{};
  std::size_t size_ = 0;
};

}  // namespace rwre

template <>
struct std::hash<rwre::Site> {
  std::size_t operator()(const rwre::Site& s) const noexcept {
    std::uint64_t h = 0x9e3779b97f4a7c15ULL;
    for (int v : s.c) {
      h ^= static_cast<std::uint64_t>(static_cast<std::uint32_t>(v)) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    }
    return static_cast<std::size_t>(h);
  }
};
