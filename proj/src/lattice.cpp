#include "rwre/lattice.hpp"

#include <algorithm>
#include <limits>

namespace rwre {

std::string Site::str(int dim) const {
  std::string out = "(";
  for (int a = 0; a < dim; ++a) {
    if (a) out += ",";
    out += std::to_string(c[a]);
  }
  return out + ")";
}

std::string direction_name(int dir_index) {
  const Direction d = Direction::from_index(dir_index);
  return std::string(d.sign > 0 ? "+e" : "-e") + std::to_string(d.axis + 1);
}

void check_dimension(int dim) {
  if (dim < 1 || dim > kMaxDim) {
    throw std::invalid_argument("dimension must be in [1, " + std::to_string(kMaxDim) + "], got " +
                                std::to_string(dim));
  }
}

Box::Box(int dim, Site lo, Site hi) : dim_(dim), lo_(lo), hi_(hi) {
  check_dimension(dim);
  for (int a = dim; a < kMaxDim; ++a) lo_[a] = hi_[a] = 0;
  std::size_t s = 1;
  for (int a = dim - 1; a >= 0; --a) {
    if (hi_[a] < lo_[a]) throw std::invalid_argument("Box: empty extent");
    stride_[a] = s;
    s *= static_cast<std::size_t>(hi_[a] - lo_[a] + 1);
  }
  size_ = s;
}

Box Box::centered(int dim, Site center, int radius) {
  Site lo = center;
  Site hi = center;
  for (int a = 0; a < dim; ++a) {
    lo[a] -= radius;
    hi[a] += radius;
  }
  return Box(dim, lo, hi);
}

int Box::depth(const Site& s) const {
  if (!contains(s)) return 0;
  int d = std::numeric_limits<int>::max();
  for (int a = 0; a < dim_; ++a) d = std::min({d, s[a] - lo_[a] + 1, hi_[a] - s[a] + 1});
  return d;
}

Box Box::grown(int margin) const {
  Site lo = lo_;
  Site hi = hi_;
  for (int a = 0; a < dim_; ++a) {
    lo[a] -= margin;
    hi[a] += margin;
  }
  return Box(dim_, lo, hi);
}

Box Box::hull(const Box& other) const {
  Site lo = lo_;
  Site hi = hi_;
  for (int a = 0; a < dim_; ++a) {
    lo[a] = std::min(lo[a], other.lo_[a]);
    hi[a] = std::max(hi[a], other.hi_[a]);
  }
  return Box(dim_, lo, hi);
}

}  // namespace rwre
