#include "rshe/lattice.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace rshe {

RieszSpec RieszSpec::make(int d, double beta) {
  RieszSpec s{d, beta};
  s.validate();
  return s;
}

void RieszSpec::validate() const {
  if (d < 1 || d > kMaxDim) {
    throw std::invalid_argument("dimension d=" + std::to_string(d) + " outside [1, " +
                                std::to_string(kMaxDim) + "]");
  }
  const double cap = std::min<double>(d, 2.0);
  if (!(beta > 0.0) || !(beta < cap)) {
    throw std::invalid_argument("beta must be in (0, min(d,2)=" + std::to_string(static_cast<int>(cap)) +
                                "), got " + std::to_string(beta));
  }
}

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

Lattice::Lattice(int d, int n, double half_extent) : d_(d), n_(n), half_extent_(half_extent) {
  if (d < 1 || d > kMaxDim) throw std::invalid_argument("lattice dimension out of range");
  if (!is_power_of_two(n) || n < 2) {
    throw std::invalid_argument("lattice n=" + std::to_string(n) + " is not a power of two");
  }
  if (!(half_extent > 0.0) || !std::isfinite(half_extent)) {
    throw std::invalid_argument("lattice half extent must be positive");
  }
  spacing_ = 2.0 * half_extent / n;
  size_ = 1;
  for (int a = 0; a < d; ++a) size_ *= static_cast<std::size_t>(n);
}

double Lattice::cell_volume() const { return std::pow(spacing_, d_); }

MultiIndex Lattice::unflatten(std::size_t flat) const {
  MultiIndex idx{};
  for (int a = d_ - 1; a >= 0; --a) {
    idx[a] = static_cast<int>(flat % n_);
    flat /= n_;
  }
  return idx;
}

std::size_t Lattice::flatten(const MultiIndex& idx) const {
  std::size_t flat = 0;
  for (int a = 0; a < d_; ++a) flat = flat * n_ + static_cast<std::size_t>(idx[a]);
  return flat;
}

Point Lattice::center(std::size_t flat) const {
  const MultiIndex idx = unflatten(flat);
  Point p{};
  for (int a = 0; a < d_; ++a) p[a] = -half_extent_ + (idx[a] + 0.5) * spacing_;
  return p;
}

double Lattice::min_image_distance(std::size_t flat) const {
  const MultiIndex idx = unflatten(flat);
  double r2 = 0.0;
  for (int a = 0; a < d_; ++a) {
    const double off = min_image(idx[a]) * spacing_;
    r2 += off * off;
  }
  return std::sqrt(r2);
}

std::size_t Lattice::shifted(std::size_t flat, const MultiIndex& offset) const {
  MultiIndex idx = unflatten(flat);
  for (int a = 0; a < d_; ++a) {
    int k = (idx[a] + offset[a]) % n_;
    if (k < 0) k += n_;
    idx[a] = k;
  }
  return flatten(idx);
}

bool SpatialField::all_finite() const {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace rshe
