#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace rshe {

inline constexpr int kMaxDim = 3;

using Point = std::array<double, kMaxDim>;
using MultiIndex = std::array<int, kMaxDim>;

/// Riesz covariance |x - y|^{-beta} in dimension d.
struct RieszSpec {
  int d = 1;
  double beta = 0.5;

  /// Throws std::invalid_argument unless 0 < beta < min(d, 2).
  static RieszSpec make(int d, double beta);
  void validate() const;

  bool operator==(const RieszSpec&) const = default;
};

/// Periodic cell lattice on the torus [-L, L)^d with n cells per axis.
///
/// Cell i along an axis has center -L + (i + 1/2) h, h = 2L / n.  Flat
/// indices are row-major with axis 0 slowest.
class Lattice {
 public:
  Lattice() = default;
  Lattice(int d, int n, double half_extent);

  int dim() const { return d_; }
  int points_per_axis() const { return n_; }
  double half_extent() const { return half_extent_; }
  double spacing() const { return spacing_; }
  double cell_volume() const;
  std::size_t size() const { return size_; }

  MultiIndex unflatten(std::size_t flat) const;
  std::size_t flatten(const MultiIndex& idx) const;

  /// Cell center coordinates (components past dim() are zero).
  Point center(std::size_t flat) const;

  /// Signed minimum-image offset of axis index k, in cells: k or k - n.
  int min_image(int k) const { return k <= n_ / 2 ? k : k - n_; }

  /// Euclidean minimum-image distance between cell 0 and cell `flat`.
  double min_image_distance(std::size_t flat) const;

  /// Flat index of the cell displaced from `flat` by `offset` cells (periodic).
  std::size_t shifted(std::size_t flat, const MultiIndex& offset) const;

  bool operator==(const Lattice& o) const {
    return d_ == o.d_ && n_ == o.n_ && half_extent_ == o.half_extent_;
  }

 private:
  int d_ = 0;
  int n_ = 0;
  double half_extent_ = 0.0;
  double spacing_ = 0.0;
  std::size_t size_ = 0;
};

/// Real field sampled at cell centers.
struct SpatialField {
  Lattice lattice;
  std::vector<double> values;

  SpatialField() = default;
  explicit SpatialField(const Lattice& lat, double fill = 0.0)
      : lattice(lat), values(lat.size(), fill) {}

  std::size_t size() const { return values.size(); }
  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }
  bool all_finite() const;
};

bool is_power_of_two(int n);

}  // namespace rshe
