#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "rshe/lattice.hpp"

namespace rshe {

enum class RegionKind { ball, box };

/// Euclidean ball of radius R, or box with half-width R, around `center`.
struct Region {
  RegionKind kind = RegionKind::ball;
  double radius = 1.0;
  Point center{};

  /// Largest |x_a| reached by the region over all axes.
  double reach(int d) const;
  bool operator==(const Region&) const = default;
};

/// Cells whose centers lie in a region (cell-center membership rule).
class RegionMask {
 public:
  RegionMask(const Lattice& lattice, const Region& region);

  std::span<const std::size_t> cells() const { return cells_; }
  const Region& region() const { return region_; }

  /// h^d * sum over member cells of (field - mean_field).
  double integrate(std::span<const double> field, std::span<const double> mean_field) const;

 private:
  Region region_;
  double cell_volume_ = 0.0;
  std::vector<std::size_t> cells_;
};

/// Throws std::invalid_argument if no cell center falls inside the region.
double region_average(const SpatialField& field, const Region& region, const SpatialField& mean_field);

}  // namespace rshe
