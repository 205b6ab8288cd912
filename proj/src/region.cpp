#include "rshe/region.hpp"

#include <cmath>
#include <stdexcept>

namespace rshe {

double Region::reach(int d) const {
  double off = 0.0;
  for (int a = 0; a < d; ++a) off = std::max(off, std::abs(center[a]));
  return radius + off;
}

RegionMask::RegionMask(const Lattice& lattice, const Region& region)
    : region_(region), cell_volume_(lattice.cell_volume()) {
  if (!(region.radius > 0.0)) throw std::invalid_argument("region radius must be positive");
  const int d = lattice.dim();
  const double r2 = region.radius * region.radius;
  // Centers on the boundary count as inside; the slack absorbs rounding of the centers.
  const double slack = 1e-12 * std::max(1.0, region.radius);
  for (std::size_t i = 0; i < lattice.size(); ++i) {
    const Point x = lattice.center(i);
    bool in = true;
    if (region.kind == RegionKind::ball) {
      double dist2 = 0.0;
      for (int a = 0; a < d; ++a) {
        const double dx = x[a] - region.center[a];
        dist2 += dx * dx;
      }
      in = dist2 <= r2 + 2.0 * slack * region.radius;
    } else {
      for (int a = 0; a < d && in; ++a) in = std::abs(x[a] - region.center[a]) <= region.radius + slack;
    }
    if (in) cells_.push_back(i);
  }
  if (cells_.empty()) throw std::invalid_argument("empty region: no cell center inside");
}

double RegionMask::integrate(std::span<const double> field, std::span<const double> mean_field) const {
  double acc = 0.0;
  for (std::size_t i : cells_) acc += field[i] - mean_field[i];
  return cell_volume_ * acc;
}

double region_average(const SpatialField& field, const Region& region, const SpatialField& mean_field) {
  if (!(field.lattice == mean_field.lattice)) throw std::invalid_argument("field and mean field lattices differ");
  const RegionMask mask(field.lattice, region);
  return mask.integrate(field.values, mean_field.values);
}

}  // namespace rshe
