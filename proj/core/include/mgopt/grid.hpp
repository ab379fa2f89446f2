#pragma once

#include "mgopt/types.hpp"

#include <array>
#include <memory>
#include <mutex>
#include <vector>

namespace mgopt {

/// One uniform refinement level of the unit square. The mesh is made of
/// square bilinear elements; only interior nodes carry unknowns and they
/// are numbered row-major, bottom row first.
struct GridLevel {
  int k = 0;       ///< refinement level, 0 = coarsest
  int m = 1;       ///< interior nodes per side, 2^(k+1) - 1
  int n = 1;       ///< interior node count, m^2
  double h = 0.5;  ///< mesh size, 1 / 2^(k+1)

  int node(int ix, int iy) const { return iy * m + ix; }
  /// Coordinate of interior index i (same along either axis).
  double coord(int i) const { return static_cast<double>(i + 1) * h; }
};

/// Interior fine nodes lying inside the open support of a coarse basis
/// function: the 3x3 block around the fine image of the coarse node,
/// clipped to the interior.
struct CoarseNeighborhood {
  std::array<int, 9> node{};
  int size = 0;
};

/// Nested family of levels 0..finest with the grid transfer operators:
/// nine-point interpolation, full-weighting restriction (1/4 of the
/// transpose) and the max/min bound restrictions, plain and guarded.
/// Immutable after construction and safe to share across threads.
class GridHierarchy {
 public:
  explicit GridHierarchy(int finest_level);

  int finest() const { return static_cast<int>(levels_.size()) - 1; }
  int level_count() const { return static_cast<int>(levels_.size()); }
  const GridLevel& level(int k) const { return levels_.at(static_cast<std::size_t>(k)); }

  /// Interpolate from level k-1 onto level k.
  VecX prolongate(int k, const VecX& coarse) const;
  /// Full-weighting restriction from level k onto level k-1.
  VecX restrict_to_coarse(int k, const VecX& fine) const;

  /// The interpolation operator from level k-1 to k as a sparse matrix
  /// (n_k x n_{k-1}); built on first use and cached.
  const SpMat& prolongation_matrix(int k) const;

  CoarseNeighborhood coarse_neighborhood(int k, int coarse_index) const;

  /// Coarse bound from below: entrywise max over the neighborhood.
  VecX restrict_bounds_max(int k, const VecX& y) const;
  /// Coarse bound from above: entrywise min over the neighborhood.
  VecX restrict_bounds_min(int k, const VecX& y) const;
  /// Guarded variants: a coarse entry collapses to 0 as soon as any fine
  /// node in the neighborhood is active. The activity mask is passed
  /// separately because the finest-level y may already carry -inf/+inf
  /// in place of the active entries.
  VecX restrict_bounds_guarded_lower(int k, const VecX& y, const Mask& active) const;
  VecX restrict_bounds_guarded_upper(int k, const VecX& y, const Mask& active) const;

 private:
  void check_pair(int k, const VecX& v, bool fine_side) const;

  std::vector<GridLevel> levels_;
  mutable std::vector<std::unique_ptr<SpMat>> prolongation_cache_;
  mutable std::mutex cache_mutex_;
};

/// Builds the level family 0..finest_level. Rejects levels outside [0, 12].
GridHierarchy build_hierarchy(int finest_level);

}  // namespace mgopt
