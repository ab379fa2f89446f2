#include "mgopt/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace mgopt {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

// separable nine-point weights: 1 at the coarse node image, 1/2 on edges
inline double stencil_weight(int d) { return d == 0 ? 1.0 : 0.5; }
}  // namespace

GridHierarchy::GridHierarchy(int finest_level) {
  if (finest_level < 0 || finest_level > 12)
    throw std::invalid_argument("GridHierarchy: finest level must be in [0, 12], got " +
                                std::to_string(finest_level));
  levels_.reserve(static_cast<std::size_t>(finest_level) + 1);
  for (int k = 0; k <= finest_level; ++k) {
    GridLevel lv;
    lv.k = k;
    lv.m = (1 << (k + 1)) - 1;
    lv.n = lv.m * lv.m;
    lv.h = 1.0 / static_cast<double>(1 << (k + 1));
    levels_.push_back(lv);
  }
  prolongation_cache_.resize(levels_.size());
}

GridHierarchy build_hierarchy(int finest_level) { return GridHierarchy(finest_level); }

void GridHierarchy::check_pair(int k, const VecX& v, bool fine_side) const {
  if (k < 1 || k > finest())
    throw std::invalid_argument("GridHierarchy: level pair index out of range");
  const GridLevel& lv = fine_side ? level(k) : level(k - 1);
  if (v.size() != lv.n)
    throw std::invalid_argument("GridHierarchy: vector length " + std::to_string(v.size()) +
                                " does not match level dimension " + std::to_string(lv.n));
}

VecX GridHierarchy::prolongate(int k, const VecX& coarse) const {
  check_pair(k, coarse, /*fine_side=*/false);
  const GridLevel& cl = level(k - 1);
  const GridLevel& fl = level(k);
  VecX fine = VecX::Zero(fl.n);
  for (int cy = 0; cy < cl.m; ++cy) {
    for (int cx = 0; cx < cl.m; ++cx) {
      const double v = coarse[cl.node(cx, cy)];
      if (v == 0.0) continue;
      const int fx = 2 * cx + 1;
      const int fy = 2 * cy + 1;
      for (int dy = -1; dy <= 1; ++dy) {
        const int gy = fy + dy;
        if (gy < 0 || gy >= fl.m) continue;
        for (int dx = -1; dx <= 1; ++dx) {
          const int gx = fx + dx;
          if (gx < 0 || gx >= fl.m) continue;
          fine[fl.node(gx, gy)] += stencil_weight(dx) * stencil_weight(dy) * v;
        }
      }
    }
  }
  return fine;
}

VecX GridHierarchy::restrict_to_coarse(int k, const VecX& fine) const {
  check_pair(k, fine, /*fine_side=*/true);
  const GridLevel& cl = level(k - 1);
  const GridLevel& fl = level(k);
  VecX coarse = VecX::Zero(cl.n);
  for (int cy = 0; cy < cl.m; ++cy) {
    for (int cx = 0; cx < cl.m; ++cx) {
      const int fx = 2 * cx + 1;
      const int fy = 2 * cy + 1;
      double acc = 0.0;
      for (int dy = -1; dy <= 1; ++dy) {
        const int gy = fy + dy;
        if (gy < 0 || gy >= fl.m) continue;
        for (int dx = -1; dx <= 1; ++dx) {
          const int gx = fx + dx;
          if (gx < 0 || gx >= fl.m) continue;
          acc += stencil_weight(dx) * stencil_weight(dy) * fine[fl.node(gx, gy)];
        }
      }
      coarse[cl.node(cx, cy)] = 0.25 * acc;
    }
  }
  return coarse;
}

const SpMat& GridHierarchy::prolongation_matrix(int k) const {
  if (k < 1 || k > finest())
    throw std::invalid_argument("GridHierarchy: level pair index out of range");
  std::lock_guard<std::mutex> lock(cache_mutex_);
  auto& slot = prolongation_cache_[static_cast<std::size_t>(k)];
  if (!slot) {
    const GridLevel& cl = level(k - 1);
    const GridLevel& fl = level(k);
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(cl.n) * 9);
    for (int cy = 0; cy < cl.m; ++cy) {
      for (int cx = 0; cx < cl.m; ++cx) {
        const int col = cl.node(cx, cy);
        const int fx = 2 * cx + 1;
        const int fy = 2 * cy + 1;
        for (int dy = -1; dy <= 1; ++dy) {
          const int gy = fy + dy;
          if (gy < 0 || gy >= fl.m) continue;
          for (int dx = -1; dx <= 1; ++dx) {
            const int gx = fx + dx;
            if (gx < 0 || gx >= fl.m) continue;
            trips.emplace_back(fl.node(gx, gy), col, stencil_weight(dx) * stencil_weight(dy));
          }
        }
      }
    }
    auto mat = std::make_unique<SpMat>(fl.n, cl.n);
    mat->setFromTriplets(trips.begin(), trips.end());
    mat->makeCompressed();
    slot = std::move(mat);
  }
  return *slot;
}

CoarseNeighborhood GridHierarchy::coarse_neighborhood(int k, int coarse_index) const {
  if (k < 1 || k > finest())
    throw std::invalid_argument("GridHierarchy: level pair index out of range");
  const GridLevel& cl = level(k - 1);
  const GridLevel& fl = level(k);
  if (coarse_index < 0 || coarse_index >= cl.n)
    throw std::invalid_argument("GridHierarchy: coarse index out of range");
  const int cx = coarse_index % cl.m;
  const int cy = coarse_index / cl.m;
  const int fx = 2 * cx + 1;
  const int fy = 2 * cy + 1;
  CoarseNeighborhood nb;
  for (int dy = -1; dy <= 1; ++dy) {
    const int gy = fy + dy;
    if (gy < 0 || gy >= fl.m) continue;
    for (int dx = -1; dx <= 1; ++dx) {
      const int gx = fx + dx;
      if (gx < 0 || gx >= fl.m) continue;
      nb.node[static_cast<std::size_t>(nb.size++)] = fl.node(gx, gy);
    }
  }
  return nb;
}

VecX GridHierarchy::restrict_bounds_max(int k, const VecX& y) const {
  check_pair(k, y, /*fine_side=*/true);
  const GridLevel& cl = level(k - 1);
  VecX out(cl.n);
  for (int i = 0; i < cl.n; ++i) {
    const CoarseNeighborhood nb = coarse_neighborhood(k, i);
    double v = -kInf;
    for (int t = 0; t < nb.size; ++t) v = std::max(v, y[nb.node[static_cast<std::size_t>(t)]]);
    out[i] = v;
  }
  return out;
}

VecX GridHierarchy::restrict_bounds_min(int k, const VecX& y) const {
  check_pair(k, y, /*fine_side=*/true);
  const GridLevel& cl = level(k - 1);
  VecX out(cl.n);
  for (int i = 0; i < cl.n; ++i) {
    const CoarseNeighborhood nb = coarse_neighborhood(k, i);
    double v = kInf;
    for (int t = 0; t < nb.size; ++t) v = std::min(v, y[nb.node[static_cast<std::size_t>(t)]]);
    out[i] = v;
  }
  return out;
}

VecX GridHierarchy::restrict_bounds_guarded_lower(int k, const VecX& y, const Mask& active) const {
  check_pair(k, y, /*fine_side=*/true);
  if (static_cast<int>(active.size()) != level(k).n)
    throw std::invalid_argument("GridHierarchy: activity mask length mismatch");
  const GridLevel& cl = level(k - 1);
  VecX out(cl.n);
  for (int i = 0; i < cl.n; ++i) {
    const CoarseNeighborhood nb = coarse_neighborhood(k, i);
    bool hit = false;
    double v = -kInf;
    for (int t = 0; t < nb.size; ++t) {
      const int j = nb.node[static_cast<std::size_t>(t)];
      if (active[static_cast<std::size_t>(j)]) {
        hit = true;
        break;
      }
      v = std::max(v, y[j]);
    }
    out[i] = hit ? 0.0 : v;
  }
  return out;
}

VecX GridHierarchy::restrict_bounds_guarded_upper(int k, const VecX& y, const Mask& active) const {
  check_pair(k, y, /*fine_side=*/true);
  if (static_cast<int>(active.size()) != level(k).n)
    throw std::invalid_argument("GridHierarchy: activity mask length mismatch");
  const GridLevel& cl = level(k - 1);
  VecX out(cl.n);
  for (int i = 0; i < cl.n; ++i) {
    const CoarseNeighborhood nb = coarse_neighborhood(k, i);
    bool hit = false;
    double v = kInf;
    for (int t = 0; t < nb.size; ++t) {
      const int j = nb.node[static_cast<std::size_t>(t)];
      if (active[static_cast<std::size_t>(j)]) {
        hit = true;
        break;
      }
      v = std::min(v, y[j]);
    }
    out[i] = hit ? 0.0 : v;
  }
  return out;
}

}  // namespace mgopt
