#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <cstdint>
#include <numeric>
#include <vector>

namespace mgopt {

using VecX = Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Per-node boolean flags (one entry per interior node of a level).
using Mask = std::vector<std::uint8_t>;

/// Function/gradient call counters, one slot per refinement level.
/// A solve owns its log; problem data itself stays immutable.
struct EvalLog {
  std::vector<std::int64_t> value_calls;
  std::vector<std::int64_t> gradient_calls;

  void resize(int levels) {
    value_calls.assign(static_cast<std::size_t>(levels), 0);
    gradient_calls.assign(static_cast<std::size_t>(levels), 0);
  }
  void ensure(int level) {
    if (level >= static_cast<int>(value_calls.size())) {
      value_calls.resize(static_cast<std::size_t>(level) + 1, 0);
      gradient_calls.resize(static_cast<std::size_t>(level) + 1, 0);
    }
  }
  std::int64_t combined(int level) const {
    return value_calls[static_cast<std::size_t>(level)] +
           gradient_calls[static_cast<std::size_t>(level)];
  }
  std::int64_t combined_total() const {
    std::int64_t s = 0;
    for (std::size_t k = 0; k < value_calls.size(); ++k)
      s += value_calls[k] + gradient_calls[k];
    return s;
  }
  int levels() const { return static_cast<int>(value_calls.size()); }
};

}  // namespace mgopt
