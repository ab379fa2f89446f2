#pragma once

#include "mgopt/grid.hpp"
#include "mgopt/types.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace mgopt {

/// Energy-norm split of an error vector into the component interpolated
/// from the coarse grid and its complement.
struct ErrorSplit {
  double low = 0.0;   ///< || S e ||_Q
  double high = 0.0;  ///< || (I - S) e ||_Q
};

struct RateEstimate {
  double formula_rate = 0.0;   ///< (e_last / e_first)^(1/(count-1))
  double reported_rate = 0.0;  ///< geometric mean of the trailing <=5 ratios
  int ratios_used = 0;
};

/// Needs at least three positive error norms.
RateEstimate asymptotic_rate(const std::vector<double>& errors);

/// Q-orthogonal projector onto the range of the prolongation,
/// S = P (P'QP)^{-1} P'Q, applied through a dense factorization of the
/// coarse Gram matrix. Intended for desk-scale levels (fine level <= 5).
class SmoothingProjectors {
 public:
  SmoothingProjectors(const SpMat& Q_fine, const GridHierarchy& grid, int fine_level);

  VecX low(const VecX& e) const;   ///< S e
  VecX high(const VecX& e) const;  ///< e - S e
  ErrorSplit split(const VecX& e) const;
  double energy_norm(const VecX& v) const;

 private:
  const SpMat Q_;
  SpMat P_;
  Eigen::LLT<Eigen::MatrixXd> gram_;
};

enum class SmoothingMethod {
  SteepestDescentExact,
  SteepestDescentLineSearch,
  GaussSeidel,
};

std::string to_string(SmoothingMethod m);

struct SmoothingTrace {
  std::vector<ErrorSplit> splits;  ///< per iteration, entry 0 = initial error
  double condition_estimate = 0.0;
};

/// Fixed model study: the Poisson problem on the 31x31 interior grid with
/// a smooth right-hand side, random initial error (seeded standard
/// normals), error split against the 15x15 coarse space.
SmoothingTrace run_smoothing_experiment(int iterations, SmoothingMethod method,
                                        std::uint64_t seed);

}  // namespace mgopt
