#pragma once

// Brute-force reference implementations used only by the test suites. These
// deliberately avoid the library's solver path: likelihoods and operator
// values are recomputed with plain loops over the matrix entries.

#include "npeb/mixture.hpp"
#include "npeb/models.hpp"

#include <cstdint>
#include <vector>

namespace npeb::oracle {

struct GridSearchResult {
  Vector argmax;                          // best lattice point
  double max_log_likelihood_normalized = 0.0;
  double step = 0.0;
};

// Exhaustive evaluation of the normalized log-likelihood on the step-lattice
// of the simplex. J <= 4 only.
GridSearchResult grid_search_simplex(const DensityMatrix& F, const CountVector& b, double step);

struct FixedPointEnumeration {
  std::vector<Vector> fixed_points;  // each satisfies ||h(pi) - pi||_inf <= tol
  bool continuum = false;            // every edge point fixed (degenerate F)
};

// Both vertices plus interior roots of d_1 along the J = 2 edge, found by
// sign scan and bisection.
FixedPointEnumeration enumerate_fixed_points_j2(const DensityMatrix& F, const CountVector& b,
                                                double tol);

// All nonnegative integer tables with the given margins (both must total the
// same mass). Throws if the enumeration would exceed cap.
std::vector<IntMatrix> enumerate_frechet_tables(const std::vector<std::int64_t>& row_units,
                                                const std::vector<std::int64_t>& col_units,
                                                std::int64_t cap = 1000000);

// Direct evaluations used as independent checks of the mixture core.
double direct_normalized_log_likelihood(const DensityMatrix& F, const CountVector& b,
                                        const Vector& pi);
Vector direct_bayes_update(const DensityMatrix& F, const Vector& beta, const Vector& pi);
Vector direct_discrepancy(const DensityMatrix& F, const Vector& beta, const Vector& pi);

// Upper 0.99 quantile of chi-square with dof degrees of freedom
// (Wilson-Hilferty approximation).
double chi2_q99(double dof);

}  // namespace npeb::oracle
