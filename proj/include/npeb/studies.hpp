#pragma once

#include "npeb/models.hpp"
#include "npeb/solver.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace npeb {

// 1-D Wasserstein distance between discrete measures; metrizes weak
// convergence on compact sets and serves as the study's weak*-proxy.
double wasserstein_1d(const std::vector<double>& points_a, const std::vector<double>& weights_a,
                      const std::vector<double>& points_b, const std::vector<double>& weights_b);

struct GridStudyRow {
  Index grid_size = 0;
  double log_likelihood_normalized = 0.0;
  Index support_size = 0;
  double wasserstein_from_previous = 0.0;  // 0 for the first row
  bool support_bound_ok = true;
  bool converged = false;
};

struct NestedGridStudy {
  std::vector<GridStudyRow> rows;
  std::vector<SolveResult> results;
  Index Ibar = 0;
};

// Solves the same data on a chain of nested grids; reports the achieved
// likelihood sequence and successive Wasserstein steps. Grids must be nested
// (each coarse point present in the next grid within 1e-12).
NestedGridStudy nested_grid_study(const std::function<DensityMatrix(const Grid1D&)>& build,
                                  const std::vector<Grid1D>& grids, const CountVector& b,
                                  const SolveConfig& solve_cfg);

struct ConsistencyStudyConfig {
  std::vector<double> atom_locations;  // true mixing distribution
  std::vector<double> atom_weights;
  double kernel_sigma = 1.0;
  std::vector<Index> sample_sizes;
  int n_seeds = 5;
  std::uint64_t seed = 0;
  Grid1D type_grid;
  Index eval_points = 401;  // held-out evaluation grid resolution
  SolveConfig solve;

  void validate() const;
};

struct ConsistencyRow {
  Index sample_size = 0;
  int seed_index = 0;
  double kl_proxy = 0.0;  // density-weighted mean log-density gap, truth vs fit
  Index support_size = 0;
  bool converged = false;
};

struct ConsistencyStudy {
  std::vector<ConsistencyRow> rows;
  double trend_slope = 0.0;  // regression of kl_proxy on log10(sample size)
};

// Simulates from a known mixture at growing sample sizes, fits each sample,
// and records the KL proxy against the true sampling density.
ConsistencyStudy consistency_study(const ConsistencyStudyConfig& cfg);

}  // namespace npeb
