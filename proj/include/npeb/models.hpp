#pragma once

#include "npeb/mixture.hpp"

#include <cstdint>
#include <filesystem>
#include <variant>
#include <vector>

namespace npeb {

using IntMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

// Strictly increasing grid of type parameters.
struct Grid1D {
  std::vector<double> points;

  static Grid1D uniform(double lo, double hi, Index n);
  Index size() const { return static_cast<Index>(points.size()); }
  void validate(bool probability) const;
};

// A joint distribution over (row outcome, column outcome) with fixed binomial
// marginals, kept both in exact integer units and as normalized reals.
struct JointTable {
  Matrix cells;            // normalized, sums to 1
  Vector row_marginal;     // M-unit-rounded, renormalized targets
  Vector col_marginal;
  IntMatrix units;         // exact integer representation; margins hold exactly
  std::int64_t mass_units = 0;

  void validate() const;   // margins within 1e-9 of targets
};

struct FrechetSamplerConfig {
  std::int64_t mass_units = 10000;  // M: probability discretized into M units
  std::int64_t burn_in = 200000;
  std::int64_t thin = 20000;
  std::int64_t samples_per_pair = 25;  // k draws from one chain after burn-in
  std::uint64_t seed = 0;

  void validate(Index table_cells) const;
};

double binomial_pmf(int trials, double p, int successes);

// pmf of Binomial(trials, p) over 0..trials.
Vector binomial_pmf_vector(int trials, double p);

// Vectorized outer product of two binomial pmfs over (c_a, c_b), flattened
// with c_a major: index = c_a * (L+1) + c_b.
Vector independent_bivariate_column(int L, double p_a, double p_b);

// Rounds a pmf to integer units totalling exactly M (largest remainder).
// Throws when any cell rounds to zero.
std::vector<std::int64_t> round_pmf_to_units(const Vector& pmf, std::int64_t M);

// Samples k joint tables with the given marginals by a 2x2 switch-move chain
// on integer tables, started at the rounded independence table. Row/column
// sums match the rounded marginals exactly in integer units on every step.
std::vector<JointTable> frechet_sample_tables(const Vector& row_pmf, const Vector& col_pmf,
                                              const FrechetSamplerConfig& cfg);

// Model specs for build_F_discrete.
struct BernoulliGkModel {
  int shots = 1;
  Grid1D grid;  // save probabilities
};

struct IndependentBivariateModel {
  int trials = 4;
  Grid1D grid;  // shared grid for both groups
};

struct FrechetBivariateModel {
  int trials = 4;
  Grid1D grid;
  FrechetSamplerConfig sampler;
  int threads = 1;
};

using DiscreteModelSpec =
    std::variant<BernoulliGkModel, IndependentBivariateModel, FrechetBivariateModel>;

DensityMatrix build_F_discrete(const DiscreteModelSpec& spec);

struct GaussianLocationKernel {
  double sigma = 1.0;
};

// N x J matrix of density evaluations p(x_n | t_j); counts are one per
// observation in the continuous case.
DensityMatrix build_F_continuous(const Vector& observations, const GaussianLocationKernel& kernel,
                                 const Grid1D& type_grid);

// Binary cache for expensive density matrices: fixed header, little-endian
// 64-bit floats, row-major entries, followed by the per-type label fields.
void save_density_matrix(const std::filesystem::path& path, const DensityMatrix& F);
DensityMatrix load_density_matrix(const std::filesystem::path& path);

}  // namespace npeb
