#pragma once

#include "npeb/identification.hpp"
#include "npeb/models.hpp"
#include "npeb/solver.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace npeb {

// Callback counts by pattern (c_f, c_m) from a correspondence experiment.
struct CallbackData {
  int L = 4;            // applications sent per group
  IntMatrix counts;     // (L+1) x (L+1), indexed [c_f][c_m]
  std::int64_t n_jobs = 0;

  CountVector to_counts() const;  // flattened row-major, c_f major
  CallbackData transposed() const;
};

// CSV with header c_f,c_m,count and every pattern present exactly once.
CallbackData ingest_callback_csv(const std::filesystem::path& path);

enum class CallbackModel { kIndependent, kFrechet };
enum class Profile { kDesk, kFull };

struct DiscriminationConfig {
  CallbackModel model = CallbackModel::kFrechet;
  Grid1D grid;                    // shared grid for both groups
  FrechetSamplerConfig sampler;   // used by the Frechet model
  int threads = 1;
  SolveConfig solve;
  IdentificationConfig ident;
  std::uint64_t seed = 0;
};

// Shipped parameterizations: desk (25-point grids, k=25) runs in minutes;
// full (99-point grids, k=99) is the paper-scale configuration.
DiscriminationConfig make_profile(Profile profile, CallbackModel model, std::uint64_t seed);

struct PatternRow {
  int c_f = 0, c_m = 0;
  std::int64_t count = 0;
  double beta = 0.0;
  double fitted_p = 0.0;       // tau_i(pi_hat)
  double post_mean_f = 0.0;    // E[p_f | z]
  double post_mean_m = 0.0;    // E[p_m | z]
  double pr_f_greater = 0.0;   // Pr(p_f > p_m | z)
  double pr_equal = 0.0;       // Pr(p_f = p_m | z), exact grid-label equality
  double pr_f_less = 0.0;      // Pr(p_f < p_m | z)
};

struct DiscriminationReport {
  std::vector<PatternRow> rows;
  Index support_size = 0;
  double log_likelihood = 0.0;
  double kl = 0.0;
  double max_fit_gap = 0.0;    // max_i |fitted_p_i - beta_i|
  bool converged = false;
  bool support_bound_ok = true;
  Index Ibar = 0;
  std::vector<std::string> warnings;
  SolveResult solve;
  IdentificationReport ident;
};

// End-to-end pipeline: build the callback model, solve for the prior, audit
// identification, and assemble the per-pattern posterior table.
DiscriminationReport estimate_discrimination(const CallbackData& data,
                                             const DiscriminationConfig& cfg);

// Same pipeline on a prebuilt density matrix (used when the model comes from
// the binary cache). Type descriptors must carry p_f and p_m fields.
DiscriminationReport estimate_discrimination_with_model(const CallbackData& data,
                                                        const DensityMatrix& F,
                                                        const DiscriminationConfig& cfg);

struct IndependenceTestResult {
  double p_value = 1.0;
  double observed_log_prob = 0.0;  // multivariate hypergeometric log-probability
  std::int64_t n_sim = 0;
  std::int64_t n_at_most = 0;      // simulated tables with log-prob <= observed
  std::uint64_t seed = 0;
};

// Simulated Fisher exact test of independence, conditional on the margins:
// reference tables from the 2x2-switch Metropolis chain targeting the
// multivariate hypergeometric null; p = (1 + #{logP_sim <= logP_obs}) / (n_sim + 1).
IndependenceTestResult independence_test(const CallbackData& data, std::int64_t n_sim,
                                         std::uint64_t seed, std::int64_t burn_in = 10000,
                                         std::int64_t thin = 50);

// Hypergeometric log-probability of an integer table given its margins.
double hypergeometric_log_prob(const IntMatrix& table);

// Draws a table from the conditional independence null (margins fixed); used
// to calibrate the test on synthetic data. The chain starts at the rounded
// product-of-margins table.
IntMatrix sample_null_table(const IntMatrix& margins_of, std::uint64_t seed,
                            std::int64_t steps = 20000);

}  // namespace npeb
