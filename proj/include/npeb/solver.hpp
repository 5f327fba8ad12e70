#pragma once

#include "npeb/mixture.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace npeb {

struct SolveConfig {
  double tol_fixed_point = 1e-10;      // sup-norm on h(pi) - pi
  std::int64_t max_iterations = 200000;
  double prune_threshold = 1e-6;       // mass below which a type is dropped
  std::int64_t prune_interval = 100;   // iterations between prune sweeps
  enum class Init { kUniform, kCustom } init = Init::kUniform;
  double tol_coherence = 1e-8;         // |d_j| on the support
  double tol_stability = 1e-8;         // signed d_j off the support
  std::int64_t trace_every = 1;        // cadence when a trace sink is attached

  void validate() const;
};

// Machine-checkable record of the KKT conditions at a candidate solution:
// coherence (d_j = 0 on the support) and stability (d_j <= 0 off it).
struct StabilityCertificate {
  double coherence_residual = 0.0;   // max_{j in support} |d_j|
  double stability_residual = 0.0;   // max_{j not in support} d_j; -inf if full support
  double tol_coherence = 0.0;
  double tol_stability = 0.0;
  bool pass = false;
};

struct TraceRow {
  std::int64_t iteration = 0;
  double log_likelihood_normalized = 0.0;
  double sup_residual = 0.0;
  Index support_size = 0;
};

struct SolveResult {
  Prior pi_hat;
  std::int64_t iterations = 0;
  double log_likelihood = 0.0;             // sum_i b_i log tau_i
  double log_likelihood_normalized = 0.0;  // divided by sum(b)
  double kl = 0.0;                         // D_KL(beta || tau(pi_hat))
  std::vector<Index> support;
  StabilityCertificate certificate;
  bool converged = false;
  // Types outside the support whose discrepancy sits within kFlatTol of zero;
  // a nonzero count signals a flat optimum (the NPMLE may be non-unique).
  Index flat_off_support_types = 0;
  std::vector<std::string> warnings;
};

// Discrepancy band used to flag a flat optimum.
inline constexpr double kFlatTol = 1e-6;

// Iterates the posterior operator from pi0 (uniform by default) with periodic
// support pruning until the fixed-point residual and the KKT certificate both
// hold, or the iteration budget runs out. Pruned types are re-admitted when
// the full-model stability check finds them violated.
SolveResult solve_fixed_point(const DensityMatrix& F, const CountVector& b,
                              const SolveConfig& cfg = {},
                              const std::optional<Prior>& pi0 = std::nullopt,
                              std::vector<TraceRow>* trace = nullptr);

// Pure recheck of the certificate at an arbitrary candidate prior; usable on
// third-party solutions.
StabilityCertificate verify_stability(const DensityMatrix& F, const FrequencyVector& beta,
                                      const Prior& pi, double tol_coherence,
                                      double tol_stability);

// Zeroes weights below threshold and renormalizes the rest.
Prior prune_support(const Prior& pi, double threshold);

}  // namespace npeb
