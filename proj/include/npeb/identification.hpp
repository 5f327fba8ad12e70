#pragma once

#include "npeb/mixture.hpp"
#include "npeb/solver.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace npeb {

// The collapsed-outcome model: zero-count outcomes are merged into one
// auxiliary row, F0_{0j} = 1 - sum_{i observed} F_ij.
struct CollapsedModel {
  std::vector<Index> observed_index_set;  // outcomes with b_i != 0, ascending
  Matrix F0;                              // (Ibar + 1) x J; row 0 is the collapsed row
  Index Ibar = 0;
  bool full_support = false;              // every outcome observed
};

enum class DataRegime { kFullSupportData, kBoundaryData };
enum class CheckMethod { kExhaustive, kRandomized, kSupportTargeted };

struct IdentificationReport {
  DataRegime regime = DataRegime::kFullSupportData;
  bool rank_ok = false;
  std::int64_t checked_subsets = 0;
  CheckMethod method = CheckMethod::kExhaustive;
  // Smallest ratio sigma_min/sigma_max seen across the checked submatrices.
  double min_singular_value_seen = 0.0;
  std::vector<std::string> warnings;
};

struct IdentificationConfig {
  std::int64_t exhaustive_cap = 100000;  // enumerate all subsets only below this count
  std::int64_t random_subsets = 200;
  double rank_rel_tol = 1e-10;           // sigma_min/sigma_max below this = rank deficient
  double near_singular_warn = 1e-6;      // warn (but do not fail) below this
};

CollapsedModel collapse(const DensityMatrix& F, const CountVector& b);

// Rank diagnostics for the discrete uniqueness condition. With boundary data
// the bordered columns (1, F_ij | i observed) are tested on s-subsets,
// s = min(J, Ibar + 1): exhaustively when feasible, otherwise on subsets
// drawn around the solved support plus a random audit. The report records
// what was actually checked.
IdentificationReport check_assumption_discrete(const DensityMatrix& F, const CountVector& b,
                                               const IdentificationConfig& cfg,
                                               std::uint64_t seed,
                                               const std::vector<Index>& support = {});

// Continuous-case analogue: bordered vectors (1, F_nj) tested on
// (N+1)-subsets; falls back to a full-rank check when N + 1 > J.
IdentificationReport check_assumption_continuous(const DensityMatrix& F,
                                                 const IdentificationConfig& cfg,
                                                 std::uint64_t seed);

// True iff |support(pi_hat)| <= Ibar. Vacuously true with full-support data
// (the bound only binds in the boundary regime).
bool support_bound_check(const SolveResult& result, const CollapsedModel& model);

struct BoundaryDiagnostic {
  double kl = 0.0;        // D_KL(beta || tau(pi_hat))
  double tol = 1e-9;
  bool outside_image = false;  // kl > tol certifies beta outside F(simplex)
};

BoundaryDiagnostic boundary_diagnostic(const FrequencyVector& beta, const DensityMatrix& F,
                                       const SolveResult& result);

}  // namespace npeb
