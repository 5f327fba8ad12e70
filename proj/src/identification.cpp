#include "npeb/identification.hpp"

#include "npeb/rng.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace npeb {

namespace {

// sigma_min / sigma_max of a dense matrix; 0 for structurally deficient shapes.
double relative_min_singular_value(const Matrix& m, Index wanted_rank) {
  if (std::min(m.rows(), m.cols()) < wanted_rank) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  const auto& sv = svd.singularValues();
  const double smax = sv[0];
  if (!(smax > 0.0)) return 0.0;
  return sv[wanted_rank - 1] / smax;
}

// C(n, k) saturating at cap+1 to avoid overflow.
std::int64_t binomial_count_capped(Index n, Index k, std::int64_t cap) {
  if (k < 0 || k > n) return 0;
  long double acc = 1.0L;
  for (Index i = 0; i < k; ++i) {
    acc *= static_cast<long double>(n - i) / static_cast<long double>(i + 1);
    if (acc > static_cast<long double>(cap) * 2.0L) return cap + 1;
  }
  return static_cast<std::int64_t>(acc + 0.5L);
}

// Distinct random s-subset of {0, ..., n-1}, sorted.
std::vector<Index> random_subset(Rng& rng, Index n, Index s) {
  std::unordered_set<Index> chosen;
  // Floyd's algorithm.
  for (Index j = n - s; j < n; ++j) {
    const Index t = static_cast<Index>(rng.uniform_below(static_cast<std::uint64_t>(j) + 1));
    if (!chosen.insert(t).second) chosen.insert(j);
  }
  std::vector<Index> out(chosen.begin(), chosen.end());
  std::sort(out.begin(), out.end());
  return out;
}

struct SubsetAudit {
  bool rank_ok = true;
  std::int64_t checked = 0;
  double min_rel_sv = std::numeric_limits<double>::infinity();
  std::vector<std::string> warnings;
};

void check_one_subset(const Matrix& bordered, const std::vector<Index>& subset,
                      const IdentificationConfig& cfg, SubsetAudit& audit) {
  Matrix sub(bordered.rows(), static_cast<Index>(subset.size()));
  for (Index k = 0; k < sub.cols(); ++k) sub.col(k) = bordered.col(subset[static_cast<std::size_t>(k)]);
  const double rel = relative_min_singular_value(sub, sub.cols());
  audit.min_rel_sv = std::min(audit.min_rel_sv, rel);
  ++audit.checked;
  if (rel <= cfg.rank_rel_tol) {
    if (audit.rank_ok) {
      std::ostringstream os;
      os << "rank-deficient subset found (relative min singular value " << rel << ")";
      audit.warnings.push_back(os.str());
    }
    audit.rank_ok = false;
  } else if (rel < cfg.near_singular_warn && audit.warnings.size() < 8) {
    std::ostringstream os;
    os << "near-singular subset: relative min singular value " << rel;
    audit.warnings.push_back(os.str());
  }
}

// Enumerates all s-subsets of {0..n-1} in lexicographic order.
template <typename Fn>
void for_each_subset(Index n, Index s, Fn&& fn) {
  std::vector<Index> idx(static_cast<std::size_t>(s));
  for (Index k = 0; k < s; ++k) idx[static_cast<std::size_t>(k)] = k;
  for (;;) {
    fn(idx);
    Index k = s - 1;
    while (k >= 0 && idx[static_cast<std::size_t>(k)] == n - s + k) --k;
    if (k < 0) break;
    ++idx[static_cast<std::size_t>(k)];
    for (Index m = k + 1; m < s; ++m) {
      idx[static_cast<std::size_t>(m)] = idx[static_cast<std::size_t>(m - 1)] + 1;
    }
  }
}

}  // namespace

CollapsedModel collapse(const DensityMatrix& F, const CountVector& b) {
  if (F.outcomes() != b.size()) throw std::invalid_argument("collapse: dimension mismatch");
  CollapsedModel model;
  for (Index i = 0; i < b.size(); ++i) {
    if (b[i] != 0) model.observed_index_set.push_back(i);
  }
  model.Ibar = static_cast<Index>(model.observed_index_set.size());
  model.full_support = model.Ibar == F.outcomes();

  model.F0.resize(model.Ibar + 1, F.types());
  for (Index k = 0; k < model.Ibar; ++k) {
    model.F0.row(k + 1) = F.entries().row(model.observed_index_set[static_cast<std::size_t>(k)]);
  }
  model.F0.row(0) = Vector::Ones(F.types()).transpose() -
                    model.F0.bottomRows(model.Ibar).colwise().sum();
  return model;
}

IdentificationReport check_assumption_discrete(const DensityMatrix& F, const CountVector& b,
                                               const IdentificationConfig& cfg,
                                               std::uint64_t seed,
                                               const std::vector<Index>& support) {
  IdentificationReport report;
  const CollapsedModel model = collapse(F, b);
  const Index J = F.types();

  if (model.full_support) {
    report.regime = DataRegime::kFullSupportData;
    report.method = CheckMethod::kExhaustive;
    report.checked_subsets = 1;
    if (J > F.outcomes()) {
      report.rank_ok = false;
      report.min_singular_value_seen = 0.0;
      std::ostringstream os;
      os << "more types than outcomes (J = " << J << " > I = " << F.outcomes()
         << "): the full-rank condition cannot hold";
      report.warnings.push_back(os.str());
      return report;
    }
    const double rel = relative_min_singular_value(F.entries(), J);
    report.min_singular_value_seen = rel;
    report.rank_ok = rel > cfg.rank_rel_tol;
    if (!report.rank_ok) {
      report.warnings.push_back("density matrix is rank deficient across the full type set");
    } else if (rel < cfg.near_singular_warn) {
      std::ostringstream os;
      os << "density matrix nearly rank deficient: relative min singular value " << rel;
      report.warnings.push_back(os.str());
    }
    return report;
  }

  report.regime = DataRegime::kBoundaryData;
  const Index s = std::min(J, model.Ibar + 1);

  // Bordered columns (1, F_ij | i observed).
  Matrix bordered(model.Ibar + 1, J);
  bordered.row(0).setOnes();
  bordered.bottomRows(model.Ibar) = model.F0.bottomRows(model.Ibar);

  SubsetAudit audit;
  const std::int64_t n_subsets = binomial_count_capped(J, s, cfg.exhaustive_cap);
  if (n_subsets <= cfg.exhaustive_cap) {
    report.method = CheckMethod::kExhaustive;
    for_each_subset(J, s, [&](const std::vector<Index>& idx) { check_one_subset(bordered, idx, cfg, audit); });
  } else {
    Rng rng(derive_seed(seed, 0xa11d17));
    std::vector<Index> clean_support;
    for (const Index j : support) {
      if (j >= 0 && j < J) clean_support.push_back(j);
    }
    std::sort(clean_support.begin(), clean_support.end());
    clean_support.erase(std::unique(clean_support.begin(), clean_support.end()),
                        clean_support.end());
    if (!clean_support.empty()) {
      report.method = CheckMethod::kSupportTargeted;
      const Index sup_n = static_cast<Index>(clean_support.size());
      if (sup_n >= s) {
        // All (or a sample of) s-subsets drawn from the solved support.
        const std::int64_t within = binomial_count_capped(sup_n, s, cfg.exhaustive_cap);
        if (within <= cfg.exhaustive_cap) {
          for_each_subset(sup_n, s, [&](const std::vector<Index>& idx) {
            std::vector<Index> mapped(idx.size());
            for (std::size_t k = 0; k < idx.size(); ++k) {
              mapped[k] = clean_support[static_cast<std::size_t>(idx[k])];
            }
            check_one_subset(bordered, mapped, cfg, audit);
          });
        } else {
          for (std::int64_t r = 0; r < cfg.random_subsets; ++r) {
            const std::vector<Index> pick = random_subset(rng, sup_n, s);
            std::vector<Index> mapped(pick.size());
            for (std::size_t k = 0; k < pick.size(); ++k) {
              mapped[k] = clean_support[static_cast<std::size_t>(pick[k])];
            }
            check_one_subset(bordered, mapped, cfg, audit);
          }
        }
      } else {
        // Support plus random completions.
        std::unordered_set<Index> in_support(clean_support.begin(), clean_support.end());
        for (std::int64_t r = 0; r < cfg.random_subsets; ++r) {
          std::vector<Index> subset = clean_support;
          while (static_cast<Index>(subset.size()) < s) {
            const Index cand = static_cast<Index>(rng.uniform_below(static_cast<std::uint64_t>(J)));
            if (in_support.count(cand) == 0 &&
                std::find(subset.begin(), subset.end(), cand) == subset.end()) {
              subset.push_back(cand);
            }
          }
          std::sort(subset.begin(), subset.end());
          check_one_subset(bordered, subset, cfg, audit);
        }
      }
    } else {
      report.method = CheckMethod::kRandomized;
    }
    // Random audit on top of whatever ran above.
    for (std::int64_t r = 0; r < cfg.random_subsets; ++r) {
      check_one_subset(bordered, random_subset(rng, J, s), cfg, audit);
    }
    std::ostringstream os;
    os << "audit covered " << audit.checked << " of an infeasible number of " << s
       << "-subsets; uniqueness is not exhaustively certified";
    audit.warnings.push_back(os.str());
  }

  report.rank_ok = audit.rank_ok;
  report.checked_subsets = audit.checked;
  report.min_singular_value_seen =
      std::isfinite(audit.min_rel_sv) ? audit.min_rel_sv : 0.0;
  report.warnings.insert(report.warnings.end(), audit.warnings.begin(), audit.warnings.end());
  return report;
}

IdentificationReport check_assumption_continuous(const DensityMatrix& F,
                                                 const IdentificationConfig& cfg,
                                                 std::uint64_t seed) {
  IdentificationReport report;
  report.regime = DataRegime::kBoundaryData;
  const Index N = F.outcomes();
  const Index J = F.types();

  Matrix bordered(N + 1, J);
  bordered.row(0).setOnes();
  bordered.bottomRows(N) = F.entries();

  if (N + 1 > J) {
    // Fewer columns than the subset size: check full column rank of the
    // bordered matrix instead.
    report.method = CheckMethod::kExhaustive;
    report.checked_subsets = 1;
    const double rel = relative_min_singular_value(bordered, J);
    report.min_singular_value_seen = rel;
    report.rank_ok = rel > cfg.rank_rel_tol;
    if (!report.rank_ok) report.warnings.push_back("bordered density matrix is rank deficient");
    return report;
  }

  const Index s = N + 1;
  SubsetAudit audit;
  const std::int64_t n_subsets = binomial_count_capped(J, s, cfg.exhaustive_cap);
  if (n_subsets <= cfg.exhaustive_cap) {
    report.method = CheckMethod::kExhaustive;
    for_each_subset(J, s, [&](const std::vector<Index>& idx) { check_one_subset(bordered, idx, cfg, audit); });
  } else {
    report.method = CheckMethod::kRandomized;
    Rng rng(derive_seed(seed, 0xc027));
    for (std::int64_t r = 0; r < cfg.random_subsets; ++r) {
      check_one_subset(bordered, random_subset(rng, J, s), cfg, audit);
    }
    std::ostringstream os;
    os << "audit covered " << audit.checked << " of an infeasible number of " << s
       << "-subsets; uniqueness is not exhaustively certified";
    audit.warnings.push_back(os.str());
  }

  report.rank_ok = audit.rank_ok;
  report.checked_subsets = audit.checked;
  report.min_singular_value_seen = std::isfinite(audit.min_rel_sv) ? audit.min_rel_sv : 0.0;
  report.warnings.insert(report.warnings.end(), audit.warnings.begin(), audit.warnings.end());
  return report;
}

bool support_bound_check(const SolveResult& result, const CollapsedModel& model) {
  if (model.full_support) return true;  // regime guard: bound does not bind
  return static_cast<Index>(result.support.size()) <= model.Ibar;
}

BoundaryDiagnostic boundary_diagnostic(const FrequencyVector& beta, const DensityMatrix& F,
                                       const SolveResult& result) {
  BoundaryDiagnostic diag;
  const Vector tau = mixture_marginal(F, result.pi_hat);
  diag.kl = kl_divergence(beta, tau);
  diag.outside_image = diag.kl > diag.tol;
  return diag;
}

}  // namespace npeb
