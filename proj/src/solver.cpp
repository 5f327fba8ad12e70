#include "npeb/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_set>

namespace npeb {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Gathers the active columns of F into a dense matrix so that the iteration
// touches only surviving types.
Matrix gather_columns(const Matrix& F, const std::vector<Index>& active) {
  Matrix out(F.rows(), static_cast<Index>(active.size()));
  for (Index k = 0; k < out.cols(); ++k) out.col(k) = F.col(active[static_cast<std::size_t>(k)]);
  return out;
}

struct FullCheck {
  StabilityCertificate certificate;
  std::vector<Index> violators;  // off-support types with d_j > tol_stability margin
  Index flat_count = 0;
};

FullCheck full_model_check(const Matrix& F, const Vector& beta, const Vector& pi_full,
                           double tol_c, double tol_s) {
  const Index I = F.rows();
  const Index J = F.cols();
  Vector tau = F * pi_full;
  Vector w(I);
  for (Index i = 0; i < I; ++i) w[i] = beta[i] == 0.0 ? 0.0 : beta[i] / tau[i];
  const Vector d = (F.transpose() * w).array() - 1.0;

  FullCheck out;
  double coh = 0.0;
  double stab = -kInf;
  for (Index j = 0; j < J; ++j) {
    if (pi_full[j] > 0.0) {
      coh = std::max(coh, std::abs(d[j]));
    } else {
      stab = std::max(stab, d[j]);
      if (d[j] > 2.0 * tol_s) out.violators.push_back(j);
      if (d[j] > -kFlatTol) ++out.flat_count;
    }
  }
  out.certificate.coherence_residual = coh;
  out.certificate.stability_residual = stab;
  out.certificate.tol_coherence = tol_c;
  out.certificate.tol_stability = tol_s;
  out.certificate.pass = coh <= tol_c && stab <= tol_s;
  return out;
}

}  // namespace

void SolveConfig::validate() const {
  if (!(tol_fixed_point > 0.0)) throw std::invalid_argument("SolveConfig: tol_fixed_point <= 0");
  if (max_iterations < 1) throw std::invalid_argument("SolveConfig: max_iterations < 1");
  if (!(prune_threshold > 0.0 && prune_threshold <= 1e-3)) {
    throw std::invalid_argument("SolveConfig: prune_threshold outside (0, 1e-3]");
  }
  if (prune_interval < 1) throw std::invalid_argument("SolveConfig: prune_interval < 1");
  if (!(tol_coherence > 0.0) || !(tol_stability > 0.0)) {
    throw std::invalid_argument("SolveConfig: certificate tolerances must be positive");
  }
  if (trace_every < 1) throw std::invalid_argument("SolveConfig: trace_every < 1");
}

StabilityCertificate verify_stability(const DensityMatrix& F, const FrequencyVector& beta,
                                      const Prior& pi, double tol_coherence,
                                      double tol_stability) {
  if (F.types() != pi.size() || F.outcomes() != beta.size()) {
    throw std::invalid_argument("verify_stability: dimension mismatch");
  }
  return full_model_check(F.entries(), beta.values(), pi.weights(), tol_coherence, tol_stability)
      .certificate;
}

Prior prune_support(const Prior& pi, double threshold) {
  if (!(threshold > 0.0 && threshold <= 1e-3)) {
    throw std::invalid_argument("prune_support: threshold outside (0, 1e-3]");
  }
  Vector w = pi.weights();
  double kept = 0.0;
  for (Index j = 0; j < w.size(); ++j) {
    if (w[j] < threshold) {
      w[j] = 0.0;
    } else {
      kept += w[j];
    }
  }
  if (kept == 0.0) throw std::domain_error("prune_support: every weight falls below threshold");
  w /= kept;
  return Prior(std::move(w));
}

SolveResult solve_fixed_point(const DensityMatrix& F, const CountVector& b,
                              const SolveConfig& cfg, const std::optional<Prior>& pi0,
                              std::vector<TraceRow>* trace) {
  cfg.validate();
  if (F.outcomes() != b.size()) throw std::invalid_argument("solve_fixed_point: dimension mismatch");
  const Index I = F.outcomes();
  const Index J = F.types();
  const FrequencyVector beta_v = normalize_counts(b);
  const Vector& beta = beta_v.values();
  const Matrix& Ffull = F.entries();

  Vector pi_full(J);
  if (pi0.has_value()) {
    if (pi0->size() != J) throw std::invalid_argument("solve_fixed_point: pi0 size mismatch");
    pi_full = pi0->weights();
  } else {
    pi_full.setConstant(1.0 / static_cast<double>(J));
  }

  std::vector<Index> active;
  active.reserve(static_cast<std::size_t>(J));
  for (Index j = 0; j < J; ++j) {
    if (pi_full[j] > 0.0) active.push_back(j);
  }
  if (active.empty()) throw std::invalid_argument("solve_fixed_point: pi0 has empty support");

  Matrix Fa = gather_columns(Ffull, active);
  Vector pa(static_cast<Index>(active.size()));
  for (Index k = 0; k < pa.size(); ++k) pa[k] = pi_full[active[static_cast<std::size_t>(k)]];
  pa /= pa.sum();

  const double total = static_cast<double>(b.total());
  Vector tau(I), w(I);
  std::int64_t it = 0;
  bool residual_ok = false;
  int revivals = 0;
  constexpr int kMaxRevivals = 8;
  std::unordered_set<Index> revived_before;
  SolveResult result;

  auto record = [&](double lnorm, double res) {
    if (trace != nullptr && (it % cfg.trace_every == 0)) {
      trace->push_back(TraceRow{it, lnorm, res, static_cast<Index>(active.size())});
    }
  };

  auto prune_active = [&]() {
    const Index n = pa.size();
    std::vector<Index> keep;
    keep.reserve(static_cast<std::size_t>(n));
    double kept_mass = 0.0;
    for (Index k = 0; k < n; ++k) {
      if (pa[k] >= cfg.prune_threshold) {
        keep.push_back(k);
        kept_mass += pa[k];
      }
    }
    if (keep.empty() || static_cast<Index>(keep.size()) == n) return;
    std::vector<Index> new_active;
    new_active.reserve(keep.size());
    Vector new_pa(static_cast<Index>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k) {
      new_active.push_back(active[static_cast<std::size_t>(keep[k])]);
      new_pa[static_cast<Index>(k)] = pa[keep[k]] / kept_mass;
    }
    active.swap(new_active);
    pa.swap(new_pa);
    Fa = gather_columns(Ffull, active);
  };

  while (it < cfg.max_iterations) {
    bool candidate = false;
    // Inner loop: iterate the posterior operator on the active set until the
    // fixed-point residual and the on-support coherence residual both hold.
    while (it < cfg.max_iterations) {
      tau.noalias() = Fa * pa;
      for (Index i = 0; i < I; ++i) w[i] = beta[i] == 0.0 ? 0.0 : beta[i] / tau[i];
      Vector g = Fa.transpose() * w;  // g_j = d_j + 1 on the active set

      double lnorm = 0.0;
      const bool want_l = trace != nullptr;
      if (want_l) {
        for (Index i = 0; i < I; ++i) {
          if (beta[i] > 0.0) lnorm += beta[i] * std::log(tau[i]);
        }
      }

      Vector h = pa.cwiseProduct(g);
      h /= h.sum();
      const double res = (h - pa).lpNorm<Eigen::Infinity>();
      double coh = 0.0;
      for (Index k = 0; k < g.size(); ++k) coh = std::max(coh, std::abs(g[k] - 1.0));
      record(lnorm, res);
      pa.swap(h);
      ++it;

      if (res <= cfg.tol_fixed_point && coh <= cfg.tol_coherence) {
        residual_ok = true;
        candidate = true;
        break;
      }
      if (it % cfg.prune_interval == 0) prune_active();
    }
    if (!candidate) break;

    // Full-model stability check over pruned types; re-admit violators.
    pi_full.setZero();
    for (std::size_t k = 0; k < active.size(); ++k) pi_full[active[k]] = pa[static_cast<Index>(k)];
    const FullCheck check =
        full_model_check(Ffull, beta, pi_full, cfg.tol_coherence, cfg.tol_stability);
    if (check.certificate.pass) break;

    std::vector<Index> to_revive;
    for (const Index j : check.violators) {
      if (revived_before.insert(j).second) to_revive.push_back(j);
    }
    if (to_revive.empty() || revivals >= kMaxRevivals || it >= cfg.max_iterations) {
      residual_ok = false;  // certificate cannot be met within the budget
      break;
    }
    ++revivals;
    const double eps = std::max(cfg.prune_threshold * 10.0, 1e-5);
    const double added = eps * static_cast<double>(to_revive.size());
    pa *= (1.0 - added);
    for (const Index j : to_revive) active.push_back(j);
    Vector grown(static_cast<Index>(active.size()));
    grown.head(pa.size()) = pa;
    grown.tail(static_cast<Index>(to_revive.size())).setConstant(eps);
    pa.swap(grown);
    pa /= pa.sum();
    Fa = gather_columns(Ffull, active);
    residual_ok = false;
  }

  pi_full.setZero();
  for (std::size_t k = 0; k < active.size(); ++k) pi_full[active[k]] = pa[static_cast<Index>(k)];
  const FullCheck final_check =
      full_model_check(Ffull, beta, pi_full, cfg.tol_coherence, cfg.tol_stability);

  result.pi_hat = Prior(pi_full);
  result.iterations = it;
  result.support = result.pi_hat.support();
  result.certificate = final_check.certificate;
  result.converged = residual_ok && final_check.certificate.pass;
  result.flat_off_support_types = final_check.flat_count;

  const Vector tau_full = Ffull * pi_full;
  double L = 0.0;
  for (Index i = 0; i < I; ++i) {
    if (b[i] > 0) L += static_cast<double>(b[i]) * std::log(tau_full[i]);
  }
  result.log_likelihood = L;
  result.log_likelihood_normalized = L / total;
  result.kl = kl_divergence(beta_v, tau_full);

  if (!result.converged) {
    result.warnings.push_back("solver did not certify convergence within the iteration budget");
  }
  if (result.flat_off_support_types > 0) {
    result.warnings.push_back(
        "flat optimum: " + std::to_string(result.flat_off_support_types) +
        " off-support type(s) have discrepancy within " + std::to_string(kFlatTol) +
        " of zero; the maximizer may be non-unique");
  }
  return result;
}

}  // namespace npeb
