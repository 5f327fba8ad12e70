#include "npeb/mixture.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace npeb {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

DensityMatrix::DensityMatrix(Matrix entries, DensityKind kind,
                             std::vector<std::string> outcome_labels,
                             TypeDescriptors type_descriptors)
    : entries_(std::move(entries)),
      kind_(kind),
      outcome_labels_(std::move(outcome_labels)),
      type_descriptors_(std::move(type_descriptors)) {
  require(entries_.rows() >= 1 && entries_.cols() >= 1, "DensityMatrix: empty matrix");
  if (!outcome_labels_.empty()) {
    require(static_cast<Index>(outcome_labels_.size()) == entries_.rows(),
            "DensityMatrix: outcome label count does not match rows");
  }
  if (!type_descriptors_.empty()) {
    require(type_descriptors_.values.rows() ==
                    static_cast<Index>(type_descriptors_.fields.size()) &&
                type_descriptors_.values.cols() == entries_.cols(),
            "DensityMatrix: type descriptor shape does not match columns");
  }
  for (Index j = 0; j < entries_.cols(); ++j) {
    for (Index i = 0; i < entries_.rows(); ++i) {
      const double v = entries_(i, j);
      if (!(v > kEntryFloor) || !std::isfinite(v)) {
        std::ostringstream os;
        os << "DensityMatrix: entry (" << i << "," << j << ") = " << v
           << " violates strict positivity";
        throw std::invalid_argument(os.str());
      }
    }
    if (kind_ == DensityKind::kDiscrete) {
      const double colsum = entries_.col(j).sum();
      if (colsum > 1.0 + kSimplexTol) {
        std::ostringstream os;
        os << "DensityMatrix: discrete column " << j << " sums to " << colsum << " > 1";
        throw std::invalid_argument(os.str());
      }
    }
  }
}

DensityMatrix DensityMatrix::discrete(Matrix entries, std::vector<std::string> outcome_labels,
                                      TypeDescriptors type_descriptors) {
  return DensityMatrix(std::move(entries), DensityKind::kDiscrete, std::move(outcome_labels),
                       std::move(type_descriptors));
}

DensityMatrix DensityMatrix::continuous(Matrix entries, std::vector<std::string> outcome_labels,
                                        TypeDescriptors type_descriptors) {
  return DensityMatrix(std::move(entries), DensityKind::kContinuous, std::move(outcome_labels),
                       std::move(type_descriptors));
}

CountVector::CountVector(std::vector<std::int64_t> counts) : counts_(std::move(counts)) {
  require(!counts_.empty(), "CountVector: empty");
  for (const auto c : counts_) {
    require(c >= 0, "CountVector: negative count");
    total_ += c;
  }
  require(total_ >= 1, "CountVector: all counts are zero");
}

FrequencyVector::FrequencyVector(Vector freqs) : freqs_(std::move(freqs)) {
  require(freqs_.size() >= 1, "FrequencyVector: empty");
  double sum = 0.0;
  for (Index i = 0; i < freqs_.size(); ++i) {
    require(freqs_[i] >= 0.0 && std::isfinite(freqs_[i]), "FrequencyVector: negative entry");
    sum += freqs_[i];
  }
  require(std::abs(sum - 1.0) <= kSimplexTol, "FrequencyVector: does not sum to 1");
}

Prior::Prior(Vector weights) : weights_(std::move(weights)) {
  require(weights_.size() >= 1, "Prior: empty");
  double sum = 0.0;
  for (Index j = 0; j < weights_.size(); ++j) {
    require(weights_[j] >= 0.0 && std::isfinite(weights_[j]), "Prior: negative weight");
    sum += weights_[j];
  }
  require(std::abs(sum - 1.0) <= kSimplexTol, "Prior: weights do not sum to 1");
}

Prior Prior::uniform(Index n_types) {
  require(n_types >= 1, "Prior::uniform: need at least one type");
  return Prior(Vector::Constant(n_types, 1.0 / static_cast<double>(n_types)));
}

Prior Prior::vertex(Index n_types, Index at) {
  require(at >= 0 && at < n_types, "Prior::vertex: index out of range");
  Vector w = Vector::Zero(n_types);
  w[at] = 1.0;
  return Prior(std::move(w));
}

std::vector<Index> Prior::support() const {
  std::vector<Index> s;
  for (Index j = 0; j < weights_.size(); ++j) {
    if (weights_[j] > 0.0) s.push_back(j);
  }
  return s;
}

FrequencyVector normalize_counts(const CountVector& b) {
  const double total = static_cast<double>(b.total());
  Vector f(b.size());
  for (Index i = 0; i < b.size(); ++i) {
    f[i] = b[i] == 0 ? 0.0 : static_cast<double>(b[i]) / total;
  }
  // Exact zeros where counts are zero; tiny drift in the sum is repaired on
  // the largest entry so the simplex invariant holds bit-for-bit.
  const double drift = f.sum() - 1.0;
  if (drift != 0.0) {
    Index imax = 0;
    f.maxCoeff(&imax);
    f[imax] -= drift;
  }
  return FrequencyVector(std::move(f));
}

Vector mixture_marginal(const DensityMatrix& F, const Prior& pi) {
  if (F.types() != pi.size()) {
    throw std::invalid_argument("mixture_marginal: dimension mismatch");
  }
  return F.entries() * pi.weights();
}

PosteriorMatrix posterior_matrix(const DensityMatrix& F, const Prior& pi) {
  const Vector tau = mixture_marginal(F, pi);
  for (Index i = 0; i < tau.size(); ++i) {
    if (!(tau[i] > 0.0)) {
      throw std::domain_error("posterior_matrix: zero mixture marginal at an outcome");
    }
  }
  Matrix h = F.entries();
  for (Index j = 0; j < h.cols(); ++j) h.col(j) *= pi[j];
  for (Index i = 0; i < h.rows(); ++i) h.row(i) /= tau[i];
  return PosteriorMatrix{std::move(h)};
}

Prior bayes_update(const DensityMatrix& F, const FrequencyVector& beta, const Prior& pi) {
  if (F.types() != pi.size() || F.outcomes() != beta.size()) {
    throw std::invalid_argument("bayes_update: dimension mismatch");
  }
  const Vector tau = F.entries() * pi.weights();
  Vector w(tau.size());
  for (Index i = 0; i < tau.size(); ++i) {
    if (beta[i] == 0.0) {
      w[i] = 0.0;
      continue;
    }
    if (!(tau[i] > 0.0)) {
      throw std::domain_error("bayes_update: zero mixture marginal on an observed outcome");
    }
    w[i] = beta[i] / tau[i];
  }
  Vector h = pi.weights().cwiseProduct(F.entries().transpose() * w);
  // Analytically sums to 1; divide out the numerical drift. Zeros stay exact.
  h /= h.sum();
  return Prior(std::move(h));
}

Vector discrepancy(const DensityMatrix& F, const FrequencyVector& beta, const Prior& pi) {
  if (F.types() != pi.size() || F.outcomes() != beta.size()) {
    throw std::invalid_argument("discrepancy: dimension mismatch");
  }
  const Vector tau = F.entries() * pi.weights();
  Vector w(tau.size());
  for (Index i = 0; i < tau.size(); ++i) {
    if (beta[i] == 0.0) {
      w[i] = 0.0;
      continue;
    }
    if (!(tau[i] > 0.0)) {
      throw std::domain_error("discrepancy: zero mixture marginal on an observed outcome");
    }
    w[i] = beta[i] / tau[i];
  }
  return (F.entries().transpose() * w).array() - 1.0;
}

double log_likelihood(const DensityMatrix& F, const CountVector& b, const Prior& pi) {
  if (F.types() != pi.size() || F.outcomes() != b.size()) {
    throw std::invalid_argument("log_likelihood: dimension mismatch");
  }
  const Vector tau = F.entries() * pi.weights();
  double L = 0.0;
  for (Index i = 0; i < tau.size(); ++i) {
    if (b[i] == 0) continue;
    if (!(tau[i] > 0.0)) return -std::numeric_limits<double>::infinity();
    L += static_cast<double>(b[i]) * std::log(tau[i]);
  }
  return L;
}

double normalized_log_likelihood(const DensityMatrix& F, const CountVector& b, const Prior& pi) {
  return log_likelihood(F, b, pi) / static_cast<double>(b.total());
}

double kl_divergence(const FrequencyVector& beta, const Vector& tau) {
  if (beta.size() != tau.size()) {
    throw std::invalid_argument("kl_divergence: dimension mismatch");
  }
  double kl = 0.0;
  for (Index i = 0; i < beta.size(); ++i) {
    if (tau[i] < 0.0) throw std::invalid_argument("kl_divergence: negative tau entry");
    if (beta[i] == 0.0) continue;  // 0 ln 0 = 0
    if (tau[i] == 0.0) return std::numeric_limits<double>::infinity();
    kl += beta[i] * std::log(beta[i] / tau[i]);
  }
  return kl;
}

}  // namespace npeb
