#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

namespace npeb {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Smallest admissible density entry; anything below is treated as a violation
// of the strict-positivity assumption on F.
inline constexpr double kEntryFloor = 1e-300;
inline constexpr double kSimplexTol = 1e-12;

enum class DensityKind { kDiscrete, kContinuous };

// Per-type parameter labels stored column-parallel to the density matrix
// (struct-of-arrays; a million types must not allocate a million strings).
struct TypeDescriptors {
  std::vector<std::string> fields;  // parameter names, e.g. {"p"} or {"p_f","p_m","table"}
  Matrix values;                    // fields.size() x J

  bool empty() const { return fields.empty(); }
  double value(std::size_t field, Index type) const { return values(static_cast<Index>(field), type); }
};

// The I x J matrix of conditional outcome probabilities (discrete) or density
// evaluations (continuous). Columns are indexed by latent types. Entries are
// strictly positive; discrete columns sum to at most 1 (exactly 1 when the
// rows cover the full outcome space).
class DensityMatrix {
 public:
  static DensityMatrix discrete(Matrix entries,
                                std::vector<std::string> outcome_labels = {},
                                TypeDescriptors type_descriptors = {});
  static DensityMatrix continuous(Matrix entries,
                                  std::vector<std::string> outcome_labels = {},
                                  TypeDescriptors type_descriptors = {});

  const Matrix& entries() const { return entries_; }
  DensityKind kind() const { return kind_; }
  Index outcomes() const { return entries_.rows(); }
  Index types() const { return entries_.cols(); }

  const std::vector<std::string>& outcome_labels() const { return outcome_labels_; }
  const TypeDescriptors& type_descriptors() const { return type_descriptors_; }

 private:
  DensityMatrix(Matrix entries, DensityKind kind, std::vector<std::string> outcome_labels,
                TypeDescriptors type_descriptors);

  Matrix entries_;
  DensityKind kind_;
  std::vector<std::string> outcome_labels_;
  TypeDescriptors type_descriptors_;
};

// Observation counts per outcome.
class CountVector {
 public:
  explicit CountVector(std::vector<std::int64_t> counts);

  const std::vector<std::int64_t>& counts() const { return counts_; }
  std::int64_t total() const { return total_; }
  Index size() const { return static_cast<Index>(counts_.size()); }
  std::int64_t operator[](Index i) const { return counts_[static_cast<std::size_t>(i)]; }

 private:
  std::vector<std::int64_t> counts_;
  std::int64_t total_ = 0;
};

// Normalized counts; zero exactly where the source count is zero.
class FrequencyVector {
 public:
  explicit FrequencyVector(Vector freqs);

  const Vector& values() const { return freqs_; }
  Index size() const { return freqs_.size(); }
  double operator[](Index i) const { return freqs_[i]; }

 private:
  Vector freqs_;
};

// A point of the (J-1)-simplex: the prior over types.
class Prior {
 public:
  Prior() : weights_(Vector::Ones(1)) {}  // one-type point mass
  explicit Prior(Vector weights);

  static Prior uniform(Index n_types);
  static Prior vertex(Index n_types, Index at);

  const Vector& weights() const { return weights_; }
  Index size() const { return weights_.size(); }
  double operator[](Index j) const { return weights_[j]; }

  // {j : weight_j > 0}
  std::vector<Index> support() const;

 private:
  Vector weights_;
};

// Row-stochastic posterior h_ij = Pr(type j | outcome i).
struct PosteriorMatrix {
  Matrix entries;
};

// beta_i = b_i / sum(b).
FrequencyVector normalize_counts(const CountVector& b);

// tau_i = sum_j F_ij pi_j, the mixture marginal over outcomes.
Vector mixture_marginal(const DensityMatrix& F, const Prior& pi);

PosteriorMatrix posterior_matrix(const DensityMatrix& F, const Prior& pi);

// One step of the posterior belief operator (the data-weighted posterior
// h_j(pi) = sum_i beta_i F_ij pi_j / tau_i). Faces of the simplex are
// invariant: pi_j = 0 implies output_j = 0 exactly.
Prior bayes_update(const DensityMatrix& F, const FrequencyVector& beta, const Prior& pi);

// d_j(pi) = sum_i beta_i (F_ij / tau_i - 1); the average proportional excess
// of density mass assigned to type j. Equals the normalized likelihood
// gradient minus one, and h_j - pi_j = pi_j d_j.
Vector discrepancy(const DensityMatrix& F, const FrequencyVector& beta, const Prior& pi);

// L(pi) = sum_i b_i log tau_i. Returns -inf when some tau_i vanishes on an
// observed outcome.
double log_likelihood(const DensityMatrix& F, const CountVector& b, const Prior& pi);

// L(pi) / sum(b); the form in which d_j = grad_j L - 1 holds.
double normalized_log_likelihood(const DensityMatrix& F, const CountVector& b, const Prior& pi);

// D_KL(beta || tau) with the 0 ln 0 = 0 convention. +inf when tau vanishes on
// the support of beta.
double kl_divergence(const FrequencyVector& beta, const Vector& tau);

}  // namespace npeb
