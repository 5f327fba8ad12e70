#pragma once

#include "npeb/mixture.hpp"
#include "npeb/rng.hpp"

#include <cstdint>
#include <vector>

namespace npeb::testutil {

// Random strictly-positive discrete density matrix with column sums 1.
inline DensityMatrix random_discrete_f(Rng& rng, Index I, Index J) {
  Matrix m(I, J);
  for (Index j = 0; j < J; ++j) {
    double sum = 0.0;
    for (Index i = 0; i < I; ++i) {
      m(i, j) = 0.05 + rng.uniform01();
      sum += m(i, j);
    }
    m.col(j) /= sum;
  }
  return DensityMatrix::discrete(std::move(m));
}

inline Prior random_prior(Rng& rng, Index J) {
  Vector w(J);
  double sum = 0.0;
  for (Index j = 0; j < J; ++j) {
    w[j] = 0.01 + rng.uniform01();
    sum += w[j];
  }
  w /= sum;
  double drift = w.sum() - 1.0;
  w[0] -= drift;
  return Prior(std::move(w));
}

inline CountVector random_counts(Rng& rng, Index I, std::int64_t max_count = 20) {
  std::vector<std::int64_t> c(static_cast<std::size_t>(I));
  std::int64_t total = 0;
  for (auto& v : c) {
    v = static_cast<std::int64_t>(rng.uniform_below(static_cast<std::uint64_t>(max_count + 1)));
    total += v;
  }
  if (total == 0) c[0] = 1;
  return CountVector(std::move(c));
}

}  // namespace npeb::testutil
