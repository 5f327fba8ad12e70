#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "npeb/mixture.hpp"
#include "npeb/rng.hpp"
#include "oracle.hpp"
#include "testutil.hpp"

#include <cmath>
#include <limits>

using namespace npeb;

namespace {

DensityMatrix example1_f() {
  // Goalkeeper fixture convention: outcome 0 = miss, outcome 1 = save;
  // column 0 = bad type (save prob 0.05), column 1 = good type (0.9).
  Matrix m(2, 2);
  m << 0.95, 0.1, 0.05, 0.9;
  return DensityMatrix::discrete(std::move(m));
}

// Op-level fixture used by several spec examples (rows in (save, miss) order).
DensityMatrix example1_f_flipped() {
  Matrix m(2, 2);
  m << 0.05, 0.9, 0.95, 0.1;
  return DensityMatrix::discrete(std::move(m));
}

}  // namespace

TEST_CASE("normalize_counts") {
  const auto f1 = normalize_counts(CountVector({1, 1}));
  CHECK(f1[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(f1[1] == doctest::Approx(0.5).epsilon(1e-15));

  const auto f2 = normalize_counts(CountVector({4, 96}));
  CHECK(f2[0] == doctest::Approx(0.04).epsilon(1e-14));
  CHECK(f2[1] == doctest::Approx(0.96).epsilon(1e-14));

  const auto f3 = normalize_counts(CountVector({1, 0, 0, 0, 2, 3, 1, 0, 0, 0, 1}));
  CHECK(f3[0] == doctest::Approx(1.0 / 8).epsilon(1e-14));
  CHECK(f3[4] == doctest::Approx(2.0 / 8).epsilon(1e-14));
  CHECK(f3[5] == doctest::Approx(3.0 / 8).epsilon(1e-14));
  CHECK(f3[1] == 0.0);  // exact zero where the count is zero
  CHECK(f3.values().sum() == doctest::Approx(1.0).epsilon(1e-15));

  CHECK_THROWS(CountVector({0, 0, 0}));
  CHECK_THROWS(CountVector({-1, 2}));
}

TEST_CASE("mixture_marginal") {
  const auto F = example1_f_flipped();

  const Vector t1 = mixture_marginal(F, Prior::vertex(2, 0));
  CHECK(t1[0] == doctest::Approx(0.05).epsilon(1e-15));
  CHECK(t1[1] == doctest::Approx(0.95).epsilon(1e-15));

  const Vector t2 = mixture_marginal(F, Prior((Vector(2) << 0.471, 0.529).finished()));
  CHECK(t2[0] == doctest::Approx(0.4997).epsilon(1e-3));
  CHECK(t2[1] == doctest::Approx(0.5003).epsilon(1e-3));

  // Uniform prior gives the row means.
  Rng rng(11);
  const auto R = testutil::random_discrete_f(rng, 4, 6);
  const Vector tu = mixture_marginal(R, Prior::uniform(6));
  for (Index i = 0; i < 4; ++i) {
    CHECK(tu[i] == doctest::Approx(R.entries().row(i).mean()).epsilon(1e-14));
  }

  CHECK_THROWS(mixture_marginal(F, Prior::uniform(3)));
}

TEST_CASE("posterior_matrix") {
  const auto F = example1_f_flipped();

  const auto Hv = posterior_matrix(F, Prior::vertex(2, 1));
  CHECK(Hv.entries(0, 1) == 1.0);
  CHECK(Hv.entries(1, 1) == 1.0);
  CHECK(Hv.entries(0, 0) == 0.0);

  const auto H = posterior_matrix(F, Prior((Vector(2) << 0.5, 0.5).finished()));
  CHECK(H.entries(0, 0) == doctest::Approx(0.025 / 0.475).epsilon(1e-12));
  CHECK(H.entries(0, 0) == doctest::Approx(0.0526).epsilon(1e-2));
  CHECK(H.entries(0, 1) == doctest::Approx(0.9474).epsilon(1e-3));
  for (Index i = 0; i < 2; ++i) CHECK(H.entries.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));

  // Uninformative likelihood: posterior rows equal the prior.
  Matrix flat(3, 2);
  flat << 0.2, 0.2, 0.3, 0.3, 0.5, 0.5;
  const auto Hu = posterior_matrix(DensityMatrix::discrete(std::move(flat)),
                                   Prior((Vector(2) << 0.3, 0.7).finished()));
  for (Index i = 0; i < 3; ++i) {
    CHECK(Hu.entries(i, 0) == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(Hu.entries(i, 1) == doctest::Approx(0.7).epsilon(1e-12));
  }
}

TEST_CASE("bayes_update") {
  const auto F = example1_f_flipped();
  const auto beta = normalize_counts(CountVector({1, 1}));

  // Vertices are fixed points.
  const auto v = bayes_update(F, beta, Prior::vertex(2, 0));
  CHECK(v[0] == 1.0);
  CHECK(v[1] == 0.0);

  // The paper's interior fixed point maps to itself within 1e-3.
  const Prior interior((Vector(2) << 0.471, 0.529).finished());
  const auto hi = bayes_update(F, beta, interior);
  CHECK(hi[0] == doctest::Approx(0.471).epsilon(1e-3));
  CHECK(hi[1] == doctest::Approx(0.529).epsilon(1e-3));

  // Independent scalar evaluation at a non-fixed point.
  const Prior start((Vector(2) << 0.25, 0.75).finished());
  const auto h = bayes_update(F, beta, start);
  const Vector expect = oracle::direct_bayes_update(F, beta.values(), start.weights());
  CHECK(h[0] == doctest::Approx(expect[0]).epsilon(1e-12));
  CHECK(h[1] == doctest::Approx(expect[1]).epsilon(1e-12));
}

TEST_CASE("discrepancy") {
  // Outcome rows ordered (miss, save); at the good-type vertex the bad type
  // stays dead on b = (4, 96).
  const auto F = example1_f();
  const auto beta = normalize_counts(CountVector({4, 96}));
  const Vector d = discrepancy(F, beta, Prior::vertex(2, 1));
  CHECK(d[0] == doctest::Approx(-0.5667).epsilon(1e-3));
  CHECK(d[0] < 0.0);

  // Coherent interior fixed point has zero discrepancy.
  const auto beta11 = normalize_counts(CountVector({1, 1}));
  const Prior interior((Vector(2) << 8.0 / 17, 9.0 / 17).finished());
  const Vector di = discrepancy(F, beta11, interior);
  CHECK(std::abs(di[0]) < 1e-12);
  CHECK(std::abs(di[1]) < 1e-12);

  // Flat likelihood: discrepancy identically zero.
  Matrix flat(2, 3);
  flat << 0.4, 0.4, 0.4, 0.6, 0.6, 0.6;
  const Vector dz = discrepancy(DensityMatrix::discrete(std::move(flat)), beta11,
                                Prior::uniform(3));
  for (Index j = 0; j < 3; ++j) CHECK(std::abs(dz[j]) < 1e-14);
}

TEST_CASE("log_likelihood") {
  // J = 1: no mixing.
  Matrix single(2, 1);
  single << 0.3, 0.7;
  const DensityMatrix F1 = DensityMatrix::discrete(std::move(single));
  const CountVector b({3, 5});
  CHECK(log_likelihood(F1, b, Prior::uniform(1)) ==
        doctest::Approx(3 * std::log(0.3) + 5 * std::log(0.7)).epsilon(1e-14));

  const auto F = example1_f();
  const CountVector b11({1, 1});
  const Prior pi((Vector(2) << 0.471, 0.529).finished());
  CHECK(normalized_log_likelihood(F, b11, pi) ==
        doctest::Approx(oracle::direct_normalized_log_likelihood(F, b11, pi.weights()))
            .epsilon(1e-14));
}

TEST_CASE("kl_divergence") {
  const FrequencyVector beta((Vector(2) << 0.5, 0.5).finished());
  CHECK(kl_divergence(beta, (Vector(2) << 0.5, 0.5).finished()) == doctest::Approx(0.0));

  const FrequencyVector point((Vector(2) << 1.0, 0.0).finished());
  CHECK(kl_divergence(point, (Vector(2) << 0.5, 0.5).finished()) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-14));

  CHECK_THROWS(kl_divergence(beta, (Vector(2) << -0.1, 1.1).finished()));
}

TEST_CASE("properties: simplex closure and face invariance") {
  Rng rng(2024);
  for (int rep = 0; rep < 1000; ++rep) {
    const Index I = 2 + static_cast<Index>(rng.uniform_below(5));
    const Index J = 2 + static_cast<Index>(rng.uniform_below(5));
    const auto F = testutil::random_discrete_f(rng, I, J);
    const auto b = testutil::random_counts(rng, I);
    const auto beta = normalize_counts(b);
    const auto pi = testutil::random_prior(rng, J);

    const auto h = bayes_update(F, beta, pi);
    CHECK(h.weights().sum() == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(h.weights().minCoeff() >= 0.0);
  }

  // Zeroed coordinates stay exactly zero.
  Rng rng2(7);
  for (int rep = 0; rep < 200; ++rep) {
    const auto F = testutil::random_discrete_f(rng2, 3, 4);
    const auto beta = normalize_counts(testutil::random_counts(rng2, 3));
    Vector w = testutil::random_prior(rng2, 4).weights();
    w[1] = 0.0;
    w /= w.sum();
    const auto h = bayes_update(F, beta, Prior(w));
    CHECK(h[1] == 0.0);
  }
}

TEST_CASE("properties: coherence iff zero discrepancy on the support") {
  // h_j - pi_j = pi_j d_j is an algebraic identity.
  Rng rng(99);
  for (int rep = 0; rep < 500; ++rep) {
    const Index I = 2 + static_cast<Index>(rng.uniform_below(4));
    const Index J = 2 + static_cast<Index>(rng.uniform_below(4));
    const auto F = testutil::random_discrete_f(rng, I, J);
    const auto beta = normalize_counts(testutil::random_counts(rng, I));
    const auto pi = testutil::random_prior(rng, J);
    const auto h = bayes_update(F, beta, pi);
    const auto d = discrepancy(F, beta, pi);
    for (Index j = 0; j < J; ++j) {
      CHECK(h[j] - pi[j] == doctest::Approx(pi[j] * d[j]).epsilon(1e-9).scale(1.0));
    }
  }
}

TEST_CASE("properties: discrepancy matches the likelihood gradient") {
  // d_j + 1 equals the finite-difference gradient of the normalized
  // log-likelihood, extended off the simplex by linearity of tau in pi.
  Rng rng(5150);
  for (int rep = 0; rep < 50; ++rep) {
    const Index I = 3 + static_cast<Index>(rng.uniform_below(3));
    const Index J = 2 + static_cast<Index>(rng.uniform_below(3));
    const auto F = testutil::random_discrete_f(rng, I, J);
    const auto b = testutil::random_counts(rng, I);
    const auto beta = normalize_counts(b);
    const auto pi = testutil::random_prior(rng, J);
    const Vector d = discrepancy(F, beta, pi);

    const double eps = 1e-7;
    for (Index j = 0; j < J; ++j) {
      Vector up = pi.weights(), down = pi.weights();
      up[j] += eps;
      down[j] -= eps;
      const double lu = oracle::direct_normalized_log_likelihood(F, b, up);
      const double ld = oracle::direct_normalized_log_likelihood(F, b, down);
      const double grad = (lu - ld) / (2 * eps);
      CHECK(d[j] + 1.0 == doctest::Approx(grad).epsilon(1e-5));
    }
  }
}

TEST_CASE("properties: EM ascent") {
  Rng rng(314159);
  for (int rep = 0; rep < 1000; ++rep) {
    const Index I = 2 + static_cast<Index>(rng.uniform_below(5));
    const Index J = 2 + static_cast<Index>(rng.uniform_below(5));
    const auto F = testutil::random_discrete_f(rng, I, J);
    const auto b = testutil::random_counts(rng, I);
    const auto beta = normalize_counts(b);
    auto pi = testutil::random_prior(rng, J);
    double prev = normalized_log_likelihood(F, b, pi);
    for (int step = 0; step < 5; ++step) {
      pi = bayes_update(F, beta, pi);
      const double cur = normalized_log_likelihood(F, b, pi);
      CHECK(cur >= prev - 1e-12);
      prev = cur;
    }
  }
}

TEST_CASE("properties: KL and likelihood duality") {
  // D_KL(beta || tau(pi)) + L_norm(pi) = sum beta ln beta (Remark-1 identity).
  Rng rng(271828);
  for (int rep = 0; rep < 500; ++rep) {
    const Index I = 2 + static_cast<Index>(rng.uniform_below(5));
    const Index J = 2 + static_cast<Index>(rng.uniform_below(5));
    const auto F = testutil::random_discrete_f(rng, I, J);
    const auto b = testutil::random_counts(rng, I);
    const auto beta = normalize_counts(b);
    const auto pi = testutil::random_prior(rng, J);

    double entropy_term = 0.0;
    for (Index i = 0; i < I; ++i) {
      if (beta[i] > 0.0) entropy_term += beta[i] * std::log(beta[i]);
    }
    const double kl = kl_divergence(beta, mixture_marginal(F, pi));
    const double lnorm = normalized_log_likelihood(F, b, pi);
    CHECK(kl + lnorm == doctest::Approx(entropy_term).epsilon(1e-10).scale(1.0));
  }
}

TEST_CASE("density matrix validation") {
  Matrix bad(2, 2);
  bad << 0.5, 0.0, 0.5, 1.0;
  CHECK_THROWS(DensityMatrix::discrete(std::move(bad)));

  Matrix oversum(2, 1);
  oversum << 0.9, 0.2;
  CHECK_THROWS(DensityMatrix::discrete(std::move(oversum)));

  // Continuous entries may exceed 1.
  Matrix dens(2, 2);
  dens << 1.5, 0.2, 0.3, 2.5;
  CHECK_NOTHROW(DensityMatrix::continuous(std::move(dens)));
}
