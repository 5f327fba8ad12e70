#include "oracle.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

namespace npeb::oracle {

namespace {

double direct_l(const Matrix& F, const std::vector<std::int64_t>& b, const Vector& pi) {
  double total = 0.0;
  for (const auto c : b) total += static_cast<double>(c);
  double L = 0.0;
  for (Index i = 0; i < F.rows(); ++i) {
    if (b[static_cast<std::size_t>(i)] == 0) continue;
    double tau = 0.0;
    for (Index j = 0; j < F.cols(); ++j) tau += F(i, j) * pi[j];
    L += static_cast<double>(b[static_cast<std::size_t>(i)]) * std::log(tau);
  }
  return L / total;
}

}  // namespace

double direct_normalized_log_likelihood(const DensityMatrix& F, const CountVector& b,
                                        const Vector& pi) {
  return direct_l(F.entries(), b.counts(), pi);
}

Vector direct_bayes_update(const DensityMatrix& F, const Vector& beta, const Vector& pi) {
  const Matrix& m = F.entries();
  Vector h = Vector::Zero(pi.size());
  for (Index j = 0; j < pi.size(); ++j) {
    double acc = 0.0;
    for (Index i = 0; i < m.rows(); ++i) {
      if (beta[i] == 0.0) continue;
      double tau = 0.0;
      for (Index k = 0; k < pi.size(); ++k) tau += m(i, k) * pi[k];
      acc += beta[i] * m(i, j) / tau;
    }
    h[j] = pi[j] * acc;
  }
  return h;
}

Vector direct_discrepancy(const DensityMatrix& F, const Vector& beta, const Vector& pi) {
  const Matrix& m = F.entries();
  Vector d = Vector::Zero(pi.size());
  for (Index j = 0; j < pi.size(); ++j) {
    double acc = 0.0;
    for (Index i = 0; i < m.rows(); ++i) {
      if (beta[i] == 0.0) continue;
      double tau = 0.0;
      for (Index k = 0; k < pi.size(); ++k) tau += m(i, k) * pi[k];
      acc += beta[i] * (m(i, j) / tau - 1.0);
    }
    d[j] = acc;
  }
  return d;
}

GridSearchResult grid_search_simplex(const DensityMatrix& F, const CountVector& b, double step) {
  const Index J = F.types();
  if (J > 4) throw std::invalid_argument("grid_search_simplex: J must be at most 4");
  if (!(step > 0.0 && step <= 1e-2)) {
    throw std::invalid_argument("grid_search_simplex: step must lie in (0, 1e-2]");
  }
  const auto n = static_cast<std::int64_t>(std::llround(1.0 / step));

  GridSearchResult best;
  best.step = step;
  best.max_log_likelihood_normalized = -std::numeric_limits<double>::infinity();
  Vector pi(J);

  std::function<void(Index, std::int64_t)> walk = [&](Index j, std::int64_t left) {
    if (j == J - 1) {
      pi[j] = static_cast<double>(left) / static_cast<double>(n);
      const double L = direct_l(F.entries(), b.counts(), pi);
      if (L > best.max_log_likelihood_normalized) {
        best.max_log_likelihood_normalized = L;
        best.argmax = pi;
      }
      return;
    }
    for (std::int64_t u = 0; u <= left; ++u) {
      pi[j] = static_cast<double>(u) / static_cast<double>(n);
      walk(j + 1, left - u);
    }
  };
  walk(0, n);
  return best;
}

FixedPointEnumeration enumerate_fixed_points_j2(const DensityMatrix& F, const CountVector& b,
                                                double tol) {
  if (F.types() != 2) throw std::invalid_argument("enumerate_fixed_points_j2: J must be 2");
  const FrequencyVector beta = normalize_counts(b);

  auto d1_at = [&](double t) {
    Vector pi(2);
    pi << 1.0 - t, t;
    return direct_discrepancy(F, beta.values(), pi)[0];
  };
  auto residual_at = [&](const Vector& pi) {
    const Vector h = direct_bayes_update(F, beta.values(), pi);
    return (h - pi).lpNorm<Eigen::Infinity>();
  };

  FixedPointEnumeration out;
  out.fixed_points.emplace_back((Vector(2) << 1.0, 0.0).finished());

  constexpr int kScan = 20000;
  double max_abs_d1 = 0.0;
  double prev_t = 0.5 / kScan;
  double prev_d = d1_at(prev_t);
  std::vector<double> roots;
  for (int k = 1; k < kScan; ++k) {
    const double t = (k + 0.5) / kScan;
    const double d = d1_at(t);
    max_abs_d1 = std::max(max_abs_d1, std::abs(d));
    if ((prev_d <= 0.0 && d > 0.0) || (prev_d >= 0.0 && d < 0.0)) {
      double lo = prev_t, hi = t, flo = prev_d;
      for (int it = 0; it < 100; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = d1_at(mid);
        if ((flo <= 0.0) == (fm <= 0.0)) {
          lo = mid;
          flo = fm;
        } else {
          hi = mid;
        }
      }
      roots.push_back(0.5 * (lo + hi));
    }
    prev_t = t;
    prev_d = d;
  }

  if (max_abs_d1 < 1e-13) {
    // Identical columns: every point of the edge is fixed.
    out.continuum = true;
    out.fixed_points.emplace_back((Vector(2) << 0.0, 1.0).finished());
    return out;
  }

  for (const double t : roots) {
    Vector pi(2);
    pi << 1.0 - t, t;
    if (residual_at(pi) <= tol) {
      bool dup = false;
      for (const auto& seen : out.fixed_points) {
        if ((seen - pi).lpNorm<Eigen::Infinity>() < 1e-7) dup = true;
      }
      if (!dup) out.fixed_points.push_back(pi);
    }
  }
  out.fixed_points.emplace_back((Vector(2) << 0.0, 1.0).finished());
  return out;
}

std::vector<IntMatrix> enumerate_frechet_tables(const std::vector<std::int64_t>& row_units,
                                                const std::vector<std::int64_t>& col_units,
                                                std::int64_t cap) {
  std::int64_t row_total = 0, col_total = 0;
  for (const auto r : row_units) row_total += r;
  for (const auto c : col_units) col_total += c;
  if (row_total != col_total) {
    throw std::invalid_argument("enumerate_frechet_tables: margin totals differ");
  }
  const Index R = static_cast<Index>(row_units.size());
  const Index C = static_cast<Index>(col_units.size());

  std::vector<IntMatrix> tables;
  IntMatrix t = IntMatrix::Zero(R, C);
  std::vector<std::int64_t> col_left = col_units;

  // Row-by-row DFS over compositions bounded by remaining column capacity.
  std::function<void(Index)> fill_row = [&](Index r) {
    if (r == R) {
      tables.push_back(t);
      if (static_cast<std::int64_t>(tables.size()) > cap) {
        throw std::runtime_error("enumerate_frechet_tables: enumeration exceeds cap");
      }
      return;
    }
    std::function<void(Index, std::int64_t)> fill_cell = [&](Index c, std::int64_t left) {
      if (c == C - 1) {
        if (left > col_left[static_cast<std::size_t>(c)]) return;
        t(r, c) = left;
        col_left[static_cast<std::size_t>(c)] -= left;
        fill_row(r + 1);
        col_left[static_cast<std::size_t>(c)] += left;
        t(r, c) = 0;
        return;
      }
      const std::int64_t hi = std::min(left, col_left[static_cast<std::size_t>(c)]);
      for (std::int64_t v = 0; v <= hi; ++v) {
        t(r, c) = v;
        col_left[static_cast<std::size_t>(c)] -= v;
        fill_cell(c + 1, left - v);
        col_left[static_cast<std::size_t>(c)] += v;
      }
      t(r, c) = 0;
    };
    fill_cell(0, row_units[static_cast<std::size_t>(r)]);
  };
  fill_row(0);
  return tables;
}

double chi2_q99(double dof) {
  constexpr double z99 = 2.3263478740408408;  // standard normal 0.99 quantile
  const double a = 2.0 / (9.0 * dof);
  const double base = 1.0 - a + z99 * std::sqrt(a);
  return dof * base * base * base;
}

}  // namespace npeb::oracle
