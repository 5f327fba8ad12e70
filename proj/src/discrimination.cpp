#include "npeb/discrimination.hpp"

#include "npeb/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace npeb {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

std::int64_t parse_strict_int(const std::string& token, const std::string& what) {
  std::size_t pos = 0;
  std::int64_t value = 0;
  try {
    value = std::stoll(token, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument("callback csv: bad " + what + " value '" + token + "'");
  }
  if (pos != token.size()) {
    throw std::invalid_argument("callback csv: bad " + what + " value '" + token + "'");
  }
  return value;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// Metropolis 2x2 switch step targeting the hypergeometric null. The
// acceptance ratio for (+1,-1,-1,+1) on rows r1,r2 and columns c1,c2 reduces
// to t[r1][c2] * t[r2][c1] / ((t[r1][c1]+1) * (t[r2][c2]+1)); infeasible moves
// have ratio zero.
inline void hypergeometric_switch_step(IntMatrix& t, Rng& rng) {
  const Index R = t.rows();
  const Index C = t.cols();
  const Index r1 = static_cast<Index>(rng.uniform_below(static_cast<std::uint64_t>(R)));
  Index r2 = static_cast<Index>(rng.uniform_below(static_cast<std::uint64_t>(R - 1)));
  if (r2 >= r1) ++r2;
  const Index c1 = static_cast<Index>(rng.uniform_below(static_cast<std::uint64_t>(C)));
  Index c2 = static_cast<Index>(rng.uniform_below(static_cast<std::uint64_t>(C - 1)));
  if (c2 >= c1) ++c2;
  const double num = static_cast<double>(t(r1, c2)) * static_cast<double>(t(r2, c1));
  if (num == 0.0) return;
  const double den =
      (static_cast<double>(t(r1, c1)) + 1.0) * (static_cast<double>(t(r2, c2)) + 1.0);
  if (num >= den || rng.uniform01() < num / den) {
    ++t(r1, c1);
    --t(r1, c2);
    --t(r2, c1);
    ++t(r2, c2);
  }
}

}  // namespace

CountVector CallbackData::to_counts() const {
  std::vector<std::int64_t> flat;
  flat.reserve(static_cast<std::size_t>((L + 1) * (L + 1)));
  for (int f = 0; f <= L; ++f) {
    for (int m = 0; m <= L; ++m) flat.push_back(counts(f, m));
  }
  return CountVector(std::move(flat));
}

CallbackData CallbackData::transposed() const {
  CallbackData out;
  out.L = L;
  out.counts = counts.transpose();
  out.n_jobs = n_jobs;
  return out;
}

CallbackData ingest_callback_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("callback csv: cannot open " + path.string());
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), "callback csv: empty file");
  {
    std::string header = trim(line);
    header.erase(std::remove_if(header.begin(), header.end(),
                                [](char c) { return c == ' ' || c == '\t'; }),
                 header.end());
    require(header == "c_f,c_m,count", "callback csv: header must be c_f,c_m,count");
  }

  struct Row {
    int f, m;
    std::int64_t count;
  };
  std::vector<Row> rows;
  int max_c = 0;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.empty()) continue;
    std::stringstream ss(t);
    std::string a, b, c;
    require(static_cast<bool>(std::getline(ss, a, ',')) &&
                static_cast<bool>(std::getline(ss, b, ',')) &&
                static_cast<bool>(std::getline(ss, c)),
            "callback csv: malformed row '" + t + "'");
    const std::int64_t f = parse_strict_int(trim(a), "c_f");
    const std::int64_t m = parse_strict_int(trim(b), "c_m");
    const std::int64_t count = parse_strict_int(trim(c), "count");
    require(f >= 0 && m >= 0, "callback csv: negative callback pattern");
    require(count >= 0, "callback csv: negative count");
    rows.push_back(Row{static_cast<int>(f), static_cast<int>(m), count});
    max_c = std::max(max_c, static_cast<int>(std::max(f, m)));
  }
  require(!rows.empty(), "callback csv: no data rows");

  CallbackData data;
  data.L = max_c;
  data.counts = IntMatrix::Constant(max_c + 1, max_c + 1, -1);
  for (const Row& r : rows) {
    require(data.counts(r.f, r.m) == -1, "callback csv: duplicate pattern (" +
                                             std::to_string(r.f) + "," + std::to_string(r.m) + ")");
    data.counts(r.f, r.m) = r.count;
    data.n_jobs += r.count;
  }
  for (int f = 0; f <= max_c; ++f) {
    for (int m = 0; m <= max_c; ++m) {
      require(data.counts(f, m) != -1, "callback csv: missing pattern (" + std::to_string(f) +
                                           "," + std::to_string(m) +
                                           "); zero counts must be explicit rows");
    }
  }
  require(data.n_jobs >= 1, "callback csv: all counts are zero");
  return data;
}

DiscriminationConfig make_profile(Profile profile, CallbackModel model, std::uint64_t seed) {
  DiscriminationConfig cfg;
  cfg.model = model;
  cfg.seed = seed;
  cfg.sampler.seed = seed;
  cfg.solve.tol_fixed_point = 1e-10;
  cfg.solve.tol_coherence = 1e-8;
  cfg.solve.tol_stability = 1e-8;
  cfg.solve.prune_threshold = 1e-6;
  cfg.solve.prune_interval = 25;
  if (profile == Profile::kDesk) {
    cfg.grid = Grid1D::uniform(0.01, 0.99, 25);
    cfg.sampler.samples_per_pair = 25;
    cfg.sampler.mass_units = 10000;
    cfg.sampler.burn_in = 400000;
    cfg.sampler.thin = 40000;
    cfg.solve.max_iterations = 20000000;
    cfg.ident.random_subsets = 200;
  } else {
    cfg.grid = Grid1D::uniform(0.01, 0.99, 99);
    cfg.sampler.samples_per_pair = 99;
    cfg.sampler.mass_units = 10000;
    cfg.sampler.burn_in = 2000000;
    cfg.sampler.thin = 100000;
    cfg.solve.max_iterations = 50000000;
    cfg.ident.random_subsets = 400;
  }
  return cfg;
}

DiscriminationReport estimate_discrimination_with_model(const CallbackData& data,
                                                        const DensityMatrix& F,
                                                        const DiscriminationConfig& cfg) {
  const int L = data.L;
  const Index I = static_cast<Index>((L + 1) * (L + 1));
  require(F.outcomes() == I, "estimate_discrimination: model outcome count mismatch");
  const auto& fields = F.type_descriptors().fields;
  const auto it_f = std::find(fields.begin(), fields.end(), "p_f");
  const auto it_m = std::find(fields.begin(), fields.end(), "p_m");
  require(it_f != fields.end() && it_m != fields.end(),
          "estimate_discrimination: model lacks p_f/p_m type descriptors");
  const auto fi = static_cast<std::size_t>(it_f - fields.begin());
  const auto mi = static_cast<std::size_t>(it_m - fields.begin());

  const CountVector b = data.to_counts();
  const FrequencyVector beta = normalize_counts(b);

  DiscriminationReport report;
  report.solve = solve_fixed_point(F, b, cfg.solve);
  const SolveResult& fit = report.solve;

  const CollapsedModel collapsed = collapse(F, b);
  report.Ibar = collapsed.Ibar;
  report.ident = check_assumption_discrete(F, b, cfg.ident, cfg.seed, fit.support);
  report.support_bound_ok = support_bound_check(fit, collapsed);
  const BoundaryDiagnostic boundary = boundary_diagnostic(beta, F, fit);

  report.converged = fit.converged;
  report.support_size = static_cast<Index>(fit.support.size());
  report.log_likelihood = fit.log_likelihood;
  report.kl = boundary.kl;

  // Posterior pattern table, streamed over the support columns only.
  const Vector tau = mixture_marginal(F, fit.pi_hat);
  const Matrix& Fe = F.entries();
  const auto& tv = F.type_descriptors().values;
  Vector pr_gt = Vector::Zero(I), pr_eq = Vector::Zero(I), pr_lt = Vector::Zero(I);
  Vector mean_f = Vector::Zero(I), mean_m = Vector::Zero(I);
  for (const Index j : fit.support) {
    const double w = fit.pi_hat[j];
    const double pf = tv(static_cast<Index>(fi), j);
    const double pm = tv(static_cast<Index>(mi), j);
    for (Index i = 0; i < I; ++i) {
      const double h = w * Fe(i, j) / tau[i];
      mean_f[i] += h * pf;
      mean_m[i] += h * pm;
      if (pf > pm) {
        pr_gt[i] += h;
      } else if (pf < pm) {
        pr_lt[i] += h;
      } else {
        pr_eq[i] += h;
      }
    }
  }

  report.rows.reserve(static_cast<std::size_t>(I));
  double max_gap = 0.0;
  for (int f = 0; f <= L; ++f) {
    for (int m = 0; m <= L; ++m) {
      const Index i = static_cast<Index>(f * (L + 1) + m);
      PatternRow row;
      row.c_f = f;
      row.c_m = m;
      row.count = data.counts(f, m);
      row.beta = beta[i];
      row.fitted_p = tau[i];
      row.post_mean_f = mean_f[i];
      row.post_mean_m = mean_m[i];
      row.pr_f_greater = pr_gt[i];
      row.pr_equal = pr_eq[i];
      row.pr_f_less = pr_lt[i];
      max_gap = std::max(max_gap, std::abs(row.fitted_p - row.beta));
      report.rows.push_back(row);
    }
  }
  report.max_fit_gap = max_gap;

  report.warnings = fit.warnings;
  for (const auto& w : report.ident.warnings) report.warnings.push_back("identification: " + w);
  if (!report.ident.rank_ok) {
    report.warnings.push_back(
        "identification: rank condition failed; the fitted prior need not be unique");
  }
  if (!report.support_bound_ok) {
    report.warnings.push_back("support exceeds the collapsed-outcome bound (" +
                              std::to_string(report.support_size) + " > " +
                              std::to_string(report.Ibar) + ")");
  }
  if (!boundary.outside_image) {
    report.warnings.push_back("data lie inside the model image (KL ~ 0); boundary uniqueness "
                              "arguments do not apply");
  }
  return report;
}

DiscriminationReport estimate_discrimination(const CallbackData& data,
                                             const DiscriminationConfig& cfg) {
  DensityMatrix F = [&]() {
    if (cfg.model == CallbackModel::kIndependent) {
      IndependentBivariateModel m;
      m.trials = data.L;
      m.grid = cfg.grid;
      return build_F_discrete(m);
    }
    FrechetBivariateModel m;
    m.trials = data.L;
    m.grid = cfg.grid;
    m.sampler = cfg.sampler;
    m.threads = cfg.threads;
    return build_F_discrete(m);
  }();
  return estimate_discrimination_with_model(data, F, cfg);
}

double hypergeometric_log_prob(const IntMatrix& table) {
  const Index R = table.rows();
  const Index C = table.cols();
  std::int64_t total = 0;
  double lp = 0.0;
  for (Index r = 0; r < R; ++r) {
    std::int64_t rowsum = 0;
    for (Index c = 0; c < C; ++c) rowsum += table(r, c);
    lp += std::lgamma(static_cast<double>(rowsum) + 1.0);
    total += rowsum;
  }
  for (Index c = 0; c < C; ++c) {
    std::int64_t colsum = 0;
    for (Index r = 0; r < R; ++r) colsum += table(r, c);
    lp += std::lgamma(static_cast<double>(colsum) + 1.0);
  }
  lp -= std::lgamma(static_cast<double>(total) + 1.0);
  for (Index r = 0; r < R; ++r) {
    for (Index c = 0; c < C; ++c) {
      lp -= std::lgamma(static_cast<double>(table(r, c)) + 1.0);
    }
  }
  return lp;
}

IndependenceTestResult independence_test(const CallbackData& data, std::int64_t n_sim,
                                         std::uint64_t seed, std::int64_t burn_in,
                                         std::int64_t thin) {
  require(n_sim >= 1000, "independence_test: n_sim must be at least 1000");
  require(burn_in >= 0 && thin >= 1, "independence_test: bad chain parameters");

  IndependenceTestResult result;
  result.n_sim = n_sim;
  result.seed = seed;
  result.observed_log_prob = hypergeometric_log_prob(data.counts);

  IntMatrix t = data.counts;
  Rng rng(derive_seed(seed, 0x15afe));
  for (std::int64_t s = 0; s < burn_in; ++s) hypergeometric_switch_step(t, rng);
  const double obs = result.observed_log_prob;
  std::int64_t at_most = 0;
  for (std::int64_t k = 0; k < n_sim; ++k) {
    for (std::int64_t s = 0; s < thin; ++s) hypergeometric_switch_step(t, rng);
    if (hypergeometric_log_prob(t) <= obs + 1e-12) ++at_most;
  }
  result.n_at_most = at_most;
  result.p_value = static_cast<double>(1 + at_most) / static_cast<double>(n_sim + 1);
  return result;
}

IntMatrix sample_null_table(const IntMatrix& margins_of, std::uint64_t seed, std::int64_t steps) {
  const Index R = margins_of.rows();
  const Index C = margins_of.cols();
  std::vector<std::int64_t> rows(static_cast<std::size_t>(R), 0);
  std::vector<std::int64_t> cols(static_cast<std::size_t>(C), 0);
  std::int64_t total = 0;
  for (Index r = 0; r < R; ++r) {
    for (Index c = 0; c < C; ++c) {
      rows[static_cast<std::size_t>(r)] += margins_of(r, c);
      cols[static_cast<std::size_t>(c)] += margins_of(r, c);
      total += margins_of(r, c);
    }
  }
  require(total >= 1, "sample_null_table: empty table");

  // Rounded product-of-margins start with margin repair, as in the sampler.
  IntMatrix t(R, C);
  std::vector<std::int64_t> rdef = rows, cdef = cols;
  for (Index r = 0; r < R; ++r) {
    for (Index c = 0; c < C; ++c) {
      const std::int64_t v =
          rows[static_cast<std::size_t>(r)] * cols[static_cast<std::size_t>(c)] / total;
      t(r, c) = v;
      rdef[static_cast<std::size_t>(r)] -= v;
      cdef[static_cast<std::size_t>(c)] -= v;
    }
  }
  Index r = 0, c = 0;
  while (r < R && c < C) {
    const std::int64_t add =
        std::min(rdef[static_cast<std::size_t>(r)], cdef[static_cast<std::size_t>(c)]);
    t(r, c) += add;
    rdef[static_cast<std::size_t>(r)] -= add;
    cdef[static_cast<std::size_t>(c)] -= add;
    if (rdef[static_cast<std::size_t>(r)] == 0) ++r;
    else ++c;
  }

  Rng rng(derive_seed(seed, 0xca1b));
  for (std::int64_t s = 0; s < steps; ++s) hypergeometric_switch_step(t, rng);
  return t;
}

}  // namespace npeb
