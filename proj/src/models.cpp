#include "npeb/models.hpp"

#include "npeb/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace npeb {

namespace {

constexpr double kDensityFloor = 1e-12;  // replaces exact zeros in table cells
constexpr char kCacheMagic[8] = {'N', 'P', 'E', 'B', 'F', 'M', '0', '1'};

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

// Feasible integer start table near independence: floor of the product table,
// with the unit deficit repaired by a northwest-corner fill. Margins hold
// exactly and the construction commutes with transposition.
IntMatrix independence_start_table(const std::vector<std::int64_t>& row_units,
                                   const std::vector<std::int64_t>& col_units,
                                   std::int64_t M) {
  const Index R = static_cast<Index>(row_units.size());
  const Index C = static_cast<Index>(col_units.size());
  IntMatrix t(R, C);
  std::vector<std::int64_t> row_deficit(row_units.begin(), row_units.end());
  std::vector<std::int64_t> col_deficit(col_units.begin(), col_units.end());
  for (Index r = 0; r < R; ++r) {
    for (Index c = 0; c < C; ++c) {
      const std::int64_t v = row_units[static_cast<std::size_t>(r)] *
                             col_units[static_cast<std::size_t>(c)] / M;
      t(r, c) = v;
      row_deficit[static_cast<std::size_t>(r)] -= v;
      col_deficit[static_cast<std::size_t>(c)] -= v;
    }
  }
  Index r = 0, c = 0;
  while (r < R && c < C) {
    const std::int64_t add = std::min(row_deficit[static_cast<std::size_t>(r)],
                                      col_deficit[static_cast<std::size_t>(c)]);
    t(r, c) += add;
    row_deficit[static_cast<std::size_t>(r)] -= add;
    col_deficit[static_cast<std::size_t>(c)] -= add;
    if (row_deficit[static_cast<std::size_t>(r)] == 0) ++r;
    else ++c;
  }
  return t;
}

// One 2x2 switch proposal against the uniform target: accept iff no cell
// would go negative.
inline void switch_move(IntMatrix& t, Rng& rng) {
  const Index R = t.rows();
  const Index C = t.cols();
  const Index r1 = static_cast<Index>(rng.uniform_below(static_cast<std::uint64_t>(R)));
  Index r2 = static_cast<Index>(rng.uniform_below(static_cast<std::uint64_t>(R - 1)));
  if (r2 >= r1) ++r2;
  const Index c1 = static_cast<Index>(rng.uniform_below(static_cast<std::uint64_t>(C)));
  Index c2 = static_cast<Index>(rng.uniform_below(static_cast<std::uint64_t>(C - 1)));
  if (c2 >= c1) ++c2;
  if (t(r1, c2) >= 1 && t(r2, c1) >= 1) {
    ++t(r1, c1);
    --t(r1, c2);
    --t(r2, c1);
    ++t(r2, c2);
  }
}

JointTable snapshot_table(const IntMatrix& units, const std::vector<std::int64_t>& row_units,
                          const std::vector<std::int64_t>& col_units, std::int64_t M) {
  JointTable jt;
  jt.units = units;
  jt.mass_units = M;
  jt.cells = units.cast<double>() / static_cast<double>(M);
  jt.row_marginal.resize(static_cast<Index>(row_units.size()));
  for (Index r = 0; r < jt.row_marginal.size(); ++r) {
    jt.row_marginal[r] = static_cast<double>(row_units[static_cast<std::size_t>(r)]) /
                         static_cast<double>(M);
  }
  jt.col_marginal.resize(static_cast<Index>(col_units.size()));
  for (Index c = 0; c < jt.col_marginal.size(); ++c) {
    jt.col_marginal[c] = static_cast<double>(col_units[static_cast<std::size_t>(c)]) /
                         static_cast<double>(M);
  }
  return jt;
}

// Density column from a sampled table: zero cells floored so the strict
// positivity invariant of DensityMatrix holds, column renormalized.
Vector table_to_column(const JointTable& jt) {
  const Index R = jt.cells.rows();
  const Index C = jt.cells.cols();
  Vector col(R * C);
  for (Index r = 0; r < R; ++r) {
    for (Index c = 0; c < C; ++c) {
      col[r * C + c] = std::max(jt.cells(r, c), kDensityFloor);
    }
  }
  col /= col.sum();
  return col;
}

std::int64_t minimal_feasible_units(const Vector& pmf) {
  double minp = 1.0;
  for (Index i = 0; i < pmf.size(); ++i) minp = std::min(minp, pmf[i]);
  return static_cast<std::int64_t>(std::ceil(1.0 / minp)) + 1;
}

}  // namespace

Grid1D Grid1D::uniform(double lo, double hi, Index n) {
  require(n >= 1, "Grid1D: need at least one point");
  require(lo < hi || n == 1, "Grid1D: lo must be below hi");
  Grid1D g;
  g.points.resize(static_cast<std::size_t>(n));
  if (n == 1) {
    g.points[0] = lo;
    return g;
  }
  const double step = (hi - lo) / static_cast<double>(n - 1);
  for (Index i = 0; i < n; ++i) g.points[static_cast<std::size_t>(i)] = lo + step * static_cast<double>(i);
  g.points.back() = hi;
  return g;
}

void Grid1D::validate(bool probability) const {
  require(!points.empty(), "Grid1D: empty");
  for (std::size_t i = 0; i < points.size(); ++i) {
    require(std::isfinite(points[i]), "Grid1D: non-finite point");
    if (i > 0) require(points[i] > points[i - 1], "Grid1D: points must strictly increase");
    if (probability) require(points[i] > 0.0 && points[i] < 1.0, "Grid1D: probability grid must lie in (0,1)");
  }
}

void JointTable::validate() const {
  require(units.rows() == cells.rows() && units.cols() == cells.cols(), "JointTable: shape mismatch");
  for (Index r = 0; r < cells.rows(); ++r) {
    const double rowsum = cells.row(r).sum();
    require(std::abs(rowsum - row_marginal[r]) <= 1e-9, "JointTable: row margin violated");
  }
  for (Index c = 0; c < cells.cols(); ++c) {
    const double colsum = cells.col(c).sum();
    require(std::abs(colsum - col_marginal[c]) <= 1e-9, "JointTable: column margin violated");
  }
}

void FrechetSamplerConfig::validate(Index table_cells) const {
  require(mass_units >= table_cells, "FrechetSamplerConfig: mass_units below table cell count");
  require(burn_in >= 1 && thin >= 1, "FrechetSamplerConfig: burn_in and thin must be >= 1");
  require(samples_per_pair >= 1, "FrechetSamplerConfig: need at least one sample");
}

double binomial_pmf(int trials, double p, int successes) {
  require(trials >= 0, "binomial_pmf: negative trial count");
  require(successes >= 0 && successes <= trials, "binomial_pmf: successes outside 0..trials");
  require(p > 0.0 && p < 1.0, "binomial_pmf: p outside (0,1)");
  double comb = 1.0;
  for (int i = 0; i < successes; ++i) {
    comb *= static_cast<double>(trials - i) / static_cast<double>(i + 1);
  }
  return comb * std::pow(p, successes) * std::pow(1.0 - p, trials - successes);
}

Vector binomial_pmf_vector(int trials, double p) {
  Vector pmf(trials + 1);
  for (int c = 0; c <= trials; ++c) pmf[c] = binomial_pmf(trials, p, c);
  return pmf;
}

Vector independent_bivariate_column(int L, double p_a, double p_b) {
  const Vector fa = binomial_pmf_vector(L, p_a);
  const Vector fb = binomial_pmf_vector(L, p_b);
  Vector col((L + 1) * (L + 1));
  for (int ca = 0; ca <= L; ++ca) {
    for (int cb = 0; cb <= L; ++cb) {
      col[ca * (L + 1) + cb] = fa[ca] * fb[cb];
    }
  }
  return col;
}

std::vector<std::int64_t> round_pmf_to_units(const Vector& pmf, std::int64_t M) {
  require(M >= 1, "round_pmf_to_units: M must be positive");
  const Index n = pmf.size();
  std::vector<std::int64_t> units(static_cast<std::size_t>(n));
  std::vector<std::pair<double, Index>> remainders;
  remainders.reserve(static_cast<std::size_t>(n));
  std::int64_t assigned = 0;
  for (Index i = 0; i < n; ++i) {
    require(pmf[i] > 0.0, "round_pmf_to_units: pmf cells must be strictly positive");
    const double scaled = pmf[i] * static_cast<double>(M);
    const auto fl = static_cast<std::int64_t>(std::floor(scaled));
    units[static_cast<std::size_t>(i)] = fl;
    assigned += fl;
    remainders.emplace_back(scaled - static_cast<double>(fl), i);
  }
  std::int64_t leftover = M - assigned;
  require(leftover >= 0, "round_pmf_to_units: pmf sums above 1");
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::int64_t k = 0; k < leftover; ++k) {
    ++units[static_cast<std::size_t>(remainders[static_cast<std::size_t>(k % n)].second)];
  }
  for (Index i = 0; i < n; ++i) {
    if (units[static_cast<std::size_t>(i)] == 0) {
      std::ostringstream os;
      os << "marginal cell " << i << " (pmf " << pmf[i] << ") rounds to 0 at M = " << M
         << "; increase mass_units";
      throw std::domain_error(os.str());
    }
  }
  return units;
}

std::vector<JointTable> frechet_sample_tables(const Vector& row_pmf, const Vector& col_pmf,
                                              const FrechetSamplerConfig& cfg) {
  cfg.validate(row_pmf.size() * col_pmf.size());
  const std::int64_t M = cfg.mass_units;
  const auto row_units = round_pmf_to_units(row_pmf, M);
  const auto col_units = round_pmf_to_units(col_pmf, M);

  IntMatrix table = independence_start_table(row_units, col_units, M);
  Rng rng(derive_seed(cfg.seed, 0xf2ec8e7));
  for (std::int64_t step = 0; step < cfg.burn_in; ++step) switch_move(table, rng);

  std::vector<JointTable> out;
  out.reserve(static_cast<std::size_t>(cfg.samples_per_pair));
  for (std::int64_t k = 0; k < cfg.samples_per_pair; ++k) {
    for (std::int64_t step = 0; step < cfg.thin; ++step) switch_move(table, rng);
    out.push_back(snapshot_table(table, row_units, col_units, M));
  }
  return out;
}

namespace {

DensityMatrix build_bernoulli_gk(const BernoulliGkModel& m) {
  m.grid.validate(/*probability=*/true);
  require(m.shots >= 1, "bernoulli_gk: shots must be >= 1");
  const Index J = m.grid.size();
  const Index I = m.shots + 1;
  Matrix F(I, J);
  for (Index j = 0; j < J; ++j) {
    F.col(j) = binomial_pmf_vector(m.shots, m.grid.points[static_cast<std::size_t>(j)]);
  }
  std::vector<std::string> outcomes(static_cast<std::size_t>(I));
  for (Index i = 0; i < I; ++i) outcomes[static_cast<std::size_t>(i)] = std::to_string(i);
  TypeDescriptors types;
  types.fields = {"p"};
  types.values.resize(1, J);
  for (Index j = 0; j < J; ++j) types.values(0, j) = m.grid.points[static_cast<std::size_t>(j)];
  return DensityMatrix::discrete(std::move(F), std::move(outcomes), std::move(types));
}

std::vector<std::string> bivariate_outcome_labels(int L) {
  std::vector<std::string> labels;
  labels.reserve(static_cast<std::size_t>((L + 1) * (L + 1)));
  for (int a = 0; a <= L; ++a) {
    for (int b = 0; b <= L; ++b) {
      labels.push_back("(" + std::to_string(a) + "," + std::to_string(b) + ")");
    }
  }
  return labels;
}

DensityMatrix build_independent_bivariate(const IndependentBivariateModel& m) {
  m.grid.validate(true);
  require(m.trials >= 1, "independent_bivariate: trials must be >= 1");
  const Index G = m.grid.size();
  const Index J = G * G;
  const Index I = static_cast<Index>((m.trials + 1) * (m.trials + 1));
  Matrix F(I, J);
  TypeDescriptors types;
  types.fields = {"p_f", "p_m"};
  types.values.resize(2, J);
  for (Index a = 0; a < G; ++a) {
    for (Index b = 0; b < G; ++b) {
      const Index j = a * G + b;
      F.col(j) = independent_bivariate_column(m.trials, m.grid.points[static_cast<std::size_t>(a)],
                                              m.grid.points[static_cast<std::size_t>(b)]);
      types.values(0, j) = m.grid.points[static_cast<std::size_t>(a)];
      types.values(1, j) = m.grid.points[static_cast<std::size_t>(b)];
    }
  }
  return DensityMatrix::discrete(std::move(F), bivariate_outcome_labels(m.trials), std::move(types));
}

// Tables are sampled once per unordered grid pair in a canonical orientation
// and transposed for the flipped pair; diagonal-pair ensembles include each
// table together with its transpose. This makes the built model exactly
// equivariant under swapping the two groups.
DensityMatrix build_frechet_bivariate(const FrechetBivariateModel& m) {
  m.grid.validate(true);
  require(m.trials >= 1, "frechet_bivariate: trials must be >= 1");
  const Index G = m.grid.size();
  const std::int64_t k = m.sampler.samples_per_pair;
  const Index I = static_cast<Index>((m.trials + 1) * (m.trials + 1));
  const Index J = G * G * static_cast<Index>(k);

  Matrix F(I, J);
  TypeDescriptors types;
  types.fields = {"p_f", "p_m", "table"};
  types.values.resize(3, J);

  // Marginal pmfs per grid point, reused across pairs.
  std::vector<Vector> marg(static_cast<std::size_t>(G));
  for (Index g = 0; g < G; ++g) {
    marg[static_cast<std::size_t>(g)] =
        binomial_pmf_vector(m.trials, m.grid.points[static_cast<std::size_t>(g)]);
  }

  // Canonical cells: unordered pairs (a <= b).
  struct Cell {
    Index a, b;
    std::uint64_t stream;
  };
  std::vector<Cell> cells;
  cells.reserve(static_cast<std::size_t>(G * (G + 1) / 2));
  std::uint64_t stream = 0;
  for (Index a = 0; a < G; ++a) {
    for (Index b = a; b < G; ++b) cells.push_back(Cell{a, b, stream++});
  }

  std::vector<std::vector<JointTable>> sampled(cells.size());
  const int threads = std::max(1, m.threads);
  auto worker = [&](std::size_t begin, std::size_t end) {
    for (std::size_t c = begin; c < end; ++c) {
      const Cell& cell = cells[c];
      FrechetSamplerConfig pair_cfg = m.sampler;
      pair_cfg.seed = derive_seed(m.sampler.seed, cell.stream);
      const std::int64_t feasible =
          std::max(minimal_feasible_units(marg[static_cast<std::size_t>(cell.a)]),
                   minimal_feasible_units(marg[static_cast<std::size_t>(cell.b)]));
      pair_cfg.mass_units = std::max(pair_cfg.mass_units, feasible);
      if (cell.a == cell.b) {
        // Transpose-closed ensemble on the diagonal.
        pair_cfg.samples_per_pair = (k + 1) / 2;
        auto base = frechet_sample_tables(marg[static_cast<std::size_t>(cell.a)],
                                          marg[static_cast<std::size_t>(cell.b)], pair_cfg);
        std::vector<JointTable> full;
        full.reserve(static_cast<std::size_t>(k));
        for (const auto& t : base) {
          full.push_back(t);
          if (static_cast<std::int64_t>(full.size()) == k) break;
          JointTable tt = t;
          tt.cells.transposeInPlace();
          tt.units.transposeInPlace();
          std::swap(tt.row_marginal, tt.col_marginal);
          full.push_back(std::move(tt));
          if (static_cast<std::int64_t>(full.size()) == k) break;
        }
        sampled[c] = std::move(full);
      } else {
        pair_cfg.samples_per_pair = k;
        sampled[c] = frechet_sample_tables(marg[static_cast<std::size_t>(cell.a)],
                                           marg[static_cast<std::size_t>(cell.b)], pair_cfg);
      }
    }
  };
  if (threads == 1 || cells.size() < 2) {
    worker(0, cells.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (cells.size() + static_cast<std::size_t>(threads) - 1) /
                              static_cast<std::size_t>(threads);
    for (int t = 0; t < threads; ++t) {
      const std::size_t begin = static_cast<std::size_t>(t) * chunk;
      const std::size_t end = std::min(cells.size(), begin + chunk);
      if (begin >= end) break;
      pool.emplace_back(worker, begin, end);
    }
    for (auto& th : pool) th.join();
  }

  // Deterministic gather into (p_f major, p_m, table) order.
  std::vector<const std::vector<JointTable>*> by_pair(static_cast<std::size_t>(G * G), nullptr);
  std::vector<bool> transposed(static_cast<std::size_t>(G * G), false);
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const Cell& cell = cells[c];
    by_pair[static_cast<std::size_t>(cell.a * G + cell.b)] = &sampled[c];
    if (cell.a != cell.b) {
      by_pair[static_cast<std::size_t>(cell.b * G + cell.a)] = &sampled[c];
      transposed[static_cast<std::size_t>(cell.b * G + cell.a)] = true;
    }
  }
  for (Index a = 0; a < G; ++a) {
    for (Index b = 0; b < G; ++b) {
      const auto& tables = *by_pair[static_cast<std::size_t>(a * G + b)];
      const bool tr = transposed[static_cast<std::size_t>(a * G + b)];
      for (std::int64_t t = 0; t < k; ++t) {
        const Index j = (a * G + b) * static_cast<Index>(k) + static_cast<Index>(t);
        JointTable jt = tables[static_cast<std::size_t>(t)];
        if (tr) {
          jt.cells.transposeInPlace();
          jt.units.transposeInPlace();
          std::swap(jt.row_marginal, jt.col_marginal);
        }
        F.col(j) = table_to_column(jt);
        types.values(0, j) = m.grid.points[static_cast<std::size_t>(a)];
        types.values(1, j) = m.grid.points[static_cast<std::size_t>(b)];
        types.values(2, j) = static_cast<double>(t);
      }
    }
  }
  return DensityMatrix::discrete(std::move(F), bivariate_outcome_labels(m.trials), std::move(types));
}

}  // namespace

DensityMatrix build_F_discrete(const DiscreteModelSpec& spec) {
  return std::visit(
      [](const auto& m) -> DensityMatrix {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, BernoulliGkModel>) return build_bernoulli_gk(m);
        else if constexpr (std::is_same_v<T, IndependentBivariateModel>) return build_independent_bivariate(m);
        else return build_frechet_bivariate(m);
      },
      spec);
}

DensityMatrix build_F_continuous(const Vector& observations, const GaussianLocationKernel& kernel,
                                 const Grid1D& type_grid) {
  type_grid.validate(false);
  require(kernel.sigma > 0.0, "build_F_continuous: sigma must be positive");
  require(observations.size() >= 1, "build_F_continuous: no observations");
  const Index N = observations.size();
  const Index J = type_grid.size();
  const double inv = 1.0 / kernel.sigma;
  const double norm = inv / std::sqrt(2.0 * M_PI);
  Matrix F(N, J);
  for (Index j = 0; j < J; ++j) {
    const double t = type_grid.points[static_cast<std::size_t>(j)];
    for (Index n = 0; n < N; ++n) {
      const double z = (observations[n] - t) * inv;
      F(n, j) = norm * std::exp(-0.5 * z * z);
    }
  }
  TypeDescriptors types;
  types.fields = {"t"};
  types.values.resize(1, J);
  for (Index j = 0; j < J; ++j) types.values(0, j) = type_grid.points[static_cast<std::size_t>(j)];
  return DensityMatrix::continuous(std::move(F), {}, std::move(types));
}

void save_density_matrix(const std::filesystem::path& path, const DensityMatrix& F) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_density_matrix: cannot open " + path.string());
  out.write(kCacheMagic, sizeof(kCacheMagic));
  const std::uint64_t kind = F.kind() == DensityKind::kDiscrete ? 0 : 1;
  const std::uint64_t rows = static_cast<std::uint64_t>(F.outcomes());
  const std::uint64_t cols = static_cast<std::uint64_t>(F.types());
  const std::uint64_t n_fields = static_cast<std::uint64_t>(F.type_descriptors().fields.size());
  auto put_u64 = [&out](std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); };
  put_u64(kind);
  put_u64(rows);
  put_u64(cols);
  put_u64(n_fields);
  for (const auto& name : F.type_descriptors().fields) {
    const std::uint64_t len = name.size();
    put_u64(len);
    out.write(name.data(), static_cast<std::streamsize>(len));
  }
  std::vector<double> row(static_cast<std::size_t>(cols));
  for (std::uint64_t i = 0; i < rows; ++i) {
    for (std::uint64_t j = 0; j < cols; ++j) row[j] = F.entries()(static_cast<Index>(i), static_cast<Index>(j));
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(cols * 8));
  }
  for (std::uint64_t f = 0; f < n_fields; ++f) {
    for (std::uint64_t j = 0; j < cols; ++j) row[j] = F.type_descriptors().values(static_cast<Index>(f), static_cast<Index>(j));
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(cols * 8));
  }
  if (!out) throw std::runtime_error("save_density_matrix: write failed for " + path.string());
}

DensityMatrix load_density_matrix(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_density_matrix: cannot open " + path.string());
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kCacheMagic, 8) != 0) {
    throw std::runtime_error("load_density_matrix: bad magic in " + path.string());
  }
  auto get_u64 = [&in]() {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 8);
    return v;
  };
  const std::uint64_t kind = get_u64();
  const std::uint64_t rows = get_u64();
  const std::uint64_t cols = get_u64();
  const std::uint64_t n_fields = get_u64();
  TypeDescriptors types;
  for (std::uint64_t f = 0; f < n_fields; ++f) {
    const std::uint64_t len = get_u64();
    std::string name(len, '\0');
    in.read(name.data(), static_cast<std::streamsize>(len));
    types.fields.push_back(std::move(name));
  }
  Matrix entries(static_cast<Index>(rows), static_cast<Index>(cols));
  std::vector<double> row(static_cast<std::size_t>(cols));
  for (std::uint64_t i = 0; i < rows; ++i) {
    in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(cols * 8));
    for (std::uint64_t j = 0; j < cols; ++j) entries(static_cast<Index>(i), static_cast<Index>(j)) = row[j];
  }
  if (n_fields > 0) {
    types.values.resize(static_cast<Index>(n_fields), static_cast<Index>(cols));
    for (std::uint64_t f = 0; f < n_fields; ++f) {
      in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(cols * 8));
      for (std::uint64_t j = 0; j < cols; ++j) types.values(static_cast<Index>(f), static_cast<Index>(j)) = row[j];
    }
  }
  if (!in) throw std::runtime_error("load_density_matrix: truncated file " + path.string());
  return kind == 0 ? DensityMatrix::discrete(std::move(entries), {}, std::move(types))
                   : DensityMatrix::continuous(std::move(entries), {}, std::move(types));
}

}  // namespace npeb
