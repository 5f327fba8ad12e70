#include "npeb/studies.hpp"

#include "npeb/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace npeb {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

bool grid_nested_in(const Grid1D& coarse, const Grid1D& fine) {
  for (const double p : coarse.points) {
    bool found = false;
    for (const double q : fine.points) {
      if (std::abs(p - q) <= 1e-12) {
        found = true;
        break;
      }
    }
    if (!found) return false;
  }
  return true;
}

double mixture_density(const std::vector<double>& atoms, const std::vector<double>& weights,
                       double sigma, double x) {
  const double norm = 1.0 / (sigma * std::sqrt(2.0 * M_PI));
  double f = 0.0;
  for (std::size_t m = 0; m < atoms.size(); ++m) {
    const double z = (x - atoms[m]) / sigma;
    f += weights[m] * norm * std::exp(-0.5 * z * z);
  }
  return f;
}

}  // namespace

double wasserstein_1d(const std::vector<double>& points_a, const std::vector<double>& weights_a,
                      const std::vector<double>& points_b, const std::vector<double>& weights_b) {
  require(points_a.size() == weights_a.size() && points_b.size() == weights_b.size(),
          "wasserstein_1d: points/weights size mismatch");
  struct Atom {
    double x, wa, wb;
  };
  std::vector<Atom> atoms;
  atoms.reserve(points_a.size() + points_b.size());
  for (std::size_t i = 0; i < points_a.size(); ++i) atoms.push_back({points_a[i], weights_a[i], 0.0});
  for (std::size_t i = 0; i < points_b.size(); ++i) atoms.push_back({points_b[i], 0.0, weights_b[i]});
  std::sort(atoms.begin(), atoms.end(), [](const Atom& l, const Atom& r) { return l.x < r.x; });
  // W1 = integral of |CDF_a - CDF_b|.
  double w = 0.0;
  double cdf_gap = 0.0;
  for (std::size_t i = 0; i + 1 <= atoms.size(); ++i) {
    cdf_gap += atoms[i].wa - atoms[i].wb;
    if (i + 1 < atoms.size()) w += std::abs(cdf_gap) * (atoms[i + 1].x - atoms[i].x);
  }
  return w;
}

NestedGridStudy nested_grid_study(const std::function<DensityMatrix(const Grid1D&)>& build,
                                  const std::vector<Grid1D>& grids, const CountVector& b,
                                  const SolveConfig& solve_cfg) {
  require(!grids.empty(), "nested_grid_study: no grids");
  for (std::size_t g = 0; g + 1 < grids.size(); ++g) {
    require(grids[g].size() <= grids[g + 1].size() && grid_nested_in(grids[g], grids[g + 1]),
            "nested_grid_study: grids are not nested");
  }

  NestedGridStudy study;
  Index Ibar = 0;
  for (Index i = 0; i < b.size(); ++i) {
    if (b[i] != 0) ++Ibar;
  }
  study.Ibar = Ibar;
  const bool boundary = Ibar < b.size();

  const Grid1D* prev_grid = nullptr;
  const SolveResult* prev_result = nullptr;
  for (const Grid1D& grid : grids) {
    const DensityMatrix F = build(grid);
    SolveResult result = solve_fixed_point(F, b, solve_cfg);

    GridStudyRow row;
    row.grid_size = grid.size();
    row.log_likelihood_normalized = result.log_likelihood_normalized;
    row.support_size = static_cast<Index>(result.support.size());
    row.support_bound_ok = !boundary || row.support_size <= Ibar;
    row.converged = result.converged;
    if (prev_result != nullptr) {
      std::vector<double> pa, wa, pb, wb;
      for (const Index j : prev_result->support) {
        pa.push_back(prev_grid->points[static_cast<std::size_t>(j)]);
        wa.push_back(prev_result->pi_hat[j]);
      }
      for (const Index j : result.support) {
        pb.push_back(grid.points[static_cast<std::size_t>(j)]);
        wb.push_back(result.pi_hat[j]);
      }
      row.wasserstein_from_previous = wasserstein_1d(pa, wa, pb, wb);
    }
    study.rows.push_back(row);
    study.results.push_back(std::move(result));
    prev_grid = &grid;
    prev_result = &study.results.back();
  }
  return study;
}

void ConsistencyStudyConfig::validate() const {
  require(!atom_locations.empty() && atom_locations.size() == atom_weights.size(),
          "consistency_study: bad true mixing distribution");
  double wsum = 0.0;
  for (const double w : atom_weights) {
    require(w >= 0.0, "consistency_study: negative atom weight");
    wsum += w;
  }
  require(std::abs(wsum - 1.0) <= 1e-9, "consistency_study: atom weights must sum to 1");
  require(kernel_sigma > 0.0, "consistency_study: sigma must be positive");
  require(!sample_sizes.empty(), "consistency_study: no sample sizes");
  for (std::size_t i = 0; i + 1 < sample_sizes.size(); ++i) {
    require(sample_sizes[i] < sample_sizes[i + 1], "consistency_study: sizes must increase");
  }
  require(n_seeds >= 1, "consistency_study: need at least one seed");
  require(eval_points >= 3, "consistency_study: eval grid too small");
  type_grid.validate(false);
}

ConsistencyStudy consistency_study(const ConsistencyStudyConfig& cfg) {
  cfg.validate();
  ConsistencyStudy study;

  // Held-out evaluation grid spanning the truth plus kernel tails.
  const double lo = *std::min_element(cfg.atom_locations.begin(), cfg.atom_locations.end()) -
                    5.0 * cfg.kernel_sigma;
  const double hi = *std::max_element(cfg.atom_locations.begin(), cfg.atom_locations.end()) +
                    5.0 * cfg.kernel_sigma;
  const Grid1D eval = Grid1D::uniform(lo, hi, cfg.eval_points);
  const double dx = (hi - lo) / static_cast<double>(cfg.eval_points - 1);
  std::vector<double> truth(static_cast<std::size_t>(cfg.eval_points));
  double mass = 0.0;
  for (Index e = 0; e < cfg.eval_points; ++e) {
    truth[static_cast<std::size_t>(e)] = mixture_density(
        cfg.atom_locations, cfg.atom_weights, cfg.kernel_sigma, eval.points[static_cast<std::size_t>(e)]);
    mass += truth[static_cast<std::size_t>(e)] * dx;
  }

  const GaussianLocationKernel kernel{cfg.kernel_sigma};
  for (int s = 0; s < cfg.n_seeds; ++s) {
    for (const Index k : cfg.sample_sizes) {
      Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(s) * 1000003ULL +
                                        static_cast<std::uint64_t>(k)));
      Vector xs(k);
      for (Index n = 0; n < k; ++n) {
        // Draw the latent atom, then add kernel noise.
        const double u = rng.uniform01();
        double acc = 0.0;
        double atom = cfg.atom_locations.back();
        for (std::size_t m = 0; m < cfg.atom_weights.size(); ++m) {
          acc += cfg.atom_weights[m];
          if (u < acc) {
            atom = cfg.atom_locations[m];
            break;
          }
        }
        xs[n] = atom + cfg.kernel_sigma * rng.normal();
      }

      const DensityMatrix F = build_F_continuous(xs, kernel, cfg.type_grid);
      const CountVector ones(std::vector<std::int64_t>(static_cast<std::size_t>(k), 1));
      const SolveResult fit = solve_fixed_point(F, ones, cfg.solve);

      // Density-weighted mean log gap on the held-out grid (a KL proxy).
      double gap = 0.0;
      for (Index e = 0; e < cfg.eval_points; ++e) {
        const double x = eval.points[static_cast<std::size_t>(e)];
        double fhat = 0.0;
        for (const Index j : fit.support) {
          const double z = (x - cfg.type_grid.points[static_cast<std::size_t>(j)]) / cfg.kernel_sigma;
          fhat += fit.pi_hat[j] * std::exp(-0.5 * z * z);
        }
        fhat /= cfg.kernel_sigma * std::sqrt(2.0 * M_PI);
        const double t = truth[static_cast<std::size_t>(e)];
        if (t > 0.0 && fhat > 0.0) gap += t * dx / mass * (std::log(t) - std::log(fhat));
      }

      ConsistencyRow row;
      row.sample_size = k;
      row.seed_index = s;
      row.kl_proxy = gap;
      row.support_size = static_cast<Index>(fit.support.size());
      row.converged = fit.converged;
      study.rows.push_back(row);
    }
  }

  // Least-squares slope of kl_proxy on log10(k), pooled over seeds.
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  const double n = static_cast<double>(study.rows.size());
  for (const auto& row : study.rows) {
    const double x = std::log10(static_cast<double>(row.sample_size));
    sx += x;
    sy += row.kl_proxy;
    sxx += x * x;
    sxy += x * row.kl_proxy;
  }
  const double denom = n * sxx - sx * sx;
  study.trend_slope = denom == 0.0 ? 0.0 : (n * sxy - sx * sy) / denom;
  return study;
}

}  // namespace npeb
