#include "npeb/serialize.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace npeb {

namespace {

Json finite_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

std::string format_double(double v, int precision) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

}  // namespace

Json to_json(const StabilityCertificate& c) {
  Json j;
  j["coherence_residual"] = c.coherence_residual;
  j["stability_residual"] = finite_or_null(c.stability_residual);
  j["tol_coherence"] = c.tol_coherence;
  j["tol_stability"] = c.tol_stability;
  j["pass"] = c.pass;
  return j;
}

Json to_json(const SolveResult& r, const DensityMatrix* F) {
  Json j;
  j["converged"] = r.converged;
  j["iterations"] = r.iterations;
  j["log_likelihood"] = r.log_likelihood;
  j["log_likelihood_normalized"] = r.log_likelihood_normalized;
  j["kl"] = r.kl;
  j["support_size"] = static_cast<std::int64_t>(r.support.size());
  Json support = Json::array();
  for (const Index idx : r.support) {
    Json entry;
    entry["index"] = idx;
    entry["weight"] = r.pi_hat[idx];
    if (F != nullptr && !F->type_descriptors().empty()) {
      const auto& td = F->type_descriptors();
      Json params;
      for (std::size_t f = 0; f < td.fields.size(); ++f) {
        params[td.fields[f]] = td.value(f, idx);
      }
      entry["type"] = std::move(params);
    }
    support.push_back(std::move(entry));
  }
  j["support"] = std::move(support);
  j["certificate"] = to_json(r.certificate);
  j["flat_off_support_types"] = r.flat_off_support_types;
  j["warnings"] = r.warnings;
  return j;
}

Json to_json(const IdentificationReport& r) {
  Json j;
  j["regime"] =
      r.regime == DataRegime::kFullSupportData ? "full_support_data" : "boundary_data";
  j["rank_ok"] = r.rank_ok;
  j["checked_subsets"] = r.checked_subsets;
  switch (r.method) {
    case CheckMethod::kExhaustive: j["method"] = "exhaustive"; break;
    case CheckMethod::kRandomized: j["method"] = "randomized"; break;
    case CheckMethod::kSupportTargeted: j["method"] = "support_targeted"; break;
  }
  j["min_singular_value_seen"] = r.min_singular_value_seen;
  j["warnings"] = r.warnings;
  return j;
}

Json to_json(const DiscriminationReport& r) {
  Json j;
  j["converged"] = r.converged;
  j["support_size"] = r.support_size;
  j["Ibar"] = r.Ibar;
  j["support_bound_ok"] = r.support_bound_ok;
  j["log_likelihood"] = r.log_likelihood;
  j["kl"] = r.kl;
  j["max_fit_gap"] = r.max_fit_gap;
  Json rows = Json::array();
  for (const auto& row : r.rows) {
    Json jr;
    jr["c_f"] = row.c_f;
    jr["c_m"] = row.c_m;
    jr["count"] = row.count;
    jr["beta"] = row.beta;
    jr["p"] = row.fitted_p;
    jr["p_f"] = row.post_mean_f;
    jr["p_m"] = row.post_mean_m;
    jr["pr_f_greater"] = row.pr_f_greater;
    jr["pr_equal"] = row.pr_equal;
    jr["pr_f_less"] = row.pr_f_less;
    rows.push_back(std::move(jr));
  }
  j["rows"] = std::move(rows);
  j["identification"] = to_json(r.ident);
  j["solve"] = to_json(r.solve);
  j["warnings"] = r.warnings;
  return j;
}

Json to_json(const IndependenceTestResult& r) {
  Json j;
  j["p_value"] = r.p_value;
  j["observed_log_prob"] = r.observed_log_prob;
  j["n_sim"] = r.n_sim;
  j["n_at_most"] = r.n_at_most;
  j["seed"] = r.seed;
  return j;
}

Json to_json(const NestedGridStudy& s) {
  Json j;
  j["Ibar"] = s.Ibar;
  Json rows = Json::array();
  for (const auto& row : s.rows) {
    Json jr;
    jr["grid_size"] = row.grid_size;
    jr["log_likelihood_normalized"] = row.log_likelihood_normalized;
    jr["support_size"] = row.support_size;
    jr["wasserstein_from_previous"] = row.wasserstein_from_previous;
    jr["support_bound_ok"] = row.support_bound_ok;
    jr["converged"] = row.converged;
    rows.push_back(std::move(jr));
  }
  j["rows"] = std::move(rows);
  return j;
}

Json to_json(const ConsistencyStudy& s) {
  Json j;
  j["trend_slope"] = s.trend_slope;
  Json rows = Json::array();
  for (const auto& row : s.rows) {
    Json jr;
    jr["sample_size"] = row.sample_size;
    jr["seed_index"] = row.seed_index;
    jr["kl_proxy"] = row.kl_proxy;
    jr["support_size"] = row.support_size;
    jr["converged"] = row.converged;
    rows.push_back(std::move(jr));
  }
  j["rows"] = std::move(rows);
  return j;
}

std::string report_csv(const DiscriminationReport& r) {
  std::ostringstream os;
  os << "c_f,c_m,count,beta,p,p_f,p_m,pr_f_greater,pr_equal,pr_f_less\n";
  for (const auto& row : r.rows) {
    os << row.c_f << ',' << row.c_m << ',' << row.count << ',' << format_double(row.beta, 10)
       << ',' << format_double(row.fitted_p, 10) << ',' << format_double(row.post_mean_f, 10)
       << ',' << format_double(row.post_mean_m, 10) << ','
       << format_double(row.pr_f_greater, 10) << ',' << format_double(row.pr_equal, 10) << ','
       << format_double(row.pr_f_less, 10) << '\n';
  }
  return os.str();
}

std::string trace_csv(const std::vector<TraceRow>& trace) {
  std::ostringstream os;
  os << "iteration,log_likelihood_normalized,sup_residual,support_size\n";
  for (const auto& row : trace) {
    os << row.iteration << ',' << format_double(row.log_likelihood_normalized, 17) << ','
       << format_double(row.sup_residual, 10) << ',' << row.support_size << '\n';
  }
  return os.str();
}

std::string grid_study_csv(const NestedGridStudy& s) {
  std::ostringstream os;
  os << "grid_size,log_likelihood_normalized,support_size,wasserstein_from_previous,"
        "support_bound_ok,converged\n";
  for (const auto& row : s.rows) {
    os << row.grid_size << ',' << format_double(row.log_likelihood_normalized, 17) << ','
       << row.support_size << ',' << format_double(row.wasserstein_from_previous, 10) << ','
       << (row.support_bound_ok ? 1 : 0) << ',' << (row.converged ? 1 : 0) << '\n';
  }
  return os.str();
}

std::string consistency_csv(const ConsistencyStudy& s) {
  std::ostringstream os;
  os << "sample_size,seed_index,kl_proxy,support_size,converged\n";
  for (const auto& row : s.rows) {
    os << row.sample_size << ',' << row.seed_index << ',' << format_double(row.kl_proxy, 12)
       << ',' << row.support_size << ',' << (row.converged ? 1 : 0) << '\n';
  }
  return os.str();
}

std::string config_content_hash(const Json& config) {
  const std::string dump = config.dump();
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (const unsigned char c : dump) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << hash;
  return os.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace npeb
