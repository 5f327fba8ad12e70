#pragma once

#include "npeb/discrimination.hpp"
#include "npeb/identification.hpp"
#include "npeb/solver.hpp"
#include "npeb/studies.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace npeb {

// Key order is fixed so identical runs serialize byte-identically.
using Json = nlohmann::ordered_json;

Json to_json(const StabilityCertificate& c);
Json to_json(const SolveResult& r, const DensityMatrix* F = nullptr);
Json to_json(const IdentificationReport& r);
Json to_json(const DiscriminationReport& r);
Json to_json(const IndependenceTestResult& r);
Json to_json(const NestedGridStudy& s);
Json to_json(const ConsistencyStudy& s);

std::string report_csv(const DiscriminationReport& r);
std::string trace_csv(const std::vector<TraceRow>& trace);
std::string grid_study_csv(const NestedGridStudy& s);
std::string consistency_csv(const ConsistencyStudy& s);

// FNV-1a hash of the canonical dump; cache key for generated matrices.
std::string config_content_hash(const Json& config);

void write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace npeb
