#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "lofi/linalg.hpp"

namespace lofi::cli {

using Json = nlohmann::ordered_json;

inline constexpr int kReportSchemaVersion = 1;
inline constexpr const char* kLibraryVersion = "1.0.0";

/// Structured run report. Every number is checked to be finite on insertion.
class Report {
 public:
  Report(std::string command, std::uint64_t seed, const std::map<std::string, std::string>& config);

  Json& metrics() { return doc_["metrics"]; }
  Json& section(const std::string& name) { return doc_[name]; }
  const Json& doc() const { return doc_; }

  void warn(const std::string& message);
  /// Stores the elapsed time since construction under timings.total_seconds.
  void finish();

  std::string dump() const { return doc_.dump(2) + "\n"; }
  void write(const std::filesystem::path& path) const;

 private:
  Json doc_;
  std::chrono::steady_clock::time_point start_;
};

double finite(double v, const std::string& what);
Json to_json(const Vector& v, const std::string& what);
Json to_json(const std::vector<double>& v, const std::string& what);

}  // namespace lofi::cli
