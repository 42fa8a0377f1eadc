#include "report.hpp"

#include <cmath>
#include <fstream>

#include "lofi/errors.hpp"

namespace lofi::cli {

Report::Report(std::string command, std::uint64_t seed,
               const std::map<std::string, std::string>& config)
    : start_(std::chrono::steady_clock::now()) {
  doc_["schema"] = "lofi-report";
  doc_["schema_version"] = kReportSchemaVersion;
  doc_["library_version"] = kLibraryVersion;
  doc_["command"] = std::move(command);
  doc_["seed"] = seed;
  doc_["config"] = Json::object();
  for (const auto& [k, v] : config) doc_["config"][k] = v;
  doc_["metrics"] = Json::object();
  doc_["warnings"] = Json::array();
}

void Report::warn(const std::string& message) { doc_["warnings"].push_back(message); }

void Report::finish() {
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start_;
  doc_["timings"]["total_seconds"] = elapsed.count();
}

void Report::write(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << dump();
  if (!out) throw IoError("failed writing " + path.string());
}

double finite(double v, const std::string& what) {
  if (!std::isfinite(v)) throw InvalidInput("non-finite value for " + what);
  return v;
}

Json to_json(const Vector& v, const std::string& what) {
  Json out = Json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(finite(v(i), what));
  return out;
}

Json to_json(const std::vector<double>& v, const std::string& what) {
  Json out = Json::array();
  for (double x : v) out.push_back(finite(x, what));
  return out;
}

}  // namespace lofi::cli
