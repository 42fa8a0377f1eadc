#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "report.hpp"

namespace lofi::cli {

inline const std::vector<std::string> kVerbs{"fit",       "predict", "spectrum",
                                             "emergence", "synth",   "gdcheck"};

struct KeySpec {
  std::string key;
  std::string default_value;
  std::string help;
};

/// Every key a verb accepts, with its default. Keys map to --key-name flags.
const std::vector<KeySpec>& verb_keys(const std::string& verb);

/// Effective parameters of one run: defaults, then the config file, then flags.
struct RunConfig {
  std::string verb;
  std::map<std::string, std::string> values;

  const std::string& str(const std::string& key) const;
  double number(const std::string& key) const;
  Index integer(const std::string& key) const;
  bool flag(const std::string& key) const;
  std::uint64_t seed() const;
  std::vector<Index> index_list(const std::string& key) const;
  std::vector<double> number_list(const std::string& key) const;
};

/// key=value per line; '#' starts a comment. A .report file is accepted too,
/// in which case its echoed config is used.
std::map<std::string, std::string> read_config_file(const std::filesystem::path& path);

RunConfig resolve_config(const std::string& verb,
                         const std::optional<std::filesystem::path>& config_file,
                         const std::map<std::string, std::string>& overrides);

/// "lo:hi:count" for a log grid or a comma-separated list.
std::vector<double> parse_grid(const std::string& text);

Report run_command(const RunConfig& config);

/// Where the report goes; empty means stdout.
std::filesystem::path report_path(const RunConfig& config);

}  // namespace lofi::cli
