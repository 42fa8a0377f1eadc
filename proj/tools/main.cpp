#include <algorithm>
#include <iostream>
#include <map>

#include "CLI11.hpp"
#include "commands.hpp"
#include "lofi/errors.hpp"

namespace {

int exit_code(const std::string& category) {
  static const std::map<std::string, int> codes{
      {"UsageError", 64},       {"InvalidInput", 2},     {"IoError", 3},
      {"FormatError", 4},       {"SingularSystem", 5},   {"NotPSD", 6},
      {"DegenerateLabels", 7},  {"ZeroLinearComponent", 8}, {"ZeroSpectrum", 9},
      {"DegenerateFeatures", 10}, {"ConvergenceError", 11},
  };
  const auto it = codes.find(category);
  return it == codes.end() ? 1 : it->second;
}

int fail(const std::string& category, const std::string& message) {
  std::cerr << "error: " << category << ": " << message << "\n";
  return exit_code(category);
}

std::string flag_name(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return "--" + key;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace lofi::cli;
  CLI::App app{"Layerwise low-degree feature learning (LoFi)"};
  app.require_subcommand(1);

  std::map<std::string, std::map<std::string, std::string>> storage;
  std::map<std::string, std::string> config_paths;
  std::map<std::string, std::vector<std::pair<std::string, CLI::Option*>>> options;
  std::map<std::string, CLI::App*> subs;
  for (const std::string& verb : kVerbs) {
    CLI::App* sub = app.add_subcommand(verb);
    subs[verb] = sub;
    sub->add_option("--config", config_paths[verb], "key=value file (or a previous report)");
    for (const KeySpec& k : verb_keys(verb)) {
      std::string help = k.help;
      if (!k.default_value.empty()) help += " [" + k.default_value + "]";
      CLI::Option* opt = sub->add_option(flag_name(k.key), storage[verb][k.key], help);
      options[verb].emplace_back(k.key, opt);
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("UsageError", e.what());
  }

  for (const std::string& verb : kVerbs) {
    if (!subs[verb]->parsed()) continue;
    try {
      std::map<std::string, std::string> overrides;
      for (const auto& [key, opt] : options[verb]) {
        if (opt->count() > 0) overrides[key] = storage[verb][key];
      }
      std::optional<std::filesystem::path> config_file;
      if (!config_paths[verb].empty()) config_file = config_paths[verb];
      const RunConfig config = resolve_config(verb, config_file, overrides);
      const Report report = run_command(config);
      const auto path = report_path(config);
      if (path.empty()) {
        std::cout << report.dump();
      } else {
        report.write(path);
        std::cout << "wrote " << path.string() << "\n";
      }
      if (verb == "gdcheck") {
        std::cerr << "gdcheck: " << (report.doc()["metrics"]["pass"].get<bool>() ? "PASS" : "FAIL")
                  << "\n";
      }
      return 0;
    } catch (const lofi::Error& e) {
      return fail(e.category(), e.what());
    } catch (const std::exception& e) {
      return fail("InternalError", e.what());
    }
  }
  return fail("UsageError", "no command given");
}
