#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "emorf/forest.hpp"
#include "emorf/labels.hpp"

namespace emorf::cli {

enum ExitCode : int { kOk = 0, kInputError = 2, kRuntimeError = 3 };

struct RunConfig {
  std::string command;
  std::filesystem::path data;
  std::filesystem::path out;
  std::filesystem::path model;
  labels::LabelMode label_mode = labels::LabelMode::kQuad;
  forest::ForestParams forest;
  bool balanced = false;
  double ratio = 6.0;
  std::string protocol = "oob";
  std::optional<double> rho;
  std::string dimension = "valence";
  std::size_t folds = 10;
  bool personalized = false;
  bool pooled = false;
  bool normalize = true;
  unsigned workers = 1;

  /// Throws input_error on inconsistent settings.
  void validate() const;
  nlohmann::json to_json() const;
};

/// Default neighbour threshold: 0.35 for valence, 0.30 for arousal.
double default_rho(const std::string& dimension);

/// Parses argv and runs one subcommand; returns the process exit code.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);

}  // namespace emorf::cli
