// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <json.hpp>
#include <string>
#include <vector>

#include "fmbrdf/reflectometry.hpp"
#include "fmbrdf/scene.hpp"
#include "fmbrdf/surrogate.hpp"

namespace fmbrdf::cli {

/// Validation thresholds applied by train-surrogate.
struct QualityThresholds {
  double maxRelErrS0 = 0.02;
  double maxAbsErrDolp = 0.02;
};

struct CurveOptions {
  std::vector<double> sweepAnglesDeg;  // empty: no planar sweep
};

/// Everything a command can read from a config file. Angles are given in
/// degrees in the file and stored in radians.
struct Config {
  SceneSpec scene;
  FitConfig fit;
  double minCosView = 0.1;
  double minCosLight = 0.1;
  TrainingRecipe surrogate;
  std::string surrogatePath;
  QualityThresholds thresholds;
  CurveOptions curves;
  /// FNV-1a of the canonical (defaults filled, sorted) JSON dump.
  std::uint64_t hash = 0;
  nlohmann::json canonical;
};

/// Parses a version-1 config. Missing fields keep their defaults; unknown
/// keys, wrong types and out-of-range values throw config errors.
Config parse_config(const nlohmann::json& j);
Config load_config(const std::string& path);

/// The config with every default filled in.
nlohmann::json to_json(const Config& c);

std::uint64_t fnv1a(const std::string& bytes);
std::uint64_t file_hash(const std::string& path);
std::string hex64(std::uint64_t v);

}  // namespace fmbrdf::cli
