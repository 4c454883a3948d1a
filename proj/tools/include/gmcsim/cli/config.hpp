#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include "json.hpp"

#include "gmcsim/analysis.hpp"
#include "gmcsim/devmodel.hpp"
#include "gmcsim/diffpair.hpp"
#include "gmcsim/dynamp.hpp"

namespace gmcsim::cli {

inline constexpr int kSchemaVersion = 1;

/// Invalid or unreadable configuration; `key` is the dotted path of the
/// offending entry.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& message)
      : std::runtime_error(key.empty() ? message : key + ": " + message), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

struct TransferExperiment {
  double v_start = -0.1;
  double v_stop = 0.1;
  int n_points = 201;
};

struct FlatnessExperiment {
  double window = 0.04;
  diffpair::RatioGrid grid;
};

struct CalibrationExperiment {
  double target_gain = 15.7;
  double probe_vin = 1e-3;
};

/// Everything a run needs. Temperatures are kelvin, all other quantities SI.
struct RunConfig {
  int schema_version = kSchemaVersion;
  devmodel::DeviceParams device;
  devmodel::Environment nominal;
  dynamp::AmpConfig proposed = dynamp::default_proposed();
  dynamp::AmpConfig traditional = dynamp::default_traditional();
  std::optional<dynamp::AmpConfig> linear;
  TransferExperiment transfer;
  analysis::ThdOptions thd;
  analysis::CornerSpec corners;
  FlatnessExperiment flatness;
  CalibrationExperiment calibration;
  std::string output_dir;
  bool strict = false;

  /// Amplifier config for a topology; ConfigError when `linear` is requested
  /// but absent.
  const dynamp::AmpConfig& amp(dynamp::Topology topology) const;
  dynamp::AmpConfig& amp(dynamp::Topology topology);
};

RunConfig default_config();

/// Parses and validates. In strict mode unknown keys are rejected.
RunConfig parse_config(const nlohmann::json& doc, bool strict);
RunConfig load_config(const std::filesystem::path& path, bool strict);

/// Runs every module-level invariant check; throws ConfigError.
void validate_config(const RunConfig& cfg);

nlohmann::json to_json(const RunConfig& cfg);
std::string dump_config(const RunConfig& cfg);

/// SHA-256 over the canonical JSON of everything that influences results
/// (output_dir excluded), hex encoded.
std::string fingerprint(const RunConfig& cfg);

}  // namespace gmcsim::cli
