#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "svpsf/dataset.hpp"
#include "svpsf/deconv.hpp"
#include "svpsf/estimator.hpp"
#include "svpsf/psf_map.hpp"

namespace svpsf {

inline constexpr const char* kVersion = "0.1.0";

struct PipelineConfig {
  DatasetConfig dataset;  // also carries the PSF model, ranges, pupil, kernel side and patch size
  std::vector<TrainConfig> train_grid{TrainConfig{}};
  MapConfig map;
  DeconvConfig deconv;
  int deconv_kernel_side = 63;
  std::filesystem::path micr_dir;
  std::filesystem::path nat_dir;

  // Cross-stage consistency; throws ErrorKind::Config.
  void validate() const;
};

// INI sections and keys with their defaults and help text.
struct ConfigKey {
  std::string section;
  std::string key;
  std::string help;
};
std::vector<ConfigKey> config_schema();

PipelineConfig default_config();
// Keys absent from the text keep their defaults; unknown keys are rejected.
PipelineConfig parse_config(const std::string& ini_text);
PipelineConfig load_config(const std::filesystem::path& path);
// Effective configuration as INI text with help comments.
std::string render_config(const PipelineConfig& config);
std::uint64_t config_hash(const PipelineConfig& config);

// <dir>/provenance.json or <file>.provenance.json beside an output file.
void write_provenance(const std::filesystem::path& output, const std::string& command, const PipelineConfig& config,
                      const std::vector<std::string>& args);

}  // namespace svpsf
