#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "svpsf/degrade.hpp"
#include "svpsf/image.hpp"
#include "svpsf/psf.hpp"

namespace svpsf {

enum class SourceTag { Poi, Syn, Micr, Nat };

std::string_view to_string(SourceTag tag) noexcept;
SourceTag parse_source_tag(std::string_view text);

// Sharp source image with intensities normalized to [0, 1].
struct SourceImage {
  SourceTag tag = SourceTag::Poi;
  Image image;
};

// Loads every PNG in a directory (sorted by name), normalized to peak 1.
std::vector<SourceImage> load_image_folder(const std::filesystem::path& dir, SourceTag tag);

struct DatasetConfig {
  std::vector<SourceTag> sources{SourceTag::Poi};
  PsfModel model = PsfModel::Gaussian1;
  int count = 1000;  // K, textured draws before the black samples are appended
  int patch_size = 64;
  int kernel_side = 63;
  ParamRanges ranges;
  PupilConfig pupil;
  bool noise = true;
  double beta = 1.0;
  double sigma_rel = 0.02;  // read noise as a fraction of photon_peak
  double photon_peak = 1000.0;
  double black_fraction = 0.05;
  ValidityConfig validity;
  int source_size = 256;
  int pool_size = 16;  // synthetic sources per tag
  int points_per_source = 80;
  int cells_per_source = 40;
  std::uint64_t seed = 1;

  void validate() const;
  bool operator==(const DatasetConfig&) const = default;
};

struct TrainingSample {
  Image patch;
  PsfParams params;
  SourceTag source_tag = SourceTag::Poi;
  std::uint64_t seed = 0;  // global seed XOR sample index
  int source_index = -1;   // -1 for appended black samples
  int rotation = 0;        // quarter turns applied to the source
  int crop_x = 0;
  int crop_y = 0;
  bool operator==(const TrainingSample&) const = default;
};

struct TrainingSet {
  DatasetConfig config;
  // Patch values are quantized as level = round((v + png_offset) * png_scale).
  double png_offset = 0.0;
  double png_scale = 1.0;
  std::vector<TrainingSample> samples;

  bool operator==(const TrainingSet&) const = default;
};

// Deterministic pool of sharp sources: synthetic tags are generated from the config seed,
// micr/nat tags are taken from `user_images`.
std::vector<SourceImage> build_source_pool(const DatasetConfig& config,
                                           std::span<const SourceImage> user_images = {});

TrainingSet generate_dataset(const DatasetConfig& config, std::span<const SourceImage> user_images = {});

// Re-renders the PSF from the stored parameters and re-degrades the stored source crop with
// the stored seed. For a sample produced by generate_dataset this reproduces its patch exactly.
Image redegrade_sample(const TrainingSet& set, std::span<const SourceImage> pool, const TrainingSample& sample);

// Checksum of the manifest rows and patch contents.
std::uint64_t manifest_checksum(const TrainingSet& set);

// Directory layout: header.json, manifest.csv, patches/NNNNNN.png (16-bit).
void write_training_set(const std::filesystem::path& dir, const TrainingSet& set);
TrainingSet read_training_set(const std::filesystem::path& dir);

}  // namespace svpsf
