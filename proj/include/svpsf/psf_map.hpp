#pragma once

#include <filesystem>
#include <functional>
#include <vector>

#include "svpsf/estimator.hpp"
#include "svpsf/image.hpp"
#include "svpsf/psf.hpp"

namespace svpsf {

struct MapConfig {
  int patch_w = 64;
  int patch_h = 64;
  int stride = 32;
  double validity_threshold = 0.5;

  void validate() const;
  bool operator==(const MapConfig&) const = default;
};

// floor((extent - patch) / stride) + 1, or 0 when the patch does not fit.
int grid_count(int extent, int patch, int stride);

// Row-major grid of per-window estimates. Invalid cells carry a0 = 1, valid cells a0 = 0.
struct ParamMap {
  PsfModel model = PsfModel::Gaussian1;
  int grid_w = 0;
  int grid_h = 0;
  int image_w = 0;
  int image_h = 0;
  MapConfig config;
  std::vector<PsfParams> cells;

  PsfParams& at(int col, int row) { return cells[static_cast<std::size_t>(row) * grid_w + col]; }
  const PsfParams& at(int col, int row) const { return cells[static_cast<std::size_t>(row) * grid_w + col]; }
  int anchor_x(int col) const noexcept { return col * config.stride; }
  int anchor_y(int row) const noexcept { return row * config.stride; }
  int invalid_count() const;

  bool operator==(const ParamMap&) const = default;
};

// Empty map with the grid laid out for an image, every cell zero-initialized and valid.
ParamMap make_param_map(int image_w, int image_h, PsfModel model, const MapConfig& config);

using PatchEstimator = std::function<PsfParams(const Image& patch, int col, int row)>;

ParamMap map_params(const Image& image, const RegressorModel& model, const MapConfig& config);
ParamMap map_params(const Image& image, PsfModel model, const MapConfig& config, const PatchEstimator& estimate);

// Inverse-distance weighted average of the nearest valid cells (at least four, completing the
// ring), searched over 4-connected rings up to depth 8; beyond that the mean of all valid cells.
ParamMap infill_invalid(const ParamMap& map);

std::vector<Psf> psfs_from_map(const ParamMap& map, int kernel_side, const PupilConfig& pupil = {});

// CSV rows (row, col, anchor_x, anchor_y, a0, a1..aN) plus a JSON sidecar with the same stem.
void write_param_map(const std::filesystem::path& csv_path, const ParamMap& map);
ParamMap read_param_map(const std::filesystem::path& csv_path);

// Kernels tiled on the map grid, each scaled to its own maximum.
void write_psf_montage(const std::filesystem::path& path, std::span<const Psf> bank, int grid_w, int grid_h);

}  // namespace svpsf
