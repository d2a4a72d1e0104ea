#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "svpsf/image.hpp"
#include "svpsf/psf.hpp"
#include "svpsf/psf_map.hpp"

namespace svpsf {

enum class DepthUnits { ModelUnits, Micrometers };

struct DepthCalibration {
  double alpha = 1.0;
  double beta = 0.0;
  bool operator==(const DepthCalibration&) const = default;
};

// Per-cell signed depth, row-major on the parameter map grid.
struct DepthMap {
  int grid_w = 0;
  int grid_h = 0;
  std::vector<double> z;
  DepthUnits units = DepthUnits::ModelUnits;
  std::optional<DepthCalibration> calibration;

  double& at(int col, int row) { return z[static_cast<std::size_t>(row) * grid_w + col]; }
  double at(int col, int row) const { return z[static_cast<std::size_t>(row) * grid_w + col]; }
  bool operator==(const DepthMap&) const = default;
};

// z = a1 (2 a3 / pi - 1) per cell; requires model Z-3.
DepthMap depth_from_params(const ParamMap& map);

enum class TiltAxis { Rows, Diagonal };

// Textured plane tilted about an in-plane axis through the image center, which sits in focus.
struct TiltedPlaneSpec {
  double tilt_deg = 3.0;
  double field_um = 655.0;  // image side
  TiltAxis axis = TiltAxis::Rows;
  std::uint64_t seed = 1;
  int image_size = 256;
  int patch = 32;
  int stride = 16;
  int kernel_side = 31;
  double defocus_per_um = 0.1;  // |a1| per micrometer of distance from focus
  double cylinder = 1.0;
  double axis_epsilon = 0.05;

  void validate() const;
  // End-to-end depth difference across the field.
  double depth_range_um() const;
  // Depth at a (possibly fractional) pixel position.
  double depth_at(double x, double y) const;
};

struct AstigmaticScene {
  Image sharp;
  Image blurred;
  ParamMap params;  // ground-truth Z-3 parameters per cell
  DepthMap depth;   // ground-truth depth at each cell center, micrometers
};

AstigmaticScene simulate_astigmatic_scene(const TiltedPlaneSpec& spec, const PupilConfig& pupil = {});

// Z-3 lattice over defocus with fixed cylinder and the two axis codes (epsilon, pi - epsilon).
ParamLattice depth_lattice(double defocus_max, double defocus_step, double cylinder, double axis_epsilon);

// Sliding-window parameter map from a grid-search oracle using the sharp reference.
ParamMap oracle_param_map(const Image& blurred, const Image& sharp, const GridSearchOracle& oracle, PsfModel model,
                          const MapConfig& config, int kernel_side);

struct DepthCalibrationReport {
  double alpha = 1.0;
  double beta = 0.0;
  double r2 = 1.0;
  double abs_err_um = 0.0;
  double rel_err_pct = 0.0;
};

// Least-squares fit gt = alpha * est + beta with the error of the calibrated estimate.
DepthCalibrationReport calibrate_depth(const DepthMap& est, const DepthMap& gt);
DepthMap apply_calibration(const DepthMap& est, const DepthCalibration& calibration);

// CSV grid (one line per row) plus a JSON sidecar holding units and calibration.
void write_depth_csv(const std::filesystem::path& path, const DepthMap& depth);
DepthMap read_depth_csv(const std::filesystem::path& path);
// Color-mapped PNG, each cell drawn as a cell_px square block.
void write_depth_png(const std::filesystem::path& path, const DepthMap& depth, int cell_px = 8);
void write_calibration_json(const std::filesystem::path& path, const DepthCalibrationReport& report);

}  // namespace svpsf
