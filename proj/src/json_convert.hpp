#pragma once

#include <json.hpp>

#include "svpsf/dataset.hpp"
#include "svpsf/estimator.hpp"
#include "svpsf/nn.hpp"
#include "svpsf/psf.hpp"

namespace svpsf {

using json = nlohmann::json;

inline void to_json(json& j, PsfModel m) { j = std::string(to_string(m)); }
inline void from_json(const json& j, PsfModel& m) { m = parse_psf_model(j.get<std::string>()); }
inline void to_json(json& j, SourceTag t) { j = std::string(to_string(t)); }
inline void from_json(const json& j, SourceTag& t) { t = parse_source_tag(j.get<std::string>()); }

inline void to_json(json& j, const ParamRange& r) { j = json::array({r.lo, r.hi}); }
inline void from_json(const json& j, ParamRange& r) {
  r.lo = j.at(0).get<double>();
  r.hi = j.at(1).get<double>();
}

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ParamRanges, defocus, cylinder, axis, variance)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(PupilConfig, side, aperture_radius, wavelength)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ValidityConfig, var_threshold, white_ratio_threshold)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(DatasetConfig, sources, model, count, patch_size, kernel_side, ranges, pupil,
                                   noise, beta, sigma_rel, photon_peak, black_fraction, validity, source_size,
                                   pool_size, points_per_source, cells_per_source, seed)

namespace nn {
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(BlockSpec, out_channels, stride)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ArchSpec, input_side, stem_channels, blocks, hidden, outputs)
}  // namespace nn

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(TrainingMeta, epochs, best_epoch, learning_rate, batch_size, gamma, seed,
                                   best_val_loss, train_samples)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(TrainConfig, learning_rate, epochs, batch_size, gamma, seed)

}  // namespace svpsf
