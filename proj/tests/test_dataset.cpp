#include <doctest.h>

#include "helpers.hpp"
#include "svpsf/dataset.hpp"
#include "svpsf/error.hpp"

using namespace svpsf;

namespace {

DatasetConfig small_config(PsfModel model) {
  DatasetConfig c;
  c.sources = {SourceTag::Poi, SourceTag::Syn};
  c.model = model;
  c.count = 24;
  c.patch_size = 32;
  c.kernel_side = 31;
  c.source_size = 96;
  c.pool_size = 2;
  c.points_per_source = 30;
  c.cells_per_source = 12;
  c.pupil.side = 64;
  c.seed = 5;
  return c;
}

}  // namespace

TEST_SUITE("dataset") {
  TEST_CASE("source tags") {
    CHECK(parse_source_tag("micr") == SourceTag::Micr);
    CHECK(to_string(SourceTag::Syn) == "syn");
    CHECK_THROWS_AS(parse_source_tag("foo"), Error);
  }

  TEST_CASE("configuration checks") {
    DatasetConfig c = small_config(PsfModel::Gaussian1);
    c.kernel_side = 30;
    CHECK_THROWS_AS(c.validate(), Error);
    c = small_config(PsfModel::Gaussian1);
    c.patch_size = 128;
    CHECK_THROWS_AS(c.validate(), Error);
    c = small_config(PsfModel::Gaussian1);
    c.sources = {SourceTag::Micr};
    CHECK_THROWS_AS(generate_dataset(c), Error);
  }

  TEST_CASE("generation is deterministic and labelled") {
    const DatasetConfig c = small_config(PsfModel::Zernike3);
    const TrainingSet a = generate_dataset(c);
    const TrainingSet b = generate_dataset(c);
    CHECK(a == b);
    CHECK(manifest_checksum(a) == manifest_checksum(b));
    CHECK(a.samples.size() >= static_cast<std::size_t>(c.count));
    int black = 0;
    for (std::size_t i = 0; i < a.samples.size(); ++i) {
      const auto& s = a.samples[i];
      CHECK(s.patch.width() == 32);
      CHECK(s.params.model == PsfModel::Zernike3);
      CHECK(c.ranges.contains(s.params));
      if (s.source_index < 0) {
        ++black;
        CHECK(s.params.a0 == 1.0);
      }
    }
    CHECK(black >= 1);
    DatasetConfig other = c;
    other.seed = 6;
    CHECK(manifest_checksum(generate_dataset(other)) != manifest_checksum(a));
  }

  TEST_CASE("samples can be re-degraded from their manifest") {
    const DatasetConfig c = small_config(PsfModel::Gaussian2);
    const TrainingSet set = generate_dataset(c);
    const auto pool = build_source_pool(c);
    for (std::size_t i = 0; i < set.samples.size(); i += 5) {
      const auto& s = set.samples[i];
      if (s.source_index < 0) continue;
      CHECK(max_abs_diff(redegrade_sample(set, pool, s), s.patch) < 1e-12);
    }
  }

  TEST_CASE("directory round trip") {
    const auto dir = test::temp_dir("dataset_rt");
    const TrainingSet set = generate_dataset(small_config(PsfModel::Gaussian1));
    write_training_set(dir, set);
    const TrainingSet back = read_training_set(dir);
    CHECK(back.samples.size() == set.samples.size());
    CHECK(back.config == set.config);
    for (std::size_t i = 0; i < set.samples.size(); ++i) {
      CHECK(back.samples[i].params == set.samples[i].params);
      CHECK(max_abs_diff(back.samples[i].patch, set.samples[i].patch) <= 0.51 / set.png_scale);
    }
    CHECK(manifest_checksum(read_training_set(dir)) == manifest_checksum(back));
    CHECK_THROWS_AS(read_training_set(dir / "missing"), Error);
  }
}
