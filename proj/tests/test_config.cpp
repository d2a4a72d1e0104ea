#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "helpers.hpp"
#include "svpsf/config.hpp"
#include "svpsf/error.hpp"

using namespace svpsf;

namespace {

ErrorKind kind_of(const std::string& ini) {
  try {
    parse_config(ini).validate();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::Numerical;
}

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("defaults") {
    const PipelineConfig c = default_config();
    CHECK_NOTHROW(c.validate());
    CHECK(c.deconv.lambda_tv == 0.1);
    CHECK(c.deconv.iterations == 20);
    CHECK(c.map.stride == 32);
    CHECK(c.dataset.model == PsfModel::Gaussian1);
    CHECK(c.train_grid.size() == 1);
    CHECK(parse_config("").dataset == c.dataset);
  }

  TEST_CASE("values are parsed") {
    const PipelineConfig c = parse_config(
        "[psf]\nmodel = Z-3\nkernel_side = 31\n[ranges]\ndefocus = 0, 4\n[train]\nlearning_rates = 0.001, 0.003\n"
        "[map]\nstride = 16\n[deconv]\nlambda_tv = 0.02\n[dataset]\nsources = poi, syn\n");
    CHECK(c.dataset.model == PsfModel::Zernike3);
    CHECK(c.dataset.kernel_side == 31);
    CHECK(c.dataset.ranges.defocus.hi == 4.0);
    CHECK(c.train_grid.size() == 2);
    CHECK(c.train_grid[1].learning_rate == 0.003);
    CHECK(c.map.stride == 16);
    CHECK(c.deconv.lambda_tv == 0.02);
    CHECK(c.dataset.sources == std::vector<SourceTag>{SourceTag::Poi, SourceTag::Syn});
  }

  TEST_CASE("errors are configuration errors") {
    CHECK(kind_of("[psf]\nbogus = 1\n") == ErrorKind::Config);
    CHECK(kind_of("[nosuch]\nx = 1\n") == ErrorKind::Config);
    CHECK(kind_of("[psf]\nkernel_side = abc\n") == ErrorKind::Config);
    CHECK(kind_of("[deconv]\nlambda_tv = 1.5\n") == ErrorKind::Config);
    CHECK(kind_of("[dataset]\nsources = micr\n") == ErrorKind::Config);
    CHECK(kind_of("[psf]\npupil_side = 64\n") == ErrorKind::Config);
  }

  TEST_CASE("map window must match the regressor input") {
    PipelineConfig c = parse_config("[dataset]\npatch_size = 32\n");
    CHECK(c.map.patch_w == 32);
    CHECK_NOTHROW(c.validate());
    c.map.patch_w = 64;
    CHECK_THROWS_AS(c.validate(), Error);
  }

  TEST_CASE("render and parse round trip") {
    PipelineConfig c = default_config();
    c.dataset.model = PsfModel::Zernike2;
    c.dataset.count = 1234;
    c.deconv.iterations = 7;
    c.train_grid = {TrainConfig{0.001, 5, 16, 2.0, 9}, TrainConfig{0.01, 5, 16, 2.0, 9}};
    const std::string text = render_config(c);
    const PipelineConfig back = parse_config(text);
    CHECK(render_config(back) == text);
    CHECK(config_hash(back) == config_hash(c));
    CHECK(config_hash(default_config()) != config_hash(c));
  }

  TEST_CASE("files and provenance") {
    const auto dir = test::temp_dir("config");
    std::ofstream(dir / "c.ini") << "[map]\nstride = 8\n";
    CHECK(load_config(dir / "c.ini").map.stride == 8);
    try {
      load_config(dir / "missing.ini");
      FAIL("expected an I/O error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Io);
    }
    write_provenance(dir, "test", default_config(), {"a", "b"});
    CHECK(std::filesystem::exists(dir / "provenance.json"));
    write_provenance(dir / "out.png", "test", default_config(), {});
    CHECK(std::filesystem::exists(dir / "out.png.provenance.json"));
  }
}
