#include <doctest.h>

#include <filesystem>

#include "helpers.hpp"
#include "svpsf/degrade.hpp"
#include "svpsf/error.hpp"
#include "svpsf/psf_map.hpp"

using namespace svpsf;

namespace {

ParamMap g1_map(int w, int h, std::vector<double> a1, std::vector<int> invalid) {
  ParamMap m;
  m.model = PsfModel::Gaussian1;
  m.grid_w = w;
  m.grid_h = h;
  for (double v : a1) m.cells.push_back({PsfModel::Gaussian1, {v}, 0.0});
  for (int i : invalid) m.cells[i].a0 = 1.0;
  return m;
}

}  // namespace

TEST_SUITE("psf_map") {
  TEST_CASE("grid count agrees with counting anchors") {
    for (int extent : {64, 65, 100, 256, 1000})
      for (int patch : {16, 32, 64})
        for (int stride = 1; stride <= patch; stride += 7) {
          int n = 0;
          for (int a = 0; a + patch <= extent; a += stride) ++n;
          CHECK(grid_count(extent, patch, stride) == n);
        }
    CHECK(grid_count(1024, 128, 64) == 15);
    CHECK(grid_count(128, 128, 64) == 1);
    CHECK(grid_count(100, 128, 64) == 0);
  }

  TEST_CASE("map configuration checks") {
    MapConfig c;
    CHECK_NOTHROW(c.validate());
    c.stride = 65;
    CHECK_THROWS_AS(c.validate(), Error);
    c = {};
    c.stride = 0;
    CHECK_THROWS_AS(c.validate(), Error);
  }

  TEST_CASE("sliding window visits every anchor") {
    const MapConfig cfg{16, 16, 8, 0.5};
    const Image img = test::pattern(50, 40);
    std::vector<std::pair<int, int>> seen;
    const ParamMap m = map_params(img, PsfModel::Gaussian1, cfg, [&](const Image& patch, int col, int row) {
      CHECK(patch.width() == 16);
      CHECK(patch(0, 0) == img(col * 8, row * 8));
      seen.emplace_back(col, row);
      return PsfParams{PsfModel::Gaussian1, {1.0 + col + 10.0 * row}, col == 1 && row == 2 ? 0.9 : 0.1};
    });
    CHECK(m.grid_w == 5);
    CHECK(m.grid_h == 4);
    CHECK(seen.size() == 20);
    CHECK(m.at(3, 2).a[0] == 24.0);
    CHECK(m.at(1, 2).a0 == 1.0);
    CHECK(m.at(0, 0).a0 == 0.0);
    CHECK(m.invalid_count() == 1);
    CHECK(m.anchor_x(3) == 24);
    CHECK_THROWS_AS(map_params(Image(10, 10), PsfModel::Gaussian1, cfg,
                               [](const Image&, int, int) { return PsfParams{}; }),
                    Error);
  }

  TEST_CASE("regressor map uses the batched model") {
    nn::ArchSpec arch;
    arch.input_side = 32;
    RegressorModel model(PsfModel::Gaussian1, {}, arch);
    model.network().init(2);
    const Image img = test::pattern(96, 64);
    const ParamMap m = map_params(img, model, {32, 32, 16, 0.5});
    CHECK(m.grid_w == 5);
    CHECK(m.grid_h == 3);
    const PsfParams direct = model.estimate(img.crop(48, 16, 32, 32));
    CHECK(m.at(3, 1).a[0] == doctest::Approx(direct.a[0]).epsilon(1e-5));
    CHECK_THROWS_AS(map_params(img, model, {64, 64, 32, 0.5}), Error);
  }

  TEST_CASE("infill with four equidistant neighbours") {
    const ParamMap m = g1_map(3, 3, {100, 1, 100, 2, 0, 3, 100, 4, 100}, {4});
    const ParamMap out = infill_invalid(m);
    CHECK(out.at(1, 1).a[0] == doctest::Approx(2.5));
    CHECK(out.at(1, 1).a0 == 0.0);
    CHECK(out.invalid_count() == 0);
    CHECK(out.at(0, 0) == m.at(0, 0));
  }

  TEST_CASE("infill weights by inverse distance") {
    const ParamMap out = infill_invalid(g1_map(3, 1, {0, 1, 4}, {0}));
    CHECK(out.at(0, 0).a[0] == doctest::Approx(2.0));
  }

  TEST_CASE("infill is a no-op on a valid map and idempotent") {
    const ParamMap full = g1_map(2, 2, {1, 2, 3, 4}, {});
    CHECK(infill_invalid(full) == full);
    const ParamMap once = infill_invalid(g1_map(4, 3, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12}, {0, 5, 6, 11}));
    CHECK(infill_invalid(once) == once);
    CHECK_THROWS_AS(infill_invalid(g1_map(2, 1, {1, 2}, {0, 1})), Error);
  }

  TEST_CASE("far cells fall back to the global mean") {
    std::vector<double> vals(20 * 1, 0.0);
    vals[19] = 5.0;
    std::vector<int> invalid;
    for (int i = 0; i < 19; ++i) invalid.push_back(i);
    const ParamMap out = infill_invalid(g1_map(20, 1, vals, invalid));
    CHECK(out.at(0, 0).a[0] == doctest::Approx(5.0));
    CHECK(out.at(15, 0).a[0] == doctest::Approx(5.0));
  }

  TEST_CASE("bank rendering") {
    ParamMap m = make_param_map(96, 64, PsfModel::Gaussian2, {32, 32, 32, 0.5});
    CHECK(m.grid_w == 3);
    CHECK(m.grid_h == 2);
    for (auto& c : m.cells) c.a = {2.0, 1.0};
    m.at(2, 1).a = {4.0, 0.5};
    const auto bank = psfs_from_map(m, 15);
    CHECK(bank.size() == 6);
    CHECK(bank[0].kernel == bank[3].kernel);
    CHECK(bank[5].kernel == render_psf(m.at(2, 1), 15).kernel);
    m.at(0, 0).a0 = 1.0;
    CHECK_THROWS_AS(psfs_from_map(m, 15), Error);
  }

  TEST_CASE("csv round trip and montage") {
    const auto dir = test::temp_dir("map_rt");
    ParamMap m = make_param_map(128, 96, PsfModel::Zernike3, {32, 32, 16, 0.5});
    for (std::size_t i = 0; i < m.cells.size(); ++i) m.cells[i].a = {0.1 * i, 0.05 * i, 0.3 + 0.01 * i};
    m.cells[4].a0 = 1.0;
    write_param_map(dir / "map.csv", m);
    CHECK(std::filesystem::exists(dir / "map.json"));
    const ParamMap back = read_param_map(dir / "map.csv");
    CHECK(back.grid_w == m.grid_w);
    CHECK(back.config == m.config);
    for (std::size_t i = 0; i < m.cells.size(); ++i) {
      CHECK(back.cells[i].a0 == m.cells[i].a0);
      for (int k = 0; k < 3; ++k) CHECK(back.cells[i].a[k] == doctest::Approx(m.cells[i].a[k]).epsilon(1e-12));
    }
    m.cells[4].a0 = 0.0;
    const auto bank = psfs_from_map(m, 15, {64, 0.5, 1.0});
    write_psf_montage(dir / "montage.png", bank, m.grid_w, m.grid_h);
    CHECK(std::filesystem::exists(dir / "montage.png"));
    CHECK_THROWS_AS(read_param_map(dir / "none.csv"), Error);
  }
}
