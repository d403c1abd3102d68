#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <iterator>
#include <set>

#include "fixtures.hpp"
#include "segadv/errors.hpp"
#include "segadv/json_io.hpp"
#include "segadv/synthdata.hpp"

using namespace segadv;
using namespace segadv::synth;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_SUITE("synthdata") {

TEST_CASE("zero shapes per image gives an all-background label map") {
  DatasetConfig cfg = DatasetConfig::defaults();
  cfg.min_shapes = cfg.max_shapes = 0;
  Rng rng(4);
  const SegSample s = generate_scene(rng, cfg, "empty");
  for (auto id : s.labels.ids()) CHECK(id == 0);
}

TEST_CASE("noise-free rectangle of class 2 carries its label and palette color") {
  DatasetConfig cfg = DatasetConfig::defaults();
  cfg.noise_std = 0.0;
  const synth::Shape rect{2, Rectangle{10.0, 12.0, 30.0, 40.0}};
  Rng rng(5);
  const SegSample s = paint_scene(cfg, std::span(&rect, 1), rng, "rect");
  std::size_t inside = 0;
  for (std::size_t i = 0; i < 64; ++i) {
    for (std::size_t j = 0; j < 64; ++j) {
      const bool in = i >= 10 && i <= 30 && j >= 12 && j <= 40;
      CHECK((s.labels.at(i, j) == 2) == in);
      if (!in) continue;
      ++inside;
      for (std::size_t c = 0; c < 3; ++c) CHECK(s.image.at(i, j, c) == cfg.palette[2][c]);
    }
  }
  CHECK(inside == 21 * 29);
}

TEST_CASE("label map matches painted occupancy, later shapes on top") {
  DatasetConfig cfg = DatasetConfig::defaults();
  const std::vector<synth::Shape> shapes{{2, Rectangle{5, 5, 40, 40}}, {1, Circle{20, 20, 8}},
                                  {3, Triangle{{{{30, 30}, {60, 35}, {35, 60}}}}}};
  Rng rng(6);
  const SegSample s = paint_scene(cfg, shapes, rng);
  for (std::size_t i = 0; i < 64; ++i) {
    for (std::size_t j = 0; j < 64; ++j) {
      std::int32_t expect = 0;
      for (const auto& sh : shapes)
        if (sh.contains(static_cast<double>(i), static_cast<double>(j))) expect = sh.cls;
      CHECK(s.labels.at(i, j) == expect);
    }
  }
}

TEST_CASE("images stay in range and the same seed reproduces the scene") {
  const DatasetConfig cfg = DatasetConfig::defaults();
  Rng a(77), b(77);
  const SegSample x = generate_scene(a, cfg, "x"), y = generate_scene(b, cfg, "x");
  CHECK(x.image == y.image);
  CHECK(x.labels == y.labels);
  for (float v : x.image.values()) {
    CHECK(v >= 0.0f);
    CHECK(v <= 255.0f);
  }
}

TEST_CASE("dataset: split sizes, file count, byte-identical regeneration") {
  DatasetConfig cfg = DatasetConfig::defaults();
  cfg.train_size = 200;
  cfg.val_size = 50;
  const Dataset data = generate_dataset(cfg);
  CHECK(data.train.size() == 200);
  CHECK(data.val.size() == 50);

  segadv::testing::TempDir a("ds_a"), b("ds_b");
  write_dataset(a.path(), data);
  write_dataset(b.path(), generate_dataset(cfg));
  std::size_t images = 0, labels = 0;
  for (const auto& e : std::filesystem::directory_iterator(a.path() / "images")) {
    ++images;
    CHECK(slurp(e.path()) == slurp(b.path() / "images" / e.path().filename()));
  }
  for (const auto& e : std::filesystem::directory_iterator(a.path() / "labels")) {
    ++labels;
    CHECK(slurp(e.path()) == slurp(b.path() / "labels" / e.path().filename()));
  }
  CHECK(images == 250);
  CHECK(labels == 250);
  CHECK(io::read_json(a.path() / "manifest.json").at("samples").size() == 250);
  CHECK(slurp(a.path() / "manifest.json") == slurp(b.path() / "manifest.json"));

  const Dataset back = load_dataset(a.path());
  REQUIRE(back.train.size() == 200);
  CHECK(back.train[17].image == data.train[17].image);
  CHECK(back.val[3].labels == data.val[3].labels);
}

TEST_CASE("dataset: every class appears in at least 10 of 200 images, ids disjoint") {
  DatasetConfig cfg = DatasetConfig::defaults();
  cfg.val_size = 50;
  const Dataset data = generate_dataset(cfg);
  std::vector<int> seen(cfg.classes, 0);
  for (const auto& s : data.train) {
    std::set<std::int32_t> present(s.labels.ids().begin(), s.labels.ids().end());
    for (auto c : present) {
      REQUIRE(c >= 0);
      REQUIRE(c < static_cast<std::int32_t>(cfg.classes));
      ++seen[static_cast<std::size_t>(c)];
    }
  }
  for (int n : seen) CHECK(n >= 10);

  std::set<std::string> train_ids;
  for (const auto& s : data.train) train_ids.insert(s.id);
  for (const auto& s : data.val) CHECK(train_ids.count(s.id) == 0);
  // The splits use unrelated streams.
  CHECK(data.train.front().image != data.val.front().image);
}

TEST_CASE("config validation") {
  DatasetConfig cfg = DatasetConfig::defaults();
  cfg.classes = 2;
  cfg.palette.resize(2);
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = DatasetConfig::defaults();
  cfg.height = 16;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = DatasetConfig::defaults();
  cfg.palette.pop_back();
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK_NOTHROW(DatasetConfig::defaults().validate());
}

TEST_CASE("unwritable output directory is an I/O error") {
  segadv::testing::TempDir dir("ds_ro");
  const auto blocker = dir.path() / "file";
  std::ofstream(blocker) << "x";
  DatasetConfig cfg = DatasetConfig::defaults();
  cfg.train_size = 2;
  cfg.val_size = 1;
  CHECK_THROWS_AS(write_dataset(blocker / "sub", generate_dataset(cfg)), IoError);
}

}  // TEST_SUITE
