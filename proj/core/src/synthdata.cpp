#include "segadv/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "segadv/container.hpp"
#include "segadv/errors.hpp"
#include "segadv/json_io.hpp"

namespace segadv::synth {
namespace {

constexpr std::uint64_t kTrainStream = 0x7472;  // "tr"
constexpr std::uint64_t kValStream = 0x7661;    // "va"

std::string make_id(const std::string& split, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%04zu", split.c_str(), index);
  return buf;
}

double edge(const std::array<double, 2>& a, const std::array<double, 2>& b, double r, double c) {
  return (b[1] - a[1]) * (r - a[0]) - (b[0] - a[0]) * (c - a[1]);
}

Shape random_shape(Rng& rng, const DatasetConfig& cfg) {
  Shape s;
  s.cls = static_cast<std::int32_t>(rng.uniform_int(1, static_cast<std::int64_t>(cfg.classes) - 1));
  const double h = static_cast<double>(cfg.height);
  const double w = static_cast<double>(cfg.width);
  const double scale = std::min(h, w) / 64.0;
  const double cy = rng.uniform(0.1 * h, 0.9 * h);
  const double cx = rng.uniform(0.1 * w, 0.9 * w);

  switch (shape_kind_for_class(s.cls)) {
    case ShapeKind::Circle:
      s.geometry = Circle{cy, cx, rng.uniform(14.0, 24.0) * scale};
      break;
    case ShapeKind::Rectangle: {
      const double hh = rng.uniform(11.0, 21.0) * scale;
      const double hw = rng.uniform(11.0, 21.0) * scale;
      s.geometry = Rectangle{cy - hh, cx - hw, cy + hh, cx + hw};
      break;
    }
    case ShapeKind::Triangle: {
      Triangle t;
      const double size = rng.uniform(18.0, 28.0) * scale;
      const double rot = rng.uniform(0.0, 2.0 * std::numbers::pi);
      for (int k = 0; k < 3; ++k) {
        const double a = rot + k * 2.0 * std::numbers::pi / 3.0 + rng.uniform(-0.25, 0.25);
        t.vertices[k] = {cy + size * std::sin(a), cx + size * std::cos(a)};
      }
      s.geometry = t;
      break;
    }
  }
  return s;
}

}  // namespace

DatasetConfig DatasetConfig::defaults() {
  DatasetConfig cfg;
  cfg.palette = {
      Rgb{110.0f, 110.0f, 110.0f},  // background
      Rgb{170.0f, 90.0f, 90.0f},    // circle
      Rgb{90.0f, 160.0f, 100.0f},   // rectangle
      Rgb{95.0f, 105.0f, 175.0f},   // triangle
  };
  return cfg;
}

void DatasetConfig::validate() const {
  if (classes < 3) throw ConfigError("dataset needs at least 3 classes, got " + std::to_string(classes));
  if (height < 32 || width < 32) throw ConfigError("images must be at least 32x32");
  if (palette.size() != classes) {
    throw ConfigError("palette has " + std::to_string(palette.size()) + " colors for " + std::to_string(classes) +
                      " classes");
  }
  if (min_shapes > max_shapes) throw ConfigError("min_shapes exceeds max_shapes");
  if (!(noise_std >= 0.0)) throw ConfigError("noise_std must be non-negative");
  if (hidden_class <= 0 || static_cast<std::size_t>(hidden_class) >= classes) {
    throw ConfigError("hidden_class must be a foreground class id");
  }
}

void to_json(nlohmann::json& j, const DatasetConfig& cfg) {
  j = nlohmann::json{{"height", cfg.height},
                     {"width", cfg.width},
                     {"classes", cfg.classes},
                     {"min_shapes", cfg.min_shapes},
                     {"max_shapes", cfg.max_shapes},
                     {"palette", cfg.palette},
                     {"noise_std", cfg.noise_std},
                     {"texture_amplitude", cfg.texture_amplitude},
                     {"seed", cfg.seed},
                     {"train_size", cfg.train_size},
                     {"val_size", cfg.val_size},
                     {"hidden_class", cfg.hidden_class}};
}

void from_json(const nlohmann::json& j, DatasetConfig& cfg) {
  cfg = DatasetConfig::defaults();
  cfg.height = j.value("height", cfg.height);
  cfg.width = j.value("width", cfg.width);
  cfg.classes = j.value("classes", cfg.classes);
  cfg.min_shapes = j.value("min_shapes", cfg.min_shapes);
  cfg.max_shapes = j.value("max_shapes", cfg.max_shapes);
  cfg.palette = j.value("palette", cfg.palette);
  cfg.noise_std = j.value("noise_std", cfg.noise_std);
  cfg.texture_amplitude = j.value("texture_amplitude", cfg.texture_amplitude);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.train_size = j.value("train_size", cfg.train_size);
  cfg.val_size = j.value("val_size", cfg.val_size);
  cfg.hidden_class = j.value("hidden_class", cfg.hidden_class);
}

ShapeKind shape_kind_for_class(std::int32_t cls) {
  switch ((cls - 1) % 3) {
    case 0:
      return ShapeKind::Circle;
    case 1:
      return ShapeKind::Rectangle;
    default:
      return ShapeKind::Triangle;
  }
}

bool Shape::contains(double row, double col) const {
  if (const auto* c = std::get_if<Circle>(&geometry)) {
    const double dr = row - c->cy, dc = col - c->cx;
    return dr * dr + dc * dc <= c->radius * c->radius;
  }
  if (const auto* r = std::get_if<Rectangle>(&geometry)) {
    return row >= r->top && row <= r->bottom && col >= r->left && col <= r->right;
  }
  const auto& v = std::get<Triangle>(geometry).vertices;
  const double d0 = edge(v[0], v[1], row, col);
  const double d1 = edge(v[1], v[2], row, col);
  const double d2 = edge(v[2], v[0], row, col);
  const bool has_neg = d0 < 0 || d1 < 0 || d2 < 0;
  const bool has_pos = d0 > 0 || d1 > 0 || d2 > 0;
  return !(has_neg && has_pos);
}

SegSample paint_scene(const DatasetConfig& cfg, std::span<const Shape> shapes, Rng& rng, std::string id) {
  const std::size_t h = cfg.height, w = cfg.width;
  SegSample s;
  s.id = std::move(id);
  s.image = Tensor({h, w, 3});
  s.labels = LabelMap(h, w, 0);

  // Background: one oriented sinusoid per channel.
  const double fy = rng.uniform(0.5, 3.0), fx = rng.uniform(0.5, 3.0);
  std::array<double, 3> phase{};
  for (auto& p : phase) p = rng.uniform(0.0, 2.0 * std::numbers::pi);
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      const double t = 2.0 * std::numbers::pi * (fy * i / h + fx * j / w);
      for (std::size_t ch = 0; ch < 3; ++ch) {
        s.image.at(i, j, ch) = static_cast<float>(cfg.palette[0][ch] + cfg.texture_amplitude * std::sin(t + phase[ch]));
      }
    }
  }

  for (const Shape& shape : shapes) {
    if (shape.cls <= 0 || static_cast<std::size_t>(shape.cls) >= cfg.classes) {
      throw ConfigError("shape class " + std::to_string(shape.cls) + " is not a foreground class");
    }
    const Rgb& color = cfg.palette[static_cast<std::size_t>(shape.cls)];
    for (std::size_t i = 0; i < h; ++i) {
      for (std::size_t j = 0; j < w; ++j) {
        if (!shape.contains(static_cast<double>(i), static_cast<double>(j))) continue;
        s.labels.at(i, j) = shape.cls;
        for (std::size_t ch = 0; ch < 3; ++ch) s.image.at(i, j, ch) = color[ch];
      }
    }
  }

  for (float& v : s.image.values()) {
    const double noisy = cfg.noise_std > 0.0 ? v + cfg.noise_std * rng.normal() : v;
    v = static_cast<float>(std::clamp(std::round(noisy), 0.0, 255.0));
  }
  return s;
}

SegSample generate_scene(Rng& rng, const DatasetConfig& cfg, std::string id) {
  const auto count = static_cast<std::size_t>(
      rng.uniform_int(static_cast<std::int64_t>(cfg.min_shapes), static_cast<std::int64_t>(cfg.max_shapes)));
  std::vector<Shape> shapes;
  shapes.reserve(count);
  for (std::size_t k = 0; k < count; ++k) shapes.push_back(random_shape(rng, cfg));
  return paint_scene(cfg, shapes, rng, std::move(id));
}

Dataset generate_dataset(const DatasetConfig& cfg) {
  cfg.validate();
  Dataset d;
  d.config = cfg;
  d.train.reserve(cfg.train_size);
  d.val.reserve(cfg.val_size);
  for (std::size_t k = 0; k < cfg.train_size; ++k) {
    Rng rng(derive_seed(cfg.seed, kTrainStream, k));
    d.train.push_back(generate_scene(rng, cfg, make_id("train", k)));
  }
  for (std::size_t k = 0; k < cfg.val_size; ++k) {
    Rng rng(derive_seed(cfg.seed, kValStream, k));
    d.val.push_back(generate_scene(rng, cfg, make_id("val", k)));
  }
  return d;
}

namespace {

void ensure_dirs(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "images", ec);
  std::filesystem::create_directories(dir / "labels", ec);
  if (!std::filesystem::is_directory(dir / "images") || !std::filesystem::is_directory(dir / "labels")) {
    throw IoError("cannot create dataset directory " + dir.string());
  }
}

void write_sample_files(const std::filesystem::path& dir, const SegSample& s) {
  io::write_tensor(dir / "images" / (s.id + ".ten"), s.image);
  io::write_labels(dir / "labels" / (s.id + ".ten"), s.labels);
}

SegSample read_sample_files(const std::filesystem::path& dir, const std::string& id) {
  return SegSample{id, io::read_tensor(dir / "images" / (id + ".ten")), io::read_labels(dir / "labels" / (id + ".ten"))};
}

}  // namespace

void write_dataset(const std::filesystem::path& dir, const Dataset& data) {
  ensure_dirs(dir);
  nlohmann::json samples = nlohmann::json::array();
  for (const auto& s : data.train) {
    write_sample_files(dir, s);
    samples.push_back({{"id", s.id}, {"split", "train"}});
  }
  for (const auto& s : data.val) {
    write_sample_files(dir, s);
    samples.push_back({{"id", s.id}, {"split", "val"}});
  }
  io::write_json(dir / "manifest.json", {{"config", data.config}, {"samples", samples}});
}

Dataset load_dataset(const std::filesystem::path& dir) {
  const auto manifest = io::read_json(dir / "manifest.json");
  Dataset d;
  d.config = manifest.at("config").get<DatasetConfig>();
  for (const auto& entry : manifest.at("samples")) {
    const auto id = entry.at("id").get<std::string>();
    const auto split = entry.at("split").get<std::string>();
    auto sample = read_sample_files(dir, id);
    (split == "train" ? d.train : d.val).push_back(std::move(sample));
  }
  return d;
}

void write_samples(const std::filesystem::path& dir, std::span<const SegSample> samples, const std::string& split,
                   const nlohmann::json& extra) {
  ensure_dirs(dir);
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& s : samples) {
    write_sample_files(dir, s);
    entries.push_back({{"id", s.id}, {"split", split}});
  }
  nlohmann::json manifest = {{"samples", entries}};
  if (!extra.is_null()) manifest["config"] = extra;
  io::write_json(dir / "manifest.json", manifest);
}

std::vector<SegSample> load_samples(const std::filesystem::path& dir) {
  const auto manifest = io::read_json(dir / "manifest.json");
  std::vector<SegSample> out;
  for (const auto& entry : manifest.at("samples")) out.push_back(read_sample_files(dir, entry.at("id").get<std::string>()));
  return out;
}

}  // namespace segadv::synth
