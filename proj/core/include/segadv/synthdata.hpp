#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "segadv/random.hpp"
#include "segadv/tensor.hpp"

// Synthetic segmentation scenes: flat-colored circles, rectangles and
// triangles over a low-frequency textured background.
namespace segadv::synth {

using Rgb = std::array<float, 3>;

struct DatasetConfig {
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t classes = 4;  // class 0 is background
  std::size_t min_shapes = 1;
  std::size_t max_shapes = 3;
  std::vector<Rgb> palette;  // one mean color per class
  double noise_std = 8.0;
  double texture_amplitude = 10.0;
  std::uint64_t seed = 2024;
  std::size_t train_size = 200;
  std::size_t val_size = 100;
  std::int32_t hidden_class = 1;  // class erased by the nearest-neighbour attack

  static DatasetConfig defaults();
  /// Throws ConfigError when an invariant is violated.
  void validate() const;
};

void to_json(nlohmann::json& j, const DatasetConfig& cfg);
void from_json(const nlohmann::json& j, DatasetConfig& cfg);

struct SegSample {
  std::string id;
  Tensor image;  // H x W x 3, pixel units in [0, 255]
  LabelMap labels;
};

enum class ShapeKind { Circle, Rectangle, Triangle };

struct Circle {
  double cy, cx, radius;
};
struct Rectangle {
  double top, left, bottom, right;  // inclusive pixel-center bounds
};
struct Triangle {
  std::array<std::array<double, 2>, 3> vertices;  // (row, col)
};

struct Shape {
  std::int32_t cls = 1;
  std::variant<Circle, Rectangle, Triangle> geometry;

  bool contains(double row, double col) const;
};

/// Class 1 paints circles, 2 rectangles, 3 triangles; larger ids cycle.
ShapeKind shape_kind_for_class(std::int32_t cls);

/// Paints `shapes` back-to-front over a textured background, then adds
/// Gaussian noise, rounds and clamps to [0, 255].
SegSample paint_scene(const DatasetConfig& cfg, std::span<const Shape> shapes, Rng& rng, std::string id = {});

/// Draws a random shape list and paints it.
SegSample generate_scene(Rng& rng, const DatasetConfig& cfg, std::string id = {});

struct Dataset {
  DatasetConfig config;
  std::vector<SegSample> train;
  std::vector<SegSample> val;
};

/// Seeds are derived per split and per index, so the two splits never share
/// an RNG stream.
Dataset generate_dataset(const DatasetConfig& cfg);

/// images/<id>.ten, labels/<id>.ten and manifest.json under `dir`.
void write_dataset(const std::filesystem::path& dir, const Dataset& data);
Dataset load_dataset(const std::filesystem::path& dir);

/// Writes one split of samples with a manifest (used for attacked copies).
void write_samples(const std::filesystem::path& dir, std::span<const SegSample> samples, const std::string& split,
                   const nlohmann::json& extra = {});
std::vector<SegSample> load_samples(const std::filesystem::path& dir);

}  // namespace segadv::synth
