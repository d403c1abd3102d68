#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "segadv/random.hpp"
#include "segadv/refmodel.hpp"
#include "segadv/synthdata.hpp"

namespace segadv::testing {

inline synth::DatasetConfig small_dataset_config(std::size_t train = 60, std::size_t val = 30) {
  auto cfg = synth::DatasetConfig::defaults();
  cfg.train_size = train;
  cfg.val_size = val;
  cfg.seed = 99;
  return cfg;
}

inline const synth::Dataset& small_dataset() {
  static const synth::Dataset data = synth::generate_dataset(small_dataset_config());
  return data;
}

/// A few epochs on the small dataset; good enough for attacks to have an effect.
inline const model::ModelParams& quick_model() {
  static const model::ModelParams params = [] {
    model::TrainConfig cfg;
    cfg.epochs = 8;
    cfg.seed = 21;
    return model::train(small_dataset().train, small_dataset().config.classes, cfg);
  }();
  return params;
}

inline model::ModelParams random_model(std::uint64_t seed = 1, std::size_t classes = 4) {
  return model::init_params(classes, seed);
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    Rng rng(hash_string(tag) ^ static_cast<std::uint64_t>(reinterpret_cast<std::uintptr_t>(this)));
    path_ = std::filesystem::temp_directory_path() / ("segadv_" + tag + "_" + std::to_string(rng.next() % 1000000007));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace segadv::testing
