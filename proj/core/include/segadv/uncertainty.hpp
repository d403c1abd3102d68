#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "segadv/tensor.hpp"

namespace segadv::uncertainty {

/// Pixel-wise dispersion of a probability map.
struct DispersionMaps {
  Tensor entropy;          // -sum p ln p, in [0, ln C]
  Tensor variation_ratio;  // 1 - max p, in [0, 1 - 1/C]
  Tensor margin;           // variation ratio + second largest p, in [0, 1]
};

/// Throws InputError when a pixel's probabilities sum further than 1e-4 from 1.
DispersionMaps dispersion_maps(const ProbabilityMap& probs);

enum class SampleLabel { Clean, Attacked };

/// Image-level features, in the fixed order (mean E, mean V, mean M, P(0), ..., P(C-1)).
struct FeatureVector {
  std::string id;
  SampleLabel label = SampleLabel::Clean;
  std::string attack = "none";
  std::vector<double> values;

  std::size_t classes() const noexcept { return values.size() >= 3 ? values.size() - 3 : 0; }
  double mean_entropy() const { return values.at(0); }
};

FeatureVector feature_vector(const ProbabilityMap& probs, std::string id = {},
                             SampleLabel label = SampleLabel::Clean, std::string attack = "none");

/// Header `id,label,attack,E,V,M,P0..P{C-1}`; rows sorted by id.
std::string features_to_csv(std::span<const FeatureVector> features);
std::vector<FeatureVector> features_from_csv(const std::string& text);

void write_features_csv(const std::filesystem::path& path, std::span<const FeatureVector> features);
std::vector<FeatureVector> read_features_csv(const std::filesystem::path& path);

}  // namespace segadv::uncertainty
