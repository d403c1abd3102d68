#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "segadv/tensor.hpp"

namespace segadv::io {

/// round(255 * entropy / ln C), halves rounded up, clamped to [0, 255].
std::uint8_t heatmap_level(double entropy, std::size_t classes);

/// Row-major gray levels of the pixel-wise entropy.
std::vector<std::uint8_t> entropy_heatmap(const ProbabilityMap& probs);

/// Binary (P5) PGM with maxval 255.
std::string encode_pgm(std::size_t height, std::size_t width, const std::vector<std::uint8_t>& levels);

void export_entropy_heatmap(const ProbabilityMap& probs, const std::filesystem::path& path);

}  // namespace segadv::io
