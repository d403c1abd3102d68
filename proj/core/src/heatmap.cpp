#include "segadv/heatmap.hpp"

#include <algorithm>
#include <cmath>

#include "segadv/errors.hpp"
#include "segadv/json_io.hpp"

namespace segadv::io {

std::uint8_t heatmap_level(double entropy, std::size_t classes) {
  if (classes < 2) throw InputError("entropy heatmap needs at least two classes");
  const double level = 255.0 * (entropy / std::log(static_cast<double>(classes)));
  return static_cast<std::uint8_t>(std::clamp(std::floor(level + 0.5), 0.0, 255.0));
}

std::vector<std::uint8_t> entropy_heatmap(const ProbabilityMap& probs) {
  const std::size_t c = probs.classes();
  std::vector<std::uint8_t> out(probs.pixels());
  for (std::size_t p = 0; p < probs.pixels(); ++p) {
    double e = 0.0;
    for (float v : probs.pixel(p)) {
      if (v > 0.0f) e -= static_cast<double>(v) * std::log(static_cast<double>(v));
    }
    out[p] = heatmap_level(e, c);
  }
  return out;
}

std::string encode_pgm(std::size_t height, std::size_t width, const std::vector<std::uint8_t>& levels) {
  if (levels.size() != height * width) throw InputError("PGM payload does not match its size");
  std::string out = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  out.append(levels.begin(), levels.end());
  return out;
}

void export_entropy_heatmap(const ProbabilityMap& probs, const std::filesystem::path& path) {
  write_text(path, encode_pgm(probs.height(), probs.width(), entropy_heatmap(probs)));
}

}  // namespace segadv::io
