#include "segadv/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "segadv/errors.hpp"

namespace segadv {

std::size_t shape_product(const Shape& dims) {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& dims) {
  std::ostringstream os;
  for (std::size_t k = 0; k < dims.size(); ++k) {
    if (k) os << 'x';
    os << dims[k];
  }
  return os.str();
}

Tensor::Tensor(Shape dims, float fill) : dims_(std::move(dims)), data_(shape_product(dims_), fill) {}

Tensor::Tensor(Shape dims, std::vector<float> values) : dims_(std::move(dims)), data_(std::move(values)) {
  if (shape_product(dims_) != data_.size()) {
    throw ConfigError("tensor of shape " + shape_string(dims_) + " given " + std::to_string(data_.size()) +
                      " values");
  }
}

void Tensor::fill(float v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
}

LabelMap::LabelMap(std::size_t height, std::size_t width, std::int32_t fill)
    : height_(height), width_(width), ids_(height * width, fill) {}

LabelMap::LabelMap(std::size_t height, std::size_t width, std::vector<std::int32_t> ids)
    : height_(height), width_(width), ids_(std::move(ids)) {
  if (ids_.size() != height_ * width_) {
    throw ConfigError("label map " + std::to_string(height_) + "x" + std::to_string(width_) + " given " +
                      std::to_string(ids_.size()) + " ids");
  }
}

ProbabilityMap::ProbabilityMap(Tensor probs) : probs_(std::move(probs)) {
  if (probs_.rank() != 3) throw ConfigError("probability map must be H x W x C, got " + shape_string(probs_.dims()));
}

LabelMap ProbabilityMap::argmax() const {
  LabelMap out(height(), width());
  const std::size_t c = classes();
  for (std::size_t p = 0; p < pixels(); ++p) {
    auto row = pixel(p);
    std::size_t best = 0;
    for (std::size_t y = 1; y < c; ++y) {
      if (row[y] > row[best]) best = y;
    }
    out[p] = static_cast<std::int32_t>(best);
  }
  return out;
}

}  // namespace segadv
