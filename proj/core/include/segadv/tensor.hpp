#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace segadv {

using Shape = std::vector<std::size_t>;

std::size_t shape_product(const Shape& dims);
std::string shape_string(const Shape& dims);

/// Dense row-major tensor of 32-bit reals.
///
/// Images are stored H x W x 3 in raw pixel units, convolution kernels
/// k x k x Cin x Cout, probability maps H x W x C.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape dims, float fill = 0.0f);
  Tensor(Shape dims, std::vector<float> values);

  const Shape& dims() const noexcept { return dims_; }
  std::size_t rank() const noexcept { return dims_.size(); }
  std::size_t dim(std::size_t axis) const { return dims_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<float> values() noexcept { return data_; }
  std::span<const float> values() const noexcept { return data_; }
  float* data() noexcept { return data_.data(); }
  const float* data() const noexcept { return data_.data(); }

  float& operator[](std::size_t flat) noexcept { return data_[flat]; }
  float operator[](std::size_t flat) const noexcept { return data_[flat]; }

  // Unchecked rank-2 and rank-3 accessors.
  float& at(std::size_t i, std::size_t j) noexcept { return data_[i * dims_[1] + j]; }
  float at(std::size_t i, std::size_t j) const noexcept { return data_[i * dims_[1] + j]; }
  float& at(std::size_t i, std::size_t j, std::size_t c) noexcept {
    return data_[(i * dims_[1] + j) * dims_[2] + c];
  }
  float at(std::size_t i, std::size_t j, std::size_t c) const noexcept {
    return data_[(i * dims_[1] + j) * dims_[2] + c];
  }

  void fill(float v);
  bool all_finite() const noexcept;

  bool operator==(const Tensor& other) const = default;

 private:
  Shape dims_;
  std::vector<float> data_;
};

/// H x W map of class ids.
class LabelMap {
 public:
  LabelMap() = default;
  LabelMap(std::size_t height, std::size_t width, std::int32_t fill = 0);
  LabelMap(std::size_t height, std::size_t width, std::vector<std::int32_t> ids);

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t size() const noexcept { return ids_.size(); }

  std::int32_t& at(std::size_t i, std::size_t j) noexcept { return ids_[i * width_ + j]; }
  std::int32_t at(std::size_t i, std::size_t j) const noexcept { return ids_[i * width_ + j]; }
  std::int32_t& operator[](std::size_t flat) noexcept { return ids_[flat]; }
  std::int32_t operator[](std::size_t flat) const noexcept { return ids_[flat]; }

  std::span<const std::int32_t> ids() const noexcept { return ids_; }
  std::span<std::int32_t> ids() noexcept { return ids_; }

  bool operator==(const LabelMap& other) const = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<std::int32_t> ids_;
};

/// Per-pixel softmax output f(x;w): H x W x C, every pixel's C values sum to one.
class ProbabilityMap {
 public:
  ProbabilityMap() = default;
  explicit ProbabilityMap(Tensor probs);

  std::size_t height() const noexcept { return probs_.dim(0); }
  std::size_t width() const noexcept { return probs_.dim(1); }
  std::size_t classes() const noexcept { return probs_.dim(2); }
  std::size_t pixels() const noexcept { return height() * width(); }

  std::span<const float> pixel(std::size_t flat) const noexcept {
    return probs_.values().subspan(flat * classes(), classes());
  }
  float at(std::size_t i, std::size_t j, std::size_t c) const noexcept { return probs_.at(i, j, c); }

  const Tensor& tensor() const noexcept { return probs_; }

  /// Predicted label map; ties resolve to the smallest class id.
  LabelMap argmax() const;

  bool operator==(const ProbabilityMap& other) const = default;

 private:
  Tensor probs_;
};

}  // namespace segadv
