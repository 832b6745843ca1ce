#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"

namespace l2t {

struct Shape {
  int channels = 0;
  int height = 0;
  int width = 0;

  std::size_t size() const {
    return static_cast<std::size_t>(channels) * static_cast<std::size_t>(height) *
           static_cast<std::size_t>(width);
  }
  std::size_t plane() const { return static_cast<std::size_t>(height) * static_cast<std::size_t>(width); }
  bool operator==(const Shape&) const = default;
  std::string str() const {
    return std::to_string(channels) + "x" + std::to_string(height) + "x" + std::to_string(width);
  }
};

// Channel-major C×H×W array of doubles. Holds images as well as gradient
// buffers of image shape; only the former are expected to lie in [0,1].
class Image {
 public:
  Image() = default;
  explicit Image(Shape shape, double fill = 0.0) : shape_(shape), data_(shape.size(), fill) {}
  Image(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
    if (data_.size() != shape_.size()) {
      throw InvalidArgument("image data length " + std::to_string(data_.size()) +
                            " does not match shape " + shape_.str());
    }
  }

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(int c, int y, int x) { return data_[index(c, y, x)]; }
  double at(int c, int y, int x) const { return data_[index(c, y, x)]; }

  std::span<double> channel(int c) { return {data_.data() + c * shape_.plane(), shape_.plane()}; }
  std::span<const double> channel(int c) const {
    return {data_.data() + c * shape_.plane(), shape_.plane()};
  }

  bool operator==(const Image&) const = default;

 private:
  std::size_t index(int c, int y, int x) const {
    return (static_cast<std::size_t>(c) * shape_.height + y) * shape_.width + x;
  }

  Shape shape_;
  std::vector<double> data_;
};

inline void require_same_shape(const Shape& a, const Shape& b, const char* what) {
  if (!(a == b)) {
    throw InvalidArgument(std::string(what) + ": shape " + a.str() + " does not match " + b.str());
  }
}

inline bool all_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

// sign with sign(0) = 0.
inline double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

inline double max_abs_diff(const Image& a, const Image& b) {
  require_same_shape(a.shape(), b.shape(), "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::fmax(m, std::fabs(a[i] - b[i]));
  return m;
}

}  // namespace l2t
