#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

namespace surftrack {

/// Dense row-major 2D array. Pixel (x, y) has its center at integer
/// coordinates; x grows right, y grows down.
template <class T>
class Plane {
 public:
  Plane() = default;
  Plane(int width, int height, T fill = T{})
      : width_(width), height_(height),
        data_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return data_.empty(); }
  std::size_t size() const { return data_.size(); }

  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  T& operator()(int x, int y) { return data_[index(x, y)]; }
  const T& operator()(int x, int y) const { return data_[index(x, y)]; }

  T* row(int y) { return data_.data() + static_cast<std::size_t>(y) * width_; }
  const T* row(int y) const { return data_.data() + static_cast<std::size_t>(y) * width_; }

  std::span<T> pixels() { return data_; }
  std::span<const T> pixels() const { return data_; }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  friend bool operator==(const Plane&, const Plane&) = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

using Image = Plane<double>;
using Mask = Plane<std::uint8_t>;

/// Half-open pixel rectangle [x0, x1) x [y0, y1).
struct Rect {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
  bool empty() const { return x1 <= x0 || y1 <= y0; }
  bool contains(int x, int y) const { return x >= x0 && x < x1 && y >= y0 && y < y1; }

  Rect intersect(const Rect& o) const {
    return {std::max(x0, o.x0), std::max(y0, o.y0), std::min(x1, o.x1), std::min(y1, o.y1)};
  }
  Rect inflate(int margin) const { return {x0 - margin, y0 - margin, x1 + margin, y1 + margin}; }

  friend bool operator==(const Rect&, const Rect&) = default;
};

inline Rect full_rect(int width, int height) { return {0, 0, width, height}; }

/// Bilinear sample with derivatives. `valid` is false outside [0, w-1] x [0, h-1].
struct BilinearSample {
  double value = 0.0;
  double dx = 0.0;
  double dy = 0.0;
  bool valid = false;
};

BilinearSample sample_bilinear(const Image& image, double x, double y);

/// Value-only variant; returns false when (x, y) is outside the sampling domain.
bool sample_bilinear(const Image& image, double x, double y, double& value);

bool all_set(const Mask& mask);

}  // namespace surftrack
