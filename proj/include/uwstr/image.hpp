#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "error.hpp"

namespace uwstr {

/// Single row-major plane of samples. The building block for every image type
/// in the library; all images are planar.
template <typename T>
class Plane {
 public:
  using value_type = T;

  Plane() = default;
  Plane(int width, int height, T fill = T{})
      : width_(width), height_(height) {
    if (width < 0 || height < 0) throw DimensionError("negative plane size");
    data_.assign(static_cast<std::size_t>(width) * height, fill);
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(int x, int y) noexcept { return data_[index(x, y)]; }
  const T& operator()(int x, int y) const noexcept { return data_[index(x, y)]; }
  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  std::span<T> row(int y) noexcept {
    return {data_.data() + static_cast<std::size_t>(y) * width_,
            static_cast<std::size_t>(width_)};
  }
  std::span<const T> row(int y) const noexcept {
    return {data_.data() + static_cast<std::size_t>(y) * width_,
            static_cast<std::size_t>(width_)};
  }

  std::span<T> values() & noexcept { return data_; }
  std::span<const T> values() const& noexcept { return data_; }
  // A view into a temporary would dangle before the loop body runs.
  std::span<const T> values() && = delete;

  bool same_shape(const Plane& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_;
  }

  friend bool operator==(const Plane&, const Plane&) = default;

 private:
  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * width_ + x;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

using GrayImage = Plane<double>;
/// Binary map stored as 0/1 bytes.
using Mask = Plane<std::uint8_t>;

/// Three planes sharing one shape. Channel order is always R, G, B.
template <typename T>
class Planar3 {
 public:
  Planar3() = default;
  Planar3(int width, int height, T fill = T{})
      : planes_{Plane<T>(width, height, fill), Plane<T>(width, height, fill),
                Plane<T>(width, height, fill)} {}
  Planar3(Plane<T> p0, Plane<T> p1, Plane<T> p2)
      : planes_{std::move(p0), std::move(p1), std::move(p2)} {
    if (!planes_[0].same_shape(planes_[1]) || !planes_[0].same_shape(planes_[2]))
      throw DimensionError("channel planes differ in shape");
  }

  int width() const noexcept { return planes_[0].width(); }
  int height() const noexcept { return planes_[0].height(); }
  std::size_t pixel_count() const noexcept { return planes_[0].size(); }

  Plane<T>& channel(int c) noexcept { return planes_[c]; }
  const Plane<T>& channel(int c) const noexcept { return planes_[c]; }
  Plane<T>& operator[](int c) noexcept { return planes_[c]; }
  const Plane<T>& operator[](int c) const noexcept { return planes_[c]; }

  template <typename U>
  bool same_shape(const Planar3<U>& other) const noexcept {
    return width() == other.width() && height() == other.height();
  }
  template <typename U>
  bool same_shape(const Plane<U>& other) const noexcept {
    return width() == other.width() && height() == other.height();
  }

  /// Sets pixel `i` (row-major index) to the triple `v`.
  void set(std::size_t i, const std::array<T, 3>& v) noexcept {
    for (int c = 0; c < 3; ++c) planes_[c][i] = v[c];
  }
  std::array<T, 3> get(std::size_t i) const noexcept {
    return {planes_[0][i], planes_[1][i], planes_[2][i]};
  }

  friend bool operator==(const Planar3&, const Planar3&) = default;

 private:
  std::array<Plane<T>, 3> planes_;
};

/// Color image with R, G, B planes. Enhancement stages keep values in [0,1].
using RgbImage = Planar3<double>;
/// Signed detail layer. Values in [-1,1].
using TextureImage = Planar3<double>;

/// CIELAB planes: L in [0,100], a and b unbounded.
struct LabImage {
  GrayImage L;
  GrayImage a;
  GrayImage b;

  int width() const noexcept { return L.width(); }
  int height() const noexcept { return L.height(); }
};

/// 256-bin histogram of integer levels.
class Histogram256 {
 public:
  void add(int level) noexcept {
    ++bins_[static_cast<std::size_t>(std::clamp(level, 0, 255))];
    ++total_;
  }
  std::uint64_t operator[](int level) const noexcept {
    return bins_[static_cast<std::size_t>(level)];
  }
  std::uint64_t total() const noexcept { return total_; }

  /// Lowest level holding the maximum count.
  int mode() const noexcept {
    return static_cast<int>(std::max_element(bins_.begin(), bins_.end()) - bins_.begin());
  }

  /// Accumulates from level 255 downward and returns the first level at which
  /// the running count exceeds `threshold`. Returns 0 if it never does.
  int descending_cutoff(double threshold) const noexcept {
    std::uint64_t sum = 0;
    for (int z = 255; z >= 0; --z) {
      sum += bins_[static_cast<std::size_t>(z)];
      if (static_cast<double>(sum) > threshold) return z;
    }
    return 0;
  }

 private:
  std::array<std::uint64_t, 256> bins_{};
  std::uint64_t total_ = 0;
};

/// Quantizes a [0,1] sample to the nearest 8-bit level, clamping out-of-range values.
inline int to_level(double v) noexcept {
  return static_cast<int>(std::clamp(v, 0.0, 1.0) * 255.0 + 0.5);
}

inline RgbImage make_constant(int width, int height, const std::array<double, 3>& rgb) {
  return RgbImage(Plane<double>(width, height, rgb[0]), Plane<double>(width, height, rgb[1]),
                  Plane<double>(width, height, rgb[2]));
}

inline void clamp_unit(Plane<double>& p) noexcept {
  for (auto& v : p.values()) v = std::clamp(v, 0.0, 1.0);
}

inline void clamp_unit(RgbImage& img) noexcept {
  for (int c = 0; c < 3; ++c) clamp_unit(img[c]);
}

/// Spacing of the grid that unit-range layers are rounded to. Two values on
/// this grid in [0,1] have an exactly representable difference, so a layer
/// split by subtraction re-adds to the original bit for bit.
inline constexpr double kUnitLattice = 0x1p-40;

inline double snap_to_lattice(double v) noexcept {
  return std::nearbyint(v / kUnitLattice) * kUnitLattice;
}

inline void snap_to_lattice(Plane<double>& p) noexcept {
  for (auto& v : p.values()) v = snap_to_lattice(v);
}

/// Per-plane mean, accumulated in row-major order.
inline double mean(const Plane<double>& p) noexcept {
  double s = 0.0;
  for (double v : p.values()) s += v;
  return p.empty() ? 0.0 : s / static_cast<double>(p.size());
}

inline void require_min_size(int width, int height, int minimum = 8) {
  if (width < minimum || height < minimum)
    throw DimensionError("image is " + std::to_string(width) + "x" + std::to_string(height) +
                         ", minimum is " + std::to_string(minimum) + "x" +
                         std::to_string(minimum));
}

/// Half-sample symmetric index folding (… b a | a b … y z | z y …). Works for
/// any offset, including ones that wrap more than once around a short axis.
inline int reflect_index(int i, int n) noexcept {
  if (n == 1) return 0;
  const int period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

}  // namespace uwstr
