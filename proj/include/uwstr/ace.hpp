#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <type_traits>
#include <vector>

#include "image.hpp"

namespace uwstr {

/// Pixel count up to which the pairwise sum is evaluated exactly, and the
/// per-pixel sample budget used to pick the automatic stride above it.
inline constexpr std::size_t kAceExactLimit = 16384;

struct AceConfig {
  double alpha = 8.0;
  /// Grid stride for the sample positions y. Empty selects 1 for small images
  /// and the smallest stride meeting kAceExactLimit otherwise.
  std::optional<int> sample_stride;
};

/// Contrast slope: clamp(alpha * t) to [-1, 1].
inline double slope(double t, double alpha) {
  if (!(alpha >= 1.0)) throw ParameterError("ace alpha must be >= 1");
  return std::clamp(alpha * t, -1.0, 1.0);
}

/// Stride actually used for an image of the given size.
inline int ace_stride(int width, int height, const AceConfig& cfg) {
  if (cfg.sample_stride) {
    if (*cfg.sample_stride < 1) throw ParameterError("ace sample stride must be >= 1");
    return *cfg.sample_stride;
  }
  int s = 1;
  auto samples = [&](int st) {
    return static_cast<std::size_t>((width + st - 1) / st) * ((height + st - 1) / st);
  };
  while (samples(s) > kAceExactLimit) ++s;
  return s;
}

namespace detail {

// Vector lane layout for the pairwise sum. A block of 2*kHalf consecutive
// samples is processed as two 32-byte halves; term i of a sample row always
// lands in lane i mod (2*kHalf). Each row is folded into double lanes before
// the next starts and the lanes are reduced pairwise at the end, so the
// result is fixed by the layout and not by the instruction set.
template <typename T>
struct AceLanes {
  static constexpr int kHalf = 32 / static_cast<int>(sizeof(T));
  static constexpr int kBlock = 2 * kHalf;
  typedef T Values __attribute__((vector_size(32)));
  typedef double Wide __attribute__((vector_size(kHalf * sizeof(double))));
  using Index = std::conditional_t<sizeof(T) == 4, std::int32_t, std::int64_t>;
  typedef Index Indices __attribute__((vector_size(32)));
};

// Inverse-distance weights laid out so that both halves of every sample row
// are read front to back. For a pixel at column px = q*s + rho:
//   left  samples jc <= q  use distance (q - jc)*s + rho
//   right samples jc >  q  use distance (jc - q - 1)*s + (s - rho)
// Rows are zero-padded past whole lane blocks.
template <typename T>
class AceSampleGrid {
 public:
  static constexpr int kBlock = AceLanes<T>::kBlock;

  AceSampleGrid(int width, int height, int stride)
      : height_(height), stride_(stride), cols_((width + stride - 1) / stride),
        rows_((height + stride - 1) / stride),
        pitch_((cols_ + kBlock - 1) / kBlock * kBlock + kBlock) {
    const std::size_t table = static_cast<std::size_t>(height_) * pitch_;
    left_.assign(static_cast<std::size_t>(stride_) * table, T(0));
    right_.assign(static_cast<std::size_t>(stride_) * table, T(0));
    for (int rho = 0; rho < stride_; ++rho) {
      for (int dy = 0; dy < height_; ++dy) {
        T* l = left_.data() + rho * table + static_cast<std::size_t>(dy) * pitch_;
        T* r = right_.data() + rho * table + static_cast<std::size_t>(dy) * pitch_;
        for (int m = 0; m < cols_; ++m) {
          l[cols_ - 1 - m] = inverse_distance(dy, m * stride_ + rho);
          r[m] = inverse_distance(dy, m * stride_ + (stride_ - rho));
        }
      }
    }
  }

  int stride() const noexcept { return stride_; }
  int cols() const noexcept { return cols_; }
  int rows() const noexcept { return rows_; }
  int pitch() const noexcept { return pitch_; }

  const T* left(int rho, int dy) const noexcept {
    return left_.data() + (static_cast<std::size_t>(rho) * height_ + dy) * pitch_;
  }
  const T* right(int rho, int dy) const noexcept {
    return right_.data() + (static_cast<std::size_t>(rho) * height_ + dy) * pitch_;
  }

  /// alpha * channel at the sample positions, one padded row per sample row.
  std::vector<T> scaled_samples(const GrayImage& channel, double alpha) const {
    std::vector<T> out(static_cast<std::size_t>(rows_) * pitch_, T(0));
    for (int jr = 0; jr < rows_; ++jr)
      for (int jc = 0; jc < cols_; ++jc)
        out[static_cast<std::size_t>(jr) * pitch_ + jc] =
            static_cast<T>(alpha * channel(jc * stride_, jr * stride_));
    return out;
  }

 private:
  static T inverse_distance(int dy, int dx) {
    if (dy == 0 && dx == 0) return T(0);  // y == x is excluded from the sum
    return static_cast<T>(1.0 / std::sqrt(static_cast<double>(dy) * dy +
                                          static_cast<double>(dx) * dx));
  }

  int height_;
  int stride_;
  int cols_;
  int rows_;
  int pitch_;
  std::vector<T> left_;
  std::vector<T> right_;
};

template <typename T>
struct AceJob {
  std::array<const GrayImage*, 3> channels;
  std::array<const T*, 3> samples;
  const AceSampleGrid<T>* grid;
  double alpha;
  std::array<GrayImage*, 3> out;
};

// Lane-wise clamp to [-1, 1]. The selects are written in the operand order of
// the x86 min/max instructions, which the AVX policy calls directly; both give
// identical values for finite input.
template <typename T>
struct SelectClamp {
  using Values = typename AceLanes<T>::Values;
  [[gnu::always_inline]] static inline void apply(Values& d, const Values& one,
                                                  const Values& minus_one) {
    d = d < one ? d : one;
    d = d > minus_one ? d : minus_one;
  }
};

#if defined(__GNUC__) && (defined(__x86_64__) || defined(__i386__))
template <typename T>
struct AvxClamp {
  using Values = typename AceLanes<T>::Values;
  [[gnu::target("avx")]] static inline void apply(Values& d, const Values& one,
                                                 const Values& minus_one) {
    if constexpr (sizeof(T) == 4)
      d = __builtin_ia32_maxps256(__builtin_ia32_minps256(d, one), minus_one);
    else
      d = __builtin_ia32_maxpd256(__builtin_ia32_minpd256(d, one), minus_one);
  }
};
#endif

template <typename T, typename Clamp = SelectClamp<T>>
[[gnu::always_inline]] inline void ace_rows(const AceJob<T>& job) {
  using L = AceLanes<T>;
  using Values = typename L::Values;
  using Wide = typename L::Wide;
  constexpr int kHalf = L::kHalf;
  constexpr int kBlock = L::kBlock;

  const AceSampleGrid<T>& grid = *job.grid;
  const int s = grid.stride();
  const int cols = grid.cols();
  const int pitch = grid.pitch();
  const int width = job.channels[0]->width();
  const int height = job.channels[0]->height();
  Values one{}, minus_one{}, zero{};
  typename L::Indices lane{};
  for (int k = 0; k < kHalf; ++k) {
    one[k] = T(1);
    minus_one[k] = T(-1);
    lane[k] = k;
  }
  for (int py = 0; py < height; ++py) {
    for (int px = 0; px < width; ++px) {
      std::array<Values, 3> v{};
      for (int c = 0; c < 3; ++c) {
        const T vc = static_cast<T>(job.alpha * (*job.channels[c])(px, py));
        for (int k = 0; k < kHalf; ++k) v[c][k] = vc;
      }
      const int q = px / s;
      const int rho = px % s;
      const int n_left = q + 1;
      const int n_right = cols - n_left;
      std::array<std::array<Wide, 2>, 3> total{};
      for (int jr = 0; jr < grid.rows(); ++jr) {
        const int dy = std::abs(py - jr * s);
        const std::size_t off = static_cast<std::size_t>(jr) * pitch;
        std::array<std::array<Values, 2>, 3> acc{};
        // Left part: weights start at the reversed-table offset, samples at 0.
        // Right part: weights start at 0, samples at n_left. Lanes past the
        // end of a part get zero weight.
        for (int part = 0; part < 2; ++part) {
          const T* w = part == 0 ? grid.left(rho, dy) + (cols - n_left) : grid.right(rho, dy);
          const int start = part == 0 ? 0 : n_left;
          const int n = part == 0 ? n_left : n_right;
          for (int i = 0; i < n; i += kBlock) {
            for (int h = 0; h < 2; ++h) {
              const int first = i + h * kHalf;
              Values wi;
              __builtin_memcpy(&wi, w + first, sizeof(wi));
              if (first + kHalf > n) wi = lane + first < n ? wi : zero;
              for (int c = 0; c < 3; ++c) {
                Values y;
                __builtin_memcpy(&y, job.samples[c] + off + start + first, sizeof(y));
                Values d = v[c] - y;
                Clamp::apply(d, one, minus_one);
                acc[c][h] += d * wi;
              }
            }
          }
        }
        for (int c = 0; c < 3; ++c)
          for (int h = 0; h < 2; ++h) total[c][h] += __builtin_convertvector(acc[c][h], Wide);
      }
      for (int c = 0; c < 3; ++c) {
        double lanes[kBlock];
        for (int k = 0; k < kHalf; ++k) {
          lanes[k] = total[c][0][k];
          lanes[k + kHalf] = total[c][1][k];
        }
        for (int span = kBlock / 2; span > 0; span /= 2)
          for (int k = 0; k < span; ++k) lanes[k] += lanes[k + span];
        (*job.out[c])(px, py) = lanes[0];
      }
    }
  }
}

#if defined(__GNUC__) && (defined(__x86_64__) || defined(__i386__))
// flatten pulls the clamp calls into the targeted body, where they can inline.
template <typename T>
[[gnu::target("avx512f"), gnu::flatten]] inline void ace_rows_avx512(const AceJob<T>& job) {
  ace_rows<T, AvxClamp<T>>(job);
}
template <typename T>
[[gnu::target("avx2"), gnu::flatten]] inline void ace_rows_avx2(const AceJob<T>& job) {
  ace_rows<T, AvxClamp<T>>(job);
}

template <typename T>
inline void ace_dispatch(const AceJob<T>& job) {
  if (__builtin_cpu_supports("avx512f")) ace_rows_avx512(job);
  else if (__builtin_cpu_supports("avx2")) ace_rows_avx2(job);
  else ace_rows(job);
}
#else
template <typename T>
inline void ace_dispatch(const AceJob<T>& job) { ace_rows(job); }
#endif

template <typename T>
inline std::array<GrayImage, 3> chromatic_adjust3(const std::array<const GrayImage*, 3>& channels,
                                                  int stride, double alpha) {
  const AceSampleGrid<T> grid(channels[0]->width(), channels[0]->height(), stride);
  std::array<std::vector<T>, 3> samples;
  std::array<GrayImage, 3> out;
  for (int c = 0; c < 3; ++c) {
    samples[c] = grid.scaled_samples(*channels[c], alpha);
    out[c] = GrayImage(channels[0]->width(), channels[0]->height());
  }
  ace_dispatch<T>({channels,
                   {samples[0].data(), samples[1].data(), samples[2].data()},
                   &grid,
                   alpha,
                   {&out[0], &out[1], &out[2]}});
  return out;
}

// Adjusts up to three channels of one image; unused slots may alias a used
// one. The exact sum (stride 1) runs in double precision, strided sums in
// single precision per sample row.
inline std::array<GrayImage, 3> chromatic_adjust3(const std::array<const GrayImage*, 3>& channels,
                                                  int stride, double alpha) {
  return stride == 1 ? chromatic_adjust3<double>(channels, stride, alpha)
                     : chromatic_adjust3<float>(channels, stride, alpha);
}

}  // namespace detail

/// Distance-weighted pairwise contrast adjustment of one channel:
///   R(x) = sum_{y != x} slope(I(x) - I(y)) / |x - y|
/// With a stride s > 1 the sum runs over the positions (i*s, j*s) only.
inline GrayImage chromatic_adjust(const GrayImage& channel, const AceConfig& cfg) {
  if (!(cfg.alpha >= 1.0)) throw ParameterError("ace alpha must be >= 1");
  const int stride = ace_stride(channel.width(), channel.height(), cfg);
  return std::move(detail::chromatic_adjust3({&channel, &channel, &channel}, stride, cfg.alpha)[0]);
}

/// Linear map of [min, max] onto [0, 1], rounded to the unit lattice. A flat
/// input maps to 0.5.
inline GrayImage stretch(const GrayImage& adjusted) {
  GrayImage out(adjusted.width(), adjusted.height(), 0.5);
  if (adjusted.empty()) return out;
  const auto [lo, hi] = std::minmax_element(adjusted.values().begin(), adjusted.values().end());
  const double range = *hi - *lo;
  if (range < 1e-12) return out;
  for (std::size_t i = 0; i < adjusted.size(); ++i)
    out[i] = snap_to_lattice((adjusted[i] - *lo) / range);
  return out;
}

/// Automatic color enhancement: per-channel adjustment followed by stretch.
inline RgbImage ace_correct(const RgbImage& img, const AceConfig& cfg) {
  if (!(cfg.alpha >= 1.0)) throw ParameterError("ace alpha must be >= 1");
  const int stride = ace_stride(img.width(), img.height(), cfg);
  auto adjusted = detail::chromatic_adjust3({&img[0], &img[1], &img[2]}, stride, cfg.alpha);
  return RgbImage(stretch(adjusted[0]), stretch(adjusted[1]), stretch(adjusted[2]));
}

}  // namespace uwstr
