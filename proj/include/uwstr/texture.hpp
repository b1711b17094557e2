#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "image.hpp"

namespace uwstr {

struct DetailConfig {
  std::array<double, 3> sigmas{1.0, 2.0, 4.0};
  std::array<double, 3> weights{0.5, 0.5, 0.25};
  double mask_threshold = 0.1;
};

/// Normalized Gaussian blur truncated at ceil(3 sigma), with half-sample
/// symmetric reflection at the borders. That reflection makes the operator
/// preserve the plane's sum exactly (up to rounding).
inline GrayImage gaussian_blur(const GrayImage& plane, double sigma) {
  if (!(sigma > 0.0)) throw ParameterError("gaussian sigma must be > 0");
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  double total = 0.0;
  for (int k = -radius; k <= radius; ++k)
    total += kernel[k + radius] = std::exp(-(k * k) / (2.0 * sigma * sigma));
  for (auto& k : kernel) k /= total;

  const int w = plane.width();
  const int h = plane.height();
  GrayImage tmp(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int k = -radius; k <= radius; ++k) s += kernel[k + radius] * plane(reflect_index(x + k, w), y);
      tmp(x, y) = s;
    }
  GrayImage out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int k = -radius; k <= radius; ++k) s += kernel[k + radius] * tmp(x, reflect_index(y + k, h));
      out(x, y) = s;
    }
  return out;
}

inline double sign(double v) noexcept { return static_cast<double>((v > 0.0) - (v < 0.0)); }

/// Combines the three detail bands of one sample:
///   [1 - w1 sgn(C1)] C1 + w2 C2 + w3 C3
inline double combine_detail(double fine, double middle, double coarse,
                             const std::array<double, 3>& weights) noexcept {
  return (1.0 - weights[0] * sign(fine)) * fine + weights[1] * middle + weights[2] * coarse;
}

/// Multi-scale detail boost of one signed plane; output clamped to [-1,1].
inline GrayImage multiscale_detail(const GrayImage& w, const DetailConfig& cfg) {
  const GrayImage b1 = gaussian_blur(w, cfg.sigmas[0]);
  const GrayImage b2 = gaussian_blur(w, cfg.sigmas[1]);
  const GrayImage b3 = gaussian_blur(w, cfg.sigmas[2]);
  GrayImage out(w.width(), w.height());
  for (std::size_t i = 0; i < w.size(); ++i)
    out[i] = std::clamp(combine_detail(w[i] - b1[i], b1[i] - b2[i], b2[i] - b3[i], cfg.weights),
                        -1.0, 1.0);
  return out;
}

inline TextureImage multiscale_detail(const TextureImage& w, const DetailConfig& cfg) {
  return {multiscale_detail(w[0], cfg), multiscale_detail(w[1], cfg), multiscale_detail(w[2], cfg)};
}

using Block8 = std::array<double, 64>;

/// Orthonormal 8x8 DCT-II, row-major: E[u*8 + v] has vertical frequency u and
/// horizontal frequency v.
inline Block8 dct8x8(const Block8& block) noexcept {
  static const std::array<double, 64> basis = [] {
    std::array<double, 64> c{};
    for (int k = 0; k < 8; ++k)
      for (int n = 0; n < 8; ++n)
        c[k * 8 + n] = (k == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0)) *
                       std::cos(std::numbers::pi * (2 * n + 1) * k / 16.0);
    return c;
  }();
  Block8 rows{};
  for (int y = 0; y < 8; ++y)
    for (int v = 0; v < 8; ++v) {
      double s = 0.0;
      for (int x = 0; x < 8; ++x) s += basis[v * 8 + x] * block[y * 8 + x];
      rows[y * 8 + v] = s;
    }
  Block8 out{};
  for (int u = 0; u < 8; ++u)
    for (int v = 0; v < 8; ++v) {
      double s = 0.0;
      for (int y = 0; y < 8; ++y) s += basis[u * 8 + y] * rows[y * 8 + v];
      out[u * 8 + v] = s;
    }
  return out;
}

/// Residual detail energy of an 8x8 block: total DCT energy minus the
/// (1,1), (1,2) and (2,2) coefficients (1-based, row then column).
inline double block_residual_energy(std::span<const double> block) {
  if (block.size() != 64) throw DimensionError("residual energy needs an 8x8 block");
  Block8 b{};
  std::copy(block.begin(), block.end(), b.begin());
  const Block8 e = dct8x8(b);
  double total = 0.0;
  for (double c : e) total += c * c;
  return total - e[0] * e[0] - e[1] * e[1] - e[9] * e[9];
}

/// Luma-weighted combination of the three signed detail planes.
inline GrayImage detail_luma(const TextureImage& c) {
  GrayImage out(c.width(), c.height());
  for (std::size_t i = 0; i < c.pixel_count(); ++i)
    out[i] = 0.299 * c[0][i] + 0.587 * c[1][i] + 0.114 * c[2][i];
  return out;
}

/// Block-constant mask: 1 where an 8x8 block of the luma-combined detail
/// carries residual energy above the threshold. Partial edge blocks are
/// completed by reflection.
inline Mask detail_mask(const TextureImage& c, const DetailConfig& cfg) {
  const GrayImage luma = detail_luma(c);
  const int w = luma.width();
  const int h = luma.height();
  Mask mask(w, h);
  Block8 block{};
  for (int by = 0; by < h; by += 8)
    for (int bx = 0; bx < w; bx += 8) {
      for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x)
          block[y * 8 + x] = luma(reflect_index(bx + x, w), reflect_index(by + y, h));
      const std::uint8_t m = block_residual_energy(block) > cfg.mask_threshold ? 1 : 0;
      for (int y = by; y < std::min(by + 8, h); ++y)
        for (int x = bx; x < std::min(bx + 8, w); ++x) mask(x, y) = m;
    }
  return mask;
}

/// Multiplies a detail image by the block mask, broadcast to all channels.
inline TextureImage apply_mask(const TextureImage& c, const Mask& mask) {
  TextureImage out(c.width(), c.height());
  for (int ch = 0; ch < 3; ++ch)
    for (std::size_t i = 0; i < c.pixel_count(); ++i) out[ch][i] = mask[i] ? c[ch][i] : 0.0;
  return out;
}

/// Boosted, artifact-masked texture layer.
inline TextureImage enhance_texture(const TextureImage& w, const DetailConfig& cfg) {
  const TextureImage c = multiscale_detail(w, cfg);
  return apply_mask(c, detail_mask(c, cfg));
}

}  // namespace uwstr
