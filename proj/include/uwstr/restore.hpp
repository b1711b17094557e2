#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <string_view>
#include <vector>

#include "color.hpp"
#include "image.hpp"

namespace uwstr {

/// Per-pixel backscatter transmission in [0,1].
using TransmissionMap = GrayImage;

struct BackgroundLight {
  double r = 0.0;
  double g = 0.0;
  double b = 0.0;

  double operator[](int c) const noexcept { return c == 0 ? r : (c == 1 ? g : b); }
  friend bool operator==(const BackgroundLight&, const BackgroundLight&) = default;
};

enum class Tone { Blue, Green };

inline std::string_view to_string(Tone tone) noexcept {
  return tone == Tone::Blue ? "blue" : "green";
}

struct RestoreConfig {
  /// Half-width of the square patch; the window is (2r+1)^2.
  int patch_radius = 7;
  double t0 = 0.1;
  double top_fraction = 0.001;
  double gamma = 20.0;
};

struct BackgroundEstimate {
  BackgroundLight light;
  Tone tone = Tone::Blue;
  std::size_t candidates = 0;
  std::size_t selected = 0;
};

inline void validate(const RestoreConfig& cfg) {
  if (cfg.patch_radius < 1) throw ParameterError("patch radius must be >= 1");
  if (!(cfg.t0 > 0.0 && cfg.t0 < 1.0)) throw ParameterError("t0 must lie in (0,1)");
  if (!(cfg.top_fraction > 0.0 && cfg.top_fraction <= 1.0))
    throw ParameterError("top fraction must lie in (0,1]");
  if (!(cfg.gamma > 0.0)) throw ParameterError("gamma must be > 0");
}

namespace detail {

// Sliding-window minimum along one axis (monotone deque), replicate border.
inline void running_min_1d(const double* src, double* dst, int n, int stride, int radius) {
  std::deque<int> window;
  auto at = [&](int i) { return src[static_cast<std::ptrdiff_t>(std::clamp(i, 0, n - 1)) * stride]; };
  // The window for position i covers [i - radius, i + radius]; indices past the
  // border read the edge sample, which cannot change a minimum, so clamping
  // the range to [0, n-1] is equivalent.
  int next = 0;
  for (int i = 0; i < n; ++i) {
    const int hi = std::min(n - 1, i + radius);
    for (; next <= hi; ++next) {
      while (!window.empty() && at(window.back()) >= at(next)) window.pop_back();
      window.push_back(next);
    }
    while (window.front() < i - radius) window.pop_front();
    dst[static_cast<std::ptrdiff_t>(i) * stride] = at(window.front());
  }
}

}  // namespace detail

/// Minimum over the (2r+1)^2 patch around each pixel, replicate border.
inline GrayImage patch_min(const GrayImage& plane, int radius) {
  GrayImage tmp(plane.width(), plane.height());
  GrayImage out(plane.width(), plane.height());
  for (int y = 0; y < plane.height(); ++y)
    detail::running_min_1d(&plane(0, y), &tmp(0, y), plane.width(), 1, radius);
  for (int x = 0; x < plane.width(); ++x)
    detail::running_min_1d(&tmp(x, 0), &out(x, 0), plane.height(), plane.width(), radius);
  return out;
}

/// Red dark channel: patch minimum of min{1 - R, G, B}.
inline GrayImage red_dark_channel(const RgbImage& img, int patch_radius) {
  GrayImage pixel_min(img.width(), img.height());
  for (std::size_t i = 0; i < img.pixel_count(); ++i)
    pixel_min[i] = std::min({1.0 - img[0][i], img[1][i], img[2][i]});
  return patch_min(pixel_min, patch_radius);
}

/// t(x) = 1 - patchmin min{(1-R)/(1-B_R), G/B_G, B/B_B}, clamped to [0,1].
/// The t0 floor is not applied here.
inline TransmissionMap estimate_transmission(const RgbImage& structure, const BackgroundLight& bl,
                                             const RestoreConfig& cfg) {
  validate(cfg);
  if (bl.g <= 1e-6 || bl.b <= 1e-6 || 1.0 - bl.r <= 1e-6)
    throw ParameterError("degenerate background light");
  GrayImage ratio(structure.width(), structure.height());
  for (std::size_t i = 0; i < structure.pixel_count(); ++i)
    ratio[i] = std::min({(1.0 - structure[0][i]) / (1.0 - bl.r), structure[1][i] / bl.g,
                         structure[2][i] / bl.b});
  TransmissionMap t = patch_min(ratio, cfg.patch_radius);
  for (auto& v : t.values()) v = std::clamp(1.0 - v, 0.0, 1.0);
  return t;
}

/// Gradient magnitude of a plane from forward differences (zero past the border).
inline GrayImage gradient_magnitude(const GrayImage& h) {
  GrayImage out(h.width(), h.height());
  for (int y = 0; y < h.height(); ++y)
    for (int x = 0; x < h.width(); ++x) {
      const double dx = x + 1 < h.width() ? h(x + 1, y) - h(x, y) : 0.0;
      const double dy = y + 1 < h.height() ? h(x, y + 1) - h(x, y) : 0.0;
      out(x, y) = std::sqrt(dx * dx + dy * dy);
    }
  return out;
}

/// Brightness threshold of the candidate test: mean + (255 - mean) / 3.
inline double brightness_threshold(double h_mean) noexcept { return h_mean + (255.0 - h_mean) / 3.0; }

/// Flatness threshold: the histogram mode of the rounded gradient map, capped at
/// gamma and floored at 1 so exactly flat pixels (gradient 0) qualify.
inline double flatness_threshold(const Histogram256& gradient_hist, double gamma) noexcept {
  return std::max(1.0, std::min(static_cast<double>(gradient_hist.mode()), gamma));
}

inline Mask binarize_at_least(const GrayImage& plane, double threshold) {
  Mask m(plane.width(), plane.height());
  for (std::size_t i = 0; i < plane.size(); ++i) m[i] = plane[i] >= threshold ? 1 : 0;
  return m;
}

inline Mask binarize_below(const GrayImage& plane, double threshold) {
  Mask m(plane.width(), plane.height());
  for (std::size_t i = 0; i < plane.size(); ++i) m[i] = plane[i] < threshold ? 1 : 0;
  return m;
}

/// Pixels whose level (0..255) is among the brightest `fraction` of the image.
inline Mask brightest_fraction(const GrayImage& h, double fraction) {
  Histogram256 hist;
  for (double v : h.values()) hist.add(static_cast<int>(std::lround(v)));
  const int z = hist.descending_cutoff(fraction * static_cast<double>(h.size()));
  Mask m(h.width(), h.height());
  for (std::size_t i = 0; i < h.size(); ++i) m[i] = std::lround(h[i]) >= z ? 1 : 0;
  return m;
}

/// Bright and flat pixels: candidates for the background light.
inline Mask candidate_mask(const RgbImage& img, const RestoreConfig& cfg = {}) {
  const GrayImage h = luminance255(img);
  const Mask bright = binarize_at_least(h, brightness_threshold(mean(h)));

  GrayImage grad = gradient_magnitude(h);
  Histogram256 hist;
  for (auto& v : grad.values()) {
    v = static_cast<double>(std::min<long>(std::lround(v), 255));
    hist.add(static_cast<int>(v));
  }
  const Mask flat = binarize_below(grad, flatness_threshold(hist, cfg.gamma));

  Mask out(img.width(), img.height());
  bool any = false;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = bright[i] & flat[i];
    any = any || out[i];
  }
  if (!any) return brightest_fraction(h, cfg.top_fraction);
  return out;
}

/// Blue tone when mean(B) >= mean(G), computed over the whole image.
inline Tone classify_tone(const RgbImage& img) noexcept {
  return mean(img[2]) >= mean(img[1]) ? Tone::Blue : Tone::Green;
}

/// Robust background light from the candidate pixels.
///
/// Candidates are first ranked by the channel difference matching the image
/// tone (B - R for blue, G - R for green): the 0..255 histogram of that key is
/// accumulated from the top until it holds more than top_fraction * N pixels,
/// N being the candidate count. The survivors are then ranked by brightness the
/// same way, and the light is the per-channel mean of what remains, clamped to
/// [0.05, 0.95].
inline BackgroundEstimate background_light(const RgbImage& img, const Mask& mask,
                                           const RestoreConfig& cfg = {}) {
  validate(cfg);
  if (!img.same_shape(mask)) throw DimensionError("mask and image differ in shape");
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) candidates.push_back(i);
  if (candidates.empty()) throw ParameterError("background light needs a non-empty candidate mask");

  BackgroundEstimate est;
  est.tone = classify_tone(img);
  est.candidates = candidates.size();
  const double count_threshold = cfg.top_fraction * static_cast<double>(candidates.size());
  const int key_channel = est.tone == Tone::Blue ? 2 : 1;

  auto keep_top = [&](const std::vector<int>& levels) {
    Histogram256 hist;
    for (int l : levels) hist.add(l);
    const int z = hist.descending_cutoff(count_threshold);
    std::vector<std::size_t> kept;
    for (std::size_t k = 0; k < candidates.size(); ++k)
      if (levels[k] >= z) kept.push_back(candidates[k]);
    candidates = std::move(kept);
  };

  std::vector<int> levels;
  levels.reserve(candidates.size());
  for (std::size_t i : candidates) levels.push_back(to_level(img[key_channel][i] - img[0][i]));
  keep_top(levels);

  levels.clear();
  for (std::size_t i : candidates)
    levels.push_back(static_cast<int>(std::lround(rgb_to_lab(img.get(i)).L * 2.55)));
  keep_top(levels);

  std::array<double, 3> sum{};
  for (std::size_t i : candidates)
    for (int c = 0; c < 3; ++c) sum[c] += img[c][i];
  const double n = static_cast<double>(candidates.size());
  est.selected = candidates.size();
  est.light = {std::clamp(sum[0] / n, 0.05, 0.95), std::clamp(sum[1] / n, 0.05, 0.95),
               std::clamp(sum[2] / n, 0.05, 0.95)};
  return est;
}

/// Inverts the imaging model: J = (S - B) / max(t, t0) + B, clamped to [0,1].
inline RgbImage recover(const RgbImage& structure, const TransmissionMap& t,
                        const BackgroundLight& bl, double t0, bool clamp = true) {
  if (!structure.same_shape(t)) throw DimensionError("transmission and image differ in shape");
  RgbImage out(structure.width(), structure.height());
  for (int c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < structure.pixel_count(); ++i)
      out[c][i] = (structure[c][i] - bl[c]) / std::max(t[i], t0) + bl[c];
  if (clamp) clamp_unit(out);
  return out;
}

}  // namespace uwstr
