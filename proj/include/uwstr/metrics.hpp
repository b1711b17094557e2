#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <vector>

#include "color.hpp"
#include "image.hpp"

namespace uwstr {

/// UCIQE combination weights (chroma spread, luma contrast, saturation).
struct UciqeWeights {
  double chroma = 0.4680;
  double contrast = 0.2745;
  double saturation = 0.2576;
};

struct MetricReport {
  double uciqe = 0.0;
  double entropy_bits = 0.0;
  std::optional<double> ciede2000_mean;
};

/// Underwater color image quality:
///   c1 * std(chroma) + c2 * (mean top 1% L - mean bottom 1% L) + c3 * mean saturation
/// with L and chroma divided by 100 and saturation = chroma / sqrt(chroma^2 + L^2).
inline double uciqe(const RgbImage& img, const UciqeWeights& weights = {}) {
  const std::size_t n = img.pixel_count();
  if (n == 0) return 0.0;
  std::vector<double> lightness(n);
  std::vector<double> chroma(n);
  double chroma_sum = 0.0;
  double saturation_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Lab lab = rgb_to_lab(img.get(i));
    const double l = lab.L / 100.0;
    const double c = std::hypot(lab.a, lab.b) / 100.0;
    lightness[i] = l;
    chroma[i] = c;
    chroma_sum += c;
    const double denom = std::hypot(c, l);
    saturation_sum += denom > 0.0 ? c / denom : 0.0;
  }
  const double chroma_mean = chroma_sum / static_cast<double>(n);
  double var = 0.0;
  for (double c : chroma) var += (c - chroma_mean) * (c - chroma_mean);
  const double chroma_std = std::sqrt(var / static_cast<double>(n));

  std::sort(lightness.begin(), lightness.end());
  const std::size_t tail = std::max<std::size_t>(1, (n + 99) / 100);
  double low = 0.0;
  double high = 0.0;
  for (std::size_t i = 0; i < tail; ++i) {
    low += lightness[i];
    high += lightness[n - 1 - i];
  }
  const double contrast = (high - low) / static_cast<double>(tail);

  return weights.chroma * chroma_std + weights.contrast * contrast +
         weights.saturation * saturation_sum / static_cast<double>(n);
}

/// Shannon entropy (bits) of one plane quantized to 256 levels.
inline double entropy(const GrayImage& plane) {
  Histogram256 hist;
  for (double v : plane.values()) hist.add(to_level(v));
  if (hist.total() == 0) return 0.0;
  double h = 0.0;
  for (int l = 0; l < 256; ++l) {
    if (hist[l] == 0) continue;
    const double p = static_cast<double>(hist[l]) / static_cast<double>(hist.total());
    h -= p * std::log2(p);
  }
  return h;
}

/// Mean of the per-channel entropies.
inline double entropy(const RgbImage& img) {
  return (entropy(img[0]) + entropy(img[1]) + entropy(img[2])) / 3.0;
}

/// CIEDE2000 color difference with kL = kC = kH = 1.
inline double ciede2000(const Lab& lab1, const Lab& lab2) noexcept {
  using std::atan2, std::cos, std::exp, std::pow, std::sin, std::sqrt;
  constexpr double pi = std::numbers::pi;
  constexpr double deg = pi / 180.0;
  const double pow25_7 = 6103515625.0;  // 25^7

  const double c1 = std::hypot(lab1.a, lab1.b);
  const double c2 = std::hypot(lab2.a, lab2.b);
  const double c_bar = 0.5 * (c1 + c2);
  const double c_bar7 = pow(c_bar, 7.0);
  const double g = 0.5 * (1.0 - sqrt(c_bar7 / (c_bar7 + pow25_7)));
  const double a1p = (1.0 + g) * lab1.a;
  const double a2p = (1.0 + g) * lab2.a;
  const double c1p = std::hypot(a1p, lab1.b);
  const double c2p = std::hypot(a2p, lab2.b);

  auto hue = [&](double b, double ap) {
    if (b == 0.0 && ap == 0.0) return 0.0;
    double h = atan2(b, ap);
    if (h < 0.0) h += 2.0 * pi;
    return h;
  };
  const double h1p = hue(lab1.b, a1p);
  const double h2p = hue(lab2.b, a2p);

  const double dLp = lab2.L - lab1.L;
  const double dCp = c2p - c1p;
  double dhp = 0.0;
  if (c1p * c2p != 0.0) {
    dhp = h2p - h1p;
    if (dhp > pi) dhp -= 2.0 * pi;
    else if (dhp < -pi) dhp += 2.0 * pi;
  }
  const double dHp = 2.0 * sqrt(c1p * c2p) * sin(dhp / 2.0);

  const double l_bar = 0.5 * (lab1.L + lab2.L);
  const double cp_bar = 0.5 * (c1p + c2p);
  double hp_bar = h1p + h2p;
  if (c1p * c2p != 0.0) {
    if (std::abs(h1p - h2p) <= pi) hp_bar *= 0.5;
    else if (h1p + h2p < 2.0 * pi) hp_bar = 0.5 * (h1p + h2p + 2.0 * pi);
    else hp_bar = 0.5 * (h1p + h2p - 2.0 * pi);
  }

  const double t = 1.0 - 0.17 * cos(hp_bar - 30.0 * deg) + 0.24 * cos(2.0 * hp_bar) +
                   0.32 * cos(3.0 * hp_bar + 6.0 * deg) - 0.20 * cos(4.0 * hp_bar - 63.0 * deg);
  const double d_theta = 30.0 * deg * exp(-pow((hp_bar / deg - 275.0) / 25.0, 2.0));
  const double cp_bar7 = pow(cp_bar, 7.0);
  const double r_c = 2.0 * sqrt(cp_bar7 / (cp_bar7 + pow25_7));
  const double l50 = (l_bar - 50.0) * (l_bar - 50.0);
  const double s_l = 1.0 + 0.015 * l50 / sqrt(20.0 + l50);
  const double s_c = 1.0 + 0.045 * cp_bar;
  const double s_h = 1.0 + 0.015 * cp_bar * t;
  const double r_t = -sin(2.0 * d_theta) * r_c;

  const double tl = dLp / s_l;
  const double tc = dCp / s_c;
  const double th = dHp / s_h;
  return sqrt(tl * tl + tc * tc + th * th + r_t * tc * th);
}

struct Rect {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;
};

struct ReferencePatch {
  Rect region;
  Lab reference;
};

/// Mean Lab over a rectangle (pixelwise conversion, then averaging).
inline Lab mean_lab(const RgbImage& img, const Rect& r) {
  if (r.width <= 0 || r.height <= 0 || r.x < 0 || r.y < 0 || r.x + r.width > img.width() ||
      r.y + r.height > img.height())
    throw DimensionError("color card region outside image");
  Lab sum;
  for (int y = r.y; y < r.y + r.height; ++y)
    for (int x = r.x; x < r.x + r.width; ++x) {
      const Lab p = rgb_to_lab(std::array<double, 3>{img[0](x, y), img[1](x, y), img[2](x, y)});
      sum.L += p.L;
      sum.a += p.a;
      sum.b += p.b;
    }
  const double n = static_cast<double>(r.width) * r.height;
  return {sum.L / n, sum.a / n, sum.b / n};
}

/// Average CIEDE2000 between each region's mean color and its reference.
inline double color_card_score(const RgbImage& img, const std::vector<ReferencePatch>& patches) {
  if (patches.empty()) throw ParameterError("color card needs at least one patch");
  double total = 0.0;
  for (const auto& p : patches) total += ciede2000(mean_lab(img, p.region), p.reference);
  return total / static_cast<double>(patches.size());
}

inline MetricReport evaluate(const RgbImage& img,
                             const std::vector<ReferencePatch>* patches = nullptr) {
  MetricReport r;
  r.uciqe = uciqe(img);
  r.entropy_bits = entropy(img);
  if (patches && !patches->empty()) r.ciede2000_mean = color_card_score(img, *patches);
  return r;
}

}  // namespace uwstr
