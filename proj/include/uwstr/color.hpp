#pragma once

#include <array>
#include <cmath>

#include "image.hpp"

namespace uwstr {

struct Lab {
  double L = 0.0;
  double a = 0.0;
  double b = 0.0;
};

namespace detail {

// sRGB electro-optical transfer: stored value -> linear light.
inline double srgb_to_linear(double v) noexcept {
  return v <= 0.04045 ? v / 12.92 : std::pow((v + 0.055) / 1.055, 2.4);
}

inline double lab_f(double t) noexcept {
  constexpr double kDelta = 6.0 / 29.0;
  constexpr double kDelta3 = kDelta * kDelta * kDelta;
  return t > kDelta3 ? std::cbrt(t) : t / (3.0 * kDelta * kDelta) + 4.0 / 29.0;
}

// D65 reference white, CIE 1931 2° observer, taken as the row sums of the
// conversion matrix below so that sRGB white lands exactly on it.
constexpr double kWhiteX = 0.4124564 + 0.3575761 + 0.1804375;
constexpr double kWhiteY = 0.2126729 + 0.7151522 + 0.0721750;
constexpr double kWhiteZ = 0.0193339 + 0.1191920 + 0.9503041;

}  // namespace detail

/// Converts one sRGB triple in [0,1] to CIELAB (D65). Neutral triples (R = G = B)
/// get a = b = 0 exactly; rounding in the matrix product would otherwise leave
/// a chroma of order 1e-7.
inline Lab rgb_to_lab(const std::array<double, 3>& rgb) noexcept {
  const double r = detail::srgb_to_linear(rgb[0]);
  const double g = detail::srgb_to_linear(rgb[1]);
  const double b = detail::srgb_to_linear(rgb[2]);

  const double x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
  const double y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
  const double z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;

  const double fx = detail::lab_f(x / detail::kWhiteX);
  const double fy = detail::lab_f(y / detail::kWhiteY);
  const double fz = detail::lab_f(z / detail::kWhiteZ);

  Lab out;
  out.L = std::clamp(116.0 * fy - 16.0, 0.0, 100.0);
  if (rgb[0] == rgb[1] && rgb[1] == rgb[2]) return out;
  out.a = 500.0 * (fx - fy);
  out.b = 200.0 * (fy - fz);
  return out;
}

inline LabImage rgb_to_lab(const RgbImage& img) {
  LabImage lab{GrayImage(img.width(), img.height()), GrayImage(img.width(), img.height()),
               GrayImage(img.width(), img.height())};
  for (std::size_t i = 0; i < img.pixel_count(); ++i) {
    const Lab p = rgb_to_lab(img.get(i));
    lab.L[i] = p.L;
    lab.a[i] = p.a;
    lab.b[i] = p.b;
  }
  return lab;
}

/// CIELAB lightness rescaled from [0,100] to [0,255], the scale the
/// background-light thresholds are expressed in.
inline GrayImage luminance255(const RgbImage& img) {
  GrayImage out(img.width(), img.height());
  for (std::size_t i = 0; i < img.pixel_count(); ++i) out[i] = rgb_to_lab(img.get(i)).L * 2.55;
  return out;
}

}  // namespace uwstr
