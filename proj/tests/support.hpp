#pragma once

// Shared fixtures and brute-force reference implementations for the tests.
// The references deliberately avoid the library's fast paths: straight loops,
// dense window matrices, no vector kernels.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "uwstr/uwstr.hpp"

namespace uwstr::test {

inline double max_abs_diff(const GrayImage& a, const GrayImage& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline double max_abs_diff(const Planar3<double>& a, const Planar3<double>& b) {
  return std::max({max_abs_diff(a[0], b[0]), max_abs_diff(a[1], b[1]), max_abs_diff(a[2], b[2])});
}

/// Uniform noise in [lo, hi].
inline GrayImage random_plane(int w, int h, std::uint32_t seed, double lo = 0.0, double hi = 1.0) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  GrayImage p(w, h);
  for (auto& v : p.values()) v = dist(rng);
  return p;
}

/// Smooth plane: a few low-frequency cosines plus an offset, inside [0.05, 0.95].
inline GrayImage random_smooth_plane(int w, int h, std::mt19937& rng) {
  std::uniform_real_distribution<double> freq(0.5, 3.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> amp(0.05, 0.2);
  std::uniform_real_distribution<double> base(0.3, 0.7);
  GrayImage p(w, h, base(rng));
  for (int k = 0; k < 4; ++k) {
    const double fx = freq(rng) / w;
    const double fy = freq(rng) / h;
    const double ph = phase(rng);
    const double a = amp(rng);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        p(x, y) += a * std::cos(2.0 * std::numbers::pi * (fx * x + fy * y) + ph);
  }
  for (auto& v : p.values()) v = std::clamp(v, 0.05, 0.95);
  return p;
}

inline RgbImage random_smooth_image(int w, int h, std::uint32_t seed) {
  std::mt19937 rng(seed);
  GrayImage r = random_smooth_plane(w, h, rng);
  GrayImage g = random_smooth_plane(w, h, rng);
  GrayImage b = random_smooth_plane(w, h, rng);
  return {std::move(r), std::move(g), std::move(b)};
}

/// Clean test scene: smooth colored background, a few flat rectangles and a
/// band of fine texture. Values stay inside [0.05, 0.95].
inline RgbImage clean_scene(int w, int h, std::uint32_t seed) {
  RgbImage img = random_smooth_image(w, h, seed);
  std::mt19937 rng(seed ^ 0x9e3779b9u);
  std::uniform_int_distribution<int> px(0, w - 1);
  std::uniform_int_distribution<int> py(0, h - 1);
  std::uniform_real_distribution<double> color(0.1, 0.9);
  for (int k = 0; k < 3; ++k) {
    const int x0 = px(rng) / 2;
    const int y0 = py(rng) / 2;
    const int x1 = std::min(w, x0 + w / 4);
    const int y1 = std::min(h, y0 + h / 4);
    const std::array<double, 3> c{color(rng), color(rng), color(rng)};
    for (int y = y0; y < y1; ++y)
      for (int x = x0; x < x1; ++x)
        for (int ch = 0; ch < 3; ++ch) img[ch](x, y) = c[ch];
  }
  for (int y = h / 2; y < h / 2 + h / 8; ++y)
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < 3; ++ch)
        img[ch](x, y) = std::clamp(img[ch](x, y) + 0.08 * std::sin(x * 1.7 + y * 0.9), 0.05, 0.95);
  return img;
}

/// Color-balanced scene: shared luminance structure around the given mean
/// exposure, mild per-channel chroma, a few tinted flat objects and a textured
/// band. Channel means stay close, so any strong cast in a degraded copy comes
/// from the degradation.
inline RgbImage natural_scene(int w, int h, std::uint32_t seed, double exposure = 0.42) {
  std::mt19937 rng(seed);
  GrayImage luma = random_smooth_plane(w, h, rng);
  const double shift = exposure - mean(luma);
  for (auto& v : luma.values()) v += shift;
  RgbImage img(w, h);
  for (int c = 0; c < 3; ++c) {
    const GrayImage tint = random_smooth_plane(w, h, rng);
    const double m = mean(tint);
    for (std::size_t i = 0; i < img.pixel_count(); ++i) img[c][i] = luma[i] + 0.3 * (tint[i] - m);
  }
  std::uniform_int_distribution<int> px(0, w - 1);
  std::uniform_int_distribution<int> py(0, h - 1);
  std::uniform_real_distribution<double> level(exposure - 0.2, exposure + 0.2);
  std::uniform_real_distribution<double> tint(-0.1, 0.1);
  for (int k = 0; k < 4; ++k) {
    const int x0 = px(rng) * 3 / 4;
    const int y0 = py(rng) * 3 / 4;
    const double g = level(rng);
    const std::array<double, 3> c{g + tint(rng), g + tint(rng), g + tint(rng)};
    for (int y = y0; y < std::min(h, y0 + h / 5); ++y)
      for (int x = x0; x < std::min(w, x0 + w / 5); ++x)
        for (int ch = 0; ch < 3; ++ch) img[ch](x, y) = c[ch];
  }
  for (int y = h / 3; y < h / 3 + h / 10; ++y)
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < 3; ++ch) img[ch](x, y) += 0.06 * std::sin(x * 1.3 + y * 0.7);
  clamp_unit(img);
  for (int c = 0; c < 3; ++c)
    for (auto& v : img[c].values()) v = std::clamp(v, 0.05, 0.95);
  return img;
}

inline std::array<double, 3> channel_means(const RgbImage& img) {
  return {mean(img[0]), mean(img[1]), mean(img[2])};
}

/// Euclidean distance between two channel-mean triples.
inline double mean_distance(const std::array<double, 3>& a, const std::array<double, 3>& b) {
  return std::hypot(a[0] - b[0], a[1] - b[1], a[2] - b[2]);
}

/// Spread of the channel means: zero for a gray-balanced image.
inline double color_cast(const RgbImage& img) {
  const auto m = channel_means(img);
  return std::max({m[0], m[1], m[2]}) - std::min({m[0], m[1], m[2]});
}

inline RgbImage flip_vertical_horizontal(const RgbImage& img) {
  RgbImage out(img.width(), img.height());
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < img.height(); ++y)
      for (int x = 0; x < img.width(); ++x)
        out[c](img.width() - 1 - x, img.height() - 1 - y) = img[c](x, y);
  return out;
}

/// Pairwise contrast sum evaluated literally, in row-major order over the
/// (strided) sample positions.
inline GrayImage ace_oracle(const GrayImage& ch, double alpha, int stride) {
  GrayImage out(ch.width(), ch.height());
  for (int py = 0; py < ch.height(); ++py)
    for (int px = 0; px < ch.width(); ++px) {
      double s = 0.0;
      for (int qy = 0; qy < ch.height(); qy += stride)
        for (int qx = 0; qx < ch.width(); qx += stride) {
          if (qx == px && qy == py) continue;
          const double d = std::hypot(static_cast<double>(qx - px), static_cast<double>(qy - py));
          s += std::clamp(alpha * (ch(px, py) - ch(qx, qy)), -1.0, 1.0) / d;
        }
      out(px, py) = s;
    }
  return out;
}

/// Dense normalized Gaussian window over a small image: g[p][q] sums to one
/// over q for every p; q ranges over the truncated square of radius ceil(2 delta).
class DenseWindow {
 public:
  DenseWindow(int w, int h, double delta) : w_(w), h_(h), n_(static_cast<std::size_t>(w) * h) {
    const int r = static_cast<int>(std::ceil(2.0 * delta));
    g_.assign(n_ * n_, 0.0);
    for (int py = 0; py < h; ++py)
      for (int px = 0; px < w; ++px) {
        const std::size_t p = static_cast<std::size_t>(py) * w + px;
        double total = 0.0;
        for (int qy = std::max(0, py - r); qy <= std::min(h - 1, py + r); ++qy)
          for (int qx = std::max(0, px - r); qx <= std::min(w - 1, px + r); ++qx) {
            const double dx = qx - px;
            const double dy = qy - py;
            const double v = std::exp(-(dx * dx + dy * dy) / (2.0 * delta * delta));
            g_[p * n_ + static_cast<std::size_t>(qy) * w + qx] = v;
            total += v;
          }
        for (std::size_t q = 0; q < n_; ++q) g_[p * n_ + q] /= total;
      }
  }

  std::vector<double> apply(const std::vector<double>& a) const {
    std::vector<double> out(n_, 0.0);
    for (std::size_t p = 0; p < n_; ++p) {
      double s = 0.0;
      for (std::size_t q = 0; q < n_; ++q) s += g_[p * n_ + q] * a[q];
      out[p] = s;
    }
    return out;
  }

  std::vector<double> adjoint(const std::vector<double>& a) const {
    std::vector<double> out(n_, 0.0);
    for (std::size_t p = 0; p < n_; ++p)
      for (std::size_t q = 0; q < n_; ++q) out[q] += g_[p * n_ + q] * a[p];
    return out;
  }

  int width() const { return w_; }
  int height() const { return h_; }

 private:
  int w_;
  int h_;
  std::size_t n_;
  std::vector<double> g_;
};

inline std::array<std::vector<double>, 2> forward_differences(const std::vector<double>& s, int w, int h) {
  std::vector<double> dx(s.size(), 0.0);
  std::vector<double> dy(s.size(), 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      if (x + 1 < w) dx[i] = s[i + 1] - s[i];
      if (y + 1 < h) dy[i] = s[i + w] - s[i];
    }
  return {dx, dy};
}

/// Structure-texture objective evaluated with the dense window.
inline double rtv_objective_oracle(const std::vector<double>& s, const std::vector<double>& input,
                                   const DenseWindow& g, double lambda, double eps) {
  double data = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) data += (s[i] - input[i]) * (s[i] - input[i]);
  double penalty = 0.0;
  for (const auto& d : forward_differences(s, g.width(), g.height())) {
    std::vector<double> abs_d(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) abs_d[i] = std::abs(d[i]);
    const auto total = g.apply(abs_d);
    const auto inherent = g.apply(d);
    for (std::size_t i = 0; i < d.size(); ++i) penalty += total[i] / (std::abs(inherent[i]) + eps);
  }
  return data + lambda * penalty;
}

inline std::vector<double> to_vector(const GrayImage& p) { return {p.values().begin(), p.values().end()}; }

inline double rtv_objective_oracle(const GrayImage& s, const GrayImage& input, double lambda,
                                   double eps, double delta) {
  const DenseWindow g(s.width(), s.height(), delta);
  return rtv_objective_oracle(to_vector(s), to_vector(input), g, lambda, eps);
}

/// (Sub)gradient of the objective, differentiating through |.| with sign().
inline std::vector<double> rtv_gradient_oracle(const std::vector<double>& s,
                                               const std::vector<double>& input,
                                               const DenseWindow& g, double lambda, double eps) {
  const int w = g.width();
  const int h = g.height();
  auto sgn = [](double v) { return static_cast<double>((v > 0.0) - (v < 0.0)); };
  std::vector<double> grad(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) grad[i] = 2.0 * (s[i] - input[i]);
  const auto diffs = forward_differences(s, w, h);
  for (int axis = 0; axis < 2; ++axis) {
    const auto& d = diffs[axis];
    std::vector<double> abs_d(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) abs_d[i] = std::abs(d[i]);
    const auto total = g.apply(abs_d);
    const auto inherent = g.apply(d);
    std::vector<double> inv(d.size());
    std::vector<double> second(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double den = std::abs(inherent[i]) + eps;
      inv[i] = 1.0 / den;
      second[i] = total[i] / (den * den) * sgn(inherent[i]);
    }
    const auto a = g.adjoint(inv);
    const auto b = g.adjoint(second);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * w + x;
        const bool inside = axis == 0 ? x + 1 < w : y + 1 < h;
        if (!inside) continue;
        const double gd = lambda * (a[i] * sgn(d[i]) - b[i]);
        const std::size_t j = axis == 0 ? i + 1 : i + w;
        grad[i] -= gd;
        grad[j] += gd;
      }
  }
  return grad;
}

/// Projected gradient descent onto [0,1] with a simple accept/backtrack step
/// rule; returns the best point found.
inline GrayImage pgd_oracle(const GrayImage& input, double lambda, double eps, double delta,
                            int steps) {
  const DenseWindow g(input.width(), input.height(), delta);
  const auto r = to_vector(input);
  auto s = r;
  double f = rtv_objective_oracle(s, r, g, lambda, eps);
  double step = 0.1;
  for (int it = 0; it < steps && step >= 1e-12; ++it) {
    const auto grad = rtv_gradient_oracle(s, r, g, lambda, eps);
    while (step >= 1e-12) {
      std::vector<double> next(s.size());
      for (std::size_t i = 0; i < s.size(); ++i) next[i] = std::clamp(s[i] - step * grad[i], 0.0, 1.0);
      const double fn = rtv_objective_oracle(next, r, g, lambda, eps);
      if (fn < f) {
        s = std::move(next);
        f = fn;
        step *= 1.2;
        break;
      }
      step *= 0.5;
    }
  }
  GrayImage out(input.width(), input.height());
  for (std::size_t i = 0; i < s.size(); ++i) out[i] = s[i];
  return out;
}

/// DCT-II summed term by term: E(u,v) = c(u) c(v) sum_y sum_x f(y,x) cos(..u..y) cos(..v..x).
inline Block8 dct_oracle(const Block8& f) {
  Block8 e{};
  for (int u = 0; u < 8; ++u)
    for (int v = 0; v < 8; ++v) {
      const double cu = u == 0 ? std::sqrt(0.125) : 0.5;
      const double cv = v == 0 ? std::sqrt(0.125) : 0.5;
      double s = 0.0;
      for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x)
          s += f[y * 8 + x] * std::cos((2 * y + 1) * u * std::numbers::pi / 16.0) *
               std::cos((2 * x + 1) * v * std::numbers::pi / 16.0);
      e[u * 8 + v] = cu * cv * s;
    }
  return e;
}

inline double residual_energy_oracle(const Block8& f) {
  const Block8 e = dct_oracle(f);
  double total = 0.0;
  for (double c : e) total += c * c;
  return total - e[0] * e[0] - e[1] * e[1] - e[9] * e[9];
}

inline Block8 checkerboard_block(double amplitude) {
  Block8 b{};
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) b[y * 8 + x] = ((x + y) % 2 == 0) ? amplitude : -amplitude;
  return b;
}

/// Unique scratch directory removed on destruction.
// 64x64 dark background with a little texture and a flat 16x16 patch at (24, 24).
inline RgbImage patch_scene(std::uint32_t seed) {
  RgbImage img = make_constant(64, 64, {0.05, 0.10, 0.12});
  const GrayImage n = random_plane(64, 64, seed, -0.04, 0.04);
  for (int c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < img.pixel_count(); ++i) img[c][i] = std::max(0.0, img[c][i] + n[i]);
  const std::array<double, 3> patch{0.3, 0.5, 0.9};
  for (int y = 24; y < 40; ++y)
    for (int x = 24; x < 40; ++x)
      for (int c = 0; c < 3; ++c) img[c](x, y) = patch[c];
  return img;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("uwstr-" + tag + "-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace uwstr::test
