#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "image.hpp"

namespace uwstr {

/// Reads PNG, JPEG or PPM into a normalized RgbImage. 16-bit files are
/// reduced to 8 bits by the decoder.
inline RgbImage decode_image(const std::filesystem::path& path) {
  cv::Mat bgr;
  try {
    bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  } catch (const cv::Exception&) {
    throw DecodeError(path.string());
  }
  if (bgr.empty() || bgr.type() != CV_8UC3) throw DecodeError(path.string());
  require_min_size(bgr.cols, bgr.rows);

  RgbImage img(bgr.cols, bgr.rows);
  for (int y = 0; y < bgr.rows; ++y) {
    const auto* src = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < bgr.cols; ++x) {
      img[0](x, y) = src[x][2] / 255.0;
      img[1](x, y) = src[x][1] / 255.0;
      img[2](x, y) = src[x][0] / 255.0;
    }
  }
  return img;
}

/// Quantizes to 8 bits (clamping to [0,1]) and writes a lossless PNG.
inline void encode_image(const RgbImage& img, const std::filesystem::path& path) {
  cv::Mat bgr(img.height(), img.width(), CV_8UC3);
  for (int y = 0; y < img.height(); ++y) {
    auto* dst = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < img.width(); ++x) {
      dst[x][2] = static_cast<uchar>(to_level(img[0](x, y)));
      dst[x][1] = static_cast<uchar>(to_level(img[1](x, y)));
      dst[x][0] = static_cast<uchar>(to_level(img[2](x, y)));
    }
  }
  bool ok = false;
  try {
    // Fixed compression settings keep the byte stream reproducible.
    ok = cv::imwrite(path.string(), bgr, {cv::IMWRITE_PNG_COMPRESSION, 6});
  } catch (const cv::Exception&) {
    ok = false;
  }
  if (!ok) throw IoError("cannot write image: " + path.string());
}

/// Writes a single plane as an 8-bit grayscale PNG.
inline void encode_gray(const GrayImage& plane, const std::filesystem::path& path) {
  cv::Mat out(plane.height(), plane.width(), CV_8UC1);
  for (int y = 0; y < plane.height(); ++y) {
    auto* dst = out.ptr<uchar>(y);
    for (int x = 0; x < plane.width(); ++x) dst[x] = static_cast<uchar>(to_level(plane(x, y)));
  }
  bool ok = false;
  try {
    ok = cv::imwrite(path.string(), out, {cv::IMWRITE_PNG_COMPRESSION, 6});
  } catch (const cv::Exception&) {
    ok = false;
  }
  if (!ok) throw IoError("cannot write image: " + path.string());
}

/// Maps a signed detail layer to a viewable image: v -> 0.5 + gain * v.
inline RgbImage visualize_texture(const TextureImage& texture, double gain = 10.0) {
  RgbImage out(texture.width(), texture.height());
  for (int c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < texture.pixel_count(); ++i)
      out[c][i] = 0.5 + gain * texture[c][i];
  return out;
}

/// Texture layer for storage next to an 8-bit structure dump: level
/// 128 + level(whole) - level(structure), clipped to [0,255]. Decoding the two
/// files and adding (texture - 128/255) to the structure reproduces the 8-bit
/// `whole` exactly wherever the difference fits in the byte.
inline RgbImage texture_levels(const RgbImage& whole, const RgbImage& structure) {
  if (!whole.same_shape(structure)) throw DimensionError("layers differ in shape");
  RgbImage out(whole.width(), whole.height());
  for (int c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < whole.pixel_count(); ++i)
      out[c][i] = std::clamp(128 + to_level(whole[c][i]) - to_level(structure[c][i]), 0, 255) / 255.0;
  return out;
}

}  // namespace uwstr
