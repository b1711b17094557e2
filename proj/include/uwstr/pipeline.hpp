#pragma once

#include <array>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "ace.hpp"
#include "io.hpp"
#include "json.hpp"
#include "restore.hpp"
#include "rtv.hpp"
#include "texture.hpp"

namespace uwstr {

struct PipelineConfig {
  AceConfig ace;
  RtvConfig rtv;
  RestoreConfig restore;
  DetailConfig detail;
  std::optional<std::filesystem::path> dump_intermediates;
};

struct ChannelStats {
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
};

struct StageReport {
  std::string name;
  double seconds = 0.0;
  std::array<ChannelStats, 3> channels{};
};

struct PipelineReport {
  BackgroundLight background;
  Tone tone = Tone::Blue;
  std::vector<StageReport> stages;
};

struct EnhanceResult {
  RgbImage image;
  PipelineReport report;
};

/// Stage names in execution order.
inline const std::array<std::string, 5>& stage_names() {
  static const std::array<std::string, 5> names{"color-correct", "decompose", "restore", "texture",
                                                "reconstruct"};
  return names;
}

/// Imaging model I = J t + B (1 - t), per channel. No clamping.
inline RgbImage apply_forward_model(const RgbImage& clean, const TransmissionMap& t,
                                    const BackgroundLight& bl) {
  if (!clean.same_shape(t)) throw DimensionError("transmission and image differ in shape");
  RgbImage out(clean.width(), clean.height());
  for (int c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < clean.pixel_count(); ++i)
      out[c][i] = clean[c][i] * t[i] + bl[c] * (1.0 - t[i]);
  return out;
}

/// J = J_s + J_c / max(t, t0), clamped to [0,1].
inline RgbImage reconstruct(const RgbImage& restored, const TextureImage& detail,
                            const TransmissionMap& t, double t0) {
  if (!restored.same_shape(detail) || !restored.same_shape(t))
    throw DimensionError("reconstruction inputs differ in shape");
  RgbImage out(restored.width(), restored.height());
  for (int c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < restored.pixel_count(); ++i)
      out[c][i] = restored[c][i] + detail[c][i] / std::max(t[i], t0);
  clamp_unit(out);
  return out;
}

inline std::array<ChannelStats, 3> channel_stats(const Planar3<double>& img) {
  std::array<ChannelStats, 3> out{};
  for (int c = 0; c < 3; ++c) {
    const auto values = img[c].values();
    if (values.empty()) continue;
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    out[c] = {*lo, *hi, mean(img[c])};
  }
  return out;
}

/// Report as JSON. Wall times are optional so the file can stay reproducible.
inline nlohmann::ordered_json to_json(const PipelineReport& report, bool with_timing) {
  nlohmann::ordered_json j;
  j["background_light"] = {{"b_r", report.background.r},
                           {"b_g", report.background.g},
                           {"b_b", report.background.b}};
  j["tone"] = std::string(to_string(report.tone));
  auto stages = nlohmann::ordered_json::array();
  for (const auto& s : report.stages) {
    nlohmann::ordered_json st;
    st["name"] = s.name;
    if (with_timing) st["seconds"] = s.seconds;
    auto channels = nlohmann::ordered_json::array();
    for (const auto& c : s.channels) channels.push_back({{"min", c.min}, {"max", c.max}, {"mean", c.mean}});
    st["channels"] = std::move(channels);
    stages.push_back(std::move(st));
  }
  j["stages"] = std::move(stages);
  return j;
}

inline nlohmann::ordered_json to_json(const BackgroundLight& bl) {
  return {{"b_r", bl.r}, {"b_g", bl.g}, {"b_b", bl.b}};
}

namespace detail {

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text << '\n';
  if (!out) throw IoError("cannot write " + path.string());
}

template <typename F>
auto run_stage(const char* name, F&& body) {
  try {
    return body();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

class StageClock {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

}  // namespace detail

/// Full enhancement chain: color correction, structure/texture split,
/// structure dehazing, texture boosting and recomposition. Intermediates are
/// written as `<stem>.*` files when cfg.dump_intermediates is set.
inline EnhanceResult enhance(const RgbImage& img, const PipelineConfig& cfg,
                             const std::string& stem = "image") {
  require_min_size(img.width(), img.height());
  const auto& names = stage_names();
  PipelineReport report;
  detail::StageClock clock;
  auto record = [&](int stage, const Planar3<double>& out) {
    report.stages.push_back({names[stage], clock.lap(), channel_stats(out)});
  };

  const RgbImage corrected = detail::run_stage("color-correct", [&] { return ace_correct(img, cfg.ace); });
  record(0, corrected);

  const Decomposition layers = detail::run_stage("decompose", [&] { return decompose(corrected, cfg.rtv); });
  record(1, layers.structure);

  TransmissionMap transmission;
  const RgbImage restored = detail::run_stage("restore", [&] {
    const Mask candidates = candidate_mask(layers.structure, cfg.restore);
    const BackgroundEstimate bg = background_light(layers.structure, candidates, cfg.restore);
    report.background = bg.light;
    report.tone = bg.tone;
    transmission = estimate_transmission(layers.structure, bg.light, cfg.restore);
    return recover(layers.structure, transmission, bg.light, cfg.restore.t0);
  });
  record(2, restored);

  const TextureImage detail_layer =
      detail::run_stage("texture", [&] { return enhance_texture(layers.texture, cfg.detail); });
  record(3, detail_layer);

  RgbImage result = detail::run_stage(
      "reconstruct", [&] { return reconstruct(restored, detail_layer, transmission, cfg.restore.t0); });
  record(4, result);

  if (cfg.dump_intermediates) {
    detail::run_stage("dump", [&] {
      const auto& dir = *cfg.dump_intermediates;
      std::filesystem::create_directories(dir);
      encode_image(corrected, dir / (stem + ".corrected.png"));
      encode_image(layers.structure, dir / (stem + ".structure.png"));
      encode_image(texture_levels(corrected, layers.structure), dir / (stem + ".texture.png"));
      encode_image(visualize_texture(detail_layer), dir / (stem + ".detail.png"));
      encode_gray(transmission, dir / (stem + ".transmission.png"));
      detail::write_text(dir / (stem + ".background.json"), to_json(report.background).dump(2));
      detail::write_text(dir / (stem + ".report.json"), to_json(report, false).dump(2));
      return 0;
    });
  }
  return {std::move(result), std::move(report)};
}

}  // namespace uwstr
