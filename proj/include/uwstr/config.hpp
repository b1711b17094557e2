#pragma once

#include <array>
#include <charconv>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>

#include "pipeline.hpp"

namespace uwstr {

// Flat `key = value` configuration text. Blank lines and lines starting with
// '#' are ignored. Keys mirror the PipelineConfig fields.

namespace detail {

inline std::string format_number(double v) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline double parse_double(std::string_view text, std::string_view key) {
  const std::string t = trim(text);
  double v = 0.0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc{} || res.ptr != t.data() + t.size())
    throw ParameterError("invalid number for " + std::string(key) + ": '" + t + "'");
  return v;
}

inline int parse_int(std::string_view text, std::string_view key) {
  const std::string t = trim(text);
  int v = 0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc{} || res.ptr != t.data() + t.size())
    throw ParameterError("invalid integer for " + std::string(key) + ": '" + t + "'");
  return v;
}

inline std::array<double, 3> parse_triple(std::string_view text, std::string_view key) {
  std::array<double, 3> out{};
  std::size_t start = 0;
  for (int i = 0; i < 3; ++i) {
    const auto comma = text.find(',', start);
    if ((i < 2) == (comma == std::string_view::npos))
      throw ParameterError("expected three comma-separated numbers for " + std::string(key));
    out[i] = parse_double(text.substr(start, comma == std::string_view::npos ? text.npos : comma - start), key);
    start = comma + 1;
  }
  return out;
}

inline std::string format_triple(const std::array<double, 3>& v) {
  return format_number(v[0]) + "," + format_number(v[1]) + "," + format_number(v[2]);
}

}  // namespace detail

/// Applies one `key = value` setting to cfg.
inline void apply_setting(PipelineConfig& cfg, std::string_view key, std::string_view value) {
  using detail::parse_double, detail::parse_int, detail::parse_triple, detail::trim;
  const std::string v = trim(value);
  if (key == "ace.alpha") cfg.ace.alpha = parse_double(v, key);
  else if (key == "ace.stride") {
    if (v == "auto") cfg.ace.sample_stride.reset();
    else cfg.ace.sample_stride = parse_int(v, key);
  } else if (key == "rtv.lambda") cfg.rtv.lambda = parse_double(v, key);
  else if (key == "rtv.epsilon") cfg.rtv.epsilon = parse_double(v, key);
  else if (key == "rtv.delta") cfg.rtv.delta = parse_double(v, key);
  else if (key == "rtv.iterations") cfg.rtv.outer_iterations = parse_int(v, key);
  else if (key == "rtv.linear_tolerance") cfg.rtv.linear_tolerance = parse_double(v, key);
  else if (key == "rtv.max_linear_iterations") cfg.rtv.max_linear_iterations = parse_int(v, key);
  else if (key == "rtv.irls_floor") cfg.rtv.irls_floor = parse_double(v, key);
  else if (key == "rtv.initial_irls_floor") cfg.rtv.initial_irls_floor = parse_double(v, key);
  else if (key == "restore.patch_radius") cfg.restore.patch_radius = parse_int(v, key);
  else if (key == "restore.t0") cfg.restore.t0 = parse_double(v, key);
  else if (key == "restore.top_fraction") cfg.restore.top_fraction = parse_double(v, key);
  else if (key == "restore.gamma") cfg.restore.gamma = parse_double(v, key);
  else if (key == "detail.sigmas") cfg.detail.sigmas = parse_triple(v, key);
  else if (key == "detail.weights") cfg.detail.weights = parse_triple(v, key);
  else if (key == "detail.mask_threshold") cfg.detail.mask_threshold = parse_double(v, key);
  else if (key == "dump_intermediates") {
    if (v.empty()) cfg.dump_intermediates.reset();
    else cfg.dump_intermediates = v;
  } else
    throw ParameterError("unknown config key '" + std::string(key) + "'");
}

/// Parses configuration text on top of `base`.
inline PipelineConfig parse_config(std::string_view text, PipelineConfig base = {}) {
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ParameterError("config line " + std::to_string(line_no) + ": expected key = value");
    apply_setting(base, detail::trim(std::string_view(t).substr(0, eq)),
                  std::string_view(t).substr(eq + 1));
  }
  return base;
}

/// Effective configuration as text that parse_config reads back unchanged.
inline std::string format_config(const PipelineConfig& cfg) {
  using detail::format_number, detail::format_triple;
  std::ostringstream out;
  out << "ace.alpha = " << format_number(cfg.ace.alpha) << '\n'
      << "ace.stride = "
      << (cfg.ace.sample_stride ? std::to_string(*cfg.ace.sample_stride) : std::string("auto")) << '\n'
      << "rtv.lambda = " << format_number(cfg.rtv.lambda) << '\n'
      << "rtv.epsilon = " << format_number(cfg.rtv.epsilon) << '\n'
      << "rtv.delta = " << format_number(cfg.rtv.delta) << '\n'
      << "rtv.iterations = " << cfg.rtv.outer_iterations << '\n'
      << "rtv.linear_tolerance = " << format_number(cfg.rtv.linear_tolerance) << '\n'
      << "rtv.max_linear_iterations = " << cfg.rtv.max_linear_iterations << '\n'
      << "rtv.irls_floor = " << format_number(cfg.rtv.irls_floor) << '\n'
      << "rtv.initial_irls_floor = " << format_number(cfg.rtv.initial_irls_floor) << '\n'
      << "restore.patch_radius = " << cfg.restore.patch_radius << '\n'
      << "restore.t0 = " << format_number(cfg.restore.t0) << '\n'
      << "restore.top_fraction = " << format_number(cfg.restore.top_fraction) << '\n'
      << "restore.gamma = " << format_number(cfg.restore.gamma) << '\n'
      << "detail.sigmas = " << format_triple(cfg.detail.sigmas) << '\n'
      << "detail.weights = " << format_triple(cfg.detail.weights) << '\n'
      << "detail.mask_threshold = " << format_number(cfg.detail.mask_threshold) << '\n'
      << "dump_intermediates = "
      << (cfg.dump_intermediates ? cfg.dump_intermediates->string() : std::string()) << '\n';
  return out.str();
}

}  // namespace uwstr
