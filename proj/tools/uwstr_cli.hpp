#pragma once

// Command-line front end: enhance, decompose, metrics, synth.
// Exit codes: 0 success, 1 at least one file failed, 2 invalid invocation.

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "uwstr/uwstr.hpp"

namespace uwstr::cli {

namespace fs = std::filesystem;

struct Overrides {
  std::optional<double> ace_alpha;
  std::optional<std::string> ace_stride;
  std::optional<double> rtv_lambda;
  std::optional<int> rtv_iters;
  std::optional<int> patch_radius;
  std::optional<double> t0;
  std::optional<std::string> dump_dir;
};

struct FileResult {
  bool ok = true;
  std::string message;
  std::string csv;
  nlohmann::ordered_json json;
};

inline bool is_image_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".ppm";
}

/// Expands directories to their image files; the result is sorted by path.
inline std::vector<fs::path> collect_inputs(const std::vector<std::string>& args) {
  std::vector<fs::path> out;
  for (const auto& a : args) {
    const fs::path p(a);
    std::error_code ec;
    if (fs::is_directory(p, ec)) {
      for (const auto& entry : fs::directory_iterator(p))
        if (entry.is_regular_file() && is_image_file(entry.path())) out.push_back(entry.path());
    } else {
      out.push_back(p);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// Runs `task(i)` for i in [0, n) on up to `jobs` threads. Each task writes
/// only its own slot, so results come back in input order.
template <typename Task>
void run_parallel(std::size_t n, int jobs, Task&& task) {
  const std::size_t workers = std::min<std::size_t>(std::max(jobs, 1), std::max<std::size_t>(n, 1));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) task(i);
    });
}

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot read " + p.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline PipelineConfig effective_config(const std::optional<std::string>& config_file,
                                       const Overrides& o) {
  PipelineConfig cfg;
  if (config_file) cfg = parse_config(read_file(*config_file), cfg);
  if (o.ace_alpha) cfg.ace.alpha = *o.ace_alpha;
  if (o.ace_stride) apply_setting(cfg, "ace.stride", *o.ace_stride);
  if (o.rtv_lambda) cfg.rtv.lambda = *o.rtv_lambda;
  if (o.rtv_iters) cfg.rtv.outer_iterations = *o.rtv_iters;
  if (o.patch_radius) cfg.restore.patch_radius = *o.patch_radius;
  if (o.t0) cfg.restore.t0 = *o.t0;
  if (o.dump_dir) cfg.dump_intermediates = fs::path(*o.dump_dir);
  return cfg;
}

/// Output path for one input: `-o` names a file only for a single input that
/// is not an existing directory; otherwise it is a directory.
inline fs::path output_for(const fs::path& input, const std::optional<std::string>& output,
                           std::size_t input_count, const std::string& suffix) {
  if (!output) return input.parent_path() / (input.stem().string() + suffix + ".png");
  const fs::path o(*output);
  if (input_count == 1 && !fs::is_directory(o) && o.has_extension()) return o;
  return o / (input.stem().string() + ".png");
}

inline std::vector<ReferencePatch> load_card(const fs::path& path) {
  const auto j = nlohmann::json::parse(read_file(path));
  std::vector<ReferencePatch> out;
  for (const auto& e : j) {
    ReferencePatch p;
    p.region = {e.at("x").get<int>(), e.at("y").get<int>(), e.at("width").get<int>(),
                e.at("height").get<int>()};
    p.reference = {e.at("L").get<double>(), e.at("a").get<double>(), e.at("b").get<double>()};
    out.push_back(p);
  }
  return out;
}

inline std::array<double, 3> parse_rgb(const std::string& text) {
  return detail::parse_triple(text, "--b");
}

/// Entry point shared by the executable and the tests.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Underwater image enhancement by structure-texture reconstruction", "uwstr"};
  app.require_subcommand(1);

  std::vector<std::string> inputs;
  std::optional<std::string> output;
  std::optional<std::string> config_file;
  Overrides over;
  bool emit_config = false;
  bool verbose = false;
  int jobs = 1;

  auto add_pipeline_flags = [&](CLI::App* sub) {
    sub->add_option("inputs", inputs, "Input images or directories");
    sub->add_option("-o,--output", output, "Output file (single input) or directory");
    sub->add_option("--config", config_file, "key = value configuration file");
    sub->add_option("--ace-alpha", over.ace_alpha, "ACE slope (>= 1)");
    sub->add_option("--ace-stride", over.ace_stride, "ACE sample stride, or 'auto'");
    sub->add_option("--rtv-lambda", over.rtv_lambda, "RTV smoothing weight");
    sub->add_option("--rtv-iters", over.rtv_iters, "RTV reweighting iterations");
    sub->add_option("--patch-radius", over.patch_radius, "Dark-channel patch radius");
    sub->add_option("--t0", over.t0, "Transmission floor");
    sub->add_option("--dump-intermediates", over.dump_dir, "Directory for intermediate images");
    sub->add_flag("--emit-config", emit_config, "Print the effective configuration and exit");
    sub->add_option("--jobs", jobs, "Files processed in parallel")->check(CLI::PositiveNumber);
    sub->add_flag("-v,--verbose", verbose, "Per-stage timing on stderr");
  };

  auto* enhance_cmd = app.add_subcommand("enhance", "Enhance images");
  add_pipeline_flags(enhance_cmd);
  auto* decompose_cmd = app.add_subcommand("decompose", "Write color-corrected structure/texture layers");
  add_pipeline_flags(decompose_cmd);

  std::string format = "csv";
  std::optional<std::string> card;
  auto* metrics_cmd = app.add_subcommand("metrics", "UCIQE, entropy and optional CIEDE2000 report");
  metrics_cmd->add_option("inputs", inputs, "Input images or directories")->required();
  metrics_cmd->add_option("-o,--output", output, "Report file (default: stdout)");
  metrics_cmd->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  metrics_cmd->add_option("--card", card, "JSON list of {x,y,width,height,L,a,b} reference patches");
  metrics_cmd->add_option("--jobs", jobs, "Files processed in parallel")->check(CLI::PositiveNumber);

  double synth_t = 0.7;
  std::string synth_b = "0.2,0.6,0.7";
  auto* synth_cmd = app.add_subcommand("synth", "Degrade a clean image with the imaging model");
  synth_cmd->add_option("inputs", inputs, "Clean image")->required();
  synth_cmd->add_option("-o,--output", output, "Degraded image")->required();
  synth_cmd->add_option("--t", synth_t, "Constant transmission in [0,1]")->check(CLI::Range(0.0, 1.0));
  synth_cmd->add_option("--b", synth_b, "Background light R,G,B");

  std::vector<const char*> argv{"uwstr"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, err, err);
    err << app.help();
    return 2;
  }

  PipelineConfig cfg;
  try {
    if (!metrics_cmd->parsed() && !synth_cmd->parsed()) cfg = effective_config(config_file, over);
  } catch (const std::exception& e) {
    err << "uwstr: " << e.what() << '\n';
    return 2;
  }
  if (emit_config) {
    out << format_config(cfg);
    return 0;
  }
  if (inputs.empty()) {
    err << "uwstr: no input files\n" << app.help();
    return 2;
  }

  const std::vector<fs::path> files = collect_inputs(inputs);
  std::vector<FileResult> results(files.size());
  auto guarded = [&](std::size_t i, auto&& body) {
    try {
      body(files[i], results[i]);
    } catch (const std::exception& e) {
      results[i].ok = false;
      results[i].message = files[i].string() + ": " + e.what();
    }
  };

  if (enhance_cmd->parsed()) {
    run_parallel(files.size(), jobs, [&](std::size_t i) {
      guarded(i, [&](const fs::path& in, FileResult& r) {
        const EnhanceResult res = enhance(decode_image(in), cfg, in.stem().string());
        const fs::path dst = output_for(in, output, files.size(), ".enhanced");
        if (!dst.parent_path().empty()) fs::create_directories(dst.parent_path());
        encode_image(res.image, dst);
        if (verbose) {
          std::ostringstream s;
          s << in.string() << ":";
          for (const auto& st : res.report.stages) s << ' ' << st.name << '=' << st.seconds << 's';
          r.message = s.str();
        }
      });
    });
  } else if (decompose_cmd->parsed()) {
    run_parallel(files.size(), jobs, [&](std::size_t i) {
      guarded(i, [&](const fs::path& in, FileResult&) {
        const RgbImage img = decode_image(in);
        const RgbImage corrected = ace_correct(img, cfg.ace);
        const Decomposition layers = decompose(corrected, cfg.rtv);
        const fs::path dir = output ? fs::path(*output) : in.parent_path();
        if (!dir.empty()) fs::create_directories(dir);
        encode_image(layers.structure, dir / (in.stem().string() + ".structure.png"));
        encode_image(texture_levels(corrected, layers.structure), dir / (in.stem().string() + ".texture.png"));
      });
    });
  } else if (metrics_cmd->parsed()) {
    std::vector<ReferencePatch> patches;
    try {
      if (card) patches = load_card(*card);
    } catch (const std::exception& e) {
      err << "uwstr: " << e.what() << '\n';
      return 2;
    }
    run_parallel(files.size(), jobs, [&](std::size_t i) {
      guarded(i, [&](const fs::path& in, FileResult& r) {
        const MetricReport m = evaluate(decode_image(in), &patches);
        std::ostringstream row;
        row << in.string() << ',' << detail::format_number(m.uciqe) << ','
            << detail::format_number(m.entropy_bits) << ','
            << (m.ciede2000_mean ? detail::format_number(*m.ciede2000_mean) : std::string());
        r.csv = row.str();
        r.json = {{"path", in.string()}, {"uciqe", m.uciqe}, {"entropy", m.entropy_bits}};
        r.json["ciede2000_mean"] = m.ciede2000_mean ? nlohmann::ordered_json(*m.ciede2000_mean)
                                                    : nlohmann::ordered_json(nullptr);
      });
    });
    std::ostringstream report;
    if (format == "csv") {
      report << "path,uciqe,entropy,ciede2000_mean\n";
      for (const auto& r : results)
        if (r.ok) report << r.csv << '\n';
    } else {
      auto arr = nlohmann::ordered_json::array();
      for (const auto& r : results)
        if (r.ok) arr.push_back(r.json);
      report << arr.dump(2) << '\n';
    }
    if (output) {
      std::ofstream f(*output, std::ios::binary);
      f << report.str();
      if (!f) {
        err << "uwstr: cannot write " << *output << '\n';
        return 1;
      }
    } else {
      out << report.str();
    }
  } else if (synth_cmd->parsed()) {
    std::array<double, 3> b{};
    try {
      b = parse_rgb(synth_b);
    } catch (const std::exception& e) {
      err << "uwstr: " << e.what() << '\n';
      return 2;
    }
    if (files.size() != 1) {
      err << "uwstr: synth takes exactly one input\n";
      return 2;
    }
    guarded(0, [&](const fs::path& in, FileResult&) {
      const RgbImage clean = decode_image(in);
      const TransmissionMap t(clean.width(), clean.height(), synth_t);
      encode_image(apply_forward_model(clean, t, {b[0], b[1], b[2]}), *output);
    });
  }

  int code = 0;
  for (const auto& r : results) {
    if (!r.message.empty()) err << (r.ok ? "" : "uwstr: ") << r.message << '\n';
    if (!r.ok) code = 1;
  }
  return code;
}

}  // namespace uwstr::cli
