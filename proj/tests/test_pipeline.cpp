#include <gtest/gtest.h>

#include "support.hpp"

namespace uwstr {
namespace {

TEST(Pipeline, ForwardModelExamples) {
  const RgbImage clean = test::random_smooth_image(10, 8, 1);
  const BackgroundLight bl{0.2, 0.6, 0.7};
  EXPECT_EQ(test::max_abs_diff(apply_forward_model(clean, TransmissionMap(10, 8, 1.0), bl), clean), 0.0);
  EXPECT_EQ(test::max_abs_diff(apply_forward_model(clean, TransmissionMap(10, 8, 0.0), bl),
                               make_constant(10, 8, {0.2, 0.6, 0.7})),
            0.0);
  const RgbImage out = apply_forward_model(make_constant(10, 8, {0.8, 0.8, 0.8}), TransmissionMap(10, 8, 0.5),
                                           {0.6, 0.6, 0.6});
  EXPECT_NEAR(out[0](3, 3), 0.7, 1e-15);
  EXPECT_THROW(apply_forward_model(clean, TransmissionMap(8, 8, 1.0), bl), DimensionError);
}

TEST(Pipeline, ReconstructExamples) {
  const RgbImage js = test::random_smooth_image(10, 8, 2);
  EXPECT_EQ(test::max_abs_diff(reconstruct(js, TextureImage(10, 8), TransmissionMap(10, 8, 0.3), 0.1), js), 0.0);

  TextureImage jc(10, 8);
  for (int c = 0; c < 3; ++c) jc[c] = test::random_plane(10, 8, 20 + c, -0.02, 0.02);
  const RgbImage sum = reconstruct(js, jc, TransmissionMap(10, 8, 1.0), 0.1);
  for (int c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < sum.pixel_count(); ++i) EXPECT_EQ(sum[c][i], js[c][i] + jc[c][i]);

  const RgbImage half = reconstruct(make_constant(10, 8, {0.5, 0.5, 0.5}),
                                    {GrayImage(10, 8, 0.01), GrayImage(10, 8, 0.01), GrayImage(10, 8, 0.01)},
                                    TransmissionMap(10, 8, 0.5), 0.1);
  EXPECT_NEAR(half[2](1, 1), 0.52, 1e-15);

  // The floor caps the gain at 1/t0.
  const RgbImage capped = reconstruct(make_constant(10, 8, {0.5, 0.5, 0.5}),
                                      {GrayImage(10, 8, 0.01), GrayImage(10, 8, 0.01), GrayImage(10, 8, 0.01)},
                                      TransmissionMap(10, 8, 0.0), 0.1);
  EXPECT_NEAR(capped[0](0, 0), 0.6, 1e-15);
}

TEST(Pipeline, ConstantGrayStaysConstant) {
  const EnhanceResult r = enhance(make_constant(24, 20, {0.5, 0.5, 0.5}), {});
  for (int c = 0; c < 3; ++c) {
    const auto [lo, hi] = std::minmax_element(r.image[c].values().begin(), r.image[c].values().end());
    EXPECT_EQ(*lo, *hi);
  }
}

TEST(Pipeline, ReportListsStagesInOrder) {
  const EnhanceResult r = enhance(test::clean_scene(32, 32, 3), {});
  ASSERT_EQ(r.report.stages.size(), stage_names().size());
  for (std::size_t k = 0; k < stage_names().size(); ++k) EXPECT_EQ(r.report.stages[k].name, stage_names()[k]);
  EXPECT_EQ(stage_names()[0], "color-correct");
  EXPECT_EQ(stage_names()[4], "reconstruct");

  const auto j = to_json(r.report, false);
  EXPECT_FALSE(j["stages"][0].contains("seconds"));
  EXPECT_TRUE(to_json(r.report, true)["stages"][0].contains("seconds"));
  EXPECT_EQ(j["tone"], std::string(to_string(r.report.tone)));
}

TEST(Pipeline, OutputLiesInUnitRange) {
  for (std::uint32_t seed : {4u, 5u}) {
    const EnhanceResult r = enhance(test::clean_scene(40, 36, seed), {});
    for (int c = 0; c < 3; ++c)
      for (double v : r.image[c].values()) {
        ASSERT_GE(v, 0.0);
        ASSERT_LE(v, 1.0);
      }
  }
}

TEST(Pipeline, RepeatedRunsAreBitIdentical) {
  const RgbImage img = test::clean_scene(48, 40, 6);
  const EnhanceResult a = enhance(img, {});
  const EnhanceResult b = enhance(img, {});
  for (int c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < img.pixel_count(); ++i) ASSERT_EQ(a.image[c][i], b.image[c][i]);
  EXPECT_EQ(to_json(a.report, false).dump(), to_json(b.report, false).dump());
}

TEST(Pipeline, InjectedParametersInvertEndToEnd) {
  const RgbImage clean = test::clean_scene(32, 32, 7);
  const BackgroundLight bl{0.2, 0.6, 0.7};
  const TransmissionMap t(32, 32, 0.7);
  const RgbImage back = recover(apply_forward_model(clean, t, bl), t, bl, 0.1, false);
  EXPECT_LE(test::max_abs_diff(back, clean), 1e-6);
}

TEST(Pipeline, EnhancementReducesColorCast) {
  const BackgroundLight bl{0.2, 0.6, 0.7};
  for (std::uint32_t seed : {8u, 9u}) {
    const RgbImage degraded = apply_forward_model(test::clean_scene(64, 64, seed), TransmissionMap(64, 64, 0.7), bl);
    EXPECT_LT(test::color_cast(enhance(degraded, {}).image), test::color_cast(degraded)) << seed;
  }
}

TEST(Pipeline, EnhancementMovesTowardCleanChannelMeans) {
  const BackgroundLight bl{0.2, 0.6, 0.7};
  for (std::uint32_t seed : {8u, 9u}) {
    const RgbImage clean = test::natural_scene(64, 64, seed);
    const RgbImage degraded = apply_forward_model(clean, TransmissionMap(64, 64, 0.7), bl);
    const auto target = test::channel_means(clean);
    EXPECT_LT(test::mean_distance(test::channel_means(enhance(degraded, {}).image), target),
              test::mean_distance(test::channel_means(degraded), target))
        << seed;
  }
}

TEST(Pipeline, DumpedLayersReassemble) {
  test::TempDir dir("dump");
  PipelineConfig cfg;
  cfg.dump_intermediates = dir.path();
  const RgbImage img = test::clean_scene(40, 40, 10);
  const EnhanceResult r = enhance(img, cfg, "scene");
  for (const char* suffix : {".corrected.png", ".structure.png", ".texture.png", ".detail.png",
                             ".transmission.png", ".background.json", ".report.json"})
    EXPECT_TRUE(std::filesystem::exists(dir / (std::string("scene") + suffix))) << suffix;

  const RgbImage corrected = decode_image(dir / "scene.corrected.png");
  const RgbImage structure = decode_image(dir / "scene.structure.png");
  const RgbImage texture = decode_image(dir / "scene.texture.png");
  const Decomposition layers = decompose(ace_correct(img, cfg.ace), cfg.rtv);
  std::size_t saturated = 0;
  for (int c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < img.pixel_count(); ++i) {
      const double t = texture[c][i] - 128.0 / 255.0;
      const double w = layers.texture[c][i];
      if (texture[c][i] == 0.0 || texture[c][i] == 1.0) {
        // Hard edges can push the layer past what one byte holds around 128.
        ++saturated;
        ASSERT_GT(w * t, 0.0) << c << ":" << i;
        ASSERT_GE(std::abs(w) + 1.0 / 255.0 + 1e-12, std::abs(t)) << c << ":" << i;
        continue;
      }
      ASSERT_LE(std::abs(structure[c][i] + t - corrected[c][i]), 1.0 / 255.0) << c << ":" << i;
      ASSERT_LE(std::abs(t - w), 1.0 / 255.0 + 1e-12) << c << ":" << i;
    }
  EXPECT_LT(saturated, img.pixel_count() * 3 / 50);

  const auto bg = nlohmann::json::parse(test::read_bytes(dir / "scene.background.json"));
  EXPECT_DOUBLE_EQ(bg["b_r"].get<double>(), r.report.background.r);
  const auto report = nlohmann::json::parse(test::read_bytes(dir / "scene.report.json"));
  EXPECT_EQ(report["stages"].size(), 5u);
}

TEST(Pipeline, FailuresNameTheStage) {
  PipelineConfig cfg;
  cfg.rtv.lambda = -1.0;
  try {
    enhance(test::clean_scene(16, 16, 1), cfg);
    FAIL() << "expected a stage error";
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "decompose");
  }
  cfg = {};
  cfg.ace.alpha = 0.5;
  try {
    enhance(test::clean_scene(16, 16, 1), cfg);
    FAIL() << "expected a stage error";
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "color-correct");
  }
  cfg = {};
  cfg.restore.t0 = 2.0;
  EXPECT_THROW(enhance(test::clean_scene(16, 16, 1), cfg), StageError);
  EXPECT_THROW(enhance(make_constant(7, 16, {0.5, 0.5, 0.5}), {}), DimensionError);
}

}  // namespace
}  // namespace uwstr
