#include <gtest/gtest.h>

#include <cmath>

#include "punc/baselines.hpp"
#include "punc/detect_metrics.hpp"
#include "punc/errors.hpp"
#include "punc/mock_backend.hpp"
#include "random.hpp"
#include "worlds.hpp"

using namespace punc::baselines;
using punc::backend::ImageRef;
using punc::backend::MockBackend;
namespace cw = punc::conceptworld;

namespace {

ImageRef numeric(std::vector<double> v) {
  return ImageRef::from_payload(encode_numeric_payload(v), "test", 0);
}

ImageRef concepts(const cw::ConceptWorld& w, cw::ConceptSet s) {
  return ImageRef::from_payload(cw::render_pseudo_image(s, w), "test", 0);
}

cw::ConceptWorld toy_world(double rate) {
  cw::WorldParams p;
  p.seed = 17;
  p.aleatoric_rate = rate;
  return cw::ConceptWorld({"cat", "dog", "tree", "car", "sky", "sun", "hat", "box"},
                          {"cat", "dog", "tree", "car", "sky", "sun", "hat", "box"}, p);
}

ImageSimilarityConfig mse_cfg(Normalization n = Normalization::none) {
  ImageSimilarityConfig c;
  c.metric = SimilarityMetric::mse;
  c.normalization = n;
  return c;
}

}  // namespace

TEST(NumericPayload, RoundTripsExactly) {
  gen::Rng rng(1);
  for (int i = 0; i < 50; ++i) {
    std::vector<double> v(rng.below(20));
    for (auto& x : v) x = rng.real(-1e6, 1e6);
    EXPECT_EQ(decode_numeric_payload(encode_numeric_payload(v), Normalization::none), v);
  }
  const std::vector<double> special{-0.0, 1e-308, 5e-324};
  const auto back = decode_numeric_payload(encode_numeric_payload(special), Normalization::none);
  EXPECT_TRUE(std::signbit(back[0]));
  EXPECT_EQ(back[2], 5e-324);
}

TEST(NumericPayload, LayoutIsFixed) {
  const std::vector<double> one{1.0};
  EXPECT_EQ(encode_numeric_payload(one), std::string("PARR\x01\x00\x00\x00\x01\x00\x00\x00\x00\x00\x00\xf0\x3f", 17));
}

TEST(NumericPayload, RawBytesAndScaling) {
  EXPECT_EQ(decode_numeric_payload(std::string("\x00\xff", 2), Normalization::none), (std::vector<double>{0.0, 255.0}));
  EXPECT_EQ(decode_numeric_payload(std::string("\x00\xff", 2), Normalization::per_pixel_unit_scale),
            (std::vector<double>{0.0, 1.0}));
  std::string bad = encode_numeric_payload(std::vector<double>{1.0, 2.0});
  bad.pop_back();
  EXPECT_THROW(decode_numeric_payload(bad, Normalization::none), punc::PreconditionError);
}

TEST(ImageSimilarity, MseMatchesDirectFormula) {
  gen::Rng rng(2);
  for (int i = 0; i < 100; ++i) {
    const std::size_t n = 1 + rng.below(30);
    std::vector<double> a(n), b(n);
    long double sum = 0;
    for (std::size_t k = 0; k < n; ++k) {
      a[k] = rng.real(-2, 2);
      b[k] = rng.real(-2, 2);
      sum += (static_cast<long double>(a[k]) - b[k]) * (static_cast<long double>(a[k]) - b[k]);
    }
    const double expected = static_cast<double>(1.0L / (1.0L + sum / n));
    EXPECT_NEAR(image_similarity(numeric(a), numeric(b), mse_cfg()), expected, 1e-12);
  }
  EXPECT_EQ(image_similarity(numeric({1, 2}), numeric({1, 2}), mse_cfg()), 1.0);
  EXPECT_DOUBLE_EQ(image_similarity(numeric({0, 0}), numeric({1, 1}), mse_cfg()), 0.5);
}

TEST(ImageSimilarity, MseOnRawPixelsWithUnitScale) {
  const auto a = ImageRef::from_payload(std::string("\x00\x00", 2), "t", 0);
  const auto b = ImageRef::from_payload(std::string("\xff\xff", 2), "t", 0);
  EXPECT_DOUBLE_EQ(image_similarity(a, b, mse_cfg(Normalization::per_pixel_unit_scale)), 0.5);
  EXPECT_DOUBLE_EQ(image_similarity(a, b, mse_cfg()), 1.0 / (1.0 + 255.0 * 255.0));
}

TEST(ImageSimilarity, ShapeMismatchIsRejected) {
  EXPECT_THROW(image_similarity(numeric({1}), numeric({1, 2}), mse_cfg()), punc::PreconditionError);
}

TEST(ImageSimilarity, ConceptJaccard) {
  const auto w = toy_world(0);
  const ImageSimilarityConfig cfg;
  EXPECT_DOUBLE_EQ(image_similarity(concepts(w, {"cat", "dog"}), concepts(w, {"dog", "tree"}), cfg), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(image_similarity(concepts(w, {"cat"}), concepts(w, {"cat"}), cfg), 1.0);
  EXPECT_THROW(image_similarity(numeric({1}), concepts(w, {"cat"}), cfg), punc::ParseError);
}

TEST(ImageSimilarity, PluginsAreLookedUpAndRangeChecked) {
  register_similarity_plugin("test-const", [](const ImageRef&, const ImageRef&) { return 0.25; });
  register_similarity_plugin("test-broken", [](const ImageRef&, const ImageRef&) { return 1.5; });
  EXPECT_TRUE(has_similarity_plugin("test-const"));
  ImageSimilarityConfig cfg;
  cfg.metric = SimilarityMetric::plugin;
  cfg.plugin_id = "test-const";
  EXPECT_EQ(image_similarity(numeric({1}), numeric({2}), cfg), 0.25);
  cfg.plugin_id = "test-broken";
  EXPECT_THROW(image_similarity(numeric({1}), numeric({2}), cfg), punc::ProtocolError);
  cfg.plugin_id = "missing";
  EXPECT_THROW(image_similarity(numeric({1}), numeric({2}), cfg), punc::ConfigError);
}

TEST(Method, Names) {
  EXPECT_EQ(parse_method("2xdm"), Method::twoxdm);
  for (auto m : {Method::ddpm_ood, Method::lmd, Method::twoxdm}) EXPECT_EQ(parse_method(to_string(m)), m);
  EXPECT_THROW(parse_method("clip"), punc::ConfigError);
  EXPECT_EQ(parse_similarity_metric("mse"), SimilarityMetric::mse);
  EXPECT_THROW(parse_similarity_metric("lpips"), punc::ConfigError);
}

TEST(Aggregate, OneMinusMeanSimilarity) {
  const auto s = aggregate(Method::lmd, {1.0, 0.5, 0.0});
  EXPECT_DOUBLE_EQ(s.value, 0.5);
  EXPECT_EQ(s.parts.size(), 3u);
  EXPECT_THROW(aggregate(Method::lmd, {}), punc::PreconditionError);
}

TEST(TwoXdm, ZeroWithoutAleatoricNoise) {
  MockBackend b({}, toy_world(0.0));
  for (std::uint64_t s = 0; s < 20; ++s) {
    EXPECT_EQ(twoxdm_score("cat and dog", b, {s, s + 1000}, {}).value, 0.0);
  }
  EXPECT_THROW(twoxdm_score("cat", b, {3, 3}, {}), punc::PreconditionError);
}

TEST(TwoXdm, VaguePromptsScoreHigherInAleatoricWorld) {
  const auto a = worlds::aleatoric(60, 5);
  MockBackend b({}, worlds::build(a.world));
  std::vector<double> vague, normal;
  for (std::size_t i = 0; i < a.vague_prompts.size(); ++i) {
    vague.push_back(twoxdm_score(a.vague_prompts[i], b, {i, i + 7919}, {}).value);
    normal.push_back(twoxdm_score(a.normal_prompts[i], b, {i, i + 7919}, {}).value);
  }
  EXPECT_GT(punc::detect::auroc(vague, normal), 0.9);
}

TEST(DdpmOod, SmallTimestepsBarelyChangeTheImage) {
  MockBackend b({}, toy_world(0.3));
  const std::vector<double> ts{1e-6, 1e-5};
  for (std::uint64_t s = 0; s < 20; ++s) EXPECT_LE(ddpm_ood_score("cat dog tree", b, ts, s, {}).value, 0.01);
}

TEST(DdpmOod, PartsFollowTimestepOrder) {
  MockBackend b({}, toy_world(0.3));
  const std::vector<double> ts{0.9, 0.1, 0.5, 1.0, 0.3};
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto score = ddpm_ood_score("cat dog", b, ts, s, {});
    const auto base = b.generate("cat dog", s);
    ASSERT_EQ(score.parts.size(), ts.size());
    double sum = 0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
      const auto rec = b.reconstruct(base, punc::backend::ReconstructionSpec::noise(ts[i]), "cat dog", s);
      EXPECT_EQ(score.parts[i], image_similarity(rec, base, {}));
      sum += score.parts[i];
    }
    EXPECT_DOUBLE_EQ(score.value, 1.0 - sum / ts.size());
    EXPECT_EQ(score.method, Method::ddpm_ood);
  }
  EXPECT_THROW(ddpm_ood_score("cat", b, std::vector<double>{}, 0, {}), punc::PreconditionError);
  EXPECT_THROW(ddpm_ood_score("cat", b, std::vector<double>{0.0}, 0, {}), punc::PreconditionError);
}

TEST(Lmd, PartsFollowMaskOrder) {
  MockBackend b({}, toy_world(0.3));
  const std::vector<MaskSpec> masks{{"center", 0.25}, {"left", 0.5}, {"checker", 1.0}};
  const auto score = lmd_score("sun sky hat", b, masks, 4, {});
  const auto base = b.generate("sun sky hat", 4);
  for (std::size_t i = 0; i < masks.size(); ++i) {
    const auto rec = b.reconstruct(base, punc::backend::ReconstructionSpec::mask(masks[i].pattern, masks[i].coverage),
                                   "sun sky hat", 4);
    EXPECT_EQ(score.parts[i], image_similarity(rec, base, {}));
  }
  EXPECT_THROW(lmd_score("cat", b, std::vector<MaskSpec>{{"center", 1.2}}, 0, {}), punc::PreconditionError);
}

TEST(Baselines, ReconstructionNeedsCapability) {
  MockBackend b({}, toy_world(0.1), {punc::backend::Capability::generate});
  const std::vector<double> ts{0.5};
  EXPECT_THROW(ddpm_ood_score("cat", b, ts, 0, {}), punc::CapabilityError);
  EXPECT_NO_THROW(twoxdm_score("cat", b, {0, 1}, {}));
  MockBackend none({}, toy_world(0.1), {});
  EXPECT_THROW(twoxdm_score("cat", none, {0, 1}, {}), punc::CapabilityError);
}
