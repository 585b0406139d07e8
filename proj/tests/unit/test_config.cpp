#include <gtest/gtest.h>

#include "punc/config.hpp"
#include "punc/errors.hpp"
#include "runs.hpp"
#include "temp_dir.hpp"

using namespace punc::config;
using nlohmann::json;

namespace {

json minimal() {
  return json::parse(R"({
    "backend": {"endpoint": "mock:"},
    "mock_world": {"vocabulary": ["cat", "dog"]},
    "metrics": ["rouge_1"],
    "datasets": [
      {"name": "n", "group": "normal", "in_distribution": true, "prompts": ["a cat"]},
      {"name": "o", "group": "ood_texture", "prompts": ["a dog"]}
    ]
  })");
}

RunConfig parse_valid(const json& j, const std::filesystem::path& base = {}) {
  RunConfig c = run_config_from_json(j, base);
  c.validate();
  return c;
}

}  // namespace

TEST(WorldJson, RoundTripsAndRejectsUnknownKeys) {
  const json j = json::parse(R"({"vocabulary":["b","a","c"],"known":["a"],"seed":4,
                                 "aleatoric_rate":0.1,"epistemic_drop":0.5,"vagueness_k":2})");
  const auto w = world_from_json(j);
  EXPECT_TRUE(w.is_known("a"));
  EXPECT_FALSE(w.is_known("b"));
  EXPECT_EQ(w.params().seed, 4u);
  const auto again = world_from_json(world_to_json(w));
  EXPECT_EQ(world_to_json(again), world_to_json(w));
  EXPECT_THROW(world_from_json(json::parse(R"({"vocabulary":["a"],"colour":1})")), punc::ConfigError);
  EXPECT_THROW(world_from_json(json::parse(R"({"vocabulary":["a"],"known":["z"]})")), punc::ConfigError);
  EXPECT_TRUE(world_from_json(json::parse(R"({"vocabulary":["a","b"]})")).is_known("b"));
}

TEST(BackendJson, ProfileThenOverrides) {
  const auto s = backend_from_json(json::parse(
      R"({"endpoint":"http://h:1","profile":"sdxs","max_caption_tokens":10,"capabilities":["generate","caption"]})"));
  EXPECT_EQ(s.config.inference_steps, 1);
  EXPECT_EQ(s.config.max_caption_tokens, 10);
  EXPECT_EQ(s.config.endpoint, "http://h:1");
  ASSERT_TRUE(s.capabilities.has_value());
  EXPECT_EQ(s.capabilities->size(), 2u);
  const auto g = backend_from_json(json::parse(R"({"guidance_scale":null})"));
  EXPECT_FALSE(g.config.guidance_scale.has_value());
  EXPECT_THROW(backend_from_json(json::parse(R"({"endpiont":"x"})")), punc::ConfigError);
  EXPECT_THROW(backend_from_json(json::parse(R"({"capabilities":["fly"]})")), punc::Error);
  EXPECT_EQ(backend_from_json(backend_to_json(s)).config.identity(), s.config.identity());
}

TEST(Component, DefaultsPerGroup) {
  using K = punc::promptgen::PromptGroup::Kind;
  EXPECT_EQ(default_component(K::vague), Component::precision);
  EXPECT_EQ(default_component(K::corrupt_l2), Component::precision);
  EXPECT_EQ(default_component(K::adversarial), Component::precision);
  EXPECT_EQ(default_component(K::ood_microscopic), Component::recall);
  EXPECT_EQ(default_component(punc::promptgen::PromptGroup::custom("jobs")), Component::recall);
  EXPECT_THROW(parse_component("f1"), punc::ConfigError);
}

TEST(RunConfig, MinimalConfigHasDefaults) {
  const auto c = parse_valid(minimal());
  EXPECT_EQ(c.instruction, "Describe this image.");
  EXPECT_EQ(c.repeats, 1);
  EXPECT_DOUBLE_EQ(c.target_tpr, 0.95);
  EXPECT_TRUE(c.cache);
  EXPECT_EQ(c.resolved_cache_dir(), c.output_dir / "cache");
  EXPECT_EQ(&c.captioner_spec(), &c.backend);
}

TEST(RunConfig, ValidationRejectsInconsistentConfigs) {
  const std::vector<std::pair<std::string, std::function<void(json&)>>> bad{
      {"no metrics", [](json& j) { j["metrics"] = json::array(); }},
      {"unknown metric", [](json& j) { j["metrics"] = {"bleu"}; }},
      {"bertscore without embedder", [](json& j) { j["metrics"] = {"bertscore"}; }},
      {"two negatives", [](json& j) { j["datasets"][1]["in_distribution"] = true; }},
      {"no negative", [](json& j) { j["datasets"][0]["in_distribution"] = false; }},
      {"no uncertain", [](json& j) { j["datasets"].erase(1); }},
      {"duplicate dataset", [](json& j) { j["datasets"][1]["name"] = "n"; }},
      {"uncertain shares negative group", [](json& j) { j["datasets"][1]["group"] = "normal"; }},
      {"two sources", [](json& j) { j["datasets"][1]["path"] = "x.tsv"; }},
      {"no source", [](json& j) { j["datasets"][1].erase("prompts"); }},
      {"repeats", [](json& j) { j["repeats"] = 0; }},
      {"failure fraction", [](json& j) { j["max_failure_fraction"] = 1.5; }},
      {"target tpr", [](json& j) { j["target_tpr"] = 0.0; }},
      {"mock without world", [](json& j) { j.erase("mock_world"); }},
      {"unknown key", [](json& j) { j["sed"] = 1; }},
      {"unknown dataset key", [](json& j) { j["datasets"][0]["weight"] = 1; }},
      {"bad baseline", [](json& j) { j["baselines"] = {{{"method", "clip"}}}; }},
      {"duplicate baseline", [](json& j) { j["baselines"] = {{{"method", "twoxdm"}}, {{"method", "2xdm"}}}; }},
      {"https backend", [](json& j) { j["backend"]["endpoint"] = "https://x"; }},
      {"corrupt source listed later",
       [](json& j) {
         j["datasets"].insert(j["datasets"].begin() + 1,
                              {{"name", "c"}, {"generator", {{"kind", "corrupt"}, {"source", "o"}, {"level", 2}}}});
       }},
      {"bad corruption level",
       [](json& j) {
         j["datasets"].push_back({{"name", "c"}, {"generator", {{"kind", "corrupt"}, {"source", "n"}, {"level", 3}}}});
       }},
      {"wrong type", [](json& j) { j["seed"] = "one"; }},
  };
  for (const auto& [what, mutate] : bad) {
    json j = minimal();
    mutate(j);
    EXPECT_THROW(parse_valid(j), punc::Error) << what;
  }
}

TEST(RunConfig, GeneratorsAndDefaults) {
  json j = minimal();
  j["datasets"].push_back({{"name", "c2"}, {"generator", {{"kind", "corrupt"}, {"source", "n"}, {"level", 2}}}});
  j["datasets"].push_back({{"name", "v"}, {"group", "vague"}, {"generator", {{"kind", "vague"}, {"classes", {"cat"}}, {"templates", {"An image of ***"}}}}});
  j["baselines"] = {{{"method", "ddpm_ood"}, {"timesteps", {0.1, 0.2}}}, {{"method", "lmd"}, {"name", "lmd-center"}}};
  const auto c = parse_valid(j);
  EXPECT_EQ(c.datasets[2].group.kind(), punc::promptgen::PromptGroup::Kind::corrupt_l2);
  EXPECT_EQ(c.baselines[0].name, "ddpm_ood");
  EXPECT_EQ(c.baselines[0].timesteps, (std::vector<double>{0.1, 0.2}));
  EXPECT_EQ(c.baselines[1].name, "lmd-center");
  EXPECT_EQ(c.baselines[1].masks.size(), 3u);
}

TEST(RunConfig, RelativePathsResolveAgainstBase) {
  json j = minimal();
  j["datasets"][0].erase("prompts");
  j["datasets"][0]["path"] = "data/normal.tsv";
  j["output_dir"] = "out";
  j["backend"]["endpoint"] = "mock:worlds/w.json";
  const auto c = run_config_from_json(j, "/base");
  EXPECT_EQ(*c.datasets[0].path, std::filesystem::path("/base/data/normal.tsv"));
  EXPECT_EQ(c.output_dir, std::filesystem::path("/base/out"));
  EXPECT_EQ(c.backend.config.endpoint, "mock:/base/worlds/w.json");
}

TEST(RunConfig, JsonRoundTripPreservesHash) {
  json j = minimal();
  j["baselines"] = {{{"method", "lmd"}, {"masks", {{{"pattern", "center"}, {"coverage", 0.3}}}}}};
  j["captioner"] = {{"endpoint", "mock:"}, {"max_caption_tokens", 12}};
  const auto c = parse_valid(j);
  const auto again = parse_valid(run_config_to_json(c));
  EXPECT_EQ(config_hash(again), config_hash(c));
  EXPECT_EQ(run_config_to_json(again), run_config_to_json(c));
}

TEST(RunConfig, HashIgnoresLocationAndTransport) {
  const auto base = config_hash(parse_valid(minimal()));
  json j = minimal();
  j["output_dir"] = "elsewhere";
  j["cache"] = false;
  j["cache_dir"] = "/tmp/c";
  j["backend"]["timeout_ms"] = 5;
  j["backend"]["max_in_flight"] = 16;
  j["backend"]["max_retries"] = 0;
  EXPECT_EQ(config_hash(parse_valid(j)), base);
  for (auto mutate : std::vector<std::function<void(json&)>>{
           [](json& x) { x["seed"] = 2; },
           [](json& x) { x["instruction"] = "Caption."; },
           [](json& x) { x["metrics"] = {"rouge_2"}; },
           [](json& x) { x["backend"]["inference_steps"] = 3; },
           [](json& x) { x["mock_world"]["seed"] = 9; },
       }) {
    json k = minimal();
    mutate(k);
    EXPECT_NE(config_hash(parse_valid(k)), base);
  }
}

TEST(RunConfig, LoadFromFile) {
  testutil::TempDir dir;
  std::ofstream(dir / "cfg.json") << minimal().dump();
  const auto c = load_run_config(dir / "cfg.json");
  EXPECT_EQ(c.output_dir, std::filesystem::path("runs/default"));
  std::ofstream(dir / "bad.json") << "{";
  EXPECT_THROW(load_run_config(dir / "bad.json"), punc::ConfigError);
  EXPECT_THROW(load_run_config(dir / "missing.json"), punc::ConfigError);
}
