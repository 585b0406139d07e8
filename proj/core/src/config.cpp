#include "punc/config.hpp"

#include <fstream>
#include <initializer_list>
#include <set>

#include "punc/errors.hpp"
#include "punc/hash.hpp"

namespace punc::config {

using nlohmann::json;

namespace {

void check_object(const json& j, std::string_view context) {
  if (!j.is_object()) throw ConfigError(std::string(context) + ": expected an object");
}

void check_keys(const json& j, std::initializer_list<std::string_view> allowed,
                std::string_view context) {
  check_object(j, context);
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || a == key;
    if (!ok) throw ConfigError(std::string(context) + ": unknown key '" + key + "'");
  }
}

template <typename T>
T get(const json& j, std::string_view key, std::string_view context) {
  try {
    return j.at(std::string(key)).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string(context) + "." + std::string(key) + ": " + e.what());
  }
}

template <typename T>
void get_to(const json& j, std::string_view key, T& out, std::string_view context) {
  if (j.contains(std::string(key))) out = get<T>(j, key, context);
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_relative() && !base.empty()) return base / path;
  return path;
}

BaselineSpec baseline_from_json(const json& j) {
  constexpr std::string_view ctx = "baselines[]";
  check_keys(j, {"method", "name", "similarity", "normalization", "plugin", "timesteps", "masks"}, ctx);
  BaselineSpec b;
  b.method = baselines::parse_method(get<std::string>(j, "method", ctx));
  b.name = j.contains("name") ? get<std::string>(j, "name", ctx) : baselines::to_string(b.method);
  if (j.contains("similarity")) {
    b.similarity.metric = baselines::parse_similarity_metric(get<std::string>(j, "similarity", ctx));
  }
  if (j.contains("normalization")) {
    const auto n = get<std::string>(j, "normalization", ctx);
    if (n == "none") {
      b.similarity.normalization = baselines::Normalization::none;
    } else if (n == "per_pixel_unit_scale") {
      b.similarity.normalization = baselines::Normalization::per_pixel_unit_scale;
    } else {
      throw ConfigError("baselines[].normalization: unknown value '" + n + "'");
    }
  }
  get_to(j, "plugin", b.similarity.plugin_id, ctx);
  if (b.similarity.metric == baselines::SimilarityMetric::plugin && b.similarity.plugin_id.empty()) {
    throw ConfigError("baselines[]: similarity 'plugin' needs a plugin id");
  }
  get_to(j, "timesteps", b.timesteps, ctx);
  if (j.contains("masks")) {
    b.masks.clear();
    for (const auto& m : j.at("masks")) {
      check_keys(m, {"pattern", "coverage"}, "baselines[].masks[]");
      b.masks.push_back({get<std::string>(m, "pattern", "masks[]"), get<double>(m, "coverage", "masks[]")});
    }
  }
  return b;
}

json baseline_to_json(const BaselineSpec& b) {
  json masks = json::array();
  for (const auto& m : b.masks) masks.push_back({{"pattern", m.pattern}, {"coverage", m.coverage}});
  json j{{"method", baselines::to_string(b.method)},
         {"name", b.name},
         {"similarity", baselines::to_string(b.similarity.metric)},
         {"normalization", b.similarity.normalization == baselines::Normalization::none
                               ? "none"
                               : "per_pixel_unit_scale"},
         {"timesteps", b.timesteps},
         {"masks", masks}};
  if (!b.similarity.plugin_id.empty()) j["plugin"] = b.similarity.plugin_id;
  return j;
}

promptgen::CorruptionPlan plan_from_json(const json& j, std::uint64_t default_seed) {
  constexpr std::string_view ctx = "generator.plan";
  check_keys(j, {"seed", "delete_last", "delete_interior", "swap_adjacent", "duplicate_char",
                 "drop_function_word", "l2_keep_fraction"},
             ctx);
  promptgen::CorruptionPlan p;
  p.seed = default_seed;
  get_to(j, "seed", p.seed, ctx);
  get_to(j, "delete_last", p.delete_last, ctx);
  get_to(j, "delete_interior", p.delete_interior, ctx);
  get_to(j, "swap_adjacent", p.swap_adjacent, ctx);
  get_to(j, "duplicate_char", p.duplicate_char, ctx);
  get_to(j, "drop_function_word", p.drop_function_word, ctx);
  get_to(j, "l2_keep_fraction", p.l2_keep_fraction, ctx);
  p.validate();
  return p;
}

json plan_to_json(const promptgen::CorruptionPlan& p) {
  return {{"seed", p.seed},
          {"delete_last", p.delete_last},
          {"delete_interior", p.delete_interior},
          {"swap_adjacent", p.swap_adjacent},
          {"duplicate_char", p.duplicate_char},
          {"drop_function_word", p.drop_function_word},
          {"l2_keep_fraction", p.l2_keep_fraction}};
}

GeneratorSpec generator_from_json(const json& j, std::uint64_t seed) {
  constexpr std::string_view ctx = "datasets[].generator";
  check_keys(j, {"kind", "classes", "templates", "count", "source", "level", "plan"}, ctx);
  GeneratorSpec g;
  const auto kind = get<std::string>(j, "kind", ctx);
  if (kind == "vague") {
    g.kind = GeneratorSpec::Kind::vague;
    g.classes = get<std::vector<std::string>>(j, "classes", ctx);
    g.templates = j.contains("templates") ? get<std::vector<std::string>>(j, "templates", ctx)
                                          : promptgen::default_vague_templates();
    get_to(j, "count", g.count, ctx);
  } else if (kind == "corrupt") {
    g.kind = GeneratorSpec::Kind::corrupt;
    g.source = get<std::string>(j, "source", ctx);
    const int level = j.contains("level") ? get<int>(j, "level", ctx) : 1;
    if (level != 1 && level != 2) throw ConfigError("datasets[].generator.level must be 1 or 2");
    g.level = level == 1 ? promptgen::PromptGroup::Kind::corrupt_l1
                         : promptgen::PromptGroup::Kind::corrupt_l2;
    g.plan = plan_from_json(j.value("plan", json::object()), seed);
  } else {
    throw ConfigError("datasets[].generator.kind: expected 'vague' or 'corrupt', got '" + kind + "'");
  }
  return g;
}

json generator_to_json(const GeneratorSpec& g) {
  if (g.kind == GeneratorSpec::Kind::vague) {
    return {{"kind", "vague"}, {"classes", g.classes}, {"templates", g.templates}, {"count", g.count}};
  }
  return {{"kind", "corrupt"},
          {"source", g.source},
          {"level", g.level == promptgen::PromptGroup::Kind::corrupt_l1 ? 1 : 2},
          {"plan", plan_to_json(g.plan)}};
}

DatasetSpec dataset_from_json(const json& j, const std::filesystem::path& base, std::uint64_t seed) {
  constexpr std::string_view ctx = "datasets[]";
  check_keys(j, {"name", "group", "in_distribution", "path", "prompts", "generator", "component"}, ctx);
  DatasetSpec d;
  if (j.contains("generator")) d.generator = generator_from_json(j.at("generator"), seed);
  if (j.contains("group") || !d.generator || d.generator->kind != GeneratorSpec::Kind::corrupt) {
    d.group = promptgen::PromptGroup::parse(get<std::string>(j, "group", ctx));
  } else {
    d.group = d.generator->level;
  }
  d.name = j.contains("name") ? get<std::string>(j, "name", ctx) : d.group.name();
  get_to(j, "in_distribution", d.in_distribution, ctx);
  if (j.contains("path")) d.path = resolve(base, get<std::string>(j, "path", ctx));
  get_to(j, "prompts", d.prompts, ctx);
  if (j.contains("component")) d.component = parse_component(get<std::string>(j, "component", ctx));
  const int sources = (d.path ? 1 : 0) + (d.prompts.empty() ? 0 : 1) + (d.generator ? 1 : 0);
  if (sources != 1) {
    throw ConfigError("dataset '" + d.name + "' needs exactly one of path, prompts or generator");
  }
  return d;
}

json dataset_to_json(const DatasetSpec& d) {
  json j{{"name", d.name}, {"group", d.group.name()}, {"in_distribution", d.in_distribution}};
  if (d.path) j["path"] = d.path->string();
  if (!d.prompts.empty()) j["prompts"] = d.prompts;
  if (d.generator) j["generator"] = generator_to_json(*d.generator);
  if (d.component) j["component"] = to_string(*d.component);
  return j;
}

}  // namespace

conceptworld::ConceptWorld world_from_json(const json& j) {
  constexpr std::string_view ctx = "world";
  check_keys(j, {"vocabulary", "known", "seed", "aleatoric_rate", "epistemic_drop", "vagueness_k"}, ctx);
  auto vocab = get<std::vector<std::string>>(j, "vocabulary", ctx);
  auto known = j.contains("known") ? get<std::vector<std::string>>(j, "known", ctx) : vocab;
  conceptworld::WorldParams p;
  get_to(j, "seed", p.seed, ctx);
  get_to(j, "aleatoric_rate", p.aleatoric_rate, ctx);
  get_to(j, "epistemic_drop", p.epistemic_drop, ctx);
  get_to(j, "vagueness_k", p.vagueness_k, ctx);
  return conceptworld::ConceptWorld(std::move(vocab), std::move(known), p);
}

json world_to_json(const conceptworld::ConceptWorld& world) {
  std::vector<std::string> vocab(world.vocabulary().begin(), world.vocabulary().end());
  std::vector<std::string> known(world.known().begin(), world.known().end());
  const auto& p = world.params();
  return {{"vocabulary", vocab},
          {"known", known},
          {"seed", p.seed},
          {"aleatoric_rate", p.aleatoric_rate},
          {"epistemic_drop", p.epistemic_drop},
          {"vagueness_k", p.vagueness_k}};
}

conceptworld::ConceptWorld load_world(const std::filesystem::path& path) {
  return world_from_json(read_json_file(path));
}

BackendSpec backend_from_json(const json& j) {
  constexpr std::string_view ctx = "backend";
  check_keys(j, {"endpoint", "profile", "model_id", "inference_steps", "guidance_scale",
                 "max_caption_tokens", "timeout_ms", "max_retries", "retry_backoff_ms",
                 "max_in_flight", "bearer_token_env", "capabilities"},
             ctx);
  BackendSpec spec;
  auto& c = spec.config;
  if (j.contains("profile")) c = backend::BackendConfig::profile(get<std::string>(j, "profile", ctx));
  get_to(j, "endpoint", c.endpoint, ctx);
  get_to(j, "model_id", c.model_id, ctx);
  get_to(j, "inference_steps", c.inference_steps, ctx);
  if (j.contains("guidance_scale")) {
    if (j.at("guidance_scale").is_null()) {
      c.guidance_scale.reset();
    } else {
      c.guidance_scale = get<double>(j, "guidance_scale", ctx);
    }
  }
  get_to(j, "max_caption_tokens", c.max_caption_tokens, ctx);
  get_to(j, "timeout_ms", c.timeout_ms, ctx);
  get_to(j, "max_retries", c.max_retries, ctx);
  get_to(j, "retry_backoff_ms", c.retry_backoff_ms, ctx);
  get_to(j, "max_in_flight", c.max_in_flight, ctx);
  if (j.contains("bearer_token_env")) spec.bearer_token_env = get<std::string>(j, "bearer_token_env", ctx);
  if (j.contains("capabilities")) {
    backend::CapabilitySet caps;
    for (const auto& name : get<std::vector<std::string>>(j, "capabilities", ctx)) {
      try {
        caps.insert(backend::parse_capability(name));
      } catch (const ParseError& e) {
        throw ConfigError(std::string("backend.capabilities: ") + e.what());
      }
    }
    spec.capabilities = std::move(caps);
  }
  c.validate();
  return spec;
}

json backend_to_json(const BackendSpec& spec) {
  const auto& c = spec.config;
  json j{{"endpoint", c.endpoint},
         {"model_id", c.model_id},
         {"inference_steps", c.inference_steps},
         {"guidance_scale", c.guidance_scale ? json(*c.guidance_scale) : json()},
         {"max_caption_tokens", c.max_caption_tokens},
         {"timeout_ms", c.timeout_ms},
         {"max_retries", c.max_retries},
         {"retry_backoff_ms", c.retry_backoff_ms},
         {"max_in_flight", c.max_in_flight}};
  if (spec.bearer_token_env) j["bearer_token_env"] = *spec.bearer_token_env;
  if (spec.capabilities) {
    json caps = json::array();
    for (auto cap : *spec.capabilities) caps.push_back(backend::to_string(cap));
    j["capabilities"] = caps;
  }
  return j;
}

std::string to_string(Component c) { return c == Component::precision ? "precision" : "recall"; }

Component parse_component(std::string_view name) {
  if (name == "precision") return Component::precision;
  if (name == "recall") return Component::recall;
  throw ConfigError("unknown component '" + std::string(name) + "' (expected precision or recall)");
}

Component default_component(const promptgen::PromptGroup& group) {
  using K = promptgen::PromptGroup::Kind;
  switch (group.kind()) {
    case K::vague:
    case K::corrupt_l1:
    case K::corrupt_l2:
    case K::adversarial:
      return Component::precision;
    default:
      return Component::recall;
  }
}

void RunConfig::validate() const {
  backend.config.validate();
  captioner_spec().config.validate();
  if (embedder) embedder->config.validate();
  if (metrics.empty()) throw ConfigError("at least one metric is required");
  for (const auto& m : metrics) {
    if (m.kind == textsim::MetricKind::bertscore && !embedder) {
      throw ConfigError("metric bertscore requires an embedder backend");
    }
  }
  std::set<std::string> names;
  for (const auto& b : baselines) {
    if (!names.insert("baseline:" + b.name).second) {
      throw ConfigError("duplicate baseline name '" + b.name + "'");
    }
  }
  names.clear();
  int negatives = 0;
  int uncertain = 0;
  std::set<std::string> groups;
  for (const auto& d : datasets) {
    if (!names.insert(d.name).second) throw ConfigError("duplicate dataset name '" + d.name + "'");
    (d.in_distribution ? negatives : uncertain) += 1;
    if (d.generator && d.generator->kind == GeneratorSpec::Kind::corrupt &&
        names.count(d.generator->source) == 0) {
      throw ConfigError("dataset '" + d.name + "' corrupts '" + d.generator->source +
                        "', which must be listed before it");
    }
  }
  if (negatives != 1) {
    throw ConfigError("exactly one dataset must be marked in_distribution (found " +
                      std::to_string(negatives) + ")");
  }
  if (uncertain == 0) throw ConfigError("at least one uncertain (non in-distribution) dataset is required");
  std::string negative_group;
  for (const auto& d : datasets) {
    if (d.in_distribution) negative_group = d.group.name();
  }
  for (const auto& d : datasets) {
    if (!d.in_distribution && d.group.name() == negative_group) {
      throw ConfigError("dataset '" + d.name + "' shares the in-distribution group '" + negative_group + "'");
    }
  }
  if (repeats < 1) throw ConfigError("repeats must be >= 1");
  if (!(max_failure_fraction >= 0.0 && max_failure_fraction <= 1.0)) {
    throw ConfigError("max_failure_fraction must lie in [0, 1]");
  }
  if (!(target_tpr > 0.0 && target_tpr <= 1.0)) throw ConfigError("target_tpr must lie in (0, 1]");
  const bool uses_mock_world = backend.config.endpoint == "mock:" ||
                               captioner_spec().config.endpoint == "mock:" ||
                               (embedder && embedder->config.endpoint == "mock:");
  if (uses_mock_world && !mock_world) {
    throw ConfigError("endpoint 'mock:' needs a mock_world block (or use mock:<world.json>)");
  }
}

RunConfig run_config_from_json(const json& j, const std::filesystem::path& base_dir) {
  constexpr std::string_view ctx = "config";
  check_keys(j, {"backend", "captioner", "embedder", "mock_world", "metrics", "baselines", "datasets",
                 "seed", "output_dir", "cache", "cache_dir", "instruction", "repeats",
                 "max_failure_fraction", "target_tpr"},
             ctx);
  RunConfig cfg;
  if (j.contains("backend")) cfg.backend = backend_from_json(j.at("backend"));
  if (j.contains("captioner")) cfg.captioner = backend_from_json(j.at("captioner"));
  if (j.contains("embedder")) cfg.embedder = backend_from_json(j.at("embedder"));
  for (auto* spec : {&cfg.backend, cfg.captioner ? &*cfg.captioner : nullptr,
                     cfg.embedder ? &*cfg.embedder : nullptr}) {
    if (spec && spec->config.endpoint.starts_with("mock:") && spec->config.endpoint.size() > 5) {
      spec->config.endpoint = "mock:" + resolve(base_dir, spec->config.endpoint.substr(5)).string();
    }
  }
  if (j.contains("mock_world")) {
    world_from_json(j.at("mock_world"));  // validate early
    cfg.mock_world = j.at("mock_world");
  }
  get_to(j, "seed", cfg.seed, ctx);
  if (j.contains("metrics")) {
    for (const auto& m : get<std::vector<std::string>>(j, "metrics", ctx)) {
      cfg.metrics.push_back(textsim::MetricSelector::parse(m));
    }
  }
  if (j.contains("baselines")) {
    for (const auto& b : j.at("baselines")) cfg.baselines.push_back(baseline_from_json(b));
  }
  if (j.contains("datasets")) {
    for (const auto& d : j.at("datasets")) cfg.datasets.push_back(dataset_from_json(d, base_dir, cfg.seed));
  }
  if (j.contains("output_dir")) cfg.output_dir = resolve(base_dir, get<std::string>(j, "output_dir", ctx));
  get_to(j, "cache", cfg.cache, ctx);
  if (j.contains("cache_dir")) cfg.cache_dir = resolve(base_dir, get<std::string>(j, "cache_dir", ctx));
  get_to(j, "instruction", cfg.instruction, ctx);
  get_to(j, "repeats", cfg.repeats, ctx);
  get_to(j, "max_failure_fraction", cfg.max_failure_fraction, ctx);
  get_to(j, "target_tpr", cfg.target_tpr, ctx);
  return cfg;
}

json run_config_to_json(const RunConfig& cfg) {
  json j;
  j["backend"] = backend_to_json(cfg.backend);
  if (cfg.captioner) j["captioner"] = backend_to_json(*cfg.captioner);
  if (cfg.embedder) j["embedder"] = backend_to_json(*cfg.embedder);
  if (cfg.mock_world) j["mock_world"] = world_to_json(world_from_json(*cfg.mock_world));
  json metrics = json::array();
  for (const auto& m : cfg.metrics) metrics.push_back(m.name());
  j["metrics"] = metrics;
  json bl = json::array();
  for (const auto& b : cfg.baselines) bl.push_back(baseline_to_json(b));
  j["baselines"] = bl;
  json ds = json::array();
  for (const auto& d : cfg.datasets) ds.push_back(dataset_to_json(d));
  j["datasets"] = ds;
  j["seed"] = cfg.seed;
  j["output_dir"] = cfg.output_dir.string();
  j["cache"] = cfg.cache;
  if (cfg.cache_dir) j["cache_dir"] = cfg.cache_dir->string();
  j["instruction"] = cfg.instruction;
  j["repeats"] = cfg.repeats;
  j["max_failure_fraction"] = cfg.max_failure_fraction;
  j["target_tpr"] = cfg.target_tpr;
  return j;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  return run_config_from_json(read_json_file(path), path.parent_path());
}

std::string config_hash(const RunConfig& cfg) {
  json j = run_config_to_json(cfg);
  j.erase("output_dir");
  j.erase("cache");
  j.erase("cache_dir");
  // Transport settings do not change outputs.
  for (const char* key : {"backend", "captioner", "embedder"}) {
    if (!j.contains(key)) continue;
    for (const char* t : {"timeout_ms", "max_retries", "retry_backoff_ms", "max_in_flight",
                          "bearer_token_env"}) {
      j[key].erase(t);
    }
  }
  return sha256_hex(j.dump());
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("'" + path.string() + "': " + e.what());
  }
}

}  // namespace punc::config
