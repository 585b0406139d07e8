#include "punc/pipeline.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <set>

#include "punc/caching_backend.hpp"
#include "punc/errors.hpp"
#include "punc/hash.hpp"
#include "punc/http_backend.hpp"
#include "punc/mock_backend.hpp"
#include "punc/parallel.hpp"

namespace punc::pipeline {

using nlohmann::json;

namespace {

conceptworld::ConceptWorld world_for(const config::BackendSpec& spec,
                                     const std::optional<json>& mock_world) {
  const std::string& ep = spec.config.endpoint;
  if (ep.size() > 5) return config::load_world(ep.substr(5));
  if (!mock_world) throw ConfigError("endpoint 'mock:' needs a mock_world block");
  return config::world_from_json(*mock_world);
}

std::string cache_namespace(const config::BackendSpec& spec, const std::optional<json>& mock_world) {
  json ns{{"identity", spec.config.identity()}};
  if (spec.config.is_mock()) {
    ns["world"] = config::world_to_json(world_for(spec, mock_world));
    json caps = json::array();
    if (spec.capabilities) {
      for (auto c : *spec.capabilities) caps.push_back(backend::to_string(c));
    }
    ns["capabilities"] = caps;
  }
  return sha256_hex(ns.dump());
}

std::string describe(std::string_view step, const std::exception& e) {
  return std::string(step) + ": " + e.what();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << text;
}

}  // namespace

BackendSet::BackendSet(const config::RunConfig& cfg, BackendOverrides overrides) {
  std::map<std::string, backend::Backend*> built;
  std::map<backend::Backend*, backend::Backend*> wrapped;
  auto make = [&](const config::BackendSpec& spec, backend::Backend* override) -> backend::Backend* {
    backend::Backend* inner = override;
    if (inner == nullptr) {
      const std::string key = config::backend_to_json(spec).dump();
      auto it = built.find(key);
      if (it == built.end()) {
        owned_.push_back(build(spec, cfg.mock_world));
        it = built.emplace(key, owned_.back().get()).first;
      }
      inner = it->second;
    }
    if (!cfg.cache) return inner;
    auto w = wrapped.find(inner);
    if (w == wrapped.end()) {
      owned_.push_back(std::make_unique<backend::CachingBackend>(
          *inner, cfg.resolved_cache_dir(), cache_namespace(spec, cfg.mock_world)));
      w = wrapped.emplace(inner, owned_.back().get()).first;
    }
    return w->second;
  };
  components_.generator = make(cfg.backend, overrides.generator);
  components_.captioner = make(cfg.captioner_spec(), overrides.captioner);
  if (cfg.embedder) components_.embedder = make(*cfg.embedder, overrides.embedder);
}

BackendSet::~BackendSet() {
  // Caches hold references to inner backends; destroy them first.
  while (!owned_.empty()) owned_.pop_back();
}

std::unique_ptr<backend::Backend> BackendSet::build(const config::BackendSpec& spec,
                                                    const std::optional<json>& mock_world) {
  backend::BackendConfig c = spec.config;
  if (spec.bearer_token_env) {
    const char* token = std::getenv(spec.bearer_token_env->c_str());
    if (token == nullptr) {
      throw ConfigError("environment variable '" + *spec.bearer_token_env + "' is not set");
    }
    c.bearer_token = token;
  }
  c.validate();
  if (c.is_mock()) {
    return std::make_unique<backend::MockBackend>(
        c, world_for(spec, mock_world),
        spec.capabilities ? *spec.capabilities : backend::all_capabilities());
  }
  return std::make_unique<backend::HttpBackend>(c);
}

std::uint64_t record_seed(std::uint64_t run_seed, const std::string& prompt_id, int repeat) {
  return keyed_u64(run_seed, static_cast<std::uint64_t>(repeat), prompt_id, 0x5eed);
}

record::RunRecord punc_score(const PromptTask& task, const config::RunConfig& cfg,
                             const Components& components) {
  record::RunRecord rec;
  rec.prompt_id = task.prompt.id;
  rec.group = task.prompt.group.name();
  rec.dataset = task.dataset;
  rec.text = task.prompt.text;
  rec.repeat = task.repeat;
  rec.seed = record_seed(cfg.seed, task.prompt.id, task.repeat);
  rec.instruction = cfg.instruction;

  auto fail_all = [&](const std::string& msg) {
    rec.error = msg;
    for (const auto& m : cfg.metrics) {
      record::MetricEntry e;
      e.error = "skipped: " + msg;
      rec.metrics[m.name()] = e;
    }
  };

  backend::ImageRef image;
  try {
    image = components.generator->generate(task.prompt.text, rec.seed);
    rec.image_id = image.id;
  } catch (const Error& e) {
    fail_all(describe("generate", e));
    return rec;
  }
  try {
    rec.caption = components.captioner->caption(image, cfg.instruction);
  } catch (const Error& e) {
    fail_all(describe("caption", e));
    return rec;
  }

  std::optional<backend::BackendEmbedder> embedder;
  if (components.embedder != nullptr) embedder.emplace(*components.embedder);
  const std::string component = config::to_string(task.component);
  for (const auto& m : cfg.metrics) {
    record::MetricEntry e;
    try {
      const auto r = textsim::score_alignment(task.prompt.text, *rec.caption, m,
                                              embedder ? &*embedder : nullptr);
      e.precision = r.precision;
      e.recall = r.recall;
      e.f1 = r.f1;
      e.degenerate = r.degenerate;
      e.component = component;
      e.uncertainty = 1.0 - e.value_of(component);
    } catch (const Error& ex) {
      e.error = describe(m.name(), ex);
    }
    rec.metrics[m.name()] = e;
  }
  return rec;
}

void score_baselines(record::RunRecord& rec, const config::RunConfig& cfg,
                     const Components& components) {
  for (const auto& b : cfg.baselines) {
    record::BaselineEntry e;
    e.method = baselines::to_string(b.method);
    try {
      baselines::BaselineScore s;
      switch (b.method) {
        case baselines::Method::twoxdm: {
          std::uint64_t second = mix64(rec.seed ^ 0x32584d);
          if (second == rec.seed) ++second;
          s = baselines::twoxdm_score(rec.text, *components.generator, {rec.seed, second}, b.similarity);
          break;
        }
        case baselines::Method::ddpm_ood:
          s = baselines::ddpm_ood_score(rec.text, *components.generator, b.timesteps, rec.seed,
                                        b.similarity);
          break;
        case baselines::Method::lmd:
          s = baselines::lmd_score(rec.text, *components.generator, b.masks, rec.seed, b.similarity);
          break;
      }
      e.value = s.value;
      e.parts = std::move(s.parts);
    } catch (const CapabilityError& ex) {
      e.error = describe("not_supported", ex);
    } catch (const Error& ex) {
      e.error = describe(b.name, ex);
    }
    rec.baselines[b.name] = std::move(e);
  }
}

std::vector<LoadedDataset> load_datasets(const config::RunConfig& cfg) {
  std::vector<LoadedDataset> out;
  for (const auto& spec : cfg.datasets) {
    LoadedDataset d;
    d.spec = &spec;
    if (spec.path) {
      d.records = promptgen::load_prompt_dataset(*spec.path, spec.group);
    } else if (!spec.prompts.empty()) {
      for (const auto& text : spec.prompts) {
        d.records.push_back({promptgen::content_id(text), text, spec.group, std::nullopt});
      }
    } else {
      const auto& g = *spec.generator;
      if (g.kind == config::GeneratorSpec::Kind::vague) {
        const std::size_t count = g.count == 0 ? g.classes.size() * g.templates.size() : g.count;
        try {
          d.records = promptgen::vague_prompts(g.classes, g.templates, count, cfg.seed);
        } catch (const PreconditionError& e) {
          throw ConfigError("dataset '" + spec.name + "': " + e.what());
        }
      } else {
        const LoadedDataset* source = nullptr;
        for (const auto& prev : out) {
          if (prev.spec->name == g.source) source = &prev;
        }
        if (source == nullptr) throw ConfigError("dataset '" + spec.name + "': unknown source '" + g.source + "'");
        d.records = promptgen::corrupt_dataset(source->records, g.plan, g.level);
      }
    }
    for (auto& r : d.records) r.group = spec.group;
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<PromptTask> plan_tasks(const config::RunConfig& cfg,
                                   const std::vector<LoadedDataset>& datasets) {
  std::vector<PromptTask> tasks;
  std::set<std::string> ids;
  for (const auto& d : datasets) {
    const config::Component component =
        d.spec->component ? *d.spec->component : config::default_component(d.spec->group);
    for (const auto& r : d.records) {
      if (!ids.insert(r.id).second) {
        throw ConfigError("prompt id '" + r.id + "' appears more than once (dataset '" +
                          d.spec->name + "')");
      }
      for (int k = 0; k < cfg.repeats; ++k) tasks.push_back({r, d.spec->name, component, k});
    }
  }
  return tasks;
}

RunResult run_eval(const config::RunConfig& cfg, const RunOptions& options) {
  cfg.validate();
  const auto datasets = load_datasets(cfg);
  const auto tasks = plan_tasks(cfg, datasets);
  RunResult result;
  result.planned = tasks.size();
  if (options.dry_run) return result;

  namespace fs = std::filesystem;
  const fs::path dir = cfg.output_dir;
  fs::create_directories(dir);
  const std::string hash = config::config_hash(cfg);
  const fs::path run_json = dir / "run.json";
  if (fs::exists(run_json)) {
    const json meta = config::read_json_file(run_json);
    if (meta.value("config_hash", "") != hash) {
      throw ConfigError("'" + dir.string() +
                        "' holds a run with a different configuration; choose another output directory");
    }
  } else {
    write_text(run_json, json{{"config_hash", hash}, {"record_version", record::kRecordVersion}}.dump(2) + "\n");
  }
  write_text(dir / "config.resolved.json", config::run_config_to_json(cfg).dump(2) + "\n");

  const fs::path records_path = dir / "records.jsonl";
  const fs::path timings_path = dir / "timings.jsonl";
  const report::RecordFile existing = report::read_records(records_path);
  if (existing.truncated_tail) fs::resize_file(records_path, existing.valid_bytes);

  std::set<std::string> planned_keys;
  for (const auto& t : tasks) planned_keys.insert(t.prompt.id + "#" + std::to_string(t.repeat));
  std::set<std::string> done;
  for (const auto& r : existing.records) {
    if (planned_keys.count(r.key()) == 0) {
      throw ConfigError("records.jsonl contains '" + r.key() + "', which this configuration does not plan");
    }
    done.insert(r.key());
  }
  result.resumed = done.size();

  std::vector<const PromptTask*> pending;
  for (const auto& t : tasks) {
    if (done.count(t.prompt.id + "#" + std::to_string(t.repeat)) == 0) pending.push_back(&t);
  }

  BackendSet backends(cfg, options.overrides);
  const Components comps = backends.components();
  if (!pending.empty()) {
    auto require = [](backend::Backend* b, backend::Capability c, std::string_view role) {
      if (!b->supports(c)) {
        throw CapabilityError(std::string(role) + " backend '" + b->config().model_id +
                              "' does not support " + backend::to_string(c));
      }
    };
    require(comps.generator, backend::Capability::generate, "generator");
    require(comps.captioner, backend::Capability::caption, "captioner");
    for (const auto& m : cfg.metrics) {
      if (m.kind == textsim::MetricKind::bertscore) {
        require(comps.embedder, backend::Capability::embed, "embedder");
      }
    }
  }

  std::ofstream records_out(records_path, std::ios::binary | std::ios::app);
  std::ofstream timings_out(timings_path, std::ios::binary | std::ios::app);
  if (!records_out || !timings_out) throw ConfigError("cannot append to '" + records_path.string() + "'");

  struct Finished {
    record::RunRecord rec;
    double millis = 0.0;
  };
  std::vector<std::optional<Finished>> finished(pending.size());
  std::size_t next_to_write = 0;
  std::atomic<bool> stop{false};
  std::mutex write_mutex;

  auto flush_ready = [&] {
    while (next_to_write < finished.size() && finished[next_to_write] && !stop.load()) {
      const Finished& f = *finished[next_to_write];
      records_out << record::to_line(f.rec) << '\n';
      records_out.flush();
      timings_out << json{{"key", f.rec.key()}, {"millis", f.millis}}.dump() << '\n';
      timings_out.flush();
      if (options.on_record) options.on_record(f.rec);
      finished[next_to_write].reset();
      ++next_to_write;
      ++result.written;
      if (options.stop_after && result.written >= *options.stop_after) stop.store(true);
    }
  };

  const auto workers = static_cast<std::size_t>(std::max(1, cfg.backend.config.max_in_flight));
  parallel_for(pending.size(), workers, [&](std::size_t i) {
    if (stop.load()) return;
    const auto start = std::chrono::steady_clock::now();
    record::RunRecord rec = punc_score(*pending[i], cfg, comps);
    score_baselines(rec, cfg, comps);
    const double millis =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    std::lock_guard lock(write_mutex);
    finished[i] = Finished{std::move(rec), millis};
    flush_ready();
  });
  records_out.close();
  timings_out.close();
  if (!records_out) throw ConfigError("failed writing '" + records_path.string() + "'");

  result.records = report::read_records(records_path).records;
  result.completed = result.records.size() == tasks.size();
  if (!result.completed) return result;

  std::string negative;
  std::vector<std::string> uncertain;
  std::set<std::string> seen;
  for (const auto& d : cfg.datasets) {
    const auto g = d.group.name();
    if (d.in_distribution) {
      negative = g;
    } else if (seen.insert(g).second) {
      uncertain.push_back(g);
    }
  }
  report::ScorerSet scorers;
  for (const auto& m : cfg.metrics) scorers.metrics.push_back(m.name());
  for (const auto& b : cfg.baselines) scorers.baselines.push_back(b.name);
  result.summary = report::compute_summary(result.records, negative, uncertain, scorers, cfg.target_tpr);
  report::write_summary(dir, result.summary);
  result.failure_threshold_exceeded =
      static_cast<double>(result.summary.failures) >
      cfg.max_failure_fraction * static_cast<double>(result.records.size());
  return result;
}

}  // namespace punc::pipeline
