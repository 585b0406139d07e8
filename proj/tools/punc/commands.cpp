#include "commands.hpp"

#include <atomic>
#include <chrono>
#include <csignal>
#include <fstream>
#include <iostream>
#include <thread>

#include <nlohmann/json.hpp>

#include "punc/config.hpp"
#include "punc/errors.hpp"
#include "punc/mock_backend.hpp"
#include "punc/mock_server.hpp"
#include "punc/pipeline.hpp"
#include "punc/probe.hpp"
#include "punc/promptgen.hpp"
#include "punc/report.hpp"

namespace punc::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop.store(true); }

void apply_overrides(config::RunConfig& cfg, const CommonFlags& flags) {
  if (flags.seed) cfg.seed = *flags.seed;
  if (flags.out) cfg.output_dir = *flags.out;
  if (flags.no_cache) cfg.cache = false;
  if (flags.backend_url) {
    cfg.backend.config.endpoint = *flags.backend_url;
    if (cfg.captioner) cfg.captioner->config.endpoint = *flags.backend_url;
    if (cfg.embedder) cfg.embedder->config.endpoint = *flags.backend_url;
  }
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << text;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_relative() ? base / path : path;
}

}  // namespace

int gen_datasets(const CommonFlags& flags) {
  const json j = config::read_json_file(flags.config);
  const fs::path base = flags.config.parent_path();
  const std::uint64_t seed = flags.seed ? *flags.seed : j.value("seed", std::uint64_t{0});
  const fs::path out = flags.out ? *flags.out : fs::path("datasets");

  std::vector<std::pair<std::string, std::vector<promptgen::PromptRecord>>> files;
  std::vector<promptgen::PromptRecord> normal;
  if (j.contains("normal")) {
    const auto& n = j.at("normal");
    if (n.contains("path")) {
      normal = promptgen::load_prompt_dataset(resolve(base, n.at("path").get<std::string>()),
                                              promptgen::PromptGroup::Kind::normal);
    } else {
      for (const auto& text : n.at("prompts").get<std::vector<std::string>>()) {
        normal.push_back({promptgen::content_id(text), text, promptgen::PromptGroup::Kind::normal, std::nullopt});
      }
    }
    files.emplace_back("normal.tsv", normal);
  }
  if (j.contains("vague")) {
    const auto& v = j.at("vague");
    const auto classes = v.at("classes").get<std::vector<std::string>>();
    const auto templates = v.contains("templates") ? v.at("templates").get<std::vector<std::string>>()
                                                   : promptgen::default_vague_templates();
    const std::size_t count = v.value("count", classes.size() * templates.size());
    try {
      files.emplace_back("vague.tsv", promptgen::vague_prompts(classes, templates, count, seed));
    } catch (const PreconditionError& e) {
      throw ConfigError(std::string("vague: ") + e.what());
    }
  }
  if (j.contains("corruption")) {
    if (normal.empty()) throw ConfigError("corruption needs a non-empty 'normal' dataset");
    const auto& c = j.at("corruption");
    promptgen::CorruptionPlan plan;
    plan.seed = c.value("seed", seed);
    plan.delete_last = c.value("delete_last", plan.delete_last);
    plan.delete_interior = c.value("delete_interior", plan.delete_interior);
    plan.swap_adjacent = c.value("swap_adjacent", plan.swap_adjacent);
    plan.duplicate_char = c.value("duplicate_char", plan.duplicate_char);
    plan.drop_function_word = c.value("drop_function_word", plan.drop_function_word);
    plan.l2_keep_fraction = c.value("l2_keep_fraction", plan.l2_keep_fraction);
    plan.validate();
    files.emplace_back("corrupt_l1.tsv",
                       promptgen::corrupt_dataset(normal, plan, promptgen::PromptGroup::Kind::corrupt_l1));
    files.emplace_back("corrupt_l2.tsv",
                       promptgen::corrupt_dataset(normal, plan, promptgen::PromptGroup::Kind::corrupt_l2));
  }
  if (files.empty()) throw ConfigError("nothing to generate: give normal, vague and/or corruption");

  if (!flags.dry_run) fs::create_directories(out);
  for (const auto& [name, records] : files) {
    if (!flags.dry_run) promptgen::save_prompt_dataset(out / name, records);
    std::cout << (flags.dry_run ? "would write " : "wrote ") << (out / name).string() << " ("
              << records.size() << " prompts)\n";
  }
  return kOk;
}

int run(const CommonFlags& flags) {
  config::RunConfig cfg = config::load_run_config(flags.config);
  apply_overrides(cfg, flags);

  pipeline::RunOptions options;
  options.dry_run = flags.dry_run;
  if (flags.dry_run) {
    cfg.validate();
    const auto datasets = pipeline::load_datasets(cfg);
    const auto tasks = pipeline::plan_tasks(cfg, datasets);
    for (const auto& d : datasets) {
      std::cout << "dataset " << d.spec->name << " group=" << d.spec->group.name()
                << (d.spec->in_distribution ? " (in-distribution)" : "") << " prompts=" << d.records.size()
                << '\n';
    }
    std::cout << "planned records: " << tasks.size() << "\noutput: " << cfg.output_dir.string() << '\n';
    return kOk;
  }
  const auto result = pipeline::run_eval(cfg, options);
  std::cout << report::render_table(result.summary);
  std::cout << "records: " << result.records.size() << " (resumed " << result.resumed << ", new "
            << result.written << ")  output: " << cfg.output_dir.string() << '\n';
  if (result.failure_threshold_exceeded) {
    std::cerr << "error: " << result.summary.failures << " of " << result.records.size()
              << " records failed, above max_failure_fraction " << cfg.max_failure_fraction << '\n';
    return kPartialFailure;
  }
  return kOk;
}

int probe(const CommonFlags& flags) {
  const json j = config::read_json_file(flags.config);
  const fs::path base = flags.config.parent_path();
  if (!j.contains("probe")) throw ConfigError("probe config needs a 'probe' block");
  probe::ProbeConfig pc = probe::probe_config_from_json(j.at("probe"));
  if (flags.seed) pc.seed = *flags.seed;

  auto spec_of = [&](const char* key) {
    config::BackendSpec spec = config::backend_from_json(j.value(key, j.value("backend", json::object())));
    if (flags.backend_url) spec.config.endpoint = *flags.backend_url;
    if (spec.config.is_mock() && spec.config.endpoint.size() > 5) {
      spec.config.endpoint = "mock:" + resolve(base, spec.config.endpoint.substr(5)).string();
    }
    return spec;
  };
  const config::BackendSpec gen_spec = spec_of("backend");
  const config::BackendSpec cap_spec = spec_of("captioner");
  std::optional<json> world;
  if (j.contains("mock_world")) world = j.at("mock_world");

  if (flags.dry_run) {
    std::size_t cells = pc.subjects.size();
    for (const auto& axis : pc.attributes) cells *= axis.size();
    std::cout << "cells: " << cells << "  images: " << cells * static_cast<std::size_t>(pc.prompts_per_cell)
              << '\n';
    return kOk;
  }
  auto generator = pipeline::BackendSet::build(gen_spec, world);
  auto captioner = pipeline::BackendSet::build(cap_spec, world);
  const auto grid = probe::probe_concept_grid(pc, *generator, *captioner);
  json out{{"grid", probe::to_json(grid)}};
  std::string text = probe::render_grid(grid);

  if (j.contains("labeled_images")) {
    std::vector<probe::LabeledImage> labeled;
    for (const auto& l : j.at("labeled_images")) {
      probe::LabeledImage li;
      li.subject = l.at("subject").get<std::string>();
      li.is_subject = l.at("is_subject").get<bool>();
      if (l.contains("path")) {
        li.image = backend::ImageRef::from_payload(read_file(resolve(base, l.at("path").get<std::string>())),
                                                   "file", 0);
      } else {
        li.image = generator->generate(l.at("prompt").get<std::string>(), l.value("seed", std::uint64_t{0}));
      }
      labeled.push_back(std::move(li));
    }
    const auto stats = probe::probe_recognizer_validation(labeled, *captioner, pc.question_template);
    out["recognizer"] = probe::to_json(stats);
    text += "\nsubject  precision  recall  tp  fp  fn  tn  failures\n";
    for (const auto& s : stats) {
      text += s.subject + "  " + std::to_string(100.0 * s.precision) + "  " + std::to_string(100.0 * s.recall) +
              "  " + std::to_string(s.tp) + "  " + std::to_string(s.fp) + "  " + std::to_string(s.fn) + "  " +
              std::to_string(s.tn) + "  " + std::to_string(s.failures) + "\n";
    }
  }
  if (flags.out) {
    fs::create_directories(*flags.out);
    write_file(*flags.out / "probe.json", out.dump(2) + "\n");
    write_file(*flags.out / "probe.txt", text);
  }
  std::cout << text;
  bool partial = false;
  for (const auto& c : grid.cells) partial = partial || c.partial;
  return partial ? kPartialFailure : kOk;
}

int report(const CommonFlags& flags, const std::optional<fs::path>& run_dir) {
  const fs::path dir = run_dir ? *run_dir : flags.out ? *flags.out : fs::path();
  if (dir.empty()) throw ConfigError("report needs a run directory (positional or --out)");
  const auto summary = report::emit_report(dir);
  std::cout << report::render_table(summary);
  return kOk;
}

int mock_serve(const ServeFlags& flags) {
  std::optional<conceptworld::ConceptWorld> world;
  backend::BackendConfig bc;
  bc.model_id = flags.model_id;
  if (flags.world) {
    world = config::load_world(*flags.world);
  } else if (flags.config) {
    const auto cfg = config::load_run_config(*flags.config);
    if (!cfg.mock_world) throw ConfigError("'" + flags.config->string() + "' has no mock_world block");
    world = config::world_from_json(*cfg.mock_world);
    bc = cfg.backend.config;
    bc.endpoint = "mock:";
  } else {
    throw ConfigError("mock-serve needs --world or --config");
  }
  backend::CapabilitySet caps = backend::all_capabilities();
  if (!flags.capabilities.empty()) {
    caps.clear();
    for (const auto& c : flags.capabilities) {
      try {
        caps.insert(backend::parse_capability(c));
      } catch (const ParseError& e) {
        throw ConfigError(e.what());
      }
    }
  }
  backend::MockBackend mock(bc, *world, caps);
  backend::MockServer server(mock, {flags.host, flags.fail_first});
  server.start(flags.port);
  std::cout << "listening on " << server.url() << std::endl;

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::jthread watcher([&](std::stop_token st) {
    while (!st.stop_requested() && !g_stop.load()) std::this_thread::sleep_for(std::chrono::milliseconds(50));
    server.stop();
  });
  server.wait();
  watcher.request_stop();
  std::cout << "served " << server.requests_served() << " requests\n";
  return kOk;
}

}  // namespace punc::cli
