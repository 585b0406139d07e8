#include "punc/probe.hpp"

#include <algorithm>
#include <iomanip>
#include <map>
#include <mutex>
#include <sstream>

#include "punc/errors.hpp"
#include "punc/hash.hpp"
#include "punc/parallel.hpp"

namespace punc::probe {

using nlohmann::json;

namespace {

std::string replace_all(std::string s, std::string_view from, std::string_view to) {
  for (std::size_t at = s.find(from); at != std::string::npos; at = s.find(from, at + to.size())) {
    s.replace(at, from.size(), to);
  }
  return s;
}

std::string join(const std::vector<std::string>& parts) {
  std::string out;
  for (const auto& p : parts) {
    if (!out.empty()) out += ' ';
    out += p;
  }
  return out;
}

// Collapses whitespace runs left behind by empty placeholders.
std::string squeeze(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == ' ' && (out.empty() || out.back() == ' ')) continue;
    out += c;
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

std::vector<std::vector<std::string>> cross(const std::vector<std::vector<std::string>>& axes) {
  std::vector<std::vector<std::string>> out{{}};
  for (const auto& axis : axes) {
    std::vector<std::vector<std::string>> next;
    for (const auto& prefix : out) {
      for (const auto& v : axis) {
        next.push_back(prefix);
        next.back().push_back(v);
      }
    }
    out = std::move(next);
  }
  return out;
}

double ratio(int num, int den) { return den == 0 ? 0.0 : static_cast<double>(num) / den; }

}  // namespace

void ProbeConfig::validate() const {
  if (subjects.empty()) throw ConfigError("probe needs at least one subject");
  for (const auto& axis : attributes) {
    if (axis.empty()) throw ConfigError("probe attribute axes must not be empty");
  }
  if (prompts_per_cell < 1) throw ConfigError("prompts_per_cell must be >= 1");
  if (target == Target::attributes && attributes.empty()) {
    throw ConfigError("probe target 'attributes' needs at least one attribute axis");
  }
  if (max_in_flight < 1) throw ConfigError("max_in_flight must be >= 1");
}

std::string render_prompt(const ProbeConfig& cfg, const std::string& subject,
                          const std::vector<std::string>& attributes) {
  std::string s = replace_all(cfg.prompt_template, "{attributes}", join(attributes));
  return squeeze(replace_all(std::move(s), "{subject}", subject));
}

std::string render_question(const ProbeConfig& cfg, const std::string& subject,
                            const std::vector<std::string>& attributes) {
  const std::string target = cfg.target == ProbeConfig::Target::subject ? subject : join(attributes);
  return squeeze(replace_all(cfg.question_template, "{target}", target));
}

ProbeGrid probe_concept_grid(const ProbeConfig& cfg, backend::Backend& generator,
                             backend::Backend& captioner) {
  cfg.validate();
  ProbeGrid grid;
  grid.model_id = generator.config().model_id;
  for (const auto& subject : cfg.subjects) {
    for (auto& attrs : cross(cfg.attributes)) {
      ProbeCell c;
      c.subject = subject;
      c.attributes = std::move(attrs);
      grid.cells.push_back(std::move(c));
    }
  }
  const std::size_t per = static_cast<std::size_t>(cfg.prompts_per_cell);
  std::mutex m;
  parallel_for(grid.cells.size() * per, static_cast<std::size_t>(cfg.max_in_flight), [&](std::size_t i) {
    ProbeCell& cell = grid.cells[i / per];
    const std::string prompt = render_prompt(cfg, cell.subject, cell.attributes);
    const std::string question = render_question(cfg, cell.subject, cell.attributes);
    const std::uint64_t seed = keyed_u64(cfg.seed, i % per, prompt, 0x9b0be);
    try {
      const bool yes = captioner.probe(generator.generate(prompt, seed), question);
      std::lock_guard lock(m);
      cell.n += 1;
      cell.positives += yes ? 1 : 0;
    } catch (const Error& e) {
      std::lock_guard lock(m);
      cell.failures += 1;
      cell.errors.emplace_back(e.what());
    }
  });

  std::map<std::string, SubjectAggregate> agg;
  for (auto& c : grid.cells) {
    c.accuracy = ratio(c.positives, c.n);
    c.partial = c.failures > 0;
    std::sort(c.errors.begin(), c.errors.end());  // completion order is not deterministic
    auto& a = agg[c.subject];
    a.n += c.n;
    a.positives += c.positives;
  }
  for (const auto& subject : cfg.subjects) {
    if (auto it = agg.find(subject); it != agg.end()) {
      SubjectAggregate a = it->second;
      a.subject = subject;
      a.accuracy = ratio(a.positives, a.n);
      grid.per_subject.push_back(a);
      agg.erase(it);
    }
  }
  double sum = 0.0;
  for (const auto& a : grid.per_subject) sum += a.accuracy;
  grid.average = grid.per_subject.empty() ? 0.0 : sum / static_cast<double>(grid.per_subject.size());
  return grid;
}

std::vector<RecognizerStats> probe_recognizer_validation(const std::vector<LabeledImage>& labeled,
                                                         backend::Backend& captioner,
                                                         const std::string& question_template) {
  if (labeled.empty()) throw PreconditionError("recognizer validation needs at least one labeled image");
  std::vector<RecognizerStats> stats;
  std::map<std::string, std::size_t> index;
  for (const auto& l : labeled) {
    if (index.emplace(l.subject, stats.size()).second) stats.push_back({.subject = l.subject});
  }
  ProbeConfig q;
  q.question_template = question_template;
  for (const auto& l : labeled) {
    auto& s = stats[index.at(l.subject)];
    bool yes = false;
    try {
      yes = captioner.probe(l.image, render_question(q, l.subject, {}));
    } catch (const Error&) {
      s.failures += 1;
      continue;
    }
    if (yes && l.is_subject) ++s.tp;
    if (yes && !l.is_subject) ++s.fp;
    if (!yes && l.is_subject) ++s.fn;
    if (!yes && !l.is_subject) ++s.tn;
  }
  for (auto& s : stats) {
    s.precision = ratio(s.tp, s.tp + s.fp);
    s.recall = ratio(s.tp, s.tp + s.fn);
  }
  return stats;
}

ProbeConfig probe_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("probe: expected an object");
  for (const auto& [key, value] : j.items()) {
    static const std::vector<std::string> allowed{"subjects", "attributes", "prompts_per_cell",
                                                  "prompt_template", "question_template",
                                                  "target", "seed", "max_in_flight"};
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError("probe: unknown key '" + key + "'");
    }
  }
  ProbeConfig c;
  try {
    c.subjects = j.at("subjects").get<std::vector<std::string>>();
    if (j.contains("attributes")) c.attributes = j.at("attributes").get<std::vector<std::vector<std::string>>>();
    c.prompts_per_cell = j.value("prompts_per_cell", c.prompts_per_cell);
    c.prompt_template = j.value("prompt_template", c.prompt_template);
    c.question_template = j.value("question_template", c.question_template);
    c.seed = j.value("seed", c.seed);
    c.max_in_flight = j.value("max_in_flight", c.max_in_flight);
    const auto target = j.value("target", std::string("subject"));
    if (target == "subject") {
      c.target = ProbeConfig::Target::subject;
    } else if (target == "attributes") {
      c.target = ProbeConfig::Target::attributes;
    } else {
      throw ConfigError("probe.target must be 'subject' or 'attributes'");
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("probe: ") + e.what());
  }
  c.validate();
  return c;
}

json to_json(const ProbeGrid& grid) {
  json cells = json::array();
  for (const auto& c : grid.cells) {
    cells.push_back({{"subject", c.subject}, {"attributes", c.attributes}, {"n", c.n},
                     {"positives", c.positives}, {"failures", c.failures}, {"accuracy", c.accuracy},
                     {"partial", c.partial}, {"errors", c.errors}});
  }
  json subjects = json::array();
  for (const auto& a : grid.per_subject) {
    subjects.push_back({{"subject", a.subject}, {"n", a.n}, {"positives", a.positives}, {"accuracy", a.accuracy}});
  }
  return {{"model_id", grid.model_id}, {"cells", cells}, {"per_subject", subjects}, {"average", grid.average}};
}

json to_json(const std::vector<RecognizerStats>& stats) {
  json out = json::array();
  for (const auto& s : stats) {
    out.push_back({{"subject", s.subject}, {"tp", s.tp}, {"fp", s.fp}, {"fn", s.fn}, {"tn", s.tn},
                   {"failures", s.failures}, {"precision", s.precision}, {"recall", s.recall}});
  }
  return out;
}

std::string render_grid(const ProbeGrid& grid) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(1);
  os << "model: " << grid.model_id << '\n';
  std::size_t w = 7;
  for (const auto& c : grid.cells) {
    std::string label = c.subject;
    if (!c.attributes.empty()) label += " / " + join(c.attributes);
    w = std::max(w, label.size());
  }
  os << std::left << std::setw(static_cast<int>(w)) << "cell" << std::right << std::setw(10)
     << "accuracy" << std::setw(6) << "n" << std::setw(10) << "failures" << '\n';
  for (const auto& c : grid.cells) {
    std::string label = c.subject;
    if (!c.attributes.empty()) label += " / " + join(c.attributes);
    os << std::left << std::setw(static_cast<int>(w)) << label << std::right << std::setw(10)
       << 100.0 * c.accuracy << std::setw(6) << c.n << std::setw(10) << c.failures
       << (c.partial ? "  partial" : "") << '\n';
  }
  for (const auto& a : grid.per_subject) {
    os << std::left << std::setw(static_cast<int>(w)) << a.subject << std::right << std::setw(10)
       << 100.0 * a.accuracy << std::setw(6) << a.n << '\n';
  }
  os << std::left << std::setw(static_cast<int>(w)) << "AVERAGE" << std::right << std::setw(10)
     << 100.0 * grid.average << '\n';
  return os.str();
}

}  // namespace punc::probe
