#include "punc/report.hpp"

#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "punc/config.hpp"
#include "punc/errors.hpp"

namespace punc::report {

using nlohmann::json;

namespace {

struct ScorerRef {
  std::string name;
  bool is_metric = true;
  std::string key;        // metric or baseline name in the record
  std::string component;  // metrics only
};

std::vector<ScorerRef> expand(const ScorerSet& s) {
  std::vector<ScorerRef> out;
  for (const auto& m : s.metrics) {
    for (const char* c : {"precision", "recall"}) out.push_back({m + "/" + c, true, m, c});
  }
  for (const auto& b : s.baselines) out.push_back({b, false, b, ""});
  return out;
}

std::optional<double> uncertainty_of(const record::RunRecord& r, const ScorerRef& s) {
  if (s.is_metric) {
    const auto it = r.metrics.find(s.key);
    if (it == r.metrics.end() || it->second.error) return std::nullopt;
    return 1.0 - it->second.value_of(s.component);
  }
  const auto it = r.baselines.find(s.key);
  if (it == r.baselines.end() || it->second.error) return std::nullopt;
  return it->second.value;
}

json report_to_json(const detect::DetectionReport& d) {
  return {{"auroc", d.auroc}, {"aupr", d.aupr}, {"fpr95", d.fpr95}, {"n_pos", d.n_pos},
          {"n_neg", d.n_neg}, {"pr_interpolation", d.pr_interpolation}};
}

detect::DetectionReport report_from_json(const json& j) {
  detect::DetectionReport d;
  d.auroc = j.at("auroc").get<double>();
  d.aupr = j.at("aupr").get<double>();
  d.fpr95 = j.at("fpr95").get<double>();
  d.n_pos = j.at("n_pos").get<std::size_t>();
  d.n_neg = j.at("n_neg").get<std::size_t>();
  d.pr_interpolation = j.at("pr_interpolation").get<std::string>();
  return d;
}

std::size_t display_width(const std::string& s) {
  std::size_t n = 0;
  for (unsigned char c : s) n += (c & 0xC0) != 0x80 ? 1 : 0;
  return n;
}

std::string pad(const std::string& s, std::size_t width, bool right) {
  const std::size_t w = display_width(s);
  const std::string fill(w < width ? width - w : 0, ' ');
  return right ? fill + s : s + fill;
}

std::string percent(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << 100.0 * v;
  return os.str();
}

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write '" + tmp + "'");
    out << text;
    if (!out) throw ConfigError("cannot write '" + tmp + "'");
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

std::vector<std::string> ScorerSet::names() const {
  std::vector<std::string> out;
  for (const auto& s : expand(*this)) out.push_back(s.name);
  return out;
}

Summary compute_summary(const std::vector<record::RunRecord>& records,
                        const std::string& negative_group,
                        const std::vector<std::string>& uncertain_groups, const ScorerSet& scorers,
                        double target_tpr) {
  Summary s;
  s.negative_group = negative_group;
  s.target_tpr = target_tpr;
  s.records = records.size();
  for (const auto& r : records) s.failures += r.error ? 1 : 0;

  const auto refs = expand(scorers);
  for (const auto& group : uncertain_groups) {
    for (const auto& ref : refs) {
      ReportEntry e;
      e.group = group;
      e.scorer = ref.name;
      std::vector<double> pos;
      std::vector<double> neg;
      for (const auto& r : records) {
        const bool is_pos = r.group == group;
        if (!is_pos && r.group != negative_group) continue;
        const auto u = uncertainty_of(r, ref);
        if (!u) {
          (is_pos ? e.excluded_pos : e.excluded_neg) += 1;
        } else {
          (is_pos ? pos : neg).push_back(*u);
        }
      }
      if (pos.empty() || neg.empty()) {
        e.error = "needs at least one usable sample in each class (positives " +
                  std::to_string(pos.size()) + ", negatives " + std::to_string(neg.size()) + ")";
      } else {
        e.report = detect::evaluate_detection(pos, neg, target_tpr);
      }
      s.reports.push_back(std::move(e));
    }
  }
  return s;
}

json summary_to_json(const Summary& s) {
  json reports = json::array();
  for (const auto& e : s.reports) {
    json j{{"group", e.group},
           {"scorer", e.scorer},
           {"excluded_pos", e.excluded_pos},
           {"excluded_neg", e.excluded_neg},
           {"report", e.report ? report_to_json(*e.report) : json()},
           {"error", e.error ? json(*e.error) : json()}};
    reports.push_back(std::move(j));
  }
  return {{"summary_version", s.summary_version},
          {"negative_group", s.negative_group},
          {"pr_interpolation", "step"},
          {"target_tpr", s.target_tpr},
          {"records", s.records},
          {"failures", s.failures},
          {"reports", reports}};
}

Summary summary_from_json(const json& j) {
  try {
    Summary s;
    s.summary_version = j.at("summary_version").get<int>();
    if (s.summary_version != kSummaryVersion) {
      throw ParseError("unsupported summary_version " + std::to_string(s.summary_version));
    }
    s.negative_group = j.at("negative_group").get<std::string>();
    s.target_tpr = j.at("target_tpr").get<double>();
    s.records = j.at("records").get<std::size_t>();
    s.failures = j.at("failures").get<std::size_t>();
    for (const auto& r : j.at("reports")) {
      ReportEntry e;
      e.group = r.at("group").get<std::string>();
      e.scorer = r.at("scorer").get<std::string>();
      e.excluded_pos = r.at("excluded_pos").get<std::size_t>();
      e.excluded_neg = r.at("excluded_neg").get<std::size_t>();
      if (!r.at("report").is_null()) e.report = report_from_json(r.at("report"));
      if (!r.at("error").is_null()) e.error = r.at("error").get<std::string>();
      s.reports.push_back(std::move(e));
    }
    return s;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed summary: ") + e.what());
  }
}

std::string render_table(const Summary& s) {
  const std::vector<std::string> header{"group", "scorer", "auroc ↑", "aupr ↑", "fpr95 ↓", "n+", "n-", "excluded"};
  std::vector<std::vector<std::string>> rows;
  for (const auto& e : s.reports) {
    if (e.report) {
      rows.push_back({e.group, e.scorer, percent(e.report->auroc), percent(e.report->aupr),
                      percent(e.report->fpr95), std::to_string(e.report->n_pos),
                      std::to_string(e.report->n_neg), std::to_string(e.excluded_pos + e.excluded_neg)});
    } else {
      rows.push_back({e.group, e.scorer, "-", "-", "-", "0", "0",
                      std::to_string(e.excluded_pos + e.excluded_neg)});
    }
  }
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    width[c] = display_width(header[c]);
    for (const auto& r : rows) width[c] = std::max(width[c], display_width(r[c]));
  }
  std::ostringstream os;
  os << "negative group: " << s.negative_group << "  records: " << s.records
     << "  failures: " << s.failures << "  values in %, fpr at tpr " << percent(s.target_tpr) << "%\n";
  auto line = [&](const std::vector<std::string>& cells) {
    std::string out;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c) out += "  ";
      out += pad(cells[c], width[c], c >= 2);
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    os << out << '\n';
  };
  line(header);
  for (const auto& r : rows) line(r);
  return os.str();
}

RecordFile read_records(const std::filesystem::path& path) {
  RecordFile rf;
  std::ifstream in(path, std::ios::binary);
  if (!in) return rf;
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < content.size()) {
    const std::size_t nl = content.find('\n', pos);
    if (nl == std::string::npos) {
      rf.truncated_tail = true;
      break;
    }
    ++line_no;
    const std::string_view line(content.data() + pos, nl - pos);
    if (!line.empty()) {
      json j;
      try {
        j = json::parse(line);
      } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what(), line_no);
      }
      try {
        rf.records.push_back(record::from_json(j));
      } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what(), line_no);
      }
    }
    pos = nl + 1;
    rf.valid_bytes = pos;
  }
  return rf;
}

void write_summary(const std::filesystem::path& run_dir, const Summary& s) {
  write_text_atomic(run_dir / "summary.json", summary_to_json(s).dump(2) + "\n");
  write_text_atomic(run_dir / "report.txt", render_table(s));
}

Summary emit_report(const std::filesystem::path& run_dir) {
  if (!std::filesystem::is_directory(run_dir)) {
    throw ConfigError("run directory '" + run_dir.string() + "' does not exist");
  }
  const auto cfg_path = run_dir / "config.resolved.json";
  if (!std::filesystem::exists(cfg_path)) {
    throw ConfigError("'" + run_dir.string() + "' has no config.resolved.json");
  }
  const config::RunConfig cfg = config::run_config_from_json(config::read_json_file(cfg_path));
  const RecordFile rf = read_records(run_dir / "records.jsonl");

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
  ScorerSet scorers;
  for (const auto& m : cfg.metrics) scorers.metrics.push_back(m.name());
  for (const auto& b : cfg.baselines) scorers.baselines.push_back(b.name);
  Summary s = compute_summary(rf.records, negative, uncertain, scorers, cfg.target_tpr);
  write_summary(run_dir, s);
  return s;
}

}  // namespace punc::report
