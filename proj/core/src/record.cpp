#include "punc/record.hpp"

#include "punc/errors.hpp"

namespace punc::record {

using nlohmann::json;

namespace {

json optional_string(const std::optional<std::string>& s) { return s ? json(*s) : json(); }

std::optional<std::string> read_optional_string(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<std::string>();
}

}  // namespace

json to_json(const RunRecord& r) {
  json metrics = json::object();
  for (const auto& [name, m] : r.metrics) {
    if (m.error) {
      metrics[name] = {{"error", *m.error}};
    } else {
      metrics[name] = {{"precision", m.precision}, {"recall", m.recall},
                       {"f1", m.f1},               {"degenerate", m.degenerate},
                       {"component", m.component}, {"uncertainty", m.uncertainty}};
    }
  }
  json bl = json::object();
  for (const auto& [name, b] : r.baselines) {
    if (b.error) {
      bl[name] = {{"method", b.method}, {"error", *b.error}};
    } else {
      bl[name] = {{"method", b.method}, {"value", b.value}, {"parts", b.parts}};
    }
  }
  return {{"record_version", r.record_version},
          {"prompt_id", r.prompt_id},
          {"group", r.group},
          {"dataset", r.dataset},
          {"text", r.text},
          {"repeat", r.repeat},
          {"seed", r.seed},
          {"instruction", r.instruction},
          {"image_id", optional_string(r.image_id)},
          {"caption", optional_string(r.caption)},
          {"metrics", metrics},
          {"baselines", bl},
          {"error", optional_string(r.error)}};
}

RunRecord from_json(const json& j) {
  try {
    RunRecord r;
    r.record_version = j.at("record_version").get<int>();
    if (r.record_version != kRecordVersion) {
      throw ParseError("unsupported record_version " + std::to_string(r.record_version));
    }
    r.prompt_id = j.at("prompt_id").get<std::string>();
    r.group = j.at("group").get<std::string>();
    r.dataset = j.at("dataset").get<std::string>();
    r.text = j.at("text").get<std::string>();
    r.repeat = j.at("repeat").get<int>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.instruction = j.at("instruction").get<std::string>();
    r.image_id = read_optional_string(j, "image_id");
    r.caption = read_optional_string(j, "caption");
    r.error = read_optional_string(j, "error");
    for (const auto& [name, m] : j.at("metrics").items()) {
      MetricEntry e;
      if (m.contains("error")) {
        e.error = m.at("error").get<std::string>();
      } else {
        e.precision = m.at("precision").get<double>();
        e.recall = m.at("recall").get<double>();
        e.f1 = m.at("f1").get<double>();
        e.degenerate = m.at("degenerate").get<bool>();
        e.component = m.at("component").get<std::string>();
        e.uncertainty = m.at("uncertainty").get<double>();
      }
      r.metrics.emplace(name, std::move(e));
    }
    for (const auto& [name, b] : j.at("baselines").items()) {
      BaselineEntry e;
      e.method = b.at("method").get<std::string>();
      if (b.contains("error")) {
        e.error = b.at("error").get<std::string>();
      } else {
        e.value = b.at("value").get<double>();
        e.parts = b.at("parts").get<std::vector<double>>();
      }
      r.baselines.emplace(name, std::move(e));
    }
    return r;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed run record: ") + e.what());
  }
}

std::string to_line(const RunRecord& r) { return to_json(r).dump(); }

}  // namespace punc::record
