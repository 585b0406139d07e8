#pragma once

// Golden wire documents: tests/fixtures/wire/<message>-<variant>.json, each a
// canonical (compact, sorted-key) document without a trailing newline.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "punc/wire.hpp"

namespace goldens {

struct Result {
  std::string name;
  bool ok = false;
  std::string detail;
};

template <typename T>
std::string round_trip(const std::string& text) {
  const T value = punc::wire::parse<T>(text);
  const std::string again = punc::wire::dump(value);
  if (punc::wire::parse<T>(again) != value) return "reparsed value differs";
  return again == text ? "" : "re-serialized as " + again;
}

inline const std::map<std::string, std::function<std::string(const std::string&)>>& checkers() {
  using namespace punc::wire;
  static const std::map<std::string, std::function<std::string(const std::string&)>> m{
      {"generate_request", round_trip<GenerateRequest>},
      {"image_response", round_trip<ImageResponse>},
      {"caption_request", round_trip<CaptionRequest>},
      {"caption_response", round_trip<CaptionResponse>},
      {"embed_request", round_trip<EmbedRequest>},
      {"embed_response", round_trip<EmbedResponse>},
      {"probe_request", round_trip<ProbeRequest>},
      {"probe_response", round_trip<ProbeResponse>},
      {"reconstruct_request", round_trip<ReconstructRequest>},
      {"capabilities_response", round_trip<CapabilitiesResponse>},
      {"error_body", round_trip<ErrorBody>},
  };
  return m;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// One result per fixture file, sorted by name. An empty directory yields nothing.
inline std::vector<Result> check_all(const std::filesystem::path& dir) {
  std::vector<Result> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() != ".json") continue;
    Result r;
    r.name = entry.path().stem().string();
    const auto dash = r.name.find('-');
    const auto it = checkers().find(r.name.substr(0, dash));
    if (it == checkers().end()) {
      r.detail = "no message type for this file name";
    } else {
      try {
        r.detail = it->second(read_file(entry.path()));
        r.ok = r.detail.empty();
      } catch (const std::exception& e) {
        r.detail = e.what();
      }
    }
    out.push_back(std::move(r));
  }
  std::sort(out.begin(), out.end(), [](const Result& a, const Result& b) { return a.name < b.name; });
  return out;
}

}  // namespace goldens
