#include "punc/caching_backend.hpp"

#include <fstream>
#include <sstream>
#include <thread>

#include "punc/errors.hpp"
#include "punc/hash.hpp"

namespace punc::backend {

using nlohmann::json;

namespace {

json image_to_json(const ImageRef& image) {
  return json{{"image_id", image.id},
              {"payload_b64", base64_encode(image.payload)},
              {"producer", image.producer},
              {"seed", image.seed}};
}

ImageRef image_from_json(const json& j) {
  ImageRef r;
  r.id = j.at("image_id").get<std::string>();
  r.payload = base64_decode(j.at("payload_b64").get<std::string>());
  r.producer = j.at("producer").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  return r;
}

}  // namespace

CachingBackend::CachingBackend(Backend& inner, std::filesystem::path directory,
                               std::string namespace_key)
    : Backend(inner.config()),
      inner_(inner),
      directory_(std::move(directory)),
      namespace_key_(std::move(namespace_key)) {
  std::filesystem::create_directories(directory_);
}

std::string CachingBackend::key_for(const json& request) const {
  return sha256_hex(namespace_key_ + "\n" + request.dump());
}

std::optional<json> CachingBackend::lookup(const std::string& key) {
  const auto path = directory_ / key.substr(0, 2) / (key + ".json");
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    ++misses_;
    return std::nullopt;
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    json value = json::parse(buffer.str());
    ++hits_;
    return value;
  } catch (const json::exception&) {
    // Torn or foreign file: treat as a miss and overwrite later.
    ++misses_;
    return std::nullopt;
  }
}

void CachingBackend::store(const std::string& key, const json& value) {
  const auto dir = directory_ / key.substr(0, 2);
  std::filesystem::create_directories(dir);
  std::ostringstream tmp_name;
  tmp_name << key << ".tmp." << std::this_thread::get_id() << "." << tmp_counter_++;
  const auto tmp = dir / tmp_name.str();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write cache entry " + tmp.string());
    out << value.dump();
  }
  std::filesystem::rename(tmp, dir / (key + ".json"));
}

CapabilitySet CachingBackend::do_capabilities() {
  // Kept in memory only: a server may gain or lose ops between runs.
  std::lock_guard lock(caps_mutex_);
  if (!caps_) caps_ = inner_.capabilities();
  return *caps_;
}

ImageRef CachingBackend::do_generate(std::string_view prompt, std::uint64_t seed) {
  const std::string key = key_for(json{{"op", "generate"}, {"prompt", prompt}, {"seed", seed}});
  if (auto hit = lookup(key)) return image_from_json(*hit);
  ImageRef image = inner_.generate(prompt, seed);
  store(key, image_to_json(image));
  return image;
}

std::string CachingBackend::do_caption(const ImageRef& image, std::string_view instruction,
                                       int max_tokens) {
  const std::string key = key_for(json{{"op", "caption"},
                                       {"image_id", image.id},
                                       {"instruction", instruction},
                                       {"max_tokens", max_tokens}});
  if (auto hit = lookup(key)) return hit->at("caption").get<std::string>();
  std::string caption = inner_.caption(image, instruction, max_tokens);
  store(key, json{{"caption", caption}});
  return caption;
}

std::vector<textsim::EmbeddingMatrix> CachingBackend::do_embed(const std::vector<std::string>& texts) {
  const std::string key = key_for(json{{"op", "embed"}, {"texts", texts}});
  if (auto hit = lookup(key)) {
    const auto dim = hit->at("dim").get<std::size_t>();
    std::vector<textsim::EmbeddingMatrix> out;
    for (const auto& rows : hit->at("matrices")) {
      out.emplace_back(rows.get<std::vector<std::vector<double>>>(), dim);
    }
    return out;
  }
  auto matrices = inner_.embed(texts);
  json stored{{"dim", matrices.empty() ? 0 : matrices.front().dim()}, {"matrices", json::array()}};
  for (const auto& m : matrices) stored["matrices"].push_back(m.rows());
  store(key, stored);
  return matrices;
}

bool CachingBackend::do_probe(const ImageRef& image, std::string_view question) {
  const std::string key = key_for(json{{"op", "probe"}, {"image_id", image.id}, {"question", question}});
  if (auto hit = lookup(key)) return hit->at("answer").get<bool>();
  const bool answer = inner_.probe(image, question);
  store(key, json{{"answer", answer}});
  return answer;
}

ImageRef CachingBackend::do_reconstruct(const ImageRef& image, const ReconstructionSpec& spec,
                                        std::string_view prompt, std::uint64_t seed) {
  json request{{"op", "reconstruct"}, {"image_id", image.id}, {"prompt", prompt}, {"seed", seed}};
  if (spec.kind == ReconstructionSpec::Kind::noise_to_t) {
    request["kind"] = "noise_to_t";
    request["t"] = spec.t;
  } else {
    request["kind"] = "mask";
    request["pattern"] = spec.pattern;
    request["coverage"] = spec.coverage;
  }
  const std::string key = key_for(request);
  if (auto hit = lookup(key)) return image_from_json(*hit);
  ImageRef out = inner_.reconstruct(image, spec, prompt, seed);
  store(key, image_to_json(out));
  return out;
}

}  // namespace punc::backend
