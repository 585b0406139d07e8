#include "punc/wire.hpp"

namespace punc::wire {

using nlohmann::json;

namespace {

template <typename T>
void get_optional(const json& j, const char* key, std::optional<T>& out) {
  if (j.contains(key) && !j.at(key).is_null()) {
    out = j.at(key).get<T>();
  } else {
    out.reset();
  }
}

template <typename T>
void put_optional(json& j, const char* key, const std::optional<T>& v) {
  if (v) j[key] = *v;
}

void put_image(json& j, const ImageHandle& h) {
  put_optional(j, "image_id", h.image_id);
  put_optional(j, "payload_b64", h.payload_b64);
}

ImageHandle get_image(const json& j) {
  ImageHandle h;
  get_optional(j, "image_id", h.image_id);
  get_optional(j, "payload_b64", h.payload_b64);
  if (!h.image_id && !h.payload_b64) {
    throw ProtocolError("request needs image_id or payload_b64");
  }
  return h;
}

}  // namespace

void to_json(json& j, const GenerateRequest& v) {
  j = json{{"request_id", v.request_id},
           {"prompt", v.prompt},
           {"seed", v.seed},
           {"steps", v.steps},
           {"guidance", v.guidance ? json(*v.guidance) : json(nullptr)}};
}

void from_json(const json& j, GenerateRequest& v) {
  j.at("request_id").get_to(v.request_id);
  j.at("prompt").get_to(v.prompt);
  j.at("seed").get_to(v.seed);
  j.at("steps").get_to(v.steps);
  get_optional(j, "guidance", v.guidance);
}

void to_json(json& j, const ImageResponse& v) {
  j = json{{"image_id", v.image_id}, {"payload_b64", v.payload_b64}};
  put_optional(j, "request_id", v.request_id);
}

void from_json(const json& j, ImageResponse& v) {
  get_optional(j, "request_id", v.request_id);
  j.at("image_id").get_to(v.image_id);
  j.at("payload_b64").get_to(v.payload_b64);
}

void to_json(json& j, const CaptionRequest& v) {
  j = json{{"request_id", v.request_id},
           {"instruction", v.instruction},
           {"max_tokens", v.max_tokens}};
  put_image(j, v.image);
}

void from_json(const json& j, CaptionRequest& v) {
  j.at("request_id").get_to(v.request_id);
  v.image = get_image(j);
  j.at("instruction").get_to(v.instruction);
  j.at("max_tokens").get_to(v.max_tokens);
}

void to_json(json& j, const CaptionResponse& v) {
  j = json{{"caption", v.caption}};
  put_optional(j, "request_id", v.request_id);
}

void from_json(const json& j, CaptionResponse& v) {
  get_optional(j, "request_id", v.request_id);
  j.at("caption").get_to(v.caption);
}

void to_json(json& j, const EmbedRequest& v) {
  j = json{{"request_id", v.request_id}, {"texts", v.texts}};
}

void from_json(const json& j, EmbedRequest& v) {
  j.at("request_id").get_to(v.request_id);
  j.at("texts").get_to(v.texts);
}

void to_json(json& j, const EmbedResponse& v) {
  j = json{{"dim", v.dim}, {"matrices", v.matrices}};
  put_optional(j, "request_id", v.request_id);
}

void from_json(const json& j, EmbedResponse& v) {
  get_optional(j, "request_id", v.request_id);
  j.at("dim").get_to(v.dim);
  j.at("matrices").get_to(v.matrices);
}

void to_json(json& j, const ProbeRequest& v) {
  j = json{{"request_id", v.request_id}, {"question", v.question}};
  put_image(j, v.image);
}

void from_json(const json& j, ProbeRequest& v) {
  j.at("request_id").get_to(v.request_id);
  v.image = get_image(j);
  j.at("question").get_to(v.question);
}

void to_json(json& j, const ProbeResponse& v) {
  j = json{{"answer", v.answer}};
  put_optional(j, "request_id", v.request_id);
}

void from_json(const json& j, ProbeResponse& v) {
  get_optional(j, "request_id", v.request_id);
  j.at("answer").get_to(v.answer);
}

void to_json(json& j, const ReconstructRequest& v) {
  j = json{{"request_id", v.request_id},
           {"kind", v.kind},
           {"prompt", v.prompt},
           {"seed", v.seed}};
  put_image(j, v.image);
  put_optional(j, "t", v.t);
  put_optional(j, "coverage", v.coverage);
  put_optional(j, "pattern", v.pattern);
}

void from_json(const json& j, ReconstructRequest& v) {
  j.at("request_id").get_to(v.request_id);
  v.image = get_image(j);
  j.at("kind").get_to(v.kind);
  get_optional(j, "t", v.t);
  get_optional(j, "coverage", v.coverage);
  get_optional(j, "pattern", v.pattern);
  j.at("prompt").get_to(v.prompt);
  j.at("seed").get_to(v.seed);
  if (v.kind == "noise_to_t") {
    if (!v.t) throw ProtocolError("noise_to_t reconstruction needs t");
  } else if (v.kind == "mask") {
    if (!v.coverage) throw ProtocolError("mask reconstruction needs coverage");
  } else {
    throw ProtocolError("unknown reconstruction kind '" + v.kind + "'");
  }
}

void to_json(json& j, const CapabilitiesResponse& v) { j = json{{"ops", v.ops}}; }

void from_json(const json& j, CapabilitiesResponse& v) { j.at("ops").get_to(v.ops); }

void to_json(json& j, const ErrorBody& v) {
  j = json{{"code", v.code}, {"message", v.message}, {"request_id", v.request_id}};
}

void from_json(const json& j, ErrorBody& v) {
  j.at("code").get_to(v.code);
  j.at("message").get_to(v.message);
  if (j.contains("request_id") && j.at("request_id").is_string()) {
    j.at("request_id").get_to(v.request_id);
  }
}

bool parse_answer(std::string_view answer) {
  if (answer == "yes") return true;
  if (answer == "no") return false;
  throw ProtocolError("probe answer must be \"yes\" or \"no\", got \"" + std::string(answer) + "\"");
}

}  // namespace punc::wire
