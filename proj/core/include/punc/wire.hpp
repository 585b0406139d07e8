#pragma once

// JSON wire protocol, all endpoints POST:
//   /v1/generate     {request_id, prompt, seed, steps, guidance}      -> {image_id, payload_b64}
//   /v1/caption      {request_id, image_id|payload_b64, instruction, max_tokens} -> {caption}
//   /v1/embed        {request_id, texts}                              -> {dim, matrices}
//   /v1/probe        {request_id, image_id|payload_b64, question}     -> {answer: "yes"|"no"}
//   /v1/reconstruct  {request_id, image_id|payload_b64, kind, t|coverage, pattern?, prompt, seed}
//                                                                     -> {image_id, payload_b64}
//   /v1/capabilities {}                                               -> {ops}
// Errors: non-2xx with {code, message, request_id}. Responses echo request_id
// when the request carried one.
//
// Serialization is compact with keys in byte order, so dump(parse(x)) == x for
// canonical documents.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "punc/errors.hpp"

namespace punc::wire {

inline constexpr std::string_view kGeneratePath = "/v1/generate";
inline constexpr std::string_view kCaptionPath = "/v1/caption";
inline constexpr std::string_view kEmbedPath = "/v1/embed";
inline constexpr std::string_view kProbePath = "/v1/probe";
inline constexpr std::string_view kReconstructPath = "/v1/reconstruct";
inline constexpr std::string_view kCapabilitiesPath = "/v1/capabilities";

struct ImageHandle {
  std::optional<std::string> image_id;
  std::optional<std::string> payload_b64;
  friend bool operator==(const ImageHandle&, const ImageHandle&) = default;
};

struct GenerateRequest {
  std::string request_id;
  std::string prompt;
  std::uint64_t seed = 0;
  int steps = 0;
  std::optional<double> guidance;
  friend bool operator==(const GenerateRequest&, const GenerateRequest&) = default;
};

struct ImageResponse {
  std::optional<std::string> request_id;
  std::string image_id;
  std::string payload_b64;
  friend bool operator==(const ImageResponse&, const ImageResponse&) = default;
};

struct CaptionRequest {
  std::string request_id;
  ImageHandle image;
  std::string instruction;
  int max_tokens = 0;
  friend bool operator==(const CaptionRequest&, const CaptionRequest&) = default;
};

struct CaptionResponse {
  std::optional<std::string> request_id;
  std::string caption;
  friend bool operator==(const CaptionResponse&, const CaptionResponse&) = default;
};

struct EmbedRequest {
  std::string request_id;
  std::vector<std::string> texts;
  friend bool operator==(const EmbedRequest&, const EmbedRequest&) = default;
};

struct EmbedResponse {
  std::optional<std::string> request_id;
  std::size_t dim = 0;
  std::vector<std::vector<std::vector<double>>> matrices;
  friend bool operator==(const EmbedResponse&, const EmbedResponse&) = default;
};

struct ProbeRequest {
  std::string request_id;
  ImageHandle image;
  std::string question;
  friend bool operator==(const ProbeRequest&, const ProbeRequest&) = default;
};

struct ProbeResponse {
  std::optional<std::string> request_id;
  std::string answer;  // exactly "yes" or "no"; enforced by parse_answer
  friend bool operator==(const ProbeResponse&, const ProbeResponse&) = default;
};

struct ReconstructRequest {
  std::string request_id;
  ImageHandle image;
  std::string kind;  // "noise_to_t" | "mask"
  std::optional<double> t;
  std::optional<double> coverage;
  std::optional<std::string> pattern;
  std::string prompt;
  std::uint64_t seed = 0;
  friend bool operator==(const ReconstructRequest&, const ReconstructRequest&) = default;
};

struct CapabilitiesResponse {
  std::vector<std::string> ops;
  friend bool operator==(const CapabilitiesResponse&, const CapabilitiesResponse&) = default;
};

struct ErrorBody {
  std::string code;
  std::string message;
  std::string request_id;
  friend bool operator==(const ErrorBody&, const ErrorBody&) = default;
};

void to_json(nlohmann::json& j, const GenerateRequest& v);
void from_json(const nlohmann::json& j, GenerateRequest& v);
void to_json(nlohmann::json& j, const ImageResponse& v);
void from_json(const nlohmann::json& j, ImageResponse& v);
void to_json(nlohmann::json& j, const CaptionRequest& v);
void from_json(const nlohmann::json& j, CaptionRequest& v);
void to_json(nlohmann::json& j, const CaptionResponse& v);
void from_json(const nlohmann::json& j, CaptionResponse& v);
void to_json(nlohmann::json& j, const EmbedRequest& v);
void from_json(const nlohmann::json& j, EmbedRequest& v);
void to_json(nlohmann::json& j, const EmbedResponse& v);
void from_json(const nlohmann::json& j, EmbedResponse& v);
void to_json(nlohmann::json& j, const ProbeRequest& v);
void from_json(const nlohmann::json& j, ProbeRequest& v);
void to_json(nlohmann::json& j, const ProbeResponse& v);
void from_json(const nlohmann::json& j, ProbeResponse& v);
void to_json(nlohmann::json& j, const ReconstructRequest& v);
void from_json(const nlohmann::json& j, ReconstructRequest& v);
void to_json(nlohmann::json& j, const CapabilitiesResponse& v);
void from_json(const nlohmann::json& j, CapabilitiesResponse& v);
void to_json(nlohmann::json& j, const ErrorBody& v);
void from_json(const nlohmann::json& j, ErrorBody& v);

template <typename T>
std::string dump(const T& value) {
  return nlohmann::json(value).dump();
}

/// Parses a wire document; any shape or type mismatch becomes a ProtocolError.
template <typename T>
T parse(std::string_view body) {
  try {
    return nlohmann::json::parse(body).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("malformed wire message: ") + e.what());
  }
}

/// "yes" -> true, "no" -> false, anything else -> ProtocolError.
bool parse_answer(std::string_view answer);

}  // namespace punc::wire
