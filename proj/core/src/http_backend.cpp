#include "punc/http_backend.hpp"

#include <httplib.h>

#include <chrono>
#include <mutex>
#include <optional>
#include <semaphore>
#include <thread>

#include "punc/errors.hpp"
#include "punc/hash.hpp"
#include "punc/wire.hpp"

namespace punc::backend {

using nlohmann::json;

namespace {

wire::ImageHandle handle_for(const ImageRef& image) {
  wire::ImageHandle h;
  if (image.has_payload()) {
    h.payload_b64 = base64_encode(image.payload);
  } else {
    h.image_id = image.id;
  }
  return h;
}

ImageRef image_from(const wire::ImageResponse& r, const std::string& producer, std::uint64_t seed) {
  std::string payload;
  try {
    payload = base64_decode(r.payload_b64);
  } catch (const ParseError& e) {
    throw ProtocolError(std::string("image payload: ") + e.what());
  }
  if (payload.empty()) {
    ImageRef ref;
    ref.id = r.image_id;
    ref.producer = producer;
    ref.seed = seed;
    return ref;
  }
  ImageRef ref = ImageRef::from_payload(std::move(payload), producer, seed);
  if (ref.id != r.image_id) {
    throw ProtocolError("image_id " + r.image_id + " does not match payload hash " + ref.id);
  }
  return ref;
}

}  // namespace

struct HttpBackend::Impl {
  explicit Impl(const BackendConfig& cfg) : config(cfg), in_flight(cfg.max_in_flight) {
    if (!cfg.endpoint.starts_with("http://")) {
      throw ConfigError("HttpBackend needs an http:// endpoint, got " + cfg.endpoint);
    }
    std::string rest = cfg.endpoint.substr(std::string_view("http://").size());
    const auto slash = rest.find('/');
    host_port = "http://" + rest.substr(0, slash);
    if (slash != std::string::npos) {
      prefix = rest.substr(slash);
      while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    }
    if (host_port == "http://") throw ConfigError("endpoint has no host: " + cfg.endpoint);
  }

  static std::string request_id_for(std::string_view path, const json& body) {
    return "req-" + sha256_hex(std::string(path) + "\n" + body.dump()).substr(0, 24);
  }

  json post(std::string_view path, json body, bool with_request_id = true) {
    std::string request_id;
    if (with_request_id) {
      request_id = request_id_for(path, body);
      body["request_id"] = request_id;
    }
    const std::string payload = body.dump();
    const std::string url_path = prefix + std::string(path);

    httplib::Headers headers{{"X-Model-Id", config.model_id}};
    if (config.bearer_token) headers.emplace("Authorization", "Bearer " + *config.bearer_token);

    std::string last_failure = "no attempt made";
    std::optional<ServerError> last_server_error;
    for (int attempt = 0; attempt <= config.max_retries; ++attempt) {
      if (attempt > 0) {
        const long long backoff =
            std::min<long long>(5000, static_cast<long long>(config.retry_backoff_ms) << (attempt - 1));
        std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
      }
      httplib::Result res{nullptr, httplib::Error::Unknown};
      {
        in_flight.acquire();
        httplib::Client client(host_port);
        const auto secs = config.timeout_ms / 1000;
        const auto usecs = (config.timeout_ms % 1000) * 1000;
        client.set_connection_timeout(secs, usecs);
        client.set_read_timeout(secs, usecs);
        client.set_write_timeout(secs, usecs);
        res = client.Post(url_path, headers, payload, "application/json");
        in_flight.release();
      }
      if (!res) {
        last_failure = "transport error: " + httplib::to_string(res.error());
        last_server_error.reset();
        continue;
      }
      const int status = res->status;
      if (status >= 200 && status < 300) {
        json parsed;
        try {
          parsed = json::parse(res->body);
        } catch (const json::exception& e) {
          throw ProtocolError("unparseable response from " + url_path + ": " + e.what());
        }
        if (with_request_id && parsed.contains("request_id") && parsed["request_id"].is_string() &&
            parsed["request_id"].get<std::string>() != request_id) {
          throw ProtocolError("response request_id does not match " + request_id);
        }
        return parsed;
      }
      wire::ErrorBody err;
      try {
        err = wire::parse<wire::ErrorBody>(res->body);
      } catch (const ProtocolError&) {
        err.code = "http_" + std::to_string(status);
        err.message = res->body.substr(0, 200);
      }
      if (err.request_id.empty()) err.request_id = request_id;
      if (status == 501 || err.code == "not_supported") {
        throw CapabilityError(err.message.empty() ? "operation not supported" : err.message);
      }
      if (status == 429 || status >= 500) {
        last_server_error.emplace(status, err.code, err.message, err.request_id);
        last_failure = last_server_error->what();
        continue;
      }
      throw ServerError(status, err.code, err.message, err.request_id);
    }
    if (last_server_error) throw *last_server_error;
    throw TransportError(url_path + ": " + last_failure + " after " +
                         std::to_string(config.max_retries + 1) + " attempt(s)");
  }

  template <typename Response>
  Response call(std::string_view path, const json& body) {
    try {
      return post(path, body).get<Response>();
    } catch (const json::exception& e) {
      throw ProtocolError("malformed response from " + std::string(path) + ": " + e.what());
    }
  }

  BackendConfig config;
  std::string host_port;
  std::string prefix;
  std::counting_semaphore<4096> in_flight;
  std::mutex caps_mutex;
  std::optional<CapabilitySet> caps;
};

HttpBackend::HttpBackend(BackendConfig config)
    : Backend(std::move(config)), impl_(std::make_unique<Impl>(this->config())) {}

HttpBackend::~HttpBackend() = default;

CapabilitySet HttpBackend::do_capabilities() {
  std::lock_guard lock(impl_->caps_mutex);
  if (!impl_->caps) {
    json body = json::object();
    wire::CapabilitiesResponse resp;
    try {
      resp = impl_->post(wire::kCapabilitiesPath, body, false).get<wire::CapabilitiesResponse>();
    } catch (const json::exception& e) {
      throw ProtocolError(std::string("malformed capabilities response: ") + e.what());
    }
    CapabilitySet caps;
    for (const auto& op : resp.ops) {
      try {
        caps.insert(parse_capability(op));
      } catch (const ParseError&) {
        // Ops this client does not know about are ignored.
      }
    }
    impl_->caps = std::move(caps);
  }
  return *impl_->caps;
}

ImageRef HttpBackend::do_generate(std::string_view prompt, std::uint64_t seed) {
  wire::GenerateRequest req;
  req.prompt = std::string(prompt);
  req.seed = seed;
  req.steps = config().inference_steps;
  req.guidance = config().guidance_scale;
  json body = req;
  body.erase("request_id");
  const auto resp = impl_->call<wire::ImageResponse>(wire::kGeneratePath, body);
  return image_from(resp, config().model_id, seed);
}

std::string HttpBackend::do_caption(const ImageRef& image, std::string_view instruction,
                                    int max_tokens) {
  wire::CaptionRequest req;
  req.image = handle_for(image);
  req.instruction = std::string(instruction);
  req.max_tokens = max_tokens;
  json body = req;
  body.erase("request_id");
  return impl_->call<wire::CaptionResponse>(wire::kCaptionPath, body).caption;
}

std::vector<textsim::EmbeddingMatrix> HttpBackend::do_embed(const std::vector<std::string>& texts) {
  wire::EmbedRequest req;
  req.texts = texts;
  json body = req;
  body.erase("request_id");
  const auto resp = impl_->call<wire::EmbedResponse>(wire::kEmbedPath, body);
  if (resp.dim == 0) throw ProtocolError("embed response has dim 0");
  std::vector<textsim::EmbeddingMatrix> out;
  out.reserve(resp.matrices.size());
  for (const auto& rows : resp.matrices) {
    try {
      out.emplace_back(rows, resp.dim);
    } catch (const PreconditionError& e) {
      throw ProtocolError(std::string("invalid embedding matrix: ") + e.what());
    }
  }
  return out;
}

bool HttpBackend::do_probe(const ImageRef& image, std::string_view question) {
  wire::ProbeRequest req;
  req.image = handle_for(image);
  req.question = std::string(question);
  json body = req;
  body.erase("request_id");
  return wire::parse_answer(impl_->call<wire::ProbeResponse>(wire::kProbePath, body).answer);
}

ImageRef HttpBackend::do_reconstruct(const ImageRef& image, const ReconstructionSpec& spec,
                                     std::string_view prompt, std::uint64_t seed) {
  wire::ReconstructRequest req;
  req.image = handle_for(image);
  if (spec.kind == ReconstructionSpec::Kind::noise_to_t) {
    req.kind = "noise_to_t";
    req.t = spec.t;
  } else {
    req.kind = "mask";
    req.coverage = spec.coverage;
    req.pattern = spec.pattern;
  }
  req.prompt = std::string(prompt);
  req.seed = seed;
  json body = req;
  body.erase("request_id");
  const auto resp = impl_->call<wire::ImageResponse>(wire::kReconstructPath, body);
  return image_from(resp, config().model_id, seed);
}

}  // namespace punc::backend
