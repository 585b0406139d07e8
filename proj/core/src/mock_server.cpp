#include "punc/mock_server.hpp"

#include <httplib.h>

#include <atomic>
#include <condition_variable>
#include <functional>
#include <map>
#include <mutex>
#include <thread>

#include "punc/errors.hpp"
#include "punc/hash.hpp"
#include "punc/wire.hpp"

namespace punc::backend {

using nlohmann::json;

struct MockServer::Impl {
  Impl(Backend& b, Options o) : backend(b), options(std::move(o)) {}

  Backend& backend;
  Options options;
  httplib::Server server;
  std::thread thread;
  std::mutex join_mutex;
  std::mutex state_mutex;
  std::condition_variable state_cv;
  bool listening = false;
  int port = 0;
  std::atomic<std::uint64_t> served{0};
  std::atomic<std::uint64_t> faults{0};

  std::mutex mutex;
  std::map<std::string, int> attempts;         // request_id -> attempts seen
  std::map<std::string, std::string> images;   // image_id -> payload

  static void reply_error(httplib::Response& res, int status, const std::string& code,
                          const std::string& message, const std::string& request_id) {
    res.status = status;
    res.set_content(wire::dump(wire::ErrorBody{code, message, request_id}), "application/json");
  }

  // True when this attempt should be failed on purpose.
  bool inject_fault(const std::string& request_id) {
    if (options.fail_first <= 0 || request_id.empty()) return false;
    std::lock_guard lock(mutex);
    if (attempts[request_id]++ < options.fail_first) {
      ++faults;
      return true;
    }
    return false;
  }

  ImageRef resolve(const wire::ImageHandle& h) {
    if (h.payload_b64) {
      return ImageRef::from_payload(base64_decode(*h.payload_b64), "client", 0);
    }
    std::lock_guard lock(mutex);
    const auto it = images.find(*h.image_id);
    if (it == images.end()) throw PreconditionError("unknown image_id " + *h.image_id);
    return ImageRef::from_payload(it->second, "client", 0);
  }

  wire::ImageResponse remember(const ImageRef& image, const std::string& request_id) {
    {
      std::lock_guard lock(mutex);
      images.emplace(image.id, image.payload);
    }
    return wire::ImageResponse{request_id, image.id, base64_encode(image.payload)};
  }

  template <typename Request>
  void route(const std::string& path, std::function<json(const Request&)> handler) {
    server.Post(path, [this, handler](const httplib::Request& req, httplib::Response& res) {
      ++served;
      std::string request_id;
      try {
        const Request parsed = wire::parse<Request>(req.body);
        request_id = parsed.request_id;
        if (inject_fault(request_id)) {
          reply_error(res, 503, "unavailable", "injected fault", request_id);
          return;
        }
        res.set_content(handler(parsed).dump(), "application/json");
      } catch (const CapabilityError& e) {
        reply_error(res, 501, "not_supported", e.what(), request_id);
      } catch (const ProtocolError& e) {
        reply_error(res, 400, "bad_request", e.what(), request_id);
      } catch (const PreconditionError& e) {
        reply_error(res, 400, "bad_request", e.what(), request_id);
      } catch (const ParseError& e) {
        reply_error(res, 400, "bad_request", e.what(), request_id);
      } catch (const std::exception& e) {
        reply_error(res, 500, "internal", e.what(), request_id);
      }
    });
  }

  void install_routes() {
    server.Post(std::string(wire::kCapabilitiesPath),
                [this](const httplib::Request&, httplib::Response& res) {
                  ++served;
                  wire::CapabilitiesResponse caps;
                  for (Capability c : backend.capabilities()) caps.ops.push_back(to_string(c));
                  res.set_content(wire::dump(caps), "application/json");
                });

    route<wire::GenerateRequest>(std::string(wire::kGeneratePath), [this](const wire::GenerateRequest& r) {
      return json(remember(backend.generate(r.prompt, r.seed), r.request_id));
    });
    route<wire::CaptionRequest>(std::string(wire::kCaptionPath), [this](const wire::CaptionRequest& r) {
      const ImageRef image = resolve(r.image);
      return json(wire::CaptionResponse{r.request_id, backend.caption(image, r.instruction, r.max_tokens)});
    });
    route<wire::EmbedRequest>(std::string(wire::kEmbedPath), [this](const wire::EmbedRequest& r) {
      const auto matrices = backend.embed(r.texts);
      wire::EmbedResponse resp;
      resp.request_id = r.request_id;
      resp.dim = matrices.empty() ? 0 : matrices.front().dim();
      for (const auto& m : matrices) resp.matrices.push_back(m.rows());
      return json(resp);
    });
    route<wire::ProbeRequest>(std::string(wire::kProbePath), [this](const wire::ProbeRequest& r) {
      const ImageRef image = resolve(r.image);
      return json(wire::ProbeResponse{r.request_id, backend.probe(image, r.question) ? "yes" : "no"});
    });
    route<wire::ReconstructRequest>(std::string(wire::kReconstructPath), [this](const wire::ReconstructRequest& r) {
      const ImageRef image = resolve(r.image);
      const ReconstructionSpec spec = r.kind == "noise_to_t"
                                          ? ReconstructionSpec::noise(*r.t)
                                          : ReconstructionSpec::mask(r.pattern.value_or(""), *r.coverage);
      return json(remember(backend.reconstruct(image, spec, r.prompt, r.seed), r.request_id));
    });
  }
};

MockServer::MockServer(Backend& backend, Options options)
    : impl_(std::make_unique<Impl>(backend, std::move(options))) {
  impl_->install_routes();
}

MockServer::~MockServer() { stop(); }

int MockServer::start(int port) {
  auto& s = impl_->server;
  if (port == 0) {
    impl_->port = s.bind_to_any_port(impl_->options.host);
  } else {
    impl_->port = s.bind_to_port(impl_->options.host, port) ? port : -1;
  }
  if (impl_->port <= 0) {
    throw ConfigError("cannot bind " + impl_->options.host + ":" + std::to_string(port));
  }
  {
    std::lock_guard lock(impl_->state_mutex);
    impl_->listening = true;
  }
  impl_->thread = std::thread([this] {
    impl_->server.listen_after_bind();
    std::lock_guard lock(impl_->state_mutex);
    impl_->listening = false;
    impl_->state_cv.notify_all();
  });
  s.wait_until_ready();
  return impl_->port;
}

// Only stop() joins; wait() may run concurrently with it.
void MockServer::wait() {
  std::unique_lock lock(impl_->state_mutex);
  impl_->state_cv.wait(lock, [this] { return !impl_->listening; });
}

void MockServer::stop() {
  impl_->server.stop();
  std::lock_guard lock(impl_->join_mutex);
  if (impl_->thread.joinable()) impl_->thread.join();
}

std::string MockServer::url() const {
  return "http://" + impl_->options.host + ":" + std::to_string(impl_->port);
}

std::uint64_t MockServer::requests_served() const { return impl_->served.load(); }

std::uint64_t MockServer::faults_injected() const { return impl_->faults.load(); }

}  // namespace punc::backend
