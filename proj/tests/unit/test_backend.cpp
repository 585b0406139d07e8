#include <gtest/gtest.h>

#include <httplib.h>

#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>
#include <vector>

#include "punc/caching_backend.hpp"
#include "punc/errors.hpp"
#include "punc/hash.hpp"
#include "punc/http_backend.hpp"
#include "punc/mock_backend.hpp"
#include "punc/mock_server.hpp"
#include "punc/wire.hpp"
#include "temp_dir.hpp"
#include "wire_goldens.hpp"

using namespace punc::backend;
namespace cw = punc::conceptworld;
using nlohmann::json;

namespace {

cw::ConceptWorld small_world(double rate = 0.0) {
  cw::WorldParams p;
  p.seed = 3;
  p.aleatoric_rate = rate;
  return cw::ConceptWorld({"cat", "dog", "tree", "car", "darth_vader", "zebra"},
                          {"cat", "dog", "tree", "car", "darth_vader"}, p);
}

BackendConfig http_config(const std::string& url) {
  BackendConfig c;
  c.endpoint = url;
  c.model_id = "mock";
  c.max_retries = 3;
  c.retry_backoff_ms = 1;
  c.timeout_ms = 5000;
  return c;
}

// Minimal HTTP server driven by a handler, for client behaviour the mock server cannot script.
class ScriptedServer {
 public:
  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

  // Capability queries get every op unless `script_capabilities` hands them to the handler.
  explicit ScriptedServer(Handler h, bool script_capabilities = false) : handler_(std::move(h)) {
    server_.Post(R"(/.*)", [this, script_capabilities](const httplib::Request& req, httplib::Response& res) {
      if (!script_capabilities && req.path.ends_with("/v1/capabilities")) {
        res.set_content(R"({"ops":["caption","embed","generate","probe","reconstruct"]})", "application/json");
        return;
      }
      {
        std::lock_guard lock(mu_);
        bodies_.push_back(req.body);
        paths_.push_back(req.path);
        auth_.push_back(req.get_header_value("Authorization"));
      }
      handler_(req, res);
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~ScriptedServer() {
    server_.stop();
    thread_.join();
  }

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }
  std::vector<std::string> bodies() {
    std::lock_guard lock(mu_);
    return bodies_;
  }
  std::vector<std::string> paths() {
    std::lock_guard lock(mu_);
    return paths_;
  }
  std::vector<std::string> auth() {
    std::lock_guard lock(mu_);
    return auth_;
  }

 private:
  Handler handler_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::mutex mu_;
  std::vector<std::string> bodies_, paths_, auth_;
};

std::string caption_ok(const httplib::Request& req) {
  const auto j = json::parse(req.body);
  return json{{"caption", "a cat"}, {"request_id", j.at("request_id")}}.dump();
}

}  // namespace

TEST(Capability, NamesRoundTrip) {
  for (auto c : all_capabilities()) EXPECT_EQ(parse_capability(to_string(c)), c);
  EXPECT_EQ(all_capabilities().size(), 5u);
  EXPECT_THROW(parse_capability("teleport"), punc::ParseError);
}

TEST(BackendConfig, ValidationAndProfiles) {
  BackendConfig c;
  EXPECT_NO_THROW(c.validate());
  c.endpoint = "https://example.org";
  EXPECT_THROW(c.validate(), punc::ConfigError);
  c = {};
  c.max_in_flight = 0;
  EXPECT_THROW(c.validate(), punc::ConfigError);
  c = {};
  c.inference_steps = 0;
  EXPECT_THROW(c.validate(), punc::ConfigError);

  const auto sdxs = BackendConfig::profile("sdxs");
  EXPECT_EQ(sdxs.inference_steps, 1);
  EXPECT_FALSE(sdxs.guidance_scale.has_value());
  EXPECT_EQ(BackendConfig::profile("pixart_sigma").guidance_scale, 4.5);
  EXPECT_EQ(BackendConfig::profile("sdxl").inference_steps, 20);
  EXPECT_THROW(BackendConfig::profile("dalle"), punc::ConfigError);
}

TEST(BackendConfig, IdentityIgnoresTransportFields) {
  BackendConfig a, b;
  b.timeout_ms = 1;
  b.max_in_flight = 9;
  b.bearer_token = "x";
  EXPECT_EQ(a.identity(), b.identity());
  b.inference_steps = 3;
  EXPECT_NE(a.identity(), b.identity());
}

TEST(ImageRef, IdIsPayloadHash) {
  const auto r = ImageRef::from_payload("abc", "p", 1);
  EXPECT_EQ(r.id, punc::sha256_hex("abc"));
  EXPECT_EQ(r.id, "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(ReconstructionSpec, RangeIsHalfOpen) {
  EXPECT_NO_THROW(ReconstructionSpec::noise(1.0).validate());
  EXPECT_THROW(ReconstructionSpec::noise(0.0).validate(), punc::PreconditionError);
  EXPECT_THROW(ReconstructionSpec::mask("center", 1.5).validate(), punc::PreconditionError);
  EXPECT_EQ(ReconstructionSpec::mask("center", 0.25).strength(), 0.25);
}

TEST(TruncateCaption, CountsNormalizedTokens) {
  EXPECT_EQ(truncate_caption("a red car on a road", 3), "a red car");
  EXPECT_EQ(truncate_caption("a red car", 3), "a red car");
  EXPECT_EQ(truncate_caption("a , red car", 2), "a , red");
  EXPECT_EQ(truncate_caption("x", 0), "");
}

TEST(MockBackend, GenerateIsDeterministicAndSeeded) {
  MockBackend b({}, small_world(0.2));
  const auto a1 = b.generate("a cat and a dog", 1);
  EXPECT_EQ(a1, b.generate("a cat and a dog", 1));
  bool differs = false;
  for (std::uint64_t s = 2; s < 20 && !differs; ++s) differs = b.generate("a cat and a dog", s).id != a1.id;
  EXPECT_TRUE(differs);
  EXPECT_TRUE(cw::is_pseudo_image(a1.payload));
  EXPECT_THROW(b.generate("   ", 1), punc::PreconditionError);
}

TEST(MockBackend, CaptionNamesGeneratedConceptsAndDropsUnknown) {
  MockBackend b({}, small_world());
  const auto img = b.generate("zebra next to darth vader and a tree", 5);
  EXPECT_EQ(b.caption(img, "Describe this image."), "darth vader tree");
  EXPECT_EQ(b.caption(img, "ignored", 1), "darth");
  ImageRef bogus = ImageRef::from_payload("not an image", "x", 0);
  EXPECT_THROW(b.caption(bogus, "d"), punc::PreconditionError);
}

TEST(MockBackend, EmbedGivesUnitVectorsPerToken) {
  MockBackend b({}, small_world(), all_capabilities(), 16);
  const auto m = b.embed({"Cat dog cat", "dog"});
  ASSERT_EQ(m.size(), 2u);
  ASSERT_EQ(m[0].size(), 3u);
  EXPECT_EQ(m[0].dim(), 16u);
  EXPECT_EQ(m[0].rows()[0], m[0].rows()[2]);
  EXPECT_EQ(m[0].rows()[1], m[1].rows()[0]);
  double sq = 0.0;
  for (double x : m[0].rows()[0]) sq += x * x;
  EXPECT_NEAR(sq, 1.0, 1e-12);
  EXPECT_THROW(b.embed({}), punc::PreconditionError);
}

TEST(MockBackend, ProbeAnswersPresence) {
  MockBackend b({}, small_world());
  const auto img = b.generate("a cat under a tree", 0);
  EXPECT_TRUE(b.probe(img, "Is cat in this image? Answer yes or no."));
  EXPECT_TRUE(b.probe(img, "Is Darth Vader or a tree here?"));
  EXPECT_FALSE(b.probe(img, "Is dog in this image?"));
  EXPECT_THROW(b.probe(img, " "), punc::PreconditionError);
}

TEST(MockBackend, ReconstructionStrengthOne) {
  MockBackend b({}, small_world(0.3));
  const auto img = b.generate("cat dog tree", 4);
  const auto r1 = b.reconstruct(img, ReconstructionSpec::noise(1.0), "cat dog tree", 9);
  const auto r2 = b.reconstruct(b.generate("cat dog tree", 5), ReconstructionSpec::noise(1.0), "cat dog tree", 9);
  EXPECT_EQ(r1.payload, r2.payload);  // full re-noising forgets the input
}

TEST(MockBackend, MissingCapabilityRaises) {
  MockBackend b({}, small_world(), {Capability::generate, Capability::caption});
  const auto img = b.generate("cat", 0);
  EXPECT_THROW(b.reconstruct(img, ReconstructionSpec::noise(0.5), "cat", 0), punc::CapabilityError);
  EXPECT_THROW(b.embed({"x"}), punc::CapabilityError);
  EXPECT_THROW(b.probe(img, "cat?"), punc::CapabilityError);
}

TEST(WireGoldens, EveryFixtureRoundTripsBitExactly) {
  const auto results = goldens::check_all(PUNC_WIRE_FIXTURES);
  EXPECT_GE(results.size(), 16u);
  for (const auto& r : results) EXPECT_TRUE(r.ok) << r.name << ": " << r.detail;
}

TEST(WireGoldens, CoverEveryMessageType) {
  std::set<std::string> seen;
  for (const auto& r : goldens::check_all(PUNC_WIRE_FIXTURES)) seen.insert(r.name.substr(0, r.name.find('-')));
  for (const auto& [type, fn] : goldens::checkers()) EXPECT_TRUE(seen.count(type)) << type;
}

TEST(Wire, RejectsMalformedDocuments) {
  using namespace punc::wire;
  EXPECT_THROW(parse<GenerateRequest>("{"), punc::ProtocolError);
  EXPECT_THROW(parse<GenerateRequest>(R"({"prompt":"x"})"), punc::ProtocolError);
  EXPECT_THROW(parse<GenerateRequest>(R"({"request_id":"r","prompt":1,"seed":0,"steps":1})"), punc::ProtocolError);
  EXPECT_THROW(parse<CaptionRequest>(R"({"request_id":"r","instruction":"","max_tokens":1})"), punc::ProtocolError);
  EXPECT_THROW(parse<ReconstructRequest>(R"({"request_id":"r","image_id":"a","kind":"noise_to_t","prompt":"p","seed":0})"),
               punc::ProtocolError);
  EXPECT_THROW(parse<ReconstructRequest>(R"({"request_id":"r","image_id":"a","kind":"blur","t":0.5,"prompt":"p","seed":0})"),
               punc::ProtocolError);
  EXPECT_TRUE(parse_answer("yes"));
  EXPECT_FALSE(parse_answer("no"));
  EXPECT_THROW(parse_answer("Yes"), punc::ProtocolError);
  EXPECT_THROW(parse_answer("maybe"), punc::ProtocolError);
}

TEST(Loopback, HttpBackendMatchesInProcessMock) {
  MockBackend mock({}, small_world(0.2));
  MockServer server(mock, {});
  server.start();
  HttpBackend http(http_config(server.url()));
  EXPECT_EQ(http.capabilities(), all_capabilities());

  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const std::string prompt = "a cat, a dog and a zebra";
    const auto local = mock.generate(prompt, seed);
    const auto remote = http.generate(prompt, seed);
    EXPECT_EQ(remote.id, local.id);
    EXPECT_EQ(remote.payload, local.payload);
    EXPECT_EQ(http.caption(remote, "Describe this image."), mock.caption(local, "Describe this image."));
    EXPECT_EQ(http.probe(remote, "Is cat in this image?"), mock.probe(local, "Is cat in this image?"));
    const auto spec = ReconstructionSpec::mask("checker", 0.5);
    EXPECT_EQ(http.reconstruct(remote, spec, prompt, seed + 1).payload,
              mock.reconstruct(local, spec, prompt, seed + 1).payload);
  }
  EXPECT_EQ(http.embed({"cat dog", "tree"}), mock.embed({"cat dog", "tree"}));
  EXPECT_GT(server.requests_served(), 0u);
}

TEST(Loopback, RetriesInjectedFaults) {
  MockBackend mock({}, small_world());
  MockServer server(mock, {.host = "127.0.0.1", .fail_first = 2});
  server.start();
  HttpBackend http(http_config(server.url()));
  EXPECT_EQ(http.generate("cat", 1).payload, mock.generate("cat", 1).payload);
  EXPECT_EQ(server.faults_injected(), 2u);

  auto cfg = http_config(server.url());
  cfg.max_retries = 1;
  HttpBackend impatient(cfg);
  try {
    impatient.generate("dog", 1);
    FAIL() << "expected ServerError";
  } catch (const punc::ServerError& e) {
    EXPECT_EQ(e.status(), 503);
    EXPECT_EQ(e.code(), "unavailable");
    EXPECT_TRUE(e.request_id().starts_with("req-"));
  }
}

TEST(Loopback, WaitReturnsWhenAnotherThreadStops) {
  MockBackend mock({}, small_world());
  MockServer server(mock, {});
  server.start();
  std::atomic<bool> returned{false};
  std::thread waiter([&] {
    server.wait();
    returned = true;
  });
  std::this_thread::sleep_for(std::chrono::milliseconds(50));
  EXPECT_FALSE(returned.load());
  server.stop();
  waiter.join();
  EXPECT_TRUE(returned.load());
  server.stop();  // idempotent
}

TEST(Loopback, CapabilitiesComeFromServer) {
  MockBackend mock({}, small_world(), {Capability::generate, Capability::caption});
  MockServer server(mock, {});
  server.start();
  HttpBackend http(http_config(server.url()));
  EXPECT_EQ(http.capabilities(), (CapabilitySet{Capability::generate, Capability::caption}));
  EXPECT_THROW(http.embed({"x"}), punc::CapabilityError);
}

TEST(HttpBackend, RequestIdIsContentHashAndBodyIsCanonical) {
  ScriptedServer server([](const httplib::Request& req, httplib::Response& res) {
    res.set_content(caption_ok(req), "application/json");
  });
  auto cfg = http_config(server.url() + "/api/");
  cfg.bearer_token = "s3cret";
  HttpBackend http(cfg);
  EXPECT_EQ(http.caption(ImageRef{"img1", "", std::nullopt, "x", 0}, "Describe.", 5), "a cat");

  const auto bodies = server.bodies();
  ASSERT_EQ(bodies.size(), 1u);
  EXPECT_EQ(server.paths()[0], "/api/v1/caption");
  EXPECT_EQ(server.auth()[0], "Bearer s3cret");
  json body = json::parse(bodies[0]);
  EXPECT_EQ(body.dump(), bodies[0]);  // compact, keys sorted
  const std::string id = body.at("request_id");
  body.erase("request_id");
  EXPECT_EQ(id, "req-" + punc::sha256_hex("/v1/caption\n" + body.dump()).substr(0, 24));
  EXPECT_EQ(body, json::parse(R"({"image_id":"img1","instruction":"Describe.","max_tokens":5})"));
}

TEST(HttpBackend, RetriesKeepTheRequestId) {
  std::atomic<int> n{0};
  ScriptedServer server([&](const httplib::Request& req, httplib::Response& res) {
    if (n++ == 0) {
      res.status = 429;
      res.set_content(R"({"code":"rate_limited","message":"slow down","request_id":""})", "application/json");
      return;
    }
    res.set_content(caption_ok(req), "application/json");
  });
  HttpBackend http(http_config(server.url()));
  EXPECT_EQ(http.caption(ImageRef{"img1", "", std::nullopt, "x", 0}, "d", 5), "a cat");
  const auto bodies = server.bodies();
  ASSERT_EQ(bodies.size(), 2u);
  EXPECT_EQ(bodies[0], bodies[1]);
}

TEST(HttpBackend, ClientErrorsAreNotRetried) {
  ScriptedServer server([](const httplib::Request&, httplib::Response& res) {
    res.status = 400;
    res.set_content(R"({"code":"bad_request","message":"nope","request_id":"req-x"})", "application/json");
  });
  HttpBackend http(http_config(server.url()));
  try {
    http.caption(ImageRef{"img1", "", std::nullopt, "x", 0}, "d", 5);
    FAIL();
  } catch (const punc::ServerError& e) {
    EXPECT_EQ(e.status(), 400);
    EXPECT_EQ(e.code(), "bad_request");
    EXPECT_EQ(e.request_id(), "req-x");
  }
  EXPECT_EQ(server.bodies().size(), 1u);
}

TEST(HttpBackend, NotSupportedMapsToCapabilityError) {
  ScriptedServer server([](const httplib::Request& req, httplib::Response& res) {
    if (req.path == "/v1/capabilities") {
      res.set_content(R"({"ops":["generate","caption","embed","probe","reconstruct","future_op"]})", "application/json");
      return;
    }
    res.status = 501;
    res.set_content(R"({"code":"not_supported","message":"no","request_id":""})", "application/json");
  }, true);
  HttpBackend http(http_config(server.url()));
  EXPECT_EQ(http.capabilities(), all_capabilities());
  EXPECT_THROW(http.generate("cat", 0), punc::CapabilityError);
  EXPECT_EQ(server.bodies().size(), 2u);
}

TEST(HttpBackend, ProtocolViolations) {
  std::atomic<int> mode{0};
  ScriptedServer server([&](const httplib::Request&, httplib::Response& res) {
    switch (mode.load()) {
      case 0: res.set_content("not json", "application/json"); break;
      case 1: res.set_content(R"({"caption":"x","request_id":"req-other"})", "application/json"); break;
      case 2: res.set_content(R"({"answer":"perhaps"})", "application/json"); break;
      default: res.set_content(R"({"image_id":"wrong","payload_b64":"YWJj"})", "application/json"); break;
    }
  });
  HttpBackend http(http_config(server.url()));
  const ImageRef img{"img1", "", std::nullopt, "x", 0};
  EXPECT_THROW(http.caption(img, "d", 5), punc::ProtocolError);
  mode = 1;
  EXPECT_THROW(http.caption(img, "d", 5), punc::ProtocolError);
  mode = 2;
  EXPECT_THROW(http.probe(img, "cat?"), punc::ProtocolError);
  mode = 3;
  EXPECT_THROW(http.generate("cat", 0), punc::ProtocolError);
}

TEST(HttpBackend, TransportFailureAfterRetries) {
  int port = 0;
  {
    httplib::Server probe_port;
    port = probe_port.bind_to_any_port("127.0.0.1");
  }
  auto cfg = http_config("http://127.0.0.1:" + std::to_string(port));
  cfg.max_retries = 1;
  cfg.timeout_ms = 500;
  HttpBackend http(cfg);
  EXPECT_THROW(http.generate("cat", 0), punc::TransportError);
}

TEST(HttpBackend, RejectsNonHttpEndpoints) {
  BackendConfig c;
  c.endpoint = "https://example.org";
  EXPECT_THROW(HttpBackend{c}, punc::ConfigError);
  c.endpoint = "mock:";
  EXPECT_THROW(HttpBackend{c}, punc::ConfigError);
}

TEST(HttpBackend, BoundsRequestsInFlight) {
  std::atomic<int> current{0}, peak{0};
  ScriptedServer server([&](const httplib::Request& req, httplib::Response& res) {
    const int now = ++current;
    int p = peak.load();
    while (now > p && !peak.compare_exchange_weak(p, now)) {}
    std::this_thread::sleep_for(std::chrono::milliseconds(30));
    --current;
    res.set_content(caption_ok(req), "application/json");
  });
  auto cfg = http_config(server.url());
  cfg.max_in_flight = 2;
  HttpBackend http(cfg);
  std::vector<std::thread> threads;
  for (int i = 0; i < 8; ++i) {
    threads.emplace_back([&, i] { http.caption(ImageRef{"img" + std::to_string(i), "", std::nullopt, "x", 0}, "d", 5); });
  }
  for (auto& t : threads) t.join();
  EXPECT_LE(peak.load(), 2);
  EXPECT_GE(peak.load(), 1);
}

TEST(CachingBackend, SecondCallIsServedFromDisk) {
  testutil::TempDir dir;
  MockBackend mock({}, small_world(0.2));
  const std::uint64_t base = mock.calls();
  {
    CachingBackend cache(mock, dir.path(), "ns");
    const auto img = cache.generate("cat dog", 3);
    const auto cap = cache.caption(img, "d");
    const auto emb = cache.embed({"cat"});
    const bool yes = cache.probe(img, "cat?");
    const auto rec = cache.reconstruct(img, ReconstructionSpec::noise(0.5), "cat dog", 4);
    EXPECT_EQ(mock.calls() - base, 5u);
    EXPECT_EQ(cache.misses(), 5u);

    CachingBackend again(mock, dir.path(), "ns");
    EXPECT_EQ(again.generate("cat dog", 3), img);
    EXPECT_EQ(again.caption(img, "d"), cap);
    EXPECT_EQ(again.embed({"cat"}), emb);
    EXPECT_EQ(again.probe(img, "cat?"), yes);
    EXPECT_EQ(again.reconstruct(img, ReconstructionSpec::noise(0.5), "cat dog", 4), rec);
    EXPECT_EQ(again.hits(), 5u);
    EXPECT_EQ(mock.calls() - base, 5u);
  }
  CachingBackend other_ns(mock, dir.path(), "other");
  other_ns.generate("cat dog", 3);
  EXPECT_EQ(other_ns.misses(), 1u);
}

TEST(CachingBackend, ErrorsAreNotCached) {
  testutil::TempDir dir;
  MockBackend mock({}, small_world());
  CachingBackend cache(mock, dir.path(), "ns");
  const auto bogus = ImageRef::from_payload("junk", "x", 0);
  EXPECT_THROW(cache.caption(bogus, "d"), punc::PreconditionError);
  EXPECT_THROW(cache.caption(bogus, "d"), punc::PreconditionError);
  EXPECT_EQ(cache.hits(), 0u);
}

TEST(CachingBackend, TornEntryIsAMiss) {
  testutil::TempDir dir;
  MockBackend mock({}, small_world());
  CachingBackend cache(mock, dir.path(), "ns");
  const auto img = cache.generate("cat", 1);
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir.path())) {
    if (e.is_regular_file()) std::ofstream(e.path(), std::ios::trunc) << "{\"trunc";
  }
  EXPECT_EQ(cache.generate("cat", 1), img);
  EXPECT_EQ(cache.hits(), 0u);
  EXPECT_EQ(cache.generate("cat", 1), img);
  EXPECT_EQ(cache.hits(), 1u);
}
