#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "punc/backend.hpp"

namespace punc::backend {

/// Serves any Backend over the wire protocol. Used by `mock-serve` and by the
/// loopback integration tests.
class MockServer {
 public:
  struct Options {
    std::string host = "127.0.0.1";
    /// Fault injection: answer 503 to the first k attempts of every request_id.
    int fail_first = 0;
  };

  MockServer(Backend& backend, Options options);
  ~MockServer();
  MockServer(const MockServer&) = delete;
  MockServer& operator=(const MockServer&) = delete;

  /// Binds and starts serving on a background thread. Port 0 picks a free port.
  /// Returns the bound port; throws ConfigError when binding fails.
  int start(int port = 0);

  /// Blocks until stop() is called from another thread or a signal handler.
  void wait();

  void stop();

  std::string url() const;
  std::uint64_t requests_served() const;
  std::uint64_t faults_injected() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace punc::backend
