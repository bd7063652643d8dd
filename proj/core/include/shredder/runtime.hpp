#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "shredder/collector.hpp"
#include "shredder/error.hpp"
#include "shredder/network.hpp"
#include "shredder/rng.hpp"
#include "shredder/wire.hpp"

namespace shredder {

// Deterministic link model: each message costs latency + bytes / bandwidth.
struct LinkSimulator {
  double bandwidth_bytes_per_s = 0.0;
  double latency_ms = 0.0;
  bool enabled = false;

  std::chrono::nanoseconds delay_for(std::size_t bytes) const;
  // Sleeps for delay_for(bytes) when enabled; returns the delay applied.
  std::chrono::nanoseconds apply(std::size_t bytes) const;
};

struct ServerOptions {
  std::string bind_address = "127.0.0.1";
  std::uint16_t port = 0;  // 0 picks an ephemeral port
  std::size_t max_payload = wire::kMaxPayload;
  LinkSimulator link;  // applied to every reply before it is sent
};

// Cloud side: decodes activation requests, runs the cloud partition and
// answers with the argmax label and logits. Holds no per-request state and
// never sees noise parameters.
class CloudServer {
 public:
  CloudServer(Split split, ServerOptions options = {});
  ~CloudServer();
  CloudServer(const CloudServer&) = delete;
  CloudServer& operator=(const CloudServer&) = delete;

  // Binds and starts accepting on a background thread.
  void start();
  // Blocks until stop() is called from another thread.
  void wait();
  void stop();
  std::uint16_t port() const noexcept { return port_; }

  wire::Message handle(const wire::Message& request) const;

 private:
  struct Impl;

  Split split_;
  ServerOptions options_;
  std::unique_ptr<Impl> impl_;
  std::uint16_t port_ = 0;
};

class EdgeClient {
 public:
  EdgeClient(const std::string& host, std::uint16_t port, std::chrono::milliseconds timeout = std::chrono::seconds(30));
  ~EdgeClient();
  EdgeClient(const EdgeClient&) = delete;
  EdgeClient& operator=(const EdgeClient&) = delete;

  // Sends one frame and waits for the reply frame.
  wire::Message exchange(std::span<const std::uint8_t> frame);
  wire::Message exchange(const wire::Message& message);
  // Raw access for protocol tests.
  void send_bytes(std::span<const std::uint8_t> bytes);
  wire::Message receive();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct InferenceTiming {
  double edge_ms = 0.0;
  double sample_add_ms = 0.0;
  double transmit_ms = 0.0;  // simulated link delay
  double round_trip_ms = 0.0;
};

struct RemoteInference {
  std::uint32_t label = 0;
  std::vector<float> logits;
  InferenceTiming timing;
  std::vector<std::uint8_t> request_frame;  // exactly what was transmitted
  std::optional<std::size_t> entry_index;   // unset in zero-noise mode
};

struct RemoteOptions {
  bool zero_noise = false;
  LinkSimulator link;
};

class RemoteError : public Error {
 public:
  using Error::Error;
};

// Edge pipeline: run_edge, sample order-preserving noise, add, transmit,
// and return the server's label. The collection must match the split.
RemoteInference infer_remote(const Split& split, const DistributionCollection& collection, const Tensor& input,
                             EdgeClient& client, CounterRng& rng, const RemoteOptions& options = {});

}  // namespace shredder
