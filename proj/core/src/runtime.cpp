#include "shredder/runtime.hpp"

#include <sys/socket.h>
#include <sys/time.h>

#include <boost/asio.hpp>
#include <condition_variable>
#include <set>

#include "shredder/error.hpp"
#include "shredder/sampler.hpp"

namespace shredder {

namespace asio = boost::asio;
using asio::ip::tcp;

std::chrono::nanoseconds LinkSimulator::delay_for(std::size_t bytes) const {
  if (!enabled) return std::chrono::nanoseconds(0);
  if (!(bandwidth_bytes_per_s > 0.0) || latency_ms < 0.0) throw ConfigError("link simulator: invalid parameters");
  const double seconds = latency_ms / 1000.0 + static_cast<double>(bytes) / bandwidth_bytes_per_s;
  return std::chrono::nanoseconds(static_cast<std::int64_t>(seconds * 1e9));
}

std::chrono::nanoseconds LinkSimulator::apply(std::size_t bytes) const {
  const auto d = delay_for(bytes);
  if (d.count() > 0) std::this_thread::sleep_for(d);
  return d;
}

namespace {

void set_timeouts(tcp::socket& socket, std::chrono::milliseconds timeout) {
  timeval tv{};
  tv.tv_sec = static_cast<time_t>(timeout.count() / 1000);
  tv.tv_usec = static_cast<suseconds_t>((timeout.count() % 1000) * 1000);
  ::setsockopt(socket.native_handle(), SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
  ::setsockopt(socket.native_handle(), SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof(tv));
}

void write_all(tcp::socket& socket, std::span<const std::uint8_t> bytes) {
  asio::write(socket, asio::buffer(bytes.data(), bytes.size()));
}

}  // namespace

struct CloudServer::Impl {
  asio::io_context io;
  std::optional<tcp::acceptor> acceptor;
  std::thread accept_thread;
  std::mutex mutex;
  std::condition_variable stopped_cv;
  bool stopped = false;
  std::set<std::shared_ptr<tcp::socket>> sockets;
  std::vector<std::thread> workers;
};

CloudServer::CloudServer(Split split, ServerOptions options)
    : split_(std::move(split)), options_(std::move(options)), impl_(std::make_unique<Impl>()) {}

CloudServer::~CloudServer() { stop(); }

wire::Message CloudServer::handle(const wire::Message& request) const {
  if (request.kind != wire::Kind::activation_request) return wire::make_error("expected an activation request");
  try {
    const Tensor activation = wire::decode_activation(request.payload);
    if (activation.shape() != split_.activation_shape()) {
      return wire::make_error("activation shape " + to_string(activation.shape()) + " does not match cloud input " +
                              to_string(split_.activation_shape()));
    }
    const Tensor logits = run_cloud(split_, activation);
    wire::LabelResponse response;
    response.label = static_cast<std::uint32_t>(argmax(logits));
    response.logits.assign(logits.values().begin(), logits.values().end());
    return {wire::Kind::label_response, wire::encode_label(response)};
  } catch (const Error& e) {
    return wire::make_error(e.what());
  }
}

void CloudServer::start() {
  if (impl_->acceptor) throw Error("server already started");
  tcp::endpoint endpoint(asio::ip::make_address(options_.bind_address), options_.port);
  impl_->acceptor.emplace(impl_->io);
  impl_->acceptor->open(endpoint.protocol());
  impl_->acceptor->set_option(tcp::acceptor::reuse_address(true));
  impl_->acceptor->bind(endpoint);
  impl_->acceptor->listen();
  port_ = impl_->acceptor->local_endpoint().port();

  impl_->accept_thread = std::thread([this] {
    for (;;) {
      auto socket = std::make_shared<tcp::socket>(impl_->io);
      boost::system::error_code ec;
      impl_->acceptor->accept(*socket, ec);
      std::lock_guard lock(impl_->mutex);
      if (impl_->stopped) return;
      if (ec) continue;
      impl_->sockets.insert(socket);
      impl_->workers.emplace_back([this, socket] {
        std::array<std::uint8_t, wire::kHeaderSize> header{};
        boost::system::error_code rec;
        while (true) {
          asio::read(*socket, asio::buffer(header), rec);
          if (rec) break;
          wire::Message reply;
          bool close_after = false;
          try {
            const auto h = wire::decode_header(header, options_.max_payload);
            std::vector<std::uint8_t> payload(h.payload_length);
            asio::read(*socket, asio::buffer(payload), rec);
            if (rec) break;
            reply = handle({h.kind, std::move(payload)});
          } catch (const FormatError& e) {
            // A bad header discards its own bytes; an oversize frame cannot be
            // skipped safely, so the connection is closed after the reply.
            reply = wire::make_error(e.what());
            close_after = std::string_view(e.what()).find("exceeds cap") != std::string_view::npos;
          }
          const auto frame = wire::encode_message(reply);
          options_.link.apply(frame.size());
          write_all(*socket, frame);
          if (close_after) break;
        }
        boost::system::error_code ignored;
        socket->shutdown(tcp::socket::shutdown_both, ignored);
        socket->close(ignored);
        std::lock_guard lock(impl_->mutex);
        impl_->sockets.erase(socket);
      });
    }
  });
}

void CloudServer::wait() {
  std::unique_lock lock(impl_->mutex);
  impl_->stopped_cv.wait(lock, [this] { return impl_->stopped; });
}

void CloudServer::stop() {
  if (!impl_ || !impl_->acceptor) return;
  std::vector<std::thread> workers;
  {
    std::lock_guard lock(impl_->mutex);
    if (impl_->stopped) return;
    impl_->stopped = true;
    boost::system::error_code ignored;
    impl_->acceptor->close(ignored);
    for (const auto& s : impl_->sockets) s->shutdown(tcp::socket::shutdown_both, ignored);
  }
  impl_->stopped_cv.notify_all();
  // Wake a blocked accept() by connecting to ourselves.
  try {
    tcp::socket poke(impl_->io);
    boost::system::error_code ignored;
    poke.connect(tcp::endpoint(asio::ip::make_address(options_.bind_address == "0.0.0.0" ? "127.0.0.1"
                                                                                           : options_.bind_address),
                               port_),
                 ignored);
  } catch (...) {
  }
  if (impl_->accept_thread.joinable()) impl_->accept_thread.join();
  {
    std::lock_guard lock(impl_->mutex);
    workers.swap(impl_->workers);
  }
  for (auto& w : workers) {
    if (w.joinable()) w.join();
  }
}

struct EdgeClient::Impl {
  asio::io_context io;
  tcp::socket socket{io};
};

EdgeClient::EdgeClient(const std::string& host, std::uint16_t port, std::chrono::milliseconds timeout)
    : impl_(std::make_unique<Impl>()) {
  try {
    tcp::resolver resolver(impl_->io);
    asio::connect(impl_->socket, resolver.resolve(host, std::to_string(port)));
    set_timeouts(impl_->socket, timeout);
    impl_->socket.set_option(tcp::no_delay(true));
  } catch (const boost::system::system_error& e) {
    throw RemoteError("cannot connect to " + host + ":" + std::to_string(port) + ": " + e.what());
  }
}

EdgeClient::~EdgeClient() = default;

void EdgeClient::send_bytes(std::span<const std::uint8_t> bytes) {
  try {
    write_all(impl_->socket, bytes);
  } catch (const boost::system::system_error& e) {
    throw RemoteError(std::string("send failed: ") + e.what());
  }
}

wire::Message EdgeClient::receive() {
  try {
    std::array<std::uint8_t, wire::kHeaderSize> header{};
    asio::read(impl_->socket, asio::buffer(header));
    const auto h = wire::decode_header(header);
    std::vector<std::uint8_t> payload(h.payload_length);
    asio::read(impl_->socket, asio::buffer(payload));
    return {h.kind, std::move(payload)};
  } catch (const boost::system::system_error& e) {
    throw RemoteError(std::string("receive failed: ") + e.what());
  }
}

wire::Message EdgeClient::exchange(std::span<const std::uint8_t> frame) {
  send_bytes(frame);
  return receive();
}

wire::Message EdgeClient::exchange(const wire::Message& message) { return exchange(wire::encode_message(message)); }

RemoteInference infer_remote(const Split& split, const DistributionCollection& collection, const Tensor& input,
                             EdgeClient& client, CounterRng& rng, const RemoteOptions& options) {
  using clock = std::chrono::steady_clock;
  auto ms = [](clock::duration d) { return std::chrono::duration<double, std::milli>(d).count(); };
  if (!options.zero_noise) {
    if (collection.network_hash() != split.network().identity() || collection.cut() != split.cut()) {
      throw ConfigError("distribution collection does not match the active network and cut");
    }
  }
  RemoteInference out;
  const auto t0 = clock::now();
  const Tensor activation = run_edge(split, input);
  const auto t1 = clock::now();
  Tensor noisy;
  if (options.zero_noise) {
    noisy = activation;
  } else {
    const auto noise = sample_noise(collection, rng);
    out.entry_index = noise.entry_index;
    noisy = add_noise(activation, noise);
  }
  const auto t2 = clock::now();
  out.request_frame = wire::encode_message({wire::Kind::activation_request, wire::encode_activation(noisy)});
  out.timing.edge_ms = ms(t1 - t0);
  out.timing.sample_add_ms = ms(t2 - t1);
  out.timing.transmit_ms = ms(options.link.apply(out.request_frame.size()));
  const auto t3 = clock::now();
  const auto reply = client.exchange(out.request_frame);
  out.timing.round_trip_ms = ms(clock::now() - t3);
  if (reply.kind == wire::Kind::error) {
    throw RemoteError("server error: " + std::string(reply.payload.begin(), reply.payload.end()));
  }
  if (reply.kind != wire::Kind::label_response) throw RemoteError("unexpected reply kind");
  auto response = wire::decode_label(reply.payload);
  out.label = response.label;
  out.logits = std::move(response.logits);
  return out;
}

}  // namespace shredder
