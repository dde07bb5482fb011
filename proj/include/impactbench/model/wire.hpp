#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "impactbench/core/error.hpp"
#include "impactbench/model/classifier.hpp"

// Line-delimited JSON inference protocol:
//   -> {"op":"hello"}                       <- {"op":"hello","shape":[C,H,W],"classes":K}
//   -> {"op":"classify","id":N,"data":[..]} <- {"op":"probs","id":N,"probs":[..]}
//                                           <- {"op":"error","id":N,"message":"..."}
namespace impactbench::model {

class RemoteError : public Error {
 public:
  using Error::Error;
};
class ConnectionError : public RemoteError {
 public:
  using RemoteError::RemoteError;
};
class TimeoutError : public RemoteError {
 public:
  using RemoteError::RemoteError;
};
// Response that is not valid protocol (bad JSON, wrong op, id mismatch, ...).
class ProtocolError : public RemoteError {
 public:
  using RemoteError::RemoteError;
};
// Well-formed response whose probability vector breaks the Prediction invariants.
class ValidationError : public RemoteError {
 public:
  using RemoteError::RemoteError;
};
// The server answered with {"op":"error"}.
class ServerError : public RemoteError {
 public:
  using RemoteError::RemoteError;
};

// Bidirectional newline-framed byte stream.
class LineChannel {
 public:
  virtual ~LineChannel() = default;
  virtual void write_line(std::string_view line) = 0;
  // Returns nullopt at end of stream; throws TimeoutError when `timeout`
  // elapses first.
  virtual std::optional<std::string> read_line(std::optional<std::chrono::milliseconds> timeout) = 0;
};

// Channel over POSIX file descriptors (socket or pipe pair). When
// `owns_fds` is false the descriptors are left open on destruction.
class FdChannel : public LineChannel {
 public:
  FdChannel(int read_fd, int write_fd, bool owns_fds = true);
  ~FdChannel() override;
  FdChannel(const FdChannel&) = delete;
  FdChannel& operator=(const FdChannel&) = delete;

  void write_line(std::string_view line) override;
  std::optional<std::string> read_line(std::optional<std::chrono::milliseconds> timeout) override;

 protected:
  void close_fds();

 private:
  int read_fd_;
  int write_fd_;
  bool owns_fds_;
  std::string buffer_;
};

std::unique_ptr<LineChannel> connect_tcp(const std::string& host, std::uint16_t port,
                                         std::chrono::milliseconds timeout);
// Launches `argv` with its stdin/stdout attached to the returned channel. The
// child is terminated when the channel is destroyed.
std::unique_ptr<LineChannel> spawn_stdio(const std::vector<std::string>& argv);

struct Endpoint {
  enum class Kind { kTcp, kStdio };
  Kind kind = Kind::kTcp;
  std::string host;
  std::uint16_t port = 0;
  std::vector<std::string> command;

  // "tcp://host:port" or "stdio:<program> [args...]" (whitespace separated).
  static Endpoint parse(const std::string& text);
  std::string to_string() const;
};

// Response line for one request line, or nullopt to stay silent.
using RequestHandler = std::function<std::optional<std::string>(std::string_view)>;

RequestHandler make_classifier_handler(const Classifier& model);

// Runs the handler over the channel until end of stream.
void serve_channel(const RequestHandler& handler, LineChannel& channel);

// Background TCP server; each connection is served on its own thread.
class TcpServer {
 public:
  TcpServer(RequestHandler handler, std::uint16_t port = 0, const std::string& host = "127.0.0.1");
  ~TcpServer();
  TcpServer(const TcpServer&) = delete;
  TcpServer& operator=(const TcpServer&) = delete;

  std::uint16_t port() const { return port_; }
  void stop();
  // Blocks until stop() is called from another thread.
  void wait();

 private:
  void accept_loop();

  RequestHandler handler_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};
  std::mutex mutex_;
  std::vector<int> connection_fds_;
  std::vector<std::thread> connection_threads_;
  std::thread accept_thread_;
};

// Classifier backed by a remote process speaking the protocol above.
class RemoteClassifier final : public Classifier {
 public:
  // Performs the hello handshake; throws on failure.
  RemoteClassifier(std::unique_ptr<LineChannel> channel, std::chrono::milliseconds timeout);

  static std::unique_ptr<RemoteClassifier> connect(const Endpoint& endpoint, std::chrono::milliseconds timeout);

  Prediction classify(const Image& x) const override;
  Shape input_shape() const override { return shape_; }
  int num_classes() const override { return classes_; }

 private:
  std::string request(const std::string& line) const;

  mutable std::mutex mutex_;
  std::unique_ptr<LineChannel> channel_;
  std::chrono::milliseconds timeout_;
  Shape shape_;
  int classes_ = 0;
  mutable std::int64_t next_id_ = 1;
  mutable bool broken_ = false;
};

}  // namespace impactbench::model
