#include "impactbench/model/wire.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "json.hpp"

extern char** environ;

namespace impactbench::model {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

std::string errno_text() { return std::strerror(errno); }

void ignore_sigpipe() {
  static const bool once = [] {
    ::signal(SIGPIPE, SIG_IGN);
    return true;
  }();
  (void)once;
}

}  // namespace

FdChannel::FdChannel(int read_fd, int write_fd, bool owns_fds)
    : read_fd_(read_fd), write_fd_(write_fd), owns_fds_(owns_fds) {}

FdChannel::~FdChannel() { close_fds(); }

void FdChannel::close_fds() {
  if (!owns_fds_) {
    read_fd_ = write_fd_ = -1;
    return;
  }
  if (read_fd_ >= 0) ::close(read_fd_);
  if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
  read_fd_ = write_fd_ = -1;
}

void FdChannel::write_line(std::string_view line) {
  std::string framed(line);
  framed.push_back('\n');
  std::size_t sent = 0;
  while (sent < framed.size()) {
    ssize_t n = ::send(write_fd_, framed.data() + sent, framed.size() - sent, MSG_NOSIGNAL);
    if (n < 0 && errno == ENOTSOCK) n = ::write(write_fd_, framed.data() + sent, framed.size() - sent);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw ConnectionError(fmt::format("write failed: {}", errno_text()));
    }
    sent += static_cast<std::size_t>(n);
  }
}

std::optional<std::string> FdChannel::read_line(std::optional<std::chrono::milliseconds> timeout) {
  const auto deadline = timeout ? Clock::now() + *timeout : Clock::time_point::max();
  while (true) {
    if (const auto pos = buffer_.find('\n'); pos != std::string::npos) {
      std::string line = buffer_.substr(0, pos);
      buffer_.erase(0, pos + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return line;
    }
    int wait_ms = -1;
    if (timeout) {
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
      if (left <= 0) throw TimeoutError(fmt::format("no response within {} ms", timeout->count()));
      wait_ms = static_cast<int>(left);
    }
    pollfd pfd{read_fd_, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, wait_ms);
    if (ready < 0) {
      if (errno == EINTR) continue;
      throw ConnectionError(fmt::format("poll failed: {}", errno_text()));
    }
    if (ready == 0) throw TimeoutError(fmt::format("no response within {} ms", timeout->count()));
    char chunk[4096];
    const ssize_t n = ::read(read_fd_, chunk, sizeof chunk);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw ConnectionError(fmt::format("read failed: {}", errno_text()));
    }
    if (n == 0) {
      if (buffer_.empty()) return std::nullopt;
      return std::exchange(buffer_, std::string());
    }
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

namespace {

class ChildProcessChannel final : public FdChannel {
 public:
  ChildProcessChannel(int read_fd, int write_fd, pid_t pid) : FdChannel(read_fd, write_fd), pid_(pid) {}

  ~ChildProcessChannel() override {
    close_fds();  // child sees EOF on stdin and should exit
    for (int i = 0; i < 200; ++i) {
      if (::waitpid(pid_, nullptr, WNOHANG) == pid_) return;
      ::usleep(10'000);
    }
    ::kill(pid_, SIGKILL);
    ::waitpid(pid_, nullptr, 0);
  }

 private:
  pid_t pid_;
};

}  // namespace

std::unique_ptr<LineChannel> connect_tcp(const std::string& host, std::uint16_t port,
                                         std::chrono::milliseconds timeout) {
  ignore_sigpipe();
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* found = nullptr;
  const std::string service = std::to_string(port);
  if (const int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &found); rc != 0) {
    throw ConnectionError(fmt::format("cannot resolve {}: {}", host, ::gai_strerror(rc)));
  }
  std::unique_ptr<addrinfo, decltype(&::freeaddrinfo)> guard(found, &::freeaddrinfo);

  std::string last_error = "no addresses";
  for (addrinfo* ai = found; ai != nullptr; ai = ai->ai_next) {
    const int fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
    if (fd < 0) {
      last_error = errno_text();
      continue;
    }
    const int flags = ::fcntl(fd, F_GETFL, 0);
    ::fcntl(fd, F_SETFL, flags | O_NONBLOCK);
    int rc = ::connect(fd, ai->ai_addr, ai->ai_addrlen);
    if (rc < 0 && errno == EINPROGRESS) {
      pollfd pfd{fd, POLLOUT, 0};
      rc = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
      if (rc == 0) {
        ::close(fd);
        throw TimeoutError(fmt::format("connect to {}:{} timed out", host, port));
      }
      int err = 0;
      socklen_t len = sizeof err;
      ::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len);
      rc = err == 0 ? 0 : -1;
      errno = err;
    }
    if (rc < 0) {
      last_error = errno_text();
      ::close(fd);
      continue;
    }
    ::fcntl(fd, F_SETFL, flags);
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    return std::make_unique<FdChannel>(fd, fd);
  }
  throw ConnectionError(fmt::format("cannot connect to {}:{}: {}", host, port, last_error));
}

std::unique_ptr<LineChannel> spawn_stdio(const std::vector<std::string>& argv) {
  if (argv.empty()) throw ConnectionError("empty command for stdio endpoint");
  ignore_sigpipe();
  int to_child[2];
  int from_child[2];
  if (::pipe2(to_child, O_CLOEXEC) != 0) throw ConnectionError(fmt::format("pipe failed: {}", errno_text()));
  if (::pipe2(from_child, O_CLOEXEC) != 0) {
    ::close(to_child[0]);
    ::close(to_child[1]);
    throw ConnectionError(fmt::format("pipe failed: {}", errno_text()));
  }

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, to_child[0], STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&actions, from_child[1], STDOUT_FILENO);

  std::vector<char*> args;
  for (const std::string& a : argv) args.push_back(const_cast<char*>(a.c_str()));
  args.push_back(nullptr);

  pid_t pid = 0;
  const int rc = ::posix_spawnp(&pid, args[0], &actions, nullptr, args.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  ::close(to_child[0]);
  ::close(from_child[1]);
  if (rc != 0) {
    ::close(to_child[1]);
    ::close(from_child[0]);
    throw ConnectionError(fmt::format("cannot launch '{}': {}", argv[0], std::strerror(rc)));
  }
  return std::make_unique<ChildProcessChannel>(from_child[0], to_child[1], pid);
}

Endpoint Endpoint::parse(const std::string& text) {
  Endpoint ep;
  if (text.rfind("tcp://", 0) == 0) {
    const std::string rest = text.substr(6);
    const auto colon = rest.rfind(':');
    if (colon == std::string::npos || colon == 0) throw ConfigError(fmt::format("endpoint '{}' lacks host:port", text));
    ep.kind = Kind::kTcp;
    ep.host = rest.substr(0, colon);
    int port = 0;
    try {
      port = std::stoi(rest.substr(colon + 1));
    } catch (const std::exception&) {
      throw ConfigError(fmt::format("endpoint '{}' has an invalid port", text));
    }
    if (port <= 0 || port > 65535) throw ConfigError(fmt::format("endpoint '{}' has an invalid port", text));
    ep.port = static_cast<std::uint16_t>(port);
    return ep;
  }
  if (text.rfind("stdio:", 0) == 0) {
    ep.kind = Kind::kStdio;
    std::istringstream words(text.substr(6));
    for (std::string w; words >> w;) ep.command.push_back(w);
    if (ep.command.empty()) throw ConfigError(fmt::format("endpoint '{}' has no command", text));
    return ep;
  }
  throw ConfigError(fmt::format("endpoint '{}' must start with tcp:// or stdio:", text));
}

std::string Endpoint::to_string() const {
  if (kind == Kind::kTcp) return fmt::format("tcp://{}:{}", host, port);
  return fmt::format("stdio:{}", fmt::join(command, " "));
}

RequestHandler make_classifier_handler(const Classifier& model) {
  return [&model](std::string_view line) -> std::optional<std::string> {
    json id = -1;
    try {
      const json request = json::parse(line);
      if (request.contains("id")) id = request.at("id");
      const std::string op = request.at("op").get<std::string>();
      if (op == "hello") {
        const Shape s = model.input_shape();
        return json{{"op", "hello"}, {"shape", {s.channels, s.height, s.width}}, {"classes", model.num_classes()}}
            .dump();
      }
      if (op == "classify") {
        if (!id.is_number_integer()) throw ProtocolError("classify request needs an integer id");
        auto data = request.at("data").get<std::vector<double>>();
        const Image x = Image::create(model.input_shape(), std::move(data));
        const Prediction p = model.classify(x);
        return json{{"op", "probs"}, {"id", id}, {"probs", std::vector<double>(p.probs().begin(), p.probs().end())}}
            .dump();
      }
      throw ProtocolError(fmt::format("unknown op '{}'", op));
    } catch (const std::exception& e) {
      return json{{"op", "error"}, {"id", id.is_number_integer() ? id : json(-1)}, {"message", e.what()}}.dump();
    }
  };
}

void serve_channel(const RequestHandler& handler, LineChannel& channel) {
  while (auto line = channel.read_line(std::nullopt)) {
    if (line->empty()) continue;
    if (auto response = handler(*line)) channel.write_line(*response);
  }
}

TcpServer::TcpServer(RequestHandler handler, std::uint16_t port, const std::string& host)
    : handler_(std::move(handler)) {
  ignore_sigpipe();
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (listen_fd_ < 0) throw ConnectionError(fmt::format("socket failed: {}", errno_text()));
  int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    ::close(listen_fd_);
    throw ConfigError(fmt::format("cannot bind to '{}': IPv4 address expected", host));
  }
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(listen_fd_, 64) != 0) {
    const std::string err = errno_text();
    ::close(listen_fd_);
    throw ConnectionError(fmt::format("cannot listen on {}:{}: {}", host, port, err));
  }
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
  accept_thread_ = std::thread([this] { accept_loop(); });
}

TcpServer::~TcpServer() { stop(); }

void TcpServer::accept_loop() {
  while (!stopping_) {
    pollfd pfd{listen_fd_, POLLIN, 0};
    if (::poll(&pfd, 1, 50) <= 0) continue;
    const int fd = ::accept4(listen_fd_, nullptr, nullptr, SOCK_CLOEXEC);
    if (fd < 0) continue;
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    std::lock_guard lock(mutex_);
    if (stopping_) {
      ::close(fd);
      break;
    }
    connection_fds_.push_back(fd);
    connection_threads_.emplace_back([this, fd] {
      FdChannel channel(fd, fd, /*owns_fds=*/false);
      try {
        serve_channel(handler_, channel);
      } catch (const std::exception& e) {
        spdlog::debug("connection closed: {}", e.what());
      }
    });
  }
}

void TcpServer::stop() {
  if (stopping_.exchange(true)) return;
  if (accept_thread_.joinable()) accept_thread_.join();
  std::vector<std::thread> threads;
  {
    std::lock_guard lock(mutex_);
    for (int fd : connection_fds_) ::shutdown(fd, SHUT_RDWR);
    threads.swap(connection_threads_);
  }
  for (std::thread& t : threads) t.join();
  for (int fd : connection_fds_) ::close(fd);
  connection_fds_.clear();
  ::close(listen_fd_);
  listen_fd_ = -1;
}

void TcpServer::wait() {
  while (!stopping_) std::this_thread::sleep_for(std::chrono::milliseconds(100));
}

RemoteClassifier::RemoteClassifier(std::unique_ptr<LineChannel> channel, std::chrono::milliseconds timeout)
    : channel_(std::move(channel)), timeout_(timeout) {
  const std::string reply = request(json{{"op", "hello"}}.dump());
  try {
    const json j = json::parse(reply);
    if (j.at("op").get<std::string>() != "hello") throw ProtocolError("handshake answered with a different op");
    const auto shape = j.at("shape").get<std::vector<int>>();
    if (shape.size() != 3) throw ProtocolError("handshake shape must have three entries");
    shape_ = Shape{shape[0], shape[1], shape[2]};
    classes_ = j.at("classes").get<int>();
    if (shape_.channels <= 0 || shape_.height <= 0 || shape_.width <= 0 || classes_ <= 0) {
      throw ProtocolError("handshake reported non-positive dimensions");
    }
  } catch (const json::exception& e) {
    throw ProtocolError(fmt::format("malformed handshake: {}", e.what()));
  }
}

std::unique_ptr<RemoteClassifier> RemoteClassifier::connect(const Endpoint& endpoint,
                                                            std::chrono::milliseconds timeout) {
  std::unique_ptr<LineChannel> channel = endpoint.kind == Endpoint::Kind::kTcp
                                             ? connect_tcp(endpoint.host, endpoint.port, timeout)
                                             : spawn_stdio(endpoint.command);
  return std::make_unique<RemoteClassifier>(std::move(channel), timeout);
}

std::string RemoteClassifier::request(const std::string& line) const {
  if (broken_) throw ConnectionError("connection is unusable after an earlier failure");
  try {
    channel_->write_line(line);
    auto reply = channel_->read_line(timeout_);
    if (!reply) throw ConnectionError("server closed the connection");
    return *reply;
  } catch (const RemoteError&) {
    // A late reply could still arrive and desynchronise ids; no retry.
    broken_ = true;
    throw;
  }
}

Prediction RemoteClassifier::classify(const Image& x) const {
  check_input(*this, x);
  std::lock_guard lock(mutex_);
  const std::int64_t id = next_id_++;
  const std::string reply =
      request(json{{"op", "classify"}, {"id", id}, {"data", std::vector<double>(x.data().begin(), x.data().end())}}
                  .dump());
  std::vector<double> probs;
  try {
    const json j = json::parse(reply);
    const std::string op = j.at("op").get<std::string>();
    if (op == "error") {
      throw ServerError(fmt::format("server error for request {}: {}", id, j.value("message", std::string())));
    }
    if (op != "probs") throw ProtocolError(fmt::format("unexpected op '{}' in response", op));
    if (j.at("id").get<std::int64_t>() != id) throw ProtocolError(fmt::format("response id does not match {}", id));
    probs = j.at("probs").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw ProtocolError(fmt::format("malformed response: {}", e.what()));
  }
  if (static_cast<int>(probs.size()) != classes_) {
    throw ProtocolError(fmt::format("response has {} probabilities, handshake promised {}", probs.size(), classes_));
  }
  try {
    return Prediction::from_probs(std::move(probs));
  } catch (const RangeError& e) {
    throw ValidationError(fmt::format("invalid probability vector: {}", e.what()));
  }
}

}  // namespace impactbench::model
