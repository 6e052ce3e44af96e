#include "hierprompt/bridge.hpp"

#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstring>
#include <unordered_map>

namespace hierprompt {

namespace {

[[noreturn]] void bridge_error(const std::string& msg) { throw Error(ErrorKind::kBridge, "bridge: " + msg); }

void set_nonblocking(int fd) {
  const int flags = fcntl(fd, F_GETFL, 0);
  if (flags < 0 || fcntl(fd, F_SETFL, flags | O_NONBLOCK) < 0) bridge_error(std::string("fcntl: ") + std::strerror(errno));
}

int connect_tcp(const std::string& hostport) {
  const auto colon = hostport.rfind(':');
  if (colon == std::string::npos) bridge_error("tcp endpoint needs host:port, got '" + hostport + "'");
  const std::string host = hostport.substr(0, colon);
  const std::string port = hostport.substr(colon + 1);
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (const int rc = getaddrinfo(host.c_str(), port.c_str(), &hints, &res); rc != 0)
    bridge_error("cannot resolve " + hostport + ": " + gai_strerror(rc));
  int fd = -1;
  for (auto* p = res; p != nullptr; p = p->ai_next) {
    fd = socket(p->ai_family, p->ai_socktype, p->ai_protocol);
    if (fd < 0) continue;
    if (connect(fd, p->ai_addr, p->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  freeaddrinfo(res);
  if (fd < 0) bridge_error("cannot connect to " + hostport);
  return fd;
}

}  // namespace

BridgeClient::BridgeClient(const std::string& endpoint, double timeout_seconds)
    : endpoint_(endpoint), timeout_(timeout_seconds) {
  if (endpoint.empty()) bridge_error("empty endpoint");
  if (endpoint.rfind("tcp://", 0) == 0) {
    read_fd_ = connect_tcp(endpoint.substr(6));
    write_fd_ = dup(read_fd_);
  } else {
    int to_child[2], from_child[2];
    if (pipe(to_child) != 0 || pipe(from_child) != 0) bridge_error(std::string("pipe: ") + std::strerror(errno));
    const pid_t pid = fork();
    if (pid < 0) bridge_error(std::string("fork: ") + std::strerror(errno));
    if (pid == 0) {
      dup2(to_child[0], STDIN_FILENO);
      dup2(from_child[1], STDOUT_FILENO);
      ::close(to_child[0]);
      ::close(to_child[1]);
      ::close(from_child[0]);
      ::close(from_child[1]);
      execl("/bin/sh", "sh", "-c", endpoint.c_str(), static_cast<char*>(nullptr));
      _exit(127);
    }
    ::close(to_child[0]);
    ::close(from_child[1]);
    child_pid_ = pid;
    write_fd_ = to_child[1];
    read_fd_ = from_child[0];
  }
  signal(SIGPIPE, SIG_IGN);
  set_nonblocking(read_fd_);
  set_nonblocking(write_fd_);

  try {
    const auto line = read_line();
    json hs;
    try {
      hs = json::parse(line);
    } catch (const json::exception&) {
      bridge_error("malformed handshake: " + line);
    }
    if (!hs.is_object() || !hs.contains("dim") || !hs["dim"].is_number_integer() || hs["dim"].get<int>() <= 0)
      bridge_error("handshake must declare a positive integer dim: " + line);
    handshake_.dim = hs["dim"].get<int>();
    handshake_.model_tag = hs.value("model_tag", std::string());
  } catch (...) {
    close();
    throw;
  }
}

BridgeClient::~BridgeClient() { close(); }

void BridgeClient::close() {
  if (write_fd_ >= 0) ::close(write_fd_);
  if (read_fd_ >= 0) ::close(read_fd_);
  write_fd_ = read_fd_ = -1;
  if (child_pid_ > 0) {
    int status = 0;
    // Closing stdin asks the server to exit; reap it, forcing if it lingers.
    for (int i = 0; i < 50; ++i) {
      if (waitpid(child_pid_, &status, WNOHANG) != 0) {
        child_pid_ = -1;
        return;
      }
      usleep(10000);
    }
    kill(child_pid_, SIGKILL);
    waitpid(child_pid_, &status, 0);
    child_pid_ = -1;
  }
}

std::string BridgeClient::read_line() {
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(timeout_);
  for (;;) {
    if (const auto nl = buffer_.find('\n'); nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) bridge_error("timed out waiting for " + endpoint_);
    pollfd p{read_fd_, POLLIN, 0};
    const int rc = poll(&p, 1, static_cast<int>(left.count()));
    if (rc < 0 && errno != EINTR) bridge_error(std::string("poll: ") + std::strerror(errno));
    if (rc <= 0) continue;
    char buf[65536];
    const ssize_t n = ::read(read_fd_, buf, sizeof(buf));
    if (n == 0) bridge_error("connection closed by " + endpoint_);
    if (n < 0) {
      if (errno == EAGAIN || errno == EINTR) continue;
      bridge_error(std::string("read: ") + std::strerror(errno));
    }
    buffer_.append(buf, static_cast<std::size_t>(n));
  }
}

std::vector<std::vector<float>> BridgeClient::encode(const std::vector<std::string>& texts) {
  if (read_fd_ < 0) bridge_error("client is closed");
  std::vector<std::vector<float>> out(texts.size());
  std::unordered_map<std::string, std::size_t> pending;
  std::string outgoing;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    const std::string id = std::to_string(next_id_++);
    pending.emplace(id, i);
    json req = {{"id", id}, {"text", texts[i]}};
    outgoing += req.dump(-1, ' ', false, json::error_handler_t::replace);
    outgoing += '\n';
  }

  std::size_t sent = 0;
  const auto timeout = std::chrono::duration<double>(timeout_);
  auto deadline = std::chrono::steady_clock::now() + timeout;
  while (!pending.empty()) {
    if (const auto nl = buffer_.find('\n'); nl != std::string::npos) {
      const std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      json resp;
      try {
        resp = json::parse(line);
      } catch (const json::exception&) {
        bridge_error("malformed response: " + line.substr(0, 200));
      }
      if (!resp.is_object() || !resp.contains("id") || !resp["id"].is_string())
        bridge_error("response without id: " + line.substr(0, 200));
      const auto it = pending.find(resp["id"].get<std::string>());
      if (it == pending.end()) bridge_error("response for unknown id " + resp["id"].get<std::string>());
      const std::size_t idx = it->second;
      if (resp.contains("error"))
        bridge_error("request failed for summary " + content_hash(texts[idx]) + ": " + resp["error"].dump());
      if (!resp.contains("vector") || !resp["vector"].is_array())
        bridge_error("response without vector for summary " + content_hash(texts[idx]));
      const auto& vec = resp["vector"];
      if (static_cast<int>(vec.size()) != handshake_.dim)
        bridge_error("vector of size " + std::to_string(vec.size()) + " does not match declared dim " +
                     std::to_string(handshake_.dim));
      auto& dst = out[idx];
      dst.reserve(vec.size());
      for (const auto& x : vec) {
        if (!x.is_number()) bridge_error("non-numeric vector entry for summary " + content_hash(texts[idx]));
        const double v = x.get<double>();
        if (!std::isfinite(v)) bridge_error("non-finite vector entry for summary " + content_hash(texts[idx]));
        dst.push_back(static_cast<float>(v));
      }
      pending.erase(it);
      deadline = std::chrono::steady_clock::now() + timeout;
      continue;
    }

    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) bridge_error("timed out waiting for " + std::to_string(pending.size()) + " responses");
    pollfd fds[2] = {{read_fd_, POLLIN, 0}, {write_fd_, POLLOUT, 0}};
    const nfds_t nfds = sent < outgoing.size() ? 2 : 1;
    const int rc = poll(fds, nfds, static_cast<int>(left.count()));
    if (rc < 0 && errno != EINTR) bridge_error(std::string("poll: ") + std::strerror(errno));
    if (rc <= 0) continue;
    if (nfds == 2 && (fds[1].revents & (POLLOUT | POLLERR | POLLHUP))) {
      const ssize_t n = ::write(write_fd_, outgoing.data() + sent, outgoing.size() - sent);
      if (n < 0 && errno != EAGAIN && errno != EINTR) bridge_error(std::string("write: ") + std::strerror(errno));
      if (n > 0) sent += static_cast<std::size_t>(n);
    }
    if (fds[0].revents & (POLLIN | POLLHUP | POLLERR)) {
      char buf[65536];
      const ssize_t n = ::read(read_fd_, buf, sizeof(buf));
      if (n == 0) bridge_error("connection closed by " + endpoint_);
      if (n < 0 && errno != EAGAIN && errno != EINTR) bridge_error(std::string("read: ") + std::strerror(errno));
      if (n > 0) buffer_.append(buf, static_cast<std::size_t>(n));
    }
  }
  return out;
}

}  // namespace hierprompt
