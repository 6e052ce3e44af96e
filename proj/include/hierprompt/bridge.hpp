#pragma once

#include <memory>
#include <string>
#include <vector>

#include "hierprompt/util.hpp"

namespace hierprompt {

struct BridgeHandshake {
  std::string model_tag;
  int dim = 0;
};

// Line-delimited JSON client for an external frozen encoder. The endpoint is
// either a shell command (spawned with stdio pipes) or tcp://host:port.
//
//   <- {"model_tag": ..., "dim": N}          once, on connect
//   -> {"id": "...", "text": "..."}          per request
//   <- {"id": "...", "vector": [...]}        per request, any order
//   <- {"id": "...", "error": "..."}         request rejected
//
// All failures raise Error(kBridge).
class BridgeClient {
 public:
  BridgeClient(const std::string& endpoint, double timeout_seconds = 60.0);
  ~BridgeClient();
  BridgeClient(const BridgeClient&) = delete;
  BridgeClient& operator=(const BridgeClient&) = delete;

  const BridgeHandshake& handshake() const { return handshake_; }
  const std::string& endpoint() const { return endpoint_; }

  // Pipelines all requests and returns the vectors in input order.
  std::vector<std::vector<float>> encode(const std::vector<std::string>& texts);

 private:
  std::string read_line();
  void close();

  std::string endpoint_;
  double timeout_;
  int read_fd_ = -1;
  int write_fd_ = -1;
  int child_pid_ = -1;
  std::string buffer_;
  BridgeHandshake handshake_;
  std::uint64_t next_id_ = 0;
};

}  // namespace hierprompt
