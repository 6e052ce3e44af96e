#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace hierprompt {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

// Error categories double as CLI exit codes.
enum class ErrorKind : int {
  kConfig = 1,
  kData = 2,
  kNumeric = 3,
  kBridge = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void throw_config(const std::string& msg) { throw Error(ErrorKind::kConfig, msg); }
[[noreturn]] inline void throw_data(const std::string& msg) { throw Error(ErrorKind::kData, msg); }

// 64-bit FNV-1a. Stable across platforms; used for content addressing.
class Fnv64 {
 public:
  Fnv64& update(std::string_view bytes) {
    for (unsigned char c : bytes) {
      state_ ^= c;
      state_ *= 0x100000001b3ULL;
    }
    return *this;
  }
  Fnv64& update(const void* data, std::size_t n) {
    return update(std::string_view(static_cast<const char*>(data), n));
  }
  template <class T>
    requires std::is_arithmetic_v<T>
  Fnv64& update_pod(T value) {
    return update(&value, sizeof(T));
  }
  std::uint64_t digest() const { return state_; }
  std::string hex() const;

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::string content_hash(std::string_view text);
std::string file_hash(const std::filesystem::path& path);

// Derives an independent stream seed from a base seed and a list of salts.
std::uint64_t mix_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> salts);
std::uint64_t mix_seed(std::uint64_t seed, std::string_view salt);

using Rng = std::mt19937_64;

// Uniform integer in [0, n). Independent of the standard library's
// distribution implementation so sampled streams are reproducible everywhere.
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return static_cast<std::size_t>(x % n);
}

inline double uniform_real(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

template <class T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform_index(rng, i)]);
}

// Line-delimited JSON helpers. The callback receives (record, 1-based line number).
void read_jsonl(const std::filesystem::path& path, const std::function<void(const json&, std::size_t)>& fn);
void write_text_file(const std::filesystem::path& path, std::string_view content);
std::string read_text_file(const std::filesystem::path& path);

// Strict object access: throws a config error naming the key and context.
const json& require_key(const json& obj, std::string_view key, std::string_view context);
void reject_unknown_keys(const json& obj, std::initializer_list<std::string_view> allowed,
                         std::string_view context);

enum class LogLevel { kQuiet = 0, kInfo = 1, kDebug = 2 };
void set_log_level(LogLevel level);
LogLevel log_level();
void log_info(const std::string& msg);
void log_warn(const std::string& msg);

}  // namespace hierprompt
