#include "hierprompt/util.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace hierprompt {

std::string Fnv64::hex() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(state_));
  return buf;
}

std::string content_hash(std::string_view text) { return Fnv64().update(text).hex(); }

std::string file_hash(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_data("cannot open " + path.string());
  Fnv64 h;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    h.update(buf, static_cast<std::size_t>(in.gcount()));
  }
  return h.hex();
}

std::uint64_t mix_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> salts) {
  // splitmix64 finalizer over the running state
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  std::uint64_t s = mix(seed);
  for (auto salt : salts) s = mix(s ^ mix(salt));
  return s;
}

std::uint64_t mix_seed(std::uint64_t seed, std::string_view salt) {
  return mix_seed(seed, {Fnv64().update(salt).digest()});
}

void read_jsonl(const std::filesystem::path& path, const std::function<void(const json&, std::size_t)>& fn) {
  std::ifstream in(path);
  if (!in) throw_data("cannot open " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw_data(path.string() + ":" + std::to_string(lineno) + ": malformed JSON: " + e.what());
    }
    try {
      fn(record, lineno);
    } catch (const json::exception& e) {
      throw_data(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

void write_text_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw_data("cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_data("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const json& require_key(const json& obj, std::string_view key, std::string_view context) {
  if (!obj.is_object()) throw_config(std::string(context) + ": expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw_config(std::string(context) + ": missing key '" + std::string(key) + "'");
  return *it;
}

void reject_unknown_keys(const json& obj, std::initializer_list<std::string_view> allowed,
                         std::string_view context) {
  if (!obj.is_object()) throw_config(std::string(context) + ": expected an object");
  for (const auto& [k, v] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
      throw_config(std::string(context) + ": unknown key '" + k + "'");
  }
}

namespace {
std::atomic<int> g_log_level{static_cast<int>(LogLevel::kInfo)};
}

void set_log_level(LogLevel level) { g_log_level = static_cast<int>(level); }
LogLevel log_level() { return static_cast<LogLevel>(g_log_level.load()); }

void log_info(const std::string& msg) {
  if (g_log_level.load() >= static_cast<int>(LogLevel::kInfo)) std::cerr << "[info] " << msg << '\n';
}

void log_warn(const std::string& msg) {
  if (g_log_level.load() >= static_cast<int>(LogLevel::kInfo)) std::cerr << "[warn] " << msg << '\n';
}

}  // namespace hierprompt
