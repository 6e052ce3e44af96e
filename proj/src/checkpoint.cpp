#include <cstring>
#include <fstream>

#include "hierprompt/encoder.hpp"

namespace hierprompt {

namespace {

constexpr char kMagic[8] = {'H', 'P', 'L', 'C', 'K', 'P', 'T', '1'};

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(std::string_view in, std::size_t& pos) {
  if (pos + 8 > in.size()) throw_data("checkpoint truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  pos += 8;
  return v;
}

void put_string(std::string& out, std::string_view s) {
  put_u64(out, s.size());
  out.append(s);
}

std::string get_string(std::string_view in, std::size_t& pos) {
  const auto n = get_u64(in, pos);
  if (pos + n > in.size()) throw_data("checkpoint truncated");
  std::string s(in.substr(pos, n));
  pos += n;
  return s;
}

}  // namespace

// Layout: magic, config JSON, tensor count, then (name, rows, cols, doubles)
// per tensor. Integers and doubles are little-endian.
std::string serialize_params(const EncoderParams& params) {
  std::string out(kMagic, sizeof(kMagic));
  put_string(out, params.config.to_json().dump());
  std::size_t count = 0;
  params.for_each([&](const std::string&, const Matrix&) { ++count; });
  put_u64(out, count);
  params.for_each([&](const std::string& name, const Matrix& m) {
    put_string(out, name);
    put_u64(out, static_cast<std::uint64_t>(m.rows()));
    put_u64(out, static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      std::uint64_t bits;
      std::memcpy(&bits, m.data() + i, sizeof(bits));
      put_u64(out, bits);
    }
  });
  return out;
}

void save_checkpoint(const EncoderParams& params, const std::filesystem::path& path) {
  write_text_file(path, serialize_params(params));
}

EncoderParams load_checkpoint(const std::filesystem::path& path) {
  const std::string raw = read_text_file(path);
  const std::string_view in(raw);
  if (in.size() < sizeof(kMagic) || in.substr(0, sizeof(kMagic)) != std::string_view(kMagic, sizeof(kMagic)))
    throw_data(path.string() + ": not a checkpoint file");
  std::size_t pos = sizeof(kMagic);
  json cfg_json;
  try {
    cfg_json = json::parse(get_string(in, pos));
  } catch (const json::exception& e) {
    throw_data(path.string() + ": bad checkpoint header: " + e.what());
  }
  const auto config = EncoderConfig::from_json(cfg_json);
  EncoderParams params = init_params(config, 0);
  const auto count = get_u64(in, pos);
  std::size_t expected = 0;
  params.for_each([&](const std::string&, const Matrix&) { ++expected; });
  if (count != expected) throw_data(path.string() + ": tensor count mismatch");
  params.for_each([&](const std::string& name, Matrix& m) {
    const auto got = get_string(in, pos);
    if (got != name) throw_data(path.string() + ": expected tensor " + name + ", found " + got);
    const auto rows = get_u64(in, pos);
    const auto cols = get_u64(in, pos);
    if (rows != static_cast<std::uint64_t>(m.rows()) || cols != static_cast<std::uint64_t>(m.cols()))
      throw_data(path.string() + ": shape mismatch for " + name);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      const auto bits = get_u64(in, pos);
      std::memcpy(m.data() + i, &bits, sizeof(bits));
    }
  });
  if (pos != in.size()) throw_data(path.string() + ": trailing bytes after last tensor");
  return params;
}

}  // namespace hierprompt
