#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace hierprompt {

struct TokenSpan {
  std::string token;
  std::size_t begin = 0;
  std::size_t end = 0;
};

// Word-level tokenizer: lowercases ASCII, splits on whitespace, and emits
// every other ASCII punctuation character as its own token. Bytes >= 0x80 are
// word characters, so UTF-8 text stays intact.
std::vector<TokenSpan> tokenize_spans(std::string_view text);
std::vector<std::string> tokenize(std::string_view text);
std::string normalize_text(std::string_view text);

class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kCls = 2;
  static constexpr int kSep = 3;
  static constexpr int kMask = 4;
  static constexpr int kNumSpecial = 5;

  Vocab();

  int id(std::string_view token) const;
  const std::string& token(int id) const;
  bool contains(std::string_view token) const { return index_.count(std::string(token)) != 0; }
  std::size_t size() const { return tokens_.size(); }
  static bool is_special(int id) { return id >= 0 && id < kNumSpecial; }

  void save(const std::filesystem::path& path) const;
  static Vocab load(const std::filesystem::path& path);
  std::string serialize() const;
  std::string hash() const;

 private:
  friend Vocab build_vocab(const std::vector<std::string>&, std::size_t, std::size_t);
  void add(std::string token);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

// Tokens with frequency >= min_freq, ordered by descending frequency then
// lexicographically, capped so the vocabulary (specials included) holds at
// most max_size entries.
Vocab build_vocab(const std::vector<std::string>& corpus, std::size_t min_freq = 1, std::size_t max_size = 30000);

std::vector<int> encode_text(std::string_view text, const Vocab& vocab);
// Inverse of encode_text up to normalization; UNK renders as "⟨unk⟩".
std::string decode(const std::vector<int>& ids, const Vocab& vocab);

}  // namespace hierprompt
