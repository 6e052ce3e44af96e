#include "hierprompt/vocab.hpp"

#include <algorithm>
#include <map>

#include "hierprompt/util.hpp"

namespace hierprompt {

namespace {

bool is_word_byte(unsigned char c) { return std::isalnum(c) || c == '_' || c >= 0x80; }

}  // namespace

std::vector<TokenSpan> tokenize_spans(std::string_view text) {
  std::vector<TokenSpan> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (std::isspace(c)) {
      ++i;
    } else if (is_word_byte(c)) {
      std::size_t j = i;
      std::string tok;
      while (j < text.size() && is_word_byte(static_cast<unsigned char>(text[j]))) {
        tok += static_cast<char>(std::tolower(static_cast<unsigned char>(text[j])));
        ++j;
      }
      out.push_back({std::move(tok), i, j});
      i = j;
    } else {
      out.push_back({std::string(1, static_cast<char>(c)), i, i + 1});
      ++i;
    }
  }
  return out;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  for (auto& s : tokenize_spans(text)) out.push_back(std::move(s.token));
  return out;
}

std::string normalize_text(std::string_view text) {
  std::string out;
  for (const auto& t : tokenize(text)) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

Vocab::Vocab() {
  for (const char* s : {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"}) add(s);
}

void Vocab::add(std::string token) {
  if (index_.count(token)) throw_data("duplicate vocabulary token '" + token + "'");
  index_.emplace(token, static_cast<int>(tokens_.size()));
  tokens_.push_back(std::move(token));
}

int Vocab::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocab::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size())
    throw_data("token id " + std::to_string(id) + " out of range [0, " + std::to_string(tokens_.size()) + ")");
  return tokens_[static_cast<std::size_t>(id)];
}

std::string Vocab::serialize() const {
  std::string out;
  for (std::size_t i = 0; i < tokens_.size(); ++i) out += tokens_[i] + "\t" + std::to_string(i) + "\n";
  return out;
}

void Vocab::save(const std::filesystem::path& path) const { write_text_file(path, serialize()); }

Vocab Vocab::load(const std::filesystem::path& path) {
  Vocab v;
  const std::string content = read_text_file(path);
  std::size_t lineno = 0, pos = 0;
  while (pos < content.size()) {
    auto nl = content.find('\n', pos);
    if (nl == std::string::npos) nl = content.size();
    std::string_view line(content.data() + pos, nl - pos);
    pos = nl + 1;
    ++lineno;
    auto tab = line.rfind('\t');
    if (tab == std::string_view::npos) throw_data(path.string() + ":" + std::to_string(lineno) + ": expected token<TAB>id");
    std::string tok(line.substr(0, tab));
    int id = std::stoi(std::string(line.substr(tab + 1)));
    if (id != static_cast<int>(lineno - 1))
      throw_data(path.string() + ":" + std::to_string(lineno) + ": ids must be dense and in order");
    if (id < kNumSpecial) {
      if (v.tokens_[static_cast<std::size_t>(id)] != tok)
        throw_data(path.string() + ":" + std::to_string(lineno) + ": special token mismatch");
      continue;
    }
    v.add(std::move(tok));
  }
  return v;
}

std::string Vocab::hash() const { return content_hash(serialize()); }

Vocab build_vocab(const std::vector<std::string>& corpus, std::size_t min_freq, std::size_t max_size) {
  if (corpus.empty()) throw_data("cannot build a vocabulary from an empty corpus");
  if (max_size < static_cast<std::size_t>(Vocab::kNumSpecial)) throw_config("vocabulary max_size must be >= 5");
  std::map<std::string, std::size_t> freq;
  for (const auto& text : corpus)
    for (auto& t : tokenize(text)) ++freq[t];
  std::vector<std::pair<std::string, std::size_t>> entries;
  for (auto& [tok, n] : freq)
    if (n >= min_freq) entries.emplace_back(tok, n);
  std::stable_sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocab v;
  for (auto& [tok, n] : entries) {
    if (v.size() >= max_size) break;
    v.add(tok);
  }
  return v;
}

std::vector<int> encode_text(std::string_view text, const Vocab& vocab) {
  std::vector<int> ids;
  for (const auto& t : tokenize(text)) ids.push_back(vocab.id(t));
  return ids;
}

std::string decode(const std::vector<int>& ids, const Vocab& vocab) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto& tok = vocab.token(ids[i]);
    if (i) out += ' ';
    out += ids[i] == Vocab::kUnk ? "\xE2\x9F\xA8unk\xE2\x9F\xA9" : tok;
  }
  return out;
}

}  // namespace hierprompt
