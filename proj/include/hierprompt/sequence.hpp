#pragma once

#include <cstdint>
#include <vector>

#include "hierprompt/textualize.hpp"
#include "hierprompt/vocab.hpp"

namespace hierprompt {

enum class ElementKind : std::uint8_t { kToken, kGraphSlot, kRelationSlot };

// Encoder input: discrete tokens interleaved with soft slots. For soft slots
// `ids` holds the index into `slots`; a graph slot with id -1 has been
// masked and is fed the learned mask vector instead of its soft vector.
struct MixedSequence {
  std::vector<ElementKind> kinds;
  std::vector<int> ids;
  std::vector<std::uint8_t> segments;
  std::vector<std::uint8_t> maskable;
  std::vector<PromptSlot> slots;

  std::size_t size() const { return kinds.size(); }
  std::size_t count(ElementKind kind) const;
  std::size_t maskable_count() const;
  // Positions of graph slots in order; soft vectors are supplied in this order.
  std::vector<std::size_t> graph_positions() const;
};

inline constexpr std::size_t kDefaultMaxLen = 128;

struct EncodeOptions {
  std::size_t max_len = kDefaultMaxLen;
  bool mask_graph_tokens = false;
};

// CLS + segment 0 + SEP [+ segment 1 + SEP]. When the prompt is too long,
// node-text tokens go first, then template literals; specials and soft slots
// are never dropped.
MixedSequence encode_prompt(const PromptText& prompt, const Vocab& vocab, const EncodeOptions& options = {});

// CLS + text + SEP with the text cut to fit max_len; no soft slots.
MixedSequence encode_plain(std::string_view text, const Vocab& vocab, std::size_t max_len, bool maskable);

}  // namespace hierprompt
