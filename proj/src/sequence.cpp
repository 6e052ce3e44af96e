#include "hierprompt/sequence.hpp"

#include <algorithm>

#include "hierprompt/util.hpp"

namespace hierprompt {

std::size_t MixedSequence::count(ElementKind kind) const {
  return static_cast<std::size_t>(std::count(kinds.begin(), kinds.end(), kind));
}

std::size_t MixedSequence::maskable_count() const {
  return static_cast<std::size_t>(std::count(maskable.begin(), maskable.end(), std::uint8_t{1}));
}

std::vector<std::size_t> MixedSequence::graph_positions() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < kinds.size(); ++i)
    if (kinds[i] == ElementKind::kGraphSlot) out.push_back(i);
  return out;
}

namespace {

constexpr std::string_view kOpen = "\xE2\x9F\xA8";
constexpr std::string_view kClose = "\xE2\x9F\xA9";

enum class Droppable : std::uint8_t { kNever, kNodeText, kLiteral };

struct Piece {
  ElementKind kind;
  int id;
  Droppable drop;
  std::uint8_t segment;
};

}  // namespace

MixedSequence encode_prompt(const PromptText& prompt, const Vocab& vocab, const EncodeOptions& options) {
  const std::string& text = prompt.text;
  std::vector<Piece> pieces;
  std::size_t slot_index = 0;

  auto in_node_text = [&](std::size_t pos) {
    for (auto [b, e] : prompt.node_text_spans)
      if (pos >= b && pos < e) return true;
    return false;
  };
  auto segment_of = [&](std::size_t pos) -> std::uint8_t { return pos >= prompt.split ? 1 : 0; };
  auto emit_text = [&](std::size_t begin, std::size_t end) {
    for (const auto& t : tokenize_spans(std::string_view(text).substr(begin, end - begin))) {
      const std::size_t pos = begin + t.begin;
      pieces.push_back({ElementKind::kToken, vocab.id(t.token), in_node_text(pos) ? Droppable::kNodeText : Droppable::kLiteral,
                        segment_of(pos)});
    }
  };

  std::size_t cursor = 0;
  while (cursor < text.size()) {
    auto open = text.find(kOpen, cursor);
    if (open == std::string::npos) {
      emit_text(cursor, text.size());
      break;
    }
    emit_text(cursor, open);
    auto close = text.find(kClose, open);
    if (close == std::string::npos) throw_data("unterminated slot marker in prompt");
    std::string_view body(text.data() + open + kOpen.size(), close - open - kOpen.size());
    if (body.size() < 3 || body[2] != ':') throw_data("malformed slot marker in prompt");
    const auto tag = body.substr(0, 2);
    const auto name = body.substr(3);
    if (slot_index >= prompt.manifest.size()) throw_data("prompt has more slot markers than manifest entries");
    const auto& slot = prompt.manifest[slot_index];
    const bool kind_ok = (tag == "GT" && slot.kind == SlotKind::kGraph) || (tag == "RT" && slot.kind == SlotKind::kRelation);
    if (!kind_ok || slot.name != name)
      throw_data("slot marker '" + std::string(body) + "' does not match manifest entry " + std::to_string(slot_index));
    pieces.push_back({tag == "GT" ? ElementKind::kGraphSlot : ElementKind::kRelationSlot, static_cast<int>(slot_index),
                      Droppable::kNever, segment_of(open)});
    ++slot_index;
    cursor = close + kClose.size();
  }
  if (slot_index != prompt.manifest.size()) throw_data("manifest lists more slots than the prompt contains");

  const bool two_segments = prompt.split != std::string::npos;
  const std::size_t specials = two_segments ? 3 : 2;
  auto overflow = [&] { return pieces.size() + specials > options.max_len; };

  // Drop from the tail of whichever segment currently holds more droppable
  // tokens of the given class.
  for (auto cls : {Droppable::kNodeText, Droppable::kLiteral}) {
    while (overflow()) {
      std::size_t count[2] = {0, 0};
      for (const auto& p : pieces)
        if (p.drop == cls) ++count[p.segment];
      if (count[0] + count[1] == 0) break;
      const std::uint8_t seg = count[1] > count[0] ? 1 : 0;
      for (std::size_t i = pieces.size(); i-- > 0;) {
        if (pieces[i].drop == cls && pieces[i].segment == seg) {
          pieces.erase(pieces.begin() + static_cast<std::ptrdiff_t>(i));
          break;
        }
      }
    }
  }
  if (overflow())
    throw_data("prompt needs " + std::to_string(pieces.size() + specials) + " positions for slots and specials; max_len is " +
               std::to_string(options.max_len));

  MixedSequence seq;
  seq.slots = prompt.manifest;
  auto push = [&](ElementKind kind, int id, std::uint8_t segment, bool maskable) {
    seq.kinds.push_back(kind);
    seq.ids.push_back(id);
    seq.segments.push_back(segment);
    seq.maskable.push_back(maskable ? 1 : 0);
  };
  push(ElementKind::kToken, Vocab::kCls, 0, false);
  std::uint8_t current = 0;
  for (const auto& p : pieces) {
    if (p.segment != current) {
      push(ElementKind::kToken, Vocab::kSep, current, false);
      current = p.segment;
    }
    const bool maskable = (p.kind == ElementKind::kToken && !Vocab::is_special(p.id)) ||
                          (p.kind == ElementKind::kGraphSlot && options.mask_graph_tokens);
    push(p.kind, p.id, p.segment, maskable);
  }
  if (two_segments && current == 0) push(ElementKind::kToken, Vocab::kSep, 0, false);
  push(ElementKind::kToken, Vocab::kSep, two_segments ? 1 : 0, false);
  return seq;
}

MixedSequence encode_plain(std::string_view text, const Vocab& vocab, std::size_t max_len, bool maskable) {
  if (max_len < 3) throw_config("max_len must leave room for CLS, SEP and one token");
  auto ids = encode_text(text, vocab);
  if (ids.size() > max_len - 2) ids.resize(max_len - 2);
  MixedSequence seq;
  auto push = [&](int id, bool m) {
    seq.kinds.push_back(ElementKind::kToken);
    seq.ids.push_back(id);
    seq.segments.push_back(0);
    seq.maskable.push_back(m ? 1 : 0);
  };
  push(Vocab::kCls, false);
  for (int id : ids) push(id, maskable);
  push(Vocab::kSep, false);
  return seq;
}

}  // namespace hierprompt
