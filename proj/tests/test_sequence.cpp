#include <gtest/gtest.h>

#include "hierprompt/sequence.hpp"
#include "support.hpp"

using namespace hierprompt;

TEST(Tokenizer, SplitsPunctuationAndLowercases) {
  EXPECT_EQ(tokenize("Graph-Neural  nets, v2."), (std::vector<std::string>{"graph", "-", "neural", "nets", ",", "v2", "."}));
  EXPECT_EQ(tokenize("caf\xC3\xA9 ok"), (std::vector<std::string>{"caf\xC3\xA9", "ok"}));
  const auto spans = tokenize_spans("ab, c");
  ASSERT_EQ(spans.size(), 3u);
  EXPECT_EQ(spans[1].begin, 2u);
  EXPECT_EQ(spans[2].begin, 4u);
  EXPECT_EQ(spans[2].end, 5u);
}

TEST(Vocab, FrequencyThenLexicalOrder) {
  const Vocab v = build_vocab({"b a b", "c b a"});
  ASSERT_EQ(v.size(), Vocab::kNumSpecial + 3u);
  EXPECT_EQ(v.token(Vocab::kNumSpecial), "b");
  EXPECT_EQ(v.token(Vocab::kNumSpecial + 1), "a");
  EXPECT_EQ(v.token(Vocab::kNumSpecial + 2), "c");
  EXPECT_EQ(v.id("zzz"), Vocab::kUnk);
}

TEST(Vocab, MinFreqAndCap) {
  const Vocab v = build_vocab({"x x y z"}, 2);
  EXPECT_TRUE(v.contains("x"));
  EXPECT_FALSE(v.contains("y"));
  EXPECT_EQ(build_vocab({"a b c d"}, 1, Vocab::kNumSpecial + 2).size(), Vocab::kNumSpecial + 2u);
}

TEST(Vocab, SaveLoadRoundTrip) {
  const Vocab v = build_vocab({"one two two three three three"});
  const auto path = testing_support::scratch_dir("vocab") / "vocab.txt";
  v.save(path);
  const Vocab w = Vocab::load(path);
  EXPECT_EQ(w.serialize(), v.serialize());
  EXPECT_EQ(w.hash(), v.hash());
}

TEST(Vocab, DecodeMarksUnknown) {
  const Vocab v = build_vocab({"hello world"});
  EXPECT_EQ(decode(encode_text("Hello there world", v), v), "hello \xE2\x9F\xA8unk\xE2\x9F\xA9 world");
}

namespace {

PromptText two_part_prompt() {
  PromptText u{"alpha beta " + graph_marker("PAP"), {{SlotKind::kGraph, 0, "PAP", 0}}, std::string::npos, {{0, 10}}};
  PromptText v{"gamma delta", {}, std::string::npos, {{0, 11}}};
  Schema s = testing_support::dblp_schema();
  return relation_aware_prompt(u, 0, v, s);
}

Vocab prompt_vocab() { return build_vocab({"alpha beta gamma delta"}); }

}  // namespace

TEST(Sequence, LayoutAndSegments) {
  const auto seq = encode_prompt(two_part_prompt(), prompt_vocab());
  // CLS alpha beta GT RT SEP gamma delta SEP
  ASSERT_EQ(seq.size(), 9u);
  EXPECT_EQ(seq.ids[0], Vocab::kCls);
  EXPECT_EQ(seq.kinds[3], ElementKind::kGraphSlot);
  EXPECT_EQ(seq.kinds[4], ElementKind::kRelationSlot);
  EXPECT_EQ(seq.ids[5], Vocab::kSep);
  EXPECT_EQ(seq.ids[8], Vocab::kSep);
  EXPECT_EQ(seq.segments, (std::vector<std::uint8_t>{0, 0, 0, 0, 0, 0, 1, 1, 1}));
  EXPECT_EQ(seq.maskable, (std::vector<std::uint8_t>{0, 1, 1, 0, 0, 0, 1, 1, 0}));
  EXPECT_EQ(seq.graph_positions(), (std::vector<std::size_t>{3}));
  EXPECT_EQ(seq.maskable_count(), 4u);

  EncodeOptions opt;
  opt.mask_graph_tokens = true;
  EXPECT_EQ(encode_prompt(two_part_prompt(), prompt_vocab(), opt).maskable[3], 1);
}

TEST(Sequence, TruncatesNodeTextFirstAndKeepsSlots) {
  PromptText p{"The paper: one two three four five six " + graph_marker("PAP"), {{SlotKind::kGraph, 0, "PAP", 0}},
               std::string::npos, {{11, 38}}};
  const Vocab v = build_vocab({p.text});
  EncodeOptions opt;
  opt.max_len = 7;
  const auto seq = encode_prompt(p, v, opt);
  ASSERT_EQ(seq.size(), 7u);
  // "the paper :" are literals and survive; node text goes down to "one"
  EXPECT_EQ(decode({seq.ids.begin() + 1, seq.ids.begin() + 5}, v), "the paper : one");
  EXPECT_EQ(seq.kinds[5], ElementKind::kGraphSlot);
  opt.max_len = 2;
  EXPECT_THROW(encode_prompt(p, v, opt), Error);
}

TEST(Sequence, ManifestMismatchIsAnError) {
  PromptText p{"x " + graph_marker("PAP"), {{SlotKind::kGraph, 0, "PVP", 0}}, std::string::npos, {}};
  EXPECT_THROW(encode_prompt(p, build_vocab({"x"})), Error);
  p.manifest.clear();
  EXPECT_THROW(encode_prompt(p, build_vocab({"x"})), Error);
  PromptText q{"x", {{SlotKind::kGraph, 0, "PAP", 0}}, std::string::npos, {}};
  EXPECT_THROW(encode_prompt(q, build_vocab({"x"})), Error);
}

TEST(Sequence, PlainEncoding) {
  const Vocab v = build_vocab({"a b c d e"});
  const auto seq = encode_plain("a b c d e", v, 5, true);
  ASSERT_EQ(seq.size(), 5u);
  EXPECT_EQ(seq.ids.front(), Vocab::kCls);
  EXPECT_EQ(seq.ids.back(), Vocab::kSep);
  EXPECT_EQ(seq.maskable_count(), 3u);
  EXPECT_EQ(encode_plain("a", v, 8, false).maskable_count(), 0u);
  EXPECT_THROW(encode_plain("a", v, 2, true), Error);
}
