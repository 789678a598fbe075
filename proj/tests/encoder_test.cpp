/*
 * Copyright 2026 raes authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "raes/encoder.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "raes/rng.hpp"

namespace raes {
namespace {

namespace fs = std::filesystem;

Vocabulary tiny_vocab() {
  Vocabulary v;
  v.add("the");
  v.add("cat");
  v.add("sat");
  return v;
}

TEST(Vocab, ReservedIdsAndDenseAssignment) {
  Vocabulary v = tiny_vocab();
  EXPECT_EQ(Vocabulary::kPad, 0);
  EXPECT_EQ(Vocabulary::kUnk, 1);
  EXPECT_EQ(Vocabulary::kCls, 2);
  EXPECT_EQ(v.id_of("the"), 3);
  EXPECT_EQ(v.id_of("cat"), 4);
  EXPECT_EQ(v.id_of("sat"), 5);
  EXPECT_EQ(v.size(), 6);
  EXPECT_EQ(v.id_of("dog"), Vocabulary::kUnk);
  EXPECT_EQ(v.add("the"), 3);  // re-adding is a lookup
  EXPECT_EQ(v.size(), 6);
}

TEST(Vocab, TokenOfRoundTripAndErrors) {
  Vocabulary v = tiny_vocab();
  EXPECT_EQ(v.token_of(3), "the");
  EXPECT_EQ(v.token_of(0), "<pad>");
  EXPECT_EQ(v.token_of(2), "<cls>");
  EXPECT_THROW(v.token_of(6), VocabError);
  EXPECT_THROW(v.token_of(-1), VocabError);
}

TEST(Vocab, SaveLoadLineFormat) {
  Vocabulary v = tiny_vocab();
  const fs::path p = fs::temp_directory_path() / "raes_vocab_test.txt";
  v.save(p);
  {
    std::ifstream in(p);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "the");  // line 0 = id 3
    std::getline(in, line);
    EXPECT_EQ(line, "cat");
  }
  Vocabulary loaded = Vocabulary::load(p);
  EXPECT_EQ(loaded.size(), v.size());
  EXPECT_EQ(loaded.id_of("sat"), 5);
  fs::remove(p);
}

TEST(Vocab, LoadRejectsDuplicates) {
  const fs::path p = fs::temp_directory_path() / "raes_vocab_dup.txt";
  {
    std::ofstream out(p);
    out << "a\nb\na\n";
  }
  EXPECT_THROW(Vocabulary::load(p), VocabError);
  fs::remove(p);
}

TEST(SplitTokens, LowercaseAndPunctuation) {
  EXPECT_EQ(split_tokens("The cat."), (std::vector<std::string>{"the", "cat"}));
  EXPECT_EQ(split_tokens("don't stop"),
            (std::vector<std::string>{"don", "t", "stop"}));
  EXPECT_EQ(split_tokens("a1 b2-c3"),
            (std::vector<std::string>{"a1", "b2", "c3"}));
  EXPECT_TRUE(split_tokens("  ,.!  ").empty());
}

TEST(Tokenize, ResponseGetsClsAndUnknownsMapToUnk) {
  Vocabulary v = tiny_vocab();
  const TokenSequence seq = tokenize("The cat.", v, Source::response);
  EXPECT_EQ(seq.ids, (std::vector<int>{Vocabulary::kCls, 3, 4}));
  const TokenSequence unk = tokenize("the dog", v, Source::response);
  EXPECT_EQ(unk.ids, (std::vector<int>{Vocabulary::kCls, 3, Vocabulary::kUnk}));
}

TEST(Tokenize, PromptHasNoClsAndEmptyResponseIsJustCls) {
  Vocabulary v = tiny_vocab();
  EXPECT_EQ(tokenize("the cat", v, Source::prompt).ids,
            (std::vector<int>{3, 4}));
  EXPECT_EQ(tokenize("", v, Source::response).ids,
            (std::vector<int>{Vocabulary::kCls}));
  EXPECT_TRUE(tokenize("", v, Source::prompt).ids.empty());
}

TEST(Tokenize, IdempotentOnLowercasedText) {
  Vocabulary v = tiny_vocab();
  EXPECT_EQ(tokenize("The CAT sat", v, Source::response).ids,
            tokenize("the cat sat", v, Source::response).ids);
}

TEST(Windows, ChunkingAndPadding) {
  TokenSequence seq;
  for (int i = 0; i < 130; ++i) seq.ids.push_back(3);
  const WindowStack stack = segment_windows(seq, 64);
  ASSERT_EQ(stack.n_windows(), 3u);
  int pads = 0;
  for (int id : stack.windows[2]) {
    if (id == Vocabulary::kPad) ++pads;
  }
  EXPECT_EQ(pads, 62);
}

TEST(Windows, ExactFitHasNoPadding) {
  TokenSequence seq;
  for (int i = 0; i < 64; ++i) seq.ids.push_back(4);
  const WindowStack stack = segment_windows(seq, 64);
  ASSERT_EQ(stack.n_windows(), 1u);
  for (int id : stack.windows[0]) EXPECT_NE(id, Vocabulary::kPad);
}

TEST(Windows, SingleTokenMostlyPad) {
  TokenSequence seq;
  seq.ids = {5};
  const WindowStack stack = segment_windows(seq, 8);
  ASSERT_EQ(stack.n_windows(), 1u);
  EXPECT_EQ(stack.windows[0][0], 5);
  for (std::size_t i = 1; i < 8; ++i) {
    EXPECT_EQ(stack.windows[0][i], Vocabulary::kPad);
  }
}

TEST(Windows, TooShortWindowRejected) {
  TokenSequence seq;
  seq.ids = {3};
  EXPECT_THROW(segment_windows(seq, 1), ConfigError);
}

TEST(Windows, RoundTripDroppingPad) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    TokenSequence seq;
    const int len = rng.range(1, 100);
    for (int i = 0; i < len; ++i) {
      seq.ids.push_back(rng.range(3, 20));  // nonzero ids only
    }
    const WindowStack stack = segment_windows(seq, rng.range(2, 17));
    std::vector<int> restored;
    for (int id : collapse_ids(stack)) {
      if (id != Vocabulary::kPad) restored.push_back(id);
    }
    EXPECT_EQ(restored, seq.ids);
  }
}

Matrix counting_table(int rows, int d) {
  Matrix m(static_cast<std::size_t>(rows), static_cast<std::size_t>(d));
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      m(r, c) = static_cast<double>(r) * 100 + static_cast<double>(c);
    }
  }
  return m;
}

TEST(Encode, LookupMapsIdsToRows) {
  const Matrix table = counting_table(6, 3);
  LookupProvider provider(table);
  TokenSequence seq;
  seq.ids = {2, 3, 3, 5};
  const WindowStack stack = segment_windows(seq, 4);
  const auto embedded = encode(stack, provider);
  ASSERT_EQ(embedded.size(), 1u);
  EXPECT_DOUBLE_EQ(embedded[0](0, 0), 200.0);
  EXPECT_DOUBLE_EQ(embedded[0](1, 2), 302.0);
  // same token, same vector
  for (std::size_t c = 0; c < 3; ++c) {
    EXPECT_DOUBLE_EQ(embedded[0](1, c), embedded[0](2, c));
  }
}

TEST(Encode, PadUsesPadRow) {
  const Matrix table = counting_table(6, 3);
  LookupProvider provider(table);
  TokenSequence seq;
  seq.ids = {3};
  const auto embedded = encode(segment_windows(seq, 4), provider);
  EXPECT_DOUBLE_EQ(embedded[0](1, 0), 0.0);  // PAD row is row 0 of the table
  EXPECT_DOUBLE_EQ(embedded[0](3, 1), 1.0);
}

TEST(Encode, OutOfRangeIdThrows) {
  const Matrix table = counting_table(4, 3);
  LookupProvider provider(table);
  TokenSequence seq;
  seq.ids = {5};
  EXPECT_THROW(encode(segment_windows(seq, 2), provider), VocabError);
}

class DoublingProvider : public EmbeddingProvider {
 public:
  Matrix embed_window(std::span<const int> ids) override {
    Matrix m(ids.size(), 2);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      m(i, 0) = 2.0 * ids[i];
      m(i, 1) = -1.0 * ids[i];
    }
    return m;
  }
  int embed_dim() const override { return 2; }
};

TEST(Encode, ExternalAdapterHonorsShapeContract) {
  DoublingProvider provider;
  TokenSequence seq;
  seq.ids = {3, 4, 5};
  const auto embedded = encode(segment_windows(seq, 3), provider);
  ASSERT_EQ(embedded.size(), 1u);
  EXPECT_DOUBLE_EQ(embedded[0](0, 0), 6.0);
  EXPECT_DOUBLE_EQ(embedded[0](2, 1), -5.0);
}

class MisshapenProvider : public EmbeddingProvider {
 public:
  Matrix embed_window(std::span<const int> ids) override {
    return Matrix(ids.size() + 1, 2);
  }
  int embed_dim() const override { return 2; }
};

TEST(Encode, MisshapenProviderRejected) {
  MisshapenProvider provider;
  TokenSequence seq;
  seq.ids = {3, 4};
  EXPECT_THROW(encode(segment_windows(seq, 2), provider), ShapeError);
}

TEST(Collapse, SingleWindowUnchanged) {
  std::vector<Matrix> stack;
  stack.push_back(counting_table(4, 2));
  const Matrix out = collapse_segments(stack);
  EXPECT_EQ(out.rows(), 4u);
  EXPECT_DOUBLE_EQ(out(3, 1), 301.0);
}

TEST(Collapse, TwoWindowsPreserveOrder) {
  std::vector<Matrix> stack;
  Matrix a(3, 2), b(3, 2);
  for (std::size_t i = 0; i < 3; ++i) {
    a(i, 0) = static_cast<double>(i);
    b(i, 0) = static_cast<double>(i + 3);
  }
  stack.push_back(a);
  stack.push_back(b);
  const Matrix out = collapse_segments(stack);
  ASSERT_EQ(out.rows(), 6u);
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_DOUBLE_EQ(out(i, 0), static_cast<double>(i));
  }
}

TEST(Collapse, ClsStaysAtRowZero) {
  const Matrix table = counting_table(8, 2);
  LookupProvider provider(table);
  Vocabulary v = tiny_vocab();
  const TokenSequence seq = tokenize("the cat sat the cat", v, Source::response);
  const WindowStack stack = segment_windows(seq, 3);
  const Matrix collapsed = collapse_segments(encode(stack, provider));
  EXPECT_DOUBLE_EQ(collapsed(0, 0), table(Vocabulary::kCls, 0));
  EXPECT_EQ(collapsed.rows(), 6u);
}

TEST(Collapse, MixedWidthsRejected) {
  std::vector<Matrix> stack;
  stack.push_back(Matrix(2, 2));
  stack.push_back(Matrix(2, 3));
  EXPECT_THROW(collapse_segments(stack), ShapeError);
  EXPECT_THROW(collapse_segments({}), ShapeError);
}

TEST(PadMaskFlags, AlignWithCollapseOrder) {
  TokenSequence seq;
  seq.ids = {2, 3, 4, 5, 3};
  const WindowStack stack = segment_windows(seq, 3);
  const std::vector<bool> mask = pad_mask(stack);
  ASSERT_EQ(mask.size(), 6u);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_FALSE(mask[i]);
  EXPECT_TRUE(mask[5]);
}

}  // namespace
}  // namespace raes
