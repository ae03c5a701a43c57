// Copyright spanret contributors. SPDX-License-Identifier: Apache-2.0
#include "spanret/suffix_array.hpp"

#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "oracle.hpp"
#include "test_util.hpp"

using namespace spanret;

namespace {

std::vector<symbol_t> terminated(const std::string& text) {
  std::vector<symbol_t> symbols = tokenize(text);
  symbols.push_back(k_terminator);
  return symbols;
}

}  // namespace

TEST(SuffixArray, BananaFixedValues) {
  EXPECT_EQ(build_suffix_array(terminated("banana")),
            (std::vector<std::uint32_t>{6, 5, 3, 1, 0, 4, 2}));
}

TEST(SuffixArray, TerminatorOnly) {
  EXPECT_EQ(build_suffix_array(std::vector<symbol_t>{k_terminator}),
            std::vector<std::uint32_t>{0});
}

TEST(SuffixArray, MatchesNaiveSortOnRandomInputs) {
  std::mt19937 rng(4242);
  for (int round = 0; round < 60; ++round) {
    std::uniform_int_distribution<std::size_t> len_dist(1, 2000);
    const std::size_t len = len_dist(rng);
    std::string text;
    switch (round % 3) {
      case 0:
        text = testutil::random_bytes(rng, len);
        break;
      case 1:
        text = testutil::random_letters(rng, len);
        break;
      default: {  // low-entropy runs
        std::uniform_int_distribution<int> pick(0, 1);
        for (std::size_t i = 0; i < len; ++i) text.push_back(pick(rng) ? 'a' : 'b');
        break;
      }
    }
    const std::vector<symbol_t> symbols = terminated(text);
    EXPECT_EQ(build_suffix_array(symbols), oracle::naive_suffix_array(symbols))
        << "round " << round;
  }
}

TEST(SuffixArray, SequenceWithSeparators) {
  const symbol_sequence seq = concat(testutil::make_corpus({"abc", "ab"}));
  EXPECT_EQ(build_suffix_array(seq.symbols), oracle::naive_suffix_array(seq.symbols));
}

TEST(SuffixArray, RejectsMissingTerminator) {
  EXPECT_THROW(build_suffix_array(tokenize("abc")), domain_error);
  EXPECT_THROW(build_suffix_array(std::vector<symbol_t>{}), domain_error);
}

TEST(SuffixArray, RejectsInteriorTerminator) {
  EXPECT_THROW(build_suffix_array(std::vector<symbol_t>{99, k_terminator, 99, k_terminator}),
               domain_error);
}

TEST(SuffixArray, RejectsOutOfAlphabetSymbols) {
  EXPECT_THROW(build_suffix_array(std::vector<symbol_t>{300, k_terminator}), domain_error);
}
