// Copyright spanret contributors. SPDX-License-Identifier: Apache-2.0
#include "spanret/decode.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "oracle.hpp"
#include "test_util.hpp"

using namespace spanret;

namespace {

fm_index reversed_index(const corpus& c, std::uint32_t sample_rate = 8) {
  return fm_index::build(concat(c), sample_rate, /*reversed=*/true);
}

std::vector<symbol_t> first_token_set(const fm_index& idx, const first_token_config& cfg) {
  return first_token_candidates(idx, first_token_filter(cfg));
}

// Shifts every raw score by a constant; next_logprobs must erase the shift.
class shifted_model : public token_model {
 public:
  shifted_model(token_model& inner, double shift) : inner_(inner), shift_(shift) {}
  std::vector<double> raw_logprobs(std::span<const symbol_t> context,
                                   std::span<const symbol_t> candidates) override {
    std::vector<double> raw = inner_.raw_logprobs(context, candidates);
    for (double& v : raw) v += shift_;
    return raw;
  }

 private:
  token_model& inner_;
  double shift_;
};

}  // namespace

TEST(FirstTokenCandidates, PolicyAllListsSymbolsPresent) {
  const auto idx = reversed_index(testutil::make_corpus({"banana"}));
  const auto got = first_token_set(idx, {first_token_policy::all, ""});
  EXPECT_EQ(got, tokenize("abn"));
}

TEST(FirstTokenCandidates, StoplistDropsDigitsAndSpace) {
  const auto idx = reversed_index(testutil::make_corpus({"2024 theft"}));
  const auto got = first_token_set(idx, {first_token_policy::stoplist, ""});
  EXPECT_EQ(got, tokenize("efht"));
}

TEST(FirstTokenCandidates, AllowlistUsesFirstBytesOfElements) {
  testutil::temp_dir tmp;
  testutil::write_file(tmp.file("allow.txt"), "theft\nfraud\n\n");
  const auto idx = reversed_index(testutil::make_corpus({"2024 theft"}));
  const auto got = first_token_set(idx, {first_token_policy::allowlist, tmp.file("allow.txt")});
  EXPECT_EQ(got, tokenize("ft"));
}

TEST(FirstTokenCandidates, MissingAllowlistIsConfigError) {
  EXPECT_THROW(first_token_filter({first_token_policy::allowlist, "/nonexistent/allow.txt"}),
               config_error);
}

TEST(ConstrainedBeamSearch, TracesAbabExample) {
  const auto idx = reversed_index(testutil::make_corpus({"abab"}));
  uniform_model model;
  decode_config cfg;
  cfg.beam_width = 1;
  cfg.max_span_len = 2;
  cfg.min_span_len = 2;
  cfg.first_token.policy = first_token_policy::all;
  const auto spans = constrained_beam_search(idx, model, {}, cfg);
  ASSERT_EQ(spans.size(), 1u);
  // step 1 ties {a, b} -> 'a'; step 2 forced 'b'; logprob = ln(1/2) + ln 1
  EXPECT_EQ(spans[0].tokens, tokenize("ab"));
  EXPECT_NEAR(spans[0].logprob, -0.693147180559945, 1e-12);
  EXPECT_NEAR(spans[0].score, -0.346573590279973, 1e-12);
  EXPECT_EQ(spans[0].rng.width(), 2u);
}

TEST(ConstrainedBeamSearch, OracleModelForcesExactSpan) {
  const auto c = testutil::make_corpus({"the red cat sat on a mat", "a blue dog ran away"});
  const auto idx = reversed_index(c);
  const auto query = tokenize("find the cat");
  testutil::scripted_model model(tokenize("red cat"), query.size());
  decode_config cfg;
  cfg.beam_width = 3;
  cfg.max_span_len = 12;
  cfg.min_span_len = 7;
  const auto spans = constrained_beam_search(idx, model, query, cfg);
  ASSERT_FALSE(spans.empty());
  EXPECT_EQ(spans[0].tokens, tokenize("red cat"));
  EXPECT_NEAR(spans[0].logprob, 0.0, 1e-12);
  EXPECT_NEAR(spans[0].score, 0.0, 1e-12);
}

TEST(ConstrainedBeamSearch, EverySpanOccursInCorpus) {
  std::mt19937 rng(11);
  for (int round = 0; round < 20; ++round) {
    std::vector<std::string> texts;
    std::uniform_int_distribution<std::size_t> n_docs(3, 8), len(30, 120);
    for (std::size_t d = n_docs(rng); d > 0; --d)
      texts.push_back(testutil::random_letters(rng, len(rng)));
    const auto c = testutil::make_corpus(texts);
    const auto idx = reversed_index(c);
    ngram_model model = train_ngram(c);

    const std::string& src = texts[round % texts.size()];
    const auto query = tokenize(src.substr(0, std::min<std::size_t>(10, src.size())));
    decode_config cfg;
    cfg.beam_width = 5;
    cfg.max_span_len = 16;
    const auto spans = constrained_beam_search(idx, model, query, cfg);
    ASSERT_FALSE(spans.empty());
    const auto plain = fm_index::build(concat(c), 8, /*reversed=*/false);
    for (const scored_span& s : spans) {
      EXPECT_GE(s.tokens.size(), cfg.min_span_len);
      EXPECT_LE(s.tokens.size(), cfg.max_span_len);
      EXPECT_LE(s.logprob, 1e-12);
      const std::string text = detokenize(s.tokens);
      EXPECT_TRUE(oracle::occurs_in_corpus(c, text)) << "ungrounded span: " << text;
      EXPECT_EQ(plain.match_pattern(s.tokens).width(), s.rng.width());
    }
  }
}

TEST(ConstrainedBeamSearch, DigitsOnlyCorpusRaisesE1) {
  const auto idx = reversed_index(testutil::make_corpus({"2024 1999", "3.14 100"}));
  uniform_model model;
  try {
    constrained_beam_search(idx, model, {}, decode_config{});
    FAIL() << "expected decode_error";
  } catch (const decode_error& e) {
    EXPECT_EQ(e.which, decode_error::code::empty_first_candidates);
  }
}

TEST(ConstrainedBeamSearch, TinyDocsRaiseE2) {
  const auto idx = reversed_index(testutil::make_corpus({"ab", "cd"}));
  uniform_model model;
  decode_config cfg;
  cfg.first_token.policy = first_token_policy::all;
  try {
    constrained_beam_search(idx, model, {}, cfg);
    FAIL() << "expected decode_error";
  } catch (const decode_error& e) {
    EXPECT_EQ(e.which, decode_error::code::all_hypotheses_died);
  }
}

TEST(ConstrainedBeamSearch, DeterministicAcrossRuns) {
  const auto c = testutil::make_corpus(
      {"the quick brown fox jumps over the lazy dog", "pack my box with five dozen jugs"});
  const auto idx = reversed_index(c);
  ngram_model model = train_ngram(c);
  const auto query = tokenize("quick");
  const auto a = constrained_beam_search(idx, model, query, decode_config{});
  const auto b = constrained_beam_search(idx, model, query, decode_config{});
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].tokens, b[i].tokens);
    EXPECT_EQ(a[i].logprob, b[i].logprob);
    EXPECT_EQ(a[i].score, b[i].score);
    EXPECT_EQ(a[i].rng, b[i].rng);
  }
}

TEST(ConstrainedBeamSearch, ShiftedScoresLeaveOutputUnchanged) {
  const auto c = testutil::make_corpus(
      {"the quick brown fox jumps over the lazy dog", "pack my box with five dozen jugs"});
  const auto idx = reversed_index(c);
  ngram_model base = train_ngram(c);
  shifted_model shifted(base, 5.0);
  const auto query = tokenize("lazy");
  const auto a = constrained_beam_search(idx, base, query, decode_config{});
  const auto b = constrained_beam_search(idx, shifted, query, decode_config{});
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].tokens, b[i].tokens);
    EXPECT_NEAR(a[i].logprob, b[i].logprob, 1e-9);
  }
}

TEST(ConstrainedBeamSearch, RejectsBadConfig) {
  const auto idx = reversed_index(testutil::make_corpus({"some text here"}));
  uniform_model model;
  decode_config cfg;
  cfg.beam_width = 0;
  EXPECT_THROW(constrained_beam_search(idx, model, {}, cfg), domain_error);
  cfg = {};
  cfg.min_span_len = 0;
  EXPECT_THROW(constrained_beam_search(idx, model, {}, cfg), domain_error);
  cfg = {};
  cfg.min_span_len = 10;
  cfg.max_span_len = 5;
  EXPECT_THROW(constrained_beam_search(idx, model, {}, cfg), domain_error);
}

TEST(ConstrainedBeamSearch, RequiresReversedIndex) {
  const auto plain =
      fm_index::build(concat(testutil::make_corpus({"some text here"})), 8, /*reversed=*/false);
  uniform_model model;
  EXPECT_THROW(constrained_beam_search(plain, model, {}, decode_config{}), domain_error);
}
