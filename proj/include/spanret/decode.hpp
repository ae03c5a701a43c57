// Copyright spanret contributors. SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "spanret/corpus.hpp"
#include "spanret/errors.hpp"
#include "spanret/fm_index.hpp"
#include "spanret/model.hpp"

namespace spanret {

// Bytes excluded by the `stoplist` first-token policy and stripped from
// element edges: digits, punctuation, whitespace.
inline bool is_stoplist_byte(unsigned char b) {
  return std::isdigit(b) || std::ispunct(b) || std::isspace(b);
}

enum class first_token_policy { all, stoplist, allowlist };

struct first_token_config {
  first_token_policy policy = first_token_policy::stoplist;
  std::string allowlist_path;  // allowlist only: one element per line
};

// Resolved form of first_token_config: the allowlist file (when used) is
// read once at construction.
class first_token_filter {
 public:
  explicit first_token_filter(const first_token_config& cfg) : policy_(cfg.policy) {
    if (policy_ != first_token_policy::allowlist) return;
    std::ifstream in(cfg.allowlist_path);
    if (!in) throw config_error("allowlist file missing: " + cfg.allowlist_path);
    allowed_.fill(false);
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      allowed_[static_cast<unsigned char>(line[0]) + 2] = true;
    }
  }

  bool passes(symbol_t sym) const {
    if (sym < 2 || sym >= k_alphabet) return false;
    switch (policy_) {
      case first_token_policy::all:
        return true;
      case first_token_policy::stoplist:
        return !is_stoplist_byte(static_cast<unsigned char>(sym - 2));
      case first_token_policy::allowlist:
        return allowed_[sym];
    }
    return false;
  }

 private:
  first_token_policy policy_;
  std::array<bool, k_alphabet> allowed_{};
};

// Symbols admissible as span starts: those occurring in the indexed text
// (separator and terminator excluded) that pass the policy.
inline std::vector<symbol_t> first_token_candidates(const fm_index& idx,
                                                    const first_token_filter& filter) {
  std::vector<symbol_t> out;
  for (std::uint32_t c = 2; c < k_alphabet; ++c) {
    const symbol_t s = static_cast<symbol_t>(c);
    if (idx.c_of(s + 1) > idx.c_of(s) && filter.passes(s)) out.push_back(s);
  }
  return out;
}

struct decode_config {
  std::uint32_t beam_width = 10;
  std::uint32_t max_span_len = 32;
  std::uint32_t min_span_len = 4;
  first_token_config first_token;
  std::uint64_t locate_limit = 100;
};

// A finished span: its tokens, cumulative and length-normalized log
// probability, and its live range on the reversed index (forward match
// semantics), from which occurrence count and documents are derived.
struct scored_span {
  std::vector<symbol_t> tokens;
  double logprob = 0.0;
  double score = 0.0;  // logprob / tokens.size()
  range rng;
};

struct hypothesis {
  std::vector<symbol_t> tokens;
  range rng;
  double logprob = 0.0;
};

// Beam decoding in which every hypothesis is kept grounded: candidate
// symbols at each step are exactly those whose extended range on the
// reversed index is non-empty, so any emitted span occurs in the corpus.
// A hypothesis at or past min_span_len additionally offers a synthetic
// STOP action scored by its current length-normalized log probability;
// STOP competes in the same top-B selection as extensions and already
// finished spans. Ties break toward smaller symbol id (STOP ranks after
// every real symbol), then shorter result, then construction order.
inline std::vector<scored_span> constrained_beam_search(const fm_index& idx, token_model& model,
                                                        std::span<const symbol_t> query,
                                                        const decode_config& cfg) {
  if (cfg.beam_width < 1) throw domain_error("constrained_beam_search: beam_width must be >= 1");
  if (cfg.min_span_len < 1) throw domain_error("constrained_beam_search: min_span_len must be >= 1");
  if (cfg.min_span_len > cfg.max_span_len)
    throw domain_error("constrained_beam_search: min_span_len exceeds max_span_len");
  if (!idx.reversed())
    throw domain_error("constrained_beam_search: index must be built with reversed = true");

  constexpr symbol_t k_stop_symbol = k_alphabet;  // sorts after all real symbols
  const first_token_filter filter(cfg.first_token);
  std::array<bool, k_alphabet> first_ok{};
  for (symbol_t s : first_token_candidates(idx, filter)) first_ok[s] = true;

  enum class act_kind { keep_finished, stop, extend };
  struct action {
    double score;
    symbol_t sym;
    std::uint32_t result_len;
    act_kind kind;
    std::uint32_t parent;  // into finished (keep_finished) or live (stop/extend)
    double logprob;
    range rng;
  };

  std::vector<hypothesis> live{{{}, idx.full_range(), 0.0}};
  std::vector<hypothesis> finished;
  std::vector<symbol_t> context(query.begin(), query.end());

  for (std::uint32_t step = 1; !live.empty(); ++step) {
    std::vector<action> pool;
    for (std::uint32_t i = 0; i < finished.size(); ++i) {
      const hypothesis& h = finished[i];
      const std::uint32_t len = h.tokens.size();
      pool.push_back({h.logprob / len, k_stop_symbol, len, act_kind::keep_finished, i, h.logprob,
                      h.rng});
    }
    for (std::uint32_t i = 0; i < live.size(); ++i) {
      const hypothesis& h = live[i];
      const std::uint32_t len = h.tokens.size();
      std::vector<symbol_t> cands;
      std::vector<range> cand_ranges;
      for (const auto& [sym, rng] : idx.range_symbols(h.rng)) {
        if (sym < 2) continue;
        if (step == 1 && !first_ok[sym]) continue;
        cands.push_back(sym);
        cand_ranges.push_back(rng);
      }
      if (step == 1 && cands.empty())
        throw decode_error(decode_error::code::empty_first_candidates,
                           "decode error E1: no admissible first token");
      if (!cands.empty()) {
        context.resize(query.size());
        context.insert(context.end(), h.tokens.begin(), h.tokens.end());
        const token_distribution dist = next_logprobs(model, context, cands);
        for (std::size_t c = 0; c < cands.size(); ++c) {
          const double lp = h.logprob + dist.logprobs[c];
          pool.push_back({lp / (len + 1), cands[c], len + 1, act_kind::extend, i, lp,
                          cand_ranges[c]});
        }
      }
      if (len >= cfg.min_span_len)
        pool.push_back({h.logprob / len, k_stop_symbol, len, act_kind::stop, i, h.logprob, h.rng});
    }

    std::stable_sort(pool.begin(), pool.end(), [](const action& a, const action& b) {
      if (a.score != b.score) return a.score > b.score;
      if (a.sym != b.sym) return a.sym < b.sym;
      return a.result_len < b.result_len;
    });
    if (pool.size() > cfg.beam_width) pool.resize(cfg.beam_width);

    std::vector<hypothesis> next_live, next_finished;
    for (const action& a : pool) {
      switch (a.kind) {
        case act_kind::keep_finished:
          next_finished.push_back(std::move(finished[a.parent]));
          break;
        case act_kind::stop:
          next_finished.push_back(live[a.parent]);  // parent may also extend
          break;
        case act_kind::extend: {
          hypothesis h = live[a.parent];  // parents may spawn several extensions
          h.tokens.push_back(a.sym);
          h.rng = a.rng;
          h.logprob = a.logprob;
          if (a.result_len >= cfg.max_span_len)
            next_finished.push_back(std::move(h));
          else
            next_live.push_back(std::move(h));
          break;
        }
      }
    }
    live = std::move(next_live);
    finished = std::move(next_finished);
  }

  if (finished.empty())
    throw decode_error(decode_error::code::all_hypotheses_died,
                       "decode error E2: all hypotheses died before min_span_len");

  std::vector<scored_span> out;
  out.reserve(finished.size());
  for (const hypothesis& h : finished)
    out.push_back({h.tokens, h.logprob, h.logprob / h.tokens.size(), h.rng});
  std::stable_sort(out.begin(), out.end(), [](const scored_span& a, const scored_span& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.tokens < b.tokens;
  });
  return out;
}

}  // namespace spanret
