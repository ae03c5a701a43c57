// Copyright spanret contributors. SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "spanret/corpus.hpp"
#include "spanret/errors.hpp"

namespace spanret {

// Log-probabilities over a caller-supplied candidate set, renormalized so
// the candidates sum to 1 in probability space.
struct token_distribution {
  std::vector<symbol_t> symbols;
  std::vector<double> logprobs;
};

// Source of next-token scores. Implementations return unnormalized
// log-scores aligned with `candidates`; next_logprobs owns normalization,
// so scaling all scores by a constant cannot change downstream rankings.
class token_model {
 public:
  virtual ~token_model() = default;
  virtual std::vector<double> raw_logprobs(std::span<const symbol_t> context,
                                           std::span<const symbol_t> candidates) = 0;
};

inline token_distribution next_logprobs(token_model& model, std::span<const symbol_t> context,
                                        std::span<const symbol_t> candidates) {
  if (candidates.empty()) throw domain_error("next_logprobs: empty candidate set");
  for (symbol_t c : candidates)
    if (c >= k_alphabet)
      throw domain_error("next_logprobs: candidate symbol " + std::to_string(c) +
                         " out of alphabet");
  std::vector<double> raw = model.raw_logprobs(context, candidates);
  if (raw.size() != candidates.size())
    throw internal_error("next_logprobs: model returned " + std::to_string(raw.size()) +
                         " scores for " + std::to_string(candidates.size()) + " candidates");
  double mx = raw[0];
  for (double v : raw) {
    if (!std::isfinite(v)) throw domain_error("next_logprobs: non-finite model score");
    mx = std::max(mx, v);
  }
  double sum = 0.0;
  for (double v : raw) sum += std::exp(v - mx);
  const double lse = mx + std::log(sum);
  token_distribution dist;
  dist.symbols.assign(candidates.begin(), candidates.end());
  dist.logprobs.resize(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) dist.logprobs[i] = raw[i] - lse;
  return dist;
}

class uniform_model : public token_model {
 public:
  std::vector<double> raw_logprobs(std::span<const symbol_t>,
                                   std::span<const symbol_t> candidates) override {
    return std::vector<double>(candidates.size(), 0.0);
  }
};

// Add-alpha smoothed n-gram model counted within document spans only, so
// no window ever crosses a separator. The context backs off one symbol at
// a time until it has been seen; raw scores are genuine log-probabilities
// over the full alphabet (they sum to 1 before candidate renormalization).
class ngram_model : public token_model {
 public:
  explicit ngram_model(std::uint32_t order = 4, double alpha = 0.1)
      : order_(order), alpha_(alpha) {
    if (order_ < 1) throw domain_error("ngram_model: order must be >= 1");
    if (!(alpha_ > 0.0)) throw domain_error("ngram_model: alpha must be > 0");
  }

  std::uint32_t order() const { return order_; }
  double alpha() const { return alpha_; }

  void train(const symbol_sequence& seq) {
    for (const doc_span& d : seq.boundaries) {
      for (std::uint64_t t = d.begin; t < d.end; ++t) {
        const symbol_t sym = seq.symbols[t];
        for (std::uint32_t j = 0; j < order_ && t - d.begin >= j; ++j) {
          std::u16string ctx(seq.symbols.begin() + (t - j), seq.symbols.begin() + t);
          ctx_totals_[ctx]++;
          ctx.push_back(sym);
          gram_counts_[ctx]++;
        }
      }
    }
  }

  std::vector<double> raw_logprobs(std::span<const symbol_t> context,
                                   std::span<const symbol_t> candidates) override {
    const std::size_t keep = std::min<std::size_t>(context.size(), order_ - 1);
    std::u16string ctx(context.end() - keep, context.end());
    while (!ctx.empty() && !ctx_totals_.count(ctx)) ctx.erase(ctx.begin());

    auto total_it = ctx_totals_.find(ctx);
    const double total = total_it == ctx_totals_.end() ? 0.0 : double(total_it->second);
    const double denom = std::log(total + alpha_ * k_alphabet);
    std::vector<double> out;
    out.reserve(candidates.size());
    for (symbol_t c : candidates) {
      std::u16string gram = ctx;
      gram.push_back(c);
      auto it = gram_counts_.find(gram);
      const double cnt = it == gram_counts_.end() ? 0.0 : double(it->second);
      out.push_back(std::log(cnt + alpha_) - denom);
    }
    return out;
  }

 private:
  std::uint32_t order_;
  double alpha_;
  std::unordered_map<std::u16string, std::uint64_t> gram_counts_;  // windows of length 1..order
  std::unordered_map<std::u16string, std::uint64_t> ctx_totals_;   // contexts of length 0..order-1
};

inline ngram_model train_ngram(const corpus& c, std::uint32_t order = 4, double alpha = 0.1) {
  if (c.docs.empty()) throw domain_error("train_ngram: empty corpus");
  ngram_model m(order, alpha);
  m.train(concat(c));
  return m;
}

}  // namespace spanret
