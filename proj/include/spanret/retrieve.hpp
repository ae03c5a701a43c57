// Copyright spanret contributors. SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "spanret/corpus.hpp"
#include "spanret/decode.hpp"
#include "spanret/errors.hpp"
#include "spanret/fm_index.hpp"
#include "spanret/model.hpp"

namespace spanret {

struct span_contribution {
  std::string text;
  double weight = 0.0;         // exp(span score) * ln(1 + N/df)
  std::uint64_t occurrences = 0;  // corpus-wide occurrence count
};

struct retrieval_result {
  std::string doc_id;
  double score = 0.0;
  std::vector<span_contribution> spans;
};

// Folds decoded spans into a document ranking. Spans are de-duplicated by
// token sequence keeping the best score; each distinct span contributes
// w(S) = exp(score) * ln(1 + N/df) to every document it occurs in, where
// df counts documents among the first locate_limit located occurrences.
// Ranking is by descending score, ties by doc_id.
inline std::vector<retrieval_result> score_documents(const fm_index& idx,
                                                     const std::vector<scored_span>& spans,
                                                     const decode_config& cfg) {
  std::map<std::vector<symbol_t>, const scored_span*> distinct;
  for (const scored_span& s : spans) {
    auto [it, inserted] = distinct.try_emplace(s.tokens, &s);
    if (!inserted && s.score > it->second->score) it->second = &s;
  }

  const double n_docs = static_cast<double>(idx.doc_count());
  std::map<std::string, retrieval_result> by_doc;
  for (const auto& [tokens, span] : distinct) {
    const std::vector<std::string> docs = idx.docs_in_range(span->rng, cfg.locate_limit);
    if (docs.empty()) continue;
    const double idf = std::log(1.0 + n_docs / static_cast<double>(docs.size()));
    const double weight = std::exp(span->score) * idf;
    const std::string text = detokenize(tokens);
    for (const std::string& doc_id : docs) {
      retrieval_result& r = by_doc[doc_id];
      r.doc_id = doc_id;
      r.score += weight;
      r.spans.push_back({text, weight, span->rng.width()});
    }
  }

  std::vector<retrieval_result> ranked;
  ranked.reserve(by_doc.size());
  for (auto& [_, r] : by_doc) ranked.push_back(std::move(r));
  std::sort(ranked.begin(), ranked.end(), [](const retrieval_result& a, const retrieval_result& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.doc_id < b.doc_id;
  });
  return ranked;
}

struct retrieval_output {
  std::vector<retrieval_result> results;
  std::string diagnostic;  // non-empty when decoding failed (E1/E2)
};

// Full query pipeline: tokenize, decode spans conditioned on the query,
// aggregate, truncate to k. Decode failures yield an empty result set
// with the diagnostic instead of an exception.
inline retrieval_output retrieve(const fm_index& idx, token_model& model,
                                 const std::string& query_text, const decode_config& cfg,
                                 std::size_t k) {
  if (k < 1) throw domain_error("retrieve: k must be >= 1");
  const std::vector<symbol_t> query = tokenize(query_text);
  retrieval_output out;
  std::vector<scored_span> spans;
  try {
    spans = constrained_beam_search(idx, model, query, cfg);
  } catch (const decode_error& e) {
    out.diagnostic = e.what();
    return out;
  }
  out.results = score_documents(idx, spans, cfg);
  if (out.results.size() > k) out.results.resize(k);
  return out;
}

}  // namespace spanret
