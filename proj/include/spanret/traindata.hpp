// Copyright spanret contributors. SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <fstream>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "spanret/corpus.hpp"
#include "spanret/decode.hpp"
#include "spanret/errors.hpp"

namespace spanret {

// Rule-based element extraction: split on sentence/clause delimiters,
// strip stoplist bytes (digits, punctuation, whitespace) from both ends,
// drop what ends up shorter than min_len bytes, de-duplicate keeping
// first occurrences.
inline std::vector<std::string> extract_elements(const std::string& text,
                                                 std::size_t min_len = 4) {
  if (text.empty()) throw domain_error("extract_elements: empty text");
  static constexpr std::string_view delims = ".!?;,:\n";
  std::vector<std::string> out;
  std::set<std::string> seen;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= text.size(); ++i) {
    if (i < text.size() && delims.find(text[i]) == std::string_view::npos) continue;
    std::size_t lo = start, hi = i;
    start = i + 1;
    while (lo < hi && is_stoplist_byte(static_cast<unsigned char>(text[lo]))) ++lo;
    while (hi > lo && is_stoplist_byte(static_cast<unsigned char>(text[hi - 1]))) --hi;
    if (hi - lo < min_len) continue;
    std::string elem = text.substr(lo, hi - lo);
    if (seen.insert(elem).second) out.push_back(std::move(elem));
  }
  return out;
}

// If the element's first symbol violates the policy, truncate to the
// first whitespace-delimited word whose first symbol passes; drop the
// element (nullopt) when no word qualifies.
inline std::optional<std::string> first_token_reorder(const std::string& element,
                                                      const first_token_filter& filter) {
  auto passes_at = [&](std::size_t i) {
    return filter.passes(static_cast<symbol_t>(static_cast<unsigned char>(element[i]) + 2));
  };
  if (element.empty()) return std::nullopt;
  if (passes_at(0)) return element;
  for (std::size_t i = 1; i < element.size(); ++i) {
    const bool word_start = !std::isspace(static_cast<unsigned char>(element[i])) &&
                            std::isspace(static_cast<unsigned char>(element[i - 1]));
    if (word_start && passes_at(i)) return element.substr(i);
  }
  return std::nullopt;
}

struct training_pair {
  std::string input;
  std::string target;
  std::string kind;  // "query-element" | "element-element"
};

using element_extractor = std::function<std::vector<std::string>(const std::string&)>;

inline element_extractor rule_based_extractor(std::size_t min_len = 4) {
  return [min_len](const std::string& text) { return extract_elements(text, min_len); };
}

// Per document: up to max_query_pairs (full text -> element) pairs and up
// to max_element_pairs adjacent (element -> next element) pairs, in
// extraction order. Elements failing the first-token policy are reordered
// or dropped before pairing, so every target passes the policy.
inline std::vector<training_pair> build_ssft_pairs(const corpus& c,
                                                   const element_extractor& extract,
                                                   const first_token_filter& filter,
                                                   std::size_t max_query_pairs = 15,
                                                   std::size_t max_element_pairs = 5) {
  if (c.docs.empty()) throw domain_error("build_ssft_pairs: empty corpus");
  std::vector<training_pair> out;
  for (const document& d : c.docs) {
    std::vector<std::string> elements;
    std::set<std::string> seen;
    for (const std::string& raw : extract(d.text)) {
      std::optional<std::string> fixed = first_token_reorder(raw, filter);
      if (fixed && seen.insert(*fixed).second) elements.push_back(std::move(*fixed));
    }
    const std::size_t n_query = std::min(elements.size(), max_query_pairs);
    for (std::size_t i = 0; i < n_query; ++i)
      out.push_back({d.text, elements[i], "query-element"});
    const std::size_t n_elem =
        std::min(elements.empty() ? 0 : elements.size() - 1, max_element_pairs);
    for (std::size_t i = 0; i < n_elem; ++i)
      out.push_back({elements[i], elements[i + 1], "element-element"});
  }
  return out;
}

// Output format: JSON lines {"input","target","kind"}.
inline void write_training_pairs(const std::string& path, const std::vector<training_pair>& pairs) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw error("cannot open " + path + " for writing");
  for (const training_pair& p : pairs) {
    nlohmann::json j = {{"input", p.input}, {"target", p.target}, {"kind", p.kind}};
    out << j.dump() << '\n';
  }
  if (!out) throw error("write failed: " + path);
}

}  // namespace spanret
