// Copyright spanret contributors. SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "spanret/corpus.hpp"
#include "spanret/errors.hpp"

namespace spanret {

// Lowercases ASCII letters, deletes ASCII punctuation, splits on
// whitespace.
inline std::vector<std::string> analyze(const std::string& text) {
  std::vector<std::string> terms;
  std::string cur;
  for (unsigned char b : text) {
    if (std::isspace(b)) {
      if (!cur.empty()) terms.push_back(std::move(cur)), cur.clear();
    } else if (std::ispunct(b)) {
      continue;
    } else {
      cur.push_back(static_cast<char>(std::tolower(b)));
    }
  }
  if (!cur.empty()) terms.push_back(std::move(cur));
  return terms;
}

struct posting {
  std::uint32_t doc = 0;  // index into doc_ids
  std::uint32_t tf = 0;
};

struct ranked_doc {
  std::string doc_id;
  double score = 0.0;
};

class inverted_index {
 public:
  static inverted_index build(const corpus& c) {
    if (c.docs.empty()) throw domain_error("inverted_index: empty corpus");
    inverted_index idx;
    idx.doc_ids_.reserve(c.docs.size());
    idx.doc_len_.reserve(c.docs.size());
    std::uint64_t total_len = 0;
    for (std::uint32_t d = 0; d < c.docs.size(); ++d) {
      idx.doc_ids_.push_back(c.docs[d].doc_id);
      std::unordered_map<std::string, std::uint32_t> tf;
      std::uint32_t len = 0;
      for (std::string& t : analyze(c.docs[d].text)) {
        tf[std::move(t)]++;
        ++len;
      }
      idx.doc_len_.push_back(len);
      total_len += len;
      for (auto& [term, count] : tf) idx.postings_[term].push_back({d, count});
    }
    for (auto& [_, plist] : idx.postings_)
      std::sort(plist.begin(), plist.end(),
                [](const posting& a, const posting& b) { return a.doc < b.doc; });
    idx.avgdl_ = static_cast<double>(total_len) / static_cast<double>(c.docs.size());
    return idx;
  }

  std::uint32_t doc_count() const { return doc_ids_.size(); }
  double avgdl() const { return avgdl_; }
  std::uint32_t doc_length(std::uint32_t d) const { return doc_len_.at(d); }

  std::uint32_t df(const std::string& term) const {
    auto it = postings_.find(term);
    return it == postings_.end() ? 0 : it->second.size();
  }

  // Okapi scoring; duplicate query terms accumulate per occurrence.
  // Documents with no overlap are omitted; ties break by doc_id.
  std::vector<ranked_doc> search(const std::string& query, std::size_t k, double k1 = 1.2,
                                 double b = 0.75) const {
    if (k < 1) throw domain_error("bm25 search: k must be >= 1");
    const double n = doc_count();
    std::unordered_map<std::uint32_t, double> scores;
    for (const std::string& term : analyze(query)) {
      auto it = postings_.find(term);
      if (it == postings_.end()) continue;
      const auto& plist = it->second;
      const double idf = std::log(1.0 + (n - plist.size() + 0.5) / (plist.size() + 0.5));
      for (const posting& p : plist) {
        const double tf = p.tf;
        const double norm = k1 * (1.0 - b + b * doc_len_[p.doc] / avgdl_);
        scores[p.doc] += idf * tf / (tf + norm);
      }
    }
    std::vector<ranked_doc> out;
    out.reserve(scores.size());
    for (const auto& [d, s] : scores) out.push_back({doc_ids_[d], s});
    std::sort(out.begin(), out.end(), [](const ranked_doc& a, const ranked_doc& b2) {
      if (a.score != b2.score) return a.score > b2.score;
      return a.doc_id < b2.doc_id;
    });
    if (out.size() > k) out.resize(k);
    return out;
  }

 private:
  std::vector<std::string> doc_ids_;
  std::vector<std::uint32_t> doc_len_;
  std::unordered_map<std::string, std::vector<posting>> postings_;
  double avgdl_ = 0.0;
};

}  // namespace spanret
