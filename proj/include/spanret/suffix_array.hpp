// Copyright spanret contributors. SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "spanret/corpus.hpp"
#include "spanret/errors.hpp"

namespace spanret {

// Prefix-doubling suffix array construction, O(n log n) with counting
// sorts per round. The sequence must end in the terminator symbol 1 and
// contain it nowhere else; that makes every suffix comparison terminate
// and the result a strict lexicographic order.
inline std::vector<std::uint32_t> build_suffix_array(std::span<const symbol_t> seq) {
  if (seq.empty() || seq.back() != k_terminator)
    throw domain_error("build_suffix_array: sequence must end with the terminator symbol");
  if (seq.size() > (std::uint64_t{1} << 32) - 2)
    throw domain_error("build_suffix_array: sequence too large for 32-bit rows");
  const std::uint32_t n = static_cast<std::uint32_t>(seq.size());
  for (std::uint32_t i = 0; i + 1 < n; ++i) {
    if (seq[i] == k_terminator)
      throw domain_error("build_suffix_array: interior terminator at position " + std::to_string(i));
    if (seq[i] >= k_alphabet)
      throw domain_error("build_suffix_array: symbol out of alphabet at position " + std::to_string(i));
  }

  std::vector<std::uint32_t> sa(n), rank(n), next_rank(n), bucket;

  // Round 0: counting sort on single symbols.
  bucket.assign(k_alphabet + 1, 0);
  for (std::uint32_t i = 0; i < n; ++i) bucket[seq[i] + 1]++;
  for (std::size_t i = 1; i < bucket.size(); ++i) bucket[i] += bucket[i - 1];
  for (std::uint32_t i = 0; i < n; ++i) sa[bucket[seq[i]]++] = i;
  std::uint32_t r = 0;
  rank[sa[0]] = 0;
  for (std::uint32_t j = 1; j < n; ++j) {
    if (seq[sa[j]] != seq[sa[j - 1]]) ++r;
    rank[sa[j]] = r;
  }

  std::vector<std::uint32_t> by_second(n);
  for (std::uint32_t k = 1; r + 1 < n; k <<= 1) {
    // Order suffixes by their second half; suffixes whose second half is
    // empty (i >= n - k) sort first.
    std::uint32_t pos = 0;
    for (std::uint32_t i = n - k; i < n; ++i) by_second[pos++] = i;
    for (std::uint32_t j = 0; j < n; ++j)
      if (sa[j] >= k) by_second[pos++] = sa[j] - k;

    // Stable counting sort by first-half rank.
    bucket.assign(r + 2, 0);
    for (std::uint32_t i = 0; i < n; ++i) bucket[rank[i] + 1]++;
    for (std::size_t i = 1; i < bucket.size(); ++i) bucket[i] += bucket[i - 1];
    for (std::uint32_t idx : by_second) sa[bucket[rank[idx]]++] = idx;

    auto second = [&](std::uint32_t x) -> std::uint64_t {
      return x + k < n ? std::uint64_t{rank[x + k]} + 1 : 0;
    };
    r = 0;
    next_rank[sa[0]] = 0;
    for (std::uint32_t j = 1; j < n; ++j) {
      if (rank[sa[j]] != rank[sa[j - 1]] || second(sa[j]) != second(sa[j - 1])) ++r;
      next_rank[sa[j]] = r;
    }
    rank.swap(next_rank);
  }
  return sa;
}

}  // namespace spanret
