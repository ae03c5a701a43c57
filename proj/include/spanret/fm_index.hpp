// Copyright spanret contributors. SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "spanret/binio.hpp"
#include "spanret/corpus.hpp"
#include "spanret/errors.hpp"
#include "spanret/suffix_array.hpp"

namespace spanret {

// Half-open row interval [lo, hi) of the suffix-array matrix. The rows
// are exactly the suffixes prefixed by the pattern matched so far; an
// empty interval (lo == hi) means the pattern does not occur.
struct range {
  std::uint64_t lo = 0;
  std::uint64_t hi = 0;

  std::uint64_t width() const { return hi - lo; }
  bool empty() const { return lo == hi; }
  friend bool operator==(const range&, const range&) = default;
};

// FM-index over a document-separated symbol sequence: BWT + C array +
// checkpointed Occ counts + sampled suffix array + the document boundary
// table. Built once, immutable afterwards; all queries are read-only and
// safe for concurrent callers.
//
// When `reversed` is set the index is built over the reversed body (the
// terminator stays terminal). Appending a token to the right of a grown
// span then maps to one backward_extend step, which is how the decoder
// drives it; locate() reports positions flipped back into original
// coordinates.
class fm_index {
 public:
  static constexpr std::uint64_t k_occ_block = 128;
  static constexpr char k_magic[8] = {'S', 'R', 'F', 'M', 'I', 'D', 'X', '1'};
  static constexpr std::uint32_t k_format_version = 1;

  static fm_index build(const symbol_sequence& seq, std::uint32_t sample_rate = 32,
                        bool reversed = false) {
    if (sample_rate < 1) throw domain_error("fm_index: sample_rate must be >= 1");
    if (seq.symbols.empty() || seq.symbols.back() != k_terminator)
      throw domain_error("fm_index: sequence must end with the terminator symbol");

    std::vector<symbol_t> text(seq.symbols.begin(), seq.symbols.end());
    if (reversed) std::reverse(text.begin(), text.end() - 1);  // keep terminator terminal

    fm_index idx;
    idx.sample_rate_ = sample_rate;
    idx.reversed_ = reversed;
    idx.boundaries_ = seq.boundaries;
    idx.n_ = text.size();

    std::vector<std::uint32_t> sa = build_suffix_array(text);
    const std::uint64_t n = idx.n_;
    idx.bwt_.resize(n);
    for (std::uint64_t i = 0; i < n; ++i)
      idx.bwt_[i] = text[(std::uint64_t{sa[i]} + n - 1) % n];

    idx.c_array_.assign(k_alphabet + 1, 0);
    for (symbol_t s : text) idx.c_array_[s + 1]++;
    for (std::size_t c = 1; c <= k_alphabet; ++c) idx.c_array_[c] += idx.c_array_[c - 1];

    idx.sa_samples_.reserve(n / sample_rate + 1);
    for (std::uint64_t i = 0; i < n; i += sample_rate) idx.sa_samples_.push_back(sa[i]);

    idx.build_occ_checkpoints();
    return idx;
  }

  std::uint64_t size() const { return n_; }
  std::uint64_t body_size() const { return n_ - 1; }
  bool reversed() const { return reversed_; }
  std::uint32_t sample_rate() const { return sample_rate_; }
  const std::vector<symbol_t>& bwt() const { return bwt_; }
  const std::vector<doc_span>& boundaries() const { return boundaries_; }
  std::uint64_t doc_count() const { return boundaries_.size(); }

  // Number of symbols in the text lexicographically smaller than c.
  std::uint64_t c_of(symbol_t c) const { return c_array_[c]; }

  // Occurrences of c in bwt[0, i).
  std::uint64_t occ(symbol_t c, std::uint64_t i) const {
    const std::uint64_t block = i / k_occ_block;
    std::uint64_t count = occ_ckpt_[block * k_alphabet + c];
    for (std::uint64_t j = block * k_occ_block; j < i; ++j)
      if (bwt_[j] == c) ++count;
    return count;
  }

  std::uint64_t lf(std::uint64_t row) const {
    const symbol_t c = bwt_[row];
    return c_array_[c] + occ(c, row);
  }

  range full_range() const { return {0, n_}; }

  // One backward-search step: rows of pattern c.P from the rows of P.
  range backward_extend(range r, symbol_t c) const {
    check_range(r);
    if (c >= k_alphabet)
      throw domain_error("backward_extend: symbol " + std::to_string(c) + " out of alphabet");
    const std::uint64_t lo = c_array_[c] + occ(c, r.lo);
    const std::uint64_t hi = c_array_[c] + occ(c, r.hi);
    return {lo, hi};
  }

  // Right-to-left fold of backward_extend; width = occurrence count.
  // Empty pattern returns the full range by convention.
  range match_pattern(std::span<const symbol_t> pattern) const {
    range r = full_range();
    for (auto it = pattern.rbegin(); it != pattern.rend(); ++it) {
      r = backward_extend(r, *it);
      if (r.empty()) return {0, 0};
    }
    return r;
  }

  // Every symbol c with a non-empty backward extension of r, paired with
  // that extension, in increasing symbol order. Equals the distinct
  // symbols of bwt[lo, hi). Narrow ranges are scanned directly; wide
  // ranges probe the checkpoint table per symbol instead.
  std::vector<std::pair<symbol_t, range>> range_symbols(range r) const {
    check_range(r);
    std::vector<std::pair<symbol_t, range>> out;
    if (r.empty()) return out;
    if (r.width() <= 2 * k_alphabet) {
      bool present[k_alphabet] = {};
      for (std::uint64_t i = r.lo; i < r.hi; ++i) present[bwt_[i]] = true;
      for (std::size_t c = 0; c < k_alphabet; ++c)
        if (present[c]) out.emplace_back(static_cast<symbol_t>(c), backward_extend(r, static_cast<symbol_t>(c)));
    } else {
      for (std::size_t c = 0; c < k_alphabet; ++c) {
        range e = backward_extend(r, static_cast<symbol_t>(c));
        if (!e.empty()) out.emplace_back(static_cast<symbol_t>(c), e);
      }
    }
    return out;
  }

  // Up to `limit` text positions for rows [lo, lo+limit) of r, resolved
  // by LF-walking to the nearest sampled row. For a reversed index the
  // positions come back in original coordinates via
  // p_orig = (body_size - 1) - p_rev, which points at the last symbol of
  // the forward pattern occurrence.
  std::vector<std::int64_t> locate(range r, std::uint64_t limit) const {
    check_range(r);
    if (limit < 1) throw domain_error("locate: limit must be >= 1");
    std::vector<std::int64_t> out;
    const std::uint64_t stop = std::min(r.hi, r.lo + limit);
    out.reserve(stop - r.lo);
    for (std::uint64_t row = r.lo; row < stop; ++row) {
      std::uint64_t cur = row, steps = 0;
      while (cur % sample_rate_ != 0) {
        cur = lf(cur);
        ++steps;
      }
      const std::uint64_t pos = (sa_samples_[cur / sample_rate_] + steps) % n_;
      out.push_back(reversed_ ? static_cast<std::int64_t>(body_size()) - 1 - static_cast<std::int64_t>(pos)
                              : static_cast<std::int64_t>(pos));
    }
    return out;
  }

  // doc_ids of up to `limit` located occurrences, sorted and de-duplicated.
  std::vector<std::string> docs_in_range(range r, std::uint64_t limit) const {
    std::vector<std::string> out;
    for (std::int64_t pos : locate(r, limit)) {
      std::int64_t di = doc_index_at(pos);
      if (di < 0)
        throw internal_error("docs_in_range: located position " + std::to_string(pos) +
                             " falls outside every document");
      out.push_back(boundaries_[di].doc_id);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  // Index into boundaries() of the document covering an original-coordinate
  // position, or -1 for separators/terminator/out-of-range.
  std::int64_t doc_index_at(std::int64_t pos) const {
    if (pos < 0) return -1;
    auto it = std::upper_bound(boundaries_.begin(), boundaries_.end(), static_cast<std::uint64_t>(pos),
                               [](std::uint64_t p, const doc_span& s) { return p < s.begin; });
    if (it == boundaries_.begin()) return -1;
    --it;
    if (static_cast<std::uint64_t>(pos) >= it->end) return -1;
    return it - boundaries_.begin();
  }

  // --- persistence (layout documented in README.md) ---

  void save(std::ostream& os) const {
    os.write(k_magic, sizeof(k_magic));
    binio::put_u32(os, k_format_version);
    binio::put_u32(os, static_cast<std::uint32_t>(k_alphabet));
    binio::put_u64(os, n_);
    binio::put_u8(os, reversed_ ? 1 : 0);
    binio::put_u32(os, sample_rate_);
    binio::put_u64(os, c_array_.size());
    for (std::uint64_t v : c_array_) binio::put_u64(os, v);
    binio::put_u64(os, bwt_.size());
    for (symbol_t s : bwt_) binio::put_u16(os, s);
    binio::put_u64(os, sa_samples_.size());
    for (std::uint64_t v : sa_samples_) binio::put_u64(os, v);
    binio::put_u64(os, boundaries_.size());
    for (const auto& b : boundaries_) {
      binio::put_u64(os, b.begin);
      binio::put_u64(os, b.end);
      binio::put_string(os, b.doc_id);
    }
    if (!os) throw error("fm_index: write failed");
  }

  static fm_index load(std::istream& is) {
    char magic[8];
    if (!is.read(magic, 8) || !std::equal(magic, magic + 8, k_magic))
      throw parse_error("fm_index: bad magic bytes");
    if (binio::get_u32(is) != k_format_version) throw parse_error("fm_index: unsupported format version");
    if (binio::get_u32(is) != k_alphabet) throw parse_error("fm_index: alphabet size mismatch");
    fm_index idx;
    idx.n_ = binio::get_u64(is);
    idx.reversed_ = binio::get_u8(is) != 0;
    idx.sample_rate_ = binio::get_u32(is);
    if (idx.sample_rate_ < 1) throw parse_error("fm_index: corrupt sample rate");
    const std::uint64_t clen = binio::get_u64(is);
    if (clen != k_alphabet + 1) throw parse_error("fm_index: corrupt C array");
    idx.c_array_.resize(clen);
    for (auto& v : idx.c_array_) v = binio::get_u64(is);
    const std::uint64_t blen = binio::get_u64(is);
    if (blen != idx.n_) throw parse_error("fm_index: BWT length mismatch");
    idx.bwt_.resize(blen);
    for (auto& s : idx.bwt_) {
      s = binio::get_u16(is);
      if (s >= k_alphabet) throw parse_error("fm_index: BWT symbol out of alphabet");
    }
    const std::uint64_t slen = binio::get_u64(is);
    if (slen != idx.n_ / idx.sample_rate_ + (idx.n_ % idx.sample_rate_ ? 1 : 0))
      throw parse_error("fm_index: sample table length mismatch");
    idx.sa_samples_.resize(slen);
    for (auto& v : idx.sa_samples_) v = binio::get_u64(is);
    const std::uint64_t nb = binio::get_u64(is);
    idx.boundaries_.resize(nb);
    for (auto& b : idx.boundaries_) {
      b.begin = binio::get_u64(is);
      b.end = binio::get_u64(is);
      b.doc_id = binio::get_string(is);
    }
    if (idx.c_array_.back() != idx.n_) throw parse_error("fm_index: corrupt C array totals");
    idx.build_occ_checkpoints();
    return idx;
  }

  void save_file(const std::string& path) const {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw error("fm_index: cannot open " + path + " for writing");
    save(os);
  }

  static fm_index load_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw parse_error("fm_index: cannot open " + path);
    return load(is);
  }

 private:
  void build_occ_checkpoints() {
    const std::uint64_t blocks = n_ / k_occ_block + 1;
    occ_ckpt_.assign(blocks * k_alphabet, 0);
    std::vector<std::uint32_t> running(k_alphabet, 0);
    for (std::uint64_t i = 0; i < n_; ++i) {
      if (i % k_occ_block == 0)
        std::copy(running.begin(), running.end(), occ_ckpt_.begin() + (i / k_occ_block) * k_alphabet);
      running[bwt_[i]]++;
    }
    if (n_ % k_occ_block == 0 && n_ > 0)
      std::copy(running.begin(), running.end(), occ_ckpt_.begin() + (n_ / k_occ_block) * k_alphabet);
  }

  void check_range(range r) const {
    if (r.lo > r.hi || r.hi > n_)
      throw domain_error("fm_index: invalid range [" + std::to_string(r.lo) + ", " +
                         std::to_string(r.hi) + ")");
  }

  std::uint64_t n_ = 0;
  bool reversed_ = false;
  std::uint32_t sample_rate_ = 32;
  std::vector<symbol_t> bwt_;
  std::vector<std::uint64_t> c_array_;   // c_array_[c] = # symbols < c; back() = n
  std::vector<std::uint32_t> occ_ckpt_;  // per-block cumulative counts, k_alphabet wide
  std::vector<std::uint64_t> sa_samples_;
  std::vector<doc_span> boundaries_;
};

}  // namespace spanret
