// Copyright spanret contributors. SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "spanret/binio.hpp"
#include "spanret/corpus.hpp"
#include "spanret/errors.hpp"

namespace spanret {

// Sidecar for an index directory: the concatenated symbol sequence with
// its document boundaries, enough to retrain token models at search time
// without the original corpus file.
inline void save_sequence(std::ostream& os, const symbol_sequence& seq) {
  static constexpr char magic[8] = {'S', 'R', 'S', 'E', 'Q', '0', '0', '1'};
  os.write(magic, sizeof(magic));
  binio::put_u64(os, seq.symbols.size());
  for (symbol_t s : seq.symbols) binio::put_u16(os, s);
  binio::put_u64(os, seq.boundaries.size());
  for (const doc_span& b : seq.boundaries) {
    binio::put_u64(os, b.begin);
    binio::put_u64(os, b.end);
    binio::put_string(os, b.doc_id);
  }
  if (!os) throw error("sequence: write failed");
}

inline symbol_sequence load_sequence(std::istream& is) {
  static constexpr char magic[8] = {'S', 'R', 'S', 'E', 'Q', '0', '0', '1'};
  char got[8];
  if (!is.read(got, 8) || !std::equal(got, got + 8, magic))
    throw parse_error("sequence file: bad magic bytes");
  symbol_sequence seq;
  seq.symbols.resize(binio::get_u64(is));
  for (auto& s : seq.symbols) {
    s = binio::get_u16(is);
    if (s >= k_alphabet) throw parse_error("sequence file: symbol out of alphabet");
  }
  seq.boundaries.resize(binio::get_u64(is));
  for (auto& b : seq.boundaries) {
    b.begin = binio::get_u64(is);
    b.end = binio::get_u64(is);
    b.doc_id = binio::get_string(is);
    if (b.begin > b.end || b.end > seq.symbols.size())
      throw parse_error("sequence file: boundary out of range");
  }
  return seq;
}

inline void save_sequence_file(const std::string& path, const symbol_sequence& seq) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw error("cannot open " + path + " for writing");
  save_sequence(os, seq);
}

inline symbol_sequence load_sequence_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw parse_error("cannot open " + path);
  return load_sequence(is);
}

}  // namespace spanret
