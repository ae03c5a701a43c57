// Copyright spanret contributors. SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "spanret/errors.hpp"

namespace spanret {

using symbol_t = std::uint16_t;

inline constexpr symbol_t k_separator = 0;   // closes every document
inline constexpr symbol_t k_terminator = 1;  // closes the whole sequence
inline constexpr std::size_t k_alphabet = 258;  // symbols 2..257 = byte value + 2

struct subfactor {
  std::string name;
  int option = 1;
};

// One retrievable unit. The legal annotations are optional and only used
// by the benchmark tooling; retrieval itself needs doc_id and text.
struct document {
  std::string doc_id;
  std::string text;
  std::vector<std::string> charges;
  std::vector<std::string> statutes;
  std::vector<subfactor> factors;
};

struct corpus {
  std::vector<document> docs;
};

// Byte-level tokenizer over a fixed 258-symbol alphabet. Shifting every
// byte by +2 keeps 0 and 1 reserved, so no generated span can contain a
// document separator or the terminator.
struct byte_tokenizer {
  static constexpr std::size_t vocab_size = k_alphabet;

  static std::vector<symbol_t> tokenize(std::string_view text) {
    std::vector<symbol_t> out;
    out.reserve(text.size());
    for (unsigned char b : text) out.push_back(static_cast<symbol_t>(b) + 2);
    return out;
  }

  static std::string detokenize(std::span<const symbol_t> symbols) {
    std::string out;
    out.reserve(symbols.size());
    for (symbol_t s : symbols) {
      if (s < 2) throw domain_error("detokenize: symbol " + std::to_string(s) + " is reserved");
      if (s >= k_alphabet) throw domain_error("detokenize: symbol " + std::to_string(s) + " out of alphabet");
      out.push_back(static_cast<char>(static_cast<unsigned char>(s - 2)));
    }
    return out;
  }
};

inline std::vector<symbol_t> tokenize(std::string_view text) { return byte_tokenizer::tokenize(text); }
inline std::string detokenize(std::span<const symbol_t> symbols) { return byte_tokenizer::detokenize(symbols); }

// Half-open [begin, end) span of one document's symbols within the
// concatenated sequence. Separator/terminator positions belong to no span.
struct doc_span {
  std::uint64_t begin = 0;
  std::uint64_t end = 0;
  std::string doc_id;
};

struct symbol_sequence {
  std::vector<symbol_t> symbols;
  std::vector<doc_span> boundaries;

  std::uint64_t size() const { return symbols.size(); }

  // Index into boundaries of the document covering `pos`, or -1.
  std::int64_t doc_index_at(std::int64_t pos) const {
    if (pos < 0) return -1;
    auto it = std::upper_bound(boundaries.begin(), boundaries.end(), static_cast<std::uint64_t>(pos),
                               [](std::uint64_t p, const doc_span& s) { return p < s.begin; });
    if (it == boundaries.begin()) return -1;
    --it;
    if (static_cast<std::uint64_t>(pos) >= it->end) return -1;
    return it - boundaries.begin();
  }
};

// tok(d1) 0 tok(d2) 0 ... tok(dk) 0 1
inline symbol_sequence concat(const corpus& c) {
  if (c.docs.empty()) throw domain_error("concat: empty corpus");
  symbol_sequence seq;
  std::uint64_t total = 0;
  for (const auto& d : c.docs) total += d.text.size() + 1;
  seq.symbols.reserve(total + 1);
  seq.boundaries.reserve(c.docs.size());
  for (const auto& d : c.docs) {
    std::uint64_t begin = seq.symbols.size();
    for (unsigned char b : d.text) seq.symbols.push_back(static_cast<symbol_t>(b) + 2);
    seq.boundaries.push_back({begin, seq.symbols.size(), d.doc_id});
    seq.symbols.push_back(k_separator);
  }
  seq.symbols.push_back(k_terminator);
  return seq;
}

namespace detail {

inline bool blank_line(const std::string& line) {
  return std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); });
}

inline nlohmann::json parse_jsonl_line(const std::string& line, std::size_t line_no, const char* what) {
  try {
    return nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw parse_error(std::string(what) + ": line " + std::to_string(line_no) + ": " + e.what());
  }
}

inline std::vector<std::string> string_array_field(const nlohmann::json& j, const char* key,
                                                   std::size_t line_no) {
  std::vector<std::string> out;
  if (!j.contains(key)) return out;
  const auto& arr = j.at(key);
  if (!arr.is_array())
    throw parse_error("line " + std::to_string(line_no) + ": field '" + key + "' must be an array");
  for (const auto& v : arr) {
    if (!v.is_string())
      throw parse_error("line " + std::to_string(line_no) + ": field '" + key + "' must hold strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

}  // namespace detail

// JSON-lines corpus reader. Required fields: doc_id, text. Optional:
// charges, statutes, factors ([{"name","option"}]). Unknown fields ignored.
inline corpus ingest_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw parse_error("ingest: cannot open " + path);
  corpus c;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::blank_line(line)) continue;
    nlohmann::json j = detail::parse_jsonl_line(line, line_no, "ingest");
    document d;
    if (!j.contains("doc_id") || !j.at("doc_id").is_string() || !j.contains("text") ||
        !j.at("text").is_string())
      throw parse_error("ingest: line " + std::to_string(line_no) +
                        ": record needs string fields doc_id and text");
    d.doc_id = j.at("doc_id").get<std::string>();
    d.text = j.at("text").get<std::string>();
    if (d.doc_id.empty())
      throw parse_error("ingest: line " + std::to_string(line_no) + ": empty doc_id");
    if (d.text.empty())
      throw parse_error("ingest: line " + std::to_string(line_no) + ": empty text");
    d.charges = detail::string_array_field(j, "charges", line_no);
    d.statutes = detail::string_array_field(j, "statutes", line_no);
    if (j.contains("factors")) {
      const auto& arr = j.at("factors");
      if (!arr.is_array())
        throw parse_error("ingest: line " + std::to_string(line_no) + ": factors must be an array");
      for (const auto& f : arr) {
        if (!f.is_object() || !f.contains("name") || !f.at("name").is_string() ||
            !f.contains("option") || !f.at("option").is_number_integer())
          throw parse_error("ingest: line " + std::to_string(line_no) +
                            ": factor entries need string name and integer option");
        subfactor sf{f.at("name").get<std::string>(), f.at("option").get<int>()};
        if (sf.option < 1)
          throw parse_error("ingest: line " + std::to_string(line_no) + ": factor option must be >= 1");
        d.factors.push_back(std::move(sf));
      }
    }
    if (!seen.insert(d.doc_id).second)
      throw integrity_error("ingest: line " + std::to_string(line_no) + ": duplicate doc_id '" +
                            d.doc_id + "'");
    c.docs.push_back(std::move(d));
  }
  return c;
}

}  // namespace spanret
