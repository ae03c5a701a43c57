// Copyright spanret contributors. SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cctype>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "spanret/errors.hpp"

namespace spanret {

inline std::string format_fixed4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

// One line of a run file: query_id<TAB>doc_id<TAB>rank<TAB>score.
struct run_record {
  std::string query_id;
  std::string doc_id;
  std::uint32_t rank = 0;
  double score = 0.0;
};

// Relevance judgments plus each query's own document (excluded from its
// ranking before truncation). Queries are identified by their query
// document's doc_id, so qrels files need no separate query column.
struct qrels {
  std::map<std::string, std::set<std::string>> relevant;
  std::map<std::string, std::string> query_doc;
  std::map<std::string, std::string> category;  // empty when qrels carry no categories
};

struct query_item {
  std::string query_id;
  std::string text;
};

namespace detail {

inline std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  for (;;) {
    std::size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

inline std::ifstream open_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw parse_error("cannot open " + path);
  return in;
}

}  // namespace detail

inline std::vector<run_record> read_run_file(const std::string& path) {
  std::ifstream in = detail::open_text(path);
  std::vector<run_record> out;
  std::set<std::string> closed;
  std::string cur_query, line;
  std::uint32_t prev_rank = 0;
  double prev_score = 0.0;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = path + ":" + std::to_string(lineno);
    auto fields = detail::split_tabs(line);
    if (fields.size() != 4) throw parse_error(where + ": expected 4 tab-separated fields");
    run_record r;
    r.query_id = fields[0];
    r.doc_id = fields[1];
    if (r.query_id.empty() || r.doc_id.empty())
      throw parse_error(where + ": empty query_id or doc_id");
    try {
      std::size_t used = 0;
      const long rank = std::stol(fields[2], &used);
      if (used != fields[2].size() || rank < 1) throw std::invalid_argument("rank");
      r.rank = static_cast<std::uint32_t>(rank);
      r.score = std::stod(fields[3], &used);
      if (used != fields[3].size()) throw std::invalid_argument("score");
    } catch (const std::exception&) {
      throw parse_error(where + ": malformed rank or score");
    }
    if (r.query_id != cur_query) {
      if (closed.count(r.query_id))
        throw parse_error(where + ": run file not sorted by query_id (" + r.query_id +
                          " reappears)");
      if (!cur_query.empty()) closed.insert(cur_query);
      cur_query = r.query_id;
      prev_rank = 0;
    } else {
      if (r.rank <= prev_rank) throw parse_error(where + ": ranks not strictly increasing");
      if (r.score > prev_score) throw parse_error(where + ": scores increase with rank");
    }
    prev_rank = r.rank;
    prev_score = r.score;
    out.push_back(std::move(r));
  }
  return out;
}

inline void write_run_file(const std::string& path, const std::vector<run_record>& records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw error("cannot open " + path + " for writing");
  for (const run_record& r : records)
    out << r.query_id << '\t' << r.doc_id << '\t' << r.rank << '\t' << format_fixed4(r.score)
        << '\n';
  if (!out) throw error("write failed: " + path);
}

// Accepts 2-column lines (query_id, doc_id) and 3-column lines with a
// trailing category; writer emits the category column only when present.
inline qrels read_qrels_file(const std::string& path) {
  std::ifstream in = detail::open_text(path);
  qrels q;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = path + ":" + std::to_string(lineno);
    auto fields = detail::split_tabs(line);
    if (fields.size() != 2 && fields.size() != 3)
      throw parse_error(where + ": expected 2 or 3 tab-separated fields");
    if (fields[0].empty() || fields[1].empty())
      throw parse_error(where + ": empty query_id or doc_id");
    if (fields[0] == fields[1])
      throw integrity_error(where + ": query document listed in its own relevant set");
    q.relevant[fields[0]].insert(fields[1]);
    q.query_doc[fields[0]] = fields[0];
    if (fields.size() == 3 && !fields[2].empty()) {
      auto [it, inserted] = q.category.try_emplace(fields[0], fields[2]);
      if (!inserted && it->second != fields[2])
        throw integrity_error(where + ": conflicting categories for query " + fields[0]);
    }
  }
  return q;
}

inline void write_qrels_file(const std::string& path, const qrels& q) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw error("cannot open " + path + " for writing");
  for (const auto& [query_id, docs] : q.relevant) {
    auto cat = q.category.find(query_id);
    for (const std::string& d : docs) {
      out << query_id << '\t' << d;
      if (cat != q.category.end()) out << '\t' << cat->second;
      out << '\n';
    }
  }
  if (!out) throw error("write failed: " + path);
}

// Queries file: JSON lines {"query_id": string, "text": string}.
inline std::vector<query_item> read_queries(const std::string& path) {
  std::ifstream in = detail::open_text(path);
  std::vector<query_item> out;
  std::set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    bool blank = true;
    for (char ch : line)
      if (!std::isspace(static_cast<unsigned char>(ch))) {
        blank = false;
        break;
      }
    if (blank) continue;
    const std::string where = path + ":" + std::to_string(lineno);
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw parse_error(where + ": invalid JSON object");
    if (!j.contains("query_id") || !j["query_id"].is_string() || j["query_id"].empty() ||
        !j.contains("text") || !j["text"].is_string())
      throw parse_error(where + ": need string fields query_id and text");
    query_item item{j["query_id"].get<std::string>(), j["text"].get<std::string>()};
    if (!seen.insert(item.query_id).second)
      throw integrity_error(where + ": duplicate query_id " + item.query_id);
    out.push_back(std::move(item));
  }
  return out;
}

}  // namespace spanret
