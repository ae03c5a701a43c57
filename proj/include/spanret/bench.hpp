// Copyright spanret contributors. SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "spanret/corpus.hpp"
#include "spanret/errors.hpp"
#include "spanret/runfile.hpp"

namespace spanret {

struct group_spec {
  std::string group_id;
  std::string category;
  std::vector<std::string> charge_titles;
  std::vector<std::string> statutes;
};

// Group spec file: JSON lines
// {"group_id","category","charge_titles","statutes"}.
inline std::vector<group_spec> load_group_specs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw parse_error("cannot open " + path);
  std::vector<group_spec> out;
  std::set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::blank_line(line)) continue;
    const std::string where = path + ":" + std::to_string(lineno);
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw parse_error(where + ": invalid JSON object");
    group_spec spec;
    if (!j.contains("group_id") || !j["group_id"].is_string() ||
        j["group_id"].get<std::string>().empty())
      throw parse_error(where + ": need non-empty string group_id");
    spec.group_id = j["group_id"].get<std::string>();
    if (j.contains("category")) {
      if (!j["category"].is_string()) throw parse_error(where + ": category must be a string");
      spec.category = j["category"].get<std::string>();
    }
    spec.charge_titles = detail::string_array_field(j, "charge_titles", lineno);
    spec.statutes = detail::string_array_field(j, "statutes", lineno);
    if (spec.charge_titles.empty() && spec.statutes.empty())
      throw integrity_error(where + ": spec needs charge_titles or statutes");
    if (!seen.insert(spec.group_id).second)
      throw integrity_error(where + ": duplicate group_id " + spec.group_id);
    out.push_back(std::move(spec));
  }
  return out;
}

struct standard_mapping {
  std::map<std::string, std::vector<std::string>> groups;  // group_id -> members, corpus order
  double mapped_fraction = 0.0;
};

// A case joins a group when the group's statutes are all among the case's
// statutes and, if the group names charge titles, at least one matches.
// Cases may join several groups.
inline standard_mapping map_cases_to_standard_groups(const corpus& c,
                                                     const std::vector<group_spec>& specs) {
  standard_mapping out;
  std::size_t mapped = 0;
  for (const document& d : c.docs) {
    const std::set<std::string> statutes(d.statutes.begin(), d.statutes.end());
    const std::set<std::string> charges(d.charges.begin(), d.charges.end());
    bool any = false;
    for (const group_spec& spec : specs) {
      bool ok = true;
      for (const std::string& s : spec.statutes)
        if (!statutes.count(s)) {
          ok = false;
          break;
        }
      if (ok && !spec.charge_titles.empty()) {
        ok = false;
        for (const std::string& t : spec.charge_titles)
          if (charges.count(t)) {
            ok = true;
            break;
          }
      }
      if (ok) {
        out.groups[spec.group_id].push_back(d.doc_id);
        any = true;
      }
    }
    if (any) ++mapped;
  }
  out.mapped_fraction = c.docs.empty() ? 0.0 : double(mapped) / double(c.docs.size());
  return out;
}

struct stricter_case {
  std::string doc_id;
  std::vector<subfactor> key;  // shared name order across all cases
};

struct stricter_result {
  std::size_t prefix_len = 0;  // key prefix length the groups were formed at
  std::vector<std::vector<std::string>> groups;  // each size >= 2; members in input order
};

// Relevance-group construction with relaxation: group on the full
// subfactor-option key; while nothing groups, retry on successively
// shorter key prefixes. All groups of size >= 2 at the first productive
// prefix length are returned (pass single_group to keep only the first,
// by key order).
inline stricter_result stricter_grouping(const std::vector<stricter_case>& cases,
                                         bool single_group = false) {
  stricter_result out;
  if (cases.empty()) return out;
  const stricter_case& head = cases.front();
  for (const stricter_case& sc : cases) {
    if (sc.key.size() != head.key.size())
      throw domain_error("stricter_grouping: inconsistent subfactor order for " + sc.doc_id);
    for (std::size_t i = 0; i < sc.key.size(); ++i)
      if (sc.key[i].name != head.key[i].name)
        throw domain_error("stricter_grouping: inconsistent subfactor order for " + sc.doc_id);
  }

  const std::size_t full = head.key.size();
  for (std::size_t r = full;; --r) {
    std::map<std::vector<int>, std::vector<std::string>> buckets;
    for (const stricter_case& sc : cases) {
      std::vector<int> prefix;
      prefix.reserve(r);
      for (std::size_t i = 0; i < r; ++i) prefix.push_back(sc.key[i].option);
      buckets[std::move(prefix)].push_back(sc.doc_id);
    }
    for (auto& [_, members] : buckets)
      if (members.size() >= 2) out.groups.push_back(std::move(members));
    if (!out.groups.empty()) {
      out.prefix_len = r;
      if (single_group && out.groups.size() > 1) out.groups.resize(1);
      return out;
    }
    if (r <= 1) break;
  }
  return out;
}

struct doc_group {
  std::string group_id;
  std::string category;
  std::vector<std::string> members;
};

struct qrels_build {
  qrels rels;
  std::vector<std::string> queries;   // one per non-singleton group, group order
  std::vector<std::string> warnings;  // skipped singletons
};

// Query selection policy: the lexicographically first member of each
// group is the query document (and the query id); the rest are its
// relevant set. Singleton groups are skipped with a warning.
inline qrels_build build_qrels(const std::vector<doc_group>& groups) {
  if (groups.empty()) throw domain_error("build_qrels: no groups");
  qrels_build out;
  for (const doc_group& g : groups) {
    std::vector<std::string> members = g.members;
    std::sort(members.begin(), members.end());
    members.erase(std::unique(members.begin(), members.end()), members.end());
    if (members.size() < 2) {
      out.warnings.push_back("group " + g.group_id + " has fewer than 2 members, skipped");
      continue;
    }
    const std::string& query = members.front();
    auto [it, inserted] = out.rels.relevant.try_emplace(query);
    if (!inserted) {
      out.warnings.push_back("query " + query + " already produced by an earlier group, merged");
    } else {
      out.queries.push_back(query);
      out.rels.query_doc[query] = query;
      if (!g.category.empty()) out.rels.category[query] = g.category;
    }
    it->second.insert(members.begin() + 1, members.end());
  }
  return out;
}

struct eval_report {
  std::vector<std::pair<std::string, double>> per_query;  // qrels order (lexicographic)
  std::map<std::string, double> per_category;
  double total = 0.0;
  std::vector<std::string> flagged;  // qrels queries absent from the run
};

// Precision at k with the query document removed from its own ranking
// before truncation; the denominator is always k. Per-category and total
// values are macro averages over queries.
inline eval_report evaluate(const std::vector<run_record>& run, const qrels& q, std::size_t k = 5) {
  if (k < 1) throw domain_error("evaluate: k must be >= 1");
  std::map<std::string, std::vector<run_record>> by_query;
  for (const run_record& r : run) by_query[r.query_id].push_back(r);
  for (auto& [_, records] : by_query)
    std::sort(records.begin(), records.end(),
              [](const run_record& a, const run_record& b) { return a.rank < b.rank; });

  eval_report rep;
  std::map<std::string, std::pair<double, std::size_t>> cat_sums;
  double sum = 0.0;
  for (const auto& [query, relevant] : q.relevant) {
    double p = 0.0;
    auto it = by_query.find(query);
    if (it == by_query.end()) {
      rep.flagged.push_back(query);
    } else {
      const std::string& self = q.query_doc.at(query);
      std::size_t taken = 0, hits = 0;
      for (const run_record& r : it->second) {
        if (r.doc_id == self) continue;
        if (relevant.count(r.doc_id)) ++hits;
        if (++taken == k) break;
      }
      p = double(hits) / double(k);
    }
    rep.per_query.emplace_back(query, p);
    sum += p;
    auto cat = q.category.find(query);
    if (cat != q.category.end()) {
      cat_sums[cat->second].first += p;
      cat_sums[cat->second].second += 1;
    }
  }
  rep.total = q.relevant.empty() ? 0.0 : sum / double(q.relevant.size());
  for (const auto& [name, acc] : cat_sums) rep.per_category[name] = acc.first / double(acc.second);
  return rep;
}

}  // namespace spanret
