// Copyright spanret contributors. SPDX-License-Identifier: Apache-2.0
//
// Single command-line entry point: index, search, bm25, groups, eval,
// traindata. Exit codes: 0 success, 1 input/configuration error, 2
// internal invariant violation.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "spanret/bench.hpp"
#include "spanret/bm25.hpp"
#include "spanret/corpus.hpp"
#include "spanret/decode.hpp"
#include "spanret/errors.hpp"
#include "spanret/external.hpp"
#include "spanret/fm_index.hpp"
#include "spanret/model.hpp"
#include "spanret/retrieve.hpp"
#include "spanret/runfile.hpp"
#include "spanret/seqio.hpp"
#include "spanret/traindata.hpp"

namespace {

using namespace spanret;

first_token_config parse_first_token(const std::string& arg) {
  first_token_config cfg;
  if (arg == "all") {
    cfg.policy = first_token_policy::all;
  } else if (arg == "stoplist") {
    cfg.policy = first_token_policy::stoplist;
  } else if (arg.rfind("allowlist:", 0) == 0) {
    cfg.policy = first_token_policy::allowlist;
    cfg.allowlist_path = arg.substr(10);
    if (cfg.allowlist_path.empty()) throw config_error("allowlist policy needs a file path");
  } else {
    throw config_error("unknown first-token policy: " + arg +
                       " (expected all, stoplist, or allowlist:FILE)");
  }
  return cfg;
}

struct index_opts {
  std::string corpus_path, out_dir;
  std::uint32_t sample_rate = 32;
  bool reversed = false;
};

void run_index(const index_opts& o) {
  const corpus c = ingest_jsonl(o.corpus_path);
  const symbol_sequence seq = concat(c);
  const fm_index idx = fm_index::build(seq, o.sample_rate, o.reversed);
  std::error_code ec;
  std::filesystem::create_directories(o.out_dir, ec);
  if (ec) throw error("cannot create " + o.out_dir + ": " + ec.message());
  idx.save_file(o.out_dir + "/fm.idx");
  save_sequence_file(o.out_dir + "/seq.bin", seq);
  std::cout << "indexed " << c.docs.size() << " documents, " << seq.size() << " symbols\n";
}

struct search_opts {
  std::string index_dir, model = "ngram", queries_path, out_path;
  std::size_t k = 5;
  std::uint32_t beam = 10, max_span = 32, jobs = 1;
  std::string first_token = "stoplist";
};

void run_search(const search_opts& o) {
  const fm_index idx = fm_index::load_file(o.index_dir + "/fm.idx");
  if (!idx.reversed())
    throw config_error("index at " + o.index_dir +
                       " was built without --reversed; search needs a reversed index");
  decode_config cfg;
  cfg.beam_width = o.beam;
  cfg.max_span_len = o.max_span;
  cfg.first_token = parse_first_token(o.first_token);

  std::unique_ptr<token_model> model;
  std::uint32_t jobs = std::max<std::uint32_t>(1, o.jobs);
  if (o.model == "ngram") {
    auto m = std::make_unique<ngram_model>();
    m->train(load_sequence_file(o.index_dir + "/seq.bin"));
    model = std::move(m);
  } else if (o.model == "uniform") {
    model = std::make_unique<uniform_model>();
  } else if (o.model.rfind("external:", 0) == 0) {
    const std::string cmd = o.model.substr(9);
    if (cmd.empty()) throw config_error("external model needs a command");
    model = std::make_unique<external_model>(cmd);
    if (jobs > 1) {
      std::cerr << "external model sessions are serial; running with --jobs 1\n";
      jobs = 1;
    }
  } else {
    throw config_error("unknown model: " + o.model +
                       " (expected ngram, uniform, or external:CMD)");
  }

  const std::vector<query_item> queries = read_queries(o.queries_path);
  std::vector<retrieval_output> outputs(queries.size());
  if (jobs <= 1) {
    for (std::size_t i = 0; i < queries.size(); ++i)
      outputs[i] = retrieve(idx, *model, queries[i].text, cfg, o.k);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;
    auto worker = [&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= queries.size()) return;
        try {
          outputs[i] = retrieve(idx, *model, queries[i].text, cfg, o.k);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mu);
          if (!failure) failure = std::current_exception();
          return;
        }
      }
    };
    std::vector<std::thread> pool;
    for (std::uint32_t t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }

  std::vector<run_record> records;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    if (!outputs[i].diagnostic.empty())
      std::cerr << "query " << queries[i].query_id << ": " << outputs[i].diagnostic << "\n";
    std::uint32_t rank = 1;
    for (const retrieval_result& r : outputs[i].results)
      records.push_back({queries[i].query_id, r.doc_id, rank++, r.score});
  }
  write_run_file(o.out_path, records);
}

struct bm25_opts {
  std::string corpus_path, queries_path, out_path;
  std::size_t k = 5;
  double k1 = 1.2, b = 0.75;
};

void run_bm25(const bm25_opts& o) {
  const corpus c = ingest_jsonl(o.corpus_path);
  const inverted_index idx = inverted_index::build(c);
  std::vector<run_record> records;
  for (const query_item& q : read_queries(o.queries_path)) {
    std::uint32_t rank = 1;
    for (const ranked_doc& r : idx.search(q.text, o.k, o.k1, o.b))
      records.push_back({q.query_id, r.doc_id, rank++, r.score});
  }
  write_run_file(o.out_path, records);
}

struct groups_opts {
  std::string corpus_path, specs_path, mode = "standard", out_path, qrels_path;
  bool single_group = false;
};

void run_groups(const groups_opts& o) {
  if (o.mode != "standard" && o.mode != "stricter")
    throw config_error("unknown mode: " + o.mode + " (expected standard or stricter)");
  const corpus c = ingest_jsonl(o.corpus_path);
  const std::vector<group_spec> specs = load_group_specs(o.specs_path);
  const standard_mapping mapping = map_cases_to_standard_groups(c, specs);

  std::map<std::string, const group_spec*> spec_by_id;
  for (const group_spec& s : specs) spec_by_id[s.group_id] = &s;
  std::map<std::string, const document*> doc_by_id;
  for (const document& d : c.docs) doc_by_id[d.doc_id] = &d;

  std::vector<doc_group> emitted;
  std::ofstream out(o.out_path, std::ios::trunc);
  if (!out) throw error("cannot open " + o.out_path + " for writing");
  for (const auto& [group_id, members] : mapping.groups) {
    const std::string& category = spec_by_id.at(group_id)->category;
    if (o.mode == "standard") {
      nlohmann::json j = {{"group_id", group_id}, {"category", category}, {"members", members}};
      out << j.dump() << '\n';
      emitted.push_back({group_id, category, members});
      continue;
    }
    std::vector<stricter_case> cases;
    for (const std::string& doc_id : members) {
      const document* d = doc_by_id.at(doc_id);
      if (!d->factors.empty()) cases.push_back({doc_id, d->factors});
    }
    if (cases.size() < 2) continue;
    const stricter_result res = stricter_grouping(cases, o.single_group);
    for (std::size_t g = 0; g < res.groups.size(); ++g) {
      const std::string id = group_id + "/s" + std::to_string(g + 1);
      nlohmann::json j = {{"group_id", id},
                          {"category", category},
                          {"prefix_len", res.prefix_len},
                          {"members", res.groups[g]}};
      out << j.dump() << '\n';
      emitted.push_back({id, category, res.groups[g]});
    }
  }
  if (!out) throw error("write failed: " + o.out_path);

  std::cout << "mapped_fraction " << format_fixed4(mapping.mapped_fraction) << "\n";
  std::cout << "groups " << emitted.size() << "\n";

  if (!o.qrels_path.empty()) {
    if (emitted.empty()) throw error("no groups formed, cannot build qrels");
    const qrels_build built = build_qrels(emitted);
    for (const std::string& w : built.warnings) std::cerr << "warning: " << w << "\n";
    write_qrels_file(o.qrels_path, built.rels);
  }
}

struct eval_opts {
  std::string run_path, qrels_path;
  std::size_t k = 5;
};

void run_eval(const eval_opts& o) {
  const std::vector<run_record> run = read_run_file(o.run_path);
  const qrels q = read_qrels_file(o.qrels_path);
  const eval_report rep = evaluate(run, q, o.k);
  for (const std::string& f : rep.flagged)
    std::cerr << "warning: query " << f << " missing from run, scored 0\n";
  for (const auto& [category, value] : rep.per_category)
    std::cout << category << " " << format_fixed4(value) << "\n";
  std::cout << "total " << format_fixed4(rep.total) << "\n";
}

struct traindata_opts {
  std::string corpus_path, out_path, extractor = "rule", first_token = "stoplist";
  std::size_t max_query_pairs = 15, max_element_pairs = 5;
};

void run_traindata(const traindata_opts& o) {
  const corpus c = ingest_jsonl(o.corpus_path);
  const first_token_filter filter(parse_first_token(o.first_token));
  element_extractor extract;
  std::unique_ptr<external_extractor_session> session;
  if (o.extractor == "rule") {
    extract = rule_based_extractor();
  } else if (o.extractor.rfind("external:", 0) == 0) {
    const std::string cmd = o.extractor.substr(9);
    if (cmd.empty()) throw config_error("external extractor needs a command");
    session = std::make_unique<external_extractor_session>(cmd);
    extract = [&session](const std::string& text) { return session->extract(text); };
  } else {
    throw config_error("unknown extractor: " + o.extractor +
                       " (expected rule or external:CMD)");
  }
  const std::vector<training_pair> pairs =
      build_ssft_pairs(c, extract, filter, o.max_query_pairs, o.max_element_pairs);
  write_training_pairs(o.out_path, pairs);
  std::cout << "wrote " << pairs.size() << " pairs\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"corpus-grounded generative retrieval toolkit"};
  app.require_subcommand(1);

  index_opts io;
  auto* cmd_index = app.add_subcommand("index", "build an FM-index directory from a corpus");
  cmd_index->add_option("--corpus", io.corpus_path, "corpus JSONL file")->required();
  cmd_index->add_option("--out", io.out_dir, "output index directory")->required();
  cmd_index->add_option("--sample-rate", io.sample_rate, "suffix array sample rate");
  cmd_index->add_flag("--reversed", io.reversed, "index the reversed sequence (needed by search)");

  search_opts so;
  auto* cmd_search = app.add_subcommand("search", "generative retrieval over an index");
  cmd_search->add_option("--index", so.index_dir, "index directory")->required();
  cmd_search->add_option("--model", so.model, "ngram | uniform | external:CMD");
  cmd_search->add_option("--queries", so.queries_path, "queries JSONL file")->required();
  cmd_search->add_option("--k", so.k, "results per query")->required();
  cmd_search->add_option("--out", so.out_path, "output run file")->required();
  cmd_search->add_option("--beam", so.beam, "beam width");
  cmd_search->add_option("--max-span", so.max_span, "maximum span length in symbols");
  cmd_search->add_option("--first-token", so.first_token, "all | stoplist | allowlist:FILE");
  cmd_search->add_option("--jobs", so.jobs, "parallel query workers (built-in models only)");

  bm25_opts bo;
  auto* cmd_bm25 = app.add_subcommand("bm25", "BM25 baseline retrieval");
  cmd_bm25->add_option("--corpus", bo.corpus_path, "corpus JSONL file")->required();
  cmd_bm25->add_option("--queries", bo.queries_path, "queries JSONL file")->required();
  cmd_bm25->add_option("--k", bo.k, "results per query")->required();
  cmd_bm25->add_option("--out", bo.out_path, "output run file")->required();
  cmd_bm25->add_option("--k1", bo.k1, "BM25 k1");
  cmd_bm25->add_option("--b", bo.b, "BM25 b");

  groups_opts go;
  auto* cmd_groups = app.add_subcommand("groups", "relevance group construction");
  cmd_groups->add_option("--corpus", go.corpus_path, "corpus JSONL file")->required();
  cmd_groups->add_option("--specs", go.specs_path, "group spec JSONL file")->required();
  cmd_groups->add_option("--mode", go.mode, "standard | stricter");
  cmd_groups->add_option("--out", go.out_path, "output groups JSONL file")->required();
  cmd_groups->add_option("--qrels", go.qrels_path, "also write qrels derived from the groups");
  cmd_groups->add_flag("--single-group", go.single_group,
                       "stricter mode: keep only the first group per standard group");

  eval_opts eo;
  auto* cmd_eval = app.add_subcommand("eval", "precision-at-k evaluation");
  cmd_eval->add_option("--run", eo.run_path, "run file")->required();
  cmd_eval->add_option("--qrels", eo.qrels_path, "qrels file")->required();
  cmd_eval->add_option("--k", eo.k, "cutoff");

  traindata_opts to;
  auto* cmd_traindata = app.add_subcommand("traindata", "build self-supervised training pairs");
  cmd_traindata->add_option("--corpus", to.corpus_path, "corpus JSONL file")->required();
  cmd_traindata->add_option("--out", to.out_path, "output pairs JSONL file")->required();
  cmd_traindata->add_option("--max-query-pairs", to.max_query_pairs, "query-element cap per doc");
  cmd_traindata->add_option("--max-element-pairs", to.max_element_pairs,
                            "element-element cap per doc");
  cmd_traindata->add_option("--first-token", to.first_token, "all | stoplist | allowlist:FILE");
  cmd_traindata->add_option("--extractor", to.extractor, "rule | external:CMD");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (cmd_index->parsed()) run_index(io);
    if (cmd_search->parsed()) run_search(so);
    if (cmd_bm25->parsed()) run_bm25(bo);
    if (cmd_groups->parsed()) run_groups(go);
    if (cmd_eval->parsed()) run_eval(eo);
    if (cmd_traindata->parsed()) run_traindata(to);
  } catch (const spanret::internal_error& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  } catch (const spanret::error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
