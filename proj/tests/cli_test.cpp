// Copyright spanret contributors. SPDX-License-Identifier: Apache-2.0
#include <sys/wait.h>

#include <gtest/gtest.h>

#include <cstdio>
#include <string>
#include <vector>

#include <json.hpp>

#include "spanret/runfile.hpp"
#include "test_util.hpp"

namespace {

struct cli_result {
  int exit_code = -1;
  std::string output;  // stdout and stderr combined
};

cli_result run_cli(const std::string& args) {
  const std::string cmd = std::string(SPANRET_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  EXPECT_NE(pipe, nullptr);
  cli_result res;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof(buf), pipe)) > 0) res.output.append(buf, n);
  const int status = pclose(pipe);
  res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return res;
}

std::string queries_jsonl(const std::vector<std::pair<std::string, std::string>>& items) {
  std::string out;
  for (const auto& [id, text] : items) {
    nlohmann::json j = {{"query_id", id}, {"text", text}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

}  // namespace

TEST(CliPipeline, IndexSearchEvalEndToEnd) {
  testutil::temp_dir tmp;
  const auto paired = testutil::make_paired(8);
  testutil::write_file(tmp.file("corpus.jsonl"), testutil::corpus_jsonl(paired.c));

  std::vector<std::pair<std::string, std::string>> queries;
  std::string qrels;
  for (std::size_t i = 0; i < paired.markers.size(); ++i) {
    char qid[16], rid[16];
    std::snprintf(qid, sizeof(qid), "q%03zu", i + 1);
    std::snprintf(rid, sizeof(rid), "r%03zu", i + 1);
    queries.emplace_back(qid, paired.markers[i] + " " + paired.markers[i]);
    qrels += std::string(qid) + "\t" + rid + "\n";
  }
  testutil::write_file(tmp.file("queries.jsonl"), queries_jsonl(queries));
  testutil::write_file(tmp.file("qrels.tsv"), qrels);

  const auto indexed = run_cli("index --corpus " + tmp.file("corpus.jsonl") + " --out " +
                               tmp.file("idx") + " --reversed");
  ASSERT_EQ(indexed.exit_code, 0) << indexed.output;
  EXPECT_NE(indexed.output.find("indexed 16 documents"), std::string::npos) << indexed.output;

  const auto searched =
      run_cli("search --index " + tmp.file("idx") + " --queries " + tmp.file("queries.jsonl") +
              " --k 5 --out " + tmp.file("run.tsv"));
  ASSERT_EQ(searched.exit_code, 0) << searched.output;

  const auto run = spanret::read_run_file(tmp.file("run.tsv"));
  ASSERT_FALSE(run.empty());

  const auto evaled = run_cli("eval --run " + tmp.file("run.tsv") + " --qrels " +
                              tmp.file("qrels.tsv") + " --k 1");
  ASSERT_EQ(evaled.exit_code, 0) << evaled.output;
  EXPECT_EQ(evaled.output, "total 1.0000\n");
}

TEST(CliPipeline, RepeatedRunsAreByteIdentical) {
  testutil::temp_dir tmp;
  const auto paired = testutil::make_paired(4);
  testutil::write_file(tmp.file("corpus.jsonl"), testutil::corpus_jsonl(paired.c));
  testutil::write_file(tmp.file("queries.jsonl"),
                       queries_jsonl({{"q001", paired.markers[0] + " " + paired.markers[0]}}));

  for (const char* round : {"a", "b"}) {
    const std::string dir = tmp.file(round);
    ASSERT_EQ(run_cli("index --corpus " + tmp.file("corpus.jsonl") + " --out " + dir +
                      " --reversed")
                  .exit_code,
              0);
    ASSERT_EQ(run_cli("search --index " + dir + " --queries " + tmp.file("queries.jsonl") +
                      " --k 5 --out " + dir + "/run.tsv")
                  .exit_code,
              0);
  }
  EXPECT_EQ(testutil::read_file(tmp.file("a") + "/fm.idx"),
            testutil::read_file(tmp.file("b") + "/fm.idx"));
  EXPECT_EQ(testutil::read_file(tmp.file("a") + "/seq.bin"),
            testutil::read_file(tmp.file("b") + "/seq.bin"));
  const std::string run_a = testutil::read_file(tmp.file("a") + "/run.tsv");
  EXPECT_EQ(run_a, testutil::read_file(tmp.file("b") + "/run.tsv"));
  EXPECT_FALSE(run_a.empty());
}

TEST(CliPipeline, EvalTextbookFixture) {
  testutil::temp_dir tmp;
  testutil::write_file(tmp.file("run.tsv"),
                       "q1\td1\t1\t0.9000\n"
                       "q1\td2\t2\t0.8000\n"
                       "q1\td3\t3\t0.7000\n"
                       "q1\td4\t4\t0.6000\n"
                       "q1\td5\t5\t0.5000\n");
  testutil::write_file(tmp.file("qrels.tsv"), "q1\td1\ttheft\nq1\td3\ttheft\n");
  const auto res = run_cli("eval --run " + tmp.file("run.tsv") + " --qrels " + tmp.file("qrels.tsv"));
  ASSERT_EQ(res.exit_code, 0) << res.output;
  EXPECT_EQ(res.output, "theft 0.4000\ntotal 0.4000\n");
}

TEST(CliPipeline, Bm25SubcommandWritesRun) {
  testutil::temp_dir tmp;
  testutil::write_file(tmp.file("corpus.jsonl"),
                       testutil::corpus_jsonl(testutil::make_corpus(
                           {"the cat sat on the mat", "dogs chase the red ball", "cats nap"})));
  testutil::write_file(tmp.file("queries.jsonl"), queries_jsonl({{"q1", "the cat"}}));
  const auto res = run_cli("bm25 --corpus " + tmp.file("corpus.jsonl") + " --queries " +
                           tmp.file("queries.jsonl") + " --k 2 --out " + tmp.file("run.tsv"));
  ASSERT_EQ(res.exit_code, 0) << res.output;
  const auto run = spanret::read_run_file(tmp.file("run.tsv"));
  ASSERT_EQ(run.size(), 2u);
  EXPECT_EQ(run[0].query_id, "q1");
  EXPECT_EQ(run[0].doc_id, "d001");
  EXPECT_EQ(run[0].rank, 1u);
}

TEST(CliPipeline, GroupsStandardAndStricterWithQrels) {
  testutil::temp_dir tmp;
  std::string corpus;
  auto doc = [](const std::string& id, const std::string& text, const std::string& statute,
                int opt1, int opt2) {
    nlohmann::json j = {{"doc_id", id},
                        {"text", text},
                        {"charges", {"theft"}},
                        {"statutes", {statute}},
                        {"factors", {{{"name", "weapon"}, {"option", opt1}},
                                     {{"name", "night"}, {"option", opt2}}}}};
    return j.dump() + "\n";
  };
  corpus += doc("c1", "case one text", "329", 1, 1);
  corpus += doc("c2", "case two text", "329", 1, 1);
  corpus += doc("c3", "case three text", "329", 1, 2);
  corpus += doc("c4", "case four text", "999", 1, 1);
  testutil::write_file(tmp.file("corpus.jsonl"), corpus);
  testutil::write_file(tmp.file("specs.jsonl"),
                       R"({"group_id":"g-theft","category":"theft","charge_titles":["theft"],"statutes":["329"]})"
                       "\n");

  const auto standard = run_cli("groups --corpus " + tmp.file("corpus.jsonl") + " --specs " +
                                tmp.file("specs.jsonl") + " --out " + tmp.file("std.jsonl"));
  ASSERT_EQ(standard.exit_code, 0) << standard.output;
  EXPECT_NE(standard.output.find("mapped_fraction 0.7500"), std::string::npos) << standard.output;
  EXPECT_NE(standard.output.find("groups 1"), std::string::npos);
  const auto std_line = nlohmann::json::parse(testutil::read_file(tmp.file("std.jsonl")));
  EXPECT_EQ(std_line["group_id"], "g-theft");
  EXPECT_EQ(std_line["members"], (nlohmann::json{"c1", "c2", "c3"}));

  const auto stricter = run_cli("groups --corpus " + tmp.file("corpus.jsonl") + " --specs " +
                                tmp.file("specs.jsonl") + " --mode stricter --out " +
                                tmp.file("strict.jsonl") + " --qrels " + tmp.file("qrels.tsv"));
  ASSERT_EQ(stricter.exit_code, 0) << stricter.output;
  const auto strict_line = nlohmann::json::parse(testutil::read_file(tmp.file("strict.jsonl")));
  EXPECT_EQ(strict_line["group_id"], "g-theft/s1");
  EXPECT_EQ(strict_line["prefix_len"], 2);
  EXPECT_EQ(strict_line["members"], (nlohmann::json{"c1", "c2"}));
  EXPECT_EQ(testutil::read_file(tmp.file("qrels.tsv")), "c1\tc2\ttheft\n");
}

TEST(CliPipeline, TraindataCapsApply) {
  testutil::temp_dir tmp;
  std::string text;
  for (int i = 0; i < 20; ++i)
    text += "element number " + std::string(1, static_cast<char>('a' + i)) + ". ";
  testutil::write_file(tmp.file("corpus.jsonl"),
                       testutil::corpus_jsonl(testutil::make_corpus({text})));
  const auto res = run_cli("traindata --corpus " + tmp.file("corpus.jsonl") + " --out " +
                           tmp.file("pairs.jsonl") + " --max-element-pairs 7");
  ASSERT_EQ(res.exit_code, 0) << res.output;
  EXPECT_NE(res.output.find("wrote 22 pairs"), std::string::npos) << res.output;

  std::istringstream in(testutil::read_file(tmp.file("pairs.jsonl")));
  std::string line;
  std::size_t qe = 0, ee = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    (j["kind"] == "query-element" ? qe : ee)++;
  }
  EXPECT_EQ(qe, 15u);
  EXPECT_EQ(ee, 7u);
}

TEST(CliErrors, BadInvocationsExitOne) {
  testutil::temp_dir tmp;
  EXPECT_EQ(run_cli("nosuchcommand").exit_code, 1);
  EXPECT_EQ(run_cli("eval --run /nonexistent/run.tsv --qrels /nonexistent/q.tsv").exit_code, 1);
  EXPECT_EQ(run_cli("index --corpus /nonexistent/corpus.jsonl --out " + tmp.file("idx")).exit_code,
            1);
  EXPECT_EQ(run_cli("search --index " + tmp.file("idx")).exit_code, 1);  // missing required flags
  EXPECT_EQ(run_cli("").exit_code, 1);  // subcommand required
}

TEST(CliErrors, SearchOnNonReversedIndexExitsOne) {
  testutil::temp_dir tmp;
  testutil::write_file(tmp.file("corpus.jsonl"),
                       testutil::corpus_jsonl(testutil::make_corpus({"plain text corpus here"})));
  testutil::write_file(tmp.file("queries.jsonl"), queries_jsonl({{"q1", "text"}}));
  ASSERT_EQ(run_cli("index --corpus " + tmp.file("corpus.jsonl") + " --out " + tmp.file("idx"))
                .exit_code,
            0);
  const auto res = run_cli("search --index " + tmp.file("idx") + " --queries " +
                           tmp.file("queries.jsonl") + " --k 5 --out " + tmp.file("run.tsv"));
  EXPECT_EQ(res.exit_code, 1);
  EXPECT_NE(res.output.find("--reversed"), std::string::npos) << res.output;
}
