#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>

#include <nlohmann/json.hpp>

#include "humt/humt.h"
#include "support.hpp"

using humt::testing::read_text;
using humt::testing::TempDir;
using humt::testing::write_text;
using nlohmann::json;

namespace {

int run(const std::string& args, const TempDir& dir) {
  const std::string cmd = std::string(HUMT_CLI_PATH) + " " + args + " >" + (dir / "stdout.txt").string() +
                          " 2>" + (dir / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string q(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

std::string sha(const std::filesystem::path& p) {
  char* hex = nullptr;
  if (humt_file_sha256(p.c_str(), &hex) != HUMT_OK) return {};
  std::string s(hex);
  humt_string_free(hex);
  return s;
}

std::size_t lines(const std::filesystem::path& p) {
  const auto s = read_text(p);
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

// Table backend in which chosen responses sound less human than rejected ones.
void write_fixture(const TempDir& dir, int pairs) {
  json seq = json::object();
  std::string data;
  for (int i = 0; i < pairs; ++i) {
    const std::string chosen = "Here is the function " + std::to_string(i) + ".";
    const std::string rejected = "I think we should talk " + std::to_string(i) + ".";
    data += json{{"pair_id", "p" + std::to_string(i)}, {"prompt", "question " + std::to_string(i)},
                 {"chosen", chosen}, {"rejected", rejected}}
                .dump() +
            "\n";
    seq["He said " + chosen] = 0.01;
    seq["She said " + chosen] = 0.01;
    seq["It said " + chosen] = 0.04 + 0.001 * i;
    seq["He said " + rejected] = 0.03 + 0.001 * i;
    seq["She said " + rejected] = 0.02;
    seq["It said " + rejected] = 0.01;
  }
  write_text(dir / "pairs.jsonl", data);
  write_text(dir / "table.json", json{{"model_id", "fixture"}, {"sequence", seq}}.dump());
}

}  // namespace

TEST(Cli, ScoreTextsWritesTableAndManifest) {
  TempDir dir;
  write_text(dir / "t.jsonl", R"({"text_id": "a", "text": "I'd like to eat healthy."})" "\n");
  write_text(dir / "table.json",
             R"({"sequence": {"He said I'd like to eat healthy.": 0.02, "She said I'd like to eat healthy.": 0.02,
                 "It said I'd like to eat healthy.": 0.01}})");
  ASSERT_EQ(run("score --input " + q(dir / "t.jsonl") + " --backend " + q(dir / "table.json") + " --out " +
                    q(dir / "s.tsv"),
                dir),
            0)
      << read_text(dir / "stderr.txt");
  const auto tsv = read_text(dir / "s.tsv");
  EXPECT_EQ(tsv.substr(0, tsv.find('\n')), "text_id\thumt");
  const double v = std::stod(tsv.substr(tsv.rfind('\t') + 1));
  EXPECT_NEAR(v, std::log(4.0), 1e-15);

  const auto manifest = json::parse(read_text(dir / "s.tsv.manifest.json"));
  EXPECT_EQ(manifest["command"], "score");
  EXPECT_EQ(manifest["outputs"][0]["sha256"], sha(dir / "s.tsv"));
  EXPECT_EQ(manifest["config"]["truncate"], "300");
  EXPECT_TRUE(manifest.contains("config_sha256"));
  EXPECT_EQ(manifest["inputs"][(dir / "t.jsonl").string()], sha(dir / "t.jsonl"));
}

TEST(Cli, ExitCodes) {
  TempDir dir;
  write_text(dir / "t.jsonl", "{\"text\": \"ok\"}\n{\"text\": \"dead\"}\n{\"body\": \"no text field\"}\n");
  write_text(dir / "table.json", R"({"sequence": {"It said dead": 0.0}})");
  const std::string base = "score --input " + q(dir / "t.jsonl") + " --backend " + q(dir / "table.json");
  // One row fails and one line is rejected: partial success.
  EXPECT_EQ(run(base + " --out " + q(dir / "s.tsv"), dir), 2);
  EXPECT_EQ(lines(dir / "s.tsv.failures.jsonl"), 1u);
  EXPECT_NE(read_text(dir / "s.tsv").find("t:2\t\n"), std::string::npos);
  const auto manifest = json::parse(read_text(dir / "s.tsv.manifest.json"));
  EXPECT_EQ(manifest["ingest_rejections"], 1);
  ASSERT_EQ(manifest["rejected_lines"].size(), 1u);
  EXPECT_EQ(manifest["rejected_lines"][0]["line"], 3);
  EXPECT_EQ(run(base + " --out " + q(dir / "s2.tsv") + " --fail-fast", dir), 1);
  EXPECT_EQ(run(base + " --out " + q(dir / "s3.tsv") + " --dimensions nope", dir), 1);
  EXPECT_NE(read_text(dir / "stderr.txt").find("registered: humt, social, warmth, gender, status"),
            std::string::npos);
  EXPECT_EQ(run("score --input " + q(dir / "missing.jsonl") + " --backend " + q(dir / "table.json") + " --out x", dir),
            1);
  EXPECT_EQ(run("no-such-command", dir), 1);
  EXPECT_EQ(run("--version", dir), 0);
}

TEST(Cli, WarmCacheGivesIdenticalScores) {
  TempDir dir;
  write_fixture(dir, 20);
  const std::string base = "score --kind pairs --input " + q(dir / "pairs.jsonl") + " --backend " +
                           q(dir / "table.json") + " --cache " + q(dir / "c.bin") + " --dimensions all";
  ASSERT_EQ(run(base + " --out " + q(dir / "cold.tsv"), dir), 0) << read_text(dir / "stderr.txt");
  ASSERT_EQ(run("--jobs 4 " + base + " --out " + q(dir / "warm.tsv"), dir), 0);
  EXPECT_EQ(sha(dir / "cold.tsv"), sha(dir / "warm.tsv"));
  const auto warm = json::parse(read_text(dir / "warm.tsv.manifest.json"));
  EXPECT_EQ(warm["backend"]["cache"]["misses"], 0);
  ASSERT_EQ(run("cache stats --cache " + q(dir / "c.bin"), dir), 0);
  const auto stats = json::parse(read_text(dir / "stdout.txt"));
  EXPECT_EQ(stats["entries"], warm["backend"]["cache"]["entries"]);
  ASSERT_EQ(run("cache purge --cache " + q(dir / "c.bin"), dir), 0);
  EXPECT_FALSE(std::filesystem::exists(dir / "c.bin"));
}

TEST(Cli, PreferencePipeline) {
  TempDir dir;
  write_fixture(dir, 40);
  ASSERT_EQ(run("score --kind pairs --input " + q(dir / "pairs.jsonl") + " --backend " + q(dir / "table.json") +
                    " --dimensions humt,social,status --out " + q(dir / "s.tsv"),
                dir),
            0);
  ASSERT_EQ(run("analyze-prefs --pairs " + q(dir / "pairs.jsonl") + " --scores " + q(dir / "s.tsv") + " --out " +
                    q(dir / "prefs.json"),
                dir),
            0);
  const auto prefs = json::parse(read_text(dir / "prefs.json"));
  EXPECT_LT(prefs["overall"]["mean_a"].get<double>(), prefs["overall"]["mean_b"].get<double>());

  const std::string dpo = "build-dpo --pairs " + q(dir / "pairs.jsonl") + " --scores " + q(dir / "s.tsv");
  ASSERT_EQ(run(dpo + " --count 25 --seed 7 --out " + q(dir / "a.jsonl"), dir), 0) << read_text(dir / "stderr.txt");
  ASSERT_EQ(run(dpo + " --count 25 --seed 7 --out " + q(dir / "b.jsonl"), dir), 0);
  EXPECT_EQ(lines(dir / "a.jsonl"), 25u);
  EXPECT_EQ(sha(dir / "a.jsonl"), sha(dir / "b.jsonl"));
  EXPECT_EQ(run(dpo + " --count 25 --out " + q(dir / "c.jsonl"), dir), 1);  // no seed
  EXPECT_EQ(run(dpo + " --count 41 --seed 7 --out " + q(dir / "c.jsonl"), dir), 1);
  EXPECT_NE(read_text(dir / "stderr.txt").find("eligible 40 < requested 41"), std::string::npos);
  EXPECT_EQ(run(dpo + " --count 5 --seed 7 --variant maxtone --out " + q(dir / "c.jsonl"), dir), 1);
  ASSERT_EQ(run(dpo + " --count 40 --seed 7 --variant random --out " + q(dir / "r.jsonl"), dir), 0);
  const auto manifest = json::parse(read_text(dir / "r.jsonl.manifest.json"));
  EXPECT_EQ(manifest["variant"], "random");

  ASSERT_EQ(run("correlate --scores " + q(dir / "s.tsv") + " --out " + q(dir / "c.json") + " --csv " +
                    q(dir / "c.csv"),
                dir),
            0);
  EXPECT_EQ(json::parse(read_text(dir / "c.json"))["pairs"].size(), 3u);
  EXPECT_EQ(lines(dir / "c.csv"), 4u);
}

TEST(Cli, GenerationsFileIsScoredWithoutRejections) {
  TempDir dir;
  write_text(dir / "gen.jsonl", "{\"prompt\": \"a\", \"output\": \"one\"}\n{\"prompt\": \"b\", \"output\": \"two\"}\n");
  write_text(dir / "table.json", R"({"floor": 0.001})");
  ASSERT_EQ(run("score --input " + q(dir / "gen.jsonl") + " --map text=output --backend " + q(dir / "table.json") +
                    " --out " + q(dir / "g.jsonl"),
                dir),
            0);
  EXPECT_EQ(lines(dir / "g.jsonl"), 2u);
  const auto first = json::parse(read_text(dir / "g.jsonl").substr(0, read_text(dir / "g.jsonl").find('\n')));
  EXPECT_EQ(first["dimension"], "humt");
  EXPECT_NEAR(first["value"].get<double>(), std::log(2.0), 1e-12);
}

TEST(Cli, PrepareSplitsByPrompt) {
  TempDir dir;
  std::string data;
  for (int i = 0; i < 60; ++i) {
    data += json{{"pair_id", "p" + std::to_string(i)}, {"prompt", "q" + std::to_string(i % 50)}, {"chosen", "a"},
                 {"rejected", "b"}}
                .dump() +
            "\n";
  }
  write_text(dir / "in.jsonl", data);
  const std::string base = "prepare --input " + q(dir / "in.jsonl") + " --out " + q(dir / "clean.jsonl");
  EXPECT_EQ(run(base + " --split-ratio 0.9", dir), 1);  // split needs a seed
  ASSERT_EQ(run(base + " --dedup --split-ratio 0.9 --seed 3", dir), 0) << read_text(dir / "stderr.txt");
  EXPECT_EQ(lines(dir / "clean.jsonl"), 50u);
  EXPECT_EQ(lines(dir / "clean.jsonl.train.jsonl"), 45u);
  EXPECT_EQ(lines(dir / "clean.jsonl.test.jsonl"), 5u);
}

TEST(Cli, SmallAnalyses) {
  TempDir dir;
  write_text(dir / "t.jsonl", "{\"text_id\": \"a\", \"text\": \"I did\"}\n{\"text_id\": \"b\", \"text\": \"it is\"}\n"
                              "{\"text_id\": \"c\", \"text\": \"I am\"}\n");
  ASSERT_EQ(run("term --input " + q(dir / "t.jsonl") + " --term i --term 'it is'", dir), 0);
  const auto term = json::parse(read_text(dir / "stdout.txt"));
  EXPECT_NEAR(term["terms"][0]["proportion"].get<double>(), 2.0 / 3.0, 1e-15);

  write_text(dir / "red.tsv", "text_id\thumt\nq1\t0.0\nq2\t0.1\nq3\t0.2\n");
  write_text(dir / "base.tsv", "text_id\thumt\nq1\t0.5\nq2\t0.1\nq3\t0.3\n");
  ASSERT_EQ(run("epsilon-filter --reduced " + q(dir / "red.tsv") + " --baseline " + q(dir / "base.tsv"), dir), 0);
  EXPECT_EQ(json::parse(read_text(dir / "stdout.txt"))["prompts"], (json{"q1", "q3"}));

  std::string ann;
  for (int i = 0; i < 4; ++i) ann += json{{"item_id", "q" + std::to_string(i)}, {"labels", {1, 1}}}.dump() + "\n";
  ann += json{{"item_id", "q9"}, {"labels", {1}}}.dump() + "\n";
  write_text(dir / "ann.jsonl", ann);
  EXPECT_EQ(run("validate --annotations " + q(dir / "ann.jsonl") + " --scores " + q(dir / "red.tsv"), dir), 1);
}
