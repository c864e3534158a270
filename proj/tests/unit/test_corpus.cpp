#include <gtest/gtest.h>

#include <set>

#include "humt/corpus.hpp"
#include "humt/error.hpp"
#include "support.hpp"

using namespace humt;
using humt::testing::TempDir;
using humt::testing::write_text;

namespace {

IngestOptions jsonl() { return {}; }

PairCorpus pairs_with_prompts(const std::vector<std::string>& prompts) {
  PairCorpus c;
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    c.records.push_back({"p" + std::to_string(i), prompts[i], "yes " + std::to_string(i), "no"});
  }
  return c;
}

// Flags the pairs it is told to and throws for the ones it is told to fail on.
class ScriptedModeration : public ModerationClient {
 public:
  std::set<std::string> flag, fail;
  std::map<std::string, int> calls;
  ModerationVerdict check(const PreferencePairRecord& r) override {
    ++calls[r.pair_id];
    if (fail.count(r.pair_id)) throw std::runtime_error("service unavailable");
    return {flag.count(r.pair_id) != 0};
  }
};

}  // namespace

TEST(Corpus, IngestJsonl) {
  TempDir dir;
  write_text(dir / "p.jsonl",
             R"({"pair_id": "a", "prompt": "q1", "chosen": "c1", "rejected": "r1", "topic": "food"})"
             "\n"
             R"({"prompt": "q2", "chosen": "c2", "rejected": "r2", "demographics": {"age": 30}})"
             "\n\n"
             R"({"prompt": "q3", "chosen": "c3", "rejected": "r3", "source": "prism"})"
             "\n");
  const auto c = ingest_pairs(dir / "p.jsonl", jsonl());
  ASSERT_EQ(c.size(), 3u);
  EXPECT_TRUE(c.rejections.empty());
  EXPECT_EQ(c.records[0].pair_id, "a");
  EXPECT_EQ(c.records[0].topic, "food");
  EXPECT_EQ(c.records[0].source, "p");
  EXPECT_EQ(c.records[1].pair_id, "p:2");
  EXPECT_EQ(c.records[1].demographics.at("age"), "30");
  EXPECT_EQ(c.records[2].pair_id, "prism:4");
}

TEST(Corpus, MissingFieldIsRejectedWithLine) {
  TempDir dir;
  write_text(dir / "p.jsonl",
             R"({"prompt": "q1", "chosen": "c1", "rejected": "r1"})"
             "\n"
             R"({"prompt": "q2", "chosen": "c2"})"
             "\n"
             R"({"prompt": "q3", "chosen": "same", "rejected": "same "})"
             "\n");
  const auto c = ingest_pairs(dir / "p.jsonl", jsonl());
  EXPECT_EQ(c.size(), 1u);
  ASSERT_EQ(c.rejections.size(), 2u);
  EXPECT_EQ(c.rejections[0].line, 2u);
  EXPECT_NE(c.rejections[0].reason.find("rejected"), std::string::npos);
  EXPECT_EQ(c.rejections[1].line, 3u);
  const auto report = rejections_jsonl(c.rejections);
  EXPECT_NE(report.find("\"line\":2"), std::string::npos);
}

TEST(Corpus, MalformedJsonCitesOffset) {
  TempDir dir;
  write_text(dir / "p.jsonl", "{\"prompt\": \"q\", \"chosen\": \"a\", \"rejected\": \"b\"}\n{oops\n");
  try {
    ingest_pairs(dir / "p.jsonl", jsonl());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ingest);
    EXPECT_NE(std::string(e.what()).find("byte offset 48"), std::string::npos) << e.what();
  }
}

TEST(Corpus, CsvWithMappingMatchesJsonl) {
  TempDir dir;
  write_text(dir / "p.jsonl",
             R"({"pair_id": "x", "prompt": "Hi, there", "chosen": "line one\ntwo", "rejected": "say \"no\"", "source": "s"})"
             "\n");
  write_text(dir / "p.csv", "id,question,good,bad,src\nx,\"Hi, there\",\"line one\ntwo\",\"say \"\"no\"\"\",s\n");
  IngestOptions csv;
  csv.format = InputFormat::csv;
  csv.mapping = parse_field_mapping("pair_id=id,prompt=question,chosen=good,rejected=bad,source=src");
  const auto a = ingest_pairs(dir / "p.jsonl", jsonl());
  const auto b = ingest_pairs(dir / "p.csv", csv);
  ASSERT_EQ(a.size(), 1u);
  ASSERT_EQ(b.size(), 1u);
  EXPECT_EQ(a.records[0], b.records[0]);
}

TEST(Corpus, CsvParser) {
  const auto rows = parse_csv("a,b\n\"x,1\",\"y\"\"z\"\r\n3,4");
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[1].fields, (std::vector<std::string>{"x,1", "y\"z"}));
  EXPECT_EQ(rows[2].fields, (std::vector<std::string>{"3", "4"}));
  EXPECT_EQ(rows[2].line, 3u);
  EXPECT_THROW(parse_csv("a\n\"open"), Error);
}

TEST(Corpus, CsvWrongColumnCountAborts) {
  TempDir dir;
  write_text(dir / "p.csv", "prompt,chosen,rejected\nq,a\n");
  IngestOptions csv;
  csv.format = InputFormat::csv;
  try {
    ingest_pairs(dir / "p.csv", csv);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ingest);
    EXPECT_NE(std::string(e.what()).find("byte offset 23"), std::string::npos) << e.what();
  }
}

TEST(Corpus, IngestTextsKeepsExtras) {
  TempDir dir;
  write_text(dir / "t.jsonl", R"({"prompt": "p", "output": "hello", "model": "m"})" "\n");
  IngestOptions o;
  o.mapping = parse_field_mapping("text=output");
  const auto c = ingest_texts(dir / "t.jsonl", o);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c.records[0].text, "hello");
  EXPECT_EQ(c.records[0].text_id, "t:1");
  EXPECT_EQ(c.records[0].extra.at("prompt"), "p");
  EXPECT_EQ(c.records[0].extra.at("model"), "m");
}

TEST(Corpus, GuessFormat) {
  EXPECT_EQ(guess_input_format("a.csv"), InputFormat::csv);
  EXPECT_EQ(guess_input_format("a.jsonl"), InputFormat::jsonl);
  EXPECT_EQ(guess_input_format("a"), InputFormat::jsonl);
  EXPECT_THROW(parse_input_format("xml"), Error);
}

TEST(Corpus, RoundTripThroughJsonl) {
  TempDir dir;
  auto c = pairs_with_prompts({"a", "b", "c"});
  c.records[1].topic = "t";
  c.records[2].demographics["age"] = "40";
  c.records[2].model_chosen = "m1";
  for (auto& r : c.records) r.source = "src";
  write_text(dir / "o.jsonl", to_jsonl(c));
  const auto back = ingest_pairs(dir / "o.jsonl", jsonl());
  EXPECT_EQ(back.records, c.records);
}

TEST(Corpus, DedupNormalizesWhitespace) {
  const auto d = dedup(pairs_with_prompts({"a", "a ", "b"}));
  EXPECT_EQ(d.corpus.size(), 2u);
  EXPECT_EQ(d.removed, 1u);
  EXPECT_EQ(d.corpus.records[0].pair_id, "p0");
}

TEST(Corpus, DedupPlantedDuplicates) {
  std::vector<std::string> prompts;
  for (int i = 0; i < 9000; ++i) prompts.push_back("prompt number " + std::to_string(i));
  for (int i = 0; i < 1000; ++i) prompts.push_back("  prompt   number " + std::to_string(i * 9) + "\t");
  const auto d = dedup(pairs_with_prompts(prompts));
  EXPECT_EQ(d.corpus.size(), 9000u);
  EXPECT_EQ(d.removed, 1000u);
  const auto again = dedup(d.corpus);
  EXPECT_EQ(again.removed, 0u);
  EXPECT_EQ(again.corpus.records, d.corpus.records);
}

TEST(Corpus, ModerationPassThrough) {
  PassThroughModeration pass;
  const auto c = pairs_with_prompts({"a", "b", "c"});
  const auto r = moderation_filter(c, pass);
  EXPECT_EQ(r.corpus.records, c.records);
  EXPECT_TRUE(r.flagged.empty());
}

TEST(Corpus, ModerationDropsFlagged) {
  FlaggedIdModeration ids({"p2", "p5"});
  const auto r = moderation_filter(pairs_with_prompts({"a", "b", "c", "d", "e", "f", "g"}), ids);
  EXPECT_EQ(r.corpus.size(), 5u);
  EXPECT_EQ(r.flagged, (std::vector<std::string>{"p2", "p5"}));
}

TEST(Corpus, ModerationFailurePolicy) {
  ScriptedModeration m;
  m.fail = {"p1"};
  m.flag = {"p2"};
  const auto c = pairs_with_prompts({"a", "b", "c", "d"});
  const auto kept = moderation_filter(c, m, {3, FailurePolicy::keep});
  EXPECT_EQ(m.calls["p1"], 3);
  EXPECT_EQ(kept.corpus.size(), 3u);
  EXPECT_EQ(kept.failed, (std::vector<std::string>{"p1"}));
  ASSERT_EQ(kept.warnings.size(), 1u);
  const auto dropped = moderation_filter(c, m, {2, FailurePolicy::drop});
  EXPECT_EQ(dropped.corpus.size(), 2u);
  EXPECT_EQ(dropped.failed, (std::vector<std::string>{"p1"}));
}

TEST(Corpus, FlaggedIdsFromFile) {
  TempDir dir;
  write_text(dir / "ids.txt", "p1\n\n  p3 \n");
  auto m = FlaggedIdModeration::from_file(dir / "ids.txt");
  const auto r = moderation_filter(pairs_with_prompts({"a", "b", "c", "d"}), m);
  EXPECT_EQ(r.flagged, (std::vector<std::string>{"p1", "p3"}));
}

TEST(Corpus, SplitRatio) {
  std::vector<std::string> prompts;
  for (int i = 0; i < 100; ++i) prompts.push_back("q" + std::to_string(i));
  const auto a = split(pairs_with_prompts(prompts), 0.9, 1);
  EXPECT_EQ(a.train_prompts, 90u);
  EXPECT_EQ(a.test_prompts, 10u);
  std::size_t train = 0;
  for (const auto& [id, side] : a.sides) train += side == Side::train;
  EXPECT_EQ(train, 90u);
}

TEST(Corpus, SplitKeepsPromptsTogether) {
  std::vector<std::string> prompts;
  for (int i = 0; i < 40; ++i) {
    prompts.push_back("q" + std::to_string(i % 13));
    prompts.push_back(" q" + std::to_string(i % 13) + " ");
  }
  auto c = pairs_with_prompts(prompts);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto a = split(c, 0.7, seed);
    std::map<std::string, Side> by_prompt;
    for (const auto& r : c.records) {
      const auto [it, fresh] = by_prompt.emplace(prompt_key(r), a.sides.at(r.pair_id));
      ASSERT_EQ(it->second, a.sides.at(r.pair_id)) << "seed " << seed;
    }
    EXPECT_EQ(a.train_prompts + a.test_prompts, 13u);
  }
}

TEST(Corpus, SplitIsSeeded) {
  std::vector<std::string> prompts;
  for (int i = 0; i < 50; ++i) prompts.push_back("q" + std::to_string(i));
  const auto c = pairs_with_prompts(prompts);
  EXPECT_EQ(split(c, 0.5, 3).sides, split(c, 0.5, 3).sides);
  EXPECT_NE(split(c, 0.5, 3).sides, split(c, 0.5, 4).sides);
}

TEST(Corpus, SplitEdgeCases) {
  EXPECT_THROW(split(pairs_with_prompts({"a", " a"}), 0.5, 0), Error);
  EXPECT_THROW(split(pairs_with_prompts({"a", "b"}), 1.0, 0), Error);
  const auto a = split(pairs_with_prompts({"a", "b"}), 0.99, 0);
  EXPECT_EQ(a.train_prompts, 1u);
  EXPECT_EQ(a.test_prompts, 1u);
}
