#include <gtest/gtest.h>

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <cmath>
#include <mutex>
#include <random>

#include "humt/error.hpp"
#include "humt/tone.hpp"
#include "support.hpp"

using namespace humt;
using Big = boost::multiprecision::cpp_bin_float_50;

namespace {

// Independent evaluation of the tone ratio from the raw table probabilities.
double oracle_tone(const std::map<std::string, double>& table, const DimensionSpec& spec,
                   const std::string& text, Aggregation mode) {
  auto side = [&](const std::vector<std::string>& phrases) {
    Big sum = 0;
    for (const auto& p : phrases) sum += Big(table.at(p + " " + text));
    if (mode == Aggregation::mean_normalized) sum /= Big(phrases.size());
    return boost::multiprecision::log(sum);
  };
  return static_cast<double>(side(spec.positive_phrases) - side(spec.negative_phrases));
}

DimensionSpec random_spec(std::mt19937_64& gen) {
  std::uniform_int_distribution<int> n(1, 6);
  DimensionSpec s;
  s.name = "d";
  const int np = n(gen), nn = n(gen);
  for (int i = 0; i < np; ++i) s.positive_phrases.push_back("P" + std::to_string(i) + " said");
  for (int i = 0; i < nn; ++i) s.negative_phrases.push_back("N" + std::to_string(i) + " said");
  return s;
}

class SampledBackend : public Backend {
 public:
  SampledBackend() {
    d_.backend_id = "sampled";
    d_.model_id = "sampled";
    d_.capabilities = static_cast<unsigned>(Capability::sequence_logprob);
    d_.deterministic = false;
  }
  const BackendDescriptor& descriptor() const override { return d_; }
  std::vector<std::uint32_t> samples;

 protected:
  double do_sequence_logprob(std::string_view, std::uint32_t sample) override {
    std::lock_guard lock(m_);
    samples.push_back(sample);
    return std::log(0.1 * (sample + 1));
  }

 private:
  BackendDescriptor d_;
  std::mutex m_;
};

}  // namespace

TEST(Tone, LogAggregateMatchesDirectSum) {
  const std::vector<double> lps{std::log(0.2), std::log(0.3), std::log(0.5)};
  EXPECT_NEAR(log_aggregate(lps, Aggregation::sum_literal), 0.0, 1e-15);
  EXPECT_NEAR(log_aggregate(lps, Aggregation::mean_normalized), -std::log(3.0), 1e-15);
  const std::vector<double> tiny{-1000.0, -1000.0};
  EXPECT_NEAR(log_aggregate(tiny, Aggregation::sum_literal), -1000.0 + std::log(2.0), 1e-12);
  EXPECT_THROW(log_aggregate({}, Aggregation::sum_literal), Error);
}

TEST(Tone, JoinPhrase) { EXPECT_EQ(join_phrase("He said", "hi."), "He said hi."); }

TEST(Tone, HumtExample) {
  TableBackend b({{"He said I'd like to eat healthy.", 0.02},
                  {"She said I'd like to eat healthy.", 0.02},
                  {"It said I'd like to eat healthy.", 0.01}});
  const auto spec = DimensionRegistry::builtin().at("humt");
  const auto s = score("t1", "I'd like to eat healthy.", spec, {}, b);
  EXPECT_NEAR(s.value, std::log(4.0), 1e-15);
  EXPECT_EQ(s.dimension, "humt");
  EXPECT_EQ(s.backend_id, b.descriptor().backend_id);
  EXPECT_FALSE(s.truncated);
  EXPECT_EQ(b.sequence_calls(), 3u);
}

TEST(Tone, BuiltinPhraseSets) {
  const auto r = DimensionRegistry::builtin();
  EXPECT_EQ(r.names(), (std::vector<std::string>{"humt", "social", "warmth", "gender", "status"}));
  EXPECT_EQ(r.at("humt").positive_phrases, (std::vector<std::string>{"He said", "She said"}));
  EXPECT_EQ(r.at("humt").negative_phrases, (std::vector<std::string>{"It said"}));
  EXPECT_EQ(r.at("social").positive_phrases.size(), 6u);
  EXPECT_EQ(r.at("social").negative_phrases, (std::vector<std::string>{"The stranger said"}));
  EXPECT_EQ(r.at("warmth").positive_phrases.size(), 4u);
  EXPECT_EQ(r.at("warmth").negative_phrases.size(), 4u);
  EXPECT_EQ(r.at("gender").positive_phrases, (std::vector<std::string>{"She said"}));
  EXPECT_EQ(r.at("status").negative_phrases,
            (std::vector<std::string>{"He pleaded", "He mentioned", "He asked"}));
}

TEST(Tone, RegistryRejectsBadSpecs) {
  auto r = DimensionRegistry::builtin();
  EXPECT_THROW(r.add({"humt", {"a"}, {"b"}}), Error);
  EXPECT_THROW(r.add({"x", {}, {"b"}}), Error);
  EXPECT_THROW(r.add({"x", {"  "}, {"b"}}), Error);
  try {
    r.at("nope");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::not_found);
    EXPECT_NE(std::string(e.what()).find("humt, social, warmth, gender, status"), std::string::npos);
  }
}

TEST(Tone, RegistryFromJson) {
  const auto j = nlohmann::json::parse(
      R"({"dimensions": [{"name": "formal", "positive": ["Sir said"], "negative": ["Bro said"],
          "aggregation": "mean_normalized"}]})");
  const auto r = DimensionRegistry::from_json(j);
  EXPECT_EQ(r.size(), 6u);
  EXPECT_EQ(r.at("formal").aggregation, Aggregation::mean_normalized);
  EXPECT_EQ(DimensionRegistry::from_json(j, false).size(), 1u);
  EXPECT_EQ(r.select("formal, humt").size(), 2u);
  EXPECT_EQ(r.select("all").size(), 6u);
}

// Tone equals the high-precision log ratio of the table's probabilities.
TEST(Tone, MatchesHighPrecisionOracle) {
  std::mt19937_64 gen(2024);
  std::uniform_real_distribution<double> logp(-600.0, -1.0);
  for (int table = 0; table < 20; ++table) {
    const auto spec = random_spec(gen);
    const auto text = humt::testing::random_sentence(gen);
    std::map<std::string, double> probs;
    for (const auto* side : {&spec.positive_phrases, &spec.negative_phrases}) {
      for (const auto& p : *side) probs[p + " " + text] = std::exp(logp(gen));
    }
    TableBackend b(probs);
    for (auto mode : {Aggregation::sum_literal, Aggregation::mean_normalized}) {
      ScoringConfig cfg;
      cfg.aggregation = mode;
      const double got = score("t", text, spec, cfg, b).value;
      EXPECT_NEAR(got, oracle_tone(probs, spec, text, mode), 1e-9) << "table " << table;
    }
  }
}

TEST(Tone, SwapNegatesAndIdentityIsZero) {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> p(1e-30, 1.0);
  const auto spec = random_spec(gen);
  for (int i = 0; i < 200; ++i) {
    const auto text = humt::testing::random_sentence(gen);
    TableBackend b;
    for (const auto* side : {&spec.positive_phrases, &spec.negative_phrases}) {
      for (const auto& ph : *side) b.set_probability(ph + " " + text, p(gen));
    }
    const double fwd = score("t", text, spec, {}, b).value;
    const double rev = score("t", text, spec.swapped(), {}, b).value;
    EXPECT_LE(std::abs(fwd + rev), 1e-12);
    DimensionSpec same{"same", spec.positive_phrases, spec.positive_phrases};
    EXPECT_EQ(score("t", text, same, {}, b).value, 0.0);
    ScoringConfig mean;
    mean.aggregation = Aggregation::mean_normalized;
    const double shift = std::log(double(spec.positive_phrases.size())) -
                         std::log(double(spec.negative_phrases.size()));
    EXPECT_NEAR(fwd - score("t", text, spec, mean, b).value, shift, 1e-12);
  }
}

TEST(Tone, TruncatesTo300CodePoints) {
  std::string text;
  for (int i = 0; i < 350; ++i) text += "\xC3\xA9";
  const std::string kept = text.substr(0, 600);
  TableBackend b({{"P said " + kept, 0.5}, {"N said " + kept, 0.25}});
  DimensionSpec spec{"d", {"P said"}, {"N said"}};
  const auto s = score("t", text, spec, {}, b);
  EXPECT_TRUE(s.truncated);
  EXPECT_NEAR(s.value, std::log(2.0), 1e-15);
  ScoringConfig cfg;
  cfg.truncation_limit = 400;
  EXPECT_FALSE(score("t", text, spec, cfg, b).truncated);
}

TEST(Tone, DeterministicBackendIgnoresRepetitions) {
  TableBackend b({{"P said x", 0.5}, {"N said x", 0.25}});
  DimensionSpec spec{"d", {"P said"}, {"N said"}};
  ScoringConfig cfg;
  cfg.repetitions = 5;
  EXPECT_NEAR(score("t", "x", spec, cfg, b).value, std::log(2.0), 1e-15);
  EXPECT_EQ(b.sequence_calls(), 2u);
}

TEST(Tone, RepetitionsAverageProbabilities) {
  SampledBackend b;
  ScoringConfig cfg;
  cfg.repetitions = 3;
  // Draws 0.1, 0.2, 0.3 average to 0.2 on both sides.
  EXPECT_NEAR(averaged_logprob("x", 3, b), std::log(0.2), 1e-15);
  DimensionSpec spec{"d", {"P said"}, {"N said", "M said"}};
  EXPECT_NEAR(score("t", "x", spec, cfg, b).value, -std::log(2.0), 1e-15);
  EXPECT_EQ(b.samples.size(), 12u);
}

TEST(Tone, ZeroProbabilityPhraseIsClamped) {
  TableBackend b({{"A said x", 0.0}, {"B said x", 0.5}, {"N said x", 0.5}});
  DimensionSpec spec{"d", {"A said", "B said"}, {"N said"}};
  std::vector<std::string> warnings;
  const auto s = score("t", "x", spec, {}, b, &warnings);
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_NE(warnings[0].find("A said"), std::string::npos);
  EXPECT_NEAR(s.value, 0.0, 1e-15);
  DimensionSpec dead{"d", {"A said"}, {"N said"}};
  try {
    score("t", "x", dead, {}, b);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::scoring);
  }
}

TEST(Tone, BatchIsOrderedAndIndependentOfJobs) {
  std::mt19937_64 gen(11);
  std::vector<IdentifiedText> texts;
  TableBackend b;
  std::uniform_real_distribution<double> p(0.01, 1.0);
  const auto reg = DimensionRegistry::builtin();
  for (int i = 0; i < 60; ++i) {
    texts.push_back({"id" + std::to_string((i * 37) % 60), humt::testing::random_sentence(gen)});
    for (const auto& spec : reg.specs()) {
      for (const auto* side : {&spec.positive_phrases, &spec.negative_phrases}) {
        for (const auto& ph : *side) b.set_probability(ph + " " + texts.back().text, p(gen));
      }
    }
  }
  const auto one = score_batch(texts, reg.specs(), {}, b, {false, 1});
  const auto many = score_batch(texts, reg.specs(), {}, b, {false, 8});
  ASSERT_EQ(one.rows.size(), 300u);
  ASSERT_EQ(many.rows.size(), 300u);
  for (std::size_t i = 0; i < one.rows.size(); ++i) {
    EXPECT_EQ(one.rows[i].text_id, many.rows[i].text_id);
    EXPECT_EQ(one.rows[i].dimension, many.rows[i].dimension);
    EXPECT_EQ(one.rows[i].value, many.rows[i].value);
    if (i > 0) {
      const auto& a = one.rows[i - 1];
      const auto& c = one.rows[i];
      EXPECT_TRUE(std::tie(a.text_id, a.dimension) < std::tie(c.text_id, c.dimension));
    }
  }
}

TEST(Tone, BatchMemoizesSharedPhrases) {
  // "He said" appears in humt and gender; "She said" too. Per text: 3 + 2 - 2 = 3 calls.
  TableBackend b;
  const auto reg = DimensionRegistry::builtin();
  const auto specs = reg.select("humt,gender");
  std::vector<IdentifiedText> texts{{"a", "x"}, {"b", "y"}};
  score_batch(texts, specs, {}, b);
  EXPECT_EQ(b.sequence_calls(), 6u);
}

TEST(Tone, BatchCollectsFailuresOrThrows) {
  TableBackend b({{"P said bad", 0.0}, {"N said bad", 0.5}});
  DimensionSpec spec{"d", {"P said"}, {"N said"}};
  std::vector<IdentifiedText> texts{{"a", "ok"}, {"b", "bad"}};
  std::vector<DimensionSpec> specs{spec};
  const auto r = score_batch(texts, specs, {}, b);
  EXPECT_EQ(r.rows.size(), 1u);
  ASSERT_EQ(r.failures.size(), 1u);
  EXPECT_EQ(r.failures[0].text_id, "b");
  EXPECT_THROW(score_batch(texts, specs, {}, b, {true, 1}), Error);
}
