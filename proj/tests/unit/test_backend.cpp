#include <gtest/gtest.h>

#include <cmath>

#include "humt/backend.hpp"
#include "humt/error.hpp"
#include "support.hpp"

using namespace humt;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::invalid_argument;
}

// Returns whatever the test planted, to exercise the contract checks.
class RawBackend : public Backend {
 public:
  RawBackend() {
    d_.backend_id = "raw";
    d_.capabilities = static_cast<unsigned>(Capability::sequence_logprob) |
                      static_cast<unsigned>(Capability::fill_mask) | static_cast<unsigned>(Capability::embed);
  }
  const BackendDescriptor& descriptor() const override { return d_; }
  double lp = -1.0;
  std::vector<Fill> fills;
  std::vector<double> vec{1.0};

 protected:
  double do_sequence_logprob(std::string_view, std::uint32_t) override { return lp; }
  std::vector<Fill> do_fill_mask(std::string_view, std::size_t) override { return fills; }
  std::vector<double> do_embed(std::string_view) override { return vec; }

 private:
  BackendDescriptor d_;
};

}  // namespace

TEST(Backend, TableLooksUpExactStrings) {
  TableBackend b({{"a", 0.5}}, {"m", 1e-6});
  EXPECT_DOUBLE_EQ(b.sequence_logprob("a"), std::log(0.5));
  EXPECT_DOUBLE_EQ(b.sequence_logprob("zzz"), std::log(1e-6));
  EXPECT_TRUE(b.descriptor().deterministic);
  EXPECT_EQ(b.descriptor().model_id, "m");
  EXPECT_TRUE(b.descriptor().has(Capability::sequence_logprob));
  EXPECT_FALSE(b.descriptor().has(Capability::embed));
}

TEST(Backend, BackendIdsAreUnique) {
  TableBackend a({}, {"same", 1e-9});
  TableBackend b({}, {"same", 1e-9});
  EXPECT_NE(a.descriptor().backend_id, b.descriptor().backend_id);
}

TEST(Backend, MissingCapability) {
  TableBackend b;
  EXPECT_EQ(code_of([&] { b.fill_mask("<slot> said x", 3); }), ErrorCode::unsupported_capability);
  EXPECT_EQ(code_of([&] { b.embed("x"); }), ErrorCode::unsupported_capability);
}

TEST(Backend, SequenceLogprobContract) {
  RawBackend b;
  b.lp = 0.5;
  EXPECT_EQ(code_of([&] { b.sequence_logprob("x"); }), ErrorCode::protocol);
  b.lp = std::nan("");
  EXPECT_EQ(code_of([&] { b.sequence_logprob("x"); }), ErrorCode::protocol);
  b.lp = 1e-14;  // rounding noise above zero is tolerated and clamped
  EXPECT_EQ(b.sequence_logprob("x"), 0.0);
  b.lp = -INFINITY;
  EXPECT_EQ(b.sequence_logprob("x"), -INFINITY);
}

TEST(Backend, FillMaskRanksAndTruncates) {
  TableBackend b;
  b.set_fills("", {{"she", 0.2}, {"he", 0.2}, {"it", 0.5}, {"they", 0.1}});
  const auto f = b.fill_mask("<slot> said hi", 3);
  ASSERT_EQ(f.size(), 3u);
  EXPECT_EQ(f[0].word, "it");
  EXPECT_EQ(f[1].word, "he");
  EXPECT_EQ(f[2].word, "she");
  EXPECT_EQ(code_of([&] { b.fill_mask("no slot here", 3); }), ErrorCode::invalid_argument);
  EXPECT_EQ(code_of([&] { b.fill_mask("<slot> <slot>", 3); }), ErrorCode::invalid_argument);
  EXPECT_EQ(code_of([&] { b.fill_mask("<slot> said", 0); }), ErrorCode::invalid_argument);
}

TEST(Backend, FillProbabilityChecked) {
  RawBackend b;
  b.fills = {{"x", 1.5}};
  EXPECT_EQ(code_of([&] { b.fill_mask("<slot>", 1); }), ErrorCode::protocol);
}

TEST(Backend, EmbedDimensionIsStable) {
  RawBackend b;
  b.vec = {1, 2, 3};
  EXPECT_EQ(b.embed("a").size(), 3u);
  b.vec = {1, 2};
  EXPECT_EQ(code_of([&] { b.embed("b"); }), ErrorCode::protocol);
  b.vec = {1, NAN, 3};
  EXPECT_EQ(code_of([&] { b.embed("c"); }), ErrorCode::protocol);
}

TEST(Backend, TableEmbedUnknownText) {
  TableBackend b;
  b.set_embedding("a", {1, 0});
  EXPECT_EQ(b.embed("a"), (std::vector<double>{1, 0}));
  EXPECT_EQ(code_of([&] { b.embed("b"); }), ErrorCode::not_found);
}

TEST(Backend, TableFromJson) {
  const auto j = nlohmann::json::parse(R"({
    "model_id": "toy", "floor": 0.001,
    "sequence": {"He said hi": 0.25},
    "fill": {"*": {"man": 0.5, "woman": 0.4}},
    "embed": {"q": [0.5, 0.5]}
  })");
  auto b = TableBackend::from_json(j);
  EXPECT_EQ(b->descriptor().backend_id.rfind("table:toy", 0), 0u);
  EXPECT_DOUBLE_EQ(b->sequence_logprob("He said hi"), std::log(0.25));
  EXPECT_DOUBLE_EQ(b->sequence_logprob("other"), std::log(0.001));
  EXPECT_EQ(b->fill_mask("<slot> said hi", 5)[0].word, "man");
  EXPECT_EQ(b->embed("q").size(), 2u);
}

TEST(Backend, TableFromFile) {
  humt::testing::TempDir dir;
  humt::testing::write_text(dir / "t.json", R"({"sequence": {"x": 0.5}})");
  EXPECT_DOUBLE_EQ(TableBackend::from_file(dir / "t.json")->sequence_logprob("x"), std::log(0.5));
  EXPECT_THROW(TableBackend::from_file(dir / "missing.json"), Error);
}
