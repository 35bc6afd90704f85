#include <algorithm>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "detox/corpus.hpp"
#include "support/fixtures.hpp"

using namespace detox;
using detox::testing::make_record;
using detox::testing::scratch_dir;

namespace {

std::vector<StyleTransferPair> numbered(std::size_t n) {
  std::vector<StyleTransferPair> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(make_record("id-" + std::to_string(i), "comment " + std::to_string(i), "rewrite",
                            SplitName::kUnassigned));
  }
  return out;
}

std::set<std::string> ids(const std::vector<StyleTransferPair>& records) {
  std::set<std::string> out;
  for (const auto& r : records) out.insert(r.id);
  return out;
}

}  // namespace

TEST(ValidateRecord, WellFormedLocalPairHasNoViolations) {
  EXPECT_TRUE(validate_record(make_record("a", "You idiot.", "You are mistaken.")).empty());
}

TEST(ValidateRecord, DiscardWithRewriteIsOneViolation) {
  auto r = make_record("a", "text");
  r.change_type = ChangeType::kDiscard;
  r.split = SplitName::kUnassigned;
  auto v = validate_record(r);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].rfind("rewrite:", 0), 0u);
}

TEST(ValidateRecord, LocalWithoutReasonsIsOneViolation) {
  auto r = make_record("a", "text");
  r.reasons.clear();
  auto v = validate_record(r);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].rfind("reasons:", 0), 0u);
}

TEST(ValidateRecord, DiscardWithoutRewriteOrReasonsIsValid) {
  StyleTransferPair r;
  r.id = "d";
  r.original = "unsalvageable";
  r.change_type = ChangeType::kDiscard;
  EXPECT_TRUE(validate_record(r).empty());
}

TEST(ValidateRecord, EmptyRewriteAndIdAreReported) {
  auto r = make_record("", "text", "");
  EXPECT_EQ(validate_record(r).size(), 2u);
}

TEST(LoadCorpus, EmptyFileGivesEmptyCorpus) {
  auto dir = scratch_dir("corpus-empty");
  write_file(dir / "c.jsonl", "");
  EXPECT_TRUE(load_corpus(dir / "c.jsonl").empty());
}

TEST(LoadCorpus, DuplicateIdFailsOnThirdLine) {
  auto dir = scratch_dir("corpus-dup");
  std::vector<json> rows = {make_record("a", "x"), make_record("b", "y"), make_record("a", "z")};
  write_jsonl(dir / "c.jsonl", rows);
  try {
    load_corpus(dir / "c.jsonl");
    FAIL();
  } catch (const Error& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("'a'"), std::string::npos) << msg;
  }
}

TEST(LoadCorpus, InvalidRecordNamesLine) {
  auto dir = scratch_dir("corpus-invalid");
  auto bad = make_record("b", "y");
  bad.reasons.clear();
  write_jsonl(dir / "c.jsonl", {json(make_record("a", "x")), json(bad)});
  try {
    load_corpus(dir / "c.jsonl");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
}

TEST(LoadCorpus, SaveThenLoadIsRecordEqual) {
  auto dir = scratch_dir("corpus-rt");
  auto corpus = numbered(20);
  corpus[3].change_type = ChangeType::kDiscard;
  corpus[3].rewrite.reset();
  corpus[3].reasons.clear();
  corpus[4].subreddit = "politics";
  corpus[5].original = "multi\nline \"quoted\" ünïcode";
  save_corpus(dir / "c.jsonl", corpus);
  EXPECT_EQ(load_corpus(dir / "c.jsonl"), corpus);
}

TEST(Split, HundredRecordsGive80_10_10) {
  auto result = split(numbered(100), SplitSpec{});
  EXPECT_EQ(result.train.size(), 80u);
  EXPECT_EQ(result.dev.size(), 10u);
  EXPECT_EQ(result.test.size(), 10u);
}

TEST(Split, ReleasedSizeFloorsDevAndTest) {
  // floor(0.1 * 1981) = 198 for dev and test; train takes the remainder.
  auto result = split(numbered(1981), SplitSpec{});
  EXPECT_EQ(result.train.size(), 1585u);
  EXPECT_EQ(result.dev.size(), 198u);
  EXPECT_EQ(result.test.size(), 198u);
}

TEST(Split, DeterministicForSeed) {
  auto corpus = numbered(50);
  SplitSpec spec;
  spec.seed = 7;
  auto a = split(corpus, spec);
  auto b = split(corpus, spec);
  EXPECT_EQ(a.dev, b.dev);
  EXPECT_EQ(a.test, b.test);
  spec.seed = 8;
  EXPECT_NE(ids(split(corpus, spec).dev), ids(a.dev));
}

TEST(Split, TooSmallCorpusIsError) {
  EXPECT_THROW(split(numbered(2), SplitSpec{}), Error);
}

TEST(Split, BadRatiosRejected) {
  SplitSpec spec;
  spec.ratios = {0.8, 0.2, 0.0};
  EXPECT_THROW(spec.check(), Error);
  spec.ratios = {0.8, 0.1, 0.2};
  EXPECT_THROW(spec.check(), Error);
  EXPECT_THROW(parse_ratios("0.8,0.1"), Error);
  auto r = parse_ratios("0.7,0.2,0.1");
  EXPECT_DOUBLE_EQ(r[1], 0.2);
}

TEST(Split, DiscardedRecordsAreExcluded) {
  auto corpus = numbered(12);
  corpus[0].change_type = ChangeType::kDiscard;
  corpus[0].rewrite.reset();
  auto result = split(corpus, SplitSpec{});
  ASSERT_EQ(result.excluded.size(), 1u);
  EXPECT_EQ(result.excluded[0].split, SplitName::kUnassigned);
  // N = 11 eligible: floor(1.1) = 1 each for dev and test.
  EXPECT_EQ(result.dev.size(), 1u);
  EXPECT_EQ(result.test.size(), 1u);
  EXPECT_EQ(result.train.size(), 9u);
}

// Property: partition + permutation invariance + stable order, over random corpora.
TEST(SplitProperty, PartitionAndPermutationInvariance) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 3 + rng() % 60;
    auto corpus = numbered(n);
    for (auto& r : corpus) {
      if (rng() % 8 == 0) {
        r.change_type = ChangeType::kDiscard;
        r.rewrite.reset();
      }
    }
    std::size_t eligible = 0;
    for (const auto& r : corpus) eligible += r.change_type != ChangeType::kDiscard;
    if (eligible < 3) continue;
    SplitSpec spec;
    spec.seed = rng();
    auto a = split(corpus, spec);

    std::set<std::string> all;
    std::size_t total = 0;
    for (const auto* part : {&a.train, &a.dev, &a.test, &a.excluded}) {
      total += part->size();
      for (const auto& r : *part) all.insert(r.id);
    }
    ASSERT_EQ(total, corpus.size());
    ASSERT_EQ(all, ids(corpus));
    EXPECT_EQ(a.dev.size(), static_cast<std::size_t>(0.1 * eligible + 1e-9));

    // Order within a split follows input order.
    auto position = [&](const std::string& id) {
      return std::find_if(corpus.begin(), corpus.end(), [&](auto& r) { return r.id == id; }) -
             corpus.begin();
    };
    for (const auto* part : {&a.train, &a.dev, &a.test}) {
      for (std::size_t i = 1; i < part->size(); ++i) {
        ASSERT_LT(position((*part)[i - 1].id), position((*part)[i].id));
      }
    }

    auto shuffled = corpus;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    auto b = split(shuffled, spec);
    EXPECT_EQ(ids(a.train), ids(b.train));
    EXPECT_EQ(ids(a.dev), ids(b.dev));
    EXPECT_EQ(ids(a.test), ids(b.test));
  }
}

TEST(Groups, SubredditMapping) {
  EXPECT_EQ(subreddit_group("politics"), "politics");
  EXPECT_EQ(subreddit_group("r/Conservative"), "politics");
  EXPECT_EQ(subreddit_group("unpopularopinion"), "personal views");
  EXPECT_EQ(subreddit_group("AskReddit"), "question-answer");
  EXPECT_EQ(subreddit_group("MensRights"), "gender rights");
  EXPECT_EQ(subreddit_group("aww"), "other");
}

TEST(Enums, StringRoundTrip) {
  for (auto t : {ChangeType::kLocal, ChangeType::kGlobal, ChangeType::kDiscard}) {
    EXPECT_EQ(parse_change_type(to_string(t)), t);
  }
  for (auto s : {SplitName::kTrain, SplitName::kDev, SplitName::kTest, SplitName::kUnassigned}) {
    EXPECT_EQ(parse_split_name(to_string(s)), s);
  }
  EXPECT_THROW(parse_change_type("rewrite"), Error);
}
