#include <atomic>
#include <random>

#include <gtest/gtest.h>

#include "detox/discourse.hpp"
#include "support/fixtures.hpp"

using namespace detox;
using detox::testing::scratch_dir;
using detox::testing::shipped_lexicon;

namespace {

ConnectiveLexicon however_only() {
  return ConnectiveLexicon({{"however", "Comparison", "Comparison.Contrast"}});
}

class ThrowingParser final : public ParserAdapter {
 public:
  explicit ThrowingParser(Framework f) : framework_(f) {}
  AdapterInfo info() const override { return {framework_, "L2", "throwing", true}; }
  std::optional<SenseScore> classify(const ParserInput&) override {
    throw Error("model crashed");
  }

 private:
  Framework framework_;
};

// Records what the parser was asked, and fails the test if called concurrently.
class RecordingParser final : public ParserAdapter {
 public:
  RecordingParser(Framework f, SenseScore result) : framework_(f), result_(std::move(result)) {}
  AdapterInfo info() const override { return {framework_, "top", "recording", false}; }
  std::optional<SenseScore> classify(const ParserInput& input) override {
    if (busy_.exchange(true)) overlapped_ = true;
    texts.emplace_back(input.text);
    busy_ = false;
    return result_;
  }
  std::vector<std::string> texts;
  std::atomic<bool> overlapped_{false};

 private:
  Framework framework_;
  SenseScore result_;
  std::atomic<bool> busy_{false};
};

}  // namespace

TEST(Inventory, StandardSizes) {
  auto inv = SenseInventory::standard();
  EXPECT_EQ(inv.pdtb_l1.size(), 4u);
  EXPECT_EQ(inv.pdtb_l2.size(), 16u);
  EXPECT_EQ(inv.rst_top.size(), 18u);
  EXPECT_FALSE(inv.is_rst("span"));
  EXPECT_NO_THROW(inv.check());
}

TEST(Inventory, CheckRejectsBadLabels) {
  auto inv = SenseInventory::standard();
  inv.pdtb_l2.push_back("Nonsense.Thing");
  EXPECT_THROW(inv.check(), Error);
  inv = SenseInventory::standard();
  inv.rst_top.push_back("Has Space");
  EXPECT_THROW(inv.check(), Error);
  inv = SenseInventory::standard();
  inv.rst_top.push_back("Joint");
  EXPECT_THROW(inv.check(), Error);
}

TEST(Inventory, L1ProjectionIsTotalOntoFourSenses) {
  auto inv = SenseInventory::standard();
  std::set<std::string> images;
  for (const auto& l2 : inv.pdtb_l2) {
    EXPECT_TRUE(inv.is_l1(l1_of(l2))) << l2;
    images.insert(l1_of(l2));
  }
  EXPECT_EQ(images.size(), 4u);
  EXPECT_EQ(l1_of("Comparison"), "Comparison");
}

TEST(Sentences, SplitsOnTerminalPunctuationAndNewline) {
  const std::string text = "Hi there!  Is it \"done?\" Yes...\nNext line";
  auto spans = split_sentences(text);
  std::vector<std::string> parts;
  for (auto s : spans) parts.emplace_back(s.slice(text));
  EXPECT_EQ(parts, (std::vector<std::string>{"Hi there!", "Is it \"done?\"", "Yes...", "Next line"}));
  EXPECT_TRUE(split_sentences("   ").empty());
  EXPECT_EQ(split_sentences("3.5 is a number.").size(), 1u);
}

TEST(Explicit, HoweverExample) {
  const std::string text = "I hate this. However, you are right.";
  auto rels = extract_explicit_pdtb(text, however_only());
  ASSERT_EQ(rels.size(), 1u);
  EXPECT_EQ(rels[0].framework, Framework::kPdtbExplicit);
  EXPECT_EQ(rels[0].sense, "Comparison.Contrast");
  EXPECT_EQ(rels[0].arg1->slice(text), "I hate this.");
  EXPECT_EQ(rels[0].arg2->slice(text), "you are right.");
  EXPECT_EQ(*rels[0].arg1, (Span{0, 12}));
  EXPECT_EQ(*rels[0].arg2, (Span{22, 36}));
  EXPECT_DOUBLE_EQ(rels[0].confidence, 1.0);
}

TEST(Explicit, NoConnectiveNoRelation) {
  EXPECT_TRUE(extract_explicit_pdtb("Nothing to see here.", shipped_lexicon()).empty());
}

TEST(Explicit, WordBoundaryMatching) {
  ConnectiveLexicon lex({{"but", "Comparison", "Comparison.Contrast"}});
  EXPECT_TRUE(extract_explicit_pdtb("I like butter on toast.", lex).empty());
  auto rels = extract_explicit_pdtb("I like toast but not butter.", lex);
  ASSERT_EQ(rels.size(), 1u);
}

TEST(Explicit, SentenceMedialClauses) {
  const std::string text = "I left early because the meeting was pointless.";
  auto rels = extract_explicit_pdtb(text, shipped_lexicon());
  ASSERT_EQ(rels.size(), 1u);
  EXPECT_EQ(rels[0].sense, "Contingency.Cause");
  EXPECT_EQ(rels[0].arg1->slice(text), "I left early");
  EXPECT_EQ(rels[0].arg2->slice(text), "the meeting was pointless.");
}

TEST(Explicit, LongestConnectiveWins) {
  const std::string text = "It rained. Because of that, we stayed in.";
  auto rels = extract_explicit_pdtb(text, shipped_lexicon());
  ASSERT_EQ(rels.size(), 1u);
  EXPECT_EQ(rels[0].arg2->slice(text), "we stayed in.");
}

TEST(Explicit, DeterministicAndValid) {
  auto lex = shipped_lexicon();
  auto inv = SenseInventory::standard();
  const std::string text =
      "You are wrong. However, I see your point. Then again, nobody asked, but fine.";
  auto a = extract_explicit_pdtb(text, lex);
  auto b = extract_explicit_pdtb(text, lex);
  EXPECT_EQ(a, b);
  ASSERT_FALSE(a.empty());
  for (const auto& r : a) EXPECT_TRUE(validate_relation(r, text, inv).empty());
}

TEST(Lexicon, ShippedFileLoads) {
  auto lex = shipped_lexicon();
  EXPECT_GE(lex.size(), 90u);
  const std::string text = "well HOWEVER it goes";
  const Connective* c = lex.match_at(text, 5);
  ASSERT_NE(c, nullptr);
  EXPECT_EQ(c->surface, "however");
}

TEST(Implicit, SingleSentenceGivesNothing) {
  ConstantParser p(Framework::kPdtbImplicit, {"Expansion.Conjunction", 0.9});
  EXPECT_TRUE(extract_implicit_pdtb("Just one.", p, SenseInventory::standard()).empty());
}

TEST(Implicit, StubPassthrough) {
  const std::string text = "The bus was late. I walked.";
  ConstantParser p(Framework::kPdtbImplicit, {"Expansion.Conjunction", 0.9});
  auto rels = extract_implicit_pdtb(text, p, SenseInventory::standard());
  ASSERT_EQ(rels.size(), 1u);
  EXPECT_EQ(rels[0].framework, Framework::kPdtbImplicit);
  EXPECT_EQ(rels[0].sense, "Expansion.Conjunction");
  EXPECT_DOUBLE_EQ(rels[0].confidence, 0.9);
  EXPECT_EQ(rels[0].arg1->slice(text), "The bus was late.");
  EXPECT_EQ(rels[0].arg2->slice(text), "I walked.");
}

TEST(Implicit, ThreeSentencesInDocumentOrder) {
  const std::string text = "One. Two. Three.";
  ConstantParser p(Framework::kPdtbImplicit, {"Temporal", 0.4});
  auto rels = extract_implicit_pdtb(text, p, SenseInventory::standard());
  ASSERT_EQ(rels.size(), 2u);
  EXPECT_LT(rels[0].arg1->begin, rels[1].arg1->begin);
  EXPECT_EQ(rels[0].arg2, rels[1].arg1);
}

TEST(Implicit, PairsLinkedExplicitlyAreSkipped) {
  const std::string text = "I hate this. However, you are right. Go on.";
  auto explicit_rels = extract_explicit_pdtb(text, however_only());
  ConstantParser p(Framework::kPdtbImplicit, {"Expansion.Conjunction", 0.9});
  auto rels = extract_implicit_pdtb(text, p, SenseInventory::standard(), "r", explicit_rels);
  ASSERT_EQ(rels.size(), 1u);
  EXPECT_EQ(rels[0].arg2->slice(text), "Go on.");
}

TEST(Implicit, FailuresAndUnknownLabelsAreSkipped) {
  ThrowingParser bad(Framework::kPdtbImplicit);
  EXPECT_TRUE(extract_implicit_pdtb("A. B.", bad, SenseInventory::standard()).empty());
  ConstantParser odd(Framework::kPdtbImplicit, {"Made.Up", 0.9});
  EXPECT_TRUE(extract_implicit_pdtb("A. B.", odd, SenseInventory::standard()).empty());
}

TEST(Implicit, WrongFrameworkIsError) {
  ConstantParser p(Framework::kRstRoot, {"Elaboration", 0.9});
  EXPECT_THROW(extract_implicit_pdtb("A. B.", p, SenseInventory::standard()), Error);
}

TEST(Rst, StubPassthroughAndParagraphInput) {
  RecordingParser p(Framework::kRstRoot, {"Elaboration", 0.8});
  auto r = extract_rst_root("You are wrong.", std::string("Cats are great."), p,
                            SenseInventory::standard());
  ASSERT_TRUE(r.has_value());
  EXPECT_EQ(r->framework, Framework::kRstRoot);
  EXPECT_EQ(r->sense, "Elaboration");
  EXPECT_DOUBLE_EQ(r->confidence, 0.8);
  EXPECT_FALSE(r->arg1.has_value());
  ASSERT_EQ(p.texts.size(), 1u);
  EXPECT_EQ(p.texts[0], "Cats are great.\n\nYou are wrong.");
}

TEST(Rst, MissingParentSpanAndFailureAreAbsent) {
  auto inv = SenseInventory::standard();
  ConstantParser p(Framework::kRstRoot, {"Elaboration", 0.8});
  EXPECT_FALSE(extract_rst_root("x", std::nullopt, p, inv).has_value());
  ConstantParser span(Framework::kRstRoot, {"span", 0.8});
  EXPECT_FALSE(extract_rst_root("x", std::string("y"), span, inv).has_value());
  ThrowingParser bad(Framework::kRstRoot);
  EXPECT_FALSE(extract_rst_root("x", std::string("y"), bad, inv).has_value());
}

TEST(GoldStub, MatchesByIdAndSpans) {
  const std::string text = "The bus was late. I walked.";
  DiscourseRelation gold{Framework::kPdtbImplicit, "Contingency.Cause", Span{0, 17}, Span{18, 27},
                         0.7};
  json row = gold;
  row["id"] = "r1";
  DiscourseRelation root{Framework::kRstRoot, "Background", std::nullopt, std::nullopt, 0.6};
  json rst_row = root;
  rst_row["id"] = "r1";

  GoldStubParser implicit(Framework::kPdtbImplicit, {row, rst_row});
  auto rels = extract_implicit_pdtb(text, implicit, SenseInventory::standard(), "r1");
  ASSERT_EQ(rels.size(), 1u);
  EXPECT_EQ(rels[0], gold);
  EXPECT_TRUE(extract_implicit_pdtb(text, implicit, SenseInventory::standard(), "r2").empty());

  GoldStubParser rst(Framework::kRstRoot, {row, rst_row});
  auto r = extract_rst_root(text, std::string("parent"), rst, SenseInventory::standard(), "r1");
  ASSERT_TRUE(r.has_value());
  EXPECT_EQ(*r, root);
}

TEST(Parsers, SpecStrings) {
  auto p = make_parser(Framework::kRstRoot, "const:Elaboration@0.8");
  auto s = p->classify({"x", "text", std::nullopt, std::nullopt});
  ASSERT_TRUE(s.has_value());
  EXPECT_EQ(s->sense, "Elaboration");
  EXPECT_DOUBLE_EQ(s->confidence, 0.8);
  EXPECT_THROW(make_parser(Framework::kRstRoot, "neural:x"), Error);
}

TEST(Relations, ValidateCatchesBadSpans) {
  auto inv = SenseInventory::standard();
  DiscourseRelation r{Framework::kPdtbExplicit, "Comparison.Contrast", Span{0, 5}, Span{3, 8}, 1.0};
  EXPECT_FALSE(validate_relation(r, "0123456789", inv).empty());
  r.arg2 = Span{5, 20};
  EXPECT_FALSE(validate_relation(r, "0123456789", inv).empty());
  r.arg2 = Span{5, 8};
  EXPECT_TRUE(validate_relation(r, "0123456789", inv).empty());
  r.sense = "Elaboration";
  EXPECT_FALSE(validate_relation(r, "0123456789", inv).empty());
}

TEST(Relations, JsonRoundTripAndFile) {
  auto dir = scratch_dir("relations");
  auto f = detox::testing::relation_rich_fixture();
  std::vector<AnnotatedRecord> records;
  for (const auto& [id, rels] : f.relations) records.push_back({id, rels});
  save_relations(dir / "rel.jsonl", records);
  EXPECT_EQ(load_relations(dir / "rel.jsonl"), f.relations);
}

TEST(Annotate, ParallelMatchesSerialAndSerializesUnsafeAdapters) {
  auto lex = shipped_lexicon();
  std::vector<AnnotationRequest> requests;
  std::mt19937_64 rng(3);
  for (int i = 0; i < 40; ++i) {
    requests.push_back({"r" + std::to_string(i),
                        "First part. However, second part" + std::to_string(rng() % 100) +
                            ". Third.",
                        i % 5 == 0 ? std::nullopt : std::optional<std::string>("parent")});
  }
  ConstantParser implicit(Framework::kPdtbImplicit, {"Expansion.Conjunction", 0.5});
  RecordingParser rst_serial(Framework::kRstRoot, {"Joint", 0.5});
  RecordingParser rst_parallel(Framework::kRstRoot, {"Joint", 0.5});
  Annotators serial{&lex, &implicit, &rst_serial, SenseInventory::standard()};
  Annotators parallel{&lex, &implicit, &rst_parallel, SenseInventory::standard()};
  auto a = annotate_corpus(requests, serial, 1);
  auto b = annotate_corpus(requests, parallel, 4);
  ASSERT_EQ(a.size(), requests.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].id, requests[i].id);
    EXPECT_EQ(a[i].relations, b[i].relations);
  }
  EXPECT_FALSE(rst_parallel.overlapped_.load());
  EXPECT_EQ(rst_parallel.texts.size(), 32u);
}

// Property: every emitted span slices cleanly and re-embedding the slices
// reproduces the text.
TEST(ExplicitProperty, SpansSliceBackIntoText) {
  auto lex = shipped_lexicon();
  auto inv = SenseInventory::standard();
  const std::vector<std::string> pieces = {"You are wrong", "however", "because", "I think",
                                           "but",           "also",    "then",    "it rained",
                                           "so",            "nobody",  "cares",   "although"};
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    std::string text;
    const int words = 2 + static_cast<int>(rng() % 12);
    for (int w = 0; w < words; ++w) {
      if (!text.empty()) text += rng() % 4 == 0 ? ". " : (rng() % 3 == 0 ? ", " : " ");
      text += pieces[rng() % pieces.size()];
    }
    text += ".";
    for (const auto& r : extract_explicit_pdtb(text, lex)) {
      ASSERT_TRUE(validate_relation(r, text, inv).empty()) << text;
      for (const auto& span : {*r.arg1, *r.arg2}) {
        std::string rebuilt = text.substr(0, span.begin) + std::string(span.slice(text)) +
                              text.substr(span.end);
        EXPECT_EQ(rebuilt, text);
        EXPECT_FALSE(span.empty()) << text;
      }
    }
  }
}
