#include <gtest/gtest.h>

#include "detox/train.hpp"
#include "support/fixtures.hpp"

using namespace detox;
using detox::testing::copy_task;
using detox::testing::make_record;
using detox::testing::scratch_dir;

namespace {

ReferenceOptions small_options(std::uint64_t seed = 1) {
  ReferenceOptions o;
  o.hidden = 16;
  o.max_positions = 64;
  o.seed = seed;
  return o;
}

// Echoes its input, optionally padded with extra tokens, to test the
// wrapper around BackendAdapter::generate.
class EchoBackend final : public BackendAdapter {
 public:
  std::size_t emit_tokens = 0;
  bool is_trained = true;
  std::vector<std::string> extra;

  std::string name() const override { return "echo"; }
  std::size_t vocabulary_size() const override { return 260 + extra.size(); }
  std::size_t embedding_rows() const override { return 260 + extra.size(); }
  std::size_t augment_vocabulary(const std::vector<std::string>& tokens) override {
    extra.insert(extra.end(), tokens.begin(), tokens.end());
    return vocabulary_size();
  }
  std::vector<TokenId> encode(std::string_view text) const override {
    return std::vector<TokenId>(text.size(), 4);
  }
  std::vector<std::string> added_tokens() const override { return extra; }
  std::vector<double> finetune(const std::vector<TrainingExample>&,
                               const TrainConfig& config) override {
    return std::vector<double>(config.epochs, 1.0);
  }
  bool trained() const override { return is_trained; }
  Generation generate(std::string_view input, const GenerationParams&) const override {
    return {std::string(input), emit_tokens};
  }
};

// Claims to grow the vocabulary without growing the embedding table.
class LeakyBackend final : public BackendAdapter {
 public:
  std::size_t size = 260;
  std::string name() const override { return "leaky"; }
  std::size_t vocabulary_size() const override { return size; }
  std::size_t embedding_rows() const override { return 260; }
  std::size_t augment_vocabulary(const std::vector<std::string>& tokens) override {
    size += tokens.size();
    return size;
  }
  std::vector<TokenId> encode(std::string_view) const override { return {}; }
  std::vector<std::string> added_tokens() const override { return {}; }
  std::vector<double> finetune(const std::vector<TrainingExample>&, const TrainConfig&) override {
    return {};
  }
  bool trained() const override { return false; }
  Generation generate(std::string_view, const GenerationParams&) const override { return {}; }
};

}  // namespace

TEST(Configs, ChecksAndJson) {
  TrainConfig t;
  EXPECT_NO_THROW(t.check());
  t.batch_size = 0;
  EXPECT_THROW(t.check(), Error);
  GenerationParams g;
  EXPECT_NO_THROW(g.check());
  g.top_p = 1.5;
  EXPECT_THROW(g.check(), Error);
  g = GenerationParams{};
  g.max_length = 0;
  EXPECT_THROW(g.check(), Error);

  TrainConfig defaults;
  EXPECT_EQ(defaults.block_size, 512u);
  EXPECT_EQ(defaults.batch_size, 2u);
  EXPECT_DOUBLE_EQ(defaults.learning_rate, 5e-5);
  EXPECT_EQ(defaults.epochs, 10u);
  auto back = json(defaults).get<TrainConfig>();
  EXPECT_EQ(json(back), json(defaults));
  GenerationParams gp;
  EXPECT_EQ(gp.max_length, 200u);
  EXPECT_DOUBLE_EQ(gp.top_p, 0.7);
  EXPECT_DOUBLE_EQ(gp.temperature, 0.8);
}

TEST(Augment, GrowsByTokenCountAndChecksEmbedding) {
  ReferenceBackend backend(small_options());
  const std::size_t v = backend.vocabulary_size();
  auto tokens = vocabulary(variant_matrix()[6].config);  // rst
  ASSERT_EQ(tokens.size(), 18u);
  EXPECT_EQ(augment_tokenizer(backend, tokens), v + 18);
  EXPECT_EQ(backend.embedding_rows(), backend.vocabulary_size());
  EXPECT_THROW(augment_tokenizer(backend, {tokens[0]}), Error);

  LeakyBackend leaky;
  EXPECT_THROW(augment_tokenizer(leaky, {"<x>"}), Error);
}

TEST(Finetune, EmptyDatasetIsError) {
  ReferenceBackend backend(small_options());
  EXPECT_THROW(finetune(backend, {}, TrainConfig{}), Error);
}

TEST(Finetune, BlockSizeErrorNamesRecord) {
  ReferenceBackend backend(small_options());
  TrainConfig config;
  config.block_size = 8;
  std::vector<TrainingExample> data = {{"short", "a", "b"}, {"long-one", "a", "far too long target"}};
  try {
    finetune(backend, data, config);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("long-one"), std::string::npos) << e.what();
  }
}

TEST(Finetune, CopyTaskLossDecreasesAtDefaultSettings) {
  ReferenceBackend backend(small_options());
  auto curve = finetune(backend, copy_task(50, 4), TrainConfig{});
  ASSERT_EQ(curve.size(), 10u);
  EXPECT_LT(curve.back(), curve.front());
  EXPECT_TRUE(backend.trained());
}

TEST(Finetune, SeededRunsAreIdentical) {
  auto data = copy_task(12, 5);
  TrainConfig config;
  config.epochs = 3;
  config.learning_rate = 1e-3;
  ReferenceBackend a(small_options(9)), b(small_options(9));
  EXPECT_EQ(finetune(a, data, config), finetune(b, data, config));
  GenerationParams g;
  g.seed = 3;
  g.max_length = 20;
  EXPECT_EQ(a.generate("red cat", g).text, b.generate("red cat", g).text);
}

TEST(Generate, UntrainedBackendIsError) {
  ReferenceBackend backend(small_options());
  EXPECT_THROW(generate(backend, ModelInput{"x", "text", {}, 0}, GenerationParams{}), Error);
}

TEST(Generate, RespectsMaxLength) {
  ReferenceBackend backend(small_options());
  TrainConfig config;
  config.epochs = 1;
  finetune(backend, copy_task(4, 1), config);
  for (std::size_t cap : {1u, 5u, 200u}) {
    GenerationParams g;
    g.max_length = cap;
    g.temperature = 5.0;  // flat distribution: eos is unlikely to come early
    g.top_p = 1.0;
    auto out = backend.generate("red cat", g);
    EXPECT_LE(out.tokens, std::min<std::size_t>(cap, 64));
  }
}

TEST(Generate, WrapperStripsSpecialAndAddedTokens) {
  EchoBackend echo;
  echo.augment_vocabulary({"<custom>"});
  ModelInput in{"x", "<rst:Joint> hello <custom> there", {}, 0};
  EXPECT_EQ(generate(echo, in, GenerationParams{}), "hello there");
  EXPECT_EQ(generate(echo, ModelInput{"y", "ok \xb3", {}, 0}, GenerationParams{}), "ok \xef\xbf\xbd");
  echo.emit_tokens = 201;
  EXPECT_THROW(generate(echo, in, GenerationParams{}), Error);
  echo.is_trained = false;
  echo.emit_tokens = 0;
  EXPECT_THROW(generate(echo, in, GenerationParams{}), Error);
}

TEST(Generate, AllIsIndependentOfWorkerCount) {
  ReferenceBackend backend(small_options());
  TrainConfig config;
  config.epochs = 2;
  config.learning_rate = 1e-3;
  auto data = copy_task(6, 2);
  finetune(backend, data, config);
  std::vector<ModelInput> inputs;
  for (const auto& ex : data) inputs.push_back({ex.id, ex.input, {}, 0});
  GenerationParams g;
  g.max_length = 16;
  g.seed = 5;
  auto one = generate_all(backend, inputs, g, 1);
  auto four = generate_all(backend, inputs, g, 4);
  ASSERT_EQ(one.size(), inputs.size());
  for (std::size_t i = 0; i < one.size(); ++i) {
    EXPECT_EQ(one[i].id, inputs[i].source_id);
    EXPECT_EQ(one[i].text, four[i].text);
  }
}

// Four pairs, lr 1e-2, 150 epochs, batch 1.
TEST(Finetune, MemorizesSmallCopyTask) {
  ReferenceBackend backend(small_options(4));
  auto data = copy_task(4, 11);
  TrainConfig config;
  config.epochs = 150;
  config.learning_rate = 1e-2;
  config.batch_size = 1;
  finetune(backend, data, config);
  GenerationParams g;
  g.greedy = true;
  g.max_length = 40;
  std::size_t exact = 0;
  for (const auto& ex : data) exact += backend.generate(ex.input, g).text == ex.target;
  EXPECT_GE(exact, 3u);
}

TEST(Backend, SaveLoadRoundTrip) {
  auto dir = scratch_dir("backend");
  ReferenceBackend backend(small_options());
  backend.augment_vocabulary({"<rst:Joint>"});
  TrainConfig config;
  config.epochs = 2;
  config.learning_rate = 1e-3;
  finetune(backend, copy_task(4, 3), config);
  backend.save(dir);
  auto back = ReferenceBackend::load(dir);
  EXPECT_TRUE(back.trained());
  EXPECT_EQ(back.added_tokens(), backend.added_tokens());
  GenerationParams g;
  g.seed = 1;
  g.max_length = 20;
  EXPECT_EQ(back.generate("<rst:Joint> red", g).text, backend.generate("<rst:Joint> red", g).text);
  EXPECT_THROW(ReferenceBackend::load(dir / "missing"), Error);
}

TEST(TrainingSet, PairsInputsWithRewrites) {
  std::vector<StyleTransferPair> corpus = {make_record("a", "x", "rx"), make_record("b", "y", "ry")};
  corpus.push_back(make_record("d", "z"));
  corpus.back().change_type = ChangeType::kDiscard;
  corpus.back().rewrite.reset();
  std::vector<ModelInput> inputs = {{"b", "<rst:Joint> y", {}, 0}, {"d", "z", {}, 0}};
  auto set = make_training_set(inputs, corpus);
  ASSERT_EQ(set.size(), 1u);
  EXPECT_EQ(set[0].id, "b");
  EXPECT_EQ(set[0].input, "<rst:Joint> y");
  EXPECT_EQ(set[0].target, "ry");
  inputs.push_back({"ghost", "?", {}, 0});
  EXPECT_THROW(make_training_set(inputs, corpus), Error);
}

TEST(Variants, MatrixHasTenLabelledConfigs) {
  auto variants = variant_matrix();
  ASSERT_EQ(variants.size(), 10u);
  std::vector<std::string> labels;
  for (const auto& v : variants) labels.push_back(v.label);
  EXPECT_EQ(labels, (std::vector<std::string>{
                        "baseline", "pdtb_l1_explicit", "pdtb_l1_implicit", "pdtb_l2_explicit",
                        "pdtb_l2_implicit", "pdtb_l2_combined", "rst", "rst_pdtb_zero",
                        "rst_pdtb_mean_minus_std", "rst_pdtb_first_quartile"}));
}

TEST(Variants, ProduceDistinctCorporaOnRelationRichFixture) {
  auto f = detox::testing::relation_rich_fixture();
  std::vector<std::vector<std::string>> corpora;
  for (const auto& v : variant_matrix()) {
    Thresholds t = resolve_thresholds(v.config, f.relations);
    std::vector<std::string> texts;
    for (const auto& r : f.corpus) {
      texts.push_back(build_input(r, f.relations.at(r.id), v.config, t).text);
    }
    corpora.push_back(texts);
  }
  for (std::size_t i = 0; i < corpora.size(); ++i) {
    for (std::size_t j = i + 1; j < corpora.size(); ++j) {
      EXPECT_NE(corpora[i], corpora[j]) << i << " vs " << j;
    }
  }
}
