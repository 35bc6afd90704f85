#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "detox/common.hpp"
#include "detox/corpus.hpp"
#include "detox/inject.hpp"
#include "detox/reference_model.hpp"
#include "detox/tokenizer.hpp"

namespace detox {

struct TrainConfig {
  std::size_t block_size = 512;
  std::size_t batch_size = 2;
  double learning_rate = 5e-5;
  std::size_t epochs = 10;
  std::uint64_t seed = 0;

  void check() const;
};

void to_json(json& j, const TrainConfig& config);
void from_json(const json& j, TrainConfig& config);

struct GenerationParams {
  std::size_t max_length = 200;
  double top_p = 0.7;
  double temperature = 0.8;
  std::uint64_t seed = 0;
  // Argmax decoding for tests; sampling is the normal mode.
  bool greedy = false;

  void check() const;
};

void to_json(json& j, const GenerationParams& params);
void from_json(const json& j, GenerationParams& params);

struct TrainingExample {
  std::string id;
  std::string input;
  std::string target;
};

struct Generation {
  std::string text;
  std::size_t tokens = 0;  // emitted, excluding end-of-sequence
};

class BackendAdapter {
 public:
  virtual ~BackendAdapter() = default;

  virtual std::string name() const = 0;
  virtual std::size_t vocabulary_size() const = 0;
  virtual std::size_t embedding_rows() const = 0;
  virtual std::size_t augment_vocabulary(const std::vector<std::string>& tokens) = 0;
  virtual std::vector<TokenId> encode(std::string_view text) const = 0;
  // Tokens the backend treats as atomic additions.
  virtual std::vector<std::string> added_tokens() const = 0;
  virtual std::vector<double> finetune(const std::vector<TrainingExample>& dataset,
                                       const TrainConfig& config) = 0;
  virtual bool trained() const = 0;
  // Raw decoding; may contain special tokens. Must be safe to call
  // concurrently on a const backend.
  virtual Generation generate(std::string_view input, const GenerationParams& params) const = 0;
};

struct ReferenceOptions {
  std::size_t hidden = 32;
  std::size_t max_positions = 512;
  std::uint64_t seed = 0;
};

void to_json(json& j, const ReferenceOptions& options);
void from_json(const json& j, ReferenceOptions& options);

// Byte tokenizer plus the small encoder-decoder. Model directory layout:
//   weights.bin     raw parameters
//   tokenizer.json  tokenizer manifest (added tokens in id order)
//   config.json     {"backend": "ref", "options": ..., "train": ..., "loss_curve": ...}
class ReferenceBackend : public BackendAdapter {
 public:
  explicit ReferenceBackend(ReferenceOptions options = {});

  std::string name() const override { return "ref"; }
  std::size_t vocabulary_size() const override { return tokenizer_.size(); }
  std::size_t embedding_rows() const override { return model_.vocab_size(); }
  std::size_t augment_vocabulary(const std::vector<std::string>& tokens) override;
  std::vector<TokenId> encode(std::string_view text) const override { return tokenizer_.encode(text); }
  std::vector<std::string> added_tokens() const override { return tokenizer_.added_tokens(); }
  std::vector<double> finetune(const std::vector<TrainingExample>& dataset,
                               const TrainConfig& config) override;
  bool trained() const override { return trained_; }
  Generation generate(std::string_view input, const GenerationParams& params) const override;

  const ReferenceOptions& options() const { return options_; }
  const ByteTokenizer& tokenizer() const { return tokenizer_; }
  const ReferenceModel& model() const { return model_; }

  void save(const std::filesystem::path& dir) const;
  static ReferenceBackend load(const std::filesystem::path& dir);

 private:
  ReferenceOptions options_;
  ByteTokenizer tokenizer_;
  ReferenceModel model_;
  bool trained_ = false;
  std::optional<TrainConfig> last_config_;
  std::vector<double> loss_curve_;
};

// Returns the new vocabulary size; checks that the embedding table grew
// with the tokenizer.
std::size_t augment_tokenizer(BackendAdapter& backend, const std::vector<std::string>& tokens);

// Validates block size per example (errors name the record id) and returns
// the per-epoch loss curve.
std::vector<double> finetune(BackendAdapter& backend, const std::vector<TrainingExample>& dataset,
                             const TrainConfig& config);

// Capped, stripped generation for one input.
std::string generate(const BackendAdapter& backend, const ModelInput& input,
                     const GenerationParams& params);

struct GeneratedOutput {
  std::string id;
  std::string text;
};

void to_json(json& j, const GeneratedOutput& output);
void from_json(const json& j, GeneratedOutput& output);

// Each item samples with a seed derived from (params.seed, source id), so
// results do not depend on the worker count.
std::vector<GeneratedOutput> generate_all(const BackendAdapter& backend,
                                          const std::vector<ModelInput>& inputs,
                                          const GenerationParams& params, std::size_t workers = 1);

// Pairs model inputs with corpus rewrites by id. Discarded records and
// records without an input are skipped.
std::vector<TrainingExample> make_training_set(const std::vector<ModelInput>& inputs,
                                               const std::vector<StyleTransferPair>& corpus);

struct Variant {
  std::string label;
  InjectionConfig config;
};

// Baseline; PDTB L1/L2 x explicit/implicit; L2 combined; RST; RST + PDTB
// under each threshold policy.
std::vector<Variant> variant_matrix(const SenseInventory& inventory = SenseInventory::standard());

}  // namespace detox
