#include "detox/train.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>

namespace detox {

void TrainConfig::check() const {
  if (block_size == 0) throw Error("block_size must be positive");
  if (batch_size == 0) throw Error("batch_size must be positive");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw Error("learning_rate must be positive");
  }
  if (epochs == 0) throw Error("epochs must be positive");
}

void to_json(json& j, const TrainConfig& config) {
  j = json{{"block_size", config.block_size},
           {"batch_size", config.batch_size},
           {"learning_rate", config.learning_rate},
           {"epochs", config.epochs},
           {"seed", config.seed}};
}

void from_json(const json& j, TrainConfig& config) {
  config = TrainConfig{};
  config.block_size = j.value("block_size", config.block_size);
  config.batch_size = j.value("batch_size", config.batch_size);
  config.learning_rate = j.value("learning_rate", config.learning_rate);
  config.epochs = j.value("epochs", config.epochs);
  config.seed = j.value("seed", config.seed);
  config.check();
}

void GenerationParams::check() const {
  if (max_length == 0) throw Error("max_length must be positive");
  if (!(top_p > 0.0 && top_p <= 1.0)) throw Error("top_p must be in (0, 1]");
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw Error("temperature must be positive");
  }
}

void to_json(json& j, const GenerationParams& params) {
  j = json{{"max_length", params.max_length},
           {"top_p", params.top_p},
           {"temperature", params.temperature},
           {"seed", params.seed},
           {"greedy", params.greedy}};
}

void from_json(const json& j, GenerationParams& params) {
  params = GenerationParams{};
  params.max_length = j.value("max_length", params.max_length);
  params.top_p = j.value("top_p", params.top_p);
  params.temperature = j.value("temperature", params.temperature);
  params.seed = j.value("seed", params.seed);
  params.greedy = j.value("greedy", params.greedy);
  params.check();
}

void to_json(json& j, const ReferenceOptions& options) {
  j = json{{"hidden", options.hidden},
           {"max_positions", options.max_positions},
           {"seed", options.seed}};
}

void from_json(const json& j, ReferenceOptions& options) {
  options = ReferenceOptions{};
  options.hidden = j.value("hidden", options.hidden);
  options.max_positions = j.value("max_positions", options.max_positions);
  options.seed = j.value("seed", options.seed);
}

namespace {

// Fisher-Yates with our own index draw.
template <typename T>
void seeded_shuffle(std::vector<T>& items, std::mt19937_64& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(items[i - 1], items[j]);
  }
}

double unit_draw(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

ReferenceBackend::ReferenceBackend(ReferenceOptions options)
    : options_(options),
      model_(ByteTokenizer::kBaseSize, options.hidden, options.max_positions, options.seed) {}

std::size_t ReferenceBackend::augment_vocabulary(const std::vector<std::string>& tokens) {
  std::size_t size = tokenizer_.add_tokens(tokens);
  model_.resize_vocabulary(size, options_.seed);
  return size;
}

std::vector<double> ReferenceBackend::finetune(const std::vector<TrainingExample>& dataset,
                                               const TrainConfig& config) {
  config.check();
  if (dataset.empty()) throw Error("empty training dataset");
  const std::size_t limit = std::min(config.block_size, model_.max_positions());
  std::vector<std::pair<std::vector<TokenId>, std::vector<TokenId>>> encoded;
  encoded.reserve(dataset.size());
  for (const auto& example : dataset) {
    auto source = tokenizer_.encode(example.input);
    auto target = tokenizer_.encode(example.target);
    target.push_back(ByteTokenizer::kEos);
    if (source.empty()) throw Error("record " + example.id + ": empty input");
    if (source.size() > limit || target.size() > limit) {
      throw Error("record " + example.id + ": sequence of " +
                  std::to_string(std::max(source.size(), target.size())) +
                  " tokens exceeds block size " + std::to_string(limit));
    }
    encoded.emplace_back(std::move(source), std::move(target));
  }

  std::mt19937_64 rng(config.seed);
  AdamOptimizer optimizer(config.learning_rate);
  ReferenceModel::Params grads;
  std::vector<std::size_t> order(encoded.size());
  std::vector<double> curve;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    seeded_shuffle(order, rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      const double weight = 1.0 / static_cast<double>(stop - start);
      grads.set_zero_like(model_.params());
      for (std::size_t k = start; k < stop; ++k) {
        const auto& [source, target] = encoded[order[k]];
        epoch_loss += model_.loss(source, target, &grads, weight);
      }
      optimizer.step(model_.params(), grads);
    }
    curve.push_back(epoch_loss / static_cast<double>(encoded.size()));
  }
  trained_ = true;
  last_config_ = config;
  loss_curve_ = curve;
  return curve;
}

Generation ReferenceBackend::generate(std::string_view input, const GenerationParams& params) const {
  if (!trained_) throw Error("backend has not been trained or loaded");
  params.check();
  auto source = tokenizer_.encode(input);
  if (source.empty()) throw Error("empty generation input");
  if (source.size() > model_.max_positions()) {
    throw Error("generation input of " + std::to_string(source.size()) +
                " tokens exceeds the model's position table");
  }
  // The position table bounds decoding as well; max_length is the hard cap.
  const std::size_t cap = std::min(params.max_length, model_.max_positions());
  ReferenceModel::Decoder decoder(model_, source);
  std::mt19937_64 rng(params.seed);
  std::vector<TokenId> emitted;
  TokenId previous = ByteTokenizer::kBos;
  for (std::size_t step = 0; step < cap; ++step) {
    Eigen::VectorXd logits = decoder.logits(previous, step);
    for (TokenId banned : {ByteTokenizer::kPad, ByteTokenizer::kBos, ByteTokenizer::kUnk}) {
      logits(banned) = -std::numeric_limits<double>::infinity();
    }
    TokenId next = 0;
    if (params.greedy) {
      Eigen::Index best = 0;
      logits.maxCoeff(&best);
      next = static_cast<TokenId>(best);
    } else {
      Eigen::VectorXd scaled = logits / params.temperature;
      const double top = scaled.maxCoeff();
      Eigen::VectorXd probs = (scaled.array() - top).exp().matrix();
      probs /= probs.sum();
      std::vector<TokenId> ids(static_cast<std::size_t>(probs.size()));
      std::iota(ids.begin(), ids.end(), 0);
      std::stable_sort(ids.begin(), ids.end(),
                       [&](TokenId a, TokenId b) { return probs(a) > probs(b); });
      double mass = 0.0;
      std::size_t keep = 0;
      while (keep < ids.size()) {
        mass += probs(ids[keep]);
        ++keep;
        if (mass >= params.top_p) break;
      }
      double draw = unit_draw(rng) * mass;
      next = ids[keep - 1];
      for (std::size_t k = 0; k < keep; ++k) {
        draw -= probs(ids[k]);
        if (draw < 0.0) {
          next = ids[k];
          break;
        }
      }
    }
    if (next == ByteTokenizer::kEos) break;
    emitted.push_back(next);
    previous = next;
  }
  return Generation{tokenizer_.decode(emitted), emitted.size()};
}

void ReferenceBackend::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  model_.save(dir / "weights.bin");
  write_file(dir / "tokenizer.json", tokenizer_.manifest().dump(2) + "\n");
  json config{{"backend", "ref"}, {"options", options_}, {"trained", trained_},
              {"loss_curve", loss_curve_}};
  if (last_config_) config["train"] = *last_config_;
  write_file(dir / "config.json", config.dump(2) + "\n");
}

ReferenceBackend ReferenceBackend::load(const std::filesystem::path& dir) {
  json config = json::parse(read_file(dir / "config.json"));
  if (config.value("backend", std::string()) != "ref") {
    throw Error(dir.string() + ": not a reference backend model directory");
  }
  ReferenceBackend backend(config.at("options").get<ReferenceOptions>());
  backend.tokenizer_ = ByteTokenizer::from_manifest(json::parse(read_file(dir / "tokenizer.json")));
  backend.model_ = ReferenceModel::load(dir / "weights.bin");
  if (backend.model_.vocab_size() != backend.tokenizer_.size()) {
    throw Error(dir.string() + ": embedding rows do not match tokenizer size");
  }
  backend.trained_ = config.value("trained", false);
  backend.loss_curve_ = config.value("loss_curve", std::vector<double>{});
  if (config.contains("train")) backend.last_config_ = config.at("train").get<TrainConfig>();
  return backend;
}

std::size_t augment_tokenizer(BackendAdapter& backend, const std::vector<std::string>& tokens) {
  const std::size_t before = backend.vocabulary_size();
  std::set<std::string> unique(tokens.begin(), tokens.end());
  if (unique.size() != tokens.size()) throw Error("duplicate token in augmentation list");
  const std::size_t after = backend.augment_vocabulary(tokens);
  if (after != before + tokens.size() || backend.vocabulary_size() != after) {
    throw Error("backend reported vocabulary size " + std::to_string(after) + ", expected " +
                std::to_string(before + tokens.size()));
  }
  if (backend.embedding_rows() != after) {
    throw Error("embedding has " + std::to_string(backend.embedding_rows()) +
                " rows but the tokenizer has " + std::to_string(after) + " entries");
  }
  return after;
}

std::vector<double> finetune(BackendAdapter& backend, const std::vector<TrainingExample>& dataset,
                             const TrainConfig& config) {
  config.check();
  if (dataset.empty()) throw Error("empty training dataset");
  for (const auto& example : dataset) {
    const std::size_t n = backend.encode(example.input).size();
    if (n > config.block_size) {
      throw Error("record " + example.id + ": input encodes to " + std::to_string(n) +
                  " tokens, exceeding block_size " + std::to_string(config.block_size));
    }
  }
  auto curve = backend.finetune(dataset, config);
  if (curve.size() != config.epochs) {
    throw Error("backend returned " + std::to_string(curve.size()) + " loss values for " +
                std::to_string(config.epochs) + " epochs");
  }
  return curve;
}

std::string generate(const BackendAdapter& backend, const ModelInput& input,
                     const GenerationParams& params) {
  if (!backend.trained()) throw Error("backend has not been trained or loaded");
  params.check();
  Generation out = backend.generate(input.text, params);
  if (out.tokens > params.max_length) {
    throw Error("backend emitted " + std::to_string(out.tokens) + " tokens, cap is " +
                std::to_string(params.max_length));
  }
  std::set<std::string> special = all_tokens(SenseInventory::standard());
  for (const auto& token : backend.added_tokens()) special.insert(token);
  return to_valid_utf8(strip_tokens(out.text, special));
}

void to_json(json& j, const GeneratedOutput& output) {
  j = json{{"id", output.id}, {"text", output.text}};
}

void from_json(const json& j, GeneratedOutput& output) {
  output.id = j.at("id").get<std::string>();
  output.text = j.at("text").get<std::string>();
}

std::vector<GeneratedOutput> generate_all(const BackendAdapter& backend,
                                          const std::vector<ModelInput>& inputs,
                                          const GenerationParams& params, std::size_t workers) {
  std::vector<GeneratedOutput> results(inputs.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (std::size_t i = next++; i < inputs.size(); i = next++) {
      try {
        GenerationParams item = params;
        item.seed = stable_hash(inputs[i].source_id, params.seed);
        results[i] = {inputs[i].source_id, generate(backend, inputs[i], item)};
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  workers = std::max<std::size_t>(1, std::min(workers, inputs.size()));
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& thread : pool) thread.join();
  if (failure) std::rethrow_exception(failure);
  return results;
}

std::vector<TrainingExample> make_training_set(const std::vector<ModelInput>& inputs,
                                               const std::vector<StyleTransferPair>& corpus) {
  std::map<std::string, const StyleTransferPair*> by_id;
  for (const auto& record : corpus) by_id[record.id] = &record;
  std::vector<TrainingExample> examples;
  for (const auto& input : inputs) {
    auto it = by_id.find(input.source_id);
    if (it == by_id.end()) throw Error("input " + input.source_id + " has no corpus record");
    const StyleTransferPair& record = *it->second;
    if (record.change_type == ChangeType::kDiscard || !record.rewrite) continue;
    examples.push_back({record.id, input.text, *record.rewrite});
  }
  return examples;
}

std::vector<Variant> variant_matrix(const SenseInventory& inventory) {
  std::vector<Variant> variants;
  auto add = [&](std::string label, auto&& configure) {
    InjectionConfig config;
    config.label = label;
    config.inventory = inventory;
    configure(config);
    config.check();
    variants.push_back({std::move(label), std::move(config)});
  };
  add("baseline", [](InjectionConfig& c) { c.baseline = true; });
  for (PdtbLevel level : {PdtbLevel::kL1, PdtbLevel::kL2}) {
    const std::string tag = level == PdtbLevel::kL1 ? "l1" : "l2";
    add("pdtb_" + tag + "_explicit", [&](InjectionConfig& c) {
      c.pdtb_level = level;
      c.use_pdtb_explicit = true;
    });
    add("pdtb_" + tag + "_implicit", [&](InjectionConfig& c) {
      c.pdtb_level = level;
      c.use_pdtb_implicit = true;
    });
  }
  add("pdtb_l2_combined", [](InjectionConfig& c) {
    c.use_pdtb_explicit = true;
    c.use_pdtb_implicit = true;
  });
  add("rst", [](InjectionConfig& c) { c.use_rst = true; });
  for (ThresholdKind kind :
       {ThresholdKind::kZero, ThresholdKind::kMeanMinusStd, ThresholdKind::kFirstQuartile}) {
    add("rst_pdtb_" + to_string(kind), [&](InjectionConfig& c) {
      c.use_rst = true;
      c.use_pdtb_explicit = true;
      c.use_pdtb_implicit = true;
      c.alpha_policy = kind;
    });
  }
  return variants;
}

}  // namespace detox
