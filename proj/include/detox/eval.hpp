#pragma once

#include <array>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "detox/collect.hpp"
#include "detox/common.hpp"
#include "detox/corpus.hpp"
#include "detox/train.hpp"

namespace detox {

// Stated in every report header.
inline constexpr std::string_view kBleuVariant =
    "corpus BLEU-4; uniform weights; no smoothing; cased; tokens are alphanumeric runs "
    "(non-ASCII bytes count as word characters) and single punctuation characters";

// Word tokenizer used by BLEU and the token-F1 scorer. Whitespace separates;
// each non-word, non-space byte is its own token.
std::vector<std::string> metric_tokens(std::string_view text);

struct BleuCounts {
  std::array<std::size_t, 4> matches{};  // clipped n-gram matches, n = 1..4
  std::array<std::size_t, 4> totals{};   // candidate n-grams, n = 1..4
  std::size_t candidate_length = 0;
  std::size_t reference_length = 0;
};

BleuCounts bleu_counts(const std::vector<std::string>& candidates,
                       const std::vector<std::string>& references);

// 0 when any n-gram order has no match (no smoothing).
double bleu_from_counts(const BleuCounts& counts);

// Corpus BLEU in [0, 100].
double bleu(const std::vector<std::string>& candidates, const std::vector<std::string>& references);

// 100 * inoffensive / n. Items the classifier fails on count as offensive;
// their indices are appended to `failures` when given.
double safe_score(const std::vector<std::string>& texts, ClassifierAdapter& classifier,
                  std::vector<std::size_t>* failures = nullptr);

class SemanticScorerAdapter {
 public:
  virtual ~SemanticScorerAdapter() = default;
  virtual std::string name() const = 0;
  virtual bool rescaled() const = 0;
  virtual double max_score() const = 0;
  virtual double score(const std::vector<std::string>& candidates,
                       const std::vector<std::string>& references) = 0;
};

// Mean per-pair F1 of token multisets. Not BERTScore.
class TokenF1Scorer final : public SemanticScorerAdapter {
 public:
  std::string name() const override { return "token_f1"; }
  bool rescaled() const override { return false; }
  double max_score() const override { return 1.0; }
  double score(const std::vector<std::string>& candidates,
               const std::vector<std::string>& references) override;

  static double pair_f1(std::string_view candidate, std::string_view reference);
};

// "token_f1" is the only built-in scorer.
std::unique_ptr<SemanticScorerAdapter> make_scorer(const std::string& spec);

double semantic_score(const std::vector<std::string>& candidates,
                      const std::vector<std::string>& references, SemanticScorerAdapter& scorer);

struct MetricBlock {
  double bleu = 0.0;
  double semantic = 0.0;  // scorer value x 100
  double safe = 0.0;
};

struct EvalReport {
  MetricBlock vs_annotated;
  MetricBlock vs_original;
  std::size_t n = 0;
  std::string config_label;
  std::string bleu_variant{kBleuVariant};
  std::string semantic_scorer;
  bool semantic_rescaled = false;
  std::size_t classifier_failures = 0;
};

void to_json(json& j, const EvalReport& report);
void from_json(const json& j, EvalReport& report);

// Outputs are matched to non-discarded pairs by id. Any output without a
// pair is an error, as is an empty match.
EvalReport evaluate(const std::vector<GeneratedOutput>& outputs,
                    const std::vector<StyleTransferPair>& pairs, ClassifierAdapter& classifier,
                    SemanticScorerAdapter& scorer, std::string config_label = {});

// Two blocks ("Compared Against Annotated Text", "Compared Against Original
// Text") with one row per report: label, BLEU, semantic, SafeScore.
std::string format_table(const std::vector<EvalReport>& reports);

}  // namespace detox
