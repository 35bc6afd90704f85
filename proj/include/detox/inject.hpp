#pragma once

// Relation injection: turns a comment and its discourse relations into
// relation-marked model input. PDTB arguments are wrapped in open/close
// tokens inside the body; the RST root relation becomes a prefix token.
//
//   <rst:Elaboration> <pdtb:Comparison.Contrast:arg1> I hate this.
//   </pdtb:Comparison.Contrast:arg1> However, <pdtb:Comparison.Contrast:arg2>
//   you are right. </pdtb:Comparison.Contrast:arg2>
//
// Every open token is followed by exactly one space and every close token is
// preceded by exactly one space, which makes strip_markers an exact inverse.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "detox/common.hpp"
#include "detox/corpus.hpp"
#include "detox/discourse.hpp"

namespace detox {

enum class TokenRole { kArg1Open, kArg1Close, kArg2Open, kArg2Close, kRstPrefix };

// "<pdtb:{sense}:arg1>", "</pdtb:{sense}:arg1>", ... and "<rst:{class}>".
// Explicit and implicit PDTB relations share tokens. Throws Error for a
// sense outside the inventory or a role that does not fit the framework.
std::string relation_token(Framework framework, std::string_view sense, TokenRole role,
                           const SenseInventory& inventory);
std::string relation_token(const DiscourseRelation& relation, TokenRole role,
                           const SenseInventory& inventory);

enum class PdtbLevel { kL1, kL2 };
enum class ThresholdKind { kZero, kMeanMinusStd, kFirstQuartile };

std::string to_string(ThresholdKind kind);
ThresholdKind parse_threshold_kind(std::string_view text);

struct ScoreStats {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
  double q1 = 0.0;   // linear interpolation between order statistics
  std::size_t n = 0;
  std::string population;
};

struct ThresholdPolicy {
  ThresholdKind kind = ThresholdKind::kZero;
  double resolved_alpha = 0.0;
  std::optional<ScoreStats> stats;
};

ScoreStats score_stats(const std::vector<double>& scores, std::string population = {});

// zero -> 0; mean_minus_std -> mean - std; first_quartile -> Q1.
// Throws Error for empty scores under a non-zero policy. The resolved alpha
// is clamped into [0, 1].
ThresholdPolicy compute_threshold(const std::vector<double>& scores, ThresholdKind kind,
                                  std::string population = {});

struct FilterResult {
  std::vector<DiscourseRelation> kept;
  std::size_t dropped = 0;
};

// Keeps relations with confidence >= alpha, in order; only strictly lower
// confidences are dropped.
FilterResult filter_relations(const std::vector<DiscourseRelation>& relations, double alpha);

// Resolves overlapping PDTB relations: a relation whose spans intersect a
// higher-confidence relation is dropped (ties keep the earlier-starting
// one). The result is sorted by arg1 start.
FilterResult resolve_overlaps(const std::vector<DiscourseRelation>& relations);

// Wraps each argument of each relation. Relations must already be free of
// overlaps; throws Error otherwise or for invalid spans.
std::string inject_pdtb(std::string_view text, const std::vector<DiscourseRelation>& relations,
                        const SenseInventory& inventory);

// Prepends "<rst:{class}> " when a root relation is given.
std::string inject_rst(std::string_view text, const std::optional<DiscourseRelation>& root,
                       const SenseInventory& inventory);

struct InjectionConfig {
  std::string label;
  bool use_pdtb_explicit = false;
  bool use_pdtb_implicit = false;
  PdtbLevel pdtb_level = PdtbLevel::kL2;
  bool use_rst = false;
  ThresholdKind alpha_policy = ThresholdKind::kZero;
  // Apply alpha to explicit relations as well (off: only implicit and RST).
  bool filter_explicit = false;
  // Set for the no-injection variant; requires every framework disabled.
  bool baseline = false;
  SenseInventory inventory = SenseInventory::standard();

  bool uses_pdtb() const { return use_pdtb_explicit || use_pdtb_implicit; }
  void check() const;
};

void to_json(json& j, const InjectionConfig& config);
void from_json(const json& j, InjectionConfig& config);

// Resolved alpha per scored population. Scores from different classifiers
// are not comparable, so each framework has its own threshold.
struct Thresholds {
  double pdtb_explicit = 0.0;
  double pdtb_implicit = 0.0;
  double rst = 0.0;
  std::map<std::string, ScoreStats> stats;
};

// Resolves the config's policy from relations predicted on the training
// split (pass only those records' relations).
Thresholds resolve_thresholds(
    const InjectionConfig& config,
    const std::map<std::string, std::vector<DiscourseRelation>>& training_relations);

struct ModelInput {
  std::string source_id;
  std::string text;
  std::set<std::string> tokens_used;
  std::size_t dropped_relations = 0;

  friend bool operator==(const ModelInput&, const ModelInput&) = default;
};

void to_json(json& j, const ModelInput& input);
void from_json(const json& j, ModelInput& input);

// Framework toggles, L1 projection, alpha filtering, overlap resolution,
// then inject_pdtb and inject_rst.
ModelInput build_input(const StyleTransferPair& record,
                       const std::vector<DiscourseRelation>& relations,
                       const InjectionConfig& config, const Thresholds& thresholds);

// Removes every token of `tokens` together with its padding space.
// Substrings that look like tokens but are not in the set are kept.
std::string strip_tokens(std::string_view marked, const std::set<std::string>& tokens);

// strip_tokens over every token the inventory can produce.
std::string strip_markers(std::string_view marked, const SenseInventory& inventory);

// Ordered, duplicate-free special-token list for the config, derived from
// the full inventory: RST prefixes first, then per PDTB sense the four
// argument tokens.
std::vector<std::string> vocabulary(const InjectionConfig& config);

// Every token the inventory can produce, for any config.
std::set<std::string> all_tokens(const SenseInventory& inventory);

}  // namespace detox
