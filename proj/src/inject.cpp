#include "detox/inject.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace detox {

namespace {

const char* role_suffix(TokenRole role) {
  switch (role) {
    case TokenRole::kArg1Open:
    case TokenRole::kArg1Close: return "arg1";
    case TokenRole::kArg2Open:
    case TokenRole::kArg2Close: return "arg2";
    case TokenRole::kRstPrefix: return "";
  }
  return "";
}

bool is_close(TokenRole role) {
  return role == TokenRole::kArg1Close || role == TokenRole::kArg2Close;
}

constexpr TokenRole kPdtbRoles[] = {TokenRole::kArg1Open, TokenRole::kArg1Close,
                                    TokenRole::kArg2Open, TokenRole::kArg2Close};

}  // namespace

std::string relation_token(Framework framework, std::string_view sense, TokenRole role,
                           const SenseInventory& inventory) {
  const bool rst = framework == Framework::kRstRoot;
  if (rst != (role == TokenRole::kRstPrefix)) {
    throw Error("token role does not match framework " + to_string(framework));
  }
  if (rst) {
    if (!inventory.is_rst(sense)) throw Error("RST class '" + std::string(sense) + "' not in inventory");
    return "<rst:" + std::string(sense) + ">";
  }
  if (!inventory.is_pdtb(sense)) {
    throw Error("PDTB sense '" + std::string(sense) + "' not in inventory");
  }
  std::string token = is_close(role) ? "</pdtb:" : "<pdtb:";
  token += sense;
  token += ':';
  token += role_suffix(role);
  token += '>';
  return token;
}

std::string relation_token(const DiscourseRelation& relation, TokenRole role,
                           const SenseInventory& inventory) {
  return relation_token(relation.framework, relation.sense, role, inventory);
}

std::string to_string(ThresholdKind kind) {
  switch (kind) {
    case ThresholdKind::kZero: return "zero";
    case ThresholdKind::kMeanMinusStd: return "mean_minus_std";
    case ThresholdKind::kFirstQuartile: return "first_quartile";
  }
  return "zero";
}

ThresholdKind parse_threshold_kind(std::string_view text) {
  if (text == "zero") return ThresholdKind::kZero;
  if (text == "mean_minus_std") return ThresholdKind::kMeanMinusStd;
  if (text == "first_quartile") return ThresholdKind::kFirstQuartile;
  throw Error("unknown alpha policy '" + std::string(text) + "'");
}

ScoreStats score_stats(const std::vector<double>& scores, std::string population) {
  if (scores.empty()) throw Error("score statistics need at least one score");
  ScoreStats stats;
  stats.n = scores.size();
  stats.population = std::move(population);
  const double n = static_cast<double>(scores.size());
  stats.mean = std::accumulate(scores.begin(), scores.end(), 0.0) / n;
  double ss = 0.0;
  for (double s : scores) ss += (s - stats.mean) * (s - stats.mean);
  stats.std = std::sqrt(ss / n);

  std::vector<double> sorted = scores;
  std::sort(sorted.begin(), sorted.end());
  const double h = 0.25 * (n - 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const double frac = h - static_cast<double>(lo);
  stats.q1 = sorted[lo];
  if (lo + 1 < sorted.size()) stats.q1 += frac * (sorted[lo + 1] - sorted[lo]);
  return stats;
}

ThresholdPolicy compute_threshold(const std::vector<double>& scores, ThresholdKind kind,
                                  std::string population) {
  ThresholdPolicy policy;
  policy.kind = kind;
  if (kind == ThresholdKind::kZero) {
    if (!scores.empty()) policy.stats = score_stats(scores, std::move(population));
    policy.resolved_alpha = 0.0;
    return policy;
  }
  if (scores.empty()) {
    throw Error("alpha policy " + to_string(kind) + " needs at least one classifier score");
  }
  policy.stats = score_stats(scores, std::move(population));
  double alpha = kind == ThresholdKind::kMeanMinusStd ? policy.stats->mean - policy.stats->std
                                                      : policy.stats->q1;
  policy.resolved_alpha = std::clamp(alpha, 0.0, 1.0);
  return policy;
}

FilterResult filter_relations(const std::vector<DiscourseRelation>& relations, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error("alpha must lie in [0, 1]");
  FilterResult result;
  for (const auto& relation : relations) {
    if (relation.confidence < alpha) {
      ++result.dropped;
    } else {
      result.kept.push_back(relation);
    }
  }
  return result;
}

namespace {

std::vector<Span> spans_of(const DiscourseRelation& relation) {
  std::vector<Span> spans;
  if (relation.arg1) spans.push_back(*relation.arg1);
  if (relation.arg2) spans.push_back(*relation.arg2);
  return spans;
}

std::size_t start_of(const DiscourseRelation& relation) {
  std::size_t start = SIZE_MAX;
  for (const auto& span : spans_of(relation)) start = std::min(start, span.begin);
  return start;
}

bool relations_overlap(const DiscourseRelation& a, const DiscourseRelation& b) {
  for (const auto& x : spans_of(a)) {
    for (const auto& y : spans_of(b)) {
      if (x.overlaps(y)) return true;
    }
  }
  return false;
}

}  // namespace

FilterResult resolve_overlaps(const std::vector<DiscourseRelation>& relations) {
  std::vector<std::size_t> order(relations.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (relations[a].confidence != relations[b].confidence) {
      return relations[a].confidence > relations[b].confidence;
    }
    return start_of(relations[a]) < start_of(relations[b]);
  });
  FilterResult result;
  for (std::size_t i : order) {
    bool clash = std::any_of(result.kept.begin(), result.kept.end(), [&](const auto& kept) {
      return relations_overlap(kept, relations[i]);
    });
    if (clash) {
      ++result.dropped;
    } else {
      result.kept.push_back(relations[i]);
    }
  }
  std::stable_sort(result.kept.begin(), result.kept.end(),
                   [](const DiscourseRelation& a, const DiscourseRelation& b) {
                     return a.arg1->begin < b.arg1->begin;
                   });
  return result;
}

std::string inject_pdtb(std::string_view text, const std::vector<DiscourseRelation>& relations,
                        const SenseInventory& inventory) {
  struct Marked {
    Span span;
    std::string open;
    std::string close;
  };
  std::vector<Marked> marks;
  for (const auto& relation : relations) {
    if (!relation.is_pdtb()) throw Error("inject_pdtb given a non-PDTB relation");
    if (!relation.arg1 || !relation.arg2) throw Error("PDTB relation without argument spans");
    for (int arg = 0; arg < 2; ++arg) {
      const Span span = arg == 0 ? *relation.arg1 : *relation.arg2;
      if (!span.within(text.size()) || span.empty()) {
        throw Error("argument span out of bounds or empty");
      }
      marks.push_back({span,
                       relation_token(relation, arg == 0 ? TokenRole::kArg1Open : TokenRole::kArg2Open,
                                      inventory),
                       relation_token(relation, arg == 0 ? TokenRole::kArg1Close : TokenRole::kArg2Close,
                                      inventory)});
    }
  }
  std::sort(marks.begin(), marks.end(),
            [](const Marked& a, const Marked& b) { return a.span.begin < b.span.begin; });
  for (std::size_t i = 1; i < marks.size(); ++i) {
    if (marks[i - 1].span.overlaps(marks[i].span)) {
      throw Error("overlapping argument spans reached inject_pdtb");
    }
  }
  std::string out;
  out.reserve(text.size() + marks.size() * 48);
  std::size_t cursor = 0;
  for (const auto& mark : marks) {
    out.append(text.substr(cursor, mark.span.begin - cursor));
    out += mark.open;
    out += ' ';
    out.append(mark.span.slice(text));
    out += ' ';
    out += mark.close;
    cursor = mark.span.end;
  }
  out.append(text.substr(cursor));
  return out;
}

std::string inject_rst(std::string_view text, const std::optional<DiscourseRelation>& root,
                       const SenseInventory& inventory) {
  if (!root) return std::string(text);
  std::string out = relation_token(*root, TokenRole::kRstPrefix, inventory);
  out += ' ';
  out.append(text);
  return out;
}

void InjectionConfig::check() const {
  const bool any = use_pdtb_explicit || use_pdtb_implicit || use_rst;
  if (baseline && any) throw Error("baseline config may not enable a discourse framework");
  if (!baseline && !any) {
    throw Error("config enables no discourse framework; set \"baseline\": true for the "
                "no-injection variant");
  }
  inventory.check();
}

void to_json(json& j, const InjectionConfig& config) {
  j = json{{"label", config.label},
           {"use_pdtb_explicit", config.use_pdtb_explicit},
           {"use_pdtb_implicit", config.use_pdtb_implicit},
           {"pdtb_level", config.pdtb_level == PdtbLevel::kL1 ? "L1" : "L2"},
           {"use_rst", config.use_rst},
           {"alpha_policy", to_string(config.alpha_policy)},
           {"filter_explicit", config.filter_explicit},
           {"baseline", config.baseline},
           {"inventory", config.inventory}};
}

void from_json(const json& j, InjectionConfig& config) {
  config = InjectionConfig{};
  config.label = j.value("label", std::string());
  config.use_pdtb_explicit = j.value("use_pdtb_explicit", false);
  config.use_pdtb_implicit = j.value("use_pdtb_implicit", false);
  const std::string level = j.value("pdtb_level", std::string("L2"));
  if (level == "L1") {
    config.pdtb_level = PdtbLevel::kL1;
  } else if (level == "L2") {
    config.pdtb_level = PdtbLevel::kL2;
  } else {
    throw Error("pdtb_level must be L1 or L2");
  }
  config.use_rst = j.value("use_rst", false);
  config.alpha_policy = parse_threshold_kind(j.value("alpha_policy", std::string("zero")));
  config.filter_explicit = j.value("filter_explicit", false);
  config.baseline = j.value("baseline", false);
  if (j.contains("inventory")) config.inventory = j.at("inventory").get<SenseInventory>();
  config.check();
}

Thresholds resolve_thresholds(
    const InjectionConfig& config,
    const std::map<std::string, std::vector<DiscourseRelation>>& training_relations) {
  Thresholds thresholds;
  if (config.alpha_policy == ThresholdKind::kZero || config.baseline) return thresholds;
  std::vector<double> explicit_scores, implicit_scores, rst_scores;
  for (const auto& [id, relations] : training_relations) {
    for (const auto& relation : relations) {
      switch (relation.framework) {
        case Framework::kPdtbExplicit: explicit_scores.push_back(relation.confidence); break;
        case Framework::kPdtbImplicit: implicit_scores.push_back(relation.confidence); break;
        case Framework::kRstRoot: rst_scores.push_back(relation.confidence); break;
      }
    }
  }
  // A population with no predictions leaves its framework unfiltered.
  auto resolve = [&](const std::vector<double>& scores, const char* name, double& alpha) {
    if (scores.empty()) return;
    auto policy = compute_threshold(scores, config.alpha_policy, name);
    alpha = policy.resolved_alpha;
    thresholds.stats[name] = *policy.stats;
  };
  if (config.use_pdtb_explicit && config.filter_explicit) {
    resolve(explicit_scores, "pdtb_explicit", thresholds.pdtb_explicit);
  }
  if (config.use_pdtb_implicit) resolve(implicit_scores, "pdtb_implicit", thresholds.pdtb_implicit);
  if (config.use_rst) resolve(rst_scores, "rst_root", thresholds.rst);
  return thresholds;
}

void to_json(json& j, const ModelInput& input) {
  j = json{{"source_id", input.source_id},
           {"text", input.text},
           {"tokens_used", input.tokens_used},
           {"dropped_relations", input.dropped_relations}};
}

void from_json(const json& j, ModelInput& input) {
  input = ModelInput{};
  input.source_id = j.at("source_id").get<std::string>();
  input.text = j.at("text").get<std::string>();
  if (j.contains("tokens_used")) input.tokens_used = j.at("tokens_used").get<std::set<std::string>>();
  input.dropped_relations = j.value("dropped_relations", std::size_t{0});
}

ModelInput build_input(const StyleTransferPair& record,
                       const std::vector<DiscourseRelation>& relations,
                       const InjectionConfig& config, const Thresholds& thresholds) {
  config.check();
  ModelInput input;
  input.source_id = record.id;
  if (config.baseline) {
    input.text = record.original;
    return input;
  }
  const SenseInventory& inventory = config.inventory;
  std::vector<DiscourseRelation> pdtb;
  std::vector<DiscourseRelation> rst;
  std::size_t dropped = 0;

  for (DiscourseRelation relation : relations) {
    if (relation.framework == Framework::kRstRoot) {
      if (!config.use_rst) continue;
      if (!inventory.is_rst(relation.sense)) {
        throw Error(record.id + ": RST class '" + relation.sense + "' not in inventory");
      }
      if (relation.confidence < thresholds.rst) {
        ++dropped;
        continue;
      }
      rst.push_back(std::move(relation));
      continue;
    }
    const bool is_explicit = relation.framework == Framework::kPdtbExplicit;
    if (is_explicit ? !config.use_pdtb_explicit : !config.use_pdtb_implicit) continue;
    if (!inventory.is_pdtb(relation.sense)) {
      throw Error(record.id + ": PDTB sense '" + relation.sense + "' not in inventory");
    }
    auto violations = validate_relation(relation, record.original, inventory);
    if (!violations.empty()) throw Error(record.id + ": " + violations.front());
    if (config.pdtb_level == PdtbLevel::kL1) {
      relation.sense = l1_of(relation.sense);
    } else if (!inventory.is_l2(relation.sense)) {
      // Class-only label cannot be expressed at level 2.
      ++dropped;
      continue;
    }
    const double alpha = is_explicit ? (config.filter_explicit ? thresholds.pdtb_explicit : 0.0)
                                     : thresholds.pdtb_implicit;
    if (relation.confidence < alpha) {
      ++dropped;
      continue;
    }
    pdtb.push_back(std::move(relation));
  }

  FilterResult resolved = resolve_overlaps(pdtb);
  dropped += resolved.dropped;

  std::optional<DiscourseRelation> root;
  for (auto& candidate : rst) {
    if (!root || candidate.confidence > root->confidence) {
      if (root) ++dropped;
      root = candidate;
    } else {
      ++dropped;
    }
  }

  input.text = inject_rst(inject_pdtb(record.original, resolved.kept, inventory), root, inventory);
  for (const auto& relation : resolved.kept) {
    for (TokenRole role : kPdtbRoles) input.tokens_used.insert(relation_token(relation, role, inventory));
  }
  if (root) input.tokens_used.insert(relation_token(*root, TokenRole::kRstPrefix, inventory));
  input.dropped_relations = dropped;
  return input;
}

std::string strip_tokens(std::string_view marked, const std::set<std::string>& tokens) {
  std::string out;
  out.reserve(marked.size());
  std::size_t i = 0;
  while (i < marked.size()) {
    if (marked[i] == '<') {
      std::size_t close = marked.find('>', i + 1);
      if (close != std::string_view::npos) {
        std::string candidate(marked.substr(i, close - i + 1));
        if (tokens.count(candidate)) {
          if (candidate.rfind("</", 0) == 0) {
            if (!out.empty() && out.back() == ' ') out.pop_back();
            i = close + 1;
          } else {
            i = close + 1;
            if (i < marked.size() && marked[i] == ' ') ++i;
          }
          continue;
        }
      }
    }
    out.push_back(marked[i]);
    ++i;
  }
  return out;
}

std::string strip_markers(std::string_view marked, const SenseInventory& inventory) {
  return strip_tokens(marked, all_tokens(inventory));
}

std::vector<std::string> vocabulary(const InjectionConfig& config) {
  config.check();
  std::vector<std::string> tokens;
  std::set<std::string> seen;
  auto add = [&](std::string token) {
    if (seen.insert(token).second) tokens.push_back(std::move(token));
  };
  const SenseInventory& inventory = config.inventory;
  if (config.use_rst) {
    for (const auto& cls : inventory.rst_top) {
      add(relation_token(Framework::kRstRoot, cls, TokenRole::kRstPrefix, inventory));
    }
  }
  if (config.uses_pdtb()) {
    const auto& senses = config.pdtb_level == PdtbLevel::kL1 ? inventory.pdtb_l1 : inventory.pdtb_l2;
    for (const auto& sense : senses) {
      for (TokenRole role : kPdtbRoles) {
        add(relation_token(Framework::kPdtbExplicit, sense, role, inventory));
      }
    }
  }
  return tokens;
}

std::set<std::string> all_tokens(const SenseInventory& inventory) {
  std::set<std::string> tokens;
  for (const auto& cls : inventory.rst_top) {
    tokens.insert(relation_token(Framework::kRstRoot, cls, TokenRole::kRstPrefix, inventory));
  }
  for (const auto* list : {&inventory.pdtb_l1, &inventory.pdtb_l2}) {
    for (const auto& sense : *list) {
      for (TokenRole role : kPdtbRoles) {
        tokens.insert(relation_token(Framework::kPdtbExplicit, sense, role, inventory));
      }
    }
  }
  return tokens;
}

}  // namespace detox
