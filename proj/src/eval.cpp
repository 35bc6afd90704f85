#include "detox/eval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

namespace detox {

namespace {

bool word_byte(unsigned char c) { return std::isalnum(c) || c >= 0x80; }

using Ngram = std::vector<std::string>;

std::map<Ngram, std::size_t> ngram_counts(const std::vector<std::string>& tokens, std::size_t n) {
  std::map<Ngram, std::size_t> counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    ++counts[Ngram(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                   tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return counts;
}

void require_aligned(std::size_t candidates, std::size_t references) {
  if (candidates != references) {
    throw Error("length mismatch: " + std::to_string(candidates) + " candidates, " +
                std::to_string(references) + " references");
  }
}

std::string fixed1(double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.1f", value);
  return buffer;
}

}  // namespace

std::vector<std::string> metric_tokens(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (std::isspace(c)) {
      ++i;
    } else if (word_byte(c)) {
      std::size_t j = i;
      while (j < text.size() && word_byte(static_cast<unsigned char>(text[j]))) ++j;
      tokens.emplace_back(text.substr(i, j - i));
      i = j;
    } else {
      tokens.emplace_back(1, text[i]);
      ++i;
    }
  }
  return tokens;
}

BleuCounts bleu_counts(const std::vector<std::string>& candidates,
                       const std::vector<std::string>& references) {
  require_aligned(candidates.size(), references.size());
  BleuCounts counts;
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    const auto cand = metric_tokens(candidates[k]);
    const auto ref = metric_tokens(references[k]);
    counts.candidate_length += cand.size();
    counts.reference_length += ref.size();
    for (std::size_t n = 1; n <= 4; ++n) {
      const auto cand_ngrams = ngram_counts(cand, n);
      const auto ref_ngrams = ngram_counts(ref, n);
      for (const auto& [gram, count] : cand_ngrams) {
        counts.totals[n - 1] += count;
        auto it = ref_ngrams.find(gram);
        if (it != ref_ngrams.end()) counts.matches[n - 1] += std::min(count, it->second);
      }
    }
  }
  return counts;
}

double bleu_from_counts(const BleuCounts& counts) {
  double log_precision = 0.0;
  for (std::size_t n = 0; n < 4; ++n) {
    if (counts.totals[n] == 0 || counts.matches[n] == 0) return 0.0;
    log_precision += std::log(static_cast<double>(counts.matches[n]) /
                              static_cast<double>(counts.totals[n]));
  }
  const double c = static_cast<double>(counts.candidate_length);
  const double r = static_cast<double>(counts.reference_length);
  const double brevity = c > r ? 1.0 : std::exp(1.0 - r / c);
  return 100.0 * brevity * std::exp(log_precision / 4.0);
}

double bleu(const std::vector<std::string>& candidates, const std::vector<std::string>& references) {
  if (candidates.empty()) throw Error("BLEU needs at least one candidate");
  return bleu_from_counts(bleu_counts(candidates, references));
}

double safe_score(const std::vector<std::string>& texts, ClassifierAdapter& classifier,
                  std::vector<std::size_t>* failures) {
  if (texts.empty()) throw Error("safe_score needs at least one text");
  std::size_t safe = 0;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    try {
      if (classifier.label(texts[i]) == OffensiveLabel::kInoffensive) ++safe;
    } catch (const std::exception&) {
      if (failures) failures->push_back(i);
    }
  }
  return 100.0 * static_cast<double>(safe) / static_cast<double>(texts.size());
}

double TokenF1Scorer::pair_f1(std::string_view candidate, std::string_view reference) {
  const auto cand = metric_tokens(candidate);
  const auto ref = metric_tokens(reference);
  if (cand.empty() && ref.empty()) return 1.0;
  if (cand.empty() || ref.empty()) return 0.0;
  std::map<std::string, std::size_t> ref_counts;
  for (const auto& token : ref) ++ref_counts[token];
  std::size_t overlap = 0;
  for (const auto& token : cand) {
    auto it = ref_counts.find(token);
    if (it != ref_counts.end() && it->second > 0) {
      --it->second;
      ++overlap;
    }
  }
  if (overlap == 0) return 0.0;
  const double precision = static_cast<double>(overlap) / static_cast<double>(cand.size());
  const double recall = static_cast<double>(overlap) / static_cast<double>(ref.size());
  return 2.0 * precision * recall / (precision + recall);
}

double TokenF1Scorer::score(const std::vector<std::string>& candidates,
                            const std::vector<std::string>& references) {
  require_aligned(candidates.size(), references.size());
  if (candidates.empty()) throw Error("semantic score needs at least one pair");
  double total = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) total += pair_f1(candidates[i], references[i]);
  return total / static_cast<double>(candidates.size());
}

std::unique_ptr<SemanticScorerAdapter> make_scorer(const std::string& spec) {
  if (spec == "token_f1") return std::make_unique<TokenF1Scorer>();
  throw Error("unknown semantic scorer '" + spec + "'");
}

double semantic_score(const std::vector<std::string>& candidates,
                      const std::vector<std::string>& references, SemanticScorerAdapter& scorer) {
  require_aligned(candidates.size(), references.size());
  return scorer.score(candidates, references);
}

void to_json(json& j, const EvalReport& report) {
  auto block = [](const MetricBlock& b) {
    return json{{"bleu", b.bleu}, {"semantic", b.semantic}, {"safe", b.safe}};
  };
  j = json{{"config_label", report.config_label},
           {"n", report.n},
           {"bleu_variant", report.bleu_variant},
           {"semantic_scorer", report.semantic_scorer},
           {"semantic_rescaled", report.semantic_rescaled},
           {"classifier_failures", report.classifier_failures},
           {"vs_annotated", block(report.vs_annotated)},
           {"vs_original", block(report.vs_original)}};
}

void from_json(const json& j, EvalReport& report) {
  auto block = [](const json& b) {
    return MetricBlock{b.at("bleu").get<double>(), b.at("semantic").get<double>(),
                       b.at("safe").get<double>()};
  };
  report.config_label = j.value("config_label", std::string());
  report.n = j.at("n").get<std::size_t>();
  report.bleu_variant = j.value("bleu_variant", std::string(kBleuVariant));
  report.semantic_scorer = j.value("semantic_scorer", std::string());
  report.semantic_rescaled = j.value("semantic_rescaled", false);
  report.classifier_failures = j.value("classifier_failures", std::size_t{0});
  report.vs_annotated = block(j.at("vs_annotated"));
  report.vs_original = block(j.at("vs_original"));
}

EvalReport evaluate(const std::vector<GeneratedOutput>& outputs,
                    const std::vector<StyleTransferPair>& pairs, ClassifierAdapter& classifier,
                    SemanticScorerAdapter& scorer, std::string config_label) {
  std::map<std::string, const StyleTransferPair*> by_id;
  for (const auto& pair : pairs) {
    if (pair.change_type != ChangeType::kDiscard && pair.rewrite) by_id[pair.id] = &pair;
  }
  std::vector<std::string> unmatched;
  std::set<std::string> seen;
  std::vector<std::string> texts, rewrites, originals;
  for (const auto& output : outputs) {
    if (!seen.insert(output.id).second) throw Error("duplicate output id " + output.id);
    auto it = by_id.find(output.id);
    if (it == by_id.end()) {
      unmatched.push_back(output.id);
      continue;
    }
    texts.push_back(output.text);
    rewrites.push_back(*it->second->rewrite);
    originals.push_back(it->second->original);
  }
  if (!unmatched.empty()) {
    std::string list;
    for (const auto& id : unmatched) list += (list.empty() ? "" : ", ") + id;
    throw Error("outputs without a matching non-discarded record: " + list);
  }
  if (texts.empty()) throw Error("no outputs matched the corpus");

  EvalReport report;
  report.n = texts.size();
  report.config_label = std::move(config_label);
  report.semantic_scorer = scorer.name();
  report.semantic_rescaled = scorer.rescaled();
  std::vector<std::size_t> failures;
  const double safe = safe_score(texts, classifier, &failures);
  report.classifier_failures = failures.size();
  report.vs_annotated = {bleu(texts, rewrites), 100.0 * semantic_score(texts, rewrites, scorer), safe};
  report.vs_original = {bleu(texts, originals), 100.0 * semantic_score(texts, originals, scorer), safe};
  return report;
}

std::string format_table(const std::vector<EvalReport>& reports) {
  std::size_t width = 5;
  for (const auto& report : reports) width = std::max(width, report.config_label.size());
  const std::string semantic_name = reports.empty() ? std::string("Semantic")
                                    : reports.front().semantic_scorer == "token_f1"
                                        ? std::string("TokenF1")
                                        : reports.front().semantic_scorer;
  auto pad = [](std::string text, std::size_t n) {
    if (text.size() < n) text.append(n - text.size(), ' ');
    return text;
  };
  auto lpad = [](std::string text, std::size_t n) {
    if (text.size() < n) text.insert(0, n - text.size(), ' ');
    return text;
  };
  std::string out;
  if (!reports.empty()) out += "# BLEU: " + reports.front().bleu_variant + "\n";
  const std::string header = pad("Model", width) + " | " + lpad("BLEU", 6) + " | " +
                             lpad(semantic_name, 9) + " | " + lpad("SafeScore", 9) + "\n";
  auto section = [&](const char* title, auto pick) {
    out += std::string(title) + "\n" + header;
    for (const auto& report : reports) {
      const MetricBlock& b = pick(report);
      out += pad(report.config_label, width) + " | " + lpad(fixed1(b.bleu), 6) + " | " +
             lpad(fixed1(b.semantic), 9) + " | " + lpad(fixed1(b.safe), 9) + "\n";
    }
  };
  section("Compared Against Annotated Text",
          [](const EvalReport& r) -> const MetricBlock& { return r.vs_annotated; });
  section("Compared Against Original Text",
          [](const EvalReport& r) -> const MetricBlock& { return r.vs_original; });
  return out;
}

}  // namespace detox
