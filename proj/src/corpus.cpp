#include "detox/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

namespace detox {

std::string to_string(ChangeType type) {
  switch (type) {
    case ChangeType::kLocal: return "local";
    case ChangeType::kGlobal: return "global";
    case ChangeType::kDiscard: return "discard";
  }
  return "local";
}

std::string to_string(SplitName split) {
  switch (split) {
    case SplitName::kTrain: return "train";
    case SplitName::kDev: return "dev";
    case SplitName::kTest: return "test";
    case SplitName::kUnassigned: return "unassigned";
  }
  return "unassigned";
}

ChangeType parse_change_type(std::string_view text) {
  if (text == "local") return ChangeType::kLocal;
  if (text == "global") return ChangeType::kGlobal;
  if (text == "discard") return ChangeType::kDiscard;
  throw Error("unknown change_type '" + std::string(text) + "'");
}

SplitName parse_split_name(std::string_view text) {
  if (text == "train") return SplitName::kTrain;
  if (text == "dev") return SplitName::kDev;
  if (text == "test") return SplitName::kTest;
  if (text == "unassigned") return SplitName::kUnassigned;
  throw Error("unknown split '" + std::string(text) + "'");
}

void to_json(json& j, const StyleTransferPair& pair) {
  j = json{{"id", pair.id},
           {"original", pair.original},
           {"change_type", to_string(pair.change_type)},
           {"reasons", pair.reasons},
           {"parent_body", pair.parent_body},
           {"split", to_string(pair.split)}};
  if (pair.rewrite) j["rewrite"] = *pair.rewrite;
  if (pair.subreddit) j["subreddit"] = *pair.subreddit;
}

void from_json(const json& j, StyleTransferPair& pair) {
  if (!j.is_object()) throw Error("record must be a JSON object");
  pair = StyleTransferPair{};
  pair.id = j.at("id").get<std::string>();
  pair.original = j.at("original").get<std::string>();
  if (auto it = j.find("rewrite"); it != j.end() && !it->is_null()) {
    pair.rewrite = it->get<std::string>();
  }
  pair.change_type = parse_change_type(j.at("change_type").get<std::string>());
  if (auto it = j.find("reasons"); it != j.end() && !it->is_null()) {
    for (const auto& reason : *it) pair.reasons.insert(reason.get<std::string>());
  }
  pair.parent_body = j.value("parent_body", std::string());
  if (auto it = j.find("split"); it != j.end() && !it->is_null()) {
    pair.split = parse_split_name(it->get<std::string>());
  }
  if (auto it = j.find("subreddit"); it != j.end() && !it->is_null()) {
    pair.subreddit = it->get<std::string>();
  }
}

std::vector<std::string> validate_record(const StyleTransferPair& record) {
  std::vector<std::string> violations;
  if (record.id.empty()) violations.push_back("id: must be non-empty");
  if (record.original.empty()) violations.push_back("original: must be non-empty");
  if (record.change_type == ChangeType::kDiscard) {
    if (record.rewrite) violations.push_back("rewrite: must be absent when change_type is discard");
    if (record.split != SplitName::kUnassigned) {
      violations.push_back("split: discarded records are never assigned to a split");
    }
  } else {
    if (!record.rewrite) {
      violations.push_back("rewrite: required unless change_type is discard");
    } else if (record.rewrite->empty()) {
      violations.push_back("rewrite: must be non-empty unless change_type is discard");
    }
    if (record.reasons.empty()) {
      violations.push_back("reasons: at least one reason required unless change_type is discard");
    }
  }
  for (const auto& reason : record.reasons) {
    if (trim(reason).empty()) {
      violations.push_back("reasons: tags must be non-blank");
      break;
    }
  }
  return violations;
}

std::vector<StyleTransferPair> load_corpus(const std::filesystem::path& path) {
  std::vector<StyleTransferPair> corpus;
  std::unordered_map<std::string, std::size_t> first_seen;
  for_each_line(path, [&](std::size_t line_number, const std::string& line) {
    const std::string where = path.string() + ": line " + std::to_string(line_number);
    StyleTransferPair record;
    try {
      record = json::parse(line).get<StyleTransferPair>();
    } catch (const json::exception& e) {
      throw Error(where + ": malformed record: " + e.what());
    } catch (const Error& e) {
      throw Error(where + ": malformed record: " + e.what());
    }
    auto violations = validate_record(record);
    if (!violations.empty()) throw Error(where + ": invalid record: " + violations.front());
    auto [it, inserted] = first_seen.emplace(record.id, line_number);
    if (!inserted) {
      throw Error(where + ": duplicate id '" + record.id + "' (first seen on line " +
                  std::to_string(it->second) + ")");
    }
    corpus.push_back(std::move(record));
  });
  return corpus;
}

void save_corpus(const std::filesystem::path& path,
                 const std::vector<StyleTransferPair>& corpus) {
  std::vector<json> rows;
  rows.reserve(corpus.size());
  for (const auto& record : corpus) rows.emplace_back(record);
  write_jsonl(path, rows);
}

void SplitSpec::check() const {
  double sum = 0.0;
  for (double r : ratios) {
    if (!(r > 0.0)) throw Error("split ratios must all be positive");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw Error("split ratios must sum to 1.0");
}

std::array<double, 3> parse_ratios(std::string_view text) {
  auto parts = split_string(text, ',');
  if (parts.size() != 3) throw Error("expected three comma-separated ratios");
  std::array<double, 3> ratios{};
  for (std::size_t i = 0; i < 3; ++i) {
    try {
      std::size_t used = 0;
      ratios[i] = std::stod(parts[i], &used);
      if (used != parts[i].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw Error("invalid ratio '" + parts[i] + "'");
    }
  }
  return ratios;
}

SplitResult split(const std::vector<StyleTransferPair>& corpus, const SplitSpec& spec) {
  spec.check();
  SplitResult result;
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (corpus[i].change_type == ChangeType::kDiscard) {
      result.excluded.push_back(corpus[i]);
      result.excluded.back().split = SplitName::kUnassigned;
    } else {
      eligible.push_back(i);
    }
  }
  const std::size_t n = eligible.size();
  if (n < 3) throw Error("corpus too small to split: need at least 3 non-discarded records");

  // The small epsilon absorbs representation error such as 0.1 * 30.
  auto share = [n](double ratio) {
    return static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) + 1e-9));
  };
  const std::size_t n_dev = share(spec.ratios[1]);
  const std::size_t n_test = share(spec.ratios[2]);

  std::vector<std::pair<std::uint64_t, std::size_t>> keyed;
  keyed.reserve(n);
  for (std::size_t i : eligible) keyed.emplace_back(stable_hash(corpus[i].id, spec.seed), i);
  std::sort(keyed.begin(), keyed.end(), [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return corpus[a.second].id < corpus[b.second].id;
  });

  std::vector<SplitName> assignment(corpus.size(), SplitName::kUnassigned);
  for (std::size_t rank = 0; rank < n; ++rank) {
    SplitName name = SplitName::kTrain;
    if (rank < n_dev) {
      name = SplitName::kDev;
    } else if (rank < n_dev + n_test) {
      name = SplitName::kTest;
    }
    assignment[keyed[rank].second] = name;
  }
  for (std::size_t i : eligible) {
    StyleTransferPair record = corpus[i];
    record.split = assignment[i];
    switch (record.split) {
      case SplitName::kDev: result.dev.push_back(std::move(record)); break;
      case SplitName::kTest: result.test.push_back(std::move(record)); break;
      default: result.train.push_back(std::move(record)); break;
    }
  }
  return result;
}

namespace {

std::string lowercase(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace

std::string subreddit_group(std::string_view subreddit) {
  static const std::unordered_map<std::string, std::string> kGroups = {
      {"conservative", "politics"},
      {"politicalcompassmemes", "politics"},
      {"politics", "politics"},
      {"politicalhumor", "politics"},
      {"conspiracy", "politics"},
      {"socialism", "politics"},
      {"anarcho_capitalism", "politics"},
      {"unpopularopinion", "personal views"},
      {"changemyview", "personal views"},
      {"amitheasshole", "personal views"},
      {"offmychest", "personal views"},
      {"askreddit", "question-answer"},
      {"askscience", "question-answer"},
      {"askhistorians", "question-answer"},
      {"explainlikeimfive", "question-answer"},
      {"mensrights", "gender rights"},
      {"femaledatingstrategy", "gender rights"},
  };
  std::string key = lowercase(trim(subreddit));
  if (key.rfind("/r/", 0) == 0) key = key.substr(3);
  if (key.rfind("r/", 0) == 0) key = key.substr(2);
  auto it = kGroups.find(key);
  return it == kGroups.end() ? "other" : it->second;
}

std::map<std::string, std::size_t> group_counts(
    const std::vector<StyleTransferPair>& corpus) {
  std::map<std::string, std::size_t> counts;
  for (const auto& record : corpus) {
    ++counts[record.subreddit ? subreddit_group(*record.subreddit) : "other"];
  }
  return counts;
}

}  // namespace detox
