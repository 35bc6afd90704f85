#pragma once

// Annotated style-transfer corpus: records, JSONL schema, validation and
// deterministic train/dev/test splitting.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "detox/common.hpp"

namespace detox {

enum class ChangeType { kLocal, kGlobal, kDiscard };
enum class SplitName { kTrain, kDev, kTest, kUnassigned };

std::string to_string(ChangeType type);
std::string to_string(SplitName split);
ChangeType parse_change_type(std::string_view text);
SplitName parse_split_name(std::string_view text);

// Recommended reason tags. The set is open: any non-empty string is accepted.
inline const std::array<std::string_view, 5> kRecommendedReasons = {
    "Cursing", "Insults", "Xenophobia", "Rudeness", "Threats of Violence"};

struct StyleTransferPair {
  std::string id;
  std::string original;
  std::optional<std::string> rewrite;  // absent iff change_type == kDiscard
  ChangeType change_type = ChangeType::kLocal;
  std::set<std::string> reasons;
  std::string parent_body;
  SplitName split = SplitName::kUnassigned;
  // Source community, kept when the ingest provides it (used for the
  // per-group distribution report).
  std::optional<std::string> subreddit;

  friend bool operator==(const StyleTransferPair&, const StyleTransferPair&) = default;
};

void to_json(json& j, const StyleTransferPair& pair);
void from_json(const json& j, StyleTransferPair& pair);

// Violations are returned as "<field>: <rule>" strings; empty means valid.
std::vector<std::string> validate_record(const StyleTransferPair& record);

// Loads a JSONL corpus. Throws Error naming the line for malformed or
// invalid records, and naming the id for duplicates.
std::vector<StyleTransferPair> load_corpus(const std::filesystem::path& path);
void save_corpus(const std::filesystem::path& path,
                 const std::vector<StyleTransferPair>& corpus);

struct SplitSpec {
  std::array<double, 3> ratios = {0.8, 0.1, 0.1};  // train, dev, test
  std::uint64_t seed = 0;

  // Throws Error unless every ratio is positive and they sum to 1 (1e-9).
  void check() const;
};

// Parses "0.8,0.1,0.1".
std::array<double, 3> parse_ratios(std::string_view text);

struct SplitResult {
  std::vector<StyleTransferPair> train;
  std::vector<StyleTransferPair> dev;
  std::vector<StyleTransferPair> test;
  // Discarded records never enter a split.
  std::vector<StyleTransferPair> excluded;
};

// Dev and test receive floor(ratio * N) records each and train the rest,
// where N counts the non-discarded records. Membership depends only on the
// seed and record ids; input order is kept inside each split.
SplitResult split(const std::vector<StyleTransferPair>& corpus, const SplitSpec& spec);

// Subreddit group totals for the distribution report (politics, personal
// views, question-answer, gender rights, other).
std::string subreddit_group(std::string_view subreddit);
std::map<std::string, std::size_t> group_counts(
    const std::vector<StyleTransferPair>& corpus);

}  // namespace detox
