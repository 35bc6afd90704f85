#pragma once

// Shared fixtures for unit and acceptance tests.

#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "detox/corpus.hpp"
#include "detox/discourse.hpp"
#include "detox/inject.hpp"
#include "detox/judge.hpp"
#include "detox/train.hpp"

namespace detox::testing {

std::filesystem::path fixture(const std::string& name);
std::filesystem::path data_file(const std::string& name);

// Fresh empty directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& tag);

ConnectiveLexicon shipped_lexicon();

// Non-discarded record with the given body and a parent.
StyleTransferPair make_record(const std::string& id, const std::string& original,
                            const std::string& rewrite = "fine",
                            SplitName split = SplitName::kTrain);

// Six records whose relations cover every framework, with implicit and RST
// confidences spread so that the three threshold policies disagree.
struct RelationRichFixture {
  std::vector<StyleTransferPair> corpus;
  std::map<std::string, std::vector<DiscourseRelation>> relations;
};
RelationRichFixture relation_rich_fixture();

// Random body, valid relations over it, and a random config.
struct RoundTripCase {
  StyleTransferPair record;
  std::vector<DiscourseRelation> relations;
  InjectionConfig config;
  Thresholds thresholds;
};
RoundTripCase random_round_trip_case(std::mt19937_64& rng);

// Fifty (input, target) pairs where the target copies the input.
std::vector<TrainingExample> copy_task(std::size_t n, std::uint64_t seed);

// Closed 100-item session whose judgments give the full-set counts
// content 36/48/16, coherence 32/37/31, overall 29/40/31 (model 1 first)
// and, on the 50 items listed in `relations`, 15/28/7, 17/23/10, 13/23/14.
struct JudgedSessionFixture {
  JudgingSession session;
  RelationIndex relations;
};
JudgedSessionFixture judged_session_fixture(std::uint64_t seed = 2022);

// Fills a session's judgments so that, per question, the items get the
// requested model-1 / model-2 / no-preference counts in item order.
void assign_preferences(JudgingSession& session, const std::vector<std::size_t>& item_indices,
                        const std::array<std::array<std::size_t, 3>, 3>& counts);

}  // namespace detox::testing
