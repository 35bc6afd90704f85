#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "detox/common.hpp"
#include "detox/corpus.hpp"
#include "detox/discourse.hpp"
#include "detox/train.hpp"

namespace detox {

class NotFoundError : public Error {
 public:
  using Error::Error;
};

// Request conflicts with session state: closed session, open session on
// aggregate, or a different judgment for an already judged item.
class ConflictError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

enum class Answer { kA, kB, kNoPreference };
std::string to_string(Answer answer);
Answer parse_answer(std::string_view text);

enum class Question { kContentPreservation, kCoherence, kOverall };
inline constexpr std::array<Question, 3> kQuestions = {
    Question::kContentPreservation, Question::kCoherence, Question::kOverall};
std::string to_string(Question question);

struct JudgeItem {
  std::string item_id;
  std::string original;
  std::string parent;
  std::string output_a;
  std::string output_b;
  bool model1_is_a = true;  // hidden until the session is closed
};

// Full record including the assignment. Only for storage and closed sessions.
void to_json(json& j, const JudgeItem& item);
void from_json(const json& j, JudgeItem& item);

// What a judge may see: texts labeled A and B, nothing else.
json blinded_view(const JudgeItem& item, bool include_parent = true);

struct Judgment {
  std::string item_id;
  std::array<Answer, 3> answers{};  // indexed like kQuestions
  std::string judge_id;
  std::string timestamp;

  // Identity for idempotence; the timestamp is not part of it.
  bool same_submission(const Judgment& other) const {
    return item_id == other.item_id && answers == other.answers && judge_id == other.judge_id;
  }
};

// Accepts {"item_id", "judge_id", "answers": {"content_preservation": "A", ...}}.
// Throws ValidationError on missing or unknown answers.
void to_json(json& j, const Judgment& judgment);
void from_json(const json& j, Judgment& judgment);

struct JudgingSession {
  std::string session_id;
  std::uint64_t seed = 0;
  std::vector<JudgeItem> items;
  std::map<std::string, Judgment> judgments;
  bool closed = false;

  const JudgeItem* find(const std::string& item_id) const;
  // First item in session order without a judgment.
  const JudgeItem* next_pending() const;
  // Public progress summary; never contains assignments.
  json summary() const;
};

// Samples n_items ids without replacement from the model-1 outputs that
// have a corpus record, then flips one seeded coin per item for the A/B
// order. Errors when the pool is too small or model 2 lacks a sampled id.
JudgingSession create_session(const std::vector<GeneratedOutput>& outputs_model1,
                              const std::vector<GeneratedOutput>& outputs_model2,
                              const std::vector<StyleTransferPair>& corpus, std::size_t n_items,
                              std::uint64_t seed, std::string session_id = {});

enum class RecordOutcome { kStored, kDuplicate };

// In-memory state change; see SessionStore::record for the persisted form.
RecordOutcome record_judgment(JudgingSession& session, const Judgment& judgment);

enum class Subset { kAll, kHasDiscourseRelation };
std::string to_string(Subset subset);
Subset parse_subset(std::string_view text);

struct PreferenceRow {
  std::size_t model_1 = 0;
  std::size_t model_2 = 0;
  std::size_t no_preference = 0;
  double model_1_pct = 0.0;
  double model_2_pct = 0.0;
  double no_preference_pct = 0.0;
};

struct AggregateTable {
  Subset subset = Subset::kAll;
  std::size_t n = 0;
  std::array<PreferenceRow, 3> questions{};  // indexed like kQuestions
};

void to_json(json& j, const AggregateTable& table);

// Relation index keyed by record id; an item qualifies for the subset when
// it has at least one relation of any framework.
using RelationIndex = std::map<std::string, std::vector<DiscourseRelation>>;

// Percentages are over judged items in the subset, unrounded.
AggregateTable aggregate(const JudgingSession& session, Subset subset,
                         const RelationIndex& relations = {});

// Append-only event log per session under <root>/sessions/<id>.jsonl:
//   {"event":"created", "session_id", "seed", "items":[...]}
//   {"event":"judgment", ...Judgment}
//   {"event":"closed"}
// Writes to one session are serialized; reads return immutable snapshots.
class SessionStore {
 public:
  explicit SessionStore(std::filesystem::path root);

  void create(const JudgingSession& session);
  std::shared_ptr<const JudgingSession> get(const std::string& session_id);
  RecordOutcome record(const std::string& session_id, const Judgment& judgment);
  // Returns false when the session was already closed.
  bool close(const std::string& session_id);
  std::vector<std::string> list() const;

  // Rebuilds a session from its log, ignoring a torn final line.
  static JudgingSession replay(const std::filesystem::path& log_path);

  const std::filesystem::path& root() const { return root_; }

 private:
  struct Entry {
    std::mutex write;
    std::shared_ptr<const JudgingSession> snapshot;
  };

  std::filesystem::path log_path(const std::string& session_id) const;
  std::shared_ptr<Entry> entry(const std::string& session_id);
  static void append(const std::filesystem::path& path, const json& event);

  std::filesystem::path root_;
  mutable std::mutex entries_mutex_;
  std::map<std::string, std::shared_ptr<Entry>> entries_;
};

// Rewrite-authoring queue for the annotation endpoints. Pending comments
// come from <root>/annotation_queue.jsonl (rows with "id", "original" or
// "body", and optional "parent_body"); accepted records are appended to
// <root>/annotations.jsonl.
class AnnotationQueue {
 public:
  explicit AnnotationQueue(std::filesystem::path root);

  // Next queued comment without an accepted record, or nothing.
  std::optional<json> next();
  // Validates with validate_record; throws ValidationError listing the
  // violations, ConflictError for an id already annotated.
  void submit(const StyleTransferPair& record);
  std::size_t annotated() const;

 private:
  std::filesystem::path root_;
  mutable std::mutex mutex_;
};

}  // namespace detox
