#pragma once

// Collection pipeline: stream comments, keep those the offensiveness
// classifier flags, poll until a moderator removes them, fetch the parent,
// and persist the retained comment/parent pairs.
//
// State sequence of a retained record:
//   streamed -> tagged_offensive -> removed -> parent_resolved -> retained
// Every other path ends in discarded (or is dropped at the gate).

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "detox/common.hpp"

namespace detox {

// Seconds since the Unix epoch, UTC.
using Timestamp = std::int64_t;

std::string format_utc(Timestamp t);   // "2022-06-01T12:00:00Z"
Timestamp parse_utc(std::string_view text);

enum class CommentStatus {
  kStreamed,
  kTaggedOffensive,
  kRemoved,
  kParentResolved,
  kDiscarded,
  kRetained,
};

std::string to_string(CommentStatus status);
CommentStatus parse_comment_status(std::string_view text);

// Why a record left the pipeline without being retained.
enum class DiscardReason {
  kNone,
  kInoffensive,     // dropped at the gate
  kClassifierError, // dropped at the gate
  kDeletedByAuthor,
  kTimeout,         // never removed within max_poll_age
  kParentMissing,   // parent deleted or removed
  kTooLong,
};

std::string to_string(DiscardReason reason);
DiscardReason parse_discard_reason(std::string_view text);

struct CommentRecord {
  std::string id;
  std::string subreddit;
  std::string body;
  std::string parent_id;
  std::optional<std::string> parent_body;
  Timestamp created_at = 0;
  CommentStatus status = CommentStatus::kStreamed;
  double offensive_score = 0.0;
  DiscardReason discard_reason = DiscardReason::kNone;
  // Time at which the current status was observed.
  Timestamp updated_at = 0;

  friend bool operator==(const CommentRecord&, const CommentRecord&) = default;
};

void to_json(json& j, const CommentRecord& record);
void from_json(const json& j, CommentRecord& record);

// Only the pipeline order is legal; discarded is reachable from any
// non-terminal state.
bool is_valid_transition(CommentStatus from, CommentStatus to);
bool is_terminal(CommentStatus status);

struct RawComment {
  std::string id;
  std::string subreddit;
  std::string body;
  std::string parent_id;
  Timestamp created_at = 0;
};

enum class Accessibility { kPresent, kRemovedByModerator, kDeletedByAuthor };

// Thrown by adapters when the platform cannot be reached; the caller keeps
// the record's state and retries at the next poll.
class SourceUnavailable : public Error {
 public:
  using Error::Error;
};

class SourceAdapter {
 public:
  virtual ~SourceAdapter() = default;

  // Next streamed comment in creation order, or nullopt when exhausted.
  virtual std::optional<RawComment> next_comment() = 0;

  // Accessibility of a comment as observed at time `at`.
  virtual Accessibility status(const std::string& id, Timestamp at) = 0;

  // Body of the parent comment, or of the post for top-level comments.
  // nullopt when the parent has been deleted or removed.
  virtual std::optional<std::string> parent(const std::string& id, Timestamp at) = 0;

  // Blocks until `at` for live sources; replay sources return immediately.
  virtual void wait_until(Timestamp /*at*/) {}
};

// Replays a scripted JSONL event file. Each line is
//   {"time": <seconds or ISO-8601>, "kind": "new"|"status"|"parent",
//    "id": <thing id>, "payload": {...}}
// new:    payload {"subreddit", "body", "parent_id"}
// status: payload {"status": "present"|"removed_by_moderator"|
//                            "deleted_by_author"|"unreachable"}
// parent: payload {"body": <text or null>} for a post or comment id; a null
//         body marks the parent deleted or removed from that time on.
// Comments introduced by "new" events are also valid parents while they
// remain present.
class ReplaySource final : public SourceAdapter {
 public:
  static ReplaySource from_file(const std::filesystem::path& path);
  static ReplaySource from_events(const std::vector<json>& events);

  std::optional<RawComment> next_comment() override;
  Accessibility status(const std::string& id, Timestamp at) override;
  std::optional<std::string> parent(const std::string& id, Timestamp at) override;

 private:
  struct StatusEvent {
    Timestamp time;
    std::optional<Accessibility> value;  // nullopt: unreachable
  };
  struct ParentEvent {
    Timestamp time;
    std::optional<std::string> body;
  };

  std::vector<RawComment> comments_;
  std::size_t cursor_ = 0;
  std::map<std::string, std::vector<StatusEvent>> statuses_;
  std::map<std::string, std::vector<ParentEvent>> parents_;
  std::map<std::string, std::size_t> comment_index_;
};

enum class OffensiveLabel { kOffensive, kInoffensive };

class ClassifierAdapter {
 public:
  virtual ~ClassifierAdapter() = default;
  virtual std::string name() const = 0;
  virtual double threshold() const { return 0.5; }
  // Score in [0, 1]; may throw on failure.
  virtual double score(const std::string& text) = 0;
  // offensive iff score >= threshold.
  OffensiveLabel label(const std::string& text);
};

// Deterministic fallback: score 1.0 when any lexicon term occurs as a whole
// word (case-insensitive), else 0.0.
class LexiconClassifier final : public ClassifierAdapter {
 public:
  LexiconClassifier();  // built-in profanity/insult list
  explicit LexiconClassifier(std::set<std::string> terms, double threshold = 0.5);
  static LexiconClassifier from_file(const std::filesystem::path& path);

  std::string name() const override { return "lexicon"; }
  double threshold() const override { return threshold_; }
  double score(const std::string& text) override;

 private:
  std::set<std::string> terms_;
  double threshold_ = 0.5;
};

// Looks scores up by exact text in a JSONL table of {"text", "score"};
// unknown texts throw.
class TableClassifier final : public ClassifierAdapter {
 public:
  explicit TableClassifier(std::map<std::string, double> scores, double threshold = 0.5);
  static TableClassifier from_file(const std::filesystem::path& path);

  std::string name() const override { return "table"; }
  double threshold() const override { return threshold_; }
  double score(const std::string& text) override;

 private:
  std::map<std::string, double> scores_;
  double threshold_;
};

// "lexicon", "lexicon:<terms.txt>" or "table:<scores.jsonl>".
std::unique_ptr<ClassifierAdapter> make_classifier(const std::string& spec);

struct GateDecision {
  bool keep = false;
  double score = 0.0;
  bool failed = false;
};

// Keep iff the classifier labels the body offensive. Classifier failures
// drop the comment and are reported through `failed`.
GateDecision gate(const RawComment& comment, ClassifierAdapter& classifier);

struct PipelineConfig {
  std::size_t max_length_tokens = 512;
  std::chrono::seconds poll_interval{3600};
  std::chrono::seconds max_poll_age{7 * 24 * 3600};
  std::filesystem::path persistence_path;
  // Token counter for the length filter; defaults to UTF-8 byte count, which
  // matches the byte-level tokenizer of the reference backend.
  std::function<std::size_t(const std::string&)> count_tokens;
  // Fault injection: throw after this many log appends (simulated crash).
  std::optional<std::size_t> abort_after_appends;

  void check() const;
};

// Applies one poll result. Requires status == tagged_offensive.
// `age` is the time since the comment was created.
CommentRecord advance_status(const CommentRecord& record, SourceAdapter& source,
                             Timestamp at, std::chrono::seconds age,
                             std::chrono::seconds max_poll_age);

// Requires status == removed.
CommentRecord resolve_parent(const CommentRecord& record, SourceAdapter& source,
                             Timestamp at);

struct PipelineStats {
  std::size_t streamed = 0;
  std::size_t retained = 0;
  std::map<std::string, std::size_t> discarded;  // keyed by counter name

  std::size_t count(const std::string& key) const;
  json to_json() const;
};

// Counter names: dropped_inoffensive, dropped_classifier_error,
// discarded_deleted, discarded_timeout, discarded_parent, discarded_too_long.
std::string counter_name(DiscardReason reason);

struct PipelineResult {
  PipelineStats stats;
  std::vector<CommentRecord> retained;  // ordered by (created_at, id)
};

// Runs the pipeline to completion. The persistence file is an append-only
// JSONL log of record snapshots; the latest line per id wins. An existing
// log is resumed, so a restart after a crash reaches the same final state
// and writes no duplicate lines. Retained records are additionally written
// to `retained_path` when given.
PipelineResult run_pipeline(SourceAdapter& source, ClassifierAdapter& classifier,
                            const PipelineConfig& config,
                            const std::optional<std::filesystem::path>& retained_path = {});

// Replays a persistence log into the latest snapshot per id. A torn final
// line (crash mid-write) is ignored.
std::map<std::string, CommentRecord> load_log(const std::filesystem::path& path);

// Per-id status history recorded in a persistence log, in order.
std::map<std::string, std::vector<CommentStatus>> status_history(
    const std::filesystem::path& path);

}  // namespace detox
