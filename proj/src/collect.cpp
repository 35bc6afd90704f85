#include "detox/collect.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <queue>
#include <tuple>

namespace detox {

std::string format_utc(Timestamp t) {
  std::time_t tt = static_cast<std::time_t>(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

Timestamp parse_utc(std::string_view text) {
  std::tm tm{};
  int consumed = 0;
  std::string s(text);
  if (std::sscanf(s.c_str(), "%4d-%2d-%2dT%2d:%2d:%2dZ%n", &tm.tm_year, &tm.tm_mon,
                  &tm.tm_mday, &tm.tm_hour, &tm.tm_min, &tm.tm_sec, &consumed) != 6 ||
      static_cast<std::size_t>(consumed) != s.size()) {
    throw Error("invalid UTC timestamp '" + s + "' (expected YYYY-MM-DDTHH:MM:SSZ)");
  }
  tm.tm_year -= 1900;
  tm.tm_mon -= 1;
  return static_cast<Timestamp>(timegm(&tm));
}

namespace {

Timestamp parse_time(const json& j) {
  if (j.is_number_integer()) return j.get<Timestamp>();
  if (j.is_number()) return static_cast<Timestamp>(j.get<double>());
  if (j.is_string()) return parse_utc(j.get<std::string>());
  throw Error("event time must be a number of seconds or an ISO-8601 string");
}

}  // namespace

std::string to_string(CommentStatus status) {
  switch (status) {
    case CommentStatus::kStreamed: return "streamed";
    case CommentStatus::kTaggedOffensive: return "tagged_offensive";
    case CommentStatus::kRemoved: return "removed";
    case CommentStatus::kParentResolved: return "parent_resolved";
    case CommentStatus::kDiscarded: return "discarded";
    case CommentStatus::kRetained: return "retained";
  }
  return "streamed";
}

CommentStatus parse_comment_status(std::string_view text) {
  for (auto s : {CommentStatus::kStreamed, CommentStatus::kTaggedOffensive,
                 CommentStatus::kRemoved, CommentStatus::kParentResolved,
                 CommentStatus::kDiscarded, CommentStatus::kRetained}) {
    if (to_string(s) == text) return s;
  }
  throw Error("unknown comment status '" + std::string(text) + "'");
}

std::string to_string(DiscardReason reason) {
  switch (reason) {
    case DiscardReason::kNone: return "none";
    case DiscardReason::kInoffensive: return "inoffensive";
    case DiscardReason::kClassifierError: return "classifier_error";
    case DiscardReason::kDeletedByAuthor: return "deleted_by_author";
    case DiscardReason::kTimeout: return "timeout";
    case DiscardReason::kParentMissing: return "parent_missing";
    case DiscardReason::kTooLong: return "too_long";
  }
  return "none";
}

DiscardReason parse_discard_reason(std::string_view text) {
  for (auto r : {DiscardReason::kNone, DiscardReason::kInoffensive,
                 DiscardReason::kClassifierError, DiscardReason::kDeletedByAuthor,
                 DiscardReason::kTimeout, DiscardReason::kParentMissing,
                 DiscardReason::kTooLong}) {
    if (to_string(r) == text) return r;
  }
  throw Error("unknown discard reason '" + std::string(text) + "'");
}

void to_json(json& j, const CommentRecord& record) {
  j = json{{"id", record.id},
           {"subreddit", record.subreddit},
           {"body", record.body},
           {"parent_id", record.parent_id},
           {"created_at", format_utc(record.created_at)},
           {"status", to_string(record.status)},
           {"offensive_score", record.offensive_score},
           {"updated_at", format_utc(record.updated_at)}};
  if (record.parent_body) j["parent_body"] = *record.parent_body;
  if (record.discard_reason != DiscardReason::kNone) {
    j["discard_reason"] = to_string(record.discard_reason);
  }
}

void from_json(const json& j, CommentRecord& record) {
  record = CommentRecord{};
  record.id = j.at("id").get<std::string>();
  record.subreddit = j.value("subreddit", std::string());
  record.body = j.at("body").get<std::string>();
  record.parent_id = j.value("parent_id", std::string());
  if (auto it = j.find("parent_body"); it != j.end() && !it->is_null()) {
    record.parent_body = it->get<std::string>();
  }
  record.created_at = parse_time(j.at("created_at"));
  record.status = parse_comment_status(j.at("status").get<std::string>());
  record.offensive_score = j.value("offensive_score", 0.0);
  if (auto it = j.find("discard_reason"); it != j.end()) {
    record.discard_reason = parse_discard_reason(it->get<std::string>());
  }
  if (auto it = j.find("updated_at"); it != j.end()) {
    record.updated_at = parse_time(*it);
  } else {
    record.updated_at = record.created_at;
  }
}

bool is_terminal(CommentStatus status) {
  return status == CommentStatus::kDiscarded || status == CommentStatus::kRetained;
}

bool is_valid_transition(CommentStatus from, CommentStatus to) {
  if (is_terminal(from)) return false;
  switch (to) {
    case CommentStatus::kDiscarded: return true;
    case CommentStatus::kTaggedOffensive: return from == CommentStatus::kStreamed;
    case CommentStatus::kRemoved: return from == CommentStatus::kTaggedOffensive;
    case CommentStatus::kParentResolved: return from == CommentStatus::kRemoved;
    case CommentStatus::kRetained: return from == CommentStatus::kParentResolved;
    case CommentStatus::kStreamed: return false;
  }
  return false;
}

// ---------------------------------------------------------------------------
// ReplaySource

ReplaySource ReplaySource::from_file(const std::filesystem::path& path) {
  return from_events(read_jsonl(path));
}

ReplaySource ReplaySource::from_events(const std::vector<json>& events) {
  ReplaySource source;
  for (const auto& event : events) {
    const Timestamp time = parse_time(event.at("time"));
    const std::string kind = event.at("kind").get<std::string>();
    const std::string id = event.at("id").get<std::string>();
    const json payload = event.value("payload", json::object());
    if (kind == "new") {
      if (source.comment_index_.count(id)) throw Error("duplicate new event for id " + id);
      RawComment comment;
      comment.id = id;
      comment.subreddit = payload.value("subreddit", std::string());
      comment.body = payload.at("body").get<std::string>();
      comment.parent_id = payload.value("parent_id", std::string());
      comment.created_at = time;
      source.comment_index_[id] = source.comments_.size();
      source.comments_.push_back(std::move(comment));
    } else if (kind == "status") {
      const std::string value = payload.at("status").get<std::string>();
      StatusEvent status{time, std::nullopt};
      if (value == "present") {
        status.value = Accessibility::kPresent;
      } else if (value == "removed_by_moderator") {
        status.value = Accessibility::kRemovedByModerator;
      } else if (value == "deleted_by_author") {
        status.value = Accessibility::kDeletedByAuthor;
      } else if (value != "unreachable") {
        throw Error("unknown status '" + value + "' for id " + id);
      }
      source.statuses_[id].push_back(status);
    } else if (kind == "parent") {
      ParentEvent parent{time, std::nullopt};
      if (auto it = payload.find("body"); it != payload.end() && !it->is_null()) {
        parent.body = it->get<std::string>();
      }
      source.parents_[id].push_back(std::move(parent));
    } else {
      throw Error("unknown event kind '" + kind + "'");
    }
  }
  // Stable sorts keep file order among events with equal times.
  std::stable_sort(source.comments_.begin(), source.comments_.end(),
                   [](const RawComment& a, const RawComment& b) {
                     return std::tie(a.created_at, a.id) < std::tie(b.created_at, b.id);
                   });
  source.comment_index_.clear();
  for (std::size_t i = 0; i < source.comments_.size(); ++i) {
    source.comment_index_[source.comments_[i].id] = i;
  }
  for (auto& [id, list] : source.statuses_) {
    std::stable_sort(list.begin(), list.end(),
                     [](const auto& a, const auto& b) { return a.time < b.time; });
  }
  for (auto& [id, list] : source.parents_) {
    std::stable_sort(list.begin(), list.end(),
                     [](const auto& a, const auto& b) { return a.time < b.time; });
  }
  return source;
}

std::optional<RawComment> ReplaySource::next_comment() {
  if (cursor_ >= comments_.size()) return std::nullopt;
  return comments_[cursor_++];
}

Accessibility ReplaySource::status(const std::string& id, Timestamp at) {
  if (!comment_index_.count(id)) throw Error("replay source has no comment " + id);
  auto it = statuses_.find(id);
  if (it == statuses_.end()) return Accessibility::kPresent;
  const StatusEvent* latest = nullptr;
  for (const auto& event : it->second) {
    if (event.time > at) break;
    latest = &event;
  }
  if (latest == nullptr) return Accessibility::kPresent;
  if (!latest->value) throw SourceUnavailable("source unreachable for " + id);
  return *latest->value;
}

std::optional<std::string> ReplaySource::parent(const std::string& id, Timestamp at) {
  auto idx = comment_index_.find(id);
  if (idx == comment_index_.end()) throw Error("replay source has no comment " + id);
  // An unreachable window on the child also blocks parent lookups.
  status(id, at);
  const std::string& parent_id = comments_[idx->second].parent_id;

  std::optional<std::string> body;
  bool known = false;
  if (auto c = comment_index_.find(parent_id); c != comment_index_.end()) {
    known = true;
    body = comments_[c->second].body;
    if (status(parent_id, at) != Accessibility::kPresent) body.reset();
  }
  if (auto p = parents_.find(parent_id); p != parents_.end()) {
    for (const auto& event : p->second) {
      if (event.time > at) break;
      known = true;
      body = event.body;
    }
  }
  if (!known) return std::nullopt;
  return body;
}

// ---------------------------------------------------------------------------
// Classifiers

OffensiveLabel ClassifierAdapter::label(const std::string& text) {
  return score(text) >= threshold() ? OffensiveLabel::kOffensive
                                    : OffensiveLabel::kInoffensive;
}

namespace {

std::vector<std::string> lexicon_words(const std::string& text) {
  std::vector<std::string> words;
  std::string current;
  for (unsigned char c : text) {
    if (std::isalnum(c) || c == '\'' || c == '*' || c >= 0x80) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      words.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

}  // namespace

LexiconClassifier::LexiconClassifier()
    : terms_{"asshole", "assholes", "bastard", "bitch",  "bullshit", "crap",
             "damn",    "dick",     "dumb",    "dumbass", "f***",    "fuck",
             "fucked",  "fucking",  "idiot",   "idiots", "moron",    "morons",
             "piss",    "retard",   "s***",    "screw",  "shit",     "stfu",
             "stupid",  "suck",     "sucks",   "trash",  "wtf"} {}

LexiconClassifier::LexiconClassifier(std::set<std::string> terms, double threshold)
    : threshold_(threshold) {
  for (const auto& term : terms) {
    auto words = lexicon_words(term);
    if (words.size() == 1) terms_.insert(words.front());
  }
  if (terms_.empty()) throw Error("lexicon classifier needs at least one single-word term");
}

LexiconClassifier LexiconClassifier::from_file(const std::filesystem::path& path) {
  std::set<std::string> terms;
  for_each_line(path, [&](std::size_t, const std::string& line) {
    auto t = trim(line);
    if (!t.empty() && t.front() != '#') terms.emplace(t);
  });
  return LexiconClassifier(std::move(terms));
}

double LexiconClassifier::score(const std::string& text) {
  for (const auto& word : lexicon_words(text)) {
    if (terms_.count(word)) return 1.0;
  }
  return 0.0;
}

TableClassifier::TableClassifier(std::map<std::string, double> scores, double threshold)
    : scores_(std::move(scores)), threshold_(threshold) {}

TableClassifier TableClassifier::from_file(const std::filesystem::path& path) {
  std::map<std::string, double> scores;
  for (const auto& row : read_jsonl(path)) {
    scores[row.at("text").get<std::string>()] = row.at("score").get<double>();
  }
  return TableClassifier(std::move(scores));
}

double TableClassifier::score(const std::string& text) {
  auto it = scores_.find(text);
  if (it == scores_.end()) throw Error("table classifier has no score for text");
  return it->second;
}

std::unique_ptr<ClassifierAdapter> make_classifier(const std::string& spec) {
  if (spec == "lexicon") return std::make_unique<LexiconClassifier>();
  if (spec.rfind("lexicon:", 0) == 0) {
    return std::make_unique<LexiconClassifier>(LexiconClassifier::from_file(spec.substr(8)));
  }
  if (spec.rfind("table:", 0) == 0) {
    return std::make_unique<TableClassifier>(TableClassifier::from_file(spec.substr(6)));
  }
  throw Error("unknown classifier adapter '" + spec + "'");
}

GateDecision gate(const RawComment& comment, ClassifierAdapter& classifier) {
  GateDecision decision;
  if (trim(comment.body).empty()) return decision;
  try {
    decision.score = classifier.score(comment.body);
    decision.keep = decision.score >= classifier.threshold();
  } catch (const std::exception& e) {
    std::cerr << "warning: classifier failed on " << comment.id << ": " << e.what() << "\n";
    decision = GateDecision{false, 0.0, true};
  }
  return decision;
}

// ---------------------------------------------------------------------------
// State transitions

void PipelineConfig::check() const {
  if (max_length_tokens == 0) throw Error("max_length_tokens must be positive");
  if (poll_interval.count() <= 0) throw Error("poll_interval must be positive");
  if (max_poll_age.count() <= 0) throw Error("max_poll_age must be positive");
  if (persistence_path.empty()) throw Error("persistence_path is required");
}

namespace {

CommentRecord discard(CommentRecord record, DiscardReason reason, Timestamp at) {
  record.status = CommentStatus::kDiscarded;
  record.discard_reason = reason;
  record.parent_body.reset();
  record.updated_at = at;
  return record;
}

}  // namespace

CommentRecord advance_status(const CommentRecord& record, SourceAdapter& source,
                             Timestamp at, std::chrono::seconds age,
                             std::chrono::seconds max_poll_age) {
  if (record.status != CommentStatus::kTaggedOffensive) {
    throw Error("advance_status requires a tagged_offensive record: " + record.id);
  }
  Accessibility status;
  try {
    status = source.status(record.id, at);
  } catch (const SourceUnavailable&) {
    return record;
  }
  switch (status) {
    case Accessibility::kRemovedByModerator: {
      CommentRecord next = record;
      next.status = CommentStatus::kRemoved;
      next.updated_at = at;
      return next;
    }
    case Accessibility::kDeletedByAuthor:
      return discard(record, DiscardReason::kDeletedByAuthor, at);
    case Accessibility::kPresent:
      if (age >= max_poll_age) return discard(record, DiscardReason::kTimeout, at);
      return record;
  }
  return record;
}

CommentRecord resolve_parent(const CommentRecord& record, SourceAdapter& source,
                             Timestamp at) {
  if (record.status != CommentStatus::kRemoved) {
    throw Error("resolve_parent requires a removed record: " + record.id);
  }
  std::optional<std::string> body;
  try {
    body = source.parent(record.id, at);
  } catch (const SourceUnavailable&) {
    return record;
  }
  if (!body) return discard(record, DiscardReason::kParentMissing, at);
  CommentRecord next = record;
  next.status = CommentStatus::kParentResolved;
  next.parent_body = std::move(body);
  next.updated_at = at;
  return next;
}

std::string counter_name(DiscardReason reason) {
  switch (reason) {
    case DiscardReason::kInoffensive: return "dropped_inoffensive";
    case DiscardReason::kClassifierError: return "dropped_classifier_error";
    case DiscardReason::kDeletedByAuthor: return "discarded_deleted";
    case DiscardReason::kTimeout: return "discarded_timeout";
    case DiscardReason::kParentMissing: return "discarded_parent";
    case DiscardReason::kTooLong: return "discarded_too_long";
    case DiscardReason::kNone: return "discarded_other";
  }
  return "discarded_other";
}

std::size_t PipelineStats::count(const std::string& key) const {
  auto it = discarded.find(key);
  return it == discarded.end() ? 0 : it->second;
}

json PipelineStats::to_json() const {
  json j{{"streamed", streamed}, {"retained", retained}};
  for (const auto& [key, n] : discarded) j[key] = n;
  return j;
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

// Returns complete lines; a trailing fragment without newline is torn.
std::vector<std::string> complete_lines(const std::string& contents, std::size_t* valid_bytes) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (true) {
    std::size_t nl = contents.find('\n', start);
    if (nl == std::string::npos) break;
    lines.push_back(contents.substr(start, nl - start));
    start = nl + 1;
  }
  if (valid_bytes) *valid_bytes = start;
  return lines;
}

class RecordLog {
 public:
  RecordLog(const std::filesystem::path& path, std::optional<std::size_t> abort_after)
      : abort_after_(abort_after) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    if (std::filesystem::exists(path)) {
      std::string contents = read_file(path);
      std::size_t valid = 0;
      for (const auto& line : complete_lines(contents, &valid)) {
        if (trim(line).empty()) continue;
        auto record = json::parse(line).get<CommentRecord>();
        state_[record.id] = record;
      }
      if (valid != contents.size()) std::filesystem::resize_file(path, valid);
    }
    out_.open(path, std::ios::binary | std::ios::app);
    if (!out_) throw Error("cannot open persistence log " + path.string());
  }

  std::map<std::string, CommentRecord>& state() { return state_; }

  void append(const CommentRecord& record) {
    auto prev = state_.find(record.id);
    if (prev == state_.end() && record.status != CommentStatus::kStreamed) {
      throw Error("first log entry for " + record.id + " must be streamed");
    }
    if (prev != state_.end() && !is_valid_transition(prev->second.status, record.status)) {
      throw Error("illegal status transition for " + record.id + ": " +
                  to_string(prev->second.status) + " -> " + to_string(record.status));
    }
    if (abort_after_ && appends_ >= *abort_after_) {
      throw Error("simulated crash after " + std::to_string(appends_) + " appends");
    }
    std::string line = json(record).dump();
    line += '\n';
    out_.write(line.data(), static_cast<std::streamsize>(line.size()));
    out_.flush();
    if (!out_) throw Error("persistence write failed");
    ++appends_;
    state_[record.id] = record;
  }

 private:
  std::ofstream out_;
  std::map<std::string, CommentRecord> state_;
  std::optional<std::size_t> abort_after_;
  std::size_t appends_ = 0;
};

enum class TaskKind { kPoll = 0, kResolve = 1, kFinalize = 2 };

struct Task {
  Timestamp at;
  std::string id;
  TaskKind kind;

  bool operator>(const Task& other) const {
    return std::tie(at, id, kind) > std::tie(other.at, other.id, other.kind);
  }
};

}  // namespace

std::map<std::string, CommentRecord> load_log(const std::filesystem::path& path) {
  std::map<std::string, CommentRecord> state;
  for (const auto& line : complete_lines(read_file(path), nullptr)) {
    if (trim(line).empty()) continue;
    auto record = json::parse(line).get<CommentRecord>();
    state[record.id] = record;
  }
  return state;
}

std::map<std::string, std::vector<CommentStatus>> status_history(
    const std::filesystem::path& path) {
  std::map<std::string, std::vector<CommentStatus>> history;
  for (const auto& line : complete_lines(read_file(path), nullptr)) {
    if (trim(line).empty()) continue;
    auto record = json::parse(line).get<CommentRecord>();
    history[record.id].push_back(record.status);
  }
  return history;
}

PipelineResult run_pipeline(SourceAdapter& source, ClassifierAdapter& classifier,
                            const PipelineConfig& config,
                            const std::optional<std::filesystem::path>& retained_path) {
  config.check();
  RecordLog log(config.persistence_path, config.abort_after_appends);
  auto& state = log.state();
  const Timestamp interval = config.poll_interval.count();
  const Timestamp max_age = config.max_poll_age.count();
  auto count_tokens = config.count_tokens
                          ? config.count_tokens
                          : [](const std::string& text) { return text.size(); };

  std::priority_queue<Task, std::vector<Task>, std::greater<>> tasks;
  auto next_poll = [&](const CommentRecord& record, Timestamp after) {
    Timestamp deadline = record.created_at + max_age;
    tasks.push({std::min(after + interval, deadline), record.id, TaskKind::kPoll});
  };

  // Schedules the pending step for a non-terminal record.
  auto resume = [&](const CommentRecord& record) {
    switch (record.status) {
      case CommentStatus::kTaggedOffensive:
        next_poll(record, record.created_at);
        break;
      case CommentStatus::kRemoved:
        tasks.push({record.updated_at, record.id, TaskKind::kResolve});
        break;
      case CommentStatus::kParentResolved:
        tasks.push({record.updated_at, record.id, TaskKind::kFinalize});
        break;
      default:
        break;
    }
  };

  auto handle_new = [&](const RawComment& comment) {
    auto existing = state.find(comment.id);
    if (existing != state.end() && existing->second.status != CommentStatus::kStreamed) {
      resume(existing->second);
      return;
    }
    CommentRecord record;
    record.id = comment.id;
    record.subreddit = comment.subreddit;
    record.body = comment.body;
    record.parent_id = comment.parent_id;
    record.created_at = comment.created_at;
    record.updated_at = comment.created_at;
    record.status = CommentStatus::kStreamed;
    if (existing == state.end()) log.append(record);

    GateDecision decision = gate(comment, classifier);
    record.offensive_score = decision.score;
    if (!decision.keep) {
      log.append(discard(record, decision.failed ? DiscardReason::kClassifierError
                                                 : DiscardReason::kInoffensive,
                         comment.created_at));
      return;
    }
    record.status = CommentStatus::kTaggedOffensive;
    log.append(record);
    next_poll(record, record.created_at);
  };

  auto handle_task = [&](const Task& task) {
    source.wait_until(task.at);
    const CommentRecord record = state.at(task.id);
    const Timestamp deadline = record.created_at + max_age;
    switch (task.kind) {
      case TaskKind::kPoll: {
        if (record.status != CommentStatus::kTaggedOffensive) return;
        auto age = std::chrono::seconds(task.at - record.created_at);
        CommentRecord next = advance_status(record, source, task.at, age, config.max_poll_age);
        if (next.status == CommentStatus::kTaggedOffensive) {
          if (task.at >= deadline) {
            log.append(discard(record, DiscardReason::kTimeout, task.at));
          } else {
            next_poll(record, task.at);
          }
          return;
        }
        log.append(next);
        if (next.status == CommentStatus::kRemoved) {
          tasks.push({task.at, record.id, TaskKind::kResolve});
        }
        return;
      }
      case TaskKind::kResolve: {
        if (record.status != CommentStatus::kRemoved) return;
        CommentRecord next = resolve_parent(record, source, task.at);
        if (next.status == CommentStatus::kRemoved) {
          if (task.at >= deadline) {
            log.append(discard(record, DiscardReason::kTimeout, task.at));
          } else {
            tasks.push({std::min(task.at + interval, deadline), record.id, TaskKind::kResolve});
          }
          return;
        }
        log.append(next);
        if (next.status == CommentStatus::kParentResolved) {
          tasks.push({task.at, record.id, TaskKind::kFinalize});
        }
        return;
      }
      case TaskKind::kFinalize: {
        if (record.status != CommentStatus::kParentResolved) return;
        if (count_tokens(record.body) > config.max_length_tokens) {
          log.append(discard(record, DiscardReason::kTooLong, task.at));
        } else {
          CommentRecord next = record;
          next.status = CommentStatus::kRetained;
          next.updated_at = task.at;
          log.append(next);
        }
        return;
      }
    }
  };

  while (true) {
    std::optional<RawComment> comment = source.next_comment();
    while (!tasks.empty() && (!comment || tasks.top().at <= comment->created_at)) {
      Task task = tasks.top();
      tasks.pop();
      handle_task(task);
    }
    if (!comment) break;
    handle_new(*comment);
  }

  PipelineResult result;
  for (const auto& [id, record] : state) {
    ++result.stats.streamed;
    if (record.status == CommentStatus::kRetained) {
      ++result.stats.retained;
      result.retained.push_back(record);
    } else if (record.status == CommentStatus::kDiscarded) {
      ++result.stats.discarded[counter_name(record.discard_reason)];
    }
  }
  std::sort(result.retained.begin(), result.retained.end(),
            [](const CommentRecord& a, const CommentRecord& b) {
              return std::tie(a.created_at, a.id) < std::tie(b.created_at, b.id);
            });
  if (retained_path) {
    std::vector<json> rows(result.retained.begin(), result.retained.end());
    write_jsonl(*retained_path, rows);
  }
  return result;
}

}  // namespace detox
