#include "detox/judge.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>

namespace detox {

std::string to_string(Answer answer) {
  switch (answer) {
    case Answer::kA: return "A";
    case Answer::kB: return "B";
    case Answer::kNoPreference: return "no_preference";
  }
  return "?";
}

Answer parse_answer(std::string_view text) {
  if (text == "A") return Answer::kA;
  if (text == "B") return Answer::kB;
  if (text == "no_preference") return Answer::kNoPreference;
  throw ValidationError("answer must be A, B or no_preference, got '" + std::string(text) + "'");
}

std::string to_string(Question question) {
  switch (question) {
    case Question::kContentPreservation: return "content_preservation";
    case Question::kCoherence: return "coherence";
    case Question::kOverall: return "overall";
  }
  return "?";
}

std::string to_string(Subset subset) {
  return subset == Subset::kAll ? "all" : "has_discourse_relation";
}

Subset parse_subset(std::string_view text) {
  if (text == "all") return Subset::kAll;
  if (text == "has_discourse_relation") return Subset::kHasDiscourseRelation;
  throw ValidationError("subset must be all or has_discourse_relation");
}

void to_json(json& j, const JudgeItem& item) {
  j = json{{"item_id", item.item_id},   {"original", item.original},
           {"parent", item.parent},     {"output_a", item.output_a},
           {"output_b", item.output_b}, {"model1_is_a", item.model1_is_a}};
}

void from_json(const json& j, JudgeItem& item) {
  item.item_id = j.at("item_id").get<std::string>();
  item.original = j.at("original").get<std::string>();
  item.parent = j.value("parent", std::string());
  item.output_a = j.at("output_a").get<std::string>();
  item.output_b = j.at("output_b").get<std::string>();
  item.model1_is_a = j.at("model1_is_a").get<bool>();
}

json blinded_view(const JudgeItem& item, bool include_parent) {
  json view{{"item_id", item.item_id}, {"original", item.original}, {"A", item.output_a},
            {"B", item.output_b}};
  if (include_parent) view["parent"] = item.parent;
  return view;
}

void to_json(json& j, const Judgment& judgment) {
  json answers = json::object();
  for (std::size_t q = 0; q < kQuestions.size(); ++q) {
    answers[to_string(kQuestions[q])] = to_string(judgment.answers[q]);
  }
  j = json{{"item_id", judgment.item_id},
           {"judge_id", judgment.judge_id},
           {"timestamp", judgment.timestamp},
           {"answers", answers}};
}

void from_json(const json& j, Judgment& judgment) {
  if (!j.is_object()) throw ValidationError("judgment must be a JSON object");
  if (!j.contains("item_id") || !j["item_id"].is_string()) {
    throw ValidationError("item_id is required");
  }
  judgment.item_id = j["item_id"].get<std::string>();
  judgment.judge_id = j.contains("judge_id") && j["judge_id"].is_string()
                          ? j["judge_id"].get<std::string>()
                          : std::string("judge");
  judgment.timestamp = j.contains("timestamp") && j["timestamp"].is_string()
                           ? j["timestamp"].get<std::string>()
                           : std::string();
  if (!j.contains("answers") || !j["answers"].is_object()) {
    throw ValidationError("answers object is required");
  }
  const json& answers = j["answers"];
  for (const auto& [key, value] : answers.items()) {
    bool known = false;
    for (Question q : kQuestions) known = known || key == to_string(q);
    if (!known) throw ValidationError("unknown question '" + key + "'");
    (void)value;
  }
  for (std::size_t q = 0; q < kQuestions.size(); ++q) {
    const std::string key = to_string(kQuestions[q]);
    if (!answers.contains(key) || !answers[key].is_string()) {
      throw ValidationError("answer for " + key + " is required");
    }
    judgment.answers[q] = parse_answer(answers[key].get<std::string>());
  }
}

const JudgeItem* JudgingSession::find(const std::string& item_id) const {
  for (const auto& item : items) {
    if (item.item_id == item_id) return &item;
  }
  return nullptr;
}

const JudgeItem* JudgingSession::next_pending() const {
  for (const auto& item : items) {
    if (!judgments.count(item.item_id)) return &item;
  }
  return nullptr;
}

json JudgingSession::summary() const {
  return json{{"session_id", session_id},
              {"n_items", items.size()},
              {"judged", judgments.size()},
              {"closed", closed}};
}

JudgingSession create_session(const std::vector<GeneratedOutput>& outputs_model1,
                              const std::vector<GeneratedOutput>& outputs_model2,
                              const std::vector<StyleTransferPair>& corpus, std::size_t n_items,
                              std::uint64_t seed, std::string session_id) {
  if (n_items == 0) throw Error("n_items must be positive");
  std::map<std::string, const StyleTransferPair*> records;
  for (const auto& record : corpus) records[record.id] = &record;
  std::map<std::string, const std::string*> first, second;
  for (const auto& output : outputs_model1) first[output.id] = &output.text;
  for (const auto& output : outputs_model2) second[output.id] = &output.text;

  std::vector<std::string> pool;
  for (const auto& [id, text] : first) {
    if (records.count(id)) pool.push_back(id);
  }
  if (pool.size() < n_items) {
    throw Error("cannot sample " + std::to_string(n_items) + " items from a pool of " +
                std::to_string(pool.size()));
  }
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < n_items; ++i) {
    std::size_t j = i + static_cast<std::size_t>(rng() % (pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(n_items);

  JudgingSession session;
  session.seed = seed;
  std::string joined;
  for (const auto& id : pool) {
    auto other = second.find(id);
    if (other == second.end()) throw Error("model 2 outputs do not cover item " + id);
    const bool model1_is_a = (rng() >> 63) == 0;
    const StyleTransferPair& record = *records.at(id);
    const std::string& text1 = *first.at(id);
    const std::string& text2 = *other->second;
    session.items.push_back({id, record.original, record.parent_body,
                             model1_is_a ? text1 : text2, model1_is_a ? text2 : text1,
                             model1_is_a});
    joined += id;
    joined.push_back('\n');
  }
  if (session_id.empty()) {
    char buffer[24];
    std::snprintf(buffer, sizeof(buffer), "s%016llx",
                  static_cast<unsigned long long>(stable_hash(joined, seed)));
    session_id = buffer;
  }
  session.session_id = std::move(session_id);
  return session;
}

RecordOutcome record_judgment(JudgingSession& session, const Judgment& judgment) {
  if (session.closed) throw ConflictError("session " + session.session_id + " is closed");
  if (!session.find(judgment.item_id)) {
    throw NotFoundError("item " + judgment.item_id + " is not in session " + session.session_id);
  }
  auto it = session.judgments.find(judgment.item_id);
  if (it != session.judgments.end()) {
    if (it->second.same_submission(judgment)) return RecordOutcome::kDuplicate;
    throw ConflictError("item " + judgment.item_id + " already has a different judgment");
  }
  session.judgments.emplace(judgment.item_id, judgment);
  return RecordOutcome::kStored;
}

void to_json(json& j, const AggregateTable& table) {
  json questions = json::object();
  for (std::size_t q = 0; q < kQuestions.size(); ++q) {
    const PreferenceRow& row = table.questions[q];
    questions[to_string(kQuestions[q])] = json{{"model_1", row.model_1},
                                               {"model_2", row.model_2},
                                               {"no_preference", row.no_preference},
                                               {"model_1_pct", row.model_1_pct},
                                               {"model_2_pct", row.model_2_pct},
                                               {"no_preference_pct", row.no_preference_pct}};
  }
  j = json{{"subset", to_string(table.subset)}, {"n", table.n}, {"questions", questions}};
}

AggregateTable aggregate(const JudgingSession& session, Subset subset,
                         const RelationIndex& relations) {
  if (!session.closed) {
    throw ConflictError("session " + session.session_id + " is open; close it before aggregating");
  }
  AggregateTable table;
  table.subset = subset;
  for (const auto& item : session.items) {
    auto judged = session.judgments.find(item.item_id);
    if (judged == session.judgments.end()) continue;
    if (subset == Subset::kHasDiscourseRelation) {
      auto it = relations.find(item.item_id);
      if (it == relations.end() || it->second.empty()) continue;
    }
    ++table.n;
    for (std::size_t q = 0; q < kQuestions.size(); ++q) {
      PreferenceRow& row = table.questions[q];
      switch (judged->second.answers[q]) {
        case Answer::kA: ++(item.model1_is_a ? row.model_1 : row.model_2); break;
        case Answer::kB: ++(item.model1_is_a ? row.model_2 : row.model_1); break;
        case Answer::kNoPreference: ++row.no_preference; break;
      }
    }
  }
  if (table.n == 0) throw Error("no judged items in subset " + to_string(subset));
  const double n = static_cast<double>(table.n);
  for (auto& row : table.questions) {
    row.model_1_pct = 100.0 * static_cast<double>(row.model_1) / n;
    row.model_2_pct = 100.0 * static_cast<double>(row.model_2) / n;
    row.no_preference_pct = 100.0 * static_cast<double>(row.no_preference) / n;
  }
  return table;
}

namespace {

bool valid_session_id(const std::string& id) {
  if (id.empty() || id.size() > 128) return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_';
  });
}

// Drops a partial trailing line left by an interrupted write.
void truncate_torn_tail(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) return;
  const std::string contents = read_file(path);
  if (contents.empty() || contents.back() == '\n') return;
  const std::size_t keep = contents.rfind('\n') == std::string::npos ? 0 : contents.rfind('\n') + 1;
  std::filesystem::resize_file(path, keep);
}

}  // namespace

SessionStore::SessionStore(std::filesystem::path root) : root_(std::move(root)) {
  std::filesystem::create_directories(root_ / "sessions");
}

std::filesystem::path SessionStore::log_path(const std::string& session_id) const {
  if (!valid_session_id(session_id)) throw NotFoundError("invalid session id '" + session_id + "'");
  return root_ / "sessions" / (session_id + ".jsonl");
}

void SessionStore::append(const std::filesystem::path& path, const json& event) {
  truncate_torn_tail(path);
  std::ofstream out(path, std::ios::app | std::ios::binary);
  if (!out) throw Error("cannot append to " + path.string());
  out << event.dump() << '\n';
  out.flush();
  if (!out) throw Error("write failed: " + path.string());
}

JudgingSession SessionStore::replay(const std::filesystem::path& log_path) {
  const std::string contents = read_file(log_path);
  JudgingSession session;
  bool created = false;
  std::size_t start = 0;
  std::size_t line_number = 0;
  while (start < contents.size()) {
    std::size_t end = contents.find('\n', start);
    const bool torn = end == std::string::npos;
    std::string line = contents.substr(start, torn ? std::string::npos : end - start);
    start = torn ? contents.size() : end + 1;
    ++line_number;
    if (trim(line).empty()) continue;
    json event;
    try {
      event = json::parse(line);
    } catch (const json::exception&) {
      if (torn) break;
      throw Error(log_path.string() + ":" + std::to_string(line_number) + ": malformed event");
    }
    const std::string kind = event.value("event", std::string());
    if (kind == "created") {
      if (created) throw Error(log_path.string() + ": duplicate created event");
      session.session_id = event.at("session_id").get<std::string>();
      session.seed = event.at("seed").get<std::uint64_t>();
      session.items = event.at("items").get<std::vector<JudgeItem>>();
      created = true;
    } else if (!created) {
      throw Error(log_path.string() + ": log does not start with a created event");
    } else if (kind == "judgment") {
      record_judgment(session, event.get<Judgment>());
    } else if (kind == "closed") {
      session.closed = true;
    } else {
      throw Error(log_path.string() + ":" + std::to_string(line_number) + ": unknown event '" +
                  kind + "'");
    }
  }
  if (!created) throw Error(log_path.string() + ": empty session log");
  return session;
}

void SessionStore::create(const JudgingSession& session) {
  if (!valid_session_id(session.session_id)) {
    throw ValidationError("session id must be 1-128 characters of [A-Za-z0-9_-]");
  }
  const auto path = log_path(session.session_id);
  if (session.items.empty()) throw ValidationError("session has no items");
  std::lock_guard lock(entries_mutex_);
  if (entries_.count(session.session_id) || std::filesystem::exists(path)) {
    throw ConflictError("session " + session.session_id + " already exists");
  }
  JudgingSession fresh = session;
  fresh.judgments.clear();
  fresh.closed = false;
  append(path, json{{"event", "created"},
                    {"session_id", fresh.session_id},
                    {"seed", fresh.seed},
                    {"items", fresh.items}});
  auto e = std::make_shared<Entry>();
  e->snapshot = std::make_shared<const JudgingSession>(std::move(fresh));
  entries_[session.session_id] = std::move(e);
}

std::shared_ptr<SessionStore::Entry> SessionStore::entry(const std::string& session_id) {
  const auto path = log_path(session_id);
  std::lock_guard lock(entries_mutex_);
  auto it = entries_.find(session_id);
  if (it != entries_.end()) return it->second;
  if (!std::filesystem::exists(path)) throw NotFoundError("unknown session " + session_id);
  auto e = std::make_shared<Entry>();
  e->snapshot = std::make_shared<const JudgingSession>(replay(path));
  entries_[session_id] = e;
  return e;
}

std::shared_ptr<const JudgingSession> SessionStore::get(const std::string& session_id) {
  auto e = entry(session_id);
  return std::atomic_load(&e->snapshot);
}

RecordOutcome SessionStore::record(const std::string& session_id, const Judgment& judgment) {
  auto e = entry(session_id);
  std::lock_guard lock(e->write);
  JudgingSession next = *std::atomic_load(&e->snapshot);
  const RecordOutcome outcome = record_judgment(next, judgment);
  if (outcome == RecordOutcome::kStored) {
    json event = judgment;
    event["event"] = "judgment";
    append(log_path(session_id), event);
    std::atomic_store(&e->snapshot, std::shared_ptr<const JudgingSession>(
                                        std::make_shared<JudgingSession>(std::move(next))));
  }
  return outcome;
}

bool SessionStore::close(const std::string& session_id) {
  auto e = entry(session_id);
  std::lock_guard lock(e->write);
  auto current = std::atomic_load(&e->snapshot);
  if (current->closed) return false;
  JudgingSession next = *current;
  next.closed = true;
  append(log_path(session_id), json{{"event", "closed"}});
  std::atomic_store(&e->snapshot, std::shared_ptr<const JudgingSession>(
                                      std::make_shared<JudgingSession>(std::move(next))));
  return true;
}

std::vector<std::string> SessionStore::list() const {
  std::vector<std::string> ids;
  for (const auto& file : std::filesystem::directory_iterator(root_ / "sessions")) {
    if (file.path().extension() == ".jsonl") ids.push_back(file.path().stem().string());
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

AnnotationQueue::AnnotationQueue(std::filesystem::path root) : root_(std::move(root)) {
  std::filesystem::create_directories(root_);
}

namespace {

std::set<std::string> annotated_ids(const std::filesystem::path& path) {
  std::set<std::string> ids;
  if (!std::filesystem::exists(path)) return ids;
  for (const auto& row : read_jsonl(path)) ids.insert(row.at("id").get<std::string>());
  return ids;
}

}  // namespace

std::optional<json> AnnotationQueue::next() {
  std::lock_guard lock(mutex_);
  const auto queue_path = root_ / "annotation_queue.jsonl";
  if (!std::filesystem::exists(queue_path)) return std::nullopt;
  const auto done = annotated_ids(root_ / "annotations.jsonl");
  for (const auto& row : read_jsonl(queue_path)) {
    const std::string id = row.at("id").get<std::string>();
    if (done.count(id)) continue;
    std::string original = row.contains("original") ? row["original"].get<std::string>()
                                                    : row.at("body").get<std::string>();
    std::string parent = row.contains("parent_body") && row["parent_body"].is_string()
                             ? row["parent_body"].get<std::string>()
                             : std::string();
    return json{{"id", id}, {"original", original}, {"parent_body", parent}};
  }
  return std::nullopt;
}

void AnnotationQueue::submit(const StyleTransferPair& record) {
  const auto violations = validate_record(record);
  if (!violations.empty()) {
    std::string message;
    for (const auto& v : violations) message += (message.empty() ? "" : "; ") + v;
    throw ValidationError(message);
  }
  std::lock_guard lock(mutex_);
  const auto path = root_ / "annotations.jsonl";
  if (annotated_ids(path).count(record.id)) {
    throw ConflictError("record " + record.id + " is already annotated");
  }
  truncate_torn_tail(path);
  std::ofstream out(path, std::ios::app | std::ios::binary);
  if (!out) throw Error("cannot append to " + path.string());
  out << json(record).dump() << '\n';
  out.flush();
}

std::size_t AnnotationQueue::annotated() const {
  std::lock_guard lock(mutex_);
  return annotated_ids(root_ / "annotations.jsonl").size();
}

}  // namespace detox
