#include "detox/discourse.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <iostream>
#include <thread>

namespace detox {

std::string to_string(Framework framework) {
  switch (framework) {
    case Framework::kPdtbExplicit: return "pdtb_explicit";
    case Framework::kPdtbImplicit: return "pdtb_implicit";
    case Framework::kRstRoot: return "rst_root";
  }
  return "pdtb_explicit";
}

Framework parse_framework(std::string_view text) {
  if (text == "pdtb_explicit") return Framework::kPdtbExplicit;
  if (text == "pdtb_implicit") return Framework::kPdtbImplicit;
  if (text == "rst_root") return Framework::kRstRoot;
  throw Error("unknown framework '" + std::string(text) + "'");
}

void to_json(json& j, const DiscourseRelation& relation) {
  j = json{{"framework", to_string(relation.framework)},
           {"sense", relation.sense},
           {"confidence", relation.confidence}};
  if (relation.arg1) j["arg1"] = *relation.arg1;
  if (relation.arg2) j["arg2"] = *relation.arg2;
}

void from_json(const json& j, DiscourseRelation& relation) {
  relation = DiscourseRelation{};
  relation.framework = parse_framework(j.at("framework").get<std::string>());
  relation.sense = j.at("sense").get<std::string>();
  relation.confidence = j.value("confidence", 1.0);
  if (auto it = j.find("arg1"); it != j.end() && !it->is_null()) relation.arg1 = it->get<Span>();
  if (auto it = j.find("arg2"); it != j.end() && !it->is_null()) relation.arg2 = it->get<Span>();
}

// ---------------------------------------------------------------------------
// Inventory

SenseInventory SenseInventory::standard() {
  SenseInventory inv;
  inv.pdtb_l1 = {"Temporal", "Contingency", "Comparison", "Expansion"};
  inv.pdtb_l2 = {"Temporal.Asynchronous",      "Temporal.Synchrony",
                 "Contingency.Cause",          "Contingency.Pragmatic_cause",
                 "Contingency.Condition",      "Contingency.Pragmatic_condition",
                 "Comparison.Contrast",        "Comparison.Pragmatic_contrast",
                 "Comparison.Concession",      "Comparison.Pragmatic_concession",
                 "Expansion.Conjunction",      "Expansion.Instantiation",
                 "Expansion.Restatement",      "Expansion.Alternative",
                 "Expansion.Exception",        "Expansion.List"};
  inv.rst_top = {"Attribution", "Background",   "Cause",       "Comparison",
                 "Condition",   "Contrast",     "Elaboration", "Enablement",
                 "Evaluation",  "Explanation",  "Joint",       "Manner-Means",
                 "Same-Unit",   "Summary",      "Temporal",    "Textual-Organization",
                 "Topic-Change", "Topic-Comment"};
  return inv;
}

namespace {

bool contains(const std::vector<std::string>& list, std::string_view value) {
  return std::find(list.begin(), list.end(), value) != list.end();
}

bool is_word_byte(unsigned char c) { return std::isalnum(c) || c == '\'' || c >= 0x80; }

bool is_space(unsigned char c) { return std::isspace(c) != 0; }

}  // namespace

bool SenseInventory::is_l1(std::string_view sense) const { return contains(pdtb_l1, sense); }
bool SenseInventory::is_l2(std::string_view sense) const { return contains(pdtb_l2, sense); }
bool SenseInventory::is_rst(std::string_view sense) const { return contains(rst_top, sense); }

void SenseInventory::check() const {
  auto check_list = [](const std::vector<std::string>& list, const char* name) {
    std::set<std::string> seen;
    for (const auto& label : list) {
      if (label.empty()) throw Error(std::string(name) + ": empty label");
      for (unsigned char c : label) {
        if (is_space(c) || c == ':' || c == '<' || c == '>') {
          throw Error(std::string(name) + ": label '" + label +
                      "' may not contain whitespace, ':', '<' or '>'");
        }
      }
      if (!seen.insert(label).second) {
        throw Error(std::string(name) + ": duplicate label '" + label + "'");
      }
    }
  };
  check_list(pdtb_l1, "pdtb_l1");
  check_list(pdtb_l2, "pdtb_l2");
  check_list(rst_top, "rst_top");
  for (const auto& label : pdtb_l1) {
    if (label.find('.') != std::string::npos) {
      throw Error("pdtb_l1: label '" + label + "' may not contain '.'");
    }
  }
  for (const auto& label : pdtb_l2) {
    if (!is_l1(l1_of(label)) || label.find('.') == std::string::npos) {
      throw Error("pdtb_l2: label '" + label + "' does not project onto an L1 class");
    }
  }
}

void to_json(json& j, const SenseInventory& inventory) {
  j = json{{"pdtb_l1", inventory.pdtb_l1},
           {"pdtb_l2", inventory.pdtb_l2},
           {"rst_top", inventory.rst_top}};
}

void from_json(const json& j, SenseInventory& inventory) {
  inventory = SenseInventory::standard();
  if (j.contains("pdtb_l1")) inventory.pdtb_l1 = j.at("pdtb_l1").get<std::vector<std::string>>();
  if (j.contains("pdtb_l2")) inventory.pdtb_l2 = j.at("pdtb_l2").get<std::vector<std::string>>();
  if (j.contains("rst_top")) inventory.rst_top = j.at("rst_top").get<std::vector<std::string>>();
  inventory.check();
}

std::string l1_of(std::string_view sense) {
  return std::string(sense.substr(0, sense.find('.')));
}

std::vector<std::string> validate_relation(const DiscourseRelation& relation,
                                           std::string_view text,
                                           const SenseInventory& inventory) {
  std::vector<std::string> violations;
  if (relation.confidence < 0.0 || relation.confidence > 1.0) {
    violations.push_back("confidence: must lie in [0, 1]");
  }
  if (relation.framework == Framework::kRstRoot) {
    if (relation.arg1 || relation.arg2) violations.push_back("arg spans: must be absent for rst_root");
    if (!inventory.is_rst(relation.sense)) violations.push_back("sense: not in the RST inventory");
    return violations;
  }
  if (!relation.arg1 || !relation.arg2) {
    violations.push_back("arg spans: both required for PDTB relations");
  } else {
    if (!relation.arg1->within(text.size()) || !relation.arg2->within(text.size())) {
      violations.push_back("arg spans: outside text bounds");
    }
    if (relation.arg1->empty() || relation.arg2->empty()) {
      violations.push_back("arg spans: must be non-empty");
    }
    if (relation.arg1->overlaps(*relation.arg2)) {
      violations.push_back("arg spans: arg1 and arg2 overlap");
    }
  }
  if (!inventory.is_pdtb(relation.sense)) violations.push_back("sense: not in the PDTB inventory");
  return violations;
}

// ---------------------------------------------------------------------------
// Sentences

std::vector<Span> split_sentences(std::string_view text) {
  std::vector<Span> sentences;
  const std::size_t n = text.size();
  std::size_t start = 0;
  auto emit = [&](std::size_t end) {
    std::size_t b = start;
    while (b < end && is_space(text[b])) ++b;
    std::size_t e = end;
    while (e > b && is_space(text[e - 1])) --e;
    if (e > b) sentences.push_back({b, e});
    start = end;
  };
  std::size_t i = 0;
  while (i < n) {
    char c = text[i];
    if (c == '\n') {
      emit(i);
      ++i;
      continue;
    }
    if (c == '.' || c == '!' || c == '?') {
      std::size_t j = i;
      while (j < n && (text[j] == '.' || text[j] == '!' || text[j] == '?')) ++j;
      while (j < n && (text[j] == '"' || text[j] == '\'' || text[j] == ')' || text[j] == ']')) ++j;
      if (j == n || is_space(text[j])) {
        emit(j);
        i = j;
        continue;
      }
      i = j;
      continue;
    }
    ++i;
  }
  emit(n);
  return sentences;
}

// ---------------------------------------------------------------------------
// Connective lexicon

namespace {

std::vector<std::string> lower_words(std::string_view text) {
  std::vector<std::string> words;
  std::string current;
  for (unsigned char c : text) {
    if (is_space(c)) {
      if (!current.empty()) words.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

std::string join_words(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

}  // namespace

ConnectiveLexicon::ConnectiveLexicon(std::vector<Connective> entries) {
  for (auto& entry : entries) {
    entry.surface = join_words(lower_words(entry.surface));
    if (entry.surface.empty()) throw Error("connective lexicon: empty connective");
    if (entry.l1.empty()) throw Error("connective lexicon: '" + entry.surface + "' has no sense");
    if (!entry.l2.empty() && l1_of(entry.l2) != entry.l1) {
      throw Error("connective lexicon: '" + entry.surface + "' L2 sense " + entry.l2 +
                  " does not refine " + entry.l1);
    }
  }
  std::stable_sort(entries.begin(), entries.end(), [](const Connective& a, const Connective& b) {
    auto wa = std::count(a.surface.begin(), a.surface.end(), ' ');
    auto wb = std::count(b.surface.begin(), b.surface.end(), ' ');
    if (wa != wb) return wa > wb;
    return a.surface.size() > b.surface.size();
  });
  for (std::size_t i = 1; i < entries.size(); ++i) {
    for (std::size_t k = 0; k < i; ++k) {
      if (entries[k].surface == entries[i].surface) {
        throw Error("connective lexicon: duplicate connective '" + entries[i].surface + "'");
      }
    }
  }
  entries_ = std::move(entries);
}

ConnectiveLexicon ConnectiveLexicon::from_tsv(const std::filesystem::path& path) {
  std::vector<Connective> entries;
  for_each_line(path, [&](std::size_t line_number, const std::string& line) {
    if (trim(line).front() == '#') return;
    auto fields = split_string(line, '\t');
    if (fields.size() < 2 || fields.size() > 3) {
      throw Error(path.string() + ": line " + std::to_string(line_number) +
                  ": expected connective<TAB>L1<TAB>L2");
    }
    Connective entry{std::string(trim(fields[0])), std::string(trim(fields[1])),
                     fields.size() == 3 ? std::string(trim(fields[2])) : std::string()};
    entries.push_back(std::move(entry));
  });
  if (entries.empty()) throw Error(path.string() + ": connective lexicon is empty");
  return ConnectiveLexicon(std::move(entries));
}

const Connective* ConnectiveLexicon::match_at(std::string_view text, std::size_t pos) const {
  if (pos >= text.size()) return nullptr;
  if (pos > 0 && is_word_byte(text[pos - 1])) return nullptr;
  for (const auto& entry : entries_) {
    std::size_t t = pos;
    bool ok = true;
    for (std::size_t s = 0; s < entry.surface.size(); ++s) {
      char want = entry.surface[s];
      if (want == ' ') {
        if (t >= text.size() || !is_space(text[t])) {
          ok = false;
          break;
        }
        while (t < text.size() && is_space(text[t])) ++t;
        continue;
      }
      if (t >= text.size() ||
          std::tolower(static_cast<unsigned char>(text[t])) != static_cast<unsigned char>(want)) {
        ok = false;
        break;
      }
      ++t;
    }
    if (!ok) continue;
    if (t < text.size() && is_word_byte(text[t])) continue;
    return &entry;
  }
  return nullptr;
}

namespace {

// Length in bytes of the matched connective starting at pos.
std::size_t match_length(std::string_view text, std::size_t pos, const Connective& entry) {
  std::size_t t = pos;
  for (char want : entry.surface) {
    if (want == ' ') {
      while (t < text.size() && is_space(text[t])) ++t;
    } else {
      ++t;
    }
  }
  return t - pos;
}

std::size_t skip_space_and_comma(std::string_view text, std::size_t pos, std::size_t end) {
  while (pos < end && is_space(text[pos])) ++pos;
  if (pos < end && text[pos] == ',') ++pos;
  while (pos < end && is_space(text[pos])) ++pos;
  return pos;
}

std::size_t trim_clause_end(std::string_view text, std::size_t begin, std::size_t end) {
  while (end > begin && is_space(text[end - 1])) --end;
  while (end > begin && (text[end - 1] == ',' || text[end - 1] == ';' || text[end - 1] == ':')) --end;
  while (end > begin && is_space(text[end - 1])) --end;
  return end;
}

}  // namespace

std::vector<DiscourseRelation> extract_explicit_pdtb(std::string_view text,
                                                     const ConnectiveLexicon& lexicon) {
  if (lexicon.empty()) throw Error("explicit extraction needs a non-empty connective lexicon");
  std::vector<DiscourseRelation> relations;
  const auto sentences = split_sentences(text);
  for (std::size_t k = 0; k < sentences.size(); ++k) {
    const Span sentence = sentences[k];
    std::size_t clause_start = sentence.begin;
    std::size_t pos = sentence.begin;
    while (pos < sentence.end) {
      const Connective* entry = lexicon.match_at(text, pos);
      if (entry == nullptr) {
        ++pos;
        continue;
      }
      const std::size_t conn_end = pos + match_length(text, pos, *entry);
      const std::size_t arg2_begin = skip_space_and_comma(text, conn_end, sentence.end);
      const Span arg2{arg2_begin, sentence.end};
      std::optional<Span> arg1;
      if (pos == sentence.begin) {
        if (k > 0) arg1 = sentences[k - 1];
      } else {
        Span clause{clause_start, trim_clause_end(text, clause_start, pos)};
        if (!clause.empty()) arg1 = clause;
      }
      if (arg1 && !arg2.empty()) {
        DiscourseRelation relation;
        relation.framework = Framework::kPdtbExplicit;
        relation.sense = entry->l2.empty() ? entry->l1 : entry->l2;
        relation.arg1 = arg1;
        relation.arg2 = arg2;
        relation.confidence = 1.0;
        relations.push_back(std::move(relation));
      }
      clause_start = arg2_begin;
      pos = conn_end;
    }
  }
  return relations;
}

// ---------------------------------------------------------------------------
// Adapters

ConstantParser::ConstantParser(Framework framework, SenseScore result)
    : framework_(framework), result_(std::move(result)) {}

AdapterInfo ConstantParser::info() const {
  return {framework_, framework_ == Framework::kRstRoot ? "top" : "L2", "const", true};
}

std::optional<SenseScore> ConstantParser::classify(const ParserInput&) { return result_; }

GoldStubParser::GoldStubParser(Framework framework, const std::vector<json>& rows)
    : framework_(framework) {
  for (const auto& row : rows) {
    auto relation = row.get<DiscourseRelation>();
    if (relation.framework != framework_) continue;
    by_id_[row.at("id").get<std::string>()].push_back(std::move(relation));
  }
}

GoldStubParser GoldStubParser::from_file(Framework framework,
                                         const std::filesystem::path& path) {
  return GoldStubParser(framework, read_jsonl(path));
}

AdapterInfo GoldStubParser::info() const {
  return {framework_, framework_ == Framework::kRstRoot ? "top" : "L2", "gold-stub", true};
}

std::optional<SenseScore> GoldStubParser::classify(const ParserInput& input) {
  auto it = by_id_.find(input.record_id);
  if (it == by_id_.end()) return std::nullopt;
  for (const auto& relation : it->second) {
    if (framework_ == Framework::kRstRoot ||
        (relation.arg1 == input.arg1 && relation.arg2 == input.arg2)) {
      return SenseScore{relation.sense, relation.confidence};
    }
  }
  return std::nullopt;
}

std::unique_ptr<ParserAdapter> make_parser(Framework framework, const std::string& spec) {
  if (spec.rfind("stub:", 0) == 0) {
    return std::make_unique<GoldStubParser>(GoldStubParser::from_file(framework, spec.substr(5)));
  }
  if (spec.rfind("const:", 0) == 0) {
    std::string body = spec.substr(6);
    auto at = body.rfind('@');
    if (at == std::string::npos) throw Error("const parser spec must be const:<Sense>@<confidence>");
    return std::make_unique<ConstantParser>(
        framework, SenseScore{body.substr(0, at), std::stod(body.substr(at + 1))});
  }
  throw Error("unknown parser adapter '" + spec + "'");
}

// ---------------------------------------------------------------------------
// Implicit and RST extraction

std::vector<DiscourseRelation> extract_implicit_pdtb(
    std::string_view text, ParserAdapter& classifier, const SenseInventory& inventory,
    const std::string& record_id, const std::vector<DiscourseRelation>& explicit_relations) {
  if (classifier.info().framework != Framework::kPdtbImplicit) {
    throw Error("implicit extraction requires a pdtb_implicit classifier");
  }
  std::vector<DiscourseRelation> relations;
  const auto sentences = split_sentences(text);
  for (std::size_t k = 0; k + 1 < sentences.size(); ++k) {
    const Span first = sentences[k];
    const Span second = sentences[k + 1];
    bool linked = std::any_of(
        explicit_relations.begin(), explicit_relations.end(), [&](const DiscourseRelation& r) {
          return r.arg1 && r.arg2 && r.arg1->overlaps(first) && r.arg2->overlaps(second);
        });
    if (linked) continue;
    std::optional<SenseScore> result;
    try {
      result = classifier.classify(ParserInput{record_id, text, first, second});
    } catch (const std::exception& e) {
      std::cerr << "warning: implicit classifier failed on " << record_id << " pair " << k
                << ": " << e.what() << "\n";
      continue;
    }
    if (!result || !inventory.is_pdtb(result->sense)) continue;
    if (!(result->confidence >= 0.0 && result->confidence <= 1.0)) continue;
    DiscourseRelation relation;
    relation.framework = Framework::kPdtbImplicit;
    relation.sense = result->sense;
    relation.arg1 = first;
    relation.arg2 = second;
    relation.confidence = result->confidence;
    relations.push_back(std::move(relation));
  }
  return relations;
}

std::optional<DiscourseRelation> extract_rst_root(std::string_view comment,
                                                  const std::optional<std::string>& parent,
                                                  ParserAdapter& parser,
                                                  const SenseInventory& inventory,
                                                  const std::string& record_id) {
  if (parser.info().framework != Framework::kRstRoot) {
    throw Error("RST extraction requires an rst_root parser");
  }
  if (!parent || trim(*parent).empty()) return std::nullopt;
  std::string joined = *parent;
  joined += kParagraphSeparator;
  joined += comment;
  std::optional<SenseScore> result;
  try {
    result = parser.classify(ParserInput{record_id, joined, std::nullopt, std::nullopt});
  } catch (const std::exception& e) {
    std::cerr << "warning: RST parser failed on " << record_id << ": " << e.what() << "\n";
    return std::nullopt;
  }
  if (!result || !inventory.is_rst(result->sense)) return std::nullopt;
  if (!(result->confidence >= 0.0 && result->confidence <= 1.0)) return std::nullopt;
  DiscourseRelation relation;
  relation.framework = Framework::kRstRoot;
  relation.sense = result->sense;
  relation.confidence = result->confidence;
  return relation;
}

// ---------------------------------------------------------------------------
// Corpus driver

namespace {

// Serializes calls into an adapter that is not thread-safe.
class SerializedParser final : public ParserAdapter {
 public:
  explicit SerializedParser(ParserAdapter& inner) : inner_(inner) {}
  AdapterInfo info() const override { return inner_.info(); }
  std::optional<SenseScore> classify(const ParserInput& input) override {
    std::lock_guard<std::mutex> lock(mutex_);
    return inner_.classify(input);
  }

 private:
  ParserAdapter& inner_;
  std::mutex mutex_;
};

}  // namespace

std::vector<AnnotatedRecord> annotate_corpus(const std::vector<AnnotationRequest>& records,
                                             const Annotators& annotators,
                                             std::size_t workers) {
  annotators.inventory.check();
  std::optional<SerializedParser> implicit_guard;
  std::optional<SerializedParser> rst_guard;
  ParserAdapter* implicit = annotators.implicit;
  ParserAdapter* rst = annotators.rst;
  if (workers > 1 && implicit && !implicit->info().thread_safe) {
    implicit = &implicit_guard.emplace(*implicit);
  }
  if (workers > 1 && rst && !rst->info().thread_safe) rst = &rst_guard.emplace(*rst);

  std::vector<AnnotatedRecord> out(records.size());
  auto annotate_one = [&](std::size_t i) {
    const auto& record = records[i];
    AnnotatedRecord& result = out[i];
    result.id = record.id;
    std::vector<DiscourseRelation> explicit_relations;
    if (annotators.lexicon) explicit_relations = extract_explicit_pdtb(record.text, *annotators.lexicon);
    result.relations = explicit_relations;
    if (implicit) {
      auto found = extract_implicit_pdtb(record.text, *implicit, annotators.inventory, record.id,
                                         explicit_relations);
      result.relations.insert(result.relations.end(), found.begin(), found.end());
    }
    if (rst) {
      if (auto root = extract_rst_root(record.text, record.parent, *rst, annotators.inventory,
                                       record.id)) {
        result.relations.push_back(std::move(*root));
      }
    }
  };

  if (workers <= 1 || records.size() < 2) {
    for (std::size_t i = 0; i < records.size(); ++i) annotate_one(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::mutex error_mutex;
  std::exception_ptr error;
  for (std::size_t w = 0; w < std::min(workers, records.size()); ++w) {
    pool.emplace_back([&] {
      try {
        for (std::size_t i = next++; i < records.size(); i = next++) annotate_one(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
  return out;
}

void save_relations(const std::filesystem::path& path,
                    const std::vector<AnnotatedRecord>& records) {
  std::vector<json> rows;
  for (const auto& record : records) {
    for (const auto& relation : record.relations) {
      json row = relation;
      row["id"] = record.id;
      rows.push_back(std::move(row));
    }
  }
  write_jsonl(path, rows);
}

std::map<std::string, std::vector<DiscourseRelation>> load_relations(
    const std::filesystem::path& path) {
  std::map<std::string, std::vector<DiscourseRelation>> relations;
  for (const auto& row : read_jsonl(path)) {
    relations[row.at("id").get<std::string>()].push_back(row.get<DiscourseRelation>());
  }
  return relations;
}

}  // namespace detox
