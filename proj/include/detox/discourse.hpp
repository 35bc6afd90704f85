#pragma once

// Discourse relation annotation: explicit PDTB relations from a connective
// lexicon, implicit PDTB relations between adjacent sentences, and the root
// RST relation between a comment and its parent. Trained parsers plug in
// through ParserAdapter; deterministic stubs back the tests and CLI.

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "detox/common.hpp"

namespace detox {

enum class Framework { kPdtbExplicit, kPdtbImplicit, kRstRoot };

std::string to_string(Framework framework);
Framework parse_framework(std::string_view text);

struct DiscourseRelation {
  Framework framework = Framework::kPdtbExplicit;
  std::string sense;
  std::optional<Span> arg1;  // absent for rst_root
  std::optional<Span> arg2;
  double confidence = 1.0;

  bool is_pdtb() const { return framework != Framework::kRstRoot; }

  friend bool operator==(const DiscourseRelation&, const DiscourseRelation&) = default;
};

void to_json(json& j, const DiscourseRelation& relation);
void from_json(const json& j, DiscourseRelation& relation);

// Relation labels known to a run. Labels may not contain whitespace, ':',
// '<' or '>', since they are embedded in special tokens.
struct SenseInventory {
  std::vector<std::string> pdtb_l1;
  std::vector<std::string> pdtb_l2;
  std::vector<std::string> rst_top;

  // Temporal, Contingency, Comparison, Expansion; the sixteen PDTB-2 level-2
  // types; the eighteen top-level RST classes.
  static SenseInventory standard();

  bool is_l1(std::string_view sense) const;
  bool is_l2(std::string_view sense) const;
  bool is_pdtb(std::string_view sense) const { return is_l1(sense) || is_l2(sense); }
  bool is_rst(std::string_view sense) const;

  // Throws Error on malformed labels, duplicates, or an L2 label whose
  // prefix is not an L1 label.
  void check() const;

  friend bool operator==(const SenseInventory&, const SenseInventory&) = default;
};

void to_json(json& j, const SenseInventory& inventory);
void from_json(const json& j, SenseInventory& inventory);

// "Comparison.Contrast" -> "Comparison"; L1 labels map to themselves.
std::string l1_of(std::string_view sense);

// Checks span bounds, argument disjointness and inventory membership.
std::vector<std::string> validate_relation(const DiscourseRelation& relation,
                                           std::string_view text,
                                           const SenseInventory& inventory);

// Rule-based sentence splitter: a sentence ends after a run of '.', '!' or
// '?' (plus closing quotes/brackets) followed by whitespace or end of text,
// or at a newline. Returned spans exclude surrounding whitespace.
std::vector<Span> split_sentences(std::string_view text);

struct Connective {
  std::string surface;  // lower-case, may span several words
  std::string l1;
  std::string l2;       // empty when only the class is known
};

class ConnectiveLexicon {
 public:
  ConnectiveLexicon() = default;
  explicit ConnectiveLexicon(std::vector<Connective> entries);

  // TSV rows: connective <TAB> L1 sense <TAB> L2 sense. '#' starts a comment.
  static ConnectiveLexicon from_tsv(const std::filesystem::path& path);

  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }
  const std::vector<Connective>& entries() const { return entries_; }

  // Longest entry matching at `pos` on word boundaries, case-insensitive.
  const Connective* match_at(std::string_view text, std::size_t pos) const;

 private:
  std::vector<Connective> entries_;  // sorted by descending word count, then length
};

// One relation per sentence-initial or sentence-medial connective:
//   sentence-initial: arg1 = previous sentence, arg2 = rest of the sentence
//                     after the connective and any following comma;
//   sentence-medial:  arg1 = clause before the connective (trailing ',' or
//                     ';' trimmed), arg2 = clause after it.
// Confidence is 1.0. The sense is the L2 label when the lexicon has one.
std::vector<DiscourseRelation> extract_explicit_pdtb(std::string_view text,
                                                     const ConnectiveLexicon& lexicon);

struct AdapterInfo {
  Framework framework = Framework::kPdtbImplicit;
  std::string level;  // "L1", "L2" or "top"
  std::string name;
  bool thread_safe = false;
};

// One classification request. For implicit PDTB, `text` is the comment and
// arg1/arg2 are the adjacent sentences. For RST, `text` is the parent and
// comment joined as two paragraphs and the spans are unset.
struct ParserInput {
  std::string record_id;
  std::string_view text;
  std::optional<Span> arg1;
  std::optional<Span> arg2;
};

struct SenseScore {
  std::string sense;
  double confidence = 0.0;
};

class ParserAdapter {
 public:
  virtual ~ParserAdapter() = default;
  virtual AdapterInfo info() const = 0;
  // nullopt when the parser abstains; throws on failure.
  virtual std::optional<SenseScore> classify(const ParserInput& input) = 0;
};

// Returns a fixed label for every request.
class ConstantParser final : public ParserAdapter {
 public:
  ConstantParser(Framework framework, SenseScore result);
  AdapterInfo info() const override;
  std::optional<SenseScore> classify(const ParserInput& input) override;

 private:
  Framework framework_;
  SenseScore result_;
};

// Replays gold annotations from a JSONL fixture whose rows are
// DiscourseRelation objects plus an "id" field naming the record. Implicit
// requests match on (id, arg1, arg2); RST requests match on id.
class GoldStubParser final : public ParserAdapter {
 public:
  GoldStubParser(Framework framework, const std::vector<json>& rows);
  static GoldStubParser from_file(Framework framework, const std::filesystem::path& path);

  AdapterInfo info() const override;
  std::optional<SenseScore> classify(const ParserInput& input) override;

 private:
  Framework framework_;
  std::map<std::string, std::vector<DiscourseRelation>> by_id_;
};

// "stub:<gold.jsonl>" or "const:<Sense>@<confidence>".
std::unique_ptr<ParserAdapter> make_parser(Framework framework, const std::string& spec);

// At most one relation per adjacent sentence pair, spans in document order.
// Pairs already linked by one of `explicit_relations` are skipped, as are
// pairs the classifier abstains on, labels outside the inventory, and pairs
// on which the classifier throws (logged).
std::vector<DiscourseRelation> extract_implicit_pdtb(
    std::string_view text, ParserAdapter& classifier, const SenseInventory& inventory,
    const std::string& record_id = {},
    const std::vector<DiscourseRelation>& explicit_relations = {});

// Paragraph separator placed between parent and comment.
inline constexpr std::string_view kParagraphSeparator = "\n\n";

// Root relation between comment and parent. Absent when the parent is
// missing, the parser abstains or fails, or the label is "span" or
// otherwise outside the RST inventory.
std::optional<DiscourseRelation> extract_rst_root(std::string_view comment,
                                                  const std::optional<std::string>& parent,
                                                  ParserAdapter& parser,
                                                  const SenseInventory& inventory,
                                                  const std::string& record_id = {});

struct AnnotationRequest {
  std::string id;
  std::string text;
  std::optional<std::string> parent;
};

struct Annotators {
  const ConnectiveLexicon* lexicon = nullptr;  // explicit PDTB, optional
  ParserAdapter* implicit = nullptr;           // optional
  ParserAdapter* rst = nullptr;                // optional
  SenseInventory inventory = SenseInventory::standard();
};

struct AnnotatedRecord {
  std::string id;
  std::vector<DiscourseRelation> relations;
};

// Annotates every record. With workers > 1 records are processed in
// parallel; calls into adapters that are not thread-safe are serialized.
// Output order matches input order.
std::vector<AnnotatedRecord> annotate_corpus(const std::vector<AnnotationRequest>& records,
                                             const Annotators& annotators,
                                             std::size_t workers = 1);

// Relations file: one row per relation, {"id": record id, ...relation}.
void save_relations(const std::filesystem::path& path,
                    const std::vector<AnnotatedRecord>& records);
std::map<std::string, std::vector<DiscourseRelation>> load_relations(
    const std::filesystem::path& path);

}  // namespace detox
