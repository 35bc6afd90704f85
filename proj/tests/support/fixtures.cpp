#include "support/fixtures.hpp"

#include <algorithm>
#include <atomic>
#include <unistd.h>

namespace detox::testing {

namespace fs = std::filesystem;

fs::path fixture(const std::string& name) { return fs::path(DETOX_FIXTURES_DIR) / name; }

fs::path data_file(const std::string& name) { return fs::path(DETOX_DATA_DIR_SOURCE) / name; }

fs::path scratch_dir(const std::string& tag) {
  static std::atomic<int> counter{0};
  fs::path dir = fs::temp_directory_path() /
                 ("detox-" + tag + "-" + std::to_string(::getpid()) + "-" +
                  std::to_string(counter++));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

ConnectiveLexicon shipped_lexicon() {
  return ConnectiveLexicon::from_tsv(data_file("pdtb_connectives.tsv"));
}

StyleTransferPair make_record(const std::string& id, const std::string& original,
                            const std::string& rewrite, SplitName split) {
  StyleTransferPair pair;
  pair.id = id;
  pair.original = original;
  pair.rewrite = rewrite;
  pair.change_type = ChangeType::kLocal;
  pair.reasons = {"Insults"};
  pair.parent_body = "What do you all think?";
  pair.split = split;
  return pair;
}

namespace {

DiscourseRelation implicit_between(std::string_view text, std::size_t first, std::size_t second,
                                   const std::string& sense, double confidence) {
  const auto sentences = split_sentences(text);
  DiscourseRelation r;
  r.framework = Framework::kPdtbImplicit;
  r.sense = sense;
  r.arg1 = sentences.at(first);
  r.arg2 = sentences.at(second);
  r.confidence = confidence;
  return r;
}

DiscourseRelation rst(const std::string& cls, double confidence) {
  DiscourseRelation r;
  r.framework = Framework::kRstRoot;
  r.sense = cls;
  r.confidence = confidence;
  return r;
}

}  // namespace

RelationRichFixture relation_rich_fixture() {
  const ConnectiveLexicon lexicon = shipped_lexicon();
  RelationRichFixture f;
  struct Row {
    std::string id, text;
  };
  const std::vector<Row> rows = {
      {"r1", "You are wrong. However, I see your point. The data says otherwise."},
      {"r2", "I left early because the meeting was pointless. Nobody listened. It was a waste."},
      {"r3", "Stop posting this. Nobody cares. Go outside."},
      {"r4", "This idea is bad. Also, it is expensive."},
      {"r5", "The mayor lied. Then he resigned. People cheered."},
      {"r6", "I read the article. It was long. The ending surprised me."},
  };
  for (const auto& row : rows) {
    f.corpus.push_back(make_record(row.id, row.text, "rewritten " + row.id));
    f.relations[row.id] = extract_explicit_pdtb(row.text, lexicon);
  }
  auto text_of = [&](const std::string& id) -> const std::string& {
    for (const auto& p : f.corpus) {
      if (p.id == id) return p.original;
    }
    throw Error("no record " + id);
  };
  f.relations["r1"].push_back(implicit_between(text_of("r1"), 1, 2, "Comparison.Contrast", 0.9));
  f.relations["r2"].push_back(implicit_between(text_of("r2"), 1, 2, "Contingency.Cause", 0.3));
  f.relations["r3"].push_back(implicit_between(text_of("r3"), 0, 1, "Contingency.Cause", 0.45));
  f.relations["r6"].push_back(implicit_between(text_of("r6"), 0, 1, "Expansion.Restatement", 0.6));
  const std::vector<std::pair<std::string, double>> roots = {
      {"Contrast", 0.2}, {"Explanation", 0.5}, {"Evaluation", 0.55},
      {"Elaboration", 0.8}, {"Background", 0.9}, {"Cause", 0.95}};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    f.relations[rows[i].id].push_back(rst(roots[i].first, roots[i].second));
  }
  return f;
}

namespace {

const std::vector<std::string> kWords = {
    "you",  "are",   "so",   "wrong", "this", "idea", "is",   "bad",   "however", "café",
    "naïve", "<b>",  "x<y",  "a>b",   "<pdtb:fake>", "</rst:Nope>", "<rst:Elaboration",
    "3.5",  "ok",    "\"quoted\"", "(aside)", "well", "rain", "😀", "mixed-case", "Then"};

template <typename T>
const T& pick(const std::vector<T>& items, std::mt19937_64& rng) {
  return items[rng() % items.size()];
}

double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

RoundTripCase random_round_trip_case(std::mt19937_64& rng) {
  const SenseInventory inventory = SenseInventory::standard();
  RoundTripCase c;
  // Body: 1-4 sentences of 1-8 words, odd spacing included.
  std::string text;
  std::vector<std::size_t> boundaries;  // word start/end offsets
  const std::size_t sentences = 1 + rng() % 4;
  for (std::size_t s = 0; s < sentences; ++s) {
    const std::size_t words = 1 + rng() % 8;
    for (std::size_t w = 0; w < words; ++w) {
      if (!text.empty()) text += (rng() % 7 == 0) ? "  " : " ";
      boundaries.push_back(text.size());
      text += pick(kWords, rng);
      if (w + 1 == words) text += pick(std::vector<std::string>{".", "!", "?", "...", ""}, rng);
      boundaries.push_back(text.size());
    }
    if (rng() % 5 == 0) text += "\n";
  }
  if (rng() % 6 == 0) text = " " + text;
  if (rng() % 6 == 0) text += " ";
  c.record = make_record("case", text);

  std::sort(boundaries.begin(), boundaries.end());
  boundaries.erase(std::unique(boundaries.begin(), boundaries.end()), boundaries.end());
  auto random_span = [&](std::size_t lo_index) -> std::optional<std::pair<Span, std::size_t>> {
    if (lo_index + 1 >= boundaries.size()) return std::nullopt;
    std::size_t a = lo_index + rng() % (boundaries.size() - lo_index - 1);
    std::size_t b = a + 1 + rng() % (boundaries.size() - a - 1);
    return std::make_pair(Span{boundaries[a], boundaries[b]}, b);
  };
  const std::size_t n_relations = rng() % 4;
  for (std::size_t k = 0; k < n_relations; ++k) {
    auto first = random_span(rng() % boundaries.size());
    if (!first) continue;
    auto second = random_span(first->second);
    if (!second) continue;
    DiscourseRelation r;
    r.framework = rng() % 2 ? Framework::kPdtbExplicit : Framework::kPdtbImplicit;
    r.sense = rng() % 4 == 0 ? pick(inventory.pdtb_l1, rng) : pick(inventory.pdtb_l2, rng);
    r.arg1 = first->first;
    r.arg2 = second->first;
    if (rng() % 2) std::swap(r.arg1, r.arg2);
    r.confidence = r.framework == Framework::kPdtbExplicit ? 1.0 : unit(rng);
    c.relations.push_back(r);
  }
  if (rng() % 3 != 0) {
    c.relations.push_back(DiscourseRelation{Framework::kRstRoot, pick(inventory.rst_top, rng),
                                            std::nullopt, std::nullopt, unit(rng)});
  }

  const auto variants = variant_matrix(inventory);
  c.config = pick(variants, rng).config;
  if (rng() % 3 == 0) c.config.filter_explicit = true;
  c.thresholds.pdtb_explicit = unit(rng) * 0.5;
  c.thresholds.pdtb_implicit = unit(rng);
  c.thresholds.rst = unit(rng);
  return c;
}

std::vector<TrainingExample> copy_task(std::size_t n, std::uint64_t seed) {
  static const std::vector<std::string> kVocab = {"red", "blue", "cat", "dog", "sun",
                                                  "run", "big", "old", "sky", "toy"};
  std::mt19937_64 rng(seed);
  std::vector<TrainingExample> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::string text = pick(kVocab, rng);
    const std::size_t extra = 1 + rng() % 2;
    for (std::size_t w = 0; w < extra; ++w) text += " " + pick(kVocab, rng);
    out.push_back({"copy-" + std::to_string(i), text, text});
  }
  return out;
}

void assign_preferences(JudgingSession& session, const std::vector<std::size_t>& item_indices,
                        const std::array<std::array<std::size_t, 3>, 3>& counts) {
  for (std::size_t q = 0; q < 3; ++q) {
    const auto& c = counts[q];
    if (c[0] + c[1] + c[2] != item_indices.size()) throw Error("counts do not cover the items");
    for (std::size_t k = 0; k < item_indices.size(); ++k) {
      const JudgeItem& item = session.items.at(item_indices[k]);
      Judgment& j = session.judgments[item.item_id];
      j.item_id = item.item_id;
      j.judge_id = "expert";
      j.timestamp = "2022-07-01T00:00:00Z";
      if (k < c[0]) {
        j.answers[q] = item.model1_is_a ? Answer::kA : Answer::kB;
      } else if (k < c[0] + c[1]) {
        j.answers[q] = item.model1_is_a ? Answer::kB : Answer::kA;
      } else {
        j.answers[q] = Answer::kNoPreference;
      }
    }
  }
}

JudgedSessionFixture judged_session_fixture(std::uint64_t seed) {
  std::vector<GeneratedOutput> baseline, aware;
  std::vector<StyleTransferPair> corpus;
  for (int i = 0; i < 100; ++i) {
    char id[16];
    std::snprintf(id, sizeof(id), "t%03d", i);
    corpus.push_back(make_record(id, "original comment " + std::to_string(i)));
    baseline.push_back({id, "baseline output " + std::to_string(i)});
    aware.push_back({id, "aware output " + std::to_string(i)});
  }
  JudgedSessionFixture f;
  f.session = create_session(baseline, aware, corpus, 100, seed, "judged");
  std::vector<std::size_t> subset, rest;
  for (std::size_t i = 0; i < f.session.items.size(); ++i) (i % 2 == 0 ? subset : rest).push_back(i);
  assign_preferences(f.session, subset, {{{15, 28, 7}, {17, 23, 10}, {13, 23, 14}}});
  assign_preferences(f.session, rest, {{{21, 20, 9}, {15, 14, 21}, {16, 17, 17}}});
  for (std::size_t i : subset) {
    DiscourseRelation r;
    r.framework = Framework::kRstRoot;
    r.sense = "Elaboration";
    r.confidence = 0.7;
    f.relations[f.session.items[i].item_id].push_back(r);
  }
  // Present but empty entries do not qualify.
  for (std::size_t i : rest) f.relations[f.session.items[i].item_id];
  f.session.closed = true;
  return f;
}

}  // namespace detox::testing
