#include "figmine/search.hpp"

#include "test_support.hpp"

using namespace figmine;
using namespace figmine::search;
using figmine::testing::expect_code;
using figmine::testing::TempDir;

namespace {

const std::vector<std::string> kWords{"cell", "virus", "protein", "network", "growth", "signal", "tree", "gene"};

/// Papers P0..P(n/3) with three top-level figures each, captions drawn
/// from a small vocabulary so terms repeat across documents.
corpus::Manifest make_manifest(int figures, std::uint64_t seed, ScoreTable& scores) {
  Rng rng(seed);
  corpus::Manifest m;
  const int papers = std::max(1, figures / 3);
  for (int p = 0; p < papers; ++p) {
    PaperRecord r;
    r.paper_id = "P" + std::to_string(p);
    r.title = "On " + kWords[uniform_index(rng, kWords.size())];
    r.abstract_text = "About the " + kWords[uniform_index(rng, kWords.size())];
    r.journal = "J";
    r.year = 2010;
    scores[r.paper_id] = static_cast<double>(uniform_index(rng, 10)) / 10.0;
    m.papers.push_back(r);
  }
  for (int f = 0; f < figures; ++f) {
    FigureRecord r;
    char id[16];
    std::snprintf(id, sizeof id, "F%04d", f);
    r.figure_id = id;
    r.paper_id = m.papers[f % papers].paper_id;
    r.caption = "Figure " + kWords[uniform_index(rng, kWords.size())] + " " + kWords[uniform_index(rng, kWords.size())];
    r.label = kFigureClasses[uniform_index(rng, kFigureClasses.size())];
    m.figures.push_back(r);
  }
  return m;
}

std::string doc_text(const corpus::Manifest& m, const FigureRecord& f) {
  const PaperRecord* p = m.find_paper(f.paper_id);
  return p->title + " " + p->abstract_text + " " + f.caption;
}

}  // namespace

TEST(Tokenize, FoldsCaseAndAccents) {
  EXPECT_EQ(tokenize("Ångström-scale NAÏVE cells, 3D"), (std::vector<std::string>{"angstrom", "scale", "naive", "cells", "3d"}));
  EXPECT_EQ(tokenize("Straße × Œuvre"), (std::vector<std::string>{"strasse", "oeuvre"}));
  EXPECT_TRUE(tokenize("  ,;  ").empty());
  EXPECT_EQ(tokenize("ab\xff" "cd"), (std::vector<std::string>{"ab", "cd"}));  // malformed byte splits
}

TEST(Index, PostingsMatchRecount) {
  ScoreTable scores;
  const auto m = make_manifest(120, 1, scores);
  const SearchIndex idx = build_index(m, scores);
  ASSERT_EQ(idx.docs.size(), 120u);
  // Oracle: distinct (token, field) pairs per figure, recounted directly.
  std::size_t expected = 0;
  for (const auto& f : m.figures) {
    const PaperRecord* p = m.find_paper(f.paper_id);
    for (const std::string& text : {p->title, p->abstract_text, f.caption}) {
      const auto toks = tokenize(text);
      expected += std::set<std::string>(toks.begin(), toks.end()).size();
    }
  }
  EXPECT_EQ(idx.posting_count(), expected);
  const auto& cell = idx.postings.at("cell");
  for (const auto& post : cell) EXPECT_GE(post.tf, 1u);
}

TEST(Index, SerializationIsStable) {
  ScoreTable scores;
  const auto m = make_manifest(60, 2, scores);
  const SearchIndex idx = build_index(m, scores);
  const auto bytes = serialize(idx);
  EXPECT_EQ(deserialize_index(bytes), idx);
  auto shuffled = m;
  std::reverse(shuffled.figures.begin(), shuffled.figures.end());
  EXPECT_EQ(serialize(build_index(shuffled, scores)), bytes);
  auto dup = m;
  dup.figures.push_back(m.figures[0]);
  expect_code(ErrorCode::InvalidParameter, [&] { build_index(dup, scores); });
}

TEST(Match, AllTermsOrderedByScoreThenId) {
  ScoreTable scores;
  const auto m = make_manifest(300, 3, scores);
  const SearchIndex idx = build_index(m, scores);
  for (const std::string q : {"cell", "cell virus", "Figure", "gene tree"}) {
    const auto terms = tokenize(q);
    std::vector<std::pair<double, std::string>> oracle;
    for (const auto& f : m.figures) {
      const auto toks = tokenize(doc_text(m, f));
      const std::set<std::string> have(toks.begin(), toks.end());
      if (std::all_of(terms.begin(), terms.end(), [&](const auto& t) { return have.contains(t); }))
        oracle.emplace_back(scores.at(f.paper_id), f.figure_id);
    }
    std::sort(oracle.begin(), oracle.end(), [](const auto& a, const auto& b) { return a.first != b.first ? a.first > b.first : a.second < b.second; });
    const auto hits = match(idx, q, {});
    ASSERT_EQ(hits.size(), oracle.size()) << q;
    for (std::size_t i = 0; i < hits.size(); ++i) EXPECT_EQ(idx.docs[hits[i].doc].figure_id, oracle[i].second);
  }
}

TEST(Match, AnyTermAndTypeFilter) {
  ScoreTable scores;
  const auto m = make_manifest(90, 4, scores);
  const SearchIndex idx = build_index(m, scores);
  QueryOptions any;
  any.match = MatchMode::any_term;
  EXPECT_GE(match(idx, "cell virus", any).size(), match(idx, "cell virus", {}).size());
  EXPECT_EQ(match(idx, "cell zzzz", {}).size(), 0u);
  EXPECT_EQ(match(idx, "cell zzzz", any).size(), match(idx, "cell", {}).size());
  QueryOptions plots;
  plots.types = {FigureLabel::plot};
  for (const auto& h : match(idx, "figure", plots)) EXPECT_EQ(idx.docs[h.doc].label, FigureLabel::plot);
  expect_code(ErrorCode::EmptyQuery, [&] { match(idx, " -- ", {}); });
}

TEST(Snippet, WindowAroundFirstHit) {
  const std::string cap = "a b c d e f g h i j k l m n o p q r s t";
  EXPECT_EQ(snippet(cap, {"k"}), "... e f g h i j k l m n o p q ...");
  EXPECT_EQ(snippet(cap, {"b"}), "a b c d e f g h ...");
  EXPECT_EQ(snippet(cap, {"zz"}), "a b c d e f g ...");
  EXPECT_EQ(snippet("", {"a"}), "");
}

TEST(Service, PaginationWalksEveryHitOnce) {
  TempDir dir("svc");
  ScoreTable scores;
  const auto m = make_manifest(450, 5, scores);
  SearchService svc(m, scores, dir.path(), dir.path() / "log.jsonl");
  const auto all = match(build_index(m, scores), "figure", {});
  QueryOptions opt;
  opt.page_size = 37;
  std::vector<std::string> walked;
  for (opt.page = 1;; ++opt.page) {
    const SearchPage page = svc.query("figure", opt);
    EXPECT_EQ(page.total, all.size());
    if (page.results.empty()) break;
    for (const auto& r : page.results) walked.push_back(r.figure_id);
  }
  ASSERT_EQ(walked.size(), all.size());
  const auto idx = build_index(m, scores);
  for (std::size_t i = 0; i < walked.size(); ++i) EXPECT_EQ(walked[i], idx.docs[all[i].doc].figure_id);
  opt.page = 1;
  opt.page_size = kMaxPageSize + 1;
  expect_code(ErrorCode::BadRequest, [&] { svc.query("figure", opt); });
  opt.page_size = 10;
  opt.page = 0;
  expect_code(ErrorCode::BadRequest, [&] { svc.query("figure", opt); });
}

TEST(Service, DetailSiblingsAndChildren) {
  TempDir dir("detail");
  ScoreTable scores;
  auto m = make_manifest(12, 6, scores);  // four papers, three figures each
  FigureRecord child = m.figures[0];
  child.figure_id = m.figures[0].figure_id + "-s0";
  child.parent_figure_id = m.figures[0].figure_id;
  child.bbox_in_parent = Rect{0, 0, 1, 1};
  m.figures.push_back(child);
  SearchService svc(m, scores, dir.path(), dir.path() / "log.jsonl");
  const auto d = svc.figure_detail(m.figures[0].figure_id);
  EXPECT_EQ(d["siblings"].size(), 2u);  // same paper, also top level
  EXPECT_EQ(d["children"], nlohmann::json::array({child.figure_id}));
  EXPECT_EQ(d["paper"]["paper_id"], m.figures[0].paper_id);
  EXPECT_DOUBLE_EQ(d["alef_score"].get<double>(), scores.at(m.figures[0].paper_id));
  const auto c = svc.figure_detail(child.figure_id);
  EXPECT_EQ(c["parent_figure_id"], m.figures[0].figure_id);
  EXPECT_TRUE(c["siblings"].empty());
  expect_code(ErrorCode::NotFound, [&] { svc.figure_detail("missing"); });
}

TEST(Service, VerificationDedupeAndValidation) {
  TempDir dir("verify");
  ScoreTable scores;
  const auto m = make_manifest(6, 7, scores);
  const auto log = dir.path() / "log.jsonl";
  const std::string id = m.figures[0].figure_id;
  {
    SearchService svc(m, scores, dir.path(), log);
    EXPECT_TRUE(svc.submit_verification(id, "plot", "tok", 1000));
    EXPECT_FALSE(svc.submit_verification(id, "plot", "tok", 1000 + 3600));
    EXPECT_TRUE(svc.submit_verification(id, "table", "tok", 1000 + 3600));
    EXPECT_TRUE(svc.submit_verification(id, "plot", "other", 1000));
    EXPECT_TRUE(svc.submit_verification(id, "plot", "tok", 1000 + kDedupWindowSeconds));
    EXPECT_EQ(svc.log().rows(), 4u);
    expect_code(ErrorCode::BadRequest, [&] { svc.submit_verification(id, "unclassified", "tok", 1); });
    expect_code(ErrorCode::BadRequest, [&] { svc.submit_verification(id, "banana", "tok", 1); });
    expect_code(ErrorCode::NotFound, [&] { svc.submit_verification("missing", "plot", "tok", 1); });
    EXPECT_EQ(svc.figure_detail(id)["label"], std::string(to_string(m.figures[0].label)));
  }
  // A restarted service remembers what it logged.
  SearchService again(m, scores, dir.path(), log);
  EXPECT_EQ(again.log().rows(), 4u);
  EXPECT_FALSE(again.submit_verification(id, "table", "tok", 1000 + 7200));
}

TEST(Scores, ParseAndManifestFallback) {
  const ScoreTable s = parse_scores("{\"paper_id\":\"A\",\"alef\":0.5}\n\n{\"paper_id\":\"B\",\"alef\":0.25}\n");
  EXPECT_EQ(s.size(), 2u);
  EXPECT_DOUBLE_EQ(s.at("B"), 0.25);
  expect_code(ErrorCode::ParseError, [] { parse_scores("{\"paper_id\":\"A\"}\n"); });
  corpus::Manifest m;
  PaperRecord p;
  p.paper_id = "X";
  p.alef_score = 0.75;
  m.papers.push_back(p);
  EXPECT_DOUBLE_EQ(scores_from_manifest(m).at("X"), 0.75);
}
