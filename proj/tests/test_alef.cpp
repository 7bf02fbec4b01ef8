#include "figmine/alef.hpp"

#include <set>

#include "test_support.hpp"

using namespace figmine;
using namespace figmine::alef;
using figmine::testing::expect_code;

namespace {

using Edges = std::vector<std::pair<std::string, std::string>>;

double score_of(const CitationGraph& g, const AlefScores& s, const std::string& id) { return s[*g.find(id)]; }

}  // namespace

TEST(Graph, DropsSelfLoopsAndDuplicates) {
  const Edges e{{"a", "a"}, {"a", "b"}, {"a", "b"}, {"b", "c"}};
  const CitationGraph g = build_graph(e);
  EXPECT_EQ(g.node_count(), 3u);
  EXPECT_EQ(g.edge_count(), 2u);
  EXPECT_EQ(g.dropped_self_loops, 1u);
  EXPECT_EQ(g.dropped_duplicates, 1u);
  EXPECT_TRUE(g.has_edge(*g.find("a"), *g.find("b")));
  EXPECT_FALSE(g.has_edge(*g.find("b"), *g.find("a")));
  EXPECT_EQ(g.in_degree(*g.find("b")), 1u);
  EXPECT_FALSE(g.find("zz").has_value());
}

TEST(Graph, ExtraNodesAreIsolated) {
  const Edges e{{"a", "b"}};
  const std::vector<std::string> extra{"c", "a"};
  const CitationGraph g = build_graph(e, extra);
  EXPECT_EQ(g.node_count(), 3u);
  EXPECT_TRUE(g.out_edges(*g.find("c")).empty());
}

TEST(Graph, NodeCountMatchesDistinctIds) {
  Rng rng(8);
  Edges e;
  std::set<std::string> ids;
  for (int i = 0; i < 10000; ++i) {
    const std::string a = "p" + std::to_string(uniform_index(rng, 1500));
    const std::string b = "p" + std::to_string(uniform_index(rng, 1500));
    e.emplace_back(a, b);
    ids.insert(a);
    ids.insert(b);
  }
  const CitationGraph g = build_graph(e);
  EXPECT_EQ(g.node_count(), ids.size());
  std::set<std::pair<std::string, std::string>> distinct;
  for (const auto& [a, b] : e)
    if (a != b) distinct.emplace(a, b);
  EXPECT_EQ(g.edge_count(), distinct.size());
}

TEST(Parse, SkipsCommentsAndReportsLine) {
  const auto e = parse_edge_list("# header\na\tb\n\nc\td\r\n");
  ASSERT_EQ(e.size(), 2u);
  EXPECT_EQ(e[1], (std::pair<std::string, std::string>{"c", "d"}));
  try {
    parse_edge_list("a\tb\nc d\n");
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), ErrorCode::ParseError);
    EXPECT_NE(std::string(err.what()).find("line 2"), std::string::npos);
  }
  expect_code(ErrorCode::ParseError, [] { parse_edge_list("a\tb\tc\n"); });
  expect_code(ErrorCode::ParseError, [] { parse_edge_list("\tb\n"); });
}

TEST(Scores, ChainMatchesHandComputation) {
  // pi0 = (0, 1/4, 1/4, 1/4, 1/4); only e dangles.
  const Edges e{{"a", "b"}, {"b", "c"}, {"c", "d"}, {"d", "e"}};
  const CitationGraph g = build_graph(e);
  const AlefScores one = alef_scores(g, {0.85, 1});
  EXPECT_NEAR(score_of(g, one, "a"), 0.0, 1e-15);
  EXPECT_NEAR(score_of(g, one, "b"), 0.090625, 1e-15);
  EXPECT_NEAR(score_of(g, one, "c"), 0.303125, 1e-15);
  EXPECT_NEAR(score_of(g, one, "e"), 0.303125, 1e-15);
  const AlefScores two = alef_scores(g);
  EXPECT_NEAR(score_of(g, two, "b"), 0.1019140625, 1e-15);
  EXPECT_NEAR(score_of(g, two, "c"), 0.1789453125, 1e-15);
  EXPECT_NEAR(score_of(g, two, "d"), 0.3595703125, 1e-15);
  EXPECT_NEAR(score_of(g, two, "e"), 0.3595703125, 1e-15);
}

TEST(Scores, NoEdgesGivesUniform) {
  const Edges e{{"a", "a"}, {"b", "b"}, {"c", "c"}, {"d", "d"}};
  const AlefScores s = alef_scores(build_graph(e));
  for (double v : s) EXPECT_DOUBLE_EQ(v, 0.25);
}

TEST(Scores, InvariantUnderRelabelling) {
  Rng rng(9);
  Edges e, renamed;
  for (int i = 0; i < 400; ++i) {
    const auto a = std::to_string(uniform_index(rng, 60)), b = std::to_string(uniform_index(rng, 60));
    e.emplace_back(a, b);
    renamed.emplace_back("x" + a, "x" + b);
  }
  std::reverse(renamed.begin(), renamed.end());
  const CitationGraph g1 = build_graph(e), g2 = build_graph(renamed);
  const AlefScores s1 = alef_scores(g1, {0.7, 5}), s2 = alef_scores(g2, {0.7, 5});
  double total = 0;
  for (std::size_t v = 0; v < g1.node_count(); ++v) {
    EXPECT_NEAR(s1[v], score_of(g2, s2, "x" + g1.nodes()[v]), 1e-14);
    total += s1[v];
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(Scores, CitationCountFallback) {
  const Edges e{{"a", "c"}, {"b", "c"}, {"c", "a"}};
  const CitationGraph g = build_graph(e);
  const AlefScores s = score(g, Scorer::citation_count);
  EXPECT_DOUBLE_EQ(score_of(g, s, "c"), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(score_of(g, s, "b"), 0.0);
}

TEST(Scores, RejectsBadInputs) {
  expect_code(ErrorCode::EmptyGraph, [] { alef_scores(CitationGraph{}); });
  const Edges e{{"a", "b"}};
  const CitationGraph g = build_graph(e);
  expect_code(ErrorCode::InvalidParameter, [&] { alef_scores(g, {1.0, 2}); });
  expect_code(ErrorCode::InvalidParameter, [&] { alef_scores(g, {0.5, 0}); });
}

TEST(Aggregate, JournalAndTopicMeans) {
  std::vector<PaperRecord> papers(4);
  for (int i = 0; i < 4; ++i) papers[i].paper_id = "p" + std::to_string(i);
  papers[0].journal = papers[1].journal = "J1";
  papers[2].journal = papers[3].journal = "J2";
  papers[0].topic = "t";
  papers[2].topic = "t";
  const std::map<std::string, double> scores{{"p0", 0.1}, {"p1", 0.3}, {"p2", 0.6}};
  const auto j = journal_aggregate(scores, papers);
  EXPECT_DOUBLE_EQ(j.at("J1"), 0.2);
  EXPECT_DOUBLE_EQ(j.at("J2"), 0.6);  // p3 has no score
  const auto t = topic_aggregate(scores, papers);
  ASSERT_EQ(t.size(), 1u);
  EXPECT_DOUBLE_EQ(t.at("t"), 0.35);
}
