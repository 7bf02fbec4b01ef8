#pragma once

// Article-level Eigenfactor: a damped random walk over the citation graph
// that runs for a fixed number of steps and teleports to links (the cited
// end of a uniformly chosen edge) rather than to nodes.

#include <algorithm>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "figmine/error.hpp"
#include "figmine/records.hpp"

namespace figmine::alef {

class CitationGraph {
 public:
  /// Index of `id`, inserting it as a new node if unseen.
  std::size_t add_node(const std::string& id) {
    const auto [it, inserted] = index_.try_emplace(id, ids_.size());
    if (inserted) {
      ids_.push_back(id);
      out_.emplace_back();
      in_degree_.push_back(0);
    }
    return it->second;
  }

  const std::vector<std::string>& nodes() const { return ids_; }
  std::size_t node_count() const { return ids_.size(); }
  std::size_t edge_count() const { return edges_; }
  const std::vector<std::size_t>& out_edges(std::size_t v) const { return out_[v]; }
  std::size_t in_degree(std::size_t v) const { return in_degree_[v]; }

  std::optional<std::size_t> find(const std::string& id) const {
    const auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  bool has_edge(std::size_t from, std::size_t to) const {
    const auto& o = out_[from];
    return std::binary_search(o.begin(), o.end(), to);
  }

  std::size_t dropped_self_loops = 0;
  std::size_t dropped_duplicates = 0;

 private:
  friend CitationGraph build_graph(std::span<const std::pair<std::string, std::string>>, std::span<const std::string>);

  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::string> ids_;
  std::vector<std::vector<std::size_t>> out_;  // sorted, unique
  std::vector<std::size_t> in_degree_;
  std::size_t edges_ = 0;
};

/// Builds the graph from (citing, cited) pairs. Self-loops are dropped and
/// duplicates collapsed (both counted on the graph); ids seen only in
/// `extra_nodes` become isolated nodes.
inline CitationGraph build_graph(std::span<const std::pair<std::string, std::string>> edges,
                                 std::span<const std::string> extra_nodes = {}) {
  CitationGraph g;
  for (const auto& [from, to] : edges) {
    const std::size_t a = g.add_node(from);
    const std::size_t b = g.add_node(to);
    if (a == b) {
      ++g.dropped_self_loops;
      continue;
    }
    g.out_[a].push_back(b);
  }
  for (const auto& id : extra_nodes) g.add_node(id);
  for (std::size_t v = 0; v < g.out_.size(); ++v) {
    auto& o = g.out_[v];
    std::sort(o.begin(), o.end());
    const auto before = o.size();
    o.erase(std::unique(o.begin(), o.end()), o.end());
    g.dropped_duplicates += before - o.size();
    g.edges_ += o.size();
    for (std::size_t t : o) ++g.in_degree_[t];
  }
  return g;
}

/// Parses `citing<TAB>cited` lines. Blank lines and lines starting with '#'
/// are skipped; anything else without exactly two non-empty fields is a
/// ParseError naming the line.
inline std::vector<std::pair<std::string, std::string>> parse_edge_list(std::istream& in) {
  std::vector<std::pair<std::string, std::string>> edges;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 == line.size() || line.find('\t', tab + 1) != std::string::npos)
      fail(ErrorCode::ParseError, "line " + std::to_string(lineno) + ": expected citing<TAB>cited");
    edges.emplace_back(line.substr(0, tab), line.substr(tab + 1));
  }
  return edges;
}

inline std::vector<std::pair<std::string, std::string>> parse_edge_list(const std::string& text) {
  std::istringstream in(text);
  return parse_edge_list(in);
}

struct AlefParams {
  double alpha = 0.85;
  int steps = 2;

  void validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) fail(ErrorCode::InvalidParameter, "alpha must be in (0,1)");
    if (steps < 1) fail(ErrorCode::InvalidParameter, "steps must be >= 1");
  }
};

enum class Scorer { alef, citation_count };

/// Scores aligned with graph.nodes(); sums to 1.
using AlefScores = std::vector<double>;

/// Link-teleport distribution: in-degree over edge count, or uniform when
/// the graph has no edges.
inline std::vector<double> link_teleport(const CitationGraph& g) {
  const std::size_t n = g.node_count();
  std::vector<double> p(n, 0.0);
  if (g.edge_count() == 0) {
    std::fill(p.begin(), p.end(), 1.0 / static_cast<double>(n));
    return p;
  }
  for (std::size_t v = 0; v < n; ++v) p[v] = static_cast<double>(g.in_degree(v)) / static_cast<double>(g.edge_count());
  return p;
}

/// pi_0 = link teleport; pi_t = alpha * P pi_{t-1} + (1 - alpha) * pi_0 for
/// t = 1..steps, where P moves a walker from a citing paper to one of its
/// cited papers uniformly and sends dangling mass back through pi_0.
inline AlefScores alef_scores(const CitationGraph& g, const AlefParams& params = {}) {
  params.validate();
  const std::size_t n = g.node_count();
  if (n == 0) fail(ErrorCode::EmptyGraph, "citation graph has no nodes");
  const std::vector<double> seed = link_teleport(g);
  std::vector<double> pi = seed;
  std::vector<double> next(n);
  for (int t = 0; t < params.steps; ++t) {
    double dangling = 0.0;
    for (std::size_t v = 0; v < n; ++v)
      if (g.out_edges(v).empty()) dangling += pi[v];
    for (std::size_t v = 0; v < n; ++v) next[v] = (1.0 - params.alpha) * seed[v] + params.alpha * dangling * seed[v];
    for (std::size_t u = 0; u < n; ++u) {
      const auto& o = g.out_edges(u);
      if (o.empty()) continue;
      const double share = params.alpha * pi[u] / static_cast<double>(o.size());
      for (std::size_t v : o) next[v] += share;
    }
    pi.swap(next);
  }
  double total = 0.0;
  for (double v : pi) total += v;
  for (double& v : pi) v /= total;
  return pi;
}

/// Normalized in-citation counts, the fallback scorer.
inline AlefScores citation_scores(const CitationGraph& g) {
  if (g.node_count() == 0) fail(ErrorCode::EmptyGraph, "citation graph has no nodes");
  return link_teleport(g);
}

inline AlefScores score(const CitationGraph& g, Scorer scorer, const AlefParams& params = {}) {
  return scorer == Scorer::alef ? alef_scores(g, params) : citation_scores(g);
}

inline std::map<std::string, double> as_map(const CitationGraph& g, const AlefScores& s) {
  std::map<std::string, double> out;
  for (std::size_t v = 0; v < g.node_count(); ++v) out.emplace(g.nodes()[v], s[v]);
  return out;
}

/// Mean score per group key; groups with no scored paper are absent.
template <class KeyFn>
std::map<std::string, double> group_mean(const std::map<std::string, double>& scores, std::span<const PaperRecord> papers,
                                         KeyFn&& key) {
  std::map<std::string, std::pair<double, std::size_t>> acc;
  for (const auto& p : papers) {
    const auto it = scores.find(p.paper_id);
    if (it == scores.end()) continue;
    const std::optional<std::string> k = key(p);
    if (!k) continue;
    auto& [sum, count] = acc[*k];
    sum += it->second;
    ++count;
  }
  std::map<std::string, double> out;
  for (const auto& [k, v] : acc) out.emplace(k, v.first / static_cast<double>(v.second));
  return out;
}

inline std::map<std::string, double> journal_aggregate(const std::map<std::string, double>& scores,
                                                       std::span<const PaperRecord> papers) {
  return group_mean(scores, papers, [](const PaperRecord& p) { return std::optional<std::string>(p.journal); });
}

inline std::map<std::string, double> topic_aggregate(const std::map<std::string, double>& scores,
                                                     std::span<const PaperRecord> papers) {
  return group_mean(scores, papers, [](const PaperRecord& p) { return p.topic; });
}

}  // namespace figmine::alef
