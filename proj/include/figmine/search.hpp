#pragma once

// Figure search backend: an inverted index over paper titles, abstracts
// and figure captions, ALEF-ordered queries with type filters, figure
// detail lookups, and the append-only label verification log.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "figmine/corpus.hpp"
#include "figmine/error.hpp"
#include "figmine/records.hpp"
#include "figmine/util.hpp"

namespace figmine::search {

// ---------------------------------------------------------------------------
// Tokenizer

namespace detail {

/// ASCII spelling of a Latin-1 Supplement or Latin Extended-A letter, or
/// empty when it has none.
inline std::string_view fold_codepoint(char32_t cp) {
  static constexpr std::string_view table[] = {
      "a", "a", "a", "a", "a", "a", "ae", "c", "e", "e", "e", "e", "i", "i", "i", "i",  // C0-CF
      "d", "n", "o", "o", "o", "o", "o", "", "o", "u", "u", "u", "u", "y", "th", "ss",  // D0-DF
      "a", "a", "a", "a", "a", "a", "ae", "c", "e", "e", "e", "e", "i", "i", "i", "i",  // E0-EF
      "d", "n", "o", "o", "o", "o", "o", "", "o", "u", "u", "u", "u", "y", "th", "y",  // F0-FF
      "a", "a", "a", "a", "a", "a", "c", "c", "c", "c", "c", "c", "c", "c", "d", "d",  // 100-10F
      "d", "d", "e", "e", "e", "e", "e", "e", "e", "e", "e", "e", "g", "g", "g", "g",  // 110-11F
      "g", "g", "g", "g", "h", "h", "h", "h", "i", "i", "i", "i", "i", "i", "i", "i",  // 120-12F
      "i", "i", "ij", "ij", "j", "j", "k", "k", "k", "l", "l", "l", "l", "l", "l", "l",  // 130-13F
      "l", "l", "l", "n", "n", "n", "n", "n", "n", "n", "n", "n", "o", "o", "o", "o",  // 140-14F
      "o", "o", "oe", "oe", "r", "r", "r", "r", "r", "r", "s", "s", "s", "s", "s", "s",  // 150-15F
      "s", "s", "t", "t", "t", "t", "t", "t", "u", "u", "u", "u", "u", "u", "u", "u",  // 160-16F
      "u", "u", "u", "u", "w", "w", "y", "y", "y", "z", "z", "z", "z", "z", "z", "s",  // 170-17F
  };
  if (cp >= 0xC0 && cp <= 0x17F) return table[cp - 0xC0];
  return {};
}

/// Decodes one UTF-8 sequence at s[i]; malformed bytes yield U+FFFD.
inline char32_t next_codepoint(std::string_view s, std::size_t& i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  int len = b0 < 0x80 ? 1 : (b0 >> 5) == 0x6 ? 2 : (b0 >> 4) == 0xE ? 3 : (b0 >> 3) == 0x1E ? 4 : 0;
  if (len == 0 || i + static_cast<std::size_t>(len) > s.size()) {
    ++i;
    return 0xFFFD;
  }
  char32_t cp = len == 1 ? b0 : b0 & (0x7F >> len);
  for (int k = 1; k < len; ++k) {
    const auto b = static_cast<unsigned char>(s[i + static_cast<std::size_t>(k)]);
    if ((b & 0xC0) != 0x80) {
      ++i;
      return 0xFFFD;
    }
    cp = (cp << 6) | (b & 0x3F);
  }
  i += static_cast<std::size_t>(len);
  return cp;
}

}  // namespace detail

/// Lowercased, ASCII-folded alphanumeric runs. Characters with no ASCII
/// spelling separate tokens.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (std::size_t i = 0; i < text.size();) {
    const char32_t cp = detail::next_codepoint(text, i);
    if (cp < 0x80) {
      const char c = static_cast<char>(cp);
      if (std::isalnum(static_cast<unsigned char>(c)))
        cur += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      else
        flush();
      continue;
    }
    const auto folded = detail::fold_codepoint(cp);
    if (folded.empty())
      flush();
    else
      cur += folded;
  }
  flush();
  return out;
}

// ---------------------------------------------------------------------------
// Index

enum class Field : std::uint8_t { title = 0, abstract_text = 1, caption = 2 };

struct Posting {
  std::uint32_t doc = 0;  // index into SearchIndex::docs
  Field field = Field::caption;
  std::uint32_t tf = 0;

  friend bool operator==(const Posting&, const Posting&) = default;
};

struct IndexedFigure {
  std::string figure_id;
  std::string paper_id;
  FigureLabel label = FigureLabel::unclassified;
  double alef = 0.0;

  friend bool operator==(const IndexedFigure&, const IndexedFigure&) = default;
};

struct SearchIndex {
  std::vector<IndexedFigure> docs;  // sorted by figure_id
  std::map<std::string, std::vector<Posting>> postings;

  std::size_t posting_count() const {
    std::size_t n = 0;
    for (const auto& [t, p] : postings) n += p.size();
    return n;
  }
  friend bool operator==(const SearchIndex&, const SearchIndex&) = default;
};

/// ALEF per paper; papers without a score rank as 0.
using ScoreTable = std::map<std::string, double>;

inline ScoreTable scores_from_manifest(const corpus::Manifest& m) {
  ScoreTable s;
  for (const auto& p : m.papers)
    if (p.alef_score) s[p.paper_id] = *p.alef_score;
  return s;
}

/// Reads `{paper_id, alef}` JSON lines.
inline ScoreTable parse_scores(const std::string& jsonl) {
  ScoreTable s;
  std::istringstream in(jsonl);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      s[j.at("paper_id").get<std::string>()] = j.at("alef").get<double>();
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::ParseError, "scores line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return s;
}

/// Every figure is a document carrying its own caption plus its paper's
/// title and abstract. One posting per (token, figure, field).
inline SearchIndex build_index(const corpus::Manifest& m, const ScoreTable& scores) {
  std::map<std::string, const PaperRecord*> papers;
  for (const auto& p : m.papers) papers[p.paper_id] = &p;

  std::vector<const FigureRecord*> figs;
  for (const auto& f : m.figures) figs.push_back(&f);
  std::sort(figs.begin(), figs.end(), [](auto* a, auto* b) { return a->figure_id < b->figure_id; });

  SearchIndex idx;
  for (std::size_t d = 0; d < figs.size(); ++d) {
    const FigureRecord& f = *figs[d];
    if (d > 0 && figs[d - 1]->figure_id == f.figure_id) fail(ErrorCode::InvalidParameter, "duplicate figure id " + f.figure_id);
    const auto sc = scores.find(f.paper_id);
    idx.docs.push_back({f.figure_id, f.paper_id, f.label, sc == scores.end() ? 0.0 : sc->second});
    const PaperRecord* p = papers.contains(f.paper_id) ? papers[f.paper_id] : nullptr;
    const std::pair<Field, std::string_view> fields[] = {{Field::title, p ? std::string_view(p->title) : ""},
                                                         {Field::abstract_text, p ? std::string_view(p->abstract_text) : ""},
                                                         {Field::caption, f.caption}};
    for (const auto& [field, text] : fields) {
      std::map<std::string, std::uint32_t> tf;
      for (auto& t : tokenize(text)) ++tf[t];
      for (const auto& [t, n] : tf) idx.postings[t].push_back({static_cast<std::uint32_t>(d), field, n});
    }
  }
  return idx;
}

inline constexpr std::string_view kIndexMagic = "FIGMIDX\x01";

inline std::vector<std::uint8_t> serialize(const SearchIndex& idx) {
  BinaryWriter w;
  w.magic(kIndexMagic);
  w.put<std::uint32_t>(1);
  w.put<std::uint64_t>(idx.docs.size());
  for (const auto& d : idx.docs) {
    w.put_string(d.figure_id);
    w.put_string(d.paper_id);
    w.put<std::int32_t>(static_cast<std::int32_t>(d.label));
    w.put<double>(d.alef);
  }
  w.put<std::uint64_t>(idx.postings.size());
  for (const auto& [token, list] : idx.postings) {
    w.put_string(token);
    w.put<std::uint64_t>(list.size());
    for (const auto& p : list) {
      w.put<std::uint32_t>(p.doc);
      w.put<std::uint8_t>(static_cast<std::uint8_t>(p.field));
      w.put<std::uint32_t>(p.tf);
    }
  }
  return w.bytes();
}

inline SearchIndex deserialize_index(std::span<const std::uint8_t> bytes) {
  BinaryReader r(bytes);
  r.expect_magic(kIndexMagic);
  if (r.get<std::uint32_t>() != 1) fail(ErrorCode::ParseError, "unsupported index version");
  SearchIndex idx;
  const auto nd = r.get<std::uint64_t>();
  for (std::uint64_t i = 0; i < nd; ++i) {
    IndexedFigure d;
    d.figure_id = r.get_string();
    d.paper_id = r.get_string();
    d.label = static_cast<FigureLabel>(r.get<std::int32_t>());
    d.alef = r.get<double>();
    idx.docs.push_back(std::move(d));
  }
  const auto nt = r.get<std::uint64_t>();
  for (std::uint64_t i = 0; i < nt; ++i) {
    std::string token = r.get_string();
    const auto np = r.get<std::uint64_t>();
    auto& list = idx.postings[token];
    for (std::uint64_t k = 0; k < np; ++k) {
      Posting p;
      p.doc = r.get<std::uint32_t>();
      p.field = static_cast<Field>(r.get<std::uint8_t>());
      p.tf = r.get<std::uint32_t>();
      if (p.doc >= idx.docs.size()) fail(ErrorCode::ParseError, "posting refers to unknown document");
      list.push_back(p);
    }
  }
  if (!r.at_end()) fail(ErrorCode::ParseError, "trailing bytes after index");
  return idx;
}

// ---------------------------------------------------------------------------
// Query

enum class MatchMode { all_terms, any_term };
enum class RankMode { alef, blended };  // blended mixes term frequency into the order

struct QueryOptions {
  std::set<FigureLabel> types;  // empty: no filter
  int page = 1;                 // 1-based
  int page_size = 20;
  MatchMode match = MatchMode::all_terms;
  RankMode rank = RankMode::alef;
};

inline constexpr int kMaxPageSize = 200;

struct Hit {
  std::uint32_t doc = 0;
  double score = 0.0;
};

/// All matching documents in result order, before pagination.
inline std::vector<Hit> match(const SearchIndex& idx, std::string_view q, const QueryOptions& opt) {
  auto terms = tokenize(q);
  std::sort(terms.begin(), terms.end());
  terms.erase(std::unique(terms.begin(), terms.end()), terms.end());
  if (terms.empty()) fail(ErrorCode::EmptyQuery, "query has no searchable terms");

  std::map<std::uint32_t, std::pair<std::size_t, std::uint32_t>> seen;  // doc -> (terms matched, total tf)
  for (const auto& t : terms) {
    const auto it = idx.postings.find(t);
    if (it == idx.postings.end()) continue;
    std::set<std::uint32_t> docs_for_term;
    for (const auto& p : it->second) {
      seen[p.doc].second += p.tf;
      docs_for_term.insert(p.doc);
    }
    for (auto d : docs_for_term) ++seen[d].first;
  }
  std::vector<Hit> hits;
  for (const auto& [doc, st] : seen) {
    if (opt.match == MatchMode::all_terms && st.first != terms.size()) continue;
    const auto& d = idx.docs[doc];
    if (!opt.types.empty() && !opt.types.contains(d.label)) continue;
    const double score = opt.rank == RankMode::alef ? d.alef : d.alef * (1.0 + std::log1p(static_cast<double>(st.second)));
    hits.push_back({doc, score});
  }
  std::sort(hits.begin(), hits.end(), [&](const Hit& a, const Hit& b) {
    if (a.score != b.score) return a.score > b.score;
    return idx.docs[a.doc].figure_id < idx.docs[b.doc].figure_id;
  });
  return hits;
}

/// Caption window of +-6 words around the first word matching a query
/// term; the caption head when no caption word matches.
inline std::string snippet(std::string_view caption, const std::set<std::string>& terms, int radius = 6) {
  std::vector<std::string> words;
  std::istringstream in{std::string(caption)};
  for (std::string w; in >> w;) words.push_back(w);
  if (words.empty()) return {};
  std::size_t hit = 0;
  bool found = false;
  for (std::size_t i = 0; i < words.size() && !found; ++i)
    for (const auto& t : tokenize(words[i]))
      if (terms.contains(t)) {
        hit = i;
        found = true;
        break;
      }
  const std::size_t r = static_cast<std::size_t>(radius);
  const std::size_t lo = found ? (hit > r ? hit - r : 0) : 0;
  const std::size_t hi = std::min(words.size(), (found ? hit : 0) + r + 1);
  std::string out = lo > 0 ? "... " : "";
  for (std::size_t i = lo; i < hi; ++i) out += (i > lo ? " " : "") + words[i];
  if (hi < words.size()) out += " ...";
  return out;
}

struct PaperSummary {
  std::string paper_id;
  std::string title;
  std::string journal;
  int year = 0;
};

struct SearchResult {
  std::string figure_id;
  std::string snippet;
  FigureLabel label = FigureLabel::unclassified;
  double alef_score = 0.0;
  PaperSummary paper;
};

struct SearchPage {
  std::size_t total = 0;
  int page = 1;
  int page_size = 20;
  std::vector<SearchResult> results;
};

inline nlohmann::json to_json(const SearchResult& r) {
  return {{"figure_id", r.figure_id},
          {"snippet", r.snippet},
          {"label", to_string(r.label)},
          {"alef_score", r.alef_score},
          {"paper", {{"paper_id", r.paper.paper_id}, {"title", r.paper.title}, {"journal", r.paper.journal}, {"year", r.paper.year}}}};
}

inline nlohmann::json to_json(const SearchPage& p) {
  nlohmann::json rs = nlohmann::json::array();
  for (const auto& r : p.results) rs.push_back(to_json(r));
  return {{"total", p.total}, {"page", p.page}, {"size", p.page_size}, {"results", rs}};
}

// ---------------------------------------------------------------------------
// Verification log

struct VerificationEvent {
  std::string figure_id;
  FigureLabel proposed_label = FigureLabel::unclassified;
  std::int64_t timestamp = 0;  // unix seconds, assigned by the server
  std::string client_token;
};

inline nlohmann::json to_json(const VerificationEvent& e) {
  return {{"figure_id", e.figure_id}, {"proposed_label", to_string(e.proposed_label)}, {"timestamp", e.timestamp},
          {"client_token", e.client_token}};
}

/// Labels a reviewer may propose: the five classes or multichart.
inline FigureLabel parse_proposed_label(std::string_view s) {
  const auto l = parse_label(s);
  if (!l || *l == FigureLabel::unclassified) fail(ErrorCode::BadRequest, "invalid label '" + std::string(s) + "'");
  return *l;
}

inline constexpr std::int64_t kDedupWindowSeconds = 24 * 3600;

/// JSONL file opened for append only. The same (figure, client, label)
/// within 24 hours of a logged event is accepted but not written again.
class VerificationLog {
 public:
  explicit VerificationLog(std::filesystem::path path) : path_(std::move(path)) {
    if (std::filesystem::exists(path_)) {
      std::istringstream in(read_file_text(path_.string()));
      for (std::string line; std::getline(in, line);) {
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line);
        remember(j.at("figure_id").get<std::string>(), j.at("client_token").get<std::string>(),
                 j.at("proposed_label").get<std::string>(), j.at("timestamp").get<std::int64_t>());
        ++rows_;
      }
    }
  }

  /// True when a new row was written.
  bool append(const VerificationEvent& e) {
    std::lock_guard lock(mu_);
    const auto key = std::make_tuple(e.figure_id, e.client_token, std::string(to_string(e.proposed_label)));
    const auto it = last_.find(key);
    if (it != last_.end() && std::llabs(e.timestamp - it->second) < kDedupWindowSeconds) return false;
    std::ofstream out(path_, std::ios::app | std::ios::binary);
    if (!out) fail(ErrorCode::IoError, "cannot append to " + path_.string());
    out << to_json(e).dump() << '\n';
    if (!out.flush()) fail(ErrorCode::IoError, "short write to " + path_.string());
    last_[key] = e.timestamp;
    ++rows_;
    return true;
  }

  std::size_t rows() const {
    std::lock_guard lock(mu_);
    return rows_;
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  void remember(const std::string& f, const std::string& c, const std::string& l, std::int64_t ts) {
    auto& slot = last_[std::make_tuple(f, c, l)];
    slot = std::max(slot, ts);
  }

  std::filesystem::path path_;
  mutable std::mutex mu_;
  std::map<std::tuple<std::string, std::string, std::string>, std::int64_t> last_;
  std::size_t rows_ = 0;
};

inline std::int64_t unix_now() {
  return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch()).count();
}

// ---------------------------------------------------------------------------
// Service facade

/// Read-mostly state behind the HTTP API. The manifest and index are
/// swapped together under a lock; readers hold a snapshot for the whole
/// request.
class SearchService {
 public:
  struct Snapshot {
    corpus::Manifest manifest;
    SearchIndex index;
    std::map<std::string, std::size_t> figure_pos;
    std::map<std::string, std::size_t> paper_pos;
  };

  SearchService(corpus::Manifest manifest, const ScoreTable& scores, std::filesystem::path manifest_dir,
                std::filesystem::path verification_log)
      : dir_(std::move(manifest_dir)), log_(std::move(verification_log)) {
    reload(std::move(manifest), scores);
  }

  void reload(corpus::Manifest manifest, const ScoreTable& scores) {
    auto snap = std::make_shared<Snapshot>();
    snap->index = build_index(manifest, scores);
    for (std::size_t i = 0; i < manifest.figures.size(); ++i) snap->figure_pos[manifest.figures[i].figure_id] = i;
    for (std::size_t i = 0; i < manifest.papers.size(); ++i) snap->paper_pos[manifest.papers[i].paper_id] = i;
    snap->manifest = std::move(manifest);
    std::lock_guard lock(mu_);
    snap_ = std::move(snap);
  }

  std::shared_ptr<const Snapshot> snapshot() const {
    std::lock_guard lock(mu_);
    return snap_;
  }

  SearchPage query(std::string_view q, const QueryOptions& opt) const {
    if (opt.page < 1) fail(ErrorCode::BadRequest, "page must be >= 1");
    if (opt.page_size < 1 || opt.page_size > kMaxPageSize)
      fail(ErrorCode::BadRequest, "size must be in [1, " + std::to_string(kMaxPageSize) + "]");
    const auto s = snapshot();
    const auto hits = match(s->index, q, opt);
    auto terms_v = tokenize(q);
    const std::set<std::string> terms(terms_v.begin(), terms_v.end());
    SearchPage page;
    page.total = hits.size();
    page.page = opt.page;
    page.page_size = opt.page_size;
    const std::size_t begin = static_cast<std::size_t>(opt.page - 1) * static_cast<std::size_t>(opt.page_size);
    for (std::size_t i = begin; i < hits.size() && i < begin + static_cast<std::size_t>(opt.page_size); ++i) {
      const auto& d = s->index.docs[hits[i].doc];
      const FigureRecord& f = s->manifest.figures[s->figure_pos.at(d.figure_id)];
      SearchResult r{d.figure_id, snippet(f.caption, terms), d.label, d.alef, {d.paper_id, "", "", 0}};
      if (const auto it = s->paper_pos.find(d.paper_id); it != s->paper_pos.end()) {
        const PaperRecord& p = s->manifest.papers[it->second];
        r.paper = {p.paper_id, p.title, p.journal, p.year};
      }
      page.results.push_back(std::move(r));
    }
    return page;
  }

  /// Paper metadata, the figure's own fields, provenance (parent and
  /// children) and the other figures of the same paper at the same level.
  nlohmann::json figure_detail(const std::string& id) const {
    const auto s = snapshot();
    const auto it = s->figure_pos.find(id);
    if (it == s->figure_pos.end()) fail(ErrorCode::NotFound, "no figure " + id);
    const FigureRecord& f = s->manifest.figures[it->second];
    nlohmann::json j = f;
    j.erase("source_file");
    const auto pit = s->paper_pos.find(f.paper_id);
    j["paper"] = pit == s->paper_pos.end() ? nlohmann::json(nullptr) : nlohmann::json(s->manifest.papers[pit->second]);
    std::vector<std::string> siblings, children;
    for (const auto& g : s->manifest.figures) {
      if (g.figure_id == f.figure_id) continue;
      if (g.parent_figure_id == f.figure_id) children.push_back(g.figure_id);
      if (g.paper_id == f.paper_id && g.parent_figure_id == f.parent_figure_id) siblings.push_back(g.figure_id);
    }
    std::sort(siblings.begin(), siblings.end());
    std::sort(children.begin(), children.end());
    j["siblings"] = siblings;
    j["children"] = children;
    const auto sc = std::find_if(s->index.docs.begin(), s->index.docs.end(), [&](const auto& d) { return d.figure_id == id; });
    j["alef_score"] = sc == s->index.docs.end() ? 0.0 : sc->alef;
    return j;
  }

  std::vector<std::uint8_t> figure_image(const std::string& id) const {
    const auto s = snapshot();
    const auto it = s->figure_pos.find(id);
    if (it == s->figure_pos.end()) fail(ErrorCode::NotFound, "no figure " + id);
    return corpus::load_image_bytes(dir_, s->manifest.figures[it->second].image_key);
  }

  /// Validates and logs; the machine label in the manifest is untouched.
  bool submit_verification(const std::string& figure_id, std::string_view label, const std::string& client_token,
                           std::int64_t now = unix_now()) {
    const FigureLabel l = parse_proposed_label(label);
    if (!snapshot()->figure_pos.contains(figure_id)) fail(ErrorCode::NotFound, "no figure " + figure_id);
    return log_.append({figure_id, l, now, client_token});
  }

  const VerificationLog& log() const { return log_; }

 private:
  std::filesystem::path dir_;
  mutable std::mutex mu_;
  std::shared_ptr<const Snapshot> snap_;
  VerificationLog log_;
};

}  // namespace figmine::search
