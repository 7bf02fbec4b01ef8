#pragma once

// Corpus ingestion: image filtering and normalization, exact-duplicate
// removal, and the on-disk manifest (JSON lines plus a content-addressed
// PNG store) that every later stage reads.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <opencv2/imgproc.hpp>

#include "figmine/codec.hpp"
#include "figmine/error.hpp"
#include "figmine/hash.hpp"
#include "figmine/records.hpp"
#include "figmine/util.hpp"

namespace figmine::corpus {

namespace fs = std::filesystem;

inline constexpr int kMaxLongEdge = 1280;

struct PrintRule {
  double aspect_min = 0.70;  // width / height
  double aspect_max = 0.80;
  double dark_threshold = 0.5;  // luminance below this is ink
  double row_ratio_min = 0.05;
  double row_ratio_max = 0.5;
  double coverage_threshold = 0.6;
};

/// Fraction of scanlines whose dark-pixel ratio lies in the text band.
inline double text_row_coverage(const GrayImage& img, const PrintRule& rule = {}) {
  if (img.height == 0 || img.width == 0) return 0.0;
  int rows = 0;
  for (int r = 0; r < img.height; ++r) {
    int dark = 0;
    for (int c = 0; c < img.width; ++c) dark += img.at(r, c) < rule.dark_threshold ? 1 : 0;
    const double ratio = static_cast<double>(dark) / img.width;
    if (ratio >= rule.row_ratio_min && ratio <= rule.row_ratio_max) ++rows;
  }
  return static_cast<double>(rows) / img.height;
}

inline bool looks_like_page_print(const GrayImage& img, const PrintRule& rule = {}) {
  if (img.height == 0) return false;
  const double aspect = static_cast<double>(img.width) / img.height;
  if (aspect < rule.aspect_min || aspect > rule.aspect_max) return false;
  return text_row_coverage(img, rule) > rule.coverage_threshold;
}

/// Target size for the longer-edge cap; never enlarges.
inline std::pair<int, int> capped_size(int w, int h, int max_edge = kMaxLongEdge) {
  const int longer = std::max(w, h);
  if (longer <= max_edge) return {w, h};
  const double s = static_cast<double>(max_edge) / longer;
  auto scale = [&](int v) { return v == longer ? max_edge : std::max(1, static_cast<int>(std::lround(v * s))); };
  return {scale(w), scale(h)};
}

enum class DropReason { gif, full_paper_print, duplicate, decode_error, unsupported, unreferenced };

inline std::string to_string(DropReason r) {
  switch (r) {
    case DropReason::gif: return "gif";
    case DropReason::full_paper_print: return "full_paper_print";
    case DropReason::duplicate: return "duplicate";
    case DropReason::decode_error: return "decode_error";
    case DropReason::unsupported: return "unsupported";
    case DropReason::unreferenced: return "unreferenced";
  }
  return "unknown";
}

struct FilterDecision {
  std::optional<DropReason> drop;
  cv::Mat image;  // normalized raster when kept
  ImageFormat format = ImageFormat::unknown;
  bool resized = false;

  bool kept() const { return !drop.has_value(); }
};

/// GIF is dropped without decoding. Other formats are decoded, checked
/// against the page-print rule and capped at the maximum long edge.
inline FilterDecision filter_image(std::span<const std::uint8_t> bytes, const PrintRule& rule = {}) {
  FilterDecision d;
  d.format = sniff_format(bytes);
  if (d.format == ImageFormat::gif) {
    d.drop = DropReason::gif;
    return d;
  }
  cv::Mat img = decode_raster(bytes);
  if (looks_like_page_print(to_gray(img), rule)) {
    d.drop = DropReason::full_paper_print;
    return d;
  }
  const auto [w, h] = capped_size(img.cols, img.rows);
  if (w != img.cols || h != img.rows) {
    cv::Mat out;
    cv::resize(img, out, cv::Size(w, h), 0, 0, cv::INTER_AREA);
    img = out;
    d.resized = true;
  }
  d.image = img;
  return d;
}

// ---------------------------------------------------------------------------
// Manifest

struct Manifest {
  std::vector<PaperRecord> papers;
  std::vector<FigureRecord> figures;

  const PaperRecord* find_paper(const std::string& id) const {
    for (const auto& p : papers)
      if (p.paper_id == id) return &p;
    return nullptr;
  }
  const FigureRecord* find_figure(const std::string& id) const {
    for (const auto& f : figures)
      if (f.figure_id == id) return &f;
    return nullptr;
  }
  friend bool operator==(const Manifest&, const Manifest&) = default;
};

inline fs::path papers_path(const fs::path& dir) { return dir / "papers.jsonl"; }
inline fs::path figures_path(const fs::path& dir) { return dir / "figures.jsonl"; }
inline fs::path image_store(const fs::path& dir) { return dir / "images"; }
inline fs::path image_path(const fs::path& dir, const std::string& key) { return image_store(dir) / (key + ".png"); }

template <class T>
std::string to_jsonl(const std::vector<T>& rows) {
  std::string out;
  for (const auto& r : rows) {
    out += nlohmann::json(r).dump();
    out += '\n';
  }
  return out;
}

template <class T>
std::vector<T> parse_jsonl(const std::string& text, const std::string& what) {
  std::vector<T> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(nlohmann::json::parse(line).get<T>());
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::ParseError, what + " line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

/// Rows are written sorted by id so identical content gives identical files.
inline void write_manifest(const fs::path& dir, Manifest m) {
  fs::create_directories(image_store(dir));
  std::sort(m.papers.begin(), m.papers.end(), [](const auto& a, const auto& b) { return a.paper_id < b.paper_id; });
  std::sort(m.figures.begin(), m.figures.end(), [](const auto& a, const auto& b) { return a.figure_id < b.figure_id; });
  write_file_text(papers_path(dir).string(), to_jsonl(m.papers));
  write_file_text(figures_path(dir).string(), to_jsonl(m.figures));
}

inline Manifest read_manifest(const fs::path& dir) {
  if (!fs::exists(papers_path(dir)) || !fs::exists(figures_path(dir)))
    fail(ErrorCode::IoError, "no manifest in " + dir.string());
  Manifest m;
  m.papers = parse_jsonl<PaperRecord>(read_file_text(papers_path(dir).string()), "papers.jsonl");
  m.figures = parse_jsonl<FigureRecord>(read_file_text(figures_path(dir).string()), "figures.jsonl");
  return m;
}

/// Stores PNG bytes under their content hash and returns the key.
inline std::string store_image(const fs::path& dir, std::span<const std::uint8_t> png) {
  const std::string key = sha256_hex(png);
  const fs::path p = image_path(dir, key);
  if (!fs::exists(p)) {
    fs::create_directories(p.parent_path());
    write_file_bytes(p.string(), png);
  }
  return key;
}

inline std::vector<std::uint8_t> load_image_bytes(const fs::path& dir, const std::string& key) {
  const fs::path p = image_path(dir, key);
  if (!fs::exists(p)) fail(ErrorCode::NotFound, "image " + key + " missing from store");
  return read_file_bytes(p.string());
}

inline GrayImage load_gray(const fs::path& dir, const std::string& key) { return decode_gray(load_image_bytes(dir, key)); }

// ---------------------------------------------------------------------------
// Ingest

struct IngestReport {
  long seen = 0;
  long retained = 0;
  long resized = 0;
  std::map<std::string, long> dropped;  // reason -> count
  long records_skipped = 0;
  long missing_files = 0;
  std::vector<std::string> warnings;
  std::vector<std::pair<std::string, std::string>> drop_log;  // file, reason

  long dropped_total() const {
    long n = 0;
    for (const auto& [k, v] : dropped) n += v;
    return n;
  }
  long dropped_for(DropReason r) const {
    const auto it = dropped.find(to_string(r));
    return it == dropped.end() ? 0 : it->second;
  }
  bool balanced() const { return seen == dropped_total() + retained; }
};

inline nlohmann::json to_json(const IngestReport& r) {
  nlohmann::json log = nlohmann::json::array();
  for (const auto& [file, reason] : r.drop_log) log.push_back({{"file", file}, {"reason", reason}});
  return {{"seen", r.seen},
          {"retained", r.retained},
          {"resized", r.resized},
          {"dropped", r.dropped},
          {"records_skipped", r.records_skipped},
          {"missing_files", r.missing_files},
          {"warnings", r.warnings},
          {"drop_log", log}};
}

/// One metadata line: paper fields plus the figures it owns.
struct MetadataEntry {
  PaperRecord paper;
  std::vector<std::pair<std::string, std::string>> figures;  // file name, caption
};

/// Parses the metadata JSONL. Lines with missing or invalid fields are
/// skipped with a warning rather than aborting the whole run.
inline std::vector<MetadataEntry> parse_metadata(const std::string& text, IngestReport& report) {
  std::vector<MetadataEntry> out;
  std::set<std::string> ids;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "metadata line " + std::to_string(lineno) + ": ";
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::ParseError, where + e.what());
    }
    try {
      MetadataEntry e;
      e.paper = j.get<PaperRecord>();
      validate(e.paper);
      if (!ids.insert(e.paper.paper_id).second) fail(ErrorCode::InvalidParameter, "duplicate paper_id " + e.paper.paper_id);
      for (const auto& f : j.value("figures", nlohmann::json::array())) {
        if (f.is_string())
          e.figures.emplace_back(f.get<std::string>(), "");
        else
          e.figures.emplace_back(f.at("file").get<std::string>(), f.value("caption", std::string()));
      }
      out.push_back(std::move(e));
    } catch (const std::exception& e) {
      ++report.records_skipped;
      report.warnings.push_back(where + e.what());
    }
  }
  return out;
}

/// Stable id for the figure that `file` contributes to `paper_id`.
inline std::string make_figure_id(const std::string& paper_id, const std::string& file) {
  const std::string key = paper_id + "/" + file;
  return "fig-" + sha256_hex({reinterpret_cast<const std::uint8_t*>(key.data()), key.size()}).substr(0, 20);
}

struct IngestOptions {
  PrintRule print_rule;
  std::size_t batch = 64;  // files decoded concurrently
};

/// Filters every file in `image_dir` (sorted, non-recursive) and writes
/// the manifest to `out_dir`. Decoding runs in parallel; the bookkeeping
/// and all writes happen on the calling thread in file order, so a rerun on
/// the same input reproduces the manifest exactly.
inline IngestReport ingest(const fs::path& image_dir, const fs::path& metadata_file, const fs::path& out_dir,
                           const IngestOptions& opt = {}) {
  IngestReport report;
  if (!fs::is_directory(image_dir)) fail(ErrorCode::IoError, "not a directory: " + image_dir.string());
  const auto entries = parse_metadata(read_file_text(metadata_file.string()), report);

  struct Owner {
    std::string paper_id;
    std::string caption;
  };
  std::map<std::string, Owner> owner;
  for (const auto& e : entries)
    for (const auto& [file, caption] : e.figures) {
      if (owner.contains(file)) {
        report.warnings.push_back(file + " claimed by several papers; kept with " + owner[file].paper_id);
        continue;
      }
      owner[file] = {e.paper.paper_id, caption};
    }

  std::vector<std::string> files;
  for (const auto& de : fs::directory_iterator(image_dir))
    if (de.is_regular_file()) files.push_back(de.path().filename().string());
  std::sort(files.begin(), files.end());
  const std::set<std::string> present(files.begin(), files.end());
  for (const auto& [file, o] : owner)
    if (!present.contains(file)) {
      ++report.missing_files;
      report.warnings.push_back("referenced file missing: " + file);
    }

  fs::create_directories(image_store(out_dir));
  Manifest m;
  for (const auto& e : entries) m.papers.push_back(e.paper);

  auto drop = [&](const std::string& file, DropReason r) {
    ++report.dropped[to_string(r)];
    report.drop_log.emplace_back(file, to_string(r));
  };

  struct Work {
    std::string raw_hash;
    std::optional<FilterDecision> decision;
    std::optional<DropReason> error;
  };
  std::set<std::string> hashes;
  for (std::size_t begin = 0; begin < files.size(); begin += opt.batch) {
    const std::size_t end = std::min(files.size(), begin + opt.batch);
    std::vector<Work> work(end - begin);
    parallel_for(work.size(), [&](std::size_t i) {
      const std::string& file = files[begin + i];
      const auto bytes = read_file_bytes((image_dir / file).string());
      work[i].raw_hash = sha256_hex(bytes);
      if (!owner.contains(file)) return;
      try {
        work[i].decision = filter_image(bytes, opt.print_rule);
      } catch (const Error& e) {
        work[i].error = e.code() == ErrorCode::UnsupportedFormat ? DropReason::unsupported : DropReason::decode_error;
      }
    });
    for (std::size_t i = 0; i < work.size(); ++i) {
      const std::string& file = files[begin + i];
      ++report.seen;
      if (!owner.contains(file)) {
        drop(file, DropReason::unreferenced);
        continue;
      }
      if (!hashes.insert(work[i].raw_hash).second) {
        drop(file, DropReason::duplicate);
        continue;
      }
      if (work[i].error) {
        drop(file, *work[i].error);
        continue;
      }
      const FilterDecision& d = *work[i].decision;
      if (!d.kept()) {
        drop(file, *d.drop);
        continue;
      }
      FigureRecord f;
      f.paper_id = owner[file].paper_id;
      f.figure_id = make_figure_id(f.paper_id, file);
      f.caption = owner[file].caption;
      f.image_key = store_image(out_dir, encode_png(d.image));
      f.width = d.image.cols;
      f.height = d.image.rows;
      f.source_file = file;
      m.figures.push_back(std::move(f));
      ++report.retained;
      report.resized += d.resized ? 1 : 0;
    }
  }
  write_manifest(out_dir, std::move(m));
  write_file_text((out_dir / "ingest_report.json").string(), to_json(report).dump(2) + "\n");
  return report;
}

}  // namespace figmine::corpus
