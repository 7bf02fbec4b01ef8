#pragma once

#include <array>
#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "figmine/error.hpp"
#include "figmine/image.hpp"

namespace figmine {

/// The five figure types, then the two pipeline states.
enum class FigureLabel { equation = 0, diagram = 1, photo = 2, plot = 3, table = 4, multichart = 5, unclassified = 6 };

inline constexpr int kFigureClassCount = 5;
inline constexpr std::array<FigureLabel, kFigureClassCount> kFigureClasses{
    FigureLabel::equation, FigureLabel::diagram, FigureLabel::photo, FigureLabel::plot, FigureLabel::table};

constexpr std::string_view to_string(FigureLabel l) {
  switch (l) {
    case FigureLabel::equation: return "equation";
    case FigureLabel::diagram: return "diagram";
    case FigureLabel::photo: return "photo";
    case FigureLabel::plot: return "plot";
    case FigureLabel::table: return "table";
    case FigureLabel::multichart: return "multichart";
    case FigureLabel::unclassified: return "unclassified";
  }
  return "unclassified";
}

inline std::optional<FigureLabel> parse_label(std::string_view s) {
  for (int i = 0; i <= static_cast<int>(FigureLabel::unclassified); ++i)
    if (to_string(static_cast<FigureLabel>(i)) == s) return static_cast<FigureLabel>(i);
  return std::nullopt;
}

constexpr bool is_singleton_class(FigureLabel l) { return static_cast<int>(l) < kFigureClassCount; }

inline int current_year() {
  const auto now = std::chrono::system_clock::now();
  const std::chrono::year_month_day ymd{std::chrono::floor<std::chrono::days>(now)};
  return static_cast<int>(ymd.year());
}

struct PaperRecord {
  std::string paper_id;
  std::string title;
  std::string abstract_text;
  std::string journal;
  std::optional<std::string> topic;
  std::vector<std::string> authors;
  int year = 0;
  int page_count = 1;
  std::optional<double> alef_score;
  std::string source_uri;

  friend bool operator==(const PaperRecord&, const PaperRecord&) = default;
};

struct GateAnnotation {
  std::string label;  // "multichart" | "singleton"
  double probability = 0.0;

  friend bool operator==(const GateAnnotation&, const GateAnnotation&) = default;
};

struct FigureRecord {
  std::string figure_id;
  std::string paper_id;
  std::string image_key;  // content address in the image store
  std::string caption;
  int width = 0;
  int height = 0;
  FigureLabel label = FigureLabel::unclassified;
  std::vector<double> class_probs;  // empty or one entry per figure class
  std::optional<std::string> parent_figure_id;
  std::optional<Rect> bbox_in_parent;
  std::optional<GateAnnotation> gate;
  std::string source_file;

  friend bool operator==(const FigureRecord&, const FigureRecord&) = default;
};

/// Throws InvalidParameter on a broken invariant.
inline void validate(const PaperRecord& p) {
  if (p.paper_id.empty()) fail(ErrorCode::InvalidParameter, "paper_id is empty");
  if (p.page_count < 1) fail(ErrorCode::InvalidParameter, p.paper_id + ": page_count must be >= 1");
  if (p.year < 1900 || p.year > current_year()) fail(ErrorCode::InvalidParameter, p.paper_id + ": year out of range");
  if (p.alef_score && !(*p.alef_score >= 0.0)) fail(ErrorCode::InvalidParameter, p.paper_id + ": negative alef score");
}

inline void validate(const FigureRecord& f, std::optional<Rect> parent_bounds = std::nullopt) {
  if (f.figure_id.empty()) fail(ErrorCode::InvalidParameter, "figure_id is empty");
  if (is_singleton_class(f.label)) {
    if (f.class_probs.size() != kFigureClassCount)
      fail(ErrorCode::InvalidParameter, f.figure_id + ": class_probs must have 5 entries");
    double s = 0.0;
    for (double v : f.class_probs) {
      if (!(v >= 0.0)) fail(ErrorCode::InvalidParameter, f.figure_id + ": negative class probability");
      s += v;
    }
    if (std::fabs(s - 1.0) > 1e-9) fail(ErrorCode::InvalidParameter, f.figure_id + ": class_probs do not sum to 1");
  }
  if (f.parent_figure_id.has_value() != f.bbox_in_parent.has_value())
    fail(ErrorCode::InvalidParameter, f.figure_id + ": parent id and bbox must be set together");
  if (f.bbox_in_parent && parent_bounds && !parent_bounds->contains(*f.bbox_in_parent))
    fail(ErrorCode::InvalidParameter, f.figure_id + ": bbox outside parent image");
}

// ---------------------------------------------------------------------------
// JSON

inline void to_json(nlohmann::json& j, const Rect& r) { j = {{"x", r.x}, {"y", r.y}, {"w", r.w}, {"h", r.h}}; }
inline void from_json(const nlohmann::json& j, Rect& r) {
  r = Rect{j.at("x").get<int>(), j.at("y").get<int>(), j.at("w").get<int>(), j.at("h").get<int>()};
}

inline void to_json(nlohmann::json& j, const PaperRecord& p) {
  j = {{"paper_id", p.paper_id}, {"title", p.title},       {"abstract", p.abstract_text}, {"journal", p.journal},
       {"year", p.year},         {"page_count", p.page_count}, {"source_uri", p.source_uri}};
  if (p.topic) j["topic"] = *p.topic;
  if (!p.authors.empty()) j["authors"] = p.authors;
  if (p.alef_score) j["alef_score"] = *p.alef_score;
}

inline void from_json(const nlohmann::json& j, PaperRecord& p) {
  p.paper_id = j.at("paper_id").get<std::string>();
  p.title = j.value("title", std::string());
  p.abstract_text = j.value("abstract", std::string());
  p.journal = j.at("journal").get<std::string>();
  p.year = j.at("year").get<int>();
  p.page_count = j.at("page_count").get<int>();
  p.source_uri = j.value("source_uri", std::string());
  p.topic = j.contains("topic") && !j.at("topic").is_null() ? std::optional(j.at("topic").get<std::string>()) : std::nullopt;
  p.authors = j.value("authors", std::vector<std::string>{});
  p.alef_score = j.contains("alef_score") && !j.at("alef_score").is_null() ? std::optional(j.at("alef_score").get<double>())
                                                                             : std::nullopt;
}

inline void to_json(nlohmann::json& j, const FigureRecord& f) {
  j = {{"figure_id", f.figure_id}, {"paper_id", f.paper_id}, {"image_key", f.image_key},
       {"caption", f.caption},     {"width", f.width},       {"height", f.height},
       {"label", to_string(f.label)}, {"class_probs", f.class_probs}};
  if (f.parent_figure_id) j["parent_figure_id"] = *f.parent_figure_id;
  if (f.bbox_in_parent) j["bbox_in_parent"] = *f.bbox_in_parent;
  if (f.gate) j["gate"] = {{"label", f.gate->label}, {"probability", f.gate->probability}};
  if (!f.source_file.empty()) j["source_file"] = f.source_file;
}

inline void from_json(const nlohmann::json& j, FigureRecord& f) {
  f.figure_id = j.at("figure_id").get<std::string>();
  f.paper_id = j.at("paper_id").get<std::string>();
  f.image_key = j.value("image_key", std::string());
  f.caption = j.value("caption", std::string());
  f.width = j.value("width", 0);
  f.height = j.value("height", 0);
  const auto label = parse_label(j.value("label", std::string("unclassified")));
  if (!label) fail(ErrorCode::ParseError, "unknown label for figure " + f.figure_id);
  f.label = *label;
  f.class_probs = j.value("class_probs", std::vector<double>{});
  f.parent_figure_id = j.contains("parent_figure_id") ? std::optional(j.at("parent_figure_id").get<std::string>()) : std::nullopt;
  f.bbox_in_parent = j.contains("bbox_in_parent") ? std::optional(j.at("bbox_in_parent").get<Rect>()) : std::nullopt;
  if (j.contains("gate"))
    f.gate = GateAnnotation{j.at("gate").at("label").get<std::string>(), j.at("gate").at("probability").get<double>()};
  else
    f.gate.reset();
  f.source_file = j.value("source_file", std::string());
}

}  // namespace figmine
