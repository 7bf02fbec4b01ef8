#pragma once

// Procedural figure generators for tests, demos and the training smoke runs:
// one renderer per figure class, compound montages with ground-truth panel
// boxes, labelled fragments, and a small on-disk demo corpus.

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "figmine/codec.hpp"
#include "figmine/dismantler.hpp"
#include "figmine/image.hpp"
#include "figmine/records.hpp"
#include "figmine/util.hpp"

namespace figmine::synth {

namespace detail {

inline int uniform_int(Rng& rng, int lo, int hi) {  // inclusive
  return lo + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(hi - lo + 1)));
}
inline double uniform_real(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

/// OpenCV view over the float buffer; drawing writes straight into img.
inline cv::Mat view(GrayImage& img) { return cv::Mat(img.height, img.width, CV_32FC1, img.pixels.data()); }

inline GrayImage blank(int w, int h) { return GrayImage(w, h, 1.0f); }

inline void line(GrayImage& img, int x0, int y0, int x1, int y1, int thick = 1, float ink = 0.0f) {
  cv::line(view(img), {x0, y0}, {x1, y1}, cv::Scalar(ink), thick, cv::LINE_8);
}
inline void box(GrayImage& img, const Rect& r, int thick = 1, float ink = 0.0f) {
  cv::rectangle(view(img), cv::Rect(r.x, r.y, r.w, r.h), cv::Scalar(ink), thick, cv::LINE_8);
}

/// Word-like dark blocks along one text line of height h starting at (x, y).
inline void text_line(GrayImage& img, Rng& rng, int x, int y, int width, int h, float ink = 0.1f) {
  int cx = x;
  while (cx < x + width - 4) {
    const int word = std::min(uniform_int(rng, 6, 26), x + width - cx);
    fill_rect(img, Rect{cx, y, word, h}, ink);
    cx += word + uniform_int(rng, 3, 6);
  }
}

/// Body text as thin vertical strokes, so each row is only partly inked.
inline void glyph_line(GrayImage& img, Rng& rng, int x, int y, int width, int h, float ink) {
  int cx = x;
  while (cx < x + width - 4) {
    const int word = std::min(uniform_int(rng, 6, 26), x + width - cx);
    for (int i = 0; i < word; i += 3) fill_rect(img, Rect{cx + i, y, 1, h}, ink);
    cx += word + uniform_int(rng, 3, 6);
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Singleton classes

/// Glyph strip: wide, short, sparse strokes with an occasional fraction bar.
inline GrayImage render_equation(Rng& rng) {
  using namespace detail;
  const int h = uniform_int(rng, 36, 72);
  const int w = uniform_int(rng, 4, 8) * h;
  GrayImage img = blank(w, h);
  const int base = h / 2;
  int x = uniform_int(rng, 4, 10);
  while (x < w - 16) {
    const int gw = uniform_int(rng, 6, 12);
    const int gh = uniform_int(rng, h / 5, h / 3);
    const int kind = uniform_int(rng, 0, 5);
    const int top = base - gh / 2;
    if (kind == 0) {  // fraction: numerator, bar, denominator
      const int fw = uniform_int(rng, 3, 5) * gw;
      if (x + fw >= w - 4) break;
      line(img, x, base, x + fw, base, 1);
      for (int gx = x + 2; gx < x + fw - gw; gx += gw + 2) {
        line(img, gx, base - 4, gx + gw / 2, base - 3 - gh, 1);
        line(img, gx, base + 4 + gh, gx + gw / 2, base + 4, 1);
      }
      x += fw + uniform_int(rng, 4, 8);
      continue;
    }
    switch (kind) {
      case 1: line(img, x, top, x + gw, top + gh, 1); line(img, x, top + gh, x + gw, top, 1); break;  // x
      case 2: cv::ellipse(view(img), {x + gw / 2, base}, {gw / 2, gh / 2}, 0, 0, 360, cv::Scalar(0), 1); break;
      case 3: line(img, x + gw / 2, top, x + gw / 2, top + gh, 1); line(img, x, base, x + gw, base, 1); break;  // +
      case 4: line(img, x, base - 2, x + gw, base - 2, 1); line(img, x, base + 2, x + gw, base + 2, 1); break;  // =
      default: line(img, x, top + gh, x + gw / 2, top, 1); line(img, x + gw / 2, top, x + gw, top + gh, 1); break;
    }
    x += gw + uniform_int(rng, 3, 7);
  }
  return img;
}

/// Outlined boxes holding a text line each, wired together by arrows.
inline GrayImage render_diagram(Rng& rng) {
  using namespace detail;
  const int w = uniform_int(rng, 200, 340);
  const int h = uniform_int(rng, 180, 300);
  GrayImage img = blank(w, h);
  const int cols = uniform_int(rng, 2, 3), rows = uniform_int(rng, 2, 3);
  const int cw = w / cols, ch = h / rows;
  std::vector<Rect> boxes;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      if (uniform01(rng) < 0.2) continue;
      const int bw = uniform_int(rng, cw / 2, cw * 3 / 4), bh = uniform_int(rng, ch / 3, ch / 2);
      const Rect b{c * cw + (cw - bw) / 2, r * ch + (ch - bh) / 2, bw, bh};
      box(img, b, uniform_int(rng, 1, 2));
      text_line(img, rng, b.x + 5, b.y + b.h / 2 - 3, b.w - 10, 5, 0.3f);
      boxes.push_back(b);
    }
  if (boxes.size() < 2) {
    const Rect b{w / 4, h / 4, w / 2, h / 2};
    box(img, b, 2);
    boxes = {b, Rect{w / 8, h / 8, w / 8, h / 8}};
    box(img, boxes[1], 1);
  }
  for (std::size_t i = 0; i + 1 < boxes.size(); ++i) {
    const Rect& a = boxes[i];
    const Rect& b = boxes[i + 1];
    const cv::Point p0(a.x + a.w / 2, a.y + a.h / 2), p1(b.x + b.w / 2, b.y + b.h / 2);
    // Clip the arrow to the box borders by shortening the segment.
    const cv::Point2d d = p1 - p0;
    const double len = std::max(1.0, std::hypot(d.x, d.y));
    const double shrink = 0.5 * std::max(std::min(a.w, a.h), std::min(b.w, b.h)) / len;
    const cv::Point s(p0.x + static_cast<int>(d.x * shrink), p0.y + static_cast<int>(d.y * shrink));
    const cv::Point e(p1.x - static_cast<int>(d.x * shrink), p1.y - static_cast<int>(d.y * shrink));
    cv::arrowedLine(view(img), s, e, cv::Scalar(0), 1, cv::LINE_8, 0, 0.15);
  }
  return img;
}

/// Smoothed noise texture filling the whole frame, in mid to dark tones.
inline GrayImage render_photo(Rng& rng) {
  using namespace detail;
  const int w = uniform_int(rng, 160, 320);
  const int h = uniform_int(rng, 140, 280);
  GrayImage img = blank(w, h);
  for (auto& p : img.pixels) p = static_cast<float>(uniform01(rng));
  const double sigma = uniform_real(rng, 1.0, 4.0);
  cv::Mat v = view(img);
  cv::GaussianBlur(v, v, cv::Size(0, 0), sigma);
  double lo = 0, hi = 1;
  cv::minMaxLoc(v, &lo, &hi);
  const double top = uniform_real(rng, 0.6, 0.85), bottom = uniform_real(rng, 0.0, 0.25);
  const double scale = hi > lo ? (top - bottom) / (hi - lo) : 0.0;
  for (auto& p : img.pixels) p = static_cast<float>(bottom + (p - lo) * scale);
  return img;
}

/// Axes with ticks, plus a line series or scattered markers. The axes box
/// is closed so the plot reads as one block.
inline GrayImage render_plot(Rng& rng) {
  using namespace detail;
  const int w = uniform_int(rng, 200, 320);
  const int h = uniform_int(rng, 160, 260);
  GrayImage img = blank(w, h);
  const Rect axes{uniform_int(rng, 18, 30), 6, 0, 0};
  const Rect frame{axes.x, axes.y, w - axes.x - 6, h - axes.y - uniform_int(rng, 18, 28)};
  box(img, frame, 1);
  for (int t = 1; t < 6; ++t) {
    const int tx = frame.x + t * frame.w / 6, ty = frame.y + t * frame.h / 6;
    line(img, tx, frame.bottom() - 1, tx, frame.bottom() + 3);
    line(img, frame.x - 4, ty, frame.x, ty);
    fill_rect(img, Rect{tx - 4, frame.bottom() + 6, 8, 5}, 0.3f);
    fill_rect(img, Rect{frame.x - 16, ty - 2, 10, 5}, 0.3f);
  }
  const int series = uniform_int(rng, 1, 3);
  for (int s = 0; s < series; ++s) {
    const bool scatter = uniform01(rng) < 0.5;
    const double a = uniform_real(rng, -0.4, 0.4), b = uniform_real(rng, 0.2, 0.8), f = uniform_real(rng, 1.0, 4.0);
    cv::Point prev(-1, -1);
    for (int i = 0; i <= 24; ++i) {
      const double u = i / 24.0;
      const double yv = std::clamp(b + a * u + 0.15 * std::sin(f * 6.28 * u), 0.05, 0.95);
      const cv::Point p(frame.x + static_cast<int>(u * (frame.w - 1)), frame.bottom() - 1 - static_cast<int>(yv * (frame.h - 2)));
      if (scatter)
        cv::circle(view(img), p, 2, cv::Scalar(0.0), cv::FILLED);
      else if (prev.x >= 0)
        cv::line(view(img), prev, p, cv::Scalar(0.0), 1);
      prev = p;
    }
  }
  return img;
}

/// Ruled table: header rule, row rules and text in every cell.
inline GrayImage render_table(Rng& rng) {
  using namespace detail;
  const int cols = uniform_int(rng, 3, 6), rows = uniform_int(rng, 4, 9);
  const int cw = uniform_int(rng, 40, 64), rh = uniform_int(rng, 14, 20);
  const int w = cols * cw + 8, h = rows * rh + 8;
  GrayImage img = blank(w, h);
  const bool vertical_rules = uniform01(rng) < 0.5;
  for (int r = 0; r <= rows; ++r) {
    const int y = 4 + r * rh;
    line(img, 4, y, w - 5, y, r == 0 || r == 1 || r == rows ? 2 : 1);
  }
  if (vertical_rules)
    for (int c = 0; c <= cols; ++c) line(img, 4 + c * cw, 4, 4 + c * cw, h - 5, 1);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      text_line(img, rng, 4 + c * cw + 4, 4 + r * rh + rh / 2 - 2, cw - 10, 4, r == 0 ? 0.0f : 0.3f);
  return img;
}

inline GrayImage render(FigureLabel label, Rng& rng) {
  switch (label) {
    case FigureLabel::equation: return render_equation(rng);
    case FigureLabel::diagram: return render_diagram(rng);
    case FigureLabel::photo: return render_photo(rng);
    case FigureLabel::plot: return render_plot(rng);
    case FigureLabel::table: return render_table(rng);
    default: fail(ErrorCode::InvalidParameter, "no renderer for " + std::string(to_string(label)));
  }
}

struct LabeledImages {
  std::vector<GrayImage> images;
  std::vector<int> labels;
};

/// per_class images of each of the five classes, class-major order. Image
/// i draws from its own stream so the set is stable under resizing.
inline LabeledImages class_corpus(int per_class, std::uint64_t seed) {
  LabeledImages out;
  const std::size_t n = static_cast<std::size_t>(per_class) * kFigureClassCount;
  out.images.resize(n);
  out.labels.resize(n);
  parallel_for(n, [&](std::size_t i) {
    Rng rng(sub_seed(seed, i));
    const auto label = kFigureClasses[i / static_cast<std::size_t>(per_class)];
    out.images[i] = render(label, rng);
    out.labels[i] = static_cast<int>(label);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Montages

struct MontageOptions {
  int rows = 2;
  int cols = 2;
  int gutter_min = 8;
  int gutter_max = 24;
  double label_strip_probability = 0.3;  // detached text line under a panel
};

struct Montage {
  GrayImage image;
  std::vector<Rect> panels;        // ground truth: panel plus any label strip
  std::vector<Rect> label_strips;  // detached strips only
  std::vector<FigureLabel> panel_types;
};

/// Draws a panel of the given type scaled into the cell. Plots, tables
/// and diagrams are framed so each panel forms one connected block.
inline Rect draw_panel(GrayImage& canvas, const Rect& cell, FigureLabel type, Rng& rng) {
  GrayImage src = render(type, rng);
  GrayImage fitted = resample_area(src, cell.w, cell.h);
  if (type != FigureLabel::photo) detail::box(fitted, fitted.bounds(), 1);
  paste(canvas, fitted, cell.x, cell.y);
  return cell;
}

inline Montage make_montage(Rng& rng, const MontageOptions& opt) {
  using namespace detail;
  if (opt.rows < 1 || opt.cols < 1 || opt.rows * opt.cols < 2)
    fail(ErrorCode::InvalidParameter, "a montage needs at least two panels");
  const int gutter = uniform_int(rng, opt.gutter_min, opt.gutter_max);
  const int margin = uniform_int(rng, 0, 12);
  const int pw = uniform_int(rng, 90, 180), ph = uniform_int(rng, 80, 150);
  const bool strips = uniform01(rng) < opt.label_strip_probability;
  const int strip_h = strips ? uniform_int(rng, 6, 10) : 0;
  const int strip_gap = strips ? uniform_int(rng, 3, gutter) : 0;
  const int cell_h = ph + (strips ? strip_gap + strip_h : 0);
  const int w = 2 * margin + opt.cols * pw + (opt.cols - 1) * gutter;
  const int h = 2 * margin + opt.rows * cell_h + (opt.rows - 1) * gutter;

  Montage m;
  m.image = blank(w, h);
  static constexpr std::array<FigureLabel, 4> kPanelTypes{FigureLabel::plot, FigureLabel::photo, FigureLabel::table,
                                                          FigureLabel::diagram};
  for (int r = 0; r < opt.rows; ++r)
    for (int c = 0; c < opt.cols; ++c) {
      const Rect cell{margin + c * (pw + gutter), margin + r * (cell_h + gutter), pw, ph};
      const FigureLabel type = kPanelTypes[uniform_index(rng, kPanelTypes.size())];
      Rect truth = draw_panel(m.image, cell, type, rng);
      if (strips) {
        const int sw = uniform_int(rng, pw / 2, pw - 4);
        const Rect strip{cell.x + (pw - sw) / 2, cell.bottom() + strip_gap, sw, strip_h};
        fill_rect(m.image, Rect{strip.x, strip.y, 4, strip.h}, 0.0f);
        text_line(m.image, rng, strip.x, strip.y, strip.w, strip.h, 0.1f);
        fill_rect(m.image, Rect{strip.right() - 4, strip.y, 4, strip.h}, 0.0f);
        truth = bounding_union(truth, strip);
        m.label_strips.push_back(strip);
      }
      m.panels.push_back(truth);
      m.panel_types.push_back(type);
    }
  return m;
}

/// Layout drawn uniformly from 1x2 through 3x3.
inline Montage random_montage(Rng& rng, double label_strip_probability = 0.3) {
  MontageOptions opt;
  do {
    opt.rows = detail::uniform_int(rng, 1, 3);
    opt.cols = detail::uniform_int(rng, 1, 3);
  } while (opt.rows * opt.cols < 2);
  opt.label_strip_probability = label_strip_probability;
  return make_montage(rng, opt);
}

// ---------------------------------------------------------------------------
// Fragments

struct FragmentSet {
  std::vector<GrayImage> images;
  std::vector<int> labels;  // FragmentKind
};

/// Standalone examples are whole panels; auxiliary ones are label strips,
/// axis-label columns and small glyph clusters.
inline FragmentSet fragment_corpus(int per_kind, std::uint64_t seed) {
  using namespace detail;
  FragmentSet out;
  const std::size_t n = static_cast<std::size_t>(per_kind) * 2;
  out.images.resize(n);
  out.labels.resize(n);
  parallel_for(n, [&](std::size_t i) {
    Rng rng(sub_seed(seed, i));
    if (i < static_cast<std::size_t>(per_kind)) {
      static constexpr std::array<FigureLabel, 4> kTypes{FigureLabel::plot, FigureLabel::photo, FigureLabel::table,
                                                         FigureLabel::diagram};
      GrayImage canvas = blank(uniform_int(rng, 90, 180), uniform_int(rng, 80, 150));
      draw_panel(canvas, canvas.bounds(), kTypes[uniform_index(rng, kTypes.size())], rng);
      out.images[i] = std::move(canvas);
      out.labels[i] = static_cast<int>(dismantler::FragmentKind::standalone);
    } else {
      const int kind = uniform_int(rng, 0, 2);
      GrayImage g;
      if (kind == 0) {  // horizontal label strip
        g = blank(uniform_int(rng, 40, 170), uniform_int(rng, 24, 30));
        text_line(g, rng, 0, (g.height - 8) / 2, g.width, 8, 0.1f);
      } else if (kind == 1) {  // rotated axis label
        g = blank(uniform_int(rng, 24, 30), uniform_int(rng, 60, 150));
        GrayImage t = blank(g.height, 8);
        text_line(t, rng, 0, 0, t.width, 8, 0.1f);
        for (int r = 0; r < t.height; ++r)
          for (int c = 0; c < t.width; ++c) g.pixels[static_cast<std::size_t>(c) * g.width + (g.width - 8) / 2 + r] = t.at(r, c);
      } else {  // panel tag such as "(a)"
        g = blank(uniform_int(rng, 24, 36), uniform_int(rng, 24, 36));
        cv::putText(view(g), std::string("(") + static_cast<char>('a' + uniform_int(rng, 0, 8)) + ")", {1, g.height - 6},
                    cv::FONT_HERSHEY_SIMPLEX, 0.5, cv::Scalar(0.0), 1);
      }
      out.images[i] = std::move(g);
      out.labels[i] = static_cast<int>(dismantler::FragmentKind::auxiliary);
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Demo corpus on disk

/// Smallest well-formed GIF (1x1, one colour); used to exercise the GIF
/// drop rule since the image codec library does not write GIF.
inline std::vector<std::uint8_t> tiny_gif() {
  return {0x47, 0x49, 0x46, 0x38, 0x39, 0x61, 0x01, 0x00, 0x01, 0x00, 0x80, 0x00, 0x00, 0xFF, 0xFF, 0xFF,
          0x00, 0x00, 0x00, 0x21, 0xF9, 0x04, 0x01, 0x00, 0x00, 0x00, 0x00, 0x2C, 0x00, 0x00, 0x00, 0x00,
          0x01, 0x00, 0x01, 0x00, 0x00, 0x02, 0x02, 0x44, 0x01, 0x00, 0x3B};
}

/// A text-dense portrait page, the shape the page-print filter rejects.
inline GrayImage render_page_print(Rng& rng, int width = 850, int height = 1100) {
  GrayImage img = detail::blank(width, height);
  for (int y = 50; y + 10 < height - 50; y += 12) detail::glyph_line(img, rng, 70, y, width - 140, 9, 0.05f);
  return img;
}

inline std::vector<std::uint8_t> encode_as(const GrayImage& img, const std::string& ext) {
  std::vector<std::uint8_t> out;
  if (!cv::imencode(ext, to_raster(img), out)) fail(ErrorCode::IoError, "cannot encode " + ext);
  return out;
}

struct DemoCorpus {
  int papers = 0;
  int figures = 0;
};

/// Writes images/ and metadata.jsonl under dir: papers with a few figures
/// each (mixed classes and montages, PNG/JPEG/TIFF) plus one GIF, one
/// page print and one byte-identical duplicate.
inline DemoCorpus write_demo_corpus(const std::filesystem::path& dir, int papers, std::uint64_t seed) {
  namespace fs = std::filesystem;
  const fs::path img_dir = dir / "images";
  fs::create_directories(img_dir);
  Rng rng(seed);
  static const std::array<std::string, 4> journals{"Journal of Synthetic Biology", "Computational Imaging Letters",
                                                   "PLoS One", "Annals of Procedural Data"};
  static const std::array<std::string, 12> words{"virus", "protein", "network", "phylogenetic", "tree", "cell",
                                                 "signal", "model", "imaging", "growth", "genome", "pathway"};
  auto phrase = [&](int n) {
    std::string s;
    for (int i = 0; i < n; ++i) s += (i ? " " : "") + words[uniform_index(rng, words.size())];
    return s;
  };
  std::string meta;
  DemoCorpus dc;
  static const std::array<std::string, 3> exts{".png", ".jpg", ".tif"};
  for (int p = 0; p < papers; ++p) {
    nlohmann::json j;
    const std::string pid = "P" + std::to_string(1000 + p);
    j["paper_id"] = pid;
    j["title"] = "On the " + phrase(3);
    j["abstract"] = "We study " + phrase(8) + ".";
    j["journal"] = journals[uniform_index(rng, journals.size())];
    j["year"] = 2005 + static_cast<int>(uniform_index(rng, 10));
    j["page_count"] = 4 + static_cast<int>(uniform_index(rng, 12));
    j["authors"] = {"A. Author", "B. Writer"};
    nlohmann::json figs = nlohmann::json::array();
    const int nf = 1 + static_cast<int>(uniform_index(rng, 4));
    for (int f = 0; f < nf; ++f) {
      const std::string ext = exts[uniform_index(rng, exts.size())];
      const std::string name = pid + "_f" + std::to_string(f) + ext;
      GrayImage img = uniform01(rng) < 0.25 ? random_montage(rng).image
                                            : render(kFigureClasses[uniform_index(rng, kFigureClasses.size())], rng);
      write_file_bytes((img_dir / name).string(), encode_as(img, ext));
      figs.push_back({{"file", name}, {"caption", "Figure " + std::to_string(f + 1) + ": " + phrase(6)}});
      ++dc.figures;
    }
    if (p == 0) {
      write_file_bytes((img_dir / (pid + "_anim.gif")).string(), tiny_gif());
      figs.push_back({{"file", pid + "_anim.gif"}, {"caption", "animation"}});
      write_file_bytes((img_dir / (pid + "_page.png")).string(), encode_as(render_page_print(rng), ".png"));
      figs.push_back({{"file", pid + "_page.png"}, {"caption", "scanned page"}});
      const fs::path first = img_dir / figs[0]["file"].get<std::string>();
      const std::string copy = pid + "_x_copy" + first.extension().string();
      fs::copy_file(first, img_dir / copy, fs::copy_options::overwrite_existing);
      figs.push_back({{"file", copy}, {"caption", "duplicate"}});
    }
    j["figures"] = figs;
    meta += j.dump() + "\n";
    ++dc.papers;
  }
  write_file_text((dir / "metadata.jsonl").string(), meta);
  return dc;
}

/// Citation edges among demo papers: every paper cites up to three
/// earlier ones.
inline std::string demo_citations(int papers, std::uint64_t seed) {
  Rng rng(seed);
  std::string out = "# citing\tcited\n";
  for (int p = 1; p < papers; ++p) {
    const int k = 1 + static_cast<int>(uniform_index(rng, 3));
    for (int i = 0; i < k; ++i) {
      const int q = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(p)));
      out += "P" + std::to_string(1000 + p) + "\tP" + std::to_string(1000 + q) + "\n";
    }
  }
  return out;
}

}  // namespace figmine::synth
