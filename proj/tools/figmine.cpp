// figmine command-line tool: corpus ingest, feature learning, classifier
// training, gating, dismantling, ranking, analysis and the search server.

#include "figmine.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace figmine;

namespace {

void log_line(const std::string& msg) { std::cerr << "[figmine] " << msg << '\n'; }

/// `id<TAB>label` lines; blank and '#' lines skipped.
std::vector<std::pair<std::string, std::string>> read_label_file(const std::string& path) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in(read_file_text(path));
  int lineno = 0;
  for (std::string line; std::getline(in, line);) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) fail(ErrorCode::ParseError, path + " line " + std::to_string(lineno) + ": expected id<TAB>label");
    out.emplace_back(line.substr(0, tab), line.substr(tab + 1));
  }
  return out;
}

/// Figure class names or plain integers.
int parse_class_label(const std::string& s) {
  if (const auto l = parse_label(s)) return static_cast<int>(*l);
  try {
    std::size_t used = 0;
    const int v = std::stoi(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  fail(ErrorCode::ParseError, "unknown label '" + s + "'");
}

int parse_gate_label(const std::string& s) {
  if (s == "singleton" || s == "0") return static_cast<int>(gate::GateLabel::singleton);
  if (s == "multichart" || s == "1") return static_cast<int>(gate::GateLabel::multichart);
  fail(ErrorCode::ParseError, "gate label must be singleton or multichart, got '" + s + "'");
}

std::map<std::string, std::vector<double>> read_features(const std::string& path) {
  std::map<std::string, std::vector<double>> out;
  std::istringstream in(read_file_text(path));
  for (std::string line; std::getline(in, line);) {
    if (line.empty()) continue;
    const auto j = json::parse(line);
    out[j.at("figure_id").get<std::string>()] = j.at("features").get<std::vector<double>>();
  }
  return out;
}

/// A JSON object, or an object whose array values are expanded as a
/// Cartesian product, or an array of such objects.
std::vector<svm::SvmParams> read_grid(const std::string& path) {
  const json doc = json::parse(read_file_text(path));
  std::vector<svm::SvmParams> grid;
  auto expand = [&](const json& cell) {
    const json kernels = cell.contains("kernel") && cell["kernel"].is_array() ? cell["kernel"] : json::array({cell.value("kernel", "rbf")});
    const json gammas = cell.contains("gamma") && cell["gamma"].is_array() ? cell["gamma"] : json::array({cell.value("gamma", 0.001)});
    const json cs = cell.contains("C") && cell["C"].is_array() ? cell["C"] : json::array({cell.value("C", 1000.0)});
    for (const auto& k : kernels)
      for (const auto& g : gammas)
        for (const auto& c : cs) {
          svm::SvmParams p;
          p.kernel = svm::parse_kernel(k.get<std::string>());
          p.gamma = g.get<double>();
          p.penalty_c = c.get<double>();
          p.validate();
          grid.push_back(p);
        }
  };
  if (doc.is_array())
    for (const auto& cell : doc) expand(cell);
  else
    expand(doc);
  if (grid.empty()) fail(ErrorCode::InvalidParameter, "empty grid in " + path);
  return grid;
}

std::set<std::string> parents_of(const corpus::Manifest& m) {
  std::set<std::string> s;
  for (const auto& f : m.figures)
    if (f.parent_figure_id) s.insert(*f.parent_figure_id);
  return s;
}

svm::Matrix to_matrix(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return {};
  svm::Matrix x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows[0].size()) fail(ErrorCode::InvalidFeature, "feature rows differ in length");
    for (std::size_t k = 0; k < rows[i].size(); ++k) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
  }
  return x;
}

void write_json(const fs::path& p, const json& j) { write_file_text(p.string(), j.dump(2) + "\n"); }

// ---------------------------------------------------------------------------

int cmd_ingest(const std::string& images, const std::string& metadata, const std::string& out) {
  const auto report = corpus::ingest(images, metadata, out);
  std::cout << corpus::to_json(report).dump(2) << '\n';
  return report.balanced() ? 0 : 1;
}

int cmd_synth(const std::string& out, int papers, std::uint64_t seed) {
  const auto dc = synth::write_demo_corpus(out, papers, seed);
  write_file_text((fs::path(out) / "citations.tsv").string(), synth::demo_citations(papers, seed + 1));
  log_line("wrote " + std::to_string(dc.papers) + " papers, " + std::to_string(dc.figures) + " figures to " + out);
  return 0;
}

int cmd_train_codebook(const std::string& manifest_dir, int per_image, std::uint64_t seed, const std::string& out, int k,
                       double epsilon, int max_images) {
  const auto m = corpus::read_manifest(manifest_dir);
  std::vector<const FigureRecord*> figs;
  for (const auto& f : m.figures) figs.push_back(&f);
  if (max_images > 0 && figs.size() > static_cast<std::size_t>(max_images)) figs.resize(static_cast<std::size_t>(max_images));
  if (figs.empty()) fail(ErrorCode::InsufficientData, "manifest has no figures");
  std::vector<GrayImage> imgs(figs.size());
  parallel_for(figs.size(), [&](std::size_t i) {
    imgs[i] = features::normalize_image(corpus::load_gray(manifest_dir, figs[i]->image_key));
  });
  const auto patches = features::sample_patches(imgs, per_image, seed);
  log_line("sampled " + std::to_string(patches.rows()) + " patches from " + std::to_string(imgs.size()) + " images");
  const auto whitening = features::fit_whitening(patches, epsilon);
  features::KMeansResult trace;
  const auto cb = features::build_codebook(patches, whitening, k, seed, features::kDefaultGeometry, &trace);
  write_file_bytes(out, features::serialize(cb));
  write_json(out + ".json", {{"k", k},
                             {"per_image", per_image},
                             {"seed", seed},
                             {"zca_epsilon", epsilon},
                             {"contrast_epsilon", features::kContrastEpsilon},
                             {"image_size", cb.geometry.image_size},
                             {"window", cb.geometry.window},
                             {"images", imgs.size()},
                             {"patches", patches.rows()},
                             {"kmeans_iterations", trace.iterations},
                             {"kmeans_converged", trace.converged},
                             {"kmeans_objective", trace.objective.empty() ? 0.0 : trace.objective.back()}});
  log_line("codebook written to " + out);
  return 0;
}

int cmd_encode(const std::string& manifest_dir, const std::string& codebook, const std::string& out) {
  const auto m = corpus::read_manifest(manifest_dir);
  const auto cb = features::deserialize_codebook(read_file_bytes(codebook));
  std::vector<std::string> rows(m.figures.size());
  parallel_for(m.figures.size(), [&](std::size_t i) {
    const auto img = features::normalize_image(corpus::load_gray(manifest_dir, m.figures[i].image_key), cb.geometry.image_size);
    rows[i] = json{{"figure_id", m.figures[i].figure_id}, {"features", features::encode(img, cb)}}.dump();
  });
  std::string text;
  for (const auto& r : rows) text += r + "\n";
  write_file_text(out, text);
  log_line("encoded " + std::to_string(rows.size()) + " figures");
  return 0;
}

int cmd_train_classifier(const std::string& features_path, const std::string& labels_path, const std::string& grid_path,
                         int folds, double holdout, std::uint64_t seed, const std::string& out, std::string report_path) {
  const auto feats = read_features(features_path);
  auto labels_raw = read_label_file(labels_path);
  std::sort(labels_raw.begin(), labels_raw.end());
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  for (const auto& [id, lab] : labels_raw) {
    const auto it = feats.find(id);
    if (it == feats.end()) fail(ErrorCode::InvalidTrainingSet, "no features for " + id);
    rows.push_back(it->second);
    labels.push_back(parse_class_label(lab));
  }
  const svm::Matrix x = to_matrix(rows);
  const auto grid = grid_path.empty() ? std::vector<svm::SvmParams>{svm::SvmParams{}} : read_grid(grid_path);
  svm::GridResult gr;
  if (grid.size() > 1) {
    gr = svm::grid_search(x, labels, grid, folds, seed);
    for (std::size_t g = 0; g < grid.size(); ++g)
      log_line("grid cell " + std::to_string(g) + " " + json(grid[g]).dump() + " accuracy " + std::to_string(gr.accuracy[g]));
  } else {
    gr.best = grid[0];
  }
  const auto cv = svm::cross_validate(x, labels, gr.best, folds, seed);
  auto model = svm::train(x, labels, gr.best);
  model.metadata = json{{"kind", "figure-type"}}.dump();
  write_file_bytes(out, svm::serialize(model));
  write_json(out + ".json", {{"params", gr.best}, {"grid", grid}, {"grid_accuracy", gr.accuracy}, {"folds", folds}, {"seed", seed},
                             {"classes", model.classes}, {"support_vectors", model.support_vectors.rows()}});
  if (report_path.empty()) report_path = out + ".report.json";
  json rep = svm::to_json(cv);
  std::vector<std::string> names;
  for (int c : cv.confusion.classes())
    names.push_back(c >= 0 && c <= static_cast<int>(FigureLabel::unclassified) ? std::string(to_string(static_cast<FigureLabel>(c)))
                                                                               : std::to_string(c));
  rep["class_names"] = names;
  rep["precision_recall_csv"] = analysis::precision_recall_csv(cv, names);
  if (holdout > 0.0) {
    // Separate protocol: fit on the stratified remainder, score the reserved share.
    const auto [train_idx, test_idx] = svm::holdout_split(labels, holdout, seed);
    auto pick = [&](const std::vector<Eigen::Index>& idx, svm::Matrix& xs, std::vector<int>& ys) {
      xs.resize(static_cast<Eigen::Index>(idx.size()), x.cols());
      for (std::size_t i = 0; i < idx.size(); ++i) {
        xs.row(static_cast<Eigen::Index>(i)) = x.row(idx[i]);
        ys.push_back(labels[static_cast<std::size_t>(idx[i])]);
      }
    };
    svm::Matrix xtr, xte;
    std::vector<int> ytr, yte;
    pick(train_idx, xtr, ytr);
    pick(test_idx, xte, yte);
    const auto cm = svm::evaluate(svm::train(xtr, ytr, gr.best), xte, yte);
    rep["holdout"] = {{"test_fraction", holdout},
                      {"train_size", ytr.size()},
                      {"test_size", yte.size()},
                      {"accuracy", cm.accuracy()},
                      {"confusion", svm::to_json(cm)}};
    log_line("holdout accuracy " + std::to_string(cm.accuracy()) + " on " + std::to_string(yte.size()) + " figures");
  }
  write_json(report_path, rep);
  std::cout << analysis::precision_recall_csv(cv, names);
  return 0;
}

int cmd_classify(const std::string& manifest_dir, const std::string& codebook, const std::string& model_path) {
  auto m = corpus::read_manifest(manifest_dir);
  const auto cb = features::deserialize_codebook(read_file_bytes(codebook));
  const auto model = svm::deserialize_model(read_file_bytes(model_path));
  for (int c : model.classes)
    if (c < 0 || c >= kFigureClassCount) fail(ErrorCode::InvalidParameter, "model predicts a non-figure class " + std::to_string(c));
  const auto parents = parents_of(m);
  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < m.figures.size(); ++i)
    if (!parents.contains(m.figures[i].figure_id)) todo.push_back(i);
  parallel_for(todo.size(), [&](std::size_t t) {
    FigureRecord& f = m.figures[todo[t]];
    const auto img = features::normalize_image(corpus::load_gray(manifest_dir, f.image_key), cb.geometry.image_size);
    const auto p = svm::predict(model, features::to_double(features::encode(img, cb)));
    f.label = static_cast<FigureLabel>(p.label);
    f.class_probs.assign(kFigureClassCount, 0.0);
    for (std::size_t c = 0; c < model.classes.size(); ++c) f.class_probs[static_cast<std::size_t>(model.classes[c])] = p.class_probs[c];
  });
  corpus::write_manifest(manifest_dir, std::move(m));
  log_line("classified " + std::to_string(todo.size()) + " figures");
  return 0;
}

int cmd_train_gate(const std::string& manifest_dir, const std::string& labels_path, int synthetic, std::uint64_t seed,
                   const std::string& out) {
  std::vector<GrayImage> imgs;
  std::vector<int> labels;
  if (synthetic > 0) {
    const auto singles = synth::class_corpus((synthetic + kFigureClassCount - 1) / kFigureClassCount, seed);
    for (int i = 0; i < synthetic; ++i) {
      imgs.push_back(singles.images[static_cast<std::size_t>(i)]);
      labels.push_back(0);
    }
    for (int i = 0; i < synthetic; ++i) {
      Rng rng(sub_seed(seed ^ 0x6a7e, static_cast<std::uint64_t>(i)));
      imgs.push_back(synth::random_montage(rng).image);
      labels.push_back(1);
    }
  } else {
    if (manifest_dir.empty() || labels_path.empty()) fail(ErrorCode::InvalidParameter, "need --manifest and --labels, or --synthetic");
    const auto m = corpus::read_manifest(manifest_dir);
    for (const auto& [id, lab] : read_label_file(labels_path)) {
      const FigureRecord* f = m.find_figure(id);
      if (!f) fail(ErrorCode::NotFound, "label refers to unknown figure " + id);
      imgs.push_back(corpus::load_gray(manifest_dir, f->image_key));
      labels.push_back(parse_gate_label(lab));
    }
  }
  const auto g = gate::train_gate(imgs, labels);
  write_file_bytes(out, gate::serialize(g));
  write_json(out + ".json", {{"params", g.model.params}, {"height_avg", g.stats.height_avg}, {"width_avg", g.stats.width_avg},
                             {"training_images", imgs.size()}, {"synthetic", synthetic > 0}});
  log_line("gate model written to " + out);
  return 0;
}

int cmd_gate(const std::string& manifest_dir, const std::string& model_path) {
  auto m = corpus::read_manifest(manifest_dir);
  const auto g = gate::deserialize_gate(read_file_bytes(model_path));
  std::atomic<long> multi{0};
  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < m.figures.size(); ++i)
    if (!m.figures[i].parent_figure_id) todo.push_back(i);
  parallel_for(todo.size(), [&](std::size_t t) {
    FigureRecord& f = m.figures[todo[t]];
    const auto d = gate::classify_gate(corpus::load_gray(manifest_dir, f.image_key), g);
    f.gate = GateAnnotation{gate::to_string(d.label), d.probability};
    if (d.label == gate::GateLabel::multichart) {
      f.label = FigureLabel::multichart;
      f.class_probs.clear();
      ++multi;
    }
  });
  corpus::write_manifest(manifest_dir, std::move(m));
  log_line("gated " + std::to_string(todo.size()) + " figures, " + std::to_string(multi.load()) + " multichart");
  return 0;
}

int cmd_train_fragments(int per_kind, std::uint64_t seed, const std::string& out) {
  const auto set = synth::fragment_corpus(per_kind, seed);
  const auto clf = dismantler::train_fragment_classifier(set.images, set.labels);
  write_file_bytes(out, dismantler::serialize(clf));
  write_json(out + ".json", {{"params", clf.model.params}, {"per_kind", per_kind}, {"seed", seed},
                             {"height_avg", clf.stats.height_avg}, {"width_avg", clf.stats.width_avg}});
  log_line("fragment classifier written to " + out);
  return 0;
}

int cmd_dismantle(const std::string& manifest_dir, const std::string& gate_path, const std::string& frag_path) {
  auto m = corpus::read_manifest(manifest_dir);
  const auto g = gate::deserialize_gate(read_file_bytes(gate_path));
  const auto clf = dismantler::deserialize_fragment_classifier(read_file_bytes(frag_path));
  const auto parents = parents_of(m);
  long split_count = 0;
  std::vector<FigureRecord> children;
  for (auto& f : m.figures) {
    if (f.parent_figure_id || parents.contains(f.figure_id)) continue;  // already a child, or already dismantled
    const auto bytes = corpus::load_image_bytes(manifest_dir, f.image_key);
    const cv::Mat raster = decode_raster(bytes);
    const GrayImage gray = to_gray(raster);
    dismantler::DismantleResult res;
    if (f.gate)
      res = f.gate->label == "multichart" ? dismantler::dismantle(gray, clf) : dismantler::DismantleResult{};
    else
      res = dismantler::dismantle(gray, g, clf);
    if (res.subfigures.size() < 2) continue;
    ++split_count;
    for (std::size_t i = 0; i < res.subfigures.size(); ++i) {
      const Rect& b = res.subfigures[i].bbox;
      FigureRecord c;
      c.figure_id = f.figure_id + "-s" + std::to_string(i + 1);
      c.paper_id = f.paper_id;
      c.caption = f.caption;
      c.image_key = corpus::store_image(manifest_dir, encode_png(crop_raster(raster, b)));
      c.width = b.w;
      c.height = b.h;
      c.parent_figure_id = f.figure_id;
      c.bbox_in_parent = b;
      validate(c, Rect{0, 0, f.width, f.height});
      children.push_back(std::move(c));
    }
    f.label = FigureLabel::multichart;
    f.class_probs.clear();
  }
  const std::size_t added = children.size();
  for (auto& c : children) m.figures.push_back(std::move(c));
  corpus::write_manifest(manifest_dir, std::move(m));
  log_line("dismantled " + std::to_string(split_count) + " figures into " + std::to_string(added) + " sub-figures");
  return 0;
}

int cmd_rank(const std::string& edges_path, double alpha, int steps, const std::string& out, const std::string& scorer,
             const std::string& manifest_dir) {
  const auto edges = alef::parse_edge_list(read_file_text(edges_path));
  std::vector<std::string> extra;
  std::optional<corpus::Manifest> m;
  if (!manifest_dir.empty()) {
    m = corpus::read_manifest(manifest_dir);
    for (const auto& p : m->papers) extra.push_back(p.paper_id);
  }
  const auto g = alef::build_graph(edges, extra);
  const alef::AlefParams params{alpha, steps};
  params.validate();
  const auto s = alef::score(g, scorer == "citations" ? alef::Scorer::citation_count : alef::Scorer::alef, params);
  const auto by_id = alef::as_map(g, s);
  std::string text;
  for (const auto& [id, v] : by_id) text += json{{"paper_id", id}, {"alef", v}}.dump() + "\n";
  write_file_text(out, text);
  if (m) {
    for (auto& p : m->papers)
      if (const auto it = by_id.find(p.paper_id); it != by_id.end()) p.alef_score = it->second;
    corpus::write_manifest(manifest_dir, std::move(*m));
  }
  log_line("scored " + std::to_string(g.node_count()) + " papers over " + std::to_string(g.edge_count()) + " edges (" +
           std::to_string(g.dropped_self_loops) + " self-loops, " + std::to_string(g.dropped_duplicates) + " duplicates dropped)");
  return 0;
}

struct AnalyzeOptions {
  std::string manifest, scores, report, confusion, audit;
  std::vector<std::string> exclude;
  int trials = 2000;
  std::uint64_t seed = 0;
  double bin_fraction = 0.005;
  int bin_count = 0;
  bool reference_confusion = false;
};

int cmd_analyze(const AnalyzeOptions& o) {
  const auto m = corpus::read_manifest(o.manifest);
  const auto scores = search::parse_scores(read_file_text(o.scores));
  const fs::path out(o.report);
  fs::create_directories(out);
  json summary;
  std::vector<std::string> warnings;

  // Density profiles over leaf figures.
  const auto parents = parents_of(m);
  std::vector<FigureRecord> leaves;
  for (const auto& f : m.figures)
    if (!parents.contains(f.figure_id)) leaves.push_back(f);
  std::map<std::string, analysis::DensityProfile> profiles;
  std::vector<analysis::ScoredPaper> scored;
  std::string prof_csv = "paper_id,page_count,diagram_density,photo_density,plot_density,table_density,diagram_prop,photo_prop,plot_prop,table_prop,proportions_undefined\n";
  for (const auto& p : m.papers) {
    const auto prof = analysis::density_profile(p, leaves);
    profiles[p.paper_id] = prof;
    prof_csv += p.paper_id + "," + std::to_string(p.page_count);
    for (double d : prof.density) prof_csv += "," + analysis::format_number(d);
    for (double d : prof.proportion) prof_csv += "," + analysis::format_number(d);
    prof_csv += prof.proportions_undefined ? ",1\n" : ",0\n";
    const auto it = scores.find(p.paper_id);
    if (it == scores.end()) continue;
    scored.push_back({p.paper_id, p.journal, it->second, prof});
  }
  if (scored.size() < m.papers.size())
    warnings.push_back(std::to_string(m.papers.size() - scored.size()) + " papers have no score and were left out");
  write_file_text((out / "density_profiles.csv").string(), prof_csv);
  write_file_text((out / "table1_figure_counts.csv").string(), analysis::figure_counts_csv(m.figures));

  // Aggregates.
  auto agg_json = [](const std::map<std::string, std::array<double, 4>>& a) {
    json j = json::object();
    for (const auto& [k, v] : a) j[k] = {{"diagram", v[0]}, {"photo", v[1]}, {"plot", v[2]}, {"table", v[3]}};
    return j;
  };
  json journal_alef = json::object();
  for (const auto& [k, v] : alef::journal_aggregate(scores, m.papers)) journal_alef[k] = v;
  write_json(out / "aggregates.json", {{"density_by_journal", agg_json(analysis::density_by_journal(m.papers, profiles))},
                                       {"density_by_topic", agg_json(analysis::density_by_topic(m.papers, profiles))},
                                       {"density_by_year", agg_json(analysis::density_by_year(m.papers, profiles))},
                                       {"journal_mean_alef_proxy", journal_alef}});

  // Impact bins.
  if (!scored.empty()) {
    std::vector<analysis::ScoredId> ids;
    for (const auto& s : scored) ids.push_back({s.paper_id, s.score});
    auto bins_json = [](const analysis::ImpactBins& b) {
      json sizes = json::array();
      for (const auto& bin : b.bins) sizes.push_back(bin.size());
      return json{{"bins", b.bins.size()}, {"sizes", sizes}, {"boundaries", b.boundaries}};
    };
    json ib = {{"fixed_boundaries", bins_json(analysis::impact_bins(ids, analysis::BinScheme::fixed_boundaries))},
               {"half_percentile", bins_json(analysis::impact_bins(ids, analysis::BinScheme::half_percentile, o.bin_fraction))}};
    if (o.bin_count > 0)
      ib["fixed_count"] = bins_json(analysis::impact_bins(ids, analysis::BinScheme::fixed_count, o.bin_count));
    write_json(out / "impact_bins.json", ib);
  }

  // Correlations with and without exclusions.
  const std::set<std::string> excluded(o.exclude.begin(), o.exclude.end());
  std::vector<analysis::CorrelationRow> rows;
  json corr = json::array();
  for (auto target : {analysis::Target::density, analysis::Target::proportion})
    for (auto type : analysis::kDensityTypes) {
      analysis::CorrelationRow r{type, target, std::nullopt, std::nullopt};
      auto attempt = [&](const std::set<std::string>& ex) -> std::optional<analysis::BinnedCorrelation> {
        try {
          return analysis::binned_correlation(scored, type, target, o.bin_fraction, ex);
        } catch (const Error& e) {
          warnings.push_back(std::string(to_string(type)) + ": " + e.what());
          return std::nullopt;
        }
      };
      r.included = attempt({});
      if (!excluded.empty()) r.excluded = attempt(excluded);
      json j = {{"figure_type", to_string(type)}, {"target", target == analysis::Target::density ? "density" : "proportion"}};
      j["included"] = r.included ? analysis::to_json(*r.included) : json(nullptr);
      j["excluded"] = r.excluded ? analysis::to_json(*r.excluded) : json(nullptr);
      corr.push_back(j);
      rows.push_back(std::move(r));
    }
  write_file_text((out / "table3_correlations.csv").string(), analysis::correlation_table_csv(rows));
  write_json(out / "correlations.json", {{"excluded_journals", o.exclude}, {"bin_fraction", o.bin_fraction}, {"rows", corr}});

  // Confusion-driven reports.
  std::optional<svm::ConfusionMatrix> all, singleton;
  if (o.reference_confusion) {
    all = analysis::reference_all_confusion();
    singleton = analysis::reference_singleton_confusion();
  } else if (!o.confusion.empty()) {
    const json cj = json::parse(read_file_text(o.confusion));
    if (cj.contains("singleton")) {
      singleton = svm::confusion_from_json(cj.at("singleton"));
      all = cj.contains("all") ? svm::confusion_from_json(cj.at("all")) : *singleton;
    } else {
      singleton = svm::confusion_from_json(cj.contains("confusion") ? cj.at("confusion") : cj);
      all = singleton;
    }
  }
  if (singleton) {
    std::vector<std::string> names;
    for (int c : singleton->classes()) names.push_back(std::string(to_string(static_cast<FigureLabel>(c))));
    write_file_text((out / "table4_confusion.csv").string(), analysis::confusion_table_csv(*all, &*singleton, names));
    svm::CvReport pr;
    pr.confusion = *singleton;
    for (std::size_t i = 0; i < singleton->size(); ++i) {
      pr.precision.push_back(singleton->precision(i));
      pr.recall.push_back(singleton->recall(i));
    }
    write_file_text((out / "table2_precision_recall.csv").string(), analysis::precision_recall_csv(pr, names));

    analysis::CalibrationInput in;
    std::map<std::string, std::size_t> pos;
    for (const auto& s : scored) {
      pos[s.paper_id] = in.paper_scores.size();
      in.paper_scores.push_back(s.score);
      in.paper_pages.push_back(s.profile.page_count);
    }
    for (const auto& f : leaves)
      if (pos.contains(f.paper_id) && is_singleton_class(f.label)) in.figures.push_back({pos[f.paper_id], f.label});
    if (in.paper_scores.size() >= 3) {
      const auto cal = analysis::calibration_experiment(in, *singleton, o.trials, o.seed);
      json cj = json::array();
      for (const auto& [t, r] : cal) cj.push_back(analysis::to_json(r));
      write_json(out / "calibration.json", {{"trials", o.trials}, {"seed", o.seed}, {"results", cj}});
    } else {
      warnings.push_back("calibration skipped: fewer than 3 scored papers");
    }
  } else {
    warnings.push_back("no confusion matrix given: tables 2 and 4 and calibration skipped");
  }

  // Bias audit against ground-truth labels.
  if (!o.audit.empty()) {
    std::vector<analysis::AuditSample> samples;
    for (const auto& [id, lab] : read_label_file(o.audit)) {
      const FigureRecord* f = m.find_figure(id);
      if (!f) continue;
      const auto it = scores.find(f->paper_id);
      if (it == scores.end()) continue;
      samples.push_back({parse_class_label(lab), static_cast<int>(f->label), it->second});
    }
    write_json(out / "bias_audit.json", analysis::to_json(analysis::bias_audit(samples)));
  }

  summary["papers"] = m.papers.size();
  summary["scored_papers"] = scored.size();
  summary["figures"] = m.figures.size();
  summary["warnings"] = warnings;
  write_json(out / "summary.json", summary);
  for (const auto& w : warnings) log_line("warning: " + w);
  log_line("reports written to " + o.report);
  return 0;
}

int cmd_index(const std::string& manifest_dir, const std::string& scores_path, const std::string& out) {
  const auto m = corpus::read_manifest(manifest_dir);
  const auto scores = scores_path.empty() ? search::scores_from_manifest(m) : search::parse_scores(read_file_text(scores_path));
  const auto idx = search::build_index(m, scores);
  write_file_bytes(out, search::serialize(idx));
  log_line("index: " + std::to_string(idx.docs.size()) + " figures, " + std::to_string(idx.postings.size()) + " tokens, " +
           std::to_string(idx.posting_count()) + " postings");
  return 0;
}

int cmd_serve(const std::string& manifest_dir, const std::string& scores_path, const std::string& host, int port,
              const std::string& cors, std::string log_path) {
  auto m = corpus::read_manifest(manifest_dir);
  const auto scores = scores_path.empty() ? search::scores_from_manifest(m) : search::parse_scores(read_file_text(scores_path));
  if (log_path.empty()) log_path = (fs::path(manifest_dir) / "verifications.jsonl").string();
  search::SearchService svc(std::move(m), scores, manifest_dir, log_path);
  httplib::Server srv;
  server::install_routes(srv, svc, {cors});
  log_line("listening on http://" + host + ":" + std::to_string(port));
  if (!srv.listen(host, port)) fail(ErrorCode::IoError, "cannot listen on " + host + ":" + std::to_string(port));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"figmine: figure mining toolkit"};
  app.require_subcommand(1);

  std::string images, metadata, out, manifest, codebook, model, features_path, labels, grid, report, gate_path, frag_path,
      edges, scores, scorer = "alef", host = "127.0.0.1", cors, vlog;
  int per_image = 100, k = 200, folds = 10, steps = 2, port = 8080, papers = 20, synthetic = 0, per_kind = 300, max_images = 0;
  std::uint64_t seed = 0;
  double alpha = 0.85, epsilon = features::kDefaultZcaEpsilon, holdout = 0.0;
  AnalyzeOptions ao;

  auto* ingest = app.add_subcommand("ingest", "Filter images and write the manifest");
  ingest->add_option("--images", images, "Image directory")->required();
  ingest->add_option("--metadata", metadata, "Paper metadata (JSON lines)")->required();
  ingest->add_option("--out", out, "Manifest directory")->required();

  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic demo corpus");
  synth_cmd->add_option("--out", out, "Output directory")->required();
  synth_cmd->add_option("--papers", papers, "Number of papers");
  synth_cmd->add_option("--seed", seed, "Random seed");

  auto* tcb = app.add_subcommand("train-codebook", "Learn the whitening transform and patch codebook");
  tcb->add_option("--manifest", manifest)->required();
  tcb->add_option("--per-image", per_image, "Patches sampled per image");
  tcb->add_option("--seed", seed);
  tcb->add_option("--out", out)->required();
  tcb->add_option("--k", k, "Codebook size");
  tcb->add_option("--epsilon", epsilon, "Whitening regularizer");
  tcb->add_option("--max-images", max_images, "Use at most this many images (0 = all)");

  auto* enc = app.add_subcommand("encode", "Encode every figure into a feature vector");
  enc->add_option("--manifest", manifest)->required();
  enc->add_option("--codebook", codebook)->required();
  enc->add_option("--out", out, "Features (JSON lines)")->required();

  auto* tcl = app.add_subcommand("train-classifier", "Grid-search, cross-validate and train the figure-type SVM");
  tcl->add_option("--features", features_path)->required();
  tcl->add_option("--labels", labels, "id<TAB>label lines")->required();
  tcl->add_option("--grid", grid, "Hyperparameter grid (JSON)");
  tcl->add_option("--folds", folds);
  tcl->add_option("--holdout", holdout, "Also report accuracy on this reserved fraction (0 disables)");
  tcl->add_option("--seed", seed);
  tcl->add_option("--out", out)->required();
  tcl->add_option("--report", report, "Evaluation report path");

  auto* cls = app.add_subcommand("classify", "Label every leaf figure with the figure-type SVM");
  cls->add_option("--manifest", manifest)->required();
  cls->add_option("--codebook", codebook)->required();
  cls->add_option("--model", model)->required();

  auto* tg = app.add_subcommand("train-gate", "Train the multi-chart gate");
  tg->add_option("--manifest", manifest);
  tg->add_option("--labels", labels, "id<TAB>singleton|multichart lines");
  tg->add_option("--synthetic", synthetic, "Train on N generated images per class instead");
  tg->add_option("--seed", seed);
  tg->add_option("--out", out)->required();

  auto* gt = app.add_subcommand("gate", "Annotate figures as singleton or multichart");
  gt->add_option("--manifest", manifest)->required();
  gt->add_option("--model", model)->required();

  auto* tf = app.add_subcommand("train-fragments", "Train the fragment classifier on generated fragments");
  tf->add_option("--per-kind", per_kind);
  tf->add_option("--seed", seed);
  tf->add_option("--out", out)->required();

  auto* dm = app.add_subcommand("dismantle", "Split multi-chart figures into sub-figures");
  dm->add_option("--manifest", manifest)->required();
  dm->add_option("--gate", gate_path)->required();
  dm->add_option("--frag", frag_path)->required();

  auto* rk = app.add_subcommand("rank", "Score papers on the citation graph");
  rk->add_option("--edges", edges, "citing<TAB>cited lines")->required();
  rk->add_option("--alpha", alpha);
  rk->add_option("--steps", steps);
  rk->add_option("--out", out)->required();
  rk->add_option("--scorer", scorer, "alef or citations")->check(CLI::IsMember({"alef", "citations"}));
  rk->add_option("--manifest", manifest, "Also write scores into this manifest");

  auto* an = app.add_subcommand("analyze", "Density, correlation and calibration reports");
  an->add_option("--manifest", ao.manifest)->required();
  an->add_option("--scores", ao.scores)->required();
  an->add_option("--report", ao.report)->required();
  an->add_option("--exclude-journal", ao.exclude, "Journal to exclude (repeatable)");
  an->add_option("--trials", ao.trials);
  an->add_option("--seed", ao.seed);
  an->add_option("--bin-fraction", ao.bin_fraction);
  an->add_option("--bin-count", ao.bin_count, "Also report fixed-count bins of this size");
  an->add_option("--confusion", ao.confusion, "Confusion matrix JSON");
  an->add_flag("--reference-confusion", ao.reference_confusion, "Use the built-in reference confusion matrices");
  an->add_option("--audit", ao.audit, "Ground-truth labels (id<TAB>label) for the bias audit");

  auto* ix = app.add_subcommand("index", "Build and write the search index");
  ix->add_option("--manifest", manifest)->required();
  ix->add_option("--scores", scores);
  ix->add_option("--out", out)->required();

  auto* sv = app.add_subcommand("serve", "Run the search API");
  sv->add_option("--manifest", manifest)->required();
  sv->add_option("--scores", scores);
  sv->add_option("--host", host);
  sv->add_option("--port", port);
  sv->add_option("--cors-origin", cors, "Allowed browser origin");
  sv->add_option("--verification-log", vlog);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*ingest) return cmd_ingest(images, metadata, out);
    if (*synth_cmd) return cmd_synth(out, papers, seed);
    if (*tcb) return cmd_train_codebook(manifest, per_image, seed, out, k, epsilon, max_images);
    if (*enc) return cmd_encode(manifest, codebook, out);
    if (*tcl) return cmd_train_classifier(features_path, labels, grid, folds, holdout, seed, out, report);
    if (*cls) return cmd_classify(manifest, codebook, model);
    if (*tg) return cmd_train_gate(manifest, labels, synthetic, seed, out);
    if (*gt) return cmd_gate(manifest, model);
    if (*tf) return cmd_train_fragments(per_kind, seed, out);
    if (*dm) return cmd_dismantle(manifest, gate_path, frag_path);
    if (*rk) return cmd_rank(edges, alpha, steps, out, scorer, manifest);
    if (*an) return cmd_analyze(ao);
    if (*ix) return cmd_index(manifest, scores, out);
    if (*sv) return cmd_serve(manifest, scores, host, port, cors, vlog);
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.code()) << ": " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
