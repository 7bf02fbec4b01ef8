// End-to-end walk through the library on a generated corpus: ingest,
// codebook, figure-type classifier, multichart gate, dismantling, citation
// ranking and a search query. Runs in well under a minute.

#include "figmine.hpp"

#include <cstdio>
#include <filesystem>

namespace fs = std::filesystem;
using namespace figmine;

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "figmine-quickstart";
  fs::remove_all(work);

  // 1. A small synthetic corpus on disk, then ingestion.
  const auto dc = synth::write_demo_corpus(work / "raw", 30, 7);
  const auto report = corpus::ingest(work / "raw" / "images", work / "raw" / "metadata.jsonl", work / "manifest");
  std::printf("ingest: %ld files seen, %ld kept, %ld dropped (%d papers generated)\n", report.seen, report.retained,
              report.dropped_total(), dc.papers);
  corpus::Manifest m = corpus::read_manifest(work / "manifest");

  // 2. Codebook and classifier on labelled synthetic figures.
  const auto train = synth::class_corpus(30, 11);
  std::vector<GrayImage> normalized;
  for (const auto& img : train.images) normalized.push_back(features::normalize_image(img));
  const auto patches = features::sample_patches(normalized, 40, 3);
  const auto codebook = features::build_codebook(patches, features::fit_whitening(patches), 50, 5);
  svm::Matrix x(static_cast<Eigen::Index>(normalized.size()), codebook.geometry.feature_dim());
  for (std::size_t i = 0; i < normalized.size(); ++i) {
    const auto f = features::encode(normalized[i], codebook);
    for (std::size_t k = 0; k < f.size(); ++k) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = f[k];
  }
  svm::SvmParams params;
  params.gamma = 1e-6;
  const auto cv = svm::cross_validate(x, train.labels, params, 5, 1);
  std::printf("classifier: 5-fold accuracy %.3f on %zu figures\n", cv.accuracy(), train.labels.size());
  const auto model = svm::train(x, train.labels, params);

  // 3. Gate and fragment models, then label or dismantle every figure.
  std::vector<GrayImage> gate_imgs(train.images.begin(), train.images.begin() + 60);
  std::vector<int> gate_labels(gate_imgs.size(), 0);
  Rng rng(13);
  for (int i = 0; i < 60; ++i) {
    gate_imgs.push_back(synth::random_montage(rng).image);
    gate_labels.push_back(1);
  }
  const auto gate_model = gate::train_gate(gate_imgs, gate_labels);
  const auto frags = synth::fragment_corpus(60, 17);
  const auto frag_model = dismantler::train_fragment_classifier(frags.images, frags.labels);

  int multichart = 0, children = 0;
  std::vector<FigureRecord> added;
  for (auto& f : m.figures) {
    const GrayImage img = corpus::load_gray(work / "manifest", f.image_key);
    const auto res = dismantler::dismantle(img, gate_model, frag_model);
    auto label_of = [&](const GrayImage& g) {
      const auto enc = features::to_double(features::encode(features::normalize_image(g), codebook));
      return svm::predict(model, enc);
    };
    if (res.subfigures.size() < 2) {
      const auto p = label_of(img);
      f.label = static_cast<FigureLabel>(p.label);
      f.class_probs = p.class_probs;
      continue;
    }
    ++multichart;
    f.label = FigureLabel::multichart;
    for (std::size_t s = 0; s < res.subfigures.size(); ++s) {
      const Rect b = res.subfigures[s].bbox;
      const GrayImage part = crop(img, b);
      const auto p = label_of(part);
      FigureRecord c;
      c.figure_id = f.figure_id + "-s" + std::to_string(s);
      c.paper_id = f.paper_id;
      c.caption = f.caption;
      c.image_key = corpus::store_image(work / "manifest", encode_png(part));
      c.width = b.w;
      c.height = b.h;
      c.label = static_cast<FigureLabel>(p.label);
      c.class_probs = p.class_probs;
      c.parent_figure_id = f.figure_id;
      c.bbox_in_parent = b;
      added.push_back(std::move(c));
      ++children;
    }
  }
  m.figures.insert(m.figures.end(), added.begin(), added.end());
  std::printf("dismantle: %d multichart figures split into %d sub-figures\n", multichart, children);

  // 4. Citation ranking.
  const auto edges = alef::parse_edge_list(synth::demo_citations(dc.papers, 19));
  const auto graph = alef::build_graph(edges);
  const auto scores = alef::as_map(graph, alef::alef_scores(graph));
  auto best = std::max_element(scores.begin(), scores.end(), [](const auto& a, const auto& b) { return a.second < b.second; });
  std::printf("rank: %zu papers, %zu citations, top paper %s (%.4f)\n", graph.node_count(), graph.edge_count(),
              best->first.c_str(), best->second);

  // 5. Search.
  corpus::write_manifest(work / "manifest", m);
  search::SearchService svc(corpus::read_manifest(work / "manifest"), scores, work / "manifest", work / "verifications.jsonl");
  search::QueryOptions opt;
  opt.page_size = 5;
  opt.match = search::MatchMode::any_term;
  const auto page = svc.query("virus protein", opt);
  std::printf("search 'virus protein': %zu hits\n", page.total);
  for (const auto& r : page.results)
    std::printf("  %-28s %-8s %.4f  %s\n", r.figure_id.c_str(), std::string(to_string(r.label)).c_str(), r.alef_score,
                r.snippet.c_str());
  std::printf("output in %s\n", work.string().c_str());
  return 0;
}
