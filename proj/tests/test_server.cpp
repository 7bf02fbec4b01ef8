#include "figmine.hpp"

#include <gtest/gtest.h>

#include <thread>

#include "figmine/server.hpp"
#include "test_support.hpp"

using namespace figmine;
using figmine::testing::TempDir;
using json = nlohmann::json;

namespace {

class Api : public ::testing::Test {
 protected:
  void SetUp() override {
    GrayImage img(16, 12, 1.0f);
    fill_rect(img, Rect{2, 2, 8, 6}, 0.0f);
    png_ = encode_png(img);
    const std::string key = corpus::store_image(dir_.path(), png_);
    corpus::Manifest m;
    for (int p = 0; p < 3; ++p) {
      PaperRecord r;
      r.paper_id = "P" + std::to_string(p);
      r.title = "Paper about growth";
      r.journal = "J";
      r.year = 2011;
      m.papers.push_back(r);
      scores_[r.paper_id] = 0.1 * (p + 1);
    }
    for (int f = 0; f < 9; ++f) {
      FigureRecord r;
      r.figure_id = "F" + std::to_string(f);
      r.paper_id = "P" + std::to_string(f % 3);
      r.image_key = key;
      r.caption = f % 2 ? "growth curve of cells" : "cell membrane photo";
      r.label = f % 2 ? FigureLabel::plot : FigureLabel::photo;
      r.class_probs.assign(kFigureClassCount, 0.0);
      r.class_probs[static_cast<std::size_t>(r.label)] = 1.0;
      m.figures.push_back(r);
    }
    FigureRecord child = m.figures[0];
    child.figure_id = "F0-s0";
    child.parent_figure_id = "F0";
    child.bbox_in_parent = Rect{2, 2, 8, 6};
    m.figures.push_back(child);
    corpus::write_manifest(dir_.path(), m);
    svc_ = std::make_unique<search::SearchService>(corpus::read_manifest(dir_.path()), scores_, dir_.path(),
                                                   dir_.path() / "verifications.jsonl");
    server::install_routes(srv_, *svc_, {"http://ui.test"});
    port_ = srv_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { srv_.listen_after_bind(); });
    srv_.wait_until_ready();
    cli_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
  }
  void TearDown() override {
    srv_.stop();
    thread_.join();
  }

  httplib::Result post(const json& body) { return cli_->Post("/verifications", body.dump(), "application/json"); }

  TempDir dir_{"server"};
  std::vector<std::uint8_t> png_;
  search::ScoreTable scores_;
  std::unique_ptr<search::SearchService> svc_;
  httplib::Server srv_;
  std::thread thread_;
  int port_ = 0;
  std::unique_ptr<httplib::Client> cli_;
};

}  // namespace

TEST_F(Api, Health) {
  auto r = cli_->Get("/healthz");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 200);
  EXPECT_EQ(json::parse(r->body)["figures"], 10);
}

TEST_F(Api, SearchOrderPagingAndCors) {
  auto r = cli_->Get("/search?q=growth&size=4&page=1");
  ASSERT_TRUE(r);
  ASSERT_EQ(r->status, 200);
  const auto j = json::parse(r->body);
  EXPECT_EQ(j["total"], 10);  // every title mentions growth
  ASSERT_EQ(j["results"].size(), 4u);
  EXPECT_EQ(j["results"][0]["paper"]["paper_id"], "P2");  // highest score first
  EXPECT_GE(j["results"][0]["alef_score"].get<double>(), j["results"][3]["alef_score"].get<double>());
  EXPECT_EQ(r->get_header_value("Access-Control-Allow-Origin"), "http://ui.test");
  auto last = cli_->Get("/search?q=growth&size=4&page=3");
  EXPECT_EQ(json::parse(last->body)["results"].size(), 2u);
}

TEST_F(Api, SearchFiltersAndModes) {
  auto r = cli_->Get("/search?q=growth&types=plot,table");
  for (const auto& x : json::parse(r->body)["results"]) EXPECT_EQ(x["label"], "plot");
  auto all = cli_->Get("/search?q=membrane%20curve");
  EXPECT_EQ(json::parse(all->body)["total"], 0);
  auto any = cli_->Get("/search?q=membrane%20curve&mode=any");
  EXPECT_EQ(json::parse(any->body)["total"], 10);
  auto blended = cli_->Get("/search?q=growth&rank=blended");
  EXPECT_EQ(blended->status, 200);
}

TEST_F(Api, SearchClientErrors) {
  for (const std::string path : {"/search?q=", "/search?q=%2C%2C", "/search?q=a&types=banana", "/search?q=a&page=0",
                                 "/search?q=a&size=201", "/search?q=a&size=x", "/search?q=a&mode=some", "/search?q=a&rank=x"}) {
    auto r = cli_->Get(path);
    ASSERT_TRUE(r) << path;
    EXPECT_EQ(r->status, 400) << path;
    EXPECT_TRUE(json::parse(r->body).contains("error")) << path;
  }
  EXPECT_EQ(json::parse(cli_->Get("/search?q=")->body)["error"], "EmptyQuery");
}

TEST_F(Api, FigureDetailAndImage) {
  auto d = cli_->Get("/figures/F0");
  ASSERT_EQ(d->status, 200);
  const auto j = json::parse(d->body);
  EXPECT_EQ(j["children"], json::array({"F0-s0"}));
  EXPECT_EQ(j["siblings"], json::array({"F3", "F6"}));
  EXPECT_FALSE(j.contains("source_file"));
  auto c = cli_->Get("/figures/F0-s0");
  EXPECT_EQ(json::parse(c->body)["bbox_in_parent"], (json{{"x", 2}, {"y", 2}, {"w", 8}, {"h", 6}}));
  auto img = cli_->Get("/figures/F1/image");
  ASSERT_EQ(img->status, 200);
  EXPECT_EQ(img->get_header_value("Content-Type"), "image/png");
  EXPECT_EQ(img->body, std::string(png_.begin(), png_.end()));
  EXPECT_EQ(cli_->Get("/figures/nope")->status, 404);
  EXPECT_EQ(cli_->Get("/figures/nope/image")->status, 404);
}

TEST_F(Api, Verifications) {
  const json ok{{"figure_id", "F1"}, {"label", "table"}, {"client_token", "c1"}};
  auto first = post(ok);
  ASSERT_TRUE(first);
  EXPECT_EQ(first->status, 201);
  auto again = post(ok);
  EXPECT_EQ(again->status, 200);
  EXPECT_EQ(json::parse(again->body)["duplicate"], true);
  EXPECT_EQ(post({{"figure_id", "F1"}, {"label", "banana"}})->status, 400);
  EXPECT_EQ(post({{"label", "plot"}})->status, 400);
  EXPECT_EQ(post({{"figure_id", "F404"}, {"label", "plot"}})->status, 404);
  EXPECT_EQ(cli_->Post("/verifications", "{oops", "application/json")->status, 400);
  EXPECT_EQ(svc_->log().rows(), 1u);
  EXPECT_EQ(json::parse(cli_->Get("/figures/F1")->body)["label"], "plot");
  const auto row = json::parse(read_file_text((dir_.path() / "verifications.jsonl").string()));
  EXPECT_EQ(row["proposed_label"], "table");
  EXPECT_EQ(row["client_token"], "c1");
}

TEST_F(Api, Preflight) {
  auto r = cli_->Options("/verifications");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 204);
  EXPECT_EQ(r->get_header_value("Access-Control-Allow-Methods"), "GET, POST, OPTIONS");
}
