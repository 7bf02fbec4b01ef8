#pragma once

// JSON-over-HTTP front end for SearchService.
//
//   GET  /search?q=&types=&page=&size=[&mode=any][&rank=blended]
//   GET  /figures/{id}
//   GET  /figures/{id}/image
//   POST /verifications   {"figure_id", "label", "client_token"}
//   GET  /healthz

#include <charconv>
#include <functional>
#include <set>
#include <string>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "figmine/error.hpp"
#include "figmine/search.hpp"

namespace figmine::server {

struct ServerConfig {
  std::string cors_origin;  // empty: no CORS headers
};

inline int http_status(ErrorCode c) {
  switch (c) {
    case ErrorCode::EmptyQuery:
    case ErrorCode::BadRequest:
    case ErrorCode::InvalidParameter:
    case ErrorCode::ParseError: return 400;
    case ErrorCode::NotFound: return 404;
    default: return 500;
  }
}

inline void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

inline void send_error(httplib::Response& res, ErrorCode c, const std::string& message) {
  send_json(res, http_status(c), {{"error", std::string(to_string(c))}, {"message", message}});
}

inline int parse_int_param(const httplib::Request& req, const std::string& name, int fallback) {
  if (!req.has_param(name)) return fallback;
  const std::string v = req.get_param_value(name);
  int out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) fail(ErrorCode::BadRequest, name + " must be an integer");
  return out;
}

/// Comma-separated label names; an unknown name is a client error.
inline std::set<FigureLabel> parse_types(const std::string& csv) {
  std::set<FigureLabel> out;
  std::size_t start = 0;
  while (start <= csv.size()) {
    const std::size_t end = std::min(csv.find(',', start), csv.size());
    const std::string name = csv.substr(start, end - start);
    if (!name.empty()) {
      const auto l = parse_label(name);
      if (!l) fail(ErrorCode::BadRequest, "unknown type '" + name + "'");
      out.insert(*l);
    }
    start = end + 1;
  }
  return out;
}

inline search::QueryOptions query_options(const httplib::Request& req) {
  search::QueryOptions opt;
  opt.page = parse_int_param(req, "page", 1);
  opt.page_size = parse_int_param(req, "size", 20);
  if (req.has_param("types")) opt.types = parse_types(req.get_param_value("types"));
  const std::string mode = req.has_param("mode") ? req.get_param_value("mode") : "all";
  if (mode == "any")
    opt.match = search::MatchMode::any_term;
  else if (mode != "all")
    fail(ErrorCode::BadRequest, "mode must be 'all' or 'any'");
  const std::string rank = req.has_param("rank") ? req.get_param_value("rank") : "alef";
  if (rank == "blended")
    opt.rank = search::RankMode::blended;
  else if (rank != "alef")
    fail(ErrorCode::BadRequest, "rank must be 'alef' or 'blended'");
  return opt;
}

/// Runs a handler and converts library errors into JSON error bodies.
inline httplib::Server::Handler guarded(std::function<void(const httplib::Request&, httplib::Response&)> fn) {
  return [fn = std::move(fn)](const httplib::Request& req, httplib::Response& res) {
    try {
      fn(req, res);
    } catch (const Error& e) {
      send_error(res, e.code(), e.what());
    } catch (const nlohmann::json::exception& e) {
      send_error(res, ErrorCode::BadRequest, e.what());
    } catch (const std::exception& e) {
      send_error(res, ErrorCode::IoError, e.what());
    }
  };
}

inline void install_routes(httplib::Server& srv, search::SearchService& svc, const ServerConfig& cfg = {}) {
  if (!cfg.cors_origin.empty()) {
    srv.set_default_headers({{"Access-Control-Allow-Origin", cfg.cors_origin},
                             {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                             {"Access-Control-Allow-Headers", "Content-Type"},
                             {"Vary", "Origin"}});
    srv.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  }

  srv.Get("/healthz", [&svc](const httplib::Request&, httplib::Response& res) {
    const auto s = svc.snapshot();
    send_json(res, 200, {{"status", "ok"}, {"figures", s->index.docs.size()}, {"papers", s->manifest.papers.size()}});
  });

  srv.Get("/search", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
            const std::string q = req.has_param("q") ? req.get_param_value("q") : "";
            send_json(res, 200, search::to_json(svc.query(q, query_options(req))));
          }));

  srv.Get(R"(/figures/([^/]+)/image)", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
            const auto bytes = svc.figure_image(req.matches[1].str());
            res.status = 200;
            res.set_content(std::string(bytes.begin(), bytes.end()), "image/png");
          }));

  srv.Get(R"(/figures/([^/]+))", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
            send_json(res, 200, svc.figure_detail(req.matches[1].str()));
          }));

  srv.Post("/verifications", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
             nlohmann::json body;
             try {
               body = nlohmann::json::parse(req.body);
             } catch (const nlohmann::json::exception&) {
               fail(ErrorCode::BadRequest, "body is not JSON");
             }
             if (!body.is_object() || !body.contains("figure_id") || !body.contains("label"))
               fail(ErrorCode::BadRequest, "figure_id and label are required");
             const bool written = svc.submit_verification(body.at("figure_id").get<std::string>(),
                                                          body.at("label").get<std::string>(),
                                                          body.value("client_token", std::string("anonymous")));
             send_json(res, written ? 201 : 200, {{"accepted", true}, {"duplicate", !written}});
           }));
}

}  // namespace figmine::server
