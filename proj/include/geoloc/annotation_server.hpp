#pragma once

// JSON-over-HTTP front for SessionStore.
//
//   POST /sessions                     {doc, tags_a, tags_b}        -> 201 {session_id}
//   POST /sessions/review              {doc, tags, selections}      -> 201 {session_id}
//   GET  /sessions/{id}                                             -> Session
//   POST /sessions/{id}/resolutions    {conflict_id, resolution, annotator, version} -> Session
//   GET  /sessions/{id}/export                                      -> spans.jsonl (409 while unresolved)
//   GET  /healthz                                                   -> ok

#include <sstream>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "geoloc/annotation.hpp"

namespace geoloc {

namespace detail {

inline void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

inline void send_error(httplib::Response& res, int status, const std::string& message, json extra = json::object()) {
  extra["error"] = message;
  send_json(res, status, extra);
}

inline json parse_body(const httplib::Request& req) {
  auto j = json::parse(req.body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ParseError("request body must be a JSON object");
  return j;
}

// Maps library errors onto status codes.
template <class Fn>
void guarded(httplib::Response& res, Fn&& fn) {
  try {
    fn();
  } catch (const UnresolvedConflicts& e) {
    send_error(res, 409, e.what(), {{"unresolved", e.ids()}});
  } catch (const ConflictError& e) {
    send_error(res, 409, e.what());
  } catch (const NotFound& e) {
    send_error(res, 404, e.what());
  } catch (const ParseError& e) {
    send_error(res, 400, e.what());
  } catch (const ValidationError& e) {
    send_error(res, 400, e.what());
  } catch (const json::exception& e) {
    send_error(res, 400, std::string("bad request: ") + e.what());
  } catch (const std::exception& e) {
    send_error(res, 500, e.what());
  }
}

}  // namespace detail

inline void mount_annotation_routes(httplib::Server& server, SessionStore& store) {
  using detail::guarded;
  using detail::send_json;

  server.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
  server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });

  server.Get("/healthz", [](const httplib::Request&, httplib::Response& res) { res.set_content("ok", "text/plain"); });

  server.Post("/sessions", [&store](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      auto body = detail::parse_body(req);
      auto doc = detail::required<Document>(body, "doc");
      auto a = body.value("tags_a", std::vector<TagSpan>{});
      auto b = body.value("tags_b", std::vector<TagSpan>{});
      auto s = store.create(create_session(doc, a, b));
      send_json(res, 201, {{"session_id", s.id}});
    });
  });

  server.Post("/sessions/review", [&store](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      auto body = detail::parse_body(req);
      auto doc = detail::required<Document>(body, "doc");
      auto tags = body.value("tags", std::vector<TagSpan>{});
      auto sels = body.value("selections", std::vector<SelectionRecord>{});
      auto s = store.create(create_review_session(doc, tags, sels));
      send_json(res, 201, {{"session_id", s.id}});
    });
  });

  server.Get(R"(/sessions/([^/]+))", [&store](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, json(store.get(req.matches[1]))); });
  });

  server.Post(R"(/sessions/([^/]+)/resolutions)", [&store](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      auto body = detail::parse_body(req);
      auto conflict_id = detail::required<int>(body, "conflict_id");
      auto choice = resolution_from_string(detail::required<std::string>(body, "resolution"));
      auto annotator = detail::required<std::string>(body, "annotator");
      auto version = detail::required<long>(body, "version");
      auto s = store.update(req.matches[1],
                            [&](Session& sess) { resolve(sess, conflict_id, choice, annotator, version); });
      send_json(res, 200, json(s));
    });
  });

  server.Get(R"(/sessions/([^/]+)/export)", [&store](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      auto s = store.get(req.matches[1]);
      std::ostringstream out;
      write_export(out, s);
      res.status = 200;
      res.set_content(out.str(), "application/x-ndjson");
    });
  });
}

}  // namespace geoloc
