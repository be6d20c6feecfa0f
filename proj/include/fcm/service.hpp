// fcm/service.hpp
// ----------------------------------------------------------------------------
// HTTP scenario service over a file-backed Store.
//
//   POST /models                          create (201 {model_id, version})
//   PUT  /models/{id}                     update, requires If-Match: <version>
//   GET  /models/{id}[/{version}]         canonical model document
//   POST /models/{id}/{version}/runs      {config?, scenario?} -> run record
//   GET  /runs/{run_id}                   run record
//   GET  /runs/{run_id}/trajectory.csv    trajectory table
//   POST /models/{id}/{version}/analyses  {kind, params?, config?} -> record
//   GET  /analyses/{id}                   analysis record
//   GET  /runs/{a}/compare/{b}            per-concept final values and deltas
//   GET  /templates                       archetype library
//
// Errors are JSON objects {error, rules[], message, where}.
// Every handler is also callable directly, without a socket.
// ----------------------------------------------------------------------------
#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <utility>

#include "httplib.h"

#include "fcm/analysis.hpp"
#include "fcm/io.hpp"
#include "fcm/store.hpp"
#include "fcm/templates.hpp"

namespace fcm {

struct Reply {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

class ScenarioService {
 public:
  ScenarioService(std::filesystem::path store_root, TemplateLibrary library)
      : store_(std::move(store_root)), library_(std::move(library)) {}

  Store& store() noexcept { return store_; }

  Reply create_model(std::string_view body) {
    return guarded([&] {
      const auto model = load_model(body);
      const auto ref = store_.create_model(model);
      return json_reply(201, ref_json(ref));
    });
  }

  Reply update_model(const std::string& id, std::optional<std::string_view> if_match,
                     std::string_view body) {
    return guarded([&] {
      if (!if_match) return error_reply(400, "missing_if_match", "If-Match header with the expected version is required");
      auto expected = parse_int(*if_match);
      if (!expected) return error_reply(400, "bad_if_match", "If-Match must be an integer version");
      if (!store_.get_model(id)) return error_reply(404, "not_found", "unknown model", id);
      const auto model = load_model(body);
      return json_reply(200, ref_json(store_.update_model(id, *expected, model)));
    });
  }

  Reply get_model(const std::string& id, std::optional<int> version) {
    return guarded([&] {
      auto m = store_.get_model(id, version);
      if (!m) return error_reply(404, "not_found", "unknown model or version", id);
      return Reply{200, m->document, "application/json"};
    });
  }

  Reply run_simulation(const std::string& id, int version, std::string_view body) {
    return guarded([&] {
      auto stored = store_.get_model(id, version);
      if (!stored) return error_reply(404, "not_found", "unknown model or version", id);
      const Json request = body.empty() ? Json::object() : detail::parse_json(body);
      detail::expect_object(request, "");
      detail::reject_unknown(request, "", {"config", "scenario"});

      const auto model = load_model(stored->document);
      const auto config = config_from_json(request.value("config", Json()), model.range);
      const auto flat = flatten_hierarchy(model, config);
      const auto scenario = request.contains("scenario")
                                ? detail::scenario_from_json(request["scenario"], flat)
                                : Scenario{};
      const auto result = simulate(flat, config, scenario);

      OrderedJson record;
      store_.put_run([&](const std::string& rid) {
        record["run_id"] = rid;
        record["model_id"] = id;
        record["version"] = version;
        record["config"] = config_to_json(config);
        record["scenario"] = scenario_to_json(scenario);
        record["seed"] = nullptr;
        record["result"] = result_to_json(result);
        return to_document(record);
      });
      return json_reply(201, record);
    });
  }

  Reply get_run(const std::string& run_id) {
    return guarded([&] {
      auto doc = store_.get_run(run_id);
      if (!doc) return error_reply(404, "not_found", "unknown run", run_id);
      return Reply{200, *doc, "application/json"};
    });
  }

  Reply get_trajectory_csv(const std::string& run_id) {
    return guarded([&] {
      auto doc = store_.get_run(run_id);
      if (!doc) return error_reply(404, "not_found", "unknown run", run_id);
      const auto record = Json::parse(*doc);
      auto stored = store_.get_model(record["model_id"].get<std::string>(), record["version"].get<int>());
      if (!stored) return error_reply(404, "not_found", "run references a missing model", run_id);
      const auto model = load_model(stored->document);
      return Reply{200, export_trajectory(result_from_json(record["result"]), model), "text/csv"};
    });
  }

  Reply run_analysis(const std::string& id, int version, std::string_view body) {
    return guarded([&] {
      auto stored = store_.get_model(id, version);
      if (!stored) return error_reply(404, "not_found", "unknown model or version", id);
      const Json request = detail::parse_json(body);
      detail::expect_object(request, "");
      detail::reject_unknown(request, "", {"kind", "params", "config"});
      if (!request.contains("kind")) return error_reply(422, "invalid_params", "missing analysis kind");
      const auto kind = detail::get_string(request["kind"], "/kind");

      const Json params = request.value("params", Json::object());
      detail::expect_object(params, "/params");
      detail::reject_unknown(params, "/params", {"samples", "seed", "top_k", "threads"});
      auto int_param = [&](const char* name, std::int64_t fallback, std::int64_t min) {
        if (!params.contains(name)) return fallback;
        const auto v = detail::get_integer(params[name], std::string("/params/") + name);
        if (v < min) throw FcmError("invalid_params", std::string(name) + " out of range", std::string("/params/") + name);
        return v;
      };
      const int samples = static_cast<int>(int_param("samples", 100, 1));
      const auto seed = static_cast<std::uint64_t>(int_param("seed", 0, 0));
      const int top_k = static_cast<int>(int_param("top_k", 10, 1));
      const auto threads = static_cast<unsigned>(int_param("threads", 1, 0));

      const auto model = load_model(stored->document);
      const auto config = config_from_json(request.value("config", Json()), model.range);
      const auto flat = flatten_hierarchy(model, config);

      OrderedJson result;
      OrderedJson used_params;
      if (kind == "closure") {
        const auto closure = transitive_closure(flat);
        result = influence_to_json(closure, influence_report(closure));
      } else if (kind == "stability") {
        used_params = {{"samples", samples}, {"seed", seed}};
        result = stability_to_json(stability_report(flat, config, samples, seed, threads));
      } else if (kind == "structural_search") {
        used_params = {{"samples", samples}, {"seed", seed}, {"top_k", top_k}};
        result = suggestions_to_json(structural_search(flat, config, samples, seed, top_k, threads));
      } else {
        return error_reply(422, "invalid_params", "kind must be closure, stability or structural_search");
      }

      OrderedJson record;
      store_.put_analysis([&](const std::string& aid) {
        record["analysis_id"] = aid;
        record["kind"] = kind;
        record["model_id"] = id;
        record["version"] = version;
        record["params"] = used_params.is_null() ? OrderedJson::object() : used_params;
        record["config"] = config_to_json(config);
        record["result"] = result;
        return to_document(record);
      });
      return json_reply(201, record);
    });
  }

  Reply get_analysis(const std::string& analysis_id) {
    return guarded([&] {
      auto doc = store_.get_analysis(analysis_id);
      if (!doc) return error_reply(404, "not_found", "unknown analysis", analysis_id);
      return Reply{200, *doc, "application/json"};
    });
  }

  Reply compare_runs(const std::string& a, const std::string& b) {
    return guarded([&] {
      auto doc_a = store_.get_run(a);
      if (!doc_a) return error_reply(404, "not_found", "unknown run", a);
      auto doc_b = store_.get_run(b);
      if (!doc_b) return error_reply(404, "not_found", "unknown run", b);
      const auto ra = Json::parse(*doc_a);
      const auto rb = Json::parse(*doc_b);
      if (ra["model_id"] != rb["model_id"] || ra["version"] != rb["version"])
        return error_reply(409, "different_models", "runs reference different model versions");
      auto stored = store_.get_model(ra["model_id"].get<std::string>(), ra["version"].get<int>());
      if (!stored) return error_reply(404, "not_found", "runs reference a missing model");
      const auto model = load_model(stored->document);
      const auto res_a = result_from_json(ra["result"]);
      const auto res_b = result_from_json(rb["result"]);

      OrderedJson out;
      out["run_a"] = a;
      out["run_b"] = b;
      out["model_id"] = ra["model_id"];
      out["version"] = ra["version"];
      out["outcome_a"] = to_string(res_a.outcome);
      out["outcome_b"] = to_string(res_b.outcome);
      auto rows = OrderedJson::array();
      auto emit = [&](bool targets) {
        for (std::size_t i = 0; i < model.size(); ++i) {
          const auto& c = model.concepts[i];
          if ((c.kind == ConceptKind::target) != targets) continue;
          const double fa = res_a.final_state().values.at(i);
          const double fb = res_b.final_state().values.at(i);
          rows.push_back({{"id", c.id.str()},
                          {"kind", to_string(c.kind)},
                          {"final_a", fa},
                          {"final_b", fb},
                          {"delta", fb - fa}});
        }
      };
      emit(true);
      emit(false);
      out["concepts"] = std::move(rows);
      return json_reply(200, out);
    });
  }

  Reply templates() {
    return guarded([&] { return json_reply(200, library_to_json(library_)); });
  }

  /// Registers every route on `server`.
  void install(httplib::Server& server) {
    auto send = [](httplib::Response& res, const Reply& r) {
      res.status = r.status;
      res.set_content(r.body, r.content_type);
    };
    server.Post("/models", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, create_model(req.body));
    });
    server.Put(R"(/models/([^/]+))", [this, send](const httplib::Request& req, httplib::Response& res) {
      std::optional<std::string_view> if_match;
      const auto header = req.get_header_value("If-Match");
      if (req.has_header("If-Match")) if_match = header;
      send(res, update_model(req.matches[1], if_match, req.body));
    });
    server.Get(R"(/models/([^/]+))", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, get_model(req.matches[1], std::nullopt));
    });
    server.Get(R"(/models/([^/]+)/(\d+))", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, with_version(req.matches[2], [&](int v) { return get_model(req.matches[1], v); }));
    });
    server.Post(R"(/models/([^/]+)/(\d+)/runs)",
                [this, send](const httplib::Request& req, httplib::Response& res) {
                  send(res, with_version(req.matches[2], [&](int v) {
                         return run_simulation(req.matches[1], v, req.body);
                       }));
                });
    server.Post(R"(/models/([^/]+)/(\d+)/analyses)",
                [this, send](const httplib::Request& req, httplib::Response& res) {
                  send(res, with_version(req.matches[2], [&](int v) {
                         return run_analysis(req.matches[1], v, req.body);
                       }));
                });
    server.Get(R"(/runs/([^/]+)/trajectory\.csv)",
               [this, send](const httplib::Request& req, httplib::Response& res) {
                 send(res, get_trajectory_csv(req.matches[1]));
               });
    server.Get(R"(/runs/([^/]+)/compare/([^/]+))",
               [this, send](const httplib::Request& req, httplib::Response& res) {
                 send(res, compare_runs(req.matches[1], req.matches[2]));
               });
    server.Get(R"(/runs/([^/]+))", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, get_run(req.matches[1]));
    });
    server.Get(R"(/analyses/([^/]+))", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, get_analysis(req.matches[1]));
    });
    server.Get("/templates", [this, send](const httplib::Request&, httplib::Response& res) {
      send(res, templates());
    });
  }

 private:
  static std::optional<int> parse_int(std::string_view s) {
    s = detail::trim(s);
    if (!s.empty() && s.front() == '"' && s.back() == '"' && s.size() >= 2) s = s.substr(1, s.size() - 2);
    int v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
    return v;
  }

  template <typename Fn>
  static Reply with_version(const std::string& text, Fn&& fn) {
    auto v = parse_int(text);
    if (!v) return error_reply(404, "not_found", "unknown version", text);
    return fn(*v);
  }

  static OrderedJson ref_json(const ModelRef& ref) {
    return {{"model_id", ref.model_id}, {"version", ref.version}};
  }

  static Reply json_reply(int status, const OrderedJson& j) { return {status, to_document(j)}; }

  static Reply error_reply(int status, const std::string& rule, const std::string& message,
                           const std::string& where = {}, const std::vector<Violation>& violations = {}) {
    OrderedJson j;
    j["error"] = rule;
    auto rules = OrderedJson::array();
    auto details = OrderedJson::array();
    if (violations.empty()) {
      rules.push_back(rule);
    } else {
      for (const auto& v : violations) {
        rules.push_back(v.rule);
        details.push_back({{"rule", v.rule}, {"where", v.where}, {"message", v.message}});
      }
    }
    j["rules"] = std::move(rules);
    j["message"] = message;
    j["where"] = where;
    if (!details.empty()) j["violations"] = std::move(details);
    return json_reply(status, j);
  }

  /// Maps library errors onto status codes: syntax 400, conflicts 409,
  /// everything else 422.
  template <typename Fn>
  static Reply guarded(Fn&& fn) {
    try {
      return fn();
    } catch (const FcmError& e) {
      int status = 422;
      if (e.rule() == "syntax") status = 400;
      else if (e.rule() == "version_conflict") status = 409;
      else if (e.rule() == "not_found") status = 404;
      else if (e.rule() == "io") status = 500;
      return error_reply(status, e.rule(), e.message(), e.where(), e.violations());
    } catch (const std::exception& e) {
      return error_reply(500, "internal", e.what());
    }
  }

  Store store_;
  TemplateLibrary library_;
};

/// Parses "host:port" (host defaults to 127.0.0.1).
inline std::pair<std::string, int> parse_listen_address(const std::string& addr) {
  const auto colon = addr.rfind(':');
  std::string host = colon == std::string::npos ? "127.0.0.1" : addr.substr(0, colon);
  const auto port_text = colon == std::string::npos ? addr : addr.substr(colon + 1);
  int port = 0;
  auto [ptr, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
  if (ec != std::errc() || ptr != port_text.data() + port_text.size() || port < 0 || port > 65535)
    throw FcmError("usage", "invalid listen address '" + addr + "'");
  if (host.empty()) host = "127.0.0.1";
  return {host, port};
}

}  // namespace fcm
