// fcm/cli.hpp
// ----------------------------------------------------------------------------
// Command-line front end. Machine output goes to stdout or --out files in
// the canonical formats, human summaries go to stderr.
// Exit codes: 0 success, 1 validation/domain error, 2 usage error.
// ----------------------------------------------------------------------------
#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "fcm/analysis.hpp"
#include "fcm/io.hpp"
#include "fcm/service.hpp"
#include "fcm/templates.hpp"

namespace fcm::cli {

namespace detail {

struct ConfigFlags {
  std::optional<double> k1, k2, steepness, epsilon, quantization;
  std::optional<std::string> threshold;
  std::optional<int> max_iters, cycle_window;

  void add_to(CLI::App& app) {
    app.add_option("--k1", k1, "weight of the incoming-influence sum");
    app.add_option("--k2", k2, "weight of the concept's previous value");
    app.add_option("--threshold", threshold, "clamp | tanh | logistic | bivalent | trivalent")
        ->check(CLI::IsMember({"clamp", "tanh", "logistic", "bivalent", "trivalent"}));
    app.add_option("--steepness", steepness, "lambda for tanh/logistic");
    app.add_option("--epsilon", epsilon, "max-norm convergence tolerance");
    app.add_option("--max-iters", max_iters, "iteration limit");
    app.add_option("--cycle-window", cycle_window, "history depth for cycle detection");
    app.add_option("--quantization", quantization, "rounding step for recurrence matching");
  }

  SimulationConfig resolve(Range range) const {
    auto c = SimulationConfig::defaults_for(range);
    if (k1) c.k1 = *k1;
    if (k2) c.k2 = *k2;
    if (threshold) c.threshold.kind = *parse_threshold_kind(*threshold);
    if (steepness) c.threshold.steepness = *steepness;
    if (epsilon) c.epsilon = *epsilon;
    if (max_iters) c.max_iters = *max_iters;
    if (cycle_window) c.cycle_window = *cycle_window;
    if (quantization) c.quantization = *quantization;
    validate_config(c, range);
    return c;
  }
};

inline void write_output(const std::optional<std::string>& path, const std::string& bytes,
                         std::ostream& out) {
  if (path) {
    write_file_atomic(*path, bytes);
  } else {
    out << bytes;
  }
}

inline OrderedJson violations_json(const std::vector<Violation>& vs) {
  OrderedJson j;
  j["ok"] = vs.empty();
  auto arr = OrderedJson::array();
  for (const auto& v : vs) arr.push_back({{"rule", v.rule}, {"where", v.where}, {"message", v.message}});
  j["violations"] = std::move(arr);
  return j;
}

}  // namespace detail

/// Runs one invocation. `argv[0]` is the program name.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  CLI::App app{"Fuzzy cognitive map engine and scenario workbench", "fcm"};
  app.require_subcommand(1, 1);

  std::string model_path;
  std::optional<std::string> out_path, scenario_path, template_file;
  int samples = 100, top_k = 10;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::string addr = "127.0.0.1:8080";
  std::optional<std::string> store_dir;
  detail::ConfigFlags cfg;

  auto* validate = app.add_subcommand("validate", "check a model document");
  validate->add_option("--model", model_path, "model document (.fcm.json)")->required();

  auto* sim = app.add_subcommand("simulate", "run a scenario and write the trajectory table");
  sim->add_option("--model", model_path, "model document")->required();
  sim->add_option("--scenario", scenario_path, "scenario document (.scn.json)");
  sim->add_option("--out", out_path, "trajectory CSV (stdout if omitted)");
  cfg.add_to(*sim);

  auto* closure = app.add_subcommand("closure", "signed transitive closure and influence report");
  closure->add_option("--model", model_path, "model document")->required();
  closure->add_option("--out", out_path, "report JSON (stdout if omitted)");

  auto* stab = app.add_subcommand("stability", "sampled stability report");
  stab->add_option("--model", model_path, "model document")->required();
  stab->add_option("--samples", samples, "random starts")->check(CLI::PositiveNumber);
  stab->add_option("--seed", seed, "generator seed");
  stab->add_option("--threads", threads, "worker threads (0 = all cores)");
  cfg.add_to(*stab);

  auto* search = app.add_subcommand("search", "single-edge structural search");
  search->add_option("--model", model_path, "model document")->required();
  search->add_option("--samples", samples, "random starts per edit")->check(CLI::PositiveNumber);
  search->add_option("--seed", seed, "generator seed");
  search->add_option("--top-k", top_k, "number of suggestions")->check(CLI::PositiveNumber);
  search->add_option("--threads", threads, "worker threads (0 = all cores)");
  cfg.add_to(*search);

  auto* tmpl = app.add_subcommand("template", "write the standard SED template model");
  tmpl->add_option("--out", out_path, "model document (stdout if omitted)");
  tmpl->add_option("--template-file", template_file, "template source (defaults to the bundled file)");

  auto* serve = app.add_subcommand("serve", "run the HTTP scenario service");
  serve->add_option("--addr", addr, "listen address host:port");
  serve->add_option("--store", store_dir, "store directory (default $FCM_STORE or ./fcm-store)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  auto load = [&] { return load_model(read_file(model_path)); };

  try {
    if (validate->parsed()) {
      const auto model = parse_model_document(read_file(model_path));
      const auto violations = validate_model(model);
      out << to_document(detail::violations_json(violations));
      for (const auto& v : violations) err << v.rule << ": " << v.message << " (" << v.where << ")\n";
      return violations.empty() ? 0 : 1;
    }
    if (sim->parsed()) {
      const auto model = load();
      const auto config = cfg.resolve(model.range);
      const auto flat = flatten_hierarchy(model, config);
      const auto scenario = scenario_path ? load_scenario(read_file(*scenario_path), flat) : Scenario{};
      const auto result = simulate(flat, config, scenario);
      detail::write_output(out_path, export_trajectory(result, flat), out);
      err << "outcome=" << to_string(result.outcome) << " iterations=" << result.iterations << "\n";
      return 0;
    }
    if (closure->parsed()) {
      const auto m = transitive_closure(load());
      detail::write_output(out_path, to_document(influence_to_json(m, influence_report(m))), out);
      return 0;
    }
    if (stab->parsed()) {
      const auto model = load();
      const auto config = cfg.resolve(model.range);
      const auto report = stability_report(flatten_hierarchy(model, config), config, samples, seed, threads);
      out << to_document(stability_to_json(report));
      err << "fixed_point_fraction=" << report.fixed_point_fraction << "\n";
      return 0;
    }
    if (search->parsed()) {
      const auto model = load();
      const auto config = cfg.resolve(model.range);
      const auto edits = structural_search(flatten_hierarchy(model, config), config, samples, seed, top_k, threads);
      out << to_document(suggestions_to_json(edits));
      err << edits.size() << " suggestions\n";
      return 0;
    }
    if (tmpl->parsed()) {
      const auto model = template_file ? builtin_sed_template(*template_file) : builtin_sed_template();
      detail::write_output(out_path, save_model(model), out);
      return 0;
    }
    if (serve->parsed()) {
      if (!store_dir) {
        const char* env = std::getenv("FCM_STORE");
        store_dir = env && *env ? std::string(env) : std::string("fcm-store");
      }
      const auto [host, port] = parse_listen_address(addr);
      ScenarioService service(*store_dir, builtin_library(builtin_sed_template()));
      httplib::Server server;
      service.install(server);
      err << "listening on " << host << ":" << port << ", store " << *store_dir << "\n";
      if (!server.listen(host, port)) {
        err << "error: cannot listen on " << addr << "\n";
        return 1;
      }
      return 0;
    }
  } catch (const FcmError& e) {
    err << "error: " << e.what() << "\n";
    if (e.rule() == "usage") return 2;
    OrderedJson j{{"error", e.rule()}, {"message", e.message()}, {"where", e.where()}};
    out << to_document(j);
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace fcm::cli
