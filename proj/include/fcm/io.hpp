// fcm/io.hpp
// ----------------------------------------------------------------------------
// On-disk formats: model documents (.fcm.json), scenario documents
// (.scn.json), simulation configs, trajectory tables and indicator tables
// (.csv), plus JSON renderings of analysis results.
//
// Canonical model document, keys in this order:
//
//   { "format_version": 1, "name", "range",
//     "concepts": [ { "id", "label", "kind", "initial", "submodel"? } ],
//     "edges":    [ { "source", "target", "weight" } ],
//     "metadata": { sorted keys, string values } }
//
// A submodel is { "target": <concept id>, "model": { same fields minus
// format_version } }. Output is two-space indented UTF-8 with LF endings
// and a trailing newline; floats use the shortest round-trip form.
// Unknown fields are rejected at every level.
// ----------------------------------------------------------------------------
#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "json.hpp"

#include "fcm/analysis.hpp"
#include "fcm/core.hpp"

namespace fcm {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

inline constexpr int kFormatVersion = 1;

namespace detail {

inline std::string line_column(std::string_view text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < text.size() && i + 1 < byte; ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

inline Json parse_json(std::string_view text) {
  try {
    return Json::parse(text.begin(), text.end());
  } catch (const Json::parse_error& e) {
    throw FcmError("syntax", "malformed JSON document", line_column(text, e.byte));
  }
}

[[noreturn]] inline void schema_error(const std::string& path, const std::string& message) {
  throw FcmError("schema", message, path.empty() ? "/" : path);
}

inline void expect_object(const Json& j, const std::string& path) {
  if (!j.is_object()) schema_error(path, "expected an object");
}

inline void reject_unknown(const Json& j, const std::string& path,
                           std::initializer_list<std::string_view> allowed) {
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) throw FcmError("unknown_field", "unknown field '" + key + "'", path + "/" + key);
  }
}

inline std::string get_string(const Json& j, const std::string& path) {
  if (!j.is_string()) schema_error(path, "expected a string");
  return j.get<std::string>();
}

inline double get_number(const Json& j, const std::string& path) {
  if (!j.is_number()) schema_error(path, "expected a number");
  return j.get<double>();
}

inline std::int64_t get_integer(const Json& j, const std::string& path) {
  if (!j.is_number_integer()) schema_error(path, "expected an integer");
  return j.get<std::int64_t>();
}

inline FcmModel model_from_json(const Json& j, const std::string& path, bool top_level);

inline Concept concept_from_json(const Json& j, const std::string& path, Range range) {
  expect_object(j, path);
  reject_unknown(j, path, {"id", "label", "kind", "initial", "submodel"});
  Concept c;
  if (!j.contains("id")) schema_error(path, "missing field 'id'");
  c.id = ConceptId(get_string(j["id"], path + "/id"));
  c.label = j.contains("label") ? get_string(j["label"], path + "/label") : c.id.str();
  if (j.contains("kind")) {
    auto k = parse_concept_kind(get_string(j["kind"], path + "/kind"));
    if (!k) schema_error(path + "/kind", "kind must be target, variable or ordinary");
    c.kind = *k;
  }
  c.initial = j.contains("initial") ? get_number(j["initial"], path + "/initial") : range_midpoint(range);
  if (j.contains("submodel")) {
    const auto& s = j["submodel"];
    const auto sp = path + "/submodel";
    expect_object(s, sp);
    reject_unknown(s, sp, {"target", "model"});
    if (!s.contains("target")) schema_error(sp, "missing field 'target'");
    if (!s.contains("model")) schema_error(sp, "missing field 'model'");
    Submodel sub;
    sub.target = ConceptId(get_string(s["target"], sp + "/target"));
    sub.model = std::make_shared<const FcmModel>(model_from_json(s["model"], sp + "/model", false));
    c.submodel = std::move(sub);
  }
  return c;
}

inline FcmModel model_from_json(const Json& j, const std::string& path, bool top_level) {
  expect_object(j, path);
  if (top_level) {
    reject_unknown(j, path, {"format_version", "name", "range", "concepts", "edges", "metadata"});
    if (!j.contains("format_version")) schema_error(path, "missing field 'format_version'");
    if (get_integer(j["format_version"], path + "/format_version") != kFormatVersion)
      throw FcmError("format_version", "unsupported format_version", path + "/format_version");
  } else {
    reject_unknown(j, path, {"name", "range", "concepts", "edges", "metadata"});
  }

  FcmModel m;
  if (j.contains("name")) m.name = get_string(j["name"], path + "/name");
  if (j.contains("range")) {
    auto r = parse_range(get_string(j["range"], path + "/range"));
    if (!r) schema_error(path + "/range", "range must be bipolar or unipolar");
    m.range = *r;
  }
  if (!j.contains("concepts") || !j["concepts"].is_array())
    schema_error(path + "/concepts", "expected an array of concepts");
  const auto& concepts = j["concepts"];
  for (std::size_t i = 0; i < concepts.size(); ++i)
    m.concepts.push_back(
        concept_from_json(concepts[i], path + "/concepts/" + std::to_string(i), m.range));

  if (j.contains("edges")) {
    const auto& edges = j["edges"];
    if (!edges.is_array()) schema_error(path + "/edges", "expected an array of edges");
    for (std::size_t i = 0; i < edges.size(); ++i) {
      const auto ep = path + "/edges/" + std::to_string(i);
      const auto& e = edges[i];
      expect_object(e, ep);
      reject_unknown(e, ep, {"source", "target", "weight"});
      for (const char* field : {"source", "target", "weight"})
        if (!e.contains(field)) schema_error(ep, std::string("missing field '") + field + "'");
      m.edges.push_back({ConceptId(get_string(e["source"], ep + "/source")),
                         ConceptId(get_string(e["target"], ep + "/target")),
                         get_number(e["weight"], ep + "/weight")});
    }
  }

  if (j.contains("metadata")) {
    const auto& md = j["metadata"];
    expect_object(md, path + "/metadata");
    for (const auto& [key, value] : md.items())
      m.metadata[key] = get_string(value, path + "/metadata/" + key);
  }
  return m;
}

inline OrderedJson model_to_json(const FcmModel& m, bool top_level) {
  OrderedJson j;
  if (top_level) j["format_version"] = kFormatVersion;
  j["name"] = m.name;
  j["range"] = to_string(m.range);
  auto concepts = OrderedJson::array();
  for (const auto& c : m.concepts) {
    OrderedJson cj;
    cj["id"] = c.id.str();
    cj["label"] = c.label;
    cj["kind"] = to_string(c.kind);
    cj["initial"] = c.initial;
    if (c.submodel && c.submodel->model) {
      OrderedJson sj;
      sj["target"] = c.submodel->target.str();
      sj["model"] = model_to_json(*c.submodel->model, false);
      cj["submodel"] = std::move(sj);
    }
    concepts.push_back(std::move(cj));
  }
  j["concepts"] = std::move(concepts);
  auto edges = OrderedJson::array();
  for (const auto& e : m.edges) {
    OrderedJson ej;
    ej["source"] = e.source.str();
    ej["target"] = e.target.str();
    ej["weight"] = e.weight;
    edges.push_back(std::move(ej));
  }
  j["edges"] = std::move(edges);
  auto md = OrderedJson::object();
  for (const auto& [k, v] : m.metadata) md[k] = v;  // std::map: sorted
  j["metadata"] = std::move(md);
  return j;
}

inline std::string dump(const OrderedJson& j) { return j.dump(2) + "\n"; }

}  // namespace detail

// ---- models ----------------------------------------------------------------

/// Parses a model document without running validate_model. Throws on
/// syntax and schema errors only.
inline FcmModel parse_model_document(std::string_view bytes) {
  return detail::model_from_json(detail::parse_json(bytes), "", true);
}

/// Parses and validates a model document.
inline FcmModel load_model(std::string_view bytes) {
  auto m = parse_model_document(bytes);
  require_valid(m);
  return m;
}

inline OrderedJson model_to_json(const FcmModel& model) { return detail::model_to_json(model, true); }

/// Canonical serialization; structurally equal models give identical bytes.
inline std::string save_model(const FcmModel& model) { return detail::dump(model_to_json(model)); }

// ---- scenarios -------------------------------------------------------------

namespace detail {

inline ClampMap clamp_map_from_json(const Json& j, const std::string& path, const FcmModel& model) {
  ClampMap out;
  expect_object(j, path);
  for (const auto& [key, value] : j.items()) {
    const auto vp = path + "/" + key;
    ConceptId id(key);
    if (!model.index_of(id)) throw FcmError("unknown_concept", "unknown concept '" + key + "'", vp);
    const double v = get_number(value, vp);
    if (!in_range(model.range, v))
      throw FcmError("value_out_of_range", "value " + value.dump() + " for '" + key +
                                               "' outside the model range", vp);
    out.emplace(std::move(id), v);
  }
  return out;
}

inline Scenario scenario_from_json(const Json& j, const FcmModel& model) {
  expect_object(j, "");
  reject_unknown(j, "", {"name", "clamps", "initial_overrides"});
  Scenario s;
  if (j.contains("name")) s.name = get_string(j["name"], "/name");
  if (j.contains("clamps")) s.clamps = clamp_map_from_json(j["clamps"], "/clamps", model);
  if (j.contains("initial_overrides"))
    s.initial_overrides = clamp_map_from_json(j["initial_overrides"], "/initial_overrides", model);
  return s;
}

}  // namespace detail

inline Scenario load_scenario(std::string_view bytes, const FcmModel& model) {
  return detail::scenario_from_json(detail::parse_json(bytes), model);
}

inline OrderedJson scenario_to_json(const Scenario& s) {
  OrderedJson j;
  j["name"] = s.name;
  auto clamps = OrderedJson::object();
  for (const auto& [id, v] : s.clamps) clamps[id.str()] = v;
  auto overrides = OrderedJson::object();
  for (const auto& [id, v] : s.initial_overrides) overrides[id.str()] = v;
  j["clamps"] = std::move(clamps);
  j["initial_overrides"] = std::move(overrides);
  return j;
}

inline std::string save_scenario(const Scenario& s) { return detail::dump(scenario_to_json(s)); }

// ---- simulation configs ----------------------------------------------------

/// Config object { k1, k2, threshold: { kind, steepness }, epsilon,
/// max_iters, cycle_window, quantization }; absent fields take the range
/// defaults. The result is validated against `range`.
inline SimulationConfig config_from_json(const Json& j, Range range) {
  using namespace detail;
  SimulationConfig c = SimulationConfig::defaults_for(range);
  if (j.is_null()) return c;
  expect_object(j, "/config");
  reject_unknown(j, "/config",
                 {"k1", "k2", "threshold", "epsilon", "max_iters", "cycle_window", "quantization"});
  if (j.contains("k1")) c.k1 = get_number(j["k1"], "/config/k1");
  if (j.contains("k2")) c.k2 = get_number(j["k2"], "/config/k2");
  if (j.contains("epsilon")) c.epsilon = get_number(j["epsilon"], "/config/epsilon");
  if (j.contains("quantization")) c.quantization = get_number(j["quantization"], "/config/quantization");
  auto int_field = [&](const char* name, int& out) {
    if (!j.contains(name)) return;
    const auto v = get_integer(j[name], std::string("/config/") + name);
    if (v < 0 || v > 100'000'000) schema_error(std::string("/config/") + name, "integer out of bounds");
    out = static_cast<int>(v);
  };
  int_field("max_iters", c.max_iters);
  int_field("cycle_window", c.cycle_window);
  if (j.contains("threshold")) {
    const auto& t = j["threshold"];
    expect_object(t, "/config/threshold");
    reject_unknown(t, "/config/threshold", {"kind", "steepness"});
    if (t.contains("kind")) {
      auto k = parse_threshold_kind(get_string(t["kind"], "/config/threshold/kind"));
      if (!k) schema_error("/config/threshold/kind", "unknown threshold kind");
      c.threshold.kind = *k;
    }
    if (t.contains("steepness"))
      c.threshold.steepness = get_number(t["steepness"], "/config/threshold/steepness");
  }
  validate_config(c, range);
  return c;
}

inline OrderedJson config_to_json(const SimulationConfig& c) {
  OrderedJson j;
  j["k1"] = c.k1;
  j["k2"] = c.k2;
  j["threshold"] = {{"kind", to_string(c.threshold.kind)}, {"steepness", c.threshold.steepness}};
  j["epsilon"] = c.epsilon;
  j["max_iters"] = c.max_iters;
  j["cycle_window"] = c.cycle_window;
  j["quantization"] = c.quantization;
  return j;
}

// ---- simulation results ----------------------------------------------------

inline OrderedJson result_to_json(const SimulationResult& r) {
  OrderedJson j;
  j["outcome"] = to_string(r.outcome);
  j["iterations"] = r.iterations;
  auto states = OrderedJson::array();
  for (const auto& s : r.trajectory.states) states.push_back(s.values);
  j["trajectory"] = std::move(states);
  return j;
}

inline SimulationResult result_from_json(const Json& j) {
  using namespace detail;
  expect_object(j, "/result");
  SimulationResult r;
  auto o = parse_outcome(get_string(j.value("outcome", Json()), "/result/outcome"));
  if (!o) schema_error("/result/outcome", "unknown outcome");
  r.outcome = *o;
  r.iterations = static_cast<int>(get_integer(j.value("iterations", Json()), "/result/iterations"));
  const auto& states = j.value("trajectory", Json());
  if (!states.is_array()) schema_error("/result/trajectory", "expected an array");
  for (const auto& s : states) r.trajectory.states.push_back({s.get<std::vector<double>>()});
  return r;
}

// ---- trajectory tables -----------------------------------------------------

/// Nine significant digits, locale independent, no negative zero.
inline std::string format_value(double v) {
  if (v == 0.0) v = 0.0;
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 9);
  return std::string(buf, end);
}

/// `t,<id1>,<id2>,...` header, one row per state, then
/// `# outcome=<outcome> iterations=<k>`.
inline std::string export_trajectory(const SimulationResult& result, const FcmModel& model) {
  std::string out = "t";
  for (const auto& c : model.concepts) out += "," + c.id.str();
  out += "\n";
  for (std::size_t t = 0; t < result.trajectory.states.size(); ++t) {
    const auto& s = result.trajectory.states[t];
    if (s.size() != model.size())
      throw FcmError("dimension_mismatch", "trajectory state does not match the model");
    out += std::to_string(t);
    for (double v : s.values) out += "," + format_value(v);
    out += "\n";
  }
  out += "# outcome=" + to_string(result.outcome) + " iterations=" + std::to_string(result.iterations) + "\n";
  return out;
}

// ---- indicator tables ------------------------------------------------------

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::optional<double> parse_double(std::string_view s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

}  // namespace detail

/// Two-column `indicator,value` table. An optional `indicator,value` header
/// line and blank lines are skipped.
inline std::map<std::string, double> load_indicators(std::string_view bytes) {
  std::map<std::string, double> out;
  std::size_t row = 0;
  while (!bytes.empty()) {
    const auto nl = bytes.find('\n');
    auto line = detail::trim(bytes.substr(0, nl));
    bytes = nl == std::string_view::npos ? std::string_view{} : bytes.substr(nl + 1);
    ++row;
    const auto where = "row " + std::to_string(row);
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string_view::npos || line.find(',', comma + 1) != std::string_view::npos)
      throw FcmError("malformed_row", "expected two comma-separated columns", where);
    const auto id = detail::trim(line.substr(0, comma));
    const auto value = detail::trim(line.substr(comma + 1));
    if (row == 1 && id == "indicator" && value == "value") continue;
    if (id.empty()) throw FcmError("malformed_row", "empty indicator id", where);
    auto v = detail::parse_double(value);
    if (!v || !std::isfinite(*v))
      throw FcmError("non_numeric", "value '" + std::string(value) + "' is not a number", where);
    if (!out.emplace(std::string(id), *v).second)
      throw FcmError("duplicate_indicator", "duplicate indicator '" + std::string(id) + "'", where);
  }
  return out;
}

// ---- analysis renderings ---------------------------------------------------

namespace detail {

inline OrderedJson matrix_to_json(const SquareMatrix& m) {
  auto rows = OrderedJson::array();
  for (std::size_t i = 0; i < m.size(); ++i) {
    auto row = OrderedJson::array();
    for (std::size_t j = 0; j < m.size(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace detail

/// Closure plus derived report; rows index the influencing concept.
inline OrderedJson influence_to_json(const InfluenceMatrix& m, const InfluenceReport& r) {
  OrderedJson j;
  auto ids = OrderedJson::array();
  for (const auto& c : r.concepts) ids.push_back(c.str());
  j["concepts"] = std::move(ids);
  j["positive"] = detail::matrix_to_json(m.positive);
  j["negative"] = detail::matrix_to_json(m.negative);
  j["influence"] = detail::matrix_to_json(r.influence);
  j["consonance"] = detail::matrix_to_json(r.consonance);
  j["dissonance"] = detail::matrix_to_json(r.dissonance);
  return j;
}

inline OrderedJson stability_to_json(const StabilityReport& r) {
  OrderedJson j;
  j["samples"] = r.samples;
  j["fixed_points"] = r.fixed_points;
  j["fixed_point_fraction"] = r.fixed_point_fraction;
  auto periods = OrderedJson::object();
  for (const auto& [p, n] : r.cycle_periods) periods[std::to_string(p)] = n;
  j["cycle_periods"] = std::move(periods);
  j["non_converged"] = r.non_converged;
  j["spectral_radius_heuristic"] = r.spectral_radius_heuristic;
  return j;
}

inline OrderedJson suggestions_to_json(const std::vector<EditSuggestion>& edits) {
  auto arr = OrderedJson::array();
  for (const auto& e : edits) {
    OrderedJson j;
    j["edit"] = to_string(e.kind);
    j["source"] = e.source.str();
    j["target"] = e.target.str();
    if (e.kind == EditKind::set_weight) j["value"] = e.value;
    j["magnitude_change"] = e.magnitude_change;
    j["resulting_fixed_point_fraction"] = e.resulting_fixed_point_fraction;
    arr.push_back(std::move(j));
  }
  return arr;
}

inline std::string to_document(const OrderedJson& j) { return detail::dump(j); }

// ---- files -----------------------------------------------------------------

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FcmError("io", "cannot open file", path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Writes to a sibling temporary file and renames it over `path`.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FcmError("io", "cannot write file", tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw FcmError("io", "short write", tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw FcmError("io", "rename failed: " + ec.message(), path.string());
}

}  // namespace fcm
