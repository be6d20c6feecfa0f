// fcm/templates.hpp
// ----------------------------------------------------------------------------
// Standard socio-economic development (SED) template map, municipality
// archetypes and template instantiation from indicator profiles.
//
// Three elements of the standard map are fixed in code:
//   quality_of_life  kind=target    (the planning objective)
//   production       kind=variable  (varies with territory specialization)
//   crime            kind=ordinary, edge crime -> quality_of_life, weight < 0
// Everything else comes from the bundled, editable template file
// (data/sed_template.fcm.json), whose extra factors are illustrative.
// ----------------------------------------------------------------------------
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fcm/core.hpp"
#include "fcm/io.hpp"

#ifndef FCM_DEFAULT_TEMPLATE_FILE
#define FCM_DEFAULT_TEMPLATE_FILE "data/sed_template.fcm.json"
#endif

namespace fcm {

inline const ConceptId kQualityOfLife{"quality_of_life"};
inline const ConceptId kProduction{"production"};
inline const ConceptId kCrime{"crime"};
inline constexpr double kCrimeWeight = -0.7;

/// Bundled template location: $FCM_TEMPLATE_FILE if set, else the path
/// baked in at build time.
inline std::filesystem::path default_template_path() {
  if (const char* env = std::getenv("FCM_TEMPLATE_FILE"); env && *env) return env;
  return FCM_DEFAULT_TEMPLATE_FILE;
}

namespace detail {

[[noreturn]] inline void malformed_template(const std::string& what) {
  throw FcmError("template_malformed", what);
}

inline void ensure_anchor(FcmModel& m, const ConceptId& id, ConceptKind kind, std::string label,
                          std::size_t position) {
  if (auto i = m.index_of(id)) {
    if (m.concepts[*i].kind != kind)
      malformed_template("'" + id.str() + "' must have kind " + std::string(to_string(kind)));
    return;
  }
  Concept c{id, std::move(label), kind, range_midpoint(m.range), std::nullopt};
  m.concepts.insert(m.concepts.begin() + static_cast<std::ptrdiff_t>(std::min(position, m.size())), c);
}

}  // namespace detail

/// Loads the template file and enforces the fixed elements; missing fixed
/// concepts or the crime edge are inserted with their defaults.
inline FcmModel builtin_sed_template(const std::filesystem::path& file) {
  FcmModel m;
  try {
    m = load_model(read_file(file));
  } catch (const FcmError& e) {
    throw FcmError("template_malformed", std::string("bundled template: ") + e.what(), file.string());
  }
  if (m.range != Range::bipolar) detail::malformed_template("standard template must be bipolar");

  detail::ensure_anchor(m, kQualityOfLife, ConceptKind::target, "Quality of life", 0);
  detail::ensure_anchor(m, kProduction, ConceptKind::variable, "Production", 1);
  detail::ensure_anchor(m, kCrime, ConceptKind::ordinary, "Crime", 2);
  for (const auto& c : m.concepts)
    if (c.kind == ConceptKind::target && c.id != kQualityOfLife)
      detail::malformed_template("only quality_of_life may be kind=target, found '" + c.id.str() + "'");

  if (const Edge* e = m.find_edge(kCrime, kQualityOfLife)) {
    if (!(e->weight < 0.0)) detail::malformed_template("crime -> quality_of_life must be negative");
  } else {
    m.edges.push_back({kCrime, kQualityOfLife, kCrimeWeight});
  }
  require_valid(m);
  return m;
}

inline FcmModel builtin_sed_template() { return builtin_sed_template(default_template_path()); }

// ---- indicators and archetypes ---------------------------------------------

struct IndicatorProfile {
  std::map<std::string, double> values;  // normalized to [0, 1]

  friend bool operator==(const IndicatorProfile&, const IndicatorProfile&) = default;
};

struct Archetype {
  std::string id;
  std::string label;
  IndicatorProfile centroid;
  FcmModel model;
};

struct TemplateLibrary {
  std::vector<Archetype> archetypes;
};

struct ArchetypeMatch {
  std::string id;
  double distance = 0.0;
};

inline void validate_profile(const IndicatorProfile& p) {
  for (const auto& [id, v] : p.values) {
    if (id.empty()) throw FcmError("empty_indicator_id", "indicator id is empty");
    if (!(v >= 0.0 && v <= 1.0))
      throw FcmError("indicator_out_of_range", "indicator value outside [0, 1]", id);
  }
}

/// (raw - min) / (max - min) clipped to [0, 1]; 0.5 when min == max.
inline IndicatorProfile normalize_indicators(const std::map<std::string, double>& raw,
                                             const std::map<std::string, std::pair<double, double>>& bounds) {
  IndicatorProfile p;
  for (const auto& [id, value] : raw) {
    auto b = bounds.find(id);
    if (b == bounds.end()) throw FcmError("missing_bounds", "no bounds for indicator", id);
    const auto [lo, hi] = b->second;
    if (!(lo <= hi)) throw FcmError("invalid_bounds", "min > max", id);
    p.values[id] = lo == hi ? 0.5 : std::clamp((value - lo) / (hi - lo), 0.0, 1.0);
  }
  return p;
}

/// Nearest centroid by Euclidean distance over shared indicators, divided
/// by sqrt(number of shared indicators). Ties go to the smaller id.
inline ArchetypeMatch assign_archetype(const IndicatorProfile& profile, const TemplateLibrary& library) {
  if (library.archetypes.empty()) throw FcmError("empty_library", "template library is empty");
  validate_profile(profile);
  std::optional<ArchetypeMatch> best;
  for (const auto& a : library.archetypes) {
    double sum = 0.0;
    std::size_t shared = 0;
    for (const auto& [id, v] : a.centroid.values) {
      auto it = profile.values.find(id);
      if (it == profile.values.end()) continue;
      sum += (it->second - v) * (it->second - v);
      ++shared;
    }
    if (shared == 0) throw FcmError("no_indicator_overlap", "profile shares no indicator with archetype", a.id);
    const double d = std::sqrt(sum) / std::sqrt(static_cast<double>(shared));
    if (!best || d < best->distance || (d == best->distance && a.id < best->id)) best = {a.id, d};
  }
  return *best;
}

/// Copies the archetype's template and sets each bound concept's initial
/// value from its indicator (bipolar: 2v - 1, unipolar: v).
inline FcmModel instantiate_template(const Archetype& archetype, const IndicatorProfile& profile,
                                     const std::map<ConceptId, std::string>& binding) {
  validate_profile(profile);
  FcmModel m = archetype.model;
  for (const auto& [concept_id, indicator] : binding) {
    auto i = m.index_of(concept_id);
    if (!i) throw FcmError("dangling_binding", "concept not in template", concept_id.str());
    auto v = profile.values.find(indicator);
    if (v == profile.values.end()) throw FcmError("dangling_binding", "indicator not in profile", indicator);
    m.concepts[*i].initial = convert_range(v->second, Range::unipolar, m.range);
  }
  require_valid(m);
  return m;
}

/// Illustrative archetypes built on the standard template. Centroids use
/// indicators normalized to [0, 1].
inline TemplateLibrary builtin_library(const FcmModel& sed_template) {
  auto variant = [&](std::string production_label, std::map<std::string, double> initials) {
    FcmModel m = sed_template;
    if (auto i = m.index_of(kProduction)) m.concepts[*i].label = std::move(production_label);
    for (const auto& [id, v] : initials)
      if (auto i = m.index_of(ConceptId(id))) m.concepts[*i].initial = v;
    return m;
  };
  TemplateLibrary lib;
  lib.archetypes.push_back(
      {"agrarian", "Agrarian settlement",
       {{{"population", 0.2}, {"industry_share", 0.15}, {"agriculture_share", 0.8}, {"income", 0.3},
         {"climate_severity", 0.4}}},
       variant("Agricultural production", {{"production", 0.1}, {"employment", -0.1}})});
  lib.archetypes.push_back(
      {"extractive", "Resource-extraction town",
       {{{"population", 0.35}, {"industry_share", 0.7}, {"agriculture_share", 0.1}, {"income", 0.6},
         {"climate_severity", 0.8}}},
       variant("Mining output", {{"production", 0.4}, {"ecology", -0.3}})});
  lib.archetypes.push_back(
      {"urban_industrial", "Urban industrial centre",
       {{{"population", 0.85}, {"industry_share", 0.6}, {"agriculture_share", 0.05}, {"income", 0.7},
         {"climate_severity", 0.3}}},
       variant("Manufacturing output", {{"production", 0.5}, {"infrastructure", 0.3}})});
  for (auto& a : lib.archetypes) a.model.name = a.label + " template";
  return lib;
}

inline OrderedJson library_to_json(const TemplateLibrary& lib) {
  OrderedJson j;
  auto arr = OrderedJson::array();
  for (const auto& a : lib.archetypes) {
    OrderedJson aj;
    aj["id"] = a.id;
    aj["label"] = a.label;
    auto centroid = OrderedJson::object();
    for (const auto& [k, v] : a.centroid.values) centroid[k] = v;
    aj["centroid"] = std::move(centroid);
    aj["template"] = model_to_json(a.model);
    arr.push_back(std::move(aj));
  }
  j["archetypes"] = std::move(arr);
  return j;
}

}  // namespace fcm
