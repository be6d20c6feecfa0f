// fcm/core.hpp
// ----------------------------------------------------------------------------
// Fuzzy cognitive map domain types and the deterministic simulation engine.
//
// A map is a set of concepts with signed edge weights in [-1, 1]. Each
// synchronous step updates every concept i as
//
//     A_i(t) = f( k1 * sum_{j != i} A_j(t-1) * W_ji  +  k2 * A_i(t-1) )
//
// where f squashes the result into the model range. Clamped concepts are
// pinned to their clamp value at t = 0 and after every step.
//
// Everything here is a pure function over immutable values; independent
// simulations may run concurrently.
// ----------------------------------------------------------------------------
#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "fcm/error.hpp"

namespace fcm {

// ---- identifiers and enums -------------------------------------------------

/// Concept identifier. Validity (nonempty, no whitespace) is checked by
/// validate_model rather than on construction so that broken documents
/// can still be reported in full.
class ConceptId {
 public:
  ConceptId() = default;
  explicit ConceptId(std::string token) : token_(std::move(token)) {}

  const std::string& str() const noexcept { return token_; }

  friend auto operator<=>(const ConceptId&, const ConceptId&) = default;

 private:
  std::string token_;
};

enum class Range { bipolar, unipolar };

enum class ConceptKind { target, variable, ordinary };

enum class ThresholdKind { clamp, tanh, logistic, bivalent, trivalent };

constexpr double range_lower(Range r) noexcept { return r == Range::bipolar ? -1.0 : 0.0; }
constexpr double range_upper(Range) noexcept { return 1.0; }
constexpr double range_midpoint(Range r) noexcept { return r == Range::bipolar ? 0.0 : 0.5; }

inline bool in_range(Range r, double v) noexcept {
  return v >= range_lower(r) && v <= range_upper(r);  // false for NaN
}

/// Linear map of a value between the two ranges (identity when equal).
inline double convert_range(double v, Range from, Range to) noexcept {
  if (from == to) return v;
  return from == Range::unipolar ? 2.0 * v - 1.0 : (v + 1.0) / 2.0;
}

inline std::string_view to_string(Range r) noexcept {
  return r == Range::bipolar ? "bipolar" : "unipolar";
}

inline std::string_view to_string(ConceptKind k) noexcept {
  switch (k) {
    case ConceptKind::target: return "target";
    case ConceptKind::variable: return "variable";
    case ConceptKind::ordinary: return "ordinary";
  }
  return "ordinary";
}

inline std::string_view to_string(ThresholdKind k) noexcept {
  switch (k) {
    case ThresholdKind::clamp: return "clamp";
    case ThresholdKind::tanh: return "tanh";
    case ThresholdKind::logistic: return "logistic";
    case ThresholdKind::bivalent: return "bivalent";
    case ThresholdKind::trivalent: return "trivalent";
  }
  return "clamp";
}

inline std::optional<Range> parse_range(std::string_view s) {
  if (s == "bipolar") return Range::bipolar;
  if (s == "unipolar") return Range::unipolar;
  return std::nullopt;
}

inline std::optional<ConceptKind> parse_concept_kind(std::string_view s) {
  if (s == "target") return ConceptKind::target;
  if (s == "variable") return ConceptKind::variable;
  if (s == "ordinary") return ConceptKind::ordinary;
  return std::nullopt;
}

inline std::optional<ThresholdKind> parse_threshold_kind(std::string_view s) {
  if (s == "clamp") return ThresholdKind::clamp;
  if (s == "tanh") return ThresholdKind::tanh;
  if (s == "logistic") return ThresholdKind::logistic;
  if (s == "bivalent") return ThresholdKind::bivalent;
  if (s == "trivalent") return ThresholdKind::trivalent;
  return std::nullopt;
}

// ---- model -----------------------------------------------------------------

struct FcmModel;

/// Nested map that refines a concept. The target concept's resolved value
/// becomes the parent concept's initial value (see flatten_hierarchy).
struct Submodel {
  std::shared_ptr<const FcmModel> model;
  ConceptId target;
};

bool operator==(const Submodel& a, const Submodel& b);

struct Concept {
  ConceptId id;
  std::string label;
  ConceptKind kind = ConceptKind::ordinary;
  double initial = 0.0;
  std::optional<Submodel> submodel;

  friend bool operator==(const Concept&, const Concept&) = default;
};

struct Edge {
  ConceptId source;
  ConceptId target;
  double weight = 0.0;

  friend bool operator==(const Edge&, const Edge&) = default;
};

struct FcmModel {
  std::string name;
  Range range = Range::bipolar;
  std::vector<Concept> concepts;
  std::vector<Edge> edges;
  std::map<std::string, std::string> metadata;

  std::size_t size() const noexcept { return concepts.size(); }

  std::optional<std::size_t> index_of(const ConceptId& id) const {
    for (std::size_t i = 0; i < concepts.size(); ++i)
      if (concepts[i].id == id) return i;
    return std::nullopt;
  }

  const Edge* find_edge(const ConceptId& source, const ConceptId& target) const {
    for (const auto& e : edges)
      if (e.source == source && e.target == target) return &e;
    return nullptr;
  }

  friend bool operator==(const FcmModel&, const FcmModel&) = default;
};

inline bool operator==(const Submodel& a, const Submodel& b) {
  if (a.target != b.target) return false;
  if (a.model == b.model) return true;
  if (!a.model || !b.model) return false;
  return *a.model == *b.model;
}

// ---- simulation values -----------------------------------------------------

struct ThresholdSpec {
  ThresholdKind kind = ThresholdKind::tanh;
  double steepness = 1.0;

  friend bool operator==(const ThresholdSpec&, const ThresholdSpec&) = default;
};

struct SimulationConfig {
  double k1 = 1.0;
  double k2 = 1.0;
  ThresholdSpec threshold{};
  double epsilon = 1e-4;
  int max_iters = 200;
  int cycle_window = 50;
  double quantization = 1e-9;

  /// Defaults for a range: tanh for bipolar maps, logistic for unipolar.
  static SimulationConfig defaults_for(Range r) {
    SimulationConfig c;
    c.threshold.kind = r == Range::bipolar ? ThresholdKind::tanh : ThresholdKind::logistic;
    return c;
  }

  friend bool operator==(const SimulationConfig&, const SimulationConfig&) = default;
};

struct ActivationState {
  std::vector<double> values;

  std::size_t size() const noexcept { return values.size(); }
  friend bool operator==(const ActivationState&, const ActivationState&) = default;
};

using ClampMap = std::map<ConceptId, double>;

struct Scenario {
  std::string name;
  ClampMap clamps;
  ClampMap initial_overrides;

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

struct Trajectory {
  std::vector<ActivationState> states;

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

struct Outcome {
  enum class Kind { fixed_point, limit_cycle, max_iters_reached };
  Kind kind = Kind::max_iters_reached;
  int period = 0;  // only meaningful for limit_cycle

  static Outcome fixed_point() { return {Kind::fixed_point, 0}; }
  static Outcome limit_cycle(int p) { return {Kind::limit_cycle, p}; }
  static Outcome max_iters_reached() { return {Kind::max_iters_reached, 0}; }

  friend bool operator==(const Outcome&, const Outcome&) = default;
};

/// "FixedPoint", "LimitCycle:<p>" or "MaxItersReached".
inline std::string to_string(const Outcome& o) {
  switch (o.kind) {
    case Outcome::Kind::fixed_point: return "FixedPoint";
    case Outcome::Kind::limit_cycle: return "LimitCycle:" + std::to_string(o.period);
    case Outcome::Kind::max_iters_reached: return "MaxItersReached";
  }
  return "MaxItersReached";
}

inline std::optional<Outcome> parse_outcome(std::string_view s) {
  if (s == "FixedPoint") return Outcome::fixed_point();
  if (s == "MaxItersReached") return Outcome::max_iters_reached();
  constexpr std::string_view prefix = "LimitCycle:";
  if (s.substr(0, prefix.size()) == prefix) {
    auto digits = s.substr(prefix.size());
    if (digits.empty() || digits.size() > 9) return std::nullopt;
    int p = 0;
    for (char ch : digits) {
      if (ch < '0' || ch > '9') return std::nullopt;
      p = p * 10 + (ch - '0');
    }
    if (p < 2) return std::nullopt;
    return Outcome::limit_cycle(p);
  }
  return std::nullopt;
}

struct SimulationResult {
  Trajectory trajectory;
  Outcome outcome;
  int iterations = 0;

  const ActivationState& final_state() const { return trajectory.states.back(); }
  friend bool operator==(const SimulationResult&, const SimulationResult&) = default;
};

// ---- validation ------------------------------------------------------------

namespace detail {

inline bool has_whitespace(std::string_view s) {
  return std::any_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

inline std::string edge_name(const Edge& e) { return e.source.str() + "->" + e.target.str(); }

inline void validate_into(const FcmModel& model, const std::string& prefix,
                          std::vector<const FcmModel*>& stack, std::vector<Violation>& out) {
  auto add = [&](std::string rule, std::string where, std::string message) {
    out.push_back({std::move(rule), prefix + where, std::move(message)});
  };

  if (model.concepts.empty()) add("empty_model", "", "model has no concepts");

  std::unordered_set<std::string> ids;
  for (const auto& c : model.concepts) {
    const auto& id = c.id.str();
    if (id.empty()) {
      add("empty_concept_id", id, "concept id is empty");
    } else if (has_whitespace(id)) {
      add("concept_id_whitespace", id, "concept id contains whitespace");
    }
    if (!ids.insert(id).second) add("duplicate_concept", id, "duplicate concept id");
    if (!in_range(model.range, c.initial))
      add("initial_out_of_range", id, "initial value outside the model range");

    if (c.submodel) {
      const auto& sub = *c.submodel;
      if (!sub.model) {
        add("submodel_missing", id, "submodel reference is empty");
        continue;
      }
      if (std::find(stack.begin(), stack.end(), sub.model.get()) != stack.end()) {
        add("cyclic_hierarchy", id, "submodel transitively contains its parent");
        continue;
      }
      auto t = sub.model->index_of(sub.target);
      if (!t) {
        add("submodel_target_missing", id, "submodel target '" + sub.target.str() + "' not found");
      } else if (sub.model->concepts[*t].kind != ConceptKind::target) {
        add("submodel_target_kind", id, "submodel target '" + sub.target.str() + "' is not kind=target");
      }
      stack.push_back(sub.model.get());
      validate_into(*sub.model, prefix + id + "/", stack, out);
      stack.pop_back();
    }
  }

  std::set<std::pair<std::string, std::string>> pairs;
  for (const auto& e : model.edges) {
    const auto name = edge_name(e);
    if (!ids.count(e.source.str()) || !ids.count(e.target.str()))
      add("dangling_edge", name, "dangling edge: endpoint not a concept of the model");
    if (e.source == e.target) add("self_edge", name, "self-edge forbidden");
    if (!(e.weight >= -1.0 && e.weight <= 1.0)) add("weight_out_of_range", name, "weight out of range");
    if (!pairs.emplace(e.source.str(), e.target.str()).second)
      add("duplicate_edge", name, "duplicate edge for ordered pair");
  }
}

}  // namespace detail

/// Checks every model invariant, recursing into submodels.
/// Returns the full list of violations; empty means the model is valid.
inline std::vector<Violation> validate_model(const FcmModel& model) {
  std::vector<Violation> out;
  std::vector<const FcmModel*> stack{&model};
  detail::validate_into(model, "", stack, out);
  return out;
}

inline void require_valid(const FcmModel& model) {
  auto v = validate_model(model);
  if (!v.empty()) {
    auto first = v.front();
    throw FcmError(first.rule, first.message, first.where, std::move(v));
  }
}

// ---- threshold -------------------------------------------------------------

/// Throws `incompatible_threshold` if `spec` cannot squash into `range`.
inline void check_threshold(const ThresholdSpec& spec, Range range) {
  if (!(spec.steepness > 0.0) || !std::isfinite(spec.steepness))
    throw FcmError("invalid_config", "threshold steepness must be positive");
  const bool bipolar = range == Range::bipolar;
  switch (spec.kind) {
    case ThresholdKind::clamp: return;
    case ThresholdKind::tanh:
    case ThresholdKind::bivalent:
    case ThresholdKind::trivalent:
      if (!bipolar)
        throw FcmError("incompatible_threshold",
                       std::string(to_string(spec.kind)) + " threshold requires a bipolar model");
      return;
    case ThresholdKind::logistic:
      if (bipolar)
        throw FcmError("incompatible_threshold", "logistic threshold requires a unipolar model");
      return;
  }
}

namespace detail {

inline double squash(const ThresholdSpec& spec, Range range, double x) noexcept {
  switch (spec.kind) {
    case ThresholdKind::clamp: return std::clamp(x, range_lower(range), range_upper(range));
    case ThresholdKind::tanh: return std::tanh(spec.steepness * x);
    case ThresholdKind::logistic: return 1.0 / (1.0 + std::exp(-spec.steepness * x));
    case ThresholdKind::bivalent: return x < 0.0 ? -1.0 : 1.0;
    case ThresholdKind::trivalent:
      if (std::abs(x) < 0.5) return 0.0;
      return x < 0.0 ? -1.0 : 1.0;
  }
  return x;
}

}  // namespace detail

inline double apply_threshold(const ThresholdSpec& spec, Range range, double x) {
  check_threshold(spec, range);
  return detail::squash(spec, range, x);
}

inline void validate_config(const SimulationConfig& c, Range range) {
  auto bad = [](const char* what) { throw FcmError("invalid_config", what); };
  if (!(c.k1 >= 0.0) || !std::isfinite(c.k1)) bad("k1 must be a finite value >= 0");
  if (!(c.k2 >= 0.0) || !std::isfinite(c.k2)) bad("k2 must be a finite value >= 0");
  if (!(c.epsilon > 0.0)) bad("epsilon must be > 0");
  if (c.max_iters < 1) bad("max_iters must be >= 1");
  if (c.cycle_window < 2) bad("cycle_window must be >= 2");
  if (!(c.quantization > 0.0) || !std::isfinite(c.quantization)) bad("quantization must be > 0");
  check_threshold(c.threshold, range);
}

// ---- engine ----------------------------------------------------------------

namespace detail {

/// Index-resolved form of a model: incoming edge lists per concept,
/// ordered by source index.
struct CompiledMap {
  struct Incoming {
    std::size_t source;
    double weight;
  };
  Range range = Range::bipolar;
  std::vector<std::vector<Incoming>> incoming;

  explicit CompiledMap(const FcmModel& model) : range(model.range), incoming(model.size()) {
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < model.size(); ++i) index.emplace(model.concepts[i].id.str(), i);
    for (const auto& e : model.edges) {
      auto s = index.find(e.source.str());
      auto t = index.find(e.target.str());
      if (s == index.end() || t == index.end())
        throw FcmError("dangling_edge", "dangling edge", edge_name(e));
      if (s->second == t->second) throw FcmError("self_edge", "self-edge forbidden", edge_name(e));
      incoming[t->second].push_back({s->second, e.weight});
    }
    for (auto& in : incoming)
      std::stable_sort(in.begin(), in.end(),
                       [](const Incoming& a, const Incoming& b) { return a.source < b.source; });
  }

  std::size_t size() const noexcept { return incoming.size(); }
};

using ResolvedClamps = std::vector<std::optional<double>>;

inline ResolvedClamps resolve_clamps(const FcmModel& model, const ClampMap& clamps) {
  ResolvedClamps out(model.size());
  for (const auto& [id, value] : clamps) {
    auto i = model.index_of(id);
    if (!i) throw FcmError("unknown_concept", "unknown concept '" + id.str() + "'", id.str());
    if (!in_range(model.range, value))
      throw FcmError("value_out_of_range", "clamp value outside the model range", id.str());
    out[*i] = value;
  }
  return out;
}

inline void step_into(const CompiledMap& map, const SimulationConfig& config,
                      const ResolvedClamps& clamps, const std::vector<double>& prev,
                      std::vector<double>& next) {
  const std::size_t n = map.size();
  next.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (clamps[i]) {
      next[i] = *clamps[i];
      continue;
    }
    double sum = 0.0;
    for (const auto& in : map.incoming[i]) sum += prev[in.source] * in.weight;
    next[i] = squash(config.threshold, map.range, config.k1 * sum + config.k2 * prev[i]);
  }
}

inline double max_norm_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline std::vector<double> quantize(const std::vector<double>& v, double q) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::round(v[i] / q);
  return out;
}

}  // namespace detail

/// One synchronous update of every concept. Clamped concepts take their
/// clamp value regardless of the computed update.
inline ActivationState step(const FcmModel& model, const ActivationState& state,
                            const SimulationConfig& config, const ClampMap& clamps = {}) {
  if (state.size() != model.size())
    throw FcmError("dimension_mismatch", "state has " + std::to_string(state.size()) +
                                             " values, model has " + std::to_string(model.size()) +
                                             " concepts");
  validate_config(config, model.range);
  const detail::CompiledMap map(model);
  const auto resolved = detail::resolve_clamps(model, clamps);
  ActivationState next;
  detail::step_into(map, config, resolved, state.values, next.values);
  return next;
}

/// State at t = 0: concept initials, then initial overrides, then clamps.
inline ActivationState initial_state(const FcmModel& model, const Scenario& scenario) {
  ActivationState s;
  s.values.reserve(model.size());
  for (const auto& c : model.concepts) s.values.push_back(c.initial);
  for (const auto& [id, value] : scenario.initial_overrides) {
    auto i = model.index_of(id);
    if (!i) throw FcmError("unknown_concept", "unknown concept '" + id.str() + "'", id.str());
    if (!in_range(model.range, value))
      throw FcmError("value_out_of_range", "initial override outside the model range", id.str());
    s.values[*i] = value;
  }
  const auto clamps = detail::resolve_clamps(model, scenario.clamps);
  for (std::size_t i = 0; i < clamps.size(); ++i)
    if (clamps[i]) s.values[i] = *clamps[i];
  return s;
}

namespace detail {

inline SimulationResult run(const CompiledMap& map, const SimulationConfig& config,
                            const ResolvedClamps& clamps, ActivationState start) {
  SimulationResult result;
  auto& states = result.trajectory.states;
  states.reserve(static_cast<std::size_t>(std::min(config.max_iters, 1024)) + 1);
  std::vector<std::vector<double>> quantized;
  quantized.push_back(quantize(start.values, config.quantization));
  states.push_back(std::move(start));

  for (int t = 1; t <= config.max_iters; ++t) {
    ActivationState next;
    step_into(map, config, clamps, states.back().values, next.values);
    const double change = max_norm_diff(next.values, states.back().values);
    quantized.push_back(quantize(next.values, config.quantization));
    states.push_back(std::move(next));
    result.iterations = t;

    if (change <= config.epsilon) {
      result.outcome = Outcome::fixed_point();
      return result;
    }
    const auto& q = quantized.back();
    for (int p = 2; p <= config.cycle_window && p <= t; ++p) {
      if (quantized[static_cast<std::size_t>(t - p)] == q) {
        result.outcome = Outcome::limit_cycle(p);
        return result;
      }
    }
  }
  result.outcome = Outcome::max_iters_reached();
  return result;
}

}  // namespace detail

/// Iterates `step` from the scenario's initial state until a fixed point
/// (max-norm change <= epsilon), a quantized recurrence with minimal period
/// p in [2, cycle_window], or max_iters, whichever comes first.
inline SimulationResult simulate(const FcmModel& model, const SimulationConfig& config,
                                 const Scenario& scenario = {}) {
  require_valid(model);
  validate_config(config, model.range);
  const detail::CompiledMap map(model);
  const auto clamps = detail::resolve_clamps(model, scenario.clamps);
  return detail::run(map, config, clamps, initial_state(model, scenario));
}

// ---- hierarchy -------------------------------------------------------------

namespace detail {

inline FcmModel flatten(const FcmModel& model, const SimulationConfig& config,
                        std::vector<const FcmModel*>& stack) {
  FcmModel out = model;
  for (auto& c : out.concepts) {
    if (!c.submodel) continue;
    const auto sub = c.submodel->model;
    if (!sub) throw FcmError("submodel_missing", "submodel reference is empty", c.id.str());
    if (std::find(stack.begin(), stack.end(), sub.get()) != stack.end())
      throw FcmError("cyclic_hierarchy", "submodel transitively contains its parent", c.id.str());

    stack.push_back(sub.get());
    const FcmModel resolved = flatten(*sub, config, stack);
    stack.pop_back();

    auto t = resolved.index_of(c.submodel->target);
    if (!t)
      throw FcmError("submodel_target_missing",
                     "submodel target '" + c.submodel->target.str() + "' not found", c.id.str());
    const auto result = simulate(resolved, config);
    if (result.outcome.kind != Outcome::Kind::fixed_point)
      throw FcmError("unresolved_hierarchy",
                     "submodel of '" + c.id.str() + "' ended with " + to_string(result.outcome),
                     c.id.str());
    c.initial = convert_range(result.final_state().values[*t], resolved.range, model.range);
    c.submodel.reset();
  }
  return out;
}

}  // namespace detail

/// Resolves nested submodels bottom-up: each submodel is simulated to a
/// fixed point with `config` and its target value becomes the parent
/// concept's initial value. The result carries no submodel references.
inline FcmModel flatten_hierarchy(const FcmModel& model, const SimulationConfig& config) {
  std::vector<const FcmModel*> stack{&model};
  return detail::flatten(model, config, stack);
}

inline bool has_submodels(const FcmModel& model) {
  return std::any_of(model.concepts.begin(), model.concepts.end(),
                     [](const Concept& c) { return c.submodel.has_value(); });
}

}  // namespace fcm
