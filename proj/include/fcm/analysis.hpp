// fcm/analysis.hpp
// ----------------------------------------------------------------------------
// Static analysis of a fuzzy cognitive map:
//  - signed transitive closure (positive / negative influence channels)
//  - pairwise influence, consonance and dissonance
//  - sampled stability assessment plus a spectral-radius heuristic
//  - exhaustive single-edge structural search for more stable maps
//
// Closure uses the doubled-channel max-product convention: a walk's
// strength is the product of its edge magnitudes, its sign the parity of
// negative edges, and walks are aggregated per sign by max.
//
// Stability is operational: the fraction of seeded random starts that
// reach a fixed point. The spectral radius of k1*W is informative only.
// ----------------------------------------------------------------------------
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "fcm/core.hpp"

namespace fcm {

/// Dense row-major n x n matrix.
class SquareMatrix {
 public:
  SquareMatrix() = default;
  explicit SquareMatrix(std::size_t n, double fill = 0.0) : n_(n), data_(n * n, fill) {}

  std::size_t size() const noexcept { return n_; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * n_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * n_ + j]; }
  const std::vector<double>& data() const noexcept { return data_; }
  std::vector<double>& data() noexcept { return data_; }

  friend bool operator==(const SquareMatrix&, const SquareMatrix&) = default;

 private:
  std::size_t n_ = 0;
  std::vector<double> data_;
};

struct InfluenceMatrix {
  std::vector<ConceptId> concepts;
  SquareMatrix positive;  // P
  SquareMatrix negative;  // N

  friend bool operator==(const InfluenceMatrix&, const InfluenceMatrix&) = default;
};

struct InfluenceReport {
  std::vector<ConceptId> concepts;
  SquareMatrix influence;   // signed, in [-1, 1]
  SquareMatrix consonance;  // in [0, 1]
  SquareMatrix dissonance;  // 1 - consonance

  friend bool operator==(const InfluenceReport&, const InfluenceReport&) = default;
};

struct StabilityReport {
  int samples = 0;
  int fixed_points = 0;
  double fixed_point_fraction = 0.0;
  std::map<int, int> cycle_periods;  // period -> count
  int non_converged = 0;
  double spectral_radius_heuristic = 0.0;

  friend bool operator==(const StabilityReport&, const StabilityReport&) = default;
};

enum class EditKind { remove_edge, flip_sign, set_weight };

inline std::string_view to_string(EditKind k) noexcept {
  switch (k) {
    case EditKind::remove_edge: return "remove_edge";
    case EditKind::flip_sign: return "flip_sign";
    case EditKind::set_weight: return "set_weight";
  }
  return "remove_edge";
}

struct EditSuggestion {
  EditKind kind = EditKind::remove_edge;
  ConceptId source;
  ConceptId target;
  double value = 0.0;             // new weight for set_weight, unused otherwise
  double magnitude_change = 0.0;  // |new weight - old weight|, removal counts as weight 0
  double resulting_fixed_point_fraction = 0.0;

  friend bool operator==(const EditSuggestion&, const EditSuggestion&) = default;
};

// ---- closure ---------------------------------------------------------------

/// Least fixpoint of doubled-channel max-product composition, covering
/// walks of length >= 1. Entries never decrease and are bounded by 1, so
/// iteration stops once a pass leaves both channels unchanged.
inline InfluenceMatrix transitive_closure(const FcmModel& model) {
  require_valid(model);
  const std::size_t n = model.size();
  InfluenceMatrix m;
  for (const auto& c : model.concepts) m.concepts.push_back(c.id);
  m.positive = SquareMatrix(n);
  m.negative = SquareMatrix(n);
  for (const auto& e : model.edges) {
    const auto i = *model.index_of(e.source);
    const auto j = *model.index_of(e.target);
    m.positive(i, j) = std::max(e.weight, 0.0);
    m.negative(i, j) = std::max(-e.weight, 0.0);
  }

  const auto& P = m.positive;
  const auto& N = m.negative;
  for (;;) {
    SquareMatrix nextP = P;
    SquareMatrix nextN = N;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < n; ++k) {
        const double pik = P(i, k);
        const double nik = N(i, k);
        if (pik == 0.0 && nik == 0.0) continue;
        for (std::size_t j = 0; j < n; ++j) {
          const double pkj = P(k, j);
          const double nkj = N(k, j);
          nextP(i, j) = std::max({nextP(i, j), pik * pkj, nik * nkj});
          nextN(i, j) = std::max({nextN(i, j), pik * nkj, nik * pkj});
        }
      }
    }
    if (nextP == P && nextN == N) break;
    m.positive = std::move(nextP);
    m.negative = std::move(nextN);
  }
  return m;
}

/// v = dominant channel with sign (0 on a tie), c = |P-N|/(P+N), d = 1-c.
/// No evidence at all (P = N = 0) reads as consonance 0.
inline InfluenceReport influence_report(const InfluenceMatrix& m) {
  const std::size_t n = m.positive.size();
  InfluenceReport r{m.concepts, SquareMatrix(n), SquareMatrix(n), SquareMatrix(n)};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double p = m.positive(i, j);
      const double q = m.negative(i, j);
      r.influence(i, j) = p > q ? p : (q > p ? -q : 0.0);
      const double c = (p + q) > 0.0 ? std::abs(p - q) / (p + q) : 0.0;
      r.consonance(i, j) = c;
      r.dissonance(i, j) = 1.0 - c;
    }
  }
  return r;
}

// ---- spectral heuristic ----------------------------------------------------

/// Largest eigenvalue modulus of k1*W (W_ij = weight of edge i->j).
///
/// Computed by powering the matrix through repeated normalized squaring,
/// rho = lim ||A^(2^m)||^(1/2^m), which also converges when the dominant
/// eigenvalues form a complex pair (plain vector iteration oscillates there).
inline double spectral_radius_heuristic(const FcmModel& model, double k1, double tolerance = 1e-9,
                                        int max_iterations = 10'000) {
  const std::size_t n = model.size();
  SquareMatrix a(n);
  for (const auto& e : model.edges) {
    auto i = model.index_of(e.source);
    auto j = model.index_of(e.target);
    if (i && j) a(*i, *j) = k1 * e.weight;
  }

  auto frobenius = [](const SquareMatrix& m) {
    double s = 0.0;
    for (double v : m.data()) s += v * v;
    return std::sqrt(s);
  };

  double norm = frobenius(a);
  if (norm == 0.0) return 0.0;
  // log ||A^(2^m)|| and the normalized power B = A^(2^m) / ||A^(2^m)||
  double log_norm = std::log(norm);
  double exponent = 1.0;
  SquareMatrix b = a;
  for (double& v : b.data()) v /= norm;
  double estimate = norm;

  // 2^m overflows the exponent's useful precision well before 64 squarings.
  const int cap = std::min(max_iterations, 64);
  for (int m = 0; m < cap; ++m) {
    SquareMatrix sq(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < n; ++k) {
        const double bik = b(i, k);
        if (bik == 0.0) continue;
        for (std::size_t j = 0; j < n; ++j) sq(i, j) += bik * b(k, j);
      }
    const double s = frobenius(sq);
    if (s == 0.0 || !std::isfinite(s)) return 0.0;  // nilpotent
    log_norm = 2.0 * log_norm + std::log(s);
    exponent *= 2.0;
    for (double& v : sq.data()) v /= s;
    b = std::move(sq);
    const double next = std::exp(log_norm / exponent);
    const bool done = std::abs(next - estimate) <= tolerance * std::max(1.0, next);
    estimate = next;
    if (done) break;
  }
  return estimate;
}

// ---- stability -------------------------------------------------------------

namespace detail {

/// Uniform double in [0, 1) from the top 53 bits; portable across
/// standard libraries, unlike std::uniform_real_distribution.
inline double unit_uniform(std::mt19937_64& gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

/// Calls fn(i) for i in [0, count) on up to `threads` workers. Work is
/// split by index so results can be merged in index order.
template <typename Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(count, 1)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (unsigned w = 0; w < threads; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < count; i += threads) fn(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace detail

/// Simulates from `samples` seeded uniform random starts (no clamps) and
/// tallies outcomes. Identical inputs give an identical report for any
/// thread count.
inline StabilityReport stability_report(const FcmModel& model, const SimulationConfig& config,
                                        int samples, std::uint64_t seed, unsigned threads = 1) {
  require_valid(model);
  validate_config(config, model.range);
  if (samples < 1) throw FcmError("invalid_params", "samples must be >= 1");

  const std::size_t n = model.size();
  const double lo = range_lower(model.range);
  const double width = range_upper(model.range) - lo;

  std::mt19937_64 gen(seed);
  std::vector<ActivationState> starts(static_cast<std::size_t>(samples));
  for (auto& s : starts) {
    s.values.resize(n);
    for (auto& v : s.values) v = lo + width * detail::unit_uniform(gen);
  }

  const detail::CompiledMap map(model);
  const detail::ResolvedClamps no_clamps(n);
  std::vector<Outcome> outcomes(starts.size());
  detail::parallel_for(starts.size(), threads, [&](std::size_t i) {
    outcomes[i] = detail::run(map, config, no_clamps, starts[i]).outcome;
  });

  StabilityReport r;
  r.samples = samples;
  for (const auto& o : outcomes) {
    switch (o.kind) {
      case Outcome::Kind::fixed_point: ++r.fixed_points; break;
      case Outcome::Kind::limit_cycle: ++r.cycle_periods[o.period]; break;
      case Outcome::Kind::max_iters_reached: ++r.non_converged; break;
    }
  }
  r.fixed_point_fraction = static_cast<double>(r.fixed_points) / samples;
  r.spectral_radius_heuristic = spectral_radius_heuristic(model, config.k1);
  return r;
}

// ---- structural search -----------------------------------------------------

/// Weights tried by set_weight edits.
inline constexpr double kWeightGrid[] = {-1.0, -0.75, -0.5, -0.25, 0.25, 0.5, 0.75, 1.0};

/// All single-edge edits of the model in edge order. Edits that would leave
/// the model unchanged (set_weight to the current weight, flipping a zero
/// weight) are skipped.
inline std::vector<EditSuggestion> enumerate_edits(const FcmModel& model) {
  std::vector<EditSuggestion> edits;
  for (const auto& e : model.edges) {
    edits.push_back({EditKind::remove_edge, e.source, e.target, 0.0, std::abs(e.weight), 0.0});
    if (e.weight != 0.0)
      edits.push_back({EditKind::flip_sign, e.source, e.target, -e.weight, 2.0 * std::abs(e.weight), 0.0});
    for (double w : kWeightGrid) {
      if (w == e.weight) continue;
      edits.push_back({EditKind::set_weight, e.source, e.target, w, std::abs(w - e.weight), 0.0});
    }
  }
  return edits;
}

inline FcmModel apply_edit(const FcmModel& model, const EditSuggestion& edit) {
  FcmModel out = model;
  auto it = std::find_if(out.edges.begin(), out.edges.end(), [&](const Edge& e) {
    return e.source == edit.source && e.target == edit.target;
  });
  if (it == out.edges.end())
    throw FcmError("unknown_edge", "edge not in model", edit.source.str() + "->" + edit.target.str());
  switch (edit.kind) {
    case EditKind::remove_edge: out.edges.erase(it); break;
    case EditKind::flip_sign: it->weight = -it->weight; break;
    case EditKind::set_weight: it->weight = edit.value; break;
  }
  return out;
}

/// Evaluates every single-edge edit with stability_report (same samples and
/// seed) and returns the best `top_k`, ordered by fixed-point fraction
/// (descending), then magnitude change, then (source, target), then kind
/// and value.
inline std::vector<EditSuggestion> structural_search(const FcmModel& model,
                                                     const SimulationConfig& config, int samples,
                                                     std::uint64_t seed, int top_k,
                                                     unsigned threads = 1) {
  require_valid(model);
  validate_config(config, model.range);
  if (model.edges.empty()) throw FcmError("empty_edge_set", "empty edge set");
  if (samples < 1) throw FcmError("invalid_params", "samples must be >= 1");
  if (top_k < 1) throw FcmError("invalid_params", "top_k must be >= 1");

  auto edits = enumerate_edits(model);
  detail::parallel_for(edits.size(), threads, [&](std::size_t i) {
    edits[i].resulting_fixed_point_fraction =
        stability_report(apply_edit(model, edits[i]), config, samples, seed, 1).fixed_point_fraction;
  });

  std::stable_sort(edits.begin(), edits.end(), [](const EditSuggestion& a, const EditSuggestion& b) {
    if (a.resulting_fixed_point_fraction != b.resulting_fixed_point_fraction)
      return a.resulting_fixed_point_fraction > b.resulting_fixed_point_fraction;
    return std::tie(a.magnitude_change, a.source, a.target, a.kind, a.value) <
           std::tie(b.magnitude_change, b.source, b.target, b.kind, b.value);
  });
  if (edits.size() > static_cast<std::size_t>(top_k)) edits.resize(static_cast<std::size_t>(top_k));
  return edits;
}

}  // namespace fcm
