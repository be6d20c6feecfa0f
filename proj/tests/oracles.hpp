// Test-only reference implementations. Nothing here calls into the engine's
// update, closure or threshold code; models are read only through their
// public fields.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "fcm/core.hpp"

namespace oracle {

/// tanh from Lambert's continued fraction x / (1 + x^2 / (3 + x^2 / (5 + ...))).
inline double tanh_series(double x) {
  double frac = 0.0;
  for (int k = 60; k >= 1; --k) frac = x * x / (2.0 * k + 1.0 + frac);
  return x / (1.0 + frac);
}

/// Scalar threshold written from the definitions, with exp-based tanh.
inline double threshold(fcm::ThresholdKind kind, double lambda, fcm::Range range, double x) {
  switch (kind) {
    case fcm::ThresholdKind::clamp: {
      const double lo = range == fcm::Range::bipolar ? -1.0 : 0.0;
      if (x < lo) return lo;
      if (x > 1.0) return 1.0;
      return x;
    }
    case fcm::ThresholdKind::tanh: {
      const double e = std::exp(-2.0 * std::abs(lambda * x));
      const double t = (1.0 - e) / (1.0 + e);
      return lambda * x < 0 ? -t : t;
    }
    case fcm::ThresholdKind::logistic: return 1.0 / (1.0 + std::exp(-lambda * x));
    case fcm::ThresholdKind::bivalent: return x >= 0.0 ? 1.0 : -1.0;
    case fcm::ThresholdKind::trivalent:
      if (x >= 0.5) return 1.0;
      if (x <= -0.5) return -1.0;
      return 0.0;
  }
  return x;
}

/// Direct evaluation of A_i = f(k1 * sum_{j != i} A_j W_ji + k2 * A_i) over
/// a dense weight matrix W[j][i] built from the edge list.
inline std::vector<double> direct_update(const fcm::FcmModel& m, const std::vector<double>& a,
                                         const fcm::SimulationConfig& c,
                                         const std::map<std::string, double>& clamps) {
  const std::size_t n = m.concepts.size();
  std::vector<std::vector<double>> w(n, std::vector<double>(n, 0.0));
  auto idx = [&](const std::string& id) {
    for (std::size_t i = 0; i < n; ++i)
      if (m.concepts[i].id.str() == id) return i;
    return n;
  };
  for (const auto& e : m.edges) w[idx(e.source.str())][idx(e.target.str())] = e.weight;

  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto cl = clamps.find(m.concepts[i].id.str());
    if (cl != clamps.end()) {
      out[i] = cl->second;
      continue;
    }
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) s += a[j] * w[j][i];
    out[i] = threshold(c.threshold.kind, c.threshold.steepness, m.range, c.k1 * s + c.k2 * a[i]);
  }
  return out;
}

/// Max-product aggregation over explicitly enumerated walks. Extends the
/// walk length until the aggregate stops changing, and at least to 2n
/// (a best walk never needs to revisit a (concept, sign) pair).
struct ClosureOracle {
  std::vector<std::vector<double>> positive, negative;
  int max_length = 0;
};

inline ClosureOracle brute_force_closure(const fcm::FcmModel& m) {
  const std::size_t n = m.concepts.size();
  std::vector<std::vector<std::pair<std::size_t, double>>> out(n);
  auto idx = [&](const std::string& id) {
    for (std::size_t i = 0; i < n; ++i)
      if (m.concepts[i].id.str() == id) return i;
    return n;
  };
  for (const auto& e : m.edges)
    if (e.weight != 0.0) out[idx(e.source.str())].push_back({idx(e.target.str()), e.weight});

  using Grid = std::vector<std::vector<double>>;
  // per_length[L] = {positive, negative} best over walks of length exactly L
  auto enumerate = [&](int depth) {
    std::vector<std::pair<Grid, Grid>> per_length(
        static_cast<std::size_t>(depth) + 1,
        {Grid(n, std::vector<double>(n, 0.0)), Grid(n, std::vector<double>(n, 0.0))});
    auto dfs = [&](auto&& self, std::size_t start, std::size_t at, double mag, bool neg, int len) -> void {
      if (len > 0) {
        auto& cell = neg ? per_length[len].second[start][at] : per_length[len].first[start][at];
        cell = std::max(cell, mag);
      }
      if (len == depth) return;
      for (const auto& [to, w] : out[at]) self(self, start, to, mag * std::abs(w), neg != (w < 0), len + 1);
    };
    for (std::size_t i = 0; i < n; ++i) dfs(dfs, i, i, 1.0, false, 0);
    return per_length;
  };

  ClosureOracle r;
  for (int depth = static_cast<int>(2 * n);; ++depth) {
    const auto per_length = enumerate(depth);
    Grid p(n, std::vector<double>(n, 0.0)), q = p, p_prev = p, q_prev = p;
    for (int len = 1; len <= depth; ++len) {
      p_prev = p;
      q_prev = q;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          p[i][j] = std::max(p[i][j], per_length[len].first[i][j]);
          q[i][j] = std::max(q[i][j], per_length[len].second[i][j]);
        }
    }
    r.positive = p;
    r.negative = q;
    r.max_length = depth;
    if (p == p_prev && q == q_prev) break;  // the longest length added nothing
  }
  return r;
}

/// Random valid model with up to `max_n` concepts.
struct ModelGen {
  std::mt19937_64 rng;
  explicit ModelGen(std::uint64_t seed) : rng(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
  bool coin(double p = 0.5) { return uniform(0.0, 1.0) < p; }

  fcm::FcmModel model(int max_n, fcm::Range range, double edge_probability,
                      const std::vector<double>* grid = nullptr) {
    fcm::FcmModel m;
    m.name = "random";
    m.range = range;
    const int n = integer(1, max_n);
    const double lo = range == fcm::Range::bipolar ? -1.0 : 0.0;
    for (int i = 0; i < n; ++i)
      m.concepts.push_back({fcm::ConceptId("c" + std::to_string(i)), "Concept " + std::to_string(i),
                            static_cast<fcm::ConceptKind>(integer(0, 2)), uniform(lo, 1.0), std::nullopt});
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (i == j || !coin(edge_probability)) continue;
        const double w = grid ? (*grid)[static_cast<std::size_t>(integer(0, static_cast<int>(grid->size()) - 1))]
                              : uniform(-1.0, 1.0);
        m.edges.push_back({m.concepts[i].id, m.concepts[j].id, w});
      }
    std::shuffle(m.edges.begin(), m.edges.end(), rng);
    return m;
  }

  std::vector<double> state(std::size_t n, fcm::Range range) {
    const double lo = range == fcm::Range::bipolar ? -1.0 : 0.0;
    std::vector<double> s(n);
    for (auto& v : s) v = uniform(lo, 1.0);
    return s;
  }
};

/// Period-4 sign map: x1 -> x2 (+1), x2 -> x1 (-1).
inline fcm::FcmModel sign_map() {
  fcm::FcmModel m;
  m.name = "sign map";
  m.concepts = {{fcm::ConceptId("x1"), "x1", fcm::ConceptKind::ordinary, 1.0, std::nullopt},
                {fcm::ConceptId("x2"), "x2", fcm::ConceptKind::target, 1.0, std::nullopt}};
  m.edges = {{fcm::ConceptId("x1"), fcm::ConceptId("x2"), 1.0},
             {fcm::ConceptId("x2"), fcm::ConceptId("x1"), -1.0}};
  return m;
}

inline fcm::SimulationConfig sign_map_config() {
  fcm::SimulationConfig c;
  c.k1 = 1.0;
  c.k2 = 0.0;
  c.threshold = {fcm::ThresholdKind::bivalent, 1.0};
  return c;
}

/// Plain iteration of the 2-concept sign dynamics on +-1 states.
inline std::pair<int, int> sign_step(std::pair<int, int> s, int w12, int w21) {
  auto sgn = [](int v) { return v >= 0 ? 1 : -1; };
  return {sgn(s.second * w21), sgn(s.first * w12)};
}

}  // namespace oracle
