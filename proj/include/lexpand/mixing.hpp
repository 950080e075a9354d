#pragma once

#include "lexpand/cover.hpp"

#include <cmath>
#include <utility>
#include <vector>

namespace lexpand {

/// Image of an arc under one generator, as an arc (full circle when the
/// lifted image has length >= 1).
inline Arc image_arc(const Generator& g, const Arc& arc) {
  if (arc.full()) return Arc::circle();
  double len = g.lift_delta(arc.start, arc.length);
  if (len >= 1.0 - 1e-12) return Arc(g(arc.start), 1.0);
  return Arc(g(arc.start), len);
}

/// Pieces of `arc` whose orbit under w respects the charts, pushed forward.
inline std::vector<Arc> chart_restricted_image(const GeneratorSystem& system, const ExpandingCover& cover,
                                               const Word& w, const Arc& arc) {
  std::vector<Arc> pieces{arc};
  for (int s : w) {
    std::vector<Arc> next;
    for (const auto& p : pieces)
      for (const auto& q : intersect(p, cover.chart_of(s).arc)) next.push_back(image_arc(system[s], q));
    pieces = std::move(next);
    if (pieces.empty()) break;
  }
  return pieces;
}

struct MixingWitness {
  std::size_t u = 0, v = 0;
  Word word;
};

struct MixingCertificate {
  bool complete = false;
  std::size_t net_size = 0;
  double scale = 0.0;
  std::size_t horizon = 0;
  std::vector<MixingWitness> witnesses;
  std::vector<std::pair<std::size_t, std::size_t>> unresolved;
};

/// Words allowed by the driving matrix, shortest first then lexicographic,
/// lengths 1..horizon.
inline std::vector<Word> driving_words(const GeneratorSystem& system, std::size_t horizon) {
  std::vector<Word> out;
  std::vector<Word> layer;
  for (std::size_t i = 0; i < system.size(); ++i) layer.push_back(Word{static_cast<int>(i)});
  for (std::size_t len = 1; len <= horizon && !layer.empty(); ++len) {
    out.insert(out.end(), layer.begin(), layer.end());
    if (len == horizon) break;
    std::vector<Word> next;
    for (const auto& w : layer)
      for (std::size_t j = 0; j < system.size(); ++j)
        if (system.allowed(static_cast<std::size_t>(w.back()), j)) {
          Word x = w;
          x.push_back(static_cast<int>(j));
          next.push_back(std::move(x));
        }
    layer = std::move(next);
  }
  return out;
}

/// For every ordered pair (U, V) of net arcs [k/N, (k+1)/N] with N = ceil(1/scale),
/// finds the first word whose chart-respecting image of U contains V.
inline MixingCertificate check_topological_mixing(const GeneratorSystem& system, const ExpandingCover& cover,
                                                  double scale, std::size_t horizon) {
  if (!(scale > 0.0)) throw Error(ErrorKind::invalid_input, "mixing scale must be positive");
  MixingCertificate cert;
  cert.scale = scale;
  cert.horizon = horizon;
  const std::size_t n = static_cast<std::size_t>(std::ceil(1.0 / scale - 1e-9));
  cert.net_size = n;
  auto net_arc = [n](std::size_t k) { return Arc(static_cast<double>(k) / n, 1.0 / static_cast<double>(n)); };
  auto words = driving_words(system, horizon);
  for (std::size_t u = 0; u < n; ++u) {
    std::vector<char> done(n, 0);
    std::size_t remaining = n;
    for (const auto& w : words) {
      if (remaining == 0) break;
      auto pieces = chart_restricted_image(system, cover, w, net_arc(u));
      if (pieces.empty()) continue;
      for (std::size_t v = 0; v < n; ++v) {
        if (done[v]) continue;
        for (const auto& p : pieces)
          if (p.contains(net_arc(v), 1e-12)) {
            done[v] = 1;
            --remaining;
            cert.witnesses.push_back({u, v, w});
            break;
          }
      }
    }
    for (std::size_t v = 0; v < n; ++v)
      if (!done[v]) cert.unresolved.emplace_back(u, v);
  }
  cert.complete = cert.unresolved.empty();
  return cert;
}

}  // namespace lexpand
