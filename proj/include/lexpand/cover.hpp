#pragma once

#include "lexpand/words.hpp"

#include <limits>
#include <optional>
#include <vector>

namespace lexpand {

/// Chart V_i on which generator `generator` is used.
struct Chart {
  Arc arc;
  int generator = 0;
};

/// Certified locally expanding cover.
struct ExpandingCover {
  std::vector<Chart> charts;  // one per generator, in generator order
  double sigma = 1.0;         // sup of 1/f_i' over the r-neighborhood of V_i, with slack
  double r = 0.0;
  double eta = 0.0;           // Lebesgue number

  const Chart& chart_of(int generator) const { return charts.at(static_cast<std::size_t>(generator)); }
};

inline constexpr double certificate_slack = 1.0 + 1e-6;

namespace detail {

/// Grid points on the closed r-neighborhood of `arc`, plus the critical point
/// of the derivative if it lies there.
inline std::vector<double> neighborhood_samples(const Arc& arc, double r, const Generator& g, std::size_t resolution) {
  std::vector<double> pts;
  if (arc.full() || arc.length + 2.0 * r >= 1.0) {
    pts = circle_grid(resolution);
  } else {
    double lo = arc.start - r;
    double len = arc.length + 2.0 * r;
    for (std::size_t i = 0; i <= resolution; ++i)
      pts.push_back(reduce(lo + len * static_cast<double>(i) / static_cast<double>(resolution)));
  }
  if (g.c() != 0.0) {
    double crit = g.c() > 0.0 ? 0.5 : 0.0;
    Arc nb = arc.full() ? Arc::circle() : Arc(arc.start - r, arc.length + 2.0 * r);
    if (nb.contains_closed(crit)) pts.push_back(crit);
  }
  return pts;
}

/// Distance from x to the complement of an open chart arc; infinite for the
/// full circle.
inline double containment_radius(const Arc& arc, double x) {
  if (arc.full()) return std::numeric_limits<double>::infinity();
  double off = arc.offset(x);
  if (off >= arc.length) return 0.0;
  return std::min(off, arc.length - off);
}

}  // namespace detail

/// Lebesgue number of the chart cover: the largest eta such that every arc
/// of radius eta around any point lies in some chart, capped below r/2.
///
/// The containment radius of each chart is a tent function of x, so the
/// minimum of their upper envelope is attained at a chart endpoint, a chart
/// midpoint, or a crossing of an increasing and a decreasing side; those
/// candidates are evaluated exactly, together with a uniform grid.
inline double lebesgue_number(const std::vector<Chart>& charts, double r) {
  if (charts.empty()) throw Error(ErrorKind::cover_gap, "cover has no charts");
  std::vector<double> candidates = circle_grid(4096);
  for (const auto& a : charts) {
    if (a.arc.full()) continue;
    candidates.push_back(a.arc.start);
    candidates.push_back(reduce(a.arc.end()));
    for (const auto& b : charts) {
      if (b.arc.full()) continue;
      double s = a.arc.start;
      double e = b.arc.start + b.arc.length;
      while (e < s) e += 1.0;
      candidates.push_back(reduce(0.5 * (s + e)));
      candidates.push_back(reduce(0.5 * (s + e + 1.0)));
    }
  }
  double worst = std::numeric_limits<double>::infinity();
  double worst_x = 0.0;
  for (double x : candidates) {
    double best = 0.0;
    for (const auto& c : charts) best = std::max(best, detail::containment_radius(c.arc, x));
    if (best < worst) {
      worst = best;
      worst_x = x;
    }
  }
  if (!(worst > 0.0))
    throw Error(ErrorKind::cover_gap, "charts do not cover the circle near x=" + std::to_string(worst_x));
  return std::min(worst, 0.5 * r) / certificate_slack;
}

inline double lebesgue_number(const ExpandingCover& cover) { return lebesgue_number(cover.charts, cover.r); }

/// Certifies |f_i'| > 1/sigma on the r-neighborhood of each chart.
///
/// With no declared charts, a generator that expands everywhere gets the full
/// circle; otherwise it gets the longest arc where f' > 1 + 1e-3, shrunk by r.
/// Fails with the first grid point no chart expands.
inline ExpandingCover verify_locally_expanding(const GeneratorSystem& system, std::size_t resolution = 4096,
                                               std::vector<Chart> declared = {}, std::optional<double> margin = {}) {
  validate(system);
  ExpandingCover cover;
  if (!declared.empty()) {
    cover.charts = std::move(declared);
    cover.r = margin.value_or(0.01);
  } else {
    bool all_full = true;
    for (std::size_t i = 0; i < system.size(); ++i)
      if (!(system[i].min_derivative() > 1.0)) all_full = false;
    cover.r = margin.value_or(all_full ? 1.0 : 0.01);
    for (std::size_t i = 0; i < system.size(); ++i) {
      const Generator& g = system[i];
      Chart chart{Arc(0.0, 0.0), static_cast<int>(i)};
      if (g.min_derivative() > 1.0) {
        chart.arc = Arc::circle();
      } else {
        // longest run of grid points with f' > 1 + 1e-3
        auto grid = circle_grid(resolution);
        std::vector<char> good(resolution);
        for (std::size_t k = 0; k < resolution; ++k) good[k] = g.derivative(grid[k]) > 1.0 + 1e-3;
        std::size_t best_len = 0, best_start = 0;
        for (std::size_t k = 0; k < resolution; ++k) {
          if (!good[k] || good[(k + resolution - 1) % resolution]) continue;
          std::size_t len = 0;
          while (len < resolution && good[(k + len) % resolution]) ++len;
          if (len > best_len) {
            best_len = len;
            best_start = k;
          }
        }
        double h = 1.0 / static_cast<double>(resolution);
        double len = static_cast<double>(best_len - (best_len > 0 ? 1 : 0)) * h - 2.0 * cover.r;
        if (len > 0.0) chart.arc = Arc(grid[best_start] + cover.r, len);
      }
      cover.charts.push_back(chart);
    }
  }
  if (cover.charts.size() != system.size())
    throw Error(ErrorKind::invalid_input, "need exactly one chart per generator");

  double sigma = 0.0;
  for (const auto& chart : cover.charts) {
    if (chart.arc.length <= 0.0) continue;
    const Generator& g = system[static_cast<std::size_t>(chart.generator)];
    for (double x : detail::neighborhood_samples(chart.arc, cover.r, g, resolution)) {
      double d = g.derivative(x);
      if (!(d > 1.0))
        throw Error(ErrorKind::not_locally_expanding,
                    "generator " + std::to_string(chart.generator) + " has derivative " + std::to_string(d) +
                        " at x=" + std::to_string(x) + " inside its chart neighborhood");
      sigma = std::max(sigma, 1.0 / d);
    }
  }
  // Every point must lie in some chart with positive length.
  for (double x : circle_grid(resolution)) {
    bool covered = false;
    for (const auto& chart : cover.charts)
      if (chart.arc.length > 0.0 && chart.arc.contains_open(x)) covered = true;
    if (!covered)
      throw Error(ErrorKind::not_locally_expanding, "no generator expands at x=" + std::to_string(x));
  }
  cover.sigma = sigma * certificate_slack;
  if (!(cover.sigma < 1.0)) throw Error(ErrorKind::not_locally_expanding, "contraction bound sigma is not below 1");
  cover.eta = lebesgue_number(cover);
  return cover;
}

enum class AdmissibilityReason { admissible, driving_forbidden, geometry_forbidden };

inline const char* to_string(AdmissibilityReason r) {
  switch (r) {
    case AdmissibilityReason::admissible: return "admissible";
    case AdmissibilityReason::driving_forbidden: return "driving-forbidden";
    case AdmissibilityReason::geometry_forbidden: return "geometry-forbidden";
  }
  return "unknown";
}

struct AdmissibilityResult {
  bool admissible = false;
  AdmissibilityReason reason = AdmissibilityReason::geometry_forbidden;
  std::optional<double> witness;
};

/// Does the itinerary x in V_{w_1}, f_{w_1}(x) in V_{w_2}, ... hold?
inline bool follows_itinerary(const GeneratorSystem& system, const ExpandingCover& cover, const Word& w, double x) {
  double y = x;
  for (std::size_t j = 0; j < w.size(); ++j) {
    if (!cover.chart_of(w[j]).arc.contains_open(y)) return false;
    y = system[w[j]](y);
  }
  return true;
}

/// Driving-matrix and geometric admissibility. The witness search scans a
/// 2^10 grid of V_{w_1} and then the midpoints of every grid cell.
inline AdmissibilityResult is_admissible(const GeneratorSystem& system, const ExpandingCover& cover, const Word& w) {
  check_symbols(system, w);
  AdmissibilityResult res;
  for (std::size_t j = 0; j + 1 < w.size(); ++j)
    if (!system.allowed(w[j], w[j + 1])) {
      res.reason = AdmissibilityReason::driving_forbidden;
      return res;
    }
  if (w.empty()) {
    res.admissible = true;
    res.reason = AdmissibilityReason::admissible;
    return res;
  }
  const Arc& first = cover.chart_of(w[0]).arc;
  constexpr int grid = 1 << 10;
  for (int pass = 0; pass < 2; ++pass) {
    for (int m = 0; m < grid; ++m) {
      double t = (static_cast<double>(m) + (pass == 0 ? 0.5 : 1.0)) / grid;
      double x = reduce(first.start + t * first.length);
      if (follows_itinerary(system, cover, w, x)) {
        res.admissible = true;
        res.reason = AdmissibilityReason::admissible;
        res.witness = x;
        return res;
      }
    }
  }
  res.reason = AdmissibilityReason::geometry_forbidden;
  return res;
}

}  // namespace lexpand
