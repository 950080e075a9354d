#pragma once

#include "lexpand/partition.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <vector>

namespace lexpand {

/// Closed dynamical ball M_{n,j,w}: a component of f_w^{-1}(closure B_j).
struct VitaliMember {
  Word word;
  std::size_t ball = 0;
  double lo = 0.0;  // lifted, lo in [0,1)
  double hi = 0.0;

  double length() const { return hi - lo; }
  Arc arc() const { return Arc::from_lift(lo, hi); }
};

struct VitaliFamily {
  std::vector<VitaliMember> members;
  std::size_t min_word = 0;
  std::size_t cap = 0;
  bool covers_grid = false;
  std::size_t grid_size = 0;
  std::vector<double> uncovered_points;  // grid points not in any member
};

/// All pullbacks of the base balls along admissible words with
/// min_word <= |w| <= cap, then a covering check on a grid of `grid`
/// points (i + 1/2)/grid. In dimension one diam <= lambda holds with
/// constant 1 for arcs, so only the covering is reported.
inline VitaliFamily build_vitali_family(const GeneratorSystem& system, const ExpandingCover& cover,
                                        const BaseCover& base, std::size_t min_word, std::size_t cap,
                                        std::size_t grid = 1000) {
  VitaliFamily fam;
  fam.min_word = min_word;
  fam.cap = cap;
  fam.grid_size = grid;
  detail::FloatGeometry geom(system);
  for (std::size_t len = min_word; len <= cap; ++len) {
    for (const auto& w : detail::words_of_length(system, len)) {
      // two turns of the circle so balls straddling 0 are found once
      detail::Gap<double> g{0.0, 2.0, 0};
      std::vector<detail::Piece<double>> pieces;
      std::size_t ord = 0;
      detail::gap_pieces(geom, system, cover, base, w, g, 0, pieces, ord);
      for (auto& p : pieces) {
        if (p.lo >= 1.0 || p.lo < 0.0) continue;
        fam.members.push_back({p.word, p.ball, p.lo, p.hi});
      }
    }
  }
  std::sort(fam.members.begin(), fam.members.end(), [](const VitaliMember& a, const VitaliMember& b) {
    if (a.word.size() != b.word.size()) return a.word.size() < b.word.size();
    if (a.word != b.word) return a.word < b.word;
    return a.lo < b.lo;
  });
  // covering check
  std::vector<std::pair<double, double>> spans;
  for (const auto& m : fam.members) {
    spans.emplace_back(m.lo, m.hi);
    if (m.hi > 1.0) spans.emplace_back(m.lo - 1.0, m.hi - 1.0);
  }
  std::sort(spans.begin(), spans.end());
  std::vector<double> reach(spans.size());
  for (std::size_t i = 0; i < spans.size(); ++i) reach[i] = std::max(spans[i].second, i ? reach[i - 1] : -1.0);
  fam.covers_grid = true;
  for (std::size_t i = 0; i < grid; ++i) {
    double x = (static_cast<double>(i) + 0.5) / static_cast<double>(grid);
    auto it = std::upper_bound(spans.begin(), spans.end(), std::make_pair(x, 2.0));
    std::size_t k = static_cast<std::size_t>(it - spans.begin());
    if (k == 0 || reach[k - 1] < x) {
      fam.covers_grid = false;
      fam.uncovered_points.push_back(x);
    }
  }
  return fam;
}

namespace detail {

/// Disjoint open intervals of [0,1) keyed by left endpoint.
class IntervalSet {
 public:
  bool overlaps(double lo, double hi) const {
    if (hi > 1.0) return overlaps_plain(lo, 1.0) || overlaps_plain(0.0, hi - 1.0);
    return overlaps_plain(lo, hi);
  }
  void insert(double lo, double hi) {
    if (hi > 1.0) {
      map_[lo] = 1.0;
      map_[0.0] = std::max(map_[0.0], hi - 1.0);
    } else {
      map_[lo] = std::max(map_[lo], hi);
    }
  }

 private:
  bool overlaps_plain(double lo, double hi) const {
    auto it = map_.lower_bound(lo);
    if (it != map_.end() && it->first < hi - 1e-15) return true;
    if (it != map_.begin()) {
      --it;
      if (it->second > lo + 1e-15) return true;
    }
    return false;
  }
  std::map<double, double> map_;
};

}  // namespace detail

struct VitaliSelection {
  std::vector<std::size_t> selected;  // indices into the family
  double target_mass = 0.0;
  double selected_mass = 0.0;
  double uncovered = 0.0;
  bool reached_tol = false;
};

/// Greedy disjoint subfamily inside U (a union of arcs): largest first,
/// ties by smallest family index, until the uncovered mass is below tol.
inline VitaliSelection vitali_select(const std::vector<Arc>& U, const VitaliFamily& family, double tol) {
  VitaliSelection sel;
  for (const auto& a : U) sel.target_mass += a.length;
  sel.uncovered = sel.target_mass;
  if (U.empty() || sel.target_mass <= 0.0) {
    sel.reached_tol = true;
    sel.uncovered = 0.0;
    return sel;
  }
  std::vector<std::size_t> order(family.members.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return family.members[a].length() > family.members[b].length();
  });
  detail::IntervalSet taken;
  for (std::size_t idx : order) {
    if (sel.uncovered < tol) break;
    const auto& m = family.members[idx];
    bool inside = false;
    for (const auto& a : U)
      if (a.contains(m.arc(), 1e-12)) {
        inside = true;
        break;
      }
    if (!inside || taken.overlaps(m.lo, m.hi)) continue;
    taken.insert(m.lo, m.hi);
    sel.selected.push_back(idx);
    sel.selected_mass += m.length();
    sel.uncovered = sel.target_mass - sel.selected_mass;
  }
  if (sel.uncovered < 0.0) sel.uncovered = 0.0;
  sel.reached_tol = sel.uncovered < tol;
  return sel;
}

/// Circle minus the boundaries of the base balls, as arcs.
inline std::vector<Arc> complement_of_boundaries(const BaseCover& base) {
  std::vector<Arc> out;
  for (const auto& c : base_components(base)) out.push_back(Arc::from_lift(to_double(c.lo), to_double(c.hi)));
  return out;
}

}  // namespace lexpand
