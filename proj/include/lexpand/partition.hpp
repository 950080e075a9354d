#pragma once

#include "lexpand/dynamical_ball.hpp"
#include "lexpand/mixing.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <vector>

namespace lexpand {

enum class BaseMode { overlap, tiling };

inline const char* to_string(BaseMode m) { return m == BaseMode::overlap ? "overlap" : "tiling"; }

inline BaseMode parse_base_mode(const std::string& s) {
  if (s == "overlap") return BaseMode::overlap;
  if (s == "tiling") return BaseMode::tiling;
  throw Error(ErrorKind::invalid_input, "base cover mode must be overlap or tiling, got '" + s + "'");
}

inline BigInt floor_int(const Rational& q) {
  BigInt n = boost::multiprecision::numerator(q);
  BigInt d = boost::multiprecision::denominator(q);
  BigInt f = n / d;
  if (n % d != 0 && n < 0) f -= 1;
  return f;
}

inline Rational reduce(const Rational& q) { return q - Rational(floor_int(q)); }

/// The finite cover by open eps-balls B_0..B_{N-1}.
///
/// overlap: N = ceil(3/eps) balls centred at j/N.
/// tiling:  N = 1/(2 eps) abutting balls (j/N, (j+1)/N); they cover the
///          circle except the N common endpoints.
struct BaseCover {
  BaseMode mode = BaseMode::overlap;
  Rational epsilon;
  std::vector<Rational> centers;

  std::size_t size() const { return centers.size(); }
  double eps() const { return to_double(epsilon); }
  Rational exact_left(std::size_t j) const { return centers[j] - epsilon; }
  double left(std::size_t j) const { return to_double(exact_left(j)); }
  Arc ball(std::size_t j) const { return Arc(left(j), 2.0 * eps()); }
};

inline BaseCover make_base_cover(const Rational& eps, BaseMode mode) {
  if (eps <= 0 || eps >= Rational(1, 2)) throw Error(ErrorKind::invalid_input, "epsilon must lie in (0, 1/2)");
  BaseCover base;
  base.mode = mode;
  base.epsilon = eps;
  if (mode == BaseMode::tiling) {
    Rational n = Rational(1) / (2 * eps);
    if (boost::multiprecision::denominator(n) != 1)
      throw Error(ErrorKind::invalid_input, "tiling base cover needs 1/(2 eps) to be an integer");
    long long count = boost::multiprecision::numerator(n).convert_to<long long>();
    for (long long j = 0; j < count; ++j) base.centers.push_back(Rational(2 * j + 1, 2 * count));
  } else {
    BigInt count = -floor_int(Rational(-3) / eps);  // ceil(3/eps)
    long long n = count.convert_to<long long>();
    for (long long j = 0; j < n; ++j) base.centers.push_back(Rational(j, n));
  }
  return base;
}

/// A component of the circle minus all ball boundaries, with the balls whose
/// closure contains it. Endpoints are lifted: lo in [0,1), hi > lo.
struct Component {
  Rational lo, hi;
  std::vector<std::size_t> balls;

  double length() const { return to_double(hi - lo); }
};

inline std::vector<Component> base_components(const BaseCover& base) {
  std::vector<Rational> pts;
  for (std::size_t j = 0; j < base.size(); ++j) {
    pts.push_back(reduce(base.centers[j] - base.epsilon));
    pts.push_back(reduce(base.centers[j] + base.epsilon));
  }
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  std::vector<Component> comps;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    Component c;
    c.lo = pts[i];
    c.hi = i + 1 < pts.size() ? pts[i + 1] : pts[0] + 1;
    for (std::size_t j = 0; j < base.size(); ++j) {
      Rational off = reduce(c.lo - base.exact_left(j));
      if (off + (c.hi - c.lo) <= 2 * base.epsilon) c.balls.push_back(j);
    }
    comps.push_back(std::move(c));
  }
  return comps;
}

/// Element M_i of the truncated partition: a closed arc whose interior is
/// mapped by f_{w_i} diffeomorphically onto the ball B_{image}.
struct PartitionElement {
  Word word;
  std::size_t image = 0;
  std::size_t component = 0;
  double left = 0.0;   // lifted, left in [0,1)
  double right = 0.0;
  std::optional<Rational> exact_left, exact_right;
  bool cycle = false;

  std::size_t tau() const { return word.size(); }
  double length() const { return right - left; }
  Arc arc() const { return Arc::from_lift(left, right); }
};

struct CountableMarkovPartition {
  BaseCover base;
  std::vector<Component> components;
  std::vector<PartitionElement> elements;
  std::vector<std::size_t> cycle;        // element indices b_0..b_{N-1}
  std::vector<std::size_t> cycle_balls;  // ball visited at each cycle step
  double tol = 1e-3;
  double uncovered = 0.0;
  std::size_t depth_cap = 0;
  std::size_t depth_reached = 0;
  bool exact = false;
  bool eps_within_eta_over_6 = true;

  std::size_t size() const { return elements.size(); }
  const PartitionElement& operator[](std::size_t i) const { return elements[i]; }

  double covered_mass() const {
    double m = 0.0;
    for (const auto& e : elements) m += e.length();
    return m;
  }
};

struct PartitionOptions {
  Rational epsilon{1, 16};
  BaseMode mode = BaseMode::overlap;
  std::size_t min_depth = 1;
  std::size_t depth_cap = 16;
  double tol = 1e-3;
  std::size_t horizon = 8;  // longest word tried for cycle elements
  std::size_t cycle_budget = 2000000;
  bool allow_exact = true;
};

namespace detail {

inline double num_to_double(double x) { return x; }
inline double num_to_double(const Rational& x) { return to_double(x); }

/// Exact geometry for affine systems: F_w(x) = A x + B with rational A, B.
class ExactGeometry {
 public:
  using Num = Rational;
  static constexpr bool exact = true;

  explicit ExactGeometry(const GeneratorSystem& s) : system_(&s) {}

  std::pair<Rational, Rational> image(const Word& w, const Rational& lo, const Rational& hi) {
    const auto& [a, b] = coefficients(w);
    return {a * lo + b, a * (hi - lo)};
  }
  Rational preimage(const Word& w, const Rational&, const Rational&, const Rational& offset) {
    return offset / coefficients(w).first;
  }
  Rational slack() const { return Rational(0); }
  Rational from(const Rational& q) const { return q; }

  const std::pair<Rational, Rational>& coefficients(const Word& w) {
    auto it = cache_.find(w);
    if (it != cache_.end()) return it->second;
    Rational a = 1, b = 0;
    for (int s : w) {
      const Generator& g = (*system_)[static_cast<std::size_t>(s)];
      a *= g.exact_a();
      b = g.exact_a() * b + g.exact_b();
    }
    return cache_.emplace(w, std::make_pair(a, b)).first->second;
  }

 private:
  const GeneratorSystem* system_;
  std::map<Word, std::pair<Rational, Rational>> cache_;
};

/// Floating geometry on reduced base points and lifted offsets.
class FloatGeometry {
 public:
  using Num = double;
  static constexpr bool exact = false;

  explicit FloatGeometry(const GeneratorSystem& s) : system_(&s) {}

  std::pair<double, double> image(const Word& w, double lo, double hi) {
    auto p = push_offset(*system_, w, lo, hi - lo);
    return {p.base, p.delta};
  }
  double preimage(const Word& w, double lo, double hi, double offset) {
    return solve_offset(*system_, w, lo, offset, 0.0, hi - lo);
  }
  double slack() const { return 1e-12; }
  double from(const Rational& q) const { return to_double(q); }

 private:
  const GeneratorSystem* system_;
};

template <class Num>
Num num_ceil(const Num& x) {
  if constexpr (std::is_same_v<Num, double>) return std::ceil(x);
  else return -Rational(floor_int(-x));
}

template <class Num>
struct Gap {
  Num lo, hi;
  std::size_t component;
};

template <class Num>
struct Piece {
  Num lo, hi;
  Word word;
  std::size_t ball;
  std::size_t gap;
  std::size_t order;
};

/// Chart itinerary check for the closed piece; skipped for full charts.
inline bool piece_respects_charts(const GeneratorSystem& system, const ExpandingCover& cover, const Word& w,
                                  double lo, double hi) {
  Arc arc = Arc::from_lift(lo, hi);
  for (int s : w) {
    const Arc& chart = cover.chart_of(s).arc;
    if (!chart.full() && !(chart.contains(arc) && chart.contains_open(arc.start) && chart.contains_open(reduce(arc.end()))))
      return false;
    arc = image_arc(system[static_cast<std::size_t>(s)], arc);
  }
  return true;
}

/// All preimages inside the gap of ball lifts contained in the image of the
/// gap under w.
template <class Geometry>
void gap_pieces(Geometry& geom, const GeneratorSystem& system, const ExpandingCover& cover, const BaseCover& base,
                const Word& w, const Gap<typename Geometry::Num>& gap, std::size_t gap_index,
                std::vector<Piece<typename Geometry::Num>>& out, std::size_t& order,
                std::optional<std::size_t> only_ball = {}) {
  using Num = typename Geometry::Num;
  auto [y0, len] = geom.image(w, gap.lo, gap.hi);
  const Num two_eps = geom.from(2 * base.epsilon);
  const Num slack = geom.slack();
  if (len + slack < two_eps) return;
  for (std::size_t m = 0; m < base.size(); ++m) {
    if (only_ball && *only_ball != m) continue;
    const Num bl = geom.from(base.exact_left(m));
    Num u = bl + num_ceil<Num>(y0 - bl - slack);
    for (; u + two_eps <= y0 + len + slack; u += Num(1)) {
      Num t_lo = u - y0 <= Num(0) ? Num(0) : geom.preimage(w, gap.lo, gap.hi, u - y0);
      Num t_hi = u + two_eps >= y0 + len ? gap.hi - gap.lo : geom.preimage(w, gap.lo, gap.hi, u + two_eps - y0);
      Piece<Num> p{gap.lo + t_lo, gap.lo + t_hi, w, m, gap_index, order++};
      if (!(p.hi > p.lo)) continue;
      if (!piece_respects_charts(system, cover, w, num_to_double(p.lo), num_to_double(p.hi))) continue;
      out.push_back(std::move(p));
    }
  }
}

/// Words of length exactly `len` allowed by the driving matrix, lexicographic.
inline std::vector<Word> words_of_length(const GeneratorSystem& system, std::size_t len) {
  std::vector<Word> layer;
  if (len == 0) return {Word{}};
  for (std::size_t i = 0; i < system.size(); ++i) layer.push_back(Word{static_cast<int>(i)});
  for (std::size_t l = 1; l < len; ++l) {
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
  return layer;
}

/// Least expansion factor of w, used to skip gaps whose image cannot hold a ball.
inline double max_expansion(const GeneratorSystem& system, const Word& w) {
  double e = 1.0;
  for (int s : w) e *= system[static_cast<std::size_t>(s)].max_derivative();
  return e;
}

/// Hamiltonian cycle through all balls in the graph `edges`, by depth-first
/// search with a node budget. Returns the visiting order starting at ball 0.
inline std::optional<std::vector<std::size_t>> hamiltonian_cycle(const std::vector<std::vector<char>>& edges,
                                                                 std::size_t budget) {
  const std::size_t n = edges.size();
  if (n == 0) return std::nullopt;
  if (n == 1) {
    if (edges[0][0]) return std::vector<std::size_t>{0};
    return std::nullopt;
  }
  std::vector<std::size_t> path{0};
  std::vector<char> used(n, 0);
  used[0] = 1;
  std::size_t visits = 0;
  // successors ordered by fewest onward options (Warnsdorff), then index
  auto successors = [&](std::size_t v) {
    std::vector<std::size_t> out;
    for (std::size_t m = 0; m < n; ++m)
      if (edges[v][m] && !used[m]) out.push_back(m);
    auto degree = [&](std::size_t m) {
      std::size_t d = 0;
      for (std::size_t k = 0; k < n; ++k)
        if (edges[m][k] && !used[k]) ++d;
      return d;
    };
    std::stable_sort(out.begin(), out.end(), [&](std::size_t a, std::size_t b) { return degree(a) < degree(b); });
    return out;
  };
  std::function<bool()> extend = [&]() -> bool {
    if (++visits > budget) return false;
    if (path.size() == n) return edges[path.back()][0] != 0;
    for (std::size_t m : successors(path.back())) {
      used[m] = 1;
      path.push_back(m);
      if (extend()) return true;
      path.pop_back();
      used[m] = 0;
      if (visits > budget) return false;
    }
    return false;
  };
  if (extend()) return path;
  return std::nullopt;
}

template <class Num>
bool overlaps(const std::vector<std::pair<Num, Num>>& taken, const Num& lo, const Num& hi) {
  for (const auto& [a, b] : taken)
    if (lo < b && a < hi) return true;
  return false;
}

template <class Geometry>
CountableMarkovPartition build(Geometry geom, const GeneratorSystem& system, const ExpandingCover& cover,
                               const PartitionOptions& opt) {
  using Num = typename Geometry::Num;
  CountableMarkovPartition part;
  part.base = make_base_cover(opt.epsilon, opt.mode);
  part.components = base_components(part.base);
  part.tol = opt.tol;
  part.depth_cap = opt.depth_cap;
  part.exact = Geometry::exact;
  part.eps_within_eta_over_6 = part.base.eps() <= cover.eta / 6.0;
  const BaseCover& base = part.base;
  const std::size_t n = base.size();

  std::vector<Gap<Num>> comp_gaps;
  for (std::size_t c = 0; c < part.components.size(); ++c)
    comp_gaps.push_back({geom.from(part.components[c].lo), geom.from(part.components[c].hi), c});
  std::vector<std::vector<std::size_t>> comps_in_ball(n);
  for (std::size_t c = 0; c < part.components.size(); ++c)
    for (std::size_t j : part.components[c].balls) comps_in_ball[j].push_back(c);

  // Cycle elements: edge j -> m when some component inside B_j has a piece
  // mapping onto B_m.
  std::vector<std::vector<char>> edges(n, std::vector<char>(n, 0));
  std::optional<std::vector<std::size_t>> order;
  std::size_t horizon = std::max<std::size_t>(opt.horizon, 1);
  std::size_t used_len = 0;
  for (std::size_t len = 1; len <= horizon && !order; ++len) {
    for (const auto& w : words_of_length(system, len)) {
      double e = max_expansion(system, w);
      for (std::size_t c = 0; c < comp_gaps.size(); ++c) {
        if (part.components[c].length() * e < 2.0 * base.eps() * (1.0 - 1e-9)) continue;
        std::vector<Piece<Num>> pieces;
        std::size_t ord = 0;
        gap_pieces(geom, system, cover, base, w, comp_gaps[c], c, pieces, ord);
        for (const auto& p : pieces)
          for (std::size_t j : part.components[c].balls) edges[j][p.ball] = 1;
      }
    }
    order = hamiltonian_cycle(edges, opt.cycle_budget);
    used_len = len;
  }
  if (!order) {
    std::vector<std::size_t> natural(n);
    std::iota(natural.begin(), natural.end(), 0);
    for (std::size_t j = 0; j < n; ++j)
      if (!edges[j][(j + 1) % n])
        throw Error(ErrorKind::constructive_failure,
                    "no mixing witness up to word length " + std::to_string(horizon) + " for pair (B_" +
                        std::to_string(j) + ", B_" + std::to_string((j + 1) % n) + ")");
    order = natural;
  }
  (void)used_len;

  // Assign one element per cycle edge, shortest word first, pairwise disjoint.
  std::vector<std::vector<std::pair<Num, Num>>> taken(part.components.size());
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t j = (*order)[k];
    std::size_t m = (*order)[(k + 1) % n];
    std::optional<Piece<Num>> chosen;
    for (std::size_t len = 1; len <= horizon && !chosen; ++len) {
      for (const auto& w : words_of_length(system, len)) {
        for (std::size_t c : comps_in_ball[j]) {
          std::vector<Piece<Num>> pieces;
          std::size_t ord = 0;
          gap_pieces(geom, system, cover, base, w, comp_gaps[c], c, pieces, ord, m);
          for (auto& p : pieces)
            if (!overlaps(taken[c], p.lo, p.hi)) {
              chosen = std::move(p);
              break;
            }
          if (chosen) break;
        }
        if (chosen) break;
      }
    }
    if (!chosen)
      throw Error(ErrorKind::constructive_failure, "no disjoint cycle element for pair (B_" + std::to_string(j) +
                                                       ", B_" + std::to_string(m) + ")");
    taken[chosen->gap].emplace_back(chosen->lo, chosen->hi);
    PartitionElement e;
    e.word = chosen->word;
    e.image = m;
    e.component = chosen->gap;
    e.cycle = true;
    if constexpr (Geometry::exact) {
      e.exact_left = chosen->lo;
      e.exact_right = chosen->hi;
    }
    e.left = num_to_double(chosen->lo);
    e.right = num_to_double(chosen->hi);
    part.cycle.push_back(part.elements.size());
    part.cycle_balls.push_back(j);
    part.elements.push_back(std::move(e));
  }

  // Remaining gaps of every component.
  auto subtract = [](const Gap<Num>& g, std::vector<std::pair<Num, Num>> cuts) {
    std::sort(cuts.begin(), cuts.end());
    std::vector<Gap<Num>> out;
    Num cur = g.lo;
    for (const auto& [a, b] : cuts) {
      if (a > cur) out.push_back({cur, a, g.component});
      if (b > cur) cur = b;
    }
    if (g.hi > cur) out.push_back({cur, g.hi, g.component});
    return out;
  };
  std::vector<Gap<Num>> gaps;
  for (std::size_t c = 0; c < comp_gaps.size(); ++c)
    for (auto& g : subtract(comp_gaps[c], taken[c])) gaps.push_back(g);

  auto uncovered = [&]() {
    double s = 0.0;
    for (const auto& g : gaps) s += num_to_double(g.hi - g.lo);
    return s;
  };
  part.uncovered = uncovered();
  part.depth_reached = 0;
  for (std::size_t len = std::max<std::size_t>(opt.min_depth, 1); len <= opt.depth_cap; ++len) {
    if (part.uncovered <= opt.tol) break;
    part.depth_reached = len;
    std::vector<Piece<Num>> cands;
    std::size_t ord = 0;
    for (const auto& w : words_of_length(system, len)) {
      double e = max_expansion(system, w);
      for (std::size_t gi = 0; gi < gaps.size(); ++gi) {
        if (num_to_double(gaps[gi].hi - gaps[gi].lo) * e < 2.0 * base.eps() * (1.0 - 1e-9)) continue;
        gap_pieces(geom, system, cover, base, w, gaps[gi], gi, cands, ord);
      }
    }
    std::stable_sort(cands.begin(), cands.end(), [](const Piece<Num>& a, const Piece<Num>& b) {
      Num la = a.hi - a.lo, lb = b.hi - b.lo;
      if (la != lb) return la > lb;
      return a.order < b.order;
    });
    std::vector<std::vector<std::pair<Num, Num>>> accepted(gaps.size());
    for (auto& p : cands) {
      auto& acc = accepted[p.gap];
      if (overlaps(acc, p.lo, p.hi)) continue;
      acc.emplace_back(p.lo, p.hi);
      PartitionElement e;
      e.word = p.word;
      e.image = p.ball;
      e.component = gaps[p.gap].component;
      if constexpr (Geometry::exact) {
        e.exact_left = p.lo;
        e.exact_right = p.hi;
      }
      e.left = num_to_double(p.lo);
      e.right = num_to_double(p.hi);
      part.elements.push_back(std::move(e));
    }
    std::vector<Gap<Num>> next;
    for (std::size_t gi = 0; gi < gaps.size(); ++gi)
      for (auto& g : subtract(gaps[gi], accepted[gi])) next.push_back(g);
    gaps = std::move(next);
    part.uncovered = uncovered();
  }
  // Keep lifted left endpoints in [0, 1).
  for (auto& e : part.elements) {
    if (e.left >= 1.0) {
      e.left -= 1.0;
      e.right -= 1.0;
      if (e.exact_left) {
        *e.exact_left -= 1;
        *e.exact_right -= 1;
      }
    }
  }
  return part;
}

}  // namespace detail

/// Truncated countable Markov partition with finite images and a finite cycle.
///
/// Steps: base cover of eps-balls; components of the circle minus ball
/// boundaries; one cycle element per ball along a Hamiltonian cycle of the
/// "B_j holds a piece mapping onto B_m" graph; then level-wise greedy filling
/// of the remaining gaps with pullbacks of balls (word length ascending,
/// largest first within a level) until the uncovered mass is at most tol or
/// the depth cap is reached. Affine systems are built in exact arithmetic.
inline CountableMarkovPartition build_markov_partition(const GeneratorSystem& system, const ExpandingCover& cover,
                                                       const PartitionOptions& opt) {
  if (!(to_double(opt.epsilon) < 0.5 * cover.eta))
    throw Error(ErrorKind::invalid_input, "epsilon must be below eta/2 = " + std::to_string(0.5 * cover.eta));
  if (opt.allow_exact && system.all_affine()) return detail::build(detail::ExactGeometry(system), system, cover, opt);
  return detail::build(detail::FloatGeometry(system), system, cover, opt);
}

}  // namespace lexpand
