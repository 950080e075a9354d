#pragma once

#include "lexpand/partition_io.hpp"
#include "lexpand/transition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace lexpand {

/// Induced map T(x) = f_{w_i}(x) on int M_i, with return time tau_i = |w_i|.
class InducedMap {
 public:
  InducedMap(GeneratorSystem system, ExpandingCover cover, CountableMarkovPartition part)
      : system_(std::move(system)), cover_(std::move(cover)), part_(std::move(part)) {
    t_ = transition_matrix(part_);
    by_left_.resize(part_.size());
    for (std::size_t i = 0; i < by_left_.size(); ++i) by_left_[i] = i;
    std::sort(by_left_.begin(), by_left_.end(),
              [&](std::size_t a, std::size_t b) { return part_[a].left < part_[b].left; });
  }

  const GeneratorSystem& system() const { return system_; }
  const ExpandingCover& cover() const { return cover_; }
  const CountableMarkovPartition& partition() const { return part_; }
  const TransitionMatrix& matrix() const { return t_; }
  std::size_t size() const { return part_.size(); }
  std::size_t tau(std::size_t i) const { return part_[i].tau(); }
  double sigma() const { return cover_.sigma; }
  /// D_0 = 2 eps bounds every element diameter.
  double d0() const { return 2.0 * part_.base.eps(); }

  /// Element whose interior contains x, if any.
  std::optional<std::size_t> find(double x) const {
    x = reduce(x);
    auto it = std::upper_bound(by_left_.begin(), by_left_.end(), x,
                               [&](double v, std::size_t i) { return v < part_[i].left; });
    if (it != by_left_.begin()) {
      std::size_t i = *std::prev(it);
      if (x > part_[i].left && x < part_[i].right) return i;
    }
    if (!by_left_.empty()) {
      std::size_t last = by_left_.back();
      if (part_[last].right > 1.0 && x < part_[last].right - 1.0) return last;
    }
    return std::nullopt;
  }

  bool exact() const { return part_.exact; }

  /// Exact lookup for exact partitions.
  std::optional<std::size_t> find(const Rational& x) const {
    Rational xr = reduce(x);
    double xd = to_double(xr);
    auto it = std::upper_bound(by_left_.begin(), by_left_.end(), xd,
                               [&](double v, std::size_t i) { return v < part_[i].left; });
    std::size_t pos = static_cast<std::size_t>(it - by_left_.begin());
    auto inside = [&](std::size_t i) {
      const auto& e = part_[i];
      Rational off = reduce(Rational(xr - *e.exact_left));
      return off > 0 && off < *e.exact_right - *e.exact_left;
    };
    for (std::size_t k = pos >= 2 ? pos - 2 : 0; k < std::min(pos + 1, by_left_.size()); ++k)
      if (inside(by_left_[k])) return by_left_[k];
    if (!by_left_.empty() && inside(by_left_.back())) return by_left_.back();
    return std::nullopt;
  }

  Rational apply_branch(std::size_t i, const Rational& x) const {
    detail::ExactGeometry geom(system_);
    const auto& [a, b] = geom.coefficients(part_[i].word);
    return reduce(Rational(a * x + b));
  }

  /// Index of the element containing x; boundary and uncovered points are
  /// outside the domain.
  std::size_t locate(double x) const {
    auto i = find(x);
    if (!i) throw Error(ErrorKind::boundary_point, "x=" + format17(x) + " is not in the interior of any element");
    return *i;
  }

  double operator()(double x) const { return apply_word(system_, part_[locate(x)].word, x); }
  double apply_branch(std::size_t i, double x) const { return apply_word(system_, part_[i].word, x); }

  double derivative(std::size_t i, double x) const { return derivative_along_word(system_, part_[i].word, x); }

  /// Point of M_i mapped by h_i to y in the image ball B_{j_i}.
  double pull_back(std::size_t i, double y) const {
    const auto& e = part_[i];
    double off = reduce(y - part_.base.left(e.image));
    double t = solve_offset(system_, e.word, e.left, off, 0.0, e.length());
    return reduce(e.left + t);
  }

 private:
  GeneratorSystem system_;
  ExpandingCover cover_;
  CountableMarkovPartition part_;
  TransitionMatrix t_;
  std::vector<std::size_t> by_left_;
};

inline InducedMap induce(const GeneratorSystem& system, const ExpandingCover& cover,
                         const CountableMarkovPartition& part) {
  return InducedMap(system, cover, part);
}

/// M_{i_0..i_l} = {x in M_{i_0} : T^k x in M_{i_k}, k <= l}.
struct Cylinder {
  std::vector<std::size_t> indices;
  double lo = 0.0;   // lo in [0,1)
  double len = 0.0;  // kept apart from lo so tiny cylinders keep relative precision
  std::optional<Rational> exact_lo, exact_hi;
  std::size_t total_time = 0;
  std::size_t image = 0;  // T^{l+1} maps the cylinder onto this ball

  std::size_t depth() const { return indices.size(); }
  double hi() const { return lo + len; }
  double length() const { return len; }
  Arc arc() const { return Arc(lo, len); }
  double midpoint() const { return reduce(lo + 0.5 * len); }
  bool contains(const Rational& x) const {
    Rational off = reduce(Rational(x - *exact_lo));
    return off <= *exact_hi - *exact_lo;
  }
  /// Closed containment; exact when the cylinder carries rational endpoints.
  bool contains(double x) const {
    if (exact_lo) return contains(exact_value(x));
    double off = reduce(x - lo);
    return off <= len || off == 0.0;
  }
  Rational exact_midpoint() const { return (*exact_lo + *exact_hi) / 2; }
};

inline void check_allowed(const InducedMap& T, const std::vector<std::size_t>& word) {
  if (word.empty()) throw Error(ErrorKind::invalid_word, "empty index word");
  for (std::size_t k = 0; k < word.size(); ++k) {
    if (word[k] >= T.size()) throw Error(ErrorKind::invalid_word, "index " + std::to_string(word[k]) + " out of range");
    if (k + 1 < word.size() && !T.matrix()(word[k], word[k + 1]))
      throw Error(ErrorKind::invalid_word, "transition " + std::to_string(word[k]) + " -> " +
                                               std::to_string(word[k + 1]) + " is not allowed");
  }
}

/// Pulls the cylinder of the tail back through each branch, innermost first,
/// asserting diam <= sigma^{tau} * previous diam at every step.
inline Cylinder refine_cylinder(const InducedMap& T, const std::vector<std::size_t>& word) {
  check_allowed(T, word);
  const auto& part = T.partition();
  const auto& system = T.system();
  Cylinder c;
  c.indices = word;
  std::size_t last = word.back();
  c.lo = part[last].left;
  c.len = part[last].length();
  c.exact_lo = part[last].exact_left;
  c.exact_hi = part[last].exact_right;
  c.image = part[last].image;
  c.total_time = part[last].tau();
  std::optional<detail::ExactGeometry> exact;
  if (part.exact && c.exact_lo) exact.emplace(system);
  for (std::size_t k = word.size() - 1; k-- > 0;) {
    const auto& e = part[word[k]];
    double before = c.len;
    if (exact && e.exact_left) {
      Rational off = reduce(*c.exact_lo - part.base.exact_left(e.image));
      Rational len = *c.exact_hi - *c.exact_lo;
      Rational a = exact->coefficients(e.word).first;
      c.exact_lo = reduce(Rational(*e.exact_left + off / a));
      c.exact_hi = *c.exact_lo + len / a;
      c.lo = to_double(*c.exact_lo);
      c.len = to_double(len / a);
    } else {
      double off = reduce(c.lo - part.base.left(e.image));
      double t0 = solve_offset(system, e.word, e.left, off, 0.0, e.length());
      double x0 = reduce(e.left + t0);
      c.len = solve_offset(system, e.word, x0, c.len, 0.0, e.length() - t0);
      c.lo = x0;
      c.exact_lo.reset();
      c.exact_hi.reset();
    }
    c.total_time += e.tau();
    double bound = std::pow(T.sigma(), static_cast<double>(e.tau())) * before;
    if (c.len > bound * (1.0 + 1e-9))
      throw Error(ErrorKind::convergence_failure, "cylinder diameter decay violated at step " + std::to_string(k));
  }
  return c;
}

/// Inverse branch of T^n into M_k: the cylinder (i_1..i_n, k), mapped by T^n
/// onto M_k.
struct InverseBranch {
  std::vector<std::size_t> word;  // i_1..i_n
  Cylinder cylinder;

  double apply(const InducedMap& T, double y) const {
    double x = y;
    for (std::size_t k = word.size(); k-- > 0;) x = T.pull_back(word[k], x);
    return x;
  }
};

/// All inverse branches of depth n into M_k, at most `budget` of them.
inline std::vector<InverseBranch> inverse_branches(const InducedMap& T, std::size_t k, std::size_t depth,
                                                   std::size_t budget = 100000) {
  if (depth == 0) throw Error(ErrorKind::invalid_input, "inverse branch depth must be at least 1");
  auto cols = T.matrix().columns();
  std::vector<std::vector<std::size_t>> layer{{k}};
  for (std::size_t d = 0; d < depth; ++d) {
    std::vector<std::vector<std::size_t>> next;
    for (const auto& w : layer)
      for (std::size_t i : cols[w.front()]) {
        if (next.size() >= budget) break;
        std::vector<std::size_t> x{i};
        x.insert(x.end(), w.begin(), w.end());
        next.push_back(std::move(x));
      }
    layer = std::move(next);
  }
  std::vector<InverseBranch> out;
  out.reserve(layer.size());
  for (auto& w : layer) {
    InverseBranch b;
    b.cylinder = refine_cylinder(T, w);
    w.pop_back();
    b.word = std::move(w);
    out.push_back(std::move(b));
  }
  return out;
}

struct ConditionResult {
  bool ok = true;
  std::string detail;
  std::optional<std::size_t> witness;
};

struct InducingReport {
  ConditionResult h1, h2, h3, h4, h5;
  double sigma_star = 0.0;
  double d0 = 0.0;
  double min_margin = 0.0;      // smallest neighbourhood certified for H2
  double min_expansion = 0.0;   // min |T'| over all elements
  double max_distortion = 1.0;  // max sup/inf of |T'| on an element
  double k1 = 1.0;
  std::size_t h3_depth = 0;

  bool ok() const { return h1.ok && h2.ok && h3.ok && h4.ok && h5.ok; }
};

/// K_1 = exp(C_0 (2 eps)^alpha sum_k sigma^{k alpha}).
inline double induced_distortion_constant(const InducedMap& T, double alpha = 1.0) {
  double C0 = T.system().log_derivative_lipschitz();
  if (C0 == 0.0) return 1.0;
  double s = std::pow(T.sigma(), alpha);
  return std::exp(C0 * std::pow(T.d0(), alpha) / (1.0 - s));
}

namespace detail {

inline std::vector<double> element_samples(const PartitionElement& e, std::size_t count) {
  std::vector<double> xs;
  for (std::size_t k = 0; k <= count; ++k)
    xs.push_back(reduce(e.left + e.length() * static_cast<double>(k) / static_cast<double>(count)));
  return xs;
}

}  // namespace detail

/// Checks the inducing-scheme conditions on the truncated partition.
/// H3 is certified on every cylinder up to `h3_depth` indices (capped by
/// `h3_budget` cylinders per depth).
inline InducingReport verify_inducing_scheme(const InducedMap& T, std::size_t samples = 64, std::size_t h3_depth = 3,
                                             std::size_t h3_budget = 20000) {
  InducingReport rep;
  const auto& part = T.partition();
  const auto& system = T.system();
  rep.d0 = T.d0();
  rep.k1 = induced_distortion_constant(T);

  auto fip = check_fip(part, &system);
  auto fcp = check_fcp(T.matrix(), part.cycle);
  rep.h1.ok = fip.ok && fcp.ok;
  if (!fip.ok) {
    rep.h1.detail = "element image is not a base ball";
    rep.h1.witness = fip.offending.front();
  } else if (!fcp.ok) {
    rep.h1.detail = "element without cycle in/out edge";
    rep.h1.witness = fcp.witness;
  }

  // H2: the branch extends to a neighbourhood of M_i inside the charts, with
  // positive derivative there.
  rep.min_margin = T.cover().r;
  for (std::size_t i = 0; i < part.size() && rep.h2.ok; ++i) {
    const auto& e = part[i];
    double mu = T.cover().r;
    while (mu > 1e-12 && !detail::piece_respects_charts(system, T.cover(), e.word, e.left - mu, e.right + mu)) mu *= 0.5;
    if (mu <= 1e-12) {
      rep.h2 = {false, "no chart neighbourhood around element", i};
      break;
    }
    for (std::size_t k = 0; k <= samples; ++k) {
      double x = e.left - mu + (e.length() + 2.0 * mu) * static_cast<double>(k) / static_cast<double>(samples);
      if (!(T.derivative(i, reduce(x)) > 0.0)) {
        rep.h2 = {false, "derivative not positive near x=" + format17(reduce(x)), i};
        break;
      }
    }
    rep.min_margin = std::min(rep.min_margin, mu);
  }

  // H4 and H5 on a grid of each element; sigma_* = max 1/|T'| with slack.
  rep.min_expansion = std::numeric_limits<double>::infinity();
  double worst_inv = 0.0;
  for (std::size_t i = 0; i < part.size(); ++i) {
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (double x : detail::element_samples(part[i], samples)) {
      double d = std::fabs(T.derivative(i, x));
      lo = std::min(lo, d);
      hi = std::max(hi, d);
    }
    rep.min_expansion = std::min(rep.min_expansion, lo);
    worst_inv = std::max(worst_inv, 1.0 / lo);
    double ratio = hi / lo;
    rep.max_distortion = std::max(rep.max_distortion, ratio);
    if (rep.h4.ok && !(lo * T.sigma() > 1.0)) rep.h4 = {false, "|T'| <= 1/sigma on element", i};
    if (rep.h5.ok && ratio > rep.k1 * (1.0 + 1e-12)) rep.h5 = {false, "distortion ratio above K_1", i};
  }
  if (part.size() == 0) rep.min_expansion = 0.0;
  rep.sigma_star = std::min(1.0, worst_inv * certificate_slack);

  // H3: max diameter of depth-l cylinders <= sigma_*^l D_0.
  rep.h3_depth = h3_depth;
  if (!(rep.sigma_star < 1.0)) rep.h3 = {false, "sigma_* is not below 1", std::nullopt};
  std::vector<std::vector<std::size_t>> layer;
  for (std::size_t i = 0; i < part.size(); ++i) layer.push_back({i});
  for (std::size_t d = 1; d <= h3_depth && rep.h3.ok; ++d) {
    double bound = std::pow(rep.sigma_star, static_cast<double>(d)) * rep.d0;
    for (const auto& w : layer) {
      auto c = refine_cylinder(T, w);
      if (c.length() > bound) {
        rep.h3 = {false, "depth " + std::to_string(d) + " cylinder wider than sigma_*^depth D_0", w.front()};
        break;
      }
    }
    if (d == h3_depth) break;
    std::vector<std::vector<std::size_t>> next;
    for (const auto& w : layer) {
      for (std::size_t j : T.matrix().rows[w.back()]) {
        if (next.size() >= h3_budget) break;
        auto x = w;
        x.push_back(j);
        next.push_back(std::move(x));
      }
      if (next.size() >= h3_budget) break;
    }
    layer = std::move(next);
  }
  return rep;
}

struct DistortionReport {
  double empirical = 1.0;
  double analytic = 1.0;
  std::size_t cylinders = 0;
  bool ok = true;
};

/// max over the cylinders, j in [j_min, j_max] (clamped to l+1) and pairs of
/// sample points of |DT^j(y)| / |DT^j(z)|.
inline DistortionReport distortion_bound_induced(const InducedMap& T, const std::vector<Cylinder>& cylinders,
                                                 std::size_t j_min = 0,
                                                 std::size_t j_max = std::numeric_limits<std::size_t>::max(),
                                                 std::size_t samples = 8) {
  DistortionReport rep;
  rep.analytic = induced_distortion_constant(T);
  const auto& system = T.system();
  for (const auto& c : cylinders) {
    ++rep.cylinders;
    std::size_t top = std::min(j_max, c.depth());
    for (std::size_t j = j_min; j <= top; ++j) {
      double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
      for (std::size_t s = 0; s <= samples; ++s) {
        double x = c.lo + c.length() * static_cast<double>(s) / static_cast<double>(samples);
        double logd = 0.0;
        double y = reduce(x);
        for (std::size_t k = 0; k < j; ++k)
          for (int sym : T.partition()[c.indices[k]].word) {
            logd += std::log(system[sym].derivative(y));
            y = system[sym](y);
          }
        lo = std::min(lo, logd);
        hi = std::max(hi, logd);
      }
      rep.empirical = std::max(rep.empirical, std::exp(hi - lo));
    }
  }
  rep.ok = rep.empirical <= rep.analytic * (1.0 + 1e-12);
  return rep;
}

using Itinerary = std::vector<std::size_t>;

/// Exact orbit for exact partitions.
inline Itinerary encode(const InducedMap& T, const Rational& x, std::size_t depth) {
  Itinerary it;
  Rational y = reduce(x);
  for (std::size_t t = 0; t < depth; ++t) {
    auto i = T.find(y);
    if (!i)
      throw Error(ErrorKind::boundary_point,
                  "orbit of x=" + format_rational(x) + " leaves the element interiors at step " + std::to_string(t));
    it.push_back(*i);
    if (t + 1 < depth) y = T.apply_branch(*i, y);
  }
  return it;
}

/// j_t = element containing T^t(x), t < depth. The orbit is computed in
/// rational arithmetic when the partition is exact.
inline Itinerary encode(const InducedMap& T, double x, std::size_t depth) {
  if (T.exact()) return encode(T, exact_value(x), depth);
  Itinerary it;
  double y = reduce(x);
  for (std::size_t t = 0; t < depth; ++t) {
    auto i = T.find(y);
    if (!i)
      throw Error(ErrorKind::boundary_point,
                  "orbit of x=" + format17(x) + " leaves the element interiors at step " + std::to_string(t));
    it.push_back(*i);
    if (t + 1 < depth) y = T.apply_branch(*i, y);
  }
  return it;
}

/// Cylinder of the prefix; its midpoint is the point estimate, half its
/// length the error bar.
inline Cylinder decode(const InducedMap& T, const Itinerary& prefix) { return refine_cylinder(T, prefix); }

/// Grid check that T^N(int M_b) covers every retained element interior for
/// each cycle element b, N the cycle length. Returns the number of grid
/// points inside W that some T^N(int M_b) misses.
inline std::size_t markov_image_misses(const InducedMap& T, std::size_t grid = 2000) {
  const auto& part = T.partition();
  const std::size_t N = part.cycle.size();
  std::size_t misses = 0;
  for (std::size_t b : part.cycle) {
    // indices reachable from b in exactly N-1 steps; T^N(M_b) is the union of their image balls
    std::vector<char> cur(T.size(), 0);
    cur[b] = 1;
    for (std::size_t s = 0; s + 1 < N; ++s) {
      std::vector<char> nxt(T.size(), 0);
      for (std::size_t i = 0; i < T.size(); ++i)
        if (cur[i])
          for (std::size_t j : T.matrix().rows[i]) nxt[j] = 1;
      cur = std::move(nxt);
    }
    std::vector<char> ball(part.base.size(), 0);
    for (std::size_t i = 0; i < T.size(); ++i)
      if (cur[i]) ball[part[i].image] = 1;
    for (std::size_t g = 0; g < grid; ++g) {
      double x = (static_cast<double>(g) + 0.5) / static_cast<double>(grid);
      if (!T.find(x)) continue;
      bool hit = false;
      for (std::size_t m = 0; m < ball.size() && !hit; ++m)
        if (ball[m] && part.base.ball(m).contains_open(x)) hit = true;
      if (!hit) ++misses;
    }
  }
  return misses;
}

/// sum_i tau_i lambda(M_i).
inline double mean_return_time(const CountableMarkovPartition& part) {
  double s = 0.0;
  for (const auto& e : part.elements) s += static_cast<double>(e.tau()) * e.length();
  return s;
}

inline std::string format_itineraries(const std::string& partition_hash, const std::vector<Itinerary>& orbits) {
  std::ostringstream out;
  out << "# partition " << partition_hash << "\n";
  for (const auto& it : orbits) {
    for (std::size_t k = 0; k < it.size(); ++k) out << (k ? " " : "") << it[k];
    out << "\n";
  }
  return out.str();
}

/// Reads an itinerary dump; the header hash must match `expected_hash`.
inline std::vector<Itinerary> parse_itineraries(const std::string& text, const std::string& expected_hash) {
  std::istringstream in(text);
  std::string line;
  std::vector<Itinerary> out;
  int lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!header) {
      std::istringstream ls(line);
      std::string hash, kw, h;
      ls >> hash >> kw >> h;
      if (hash != "#" || kw != "partition") throw ParseError(lineno, 1, "missing partition header");
      if (h != expected_hash) throw Error(ErrorKind::dependency, "itineraries belong to partition " + h);
      header = true;
      continue;
    }
    std::istringstream ls(line);
    Itinerary it;
    std::string tok;
    while (ls >> tok) {
      if (tok.find_first_not_of("0123456789") != std::string::npos) throw ParseError(lineno, 1, "bad index '" + tok + "'");
      it.push_back(static_cast<std::size_t>(std::stoull(tok)));
    }
    out.push_back(std::move(it));
  }
  if (!header) throw ParseError(1, 1, "empty itinerary file");
  return out;
}

}  // namespace lexpand
