#pragma once

#include "lexpand/induced.hpp"
#include "lexpand/walk.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

namespace lexpand {

/// Bin masses of an approximate invariant density on m equal bins of [0, 1).
struct UlamDensity {
  std::size_t bins = 0;
  std::vector<double> weights;  // sums to 1
  double min_density = 0.0;
  double max_density = 0.0;
  double c0 = 1.0;              // max_density / min_density
  double tv_change = 0.0;       // TV(mu_n, mu_{n-1}) at the last iteration
  double deficit = 0.0;         // largest mass lost to gaps in one step
  std::size_t iterations = 0;
  bool converged = true;

  double density(std::size_t j) const { return weights[j] * static_cast<double>(bins); }
};

namespace detail {

inline void check_bins(std::size_t m) {
  if (m < 64 || (m & (m - 1)) != 0)
    throw Error(ErrorKind::invalid_input, "bin count must be a power of two >= 64, got " + std::to_string(m));
}

/// Offset t in [0, hi] with F_w(x0 + t) - F_w(x0) = target, inverting one
/// generator at a time from the last. Each step is a Newton iteration kept
/// inside the bracket given by the derivative bounds of the generator; the
/// inverse branches contract, so errors do not grow along the word.
inline double invert_offset(const GeneratorSystem& s, const Word& w, double x0, double target, double hi) {
  if (s.all_affine()) return solve_offset(s, w, x0, target, 0.0, hi);
  std::vector<double> bases(w.size());
  double b = reduce(x0);
  for (std::size_t k = 0; k < w.size(); ++k) {
    bases[k] = b;
    b = s[static_cast<std::size_t>(w[k])](b);
  }
  double d = target;
  for (std::size_t k = w.size(); k-- > 0;) {
    const Generator& g = s[static_cast<std::size_t>(w[k])];
    double lo_x = d / g.max_derivative(), hi_x = d / g.min_derivative();
    if (lo_x > hi_x) std::swap(lo_x, hi_x);
    double x = d / g.a();
    for (int iter = 0; iter < 60; ++iter) {
      double f = g.lift_delta(bases[k], x) - d;
      if (f == 0.0) break;
      if (f > 0.0) hi_x = std::min(hi_x, x); else lo_x = std::max(lo_x, x);
      double next = x - f / g.derivative(bases[k] + x);
      if (!(next >= lo_x && next <= hi_x)) next = 0.5 * (lo_x + hi_x);
      if (std::fabs(next - x) <= 1e-17 * std::fabs(x) || next == x) {
        x = next;
        break;
      }
      x = next;
    }
    d = x;
  }
  return std::clamp(d, 0.0, hi);
}

/// Splits the lifted arc [left, left + len] at source bin edges and at the
/// preimages of target bin edges under the word, and reports each piece as
/// (source bin, target bin, length). Both bin edge sets are hit exactly for
/// affine words with dyadic data.
inline void transport_pieces(const GeneratorSystem& s, const Word& w, double left, double len, std::size_t m,
                             const std::function<void(std::size_t, std::size_t, double)>& emit) {
  if (!(len > 0.0)) return;
  const double md = static_cast<double>(m);
  const auto sb = static_cast<long long>(std::floor(left * md));
  const auto image = push_offset(s, w, left, len);
  const double base = image.base;
  const double span = image.delta;
  const auto tb = static_cast<long long>(std::floor(base * md));
  auto preimage = [&](double target) {
    if (w.empty()) return target;
    return invert_offset(s, w, left, target, len);
  };
  auto wrap = [m](long long b) { return static_cast<std::size_t>(((b % static_cast<long long>(m)) + static_cast<long long>(m)) % static_cast<long long>(m)); };
  long long si = sb, ti = tb;
  long long sq = 1, tq = 1;
  double s_next = static_cast<double>(sb + 1) / md - left;
  double t_target = static_cast<double>(tb + 1) / md - base;
  double t_next = t_target < span ? std::min(len, preimage(t_target)) : len;
  double pos = 0.0;
  while (pos < len) {
    double event = std::min({s_next, t_next, len});
    if (event > pos) emit(wrap(si), wrap(ti), event - pos);
    pos = std::max(pos, event);
    if (s_next <= event) {
      ++si;
      ++sq;
      s_next = static_cast<double>(sb + sq) / md - left;
    }
    if (t_next <= event && t_next < len) {
      ++ti;
      ++tq;
      t_target = static_cast<double>(tb + tq) / md - base;
      t_next = t_target < span ? std::max(t_next, std::min(len, preimage(t_target))) : len;
    }
  }
}

struct UlamEntry {
  std::size_t to;
  double fraction;  // of the source bin's mass
};

/// Ulam matrix of the induced map: row j lists where the mass of bin j goes.
inline std::vector<std::vector<UlamEntry>> ulam_matrix(const InducedMap& T, std::size_t m) {
  std::vector<std::vector<UlamEntry>> rows(m);
  const double md = static_cast<double>(m);
  for (std::size_t i = 0; i < T.size(); ++i) {
    const auto& e = T.partition()[i];
    transport_pieces(T.system(), e.word, e.left, e.length(), m, [&](std::size_t a, std::size_t b, double len) {
      auto& row = rows[a];
      if (!row.empty() && row.back().to == b) row.back().fraction += len * md;
      else row.push_back({b, len * md});
    });
  }
  for (auto& row : rows) {
    std::sort(row.begin(), row.end(), [](const UlamEntry& x, const UlamEntry& y) { return x.to < y.to; });
    std::vector<UlamEntry> merged;
    for (const auto& u : row) {
      if (!merged.empty() && merged.back().to == u.to) merged.back().fraction += u.fraction;
      else merged.push_back(u);
    }
    row = std::move(merged);
  }
  return rows;
}

inline double total_variation(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::fabs(a[i] - b[i]);
  return 0.5 * s;
}

}  // namespace detail

/// Cesaro average (1/n) sum_{i<n} T^i_* Leb of Ulam pushforwards. Mass that
/// falls into gaps of the partition is dropped and the iterate renormalized;
/// the largest such loss is reported as the deficit.
inline UlamDensity acip_pushforward(const InducedMap& T, std::size_t bins, std::size_t n_iter = 4096,
                                    double tol = 1e-3) {
  detail::check_bins(bins);
  if (n_iter == 0) throw Error(ErrorKind::invalid_input, "n_iter must be positive");
  const auto U = detail::ulam_matrix(T, bins);
  std::vector<double> nu(bins, 1.0 / static_cast<double>(bins)), next(bins), acc = nu, prev;
  UlamDensity d;
  d.bins = bins;
  for (std::size_t n = 1; n < n_iter; ++n) {
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t j = 0; j < bins; ++j)
      for (const auto& u : U[j]) next[u.to] += nu[j] * u.fraction;
    double mass = std::accumulate(next.begin(), next.end(), 0.0);
    if (!(mass > 0.0)) throw Error(ErrorKind::convergence_failure, "all mass left the induced domain");
    d.deficit = std::max(d.deficit, 1.0 - mass);
    for (double& v : next) v /= mass;
    std::swap(nu, next);
    prev = acc;
    for (std::size_t j = 0; j < bins; ++j) acc[j] += nu[j];
    // TV between consecutive Cesaro means
    double tv = 0.0;
    for (std::size_t j = 0; j < bins; ++j)
      tv += std::fabs(acc[j] / static_cast<double>(n + 1) - prev[j] / static_cast<double>(n));
    d.tv_change = 0.5 * tv;
  }
  d.iterations = n_iter;
  const double total = std::accumulate(acc.begin(), acc.end(), 0.0);
  d.weights.resize(bins);
  for (std::size_t j = 0; j < bins; ++j) d.weights[j] = acc[j] / total;
  auto [lo, hi] = std::minmax_element(d.weights.begin(), d.weights.end());
  d.min_density = *lo * static_cast<double>(bins);
  d.max_density = *hi * static_cast<double>(bins);
  d.c0 = d.min_density > 0.0 ? d.max_density / d.min_density : std::numeric_limits<double>::infinity();
  d.converged = d.tv_change <= tol;
  return d;
}

/// Largest max/min density ratio over the bins lying inside a single
/// component of the base cover. Induced densities jump between components
/// whose image multiplicities differ; inside one component the ratio is
/// governed by the distortion of the branches.
inline double component_oscillation(const InducedMap& T, const UlamDensity& mu) {
  const double md = static_cast<double>(mu.bins);
  double worst = 1.0;
  for (const auto& c : T.partition().components) {
    auto first = static_cast<long long>(std::ceil(to_double(c.lo) * md));
    auto last = static_cast<long long>(std::floor(to_double(c.hi) * md));  // exclusive
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (long long b = first; b < last; ++b) {
      double d = mu.density(static_cast<std::size_t>(b % static_cast<long long>(mu.bins)));
      lo = std::min(lo, d);
      hi = std::max(hi, d);
    }
    if (hi > 0.0) worst = std::max(worst, hi / lo);
  }
  return worst;
}

/// Sums pairs of bins: the density at half the resolution.
inline std::vector<double> coarsen(const std::vector<double>& weights) {
  std::vector<double> out(weights.size() / 2);
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = weights[2 * j] + weights[2 * j + 1];
  return out;
}

/// Mass of an Ulam density inside the lifted arc [left, left + len].
inline double arc_mass(const std::vector<double>& weights, double left, double len) {
  const std::size_t m = weights.size();
  double mass = 0.0;
  detail::transport_pieces(GeneratorSystem{}, Word{}, left, len, m, [&](std::size_t a, std::size_t, double l) {
    mass += weights[a] * static_cast<double>(m) * l;
  });
  return mass;
}

struct EntropyReport {
  double entropy = 0.0;
  std::vector<double> per_element;  // mu(M_i piece) times mean log|T'| on it
  double quadrature_error = 0.0;
};

/// Rokhlin integral of log|T'| against the binned measure: closed form on
/// affine elements, Gauss-Kronrod on each bin piece otherwise.
inline EntropyReport rokhlin_entropy(const InducedMap& T, const UlamDensity& mu) {
  EntropyReport rep;
  rep.per_element.assign(T.size(), 0.0);
  const std::size_t m = mu.bins;
  const bool affine = T.system().all_affine();
  for (std::size_t i = 0; i < T.size(); ++i) {
    const auto& e = T.partition()[i];
    const double slope = affine ? T.derivative(i, e.left) : 0.0;
    double pos = 0.0;
    detail::transport_pieces(GeneratorSystem{}, Word{}, e.left, e.length(), m, [&](std::size_t a, std::size_t, double len) {
      const double x0 = e.left + pos;
      pos += len;
      if (affine) {
        rep.per_element[i] += mu.density(a) * std::log(slope) * len;
        return;
      }
      double err = 0.0;
      double integral = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
          [&](double x) { return std::log(T.derivative(i, x)); }, x0, x0 + len, 5, 1e-13, &err);
      rep.per_element[i] += mu.density(a) * integral;
      rep.quadrature_error += mu.density(a) * err;
    });
    rep.entropy += rep.per_element[i];
  }
  return rep;
}

struct BirkhoffRun {
  double x0 = 0.0;
  std::vector<double> averages;  // after 1..n steps
  double value() const { return averages.empty() ? 0.0 : averages.back(); }
};

using Observable = std::function<double(std::size_t, double)>;  // (element, point)

/// Running averages of obs(i_t, x_t) along the T-orbit of x.
inline BirkhoffRun birkhoff_average(const InducedMap& T, const Observable& obs, double x, std::size_t n) {
  BirkhoffRun run;
  run.x0 = x;
  run.averages.reserve(n);
  double sum = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    auto i = T.find(x);
    if (!i)
      throw Error(ErrorKind::boundary_point,
                  "orbit of " + format17(run.x0) + " leaves the element interiors at step " + std::to_string(t));
    sum += obs(*i, x);
    run.averages.push_back(sum / static_cast<double>(t + 1));
    x = T.apply_branch(*i, x);
  }
  return run;
}

struct BirkhoffSpread {
  std::vector<BirkhoffRun> runs;
  double spread = 0.0;  // max - min of the final averages
  double mean = 0.0;
  std::size_t rejected = 0;  // starts whose orbit hit a boundary
};

/// Ergodicity diagnostic: final averages from random starts. A start whose
/// orbit reaches a boundary is redrawn (at most 10 times per start).
inline BirkhoffSpread birkhoff_spread(const InducedMap& T, const Observable& obs, std::size_t n, std::size_t starts = 10,
                                      std::uint64_t seed = 1) {
  BirkhoffSpread rep;
  Rng rng(seed);
  while (rep.runs.size() < starts) {
    if (rep.rejected > 10 * starts) throw Error(ErrorKind::boundary_point, "too many orbits reached a boundary");
    double x = rng.uniform();
    if (!T.find(x)) continue;
    try {
      rep.runs.push_back(birkhoff_average(T, obs, x, n));
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::boundary_point) throw;
      ++rep.rejected;
    }
  }
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& r : rep.runs) {
    lo = std::min(lo, r.value());
    hi = std::max(hi, r.value());
    rep.mean += r.value();
  }
  rep.mean /= static_cast<double>(starts);
  rep.spread = hi - lo;
  return rep;
}

struct PerronVector {
  std::vector<double> p;
  double residual = 0.0;  // max |(p Pi)_j - p_j|
  std::size_t iterations = 0;
};

/// Stationary vector of an irreducible row-stochastic matrix, by power
/// iteration of the lazy chain (I + Pi)/2 from the uniform vector.
inline PerronVector perron_vector(const std::vector<std::vector<double>>& pi, double tol = 1e-12,
                                  std::size_t max_iter = 10000000) {
  const std::size_t k = pi.size();
  if (k == 0) throw Error(ErrorKind::invalid_input, "empty matrix");
  auto reach = [&](bool forward) {
    std::vector<char> seen(k, 0);
    std::vector<std::size_t> stack{0};
    seen[0] = 1;
    while (!stack.empty()) {
      std::size_t i = stack.back();
      stack.pop_back();
      for (std::size_t j = 0; j < k; ++j)
        if (!seen[j] && (forward ? pi[i][j] : pi[j][i]) > 0.0) {
          seen[j] = 1;
          stack.push_back(j);
        }
    }
    return seen;
  };
  auto fwd = reach(true), bwd = reach(false);
  std::string cls;
  for (std::size_t j = 0; j < k; ++j)
    if (fwd[j] && bwd[j]) cls += (cls.empty() ? "" : ",") + std::to_string(j);
  for (std::size_t j = 0; j < k; ++j)
    if (!(fwd[j] && bwd[j]))
      throw Error(ErrorKind::reducible, "state " + std::to_string(j) + " does not communicate with the class {" +
                                            cls + "} of state 0");
  PerronVector out;
  std::vector<double> p(k, 1.0 / static_cast<double>(k)), q(k);
  auto apply = [&](const std::vector<double>& x, std::vector<double>& y) {
    std::fill(y.begin(), y.end(), 0.0);
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j) y[j] += x[i] * pi[i][j];
  };
  for (out.iterations = 1; out.iterations <= max_iter; ++out.iterations) {
    apply(p, q);
    double res = 0.0;
    for (std::size_t j = 0; j < k; ++j) res = std::max(res, std::fabs(q[j] - p[j]));
    out.residual = res;
    if (res <= tol) break;
    for (std::size_t j = 0; j < k; ++j) p[j] = 0.5 * (p[j] + q[j]);
    double s = std::accumulate(p.begin(), p.end(), 0.0);
    for (double& v : p) v /= s;
  }
  if (out.residual > tol)
    throw Error(ErrorKind::convergence_failure, "Perron residual " + format17(out.residual) + " above " + format17(tol));
  out.p = std::move(p);
  return out;
}

/// Measure on {0..k-1} x circle, one binned component per symbol.
struct FiberedMeasure {
  std::size_t bins = 0;
  std::vector<double> mass;                  // symbol masses
  std::vector<std::vector<double>> weights;  // weights[i] sums to mass[i]
  double Q = 1.0;                            // tower normalizer
  double deficit = 0.0;                      // mu_T mass outside the partition
  bool flagged = false;

  std::size_t symbols() const { return mass.size(); }
};

/// Tower lift: every element pushes its mu_T mass along the prefixes of its
/// word of length 0..tau-1; the sum normalized by Q = sum tau_k mu_T(M_k)
/// becomes each fiber, weighted by p.
inline FiberedMeasure lift_measure(const InducedMap& T, const UlamDensity& mu, const std::vector<double>& p,
                                   double tol = 1e-3) {
  if (p.size() != T.system().size())
    throw Error(ErrorKind::invalid_input, "symbol masses must have one entry per generator");
  const std::size_t m = mu.bins;
  const double md = static_cast<double>(m);
  std::vector<double> eta(m, 0.0);
  FiberedMeasure fm;
  fm.bins = m;
  fm.Q = 0.0;
  double inside = 0.0;
  for (std::size_t k = 0; k < T.size(); ++k) {
    const auto& e = T.partition()[k];
    double mk = arc_mass(mu.weights, e.left, e.length());
    inside += mk;
    fm.Q += static_cast<double>(e.tau()) * mk;
    for (std::size_t l = 0; l < e.tau(); ++l) {
      Word prefix(e.word.begin(), e.word.begin() + static_cast<std::ptrdiff_t>(l));
      detail::transport_pieces(T.system(), prefix, e.left, e.length(), m, [&](std::size_t a, std::size_t b, double len) {
        eta[b] += mu.weights[a] * md * len;
      });
    }
  }
  fm.deficit = std::max(0.0, 1.0 - inside);
  fm.flagged = fm.deficit > tol;
  for (double& v : eta) v /= fm.Q;
  double total = std::accumulate(eta.begin(), eta.end(), 0.0);
  for (double& v : eta) v /= total;
  fm.mass = p;
  for (double pi : p) {
    fm.weights.emplace_back(eta);
    for (double& v : fm.weights.back()) v *= pi;
  }
  return fm;
}

/// Binned (f_j)_* of a density on the whole circle.
inline std::vector<double> push_generator(const GeneratorSystem& s, std::size_t j, const std::vector<double>& weights) {
  const std::size_t m = weights.size();
  std::vector<double> out(m, 0.0);
  detail::transport_pieces(s, Word{static_cast<int>(j)}, 0.0, 1.0, m, [&](std::size_t a, std::size_t b, double len) {
    out[b] += weights[a] * static_cast<double>(m) * len;
  });
  return out;
}

struct StationarityReport {
  double residual = 0.0;             // max over fibers
  std::vector<double> per_fiber;     // TV(image_j, m_j) / m_j(circle)
  double mass_defect = 0.0;          // max_j |sum_i pi_ij mass_i - mass_j|
};

/// Compares (f_* m)_j = sum_i pi_ij (f_j)_* m_i with m_j bin by bin.
inline StationarityReport check_stationary(const GeneratorSystem& s, const FiberedMeasure& fm) {
  const std::size_t k = s.size();
  if (fm.symbols() != k) throw Error(ErrorKind::invalid_input, "fibered measure has the wrong number of symbols");
  StationarityReport rep;
  for (std::size_t j = 0; j < k; ++j) {
    std::vector<double> mix(fm.bins, 0.0);
    double in_mass = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      double pij = s.p(i, j);
      if (pij == 0.0) continue;
      in_mass += pij * fm.mass[i];
      for (std::size_t b = 0; b < fm.bins; ++b) mix[b] += pij * fm.weights[i][b];
    }
    auto image = push_generator(s, j, mix);
    double tv = detail::total_variation(image, fm.weights[j]);
    double scale = fm.mass[j] > 0.0 ? fm.mass[j] : 1.0;
    rep.per_fiber.push_back(tv / scale);
    rep.residual = std::max(rep.residual, tv / scale);
    rep.mass_defect = std::max(rep.mass_defect, std::fabs(in_mass - fm.mass[j]));
  }
  return rep;
}

struct SkewReport {
  std::size_t samples = 0;
  std::size_t cells = 0;
  double residual = 0.0;  // max |z| over symbol x coarse-bin cells
  double band = 0.0;      // Bonferroni-corrected three-sigma quantile
  bool ok = false;
};

/// Monte-Carlo check of one skew-product step (i, x) -> (j, f_j(x)) with j
/// drawn from row i of the driving matrix and (i, x) drawn from m.
inline SkewReport skew_invariance_check(const GeneratorSystem& s, const FiberedMeasure& fm, std::size_t samples,
                                        std::uint64_t seed = 1, std::size_t coarse = 16) {
  const std::size_t k = s.size();
  if (fm.bins % coarse != 0) throw Error(ErrorKind::invalid_input, "coarse bins must divide the bin count");
  SkewReport rep;
  rep.samples = samples;
  const double total = std::accumulate(fm.mass.begin(), fm.mass.end(), 0.0);
  std::vector<double> q(k * coarse, 0.0);
  const std::size_t per = fm.bins / coarse;
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t b = 0; b < fm.bins; ++b) q[i * coarse + b / per] += fm.weights[i][b] / total;
  std::vector<std::vector<double>> cdf(k);
  for (std::size_t i = 0; i < k; ++i) {
    cdf[i].resize(fm.bins);
    std::partial_sum(fm.weights[i].begin(), fm.weights[i].end(), cdf[i].begin());
  }
  auto rows = s.driving_matrix();
  Rng rng(seed);
  std::vector<double> count(k * coarse, 0.0);
  for (std::size_t n = 0; n < samples; ++n) {
    std::size_t i = rng.pick(fm.mass);
    double u = rng.uniform() * cdf[i].back();
    auto b = static_cast<std::size_t>(std::upper_bound(cdf[i].begin(), cdf[i].end(), u) - cdf[i].begin());
    b = std::min(b, fm.bins - 1);
    double x = (static_cast<double>(b) + rng.uniform()) / static_cast<double>(fm.bins);
    std::size_t j = rng.pick(rows[i]);
    double y = s[j](x);
    auto cell = std::min(coarse - 1, static_cast<std::size_t>(y * static_cast<double>(coarse)));
    count[j * coarse + cell] += 1.0;
  }
  const double N = static_cast<double>(samples);
  for (std::size_t c = 0; c < q.size(); ++c) {
    if (q[c] <= 0.0) {
      if (count[c] > 0.0) rep.residual = std::numeric_limits<double>::infinity();
      continue;
    }
    ++rep.cells;
    double sd = std::sqrt(N * q[c] * (1.0 - q[c]));
    if (sd > 0.0) rep.residual = std::max(rep.residual, std::fabs(count[c] - N * q[c]) / sd);
  }
  // family-wise level of a single three-sigma test
  const double alpha = 2.0 * (1.0 - boost::math::cdf(boost::math::normal(), 3.0));
  rep.band = boost::math::quantile(boost::math::normal(), 1.0 - alpha / (2.0 * static_cast<double>(std::max<std::size_t>(1, rep.cells))));
  rep.ok = rep.residual <= rep.band;
  return rep;
}

}  // namespace lexpand
