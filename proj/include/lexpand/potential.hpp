#pragma once

#include "lexpand/transition.hpp"
#include "lexpand/walk.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <vector>

namespace lexpand {

using IndexWord = std::vector<std::size_t>;

/// Potential on the one-sided chain, evaluated on finite prefixes.
///
/// With finite memory m, eval reads exactly the first m symbols. With
/// unbounded memory it reads whatever prefix it is given and `modulus(n)`
/// bounds the error of a depth-n evaluation (and so var_n).
struct ShiftPotential {
  std::function<double(const IndexWord&)> eval;
  std::optional<std::size_t> memory;
  std::function<double(std::size_t)> modulus;
  std::size_t eval_depth = 16;  // prefix length used when memory is unbounded

  std::size_t window() const { return memory ? *memory : eval_depth; }
  double operator()(const IndexWord& w) const { return eval(w); }

  static ShiftPotential constant(double c) {
    ShiftPotential p;
    p.eval = [c](const IndexWord&) { return c; };
    p.memory = 0;
    return p;
  }
  /// phi(i) = values[i_0].
  static ShiftPotential first_symbol(std::vector<double> values) {
    ShiftPotential p;
    p.eval = [v = std::move(values)](const IndexWord& w) { return v[w.at(0)]; };
    p.memory = 1;
    return p;
  }
  /// phi(i) = f(i_0, i_1).
  static ShiftPotential edge(std::function<double(std::size_t, std::size_t)> f) {
    ShiftPotential p;
    p.eval = [f = std::move(f)](const IndexWord& w) { return f(w.at(0), w.at(1)); };
    p.memory = 2;
    return p;
  }

  ShiftPotential plus(double c) const {
    ShiftPotential p = *this;
    p.eval = [f = eval, c](const IndexWord& w) { return f(w) + c; };
    return p;
  }
  ShiftPotential scaled(double t) const {
    ShiftPotential p = *this;
    p.eval = [f = eval, t](const IndexWord& w) { return t * f(w); };
    if (modulus) p.modulus = [m = modulus, t](std::size_t n) { return std::fabs(t) * m(n); };
    return p;
  }
};

namespace detail {

inline double log_sum_exp(const std::vector<double>& xs) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : xs) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

/// Random allowed word of the given length starting anywhere.
inline IndexWord random_path(const TransitionMatrix& t, Rng& rng, std::size_t length, std::optional<IndexWord> prefix = {}) {
  IndexWord w = prefix ? *prefix : IndexWord{static_cast<std::size_t>(rng.next() % t.size())};
  while (w.size() < length) {
    const auto& row = t.rows[w.back()];
    if (row.empty()) break;
    w.push_back(row[rng.next() % row.size()]);
  }
  return w;
}

/// All allowed words of the given length (depth-first, lexicographic).
inline void allowed_words(const TransitionMatrix& t, std::size_t length, std::size_t budget,
                          const std::function<void(const IndexWord&)>& visit, bool& complete) {
  complete = true;
  std::size_t count = 0;
  IndexWord w;
  std::function<void()> rec = [&]() {
    if (!complete) return;
    if (w.size() == length) {
      if (++count > budget) {
        complete = false;
        return;
      }
      visit(w);
      return;
    }
    if (w.empty()) {
      for (std::size_t i = 0; i < t.size() && complete; ++i) {
        w.push_back(i);
        rec();
        w.pop_back();
      }
    } else {
      for (std::size_t j : t.rows[w.back()]) {
        if (!complete) break;
        w.push_back(j);
        rec();
        w.pop_back();
      }
    }
  };
  if (length > 0) rec();
}

}  // namespace detail

struct VariationEstimate {
  double lower = 0.0;
  double upper = std::numeric_limits<double>::infinity();
  bool exact = false;

  double value() const { return exact ? lower : upper; }
};

/// var_n = sup |phi(i) - phi(j)| over sequences agreeing in the first n
/// symbols. Exact when the memory is finite (0 if memory <= n, else by
/// enumeration of allowed words of length memory); otherwise a sampled lower
/// bound and the modulus upper bound.
inline VariationEstimate variation(const ShiftPotential& phi, const TransitionMatrix& t, std::size_t n,
                                   std::size_t samples = 4096, std::uint64_t seed = 1) {
  if (n < 2) throw Error(ErrorKind::invalid_input, "variations are measured from n = 2");
  VariationEstimate est;
  if (phi.memory && *phi.memory <= n) {
    est.lower = est.upper = 0.0;
    est.exact = true;
    return est;
  }
  if (phi.memory) {
    std::map<IndexWord, std::pair<double, double>> range;
    bool complete = true;
    detail::allowed_words(t, *phi.memory, 5000000, [&](const IndexWord& w) {
      IndexWord head(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(n));
      double v = phi(w);
      auto [it, fresh] = range.emplace(head, std::make_pair(v, v));
      if (!fresh) {
        it->second.first = std::min(it->second.first, v);
        it->second.second = std::max(it->second.second, v);
      }
    }, complete);
    double sup = 0.0;
    for (const auto& [k, r] : range) sup = std::max(sup, r.second - r.first);
    est.lower = sup;
    if (complete) {
      est.upper = sup;
      est.exact = true;
      return est;
    }
  } else {
    Rng rng(seed);
    const std::size_t depth = std::max(phi.eval_depth, n + 1);
    const std::size_t per_prefix = 16;
    for (std::size_t s = 0; s < samples / per_prefix; ++s) {
      auto head = detail::random_path(t, rng, n);
      double lo = std::numeric_limits<double>::infinity(), hi = -lo;
      for (std::size_t k = 0; k < per_prefix; ++k) {
        double v = phi(detail::random_path(t, rng, depth, head));
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      est.lower = std::max(est.lower, hi - lo);
    }
  }
  if (phi.modulus) est.upper = std::max(est.lower, phi.modulus(n));
  return est;
}

struct HolderFit {
  bool summable = false;
  bool holder = false;
  double C = 0.0;
  double theta = 0.0;
  double power = 0.0;  // exponent p of a fitted n^{-p} tail
};

/// Fits a variation profile var_n, n = first_n, first_n + 1, ...
///
/// Geometric (locally Hoelder) when log var_n is linear in n with slope below
/// 0: the slopes fitted on the two halves of the range agree within 5% and
/// the residual is small. C is the least constant with var_n <= C theta^n on
/// every measured n. Summable when geometric, or when the n^{-p} tail fit has
/// p >= 1.1.
inline HolderFit fit_holder(const std::vector<double>& profile, std::size_t first_n = 2) {
  if (profile.size() < 5) throw Error(ErrorKind::invalid_input, "variation profile must reach n >= 6");
  HolderFit fit;
  std::vector<double> ns, logs, lns;
  for (std::size_t k = 0; k < profile.size(); ++k)
    if (profile[k] > 0.0) {
      double n = static_cast<double>(first_n + k);
      ns.push_back(n);
      lns.push_back(std::log(n));
      logs.push_back(std::log(profile[k]));
    }
  if (ns.empty()) {
    fit.summable = fit.holder = true;
    return fit;
  }
  auto line = [](const std::vector<double>& x, const std::vector<double>& y, std::size_t a, std::size_t b) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0, m = static_cast<double>(b - a);
    for (std::size_t i = a; i < b; ++i) {
      sx += x[i];
      sy += y[i];
      sxx += x[i] * x[i];
      sxy += x[i] * y[i];
    }
    double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    return std::make_pair(slope, (sy - slope * sx) / m);
  };
  const std::size_t m = ns.size();
  if (m < 4) {
    fit.summable = fit.holder = false;
    return fit;
  }
  auto [slope, icpt] = line(ns, logs, 0, m);
  auto first = line(ns, logs, 0, m / 2 + 1).first;
  auto second = line(ns, logs, m / 2, m).first;
  double theta = std::exp(slope);
  bool stable = std::fabs(first - second) <= 0.05 * std::fabs(slope) + 1e-12;
  if (theta < 1.0 && stable) {
    fit.holder = fit.summable = true;
    fit.theta = theta;
    for (std::size_t i = 0; i < m; ++i) fit.C = std::max(fit.C, std::exp(logs[i] - ns[i] * slope));
    return fit;
  }
  (void)icpt;
  auto tail = line(lns, logs, m / 2, m);
  fit.power = -tail.first;
  fit.summable = fit.power >= 1.1;
  return fit;
}

struct PartitionFunction {
  double log_z = -std::numeric_limits<double>::infinity();
  bool exact = true;
  std::size_t words = 0;  // periodic words enumerated (0 on the matrix path)
  double log_uncertainty = 0.0;
};

/// log Z_n(phi, l): sum over allowed n-periodic words i with i_0 = l of
/// exp(phi_n(i)). Memory <= 2 uses the weighted matrix power (W^n)_{ll} in
/// log space; longer memory enumerates periodic words depth first.
inline PartitionFunction partition_function(const TransitionMatrix& t, const ShiftPotential& phi, std::size_t l,
                                            std::size_t n, std::size_t budget = 20000000) {
  if (n == 0) throw Error(ErrorKind::invalid_input, "n must be at least 1");
  if (l >= t.size()) throw Error(ErrorKind::invalid_input, "base state out of range");
  PartitionFunction z;
  const double ninf = -std::numeric_limits<double>::infinity();
  if (phi.memory && *phi.memory <= 2) {
    // log W_ij for the allowed edges
    std::vector<std::vector<double>> lw(t.size());
    for (std::size_t i = 0; i < t.size(); ++i)
      for (std::size_t j : t.rows[i]) lw[i].push_back(phi({i, j}));
    std::vector<double> cur(t.size(), ninf), mx(t.size()), acc(t.size());
    cur[l] = 0.0;
    for (std::size_t step = 0; step < n; ++step) {
      std::fill(mx.begin(), mx.end(), ninf);
      for (std::size_t i = 0; i < t.size(); ++i) {
        if (cur[i] == ninf) continue;
        for (std::size_t k = 0; k < t.rows[i].size(); ++k) {
          std::size_t j = t.rows[i][k];
          mx[j] = std::max(mx[j], cur[i] + lw[i][k]);
        }
      }
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t i = 0; i < t.size(); ++i) {
        if (cur[i] == ninf) continue;
        for (std::size_t k = 0; k < t.rows[i].size(); ++k) {
          std::size_t j = t.rows[i][k];
          acc[j] += std::exp(cur[i] + lw[i][k] - mx[j]);
        }
      }
      for (std::size_t j = 0; j < t.size(); ++j) cur[j] = mx[j] == ninf ? ninf : mx[j] + std::log(acc[j]);
    }
    z.log_z = cur[l];
    return z;
  }
  const std::size_t depth = phi.window();
  std::vector<double> terms;
  IndexWord w{l};
  bool complete = true;
  std::function<void()> rec = [&]() {
    if (!complete) return;
    if (w.size() == n) {
      if (!t(w.back(), l)) return;
      if (++z.words > budget) {
        complete = false;
        return;
      }
      double s = 0.0;
      IndexWord window(depth);
      for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t q = 0; q < depth; ++q) window[q] = w[(k + q) % n];
        s += phi(window);
      }
      terms.push_back(s);
      return;
    }
    for (std::size_t j : t.rows[w.back()]) {
      w.push_back(j);
      rec();
      w.pop_back();
    }
  };
  rec();
  if (!complete) throw Error(ErrorKind::convergence_failure, "periodic word budget exhausted at n=" + std::to_string(n));
  z.log_z = detail::log_sum_exp(terms);
  if (!phi.memory) {
    z.exact = false;
    if (phi.modulus) z.log_uncertainty = static_cast<double>(n) * phi.modulus(depth);
  }
  return z;
}

struct PressureReport {
  std::size_t base = 0;
  std::size_t base2 = 0;
  std::size_t n_min = 0, n_max = 0;
  std::vector<double> log_z;   // index n-1; -inf when there are no periodic words
  std::vector<double> log_z2;  // same for the second base state
  double pressure = 0.0;       // fitted slope
  double intercept = 0.0;
  double residual = 0.0;       // RMS of the linear fit
  double pressure2 = 0.0;
  double residual2 = 0.0;
  double discrepancy = 0.0;
  bool mixing_certified = false;
  std::size_t fit_points = 0;
};

namespace detail {

struct LineFit {
  double slope = 0.0, intercept = 0.0, residual = 0.0;
  std::size_t points = 0;
};

inline LineFit fit_log_z(const std::vector<double>& log_z, std::size_t n_min, std::size_t n_max) {
  std::vector<double> x, y;
  for (std::size_t n = n_min; n <= n_max; ++n)
    if (std::isfinite(log_z[n - 1])) {
      x.push_back(static_cast<double>(n));
      y.push_back(log_z[n - 1]);
    }
  LineFit f;
  f.points = x.size();
  if (x.size() < 2) return f;
  double m = static_cast<double>(x.size()), sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  f.slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  f.intercept = (sy - f.slope * sx) / m;
  double ss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double r = y[i] - (f.slope * x[i] + f.intercept);
    ss += r * r;
  }
  f.residual = std::sqrt(ss / m);
  return f;
}

}  // namespace detail

/// Slope of log Z_n over n in [n_max/2, n_max], skipping n without periodic
/// words, with a second base state as cross-check.
inline PressureReport gurevich_pressure(const TransitionMatrix& t, const ShiftPotential& phi, std::size_t base,
                                        std::size_t n_max, std::optional<std::size_t> base2 = {}) {
  if (n_max < 2) throw Error(ErrorKind::invalid_input, "n_max must be at least 2");
  PressureReport rep;
  rep.base = base;
  rep.base2 = base2.value_or(t.size() > 1 ? (base + 1) % t.size() : base);
  rep.n_min = std::max<std::size_t>(1, n_max / 2);
  rep.n_max = n_max;
  for (std::size_t n = 1; n <= n_max; ++n) {
    rep.log_z.push_back(partition_function(t, phi, rep.base, n).log_z);
    rep.log_z2.push_back(partition_function(t, phi, rep.base2, n).log_z);
  }
  auto f = detail::fit_log_z(rep.log_z, rep.n_min, n_max);
  if (f.points < 2) throw Error(ErrorKind::no_cycle, "no periodic words through base state " + std::to_string(base));
  rep.pressure = f.slope;
  rep.intercept = f.intercept;
  rep.residual = f.residual;
  rep.fit_points = f.points;
  auto g = detail::fit_log_z(rep.log_z2, rep.n_min, n_max);
  rep.pressure2 = g.points >= 2 ? g.slope : std::numeric_limits<double>::quiet_NaN();
  rep.residual2 = g.residual;
  rep.discrepancy = std::fabs(rep.pressure - rep.pressure2);
  rep.mixing_certified = check_shift_mixing(t, n_max).mixing;
  return rep;
}

}  // namespace lexpand
