#pragma once

#include "lexpand/induced.hpp"
#include "lexpand/potential.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <tuple>
#include <vector>

namespace lexpand {

/// Truncated weighted matrix W_ij = t_ij exp(phi(i, j)) with its Perron data.
struct TransferOperator {
  TransitionMatrix t;
  std::vector<std::vector<double>> w;  // aligned with t.rows
  double lambda = 0.0;
  std::vector<double> h;   // right eigenvector, W h = lambda h
  std::vector<double> nu;  // left eigenvector, nu W = lambda nu, <nu, h> = 1
  double residual = 0.0;   // max of the two relative eigen-residuals
  std::size_t iterations = 0;

  double pressure() const { return std::log(lambda); }
};

/// Stationary Markov measure on the chain: p_i pi_ij.
struct MarkovMeasure {
  TransitionMatrix t;
  std::vector<double> p;
  std::vector<std::vector<double>> pi;  // aligned with t.rows

  /// mu([a_0 .. a_{n-1}]).
  double cylinder(const IndexWord& a) const {
    if (a.empty()) return 1.0;
    double m = p[a[0]];
    for (std::size_t k = 0; k + 1 < a.size(); ++k) {
      const auto& row = t.rows[a[k]];
      auto it = std::lower_bound(row.begin(), row.end(), a[k + 1]);
      if (it == row.end() || *it != a[k + 1]) return 0.0;
      m *= pi[a[k]][static_cast<std::size_t>(it - row.begin())];
    }
    return m;
  }
};

namespace detail {

inline std::vector<double> mat_vec(const TransferOperator& op, const std::vector<double>& x) {
  std::vector<double> y(x.size(), 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < op.t.rows[i].size(); ++k) s += op.w[i][k] * x[op.t.rows[i][k]];
    y[i] = s;
  }
  return y;
}

inline std::vector<double> vec_mat(const TransferOperator& op, const std::vector<double>& x) {
  std::vector<double> y(x.size(), 0.0);
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t k = 0; k < op.t.rows[i].size(); ++k) y[op.t.rows[i][k]] += x[i] * op.w[i][k];
  return y;
}

inline double max_abs(const std::vector<double>& x) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::fabs(v));
  return m;
}

/// Power iteration for the Perron vector; returns (lambda, vector, residual,
/// iterations). `apply` is either W or its transpose.
template <class Apply>
std::tuple<double, std::vector<double>, double, std::size_t> perron(std::size_t n, Apply apply, double tol,
                                                                     std::size_t max_iter) {
  std::vector<double> x(n, 1.0 / static_cast<double>(n));
  double lambda = 0.0, res = std::numeric_limits<double>::infinity();
  std::size_t it = 0;
  for (; it < max_iter; ++it) {
    auto y = apply(x);
    double norm = std::accumulate(y.begin(), y.end(), 0.0);
    if (!(norm > 0.0)) throw Error(ErrorKind::convergence_failure, "transfer matrix annihilates the iterate");
    for (double& v : y) v /= norm;
    auto z = apply(y);
    lambda = std::accumulate(z.begin(), z.end(), 0.0);
    double r = 0.0;
    for (std::size_t i = 0; i < n; ++i) r = std::max(r, std::fabs(z[i] - lambda * y[i]));
    res = r / (lambda * max_abs(y));
    x = std::move(y);
    if (res <= tol) break;
  }
  return {lambda, x, res, it + 1};
}

}  // namespace detail

/// Perron data of W for a potential of memory <= 2. The truncation must be
/// primitive (checked up to `horizon` powers).
inline TransferOperator transfer_gibbs(const TransitionMatrix& t, const ShiftPotential& phi, double tol = 1e-12,
                                       std::size_t max_iter = 1000000, std::size_t horizon = 0) {
  if (!phi.memory || *phi.memory > 2)
    throw Error(ErrorKind::invalid_input, "transfer operator needs memory <= 2; recode the chain into blocks first");
  if (t.size() == 0) throw Error(ErrorKind::invalid_input, "empty transition matrix");
  auto mix = check_shift_mixing(t, horizon ? horizon : 2 * t.size() + 8);
  if (!mix.mixing)
    throw Error(ErrorKind::convergence_failure, "truncated matrix is not primitive: no power up to " +
                                                    std::to_string(horizon ? horizon : 2 * t.size() + 8) +
                                                    " is positive");
  TransferOperator op;
  op.t = t;
  op.w.resize(t.size());
  for (std::size_t i = 0; i < t.size(); ++i)
    for (std::size_t j : t.rows[i]) op.w[i].push_back(std::exp(phi({i, j})));
  auto [lr, h, rr, ir] = detail::perron(t.size(), [&](const std::vector<double>& x) { return detail::mat_vec(op, x); },
                                        tol, max_iter);
  auto [ll, nu, rl, il] = detail::perron(t.size(), [&](const std::vector<double>& x) { return detail::vec_mat(op, x); },
                                         tol, max_iter);
  op.lambda = 0.5 * (lr + ll);
  op.residual = std::max(rr, rl);
  op.iterations = std::max(ir, il);
  if (op.residual > tol)
    throw Error(ErrorKind::convergence_failure,
                "power iteration residual " + format17(op.residual) + " above " + format17(tol));
  double dot = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) dot += nu[i] * h[i];
  for (double& v : nu) v /= dot;
  op.h = std::move(h);
  op.nu = std::move(nu);
  return op;
}

/// mu_ij = p_i pi_ij with p_i = nu_i h_i and pi_ij = W_ij h_j / (lambda h_i).
inline MarkovMeasure gibbs_measure(const TransferOperator& op) {
  MarkovMeasure m;
  m.t = op.t;
  m.p.resize(op.h.size());
  m.pi.resize(op.h.size());
  for (std::size_t i = 0; i < op.h.size(); ++i) {
    m.p[i] = op.nu[i] * op.h[i];
    for (std::size_t k = 0; k < op.t.rows[i].size(); ++k)
      m.pi[i].push_back(op.w[i][k] * op.h[op.t.rows[i][k]] / (op.lambda * op.h[i]));
  }
  return m;
}

/// Stationary vector of a stochastic matrix by power iteration of the lazy
/// chain (I + pi)/2.
inline std::vector<double> stationary_distribution(const TransitionMatrix& t, const std::vector<std::vector<double>>& pi,
                                                   double tol = 1e-15, std::size_t max_iter = 1000000) {
  const std::size_t n = t.size();
  std::vector<double> p(n, 1.0 / static_cast<double>(n)), q(n);
  for (std::size_t it = 0; it < max_iter; ++it) {
    for (std::size_t i = 0; i < n; ++i) q[i] = 0.5 * p[i];
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < t.rows[i].size(); ++k) q[t.rows[i][k]] += 0.5 * p[i] * pi[i][k];
    double s = std::accumulate(q.begin(), q.end(), 0.0), d = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      q[i] /= s;
      d = std::max(d, std::fabs(q[i] - p[i]));
    }
    std::swap(p, q);
    if (d <= tol) return p;
  }
  throw Error(ErrorKind::convergence_failure, "stationary vector did not converge");
}

struct GibbsCertificate {
  double P = 0.0;
  double B = 1.0;
  double max_ratio = 1.0;  // sup of mu / exp(phi_n - nP)
  double min_ratio = 1.0;  // inf of the same
  std::size_t depth = 0;
  std::size_t cylinders = 0;
  bool infinite = false;   // an allowed cylinder has zero mass
  bool complete = true;
  std::vector<double> log_b_by_depth;
};

/// Worst ratio mu([a]) / exp(phi_n - nP) over all allowed cylinders up to
/// depth d. For memory-2 potentials the last term is taken over every allowed
/// continuation.
inline GibbsCertificate verify_gibbs(const MarkovMeasure& mu, const TransitionMatrix& t, const ShiftPotential& phi,
                                     double P, std::size_t depth, std::size_t budget = 2000000) {
  if (!phi.memory || *phi.memory > 2) throw Error(ErrorKind::invalid_input, "Gibbs check needs memory <= 2");
  GibbsCertificate cert;
  cert.P = P;
  cert.depth = depth;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;  // log ratios
  for (std::size_t n = 1; n <= depth; ++n) {
    bool complete = true;
    detail::allowed_words(t, n, budget, [&](const IndexWord& a) {
      ++cert.cylinders;
      double m = mu.cylinder(a);
      double base = 0.0;
      for (std::size_t k = 0; k + 1 < n; ++k) base += phi({a[k], a[k + 1]});
      double smin = std::numeric_limits<double>::infinity(), smax = -smin;
      if (*phi.memory <= 1) {
        smin = smax = phi({a[n - 1], a[n - 1]});
      } else {
        for (std::size_t c : t.rows[a[n - 1]]) {
          double v = phi({a[n - 1], c});
          smin = std::min(smin, v);
          smax = std::max(smax, v);
        }
      }
      if (!(m > 0.0)) {
        cert.infinite = true;
        return;
      }
      double lm = std::log(m) + static_cast<double>(n) * P;
      lo = std::min(lo, lm - (base + smax));
      hi = std::max(hi, lm - (base + smin));
    }, complete);
    cert.complete = cert.complete && complete;
    cert.log_b_by_depth.push_back(std::max(hi, -lo));
  }
  cert.max_ratio = std::exp(hi);
  cert.min_ratio = std::exp(lo);
  cert.B = cert.infinite ? std::numeric_limits<double>::infinity() : std::max(cert.max_ratio, 1.0 / cert.min_ratio);
  return cert;
}

struct EquilibriumReport {
  double entropy = 0.0;
  double integral = 0.0;
  double residual = 0.0;  // P - (h + int phi)
  double invariance_defect = 0.0;
};

/// h_mu + int phi dmu for a Markov measure and a potential of memory <= 2.
inline EquilibriumReport equilibrium_check(const MarkovMeasure& mu, const ShiftPotential& phi, double P,
                                           double invariance_tol = 1e-10) {
  if (!phi.memory || *phi.memory > 2) throw Error(ErrorKind::invalid_input, "equilibrium check needs memory <= 2");
  EquilibriumReport rep;
  const auto& t = mu.t;
  std::vector<double> flow(t.size(), 0.0);
  for (std::size_t i = 0; i < t.size(); ++i)
    for (std::size_t k = 0; k < t.rows[i].size(); ++k) flow[t.rows[i][k]] += mu.p[i] * mu.pi[i][k];
  std::size_t worst = 0;
  for (std::size_t j = 0; j < t.size(); ++j) {
    double d = std::fabs(flow[j] - mu.p[j]);
    if (d > rep.invariance_defect) {
      rep.invariance_defect = d;
      worst = j;
    }
  }
  if (rep.invariance_defect > invariance_tol)
    throw Error(ErrorKind::non_invariant, "mass balance fails at index " + std::to_string(worst) + " by " +
                                              format17(rep.invariance_defect));
  for (std::size_t i = 0; i < t.size(); ++i)
    for (std::size_t k = 0; k < t.rows[i].size(); ++k) {
      double q = mu.p[i] * mu.pi[i][k];
      if (q <= 0.0) continue;
      rep.entropy -= q * std::log(mu.pi[i][k]);
      rep.integral += q * phi({i, t.rows[i][k]});
    }
  rep.residual = P - (rep.entropy + rep.integral);
  return rep;
}

/// Sliding-block recoding into allowed m-words; block b -> b' when they
/// overlap in m-1 symbols.
struct BlockRecoding {
  std::size_t m = 1;
  std::vector<IndexWord> blocks;
  TransitionMatrix matrix;

  /// Potential reading m+1 symbols becomes an edge potential on blocks.
  ShiftPotential lift(const ShiftPotential& phi) const {
    auto shared = std::make_shared<const std::vector<IndexWord>>(blocks);
    return ShiftPotential::edge([shared, phi](std::size_t a, std::size_t b) {
      IndexWord w = (*shared)[a];
      w.push_back((*shared)[b].back());
      return phi(w);
    });
  }
};

inline BlockRecoding recode_blocks(const TransitionMatrix& t, std::size_t m) {
  if (m == 0) throw Error(ErrorKind::invalid_input, "block length must be positive");
  BlockRecoding r;
  r.m = m;
  bool complete = true;
  detail::allowed_words(t, m, 5000000, [&](const IndexWord& w) { r.blocks.push_back(w); }, complete);
  if (!complete) throw Error(ErrorKind::convergence_failure, "too many blocks");
  std::map<IndexWord, std::vector<std::size_t>> by_head;
  for (std::size_t b = 0; b < r.blocks.size(); ++b)
    by_head[IndexWord(r.blocks[b].begin(), r.blocks[b].end() - 1)].push_back(b);
  std::vector<std::vector<std::size_t>> rows(r.blocks.size());
  for (std::size_t a = 0; a < r.blocks.size(); ++a) {
    IndexWord tail(r.blocks[a].begin() + 1, r.blocks[a].end());
    auto it = by_head.find(tail);
    if (it == by_head.end()) continue;
    for (std::size_t b : it->second)
      if (m > 1 || t(r.blocks[a].back(), r.blocks[b].front())) rows[a].push_back(b);
  }
  r.matrix = TransitionMatrix(std::move(rows));
  return r;
}

/// phi(i) = psi at the midpoint of the depth-n cylinder, error at most
/// K (sigma^n D_0)^alpha. `psi(i, x)` sees the element index and a point of
/// its closed arc, lifted so that x - left is in [0, length].
inline ShiftPotential project_potential(const InducedMap& T, std::function<double(std::size_t, double)> psi, double K,
                                        double alpha, std::size_t eval_depth = 8) {
  for (std::size_t i = 0; i < T.size(); ++i) {
    const auto& e = T.partition()[i];
    double v = psi(i, e.left + 0.5 * e.length());
    if (!std::isfinite(v)) throw Error(ErrorKind::invalid_input, "potential is not finite on element " + std::to_string(i));
  }
  ShiftPotential p;
  p.eval_depth = eval_depth;
  p.eval = [&T, psi](const IndexWord& w) {
    auto c = refine_cylinder(T, w);
    const auto& e = T.partition()[w.front()];
    double x = e.left + reduce(c.lo + 0.5 * c.len - e.left);
    return psi(w.front(), x);
  };
  p.modulus = [&T, K, alpha](std::size_t n) {
    return K * std::pow(std::pow(T.sigma(), static_cast<double>(n)) * T.d0(), alpha);
  };
  return p;
}

/// Finite-memory version of a potential: evaluation on the first m symbols.
inline ShiftPotential truncate_memory(const ShiftPotential& phi, std::size_t m) {
  ShiftPotential p = phi;
  p.memory = m;
  p.eval = [f = phi.eval, m](const IndexWord& w) { return f(IndexWord(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(m))); };
  return p;
}

}  // namespace lexpand
