#pragma once

#include "lexpand/circle.hpp"
#include "lexpand/error.hpp"
#include "lexpand/rational.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

namespace lexpand {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

enum class Family { affine, perturbed };

inline const char* to_string(Family f) { return f == Family::affine ? "affine" : "perturbed"; }

/// Circle map x -> a x + b + c sin(2 pi x) mod 1 with integer degree a.
///
/// The lift F(x) = a x + b + c sin(2 pi x) satisfies F(x + 1) = F(x) + a, so
/// every computation here works on lifts and reduces only base points.
/// Construction requires a - 2 pi |c| > 0 (local diffeomorphism); whether the
/// map expands is decided by verify_locally_expanding, not here.
class Generator {
 public:
  static Generator affine(const Rational& a, const Rational& b) {
    return Generator(Family::affine, a, b, Rational(0));
  }

  static Generator perturbed(const Rational& a, const Rational& b, const Rational& c) {
    return Generator(Family::perturbed, a, b, c);
  }

  Family family() const { return family_; }
  bool is_affine() const { return family_ == Family::affine || c_ == 0.0; }
  int degree() const { return degree_; }
  double a() const { return a_; }
  double b() const { return b_; }
  double c() const { return c_; }
  const Rational& exact_a() const { return exact_a_; }
  const Rational& exact_b() const { return exact_b_; }
  const Rational& exact_c() const { return exact_c_; }

  double lift(double x) const { return a_ * x + b_ + (c_ != 0.0 ? c_ * std::sin(two_pi * x) : 0.0); }
  double operator()(double x) const { return reduce(lift(x)); }

  /// F(base + delta) - F(base) without cancellation.
  double lift_delta(double base, double delta) const {
    if (c_ == 0.0) return a_ * delta;
    return a_ * delta + 2.0 * c_ * std::cos(two_pi * base + std::numbers::pi * delta) * std::sin(std::numbers::pi * delta);
  }

  double derivative(double x) const { return a_ + (c_ != 0.0 ? two_pi * c_ * std::cos(two_pi * x) : 0.0); }
  double second_derivative(double x) const {
    return c_ != 0.0 ? -two_pi * two_pi * c_ * std::sin(two_pi * x) : 0.0;
  }

  double min_derivative() const { return a_ - two_pi * std::fabs(c_); }
  double max_derivative() const { return a_ + two_pi * std::fabs(c_); }
  /// sup |f''|.
  double max_second_derivative() const { return two_pi * two_pi * std::fabs(c_); }
  /// Lipschitz constant of log f': sup|f''| / inf f'.
  double log_derivative_lipschitz() const { return max_second_derivative() / min_derivative(); }

  /// Solves F(x) = y for x in the bracket [lo, hi] where F is increasing.
  double inverse_lift(double y, double lo, double hi) const {
    if (c_ == 0.0) return (y - b_) / a_;
    double x = std::clamp((y - b_) / a_, lo, hi);
    for (int iter = 0; iter < 100; ++iter) {
      double fx = lift(x) - y;
      if (fx == 0.0) return x;
      if (fx > 0.0) hi = x; else lo = x;
      double next = x - fx / derivative(x);
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      if (std::fabs(next - x) <= 1e-17 * (1.0 + std::fabs(x))) return next;
      x = next;
      if (hi - lo <= 4e-16 * (1.0 + std::fabs(lo))) break;
    }
    return x;
  }

  /// All preimages of y (any lift) in [0, 1), ascending.
  std::vector<double> preimages(double y) const {
    double f0 = lift(0.0);
    double target = f0 + reduce(y - f0);
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(degree_));
    for (int m = 0; m < degree_; ++m) {
      double x = inverse_lift(target + m, 0.0, 1.0);
      out.push_back(std::clamp(x, 0.0, std::nextafter(1.0, 0.0)));
    }
    return out;
  }

  std::string describe() const {
    std::string s = std::string(to_string(family_)) + " a=" + format_rational(exact_a_) +
                    " b=" + format_rational(exact_b_);
    if (family_ == Family::perturbed) s += " c=" + format_rational(exact_c_);
    return s;
  }

  friend bool operator==(const Generator& x, const Generator& y) {
    return x.family_ == y.family_ && x.exact_a_ == y.exact_a_ && x.exact_b_ == y.exact_b_ &&
           x.exact_c_ == y.exact_c_;
  }

 private:
  Generator(Family family, const Rational& a, const Rational& b, const Rational& c)
      : family_(family), exact_a_(a), exact_b_(b), exact_c_(c) {
    if (boost::multiprecision::denominator(a) != 1 || a < 1)
      throw Error(ErrorKind::invalid_input, "generator degree a must be an integer >= 1");
    a_ = to_double(a);
    b_ = to_double(b);
    c_ = to_double(c);
    degree_ = static_cast<int>(a_);
    if (!(a_ - two_pi * std::fabs(c_) > 0.0))
      throw Error(ErrorKind::invalid_input, "perturbed generator needs a - 2 pi |c| > 0");
  }

  Family family_;
  Rational exact_a_, exact_b_, exact_c_;
  double a_ = 0.0, b_ = 0.0, c_ = 0.0;
  int degree_ = 1;
};

/// Finite generator family with its driving row-stochastic matrix.
struct GeneratorSystem {
  std::vector<Generator> generators;
  /// driving[i][j] = probability that generator j follows generator i.
  std::vector<std::vector<Rational>> driving;
  std::vector<Rational> start;
  unsigned long long seed = 0;

  std::size_t size() const { return generators.size(); }
  const Generator& operator[](std::size_t i) const { return generators[i]; }

  double p(std::size_t i, std::size_t j) const { return to_double(driving[i][j]); }
  bool allowed(std::size_t i, std::size_t j) const { return driving[i][j] > 0; }

  std::vector<std::vector<double>> driving_matrix() const {
    std::vector<std::vector<double>> out(size(), std::vector<double>(size()));
    for (std::size_t i = 0; i < size(); ++i)
      for (std::size_t j = 0; j < size(); ++j) out[i][j] = p(i, j);
    return out;
  }

  std::vector<double> start_distribution() const {
    std::vector<double> out;
    for (const auto& q : start) out.push_back(to_double(q));
    return out;
  }

  bool all_affine() const {
    for (const auto& g : generators)
      if (!g.is_affine()) return false;
    return true;
  }

  /// Lipschitz constant of log f' over all generators.
  double log_derivative_lipschitz() const {
    double c = 0.0;
    for (const auto& g : generators) c = std::max(c, g.log_derivative_lipschitz());
    return c;
  }
};

/// Checks shape and stochasticity (rows sum to 1 within 1e-12). Irreducibility
/// is reported by is_irreducible; reducible systems are legal input and fail
/// later where it matters (mixing, Perron vector).
inline void validate(const GeneratorSystem& system) {
  const std::size_t k = system.size();
  if (k == 0) throw Error(ErrorKind::invalid_input, "system has no generators");
  if (system.driving.size() != k)
    throw Error(ErrorKind::invalid_input, "driving matrix must have one row per generator");
  for (std::size_t i = 0; i < k; ++i) {
    if (system.driving[i].size() != k)
      throw Error(ErrorKind::invalid_input, "driving matrix row " + std::to_string(i) + " has wrong length");
    double sum = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      if (system.driving[i][j] < 0 || system.driving[i][j] > 1)
        throw Error(ErrorKind::invalid_input, "driving matrix entry outside [0,1]");
      sum += system.p(i, j);
    }
    if (std::fabs(sum - 1.0) > 1e-12)
      throw Error(ErrorKind::invalid_input, "driving matrix row " + std::to_string(i) + " sums to " + std::to_string(sum));
  }
  if (!system.start.empty()) {
    if (system.start.size() != k) throw Error(ErrorKind::invalid_input, "start distribution has wrong length");
    double sum = 0.0;
    for (const auto& q : system.start) {
      if (q < 0) throw Error(ErrorKind::invalid_input, "negative start probability");
      sum += to_double(q);
    }
    if (std::fabs(sum - 1.0) > 1e-12) throw Error(ErrorKind::invalid_input, "start distribution does not sum to 1");
  }
}

/// Every state reaches every other along positive entries of the driving matrix.
inline bool is_irreducible(const GeneratorSystem& system) {
  const std::size_t k = system.size();
  for (std::size_t s = 0; s < k; ++s) {
    std::vector<char> seen(k, 0);
    std::vector<std::size_t> stack{s};
    seen[s] = 1;
    while (!stack.empty()) {
      std::size_t i = stack.back();
      stack.pop_back();
      for (std::size_t j = 0; j < k; ++j)
        if (system.allowed(i, j) && !seen[j]) {
          seen[j] = 1;
          stack.push_back(j);
        }
    }
    for (std::size_t j = 0; j < k; ++j)
      if (!seen[j]) return false;
  }
  return true;
}

}  // namespace lexpand
