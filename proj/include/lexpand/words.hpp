#pragma once

#include "lexpand/generator.hpp"

#include <string>
#include <vector>

namespace lexpand {

/// Finite word over generator indices 0..k-1; applied left to right.
using Word = std::vector<int>;

inline std::string format_word(const Word& w) {
  std::string s;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (i) s += '.';
    s += std::to_string(w[i]);
  }
  return s.empty() ? "-" : s;
}

inline Word parse_word(const std::string& text) {
  Word w;
  if (text == "-" || text.empty()) return w;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t dot = text.find('.', pos);
    std::string part = text.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
    if (part.empty() || part.find_first_not_of("0123456789") != std::string::npos)
      throw Error(ErrorKind::invalid_word, "malformed word '" + text + "'");
    w.push_back(std::stoi(part));
    if (dot == std::string::npos) break;
    pos = dot + 1;
  }
  return w;
}

inline void check_symbols(const GeneratorSystem& system, const Word& w) {
  for (int s : w)
    if (s < 0 || static_cast<std::size_t>(s) >= system.size())
      throw Error(ErrorKind::invalid_input, "symbol " + std::to_string(s) + " out of range");
}

/// f_{w_n} o ... o f_{w_1}(x) reduced mod 1.
inline double apply_word(const GeneratorSystem& system, const Word& w, double x) {
  check_symbols(system, w);
  double y = reduce(x);
  for (int s : w) y = system[s](y);
  return y;
}

/// Product of f'_{w_j}(x_{j-1}) along the orbit of x.
inline double derivative_along_word(const GeneratorSystem& system, const Word& w, double x) {
  check_symbols(system, w);
  double y = reduce(x);
  double d = 1.0;
  for (int s : w) {
    d *= system[s].derivative(y);
    y = system[s](y);
  }
  return d;
}

/// Point of the lifted line kept as a reduced base plus an offset, so lifted
/// compositions of nearby points do not lose precision to large integers.
struct LiftedOffset {
  double base = 0.0;   // reduced image of the reference point
  double delta = 0.0;  // lifted image of the point minus that of the reference
};

/// Pushes (x0, x0 + delta) through the word: returns the reduced image of x0
/// and F_w(x0 + delta) - F_w(x0) computed on lifts.
inline LiftedOffset push_offset(const GeneratorSystem& system, const Word& w, double x0, double delta) {
  LiftedOffset p{reduce(x0), delta};
  for (int s : w) {
    const Generator& g = system[s];
    p.delta = g.lift_delta(p.base, p.delta);
    p.base = g(p.base);
  }
  return p;
}

/// Lifted image F_w(x) where each step uses the lift F(y) = a y + b + c sin(2 pi y)
/// on an unreduced argument. Only suitable for short words; the integer part
/// grows like the product of degrees.
inline double lift_word(const GeneratorSystem& system, const Word& w, double x) {
  double y = x;
  for (int s : w) y = system[s].lift(y);
  return y;
}

/// Preimage branch: given a target lifted value y of F_w and a reference x0
/// whose image base is known, solve F_w(x0 + t) - F_w(x0) = y_offset for t
/// in [lo, hi] by bisection on the monotone offset map.
inline double solve_offset(const GeneratorSystem& system, const Word& w, double x0, double target,
                           double lo, double hi) {
  if (system.all_affine()) {
    double scale = 1.0;
    for (int s : w) scale *= system[s].a();
    return target / scale;
  }
  for (int iter = 0; iter < 200 && hi - lo > 0.0; ++iter) {
    double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (push_offset(system, w, x0, mid).delta < target) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace lexpand
