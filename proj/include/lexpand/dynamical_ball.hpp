#pragma once

#include "lexpand/cover.hpp"

#include <cmath>
#include <optional>

namespace lexpand {

/// B(x, n, w, eps) with n - 1 = |w|: the connected set of y whose orbit along
/// every prefix of w stays eps-close to the orbit of x.
struct DynamicalBall {
  double center = 0.0;
  Word word;
  double radius = 0.0;
  double lo = 0.0;  // lifted endpoints around `center`
  double hi = 0.0;

  std::size_t n() const { return word.size() + 1; }
  Arc arc() const { return Arc::from_lift(lo, hi); }
  bool contains(double y) const { return arc().contains_open(y); }
};

namespace detail {

inline void check_scale(const ExpandingCover* cover, double eps) {
  if (!(eps > 0.0)) throw Error(ErrorKind::invalid_input, "radius must be positive");
  if (cover && !(eps < 0.5 * cover->eta))
    throw Error(ErrorKind::invalid_input, "radius must be below eta/2 = " + std::to_string(0.5 * cover->eta));
}

/// Largest t in (0, eps] with |F_u(x + s t) - F_u(x)| < eps for every prefix u
/// of w (including the empty and the full word); s = +1 or -1.
inline double ball_extent(const GeneratorSystem& system, const Word& w, double x, double eps, double sign,
                          bool last_only) {
  double best = eps;
  Word prefix;
  for (std::size_t j = 0; j <= w.size(); ++j) {
    if (j > 0) prefix.push_back(w[j - 1]);
    if (last_only && j < w.size()) continue;
    if (prefix.empty()) continue;
    // offset map t -> sign * (F(x + sign t) - F(x)) is increasing on [0, eps]
    double t;
    if (system.all_affine()) {
      double scale = 1.0;
      for (int s : prefix) scale *= system[s].a();
      t = eps / scale;
    } else {
      double lo = 0.0, hi = eps;
      for (int iter = 0; iter < 200; ++iter) {
        double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (sign * push_offset(system, prefix, x, sign * mid).delta < eps) lo = mid;
        else hi = mid;
      }
      t = 0.5 * (lo + hi);
    }
    best = std::min(best, t);
  }
  return best;
}

}  // namespace detail

/// Realized arc of B(x, |w| + 1, w, eps) along the monotone branch through x.
/// With a cover, checks eps < eta/2 and that x follows the chart itinerary of w.
inline DynamicalBall dynamical_ball(const GeneratorSystem& system, double x, const Word& w, double eps,
                                    const ExpandingCover* cover = nullptr) {
  check_symbols(system, w);
  detail::check_scale(cover, eps);
  if (cover && !w.empty() && !follows_itinerary(system, *cover, w, x))
    throw Error(ErrorKind::not_admissible, "word " + format_word(w) + " is not admissible from x=" + std::to_string(x));
  DynamicalBall ball;
  ball.center = reduce(x);
  ball.word = w;
  ball.radius = eps;
  ball.lo = ball.center - detail::ball_extent(system, w, ball.center, eps, -1.0, false);
  ball.hi = ball.center + detail::ball_extent(system, w, ball.center, eps, +1.0, false);
  return ball;
}

/// Pullback of B(y, eps) along w through x, where f_w(x) = y: the ball
/// B(x, |w| + 1, w, eps), whose image under f_w is B(y, eps).
inline DynamicalBall pull_back_ball(const GeneratorSystem& system, double y, double eps, const Word& w, double x,
                                    const ExpandingCover* cover = nullptr) {
  check_symbols(system, w);
  detail::check_scale(cover, eps);
  if (circle_distance(apply_word(system, w, x), y) > 1e-9)
    throw Error(ErrorKind::accessibility, "f_w(x) != y for w=" + format_word(w) + ", x=" + std::to_string(x));
  DynamicalBall ball;
  ball.center = reduce(x);
  ball.word = w;
  ball.radius = eps;
  ball.lo = ball.center - detail::ball_extent(system, w, ball.center, eps, -1.0, true);
  ball.hi = ball.center + detail::ball_extent(system, w, ball.center, eps, +1.0, true);
  return ball;
}

/// Lifted image endpoints of a dynamical ball under its word, relative to the
/// reduced image of its center.
inline std::pair<double, double> image_offsets(const GeneratorSystem& system, const DynamicalBall& ball) {
  auto lo = push_offset(system, ball.word, ball.center, ball.lo - ball.center);
  auto hi = push_offset(system, ball.word, ball.center, ball.hi - ball.center);
  return {lo.delta, hi.delta};
}

struct DistortionConstant {
  double K = 1.0;
  double C = 0.0;      // Hoelder constant of log f'
  double alpha = 1.0;  // Hoelder exponent
  double gamma = 0.5;  // chart radius bound
  double sigma = 0.5;
};

/// K = exp(-C (2 gamma)^alpha / (1 - sigma^alpha)), with C = sup|f''| / inf f'
/// (Lipschitz constant of log f') and gamma the largest chart radius.
inline DistortionConstant diameter_distortion_constant(const GeneratorSystem& system, const ExpandingCover& cover,
                                                       std::optional<double> C = {}, double alpha = 1.0) {
  DistortionConstant d;
  d.C = C.value_or(system.log_derivative_lipschitz());
  d.alpha = alpha;
  d.sigma = cover.sigma;
  double gamma = 0.0;
  for (const auto& c : cover.charts) gamma = std::max(gamma, std::min(0.5, 0.5 * c.arc.length));
  d.gamma = gamma;
  d.K = d.C == 0.0 ? 1.0 : std::exp(-d.C * std::pow(2.0 * gamma, alpha) / (1.0 - std::pow(d.sigma, alpha)));
  return d;
}

}  // namespace lexpand
