#pragma once

#include "lexpand/words.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace lexpand {

/// Seeded generator with a platform-independent uniform draw.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Index drawn from unnormalized nonnegative weights.
  std::size_t pick(const std::vector<double>& weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    double u = uniform() * total;
    double acc = 0.0;
    std::size_t last = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (weights[i] <= 0.0) continue;
      acc += weights[i];
      last = i;
      if (u < acc) return i;
    }
    return last;
  }

  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

struct RandomWalkTrace {
  std::uint64_t seed = 0;
  std::vector<double> points;  // x_0 .. x_n
  std::vector<int> symbols;    // i_1 .. i_n
  double log_derivative = 0.0; // sum of log f'_{i_t}(x_{t-1})
};

/// Markov-driven orbit: i_1 from the start distribution (uniform if none),
/// i_{t+1} from row i_t of the driving matrix, x_t = f_{i_t}(x_{t-1}).
inline RandomWalkTrace sample_walk(const GeneratorSystem& system, std::uint64_t seed, std::size_t length, double x0) {
  RandomWalkTrace trace;
  trace.seed = seed;
  trace.points.reserve(length + 1);
  trace.symbols.reserve(length);
  trace.points.push_back(reduce(x0));
  if (length == 0) return trace;
  Rng rng(seed);
  auto matrix = system.driving_matrix();
  std::vector<double> start = system.start.empty() ? std::vector<double>(system.size(), 1.0) : system.start_distribution();
  int symbol = static_cast<int>(rng.pick(start));
  double x = trace.points.front();
  for (std::size_t t = 0; t < length; ++t) {
    if (t > 0) symbol = static_cast<int>(rng.pick(matrix[static_cast<std::size_t>(symbol)]));
    const Generator& g = system[static_cast<std::size_t>(symbol)];
    trace.log_derivative += std::log(g.derivative(x));
    x = g(x);
    trace.symbols.push_back(symbol);
    trace.points.push_back(x);
  }
  return trace;
}

}  // namespace lexpand
