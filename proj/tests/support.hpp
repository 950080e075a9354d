#pragma once

#include "lexpand/system_io.hpp"

#include <string>
#include <vector>

namespace lexpand::testing {

inline GeneratorSystem make_system(std::vector<Generator> gens, std::vector<std::vector<Rational>> p = {}) {
  GeneratorSystem s;
  s.generators = std::move(gens);
  const std::size_t k = s.generators.size();
  if (p.empty()) p.assign(k, std::vector<Rational>(k, Rational(1, static_cast<long long>(k))));
  s.driving = std::move(p);
  validate(s);
  return s;
}

inline Generator affine(int a, Rational b = 0) { return Generator::affine(Rational(a), b); }
inline Generator perturbed(int a, double c) {
  return Generator::perturbed(Rational(a), Rational(0), *parse_rational(std::to_string(c)));
}

inline GeneratorSystem doubling() { return make_system({affine(2)}); }
inline GeneratorSystem doubling_tripling() { return make_system({affine(2), affine(3)}); }

inline std::string config_path(const std::string& name) { return std::string(LEXPAND_CONFIG_DIR) + "/" + name; }

}  // namespace lexpand::testing
