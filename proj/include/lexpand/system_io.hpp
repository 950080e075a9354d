#pragma once

#include "lexpand/cover.hpp"

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace lexpand {

/// A generator system plus the optional declared charts and run options, as
/// read from a system file.
///
/// File grammar, one directive per line, '#' starts a comment:
///   generator affine a=<int> b=<q>
///   generator perturbed a=<int> b=<q> c=<q>
///   row <q> ... <q>          one per generator, in order
///   start <q> ... <q>
///   seed <int>
///   chart <generator> <start> <length>
///   option <name> <value>
/// Numbers are exact: integers, decimals, exponents or p/q.
struct SystemConfig {
  GeneratorSystem system;
  std::vector<Chart> charts;
  std::vector<std::pair<Rational, Rational>> chart_exact;
  std::map<std::string, std::string> options;

  bool has(const std::string& key) const { return options.count(key) != 0; }

  std::string option(const std::string& key, const std::string& fallback) const {
    auto it = options.find(key);
    return it == options.end() ? fallback : it->second;
  }

  Rational rational_option(const std::string& key, const Rational& fallback) const {
    auto it = options.find(key);
    if (it == options.end()) return fallback;
    auto q = parse_rational(it->second);
    if (!q) throw Error(ErrorKind::invalid_input, "option " + key + " is not a number: " + it->second);
    return *q;
  }

  double real_option(const std::string& key, double fallback) const {
    return has(key) ? to_double(rational_option(key, Rational(0))) : fallback;
  }

  long long int_option(const std::string& key, long long fallback) const {
    if (!has(key)) return fallback;
    Rational q = rational_option(key, Rational(0));
    if (boost::multiprecision::denominator(q) != 1)
      throw Error(ErrorKind::invalid_input, "option " + key + " must be an integer");
    return boost::multiprecision::numerator(q).convert_to<long long>();
  }
};

namespace detail {

inline std::vector<std::pair<std::string, int>> tokenize(const std::string& line) {
  std::vector<std::pair<std::string, int>> out;
  std::size_t i = 0;
  while (i < line.size()) {
    if (line[i] == '#') break;
    if (std::isspace(static_cast<unsigned char>(line[i]))) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j])) && line[j] != '#') ++j;
    out.emplace_back(line.substr(i, j - i), static_cast<int>(i) + 1);
    i = j;
  }
  return out;
}

}  // namespace detail

inline SystemConfig parse_system(const std::string& text) {
  SystemConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  bool seen_seed = false;
  while (std::getline(in, line)) {
    ++lineno;
    auto tok = detail::tokenize(line);
    if (tok.empty()) continue;
    const std::string& head = tok[0].first;
    auto number = [&](std::size_t k) {
      auto q = parse_rational(tok[k].first);
      if (!q) throw ParseError(lineno, tok[k].second, "expected a number, got '" + tok[k].first + "'");
      return *q;
    };
    auto need = [&](std::size_t count) {
      if (tok.size() < count) throw ParseError(lineno, static_cast<int>(line.size()) + 1, "missing arguments for " + head);
    };
    if (head == "generator") {
      need(2);
      std::map<std::string, Rational> params;
      for (std::size_t k = 2; k < tok.size(); ++k) {
        auto eq = tok[k].first.find('=');
        if (eq == std::string::npos) throw ParseError(lineno, tok[k].second, "expected name=value");
        auto q = parse_rational(tok[k].first.substr(eq + 1));
        if (!q) throw ParseError(lineno, tok[k].second + static_cast<int>(eq) + 1, "bad number in " + tok[k].first);
        params[tok[k].first.substr(0, eq)] = *q;
      }
      auto get = [&](const std::string& name, bool required) {
        auto it = params.find(name);
        if (it == params.end()) {
          if (required) throw ParseError(lineno, tok[1].second, "generator needs parameter " + name);
          return Rational(0);
        }
        return it->second;
      };
      try {
        if (tok[1].first == "affine") {
          for (const auto& [k, v] : params)
            if (k != "a" && k != "b") throw ParseError(lineno, tok[1].second, "unknown affine parameter " + k);
          cfg.system.generators.push_back(Generator::affine(get("a", true), get("b", false)));
        } else if (tok[1].first == "perturbed") {
          for (const auto& [k, v] : params)
            if (k != "a" && k != "b" && k != "c") throw ParseError(lineno, tok[1].second, "unknown perturbed parameter " + k);
          cfg.system.generators.push_back(Generator::perturbed(get("a", true), get("b", false), get("c", true)));
        } else {
          throw ParseError(lineno, tok[1].second, "unknown generator family '" + tok[1].first + "'");
        }
      } catch (const ParseError&) {
        throw;
      } catch (const Error& e) {
        throw ParseError(lineno, tok[0].second, e.what());
      }
    } else if (head == "row") {
      need(2);
      std::vector<Rational> row;
      Rational sum(0);
      for (std::size_t k = 1; k < tok.size(); ++k) {
        row.push_back(number(k));
        if (row.back() < 0) throw ParseError(lineno, tok[k].second, "negative transition probability");
        sum += row.back();
      }
      if (sum != 1) throw ParseError(lineno, tok[1].second, "row sums to " + format_rational(sum) + ", not 1");
      cfg.system.driving.push_back(std::move(row));
    } else if (head == "start") {
      need(2);
      for (std::size_t k = 1; k < tok.size(); ++k) cfg.system.start.push_back(number(k));
    } else if (head == "seed") {
      need(2);
      Rational q = number(1);
      if (boost::multiprecision::denominator(q) != 1 || q < 0)
        throw ParseError(lineno, tok[1].second, "seed must be a nonnegative integer");
      cfg.system.seed = boost::multiprecision::numerator(q).convert_to<unsigned long long>();
      seen_seed = true;
    } else if (head == "chart") {
      need(4);
      Rational g = number(1);
      Rational s = number(2);
      Rational len = number(3);
      if (boost::multiprecision::denominator(g) != 1 || g < 0)
        throw ParseError(lineno, tok[1].second, "chart generator must be an index");
      if (len <= 0 || len > 1) throw ParseError(lineno, tok[3].second, "chart length must be in (0,1]");
      cfg.charts.push_back({Arc(to_double(s), to_double(len)), boost::multiprecision::numerator(g).convert_to<int>()});
      cfg.chart_exact.emplace_back(s, len);
    } else if (head == "option") {
      need(3);
      if (tok.size() > 3) throw ParseError(lineno, tok[3].second, "option takes one value");
      cfg.options[tok[1].first] = tok[2].first;
    } else {
      throw ParseError(lineno, tok[0].second, "unknown directive '" + head + "'");
    }
  }
  (void)seen_seed;
  if (cfg.system.generators.empty()) throw ParseError(lineno + 1, 1, "no generators declared");
  if (cfg.system.driving.empty()) {
    const std::size_t k = cfg.system.size();
    cfg.system.driving.assign(k, std::vector<Rational>(k, Rational(1, static_cast<long long>(k))));
  }
  {
    std::vector<std::size_t> order(cfg.charts.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return cfg.charts[a].generator < cfg.charts[b].generator; });
    std::vector<Chart> charts;
    std::vector<std::pair<Rational, Rational>> exact;
    for (std::size_t i : order) {
      charts.push_back(cfg.charts[i]);
      exact.push_back(cfg.chart_exact[i]);
    }
    cfg.charts = std::move(charts);
    cfg.chart_exact = std::move(exact);
  }
  for (std::size_t i = 0; i < cfg.charts.size(); ++i)
    if (cfg.charts[i].generator != static_cast<int>(i))
      throw Error(ErrorKind::invalid_input, "charts must be declared once per generator");
  if (!cfg.charts.empty() && cfg.charts.size() != cfg.system.size())
    throw Error(ErrorKind::invalid_input, "charts must be declared once per generator");
  validate(cfg.system);
  return cfg;
}

inline SystemConfig load_system(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::invalid_input, "cannot read system file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_system(buf.str());
}

/// Canonical text; parse_system(format_system(c)) reproduces c exactly.
inline std::string format_system(const SystemConfig& cfg) {
  std::ostringstream out;
  for (const auto& g : cfg.system.generators) out << "generator " << g.describe() << "\n";
  for (const auto& row : cfg.system.driving) {
    out << "row";
    for (const auto& q : row) out << ' ' << format_rational(q);
    out << "\n";
  }
  if (!cfg.system.start.empty()) {
    out << "start";
    for (const auto& q : cfg.system.start) out << ' ' << format_rational(q);
    out << "\n";
  }
  out << "seed " << cfg.system.seed << "\n";
  for (std::size_t i = 0; i < cfg.charts.size(); ++i) {
    const auto& c = cfg.charts[i];
    std::string s, len;
    if (i < cfg.chart_exact.size()) {
      s = format_rational(cfg.chart_exact[i].first);
      len = format_rational(cfg.chart_exact[i].second);
    } else {
      std::ostringstream a, b;
      a.precision(17);
      b.precision(17);
      a << c.arc.start;
      b << c.arc.length;
      s = a.str();
      len = b.str();
    }
    out << "chart " << c.generator << ' ' << s << ' ' << len << "\n";
  }
  for (const auto& [k, v] : cfg.options) out << "option " << k << ' ' << v << "\n";
  return out.str();
}

inline bool operator==(const SystemConfig& a, const SystemConfig& b) {
  if (a.system.generators != b.system.generators) return false;
  if (a.system.driving != b.system.driving || a.system.start != b.system.start) return false;
  if (a.system.seed != b.system.seed || a.options != b.options) return false;
  if (a.charts.size() != b.charts.size()) return false;
  for (std::size_t i = 0; i < a.charts.size(); ++i)
    if (a.charts[i].generator != b.charts[i].generator || a.charts[i].arc.start != b.charts[i].arc.start ||
        a.charts[i].arc.length != b.charts[i].arc.length)
      return false;
  return true;
}

}  // namespace lexpand
