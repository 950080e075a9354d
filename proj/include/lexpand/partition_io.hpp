#pragma once

#include "lexpand/partition.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

namespace lexpand {

/// Shortest decimal text that reads back to the same double (17 significant
/// digits at most).
inline std::string format_double(double x) {
  char buf[64];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, x);
    if (std::strtod(buf, nullptr) == x) return buf;
  }
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

/// Fixed 17-significant-digit text, used for all numeric artifacts.
inline std::string format17(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::uint64_t fnv1a(const std::string& data) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t h) {
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

inline constexpr int partition_format_version = 1;

/// Versioned text format. Endpoints are exact rationals for exact partitions
/// and round-trip decimals otherwise.
inline std::string serialize_partition(const CountableMarkovPartition& part) {
  std::ostringstream out;
  out << "lexpand-partition " << partition_format_version << "\n";
  out << "exact " << (part.exact ? 1 : 0) << "\n";
  out << "epsilon " << format_rational(part.base.epsilon) << "\n";
  out << "base " << to_string(part.base.mode) << ' ' << part.base.size() << "\n";
  out << "tol " << format_double(part.tol) << "\n";
  out << "uncovered " << format_double(part.uncovered) << "\n";
  out << "depth-cap " << part.depth_cap << "\n";
  out << "depth-reached " << part.depth_reached << "\n";
  out << "eps-within-eta-over-6 " << (part.eps_within_eta_over_6 ? 1 : 0) << "\n";
  out << "elements " << part.size() << "\n";
  for (std::size_t i = 0; i < part.size(); ++i) {
    const auto& e = part[i];
    out << "element " << i << " word " << format_word(e.word) << " left ";
    if (part.exact && e.exact_left) out << format_rational(*e.exact_left) << " right " << format_rational(*e.exact_right);
    else out << format_double(e.left) << " right " << format_double(e.right);
    out << " image " << e.image << " tau " << e.tau() << " component " << e.component << " cycle " << (e.cycle ? 1 : 0)
        << "\n";
  }
  out << "cycle";
  for (std::size_t b : part.cycle) out << ' ' << b;
  out << "\ncycle-balls";
  for (std::size_t b : part.cycle_balls) out << ' ' << b;
  out << "\n";
  return out.str();
}

inline std::string partition_hash(const CountableMarkovPartition& part) {
  return hex64(fnv1a(serialize_partition(part)));
}

inline CountableMarkovPartition parse_partition(const std::string& text) {
  CountableMarkovPartition part;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  bool header = false;
  std::size_t base_count = 0;
  BaseMode mode = BaseMode::overlap;
  Rational eps;
  auto fail = [&](const std::string& what) { throw ParseError(lineno, 1, what); };
  auto rational = [&](const std::string& s) {
    auto q = parse_rational(s);
    if (!q) fail("bad number '" + s + "'");
    return *q;
  };
  auto count = [&](const std::string& s) -> std::size_t {
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) fail("bad index '" + s + "'");
    return static_cast<std::size_t>(std::stoull(s));
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (!header) {
      int version = 0;
      if (key != "lexpand-partition" || !(ls >> version)) fail("missing partition header");
      if (version != partition_format_version) fail("unsupported partition format version " + std::to_string(version));
      header = true;
      continue;
    }
    std::string a, b;
    if (key == "exact") {
      ls >> a;
      part.exact = a == "1";
    } else if (key == "epsilon") {
      ls >> a;
      eps = rational(a);
    } else if (key == "base") {
      ls >> a >> b;
      mode = parse_base_mode(a);
      base_count = count(b);
    } else if (key == "tol") {
      ls >> a;
      part.tol = std::strtod(a.c_str(), nullptr);
    } else if (key == "uncovered") {
      ls >> a;
      part.uncovered = std::strtod(a.c_str(), nullptr);
    } else if (key == "depth-cap") {
      ls >> a;
      part.depth_cap = count(a);
    } else if (key == "depth-reached") {
      ls >> a;
      part.depth_reached = count(a);
    } else if (key == "eps-within-eta-over-6") {
      ls >> a;
      part.eps_within_eta_over_6 = a == "1";
    } else if (key == "elements") {
      ls >> a;
      part.elements.reserve(count(a));
    } else if (key == "element") {
      std::string idx, kw, word, l, r, img, tau, comp, cyc;
      std::string k1, k2, k3, k4, k5, k6;
      ls >> idx >> kw >> word >> k1 >> l >> k2 >> r >> k3 >> img >> k4 >> tau >> k5 >> comp >> k6 >> cyc;
      if (kw != "word" || k1 != "left" || k2 != "right" || k3 != "image" || k4 != "tau" || k5 != "component" ||
          k6 != "cycle")
        fail("malformed element line");
      if (count(idx) != part.elements.size()) fail("element indices must be consecutive");
      PartitionElement e;
      e.word = parse_word(word);
      if (count(tau) != e.word.size()) fail("tau does not match word length");
      Rational ql = rational(l), qr = rational(r);
      if (part.exact) {
        e.exact_left = ql;
        e.exact_right = qr;
        e.left = to_double(ql);
        e.right = to_double(qr);
      } else {
        e.left = std::strtod(l.c_str(), nullptr);
        e.right = std::strtod(r.c_str(), nullptr);
      }
      e.image = count(img);
      e.component = count(comp);
      e.cycle = cyc == "1";
      part.elements.push_back(std::move(e));
    } else if (key == "cycle") {
      while (ls >> a) part.cycle.push_back(count(a));
    } else if (key == "cycle-balls") {
      while (ls >> a) part.cycle_balls.push_back(count(a));
    } else {
      fail("unknown key '" + key + "'");
    }
  }
  if (!header) throw ParseError(1, 1, "empty partition file");
  part.base = make_base_cover(eps, mode);
  if (part.base.size() != base_count) throw Error(ErrorKind::parse, "base cover size does not match epsilon");
  part.components = base_components(part.base);
  for (const auto& e : part.elements) {
    if (e.image >= part.base.size()) throw Error(ErrorKind::parse, "element image index out of range");
    if (e.component >= part.components.size()) throw Error(ErrorKind::parse, "element component out of range");
  }
  for (std::size_t b : part.cycle)
    if (b >= part.size()) throw Error(ErrorKind::parse, "cycle index out of range");
  return part;
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::invalid_input, "cannot write " + path);
  out << text;
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::dependency, "missing artifact " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace lexpand
