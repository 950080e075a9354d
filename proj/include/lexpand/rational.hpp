#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cctype>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>

namespace lexpand {

using Rational = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

/// Parses "3", "-0.25", "1e-3", "2.5E+2" or "1/16" into an exact rational.
/// Returns nullopt on malformed text.
inline std::optional<Rational> parse_rational(std::string_view text) {
  if (text.empty()) return std::nullopt;
  if (auto slash = text.find('/'); slash != std::string_view::npos) {
    auto num = parse_rational(text.substr(0, slash));
    auto den = parse_rational(text.substr(slash + 1));
    if (!num || !den || *den == 0) return std::nullopt;
    return *num / *den;
  }
  std::size_t pos = 0;
  bool negative = false;
  if (text[pos] == '+' || text[pos] == '-') {
    negative = text[pos] == '-';
    ++pos;
  }
  BigInt mantissa = 0;
  int fraction_digits = 0;
  bool any_digit = false;
  bool in_fraction = false;
  for (; pos < text.size(); ++pos) {
    char c = text[pos];
    if (std::isdigit(static_cast<unsigned char>(c))) {
      mantissa = mantissa * 10 + (c - '0');
      any_digit = true;
      if (in_fraction) ++fraction_digits;
    } else if (c == '.' && !in_fraction) {
      in_fraction = true;
    } else {
      break;
    }
  }
  if (!any_digit) return std::nullopt;
  long exponent = 0;
  if (pos < text.size()) {
    if (text[pos] != 'e' && text[pos] != 'E') return std::nullopt;
    ++pos;
    bool exp_negative = false;
    if (pos < text.size() && (text[pos] == '+' || text[pos] == '-')) {
      exp_negative = text[pos] == '-';
      ++pos;
    }
    if (pos >= text.size()) return std::nullopt;
    for (; pos < text.size(); ++pos) {
      char c = text[pos];
      if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
      exponent = exponent * 10 + (c - '0');
      if (exponent > 4000) return std::nullopt;
    }
    if (exp_negative) exponent = -exponent;
  }
  exponent -= fraction_digits;
  Rational value(mantissa);
  BigInt scale = boost::multiprecision::pow(BigInt(10), static_cast<unsigned>(exponent < 0 ? -exponent : exponent));
  if (exponent < 0) value /= Rational(scale);
  else value *= Rational(scale);
  return negative ? Rational(-value) : value;
}

/// Canonical text: terminating decimals are printed as decimals, everything
/// else as "p/q". parse_rational(format_rational(q)) == q.
inline std::string format_rational(const Rational& q) {
  BigInt num = boost::multiprecision::numerator(q);
  BigInt den = boost::multiprecision::denominator(q);
  if (den == 1) return num.str();
  BigInt rest = den;
  unsigned twos = 0, fives = 0;
  while (rest % 2 == 0) { rest /= 2; ++twos; }
  while (rest % 5 == 0) { rest /= 5; ++fives; }
  if (rest != 1) return num.str() + "/" + den.str();
  unsigned digits = twos > fives ? twos : fives;
  BigInt scaled = num * boost::multiprecision::pow(BigInt(10), digits) / den;
  bool negative = scaled < 0;
  if (negative) scaled = -scaled;
  std::string body = scaled.str();
  if (body.size() <= digits) body.insert(0, digits + 1 - body.size(), '0');
  body.insert(body.size() - digits, ".");
  return negative ? "-" + body : body;
}

inline double to_double(const Rational& q) { return q.convert_to<double>(); }

/// The exact value of a finite double.
inline Rational exact_value(double x) {
  int exp = 0;
  double m = std::frexp(x, &exp);
  auto mant = static_cast<long long>(std::ldexp(m, 53));
  Rational q(mant);
  exp -= 53;
  Rational p = Rational(BigInt(1) << (exp < 0 ? -exp : exp));
  return exp < 0 ? Rational(q / p) : Rational(q * p);
}

}  // namespace lexpand
