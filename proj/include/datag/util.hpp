#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace datag {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Base class for all errors raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file. Carries the 1-based line number (0 when unknown).
class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

double log_sum_exp(std::span<const double> values);
double log_add(double a, double b);

/// Splits on a single character; keeps empty fields.
std::vector<std::string> split(std::string_view text, char sep);
/// Splits on runs of ASCII whitespace; drops empty fields.
std::vector<std::string> split_ws(std::string_view text);
std::string join(std::span<const std::string> parts, std::string_view sep);
std::string_view trim(std::string_view text);

double parse_double(std::string_view text);
long long parse_int(std::string_view text);

/// Shortest text that reads back to the same double.
std::string format_double(double value);

/// Portable RNG helpers. mt19937_64's raw output is fixed by the standard, the
/// std distributions are not, so library code draws through these.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  std::uint64_t next() { return engine_(); }
  /// Uniform in [0, n), rejection sampled.
  std::size_t uniform_index(std::size_t n);
  /// Uniform in [0, 1) with 53 bits.
  double uniform01();

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = uniform_index(i);
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace datag
