#pragma once

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace dough {

/// Cycle counts. Every model quantity is an exact integer; overflow throws.
using Cycles = std::int64_t;
/// Word counts (buffer entries, DMA transfer sizes).
using Words = std::int64_t;

using Shape = std::vector<std::int64_t>;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(int line, int column, const std::string& message)
      : Error(std::to_string(line) + ":" + std::to_string(column) + ": " + message),
        line_(line),
        column_(column) {}
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

class SemanticError : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class UnschedulableError : public Error {
 public:
  using Error::Error;
};

/// One violated inequality `value <= bound`, named by `constraint`.
struct Violation {
  std::string constraint;
  std::int64_t value = 0;
  std::int64_t bound = 0;

  std::string message() const {
    return constraint + ": " + std::to_string(value) + " > " + std::to_string(bound);
  }
  bool operator==(const Violation&) const = default;
};

/// No design satisfies the constraints; carries the violations that ruled
/// out the closest candidate (or the offending configuration).
class InfeasibleError : public Error {
 public:
  InfeasibleError(const std::string& message, std::vector<Violation> violations)
      : Error(message), violations_(std::move(violations)) {}
  const std::vector<Violation>& violations() const { return violations_; }

 private:
  std::vector<Violation> violations_;
};

class SimulationError : public Error {
 public:
  using Error::Error;
};

class CapExceededError : public Error {
 public:
  using Error::Error;
};

inline Cycles checked_mul(Cycles a, Cycles b) {
  Cycles out = 0;
  if (__builtin_mul_overflow(a, b, &out)) throw Error("cycle count overflow");
  return out;
}

inline Cycles checked_add(Cycles a, Cycles b) {
  Cycles out = 0;
  if (__builtin_add_overflow(a, b, &out)) throw Error("cycle count overflow");
  return out;
}

inline std::int64_t product(const Shape& v) {
  std::int64_t p = 1;
  for (auto x : v) p = checked_mul(p, x);
  return p;
}

/// Smallest power of two >= x (x >= 1).
inline std::int64_t next_pow2(std::int64_t x) {
  std::int64_t p = 1;
  while (p < x) p <<= 1;
  return p;
}

inline bool is_pow2(std::int64_t x) { return x > 0 && (x & (x - 1)) == 0; }

inline int ceil_log2(std::int64_t x) {
  int bits = 0;
  while ((std::int64_t{1} << bits) < x) ++bits;
  return bits;
}

std::string shape_str(const Shape& v, const char* sep = "x");

}  // namespace dough
