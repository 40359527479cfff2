#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

namespace dough {

// Fixed ALU operation set. Codes are the 6-bit opcode field of a control word.
enum class Op : std::uint8_t {
  NOP = 0,
  ADD = 1,
  SUB = 2,
  MUL = 3,
  AND = 4,
  OR = 5,
  XOR = 6,
  SHL = 7,
  SHR = 8,
  MIN = 9,
  MAX = 10,
  CMP_LT = 11,
  SELECT = 12,
  ABS = 13,
  PASS = 14,
};

inline constexpr int kOpCount = 15;

/// Number of operands an op consumes. SELECT is three-operand at the
/// expression level only; it is lowered before reaching the array.
int op_arity(Op op);
std::string_view op_name(Op op);
std::optional<Op> op_from_name(std::string_view name);

/// W-bit two's-complement word arithmetic. Values are carried as int64
/// sign-normalized to the low W bits.
class WordArith {
 public:
  explicit WordArith(int width = 32);

  int width() const { return width_; }
  std::int64_t wrap(std::int64_t x) const;
  std::int64_t max_value() const;
  std::int64_t min_value() const;

  /// Two-operand ALU semantics; unary ops ignore `b`.
  std::int64_t apply(Op op, std::int64_t a, std::int64_t b) const;
  std::int64_t select(std::int64_t cond, std::int64_t a, std::int64_t b) const {
    return cond != 0 ? a : b;
  }

 private:
  int width_;
  std::uint64_t mask_;
};

}  // namespace dough
