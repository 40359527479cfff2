#include "dough/ops.hpp"

#include <array>
#include <limits>
#include <sstream>

#include "dough/common.hpp"

namespace dough {

namespace {

constexpr std::array<std::string_view, kOpCount> kNames = {
    "NOP", "ADD", "SUB", "MUL", "AND", "OR",     "XOR",  "SHL",
    "SHR", "MIN", "MAX", "CMP_LT", "SELECT", "ABS", "PASS"};

}  // namespace

std::string shape_str(const Shape& v, const char* sep) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) os << sep;
    os << v[i];
  }
  return os.str();
}

int op_arity(Op op) {
  switch (op) {
    case Op::NOP:
      return 0;
    case Op::ABS:
    case Op::PASS:
      return 1;
    case Op::SELECT:
      return 3;
    default:
      return 2;
  }
}

std::string_view op_name(Op op) { return kNames.at(static_cast<std::size_t>(op)); }

std::optional<Op> op_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kNames.size(); ++i)
    if (kNames[i] == name) return static_cast<Op>(i);
  return std::nullopt;
}

WordArith::WordArith(int width) : width_(width) {
  if (width < 2 || width > 64) throw InvalidArgument("data width must be in [2, 64]");
  mask_ = width == 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << width) - 1);
}

std::int64_t WordArith::wrap(std::int64_t x) const {
  std::uint64_t u = static_cast<std::uint64_t>(x) & mask_;
  if (width_ < 64 && (u >> (width_ - 1)) & 1U) u |= ~mask_;
  return static_cast<std::int64_t>(u);
}

std::int64_t WordArith::max_value() const {
  return width_ == 64 ? std::numeric_limits<std::int64_t>::max()
                      : (std::int64_t{1} << (width_ - 1)) - 1;
}

std::int64_t WordArith::min_value() const { return -max_value() - 1; }

std::int64_t WordArith::apply(Op op, std::int64_t a, std::int64_t b) const {
  const auto ua = static_cast<std::uint64_t>(a);
  const auto ub = static_cast<std::uint64_t>(b);
  switch (op) {
    case Op::NOP:
      return 0;
    case Op::ADD:
      return wrap(static_cast<std::int64_t>(ua + ub));
    case Op::SUB:
      return wrap(static_cast<std::int64_t>(ua - ub));
    case Op::MUL:
      return wrap(static_cast<std::int64_t>(ua * ub));
    case Op::AND:
      return wrap(a & b);
    case Op::OR:
      return wrap(a | b);
    case Op::XOR:
      return wrap(a ^ b);
    case Op::SHL: {
      const auto amount = ub & mask_;
      if (amount >= static_cast<std::uint64_t>(width_)) return 0;
      return wrap(static_cast<std::int64_t>(ua << amount));
    }
    case Op::SHR: {
      // logical shift on the W-bit pattern
      const auto amount = ub & mask_;
      if (amount >= static_cast<std::uint64_t>(width_)) return 0;
      return wrap(static_cast<std::int64_t>((ua & mask_) >> amount));
    }
    case Op::MIN:
      return a < b ? a : b;
    case Op::MAX:
      return a > b ? a : b;
    case Op::CMP_LT:
      return a < b ? 1 : 0;
    case Op::ABS:
      return wrap(a < 0 ? static_cast<std::int64_t>(0 - ua) : a);
    case Op::PASS:
      return a;
    case Op::SELECT:
      break;
  }
  throw InvalidArgument("op " + std::string(op_name(op)) + " is not a two-operand ALU op");
}

}  // namespace dough
