#include "dough/control.hpp"

#include <algorithm>

namespace dough {

namespace {

using namespace word_layout;

constexpr std::uint64_t mask(int bits) { return (std::uint64_t{1} << bits) - 1; }

std::uint64_t encode_source(const Source& s) {
  if (s.kind == SrcKind::DM && (s.addr < 0 || s.addr >= (1 << kAddrBits)))
    throw InvalidArgument("DM selector address out of range");
  const std::uint64_t addr = s.kind == SrcKind::DM ? static_cast<std::uint64_t>(s.addr) : 0;
  return static_cast<std::uint64_t>(s.kind) | (addr << 3);
}

Source decode_source(std::uint64_t bits) {
  const auto kind = static_cast<unsigned>(bits & 7);
  const auto addr = static_cast<int>(bits >> 3);
  if (kind > static_cast<unsigned>(SrcKind::IBuf)) throw InvalidArgument("unknown selector kind");
  Source s{static_cast<SrcKind>(kind), 0};
  if (s.kind == SrcKind::DM) s.addr = addr;
  else if (addr != 0) throw InvalidArgument("address bits set on a non-DM selector");
  return s;
}

}  // namespace

std::uint64_t encode_control_word(const ControlWord& w) {
  std::uint64_t bits = static_cast<std::uint64_t>(w.op) << kOpShift;
  bits |= encode_source(w.src[0]) << kSrcAShift;
  bits |= encode_source(w.src[1]) << kSrcBShift;
  if (w.dm_write >= 0) {
    if (w.dm_write >= (1 << kAddrBits)) throw InvalidArgument("DM write address out of range");
    bits |= (kWriteEnable | static_cast<std::uint64_t>(w.dm_write)) << kWriteShift;
  }
  const std::uint64_t flags = (w.obuf_store ? 1u : 0u) | (w.load_from_obuf ? 2u : 0u);
  bits |= flags << kFlagShift;
  return bits;
}

ControlWord decode_control_word(std::uint64_t bits) {
  if (bits >> kReservedShift) throw InvalidArgument("reserved control-word bits are set");
  ControlWord w;
  const auto op = static_cast<int>((bits >> kOpShift) & mask(kOpBits));
  if (op >= kOpCount) throw InvalidArgument("unknown opcode " + std::to_string(op));
  w.op = static_cast<Op>(op);
  w.src[0] = decode_source((bits >> kSrcAShift) & mask(kSelBits));
  w.src[1] = decode_source((bits >> kSrcBShift) & mask(kSelBits));
  const std::uint64_t write = (bits >> kWriteShift) & mask(kWriteBits);
  if (write & kWriteEnable) {
    if (write & ~(kWriteEnable | mask(kAddrBits))) throw InvalidArgument("stray bits in the DM write field");
    w.dm_write = static_cast<int>(write & mask(kAddrBits));
  } else if (write != 0) {
    throw InvalidArgument("DM write address without the enable bit");
  }
  const std::uint64_t flags = (bits >> kFlagShift) & mask(kFlagBits);
  if (flags & ~std::uint64_t{3}) throw InvalidArgument("unknown control-word flag");
  w.obuf_store = flags & 1;
  w.load_from_obuf = flags & 2;
  return w;
}

ProgramImage emit_control_words(const Schedule& s, const OverlayConfig& config) {
  if (s.rows != config.rows || s.cols != config.cols)
    throw InvalidArgument("schedule is for a " + std::to_string(s.rows) + "x" + std::to_string(s.cols) +
                          " array but the overlay is " + std::to_string(config.rows) + "x" +
                          std::to_string(config.cols));
  if (s.length > config.imem_depth)
    throw InfeasibleError("schedule does not fit the instruction memory",
                          {{"instr_mem", s.length, config.imem_depth}});
  ProgramImage img;
  img.rows = s.rows;
  img.cols = s.cols;
  img.length = s.length;
  img.constants = s.constants;
  img.programs.assign(static_cast<std::size_t>(s.rows * s.cols),
                      std::vector<ControlWord>(static_cast<std::size_t>(s.length)));
  for (const auto& p : s.placements) {
    auto& w = img.programs.at(static_cast<std::size_t>(p.pe)).at(static_cast<std::size_t>(p.cycle));
    w.op = p.op;
    w.src = p.src;
    w.dm_write = p.dm_write;
    w.obuf_store = p.obuf_store;
    w.load_from_obuf = p.load_from_obuf;
  }
  // Slots follow issue order, so one iteration's streams are 0, 1, 2, ...
  img.load_nodes = s.load_order;
  img.store_nodes = s.store_order;
  for (std::size_t i = 0; i < s.load_order.size(); ++i) img.in_addr.push_back(static_cast<int>(i));
  for (std::size_t i = 0; i < s.store_order.size(); ++i) img.out_addr.push_back(static_cast<int>(i));
  return img;
}

std::vector<Placement> decode_placements(const ProgramImage& image) {
  std::vector<Placement> out;
  for (std::size_t pe = 0; pe < image.programs.size(); ++pe) {
    const auto& prog = image.programs[pe];
    for (std::size_t t = 0; t < prog.size(); ++t) {
      const ControlWord w = decode_control_word(encode_control_word(prog[t]));
      if (w.op == Op::NOP) continue;
      Placement p;
      p.pe = static_cast<int>(pe);
      p.cycle = static_cast<Cycles>(t);
      p.op = w.op;
      p.src = w.src;
      p.dm_write = w.dm_write;
      p.obuf_store = w.obuf_store;
      p.load_from_obuf = w.load_from_obuf;
      out.push_back(p);
    }
  }
  std::sort(out.begin(), out.end(),
            [](const Placement& a, const Placement& b) { return std::tie(a.cycle, a.pe) < std::tie(b.cycle, b.pe); });
  return out;
}

}  // namespace dough
