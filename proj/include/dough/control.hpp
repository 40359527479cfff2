#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "dough/overlay.hpp"
#include "dough/scheduler.hpp"

namespace dough {

/// One PE instruction for one cycle.
struct ControlWord {
  Op op = Op::NOP;
  std::array<Source, 2> src{};
  int dm_write = -1;  // -1 when the result is not written to data memory
  bool obuf_store = false;
  bool load_from_obuf = false;

  bool operator==(const ControlWord&) const = default;
};

/// 64-bit layout, least significant bit first:
///   op[6] | src_a[13] | src_b[13] | dm_write[13] | flags[4] | reserved[15]
/// A selector packs kind in bits 0-2 and the DM address in bits 3-12.
/// dm_write holds the address in bits 0-9 and an enable bit at bit 12.
/// flags: bit 0 = OBuf store, bit 1 = IBuf selector reads the OBuf.
namespace word_layout {
inline constexpr int kOpBits = 6;
inline constexpr int kSelBits = 13;
inline constexpr int kWriteBits = 13;
inline constexpr int kFlagBits = 4;
inline constexpr int kOpShift = 0;
inline constexpr int kSrcAShift = kOpShift + kOpBits;
inline constexpr int kSrcBShift = kSrcAShift + kSelBits;
inline constexpr int kWriteShift = kSrcBShift + kSelBits;
inline constexpr int kFlagShift = kWriteShift + kWriteBits;
inline constexpr int kReservedShift = kFlagShift + kFlagBits;
inline constexpr int kAddrBits = 10;
inline constexpr std::uint64_t kWriteEnable = std::uint64_t{1} << 12;
}  // namespace word_layout

std::uint64_t encode_control_word(const ControlWord& w);
/// Throws InvalidArgument on an unknown opcode or selector, or set reserved bits.
ControlWord decode_control_word(std::uint64_t bits);

/// Per-PE instruction arrays plus the address streams of one DFG iteration.
/// Stream entries are iteration-relative slots: the i-th load reads input
/// slot in_addr[i], the i-th store writes output slot out_addr[i]. A
/// group image rebases them onto real buffer addresses.
struct ProgramImage {
  int rows = 0;
  int cols = 0;
  Cycles length = 0;
  std::vector<std::vector<ControlWord>> programs;  // [pe][cycle], NOP padded
  std::vector<ConstantSlot> constants;             // DM words preloaded before the run
  std::vector<int> in_addr;
  std::vector<int> out_addr;
  std::vector<int> load_nodes;   // DFG load id behind each in_addr entry
  std::vector<int> store_nodes;  // DFG store id behind each out_addr entry

  bool operator==(const ProgramImage&) const = default;
};

/// Throws InfeasibleError (constraint "instr_mem") when the schedule is longer
/// than D3, and InvalidArgument when the array shapes disagree.
ProgramImage emit_control_words(const Schedule& s, const OverlayConfig& config);

/// Placements recovered from an image (node and value ids are not encoded
/// and come back as -1), sorted by (cycle, pe).
std::vector<Placement> decode_placements(const ProgramImage& image);

}  // namespace dough
