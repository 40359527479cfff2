#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dough/common.hpp"
#include "dough/kernel.hpp"
#include "dough/overlay.hpp"

namespace dough {

/// Operand selector of a control word. Directions name the neighbour whose
/// previous-cycle result is read: North = row - 1, South = row + 1,
/// West = col - 1, East = col + 1, all modulo the torus size.
enum class SrcKind : std::uint8_t { None = 0, DM = 1, North = 2, South = 3, East = 4, West = 5, IBuf = 6 };

const char* src_kind_name(SrcKind kind);

struct Source {
  SrcKind kind = SrcKind::None;
  int addr = 0;  // DM only

  static Source dm(int a) { return {SrcKind::DM, a}; }
  static Source dir(SrcKind d) { return {d, 0}; }
  bool operator==(const Source&) const = default;
};

/// PE index = row * cols + col. Port PE is 0.
inline constexpr int kPortPe = 0;
int neighbor_pe(int pe, SrcKind direction, int rows, int cols);

struct Placement {
  int pe = 0;
  Cycles cycle = 0;
  Op op = Op::NOP;
  std::array<Source, 2> src{};
  int dm_write = -1;            // DM address written with the result, -1 for none
  bool obuf_store = false;      // result goes to the output buffer
  bool load_from_obuf = false;  // the IBuf selector reads the output buffer (partial accumulators)
  int node = -1;                // DFG node executed here; -1 for a routing hop
  int value = -1;               // DFG node whose value this op produces or forwards

  bool operator==(const Placement&) const = default;
};

struct ConstantSlot {
  int pe = 0;
  int addr = 0;
  std::int64_t value = 0;
  bool operator==(const ConstantSlot&) const = default;
};

struct Schedule {
  int rows = 0;
  int cols = 0;
  Cycles length = 0;
  std::vector<Placement> placements;  // sorted by (cycle, pe)
  std::vector<ConstantSlot> constants;
  std::vector<int> load_order;   // DFG load ids in issue order
  std::vector<int> store_order;  // DFG store ids in issue order
  std::vector<int> dm_used;      // DM words used per PE, constants included
  int hops = 0;

  bool operator==(const Schedule&) const = default;
};

struct SchedulerOptions {
  Words dm_depth = kMaxDataMemDepth;  // D0
  /// Candidate PEs checked exactly per op after the lower-bound pass (0 = all).
  int exact_candidates = 0;
  /// Also try mesh-routed schedules, embeddings of smaller arrays' schedules
  /// and re-timed copies of their placements, keeping the shortest.
  bool portfolio = true;
  /// Extra tie orders tried when re-timing a smaller array's placement.
  int transfer_seeds = 32;
  /// 0 breaks placement ties by lower PE index; other values pick a fixed
  /// pseudo-random order.
  std::uint64_t tie_seed = 0;
};

/// List scheduling with placement and neighbour routing, through a one-off
/// ArraySweep. Throws
/// UnschedulableError when data memory overflows and InvalidArgument for a
/// malformed DFG or an array smaller than 2x2.
Schedule schedule_dfg(const Dfg& dfg, int rows, int cols, const SchedulerOptions& options = {});

/// Schedules one DFG across array sizes. Every size (r, c) other than 2x2
/// has one predecessor, (r-1, c) when r > c and (r, c-1) otherwise, so the
/// chain 2x2, 3x2, 3x3, 4x3, ... is a path of the tree. A size's schedule is
/// the shortest of its own list-scheduling runs, the mesh-routed family, and
/// its predecessor's schedules embedded or re-timed onto the larger array.
/// Sizes are computed on demand and cached. Not thread-safe.
class ArraySweep {
 public:
  explicit ArraySweep(const Dfg& dfg, const SchedulerOptions& options = {});

  /// Throws UnschedulableError when no candidate fits the data memory.
  const Schedule& at(int rows, int cols);
  bool computed(int rows, int cols) const;
  /// Array sizes scheduled so far, predecessors included.
  std::size_t sizes_scheduled() const { return cells_.size(); }

  /// (0, 0) for 2x2.
  static std::pair<int, int> predecessor(int rows, int cols);

 private:
  struct Cell {
    std::vector<Schedule> elite;    // distinct schedules of the best length
    std::optional<Schedule> mesh;   // best mesh-routed schedule
    std::string failure;
  };
  const Cell& compute(int rows, int cols);

  Dfg dfg_;
  SchedulerOptions opt_;
  std::map<std::pair<int, int>, Cell> cells_;
};

/// Re-targets a schedule onto a larger array with PE(0,0) fixed. Returns
/// nothing when some neighbour read has no matching link in the new array.
std::optional<Schedule> embed_schedule(const Schedule& s, int rows, int cols);

/// Cycle 0 through the last occupied cycle, inclusive.
Cycles schedule_length(const Schedule& s);

/// Independent re-check of every schedule invariant; empty when valid.
std::vector<std::string> validate_schedule(const Dfg& dfg, const Schedule& s, int rows, int cols,
                                           Words dm_depth);

/// Graphviz rendering of the placed and routed DFG.
std::string schedule_to_dot(const Dfg& dfg, const Schedule& s);

}  // namespace dough
