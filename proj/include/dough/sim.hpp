#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "dough/control.hpp"
#include "dough/dma.hpp"
#include "dough/kernel.hpp"
#include "dough/perf.hpp"

namespace dough {

/// A host array element: (array index in the kernel, row-major linear index).
using WordRef = std::pair<int, std::int64_t>;

/// Buffer contents and address streams of one group.
struct GroupPlan {
  Shape origin;                // first iteration-space point of the group
  std::vector<WordRef> ibuf;   // IBuf address -> host input word
  std::vector<WordRef> obuf;   // OBuf address -> host output word
  std::vector<int> in_addr;    // all loads of all iterations, in issue order
  std::vector<int> out_addr;   // all stores of all iterations, in issue order
};

struct AcceleratorImage {
  OverlayConfig overlay;
  ProgramImage program;
  Factor u;
  Factor g;
  Shape bounds;
  std::int64_t iterations_per_group = 0;
  std::vector<GroupPlan> groups;
  std::vector<std::int64_t> output_identity;  // per kernel array: initial host value of outputs
  Words dma_in_words = 0;   // In(g) per group
  Words dma_out_words = 0;  // Out(g) per group
  DmaModel dma;
};

/// Builds the accelerator image of a configuration. Throws InvalidArgument
/// for an inconsistent (kernel, config, DFG, schedule) tuple and
/// InfeasibleError when the image overflows a buffer or memory.
AcceleratorImage build_image(const LoopKernel& kernel, const FullConfig& config, const Dfg& dfg,
                             const Schedule& schedule, const DmaModel& dma);

struct GroupStats {
  Cycles compute = 0;
  Cycles dma_in = 0;
  Cycles dma_out = 0;
  bool operator==(const GroupStats&) const = default;
};

struct SimStats {
  Cycles compute_cycles = 0;
  Cycles dma_cycles = 0;  // modelled, not simulated
  std::int64_t groups = 0;
  std::int64_t iterations_per_group = 0;
  std::int64_t ibuf_reads = 0;
  std::int64_t obuf_writes = 0;
  std::vector<GroupStats> per_group;
  bool operator==(const SimStats&) const = default;
};

struct SimOptions {
  /// Fault on reads of data memory or neighbour registers that hold no value
  /// produced in the current DFG iteration. Permissive mode reads zero.
  bool strict = true;
  /// JSON-lines cycle trace of every executed instruction.
  std::ostream* trace = nullptr;
};

struct SimResult {
  ArraySet outputs;
  SimStats stats;
};

/// Runs every group. Throws SimulationError on a fault (stream exhausted,
/// uninitialised read in strict mode, port conflict).
SimResult simulate(const LoopKernel& kernel, const AcceleratorImage& image, const ArraySet& inputs,
                   const SimOptions& options = {});

struct VerifyEntry {
  std::uint64_t seed = 0;
  bool outputs_match = false;
  bool cycles_match = false;
  Cycles compute_cycles = 0;
  Cycles expected_cycles = 0;
  std::string detail;  // first mismatch or the fault message
  bool pass() const { return outputs_match && cycles_match; }
};

struct VerifyReport {
  std::vector<VerifyEntry> entries;
  std::size_t passed() const;
  bool all_pass() const { return passed() == entries.size(); }
};

/// For each seed: random inputs, simulation, reference execution, bit-exact
/// comparison, and compute cycles checked against compu_time.
VerifyReport verify(const LoopKernel& kernel, const AcceleratorImage& image, const std::vector<std::uint64_t>& seeds,
                    const SimOptions& options = {});

}  // namespace dough
