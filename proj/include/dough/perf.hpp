#pragma once

#include <vector>

#include "dough/common.hpp"
#include "dough/dma.hpp"
#include "dough/kernel.hpp"
#include "dough/overlay.hpp"

namespace dough {

/// C = (u, g, overlay). The kernel is referenced by the caller.
struct FullConfig {
  Factor u;
  Factor g;
  OverlayConfig overlay;
  bool operator==(const FullConfig&) const = default;
};

struct TimingReport {
  Cycles compu = 0;
  Cycles commu = 0;
  Cycles total = 0;
  double seconds = 0;
  std::int64_t dfg_reps = 0;  // prod(l / u)
  std::int64_t groups = 0;    // prod(l / g)
  bool operator==(const TimingReport&) const = default;
};

/// prod(l_i / f_i); throws InvalidArgument unless every f_i divides l_i.
std::int64_t tile_count(const Shape& l, const Factor& f);

Cycles compu_time(const Shape& l, const Factor& u, Cycles dfg_cycles);
Cycles commu_time(const Shape& l, const Factor& g, Words in_g, Words out_g, const DmaModel& dma);
Cycles run_time(Cycles compu, Cycles commu);

TimingReport timing_report(const Shape& l, const Factor& u, const Factor& g, Cycles dfg_cycles,
                           Words in_g, Words out_g, const DmaModel& dma, double frequency_hz);

/// Buffer, instruction-memory and address-stream inequalities plus the resource budget.
/// Constraint names: in_buffer, out_buffer, instr_mem, in_addr, out_addr, bram, lut, ff, dsp.
std::vector<Violation> check_constraints(const FullConfig& cfg, const PlatformModel& platform, Words in_u,
                                         Words out_u, Words in_g, Words out_g, Cycles dfg_cycles);

}  // namespace dough
