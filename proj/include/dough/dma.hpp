#pragma once

#include <vector>

#include "dough/common.hpp"

namespace dough {

/// Piecewise-linear transfer latency. Segment k covers x >= lower_bound
/// (up to the next segment's bound); DMA(0) is always 0.
struct DmaSegment {
  Words lower_bound = 0;
  Cycles intercept = 0;
  Cycles slope = 0;
  bool operator==(const DmaSegment&) const = default;
};

struct DmaModel {
  std::vector<DmaSegment> segments;

  static DmaModel linear(Cycles intercept, Cycles slope) { return {{{0, intercept, slope}}}; }
  static DmaModel zero() { return linear(0, 0); }
  bool operator==(const DmaModel&) const = default;
};

/// Throws InvalidArgument unless bounds start at 0, strictly increase, and
/// the resulting latency is non-negative and non-decreasing.
void validate_dma(const DmaModel& model);

Cycles dma_latency(const DmaModel& model, Words words);

}  // namespace dough
