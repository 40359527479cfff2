#include "dough/dma.hpp"

#include <algorithm>

namespace dough {

void validate_dma(const DmaModel& m) {
  if (m.segments.empty()) throw InvalidArgument("DMA model needs at least one segment");
  if (m.segments.front().lower_bound != 0) throw InvalidArgument("first DMA segment must start at 0");
  for (std::size_t k = 0; k < m.segments.size(); ++k) {
    const auto& s = m.segments[k];
    if (s.slope < 0) throw InvalidArgument("DMA segment slope must be non-negative");
    if (k > 0 && s.lower_bound <= m.segments[k - 1].lower_bound)
      throw InvalidArgument("DMA segment bounds must be strictly increasing");
  }
  // DMA(1) >= DMA(0) = 0, then no drop at any breakpoint.
  if (dma_latency(m, 1) < 0) throw InvalidArgument("DMA latency must be non-negative");
  for (std::size_t k = 1; k < m.segments.size(); ++k) {
    const Words b = m.segments[k].lower_bound;
    const auto& prev = m.segments[k - 1];
    const Cycles before = b - 1 >= 1 ? prev.intercept + prev.slope * (b - 1) : 0;
    const Cycles at = m.segments[k].intercept + m.segments[k].slope * b;
    if (at < before) throw InvalidArgument("DMA latency decreases at breakpoint " + std::to_string(b));
  }
}

Cycles dma_latency(const DmaModel& m, Words x) {
  if (x < 0) throw InvalidArgument("negative DMA transfer size");
  if (x == 0) return 0;
  auto it = std::upper_bound(m.segments.begin(), m.segments.end(), x,
                             [](Words v, const DmaSegment& s) { return v < s.lower_bound; });
  if (it == m.segments.begin()) throw InvalidArgument("DMA model does not cover transfer size");
  --it;
  return checked_add(it->intercept, checked_mul(it->slope, x));
}

}  // namespace dough
