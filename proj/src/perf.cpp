#include "dough/perf.hpp"

namespace dough {

std::int64_t tile_count(const Shape& l, const Factor& f) {
  if (l.size() != f.size()) throw InvalidArgument("factor rank does not match loop depth");
  std::int64_t n = 1;
  for (std::size_t i = 0; i < l.size(); ++i) {
    if (f[i] < 1 || l[i] % f[i] != 0)
      throw InvalidArgument("factor " + shape_str(f) + " does not divide loop bounds " + shape_str(l));
    n = checked_mul(n, l[i] / f[i]);
  }
  return n;
}

Cycles compu_time(const Shape& l, const Factor& u, Cycles dfg_cycles) {
  return checked_mul(tile_count(l, u), dfg_cycles);
}

Cycles commu_time(const Shape& l, const Factor& g, Words in_g, Words out_g, const DmaModel& dma) {
  return checked_mul(tile_count(l, g), checked_add(dma_latency(dma, in_g), dma_latency(dma, out_g)));
}

Cycles run_time(Cycles compu, Cycles commu) { return checked_add(compu, commu); }

TimingReport timing_report(const Shape& l, const Factor& u, const Factor& g, Cycles dfg_cycles, Words in_g,
                           Words out_g, const DmaModel& dma, double frequency_hz) {
  TimingReport t;
  t.dfg_reps = tile_count(l, u);
  t.groups = tile_count(l, g);
  t.compu = compu_time(l, u, dfg_cycles);
  t.commu = commu_time(l, g, in_g, out_g, dma);
  t.total = run_time(t.compu, t.commu);
  t.seconds = static_cast<double>(t.total) / frequency_hz;
  return t;
}

std::vector<Violation> check_constraints(const FullConfig& cfg, const PlatformModel& platform, Words in_u,
                                         Words out_u, Words in_g, Words out_g, Cycles dfg_cycles) {
  const auto& o = cfg.overlay;
  const std::int64_t iters = tile_count(cfg.g, cfg.u);
  std::vector<Violation> out;
  const auto check = [&](const char* name, std::int64_t v, std::int64_t b) {
    if (v > b) out.push_back({name, v, b});
  };
  check("in_buffer", in_g, o.ibuf_depth);
  check("out_buffer", out_g, o.obuf_depth);
  check("instr_mem", dfg_cycles, o.imem_depth);
  check("in_addr", checked_mul(iters, in_u), o.in_addr_depth);
  check("out_addr", checked_mul(iters, out_u), o.out_addr_depth);
  for (auto& v : check_budget(resource_estimate(o, platform), platform)) out.push_back(std::move(v));
  return out;
}

}  // namespace dough
