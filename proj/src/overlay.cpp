#include "dough/overlay.hpp"

namespace dough {

OverlayConfig& OverlayConfig::fit_address_widths() {
  in_addr_width = std::max(1, ceil_log2(ibuf_depth));
  out_addr_width = std::max(1, ceil_log2(obuf_depth));
  return *this;
}

std::vector<std::string> validate_overlay(const OverlayConfig& c) {
  std::vector<std::string> out;
  if (c.rows < 2 || c.cols < 2) out.push_back("array must be at least 2x2");
  if (c.data_width < 2 || c.data_width > 64) out.push_back("data width must be in [2, 64]");
  const std::pair<const char*, Words> depths[] = {
      {"D0", c.dm_depth},      {"D1", c.ibuf_depth},    {"D2", c.obuf_depth},
      {"D3", c.imem_depth},    {"D4", c.in_addr_depth}, {"D5", c.out_addr_depth}};
  for (const auto& [name, d] : depths)
    if (!is_pow2(d)) out.push_back(std::string(name) + " must be a positive power of two");
  if (c.dm_depth > kMaxDataMemDepth)
    out.push_back("D0 exceeds the addressable data memory (" + std::to_string(kMaxDataMemDepth) + ")");
  if (c.instr_width != kControlWordBits)
    out.push_back("W1 must equal the control word width (" + std::to_string(kControlWordBits) + ")");
  if (c.in_addr_width < ceil_log2(c.ibuf_depth)) out.push_back("W2 too narrow to address D1");
  if (c.out_addr_width < ceil_log2(c.obuf_depth)) out.push_back("W3 too narrow to address D2");
  if (!(c.frequency_hz > 0)) out.push_back("frequency must be positive");
  return out;
}

PlatformModel zedboard_platform() {
  PlatformModel p;
  p.name = "zedboard";
  p.budgets = {140, 53200, 106400, 220};
  p.alpha = {1200, 1500, 4};
  p.beta = {5000, 8000, 0};
  p.bram_geometry = {1024, 36};
  p.dma = DmaModel::linear(500, 2);
  p.epsilon = 0.05;
  p.frequency_hz = 250e6;
  return p;
}

void validate_platform(const PlatformModel& p) {
  const auto& b = p.budgets;
  if (b.bram <= 0 || b.lut <= 0 || b.ff <= 0 || b.dsp <= 0)
    throw InvalidArgument("platform budgets must be positive");
  if (p.alpha.lut < 0 || p.alpha.ff < 0 || p.alpha.dsp < 0)
    throw InvalidArgument("platform alpha coefficients must be non-negative");
  if (p.beta.lut < 0 || p.beta.ff < 0 || p.beta.dsp < 0)
    throw InvalidArgument("platform beta coefficients must be non-negative");
  if (!(p.epsilon > 0 && p.epsilon < 1)) throw InvalidArgument("epsilon must be in (0, 1)");
  if (p.bram_geometry.base_depth < 1 || p.bram_geometry.base_width < 1)
    throw InvalidArgument("BRAM geometry must be positive");
  if (!(p.frequency_hz > 0)) throw InvalidArgument("frequency must be positive");
  validate_dma(p.dma);
}

std::int64_t bram_blocks(Words depth, int width, const BramGeometry& g) {
  if (depth < 1 || width < 1) throw InvalidArgument("BRAM depth and width must be positive");
  const auto ceil_div = [](std::int64_t a, std::int64_t b) { return (a + b - 1) / b; };
  return checked_mul(ceil_div(depth, g.base_depth), ceil_div(width, g.base_width));
}

ResourceVector resource_estimate(const OverlayConfig& c, const PlatformModel& p) {
  const auto& g = p.bram_geometry;
  const std::int64_t pes = c.pes();
  const std::int64_t per_pe = bram_blocks(c.dm_depth, c.data_width, g) + bram_blocks(c.imem_depth, c.instr_width, g);
  ResourceVector r;
  r.bram = checked_mul(pes, per_pe) + bram_blocks(c.ibuf_depth, c.data_width, g) +
           bram_blocks(c.obuf_depth, c.data_width, g) + bram_blocks(c.in_addr_depth, c.in_addr_width, g) +
           bram_blocks(c.out_addr_depth, c.out_addr_width, g);
  r.lut = checked_add(checked_mul(p.alpha.lut, pes), p.beta.lut);
  r.ff = checked_add(checked_mul(p.alpha.ff, pes), p.beta.ff);
  r.dsp = checked_add(checked_mul(p.alpha.dsp, pes), p.beta.dsp);
  return r;
}

std::vector<Violation> check_budget(const ResourceVector& r, const PlatformModel& p) {
  std::vector<Violation> out;
  const auto check = [&](const char* name, std::int64_t v, std::int64_t b) {
    if (v > b) out.push_back({name, v, b});
  };
  check("bram", r.bram, p.budgets.bram);
  check("lut", r.lut, p.budgets.lut);
  check("ff", r.ff, p.budgets.ff);
  check("dsp", r.dsp, p.budgets.dsp);
  return out;
}

}  // namespace dough
