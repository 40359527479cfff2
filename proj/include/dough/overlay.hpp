#pragma once

#include <string>
#include <vector>

#include "dough/common.hpp"
#include "dough/dma.hpp"

namespace dough {

/// Width of one encoded control word in bits.
inline constexpr int kControlWordBits = 64;
/// Largest data memory the control-word address fields can reach.
inline constexpr Words kMaxDataMemDepth = 1024;

/// Overlay parameters: array size, data width, memory depths and widths.
struct OverlayConfig {
  int rows = 2;
  int cols = 2;
  int data_width = 32;           // W0
  Words dm_depth = 1024;         // D0
  Words ibuf_depth = 1024;       // D1
  Words obuf_depth = 1024;       // D2
  Words imem_depth = 1024;       // D3
  Words in_addr_depth = 1024;    // D4
  Words out_addr_depth = 1024;   // D5
  int instr_width = kControlWordBits;  // W1
  int in_addr_width = 10;        // W2
  int out_addr_width = 10;       // W3
  double frequency_hz = 250e6;

  int pes() const { return rows * cols; }
  /// Set W2/W3 to the narrowest widths that address the buffers.
  OverlayConfig& fit_address_widths();
  bool operator==(const OverlayConfig&) const = default;
};

/// Structural problems with a configuration (empty when valid).
std::vector<std::string> validate_overlay(const OverlayConfig& config);

struct ResourceVector {
  std::int64_t bram = 0;
  std::int64_t lut = 0;
  std::int64_t ff = 0;
  std::int64_t dsp = 0;
  bool operator==(const ResourceVector&) const = default;
};

struct LogicCoefficients {
  std::int64_t lut = 0;
  std::int64_t ff = 0;
  std::int64_t dsp = 0;
  bool operator==(const LogicCoefficients&) const = default;
};

struct BramGeometry {
  Words base_depth = 1024;
  int base_width = 36;

  std::int64_t block_bits() const { return base_depth * base_width; }
  bool operator==(const BramGeometry&) const = default;
};

struct PlatformModel {
  std::string name = "custom";
  ResourceVector budgets;
  LogicCoefficients alpha;  // per-PE cost
  LogicCoefficients beta;   // fixed cost
  BramGeometry bram_geometry;
  DmaModel dma = DmaModel::linear(500, 2);
  double epsilon = 0.05;
  double frequency_hz = 250e6;
  bool operator==(const PlatformModel&) const = default;
};

/// Zynq-7020 budgets with placeholder (uncalibrated) logic coefficients.
PlatformModel zedboard_platform();

/// Throws InvalidArgument when budgets, coefficients, epsilon or DMA model are out of range.
void validate_platform(const PlatformModel& platform);

std::int64_t bram_blocks(Words depth, int width, const BramGeometry& geometry = {});

ResourceVector resource_estimate(const OverlayConfig& config, const PlatformModel& platform);

/// Every resource class exceeding its budget; `<=` is inclusive.
std::vector<Violation> check_budget(const ResourceVector& res, const PlatformModel& platform);

}  // namespace dough
