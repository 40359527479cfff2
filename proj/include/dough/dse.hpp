#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dough/kernel.hpp"
#include "dough/overlay.hpp"
#include "dough/perf.hpp"
#include "dough/scheduler.hpp"

namespace dough {

/// Array sizes searched: the growth chain 2x2, 3x2, 3x3, 4x3, ... up to
/// max_rows x max_cols, or every r x c with 2 <= r, c <= max.
enum class SizeSpace { Chain, Grid };

/// Extent of the searched design space. Depth lists hold powers of two.
struct SearchBounds {
  int max_rows = 5;
  int max_cols = 5;
  SizeSpace size_space = SizeSpace::Chain;
  std::int64_t max_unroll_product = 64;
  int data_width = 32;
  std::vector<Words> dm_depths{1024};                             // D0
  std::vector<Words> ibuf_depths{1024, 2048, 4096, 8192};         // D1
  std::vector<Words> obuf_depths{1024, 2048, 4096, 8192};         // D2
  std::vector<Words> imem_depths{256, 512, 1024, 2048, 4096};     // D3
  std::vector<Words> in_addr_depths{1024, 2048, 4096, 8192};      // D4
  std::vector<Words> out_addr_depths{1024, 2048, 4096, 8192};     // D5
  std::optional<double> epsilon;  // overrides the platform value
  std::size_t max_dfg_nodes = 20000;
  std::size_t es_cap = 5'000'000;  // configurations ES may enumerate
  std::size_t top_k = 10;
  int jobs = 1;
};

/// Searched array sizes in growth order (2x2 first).
std::vector<std::pair<int, int>> array_sizes(const SearchBounds& bounds);

/// Sorts and deduplicates the depth lists; throws InvalidArgument on empty
/// lists, non powers of two, D0 above 1024, or arrays smaller than 2x2.
SearchBounds normalized(SearchBounds bounds);

struct FeasibleEntry {
  Factor u;
  int rows = 0;
  int cols = 0;
  Cycles dfg_cycles = 0;   // schedule length; the minimum D3
  Cycles compu_time = 0;
  Words dm_used = 0;       // largest per-PE data-memory use; the minimum D0
  IoCounts io_u;           // In(u), Out(u); D4/D5 need iterations x these
  std::shared_ptr<const Schedule> schedule;
};

struct FeasibleSpace {
  double epsilon = 0;
  std::vector<FeasibleEntry> entries;  // sorted by (u, rows, cols)
  std::size_t candidates = 0;          // (u, r, c) points scheduled as successors of admitted ones
  std::size_t rejected = 0;            // candidates that failed the improvement test or to schedule
  std::size_t scheduler_invocations = 0;  // distinct (u, r, c) schedules computed
};

/// Relative improvement (before - after) / before.
double improvement(Cycles before, Cycles after);

/// A DAG of candidate points. Every predecessor of a node has a smaller level.
struct Lattice {
  std::vector<std::vector<std::size_t>> preds;
  std::vector<int> level;
  std::size_t root = 0;
};

struct Exploration {
  std::vector<bool> candidate;  // evaluated because an admitted predecessor (or root) reached it
  std::vector<bool> admitted;
  std::vector<std::optional<Cycles>> compu;  // CompuTime of candidates; empty when evaluation failed
};

/// Evaluates a batch of node ids (one level at a time) to CompuTime, or
/// nothing for a point that cannot be realised.
using LatticeEval = std::function<std::vector<std::optional<Cycles>>(const std::vector<std::size_t>&)>;

/// Level-by-level growth from the root. A node becomes a candidate when a
/// predecessor is admitted, and is admitted when its CompuTime improves on
/// some admitted predecessor by more than epsilon (any improvement test
/// passes when epsilon is 0).
Exploration explore_lattice(const Lattice& lattice, double epsilon, const LatticeEval& eval);

/// Grows the feasible space from (minimal u, 2x2). Successors of (u, s)
/// are (u, next size) and (u', s) for u' one divisor step above u; in the
/// grid space a size has two next sizes, (r+1, c) and (r, c+1). A successor
/// is scheduled once and joins when its CompuTime improves on an admitted
/// predecessor by more than epsilon; epsilon 0 switches pruning off.
FeasibleSpace build_feasible_space(const LoopKernel& kernel, const SearchBounds& bounds, double epsilon);

struct EvaluatedDesign {
  FullConfig config;
  Cycles dfg_cycles = 0;
  Words dm_used = 0;
  IoCounts io_u;
  IoCounts io_g;
  TimingReport timing;
  ResourceVector resources;
  std::vector<Violation> violations;
  std::shared_ptr<const Schedule> schedule;

  bool ok() const { return violations.empty(); }
};

/// Every inequality of a design: D0 against data-memory use plus check_constraints.
std::vector<Violation> design_violations(const EvaluatedDesign& d, const PlatformModel& platform);

/// Analytical evaluation; never schedules.
EvaluatedDesign evaluate_config(const LoopKernel& kernel, const FeasibleEntry& entry, const Factor& g,
                                const OverlayConfig& depths, const PlatformModel& platform);

/// Smallest depth of each list covering the entry's needs under g (the largest when none does).
OverlayConfig minimal_depths(const LoopKernel& kernel, const FeasibleEntry& entry, const Factor& g,
                             const SearchBounds& bounds, const PlatformModel& platform);

/// Total order used to pick the best design: lower RunTime, fewer BRAM
/// blocks, smaller r*c, smaller (u, g), then rows and depths.
bool design_less(const EvaluatedDesign& a, const EvaluatedDesign& b);

struct CustomizationStats {
  std::size_t scheduler_invocations = 0;
  std::size_t feasible_entries = 0;
  std::size_t configs_evaluated = 0;
  std::size_t feasible_designs = 0;
  double wall_seconds = 0;
};

struct CustomizationResult {
  std::string method;  // "ts" or "es"
  double epsilon = 0;
  EvaluatedDesign best;
  std::vector<EvaluatedDesign> top;  // best first
  CustomizationStats stats;
};

/// Two-step customization. Throws InfeasibleError carrying the violations of
/// the closest design when nothing satisfies every constraint.
CustomizationResult customize_ts(const LoopKernel& kernel, const PlatformModel& platform, const SearchBounds& bounds);

/// Exhaustive search over every (u, r, c, g, depths). Throws CapExceededError
/// when the space is larger than bounds.es_cap.
CustomizationResult customize_es(const LoopKernel& kernel, const PlatformModel& platform, const SearchBounds& bounds);

/// Number of configurations customize_es would evaluate.
std::size_t es_space_size(const LoopKernel& kernel, const SearchBounds& bounds);

}  // namespace dough
