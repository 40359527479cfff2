#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dough/common.hpp"
#include "dough/ops.hpp"

namespace dough {

// ---------------------------------------------------------------------------
// Loop kernel IR
// ---------------------------------------------------------------------------

/// One affine index expression: sum_v coeffs[v] * var_v + constant.
struct AffineIndex {
  std::vector<std::int64_t> coeffs;
  std::int64_t constant = 0;

  bool uses(std::size_t var) const { return var < coeffs.size() && coeffs[var] != 0; }
  std::int64_t eval(const std::vector<std::int64_t>& point) const;
};

struct AffineRef {
  int array = -1;
  std::vector<AffineIndex> indices;

  std::vector<std::int64_t> eval(const std::vector<std::int64_t>& point) const;
  bool uses(std::size_t var) const;
};

enum class ArrayRole { Input, Output };

struct ArrayDecl {
  std::string name;
  ArrayRole role = ArrayRole::Input;
  Shape extents;

  std::int64_t size() const { return product(extents); }
};

struct Expr {
  enum class Kind { Const, Ref, Apply, Sum };

  Kind kind = Kind::Const;
  std::int64_t value = 0;  // Const
  AffineRef ref;           // Ref
  Op op = Op::NOP;         // Apply
  std::vector<Expr> args;  // Apply operands, or the Sum body
  int sum_var = -1;        // Sum: loop variable reduced inside the expression

  static Expr constant(std::int64_t v);
  static Expr reference(AffineRef r);
  static Expr apply(Op op, std::vector<Expr> args);
  static Expr sum(int var, Expr body);
};

enum class Update {
  Assign,  // T[...] = e
  Sum,     // T[...] += e
  Min,     // T[...] min= e
  ArgMin,  // T[...] argmin(v)= e   (T receives the v minimizing e, first on ties)
};

struct Statement {
  AffineRef target;
  Update update = Update::Assign;
  Expr value;
  int arg_var = -1;  // ArgMin only
};

/// Affine loop nest with 0-based bounds. Iteration order is lexicographic
/// over `vars` (first variable outermost).
struct LoopKernel {
  std::string name;
  std::vector<std::string> vars;
  Shape bounds;
  std::vector<ArrayDecl> arrays;
  std::vector<Statement> statements;
  std::string source;  // canonical kernel-DSL text

  std::size_t depth() const { return bounds.size(); }
  int find_array(std::string_view array_name) const;
  const ArrayDecl& array(int index) const { return arrays.at(static_cast<std::size_t>(index)); }

  /// Loop variables that must be fully contained in every tile: variables
  /// reduced inside `sum(...)` and the arg-min dimension.
  std::vector<bool> full_tile_dims() const;

  /// Reduction variables of a statement: loop variables absent from its target.
  std::vector<bool> reduction_vars(const Statement& s) const;
  /// Linear part of the array's references applied to an iteration point:
  /// element(base + o) = element_offset(base) + element(o).
  std::vector<std::int64_t> element_offset(int array_index, const std::vector<std::int64_t>& base) const;
  /// Variables bound by `sum(...)` nodes inside a statement value.
  std::vector<bool> inner_vars(const Statement& s) const;
};

/// Throws SemanticError if any IR invariant is broken.
void validate_kernel(const LoopKernel& kernel);

/// Parse kernel-DSL text (`.kdl`). Throws ParseError (line:column) or SemanticError.
LoopKernel parse_kernel(std::string_view text, std::string_view name = "kernel");

/// Render a kernel back to DSL text; parse_kernel(to_kdl(k)) is structurally equal to k.
std::string to_kdl(const LoopKernel& kernel);

/// Benchmark generators: MM{size}, FIR{inputs,taps}, SE{rows,cols}, KM{nodes,centroids,dims}.
using KernelParams = std::map<std::string, std::int64_t>;
LoopKernel builtin_kernel(std::string_view name, const KernelParams& params);
/// `MM?size=8`, `FIR?inputs=64&taps=8`, ... Missing parameters take the reference benchmark sizes.
LoopKernel builtin_kernel_from_spec(std::string_view spec);

// ---------------------------------------------------------------------------
// Unrolling and grouping factors
// ---------------------------------------------------------------------------

using Factor = Shape;

struct UnrollLimits {
  std::int64_t max_product = 1;  // DFG-size cap on prod(u_i)
};

std::vector<std::int64_t> divisors(std::int64_t n);

/// True when u_i | l_i for all i and full-tile dims are complete.
bool is_valid_unroll(const LoopKernel& kernel, const Factor& u);
/// True when u_i | g_i | l_i for all i.
bool is_valid_group(const LoopKernel& kernel, const Factor& u, const Factor& g);

/// Smallest legal unroll factor: 1 on free dims, l_i on full-tile dims.
Factor minimal_unroll(const LoopKernel& kernel);

/// All legal u with prod(u) <= cap, sorted by product then lexicographically.
/// The minimal factor is always present even when its product exceeds the cap.
std::vector<Factor> enumerate_unroll_factors(const LoopKernel& kernel, const UnrollLimits& limits);

/// Divisor-chain successors of u: exactly one free u_i advanced to its next divisor.
std::vector<Factor> unroll_successors(const LoopKernel& kernel, const Factor& u,
                                      const UnrollLimits& limits);

struct GroupLimits {
  std::optional<Words> max_in_words;  // prune g with In(g) above this
};

std::vector<Factor> enumerate_group_factors(const LoopKernel& kernel, const Factor& u,
                                            const GroupLimits& limits = {});

struct IoCounts {
  Words in = 0;
  Words out = 0;
  bool operator==(const IoCounts&) const = default;
};

/// Distinct words read and written by one tile of extent `factor`. Partial
/// reduction accumulators count as inputs when a reduction dim is split.
IoCounts io_counts(const LoopKernel& kernel, const Factor& factor);

/// Whether statement `s` carries a partial accumulator across tiles of `factor`.
bool needs_accumulator(const LoopKernel& kernel, const Statement& s, const Factor& factor);

// ---------------------------------------------------------------------------
// Dataflow graph
// ---------------------------------------------------------------------------

struct Operand {
  enum class Kind : std::uint8_t { None, Node, Imm };
  Kind kind = Kind::None;
  std::int32_t node = -1;
  std::int64_t imm = 0;

  static Operand of_node(int id) { return {Kind::Node, id, 0}; }
  static Operand of_imm(std::int64_t v) { return {Kind::Imm, -1, v}; }
  bool is_node() const { return kind == Kind::Node; }
  bool is_imm() const { return kind == Kind::Imm; }
  bool operator==(const Operand&) const = default;
};

enum class NodeKind : std::uint8_t { Load, Compute, Store };

struct DfgNode {
  int id = 0;
  NodeKind kind = NodeKind::Compute;
  Op op = Op::PASS;
  std::array<Operand, 2> operands{};
  // Load/Store: element coordinates relative to the tile origin.
  int array = -1;
  std::vector<std::int64_t> coords;
  bool accumulator = false;  // Load of a partial reduction value

  bool operator==(const DfgNode&) const = default;
};

/// Nodes are stored in topological order (every operand id < node id).
struct Dfg {
  std::vector<DfgNode> nodes;

  std::size_t size() const { return nodes.size(); }
  bool empty() const { return nodes.empty(); }
  std::size_t count(NodeKind kind) const;
  std::vector<int> loads() const;
  std::vector<int> stores() const;
  /// Consumers of every node, ordered by consumer id.
  std::vector<std::vector<int>> consumers() const;
  /// Longest path (in nodes) from each node to any sink, the node included.
  std::vector<int> height() const;
  int critical_path() const;

  bool operator==(const Dfg&) const = default;
};

/// Throws SemanticError when the graph breaks a structural invariant.
void validate_dfg(const Dfg& dfg);

struct UnrollOptions {
  std::size_t max_nodes = 200000;
  int width = 32;  // word width used for constant folding
};

/// Expand one tile of extent u into a DFG.
Dfg unroll(const LoopKernel& kernel, const Factor& u, const UnrollOptions& options = {});

// ---------------------------------------------------------------------------
// Functional reference
// ---------------------------------------------------------------------------

struct ArrayImage {
  Shape extents;
  std::vector<std::int64_t> data;

  std::int64_t& at(const std::vector<std::int64_t>& coords);
  std::int64_t at(const std::vector<std::int64_t>& coords) const;
  bool operator==(const ArrayImage&) const = default;
};

using ArraySet = std::map<std::string, ArrayImage>;

std::int64_t linear_index(const Shape& extents, const std::vector<std::int64_t>& coords);

/// Reduction identity for an update kind at the given width.
std::int64_t update_identity(Update update, const WordArith& arith);

/// Random input images for every input array, uniform in [lo, hi].
ArraySet random_inputs(const LoopKernel& kernel, std::uint64_t seed, std::int64_t lo = -1000,
                       std::int64_t hi = 1000, int width = 32);

/// Sequential execution of the nest with W-bit modular arithmetic. Returns the output arrays.
ArraySet reference_execute(const LoopKernel& kernel, const ArraySet& inputs, int width = 32);

/// Visit every point (lexicographic) of a box with the given extents.
template <typename Fn>
void for_each_point(const Shape& extents, Fn&& fn) {
  const std::size_t n = extents.size();
  for (auto e : extents)
    if (e <= 0) return;
  std::vector<std::int64_t> point(n, 0);
  while (true) {
    fn(point);
    std::size_t d = n;
    while (d > 0) {
      --d;
      if (++point[d] < extents[d]) break;
      point[d] = 0;
      if (d == 0) return;
    }
    if (n == 0) return;
  }
}

}  // namespace dough
