#include <algorithm>
#include <map>
#include <tuple>

#include "dough/kernel.hpp"

namespace dough {

std::size_t Dfg::count(NodeKind kind) const {
  return static_cast<std::size_t>(
      std::count_if(nodes.begin(), nodes.end(), [&](const DfgNode& n) { return n.kind == kind; }));
}

std::vector<int> Dfg::loads() const {
  std::vector<int> out;
  for (const auto& n : nodes)
    if (n.kind == NodeKind::Load) out.push_back(n.id);
  return out;
}

std::vector<int> Dfg::stores() const {
  std::vector<int> out;
  for (const auto& n : nodes)
    if (n.kind == NodeKind::Store) out.push_back(n.id);
  return out;
}

std::vector<std::vector<int>> Dfg::consumers() const {
  std::vector<std::vector<int>> out(nodes.size());
  for (const auto& n : nodes) {
    for (const auto& op : n.operands) {
      if (!op.is_node()) continue;
      auto& list = out[static_cast<std::size_t>(op.node)];
      if (list.empty() || list.back() != n.id) list.push_back(n.id);
    }
  }
  return out;
}

std::vector<int> Dfg::height() const {
  const auto cons = consumers();
  std::vector<int> h(nodes.size(), 1);
  for (std::size_t i = nodes.size(); i-- > 0;)
    for (int c : cons[i]) h[i] = std::max(h[i], h[static_cast<std::size_t>(c)] + 1);
  return h;
}

int Dfg::critical_path() const {
  const auto h = height();
  return h.empty() ? 0 : *std::max_element(h.begin(), h.end());
}

void validate_dfg(const Dfg& dfg) {
  std::vector<bool> from_input(dfg.size(), false);
  for (std::size_t i = 0; i < dfg.size(); ++i) {
    const auto& n = dfg.nodes[i];
    if (n.id != static_cast<int>(i)) throw SemanticError("DFG node ids must be dense and ordered");
    for (const auto& op : n.operands)
      if (op.is_node() && (op.node < 0 || op.node >= n.id))
        throw SemanticError("DFG operand does not precede its consumer");
    switch (n.kind) {
      case NodeKind::Load:
        if (n.operands[0].kind != Operand::Kind::None || n.operands[1].kind != Operand::Kind::None)
          throw SemanticError("load node has operands");
        from_input[i] = true;
        break;
      case NodeKind::Compute: {
        const int arity = op_arity(n.op);
        if (arity < 1 || arity > 2) throw SemanticError("compute node op must take one or two operands");
        for (int s = 0; s < 2; ++s) {
          const bool filled = n.operands[static_cast<std::size_t>(s)].kind != Operand::Kind::None;
          if (filled != (s < arity)) throw SemanticError("compute node operand slots do not match arity");
        }
        for (const auto& op : n.operands)
          if (op.is_node() && from_input[static_cast<std::size_t>(op.node)]) from_input[i] = true;
        break;
      }
      case NodeKind::Store:
        if (!n.operands[0].is_node() || n.operands[1].kind != Operand::Kind::None)
          throw SemanticError("store node needs exactly one node operand");
        if (dfg.nodes[static_cast<std::size_t>(n.operands[0].node)].kind == NodeKind::Store)
          throw SemanticError("store node cannot consume a store");
        if (!from_input[static_cast<std::size_t>(n.operands[0].node)])
          throw SemanticError("output is not reachable from any input");
        break;
    }
  }
}

namespace {

using OperandKey = std::tuple<int, int, std::int64_t>;
OperandKey key_of(const Operand& o) { return {static_cast<int>(o.kind), o.node, o.imm}; }

bool commutative(Op op) {
  switch (op) {
    case Op::ADD:
    case Op::MUL:
    case Op::AND:
    case Op::OR:
    case Op::XOR:
    case Op::MIN:
    case Op::MAX:
      return true;
    default:
      return false;
  }
}

class DfgBuilder {
 public:
  DfgBuilder(const LoopKernel& k, const UnrollOptions& opt) : k_(k), arith_(opt.width), opt_(opt) {}

  Operand load(int array, std::vector<std::int64_t> coords, bool accumulator) {
    auto key = std::make_pair(array, coords);
    if (auto it = loads_.find(key); it != loads_.end()) return Operand::of_node(it->second);
    DfgNode n;
    n.kind = NodeKind::Load;
    n.op = Op::PASS;
    n.array = array;
    n.coords = std::move(coords);
    n.accumulator = accumulator;
    const int id = push(std::move(n));
    loads_.emplace(std::move(key), id);
    return Operand::of_node(id);
  }

  Operand compute(Op op, Operand a, Operand b = {}) {
    if (op_arity(op) == 1) b = {};
    if (a.is_imm() && (b.is_imm() || op_arity(op) == 1)) return Operand::of_imm(arith_.apply(op, a.imm, b.imm));
    // Identity peepholes: exact under modular arithmetic.
    if ((op == Op::ADD || op == Op::SUB) && b.is_imm() && b.imm == 0) return a;
    if (op == Op::ADD && a.is_imm() && a.imm == 0) return b;
    if (op == Op::MUL && b.is_imm() && b.imm == 1) return a;
    if (op == Op::MUL && a.is_imm() && a.imm == 1) return b;
    return make_compute(op, a, b);
  }

  // Force the operand into a node (stores cannot take immediates).
  Operand materialize(Operand v) {
    if (v.is_node() && dfg_.nodes[static_cast<std::size_t>(v.node)].kind == NodeKind::Compute) return v;
    return make_compute(Op::PASS, v, {});
  }

  void store(int array, std::vector<std::int64_t> coords, Operand v) {
    DfgNode n;
    n.kind = NodeKind::Store;
    n.op = Op::PASS;
    n.array = array;
    n.coords = std::move(coords);
    n.operands[0] = materialize(v);
    push(std::move(n));
  }

  Operand lower(const Expr& e, std::vector<std::int64_t>& point) {
    switch (e.kind) {
      case Expr::Kind::Const:
        return Operand::of_imm(arith_.wrap(e.value));
      case Expr::Kind::Ref:
        return load(e.ref.array, e.ref.eval(point), false);
      case Expr::Kind::Sum: {
        const auto v = static_cast<std::size_t>(e.sum_var);
        const auto saved = point[v];
        point[v] = 0;
        Operand acc = lower(e.args[0], point);
        for (std::int64_t x = 1; x < k_.bounds[v]; ++x) {
          point[v] = x;
          acc = compute(Op::ADD, acc, lower(e.args[0], point));
        }
        point[v] = saved;
        return acc;
      }
      case Expr::Kind::Apply:
        break;
    }
    if (e.op == Op::SELECT) {
      const Operand c = lower(e.args[0], point);
      const Operand a = lower(e.args[1], point);
      const Operand b = lower(e.args[2], point);
      return select(c, a, b);
    }
    const Operand a = lower(e.args[0], point);
    const Operand b = e.args.size() > 1 ? lower(e.args[1], point) : Operand{};
    return compute(e.op, a, b);
  }

  // select(c, a, b) = b + flag(c) * (a - b), flag(c) in {0, 1}.
  Operand select(Operand c, Operand a, Operand b) {
    if (c.is_imm()) return c.imm != 0 ? a : b;
    Operand flag = c;
    if (dfg_.nodes[static_cast<std::size_t>(c.node)].op != Op::CMP_LT ||
        dfg_.nodes[static_cast<std::size_t>(c.node)].kind != NodeKind::Compute) {
      flag = compute(Op::OR, compute(Op::CMP_LT, Operand::of_imm(0), c),
                     compute(Op::CMP_LT, c, Operand::of_imm(0)));
    }
    return compute(Op::ADD, b, compute(Op::MUL, flag, compute(Op::SUB, a, b)));
  }

  Dfg take() { return std::move(dfg_); }

 private:
  Operand make_compute(Op op, Operand a, Operand b) {
    if (commutative(op) && key_of(b) < key_of(a)) std::swap(a, b);
    auto key = std::make_tuple(static_cast<int>(op), key_of(a), key_of(b));
    if (auto it = computes_.find(key); it != computes_.end()) return Operand::of_node(it->second);
    DfgNode n;
    n.kind = NodeKind::Compute;
    n.op = op;
    n.operands = {a, b};
    const int id = push(std::move(n));
    computes_.emplace(key, id);
    return Operand::of_node(id);
  }

  int push(DfgNode n) {
    if (dfg_.nodes.size() >= opt_.max_nodes)
      throw InvalidArgument("tile too large: DFG exceeds " + std::to_string(opt_.max_nodes) + " nodes");
    n.id = static_cast<int>(dfg_.nodes.size());
    dfg_.nodes.push_back(std::move(n));
    return dfg_.nodes.back().id;
  }

  const LoopKernel& k_;
  WordArith arith_;
  UnrollOptions opt_;
  Dfg dfg_;
  std::map<std::pair<int, std::vector<std::int64_t>>, int> loads_;
  std::map<std::tuple<int, OperandKey, OperandKey>, int> computes_;
};

struct Contribution {
  std::int64_t arg = 0;
  Operand value;
};

struct Element {
  std::vector<std::int64_t> coords;
  std::vector<Contribution> terms;
};

}  // namespace

Dfg unroll(const LoopKernel& k, const Factor& u, const UnrollOptions& options) {
  if (!is_valid_unroll(k, u)) throw InvalidArgument("invalid unroll factor " + shape_str(u));
  DfgBuilder b(k, options);

  // Expression values per statement and target element, in first-touch order.
  std::vector<std::vector<Element>> elems(k.statements.size());
  std::vector<std::map<std::vector<std::int64_t>, std::size_t>> index(k.statements.size());
  std::vector<std::vector<bool>> inner;
  for (const auto& s : k.statements) inner.push_back(k.inner_vars(s));

  std::vector<std::int64_t> scratch;
  for_each_point(u, [&](const std::vector<std::int64_t>& point) {
    for (std::size_t si = 0; si < k.statements.size(); ++si) {
      const auto& s = k.statements[si];
      bool skip = false;
      for (std::size_t v = 0; v < k.depth(); ++v)
        if (inner[si][v] && point[v] != 0) skip = true;
      if (skip) continue;
      scratch = point;
      Contribution c;
      c.value = b.lower(s.value, scratch);
      if (s.update == Update::ArgMin) c.arg = point[static_cast<std::size_t>(s.arg_var)];
      auto coords = s.target.eval(point);
      auto [it, fresh] = index[si].emplace(coords, elems[si].size());
      if (fresh) elems[si].push_back({std::move(coords), {}});
      elems[si][it->second].terms.push_back(c);
    }
  });

  for (std::size_t si = 0; si < k.statements.size(); ++si) {
    const auto& s = k.statements[si];
    const bool accum = needs_accumulator(k, s, u);
    for (auto& e : elems[si]) {
      Operand result;
      switch (s.update) {
        case Update::Assign:
          result = e.terms.back().value;
          break;
        case Update::Sum:
        case Update::Min: {
          const Op op = s.update == Update::Sum ? Op::ADD : Op::MIN;
          std::size_t first = 0;
          if (accum) {
            result = b.load(s.target.array, e.coords, true);
          } else {
            result = e.terms[0].value;
            first = 1;
          }
          for (std::size_t t = first; t < e.terms.size(); ++t) result = b.compute(op, result, e.terms[t].value);
          break;
        }
        case Update::ArgMin: {
          Operand best = e.terms[0].value;
          Operand idx = Operand::of_imm(e.terms[0].arg);
          for (std::size_t t = 1; t < e.terms.size(); ++t) {
            const Operand v = e.terms[t].value;
            const Operand lt = b.compute(Op::CMP_LT, v, best);
            idx = b.compute(Op::ADD, idx,
                            b.compute(Op::MUL, lt, b.compute(Op::SUB, Operand::of_imm(e.terms[t].arg), idx)));
            if (t + 1 < e.terms.size()) best = b.compute(Op::MIN, v, best);
          }
          result = idx;
          break;
        }
      }
      b.store(s.target.array, e.coords, result);
    }
  }
  Dfg dfg = b.take();
  validate_dfg(dfg);
  return dfg;
}

}  // namespace dough
