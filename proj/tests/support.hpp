#pragma once

#include <random>

#include "dough/kernel.hpp"

namespace dough::testing {

// Random well-formed DFG: loads first, then compute nodes drawing operands
// from earlier values (or small immediates), then stores of every sink.
inline Dfg random_dfg(std::mt19937_64& rng, int max_nodes) {
  std::uniform_int_distribution<int> loads_d(1, std::max(1, max_nodes / 4));
  const int loads = loads_d(rng);
  const int budget = std::max(loads + 2, max_nodes);
  std::uniform_int_distribution<int> comp_d(1, std::max(1, (budget - loads) / 2));
  const int computes = comp_d(rng);
  static const Op ops[] = {Op::ADD, Op::SUB, Op::MUL, Op::AND, Op::OR, Op::XOR, Op::MIN, Op::MAX,
                           Op::CMP_LT, Op::ABS, Op::PASS, Op::SHL, Op::SHR};
  Dfg d;
  for (int i = 0; i < loads; ++i) {
    DfgNode n;
    n.id = i;
    n.kind = NodeKind::Load;
    n.array = 0;
    n.coords = {i};
    d.nodes.push_back(n);
  }
  for (int i = 0; i < computes; ++i) {
    DfgNode n;
    n.id = static_cast<int>(d.nodes.size());
    n.kind = NodeKind::Compute;
    n.op = ops[std::uniform_int_distribution<std::size_t>(0, std::size(ops) - 1)(rng)];
    std::uniform_int_distribution<int> pick(0, n.id - 1);
    for (int s = 0; s < op_arity(n.op); ++s) {
      if (s == 1 && std::uniform_int_distribution<int>(0, 5)(rng) == 0)
        n.operands[1] = Operand::of_imm(std::uniform_int_distribution<int>(-3, 7)(rng));
      else
        n.operands[static_cast<std::size_t>(s)] = Operand::of_node(pick(rng));
    }
    d.nodes.push_back(n);
  }
  const auto cons = d.consumers();
  const int before = static_cast<int>(d.nodes.size());
  int out = 0;
  for (int i = loads; i < before && static_cast<int>(d.nodes.size()) < budget; ++i) {
    if (!cons[static_cast<std::size_t>(i)].empty()) continue;
    DfgNode n;
    n.id = static_cast<int>(d.nodes.size());
    n.kind = NodeKind::Store;
    n.array = 1;
    n.coords = {out++};
    n.operands[0] = Operand::of_node(i);
    d.nodes.push_back(n);
  }
  return d;
}

}  // namespace dough::testing
