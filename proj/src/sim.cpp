#include "dough/sim.hpp"

#include <algorithm>
#include <map>

#include "json.hpp"

namespace dough {

namespace {

std::int64_t linear_of(const LoopKernel& k, int array, const Shape& tile_origin, const std::vector<std::int64_t>& rel) {
  auto coords = k.element_offset(array, tile_origin);
  for (std::size_t i = 0; i < coords.size(); ++i) coords[i] += rel[i];
  return linear_index(k.array(array).extents, coords);
}

int address_of(const std::vector<WordRef>& layout, const WordRef& w) {
  auto it = std::lower_bound(layout.begin(), layout.end(), w);
  return static_cast<int>(it - layout.begin());
}

}  // namespace

AcceleratorImage build_image(const LoopKernel& kernel, const FullConfig& config, const Dfg& dfg,
                             const Schedule& schedule, const DmaModel& dma) {
  if (!is_valid_unroll(kernel, config.u)) throw InvalidArgument("invalid unroll factor " + shape_str(config.u));
  if (!is_valid_group(kernel, config.u, config.g))
    throw InvalidArgument("grouping factor " + shape_str(config.g) + " is not a multiple of u dividing l");
  if (schedule.load_order.size() != dfg.count(NodeKind::Load) || schedule.store_order.size() != dfg.count(NodeKind::Store))
    throw InvalidArgument("schedule does not belong to this DFG");
  validate_dma(dma);

  AcceleratorImage img;
  img.overlay = config.overlay;
  img.program = emit_control_words(schedule, config.overlay);
  img.u = config.u;
  img.g = config.g;
  img.bounds = kernel.bounds;
  img.dma = dma;
  const auto io_g = io_counts(kernel, config.g);
  img.dma_in_words = io_g.in;
  img.dma_out_words = io_g.out;

  const WordArith arith(config.overlay.data_width);
  img.output_identity.assign(kernel.arrays.size(), 0);
  for (const auto& s : kernel.statements)
    img.output_identity[static_cast<std::size_t>(s.target.array)] = update_identity(s.update, arith);

  Shape group_counts, iter_counts;
  for (std::size_t i = 0; i < kernel.depth(); ++i) {
    group_counts.push_back(kernel.bounds[i] / config.g[i]);
    iter_counts.push_back(config.g[i] / config.u[i]);
  }
  img.iterations_per_group = product(iter_counts);

  std::vector<Violation> overflow;
  for_each_point(group_counts, [&](const std::vector<std::int64_t>& gi) {
    GroupPlan plan;
    for (std::size_t i = 0; i < gi.size(); ++i) plan.origin.push_back(gi[i] * config.g[i]);

    std::vector<Shape> tiles;
    for_each_point(iter_counts, [&](const std::vector<std::int64_t>& ti) {
      Shape t = plan.origin;
      for (std::size_t i = 0; i < t.size(); ++i) t[i] += ti[i] * config.u[i];
      tiles.push_back(std::move(t));
    });

    // Per-iteration word references in issue order, then dense sorted layouts.
    std::vector<WordRef> loads, stores;
    std::vector<bool> from_obuf;
    for (const auto& t : tiles) {
      for (int id : img.program.load_nodes) {
        const auto& n = dfg.nodes.at(static_cast<std::size_t>(id));
        loads.emplace_back(n.array, linear_of(kernel, n.array, t, n.coords));
        from_obuf.push_back(n.accumulator);
      }
      for (int id : img.program.store_nodes) {
        const auto& n = dfg.nodes.at(static_cast<std::size_t>(id));
        stores.emplace_back(n.array, linear_of(kernel, n.array, t, n.coords));
      }
    }
    for (std::size_t i = 0; i < loads.size(); ++i) (from_obuf[i] ? plan.obuf : plan.ibuf).push_back(loads[i]);
    plan.obuf.insert(plan.obuf.end(), stores.begin(), stores.end());
    for (auto* layout : {&plan.ibuf, &plan.obuf}) {
      std::sort(layout->begin(), layout->end());
      layout->erase(std::unique(layout->begin(), layout->end()), layout->end());
    }
    for (std::size_t i = 0; i < loads.size(); ++i)
      plan.in_addr.push_back(address_of(from_obuf[i] ? plan.obuf : plan.ibuf, loads[i]));
    for (const auto& w : stores) plan.out_addr.push_back(address_of(plan.obuf, w));

    const auto check = [&](const char* name, Words value, Words bound) {
      if (value > bound && std::none_of(overflow.begin(), overflow.end(),
                                        [&](const Violation& v) { return v.constraint == name; }))
        overflow.push_back({name, value, bound});
    };
    check("in_buffer", static_cast<Words>(plan.ibuf.size()), config.overlay.ibuf_depth);
    check("out_buffer", static_cast<Words>(plan.obuf.size()), config.overlay.obuf_depth);
    check("in_addr", static_cast<Words>(plan.in_addr.size()), config.overlay.in_addr_depth);
    check("out_addr", static_cast<Words>(plan.out_addr.size()), config.overlay.out_addr_depth);
    img.groups.push_back(std::move(plan));
  });
  if (!overflow.empty()) throw InfeasibleError("accelerator image overflows its buffers", overflow);
  return img;
}

namespace {

struct PeState {
  std::vector<std::int64_t> dm;
  std::vector<std::int64_t> written;  // iteration stamp of the last write; -1 for constants
  std::int64_t reg = 0;
  bool reg_valid = false;
};

class Machine {
 public:
  Machine(const AcceleratorImage& img, const SimOptions& opt)
      : img_(img), opt_(opt), prog_(img.program), arith_(img.overlay.data_width), pes_(prog_.programs.size()) {
    for (auto& pe : pes_) {
      pe.dm.assign(static_cast<std::size_t>(img.overlay.dm_depth), 0);
      pe.written.assign(static_cast<std::size_t>(img.overlay.dm_depth), -2);
    }
    for (const auto& c : prog_.constants) {
      auto& pe = pes_.at(static_cast<std::size_t>(c.pe));
      pe.dm.at(static_cast<std::size_t>(c.addr)) = arith_.wrap(c.value);
      pe.written.at(static_cast<std::size_t>(c.addr)) = -1;
    }
  }

  void run_group(std::size_t gi, std::vector<std::int64_t>& ibuf, std::vector<std::int64_t>& obuf, SimStats& stats) {
    const auto& plan = img_.groups[gi];
    std::size_t in_ptr = 0, out_ptr = 0;
    std::vector<std::int64_t> next_reg(pes_.size());
    std::vector<char> next_valid(pes_.size());
    struct Write {
      std::size_t pe;
      int addr;
      std::int64_t value;
    };
    std::vector<Write> writes;

    for (std::int64_t it = 0; it < img_.iterations_per_group; ++it) {
      ++stamp_;
      for (auto& pe : pes_) pe.reg_valid = false;
      for (Cycles t = 0; t < prog_.length; ++t) {
        int ibuf_reads = 0, obuf_writes = 0;
        writes.clear();
        for (std::size_t p = 0; p < pes_.size(); ++p) {
          const ControlWord& w = prog_.programs[p][static_cast<std::size_t>(t)];
          next_valid[p] = 0;
          if (w.op == Op::NOP) continue;
          std::int64_t in[2] = {0, 0};
          const int arity = op_arity(w.op);
          for (int s = 0; s < arity; ++s) {
            const Source& src = w.src[static_cast<std::size_t>(s)];
            switch (src.kind) {
              case SrcKind::None:
                break;
              case SrcKind::DM: {
                const auto a = static_cast<std::size_t>(src.addr);
                if (a >= pes_[p].dm.size()) fault(gi, it, t, p, "DM read beyond D0");
                const auto stamp = pes_[p].written[a];
                if (opt_.strict && stamp != -1 && stamp != stamp_) fault(gi, it, t, p, "read of uninitialised DM[" + std::to_string(a) + "]");
                in[s] = (stamp == -1 || stamp == stamp_) ? pes_[p].dm[a] : 0;
                break;
              }
              case SrcKind::IBuf: {
                if (p != static_cast<std::size_t>(kPortPe)) fault(gi, it, t, p, "IBUF read off the port PE");
                ++ibuf_reads;
                if (in_ptr >= plan.in_addr.size()) fault(gi, it, t, p, "input address stream exhausted");
                const auto a = static_cast<std::size_t>(plan.in_addr[in_ptr++]);
                const auto& buf = w.load_from_obuf ? obuf : ibuf;
                if (a >= buf.size()) fault(gi, it, t, p, "buffer address out of range");
                in[s] = buf[a];
                break;
              }
              default: {
                const auto q = static_cast<std::size_t>(neighbor_pe(static_cast<int>(p), src.kind, prog_.rows, prog_.cols));
                if (opt_.strict && !pes_[q].reg_valid) fault(gi, it, t, p, "neighbour register holds no value");
                in[s] = pes_[q].reg_valid ? pes_[q].reg : 0;
                break;
              }
            }
          }
          const std::int64_t result = arith_.apply(w.op, in[0], in[1]);
          next_reg[p] = result;
          next_valid[p] = 1;
          if (w.dm_write >= 0) {
            if (static_cast<std::size_t>(w.dm_write) >= pes_[p].dm.size()) fault(gi, it, t, p, "DM write beyond D0");
            writes.push_back({p, w.dm_write, result});
          }
          int obuf_addr = -1;
          if (w.obuf_store) {
            if (p != static_cast<std::size_t>(kPortPe)) fault(gi, it, t, p, "OBUF store off the port PE");
            ++obuf_writes;
            if (out_ptr >= plan.out_addr.size()) fault(gi, it, t, p, "output address stream exhausted");
            obuf_addr = plan.out_addr[out_ptr++];
            obuf.at(static_cast<std::size_t>(obuf_addr)) = result;
          }
          if (opt_.trace) trace(gi, it, t, p, w, in, arity, result, obuf_addr);
        }
        if (ibuf_reads > 1) fault(gi, it, t, 0, "two IBUF reads in one cycle");
        if (obuf_writes > 1) fault(gi, it, t, 0, "two OBUF writes in one cycle");
        stats.ibuf_reads += ibuf_reads;
        stats.obuf_writes += obuf_writes;
        for (const auto& wr : writes) {
          auto& pe = pes_[wr.pe];
          if (pe.written[static_cast<std::size_t>(wr.addr)] == -1) fault(gi, it, t, wr.pe, "write over a constant slot");
          pe.dm[static_cast<std::size_t>(wr.addr)] = wr.value;
          pe.written[static_cast<std::size_t>(wr.addr)] = stamp_;
        }
        for (std::size_t p = 0; p < pes_.size(); ++p) {
          pes_[p].reg = next_reg[p];
          pes_[p].reg_valid = next_valid[p] != 0;
        }
      }
    }
    if (in_ptr != plan.in_addr.size()) fault(gi, 0, 0, 0, "input address stream not fully consumed");
    if (out_ptr != plan.out_addr.size()) fault(gi, 0, 0, 0, "output address stream not fully consumed");
  }

 private:
  [[noreturn]] void fault(std::size_t group, std::int64_t iter, Cycles t, std::size_t pe, const std::string& what) const {
    throw SimulationError("group " + std::to_string(group) + " iteration " + std::to_string(iter) + " cycle " +
                          std::to_string(t) + " PE " + std::to_string(pe) + ": " + what);
  }

  void trace(std::size_t group, std::int64_t iter, Cycles t, std::size_t pe, const ControlWord& w,
             const std::int64_t* in, int arity, std::int64_t result, int obuf_addr) const {
    nlohmann::json line;
    line["group"] = group;
    line["iter"] = iter;
    line["cycle"] = t;
    line["pe"] = pe;
    line["op"] = std::string(op_name(w.op));
    auto srcs = nlohmann::json::array();
    for (int s = 0; s < arity; ++s) {
      const auto& src = w.src[static_cast<std::size_t>(s)];
      nlohmann::json j;
      j["sel"] = src_kind_name(src.kind);
      if (src.kind == SrcKind::DM) j["addr"] = src.addr;
      if (src.kind == SrcKind::IBuf && w.load_from_obuf) j["buffer"] = "OBUF";
      j["value"] = in[s];
      srcs.push_back(j);
    }
    line["srcs"] = srcs;
    line["result"] = result;
    auto writes = nlohmann::json::object();
    if (w.dm_write >= 0) writes["dm"] = w.dm_write;
    if (obuf_addr >= 0) writes["obuf"] = obuf_addr;
    line["writes"] = writes;
    *opt_.trace << line.dump() << '\n';
  }

  const AcceleratorImage& img_;
  const SimOptions& opt_;
  const ProgramImage& prog_;
  WordArith arith_;
  std::vector<PeState> pes_;
  std::int64_t stamp_ = 0;
};

}  // namespace

SimResult simulate(const LoopKernel& kernel, const AcceleratorImage& image, const ArraySet& inputs,
                   const SimOptions& options) {
  if (image.bounds != kernel.bounds) throw InvalidArgument("image was built for different loop bounds");
  const WordArith arith(image.overlay.data_width);
  std::vector<std::vector<std::int64_t>> host(kernel.arrays.size());
  for (std::size_t a = 0; a < kernel.arrays.size(); ++a) {
    const auto& decl = kernel.arrays[a];
    if (decl.role == ArrayRole::Output) {
      host[a].assign(static_cast<std::size_t>(decl.size()), image.output_identity.at(a));
      continue;
    }
    auto it = inputs.find(decl.name);
    if (it == inputs.end()) throw InvalidArgument("missing input array '" + decl.name + "'");
    if (it->second.extents != decl.extents) throw InvalidArgument("input array '" + decl.name + "' has the wrong shape");
    host[a] = it->second.data;
    for (auto& v : host[a]) v = arith.wrap(v);
  }

  SimResult res;
  auto& st = res.stats;
  st.groups = static_cast<std::int64_t>(image.groups.size());
  st.iterations_per_group = image.iterations_per_group;
  Machine m(image, options);
  const Cycles dma_in = dma_latency(image.dma, image.dma_in_words);
  const Cycles dma_out = dma_latency(image.dma, image.dma_out_words);
  const Cycles per_group = checked_mul(image.iterations_per_group, image.program.length);
  for (std::size_t gi = 0; gi < image.groups.size(); ++gi) {
    const auto& plan = image.groups[gi];
    std::vector<std::int64_t> ibuf, obuf;
    for (const auto& [a, i] : plan.ibuf) ibuf.push_back(host[static_cast<std::size_t>(a)][static_cast<std::size_t>(i)]);
    for (const auto& [a, i] : plan.obuf) obuf.push_back(host[static_cast<std::size_t>(a)][static_cast<std::size_t>(i)]);
    m.run_group(gi, ibuf, obuf, st);
    for (std::size_t k = 0; k < plan.obuf.size(); ++k)
      host[static_cast<std::size_t>(plan.obuf[k].first)][static_cast<std::size_t>(plan.obuf[k].second)] = obuf[k];
    st.per_group.push_back({per_group, dma_in, dma_out});
    st.compute_cycles = checked_add(st.compute_cycles, per_group);
    st.dma_cycles = checked_add(st.dma_cycles, checked_add(dma_in, dma_out));
  }
  for (std::size_t a = 0; a < kernel.arrays.size(); ++a) {
    const auto& decl = kernel.arrays[a];
    if (decl.role == ArrayRole::Output) res.outputs[decl.name] = ArrayImage{decl.extents, std::move(host[a])};
  }
  return res;
}

std::size_t VerifyReport::passed() const {
  return static_cast<std::size_t>(std::count_if(entries.begin(), entries.end(), [](const VerifyEntry& e) { return e.pass(); }));
}

VerifyReport verify(const LoopKernel& kernel, const AcceleratorImage& image, const std::vector<std::uint64_t>& seeds,
                    const SimOptions& options) {
  VerifyReport report;
  const int width = image.overlay.data_width;
  for (auto seed : seeds) {
    VerifyEntry e;
    e.seed = seed;
    e.expected_cycles = compu_time(kernel.bounds, image.u, image.program.length);
    try {
      const auto inputs = random_inputs(kernel, seed, -1000, 1000, width);
      const auto got = simulate(kernel, image, inputs, options);
      const auto want = reference_execute(kernel, inputs, width);
      e.compute_cycles = got.stats.compute_cycles;
      e.cycles_match = e.compute_cycles == e.expected_cycles;
      e.outputs_match = true;
      for (const auto& [name, img] : want) {
        const auto& out = got.outputs.at(name);
        for (std::size_t i = 0; i < img.data.size(); ++i) {
          if (out.data[i] != img.data[i]) {
            e.outputs_match = false;
            e.detail = name + "[" + std::to_string(i) + "] = " + std::to_string(out.data[i]) + ", expected " +
                       std::to_string(img.data[i]);
            break;
          }
        }
        if (!e.outputs_match) break;
      }
      if (e.outputs_match && !e.cycles_match)
        e.detail = "compute cycles " + std::to_string(e.compute_cycles) + ", expected " + std::to_string(e.expected_cycles);
    } catch (const SimulationError& err) {
      e.detail = err.what();
    }
    report.entries.push_back(std::move(e));
  }
  return report;
}

}  // namespace dough
