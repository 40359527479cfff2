#include "dough/scheduler.hpp"

#include <algorithm>
#include <limits>
#include <cstdlib>
#include <exception>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <sstream>

namespace dough {

const char* src_kind_name(SrcKind kind) {
  switch (kind) {
    case SrcKind::None: return "-";
    case SrcKind::DM: return "DM";
    case SrcKind::North: return "N";
    case SrcKind::South: return "S";
    case SrcKind::East: return "E";
    case SrcKind::West: return "W";
    case SrcKind::IBuf: return "IBUF";
  }
  return "?";
}

int neighbor_pe(int pe, SrcKind d, int rows, int cols) {
  int r = pe / cols;
  int c = pe % cols;
  switch (d) {
    case SrcKind::North: r = (r + rows - 1) % rows; break;
    case SrcKind::South: r = (r + 1) % rows; break;
    case SrcKind::West: c = (c + cols - 1) % cols; break;
    case SrcKind::East: c = (c + 1) % cols; break;
    default: throw InvalidArgument("not a direction selector");
  }
  return r * cols + c;
}

Cycles schedule_length(const Schedule& s) {
  Cycles len = 0;
  for (const auto& p : s.placements) len = std::max(len, p.cycle + 1);
  return len;
}

namespace {

constexpr Cycles kInf = std::numeric_limits<Cycles>::max() / 4;
constexpr SrcKind kDirs[4] = {SrcKind::North, SrcKind::South, SrcKind::East, SrcKind::West};

// True when p and q are adjacent without crossing the array boundary. A ring
// of two PEs has no real wrap link, so both of its links count.
bool mesh_link(int p, int q, int cols) {
  const int dr = std::abs(p / cols - q / cols);
  const int dc = std::abs(p % cols - q % cols);
  return dr + dc == 1;
}

class Occupancy {
 public:
  explicit Occupancy(int pes) : busy_(static_cast<std::size_t>(pes)) {}

  bool busy(int pe, Cycles t) const {
    const auto& b = busy_[static_cast<std::size_t>(pe)];
    return t < static_cast<Cycles>(b.size()) && b[static_cast<std::size_t>(t)];
  }
  void mark(int pe, Cycles t) {
    auto& b = busy_[static_cast<std::size_t>(pe)];
    if (t >= static_cast<Cycles>(b.size())) b.resize(static_cast<std::size_t>(t + 1) * 2, 0);
    b[static_cast<std::size_t>(t)] = 1;
    horizon_ = std::max(horizon_, t + 1);
  }
  Cycles horizon() const { return horizon_; }

 private:
  std::vector<std::vector<std::uint8_t>> busy_;
  Cycles horizon_ = 0;
};

struct Hop {
  int pe;
  Cycles cycle;
  Source src;  // direction of the upstream neighbour, or DM for a re-emit
};

struct Route {
  Cycles ready = kInf;  // first cycle the value is readable from the target's DM
  std::vector<Hop> hops;
  Source store_src;     // store mode: selector the store reads
};

using Reservations = std::vector<std::pair<int, Cycles>>;

class ListScheduler {
 public:
  ListScheduler(const Dfg& dfg, int rows, int cols, const SchedulerOptions& opt, bool mesh_only,
                std::vector<int> pin = {}, bool pin_strict = true)
      : dfg_(dfg), rows_(rows), cols_(cols), pes_(rows * cols), opt_(opt), pin_(std::move(pin)), pin_strict_(pin_strict), occ_(pes_) {
    const std::size_t n = dfg.size();
    copies_.resize(n);
    in_dm_.assign(n, std::vector<Cycles>(static_cast<std::size_t>(pes_), kInf));
    first_emit_.assign(n, kInf);
    nbr_.resize(static_cast<std::size_t>(pes_) * 4);
    for (int p = 0; p < pes_; ++p)
      for (int d = 0; d < 4; ++d) {
        const int q = neighbor_pe(p, kDirs[d], rows, cols);
        nbr_[static_cast<std::size_t>(p * 4 + d)] = mesh_only && !mesh_link(p, q, cols) ? -1 : q;
      }
    window_ = 2 * (rows + cols) + 4;
  }

  Schedule run() {
    const auto height = dfg_.height();
    std::vector<int> pending(dfg_.size(), 0);
    const auto consumers = dfg_.consumers();
    for (const auto& n : dfg_.nodes) {
      std::set<int> preds;
      for (const auto& o : n.operands)
        if (o.is_node()) preds.insert(o.node);
      pending[static_cast<std::size_t>(n.id)] = static_cast<int>(preds.size());
    }
    auto cmp = [&](int a, int b) {
      const int ha = height[static_cast<std::size_t>(a)];
      const int hb = height[static_cast<std::size_t>(b)];
      if (ha != hb) return ha < hb;
      return a > b;
    };
    std::priority_queue<int, std::vector<int>, decltype(cmp)> ready(cmp);
    for (const auto& n : dfg_.nodes)
      if (pending[static_cast<std::size_t>(n.id)] == 0) ready.push(n.id);
    while (!ready.empty()) {
      const int id = ready.top();
      ready.pop();
      place(dfg_.nodes[static_cast<std::size_t>(id)]);
      for (int c : consumers[static_cast<std::size_t>(id)])
        if (--pending[static_cast<std::size_t>(c)] == 0) ready.push(c);
    }
    return finish();
  }

 private:
  bool free_at(int pe, Cycles t, const Reservations& res) const {
    if (occ_.busy(pe, t)) return false;
    for (const auto& [p, c] : res)
      if (p == pe && c == t) return false;
    return true;
  }

  Cycles first_free(int pe, Cycles from, const Reservations& res) const {
    Cycles t = from;
    while (!free_at(pe, t, res)) ++t;
    return t;
  }

  bool emits_at(int v, int pe, Cycles t) const {
    for (const auto& [p, c] : copies_[static_cast<std::size_t>(v)])
      if (p == pe && c == t) return true;
    return false;
  }

  struct Entry {
    std::uint8_t reason = 0;  // 0 none, 1 existing op, 2 re-emit from DM, 3 hop
    std::int8_t dir = -1;     // hop: index into kDirs of the upstream neighbour
    int cost = 0;             // PE slots spent on the chain so far
  };

  // Time-layered search over emissions of value v. With target >= 0 it stops at
  // the first hop landing on the target and returns the path; with target < 0
  // it fills `ready_all` with the earliest readiness on every PE. With
  // target == kStoreTarget it finds the earliest store on the port PE, which
  // reads either its own DM or a neighbour's register.
  static constexpr int kStoreTarget = -2;

  Route search(int v, int target, Cycles floor, const Reservations& res, std::vector<Cycles>* ready_all) const {
    const auto& dmv = in_dm_[static_cast<std::size_t>(v)];
    Route out;
    if (target >= 0 && dmv[static_cast<std::size_t>(target)] < kInf) {
      out.ready = dmv[static_cast<std::size_t>(target)];
      return out;
    }
    const bool store = target == kStoreTarget;
    if (store && dmv[kPortPe] < kInf) {
      out.ready = first_free(kPortPe, std::max(floor, dmv[kPortPe]), res);
      out.store_src = Source::dm(0);
    }
    int unresolved = 0;
    if (ready_all) {
      ready_all->assign(static_cast<std::size_t>(pes_), kInf);
      for (int p = 0; p < pes_; ++p) {
        (*ready_all)[static_cast<std::size_t>(p)] = dmv[static_cast<std::size_t>(p)];
        if (dmv[static_cast<std::size_t>(p)] >= kInf) ++unresolved;
      }
      if (unresolved == 0) return out;
    }
    const Cycles t_begin = std::max(first_emit_[static_cast<std::size_t>(v)], floor - window_);
    Cycles res_max = 0;
    for (const auto& r : res) res_max = std::max(res_max, r.second + 1);
    const Cycles t_limit = std::max({occ_.horizon(), res_max, t_begin}) + rows_ + cols_ + 4;

    std::vector<std::vector<Entry>> layers;
    layers.reserve(static_cast<std::size_t>(window_ + 8));
    for (Cycles t = t_begin; t <= t_limit; ++t) {
      std::vector<Entry> cur(static_cast<std::size_t>(pes_));
      const std::vector<Entry>* prev = layers.empty() ? nullptr : &layers.back();
      for (int p = 0; p < pes_; ++p) {
        Entry e;
        if (emits_at(v, p, t)) {
          e.reason = 1;
        } else if (free_at(p, t, res)) {
          if (dmv[static_cast<std::size_t>(p)] <= t) {
            e.reason = 2;
            e.cost = 1;
          } else if (prev) {
            for (int d = 0; d < 4; ++d) {
              const int q = nbr_[static_cast<std::size_t>(p * 4 + d)];
              if (q < 0) continue;
              const auto& up = (*prev)[static_cast<std::size_t>(q)];
              if (up.reason && (e.reason == 0 || up.cost + 1 < e.cost)) {
                e.reason = 3;
                e.dir = static_cast<std::int8_t>(d);
                e.cost = up.cost + 1;
              }
            }
          }
        }
        cur[static_cast<std::size_t>(p)] = e;
      }
      layers.push_back(std::move(cur));
      const auto& layer = layers.back();
      if (store) {
        if (t + 1 >= out.ready) return out;
        if (t + 1 >= floor && free_at(kPortPe, t + 1, res)) {
          for (int d = 0; d < 4; ++d) {
            const int q = nbr_[static_cast<std::size_t>(kPortPe * 4 + d)];
            if (q < 0 || q == kPortPe || !layer[static_cast<std::size_t>(q)].reason) continue;
            out.ready = t + 1;
            out.store_src = Source::dir(kDirs[d]);
            out.hops.clear();
            backtrack(layers, t_begin, q, out.hops);
            return out;
          }
        }
      } else if (target >= 0) {
        if (layer[static_cast<std::size_t>(target)].reason == 3) {
          out.ready = t + 1;
          backtrack(layers, t_begin, target, out.hops);
          return out;
        }
      } else {
        for (int p = 0; p < pes_; ++p) {
          auto& r = (*ready_all)[static_cast<std::size_t>(p)];
          if (r >= kInf && layer[static_cast<std::size_t>(p)].reason == 3) {
            r = t + 1;
            --unresolved;
          }
        }
        if (unresolved == 0) return out;
      }
    }
    throw Error("internal scheduler error: routing search did not terminate");
  }

  void backtrack(const std::vector<std::vector<Entry>>& layers, Cycles t_begin, int pe,
                 std::vector<Hop>& hops) const {
    Cycles t = t_begin + static_cast<Cycles>(layers.size()) - 1;
    int p = pe;
    while (true) {
      const Entry& e = layers[static_cast<std::size_t>(t - t_begin)][static_cast<std::size_t>(p)];
      if (e.reason == 1) break;
      if (e.reason == 2) {
        hops.push_back({p, t, Source::dm(0)});
        break;
      }
      hops.push_back({p, t, Source::dir(kDirs[e.dir])});
      p = nbr_[static_cast<std::size_t>(p * 4 + e.dir)];
      --t;
    }
    std::reverse(hops.begin(), hops.end());
  }

  static void reserve(Reservations& res, const std::vector<Hop>& hops) {
    for (const auto& h : hops) res.emplace_back(h.pe, h.cycle);
  }

  struct Plan {
    Cycles time = kInf;
    int pe = -1;
    std::vector<std::pair<int, Route>> routes;  // per distinct operand value
  };

  // Exact cost of running the op on `pe`: route every operand there, then find a free slot.
  Plan evaluate(const std::vector<int>& values, int pe, Cycles floor) const {
    Plan plan;
    plan.pe = pe;
    Reservations res;
    Cycles t = floor;
    for (int v : values) {
      Route r = search(v, pe, floor, res, nullptr);
      reserve(res, r.hops);
      t = std::max(t, r.ready);
      plan.routes.emplace_back(v, std::move(r));
    }
    plan.time = first_free(pe, t, res);
    return plan;
  }

  // Equal finish times go to the lower PE index (row, then column). A
  // non-zero tie seed replaces that order with a fixed pseudo-random one.
  bool better(const Plan& a, const Plan& b) const {
    if (a.time != b.time) return a.time < b.time;
    if (opt_.tie_seed != 0) return tie_rank(a.pe) < tie_rank(b.pe);
    return a.pe < b.pe;
  }

  std::uint64_t tie_rank(int pe) const {
    std::uint64_t x = static_cast<std::uint64_t>(pe) * 0x9E3779B97F4A7C15ull ^
                      static_cast<std::uint64_t>(opt_.tie_seed) * 0xC2B2AE3D27D4EB4Full;
    x ^= x >> 33;
    x *= 0xff51afd7ed558ccdull;
    x ^= x >> 33;
    return x;
  }

  void add_copy(int v, int pe, Cycles t) {
    copies_[static_cast<std::size_t>(v)].emplace_back(pe, t);
    auto& d = in_dm_[static_cast<std::size_t>(v)][static_cast<std::size_t>(pe)];
    d = std::min(d, t + 1);
    auto& f = first_emit_[static_cast<std::size_t>(v)];
    f = std::min(f, t);
    occ_.mark(pe, t);
  }

  std::size_t add_placement(Placement p) {
    add_copy(p.value, p.pe, p.cycle);
    placements_.push_back(std::move(p));
    return placements_.size() - 1;
  }

  void add_dm_read(std::size_t placement, int slot, int pe, Cycles cycle, int value) {
    reads_.push_back({placement, slot, pe, cycle, false, value, 0});
  }

  void commit_routes(const Plan& plan) {
    for (const auto& [v, route] : plan.routes) {
      for (const auto& h : route.hops) {
        Placement p;
        p.pe = h.pe;
        p.cycle = h.cycle;
        p.op = Op::PASS;
        p.src[0] = h.src;
        p.value = v;
        const auto idx = add_placement(p);
        if (h.src.kind == SrcKind::DM) add_dm_read(idx, 0, h.pe, h.cycle, v);
        ++hops_;
      }
    }
  }

  std::vector<int> operand_values(const DfgNode& n) const {
    std::vector<int> vals;
    for (const auto& o : n.operands)
      if (o.is_node() && std::find(vals.begin(), vals.end(), o.node) == vals.end()) vals.push_back(o.node);
    return vals;
  }

  Cycles floor_of(const std::vector<int>& values) const {
    Cycles f = 0;
    for (int v : values) f = std::max(f, first_emit_[static_cast<std::size_t>(v)] + 1);
    return f;
  }

  void place(const DfgNode& n) {
    if (n.kind == NodeKind::Load) {
      Placement p;
      p.pe = kPortPe;
      p.cycle = first_free(kPortPe, 0, {});
      p.op = Op::PASS;
      p.src[0] = Source::dir(SrcKind::IBuf);
      p.load_from_obuf = n.accumulator;
      p.node = n.id;
      p.value = n.id;
      add_placement(p);
      return;
    }
    const auto values = operand_values(n);
    const Cycles floor = floor_of(values);
    Plan best;
    Source store_src = Source::dm(0);
    if (n.kind == NodeKind::Store) {
      Route r = search(values.at(0), kStoreTarget, floor, {}, nullptr);
      best.pe = kPortPe;
      best.time = r.ready;
      store_src = r.store_src;
      best.routes.emplace_back(values[0], std::move(r));
    } else if (!pin_.empty() && pin_strict_) {
      best = evaluate(values, pin_[static_cast<std::size_t>(n.id)], floor);
    } else {
      if (!pin_.empty()) best = evaluate(values, pin_[static_cast<std::size_t>(n.id)], floor);
      const Plan pinned = best;
      // Lower bound per PE from unconstrained routing, then exact checks in bound order.
      std::vector<Cycles> lb(static_cast<std::size_t>(pes_), floor);
      std::vector<Cycles> ready;
      for (int v : values) {
        search(v, -1, floor, {}, &ready);
        for (int p = 0; p < pes_; ++p)
          lb[static_cast<std::size_t>(p)] = std::max(lb[static_cast<std::size_t>(p)], ready[static_cast<std::size_t>(p)]);
      }
      std::vector<std::pair<Cycles, int>> order;
      for (int p = 0; p < pes_; ++p) order.emplace_back(first_free(p, lb[static_cast<std::size_t>(p)], {}), p);
      std::sort(order.begin(), order.end());
      int checked = 0;
      for (const auto& [bound, p] : order) {
        if (bound > best.time || (bound == best.time && p > best.pe && opt_.tie_seed == 0)) break;
        if (opt_.exact_candidates > 0 && checked >= opt_.exact_candidates) break;
        ++checked;
        Plan cand = evaluate(values, p, floor);
        if (better(cand, best)) best = std::move(cand);
      }
      if (!pin_.empty() && pinned.time <= best.time) best = pinned;
    }
    commit_routes(best);

    Placement p;
    p.pe = best.pe;
    p.cycle = best.time;
    p.op = n.kind == NodeKind::Store ? Op::PASS : n.op;
    p.obuf_store = n.kind == NodeKind::Store;
    p.node = n.id;
    p.value = n.id;
    const int arity = n.kind == NodeKind::Store ? 1 : op_arity(n.op);
    for (int s = 0; s < arity; ++s) p.src[static_cast<std::size_t>(s)] = Source::dm(0);
    if (p.obuf_store) p.src[0] = store_src;
    const auto idx = add_placement(p);
    for (int s = 0; s < arity; ++s) {
      const auto& o = n.operands[static_cast<std::size_t>(s)];
      if (p.src[static_cast<std::size_t>(s)].kind != SrcKind::DM) continue;
      if (o.is_node()) {
        add_dm_read(idx, s, best.pe, best.time, o.node);
      } else {
        reads_.push_back({idx, s, best.pe, best.time, true, -1, o.imm});
      }
    }
  }

  Schedule finish() {
    Schedule s;
    s.rows = rows_;
    s.cols = cols_;
    s.hops = hops_;
    s.dm_used.assign(static_cast<std::size_t>(pes_), 0);

    // Constants: one slot per distinct (pe, value), live for the whole run.
    std::map<std::pair<int, std::int64_t>, int> const_addr;
    std::vector<int> next_addr(static_cast<std::size_t>(pes_), 0);
    for (const auto& r : reads_) {
      if (!r.is_const) continue;
      auto key = std::make_pair(r.pe, r.imm);
      if (const_addr.count(key)) continue;
      const int a = next_addr[static_cast<std::size_t>(r.pe)]++;
      const_addr.emplace(key, a);
      s.constants.push_back({r.pe, a, r.imm});
    }

    // Value copies: written by the first op carrying the value on that PE,
    // live until the last read. Interval colouring per PE.
    struct Interval {
      Cycles write;
      Cycles last_read;
      int pe;
      int value;
      std::size_t writer;
      int addr = -1;
    };
    std::map<std::pair<int, int>, std::size_t> interval_of;  // (pe, value) -> interval index
    std::vector<Interval> intervals;
    std::map<std::pair<int, int>, std::size_t> writer_of;
    for (std::size_t i = 0; i < placements_.size(); ++i) {
      const auto& p = placements_[i];
      auto key = std::make_pair(p.pe, p.value);
      auto it = writer_of.find(key);
      if (it == writer_of.end() || placements_[it->second].cycle > p.cycle) writer_of[key] = i;
    }
    for (const auto& r : reads_) {
      if (r.is_const) continue;
      auto key = std::make_pair(r.pe, r.value);
      auto it = interval_of.find(key);
      if (it == interval_of.end()) {
        const auto w = writer_of.at(key);
        intervals.push_back({placements_[w].cycle, r.cycle, r.pe, r.value, w});
        interval_of.emplace(key, intervals.size() - 1);
      } else {
        auto& iv = intervals[it->second];
        iv.last_read = std::max(iv.last_read, r.cycle);
      }
    }
    std::vector<std::size_t> order(intervals.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const auto& x = intervals[a];
      const auto& y = intervals[b];
      return std::tie(x.pe, x.write, x.value) < std::tie(y.pe, y.write, y.value);
    });
    std::vector<std::vector<Cycles>> busy_until(static_cast<std::size_t>(pes_));
    for (auto i : order) {
      auto& iv = intervals[i];
      auto& slots = busy_until[static_cast<std::size_t>(iv.pe)];
      const int base = next_addr[static_cast<std::size_t>(iv.pe)];
      int chosen = -1;
      for (std::size_t a = 0; a < slots.size(); ++a)
        if (slots[a] <= iv.write) {
          chosen = static_cast<int>(a);
          break;
        }
      if (chosen < 0) {
        slots.push_back(0);
        chosen = static_cast<int>(slots.size() - 1);
      }
      slots[static_cast<std::size_t>(chosen)] = iv.last_read;
      iv.addr = base + chosen;
      if (iv.addr >= opt_.dm_depth)
        throw UnschedulableError("data memory of PE " + std::to_string(iv.pe) + " needs more than " +
                                 std::to_string(opt_.dm_depth) + " words");
      placements_[iv.writer].dm_write = iv.addr;
    }
    for (int p = 0; p < pes_; ++p) {
      s.dm_used[static_cast<std::size_t>(p)] =
          next_addr[static_cast<std::size_t>(p)] + static_cast<int>(busy_until[static_cast<std::size_t>(p)].size());
      if (s.dm_used[static_cast<std::size_t>(p)] > opt_.dm_depth)
        throw UnschedulableError("data memory of PE " + std::to_string(p) + " needs more than " +
                                 std::to_string(opt_.dm_depth) + " words");
    }
    for (const auto& r : reads_) {
      auto& src = placements_[r.placement].src[static_cast<std::size_t>(r.slot)];
      src.addr = r.is_const ? const_addr.at({r.pe, r.imm}) : intervals[interval_of.at({r.pe, r.value})].addr;
    }

    std::sort(placements_.begin(), placements_.end(),
              [](const Placement& a, const Placement& b) { return std::tie(a.cycle, a.pe) < std::tie(b.cycle, b.pe); });
    for (const auto& p : placements_) {
      if (p.node < 0) continue;
      const auto kind = dfg_.nodes[static_cast<std::size_t>(p.node)].kind;
      if (kind == NodeKind::Load) s.load_order.push_back(p.node);
      if (kind == NodeKind::Store) s.store_order.push_back(p.node);
    }
    s.placements = std::move(placements_);
    s.length = schedule_length(s);
    return s;
  }

  struct Read {
    std::size_t placement;
    int slot;
    int pe;
    Cycles cycle;
    bool is_const;
    int value;
    std::int64_t imm;
  };

  const Dfg& dfg_;
  int rows_;
  int cols_;
  int pes_;
  SchedulerOptions opt_;
  std::vector<int> pin_;  // preferred PE per compute node, empty when placement is free
  bool pin_strict_;       // never leave the preferred PE
  Occupancy occ_;
  Cycles window_ = 0;
  std::vector<int> nbr_;
  std::vector<std::vector<std::pair<int, Cycles>>> copies_;
  std::vector<std::vector<Cycles>> in_dm_;
  std::vector<Cycles> first_emit_;
  std::vector<Placement> placements_;
  std::vector<Read> reads_;
  int hops_ = 0;
};

}  // namespace

Schedule schedule_dfg(const Dfg& dfg, int rows, int cols, const SchedulerOptions& options) {
  ArraySweep sweep(dfg, options);
  return sweep.at(rows, cols);
}

std::pair<int, int> ArraySweep::predecessor(int rows, int cols) {
  if (rows <= 2 && cols <= 2) return {0, 0};
  return rows > cols ? std::pair{rows - 1, cols} : std::pair{rows, cols - 1};
}

ArraySweep::ArraySweep(const Dfg& dfg, const SchedulerOptions& options) : dfg_(dfg), opt_(options) {
  if (opt_.dm_depth < 1 || opt_.dm_depth > kMaxDataMemDepth)
    throw InvalidArgument("data memory depth must be in [1, " + std::to_string(kMaxDataMemDepth) + "]");
  validate_dfg(dfg_);
}

const Schedule& ArraySweep::at(int rows, int cols) {
  if (rows < 2 || cols < 2) throw InvalidArgument("array must be at least 2x2");
  const Cell& cell = compute(rows, cols);
  if (cell.elite.empty()) throw UnschedulableError(cell.failure);
  return cell.elite.front();
}

bool ArraySweep::computed(int rows, int cols) const { return cells_.count({rows, cols}) != 0; }

const ArraySweep::Cell& ArraySweep::compute(int r, int c) {
  if (auto it = cells_.find({r, c}); it != cells_.end()) return it->second;
  const auto [pr, pc] = predecessor(r, c);
  const Cell* prev = pr ? &compute(pr, pc) : nullptr;

  Cell cell;
  constexpr std::size_t kElite = 4;  // distinct schedules of the best length kept per cell
  auto keep = [&](std::optional<Schedule> cand) {
    if (!cand) return;
    auto& set = cell.elite;
    if (!set.empty() && cand->length > set.front().length) return;
    if (!set.empty() && cand->length < set.front().length) set.clear();
    if (set.size() < kElite && std::find(set.begin(), set.end(), *cand) == set.end()) set.push_back(std::move(*cand));
  };
  auto run = [&](const SchedulerOptions& o, bool mesh_only, std::vector<int> pin = {},
                 bool strict = true) -> std::optional<Schedule> {
    try {
      return ListScheduler(dfg_, r, c, o, mesh_only, std::move(pin), strict).run();
    } catch (const UnschedulableError& e) {
      if (cell.failure.empty()) cell.failure = e.what();
      return std::nullopt;
    }
  };

  if (dfg_.empty()) {
    Schedule s;
    s.rows = r;
    s.cols = c;
    s.dm_used.assign(static_cast<std::size_t>(r * c), 0);
    cell.elite.push_back(std::move(s));
    return cells_.emplace(std::pair{r, c}, std::move(cell)).first->second;
  }

  keep(run(opt_, false));
  if (opt_.portfolio) {
    // Mesh-routed schedules embed into every larger array, so the mesh
    // family never gets longer along the predecessor tree.
    {
      std::optional<Schedule> m = run(opt_, true);
      if (prev && prev->mesh) {
        auto e = embed_schedule(*prev->mesh, r, c);
        if (e && (!m || e->length < m->length)) m = std::move(e);
      }
      cell.mesh = m;
      keep(std::move(m));
    }
    if (prev && !prev->elite.empty()) {
      const int dim = pr < r ? 0 : 1;  // which dimension grew
      const Cycles target = prev->elite.front().length;
      for (const auto& from : prev->elite) keep(embed_schedule(from, r, c));
      // Re-time the predecessor's placements on this array, once per position
      // of the inserted row or column, either pinned or as a preference an op
      // leaves only for a strictly earlier slot. Seeded tie orders escalate
      // until the result is no longer than the predecessor's.
      auto done = [&] { return !cell.elite.empty() && cell.elite.front().length <= target; };
      for (int seed = 0; seed <= opt_.transfer_seeds && !done(); ++seed) {
        SchedulerOptions o = opt_;
        if (seed) {
          o.tie_seed = static_cast<std::uint64_t>(seed);
          keep(run(o, false));
        }
        for (std::size_t e = 0; e < prev->elite.size() && !done(); ++e) {
          const Schedule& from = prev->elite[e];
          const int gaps = dim == 0 ? from.rows : from.cols;
          for (int g = 0; g < gaps && !done(); ++g) {
            std::vector<int> pin(dfg_.size(), kPortPe);
            for (const auto& p : from.placements) {
              if (p.node < 0) continue;
              int row = p.pe / from.cols, col = p.pe % from.cols;
              if (dim == 0 && row > g) ++row;
              if (dim == 1 && col > g) ++col;
              pin[static_cast<std::size_t>(p.node)] = row * c + col;
            }
            keep(run(o, false, pin, true));
            keep(run(o, false, std::move(pin), false));
          }
        }
      }
    }
  }
  if (cell.elite.empty() && cell.failure.empty()) cell.failure = "no schedule fits the data memory";
  return cells_.emplace(std::pair{r, c}, std::move(cell)).first->second;
}

namespace {

// Maps the PE grid of s into rows x cols by inserting the extra rows after
// source row `row_gap` and the extra columns after source column `col_gap`.
std::optional<Schedule> embed_with_gaps(const Schedule& s, int rows, int cols, int row_gap, int col_gap) {
  const int grow_r = rows - s.rows;
  const int grow_c = cols - s.cols;
  auto remap = [&](int pe) {
    int r = pe / s.cols, c = pe % s.cols;
    if (r > row_gap) r += grow_r;
    if (c > col_gap) c += grow_c;
    return r * cols + c;
  };
  Schedule out = s;
  out.rows = rows;
  out.cols = cols;
  for (auto& p : out.placements) {
    const int np = remap(p.pe);
    for (auto& src : p.src) {
      if (src.kind < SrcKind::North || src.kind > SrcKind::West) continue;
      const int want = remap(neighbor_pe(p.pe, src.kind, s.rows, s.cols));
      bool found = false;
      for (SrcKind d : kDirs) {
        if (neighbor_pe(np, d, rows, cols) == want) {
          src.kind = d;
          found = true;
          break;
        }
      }
      if (!found) return std::nullopt;
    }
    p.pe = np;
  }
  std::stable_sort(out.placements.begin(), out.placements.end(), [](const Placement& x, const Placement& y) {
    return std::tie(x.cycle, x.pe) < std::tie(y.cycle, y.pe);
  });
  for (auto& c : out.constants) c.pe = remap(c.pe);
  out.dm_used.assign(static_cast<std::size_t>(rows * cols), 0);
  for (int pe = 0; pe < s.rows * s.cols; ++pe)
    out.dm_used[static_cast<std::size_t>(remap(pe))] = s.dm_used[static_cast<std::size_t>(pe)];
  return out;
}

}  // namespace

std::optional<Schedule> embed_schedule(const Schedule& s, int rows, int cols) {
  if (rows < s.rows || cols < s.cols) return std::nullopt;
  // Gap n-1 appends at the far edge; the other gaps shift later rows or
  // columns outward. Row and column 0 never move, so the port PE stays put.
  const int rg_end = rows > s.rows ? s.rows : 1;
  const int cg_end = cols > s.cols ? s.cols : 1;
  for (int rg = 0; rg < rg_end; ++rg) {
    for (int cg = 0; cg < cg_end; ++cg) {
      const int row_gap = rows > s.rows ? (s.rows - 1 + rg) % s.rows : s.rows - 1;
      const int col_gap = cols > s.cols ? (s.cols - 1 + cg) % s.cols : s.cols - 1;
      if (auto e = embed_with_gaps(s, rows, cols, row_gap, col_gap)) return e;
    }
  }
  return std::nullopt;
}

// --- validation ---------------------------------------------------------------

namespace {

struct Token {
  bool valid = false;
  bool is_const = false;
  std::int64_t v = 0;  // value id, or constant
  bool operator==(const Token&) const = default;
};

Token value_token(int v) { return {true, false, v}; }
Token const_token(std::int64_t c) { return {true, true, c}; }

std::string at(const Placement& p) {
  return "PE " + std::to_string(p.pe) + " cycle " + std::to_string(p.cycle);
}

}  // namespace

std::vector<std::string> validate_schedule(const Dfg& dfg, const Schedule& s, int rows, int cols, Words dm_depth) {
  std::vector<std::string> errs;
  if (s.rows != rows || s.cols != cols) errs.push_back("schedule array size does not match");
  const int pes = rows * cols;
  std::map<std::pair<int, Cycles>, std::size_t> slot;
  std::vector<int> placed(dfg.size(), 0);
  Cycles max_cycle = -1;
  for (std::size_t i = 0; i < s.placements.size(); ++i) {
    const auto& p = s.placements[i];
    if (p.pe < 0 || p.pe >= pes || p.cycle < 0) {
      errs.push_back("placement outside the array or before cycle 0");
      continue;
    }
    if (!slot.emplace(std::make_pair(p.pe, p.cycle), i).second) errs.push_back("two ops on " + at(p));
    max_cycle = std::max(max_cycle, p.cycle);
    if (p.node >= 0) {
      if (static_cast<std::size_t>(p.node) >= dfg.size()) {
        errs.push_back("unknown DFG node at " + at(p));
        continue;
      }
      ++placed[static_cast<std::size_t>(p.node)];
    }
  }
  if (s.length != max_cycle + 1) errs.push_back("schedule length does not match last occupied cycle");
  for (std::size_t i = 0; i < dfg.size(); ++i)
    if (placed[i] != 1) errs.push_back("DFG node " + std::to_string(i) + " placed " + std::to_string(placed[i]) + " times");
  if (!errs.empty()) return errs;

  std::vector<std::map<int, Token>> dm(static_cast<std::size_t>(pes));
  for (const auto& c : s.constants) {
    if (c.pe < 0 || c.pe >= pes || c.addr < 0 || c.addr >= dm_depth) {
      errs.push_back("constant slot out of range");
      continue;
    }
    if (!dm[static_cast<std::size_t>(c.pe)].emplace(c.addr, const_token(c.value)).second)
      errs.push_back("two constants share a DM slot");
  }

  std::vector<int> issued_loads;
  std::vector<int> issued_stores;
  std::size_t i = 0;
  while (i < s.placements.size()) {
    const Cycles t = s.placements[i].cycle;
    std::size_t j = i;
    while (j < s.placements.size() && s.placements[j].cycle == t) ++j;
    if (j < s.placements.size() && s.placements[j].cycle < t) errs.push_back("placements not sorted by cycle");
    int ibuf_reads = 0;
    int obuf_writes = 0;
    std::vector<std::pair<int, std::pair<int, Token>>> writes;
    for (std::size_t k = i; k < j; ++k) {
      const auto& p = s.placements[k];
      std::array<Token, 2> in{};
      for (int sl = 0; sl < 2; ++sl) {
        const auto& src = p.src[static_cast<std::size_t>(sl)];
        switch (src.kind) {
          case SrcKind::None:
            break;
          case SrcKind::DM: {
            const auto& mem = dm[static_cast<std::size_t>(p.pe)];
            auto it = mem.find(src.addr);
            if (it == mem.end()) errs.push_back("read of uninitialised DM[" + std::to_string(src.addr) + "] at " + at(p));
            else in[static_cast<std::size_t>(sl)] = it->second;
            break;
          }
          case SrcKind::IBuf:
            ++ibuf_reads;
            if (p.pe != kPortPe) errs.push_back("IBUF read off the port PE at " + at(p));
            if (p.node < 0 || dfg.nodes[static_cast<std::size_t>(p.node)].kind != NodeKind::Load)
              errs.push_back("IBUF read by a non-load op at " + at(p));
            else in[static_cast<std::size_t>(sl)] = value_token(p.node);
            break;
          default: {
            const int q = neighbor_pe(p.pe, src.kind, rows, cols);
            auto it = slot.find({q, t - 1});
            if (it == slot.end()) errs.push_back("neighbour register empty for " + at(p));
            else in[static_cast<std::size_t>(sl)] = value_token(s.placements[it->second].value);
            break;
          }
        }
      }
      if (p.obuf_store) {
        ++obuf_writes;
        if (p.pe != kPortPe) errs.push_back("OBUF store off the port PE at " + at(p));
      }
      if (p.dm_write >= dm_depth) errs.push_back("DM write beyond D0 at " + at(p));

      if (p.node < 0) {
        if (p.op != Op::PASS || p.src[1].kind != SrcKind::None || p.obuf_store || p.load_from_obuf)
          errs.push_back("malformed routing hop at " + at(p));
        else if (p.src[0].kind == SrcKind::IBuf || !in[0].valid || in[0].is_const || in[0].v != p.value)
          errs.push_back("routing hop forwards the wrong value at " + at(p));
      } else {
        const auto& n = dfg.nodes[static_cast<std::size_t>(p.node)];
        if (p.value != p.node) errs.push_back("node placement carries another value at " + at(p));
        switch (n.kind) {
          case NodeKind::Load:
            if (p.pe != kPortPe || p.op != Op::PASS || p.src[0].kind != SrcKind::IBuf ||
                p.src[1].kind != SrcKind::None || p.obuf_store || p.load_from_obuf != n.accumulator)
              errs.push_back("malformed load at " + at(p));
            issued_loads.push_back(n.id);
            break;
          case NodeKind::Store: {
            const int v = n.operands[0].node;
            if (p.pe != kPortPe || p.op != Op::PASS || !p.obuf_store || p.load_from_obuf ||
                p.src[1].kind != SrcKind::None || !(in[0] == value_token(v)))
              errs.push_back("malformed store at " + at(p));
            issued_stores.push_back(n.id);
            break;
          }
          case NodeKind::Compute: {
            if (p.op != n.op || p.obuf_store || p.load_from_obuf) errs.push_back("wrong op at " + at(p));
            const int arity = op_arity(n.op);
            for (int sl = 0; sl < 2; ++sl) {
              const auto& o = n.operands[static_cast<std::size_t>(sl)];
              const auto& src = p.src[static_cast<std::size_t>(sl)];
              if (sl >= arity) {
                if (src.kind != SrcKind::None) errs.push_back("extra operand at " + at(p));
                continue;
              }
              if (src.kind != SrcKind::DM) errs.push_back("compute operand not read from DM at " + at(p));
              const Token want = o.is_node() ? value_token(o.node) : const_token(o.imm);
              if (!(in[static_cast<std::size_t>(sl)] == want))
                errs.push_back("operand " + std::to_string(sl) + " not available at " + at(p));
            }
            break;
          }
        }
      }
      if (p.dm_write >= 0 && p.dm_write < dm_depth) writes.push_back({p.pe, {p.dm_write, value_token(p.value)}});
    }
    if (ibuf_reads > 1) errs.push_back("more than one IBUF read in cycle " + std::to_string(t));
    if (obuf_writes > 1) errs.push_back("more than one OBUF write in cycle " + std::to_string(t));
    for (const auto& [pe, w] : writes) {
      auto& cell = dm[static_cast<std::size_t>(pe)][w.first];
      if (cell.valid && cell.is_const) errs.push_back("constant slot overwritten on PE " + std::to_string(pe));
      cell = w.second;
    }
    i = j;
    if (errs.size() > 50) break;
  }
  if (errs.empty()) {
    if (issued_loads != s.load_order) errs.push_back("load order does not match issue order");
    if (issued_stores != s.store_order) errs.push_back("store order does not match issue order");
  }
  return errs;
}

std::string schedule_to_dot(const Dfg& dfg, const Schedule& s) {
  std::ostringstream os;
  os << "digraph schedule {\n  node [shape=box, fontname=monospace];\n";
  std::map<int, const Placement*> where;
  for (const auto& p : s.placements)
    if (p.node >= 0) where[p.node] = &p;
  for (const auto& n : dfg.nodes) {
    const auto* p = where.count(n.id) ? where[n.id] : nullptr;
    std::string label = n.kind == NodeKind::Load ? "LOAD" : n.kind == NodeKind::Store ? "STORE" : std::string(op_name(n.op));
    os << "  n" << n.id << " [label=\"" << n.id << ": " << label;
    if (p) os << "\\nPE(" << p->pe / s.cols << "," << p->pe % s.cols << ") @" << p->cycle;
    os << "\"];\n";
  }
  for (const auto& n : dfg.nodes)
    for (std::size_t sl = 0; sl < n.operands.size(); ++sl) {
      const auto& o = n.operands[sl];
      if (o.is_node()) os << "  n" << o.node << " -> n" << n.id << " [label=\"" << sl << "\"];\n";
      if (o.is_imm()) {
        os << "  c" << n.id << "_" << sl << " [shape=plaintext, label=\"" << o.imm << "\"];\n";
        os << "  c" << n.id << "_" << sl << " -> n" << n.id << ";\n";
      }
    }
  os << "}\n";
  return os.str();
}

}  // namespace dough
