#include "dough/dse.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <thread>
#include <tuple>

namespace dough {

namespace {

// Runs fn(0..n-1) on up to `jobs` threads. The exception of the lowest
// failing index is rethrown, so failures are reproducible.
template <typename Fn>
void parallel_for(std::size_t n, int jobs, Fn&& fn) {
  std::size_t workers = jobs > 0 ? static_cast<std::size_t>(jobs) : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::size_t failed_at = n;
  std::exception_ptr failure;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (i < failed_at) {
            failed_at = i;
            failure = std::current_exception();
          }
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

// One unroll factor: its DFG and the sweep that schedules it across sizes.
struct UnrollSlot {
  Factor u;
  IoCounts io_u;
  std::unique_ptr<ArraySweep> sweep;
  bool broken = false;  // DFG could not be built

  void prepare(const LoopKernel& k, const SearchBounds& b) {
    if (sweep || broken) return;
    try {
      UnrollOptions uo;
      uo.max_nodes = b.max_dfg_nodes;
      uo.width = b.data_width;
      SchedulerOptions so;
      so.dm_depth = b.dm_depths.back();
      sweep = std::make_unique<ArraySweep>(unroll(k, u, uo), so);
      io_u = io_counts(k, u);
    } catch (const InvalidArgument&) {
      broken = true;
    }
  }

  std::optional<FeasibleEntry> schedule(const LoopKernel& k, int r, int c) {
    if (broken) return std::nullopt;
    try {
      const Schedule& s = sweep->at(r, c);
      FeasibleEntry e;
      e.u = u;
      e.rows = r;
      e.cols = c;
      e.dfg_cycles = s.length;
      e.compu_time = compu_time(k.bounds, u, s.length);
      for (int w : s.dm_used) e.dm_used = std::max<Words>(e.dm_used, w);
      e.io_u = io_u;
      e.schedule = std::make_shared<const Schedule>(s);
      return e;
    } catch (const UnschedulableError&) {
      return std::nullopt;
    }
  }

  std::size_t invocations() const { return sweep ? sweep->sizes_scheduled() : 0; }
};

std::vector<UnrollSlot> unroll_slots(const LoopKernel& k, const SearchBounds& b) {
  std::vector<UnrollSlot> slots;
  for (auto& u : enumerate_unroll_factors(k, {b.max_unroll_product})) {
    UnrollSlot s;
    s.u = std::move(u);
    slots.push_back(std::move(s));
  }
  return slots;
}

bool entry_less(const FeasibleEntry& a, const FeasibleEntry& b) {
  if (a.u != b.u) return std::make_pair(product(a.u), a.u) < std::make_pair(product(b.u), b.u);
  return std::tie(a.rows, a.cols) < std::tie(b.rows, b.cols);
}

Words pick_depth(const std::vector<Words>& choices, Words need) {
  for (Words d : choices)
    if (d >= need) return d;
  return choices.back();
}

auto depth_key(const OverlayConfig& o) {
  return std::make_tuple(o.dm_depth, o.ibuf_depth, o.obuf_depth, o.imem_depth, o.in_addr_depth, o.out_addr_depth);
}

// Distance of an infeasible design from feasibility: its worst relative
// excess, then the number of violated constraints.
std::pair<double, std::size_t> excess(const EvaluatedDesign& d) {
  double worst = 0;
  for (const auto& v : d.violations)
    worst = std::max(worst, static_cast<double>(v.value - v.bound) / static_cast<double>(std::max<std::int64_t>(1, v.bound)));
  return {worst, d.violations.size()};
}

struct Tally {
  std::vector<EvaluatedDesign> top;
  std::optional<EvaluatedDesign> closest;
  std::size_t evaluated = 0;
  std::size_t feasible = 0;

  void add(EvaluatedDesign d, std::size_t k) {
    ++evaluated;
    if (!d.ok()) {
      if (!closest || excess(d) < excess(*closest) || (excess(d) == excess(*closest) && design_less(d, *closest)))
        closest = std::move(d);
      return;
    }
    ++feasible;
    if (top.size() >= k && !design_less(d, top.back())) return;
    top.insert(std::upper_bound(top.begin(), top.end(), d, design_less), std::move(d));
    if (top.size() > k) top.pop_back();
  }

  void merge(Tally&& o, std::size_t k) {
    evaluated += o.evaluated;
    feasible += o.feasible;
    for (auto& d : o.top) {
      top.insert(std::upper_bound(top.begin(), top.end(), d, design_less), std::move(d));
      if (top.size() > k) top.pop_back();
    }
    if (o.closest && (!closest || excess(*o.closest) < excess(*closest) ||
                      (excess(*o.closest) == excess(*closest) && design_less(*o.closest, *closest))))
      closest = std::move(o.closest);
  }
};

std::map<Factor, std::vector<Factor>> group_choices(const LoopKernel& k, const std::vector<Factor>& us,
                                                    const SearchBounds& b) {
  std::map<Factor, std::vector<Factor>> out;
  GroupLimits gl;
  gl.max_in_words = b.ibuf_depths.back();
  for (const auto& u : us) out[u] = enumerate_group_factors(k, u, gl);
  return out;
}

template <typename PerEntry>
Tally evaluate_entries(const std::vector<FeasibleEntry>& entries, const SearchBounds& b, PerEntry&& per_entry) {
  std::vector<Tally> parts(entries.size());
  parallel_for(entries.size(), b.jobs, [&](std::size_t i) { per_entry(entries[i], parts[i]); });
  Tally all;
  for (auto& p : parts) all.merge(std::move(p), b.top_k);
  return all;
}

// Emitted designs are re-checked from scratch rather than trusted.
void revalidate(const LoopKernel& k, const EvaluatedDesign& d, const PlatformModel& platform) {
  if (!is_valid_group(k, d.config.u, d.config.g) || !design_violations(d, platform).empty() ||
      io_counts(k, d.config.g) != d.io_g || d.dfg_cycles != d.schedule->length)
    throw std::logic_error("selected design fails re-validation");
}

CustomizationResult finish(const LoopKernel& k, const PlatformModel& platform, const SearchBounds& b,
                           const std::vector<FeasibleEntry>& entries, Tally&& tally, std::string method,
                           double epsilon, std::size_t invocations, std::chrono::steady_clock::time_point t0) {
  if (tally.top.empty()) {
    if (tally.closest) {
      const auto& c = tally.closest->config;
      throw InfeasibleError("no configuration satisfies every constraint; the closest is u=" + shape_str(c.u) + " g=" +
                                shape_str(c.g) + " on " + std::to_string(c.overlay.rows) + "x" +
                                std::to_string(c.overlay.cols),
                            tally.closest->violations);
    }
    const Factor u0 = minimal_unroll(k);
    throw InfeasibleError("no grouping factor fits the largest input buffer",
                          {{"in_buffer", io_counts(k, u0).in, b.ibuf_depths.back()}});
  }
  for (const auto& d : tally.top) revalidate(k, d, platform);
  CustomizationResult r;
  r.method = std::move(method);
  r.epsilon = epsilon;
  r.best = tally.top.front();
  r.top = std::move(tally.top);
  r.stats.scheduler_invocations = invocations;
  r.stats.feasible_entries = entries.size();
  r.stats.configs_evaluated = tally.evaluated;
  r.stats.feasible_designs = tally.feasible;
  r.stats.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

OverlayConfig base_overlay(const FeasibleEntry& e, const SearchBounds& b, const PlatformModel& platform) {
  OverlayConfig o;
  o.rows = e.rows;
  o.cols = e.cols;
  o.data_width = b.data_width;
  o.frequency_hz = platform.frequency_hz;
  return o;
}

double resolve_epsilon(const SearchBounds& b, const PlatformModel& platform) {
  return b.epsilon.value_or(platform.epsilon);
}

}  // namespace

std::vector<std::pair<int, int>> array_sizes(const SearchBounds& b) {
  std::vector<std::pair<int, int>> out;
  if (b.size_space == SizeSpace::Grid) {
    for (int r = 2; r <= b.max_rows; ++r)
      for (int c = 2; c <= b.max_cols; ++c) out.emplace_back(r, c);
    std::stable_sort(out.begin(), out.end(),
                     [](auto x, auto y) { return x.first + x.second < y.first + y.second; });
    return out;
  }
  int r = 2, c = 2;
  out.emplace_back(r, c);
  while (r < b.max_rows || c < b.max_cols) {
    // Grow rows on square arrays, columns otherwise; a capped side hands over.
    const bool grow_rows = (r <= c && r < b.max_rows) || c == b.max_cols;
    (grow_rows ? r : c) += 1;
    out.emplace_back(r, c);
  }
  return out;
}

SearchBounds normalized(SearchBounds b) {
  if (b.max_rows < 2 || b.max_cols < 2) throw InvalidArgument("search bounds must allow at least a 2x2 array");
  if (b.max_unroll_product < 1) throw InvalidArgument("max unroll product must be positive");
  if (b.data_width < 2 || b.data_width > 64) throw InvalidArgument("data width must be in [2, 64]");
  if (b.top_k < 1) throw InvalidArgument("top_k must be positive");
  if (b.epsilon && !(*b.epsilon >= 0 && *b.epsilon < 1)) throw InvalidArgument("epsilon must be in [0, 1)");
  const std::pair<const char*, std::vector<Words>*> lists[] = {
      {"D0", &b.dm_depths},     {"D1", &b.ibuf_depths},    {"D2", &b.obuf_depths},
      {"D3", &b.imem_depths},   {"D4", &b.in_addr_depths}, {"D5", &b.out_addr_depths}};
  for (auto [name, list] : lists) {
    if (list->empty()) throw InvalidArgument(std::string(name) + " has no depth choices");
    std::sort(list->begin(), list->end());
    list->erase(std::unique(list->begin(), list->end()), list->end());
    for (Words d : *list)
      if (!is_pow2(d)) throw InvalidArgument(std::string(name) + " depth " + std::to_string(d) + " is not a power of two");
  }
  if (b.dm_depths.back() > kMaxDataMemDepth)
    throw InvalidArgument("D0 choices exceed " + std::to_string(kMaxDataMemDepth) + " words");
  return b;
}

double improvement(Cycles before, Cycles after) {
  if (before <= 0) return 0;
  return static_cast<double>(before - after) / static_cast<double>(before);
}

Exploration explore_lattice(const Lattice& lat, double epsilon, const LatticeEval& eval) {
  const std::size_t n = lat.preds.size();
  if (lat.level.size() != n || lat.root >= n) throw InvalidArgument("malformed lattice");
  Exploration ex;
  ex.candidate.assign(n, false);
  ex.admitted.assign(n, false);
  ex.compu.assign(n, std::nullopt);
  std::map<int, std::vector<std::size_t>> levels;
  for (std::size_t i = 0; i < n; ++i) {
    for (auto p : lat.preds[i])
      if (p >= n || lat.level[p] >= lat.level[i]) throw InvalidArgument("lattice predecessor is not on a lower level");
    levels[lat.level[i]].push_back(i);
  }
  for (const auto& [level, nodes] : levels) {
    std::vector<std::size_t> batch;
    for (auto i : nodes)
      if (i == lat.root || std::any_of(lat.preds[i].begin(), lat.preds[i].end(), [&](auto p) { return ex.admitted[p]; }))
        batch.push_back(i);
    if (batch.empty()) continue;
    auto values = eval(batch);
    if (values.size() != batch.size()) throw std::logic_error("lattice evaluator returned the wrong batch size");
    for (std::size_t j = 0; j < batch.size(); ++j) {
      const auto i = batch[j];
      ex.candidate[i] = true;
      ex.compu[i] = values[j];
      if (!values[j]) continue;
      ex.admitted[i] = i == lat.root || std::any_of(lat.preds[i].begin(), lat.preds[i].end(), [&](auto p) {
                         return ex.admitted[p] && (epsilon == 0 || improvement(*ex.compu[p], *values[j]) > epsilon);
                       });
    }
  }
  return ex;
}

FeasibleSpace build_feasible_space(const LoopKernel& k, const SearchBounds& bounds, double epsilon) {
  if (!(epsilon >= 0 && epsilon < 1)) throw InvalidArgument("epsilon must be in [0, 1)");
  const SearchBounds b = normalized(bounds);
  auto slots = unroll_slots(k, b);
  const std::size_t nu = slots.size();
  const auto sizes = array_sizes(b);
  const std::size_t ns = sizes.size();
  std::map<std::pair<int, int>, std::size_t> size_index;
  for (std::size_t i = 0; i < ns; ++i) size_index[sizes[i]] = i;
  std::vector<std::vector<std::size_t>> size_preds(ns);
  for (std::size_t i = 0; i < ns; ++i) {
    auto [r, c] = sizes[i];
    for (auto p : {std::pair{r - 1, c}, std::pair{r, c - 1}}) {
      auto it = size_index.find(p);
      if (it == size_index.end()) continue;
      if (b.size_space == SizeSpace::Grid || it->second + 1 == i) size_preds[i].push_back(it->second);
    }
  }

  std::map<Factor, std::size_t> index;
  for (std::size_t i = 0; i < nu; ++i) index[slots[i].u] = i;
  std::vector<std::vector<std::size_t>> u_preds(nu);
  for (std::size_t i = 0; i < nu; ++i)
    for (const auto& s : unroll_successors(k, slots[i].u, {b.max_unroll_product})) {
      auto it = index.find(s);
      if (it != index.end()) u_preds[it->second].push_back(i);
    }
  // Level of u: total divisor steps above the first divisor of each bound.
  std::vector<int> rank(nu, 0);
  for (std::size_t i = 0; i < nu; ++i)
    for (std::size_t d = 0; d < k.depth(); ++d) {
      const auto divs = divisors(k.bounds[d]);
      rank[i] += static_cast<int>(std::find(divs.begin(), divs.end(), slots[i].u[d]) - divs.begin());
    }

  Lattice lat;
  lat.preds.resize(nu * ns);
  lat.level.resize(nu * ns);
  for (std::size_t ui = 0; ui < nu; ++ui)
    for (std::size_t si = 0; si < ns; ++si) {
      const auto id = ui * ns + si;
      for (auto p : size_preds[si]) lat.preds[id].push_back(ui * ns + p);
      for (auto p : u_preds[ui]) lat.preds[id].push_back(p * ns + si);
      lat.level[id] = rank[ui] + sizes[si].first + sizes[si].second;
    }
  lat.root = index.at(minimal_unroll(k)) * ns;

  std::vector<std::optional<FeasibleEntry>> found(nu * ns);
  const auto eval = [&](const std::vector<std::size_t>& batch) {
    std::map<std::size_t, std::vector<std::size_t>> by_unit;
    for (auto id : batch) by_unit[id / ns].push_back(id % ns);
    std::vector<std::pair<std::size_t, std::vector<std::size_t>>> tasks(by_unit.begin(), by_unit.end());
    parallel_for(tasks.size(), b.jobs, [&](std::size_t t) {
      auto& [ui, sis] = tasks[t];
      slots[ui].prepare(k, b);
      for (auto si : sis) found[ui * ns + si] = slots[ui].schedule(k, sizes[si].first, sizes[si].second);
    });
    std::vector<std::optional<Cycles>> out;
    for (auto id : batch) out.push_back(found[id] ? std::optional<Cycles>(found[id]->compu_time) : std::nullopt);
    return out;
  };
  const auto ex = explore_lattice(lat, epsilon, eval);

  FeasibleSpace space;
  space.epsilon = epsilon;
  for (std::size_t id = 0; id < nu * ns; ++id) {
    if (ex.candidate[id]) ++space.candidates;
    if (ex.candidate[id] && !ex.admitted[id]) ++space.rejected;
    if (ex.admitted[id]) space.entries.push_back(*found[id]);
  }
  std::sort(space.entries.begin(), space.entries.end(), entry_less);
  for (const auto& s : slots) space.scheduler_invocations += s.invocations();
  if (space.entries.empty()) throw UnschedulableError("the minimal configuration cannot be scheduled");
  return space;
}

std::vector<Violation> design_violations(const EvaluatedDesign& d, const PlatformModel& platform) {
  std::vector<Violation> out;
  if (d.dm_used > d.config.overlay.dm_depth) out.push_back({"data_mem", d.dm_used, d.config.overlay.dm_depth});
  for (auto& v : check_constraints(d.config, platform, d.io_u.in, d.io_u.out, d.io_g.in, d.io_g.out, d.dfg_cycles))
    out.push_back(std::move(v));
  return out;
}

EvaluatedDesign evaluate_config(const LoopKernel& k, const FeasibleEntry& entry, const Factor& g,
                                const OverlayConfig& depths, const PlatformModel& platform) {
  if (!is_valid_group(k, entry.u, g))
    throw InvalidArgument("grouping factor " + shape_str(g) + " breaks u | g | l for u=" + shape_str(entry.u));
  EvaluatedDesign d;
  d.config.u = entry.u;
  d.config.g = g;
  d.config.overlay = depths;
  d.config.overlay.rows = entry.rows;
  d.config.overlay.cols = entry.cols;
  d.dfg_cycles = entry.dfg_cycles;
  d.dm_used = entry.dm_used;
  d.io_u = entry.io_u;
  d.io_g = io_counts(k, g);
  d.timing = timing_report(k.bounds, entry.u, g, entry.dfg_cycles, d.io_g.in, d.io_g.out, platform.dma,
                           d.config.overlay.frequency_hz);
  d.resources = resource_estimate(d.config.overlay, platform);
  d.violations = design_violations(d, platform);
  d.schedule = entry.schedule;
  return d;
}

OverlayConfig minimal_depths(const LoopKernel& k, const FeasibleEntry& entry, const Factor& g,
                             const SearchBounds& b, const PlatformModel& platform) {
  const auto io_g = io_counts(k, g);
  const auto iters = tile_count(g, entry.u);
  OverlayConfig o = base_overlay(entry, b, platform);
  o.dm_depth = pick_depth(b.dm_depths, entry.dm_used);
  o.ibuf_depth = pick_depth(b.ibuf_depths, io_g.in);
  o.obuf_depth = pick_depth(b.obuf_depths, io_g.out);
  o.imem_depth = pick_depth(b.imem_depths, entry.dfg_cycles);
  o.in_addr_depth = pick_depth(b.in_addr_depths, checked_mul(iters, entry.io_u.in));
  o.out_addr_depth = pick_depth(b.out_addr_depths, checked_mul(iters, entry.io_u.out));
  o.fit_address_widths();
  return o;
}

bool design_less(const EvaluatedDesign& a, const EvaluatedDesign& b) {
  const auto& ca = a.config;
  const auto& cb = b.config;
  if (a.timing.total != b.timing.total) return a.timing.total < b.timing.total;
  if (a.resources.bram != b.resources.bram) return a.resources.bram < b.resources.bram;
  if (ca.overlay.pes() != cb.overlay.pes()) return ca.overlay.pes() < cb.overlay.pes();
  if (ca.u != cb.u) return ca.u < cb.u;
  if (ca.g != cb.g) return ca.g < cb.g;
  if (ca.overlay.rows != cb.overlay.rows) return ca.overlay.rows < cb.overlay.rows;
  return depth_key(ca.overlay) < depth_key(cb.overlay);
}

CustomizationResult customize_ts(const LoopKernel& k, const PlatformModel& platform, const SearchBounds& bounds) {
  const auto t0 = std::chrono::steady_clock::now();
  validate_platform(platform);
  const SearchBounds b = normalized(bounds);
  const double eps = resolve_epsilon(b, platform);
  auto space = build_feasible_space(k, b, eps);
  std::vector<Factor> us;
  for (const auto& e : space.entries) us.push_back(e.u);
  const auto groups = group_choices(k, us, b);
  auto tally = evaluate_entries(space.entries, b, [&](const FeasibleEntry& e, Tally& t) {
    for (const auto& g : groups.at(e.u)) t.add(evaluate_config(k, e, g, minimal_depths(k, e, g, b, platform), platform), b.top_k);
  });
  return finish(k, platform, b, space.entries, std::move(tally), "ts", eps, space.scheduler_invocations, t0);
}

std::size_t es_space_size(const LoopKernel& k, const SearchBounds& bounds) {
  const SearchBounds b = normalized(bounds);
  std::vector<Factor> us = enumerate_unroll_factors(k, {b.max_unroll_product});
  const auto groups = group_choices(k, us, b);
  const std::size_t sizes = array_sizes(b).size();
  std::size_t depth_combos = 1;
  for (const auto* l : {&b.dm_depths, &b.ibuf_depths, &b.obuf_depths, &b.imem_depths, &b.in_addr_depths,
                        &b.out_addr_depths})
    depth_combos *= l->size();
  std::size_t total = 0;
  const std::size_t limit = std::numeric_limits<std::size_t>::max() / 2;
  for (const auto& [u, gs] : groups) {
    const long double add = static_cast<long double>(gs.size()) * sizes * depth_combos;
    total = static_cast<long double>(total) + add > limit ? limit : total + static_cast<std::size_t>(add);
  }
  return total;
}

CustomizationResult customize_es(const LoopKernel& k, const PlatformModel& platform, const SearchBounds& bounds) {
  const auto t0 = std::chrono::steady_clock::now();
  validate_platform(platform);
  const SearchBounds b = normalized(bounds);
  const std::size_t n = es_space_size(k, b);
  if (n > b.es_cap)
    throw CapExceededError("exhaustive search space has " + std::to_string(n) + " configurations, above the cap of " +
                           std::to_string(b.es_cap));
  auto slots = unroll_slots(k, b);
  std::vector<std::vector<FeasibleEntry>> per_u(slots.size());
  parallel_for(slots.size(), b.jobs, [&](std::size_t i) {
    slots[i].prepare(k, b);
    for (auto [r, c] : array_sizes(b))
      if (auto e = slots[i].schedule(k, r, c)) per_u[i].push_back(std::move(*e));
  });
  std::vector<FeasibleEntry> entries;
  std::size_t invocations = 0;
  std::vector<Factor> us;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    invocations += slots[i].invocations();
    us.push_back(slots[i].u);
    for (auto& e : per_u[i]) entries.push_back(std::move(e));
  }
  std::sort(entries.begin(), entries.end(), entry_less);
  const auto groups = group_choices(k, us, b);
  auto tally = evaluate_entries(entries, b, [&](const FeasibleEntry& e, Tally& t) {
    OverlayConfig o = base_overlay(e, b, platform);
    for (const auto& g : groups.at(e.u))
      for (Words d0 : b.dm_depths)
        for (Words d1 : b.ibuf_depths)
          for (Words d2 : b.obuf_depths)
            for (Words d3 : b.imem_depths)
              for (Words d4 : b.in_addr_depths)
                for (Words d5 : b.out_addr_depths) {
                  o.dm_depth = d0;
                  o.ibuf_depth = d1;
                  o.obuf_depth = d2;
                  o.imem_depth = d3;
                  o.in_addr_depth = d4;
                  o.out_addr_depth = d5;
                  o.fit_address_widths();
                  t.add(evaluate_config(k, e, g, o, platform), b.top_k);
                }
  });
  return finish(k, platform, b, entries, std::move(tally), "es", 0.0, invocations, t0);
}

}  // namespace dough
