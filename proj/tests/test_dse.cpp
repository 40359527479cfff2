#include <set>

#include "doctest.h"
#include "dough/dse.hpp"

using namespace dough;

namespace {

SearchBounds tiny_bounds() {
  SearchBounds b;
  b.max_unroll_product = 8;
  b.max_rows = b.max_cols = 4;
  b.ibuf_depths = b.obuf_depths = {64, 1024};
  b.imem_depths = {256, 1024};
  b.in_addr_depths = b.out_addr_depths = {1024};
  return b;
}

Lattice chain_lattice(std::size_t n) {
  Lattice l;
  for (std::size_t i = 0; i < n; ++i) {
    l.preds.push_back(i ? std::vector<std::size_t>{i - 1} : std::vector<std::size_t>{});
    l.level.push_back(static_cast<int>(i));
  }
  return l;
}

LatticeEval table(std::vector<Cycles> values, std::vector<std::size_t>* seen = nullptr) {
  return [values, seen](const std::vector<std::size_t>& batch) {
    std::vector<std::optional<Cycles>> out;
    for (auto i : batch) {
      if (seen) seen->push_back(i);
      out.emplace_back(values[i]);
    }
    return out;
  };
}

std::set<std::tuple<Factor, int, int>> keys(const std::vector<FeasibleEntry>& entries) {
  std::set<std::tuple<Factor, int, int>> out;
  for (const auto& e : entries) out.emplace(e.u, e.rows, e.cols);
  return out;
}

}  // namespace

TEST_CASE("array size chain") {
  SearchBounds b;
  using P = std::pair<int, int>;
  CHECK(array_sizes(b) == std::vector<P>{{2, 2}, {3, 2}, {3, 3}, {4, 3}, {4, 4}, {5, 4}, {5, 5}});
  b.max_rows = 3;
  CHECK(array_sizes(b) == std::vector<P>{{2, 2}, {3, 2}, {3, 3}, {3, 4}, {3, 5}});
  b.max_rows = 5;
  b.max_cols = 2;
  CHECK(array_sizes(b) == std::vector<P>{{2, 2}, {3, 2}, {4, 2}, {5, 2}});
  b.max_cols = 3;
  b.size_space = SizeSpace::Grid;
  CHECK(array_sizes(b).size() == 8);
  CHECK(array_sizes(b).front() == P{2, 2});
  // Every chain step follows the scheduler's predecessor tree.
  b = SearchBounds{};
  b.max_rows = 7;
  b.max_cols = 4;
  const auto chain = array_sizes(b);
  for (std::size_t i = 1; i < chain.size(); ++i)
    CHECK(ArraySweep::predecessor(chain[i].first, chain[i].second) == chain[i - 1]);
}

TEST_CASE("bounds normalisation") {
  SearchBounds b;
  b.ibuf_depths = {4096, 1024, 1024};
  CHECK(normalized(b).ibuf_depths == std::vector<Words>{1024, 4096});
  b.ibuf_depths = {1000};
  CHECK_THROWS_AS(normalized(b), InvalidArgument);
  b = SearchBounds{};
  b.dm_depths = {2048};
  CHECK_THROWS_AS(normalized(b), InvalidArgument);
  b = SearchBounds{};
  b.max_rows = 1;
  CHECK_THROWS_AS(normalized(b), InvalidArgument);
  b = SearchBounds{};
  b.imem_depths.clear();
  CHECK_THROWS_AS(normalized(b), InvalidArgument);
}

TEST_CASE("epsilon pruning worked example") {
  // CompuTime 1000 (2x2), 800 (3x2), 780 (3x3): improvements 20% then 2.5%.
  auto ex = explore_lattice(chain_lattice(3), 0.05, table({1000, 800, 780}));
  CHECK(ex.admitted == std::vector<bool>{true, true, false});
  CHECK(ex.candidate == std::vector<bool>{true, true, true});
  CHECK(improvement(1000, 800) == doctest::Approx(0.2));
  CHECK(improvement(800, 780) == doctest::Approx(0.025));

  // A closed chain is never extended.
  std::vector<std::size_t> seen;
  ex = explore_lattice(chain_lattice(5), 0.05, table({1000, 800, 780, 500, 100}, &seen));
  CHECK(ex.admitted == std::vector<bool>{true, true, false, false, false});
  CHECK(seen == std::vector<std::size_t>{0, 1, 2});

  ex = explore_lattice(chain_lattice(3), 0.999, table({1000, 800, 780}));
  CHECK(ex.admitted == std::vector<bool>{true, false, false});
  ex = explore_lattice(chain_lattice(3), 0.0, table({1000, 1000, 1200}));
  CHECK(ex.admitted == std::vector<bool>{true, true, true});
}

TEST_CASE("lattice admission needs one improving admitted predecessor") {
  // Diamond 0 -> {1, 2} -> 3.
  Lattice l;
  l.preds = {{}, {0}, {0}, {1, 2}};
  l.level = {0, 1, 1, 2};
  auto ex = explore_lattice(l, 0.1, table({100, 95, 80, 80}));
  CHECK(ex.admitted == std::vector<bool>{true, false, true, false});
  ex = explore_lattice(l, 0.1, table({100, 95, 80, 70}));
  CHECK(ex.admitted == std::vector<bool>{true, false, true, true});
  // A failed evaluation is a rejected candidate.
  ex = explore_lattice(l, 0.1, [](const std::vector<std::size_t>& batch) {
    std::vector<std::optional<Cycles>> out;
    for (auto i : batch) out.push_back(i == 2 ? std::nullopt : std::optional<Cycles>(100 - 20 * static_cast<Cycles>(i)));
    return out;
  });
  CHECK(ex.admitted == std::vector<bool>{true, true, false, true});
  l.level = {0, 1, 1, 1};
  CHECK_THROWS_AS(explore_lattice(l, 0.1, table({1, 1, 1, 1})), InvalidArgument);
}

TEST_CASE("high epsilon keeps only the minimal configuration") {
  for (const char* spec : {"MM?size=8", "FIR?inputs=64&taps=8", "KM?nodes=32&centroids=4&dims=2"}) {
    const auto k = builtin_kernel_from_spec(spec);
    const auto space = build_feasible_space(k, tiny_bounds(), 0.999);
    REQUIRE(space.entries.size() == 1);
    CHECK(space.entries[0].u == minimal_unroll(k));
    CHECK(space.entries[0].rows == 2);
    CHECK(space.entries[0].cols == 2);
  }
}

TEST_CASE("feasible space matches the filtered full enumeration") {
  const auto k = builtin_kernel_from_spec("FIR?inputs=1024&taps=8");
  SearchBounds b;
  b.max_unroll_product = 64;
  const double eps = 0.05;
  const auto space = build_feasible_space(k, b, eps);

  // Oracle: CompuTime of every (u, size), then the admission rule applied
  // recursively over the same predecessor relation.
  const auto us = enumerate_unroll_factors(k, {b.max_unroll_product});
  const auto sizes = array_sizes(b);
  std::map<std::tuple<Factor, int, int>, Cycles> ct;
  for (const auto& u : us) {
    ArraySweep sweep(unroll(k, u));
    for (auto [r, c] : sizes) ct[{u, r, c}] = compu_time(k.bounds, u, sweep.at(r, c).length);
  }
  std::map<std::tuple<Factor, int, int>, bool> memo;
  std::function<bool(const Factor&, std::size_t)> in_phi = [&](const Factor& u, std::size_t si) -> bool {
    const auto key = std::make_tuple(u, sizes[si].first, sizes[si].second);
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    bool ok = u == minimal_unroll(k) && si == 0;
    const auto beats = [&](const std::tuple<Factor, int, int>& p) {
      return (ct.at(p) - ct.at(key)) / static_cast<double>(ct.at(p)) > eps;
    };
    if (si > 0 && in_phi(u, si - 1) && beats({u, sizes[si - 1].first, sizes[si - 1].second})) ok = true;
    for (const auto& v : us) {
      const auto succ = unroll_successors(k, v, {b.max_unroll_product});
      if (std::find(succ.begin(), succ.end(), u) != succ.end() && in_phi(v, si) &&
          beats({v, sizes[si].first, sizes[si].second}))
        ok = true;
    }
    return memo[key] = ok;
  };
  std::set<std::tuple<Factor, int, int>> want;
  for (const auto& u : us)
    for (std::size_t si = 0; si < sizes.size(); ++si)
      if (in_phi(u, si)) want.emplace(u, sizes[si].first, sizes[si].second);
  CHECK(keys(space.entries) == want);
  CHECK(space.scheduler_invocations < us.size() * sizes.size());
  for (const auto& e : space.entries) CHECK(ct.at({e.u, e.rows, e.cols}) == e.compu_time);
}

TEST_CASE("evaluate_config matches a straight-line recomputation") {
  const auto k = builtin_kernel_from_spec("MM?size=16");
  const auto p = zedboard_platform();
  SearchBounds b;
  b.max_unroll_product = 16;
  const auto space = build_feasible_space(k, b, 0.05);
  int checked = 0;
  for (const auto& e : space.entries) {
    for (const auto& g : enumerate_group_factors(k, e.u)) {
      if (checked++ % 7) continue;
      const auto o = minimal_depths(k, e, g, b, p);
      const auto d = evaluate_config(k, e, g, o, p);
      std::int64_t reps = 1, groups = 1;
      for (int i = 0; i < 3; ++i) {
        reps *= 16 / e.u[static_cast<std::size_t>(i)];
        groups *= 16 / g[static_cast<std::size_t>(i)];
      }
      const auto io = io_counts(k, g);
      const Cycles dma = (io.in ? 500 + 2 * io.in : 0) + (io.out ? 500 + 2 * io.out : 0);
      CHECK(d.timing.compu == reps * e.dfg_cycles);
      CHECK(d.timing.commu == groups * dma);
      CHECK(d.timing.total == reps * e.dfg_cycles + groups * dma);
      CHECK(d.timing.seconds == doctest::Approx(static_cast<double>(d.timing.total) / 250e6));
    }
  }
  CHECK(checked > 20);
}

TEST_CASE("minimal depths are feasible and tight") {
  const auto k = builtin_kernel_from_spec("FIR?inputs=64&taps=8");
  const auto p = zedboard_platform();
  SearchBounds b;
  b.max_unroll_product = 16;
  b.imem_depths = {16, 32, 64, 128, 256, 512, 1024};
  b.ibuf_depths = b.obuf_depths = b.in_addr_depths = b.out_addr_depths = {16, 32, 64, 128, 256, 512, 1024};
  const auto space = build_feasible_space(k, b, 0.05);
  for (const auto& e : space.entries) {
    const auto d = evaluate_config(k, e, e.u, minimal_depths(k, e, e.u, b, p), p);
    CHECK(d.ok());
    // One step lower on D3 breaks the instruction-memory bound.
    auto o = d.config.overlay;
    if (o.imem_depth > 16) {
      o.imem_depth /= 2;
      const auto worse = evaluate_config(k, e, e.u, o, p);
      CHECK(std::any_of(worse.violations.begin(), worse.violations.end(),
                        [](const Violation& v) { return v.constraint == "instr_mem"; }));
    }
    o = d.config.overlay;
    o.imem_depth = e.dfg_cycles - 1;
    const auto bad = evaluate_config(k, e, e.u, o, p);
    CHECK(bad.violations.front() == Violation{"instr_mem", e.dfg_cycles, e.dfg_cycles - 1});
  }
}

TEST_CASE("exact minimal budget returns the minimal configuration") {
  const auto k = builtin_kernel_from_spec("MM?size=4");
  SearchBounds b;
  b.max_unroll_product = 8;
  b.ibuf_depths = {4};
  b.obuf_depths = {1};
  b.in_addr_depths = {4};
  b.out_addr_depths = {1};
  b.imem_depths = {16};
  b.dm_depths = {16};
  auto p = zedboard_platform();
  const Factor u0 = minimal_unroll(k);
  const auto space = build_feasible_space(k, b, 0.05);
  const auto& root = space.entries.front();
  REQUIRE(root.u == u0);
  const auto minimal = evaluate_config(k, root, u0, minimal_depths(k, root, u0, b, p), p);
  p.budgets = minimal.resources;
  for (const auto& r : {customize_ts(k, p, b), customize_es(k, p, b)}) {
    CHECK(r.best.config.u == u0);
    CHECK(r.best.config.g == u0);
    CHECK(r.best.config.overlay.rows == 2);
    CHECK(r.best.config.overlay.cols == 2);
    CHECK(r.top.size() == 1);
  }
}

TEST_CASE("exhaustive search on a two-configuration space") {
  const auto k = parse_kernel("loop i in 0..1 { Y[i] = X[i] * X[i] + X[i] }");
  SearchBounds b;
  b.max_rows = 3;
  b.max_cols = 2;
  b.max_unroll_product = 1;
  b.ibuf_depths = b.obuf_depths = b.in_addr_depths = b.out_addr_depths = b.imem_depths = {1024};
  REQUIRE(es_space_size(k, b) == 2);
  const auto r = customize_es(k, zedboard_platform(), b);
  REQUIRE(r.top.size() == 2);
  CHECK(r.stats.configs_evaluated == 2);
  CHECK(!design_less(r.top[1], r.top[0]));
  CHECK(r.best.timing.total <= r.top[1].timing.total);
}

TEST_CASE("ES dominates TS and costs more scheduling") {
  const auto p = zedboard_platform();
  for (const char* spec : {"MM?size=8", "FIR?inputs=64&taps=8", "SE?rows=4&cols=4", "KM?nodes=32&centroids=4&dims=2"}) {
    const auto k = builtin_kernel_from_spec(spec);
    const auto b = tiny_bounds();
    const auto ts = customize_ts(k, p, b);
    const auto es = customize_es(k, p, b);
    CHECK(es.best.timing.total <= ts.best.timing.total);
    CHECK(ts.stats.scheduler_invocations <= es.stats.scheduler_invocations);
    CHECK(ts.stats.configs_evaluated < es.stats.configs_evaluated);
    for (const auto& d : ts.top) CHECK(design_violations(d, p).empty());
    for (const auto& d : es.top) CHECK(design_violations(d, p).empty());
    CHECK(std::is_sorted(ts.top.begin(), ts.top.end(), design_less));
  }
}

TEST_CASE("zero epsilon makes TS exhaustive") {
  const auto p = zedboard_platform();
  for (const char* spec : {"MM?size=4", "FIR?inputs=32&taps=4"}) {
    const auto k = builtin_kernel_from_spec(spec);
    auto b = tiny_bounds();
    b.epsilon = 0.0;
    const auto ts = customize_ts(k, p, b);
    const auto es = customize_es(k, p, b);
    CHECK(ts.stats.scheduler_invocations == es.stats.scheduler_invocations);
    CHECK(ts.stats.feasible_entries == es.stats.feasible_entries);
    CHECK(ts.best.config == es.best.config);
    CHECK(ts.best.timing == es.best.timing);
  }
}

TEST_CASE("results do not depend on the worker count") {
  const auto k = builtin_kernel_from_spec("FIR?inputs=64&taps=8");
  const auto p = zedboard_platform();
  auto b = tiny_bounds();
  b.jobs = 1;
  const auto one = customize_ts(k, p, b);
  b.jobs = 4;
  const auto four = customize_ts(k, p, b);
  REQUIRE(one.top.size() == four.top.size());
  for (std::size_t i = 0; i < one.top.size(); ++i) CHECK(one.top[i].config == four.top[i].config);
  CHECK(one.stats.scheduler_invocations == four.stats.scheduler_invocations);
  const auto es1 = customize_es(k, p, b);
  b.jobs = 1;
  const auto es4 = customize_es(k, p, b);
  CHECK(es1.best.config == es4.best.config);
}

TEST_CASE("exhaustive search cap") {
  const auto k = builtin_kernel_from_spec("MM?size=8");
  auto b = tiny_bounds();
  b.es_cap = es_space_size(k, b) - 1;
  CHECK_THROWS_AS(customize_es(k, zedboard_platform(), b), CapExceededError);
  b.es_cap += 1;
  CHECK_NOTHROW(customize_es(k, zedboard_platform(), b));
}

TEST_CASE("infeasible budgets report the closest design's violations") {
  const auto k = builtin_kernel_from_spec("MM?size=8");
  auto p = zedboard_platform();
  p.budgets.lut = 100;
  try {
    customize_ts(k, p, tiny_bounds());
    FAIL("expected InfeasibleError");
  } catch (const InfeasibleError& e) {
    REQUIRE(!e.violations().empty());
    CHECK(e.violations()[0].constraint == "lut");
  }
  auto b = tiny_bounds();
  b.ibuf_depths = {1};
  CHECK_THROWS_AS(customize_ts(k, zedboard_platform(), b), InfeasibleError);
}
