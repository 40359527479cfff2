#include <algorithm>
#include <random>
#include <set>

#include "doctest.h"
#include "dough/kernel.hpp"

using namespace dough;

namespace {

// Brute-force distinct-element enumeration over a tile at the origin.
IoCounts io_oracle(const LoopKernel& k, const Factor& f) {
  std::set<std::pair<int, std::vector<std::int64_t>>> in, out, acc;
  std::function<void(const Expr&, const std::vector<std::int64_t>&)> walk =
      [&](const Expr& e, const std::vector<std::int64_t>& p) {
        if (e.kind == Expr::Kind::Ref) in.insert({e.ref.array, e.ref.eval(p)});
        if (e.kind == Expr::Kind::Sum) {
          auto q = p;
          for (std::int64_t x = 0; x < k.bounds[static_cast<std::size_t>(e.sum_var)]; ++x) {
            q[static_cast<std::size_t>(e.sum_var)] = x;
            walk(e.args[0], q);
          }
          return;
        }
        for (const auto& a : e.args) walk(a, p);
      };
  for_each_point(f, [&](const std::vector<std::int64_t>& p) {
    for (const auto& s : k.statements) {
      walk(s.value, p);
      out.insert({s.target.array, s.target.eval(p)});
      if (needs_accumulator(k, s, f)) acc.insert({s.target.array, s.target.eval(p)});
    }
  });
  return {static_cast<Words>(in.size() + acc.size()), static_cast<Words>(out.size())};
}

ArrayImage identity(std::int64_t n) {
  ArrayImage img{{n, n}, std::vector<std::int64_t>(static_cast<std::size_t>(n * n), 0)};
  for (std::int64_t i = 0; i < n; ++i) img.at({i, i}) = 1;
  return img;
}

}  // namespace

TEST_CASE("parse matrix multiply") {
  auto k = parse_kernel("loop i in 0..100, j in 0..100, k in 0..100 { C[i][j] += A[i][k]*B[k][j] }");
  CHECK(k.bounds == Shape{100, 100, 100});
  REQUIRE(k.statements.size() == 1);
  CHECK(k.statements[0].update == Update::Sum);
  CHECK(k.array(k.find_array("C")).role == ArrayRole::Output);
  CHECK(k.array(k.find_array("A")).extents == Shape{100, 100});
}

TEST_CASE("parse identity copy") {
  auto k = parse_kernel("loop i in 0..4 { Y[i] = X[i] }");
  CHECK(k.depth() == 1);
  CHECK(k.statements[0].update == Update::Assign);
}

TEST_CASE("parse rejects undeclared loop variable") {
  CHECK_THROWS_AS(parse_kernel("loop i in 0..4 { Y[i] = X[i+j] }"), SemanticError);
}

TEST_CASE("parse errors carry line and column") {
  try {
    parse_kernel("loop i in 0..4 {\n  Y[i] = X[i] $ 1;\n}");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
    CHECK(e.column() == 15);
  }
  CHECK_THROWS_AS(parse_kernel("loop i in 0..4 { Y[i] = X[i*i] }"), SemanticError);
  CHECK_THROWS_AS(parse_kernel("loop i in 0..4 { Y[i] = foo(X[i]) }"), SemanticError);
  CHECK_THROWS_AS(parse_kernel("in X[4]; out Y[4]; loop i in 0..4 { Y[i] = X[i+1] }"), SemanticError);
  CHECK_THROWS_AS(parse_kernel("in X[4]; out Y[4]; loop i in 0..4 { Y[i] = Z[i] }"), SemanticError);
  CHECK_THROWS_AS(parse_kernel("loop i in 0..4 { Y[i] = X[i-1] }"), SemanticError);
  CHECK_THROWS_AS(parse_kernel("loop i in 1..4 { Y[i] = X[i] }"), SemanticError);
}

TEST_CASE("to_kdl round-trips builtins") {
  for (const char* spec : {"MM?size=4", "FIR?inputs=16&taps=4", "SE?rows=4&cols=4", "KM?nodes=8&centroids=2&dims=2"}) {
    auto k = builtin_kernel_from_spec(spec);
    auto again = parse_kernel(to_kdl(k));
    CHECK(to_kdl(again) == to_kdl(k));
    CHECK(again.bounds == k.bounds);
  }
}

TEST_CASE("builtin shapes") {
  CHECK(builtin_kernel("MM", {{"size", 100}}).bounds == Shape{100, 100, 100});
  CHECK(builtin_kernel("SE", {{"rows", 128}, {"cols", 128}}).bounds == Shape{128, 128, 3, 3});
  CHECK(builtin_kernel("KM", {{"nodes", 5000}, {"centroids", 4}, {"dims", 2}}).bounds == Shape{5000, 4, 2});
  CHECK(builtin_kernel("FIR", {}).bounds == Shape{10000, 50});
  CHECK_THROWS_AS(builtin_kernel("XX", {}), InvalidArgument);
  CHECK_THROWS_AS(builtin_kernel("MM", {{"size", 0}}), InvalidArgument);
  CHECK_THROWS_AS(builtin_kernel_from_spec("MM?size=abc"), InvalidArgument);
}

TEST_CASE("unroll factor enumeration") {
  auto k = parse_kernel("loop i in 0..4, j in 0..6 { Y[i][j] = X[i][j] }");
  auto all = enumerate_unroll_factors(k, {8});
  for (const Factor& f : std::vector<Factor>{{1, 1}, {2, 1}, {1, 2}, {4, 1}, {2, 2}, {1, 3}, {2, 3}, {4, 2}, {1, 6}})
    CHECK(std::find(all.begin(), all.end(), f) != all.end());
  CHECK(std::find(all.begin(), all.end(), Factor{4, 3}) == all.end());
  for (std::size_t i = 1; i < all.size(); ++i) {
    const auto pa = product(all[i - 1]);
    const auto pb = product(all[i]);
    CHECK((pa < pb || (pa == pb && all[i - 1] < all[i])));
  }
  auto one = parse_kernel("loop i in 0..5 { Y[i] = X[i] }");
  CHECK(enumerate_unroll_factors(one, {1}) == std::vector<Factor>{{1}});
  CHECK(enumerate_unroll_factors(one, {}) == std::vector<Factor>{{1}});
  auto mm = builtin_kernel("MM", {{"size", 100}});
  auto mmf = enumerate_unroll_factors(mm, {500});
  CHECK(std::find(mmf.begin(), mmf.end(), Factor{1, 5, 100}) != mmf.end());
}

TEST_CASE("unroll successors advance one divisor") {
  auto k = parse_kernel("loop i in 0..4, j in 0..6 { Y[i][j] = X[i][j] }");
  auto s = unroll_successors(k, {2, 2}, {100});
  CHECK(s == std::vector<Factor>{{4, 2}, {2, 3}});
}

TEST_CASE("km keeps reduced dims whole") {
  auto km = builtin_kernel("KM", {{"nodes", 16}, {"centroids", 4}, {"dims", 2}});
  CHECK(minimal_unroll(km) == Factor{1, 4, 2});
  CHECK_FALSE(is_valid_unroll(km, {1, 2, 2}));
  CHECK(is_valid_unroll(km, {4, 4, 2}));
}

TEST_CASE("group factor enumeration") {
  auto mm = builtin_kernel("MM", {{"size", 100}});
  auto g = enumerate_group_factors(mm, {1, 5, 100});
  CHECK(std::find(g.begin(), g.end(), Factor{50, 5, 100}) != g.end());
  for (const auto& f : g) CHECK(is_valid_group(mm, {1, 5, 100}, f));
  CHECK(enumerate_group_factors(mm, {100, 100, 100}) == std::vector<Factor>{{100, 100, 100}});
  auto fir = builtin_kernel("FIR", {{"inputs", 10000}, {"taps", 50}});
  auto fg = enumerate_group_factors(fir, {50, 50});
  CHECK(std::find(fg.begin(), fg.end(), Factor{2000, 50}) != fg.end());
  auto capped = enumerate_group_factors(fir, {50, 50}, {Words{2100}});
  for (const auto& f : capped) CHECK(io_counts(fir, f).in <= 2100);
}

TEST_CASE("io counts") {
  auto mm = builtin_kernel("MM", {{"size", 100}});
  CHECK(io_counts(mm, {50, 5, 100}) == IoCounts{5500, 250});
  CHECK(io_counts(mm, {1, 1, 1}) == IoCounts{3, 1});
  auto fir = builtin_kernel("FIR", {{"inputs", 10000}, {"taps", 50}});
  CHECK(io_counts(fir, {2000, 50}) == IoCounts{2099, 2000});
  for (const char* spec : {"MM?size=6", "FIR?inputs=12&taps=4", "SE?rows=4&cols=6", "KM?nodes=6&centroids=3&dims=2"}) {
    auto k = builtin_kernel_from_spec(spec);
    for (const auto& u : enumerate_unroll_factors(k, {36}))
      for (const auto& g : enumerate_group_factors(k, u)) {
        CHECK(io_counts(k, g) == io_oracle(k, g));
      }
  }
}

TEST_CASE("io counts are monotone in the factor") {
  auto k = builtin_kernel_from_spec("SE?rows=4&cols=4");
  auto gs = enumerate_group_factors(k, minimal_unroll(k));
  for (const auto& a : gs)
    for (const auto& b : gs) {
      bool le = true;
      for (std::size_t i = 0; i < a.size(); ++i) le = le && a[i] <= b[i];
      if (!le) continue;
      const auto ia = io_counts(k, a);
      const auto ib = io_counts(k, b);
      CHECK(ia.out <= ib.out);
      // Inputs include partial accumulators, which vanish once a reduction dim is whole.
      const auto pure_a = ia.in - (needs_accumulator(k, k.statements[0], a) ? ia.out : 0);
      const auto pure_b = ib.in - (needs_accumulator(k, k.statements[0], b) ? ib.out : 0);
      CHECK(pure_a <= pure_b);
    }
}

TEST_CASE("unroll mm tiles") {
  auto mm = builtin_kernel("MM", {{"size", 4}});
  auto d = unroll(mm, {1, 1, 1});
  CHECK(d.count(NodeKind::Load) == 3);
  CHECK(d.count(NodeKind::Store) == 1);
  CHECK(d.count(NodeKind::Compute) == 2);
  int muls = 0, adds = 0;
  for (const auto& n : d.nodes) {
    if (n.kind != NodeKind::Compute) continue;
    muls += n.op == Op::MUL;
    adds += n.op == Op::ADD;
  }
  CHECK(muls == 1);
  CHECK(adds == 1);
  auto d2 = unroll(mm, {1, 1, 2});
  muls = adds = 0;
  for (const auto& n : d2.nodes) {
    if (n.kind != NodeKind::Compute) continue;
    muls += n.op == Op::MUL;
    adds += n.op == Op::ADD;
  }
  CHECK(muls == 2);
  CHECK(adds == 2);
  CHECK(d2.critical_path() == 5);  // load, mul, add, add, store
  CHECK(unroll(mm, {1, 1, 2}) == d2);
  CHECK_THROWS_AS(unroll(mm, {3, 1, 1}), InvalidArgument);
  CHECK_THROWS_AS(unroll(mm, {4, 4, 4}, {10, 32}), InvalidArgument);
}

TEST_CASE("copy kernel unrolls to a single pass") {
  auto k = parse_kernel("loop i in 0..4 { Y[i] = X[i] }");
  auto d = unroll(k, {1});
  CHECK(d.count(NodeKind::Compute) == 1);
  CHECK(d.nodes[1].op == Op::PASS);
}

TEST_CASE("dfg io matches io counts") {
  for (const char* spec : {"MM?size=4", "FIR?inputs=8&taps=4", "SE?rows=4&cols=4", "KM?nodes=4&centroids=4&dims=2"}) {
    auto k = builtin_kernel_from_spec(spec);
    for (const auto& u : enumerate_unroll_factors(k, {64})) {
      auto d = unroll(k, u);
      auto io = io_counts(k, u);
      CHECK(static_cast<Words>(d.count(NodeKind::Load)) == io.in);
      CHECK(static_cast<Words>(d.count(NodeKind::Store)) == io.out);
      CHECK_NOTHROW(validate_dfg(d));
    }
  }
}

TEST_CASE("validate_dfg rejects broken graphs") {
  auto d = unroll(builtin_kernel("MM", {{"size", 2}}), {1, 1, 1});
  std::size_t add = 0;
  for (const auto& n : d.nodes)
    if (n.kind == NodeKind::Compute && n.op == Op::ADD) add = static_cast<std::size_t>(n.id);
  auto bad = d;
  bad.nodes[add].operands[1] = Operand{};
  CHECK_THROWS_AS(validate_dfg(bad), SemanticError);
  bad = d;
  bad.nodes[add].operands[0] = Operand::of_node(static_cast<int>(add + 1));
  CHECK_THROWS_AS(validate_dfg(bad), SemanticError);
}

TEST_CASE("reference execution") {
  auto mm = builtin_kernel("MM", {{"size", 2}});
  ArraySet in{{"A", identity(2)}, {"B", identity(2)}};
  CHECK(reference_execute(mm, in).at("C") == identity(2));

  auto fir = builtin_kernel("FIR", {{"inputs", 16}, {"taps", 4}});
  auto fin = random_inputs(fir, 1);
  std::fill(fin.at("H").data.begin(), fin.at("H").data.end(), 0);
  fin.at("H").data[0] = 1;
  auto y = reference_execute(fir, fin).at("Y");
  for (std::int64_t i = 0; i < 16; ++i) CHECK(y.at({i}) == fin.at("X").at({i}));

  CHECK_THROWS_AS(reference_execute(mm, {{"A", identity(2)}}), InvalidArgument);
  CHECK_THROWS_AS(reference_execute(mm, {{"A", identity(3)}, {"B", identity(2)}}), InvalidArgument);
}

TEST_CASE("kmeans matches a direct nearest-centroid search") {
  auto km = builtin_kernel("KM", {{"nodes", 8}, {"centroids", 2}, {"dims", 2}});
  auto in = random_inputs(km, 7);
  auto out = reference_execute(km, in).at("ASSIGN");
  const auto& P = in.at("P");
  const auto& M = in.at("M");
  for (std::int64_t n = 0; n < 8; ++n) {
    std::int64_t best = 0;
    std::int64_t best_d = -1;
    for (std::int64_t c = 0; c < 2; ++c) {
      std::int64_t dist = 0;
      for (std::int64_t d = 0; d < 2; ++d) {
        const auto diff = P.at({n, d}) - M.at({c, d});
        dist += diff * diff;
      }
      if (best_d < 0 || dist < best_d) {
        best_d = dist;
        best = c;
      }
    }
    CHECK(out.at({n}) == best);
  }
}

TEST_CASE("modular arithmetic wraps at the word width") {
  auto k = parse_kernel("in X[1]; out Y[1]; loop i in 0..1 { Y[i] = X[i] * X[i] }");
  ArraySet in{{"X", ArrayImage{{1}, {65536}}}};
  CHECK(reference_execute(k, in, 32).at("Y").data[0] == 0);
  CHECK(reference_execute(k, in, 64).at("Y").data[0] == 4294967296LL);
}
