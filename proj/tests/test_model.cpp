#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "dough/io.hpp"

using namespace dough;

namespace {

std::string fixture(const std::string& rel) { return std::string(DOUGH_SOURCE_DIR) + "/fixtures/" + rel; }

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("bram block vectors") {
  CHECK(bram_blocks(1024, 32) == 1);
  CHECK(bram_blocks(8192, 32) == 8);
  CHECK(bram_blocks(1024, 64) == 2);
  CHECK(bram_blocks(1025, 36) == 2);
  CHECK(bram_blocks(1, 1) == 1);
  CHECK(bram_blocks(1024, 36) == 1);
  CHECK(bram_blocks(1024, 37) == 2);
  CHECK(bram_blocks(512, 72, {512, 72}) == 1);
  CHECK_THROWS_AS(bram_blocks(0, 32), InvalidArgument);
  CHECK_THROWS_AS(bram_blocks(16, 0), InvalidArgument);
}

TEST_CASE("bram capacity invariant") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<Words> depth(1, 1 << 16);
  std::uniform_int_distribution<int> width(1, 128);
  for (int t = 0; t < 1000; ++t) {
    const Words d = depth(rng);
    const int w = width(rng);
    const auto n = bram_blocks(d, w);
    // Enough bits, enough rows, and no more blocks than the aspect forces.
    CHECK(n * 1024 * 36 >= d * w);
    CHECK(n == ((d + 1023) / 1024) * ((w + 35) / 36));
    CHECK(bram_blocks(d + 1, w) >= n);
    CHECK(bram_blocks(d, w + 1) >= n);
  }
}

TEST_CASE("resource model is linear in the PE count") {
  const auto p = zedboard_platform();
  OverlayConfig c;
  for (int r = 2; r <= 6; ++r)
    for (int k = 2; k <= 6; ++k) {
      c.rows = r;
      c.cols = k;
      const auto res = resource_estimate(c, p);
      CHECK(res.lut == p.alpha.lut * r * k + p.beta.lut);
      CHECK(res.ff == p.alpha.ff * r * k + p.beta.ff);
      CHECK(res.dsp == p.alpha.dsp * r * k + p.beta.dsp);
      // Per PE: DM (1024 x 32) and IM (1024 x 64); shared: IBuf, OBuf, two address buffers.
      CHECK(res.bram == r * k * (1 + 2) + 1 + 1 + 1 + 1);
    }
  c.rows = c.cols = 4;
  c.ibuf_depth = 8192;
  c.imem_depth = 4096;
  c.fit_address_widths();
  CHECK(resource_estimate(c, p).bram == 16 * (1 + 8) + 8 + 1 + 1 + 1);
}

TEST_CASE("budget checks are inclusive") {
  auto p = zedboard_platform();
  OverlayConfig c;
  const auto res = resource_estimate(c, p);
  p.budgets = res;
  CHECK(check_budget(res, p).empty());
  p.budgets.dsp -= 1;
  const auto v = check_budget(res, p);
  REQUIRE(v.size() == 1);
  CHECK(v[0] == Violation{"dsp", res.dsp, res.dsp - 1});
}

TEST_CASE("overlay validation") {
  OverlayConfig c;
  CHECK(validate_overlay(c).empty());
  c.ibuf_depth = 1000;
  CHECK(!validate_overlay(c).empty());
  c = OverlayConfig{};
  c.dm_depth = 2048;
  CHECK(!validate_overlay(c).empty());
  c = OverlayConfig{};
  c.ibuf_depth = 4096;
  CHECK(!validate_overlay(c).empty());  // W2 = 10 cannot address 4096 words
  c.fit_address_widths();
  CHECK(validate_overlay(c).empty());
  CHECK(c.in_addr_width == 12);
}

TEST_CASE("piecewise DMA latency") {
  DmaModel m{{{0, 100, 4}, {256, 612, 2}, {4096, 4804, 1}}};
  validate_dma(m);
  CHECK(dma_latency(m, 0) == 0);
  CHECK(dma_latency(m, 1) == 104);
  CHECK(dma_latency(m, 255) == 100 + 4 * 255);
  CHECK(dma_latency(m, 256) == 612 + 2 * 256);
  CHECK(dma_latency(m, 5000) == 9804);
  for (Words x = 1; x < 6000; x += 7) CHECK(dma_latency(m, x + 1) >= dma_latency(m, x));
  CHECK_THROWS_AS(dma_latency(m, -1), InvalidArgument);
  CHECK_THROWS_AS(validate_dma(DmaModel{}), InvalidArgument);
  CHECK_THROWS_AS(validate_dma(DmaModel{{{1, 0, 1}}}), InvalidArgument);
  CHECK_THROWS_AS(validate_dma(DmaModel{{{0, 0, 1}, {0, 5, 1}}}), InvalidArgument);
  CHECK_THROWS_AS(validate_dma(DmaModel{{{0, 0, -1}}}), InvalidArgument);
  CHECK_THROWS_AS(validate_dma(DmaModel{{{0, 500, 2}, {100, 0, 1}}}), InvalidArgument);  // drops at 100
  CHECK(dma_latency(DmaModel::zero(), 12345) == 0);
}

TEST_CASE("timing model") {
  const Shape l{100, 100, 100};
  const auto dma = DmaModel::linear(500, 2);
  const auto t = timing_report(l, {1, 5, 100}, {50, 5, 100}, 609, 5500, 250, dma, 250e6);
  CHECK(t.dfg_reps == 2000);
  CHECK(t.groups == 40);
  CHECK(t.compu == 2000 * 609);
  CHECK(t.commu == 40 * (500 + 2 * 5500 + 500 + 2 * 250));
  CHECK(t.total == t.compu + t.commu);
  CHECK(t.seconds == doctest::Approx(t.total / 250e6));
  CHECK(commu_time(l, {100, 100, 100}, 0, 0, dma) == 0);
  CHECK_THROWS_AS(tile_count(l, {3, 1, 1}), InvalidArgument);
  CHECK_THROWS_AS(tile_count(l, {1, 1}), InvalidArgument);
  CHECK_THROWS_AS(compu_time({1 << 30, 1 << 30}, {1, 1}, Cycles{1} << 40), Error);
}

TEST_CASE("constraint boundaries flip exactly at the bound") {
  const auto p = zedboard_platform();
  FullConfig cfg;
  cfg.u = {2, 2};
  cfg.g = {8, 2};  // 4 iterations per group
  const Words in_u = 10, out_u = 3, in_g = 300, out_g = 40;
  const Cycles len = 200;
  const auto names = [&](const FullConfig& c, Words iu, Words ou, Words ig, Words og, Cycles cyc) {
    std::vector<std::string> out;
    for (const auto& v : check_constraints(c, p, iu, ou, ig, og, cyc)) out.push_back(v.constraint);
    return out;
  };
  cfg.overlay.ibuf_depth = 512;
  cfg.overlay.obuf_depth = 64;
  cfg.overlay.imem_depth = 256;
  cfg.overlay.in_addr_depth = 64;
  cfg.overlay.out_addr_depth = 16;
  CHECK(names(cfg, in_u, out_u, in_g, out_g, len).empty());
  CHECK(names(cfg, in_u, out_u, 512, out_g, len).empty());
  CHECK(names(cfg, in_u, out_u, 513, out_g, len) == std::vector<std::string>{"in_buffer"});
  CHECK(names(cfg, in_u, out_u, in_g, 65, len) == std::vector<std::string>{"out_buffer"});
  CHECK(names(cfg, in_u, out_u, in_g, out_g, 256).empty());
  CHECK(names(cfg, in_u, out_u, in_g, out_g, 257) == std::vector<std::string>{"instr_mem"});
  CHECK(names(cfg, 16, out_u, in_g, out_g, len).empty());
  CHECK(names(cfg, 17, out_u, in_g, out_g, len) == std::vector<std::string>{"in_addr"});
  CHECK(names(cfg, in_u, 4, in_g, out_g, len).empty());
  CHECK(names(cfg, in_u, 5, in_g, out_g, len) == std::vector<std::string>{"out_addr"});
}

TEST_CASE("platform fixture and JSON round trips") {
  const auto p = load_platform(fixture("zedboard.json"));
  CHECK(p == zedboard_platform());
  CHECK(json(p).get<PlatformModel>() == p);
  json bad = json(p);
  bad["budgets"].erase("lut");
  CHECK_THROWS_AS(parse_as<PlatformModel>(bad, "platform"), InvalidArgument);
  bad = json(p);
  bad["epsilon"] = 1.5;
  CHECK_THROWS_AS(parse_as<PlatformModel>(bad, "platform"), InvalidArgument);
  bad = json(p);
  bad["dma"] = {{"intercept", 10}, {"slope", 3}};
  CHECK(parse_as<PlatformModel>(bad, "platform").dma == DmaModel::linear(10, 3));

  SearchBounds b;
  b.max_rows = 7;
  b.size_space = SizeSpace::Grid;
  b.ibuf_depths = {256, 4096};
  b.epsilon = 0.1;
  const auto b2 = json(b).get<SearchBounds>();
  CHECK(json(b2) == json(b));
  OverlayConfig o;
  o.rows = 3;
  o.ibuf_depth = 8192;
  o.fit_address_widths();
  CHECK(json(o).get<OverlayConfig>() == o);
}

TEST_CASE("benchmark kernel fixtures match the builtin generators") {
  const std::pair<const char*, const char*> files[] = {
      {"table2/mm.kdl", "MM"}, {"table2/fir.kdl", "FIR"}, {"table2/se.kdl", "SE"}, {"table2/km.kdl", "KM"}};
  for (const auto& [file, name] : files) {
    const auto parsed = parse_kernel(slurp(fixture(file)), name);
    const auto builtin = builtin_kernel_from_spec(name);
    CHECK(parsed.source == builtin.source);
    CHECK(parsed.bounds == builtin.bounds);
  }
  CHECK(builtin_kernel_from_spec("MM").bounds == Shape{100, 100, 100});
  CHECK(builtin_kernel_from_spec("FIR").bounds == Shape{10000, 50});
  CHECK(builtin_kernel_from_spec("SE").bounds == Shape{128, 128, 3, 3});
  CHECK(builtin_kernel_from_spec("KM").bounds == Shape{5000, 4, 2});
}

TEST_CASE("reference configuration fixtures are well formed") {
  for (const char* name : {"mm", "fir", "se", "km"}) {
    const json doc = read_json_file(fixture(std::string("table3/") + name + ".json"));
    const auto k = parse_kernel(slurp(fixture("table3/" + doc["kernel"].get<std::string>())), name);
    for (const char* row : {"Base", "TS", "ES"}) {
      const auto& c = doc["configs"][row];
      const auto u = c["u"].get<Factor>();
      const auto g = c["g"].get<Factor>();
      CHECK(u.size() == k.depth());
      CHECK(is_valid_group(k, u, g));
      CHECK(c["rows"].get<int>() >= 2);
      CHECK(c["text"].get<std::string>().front() == '(');
    }
  }
}
