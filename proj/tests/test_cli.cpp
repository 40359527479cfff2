#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <unistd.h>

#include "doctest.h"
#include "dough/cli.hpp"

using namespace dough;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  Run r;
  r.code = run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string fixture(const std::string& rel) { return std::string(DOUGH_SOURCE_DIR) + "/fixtures/" + rel; }

fs::path scratch() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / ("dough_cli_" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string tmp(const std::string& name) { return (scratch() / name).string(); }

json platform_variant(const std::function<void(json&)>& edit, const std::string& name) {
  json p = read_json_file(fixture("zedboard.json"));
  edit(p);
  write_json_file(tmp(name), p);
  return p;
}

const std::string kZed = fixture("zedboard.json");
const std::string kSmallBounds =
    R"({"max_rows":4,"max_cols":4,"max_unroll_product":16,"depths":{"D1":[1024],"D2":[1024],"D3":[1024],"D4":[1024],"D5":[1024]}})";

json strip_wall(json j) {
  j.erase("wall_seconds");
  for (auto* side : {&j["result"]})
    if (side->contains("stats")) (*side)["stats"].erase("wall_seconds");
  return j;
}

}  // namespace

TEST_CASE("customize reports an ok design and round-trips its JSON") {
  ::unsetenv(kPlatformEnv);
  const auto r = cli({"customize", "--kernel", "builtin:KM?nodes=512", "--method", "ts", "--platform", kZed, "--out",
                      tmp("km_ts.json")});
  REQUIRE_MESSAGE(r.code == exit_code::kOk, r.err);
  CHECK(r.out.find("best: u=") != std::string::npos);
  const json rep = read_json_file(tmp("km_ts.json"));
  CHECK(rep["command"] == "customize");
  CHECK(rep["invocation"]["method"] == "ts");
  CHECK(rep["invocation"]["kernel_name"] == "KM");
  const auto result = parse_as<CustomizationResult>(rep["result"], "result");
  CHECK(result.best.ok());
  CHECK(result.best.schedule != nullptr);
  CHECK(json(result) == rep["result"]);
  CHECK(parse_as<PlatformModel>(rep["invocation"]["platform"], "platform") == zedboard_platform());
  CHECK(parse_as<SearchBounds>(rep["invocation"]["bounds"], "bounds").epsilon == std::nullopt);
}

TEST_CASE("ES never loses to TS on the same bounds") {
  const auto ts = cli({"customize", "--kernel", "builtin:KM?nodes=64", "--platform", kZed, "--bounds", kSmallBounds,
                       "--out", tmp("ts.json")});
  const auto es = cli({"customize", "--kernel", "builtin:KM?nodes=64", "--platform", kZed, "--bounds", kSmallBounds,
                       "--method", "es", "--out", tmp("es.json")});
  REQUIRE(ts.code == 0);
  REQUIRE(es.code == 0);
  const auto t = read_json_file(tmp("ts.json"))["result"]["best"]["timing"]["total"].get<Cycles>();
  const auto e = read_json_file(tmp("es.json"))["result"]["best"]["timing"]["total"].get<Cycles>();
  CHECK(e <= t);
}

TEST_CASE("platform comes from the flag or the environment") {
  ::unsetenv(kPlatformEnv);
  auto r = cli({"customize", "--kernel", "builtin:MM?size=4"});
  CHECK(r.code == exit_code::kUsage);
  CHECK(r.err.find(kPlatformEnv) != std::string::npos);
  ::setenv(kPlatformEnv, kZed.c_str(), 1);
  r = cli({"customize", "--kernel", "builtin:MM?size=4", "--bounds", kSmallBounds});
  CHECK(r.code == exit_code::kOk);
  ::setenv(kPlatformEnv, tmp("does_not_exist.json").c_str(), 1);
  r = cli({"customize", "--kernel", "builtin:MM?size=4"});
  CHECK(r.code == exit_code::kUsage);
  ::unsetenv(kPlatformEnv);
}

TEST_CASE("usage errors exit 2") {
  CHECK(cli({}).code == exit_code::kUsage);
  CHECK(cli({"bogus"}).code == exit_code::kUsage);
  CHECK(cli({"customize", "--platform", kZed}).code == exit_code::kUsage);
  CHECK(cli({"customize", "--kernel", "builtin:MM?size=4", "--platform", kZed, "--method", "xs"}).code == 2);
  CHECK(cli({"customize", "--kernel", "builtin:NOPE", "--platform", kZed}).code == 2);
  CHECK(cli({"customize", "--kernel", tmp("missing.kdl"), "--platform", kZed}).code == 2);
  CHECK(cli({"customize", "--kernel", "builtin:MM?size=4", "--platform", kZed, "--epsilon", "1.5"}).code == 2);
  CHECK(cli({"customize", "--kernel", "builtin:MM?size=4", "--platform", kZed, "--bounds", "{\"max_rows\": 1}"}).code == 2);
  {
    std::ofstream(tmp("bad.kdl")) << "loop i in 0..4 {\n  Y[i] = X[i] +\n}\n";
    const auto r = cli({"schedule", "--kernel", tmp("bad.kdl"), "--unroll", "1"});
    CHECK(r.code == 2);
    CHECK(r.err.find("3:1") != std::string::npos);
  }
  CHECK(cli({"--help"}).code == 0);
  CHECK(cli({"--version"}).code == 0);
}

TEST_CASE("schedule command") {
  const auto r = cli({"schedule", "--kernel", "builtin:MM?size=8", "--unroll", "1,1,2", "--rows", "2", "--cols", "2",
                      "--dump", tmp("mm.dump.json"), "--dot", tmp("mm.dot"), "--out", tmp("mm.sched.json")});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const json dump = read_json_file(tmp("mm.dump.json"));
  const Schedule s = schedule_from_dump(dump);
  const auto k = builtin_kernel_from_spec("MM?size=8");
  const Factor u{1, 1, 2};
  const Dfg dfg = unroll(k, u);
  CHECK(validate_schedule(dfg, s, 2, 2, kMaxDataMemDepth).empty());
  // One load per cycle through the port PE, and no faster than the critical path.
  CHECK(s.length >= static_cast<Cycles>(dfg.count(NodeKind::Load)));
  CHECK(s.length >= dfg.critical_path());
  CHECK(s.length >= static_cast<Cycles>((dfg.size() + 3) / 4));
  CHECK(dump["programs"].size() == 4);
  CHECK(dump["programs"][0].size() == static_cast<std::size_t>(s.length));
  const auto hex = dump["programs"][0][0]["hex"].get<std::string>();
  CHECK(hex.size() == 18);
  CHECK(hex.rfind("0x", 0) == 0);
  const json rep = read_json_file(tmp("mm.sched.json"));
  CHECK(rep["result"]["dfg_cycles"] == s.length);
  CHECK(rep["result"]["min_depths"]["D3"] == s.length);
  CHECK(rep["result"]["min_depths"]["D4"] == 5);
  std::ifstream dot(tmp("mm.dot"));
  std::string first;
  std::getline(dot, first);
  CHECK(first.find("digraph") != std::string::npos);

  CHECK(cli({"schedule", "--kernel", "builtin:MM?size=100", "--unroll", "3,1,1"}).code == exit_code::kUsage);
  CHECK(cli({"schedule", "--kernel", "builtin:MM?size=8", "--unroll", "1,1"}).code == exit_code::kUsage);
  CHECK(cli({"schedule", "--kernel", "builtin:MM?size=8", "--unroll", "8,8,8", "--dm-depth", "16"}).code ==
        exit_code::kUnschedulable);
}

TEST_CASE("schedule dumps feed the simulator") {
  REQUIRE(cli({"schedule", "--kernel", "builtin:FIR?inputs=32&taps=4", "--unroll", "4,4", "--rows", "3", "--cols",
               "3", "--dump", tmp("fir.dump.json")})
              .code == 0);
  auto r = cli({"simulate", "--schedule", tmp("fir.dump.json"), "--group", "16,4", "--seed", "0..9", "--out",
                tmp("fir.sim.json")});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const json rep = read_json_file(tmp("fir.sim.json"));
  CHECK(rep["result"]["verify"]["entries"].size() == 10);
  CHECK(rep["result"]["verify"]["passed"] == 10);
  CHECK(rep["result"]["stats"]["groups"] == 2);

  // A word edited in the dump no longer matches the placements.
  json dump = read_json_file(tmp("fir.dump.json"));
  dump["programs"][0][0]["hex"] = "0x0000000000000001";
  write_json_file(tmp("fir.bad.json"), dump);
  CHECK(cli({"simulate", "--schedule", tmp("fir.bad.json")}).code == exit_code::kUsage);
  CHECK(cli({"simulate", "--schedule", tmp("fir.dump.json"), "--group", "3,4"}).code == exit_code::kUsage);
  CHECK(cli({"simulate"}).code == exit_code::kUsage);
}

TEST_CASE("simulate a customize design, then tamper with it") {
  REQUIRE(cli({"customize", "--kernel", "builtin:FIR?inputs=64&taps=8", "--platform", kZed, "--bounds", kSmallBounds,
               "--out", tmp("fir.design.json")})
              .code == 0);
  auto r = cli({"simulate", "--design", tmp("fir.design.json"), "--seed", "0..9", "--trace", tmp("fir.trace"),
                "--out", tmp("fir.design.sim.json")});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(read_json_file(tmp("fir.design.sim.json"))["result"]["verify"]["passed"] == 10);

  // Port discipline in the trace: one IBuf read and one OBuf write per cycle at most.
  std::ifstream trace(tmp("fir.trace"));
  std::map<std::tuple<int, int, int>, std::pair<int, int>> port;
  std::size_t lines = 0;
  for (std::string line; std::getline(trace, line); ++lines) {
    const json e = json::parse(line);
    auto& [reads, writes] = port[{e["group"].get<int>(), e["iter"].get<int>(), e["cycle"].get<int>()}];
    for (const auto& s : e["srcs"])
      if (s["sel"] == "IBUF") ++reads;
    if (e["writes"].contains("obuf")) ++writes;
  }
  CHECK(lines > 0);
  for (const auto& [key, rw] : port) {
    CHECK(rw.first <= 1);
    CHECK(rw.second <= 1);
  }

  json doc = read_json_file(tmp("fir.design.json"));
  auto& placements = doc["result"]["best"]["schedule"]["placements"];
  for (auto& p : placements)
    if (p["op"] == "MUL") {
      p["op"] = "ADD";
      break;
    }
  write_json_file(tmp("fir.tampered.json"), doc);
  r = cli({"simulate", "--design", tmp("fir.tampered.json"), "--seed", "0..2"});
  CHECK(r.code == exit_code::kMismatch);
  CHECK(r.out.find("FAIL") != std::string::npos);

  std::ofstream(tmp("corrupt.json")) << R"({"result": {"best": 3}})";
  CHECK(cli({"simulate", "--design", tmp("corrupt.json")}).code == exit_code::kUsage);
  std::ofstream(tmp("truncated.json")) << R"({"result": )";
  CHECK(cli({"simulate", "--design", tmp("truncated.json")}).code == exit_code::kUsage);
  doc = read_json_file(tmp("fir.design.json"));
  doc["result"]["best"]["config"]["u"] = json::array({3, 8});
  write_json_file(tmp("fir.badu.json"), doc);
  CHECK(cli({"simulate", "--design", tmp("fir.badu.json")}).code == exit_code::kUsage);
}

TEST_CASE("estimate: reference TS configuration on MM(100)") {
  const std::string cfg = R"({"u":[1,5,100],"g":[50,5,100],"rows":4,"cols":4,"D1":8192,"D2":8192,"D3":1024})";
  auto r = cli({"estimate", "--kernel", fixture("table2/mm.kdl"), "--platform", kZed, "--config", cfg, "--dfg-cycles",
                "700", "--out", tmp("est.json")});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const json rep = read_json_file(tmp("est.json"));
  std::map<std::string, json> rows;
  for (const auto& c : rep["result"]["constraints"]) rows[c["constraint"]] = c;
  CHECK(rows["in_buffer"]["value"] == 5500);
  CHECK(rows["in_buffer"]["bound"] == 8192);
  CHECK(rows["in_buffer"]["ok"] == true);
  CHECK(rows["out_buffer"]["value"] == 250);
  CHECK(rows["instr_mem"]["ok"] == true);
  CHECK(r.out.find("5500 <=") != std::string::npos);
  const auto timing = rep["result"]["design"]["timing"];
  CHECK(timing["compu"] == 2000 * 700);
  CHECK(timing["commu"] == 40 * ((500 + 2 * 5500) + (500 + 2 * 250)));

  platform_variant([](json& p) { p["dma"] = {{"segments", {{{"lower_bound", 0}, {"intercept", 0}, {"slope", 0}}}}}; },
                   "zero_dma.json");
  r = cli({"estimate", "--kernel", fixture("table2/mm.kdl"), "--platform", tmp("zero_dma.json"), "--config", cfg,
           "--dfg-cycles", "700", "--out", tmp("est0.json")});
  REQUIRE(r.code == 0);
  CHECK(read_json_file(tmp("est0.json"))["result"]["design"]["timing"]["commu"] == 0);

  const std::string tiny = R"({"u":[1,1,2],"g":[1,1,2],"rows":2,"cols":2,"D3":1})";
  r = cli({"estimate", "--kernel", "builtin:MM?size=8", "--platform", kZed, "--config", tiny, "--out", tmp("est1.json")});
  REQUIRE(r.code == 0);
  const json e1 = read_json_file(tmp("est1.json"));
  CHECK(e1["result"]["feasible"] == false);
  CHECK(e1["result"]["design"]["violations"][0]["constraint"] == "instr_mem");
  CHECK(r.out.find("VIOLATED") != std::string::npos);

  CHECK(cli({"estimate", "--kernel", "builtin:MM?size=8", "--platform", kZed, "--config", "{\"u\":[1,1,2]}"}).code == 2);
  CHECK(cli({"estimate", "--kernel", "builtin:MM?size=8", "--platform", kZed, "--config",
             R"({"u":[1,1,3],"g":[1,1,3],"rows":2,"cols":2})"})
            .code == 2);
  CHECK(cli({"estimate", "--kernel", "builtin:MM?size=8", "--platform", kZed, "--config",
             R"({"u":[1,1,2],"g":[1,1,2],"rows":2,"cols":2,"D1":1000})"})
            .code == 2);
}

TEST_CASE("compare at desk scale") {
  const std::string bounds =
      R"({"max_rows":10,"max_cols":10,"max_unroll_product":64,"depths":{"D1":[1024],"D2":[1024],"D3":[1024],"D4":[1024],"D5":[1024]}})";
  auto r = cli({"compare", "--kernel", "builtin:FIR?inputs=64&taps=8", "--platform", kZed, "--bounds", bounds, "--out",
                tmp("cmp.json")});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const json ratios = read_json_file(tmp("cmp.json"))["result"]["ratios"];
  CHECK(ratios["invocations_es_over_ts"].get<double>() >= 5.0);
  CHECK(ratios["runtime_ts_over_es"].get<double>() <= 1.10);
  CHECK(ratios["runtime_ts_over_es"].get<double>() >= 1.0);

  r = cli({"compare", "--kernel", "builtin:FIR?inputs=64&taps=8", "--platform", kZed, "--bounds", kSmallBounds,
           "--epsilon", "1e-9", "--out", tmp("cmp0.json")});
  REQUIRE(r.code == 0);
  const json exact = read_json_file(tmp("cmp0.json"))["result"];
  CHECK(exact["ratios"]["runtime_ts_over_es"].get<double>() == 1.0);
  CHECK(exact["ts"]["best"]["config"] == exact["es"]["best"]["config"]);
  // Plateaus (zero improvement) are still pruned at 1e-9; only epsilon 0 schedules everything.
  r = cli({"compare", "--kernel", "builtin:FIR?inputs=64&taps=8", "--platform", kZed, "--bounds", kSmallBounds,
           "--epsilon", "0", "--out", tmp("cmp00.json")});
  REQUIRE(r.code == 0);
  CHECK(read_json_file(tmp("cmp00.json"))["result"]["ratios"]["invocations_es_over_ts"].get<double>() == 1.0);
}

TEST_CASE("failure exit codes") {
  platform_variant([](json& p) { p["budgets"]["lut"] = 100; }, "tiny_lut.json");
  auto r = cli({"customize", "--kernel", "builtin:MM?size=8", "--platform", tmp("tiny_lut.json")});
  CHECK(r.code == exit_code::kInfeasible);
  CHECK(r.err.find("lut:") != std::string::npos);
  r = cli({"customize", "--kernel", "builtin:MM?size=8", "--platform", kZed, "--method", "es", "--es-cap", "10"});
  CHECK(r.code == exit_code::kCapExceeded);
  r = cli({"compare", "--kernel", "builtin:MM?size=8", "--platform", kZed, "--es-cap", "10"});
  CHECK(r.code == exit_code::kCapExceeded);
}

TEST_CASE("reports are reproducible and independent of --jobs") {
  const std::vector<std::string> base = {"customize", "--kernel", "builtin:SE?rows=8&cols=8", "--platform", kZed,
                                         "--bounds",  kSmallBounds};
  auto args = base;
  args.insert(args.end(), {"--jobs", "1", "--out", tmp("rep1.json")});
  REQUIRE(cli(args).code == 0);
  args = base;
  args.insert(args.end(), {"--jobs", "3", "--out", tmp("rep3.json")});
  REQUIRE(cli(args).code == 0);
  // Re-run from the echoed invocation alone.
  const json first = read_json_file(tmp("rep1.json"));
  const auto& inv = first["invocation"];
  write_json_file(tmp("echo_platform.json"), inv["platform"]);
  std::ofstream(tmp("echo.kdl")) << inv["kernel_source"].get<std::string>();
  REQUIRE(cli({"customize", "--kernel", tmp("echo.kdl"), "--platform", tmp("echo_platform.json"), "--bounds",
               inv["bounds"].dump(), "--method", inv["method"], "--out", tmp("rep_echo.json")})
              .code == 0);
  const auto payload = [](const std::string& path) { return strip_wall(read_json_file(path))["result"]; };
  CHECK(payload(tmp("rep1.json")) == payload(tmp("rep3.json")));
  CHECK(payload(tmp("rep1.json")) == payload(tmp("rep_echo.json")));
}

TEST_CASE("factor and seed parsing") {
  CHECK(parse_factor("1,1,2") == Factor{1, 1, 2});
  CHECK(parse_factor("4x2") == Factor{4, 2});
  CHECK_THROWS_AS(parse_factor("1,,2"), InvalidArgument);
  CHECK_THROWS_AS(parse_factor("0,1"), InvalidArgument);
  CHECK_THROWS_AS(parse_factor("a"), InvalidArgument);
  CHECK(parse_seeds("0..9").size() == 10);
  CHECK(parse_seeds("7") == std::vector<std::uint64_t>{7});
  CHECK(parse_seeds("1,4") == std::vector<std::uint64_t>{1, 4});
  CHECK_THROWS_AS(parse_seeds("9..0"), InvalidArgument);
  CHECK_THROWS_AS(parse_seeds("-1"), InvalidArgument);
}
