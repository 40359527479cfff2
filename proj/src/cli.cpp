#include "dough/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "CLI11.hpp"

#ifndef DOUGH_VERSION
#define DOUGH_VERSION "0.0.0"
#endif

namespace dough {

namespace {

struct Usage : Error {
  using Error::Error;
};

/// Functional mismatch found by verification; carries the finished report.
struct Mismatch : Error {
  using Error::Error;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json json_arg(const std::string& text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    try {
      return json::parse(text);
    } catch (const json::parse_error& e) {
      throw InvalidArgument(std::string("inline JSON: ") + e.what());
    }
  }
  return read_json_file(text);
}

std::pair<PlatformModel, std::string> resolve_platform(const std::string& arg, bool required) {
  std::string path = arg;
  if (path.empty())
    if (const char* env = std::getenv(kPlatformEnv)) path = env;
  if (path.empty()) {
    if (required) throw Usage(std::string("no platform given: pass --platform or set ") + kPlatformEnv);
    return {zedboard_platform(), "builtin:zedboard"};
  }
  return {load_platform(path), path};
}

struct BoundsArgs {
  std::string file;
  std::optional<int> max_rows, max_cols, top_k, jobs;
  std::optional<std::int64_t> max_unroll;
  std::optional<std::size_t> es_cap;
  std::optional<std::string> size_space;
  std::optional<double> epsilon;

  void add_to(CLI::App* app) {
    app->add_option("--bounds", file, "search bounds: JSON file or inline JSON object");
    app->add_option("--epsilon", epsilon, "pruning threshold in [0, 1); 0 disables pruning");
    app->add_option("--max-rows", max_rows);
    app->add_option("--max-cols", max_cols);
    app->add_option("--max-unroll", max_unroll, "cap on the product of the unroll factors");
    app->add_option("--size-space", size_space, "chain or grid")->check(CLI::IsMember({"chain", "grid"}));
    app->add_option("--es-cap", es_cap, "largest design space ES may enumerate");
    app->add_option("--top-k", top_k);
    app->add_option("--jobs", jobs, "worker threads for design-space exploration (0 = all cores)");
  }

  SearchBounds resolve() const {
    SearchBounds b = file.empty() ? SearchBounds{} : parse_as<SearchBounds>(json_arg(file), "bounds");
    if (max_rows) b.max_rows = *max_rows;
    if (max_cols) b.max_cols = *max_cols;
    if (max_unroll) b.max_unroll_product = *max_unroll;
    if (size_space) b.size_space = *size_space == "grid" ? SizeSpace::Grid : SizeSpace::Chain;
    if (es_cap) b.es_cap = *es_cap;
    if (top_k) b.top_k = static_cast<std::size_t>(*top_k);
    if (jobs) b.jobs = *jobs;
    if (epsilon) b.epsilon = *epsilon;
    return normalized(b);
  }
};

json report(const std::string& command, json invocation, json result, double wall) {
  return {{"tool", "cgra_dough"},
          {"version", DOUGH_VERSION},
          {"command", command},
          {"invocation", std::move(invocation)},
          {"result", std::move(result)},
          {"wall_seconds", wall}};
}

std::string depth_text(const OverlayConfig& o) {
  std::ostringstream ss;
  ss << o.dm_depth << '/' << o.ibuf_depth << '/' << o.obuf_depth << '/' << o.imem_depth << '/' << o.in_addr_depth
     << '/' << o.out_addr_depth;
  return ss.str();
}

void print_design_row(std::ostream& out, std::size_t rank, const EvaluatedDesign& d) {
  const auto& c = d.config;
  out << std::setw(4) << rank << "  " << std::left << std::setw(16) << shape_str(c.u) << std::setw(20)
      << shape_str(c.g) << std::setw(7) << (std::to_string(c.overlay.rows) + "x" + std::to_string(c.overlay.cols))
      << std::setw(34) << depth_text(c.overlay) << std::right << std::setw(14) << d.timing.total << std::setw(7)
      << d.resources.bram << '\n';
}

void print_result(std::ostream& out, const CustomizationResult& r) {
  const auto& b = r.best;
  out << "method " << r.method << "  epsilon " << r.epsilon << '\n';
  out << "best: u=" << shape_str(b.config.u) << " g=" << shape_str(b.config.g) << " array " << b.config.overlay.rows
      << "x" << b.config.overlay.cols << " D0..D5=" << depth_text(b.config.overlay) << '\n';
  out << "  RunTime " << b.timing.total << " cycles (compute " << b.timing.compu << ", DMA " << b.timing.commu
      << "), " << b.timing.seconds << " s\n";
  out << "  resources BRAM " << b.resources.bram << "  LUT " << b.resources.lut << "  FF " << b.resources.ff
      << "  DSP " << b.resources.dsp << '\n';
  out << "  DFG cycles " << b.dfg_cycles << "  In(g) " << b.io_g.in << "  Out(g) " << b.io_g.out << '\n';
  out << "rank  u               g                   array  D0/D1/D2/D3/D4/D5                       RunTime   BRAM\n";
  for (std::size_t i = 0; i < r.top.size(); ++i) print_design_row(out, i + 1, r.top[i]);
  out << "scheduler invocations " << r.stats.scheduler_invocations << ", feasible entries "
      << r.stats.feasible_entries << ", configurations " << r.stats.configs_evaluated << ", feasible designs "
      << r.stats.feasible_designs << ", " << r.stats.wall_seconds << " s\n";
}

json kernel_echo(const std::string& arg, const LoopKernel& k) {
  return {{"kernel", arg}, {"kernel_name", k.name}, {"kernel_source", to_kdl(k)}};
}

CustomizationResult run_method(const std::string& method, const LoopKernel& k, const PlatformModel& p,
                               const SearchBounds& b) {
  return method == "es" ? customize_es(k, p, b) : customize_ts(k, p, b);
}

void maybe_write(const std::string& path, const json& j) {
  if (!path.empty()) write_json_file(path, j);
}

// --- customize ---------------------------------------------------------------

struct CustomizeArgs {
  std::string kernel, platform, method = "ts", out;
  BoundsArgs bounds;
};

int cmd_customize(const CustomizeArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  const auto t0 = Clock::now();
  const auto k = load_kernel(a.kernel);
  const auto [platform, platform_src] = resolve_platform(a.platform, true);
  const auto bounds = a.bounds.resolve();
  const auto r = run_method(a.method, k, platform, bounds);
  print_result(out, r);
  json inv = kernel_echo(a.kernel, k);
  inv.update({{"argv", argv}, {"platform_file", platform_src}, {"platform", platform}, {"method", a.method},
              {"bounds", bounds}});
  maybe_write(a.out, report("customize", inv, r, seconds_since(t0)));
  return exit_code::kOk;
}

// --- schedule ----------------------------------------------------------------

struct ScheduleArgs {
  std::string kernel, unroll, dump, dot, out;
  int rows = 2, cols = 2;
  Words dm_depth = kMaxDataMemDepth;
  std::size_t max_nodes = 200000;
};

int cmd_schedule(const ScheduleArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  const auto t0 = Clock::now();
  const auto k = load_kernel(a.kernel);
  const Factor u = parse_factor(a.unroll);
  if (u.size() != k.depth())
    throw InvalidArgument("unroll factor has " + std::to_string(u.size()) + " entries for a depth-" +
                          std::to_string(k.depth()) + " loop nest");
  if (!is_valid_unroll(k, u))
    throw InvalidArgument("unroll factor " + shape_str(u) + " does not divide the loop bounds " +
                          shape_str(k.bounds) + " or splits a full-tile dimension");
  const Dfg dfg = unroll(k, u, {a.max_nodes, 32});
  SchedulerOptions opt;
  opt.dm_depth = a.dm_depth;
  ArraySweep sweep(dfg, opt);
  const Schedule& s = sweep.at(a.rows, a.cols);
  if (const auto problems = validate_schedule(dfg, s, a.rows, a.cols, a.dm_depth); !problems.empty())
    throw std::logic_error("scheduler produced an invalid schedule: " + problems.front());
  OverlayConfig probe;
  probe.rows = a.rows;
  probe.cols = a.cols;
  probe.imem_depth = std::max<Cycles>(s.length, 1);
  const auto image = emit_control_words(s, probe);
  const auto io = io_counts(k, u);
  const int dm_max = s.dm_used.empty() ? 0 : *std::max_element(s.dm_used.begin(), s.dm_used.end());

  out << "kernel " << k.name << "  u=" << shape_str(u) << "  array " << a.rows << "x" << a.cols << '\n';
  out << "  DFG nodes " << dfg.size() << " (loads " << dfg.count(NodeKind::Load) << ", stores "
      << dfg.count(NodeKind::Store) << "), critical path " << dfg.critical_path() << '\n';
  out << "  DFGCompuTime " << s.length << " cycles, CompuTime " << compu_time(k.bounds, u, s.length)
      << " cycles, routing hops " << s.hops << '\n';
  out << "  minimum depths with g = u: D0 " << dm_max << "  D3 " << s.length << "  D4 " << io.in << "  D5 " << io.out
      << '\n';

  json dump = schedule_dump(s, image);
  dump.update(kernel_echo(a.kernel, k));
  dump["u"] = u;
  maybe_write(a.dump, dump);
  if (!a.dot.empty()) {
    std::ofstream dot(a.dot);
    if (!dot) throw InvalidArgument("cannot write '" + a.dot + "'");
    dot << schedule_to_dot(dfg, s);
  }
  json inv = kernel_echo(a.kernel, k);
  inv.update({{"argv", argv}, {"u", u}, {"rows", a.rows}, {"cols", a.cols}, {"dm_depth", a.dm_depth}});
  json result = {{"dfg_nodes", dfg.size()},
                 {"loads", dfg.count(NodeKind::Load)},
                 {"stores", dfg.count(NodeKind::Store)},
                 {"dfg_cycles", s.length},
                 {"compu_time", compu_time(k.bounds, u, s.length)},
                 {"min_depths", {{"D0", dm_max}, {"D3", s.length}, {"D4", io.in}, {"D5", io.out}}},
                 {"schedule", dump}};
  maybe_write(a.out, report("schedule", inv, result, seconds_since(t0)));
  return exit_code::kOk;
}

// --- simulate ----------------------------------------------------------------

struct SimulateArgs {
  std::string design, schedule, group, platform, seeds = "0..9", trace, out;
  bool permissive = false;
};

const json& member(const json& j, const char* key, const char* what) {
  if (!j.is_object() || !j.contains(key)) throw InvalidArgument(std::string(what) + " has no '" + key + "'");
  return j.at(key);
}

Words fit_pow2(Words need) { return next_pow2(std::max<Words>(need, 1)); }

int cmd_simulate(const SimulateArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  const auto t0 = Clock::now();
  if (a.design.empty() == a.schedule.empty()) throw Usage("pass exactly one of --design and --schedule");
  LoopKernel k;
  FullConfig cfg;
  Schedule schedule;
  DmaModel dma;
  json source;
  if (!a.design.empty()) {
    // A customize report (best design), or a bare design object with the kernel source beside it.
    const json doc = read_json_file(a.design);
    const bool is_report = doc.is_object() && doc.contains("result");
    const json& holder = is_report ? member(doc, "invocation", "report") : doc;
    const json& design_json = is_report ? member(member(doc, "result", "report"), "best", "result") : doc;
    k = parse_kernel(parse_as<std::string>(member(holder, "kernel_source", "design"), "kernel source"), "design");
    const auto design = parse_as<EvaluatedDesign>(design_json, "design");
    if (!design.schedule) throw InvalidArgument("design has no schedule");
    cfg = design.config;
    schedule = *design.schedule;
    dma = holder.contains("platform") ? parse_as<PlatformModel>(holder.at("platform"), "platform").dma
                                      : resolve_platform(a.platform, false).first.dma;
    source = {{"design", a.design}};
  } else {
    const json dump = read_json_file(a.schedule);
    k = parse_kernel(parse_as<std::string>(member(dump, "kernel_source", "schedule dump"), "kernel source"), "dump");
    schedule = schedule_from_dump(dump);
    cfg.u = parse_as<Factor>(member(dump, "u", "schedule dump"), "unroll factor");
    cfg.g = a.group.empty() ? cfg.u : parse_factor(a.group);
    if (!is_valid_group(k, cfg.u, cfg.g))
      throw InvalidArgument("grouping factor " + shape_str(cfg.g) + " breaks u | g | l");
    const auto io_u = io_counts(k, cfg.u);
    const auto io_g = io_counts(k, cfg.g);
    const auto iters = tile_count(cfg.g, cfg.u);
    auto& o = cfg.overlay;
    o.rows = schedule.rows;
    o.cols = schedule.cols;
    o.ibuf_depth = fit_pow2(io_g.in);
    o.obuf_depth = fit_pow2(io_g.out);
    o.imem_depth = fit_pow2(schedule.length);
    o.in_addr_depth = fit_pow2(iters * io_u.in);
    o.out_addr_depth = fit_pow2(iters * io_u.out);
    o.fit_address_widths();
    dma = resolve_platform(a.platform, false).first.dma;
    source = {{"schedule", a.schedule}, {"g", cfg.g}};
  }
  if (!is_valid_unroll(k, cfg.u)) throw InvalidArgument("design unroll factor " + shape_str(cfg.u) + " is invalid");
  const Dfg dfg = unroll(k, cfg.u, {std::size_t{1} << 22, cfg.overlay.data_width});
  const auto image = build_image(k, cfg, dfg, schedule, dma);
  const auto seeds = parse_seeds(a.seeds);

  SimOptions opt;
  opt.strict = !a.permissive;
  std::ofstream trace;
  if (!a.trace.empty()) {
    trace.open(a.trace);
    if (!trace) throw InvalidArgument("cannot write '" + a.trace + "'");
    opt.trace = &trace;
  }
  json stats = nullptr;
  try {
    stats = simulate(k, image, random_inputs(k, seeds.front(), -1000, 1000, cfg.overlay.data_width), opt).stats;
  } catch (const SimulationError&) {
    // Reported per seed by verify below.
  }
  opt.trace = nullptr;
  const auto rep = verify(k, image, seeds, opt);

  out << "kernel " << k.name << "  u=" << shape_str(cfg.u) << "  g=" << shape_str(cfg.g) << "  array "
      << cfg.overlay.rows << "x" << cfg.overlay.cols << '\n';
  for (const auto& e : rep.entries)
    out << "  seed " << e.seed << ": " << (e.pass() ? "pass" : "FAIL") << "  cycles " << e.compute_cycles << " / "
        << e.expected_cycles << (e.detail.empty() ? "" : "  " + e.detail) << '\n';
  out << rep.passed() << "/" << rep.entries.size() << " seeds match the reference\n";

  json inv = kernel_echo(a.design.empty() ? a.schedule : a.design, k);
  inv.update(source);
  inv.update({{"argv", argv}, {"seeds", seeds}, {"strict", opt.strict}, {"config", cfg}, {"dma", dma}});
  maybe_write(a.out, report("simulate", inv, {{"verify", rep}, {"stats", stats}}, seconds_since(t0)));
  if (!rep.all_pass()) throw Mismatch("simulation does not match the reference");
  return exit_code::kOk;
}

// --- estimate ----------------------------------------------------------------

struct EstimateArgs {
  std::string kernel, platform, config, out;
  std::optional<Cycles> dfg_cycles;
};

FullConfig config_from_json(const json& j) {
  if (j.contains("overlay")) return parse_as<FullConfig>(j, "config");
  if (!j.is_object()) throw InvalidArgument("config must be a JSON object");
  json overlay = j.contains("depths") ? member(j, "depths", "config") : json::object();
  for (const char* key : {"rows", "cols", "data_width", "D0", "D1", "D2", "D3", "D4", "D5"})
    if (j.contains(key)) overlay[key] = j.at(key);
  json full = {{"u", member(j, "u", "config")}, {"g", member(j, "g", "config")}, {"overlay", overlay}};
  return parse_as<FullConfig>(full, "config");
}

int cmd_estimate(const EstimateArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  const auto t0 = Clock::now();
  const auto k = load_kernel(a.kernel);
  const auto [platform, platform_src] = resolve_platform(a.platform, true);
  const FullConfig cfg = config_from_json(json_arg(a.config));
  if (cfg.u.size() != k.depth() || cfg.g.size() != k.depth())
    throw InvalidArgument("u and g need one entry per loop level");
  if (!is_valid_unroll(k, cfg.u)) throw InvalidArgument("unroll factor " + shape_str(cfg.u) + " is invalid");
  if (!is_valid_group(k, cfg.u, cfg.g)) throw InvalidArgument("grouping factor " + shape_str(cfg.g) + " breaks u | g | l");

  FeasibleEntry e;
  e.u = cfg.u;
  e.rows = cfg.overlay.rows;
  e.cols = cfg.overlay.cols;
  e.io_u = io_counts(k, cfg.u);
  bool scheduled = false;
  if (a.dfg_cycles) {
    if (*a.dfg_cycles < 0) throw InvalidArgument("--dfg-cycles must be non-negative");
    e.dfg_cycles = *a.dfg_cycles;
  } else {
    SchedulerOptions opt;
    opt.dm_depth = cfg.overlay.dm_depth;
    ArraySweep sweep(unroll(k, cfg.u, {std::size_t{1} << 22, cfg.overlay.data_width}), opt);
    auto s = std::make_shared<const Schedule>(sweep.at(e.rows, e.cols));
    e.dfg_cycles = s->length;
    e.dm_used = s->dm_used.empty() ? 0 : *std::max_element(s->dm_used.begin(), s->dm_used.end());
    e.schedule = s;
    scheduled = true;
  }
  e.compu_time = compu_time(k.bounds, e.u, e.dfg_cycles);
  auto d = evaluate_config(k, e, cfg.g, cfg.overlay, platform);
  d.schedule.reset();

  const auto& o = d.config.overlay;
  const auto iters = tile_count(cfg.g, cfg.u);
  const auto res = d.resources;
  struct Row {
    const char* name;
    std::string lhs;
    std::int64_t value, bound;
  };
  std::vector<Row> rows;
  if (scheduled) rows.push_back({"data_mem", "DM words per PE", d.dm_used, o.dm_depth});
  rows.push_back({"in_buffer", "In(g)", d.io_g.in, o.ibuf_depth});
  rows.push_back({"out_buffer", "Out(g)", d.io_g.out, o.obuf_depth});
  rows.push_back({"instr_mem", "DFGCompuTime", d.dfg_cycles, o.imem_depth});
  rows.push_back({"in_addr", std::to_string(iters) + " x In(u)", iters * d.io_u.in, o.in_addr_depth});
  rows.push_back({"out_addr", std::to_string(iters) + " x Out(u)", iters * d.io_u.out, o.out_addr_depth});
  rows.push_back({"bram", "BRAM blocks", res.bram, platform.budgets.bram});
  rows.push_back({"lut", "LUT", res.lut, platform.budgets.lut});
  rows.push_back({"ff", "FF", res.ff, platform.budgets.ff});
  rows.push_back({"dsp", "DSP", res.dsp, platform.budgets.dsp});

  out << "kernel " << k.name << "  u=" << shape_str(cfg.u) << "  g=" << shape_str(cfg.g) << "  array " << o.rows
      << "x" << o.cols << "  D0..D5=" << depth_text(o) << '\n';
  out << "timing: CompuTime " << d.timing.compu << " + CommuTime " << d.timing.commu << " = RunTime "
      << d.timing.total << " cycles (" << d.timing.seconds << " s), " << d.timing.dfg_reps << " DFG runs in "
      << d.timing.groups << " groups\n";
  out << "resources: BRAM " << res.bram << "  LUT " << res.lut << "  FF " << res.ff << "  DSP " << res.dsp << '\n';
  out << "constraints:\n";
  json constraints = json::array();
  for (const auto& r : rows) {
    const bool ok = r.value <= r.bound;
    out << "  " << std::left << std::setw(11) << r.name << std::setw(18) << r.lhs << std::right << std::setw(10)
        << r.value << (ok ? " <= " : " >  ") << std::setw(8) << r.bound << (ok ? "" : "  VIOLATED") << '\n';
    constraints.push_back({{"constraint", r.name}, {"value", r.value}, {"bound", r.bound}, {"ok", ok}});
  }
  out << (d.ok() ? "feasible\n" : "infeasible\n");

  json inv = kernel_echo(a.kernel, k);
  inv.update({{"argv", argv}, {"platform_file", platform_src}, {"platform", platform}, {"config", cfg}});
  if (a.dfg_cycles) inv["dfg_cycles"] = *a.dfg_cycles;
  json result = {{"design", d}, {"constraints", constraints}, {"feasible", d.ok()}};
  maybe_write(a.out, report("estimate", inv, result, seconds_since(t0)));
  return exit_code::kOk;
}

// --- compare -----------------------------------------------------------------

struct CompareArgs {
  std::string kernel, platform, out;
  BoundsArgs bounds;
};

double ratio(double a, double b) { return b == 0 ? 0.0 : a / b; }

int cmd_compare(const CompareArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  const auto t0 = Clock::now();
  const auto k = load_kernel(a.kernel);
  const auto [platform, platform_src] = resolve_platform(a.platform, true);
  const auto bounds = a.bounds.resolve();
  const auto ts = customize_ts(k, platform, bounds);
  const auto es = customize_es(k, platform, bounds);
  const json ratios = {
      {"runtime_ts_over_es", ratio(static_cast<double>(ts.best.timing.total), static_cast<double>(es.best.timing.total))},
      {"invocations_es_over_ts",
       ratio(static_cast<double>(es.stats.scheduler_invocations), static_cast<double>(ts.stats.scheduler_invocations))},
      {"wall_es_over_ts", ratio(es.stats.wall_seconds, ts.stats.wall_seconds)}};
  out << "== TS\n";
  print_result(out, ts);
  out << "== ES\n";
  print_result(out, es);
  out << "RunTime TS/ES " << ratios["runtime_ts_over_es"].get<double>() << ", scheduler invocations ES/TS "
      << ratios["invocations_es_over_ts"].get<double>() << " (" << es.stats.scheduler_invocations << " / "
      << ts.stats.scheduler_invocations << "), wall time ES/TS " << ratios["wall_es_over_ts"].get<double>() << '\n';
  json inv = kernel_echo(a.kernel, k);
  inv.update({{"argv", argv}, {"platform_file", platform_src}, {"platform", platform}, {"bounds", bounds}});
  maybe_write(a.out, report("compare", inv, {{"ts", ts}, {"es", es}, {"ratios", ratios}}, seconds_since(t0)));
  return exit_code::kOk;
}

}  // namespace

LoopKernel load_kernel(const std::string& arg) {
  constexpr std::string_view prefix = "builtin:";
  if (arg.rfind(prefix, 0) == 0) return builtin_kernel_from_spec(arg.substr(prefix.size()));
  std::string name = arg;
  if (const auto slash = name.find_last_of('/'); slash != std::string::npos) name = name.substr(slash + 1);
  if (const auto dot = name.rfind('.'); dot != std::string::npos) name = name.substr(0, dot);
  return parse_kernel(read_text(arg), name);
}

Factor parse_factor(const std::string& text) {
  Factor f;
  std::string cur;
  const auto flush = [&] {
    if (cur.empty()) throw InvalidArgument("malformed factor '" + text + "'");
    std::size_t used = 0;
    std::int64_t v = 0;
    try {
      v = std::stoll(cur, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != cur.size() || v < 1) throw InvalidArgument("malformed factor '" + text + "'");
    f.push_back(v);
    cur.clear();
  };
  for (char ch : text) {
    if (ch == ',' || ch == 'x' || ch == 'X') flush();
    else if (ch != ' ') cur += ch;
  }
  flush();
  return f;
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  const auto num = [&](const std::string& s) {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (s.empty() || used != s.size() || s[0] == '-') throw InvalidArgument("malformed seed list '" + text + "'");
    return static_cast<std::uint64_t>(v);
  };
  std::vector<std::uint64_t> out;
  if (const auto dots = text.find(".."); dots != std::string::npos) {
    const auto lo = num(text.substr(0, dots));
    const auto hi = num(text.substr(dots + 2));
    if (hi < lo || hi - lo >= 100000) throw InvalidArgument("bad seed range '" + text + "'");
    for (auto s = lo; s <= hi; ++s) out.push_back(s);
    return out;
  }
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) out.push_back(num(item));
  if (out.empty()) throw InvalidArgument("empty seed list");
  return out;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Customize, compile and simulate loop accelerators on an SCGRA overlay", "cgra_dough"};
  app.set_version_flag("--version", DOUGH_VERSION);
  app.require_subcommand(1);

  CustomizeArgs cu;
  auto* customize = app.add_subcommand("customize", "search the design space (TS or ES)");
  customize->add_option("--kernel", cu.kernel, "builtin:NAME?params or a .kdl file")->required();
  customize->add_option("--platform", cu.platform, std::string("platform JSON (default: $") + kPlatformEnv + ")");
  customize->add_option("--method", cu.method)->check(CLI::IsMember({"ts", "es"}));
  customize->add_option("--out", cu.out, "write the JSON report here");
  cu.bounds.add_to(customize);

  ScheduleArgs sc;
  auto* schedule = app.add_subcommand("schedule", "unroll, schedule and encode one DFG");
  schedule->add_option("--kernel", sc.kernel)->required();
  schedule->add_option("--unroll", sc.unroll, "unroll factor, e.g. 1,1,2")->required();
  schedule->add_option("--rows", sc.rows)->check(CLI::Range(2, 64));
  schedule->add_option("--cols", sc.cols)->check(CLI::Range(2, 64));
  schedule->add_option("--dm-depth", sc.dm_depth, "data-memory depth D0")->check(CLI::Range(1, 1024));
  schedule->add_option("--max-nodes", sc.max_nodes, "largest DFG accepted");
  schedule->add_option("--dump", sc.dump, "write the schedule dump (JSON)");
  schedule->add_option("--dot", sc.dot, "write the placed and routed DFG (Graphviz)");
  schedule->add_option("--out", sc.out);

  SimulateArgs si;
  auto* sim = app.add_subcommand("simulate", "run a design on the cycle simulator against the reference");
  sim->add_option("--design", si.design, "customize report or design JSON");
  sim->add_option("--schedule", si.schedule, "schedule dump from 'schedule --dump'");
  sim->add_option("--group", si.group, "grouping factor for a schedule dump (default: u)");
  sim->add_option("--platform", si.platform, "platform JSON for the DMA model of a schedule dump");
  sim->add_option("--seed", si.seeds, "seed, list a,b,c or range a..b");
  sim->add_option("--trace", si.trace, "JSON-lines cycle trace of the first seed");
  sim->add_flag("--permissive", si.permissive, "read zero instead of faulting on uninitialised values");
  sim->add_option("--out", si.out);

  EstimateArgs es;
  auto* estimate = app.add_subcommand("estimate", "analytical timing, resources and constraints of one config");
  estimate->add_option("--kernel", es.kernel)->required();
  estimate->add_option("--platform", es.platform);
  estimate->add_option("--config", es.config, "JSON object or file: u, g, rows, cols, D0..D5")->required();
  estimate->add_option("--dfg-cycles", es.dfg_cycles, "use this schedule length instead of scheduling");
  estimate->add_option("--out", es.out);

  CompareArgs co;
  auto* compare = app.add_subcommand("compare", "run TS and ES on the same bounds");
  compare->add_option("--kernel", co.kernel)->required();
  compare->add_option("--platform", co.platform);
  compare->add_option("--out", co.out);
  co.bounds.add_to(compare);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return exit_code::kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return exit_code::kOk;
  } catch (const CLI::CallForVersion&) {
    out << DOUGH_VERSION << '\n';
    return exit_code::kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return exit_code::kUsage;
  }

  try {
    if (*customize) return cmd_customize(cu, args, out);
    if (*schedule) return cmd_schedule(sc, args, out);
    if (*sim) return cmd_simulate(si, args, out);
    if (*estimate) return cmd_estimate(es, args, out);
    if (*compare) return cmd_compare(co, args, out);
  } catch (const Usage& e) {
    err << "error: " << e.what() << '\n';
    return exit_code::kUsage;
  } catch (const Mismatch& e) {
    err << "error: " << e.what() << '\n';
    return exit_code::kMismatch;
  } catch (const InfeasibleError& e) {
    err << "infeasible: " << e.what() << '\n';
    for (const auto& v : e.violations()) err << "  " << v.message() << '\n';
    return exit_code::kInfeasible;
  } catch (const CapExceededError& e) {
    err << "error: " << e.what() << '\n';
    return exit_code::kCapExceeded;
  } catch (const UnschedulableError& e) {
    err << "unschedulable: " << e.what() << '\n';
    return exit_code::kUnschedulable;
  } catch (const SimulationError& e) {
    err << "simulation fault: " << e.what() << '\n';
    return exit_code::kMismatch;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return exit_code::kUsage;
  } catch (const SemanticError& e) {
    err << "error: " << e.what() << '\n';
    return exit_code::kUsage;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << '\n';
    return exit_code::kUsage;
  } catch (const json::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code::kUsage;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return exit_code::kFailure;
  }
  return exit_code::kUsage;
}

}  // namespace dough
