#include "dough/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace dough {

namespace {

template <typename T>
T field(const json& j, const char* key) {
  if (!j.is_object()) throw InvalidArgument(std::string("expected an object holding '") + key + "'");
  const auto it = j.find(key);
  if (it == j.end()) throw InvalidArgument(std::string("missing field '") + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("field '") + key + "': " + e.what());
  }
}

template <typename T>
T field_or(const json& j, const char* key, T fallback) {
  return j.contains(key) ? field<T>(j, key) : fallback;
}

Op op_of(const std::string& name) {
  const auto op = op_from_name(name);
  if (!op) throw InvalidArgument("unknown op '" + name + "'");
  return *op;
}

std::string source_text(const Source& s) {
  if (s.kind == SrcKind::DM) return "dm[" + std::to_string(s.addr) + "]";
  return src_kind_name(s.kind);
}

Source source_of(const std::string& text) {
  if (text.rfind("dm[", 0) == 0 && text.back() == ']') {
    try {
      return Source::dm(std::stoi(text.substr(3, text.size() - 4)));
    } catch (const std::exception&) {
      throw InvalidArgument("bad DM selector '" + text + "'");
    }
  }
  for (auto kind : {SrcKind::None, SrcKind::North, SrcKind::South, SrcKind::East, SrcKind::West, SrcKind::IBuf})
    if (text == src_kind_name(kind)) return Source::dir(kind);
  throw InvalidArgument("unknown selector '" + text + "'");
}

json logic_json(const LogicCoefficients& c) { return {{"lut", c.lut}, {"ff", c.ff}, {"dsp", c.dsp}}; }

LogicCoefficients logic_of(const json& j) {
  return {field<std::int64_t>(j, "lut"), field<std::int64_t>(j, "ff"), field<std::int64_t>(j, "dsp")};
}

json placement_json(const Placement& p) {
  json j = {{"pe", p.pe},
            {"cycle", p.cycle},
            {"op", std::string(op_name(p.op))},
            {"src", {source_text(p.src[0]), source_text(p.src[1])}},
            {"dm_write", p.dm_write},
            {"node", p.node},
            {"value", p.value}};
  if (p.obuf_store) j["obuf_store"] = true;
  if (p.load_from_obuf) j["load_from_obuf"] = true;
  return j;
}

Placement placement_of(const json& j) {
  Placement p;
  p.pe = field<int>(j, "pe");
  p.cycle = field<Cycles>(j, "cycle");
  p.op = op_of(field<std::string>(j, "op"));
  const auto src = field<std::vector<std::string>>(j, "src");
  if (src.size() != 2) throw InvalidArgument("a placement has exactly two selectors");
  p.src = {source_of(src[0]), source_of(src[1])};
  p.dm_write = field<int>(j, "dm_write");
  p.node = field<int>(j, "node");
  p.value = field<int>(j, "value");
  p.obuf_store = field_or(j, "obuf_store", false);
  p.load_from_obuf = field_or(j, "load_from_obuf", false);
  return p;
}

const char* kDepthKeys[] = {"D0", "D1", "D2", "D3", "D4", "D5"};

}  // namespace

void to_json(json& j, const Violation& v) {
  j = {{"constraint", v.constraint}, {"value", v.value}, {"bound", v.bound}};
}
void from_json(const json& j, Violation& v) {
  v = {field<std::string>(j, "constraint"), field<std::int64_t>(j, "value"), field<std::int64_t>(j, "bound")};
}

void to_json(json& j, const DmaModel& m) {
  j = json{{"segments", json::array()}};
  for (const auto& s : m.segments)
    j["segments"].push_back({{"lower_bound", s.lower_bound}, {"intercept", s.intercept}, {"slope", s.slope}});
}
void from_json(const json& j, DmaModel& m) {
  m.segments.clear();
  if (!j.contains("segments")) {
    // Shorthand for a single linear segment.
    m = DmaModel::linear(field<Cycles>(j, "intercept"), field<Cycles>(j, "slope"));
  } else {
    for (const auto& s : field<json>(j, "segments"))
      m.segments.push_back({field<Words>(s, "lower_bound"), field<Cycles>(s, "intercept"), field<Cycles>(s, "slope")});
  }
  validate_dma(m);
}

void to_json(json& j, const ResourceVector& r) {
  j = {{"bram", r.bram}, {"lut", r.lut}, {"ff", r.ff}, {"dsp", r.dsp}};
}
void from_json(const json& j, ResourceVector& r) {
  r = {field<std::int64_t>(j, "bram"), field<std::int64_t>(j, "lut"), field<std::int64_t>(j, "ff"),
       field<std::int64_t>(j, "dsp")};
}

void to_json(json& j, const PlatformModel& p) {
  j = {{"name", p.name},
       {"budgets", p.budgets},
       {"alpha", logic_json(p.alpha)},
       {"beta", logic_json(p.beta)},
       {"bram_geometry", {{"base_depth", p.bram_geometry.base_depth}, {"base_width", p.bram_geometry.base_width}}},
       {"dma", p.dma},
       {"epsilon", p.epsilon},
       {"frequency_hz", p.frequency_hz}};
}
void from_json(const json& j, PlatformModel& p) {
  p = PlatformModel{};
  p.name = field_or<std::string>(j, "name", "custom");
  p.budgets = field<ResourceVector>(j, "budgets");
  p.alpha = logic_of(field<json>(j, "alpha"));
  p.beta = logic_of(field<json>(j, "beta"));
  if (j.contains("bram_geometry")) {
    const auto g = field<json>(j, "bram_geometry");
    p.bram_geometry = {field<Words>(g, "base_depth"), field<int>(g, "base_width")};
  }
  if (j.contains("dma")) p.dma = field<DmaModel>(j, "dma");
  p.epsilon = field_or(j, "epsilon", p.epsilon);
  p.frequency_hz = field_or(j, "frequency_hz", p.frequency_hz);
  validate_platform(p);
}

void to_json(json& j, const OverlayConfig& c) {
  j = {{"rows", c.rows},
       {"cols", c.cols},
       {"data_width", c.data_width},
       {"D0", c.dm_depth},
       {"D1", c.ibuf_depth},
       {"D2", c.obuf_depth},
       {"D3", c.imem_depth},
       {"D4", c.in_addr_depth},
       {"D5", c.out_addr_depth},
       {"W1", c.instr_width},
       {"W2", c.in_addr_width},
       {"W3", c.out_addr_width},
       {"frequency_hz", c.frequency_hz}};
}
void from_json(const json& j, OverlayConfig& c) {
  c = OverlayConfig{};
  c.rows = field<int>(j, "rows");
  c.cols = field<int>(j, "cols");
  c.data_width = field_or(j, "data_width", c.data_width);
  c.dm_depth = field_or(j, "D0", c.dm_depth);
  c.ibuf_depth = field_or(j, "D1", c.ibuf_depth);
  c.obuf_depth = field_or(j, "D2", c.obuf_depth);
  c.imem_depth = field_or(j, "D3", c.imem_depth);
  c.in_addr_depth = field_or(j, "D4", c.in_addr_depth);
  c.out_addr_depth = field_or(j, "D5", c.out_addr_depth);
  c.instr_width = field_or(j, "W1", c.instr_width);
  if (j.contains("W2") && j.contains("W3")) {
    c.in_addr_width = field<int>(j, "W2");
    c.out_addr_width = field<int>(j, "W3");
  } else {
    c.fit_address_widths();
  }
  c.frequency_hz = field_or(j, "frequency_hz", c.frequency_hz);
  if (const auto problems = validate_overlay(c); !problems.empty())
    throw InvalidArgument("overlay: " + problems.front());
}

void to_json(json& j, const FullConfig& c) { j = {{"u", c.u}, {"g", c.g}, {"overlay", c.overlay}}; }
void from_json(const json& j, FullConfig& c) {
  c.u = field<Factor>(j, "u");
  c.g = field<Factor>(j, "g");
  c.overlay = field<OverlayConfig>(j, "overlay");
}

void to_json(json& j, const TimingReport& t) {
  j = {{"compu", t.compu},   {"commu", t.commu},       {"total", t.total},
       {"seconds", t.seconds}, {"dfg_reps", t.dfg_reps}, {"groups", t.groups}};
}
void from_json(const json& j, TimingReport& t) {
  t.compu = field<Cycles>(j, "compu");
  t.commu = field<Cycles>(j, "commu");
  t.total = field<Cycles>(j, "total");
  t.seconds = field<double>(j, "seconds");
  t.dfg_reps = field<std::int64_t>(j, "dfg_reps");
  t.groups = field<std::int64_t>(j, "groups");
}

void to_json(json& j, const IoCounts& io) { j = {{"in", io.in}, {"out", io.out}}; }
void from_json(const json& j, IoCounts& io) { io = {field<Words>(j, "in"), field<Words>(j, "out")}; }

void to_json(json& j, const Schedule& s) {
  j = {{"rows", s.rows},
       {"cols", s.cols},
       {"length", s.length},
       {"hops", s.hops},
       {"dm_used", s.dm_used},
       {"load_order", s.load_order},
       {"store_order", s.store_order},
       {"constants", json::array()},
       {"placements", json::array()}};
  for (const auto& c : s.constants) j["constants"].push_back({{"pe", c.pe}, {"addr", c.addr}, {"value", c.value}});
  for (const auto& p : s.placements) j["placements"].push_back(placement_json(p));
}
void from_json(const json& j, Schedule& s) {
  s = Schedule{};
  s.rows = field<int>(j, "rows");
  s.cols = field<int>(j, "cols");
  s.length = field<Cycles>(j, "length");
  s.hops = field<int>(j, "hops");
  s.dm_used = field<std::vector<int>>(j, "dm_used");
  s.load_order = field<std::vector<int>>(j, "load_order");
  s.store_order = field<std::vector<int>>(j, "store_order");
  for (const auto& c : field<json>(j, "constants"))
    s.constants.push_back({field<int>(c, "pe"), field<int>(c, "addr"), field<std::int64_t>(c, "value")});
  for (const auto& p : field<json>(j, "placements")) s.placements.push_back(placement_of(p));
  if (s.rows < 2 || s.cols < 2 || s.length < 0) throw InvalidArgument("schedule has a bad shape or length");
  for (const auto& p : s.placements)
    if (p.pe < 0 || p.pe >= s.rows * s.cols || p.cycle < 0 || p.cycle >= s.length)
      throw InvalidArgument("placement outside the array or the schedule length");
}

void to_json(json& j, const SearchBounds& b) {
  const std::vector<Words>* lists[] = {&b.dm_depths,   &b.ibuf_depths,    &b.obuf_depths,
                                       &b.imem_depths, &b.in_addr_depths, &b.out_addr_depths};
  json depths;
  for (int i = 0; i < 6; ++i) depths[kDepthKeys[i]] = *lists[i];
  j = {{"max_rows", b.max_rows},
       {"max_cols", b.max_cols},
       {"size_space", b.size_space == SizeSpace::Chain ? "chain" : "grid"},
       {"max_unroll_product", b.max_unroll_product},
       {"data_width", b.data_width},
       {"depths", depths},
       {"epsilon", b.epsilon ? json(*b.epsilon) : json(nullptr)},
       {"max_dfg_nodes", b.max_dfg_nodes},
       {"es_cap", b.es_cap},
       {"top_k", b.top_k},
       {"jobs", b.jobs}};
}
void from_json(const json& j, SearchBounds& b) {
  b = SearchBounds{};
  b.max_rows = field_or(j, "max_rows", b.max_rows);
  b.max_cols = field_or(j, "max_cols", b.max_cols);
  const auto space = field_or<std::string>(j, "size_space", "chain");
  if (space != "chain" && space != "grid") throw InvalidArgument("size_space must be 'chain' or 'grid'");
  b.size_space = space == "chain" ? SizeSpace::Chain : SizeSpace::Grid;
  b.max_unroll_product = field_or(j, "max_unroll_product", b.max_unroll_product);
  b.data_width = field_or(j, "data_width", b.data_width);
  if (j.contains("depths")) {
    const auto d = field<json>(j, "depths");
    std::vector<Words>* lists[] = {&b.dm_depths,   &b.ibuf_depths,    &b.obuf_depths,
                                   &b.imem_depths, &b.in_addr_depths, &b.out_addr_depths};
    for (int i = 0; i < 6; ++i)
      if (d.contains(kDepthKeys[i])) *lists[i] = field<std::vector<Words>>(d, kDepthKeys[i]);
  }
  if (j.contains("epsilon") && !j.at("epsilon").is_null()) b.epsilon = field<double>(j, "epsilon");
  b.max_dfg_nodes = field_or(j, "max_dfg_nodes", b.max_dfg_nodes);
  b.es_cap = field_or(j, "es_cap", b.es_cap);
  b.top_k = field_or(j, "top_k", b.top_k);
  b.jobs = field_or(j, "jobs", b.jobs);
  b = normalized(b);
}

void to_json(json& j, const EvaluatedDesign& d) {
  j = {{"config", d.config}, {"dfg_cycles", d.dfg_cycles}, {"dm_used", d.dm_used},
       {"io_u", d.io_u},     {"io_g", d.io_g},             {"timing", d.timing},
       {"resources", d.resources}, {"violations", d.violations}};
  if (d.schedule) j["schedule"] = *d.schedule;
}
void from_json(const json& j, EvaluatedDesign& d) {
  d = EvaluatedDesign{};
  d.config = field<FullConfig>(j, "config");
  d.dfg_cycles = field<Cycles>(j, "dfg_cycles");
  d.dm_used = field<Words>(j, "dm_used");
  d.io_u = field<IoCounts>(j, "io_u");
  d.io_g = field<IoCounts>(j, "io_g");
  d.timing = field<TimingReport>(j, "timing");
  d.resources = field<ResourceVector>(j, "resources");
  d.violations = field<std::vector<Violation>>(j, "violations");
  if (j.contains("schedule")) d.schedule = std::make_shared<const Schedule>(field<Schedule>(j, "schedule"));
}

void to_json(json& j, const CustomizationStats& s) {
  j = {{"scheduler_invocations", s.scheduler_invocations},
       {"feasible_entries", s.feasible_entries},
       {"configs_evaluated", s.configs_evaluated},
       {"feasible_designs", s.feasible_designs},
       {"wall_seconds", s.wall_seconds}};
}
void from_json(const json& j, CustomizationStats& s) {
  s.scheduler_invocations = field<std::size_t>(j, "scheduler_invocations");
  s.feasible_entries = field<std::size_t>(j, "feasible_entries");
  s.configs_evaluated = field<std::size_t>(j, "configs_evaluated");
  s.feasible_designs = field<std::size_t>(j, "feasible_designs");
  s.wall_seconds = field<double>(j, "wall_seconds");
}

void to_json(json& j, const CustomizationResult& r) {
  // Only the best design carries its schedule; the table rows are summaries.
  json top = json::array();
  for (const auto& d : r.top) {
    json row = d;
    row.erase("schedule");
    top.push_back(std::move(row));
  }
  j = {{"method", r.method}, {"epsilon", r.epsilon}, {"best", r.best}, {"top", top}, {"stats", r.stats}};
}
void from_json(const json& j, CustomizationResult& r) {
  r.method = field<std::string>(j, "method");
  if (r.method != "ts" && r.method != "es") throw InvalidArgument("method must be 'ts' or 'es'");
  r.epsilon = field<double>(j, "epsilon");
  r.best = field<EvaluatedDesign>(j, "best");
  r.top = field<std::vector<EvaluatedDesign>>(j, "top");
  r.stats = field<CustomizationStats>(j, "stats");
}

void to_json(json& j, const SimStats& s) {
  j = {{"compute_cycles", s.compute_cycles}, {"dma_cycles", s.dma_cycles},
       {"groups", s.groups},                 {"iterations_per_group", s.iterations_per_group},
       {"ibuf_reads", s.ibuf_reads},         {"obuf_writes", s.obuf_writes}};
}

void to_json(json& j, const VerifyReport& r) {
  j = {{"passed", r.passed()}, {"total", r.entries.size()}, {"entries", json::array()}};
  for (const auto& e : r.entries)
    j["entries"].push_back({{"seed", e.seed},
                            {"pass", e.pass()},
                            {"outputs_match", e.outputs_match},
                            {"cycles_match", e.cycles_match},
                            {"compute_cycles", e.compute_cycles},
                            {"expected_cycles", e.expected_cycles},
                            {"detail", e.detail}});
}

std::string control_word_text(const ControlWord& w) {
  if (w.op == Op::NOP) return "NOP";
  std::string out(op_name(w.op));
  const int arity = w.op == Op::PASS ? 1 : op_arity(w.op);
  for (int i = 0; i < arity; ++i) {
    out += i ? ", " : " ";
    const auto& s = w.src[static_cast<std::size_t>(i)];
    out += s.kind == SrcKind::IBuf && w.load_from_obuf ? "obuf" : source_text(s);
  }
  if (w.dm_write >= 0) out += " -> dm[" + std::to_string(w.dm_write) + "]";
  if (w.obuf_store) out += " -> obuf";
  return out;
}

std::string hex_word(std::uint64_t bits) {
  char buf[19];
  std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(bits));
  return buf;
}

json schedule_dump(const Schedule& s, const ProgramImage& image) {
  json programs = json::array();
  for (const auto& prog : image.programs) {
    json words = json::array();
    for (const auto& w : prog) words.push_back({{"text", control_word_text(w)}, {"hex", hex_word(encode_control_word(w))}});
    programs.push_back(std::move(words));
  }
  return {{"length", s.length},
          {"rows", s.rows},
          {"cols", s.cols},
          {"programs", programs},
          {"in_addr", image.in_addr},
          {"out_addr", image.out_addr},
          {"schedule", s}};
}

Schedule schedule_from_dump(const json& dump) {
  const auto s = field<Schedule>(dump, "schedule");
  OverlayConfig probe;
  probe.rows = s.rows;
  probe.cols = s.cols;
  probe.imem_depth = std::max<Cycles>(s.length, 1);
  const auto image = emit_control_words(s, probe);
  const auto programs = field<json>(dump, "programs");
  if (!programs.is_array() || programs.size() != image.programs.size())
    throw InvalidArgument("schedule dump has the wrong number of PE programs");
  for (std::size_t pe = 0; pe < image.programs.size(); ++pe) {
    if (!programs[pe].is_array() || programs[pe].size() != image.programs[pe].size())
      throw InvalidArgument("PE " + std::to_string(pe) + " program has the wrong length");
    for (std::size_t t = 0; t < image.programs[pe].size(); ++t)
      if (field<std::string>(programs[pe][t], "hex") != hex_word(encode_control_word(image.programs[pe][t])))
        throw InvalidArgument("control word of PE " + std::to_string(pe) + " cycle " + std::to_string(t) +
                              " does not match the placements");
  }
  if (field<std::vector<int>>(dump, "in_addr") != image.in_addr ||
      field<std::vector<int>>(dump, "out_addr") != image.out_addr)
    throw InvalidArgument("address streams do not match the placements");
  return s;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InvalidArgument("'" + path + "' is not valid JSON: " + e.what());
  }
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
  if (!out) throw InvalidArgument("failed writing '" + path + "'");
}

PlatformModel load_platform(const std::string& path) { return parse_as<PlatformModel>(read_json_file(path), "platform"); }

}  // namespace dough
