#pragma once

#include <string>

#include "json.hpp"

#include "dough/control.hpp"
#include "dough/dse.hpp"
#include "dough/sim.hpp"

namespace dough {

using nlohmann::json;

// Every from_json throws InvalidArgument naming the offending field when a
// document is malformed; to_json of the result reproduces the input.

void to_json(json& j, const Violation& v);
void from_json(const json& j, Violation& v);
void to_json(json& j, const DmaModel& m);
void from_json(const json& j, DmaModel& m);
void to_json(json& j, const ResourceVector& r);
void from_json(const json& j, ResourceVector& r);
void to_json(json& j, const PlatformModel& p);
void from_json(const json& j, PlatformModel& p);
void to_json(json& j, const OverlayConfig& c);
void from_json(const json& j, OverlayConfig& c);
void to_json(json& j, const FullConfig& c);
void from_json(const json& j, FullConfig& c);
void to_json(json& j, const TimingReport& t);
void from_json(const json& j, TimingReport& t);
void to_json(json& j, const IoCounts& io);
void from_json(const json& j, IoCounts& io);
void to_json(json& j, const Schedule& s);
void from_json(const json& j, Schedule& s);
void to_json(json& j, const SearchBounds& b);
void from_json(const json& j, SearchBounds& b);
void to_json(json& j, const EvaluatedDesign& d);
void from_json(const json& j, EvaluatedDesign& d);
void to_json(json& j, const CustomizationStats& s);
void from_json(const json& j, CustomizationStats& s);
void to_json(json& j, const CustomizationResult& r);
void from_json(const json& j, CustomizationResult& r);
void to_json(json& j, const SimStats& s);
void to_json(json& j, const VerifyReport& r);

/// Symbolic text of a control word, e.g. "ADD dm[3], north -> dm[5]".
std::string control_word_text(const ControlWord& w);
/// "0x" followed by 16 lowercase hex digits.
std::string hex_word(std::uint64_t bits);

/// Schedule dump: the schedule itself, per-PE instruction arrays (symbolic
/// and encoded) and the address streams of one DFG iteration.
json schedule_dump(const Schedule& s, const ProgramImage& image);
/// Reads a dump back. Throws InvalidArgument when an encoded word does not
/// match the word re-emitted from the placements.
Schedule schedule_from_dump(const json& dump);

json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const json& j);
PlatformModel load_platform(const std::string& path);

template <typename T>
T parse_as(const json& j, const char* what) {
  try {
    return j.get<T>();
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("malformed ") + what + ": " + e.what());
  }
}

}  // namespace dough
