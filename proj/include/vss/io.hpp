// Configuration files, trace/event serialization and report rendering.
#pragma once

#include "vss/analysis.hpp"
#include "vss/simulation.hpp"

#include <iosfwd>
#include <json.hpp>
#include <optional>
#include <string>

namespace vss {

/// Where `run` writes its artifacts; relative names resolve against `dir`.
struct OutputSpec {
    std::string dir = ".";
    std::string trace = "trace.csv";
    std::string events = "events.jsonl";
    std::string report = "report.json";
};

struct RunConfig {
    SimConfig sim;
    OutputSpec output;
};

/// Parses a run configuration. Missing keys keep their defaults; unknown
/// keys and wrongly typed values raise ConfigError with a dotted field path.
/// When params.click_travel is absent it follows the (possibly changed) pitch.
RunConfig run_config_from_json(const nlohmann::json& doc);
RunConfig load_run_config(const std::string& path);

MechanismParams params_from_json(const nlohmann::json& doc, const std::string& where = "params");
nlohmann::json to_json(const MechanismParams& params);
nlohmann::json to_json(const MotionProfile& profile);
nlohmann::json to_json(const SimConfig& config);

std::string_view to_string(ShiftDirection direction);

// Trace CSV -------------------------------------------------------------------

inline constexpr std::string_view kTraceHeader = "t,theta,theta_dot,x,detent,k,tau,tension,mode,event";

/// One row per sample. The event column lists `KIND@t` tokens, separated by
/// ';', for the events that happened since the previous row. A non-empty
/// `meta` is written first as a '#' comment line.
void write_trace_csv(std::ostream& os, const Trace& trace, const std::string& meta = {});

/// Inverse of write_trace_csv. Events are rebuilt from their tokens; their
/// detent, x, theta and tension are taken from the row that lists them.
Trace read_trace_csv(std::istream& is);

nlohmann::json to_json(const Event& event);
Event event_from_json(const nlohmann::json& doc);
void write_events_jsonl(std::ostream& os, const std::vector<Event>& events);
std::vector<Event> read_events_jsonl(std::istream& is);

// Reports ---------------------------------------------------------------------

nlohmann::json to_json(const StaircaseReport& report);
nlohmann::json to_json(const StiffnessRangeReport& report);
nlohmann::json to_json(const TimingWindow& window);

std::string format_staircase(const StaircaseReport& report);
std::string format_stiffness_range(const StiffnessRangeReport& report);
std::string format_timing_windows(const std::vector<TimingWindow>& windows);

/// Shortest text that parses back to the same double.
std::string format_number(double value);

} // namespace vss
