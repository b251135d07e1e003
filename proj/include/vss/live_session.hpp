// Human-in-the-loop session: a command queue feeding the single simulation
// loop, and the JSON frames exchanged with clients.
#pragma once

#include "vss/simulation.hpp"

#include <functional>
#include <json.hpp>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace vss {

/// A client message that cannot be understood.
class ProtocolError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SessionCommand {
    enum class Type { ShiftUp, ShiftDown, Pause, Resume, Reset, SetProfile };
    Type type = Type::ShiftUp;
    std::optional<double> amplitude_rad;
    std::optional<double> frequency_hz;
};

std::string_view to_string(SessionCommand::Type type);

/// Parses `{"type": ..., "amplitude_rad"?, "frequency_hz"?}`; throws
/// ProtocolError for malformed JSON, unknown types or stray fields.
SessionCommand parse_session_command(std::string_view text);
nlohmann::json to_json(const SessionCommand& command);

struct TickResult {
    TraceSample state;                 // sample at the end of the tick
    std::vector<TraceSample> samples;  // every step sample produced by this tick
    std::vector<Event> events;
    std::vector<nlohmann::json> acks;  // one per command handled this tick
    std::vector<std::string> errors;   // commands that were rejected
    bool paused = false;
};

/// Owns the simulator. submit() may be called from any thread; tick() runs
/// on the simulation thread, drains the queue, then advances
/// steps_per_tick() steps unless paused. Shift commands take effect at the
/// end of the first step of the tick.
class LiveSession {
public:
    /// The schedule of `config` is ignored. Throws ConfigError unless the
    /// tick rate divides the step rate.
    explicit LiveSession(SimConfig config, double tick_hz = 50.0);

    void submit(SessionCommand command);
    TickResult tick();

    long steps_per_tick() const noexcept { return steps_per_tick_; }
    double tick_hz() const noexcept { return tick_hz_; }
    bool paused() const noexcept { return paused_; }
    const Simulator& simulator() const noexcept { return sim_; }
    const SimConfig& base_config() const noexcept { return base_; }

private:
    void handle(const SessionCommand& command, TickResult& out);

    SimConfig base_;
    Simulator sim_;
    double tick_hz_;
    long steps_per_tick_;
    bool paused_ = false;
    std::mutex mutex_;
    std::vector<SessionCommand> inbox_;
};

/// Commands issued before tick `tick` (sim time `t`).
using CommandSource = std::function<std::vector<SessionCommand>(long tick, double t)>;
using TickSink = std::function<void(const TickResult&)>;

/// Drives a LiveSession for `ticks` ticks without wall-clock pacing and
/// collects the full-resolution trace.
Trace run_interactive(const SimConfig& config, const CommandSource& source, const TickSink& sink,
                      long ticks, double tick_hz = 50.0);

// Server-to-client frames ------------------------------------------------------

nlohmann::json state_frame(const TraceSample& sample);
nlohmann::json event_frame(const Event& event);
nlohmann::json error_frame(const std::string& message);
nlohmann::json ack_frame(const SessionCommand& command);
/// Detent grid and timing, sent once per connection.
nlohmann::json geometry_frame(const SimConfig& config, double tick_hz);

} // namespace vss
