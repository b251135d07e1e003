#include "vss/live_session.hpp"

#include "vss/errors.hpp"
#include "vss/io.hpp"

#include <cmath>
#include <fmt/format.h>
#include <numbers>
#include <set>

namespace vss {

using nlohmann::json;

namespace {

struct CommandName {
    std::string_view name;
    SessionCommand::Type type;
};

constexpr CommandName kCommandNames[] = {
    {"shift_up", SessionCommand::Type::ShiftUp}, {"shift_down", SessionCommand::Type::ShiftDown},
    {"pause", SessionCommand::Type::Pause},      {"resume", SessionCommand::Type::Resume},
    {"reset", SessionCommand::Type::Reset},      {"set_profile", SessionCommand::Type::SetProfile},
};

long checked_steps_per_tick(double dt, double tick_hz) {
    if (!(tick_hz > 0.0) || !std::isfinite(tick_hz)) {
        throw ConfigError("tick_hz", "must be positive");
    }
    const double ratio = 1.0 / (dt * tick_hz);
    const double rounded = std::round(ratio);
    if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-6 * rounded) {
        throw ConfigError("tick_hz",
                          fmt::format("tick rate {} Hz must divide the step rate {} Hz", tick_hz,
                                      1.0 / dt));
    }
    return static_cast<long>(rounded);
}

SimConfig without_schedule(SimConfig config) {
    config.schedule.clear();
    return config;
}

} // namespace

std::string_view to_string(SessionCommand::Type type) {
    for (const auto& c : kCommandNames) {
        if (c.type == type) {
            return c.name;
        }
    }
    return "unknown";
}

SessionCommand parse_session_command(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ProtocolError(fmt::format("malformed JSON: {}", e.what()));
    }
    if (!doc.is_object()) {
        throw ProtocolError("message must be a JSON object");
    }
    auto type_it = doc.find("type");
    if (type_it == doc.end() || !type_it->is_string()) {
        throw ProtocolError("message needs a string field 'type'");
    }
    const auto type_name = type_it->get<std::string>();
    SessionCommand cmd;
    bool known = false;
    for (const auto& c : kCommandNames) {
        if (c.name == type_name) {
            cmd.type = c.type;
            known = true;
        }
    }
    if (!known) {
        throw ProtocolError(fmt::format("unknown message type '{}'", type_name));
    }
    for (const auto& [key, value] : doc.items()) {
        if (key == "type") {
            continue;
        }
        if (cmd.type != SessionCommand::Type::SetProfile ||
            (key != "amplitude_rad" && key != "frequency_hz")) {
            throw ProtocolError(fmt::format("unexpected field '{}' for '{}'", key, type_name));
        }
        if (!value.is_number()) {
            throw ProtocolError(fmt::format("field '{}' must be a number", key));
        }
        (key == "amplitude_rad" ? cmd.amplitude_rad : cmd.frequency_hz) = value.get<double>();
    }
    return cmd;
}

json to_json(const SessionCommand& command) {
    json doc = {{"type", to_string(command.type)}};
    if (command.amplitude_rad) {
        doc["amplitude_rad"] = *command.amplitude_rad;
    }
    if (command.frequency_hz) {
        doc["frequency_hz"] = *command.frequency_hz;
    }
    return doc;
}

LiveSession::LiveSession(SimConfig config, double tick_hz)
    : base_(without_schedule(std::move(config))),
      sim_(base_),
      tick_hz_(tick_hz),
      steps_per_tick_(checked_steps_per_tick(base_.dt, tick_hz)) {}

void LiveSession::submit(SessionCommand command) {
    std::lock_guard lock(mutex_);
    inbox_.push_back(std::move(command));
}

void LiveSession::handle(const SessionCommand& command, TickResult& out) {
    using Type = SessionCommand::Type;
    switch (command.type) {
    case Type::ShiftUp:
        sim_.queue_shift(ShiftDirection::Up);
        break;
    case Type::ShiftDown:
        sim_.queue_shift(ShiftDirection::Down);
        break;
    case Type::Pause:
        paused_ = true;
        break;
    case Type::Resume:
        paused_ = false;
        break;
    case Type::Reset:
        sim_ = Simulator(base_);
        break;
    case Type::SetProfile: {
        MotionProfile next = sim_.profile();
        if (command.amplitude_rad) {
            next.theta_max = *command.amplitude_rad;
        }
        if (command.frequency_hz) {
            next.omega = 2.0 * std::numbers::pi * *command.frequency_hz;
        }
        try {
            sim_.set_profile(next);
        } catch (const ConfigError& e) {
            out.errors.push_back(fmt::format("set_profile rejected: {}", e.what()));
            return;
        }
        break;
    }
    }
    out.acks.push_back(ack_frame(command));
}

TickResult LiveSession::tick() {
    std::vector<SessionCommand> commands;
    {
        std::lock_guard lock(mutex_);
        commands.swap(inbox_);
    }
    TickResult out;
    for (const auto& c : commands) {
        handle(c, out);
    }
    if (!paused_) {
        out.samples.reserve(static_cast<std::size_t>(steps_per_tick_));
        for (long i = 0; i < steps_per_tick_; ++i) {
            auto events = sim_.step();
            out.events.insert(out.events.end(), events.begin(), events.end());
            out.samples.push_back(sim_.sample());
        }
    }
    out.state = sim_.sample();
    out.paused = paused_;
    return out;
}

Trace run_interactive(const SimConfig& config, const CommandSource& source, const TickSink& sink,
                      long ticks, double tick_hz) {
    LiveSession session(config, tick_hz);
    Trace trace;
    trace.events = session.simulator().initial_events();
    trace.samples.push_back(session.simulator().sample());
    for (long i = 0; i < ticks; ++i) {
        if (source) {
            for (auto& c : source(i, session.simulator().time())) {
                session.submit(std::move(c));
            }
        }
        TickResult r = session.tick();
        trace.samples.insert(trace.samples.end(), r.samples.begin(), r.samples.end());
        trace.events.insert(trace.events.end(), r.events.begin(), r.events.end());
        if (sink) {
            sink(r);
        }
    }
    return trace;
}

json state_frame(const TraceSample& s) {
    return {{"type", "state"},       {"t", s.t},       {"theta", s.theta},
            {"theta_dot", s.theta_dot}, {"x", s.x},    {"detent", s.detent},
            {"k", s.k},              {"tau", s.tau},   {"tension", s.tension},
            {"mode", to_string(s.mode)}};
}

json event_frame(const Event& e) {
    json doc = to_json(e);
    doc["type"] = "event";
    return doc;
}

json error_frame(const std::string& message) {
    return {{"type", "error"}, {"message", message}};
}

json ack_frame(const SessionCommand& command) {
    return {{"type", "ack"}, {"command", to_json(command)}};
}

json geometry_frame(const SimConfig& config, double tick_hz) {
    const MechanismParams& p = config.params;
    return {{"type", "geometry"},
            {"n_detents", p.n_detents},
            {"detent_positions", detent_positions(p)},
            {"x_min", p.x_min},
            {"x_max", p.x_max},
            {"tooth_clearance", p.tooth_clearance},
            {"dt", config.dt},
            {"tick_hz", tick_hz}};
}

} // namespace vss
