#include "vss/io.hpp"

#include "vss/errors.hpp"

#include <charconv>
#include <fmt/format.h>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <set>
#include <sstream>

namespace vss {

using nlohmann::json;

namespace {

std::string join_path(const std::string& where, std::string_view key) {
    return where.empty() ? std::string(key) : where + "." + std::string(key);
}

void reject_unknown(const json& obj, const std::set<std::string>& allowed,
                    const std::string& where) {
    for (const auto& [key, value] : obj.items()) {
        if (allowed.count(key) == 0) {
            throw ConfigError(join_path(where, key), "unknown key");
        }
    }
}

void require_object(const json& value, const std::string& where) {
    if (!value.is_object()) {
        throw ConfigError(where.empty() ? "config" : where, "expected a JSON object");
    }
}

void read_number(const json& obj, const char* key, const std::string& where, double& out) {
    auto it = obj.find(key);
    if (it == obj.end()) {
        return;
    }
    if (!it->is_number()) {
        throw ConfigError(join_path(where, key), "expected a number");
    }
    out = it->get<double>();
}

void read_int(const json& obj, const char* key, const std::string& where, int& out) {
    auto it = obj.find(key);
    if (it == obj.end()) {
        return;
    }
    if (!it->is_number_integer()) {
        throw ConfigError(join_path(where, key), "expected an integer");
    }
    out = it->get<int>();
}

void read_string(const json& obj, const char* key, const std::string& where, std::string& out) {
    auto it = obj.find(key);
    if (it == obj.end()) {
        return;
    }
    if (!it->is_string()) {
        throw ConfigError(join_path(where, key), "expected a string");
    }
    out = it->get<std::string>();
}

ShiftDirection direction_from_string(const std::string& text, const std::string& where) {
    if (text == "UP" || text == "up") {
        return ShiftDirection::Up;
    }
    if (text == "DOWN" || text == "down") {
        return ShiftDirection::Down;
    }
    throw ConfigError(where, fmt::format("expected \"UP\" or \"DOWN\", got \"{}\"", text));
}

MotionProfile profile_from_json(const json& doc, const std::string& where) {
    require_object(doc, where);
    reject_unknown(doc, {"theta_max", "omega", "frequency_hz", "phase"}, where);
    MotionProfile profile;
    read_number(doc, "theta_max", where, profile.theta_max);
    read_number(doc, "phase", where, profile.phase);
    if (doc.contains("omega") && doc.contains("frequency_hz")) {
        throw ConfigError(join_path(where, "frequency_hz"), "give either omega or frequency_hz");
    }
    read_number(doc, "omega", where, profile.omega);
    if (doc.contains("frequency_hz")) {
        double hz = 0.0;
        read_number(doc, "frequency_hz", where, hz);
        profile.omega = 2.0 * std::numbers::pi * hz;
    }
    return profile;
}

double parse_double(std::string_view text, const std::string& where) {
    double value = 0.0;
    const char* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc() || ptr != end) {
        throw ConfigError(where, fmt::format("'{}' is not a number", text));
    }
    return value;
}

int parse_int(std::string_view text, const std::string& where) {
    int value = 0;
    const char* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc() || ptr != end) {
        throw ConfigError(where, fmt::format("'{}' is not an integer", text));
    }
    return value;
}

std::vector<std::string_view> split(std::string_view text, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = text.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(text.substr(start));
            return out;
        }
        out.push_back(text.substr(start, pos - start));
        start = pos + 1;
    }
}

json optional_number(const std::optional<double>& v) {
    return v ? json(*v) : json(nullptr);
}

} // namespace

std::string format_number(double value) {
    return fmt::format("{}", value);
}

std::string_view to_string(ShiftDirection direction) {
    return direction == ShiftDirection::Up ? "UP" : "DOWN";
}

MechanismParams params_from_json(const json& doc, const std::string& where) {
    require_object(doc, where);
    reject_unknown(doc,
                   {"k_S", "l", "d", "x_min", "x_max", "n_detents", "tooth_clearance", "m_pivot",
                    "c_pivot", "k_s", "k_p", "f_engage", "f_disengage", "f0", "f_max",
                    "click_travel"},
                   where);
    MechanismParams p;
    read_number(doc, "k_S", where, p.k_S);
    read_number(doc, "l", where, p.l);
    read_number(doc, "d", where, p.d);
    read_number(doc, "x_min", where, p.x_min);
    read_number(doc, "x_max", where, p.x_max);
    read_int(doc, "n_detents", where, p.n_detents);
    read_number(doc, "tooth_clearance", where, p.tooth_clearance);
    read_number(doc, "m_pivot", where, p.m_pivot);
    read_number(doc, "c_pivot", where, p.c_pivot);
    read_number(doc, "k_s", where, p.k_s);
    read_number(doc, "k_p", where, p.k_p);
    read_number(doc, "f_engage", where, p.f_engage);
    read_number(doc, "f_disengage", where, p.f_disengage);
    read_number(doc, "f0", where, p.f0);
    read_number(doc, "f_max", where, p.f_max);
    if (p.n_detents >= 2) {
        p.click_travel = p.pitch();
    }
    read_number(doc, "click_travel", where, p.click_travel);
    try {
        p.validate();
    } catch (const ConfigError& e) {
        const std::string message = std::string(e.what()).substr(e.field().size() + 2);
        throw ConfigError(join_path(where, e.field()), message);
    }
    return p;
}

RunConfig run_config_from_json(const json& doc) {
    require_object(doc, "");
    reject_unknown(doc,
                   {"params", "profile", "schedule", "dt", "duration", "initial_shifter_index",
                    "seed", "output"},
                   "");
    RunConfig rc;
    SimConfig& c = rc.sim;
    if (auto it = doc.find("params"); it != doc.end()) {
        c.params = params_from_json(*it, "params");
    }
    if (auto it = doc.find("profile"); it != doc.end()) {
        c.profile = profile_from_json(*it, "profile");
    }
    if (auto it = doc.find("schedule"); it != doc.end()) {
        if (!it->is_array()) {
            throw ConfigError("schedule", "expected an array");
        }
        for (std::size_t i = 0; i < it->size(); ++i) {
            const std::string where = fmt::format("schedule[{}]", i);
            const json& entry = (*it)[i];
            require_object(entry, where);
            reject_unknown(entry, {"t", "direction"}, where);
            if (!entry.contains("t") || !entry.contains("direction")) {
                throw ConfigError(where, "needs both t and direction");
            }
            ShiftCommand cmd;
            read_number(entry, "t", where, cmd.t);
            std::string dir;
            read_string(entry, "direction", where, dir);
            cmd.direction = direction_from_string(dir, where + ".direction");
            c.schedule.push_back(cmd);
        }
    }
    read_number(doc, "dt", "", c.dt);
    read_number(doc, "duration", "", c.duration);
    read_int(doc, "initial_shifter_index", "", c.initial_shifter_index);
    if (auto it = doc.find("seed"); it != doc.end()) {
        if (!it->is_number_integer() || it->get<std::int64_t>() < 0) {
            throw ConfigError("seed", "expected a non-negative integer");
        }
        c.seed = it->get<std::uint64_t>();
    }
    if (auto it = doc.find("output"); it != doc.end()) {
        require_object(*it, "output");
        reject_unknown(*it, {"dir", "trace", "events", "report"}, "output");
        read_string(*it, "dir", "output", rc.output.dir);
        read_string(*it, "trace", "output", rc.output.trace);
        read_string(*it, "events", "output", rc.output.events);
        read_string(*it, "report", "output", rc.output.report);
    }
    c.validate();
    return rc;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("config", fmt::format("cannot open '{}'", path));
    }
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config", fmt::format("'{}' is not valid JSON: {}", path, e.what()));
    }
    return run_config_from_json(doc);
}

json to_json(const MechanismParams& p) {
    return {{"k_S", p.k_S},
            {"l", p.l},
            {"d", p.d},
            {"x_min", p.x_min},
            {"x_max", p.x_max},
            {"n_detents", p.n_detents},
            {"tooth_clearance", p.tooth_clearance},
            {"m_pivot", p.m_pivot},
            {"c_pivot", p.c_pivot},
            {"k_s", p.k_s},
            {"k_p", p.k_p},
            {"f_engage", p.f_engage},
            {"f_disengage", p.f_disengage},
            {"f0", p.f0},
            {"f_max", p.f_max},
            {"click_travel", p.click_travel}};
}

json to_json(const MotionProfile& profile) {
    return {{"theta_max", profile.theta_max}, {"omega", profile.omega}, {"phase", profile.phase}};
}

json to_json(const SimConfig& c) {
    json schedule = json::array();
    for (const auto& cmd : c.schedule) {
        schedule.push_back({{"t", cmd.t}, {"direction", to_string(cmd.direction)}});
    }
    return {{"params", to_json(c.params)},
            {"profile", to_json(c.profile)},
            {"schedule", schedule},
            {"dt", c.dt},
            {"duration", c.duration},
            {"initial_shifter_index", c.initial_shifter_index},
            {"seed", c.seed}};
}

void write_trace_csv(std::ostream& os, const Trace& trace, const std::string& meta) {
    if (!meta.empty()) {
        os << "# " << meta << '\n';
    }
    os << kTraceHeader << '\n';
    std::size_t next_event = 0;
    std::string line;
    for (std::size_t k = 0; k < trace.samples.size(); ++k) {
        const TraceSample& s = trace.samples[k];
        const bool last = k + 1 == trace.samples.size();
        line = fmt::format("{},{},{},{},{},{},{},{},{},", s.t, s.theta, s.theta_dot, s.x, s.detent,
                           s.k, s.tau, s.tension, to_string(s.mode));
        bool first = true;
        while (next_event < trace.events.size() &&
               (last || trace.events[next_event].t <= s.t)) {
            const Event& e = trace.events[next_event++];
            if (!first) {
                line += ';';
            }
            first = false;
            line += fmt::format("{}@{}", to_string(e.kind), e.t);
        }
        line += '\n';
        os << line;
    }
}

Trace read_trace_csv(std::istream& is) {
    Trace trace;
    std::string line;
    bool header_seen = false;
    long row = 0;
    while (std::getline(is, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty() || line.front() == '#') {
            continue;
        }
        if (!header_seen) {
            if (line != kTraceHeader) {
                throw ConfigError("trace", fmt::format("expected header '{}'", kTraceHeader));
            }
            header_seen = true;
            continue;
        }
        const std::string where = fmt::format("trace.row[{}]", row);
        const auto fields = split(line, ',');
        if (fields.size() != 10) {
            throw ConfigError(where, fmt::format("expected 10 columns, got {}", fields.size()));
        }
        TraceSample s;
        s.t = parse_double(fields[0], where + ".t");
        s.theta = parse_double(fields[1], where + ".theta");
        s.theta_dot = parse_double(fields[2], where + ".theta_dot");
        s.x = parse_double(fields[3], where + ".x");
        s.detent = parse_int(fields[4], where + ".detent");
        s.k = parse_double(fields[5], where + ".k");
        s.tau = parse_double(fields[6], where + ".tau");
        s.tension = parse_double(fields[7], where + ".tension");
        const auto mode = pawl_mode_from_string(fields[8]);
        if (!mode) {
            throw ConfigError(where + ".mode", fmt::format("unknown pawl mode '{}'", fields[8]));
        }
        s.mode = *mode;
        if (!fields[9].empty()) {
            for (auto token : split(fields[9], ';')) {
                const auto at = token.find('@');
                if (at == std::string_view::npos) {
                    throw ConfigError(where + ".event", fmt::format("malformed token '{}'", token));
                }
                const auto kind = event_kind_from_string(token.substr(0, at));
                if (!kind) {
                    throw ConfigError(where + ".event",
                                      fmt::format("unknown event kind '{}'", token.substr(0, at)));
                }
                trace.events.push_back({parse_double(token.substr(at + 1), where + ".event"),
                                        *kind, s.detent, s.x, s.theta, s.tension});
            }
        }
        trace.samples.push_back(s);
    }
    if (!header_seen) {
        throw ConfigError("trace", "missing header");
    }
    return trace;
}

json to_json(const Event& e) {
    return {{"t", e.t},         {"kind", to_string(e.kind)}, {"detent", e.detent},
            {"x", e.x},         {"theta", e.theta},          {"tension", e.tension}};
}

Event event_from_json(const json& doc) {
    require_object(doc, "event");
    Event e;
    try {
        e.t = doc.at("t").get<double>();
        const auto kind = event_kind_from_string(doc.at("kind").get<std::string>());
        if (!kind) {
            throw ConfigError("event.kind", "unknown event kind");
        }
        e.kind = *kind;
        e.detent = doc.at("detent").get<int>();
        e.x = doc.at("x").get<double>();
        e.theta = doc.at("theta").get<double>();
        e.tension = doc.at("tension").get<double>();
    } catch (const json::exception& ex) {
        throw ConfigError("event", ex.what());
    }
    return e;
}

void write_events_jsonl(std::ostream& os, const std::vector<Event>& events) {
    for (const auto& e : events) {
        os << to_json(e).dump() << '\n';
    }
}

std::vector<Event> read_events_jsonl(std::istream& is) {
    std::vector<Event> out;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) {
            continue;
        }
        try {
            out.push_back(event_from_json(json::parse(line)));
        } catch (const json::parse_error& ex) {
            throw ConfigError("event", ex.what());
        }
    }
    return out;
}

json to_json(const StaircaseReport& report) {
    json dwells = json::array();
    for (const auto& d : report.dwells) {
        dwells.push_back({{"detent", d.detent},
                          {"t_start", d.t_start},
                          {"t_end", d.t_end},
                          {"peak_abs_tau", d.peak_abs_tau},
                          {"float_amplitude", d.float_amplitude}});
    }
    json latencies = json::array();
    for (const auto& l : report.latencies) {
        latencies.push_back({{"t_command", l.t_command},
                             {"direction", to_string(l.direction)},
                             {"t_realized", optional_number(l.t_realized)},
                             {"latency", optional_number(l.latency)},
                             {"cancelled", l.cancelled}});
    }
    return {{"dwells", dwells},
            {"latencies", latencies},
            {"refused_clicks", report.refused_clicks},
            {"cancelled_clicks", report.cancelled_clicks}};
}

json to_json(const StiffnessRangeReport& report) {
    json rows = json::array();
    for (const auto& r : report.rows) {
        rows.push_back({{"detent", r.index}, {"x", r.x}, {"k", r.k}, {"tau_30deg", r.tau_30deg}});
    }
    return {{"detents", rows},
            {"hip_assist_fraction", report.hip_assist_fraction},
            {"hip_assist_note", report.hip_assist_note}};
}

json to_json(const TimingWindow& w) {
    return {{"q", w.q}, {"bound_fraction", w.bound_fraction}, {"exact_fraction", w.exact_fraction}};
}

std::string format_staircase(const StaircaseReport& report) {
    std::string out = fmt::format("{:>6} {:>10} {:>10} {:>12} {:>12}\n", "detent", "t_start[s]",
                                  "t_end[s]", "peak|tau|[Nm]", "float[mm]");
    for (const auto& d : report.dwells) {
        out += fmt::format("{:>6} {:>10.3f} {:>10.3f} {:>12.3f} {:>12.3f}\n", d.detent, d.t_start,
                           d.t_end, d.peak_abs_tau, d.float_amplitude * 1e3);
    }
    out += fmt::format("\n{:>10} {:>5} {:>12} {:>11}\n", "click[s]", "dir", "realized[s]",
                       "latency[s]");
    for (const auto& l : report.latencies) {
        const std::string realized =
            l.cancelled ? "cancelled" : (l.t_realized ? fmt::format("{:.4f}", *l.t_realized) : "-");
        const std::string latency = l.latency ? fmt::format("{:.4f}", *l.latency) : "-";
        out += fmt::format("{:>10.3f} {:>5} {:>12} {:>11}\n", l.t_command, to_string(l.direction),
                           realized, latency);
    }
    out += fmt::format("refused clicks: {}\n", report.refused_clicks);
    return out;
}

std::string format_stiffness_range(const StiffnessRangeReport& report) {
    std::string out = fmt::format("{:>6} {:>10} {:>10} {:>14}\n", "detent", "x[mm]", "k[Nm/rad]",
                                  "tau(30deg)[Nm]");
    for (const auto& r : report.rows) {
        out += fmt::format("{:>6} {:>10.4f} {:>10.3f} {:>14.3f}\n", r.index, r.x * 1e3, r.k,
                           r.tau_30deg);
    }
    out += fmt::format("note: {}\n", report.hip_assist_note);
    return out;
}

std::string format_timing_windows(const std::vector<TimingWindow>& windows) {
    std::string out = fmt::format("{:>12} {:>14} {:>14}\n", "q", "bound dt/T", "exact dt/T");
    for (const auto& w : windows) {
        out += fmt::format("{:>12.6g} {:>14.6f} {:>14.6f}\n", w.q, w.bound_fraction,
                           w.exact_fraction);
    }
    out += "exact window: (1/pi) asin(sqrt(q)) about one equilibrium crossing (reconstructed)\n";
    return out;
}

} // namespace vss
