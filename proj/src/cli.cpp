#include "vss/cli.hpp"

#include "vss/analysis.hpp"
#include "vss/calibration.hpp"
#include "vss/errors.hpp"
#include "vss/io.hpp"
#include "vss/server.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fmt/chrono.h>
#include <fmt/format.h>
#include <fstream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

namespace vss::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr double kDegree = std::numbers::pi / 180.0;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void report_error(std::ostream& err, std::string_view kind, const std::string& message,
                  const std::string& field = {}) {
    json doc = {{"error", kind}, {"message", message}};
    if (!field.empty()) {
        doc["field"] = field;
    }
    err << doc.dump() << '\n';
}

SimConfig base_config(const std::string& config_path, const std::string& scenario,
                      OutputSpec* output = nullptr) {
    if (!config_path.empty() && !scenario.empty()) {
        throw UsageError("--config and --scenario are mutually exclusive");
    }
    if (!scenario.empty()) {
        if (scenario != "replication") {
            throw ConfigError("scenario", fmt::format("unknown scenario '{}'", scenario));
        }
        return replication_scenario();
    }
    if (!config_path.empty()) {
        RunConfig rc = load_run_config(config_path);
        if (output != nullptr) {
            *output = rc.output;
        }
        return rc.sim;
    }
    return SimConfig{};
}

fs::path resolve(const std::string& dir, const std::string& name) {
    const fs::path p(name);
    return p.is_absolute() ? p : fs::path(dir) / p;
}

std::ofstream open_output(const fs::path& path) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
    }
    return os;
}

std::string metadata_line(const SimConfig& config) {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    return fmt::format("vss-sim trace generated {:%Y-%m-%dT%H:%M:%SZ} config {}",
                       fmt::gmtime(now), to_json(config).dump());
}

// run -------------------------------------------------------------------------

struct RunOptions {
    std::string config;
    std::string scenario;
    std::string out;
    bool no_meta = false;
    bool quiet = false;
};

int do_run(const RunOptions& o, std::ostream& out) {
    OutputSpec output;
    const SimConfig config = base_config(o.config, o.scenario, &output);
    if (!o.out.empty()) {
        output.dir = o.out;
    }
    const Trace trace = simulate(config);
    const StaircaseReport report = staircase_metrics(trace, config.params);

    const fs::path trace_path = resolve(output.dir, output.trace);
    const fs::path events_path = resolve(output.dir, output.events);
    const fs::path report_path = resolve(output.dir, output.report);
    {
        auto os = open_output(trace_path);
        write_trace_csv(os, trace, o.no_meta ? std::string() : metadata_line(config));
    }
    {
        auto os = open_output(events_path);
        write_events_jsonl(os, trace.events);
    }
    {
        auto os = open_output(report_path);
        os << to_json(report).dump(2) << '\n';
    }
    if (!o.quiet) {
        out << format_staircase(report);
        out << fmt::format("wrote {}, {}, {}\n", trace_path.string(), events_path.string(),
                           report_path.string());
    }
    return kOk;
}

// sweep -----------------------------------------------------------------------

struct SweepOptions {
    std::string config;
    std::string scenario;
    std::vector<std::string> params;
    std::string out = ".";
};

struct SweepAxis {
    std::string name;
    std::vector<double> values;
};

SweepAxis parse_axis(const std::string& spec) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size()) {
        throw UsageError(fmt::format("--param expects NAME=v1,v2,..., got '{}'", spec));
    }
    SweepAxis axis{spec.substr(0, eq), {}};
    std::stringstream list(spec.substr(eq + 1));
    std::string item;
    while (std::getline(list, item, ',')) {
        try {
            std::size_t used = 0;
            axis.values.push_back(std::stod(item, &used));
            if (used != item.size()) {
                throw std::invalid_argument(item);
            }
        } catch (const std::logic_error&) {
            throw ConfigError(axis.name, fmt::format("'{}' is not a number", item));
        }
    }
    return axis;
}

SimConfig apply_axis(SimConfig config, const std::string& name, double value) {
    if (name == "theta_max") {
        config.profile.theta_max = value;
    } else if (name == "frequency_hz") {
        config.profile.omega = 2.0 * std::numbers::pi * value;
    } else {
        json p = to_json(config.params);
        if (!p.contains(name)) {
            throw ConfigError(name, "not a sweepable parameter");
        }
        if (name == "n_detents") {
            p[name] = static_cast<int>(value);
        } else {
            p[name] = value;
        }
        // The cable travel follows the pitch unless it is swept itself.
        if (name != "click_travel") {
            p.erase("click_travel");
        }
        config.params = params_from_json(p, "params");
    }
    return config;
}

int do_sweep(const SweepOptions& o, std::ostream& out) {
    const SimConfig base =
        base_config(o.config, o.scenario.empty() && o.config.empty() ? "replication" : o.scenario);
    std::vector<SweepAxis> axes;
    for (const auto& spec : o.params) {
        axes.push_back(parse_axis(spec));
    }
    if (axes.empty()) {
        throw UsageError("sweep needs at least one --param NAME=v1,v2,...");
    }

    const fs::path path = resolve(o.out, "sweep.csv");
    auto os = open_output(path);
    std::string header;
    for (const auto& a : axes) {
        header += a.name + ",";
    }
    header += "advances,drops,refused_clicks,max_detent,final_detent,max_float_m,"
              "max_up_latency_s,max_down_latency_s,unrealized_clicks,peak_abs_tau_nm";
    os << header << '\n';

    std::vector<std::size_t> index(axes.size(), 0);
    long points = 0;
    while (true) {
        SimConfig config = base;
        std::string row;
        for (std::size_t i = 0; i < axes.size(); ++i) {
            const double v = axes[i].values[index[i]];
            config = apply_axis(config, axes[i].name, v);
            row += format_number(v) + ",";
        }
        config.validate();
        const Trace trace = simulate(config);
        const StaircaseReport report = staircase_metrics(trace, config.params);
        int advances = 0;
        int drops = 0;
        for (const auto& e : trace.events) {
            advances += e.kind == EventKind::DetentAdvance;
            drops += e.kind == EventKind::DetentDrop;
        }
        int max_detent = 0;
        double max_float = 0.0;
        double peak_tau = 0.0;
        for (const auto& d : report.dwells) {
            max_detent = std::max(max_detent, d.detent);
            max_float = std::max(max_float, d.float_amplitude);
            peak_tau = std::max(peak_tau, d.peak_abs_tau);
        }
        double max_up = 0.0;
        double max_down = 0.0;
        int unrealized = 0;
        for (const auto& l : report.latencies) {
            if (l.cancelled) {
                continue;
            }
            if (!l.latency) {
                ++unrealized;
                continue;
            }
            (l.direction == ShiftDirection::Up ? max_up : max_down) =
                std::max(l.direction == ShiftDirection::Up ? max_up : max_down, *l.latency);
        }
        row += fmt::format("{},{},{},{},{},{},{},{},{},{}", advances, drops, report.refused_clicks,
                           max_detent, trace.samples.back().detent, format_number(max_float),
                           format_number(max_up), format_number(max_down), unrealized,
                           format_number(peak_tau));
        os << row << '\n';
        ++points;

        std::size_t i = 0;
        for (; i < axes.size(); ++i) {
            if (++index[i] < axes[i].values.size()) {
                break;
            }
            index[i] = 0;
        }
        if (i == axes.size()) {
            break;
        }
    }
    out << fmt::format("wrote {} sweep points to {}\n", points, path.string());
    return kOk;
}

// analyze ---------------------------------------------------------------------

struct AnalyzeOptions {
    std::string config;
    std::string trace;
    std::string out;
    std::vector<double> q = {1e-4, 0.01, 0.04, 0.25, 1.0};
    bool json_output = false;
};

int do_analyze(const AnalyzeOptions& o, std::ostream& out) {
    const SimConfig config = base_config(o.config, {});
    json doc;
    std::string text;
    if (!o.trace.empty()) {
        std::ifstream in(o.trace, std::ios::binary);
        if (!in) {
            throw ConfigError("trace", fmt::format("cannot open '{}'", o.trace));
        }
        const Trace trace = read_trace_csv(in);
        if (trace.samples.empty()) {
            throw ConfigError("trace", "no samples");
        }
        const StaircaseReport report = staircase_metrics(trace, config.params);
        doc = to_json(report);
        text = format_staircase(report);
    } else {
        const StiffnessRangeReport range = stiffness_range_report(config.params);
        std::vector<TimingWindow> windows;
        json q_rows = json::array();
        for (double q : o.q) {
            windows.push_back(timing_window(q));
            q_rows.push_back(to_json(windows.back()));
        }
        // Window each detent offers to a hand limited to f_max at the
        // configured swing amplitude.
        json detent_rows = json::array();
        std::vector<TimingWindow> detent_windows;
        std::string detent_text = fmt::format("{:>6} {:>12} {:>10} {:>14} {:>14}\n", "detent",
                                              "F_max[N]", "q", "exact dt/T", "theta_w[rad]");
        for (const auto& row : range.rows) {
            const double f_peak = reaction_force_max(config.params, row.x, config.profile.theta_max);
            const double q = f_peak > 0.0 ? config.params.f_max / f_peak : 1.0;
            const TimingWindow w = timing_window(q);
            const double theta_w = shiftable_angle(config.params, row.x, config.params.f_max);
            detent_rows.push_back({{"detent", row.index},
                                   {"F_max", f_peak},
                                   {"window", to_json(w)},
                                   {"shiftable_angle", theta_w}});
            detent_text += fmt::format("{:>6} {:>12.3f} {:>10.5f} {:>14.6f} {:>14.6f}\n",
                                       row.index, f_peak, w.q, w.exact_fraction, theta_w);
        }
        doc = {{"stiffness_range", to_json(range)},
               {"timing_windows", q_rows},
               {"per_detent", detent_rows},
               {"theta_max", config.profile.theta_max},
               {"timing_window_note", "exact window (1/pi) asin(sqrt(q)) is a reconstruction; "
                                      "the bound (2/pi) sqrt(q) dominates it"}};
        text = format_stiffness_range(range) + "\n" + format_timing_windows(windows) + "\n" +
               detent_text;
    }
    if (!o.out.empty()) {
        auto os = open_output(resolve(o.out, o.trace.empty() ? "analysis.json" : "report.json"));
        os << doc.dump(2) << '\n';
    }
    out << (o.json_output ? doc.dump(2) + "\n" : text);
    return kOk;
}

// serve -----------------------------------------------------------------------

struct ServeOptions {
    std::string config;
    ServerOptions server;
};

SessionServer* g_server = nullptr;

extern "C" void handle_signal(int) {
    if (g_server != nullptr) {
        g_server->stop();
    }
}

int do_serve(const ServeOptions& o, std::ostream& out) {
    SimConfig config = base_config(o.config, {});
    SessionServer server(std::move(config), o.server);
    out << fmt::format("listening on {}:{}\n", o.server.host, server.port()) << std::flush;
    g_server = &server;
    std::signal(SIGINT, handle_signal);
    std::signal(SIGTERM, handle_signal);
    server.run();
    g_server = nullptr;
    return kOk;
}

// calibrate -------------------------------------------------------------------

struct CalibrateOptions {
    std::string config;
    double step_deg = 1.0;
    double span_deg = 30.0;
    std::string out = "-";
};

int do_calibrate(const CalibrateOptions& o, std::ostream& out) {
    const SimConfig config = base_config(o.config, {});
    if (!(o.step_deg > 0.0)) {
        throw ConfigError("step_deg", "must be positive");
    }
    if (!(o.span_deg >= 0.0) || o.span_deg > 90.0) {
        throw ConfigError("span_deg", "must lie in [0, 90]");
    }
    const CalibrationTable table =
        generate_synthetic_calibration(config.params, o.step_deg * kDegree, o.span_deg * kDegree);
    if (o.out == "-") {
        write_calibration_csv(out, table);
    } else {
        auto os = open_output(o.out);
        write_calibration_csv(os, table);
    }
    return kOk;
}

} // namespace

void configure_logging() {
    static const bool once = [] {
        auto logger = spdlog::stderr_color_mt("vss");
        spdlog::set_default_logger(logger);
        return true;
    }();
    (void)once;
    spdlog::set_level(spdlog::level::warn);
    if (const char* level = std::getenv("VSS_SIM_LOG")) {
        const auto parsed = spdlog::level::from_str(level);
        // from_str maps unknown names to off; only honour real names.
        if (parsed != spdlog::level::off || std::string_view(level) == "off") {
            spdlog::set_level(parsed);
        } else {
            spdlog::warn("ignoring unknown VSS_SIM_LOG level '{}'", level);
        }
    }
}

int main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    configure_logging();
    CLI::App app{"Variable stiffness spring joint simulator", "vss-sim"};
    app.require_subcommand(1);

    RunOptions run;
    auto* run_cmd = app.add_subcommand("run", "simulate a configuration or built-in scenario");
    run_cmd->add_option("--config", run.config, "run configuration JSON");
    run_cmd->add_option("--scenario", run.scenario, "built-in scenario (replication)");
    run_cmd->add_option("--out", run.out, "output directory (overrides output.dir)");
    run_cmd->add_flag("--no-meta", run.no_meta, "omit the metadata comment line of the trace");
    run_cmd->add_flag("--quiet", run.quiet, "do not print the report");

    SweepOptions sweep;
    auto* sweep_cmd = app.add_subcommand("sweep", "grid over parameters, one summary row each");
    sweep_cmd->add_option("--config", sweep.config, "base configuration (default: replication)");
    sweep_cmd->add_option("--scenario", sweep.scenario, "built-in base scenario");
    sweep_cmd->add_option("--param", sweep.params, "NAME=v1,v2,... (repeatable)");
    sweep_cmd->add_option("--out", sweep.out, "output directory for sweep.csv");

    AnalyzeOptions analyze;
    auto* analyze_cmd = app.add_subcommand("analyze", "closed-form tables, or a trace report");
    analyze_cmd->add_option("--config", analyze.config, "configuration supplying the parameters");
    analyze_cmd->add_option("--trace", analyze.trace, "trace CSV to summarize");
    analyze_cmd->add_option("--out", analyze.out, "directory for the JSON result");
    analyze_cmd->add_option("--q", analyze.q, "force ratios for the timing-window table");
    analyze_cmd->add_flag("--json", analyze.json_output, "print JSON instead of text");

    ServeOptions serve;
    auto* serve_cmd = app.add_subcommand("serve", "live session endpoint");
    serve_cmd->add_option("--config", serve.config, "session configuration");
    serve_cmd->add_option("--host", serve.server.host, "bind address");
    serve_cmd->add_option("--port", serve.server.port, "TCP port (0 picks one)");
    serve_cmd->add_option("--tick-hz", serve.server.tick_hz, "state frame rate");
    serve_cmd->add_option("--speed", serve.server.speed, "simulated seconds per wall second");
    serve_cmd->add_option("--static", serve.server.static_dir, "directory served over HTTP");

    CalibrateOptions calibrate;
    auto* calibrate_cmd = app.add_subcommand("calibrate", "synthetic calibration table CSV");
    calibrate_cmd->add_option("--config", calibrate.config, "configuration supplying parameters");
    calibrate_cmd->add_option("--step-deg", calibrate.step_deg, "knot spacing [deg]");
    calibrate_cmd->add_option("--span-deg", calibrate.span_deg, "angle span +/- [deg]");
    calibrate_cmd->add_option("--out", calibrate.out, "output file, '-' for stdout");

    std::vector<std::string> storage{"vss-sim"};
    storage.insert(storage.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& s : storage) {
        argv.push_back(s.data());
    }
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        app.exit(e, out, err);
        return kOk;
    } catch (const CLI::CallForAllHelp& e) {
        app.exit(e, out, err);
        return kOk;
    } catch (const CLI::ParseError& e) {
        report_error(err, "usage", e.what());
        return kBadConfig;
    }

    try {
        if (run_cmd->parsed()) {
            return do_run(run, out);
        }
        if (sweep_cmd->parsed()) {
            return do_sweep(sweep, out);
        }
        if (analyze_cmd->parsed()) {
            return do_analyze(analyze, out);
        }
        if (serve_cmd->parsed()) {
            return do_serve(serve, out);
        }
        if (calibrate_cmd->parsed()) {
            return do_calibrate(calibrate, out);
        }
    } catch (const ConfigError& e) {
        report_error(err, "config", e.what(), e.field());
        return kBadConfig;
    } catch (const UsageError& e) {
        report_error(err, "usage", e.what());
        return kBadConfig;
    } catch (const PortInUseError& e) {
        report_error(err, "port_in_use", e.what(), "port");
        return kPortInUse;
    } catch (const std::exception& e) {
        report_error(err, "runtime", e.what());
        return kFailure;
    }
    return kFailure;
}

} // namespace vss::cli
