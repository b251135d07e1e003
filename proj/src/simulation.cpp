#include "vss/simulation.hpp"

#include "vss/errors.hpp"

#include <cmath>
#include <fmt/format.h>
#include <numbers>
#include <spdlog/spdlog.h>

namespace vss {

double MotionProfile::period() const noexcept {
    return 2.0 * std::numbers::pi / omega;
}

void MotionProfile::validate() const {
    if (!(theta_max >= 0.0) || theta_max > kThetaGuard) {
        throw ConfigError("profile.theta_max", "must lie in [0, pi/2]");
    }
    if (!(omega > 0.0) || !std::isfinite(omega)) {
        throw ConfigError("profile.omega", "must be positive");
    }
    if (!std::isfinite(phase)) {
        throw ConfigError("profile.phase", "must be finite");
    }
}

AngleSample prescribed_theta(const MotionProfile& profile, double t) {
    if (!(t >= 0.0)) {
        throw DomainError(fmt::format("time {} s is negative", t));
    }
    const double arg = profile.omega * t + profile.phase;
    return {profile.theta_max * std::sin(arg), profile.theta_max * profile.omega * std::cos(arg)};
}

void SimConfig::validate() const {
    params.validate();
    profile.validate();
    if (!(dt > 0.0) || dt > kMaxTimeStep) {
        throw ConfigError("dt", fmt::format("must lie in (0, {}] s, got {}", kMaxTimeStep, dt));
    }
    if (!(duration > 0.0) || !std::isfinite(duration)) {
        throw ConfigError("duration", fmt::format("must be positive, got {}", duration));
    }
    if (initial_shifter_index < 1 || initial_shifter_index > params.n_detents) {
        throw ConfigError("initial_shifter_index",
                          fmt::format("must lie in 1..{}", params.n_detents));
    }
    for (std::size_t i = 0; i < schedule.size(); ++i) {
        if (!(schedule[i].t >= 0.0) || !std::isfinite(schedule[i].t)) {
            throw ConfigError(fmt::format("schedule[{}].t", i), "must be non-negative");
        }
        if (i > 0 && schedule[i].t < schedule[i - 1].t) {
            throw ConfigError(fmt::format("schedule[{}].t", i), "schedule must be sorted by t");
        }
    }
}

long SimConfig::step_count() const {
    return static_cast<long>(std::ceil(duration / dt - 1e-9));
}

TraceSample make_sample(const MechanismParams& params, const MotionProfile& profile,
                        const PivotState& state, double t) {
    const AngleSample a = prescribed_theta(profile, t);
    TraceSample s;
    s.t = t;
    s.theta = a.theta;
    s.theta_dot = a.theta_dot;
    s.x = state.x;
    s.detent = state.detent;
    s.k = stiffness(params, state.x);
    s.tau = s.k * a.theta;
    s.tension = state.tension;
    s.mode = state.mode;
    return s;
}

Simulator::Simulator(SimConfig config) : config_(std::move(config)) {
    config_.validate();
    state_ = initial_pivot_state(config_.params, config_.initial_shifter_index);
    apply_due_clicks(0.0, initial_events_);
}

double Simulator::time() const noexcept {
    return static_cast<double>(step_) * config_.dt;
}

TraceSample Simulator::sample() const {
    return make_sample(config_.params, config_.profile, state_, time());
}

void Simulator::queue_shift(ShiftDirection direction) {
    live_.push_back(direction);
}

void Simulator::set_profile(const MotionProfile& profile) {
    profile.validate();
    const double t = time();
    MotionProfile next = profile;
    next.phase = config_.profile.omega * t + config_.profile.phase - profile.omega * t;
    config_.profile = next;
}

void Simulator::apply_due_clicks(double t, std::vector<Event>& events) {
    const double theta = prescribed_theta(config_.profile, t).theta;
    const auto& schedule = config_.schedule;
    while (next_command_ < schedule.size() && schedule[next_command_].t <= t + kScheduleSlack) {
        apply_click(state_, config_.params, schedule[next_command_].direction, t, theta, events);
        ++next_command_;
    }
    while (!live_.empty()) {
        apply_click(state_, config_.params, live_.front(), t, theta, events);
        live_.pop_front();
    }
}

std::vector<Event> Simulator::step() {
    const double t0 = time();
    const double t1 = static_cast<double>(step_ + 1) * config_.dt;
    const MotionProfile profile = config_.profile;
    std::vector<Event> events;
    advance_pivot(state_, config_.params,
                  [&profile](double t) { return prescribed_theta(profile, t).theta; }, t0, t1,
                  events);
    ++step_;
    apply_due_clicks(t1, events);
    return events;
}

Trace simulate(const SimConfig& config) {
    Simulator sim(config);
    const long n = config.step_count();
    Trace trace;
    trace.samples.reserve(static_cast<std::size_t>(n) + 1);
    trace.events = sim.initial_events();
    trace.samples.push_back(sim.sample());
    for (long k = 0; k < n; ++k) {
        try {
            auto events = sim.step();
            trace.events.insert(trace.events.end(), events.begin(), events.end());
        } catch (const IntegrationError& e) {
            const TraceSample& last = trace.samples.back();
            throw IntegrationError(fmt::format(
                "{}; last good sample t = {} s, x = {} m, detent {}, theta = {} rad, tension = {} N",
                e.what(), last.t, last.x, last.detent, last.theta, last.tension));
        }
        trace.samples.push_back(sim.sample());
    }
    spdlog::debug("simulated {} steps, {} events", n, trace.events.size());
    return trace;
}

SimConfig replication_scenario() {
    SimConfig config;
    config.dt = 1e-3;
    config.duration = 60.0;
    config.initial_shifter_index = 1;
    for (int i = 0; i < 10; ++i) {
        config.schedule.push_back({2.0 + 1.5 * i, ShiftDirection::Up});
    }
    for (int i = 0; i < 10; ++i) {
        config.schedule.push_back({32.0 + 1.5 * i, ShiftDirection::Down});
    }
    return config;
}

} // namespace vss
