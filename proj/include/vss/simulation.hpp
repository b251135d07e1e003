// Fixed-step simulation of the joint under a prescribed sinusoidal leg
// swing and a schedule (or live stream) of shifter clicks.
#pragma once

#include "vss/mechanism.hpp"
#include "vss/ratchet.hpp"

#include <cstdint>
#include <deque>
#include <vector>

namespace vss {

/// theta(t) = theta_max sin(omega t + phase).
struct MotionProfile {
    double theta_max = 0.3490658503988659; // 20 deg [rad]
    double omega = 5.026548245743669;      // 2 pi 0.8 Hz [rad/s]
    double phase = 0.0;                    // [rad]

    double period() const noexcept;
    void validate() const;
};

struct AngleSample {
    double theta;     // [rad]
    double theta_dot; // [rad/s]
};

/// Throws DomainError for t < 0.
AngleSample prescribed_theta(const MotionProfile& profile, double t);

struct ShiftCommand {
    double t = 0.0;
    ShiftDirection direction = ShiftDirection::Up;
};

struct SimConfig {
    MechanismParams params;
    MotionProfile profile;
    std::vector<ShiftCommand> schedule; // sorted by t
    double dt = 1e-3;                   // (0, 0.005] s
    double duration = 60.0;             // s
    int initial_shifter_index = 1;
    std::uint64_t seed = 0;             // reserved

    /// Throws ConfigError naming the offending field.
    void validate() const;
    /// Number of dt steps covering the duration.
    long step_count() const;
};

struct TraceSample {
    double t = 0.0;
    double theta = 0.0;
    double theta_dot = 0.0;
    double x = 0.0;
    int detent = 1;
    double k = 0.0;
    double tau = 0.0;
    double tension = 0.0;
    PawlMode mode = PawlMode::Engaged;
};

/// Samples at t_k = k dt, k = 0..N, plus the ordered event log. An event
/// at time t belongs to the first sample with t_k >= t.
struct Trace {
    std::vector<TraceSample> samples;
    std::vector<Event> events;
};

/// Stepwise simulator. Step k integrates (t_k, t_k+1], then applies every
/// scheduled click with t <= t_k+1 and every queued live click, then records
/// the sample at t_k+1. Clicks therefore take effect at a step boundary.
class Simulator {
public:
    explicit Simulator(SimConfig config);

    const SimConfig& config() const noexcept { return config_; }
    const PivotState& state() const noexcept { return state_; }
    long step_index() const noexcept { return step_; }
    double time() const noexcept;

    /// Sample of the current boundary.
    TraceSample sample() const;

    /// Live click, applied at the end of the next step.
    void queue_shift(ShiftDirection direction);

    /// Changes the swing without a jump in the sine's argument.
    void set_profile(const MotionProfile& profile);
    const MotionProfile& profile() const noexcept { return config_.profile; }

    /// Advances one dt; returns the events produced, clicks included.
    std::vector<Event> step();

    /// Events raised while applying the clicks due at t = 0.
    const std::vector<Event>& initial_events() const noexcept { return initial_events_; }

private:
    void apply_due_clicks(double t, std::vector<Event>& events);

    SimConfig config_;
    PivotState state_;
    long step_ = 0;
    std::size_t next_command_ = 0;
    std::deque<ShiftDirection> live_;
    std::vector<Event> initial_events_;
};

TraceSample make_sample(const MechanismParams& params, const MotionProfile& profile,
                        const PivotState& state, double t);

/// Runs the whole configuration. IntegrationError messages carry the last
/// good sample.
Trace simulate(const SimConfig& config);

/// The leg-swing experiment: +/-20 deg at 0.8 Hz for 60 s, ten up clicks
/// every 1.5 s from t = 2 s, then ten down clicks every 1.5 s from t = 32 s.
/// The last click of each run hits the end of the shifter and is refused.
SimConfig replication_scenario();

inline constexpr double kMaxTimeStep = 0.005;     // [s]
inline constexpr double kScheduleSlack = 1e-9;    // [s]

} // namespace vss
