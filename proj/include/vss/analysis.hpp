// Closed-form shifting analysis and trace post-processing.
#pragma once

#include "vss/calibration.hpp"
#include "vss/mechanism.hpp"
#include "vss/simulation.hpp"

#include <optional>
#include <string>
#include <vector>

namespace vss {

/// Peak back-driving force over a swing of amplitude theta_max [N].
double reaction_force_max(const MechanismParams& params, double x, double theta_max);

/// Fraction of the period during which a force-limited hand can move the
/// pivot, for q = f_max / F_max.
struct TimingWindow {
    double q = 0.0;
    double bound_fraction = 0.0; // (2/pi) sqrt(q)
    double exact_fraction = 0.0; // (1/pi) asin(sqrt(q)), window about one zero crossing
};

/// q is clamped to 1 (the window cannot exceed half a period). Throws
/// DomainError for negative or non-finite q.
TimingWindow timing_window(double q);

/// Largest |theta| at which f_avail still beats the reaction force:
/// sqrt(2 f_avail / (dk/dx)), saturated at kThetaGuard. Accepts 0 <= x < l + d.
double shiftable_angle(const MechanismParams& params, double x, double f_avail);

struct DetentStiffness {
    int index = 0;
    double x = 0.0;         // [m]
    double k = 0.0;         // [Nm/rad]
    double tau_30deg = 0.0; // [Nm]
};

struct StiffnessRangeReport {
    std::vector<DetentStiffness> rows;
    // Quoted for the prototype, not recomputed: share of the average hip
    // torque of a 75 kg person walking at 1.6 m/s.
    double hip_assist_fraction = 0.35;
    std::string hip_assist_note =
        "peak assistance is about 35% of the average hip torque (75 kg, 1.6 m/s); quoted, not computed";
};

StiffnessRangeReport stiffness_range_report(const MechanismParams& params);

/// Torque estimated from the sampled angle and latched detent via the
/// calibration curves. Throws LookupError listing every missing detent.
std::vector<double> estimate_torque_trace(const Trace& trace, const CalibrationTable& table);

struct Dwell {
    int detent = 0;
    double t_start = 0.0;
    double t_end = 0.0;
    double peak_abs_tau = 0.0;    // [Nm]
    double float_amplitude = 0.0; // max |x - detent_position| [m]

    bool operator==(const Dwell&) const = default;
};

struct ShiftLatency {
    double t_command = 0.0;
    ShiftDirection direction = ShiftDirection::Up;
    std::optional<double> t_realized; // first matching detent change
    std::optional<double> latency;
    bool cancelled = false; // undone by an opposite click before taking effect

    bool operator==(const ShiftLatency&) const = default;
};

/// Derived from the samples and from event times and kinds only, so that a
/// trace reloaded from CSV yields an identical report.
struct StaircaseReport {
    std::vector<Dwell> dwells;
    std::vector<ShiftLatency> latencies;
    int refused_clicks = 0;
    int cancelled_clicks = 0;

    bool operator==(const StaircaseReport&) const = default;
};

/// Dwells are maximal runs of equal detent in the samples. Each accepted
/// click is paired with the next detent advance (up) or drop (down); a click
/// in the opposite direction cancels the most recent unrealized one.
StaircaseReport staircase_metrics(const Trace& trace, const MechanismParams& params);

/// Trapezoidal work of the joint torque over samples [first, last] [J].
double spring_work(const Trace& trace, std::size_t first, std::size_t last);

} // namespace vss
