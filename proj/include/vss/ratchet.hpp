// Self-locking pivot mechanism: Bowden cable and series spring, pawl
// engagement hysteresis, ratchet directionality, and the pivot equation of
// motion with detent latching.
//
// Rack model. Detent j has its seat near detent_position(j). Between detent
// j and j + 1 sits a tooth crest at their midpoint; the crest is the upper
// edge of detent j's cell and the lower edge of detent j + 1's cell, so the
// cells tile [x_min, x_max] and |x - detent_position(cell)| <= pitch / 2.
//
//  * Moving up over a crest needs the cable to beat the spring by more than
//    f0: tension > F(theta, x) + f0. Otherwise the crest stops the pivot.
//  * While the pawl is engaged the pivot cannot move below its seat (or,
//    if it has not reached the seat yet, below the crest it just passed).
//  * While the pawl is lifted the pivot is free down to x_min and every
//    crest it falls through is a detent drop.
//
// The seat of detent j is where the nominal cable command for j reaches the
// engage tension, clamped to [cell floor, detent_position(j)]; with the
// default parameters it is exactly detent_position(j).
#pragma once

#include "vss/mechanism.hpp"

#include <functional>
#include <optional>
#include <string_view>
#include <vector>

namespace vss {

enum class PawlMode { Engaged, Disengaged };

enum class ShiftDirection { Up, Down };

/// What, if anything, is holding the pivot still.
enum class Contact {
    Free,    // moving under cable, spring and damping forces
    Floor,   // resting on the seat, the crest behind it, or x_min
    Ceiling, // pulled against x_max
    Crest,   // pushed against the next tooth's crest, waiting for the gate
    Pinned,  // engaged seat coincides with x_max: no travel at all
};

enum class EventKind {
    DetentAdvance,
    DetentDrop,
    PawlEngage,
    PawlDisengage,
    Limit,
    RefusedClick,
    ShiftUp,   // accepted shifter click, cable shortened
    ShiftDown, // accepted shifter click, cable let out
};

std::string_view to_string(EventKind kind);
std::optional<EventKind> event_kind_from_string(std::string_view name);
std::string_view to_string(PawlMode mode);
std::optional<PawlMode> pawl_mode_from_string(std::string_view name);

/// One discrete event with the quantities needed to audit its cause.
struct Event {
    double t = 0.0;
    EventKind kind = EventKind::Limit;
    int detent = 0;      // detent after the event
    double x = 0.0;      // pivot position [m]
    double theta = 0.0;  // joint angle [rad]
    double tension = 0.0; // series-spring tension [N]
};

struct PivotState {
    double x = 0.0;          // pivot position [m]
    double v = 0.0;          // pivot velocity [m/s]
    int detent = 1;          // cell the pivot is in; the latched detent while engaged
    double u = 0.0;          // commanded cable position [m]
    int shifter_index = 1;   // 1..n_detents
    PawlMode mode = PawlMode::Engaged;
    double tension = 0.0;    // cached series-spring tension [N]
    Contact contact = Contact::Floor;
};

/// Joint angle as a function of time.
using AngleFn = std::function<double(double)>;

// Rack geometry ---------------------------------------------------------------

/// Upper edge of detent's cell: the crest toward detent + 1, or x_max.
double crest_position(const MechanismParams& params, int detent);
/// Lower edge of detent's cell: the crest from detent - 1, or x_min.
double cell_floor(const MechanismParams& params, int detent);
/// Where an engaged pivot in this detent comes to rest under load.
double seat_position(const MechanismParams& params, int detent);
/// Detent whose cell contains x.
int detent_cell(const MechanismParams& params, double x);

// Cable and pawl --------------------------------------------------------------

/// Cable position for a shifter index: detent_position + tooth_clearance / 2.
/// Throws RangeError when the index is outside 1..n_detents.
double cable_command(int shifter_index, const MechanismParams& params);

/// max(0, k_s (u - x)) clamped to f_max. A slack cable carries exactly 0.
double cable_tension(const MechanismParams& params, double u, double x);

/// Hysteresis: engage at f_s >= f_engage, lift at f_s < f_disengage.
PawlMode pawl_transition(PawlMode mode, double f_s, const MechanismParams& params);

/// Pivot seated in the detent selected by `shifter_index`, pawl engaged.
PivotState initial_pivot_state(const MechanismParams& params, int shifter_index);

struct PivotStepResult {
    PivotState state;
    std::vector<Event> events;
};

/// One shifter click. A click past either end is refused and leaves the
/// state unchanged apart from the REFUSED_CLICK event.
PivotStepResult apply_click(const PivotState& state, const MechanismParams& params,
                            ShiftDirection direction, double t, double theta);
void apply_click(PivotState& state, const MechanismParams& params, ShiftDirection direction,
                 double t, double theta, std::vector<Event>& events);

/// Advance the pivot by dt with the joint held at `theta`; event times are
/// relative to the start of the step.
PivotStepResult pivot_step(const PivotState& state, const MechanismParams& params, double theta,
                           double dt);

/// Advance the pivot over [t0, t0 + dt] with a time-varying joint angle.
PivotStepResult pivot_step(const PivotState& state, const MechanismParams& params,
                           const AngleFn& theta_at, double t0, double dt);

/// In-place form used by the simulation loop. Integrates with a fixed number
/// of RK4 sub-steps per call; every discrete transition is located by
/// bisection in time to kEventTimeTolerance before it is applied.
void advance_pivot(PivotState& state, const MechanismParams& params, const AngleFn& theta_at,
                   double t0, double t1, std::vector<Event>& events);

inline constexpr int kPivotSubsteps = 4;
inline constexpr double kEventTimeTolerance = 1e-9; // [s]

} // namespace vss
