#include "vss/ratchet.hpp"

#include "vss/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fmt/format.h>
#include <limits>

namespace vss {

namespace {

// Positional slack for seat selection; well above the distance a pivot can
// travel within one event-time tolerance, far below any rack dimension.
constexpr double kPosEps = 1e-7;          // [m]
constexpr double kForceTol = 1e-9;        // [N]
constexpr int kMaxTransitions = 100000;   // per sub-step
constexpr double kInf = std::numeric_limits<double>::infinity();

constexpr std::array<std::string_view, 8> kEventNames = {
    "DETENT_ADVANCE", "DETENT_DROP",  "PAWL_ENGAGE", "PAWL_DISENGAGE",
    "LIMIT",          "REFUSED_CLICK", "SHIFT_UP",   "SHIFT_DOWN",
};

// dk/dx with x held inside the travel; RK4 stages may overshoot a stop by a
// hair before the event is located.
double spring_gradient(const MechanismParams& p, double x) {
    const double xc = std::clamp(x, p.x_min, p.x_max);
    const double gap = p.span() - xc;
    return 2.0 * p.k_S * xc * p.span() / (gap * gap * gap);
}

double back_force(const MechanismParams& p, double x, double theta) {
    return 0.5 * spring_gradient(p, x) * theta * theta;
}

struct Kinematics {
    double x;
    double v;
};

Kinematics rk4(const PivotState& s, const MechanismParams& p, const AngleFn& theta_at, double t,
               double h) {
    const double th0 = theta_at(t);
    const double thm = theta_at(t + 0.5 * h);
    const double th1 = theta_at(t + h);
    auto accel = [&](double theta, double x, double v) {
        return (cable_tension(p, s.u, x) - back_force(p, x, theta) - p.c_pivot * v) / p.m_pivot;
    };
    const double k1x = s.v;
    const double k1v = accel(th0, s.x, s.v);
    const double k2x = s.v + 0.5 * h * k1v;
    const double k2v = accel(thm, s.x + 0.5 * h * k1x, k2x);
    const double k3x = s.v + 0.5 * h * k2v;
    const double k3v = accel(thm, s.x + 0.5 * h * k2x, k3x);
    const double k4x = s.v + h * k3v;
    const double k4v = accel(th1, s.x + h * k3x, k4x);
    return {s.x + h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x),
            s.v + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)};
}

double lower_stop(const MechanismParams& p, const PivotState& s) {
    if (s.mode == PawlMode::Disengaged) {
        return p.x_min;
    }
    const double seat = seat_position(p, s.detent);
    return s.x >= seat - kPosEps ? seat : cell_floor(p, s.detent);
}

void emit(std::vector<Event>& events, double t, EventKind kind, const PivotState& s,
          double theta) {
    events.push_back({t, kind, s.detent, s.x, theta, s.tension});
}

// Applies at most one instantaneous transition that holds at time t.
bool settle_once(PivotState& s, const MechanismParams& p, double t, double theta,
                 std::vector<Event>& events) {
    if (s.contact == Contact::Floor && s.mode == PawlMode::Disengaged &&
        s.x > p.x_min + kPosEps) {
        s.contact = Contact::Free;
        return true;
    }
    if (s.contact == Contact::Pinned && s.mode == PawlMode::Disengaged) {
        s.contact = Contact::Ceiling;
        return true;
    }
    if (s.contact == Contact::Ceiling && s.mode == PawlMode::Engaged &&
        seat_position(p, s.detent) >= p.x_max - kPosEps) {
        s.contact = Contact::Pinned;
        return true;
    }

    s.tension = cable_tension(p, s.u, s.x);
    const PawlMode next = pawl_transition(s.mode, s.tension, p);
    if (next != s.mode) {
        s.mode = next;
        emit(events, t, next == PawlMode::Engaged ? EventKind::PawlEngage : EventKind::PawlDisengage,
             s, theta);
        return true;
    }

    if (s.mode == PawlMode::Disengaged && s.detent > 1 && s.x < cell_floor(p, s.detent)) {
        --s.detent;
        emit(events, t, EventKind::DetentDrop, s, theta);
        return true;
    }

    // A click can open the gate for a pivot already waiting at the crest.
    if (s.contact == Contact::Crest && s.tension > back_force(p, s.x, theta) + p.f0) {
        s.contact = Contact::Free;
        s.v = 0.0;
        ++s.detent;
        emit(events, t, EventKind::DetentAdvance, s, theta);
        return true;
    }

    if (s.detent < p.n_detents && s.x > crest_position(p, s.detent)) {
        if (s.tension > back_force(p, s.x, theta) + p.f0) {
            ++s.detent;
            emit(events, t, EventKind::DetentAdvance, s, theta);
        } else {
            s.x = crest_position(p, s.detent);
            s.v = 0.0;
            s.contact = Contact::Crest;
            s.tension = cable_tension(p, s.u, s.x);
        }
        return true;
    }

    if (s.contact == Contact::Free && (s.x > p.x_max || (s.x >= p.x_max && s.v > 0.0))) {
        s.x = p.x_max;
        s.v = 0.0;
        s.contact = Contact::Ceiling;
        s.tension = cable_tension(p, s.u, s.x);
        emit(events, t, EventKind::Limit, s, theta);
        return true;
    }

    const double lo = lower_stop(p, s);
    if (s.contact == Contact::Free && (s.x < lo || (s.x <= lo && s.v < 0.0))) {
        s.x = lo;
        s.v = 0.0;
        s.contact = Contact::Floor;
        s.tension = cable_tension(p, s.u, s.x);
        // Resting on the pawl is not a travel limit; hitting the housing is.
        if (s.mode == PawlMode::Disengaged) {
            emit(events, t, EventKind::Limit, s, theta);
        }
        return true;
    }
    return false;
}

void settle(PivotState& s, const MechanismParams& p, double t, double theta,
            std::vector<Event>& events) {
    for (int guard = 0; settle_once(s, p, t, theta, events); ++guard) {
        if (guard > kMaxTransitions) {
            throw IntegrationError(fmt::format("transition cascade at t = {} s", t));
        }
    }
    s.tension = cable_tension(p, s.u, s.x);
}

// Pivot held by a stop; returns the time it leaves the stop, or tb.
double hold_contact(PivotState& s, const MechanismParams& p, const AngleFn& theta_at, double t,
                    double tb, std::vector<Event>& events) {
    if (s.contact == Contact::Pinned) {
        return tb;
    }
    enum class Exit { None, Up, Down };
    auto exit_at = [&](double tt) {
        const double net = s.tension - back_force(p, s.x, theta_at(tt));
        switch (s.contact) {
        case Contact::Floor:
            return net > 0.0 ? Exit::Up : Exit::None;
        case Contact::Ceiling:
            return net < 0.0 ? Exit::Down : Exit::None;
        case Contact::Crest:
            return net > p.f0 ? Exit::Up : (net < 0.0 ? Exit::Down : Exit::None);
        default:
            return Exit::None;
        }
    };

    Exit exit = exit_at(t);
    double te = t;
    if (exit == Exit::None) {
        if (exit_at(tb) == Exit::None) {
            return tb;
        }
        double lo = t;
        double hi = tb;
        while (hi - lo > kEventTimeTolerance) {
            const double mid = 0.5 * (lo + hi);
            if (exit_at(mid) != Exit::None) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        te = hi;
        exit = exit_at(hi);
    }

    const bool advance = s.contact == Contact::Crest && exit == Exit::Up;
    s.contact = Contact::Free;
    s.v = 0.0;
    if (advance) {
        ++s.detent;
        emit(events, te, EventKind::DetentAdvance, s, theta_at(te));
    }
    return te;
}

// Free motion until tb or the first discrete transition, located by bisection.
double fly(PivotState& s, const MechanismParams& p, const AngleFn& theta_at, double t, double tb) {
    const double lo_stop = lower_stop(p, s);
    const double crest = s.detent < p.n_detents ? crest_position(p, s.detent) : kInf;
    const double drop_edge =
        (s.mode == PawlMode::Disengaged && s.detent > 1) ? cell_floor(p, s.detent) : -kInf;

    auto triggered = [&](const Kinematics& k) {
        if (!std::isfinite(k.x) || !std::isfinite(k.v)) {
            return true;
        }
        if (k.x < lo_stop || k.x > p.x_max || k.x > crest || k.x < drop_edge) {
            return true;
        }
        return pawl_transition(s.mode, cable_tension(p, s.u, k.x), p) != s.mode;
    };

    auto commit = [&](const Kinematics& k, double at) {
        if (!std::isfinite(k.x) || !std::isfinite(k.v)) {
            throw IntegrationError(fmt::format(
                "non-finite pivot state at t = {} s (last good x = {} m, v = {} m/s, detent {})",
                at, s.x, s.v, s.detent));
        }
        s.x = k.x;
        s.v = k.v;
        s.tension = cable_tension(p, s.u, s.x);
    };

    const Kinematics end = rk4(s, p, theta_at, t, tb - t);
    if (!triggered(end)) {
        commit(end, tb);
        return tb;
    }
    double lo = 0.0;
    double hi = tb - t;
    while (hi - lo > kEventTimeTolerance) {
        const double mid = 0.5 * (lo + hi);
        if (triggered(rk4(s, p, theta_at, t, mid))) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    const double te = std::min(t + hi, tb);
    commit(rk4(s, p, theta_at, t, hi), te);
    return te;
}

void integrate_interval(PivotState& s, const MechanismParams& p, const AngleFn& theta_at,
                        double t, double tb, std::vector<Event>& events) {
    settle(s, p, t, theta_at(t), events);
    for (int guard = 0; t < tb; ++guard) {
        if (guard > kMaxTransitions) {
            throw IntegrationError(fmt::format("event cascade between t = {} s and {} s", t, tb));
        }
        t = s.contact == Contact::Free ? fly(s, p, theta_at, t, tb)
                                       : hold_contact(s, p, theta_at, t, tb, events);
        settle(s, p, t, theta_at(t), events);
    }
}

} // namespace

std::string_view to_string(EventKind kind) {
    return kEventNames[static_cast<std::size_t>(kind)];
}

std::optional<EventKind> event_kind_from_string(std::string_view name) {
    for (std::size_t i = 0; i < kEventNames.size(); ++i) {
        if (kEventNames[i] == name) {
            return static_cast<EventKind>(i);
        }
    }
    return std::nullopt;
}

std::string_view to_string(PawlMode mode) {
    return mode == PawlMode::Engaged ? "ENGAGED" : "DISENGAGED";
}

std::optional<PawlMode> pawl_mode_from_string(std::string_view name) {
    if (name == "ENGAGED") {
        return PawlMode::Engaged;
    }
    if (name == "DISENGAGED") {
        return PawlMode::Disengaged;
    }
    return std::nullopt;
}

double crest_position(const MechanismParams& params, int detent) {
    if (detent >= params.n_detents) {
        return params.x_max;
    }
    return 0.5 * (detent_position(params, detent) + detent_position(params, detent + 1));
}

double cell_floor(const MechanismParams& params, int detent) {
    if (detent <= 1) {
        return params.x_min;
    }
    return crest_position(params, detent - 1);
}

double seat_position(const MechanismParams& params, int detent) {
    const double engage_point = cable_command(detent, params) - params.f_engage / params.k_s;
    return std::clamp(engage_point, cell_floor(params, detent), detent_position(params, detent));
}

int detent_cell(const MechanismParams& params, double x) {
    const double rel = (x - params.x_min) / params.pitch();
    const int nearest = static_cast<int>(std::floor(rel + 0.5)) + 1;
    return std::clamp(nearest, 1, params.n_detents);
}

double cable_command(int shifter_index, const MechanismParams& params) {
    if (shifter_index < 1 || shifter_index > params.n_detents) {
        throw RangeError(
            fmt::format("shifter index {} outside 1..{}", shifter_index, params.n_detents));
    }
    return detent_position(params, shifter_index) + 0.5 * params.tooth_clearance;
}

double cable_tension(const MechanismParams& params, double u, double x) {
    const double stretch = u - x;
    if (!(stretch > 0.0)) {
        return 0.0;
    }
    return std::min(params.k_s * stretch, params.f_max);
}

PawlMode pawl_transition(PawlMode mode, double f_s, const MechanismParams& params) {
    if (mode == PawlMode::Disengaged && f_s >= params.f_engage - kForceTol) {
        return PawlMode::Engaged;
    }
    if (mode == PawlMode::Engaged && f_s < params.f_disengage - kForceTol) {
        return PawlMode::Disengaged;
    }
    return mode;
}

PivotState initial_pivot_state(const MechanismParams& params, int shifter_index) {
    PivotState s;
    s.shifter_index = shifter_index;
    s.u = cable_command(shifter_index, params);
    s.detent = shifter_index;
    s.x = seat_position(params, shifter_index);
    s.v = 0.0;
    s.mode = PawlMode::Engaged;
    s.contact = s.x >= params.x_max - kPosEps ? Contact::Pinned : Contact::Floor;
    s.tension = cable_tension(params, s.u, s.x);
    return s;
}

void apply_click(PivotState& state, const MechanismParams& params, ShiftDirection direction,
                 double t, double theta, std::vector<Event>& events) {
    const int target = state.shifter_index + (direction == ShiftDirection::Up ? 1 : -1);
    if (target < 1 || target > params.n_detents) {
        emit(events, t, EventKind::RefusedClick, state, theta);
        return;
    }
    state.shifter_index = target;
    state.u = cable_command(target, params);
    state.tension = cable_tension(params, state.u, state.x);
    emit(events, t, direction == ShiftDirection::Up ? EventKind::ShiftUp : EventKind::ShiftDown,
         state, theta);
    settle(state, params, t, theta, events);
}

PivotStepResult apply_click(const PivotState& state, const MechanismParams& params,
                            ShiftDirection direction, double t, double theta) {
    PivotStepResult out{state, {}};
    apply_click(out.state, params, direction, t, theta, out.events);
    return out;
}

void advance_pivot(PivotState& state, const MechanismParams& params, const AngleFn& theta_at,
                   double t0, double t1, std::vector<Event>& events) {
    if (!(t1 > t0)) {
        throw DomainError("pivot step requires dt > 0");
    }
    const double h = (t1 - t0) / kPivotSubsteps;
    for (int i = 0; i < kPivotSubsteps; ++i) {
        const double ta = t0 + i * h;
        const double tb = i + 1 == kPivotSubsteps ? t1 : t0 + (i + 1) * h;
        integrate_interval(state, params, theta_at, ta, tb, events);
    }
}

PivotStepResult pivot_step(const PivotState& state, const MechanismParams& params,
                           const AngleFn& theta_at, double t0, double dt) {
    PivotStepResult out{state, {}};
    advance_pivot(out.state, params, theta_at, t0, t0 + dt, out.events);
    return out;
}

PivotStepResult pivot_step(const PivotState& state, const MechanismParams& params, double theta,
                           double dt) {
    if (!std::isfinite(theta)) {
        throw IntegrationError("joint angle is not finite");
    }
    return pivot_step(state, params, [theta](double) { return theta; }, 0.0, dt);
}

} // namespace vss
