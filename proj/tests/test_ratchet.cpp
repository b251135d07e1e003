#include "oracles.hpp"
#include "vss/errors.hpp"
#include "vss/ratchet.hpp"

#include <doctest.h>

using vss::Event;
using vss::EventKind;
using vss::MechanismParams;
using vss::PawlMode;
using vss::PivotState;
using vss::ShiftDirection;

namespace {

const MechanismParams defaults{};

int count(const std::vector<Event>& events, EventKind kind) {
    int n = 0;
    for (const auto& e : events) {
        n += e.kind == kind;
    }
    return n;
}

// Force on the pivot from the deflected spring, written out independently.
double back_force(double x, double theta) {
    auto k = [](double s) { return oracle::stiffness(24.0, 0.1, s); };
    return 0.5 * oracle::central_difference(k, x, 1e-7) * theta * theta;
}

} // namespace

TEST_CASE("cable command") {
    CHECK(vss::cable_command(1, defaults) ==
          doctest::Approx(defaults.x_min + defaults.tooth_clearance / 2).epsilon(1e-15));
    // x_min + 4 pitches + 1 mm.
    const double pitch = (0.06306999333948177 - 0.1 / 3.0) / 9.0;
    CHECK(vss::cable_command(5, defaults) ==
          doctest::Approx(0.1 / 3.0 + 4 * pitch + 1e-3).epsilon(1e-14));
    CHECK(vss::cable_command(5, defaults) == doctest::Approx(0.047549626669399304).epsilon(1e-14));
    CHECK(vss::cable_command(2, defaults) - vss::cable_command(1, defaults) ==
          doctest::Approx(defaults.click_travel).epsilon(1e-12));
    CHECK_THROWS_AS((void)vss::cable_command(0, defaults), vss::RangeError);
    CHECK_THROWS_AS((void)vss::cable_command(11, defaults), vss::RangeError);
}

TEST_CASE("cable tension") {
    CHECK(vss::cable_tension(defaults, 0.05, 0.05) == 0.0);
    CHECK(vss::cable_tension(defaults, 0.045, 0.05) == 0.0);
    CHECK(vss::cable_tension(defaults, 0.055, 0.050) == doctest::Approx(30.0).epsilon(1e-9));
    CHECK(vss::cable_tension(defaults, 0.070, 0.050) == 50.0);
    auto gen = oracle::rng(20);
    for (int i = 0; i < 1000; ++i) {
        const double u = oracle::uniform(gen, 0.0, 0.1);
        const double x = oracle::uniform(gen, 0.0, 0.1);
        const double f = vss::cable_tension(defaults, u, x);
        CHECK(f >= 0.0);
        CHECK(f <= defaults.f_max);
    }
}

TEST_CASE("pawl hysteresis") {
    const auto& p = defaults;
    CHECK(vss::pawl_transition(PawlMode::Engaged, 0.5 * (p.f_engage + p.f_disengage), p) ==
          PawlMode::Engaged);
    CHECK(vss::pawl_transition(PawlMode::Disengaged, 0.5 * (p.f_engage + p.f_disengage), p) ==
          PawlMode::Disengaged);
    CHECK(vss::pawl_transition(PawlMode::Engaged, p.f_disengage, p) == PawlMode::Engaged);
    CHECK(vss::pawl_transition(PawlMode::Engaged, 0.0, p) == PawlMode::Disengaged);
    CHECK(vss::pawl_transition(PawlMode::Disengaged, p.f_engage, p) == PawlMode::Engaged);
    CHECK(vss::pawl_transition(PawlMode::Disengaged, p.f_max, p) == PawlMode::Engaged);
}

TEST_CASE("rack geometry tiles the travel") {
    const auto& p = defaults;
    CHECK(vss::cell_floor(p, 1) == p.x_min);
    CHECK(vss::crest_position(p, p.n_detents) == p.x_max);
    for (int j = 1; j < p.n_detents; ++j) {
        CHECK(vss::crest_position(p, j) == vss::cell_floor(p, j + 1));
        const double half = vss::crest_position(p, j) - vss::detent_position(p, j);
        CHECK(half == doctest::Approx(p.pitch() / 2).epsilon(1e-9));
        CHECK(half <= p.tooth_clearance);
    }
    for (int j = 1; j <= p.n_detents; ++j) {
        CHECK(vss::seat_position(p, j) == doctest::Approx(vss::detent_position(p, j)).epsilon(1e-14));
        CHECK(vss::detent_cell(p, vss::detent_position(p, j)) == j);
    }
}

TEST_CASE("initial state is seated and engaged") {
    for (int j = 1; j <= 10; ++j) {
        const PivotState s = vss::initial_pivot_state(defaults, j);
        CHECK(s.detent == j);
        CHECK(s.mode == PawlMode::Engaged);
        CHECK(s.v == 0.0);
        CHECK(s.tension == doctest::Approx(defaults.f_engage).epsilon(1e-9));
    }
}

TEST_CASE("clicks past either end are refused without changing the state") {
    const PivotState top = vss::initial_pivot_state(defaults, 10);
    auto r = vss::apply_click(top, defaults, ShiftDirection::Up, 1.0, 0.1);
    REQUIRE(r.events.size() == 1);
    CHECK(r.events[0].kind == EventKind::RefusedClick);
    CHECK(r.state.shifter_index == 10);
    CHECK(r.state.u == top.u);
    CHECK(r.state.x == top.x);

    const PivotState bottom = vss::initial_pivot_state(defaults, 1);
    r = vss::apply_click(bottom, defaults, ShiftDirection::Down, 1.0, 0.1);
    REQUIRE(r.events.size() == 1);
    CHECK(r.events[0].kind == EventKind::RefusedClick);
    CHECK(r.state.shifter_index == 1);
}

TEST_CASE("an accepted click moves the cable by one pitch") {
    const PivotState s = vss::initial_pivot_state(defaults, 4);
    auto r = vss::apply_click(s, defaults, ShiftDirection::Up, 0.0, 0.0);
    CHECK(r.state.shifter_index == 5);
    CHECK(r.state.u - s.u == doctest::Approx(defaults.click_travel).epsilon(1e-12));
    CHECK(count(r.events, EventKind::ShiftUp) == 1);
    r = vss::apply_click(s, defaults, ShiftDirection::Down, 0.0, 0.0);
    CHECK(r.state.shifter_index == 3);
    CHECK(count(r.events, EventKind::ShiftDown) == 1);
    // Letting the cable out slackens it and the pawl lifts.
    CHECK(r.state.mode == PawlMode::Disengaged);
    CHECK(count(r.events, EventKind::PawlDisengage) == 1);
}

TEST_CASE("engaged pivot with an undeflected spring advances one detent") {
    PivotState s = vss::initial_pivot_state(defaults, 3);
    // Commanding detent 4 stretches the cable by one pitch plus the engage
    // preload: about 25.8 N, far above f0 with theta = 0.
    s.u = vss::cable_command(4, defaults);
    s.tension = vss::cable_tension(defaults, s.u, s.x);
    CHECK(s.tension == doctest::Approx(defaults.k_s * defaults.pitch() + defaults.f_engage));
    const auto r = vss::pivot_step(s, defaults, 0.0, 0.05);
    CHECK(count(r.events, EventKind::DetentAdvance) == 1);
    CHECK(r.state.detent == 4);
    // Nothing loads the spring, so the pivot follows the cable to u and the
    // slack cable lets the pawl lift; it stays inside detent 4's band.
    CHECK(r.state.x == doctest::Approx(s.u).epsilon(1e-3));
    CHECK(std::abs(r.state.x - vss::detent_position(defaults, 4)) <= defaults.tooth_clearance);
    CHECK(r.state.mode == PawlMode::Disengaged);
    for (const auto& e : r.events) {
        if (e.kind == EventKind::DetentAdvance) {
            CHECK(e.tension > back_force(e.x, e.theta) + defaults.f0);
        }
    }
}

TEST_CASE("a loaded spring holds the pivot against the cable") {
    PivotState s = vss::initial_pivot_state(defaults, 5);
    s.u = vss::cable_command(6, defaults);
    // Peak swing: F is hundreds of newtons, the cable pulls 25.8 N.
    const auto r = vss::pivot_step(s, defaults, 0.349, 0.5);
    CHECK(count(r.events, EventKind::DetentAdvance) == 0);
    CHECK(r.state.detent == 5);
    CHECK(r.state.x == doctest::Approx(vss::detent_position(defaults, 5)).epsilon(1e-12));
}

TEST_CASE("slack cable at zero deflection: no drop, pivot stays") {
    PivotState s = vss::initial_pivot_state(defaults, 6);
    const auto clicked = vss::apply_click(s, defaults, ShiftDirection::Down, 0.0, 0.0);
    REQUIRE(clicked.state.mode == PawlMode::Disengaged);
    REQUIRE(clicked.state.u < clicked.state.x);
    const auto r = vss::pivot_step(clicked.state, defaults, 0.0, 1.0);
    CHECK(count(r.events, EventKind::DetentDrop) == 0);
    CHECK(r.state.detent == 6);
    CHECK(r.state.x == doctest::Approx(s.x).epsilon(1e-12));
    // Once the leg deflects the spring, the pivot is driven down one detent.
    const auto moved = vss::pivot_step(r.state, defaults, 0.2, 0.2);
    CHECK(count(moved.events, EventKind::DetentDrop) == 1);
    CHECK(moved.state.detent == 5);
    CHECK(moved.state.mode == PawlMode::Engaged);
}

TEST_CASE("non-positive steps and non-finite angles are rejected") {
    const PivotState s = vss::initial_pivot_state(defaults, 2);
    CHECK_THROWS_AS((void)vss::pivot_step(s, defaults, 0.1, 0.0), vss::DomainError);
    CHECK_THROWS_AS((void)vss::pivot_step(s, defaults, std::nan(""), 0.001), vss::IntegrationError);
}

TEST_CASE("event names round trip") {
    for (int i = 0; i <= static_cast<int>(EventKind::ShiftDown); ++i) {
        const auto kind = static_cast<EventKind>(i);
        CHECK(vss::event_kind_from_string(vss::to_string(kind)) == kind);
    }
    CHECK_FALSE(vss::event_kind_from_string("NOPE").has_value());
    CHECK(vss::pawl_mode_from_string("ENGAGED") == PawlMode::Engaged);
    CHECK(vss::pawl_mode_from_string("DISENGAGED") == PawlMode::Disengaged);
}

TEST_CASE("random trajectories respect the ratchet invariants") {
    auto gen = oracle::rng(21);
    const auto& p = defaults;
    for (int run = 0; run < 60; ++run) {
        const double amp = oracle::uniform(gen, 0.0, 0.6);
        const double omega = oracle::uniform(gen, 2.0, 12.0);
        const double phase = oracle::uniform(gen, 0.0, 6.3);
        auto theta = [=](double t) { return amp * std::sin(omega * t + phase); };
        PivotState s = vss::initial_pivot_state(p, oracle::uniform_int(gen, 1, 10));
        std::vector<Event> events;
        const double dt = 1e-3;
        PawlMode mode = s.mode;
        int latched = s.detent;
        for (int k = 0; k < 4000; ++k) {
            const double t0 = k * dt;
            const std::size_t before = events.size();
            vss::advance_pivot(s, p, theta, t0, t0 + dt, events);
            if (oracle::uniform(gen, 0.0, 1.0) < 0.004) {
                const auto dir = oracle::uniform(gen, 0.0, 1.0) < 0.55 ? ShiftDirection::Up
                                                                      : ShiftDirection::Down;
                vss::apply_click(s, p, dir, t0 + dt, theta(t0 + dt), events);
            }
            // Replay the new events in order, tracking the pawl.
            for (std::size_t i = before; i < events.size(); ++i) {
                const Event& e = events[i];
                CHECK(e.tension >= 0.0);
                CHECK(e.tension <= p.f_max);
                switch (e.kind) {
                case EventKind::PawlEngage:
                    CHECK(mode == PawlMode::Disengaged);
                    CHECK(e.tension >= p.f_engage - 1e-6);
                    mode = PawlMode::Engaged;
                    latched = e.detent;
                    break;
                case EventKind::PawlDisengage:
                    CHECK(mode == PawlMode::Engaged);
                    CHECK(e.tension < p.f_disengage);
                    mode = PawlMode::Disengaged;
                    break;
                case EventKind::DetentAdvance:
                    CHECK(e.tension > back_force(e.x, e.theta) + p.f0 - 1e-6);
                    break;
                case EventKind::DetentDrop:
                    CHECK(mode == PawlMode::Disengaged);
                    CHECK(back_force(e.x, e.theta) > 0.0);
                    break;
                default:
                    break;
                }
                if (mode == PawlMode::Engaged) {
                    CHECK(e.detent >= latched);
                    latched = e.detent;
                }
            }
            CHECK(mode == s.mode);
            CHECK(s.x >= p.x_min);
            CHECK(s.x <= p.x_max);
            CHECK(std::abs(s.x - vss::detent_position(p, s.detent)) <= p.tooth_clearance);
            if (s.mode == PawlMode::Engaged) {
                CHECK(s.detent >= latched);
                latched = s.detent;
                CHECK(s.x >= vss::detent_position(p, s.detent) - p.tooth_clearance);
            }
            CHECK(s.tension >= 0.0);
            CHECK(s.tension <= p.f_max);
        }
    }
}
