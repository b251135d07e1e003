#include "oracles.hpp"
#include "vss/analysis.hpp"
#include "vss/errors.hpp"
#include "vss/io.hpp"
#include "vss/simulation.hpp"

#include <doctest.h>
#include <sstream>

using vss::EventKind;
using vss::ShiftDirection;
using vss::SimConfig;
using vss::Trace;

namespace {

std::string csv(const Trace& trace) {
    std::ostringstream os;
    vss::write_trace_csv(os, trace);
    return os.str();
}

const Trace& replication_trace() {
    static const Trace trace = vss::simulate(vss::replication_scenario());
    return trace;
}

std::string config_field(const SimConfig& c) {
    try {
        c.validate();
    } catch (const vss::ConfigError& e) {
        return e.field();
    }
    return "";
}

} // namespace

TEST_CASE("prescribed oscillation") {
    vss::MotionProfile prof;
    prof.theta_max = 0.349;
    prof.omega = 2 * std::numbers::pi * 0.8;
    const auto a0 = vss::prescribed_theta(prof, 0.0);
    CHECK(a0.theta == 0.0);
    CHECK(a0.theta_dot == doctest::Approx(prof.theta_max * prof.omega));
    const auto peak = vss::prescribed_theta(prof, prof.period() / 4);
    CHECK(peak.theta == doctest::Approx(0.349).epsilon(1e-12));
    CHECK(std::abs(peak.theta_dot) < 1e-12);
    // theta_dot is the derivative of theta.
    for (double t : {0.1, 0.7, 3.3}) {
        const double fd = oracle::central_difference(
            [&](double s) { return vss::prescribed_theta(prof, s).theta; }, t, 1e-6);
        CHECK(vss::prescribed_theta(prof, t).theta_dot == doctest::Approx(fd).epsilon(1e-7));
    }
    CHECK_THROWS_AS((void)vss::prescribed_theta(prof, -1.0), vss::DomainError);
    // The replication swing is +/-20 degrees.
    CHECK(vss::replication_scenario().profile.theta_max ==
          doctest::Approx(20 * std::numbers::pi / 180).epsilon(1e-15));
}

TEST_CASE("configuration validation") {
    SimConfig c;
    CHECK(config_field(c).empty());
    c.dt = 0.0;
    CHECK(config_field(c) == "dt");
    c.dt = 0.006;
    CHECK(config_field(c) == "dt");
    c = {};
    c.duration = 0.0;
    CHECK(config_field(c) == "duration");
    c = {};
    c.schedule = {{2.0, ShiftDirection::Up}, {1.0, ShiftDirection::Up}};
    CHECK(config_field(c) == "schedule[1].t");
    c = {};
    c.schedule = {{-1.0, ShiftDirection::Up}};
    CHECK(config_field(c) == "schedule[0].t");
    c = {};
    c.initial_shifter_index = 11;
    CHECK(config_field(c) == "initial_shifter_index");
    c = {};
    c.profile.omega = 0.0;
    CHECK(config_field(c) == "profile.omega");
    CHECK_THROWS_AS(vss::simulate(c), vss::ConfigError);
}

TEST_CASE("empty schedule keeps the detent and the stiffness law") {
    SimConfig c;
    c.duration = 10.0;
    c.initial_shifter_index = 4;
    const Trace trace = vss::simulate(c);
    REQUIRE(trace.samples.size() == 10001);
    const double p4 = vss::detent_position(c.params, 4);
    for (const auto& s : trace.samples) {
        CHECK(s.detent == 4);
        CHECK(std::abs(s.x - p4) <= c.params.tooth_clearance);
        const double k_ref = oracle::stiffness(24.0, 0.1, s.x);
        CHECK(s.k == doctest::Approx(k_ref).epsilon(1e-9));
        CHECK(s.tau == doctest::Approx(s.k * s.theta).epsilon(1e-12));
    }
    for (const auto& e : trace.events) {
        CHECK(e.kind != EventKind::DetentAdvance);
        CHECK(e.kind != EventKind::DetentDrop);
    }
}

TEST_CASE("samples sit on the time grid") {
    SimConfig c;
    c.duration = 0.5;
    c.dt = 0.002;
    const Trace trace = vss::simulate(c);
    REQUIRE(trace.samples.size() == 251);
    for (std::size_t k = 0; k < trace.samples.size(); ++k) {
        CHECK(trace.samples[k].t == static_cast<double>(k) * 0.002);
    }
}

TEST_CASE("simulation is deterministic") {
    auto c = vss::replication_scenario();
    c.duration = 20.0;
    CHECK(csv(vss::simulate(c)) == csv(vss::simulate(c)));
}

TEST_CASE("replication scenario: monotone staircase up then down") {
    const Trace& trace = replication_trace();
    REQUIRE(trace.samples.size() == 60001);
    std::vector<int> levels;
    for (const auto& s : trace.samples) {
        if (levels.empty() || levels.back() != s.detent) {
            levels.push_back(s.detent);
        }
    }
    const std::vector<int> expected = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 9, 8, 7, 6, 5, 4, 3, 2, 1};
    CHECK(levels == expected);
    int refused = 0;
    for (const auto& e : trace.events) {
        refused += e.kind == EventKind::RefusedClick;
    }
    CHECK(refused == 2);
}

TEST_CASE("replication scenario: advances only inside the force window") {
    const auto config = vss::replication_scenario();
    const auto& p = config.params;
    int advances = 0;
    for (const auto& e : replication_trace().events) {
        if (e.kind != EventKind::DetentAdvance) {
            continue;
        }
        ++advances;
        // theta_window solves f_max = F(theta, x) at the event position.
        auto k = [](double s) { return oracle::stiffness(24.0, 0.1, s); };
        const double dk = oracle::central_difference(k, e.x, 1e-7);
        const double window = oracle::bisect(
            [&](double th) { return 0.5 * dk * th * th - p.f_max; }, 0.0, 1.5);
        CHECK(std::abs(e.theta) < window);
        CHECK(std::abs(e.theta) <= vss::shiftable_angle(p, e.x, e.tension) + 1e-3);
    }
    CHECK(advances == 9);
}

TEST_CASE("replication scenario: halving dt leaves event times in place") {
    auto fine = vss::replication_scenario();
    fine.dt = 5e-4;
    const Trace a = replication_trace();
    const Trace b = vss::simulate(fine);
    REQUIRE(a.events.size() == b.events.size());
    for (std::size_t i = 0; i < a.events.size(); ++i) {
        CHECK(a.events[i].kind == b.events[i].kind);
        CHECK(std::abs(a.events[i].t - b.events[i].t) < 1e-4);
    }
}

TEST_CASE("deferred shift: an up click is realized within half a period") {
    auto gen = oracle::rng(30);
    for (int trial = 0; trial < 60; ++trial) {
        SimConfig c;
        c.initial_shifter_index = oracle::uniform_int(gen, 1, 9);
        c.profile.theta_max = oracle::uniform(gen, 0.1, 0.5);
        c.profile.omega = 2 * std::numbers::pi * oracle::uniform(gen, 0.5, 1.5);
        const double period = c.profile.period();
        // Any phase over a whole period.
        const double t_click = std::round(oracle::uniform(gen, 0.2, 0.2 + period) / c.dt) * c.dt;
        c.schedule = {{t_click, ShiftDirection::Up}};
        c.duration = t_click + period;
        const Trace trace = vss::simulate(c);
        double t_advance = -1.0;
        for (const auto& e : trace.events) {
            if (e.kind == EventKind::DetentAdvance) {
                t_advance = e.t;
                break;
            }
        }
        CAPTURE(trial);
        REQUIRE(t_advance >= t_click);
        CHECK(t_advance - t_click <= period / 2);
    }
}

TEST_CASE("spring torque is conservative while the detent is fixed") {
    SimConfig c;
    c.initial_shifter_index = 10; // pinned against the stiff end
    c.duration = 5.0;
    const Trace trace = vss::simulate(c);
    const long per_period = std::lround(c.profile.period() / c.dt);
    for (long start : {0L, 137L, 1000L}) {
        const double w = vss::spring_work(trace, static_cast<std::size_t>(start),
                                          static_cast<std::size_t>(start + per_period));
        CHECK(std::abs(w) < 1e-9);
    }
    // The engaged dwell at detent 10 of the replication run as well.
    const Trace& rep = replication_trace();
    std::size_t first = 0;
    while (rep.samples[first].detent != 10) {
        ++first;
    }
    first += 500; // let the pivot settle onto the stop
    const std::size_t last = first + static_cast<std::size_t>(10 * per_period);
    REQUIRE(rep.samples[last].detent == 10);
    CHECK(std::abs(vss::spring_work(rep, first, last)) < 1e-9);
}

TEST_CASE("simulator stepping matches simulate") {
    auto c = vss::replication_scenario();
    c.duration = 5.0;
    const Trace whole = vss::simulate(c);
    vss::Simulator sim(c);
    Trace stepped;
    stepped.events = sim.initial_events();
    stepped.samples.push_back(sim.sample());
    for (long k = 0; k < c.step_count(); ++k) {
        auto ev = sim.step();
        stepped.events.insert(stepped.events.end(), ev.begin(), ev.end());
        stepped.samples.push_back(sim.sample());
    }
    CHECK(csv(stepped) == csv(whole));
}

TEST_CASE("changing the profile keeps the swing phase continuous") {
    SimConfig c;
    vss::Simulator sim(c);
    for (int i = 0; i < 333; ++i) {
        sim.step();
    }
    const double before = sim.sample().theta;
    vss::MotionProfile next = sim.profile();
    next.omega *= 1.7;
    sim.set_profile(next);
    CHECK(sim.sample().theta == doctest::Approx(before).epsilon(1e-12));
    next.theta_max = -1.0;
    CHECK_THROWS_AS(sim.set_profile(next), vss::ConfigError);
}
