#include "vss/analysis.hpp"

#include "vss/errors.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fmt/format.h>
#include <fmt/ranges.h>
#include <numbers>
#include <set>

namespace vss {

double reaction_force_max(const MechanismParams& params, double x, double theta_max) {
    return reaction_force(params, x, theta_max);
}

TimingWindow timing_window(double q) {
    if (!(q >= 0.0) || !std::isfinite(q)) {
        throw DomainError(fmt::format("force ratio q = {} must be non-negative", q));
    }
    const double root = std::sqrt(std::min(q, 1.0));
    return {q, 2.0 / std::numbers::pi * root, std::asin(root) / std::numbers::pi};
}

double shiftable_angle(const MechanismParams& params, double x, double f_avail) {
    if (!(f_avail >= 0.0)) {
        throw DomainError(fmt::format("available force {} N must be non-negative", f_avail));
    }
    if (!(x >= 0.0) || !(x < params.span())) {
        throw DomainError(fmt::format("pivot position {} m outside [0, {}) m", x, params.span()));
    }
    const double gap = params.span() - x;
    const double gradient = 2.0 * params.k_S * x * params.span() / (gap * gap * gap);
    if (gradient == 0.0) {
        return kThetaGuard;
    }
    return std::min(std::sqrt(2.0 * f_avail / gradient), kThetaGuard);
}

StiffnessRangeReport stiffness_range_report(const MechanismParams& params) {
    constexpr double thirty_deg = std::numbers::pi / 6.0;
    StiffnessRangeReport report;
    for (int i = 1; i <= params.n_detents; ++i) {
        const double x = detent_position(params, i);
        report.rows.push_back({i, x, stiffness(params, x), torque_linear(params, x, thirty_deg)});
    }
    return report;
}

std::vector<double> estimate_torque_trace(const Trace& trace, const CalibrationTable& table) {
    std::set<int> missing;
    for (const auto& s : trace.samples) {
        if (!table.has(s.detent)) {
            missing.insert(s.detent);
        }
    }
    if (!missing.empty()) {
        throw LookupError(
            fmt::format("calibration table lacks detents {}", fmt::join(missing, ", ")));
    }
    std::vector<double> out;
    out.reserve(trace.samples.size());
    for (const auto& s : trace.samples) {
        out.push_back(torque_from_calibration(table, s.detent, s.theta));
    }
    return out;
}

StaircaseReport staircase_metrics(const Trace& trace, const MechanismParams& params) {
    StaircaseReport report;
    for (const auto& s : trace.samples) {
        if (report.dwells.empty() || report.dwells.back().detent != s.detent) {
            report.dwells.push_back({s.detent, s.t, s.t, 0.0, 0.0});
        }
        Dwell& d = report.dwells.back();
        d.t_end = s.t;
        d.peak_abs_tau = std::max(d.peak_abs_tau, std::abs(s.tau));
        d.float_amplitude =
            std::max(d.float_amplitude, std::abs(s.x - detent_position(params, s.detent)));
    }

    // Indices into report.latencies of clicks still waiting for their effect.
    std::deque<std::size_t> pending_up;
    std::deque<std::size_t> pending_down;
    auto cancel = [&](std::deque<std::size_t>& opposite, const Event& e, ShiftDirection dir) {
        if (opposite.empty()) {
            return false;
        }
        report.latencies[opposite.back()].cancelled = true;
        opposite.pop_back();
        report.latencies.push_back({e.t, dir, {}, {}, true});
        report.cancelled_clicks += 2;
        return true;
    };
    auto realize = [&](std::deque<std::size_t>& pending, double t) {
        if (pending.empty()) {
            return;
        }
        ShiftLatency& l = report.latencies[pending.front()];
        l.t_realized = t;
        l.latency = t - l.t_command;
        pending.pop_front();
    };

    for (const auto& e : trace.events) {
        switch (e.kind) {
        case EventKind::ShiftUp:
            if (!cancel(pending_down, e, ShiftDirection::Up)) {
                pending_up.push_back(report.latencies.size());
                report.latencies.push_back({e.t, ShiftDirection::Up, {}, {}});
            }
            break;
        case EventKind::ShiftDown:
            if (!cancel(pending_up, e, ShiftDirection::Down)) {
                pending_down.push_back(report.latencies.size());
                report.latencies.push_back({e.t, ShiftDirection::Down, {}, {}});
            }
            break;
        case EventKind::DetentAdvance:
            realize(pending_up, e.t);
            break;
        case EventKind::DetentDrop:
            realize(pending_down, e.t);
            break;
        case EventKind::RefusedClick:
            ++report.refused_clicks;
            break;
        default:
            break;
        }
    }
    return report;
}

double spring_work(const Trace& trace, std::size_t first, std::size_t last) {
    if (first > last || last >= trace.samples.size()) {
        throw RangeError(fmt::format("sample range [{}, {}] outside the trace of {} samples", first,
                                     last, trace.samples.size()));
    }
    double work = 0.0;
    for (std::size_t i = first; i < last; ++i) {
        const auto& a = trace.samples[i];
        const auto& b = trace.samples[i + 1];
        work += 0.5 * (a.tau + b.tau) * (b.theta - a.theta);
    }
    return work;
}

} // namespace vss
