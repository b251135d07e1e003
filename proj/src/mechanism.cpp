#include "vss/mechanism.hpp"

#include "vss/errors.hpp"

#include <cmath>
#include <fmt/format.h>

namespace vss {

namespace {

// Positions derived from x_min/x_max by arithmetic may land an ulp outside.
constexpr double kPositionSlack = 1e-12;

void require_positive(double value, const char* field) {
    if (!(value > 0.0) || !std::isfinite(value)) {
        throw ConfigError(field, fmt::format("must be positive and finite, got {}", value));
    }
}

void check_position(const MechanismParams& params, double x) {
    if (!std::isfinite(x)) {
        throw DomainError(fmt::format("pivot position {} is not finite", x));
    }
    if (x < params.x_min - kPositionSlack) {
        throw DomainError(fmt::format("pivot position {} m is below x_min = {} m", x, params.x_min));
    }
    if (x > params.x_max + kPositionSlack) {
        throw DomainError(fmt::format("pivot position {} m is above x_max = {} m", x, params.x_max));
    }
}

} // namespace

void MechanismParams::validate() const {
    require_positive(k_S, "k_S");
    require_positive(l, "l");
    require_positive(d, "d");
    require_positive(k_s, "k_s");
    require_positive(k_p, "k_p");
    require_positive(m_pivot, "m_pivot");
    if (!(c_pivot >= 0.0) || !std::isfinite(c_pivot)) {
        throw ConfigError("c_pivot", "must be non-negative");
    }
    if (!(x_min > 0.0)) {
        throw ConfigError("x_min", "must be positive");
    }
    if (!(x_max > x_min)) {
        throw ConfigError("x_max", "must exceed x_min");
    }
    if (!(x_max < span())) {
        throw ConfigError("x_max", "must be below l + d");
    }
    if (n_detents < 2) {
        throw ConfigError("n_detents", "at least two detents are required");
    }
    if (!(tooth_clearance >= 0.0) || !(tooth_clearance < pitch())) {
        throw ConfigError("tooth_clearance",
                          fmt::format("must lie in [0, pitch = {} m)", pitch()));
    }
    if (!(f_disengage > 0.0)) {
        throw ConfigError("f_disengage", "must be positive");
    }
    if (!(f_engage > f_disengage)) {
        throw ConfigError("f_engage", "must exceed f_disengage");
    }
    if (!(f_max >= f_engage) || !std::isfinite(f_max)) {
        throw ConfigError("f_max", "must be at least f_engage");
    }
    if (!(f0 >= 0.0) || !std::isfinite(f0)) {
        throw ConfigError("f0", "must be non-negative");
    }
    if (!(std::abs(click_travel - pitch()) <= 1e-9 * pitch())) {
        throw ConfigError("click_travel",
                          fmt::format("must equal the detent pitch {} m", pitch()));
    }
}

double stiffness(const MechanismParams& params, double x) {
    check_position(params, x);
    const double ratio = x / (params.span() - x);
    return params.k_S * ratio * ratio;
}

double stiffness_derivative(const MechanismParams& params, double x) {
    check_position(params, x);
    const double gap = params.span() - x;
    return 2.0 * params.k_S * x * params.span() / (gap * gap * gap);
}

double torque_linear(const MechanismParams& params, double x, double theta) {
    if (!(std::abs(theta) <= kThetaGuard)) {
        throw DomainError(fmt::format("joint angle {} rad outside the +/-pi/2 model guard", theta));
    }
    return stiffness(params, x) * theta;
}

double reaction_force(const MechanismParams& params, double x, double theta) {
    return 0.5 * stiffness_derivative(params, x) * theta * theta;
}

double invert_stiffness(const MechanismParams& params, double k_target) {
    const double k_lo = stiffness(params, params.x_min);
    const double k_hi = stiffness(params, params.x_max);
    // Relative slack so that stiffness(x_max) itself always inverts.
    const double slack = 1e-12 * k_hi;
    if (!(k_target >= k_lo - slack && k_target <= k_hi + slack)) {
        throw RangeError(fmt::format(
            "stiffness {} Nm/rad is not reachable; achievable range is [{}, {}] Nm/rad",
            k_target, k_lo, k_hi));
    }
    const double r = std::sqrt(k_target / params.k_S);
    return params.span() * r / (1.0 + r);
}

double detent_position(const MechanismParams& params, int index) {
    if (index < 1 || index > params.n_detents) {
        throw RangeError(fmt::format("detent {} outside 1..{}", index, params.n_detents));
    }
    if (index == params.n_detents) {
        return params.x_max;
    }
    return params.x_min + (index - 1) * params.pitch();
}

std::vector<double> detent_positions(const MechanismParams& params) {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(params.n_detents));
    for (int i = 1; i <= params.n_detents; ++i) {
        out.push_back(detent_position(params, i));
    }
    return out;
}

} // namespace vss
