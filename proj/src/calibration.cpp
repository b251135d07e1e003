#include "vss/calibration.hpp"

#include "vss/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace vss {

namespace {

constexpr double kOriginTolerance = 0.1; // Nm

double interpolate(const CalibrationCurve& curve, double theta) {
    auto upper = std::lower_bound(curve.begin(), curve.end(), theta,
                                  [](const CalibrationPoint& p, double a) { return p.angle < a; });
    if (upper != curve.end() && upper->angle == theta) {
        return upper->torque;
    }
    const auto& hi = *upper;
    const auto& lo = *(upper - 1);
    const double w = (theta - lo.angle) / (hi.angle - lo.angle);
    return lo.torque + w * (hi.torque - lo.torque);
}

} // namespace

void CalibrationTable::set_curve(int detent, CalibrationCurve curve) {
    curves_[detent] = std::move(curve);
}

const CalibrationCurve& CalibrationTable::curve(int detent) const {
    auto it = curves_.find(detent);
    if (it == curves_.end()) {
        throw LookupError(fmt::format("calibration table has no curve for detent {}", detent));
    }
    return it->second;
}

void CalibrationTable::validate() const {
    for (const auto& [detent, curve] : curves_) {
        if (curve.empty()) {
            throw ConfigError(fmt::format("calibration.detent[{}]", detent), "empty curve");
        }
        for (std::size_t i = 1; i < curve.size(); ++i) {
            if (!(curve[i].angle > curve[i - 1].angle)) {
                throw ConfigError(fmt::format("calibration.detent[{}]", detent),
                                  "angles must be strictly increasing");
            }
        }
        if (curve.front().angle > 0.0 || curve.back().angle < 0.0) {
            throw ConfigError(fmt::format("calibration.detent[{}]", detent),
                              "curve must span angle 0");
        }
        if (std::abs(torque_from_calibration(*this, detent, 0.0)) > kOriginTolerance) {
            throw ConfigError(fmt::format("calibration.detent[{}]", detent),
                              "curve must pass through the origin");
        }
    }
    // Stiffer detents must produce at least as much torque magnitude at every
    // knot of the softer curve that the stiffer curve also covers.
    for (auto it = curves_.begin(); it != curves_.end(); ++it) {
        auto next = std::next(it);
        if (next == curves_.end()) {
            break;
        }
        const auto& soft = it->second;
        const auto& stiff = next->second;
        for (const auto& p : soft) {
            if (p.angle < stiff.front().angle || p.angle > stiff.back().angle) {
                continue;
            }
            const double stiff_torque = interpolate(stiff, p.angle);
            const double sign = p.angle >= 0.0 ? 1.0 : -1.0;
            if (sign * stiff_torque < sign * p.torque - 1e-9) {
                throw ConfigError(fmt::format("calibration.detent[{}]", next->first),
                                  fmt::format("torque at {} rad is below detent {}", p.angle,
                                              it->first));
            }
        }
    }
}

double torque_from_calibration(const CalibrationTable& table, int detent, double theta) {
    const auto& curve = table.curve(detent);
    if (curve.empty() || theta < curve.front().angle || theta > curve.back().angle) {
        throw RangeError(fmt::format("angle {} rad outside the calibrated span of detent {}",
                                     theta, detent));
    }
    return interpolate(curve, theta);
}

CalibrationTable generate_synthetic_calibration(const MechanismParams& params,
                                                double angle_step, double theta_span) {
    if (!(angle_step > 0.0)) {
        throw DomainError("angle_step must be positive");
    }
    if (!(theta_span >= 0.0) || theta_span > kThetaGuard) {
        throw DomainError("theta_span must lie in [0, pi/2]");
    }
    std::vector<double> angles;
    const auto n = static_cast<long>(std::floor(theta_span / angle_step + 1e-9));
    if (n * angle_step < theta_span - 1e-12) {
        angles.push_back(-theta_span);
    }
    for (long i = -n; i <= n; ++i) {
        angles.push_back(static_cast<double>(i) * angle_step);
    }
    if (n * angle_step < theta_span - 1e-12) {
        angles.push_back(theta_span);
    }

    CalibrationTable table;
    for (int detent = 1; detent <= params.n_detents; ++detent) {
        const double x = detent_position(params, detent);
        CalibrationCurve curve;
        curve.reserve(angles.size());
        for (double a : angles) {
            curve.push_back({a, torque_linear(params, x, a)});
        }
        table.set_curve(detent, std::move(curve));
    }
    return table;
}

void write_calibration_csv(std::ostream& os, const CalibrationTable& table) {
    os << "detent,angle_rad,torque_nm\n";
    for (const auto& [detent, curve] : table.curves()) {
        for (const auto& p : curve) {
            os << fmt::format("{},{},{}\n", detent, p.angle, p.torque);
        }
    }
}

CalibrationTable read_calibration_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) {
        throw ConfigError("calibration", "empty file");
    }
    if (!line.empty() && line.back() == '\r') {
        line.pop_back();
    }
    if (line != "detent,angle_rad,torque_nm") {
        throw ConfigError("calibration", "expected header 'detent,angle_rad,torque_nm'");
    }
    std::map<int, CalibrationCurve> curves;
    int row = 1;
    int last_detent = 0;
    while (std::getline(is, line)) {
        ++row;
        if (line.empty() || line == "\r") {
            continue;
        }
        std::istringstream fields(line);
        std::string a, b, c;
        if (!std::getline(fields, a, ',') || !std::getline(fields, b, ',') ||
            !std::getline(fields, c)) {
            throw ConfigError(fmt::format("calibration.row[{}]", row), "expected three columns");
        }
        try {
            const int detent = std::stoi(a);
            if (detent < last_detent) {
                throw ConfigError(fmt::format("calibration.row[{}]", row),
                                  "rows must be sorted by detent");
            }
            last_detent = detent;
            curves[detent].push_back({std::stod(b), std::stod(c)});
        } catch (const std::logic_error& e) {
            if (dynamic_cast<const ConfigError*>(&e) != nullptr) {
                throw;
            }
            throw ConfigError(fmt::format("calibration.row[{}]", row), "non-numeric field");
        }
    }
    CalibrationTable table;
    for (auto& [detent, curve] : curves) {
        table.set_curve(detent, std::move(curve));
    }
    table.validate();
    return table;
}

} // namespace vss
