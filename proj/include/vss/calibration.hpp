// Per-detent torque-angle curves used to estimate joint torque from the
// measured angle, the way a static deflection experiment would be used.
#pragma once

#include "vss/mechanism.hpp"

#include <iosfwd>
#include <map>
#include <vector>

namespace vss {

struct CalibrationPoint {
    double angle;  // [rad]
    double torque; // [Nm]
};

using CalibrationCurve = std::vector<CalibrationPoint>;

/// Torque-angle curves keyed by detent index.
///
/// Invariants (checked by validate()): angles strictly increasing within a
/// curve, every curve spans angle 0 and interpolates to |torque| <= 0.1 Nm
/// there, and at any common angle a higher detent yields at least as much
/// torque magnitude as a lower one.
class CalibrationTable {
public:
    void set_curve(int detent, CalibrationCurve curve);

    bool has(int detent) const { return curves_.count(detent) != 0; }
    const CalibrationCurve& curve(int detent) const;
    const std::map<int, CalibrationCurve>& curves() const noexcept { return curves_; }
    bool empty() const noexcept { return curves_.empty(); }

    void validate() const;

private:
    std::map<int, CalibrationCurve> curves_;
};

/// Piecewise-linear interpolation on the detent's curve. Exact at knots.
/// Throws LookupError for a missing detent and RangeError outside the span.
double torque_from_calibration(const CalibrationTable& table, int detent, double theta);

/// One curve per detent sampled from torque_linear at the detent positions,
/// knots at multiples of `angle_step` over [-theta_span, theta_span] (the
/// span ends are always knots).
CalibrationTable generate_synthetic_calibration(const MechanismParams& params,
                                                double angle_step, double theta_span);

/// CSV with header `detent,angle_rad,torque_nm`, rows sorted by (detent, angle).
void write_calibration_csv(std::ostream& os, const CalibrationTable& table);
CalibrationTable read_calibration_csv(std::istream& is);

} // namespace vss
