// Static relations of the variable stiffness joint: the pivot-point
// stiffness law, the torque it produces, the force with which the loaded
// spring back-drives the pivot, and the detent geometry of the ratchet rack.
#pragma once

#include <vector>

namespace vss {

/// Physical constants of the joint, springs, ratchet and cable. SI units.
///
/// Default values are the prototype's: k_S = 24 Nm/rad, k_s = 6000 N/m,
/// k_p = 485 N/m and ten shifter indices spanning 6..70 Nm/rad. The travel
/// limits are obtained by inverting the stiffness law at those two
/// stiffness values for l + d = 0.1 m.
struct MechanismParams {
    double k_S = 24.0;              // torsional spring stiffness [Nm/rad]
    double l = 0.080;               // spring-side linkage length [m]
    double d = 0.020;               // shaft-side linkage length [m]
    double x_min = 0.1 / 3.0;       // softest pivot position [m], k = 6 Nm/rad
    double x_max = 0.06306999333948177; // stiffest pivot position [m], k = 70 Nm/rad
    int n_detents = 10;             // ratchet detents (shifter indices)
    double tooth_clearance = 0.002; // free play within an engaged detent [m]
    double m_pivot = 0.05;          // mass of the stiffness-modulating mechanism [kg]
    double c_pivot = 20.0;          // viscous damping on the pivot [N s/m]
    double k_s = 6000.0;            // series spring [N/m]
    double k_p = 485.0;             // parallel (pawl-return) spring [N/m]
    double f_engage = 6.0;          // tension at or above which the pawl engages [N]
    double f_disengage = 3.0;       // tension below which the pawl lifts [N]
    double f0 = 5.0;                // extra force needed to push the pawl over a tooth [N]
    double f_max = 50.0;            // largest cable tension the hand can produce [N]
    double click_travel = (0.06306999333948177 - 0.1 / 3.0) / 9.0; // cable travel per click [m]

    /// l + d, the total linkage length.
    double span() const noexcept { return l + d; }

    /// Tooth pitch of the rack: spacing between adjacent detents.
    double pitch() const noexcept { return (x_max - x_min) / (n_detents - 1); }

    /// Throws ConfigError naming the first violated invariant.
    void validate() const;
};

/// Joint stiffness k(x) = k_S (x / (l + d - x))^2 [Nm/rad].
double stiffness(const MechanismParams& params, double x);

/// dk/dx = 2 k_S x (l + d) / (l + d - x)^3 [Nm/rad/m].
double stiffness_derivative(const MechanismParams& params, double x);

/// Small-deflection torque k(x) * theta [Nm]; |theta| <= pi/2.
double torque_linear(const MechanismParams& params, double x, double theta);

/// Force with which the deflected spring pushes the pivot toward lower
/// stiffness: (1/2) dk/dx theta^2 [N]. Never negative.
double reaction_force(const MechanismParams& params, double x, double theta);

/// Pivot position producing `k_target`; throws RangeError outside [k(x_min), k(x_max)].
double invert_stiffness(const MechanismParams& params, double k_target);

/// Pivot position of detent `index` (1-based), uniform pitch from x_min to x_max.
double detent_position(const MechanismParams& params, int index);

/// All n_detents positions, strictly increasing, first x_min and last x_max.
std::vector<double> detent_positions(const MechanismParams& params);

/// Largest deflection accepted by the linear torque model.
inline constexpr double kThetaGuard = 1.5707963267948966;

} // namespace vss
