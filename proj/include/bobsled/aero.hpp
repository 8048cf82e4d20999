#pragma once

namespace bobsled::aero {

struct AirState {
    double p_air = 94700.0;  // Pa
    double T = 275.15;       // K
    double R = 287.05;       // J/(kg K), dry air

    [[nodiscard]] double density() const { return p_air / (R * T); }
    void validate() const;
};

// Drag equation: CxAx * v^2 * rho / 2.
double drag_force(double v, double CxAx, const AirState& air);

// Yaw sensitivity of the bobsled drag area, derived by scaling the Ahmed-body
// value (3.2 %/deg at a side/front area ratio of 2.3) to the sled's ratio of 5.
inline constexpr double kAhmedYawSensitivityPerDeg = 0.032;
inline constexpr double kAhmedAreaRatio = 2.3;
inline constexpr double kBobAreaRatio = 5.0;
inline constexpr double kAreaRatioScale = 2.17;  // kBobAreaRatio / kAhmedAreaRatio, as rounded in the derivation
inline constexpr double kBobYawSensitivityPerDeg = 0.0694;

struct AeroModel {
    double CxAx = 0.3;  // m^2
    double yaw_sensitivity = kBobYawSensitivityPerDeg;  // relative drag-area increase per degree of |beta|
    AirState air;

    void validate() const;
};

// CxAx * (1 + yaw_sensitivity * |beta in degrees|)
double drag_area_at_beta(const AeroModel& model, double beta);

struct AeroForces {
    double actual;  // along the driving direction, yaw-dependent drag area
    double ideal;   // base drag area
};

AeroForces aero_forces(const AeroModel& model, double v, double beta);

}  // namespace bobsled::aero
