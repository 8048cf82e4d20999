#include "bobsled/aero.hpp"

#include "bobsled/common.hpp"

#include <cmath>

namespace bobsled::aero {

void AirState::validate() const {
    if (!(p_air > 0.0)) throw std::invalid_argument("p_air must be > 0");
    if (!(T > 0.0)) throw std::invalid_argument("air temperature must be > 0 K");
    if (!(R > 0.0)) throw std::invalid_argument("gas constant must be > 0");
}

void AeroModel::validate() const {
    if (!(CxAx > 0.0)) throw std::invalid_argument("CxAx must be > 0");
    if (!(yaw_sensitivity >= 0.0)) throw std::invalid_argument("yaw_sensitivity must be >= 0");
    air.validate();
}

double drag_force(double v, double CxAx, const AirState& air) {
    if (!(v >= 0.0)) {
        throw std::invalid_argument("drag_force needs v >= 0");
    }
    return CxAx * v * v * air.density() / 2.0;
}

double drag_area_at_beta(const AeroModel& model, double beta) {
    return model.CxAx * (1.0 + model.yaw_sensitivity * std::abs(rad_to_deg(beta)));
}

AeroForces aero_forces(const AeroModel& model, double v, double beta) {
    return {drag_force(v, drag_area_at_beta(model, beta), model.air), drag_force(v, model.CxAx, model.air)};
}

}  // namespace bobsled::aero
