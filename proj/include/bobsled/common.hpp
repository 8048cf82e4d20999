#pragma once

#include <Eigen/Core>

#include <numbers>
#include <stdexcept>
#include <string>

namespace bobsled {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kGravity = 9.81;  // m/s^2, fixed project-wide

inline constexpr double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }
inline constexpr double rad_to_deg(double rad) { return rad * 180.0 / std::numbers::pi; }

// Error taxonomy. The CLI maps these onto its exit codes:
//   std::invalid_argument / ConfigError -> 1, DataError -> 2, NumericalError -> 3.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace bobsled
