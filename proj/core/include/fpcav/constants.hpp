#pragma once

#include <numbers>

namespace fpcav::constants {

inline constexpr double speed_of_light = 2.99792458e8;       // m/s
inline constexpr double vacuum_permittivity = 8.8541878128e-12; // F/m
inline constexpr double boltzmann = 1.380649e-23;            // J/K
inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

}  // namespace fpcav::constants
