#pragma once

// Physical constants (CODATA 2018). SI unless stated otherwise.
namespace fibsim {

inline constexpr double kElementaryCharge = 1.602176634e-19;  // C
inline constexpr double kBohrRadiusNm = 0.0529177210903;      // nm
inline constexpr double kCoulombEvNm = 1.4399645;             // e^2/(4 pi eps0), eV nm
inline constexpr double kBohrVelocityEnergyEv = 24801.6;      // (1/2) m_u v_Bohr^2, eV per amu

inline constexpr double kPi = 3.14159265358979323846;

}  // namespace fibsim
