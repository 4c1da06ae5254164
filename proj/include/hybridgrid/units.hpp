#pragma once

#include "hybridgrid/errors.hpp"

namespace hybridgrid {

/// Per-subsystem normalization bases. Impedances normalize against
/// v_base^2 / s_base, powers against s_base.
struct SubsystemBases {
    double s_base_va = 0.0;
    double v_base_v = 0.0;
};

namespace units {

inline double impedance_base_ohm(const SubsystemBases& b) {
    return b.v_base_v * b.v_base_v / b.s_base_va;
}

inline double power_pu(double watts, const SubsystemBases& b) { return watts / b.s_base_va; }
inline double power_watts(double pu, const SubsystemBases& b) { return pu * b.s_base_va; }

/// Line resistance [ohm] -> per-unit conductance.
inline double conductance_pu(double r_ohm, const SubsystemBases& b) {
    return impedance_base_ohm(b) / r_ohm;
}
inline double resistance_ohm(double g_pu, const SubsystemBases& b) {
    return impedance_base_ohm(b) / g_pu;
}

/// Line reactance [ohm] -> per-unit susceptance.
inline double susceptance_pu(double x_ohm, const SubsystemBases& b) {
    return impedance_base_ohm(b) / x_ohm;
}
inline double reactance_ohm(double b_pu, const SubsystemBases& b) {
    return impedance_base_ohm(b) / b_pu;
}

/// Bus capacitance [farad] -> per-unit seconds (stored energy time constant).
inline double capacitance_pu_s(double farad, const SubsystemBases& b) {
    return farad * b.v_base_v * b.v_base_v / b.s_base_va;
}
inline double capacitance_farad(double c_pu_s, const SubsystemBases& b) {
    return c_pu_s * b.s_base_va / (b.v_base_v * b.v_base_v);
}

/// Droop gain [W/(rad/s)] -> per-unit seconds.
inline double droop_pu_s(double watts_per_rad_s, const SubsystemBases& b) {
    return watts_per_rad_s / b.s_base_va;
}

/// Voltage gain [W/V] -> per-unit (pu power per pu voltage).
inline double voltage_gain_pu(double watts_per_volt, const SubsystemBases& b) {
    return watts_per_volt * b.v_base_v / b.s_base_va;
}

/// Frequency/voltage ratio [(rad/s)/V] -> [(rad/s)/pu-V].
inline double freq_volt_ratio_per_pu(double rad_s_per_volt, const SubsystemBases& b) {
    return rad_s_per_volt * b.v_base_v;
}

}  // namespace units
}  // namespace hybridgrid
