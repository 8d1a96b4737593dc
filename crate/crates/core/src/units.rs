//! Unit conversions between the human-facing config units and SI.

use std::f64::consts::PI;

/// `2π × value` MHz to rad/s.
pub fn mhz_to_rad_per_s(mhz: f64) -> f64 {
    2.0 * PI * mhz * 1e6
}

/// `2π × value` kHz to rad/s.
pub fn khz_to_rad_per_s(khz: f64) -> f64 {
    2.0 * PI * khz * 1e3
}

pub fn rad_per_s_to_mhz(w: f64) -> f64 {
    w / (2.0 * PI * 1e6)
}

/// Angular frequency in rad/ns (the unit the published pulse parameters use)
/// to rad/s.
pub fn rad_per_ns_to_rad_per_s(w: f64) -> f64 {
    w * 1e9
}

pub fn rad_per_s_to_rad_per_ns(w: f64) -> f64 {
    w * 1e-9
}

pub fn ns_to_s(ns: f64) -> f64 {
    ns * 1e-9
}

pub fn us_to_s(us: f64) -> f64 {
    us * 1e-6
}

pub fn s_to_us(s: f64) -> f64 {
    s * 1e6
}

pub fn s_to_ns(s: f64) -> f64 {
    s * 1e9
}
