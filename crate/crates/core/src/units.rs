//! Unit conversions at the API boundary.
//!
//! All internal frequencies are angular (rad/s) and all times are seconds.
//! Configuration files and CSV artifacts use GHz/MHz and ns/us.

use std::f64::consts::TAU;

/// GHz (ordinary frequency) to angular rad/s.
pub fn ghz(f: f64) -> f64 {
    TAU * 1e9 * f
}

/// MHz (ordinary frequency) to angular rad/s.
pub fn mhz(f: f64) -> f64 {
    TAU * 1e6 * f
}

/// kHz (ordinary frequency) to angular rad/s.
pub fn khz(f: f64) -> f64 {
    TAU * 1e3 * f
}

/// Angular rad/s to GHz.
pub fn to_ghz(w: f64) -> f64 {
    w / (TAU * 1e9)
}

/// Angular rad/s to MHz.
pub fn to_mhz(w: f64) -> f64 {
    w / (TAU * 1e6)
}

/// Angular rad/s to kHz.
pub fn to_khz(w: f64) -> f64 {
    w / (TAU * 1e3)
}

/// Nanoseconds to seconds.
pub fn ns(t: f64) -> f64 {
    1e-9 * t
}

/// Microseconds to seconds.
pub fn us(t: f64) -> f64 {
    1e-6 * t
}

/// Seconds to nanoseconds.
pub fn to_ns(t: f64) -> f64 {
    1e9 * t
}

/// Seconds to microseconds.
pub fn to_us(t: f64) -> f64 {
    1e6 * t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips() {
        assert!((to_ghz(ghz(5.905)) - 5.905).abs() < 1e-12);
        assert!((to_mhz(mhz(-0.23)) + 0.23).abs() < 1e-12);
        assert!((to_ns(ns(204.0)) - 204.0).abs() < 1e-12);
        assert!((to_us(us(14.0)) - 14.0).abs() < 1e-12);
    }

    #[test]
    fn angular_convention() {
        assert!((ghz(1.0) - TAU * 1e9).abs() < 1e-3);
        assert!((mhz(1000.0) - ghz(1.0)).abs() < 1e-3);
        assert!((khz(1e6) - ghz(1.0)).abs() < 1e-3);
    }
}
