//! Physical constants and the single frequency/length conversion layer.
//!
//! Internally every frequency *difference* that enters a phase is angular
//! (rad/s). Beat frequencies quoted in MHz are cyclic and converted here, at
//! the I/O boundary, with `ω = 2πν`.

use std::f64::consts::PI;

use crate::error::{check_positive, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;

pub const NS_PER_S: f64 = 1e9;
pub const MM_PER_M: f64 = 1e3;

#[inline]
pub fn hz_to_angular(hz: f64) -> f64 {
    2.0 * PI * hz
}

#[inline]
pub fn angular_to_hz(omega: f64) -> f64 {
    omega / (2.0 * PI)
}

#[inline]
pub fn mhz_to_angular(mhz: f64) -> f64 {
    hz_to_angular(mhz * 1e6)
}

#[inline]
pub fn angular_to_mhz(omega: f64) -> f64 {
    angular_to_hz(omega) * 1e-6
}

/// Vacuum wave number `2π/λ` in rad/m.
#[inline]
pub fn wavenumber_from_nm(lambda_nm: f64) -> f64 {
    2.0 * PI / (lambda_nm * 1e-9)
}

/// Optical angular frequency `2πc/λ` in rad/s.
#[inline]
pub fn angular_from_nm(lambda_nm: f64) -> f64 {
    SPEED_OF_LIGHT * wavenumber_from_nm(lambda_nm)
}

/// Converts a velocity in m/s to mm/ns.
#[inline]
pub fn m_per_s_to_mm_per_ns(v: f64) -> f64 {
    v * MM_PER_M / NS_PER_S
}

macro_rules! positive_quantity {
    ($(#[$meta:meta])* $name:ident, $unit:literal) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
        pub struct $name(f64);

        impl $name {
            pub fn new(value: f64) -> Result<Self> {
                check_positive(concat!(stringify!($name), " (", $unit, ")"), value).map(Self)
            }

            #[inline]
            pub fn get(self) -> f64 {
                self.0
            }
        }
    };
}

positive_quantity!(
    /// Optical power.
    Watts,
    "W"
);
positive_quantity!(
    /// Angular frequency.
    RadPerSecond,
    "rad/s"
);
positive_quantity!(Seconds, "s");
positive_quantity!(Nanoseconds, "ns");
positive_quantity!(
    /// Cyclic frequency in MHz.
    Megahertz,
    "MHz"
);
positive_quantity!(Millimeters, "mm");

impl Nanoseconds {
    pub fn to_seconds(self) -> Seconds {
        Seconds(self.0 / NS_PER_S)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn green_line_angular_frequency() {
        // 532 nm
        let w = angular_from_nm(532.0);
        assert!((w / 3.54e15 - 1.0).abs() < 2e-3, "{w}");
    }

    #[test]
    fn beat_conversion_roundtrip() {
        let w = mhz_to_angular(54.9);
        assert!((angular_to_mhz(w) - 54.9).abs() < 1e-12);
    }

    #[test]
    fn quantities_reject_non_positive() {
        assert!(Watts::new(0.0).is_err());
        assert!(Seconds::new(f64::NAN).is_err());
        assert!(Nanoseconds::new(-1.0).is_err());
        assert_eq!(Millimeters::new(1.5).unwrap().get(), 1.5);
    }
}
