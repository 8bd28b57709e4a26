//! Two-beam field superposition at the detector plane.
//!
//! Two paraxial plane waves cross at a small angle in the (y, z) plane. The
//! photodetection probability of the two-mode coherent state is
//!
//! ```text
//! w(y, t) = r₁ + r₂ + 2·v·√(r₁r₂)·cos φ(y, t)
//! φ(y, t) = 2k̄ sinθ·y + Δk cosθ·z₀ − Δω·t + Δφ
//! ```
//!
//! where `r_ℓ` folds detector sensitivity, one-photon amplitude and coherent
//! amplitude into a single mean rate, `Δk = k₂ − k₁`, `Δω = ω₂ − ω₁` and
//! `Δφ = φ₂ − φ₁`. Equiphase lines move along y at `dy/dt = Δω/(2k̄ sinθ)`.
//!
//! `θ` is the tilt of *each* beam from the z axis, so the full crossing angle
//! is `2θ`. With λ = 532 nm and θ = 0.14 mrad this gives a fringe period of
//! 1.90 mm. Reading 0.14 mrad as the full crossing angle would give 3.8 mm.

use serde::{Deserialize, Serialize};

use crate::error::{check_finite, check_non_negative, check_unit_interval, Error, Result};
use crate::units::{m_per_s_to_mm_per_ns, wavenumber_from_nm, MM_PER_M, NS_PER_S};

/// Upper bound of the paraxial regime for the per-beam tilt.
pub const MAX_PARAXIAL_THETA: f64 = 0.01;
/// Maximum relative wave-number mismatch `|Δk|/k̄` accepted for a geometry.
pub const MAX_RELATIVE_DETUNING: f64 = 1e-6;

/// Which source is assigned positive transverse momentum (+y).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Orientation {
    /// +y along the oxeb (source B) transverse wave vector.
    #[default]
    OxebPositive,
    /// +y along the cheb (source A) transverse wave vector.
    ChebPositive,
}

impl Orientation {
    /// Sign of source B's transverse wave-vector component.
    pub fn sign(self) -> f64 {
        match self {
            Orientation::OxebPositive => 1.0,
            Orientation::ChebPositive => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Orientation::OxebPositive => Orientation::ChebPositive,
            Orientation::ChebPositive => Orientation::OxebPositive,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Orientation::OxebPositive => "oxeb-positive",
            Orientation::ChebPositive => "cheb-positive",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "oxeb-positive" => Some(Orientation::OxebPositive),
            "cheb-positive" => Some(Orientation::ChebPositive),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BeamGeometry {
    /// Tilt of each beam from the z axis, radians.
    pub theta_rad: f64,
    /// Vacuum wavelength of the cheb beam (source A), nm.
    pub lambda1_nm: f64,
    /// Vacuum wavelength of the oxeb beam (source B), nm.
    pub lambda2_nm: f64,
    /// Detector plane coordinate, m.
    pub z0_m: f64,
    #[serde(default)]
    pub orientation: Orientation,
}

impl Default for BeamGeometry {
    fn default() -> Self {
        Self {
            theta_rad: 0.14e-3,
            lambda1_nm: 532.0,
            lambda2_nm: 532.0,
            z0_m: 0.0,
            orientation: Orientation::OxebPositive,
        }
    }
}

impl BeamGeometry {
    pub fn new(theta_rad: f64, lambda1_nm: f64, lambda2_nm: f64, z0_m: f64) -> Result<Self> {
        let geo = Self { theta_rad, lambda1_nm, lambda2_nm, z0_m, orientation: Orientation::default() };
        geo.validate()?;
        Ok(geo)
    }

    pub fn with_orientation(mut self, orientation: Orientation) -> Self {
        self.orientation = orientation;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_finite("theta_rad", self.theta_rad)?;
        if self.theta_rad == 0.0 {
            return Err(Error::DegenerateGeometry);
        }
        if !(self.theta_rad > 0.0 && self.theta_rad < MAX_PARAXIAL_THETA) {
            return Err(Error::invalid(
                "theta_rad",
                format!("must lie in (0, {MAX_PARAXIAL_THETA}) rad, got {}", self.theta_rad),
            ));
        }
        for (name, v) in [("lambda1_nm", self.lambda1_nm), ("lambda2_nm", self.lambda2_nm)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(name, format!("must be > 0, got {v}")));
            }
        }
        check_finite("z0_m", self.z0_m)?;
        let rel = self.delta_k().abs() / self.k_mean();
        if rel >= MAX_RELATIVE_DETUNING {
            return Err(Error::invalid(
                "lambda2_nm",
                format!("|Δk|/k̄ = {rel:.2e} is outside the near-degenerate regime (< {MAX_RELATIVE_DETUNING:e})"),
            ));
        }
        Ok(())
    }

    /// Wave number of source A, rad/m.
    pub fn k1(&self) -> f64 {
        wavenumber_from_nm(self.lambda1_nm)
    }

    /// Wave number of source B, rad/m.
    pub fn k2(&self) -> f64 {
        wavenumber_from_nm(self.lambda2_nm)
    }

    pub fn k_mean(&self) -> f64 {
        0.5 * (self.k1() + self.k2())
    }

    pub fn delta_k(&self) -> f64 {
        self.k2() - self.k1()
    }

    /// Signed transverse phase gradient `±2k̄ sinθ`, rad/m.
    pub fn transverse_gradient(&self) -> f64 {
        self.orientation.sign() * 2.0 * self.k_mean() * self.theta_rad.sin()
    }

    /// Constant phase contributed by the detector plane position.
    pub fn plane_offset(&self) -> f64 {
        self.delta_k() * self.theta_rad.cos() * self.z0_m
    }

    /// Mean vacuum wavelength `2π/k̄`, nm.
    pub fn mean_wavelength_nm(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.k_mean() * 1e9
    }
}

/// Instantaneous state of the two interfering modes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldPair {
    /// Mean detected rate of source A alone.
    pub rate1: f64,
    /// Mean detected rate of source B alone.
    pub rate2: f64,
    pub phase1: f64,
    pub phase2: f64,
    /// Angular frequency of source A, rad/s.
    pub omega1: f64,
    /// Angular frequency of source B, rad/s.
    pub omega2: f64,
    /// Polarization/mode overlap of the two fields, in [0, 1].
    pub mutual_visibility: f64,
}

impl FieldPair {
    pub fn validate(&self) -> Result<()> {
        check_non_negative("rate1", self.rate1)?;
        check_non_negative("rate2", self.rate2)?;
        check_finite("phase1", self.phase1)?;
        check_finite("phase2", self.phase2)?;
        check_finite("omega1", self.omega1)?;
        check_finite("omega2", self.omega2)?;
        check_unit_interval("mutual_visibility", self.mutual_visibility, true)?;
        Ok(())
    }

    pub fn delta_omega(&self) -> f64 {
        self.omega2 - self.omega1
    }

    pub fn delta_phase(&self) -> f64 {
        self.phase2 - self.phase1
    }

    /// Fringe contrast of the superposition, `2v√(r₁r₂)/(r₁+r₂)`.
    pub fn fringe_visibility(&self) -> f64 {
        let total = self.rate1 + self.rate2;
        if total == 0.0 {
            return 0.0;
        }
        2.0 * self.mutual_visibility * (self.rate1 * self.rate2).sqrt() / total
    }
}

/// Interference phase at transverse position `y_m` (m) and time `t_s` (s).
pub fn interference_phase(fp: &FieldPair, geo: &BeamGeometry, y_m: f64, t_s: f64) -> f64 {
    geo.transverse_gradient() * y_m + geo.plane_offset() - fp.delta_omega() * t_s + fp.delta_phase()
}

/// Photodetection rate of the superposed fields; same units as the input rates.
pub fn detection_rate(fp: &FieldPair, geo: &BeamGeometry, y_m: f64, t_s: f64) -> Result<f64> {
    fp.validate()?;
    let phase = interference_phase(fp, geo, y_m, t_s);
    let cross = 2.0 * fp.mutual_visibility * (fp.rate1 * fp.rate2).sqrt();
    // Cauchy-Schwarz keeps this >= 0; clamp the rounding residue at the null.
    Ok((fp.rate1 + fp.rate2 + cross * phase.cos()).max(0.0))
}

/// Velocity of the equiphase lines along y, in mm/ns. Positive means the
/// fringes drift toward +y.
pub fn equiphase_slope(fp: &FieldPair, geo: &BeamGeometry) -> f64 {
    m_per_s_to_mm_per_ns(fp.delta_omega() / geo.transverse_gradient())
}

/// Distance between adjacent fringe maxima, m.
pub fn fringe_spacing(geo: &BeamGeometry) -> Result<f64> {
    if geo.theta_rad == 0.0 {
        return Err(Error::DegenerateGeometry);
    }
    Ok(2.0 * std::f64::consts::PI / (2.0 * geo.k_mean() * geo.theta_rad.sin()).abs())
}

/// Phase evaluated in detector units (mm, ns); the hot-path form of
/// [`interference_phase`] used by the sampler and integrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseMap {
    /// rad/mm
    pub kappa_per_mm: f64,
    /// rad/ns
    pub delta_omega_per_ns: f64,
    pub offset: f64,
}

impl PhaseMap {
    pub fn new(geo: &BeamGeometry, delta_omega: f64) -> Self {
        Self {
            kappa_per_mm: geo.transverse_gradient() / MM_PER_M,
            delta_omega_per_ns: delta_omega / NS_PER_S,
            offset: geo.plane_offset(),
        }
    }

    #[inline]
    pub fn phase(&self, y_mm: f64, t_ns: f64, delta_phase: f64) -> f64 {
        self.kappa_per_mm * y_mm + self.offset - self.delta_omega_per_ns * t_ns + delta_phase
    }

    /// Equiphase slope in mm/ns.
    pub fn slope(&self) -> f64 {
        self.delta_omega_per_ns / self.kappa_per_mm
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use approx::assert_relative_eq;
    use proptest::prelude::*;

    use super::*;
    use crate::units::{angular_from_nm, mhz_to_angular};

    fn pair(rate1: f64, rate2: f64, delta_nu_mhz: f64) -> FieldPair {
        let omega1 = angular_from_nm(532.0);
        FieldPair {
            rate1,
            rate2,
            phase1: 0.0,
            phase2: 0.0,
            omega1,
            omega2: omega1 + mhz_to_angular(delta_nu_mhz),
            mutual_visibility: 1.0,
        }
    }

    #[test]
    fn constructive_and_destructive_extremes() {
        let geo = BeamGeometry::default();
        let fp = pair(3.0, 3.0, 0.0);
        assert_relative_eq!(detection_rate(&fp, &geo, 0.0, 0.0).unwrap(), 12.0);
        let mut null = fp;
        null.phase2 = PI;
        assert!(detection_rate(&null, &geo, 0.0, 0.0).unwrap() < 1e-12);
    }

    #[test]
    fn lone_source_has_no_fringes() {
        let geo = BeamGeometry::default();
        let fp = pair(5.0, 0.0, 54.9);
        for i in 0..50 {
            let y = i as f64 * 1.3e-4;
            let t = i as f64 * 7.0e-9;
            assert_eq!(detection_rate(&fp, &geo, y, t).unwrap(), 5.0);
        }
    }

    #[test]
    fn negative_rates_are_rejected() {
        let geo = BeamGeometry::default();
        let fp = pair(-1.0, 1.0, 0.0);
        assert!(matches!(detection_rate(&fp, &geo, 0.0, 0.0), Err(Error::InvalidParameter { name: "rate1", .. })));
    }

    #[test]
    fn one_period_of_phase() {
        let geo = BeamGeometry::default();
        let fp = pair(1.0, 1.0, 0.0);
        let y = geo.mean_wavelength_nm() * 1e-9 / (2.0 * geo.theta_rad.sin());
        assert_relative_eq!(interference_phase(&fp, &geo, y, 0.0), 2.0 * PI, max_relative = 1e-12);
    }

    #[test]
    fn beat_period_decreases_phase_by_two_pi() {
        let geo = BeamGeometry::default();
        let fp = pair(1.0, 1.0, 54.9);
        let period = 1.0 / 54.9e6;
        let p0 = interference_phase(&fp, &geo, 1e-3, 2e-7);
        let p1 = interference_phase(&fp, &geo, 1e-3, 2e-7 + period);
        assert_relative_eq!(p0 - p1, 2.0 * PI, max_relative = 1e-9);
    }

    #[test]
    fn default_geometry_fringe_spacing() {
        let spacing_mm = fringe_spacing(&BeamGeometry::default()).unwrap() * 1e3;
        assert_relative_eq!(spacing_mm, 1.9, max_relative = 1e-6);
        assert!((spacing_mm - 1.88).abs() <= 0.03);
    }

    #[test]
    fn spacing_scaling() {
        let base = BeamGeometry::default();
        let s = fringe_spacing(&base).unwrap();
        let wide = BeamGeometry { theta_rad: 2.0 * base.theta_rad, ..base };
        assert_relative_eq!(fringe_spacing(&wide).unwrap(), s / 2.0, max_relative = 1e-7);
        let ir = BeamGeometry { lambda1_nm: 1064.0, lambda2_nm: 1064.0, ..base };
        assert_relative_eq!(fringe_spacing(&ir).unwrap(), 2.0 * s, max_relative = 1e-12);
    }

    #[test]
    fn collinear_geometry_is_degenerate() {
        let geo = BeamGeometry { theta_rad: 0.0, ..BeamGeometry::default() };
        assert!(matches!(fringe_spacing(&geo), Err(Error::DegenerateGeometry)));
        assert!(matches!(geo.validate(), Err(Error::DegenerateGeometry)));
        assert!(BeamGeometry::new(0.02, 532.0, 532.0, 0.0).is_err());
        assert!(BeamGeometry::new(1e-4, 532.0, 533.0, 0.0).is_err());
    }

    #[test]
    fn slope_examples() {
        let geo = BeamGeometry::default();
        assert_eq!(equiphase_slope(&pair(1.0, 1.0, 0.0), &geo), 0.0);

        // Independent recomputation: slope = Δν · Λ with Λ = λ/(2 sinθ).
        let lambda_m = 532e-9;
        let period_m = lambda_m / (2.0 * (0.14e-3f64).sin());
        let expected_mm_per_ns = 54.9e6 * period_m * 1e3 / 1e9;
        let slope = equiphase_slope(&pair(1.0, 1.0, 54.9), &geo);
        assert_relative_eq!(slope, expected_mm_per_ns, max_relative = 1e-9);
        assert!((slope - 0.104).abs() < 0.001, "{slope}");
        // Drift over one beat period spans one fringe.
        let beat_period_ns: f64 = 1e3 / 54.9;
        assert!((beat_period_ns - 18.2).abs() < 0.05);
        let drift = slope * beat_period_ns;
        assert!((1.88..=1.90 + 1e-6).contains(&drift), "{drift}");

        assert!(equiphase_slope(&pair(1.0, 1.0, -19.4), &geo) < 0.0);
    }

    #[test]
    fn phase_map_matches_si_phase() {
        let geo = BeamGeometry { z0_m: 0.37, ..BeamGeometry::default() }.with_orientation(Orientation::ChebPositive);
        let mut fp = pair(1.0, 2.0, 33.0);
        fp.phase1 = 0.3;
        fp.phase2 = -1.1;
        let map = PhaseMap::new(&geo, fp.delta_omega());
        let (y_mm, t_ns) = (7.25, 412.5);
        let si = interference_phase(&fp, &geo, y_mm * 1e-3, t_ns * 1e-9);
        assert_relative_eq!(map.phase(y_mm, t_ns, fp.delta_phase()), si, max_relative = 1e-12);
        assert_relative_eq!(map.slope(), equiphase_slope(&fp, &geo), max_relative = 1e-12);
    }

    fn arb_geometry() -> impl Strategy<Value = BeamGeometry> {
        (1e-5f64..5e-3, 400.0f64..1100.0, -1.0f64..1.0, any::<bool>()).prop_map(|(theta, lambda, z0, flip)| {
            let geo = BeamGeometry::new(theta, lambda, lambda, z0).unwrap();
            if flip {
                geo.with_orientation(Orientation::ChebPositive)
            } else {
                geo
            }
        })
    }

    fn arb_pair() -> impl Strategy<Value = FieldPair> {
        (0.0f64..100.0, 0.0f64..100.0, -PI..PI, -PI..PI, -500.0f64..500.0, 0.0f64..=1.0).prop_map(
            |(r1, r2, p1, p2, dnu, v)| {
                let mut fp = pair(r1, r2, dnu);
                fp.phase1 = p1;
                fp.phase2 = p2;
                fp.mutual_visibility = v;
                fp
            },
        )
    }

    proptest! {
        #[test]
        fn rate_is_non_negative(fp in arb_pair(), geo in arb_geometry(), y in -0.01f64..0.01, t in 0.0f64..1e-6) {
            prop_assert!(detection_rate(&fp, &geo, y, t).unwrap() >= 0.0);
        }

        #[test]
        fn analytic_visibility(r in 0.1f64..100.0, rho in 0.01f64..100.0, v in 0.0f64..=1.0) {
            let geo = BeamGeometry::default();
            let mut fp = pair(r, r * rho, 0.0);
            fp.mutual_visibility = v;
            let spacing = fringe_spacing(&geo).unwrap();
            let max = detection_rate(&fp, &geo, 0.0, 0.0).unwrap();
            let min = detection_rate(&fp, &geo, spacing / 2.0, 0.0).unwrap();
            let contrast = (max - min) / (max + min);
            prop_assert!((contrast - 2.0 * v * rho.sqrt() / (1.0 + rho)).abs() < 1e-9);
            prop_assert!((fp.fringe_visibility() - contrast).abs() < 1e-9);
        }

        #[test]
        fn slope_sign_law(fp in arb_pair(), geo in arb_geometry()) {
            let slope = equiphase_slope(&fp, &geo);
            let expected = fp.delta_omega().signum() * geo.orientation.sign();
            if fp.delta_omega() == 0.0 {
                prop_assert_eq!(slope, 0.0);
            } else {
                prop_assert_eq!(slope.signum(), expected);
            }
        }

        #[test]
        fn spatial_periodicity(fp in arb_pair(), geo in arb_geometry(), y in -0.005f64..0.005, t in 0.0f64..1e-6) {
            let spacing = fringe_spacing(&geo).unwrap();
            let a = detection_rate(&fp, &geo, y, t).unwrap();
            let b = detection_rate(&fp, &geo, y + spacing, t).unwrap();
            prop_assert!((a - b).abs() <= 1e-7 * (fp.rate1 + fp.rate2 + 1.0));
        }

        #[test]
        fn fringes_move_with_equiphase_velocity(fp in arb_pair(), geo in arb_geometry(), y in -0.005f64..0.005, t in 0.0f64..5e-7, dt in 0.0f64..5e-7) {
            let v_m_per_s = equiphase_slope(&fp, &geo) * 1e6;
            let a = detection_rate(&fp, &geo, y, t).unwrap();
            let b = detection_rate(&fp, &geo, y + v_m_per_s * dt, t + dt).unwrap();
            prop_assert!((a - b).abs() <= 1e-6 * (fp.rate1 + fp.rate2 + 1.0));
        }
    }
}
