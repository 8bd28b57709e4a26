//! Quantum-noise arithmetic: photon flux chain, standard quantum limit,
//! Fourier limit, Schawlow–Townes linewidth and distinguishability time.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::analysis::FringeEstimate;
use crate::error::{check_positive, check_unit_interval, Error, Result};
use crate::kv::KvDoc;
use crate::units::{angular_from_nm, Nanoseconds, RadPerSecond, Seconds, Watts, HBAR, NS_PER_S};

/// Photons per ns carried by `power` at angular frequency `omega`.
pub fn photon_flux(power: Watts, omega: RadPerSecond) -> f64 {
    power.get() / (HBAR * omega.get()) / NS_PER_S
}

/// Photons per ns that survive the slit and are converted by the photocathode.
pub fn detected_flux(flux_per_ns: f64, slit_factor: f64, qe: f64) -> Result<f64> {
    crate::error::check_non_negative("flux_per_ns", flux_per_ns)?;
    check_unit_interval("slit_factor", slit_factor, true)?;
    check_unit_interval("qe", qe, true)?;
    Ok(flux_per_ns * slit_factor * qe)
}

/// Coherent-state phase uncertainty `1/(2√n)`.
pub fn sql_phase(n_mean: f64) -> Result<f64> {
    check_positive("n_mean", n_mean)?;
    Ok(1.0 / (2.0 * n_mean.sqrt()))
}

/// Frequency resolution `1/(2δt)` of an observation of length `overlap`, MHz.
pub fn fourier_limit(overlap: Nanoseconds) -> f64 {
    1e3 / (2.0 * overlap.get())
}

/// Quantum-limited linewidth `4πħω/(τ_cav² P)`, Hz.
pub fn schawlow_townes(omega: RadPerSecond, cavity_lifetime: Seconds, power: Watts) -> f64 {
    4.0 * PI * HBAR * omega.get() / (cavity_lifetime.get().powi(2) * power.get())
}

/// How many times a measured uncertainty exceeds the SQL-implied one.
pub fn sql_vs_measurement(measured: f64, sql: f64) -> Result<f64> {
    check_positive("measured", measured)?;
    check_positive("sql", sql)?;
    Ok(measured / sql)
}

/// Smallest slope standard error compatible with the SQL for the events
/// behind `est`: the SQL phase over the rms time lever arm, converted to a
/// slope at the fitted spatial frequency.
pub fn sql_slope_floor(est: &FringeEstimate) -> Result<f64> {
    let dphi = sql_phase(est.n_events as f64)?;
    check_positive("t_spread_ns", est.t_spread_ns)?;
    let b_floor = dphi / (2.0 * PI * est.t_spread_ns);
    Ok(b_floor / est.spatial_freq_cyc_per_mm.abs())
}

/// Ratio of the fitted slope standard error to its SQL floor (≥ 1 for any
/// valid estimator).
pub fn estimate_vs_sql(est: &FringeEstimate) -> Result<f64> {
    sql_vs_measurement(est.slope_stderr, sql_slope_floor(est)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BudgetInput {
    /// Output power of each laser, W.
    pub power_w: f64,
    /// Optical wavelength used for the photon energy, nm.
    pub wavelength_nm: f64,
    /// Fraction of the power that reaches the detector.
    pub loss_factor: f64,
    pub slit_factor: f64,
    pub qe: f64,
    /// Counting window for ⟨N⟩, ns.
    pub window_ns: f64,
    /// Temporal overlap of the two beams, ns.
    pub overlap_ns: f64,
    /// Assumed cavity photon lifetime, s.
    pub cavity_lifetime_s: f64,
    /// Beat frequency whose inverse sets the distinguishability time, MHz.
    pub reference_beat_mhz: f64,
    /// Measured fringe spacing and its uncertainty, mm.
    pub fringe_spacing_mm: f64,
    pub spacing_error_mm: f64,
    /// Previously quoted detected flux, kept for comparison, photons/ns.
    pub quoted_detected_per_ns: f64,
}

impl Default for BudgetInput {
    fn default() -> Self {
        Self {
            power_w: 0.05,
            wavelength_nm: 532.0,
            loss_factor: 0.2,
            slit_factor: 1e-3,
            qe: 0.1037,
            window_ns: 1.0,
            overlap_ns: 603.0,
            cavity_lifetime_s: 2e-10,
            reference_beat_mhz: 54.9,
            fringe_spacing_mm: 1.88,
            spacing_error_mm: 0.023,
            quoted_detected_per_ns: 2.68e3,
        }
    }
}

impl BudgetInput {
    pub fn validate(&self) -> Result<()> {
        check_positive("power_w", self.power_w)?;
        check_positive("wavelength_nm", self.wavelength_nm)?;
        check_unit_interval("loss_factor", self.loss_factor, false)?;
        check_unit_interval("slit_factor", self.slit_factor, false)?;
        check_unit_interval("qe", self.qe, false)?;
        check_positive("window_ns", self.window_ns)?;
        check_positive("overlap_ns", self.overlap_ns)?;
        check_positive("cavity_lifetime_s", self.cavity_lifetime_s)?;
        check_positive("reference_beat_mhz", self.reference_beat_mhz)?;
        check_positive("fringe_spacing_mm", self.fringe_spacing_mm)?;
        check_positive("spacing_error_mm", self.spacing_error_mm)?;
        check_positive("quoted_detected_per_ns", self.quoted_detected_per_ns)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BudgetReport {
    pub omega_rad_s: f64,
    /// Photon flux reaching the detector after losses, photons/ns.
    pub photons_per_ns_at_detector: f64,
    /// Recomputed detected flux, photons/ns.
    pub detected_per_ns: f64,
    pub detected_per_ns_quoted: f64,
    /// `(quoted − recomputed) / recomputed`.
    pub detected_discrepancy: f64,
    /// ⟨N⟩ in the counting window, from the recomputed flux.
    pub n_per_window: f64,
    pub sql_phase_rad: f64,
    /// SQL phase at the quoted detected flux.
    pub sql_phase_rad_quoted: f64,
    pub fringe_pos_uncertainty_um: f64,
    pub fringe_pos_uncertainty_um_quoted: f64,
    pub spacing_error_um: f64,
    pub sql_vs_measurement: f64,
    pub sql_vs_measurement_quoted: f64,
    pub fourier_dnu_mhz: f64,
    pub st_linewidth_hz: f64,
    pub distinguishability_ns: f64,
}

pub fn compute_budget(input: &BudgetInput) -> Result<BudgetReport> {
    input.validate()?;
    let omega = RadPerSecond::new(angular_from_nm(input.wavelength_nm))?;
    let power = Watts::new(input.power_w)?;
    let at_detector = photon_flux(Watts::new(input.power_w * input.loss_factor)?, omega);
    let detected = detected_flux(at_detector, input.slit_factor, input.qe)?;
    let n = detected * input.window_ns;
    let n_quoted = input.quoted_detected_per_ns * input.window_ns;
    let sql = sql_phase(n)?;
    let sql_quoted = sql_phase(n_quoted)?;
    let to_um = |phase: f64| phase * input.fringe_spacing_mm * 1e3 / (2.0 * PI);
    let (pos, pos_quoted) = (to_um(sql), to_um(sql_quoted));
    let spacing_error_um = input.spacing_error_mm * 1e3;
    if !(detected > 0.0) {
        return Err(Error::invalid("qe", "detected flux is zero"));
    }
    Ok(BudgetReport {
        omega_rad_s: omega.get(),
        photons_per_ns_at_detector: at_detector,
        detected_per_ns: detected,
        detected_per_ns_quoted: input.quoted_detected_per_ns,
        detected_discrepancy: (input.quoted_detected_per_ns - detected) / detected,
        n_per_window: n,
        sql_phase_rad: sql,
        sql_phase_rad_quoted: sql_quoted,
        fringe_pos_uncertainty_um: pos,
        fringe_pos_uncertainty_um_quoted: pos_quoted,
        spacing_error_um,
        sql_vs_measurement: sql_vs_measurement(spacing_error_um, pos)?,
        sql_vs_measurement_quoted: sql_vs_measurement(spacing_error_um, pos_quoted)?,
        fourier_dnu_mhz: fourier_limit(Nanoseconds::new(input.overlap_ns)?),
        st_linewidth_hz: schawlow_townes(omega, Seconds::new(input.cavity_lifetime_s)?, power),
        distinguishability_ns: 1e3 / input.reference_beat_mhz,
    })
}

const FIELDS: [&str; 16] = [
    "omega_rad_s",
    "photons_per_ns_at_detector",
    "detected_per_ns",
    "detected_per_ns_quoted",
    "detected_discrepancy",
    "n_per_window",
    "sql_phase_rad",
    "sql_phase_rad_quoted",
    "fringe_pos_uncertainty_um",
    "fringe_pos_uncertainty_um_quoted",
    "spacing_error_um",
    "sql_vs_measurement",
    "sql_vs_measurement_quoted",
    "fourier_dnu_mhz",
    "st_linewidth_hz",
    "distinguishability_ns",
];

impl BudgetReport {
    fn values(&self) -> [f64; 16] {
        [
            self.omega_rad_s,
            self.photons_per_ns_at_detector,
            self.detected_per_ns,
            self.detected_per_ns_quoted,
            self.detected_discrepancy,
            self.n_per_window,
            self.sql_phase_rad,
            self.sql_phase_rad_quoted,
            self.fringe_pos_uncertainty_um,
            self.fringe_pos_uncertainty_um_quoted,
            self.spacing_error_um,
            self.sql_vs_measurement,
            self.sql_vs_measurement_quoted,
            self.fourier_dnu_mhz,
            self.st_linewidth_hz,
            self.distinguishability_ns,
        ]
    }

    pub fn to_kv(&self) -> KvDoc {
        let mut doc = KvDoc::new();
        for (k, v) in FIELDS.iter().zip(self.values()) {
            doc.push(k, v);
        }
        doc.push(
            "note",
            format!(
                "recomputed detected flux {:.3e}/ns differs from the quoted {:.3e}/ns by {:+.1}%",
                self.detected_per_ns,
                self.detected_per_ns_quoted,
                self.detected_discrepancy * 100.0
            ),
        );
        doc
    }

    pub fn from_kv(doc: &KvDoc) -> Result<Self> {
        let mut v = [0.0; 16];
        for (slot, key) in v.iter_mut().zip(FIELDS) {
            *slot = doc.require(key)?;
        }
        Ok(Self {
            omega_rad_s: v[0],
            photons_per_ns_at_detector: v[1],
            detected_per_ns: v[2],
            detected_per_ns_quoted: v[3],
            detected_discrepancy: v[4],
            n_per_window: v[5],
            sql_phase_rad: v[6],
            sql_phase_rad_quoted: v[7],
            fringe_pos_uncertainty_um: v[8],
            fringe_pos_uncertainty_um_quoted: v[9],
            spacing_error_um: v[10],
            sql_vs_measurement: v[11],
            sql_vs_measurement_quoted: v[12],
            fourier_dnu_mhz: v[13],
            st_linewidth_hz: v[14],
            distinguishability_ns: v[15],
        })
    }
}

/// Rounds to `digits` significant figures.
pub fn round_sig(x: f64, digits: i32) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let prec = (digits.max(1) - 1) as usize;
    format!("{x:.prec$e}").parse().unwrap_or(x)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn flux_chain() {
        // 10 mW at ω = 3.54e15 rad/s.
        let flux = photon_flux(Watts::new(0.01).unwrap(), RadPerSecond::new(3.54e15).unwrap());
        assert_eq!(round_sig(flux, 3), 2.68e7);
        let doubled = photon_flux(Watts::new(0.02).unwrap(), RadPerSecond::new(3.54e15).unwrap());
        assert!((doubled / flux - 2.0).abs() < 1e-12);
        let red = photon_flux(Watts::new(0.01).unwrap(), RadPerSecond::new(1.77e15).unwrap());
        assert!((red / flux - 2.0).abs() < 1e-12);

        assert_eq!(round_sig(detected_flux(flux, 1e-3, 0.1037).unwrap(), 3), 2.78e3);
        assert_eq!(detected_flux(flux, 1.0, 1.0).unwrap(), flux);
        assert_eq!(detected_flux(flux, 1e-3, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn sql_examples() {
        assert_eq!(round_sig(sql_phase(2.68e3).unwrap(), 3), 9.66e-3);
        assert!((sql_phase(2500.0).unwrap() - 0.01).abs() < 1e-15);
        assert!(sql_phase(0.0).is_err());
        assert!(sql_phase(-1.0).is_err());
        let um = sql_phase(2.68e3).unwrap() * 1880.0 / (2.0 * PI);
        assert_eq!(round_sig(um, 1), 3.0);
    }

    #[test]
    fn fourier_and_distinguishability() {
        let f = fourier_limit(Nanoseconds::new(603.0).unwrap());
        assert_eq!(round_sig(f, 2), 0.83);
        assert!((fourier_limit(Nanoseconds::new(1206.0).unwrap()) - f / 2.0).abs() < 1e-15);
        assert_eq!(round_sig(1e3 / 54.9, 3), 18.2);
    }

    #[test]
    fn schawlow_townes_scaling() {
        let w = RadPerSecond::new(angular_from_nm(532.0)).unwrap();
        let base = schawlow_townes(w, Seconds::new(2e-10).unwrap(), Watts::new(0.05).unwrap());
        assert!((1e3..1e4).contains(&base), "{base}");
        let p4 = schawlow_townes(w, Seconds::new(2e-10).unwrap(), Watts::new(0.2).unwrap());
        assert!((base / p4 - 4.0).abs() < 1e-12);
        let t2 = schawlow_townes(w, Seconds::new(4e-10).unwrap(), Watts::new(0.05).unwrap());
        assert!((base / t2 - 4.0).abs() < 1e-12);
    }

    #[test]
    fn measurement_ratio() {
        assert_eq!(round_sig(sql_vs_measurement(23.0, 3.0).unwrap(), 2), 7.7);
        assert_eq!(sql_vs_measurement(5.0, 5.0).unwrap(), 1.0);
    }

    #[test]
    fn default_report() {
        let r = compute_budget(&BudgetInput::default()).unwrap();
        assert_eq!(round_sig(r.photons_per_ns_at_detector, 3), 2.68e7);
        assert_eq!(round_sig(r.detected_per_ns, 3), 2.78e3);
        assert_eq!(round_sig(r.sql_phase_rad_quoted, 3), 9.66e-3);
        assert_eq!(r.sql_phase_rad, 1.0 / (2.0 * r.n_per_window.sqrt()));
        assert_eq!(round_sig(r.fringe_pos_uncertainty_um_quoted, 1), 3.0);
        assert_eq!(round_sig(r.fourier_dnu_mhz, 2), 0.83);
        assert_eq!(round_sig(r.distinguishability_ns, 2), 18.0);
        assert_eq!(round_sig(r.sql_vs_measurement_quoted, 1), 8.0);
        assert!((r.detected_discrepancy + 0.035).abs() < 0.005);
        let doubled = compute_budget(&BudgetInput { power_w: 0.1, ..BudgetInput::default() }).unwrap();
        assert!((doubled.detected_per_ns / r.detected_per_ns - 2.0).abs() < 1e-12);
    }

    #[test]
    fn report_roundtrips_through_kv() {
        let r = compute_budget(&BudgetInput::default()).unwrap();
        let text = r.to_kv().emit();
        assert!(text.contains("note: "));
        assert_eq!(BudgetReport::from_kv(&KvDoc::parse(&text).unwrap()).unwrap(), r);
    }

    proptest! {
        #[test]
        fn monotone_limits(n in 1.0f64..1e9, k in 1.001f64..10.0, dt in 1.0f64..1e4) {
            prop_assert!(sql_phase(n * k).unwrap() < sql_phase(n).unwrap());
            prop_assert!(fourier_limit(Nanoseconds::new(dt * k).unwrap()) < fourier_limit(Nanoseconds::new(dt).unwrap()));
        }

        #[test]
        fn report_is_finite(power in 1e-4f64..1.0, loss in 0.01f64..1.0, window in 0.1f64..100.0) {
            let r = compute_budget(&BudgetInput { power_w: power, loss_factor: loss, window_ns: window, ..BudgetInput::default() }).unwrap();
            prop_assert!(r.values().iter().all(|v| v.is_finite()));
            prop_assert_eq!(r.sql_phase_rad, 1.0 / (2.0 * r.n_per_window.sqrt()));
        }
    }
}
