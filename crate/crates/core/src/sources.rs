//! Stochastic laser sources: Brownian phase, shot-to-shot frequency jitter,
//! and the acousto-optic gate that cuts a segment out of each CW beam.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_finite, check_non_negative, check_positive, Error, Result};
use crate::rng::{derive_seed, rng_from_seed, Stream};

/// Which linewidth drives the phase random walk inside a single exposure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseDiffusion {
    /// Cavity fluctuations are frozen on sub-µs scales; the phase diffuses at
    /// the quantum-limited (Schawlow–Townes) linewidth.
    #[default]
    SchawlowTownes,
    /// Diffuse at the full long-term linewidth.
    FullLinewidth,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LaserNoiseModel {
    /// Long-term FWHM linewidth, Hz.
    pub linewidth_hz: f64,
    pub coherence_time_ns: f64,
    /// Quantum-limited linewidth, Hz.
    pub st_limit_hz: f64,
    /// Half-width of the uniform center-frequency excursion per second of
    /// elapsed time between shots, Hz/s.
    pub drift_rate_hz_per_s: f64,
    #[serde(default)]
    pub intrashot: PhaseDiffusion,
}

impl Default for LaserNoiseModel {
    fn default() -> Self {
        Self {
            linewidth_hz: 3e6,
            coherence_time_ns: 300.0,
            st_limit_hz: 2.35e3,
            drift_rate_hz_per_s: 30e6,
            intrashot: PhaseDiffusion::SchawlowTownes,
        }
    }
}

impl LaserNoiseModel {
    /// A source with no phase noise and no drift.
    pub fn quiet() -> Self {
        Self {
            linewidth_hz: 0.0,
            coherence_time_ns: 1e6,
            st_limit_hz: 0.0,
            drift_rate_hz_per_s: 0.0,
            intrashot: PhaseDiffusion::SchawlowTownes,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_non_negative("linewidth_hz", self.linewidth_hz)?;
        check_non_negative("st_limit_hz", self.st_limit_hz)?;
        check_positive("coherence_time_ns", self.coherence_time_ns)?;
        check_non_negative("drift_rate_hz_per_s", self.drift_rate_hz_per_s)?;
        if self.st_limit_hz > self.linewidth_hz {
            return Err(Error::invalid(
                "st_limit_hz",
                format!("quantum limit {} Hz exceeds the linewidth {} Hz", self.st_limit_hz, self.linewidth_hz),
            ));
        }
        if self.linewidth_hz > 0.0 {
            // τ_c ≈ 1/(π Δν) within an order of magnitude.
            let ratio = self.coherence_time_ns * 1e-9 * PI * self.linewidth_hz;
            if !(0.1..=10.0).contains(&ratio) {
                return Err(Error::invalid(
                    "coherence_time_ns",
                    format!("τ_c·π·Δν = {ratio:.3} is inconsistent with the linewidth (expected within [0.1, 10])"),
                ));
            }
        }
        Ok(())
    }

    /// Linewidth used for the in-shot phase random walk, Hz.
    pub fn diffusion_linewidth_hz(&self) -> f64 {
        match self.intrashot {
            PhaseDiffusion::SchawlowTownes => self.st_limit_hz,
            PhaseDiffusion::FullLinewidth => self.linewidth_hz,
        }
    }
}

/// Sampled phase trajectory `φ(t)` on a uniform grid starting at t = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePath {
    pub dt_ns: f64,
    pub samples: Vec<f64>,
}

impl PhasePath {
    pub fn constant(phase: f64) -> Self {
        Self { dt_ns: 1.0, samples: vec![phase] }
    }

    pub fn duration_ns(&self) -> f64 {
        (self.samples.len().saturating_sub(1)) as f64 * self.dt_ns
    }

    /// Linear interpolation, held constant beyond either end.
    #[inline]
    pub fn at(&self, t_ns: f64) -> f64 {
        let n = self.samples.len();
        if n == 1 || t_ns <= 0.0 {
            return self.samples[0];
        }
        let x = t_ns / self.dt_ns;
        let i = x as usize;
        if i + 1 >= n {
            return self.samples[n - 1];
        }
        let frac = x - i as f64;
        self.samples[i] + frac * (self.samples[i + 1] - self.samples[i])
    }
}

/// Brownian laser phase over `[0, duration_ns]`: a random starting phase in
/// `[0, 2π)` followed by Gaussian increments of variance `2π·Δν·dt`.
pub fn sample_phase_path(model: &LaserNoiseModel, duration_ns: f64, dt_ns: f64, seed: u64) -> Result<PhasePath> {
    check_positive("dt_ns", dt_ns)?;
    check_finite("duration_ns", duration_ns)?;
    if duration_ns < dt_ns {
        return Err(Error::invalid("duration_ns", format!("must be >= dt_ns ({dt_ns}), got {duration_ns}")));
    }
    model.validate()?;
    let mut rng = rng_from_seed(seed);
    let steps = (duration_ns / dt_ns).ceil() as usize;
    let sigma = (2.0 * PI * model.diffusion_linewidth_hz() * dt_ns * 1e-9).sqrt();
    let mut samples = Vec::with_capacity(steps + 1);
    let mut phase = rng.random::<f64>() * 2.0 * PI;
    samples.push(phase);
    for _ in 0..steps {
        if sigma > 0.0 {
            let z: f64 = StandardNormal.sample(&mut rng);
            phase += sigma * z;
        }
        samples.push(phase);
    }
    Ok(PhasePath { dt_ns, samples })
}

/// Fraction of a raised-cosine edge spent between 10 % and 90 %.
fn raised_cosine_10_90_fraction() -> f64 {
    ((-0.8f64).acos() - 0.8f64.acos()) / PI
}

/// Acousto-optic gate: flat top of `width_ns` starting at `delay_ns`, with
/// raised-cosine edges whose 10–90 % time is `edge_ns`. A pulse-front tilt
/// delays the gate by `tilt_ns_per_mm · y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GateEnvelope {
    pub width_ns: f64,
    pub edge_ns: f64,
    pub delay_ns: f64,
    #[serde(default)]
    pub tilt_ns_per_mm: f64,
    /// AOM frequency shift of this beam (order × 210 MHz). The configured
    /// wavelengths are taken after the shift, which the lasers' temperature
    /// tuning compensates, so it does not enter the beat frequency.
    #[serde(default)]
    pub diffraction_shift_hz: f64,
}

impl Default for GateEnvelope {
    fn default() -> Self {
        Self { width_ns: 655.0, edge_ns: 10.0, delay_ns: 150.0, tilt_ns_per_mm: 0.0, diffraction_shift_hz: 210e6 }
    }
}

impl GateEnvelope {
    pub fn validate(&self) -> Result<()> {
        check_non_negative("width_ns", self.width_ns)?;
        check_non_negative("edge_ns", self.edge_ns)?;
        check_finite("delay_ns", self.delay_ns)?;
        check_finite("tilt_ns_per_mm", self.tilt_ns_per_mm)?;
        check_finite("diffraction_shift_hz", self.diffraction_shift_hz)?;
        Ok(())
    }

    /// Full 0→1 duration of one edge.
    pub fn edge_duration_ns(&self) -> f64 {
        self.edge_ns / raised_cosine_10_90_fraction()
    }

    /// Area under the gate along t: `width + edge_duration`, independent of tilt.
    pub fn integral_ns(&self) -> f64 {
        self.width_ns + self.edge_duration_ns()
    }

    /// Gate value at local (tilt-corrected) time `u`.
    #[inline]
    pub fn at_local(&self, u: f64) -> f64 {
        let rise_end = self.delay_ns;
        let fall_start = self.delay_ns + self.width_ns;
        if u >= rise_end && u <= fall_start {
            return 1.0;
        }
        let e = self.edge_duration_ns();
        let s = if u < rise_end { (u - (rise_end - e)) / e } else { (fall_start + e - u) / e };
        if !(s > 0.0) {
            0.0
        } else {
            0.5 * (1.0 - (PI * s.min(1.0)).cos())
        }
    }

    #[inline]
    pub fn local_time(&self, t_ns: f64, y_mm: f64) -> f64 {
        t_ns - self.tilt_ns_per_mm * y_mm
    }

    /// Largest gate value over the local-time interval `[u0, u1]`.
    pub fn max_over_local(&self, u0: f64, u1: f64) -> f64 {
        let (u0, u1) = if u0 <= u1 { (u0, u1) } else { (u1, u0) };
        if u1 < self.delay_ns {
            self.at_local(u1)
        } else if u0 > self.delay_ns + self.width_ns {
            self.at_local(u0)
        } else {
            1.0
        }
    }

    /// Largest gate value over the rectangle `[t0, t1] × [y0, y1]`.
    pub fn max_over(&self, t0: f64, t1: f64, y0: f64, y1: f64) -> f64 {
        let shifts = [self.tilt_ns_per_mm * y0, self.tilt_ns_per_mm * y1];
        let lo = t0 - shifts[0].max(shifts[1]);
        let hi = t1 - shifts[0].min(shifts[1]);
        self.max_over_local(lo, hi)
    }

    /// Flat-top interval in lab time at transverse position `y_mm`.
    pub fn flat_top(&self, y_mm: f64) -> (f64, f64) {
        let shift = self.tilt_ns_per_mm * y_mm;
        (self.delay_ns + shift, self.delay_ns + self.width_ns + shift)
    }
}

/// Gate transmission at time `t_ns` and transverse position `y_mm`, in [0, 1].
pub fn gate(envelope: &GateEnvelope, t_ns: f64, y_mm: f64) -> f64 {
    envelope.at_local(envelope.local_time(t_ns, y_mm))
}

/// Duration during which both flat tops coincide at `y_mm`.
pub fn flat_top_overlap_ns(a: &GateEnvelope, b: &GateEnvelope, y_mm: f64) -> f64 {
    let (a0, a1) = a.flat_top(y_mm);
    let (b0, b1) = b.flat_top(y_mm);
    (a1.min(b1) - a0.max(b0)).max(0.0)
}

/// Nominal output frequencies and the rules for per-shot jitter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetuningPlan {
    /// Nominal frequency of source A, Hz.
    pub nu1_hz: f64,
    /// Nominal frequency of source B, Hz.
    pub nu2_hz: f64,
    /// Largest |Δν| that still produces resolvable fringes, Hz.
    pub ceiling_hz: f64,
    /// Time between consecutive exposures, s.
    pub shot_interval_s: f64,
}

/// Draws the angular frequencies `(ω₁, ω₂)` of one exposure.
///
/// Each laser wanders uniformly within `±drift_rate · shot_interval` of its
/// nominal frequency, independently per shot; the resulting |Δν| is clamped
/// to the detectability ceiling.
pub fn shot_frequencies(
    plan: &DetuningPlan,
    model1: &LaserNoiseModel,
    model2: &LaserNoiseModel,
    shot_index: u64,
    seed: u64,
) -> (f64, f64) {
    let mut rng = rng_from_seed(derive_seed(seed, Stream::Frequencies, shot_index));
    let mut jitter = |model: &LaserNoiseModel| {
        let half = model.drift_rate_hz_per_s * plan.shot_interval_s;
        let u: f64 = rng.random();
        if half > 0.0 {
            (2.0 * u - 1.0) * half
        } else {
            0.0
        }
    };
    let nu1 = plan.nu1_hz + jitter(model1);
    let mut nu2 = plan.nu2_hz + jitter(model2);
    let beat = nu2 - nu1;
    if beat.abs() > plan.ceiling_hz {
        nu2 = nu1 + plan.ceiling_hz.copysign(beat);
    }
    (2.0 * PI * nu1, 2.0 * PI * nu2)
}

/// Static description of one laser as seen at the streak camera slit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SourceState {
    /// Photon flux reaching the slit plane over the whole y range, photons/ns.
    pub photon_flux_per_ns: f64,
    #[serde(default)]
    pub noise: LaserNoiseModel,
    pub gate: GateEnvelope,
}

/// Default per-source flux at the slit, photons/ns.
pub const DEFAULT_PHOTON_FLUX_PER_NS: f64 = 1.34e7;

impl Default for SourceState {
    fn default() -> Self {
        Self {
            photon_flux_per_ns: DEFAULT_PHOTON_FLUX_PER_NS,
            noise: LaserNoiseModel::default(),
            gate: GateEnvelope::default(),
        }
    }
}

impl SourceState {
    pub fn validate(&self) -> Result<()> {
        check_non_negative("photon_flux_per_ns", self.photon_flux_per_ns)?;
        self.noise.validate()?;
        self.gate.validate()
    }
}
