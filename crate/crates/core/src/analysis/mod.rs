//! Fringe parameter estimation: a spectral seed on the binned image, then a
//! likelihood fit on the raw events inside the detected overlap window.

pub mod likelihood;
pub mod spectrum;
pub mod subset;
pub mod verdict;

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::detector::{CountImage, Interferogram};
use crate::error::{Error, Result};
use crate::physics::Orientation;
use crate::units::Nanoseconds;
use likelihood::{FitData, A, B, PHI, VIS};

pub use subset::{subset_uncertainty, SubsetRow, SubsetTable};
pub use verdict::{
    which_path, which_path_with_threshold, HigherEnergy, Path, Source, WhichPathVerdict, CONFIDENCE_THRESHOLD,
};

/// Minimum number of events inside the fit window.
pub const MIN_EVENTS: usize = 1000;
/// Fraction of the fringe-amplitude plateau that delimits the overlap.
const OVERLAP_LEVEL: f64 = 0.5;
/// Fraction of the plateau that delimits the fit window.
const FIT_LEVEL: f64 = 0.9;
/// Bins trimmed from each end of the fit window.
const FIT_INSET_BINS: usize = 2;
const SMOOTH_BINS: usize = 5;
const FOLD_BINS: usize = 16;
const FOLD_MIN_PER_BIN: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct FringeEstimate {
    pub spatial_freq_cyc_per_mm: f64,
    pub spatial_freq_stderr: f64,
    /// Equiphase slope in the image frame, mm/ns.
    pub slope_mm_per_ns: f64,
    /// Statistical standard error of the slope from the observed information.
    pub slope_stderr: f64,
    /// `max(slope_stderr, slope equivalent of the Fourier limit)`.
    pub slope_uncertainty: f64,
    /// Image-frame beat frequency, `slope × spatial_freq`, MHz.
    pub beat_freq_mhz: f64,
    pub beat_freq_stderr_mhz: f64,
    /// `ν₂ − ν₁` implied by the orientation convention, MHz.
    pub delta_nu_mhz: f64,
    pub visibility: f64,
    pub visibility_stderr: f64,
    /// Fringe phase at the origin (t = 0, y = 0), radians.
    pub phase0_rad: f64,
    /// RMS Pearson residual per bin inside the fit window.
    pub residual_rms: f64,
    /// Events used by the fit.
    pub n_events: usize,
    pub overlap_ns: f64,
    pub fit_window_ns: (f64, f64),
    pub fourier_limit_mhz: f64,
    /// RMS spread of fitted event times about the window centre, ns.
    pub t_spread_ns: f64,
    /// RMS spread of fitted event positions about the slit centre, mm.
    pub y_spread_mm: f64,
    pub peak_ratio: f64,
    pub iterations: usize,
    pub orientation: Orientation,
}

impl FringeEstimate {
    pub fn spacing_mm(&self) -> f64 {
        1.0 / self.spatial_freq_cyc_per_mm
    }

    pub fn spacing_stderr_mm(&self) -> f64 {
        self.spatial_freq_stderr / self.spatial_freq_cyc_per_mm.powi(2)
    }

    /// Uncertainty of the beat frequency, never below the Fourier limit.
    pub fn beat_freq_uncertainty_mhz(&self) -> f64 {
        self.beat_freq_stderr_mhz.max(self.fourier_limit_mhz)
    }
}

/// Overlap window on the time axis, as inclusive bin ranges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlapWindow {
    pub overlap_bins: (usize, usize),
    pub fit_bins: (usize, usize),
}

fn moving_average(x: &[f64], width: usize) -> Vec<f64> {
    let half = width / 2;
    (0..x.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(x.len());
            x[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

fn median(mut v: Vec<f64>) -> f64 {
    let mid = v.len() / 2;
    *v.select_nth_unstable_by(mid, f64::total_cmp).1
}

fn first_last(c: &[f64], level: f64) -> Option<(usize, usize)> {
    let first = c.iter().position(|&x| x >= level)?;
    let last = c.iter().rposition(|&x| x >= level)?;
    Some((first, last))
}

/// Finds the time span where both beams interfere, from the per-column
/// fringe amplitude at spatial frequency `f_y`.
pub fn detect_overlap(image: &CountImage, f_y: f64) -> Option<OverlapWindow> {
    let g = image.grid;
    let phasors: Vec<Complex64> =
        (0..g.y_bins).map(|iy| Complex64::from_polar(1.0, -2.0 * PI * f_y * g.y_center(iy))).collect();
    let amp: Vec<f64> = (0..g.t_bins)
        .map(|it| phasors.iter().enumerate().map(|(iy, p)| p * f64::from(image.get(it, iy))).sum::<Complex64>().norm())
        .collect();
    let c = moving_average(&amp, SMOOTH_BINS);
    let max = c.iter().cloned().fold(0.0, f64::max);
    if !(max > 0.0) {
        return None;
    }
    let plateau = median(c.iter().cloned().filter(|&x| x >= 0.5 * max).collect());
    let overlap_bins = first_last(&c, OVERLAP_LEVEL * plateau)?;
    let (f0, f1) = first_last(&c, FIT_LEVEL * plateau)?;
    let fit_bins = if f1 > f0 + 2 * FIT_INSET_BINS { (f0 + FIT_INSET_BINS, f1 - FIT_INSET_BINS) } else { (f0, f1) };
    Some(OverlapWindow { overlap_bins, fit_bins })
}

/// Fits fringe parameters to a single interferogram.
pub fn estimate_fringes(ig: &Interferogram) -> Result<FringeEstimate> {
    let g = ig.grid();
    if ig.events.len() < MIN_EVENTS {
        return Err(Error::InsufficientEvents { found: ig.events.len(), required: MIN_EVENTS });
    }
    let seed = spectrum::spectral_seed(&ig.image)?;
    let window = detect_overlap(&ig.image, seed.f_y)
        .ok_or(Error::NoFringes { peak_ratio: seed.peak_ratio, threshold: spectrum::PEAK_THRESHOLD })?;
    let dt = g.t_bin_ns();
    let overlap_ns = (window.overlap_bins.1 - window.overlap_bins.0 + 1) as f64 * dt;
    let t0 = window.fit_bins.0 as f64 * dt;
    let t1 = (window.fit_bins.1 + 1) as f64 * dt;
    let (tc, yc) = (0.5 * (t0 + t1), 0.5 * g.y_range_mm);

    let (mut ys, mut ts) = (Vec::new(), Vec::new());
    for e in &ig.events {
        if e.t_ns >= t0 && e.t_ns < t1 {
            ys.push(e.y_mm - yc);
            ts.push(e.t_ns - tc);
        }
    }
    if ys.len() < MIN_EVENTS {
        return Err(Error::InsufficientEvents { found: ys.len(), required: MIN_EVENTS });
    }
    let data = FitData { y: ys, t: ts, height_mm: g.y_range_mm, duration_ns: t1 - t0 };
    let (phi, v) = likelihood::moment_seed(&data, seed.f_y, seed.f_t);
    let fit = likelihood::fit(&data, [seed.f_y, seed.f_t, phi, v])?;
    let p = fit.params;

    let (a, b) = (p[A], p[B]);
    let cov = &fit.covariance;
    let slope = b / a;
    let slope_var = cov[(B, B)] / (a * a) + b * b * cov[(A, A)] / a.powi(4) - 2.0 * b * cov[(A, B)] / a.powi(3);
    let slope_stderr = slope_var.max(0.0).sqrt();
    let fourier_limit_mhz = crate::budget::fourier_limit(Nanoseconds::new(overlap_ns)?);
    let slope_uncertainty = slope_stderr.max(fourier_limit_mhz * 1e-3 / a.abs());

    let n = data.n() as f64;
    let t_spread_ns = (data.t.iter().map(|t| t * t).sum::<f64>() / n).sqrt();
    let y_spread_mm = (data.y.iter().map(|y| y * y).sum::<f64>() / n).sqrt();
    let phase0 = wrap(p[PHI] - 2.0 * PI * (a * yc - b * tc));

    let residual_rms = pearson_rms(&ig.image, window.fit_bins, &p, tc, yc, data.n());

    Ok(FringeEstimate {
        spatial_freq_cyc_per_mm: a,
        spatial_freq_stderr: fit.stderr(A),
        slope_mm_per_ns: slope,
        slope_stderr,
        slope_uncertainty,
        beat_freq_mhz: b * 1e3,
        beat_freq_stderr_mhz: fit.stderr(B) * 1e3,
        delta_nu_mhz: b * 1e3 * ig.orientation.sign(),
        visibility: p[VIS],
        visibility_stderr: fit.stderr(VIS),
        phase0_rad: phase0,
        residual_rms,
        n_events: data.n(),
        overlap_ns,
        fit_window_ns: (t0, t1),
        fourier_limit_mhz,
        t_spread_ns,
        y_spread_mm,
        peak_ratio: seed.peak_ratio,
        iterations: fit.iterations,
        orientation: ig.orientation,
    })
}

fn wrap(phi: f64) -> f64 {
    let w = phi.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0
    } else {
        x.sin() / x
    }
}

/// Pearson residual RMS of the fitted model over the fit-window bins.
fn pearson_rms(image: &CountImage, bins: (usize, usize), p: &[f64; 4], tc: f64, yc: f64, n_fit: usize) -> f64 {
    let g = image.grid;
    let (dt, dy) = (g.t_bin_ns(), g.y_bin_mm());
    let cols = bins.1 - bins.0 + 1;
    let area = cols as f64 * dt * g.y_range_mm;
    // Rate normalisation from the profile likelihood.
    let jy = g.y_range_mm * sinc(PI * p[A] * g.y_range_mm);
    let jt = cols as f64 * dt * sinc(PI * p[B] * cols as f64 * dt);
    let rate = n_fit as f64 / (area + p[VIS] * p[PHI].cos() * jy * jt);
    let blur = sinc(PI * p[A] * dy) * sinc(PI * p[B] * dt);
    let mut chi2 = 0.0;
    let mut count = 0usize;
    for iy in 0..g.y_bins {
        let y = g.y_center(iy) - yc;
        for it in bins.0..=bins.1 {
            let t = g.t_center(it) - tc;
            let psi = 2.0 * PI * (p[A] * y - p[B] * t) + p[PHI];
            let mu = rate * dt * dy * (1.0 + p[VIS] * blur * psi.cos());
            if mu > 0.0 {
                chi2 += (f64::from(image.get(it, iy)) - mu).powi(2) / mu;
                count += 1;
            }
        }
    }
    if count == 0 {
        0.0
    } else {
        (chi2 / count as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VisibilityCheck {
    /// Visibility from the likelihood fit.
    pub fitted: f64,
    /// Visibility of the phase-folded event histogram.
    pub folded: f64,
    pub histogram: Vec<usize>,
    /// True when some folded bin holds fewer than the minimum count.
    pub unreliable: bool,
}

/// Folds the events inside the fit window onto one fringe period using the
/// fitted phase and measures the contrast of the histogram.
pub fn visibility(ig: &Interferogram, est: &FringeEstimate) -> VisibilityCheck {
    let (t0, t1) = est.fit_window_ns;
    let (a, b) = (est.spatial_freq_cyc_per_mm, est.beat_freq_mhz * 1e-3);
    let mut hist = vec![0usize; FOLD_BINS];
    for e in ig.events.iter().filter(|e| e.t_ns >= t0 && e.t_ns < t1) {
        let psi = (2.0 * PI * (a * e.y_mm - b * e.t_ns) + est.phase0_rad).rem_euclid(2.0 * PI);
        let k = ((psi / (2.0 * PI) * FOLD_BINS as f64) as usize).min(FOLD_BINS - 1);
        hist[k] += 1;
    }
    let max = *hist.iter().max().unwrap_or(&0) as f64;
    let min = *hist.iter().min().unwrap_or(&0) as f64;
    let raw = if max + min > 0.0 { (max - min) / (max + min) } else { 0.0 };
    // Undo the contrast lost to the finite phase-bin width.
    let folded = (raw / sinc(PI / FOLD_BINS as f64)).clamp(0.0, 1.0);
    VisibilityCheck {
        fitted: est.visibility,
        folded,
        unreliable: hist.iter().any(|&h| h < FOLD_MIN_PER_BIN),
        histogram: hist,
    }
}
