//! Coarse fringe parameters from the 2D spectrum of the binned image.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::detector::CountImage;
use crate::error::{Error, Result};

/// A spectral peak must exceed the median amplitude by this factor.
pub const PEAK_THRESHOLD: f64 = 5.0;
/// Zero-padding factor applied before rounding up to a power of two.
const PAD: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralSeed {
    /// Spatial frequency, cycles/mm (> 0).
    pub f_y: f64,
    /// Temporal frequency of the model `cos(2π f_y y − 2π f_t t + φ)`, cycles/ns.
    pub f_t: f64,
    pub peak_ratio: f64,
}

fn parabolic_offset(left: f64, mid: f64, right: f64) -> f64 {
    let denom = left - 2.0 * mid + right;
    if denom.abs() < f64::EPSILON * mid.abs() || denom >= 0.0 {
        0.0
    } else {
        (0.5 * (left - right) / denom).clamp(-0.5, 0.5)
    }
}

/// Locates the dominant fringe component on the positive-f_y half plane,
/// ignoring spatial frequencies below two cycles across the slit.
pub fn spectral_seed(image: &CountImage) -> Result<SpectralSeed> {
    let g = image.grid;
    let (nt, ny) = (g.t_bins, g.y_bins);
    let pt = (PAD * nt).next_power_of_two();
    let py = (PAD * ny).next_power_of_two();

    // Remove each column's mean so the gate envelope does not dominate.
    let mut col_mean = vec![0.0; nt];
    for iy in 0..ny {
        for (it, m) in col_mean.iter_mut().enumerate() {
            *m += f64::from(image.get(it, iy));
        }
    }
    col_mean.iter_mut().for_each(|m| *m /= ny as f64);

    let mut planner = FftPlanner::<f64>::new();
    let fft_t = planner.plan_fft_forward(pt);
    let fft_y = planner.plan_fft_forward(py);

    // Transform rows along t; padded rows stay zero.
    let mut rows = vec![Complex64::new(0.0, 0.0); ny * pt];
    for iy in 0..ny {
        let row = &mut rows[iy * pt..(iy + 1) * pt];
        for it in 0..nt {
            row[it] = Complex64::new(f64::from(image.get(it, iy)) - col_mean[it], 0.0);
        }
        fft_t.process(row);
    }

    let jy_min = ((2.0 * py as f64 / ny as f64).ceil() as usize).max(1);
    let jy_max = py / 2;
    if jy_min >= jy_max {
        return Err(Error::NoFringes { peak_ratio: 0.0, threshold: PEAK_THRESHOLD });
    }
    let height = jy_max - jy_min;
    let mut amp = vec![0.0; height * pt];
    let mut col = vec![Complex64::new(0.0, 0.0); py];
    for jt in 0..pt {
        col.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
        for iy in 0..ny {
            col[iy] = rows[iy * pt + jt];
        }
        fft_y.process(&mut col);
        for jy in jy_min..jy_max {
            amp[(jy - jy_min) * pt + jt] = col[jy].norm();
        }
    }

    let (best, &peak) = amp.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).expect("non-empty spectrum");
    let mut sorted = amp.clone();
    let mid = sorted.len() / 2;
    let median = *sorted.select_nth_unstable_by(mid, f64::total_cmp).1;
    let peak_ratio = if median > 0.0 { peak / median } else { f64::INFINITY };
    if !(peak > 0.0) || peak_ratio < PEAK_THRESHOLD {
        return Err(Error::NoFringes {
            peak_ratio: if peak > 0.0 { peak_ratio } else { 0.0 },
            threshold: PEAK_THRESHOLD,
        });
    }

    let (ry, jt) = (best / pt, best % pt);
    let at = |ry: usize, jt: usize| amp[ry * pt + jt];
    let dy = if ry > 0 && ry + 1 < height { parabolic_offset(at(ry - 1, jt), peak, at(ry + 1, jt)) } else { 0.0 };
    let dt = parabolic_offset(at(ry, (jt + pt - 1) % pt), peak, at(ry, (jt + 1) % pt));

    let jy = (ry + jy_min) as f64 + dy;
    let signed_jt = if jt < pt / 2 { jt as f64 } else { jt as f64 - pt as f64 } + dt;
    let f_y = jy / (py as f64 * g.y_bin_mm());
    let k_t = signed_jt / (pt as f64 * g.t_bin_ns());
    Ok(SpectralSeed { f_y, f_t: -k_t, peak_ratio })
}
