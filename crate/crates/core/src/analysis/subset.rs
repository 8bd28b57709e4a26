//! Slope uncertainty as a function of the number of events used.

use rand::seq::SliceRandom;

use super::{estimate_fringes, FringeEstimate};
use crate::detector::Interferogram;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed, Stream};

#[derive(Debug, Clone, PartialEq)]
pub struct SubsetRow {
    pub fraction: f64,
    pub n_events: usize,
    pub slope_stderr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubsetTable {
    pub rows: Vec<SubsetRow>,
    /// Least-squares slope of ln(stderr) against ln(n).
    pub exponent: Option<f64>,
    /// Spearman rank correlation between fraction and stderr.
    pub spearman: Option<f64>,
    pub notes: Vec<String>,
}

/// Re-fits nested random subsets of the events. Fraction 1.0 re-uses the full
/// interferogram unchanged.
pub fn subset_uncertainty(ig: &Interferogram, fractions: &[f64], seed: u64) -> Result<SubsetTable> {
    for &f in fractions {
        if !(f > 0.0 && f <= 1.0) {
            return Err(Error::invalid("fractions", format!("each fraction must lie in (0, 1], got {f}")));
        }
    }
    let mut order: Vec<usize> = (0..ig.events.len()).collect();
    order.shuffle(&mut rng_from_seed(derive_seed(seed, Stream::Subsets, 0)));

    let mut rows = Vec::new();
    let mut notes = Vec::new();
    for &f in fractions {
        let result: Result<FringeEstimate> = if f == 1.0 {
            estimate_fringes(ig)
        } else {
            let k = (f * ig.events.len() as f64).round() as usize;
            let mut picked: Vec<usize> = order[..k].to_vec();
            picked.sort_unstable();
            let events = picked.iter().map(|&i| ig.events[i]).collect();
            estimate_fringes(&Interferogram::from_events(events, ig.grid(), ig.orientation))
        };
        match result {
            Ok(est) => rows.push(SubsetRow { fraction: f, n_events: est.n_events, slope_stderr: est.slope_stderr }),
            Err(e @ (Error::InsufficientEvents { .. } | Error::NoFringes { .. } | Error::NonConvergence { .. })) => {
                notes.push(format!("fraction {f}: skipped ({e})"))
            }
            Err(e) => return Err(e),
        }
    }

    let exponent = if rows.len() >= 2 {
        let xs: Vec<f64> = rows.iter().map(|r| (r.n_events as f64).ln()).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.slope_stderr.ln()).collect();
        linear_slope(&xs, &ys)
    } else {
        None
    };
    let spearman = if rows.len() >= 3 {
        let xs: Vec<f64> = rows.iter().map(|r| r.fraction).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.slope_stderr).collect();
        spearman_rho(&xs, &ys)
    } else {
        None
    };
    Ok(SubsetTable { rows, exponent, spearman, notes })
}

fn linear_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Average ranks, ties sharing the mean rank.
fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            r[idx[k]] = avg;
        }
        i = j + 1;
    }
    r
}

pub fn spearman_rho(x: &[f64], y: &[f64]) -> Option<f64> {
    let (rx, ry) = (ranks(x), ranks(y));
    let n = rx.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let sxy: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}
