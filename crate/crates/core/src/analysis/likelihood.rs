//! Maximum-likelihood fit of `λ = B·(1 + V cos(2π a y − 2π b t + φ))` to
//! point events on a rectangle, with the rate `B` profiled out:
//!
//! ```text
//! L(a, b, φ, V) = Σᵢ ln(1 + V cos ψᵢ) − N ln(A + V·C(a, b, φ))
//! ```
//!
//! Coordinates are centred on the rectangle so that `C = cos φ · Jy(a) · Jt(b)`
//! with `J` the Fourier transform of a box.

use std::f64::consts::PI;

use nalgebra::{Matrix4, Vector4};
use rayon::prelude::*;

use crate::error::{Error, Result};

pub const MAX_ITERATIONS: usize = 60;
/// Events per parallel chunk; chunks are reduced in index order.
const CHUNK: usize = 1 << 15;
const V_MAX: f64 = 0.9999;

/// Parameter order in vectors and matrices.
pub const A: usize = 0;
pub const B: usize = 1;
pub const PHI: usize = 2;
pub const VIS: usize = 3;

/// Events in centred coordinates plus the rectangle they were drawn from.
#[derive(Debug, Clone)]
pub struct FitData {
    pub y: Vec<f64>,
    pub t: Vec<f64>,
    pub height_mm: f64,
    pub duration_ns: f64,
}

impl FitData {
    pub fn n(&self) -> usize {
        self.y.len()
    }

    fn area(&self) -> f64 {
        self.height_mm * self.duration_ns
    }
}

/// `sin x / x` and its first two derivatives.
fn sinc3(x: f64) -> (f64, f64, f64) {
    if x.abs() < 1e-2 {
        let x2 = x * x;
        (1.0 - x2 / 6.0 + x2 * x2 / 120.0, -x / 3.0 + x * x2 / 30.0, -1.0 / 3.0 + x2 / 10.0)
    } else {
        let (s, c) = x.sin_cos();
        let f = s / x;
        let d1 = (x * c - s) / (x * x);
        (f, d1, -f - 2.0 * d1 / x)
    }
}

/// `∫ exp(±2πi f u) du` over `[−L/2, L/2]` and its derivatives in `f`.
fn box_transform(f: f64, len: f64) -> (f64, f64, f64) {
    let k = PI * len;
    let (s, d1, d2) = sinc3(k * f);
    (len * s, len * k * d1, len * k * k * d2)
}

#[derive(Debug, Clone, Copy, Default)]
struct Sums {
    ll: f64,
    grad: [f64; 4],
    // Upper triangle of the Hessian, row-major over (a, b, φ, V).
    hess: [f64; 10],
}

impl Sums {
    fn add(mut self, o: Sums) -> Sums {
        self.ll += o.ll;
        for k in 0..4 {
            self.grad[k] += o.grad[k];
        }
        for k in 0..10 {
            self.hess[k] += o.hess[k];
        }
        self
    }
}

#[inline]
fn tri(i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * 4 - i * (i + 1) / 2 + j
}

fn event_sums(data: &FitData, p: &[f64; 4]) -> Option<Sums> {
    let (a, b, phi, v) = (p[A], p[B], p[PHI], p[VIS]);
    let chunks: Vec<Option<Sums>> = data
        .y
        .par_chunks(CHUNK)
        .zip(data.t.par_chunks(CHUNK))
        .map(|(ys, ts)| {
            let mut s = Sums::default();
            for (&y, &t) in ys.iter().zip(ts) {
                let psi = 2.0 * PI * (a * y - b * t) + phi;
                let (sn, cs) = psi.sin_cos();
                let d = 1.0 + v * cs;
                if !(d > 0.0) {
                    return None;
                }
                let inv = 1.0 / d;
                let inv2 = inv * inv;
                s.ll += d.ln();
                let f_v = cs * inv;
                let f_p = -v * sn * inv;
                let f_vv = -cs * cs * inv2;
                let f_vp = -sn * inv2;
                let f_pp = -v * (cs + v) * inv2;
                let u = [2.0 * PI * y, -2.0 * PI * t, 1.0];
                for i in 0..3 {
                    s.grad[i] += f_p * u[i];
                    for j in i..3 {
                        s.hess[tri(i, j)] += f_pp * u[i] * u[j];
                    }
                    s.hess[tri(i, VIS)] += f_vp * u[i];
                }
                s.grad[VIS] += f_v;
                s.hess[tri(VIS, VIS)] += f_vv;
            }
            Some(s)
        })
        .collect();
    chunks.into_iter().try_fold(Sums::default(), |acc, c| c.map(|c| acc.add(c)))
}

/// Profile log-likelihood with gradient and Hessian.
#[derive(Debug, Clone, Copy)]
pub struct Evaluation {
    pub value: f64,
    pub grad: Vector4<f64>,
    pub hess: Matrix4<f64>,
}

pub fn evaluate(data: &FitData, p: &[f64; 4]) -> Option<Evaluation> {
    let s = event_sums(data, p)?;
    let n = data.n() as f64;
    let (a, b, phi, v) = (p[A], p[B], p[PHI], p[VIS]);
    let (jy, jy1, jy2) = box_transform(a, data.height_mm);
    let (jt, jt1, jt2) = box_transform(b, data.duration_ns);
    let (sp, cp) = phi.sin_cos();

    // C and its derivatives over (a, b, φ).
    let c = cp * jy * jt;
    let dc = [cp * jy1 * jt, cp * jy * jt1, -sp * jy * jt];
    let mut ddc = [[0.0; 3]; 3];
    ddc[0][0] = cp * jy2 * jt;
    ddc[1][1] = cp * jy * jt2;
    ddc[2][2] = -cp * jy * jt;
    ddc[0][1] = cp * jy1 * jt1;
    ddc[0][2] = -sp * jy1 * jt;
    ddc[1][2] = -sp * jy * jt1;
    for i in 0..3 {
        for j in 0..i {
            ddc[i][j] = ddc[j][i];
        }
    }

    let q = data.area() + v * c;
    if !(q > 0.0) {
        return None;
    }
    // Q = A + V C
    let mut dq = [0.0; 4];
    let mut ddq = [[0.0; 4]; 4];
    for i in 0..3 {
        dq[i] = v * dc[i];
        for j in 0..3 {
            ddq[i][j] = v * ddc[i][j];
        }
        ddq[i][VIS] = dc[i];
        ddq[VIS][i] = dc[i];
    }
    dq[VIS] = c;

    let value = s.ll - n * q.ln();
    let mut grad = Vector4::zeros();
    let mut hess = Matrix4::zeros();
    for i in 0..4 {
        grad[i] = s.grad[i] - n * dq[i] / q;
        for j in 0..4 {
            hess[(i, j)] = s.hess[tri(i, j)] - n * (ddq[i][j] / q - dq[i] * dq[j] / (q * q));
        }
    }
    Some(Evaluation { value, grad, hess })
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub params: [f64; 4],
    /// Inverse of the observed information (negative Hessian).
    pub covariance: Matrix4<f64>,
    pub log_likelihood: f64,
    pub iterations: usize,
}

impl FitResult {
    pub fn stderr(&self, k: usize) -> f64 {
        self.covariance[(k, k)].max(0.0).sqrt()
    }
}

/// Phase and visibility seeds for fixed `(a, b)`: the first circular moment
/// of the event phases.
pub fn moment_seed(data: &FitData, a: f64, b: f64) -> (f64, f64) {
    let (mut re, mut im) = (0.0, 0.0);
    for (&y, &t) in data.y.iter().zip(&data.t) {
        let (s, c) = (2.0 * PI * (a * y - b * t)).sin_cos();
        re += c;
        im += s;
    }
    let n = data.n().max(1) as f64;
    let phi = -im.atan2(re);
    let v = (2.0 * (re * re + im * im).sqrt() / n).clamp(0.05, 0.95);
    (phi, v)
}

fn wrap(phi: f64) -> f64 {
    let w = phi.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

/// Levenberg–Marquardt ascent from `start`, keeping `0 ≤ V < 1`.
pub fn fit(data: &FitData, start: [f64; 4]) -> Result<FitResult> {
    let mut p = start;
    p[VIS] = p[VIS].clamp(0.0, V_MAX);
    let mut cur = evaluate(data, &p).ok_or_else(|| Error::NonConvergence {
        iterations: 0,
        detail: "likelihood undefined at the starting point".into(),
    })?;
    let mut lambda = 1e-3;
    let mut last_step = f64::INFINITY;
    for iter in 1..=MAX_ITERATIONS {
        let info = -cur.hess;
        let mut accepted = false;
        for _ in 0..30 {
            let mut damped = info;
            for k in 0..4 {
                damped[(k, k)] += lambda * info[(k, k)].abs().max(1e-12);
            }
            let Some(step) = damped.cholesky().map(|c| c.solve(&cur.grad)) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial = p;
            for k in 0..4 {
                trial[k] += step[k];
            }
            trial[VIS] = trial[VIS].clamp(0.0, V_MAX);
            match evaluate(data, &trial) {
                Some(e) if e.value >= cur.value => {
                    // Step size in units of the current standard errors.
                    last_step = (0..4)
                        .map(|k| {
                            let var = info.try_inverse().map(|m| m[(k, k)]).unwrap_or(f64::NAN);
                            (trial[k] - p[k]).abs() / var.abs().sqrt().max(1e-300)
                        })
                        .fold(0.0, f64::max);
                    let gain = e.value - cur.value;
                    p = trial;
                    cur = e;
                    lambda = (lambda / 10.0).max(1e-12);
                    accepted = true;
                    if last_step < 1e-4 || gain < 1e-10 {
                        return finish(p, cur, iter);
                    }
                    break;
                }
                _ => lambda *= 10.0,
            }
        }
        if !accepted {
            // No ascent direction left: at a maximum within numerical precision.
            return finish(p, cur, iter);
        }
    }
    Err(Error::NonConvergence {
        iterations: MAX_ITERATIONS,
        detail: format!("last step {last_step:.3e} σ, V = {:.4}, a = {:.6}, b = {:.6}", p[VIS], p[A], p[B]),
    })
}

fn finish(mut p: [f64; 4], e: Evaluation, iterations: usize) -> Result<FitResult> {
    let info = -e.hess;
    let covariance = info
        .try_inverse()
        .ok_or_else(|| Error::NonConvergence { iterations, detail: "observed information is singular".into() })?;
    if (0..4).any(|k| !(covariance[(k, k)] > 0.0)) {
        return Err(Error::NonConvergence {
            iterations,
            detail: "observed information is not positive definite".into(),
        });
    }
    p[PHI] = wrap(p[PHI]);
    Ok(FitResult { params: p, covariance, log_likelihood: e.value, iterations })
}

#[cfg(test)]
mod tests {
    use rand::Rng;

    use super::*;
    use crate::rng::rng_from_seed;

    /// Rejection sampler for the model on a centred rectangle.
    fn draw(n: usize, p: [f64; 4], h: f64, d: f64, seed: u64) -> FitData {
        let mut rng = rng_from_seed(seed);
        let (mut y, mut t) = (Vec::new(), Vec::new());
        while y.len() < n {
            let yy = (rng.random::<f64>() - 0.5) * h;
            let tt = (rng.random::<f64>() - 0.5) * d;
            let lam = 1.0 + p[VIS] * (2.0 * PI * (p[A] * yy - p[B] * tt) + p[PHI]).cos();
            if rng.random::<f64>() * (1.0 + p[VIS]) < lam {
                y.push(yy);
                t.push(tt);
            }
        }
        FitData { y, t, height_mm: h, duration_ns: d }
    }

    #[test]
    fn sinc_series_matches_closed_form() {
        for x in [1e-2, 2e-2] {
            let (s, d1, d2) = sinc3(x);
            let (s2, d12, d22) = sinc3(x * (1.0 + 1e-12));
            assert!((s - s2).abs() < 1e-9 && (d1 - d12).abs() < 1e-9 && (d2 - d22).abs() < 1e-6);
        }
        let (s, d1, d2) = sinc3(1e-3);
        assert!((s - (1e-3f64).sin() / 1e-3).abs() < 1e-15);
        assert!((d1 + 1e-3 / 3.0).abs() < 1e-9);
        assert!((d2 + 1.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn analytic_derivatives_match_finite_differences() {
        let truth = [0.52, 0.03, 0.7, 0.8];
        let data = draw(5000, truth, 15.0, 600.0, 1);
        let p = [0.5205, 0.0301, 0.65, 0.75];
        let e = evaluate(&data, &p).unwrap();
        let h = [1e-7, 1e-9, 1e-6, 1e-6];
        for k in 0..4 {
            let mut hi = p;
            let mut lo = p;
            hi[k] += h[k];
            lo[k] -= h[k];
            let (eh, el) = (evaluate(&data, &hi).unwrap(), evaluate(&data, &lo).unwrap());
            let g = (eh.value - el.value) / (2.0 * h[k]);
            assert!((g - e.grad[k]).abs() <= 1e-4 * e.grad[k].abs().max(1.0), "grad {k}: {g} vs {}", e.grad[k]);
            for j in 0..4 {
                let hd = (eh.grad[j] - el.grad[j]) / (2.0 * h[k]);
                let scale = e.hess[(k, j)].abs().max(1.0);
                assert!((hd - e.hess[(k, j)]).abs() <= 1e-3 * scale, "hess {k}{j}: {hd} vs {}", e.hess[(k, j)]);
            }
        }
    }

    #[test]
    fn box_integral_matches_quadrature() {
        let (f, len) = (0.013, 40.0);
        let n = 200_000;
        let h = len / n as f64;
        let num: f64 = (0..n).map(|i| (2.0 * PI * f * (-len / 2.0 + (i as f64 + 0.5) * h)).cos() * h).sum();
        assert!((box_transform(f, len).0 - num).abs() < 1e-6);
    }

    #[test]
    fn recovers_parameters_within_errors() {
        let truth = [0.526, -0.0194, -1.2, 0.9];
        let data = draw(100_000, truth, 15.0, 600.0, 7);
        let (phi, v) = moment_seed(&data, 0.525, -0.0193);
        let fit = fit(&data, [0.525, -0.0193, phi, v]).unwrap();
        for k in 0..4 {
            let z = (fit.params[k] - truth[k]) / fit.stderr(k);
            assert!(z.abs() < 4.5, "param {k}: {} ± {} vs {}", fit.params[k], fit.stderr(k), truth[k]);
        }
    }
}
