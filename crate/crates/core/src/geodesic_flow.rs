//! Geodesics `dι/dt = J ι_* X` by spectral continuation and by time stepping,
//! and the two-curve boundary value problem on an annulus.
//!
//! `J` is constant in the chart, so the flow itself never touches the metric:
//! each complex coordinate of `ι_t` is the holomorphic extension of `ι` in the
//! direction of `X`. For `X = c ∂θ_k` a Fourier mode `m` in `θ_k` picks up the
//! factor `e^{-m c t}`.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::ambient::apply_j;
use crate::curve_lab::{
    self, estimate_from_magnitudes, Annulus, FourierCurve, TailWindow, DEFAULT_MARGIN,
};
use crate::error::{Error, Result};
use crate::immersion::{Immersion, VectorFieldOnL};
use crate::spectral;

/// Largest mode amplification a continuation may apply.
pub const AMP_MAX: f64 = 1e6;
/// Modes below this fraction of the largest coefficient are treated as absent.
pub const SPECTRAL_FLOOR: f64 = 1e-14;
/// Time stepping aborts when this fraction of the energy sits in the upper
/// half of the retained band.
pub const TAIL_ABORT: f64 = 1e-3;
/// Coefficients below this fraction of the largest are zeroed after each step.
pub const NOISE_FILTER: f64 = 1e-13;
/// Default spectral cutoff as a fraction of the Nyquist wavenumber.
pub const DEFAULT_CUTOFF: f64 = 2.0 / 3.0;
/// Stability heuristic: `dt · k_cut · max|X| <= STEP_BOUND`.
pub const STEP_BOUND: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Spectral,
    TimeStep,
}

/// A sampled geodesic.
#[derive(Debug, Clone)]
pub struct FlowResult {
    pub times: Vec<f64>,
    pub immersions: Vec<Immersion>,
    /// Largest growth factor applied to (spectral) or observed in (time
    /// stepping) the non-constant modes.
    pub amplification: f64,
    pub scheme: Scheme,
    /// `max |dι/dt - J ι_* X|` over the samples, when the scheme can evaluate it.
    pub residual: Option<f64>,
}

fn complex_components(periodic: &[Vec<f64>]) -> Vec<Vec<Complex64>> {
    periodic
        .chunks(2)
        .map(|p| {
            p[0].iter()
                .zip(&p[1])
                .map(|(&x, &y)| Complex64::new(x, y))
                .collect()
        })
        .collect()
}

fn real_components(z: &[Vec<Complex64>]) -> Vec<Vec<f64>> {
    z.iter()
        .flat_map(|c| {
            [
                c.iter().map(|v| v.re).collect::<Vec<_>>(),
                c.iter().map(|v| v.im).collect::<Vec<_>>(),
            ]
        })
        .collect()
}

/// Magnitude profile along `axis` (max over lines and components), normalized
/// so the largest non-constant coefficient is 1. Entries below the noise floor
/// are zeroed: the floor is `SPECTRAL_FLOOR` or ten times the median of the
/// top quarter of the band, whichever is larger, so that a roundoff plateau is
/// not mistaken for a slowly decaying tail.
fn axis_profile(comps: &[Vec<Complex64>], sizes: &[usize], axis: usize) -> (Vec<f64>, Vec<f64>) {
    let n = sizes[axis];
    let mut mag = vec![0.0f64; n];
    for c in comps {
        let coef = spectral::forward_grid(c, sizes);
        for (idx, v) in coef.iter().enumerate() {
            let m = spectral::grid_wavenumbers(idx, sizes)[axis];
            let b = spectral::bin(m, n);
            mag[b] = mag[b].max(v.norm());
        }
    }
    let half = n / 2 - 1;
    let top = (1..=half)
        .flat_map(|m| [mag[m], mag[n - m]])
        .fold(0.0, f64::max);
    if top == 0.0 {
        return (vec![0.0; half], vec![0.0; half]);
    }
    let mut upper: Vec<f64> = (half - half / 4..=half)
        .flat_map(|m| [mag[m] / top, mag[n - m] / top])
        .collect();
    upper.sort_by(f64::total_cmp);
    let floor = SPECTRAL_FLOOR.max(10.0 * upper[upper.len() / 2]);
    let norm = |v: f64| if v / top > floor { v / top } else { 0.0 };
    let pos = (1..=half).map(|m| norm(mag[m])).collect();
    let neg = (1..=half).map(|m| norm(mag[n - m])).collect();
    (pos, neg)
}

/// Admissible continuation radii for modes along `axis`.
fn axis_annulus(comps: &[Vec<Complex64>], sizes: &[usize], axis: usize) -> Annulus {
    let (pos, neg) = axis_profile(comps, sizes, axis);
    let half = pos.len();
    let ev = estimate_from_magnitudes(&pos, &neg, TailWindow { lo: half / 2, hi: half });
    Annulus::from_estimate(&ev, DEFAULT_MARGIN)
}

/// Continues one complex component by `e^{-m s}` along `axis`, dropping
/// coefficients under the floor. Returns the samples and the largest factor applied.
fn continue_component(c: &[Complex64], sizes: &[usize], axis: usize, s: f64) -> (Vec<Complex64>, f64) {
    let mut coef = spectral::forward_grid(c, sizes);
    let top = coef.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let mut amp = 0.0f64;
    for (idx, v) in coef.iter_mut().enumerate() {
        if !(v.norm() > SPECTRAL_FLOOR * top) {
            *v = Complex64::new(0.0, 0.0);
            continue;
        }
        let m = spectral::grid_wavenumbers(idx, sizes)[axis];
        let f = (-(m as f64) * s).exp();
        amp = amp.max(f);
        *v *= f;
    }
    (spectral::inverse_grid(&coef, sizes), amp)
}

/// `max |dι/dt - J c ∂_k ι|` for a continued immersion, with `dι/dt` from the
/// mode multipliers.
fn continuation_residual(
    comps0: &[Vec<Complex64>],
    im_t: &Immersion,
    axis: usize,
    c: f64,
    s: f64,
) -> f64 {
    let sizes = im_t.grid().sizes().to_vec();
    let mut worst = 0.0f64;
    for (j, comp) in comps0.iter().enumerate() {
        let mut coef = spectral::forward_grid(comp, &sizes);
        let top = coef.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for (idx, v) in coef.iter_mut().enumerate() {
            if !(v.norm() > SPECTRAL_FLOOR * top) {
                *v = Complex64::new(0.0, 0.0);
                continue;
            }
            let m = spectral::grid_wavenumbers(idx, &sizes)[axis] as f64;
            *v *= -m * c * (-m * s).exp();
        }
        let dt = spectral::inverse_grid(&coef, &sizes);
        let w = im_t
            .lift()
            .map_or(Complex64::new(0.0, 0.0), |w| Complex64::new(w[(2 * j, axis)], w[(2 * j + 1, axis)]));
        for node in 0..im_t.grid().len() {
            let lhs = dt[node] + Complex64::new(0.0, 1.0) * w * c;
            let tan = im_t.tangent(axis, node);
            let rhs = Complex64::new(0.0, 1.0) * c * Complex64::new(tan[2 * j], tan[2 * j + 1]);
            worst = worst.max((lhs - rhs).norm());
        }
    }
    worst
}

/// Exact continuation of the trigonometric-polynomial representative.
pub fn flow_spectral(im: &Immersion, x: &VectorFieldOnL, times: &[f64]) -> Result<FlowResult> {
    if !im.chart().is_flat() {
        return Err(Error::UnsupportedField(
            "spectral continuation needs a flat chart".into(),
        ));
    }
    if x.grid != *im.grid() {
        return Err(Error::InvalidInput("field and immersion grids differ".into()));
    }
    match x.as_coordinate() {
        Some((axis, c)) => flow_coordinate(im, axis, c, times),
        None if im.grid().dim() == 1 => flow_reparametrized(im, &x.components[0], times),
        None => Err(Error::UnsupportedField(
            "on tori only constant coordinate fields c ∂θ_k are supported".into(),
        )),
    }
}

fn flow_coordinate(im: &Immersion, axis: usize, c: f64, times: &[f64]) -> Result<FlowResult> {
    let sizes = im.grid().sizes().to_vec();
    let comps = complex_components(&im.periodic_components());
    let ann = axis_annulus(&comps, &sizes, axis);
    let band = (sizes[axis] / 2 - 1) as f64;
    let mut out = Vec::with_capacity(times.len());
    let mut amp = 1.0f64;
    let mut residual = 0.0f64;
    for &t in times {
        let s = c * t;
        let r = (-s).exp();
        if !ann.contains(r) {
            return Err(Error::AmplificationExceeded {
                factor: (band * s.abs()).exp(),
                limit: AMP_MAX,
            });
        }
        let mut cont = Vec::with_capacity(comps.len());
        for comp in &comps {
            let (v, a) = continue_component(comp, &sizes, axis, s);
            if a > AMP_MAX {
                return Err(Error::AmplificationExceeded {
                    factor: a,
                    limit: AMP_MAX,
                });
            }
            amp = amp.max(a);
            cont.push(v);
        }
        let mut pts = im.assemble_points(&real_components(&cont));
        if let Some(w) = im.lift() {
            let d = im.real_dim();
            let col: Vec<f64> = (0..d).map(|a| w[(a, axis)] * s).collect();
            let shift = apply_j(&col);
            for node in 0..im.grid().len() {
                for a in 0..d {
                    pts[node * d + a] += shift[a];
                }
            }
        }
        let im_t = im.with_points(pts)?;
        residual = residual.max(continuation_residual(&comps, &im_t, axis, c, s));
        out.push(im_t);
    }
    Ok(FlowResult {
        times: times.to_vec(),
        immersions: out,
        amplification: amp,
        scheme: Scheme::Spectral,
        residual: Some(residual),
    })
}

/// `X = f ∂θ` on a curve: integrate `θ' = f(θ)`, continue in the new
/// parameter, and resample at the original nodes.
fn flow_reparametrized(im: &Immersion, f: &[f64], times: &[f64]) -> Result<FlowResult> {
    if im.lift().is_some() {
        return Err(Error::UnsupportedField(
            "reparametrized flows need a closed curve without winding".into(),
        ));
    }
    let m = im.grid().len();
    let sign = if f.iter().all(|&v| v > 0.0) {
        1.0
    } else if f.iter().all(|&v| v < 0.0) {
        -1.0
    } else {
        return Err(Error::UnsupportedField(
            "vector field vanishes or changes sign".into(),
        ));
    };
    let fz: Vec<Complex64> = f.iter().map(|&v| Complex64::new(sign * v, 0.0)).collect();
    let fcoef = spectral::forward(&fz);
    let f_at = |th: f64| -> f64 {
        spectral::neumaier_sum(fcoef.iter().enumerate().map(|(k, c)| {
            let w = spectral::wavenumber(k, m);
            if 2 * w.unsigned_abs() as usize == m {
                c.re * (w as f64 * th).cos()
            } else {
                (c * Complex64::from_polar(1.0, w as f64 * th)).re
            }
        }))
    };
    let rep = curve_lab::reparametrize_by_field(f_at, m)?;
    let r = rep.period_scale;
    let z: Vec<Complex64> = im
        .points()
        .chunks(2)
        .map(|p| Complex64::new(p[0], p[1]))
        .collect();
    let q = spectral::interpolate(&z, &rep.theta_of_s);
    // σ_i = s(θ_i)/R with s(θ) = ∫_0^θ dθ'/f
    let inv: Vec<Complex64> = (0..m)
        .map(|j| Complex64::new(1.0 / f_at(TAU * j as f64 / m as f64), 0.0))
        .collect();
    let ic = spectral::forward(&inv);
    let sigma: Vec<f64> = (0..m)
        .map(|j| {
            let th = TAU * j as f64 / m as f64;
            let mut s = ic[0].re * th;
            for (k, c) in ic.iter().enumerate() {
                let w = spectral::wavenumber(k, m);
                if w == 0 || 2 * w.unsigned_abs() as usize == m {
                    continue;
                }
                let e = Complex64::from_polar(1.0, w as f64 * th) - 1.0;
                s += (c * e / Complex64::new(0.0, w as f64)).re;
            }
            s / r
        })
        .collect();
    let sizes = [m];
    let ann = axis_annulus(std::slice::from_ref(&q), &sizes, 0);
    let band = (m / 2 - 1) as f64;
    let mut out = Vec::with_capacity(times.len());
    let mut amp = 1.0f64;
    for &t in times {
        let s = sign * t / r;
        if !ann.contains((-s).exp()) {
            return Err(Error::AmplificationExceeded {
                factor: (band * s.abs()).exp(),
                limit: AMP_MAX,
            });
        }
        let (cont, a) = continue_component(&q, &sizes, 0, s);
        if a > AMP_MAX {
            return Err(Error::AmplificationExceeded {
                factor: a,
                limit: AMP_MAX,
            });
        }
        amp = amp.max(a);
        let back = spectral::interpolate(&cont, &sigma);
        let pts: Vec<f64> = back.iter().flat_map(|v| [v.re, v.im]).collect();
        out.push(im.with_points(pts)?);
    }
    Ok(FlowResult {
        times: times.to_vec(),
        immersions: out,
        amplification: amp,
        scheme: Scheme::Spectral,
        residual: None,
    })
}

/// Filtered RK4 on `dι/dt = J ι_* X`, sampled at `times` (monotone, one sign).
pub fn flow_timestep_at(
    im: &Immersion,
    x: &VectorFieldOnL,
    times: &[f64],
    dt: f64,
    cutoff: f64,
) -> Result<FlowResult> {
    if x.grid != *im.grid() {
        return Err(Error::InvalidInput("field and immersion grids differ".into()));
    }
    if !(dt > 0.0) || !(cutoff > 0.0 && cutoff <= 1.0) {
        return Err(Error::InvalidInput("need dt > 0 and cutoff in (0, 1]".into()));
    }
    if times.is_empty() {
        return Err(Error::InvalidInput("no output times".into()));
    }
    let dir = if times.iter().any(|&t| t < 0.0) { -1.0 } else { 1.0 };
    let mut prev = 0.0f64;
    for &t in times {
        if dir * t < dir * prev - 1e-15 || !t.is_finite() {
            return Err(Error::InvalidInput("output times must be monotone from 0".into()));
        }
        prev = t;
    }
    let sizes = im.grid().sizes().to_vec();
    let kcut: Vec<i64> = sizes
        .iter()
        .map(|&n| (cutoff * (n / 2) as f64).floor() as i64)
        .collect();
    let xmax: Vec<f64> = x
        .components
        .iter()
        .map(|c| c.iter().fold(0.0f64, |m, v| m.max(v.abs())))
        .collect();
    let rate = kcut
        .iter()
        .zip(&xmax)
        .map(|(&k, &xm)| k as f64 * xm)
        .fold(0.0, f64::max);
    if rate > 0.0 && dt * rate > STEP_BOUND {
        return Err(Error::StepTooLarge {
            dt,
            bound: STEP_BOUND / rate,
        });
    }
    let lifts: Vec<Vec<Complex64>> = (0..im.real_dim() / 2)
        .map(|j| {
            (0..sizes.len())
                .map(|k| {
                    im.lift().map_or(Complex64::new(0.0, 0.0), |w| {
                        Complex64::new(w[(2 * j, k)], w[(2 * j + 1, k)])
                    })
                })
                .collect()
        })
        .collect();
    let rhs = |state: &[Vec<Complex64>]| -> Vec<Vec<Complex64>> {
        state
            .iter()
            .enumerate()
            .map(|(j, c)| {
                let mut acc = vec![Complex64::new(0.0, 0.0); c.len()];
                for k in 0..sizes.len() {
                    if xmax[k] == 0.0 {
                        continue;
                    }
                    let d = spectral::grid_multiplier(c, &sizes, k, |m| Complex64::new(0.0, m as f64));
                    for (node, a) in acc.iter_mut().enumerate() {
                        *a += Complex64::new(0.0, dir * x.components[k][node]) * (d[node] + lifts[j][k]);
                    }
                }
                acc
            })
            .collect()
    };
    let filter = |state: &mut Vec<Vec<Complex64>>| -> (f64, f64) {
        let mut tail = 0.0;
        let mut total = 0.0;
        for c in state.iter_mut() {
            let mut coef = spectral::forward_grid(c, &sizes);
            let top = coef
                .iter()
                .enumerate()
                .filter(|(i, _)| spectral::grid_wavenumbers(*i, &sizes) != [0, 0])
                .map(|(_, v)| v.norm())
                .fold(0.0, f64::max);
            for (idx, v) in coef.iter_mut().enumerate() {
                let w = spectral::grid_wavenumbers(idx, &sizes);
                let over = (0..sizes.len()).any(|k| w[k].abs() > kcut[k]);
                if over || v.norm() < NOISE_FILTER * top {
                    *v = Complex64::new(0.0, 0.0);
                    continue;
                }
                if w == [0, 0] {
                    continue;
                }
                let e = v.norm_sqr();
                total += e;
                if (0..sizes.len()).any(|k| 2 * w[k].abs() > kcut[k]) {
                    tail += e;
                }
            }
            *c = spectral::inverse_grid(&coef, &sizes);
        }
        (tail, total)
    };
    let mut state = complex_components(&im.periodic_components());
    let (_, e0) = filter(&mut state);
    let mut amp = 1.0f64;
    let mut t = 0.0f64;
    let mut out = Vec::with_capacity(times.len());
    let record = |state: &[Vec<Complex64>]| im.with_points(im.assemble_points(&real_components(state)));
    for &target in times {
        let span = (target - t).abs();
        let steps = (span / dt).ceil() as usize;
        let h = if steps > 0 { span / steps as f64 } else { 0.0 };
        for _ in 0..steps {
            let axpy = |a: &[Vec<Complex64>], k: &[Vec<Complex64>], s: f64| -> Vec<Vec<Complex64>> {
                a.iter()
                    .zip(k)
                    .map(|(u, v)| u.iter().zip(v).map(|(p, q)| p + q * s).collect())
                    .collect()
            };
            let k1 = rhs(&state);
            let k2 = rhs(&axpy(&state, &k1, 0.5 * h));
            let k3 = rhs(&axpy(&state, &k2, 0.5 * h));
            let k4 = rhs(&axpy(&state, &k3, h));
            for (j, c) in state.iter_mut().enumerate() {
                for (node, v) in c.iter_mut().enumerate() {
                    *v += (k1[j][node] + 2.0 * k2[j][node] + 2.0 * k3[j][node] + k4[j][node]) * (h / 6.0);
                }
            }
            t += dir * h;
            let (tail, total) = filter(&mut state);
            if e0 > 0.0 {
                amp = amp.max((total / e0).sqrt());
            }
            let ratio = if total > 0.0 { tail / total } else { 0.0 };
            if ratio > TAIL_ABORT || !total.is_finite() {
                return Err(Error::BlowUpDetected { time: t, ratio });
            }
        }
        t = target;
        out.push(record(&state)?);
    }
    Ok(FlowResult {
        times: times.to_vec(),
        immersions: out,
        amplification: amp,
        scheme: Scheme::TimeStep,
        residual: None,
    })
}

/// Largest stable step for `x` on this grid at the given cutoff.
pub fn stable_step(im: &Immersion, x: &VectorFieldOnL, cutoff: f64) -> f64 {
    let rate = im
        .grid()
        .sizes()
        .iter()
        .zip(&x.components)
        .map(|(&n, c)| {
            let k = (cutoff * (n / 2) as f64).floor();
            k * c.iter().fold(0.0f64, |m, v| m.max(v.abs()))
        })
        .fold(0.0, f64::max);
    if rate > 0.0 {
        STEP_BOUND / rate
    } else {
        f64::INFINITY
    }
}

/// Uniform samples `0, t_final/records, ..., t_final`.
pub fn uniform_times(t_final: f64, records: usize) -> Vec<f64> {
    (0..=records)
        .map(|k| t_final * k as f64 / records as f64)
        .collect()
}

/// Time-stepped flow recorded at ten equal intervals up to `t_final`.
pub fn flow_timestep(
    im: &Immersion,
    x: &VectorFieldOnL,
    t_final: f64,
    dt: f64,
    cutoff: f64,
) -> Result<FlowResult> {
    flow_timestep_at(im, x, &uniform_times(t_final, 10), dt, cutoff)
}

/// First-derivative weights at `x0` for the nodes `xs` (Fornberg's recursion).
fn derivative_weights(xs: &[f64], x0: f64) -> Vec<f64> {
    let n = xs.len();
    // c[j][k]: weight of node j for the k-th derivative, k <= 1
    let mut c = vec![[0.0f64; 2]; n];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    for i in 1..n {
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                c[i][1] = c1 * (c[i - 1][0] - c5 * c[i - 1][1]) / c2;
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            c[j][1] = (c4 * c[j][1] - c[j][0]) / c3;
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.iter().map(|w| w[1]).collect()
}

/// Points in the time stencil for `∂_t`.
const TIME_STENCIL: usize = 7;

/// `max |∂_t(ι_* X) - X(J ι_* X)|` over the time samples, with `∂_t` from a
/// local polynomial fit (up to seven nearest samples) and `X(·)` spectral.
pub fn commutator_check(flow: &FlowResult, x: &VectorFieldOnL) -> Result<f64> {
    let k = flow.times.len();
    if k < 3 || flow.immersions.len() != k {
        return Err(Error::InvalidInput("need at least three time samples".into()));
    }
    if flow.times.windows(2).any(|w| !(w[1] != w[0])) {
        return Err(Error::InvalidInput("time samples must be distinct".into()));
    }
    let push: Vec<Vec<f64>> = flow.immersions.iter().map(|im| im.push_forward(x)).collect();
    let width = TIME_STENCIL.min(k);
    let mut worst = 0.0f64;
    for i in 0..k {
        let lo = i.saturating_sub(width / 2).min(k - width);
        let w = derivative_weights(&flow.times[lo..lo + width], flow.times[i]);
        let im = &flow.immersions[i];
        let d = im.real_dim();
        let dt: Vec<f64> = (0..push[i].len())
            .map(|a| (0..width).map(|j| w[j] * push[lo + j][a]).sum())
            .collect();
        let jx: Vec<f64> = push[i].chunks(d).flat_map(apply_j).collect();
        let mut xd = vec![0.0; jx.len()];
        for (kk, comp) in x.components.iter().enumerate() {
            let der = im.field_derivative(&jx, kk);
            for node in 0..im.grid().len() {
                for a in 0..d {
                    xd[node * d + a] += comp[node] * der[node * d + a];
                }
            }
        }
        for (u, v) in dt.iter().zip(&xd) {
            worst = worst.max((u - v).abs());
        }
    }
    Ok(worst)
}

/// Sup-norm gap between the spectral and time-stepped flows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniquenessReport {
    pub times: Vec<f64>,
    pub discrepancy: Vec<f64>,
    pub max_discrepancy: f64,
}

pub fn uniqueness_compare(im: &Immersion, x: &VectorFieldOnL, t_final: f64) -> Result<UniquenessReport> {
    let times = uniform_times(t_final, 10);
    let spec = flow_spectral(im, x, &times)?;
    let dt = 0.5 * stable_step(im, x, DEFAULT_CUTOFF);
    let ts = flow_timestep_at(im, x, &times, dt.min(0.01), DEFAULT_CUTOFF)?;
    let discrepancy: Vec<f64> = spec
        .immersions
        .iter()
        .zip(&ts.immersions)
        .map(|(a, b)| {
            a.points()
                .iter()
                .zip(b.points())
                .fold(0.0f64, |m, (p, q)| m.max((p - q).abs()))
        })
        .collect();
    Ok(UniquenessReport {
        max_discrepancy: discrepancy.iter().copied().fold(0.0, f64::max),
        times,
        discrepancy,
    })
}

/// Solution of the boundary value problem between two nested curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BvpResult {
    /// Modulus: `g` maps `{ρ < |z| < 1}` onto the region between the curves.
    pub rho: f64,
    /// `(n, Re c_n, Im c_n)` of `g(z) = Σ c_n z^n`.
    pub coeffs: Vec<(i64, f64, f64)>,
    /// Largest `|g(e^{iθ_j}) - γ0(α_j)|`.
    pub misfit_outer: f64,
    /// Largest `|g(ρ e^{iθ_j}) - γ1(β_j)|`.
    pub misfit_inner: f64,
    pub iterations: usize,
    /// Sum of squared residuals after each accepted step.
    pub history: Vec<f64>,
    pub converged: bool,
    /// `min |g'|` on a grid of the closed annulus.
    pub min_derivative: f64,
}

impl BvpResult {
    /// `g` as a curve (the restriction to `|z| = 1`), padded to truncation `n_max`.
    pub fn curve(&self, n_max: usize) -> Result<FourierCurve> {
        let terms: Vec<(i64, Complex64)> = self
            .coeffs
            .iter()
            .map(|&(n, re, im)| (n, Complex64::new(re, im)))
            .collect();
        FourierCurve::from_terms(n_max, &terms)
    }

    pub fn coeff(&self, n: i64) -> Complex64 {
        self.coeffs
            .iter()
            .find(|c| c.0 == n)
            .map_or(Complex64::new(0.0, 0.0), |c| Complex64::new(c.1, c.2))
    }
}

/// Residual target for the boundary misfit.
pub const BVP_TOL: f64 = 1e-8;

fn winding_about(poly: &[Complex64], p: Complex64) -> f64 {
    let m = poly.len();
    let mut total = 0.0;
    for j in 0..m {
        total += ((poly[(j + 1) % m] - p) / (poly[j] - p)).arg();
    }
    total / TAU
}

fn polygon_area(poly: &[Complex64]) -> f64 {
    let m = poly.len();
    0.5 * (0..m)
        .map(|j| {
            let (a, b) = (poly[j], poly[(j + 1) % m]);
            a.re * b.im - a.im * b.re
        })
        .sum::<f64>()
}

/// Nested-curve validation: both anticlockwise, `γ1` strictly inside `γ0`.
fn check_nested(g0: &FourierCurve, g1: &FourierCurve) -> Result<()> {
    g0.check_initial()?;
    g1.check_initial()?;
    let m = 1024;
    let p0 = g0.synthesize(m.max(g0.default_samples()));
    let p1 = g1.synthesize(m.max(g1.default_samples()));
    for (j, &p) in p1.iter().enumerate() {
        if winding_about(&p0, p).round() != 1.0 {
            return Err(Error::NotNested(format!(
                "inner sample {j} lies outside the outer curve"
            )));
        }
    }
    let gap = p1
        .iter()
        .map(|a| p0.iter().map(|b| (a - b).norm()).fold(f64::INFINITY, f64::min))
        .fold(f64::INFINITY, f64::min);
    if !(gap > 1e-9) {
        return Err(Error::NotNested("curves touch".into()));
    }
    Ok(())
}

struct BvpSetup<'a> {
    g0: &'a FourierCurve,
    g1: &'a FourierCurve,
    k: i64,
    m: usize,
}

impl BvpSetup<'_> {
    // unknowns: [Re c_n, Im c_n] for n = -K..K, ρ, α_1..α_{M-1}, β_0..β_{M-1}
    fn n_coef(&self) -> usize {
        2 * (2 * self.k as usize + 1)
    }
    fn n_unknowns(&self) -> usize {
        self.n_coef() + 1 + (self.m - 1) + self.m
    }
    fn theta(&self, j: usize) -> f64 {
        TAU * j as f64 / self.m as f64
    }
    fn g(&self, u: &[f64], z: Complex64) -> (Complex64, Complex64) {
        let mut v = Complex64::new(0.0, 0.0);
        let mut d = Complex64::new(0.0, 0.0);
        for (i, n) in (-self.k..=self.k).enumerate() {
            let c = Complex64::new(u[2 * i], u[2 * i + 1]);
            v += c * z.powi(n as i32);
            d += c * n as f64 * z.powi(n as i32 - 1);
        }
        (v, d)
    }
    fn alpha(&self, u: &[f64], j: usize) -> f64 {
        if j == 0 {
            0.0
        } else {
            u[self.n_coef() + j]
        }
    }
    fn beta(&self, u: &[f64], j: usize) -> f64 {
        u[self.n_coef() + self.m + j]
    }
    fn residual(&self, u: &[f64]) -> DVector<f64> {
        let rho = u[self.n_coef()];
        let mut r = DVector::zeros(4 * self.m);
        for j in 0..self.m {
            let z = Complex64::from_polar(1.0, self.theta(j));
            let a = self.g(u, z).0 - self.g0.eval(self.alpha(u, j));
            let b = self.g(u, z * rho).0 - self.g1.eval(self.beta(u, j));
            r[4 * j] = a.re;
            r[4 * j + 1] = a.im;
            r[4 * j + 2] = b.re;
            r[4 * j + 3] = b.im;
        }
        r
    }
    fn jacobian(&self, u: &[f64]) -> DMatrix<f64> {
        let rho = u[self.n_coef()];
        let nc = self.n_coef();
        let mut jm = DMatrix::zeros(4 * self.m, self.n_unknowns());
        for j in 0..self.m {
            let z = Complex64::from_polar(1.0, self.theta(j));
            let zi = z * rho;
            for (i, n) in (-self.k..=self.k).enumerate() {
                let p = z.powi(n as i32);
                let q = zi.powi(n as i32);
                let ip = Complex64::new(0.0, 1.0) * p;
                let iq = Complex64::new(0.0, 1.0) * q;
                jm[(4 * j, 2 * i)] = p.re;
                jm[(4 * j + 1, 2 * i)] = p.im;
                jm[(4 * j, 2 * i + 1)] = ip.re;
                jm[(4 * j + 1, 2 * i + 1)] = ip.im;
                jm[(4 * j + 2, 2 * i)] = q.re;
                jm[(4 * j + 3, 2 * i)] = q.im;
                jm[(4 * j + 2, 2 * i + 1)] = iq.re;
                jm[(4 * j + 3, 2 * i + 1)] = iq.im;
            }
            let dr = self.g(u, zi).1 * z;
            jm[(4 * j + 2, nc)] = dr.re;
            jm[(4 * j + 3, nc)] = dr.im;
            if j > 0 {
                let da = -self.g0.eval_derivative(self.alpha(u, j));
                jm[(4 * j, nc + j)] = da.re;
                jm[(4 * j + 1, nc + j)] = da.im;
            }
            let db = -self.g1.eval_derivative(self.beta(u, j));
            jm[(4 * j + 2, nc + self.m + j)] = db.re;
            jm[(4 * j + 3, nc + self.m + j)] = db.im;
        }
        jm
    }
    /// Coefficients by linear least squares for fixed `ρ` and angles.
    fn fit_coefficients(&self, u: &mut [f64]) {
        let nc = self.n_coef();
        let full = self.jacobian(u);
        let a = full.columns(0, nc).into_owned();
        let mut target = DVector::zeros(4 * self.m);
        for j in 0..self.m {
            let p = self.g0.eval(self.alpha(u, j));
            let q = self.g1.eval(self.beta(u, j));
            target[4 * j] = p.re;
            target[4 * j + 1] = p.im;
            target[4 * j + 2] = q.re;
            target[4 * j + 3] = q.im;
        }
        if let Ok(sol) = a.svd(true, true).solve(&target, 1e-14) {
            u[..nc].copy_from_slice(sol.as_slice());
        }
    }
}

/// Damped Gauss–Newton for the annulus map; returns the best iterate even
/// when the tolerance is not reached.
pub fn solve_bvp_annulus_unchecked(
    g0: &FourierCurve,
    g1: &FourierCurve,
    k: usize,
    max_iter: usize,
) -> Result<BvpResult> {
    check_nested(g0, g1)?;
    if k == 0 || k > 64 {
        return Err(Error::InvalidInput("Laurent truncation must be in 1..=64".into()));
    }
    let m = (4 * (2 * k + 1)).next_power_of_two().max(32);
    let setup = BvpSetup {
        g0,
        g1,
        k: k as i64,
        m,
    };
    let a0 = polygon_area(&g0.synthesize(1024.max(g0.default_samples())));
    let a1 = polygon_area(&g1.synthesize(1024.max(g1.default_samples())));
    let mut u = vec![0.0; setup.n_unknowns()];
    let nc = setup.n_coef();
    u[nc] = (a1 / a0).sqrt();
    for j in 1..m {
        u[nc + j] = setup.theta(j);
    }
    for j in 0..m {
        u[nc + m + j] = setup.theta(j);
    }
    setup.fit_coefficients(&mut u);

    let mut r = setup.residual(&u);
    let mut cost = r.norm_squared();
    let mut history = vec![cost];
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let misfit = |r: &DVector<f64>| -> (f64, f64) {
        let mut o = 0.0f64;
        let mut i = 0.0f64;
        for j in 0..m {
            o = o.max(Complex64::new(r[4 * j], r[4 * j + 1]).norm());
            i = i.max(Complex64::new(r[4 * j + 2], r[4 * j + 3]).norm());
        }
        (o, i)
    };
    while iterations < max_iter {
        let (o, i) = misfit(&r);
        if o.max(i) < 0.01 * BVP_TOL {
            break;
        }
        iterations += 1;
        let jm = setup.jacobian(&u);
        let jt = jm.transpose();
        let jtj = &jt * &jm;
        let grad = &jt * &r;
        let mut accepted = false;
        for _ in 0..30 {
            let mut a = jtj.clone();
            for d in 0..a.nrows() {
                a[(d, d)] += lambda * jtj[(d, d)].max(1e-12);
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&(-&grad))) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = u.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let rho = trial[nc];
            if !(rho > 0.0 && rho < 1.0) {
                lambda *= 4.0;
                continue;
            }
            let rt = setup.residual(&trial);
            let ct = rt.norm_squared();
            if ct < cost {
                u = trial;
                r = rt;
                cost = ct;
                history.push(cost);
                lambda = (lambda / 3.0).max(1e-15);
                accepted = true;
                break;
            }
            lambda *= 4.0;
        }
        if !accepted {
            break;
        }
    }
    let (o, i) = misfit(&r);
    let rho = u[nc];
    let mut min_derivative = f64::INFINITY;
    for a in 0..16 {
        let rad = rho + (1.0 - rho) * a as f64 / 15.0;
        for b in 0..64 {
            let z = Complex64::from_polar(rad, TAU * b as f64 / 64.0);
            min_derivative = min_derivative.min(setup.g(&u, z).1.norm());
        }
    }
    Ok(BvpResult {
        rho,
        coeffs: (-setup.k..=setup.k)
            .enumerate()
            .map(|(i, n)| (n, u[2 * i], u[2 * i + 1]))
            .collect(),
        misfit_outer: o,
        misfit_inner: i,
        iterations,
        history,
        converged: o.max(i) < BVP_TOL,
        min_derivative,
    })
}

/// `solve_bvp_annulus_unchecked` that fails with `NoConvergence` above tolerance.
pub fn solve_bvp_annulus(g0: &FourierCurve, g1: &FourierCurve, k: usize, max_iter: usize) -> Result<BvpResult> {
    let res = solve_bvp_annulus_unchecked(g0, g1, k, max_iter)?;
    if !res.converged {
        return Err(Error::NoConvergence {
            iterations: res.iterations,
            residual: res.misfit_outer.max(res.misfit_inner),
        });
    }
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ambient::AmbientChart;
    use crate::immersion::{Formula, GridTorus};

    fn circle(n: usize) -> Immersion {
        Immersion::from_formula(
            &GridTorus::circle(n).unwrap(),
            &AmbientChart::flat(1),
            &Formula::Circle {
                radius: 1.0,
                center: [0.0, 0.0],
            },
        )
        .unwrap()
    }

    #[test]
    fn spectral_circle_shrinks_exponentially() {
        let im = circle(64);
        let x = VectorFieldOnL::coordinate(im.grid(), 0, 1.0);
        let f = flow_spectral(&im, &x, &[0.5]).unwrap();
        let r = (-0.5f64).exp();
        for node in 0..64 {
            let th = im.grid().angles(node)[0];
            let p = f.immersions[0].point(node);
            assert!((p[0] - r * th.cos()).abs() < 1e-13 && (p[1] - r * th.sin()).abs() < 1e-13);
        }
        assert!(f.residual.unwrap() < 1e-12);
    }

    #[test]
    fn derivative_weights_are_exact_on_polynomials() {
        let xs = [0.0, 0.1, 0.25, 0.3, 0.5];
        let w = derivative_weights(&xs, 0.1);
        let d: f64 = xs.iter().zip(&w).map(|(x, w)| w * x.powi(4)).sum();
        assert!((d - 4.0 * 0.1f64.powi(3)).abs() < 1e-12);
    }

    #[test]
    fn step_bound_is_enforced() {
        let im = circle(64);
        let x = VectorFieldOnL::coordinate(im.grid(), 0, 1.0);
        assert!(matches!(
            flow_timestep(&im, &x, 0.1, 0.1, DEFAULT_CUTOFF),
            Err(Error::StepTooLarge { .. })
        ));
    }

    #[test]
    fn non_flat_charts_have_no_spectral_flow() {
        let im = Immersion::from_formula(
            &GridTorus::circle(32).unwrap(),
            &AmbientChart::poincare_disk(),
            &Formula::Circle {
                radius: 0.5,
                center: [0.0, 0.0],
            },
        )
        .unwrap();
        let x = VectorFieldOnL::coordinate(im.grid(), 0, 1.0);
        assert!(matches!(
            flow_spectral(&im, &x, &[0.1]),
            Err(Error::UnsupportedField(_))
        ));
    }
}
