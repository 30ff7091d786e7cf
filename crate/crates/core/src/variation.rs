//! Finite-difference oracles for the variations of the J-volume.
//!
//! Every report pairs an analytic integral (mean curvature, divergence and
//! Ricci terms) with Richardson-extrapolated differences of `Vol_J` along an
//! explicit family of immersions.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::ambient::apply_j;
use crate::curve_lab::{richardson_h2, second_differences};
use crate::error::{Error, Result};
use crate::geodesic_flow::{self, FlowResult, DEFAULT_CUTOFF};
use crate::immersion::{Immersion, VectorFieldOnL};
use crate::spectral;

/// Difference steps, coarse to fine.
pub const FD_STEPS: [f64; 3] = [1e-2, 5e-3, 2.5e-3];
pub const FIRST_VARIATION_TOL: f64 = 1e-4;
pub const DENSITY_TOL: f64 = 1e-4;
pub const SECOND_VARIATION_TOL: f64 = 1e-3;
/// Smallest acceptable observed convergence order.
pub const MIN_ORDER: f64 = 1.8;
/// Differences between successive estimates below this fraction of the scale
/// are roundoff; the order is then not measurable.
const ROUNDOFF_FRACTION: f64 = 1e-9;

/// Analytic value against its finite-difference oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationReport {
    pub analytic: f64,
    pub fd: f64,
    pub abs_err: f64,
    /// `abs_err` over `|analytic|`, or over `Vol_J` when the analytic value is
    /// negligible against it.
    pub rel_err: f64,
    /// `log2` of the ratio of successive estimate differences.
    pub richardson_order: Option<f64>,
    /// The estimates agree to roundoff, so no order can be observed.
    pub exact_at_roundoff: bool,
    pub context: String,
}

impl VariationReport {
    fn new(analytic: f64, est: &FdEstimate, vol_j: f64, context: String) -> Self {
        let abs_err = (analytic - est.value).abs();
        let denom = if analytic.abs() > 1e-6 * vol_j {
            analytic.abs()
        } else {
            vol_j.max(f64::MIN_POSITIVE)
        };
        Self {
            analytic,
            fd: est.value,
            abs_err,
            rel_err: abs_err / denom,
            richardson_order: est.order,
            exact_at_roundoff: est.at_roundoff,
            context,
        }
    }

    pub fn order_ok(&self) -> bool {
        self.exact_at_roundoff || self.richardson_order.is_some_and(|p| p >= MIN_ORDER)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.rel_err <= tol && self.order_ok()
    }
}

/// Richardson-extrapolated difference quotient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdEstimate {
    pub value: f64,
    /// Raw quotients at each step.
    pub raw: Vec<f64>,
    pub order: Option<f64>,
    pub at_roundoff: bool,
}

fn extrapolate(raw: Vec<f64>, scale: f64) -> FdEstimate {
    let value = richardson_h2(&raw);
    let (order, at_roundoff) = if raw.len() >= 3 {
        let k = raw.len();
        let d1 = (raw[k - 3] - raw[k - 2]).abs();
        let d2 = (raw[k - 2] - raw[k - 1]).abs();
        let floor = ROUNDOFF_FRACTION * scale.abs().max(f64::MIN_POSITIVE);
        if d1 <= floor {
            (None, true)
        } else {
            (Some((d1 / d2.max(f64::MIN_POSITIVE)).log2()), false)
        }
    } else {
        (None, false)
    };
    FdEstimate {
        value,
        raw,
        order,
        at_roundoff,
    }
}

fn check_steps(steps: &[f64]) -> Result<()> {
    if steps.is_empty() || steps.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::InvalidInput("difference steps must be positive".into()));
    }
    for w in steps.windows(2) {
        if ((w[0] / w[1]) - 2.0).abs() > 1e-12 {
            return Err(Error::InvalidInput("difference steps must halve".into()));
        }
    }
    Ok(())
}

fn vol_j(im: &Immersion) -> Result<f64> {
    Ok(im.total_volumes()?.vol_j)
}

/// `d/dt Vol_J[ι + tZ]` at 0, with the per-node density derivative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirstVariationFd {
    pub derivative: FdEstimate,
    pub density_derivative: Vec<f64>,
}

pub fn fd_first_variation(im: &Immersion, z: &[f64], steps: &[f64]) -> Result<FirstVariationFd> {
    check_steps(steps)?;
    if z.len() != im.points().len() {
        return Err(Error::InvalidInput("deformation field has the wrong length".into()));
    }
    let v0 = vol_j(im)?;
    let mut totals = Vec::with_capacity(steps.len());
    let mut nodal: Vec<Vec<f64>> = Vec::with_capacity(steps.len());
    for &e in steps {
        let p = im.deformed(z, e)?.densities()?.volj_density;
        let q = im.deformed(z, -e)?.densities()?.volj_density;
        let diff: Vec<f64> = p.iter().zip(&q).map(|(a, b)| (a - b) / (2.0 * e)).collect();
        totals.push(im.integrate(&diff));
        nodal.push(diff);
    }
    let density_derivative = (0..im.grid().len())
        .map(|node| richardson_h2(&nodal.iter().map(|d| d[node]).collect::<Vec<_>>()))
        .collect();
    Ok(FirstVariationFd {
        derivative: extrapolate(totals, v0),
        density_derivative,
    })
}

fn sign_guard(report: VariationReport, tol: f64) -> Result<VariationReport> {
    if report.rel_err > tol {
        let flipped = (report.analytic + report.fd).abs();
        if flipped <= tol * report.analytic.abs() && report.analytic.abs() > 0.0 {
            return Err(Error::SignConventionMismatch {
                analytic: report.analytic,
                fd: report.fd,
            });
        }
    }
    Ok(report)
}

/// First variation along `Z = J ι_* Y`: `-∮ ḡ(JY, H_J) vol_J` against the
/// difference quotient of `Vol_J[ι + tZ]`.
pub fn check_first_variation(im: &Immersion, y: &VectorFieldOnL) -> Result<VariationReport> {
    let d = im.real_dim();
    let h = im.h_j_field()?;
    let jy = im.j_push_forward(y);
    let dens = im.densities()?;
    let integrand: Vec<f64> = (0..im.grid().len())
        .map(|node| im.inner(node, &jy[node * d..(node + 1) * d], h.at(node)) * dens.volj_density[node])
        .collect();
    let analytic = -im.integrate(&integrand);
    let fd = fd_first_variation(im, &jy, &FD_STEPS)?;
    let v = im.integrate(&dens.volj_density);
    sign_guard(
        VariationReport::new(analytic, &fd.derivative, v, "first variation along J ι_* Y".into()),
        FIRST_VARIATION_TOL,
    )
}

/// `Σ_k ∂_k(X^k u)` on the grid; with `u` a density this is the divergence
/// term `Div(u X / √g) vol_g` in coordinates.
pub fn density_divergence(im: &Immersion, x: &VectorFieldOnL, u: &[f64]) -> Vec<f64> {
    let sizes = im.grid().sizes();
    let mut out = vec![0.0; u.len()];
    for (k, comp) in x.components.iter().enumerate() {
        let flux: Vec<f64> = comp.iter().zip(u).map(|(a, b)| a * b).collect();
        let dk = spectral::grid_derivative(&flux, sizes, k);
        out.iter_mut().zip(&dk).for_each(|(o, v)| *o += v);
    }
    out
}

/// Substeps of the integral curves in [`tangential_flow`].
const TANGENTIAL_SUBSTEPS: usize = 8;

/// `ι ∘ φ_t` for the flow `φ_t` of `X` on the torus.
pub fn tangential_flow(im: &Immersion, x: &VectorFieldOnL, t: f64) -> Result<Immersion> {
    let grid = im.grid();
    if let Some((k, c)) = x.as_coordinate() {
        let mut shift = vec![0.0; grid.dim()];
        shift[k] = c * t;
        return im.shifted(&shift);
    }
    let comps: Vec<Vec<Complex64>> = x
        .components
        .iter()
        .map(|c| c.iter().map(|&v| Complex64::new(v, 0.0)).collect())
        .collect();
    let field = |p: &[Vec<f64>]| -> Vec<Vec<f64>> {
        let vals: Vec<Vec<Complex64>> = comps
            .iter()
            .map(|c| spectral::interpolate_grid(c, grid.sizes(), p))
            .collect();
        (0..p.len())
            .map(|j| vals.iter().map(|v| v[j].re).collect())
            .collect()
    };
    let axpy = |a: &[Vec<f64>], k: &[Vec<f64>], s: f64| -> Vec<Vec<f64>> {
        a.iter()
            .zip(k)
            .map(|(p, v)| p.iter().zip(v).map(|(x, y)| x + s * y).collect())
            .collect()
    };
    let mut phi: Vec<Vec<f64>> = (0..grid.len()).map(|j| grid.angles(j)).collect();
    let h = t / TANGENTIAL_SUBSTEPS as f64;
    for _ in 0..TANGENTIAL_SUBSTEPS {
        let k1 = field(&phi);
        let k2 = field(&axpy(&phi, &k1, 0.5 * h));
        let k3 = field(&axpy(&phi, &k2, 0.5 * h));
        let k4 = field(&axpy(&phi, &k3, h));
        for j in 0..phi.len() {
            for a in 0..phi[j].len() {
                phi[j][a] += h / 6.0 * (k1[j][a] + 2.0 * k2[j][a] + 2.0 * k3[j][a] + k4[j][a]);
            }
        }
    }
    im.composed(&phi)
}

/// Pointwise check of the tangential derivatives of the J-volume density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityReport {
    /// Worst node for `∂_t vol_J = Div(ρ_J X) vol_g`.
    pub first: VariationReport,
    /// Worst node for `∂_t² vol_J = Div(X Div(ρ_J X)) vol_g`.
    pub second: VariationReport,
    pub first_analytic: Vec<f64>,
    pub first_fd: Vec<f64>,
    pub second_analytic: Vec<f64>,
    pub second_fd: Vec<f64>,
    /// `∮ Div(X Div(ρ_J X)) vol_g`, zero by Stokes.
    pub second_integral: f64,
}

fn nodal_report(analytic: &[f64], fd: &[f64], est: &[FdEstimate], scale: f64, context: &str) -> VariationReport {
    let worst = (0..analytic.len())
        .max_by(|&a, &b| {
            (analytic[a] - fd[a])
                .abs()
                .total_cmp(&(analytic[b] - fd[b]).abs())
        })
        .unwrap_or(0);
    let abs_err = (analytic[worst] - fd[worst]).abs();
    // orders are judged on the node with the largest signal
    let loudest = (0..analytic.len())
        .max_by(|&a, &b| analytic[a].abs().total_cmp(&analytic[b].abs()))
        .unwrap_or(0);
    let e = &est[loudest];
    VariationReport {
        analytic: analytic[worst],
        fd: fd[worst],
        abs_err,
        rel_err: abs_err / scale.max(f64::MIN_POSITIVE),
        richardson_order: e.order,
        exact_at_roundoff: e.at_roundoff,
        context: context.into(),
    }
}

/// First and second `t`-derivatives of the density of `ι ∘ φ_t(X)` against
/// their divergence expressions. Errors are relative to the largest of the
/// analytic field and the density itself.
pub fn check_density_divergence(im: &Immersion, x: &VectorFieldOnL) -> Result<DensityReport> {
    if x.grid != *im.grid() {
        return Err(Error::InvalidInput("field and immersion grids differ".into()));
    }
    let d0 = im.densities()?.volj_density;
    let first_analytic = density_divergence(im, x, &d0);
    let second_analytic = density_divergence(im, x, &first_analytic);
    let nodes = im.grid().len();
    let mut first_raw = vec![Vec::new(); nodes];
    let mut second_raw = vec![Vec::new(); nodes];
    for &e in &FD_STEPS {
        let p = tangential_flow(im, x, e)?.densities()?.volj_density;
        let q = tangential_flow(im, x, -e)?.densities()?.volj_density;
        for node in 0..nodes {
            first_raw[node].push((p[node] - q[node]) / (2.0 * e));
            second_raw[node].push((p[node] - 2.0 * d0[node] + q[node]) / (e * e));
        }
    }
    let dmax = d0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let first_est: Vec<FdEstimate> = first_raw.into_iter().map(|r| extrapolate(r, dmax)).collect();
    let second_est: Vec<FdEstimate> = second_raw.into_iter().map(|r| extrapolate(r, dmax)).collect();
    let first_fd: Vec<f64> = first_est.iter().map(|e| e.value).collect();
    let second_fd: Vec<f64> = second_est.iter().map(|e| e.value).collect();
    let amax = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    Ok(DensityReport {
        first: nodal_report(
            &first_analytic,
            &first_fd,
            &first_est,
            amax(&first_analytic).max(dmax),
            "first tangential derivative of the density",
        ),
        second: nodal_report(
            &second_analytic,
            &second_fd,
            &second_est,
            amax(&second_analytic).max(dmax),
            "second tangential derivative of the density",
        ),
        second_integral: im.integrate(&second_analytic),
        first_analytic,
        first_fd,
        second_analytic,
        second_fd,
    })
}

/// Integrand of the second variation along a geodesic, per node:
/// `((Div ρ_J Y)/ρ_J)² + ḡ(JY, H_J)² - Ric(Y, Y)`, times the density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondVariationTerms {
    pub divergence: Vec<f64>,
    pub mean_curvature: Vec<f64>,
    pub ricci: Vec<f64>,
    pub volj_density: Vec<f64>,
}

impl SecondVariationTerms {
    pub fn integrand(&self) -> Vec<f64> {
        (0..self.volj_density.len())
            .map(|j| (self.divergence[j] + self.mean_curvature[j] - self.ricci[j]) * self.volj_density[j])
            .collect()
    }
}

pub fn second_variation_terms(im: &Immersion, y: &VectorFieldOnL) -> Result<SecondVariationTerms> {
    let d = im.real_dim();
    let dens = im.densities()?;
    let h = im.h_j_field()?;
    let yv = im.push_forward(y);
    let jy = im.j_push_forward(y);
    // Div(ρ_J Y)/ρ_J = Σ ∂_k(Y^k ρ_J √g) / (ρ_J √g)
    let div = density_divergence(im, y, &dens.volj_density);
    let nodes = im.grid().len();
    let mut divergence = Vec::with_capacity(nodes);
    let mut mean_curvature = Vec::with_capacity(nodes);
    let mut ricci = Vec::with_capacity(nodes);
    for node in 0..nodes {
        divergence.push((div[node] / dens.volj_density[node]).powi(2));
        let v = &yv[node * d..(node + 1) * d];
        mean_curvature.push(im.inner(node, &jy[node * d..(node + 1) * d], h.at(node)).powi(2));
        let ric = im.chart().ricci_at(im.point(node))?;
        let rv = &ric * nalgebra::DVector::from_column_slice(v);
        ricci.push(v.iter().zip(rv.iter()).map(|(a, b)| a * b).sum());
    }
    Ok(SecondVariationTerms {
        divergence,
        mean_curvature,
        ricci,
        volj_density: dens.volj_density,
    })
}

/// Geodesic through `im` in the direction `J ι_* Y`, sampled at `times`
/// (any signs): spectral continuation on flat charts when available,
/// time stepping otherwise.
pub fn geodesic_family(im: &Immersion, y: &VectorFieldOnL, times: &[f64]) -> Result<Vec<Immersion>> {
    let unavailable = |e: Error| match e {
        Error::AmplificationExceeded { .. }
        | Error::BlowUpDetected { .. }
        | Error::UnsupportedField(_)
        | Error::StepTooLarge { .. } => Error::GeodesicUnavailable(e.to_string()),
        other => other,
    };
    if im.chart().is_flat() {
        match geodesic_flow::flow_spectral(im, y, times) {
            Ok(f) => return Ok(f.immersions),
            Err(Error::UnsupportedField(_)) => {}
            Err(e) => return Err(unavailable(e)),
        }
    }
    let small = times.iter().fold(f64::INFINITY, |m, t| if *t != 0.0 { m.min(t.abs()) } else { m });
    let dt = (0.25 * geodesic_flow::stable_step(im, y, DEFAULT_CUTOFF)).min(small / 16.0).min(0.01);
    let run = |ts: Vec<f64>| -> Result<FlowResult> {
        geodesic_flow::flow_timestep_at(im, y, &ts, dt, DEFAULT_CUTOFF).map_err(unavailable)
    };
    let mut out: Vec<Option<Immersion>> = vec![None; times.len()];
    for sign in [1.0, -1.0] {
        let mut idx: Vec<usize> = (0..times.len()).filter(|&i| sign * times[i] > 0.0).collect();
        idx.sort_by(|&a, &b| times[a].abs().total_cmp(&times[b].abs()));
        if idx.is_empty() {
            continue;
        }
        let f = run(idx.iter().map(|&i| times[i]).collect())?;
        for (i, imt) in idx.into_iter().zip(f.immersions) {
            out[i] = Some(imt);
        }
    }
    Ok(out
        .into_iter()
        .map(|o| o.unwrap_or_else(|| im.clone()))
        .collect())
}

/// Second variation in a Kähler chart along the geodesic generated by `Y`.
pub fn check_second_variation_kahler(im: &Immersion, y: &VectorFieldOnL) -> Result<VariationReport> {
    let terms = second_variation_terms(im, y)?;
    let analytic = im.integrate(&terms.integrand());
    let v0 = im.integrate(&terms.volj_density);
    let times: Vec<f64> = FD_STEPS.iter().flat_map(|&e| [e, -e]).collect();
    let fam = geodesic_family(im, y, &times)?;
    let vols: Vec<f64> = fam.iter().map(vol_j).collect::<Result<_>>()?;
    let raw: Vec<f64> = FD_STEPS
        .iter()
        .enumerate()
        .map(|(i, &e)| (vols[2 * i] - 2.0 * v0 + vols[2 * i + 1]) / (e * e))
        .collect();
    let est = extrapolate(raw, v0);
    sign_guard(
        VariationReport::new(analytic, &est, v0, "second variation along the geodesic of J ι_* Y".into()),
        SECOND_VARIATION_TOL,
    )
}

/// Mixed second variation of `Vol_J[ι + sW + tZ]` in a flat chart, where the
/// curvature and torsion terms vanish and `∇_W Z = 0` for the linear family.
pub fn check_mixed_second_variation(im: &Immersion, w: &[f64], z: &[f64]) -> Result<VariationReport> {
    if !im.chart().is_flat() {
        return Err(Error::UnsupportedField(
            "the mixed second variation is only assembled in flat charts".into(),
        ));
    }
    let len = im.points().len();
    if w.len() != len || z.len() != len {
        return Err(Error::InvalidInput("deformation fields have the wrong length".into()));
    }
    let d = im.real_dim();
    let n = im.grid().dim();
    let dens = im.densities()?;
    let dw: Vec<Vec<f64>> = (0..n).map(|k| im.field_derivative(w, k)).collect();
    let dz: Vec<Vec<f64>> = (0..n).map(|k| im.field_derivative(z, k)).collect();
    let mut integrand = Vec::with_capacity(im.grid().len());
    for node in 0..im.grid().len() {
        let fr = im.tangent_frame(node)?;
        let pr = im.projections_at(node)?;
        let e = &fr.orthonormal;
        // ∇_{e_i} of a field, projected onto TL (optionally after J)
        let along = |dv: &[Vec<f64>], i: usize, with_j: bool| -> Vec<f64> {
            let mut v = vec![0.0; d];
            for k in 0..n {
                let c = fr.coeffs[(i, k)];
                for a in 0..d {
                    v[a] += c * dv[k][node * d + a];
                }
            }
            if with_j {
                v = apply_j(&v);
            }
            (&pr.pi_l * nalgebra::DVector::from_vec(v)).iter().copied().collect()
        };
        let g = |u: &[f64], v: &[f64]| im.inner(node, u, v);
        let mw: Vec<Vec<f64>> = (0..n).map(|i| along(&dw, i, false)).collect();
        let mz: Vec<Vec<f64>> = (0..n).map(|i| along(&dz, i, false)).collect();
        let jw: Vec<Vec<f64>> = (0..n).map(|i| along(&dw, i, true)).collect();
        let jz: Vec<Vec<f64>> = (0..n).map(|i| along(&dz, i, true)).collect();
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += g(&jw[i], &e[j]) * g(&jz[j], &e[i]);
                s -= g(&mw[i], &e[j]) * g(&mz[j], &e[i]);
            }
        }
        let tw: f64 = (0..n).map(|i| g(&mw[i], &e[i])).sum();
        let tz: f64 = (0..n).map(|i| g(&mz[i], &e[i])).sum();
        s += tw * tz;
        integrand.push(s * dens.volj_density[node]);
    }
    let analytic = im.integrate(&integrand);
    let v0 = im.integrate(&dens.volj_density);
    let mut raw = Vec::with_capacity(FD_STEPS.len());
    for &e in &FD_STEPS {
        let at = |s: f64, t: f64| -> Result<f64> {
            let pts = im
                .points()
                .iter()
                .zip(w.iter().zip(z))
                .map(|(p, (a, b))| p + s * a + t * b)
                .collect();
            vol_j(&im.with_points(pts)?)
        };
        raw.push((at(e, e)? - at(e, -e)? - at(-e, e)? + at(-e, -e)?) / (4.0 * e * e));
    }
    Ok(VariationReport::new(
        analytic,
        &extrapolate(raw, v0),
        v0,
        "mixed second variation of the linear family ι + sW + tZ".into(),
    ))
}

/// `Vol_J` along a geodesic family with its second differences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexityProfile {
    pub t: Vec<f64>,
    pub vol_j: Vec<f64>,
    /// Undivided second differences; `NaN` at the ends.
    pub d2: Vec<f64>,
    pub min_d2: f64,
    /// No second difference below `-CONVEXITY_TOL · max Vol_J`.
    pub convex: bool,
    /// Every second difference above `CONVEXITY_TOL · max Vol_J`.
    pub strictly_convex: bool,
}

pub const CONVEXITY_TOL: f64 = 1e-9;

/// Samples `Vol_J` along the geodesic of `J ι_* X` at `times` (relative to
/// `im`, starting at 0 and increasing).
pub fn convexity_experiment(im: &Immersion, x: &VectorFieldOnL, times: &[f64]) -> Result<ConvexityProfile> {
    if times.len() < 3 {
        return Err(Error::InvalidInput("need at least three times".into()));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) || times[0] < 0.0 {
        return Err(Error::InvalidInput("times must increase from a non-negative start".into()));
    }
    let fam = geodesic_family(im, x, times)?;
    let vols: Vec<f64> = fam.iter().map(vol_j).collect::<Result<_>>()?;
    let d2 = second_differences(times, &vols);
    let min_d2 = d2.iter().filter(|v| v.is_finite()).fold(f64::INFINITY, |m, &v| m.min(v));
    let scale = vols.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(ConvexityProfile {
        t: times.to_vec(),
        convex: min_d2 >= -CONVEXITY_TOL * scale,
        strictly_convex: min_d2 > CONVEXITY_TOL * scale,
        d2,
        min_d2,
        vol_j: vols,
    })
}

/// Classical mean curvature `g^{kl} π_⊥(∂_k ∂_l ι + Γ(∂_k ι, ∂_l ι))`, node-major.
pub fn classical_mean_curvature(im: &Immersion) -> Result<Vec<f64>> {
    let d = im.real_dim();
    let n = im.grid().dim();
    let nodes = im.grid().len();
    let tangents: Vec<Vec<f64>> = (0..n)
        .map(|k| (0..nodes).flat_map(|j| im.tangent(k, j).to_vec()).collect())
        .collect();
    let second: Vec<Vec<Vec<f64>>> = (0..n)
        .map(|k| (0..n).map(|l| im.field_derivative(&tangents[k], l)).collect())
        .collect();
    let mut out = vec![0.0; nodes * d];
    for node in 0..nodes {
        let chr = im.chart().christoffels_at(im.point(node))?;
        let pr = im.projections_at(node)?;
        let gram = DMatrix::from_fn(n, n, |k, l| im.inner(node, im.tangent(k, node), im.tangent(l, node)));
        let ginv = gram.try_inverse().ok_or(Error::DegenerateFrame { node })?;
        let mut acc = vec![0.0; d];
        for k in 0..n {
            for l in 0..n {
                let gamma = chr.contract(im.tangent(k, node), im.tangent(l, node));
                for a in 0..d {
                    acc[a] += ginv[(k, l)] * (second[k][l][node * d + a] + gamma[a]);
                }
            }
        }
        let h = &pr.pi_perp * nalgebra::DVector::from_vec(acc);
        out[node * d..(node + 1) * d].copy_from_slice(h.as_slice());
    }
    Ok(out)
}

/// Second variation at a critical configuration for several directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub max_h_j: f64,
    pub max_classical_h: f64,
    pub lagrangian_defect: f64,
    pub reports: Vec<VariationReport>,
    /// Every finite-difference second variation is `>= -1e-6 Vol_J`.
    pub stable: bool,
}

pub fn stability_check(im: &Immersion, fields: &[VectorFieldOnL]) -> Result<StabilityReport> {
    let sup = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let max_h_j = sup(&im.h_j_field()?.values);
    let max_classical_h = sup(&classical_mean_curvature(im)?);
    let v0 = vol_j(im)?;
    let reports: Vec<VariationReport> = fields
        .iter()
        .map(|y| check_second_variation_kahler(im, y))
        .collect::<Result<_>>()?;
    Ok(StabilityReport {
        max_h_j,
        max_classical_h,
        lagrangian_defect: im.lagrangian_defect()?,
        stable: reports.iter().all(|r| r.fd >= -1e-6 * v0),
        reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extrapolation_recovers_quadratic_error() {
        let raw: Vec<f64> = FD_STEPS.iter().map(|h| 3.0 + 0.7 * h * h + 0.2 * h.powi(4)).collect();
        let e = extrapolate(raw, 3.0);
        assert!((e.value - 3.0).abs() < 1e-13);
        assert!((e.order.unwrap() - 2.0).abs() < 0.01);
    }

    #[test]
    fn roundoff_level_differences_have_no_order() {
        let e = extrapolate(vec![1.0, 1.0 + 1e-15, 1.0], 1.0);
        assert!(e.at_roundoff && e.order.is_none());
    }

    #[test]
    fn steps_must_halve() {
        assert!(check_steps(&[1e-2, 4e-3]).is_err());
        assert!(check_steps(&FD_STEPS).is_ok());
    }
}
