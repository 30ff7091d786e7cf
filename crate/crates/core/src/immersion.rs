//! Sampled totally real immersions of `T^1` and `T^2`.
//!
//! Points are stored node-major: node `k` occupies `points[k*2n .. (k+1)*2n]`,
//! and on a 2-torus node `(i, j)` is `i * N2 + j` with `θ1 = 2πi/N1`.
//! An optional integer lift `W` (a `2n × n` matrix) describes tori that wind
//! around a flat quotient: the stored point is `W θ + p(θ)` with `p` periodic.

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ambient::{apply_j, AmbientChart};
use crate::error::{Error, Result};
use crate::spectral;

/// Immersions with `ρ_J` at or below this value count as partially complex.
pub const RHO_MIN: f64 = 1e-6;

/// Periodic sample grid on `T^n`, `n ∈ {1, 2}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridTorus {
    sizes: Vec<usize>,
}

impl GridTorus {
    pub fn new(sizes: &[usize]) -> Result<Self> {
        if sizes.is_empty() || sizes.len() > 2 {
            return Err(Error::InvalidInput(format!(
                "grid must be 1- or 2-dimensional, got {} sizes",
                sizes.len()
            )));
        }
        for &s in sizes {
            if s < 16 || !s.is_power_of_two() {
                return Err(Error::InvalidInput(format!(
                    "grid size {s} must be a power of two >= 16"
                )));
            }
        }
        Ok(Self {
            sizes: sizes.to_vec(),
        })
    }

    pub fn circle(n: usize) -> Result<Self> {
        Self::new(&[n])
    }

    pub fn torus(n1: usize, n2: usize) -> Result<Self> {
        Self::new(&[n1, n2])
    }

    pub fn dim(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn len(&self) -> usize {
        self.sizes.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_area(&self) -> f64 {
        self.sizes.iter().map(|&s| TAU / s as f64).product()
    }

    /// Angles `θ` of a node.
    pub fn angles(&self, node: usize) -> Vec<f64> {
        match self.sizes.len() {
            1 => vec![TAU * node as f64 / self.sizes[0] as f64],
            _ => {
                let (n1, n2) = (self.sizes[0], self.sizes[1]);
                vec![
                    TAU * (node / n2) as f64 / n1 as f64,
                    TAU * (node % n2) as f64 / n2 as f64,
                ]
            }
        }
    }
}

/// Built-in parametric families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Formula {
    /// `center + r e^{iθ}` in `C`.
    Circle {
        radius: f64,
        #[serde(default)]
        center: [f64; 2],
    },
    /// `a cos θ + i b sin θ` in `C`.
    Ellipse {
        a: f64,
        b: f64,
        #[serde(default)]
        center: [f64; 2],
    },
    /// `Σ a_n e^{inθ}` from `[n, re, im]` triples.
    FourierCurve { coeffs: Vec<(i64, f64, f64)> },
    /// `(r1 e^{iθ1}, r2 e^{iθ2})` in `C^2`.
    ProductTorus { r1: f64, r2: f64 },
    /// `(r1 e^{iθ1}, (r2 + a cos(m1 θ1 + m2 θ2)) e^{iθ2})`.
    GraphPerturbedTorus {
        r1: f64,
        r2: f64,
        amplitude: f64,
        mode: [i64; 2],
    },
    /// Linear torus `(period/2π) W θ + offset` for a flat quotient; `W` is
    /// integer, `2n × n`, listed row by row.
    StraightTorus {
        winding: Vec<Vec<i64>>,
        #[serde(default)]
        offset: Vec<f64>,
    },
}

/// Orthonormalized tangent frame at a node.
#[derive(Debug, Clone)]
pub struct TangentFrame {
    /// Coordinate derivatives `∂ι/∂θ_k`.
    pub coordinate: Vec<Vec<f64>>,
    /// Gram–Schmidt frame `e_1..e_n` in the ambient metric.
    pub orthonormal: Vec<Vec<f64>>,
    /// `e_i = Σ_k coeffs[(i, k)] ∂ι/∂θ_k` (lower triangular).
    pub coeffs: DMatrix<f64>,
    /// `sqrt det (ḡ(∂_k ι, ∂_l ι))`.
    pub volg_density: f64,
}

/// Both evaluations of the J-volume density at a node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoJ {
    /// `(det_C h_ij)^{1/2}`.
    pub value: f64,
    /// `vol_ḡ(e, Je)^{1/2}`.
    pub gram: f64,
}

impl RhoJ {
    pub fn gap(&self) -> f64 {
        (self.value - self.gram).abs()
    }
}

/// Per-node densities.
#[derive(Debug, Clone, PartialEq)]
pub struct JVolumeDensity {
    pub rho: Vec<f64>,
    pub volg_density: Vec<f64>,
    pub volj_density: Vec<f64>,
    /// Largest disagreement between the two `ρ_J` formulas.
    pub max_formula_gap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Volumes {
    pub vol_j: f64,
    pub vol_g: f64,
}

/// Projection operators at a node, as matrices acting on ambient vectors.
#[derive(Debug, Clone)]
pub struct Projections {
    /// Onto `TL` along `J(TL)`.
    pub pi_l: DMatrix<f64>,
    /// Onto `J(TL)` along `TL`.
    pub pi_j: DMatrix<f64>,
    /// `ḡ`-orthogonal onto `TL`.
    pub pi_t: DMatrix<f64>,
    /// `ḡ`-orthogonal onto the normal space.
    pub pi_perp: DMatrix<f64>,
}

/// `H_J` sampled on the grid, node-major like immersion points.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanCurvatureField {
    pub dim: usize,
    pub values: Vec<f64>,
}

impl MeanCurvatureField {
    pub fn at(&self, node: usize) -> &[f64] {
        &self.values[node * self.dim..(node + 1) * self.dim]
    }
}

/// Tangent vector field on `L`, as coefficients of `∂θ_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorFieldOnL {
    pub grid: GridTorus,
    pub components: Vec<Vec<f64>>,
}

impl VectorFieldOnL {
    /// `c ∂θ_k`.
    pub fn coordinate(grid: &GridTorus, k: usize, c: f64) -> Self {
        let mut components = vec![vec![0.0; grid.len()]; grid.dim()];
        components[k].iter_mut().for_each(|v| *v = c);
        Self {
            grid: grid.clone(),
            components,
        }
    }

    /// Field from a function of the node angles returning the `∂θ_k` coefficients.
    pub fn from_fn<F: Fn(&[f64]) -> Vec<f64>>(grid: &GridTorus, f: F) -> Self {
        let mut components = vec![vec![0.0; grid.len()]; grid.dim()];
        for node in 0..grid.len() {
            let v = f(&grid.angles(node));
            for (k, c) in components.iter_mut().enumerate() {
                c[node] = v[k];
            }
        }
        Self {
            grid: grid.clone(),
            components,
        }
    }

    pub fn at(&self, node: usize) -> Vec<f64> {
        self.components.iter().map(|c| c[node]).collect()
    }

    /// `Some((k, c))` when the field is `c ∂θ_k` with constant `c`.
    pub fn as_coordinate(&self) -> Option<(usize, f64)> {
        let mut found = None;
        for (k, comp) in self.components.iter().enumerate() {
            let c0 = comp[0];
            if comp.iter().any(|&v| v != c0) {
                return None;
            }
            if c0 != 0.0 {
                if found.is_some() {
                    return None;
                }
                found = Some((k, c0));
            }
        }
        found
    }
}

/// A sampled immersion into a chart, validated as totally real.
#[derive(Debug, Clone)]
pub struct Immersion {
    grid: GridTorus,
    chart: AmbientChart,
    points: Vec<f64>,
    lift: Option<DMatrix<f64>>,
    tangents: Vec<Vec<f64>>,
    metrics: Vec<DMatrix<f64>>,
}

fn dot_g(g: &DMatrix<f64>, u: &[f64], v: &[f64]) -> f64 {
    let d = u.len();
    let mut s = 0.0;
    for a in 0..d {
        for b in 0..d {
            s += u[a] * g[(a, b)] * v[b];
        }
    }
    s
}

fn mat_vec(m: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    (0..m.nrows())
        .map(|a| (0..m.ncols()).map(|b| m[(a, b)] * v[b]).sum())
        .collect()
}

/// `ρ_J` of the plane spanned by `tangents` in the metric `g` (both formulas).
pub fn rho_j_of_plane(g: &DMatrix<f64>, tangents: &[Vec<f64>]) -> Result<RhoJ> {
    let (e, _) = gram_schmidt(g, tangents).ok_or(Error::DegenerateFrame { node: 0 })?;
    Ok(rho_j_of_frame(g, &e))
}

fn gram_schmidt(g: &DMatrix<f64>, f: &[Vec<f64>]) -> Option<(Vec<Vec<f64>>, DMatrix<f64>)> {
    let n = f.len();
    let mut e: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut coeffs = DMatrix::zeros(n, n);
    let scale = f
        .iter()
        .map(|v| dot_g(g, v, v).sqrt())
        .fold(0.0f64, f64::max);
    for i in 0..n {
        let mut v = f[i].clone();
        let mut c = vec![0.0; n];
        c[i] = 1.0;
        for j in 0..i {
            let p = dot_g(g, &v, &e[j]);
            for (vk, ek) in v.iter_mut().zip(&e[j]) {
                *vk -= p * ek;
            }
            for k in 0..n {
                c[k] -= p * coeffs[(j, k)];
            }
        }
        let norm = dot_g(g, &v, &v).sqrt();
        if !(norm > 1e-10 * scale.max(f64::MIN_POSITIVE)) {
            return None;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        for k in 0..n {
            coeffs[(i, k)] = c[k] / norm;
        }
        e.push(v);
    }
    Some((e, coeffs))
}

fn rho_j_of_frame(g: &DMatrix<f64>, e: &[Vec<f64>]) -> RhoJ {
    let n = e.len();
    let je: Vec<Vec<f64>> = e.iter().map(|v| apply_j(v)).collect();
    // h_ij = ḡ(e_i, e_j) - i ω(e_i, e_j), ω(u, v) = ḡ(Ju, v)
    let h = DMatrix::from_fn(n, n, |i, j| {
        Complex64::new(dot_g(g, &e[i], &e[j]), -dot_g(g, &je[i], &e[j]))
    });
    let det = h.determinant();
    let value = det.re.max(0.0).sqrt();
    let basis: Vec<&Vec<f64>> = e.iter().chain(je.iter()).collect();
    let m = basis.len();
    let gram = DMatrix::from_fn(m, m, |a, b| dot_g(g, basis[a], basis[b]));
    let gram_rho = gram.determinant().max(0.0).powf(0.25);
    RhoJ {
        value,
        gram: gram_rho,
    }
}

impl Immersion {
    /// Validates and wraps sampled points.
    pub fn new(
        grid: GridTorus,
        chart: AmbientChart,
        points: Vec<f64>,
        lift: Option<DMatrix<f64>>,
    ) -> Result<Self> {
        let d = chart.real_dim();
        if chart.n() != grid.dim() {
            return Err(Error::InvalidInput(format!(
                "a {}-torus cannot be totally real in complex dimension {}",
                grid.dim(),
                chart.n()
            )));
        }
        if points.len() != grid.len() * d {
            return Err(Error::InvalidInput(format!(
                "expected {} coordinates, got {}",
                grid.len() * d,
                points.len()
            )));
        }
        if points.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("non-finite coordinate".into()));
        }
        if let Some(w) = &lift {
            if w.nrows() != d || w.ncols() != grid.dim() {
                return Err(Error::InvalidInput("lift must be 2n x n".into()));
            }
            let period = chart.period().ok_or_else(|| {
                Error::InvalidInput("winding immersions need a flat quotient chart".into())
            })?;
            for x in w.iter() {
                let k = x * TAU / period;
                if (k - k.round()).abs() > 1e-9 {
                    return Err(Error::InvalidInput(
                        "lift columns must be lattice vectors over 2π".into(),
                    ));
                }
            }
        }
        let metrics: Vec<DMatrix<f64>> = (0..grid.len())
            .into_par_iter()
            .map(|k| chart.metric_at(&points[k * d..(k + 1) * d]).map(|m| m.g))
            .collect::<Result<_>>()?;
        let mut im = Self {
            grid,
            chart,
            points,
            lift,
            tangents: Vec::new(),
            metrics,
        };
        im.tangents = im.compute_tangents();
        im.validate()?;
        Ok(im)
    }

    /// `build_immersion`: samples a built-in family.
    pub fn from_formula(grid: &GridTorus, chart: &AmbientChart, formula: &Formula) -> Result<Self> {
        let need = match formula {
            Formula::Circle { .. } | Formula::Ellipse { .. } | Formula::FourierCurve { .. } => 1,
            _ => 2,
        };
        if grid.dim() != need {
            return Err(Error::InvalidInput(format!(
                "formula needs a {need}-dimensional grid"
            )));
        }
        let mut lift = None;
        let sample: Box<dyn Fn(&[f64]) -> Vec<f64>> = match formula.clone() {
            Formula::Circle { radius, center } => {
                if !(radius > 0.0) {
                    return Err(Error::InvalidInput("radius must be positive".into()));
                }
                Box::new(move |t| {
                    vec![center[0] + radius * t[0].cos(), center[1] + radius * t[0].sin()]
                })
            }
            Formula::Ellipse { a, b, center } => {
                if !(a > 0.0 && b > 0.0) {
                    return Err(Error::InvalidInput("semi-axes must be positive".into()));
                }
                Box::new(move |t| vec![center[0] + a * t[0].cos(), center[1] + b * t[0].sin()])
            }
            Formula::FourierCurve { coeffs } => {
                Box::new(move |t| {
                    let mut z = Complex64::new(0.0, 0.0);
                    for &(n, re, im) in &coeffs {
                        z += Complex64::new(re, im) * Complex64::from_polar(1.0, n as f64 * t[0]);
                    }
                    vec![z.re, z.im]
                })
            }
            Formula::ProductTorus { r1, r2 } => {
                if !(r1 > 0.0 && r2 > 0.0) {
                    return Err(Error::InvalidInput("radii must be positive".into()));
                }
                Box::new(move |t| {
                    vec![r1 * t[0].cos(), r1 * t[0].sin(), r2 * t[1].cos(), r2 * t[1].sin()]
                })
            }
            Formula::GraphPerturbedTorus {
                r1,
                r2,
                amplitude,
                mode,
            } => {
                if !(r1 > 0.0 && r2 > amplitude.abs()) {
                    return Err(Error::InvalidInput(
                        "need r1 > 0 and r2 > |amplitude|".into(),
                    ));
                }
                Box::new(move |t| {
                    let r = r2 + amplitude * (mode[0] as f64 * t[0] + mode[1] as f64 * t[1]).cos();
                    vec![r1 * t[0].cos(), r1 * t[0].sin(), r * t[1].cos(), r * t[1].sin()]
                })
            }
            Formula::StraightTorus { winding, offset } => {
                let period = chart.period().ok_or_else(|| {
                    Error::InvalidInput("straight tori live in a flat quotient chart".into())
                })?;
                let d = chart.real_dim();
                if winding.len() != d || winding.iter().any(|r| r.len() != grid.dim()) {
                    return Err(Error::InvalidInput("winding must be 2n x n".into()));
                }
                let off = if offset.is_empty() { vec![0.0; d] } else { offset };
                if off.len() != d {
                    return Err(Error::InvalidInput("offset must have 2n entries".into()));
                }
                let s = period / TAU;
                let w = DMatrix::from_fn(d, grid.dim(), |a, k| s * winding[a][k] as f64);
                lift = Some(w.clone());
                Box::new(move |t| {
                    (0..d)
                        .map(|a| off[a] + (0..t.len()).map(|k| w[(a, k)] * t[k]).sum::<f64>())
                        .collect()
                })
            }
        };
        let points: Vec<f64> = (0..grid.len())
            .flat_map(|node| sample(&grid.angles(node)))
            .collect();
        Self::new(grid.clone(), chart.clone(), points, lift)
    }

    pub fn grid(&self) -> &GridTorus {
        &self.grid
    }
    pub fn chart(&self) -> &AmbientChart {
        &self.chart
    }
    pub fn points(&self) -> &[f64] {
        &self.points
    }
    pub fn lift(&self) -> Option<&DMatrix<f64>> {
        self.lift.as_ref()
    }
    pub fn real_dim(&self) -> usize {
        self.chart.real_dim()
    }
    pub fn point(&self, node: usize) -> &[f64] {
        let d = self.real_dim();
        &self.points[node * d..(node + 1) * d]
    }
    pub fn metric(&self, node: usize) -> &DMatrix<f64> {
        &self.metrics[node]
    }
    /// `∂ι/∂θ_k` at a node.
    pub fn tangent(&self, k: usize, node: usize) -> &[f64] {
        let d = self.real_dim();
        &self.tangents[k][node * d..(node + 1) * d]
    }

    /// Same grid and lift, new points (re-validated).
    pub fn with_points(&self, points: Vec<f64>) -> Result<Self> {
        Self::new(self.grid.clone(), self.chart.clone(), points, self.lift.clone())
    }

    /// `ι + ε Z` for an ambient field `Z` along `ι`.
    pub fn deformed(&self, z: &[f64], eps: f64) -> Result<Self> {
        let pts = self.points.iter().zip(z).map(|(p, v)| p + eps * v).collect();
        self.with_points(pts)
    }

    /// Periodic part of the points, one real array per ambient coordinate.
    pub fn periodic_components(&self) -> Vec<Vec<f64>> {
        let d = self.real_dim();
        (0..d)
            .map(|a| {
                (0..self.grid.len())
                    .map(|node| {
                        let mut x = self.points[node * d + a];
                        if let Some(w) = &self.lift {
                            let th = self.grid.angles(node);
                            for (k, t) in th.iter().enumerate() {
                                x -= w[(a, k)] * t;
                            }
                        }
                        x
                    })
                    .collect()
            })
            .collect()
    }

    /// Re-assembles node-major points from periodic components plus the lift.
    pub fn assemble_points(&self, periodic: &[Vec<f64>]) -> Vec<f64> {
        let d = self.real_dim();
        let mut pts = vec![0.0; self.grid.len() * d];
        for node in 0..self.grid.len() {
            let th = self.grid.angles(node);
            for a in 0..d {
                let mut x = periodic[a][node];
                if let Some(w) = &self.lift {
                    for (k, t) in th.iter().enumerate() {
                        x += w[(a, k)] * t;
                    }
                }
                pts[node * d + a] = x;
            }
        }
        pts
    }

    fn compute_tangents(&self) -> Vec<Vec<f64>> {
        let d = self.real_dim();
        let per = self.periodic_components();
        (0..self.grid.dim())
            .map(|k| {
                let derivs: Vec<Vec<f64>> = per
                    .iter()
                    .map(|c| spectral::grid_derivative(c, self.grid.sizes(), k))
                    .collect();
                let mut out = vec![0.0; self.grid.len() * d];
                for node in 0..self.grid.len() {
                    for a in 0..d {
                        let w = self.lift.as_ref().map_or(0.0, |w| w[(a, k)]);
                        out[node * d + a] = derivs[a][node] + w;
                    }
                }
                out
            })
            .collect()
    }

    fn validate(&self) -> Result<()> {
        let fails: Vec<Option<Error>> = (0..self.grid.len())
            .into_par_iter()
            .map(|node| match self.tangent_frame(node) {
                Err(_) => Some(Error::NotImmersed { node }),
                Ok(fr) => {
                    let r = rho_j_of_frame(self.metric(node), &fr.orthonormal);
                    if !(r.value > RHO_MIN) {
                        Some(Error::NotTotallyReal { node, rho: r.value })
                    } else {
                        None
                    }
                }
            })
            .collect();
        match fails.into_iter().flatten().next() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }

    /// Coordinate and orthonormal frames at a node.
    pub fn tangent_frame(&self, node: usize) -> Result<TangentFrame> {
        if node >= self.grid.len() {
            return Err(Error::InvalidInput(format!("node {node} out of range")));
        }
        let g = self.metric(node);
        let coordinate: Vec<Vec<f64>> = (0..self.grid.dim())
            .map(|k| self.tangent(k, node).to_vec())
            .collect();
        let (orthonormal, coeffs) =
            gram_schmidt(g, &coordinate).ok_or(Error::DegenerateFrame { node })?;
        let n = coordinate.len();
        let gram = DMatrix::from_fn(n, n, |k, l| dot_g(g, &coordinate[k], &coordinate[l]));
        Ok(TangentFrame {
            coordinate,
            orthonormal,
            coeffs,
            volg_density: gram.determinant().max(0.0).sqrt(),
        })
    }

    /// `ρ_J` at a node by both formulas.
    pub fn rho_j(&self, node: usize) -> Result<RhoJ> {
        let fr = self.tangent_frame(node)?;
        let r = rho_j_of_frame(self.metric(node), &fr.orthonormal);
        if !(r.value > RHO_MIN) {
            return Err(Error::NotTotallyReal { node, rho: r.value });
        }
        Ok(r)
    }

    pub fn densities(&self) -> Result<JVolumeDensity> {
        let per: Vec<(f64, f64, f64)> = (0..self.grid.len())
            .into_par_iter()
            .map(|node| {
                let fr = self.tangent_frame(node)?;
                let r = rho_j_of_frame(self.metric(node), &fr.orthonormal);
                Ok((r.value, fr.volg_density, r.gap()))
            })
            .collect::<Result<_>>()?;
        let rho: Vec<f64> = per.iter().map(|p| p.0).collect();
        let volg: Vec<f64> = per.iter().map(|p| p.1).collect();
        Ok(JVolumeDensity {
            volj_density: rho.iter().zip(&volg).map(|(r, v)| r * v).collect(),
            rho,
            volg_density: volg,
            max_formula_gap: per.iter().fold(0.0f64, |m, p| m.max(p.2)),
        })
    }

    /// Periodic quadrature of a nodal density.
    pub fn integrate(&self, density: &[f64]) -> f64 {
        spectral::neumaier_sum(density.iter().copied()) * self.grid.cell_area()
    }

    pub fn total_volumes(&self) -> Result<Volumes> {
        let d = self.densities()?;
        Ok(Volumes {
            vol_j: self.integrate(&d.volj_density),
            vol_g: self.integrate(&d.volg_density),
        })
    }

    pub fn projections_at(&self, node: usize) -> Result<Projections> {
        let fr = self.tangent_frame(node)?;
        projections(self.metric(node), &fr.orthonormal, node)
    }

    /// Largest `|ι^*ω̄|` over the nodes, measured on the orthonormal frame.
    pub fn lagrangian_defect(&self) -> Result<f64> {
        if self.grid.dim() == 1 {
            return Ok(0.0);
        }
        let vals: Vec<f64> = (0..self.grid.len())
            .into_par_iter()
            .map(|node| {
                let fr = self.tangent_frame(node)?;
                let e = &fr.orthonormal;
                Ok(dot_g(self.metric(node), &apply_j(&e[0]), &e[1]).abs())
            })
            .collect::<Result<_>>()?;
        Ok(vals.into_iter().fold(0.0, f64::max))
    }

    /// `ι_* X` as a node-major ambient field.
    pub fn push_forward(&self, x: &VectorFieldOnL) -> Vec<f64> {
        let d = self.real_dim();
        let mut out = vec![0.0; self.grid.len() * d];
        for node in 0..self.grid.len() {
            for (k, comp) in x.components.iter().enumerate() {
                let c = comp[node];
                if c == 0.0 {
                    continue;
                }
                let t = self.tangent(k, node);
                for a in 0..d {
                    out[node * d + a] += c * t[a];
                }
            }
        }
        out
    }

    /// `J ι_* Y`.
    pub fn j_push_forward(&self, y: &VectorFieldOnL) -> Vec<f64> {
        let d = self.real_dim();
        let v = self.push_forward(y);
        v.chunks(d).flat_map(apply_j).collect()
    }

    /// `ι ∘ (θ ↦ θ + shift)` by spectral interpolation.
    pub fn shifted(&self, shift: &[f64]) -> Result<Self> {
        let per = self.periodic_components();
        let shifted: Vec<Vec<f64>> = per
            .iter()
            .map(|c| {
                let mut z: Vec<Complex64> = c.iter().map(|&x| Complex64::new(x, 0.0)).collect();
                for (k, &s) in shift.iter().enumerate() {
                    z = spectral::grid_multiplier(&z, self.grid.sizes(), k, |m| {
                        Complex64::from_polar(1.0, m as f64 * s)
                    });
                }
                z.iter().map(|v| v.re).collect()
            })
            .collect();
        let mut pts = self.assemble_points(&shifted);
        if let Some(w) = &self.lift {
            let d = self.real_dim();
            for node in 0..self.grid.len() {
                for a in 0..d {
                    for (k, s) in shift.iter().enumerate() {
                        pts[node * d + a] += w[(a, k)] * s;
                    }
                }
            }
        }
        self.with_points(pts)
    }

    /// `ι ∘ φ` where `φ` maps node `j` to the angles `phi[j]` (unwrapped, so
    /// the lift is applied to `φ` itself); `φ` must be homotopic to the identity.
    pub fn composed(&self, phi: &[Vec<f64>]) -> Result<Self> {
        if phi.len() != self.grid.len() || phi.iter().any(|p| p.len() != self.grid.dim()) {
            return Err(Error::InvalidInput("one angle tuple per node required".into()));
        }
        let d = self.real_dim();
        let vals: Vec<Vec<Complex64>> = self
            .periodic_components()
            .iter()
            .map(|c| {
                let z: Vec<Complex64> = c.iter().map(|&x| Complex64::new(x, 0.0)).collect();
                spectral::interpolate_grid(&z, self.grid.sizes(), phi)
            })
            .collect();
        let mut pts = vec![0.0; self.grid.len() * d];
        for (node, p) in phi.iter().enumerate() {
            for a in 0..d {
                let mut x = vals[a][node].re;
                if let Some(w) = &self.lift {
                    for (k, t) in p.iter().enumerate() {
                        x += w[(a, k)] * t;
                    }
                }
                pts[node * d + a] = x;
            }
        }
        self.with_points(pts)
    }

    /// Spectral derivative along `θ_k` of a node-major ambient field.
    pub fn field_derivative(&self, v: &[f64], k: usize) -> Vec<f64> {
        let d = self.real_dim();
        let n = self.grid.len();
        let mut out = vec![0.0; n * d];
        for a in 0..d {
            let comp: Vec<f64> = (0..n).map(|node| v[node * d + a]).collect();
            let dc = spectral::grid_derivative(&comp, self.grid.sizes(), k);
            for node in 0..n {
                out[node * d + a] = dc[node];
            }
        }
        out
    }

    /// `H_J = -J π_T J Σ_i ∇̄_{e_i}(π_L^t e_i)`; the correction term
    /// `π_L^t ∇̄_{e_i} e_i` lies in `TL` and drops out under the projection.
    pub fn h_j_field(&self) -> Result<MeanCurvatureField> {
        let d = self.real_dim();
        let n = self.grid.dim();
        let nodes = self.grid.len();
        let frames: Vec<TangentFrame> = (0..nodes)
            .into_par_iter()
            .map(|node| self.tangent_frame(node))
            .collect::<Result<_>>()?;
        // V_i = π_L^t e_i, stored per i as node-major fields
        let mut v: Vec<Vec<f64>> = vec![vec![0.0; nodes * d]; n];
        let per_node: Vec<Vec<Vec<f64>>> = (0..nodes)
            .into_par_iter()
            .map(|node| {
                let g = self.metric(node);
                let pr = projections(g, &frames[node].orthonormal, node)?;
                let ginv = g
                    .clone()
                    .try_inverse()
                    .ok_or(Error::DegenerateFrame { node })?;
                let adj = ginv * pr.pi_l.transpose() * g;
                Ok(frames[node]
                    .orthonormal
                    .iter()
                    .map(|e| mat_vec(&adj, e))
                    .collect())
            })
            .collect::<Result<_>>()?;
        for (node, vs) in per_node.iter().enumerate() {
            for i in 0..n {
                v[i][node * d..(node + 1) * d].copy_from_slice(&vs[i]);
            }
        }
        // ∂_k V_i
        let dv: Vec<Vec<Vec<f64>>> = v
            .iter()
            .map(|vi| (0..n).map(|k| self.field_derivative(vi, k)).collect())
            .collect();
        let flat = self.chart.is_flat();
        let values: Vec<Vec<f64>> = (0..nodes)
            .into_par_iter()
            .map(|node| {
                let gamma = if flat {
                    None
                } else {
                    Some(self.chart.christoffels_at(self.point(node))?)
                };
                let fr = &frames[node];
                let mut s = vec![0.0; d];
                for i in 0..n {
                    let vi = &v[i][node * d..(node + 1) * d];
                    for k in 0..n {
                        let c = fr.coeffs[(i, k)];
                        if c == 0.0 {
                            continue;
                        }
                        let mut cov = dv[i][k][node * d..(node + 1) * d].to_vec();
                        if let Some(gm) = &gamma {
                            let corr = gm.contract(&fr.coordinate[k], vi);
                            cov.iter_mut().zip(corr).for_each(|(x, y)| *x += y);
                        }
                        for a in 0..d {
                            s[a] += c * cov[a];
                        }
                    }
                }
                // -J π_T J s: ḡ-orthogonal projection onto J(TL)
                let js = apply_j(&s);
                let g = self.metric(node);
                let mut pt = vec![0.0; d];
                for e in &fr.orthonormal {
                    let p = dot_g(g, e, &js);
                    for a in 0..d {
                        pt[a] += p * e[a];
                    }
                }
                Ok(apply_j(&pt).iter().map(|x| -x).collect())
            })
            .collect::<Result<_>>()?;
        Ok(MeanCurvatureField {
            dim: d,
            values: values.into_iter().flatten().collect(),
        })
    }

    /// `ḡ(u, w)` at a node.
    pub fn inner(&self, node: usize, u: &[f64], w: &[f64]) -> f64 {
        dot_g(self.metric(node), u, w)
    }
}

fn projections(g: &DMatrix<f64>, e: &[Vec<f64>], node: usize) -> Result<Projections> {
    let n = e.len();
    let d = 2 * n;
    let mut b = DMatrix::zeros(d, d);
    for (i, ei) in e.iter().enumerate() {
        let je = apply_j(ei);
        for a in 0..d {
            b[(a, i)] = ei[a];
            b[(a, n + i)] = je[a];
        }
    }
    let binv = b.clone().try_inverse().ok_or(Error::DegenerateFrame { node })?;
    let mut sel = DMatrix::zeros(d, d);
    for i in 0..n {
        sel[(i, i)] = 1.0;
    }
    let pi_l = &b * sel * binv;
    let pi_j = DMatrix::identity(d, d) - &pi_l;
    let mut emat = DMatrix::zeros(d, n);
    for (i, ei) in e.iter().enumerate() {
        for a in 0..d {
            emat[(a, i)] = ei[a];
        }
    }
    let pi_t = &emat * emat.transpose() * g;
    let pi_perp = DMatrix::identity(d, d) - &pi_t;
    Ok(Projections {
        pi_l,
        pi_j,
        pi_t,
        pi_perp,
    })
}
