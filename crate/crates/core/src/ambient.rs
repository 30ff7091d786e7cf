//! Kähler chart domains in `R^{2n} = C^n`.
//!
//! Real coordinates are ordered `(x1, y1, x2, y2, ...)` with `z_j = x_j + i y_j`,
//! and `J` is multiplication by `i`. A potential `phi` defines
//! `omega = i ∂∂̄ phi`; in real terms the metric is the `J`-invariant part of
//! the Hessian, `g = (H + Jᵀ H J) / 2`, so that `omega(v, w) = g(Jv, w)`
//! holds exactly. Christoffel symbols and Ricci curvature come from the third
//! and fourth central-difference derivatives of `phi`, chained through the
//! Levi-Civita formulas.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fd::{self, FdScheme, JetOrder};

/// Serializable description of a built-in chart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChartDescriptor {
    /// `C^n` with the Euclidean metric.
    Flat { n: usize },
    /// Flat torus `C^n / (period Z)^{2n}`.
    FlatQuotient {
        n: usize,
        #[serde(default = "two_pi")]
        period: f64,
    },
    /// Unit disk, `phi = -2 log(1 - |z|^2)`, curvature `-1`.
    PoincareDisk {
        #[serde(default)]
        fd: Option<FdScheme>,
    },
    /// Unit ball in `C^2`, `phi = -2 log(1 - |z|^2)`.
    HyperbolicBall {
        #[serde(default)]
        fd: Option<FdScheme>,
    },
    /// Shell `0.3 < |z| < 3` in `C^2`, `phi = |z|^4`.
    Quartic {
        #[serde(default)]
        fd: Option<FdScheme>,
    },
}

fn two_pi() -> f64 {
    std::f64::consts::TAU
}

/// Region of `R^{2n}` a potential is defined on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    Everywhere,
    Ball { radius: f64 },
    Shell { inner: f64, outer: f64 },
}

impl Domain {
    /// Euclidean distance from `p` to the boundary (negative outside).
    pub fn clearance(&self, p: &[f64]) -> f64 {
        let r = p.iter().map(|x| x * x).sum::<f64>().sqrt();
        match *self {
            Domain::Everywhere => f64::INFINITY,
            Domain::Ball { radius } => radius - r,
            Domain::Shell { inner, outer } => (r - inner).min(outer - r),
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Kind {
    Flat,
    FlatQuotient { period: f64 },
    Potential {
        phi: fn(&[f64]) -> f64,
        domain: Domain,
    },
}

fn hyperbolic_potential(p: &[f64]) -> f64 {
    let r2: f64 = p.iter().map(|x| x * x).sum();
    -2.0 * (1.0 - r2).ln()
}

fn quartic_potential(p: &[f64]) -> f64 {
    let r2: f64 = p.iter().map(|x| x * x).sum();
    r2 * r2
}

/// Default derivative scheme for potential charts.
pub const DEFAULT_FD: FdScheme = FdScheme {
    step: 0.05,
    levels: 3,
};

/// Stencils are shrunk near the boundary, but never below this fraction of the scheme step.
pub const MIN_STEP_FRACTION: f64 = 0.05;

/// An immutable Kähler chart.
#[derive(Debug, Clone)]
pub struct AmbientChart {
    descriptor: ChartDescriptor,
    n: usize,
    kind: Kind,
    scheme: FdScheme,
}

/// Metric data at a chart point. Curvature fields are filled only by the
/// operations that compute them.
#[derive(Debug, Clone)]
pub struct MetricData {
    pub point: Vec<f64>,
    pub g: DMatrix<f64>,
    pub omega: DMatrix<f64>,
    pub christoffels: Option<Christoffels>,
    pub ricci: Option<DMatrix<f64>>,
}

/// Levi-Civita symbols `Γ^a_{bc}`, symmetric in `b, c`.
#[derive(Debug, Clone, PartialEq)]
pub struct Christoffels {
    dim: usize,
    data: Vec<f64>,
}

impl Christoffels {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim * dim],
        }
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    #[inline]
    pub fn get(&self, a: usize, b: usize, c: usize) -> f64 {
        self.data[(a * self.dim + b) * self.dim + c]
    }
    fn set(&mut self, a: usize, b: usize, c: usize, v: f64) {
        self.data[(a * self.dim + b) * self.dim + c] = v;
    }
    /// `Γ(u, v)^a = Γ^a_{bc} u^b v^c`.
    pub fn contract(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        let d = self.dim;
        (0..d)
            .map(|a| {
                let mut s = 0.0;
                for b in 0..d {
                    if u[b] == 0.0 {
                        continue;
                    }
                    for c in 0..d {
                        s += self.get(a, b, c) * u[b] * v[c];
                    }
                }
                s
            })
            .collect()
    }
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }
}

/// The standard complex structure on `R^{2n}`.
pub fn complex_structure(n: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    for k in 0..n {
        j[(2 * k + 1, 2 * k)] = 1.0;
        j[(2 * k, 2 * k + 1)] = -1.0;
    }
    j
}

/// Applies `J` to a real `2n`-vector without forming the matrix.
pub fn apply_j(v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    for k in 0..v.len() / 2 {
        out[2 * k] = -v[2 * k + 1];
        out[2 * k + 1] = v[2 * k];
    }
    out
}

fn j_invariant_part(h: &DMatrix<f64>, j: &DMatrix<f64>) -> DMatrix<f64> {
    let s = (h + j.transpose() * h * j) * 0.5;
    (&s + s.transpose()) * 0.5
}

impl AmbientChart {
    pub fn from_descriptor(desc: &ChartDescriptor) -> Result<Self> {
        let (n, kind, scheme) = match desc {
            ChartDescriptor::Flat { n } => (*n, Kind::Flat, DEFAULT_FD),
            ChartDescriptor::FlatQuotient { n, period } => {
                if !(*period > 0.0) {
                    return Err(Error::InvalidInput("quotient period must be positive".into()));
                }
                (*n, Kind::FlatQuotient { period: *period }, DEFAULT_FD)
            }
            ChartDescriptor::PoincareDisk { fd } => (
                1,
                Kind::Potential {
                    phi: hyperbolic_potential,
                    domain: Domain::Ball { radius: 1.0 },
                },
                fd.unwrap_or(DEFAULT_FD),
            ),
            ChartDescriptor::HyperbolicBall { fd } => (
                2,
                Kind::Potential {
                    phi: hyperbolic_potential,
                    domain: Domain::Ball { radius: 1.0 },
                },
                fd.unwrap_or(DEFAULT_FD),
            ),
            ChartDescriptor::Quartic { fd } => (
                2,
                Kind::Potential {
                    phi: quartic_potential,
                    domain: Domain::Shell {
                        inner: 0.3,
                        outer: 3.0,
                    },
                },
                fd.unwrap_or(DEFAULT_FD),
            ),
        };
        if n != 1 && n != 2 {
            return Err(Error::InvalidInput(format!(
                "complex dimension must be 1 or 2, got {n}"
            )));
        }
        if !(scheme.step > 0.0) || scheme.levels > 8 {
            return Err(Error::InvalidInput("bad finite-difference scheme".into()));
        }
        Ok(Self {
            descriptor: desc.clone(),
            n,
            kind,
            scheme,
        })
    }

    pub fn flat(n: usize) -> Self {
        Self::from_descriptor(&ChartDescriptor::Flat { n }).expect("n in {1,2}")
    }

    pub fn flat_quotient(n: usize, period: f64) -> Self {
        Self::from_descriptor(&ChartDescriptor::FlatQuotient { n, period }).expect("valid")
    }

    pub fn poincare_disk() -> Self {
        Self::from_descriptor(&ChartDescriptor::PoincareDisk { fd: None }).expect("valid")
    }

    pub fn hyperbolic_ball() -> Self {
        Self::from_descriptor(&ChartDescriptor::HyperbolicBall { fd: None }).expect("valid")
    }

    pub fn quartic() -> Self {
        Self::from_descriptor(&ChartDescriptor::Quartic { fd: None }).expect("valid")
    }

    /// Same chart with a different derivative scheme (no effect on flat charts).
    pub fn with_scheme(mut self, scheme: FdScheme) -> Self {
        self.scheme = scheme;
        match &mut self.descriptor {
            ChartDescriptor::PoincareDisk { fd }
            | ChartDescriptor::HyperbolicBall { fd }
            | ChartDescriptor::Quartic { fd } => *fd = Some(scheme),
            _ => {}
        }
        self
    }

    pub fn descriptor(&self) -> &ChartDescriptor {
        &self.descriptor
    }

    /// Complex dimension.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn real_dim(&self) -> usize {
        2 * self.n
    }

    pub fn scheme(&self) -> FdScheme {
        self.scheme
    }

    pub fn is_flat(&self) -> bool {
        matches!(self.kind, Kind::Flat | Kind::FlatQuotient { .. })
    }

    /// Lattice period for quotient charts.
    pub fn period(&self) -> Option<f64> {
        match self.kind {
            Kind::FlatQuotient { period } => Some(period),
            _ => None,
        }
    }

    pub fn j(&self) -> DMatrix<f64> {
        complex_structure(self.n)
    }

    /// Whether `p` may be evaluated (stencil included).
    pub fn check_point(&self, p: &[f64]) -> Result<()> {
        if p.len() != 2 * self.n || p.iter().any(|x| !x.is_finite()) {
            return Err(Error::PointOutsideDomain {
                point: p.to_vec(),
                clearance: 0.0,
            });
        }
        self.scheme_at(p).map(|_| ())
    }

    /// Scheme actually used at `p`: the step shrinks so the stencil stays
    /// inside the domain with a 25% margin.
    pub fn scheme_at(&self, p: &[f64]) -> Result<FdScheme> {
        let Kind::Potential { domain, .. } = self.kind else {
            return Ok(self.scheme);
        };
        let clearance = domain.clearance(p);
        let unit_reach = FdScheme::new(1.0, 0).reach(2 * self.n);
        let step = self.scheme.step.min(clearance / (1.25 * unit_reach));
        if !(step >= MIN_STEP_FRACTION * self.scheme.step) {
            return Err(Error::PointOutsideDomain {
                point: p.to_vec(),
                clearance: 1.25 * unit_reach * MIN_STEP_FRACTION * self.scheme.step,
            });
        }
        Ok(FdScheme::new(step, self.scheme.levels))
    }

    /// Whether `p` lies in the open domain (no stencil margin).
    pub fn contains(&self, p: &[f64]) -> bool {
        match self.kind {
            Kind::Potential { domain, .. } => domain.clearance(p) > 0.0,
            _ => p.iter().all(|x| x.is_finite()),
        }
    }

    fn flat_metric(&self, p: &[f64]) -> MetricData {
        let d = 2 * self.n;
        MetricData {
            point: p.to_vec(),
            g: DMatrix::identity(d, d),
            omega: self.j().transpose(),
            christoffels: None,
            ricci: None,
        }
    }

    fn checked_pd(&self, p: &[f64], g: &DMatrix<f64>) -> Result<()> {
        if g.clone().cholesky().is_none() {
            return Err(Error::MetricNotPositiveDefinite { point: p.to_vec() });
        }
        Ok(())
    }

    /// Metric and Kähler form at `p`.
    pub fn metric_at(&self, p: &[f64]) -> Result<MetricData> {
        self.check_point(p)?;
        match self.kind {
            Kind::Flat | Kind::FlatQuotient { .. } => Ok(self.flat_metric(p)),
            Kind::Potential { phi, .. } => {
                let jet = fd::jet(&phi, p, self.scheme_at(p)?, JetOrder::Two);
                let d = 2 * self.n;
                let h = DMatrix::from_fn(d, d, |a, b| jet.h(a, b));
                let j = self.j();
                let g = j_invariant_part(&h, &j);
                self.checked_pd(p, &g)?;
                let omega = j.transpose() * &g;
                Ok(MetricData {
                    point: p.to_vec(),
                    g,
                    omega,
                    christoffels: None,
                    ricci: None,
                })
            }
        }
    }

    /// Metric plus Christoffel symbols at `p`.
    pub fn christoffels_at(&self, p: &[f64]) -> Result<Christoffels> {
        Ok(self
            .connection_at(p)?
            .christoffels
            .expect("connection_at fills christoffels"))
    }

    /// Metric, Kähler form and Christoffel symbols at `p`.
    pub fn connection_at(&self, p: &[f64]) -> Result<MetricData> {
        self.check_point(p)?;
        match self.kind {
            Kind::Flat | Kind::FlatQuotient { .. } => {
                let mut m = self.flat_metric(p);
                m.christoffels = Some(Christoffels::zeros(2 * self.n));
                Ok(m)
            }
            Kind::Potential { phi, .. } => {
                let jet = fd::jet(&phi, p, self.scheme_at(p)?, JetOrder::Three);
                let parts = self.assemble(p, &jet, false)?;
                Ok(parts)
            }
        }
    }

    /// Ricci tensor at `p` (symmetrized).
    pub fn ricci_at(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        Ok(self.geometry_at(p)?.ricci.expect("geometry_at fills ricci"))
    }

    /// Everything: metric, form, Christoffel symbols and Ricci tensor.
    pub fn geometry_at(&self, p: &[f64]) -> Result<MetricData> {
        self.check_point(p)?;
        match self.kind {
            Kind::Flat | Kind::FlatQuotient { .. } => {
                let d = 2 * self.n;
                let mut m = self.flat_metric(p);
                m.christoffels = Some(Christoffels::zeros(d));
                m.ricci = Some(DMatrix::zeros(d, d));
                Ok(m)
            }
            Kind::Potential { phi, .. } => {
                let jet = fd::jet(&phi, p, self.scheme_at(p)?, JetOrder::Four);
                self.assemble(p, &jet, true)
            }
        }
    }

    fn assemble(&self, p: &[f64], jet: &fd::Jet, with_ricci: bool) -> Result<MetricData> {
        let d = 2 * self.n;
        let j = self.j();
        let h = DMatrix::from_fn(d, d, |a, b| jet.h(a, b));
        let g = j_invariant_part(&h, &j);
        self.checked_pd(p, &g)?;
        let ginv = g
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::MetricNotPositiveDefinite { point: p.to_vec() })?;
        // dg[k] = ∂_k g
        let dg: Vec<DMatrix<f64>> = (0..d)
            .map(|k| {
                let t = DMatrix::from_fn(d, d, |a, b| jet.t3(a, b, k));
                j_invariant_part(&t, &j)
            })
            .collect();
        // lowered symbols L_{e b c} = (∂_b g_ec + ∂_c g_eb - ∂_e g_bc) / 2
        let lowered = |e: usize, b: usize, c: usize| -> f64 {
            0.5 * (dg[b][(e, c)] + dg[c][(e, b)] - dg[e][(b, c)])
        };
        let mut gamma = Christoffels::zeros(d);
        for a in 0..d {
            for b in 0..d {
                for c in b..d {
                    let mut s = 0.0;
                    for e in 0..d {
                        s += ginv[(a, e)] * lowered(e, b, c);
                    }
                    gamma.set(a, b, c, s);
                    gamma.set(a, c, b, s);
                }
            }
        }
        let ricci = if with_ricci {
            // ddg[k*d + l] = ∂_k ∂_l g
            let ddg: Vec<DMatrix<f64>> = (0..d * d)
                .map(|kl| {
                    let (k, l) = (kl / d, kl % d);
                    let t = DMatrix::from_fn(d, d, |a, b| jet.t4(a, b, k, l));
                    j_invariant_part(&t, &j)
                })
                .collect();
            // ∂_k Γ^a_{bc}
            let dgamma = |k: usize, a: usize, b: usize, c: usize| -> f64 {
                let mut s = 0.0;
                for e in 0..d {
                    // ∂_k g^{ae} = -g^{ap} ∂_k g_pq g^{qe}
                    let mut dinv = 0.0;
                    for pp in 0..d {
                        for q in 0..d {
                            dinv -= ginv[(a, pp)] * dg[k][(pp, q)] * ginv[(q, e)];
                        }
                    }
                    let dl = 0.5
                        * (ddg[k * d + b][(e, c)] + ddg[k * d + c][(e, b)]
                            - ddg[k * d + e][(b, c)]);
                    s += dinv * lowered(e, b, c) + ginv[(a, e)] * dl;
                }
                s
            };
            let mut ric = DMatrix::zeros(d, d);
            for b in 0..d {
                for c in b..d {
                    let mut s = 0.0;
                    for a in 0..d {
                        s += dgamma(a, a, b, c) - dgamma(c, a, a, b);
                        for e in 0..d {
                            s += gamma.get(a, a, e) * gamma.get(e, b, c)
                                - gamma.get(a, c, e) * gamma.get(e, a, b);
                        }
                    }
                    ric[(b, c)] = s;
                }
            }
            for b in 0..d {
                for c in 0..b {
                    ric[(b, c)] = ric[(c, b)];
                }
            }
            Some(ric)
        } else {
            None
        };
        let omega = j.transpose() * &g;
        Ok(MetricData {
            point: p.to_vec(),
            g,
            omega,
            christoffels: Some(gamma),
            ricci,
        })
    }
}

/// Outcome of [`verify_kahler_einstein`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KahlerEinsteinReport {
    pub samples: usize,
    /// Largest Frobenius norm of `∇J` over the samples.
    pub max_nabla_j: f64,
    /// Largest Frobenius norm of `Ric - c g`.
    pub max_einstein_residual: f64,
    /// Least-squares Einstein constant `c`.
    pub einstein_constant: f64,
    /// Residual relative to the largest metric norm.
    pub relative_residual: f64,
    pub is_einstein: bool,
}

/// Relative residual below which a chart is reported Einstein.
pub const EINSTEIN_TOLERANCE: f64 = 1e-5;

/// Checks `∇J = 0` and fits `Ric = c g` over sample points.
pub fn verify_kahler_einstein(
    chart: &AmbientChart,
    points: &[Vec<f64>],
) -> Result<KahlerEinsteinReport> {
    if points.len() < 8 {
        return Err(Error::InvalidInput(format!(
            "need at least 8 sample points, got {}",
            points.len()
        )));
    }
    let j = chart.j();
    let d = chart.real_dim();
    let data: Vec<MetricData> = points
        .iter()
        .map(|p| chart.geometry_at(p))
        .collect::<Result<_>>()?;
    let mut max_nabla_j = 0.0f64;
    let (mut num, mut den, mut gmax) = (0.0, 0.0, 0.0f64);
    for m in &data {
        let gamma = m.christoffels.as_ref().expect("filled");
        for a in 0..d {
            // (Γ_a)^b_c = Γ^b_{ac}; ∇_a J = [Γ_a, J] for constant J
            let ga = DMatrix::from_fn(d, d, |b, c| gamma.get(b, a, c));
            let comm = &ga * &j - &j * &ga;
            max_nabla_j = max_nabla_j.max(comm.norm());
        }
        let ric = m.ricci.as_ref().expect("filled");
        num += ric.dot(&m.g);
        den += m.g.dot(&m.g);
        gmax = gmax.max(m.g.norm());
    }
    let c = num / den;
    let max_res = data
        .iter()
        .map(|m| (m.ricci.as_ref().expect("filled") - &m.g * c).norm())
        .fold(0.0f64, f64::max);
    let rel = max_res / gmax;
    Ok(KahlerEinsteinReport {
        samples: points.len(),
        max_nabla_j,
        max_einstein_residual: max_res,
        einstein_constant: c,
        relative_residual: rel,
        is_einstein: rel <= EINSTEIN_TOLERANCE,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn conformal_factor(p: &[f64]) -> f64 {
        let r2 = p[0] * p[0] + p[1] * p[1];
        4.0 / ((1.0 - r2) * (1.0 - r2))
    }

    #[test]
    fn flat_chart_is_trivial() {
        let c = AmbientChart::flat(2);
        let m = c.geometry_at(&[0.3, 1.0, -2.0, 5.0]).unwrap();
        assert_eq!(m.g, DMatrix::identity(4, 4));
        assert_eq!(m.christoffels.unwrap().max_abs(), 0.0);
        assert_eq!(m.ricci.unwrap().norm(), 0.0);
        // standard symplectic matrix
        assert_eq!(m.omega[(0, 1)], 1.0);
        assert_eq!(m.omega[(1, 0)], -1.0);
        assert_eq!(m.omega[(2, 3)], 1.0);
    }

    #[test]
    fn j_squares_to_minus_identity() {
        for n in 1..=2 {
            let j = complex_structure(n);
            assert_eq!(&j * &j, -DMatrix::<f64>::identity(2 * n, 2 * n));
        }
    }

    #[test]
    fn poincare_metric_matches_conformal_factor() {
        let c = AmbientChart::poincare_disk();
        for p in [[0.0, 0.0], [0.5, 0.0], [0.2, -0.4]] {
            let m = c.metric_at(&p).unwrap();
            let lam = conformal_factor(&p);
            assert!((m.g[(0, 0)] - lam).abs() < 1e-9 * lam, "{p:?}");
            assert!((m.g[(1, 1)] - lam).abs() < 1e-9 * lam);
            assert!(m.g[(0, 1)].abs() < 1e-9 * lam);
        }
        let m = c.metric_at(&[0.5, 0.0]).unwrap();
        assert!((m.g[(0, 0)] - 4.0 / 0.5625).abs() < 1e-8);
    }

    #[test]
    fn poincare_christoffels_match_conformal_symbols() {
        let c = AmbientChart::poincare_disk();
        let zero = c.christoffels_at(&[0.0, 0.0]).unwrap();
        assert!(zero.max_abs() < 1e-10);
        // log λ = log 4 - 2 log(1 - r^2); ∂_x log λ = 4x / (1 - r^2)
        for p in [[0.3, 0.0], [0.1, 0.25]] {
            let r2 = p[0] * p[0] + p[1] * p[1];
            let lx = 4.0 * p[0] / (1.0 - r2);
            let ly = 4.0 * p[1] / (1.0 - r2);
            let g = c.christoffels_at(&p).unwrap();
            assert!((g.get(0, 0, 0) - lx / 2.0).abs() < 1e-9);
            assert!((g.get(0, 1, 1) + lx / 2.0).abs() < 1e-9);
            assert!((g.get(0, 0, 1) - ly / 2.0).abs() < 1e-9);
            assert!((g.get(1, 1, 1) - ly / 2.0).abs() < 1e-9);
            assert!((g.get(1, 0, 0) + ly / 2.0).abs() < 1e-9);
        }
    }

    #[test]
    fn poincare_is_einstein_with_minus_one() {
        let c = AmbientChart::poincare_disk();
        let r0 = c.ricci_at(&[0.0, 0.0]).unwrap();
        assert!((r0.clone() + DMatrix::identity(2, 2) * 4.0).norm() < 1e-6, "{r0}");
        let p = [0.4, 0.2];
        let ric = c.ricci_at(&p).unwrap();
        let lam = conformal_factor(&p);
        for a in 0..2 {
            for b in 0..2 {
                let want = if a == b { -lam } else { 0.0 };
                assert!((ric[(a, b)] - want).abs() < 1e-6, "{a}{b}: {} vs {want}", ric[(a, b)]);
            }
        }
    }

    #[test]
    fn ricci_order_two_stencils_converge() {
        // halving the step reduces the error by about four without extrapolation
        let p = [0.3, 0.1];
        let lam = conformal_factor(&p);
        let err = |h: f64| {
            let c = AmbientChart::poincare_disk().with_scheme(FdScheme::new(h, 0));
            let r = c.ricci_at(&p).unwrap();
            (r + DMatrix::identity(2, 2) * lam).norm()
        };
        let (e1, e2) = (err(0.04), err(0.02));
        assert!(e1 / e2 >= 3.0, "{e1} {e2}");
    }

    #[test]
    fn outside_points_are_rejected() {
        let c = AmbientChart::poincare_disk();
        assert!(matches!(
            c.metric_at(&[0.999, 0.0]),
            Err(Error::PointOutsideDomain { .. })
        ));
        assert!(c.metric_at(&[1.5, 0.0]).is_err());
    }
}
