//! One-dimensional theory: closed curves in `C` as Laurent data.
//!
//! A curve `γ(θ) = Σ a_n e^{inθ}` flowed along `∂θ` for time `t` is the
//! restriction of `g(z) = Σ a_n z^n` to `|z| = e^{-t}`, so existence of the
//! geodesic is a question about the two convergence radii of the Laurent
//! series.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral;

/// Coefficients at or below this magnitude count as absent.
pub const COEFF_FLOOR: f64 = 1e-15;
/// Width of the band around radius 1 that finite data cannot resolve.
pub const DEFAULT_MARGIN: f64 = 0.02;
const MIN_TRUNCATION: usize = 32;

/// Truncated Laurent/Fourier coefficients `a_n`, `|n| <= N`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierCurve {
    n_max: usize,
    coeffs: Vec<Complex64>,
}

impl FourierCurve {
    /// `coeffs[k]` is `a_{k - N}`.
    pub fn new(n_max: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        if n_max < MIN_TRUNCATION {
            return Err(Error::InvalidInput(format!(
                "truncation {n_max} is below {MIN_TRUNCATION}"
            )));
        }
        if coeffs.len() != 2 * n_max + 1 {
            return Err(Error::InvalidInput(format!(
                "expected {} coefficients, got {}",
                2 * n_max + 1,
                coeffs.len()
            )));
        }
        if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::InvalidInput("non-finite coefficient".into()));
        }
        Ok(Self { n_max, coeffs })
    }

    /// Curve from sparse `(n, a_n)` terms; later duplicates add up.
    pub fn from_terms(n_max: usize, terms: &[(i64, Complex64)]) -> Result<Self> {
        let mut c = vec![Complex64::new(0.0, 0.0); 2 * n_max + 1];
        for &(n, a) in terms {
            if n.unsigned_abs() as usize > n_max {
                return Err(Error::InvalidInput(format!(
                    "index {n} exceeds truncation {n_max}"
                )));
            }
            c[(n + n_max as i64) as usize] += a;
        }
        Self::new(n_max, c)
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn coeff(&self, n: i64) -> Complex64 {
        if n.unsigned_abs() as usize > self.n_max {
            return Complex64::new(0.0, 0.0);
        }
        self.coeffs[(n + self.n_max as i64) as usize]
    }

    /// `(n, a_n)` for every index.
    pub fn terms(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        let off = self.n_max as i64;
        self.coeffs.iter().enumerate().map(move |(k, &c)| (k as i64 - off, c))
    }

    /// Samples of `Σ a_n r^n n^p e^{inθ}` on `m` equispaced angles, via one FFT.
    fn synth(&self, m: usize, r: f64, power: i32) -> Vec<Complex64> {
        assert!(m > 2 * self.n_max, "sample count must exceed 2N");
        let mut bins = vec![Complex64::new(0.0, 0.0); m];
        for (n, a) in self.terms() {
            if a == Complex64::new(0.0, 0.0) {
                continue;
            }
            let w = r.powi(n as i32) * (n as f64).powi(power);
            bins[spectral::bin(n, m)] += a * w;
        }
        spectral::inverse(&bins)
    }

    /// `γ(θ_j)` on `m > 2N` equispaced angles.
    pub fn synthesize(&self, m: usize) -> Vec<Complex64> {
        self.synth(m, 1.0, 0)
    }

    /// `γ'(θ_j)`.
    pub fn derivative_samples(&self, m: usize) -> Vec<Complex64> {
        self.synth(m, 1.0, 1)
            .into_iter()
            .map(|v| v * Complex64::new(0.0, 1.0))
            .collect()
    }

    /// `Σ a_n e^{inθ}` at one angle.
    pub fn eval(&self, theta: f64) -> Complex64 {
        let re = spectral::neumaier_sum(
            self.terms()
                .map(|(n, a)| (a * Complex64::from_polar(1.0, n as f64 * theta)).re),
        );
        let im = spectral::neumaier_sum(
            self.terms()
                .map(|(n, a)| (a * Complex64::from_polar(1.0, n as f64 * theta)).im),
        );
        Complex64::new(re, im)
    }

    /// `γ'(θ)` at one angle.
    pub fn eval_derivative(&self, theta: f64) -> Complex64 {
        let t: Vec<Complex64> = self
            .terms()
            .map(|(n, a)| a * Complex64::new(0.0, n as f64) * Complex64::from_polar(1.0, n as f64 * theta))
            .collect();
        Complex64::new(
            spectral::neumaier_sum(t.iter().map(|v| v.re)),
            spectral::neumaier_sum(t.iter().map(|v| v.im)),
        )
    }

    /// Default sample count: a power of two at least `4(2N+1)`.
    pub fn default_samples(&self) -> usize {
        (4 * (2 * self.n_max + 1)).next_power_of_two()
    }

    /// Winding number of `γ'` around 0 (+1 for an anticlockwise Jordan curve);
    /// `None` when `γ'` vanishes on the sample grid.
    pub fn tangent_winding(&self, m: usize) -> Option<i64> {
        let d = self.derivative_samples(m);
        let scale = d.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if d.iter().any(|v| !(v.norm() > 1e-12 * scale)) {
            return None;
        }
        let mut total = 0.0;
        for j in 0..m {
            total += (d[(j + 1) % m] / d[j]).arg();
        }
        Some((total / TAU).round() as i64)
    }

    /// `Some(())` when the curve is an anticlockwise immersion.
    pub fn check_initial(&self) -> Result<()> {
        match self.tangent_winding(self.default_samples()) {
            None => Err(Error::NotImmersed { node: 0 }),
            Some(w) if w <= 0 => Err(Error::InvalidInput(
                "curve must be oriented anticlockwise".into(),
            )),
            _ => Ok(()),
        }
    }

    pub fn unit_circle(n_max: usize) -> Result<Self> {
        Self::from_terms(n_max, &[(1, Complex64::new(1.0, 0.0))])
    }

    /// `a cos θ + i b sin θ`.
    pub fn ellipse(a: f64, b: f64, n_max: usize) -> Result<Self> {
        Self::from_terms(
            n_max,
            &[
                (1, Complex64::new(0.5 * (a + b), 0.0)),
                (-1, Complex64::new(0.5 * (a - b), 0.0)),
            ],
        )
    }

    /// `Σ_{n>=1} n^{-2} e^{inθ}`.
    pub fn inverse_square(n_max: usize) -> Result<Self> {
        let terms: Vec<(i64, Complex64)> = (1..=n_max as i64)
            .map(|n| (n, Complex64::new(1.0 / (n * n) as f64, 0.0)))
            .collect();
        Self::from_terms(n_max, &terms)
    }
}

/// `n^{-log n}`.
pub fn subgeometric(n: i64) -> f64 {
    let l = (n.unsigned_abs() as f64).ln();
    (-l * l).exp()
}

/// The coefficient families of the existence trichotomy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// `a_1 = 1` with geometric tails `2^{-|n|}` on both sides.
    Annulus,
    /// `a_n = n^{-log n}` for `n > 0` and `a_{-n} = 2^{-n}`.
    Ray,
    /// `a_n = |n|^{-log |n|}` on both sides.
    Neither,
}

impl Family {
    /// Coefficients scaled by `scale` away from `a_1`; `scale = 1` is the raw family.
    pub fn curve(self, n_max: usize, scale: f64) -> Result<FourierCurve> {
        let n = n_max as i64;
        let mut terms = vec![(1, Complex64::new(1.0, 0.0))];
        let geo = |k: i64| 0.5f64.powi(k.unsigned_abs() as i32);
        for k in 1..=n {
            let (pos, neg) = match self {
                Family::Annulus => (if k == 1 { 0.0 } else { geo(k) }, geo(k)),
                Family::Ray => (if k == 1 { 0.0 } else { subgeometric(k) }, geo(k)),
                Family::Neither => (
                    if k == 1 { 0.0 } else { subgeometric(k) },
                    subgeometric(k),
                ),
            };
            if pos != 0.0 {
                terms.push((k, Complex64::new(scale * pos, 0.0)));
            }
            terms.push((-k, Complex64::new(scale * neg, 0.0)));
        }
        FourierCurve::from_terms(n_max, &terms)
    }
}

/// Output of `fourier_analyze`.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub curve: FourierCurve,
    /// `|Σ|a_n|² - mean|γ|²| / mean|γ|²` over the raw spectrum.
    pub parseval_residual: f64,
    /// Energy fraction of the raw spectrum beyond `|n| = N`.
    pub tail_ratio: f64,
}

/// Tail energy above which the truncation is rejected.
pub const ALIASING_LIMIT: f64 = 1e-8;

/// FFT coefficients of `m >= 4N` samples (a power of two).
pub fn fourier_analyze(samples: &[Complex64], n_max: usize) -> Result<Analysis> {
    let m = samples.len();
    if !m.is_power_of_two() || m < 4 * n_max {
        return Err(Error::InvalidInput(format!(
            "need a power-of-two sample count >= 4N = {}, got {m}",
            4 * n_max
        )));
    }
    let raw = spectral::forward(samples);
    let total = spectral::neumaier_sum(raw.iter().map(|c| c.norm_sqr()));
    let tail = spectral::neumaier_sum(raw.iter().enumerate().filter(|&(k, _c)| spectral::wavenumber(k, m).unsigned_abs() as usize > n_max).map(|(_k, c)| c.norm_sqr()));
    let mean_sq = spectral::neumaier_sum(samples.iter().map(|z| z.norm_sqr())) / m as f64;
    let parseval_residual = if mean_sq > 0.0 {
        (total - mean_sq).abs() / mean_sq
    } else {
        0.0
    };
    let tail_ratio = if total > 0.0 { tail / total } else { 0.0 };
    if tail_ratio > ALIASING_LIMIT {
        return Err(Error::AliasingDetected { ratio: tail_ratio });
    }
    let n = n_max as i64;
    let coeffs = (-n..=n).map(|k| raw[spectral::bin(k, m)]).collect();
    Ok(Analysis {
        curve: FourierCurve::new(n_max, coeffs)?,
        parseval_residual,
        tail_ratio,
    })
}

/// Index window `[lo, hi]` used for the tail regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TailWindow {
    pub lo: usize,
    pub hi: usize,
}

impl TailWindow {
    /// Top half of the spectrum.
    pub fn upper_half(n_max: usize) -> Self {
        Self {
            lo: n_max / 2,
            hi: n_max,
        }
    }
}

/// Regression of one side of the spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SideFit {
    /// Convergence radius of the power series in `z` (or `1/z`); infinite when
    /// the side has no usable tail.
    #[serde(with = "crate::curve_lab::inf_as_null")]
    pub radius: f64,
    /// Fitted `d log|a_n| / dn`.
    pub slope: f64,
    /// Fitted coefficient of `log n` (power-law exponent).
    pub log_exponent: f64,
    /// RMS residual of the fit in `log|a_n|`.
    pub residual: f64,
    /// Number of coefficients used.
    pub used: usize,
    /// Too few coefficients above the floor: radius set to infinity.
    pub insufficient_tail: bool,
    /// The fit ran on the highest surviving coefficients below the window.
    pub fallback: bool,
    /// Estimated `Σ |a_n|` over the tail is finite.
    pub l1_convergent: bool,
}

/// Convergence radii of both halves of a Laurent series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiusEstimate {
    /// The negative-power part converges for `|z| > r_inner`.
    pub r_inner: f64,
    /// The non-negative part converges for `|z| < r_outer`.
    #[serde(with = "crate::curve_lab::inf_as_null")]
    pub r_outer: f64,
    /// Largest fit residual of the two sides.
    pub confidence: f64,
    pub outer: SideFit,
    pub inner: SideFit,
}

pub(crate) mod inf_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

fn fit_side(mags: &[(usize, f64)], window: TailWindow) -> SideFit {
    // mags: (n, |a_n|) for n = 1..=N
    let alive: Vec<(f64, f64)> = mags
        .iter()
        .filter(|&&(n, a)| n >= window.lo && n <= window.hi && a > COEFF_FLOOR)
        .map(|&(n, a)| (n as f64, a.ln()))
        .collect();
    let (pts, fallback) = if alive.len() >= 3 {
        (alive, false)
    } else {
        // geometric decay can drop below the floor before the window; use the
        // upper half of the surviving range instead
        let surv: Vec<(usize, f64)> = mags
            .iter()
            .copied()
            .filter(|&(_, a)| a > COEFF_FLOOR)
            .collect();
        let top = surv.last().map_or(0, |s| s.0);
        let pts: Vec<(f64, f64)> = surv
            .iter()
            .filter(|&&(n, _)| n * 2 >= top)
            .map(|&(n, a)| (n as f64, a.ln()))
            .collect();
        if pts.len() < 6 {
            return SideFit {
                radius: f64::INFINITY,
                slope: f64::NEG_INFINITY,
                log_exponent: 0.0,
                residual: 0.0,
                used: pts.len(),
                insufficient_tail: true,
                fallback: false,
                l1_convergent: true,
            };
        }
        (pts, true)
    };
    let k = pts.len();
    let a = DMatrix::from_fn(k, 3, |i, j| match j {
        0 => 1.0,
        1 => pts[i].0,
        _ => pts[i].0.ln(),
    });
    let b = DVector::from_iterator(k, pts.iter().map(|p| p.1));
    let sol = a
        .clone()
        .svd(true, true)
        .solve(&b, 1e-13)
        .unwrap_or_else(|_| DVector::zeros(3));
    let res = &a * &sol - &b;
    let slope = sol[1];
    let q = sol[2];
    let radius = (-slope).exp();
    SideFit {
        radius,
        slope,
        log_exponent: q,
        residual: (res.norm_squared() / k as f64).sqrt(),
        used: k,
        insufficient_tail: false,
        fallback,
        // geometric decay always converges; at radius ~1 the power law decides
        l1_convergent: slope < -DEFAULT_MARGIN || q < -1.0,
    }
}

/// Log-linear regression of both tails over `window` (inside `[N/2, N]`).
pub fn estimate_radii(curve: &FourierCurve, window: TailWindow) -> Result<RadiusEstimate> {
    let n = curve.n_max();
    if window.lo < n / 2 || window.hi > n || window.hi < window.lo + 2 {
        return Err(Error::InvalidWindow {
            lo: window.lo,
            hi: window.hi,
            n,
        });
    }
    let pos: Vec<f64> = (1..=n).map(|k| curve.coeff(k as i64).norm()).collect();
    let neg: Vec<f64> = (1..=n).map(|k| curve.coeff(-(k as i64)).norm()).collect();
    Ok(estimate_from_magnitudes(&pos, &neg, window))
}

/// Radii from tail magnitudes: `pos[k-1] = |a_k|`, `neg[k-1] = |a_{-k}|`.
/// The window is not validated.
pub fn estimate_from_magnitudes(pos: &[f64], neg: &[f64], window: TailWindow) -> RadiusEstimate {
    let index = |v: &[f64]| -> Vec<(usize, f64)> {
        v.iter().enumerate().map(|(k, &a)| (k + 1, a)).collect()
    };
    let outer = fit_side(&index(pos), window);
    let inner = fit_side(&index(neg), window);
    RadiusEstimate {
        r_inner: if inner.radius.is_finite() {
            1.0 / inner.radius
        } else {
            0.0
        },
        r_outer: outer.radius,
        confidence: outer.residual.max(inner.residual),
        outer,
        inner,
    }
}

/// Existence class of the geodesic generated by `∂θ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionClass {
    GeodesicAnnulus,
    RayOnly,
    NoRay,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub class: DirectionClass,
    pub margin: f64,
    pub evidence: RadiusEstimate,
}

/// Trichotomy from the estimated radii with a `margin` band around 1.
pub fn classify_direction(curve: &FourierCurve, margin: f64) -> Result<Classification> {
    let ev = estimate_radii(curve, TailWindow::upper_half(curve.n_max()))?;
    let inner_ok = ev.r_inner < 1.0 - margin;
    let class = if inner_ok && ev.r_outer > 1.0 + margin {
        DirectionClass::GeodesicAnnulus
    } else if inner_ok && (ev.r_outer - 1.0).abs() <= margin && ev.outer.l1_convergent {
        DirectionClass::RayOnly
    } else {
        DirectionClass::NoRay
    };
    Ok(Classification {
        class,
        margin,
        evidence: ev,
    })
}

/// Closed interval of admissible radii `[lo, hi]` with open/closed ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Annulus {
    pub inner: f64,
    pub outer: f64,
    pub inner_closed: bool,
    pub outer_closed: bool,
}

impl Annulus {
    /// Radii allowed by an estimate; radii within `margin` of 1 snap to 1.
    pub fn from_estimate(ev: &RadiusEstimate, margin: f64) -> Self {
        let snap = |r: f64| (r - 1.0).abs() <= margin;
        Self {
            inner: if snap(ev.r_inner) { 1.0 } else { ev.r_inner },
            outer: if snap(ev.r_outer) { 1.0 } else { ev.r_outer },
            inner_closed: snap(ev.r_inner),
            outer_closed: snap(ev.r_outer),
        }
    }

    pub fn contains(&self, r: f64) -> bool {
        if r == 1.0 {
            return true;
        }
        let lo = if self.inner_closed { r >= self.inner } else { r > self.inner };
        let hi = if self.outer_closed { r <= self.outer } else { r < self.outer };
        lo && hi
    }
}

fn annulus_of(curve: &FourierCurve, margin: f64) -> Result<Annulus> {
    let ev = estimate_radii(curve, TailWindow::upper_half(curve.n_max()))?;
    Ok(Annulus::from_estimate(&ev, margin))
}

/// `g(r e^{iθ_j})` on `m > 2N` angles, with `g(z) = Σ a_n z^n`.
pub fn geodesic_evaluate(curve: &FourierCurve, r: f64, m: usize, margin: f64) -> Result<Vec<Complex64>> {
    if m <= 2 * curve.n_max() {
        return Err(Error::InvalidInput(format!(
            "{m} samples do not resolve truncation {}",
            curve.n_max()
        )));
    }
    let ann = annulus_of(curve, margin)?;
    if !(r > 0.0) || !ann.contains(r) {
        return Err(Error::OutsideAnnulus {
            r,
            inner: ann.inner,
            outer: ann.outer,
        });
    }
    Ok(curve.synth(m, r, 0))
}

/// Abel mean `Σ a_n r^{|n|} e^{inθ}` for `0 <= r < 1`.
pub fn abel_evaluate(curve: &FourierCurve, r: f64, theta: f64) -> Result<Complex64> {
    if !(0.0..1.0).contains(&r) {
        return Err(Error::InvalidInput(format!("Abel radius {r} not in [0, 1)")));
    }
    let terms: Vec<Complex64> = curve
        .terms()
        .map(|(n, a)| a * r.powi(n.unsigned_abs() as i32) * Complex64::from_polar(1.0, n as f64 * theta))
        .collect();
    Ok(Complex64::new(
        spectral::neumaier_sum(terms.iter().map(|t| t.re)),
        spectral::neumaier_sum(terms.iter().map(|t| t.im)),
    ))
}

/// `Λ(r) = ∫ |z g'(z)| dθ` along a list of radii.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthProfile {
    /// Sorted by increasing `t = -log r`.
    pub radii: Vec<f64>,
    pub t: Vec<f64>,
    pub lambda: Vec<f64>,
    /// Second differences of `t ↦ Λ(e^{-t})`, undivided; `NaN` at the ends.
    pub d2: Vec<f64>,
}

/// Twice the gap between the chord and the middle value; equals the plain
/// second difference on uniform grids.
pub fn second_differences(t: &[f64], v: &[f64]) -> Vec<f64> {
    let k = v.len();
    let mut out = vec![f64::NAN; k];
    for i in 1..k.saturating_sub(1) {
        let (h1, h2) = (t[i] - t[i - 1], t[i + 1] - t[i]);
        let chord = (h2 * v[i - 1] + h1 * v[i + 1]) / (h1 + h2);
        out[i] = 2.0 * (chord - v[i]);
    }
    out
}

pub fn length_profile(curve: &FourierCurve, radii: &[f64], margin: f64) -> Result<LengthProfile> {
    let ann = annulus_of(curve, margin)?;
    let mut rs = radii.to_vec();
    for &r in &rs {
        if !(r > 0.0) || !ann.contains(r) {
            return Err(Error::OutsideAnnulus {
                r,
                inner: ann.inner,
                outer: ann.outer,
            });
        }
    }
    rs.sort_by(|a, b| b.partial_cmp(a).expect("finite radii"));
    let m = curve.default_samples();
    let lambda: Vec<f64> = rs
        .iter()
        .map(|&r| {
            let zg = curve.synth(m, r, 1);
            spectral::neumaier_sum(zg.iter().map(|v| v.norm())) * TAU / m as f64
        })
        .collect();
    let t: Vec<f64> = rs.iter().map(|r| -r.ln()).collect();
    Ok(LengthProfile {
        d2: second_differences(&t, &lambda),
        radii: rs,
        t,
        lambda,
    })
}

/// Integral curve of `f ∂θ` from `θ = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Reparametrization {
    /// `R` with `θ(s + 2πR) = θ(s) + 2π`.
    pub period_scale: f64,
    /// `θ(s_j)` at `s_j = 2πR j / m`.
    pub theta_of_s: Vec<f64>,
    /// `|θ(2πR) - 2π|` after integration.
    pub closure_error: f64,
}

/// RK4 substeps per output sample.
pub const REPARAM_OVERSAMPLING: usize = 8;

/// Solves `θ' = f(θ)` on one period with `m` output samples.
pub fn reparametrize_by_field<F: Fn(f64) -> f64>(f: F, m: usize) -> Result<Reparametrization> {
    if m < 4 {
        return Err(Error::InvalidInput("need at least 4 samples".into()));
    }
    let fine = (m * REPARAM_OVERSAMPLING).max(256).next_power_of_two();
    let vals: Vec<f64> = (0..fine).map(|j| f(TAU * j as f64 / fine as f64)).collect();
    let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min > 0.0) {
        return Err(Error::FieldNotPositive { min });
    }
    let r = spectral::neumaier_sum(vals.iter().map(|v| 1.0 / v)) / fine as f64;
    let h = TAU * r / (m * REPARAM_OVERSAMPLING) as f64;
    let mut th = 0.0;
    let mut out = Vec::with_capacity(m);
    for j in 0..m * REPARAM_OVERSAMPLING {
        if j % REPARAM_OVERSAMPLING == 0 {
            out.push(th);
        }
        let k1 = f(th);
        let k2 = f(th + 0.5 * h * k1);
        let k3 = f(th + 0.5 * h * k2);
        let k4 = f(th + h * k3);
        th += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    Ok(Reparametrization {
        period_scale: r,
        theta_of_s: out,
        closure_error: (th - TAU).abs(),
    })
}

/// Samples of the curve at `m` equispaced values of normalized arclength.
pub fn arclength_resample(curve: &FourierCurve, m: usize) -> Result<Vec<Complex64>> {
    let fine = curve.default_samples().max(m);
    let d = curve.derivative_samples(fine);
    let speed: Vec<f64> = d.iter().map(|v| v.norm()).collect();
    let smax = speed.iter().copied().fold(0.0, f64::max);
    if speed.iter().any(|&s| !(s > 1e-10 * smax)) {
        return Err(Error::NotImmersed { node: 0 });
    }
    let mean = spectral::neumaier_sum(speed.iter().copied()) / fine as f64;
    let length = TAU * mean;
    // s(θ) = mean θ + P(θ) with P the periodic antiderivative of speed - mean
    let sc: Vec<Complex64> = speed.iter().map(|&s| Complex64::new(s - mean, 0.0)).collect();
    let coef = spectral::forward(&sc);
    let prim: Vec<(i64, Complex64)> = coef
        .iter()
        .enumerate()
        .filter_map(|(k, &c)| {
            let w = spectral::wavenumber(k, fine);
            (w != 0 && 2 * w.unsigned_abs() as usize != fine)
                .then(|| (w, c / Complex64::new(0.0, w as f64)))
        })
        .collect();
    let speed_coef: Vec<(i64, Complex64)> = coef
        .iter()
        .enumerate()
        .filter_map(|(k, &c)| {
            let w = spectral::wavenumber(k, fine);
            (2 * w.unsigned_abs() as usize != fine).then_some((w, c))
        })
        .collect();
    let eval = |cs: &[(i64, Complex64)], th: f64| -> f64 {
        spectral::neumaier_sum(cs.iter().map(|&(w, c)| (c * Complex64::from_polar(1.0, w as f64 * th)).re))
    };
    let mut out = Vec::with_capacity(m);
    let mut th = 0.0;
    for j in 0..m {
        let target = length * j as f64 / m as f64;
        if j > 0 {
            th += TAU / m as f64;
        }
        for _ in 0..50 {
            let s = mean * th + eval(&prim, th);
            let v = mean + eval(&speed_coef, th);
            let step = (s - target) / v;
            th -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        out.push(curve.eval(th));
    }
    Ok(out)
}

/// Analytic and finite-difference second variation of length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LengthSecondVariation {
    /// `∫ (f')² + f² κ² ds`.
    pub analytic: f64,
    /// Richardson-extrapolated second difference of length along the flow.
    pub fd: f64,
    /// Unextrapolated second difference at the smallest step.
    pub fd_raw: f64,
    pub rel_err: f64,
    pub length: f64,
}

/// Steps of the second difference, coarse to fine.
pub const LENGTH_FD_STEPS: [f64; 3] = [1e-2, 5e-3, 2.5e-3];
const ARCLENGTH_TOL: f64 = 1e-8;

fn spectral_length(samples: &[Complex64]) -> f64 {
    let m = samples.len();
    let d = spectral::derivative(samples);
    spectral::neumaier_sum(d.iter().map(|v| v.norm())) * TAU / m as f64
}

/// Flows `∂γ/∂t = i f ∂γ/∂s` for time `t` by RK4 on spectral derivatives.
fn flow_curve(samples: &[Complex64], fs: &[f64], scale: f64, t: f64, steps: usize) -> Vec<Complex64> {
    let rhs = |g: &[Complex64]| -> Vec<Complex64> {
        spectral::derivative(g)
            .iter()
            .zip(fs)
            .map(|(d, &f)| Complex64::new(0.0, f * scale) * d)
            .collect()
    };
    let h = t / steps as f64;
    let mut g = samples.to_vec();
    for _ in 0..steps {
        let k1 = rhs(&g);
        let y2: Vec<Complex64> = g.iter().zip(&k1).map(|(a, k)| a + k * (0.5 * h)).collect();
        let k2 = rhs(&y2);
        let y3: Vec<Complex64> = g.iter().zip(&k2).map(|(a, k)| a + k * (0.5 * h)).collect();
        let k3 = rhs(&y3);
        let y4: Vec<Complex64> = g.iter().zip(&k3).map(|(a, k)| a + k * h).collect();
        let k4 = rhs(&y4);
        for j in 0..g.len() {
            g[j] += (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]) * (h / 6.0);
        }
    }
    g
}

/// Second variation of length along `X = f ∂s` for a curve sampled at
/// uniform arclength; `f` is a function of the normalized parameter `σ = 2πs/L`.
pub fn second_variation_length<F: Fn(f64) -> f64>(samples: &[Complex64], f: F) -> Result<LengthSecondVariation> {
    let m = samples.len();
    let d1 = spectral::derivative(samples);
    let d2 = spectral::derivative(&d1);
    let speed: Vec<f64> = d1.iter().map(|v| v.norm()).collect();
    let mean = spectral::neumaier_sum(speed.iter().copied()) / m as f64;
    let spread = speed.iter().map(|s| (s - mean).abs()).fold(0.0, f64::max) / mean;
    if spread > ARCLENGTH_TOL {
        return Err(Error::NotArclength { spread });
    }
    let length = TAU * mean;
    let ds = mean; // ds/dσ
    let fs: Vec<f64> = (0..m).map(|j| f(TAU * j as f64 / m as f64)).collect();
    let fprime_sigma = spectral::derivative_real(&fs);
    let integrand: Vec<f64> = (0..m)
        .map(|j| {
            let kappa = (d2[j] * d1[j].conj()).im / speed[j].powi(3);
            let fp = fprime_sigma[j] / ds;
            (fp * fp + fs[j] * fs[j] * kappa * kappa) * ds
        })
        .collect();
    let analytic = spectral::neumaier_sum(integrand.iter().copied()) * TAU / m as f64;

    let lam0 = spectral_length(samples);
    let scale = 1.0 / ds;
    let fd_at = |eps: f64| {
        let steps = 16;
        let p = spectral_length(&flow_curve(samples, &fs, scale, eps, steps));
        let q = spectral_length(&flow_curve(samples, &fs, scale, -eps, steps));
        (p - 2.0 * lam0 + q) / (eps * eps)
    };
    let vals: Vec<f64> = LENGTH_FD_STEPS.iter().map(|&e| fd_at(e)).collect();
    let fd = richardson_h2(&vals);
    Ok(LengthSecondVariation {
        analytic,
        fd,
        fd_raw: vals[vals.len() - 1],
        rel_err: (analytic - fd).abs() / (1.0 + analytic.abs()),
        length,
    })
}

/// Full Richardson extrapolation in `h²` of values at `h, h/2, h/4, ...`.
pub fn richardson_h2(vals: &[f64]) -> f64 {
    let mut t = vals.to_vec();
    let mut fac = 1.0;
    for _ in 1..vals.len() {
        fac *= 4.0;
        t = t
            .windows(2)
            .map(|w| w[1] + (w[1] - w[0]) / (fac - 1.0))
            .collect();
    }
    t[0]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_analysis_round_trip() {
        let c = FourierCurve::unit_circle(32).unwrap();
        let s = c.synthesize(128);
        let a = fourier_analyze(&s, 32).unwrap();
        for (n, v) in a.curve.terms() {
            let e = if n == 1 { 1.0 } else { 0.0 };
            assert!((v - e).norm() < 1e-12);
        }
        assert!(a.parseval_residual < 1e-12);
    }

    #[test]
    fn aliasing_is_detected() {
        let c = FourierCurve::from_terms(40, &[(1, 1.0.into()), (40, 0.1.into())]).unwrap();
        let s = c.synthesize(128);
        assert!(matches!(
            fourier_analyze(&s, 32),
            Err(Error::AliasingDetected { .. })
        ));
    }

    #[test]
    fn window_must_sit_in_upper_half() {
        let c = FourierCurve::unit_circle(64).unwrap();
        assert!(matches!(
            estimate_radii(&c, TailWindow { lo: 10, hi: 64 }),
            Err(Error::InvalidWindow { .. })
        ));
    }

    #[test]
    fn reparametrization_of_constant_field() {
        let r = reparametrize_by_field(|_| 2.0, 64).unwrap();
        assert!((r.period_scale - 0.5).abs() < 1e-14);
        for (j, th) in r.theta_of_s.iter().enumerate() {
            let s = TAU * 0.5 * j as f64 / 64.0;
            assert!((th - 2.0 * s).abs() < 1e-12);
        }
        assert!(matches!(
            reparametrize_by_field(|t| t.cos(), 64),
            Err(Error::FieldNotPositive { .. })
        ));
    }

    #[test]
    fn second_differences_uniform() {
        let t = [0.0, 1.0, 2.0, 3.0];
        let v = [0.0, 1.0, 4.0, 9.0];
        let d = second_differences(&t, &v);
        assert!(d[0].is_nan() && d[3].is_nan());
        assert!((d[1] - 2.0).abs() < 1e-15 && (d[2] - 2.0).abs() < 1e-15);
    }
}
