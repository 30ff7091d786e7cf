//! Scenario files: one JSON object naming an operation and its inputs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use trgeo::ambient::ChartDescriptor;
use trgeo::curve_lab::{Family, FourierCurve};
use trgeo::immersion::{Formula, GridTorus, Immersion, VectorFieldOnL};
use trgeo::{formats, Error as CoreError};
use num_complex::Complex64;

use crate::CliError;

pub const SCENARIO_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub version: u32,
    pub name: String,
    /// Seed for randomized cases.
    #[serde(default)]
    pub seed: u64,
    /// Output directory, relative to the scenario file; `--out` overrides it.
    #[serde(default)]
    pub output: Option<PathBuf>,
    pub task: Task,
}

/// Operation names as they appear in `task.op`, with their subcommands.
pub const OPERATIONS: &[(&str, &str, &str)] = &[
    ("curve_analyze", "curve", "analyze"),
    ("curve_classify", "curve", "classify"),
    ("curve_geodesic", "curve", "geodesic"),
    ("curve_length", "curve", "length"),
    ("curve_secondvar", "curve", "secondvar"),
    ("jvol_compute", "jvol", "compute"),
    ("jvol_hj", "jvol", "hj"),
    ("flow_run", "flow", "run"),
    ("flow_bvp", "flow", "bvp"),
    ("flow_uniqueness", "flow", "uniqueness"),
    ("variation_first", "variation", "first"),
    ("variation_second", "variation", "second"),
    ("variation_density", "variation", "density"),
    ("variation_convexity", "variation", "convexity"),
    ("variation_mixed", "variation", "mixed"),
    ("variation_stability", "variation", "stability"),
    ("ambient_verify", "ambient", "verify"),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum Task {
    CurveAnalyze {
        curve: CurveSpec,
        n_max: usize,
        /// Samples taken of the curve before analysis (power of two, `>= 4 n_max`).
        samples: usize,
    },
    CurveClassify {
        curves: Vec<CurveSpec>,
        #[serde(default = "default_margin")]
        margin: f64,
    },
    CurveGeodesic {
        curve: CurveSpec,
        radii: Vec<f64>,
        samples: usize,
        #[serde(default = "default_margin")]
        margin: f64,
    },
    CurveLength {
        curve: CurveSpec,
        radii: Vec<f64>,
        #[serde(default = "default_margin")]
        margin: f64,
    },
    CurveSecondvar {
        curve: CurveSpec,
        samples: usize,
        /// Each field is a trigonometric polynomial in normalized arclength.
        fields: Vec<Vec<TrigTerm>>,
    },
    JvolCompute {
        immersion: ImmersionSpec,
    },
    JvolHj {
        immersion: ImmersionSpec,
    },
    FlowRun {
        immersion: ImmersionSpec,
        field: FieldSpec,
        scheme: SchemeSpec,
        t_final: f64,
        #[serde(default = "default_records")]
        records: usize,
        #[serde(default)]
        dt: Option<f64>,
        #[serde(default = "default_cutoff")]
        cutoff: f64,
        /// Also write a binary container per recorded time.
        #[serde(default)]
        containers: bool,
    },
    FlowBvp {
        outer: CurveSpec,
        inner: CurveSpec,
        laurent_terms: usize,
        #[serde(default = "default_max_iter")]
        max_iter: usize,
    },
    FlowUniqueness {
        immersion: ImmersionSpec,
        field: FieldSpec,
        t_final: f64,
    },
    VariationFirst {
        immersion: ImmersionSpec,
        fields: Vec<FieldSpec>,
    },
    VariationSecond {
        immersion: ImmersionSpec,
        fields: Vec<FieldSpec>,
    },
    VariationDensity {
        immersion: ImmersionSpec,
        field: FieldSpec,
    },
    VariationConvexity {
        immersion: ImmersionSpec,
        field: FieldSpec,
        t_end: f64,
        samples: usize,
        /// Parameter value of the initial immersion, for reporting.
        #[serde(default)]
        t_start: f64,
        #[serde(default)]
        reference: Option<Reference>,
    },
    VariationMixed {
        immersion: ImmersionSpec,
        w: FieldSpec,
        z: FieldSpec,
    },
    VariationStability {
        immersion: ImmersionSpec,
        fields: Vec<FieldSpec>,
    },
    AmbientVerify {
        chart: ChartDescriptor,
        /// Sample points; when absent, a seeded random sample of `count` points
        /// within `radius` of the origin is drawn.
        #[serde(default)]
        points: Option<Vec<Vec<f64>>>,
        #[serde(default = "default_count")]
        count: usize,
        #[serde(default = "default_radius")]
        radius: f64,
    },
}

impl Task {
    pub fn op(&self) -> &'static str {
        match self {
            Task::CurveAnalyze { .. } => "curve_analyze",
            Task::CurveClassify { .. } => "curve_classify",
            Task::CurveGeodesic { .. } => "curve_geodesic",
            Task::CurveLength { .. } => "curve_length",
            Task::CurveSecondvar { .. } => "curve_secondvar",
            Task::JvolCompute { .. } => "jvol_compute",
            Task::JvolHj { .. } => "jvol_hj",
            Task::FlowRun { .. } => "flow_run",
            Task::FlowBvp { .. } => "flow_bvp",
            Task::FlowUniqueness { .. } => "flow_uniqueness",
            Task::VariationFirst { .. } => "variation_first",
            Task::VariationSecond { .. } => "variation_second",
            Task::VariationDensity { .. } => "variation_density",
            Task::VariationConvexity { .. } => "variation_convexity",
            Task::VariationMixed { .. } => "variation_mixed",
            Task::VariationStability { .. } => "variation_stability",
            Task::AmbientVerify { .. } => "ambient_verify",
        }
    }
}

fn default_margin() -> f64 {
    trgeo::curve_lab::DEFAULT_MARGIN
}
fn default_records() -> usize {
    10
}
fn default_cutoff() -> f64 {
    trgeo::geodesic_flow::DEFAULT_CUTOFF
}
fn default_max_iter() -> usize {
    50
}
fn default_count() -> usize {
    16
}
fn default_radius() -> f64 {
    0.6
}
fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeSpec {
    Spectral,
    Timestep,
}

/// Closed-form comparison column for convexity profiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Reference {
    /// `2π / sinh t`: circles about the centre of the Poincaré disk.
    HyperbolicCircle,
    /// `a e^{-t}`.
    Exponential { a: f64 },
}

impl Reference {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Reference::HyperbolicCircle => std::f64::consts::TAU / t.sinh(),
            Reference::Exponential { a } => a * (-t).exp(),
        }
    }
}

/// `amp cos(mode · θ + phase)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrigTerm {
    pub amp: f64,
    #[serde(default)]
    pub mode: Vec<i64>,
    #[serde(default)]
    pub phase: f64,
}

pub fn eval_trig(terms: &[TrigTerm], theta: &[f64]) -> f64 {
    terms
        .iter()
        .map(|t| {
            let arg: f64 = t.mode.iter().zip(theta).map(|(&m, &a)| m as f64 * a).sum();
            t.amp * (arg + t.phase).cos()
        })
        .sum()
}

/// Tangent field on the torus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    /// `scale ∂θ_axis`.
    Coordinate {
        axis: usize,
        #[serde(default = "one")]
        scale: f64,
    },
    /// One trigonometric polynomial per torus direction.
    Trig { components: Vec<Vec<TrigTerm>> },
}

impl FieldSpec {
    pub fn build(&self, grid: &GridTorus) -> Result<VectorFieldOnL, CliError> {
        match self {
            FieldSpec::Coordinate { axis, scale } => {
                if *axis >= grid.dim() || !scale.is_finite() {
                    return Err(CliError::invalid(format!("no torus direction {axis}")));
                }
                Ok(VectorFieldOnL::coordinate(grid, *axis, *scale))
            }
            FieldSpec::Trig { components } => {
                if components.len() != grid.dim() {
                    return Err(CliError::invalid("one component per torus direction required"));
                }
                for t in components.iter().flatten() {
                    if t.mode.len() > grid.dim() || !t.amp.is_finite() || !t.phase.is_finite() {
                        return Err(CliError::invalid("bad trigonometric term"));
                    }
                }
                Ok(VectorFieldOnL::from_fn(grid, |th| {
                    components.iter().map(|c| eval_trig(c, th)).collect()
                }))
            }
        }
    }
}

/// Laurent curve descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CurveSpec {
    Family {
        family: Family,
        n_max: usize,
        #[serde(default = "one")]
        scale: f64,
    },
    UnitCircle {
        n_max: usize,
    },
    Ellipse {
        a: f64,
        b: f64,
        n_max: usize,
    },
    InverseSquare {
        n_max: usize,
    },
    /// `a_1 = 1`, `a_{-n} = amplitude · e^{-√n}`: smooth but not analytic
    /// across the unit circle from inside.
    ExpSqrtTail {
        n_max: usize,
        amplitude: f64,
    },
    Terms {
        terms: Vec<(i64, f64, f64)>,
        #[serde(default)]
        n_max: Option<usize>,
    },
    /// `[[n, re, im], ...]` file, relative to the scenario.
    File {
        path: PathBuf,
        #[serde(default)]
        n_max: Option<usize>,
    },
}

impl CurveSpec {
    pub fn build(&self, base: &Path) -> Result<FourierCurve, CliError> {
        let c = match self {
            CurveSpec::Family { family, n_max, scale } => family.curve(*n_max, *scale)?,
            CurveSpec::UnitCircle { n_max } => FourierCurve::unit_circle(*n_max)?,
            CurveSpec::Ellipse { a, b, n_max } => FourierCurve::ellipse(*a, *b, *n_max)?,
            CurveSpec::InverseSquare { n_max } => FourierCurve::inverse_square(*n_max)?,
            CurveSpec::ExpSqrtTail { n_max, amplitude } => {
                let mut t = vec![(1, Complex64::new(1.0, 0.0))];
                for n in 1..=*n_max as i64 {
                    t.push((-n, Complex64::new(amplitude * (-(n as f64).sqrt()).exp(), 0.0)));
                }
                FourierCurve::from_terms(*n_max, &t)?
            }
            CurveSpec::Terms { terms, n_max } => {
                let text = serde_json::to_string(terms).map_err(CoreError::from)?;
                formats::curve_from_coefficients(&text, *n_max)?
            }
            CurveSpec::File { path, n_max } => {
                let text = std::fs::read_to_string(base.join(path))
                    .map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))?;
                formats::curve_from_coefficients(&text, *n_max)?
            }
        };
        Ok(c)
    }
}

/// Where an immersion comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum ImmersionSpec {
    Formula {
        chart: ChartDescriptor,
        sizes: Vec<usize>,
        formula: Formula,
    },
    /// A Laurent curve sampled on `samples` nodes in the flat plane.
    Curve { curve: CurveSpec, samples: usize },
    /// JSON or binary (`.trgi`) container, relative to the scenario.
    File { path: PathBuf },
}

impl ImmersionSpec {
    pub fn build(&self, base: &Path) -> Result<Immersion, CliError> {
        match self {
            ImmersionSpec::Formula { chart, sizes, formula } => {
                let grid = GridTorus::new(sizes)?;
                let chart = trgeo::ambient::AmbientChart::from_descriptor(chart)?;
                Ok(Immersion::from_formula(&grid, &chart, formula)?)
            }
            ImmersionSpec::Curve { curve, samples } => {
                let c = curve.build(base)?;
                if *samples <= 2 * c.n_max() {
                    return Err(CliError::invalid("samples must exceed twice the truncation"));
                }
                let grid = GridTorus::circle(*samples)?;
                let pts: Vec<f64> = c.synthesize(*samples).iter().flat_map(|z| [z.re, z.im]).collect();
                let chart = trgeo::ambient::AmbientChart::flat(1);
                Ok(Immersion::new(grid, chart, pts, None)?)
            }
            ImmersionSpec::File { path } => {
                let full = base.join(path);
                let bytes = std::fs::read(&full)
                    .map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))?;
                let im = if full.extension().is_some_and(|e| e == "trgi") {
                    formats::decode_immersion(&bytes)?
                } else {
                    let text = String::from_utf8(bytes)
                        .map_err(|_| CliError::invalid("immersion file is not UTF-8"))?;
                    formats::immersion_from_json(&text)?
                };
                Ok(im)
            }
        }
    }
}

/// Parses and validates a scenario document.
pub fn parse_scenario(text: &str) -> Result<Scenario, CliError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| CliError::Parse("scenario must be a JSON object".into()))?;
    match obj.get("version").and_then(|v| v.as_u64()) {
        Some(v) if v == SCENARIO_VERSION as u64 => {}
        Some(v) => return Err(CliError::Parse(format!("unsupported scenario version {v}"))),
        None => return Err(CliError::Parse("missing \"version\": 1".into())),
    }
    let op = obj
        .get("task")
        .and_then(|t| t.get("op"))
        .and_then(|o| o.as_str())
        .ok_or_else(|| CliError::Parse("missing task.op".into()))?;
    if !OPERATIONS.iter().any(|(name, _, _)| *name == op) {
        return Err(CliError::UnknownOperation(op.to_string()));
    }
    serde_json::from_value(value).map_err(|e| CliError::Parse(e.to_string()))
}
