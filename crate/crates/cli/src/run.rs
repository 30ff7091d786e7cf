//! Dispatch from a parsed scenario to the library operations.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use trgeo::ambient::{verify_kahler_einstein, AmbientChart};
use trgeo::curve_lab::{self, TailWindow};
use trgeo::geodesic_flow::{self, FlowResult};
use trgeo::immersion::{Immersion, VectorFieldOnL};
use trgeo::variation::{self, VariationReport};
use trgeo::{formats, Error as CoreError};

use crate::output::{Artifacts, Cell, Table};
use crate::scenario::{eval_trig, FieldSpec, Scenario, SchemeSpec, Task};
use crate::CliError;

#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Directory that relative paths in the scenario resolve against.
    pub base_dir: PathBuf,
    /// Multiplies every pass/fail tolerance.
    pub tol_scale: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            base_dir: PathBuf::from("."),
            tol_scale: 1.0,
        }
    }
}

const LENGTH_CONVEXITY_TOL: f64 = 1e-9;
const LENGTH_SECONDVAR_TOL: f64 = 1e-4;
const COMMUTATOR_TOL: f64 = 1e-5;
const COMMUTATOR_RECORDS: usize = 40;
const UNIQUENESS_TOL: f64 = 1e-5;
const FLAT_CONVEXITY_TOL: f64 = 1e-6;
const STRICT_CONVEXITY_MARGIN: f64 = 1e-4;

/// The pass/fail tolerances in effect, for the manifest.
pub fn tolerances(scale: f64) -> Value {
    json!({
        "tol_scale": scale,
        "first_variation_rel": variation::FIRST_VARIATION_TOL * scale,
        "second_variation_rel": variation::SECOND_VARIATION_TOL * scale,
        "density_rel": variation::DENSITY_TOL * scale,
        "min_richardson_order": variation::MIN_ORDER,
        "length_second_variation_rel": LENGTH_SECONDVAR_TOL * scale,
        "length_convexity_rel": LENGTH_CONVEXITY_TOL * scale,
        "commutator_abs": COMMUTATOR_TOL * scale,
        "uniqueness_abs": UNIQUENESS_TOL * scale,
        "flat_convexity_rel": FLAT_CONVEXITY_TOL * scale,
        "strict_convexity_rel": STRICT_CONVEXITY_MARGIN,
        "bvp_misfit": geodesic_flow::BVP_TOL,
    })
}

fn to_value<T: serde::Serialize>(v: &T) -> Result<Value, CliError> {
    Ok(serde_json::to_value(v).map_err(CoreError::from)?)
}

fn angle_cells(im: &Immersion, node: usize) -> Vec<Cell> {
    im.grid().angles(node).into_iter().map(Cell::F).collect()
}

fn angle_header(dim: usize) -> Vec<&'static str> {
    if dim == 1 {
        vec!["theta"]
    } else {
        vec!["theta1", "theta2"]
    }
}

fn coord_header(real_dim: usize) -> Vec<&'static str> {
    ["x1", "y1", "x2", "y2"][..real_dim].to_vec()
}

fn header(parts: &[&[&'static str]]) -> Vec<&'static str> {
    parts.iter().flat_map(|p| p.iter().copied()).collect()
}

fn report_json(r: &VariationReport, tol: f64) -> Result<Value, CliError> {
    let mut v = to_value(r)?;
    v["pass"] = Value::Bool(r.passes(tol));
    Ok(v)
}

fn summary_table(name: &str, reports: &[(String, &VariationReport)]) -> Table {
    let mut t = Table::new(name, &["case", "analytic", "fd", "rel_err", "order"]);
    for (case, r) in reports {
        t.push(vec![
            case.as_str().into(),
            r.analytic.into(),
            r.fd.into(),
            r.rel_err.into(),
            Cell::F(r.richardson_order.unwrap_or(f64::NAN)),
        ]);
    }
    t
}

fn points_table(name: String, im: &Immersion) -> Table {
    let d = im.real_dim();
    let mut t = Table::new(name, &header(&[&angle_header(im.grid().dim()), &coord_header(d)]));
    for node in 0..im.grid().len() {
        let mut row = angle_cells(im, node);
        row.extend(im.point(node).iter().map(|&x| Cell::F(x)));
        t.push(row);
    }
    t
}

fn fields(specs: &[FieldSpec], im: &Immersion) -> Result<Vec<VectorFieldOnL>, CliError> {
    specs.iter().map(|f| f.build(im.grid())).collect()
}

/// Runs one scenario. Pass/fail flags inside the results never change the
/// outcome; errors do.
pub fn execute(sc: &Scenario, opts: &RunOptions) -> Result<Artifacts, CliError> {
    let base = opts.base_dir.as_path();
    let ts = opts.tol_scale;
    if !(ts > 0.0 && ts.is_finite()) {
        return Err(CliError::invalid("tolerance scale must be positive"));
    }
    let mut out = Artifacts::default();
    match &sc.task {
        Task::CurveAnalyze { curve, n_max, samples } => {
            let c = curve.build(base)?;
            if !samples.is_power_of_two() || *samples <= 2 * c.n_max() {
                return Err(CliError::invalid("samples must be a power of two above 2N"));
            }
            let a = curve_lab::fourier_analyze(&c.synthesize(*samples), *n_max)?;
            let est = curve_lab::estimate_radii(&a.curve, TailWindow::upper_half(*n_max))?;
            let cls = curve_lab::classify_direction(&a.curve, curve_lab::DEFAULT_MARGIN)?;
            let mut t = Table::new("coefficients", &["n", "re", "im", "abs"]);
            for (n, z) in a.curve.terms() {
                t.push(vec![n.into(), z.re.into(), z.im.into(), z.norm().into()]);
            }
            out.tables.push(t);
            out.results = json!({
                "n_max": n_max,
                "parseval_residual": a.parseval_residual,
                "tail_ratio": a.tail_ratio,
                "estimate": to_value(&est)?,
                "classification": to_value(&cls)?,
            });
        }
        Task::CurveClassify { curves, margin } => {
            let mut t = Table::new("classify", &["index", "class", "r_inner", "r_outer", "outer_log_exponent"]);
            let mut recs = Vec::new();
            for (i, spec) in curves.iter().enumerate() {
                let c = spec.build(base)?;
                let cls = curve_lab::classify_direction(&c, *margin)?;
                t.push(vec![
                    i.into(),
                    to_value(&cls.class)?.as_str().unwrap_or("").into(),
                    cls.evidence.r_inner.into(),
                    cls.evidence.r_outer.into(),
                    cls.evidence.outer.log_exponent.into(),
                ]);
                recs.push(to_value(&cls)?);
            }
            out.tables.push(t);
            out.results = json!({ "classifications": recs });
        }
        Task::CurveGeodesic { curve, radii, samples, margin } => {
            let c = curve.build(base)?;
            let mut lengths = Vec::new();
            for (k, &r) in radii.iter().enumerate() {
                let pts = curve_lab::geodesic_evaluate(&c, r, *samples, *margin)?;
                let mut t = Table::new(format!("geodesic_r{k}"), &["theta", "x", "y"]);
                for (j, z) in pts.iter().enumerate() {
                    let th = std::f64::consts::TAU * j as f64 / *samples as f64;
                    t.push(vec![th.into(), z.re.into(), z.im.into()]);
                }
                out.tables.push(t);
                let len: f64 = (0..pts.len()).map(|j| (pts[(j + 1) % pts.len()] - pts[j]).norm()).sum();
                lengths.push(len);
            }
            out.results = json!({ "radii": radii, "polygon_lengths": lengths });
        }
        Task::CurveLength { curve, radii, margin } => {
            let c = curve.build(base)?;
            let p = curve_lab::length_profile(&c, radii, *margin)?;
            let mut t = Table::new("length_profile", &["r", "t", "Lambda", "d2"]);
            for i in 0..p.t.len() {
                t.push(vec![p.radii[i].into(), p.t[i].into(), p.lambda[i].into(), p.d2[i].into()]);
            }
            out.tables.push(t);
            let scale = p.lambda.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let min_d2 = p.d2.iter().filter(|v| v.is_finite()).fold(f64::INFINITY, |m, &v| m.min(v));
            let one_sided = c.terms().all(|(n, a)| n >= 0 || a.norm() == 0.0);
            // Λ increases with r when there are no negative modes
            let monotone = p.lambda.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12));
            out.results = json!({
                "profile": to_value(&p)?,
                "min_d2": min_d2,
                "convex": min_d2 >= -LENGTH_CONVEXITY_TOL * ts * scale,
                "one_sided": one_sided,
                "monotone_in_r": monotone,
            });
        }
        Task::CurveSecondvar { curve, samples, fields } => {
            let c = curve.build(base)?;
            let s = curve_lab::arclength_resample(&c, *samples)?;
            let mut t = Table::new("secondvar", &["field", "analytic", "fd", "rel_err", "pass"]);
            let mut recs = Vec::new();
            for (i, f) in fields.iter().enumerate() {
                let r = curve_lab::second_variation_length(&s, |sig| eval_trig(f, &[sig]))?;
                let pass = r.rel_err <= LENGTH_SECONDVAR_TOL * ts;
                t.push(vec![i.into(), r.analytic.into(), r.fd.into(), r.rel_err.into(), pass.into()]);
                let mut v = to_value(&r)?;
                v["pass"] = Value::Bool(pass);
                recs.push(v);
            }
            out.tables.push(t);
            out.results = json!({ "reports": recs });
        }
        Task::JvolCompute { immersion } => {
            let im = immersion.build(base)?;
            let d = im.densities()?;
            let v = im.total_volumes()?;
            let mut t = Table::new(
                "densities",
                &header(&[&["node"], &angle_header(im.grid().dim()), &["rho_j", "volg", "volj"]]),
            );
            for node in 0..im.grid().len() {
                let mut row = vec![Cell::from(node)];
                row.extend(angle_cells(&im, node));
                row.extend([d.rho[node].into(), d.volg_density[node].into(), d.volj_density[node].into()]);
                t.push(row);
            }
            out.tables.push(t);
            let rho_min = d.rho.iter().copied().fold(f64::INFINITY, f64::min);
            let rho_max = d.rho.iter().copied().fold(0.0, f64::max);
            out.results = json!({
                "vol_j": v.vol_j,
                "vol_g": v.vol_g,
                "rho_min": rho_min,
                "rho_max": rho_max,
                "max_formula_gap": d.max_formula_gap,
                "lagrangian_defect": im.lagrangian_defect()?,
            });
        }
        Task::JvolHj { immersion } => {
            let im = immersion.build(base)?;
            let h = im.h_j_field()?;
            let dim = im.real_dim();
            let mut t = Table::new(
                "hj",
                &header(&[&["node"], &angle_header(im.grid().dim()), &coord_header(dim)]),
            );
            let mut max_norm = 0.0f64;
            let mut max_tangential = 0.0f64;
            for node in 0..im.grid().len() {
                let mut row = vec![Cell::from(node)];
                row.extend(angle_cells(&im, node));
                row.extend(h.at(node).iter().map(|&x| Cell::F(x)));
                t.push(row);
                max_norm = max_norm.max(im.inner(node, h.at(node), h.at(node)).sqrt());
                let pl = &im.projections_at(node)?.pi_l * nalgebra::DVector::from_column_slice(h.at(node));
                max_tangential = max_tangential.max(pl.amax());
            }
            out.tables.push(t);
            out.results = json!({ "max_norm": max_norm, "max_tangential_part": max_tangential });
        }
        Task::FlowRun { immersion, field, scheme, t_final, records, dt, cutoff, containers } => {
            let im = immersion.build(base)?;
            let x = field.build(im.grid())?;
            if *records < 2 || !t_final.is_finite() {
                return Err(CliError::invalid("need at least two records and a finite t_final"));
            }
            let run = |times: &[f64]| -> Result<FlowResult, CliError> {
                Ok(match scheme {
                    SchemeSpec::Spectral => geodesic_flow::flow_spectral(&im, &x, times)?,
                    SchemeSpec::Timestep => {
                        let step = dt.unwrap_or(0.5 * geodesic_flow::stable_step(&im, &x, *cutoff)).min(0.01);
                        geodesic_flow::flow_timestep_at(&im, &x, times, step, *cutoff)?
                    }
                })
            };
            let flow = run(&geodesic_flow::uniform_times(*t_final, *records))?;
            // the time derivative needs a finer record spacing than the output
            let commutator = if *records >= COMMUTATOR_RECORDS {
                geodesic_flow::commutator_check(&flow, &x)?
            } else {
                let fine = run(&geodesic_flow::uniform_times(*t_final, COMMUTATOR_RECORDS))?;
                geodesic_flow::commutator_check(&fine, &x)?
            };
            let mut vols = Vec::new();
            for (k, imt) in flow.immersions.iter().enumerate() {
                vols.push(imt.total_volumes()?.vol_j);
                let stem = if im.grid().dim() == 1 { "curve" } else { "surface" };
                out.tables.push(points_table(format!("{stem}_t{k}"), imt));
                if *containers {
                    out.blobs.push((format!("flow_t{k}.trgi"), formats::encode_immersion(imt)?));
                }
            }
            let mut t = Table::new("flow", &["t", "vol_j"]);
            for (tk, v) in flow.times.iter().zip(&vols) {
                t.push(vec![(*tk).into(), (*v).into()]);
            }
            out.tables.push(t);
            out.results = json!({
                "scheme": to_value(&flow.scheme)?,
                "field": to_value(field)?,
                "times": flow.times,
                "vol_j": vols,
                "amplification": flow.amplification,
                "residual": flow.residual,
                "commutator": commutator,
                "commutator_pass": commutator <= COMMUTATOR_TOL * ts,
            });
        }
        Task::FlowBvp { outer, inner, laurent_terms, max_iter } => {
            let g0 = outer.build(base)?;
            let g1 = inner.build(base)?;
            let r = geodesic_flow::solve_bvp_annulus_unchecked(&g0, &g1, *laurent_terms, *max_iter)?;
            let mut h = Table::new("bvp_history", &["iteration", "sum_sq"]);
            for (i, c) in r.history.iter().enumerate() {
                h.push(vec![i.into(), (*c).into()]);
            }
            let mut c = Table::new("bvp_coefficients", &["n", "re", "im"]);
            for &(n, re, im) in &r.coeffs {
                c.push(vec![n.into(), re.into(), im.into()]);
            }
            out.tables.extend([h, c]);
            out.results = to_value(&r)?;
            if !r.converged {
                // the best iterate is recorded before reporting the failure
                return Err(CoreError::NoConvergence {
                    iterations: r.iterations,
                    residual: r.misfit_outer.max(r.misfit_inner),
                }
                .into());
            }
        }
        Task::FlowUniqueness { immersion, field, t_final } => {
            let im = immersion.build(base)?;
            let x = field.build(im.grid())?;
            let u = geodesic_flow::uniqueness_compare(&im, &x, *t_final)?;
            let mut t = Table::new("uniqueness", &["t", "discrepancy"]);
            for (tk, d) in u.times.iter().zip(&u.discrepancy) {
                t.push(vec![(*tk).into(), (*d).into()]);
            }
            out.tables.push(t);
            let mut v = to_value(&u)?;
            v["pass"] = Value::Bool(u.max_discrepancy <= UNIQUENESS_TOL * ts);
            out.results = v;
        }
        Task::VariationFirst { immersion, fields: specs } | Task::VariationSecond { immersion, fields: specs } => {
            let first = matches!(sc.task, Task::VariationFirst { .. });
            let im = immersion.build(base)?;
            let ys = fields(specs, &im)?;
            let tol = ts * if first {
                variation::FIRST_VARIATION_TOL
            } else {
                variation::SECOND_VARIATION_TOL
            };
            let mut reports = Vec::new();
            for y in &ys {
                reports.push(if first {
                    variation::check_first_variation(&im, y)?
                } else {
                    variation::check_second_variation_kahler(&im, y)?
                });
            }
            let named: Vec<(String, &VariationReport)> =
                reports.iter().enumerate().map(|(i, r)| (format!("field{i}"), r)).collect();
            out.tables.push(summary_table("summary", &named));
            out.results = json!({
                "reports": reports.iter().map(|r| report_json(r, tol)).collect::<Result<Vec<_>, _>>()?,
            });
        }
        Task::VariationDensity { immersion, field } => {
            let im = immersion.build(base)?;
            let x = field.build(im.grid())?;
            let r = variation::check_density_divergence(&im, &x)?;
            let mut t = Table::new(
                "density",
                &["node", "first_analytic", "first_fd", "second_analytic", "second_fd"],
            );
            for node in 0..im.grid().len() {
                t.push(vec![
                    node.into(),
                    r.first_analytic[node].into(),
                    r.first_fd[node].into(),
                    r.second_analytic[node].into(),
                    r.second_fd[node].into(),
                ]);
            }
            out.tables.push(t);
            let tol = variation::DENSITY_TOL * ts;
            out.results = json!({
                "first": report_json(&r.first, tol)?,
                "second": report_json(&r.second, tol)?,
                "second_integral": r.second_integral,
            });
        }
        Task::VariationConvexity { immersion, field, t_end, samples, t_start, reference } => {
            let im = immersion.build(base)?;
            let x = field.build(im.grid())?;
            if *samples < 3 || !(t_end > t_start) {
                return Err(CliError::invalid("need t_end > t_start and at least three samples"));
            }
            let rel: Vec<f64> = (0..*samples)
                .map(|k| (t_end - t_start) * k as f64 / (*samples - 1) as f64)
                .collect();
            let p = variation::convexity_experiment(&im, &x, &rel)?;
            let mut cols = vec!["t", "vol_j", "d2"];
            if reference.is_some() {
                cols.push("reference");
            }
            let mut t = Table::new("convexity", &cols);
            let mut ref_err = 0.0f64;
            for k in 0..rel.len() {
                let tk = t_start + rel[k];
                let mut row = vec![tk.into(), p.vol_j[k].into(), p.d2[k].into()];
                if let Some(r) = reference {
                    let v = r.eval(tk);
                    ref_err = ref_err.max((v - p.vol_j[k]).abs() / v.abs());
                    row.push(v.into());
                }
                t.push(row);
            }
            out.tables.push(t);
            let scale = p.vol_j.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let mut v = to_value(&p)?;
            v["t"] = json!(rel.iter().map(|r| t_start + r).collect::<Vec<_>>());
            v["convex_within_tolerance"] = Value::Bool(p.min_d2 >= -FLAT_CONVEXITY_TOL * ts * scale);
            v["strict_margin_met"] = Value::Bool(p.min_d2 >= STRICT_CONVEXITY_MARGIN * scale);
            if reference.is_some() {
                v["reference_max_rel_err"] = json!(ref_err);
            }
            out.results = v;
        }
        Task::VariationMixed { immersion, w, z } => {
            let im = immersion.build(base)?;
            let wv = im.j_push_forward(&w.build(im.grid())?);
            let zv = im.j_push_forward(&z.build(im.grid())?);
            let r = variation::check_mixed_second_variation(&im, &wv, &zv)?;
            out.tables.push(summary_table("summary", &[("mixed".into(), &r)]));
            out.results = json!({ "report": report_json(&r, variation::SECOND_VARIATION_TOL * ts)? });
        }
        Task::VariationStability { immersion, fields: specs } => {
            let im = immersion.build(base)?;
            let ys = fields(specs, &im)?;
            let s = variation::stability_check(&im, &ys)?;
            let named: Vec<(String, &VariationReport)> =
                s.reports.iter().enumerate().map(|(i, r)| (format!("field{i}"), r)).collect();
            out.tables.push(summary_table("summary", &named));
            out.results = to_value(&s)?;
        }
        Task::AmbientVerify { chart, points, count, radius } => {
            let ch = AmbientChart::from_descriptor(chart)?;
            let pts = match points {
                Some(p) => {
                    if p.iter().any(|q| q.len() != ch.real_dim()) {
                        return Err(CliError::invalid("sample points have the wrong dimension"));
                    }
                    p.clone()
                }
                None => sample_points(&ch, *count, *radius, sc.seed)?,
            };
            let r = verify_kahler_einstein(&ch, &pts)?;
            let mut t = Table::new("samples", &coord_header(ch.real_dim()));
            for p in &pts {
                t.push(p.iter().map(|&x| Cell::F(x)).collect());
            }
            out.tables.push(t);
            out.results = to_value(&r)?;
        }
    }
    Ok(out)
}

/// Seeded uniform points of the ball of `radius` that lie in the chart.
fn sample_points(ch: &AmbientChart, count: usize, radius: f64, seed: u64) -> Result<Vec<Vec<f64>>, CliError> {
    if !(radius > 0.0) || count == 0 || count > 4096 {
        return Err(CliError::invalid("need a positive radius and 1..=4096 points"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = ch.real_dim();
    let mut pts = Vec::with_capacity(count);
    let mut tries = 0;
    while pts.len() < count {
        tries += 1;
        if tries > 10_000 * count {
            return Err(CliError::invalid("could not sample points inside the chart"));
        }
        let p: Vec<f64> = (0..d).map(|_| rng.gen_range(-radius..radius)).collect();
        let r2: f64 = p.iter().map(|x| x * x).sum();
        if r2 <= radius * radius && ch.scheme_at(&p).is_ok() {
            pts.push(p);
        }
    }
    Ok(pts)
}

/// Reads a scenario file; relative paths inside it resolve against its directory.
pub fn load(path: &Path) -> Result<(Scenario, PathBuf), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    let sc = crate::scenario::parse_scenario(&text)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
    Ok((sc, base))
}
