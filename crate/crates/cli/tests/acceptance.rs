//! Acceptance run: one line per criterion, non-zero exit if any fails.

use std::f64::consts::{PI, TAU};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trgeo::ambient::{apply_j, AmbientChart};
use trgeo::curve_lab::{self, Family, DirectionClass, FourierCurve, DEFAULT_MARGIN};
use trgeo::geodesic_flow::{self, DEFAULT_CUTOFF};
use trgeo::immersion::{rho_j_of_plane, Formula, GridTorus, Immersion, VectorFieldOnL};
use trgeo::variation;
use trgeo::Error;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, what: String) -> Outcome {
    if cond {
        Ok(what)
    } else {
        Err(what)
    }
}

fn fail<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn all(parts: Vec<Outcome>) -> Outcome {
    let mut ok = true;
    let mut msgs = Vec::new();
    for p in parts {
        match p {
            Ok(m) => msgs.push(m),
            Err(m) => {
                ok = false;
                msgs.push(format!("FAILED {m}"));
            }
        }
    }
    let joined = msgs.join("; ");
    if ok {
        Ok(joined)
    } else {
        Err(joined)
    }
}

fn formula(chart: AmbientChart, sizes: &[usize], f: Formula) -> Result<Immersion, String> {
    let grid = GridTorus::new(sizes).map_err(fail)?;
    Immersion::from_formula(&grid, &chart, &f).map_err(fail)
}

fn circle(chart: AmbientChart, radius: f64) -> Result<Immersion, String> {
    formula(chart, &[64], Formula::Circle { radius, center: [0.0, 0.0] })
}

fn product(sizes: &[usize], r1: f64, r2: f64) -> Result<Immersion, String> {
    formula(AmbientChart::flat(2), sizes, Formula::ProductTorus { r1, r2 })
}

fn axis(im: &Immersion, k: usize) -> VectorFieldOnL {
    VectorFieldOnL::coordinate(im.grid(), k, 1.0)
}

/// Independent oracle: `sqrt |det(e1, e2, J e1, J e2)|` for an orthonormal pair.
fn gram_rho(e1: &[f64], e2: &[f64]) -> f64 {
    let cols = [e1.to_vec(), e2.to_vec(), apply_j(e1), apply_j(e2)];
    let m = DMatrix::from_fn(4, 4, |i, j| cols[j][i]);
    (m.transpose() * &m).determinant().abs().sqrt().sqrt()
}

fn criterion_1() -> Outcome {
    let g = DMatrix::identity(4, 4);
    let mut worst = 0.0f64;
    for alpha in [0.0, PI / 6.0, PI / 4.0, PI / 3.0] {
        let e1 = vec![1.0, 0.0, 0.0, 0.0];
        let e2 = vec![0.0, alpha.sin(), alpha.cos(), 0.0];
        let r = rho_j_of_plane(&g, &[e1.clone(), e2.clone()]).map_err(fail)?;
        let oracle = gram_rho(&e1, &e2);
        worst = worst
            .max((r.value - alpha.cos()).abs())
            .max((r.gram - alpha.cos()).abs())
            .max((oracle - alpha.cos()).abs());
    }
    check(worst <= 1e-12, format!("max |rho_J - cos a| = {worst:.2e}"))
}

fn random_torus(rng: &mut ChaCha8Rng) -> Result<Immersion, String> {
    let grid = GridTorus::torus(32, 32).map_err(fail)?;
    let r1 = rng.gen_range(0.8..1.5);
    let r2 = rng.gen_range(1.5..2.5);
    let mut terms = Vec::new();
    for _ in 0..3 {
        let comp = rng.gen_range(0..4usize);
        let m = [rng.gen_range(-3i64..=3), rng.gen_range(-3i64..=3)];
        terms.push((comp, m, rng.gen_range(0.01..0.1), rng.gen_range(0.0..TAU)));
    }
    let mut pts = Vec::with_capacity(grid.len() * 4);
    for node in 0..grid.len() {
        let th = grid.angles(node);
        let mut p = [r1 * th[0].cos(), r1 * th[0].sin(), r2 * th[1].cos(), r2 * th[1].sin()];
        for &(c, m, a, ph) in &terms {
            p[c] += a * (m[0] as f64 * th[0] + m[1] as f64 * th[1] + ph).cos();
        }
        pts.extend(p);
    }
    Immersion::new(grid, AmbientChart::flat(2), pts, None).map_err(fail)
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut min_gap = f64::INFINITY;
    let mut bad = 0;
    for _ in 0..100 {
        let v = random_torus(&mut rng)?.total_volumes().map_err(fail)?;
        let gap = (v.vol_g - v.vol_j) / v.vol_g;
        min_gap = min_gap.min(gap);
        if gap <= 0.0 || gap.is_nan() {
            bad += 1;
        }
    }
    let mut worst = 0.0f64;
    for (r1, r2) in [(1.0, 1.0), (1.0, 2.0), (0.5, 3.0)] {
        let v = product(&[64, 64], r1, r2)?.total_volumes().map_err(fail)?;
        let exact = 4.0 * PI * PI * r1 * r2;
        worst = worst
            .max((v.vol_j - exact).abs() / exact)
            .max((v.vol_g - exact).abs() / exact);
    }
    all(vec![
        check(bad == 0, format!("100 perturbed tori, Vol_J < Vol_g (min relative gap {min_gap:.2e})")),
        check(worst <= 1e-9, format!("product tori rel err {worst:.2e}")),
    ])
}

fn variation_line(name: &str, r: &variation::VariationReport, tol: f64) -> Outcome {
    let order = match r.richardson_order {
        _ if r.exact_at_roundoff => "exact".to_string(),
        Some(p) => format!("order {p:.2}"),
        None => "no order".to_string(),
    };
    check(
        r.passes(tol),
        format!("{name} {:.6} vs {:.6} rel {:.1e} {order}", r.analytic, r.fd, r.rel_err),
    )
}

fn criterion_3() -> Outcome {
    let tol = variation::FIRST_VARIATION_TOL;
    let c = circle(AmbientChart::flat(1), 1.0)?;
    let t = product(&[32, 32], 1.0, 2.0)?;
    let p = circle(AmbientChart::poincare_disk(), 0.5)?;
    let rc = variation::check_first_variation(&c, &axis(&c, 0)).map_err(fail)?;
    let rt = variation::check_first_variation(&t, &axis(&t, 0)).map_err(fail)?;
    let rp = variation::check_first_variation(&p, &axis(&p, 0)).map_err(fail)?;
    all(vec![
        variation_line("circle", &rc, tol),
        check((rc.analytic + TAU).abs() < 1e-9, format!("circle analytic = -2pi ({:.1e})", rc.analytic + TAU)),
        variation_line("torus", &rt, tol),
        variation_line("poincare", &rp, tol),
    ])
}

fn csch2_closed(t: f64) -> f64 {
    let csch = 1.0 / t.sinh();
    let coth = t.cosh() / t.sinh();
    csch * (csch * csch + coth * coth)
}

fn criterion_4() -> Outcome {
    let tol = variation::SECOND_VARIATION_TOL;
    let c = circle(AmbientChart::flat(1), 1.0)?;
    let rc = variation::check_second_variation_kahler(&c, &axis(&c, 0)).map_err(fail)?;
    let p = circle(AmbientChart::poincare_disk(), (-1.0f64).exp())?;
    let rp = variation::check_second_variation_kahler(&p, &axis(&p, 0)).map_err(fail)?;
    let closed = TAU * csch2_closed(1.0);
    let cf = (rp.fd - closed).abs() / closed;
    let ca = (rp.analytic - closed).abs() / closed;
    all(vec![
        variation_line("circle", &rc, tol),
        check((rc.analytic - TAU).abs() / TAU <= tol, format!("circle analytic vs 2pi {:.1e}", (rc.analytic - TAU).abs() / TAU)),
        variation_line("poincare", &rp, tol),
        check(cf <= tol && ca <= tol, format!("poincare vs closed form {closed:.8}: fd {cf:.1e}, analytic {ca:.1e}")),
    ])
}

fn convexity_line(name: &str, im: &Immersion, times: &[f64], bound: f64) -> Outcome {
    let p = variation::convexity_experiment(im, &axis(im, 0), times).map_err(fail)?;
    let scale = p.vol_j.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let ratio = p.min_d2 / scale;
    check(ratio >= bound, format!("{name} min d2/Vol_J {ratio:.2e} (bound {bound:.0e})"))
}

fn criterion_5() -> Outcome {
    let samples = |len: f64| -> Vec<f64> { (0..20).map(|k| len * k as f64 / 19.0).collect() };
    let c = circle(AmbientChart::flat(1), 1.0)?;
    let t = product(&[32, 32], 1.0, 2.0)?;
    let p = circle(AmbientChart::poincare_disk(), (-0.5f64).exp())?;
    all(vec![
        convexity_line("flat circle", &c, &samples(1.0), -1e-6),
        convexity_line("flat torus", &t, &samples(1.0), -1e-6),
        convexity_line("poincare circles t in [0.5,2]", &p, &samples(1.5), 1e-4),
    ])
}

fn criterion_6() -> Outcome {
    let radii: Vec<f64> = (1..=10).map(|k| 1.1 - 0.1 * k as f64).collect();
    let cubic = FourierCurve::from_terms(
        32,
        &[(1, Complex64::new(1.0, 0.0)), (3, Complex64::new(0.2, 0.0))],
    )
    .map_err(fail)?;
    let ellipse = FourierCurve::ellipse(2.0, 1.0, 32).map_err(fail)?;
    let curves = [
        ("circle", FourierCurve::unit_circle(32).map_err(fail)?),
        ("ellipse", ellipse.clone()),
        ("z+0.2z^3", cubic),
    ];
    let mut parts = Vec::new();
    for (name, c) in &curves {
        let p = curve_lab::length_profile(c, &radii, DEFAULT_MARGIN).map_err(fail)?;
        let scale = p.lambda.iter().fold(0.0f64, |m, v| m.max(*v));
        let min = p.d2.iter().filter(|v| v.is_finite()).fold(f64::INFINITY, |m, &v| m.min(v));
        parts.push(check(min >= -1e-9 * scale, format!("{name} min d2/Lambda {:.2e}", min / scale)));
        if c.terms().all(|(n, a)| n >= 0 || a.norm() == 0.0) {
            // radii are sorted decreasing
            let mono = p.lambda.windows(2).all(|w| w[1] < w[0]);
            parts.push(check(mono, format!("{name} Lambda increasing in r")));
        }
    }
    let s = curve_lab::arclength_resample(&ellipse, 256).map_err(fail)?;
    let fields: [&dyn Fn(f64) -> f64; 3] = [
        &|_| 1.0,
        &|x: f64| 1.0 + 0.3 * x.cos(),
        &|x: f64| 0.5 * (2.0 * x + 0.4).cos(),
    ];
    let mut worst = 0.0f64;
    for f in fields {
        let r = curve_lab::second_variation_length(&s, f).map_err(fail)?;
        worst = worst.max(r.rel_err);
    }
    parts.push(check(worst <= 1e-4, format!("length second variation, 3 fields, max rel {worst:.1e}")));
    all(parts)
}

fn criterion_7() -> Outcome {
    let expected = [
        (Family::Annulus, DirectionClass::GeodesicAnnulus),
        (Family::Ray, DirectionClass::RayOnly),
        (Family::Neither, DirectionClass::NoRay),
    ];
    let mut parts = Vec::new();
    for (fam, want) in expected {
        let c = fam.curve(256, 1.0).map_err(fail)?;
        let cls = curve_lab::classify_direction(&c, DEFAULT_MARGIN).map_err(fail)?;
        parts.push(check(cls.class == want, format!("{fam:?} -> {:?}", cls.class)));
    }
    all(parts)
}

fn criterion_8() -> Outcome {
    let outer = FourierCurve::unit_circle(32).map_err(fail)?;
    let inner = FourierCurve::from_terms(32, &[(1, Complex64::new(0.5, 0.0))]).map_err(fail)?;
    let r = geodesic_flow::solve_bvp_annulus(&outer, &inner, 4, 50).map_err(fail)?;
    let off = r
        .coeffs
        .iter()
        .map(|&(n, re, im)| if n == 1 { ((re - 1.0).powi(2) + im * im).sqrt() } else { re.hypot(im) })
        .fold(0.0f64, f64::max);
    let j = |a: f64, b: f64| FourierCurve::from_terms(32, &[(1, Complex64::new(a, 0.0)), (-1, Complex64::new(b, 0.0))]);
    let jo = j(0.75, 1.0 / 3.0).map_err(fail)?;
    let ji = j(0.55, 1.0 / 2.2).map_err(fail)?;
    let rj = geodesic_flow::solve_bvp_annulus(&jo, &ji, 4, 50).map_err(fail)?;
    let misfit = rj.misfit_outer.max(rj.misfit_inner);
    all(vec![
        check((r.rho - 0.5).abs() <= 1e-10, format!("concentric rho err {:.1e}", (r.rho - 0.5).abs())),
        check(off <= 1e-10, format!("g(z) = z to {off:.1e}")),
        check((rj.rho - 1.1 / 1.5).abs() <= 1e-6, format!("joukowski modulus err {:.1e}", (rj.rho - 1.1 / 1.5).abs())),
        check(misfit < 1e-8, format!("joukowski misfit {misfit:.1e}")),
    ])
}

fn criterion_9() -> Outcome {
    let mut parts = Vec::new();
    let c = circle(AmbientChart::flat(1), 1.0)?;
    let e = formula(AmbientChart::flat(1), &[64], Formula::Ellipse { a: 2.0, b: 1.0, center: [0.0, 0.0] })?;
    let t = product(&[32, 32], 1.0, 2.0)?;
    for (name, im) in [("circle", &c), ("ellipse", &e), ("torus", &t)] {
        let u = geodesic_flow::uniqueness_compare(im, &axis(im, 0), 0.1).map_err(fail)?;
        parts.push(check(u.max_discrepancy <= 1e-5, format!("{name} {:.1e}", u.max_discrepancy)));
    }
    let mut terms = vec![(1, Complex64::new(1.0, 0.0))];
    for n in 1..=256i64 {
        terms.push((-n, Complex64::new(0.05 * (-(n as f64).sqrt()).exp(), 0.0)));
    }
    let curve = FourierCurve::from_terms(256, &terms).map_err(fail)?;
    let pts: Vec<f64> = curve.synthesize(1024).iter().flat_map(|z| [z.re, z.im]).collect();
    let grid = GridTorus::circle(1024).map_err(fail)?;
    let im = Immersion::new(grid, AmbientChart::flat(1), pts, None).map_err(fail)?;
    let x = axis(&im, 0);
    let dt = 0.5 * geodesic_flow::stable_step(&im, &x, DEFAULT_CUTOFF);
    parts.push(match geodesic_flow::flow_timestep(&im, &x, 0.2, dt.min(0.01), DEFAULT_CUTOFF) {
        Err(Error::BlowUpDetected { time, .. }) => check(time < 0.2, format!("blow-up detected at t = {time:.3}")),
        Err(e) => Err(format!("unexpected error {e}")),
        Ok(_) => Err("no blow-up detected".into()),
    });
    all(parts)
}

fn scenario_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn run_suite(threads: usize, out: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(scenario_dir())
        .map_err(fail)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    files.sort();
    let mut results = Vec::new();
    for f in files {
        let name = f.file_stem().unwrap().to_string_lossy().to_string();
        let dir = out.join(&name);
        let status = Command::new(env!("CARGO_BIN_EXE_trgeo"))
            .args(["run", "--threads", &threads.to_string(), "--scenario"])
            .arg(&f)
            .arg("--out")
            .arg(&dir)
            .output()
            .map_err(fail)?;
        if !matches!(status.status.code(), Some(0 | 3)) {
            return Err(format!("{name} exited with {:?}", status.status.code()));
        }
        results.push((name, std::fs::read(dir.join("results.json")).map_err(fail)?));
    }
    Ok(results)
}

fn criterion_10() -> Outcome {
    let base = std::env::temp_dir().join(format!("trgeo-acceptance-{}", std::process::id()));
    let a = run_suite(1, &base.join("t1"))?;
    let b = run_suite(8, &base.join("t8"))?;
    let _ = std::fs::remove_dir_all(&base);
    let differing: Vec<&str> = a
        .iter()
        .zip(&b)
        .filter(|(x, y)| x != y)
        .map(|(x, _)| x.0.as_str())
        .collect();
    check(
        differing.is_empty() && a.len() == b.len(),
        format!("{} scenarios byte-identical across 1 and 8 threads {differing:?}", a.len()),
    )
}

fn main() {
    // `cargo test -- --list` and filters are not meaningful for this target
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let criteria: [Criterion; 10] = [
        ("rho_J of static planes", criterion_1),
        ("Vol_J <= Vol_g", criterion_2),
        ("first variation", criterion_3),
        ("second variation", criterion_4),
        ("convexity along geodesics", criterion_5),
        ("length convexity", criterion_6),
        ("existence trichotomy", criterion_7),
        ("annulus boundary value problem", criterion_8),
        ("uniqueness and blow-up", criterion_9),
        ("determinism", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let r = f();
        let secs = start.elapsed().as_secs_f64();
        match r {
            Ok(msg) => println!("criterion {:>2} PASS {name} ({secs:.2}s): {msg}", i + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {:>2} FAIL {name} ({secs:.2}s): {msg}", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
