use nalgebra::DMatrix;
use trgeo::ambient::{verify_kahler_einstein, AmbientChart, ChartDescriptor};
use trgeo::fd::FdScheme;

fn ring(n: usize, r: f64, dim: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|k| {
            let a = std::f64::consts::TAU * k as f64 / n as f64;
            let mut p = vec![0.0; dim];
            p[0] = r * a.cos();
            p[1] = r * a.sin();
            if dim == 4 {
                p[2] = 0.5 * r * (2.0 * a).sin();
                p[3] = 0.3 * r;
            }
            p
        })
        .collect()
}

#[test]
fn flat_metric_is_identity() {
    let c = AmbientChart::flat(2);
    let m = c.metric_at(&[1.0, -3.0, 0.5, 7.0]).unwrap();
    assert_eq!(m.g, DMatrix::identity(4, 4));
}

#[test]
fn poincare_metric_at_origin_and_half() {
    let c = AmbientChart::poincare_disk();
    let g0 = c.metric_at(&[0.0, 0.0]).unwrap().g;
    assert!((g0 - DMatrix::identity(2, 2) * 4.0).norm() < 1e-9);
    let g = c.metric_at(&[0.5, 0.0]).unwrap().g;
    let want = 4.0 / (0.75 * 0.75);
    assert!((g[(0, 0)] - want).abs() < 1e-8 && (g[(1, 1)] - want).abs() < 1e-8);
    assert!((want - 7.1111).abs() < 1e-4);
}

#[test]
fn flat_chart_reports_zero_einstein_constant() {
    let r = verify_kahler_einstein(&AmbientChart::flat(2), &ring(12, 1.0, 4)).unwrap();
    assert!(r.einstein_constant.abs() < 1e-12);
    assert!(r.max_nabla_j < 1e-12 && r.max_einstein_residual < 1e-12);
    assert!(r.is_einstein);
}

#[test]
fn poincare_disk_is_einstein() {
    let r = verify_kahler_einstein(&AmbientChart::poincare_disk(), &ring(16, 0.5, 2)).unwrap();
    assert!((r.einstein_constant + 1.0).abs() < 1e-6, "{}", r.einstein_constant);
    assert!(r.max_nabla_j < 1e-6);
    assert!(r.is_einstein);
}

#[test]
fn quartic_potential_is_kahler_but_not_einstein() {
    let r = verify_kahler_einstein(&AmbientChart::quartic(), &ring(16, 1.0, 4)).unwrap();
    assert!(r.max_nabla_j < 1e-6);
    assert!(!r.is_einstein, "{r:?}");
    assert!(r.relative_residual > 1e-2);
}

#[test]
fn too_few_samples_are_rejected() {
    assert!(verify_kahler_einstein(&AmbientChart::flat(1), &ring(4, 1.0, 2)).is_err());
}

#[test]
fn descriptors_round_trip_through_json() {
    for c in [
        AmbientChart::flat(2),
        AmbientChart::flat_quotient(2, 3.0),
        AmbientChart::poincare_disk(),
        AmbientChart::hyperbolic_ball(),
        AmbientChart::quartic(),
    ] {
        let text = serde_json::to_string(c.descriptor()).unwrap();
        let back: ChartDescriptor = serde_json::from_str(&text).unwrap();
        assert_eq!(&back, c.descriptor());
        let again = AmbientChart::from_descriptor(&back).unwrap();
        assert_eq!(again.real_dim(), c.real_dim());
    }
}

#[test]
fn unknown_chart_fields_are_rejected() {
    let bad = r#"{"name": "flat", "n": 2, "curvature": 1}"#;
    assert!(serde_json::from_str::<ChartDescriptor>(bad).is_err());
}

#[test]
fn quotient_chart_has_a_period() {
    let c = AmbientChart::flat_quotient(2, 3.0);
    assert_eq!(c.period(), Some(3.0));
    assert!(c.is_flat());
    assert_eq!(AmbientChart::poincare_disk().period(), None);
}

#[test]
fn halving_the_step_shrinks_the_ricci_residual() {
    // Ric = -g on the disk; compare the bare stencil at two steps
    let p = [0.3, 0.1];
    let r2: f64 = p.iter().map(|x| x * x).sum();
    let g = 4.0 / (1.0 - r2).powi(2);
    let residual = |h: f64| {
        let c = AmbientChart::poincare_disk().with_scheme(FdScheme::new(h, 0));
        let ric = c.ricci_at(&p).unwrap();
        (ric + DMatrix::identity(2, 2) * g).amax()
    };
    let coarse = residual(0.02);
    let fine = residual(0.01);
    assert!(coarse / fine >= 3.0, "{coarse:e} -> {fine:e}");
    let extrapolated = AmbientChart::poincare_disk().ricci_at(&p).unwrap();
    assert!((extrapolated + DMatrix::identity(2, 2) * g).amax() < fine);
}
