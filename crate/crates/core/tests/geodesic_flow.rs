use std::f64::consts::TAU;

use num_complex::Complex64;
use trgeo::ambient::AmbientChart;
use trgeo::curve_lab::{Family, FourierCurve};
use trgeo::geodesic_flow::{
    commutator_check, flow_spectral, flow_timestep, solve_bvp_annulus, stable_step, uniform_times,
    uniqueness_compare, DEFAULT_CUTOFF,
};
use trgeo::immersion::{Formula, GridTorus, Immersion, VectorFieldOnL};
use trgeo::Error;

fn make(sizes: &[usize], f: Formula) -> Immersion {
    let chart = AmbientChart::flat(sizes.len());
    Immersion::from_formula(&GridTorus::new(sizes).unwrap(), &chart, &f).unwrap()
}

fn unit_circle() -> Immersion {
    make(&[64], Formula::Circle { radius: 1.0, center: [0.0, 0.0] })
}

fn torus() -> Immersion {
    make(&[32, 32], Formula::ProductTorus { r1: 1.0, r2: 2.0 })
}

fn from_curve(c: &FourierCurve, m: usize) -> Immersion {
    let pts: Vec<f64> = c.synthesize(m).iter().flat_map(|z| [z.re, z.im]).collect();
    Immersion::new(GridTorus::circle(m).unwrap(), AmbientChart::flat(1), pts, None).unwrap()
}

fn axis(im: &Immersion, k: usize) -> VectorFieldOnL {
    VectorFieldOnL::coordinate(im.grid(), k, 1.0)
}

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

#[test]
fn circle_flows_to_smaller_circle() {
    let im = unit_circle();
    let f = flow_spectral(&im, &axis(&im, 0), &[0.0, 0.5]).unwrap();
    let want = make(&[64], Formula::Circle { radius: (-0.5f64).exp(), center: [0.0, 0.0] });
    assert!(max_gap(f.immersions[1].points(), want.points()) < 1e-13);
    assert!(f.residual.unwrap() < 1e-10);
}

#[test]
fn torus_flows_componentwise() {
    let im = torus();
    let f = flow_spectral(&im, &axis(&im, 0), &[0.3]).unwrap();
    let want = make(&[32, 32], Formula::ProductTorus { r1: (-0.3f64).exp(), r2: 2.0 });
    assert!(max_gap(f.immersions[0].points(), want.points()) < 1e-13);
}

#[test]
fn doubly_divergent_family_has_no_geodesic() {
    let c = Family::Neither.curve(64, 1.0).unwrap();
    let im = from_curve(&c, 256);
    for t in [0.05, -0.05] {
        assert!(matches!(
            flow_spectral(&im, &axis(&im, 0), &[t]),
            Err(Error::AmplificationExceeded { .. })
        ));
    }
}

#[test]
fn spectral_flow_has_the_group_property() {
    let c = Family::Annulus.curve(64, 0.1).unwrap();
    let im = from_curve(&c, 256);
    let x = axis(&im, 0);
    let first = flow_spectral(&im, &x, &[0.04]).unwrap();
    let twice = flow_spectral(&first.immersions[0], &x, &[0.06]).unwrap();
    let once = flow_spectral(&im, &x, &[0.1]).unwrap();
    assert!(max_gap(twice.immersions[0].points(), once.immersions[0].points()) < 1e-10);
}

#[test]
fn reversing_the_field_returns_home() {
    let c = Family::Annulus.curve(64, 0.1).unwrap();
    let im = from_curve(&c, 256);
    let fwd = flow_spectral(&im, &axis(&im, 0), &[0.1]).unwrap();
    let back_field = VectorFieldOnL::coordinate(im.grid(), 0, -1.0);
    let back = flow_spectral(&fwd.immersions[0], &back_field, &[0.1]).unwrap();
    assert!(max_gap(back.immersions[0].points(), im.points()) < 1e-8);
}

#[test]
fn time_stepping_matches_the_exact_circle() {
    let im = unit_circle();
    let x = axis(&im, 0);
    let dt = 0.5 * stable_step(&im, &x, DEFAULT_CUTOFF);
    let f = flow_timestep(&im, &x, 0.1, dt.min(0.01), DEFAULT_CUTOFF).unwrap();
    let s = flow_spectral(&im, &x, &f.times).unwrap();
    for (a, b) in f.immersions.iter().zip(&s.immersions) {
        assert!(max_gap(a.points(), b.points()) < 1e-6);
    }
}

#[test]
fn cross_scheme_agreement() {
    let e = make(&[64], Formula::Ellipse { a: 2.0, b: 1.0, center: [0.0, 0.0] });
    for (im, t, tol) in [(unit_circle(), 0.1, 1e-6), (e, 0.05, 1e-5), (torus(), 0.1, 1e-6)] {
        let u = uniqueness_compare(&im, &axis(&im, 0), t).unwrap();
        assert!(u.max_discrepancy < tol, "{}", u.max_discrepancy);
    }
}

#[test]
fn commutator_is_small_on_true_flows() {
    for im in [unit_circle(), torus()] {
        let x = axis(&im, 0);
        let f = flow_spectral(&im, &x, &uniform_times(0.1, 20)).unwrap();
        assert!(commutator_check(&f, &x).unwrap() < 1e-6);
    }
}

#[test]
fn commutator_detects_a_corrupted_frame() {
    let im = unit_circle();
    let x = axis(&im, 0);
    let mut f = flow_spectral(&im, &x, &uniform_times(0.1, 20)).unwrap();
    let mut pts = f.immersions[7].points().to_vec();
    pts[10] += 1e-3;
    f.immersions[7] = f.immersions[7].with_points(pts).unwrap();
    assert!(commutator_check(&f, &x).unwrap() > 1e-4);
}

#[test]
fn rough_data_blows_up() {
    let mut terms = vec![(1, Complex64::new(1.0, 0.0))];
    for n in 1..=256i64 {
        terms.push((-n, Complex64::new(0.05 * (-(n as f64).sqrt()).exp(), 0.0)));
    }
    let c = FourierCurve::from_terms(256, &terms).unwrap();
    let im = from_curve(&c, 1024);
    let x = axis(&im, 0);
    let dt = 0.5 * stable_step(&im, &x, DEFAULT_CUTOFF);
    match flow_timestep(&im, &x, 0.2, dt.min(0.01), DEFAULT_CUTOFF) {
        Err(Error::BlowUpDetected { time, .. }) => assert!(time < 0.2),
        other => panic!("expected blow-up, got {:?}", other.map(|f| f.times)),
    }
}

#[test]
fn concentric_circles_give_the_identity_map() {
    let outer = FourierCurve::unit_circle(32).unwrap();
    let inner = FourierCurve::from_terms(32, &[(1, Complex64::new(0.5, 0.0))]).unwrap();
    let r = solve_bvp_annulus(&outer, &inner, 3, 50).unwrap();
    assert!((r.rho - 0.5).abs() < 1e-10);
    assert!((r.coeff(1) - Complex64::new(1.0, 0.0)).norm() < 1e-10);
}

#[test]
fn joukowski_pair_recovers_the_modulus() {
    let j = |a: f64, b: f64| {
        FourierCurve::from_terms(32, &[(1, Complex64::new(a, 0.0)), (-1, Complex64::new(b, 0.0))]).unwrap()
    };
    // (w + 1/w)/2 on |w| = 1.5 and 1.1, rescaled by 1/1.5
    let r = solve_bvp_annulus(&j(0.75, 1.0 / 3.0), &j(0.55, 1.0 / 2.2), 4, 50).unwrap();
    assert!((r.rho - 1.1 / 1.5).abs() < 1e-6);
    assert!((r.coeff(1).re - 0.75).abs() < 1e-6 && (r.coeff(-1).re - 1.0 / 3.0).abs() < 1e-6);
    assert!(r.misfit_outer.max(r.misfit_inner) < 1e-8);
    assert!(r.history.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn crossing_curves_are_not_nested() {
    let outer = FourierCurve::unit_circle(32).unwrap();
    let inner = FourierCurve::ellipse(1.5, 0.3, 32).unwrap();
    assert!(matches!(solve_bvp_annulus(&outer, &inner, 3, 20), Err(Error::NotNested(_))));
}

#[test]
fn circle_radius_follows_the_exponential() {
    let im = unit_circle();
    let times = uniform_times(0.2, 4);
    let f = flow_spectral(&im, &axis(&im, 0), &times).unwrap();
    for (t, imt) in times.iter().zip(&f.immersions) {
        let v = imt.total_volumes().unwrap();
        assert!((v.vol_j - TAU * (-t).exp()).abs() < 1e-12);
    }
}
