use std::f64::consts::TAU;

use proptest::prelude::*;
use trgeo::ambient::AmbientChart;
use trgeo::curve_lab::{fourier_analyze, FourierCurve};
use trgeo::formats::{decode_immersion, encode_immersion};
use trgeo::immersion::{Formula, GridTorus, Immersion};
use num_complex::Complex64;

fn perturbed(r1: f64, r2: f64, a: f64, m: [i64; 2]) -> Immersion {
    let f = Formula::GraphPerturbedTorus { r1, r2, amplitude: a, mode: m };
    Immersion::from_formula(&GridTorus::torus(16, 16).unwrap(), &AmbientChart::flat(2), &f).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn density_is_between_zero_and_one(r1 in 0.5..2.0f64, r2 in 0.5..2.0f64, a in 0.0..0.3f64,
                                       m1 in -2i64..=2, m2 in -2i64..=2) {
        let im = perturbed(r1, r2 + 0.5, a, [m1, m2]);
        let d = im.densities().unwrap();
        for r in &d.rho {
            prop_assert!(*r > 0.0 && *r <= 1.0 + 1e-12);
        }
        let v = im.total_volumes().unwrap();
        prop_assert!(v.vol_j <= v.vol_g * (1.0 + 1e-12));
    }

    #[test]
    fn containers_round_trip(r1 in 0.5..2.0f64, a in 0.0..0.3f64) {
        let im = perturbed(r1, 2.0, a, [1, 0]);
        let back = decode_immersion(&encode_immersion(&im).unwrap()).unwrap();
        prop_assert_eq!(back.points(), im.points());
    }

    #[test]
    fn analysis_inverts_synthesis(coeffs in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 9)) {
        let terms: Vec<(i64, Complex64)> = coeffs
            .iter()
            .enumerate()
            .map(|(k, &(re, im))| (k as i64 - 4, Complex64::new(re, im) * 0.5f64.powi(k as i32)))
            .collect();
        let c = FourierCurve::from_terms(32, &terms).unwrap();
        let a = fourier_analyze(&c.synthesize(128), 32).unwrap();
        for (n, z) in &terms {
            prop_assert!((a.curve.coeff(*n) - z).norm() < 1e-13);
        }
    }

    #[test]
    fn rotating_a_circle_keeps_its_length(r in 0.2..0.8f64, phase in 0.0..TAU) {
        let grid = GridTorus::circle(64).unwrap();
        let pts: Vec<f64> = (0..64)
            .flat_map(|j| {
                let t = TAU * j as f64 / 64.0 + phase;
                [r * t.cos(), r * t.sin()]
            })
            .collect();
        let im = Immersion::new(grid, AmbientChart::poincare_disk(), pts, None).unwrap();
        let want = 4.0 * std::f64::consts::PI * r / (1.0 - r * r);
        prop_assert!((im.total_volumes().unwrap().vol_j - want).abs() < 1e-7 * want);
    }
}
