mod common;

use genpoisson::casimir::CasimirSet;
use genpoisson::darboux::DarbouxChart;
use genpoisson::dynamics::{IntegrateOptions, Method, PoissonSystem};
use genpoisson::expr::Expression;
use genpoisson::family::FamilySpec;
use genpoisson::numeric::RANK_TOL;
use genpoisson::presets;
use genpoisson::psi::{Interval, PsiTriple};
use genpoisson::rational::{canonical_pattern, format_rational, parse_rational};
use genpoisson::verify::{jacobi_residual, residual_report};
use num_traits::Zero;
use proptest::prelude::*;

use common::{random_instance, random_skew, rng};

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn symbolic_derivative_matches_differences(seed in any::<u64>(), x in prop::collection::vec(-2.0f64..2.0, 3)) {
        let mut r = rng(seed);
        let text = common::random_expression(&mut r, 3, 4);
        let e = common::parse(&text, 3);
        prop_assert!(common::gradient_fd_gap(&e, &x) <= 1e-6, "{}", text);
    }

    #[test]
    fn display_round_trips(seed in any::<u64>(), x in prop::collection::vec(-2.0f64..2.0, 3)) {
        let mut r = rng(seed);
        let e = common::parse(&common::random_expression(&mut r, 3, 4), 3);
        let back = Expression::parse(&e.to_string(), 3).unwrap();
        prop_assert_eq!(back.to_string(), e.to_string());
        prop_assert_eq!(back.eval(&x).unwrap().to_bits(), e.eval(&x).unwrap().to_bits());
    }

    #[test]
    fn rationals_round_trip(p in -10_000i64..10_000, d in 1i64..10_000) {
        let v = common::q(p, d);
        prop_assert_eq!(parse_rational(&format_rational(&v)).unwrap(), v);
    }
}

proptest! {
    #![proptest_config(config(32))]

    #[test]
    fn congruence_reaches_canonical_form(seed in any::<u64>(), n in 1usize..=8) {
        let mut r = rng(seed);
        let rank = 2 * (seed as usize % (n / 2 + 1));
        let s = random_skew(&mut r, n, rank);
        let red = s.skew_canonicalize().unwrap();
        prop_assert_eq!(red.rank, rank);
        prop_assert_eq!(&(&red.p * &s) * &red.p.transpose(), canonical_pattern(n, rank));
        let kernel = s.kernel_basis().unwrap();
        prop_assert_eq!(kernel.basis.len(), n - rank);
        for k in &kernel.basis {
            prop_assert!(s.mul_vec(k).iter().all(|v| v.is_zero()));
        }
    }

    #[test]
    fn inverse_is_exact(seed in any::<u64>(), n in 1usize..=6) {
        let mut r = rng(seed);
        let s = random_skew(&mut r, n, 2 * (n / 2));
        // S + I is invertible for skew S
        let mut shifted = s.clone();
        for i in 0..n {
            shifted[(i, i)] = common::q(1, 1);
        }
        let inv = shifted.invert().unwrap();
        prop_assert!((&inv * &shifted).is_identity());
    }
}

proptest! {
    #![proptest_config(config(24))]

    #[test]
    fn family_members_are_poisson(seed in any::<u64>(), n in 3usize..=6) {
        let mut r = rng(seed);
        let inst = random_instance(&mut r, n);
        let f = &inst.spec;
        let pts = inst.points(8, seed);
        let report = residual_report(
            |x: &[f64]| f.eval_j(x).map(|v| v.j),
            |x: &[f64]| f.eval_j_partials(x),
            &pts,
            Some(seed),
            RANK_TOL,
        ).unwrap();
        prop_assert_eq!(report.max_skew, 0.0);
        prop_assert!(report.max_jacobi_normalized < 1e-9);
        prop_assert!(report.max_jacobi_fd_normalized < 1e-6);
        prop_assert!(report.rank_histogram.keys().all(|&k| k == f.rank()));
    }

    #[test]
    fn casimirs_are_annihilated(seed in any::<u64>(), n in 3usize..=6) {
        let mut r = rng(seed);
        let inst = random_instance(&mut r, n);
        let cs = CasimirSet::build(&inst.spec);
        prop_assert_eq!(cs.len(), n - inst.spec.rank());
        for x in inst.points(8, seed) {
            prop_assert!(cs.annihilation(&x).unwrap().normalized < 1e-12);
            prop_assert_eq!(cs.independence_rank(&x).unwrap(), cs.len());
        }
    }

    #[test]
    fn chart_reduces_to_darboux_form(seed in any::<u64>(), n in 3usize..=6) {
        let mut r = rng(seed);
        let inst = random_instance(&mut r, n);
        let chart = DarbouxChart::new(&inst.spec);
        let pts = inst.points(8, seed);
        prop_assert!(chart.verify_canonical(&pts).unwrap() < 1e-9);
        let cs = CasimirSet::build(&inst.spec);
        let c = chart.casimir_relation(&cs).unwrap();
        for x in &pts {
            prop_assert!(chart.pushforward_deviation(x).unwrap() < 1e-9);
            let back = chart.from_z(&chart.to_z(x).unwrap()).unwrap();
            for (a, b) in back.iter().zip(x) {
                prop_assert!((a - b).abs() <= 1e-8 * b.abs().max(1.0));
            }
            // Casimirs are functions of the trailing z-coordinates only
            let z = chart.to_z(x).unwrap();
            let d = cs.values(x).unwrap();
            for (i, di) in d.iter().enumerate() {
                let via_z: f64 = (0..cs.len())
                    .map(|k| genpoisson::rational::rational_to_f64(&c[(i, k)]) * z[chart.rank() + k])
                    .sum();
                prop_assert!((di - via_z).abs() <= 1e-9 * di.abs().max(1.0));
            }
        }
    }
}

fn mixed_lv() -> FamilySpec {
    FamilySpec::separable(
        presets::separable_lv().s().clone(),
        vec![
            PsiTriple::linear(1.0, Interval::positive(), Some(1.0)).unwrap(),
            PsiTriple::constant(1.0, Interval::real_line(), Some(0.0)).unwrap(),
            PsiTriple::exponential(1.0, 0.5, Interval::real_line(), Some(0.0)).unwrap(),
        ],
    )
    .unwrap()
}

proptest! {
    #![proptest_config(config(8))]

    #[test]
    fn rk4_drift_refines_at_fourth_order(x1 in 0.5f64..2.0, x2 in 0.5f64..2.0, x3 in 0.5f64..2.0) {
        let f = mixed_lv();
        let x0 = [x1, x2, x3];
        let sys = PoissonSystem::new(&f, Expression::parse("x1 + x2 + x3", 3).unwrap(), &x0).unwrap();
        let run = |dt: f64| sys
            .integrate(&x0, &IntegrateOptions { method: Method::Rk4, t_end: 2.0, dt, tol: 0.0 })
            .unwrap();
        let (a, b) = (run(0.02), run(0.01));
        prop_assert!(b.d_drift()[0] <= a.d_drift()[0] / 8.0);
    }

    #[test]
    fn linear_casimir_is_conserved(x1 in 0.5f64..3.0, x2 in 0.5f64..3.0, x3 in 0.5f64..3.0, dt in 0.005f64..0.05) {
        let f = presets::kmk(1.0);
        let x0 = [x1, x2, x3];
        let sys = PoissonSystem::new(&f, Expression::parse("x3 + x3^2 / 2", 3).unwrap(), &x0).unwrap();
        let tr = sys
            .integrate(&x0, &IntegrateOptions { method: Method::Rk4, t_end: 1.0, dt, tol: 0.0 })
            .unwrap();
        prop_assert!(tr.d_drift()[0] <= 1e-12);
    }
}

#[test]
fn jacobi_detects_broken_families() {
    // a matrix of the family shape with one entry perturbed is no longer Poisson
    let f = presets::kmk(1.0);
    let x = [1.0, 2.0, 3.0];
    let perturbed = |p: &[f64]| -> Result<_, String> {
        let mut j = f.eval_j(p).map_err(|e| e.to_string())?.j;
        j[(0, 1)] += p[2];
        j[(1, 0)] -= p[2];
        Ok(j)
    };
    let partials = |p: &[f64]| -> Result<_, String> {
        let mut d = f.eval_j_partials(p).map_err(|e| e.to_string())?;
        d[2][(0, 1)] += 1.0;
        d[2][(1, 0)] -= 1.0;
        Ok(d)
    };
    assert!(jacobi_residual(perturbed, partials, &x).unwrap().normalized > 1e-3);
}

#[test]
fn equivariance_improves_with_tolerance() {
    let f = presets::kmk(1.0);
    let x0 = [1.0, 2.0, 3.0];
    let sys = PoissonSystem::new(&f, Expression::parse("x3", 3).unwrap(), &x0).unwrap();
    let chart = DarbouxChart::new(&f);
    let gaps: Vec<f64> = [1e-6, 1e-8, 1e-10]
        .iter()
        .map(|&tol| {
            let opts = IntegrateOptions { method: Method::Rk45, t_end: 1.0, dt: 0.25, tol };
            sys.flow_equivariance_check(&chart, &x0, &opts).unwrap()
        })
        .collect();
    assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "{gaps:?}");
}

#[test]
fn zero_field_is_equivariant_exactly() {
    let f = presets::kmk(2.5);
    let x0 = [1.0, 2.0, 3.0];
    let sys = PoissonSystem::new(&f, Expression::parse("x1 + x2 + x3", 3).unwrap(), &x0).unwrap();
    let chart = DarbouxChart::new(&f);
    let opts = IntegrateOptions { method: Method::Rk45, t_end: 1.0, dt: 0.1, tol: 1e-8 };
    assert!(sys.flow_equivariance_check(&chart, &x0, &opts).unwrap() < 1e-15);
}
