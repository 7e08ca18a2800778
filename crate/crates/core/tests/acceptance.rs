//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use genpoisson::casimir::CasimirSet;
use genpoisson::darboux::DarbouxChart;
use genpoisson::dynamics::{IntegrateOptions, Method, PoissonSystem};
use genpoisson::expr::Expression;
use genpoisson::family::FamilySpec;
use genpoisson::numeric::RANK_TOL;
use genpoisson::presets;
use genpoisson::psi::{Interval, PsiKind, PsiTriple};
use genpoisson::rational::canonical_pattern;
use genpoisson::verify::{residual_report, sample_points};
use rand::Rng;

use common::{instances, random_skew, rng};

const INSTANCE_SEED: u64 = 20_240_601;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs()
    }
}

fn kmk_points(count: usize, seed: u64) -> Vec<Vec<f64>> {
    sample_points(&[(0.1, 10.0); 3], count, seed, |_| true)
}

fn kmk_reference(r: f64, x: &[f64]) -> [[f64; 3]; 3] {
    let a = r * x[0] * x[1];
    [[0.0, a, -a], [-a, 0.0, a], [a, -a, 0.0]]
}

fn kmk_reconstruction() -> Outcome {
    let mut worst = 0.0f64;
    for (r, seed) in [(1.0, 11), (2.5, 12)] {
        let f = presets::kmk(r);
        for x in kmk_points(100, seed) {
            let j = f.eval_j(&x).unwrap().j;
            let reference = kmk_reference(r, &x);
            for a in 0..3 {
                for b in 0..3 {
                    worst = worst.max(rel(j[(a, b)], reference[a][b]));
                }
            }
        }
    }
    outcome(worst <= 1e-12, format!("max relative entry error {worst:.3e} (limit 1e-12)"))
}

fn kmk_casimir() -> Outcome {
    let mut count_ok = true;
    let mut value_gap = 0.0f64;
    let mut annihilation = 0.0f64;
    for (r, seed) in [(1.0, 21), (2.5, 22)] {
        let cs = CasimirSet::build(&presets::kmk(r));
        count_ok &= cs.len() == 1;
        let pts = kmk_points(100, seed);
        // anchor 0 for the third coordinate: the additive constant is zero
        for x in &pts {
            let d = cs.values(x).unwrap()[0];
            value_gap = value_gap.max((d - (x[0] + x[1] + x[2])).abs());
            annihilation = annihilation.max(cs.annihilation(x).unwrap().raw);
        }
    }
    outcome(
        count_ok && value_gap <= 1e-12 && annihilation <= 1e-12,
        format!(
            "one Casimir: {count_ok}, value error {value_gap:.3e}, annihilation {annihilation:.3e} (limits 1e-12)"
        ),
    )
}

fn kmk_darboux() -> Outcome {
    let mut worst = 0.0f64;
    for (r, seed) in [(1.0, 31), (2.5, 32)] {
        let chart = DarbouxChart::new(&presets::kmk(r));
        for x in kmk_points(100, seed) {
            let y = chart.to_y(&x).unwrap();
            let reference = [x[0].ln() / r.sqrt(), x[1].ln() / r.sqrt(), x[0] + x[1] + x[2]];
            for (a, b) in y.iter().zip(reference) {
                worst = worst.max((a - b).abs() / b.abs().max(1.0));
            }
        }
    }
    outcome(worst <= 1e-10, format!("max relative error {worst:.3e} (limit 1e-10)"))
}

fn jacobi_suite(corpus: &[common::Instance]) -> Outcome {
    let mut analytic = 0.0f64;
    let mut fd = 0.0f64;
    let mut rank_ok = true;
    for (k, inst) in corpus.iter().enumerate() {
        let f = &inst.spec;
        let pts = inst.points(50, 400 + k as u64);
        let report = residual_report(
            |x: &[f64]| f.eval_j(x).map(|v| v.j),
            |x: &[f64]| f.eval_j_partials(x),
            &pts,
            None,
            RANK_TOL,
        )
        .unwrap();
        analytic = analytic.max(report.max_jacobi_normalized);
        fd = fd.max(report.max_jacobi_fd_normalized);
        rank_ok &= report.rank_histogram.keys().all(|&r| r == f.rank());
    }
    outcome(
        analytic < 1e-9 && fd < 1e-6 && rank_ok,
        format!(
            "{} instances: analytic {analytic:.3e} (< 1e-9), finite-difference {fd:.3e} (< 1e-6), rank matches: {rank_ok}",
            corpus.len()
        ),
    )
}

fn pushforward_suite(corpus: &[common::Instance]) -> Outcome {
    let mut push = 0.0f64;
    let mut canon = 0.0f64;
    for (k, inst) in corpus.iter().enumerate() {
        let chart = DarbouxChart::new(&inst.spec);
        let pts = inst.points(50, 500 + k as u64);
        for x in &pts {
            push = push.max(chart.pushforward_deviation(x).unwrap());
        }
        canon = canon.max(chart.verify_canonical(&pts).unwrap());
    }
    let mut r = rng(55);
    let mut exact = 0;
    for i in 0..20 {
        let n = 2 + i % 7;
        let rank = 2 * r.gen_range(0..=n / 2);
        let s = random_skew(&mut r, n, rank);
        let red = s.skew_canonicalize().unwrap();
        let ok = red.rank == rank
            && red.p.invert().is_ok()
            && &(&red.p * &s) * &red.p.transpose() == canonical_pattern(n, rank);
        exact += ok as usize;
    }
    outcome(
        push < 1e-9 && canon < 1e-9 && exact == 20,
        format!("pushforward {push:.3e} (< 1e-9), canonical {canon:.3e} (< 1e-9), exact congruences {exact}/20"),
    )
}

/// `ξ` from the closed-form parameters, anchored at `w0`.
fn xi_oracle(p: &PsiTriple, w: f64) -> f64 {
    let w0 = p.anchor();
    match p.kind() {
        PsiKind::Constant { c } => (w - w0) / c,
        PsiKind::Linear { a } => (w / w0).ln() / a,
        PsiKind::Exponential { a, b } => ((-b * w0).exp() - (-b * w).exp()) / (a * b),
        PsiKind::Custom(_) => w.atan() - w0.atan(),
        PsiKind::Power { .. } => unreachable!(),
    }
}

fn separable_consistency() -> Outcome {
    let mut r = rng(66);
    let mut j_gap = 0.0f64;
    let mut d_gap = 0.0f64;
    let mut counts_ok = true;
    for k in 0..10 {
        let n = 2 + k % 5;
        let rank = 2 * r.gen_range(0..=n / 2);
        let s = random_skew(&mut r, n, rank);
        let psis: Vec<PsiTriple> = (0..n)
            .map(|_| match r.gen_range(0..4) {
                0 => PsiTriple::constant(1.5, Interval::real_line(), None).unwrap(),
                1 => PsiTriple::linear(2.0, Interval::positive(), None).unwrap(),
                2 => PsiTriple::exponential(-1.0, 0.5, Interval::real_line(), None).unwrap(),
                _ => PsiTriple::custom("1 + w^2", Interval::real_line(), None).unwrap(),
            })
            .collect();
        let f = FamilySpec::separable(s.clone(), psis).unwrap();
        let cs = CasimirSet::build(&f);
        counts_ok &= cs.len() == n - rank && !cs.kernel_defect();
        let sf = s.to_f64();
        for x in sample_points(&vec![(0.1, 3.0); n], 40, 600 + k as u64, |_| true) {
            let j = f.eval_j(&x).unwrap().j;
            let psi: Vec<f64> = f.psis().iter().zip(&x).map(|(p, &w)| p.psi(w).unwrap()).collect();
            for a in 0..n {
                for b in 0..n {
                    let reference = sf[(a, b)] * psi[a] * psi[b];
                    j_gap = j_gap.max((j[(a, b)] - reference).abs() / reference.abs().max(1.0));
                }
            }
            let xi: Vec<f64> = f.psis().iter().zip(&x).map(|(p, &w)| xi_oracle(p, w)).collect();
            let values = cs.values(&x).unwrap();
            for (kv, d) in cs.kernel().iter().zip(values) {
                let reference: f64 = kv
                    .iter()
                    .zip(&xi)
                    .map(|(c, v)| genpoisson::rational::rational_to_f64(c) * v)
                    .sum();
                d_gap = d_gap.max((d - reference).abs() / reference.abs().max(1.0));
            }
        }
    }
    outcome(
        j_gap <= 1e-13 && d_gap <= 1e-10 && counts_ok,
        format!("structure matrix {j_gap:.3e} (<= 1e-13), Casimirs {d_gap:.3e} (<= 1e-10), counts ok: {counts_ok}"),
    )
}

fn dynamics() -> Outcome {
    let kmk = presets::kmk(1.0);
    let x0 = [1.0, 2.0, 3.0];
    let sys = PoissonSystem::new(&kmk, Expression::parse("x3", 3).unwrap(), &x0).unwrap();
    let rk4 = |t_end: f64, dt: f64| IntegrateOptions {
        method: Method::Rk4,
        t_end,
        dt,
        tol: 0.0,
    };
    let linear = sys.integrate(&x0, &rk4(10.0, 1e-3)).unwrap().d_drift()[0];

    // cyclic S with psi = (w, 1, e^{w/2}): D = ln x1 + x2 + 2(1 - e^{-x3/2})
    let mixed = FamilySpec::separable(
        presets::separable_lv().s().clone(),
        vec![
            PsiTriple::linear(1.0, Interval::positive(), Some(1.0)).unwrap(),
            PsiTriple::constant(1.0, Interval::real_line(), Some(0.0)).unwrap(),
            PsiTriple::exponential(1.0, 0.5, Interval::real_line(), Some(0.0)).unwrap(),
        ],
    )
    .unwrap();
    let m0 = [1.0, 2.0, 3.0];
    let m_sys = PoissonSystem::new(&mixed, Expression::parse("x1 + x2 + x3", 3).unwrap(), &m0).unwrap();
    let coarse = m_sys.integrate(&m0, &rk4(10.0, 0.025)).unwrap().d_drift()[0];
    let fine = m_sys.integrate(&m0, &rk4(10.0, 0.0125)).unwrap().d_drift()[0];
    let ratio = coarse / fine;

    let chart = DarbouxChart::new(&kmk);
    let opts = IntegrateOptions {
        method: Method::Rk45,
        t_end: 1.0,
        dt: 0.05,
        tol: 1e-10,
    };
    let gap = sys.flow_equivariance_check(&chart, &x0, &opts).unwrap();
    outcome(
        linear <= 1e-12 && (12.0..=20.0).contains(&ratio) && gap < 1e-7,
        format!(
            "linear Casimir drift {linear:.3e} (<= 1e-12), refinement ratio {ratio:.2} ({coarse:.3e}/{fine:.3e}, in [12, 20]), equivariance {gap:.3e} (< 1e-7)"
        ),
    )
}

fn round_trips(corpus: &[common::Instance]) -> Outcome {
    let mut y_gap = 0.0f64;
    let mut z_gap = 0.0f64;
    let gap = |a: &[f64], b: &[f64]| {
        a.iter()
            .zip(b)
            .map(|(p, q)| (p - q).abs() / q.abs().max(1.0))
            .fold(0.0, f64::max)
    };
    let mut charts: Vec<(DarbouxChart, Vec<Vec<f64>>)> = corpus
        .iter()
        .enumerate()
        .map(|(k, inst)| (DarbouxChart::new(&inst.spec), inst.points(1000, 800 + k as u64)))
        .collect();
    charts.push((DarbouxChart::new(&presets::kmk(2.5)), kmk_points(1000, 899)));
    for (chart, pts) in &charts {
        for x in pts {
            let y = chart.to_y(x).unwrap();
            y_gap = y_gap.max(gap(&chart.from_y(&y).unwrap(), x));
            let z = chart.to_z(x).unwrap();
            z_gap = z_gap.max(gap(&chart.from_z(&z).unwrap(), x));
        }
    }
    let mut r = rng(88);
    let mut expr_gap = 0.0f64;
    for _ in 0..200 {
        let text = common::random_expression(&mut r, 3, 4);
        let e = common::parse(&text, 3);
        for _ in 0..5 {
            let x: Vec<f64> = (0..3).map(|_| r.gen_range(-2.0..2.0)).collect();
            expr_gap = expr_gap.max(common::gradient_fd_gap(&e, &x));
        }
    }
    outcome(
        y_gap <= 1e-8 && z_gap <= 1e-8 && expr_gap <= 1e-6,
        format!(
            "from_y/to_y {y_gap:.3e}, from_z/to_z {z_gap:.3e} (<= 1e-8 over {} charts x 1000 points), derivative vs FD {expr_gap:.3e} (<= 1e-6, 200 expressions)",
            charts.len()
        ),
    )
}

fn main() -> ExitCode {
    let start = Instant::now();
    let corpus = instances(20, INSTANCE_SEED);
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("KMK structure matrix", Box::new(kmk_reconstruction)),
        ("KMK Casimir", Box::new(kmk_casimir)),
        ("KMK Darboux map", Box::new(kmk_darboux)),
        ("Jacobi property suite", Box::new(|| jacobi_suite(&corpus))),
        ("pushforward and canonical form", Box::new(|| pushforward_suite(&corpus))),
        ("separable consistency", Box::new(separable_consistency)),
        ("dynamics", Box::new(dynamics)),
        ("round trips", Box::new(|| round_trips(&corpus))),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let o = run();
        failed += !o.pass as usize;
        println!(
            "criterion {} [{}] {}: {} ({:.2}s)",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            name,
            o.detail,
            t.elapsed().as_secs_f64()
        );
    }
    println!(
        "acceptance: {}/{} criteria passed in {:.2}s",
        criteria.len() - failed,
        criteria.len(),
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
