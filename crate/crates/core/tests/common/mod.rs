#![allow(dead_code)]

use genpoisson::expr::Expression;
use genpoisson::family::FamilySpec;
use genpoisson::psi::{Interval, PsiTriple};
use genpoisson::rational::{canonical_pattern, Rational, RationalMatrix};
use num_traits::Zero;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn q(p: i64, d: i64) -> Rational {
    Rational::new(p.into(), d.into())
}

fn small_rational(rng: &mut ChaCha8Rng) -> Rational {
    q(rng.gen_range(-3..=3), *[1, 1, 2, 3].choose(rng).unwrap())
}

/// Random rational skew matrix of the given even rank, `B·C·Bᵀ` with `C`
/// canonical.
pub fn random_skew(rng: &mut ChaCha8Rng, n: usize, rank: usize) -> RationalMatrix {
    assert!(rank.is_multiple_of(2) && rank <= n);
    let c = canonical_pattern(rank, rank);
    loop {
        let mut b = RationalMatrix::zeros(n, rank);
        for i in 0..n {
            for j in 0..rank {
                b[(i, j)] = small_rational(rng);
            }
        }
        let s = &(&b * &c) * &b.transpose();
        if s.rank() == rank {
            return s;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsiChoice {
    Constant,
    Linear,
    Exponential,
    Custom,
}

pub struct Instance {
    pub spec: FamilySpec,
    pub choices: Vec<PsiChoice>,
    /// Finite region to draw interior points from.
    pub region: Vec<(f64, f64)>,
}

impl Instance {
    pub fn points(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let pts = genpoisson::verify::sample_points(&self.region, count, seed, |x| {
            self.spec.check_domain(x).is_ok()
        });
        assert_eq!(pts.len(), count, "sampler starved");
        pts
    }
}

/// Random family member on the positive orthant. Rows of `Λ` feeding a
/// ψ defined only on `(0,∞)` are nonnegative with a positive entry, so
/// `λ(x) > 0` whenever `x > 0`. Draws with `max|L_ij| > 3` are rejected.
pub fn random_instance(rng: &mut ChaCha8Rng, n: usize) -> Instance {
    let rank = 2 * rng.gen_range(0..=n / 2);
    let s = random_skew(rng, n, rank);
    let all = [
        PsiChoice::Constant,
        PsiChoice::Linear,
        PsiChoice::Exponential,
        PsiChoice::Custom,
    ];
    let choices: Vec<PsiChoice> = (0..n).map(|_| *all.choose(rng).unwrap()).collect();
    let psis: Vec<PsiTriple> = choices
        .iter()
        .map(|c| match c {
            PsiChoice::Constant => {
                let v = *[1.0, 2.0, -0.5, 1.5].choose(rng).unwrap();
                PsiTriple::constant(v, Interval::real_line(), None).unwrap()
            }
            PsiChoice::Linear => {
                let a = *[1.0, 2.0, 0.5, -1.0].choose(rng).unwrap();
                PsiTriple::linear(a, Interval::positive(), None).unwrap()
            }
            PsiChoice::Exponential => {
                let a = *[1.0, -1.0, 2.0].choose(rng).unwrap();
                let b = *[0.25, -0.25, 0.125].choose(rng).unwrap();
                PsiTriple::exponential(a, b, Interval::real_line(), None).unwrap()
            }
            PsiChoice::Custom => PsiTriple::custom("1 + w^2", Interval::real_line(), None).unwrap(),
        })
        .collect();
    let l = loop {
        let mut m = RationalMatrix::zeros(n, n);
        for i in 0..n {
            let positive = choices[i] == PsiChoice::Linear;
            loop {
                for j in 0..n {
                    let v = if positive {
                        rng.gen_range(0..=2)
                    } else {
                        rng.gen_range(-2..=2)
                    };
                    m[(i, j)] = q(v, 1);
                }
                if !positive || m.row(i).iter().any(|v| !v.is_zero()) {
                    break;
                }
            }
        }
        if m.determinant().unwrap().is_zero() {
            continue;
        }
        // keep L moderately conditioned so float round-off stays far below tolerances
        let l = m.invert().unwrap();
        if l.to_f64().amax() <= 3.0 {
            break l;
        }
    };
    let spec = FamilySpec::build(s, l, psis, vec![Interval::positive(); n]).unwrap();
    Instance {
        spec,
        choices,
        region: vec![(0.2, 2.0); n],
    }
}

/// The fixed corpus of random instances used across suites.
pub fn instances(count: usize, seed: u64) -> Vec<Instance> {
    let mut r = rng(seed);
    (0..count).map(|i| random_instance(&mut r, 3 + i % 4)).collect()
}

/// Random expression text in `x1..x{dim}` that evaluates everywhere.
pub fn random_expression(rng: &mut ChaCha8Rng, dim: usize, depth: u32) -> String {
    if depth == 0 || rng.gen_bool(0.2) {
        return if rng.gen_bool(0.7) {
            format!("x{}", rng.gen_range(1..=dim))
        } else {
            format!("{}", rng.gen_range(1..=9) as f64 / 4.0)
        };
    }
    let a = random_expression(rng, dim, depth - 1);
    let b = random_expression(rng, dim, depth - 1);
    match rng.gen_range(0..12) {
        0 => format!("({a} + {b})"),
        1 => format!("({a} - {b})"),
        2 => format!("({a} * {b})"),
        3 => format!("({a} / (1 + ({b})^2))"),
        4 => format!("sin({a})"),
        5 => format!("cos({a})"),
        6 => format!("exp(sin({a}))"),
        7 => format!("ln(1 + ({a})^2)"),
        8 => format!("sqrt(2 + cos({a}))"),
        9 => format!("arctan({a})"),
        10 => format!("({a})^{}", rng.gen_range(2..=3)),
        _ => format!("-({a})"),
    }
}

pub fn parse(text: &str, dim: usize) -> Expression {
    Expression::parse(text, dim).unwrap_or_else(|e| panic!("{text}: {e}"))
}

/// Largest relative mismatch between the symbolic gradient and central
/// differences at `x`.
pub fn gradient_fd_gap(e: &Expression, x: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for (i, g) in e.gradient().iter().enumerate() {
        let ga = g.eval(x).unwrap();
        let h = f64::EPSILON.cbrt() * x[i].abs().max(1.0);
        let mut p = x.to_vec();
        p[i] = x[i] + h;
        let up = e.eval(&p).unwrap();
        p[i] = x[i] - h;
        let down = e.eval(&p).unwrap();
        let fd = (up - down) / (2.0 * h);
        worst = worst.max((ga - fd).abs() / ga.abs().max(1.0));
    }
    worst
}
