//! Generic checks for candidate structure matrices supplied as callbacks:
//! skew-symmetry, the Jacobi identities (analytic and finite-difference
//! partials) and rank constancy over a point sample.

use std::collections::BTreeMap;
use std::fmt::{self, Display, Write as _};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::numeric::{fd_step, inf_norm, max_abs, numerical_rank};

/// A callback failed at a sample point.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("evaluation failed at x = {point:?}: {message}")]
pub struct VerifyError {
    pub point: Vec<f64>,
    pub message: String,
}

fn wrap<T, E: Display>(r: Result<T, E>, x: &[f64]) -> Result<T, VerifyError> {
    r.map_err(|e| VerifyError {
        point: x.to_vec(),
        message: e.to_string(),
    })
}

/// Largest Jacobi-identity violation at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JacobiResidual {
    pub raw: f64,
    /// `raw / max(1, ‖J‖∞ · max|∂J|)`
    pub normalized: f64,
    /// Zero-based `(i, j, k)` of the worst triple.
    pub triple: (usize, usize, usize),
}

/// Maximum over `(i, j, k)` of
/// `|Σ_l J_li ∂_l J_jk + J_lj ∂_l J_ki + J_lk ∂_l J_ij|`.
pub fn jacobi_from_parts(j: &DMatrix<f64>, partials: &[DMatrix<f64>]) -> JacobiResidual {
    let n = j.nrows();
    let mut worst = (0.0f64, (0, 0, 0));
    for i in 0..n {
        for jj in 0..n {
            for k in 0..n {
                let s: f64 = (0..n)
                    .map(|l| {
                        j[(l, i)] * partials[l][(jj, k)]
                            + j[(l, jj)] * partials[l][(k, i)]
                            + j[(l, k)] * partials[l][(i, jj)]
                    })
                    .sum();
                if s.abs() > worst.0 {
                    worst = (s.abs(), (i, jj, k));
                }
            }
        }
    }
    let dmax = partials.iter().map(max_abs).fold(0.0, f64::max);
    let scale = (inf_norm(j) * dmax).max(1.0);
    JacobiResidual {
        raw: worst.0,
        normalized: worst.0 / scale,
        triple: worst.1,
    }
}

/// `max |J_ij + J_ji|` over the sample.
pub fn check_skew<F, E>(jfun: F, points: &[Vec<f64>]) -> Result<f64, VerifyError>
where
    F: Fn(&[f64]) -> Result<DMatrix<f64>, E>,
    E: Display,
{
    let mut worst = 0.0f64;
    for x in points {
        let j = wrap(jfun(x), x)?;
        worst = worst.max(skew_defect(&j));
    }
    Ok(worst)
}

fn skew_defect(j: &DMatrix<f64>) -> f64 {
    let n = j.nrows();
    let mut worst = 0.0f64;
    for a in 0..n {
        for b in a..n {
            worst = worst.max((j[(a, b)] + j[(b, a)]).abs());
        }
    }
    worst
}

/// Jacobi residual with analytic partials from `dfun`.
pub fn jacobi_residual<F, D, E1, E2>(jfun: F, dfun: D, x: &[f64]) -> Result<JacobiResidual, VerifyError>
where
    F: Fn(&[f64]) -> Result<DMatrix<f64>, E1>,
    D: Fn(&[f64]) -> Result<Vec<DMatrix<f64>>, E2>,
    E1: Display,
    E2: Display,
{
    let j = wrap(jfun(x), x)?;
    let d = wrap(dfun(x), x)?;
    Ok(jacobi_from_parts(&j, &d))
}

/// Central-difference partials of `jfun`. `h = None` uses
/// `ε^{1/3}·max(1, |x_l|)` per coordinate.
pub fn fd_partials<F, E>(jfun: F, x: &[f64], h: Option<f64>) -> Result<Vec<DMatrix<f64>>, VerifyError>
where
    F: Fn(&[f64]) -> Result<DMatrix<f64>, E>,
    E: Display,
{
    let mut out = Vec::with_capacity(x.len());
    let mut xp = x.to_vec();
    for l in 0..x.len() {
        let step = h.unwrap_or_else(|| fd_step(x[l]));
        xp[l] = x[l] + step;
        let plus = wrap(jfun(&xp), &xp)?;
        xp[l] = x[l] - step;
        let minus = wrap(jfun(&xp), &xp)?;
        xp[l] = x[l];
        out.push((plus - minus) / (2.0 * step));
    }
    Ok(out)
}

/// Jacobi residual with finite-difference partials; independent of any
/// analytic derivative code.
pub fn jacobi_residual_fd<F, E>(jfun: F, x: &[f64], h: Option<f64>) -> Result<JacobiResidual, VerifyError>
where
    F: Fn(&[f64]) -> Result<DMatrix<f64>, E>,
    E: Display,
{
    let j = wrap(jfun(x), x)?;
    let d = fd_partials(&jfun, x, h)?;
    Ok(jacobi_from_parts(&j, &d))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub point: Vec<f64>,
    pub normalized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    pub points: usize,
    pub seed: Option<u64>,
    pub max_skew: f64,
    pub max_jacobi_raw: f64,
    pub max_jacobi_normalized: f64,
    pub max_jacobi_fd_raw: f64,
    pub max_jacobi_fd_normalized: f64,
    /// `max |normalized analytic − normalized fd|`
    pub max_path_gap: f64,
    pub worst: Option<Witness>,
    /// rank → number of points
    pub rank_histogram: BTreeMap<usize, usize>,
}

impl ResidualReport {
    /// True when residuals are within `tol` (analytic) and `fd_tol` (finite
    /// differences), the matrix is skew, and the rank is `expected_rank` everywhere.
    pub fn passes(&self, tol: f64, fd_tol: f64, expected_rank: Option<usize>) -> bool {
        let rank_ok = match expected_rank {
            Some(r) => self.rank_histogram.keys().all(|&k| k == r),
            None => self.rank_histogram.len() <= 1,
        };
        self.max_skew == 0.0
            && self.max_jacobi_normalized < tol
            && self.max_jacobi_fd_normalized < fd_tol
            && rank_ok
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "points sampled:              {}", self.points);
        if let Some(seed) = self.seed {
            let _ = writeln!(s, "seed:                        {seed}");
        }
        let _ = writeln!(s, "max skew asymmetry:          {:e}", self.max_skew);
        let _ = writeln!(s, "max jacobi residual (raw):   {:e}", self.max_jacobi_raw);
        let _ = writeln!(s, "max jacobi residual (norm):  {:e}", self.max_jacobi_normalized);
        let _ = writeln!(s, "max fd jacobi (raw):         {:e}", self.max_jacobi_fd_raw);
        let _ = writeln!(s, "max fd jacobi (norm):        {:e}", self.max_jacobi_fd_normalized);
        let _ = writeln!(s, "max analytic/fd gap:         {:e}", self.max_path_gap);
        if let Some(w) = &self.worst {
            let _ = writeln!(
                s,
                "worst witness:               (i,j,k) = ({},{},{}) at x = {:?}",
                w.i + 1,
                w.j + 1,
                w.k + 1,
                w.point
            );
        }
        let hist: Vec<String> = self
            .rank_histogram
            .iter()
            .map(|(r, c)| format!("{r}:{c}"))
            .collect();
        let _ = writeln!(s, "rank histogram:              {}", hist.join(" "));
        s
    }
}

impl fmt::Display for ResidualReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

struct PointResult {
    skew: f64,
    analytic: JacobiResidual,
    fd: JacobiResidual,
    rank: usize,
}

/// Full sweep over `points`. Runs in parallel; the reduction is sequential in
/// point order so reports are reproducible.
pub fn residual_report<F, D, E1, E2>(
    jfun: F,
    dfun: D,
    points: &[Vec<f64>],
    seed: Option<u64>,
    rank_tol: f64,
) -> Result<ResidualReport, VerifyError>
where
    F: Fn(&[f64]) -> Result<DMatrix<f64>, E1> + Sync,
    D: Fn(&[f64]) -> Result<Vec<DMatrix<f64>>, E2> + Sync,
    E1: Display,
    E2: Display,
{
    let results: Vec<Result<PointResult, VerifyError>> = points
        .par_iter()
        .map(|x| {
            let j = wrap(jfun(x), x)?;
            let d = wrap(dfun(x), x)?;
            let dfd = fd_partials(&jfun, x, None)?;
            Ok(PointResult {
                skew: skew_defect(&j),
                analytic: jacobi_from_parts(&j, &d),
                fd: jacobi_from_parts(&j, &dfd),
                rank: numerical_rank(&j, rank_tol),
            })
        })
        .collect();

    let mut report = ResidualReport {
        points: points.len(),
        seed,
        max_skew: 0.0,
        max_jacobi_raw: 0.0,
        max_jacobi_normalized: 0.0,
        max_jacobi_fd_raw: 0.0,
        max_jacobi_fd_normalized: 0.0,
        max_path_gap: 0.0,
        worst: None,
        rank_histogram: BTreeMap::new(),
    };
    for (x, r) in points.iter().zip(results) {
        let r = r?;
        report.max_skew = report.max_skew.max(r.skew);
        report.max_jacobi_raw = report.max_jacobi_raw.max(r.analytic.raw);
        report.max_jacobi_fd_raw = report.max_jacobi_fd_raw.max(r.fd.raw);
        report.max_jacobi_fd_normalized = report.max_jacobi_fd_normalized.max(r.fd.normalized);
        report.max_path_gap = report
            .max_path_gap
            .max((r.analytic.normalized - r.fd.normalized).abs());
        if report.worst.is_none() || r.analytic.normalized > report.max_jacobi_normalized {
            let (i, j, k) = r.analytic.triple;
            report.worst = Some(Witness {
                i,
                j,
                k,
                point: x.clone(),
                normalized: r.analytic.normalized,
            });
        }
        report.max_jacobi_normalized = report.max_jacobi_normalized.max(r.analytic.normalized);
        *report.rank_histogram.entry(r.rank).or_default() += 1;
    }
    Ok(report)
}

/// Finite sampling box from interval endpoints: each factor is clipped to
/// `[-window, window]` and shrunk by `inset` of its width on both sides.
pub fn sampling_region(factors: &[crate::psi::Interval], inset: f64, window: f64) -> Vec<(f64, f64)> {
    factors.iter().map(|b| b.sampling_range(window, inset)).collect()
}

/// Uniform points in `region` that satisfy `accept`, drawn with a seeded
/// ChaCha generator. Gives up after `200·count` rejected draws.
pub fn sample_points(
    region: &[(f64, f64)],
    count: usize,
    seed: u64,
    accept: impl Fn(&[f64]) -> bool,
) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut rejected = 0usize;
    while out.len() < count && rejected < 200 * count.max(1) {
        let x: Vec<f64> = region
            .iter()
            .map(|&(lo, hi)| lo + (hi - lo) * rng.gen::<f64>())
            .collect();
        if accept(&x) {
            out.push(x);
        } else {
            rejected += 1;
        }
    }
    out
}
