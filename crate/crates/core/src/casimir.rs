//! Casimir invariants `D_i(x) = Σ_j k_j ξ_j(λ_j(x))` for a basis `{k}` of
//! `Ker S`, with analytic gradients
//! `∂D_i/∂x_m = Σ_j k_j Λ_jm / ψ_j(λ_j(x))`.

use nalgebra::DMatrix;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::family::{DomainError, FamilySpec};
use crate::numeric::{inf_norm, numerical_rank, RANK_TOL};
use crate::rational::{format_rational, rational_to_f64, Rational};

#[derive(Debug, Clone)]
pub struct CasimirSet {
    spec: FamilySpec,
    kernel: Vec<Vec<Rational>>,
    kernel_f: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Annihilation {
    /// `max_i ‖J(x)·∇D_i(x)‖∞`
    pub raw: f64,
    /// `raw / max(1, ‖J‖∞ · max_i ‖∇D_i‖∞)`
    pub normalized: f64,
}

impl CasimirSet {
    pub fn build(spec: &FamilySpec) -> Self {
        Self::with_kernel(spec, spec.kernel().to_vec())
    }

    /// Uses a caller-chosen kernel basis. The vectors are not re-validated
    /// here; see [`CasimirSet::kernel_defect`].
    pub fn with_kernel(spec: &FamilySpec, kernel: Vec<Vec<Rational>>) -> Self {
        let kernel_f = kernel
            .iter()
            .map(|k| k.iter().map(rational_to_f64).collect())
            .collect();
        CasimirSet {
            spec: spec.clone(),
            kernel,
            kernel_f,
        }
    }

    pub fn spec(&self) -> &FamilySpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.kernel.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kernel.is_empty()
    }

    pub fn kernel(&self) -> &[Vec<Rational>] {
        &self.kernel
    }

    /// True when some kernel vector is not annihilated by `S` exactly.
    pub fn kernel_defect(&self) -> bool {
        self.kernel
            .iter()
            .any(|k| self.spec.s().mul_vec(k).iter().any(|v| !v.is_zero()))
    }

    pub fn values(&self, x: &[f64]) -> Result<Vec<f64>, DomainError> {
        let lam = self.spec.check_domain(x)?;
        let xi = lam
            .iter()
            .zip(self.spec.psis())
            .enumerate()
            .map(|(j, (&w, p))| p.xi(w).map_err(|source| DomainError::Psi { coord: j + 1, source }))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(self
            .kernel_f
            .iter()
            .map(|k| k.iter().zip(&xi).filter(|(c, _)| **c != 0.0).map(|(c, v)| c * v).sum())
            .collect())
    }

    /// Gradient matrix, one row per Casimir.
    pub fn gradients(&self, x: &[f64]) -> Result<DMatrix<f64>, DomainError> {
        let (_, psi) = self.spec.psi_values(x)?;
        let n = self.spec.dimension();
        let lam = self.spec.lambda_f64();
        Ok(DMatrix::from_fn(self.len(), n, |i, m| {
            self.kernel_f[i]
                .iter()
                .enumerate()
                .filter(|(_, c)| **c != 0.0)
                .map(|(j, c)| c * lam[(j, m)] / psi[j])
                .sum()
        }))
    }

    pub fn annihilation(&self, x: &[f64]) -> Result<Annihilation, DomainError> {
        if self.is_empty() {
            self.spec.check_domain(x)?;
            return Ok(Annihilation {
                raw: 0.0,
                normalized: 0.0,
            });
        }
        let j = self.spec.eval_j(x)?.j;
        let g = self.gradients(x)?;
        let mut raw = 0.0f64;
        let mut gmax = 0.0f64;
        for row in g.row_iter() {
            let grad = row.transpose();
            let v = &j * &grad;
            raw = raw.max(v.amax());
            gmax = gmax.max(grad.amax());
        }
        let scale = (inf_norm(&j) * gmax).max(1.0);
        Ok(Annihilation {
            raw,
            normalized: raw / scale,
        })
    }

    pub fn independence_rank(&self, x: &[f64]) -> Result<usize, DomainError> {
        if self.is_empty() {
            self.spec.check_domain(x)?;
            return Ok(0);
        }
        Ok(numerical_rank(&self.gradients(x)?, RANK_TOL))
    }

    /// Closed-form text of each `D_i` in `x1..xn`, parseable by
    /// [`crate::expr::Expression::parse`]. `None` for a Casimir that involves a
    /// custom ψ, whose primitive has no closed form.
    pub fn closed_forms(&self) -> Vec<Option<String>> {
        let lambda_text: Vec<String> = (0..self.spec.dimension())
            .map(|j| linear_form(self.spec.lambda().row(j)))
            .collect();
        self.kernel
            .iter()
            .map(|k| {
                let mut terms = Vec::new();
                for (j, c) in k.iter().enumerate() {
                    if c.is_zero() {
                        continue;
                    }
                    let xi = self.spec.psis()[j].xi_formula(&lambda_text[j])?;
                    terms.push(scaled(c, &format!("({xi})")));
                }
                Some(if terms.is_empty() {
                    "0".to_string()
                } else {
                    terms.join(" + ")
                })
            })
            .collect()
    }
}

fn coeff_text(c: &Rational) -> String {
    let s = format_rational(c);
    if c.is_negative() {
        format!("({s})")
    } else {
        s
    }
}

fn scaled(c: &Rational, body: &str) -> String {
    if c.is_one() {
        body.to_string()
    } else {
        format!("{} * {body}", coeff_text(c))
    }
}

/// `Σ_j c_j x_j` as text.
pub(crate) fn linear_form(row: &[Rational]) -> String {
    let terms: Vec<String> = row
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.is_zero())
        .map(|(j, c)| scaled(c, &format!("x{}", j + 1)))
        .collect();
    if terms.is_empty() {
        "0".to_string()
    } else {
        terms.join(" + ")
    }
}
