//! The generalized-separable family `J(x) = L·Ψ(x)·S·Ψ(x)·Lᵀ` with
//! `Ψ(x) = diag(ψₖ(λₖ(x)))` and `λ(x) = Λ·x`, `Λ = L⁻¹`.
//!
//! Partial derivatives follow from `J = M·S·Mᵀ`, `M_ik = L_ik ψ_k(λ_k)`:
//!
//! ```text
//! ∂_l M_ik  = L_ik ψ_k′(λ_k) Λ_kl
//! ∂_l J     = (∂_l M)·S·Mᵀ + M·S·(∂_l M)ᵀ
//! ```
//!
//! Only the strict upper triangle is computed; the lower triangle is its
//! exact negation, so every returned matrix is skew bit-for-bit.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::psi::{Interval, PsiError, PsiTriple};
use crate::rational::{LinalgError, Rational, RationalMatrix};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FamilyError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("S is not skew-symmetric: {0}")]
    NotSkew(LinalgError),
    #[error("L is not invertible: {0}")]
    SingularL(LinalgError),
}

/// Evaluation outside the admissible domain. Coordinates are one-based.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("expected a point of dimension {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("x{coord} = {value} lies outside the box factor {interval}")]
    OutsideBox {
        coord: usize,
        value: f64,
        interval: Interval,
    },
    #[error("lambda{coord}(x) = {value} lies outside the psi domain {interval}")]
    LambdaOutside {
        coord: usize,
        value: f64,
        interval: Interval,
    },
    #[error("coordinate {coord}: {source}")]
    Psi { coord: usize, source: PsiError },
}

/// A structure matrix value at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureMatrixValue {
    pub point: Vec<f64>,
    pub j: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct FamilySpec {
    n: usize,
    s: RationalMatrix,
    l: RationalMatrix,
    lambda: RationalMatrix,
    psis: Vec<PsiTriple>,
    domain_box: Vec<Interval>,
    rank: usize,
    kernel: Vec<Vec<Rational>>,
    s_f: DMatrix<f64>,
    l_f: DMatrix<f64>,
    lambda_f: DMatrix<f64>,
}

impl FamilySpec {
    pub fn build(
        s: RationalMatrix,
        l: RationalMatrix,
        psis: Vec<PsiTriple>,
        domain_box: Vec<Interval>,
    ) -> Result<Self, FamilyError> {
        let n = s.rows();
        if !s.is_square() {
            return Err(FamilyError::Dimension(format!(
                "S is {}x{}",
                s.rows(),
                s.cols()
            )));
        }
        if l.rows() != n || l.cols() != n {
            return Err(FamilyError::Dimension(format!(
                "L is {}x{} but S is {n}x{n}",
                l.rows(),
                l.cols()
            )));
        }
        if psis.len() != n {
            return Err(FamilyError::Dimension(format!(
                "{} psi functions for dimension {n}",
                psis.len()
            )));
        }
        if domain_box.len() != n {
            return Err(FamilyError::Dimension(format!(
                "{} box factors for dimension {n}",
                domain_box.len()
            )));
        }
        let kernel = s.kernel_basis().map_err(FamilyError::NotSkew)?;
        let lambda = l.invert().map_err(FamilyError::SingularL)?;
        debug_assert!((&lambda * &l).is_identity());
        Ok(FamilySpec {
            n,
            s_f: s.to_f64(),
            l_f: l.to_f64(),
            lambda_f: lambda.to_f64(),
            s,
            l,
            lambda,
            psis,
            domain_box,
            rank: kernel.rank,
            kernel: kernel.basis,
        })
    }

    /// The separable special case `L = I`, with the box taken from the ψ domains.
    pub fn separable(s: RationalMatrix, psis: Vec<PsiTriple>) -> Result<Self, FamilyError> {
        let n = s.rows();
        let domain_box = psis.iter().map(PsiTriple::domain).collect();
        Self::build(s, RationalMatrix::identity(n), psis, domain_box)
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn s(&self) -> &RationalMatrix {
        &self.s
    }

    pub fn l(&self) -> &RationalMatrix {
        &self.l
    }

    pub fn lambda(&self) -> &RationalMatrix {
        &self.lambda
    }

    pub fn s_f64(&self) -> &DMatrix<f64> {
        &self.s_f
    }

    pub fn l_f64(&self) -> &DMatrix<f64> {
        &self.l_f
    }

    pub fn lambda_f64(&self) -> &DMatrix<f64> {
        &self.lambda_f
    }

    pub fn psis(&self) -> &[PsiTriple] {
        &self.psis
    }

    pub fn domain_box(&self) -> &[Interval] {
        &self.domain_box
    }

    /// Rational basis of `Ker S`, as computed at build time.
    pub fn kernel(&self) -> &[Vec<Rational>] {
        &self.kernel
    }

    /// `λ(x) = Λ·x` without domain checks.
    pub fn lambda_of(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.lambda_f[(i, j)] * x[j]).sum())
            .collect()
    }

    /// Validates `x ∈ Ω` and `λᵢ(x) ∈ Ωᵢ`, returning `λ(x)`.
    pub fn check_domain(&self, x: &[f64]) -> Result<Vec<f64>, DomainError> {
        if x.len() != self.n {
            return Err(DomainError::Dimension {
                expected: self.n,
                got: x.len(),
            });
        }
        for (i, (&v, b)) in x.iter().zip(&self.domain_box).enumerate() {
            if !b.contains(v) {
                return Err(DomainError::OutsideBox {
                    coord: i + 1,
                    value: v,
                    interval: *b,
                });
            }
        }
        let lam = self.lambda_of(x);
        for (i, (&v, p)) in lam.iter().zip(&self.psis).enumerate() {
            if !p.domain().contains(v) {
                return Err(DomainError::LambdaOutside {
                    coord: i + 1,
                    value: v,
                    interval: p.domain(),
                });
            }
        }
        Ok(lam)
    }

    /// `ψ_k(λ_k(x))` for every k, after domain validation.
    pub fn psi_values(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>), DomainError> {
        let lam = self.check_domain(x)?;
        let psi = lam
            .iter()
            .zip(&self.psis)
            .enumerate()
            .map(|(k, (&w, p))| p.psi(w).map_err(|source| DomainError::Psi { coord: k + 1, source }))
            .collect::<Result<Vec<_>, _>>()?;
        Ok((lam, psi))
    }

    fn m_matrix(&self, psi: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, k| self.l_f[(i, k)] * psi[k])
    }

    /// Structure matrix at `x`.
    pub fn eval_j(&self, x: &[f64]) -> Result<StructureMatrixValue, DomainError> {
        let (_, psi) = self.psi_values(x)?;
        let m = self.m_matrix(&psi);
        let ms = &m * &self.s_f;
        Ok(StructureMatrixValue {
            point: x.to_vec(),
            j: skew_assemble(self.n, |i, j| {
                (0..self.n).map(|l| ms[(i, l)] * m[(j, l)]).sum()
            }),
        })
    }

    /// `result[l][(i, j)] = ∂J_ij/∂x_l` at `x`.
    pub fn eval_j_partials(&self, x: &[f64]) -> Result<Vec<DMatrix<f64>>, DomainError> {
        let (lam, psi) = self.psi_values(x)?;
        let dpsi = lam
            .iter()
            .zip(&self.psis)
            .enumerate()
            .map(|(k, (&w, p))| {
                p.psi_prime(w)
                    .map_err(|source| DomainError::Psi { coord: k + 1, source })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let n = self.n;
        let m = self.m_matrix(&psi);
        let ms = &m * &self.s_f;
        Ok((0..n)
            .map(|l| {
                let dm = DMatrix::from_fn(n, n, |i, k| {
                    self.l_f[(i, k)] * dpsi[k] * self.lambda_f[(k, l)]
                });
                let dms = &dm * &self.s_f;
                skew_assemble(n, |i, j| {
                    (0..n)
                        .map(|q| dms[(i, q)] * m[(j, q)] + ms[(i, q)] * dm[(j, q)])
                        .sum()
                })
            })
            .collect())
    }
}

/// Fills the strict upper triangle from `f` and mirrors it with a sign flip.
pub(crate) fn skew_assemble(n: usize, f: impl Fn(usize, usize) -> f64) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(n, n);
    for r in 0..n {
        for c in r + 1..n {
            let v = f(r, c);
            j[(r, c)] = v;
            j[(c, r)] = -v;
        }
    }
    j
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{numerical_rank, RANK_TOL};

    pub(crate) fn kmk(r: f64) -> FamilySpec {
        let s = RationalMatrix::from_i64(&[&[0, 1, 0], &[-1, 0, 0], &[0, 0, 0]]);
        let l = RationalMatrix::from_i64(&[&[1, 0, 0], &[0, 1, 0], &[-1, -1, 1]]);
        let a = r.sqrt();
        let psis = vec![
            PsiTriple::linear(a, Interval::positive(), Some(1.0)).unwrap(),
            PsiTriple::linear(a, Interval::positive(), Some(1.0)).unwrap(),
            PsiTriple::constant(1.0, Interval::positive(), Some(0.0)).unwrap(),
        ];
        FamilySpec::build(s, l, psis, vec![Interval::positive(); 3]).unwrap()
    }

    #[test]
    fn kmk_builds_with_rank_two() {
        let f = kmk(1.0);
        assert_eq!(f.rank(), 2);
        assert_eq!(
            f.lambda(),
            &RationalMatrix::from_i64(&[&[1, 0, 0], &[0, 1, 0], &[1, 1, 1]])
        );
        assert_eq!(f.lambda_of(&[1.0, 2.0, 3.0]), vec![1.0, 2.0, 6.0]);
    }

    #[test]
    fn kmk_structure_matrix_at_point() {
        let f = kmk(1.0);
        let j = f.eval_j(&[1.0, 2.0, 3.0]).unwrap().j;
        let expected =
            DMatrix::from_row_slice(3, 3, &[0.0, 2.0, -2.0, -2.0, 0.0, 2.0, 2.0, -2.0, 0.0]);
        assert_eq!(j, expected);
        assert_eq!(numerical_rank(&j, RANK_TOL), 2);
    }

    #[test]
    fn kmk_partial_d1_j12() {
        let f = kmk(1.0);
        let d = f.eval_j_partials(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(d[0][(0, 1)], 2.0);
        // J = x1 x2 C: d/dx2 J12 = x1, d/dx3 J = 0
        assert_eq!(d[1][(0, 1)], 1.0);
        assert_eq!(d[2], DMatrix::zeros(3, 3));
    }

    #[test]
    fn constant_psi_gives_constant_matrix() {
        let s = RationalMatrix::from_i64(&[&[0, 2, -1], &[-2, 0, 3], &[1, -3, 0]]);
        let l = RationalMatrix::identity(3);
        let psis = vec![PsiTriple::constant(1.0, Interval::real_line(), None).unwrap(); 3];
        let f = FamilySpec::build(s.clone(), l, psis, vec![Interval::real_line(); 3]).unwrap();
        let x = [0.3, -4.0, 2.0];
        assert_eq!(f.eval_j(&x).unwrap().j, s.to_f64());
        assert!(f.eval_j_partials(&x).unwrap().iter().all(|m| m.iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn constant_psi_with_general_l_has_zero_partials() {
        let s = RationalMatrix::from_i64(&[&[0, 1], &[-1, 0]]);
        let l = RationalMatrix::from_i64(&[&[2, 1], &[1, 1]]);
        let psis = vec![PsiTriple::constant(3.0, Interval::real_line(), None).unwrap(); 2];
        let f = FamilySpec::build(s, l, psis, vec![Interval::real_line(); 2]).unwrap();
        assert!(f.eval_j_partials(&[1.0, 5.0]).unwrap().iter().all(|m| m.iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn separable_two_dimensional() {
        let s = RationalMatrix::from_i64(&[&[0, 1], &[-1, 0]]);
        let psis = vec![PsiTriple::linear(1.0, Interval::positive(), None).unwrap(); 2];
        let f = FamilySpec::separable(s, psis).unwrap();
        let j = f.eval_j(&[3.0, 5.0]).unwrap().j;
        assert_eq!(j[(0, 1)], 15.0);
        assert_eq!(j[(1, 0)], -15.0);
        assert_eq!(f.lambda_of(&[3.0, 5.0]), vec![3.0, 5.0]);
    }

    #[test]
    fn zero_s_has_rank_zero() {
        let l = RationalMatrix::from_i64(&[&[1, 2], &[0, 1]]);
        let psis = vec![PsiTriple::constant(1.0, Interval::real_line(), None).unwrap(); 2];
        let f = FamilySpec::build(RationalMatrix::zeros(2, 2), l, psis, vec![Interval::real_line(); 2])
            .unwrap();
        assert_eq!(f.rank(), 0);
        assert_eq!(f.kernel().len(), 2);
    }

    #[test]
    fn build_errors() {
        let psis = vec![PsiTriple::constant(1.0, Interval::real_line(), None).unwrap(); 2];
        let b = vec![Interval::real_line(); 2];
        let s = RationalMatrix::from_i64(&[&[0, 1], &[-1, 0]]);
        let singular = RationalMatrix::from_i64(&[&[1, 1], &[1, 1]]);
        assert!(matches!(
            FamilySpec::build(s.clone(), singular, psis.clone(), b.clone()),
            Err(FamilyError::SingularL(_))
        ));
        let nonskew = RationalMatrix::from_i64(&[&[0, 1], &[1, 0]]);
        assert!(matches!(
            FamilySpec::build(nonskew, RationalMatrix::identity(2), psis.clone(), b.clone()),
            Err(FamilyError::NotSkew(_))
        ));
        assert!(matches!(
            FamilySpec::build(s, RationalMatrix::identity(3), psis, b),
            Err(FamilyError::Dimension(_))
        ));
    }

    #[test]
    fn domain_violations_name_the_coordinate() {
        let f = kmk(1.0);
        assert!(matches!(
            f.eval_j(&[-1.0, 2.0, 3.0]),
            Err(DomainError::OutsideBox { coord: 1, .. })
        ));
        let s = RationalMatrix::from_i64(&[&[0, 1], &[-1, 0]]);
        let l = RationalMatrix::from_i64(&[&[1, 0], &[1, 1]]);
        // lambda2 = x2 - x1
        let psis = vec![PsiTriple::linear(1.0, Interval::positive(), None).unwrap(); 2];
        let g = FamilySpec::build(s, l, psis, vec![Interval::positive(); 2]).unwrap();
        assert!(g.eval_j(&[1.0, 2.0]).is_ok());
        assert!(matches!(
            g.eval_j(&[2.0, 1.0]),
            Err(DomainError::LambdaOutside { coord: 2, .. })
        ));
        assert!(matches!(g.eval_j(&[1.0]), Err(DomainError::Dimension { .. })));
    }
}
