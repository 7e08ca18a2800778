//! Global reduction to Darboux form.
//!
//! The nonlinear chart `yᵢ = ξᵢ(λᵢ(x))` has Jacobian
//! `∂y/∂x = diag(1/ψᵢ(λᵢ)) · Λ` and takes `J(x)` to the constant matrix `S`.
//! Its inverse is `x = L · φ(y)`. A constant congruence `z = P·y` then
//! brings `S` to `J₂ ⊕ … ⊕ J₂ ⊕ 0 ⊕ … ⊕ 0`.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::casimir::CasimirSet;
use crate::family::{skew_assemble, DomainError, FamilySpec};
use crate::numeric::max_abs;
use crate::psi::{Interval, PsiError};
use crate::rational::{canonical_pattern, RationalMatrix};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DarbouxError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("y{coord} = {value} lies outside the image {image} of xi{coord}")]
    OutOfImage {
        coord: usize,
        value: f64,
        image: Interval,
    },
    #[error("expected a vector of dimension {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("kernel bases are not related by a constant change of basis")]
    Relation,
}

#[derive(Debug, Clone)]
pub struct DarbouxChart {
    spec: FamilySpec,
    p: RationalMatrix,
    p_inv: RationalMatrix,
    rank: usize,
    p_f: DMatrix<f64>,
    p_inv_f: DMatrix<f64>,
    lambda_f: DMatrix<f64>,
    canonical_f: DMatrix<f64>,
}

impl DarbouxChart {
    pub fn new(spec: &FamilySpec) -> Self {
        let red = spec
            .s()
            .skew_canonicalize()
            .expect("family S is skew by construction");
        let p_inv = red.p.invert().expect("congruence transform is invertible");
        let n = spec.dimension();
        DarbouxChart {
            p_f: red.p.to_f64(),
            p_inv_f: p_inv.to_f64(),
            lambda_f: spec.lambda_f64().clone(),
            canonical_f: canonical_pattern(n, red.rank).to_f64(),
            p: red.p,
            p_inv,
            rank: red.rank,
            spec: spec.clone(),
        }
    }

    pub fn spec(&self) -> &FamilySpec {
        &self.spec
    }

    pub fn p(&self) -> &RationalMatrix {
        &self.p
    }

    pub fn p_inverse(&self) -> &RationalMatrix {
        &self.p_inv
    }

    pub fn p_f64(&self) -> &DMatrix<f64> {
        &self.p_f
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// The canonical block pattern.
    pub fn canonical(&self) -> RationalMatrix {
        canonical_pattern(self.spec.dimension(), self.rank)
    }

    pub fn canonical_f64(&self) -> &DMatrix<f64> {
        &self.canonical_f
    }

    /// Images `ξᵢ(Ωᵢ)` bounding each y-coordinate.
    pub fn y_box(&self) -> Vec<Interval> {
        self.spec.psis().iter().map(|p| p.image()).collect()
    }

    fn check_len(&self, v: &[f64]) -> Result<(), DarbouxError> {
        let n = self.spec.dimension();
        if v.len() != n {
            return Err(DarbouxError::Dimension {
                expected: n,
                got: v.len(),
            });
        }
        Ok(())
    }

    pub fn to_y(&self, x: &[f64]) -> Result<Vec<f64>, DarbouxError> {
        let lam = self.spec.check_domain(x)?;
        lam.iter()
            .zip(self.spec.psis())
            .enumerate()
            .map(|(i, (&w, p))| {
                p.xi(w)
                    .map_err(|source| DarbouxError::Domain(DomainError::Psi { coord: i + 1, source }))
            })
            .collect()
    }

    pub fn from_y(&self, y: &[f64]) -> Result<Vec<f64>, DarbouxError> {
        self.check_len(y)?;
        let w = y
            .iter()
            .zip(self.spec.psis())
            .enumerate()
            .map(|(i, (&v, p))| {
                p.phi(v).map_err(|e| match e {
                    PsiError::OutOfImage { v, image } => DarbouxError::OutOfImage {
                        coord: i + 1,
                        value: v,
                        image,
                    },
                    source => DarbouxError::Domain(DomainError::Psi { coord: i + 1, source }),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let l = self.spec.l_f64();
        let n = w.len();
        Ok((0..n)
            .map(|i| (0..n).map(|j| l[(i, j)] * w[j]).sum())
            .collect())
    }

    /// `∂y/∂x = diag(1/ψᵢ(λᵢ(x))) · Λ`.
    pub fn y_jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>, DarbouxError> {
        let (_, psi) = self.spec.psi_values(x)?;
        let n = psi.len();
        Ok(DMatrix::from_fn(n, n, |i, j| self.lambda_f[(i, j)] / psi[i]))
    }

    /// `J*(y) = (∂y/∂x) · J(x) · (∂y/∂x)ᵀ`, which should equal `S`.
    pub fn pushforward(&self, x: &[f64]) -> Result<DMatrix<f64>, DarbouxError> {
        let j = self.spec.eval_j(x)?.j;
        let dy = self.y_jacobian(x)?;
        let left = &dy * &j;
        let n = j.nrows();
        Ok(skew_assemble(n, |a, b| {
            (0..n).map(|k| left[(a, k)] * dy[(b, k)]).sum()
        }))
    }

    /// `max |J* − S| / max(1, max|S|)` at `x`.
    pub fn pushforward_deviation(&self, x: &[f64]) -> Result<f64, DarbouxError> {
        let s = self.spec.s_f64();
        let d = self.pushforward(x)? - s;
        Ok(max_abs(&d) / max_abs(s).max(1.0))
    }

    pub fn to_z(&self, x: &[f64]) -> Result<Vec<f64>, DarbouxError> {
        let y = self.to_y(x)?;
        Ok(mat_vec(&self.p_f, &y))
    }

    pub fn from_z(&self, z: &[f64]) -> Result<Vec<f64>, DarbouxError> {
        self.check_len(z)?;
        self.from_y(&mat_vec(&self.p_inv_f, z))
    }

    /// `∂x/∂z = L · diag(ψ(λ(x))) · P⁻¹`, evaluated at the x-point.
    pub fn x_jacobian_wrt_z(&self, x: &[f64]) -> Result<DMatrix<f64>, DarbouxError> {
        let (_, psi) = self.spec.psi_values(x)?;
        let n = psi.len();
        let l = self.spec.l_f64();
        let dxdy = DMatrix::from_fn(n, n, |i, j| l[(i, j)] * psi[j]);
        Ok(dxdy * &self.p_inv_f)
    }

    /// Structure matrix in z-coordinates, `P · J*(y) · Pᵀ`.
    pub fn z_structure(&self, x: &[f64]) -> Result<DMatrix<f64>, DarbouxError> {
        let js = self.pushforward(x)?;
        let left = &self.p_f * &js;
        let n = js.nrows();
        Ok(skew_assemble(n, |a, b| {
            (0..n).map(|k| left[(a, k)] * self.p_f[(b, k)]).sum()
        }))
    }

    /// Largest entrywise deviation of the z-structure from the canonical
    /// pattern over `points`.
    pub fn verify_canonical(&self, points: &[Vec<f64>]) -> Result<f64, DarbouxError> {
        let mut worst = 0.0f64;
        for x in points {
            let d = self.z_structure(x)? - &self.canonical_f;
            worst = worst.max(max_abs(&d));
        }
        Ok(worst)
    }

    /// Exact matrix `C` with `D(x) = C · (z_{r+1}, …, z_n)` for the given
    /// Casimirs. Both sides are linear in `y` through rows spanning `Ker S`.
    pub fn casimir_relation(&self, casimirs: &CasimirSet) -> Result<RationalMatrix, DarbouxError> {
        let n = self.spec.dimension();
        let tail_rows: Vec<Vec<_>> = (self.rank..n).map(|i| self.p.row(i).to_vec()).collect();
        if tail_rows.len() != casimirs.len() {
            return Err(DarbouxError::Relation);
        }
        if tail_rows.is_empty() {
            return Ok(RationalMatrix::zeros(0, 0));
        }
        let tail = RationalMatrix::from_rows(tail_rows).map_err(|_| DarbouxError::Relation)?;
        let k = RationalMatrix::from_rows(casimirs.kernel().to_vec()).map_err(|_| DarbouxError::Relation)?;
        let tt = tail.transpose();
        let gram = (&tail * &tt).invert().map_err(|_| DarbouxError::Relation)?;
        let c = &(&k * &tt) * &gram;
        if &c * &tail != k {
            return Err(DarbouxError::Relation);
        }
        Ok(c)
    }
}

pub(crate) fn mat_vec(m: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)] * v[j]).sum())
        .collect()
}
