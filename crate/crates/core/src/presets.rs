//! Bundled example instances.

use crate::family::FamilySpec;
use crate::psi::{Interval, PsiTriple};
use crate::rational::RationalMatrix;

#[derive(Debug, Clone)]
pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub family: FamilySpec,
    /// Test Hamiltonian in `x1..xn`. These are illustrative choices, not part
    /// of the structure.
    pub hamiltonian: &'static str,
    pub x0: Vec<f64>,
}

pub const NAMES: [&str; 3] = ["kmk", "separable-lv", "constant"];

pub fn by_name(name: &str, r: f64) -> Option<Preset> {
    match name {
        "kmk" => Some(Preset {
            name: "kmk",
            description: "Kermack-McKendrick structure J = r x1 x2 [[0,1,-1],[-1,0,1],[1,-1,0]]",
            family: kmk(r),
            hamiltonian: "x3",
            x0: vec![1.0, 2.0, 3.0],
        }),
        "separable-lv" => Some(Preset {
            name: "separable-lv",
            description: "separable Lotka-Volterra type structure J_ij = S_ij x_i x_j",
            family: separable_lv(),
            hamiltonian: "x1 + x2 + x3",
            x0: vec![1.0, 2.0, 3.0],
        }),
        "constant" => Some(Preset {
            name: "constant",
            description: "constant rank-2 structure matrix (psi = 1, L = I)",
            family: constant(),
            hamiltonian: "x1^2/2 + x2^2/2 + x3*x4",
            x0: vec![1.0, 0.0, 0.5, -0.5],
        }),
        _ => None,
    }
}

/// Kermack–McKendrick structure matrix with rate `r > 0`:
/// `ψ₁ = ψ₂ = √r·w`, `ψ₃ = 1`, positive orthant.
pub fn kmk(r: f64) -> FamilySpec {
    let s = RationalMatrix::from_i64(&[&[0, 1, 0], &[-1, 0, 0], &[0, 0, 0]]);
    let l = RationalMatrix::from_i64(&[&[1, 0, 0], &[0, 1, 0], &[-1, -1, 1]]);
    let a = r.sqrt();
    let psis = vec![
        PsiTriple::linear(a, Interval::positive(), Some(1.0)).expect("valid psi"),
        PsiTriple::linear(a, Interval::positive(), Some(1.0)).expect("valid psi"),
        PsiTriple::constant(1.0, Interval::positive(), Some(0.0)).expect("valid psi"),
    ];
    FamilySpec::build(s, l, psis, vec![Interval::positive(); 3]).expect("valid preset")
}

/// Cyclic 3x3 `S` with `ψᵢ(w) = w` and `L = I`.
pub fn separable_lv() -> FamilySpec {
    let s = RationalMatrix::from_i64(&[&[0, 1, -1], &[-1, 0, 1], &[1, -1, 0]]);
    let psis = vec![PsiTriple::linear(1.0, Interval::positive(), Some(1.0)).expect("valid psi"); 3];
    FamilySpec::separable(s, psis).expect("valid preset")
}

pub fn constant() -> FamilySpec {
    let s = RationalMatrix::from_i64(&[
        &[0, 2, 0, 1],
        &[-2, 0, 0, 0],
        &[0, 0, 0, 0],
        &[-1, 0, 0, 0],
    ]);
    let psis = vec![PsiTriple::constant(1.0, Interval::real_line(), Some(0.0)).expect("valid psi"); 4];
    FamilySpec::separable(s, psis).expect("valid preset")
}
