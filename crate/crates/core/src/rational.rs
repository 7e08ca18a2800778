//! Exact rational linear algebra for the constant matrices `S`, `L`, `Λ` and `P`.
//!
//! Inversion and kernel computation run fraction-free (Bareiss-style
//! Gauss–Jordan) on an integer copy of the input and only divide at the end.
//! The skew congruence reduction works directly on reduced rationals.

use std::fmt;
use std::ops::{Index, IndexMut, Mul};

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

pub type Rational = BigRational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LinalgError {
    #[error("matrix is singular (rank {rank} < {n})")]
    Singular { rank: usize, n: usize },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not skew-symmetric: entry ({i},{j}) = {a} but ({j},{i}) = {b}")]
    NotSkew {
        i: usize,
        j: usize,
        a: String,
        b: String,
    },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("malformed rational `{0}`")]
    Parse(String),
}

/// Parses `p/q`, an integer, or a finite decimal literal into an exact rational.
pub fn parse_rational(text: &str) -> Result<Rational, LinalgError> {
    let t = text.trim();
    let bad = || LinalgError::Parse(text.to_string());
    if let Some((p, q)) = t.split_once('/') {
        let p: BigInt = p.trim().parse().map_err(|_| bad())?;
        let q: BigInt = q.trim().parse().map_err(|_| bad())?;
        if q.is_zero() {
            return Err(bad());
        }
        return Ok(Rational::new(p, q));
    }
    if let Ok(i) = t.parse::<BigInt>() {
        return Ok(Rational::from_integer(i));
    }
    // decimal: [-]digits.digits
    let (neg, body) = match t.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, t.strip_prefix('+').unwrap_or(t)),
    };
    let (int_part, frac_part) = body.split_once('.').ok_or_else(bad)?;
    if int_part.is_empty() && frac_part.is_empty()
        || !int_part.bytes().all(|b| b.is_ascii_digit())
        || !frac_part.bytes().all(|b| b.is_ascii_digit())
    {
        return Err(bad());
    }
    let digits = format!("{int_part}{frac_part}");
    let num: BigInt = digits.parse().map_err(|_| bad())?;
    let den = num_traits::pow(BigInt::from(10), frac_part.len());
    let r = Rational::new(num, den);
    Ok(if neg { -r } else { r })
}

/// Formats as `p` or `p/q`.
pub fn format_rational(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn rational_to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Dense row-major rational matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RationalMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Rational>,
}

impl RationalMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        RationalMatrix {
            rows,
            cols,
            data: vec![Rational::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Rational::one();
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Rational>>) -> Result<Self, LinalgError> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(LinalgError::Dimension("ragged rows".into()));
        }
        Ok(RationalMatrix {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        })
    }

    /// Builds from small integers, handy for fixtures.
    pub fn from_i64(rows: &[&[i64]]) -> Self {
        let data = rows
            .iter()
            .map(|row| row.iter().map(|&v| Rational::from_integer(v.into())).collect())
            .collect();
        Self::from_rows(data).expect("rectangular fixture")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[Rational] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)].clone();
            }
        }
        t
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::identity(self.rows) && self.is_square()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Zero::is_zero)
    }

    pub fn to_f64(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| rational_to_f64(&self[(i, j)]))
    }

    pub fn mul_vec(&self, v: &[Rational]) -> Vec<Rational> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .fold(Rational::zero(), |acc, (a, b)| acc + a * b)
            })
            .collect()
    }

    /// Checks `Aᵀ = −A` exactly, reporting the first offending pair.
    pub fn check_skew(&self) -> Result<(), LinalgError> {
        if !self.is_square() {
            return Err(LinalgError::NotSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        for i in 0..self.rows {
            for j in i..self.cols {
                if self[(i, j)] != -self[(j, i)].clone() {
                    return Err(LinalgError::NotSkew {
                        i,
                        j,
                        a: format_rational(&self[(i, j)]),
                        b: format_rational(&self[(j, i)]),
                    });
                }
            }
        }
        Ok(())
    }

    /// Integer copy with every row multiplied by the lcm of its denominators.
    /// Returns the matrix and the per-row scale factors.
    fn integer_rows(&self) -> (Vec<Vec<BigInt>>, Vec<BigInt>) {
        let mut out = Vec::with_capacity(self.rows);
        let mut scales = Vec::with_capacity(self.rows);
        for i in 0..self.rows {
            let row = self.row(i);
            let lcm = row
                .iter()
                .fold(BigInt::one(), |acc, v| acc.lcm(v.denom()));
            out.push(
                row.iter()
                    .map(|v| v.numer() * (&lcm / v.denom()))
                    .collect(),
            );
            scales.push(lcm);
        }
        (out, scales)
    }

    pub fn rank(&self) -> usize {
        let (mut m, _) = self.integer_rows();
        fraction_free_rref(&mut m, self.cols).pivots.len()
    }

    /// Exact inverse.
    pub fn invert(&self) -> Result<RationalMatrix, LinalgError> {
        if !self.is_square() {
            return Err(LinalgError::NotSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        let n = self.rows;
        let (mut m, scales) = self.integer_rows();
        for (i, row) in m.iter_mut().enumerate() {
            row.extend((0..n).map(|j| if i == j { BigInt::one() } else { BigInt::zero() }));
        }
        let rref = fraction_free_rref(&mut m, n);
        if rref.pivots.len() < n {
            return Err(LinalgError::Singular {
                rank: rref.pivots.len(),
                n,
            });
        }
        // m = [d·I | d·(D·A)⁻¹], and A⁻¹ = (D·A)⁻¹·D.
        let mut inv = RationalMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                inv[(i, j)] = Rational::new(&m[i][n + j] * &scales[j], rref.det.clone());
            }
        }
        Ok(inv)
    }

    /// Right null space basis of a skew-symmetric matrix together with its rank.
    pub fn kernel_basis(&self) -> Result<Kernel, LinalgError> {
        self.check_skew()?;
        let k = self.nullspace();
        assert!(k.rank.is_multiple_of(2), "skew-symmetric rank must be even");
        Ok(k)
    }

    /// Right null space basis of an arbitrary matrix.
    pub fn nullspace(&self) -> Kernel {
        let n = self.cols;
        let (mut m, _) = self.integer_rows();
        let rref = fraction_free_rref(&mut m, n);
        let mut is_pivot = vec![false; n];
        for &c in &rref.pivots {
            is_pivot[c] = true;
        }
        let mut basis = Vec::new();
        for f in (0..n).filter(|&c| !is_pivot[c]) {
            let mut v = vec![Rational::zero(); n];
            v[f] = Rational::one();
            for (row, &pc) in rref.pivots.iter().enumerate() {
                v[pc] = -Rational::new(m[row][f].clone(), rref.det.clone());
            }
            basis.push(v);
        }
        Kernel {
            rank: rref.pivots.len(),
            basis,
        }
    }

    /// Congruence reduction `P·S·Pᵀ = J₂ ⊕ … ⊕ J₂ ⊕ 0 ⊕ … ⊕ 0` with the
    /// symplectic blocks `[[0,1],[-1,0]]` first.
    pub fn skew_canonicalize(&self) -> Result<SkewCanonical, LinalgError> {
        self.check_skew()?;
        let n = self.rows;
        let mut a = self.clone();
        let mut p = RationalMatrix::identity(n);
        let mut k = 0;
        while k + 1 < n {
            let Some((i, j)) = find_pivot(&a, k) else {
                break;
            };
            congruent_swap(&mut a, &mut p, k, i);
            congruent_swap(&mut a, &mut p, k + 1, j);
            let inv = a[(k, k + 1)].recip();
            if !inv.is_one() {
                for c in 0..n {
                    a[(k, c)] *= &inv;
                    p[(k, c)] *= &inv;
                }
                for r in 0..n {
                    a[(r, k)] *= &inv;
                }
            }
            for m in k + 2..n {
                let u = a[(m, k)].clone();
                let v = a[(m, k + 1)].clone();
                if u.is_zero() && v.is_zero() {
                    continue;
                }
                // row_m ← row_m − v·row_k + u·row_{k+1}, then the same on columns.
                for c in 0..n {
                    let delta = &a[(k + 1, c)] * &u - &a[(k, c)] * &v;
                    a[(m, c)] += delta;
                    let delta = &p[(k + 1, c)] * &u - &p[(k, c)] * &v;
                    p[(m, c)] += delta;
                }
                for r in 0..n {
                    let delta = &a[(r, k + 1)] * &u - &a[(r, k)] * &v;
                    a[(r, m)] += delta;
                }
            }
            k += 2;
        }
        debug_assert_eq!(a, canonical_pattern(n, k));
        Ok(SkewCanonical { p, rank: k })
    }

    pub fn determinant(&self) -> Result<Rational, LinalgError> {
        if !self.is_square() {
            return Err(LinalgError::NotSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        let n = self.rows;
        let (mut m, scales) = self.integer_rows();
        let rref = fraction_free_rref(&mut m, n);
        if rref.pivots.len() < n {
            return Ok(Rational::zero());
        }
        let scale = scales.iter().fold(BigInt::one(), |acc, s| acc * s);
        let det = if rref.swaps % 2 == 1 { -rref.det } else { rref.det };
        Ok(Rational::new(det, scale))
    }
}

/// The block-diagonal Darboux pattern: `r/2` blocks `[[0,1],[-1,0]]`, then zeros.
pub fn canonical_pattern(n: usize, r: usize) -> RationalMatrix {
    let mut m = RationalMatrix::zeros(n, n);
    for b in 0..r / 2 {
        m[(2 * b, 2 * b + 1)] = Rational::one();
        m[(2 * b + 1, 2 * b)] = -Rational::one();
    }
    m
}

/// Largest entry of the trailing upper triangle, first in scan order on ties.
/// Keeps the elimination multipliers at most one in magnitude.
fn find_pivot(a: &RationalMatrix, k: usize) -> Option<(usize, usize)> {
    let n = a.rows;
    let mut best: Option<((usize, usize), Rational)> = None;
    for i in k..n {
        for j in i + 1..n {
            let v = a[(i, j)].abs();
            if !v.is_zero() && best.as_ref().is_none_or(|(_, b)| v > *b) {
                best = Some(((i, j), v));
            }
        }
    }
    best.map(|(ij, _)| ij)
}

fn congruent_swap(a: &mut RationalMatrix, p: &mut RationalMatrix, x: usize, y: usize) {
    if x == y {
        return;
    }
    let n = a.rows;
    for c in 0..n {
        a.data.swap(x * n + c, y * n + c);
        p.data.swap(x * n + c, y * n + c);
    }
    for r in 0..n {
        a.data.swap(r * n + x, r * n + y);
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Kernel {
    pub rank: usize,
    pub basis: Vec<Vec<Rational>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkewCanonical {
    pub p: RationalMatrix,
    pub rank: usize,
}

struct Rref {
    pivots: Vec<usize>,
    /// Common value of every pivot entry after reduction.
    det: BigInt,
    swaps: usize,
}

/// Fraction-free Gauss–Jordan on the first `pivot_cols` columns. After return
/// each pivot row has the value `det` in its pivot column and zeros in every
/// other pivot column; non-pivot rows are zero on the first `pivot_cols` columns.
fn fraction_free_rref(m: &mut [Vec<BigInt>], pivot_cols: usize) -> Rref {
    let rows = m.len();
    let width = m.first().map_or(0, Vec::len);
    let mut prev = BigInt::one();
    let mut pivots = Vec::new();
    let mut swaps = 0;
    let mut r = 0;
    for col in 0..pivot_cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !m[i][col].is_zero()) else {
            continue;
        };
        if p != r {
            m.swap(p, r);
            swaps += 1;
        }
        let pivot = m[r][col].clone();
        for i in 0..rows {
            if i == r {
                continue;
            }
            let factor = m[i][col].clone();
            for j in 0..width {
                let num = &pivot * &m[i][j] - &factor * &m[r][j];
                let (q, rem) = num.div_rem(&prev);
                debug_assert!(rem.is_zero(), "inexact fraction-free division");
                m[i][j] = q;
            }
        }
        prev = pivot;
        pivots.push(col);
        r += 1;
    }
    Rref {
        pivots,
        det: prev,
        swaps,
    }
}

impl Index<(usize, usize)> for RationalMatrix {
    type Output = Rational;
    fn index(&self, (i, j): (usize, usize)) -> &Rational {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for RationalMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Rational {
        &mut self.data[i * self.cols + j]
    }
}

impl Mul for &RationalMatrix {
    type Output = RationalMatrix;
    fn mul(self, rhs: &RationalMatrix) -> RationalMatrix {
        assert_eq!(self.cols, rhs.rows, "matrix product dimension mismatch");
        let mut out = RationalMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    out[(i, j)] += a * &rhs[(k, j)];
                }
            }
        }
        out
    }
}

impl fmt::Display for RationalMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cells: Vec<String> = self.data.iter().map(format_rational).collect();
        let width = cells.iter().map(String::len).max().unwrap_or(1);
        for i in 0..self.rows {
            write!(f, "[")?;
            for j in 0..self.cols {
                if j > 0 {
                    write!(f, " ")?;
                }
                write!(f, "{:>width$}", cells[i * self.cols + j])?;
            }
            writeln!(f, "]")?;
        }
        Ok(())
    }
}

/// Infinity-norm size of the largest entry, used in diagnostics.
pub fn max_abs(m: &RationalMatrix) -> Rational {
    m.data
        .iter()
        .map(Signed::abs)
        .max()
        .unwrap_or_else(Rational::zero)
}
