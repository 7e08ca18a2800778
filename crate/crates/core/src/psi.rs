//! Per-coordinate triples `(ψ, ξ, φ)`: a nonvanishing function on an open
//! interval, its primitive `ξ = ∫ dw/ψ` anchored so that `ξ(anchor) = 0`, and
//! the inverse `φ = ξ⁻¹`.
//!
//! Named kinds have closed forms. A custom `ψ` given as an expression in `w`
//! gets its primitive from adaptive Simpson quadrature over a precomputed
//! panel table (in a compactified variable when the interval is unbounded)
//! and its inverse by bisection, which is safe because `ξ` is strictly
//! monotone. Nonvanishing of a custom `ψ` is checked by dense sampling only.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{EvalError, Expression};

/// Sample count used to validate a custom `ψ`.
pub const VALIDATION_SAMPLES: usize = 1024;
const QUAD_TOL: f64 = 1e-13;
const QUAD_REL_TOL: f64 = 1e-14;
const QUAD_MAX_DEPTH: u32 = 48;
const UNIFORM_PANELS: usize = 128;
const EDGE_LEVELS: std::ops::RangeInclusive<i32> = 8..=30;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PsiError {
    #[error("invalid interval ({0}, {1})")]
    InvalidInterval(f64, f64),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("psi vanishes or is not finite at w = {w}")]
    Vanishes { w: f64 },
    #[error("psi changes sign on the domain (w = {a} and w = {b})")]
    SignChange { a: f64, b: f64 },
    #[error("anchor {anchor} lies outside the domain {domain}")]
    AnchorOutside { anchor: f64, domain: Interval },
    #[error("argument {w} lies outside the domain {domain}")]
    OutOfDomain { w: f64, domain: Interval },
    #[error("argument {v} lies outside the image {image}")]
    OutOfImage { v: f64, image: Interval },
    #[error("psi evaluation failed at w = {w}: {source}")]
    Eval { w: f64, source: EvalError },
}

/// Open interval with possibly infinite endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    lower: f64,
    upper: f64,
}

impl Interval {
    pub fn new(lower: f64, upper: f64) -> Result<Self, PsiError> {
        if lower.is_nan() || upper.is_nan() || lower >= upper {
            return Err(PsiError::InvalidInterval(lower, upper));
        }
        Ok(Interval { lower, upper })
    }

    pub fn real_line() -> Self {
        Interval {
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
        }
    }

    pub fn positive() -> Self {
        Interval {
            lower: 0.0,
            upper: f64::INFINITY,
        }
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn contains(&self, w: f64) -> bool {
        w > self.lower && w < self.upper
    }

    /// Membership in the closure, restricted to finite values.
    pub fn closure_contains(&self, w: f64) -> bool {
        w.is_finite() && w >= self.lower && w <= self.upper
    }

    pub fn is_bounded(&self) -> bool {
        self.lower.is_finite() && self.upper.is_finite()
    }

    pub fn default_anchor(&self) -> f64 {
        match (self.lower.is_finite(), self.upper.is_finite()) {
            (true, true) => 0.5 * (self.lower + self.upper),
            (true, false) => self.lower + 1.0,
            (false, true) => self.upper - 1.0,
            (false, false) => 0.0,
        }
    }

    /// Intersection with `[-window, window]`, shrunk by `inset` of its width on
    /// each side. Used to pick finite sampling boxes.
    pub fn sampling_range(&self, window: f64, inset: f64) -> (f64, f64) {
        let lo = self.lower.max(-window);
        let hi = self.upper.min(window);
        let w = hi - lo;
        (lo + inset * w, hi - inset * w)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.lower, self.upper)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PsiKind {
    /// `ψ(w) = c`
    Constant { c: f64 },
    /// `ψ(w) = a·w`
    Linear { a: f64 },
    /// `ψ(w) = a·wᵖ`, `w > 0`
    Power { a: f64, p: f64 },
    /// `ψ(w) = a·exp(b·w)`
    Exponential { a: f64, b: f64 },
    /// Arbitrary expression in `w`.
    Custom(Expression),
}

impl PsiKind {
    pub fn name(&self) -> &'static str {
        match self {
            PsiKind::Constant { .. } => "constant",
            PsiKind::Linear { .. } => "linear",
            PsiKind::Power { .. } => "power",
            PsiKind::Exponential { .. } => "exponential",
            PsiKind::Custom(_) => "custom",
        }
    }
}

#[derive(Debug, Clone)]
pub struct PsiTriple {
    kind: PsiKind,
    domain: Interval,
    anchor: f64,
    image: Interval,
    custom: Option<Arc<CustomPrimitive>>,
}

impl PsiTriple {
    /// Builds and validates a triple. `anchor` defaults to
    /// [`Interval::default_anchor`].
    pub fn new(kind: PsiKind, domain: Interval, anchor: Option<f64>) -> Result<Self, PsiError> {
        let anchor = anchor.unwrap_or_else(|| domain.default_anchor());
        validate_params(&kind, &domain)?;
        let custom = match &kind {
            PsiKind::Custom(e) => {
                if !domain.contains(anchor) {
                    return Err(PsiError::AnchorOutside { anchor, domain });
                }
                Some(Arc::new(CustomPrimitive::build(e.clone(), domain, anchor)?))
            }
            _ => {
                // closed forms accept an anchor on the closure when the
                // primitive stays finite there
                if !domain.closure_contains(anchor) || !raw_closed_xi(&kind, anchor, anchor).is_finite()
                {
                    return Err(PsiError::AnchorOutside { anchor, domain });
                }
                None
            }
        };
        let mut t = PsiTriple {
            kind,
            domain,
            anchor,
            image: Interval::real_line(),
            custom,
        };
        t.image = t.compute_image();
        Ok(t)
    }

    pub fn constant(c: f64, domain: Interval, anchor: Option<f64>) -> Result<Self, PsiError> {
        Self::new(PsiKind::Constant { c }, domain, anchor)
    }

    pub fn linear(a: f64, domain: Interval, anchor: Option<f64>) -> Result<Self, PsiError> {
        Self::new(PsiKind::Linear { a }, domain, anchor)
    }

    pub fn power(a: f64, p: f64, domain: Interval, anchor: Option<f64>) -> Result<Self, PsiError> {
        Self::new(PsiKind::Power { a, p }, domain, anchor)
    }

    pub fn exponential(
        a: f64,
        b: f64,
        domain: Interval,
        anchor: Option<f64>,
    ) -> Result<Self, PsiError> {
        Self::new(PsiKind::Exponential { a, b }, domain, anchor)
    }

    pub fn custom(text: &str, domain: Interval, anchor: Option<f64>) -> Result<Self, PsiError> {
        let e = Expression::parse_univariate(text)
            .map_err(|err| PsiError::InvalidParams(err.to_string()))?;
        Self::new(PsiKind::Custom(e), domain, anchor)
    }

    pub fn kind(&self) -> &PsiKind {
        &self.kind
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    pub fn anchor(&self) -> f64 {
        self.anchor
    }

    /// `ξ(Ω)`; for custom kinds the range covered by the panel table.
    pub fn image(&self) -> Interval {
        self.image
    }

    fn check_domain(&self, w: f64) -> Result<(), PsiError> {
        if self.domain.contains(w) {
            Ok(())
        } else {
            Err(PsiError::OutOfDomain {
                w,
                domain: self.domain,
            })
        }
    }

    pub fn psi(&self, w: f64) -> Result<f64, PsiError> {
        self.check_domain(w)?;
        Ok(match &self.kind {
            PsiKind::Constant { c } => *c,
            PsiKind::Linear { a } => a * w,
            PsiKind::Power { a, p } => a * w.powf(*p),
            PsiKind::Exponential { a, b } => a * (b * w).exp(),
            PsiKind::Custom(e) => e.eval1(w).map_err(|source| PsiError::Eval { w, source })?,
        })
    }

    pub fn psi_prime(&self, w: f64) -> Result<f64, PsiError> {
        self.check_domain(w)?;
        Ok(match &self.kind {
            PsiKind::Constant { .. } => 0.0,
            PsiKind::Linear { a } => *a,
            PsiKind::Power { a, p } => a * p * w.powf(p - 1.0),
            PsiKind::Exponential { a, b } => a * b * (b * w).exp(),
            PsiKind::Custom(_) => {
                let c = self.custom.as_ref().expect("custom table");
                c.derivative
                    .eval1(w)
                    .map_err(|source| PsiError::Eval { w, source })?
            }
        })
    }

    /// Anchored primitive `ξ(w)`, with `ξ′ = 1/ψ` and `ξ(anchor) = 0`.
    pub fn xi(&self, w: f64) -> Result<f64, PsiError> {
        self.check_domain(w)?;
        match &self.custom {
            Some(c) => Ok(c.xi(w)),
            None => Ok(raw_closed_xi(&self.kind, w, self.anchor)),
        }
    }

    /// Inverse of [`PsiTriple::xi`].
    pub fn phi(&self, v: f64) -> Result<f64, PsiError> {
        let inside = self.image.contains(v)
            || (v.is_finite() && (v == self.image.lower || v == self.image.upper) && self.custom.is_some());
        if !inside {
            return Err(PsiError::OutOfImage {
                v,
                image: self.image,
            });
        }
        let w = match &self.custom {
            Some(c) => c.phi(v),
            None => closed_phi(&self.kind, v, self.anchor),
        };
        if w.is_finite() {
            Ok(w)
        } else {
            Err(PsiError::OutOfImage {
                v,
                image: self.image,
            })
        }
    }

    /// Text of `ξ(arg)` as an expression, usable with [`Expression::parse`]
    /// when the kind has a closed form; `None` for custom kinds.
    pub fn xi_formula(&self, arg: &str) -> Option<String> {
        let n = |v: f64| {
            if v < 0.0 {
                format!("({v:?})")
            } else {
                format!("{v:?}")
            }
        };
        let anc = n(self.anchor);
        Some(match &self.kind {
            PsiKind::Constant { c } => format!("(({arg}) - {anc}) / {}", n(*c)),
            PsiKind::Linear { a } => format!("ln(({arg}) / {anc}) / {}", n(*a)),
            PsiKind::Power { a, p } if *p == 1.0 => format!("ln(({arg}) / {anc}) / {}", n(*a)),
            PsiKind::Power { a, p } => {
                let q = 1.0 - p;
                format!("(({arg})^{} - {}) / {}", n(q), n(self.anchor.powf(q)), n(a * q))
            }
            PsiKind::Exponential { a, b } if *b == 0.0 => format!("(({arg}) - {anc}) / {}", n(*a)),
            PsiKind::Exponential { a, b } => format!(
                "({} - exp({} * ({arg}))) / {}",
                n((-b * self.anchor).exp()),
                n(-b),
                n(a * b)
            ),
            PsiKind::Custom(_) => return None,
        })
    }

    /// Human-readable description of ψ.
    pub fn describe(&self) -> String {
        match &self.kind {
            PsiKind::Constant { c } => format!("{c}"),
            PsiKind::Linear { a } => format!("{a}*w"),
            PsiKind::Power { a, p } => format!("{a}*w^{p}"),
            PsiKind::Exponential { a, b } => format!("{a}*exp({b}*w)"),
            PsiKind::Custom(e) => e.to_string(),
        }
    }

    fn compute_image(&self) -> Interval {
        let (a, b) = match &self.custom {
            Some(c) => (c.xi_at_first_node(), c.xi_at_last_node()),
            None => (
                raw_closed_xi(&self.kind, self.domain.lower, self.anchor),
                raw_closed_xi(&self.kind, self.domain.upper, self.anchor),
            ),
        };
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        Interval {
            lower: if lo.is_nan() { f64::NEG_INFINITY } else { lo },
            upper: if hi.is_nan() { f64::INFINITY } else { hi },
        }
    }
}

fn validate_params(kind: &PsiKind, domain: &Interval) -> Result<(), PsiError> {
    let nonzero = |name: &str, v: f64| {
        if v == 0.0 || !v.is_finite() {
            Err(PsiError::InvalidParams(format!("{name} must be finite and nonzero")))
        } else {
            Ok(())
        }
    };
    match kind {
        PsiKind::Constant { c } => nonzero("c", *c),
        PsiKind::Linear { a } => {
            nonzero("a", *a)?;
            if domain.lower < 0.0 && domain.upper > 0.0 {
                return Err(PsiError::Vanishes { w: 0.0 });
            }
            Ok(())
        }
        PsiKind::Power { a, p } => {
            nonzero("a", *a)?;
            if !p.is_finite() {
                return Err(PsiError::InvalidParams("p must be finite".into()));
            }
            if domain.lower < 0.0 {
                return Err(PsiError::InvalidParams(
                    "power kind requires a domain inside (0, inf)".into(),
                ));
            }
            Ok(())
        }
        PsiKind::Exponential { a, b } => {
            nonzero("a", *a)?;
            if !b.is_finite() {
                return Err(PsiError::InvalidParams("b must be finite".into()));
            }
            Ok(())
        }
        PsiKind::Custom(e) => {
            if e.dimension() != 1 {
                return Err(PsiError::InvalidParams("custom psi must be univariate".into()));
            }
            Ok(())
        }
    }
}

/// Closed-form primitive anchored at `anchor`. Evaluated in IEEE arithmetic so
/// that infinite endpoints give the limiting values.
fn raw_closed_xi(kind: &PsiKind, w: f64, anchor: f64) -> f64 {
    match *kind {
        PsiKind::Constant { c } => (w - anchor) / c,
        PsiKind::Linear { a } => (w / anchor).ln() / a,
        PsiKind::Power { a, p } if p == 1.0 => (w / anchor).ln() / a,
        PsiKind::Power { a, p } => {
            let q = 1.0 - p;
            (w.powf(q) - anchor.powf(q)) / (a * q)
        }
        PsiKind::Exponential { a, b } if b == 0.0 => (w - anchor) / a,
        PsiKind::Exponential { a, b } => ((-b * anchor).exp() - (-b * w).exp()) / (a * b),
        PsiKind::Custom(_) => unreachable!("custom primitives use the panel table"),
    }
}

fn closed_phi(kind: &PsiKind, v: f64, anchor: f64) -> f64 {
    match *kind {
        PsiKind::Constant { c } => anchor + c * v,
        PsiKind::Linear { a } => anchor * (a * v).exp(),
        PsiKind::Power { a, p } if p == 1.0 => anchor * (a * v).exp(),
        PsiKind::Power { a, p } => {
            let q = 1.0 - p;
            (anchor.powf(q) + a * q * v).powf(1.0 / q)
        }
        PsiKind::Exponential { a, b } if b == 0.0 => anchor + a * v,
        PsiKind::Exponential { a, b } => -((-b * anchor).exp() - a * b * v).ln() / b,
        PsiKind::Custom(_) => unreachable!("custom primitives use the panel table"),
    }
}

/// Map between the domain variable `w` and a bounded quadrature variable `t`.
#[derive(Debug, Clone, Copy)]
enum Chart {
    /// `w = t` on a bounded interval.
    Identity { lo: f64, hi: f64 },
    /// `w = a + t/(1-t)`, `t ∈ (0, 1)`.
    Upper { a: f64 },
    /// `w = b + t/(1+t)`, `t ∈ (-1, 0)`.
    Lower { b: f64 },
    /// `w = t/(1-t²)`, `t ∈ (-1, 1)`.
    Both,
}

impl Chart {
    fn for_interval(d: &Interval) -> Self {
        match (d.lower.is_finite(), d.upper.is_finite()) {
            (true, true) => Chart::Identity {
                lo: d.lower,
                hi: d.upper,
            },
            (true, false) => Chart::Upper { a: d.lower },
            (false, true) => Chart::Lower { b: d.upper },
            (false, false) => Chart::Both,
        }
    }

    fn t_range(&self) -> (f64, f64) {
        match *self {
            Chart::Identity { lo, hi } => (lo, hi),
            Chart::Upper { .. } => (0.0, 1.0),
            Chart::Lower { .. } => (-1.0, 0.0),
            Chart::Both => (-1.0, 1.0),
        }
    }

    fn w(&self, t: f64) -> f64 {
        match *self {
            Chart::Identity { .. } => t,
            Chart::Upper { a } => a + t / (1.0 - t),
            Chart::Lower { b } => b + t / (1.0 + t),
            Chart::Both => t / (1.0 - t * t),
        }
    }

    fn dw_dt(&self, t: f64) -> f64 {
        match *self {
            Chart::Identity { .. } => 1.0,
            Chart::Upper { .. } => 1.0 / ((1.0 - t) * (1.0 - t)),
            Chart::Lower { .. } => 1.0 / ((1.0 + t) * (1.0 + t)),
            Chart::Both => {
                let d = 1.0 - t * t;
                (1.0 + t * t) / (d * d)
            }
        }
    }

    fn t(&self, w: f64) -> f64 {
        match *self {
            Chart::Identity { .. } => w,
            Chart::Upper { a } => {
                let s = w - a;
                s / (1.0 + s)
            }
            Chart::Lower { b } => {
                let s = w - b;
                s / (1.0 - s)
            }
            Chart::Both => 2.0 * w / (1.0 + (1.0 + 4.0 * w * w).sqrt()),
        }
    }
}

/// Quadrature-backed primitive of `1/ψ` for a custom expression.
#[derive(Debug)]
struct CustomPrimitive {
    psi: Expression,
    derivative: Expression,
    chart: Chart,
    /// Quadrature nodes in `t`, increasing.
    nodes: Vec<f64>,
    /// `∫_{nodes[0]}^{nodes[j]} dw/ψ`
    cumulative: Vec<f64>,
    /// Cumulative value at the anchor; subtracted from every result.
    offset: f64,
    increasing: bool,
}

impl CustomPrimitive {
    fn build(psi: Expression, domain: Interval, anchor: f64) -> Result<Self, PsiError> {
        let chart = Chart::for_interval(&domain);
        let (t0, t1) = chart.t_range();
        let width = t1 - t0;

        let eval = |w: f64| -> Result<f64, PsiError> {
            let v = psi.eval1(w).map_err(|source| PsiError::Eval { w, source })?;
            if v == 0.0 || !v.is_finite() {
                return Err(PsiError::Vanishes { w });
            }
            Ok(v)
        };

        // dense sign check plus points hugging both ends
        let mut first: Option<(f64, f64)> = None;
        let edge = 2f64.powi(-*EDGE_LEVELS.end());
        let samples = (0..VALIDATION_SAMPLES)
            .map(|k| (k as f64 + 0.5) / VALIDATION_SAMPLES as f64)
            .chain([edge, 1.0 - edge]);
        for u in samples {
            let w = chart.w(t0 + width * u);
            if !domain.contains(w) {
                continue;
            }
            let v = eval(w)?;
            match first {
                None => first = Some((w, v)),
                Some((w0, v0)) if v0.signum() != v.signum() => {
                    return Err(PsiError::SignChange { a: w0, b: w })
                }
                _ => {}
            }
        }
        let increasing = first.is_none_or(|(_, v)| v > 0.0);

        let mut us: Vec<f64> = (0..=UNIFORM_PANELS)
            .map(|k| k as f64 / UNIFORM_PANELS as f64)
            .collect();
        us[0] = edge;
        us[UNIFORM_PANELS] = 1.0 - edge;
        for k in EDGE_LEVELS {
            let e = 2f64.powi(-k);
            us.push(e);
            us.push(1.0 - e);
        }
        us.sort_by(f64::total_cmp);
        us.dedup();
        let mut nodes: Vec<f64> = us.into_iter().map(|u| t0 + width * u).collect();
        nodes.retain(|&t| domain.contains(chart.w(t)));
        nodes.dedup_by(|a, b| chart.w(*a) == chart.w(*b));

        let derivative = psi.differentiate(0).expect("univariate");
        let mut prim = CustomPrimitive {
            psi,
            derivative,
            chart,
            nodes,
            cumulative: Vec::new(),
            offset: 0.0,
            increasing,
        };
        let mut acc = 0.0;
        let mut cumulative = vec![0.0];
        for pair in prim.nodes.windows(2) {
            acc += prim.integrate(pair[0], pair[1]);
            cumulative.push(acc);
        }
        if !cumulative.iter().all(|v| v.is_finite()) {
            return Err(PsiError::InvalidParams(
                "primitive of 1/psi is not finite on the domain".into(),
            ));
        }
        prim.cumulative = cumulative;
        prim.offset = prim.raw(chart.t(anchor));
        Ok(prim)
    }

    fn integrand(&self, t: f64) -> f64 {
        let w = self.chart.w(t);
        match self.psi.eval1(w) {
            Ok(v) => self.chart.dw_dt(t) / v,
            Err(_) => f64::NAN,
        }
    }

    fn integrate(&self, a: f64, b: f64) -> f64 {
        if a == b {
            return 0.0;
        }
        adaptive_simpson(&|t| self.integrand(t), a, b, QUAD_TOL)
    }

    /// Cumulative primitive from the first node, without the anchor offset.
    fn raw(&self, t: f64) -> f64 {
        let j = match self.nodes.partition_point(|&n| n <= t) {
            0 => 0,
            k => k - 1,
        };
        let j = j.min(self.nodes.len() - 1);
        // integrate from the nearer end of the panel
        if j + 1 < self.nodes.len() && (self.nodes[j + 1] - t) < (t - self.nodes[j]) {
            self.cumulative[j + 1] - self.integrate(t, self.nodes[j + 1])
        } else {
            self.cumulative[j] + self.integrate(self.nodes[j], t)
        }
    }

    fn xi(&self, w: f64) -> f64 {
        self.raw(self.chart.t(w)) - self.offset
    }

    fn xi_at_first_node(&self) -> f64 {
        self.cumulative[0] - self.offset
    }

    fn xi_at_last_node(&self) -> f64 {
        self.cumulative[self.cumulative.len() - 1] - self.offset
    }

    fn phi(&self, v: f64) -> f64 {
        let target = v + self.offset;
        // locate the panel, then bisect in w
        let j = if self.increasing {
            self.cumulative.partition_point(|&c| c <= target)
        } else {
            self.cumulative.partition_point(|&c| c >= target)
        };
        let j = j.clamp(1, self.nodes.len() - 1);
        let mut lo = self.chart.w(self.nodes[j - 1]);
        let mut hi = self.chart.w(self.nodes[j]);
        let residual = |w: f64| {
            let r = self.raw(self.chart.t(w)) - target;
            if self.increasing {
                r
            } else {
                -r
            }
        };
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if residual(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * mid.abs().max(1.0) {
                break;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Adaptive Simpson with Richardson correction.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, QUAD_MAX_DEPTH)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let both = left + right;
    let err = both - whole;
    let bound = 15.0 * tol.max(QUAD_REL_TOL * both.abs());
    if depth == 0 || err.abs() <= bound || !(lm > a && rm < b) {
        return both + err / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}
