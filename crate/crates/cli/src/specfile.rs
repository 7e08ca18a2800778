//! TOML spec files. Matrix entries are rational strings; indices in error
//! messages are one-based.

use std::fmt;

use genpoisson::dynamics::Method;
use genpoisson::expr::Expression;
use genpoisson::family::{FamilyError, FamilySpec};
use genpoisson::presets::Preset;
use genpoisson::psi::{Interval, PsiKind, PsiTriple};
use genpoisson::rational::{format_rational, parse_rational, LinalgError, Rational, RationalMatrix};
use toml::{Table, Value};

#[derive(Debug, Clone, PartialEq)]
pub struct SpecError {
    pub field: String,
    pub message: String,
}

impl fmt::Display for SpecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

impl std::error::Error for SpecError {}

fn err<T>(field: impl Into<String>, message: impl Into<String>) -> Result<T, SpecError> {
    Err(SpecError {
        field: field.into(),
        message: message.into(),
    })
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IntegratorSettings {
    pub method: Option<Method>,
    pub t_end: Option<f64>,
    pub dt: Option<f64>,
    pub tol: Option<f64>,
    pub x0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SamplingSettings {
    pub count: Option<usize>,
    pub seed: Option<u64>,
    pub inset: Option<f64>,
    pub window: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SpecFile {
    pub family: FamilySpec,
    pub hamiltonian: Option<Expression>,
    pub integrator: IntegratorSettings,
    pub sampling: SamplingSettings,
}

const TOP_KEYS: [&str; 8] = ["n", "S", "L", "box", "psi", "hamiltonian", "integrator", "sampling"];

pub fn parse_spec(text: &str) -> Result<SpecFile, SpecError> {
    let doc: Table = toml::from_str(text).or_else(|e: toml::de::Error| {
        let at = match e.span() {
            Some(span) => format!("line {}", line_of(text, span.start)),
            None => "syntax".to_string(),
        };
        err(at, e.message().to_string())
    })?;
    check_keys(&doc, &TOP_KEYS, "")?;

    let n = match doc.get("n") {
        Some(Value::Integer(v)) if *v >= 1 => *v as usize,
        Some(_) => return err("n", "expected a positive integer"),
        None => return err("n", "missing"),
    };
    let s = match doc.get("S") {
        Some(v) => matrix(v, "S", n)?,
        None => return err("S", "missing"),
    };
    let l = doc.get("L").map(|v| matrix(v, "L", n)).transpose()?;

    let psi_list = match doc.get("psi") {
        Some(Value::Array(a)) => a,
        Some(_) => return err("psi", "expected an array of tables ([[psi]])"),
        None => return err("psi", "missing"),
    };
    if psi_list.len() != n {
        return err("psi", format!("expected {n} entries, found {}", psi_list.len()));
    }
    let psis = psi_list
        .iter()
        .enumerate()
        .map(|(k, v)| psi(v, &format!("psi[{}]", k + 1)))
        .collect::<Result<Vec<_>, _>>()?;

    let domain_box = match doc.get("box") {
        Some(Value::Array(a)) => {
            if a.len() != n {
                return err("box", format!("expected {n} intervals, found {}", a.len()));
            }
            a.iter()
                .enumerate()
                .map(|(i, v)| interval(v, &format!("box[{}]", i + 1)))
                .collect::<Result<Vec<_>, _>>()?
        }
        Some(_) => return err("box", "expected an array of [lower, upper] pairs"),
        None if l.is_none() => psis.iter().map(PsiTriple::domain).collect(),
        None => vec![Interval::real_line(); n],
    };

    let family = FamilySpec::build(s, l.unwrap_or_else(|| RationalMatrix::identity(n)), psis, domain_box)
        .or_else(|e| match e {
            FamilyError::NotSkew(LinalgError::NotSkew { i, j, a, b }) => err(
                format!("S[{}][{}]", i + 1, j + 1),
                format!("S is not skew-symmetric: S[{}][{}] = {a} but S[{}][{}] = {b}", i + 1, j + 1, j + 1, i + 1),
            ),
            FamilyError::NotSkew(other) => err("S", other.to_string()),
            FamilyError::SingularL(e) => err("L", format!("L must be invertible ({e})")),
            FamilyError::Dimension(m) => err("n", m),
        })?;

    let hamiltonian = match doc.get("hamiltonian") {
        Some(Value::String(text)) => Some(
            Expression::parse(text, n).or_else(|e| err("hamiltonian", e.to_string()))?,
        ),
        Some(_) => return err("hamiltonian", "expected an expression string in x1..xn"),
        None => None,
    };

    let integrator = match doc.get("integrator") {
        Some(Value::Table(t)) => integrator(t, n)?,
        Some(_) => return err("integrator", "expected a table"),
        None => IntegratorSettings::default(),
    };
    let sampling = match doc.get("sampling") {
        Some(Value::Table(t)) => sampling(t)?,
        Some(_) => return err("sampling", "expected a table"),
        None => SamplingSettings::default(),
    };
    Ok(SpecFile {
        family,
        hamiltonian,
        integrator,
        sampling,
    })
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn check_keys(t: &Table, allowed: &[&str], prefix: &str) -> Result<(), SpecError> {
    for key in t.keys() {
        if !allowed.contains(&key.as_str()) {
            return err(format!("{prefix}{key}"), format!("unknown key (expected one of: {})", allowed.join(", ")));
        }
    }
    Ok(())
}

fn rational(v: &Value, field: &str) -> Result<Rational, SpecError> {
    match v {
        Value::String(s) => parse_rational(s).or_else(|_| err(field, format!("`{s}` is not a rational number"))),
        Value::Integer(i) => Ok(Rational::from_integer((*i).into())),
        Value::Float(_) => err(field, "write non-integers as rational strings such as \"1/3\" or \"0.25\""),
        _ => err(field, "expected a rational string"),
    }
}

fn matrix(v: &Value, field: &str, n: usize) -> Result<RationalMatrix, SpecError> {
    let Value::Array(rows) = v else {
        return err(field, format!("expected an array of {n} rows"));
    };
    if rows.len() != n {
        return err(field, format!("expected {n} rows, found {}", rows.len()));
    }
    let mut out = Vec::with_capacity(n);
    for (i, row) in rows.iter().enumerate() {
        let Value::Array(entries) = row else {
            return err(format!("{field}[{}]", i + 1), "expected an array");
        };
        if entries.len() != n {
            return err(format!("{field}[{}]", i + 1), format!("expected {n} entries, found {}", entries.len()));
        }
        out.push(
            entries
                .iter()
                .enumerate()
                .map(|(j, e)| rational(e, &format!("{field}[{}][{}]", i + 1, j + 1)))
                .collect::<Result<Vec<_>, _>>()?,
        );
    }
    RationalMatrix::from_rows(out).or_else(|e| err(field, e.to_string()))
}

/// A real number: TOML number, `inf`/`-inf`, or a constant expression string.
fn real(v: &Value, field: &str) -> Result<f64, SpecError> {
    match v {
        Value::Integer(i) => Ok(*i as f64),
        Value::Float(f) => Ok(*f),
        Value::String(s) => match s.trim() {
            "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
            "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
            t => Expression::parse_constant(t).or_else(|e| err(field, format!("`{s}`: {e}"))),
        },
        _ => err(field, "expected a number or constant expression string"),
    }
}

fn finite(v: &Value, field: &str) -> Result<f64, SpecError> {
    let x = real(v, field)?;
    if x.is_finite() {
        Ok(x)
    } else {
        err(field, "expected a finite number")
    }
}

fn interval(v: &Value, field: &str) -> Result<Interval, SpecError> {
    match v {
        Value::Array(a) if a.len() == 2 => {
            let lo = real(&a[0], &format!("{field}[1]"))?;
            let hi = real(&a[1], &format!("{field}[2]"))?;
            Interval::new(lo, hi).or_else(|e| err(field, e.to_string()))
        }
        _ => err(field, "expected [lower, upper]"),
    }
}

fn psi(v: &Value, field: &str) -> Result<PsiTriple, SpecError> {
    let Value::Table(t) = v else {
        return err(field, "expected a table");
    };
    let kind_name = match t.get("kind") {
        Some(Value::String(s)) => s.as_str(),
        Some(_) => return err(format!("{field}.kind"), "expected a string"),
        None => return err(format!("{field}.kind"), "missing"),
    };
    let param = |key: &str| -> Result<f64, SpecError> {
        match t.get(key) {
            Some(v) => finite(v, &format!("{field}.{key}")),
            None => err(format!("{field}.{key}"), format!("missing for kind `{kind_name}`")),
        }
    };
    let (kind, keys, default_domain): (PsiKind, &[&str], Interval) = match kind_name {
        "constant" => (PsiKind::Constant { c: param("c")? }, &["c"], Interval::real_line()),
        "linear" => (PsiKind::Linear { a: param("a")? }, &["a"], Interval::positive()),
        "power" => (
            PsiKind::Power {
                a: param("a")?,
                p: param("p")?,
            },
            &["a", "p"],
            Interval::positive(),
        ),
        "exponential" => (
            PsiKind::Exponential {
                a: param("a")?,
                b: param("b")?,
            },
            &["a", "b"],
            Interval::real_line(),
        ),
        "custom" => {
            let text = match t.get("expr") {
                Some(Value::String(s)) => s,
                Some(_) => return err(format!("{field}.expr"), "expected an expression string in w"),
                None => return err(format!("{field}.expr"), "missing for kind `custom`"),
            };
            let e = Expression::parse_univariate(text).or_else(|e| err(format!("{field}.expr"), e.to_string()))?;
            (PsiKind::Custom(e), &["expr"], Interval::real_line())
        }
        other => {
            return err(
                format!("{field}.kind"),
                format!("unknown kind `{other}` (constant, linear, power, exponential, custom)"),
            )
        }
    };
    let mut allowed = vec!["kind", "domain", "anchor"];
    allowed.extend_from_slice(keys);
    check_keys(t, &allowed, &format!("{field}."))?;
    let domain = t
        .get("domain")
        .map(|v| interval(v, &format!("{field}.domain")))
        .transpose()?
        .unwrap_or(default_domain);
    let anchor = t.get("anchor").map(|v| finite(v, &format!("{field}.anchor"))).transpose()?;
    PsiTriple::new(kind, domain, anchor).or_else(|e| err(field.to_string(), e.to_string()))
}

fn integrator(t: &Table, n: usize) -> Result<IntegratorSettings, SpecError> {
    check_keys(t, &["method", "t_end", "dt", "tol", "x0"], "integrator.")?;
    let method = match t.get("method") {
        Some(Value::String(s)) => Some(
            Method::parse(s).map_or_else(|| err("integrator.method", "expected \"rk4\" or \"rk45\""), Ok)?,
        ),
        Some(_) => return err("integrator.method", "expected \"rk4\" or \"rk45\""),
        None => None,
    };
    let get = |k: &str| t.get(k).map(|v| finite(v, &format!("integrator.{k}"))).transpose();
    let x0 = match t.get("x0") {
        Some(Value::Array(a)) => {
            if a.len() != n {
                return err("integrator.x0", format!("expected {n} coordinates, found {}", a.len()));
            }
            Some(
                a.iter()
                    .enumerate()
                    .map(|(i, v)| finite(v, &format!("integrator.x0[{}]", i + 1)))
                    .collect::<Result<Vec<_>, _>>()?,
            )
        }
        Some(_) => return err("integrator.x0", "expected an array"),
        None => None,
    };
    Ok(IntegratorSettings {
        method,
        t_end: get("t_end")?,
        dt: get("dt")?,
        tol: get("tol")?,
        x0,
    })
}

fn sampling(t: &Table) -> Result<SamplingSettings, SpecError> {
    check_keys(t, &["count", "seed", "inset", "window"], "sampling.")?;
    let int = |k: &str| match t.get(k) {
        Some(Value::Integer(v)) if *v >= 0 => Ok(Some(*v)),
        Some(_) => err(format!("sampling.{k}"), "expected a nonnegative integer"),
        None => Ok(None),
    };
    let get = |k: &str| t.get(k).map(|v| finite(v, &format!("sampling.{k}"))).transpose();
    Ok(SamplingSettings {
        count: int("count")?.map(|v| v as usize),
        seed: int("seed")?.map(|v| v as u64),
        inset: get("inset")?,
        window: get("window")?,
    })
}

fn quote(s: &str) -> String {
    Value::String(s.to_string()).to_string()
}

fn real_text(v: f64) -> String {
    if v == f64::INFINITY {
        "\"inf\"".into()
    } else if v == f64::NEG_INFINITY {
        "\"-inf\"".into()
    } else {
        format!("{v:?}")
    }
}

fn matrix_text(m: &RationalMatrix) -> String {
    let rows: Vec<String> = (0..m.rows())
        .map(|i| {
            let cells: Vec<String> = m.row(i).iter().map(|v| quote(&format_rational(v))).collect();
            format!("  [{}],", cells.join(", "))
        })
        .collect();
    format!("[\n{}\n]", rows.join("\n"))
}

/// Serializes a preset as an editable spec file.
pub fn preset_text(p: &Preset, integrator: &IntegratorSettings) -> String {
    let f = &p.family;
    let n = f.dimension();
    let mut out = String::new();
    out.push_str(&format!("# {}: {}\n", p.name, p.description));
    out.push_str(&format!("n = {n}\n\nS = {}\n\n", matrix_text(f.s())));
    if !f.l().is_identity() {
        out.push_str(&format!("L = {}\n\n", matrix_text(f.l())));
    }
    let boxes: Vec<String> = f
        .domain_box()
        .iter()
        .map(|b| format!("[{}, {}]", real_text(b.lower()), real_text(b.upper())))
        .collect();
    out.push_str(&format!("box = [{}]\n\n", boxes.join(", ")));
    out.push_str(&format!("hamiltonian = {}\n", quote(p.hamiltonian)));
    for t in f.psis() {
        out.push_str("\n[[psi]]\n");
        out.push_str(&format!("kind = {}\n", quote(t.kind().name())));
        match t.kind() {
            PsiKind::Constant { c } => out.push_str(&format!("c = {}\n", real_text(*c))),
            PsiKind::Linear { a } => out.push_str(&format!("a = {}\n", real_text(*a))),
            PsiKind::Power { a, p } => out.push_str(&format!("a = {}\np = {}\n", real_text(*a), real_text(*p))),
            PsiKind::Exponential { a, b } => {
                out.push_str(&format!("a = {}\nb = {}\n", real_text(*a), real_text(*b)))
            }
            PsiKind::Custom(e) => out.push_str(&format!("expr = {}\n", quote(&e.to_string()))),
        }
        let d = t.domain();
        out.push_str(&format!("domain = [{}, {}]\n", real_text(d.lower()), real_text(d.upper())));
        out.push_str(&format!("anchor = {}\n", real_text(t.anchor())));
    }
    out.push_str("\n[integrator]\n");
    out.push_str(&format!(
        "method = {}\n",
        quote(integrator.method.unwrap_or(Method::Rk4).name())
    ));
    out.push_str(&format!("t_end = {}\n", real_text(integrator.t_end.unwrap_or(10.0))));
    out.push_str(&format!("dt = {}\n", real_text(integrator.dt.unwrap_or(1e-3))));
    out.push_str(&format!("tol = {}\n", real_text(integrator.tol.unwrap_or(1e-10))));
    let x0: Vec<String> = p.x0.iter().map(|v| real_text(*v)).collect();
    out.push_str(&format!("x0 = [{}]\n", x0.join(", ")));
    out.push_str("\n[sampling]\ncount = 100\nseed = 7\ninset = 0.05\nwindow = 10.0\n");
    out
}
