//! Poisson dynamics `ẋ = J(x)·∇H(x)` with conservation diagnostics.

use std::io::{self, Write};

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

use crate::casimir::CasimirSet;
use crate::darboux::{mat_vec, DarbouxChart, DarbouxError};
use crate::expr::{EvalError, Expression};
use crate::family::{DomainError, FamilySpec};
use crate::numeric::fd_step;

/// Relative tolerance of the setup-time gradient check.
pub const GRADIENT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Rk4,
    Rk45,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Rk4 => "rk4",
            Method::Rk45 => "rk45",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        match s {
            "rk4" => Some(Method::Rk4),
            "rk45" => Some(Method::Rk45),
            _ => None,
        }
    }
}

/// For rk4, `dt` is the step. For rk45, `dt` is the output grid spacing
/// and the largest step; `tol` is used as both absolute and relative tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegrateOptions {
    pub method: Method,
    pub t_end: f64,
    pub dt: f64,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegratorMeta {
    pub method: Method,
    pub dt: f64,
    pub tol: f64,
    pub accepted: usize,
    pub rejected: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub h_values: Vec<f64>,
    pub d_values: Vec<Vec<f64>>,
    pub meta: IntegratorMeta,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("hamiltonian has dimension {got}, family has dimension {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("hamiltonian cannot be evaluated at the probe point: {0}")]
    Probe(String),
    #[error("symbolic dH/dx{coord} = {analytic} disagrees with the finite difference {fd}")]
    GradientMismatch { coord: usize, analytic: f64, fd: f64 },
    #[error("invalid integration options: {0}")]
    Options(String),
    #[error("state left the domain at t = {time}: {message}")]
    DomainExit {
        time: f64,
        coord: Option<usize>,
        message: String,
        partial: Box<Trajectory>,
    },
    #[error("step size underflow at t = {time}")]
    StepUnderflow { time: f64, partial: Box<Trajectory> },
    #[error("transformed system left its domain at t = {time}: {message}")]
    ChartExit { time: f64, message: String },
}

/// Failure of a field or state evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldFailure {
    pub coord: Option<usize>,
    pub message: String,
}

impl From<DomainError> for FieldFailure {
    fn from(e: DomainError) -> Self {
        let coord = match &e {
            DomainError::OutsideBox { coord, .. }
            | DomainError::LambdaOutside { coord, .. }
            | DomainError::Psi { coord, .. } => Some(*coord),
            DomainError::Dimension { .. } => None,
        };
        FieldFailure {
            coord,
            message: e.to_string(),
        }
    }
}

impl From<EvalError> for FieldFailure {
    fn from(e: EvalError) -> Self {
        FieldFailure {
            coord: None,
            message: format!("hamiltonian: {e}"),
        }
    }
}

impl From<DarbouxError> for FieldFailure {
    fn from(e: DarbouxError) -> Self {
        match e {
            DarbouxError::Domain(d) => d.into(),
            DarbouxError::OutOfImage { coord, .. } => FieldFailure {
                coord: Some(coord),
                message: e.to_string(),
            },
            other => FieldFailure {
                coord: None,
                message: other.to_string(),
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct PoissonSystem {
    spec: FamilySpec,
    h: Expression,
    grad: Vec<Expression>,
    casimirs: CasimirSet,
}

impl PoissonSystem {
    /// Builds the system and checks the symbolic gradient against central
    /// differences at `probe`.
    pub fn new(spec: &FamilySpec, h: Expression, probe: &[f64]) -> Result<Self, DynamicsError> {
        let n = spec.dimension();
        if h.dimension() != n {
            return Err(DynamicsError::Dimension {
                expected: n,
                got: h.dimension(),
            });
        }
        let grad = h.gradient();
        let sys = PoissonSystem {
            spec: spec.clone(),
            casimirs: CasimirSet::build(spec),
            h,
            grad,
        };
        sys.check_gradient(probe)?;
        Ok(sys)
    }

    fn check_gradient(&self, x: &[f64]) -> Result<(), DynamicsError> {
        let probe = |e: EvalError| DynamicsError::Probe(e.to_string());
        let g = self.grad_h(x).map_err(probe)?;
        let mut p = x.to_vec();
        for (i, &ga) in g.iter().enumerate() {
            let step = fd_step(x[i]);
            p[i] = x[i] + step;
            let up = self.h.eval(&p).map_err(probe)?;
            p[i] = x[i] - step;
            let down = self.h.eval(&p).map_err(probe)?;
            p[i] = x[i];
            let fd = (up - down) / (2.0 * step);
            if (ga - fd).abs() > GRADIENT_TOL * ga.abs().max(fd.abs()).max(1.0) {
                return Err(DynamicsError::GradientMismatch {
                    coord: i + 1,
                    analytic: ga,
                    fd,
                });
            }
        }
        Ok(())
    }

    pub fn spec(&self) -> &FamilySpec {
        &self.spec
    }

    pub fn hamiltonian(&self) -> &Expression {
        &self.h
    }

    pub fn gradient_exprs(&self) -> &[Expression] {
        &self.grad
    }

    pub fn casimirs(&self) -> &CasimirSet {
        &self.casimirs
    }

    pub fn grad_h(&self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        self.grad.iter().map(|g| g.eval(x)).collect()
    }

    pub fn vector_field(&self, x: &[f64]) -> Result<Vec<f64>, FieldFailure> {
        let j = self.spec.eval_j(x)?.j;
        let g = self.grad_h(x)?;
        Ok(mat_vec(&j, &g))
    }

    pub fn integrate(&self, x0: &[f64], opts: &IntegrateOptions) -> Result<Trajectory, DynamicsError> {
        let field = |x: &[f64]| self.vector_field(x);
        let inside = |x: &[f64]| self.spec.check_domain(x).map(|_| ()).map_err(FieldFailure::from);
        let run = integrate_field(field, inside, x0, opts)?;
        let traj = |path: Path| self.decorate(path, opts);
        match run {
            Ok(path) => Ok(traj(path)),
            Err((path, Stop::Exit { time, failure })) => Err(DynamicsError::DomainExit {
                time,
                coord: failure.coord,
                message: failure.message,
                partial: Box::new(traj(path)),
            }),
            Err((path, Stop::Underflow { time })) => Err(DynamicsError::StepUnderflow {
                time,
                partial: Box::new(traj(path)),
            }),
        }
    }

    fn decorate(&self, path: Path, opts: &IntegrateOptions) -> Trajectory {
        let h_values = path
            .states
            .iter()
            .map(|x| self.h.eval(x).unwrap_or(f64::NAN))
            .collect();
        let d_values = path
            .states
            .iter()
            .map(|x| self.casimirs.values(x).unwrap_or_default())
            .collect();
        Trajectory {
            times: path.times,
            states: path.states,
            h_values,
            d_values,
            meta: IntegratorMeta {
                method: opts.method,
                dt: opts.dt,
                tol: opts.tol,
                accepted: path.accepted,
                rejected: path.rejected,
            },
        }
    }

    /// Compares `z(x(t))` with the flow of the transformed system
    /// `ż = C·∇_z (H ∘ x)(z)`, `C` the canonical pattern, at the output grid.
    pub fn flow_equivariance_check(
        &self,
        chart: &DarbouxChart,
        x0: &[f64],
        opts: &IntegrateOptions,
    ) -> Result<f64, DynamicsError> {
        let x_traj = self.integrate(x0, opts)?;
        let z0 = chart.to_z(x0).map_err(|e| DynamicsError::ChartExit {
            time: 0.0,
            message: e.to_string(),
        })?;
        let canon = chart.canonical_f64().clone();
        let field = |z: &[f64]| -> Result<Vec<f64>, FieldFailure> {
            let x = chart.from_z(z)?;
            let g = self.grad_h(&x)?;
            let dxdz: DMatrix<f64> = chart.x_jacobian_wrt_z(&x)?;
            let gz = mat_vec(&dxdz.transpose(), &g);
            Ok(mat_vec(&canon, &gz))
        };
        let inside = |z: &[f64]| chart.from_z(z).map(|_| ()).map_err(FieldFailure::from);
        let z_path = match integrate_field(field, inside, &z0, opts)? {
            Ok(p) => p,
            Err((_, Stop::Exit { time, failure })) => {
                return Err(DynamicsError::ChartExit {
                    time,
                    message: failure.message,
                })
            }
            Err((_, Stop::Underflow { time })) => {
                return Err(DynamicsError::ChartExit {
                    time,
                    message: "step size underflow".into(),
                })
            }
        };
        let grid = output_grid(opts);
        let mut worst = 0.0f64;
        for t in grid {
            let ix = x_traj.times.iter().position(|&s| s == t);
            let iz = z_path.times.iter().position(|&s| s == t);
            let (Some(ix), Some(iz)) = (ix, iz) else {
                continue;
            };
            let zx = chart.to_z(&x_traj.states[ix]).map_err(|e| DynamicsError::ChartExit {
                time: t,
                message: e.to_string(),
            })?;
            for (a, b) in zx.iter().zip(&z_path.states[iz]) {
                worst = worst.max((a - b).abs());
            }
        }
        Ok(worst)
    }
}

/// Output grid `0, dt, 2dt, …, t_end`, the last point clipped.
pub fn output_grid(opts: &IntegrateOptions) -> Vec<f64> {
    let mut out = vec![0.0];
    let mut k = 1u64;
    loop {
        let t = grid_time(k, opts);
        out.push(t);
        if t >= opts.t_end {
            return out;
        }
        k += 1;
    }
}

fn grid_time(k: u64, opts: &IntegrateOptions) -> f64 {
    let t = k as f64 * opts.dt;
    if t >= opts.t_end || opts.t_end - t <= 1e-9 * opts.dt {
        opts.t_end
    } else {
        t
    }
}

/// Raw integration output.
#[derive(Debug, Clone, Default)]
pub struct Path {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub accepted: usize,
    pub rejected: usize,
}

#[derive(Debug, Clone)]
pub enum Stop {
    Exit { time: f64, failure: FieldFailure },
    Underflow { time: f64 },
}

fn validate(opts: &IntegrateOptions) -> Result<(), DynamicsError> {
    let bad = |m: &str| Err(DynamicsError::Options(m.to_string()));
    if !(opts.t_end.is_finite() && opts.t_end > 0.0) {
        return bad("t_end must be positive");
    }
    if !(opts.dt.is_finite() && opts.dt > 0.0) {
        return bad("dt must be positive");
    }
    if opts.method == Method::Rk45 && !(opts.tol.is_finite() && opts.tol > 0.0) {
        return bad("tol must be positive");
    }
    Ok(())
}

fn axpy(x: &[f64], h: f64, terms: &[(f64, &[f64])]) -> Vec<f64> {
    x.iter()
        .enumerate()
        .map(|(i, &xi)| xi + h * terms.iter().map(|(c, k)| c * k[i]).sum::<f64>())
        .collect()
}

/// Integrates `field` from `x0`. The outer error is an options error; the
/// inner one carries the partial path.
pub fn integrate_field<F, G>(
    field: F,
    inside: G,
    x0: &[f64],
    opts: &IntegrateOptions,
) -> Result<Result<Path, (Path, Stop)>, DynamicsError>
where
    F: Fn(&[f64]) -> Result<Vec<f64>, FieldFailure>,
    G: Fn(&[f64]) -> Result<(), FieldFailure>,
{
    validate(opts)?;
    let mut path = Path::default();
    if let Err(failure) = inside(x0) {
        return Ok(Err((path, Stop::Exit { time: 0.0, failure })));
    }
    path.times.push(0.0);
    path.states.push(x0.to_vec());
    Ok(match opts.method {
        Method::Rk4 => rk4(&field, &inside, path, opts),
        Method::Rk45 => rk45(&field, &inside, path, opts),
    })
}

fn rk4<F, G>(field: &F, inside: &G, mut path: Path, opts: &IntegrateOptions) -> Result<Path, (Path, Stop)>
where
    F: Fn(&[f64]) -> Result<Vec<f64>, FieldFailure>,
    G: Fn(&[f64]) -> Result<(), FieldFailure>,
{
    let mut t = 0.0;
    let mut x = path.states[0].clone();
    let mut k = 1u64;
    while t < opts.t_end {
        let t_next = grid_time(k, opts);
        let h = t_next - t;
        let step = || -> Result<Vec<f64>, FieldFailure> {
            let k1 = field(&x)?;
            let k2 = field(&axpy(&x, h / 2.0, &[(1.0, &k1)]))?;
            let k3 = field(&axpy(&x, h / 2.0, &[(1.0, &k2)]))?;
            let k4 = field(&axpy(&x, h, &[(1.0, &k3)]))?;
            let next = axpy(&x, h / 6.0, &[(1.0, &k1), (2.0, &k2), (2.0, &k3), (1.0, &k4)]);
            inside(&next)?;
            Ok(next)
        };
        match step() {
            Ok(next) => x = next,
            Err(failure) => return Err((path, Stop::Exit { time: t, failure })),
        }
        t = t_next;
        k += 1;
        path.accepted += 1;
        path.times.push(t);
        path.states.push(x.clone());
    }
    Ok(path)
}

// Dormand–Prince 5(4) tableau.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

fn rk45<F, G>(field: &F, inside: &G, mut path: Path, opts: &IntegrateOptions) -> Result<Path, (Path, Stop)>
where
    F: Fn(&[f64]) -> Result<Vec<f64>, FieldFailure>,
    G: Fn(&[f64]) -> Result<(), FieldFailure>,
{
    let mut t = 0.0;
    let mut x = path.states[0].clone();
    let mut h = opts.dt.min(opts.t_end) * 0.1;
    let mut k = 1u64;
    let mut target = grid_time(k, opts);
    let mut last_failure: Option<FieldFailure> = None;
    while t < opts.t_end {
        let clipped = target - t <= 1.01 * h;
        let step_h = if clipped { target - t } else { h };
        if step_h <= 16.0 * f64::EPSILON * t.abs().max(1.0) {
            let stop = match last_failure {
                Some(failure) => Stop::Exit { time: t, failure },
                None => Stop::Underflow { time: t },
            };
            return Err((path, stop));
        }
        let trial = || -> Result<(Vec<f64>, f64), FieldFailure> {
            let mut ks: Vec<Vec<f64>> = Vec::with_capacity(7);
            for s in 0..7 {
                let terms: Vec<(f64, &[f64])> = (0..s).map(|j| (A[s][j], ks[j].as_slice())).collect();
                let xs = axpy(&x, step_h, &terms);
                ks.push(field(&xs)?);
            }
            let five: Vec<(f64, &[f64])> = (0..7).map(|j| (B5[j], ks[j].as_slice())).collect();
            let next = axpy(&x, step_h, &five);
            inside(&next)?;
            let mut acc = 0.0;
            for i in 0..x.len() {
                let e: f64 = step_h * (0..7).map(|j| (B5[j] - B4[j]) * ks[j][i]).sum::<f64>();
                let sc = opts.tol + opts.tol * x[i].abs().max(next[i].abs());
                acc += (e / sc).powi(2);
            }
            Ok((next, (acc / x.len().max(1) as f64).sqrt()))
        };
        match trial() {
            Ok((next, err)) if err <= 1.0 => {
                t = if clipped { target } else { t + step_h };
                x = next;
                path.accepted += 1;
                path.times.push(t);
                path.states.push(x.clone());
                last_failure = None;
                if clipped {
                    k += 1;
                    target = grid_time(k, opts);
                }
                let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                // a clipped step should not shrink the proposal for the next one
                h = (step_h.max(if clipped { h } else { 0.0 }) * fac).min(opts.dt);
            }
            Ok((_, err)) => {
                path.rejected += 1;
                h = step_h * (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
            }
            Err(failure) => {
                path.rejected += 1;
                last_failure = Some(failure);
                h = step_h * 0.5;
            }
        }
    }
    Ok(path)
}

/// Writes `t,x1..xn,H,D1..Dm` with 17 significant digits.
pub fn write_csv<W: Write>(traj: &Trajectory, mut out: W) -> io::Result<()> {
    let n = traj.states.first().map_or(0, Vec::len);
    let m = traj.d_values.first().map_or(0, Vec::len);
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("x{i}")));
    header.push("H".into());
    header.extend((1..=m).map(|i| format!("D{i}")));
    writeln!(out, "{}", header.join(","))?;
    for (i, t) in traj.times.iter().enumerate() {
        let mut row = vec![sci(*t)];
        row.extend(traj.states[i].iter().map(|v| sci(*v)));
        row.push(sci(traj.h_values[i]));
        row.extend(traj.d_values[i].iter().map(|v| sci(*v)));
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// 17 significant digits in scientific notation.
pub fn sci(v: f64) -> String {
    format!("{v:.16e}")
}

/// `max_k |series_k − series_0|`.
pub fn drift(series: impl IntoIterator<Item = f64>) -> f64 {
    let mut it = series.into_iter();
    let Some(first) = it.next() else {
        return 0.0;
    };
    it.fold(0.0, |acc, v| acc.max((v - first).abs()))
}

impl Trajectory {
    pub fn h_drift(&self) -> f64 {
        drift(self.h_values.iter().copied())
    }

    /// Drift of each Casimir.
    pub fn d_drift(&self) -> Vec<f64> {
        let m = self.d_values.first().map_or(0, Vec::len);
        (0..m)
            .map(|i| drift(self.d_values.iter().map(|d| d[i])))
            .collect()
    }
}
