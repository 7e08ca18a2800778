//! Command-line front end.
//!
//! Exit codes: 0 when every check passes, 1 when a check fails, 2 on usage
//! or spec errors.

pub mod specfile;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use genpoisson::casimir::CasimirSet;
use genpoisson::darboux::DarbouxChart;
use genpoisson::dynamics::{write_csv, DynamicsError, IntegrateOptions, Method, PoissonSystem, Trajectory};
use genpoisson::numeric::RANK_TOL;
use genpoisson::presets;
use genpoisson::rational::{format_rational, RationalMatrix};
use genpoisson::verify::{residual_report, sample_points, sampling_region};
use serde::Serialize;
use serde_json::json;

use specfile::{parse_spec, IntegratorSettings, SpecFile};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

const FD_TOL: f64 = 1e-6;
const ROUND_TRIP_TOL: f64 = 1e-8;

#[derive(Parser, Debug)]
#[command(name = "genpoisson", version, about = "Generalized-separable Poisson structures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Skew-symmetry, Jacobi identity and rank report
    Verify(Common),
    /// Casimir closed forms, values and annihilation residuals
    Casimirs(Common),
    /// Congruence matrix P, canonical pattern and chart residuals
    Darboux(Common),
    /// Integrate the Poisson system and write the trajectory CSV
    Integrate(Common),
    /// Write a bundled spec file (kmk, separable-lv, constant)
    Example {
        name: String,
        /// Rate parameter of the kmk preset
        #[arg(long, default_value_t = 1.0)]
        r: f64,
        #[arg(long, value_name = "DIR")]
        output: Option<PathBuf>,
    },
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Spec file (TOML)
    #[arg(long, value_name = "FILE")]
    spec: PathBuf,
    /// Sample points for pointwise checks [default: 100]
    #[arg(long, value_name = "N")]
    points: Option<usize>,
    /// Sampling seed [default: 0]
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Check tolerance, or rk45 local tolerance for integrate [default: 1e-9, integrate 1e-10]
    #[arg(long, value_name = "REAL")]
    tol: Option<f64>,
    /// Fraction of each sampling interval trimmed at both ends [default: 0.05]
    #[arg(long, value_name = "FRACTION")]
    inset: Option<f64>,
    /// Final time [default: 10]
    #[arg(long = "t-end", value_name = "REAL")]
    t_end: Option<f64>,
    /// rk4 step, or rk45 output spacing and maximal step [default: 0.01]
    #[arg(long, value_name = "REAL")]
    dt: Option<f64>,
    /// Integrator [default: rk4]
    #[arg(long, value_parser = ["rk4", "rk45"])]
    method: Option<String>,
    /// Also write reports (and trajectory.csv) into this directory
    #[arg(long, value_name = "DIR")]
    output: Option<PathBuf>,
}

/// A finished command: human text, machine report, verdict.
struct Report {
    name: &'static str,
    text: String,
    json: serde_json::Value,
    pass: bool,
}

enum Failure {
    Usage(String),
    Check(String),
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

/// Runs with process arguments on stdout/stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(args, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(code) => code,
        Err(Failure::Usage(m)) => {
            let _ = writeln!(err, "error: {m}");
            EXIT_USAGE
        }
        Err(Failure::Check(m)) => {
            let _ = writeln!(err, "check failed: {m}");
            EXIT_FAIL
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Failure> {
    let (common, report) = match cmd {
        Command::Example { name, r, output } => return example(&name, r, output.as_deref(), out),
        Command::Verify(c) => {
            let spec = load(&c)?;
            let rep = verify(&spec, &c)?;
            (c, rep)
        }
        Command::Casimirs(c) => {
            let spec = load(&c)?;
            let rep = casimirs(&spec, &c)?;
            (c, rep)
        }
        Command::Darboux(c) => {
            let spec = load(&c)?;
            let rep = darboux(&spec, &c)?;
            (c, rep)
        }
        Command::Integrate(c) => {
            let spec = load(&c)?;
            return integrate(&spec, &c, out, err);
        }
    };
    emit(&report, common.output.as_deref(), out)?;
    Ok(if report.pass { EXIT_PASS } else { EXIT_FAIL })
}

fn load(c: &Common) -> Result<SpecFile, Failure> {
    let text = fs::read_to_string(&c.spec).map_err(|e| usage(format!("cannot read {}: {e}", c.spec.display())))?;
    parse_spec(&text).map_err(|e| usage(format!("{}: {e}", c.spec.display())))
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| usage(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| usage(format!("cannot write {}: {e}", path.display())))
}

fn emit(report: &Report, dir: Option<&Path>, out: &mut dyn Write) -> Result<(), Failure> {
    let _ = out.write_all(report.text.as_bytes());
    if let Some(dir) = dir {
        write_file(dir, &format!("{}.txt", report.name), report.text.as_bytes())?;
        let mut json = serde_json::to_string_pretty(&report.json).expect("report serializes");
        json.push('\n');
        write_file(dir, &format!("{}.json", report.name), json.as_bytes())?;
    }
    Ok(())
}

fn example(name: &str, r: f64, dir: Option<&Path>, out: &mut dyn Write) -> Result<i32, Failure> {
    if !(r.is_finite() && r > 0.0) {
        return Err(usage("--r must be positive"));
    }
    let preset = presets::by_name(name, r)
        .ok_or_else(|| usage(format!("unknown example `{name}` (expected one of: {})", presets::NAMES.join(", "))))?;
    let text = specfile::preset_text(&preset, &IntegratorSettings::default());
    match dir {
        Some(dir) => {
            let file = format!("{name}.toml");
            write_file(dir, &file, text.as_bytes())?;
            let _ = writeln!(out, "wrote {}", dir.join(file).display());
        }
        None => {
            let _ = out.write_all(text.as_bytes());
        }
    }
    Ok(EXIT_PASS)
}

struct Sampling {
    count: usize,
    seed: u64,
    inset: f64,
    window: f64,
}

fn sampling(spec: &SpecFile, c: &Common) -> Result<Sampling, Failure> {
    let s = Sampling {
        count: c.points.or(spec.sampling.count).unwrap_or(100),
        seed: c.seed.or(spec.sampling.seed).unwrap_or(0),
        inset: c.inset.or(spec.sampling.inset).unwrap_or(0.05),
        window: spec.sampling.window.unwrap_or(10.0),
    };
    if s.count == 0 {
        return Err(usage("--points must be positive"));
    }
    if !(0.0..0.5).contains(&s.inset) {
        return Err(usage("--inset must lie in [0, 0.5)"));
    }
    if !(s.window.is_finite() && s.window > 0.0) {
        return Err(usage("sampling.window must be positive"));
    }
    Ok(s)
}

fn points(spec: &SpecFile, s: &Sampling) -> Result<Vec<Vec<f64>>, Failure> {
    let region = sampling_region(spec.family.domain_box(), s.inset, s.window);
    let pts = sample_points(&region, s.count, s.seed, |x| spec.family.check_domain(x).is_ok());
    if pts.len() < s.count {
        return Err(usage(format!(
            "found only {} of {} interior sample points; adjust box, inset or window",
            pts.len(),
            s.count
        )));
    }
    Ok(pts)
}

fn tolerance(c: &Common) -> Result<f64, Failure> {
    let tol = c.tol.unwrap_or(1e-9);
    if !(tol.is_finite() && tol > 0.0) {
        return Err(usage("--tol must be positive"));
    }
    Ok(tol)
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

fn matrix_json(m: &RationalMatrix) -> serde_json::Value {
    let rows: Vec<Vec<String>> = (0..m.rows())
        .map(|i| m.row(i).iter().map(format_rational).collect())
        .collect();
    json!(rows)
}

fn header(spec: &SpecFile, title: &str) -> String {
    let f = &spec.family;
    format!(
        "{title}\ndimension:                   {}\nrank of S:                   {}\n",
        f.dimension(),
        f.rank()
    )
}

fn verify(spec: &SpecFile, c: &Common) -> Result<Report, Failure> {
    let s = sampling(spec, c)?;
    let tol = tolerance(c)?;
    let pts = points(spec, &s)?;
    let f = &spec.family;
    let report = residual_report(
        |x: &[f64]| f.eval_j(x).map(|v| v.j),
        |x: &[f64]| f.eval_j_partials(x),
        &pts,
        Some(s.seed),
        RANK_TOL,
    )
    .map_err(|e| Failure::Check(e.to_string()))?;
    let pass = report.passes(tol, FD_TOL, Some(f.rank()));
    let mut text = header(spec, "structure matrix verification");
    text.push_str(&report.to_text());
    text.push_str(&format!("tolerances:                  analytic {tol:e}, finite difference {FD_TOL:e}\n"));
    text.push_str(&format!("result:                      {}\n", verdict(pass)));
    Ok(Report {
        name: "verify",
        text,
        json: json!({
            "command": "verify",
            "dimension": f.dimension(),
            "rank": f.rank(),
            "tolerance": tol,
            "fd_tolerance": FD_TOL,
            "inset": s.inset,
            "report": report,
            "pass": pass,
        }),
        pass,
    })
}

#[derive(Serialize)]
struct CasimirPoint {
    x: Vec<f64>,
    values: Vec<f64>,
    annihilation: f64,
    independent: usize,
}

fn casimirs(spec: &SpecFile, c: &Common) -> Result<Report, Failure> {
    let s = sampling(spec, c)?;
    let tol = tolerance(c)?;
    let pts = points(spec, &s)?;
    let cs = CasimirSet::build(&spec.family);
    let mut rows = Vec::with_capacity(pts.len());
    for x in &pts {
        let check = |e: genpoisson::family::DomainError| Failure::Check(format!("at x = {x:?}: {e}"));
        rows.push(CasimirPoint {
            values: cs.values(x).map_err(check)?,
            annihilation: cs.annihilation(x).map_err(check)?.normalized,
            independent: cs.independence_rank(x).map_err(check)?,
            x: x.clone(),
        });
    }
    let worst = rows.iter().map(|r| r.annihilation).fold(0.0, f64::max);
    let independent = rows.iter().all(|r| r.independent == cs.len());
    let pass = worst <= tol && independent && !cs.kernel_defect();
    let forms = cs.closed_forms();
    let kernel: Vec<Vec<String>> = cs
        .kernel()
        .iter()
        .map(|k| k.iter().map(format_rational).collect())
        .collect();

    let mut text = header(spec, "Casimir invariants");
    text.push_str(&format!("number of Casimirs:          {}\n", cs.len()));
    for (i, (k, form)) in kernel.iter().zip(&forms).enumerate() {
        text.push_str(&format!("D{} kernel vector:            ({})\n", i + 1, k.join(", ")));
        match form {
            Some(f) => text.push_str(&format!("D{} closed form:              {f}\n", i + 1)),
            None => text.push_str(&format!("D{} closed form:              (numerical primitive)\n", i + 1)),
        }
    }
    text.push_str(&format!("points sampled:              {}\nseed:                        {}\n", pts.len(), s.seed));
    for r in rows.iter().take(5) {
        text.push_str(&format!("  x = {:?} -> D = {:?}\n", r.x, r.values));
    }
    text.push_str(&format!("max annihilation (norm):     {worst:e}\n"));
    text.push_str(&format!("gradients independent:       {independent}\n"));
    text.push_str(&format!("result:                      {}\n", verdict(pass)));
    Ok(Report {
        name: "casimirs",
        text,
        json: json!({
            "command": "casimirs",
            "dimension": spec.family.dimension(),
            "rank": spec.family.rank(),
            "count": cs.len(),
            "kernel": kernel,
            "closed_forms": forms,
            "seed": s.seed,
            "tolerance": tol,
            "points": rows,
            "max_annihilation": worst,
            "independent": independent,
            "pass": pass,
        }),
        pass,
    })
}

fn darboux(spec: &SpecFile, c: &Common) -> Result<Report, Failure> {
    let s = sampling(spec, c)?;
    let tol = tolerance(c)?;
    let pts = points(spec, &s)?;
    let chart = DarbouxChart::new(&spec.family);
    let check = |e: genpoisson::darboux::DarbouxError| Failure::Check(e.to_string());
    let mut push = 0.0f64;
    let mut trip_y = 0.0f64;
    let mut trip_z = 0.0f64;
    let gap = |a: &[f64], b: &[f64]| {
        a.iter()
            .zip(b)
            .map(|(p, q)| (p - q).abs() / q.abs().max(1.0))
            .fold(0.0, f64::max)
    };
    for x in &pts {
        push = push.max(chart.pushforward_deviation(x).map_err(check)?);
        let y = chart.to_y(x).map_err(check)?;
        trip_y = trip_y.max(gap(&chart.from_y(&y).map_err(check)?, x));
        let z = chart.to_z(x).map_err(check)?;
        trip_z = trip_z.max(gap(&chart.from_z(&z).map_err(check)?, x));
    }
    let canon = chart.verify_canonical(&pts).map_err(check)?;
    let cs = CasimirSet::build(&spec.family);
    let relation = chart.casimir_relation(&cs).map_err(check)?;
    let pass = push <= tol && canon <= tol && trip_y <= ROUND_TRIP_TOL && trip_z <= ROUND_TRIP_TOL;

    let mut text = header(spec, "Darboux reduction");
    text.push_str(&format!("congruence P:\n{}", chart.p()));
    text.push_str(&format!("canonical pattern P S P^T:\n{}", chart.canonical()));
    if !cs.is_empty() {
        text.push_str(&format!("Casimirs D = C z_tail with C:\n{relation}"));
    }
    text.push_str(&format!("points sampled:              {}\nseed:                        {}\n", pts.len(), s.seed));
    text.push_str(&format!("max |J* - S| (rel):          {push:e}\n"));
    text.push_str(&format!("max canonical deviation:     {canon:e}\n"));
    text.push_str(&format!("max y round trip:            {trip_y:e}\n"));
    text.push_str(&format!("max z round trip:            {trip_z:e}\n"));
    text.push_str(&format!("result:                      {}\n", verdict(pass)));
    Ok(Report {
        name: "darboux",
        text,
        json: json!({
            "command": "darboux",
            "dimension": spec.family.dimension(),
            "rank": chart.rank(),
            "P": matrix_json(chart.p()),
            "canonical": matrix_json(&chart.canonical()),
            "casimir_relation": matrix_json(&relation),
            "seed": s.seed,
            "tolerance": tol,
            "max_pushforward_deviation": push,
            "max_canonical_deviation": canon,
            "max_y_round_trip": trip_y,
            "max_z_round_trip": trip_z,
            "pass": pass,
        }),
        pass,
    })
}

fn integrate(spec: &SpecFile, c: &Common, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Failure> {
    let h = spec
        .hamiltonian
        .clone()
        .ok_or_else(|| usage("hamiltonian: required by integrate"))?;
    let x0 = spec
        .integrator
        .x0
        .clone()
        .ok_or_else(|| usage("integrator.x0: required by integrate"))?;
    let method = match &c.method {
        Some(m) => Method::parse(m).expect("validated by clap"),
        None => spec.integrator.method.unwrap_or(Method::Rk4),
    };
    let opts = IntegrateOptions {
        method,
        t_end: c.t_end.or(spec.integrator.t_end).unwrap_or(10.0),
        dt: c.dt.or(spec.integrator.dt).unwrap_or(1e-2),
        tol: c.tol.or(spec.integrator.tol).unwrap_or(1e-10),
    };
    spec.family
        .check_domain(&x0)
        .map_err(|e| usage(format!("integrator.x0: {e}")))?;
    let sys = PoissonSystem::new(&spec.family, h, &x0).map_err(|e| usage(format!("hamiltonian: {e}")))?;
    let (traj, failure) = match sys.integrate(&x0, &opts) {
        Ok(t) => (t, None),
        Err(DynamicsError::DomainExit {
            partial,
            time,
            coord,
            message,
        }) => {
            let at = coord.map(|c| format!(" (coordinate {c})")).unwrap_or_default();
            (*partial, Some(format!("domain exit at t = {time}{at}: {message}")))
        }
        Err(DynamicsError::StepUnderflow { partial, time }) => {
            (*partial, Some(format!("step size underflow at t = {time}")))
        }
        Err(e) => return Err(usage(e.to_string())),
    };

    let text = integrate_text(spec, &opts, &traj, failure.as_deref());
    let mut csv = Vec::new();
    write_csv(&traj, &mut csv).expect("writing to memory");
    let pass = failure.is_none();
    let json = json!({
        "command": "integrate",
        "dimension": spec.family.dimension(),
        "hamiltonian": sys.hamiltonian().to_string(),
        "x0": x0,
        "options": opts,
        "accepted": traj.meta.accepted,
        "rejected": traj.meta.rejected,
        "samples": traj.times.len(),
        "final_time": traj.times.last(),
        "final_state": traj.states.last(),
        "h_drift": traj.h_drift(),
        "d_drift": traj.d_drift(),
        "failure": failure,
        "pass": pass,
    });
    match c.output.as_deref() {
        Some(dir) => {
            let report = Report {
                name: "integrate",
                text,
                json,
                pass,
            };
            emit(&report, Some(dir), out)?;
            write_file(dir, "trajectory.csv", &csv)?;
        }
        None => {
            let _ = err.write_all(text.as_bytes());
            let _ = out.write_all(&csv);
        }
    }
    if let Some(f) = failure {
        return Err(Failure::Check(f));
    }
    Ok(EXIT_PASS)
}

fn integrate_text(spec: &SpecFile, opts: &IntegrateOptions, traj: &Trajectory, failure: Option<&str>) -> String {
    let mut text = header(spec, "Poisson system integration");
    text.push_str(&format!("method:                      {}\n", opts.method.name()));
    text.push_str(&format!("t_end, dt:                   {:e}, {:e}\n", opts.t_end, opts.dt));
    if opts.method == Method::Rk45 {
        text.push_str(&format!("tolerance:                   {:e}\n", opts.tol));
    }
    text.push_str(&format!(
        "steps accepted/rejected:     {}/{}\n",
        traj.meta.accepted, traj.meta.rejected
    ));
    if let (Some(t), Some(x)) = (traj.times.last(), traj.states.last()) {
        text.push_str(&format!("final time:                  {t:e}\nfinal state:                 {x:?}\n"));
    }
    text.push_str(&format!("H drift:                     {:e}\n", traj.h_drift()));
    for (i, d) in traj.d_drift().iter().enumerate() {
        text.push_str(&format!("D{} drift:                    {d:e}\n", i + 1));
    }
    if let Some(f) = failure {
        text.push_str(&format!("stopped:                     {f}\n"));
    }
    text.push_str(&format!("result:                      {}\n", verdict(failure.is_none())));
    text
}
