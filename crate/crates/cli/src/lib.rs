//! Command-line front end for `bellforge`.

use std::f64::consts::PI;
use std::io::Write;

use bellforge::catalog::{self, CatalogEntry, VerifyReport};
use bellforge::inequality::SymmetricBellInequality;
use bellforge::optimize::{
    best_mixing_synthesis, curve_csv, max_violation_curve, minimize_eta_crit, sig9, ClosedFormId, CurveMode,
    CurveOptions, OptimizeError,
};
use bellforge::quantum::SymmetricState;
use bellforge::synthesis::{grid_scan, synthesize, QuantumModel, ScanRecord, SynthesisError, SynthesisOptions};
use bellforge::Rational;
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY: i32 = 1;
pub const EXIT_NO_VIOLATION: i32 = 2;
pub const EXIT_USAGE: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Table,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StateArg {
    #[value(name = "W", alias = "w")]
    W,
    #[value(name = "psi")]
    Psi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Full,
    No000,
    Larsson,
}

impl From<ModeArg> for CurveMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Full => CurveMode::Full,
            ModeArg::No000 => CurveMode::No000,
            ModeArg::Larsson => CurveMode::Larsson,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "bellforge", version, about = "Symmetric three-party Bell inequalities with inefficient detectors")]
pub struct Cli {
    /// Output format; each command has its own default.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Seed for randomized searches.
    #[arg(long, global = true, env = "BELLFORGE_SEED", default_value_t = 42)]
    pub seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check classical bounds and thresholds of the catalog.
    Verify {
        /// Catalog JSON file replacing the built-in one.
        #[arg(long)]
        catalog: Option<std::path::PathBuf>,
        /// Verify a single entry.
        #[arg(long)]
        only: Option<String>,
    },
    /// Solve the threshold LP for one setting pattern.
    Synthesize {
        #[arg(long)]
        m: usize,
        /// Small-angle slopes, comma separated (decimals or fractions).
        #[arg(long, allow_hyphen_values = true, value_delimiter = ',')]
        slopes: Option<Vec<String>>,
        /// Finite projector angles in radians instead of slopes.
        #[arg(long, allow_hyphen_values = true, value_delimiter = ',', conflicts_with = "slopes")]
        angles: Option<Vec<f64>>,
        #[arg(long, value_enum, default_value = "W")]
        state: StateArg,
        /// Initial |111⟩ mixing slope for the psi state.
        #[arg(long, allow_hyphen_values = true)]
        mixing: Option<f64>,
        /// Skip the support minimization pass.
        #[arg(long)]
        full_support: bool,
    },
    /// Scan a grid of finite angles with the |W⟩ state.
    Scan {
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = PI / 20.0)]
        step: f64,
    },
    /// Optimize the free slope parameters of a closed-form family.
    Optimize {
        /// Family id such as W-444; all families when omitted.
        #[arg(long)]
        family: Option<String>,
    },
    /// Maximum violation against efficiency.
    Curve {
        #[arg(long)]
        ineq: String,
        /// start:end:step
        #[arg(long, default_value = "0.6:1.0:0.01")]
        grid: String,
        #[arg(long, value_enum, default_value = "full")]
        mode: ModeArg,
        /// Random starts per efficiency.
        #[arg(long, default_value_t = 20)]
        starts: usize,
        /// Local search tolerance.
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
    /// Print the built-in catalog as JSON.
    Catalog,
}

/// Parses `args` (including the program name), runs the command and returns
/// the exit code.
pub fn run<I, T>(args: I, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cli.jobs {
        if j == 0 {
            let _ = writeln!(err, "error: --jobs must be at least 1");
            return EXIT_USAGE;
        }
        builder = builder.num_threads(j);
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_USAGE;
        }
    };
    pool.install(|| dispatch(&cli, out, err))
}

fn dispatch(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = match &cli.command {
        Command::Verify { catalog, only } => {
            let entries = match catalog {
                Some(path) => std::fs::read_to_string(path)
                    .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
                    .and_then(|t| catalog::parse_catalog(&t).map_err(|e| CliError::Usage(e.to_string()))),
                None => Ok(catalog::builtin_entries()),
            };
            entries.and_then(|e| cmd_verify(&e, only.as_deref(), cli.format.unwrap_or(Format::Table)))
        }
        Command::Synthesize { m, slopes, angles, state, mixing, full_support } => cmd_synthesize(
            &SynthesizeArgs {
                m: *m,
                slopes: slopes.clone(),
                angles: angles.clone(),
                state: *state,
                mixing: *mixing,
                minimize_support: !full_support,
            },
            cli.format.unwrap_or(Format::Json),
        ),
        Command::Scan { m, step } => {
            return match cmd_scan(*m, *step, out, err) {
                Ok(()) => EXIT_OK,
                Err(e) => report_error(e, err),
            }
        }
        Command::Optimize { family } => cmd_optimize(family.as_deref(), cli.format.unwrap_or(Format::Table)),
        Command::Curve { ineq, grid, mode, starts, tol } => cmd_curve(
            &CurveArgs {
                ineq: ineq.clone(),
                grid: grid.clone(),
                mode: *mode,
                starts: *starts,
                tol: *tol,
                seed: cli.seed,
            },
            cli.format.unwrap_or(Format::Csv),
        ),
        Command::Catalog => cmd_catalog(),
    };
    match result {
        Ok((code, text)) => {
            let _ = out.write_all(text.as_bytes());
            code
        }
        Err(e) => report_error(e, err),
    }
}

fn report_error(e: CliError, err: &mut dyn Write) -> i32 {
    let _ = writeln!(err, "error: {e}");
    e.code()
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    NoViolation(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::NoViolation(_) => EXIT_NO_VIOLATION,
            CliError::Io(_) => EXIT_VERIFY,
        }
    }
}

impl From<SynthesisError> for CliError {
    fn from(e: SynthesisError) -> Self {
        match e {
            SynthesisError::Input(_) => CliError::Usage(e.to_string()),
            _ => CliError::NoViolation(e.to_string()),
        }
    }
}

impl From<OptimizeError> for CliError {
    fn from(e: OptimizeError) -> Self {
        match e {
            OptimizeError::Parameters { .. } => CliError::Usage(e.to_string()),
            OptimizeError::Synthesis(s) => s.into(),
            _ => CliError::NoViolation(e.to_string()),
        }
    }
}

pub type CmdOutput = Result<(i32, String), CliError>;

/// Rounds every float in a JSON tree to nine significant digits.
pub fn round_json(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().unwrap();
            if let Some(r) = serde_json::Number::from_f64(sig9(x).parse().unwrap()) {
                *n = r;
            }
        }
        Value::Array(a) => a.iter_mut().for_each(round_json),
        Value::Object(o) => o.values_mut().for_each(round_json),
        _ => {}
    }
}

fn to_json_line(v: impl serde::Serialize) -> String {
    let mut v = serde_json::to_value(v).expect("serializable");
    round_json(&mut v);
    v.to_string()
}

fn to_json_pretty(mut v: Value) -> String {
    round_json(&mut v);
    let mut s = serde_json::to_string_pretty(&v).expect("serializable");
    s.push('\n');
    s
}

fn opt9(x: Option<f64>) -> String {
    x.map_or_else(|| "-".into(), sig9)
}

pub fn cmd_verify(entries: &[CatalogEntry], only: Option<&str>, format: Format) -> CmdOutput {
    let selected: Vec<CatalogEntry> = match only {
        Some(id) => {
            let e: Vec<CatalogEntry> = entries.iter().filter(|e| e.id == id).cloned().collect();
            if e.is_empty() {
                return Err(CliError::Usage(format!("unknown catalog id `{id}`")));
            }
            e
        }
        None => entries.to_vec(),
    };
    let reports = catalog::verify_all(&selected);
    let failed = reports.iter().filter(|r| !r.passed()).count();
    let text = match format {
        Format::Json => to_json_pretty(json!({
            "entries": reports.iter().map(verify_json).collect::<Vec<_>>(),
            "verified": reports.len(),
            "failed": failed,
        })),
        Format::Csv => {
            let mut s = String::from("id,classical_bound,strategies_checked,eta_crit,reference_eta,passed\n");
            for r in &reports {
                s.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    r.id,
                    r.classical_bound,
                    r.strategies_checked,
                    opt9(r.eta_crit),
                    sig9(r.reference_eta),
                    r.passed()
                ));
            }
            s
        }
        Format::Table => {
            let mut s = format!(
                "{:<8} {:>7} {:>12} {:>12} {:>12}  {}\n",
                "id", "bound", "strategies", "eta_crit", "reference", "status"
            );
            for r in &reports {
                let status = if r.passed() { "ok".to_string() } else { format!("FAIL {}", failure_reason(r)) };
                s.push_str(&format!(
                    "{:<8} {:>7} {:>12} {:>12} {:>12}  {}\n",
                    r.id,
                    r.classical_bound,
                    r.strategies_checked,
                    opt9(r.eta_crit),
                    sig9(r.reference_eta),
                    status
                ));
            }
            s.push_str(&format!("{} verified, {} failed\n", reports.len(), failed));
            s
        }
    };
    Ok((if failed == 0 { EXIT_OK } else { EXIT_VERIFY }, text))
}

fn failure_reason(r: &VerifyReport) -> String {
    let mut why = Vec::new();
    if let Some(e) = &r.error {
        why.push(e.clone());
    }
    if !r.classical_bound_ok {
        why.push(format!("classical bound {}", r.classical_bound));
    }
    if !r.m2_sign_ok {
        why.push("positive two-party coefficient".into());
    }
    if !r.eta_crit_ok {
        why.push("threshold mismatch".into());
    }
    why.join("; ")
}

fn verify_json(r: &VerifyReport) -> Value {
    json!({
        "id": r.id,
        "classical_bound": r.classical_bound,
        "strategies_checked": r.strategies_checked,
        "eta_crit": r.eta_crit,
        "reference_eta": r.reference_eta,
        "passed": r.passed(),
        "failure": if r.passed() { None } else { Some(failure_reason(r)) },
    })
}

#[derive(Debug, Clone)]
pub struct SynthesizeArgs {
    pub m: usize,
    pub slopes: Option<Vec<String>>,
    pub angles: Option<Vec<f64>>,
    pub state: StateArg,
    pub mixing: Option<f64>,
    pub minimize_support: bool,
}

/// Slopes used when none are given: 1; 0,1; 0,1,−1; then 1,−1,1/2,−1/2,...
pub fn default_slopes(m: usize) -> Vec<Rational> {
    match m {
        1 => vec![Rational::from_integer(1)],
        2 => vec![Rational::from_integer(0), Rational::from_integer(1)],
        3 => vec![Rational::from_integer(0), Rational::from_integer(1), Rational::from_integer(-1)],
        _ => (0..m).map(|i| Rational::new(if i % 2 == 0 { 1 } else { -1 }, (i / 2 + 1) as i64)).collect(),
    }
}

pub fn cmd_synthesize(args: &SynthesizeArgs, format: Format) -> CmdOutput {
    if args.m == 0 {
        return Err(CliError::Usage("--m must be at least 1".into()));
    }
    let opts = SynthesisOptions { minimize_support: args.minimize_support, ..SynthesisOptions::default() };
    let (report, mixing) = if let Some(angles) = &args.angles {
        if angles.len() != args.m {
            return Err(CliError::Usage(format!("expected {} angles, got {}", args.m, angles.len())));
        }
        let state = match args.state {
            StateArg::W => SymmetricState::w(),
            StateArg::Psi => SymmetricState::psi(args.mixing.unwrap_or(0.0)),
        };
        let r = synthesize(&QuantumModel::Finite { state, angles: angles.clone() }, &opts)?;
        (r.report(), None)
    } else {
        let slopes: Vec<Rational> = match &args.slopes {
            Some(s) => s
                .iter()
                .map(|t| t.trim().parse::<Rational>().map_err(|_| CliError::Usage(format!("bad slope `{t}`"))))
                .collect::<Result<_, _>>()?,
            None => default_slopes(args.m),
        };
        if slopes.len() != args.m {
            return Err(CliError::Usage(format!("expected {} slopes, got {}", args.m, slopes.len())));
        }
        match args.state {
            StateArg::W => (synthesize(&QuantumModel::SmallAngleW { slopes }, &opts)?.report(), None),
            StateArg::Psi => {
                let f: Vec<f64> = slopes.iter().map(|s| s.to_f64()).collect();
                let r = best_mixing_synthesis(&f, args.mixing.unwrap_or(1.0), &opts)?;
                let mut rep = r.result.report();
                rep.eta_crit = r.eta_crit;
                (rep, Some((r.mixing, r.iterations)))
            }
        }
    };
    let text = match format {
        Format::Json => {
            let mut v = serde_json::to_value(&report).expect("serializable");
            if let Some((a, it)) = mixing {
                v["mixing"] = json!(a);
                v["iterations"] = json!(it);
            }
            to_json_pretty(v)
        }
        Format::Csv | Format::Table => {
            let sep = if format == Format::Csv { "," } else { " " };
            let mut s = String::new();
            s.push_str(&format!("eta_crit{sep}{}\n", sig9(report.eta_crit)));
            if let Some(e) = &report.eta_crit_exact {
                s.push_str(&format!("eta_crit_exact{sep}{e}\n"));
            }
            if let Some((a, _)) = mixing {
                s.push_str(&format!("mixing{sep}{}\n", sig9(a)));
            }
            for (i, j, n, d) in &report.inequality.m2 {
                s.push_str(&format!("M2{sep}{i}{sep}{j}{sep}{}\n", Rational::new(*n, *d)));
            }
            for (i, j, k, n, d) in &report.inequality.m3 {
                s.push_str(&format!("M3{sep}{i}{sep}{j}{sep}{k}{sep}{}\n", Rational::new(*n, *d)));
            }
            s
        }
    };
    Ok((EXIT_OK, text))
}

/// Streams one JSON line per grid point, then a summary line.
pub fn cmd_scan(m: usize, step: f64, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let opts = SynthesisOptions::default();
    let total = if step > 0.0 && step.is_finite() { (2.0 * PI / step).ceil().powi(m as i32) as usize } else { 0 };
    let mut seen = 0usize;
    let mut io_err = None;
    let report = grid_scan(m, step, &SymmetricState::w(), &opts, &mut |rec: &ScanRecord| {
        seen += 1;
        if let Err(e) = writeln!(out, "{}", to_json_line(rec)) {
            io_err.get_or_insert(e);
        }
        if seen % 50 == 0 || seen == total {
            let _ = writeln!(err, "scan: {seen}/{total} grid points");
        }
    })?;
    if let Some(e) = io_err {
        return Err(e.into());
    }
    let record = |r: &Option<(ScanRecord, SymmetricBellInequality)>| {
        r.as_ref().map(|(rec, ineq)| json!({"record": rec, "inequality": ineq.to_json()}))
    };
    let summary = json!({
        "summary": {
            "points": report.points,
            "distinct": report.distinct.len(),
            "best": record(&report.best),
            "refined": record(&report.refined),
        }
    });
    writeln!(out, "{}", to_json_line(summary))?;
    if report.best.is_none() {
        return Err(CliError::NoViolation("no grid point violates".into()));
    }
    Ok(())
}

pub fn cmd_optimize(family: Option<&str>, format: Format) -> CmdOutput {
    let ids: Vec<ClosedFormId> = match family {
        Some(f) => vec![ClosedFormId::from_label(f).ok_or_else(|| CliError::Usage(format!("unknown family `{f}`")))?],
        None => ClosedFormId::ALL.to_vec(),
    };
    let mut results = Vec::new();
    for id in ids {
        results.push(minimize_eta_crit(id)?);
    }
    let text = match format {
        Format::Json => to_json_pretty(json!(results
            .iter()
            .map(|r| json!({
                "family": r.id.label(),
                "params": r.names.iter().zip(&r.params).map(|(n, v)| (n.to_string(), json!(v))).collect::<serde_json::Map<_, _>>(),
                "eta_crit": r.eta_crit,
                "residual": r.residual,
            }))
            .collect::<Vec<_>>())),
        Format::Csv => {
            let mut s = String::from("family,eta_crit,residual,params\n");
            for r in &results {
                let p: Vec<String> = r.names.iter().zip(&r.params).map(|(n, v)| format!("{n}={}", sig9(*v))).collect();
                s.push_str(&format!("{},{},{},{}\n", r.id.label(), sig9(r.eta_crit), sig9(r.residual), p.join(";")));
            }
            s
        }
        Format::Table => {
            let mut s = String::new();
            for r in &results {
                let p: Vec<String> = r.names.iter().zip(&r.params).map(|(n, v)| format!("{n} = {}", sig9(*v))).collect();
                s.push_str(&format!("{:<8} eta_crit = {}", r.id.label(), sig9(r.eta_crit)));
                if !p.is_empty() {
                    s.push_str(&format!("  {}", p.join("  ")));
                }
                s.push('\n');
            }
            s
        }
    };
    Ok((EXIT_OK, text))
}

/// Parses `start:end:step` into the inclusive list of grid points.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Usage(format!("bad grid `{spec}`, expected start:end:step"));
    let parts: Vec<f64> = spec.split(':').map(|p| p.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|_| bad())?;
    let [a, b, h] = parts[..] else { return Err(bad()) };
    if !(h > 0.0) || !(b >= a) || !a.is_finite() || !b.is_finite() {
        return Err(bad());
    }
    let n = ((b - a) / h + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| if i == n && ((b - a) / h - n as f64).abs() < 1e-9 { b } else { a + i as f64 * h }).collect())
}

#[derive(Debug, Clone)]
pub struct CurveArgs {
    pub ineq: String,
    pub grid: String,
    pub mode: ModeArg,
    pub starts: usize,
    pub tol: f64,
    pub seed: u64,
}

pub fn cmd_curve(args: &CurveArgs, format: Format) -> CmdOutput {
    let entry = catalog::load(&args.ineq).map_err(|e| CliError::Usage(e.to_string()))?;
    let ineq = entry
        .symmetric()
        .ok_or_else(|| CliError::Usage(format!("{} is not a symmetric inequality", args.ineq)))?;
    let etas = parse_grid(&args.grid)?;
    if etas.iter().any(|e| !(0.0..=1.0).contains(e)) {
        return Err(CliError::Usage("efficiencies must lie in [0, 1]".into()));
    }
    if args.starts == 0 {
        return Err(CliError::Usage("--starts must be at least 1".into()));
    }
    let opts = CurveOptions { starts: args.starts, seed: args.seed, tol: args.tol, ..CurveOptions::default() };
    let pts = max_violation_curve(ineq, &etas, args.mode.into(), &opts);
    let text = match format {
        Format::Csv => curve_csv(&pts),
        Format::Json => to_json_pretty(serde_json::to_value(&pts).expect("serializable")),
        Format::Table => {
            let mut s = format!("{:>12} {:>16}\n", "eta", "max_violation");
            for p in &pts {
                s.push_str(&format!("{:>12} {:>16}\n", sig9(p.eta), sig9(p.max_violation)));
            }
            s
        }
    };
    Ok((EXIT_OK, text))
}

pub fn cmd_catalog() -> CmdOutput {
    let file = catalog::export(&catalog::builtin_entries());
    let mut s = serde_json::to_string_pretty(&file).expect("serializable");
    s.push('\n');
    Ok((EXIT_OK, s))
}
