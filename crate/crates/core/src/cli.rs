//! Command-line front end. Exit codes: 0 success, 1 violations or failed
//! checks, 2 invalid input.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::constants::{comparability_bound, funk_hecke_table, multiplicity, sharp_constant, thresholds, Delta2Exponent, ProblemParams};
use crate::duality::{deficit_transfer_check, dual_density, legendre_identity_check, sobolev_stability_from_hls};
use crate::error::{Error, Result};
use crate::extremizers::project_with_starts;
use crate::flows::{competing_iteration_lifted, monotonicity_check, quotient_sweep, residual_decay_check, Family};
use crate::local_stability::{certificate_selection, deficit_breakdown, random_admissible, seeded_rng, CertificateParams};
use crate::profile::load_profile;
use crate::scalar::{build_constants, certify_cubic_bound, certify_proposition1, certify_qestimate, corner_points, select_n, CertGrid, SplitParams};
use crate::sphere::{hls_deficit, sobolev_deficit, SphereContext};
use crate::TOOL_VERSION;

#[derive(Debug, Parser)]
#[command(name = "hls-lab", version, about = "Sharp HLS and Sobolev stability laboratory")]
pub struct Cli {
    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Multipliers, multiplicities and certificate thresholds.
    Constants(ConstantsArgs),
    /// Brute-force certification of the pointwise inequalities.
    CertifyScalar(CertifyScalarArgs),
    /// Deficit of a profile.
    Deficit(DeficitArgs),
    /// Projection onto the extremizer manifold.
    Project(ProjectArgs),
    /// Certificate pieces on random admissible perturbations.
    LocalCheck(LocalCheckArgs),
    /// Competing-symmetries iteration.
    Flow(FlowArgs),
    /// Deficit quotient across dimensions.
    QuotientSweep(QuotientSweepArgs),
    /// Legendre and deficit-transfer identities.
    DualityCheck(DualityArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct ConstantsArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub s: f64,
    #[arg(long, default_value_t = 8)]
    pub lmax: usize,
    #[arg(long, default_value_t = 0.0625)]
    pub eps1: f64,
    #[arg(long, default_value_t = 0.125)]
    pub eps2: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct CertifyScalarArgs {
    #[arg(long, default_value_t = 1.75)]
    pub p0: f64,
    #[arg(long, default_value_t = 0.03125)]
    pub gamma: f64,
    #[arg(long = "M", default_value_t = 1.0)]
    #[serde(rename = "M")]
    pub m: f64,
    #[arg(long, default_value_t = 0.125)]
    pub eps: f64,
    #[arg(long, default_value_t = 1e3)]
    pub rmax: f64,
    #[arg(long, default_value_t = 100_000)]
    pub points: usize,
    /// Number of exponents on each p-grid.
    #[arg(long, default_value_t = 21)]
    pub p_values: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SideArg {
    Hls,
    Sobolev,
}

#[derive(Debug, Args, Serialize)]
pub struct DeficitArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = SideArg::Hls)]
    pub side: SideArg,
    /// Quadrature size used when lifting radial profiles.
    #[arg(long, default_value_t = 128)]
    pub q: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct ProjectArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 128)]
    pub q: usize,
    #[arg(long, default_value_t = 9)]
    pub starts: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct LocalCheckArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub s: f64,
    #[arg(long, default_value_t = 200)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.0625)]
    pub eps1: f64,
    #[arg(long, default_value_t = 0.125)]
    pub eps2: f64,
    /// Highest degree in the random perturbations.
    #[arg(long, default_value_t = 6)]
    pub degree: usize,
    /// `||r||_p^2` of every draw.
    #[arg(long, default_value_t = 1e-4)]
    pub target: f64,
    #[arg(long, default_value_t = 160)]
    pub q: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct FlowArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 40)]
    pub iters: usize,
    #[arg(long, default_value_t = 128)]
    pub q: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FamilyArg {
    Twobump,
    Degree2,
}

#[derive(Debug, Args, Serialize)]
pub struct QuotientSweepArgs {
    #[arg(long)]
    pub s: f64,
    #[arg(long)]
    pub nmin: usize,
    #[arg(long)]
    pub nmax: usize,
    #[arg(long, default_value_t = 10)]
    pub step: usize,
    #[arg(long, value_enum)]
    #[serde(serialize_with = "family_name")]
    pub family: FamilyArg,
    #[arg(long, default_value_t = 128)]
    pub q: usize,
}

fn family_name<S: serde::Serializer>(f: &FamilyArg, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(match f {
        FamilyArg::Twobump => "twobump",
        FamilyArg::Degree2 => "degree2",
    })
}

#[derive(Debug, Args, Serialize)]
pub struct DualityArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 128)]
    pub q: usize,
    /// HLS stability constant for the derived Sobolev bound.
    #[arg(long)]
    pub c_hls: Option<f64>,
}

/// Text of a report and whether every check passed.
#[derive(Debug)]
pub struct Outcome {
    pub text: String,
    pub passed: bool,
}

#[derive(Serialize)]
struct Envelope<'a, P: Serialize, R: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    params: &'a P,
    result: R,
}

fn envelope<P: Serialize, R: Serialize>(command: &str, params: &P, result: R) -> Result<String> {
    let env = Envelope { tool: "hls-lab", version: TOOL_VERSION, command, params, result };
    Ok(serde_json::to_string_pretty(&env)? + "\n")
}

/// CSV with the tool version and parameter pack as leading comment lines.
fn csv_report<P: Serialize, R: Serialize>(command: &str, params: &P, rows: &[R]) -> Result<String> {
    let mut out = format!(
        "# hls-lab {TOOL_VERSION} {command}\n# params {}\n",
        serde_json::to_string(params)?
    );
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Numerical(format!("csv: {e}")))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Numerical(format!("csv: {e}")))?;
    out.push_str(&String::from_utf8_lossy(&bytes));
    Ok(out)
}

pub fn execute(command: &Command) -> Result<Outcome> {
    match command {
        Command::Constants(a) => constants(a),
        Command::CertifyScalar(a) => certify_scalar(a),
        Command::Deficit(a) => deficit(a),
        Command::Project(a) => project(a),
        Command::LocalCheck(a) => local_check(a),
        Command::Flow(a) => flow(a),
        Command::QuotientSweep(a) => sweep(a),
        Command::DualityCheck(a) => duality(a),
    }
}

fn constants(a: &ConstantsArgs) -> Result<Outcome> {
    let params = ProblemParams::new(a.n, a.s)?;
    let table = funk_hecke_table(&params, a.lmax);
    #[derive(Serialize)]
    struct Row {
        l: usize,
        #[serde(rename = "A")]
        a: f64,
        #[serde(rename = "N")]
        n: String,
    }
    let rows = table
        .iter()
        .enumerate()
        .map(|(l, &v)| Ok(Row { l, a: v, n: multiplicity(a.n, l)?.to_string() }))
        .collect::<Result<Vec<_>>>()?;
    let (_, c_qest, sel) = certificate_selection(a.s, a.eps1, a.eps2)?;
    let th = thresholds(&params, a.eps1, a.eps2, sel.k0, sel.n0, Delta2Exponent::Instance)?;
    let mut text = csv_report("constants", a, &rows)?;
    let block = json!({
        "S": sharp_constant(&params),
        "b": comparability_bound(&params),
        "delta1": th.delta1,
        "delta2": th.delta2,
        "delta0": th.delta0,
        "ln_delta2": th.ln_delta2,
        "ln_delta0": th.ln_delta0,
        "K": th.k,
        "n0": th.n0,
        "c_qest": c_qest,
        "params": params,
    });
    text.push_str(&envelope("constants", a, block)?);
    Ok(Outcome { text, passed: true })
}

fn certify_scalar(a: &CertifyScalarArgs) -> Result<Outcome> {
    let n = select_n(a.p0, a.m, a.eps)?;
    let sp = SplitParams::new(a.gamma, a.m, a.p0, a.eps, n)?;
    let c = build_constants(&sp)?;
    let cubic = certify_cubic_bound(&CertGrid::new(1.0, 2.0, a.p_values, a.rmax, a.points, &corner_points(&sp)));
    let grid = CertGrid::new(a.p0, 2.0, a.p_values, a.rmax, a.points, &corner_points(&sp));
    let prop = certify_proposition1(&sp, &c, &grid);
    let qest = certify_qestimate(&sp, &c, &grid);
    let passed = cubic.certified() && prop.certified() && qest.certified();
    let result = json!({
        "split": sp,
        "constants": c,
        "cubic_bound": cubic,
        "proposition": prop,
        "q_estimate": qest,
        "certified": passed,
    });
    Ok(Outcome { text: envelope("certify-scalar", a, result)?, passed })
}

fn deficit(a: &DeficitArgs) -> Result<Outcome> {
    let f = load_profile(&a.input)?.to_zonal(a.q)?;
    let rep = match a.side {
        SideArg::Hls => hls_deficit(&f),
        SideArg::Sobolev => sobolev_deficit(&f),
    };
    Ok(Outcome { text: envelope("deficit", a, rep)?, passed: true })
}

fn project(a: &ProjectArgs) -> Result<Outcome> {
    let g = load_profile(&a.input)?.to_zonal(a.q)?;
    let dec = project_with_starts(&g, a.starts)?;
    Ok(Outcome { text: envelope("project", a, dec)?, passed: true })
}

fn local_check(a: &LocalCheckArgs) -> Result<Outcome> {
    let params = ProblemParams::new(a.n, a.s)?;
    let cp = CertificateParams::new(&params, a.eps1, a.eps2)?;
    let ctx = SphereContext::full(params, a.q)?;
    let mut rng = seeded_rng(a.seed);
    #[derive(Serialize)]
    struct Violation {
        index: usize,
        #[serde(rename = "I1")]
        i1: f64,
        #[serde(rename = "I2")]
        i2: f64,
        #[serde(rename = "I3")]
        i3: f64,
        slack: f64,
    }
    let mut violations = Vec::new();
    let (mut min_ratio, mut min_i, mut min_slack) = (f64::INFINITY, [f64::INFINITY; 3], f64::INFINITY);
    for index in 0..a.count {
        let r = random_admissible(&ctx, &mut rng, a.degree, a.target)?;
        let b = deficit_breakdown(&r, &cp)?;
        min_ratio = min_ratio.min(b.deficit / a.target);
        for (m, v) in min_i.iter_mut().zip([b.i1, b.i2, b.i3]) {
            *m = m.min(v);
        }
        min_slack = min_slack.min(b.slack());
        if b.i1 < -1e-10 || b.i2 < -1e-10 || b.i3 < -1e-10 || b.slack() < -1e-9 {
            violations.push(Violation { index, i1: b.i1, i2: b.i2, i3: b.i3, slack: b.slack() });
        }
    }
    let passed = violations.is_empty();
    let result = json!({
        "seed": a.seed,
        "certificate": cp,
        "target_within_delta0": a.target <= cp.thresholds.delta0,
        "min_ratio": min_ratio,
        "min_I1": min_i[0],
        "min_I2": min_i[1],
        "min_I3": min_i[2],
        "min_slack": min_slack,
        "violations": violations,
    });
    Ok(Outcome { text: envelope("local-check", a, result)?, passed })
}

fn flow(a: &FlowArgs) -> Result<Outcome> {
    let g = load_profile(&a.input)?.to_zonal(a.q)?;
    let trace = competing_iteration_lifted(g, a.iters)?;
    let mono = monotonicity_check(&trace, 1e-9);
    let decay = residual_decay_check(&trace, 0.05);
    let passed = trace.norm_drift() <= 1e-6 && mono.nondecreasing && decay.passed();
    Ok(Outcome { text: csv_report("flow", a, &trace.records)?, passed })
}

fn sweep(a: &QuotientSweepArgs) -> Result<Outcome> {
    if a.nmin > a.nmax || a.step == 0 {
        return Err(Error::Domain("need nmin <= nmax and step > 0".into()));
    }
    let dims: Vec<usize> = (a.nmin..=a.nmax).step_by(a.step).collect();
    let family = match a.family {
        FamilyArg::Twobump => Family::Twobump,
        FamilyArg::Degree2 => Family::Degree2,
    };
    let rows = quotient_sweep(a.s, &dims, family, a.q)?;
    Ok(Outcome { text: csv_report("quotient-sweep", a, &rows)?, passed: true })
}

fn duality(a: &DualityArgs) -> Result<Outcome> {
    let f = load_profile(&a.input)?.to_zonal(a.q)?;
    let pair = dual_density(&f)?;
    let legendre = legendre_identity_check(&pair);
    let transfer = deficit_transfer_check(&pair);
    let bound = a.c_hls.map(|c| sobolev_stability_from_hls(&f, c, 1e-12)).transpose()?;
    let scale = legendre.sobolev_norm_sq.max(1.0);
    let passed = legendre.residual <= 1e-9 * scale
        && transfer.residual <= 1e-9 * scale
        && bound.as_ref().is_none_or(|b| b.holds);
    let result = json!({ "legendre": legendre, "transfer": transfer, "sobolev_bound": bound, "passed": passed });
    Ok(Outcome { text: envelope("duality-check", a, result)?, passed })
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Numerical(_) => 1,
        _ => 2,
    }
}

/// Caps the worker pool at `SSL_THREADS` when set.
fn configure_threads() -> std::result::Result<(), String> {
    match std::env::var("SSL_THREADS") {
        Ok(v) => {
            let k: usize = v.trim().parse().map_err(|_| format!("SSL_THREADS = {v:?} is not a positive integer"))?;
            if k == 0 {
                return Err("SSL_THREADS must be positive".into());
            }
            // a pool built earlier in the same process keeps its size
            let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
            Ok(())
        }
        Err(_) => Ok(()),
    }
}

/// Parses `args`, runs the command, writes the report and returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut impl Write, stderr: &mut impl Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return 0;
            }
            let msg = e.to_string();
            let _ = writeln!(stderr, "{}", msg.lines().next().unwrap_or("invalid arguments"));
            return 2;
        }
    };
    if let Err(msg) = configure_threads() {
        let _ = writeln!(stderr, "error: {msg}");
        return 2;
    }
    match execute(&cli.command) {
        Ok(out) => {
            let written = match &cli.output {
                Some(path) => std::fs::write(path, &out.text),
                None => stdout.write_all(out.text.as_bytes()),
            };
            if let Err(e) = written {
                let _ = writeln!(stderr, "error: {e}");
                return 2;
            }
            if out.passed {
                0
            } else {
                1
            }
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.to_string().replace('\n', " "));
            exit_code(&e)
        }
    }
}
