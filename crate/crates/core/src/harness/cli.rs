//! Command-line front end.
//!
//! Exit codes: 0 ok, 1 certificate or identity failure, 2 usage or invalid
//! input, 3 numerical guard tripped.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::Serialize;

use super::certify::{growth_bound_experiment_with, DataSpec, ExperimentConfig, ExperimentRecord};
use super::family::FamilyMode;
use super::identities::{identity_suite, IdentityOptions};
use super::plot::{line_plot, Series};
use crate::determinant::{self, AlphaOptions, LeadingMode};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::flow::{self, Equation, FlowSpec, Integrator, Sign, Trajectory};
use crate::io;
use crate::lattice::{random_band_limited, random_gaussian_data, FrequencyLattice, SpectralField};
use crate::spaces::{self, NormKind, NormRow, NormSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_GUARD: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "integrable-lab", version, about = "Norms, flows and trace-series conservation laws on dilated tori")]
struct Cli {
    /// Run element-parallel work sequentially.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate space norms of a field.
    Norms(NormsArgs),
    /// Integrate a flow and save the trajectory.
    Evolve(EvolveArgs),
    /// Evaluate the trace series of a field, or its drift along a saved trajectory.
    Alpha(AlphaArgs),
    /// Run the growth-bound certificate pipeline.
    Certify(CertifyArgs),
    /// Check the exact leading-term, Hilbert–Schmidt and complex-κ identities.
    IdentitySuite(IdentityArgs),
    /// Generate a random field.
    Gen(GenArgs),
}

/// Where a command gets its field: a file, or a random band-limited draw.
#[derive(Args, Debug, Clone)]
struct FieldSource {
    /// Field file (`.json` or binary dump).
    #[arg(long)]
    field: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    lambda: u32,
    #[arg(long, default_value_t = 32)]
    cutoff: u32,
    /// Support radius (integer mode index) of the random draw.
    #[arg(long, default_value_t = 4)]
    support: i64,
    /// `L²` norm of the random draw.
    #[arg(long, default_value_t = 0.1)]
    l2: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl FieldSource {
    fn load(&self) -> Result<SpectralField> {
        match &self.field {
            Some(path) => io::load_field(path),
            None => random_band_limited(FrequencyLattice::new(self.lambda, self.cutoff)?, self.support, self.l2, self.seed),
        }
    }
}

#[derive(Args, Debug)]
struct NormsArgs {
    #[command(flatten)]
    source: FieldSource,
    #[arg(long, default_value_t = 4.0)]
    p: f64,
    #[arg(long, default_value_t = 0.0)]
    s: f64,
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    theta: f64,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvolveArgs {
    #[command(flatten)]
    source: FieldSource,
    #[arg(long, default_value = "nls")]
    equation: String,
    #[arg(long, default_value = "defocusing")]
    sign: Sign,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    beta: f64,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long, default_value_t = 1.0)]
    t_final: f64,
    #[arg(long, default_value_t = 0.1)]
    snap_every: f64,
    /// Force integrating-factor RK4 for the NLS family too.
    #[arg(long)]
    rk4: bool,
    #[arg(long)]
    no_dealias: bool,
    #[arg(long, default_value = "out/evolve")]
    output_dir: PathBuf,
    #[arg(long)]
    plot: bool,
}

#[derive(Args, Debug)]
struct AlphaArgs {
    #[command(flatten)]
    source: FieldSource,
    /// Saved trajectory directory; reports drift along it instead of a single field.
    #[arg(long)]
    trajectory: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    kappa_re: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    kappa_im: f64,
    #[arg(long, default_value_t = determinant::DEFAULT_ORDER)]
    order: usize,
    #[arg(long, default_value = "defocusing")]
    sign: Sign,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    plot: bool,
}

#[derive(Args, Debug)]
struct CertifyArgs {
    /// TOML file with experiment settings; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    equation: Option<String>,
    #[arg(long)]
    sign: Option<Sign>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    s: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Normalise the data to this `FL^{s,p}(T)` norm.
    #[arg(long)]
    size: Option<f64>,
    #[arg(long)]
    t_final: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    n_mod: Option<i64>,
    #[arg(long)]
    family_mode: Option<FamilyMode>,
    #[arg(long)]
    lambda: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    /// `zero`, `modes` (default profile), `gaussian:<alpha>` or `band-limited:<support>`.
    #[arg(long)]
    data: Option<String>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    plot: bool,
}

#[derive(Args, Debug)]
struct IdentityArgs {
    #[arg(long, default_value_t = 1)]
    lambda: u32,
    #[arg(long, default_value_t = 64)]
    cutoff: u32,
    /// Data support radius in frequency units (default cutoff/4).
    #[arg(long)]
    support: Option<u32>,
    #[arg(long, default_value_t = 20)]
    count: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GenArgs {
    /// `gaussian` (unit torus, `û(n) = g_n⟨n⟩^{-α}`) or `band-limited`.
    #[arg(long, default_value = "gaussian")]
    kind: String,
    #[arg(long, default_value_t = 1)]
    lambda: u32,
    #[arg(long, default_value_t = 32)]
    cutoff: u32,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 4)]
    support: i64,
    #[arg(long, default_value_t = 0.1)]
    l2: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Numerical(_) => EXIT_GUARD,
        _ => EXIT_USAGE,
    }
}

/// Writes to stdout; a closed pipe is not an error.
fn print_json<T: Serialize>(value: &T) -> Result<()> {
    use std::io::Write;
    let text = serde_json::to_string_pretty(value)?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

/// Parses `argv` (program name first) and runs the command; returns the exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let exec = if cli.sequential { Execution::Sequential } else { Execution::Parallel };
    let result = match cli.command {
        Command::Norms(a) => norms(a),
        Command::Evolve(a) => evolve(a),
        Command::Alpha(a) => alpha(a, exec),
        Command::Certify(a) => certify(a, exec),
        Command::IdentitySuite(a) => identities(a, exec),
        Command::Gen(a) => gen(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn norms(a: NormsArgs) -> Result<i32> {
    let f = a.source.load()?;
    let kinds = [
        NormKind::Sobolev { theta: a.theta },
        NormKind::FourierLebesgue { s: a.s, p: a.p },
        NormKind::Modulation { s: a.s, p: a.p },
        NormKind::ModulatedSobolev { theta: a.theta, p: a.p, s: a.s },
    ];
    let id = a.source.field.as_ref().map(|p| p.display().to_string()).unwrap_or_else(|| "generated".into());
    let rows = kinds
        .iter()
        .map(|k| spaces::evaluate(&f, &NormSpec::new(*k)).map(|v| NormRow::new(id.clone(), k, v)))
        .collect::<Result<Vec<_>>>()?;
    let mut w = csv::Writer::from_writer(std::io::stdout());
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    if let Some(dir) = a.output_dir {
        std::fs::create_dir_all(&dir)?;
        let mut w = csv::Writer::from_path(dir.join("norms.csv"))?;
        for r in &rows {
            w.serialize(r)?;
        }
        w.flush()?;
    }
    Ok(EXIT_OK)
}

fn evolve(a: EvolveArgs) -> Result<i32> {
    let u0 = a.source.load()?;
    let eq = Equation::parse(&a.equation, a.sign, a.beta)?;
    let mut spec = FlowSpec::new(eq, a.dt);
    if a.rk4 {
        spec = spec.with_integrator(Integrator::IntegratingFactorRk4);
    }
    spec.dealias = !a.no_dealias;
    let traj = flow::evolve(&u0, &spec, a.t_final, &flow::uniform_snap_times(a.t_final, a.snap_every))?;
    traj.save(&a.output_dir)?;
    if a.plot {
        let pts = |f: fn(&flow::Diagnostics) -> f64| traj.diagnostics.iter().map(|d| (d.time, f(d))).collect();
        line_plot(
            &a.output_dir.join("norms.svg"),
            "trajectory norms",
            &[Series { name: "L2", points: pts(|d| d.l2) }, Series { name: "FL4", points: pts(|d| d.fl4) }],
        )?;
    }
    println!(
        "{} snapshots written to {}; relative L2 drift {:.3e}",
        traj.snapshots.len(),
        a.output_dir.display(),
        traj.relative_mass_drift()
    );
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct AlphaSummary {
    alpha: determinant::AlphaResult,
    leading_closed_form: f64,
    leading_matrix: f64,
}

fn alpha(a: AlphaArgs, exec: Execution) -> Result<i32> {
    let kappa = Complex64::new(a.kappa_re, a.kappa_im);
    let opts = AlphaOptions::default().with_order(a.order).with_sign(a.sign);
    if let Some(dir) = &a.trajectory {
        let traj = Trajectory::load(dir)?;
        let opts = opts.with_sign(traj.spec.equation.sign());
        let report = determinant::conservation_drift_with(&traj, kappa, &opts, exec)?;
        if let Some(out) = &a.output_dir {
            std::fs::create_dir_all(out)?;
            let rows: Vec<(f64, determinant::AlphaResult)> =
                report.times.iter().copied().zip(report.results.iter().cloned()).collect();
            determinant::write_alpha_csv(&rows, std::fs::File::create(out.join("alpha.csv"))?)?;
            if a.plot {
                let points = rows.iter().map(|(t, r)| (*t, r.value)).collect();
                line_plot(&out.join("alpha.svg"), "alpha along the trajectory", &[Series { name: "alpha", points }])?;
            }
        }
        print_json(&serde_json::json!({
            "max_relative_drift": report.max_relative_drift,
            "max_abs_drift": report.max_abs_drift,
            "min_smallness_margin": report.min_smallness_margin,
            "all_verifiable": report.verifiable.iter().all(|v| *v),
        }))?;
        return Ok(EXIT_OK);
    }
    let f = a.source.load()?;
    // Checks the lattice-shift precondition before any heavy work.
    let leading_closed_form = determinant::leading_term(&f, kappa, LeadingMode::ClosedForm)?;
    let result = determinant::alpha_with(&f, kappa, &opts)?;
    let summary = AlphaSummary {
        leading_matrix: determinant::leading_term(&f, kappa, LeadingMode::Matrix)?,
        leading_closed_form,
        alpha: result,
    };
    if let Some(out) = &a.output_dir {
        std::fs::create_dir_all(out)?;
        determinant::write_alpha_csv(&[(0.0, summary.alpha.clone())], std::fs::File::create(out.join("alpha.csv"))?)?;
    }
    print_json(&summary)?;
    Ok(EXIT_OK)
}

fn parse_data(text: &str) -> Result<DataSpec> {
    let (kind, arg) = text.split_once(':').unwrap_or((text, ""));
    let num = |what: &str| -> Result<f64> {
        arg.parse().map_err(|_| Error::invalid(format!("--data {kind} needs a numeric {what}")))
    };
    Ok(match kind {
        "zero" => DataSpec::Zero,
        "modes" => DataSpec::default(),
        "gaussian" => DataSpec::Gaussian { alpha: num("alpha")? },
        "band-limited" => DataSpec::BandLimited { support: num("support")? as i64 },
        _ => return Err(Error::invalid(format!("unknown data kind '{kind}'"))),
    })
}

fn certify_config(a: &CertifyArgs) -> Result<ExperimentConfig> {
    let mut c = match &a.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(v) = &a.equation {
        c.equation = v.clone();
    }
    macro_rules! apply {
        ($($field:ident),*) => { $( if let Some(v) = a.$field { c.$field = v; } )* };
    }
    apply!(sign, p, s, epsilon, t_final, dt, seed);
    if a.family_mode.is_some() {
        c.family_mode = a.family_mode.unwrap_or_default();
    }
    if a.size.is_some() {
        c.size = a.size;
    }
    if a.n_mod.is_some() {
        c.n_mod = a.n_mod;
    }
    if a.lambda.is_some() {
        c.lambda = a.lambda;
    }
    if let Some(d) = &a.data {
        c.data = parse_data(d)?;
    }
    if a.output_dir.is_some() {
        c.output_dir = a.output_dir.clone();
    }
    Ok(c)
}

/// Norm and α plots of a certificate run.
pub fn plot_record(record: &ExperimentRecord, dir: &Path) -> Result<()> {
    let rows = record.timeseries();
    let col = |f: fn(&super::certify::TimeseriesRow) -> f64| rows.iter().map(|r| (r.t, f(r))).collect();
    line_plot(
        &dir.join("norms.svg"),
        "norms",
        &[
            Series { name: "L2(T)", points: col(|r| r.l2) },
            Series { name: "FL(T)", points: col(|r| r.fl_norm) },
            Series { name: "M(T_lambda)", points: col(|r| r.mod_norm) },
            Series { name: "MH(T_lambda)", points: col(|r| r.mh_norm) },
        ],
    )?;
    line_plot(
        &dir.join("alpha.svg"),
        "family aggregates",
        &[
            Series { name: "alpha aggregate", points: col(|r| r.alpha_aggregate) },
            Series { name: "error aggregate", points: col(|r| r.error_aggregate) },
        ],
    )
}

fn certify(a: CertifyArgs, exec: Execution) -> Result<i32> {
    let config = certify_config(&a)?;
    let record = growth_bound_experiment_with(&config, exec)?;
    if let Some(dir) = &config.output_dir {
        record.save(dir)?;
        if a.plot {
            plot_record(&record, dir)?;
        }
    }
    let c = &record.certificate;
    print_json(&serde_json::json!({
        "lambda": record.scaling.lambda,
        "snapshots": record.snapshots.len(),
        "certificate": c,
    }))?;
    Ok(if c.guard_tripped.is_some() {
        EXIT_GUARD
    } else if c.passed {
        EXIT_OK
    } else {
        EXIT_FAILED
    })
}

fn identities(a: IdentityArgs, exec: Execution) -> Result<i32> {
    let mut opts = IdentityOptions::new(a.lambda, a.cutoff);
    if let Some(s) = a.support {
        opts.support = s;
    }
    opts.count = a.count;
    opts.seed = a.seed;
    opts.execution = exec;
    let report = identity_suite(&opts)?;
    for c in &report.checks {
        println!(
            "{} {:<42} max_error {:.3e} (tolerance {:.0e}, {} cases)",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.max_error,
            c.tolerance,
            c.cases
        );
    }
    if let Some(dir) = a.output_dir {
        std::fs::create_dir_all(&dir)?;
        std::fs::write(dir.join("identities.json"), serde_json::to_string_pretty(&report)?)?;
    }
    Ok(if report.passed() { EXIT_OK } else { EXIT_FAILED })
}

fn gen(a: GenArgs) -> Result<i32> {
    let lat = FrequencyLattice::new(a.lambda, a.cutoff)?;
    let f = match a.kind.as_str() {
        "gaussian" => random_gaussian_data(lat, a.alpha, a.seed)?,
        "band-limited" => random_band_limited(lat, a.support, a.l2, a.seed)?,
        other => return Err(Error::invalid(format!("unknown field kind '{other}'"))),
    };
    if let Some(parent) = a.out.parent() {
        std::fs::create_dir_all(parent)?;
    }
    io::save_field(&f, &a.out)?;
    println!("wrote {} ({} modes)", a.out.display(), f.lattice().mode_count());
    Ok(EXIT_OK)
}
