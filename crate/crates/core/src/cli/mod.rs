//! Batch front end: config-driven runs written as CSV.

mod config;
mod table;

use std::fmt;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::clocks::{build_quasi_ideal, build_qubit_phase, build_swp, default_n0, Clock};
use crate::constants::{ATOMIC_MASS_UNIT, ELECTRON_MASS, G_EARTH, HBAR, SPEED_OF_LIGHT};
use crate::dilation::{max_coherence_separation, mean_clock_time, sup_vs_mix, t_coh_closed_form};
use crate::kinematics::{CatState, GaussianState, KinematicState, Physics};
use crate::measurement::{sweep_conditioned, SweepParams};
use crate::oracle::{verify_mean_time, verify_sigma, VerificationReport};
use crate::precision::sigma_breakdown;

pub use config::{
    parse_config, ClockSpec, Command, ConfigError, KinematicSpec, MeasurementSpec, PhysicsSpec,
    RunConfig, StateSpec, SweepParameter, SweepSpec, VerifyQuantity, VerifySpec,
};
pub use table::{emit_plot_script, format_value, CsvTable, SCHEMA};

/// Tolerance of the `coherence_identity` check.
pub const IDENTITY_TOLERANCE: f64 = 1e-10;

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Physics(crate::Error),
    Table(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Physics(_) | CliError::Table(_) => 2,
            CliError::Config(_) | CliError::Io(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "config error: {e}"),
            CliError::Physics(e) => write!(f, "physics error: {e}"),
            CliError::Table(e) => write!(f, "output error: {e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        CliError::Physics(e)
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub table: CsvTable,
    /// `false` only for a `verify` run whose check failed.
    pub passed: bool,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            3
        }
    }
}

pub fn build_clock(spec: &ClockSpec) -> crate::Result<Clock> {
    Ok(match *spec {
        ClockSpec::Swp { d, omega } => build_swp(d, omega)?.into(),
        ClockSpec::QuasiIdeal {
            d,
            omega,
            sigma_bar,
            m0,
            n0,
        } => build_quasi_ideal(
            d,
            omega,
            sigma_bar.unwrap_or((d as f64).sqrt()),
            m0.unwrap_or(d as f64 / 4.0),
            n0.unwrap_or(default_n0(d)),
        )?
        .into(),
        ClockSpec::QubitPhase { omega } => build_qubit_phase(omega)?.into(),
        ClockSpec::Idealised { sigma_nr } => Clock::Idealised { sigma_nr },
    })
}

pub fn build_base(spec: &KinematicSpec) -> crate::Result<GaussianState> {
    GaussianState::new(spec.x0, spec.p0, spec.sigma_x, spec.mass)
}

pub fn build_state(spec: &KinematicSpec) -> crate::Result<KinematicState> {
    let base = build_base(spec)?;
    Ok(match spec.state {
        StateSpec::Gaussian => base.into(),
        StateSpec::Cat {
            delta_x0,
            alpha,
            theta,
        } => CatState::new(base, delta_x0, alpha, theta)?.into(),
    })
}

fn build_cat(spec: &KinematicSpec) -> crate::Result<CatState> {
    match build_state(spec)? {
        KinematicState::Cat(c) => Ok(c),
        _ => Err(crate::Error::OutOfRange {
            name: "kstate",
            reason: "a cat state is required".into(),
        }),
    }
}

pub fn build_physics(spec: &PhysicsSpec) -> crate::Result<Physics> {
    Physics::new(spec.g, SPEED_OF_LIGHT * spec.c_scale)
}

fn metadata(config: &RunConfig, command: Command, physics: &Physics) -> Vec<String> {
    let mut m = vec![
        format!("command={}", command.name()),
        format!(
            "constants hbar={} c={} u={} m_e={} g_earth={}",
            format_value(HBAR),
            format_value(SPEED_OF_LIGHT),
            format_value(ATOMIC_MASS_UNIT),
            format_value(ELECTRON_MASS),
            format_value(G_EARTH)
        ),
        format!("c_eff={}", format_value(physics.c)),
    ];
    let echo = RunConfig {
        command: Some(command),
        ..config.clone()
    };
    m.extend(echo.to_text().lines().map(|l| format!("config: {l}")));
    m
}

/// Config text embedded in a CSV's metadata.
pub fn config_echo(csv: &str) -> String {
    csv.lines()
        .filter_map(|l| l.strip_prefix("# config: "))
        .map(|l| format!("{l}\n"))
        .collect()
}

/// Runs the configured command on the current rayon pool.
pub fn run(config: &RunConfig) -> Result<Outcome, CliError> {
    let command = config.command.ok_or_else(|| {
        CliError::Config(ConfigError {
            line: 1,
            message: "no command given".into(),
        })
    })?;
    config::requirements(config, command).map_err(|message| ConfigError { line: 1, message })?;
    let clock = build_clock(&config.clock)?;
    let physics = build_physics(&config.physics)?;
    let mut table = match command {
        Command::Dilation => dilation(config, &clock, &physics)?,
        Command::Coherence => coherence(config, &clock, &physics)?,
        Command::Precision => precision(config, &clock, &physics)?,
        Command::Measurement => measurement(config, &clock, &physics)?,
        Command::Sweep => sweep(config, &clock, &physics)?,
        Command::Verify => {
            let (mut table, passed) = verify(config, &clock, &physics)?;
            let mut meta = metadata(config, command, &physics);
            meta.append(&mut table.metadata);
            table.metadata = meta;
            table.validate()?;
            return Ok(Outcome { table, passed });
        }
    };
    let mut meta = metadata(config, command, &physics);
    meta.append(&mut table.metadata);
    table.metadata = meta;
    table.validate()?;
    Ok(Outcome {
        table,
        passed: true,
    })
}

fn dilation(config: &RunConfig, clock: &Clock, physics: &Physics) -> Result<CsvTable, CliError> {
    let state = build_state(&config.kinematics)?;
    let mut table = CsvTable::new(
        Command::Dilation,
        &[
            "t",
            "mean_t_nr",
            "r_factor",
            "error_trace",
            "relativistic_shift",
            "mean_t",
            "classical_tau",
        ],
    );
    let rows = config
        .physics
        .times
        .par_iter()
        .map(|&t| mean_clock_time(clock, &state, t, physics))
        .collect::<crate::Result<Vec<_>>>()?;
    for r in rows {
        table.push(vec![
            r.t,
            r.mean_t_nr,
            r.r_factor,
            r.error_trace,
            r.relativistic_shift,
            r.mean_t,
            r.classical_tau,
        ]);
    }
    Ok(table)
}

/// `[T_sup, T_mix, T_sup - T_mix, closed-form T_coh (1 + tr E)]`
fn coherence_row(clock: &Clock, cat: &CatState, t: f64, physics: &Physics) -> crate::Result<[f64; 4]> {
    let sup = mean_clock_time(clock, &KinematicState::Cat(*cat), t, physics)?;
    let a = mean_clock_time(clock, &cat.first().into(), t, physics)?;
    let b = mean_clock_time(clock, &cat.second().into(), t, physics)?;
    let mix_shift = cat.alpha * a.relativistic_shift + (1.0 - cat.alpha) * b.relativistic_shift;
    let closed = t_coh_closed_form(cat, t, physics) * (1.0 + clock.error_trace(t)?);
    // the non-relativistic part is common to all three, so difference the shifts
    Ok([sup.mean_t, sup.mean_t_nr + mix_shift, sup.relativistic_shift - mix_shift, closed])
}

fn coherence(config: &RunConfig, clock: &Clock, physics: &Physics) -> Result<CsvTable, CliError> {
    let cat = build_cat(&config.kinematics)?;
    let mut table = CsvTable::new(
        Command::Coherence,
        &["t", "t_sup", "t_mix", "t_coh_direct", "t_coh"],
    );
    let rows = config
        .physics
        .times
        .par_iter()
        .map(|&t| coherence_row(clock, &cat, t, physics))
        .collect::<crate::Result<Vec<_>>>()?;
    for (&t, r) in config.physics.times.iter().zip(rows) {
        table.push(vec![t, r[0], r[1], r[2], r[3]]);
    }
    Ok(table)
}

fn precision(config: &RunConfig, clock: &Clock, physics: &Physics) -> Result<CsvTable, CliError> {
    let state = build_state(&config.kinematics)?;
    let mut table = CsvTable::new(
        Command::Precision,
        &["t", "sigma_nr", "sigma_i", "sigma_ni", "sigma_t"],
    );
    let rows = config
        .physics
        .times
        .par_iter()
        .map(|&t| sigma_breakdown(clock, &state, t, physics))
        .collect::<crate::Result<Vec<_>>>()?;
    for (&t, b) in config.physics.times.iter().zip(rows) {
        table.push(vec![t, b.sigma_nr, b.sigma_i, b.sigma_ni, b.total]);
    }
    Ok(table)
}

fn measurement(config: &RunConfig, clock: &Clock, physics: &Physics) -> Result<CsvTable, CliError> {
    let spec = config.measurement.as_ref().expect("checked by requirements");
    let state = build_base(&config.kinematics)?;
    let times = &config.physics.times;
    // sigma_NR can depend on t for a matrix clock, so each time is its own sweep
    let per_time = times
        .iter()
        .map(|&t| {
            sweep_conditioned(&SweepParams {
                sigma_nr: clock.sigma_nr(t),
                state,
                physics: *physics,
                qs: spec.qs.clone(),
                times: vec![t],
                bin: spec.bin,
            })
        })
        .collect::<crate::Result<Vec<_>>>()?;
    let mut table = CsvTable::new(
        Command::Measurement,
        &[
            "q",
            "t",
            "bin",
            "probability",
            "mean_t",
            "sigma_t",
            "sigma_nr",
            "sigma_unconditioned",
        ],
    );
    for qi in 0..spec.qs.len() {
        for rows in &per_time {
            let r = &rows[qi];
            table.push(vec![
                r.q,
                r.t,
                r.result.bin as f64,
                r.result.probability,
                r.result.mean_t,
                r.result.sigma_t,
                r.sigma_nr,
                r.sigma_unconditioned,
            ]);
        }
    }
    Ok(table)
}

fn sweep(config: &RunConfig, clock: &Clock, physics: &Physics) -> Result<CsvTable, CliError> {
    let spec = config.sweep.as_ref().expect("checked by requirements");
    let template = build_cat(&config.kinematics)?;
    let t0 = config.physics.times[0];
    let values = spec.values();
    let rows = values
        .par_iter()
        .map(|&v| {
            let mut cat = template;
            let mut phys = *physics;
            let mut t = t0;
            match spec.parameter {
                SweepParameter::DeltaRatio => cat.delta_x0 = v * template.base.sigma_x,
                SweepParameter::Alpha => cat.alpha = v,
                SweepParameter::Theta => cat.theta = v,
                SweepParameter::Time => t = v,
                SweepParameter::Gravity => phys.g = v,
            }
            let cat = CatState::new(cat.base, cat.delta_x0, cat.alpha, cat.theta)?;
            coherence_row(clock, &cat, t, &phys)
        })
        .collect::<crate::Result<Vec<_>>>()?;
    let name = spec.parameter.name();
    let mut table = CsvTable::new(Command::Sweep, &[name, "t_sup", "t_mix", "t_coh_direct", "t_coh"]);
    for (&v, r) in values.iter().zip(&rows) {
        table.push(vec![v, r[0], r[1], r[2], r[3]]);
    }
    let (k, _) = rows
        .iter()
        .enumerate()
        .max_by(|a, b| a.1[3].abs().total_cmp(&b.1[3].abs()).then(b.0.cmp(&a.0)))
        .expect("at least two points");
    let interior = k > 0 && k + 1 < values.len();
    table.metadata.push(format!(
        "result extremum_index={k} {name}={} t_coh={} interior={interior}",
        format_value(values[k]),
        format_value(rows[k][3])
    ));
    if spec.parameter == SweepParameter::DeltaRatio && interior {
        let (r, tc) = max_coherence_separation(&template, t0, physics, values[k - 1], values[k + 1]);
        let tc = tc * (1.0 + clock.error_trace(t0)?);
        table.metadata.push(format!(
            "result refined {name}={} t_coh={}",
            format_value(r),
            format_value(tc)
        ));
    }
    Ok(table)
}

fn exponent(x: Option<f64>) -> String {
    x.map(format_value).unwrap_or_else(|| "none".into())
}

fn verify(config: &RunConfig, clock: &Clock, physics: &Physics) -> Result<(CsvTable, bool), CliError> {
    let spec = config.verify.as_ref().expect("checked by requirements");
    let t = config.physics.times[0];
    if spec.quantity == VerifyQuantity::CoherenceIdentity {
        return coherence_identity(config, spec, t, physics);
    }
    let model = clock.as_model().expect("checked by requirements");
    let state = build_state(&config.kinematics)?;
    let report: VerificationReport = match spec.quantity {
        VerifyQuantity::MeanTime => verify_mean_time(model, &state, t, physics, &spec.c_scalings)?,
        VerifyQuantity::Sigma => verify_sigma(model, &state, t, physics, &spec.c_scalings)?,
        VerifyQuantity::CoherenceIdentity => unreachable!(),
    };
    let mut table = CsvTable::new(
        Command::Verify,
        &[
            "lambda",
            "c_eff",
            "perturbative",
            "exact",
            "residual",
            "relative_residual",
            "at_floor",
        ],
    );
    for p in &report.points {
        table.push(vec![
            p.lambda,
            p.c_eff,
            p.perturbative,
            p.exact,
            p.residual,
            p.relative_residual,
            if p.at_floor { 1.0 } else { 0.0 },
        ]);
    }
    table.metadata.push(format!(
        "result quantity={} relative_exponent={} absolute_exponent={} threshold={} at_floor={} passed={}",
        report.quantity,
        exponent(report.relative_exponent),
        exponent(report.absolute_exponent),
        format_value(report.threshold),
        report.at_floor,
        report.passed
    ));
    Ok((table, report.passed))
}

/// Direct `T_sup - T_mix` against the closed form at random cat parameters
/// drawn from the config seed.
fn coherence_identity(
    config: &RunConfig,
    spec: &VerifySpec,
    t: f64,
    physics: &Physics,
) -> Result<(CsvTable, bool), CliError> {
    let base = build_base(&config.kinematics)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let draws: Vec<[f64; 4]> = (0..spec.samples)
        .map(|_| {
            [
                rng.random_range(0.05..0.95),
                rng.random_range(0.0..std::f64::consts::TAU),
                rng.random_range(0.1..6.0),
                rng.random_range(0.0..2.0 * G_EARTH),
            ]
        })
        .collect();
    let rows = draws
        .par_iter()
        .map(|&[alpha, theta, ratio, g]| {
            let cat = CatState::new(base, ratio * base.sigma_x, alpha, theta)?;
            let phys = Physics { g, ..*physics };
            let r = sup_vs_mix(&cat, t, &phys)?;
            Ok([alpha, theta, ratio, g, r.direct.t_coh, r.closed_form_t_coh, r.relative_deviation])
        })
        .collect::<crate::Result<Vec<_>>>()?;
    let mut table = CsvTable::new(
        Command::Verify,
        &["alpha", "theta", "delta_ratio", "g", "t_coh_direct", "t_coh", "relative_deviation"],
    );
    let worst = rows.iter().map(|r| r[6]).fold(0.0, f64::max);
    for r in rows {
        table.push(r.to_vec());
    }
    let passed = worst < IDENTITY_TOLERANCE;
    table.metadata.push(format!(
        "result quantity=coherence_identity worst_relative_deviation={} tolerance={} passed={passed}",
        format_value(worst),
        format_value(IDENTITY_TOLERANCE)
    ));
    Ok((table, passed))
}

/// `chronodil <command> --config <path> [--out <path>] [--jobs N] [--no-timestamp]`
#[derive(Debug, clap::Parser)]
#[command(name = "chronodil", version, about = "Relativistic time dilation of quantum clocks")]
pub struct Args {
    #[arg(value_parser = parse_command)]
    pub command: Command,
    #[arg(long)]
    pub config: PathBuf,
    /// CSV destination; standard output when absent. Measurement and sweep
    /// runs also write `<out>.gp`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    #[arg(long)]
    pub no_timestamp: bool,
}

fn parse_command(s: &str) -> Result<Command, String> {
    s.parse()
}

/// Loads the config file and applies the command given on the command line.
pub fn load(path: &std::path::Path, command: Command) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut config = parse_config(&text)?;
    match config.command {
        Some(c) if c != command => {
            let line = text
                .lines()
                .position(|l| l.split('#').next().unwrap_or("").trim_start().starts_with("command"))
                .map_or(1, |k| k + 1);
            return Err(CliError::Config(ConfigError {
                line,
                message: format!(
                    "config is for `{}` but `{}` was requested",
                    c.name(),
                    command.name()
                ),
            }));
        }
        _ => config.command = Some(command),
    }
    config::requirements(&config, command).map_err(|message| ConfigError {
        line: text.lines().count().max(1),
        message,
    })?;
    Ok(config)
}

fn execute(args: &Args) -> Result<Outcome, CliError> {
    let config = load(&args.config, args.command)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if args.jobs > 0 {
        builder = builder.num_threads(args.jobs);
    }
    let pool = builder.build().map_err(|e| CliError::Io(e.to_string()))?;
    let outcome = pool.install(|| run(&config))?;
    let timestamp = if args.no_timestamp {
        None
    } else {
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .ok()
            .map(|d| d.as_secs())
    };
    let csv = outcome.table.to_csv(timestamp)?;
    match &args.out {
        None => print!("{csv}"),
        Some(path) => {
            let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
            std::fs::write(path, csv).map_err(io)?;
            if matches!(outcome.table.kind, Command::Measurement | Command::Sweep) {
                let name = path
                    .file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_default();
                let script = emit_plot_script(&outcome.table, &name)?;
                let mut gp = path.clone().into_os_string();
                gp.push(".gp");
                std::fs::write(PathBuf::from(gp), script).map_err(io)?;
            }
        }
    }
    Ok(outcome)
}

/// Parses the process arguments, runs, and returns the exit code.
pub fn main_with<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    use clap::Parser;
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&args) {
        Ok(outcome) => {
            if !outcome.passed {
                eprintln!("chronodil: verification failed");
            }
            outcome.exit_code()
        }
        Err(e) => {
            eprintln!("chronodil: {e}");
            e.exit_code()
        }
    }
}
