//! Command-line driver: `test`, `simulate` and `mc` subcommands.
//!
//! Every subcommand is first turned into a [`RunConfig`], which can also be
//! read from a JSON file with `--config`. Exit codes: 0 success, 2
//! configuration error, 3 data or I/O error, 4 numerical failure.

use crate::bootstrap::{run_test, Recentering, SchemeId, SchemeSpec};
use crate::copulas::CopulaFamily;
use crate::data::Dataset;
use crate::dgp::{DgpMode, DgpSpec, DgpVariant};
use crate::error::{Error, Result};
use crate::mc::{design_for, mc_rejection, write_qq, write_table, McCell};
use crate::statistic::{Context, StatId, TestConfig};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestRun {
    pub data: PathBuf,
    pub i_cols: String,
    pub j_cols: String,
    pub stat: StatId,
    pub scheme: SchemeId,
    #[serde(default)]
    pub recentering: Option<Recentering>,
    pub n_boot: usize,
    pub seed: u64,
    #[serde(default)]
    pub test: TestConfig,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub emit_boot_values: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateRun {
    pub dgp: DgpSpec,
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McRun {
    pub families: Vec<CopulaFamily>,
    pub stats: Vec<StatId>,
    pub scheme: SchemeId,
    #[serde(default)]
    pub recentering: Option<Recentering>,
    pub tau_max: Vec<f64>,
    /// Constant-tau designs with `tau_max` as the constant.
    pub null: bool,
    pub n: usize,
    pub reps: usize,
    pub alpha: f64,
    pub n_boot: usize,
    pub seed: u64,
    #[serde(default)]
    pub test: TestConfig,
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// QQ pairs and per-replication p-values.
    #[serde(default)]
    pub qq_out: Option<PathBuf>,
}

/// A fully specified run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum RunConfig {
    Test(TestRun),
    Simulate(SimulateRun),
    Mc(McRun),
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            RunConfig::Test(t) => {
                t.test.validate()?;
                if t.n_boot == 0 {
                    return Err(Error::Config("n_boot must be positive".into()));
                }
            }
            RunConfig::Simulate(s) => s.dgp.validate()?,
            RunConfig::Mc(m) => {
                m.test.validate()?;
                if m.families.is_empty() || m.stats.is_empty() || m.tau_max.is_empty() {
                    return Err(Error::Config("families, statistics and tau values must be non-empty".into()));
                }
                if m.reps == 0 || m.n_boot == 0 || !(0.0..=1.0).contains(&m.alpha) {
                    return Err(Error::Config("reps and n_boot must be positive and alpha in [0, 1]".into()));
                }
                if m.tau_max.iter().any(|t| !(0.0..=1.0).contains(t)) {
                    return Err(Error::Config("tau values must lie in [0, 1]".into()));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Parser)]
#[command(name = "condcop", version, about = "Conditional copulas and tests of the simplifying assumption")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Bootstrap test of the simplifying assumption on a CSV file.
    Test(TestArgs),
    /// Simulate a dataset from a design.
    Simulate(SimulateArgs),
    /// Monte Carlo rejection rates.
    Mc(McArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON run configuration; other flags are ignored when given.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "gaussian")]
    pub family: CopulaFamily,
    /// Bandwidth on the rank scale (rule of thumb when absent).
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long, default_value_t = 20)]
    pub grid_m: usize,
    #[arg(long, default_value_t = 5)]
    pub boxes_m: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Common {
    fn test_config(&self) -> TestConfig {
        TestConfig { h: self.h, grid_m: self.grid_m, boxes_m: self.boxes_m, family: self.family, ..TestConfig::default() }
    }
}

#[derive(Debug, Args)]
pub struct TestArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, required_unless_present = "config")]
    pub data: Option<PathBuf>,
    /// Conditioned columns, by name or 0-based index, comma separated.
    #[arg(long, default_value = "x1,x2")]
    pub i_cols: String,
    #[arg(long, default_value = "x3")]
    pub j_cols: String,
    #[arg(long, default_value = "I_chi")]
    pub stat: StatId,
    #[arg(long, default_value = "bootNP")]
    pub scheme: SchemeId,
    #[arg(long, default_value_t = 200)]
    pub n_boot: usize,
    #[arg(long)]
    pub emit_boot_values: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 500)]
    pub n: usize,
    #[arg(long, default_value_t = 1.0)]
    pub tau_max: f64,
    /// Constant tau instead of the alternative design.
    #[arg(long)]
    pub tau0: Option<f64>,
    /// Piecewise-constant design on --boxes-m boxes.
    #[arg(long)]
    pub boxed: bool,
}

#[derive(Debug, Args)]
pub struct McArgs {
    #[command(flatten)]
    pub common: Common,
    /// Several families, comma separated; overrides --family.
    #[arg(long, value_delimiter = ',')]
    pub families: Option<Vec<CopulaFamily>>,
    #[arg(long = "stat", value_delimiter = ',', default_value = "I_chi")]
    pub stats: Vec<StatId>,
    #[arg(long, default_value = "bootNP")]
    pub scheme: SchemeId,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub tau_max: Vec<f64>,
    /// Constant-tau designs.
    #[arg(long)]
    pub null: bool,
    #[arg(long, default_value_t = 500)]
    pub n: usize,
    #[arg(long, default_value_t = 500)]
    pub reps: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 200)]
    pub n_boot: usize,
    #[arg(long)]
    pub qq_out: Option<PathBuf>,
}

fn load(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    RunConfig::from_json(&text)
}

/// Turns parsed flags into a run configuration.
pub fn to_run_config(cli: Cli) -> Result<RunConfig> {
    let cfg = match cli.command {
        Command::Test(a) => match &a.common.config {
            Some(p) => load(p)?,
            None => RunConfig::Test(TestRun {
                data: a.data.clone().expect("required by clap"),
                i_cols: a.i_cols,
                j_cols: a.j_cols,
                stat: a.stat,
                scheme: a.scheme,
                recentering: None,
                n_boot: a.n_boot,
                seed: a.common.seed,
                test: a.common.test_config(),
                out: a.common.out,
                emit_boot_values: a.emit_boot_values,
            }),
        },
        Command::Simulate(a) => match &a.common.config {
            Some(p) => load(p)?,
            None => {
                let mode = if a.boxed { DgpMode::Boxed { m: a.common.boxes_m } } else { DgpMode::Pointwise };
                let dgp = match a.tau0 {
                    Some(t) => DgpSpec::null(a.common.family, t, mode, a.n),
                    None => DgpSpec { family: a.common.family, tau_max: a.tau_max, mode, n: a.n, variant: DgpVariant::Alternative },
                };
                RunConfig::Simulate(SimulateRun { dgp, seed: a.common.seed, out: a.common.out })
            }
        },
        Command::Mc(a) => match &a.common.config {
            Some(p) => load(p)?,
            None => RunConfig::Mc(McRun {
                families: a.families.unwrap_or_else(|| vec![a.common.family]),
                stats: a.stats,
                scheme: a.scheme,
                recentering: None,
                tau_max: a.tau_max,
                null: a.null,
                n: a.n,
                reps: a.reps,
                alpha: a.alpha,
                n_boot: a.n_boot,
                seed: a.common.seed,
                test: a.common.test_config(),
                out: a.common.out,
                qq_out: a.qq_out,
            }),
        },
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Writes to `path` through a temporary file, or to stdout.
fn emit(path: Option<&Path>, write: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match path {
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write(&mut lock)?;
            lock.flush()?;
            Ok(())
        }
        Some(p) => {
            let tmp = p.with_extension("partial");
            {
                let mut w = BufWriter::new(File::create(&tmp)?);
                write(&mut w)?;
                w.flush()?;
            }
            std::fs::rename(&tmp, p)?;
            Ok(())
        }
    }
}

/// JSON result of the `test` command.
#[derive(Debug, Serialize, Deserialize)]
pub struct TestOutput {
    pub schema_version: u32,
    pub stat_id: StatId,
    pub value: f64,
    pub p_value: Option<f64>,
    pub n: usize,
    /// True when some column holds tied values.
    pub ties: bool,
    pub n_boot: usize,
    pub n_dropped: usize,
    pub valid: bool,
    pub scheme: SchemeId,
    pub recentering: Recentering,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub boot_values: Option<Vec<f64>>,
    pub runtime_seconds: f64,
}

pub fn cmd_test(t: &TestRun) -> Result<TestOutput> {
    let start = Instant::now();
    let ds = Dataset::from_csv_path(&t.data, &t.i_cols, &t.j_cols)?;
    let ctx = Context::new(ds, t.test.clone(), t.stat)?;
    let spec = SchemeSpec { scheme: t.scheme, recentering: t.recentering, n_boot: t.n_boot };
    let r = run_test(&ctx, &spec, t.seed)?;
    Ok(TestOutput {
        schema_version: SCHEMA_VERSION,
        stat_id: r.stat_id,
        value: r.value,
        p_value: r.p_value,
        n: ctx.dataset().n(),
        ties: ctx.dataset().has_ties(),
        n_boot: r.n_boot,
        n_dropped: r.n_dropped,
        valid: r.valid,
        scheme: r.scheme,
        recentering: r.recentering,
        seed: r.seed,
        boot_values: t.emit_boot_values.then_some(r.boot_values),
        runtime_seconds: start.elapsed().as_secs_f64(),
    })
}

pub fn cmd_mc(m: &McRun) -> Result<Vec<McCell>> {
    let spec = SchemeSpec { scheme: m.scheme, recentering: m.recentering, n_boot: m.n_boot };
    let mut cells = Vec::new();
    for &family in &m.families {
        let test = TestConfig { family, ..m.test.clone() };
        for &tau in &m.tau_max {
            for group in [false, true] {
                let stats: Vec<StatId> = m.stats.iter().copied().filter(|s| s.is_box() == group).collect();
                if stats.is_empty() {
                    continue;
                }
                let design = design_for(stats[0], family, tau, m.null, m.n, m.test.boxes_m);
                cells.extend(mc_rejection(&design, &stats, &test, &spec, m.reps, m.alpha, m.seed)?);
            }
        }
    }
    Ok(cells)
}

/// Executes a run configuration.
pub fn execute(cfg: &RunConfig) -> Result<()> {
    match cfg {
        RunConfig::Test(t) => {
            let out = cmd_test(t)?;
            emit(t.out.as_deref(), |w| {
                serde_json::to_writer_pretty(&mut *w, &out)?;
                writeln!(w)?;
                Ok(())
            })
        }
        RunConfig::Simulate(s) => {
            let ds = s.dgp.simulate(s.seed)?;
            emit(s.out.as_deref(), |w| ds.write_csv(w))
        }
        RunConfig::Mc(m) => {
            let cells = cmd_mc(m)?;
            emit(m.out.as_deref(), |w| write_table(&cells, w))?;
            if let Some(q) = &m.qq_out {
                emit(Some(q), |w| write_qq(&cells, w))?;
            }
            Ok(())
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Domain(_) => 2,
        Error::Data(_) | Error::Io(_) => 3,
        Error::Estimation(_) | Error::Numerical(_) => 4,
    }
}

/// Parses arguments, runs, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match to_run_config(cli).and_then(|c| execute(&c)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("condcop: {e}");
            exit_code(&e)
        }
    }
}
