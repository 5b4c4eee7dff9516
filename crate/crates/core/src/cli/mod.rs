//! Command-line front end.
//!
//! Settings are layered: built-in defaults for the command, then the
//! `--config` file, then `--set key=value` overrides and the dedicated flags.
//! The output directory comes from `--outdir`, else `DMA_NEARFIELD_OUTDIR`,
//! else the config file, else the working directory.

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use config::{ConfigError, RunConfig};
use output::FigureBundle;

/// Environment variable naming the default output directory.
pub const OUTDIR_ENV: &str = "DMA_NEARFIELD_OUTDIR";

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Parse(#[from] ConfigError),
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numerical(_) => EXIT_NUMERICAL,
            _ => EXIT_CONFIG,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "dma-nearfield",
    version,
    about = "Near-field beam depth of lossy dynamic metasurface antennas"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// key=value configuration file
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one configuration key (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Output directory
    #[arg(long)]
    pub outdir: Option<PathBuf>,
    /// csv or json
    #[arg(long)]
    pub format: Option<String>,
    /// exact, fresnel or fresnel_no_bilinear
    #[arg(long)]
    pub distance_mode: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Relative gain against range mismatch for several attenuations
    GainCurve {
        #[command(flatten)]
        common: Common,
        /// Comma-separated attenuation coefficients [1/m]
        #[arg(long)]
        alpha_list: Option<String>,
        /// Mismatch sweep start:stop:step [m]
        #[arg(long)]
        dr_range: Option<String>,
    },
    /// Numeric and modelled x_delta(w)
    Xdelta {
        #[command(flatten)]
        common: Common,
        /// Comma-separated gain fractions
        #[arg(long)]
        delta_list: Option<String>,
        /// w sweep start:stop:step
        #[arg(long)]
        w_range: Option<String>,
        /// Also refit the model coefficients
        #[arg(long)]
        fit: bool,
    },
    /// Beam depth limits against w
    Depth {
        #[command(flatten)]
        common: Common,
        /// User range [m]
        #[arg(long = "r")]
        r: Option<String>,
        /// w sweep start:stop:step
        #[arg(long)]
        w_range: Option<String>,
        /// Gain fraction defining the depth
        #[arg(long)]
        delta: Option<String>,
        /// numeric or model
        #[arg(long)]
        x_source: Option<String>,
    },
    /// Least-squares refit of the depth model coefficients
    Fit {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        delta_list: Option<String>,
        #[arg(long)]
        w_range: Option<String>,
    },
    /// Regenerate one of the reference figures with its fixed parameters
    Reproduce {
        /// 1, 2 or 3
        #[arg(long)]
        figure: String,
        #[arg(long)]
        outdir: Option<PathBuf>,
        #[arg(long)]
        format: Option<String>,
    },
}

fn layered(mut cfg: RunConfig, common: &Common, flags: &[(&str, Option<&String>)]) -> Result<RunConfig, CliError> {
    if let Some(path) = &common.config {
        cfg.apply_file(path)?;
    }
    for assignment in &common.set {
        cfg.apply_override(assignment)?;
    }
    let named = [
        ("format", common.format.as_ref()),
        ("distance_mode", common.distance_mode.as_ref()),
    ];
    for (key, value) in named.iter().chain(flags) {
        if let Some(v) = value {
            cfg.apply_override(&format!("{key}={v}"))?;
        }
    }
    if let Some(dir) = &common.outdir {
        cfg.outdir = Some(dir.clone());
    } else if let Some(dir) = std::env::var_os(OUTDIR_ENV) {
        cfg.outdir = Some(PathBuf::from(dir));
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit(bundle: &FigureBundle, cfg: &RunConfig) -> Result<(), CliError> {
    let outdir = cfg.outdir.clone().unwrap_or_else(|| PathBuf::from("."));
    let now = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    for path in bundle.write(&outdir, cfg.format, now)? {
        println!("{}", path.display());
    }
    Ok(())
}

/// Defaults of a reference figure.
pub fn figure_config(figure: u8) -> Result<RunConfig, CliError> {
    match figure {
        1 => Ok(RunConfig::gain_curve_defaults()),
        2 => Ok(RunConfig {
            fit: true,
            ..RunConfig::xdelta_defaults()
        }),
        3 => Ok(RunConfig::depth_defaults()),
        other => Err(CliError::Config(format!("unknown figure {other}; expected 1, 2 or 3"))),
    }
}

/// Bundle for a reference figure.
pub fn figure_bundle(figure: u8, cfg: &RunConfig) -> Result<FigureBundle, CliError> {
    let name = format!("fig{figure}");
    match figure {
        1 => commands::gain_curve(cfg, &name, Some(1)),
        2 => commands::xdelta(cfg, &name, Some(2)),
        3 => commands::depth(cfg, &name, Some(3)),
        other => Err(CliError::Config(format!("unknown figure {other}; expected 1, 2 or 3"))),
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::GainCurve {
            common,
            alpha_list,
            dr_range,
        } => {
            let cfg = layered(
                RunConfig::gain_curve_defaults(),
                common,
                &[("alpha_list", alpha_list.as_ref()), ("dr_range", dr_range.as_ref())],
            )?;
            emit(&commands::gain_curve(&cfg, "gain_curve", None)?, &cfg)
        }
        Command::Xdelta {
            common,
            delta_list,
            w_range,
            fit,
        } => {
            let fit_flag = fit.then(|| "true".to_owned());
            let cfg = layered(
                RunConfig::xdelta_defaults(),
                common,
                &[
                    ("delta_list", delta_list.as_ref()),
                    ("w_range", w_range.as_ref()),
                    ("fit", fit_flag.as_ref()),
                ],
            )?;
            emit(&commands::xdelta(&cfg, "xdelta", None)?, &cfg)
        }
        Command::Depth {
            common,
            r,
            w_range,
            delta,
            x_source,
        } => {
            let cfg = layered(
                RunConfig::depth_defaults(),
                common,
                &[
                    ("r", r.as_ref()),
                    ("w_range", w_range.as_ref()),
                    ("delta", delta.as_ref()),
                    ("x_source", x_source.as_ref()),
                ],
            )?;
            emit(&commands::depth(&cfg, "depth", None)?, &cfg)
        }
        Command::Fit {
            common,
            delta_list,
            w_range,
        } => {
            let cfg = layered(
                RunConfig::xdelta_defaults(),
                common,
                &[("delta_list", delta_list.as_ref()), ("w_range", w_range.as_ref())],
            )?;
            emit(&commands::fit(&cfg, "fit")?, &cfg)
        }
        Command::Reproduce { figure, outdir, format } => {
            let id: u8 = figure
                .trim()
                .parse()
                .map_err(|_| CliError::Config(format!("unknown figure '{figure}'; expected 1, 2 or 3")))?;
            let mut cfg = figure_config(id)?;
            if let Some(f) = format {
                cfg.apply_override(&format!("format={f}"))?;
            }
            cfg.outdir = outdir
                .clone()
                .or_else(|| std::env::var_os(OUTDIR_ENV).map(PathBuf::from));
            emit(&figure_bundle(id, &cfg)?, &cfg)
        }
    }
}

/// Parse arguments, run, and map the outcome to an exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
