//! Flat `key=value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Reals accept plain
//! numbers and multiples of `pi` (`pi/3`, `2*pi`, `0.5pi`). Lists are comma
//! separated; ranges are `start:stop:step`.

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};

use crate::array_model::{ArrayConfig, DistanceMode, SphericalPosition};

/// Manifest keys that describe a run rather than configure it.
const METADATA_KEYS: &[&str] = &["tool", "version", "command", "figure", "rows", "generated_at"];

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub source: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "{}:{}: {}", self.source, line, self.message),
            None => write!(f, "{}: {}", self.source, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Inclusive arithmetic sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sweep {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Sweep {
    pub fn new(start: f64, stop: f64, step: f64) -> Result<Self, String> {
        if !(start.is_finite() && stop.is_finite() && step.is_finite()) {
            return Err("sweep bounds must be finite".into());
        }
        if step <= 0.0 {
            return Err(format!("sweep step must be positive, got {step}"));
        }
        if stop < start {
            return Err(format!("sweep stop {stop} is below start {start}"));
        }
        Ok(Self { start, stop, step })
    }

    /// Sample points, computed as `start + k step` to avoid drift.
    pub fn points(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|k| self.start + k as f64 * self.step).collect()
    }

    fn render(&self) -> String {
        format!("{}:{}:{}", repr(self.start), repr(self.stop), repr(self.step))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

/// Where depth limits take `x_delta(w)` from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XSourceKind {
    Numeric,
    Model,
}

/// Every parameter a run can depend on.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub array: ArrayConfig,
    /// Set when `beta` was given explicitly; otherwise it follows the
    /// wavelength.
    pub beta_explicit: bool,
    pub user: SphericalPosition,
    pub delta: f64,
    pub alpha_list: Vec<f64>,
    pub delta_list: Vec<f64>,
    pub dr: Sweep,
    pub w: Sweep,
    pub fit: bool,
    pub mode: DistanceMode,
    pub x_source: XSourceKind,
    pub format: OutputFormat,
    pub outdir: Option<PathBuf>,
}

impl RunConfig {
    /// Range-mismatch sweep at 7 m broadside.
    pub fn gain_curve_defaults() -> Self {
        Self {
            array: ArrayConfig::reference(),
            beta_explicit: false,
            user: SphericalPosition {
                r: 7.0,
                phi: PI / 3.0,
                theta: PI / 2.0,
            },
            delta: 0.9,
            alpha_list: vec![0.0, 2.0, 4.0, 8.0, 12.0],
            delta_list: (2..=9).map(|k| k as f64 / 10.0).collect(),
            dr: Sweep {
                start: 0.0,
                stop: 10.0,
                step: 0.25,
            },
            w: Sweep {
                start: 0.0,
                stop: 15.0,
                step: 0.1,
            },
            fit: false,
            mode: DistanceMode::Exact,
            x_source: XSourceKind::Model,
            format: OutputFormat::Csv,
            outdir: None,
        }
    }

    /// `x_delta(w)` over the refit grid.
    pub fn xdelta_defaults() -> Self {
        Self::gain_curve_defaults()
    }

    /// Depth limits at 30 m, both angles at 60 degrees.
    pub fn depth_defaults() -> Self {
        Self {
            user: SphericalPosition {
                r: 30.0,
                phi: PI / 3.0,
                theta: PI / 3.0,
            },
            ..Self::gain_curve_defaults()
        }
    }

    /// Apply every `key=value` line of a config text.
    pub fn apply_text(&mut self, text: &str, source: &str) -> Result<(), ConfigError> {
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| ConfigError {
                source: source.to_owned(),
                line: Some(idx + 1),
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected key=value, got '{line}'")))?;
            self.set(key.trim(), value.trim()).map_err(err)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            source: path.display().to_string(),
            line: None,
            message: e.to_string(),
        })?;
        self.apply_text(&text, &path.display().to_string())
    }

    /// Apply one `key=value` override from the command line.
    pub fn apply_override(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let err = |message: String| ConfigError {
            source: "command line".into(),
            line: None,
            message,
        };
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| err(format!("expected key=value, got '{assignment}'")))?;
        self.set(key.trim(), value.trim()).map_err(err)
    }

    /// Set one key. Unknown keys are an error; metadata keys written into
    /// manifests are accepted and ignored.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let key = key.to_ascii_lowercase();
        match key.as_str() {
            "n_m" => self.array.n_m = parse_count(value)?,
            "n_e" => self.array.n_e = parse_count(value)?,
            "d_e" => self.array.d_e = parse_real(value)?,
            "d_m" => self.array.d_m = parse_real(value)?,
            "wavelength" | "lambda" => self.array.wavelength = parse_real(value)?,
            "alpha" => self.array.alpha = parse_real(value)?,
            "beta" => {
                self.array.beta = parse_real(value)?;
                self.beta_explicit = true;
            }
            "power_budget" | "p_b" => self.array.power_budget = parse_real(value)?,
            "r" => self.user.r = parse_real(value)?,
            "phi" => self.user.phi = parse_real(value)?,
            "theta" => self.user.theta = parse_real(value)?,
            "delta" => self.delta = parse_real(value)?,
            "alpha_list" => self.alpha_list = parse_list(value)?,
            "delta_list" => self.delta_list = parse_list(value)?,
            "dr_range" => self.dr = parse_sweep(value)?,
            "w_range" => self.w = parse_sweep(value)?,
            "fit" => self.fit = parse_bool(value)?,
            "distance_mode" => {
                self.mode = match value.to_ascii_lowercase().as_str() {
                    "exact" => DistanceMode::Exact,
                    "fresnel" => DistanceMode::Fresnel,
                    "fresnel_no_bilinear" => DistanceMode::FresnelNoBilinear,
                    other => return Err(format!("unknown distance mode '{other}'")),
                }
            }
            "x_source" => {
                self.x_source = match value.to_ascii_lowercase().as_str() {
                    "numeric" => XSourceKind::Numeric,
                    "model" => XSourceKind::Model,
                    other => return Err(format!("unknown x source '{other}'")),
                }
            }
            "format" => {
                self.format = match value.to_ascii_lowercase().as_str() {
                    "csv" => OutputFormat::Csv,
                    "json" => OutputFormat::Json,
                    other => return Err(format!("unknown output format '{other}'")),
                }
            }
            "outdir" => self.outdir = Some(PathBuf::from(value)),
            k if METADATA_KEYS.contains(&k) => {}
            other => return Err(format!("unknown key '{other}'")),
        }
        if key == "wavelength" || key == "lambda" {
            self.sync_beta();
        }
        Ok(())
    }

    fn sync_beta(&mut self) {
        if !self.beta_explicit {
            self.array.beta = 2.0 * PI / self.array.wavelength;
        }
    }

    /// Check all invariants once parsing is complete.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |message: String| ConfigError {
            source: "configuration".into(),
            line: None,
            message,
        };
        self.array.validate().map_err(|e| err(e.to_string()))?;
        self.user.validate().map_err(|e| err(e.to_string()))?;
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(err(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if self.alpha_list.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(err("alpha_list entries must be non-negative".into()));
        }
        if self.delta_list.iter().any(|d| !(*d > 0.0 && *d < 1.0)) {
            return Err(err("delta_list entries must lie in (0, 1)".into()));
        }
        if self.alpha_list.is_empty() || self.delta_list.is_empty() {
            return Err(err("lists must not be empty".into()));
        }
        if self.w.start < 0.0 {
            return Err(err("w_range must start at or above 0".into()));
        }
        Ok(())
    }

    /// Configuration as `key=value` pairs that [`RunConfig::set`] accepts,
    /// with reals written in shortest round-trip form.
    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let mode = match self.mode {
            DistanceMode::Exact => "exact",
            DistanceMode::Fresnel => "fresnel",
            DistanceMode::FresnelNoBilinear => "fresnel_no_bilinear",
        };
        let x_source = match self.x_source {
            XSourceKind::Numeric => "numeric",
            XSourceKind::Model => "model",
        };
        let format = match self.format {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        };
        let list = |v: &[f64]| v.iter().map(|x| repr(*x)).collect::<Vec<_>>().join(",");
        let a = &self.array;
        let mut pairs = vec![
            ("n_m", a.n_m.to_string()),
            ("n_e", a.n_e.to_string()),
            ("d_e", repr(a.d_e)),
            ("d_m", repr(a.d_m)),
            ("wavelength", repr(a.wavelength)),
            ("alpha", repr(a.alpha)),
            ("power_budget", repr(a.power_budget)),
            ("r", repr(self.user.r)),
            ("phi", repr(self.user.phi)),
            ("theta", repr(self.user.theta)),
            ("delta", repr(self.delta)),
            ("alpha_list", list(&self.alpha_list)),
            ("delta_list", list(&self.delta_list)),
            ("dr_range", self.dr.render()),
            ("w_range", self.w.render()),
            ("fit", self.fit.to_string()),
            ("distance_mode", mode.to_owned()),
            ("x_source", x_source.to_owned()),
            ("format", format.to_owned()),
        ];
        if self.beta_explicit {
            pairs.push(("beta", repr(a.beta)));
        }
        if let Some(dir) = &self.outdir {
            pairs.push(("outdir", dir.display().to_string()));
        }
        pairs.into_iter().map(|(k, v)| (k.to_owned(), v)).collect()
    }
}

/// Shortest string that parses back to the same double.
fn repr(x: f64) -> String {
    format!("{x:?}")
}

pub fn parse_real(s: &str) -> Result<f64, String> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let t = t.to_ascii_lowercase();
    let value = if let Some(pos) = t.find("pi") {
        let (coef, rest) = (&t[..pos], &t[pos + 2..]);
        let coef = coef.strip_suffix('*').unwrap_or(coef);
        let mult = match coef {
            "" | "+" => 1.0,
            "-" => -1.0,
            c => c.parse::<f64>().map_err(|_| format!("invalid number '{s}'"))?,
        };
        let div = match rest {
            "" => 1.0,
            r => r
                .strip_prefix('/')
                .and_then(|d| d.parse::<f64>().ok())
                .ok_or_else(|| format!("invalid number '{s}'"))?,
        };
        mult * PI / div
    } else {
        t.parse::<f64>().map_err(|_| format!("invalid number '{s}'"))?
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(format!("number '{s}' is not finite"))
    }
}

fn parse_count(s: &str) -> Result<usize, String> {
    s.parse::<usize>().map_err(|_| format!("invalid count '{s}'"))
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(format!("invalid boolean '{s}'")),
    }
}

pub fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',').map(|item| parse_real(item.trim())).collect()
}

pub fn parse_sweep(s: &str) -> Result<Sweep, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("expected start:stop:step, got '{s}'"));
    }
    Sweep::new(parse_real(parts[0])?, parse_real(parts[1])?, parse_real(parts[2])?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reals_accept_pi_multiples() {
        assert_eq!(parse_real("0.25").unwrap(), 0.25);
        assert_eq!(parse_real("pi/3").unwrap(), PI / 3.0);
        assert_eq!(parse_real("2*pi").unwrap(), 2.0 * PI);
        assert_eq!(parse_real("-pi/2").unwrap(), -PI / 2.0);
        assert_eq!(parse_real("0.5pi").unwrap(), 0.5 * PI);
        assert!(parse_real("pie").is_err());
        assert!(parse_real("inf").is_err());
    }

    #[test]
    fn sweeps_include_the_stop_value() {
        let s = parse_sweep("0:10:0.25").unwrap();
        let p = s.points();
        assert_eq!(p.len(), 41);
        assert_eq!(p[40], 10.0);
        assert_eq!(Sweep::new(0.0, 15.0, 0.1).unwrap().points().len(), 151);
        assert!(parse_sweep("1:0:0.1").is_err());
        assert!(parse_sweep("0:1:0").is_err());
        assert!(parse_sweep("0:1").is_err());
    }

    #[test]
    fn errors_carry_line_numbers() {
        let mut cfg = RunConfig::gain_curve_defaults();
        let err = cfg
            .apply_text("# comment\nr = 5\n\nbogus = 1\n", "run.cfg")
            .unwrap_err();
        assert_eq!(err.line, Some(4));
        assert_eq!(err.to_string(), "run.cfg:4: unknown key 'bogus'");
        let err = cfg.apply_text("theta\n", "run.cfg").unwrap_err();
        assert_eq!(err.line, Some(1));
        assert_eq!(cfg.user.r, 5.0);
    }

    #[test]
    fn beta_follows_wavelength_unless_set() {
        let mut cfg = RunConfig::gain_curve_defaults();
        cfg.set("wavelength", "0.02").unwrap();
        assert!((cfg.array.beta - PI / 0.01).abs() < 1e-9);
        cfg.set("beta", "100").unwrap();
        cfg.set("wavelength", "0.01").unwrap();
        assert_eq!(cfg.array.beta, 100.0);
    }

    #[test]
    fn pairs_round_trip() {
        let mut cfg = RunConfig::depth_defaults();
        cfg.set("alpha_list", "0, 1.5, pi").unwrap();
        cfg.set("distance_mode", "fresnel").unwrap();
        let text: String = cfg.to_pairs().iter().map(|(k, v)| format!("{k}={v}\n")).collect();
        let mut back = RunConfig::gain_curve_defaults();
        back.apply_text(&format!("tool=x\ngenerated_at=1\n{text}"), "manifest")
            .unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn validation_rejects_bad_values() {
        let mut cfg = RunConfig::gain_curve_defaults();
        cfg.set("delta", "1.5").unwrap();
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::gain_curve_defaults();
        cfg.set("n_e", "0").unwrap();
        assert!(cfg.validate().is_err());
        assert!(cfg.set("n_e", "-3").is_err());
    }
}
