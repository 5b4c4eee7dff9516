//! Beam-depth limits: the mismatch coordinate `x_delta(w)` at which the
//! range kernel falls to a fraction `delta` of its peak, the depth limits
//! it implies, and the piecewise-linear model of `x_delta(w)` with its
//! least-squares refit.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::array_model::{ArrayConfig, DistanceMode, ModelError, SphericalPosition};
use crate::gain::{kernel_k, relative_gain_oracle, relative_gain_single_kernel, w_param, GainError};

/// Start of the root scan; `K^2` is flat below this.
const X_MIN: f64 = 1e-6;
/// Scan step when looking for the first crossing.
const SCAN_STEP: f64 = 0.05;
/// Largest mismatch coordinate searched. Covers `w` up to about 20 at
/// `delta = 0.2`.
pub const X_SEARCH_LIMIT: f64 = 25.0;
/// Fitted model's lower `delta` bound; smaller fractions are solvable but
/// outside the model's domain.
pub const MODEL_DELTA_MIN: f64 = 0.2;
const BISECTION_TOL: f64 = 1e-13;
/// Relative singular-value floor for the least-squares solve.
const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DepthError {
    #[error("delta must lie in (0, 1), got {0}")]
    InvalidDelta(f64),
    #[error("w must be finite and non-negative, got {0}")]
    InvalidW(f64),
    #[error("no crossing of K^2 = {delta} K^2(0) below x = {limit} at w = {w}")]
    NoRootInBracket { delta: f64, w: f64, limit: f64 },
    #[error("beam depth is undefined for sin(theta) = 0")]
    UndefinedBeamDepth,
    #[error("least-squares system is rank deficient (rank {rank} of {cols})")]
    SingularFit { rank: usize, cols: usize },
    #[error("empty sampling grid")]
    EmptyGrid,
    #[error(transparent)]
    Gain(#[from] GainError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn check_delta(delta: f64) -> Result<(), DepthError> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(DepthError::InvalidDelta(delta))
    }
}

/// Smallest `x` with `K^2(x, w) = delta K^2(0, w)`.
///
/// The first sign change is located by a forward scan and refined by
/// bisection. Up to `x = 4.7` the kernel is strictly decreasing, so there the
/// scan only brackets the unique root; beyond it the first crossing is the
/// beam edge.
pub fn solve_x_delta(delta: f64, w: f64) -> Result<f64, DepthError> {
    check_delta(delta)?;
    if !(w.is_finite() && w >= 0.0) {
        return Err(DepthError::InvalidW(w));
    }
    let peak = kernel_k(0.0, w);
    let target = delta * peak * peak;
    let f = |x: f64| {
        let k = kernel_k(x, w);
        k * k - target
    };
    let mut lo = X_MIN;
    let mut hi = lo;
    loop {
        let next = (hi + SCAN_STEP).min(X_SEARCH_LIMIT);
        if f(next) <= 0.0 {
            lo = hi;
            hi = next;
            break;
        }
        if next >= X_SEARCH_LIMIT {
            return Err(DepthError::NoRootInBracket {
                delta,
                w,
                limit: X_SEARCH_LIMIT,
            });
        }
        hi = next;
    }
    while hi - lo > BISECTION_TOL * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Piecewise-linear model of `x_delta(w) - x_delta(0)`:
/// `a0 + a1 w` below the breakpoint, `b0 + b1 w` above it, with every
/// coefficient linear in `delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthFitModel {
    pub a0_c: f64,
    pub a0_d: f64,
    pub a1_c: f64,
    pub a1_d: f64,
    pub b0_c: f64,
    pub b0_d: f64,
    pub b1_c: f64,
    pub b1_d: f64,
    pub w0: f64,
}

/// Fixed breakpoint of the piecewise model.
pub const DEFAULT_BREAKPOINT: f64 = 2.3;

impl DepthFitModel {
    /// Published coefficients.
    pub fn published() -> Self {
        Self {
            a0_c: 0.02,
            a0_d: -0.007,
            a1_c: -0.154,
            a1_d: 0.121,
            b0_c: -1.186,
            b0_d: 0.963,
            b1_c: 0.370,
            b1_d: -0.301,
            w0: DEFAULT_BREAKPOINT,
        }
    }

    fn from_params(p: &[f64], w0: f64) -> Self {
        Self {
            a0_c: p[0],
            a0_d: p[1],
            a1_c: p[2],
            a1_d: p[3],
            b0_c: p[4],
            b0_d: p[5],
            b1_c: p[6],
            b1_d: p[7],
            w0,
        }
    }

    pub fn params(&self) -> [f64; 8] {
        [
            self.a0_c, self.a0_d, self.a1_c, self.a1_d, self.b0_c, self.b0_d, self.b1_c, self.b1_d,
        ]
    }

    pub fn a0(&self, delta: f64) -> f64 {
        self.a0_c + self.a0_d * delta
    }

    pub fn a1(&self, delta: f64) -> f64 {
        self.a1_c + self.a1_d * delta
    }

    pub fn b0(&self, delta: f64) -> f64 {
        self.b0_c + self.b0_d * delta
    }

    pub fn b1(&self, delta: f64) -> f64 {
        self.b1_c + self.b1_d * delta
    }

    /// Model offset from the lossless value.
    pub fn offset(&self, delta: f64, w: f64) -> f64 {
        if w < self.w0 {
            self.a0(delta) + self.a1(delta) * w
        } else {
            self.b0(delta) + self.b1(delta) * w
        }
    }

    /// Jump between the two branches at the breakpoint.
    pub fn continuity_residual(&self, delta: f64) -> f64 {
        let w0 = self.w0;
        self.a0(delta) + self.a1(delta) * w0 - self.b0(delta) - self.b1(delta) * w0
    }

    /// `w` where the upper branch returns to the lossless value.
    pub fn crossing(&self, delta: f64) -> f64 {
        -self.b0(delta) / self.b1(delta)
    }

    fn regressors(&self, delta: f64, w: f64) -> [f64; 8] {
        if w < self.w0 {
            [1.0, delta, w, w * delta, 0.0, 0.0, 0.0, 0.0]
        } else {
            [0.0, 0.0, 0.0, 0.0, 1.0, delta, w, w * delta]
        }
    }
}

/// Modelled `x_delta(w)`, anchored at the numerically solved lossless value.
pub fn model_x_delta(model: &DepthFitModel, delta: f64, w: f64) -> Result<f64, DepthError> {
    Ok(solve_x_delta(delta, 0.0)? + model.offset(delta, w))
}

/// Numerically solved `x_delta(w)` on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XDeltaTable {
    pub w_grid: Vec<f64>,
    pub delta_grid: Vec<f64>,
    /// `values[d][k]` is `x_delta(w)` at `delta_grid[d]`, `w_grid[k]`.
    pub values: Vec<Vec<f64>>,
    /// Lossless reference `x_delta(0)` for each `delta`.
    pub lossless: Vec<f64>,
}

impl XDeltaTable {
    pub fn solve(w_grid: &[f64], delta_grid: &[f64]) -> Result<Self, DepthError> {
        if w_grid.is_empty() || delta_grid.is_empty() {
            return Err(DepthError::EmptyGrid);
        }
        let mut values = Vec::with_capacity(delta_grid.len());
        let mut lossless = Vec::with_capacity(delta_grid.len());
        for &delta in delta_grid {
            lossless.push(solve_x_delta(delta, 0.0)?);
            values.push(
                w_grid
                    .iter()
                    .map(|&w| solve_x_delta(delta, w))
                    .collect::<Result<Vec<_>, _>>()?,
            );
        }
        Ok(Self {
            w_grid: w_grid.to_vec(),
            delta_grid: delta_grid.to_vec(),
            values,
            lossless,
        })
    }

    /// Mean squared model error for each `delta`.
    pub fn mse(&self, model: &DepthFitModel) -> Vec<f64> {
        self.delta_grid
            .iter()
            .enumerate()
            .map(|(d, &delta)| {
                let sum: f64 = self
                    .w_grid
                    .iter()
                    .zip(&self.values[d])
                    .map(|(&w, &x)| {
                        let e = self.lossless[d] + model.offset(delta, w) - x;
                        e * e
                    })
                    .sum();
                sum / self.w_grid.len() as f64
            })
            .collect()
    }

    /// Total squared error over the grid, continuity penalty excluded.
    pub fn sse(&self, model: &DepthFitModel) -> f64 {
        self.mse(model).iter().sum::<f64>() * self.w_grid.len() as f64
    }
}

/// Default refit grid in `w`: 0 to 15 in steps of 0.1.
pub fn default_w_grid() -> Vec<f64> {
    (0..=150).map(|k| k as f64 / 10.0).collect()
}

/// Default refit grid in `delta`: 0.2 to 0.9 in steps of 0.1.
pub fn default_delta_grid() -> Vec<f64> {
    (2..=9).map(|k| k as f64 / 10.0).collect()
}

/// Result of a least-squares refit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthFit {
    pub model: DepthFitModel,
    pub table: XDeltaTable,
    pub mse: Vec<f64>,
    pub sse: f64,
}

/// Refit the eight coefficients on freshly solved `x_delta(w)` samples.
pub fn fit_depth_model(w_grid: &[f64], delta_grid: &[f64]) -> Result<DepthFit, DepthError> {
    let table = XDeltaTable::solve(w_grid, delta_grid)?;
    let model = fit_table(&table, DEFAULT_BREAKPOINT)?;
    let mse = table.mse(&model);
    let sse = table.sse(&model);
    Ok(DepthFit { model, table, mse, sse })
}

/// Least-squares fit of the offsets in `table`, with one continuity row per
/// `delta` tying the two branches together at `w0`.
pub fn fit_table(table: &XDeltaTable, w0: f64) -> Result<DepthFitModel, DepthError> {
    let shape = DepthFitModel::from_params(&[0.0; 8], w0);
    let n_d = table.delta_grid.len();
    let rows = n_d * table.w_grid.len() + n_d;
    let mut a = DMatrix::<f64>::zeros(rows, 8);
    let mut b = DVector::<f64>::zeros(rows);
    let mut row = 0;
    for (d, &delta) in table.delta_grid.iter().enumerate() {
        for (k, &w) in table.w_grid.iter().enumerate() {
            for (c, v) in shape.regressors(delta, w).into_iter().enumerate() {
                a[(row, c)] = v;
            }
            b[row] = table.values[d][k] - table.lossless[d];
            row += 1;
        }
    }
    for &delta in &table.delta_grid {
        let left = [1.0, delta, w0, w0 * delta];
        for c in 0..4 {
            a[(row, c)] = left[c];
            a[(row, c + 4)] = -left[c];
        }
        row += 1;
    }
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let rank = svd.rank(RANK_TOL * smax.max(f64::MIN_POSITIVE));
    if rank < 8 {
        return Err(DepthError::SingularFit { rank, cols: 8 });
    }
    let p = svd
        .solve(&b, RANK_TOL * smax)
        .map_err(|_| DepthError::SingularFit { rank, cols: 8 })?;
    Ok(DepthFitModel::from_params(p.as_slice(), w0))
}

/// Where `x_delta(w)` comes from when computing depth limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum XSource {
    Numeric,
    FittedModel(DepthFitModel),
}

impl XSource {
    pub fn x_delta(&self, delta: f64, w: f64) -> Result<f64, DepthError> {
        match self {
            XSource::Numeric => solve_x_delta(delta, w),
            XSource::FittedModel(m) => model_x_delta(m, delta, w),
        }
    }
}

/// Upper depth limit, which disappears beyond the critical range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum UpperLimit {
    Finite(f64),
    Unbounded,
}

impl UpperLimit {
    pub fn finite(&self) -> Option<f64> {
        match *self {
            UpperLimit::Finite(v) => Some(v),
            UpperLimit::Unbounded => None,
        }
    }
}

/// Range interval `[r - delta_minus, r + delta_plus]` with gain above the
/// target fraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthLimits {
    pub delta_minus: f64,
    pub delta_plus: UpperLimit,
    pub critical_range: f64,
    pub x_delta: f64,
}

/// Depth limits for the array's own `w`.
pub fn depth_limits(
    cfg: &ArrayConfig,
    pos: &SphericalPosition,
    delta: f64,
    source: &XSource,
) -> Result<DepthLimits, DepthError> {
    depth_limits_at(cfg, pos, delta, w_param(cfg), source)
}

/// Depth limits for an explicit `w`, keeping the geometry of `cfg`.
pub fn depth_limits_at(
    cfg: &ArrayConfig,
    pos: &SphericalPosition,
    delta: f64,
    w: f64,
    source: &XSource,
) -> Result<DepthLimits, DepthError> {
    let s = pos.theta.sin();
    if s.abs() < 1e-12 {
        return Err(DepthError::UndefinedBeamDepth);
    }
    let x = source.x_delta(delta, w)?;
    Ok(limits_from_x(cfg, pos, x))
}

/// Depth limits implied by a given mismatch coordinate `x`.
pub fn limits_from_x(cfg: &ArrayConfig, pos: &SphericalPosition, x: f64) -> DepthLimits {
    let s = pos.theta.sin();
    let aperture = cfg.aperture_length();
    let critical_range = aperture * aperture * std::f64::consts::PI * s * s / (cfg.wavelength * x * x);
    let r = pos.r;
    let delta_plus = if r < critical_range {
        UpperLimit::Finite(r * r / (critical_range - r))
    } else {
        UpperLimit::Unbounded
    };
    DepthLimits {
        delta_minus: r * r / (critical_range + r),
        delta_plus,
        critical_range,
        x_delta: x,
    }
}

/// Relative gains at the two depth limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthCheck {
    pub limits: DepthLimits,
    pub kernel_minus: f64,
    pub kernel_plus: Option<f64>,
    pub oracle_minus: f64,
    pub oracle_plus: Option<f64>,
}

/// Evaluate the single-kernel approximation and the brute-force gain with
/// the user at `r` and the beam focused at each depth limit.
pub fn verify_depth_limits(
    cfg: &ArrayConfig,
    pos: &SphericalPosition,
    delta: f64,
    w: f64,
    source: &XSource,
    mode: DistanceMode,
) -> Result<DepthCheck, DepthError> {
    let limits = depth_limits_at(cfg, pos, delta, w, source)?;
    let lossy = cfg.with_w(w)?;
    let at = |dr: f64| -> Result<(f64, f64), DepthError> {
        let approx = relative_gain_single_kernel(&lossy, pos, dr)?.value;
        let focus = pos.with_range(pos.r + dr)?;
        Ok((approx, relative_gain_oracle(&lossy, pos, &focus, mode)))
    };
    let (kernel_minus, oracle_minus) = at(-limits.delta_minus)?;
    let plus = limits.delta_plus.finite().map(at).transpose()?;
    Ok(DepthCheck {
        limits,
        kernel_minus,
        kernel_plus: plus.map(|p| p.0),
        oracle_minus,
        oracle_plus: plus.map(|p| p.1),
    })
}
