//! Beamforming gain under range mismatch: the peak gain and effective
//! element fraction, the brute-force relative gain, and the analytic
//! kernels `K(x, w)` and `D(x)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::array_model::{
    build_hybrid_beamformer, decaying_focusing_vector, focusing_vector, ArrayConfig, DistanceMode, ModelError,
    SphericalPosition,
};
use crate::specfun::{self, faddeeva_upper, FresnelConvention};

/// Below this argument the kernels return their analytic limits.
pub const SMALL_ARGUMENT: f64 = 1e-6;

/// `t_y` bound under which dropping the `D^2` factor costs under 1%.
pub const SINGLE_KERNEL_TY_BOUND: f64 = 0.46;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GainError {
    #[error("mismatch {delta_r} m puts the focus behind the array (r = {r} m)")]
    InvalidMismatch { r: f64, delta_r: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Half-aperture attenuation exponent and the matching effective-element
/// fraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossParams {
    pub w: f64,
    pub eta: f64,
}

impl LossParams {
    pub fn of(cfg: &ArrayConfig) -> Self {
        Self {
            w: w_param(cfg),
            eta: eta(cfg),
        }
    }
}

/// `w = 0.5 N_e d_e alpha`.
pub fn w_param(cfg: &ArrayConfig) -> f64 {
    0.5 * cfg.n_e as f64 * cfg.d_e * cfg.alpha
}

/// Fraction of effective elements
/// `(1/N_e) (e^{-alpha d_e N_e} - 1) / (e^{-alpha d_e} - 1)`, equal to 1 when
/// lossless.
pub fn eta(cfg: &ArrayConfig) -> f64 {
    let step = cfg.alpha * cfg.d_e;
    if step == 0.0 {
        return 1.0;
    }
    let n = cfg.n_e as f64;
    (-step * n).exp_m1() / (-step).exp_m1() / n
}

/// Peak beamforming gain `0.25 P_b eta^2 N_m N_e`.
pub fn g_opt(cfg: &ArrayConfig) -> f64 {
    let e = eta(cfg);
    0.25 * cfg.power_budget * e * e * cfg.n_total() as f64
}

/// `|a^H(user) a_DMA(focus)|^2 / (eta N)^2` by direct summation.
pub fn relative_gain_oracle(
    cfg: &ArrayConfig,
    user: &SphericalPosition,
    focus: &SphericalPosition,
    mode: DistanceMode,
) -> f64 {
    let a = focusing_vector(cfg, user, mode);
    let b = decaying_focusing_vector(cfg, focus, mode);
    let peak = eta(cfg) * cfg.n_total() as f64;
    a.inner(&b).norm_sqr() / (peak * peak)
}

/// `|a^H(user) P_m Q v|^2` with the complete hybrid beamformer, including the
/// waveguide term that the relative gain ignores.
pub fn full_beamformer_gain(
    cfg: &ArrayConfig,
    user: &SphericalPosition,
    focus: &SphericalPosition,
    mode: DistanceMode,
) -> f64 {
    let a = focusing_vector(cfg, user, mode);
    let x = build_hybrid_beamformer(cfg, focus, mode).output();
    a.inner(&x).norm_sqr()
}

/// Range-mismatch kernel
/// `K(x, w) = e^{-w} |int_{-1/2}^{1/2} e^{j x^2 u^2 + 2 w u} du|`.
///
/// Evaluated through the Faddeeva function with both arguments kept in the
/// upper half plane, so neither the growth of `erfi` nor the cancellation
/// between its two terms costs accuracy.
pub fn kernel_k(x: f64, w: f64) -> f64 {
    let x = x.abs();
    if x < SMALL_ARGUMENT {
        return if w == 0.0 {
            1.0
        } else {
            -(-2.0 * w).exp_m1() / (2.0 * w)
        };
    }
    let rot = Complex64::from_polar(1.0, PI / 4.0);
    // z_{+-} = +-e^{j pi/4} x/2 + e^{-j pi/4} w/x
    let a = rot * (0.5 * x);
    let b = rot.conj() * (w / x);
    let z_plus = a + b;
    let z_minus = -a + b;
    let damp = (-2.0 * w).exp();
    let tail = damp * faddeeva_upper(-z_minus);
    let scale = PI.sqrt() / (2.0 * x);
    if x * x < 2.0 * w {
        scale * (faddeeva_upper(-z_plus) - tail).norm()
    } else {
        // reflect w(-z_+) = 2 e^{-z_+^2} - w(z_+), with z_+^2 = w + j psi
        let psi = 0.25 * x * x - w * w / (x * x);
        let phase = Complex64::from_polar(1.0, psi);
        scale * (phase * (faddeeva_upper(z_plus) + tail) - 2.0 * (-w).exp()).norm()
    }
}

/// Array-axis kernel `D(x) = |C(x) + j S(x)| / x` with `D(0) = 1`.
pub fn kernel_d(x: f64) -> f64 {
    kernel_d_with(x, FresnelConvention::HalfPi)
}

/// [`kernel_d`] with an explicit Fresnel convention.
pub fn kernel_d_with(x: f64, convention: FresnelConvention) -> f64 {
    let x = x.abs();
    if x < SMALL_ARGUMENT {
        return 1.0;
    }
    let (c, s) = specfun::fresnel(x, convention).expect("finite argument");
    c.hypot(s) / x
}

fn check_mismatch(pos: &SphericalPosition, delta_r: f64) -> Result<(), GainError> {
    if delta_r.is_finite() && pos.r + delta_r > 0.0 {
        Ok(())
    } else {
        Err(GainError::InvalidMismatch { r: pos.r, delta_r })
    }
}

fn mismatch_factor(pos: &SphericalPosition, delta_r: f64) -> f64 {
    delta_r.abs() / (pos.r * pos.r + pos.r * delta_r)
}

/// Normalised mismatch along the microstrips,
/// `d_e N_e sqrt(pi sin^2(theta) / lambda * |dr| / (r^2 + r dr))`.
pub fn t_z(cfg: &ArrayConfig, pos: &SphericalPosition, delta_r: f64) -> Result<f64, GainError> {
    check_mismatch(pos, delta_r)?;
    let s = pos.theta.sin();
    Ok(cfg.aperture_length() * (PI * s * s / cfg.wavelength * mismatch_factor(pos, delta_r)).sqrt())
}

/// Normalised mismatch across the microstrips,
/// `d_m N_m sqrt((1 - sin^2(theta) sin^2(phi)) / lambda * |dr| / (r^2 + r dr))`.
pub fn t_y(cfg: &ArrayConfig, pos: &SphericalPosition, delta_r: f64) -> Result<f64, GainError> {
    check_mismatch(pos, delta_r)?;
    let s = pos.theta.sin() * pos.phi.sin();
    let span = cfg.d_m * cfg.n_m as f64;
    let cross = (1.0 - s * s).max(0.0);
    Ok(span * (cross / cfg.wavelength * mismatch_factor(pos, delta_r)).sqrt())
}

/// Two-kernel approximation `eta^{-2} K^2(t_z, w) D^2(t_y)`.
pub fn relative_gain_two_kernel(cfg: &ArrayConfig, pos: &SphericalPosition, delta_r: f64) -> Result<f64, GainError> {
    let k = kernel_k(t_z(cfg, pos, delta_r)?, w_param(cfg));
    let d = kernel_d(t_y(cfg, pos, delta_r)?);
    let e = eta(cfg);
    Ok(k * k * d * d / (e * e))
}

/// Value of the single-kernel approximation and whether its `t_y` condition
/// holds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingleKernelGain {
    pub value: f64,
    pub t_y: f64,
    pub valid: bool,
}

/// Single-kernel approximation `eta^{-2} K^2(t_z, w)`, valid when the
/// aperture across microstrips is small.
pub fn relative_gain_single_kernel(
    cfg: &ArrayConfig,
    pos: &SphericalPosition,
    delta_r: f64,
) -> Result<SingleKernelGain, GainError> {
    let k = kernel_k(t_z(cfg, pos, delta_r)?, w_param(cfg));
    let ty = t_y(cfg, pos, delta_r)?;
    let e = eta(cfg);
    Ok(SingleKernelGain {
        value: k * k / (e * e),
        t_y: ty,
        valid: ty <= SINGLE_KERNEL_TY_BOUND,
    })
}

/// How a gain curve was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GainSource {
    Oracle,
    TwoKernel,
    SingleKernel,
}

/// Relative gain sampled over signed range mismatch, focus at `r + dr`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainCurve {
    pub source: GainSource,
    pub cfg: ArrayConfig,
    pub position: SphericalPosition,
    pub mode: DistanceMode,
    pub delta_r: Vec<f64>,
    pub values: Vec<f64>,
}

impl GainCurve {
    pub fn compute(
        cfg: &ArrayConfig,
        pos: &SphericalPosition,
        delta_r: &[f64],
        source: GainSource,
        mode: DistanceMode,
    ) -> Result<Self, GainError> {
        let values = delta_r
            .iter()
            .map(|&dr| match source {
                GainSource::Oracle => {
                    check_mismatch(pos, dr)?;
                    let focus = pos.with_range(pos.r + dr)?;
                    Ok(relative_gain_oracle(cfg, pos, &focus, mode))
                }
                GainSource::TwoKernel => relative_gain_two_kernel(cfg, pos, dr),
                GainSource::SingleKernel => relative_gain_single_kernel(cfg, pos, dr).map(|g| g.value),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            source,
            cfg: *cfg,
            position: *pos,
            mode,
            delta_r: delta_r.to_vec(),
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Largest absolute pointwise difference to another curve on the same
    /// samples.
    pub fn max_deviation(&self, other: &GainCurve) -> f64 {
        assert_eq!(self.delta_r, other.delta_r, "curves sampled on different grids");
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::quadrature::{quadrature_oracle, Integrand, Tolerance};

    fn fig1(w: f64) -> (ArrayConfig, SphericalPosition) {
        (
            ArrayConfig::reference().with_w(w).unwrap(),
            SphericalPosition::new(7.0, PI / 3.0, PI / 2.0).unwrap(),
        )
    }

    fn k_by_quadrature(x: f64, w: f64) -> f64 {
        let chirp = Integrand::LossyChirp { c: x * x, w };
        let q = quadrature_oracle(&chirp, -0.5, 0.5, Tolerance::new(1e-15, 1e-13)).unwrap();
        (-w).exp() * q.value.norm()
    }

    #[test]
    fn loss_parameters() {
        let cfg = ArrayConfig::reference();
        assert_eq!(w_param(&cfg), 0.0);
        assert_eq!(eta(&cfg), 1.0);
        assert!((w_param(&cfg.with_alpha(2.0).unwrap()) - 1.0).abs() < 1e-12);
        assert!((w_param(&cfg.with_alpha(12.0).unwrap()) - 6.0).abs() < 1e-12);
        let e = eta(&cfg.with_w(2.0).unwrap());
        assert!((e - 0.2479).abs() < 1e-4, "{e}");
        assert!((e * e - 0.06).abs() < 0.005);
        let tiny = eta(&cfg.with_alpha(1e-12).unwrap());
        assert!((tiny - 1.0).abs() < 1e-9);
    }

    #[test]
    fn peak_gain() {
        let cfg = ArrayConfig::reference();
        assert_eq!(g_opt(&cfg), 500.0);
        let lossy = cfg.with_w(2.0).unwrap();
        assert!((g_opt(&lossy) - 30.0).abs() < 0.8);
        let doubled = lossy.with_power_budget(2.0).unwrap();
        assert!((g_opt(&doubled) / g_opt(&lossy) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn oracle_peaks_at_alignment() {
        for w in [0.0, 1.0, 2.0, 6.0] {
            let (cfg, pos) = fig1(w);
            let g = relative_gain_oracle(&cfg, &pos, &pos, DistanceMode::Exact);
            assert!((g - 1.0).abs() < 1e-12, "w = {w}: {g}");
        }
    }

    #[test]
    fn oracle_ignores_beta() {
        let (cfg, pos) = fig1(2.0);
        let focus = pos.with_range(9.0).unwrap();
        let a = relative_gain_oracle(&cfg, &pos, &focus, DistanceMode::Exact);
        let b = relative_gain_oracle(
            &cfg.with_beta(5.0 * PI / cfg.wavelength).unwrap(),
            &pos,
            &focus,
            DistanceMode::Exact,
        );
        assert_eq!(a, b);
    }

    #[test]
    fn full_gain_near_peak_and_linear_in_power() {
        let (cfg, pos) = fig1(0.0);
        let g = full_beamformer_gain(&cfg, &pos, &pos, DistanceMode::Exact);
        assert!(g >= 0.95 * g_opt(&cfg), "{g}");
        let doubled = cfg.with_power_budget(2.0).unwrap();
        let g2 = full_beamformer_gain(&doubled, &pos, &pos, DistanceMode::Exact);
        assert!((g2 / g - 2.0).abs() < 1e-12);
    }

    #[test]
    fn kernel_k_limits() {
        assert_eq!(kernel_k(0.0, 0.0), 1.0);
        let limit = (1.0 - (-4.0f64).exp()) / 4.0;
        assert!((kernel_k(0.0, 2.0) - limit).abs() < 1e-15);
        assert!((limit - 0.2454).abs() < 1e-4);
        assert!((kernel_k(1e-4, 2.0) - k_by_quadrature(1e-4, 2.0)).abs() < 1e-12);
        // the formula branch joins the limit branch smoothly
        assert!((kernel_k(2e-6, 2.0) - limit).abs() < 1e-10);
        assert!((kernel_k(2e-6, 0.0) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn kernel_k_matches_quadrature() {
        for &w in &[0.0, 0.5, 1.0, 2.0, 4.0, 6.0, 10.0, 15.0] {
            for &x in &[1e-3, 0.3, 1.0, 1.9, 2.0, 3.5, 4.7, 8.0, 12.0] {
                let exact = k_by_quadrature(x, w);
                let k = kernel_k(x, w);
                assert!(
                    (k - exact).abs() <= 1e-11 * exact.max(1e-3),
                    "K({x}, {w}) = {k} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn kernel_k_strictly_decreasing_on_monotone_region() {
        for w in [0.0, 1.0, 2.0, 4.0, 6.0] {
            let mut prev = kernel_k(0.0, w);
            for step in 1..=94 {
                let k = kernel_k(step as f64 * 0.05, w);
                assert!(k < prev, "w = {w}, x = {}", step as f64 * 0.05);
                prev = k;
            }
        }
    }

    #[test]
    fn kernel_d_values() {
        assert_eq!(kernel_d(0.0), 1.0);
        assert!((kernel_d(1e-7) - 1.0).abs() < 1e-12);
        let d = kernel_d(0.46);
        assert!((d * d - 0.99).abs() < 0.005, "{}", d * d);
        // D(x) is the magnitude of int_{-1/2}^{1/2} e^{j 2 pi x^2 v^2} dv
        for x in [0.3, 0.46, 1.0] {
            let q = quadrature_oracle(
                &Integrand::LossyChirp {
                    c: 2.0 * PI * x * x,
                    w: 0.0,
                },
                -0.5,
                0.5,
                Tolerance::default(),
            )
            .unwrap();
            assert!((kernel_d(x) - q.value.norm()).abs() < 1e-13);
        }
        let mut prev = 1.0;
        for i in 1..=100 {
            let d = kernel_d(i as f64 * 0.01);
            assert!(d < prev);
            prev = d;
        }
    }

    #[test]
    fn unit_convention_misses_the_one_percent_point() {
        let d = kernel_d_with(0.46, FresnelConvention::Unit);
        assert!(d * d > 0.995);
    }

    #[test]
    fn mismatch_coordinates() {
        let (cfg, pos) = fig1(0.0);
        assert_eq!(t_z(&cfg, &pos, 0.0).unwrap(), 0.0);
        assert_eq!(t_y(&cfg, &pos, 0.0).unwrap(), 0.0);
        let tz = t_z(&cfg, &pos, 2.0).unwrap();
        assert!((tz - (200.0 * PI / 63.0).sqrt()).abs() < 1e-12);
        assert!((tz - 3.156).abs() < 5e-3);
        let side = SphericalPosition::new(7.0, PI / 2.0, PI / 2.0).unwrap();
        assert_eq!(t_y(&cfg, &side, 3.0).unwrap(), 0.0);
        assert!(t_z(&cfg, &pos, -7.0).is_err());
        assert!(t_y(&cfg, &pos, -8.0).is_err());
    }

    #[test]
    fn kernel_values_at_zero_mismatch() {
        let (cfg, pos) = fig1(0.0);
        assert_eq!(relative_gain_two_kernel(&cfg, &pos, 0.0).unwrap(), 1.0);
        let (cfg, pos) = fig1(2.0);
        let l1 = relative_gain_two_kernel(&cfg, &pos, 0.0).unwrap();
        let l2 = relative_gain_single_kernel(&cfg, &pos, 0.0).unwrap();
        assert_eq!(l1, l2.value);
        assert!(l2.valid);
    }

    #[test]
    fn kernels_track_oracle_at_two_meters() {
        for w in [0.0, 2.0] {
            let (cfg, pos) = fig1(w);
            let focus = pos.with_range(9.0).unwrap();
            let oracle = relative_gain_oracle(&cfg, &pos, &focus, DistanceMode::Exact);
            let l1 = relative_gain_two_kernel(&cfg, &pos, 2.0).unwrap();
            let l2 = relative_gain_single_kernel(&cfg, &pos, 2.0).unwrap();
            assert!((oracle - l1).abs() <= 0.02, "w = {w}: {oracle} vs {l1}");
            assert!((oracle - l2.value).abs() <= 0.02);
        }
    }

    #[test]
    fn single_kernel_validity_across_fig1_sweep() {
        let (cfg, pos) = fig1(0.0);
        for i in 0..=40 {
            assert!(relative_gain_single_kernel(&cfg, &pos, i as f64 * 0.25).unwrap().valid);
        }
    }

    #[test]
    fn curve_bookkeeping() {
        let (cfg, pos) = fig1(1.0);
        let dr = [0.0, 1.0, 2.0];
        let a = GainCurve::compute(&cfg, &pos, &dr, GainSource::Oracle, DistanceMode::Exact).unwrap();
        let b = GainCurve::compute(&cfg, &pos, &dr, GainSource::SingleKernel, DistanceMode::Exact).unwrap();
        assert_eq!(a.len(), 3);
        assert!(a.max_deviation(&b) < 0.02);
        assert!(GainCurve::compute(&cfg, &pos, &[-10.0], GainSource::TwoKernel, DistanceMode::Exact).is_err());
    }
}
