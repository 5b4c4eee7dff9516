//! DMA geometry, line-of-sight channel, and the Lorentzian-constrained
//! hybrid beamformer.
//!
//! The array lies in the zy-plane centred at the origin. Microstrip `i`
//! runs along z at `y = i_y d_m`; element `n` of a microstrip sits at
//! `z = n_z d_e` and at distance `rho = n d_e` from the input port.
//! Flattened vectors use the index `i * N_e + n` (0-based).

use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid array configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid position: {0}")]
    InvalidPosition(String),
    #[error("element index (i = {i}, n = {n}) out of range for {n_m} x {n_e} array")]
    IndexOutOfRange { i: usize, n: usize, n_m: usize, n_e: usize },
}

/// Hardware description of a DMA.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ArrayConfig {
    /// Number of microstrips (one RF chain each).
    pub n_m: usize,
    /// Metamaterial elements per microstrip.
    pub n_e: usize,
    /// Element spacing along z, meters.
    pub d_e: f64,
    /// Microstrip spacing along y, meters.
    pub d_m: f64,
    /// Carrier wavelength, meters.
    pub wavelength: f64,
    /// Microstrip attenuation coefficient, 1/m.
    pub alpha: f64,
    /// Microstrip wavenumber, rad/m.
    pub beta: f64,
    /// Transmit power budget, watts.
    pub power_budget: f64,
}

impl ArrayConfig {
    /// Lossless array with `beta = 2 pi / lambda` and unit power budget.
    pub fn new(n_m: usize, n_e: usize, d_e: f64, d_m: f64, wavelength: f64) -> Result<Self, ModelError> {
        let cfg = Self {
            n_m,
            n_e,
            d_e,
            d_m,
            wavelength,
            alpha: 0.0,
            beta: 2.0 * PI / wavelength,
            power_budget: 1.0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// 10 microstrips of 200 half-wavelength-spaced elements at 1 cm.
    pub fn reference() -> Self {
        let wavelength = 0.01;
        Self {
            n_m: 10,
            n_e: 200,
            d_e: wavelength / 2.0,
            d_m: wavelength / 2.0,
            wavelength,
            alpha: 0.0,
            beta: 2.0 * PI / wavelength,
            power_budget: 1.0,
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Result<Self, ModelError> {
        self.alpha = alpha;
        self.validate()?;
        Ok(self)
    }

    pub fn with_beta(mut self, beta: f64) -> Result<Self, ModelError> {
        self.beta = beta;
        self.validate()?;
        Ok(self)
    }

    pub fn with_power_budget(mut self, power_budget: f64) -> Result<Self, ModelError> {
        self.power_budget = power_budget;
        self.validate()?;
        Ok(self)
    }

    /// Attenuation coefficient that yields the given half-aperture exponent
    /// `w = 0.5 N_e d_e alpha`.
    pub fn with_w(self, w: f64) -> Result<Self, ModelError> {
        self.with_alpha(2.0 * w / (self.n_e as f64 * self.d_e))
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let fail = |msg: &str| Err(ModelError::InvalidConfig(msg.to_owned()));
        if self.n_m == 0 {
            return fail("n_m must be at least 1");
        }
        if self.n_e == 0 {
            return fail("n_e must be at least 1");
        }
        if !(self.d_e.is_finite() && self.d_e > 0.0) {
            return fail("d_e must be positive");
        }
        if !(self.d_m.is_finite() && self.d_m > 0.0) {
            return fail("d_m must be positive");
        }
        if !(self.wavelength.is_finite() && self.wavelength > 0.0) {
            return fail("wavelength must be positive");
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return fail("alpha must be non-negative");
        }
        if !self.beta.is_finite() {
            return fail("beta must be finite");
        }
        if !(self.power_budget.is_finite() && self.power_budget > 0.0) {
            return fail("power budget must be positive");
        }
        Ok(())
    }

    /// Total element count `N = N_m N_e`.
    pub fn n_total(&self) -> usize {
        self.n_m * self.n_e
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    /// Largest aperture dimension along the microstrips, `N_e d_e`.
    pub fn aperture_length(&self) -> f64 {
        self.n_e as f64 * self.d_e
    }

    /// Inner edge of the radiating near field, `0.62 sqrt(D^3 / lambda)`
    /// with `D = N_e d_e`.
    pub fn fresnel_distance(&self) -> f64 {
        let d = self.aperture_length();
        0.62 * (d * d * d / self.wavelength).sqrt()
    }
}

/// User or focus location relative to the array centre.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SphericalPosition {
    pub r: f64,
    pub phi: f64,
    pub theta: f64,
}

impl SphericalPosition {
    pub fn new(r: f64, phi: f64, theta: f64) -> Result<Self, ModelError> {
        let p = Self { r, phi, theta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.r.is_finite() && self.r > 0.0) {
            return Err(ModelError::InvalidPosition(format!(
                "range must be positive, got {}",
                self.r
            )));
        }
        if !(self.phi.is_finite() && self.theta.is_finite()) {
            return Err(ModelError::InvalidPosition("angles must be finite".into()));
        }
        Ok(())
    }

    /// Same direction, different range.
    pub fn with_range(self, r: f64) -> Result<Self, ModelError> {
        Self::new(r, self.phi, self.theta)
    }
}

/// How element-to-user distances are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub enum DistanceMode {
    /// Square-root form.
    #[default]
    Exact,
    /// Second-order expansion in `1/r`, including the bilinear term.
    Fresnel,
    /// Second-order expansion without the `n_z i_y` cross term.
    FresnelNoBilinear,
}

/// Centred element coordinates and distance from the microstrip port.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementOffsets {
    pub n_z: f64,
    pub i_y: f64,
    pub rho: f64,
}

pub fn element_offsets(cfg: &ArrayConfig, i: usize, n: usize) -> Result<ElementOffsets, ModelError> {
    if i >= cfg.n_m || n >= cfg.n_e {
        return Err(ModelError::IndexOutOfRange {
            i,
            n,
            n_m: cfg.n_m,
            n_e: cfg.n_e,
        });
    }
    Ok(offsets_unchecked(cfg, i, n))
}

fn offsets_unchecked(cfg: &ArrayConfig, i: usize, n: usize) -> ElementOffsets {
    ElementOffsets {
        n_z: n as f64 - 0.5 * (cfg.n_e as f64 - 1.0),
        i_y: i as f64 - 0.5 * (cfg.n_m as f64 - 1.0),
        rho: n as f64 * cfg.d_e,
    }
}

/// Trigonometric factors of a position, computed once per vector.
struct Geometry {
    r: f64,
    sin_t_cos_p: f64,
    cos_t: f64,
    sin_t_sin_p: f64,
}

impl Geometry {
    fn new(pos: &SphericalPosition) -> Self {
        let (st, ct) = pos.theta.sin_cos();
        let (sp, cp) = pos.phi.sin_cos();
        Self {
            r: pos.r,
            sin_t_cos_p: st * cp,
            cos_t: ct,
            sin_t_sin_p: st * sp,
        }
    }

    fn distance(&self, cfg: &ArrayConfig, off: &ElementOffsets, mode: DistanceMode) -> f64 {
        let z = off.n_z * cfg.d_e;
        let y = off.i_y * cfg.d_m;
        let r = self.r;
        match mode {
            DistanceMode::Exact => {
                let a = r * self.sin_t_cos_p;
                let b = r * self.cos_t - z;
                let c = r * self.sin_t_sin_p - y;
                (a * a + b * b + c * c).sqrt()
            }
            DistanceMode::Fresnel | DistanceMode::FresnelNoBilinear => {
                let mut d = r - z * self.cos_t - y * self.sin_t_sin_p
                    + z * z / (2.0 * r) * (1.0 - self.cos_t * self.cos_t)
                    + y * y / (2.0 * r) * (1.0 - self.sin_t_sin_p * self.sin_t_sin_p);
                if mode == DistanceMode::Fresnel {
                    d -= z * y * self.cos_t * self.sin_t_sin_p / r;
                }
                d
            }
        }
    }
}

/// Distance from element `(i, n)` to `pos`.
pub fn element_distance(
    cfg: &ArrayConfig,
    pos: &SphericalPosition,
    i: usize,
    n: usize,
    mode: DistanceMode,
) -> Result<f64, ModelError> {
    let off = element_offsets(cfg, i, n)?;
    Ok(Geometry::new(pos).distance(cfg, &off, mode))
}

/// Length-`N_m N_e` complex vector in the flattened `i * N_e + n` order.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexVector {
    n_m: usize,
    n_e: usize,
    entries: Vec<Complex64>,
}

impl ComplexVector {
    pub fn from_entries(n_m: usize, n_e: usize, entries: Vec<Complex64>) -> Result<Self, ModelError> {
        if entries.len() != n_m * n_e {
            return Err(ModelError::InvalidConfig(format!(
                "vector of length {} does not match {n_m} x {n_e}",
                entries.len()
            )));
        }
        Ok(Self { n_m, n_e, entries })
    }

    fn from_fn(cfg: &ArrayConfig, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut entries = Vec::with_capacity(cfg.n_total());
        for i in 0..cfg.n_m {
            for n in 0..cfg.n_e {
                entries.push(f(i, n));
            }
        }
        Self {
            n_m: cfg.n_m,
            n_e: cfg.n_e,
            entries,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_m, self.n_e)
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn get(&self, i: usize, n: usize) -> Option<Complex64> {
        (i < self.n_m && n < self.n_e).then(|| self.entries[i * self.n_e + n])
    }

    /// `self^H other`.
    pub fn inner(&self, other: &ComplexVector) -> Complex64 {
        assert_eq!(self.len(), other.len(), "inner product of mismatched vectors");
        self.entries.iter().zip(&other.entries).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.entries.iter().map(|v| v.norm_sqr()).sum()
    }

    pub fn scaled(&self, s: f64) -> ComplexVector {
        ComplexVector {
            n_m: self.n_m,
            n_e: self.n_e,
            entries: self.entries.iter().map(|v| v * s).collect(),
        }
    }
}

/// Focusing vector `[a]_{i,n} = exp(-j 2 pi r_{i,n} / lambda)`.
pub fn focusing_vector(cfg: &ArrayConfig, pos: &SphericalPosition, mode: DistanceMode) -> ComplexVector {
    let geo = Geometry::new(pos);
    let k = cfg.wavenumber();
    ComplexVector::from_fn(cfg, |i, n| {
        let d = geo.distance(cfg, &offsets_unchecked(cfg, i, n), mode);
        Complex64::from_polar(1.0, -k * d)
    })
}

/// Focusing vector with the microstrip decay `e^{-alpha rho}` on each entry.
pub fn decaying_focusing_vector(cfg: &ArrayConfig, pos: &SphericalPosition, mode: DistanceMode) -> ComplexVector {
    let geo = Geometry::new(pos);
    let k = cfg.wavenumber();
    ComplexVector::from_fn(cfg, |i, n| {
        let off = offsets_unchecked(cfg, i, n);
        let d = geo.distance(cfg, &off, mode);
        Complex64::from_polar((-cfg.alpha * off.rho).exp(), -k * d)
    })
}

/// LoS channel with the aperture path loss frozen at the centre range:
/// `h = lambda / (4 pi r) a`.
pub fn los_channel(cfg: &ArrayConfig, pos: &SphericalPosition, mode: DistanceMode) -> ComplexVector {
    focusing_vector(cfg, pos, mode).scaled(cfg.wavelength / (4.0 * PI * pos.r))
}

/// Lorentzian-constrained element response `0.5 (j + e^{j phi})`.
pub fn lorentzian_weight(phi: f64) -> Complex64 {
    0.5 * (Complex64::i() + Complex64::from_polar(1.0, phi))
}

/// The three factors of the DMA transmit chain `x = P_m Q v`.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridBeamformer {
    n_m: usize,
    n_e: usize,
    /// Diagonal of `P_m`: `e^{-(alpha + j beta) rho} / sqrt(N_e)`.
    pub propagation: Vec<Complex64>,
    /// Lorentzian tuning phases `phi_{i,n}`.
    pub tuning_phases: Vec<f64>,
    /// Non-zero entries of the block-diagonal `Q`, one per element; entry
    /// `i * N_e + n` sits in column `i`.
    pub analog: Vec<Complex64>,
    /// Digital beamformer `v`, one entry per RF chain.
    pub digital: Vec<Complex64>,
}

impl HybridBeamformer {
    /// `P_m Q v`.
    pub fn output(&self) -> ComplexVector {
        let entries = self
            .propagation
            .iter()
            .zip(&self.analog)
            .enumerate()
            .map(|(idx, (p, q))| p * q * self.digital[idx / self.n_e])
            .collect();
        ComplexVector {
            n_m: self.n_m,
            n_e: self.n_e,
            entries,
        }
    }

    /// Column `j` of `Q` as a dense length-`N` vector.
    pub fn analog_column(&self, j: usize) -> Vec<Complex64> {
        let mut col = vec![Complex64::new(0.0, 0.0); self.n_m * self.n_e];
        let range = j * self.n_e..(j + 1) * self.n_e;
        col[range.clone()].copy_from_slice(&self.analog[range]);
        col
    }

    pub fn digital_power(&self) -> f64 {
        self.digital.iter().map(|v| v.norm_sqr()).sum()
    }
}

/// Analog beamformer aligned with the phase of the focusing vector, and the
/// all-ones digital beamformer scaled to the power budget.
pub fn build_hybrid_beamformer(cfg: &ArrayConfig, focus: &SphericalPosition, mode: DistanceMode) -> HybridBeamformer {
    let a = focusing_vector(cfg, focus, mode);
    let norm = (cfg.n_e as f64).sqrt().recip();
    let mut propagation = Vec::with_capacity(cfg.n_total());
    let mut tuning_phases = Vec::with_capacity(cfg.n_total());
    let mut analog = Vec::with_capacity(cfg.n_total());
    for i in 0..cfg.n_m {
        for n in 0..cfg.n_e {
            let rho = offsets_unchecked(cfg, i, n).rho;
            propagation.push(Complex64::new(-cfg.alpha * rho, -cfg.beta * rho).exp() * norm);
            // undo the waveguide phase so the radiated phase equals that of a
            let phi = a.entries[i * cfg.n_e + n].arg() + cfg.beta * rho;
            tuning_phases.push(phi);
            analog.push(lorentzian_weight(phi));
        }
    }
    let v = (cfg.power_budget / cfg.n_m as f64).sqrt();
    HybridBeamformer {
        n_m: cfg.n_m,
        n_e: cfg.n_e,
        propagation,
        tuning_phases,
        analog,
        digital: vec![Complex64::new(v, 0.0); cfg.n_m],
    }
}

/// Closed form of the configured transmit vector:
/// `0.5 sqrt(P_b / N) (a . e^{-alpha rho} + j e^{-(alpha + j beta) rho})`.
pub fn hybrid_closed_form(cfg: &ArrayConfig, focus: &SphericalPosition, mode: DistanceMode) -> ComplexVector {
    let a = focusing_vector(cfg, focus, mode);
    let scale = 0.5 * (cfg.power_budget / cfg.n_total() as f64).sqrt();
    ComplexVector::from_fn(cfg, |i, n| {
        let rho = offsets_unchecked(cfg, i, n).rho;
        let decay = (-cfg.alpha * rho).exp();
        let waveguide = Complex64::new(-cfg.alpha * rho, -cfg.beta * rho).exp();
        scale * (a.entries[i * cfg.n_e + n] * decay + Complex64::i() * waveguide)
    })
}
