use std::f64::consts::PI;

use crate::error::{invalid, Result};

/// Width bookkeeping for the Gaussian pair-energy kernel.
///
/// `sigma_rel` is the filtering width in units of the nominal grid spacing
/// n^(-1/dim); `sigma_abs` is the same width in absolute torus units. The
/// pair energy between two points is a Gaussian of *variance*
/// `energy_var = 2 * sigma_abs^2` (the product of two sigma_abs Gaussians
/// integrates to one of twice the variance), and `periods` is how many
/// replica images per axis are needed to evaluate it to full double
/// precision (support_sigmas = 9 covers ~1e-18 tails).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelConfig {
    pub sigma_rel: f64,
    pub sigma_abs: f64,
    pub energy_var: f64,
    pub support_sigmas: f64,
    pub periods: usize,
    /// Optional reduced support (in kernel sigma units) for the truncation
    /// ablation. Default None = full support. Values below support_sigmas
    /// deliberately degrade quality; see the truncation tests.
    pub truncate_sigmas: Option<f64>,
    pub n: usize,
    pub dim: usize,
}

impl KernelConfig {
    pub fn new(sigma_rel: f64, n: usize, dim: usize) -> Result<Self> {
        if !(sigma_rel > 0.0) || !sigma_rel.is_finite() {
            return Err(invalid("sigma_rel must be positive and finite"));
        }
        if n == 0 {
            return Err(invalid("n must be >= 1"));
        }
        if dim == 0 {
            return Err(invalid("dim must be >= 1"));
        }
        if dim > crate::uniform::MAX_DIM {
            return Err(invalid(format!(
                "dim must be <= {}",
                crate::uniform::MAX_DIM
            )));
        }
        let mut cfg = Self {
            sigma_rel,
            sigma_abs: 0.0,
            energy_var: 0.0,
            support_sigmas: 9.0,
            periods: 1,
            truncate_sigmas: None,
            n,
            dim,
        };
        cfg.recompute();
        Ok(cfg)
    }

    /// Override the support radius (in sigma units) used for the replica
    /// count. The default 9 gives full double-precision support.
    pub fn with_support_sigmas(mut self, support_sigmas: f64) -> Result<Self> {
        if !(support_sigmas > 0.0) || !support_sigmas.is_finite() {
            return Err(invalid("support_sigmas must be positive and finite"));
        }
        self.support_sigmas = support_sigmas;
        self.recompute();
        Ok(self)
    }

    /// Enable the reduced-support ablation: pair interactions beyond
    /// `t * sqrt(energy_var)` are dropped by the optimizers.
    pub fn with_truncation(mut self, truncate_sigmas: Option<f64>) -> Result<Self> {
        if let Some(t) = truncate_sigmas {
            if !(t > 0.0) || !t.is_finite() {
                return Err(invalid("truncate_sigmas must be positive and finite"));
            }
        }
        self.truncate_sigmas = truncate_sigmas;
        Ok(self)
    }

    fn recompute(&mut self) {
        self.sigma_abs = self.sigma_rel * (self.n as f64).powf(-1.0 / self.dim as f64);
        self.energy_var = 2.0 * self.sigma_abs * self.sigma_abs;
        self.periods = ((self.support_sigmas * self.sigma_abs).ceil() as usize).max(1);
    }

    /// Squared pair distance beyond which interactions are numerically zero
    /// (or deliberately dropped when the truncation ablation is active).
    pub(crate) fn cutoff_dist2(&self) -> f64 {
        let s = match self.truncate_sigmas {
            Some(t) => t.min(self.support_sigmas),
            None => self.support_sigmas,
        };
        s * s * self.energy_var
    }
}

/// Per-axis kernel evaluation: the replica-sum value and its "slope"
/// accumulator sum_k (x-k) exp(-(x-k)^2 / (2 s2)).
///
/// The slope relates to the derivative by d(value)/dx = -slope / s2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisKernelEval {
    pub value: f64,
    pub slope: f64,
}

/// Direct replica-sum evaluation over images k in [1-periods, periods].
pub fn axis_replica_eval(x: f64, s2: f64, periods: usize) -> AxisKernelEval {
    debug_assert!(s2 > 0.0 && periods >= 1);
    let inv2 = 1.0 / (2.0 * s2);
    let mut value = 0.0;
    let mut slope = 0.0;
    let lo = 1 - periods as i64;
    for k in lo..=periods as i64 {
        let d = x - k as f64;
        let e = (-d * d * inv2).exp();
        value += e;
        slope += d * e;
    }
    AxisKernelEval { value, slope }
}

/// Harmonic-series (theta-function) form of the same axis kernel:
/// value = sqrt(2 pi s2) * (1 + 2 sum_f e^(-2 pi^2 s2 f^2) cos(2 pi x f)).
///
/// The slope is scaled to match the replica form, i.e.
/// slope = -s2 * d(value)/dx (the replica slope carries an (x-k) factor,
/// not (x-k)/s2).
pub fn axis_theta_eval(x: f64, s2: f64, fmax: usize) -> AxisKernelEval {
    debug_assert!(s2 > 0.0 && fmax >= 1);
    let amp = (2.0 * PI * s2).sqrt();
    let mut series = 1.0;
    let mut dseries = 0.0;
    for f in 1..=fmax {
        let ff = f as f64;
        let w = (-2.0 * PI * PI * s2 * ff * ff).exp();
        let (sin, cos) = (2.0 * PI * x * ff).sin_cos();
        series += 2.0 * w * cos;
        dseries += ff * w * sin;
    }
    AxisKernelEval {
        value: amp * series,
        slope: 4.0 * PI * s2 * amp * dseries,
    }
}

/// Toroidal Gaussian pair energy: the product over axes of replica values.
///
/// This is the unscaled energy term; optimizers attach the pi*s2/(2N)
/// constants.
pub fn pair_energy(pi: &[f64], pj: &[f64], cfg: &KernelConfig) -> Result<f64> {
    if pi.len() != pj.len() || pi.is_empty() {
        return Err(invalid("pair_energy: dimension mismatch"));
    }
    let mut prod = 1.0;
    for (a, b) in pi.iter().zip(pj) {
        let x = crate::points::toroidal_wrap(a - b);
        prod *= axis_replica_eval(x, cfg.energy_var, cfg.periods).value;
    }
    Ok(prod)
}

/// Gradient companion of `pair_energy`: component r is
/// slope_r * prod_{m != r} value_m.
///
/// Convention: d/dx_i pair_energy = -(1/s2) * pair_gradient, with
/// s2 = cfg.energy_var. Optimizers use pair_gradient directly as the
/// descent contribution of the pair (the -pi/N energy prefactor and the
/// -1/s2 factor are absorbed by the normalized step).
pub fn pair_gradient(pi: &[f64], pj: &[f64], cfg: &KernelConfig) -> Result<Vec<f64>> {
    if pi.len() != pj.len() || pi.is_empty() {
        return Err(invalid("pair_gradient: dimension mismatch"));
    }
    let evals: Vec<AxisKernelEval> = pi
        .iter()
        .zip(pj)
        .map(|(a, b)| axis_replica_eval(crate::points::toroidal_wrap(a - b), cfg.energy_var, cfg.periods))
        .collect();
    let mut grad = vec![0.0; pi.len()];
    for r in 0..pi.len() {
        let mut g = evals[r].slope;
        for (m, e) in evals.iter().enumerate() {
            if m != r {
                g *= e.value;
            }
        }
        grad[r] = g;
    }
    Ok(grad)
}

/// Squared magnitude of the Gaussian kernel transform in normalized
/// frequency units: exp(-sigma_rel^2 * |omega|^2).
pub fn freq_weight(omega_norm_sq: f64, sigma_rel: f64) -> f64 {
    debug_assert!(omega_norm_sq >= 0.0);
    (-sigma_rel * sigma_rel * omega_norm_sq).exp()
}

/// Idealized blue-noise reference power profile eps * exp(|omega|^2)
/// (in normalized units; see ReferenceSpectrum).
pub fn reference_profile(eps: f64, omega_norm_sq: f64) -> f64 {
    debug_assert!(eps > 0.0);
    eps * omega_norm_sq.exp()
}

/// Reference blue-noise spectrum: flat noise floor eps with an
/// exponential-in-|omega|^2 rise toward the white level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceSpectrum {
    pub eps: f64,
}

impl ReferenceSpectrum {
    pub fn new(eps: f64) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(invalid("eps must be positive"));
        }
        Ok(Self { eps })
    }

    pub fn profile(&self, omega_norm_sq: f64) -> f64 {
        reference_profile(self.eps, omega_norm_sq)
    }
}

/// Smallest harmonic count that evaluates the theta series to absolute
/// accuracy ~tail at variance s2 (weights below `tail` are void).
pub fn theta_fmax(s2: f64, tail: f64) -> usize {
    debug_assert!(s2 > 0.0 && tail > 0.0 && tail < 1.0);
    let f = ((-tail.ln()) / (2.0 * PI * PI * s2)).sqrt().ceil() as usize;
    f.max(1)
}
