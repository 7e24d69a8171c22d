//! Step-spectrum point sets: the pair energy is rebuilt from its harmonic
//! series and truncated at a chosen frequency, so descending it suppresses
//! exactly the band below the cut. Works in any dimension, including 1D
//! sets on the circle.

use std::f64::consts::PI;

use crate::error::{invalid, Result};
use crate::kernel::KernelConfig;
use crate::optimize::{run_descent, Dynamics, OptimizeConfig};
use crate::pairsum::{pair_reduce, pair_scalar_reduce};
use crate::points::{toroidal_wrap, Domain, PointSet};

/// Relaxation multiplier for 1D runs: full-size steps drive a 1D set
/// straight into the regular-grid minimum.
const LAMBDA_1D: f64 = 0.25;

/// Harmonic weights e^(-2 pi^2 s2 f^2) for f = 1..=fmax_cut, stopping
/// early once a weight falls below machine epsilon (numerically void).
fn harmonic_weights(s2: f64, fmax_cut: usize) -> Vec<f64> {
    let mut w = Vec::new();
    for f in 1..=fmax_cut {
        let ff = f as f64;
        let v = (-2.0 * PI * PI * s2 * ff * ff).exp();
        if v < f64::EPSILON {
            break;
        }
        w.push(v);
    }
    w
}

/// One axis of the harmonic pair kernel: the series truncated at
/// `cut_len` harmonics, its derivative, and the full-precision series
/// (all weights supplied). Evaluated with a rotation recurrence, one
/// sin_cos per call.
struct AxisSeries {
    /// 1 + 2 sum_{f<=cut} w_f cos(2 pi x f)
    t_cut: f64,
    /// d(t_cut)/dx = -4 pi sum_{f<=cut} f w_f sin(2 pi x f)
    dt_cut: f64,
    /// same series over every supplied weight
    t_full: f64,
}

fn axis_series(x: f64, weights: &[f64], cut_len: usize) -> AxisSeries {
    let (s1, c1) = (2.0 * PI * x).sin_cos();
    let mut cf = c1;
    let mut sf = s1;
    let mut t_cut = 0.0;
    let mut d_cut = 0.0;
    let mut t_full = 0.0;
    for (idx, &w) in weights.iter().enumerate() {
        let f = idx + 1;
        t_full += w * cf;
        if f <= cut_len {
            t_cut += w * cf;
            d_cut += f as f64 * w * sf;
        }
        let c_next = cf * c1 - sf * s1;
        sf = sf * c1 + cf * s1;
        cf = c_next;
    }
    AxisSeries {
        t_cut: 1.0 + 2.0 * t_cut,
        dt_cut: -4.0 * PI * d_cut,
        t_full: 1.0 + 2.0 * t_full,
    }
}

/// Band-limited pair energy term and its gradient: per axis the series
/// 1 + 2 sum_{f=1}^{fmax_cut} e^(-2 pi^2 s2 f^2) cos(2 pi x f), multiplied
/// across axes, with the gradient by the product rule. Harmonics whose
/// weight is below machine epsilon are dropped even under the cut.
///
/// Scaled by sqrt(2 pi s2) per axis this converges, as fmax_cut grows, to
/// the replica-sum Gaussian kernel of variance s2.
pub fn truncated_pair_terms(xij: &[f64], s2: f64, fmax_cut: usize) -> Result<(f64, Vec<f64>)> {
    if xij.is_empty() {
        return Err(invalid("truncated_pair_terms: empty delta"));
    }
    if !(s2 > 0.0) || !s2.is_finite() {
        return Err(invalid("truncated_pair_terms: variance must be positive"));
    }
    if fmax_cut == 0 {
        return Err(invalid("truncated_pair_terms: cut frequency must be at least 1"));
    }
    let weights = harmonic_weights(s2, fmax_cut);
    let dim = xij.len();
    let mut t = vec![0.0; dim];
    let mut dt = vec![0.0; dim];
    for r in 0..dim {
        let s = axis_series(xij[r], &weights, weights.len());
        t[r] = s.t_cut;
        dt[r] = s.dt_cut;
    }
    let mut energy = 1.0;
    for r in 0..dim {
        energy *= t[r];
    }
    let mut grad = vec![0.0; dim];
    let mut pre = 1.0;
    for r in 0..dim {
        grad[r] = dt[r] * pre;
        pre *= t[r];
    }
    let mut suf = 1.0;
    for r in (0..dim).rev() {
        grad[r] *= suf;
        suf *= t[r];
    }
    Ok((energy, grad))
}

struct StepDynamics {
    n: usize,
    dim: usize,
    s2: f64,
    /// harmonic weights out to the machine-epsilon horizon
    weights: Vec<f64>,
    /// how many of them the truncated energy keeps
    cut_len: usize,
}

impl StepDynamics {
    fn new(n: usize, dim: usize, s2: f64, fmax_cut: usize) -> Self {
        let weights = harmonic_weights(s2, usize::MAX);
        let cut_len = fmax_cut.min(weights.len());
        Self {
            n,
            dim,
            s2,
            weights,
            cut_len,
        }
    }

    /// Truncated-series products and derivative for one pair. Writes the
    /// descent direction (minus s2 times the energy derivative, matching
    /// the Gaussian optimizers' step scale) and returns the untruncated
    /// series product as the Jacobi mass term, which stays positive where
    /// the truncated product oscillates.
    fn pair(&self, coords: &[f64], i: usize, j: usize, g: Option<&mut [f64]>) -> f64 {
        let dim = self.dim;
        let mut t = [0.0f64; crate::uniform::MAX_DIM];
        let mut dt = [0.0f64; crate::uniform::MAX_DIM];
        let mut mass = 1.0;
        for r in 0..dim {
            let x = toroidal_wrap(coords[i * dim + r] - coords[j * dim + r]);
            let s = axis_series(x, &self.weights, self.cut_len);
            t[r] = s.t_cut;
            dt[r] = s.dt_cut;
            mass *= s.t_full;
        }
        if let Some(g) = g {
            let mut pre = 1.0;
            for r in 0..dim {
                g[r] = -self.s2 * dt[r] * pre;
                pre *= t[r];
            }
            let mut suf = 1.0;
            for r in (0..dim).rev() {
                g[r] *= suf;
                suf *= t[r];
            }
        } else {
            // scalar path reports the truncated energy term instead
            let mut e = 1.0;
            for r in 0..dim {
                e *= t[r];
            }
            return e;
        }
        mass
    }
}

impl Dynamics for StepDynamics {
    fn directions(&mut self, coords: &[f64], dirs: &mut Vec<f64>, norms: &mut Vec<f64>) {
        let (d, m) = pair_reduce(self.n, self.dim, |i, j, g| self.pair(coords, i, j, Some(g)));
        *dirs = d;
        *norms = m;
    }

    fn energy(&mut self, coords: &[f64]) -> f64 {
        let sum = pair_scalar_reduce(self.n, |i, j| self.pair(coords, i, j, None));
        PI * self.s2 / self.n as f64 * sum
    }

    fn constrain(&self, x: f64) -> f64 {
        toroidal_wrap(x)
    }
}

/// Descend the band-limited pair energy, suppressing spectral power below
/// `fmax_cut`. The kernel width follows the standard sizing at relative
/// width 1 for the point count, so the cut is the only tuning knob. 1D
/// runs take quarter-size relaxation steps; see `LAMBDA_1D`.
pub fn optimize_step(
    points: &PointSet,
    fmax_cut: usize,
    ocfg: &OptimizeConfig,
) -> Result<PointSet> {
    if points.domain() != Domain::Torus {
        return Err(invalid("periodic point set required"));
    }
    if fmax_cut == 0 {
        return Err(invalid("cut frequency must be at least 1"));
    }
    let n = points.n();
    let dim = points.dim();
    if n < 2 {
        return Ok(points.clone());
    }
    let kcfg = KernelConfig::new(1.0, n, dim)?;
    let mut dynamics = StepDynamics::new(n, dim, kcfg.energy_var, fmax_cut);
    let mut cfg = ocfg.clone();
    if dim == 1 {
        cfg.lambda *= LAMBDA_1D;
    }
    let (out, _) = run_descent(points, &mut dynamics, &cfg)?;
    Ok(out)
}
