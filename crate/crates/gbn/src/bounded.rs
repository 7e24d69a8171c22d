use crate::error::{invalid, Result};
use crate::kernel::KernelConfig;
use crate::optimize::{run_descent, Dynamics, OptimizeConfig, OptimizeTrace};
use crate::pairsum::{pair_reduce, pair_scalar_reduce};
use crate::points::{Domain, PointSet};
use crate::uniform::MAX_DIM;
use libm::erf;

/// Per-point decomposition of the bounded-domain move: plain Gaussian pair
/// repulsion, analytic boundary attraction, and the calibrated scale
/// applied to the latter.
#[derive(Debug, Clone)]
pub struct BoundedGradient {
    pub point_term: Vec<f64>,
    pub domain_term: Vec<f64>,
    pub balance: f64,
}

/// Attraction of a point toward the interior of the unit box, one
/// component per axis:
///
///   prod_{m != r} [erf((1-x_m)/2s) + erf(x_m/2s)]
///     * [e^{-(x_r/2s)^2} - e^{-((1-x_r)/2s)^2}]
///
/// This is the gradient of the box-complement interaction energy up to a
/// positive constant; the constant is absorbed by the balance calibration
/// in the optimizer. `sigma` is the filtering width (the per-point
/// Gaussian), not the pair energy variance.
pub fn domain_gradient(x: &[f64], sigma: f64) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(invalid("empty point"));
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(invalid("sigma must be positive and finite"));
    }
    if x.iter().any(|&c| !(0.0..=1.0).contains(&c)) {
        return Err(invalid("point outside the unit box"));
    }
    let inv = 1.0 / (2.0 * sigma);
    let dim = x.len();
    let mut w = vec![0.0; dim];
    let mut bracket = vec![0.0; dim];
    for (r, &c) in x.iter().enumerate() {
        let near = c * inv;
        let far = (1.0 - c) * inv;
        w[r] = erf(far) + erf(near);
        bracket[r] = (-near * near).exp() - (-far * far).exp();
    }
    let mut g = vec![0.0; dim];
    for r in 0..dim {
        let mut prod = bracket[r];
        for (m, &wm) in w.iter().enumerate() {
            if m != r {
                prod *= wm;
            }
        }
        g[r] = prod;
    }
    Ok(g)
}

/// Product of the per-axis erf weights: the box-interior interaction mass
/// whose gradient (up to constants) is `domain_gradient`. Used for the
/// checkpoint energy.
fn erf_mass(x: &[f64], sigma: f64) -> f64 {
    let inv = 1.0 / (2.0 * sigma);
    x.iter()
        .map(|&c| erf((1.0 - c) * inv) + erf(c * inv))
        .product()
}

/// Domain-term scale: the box complement acts as a continuum of density n
/// (matching the interior point density) repelling each point through the
/// same pair kernel. Integrating that kernel over the complement yields
/// the erf products of `domain_gradient` times this closed-form factor,
/// so the boundary looks neutral and points settle an O(sigma) offset
/// inside instead of condensing on the faces. Anything weaker leaves the
/// interior crowd pressure unopposed and the faces collect points.
fn calibrate_balance(cfg: &KernelConfig) -> f64 {
    let axis = cfg.sigma_abs * std::f64::consts::PI.sqrt();
    cfg.n as f64 * cfg.energy_var * axis.powi(cfg.dim as i32 - 1)
}

struct BoundedDynamics {
    n: usize,
    dim: usize,
    s2: f64,
    sigma: f64,
    cutoff2: f64,
    /// balance times the caller's domain multiplier
    weight: f64,
    /// weight * sigma * sqrt(pi) / s2: scales the erf mass so the domain
    /// direction is exactly -s2 times the gradient of its energy term, and
    /// the same mass enters the Jacobi normalizer like a pair energy does
    domain_mass_coeff: f64,
    energy_scale: f64,
}

impl BoundedDynamics {
    fn new(cfg: &KernelConfig, domain_scale: f64) -> Self {
        let weight = domain_scale * calibrate_balance(cfg);
        Self {
            n: cfg.n,
            dim: cfg.dim,
            s2: cfg.energy_var,
            sigma: cfg.sigma_abs,
            cutoff2: cfg.cutoff_dist2(),
            weight,
            domain_mass_coeff: weight * cfg.sigma_abs * std::f64::consts::PI.sqrt()
                / cfg.energy_var,
            energy_scale: std::f64::consts::PI * cfg.energy_var / cfg.n as f64,
        }
    }

    #[inline]
    fn pair(&self, coords: &[f64], i: usize, j: usize, g: Option<&mut [f64]>) -> f64 {
        let dim = self.dim;
        let mut d = [0.0f64; MAX_DIM];
        let mut d2 = 0.0;
        for r in 0..dim {
            let v = coords[i * dim + r] - coords[j * dim + r];
            d[r] = v;
            d2 += v * v;
        }
        if d2 > self.cutoff2 {
            return 0.0;
        }
        let e = (-d2 / (2.0 * self.s2)).exp();
        if let Some(g) = g {
            for r in 0..dim {
                g[r] = d[r] * e;
            }
        }
        e
    }
}

impl Dynamics for BoundedDynamics {
    fn directions(&mut self, coords: &[f64], dirs: &mut Vec<f64>, norms: &mut Vec<f64>) {
        let (mut d, mut m) = pair_reduce(self.n, self.dim, |i, j, g| {
            self.pair(coords, i, j, Some(g))
        });
        for i in 0..self.n {
            let x = &coords[i * self.dim..(i + 1) * self.dim];
            let g = domain_gradient(x, self.sigma).expect("points stay clamped to the box");
            for r in 0..self.dim {
                d[i * self.dim + r] += self.weight * g[r];
            }
            m[i] += self.domain_mass_coeff * erf_mass(x, self.sigma);
        }
        *dirs = d;
        *norms = m;
    }

    fn energy(&mut self, coords: &[f64]) -> f64 {
        let pair = pair_scalar_reduce(self.n, |i, j| self.pair(coords, i, j, None));
        let mass: f64 = (0..self.n)
            .map(|i| erf_mass(&coords[i * self.dim..(i + 1) * self.dim], self.sigma))
            .sum();
        self.energy_scale * (pair - self.domain_mass_coeff * mass)
    }

    fn constrain(&self, x: f64) -> f64 {
        x.clamp(0.0, 1.0)
    }
}

fn check_bounded(points: &PointSet, cfg: &KernelConfig) -> Result<()> {
    if points.domain() != Domain::Box {
        return Err(invalid("bounded point set required"));
    }
    if points.dim() != cfg.dim || points.n() != cfg.n {
        return Err(invalid("kernel config does not match the point set"));
    }
    Ok(())
}

/// Pair repulsion, domain attraction, and their calibrated balance for one
/// point of a bounded set.
pub fn bounded_terms(points: &PointSet, cfg: &KernelConfig, index: usize) -> Result<BoundedGradient> {
    check_bounded(points, cfg)?;
    if index >= points.n() {
        return Err(invalid("point index out of range"));
    }
    let dynamics = BoundedDynamics::new(cfg, 1.0);
    let coords = points.coords();
    let mut point_term = vec![0.0; cfg.dim];
    let mut g = vec![0.0; cfg.dim];
    for j in 0..points.n() {
        if j != index {
            let e = dynamics.pair(coords, index, j, Some(&mut g));
            if e != 0.0 {
                for r in 0..cfg.dim {
                    point_term[r] += g[r];
                }
            }
        }
    }
    let domain_term = domain_gradient(points.point(index), cfg.sigma_abs)?;
    Ok(BoundedGradient {
        point_term,
        domain_term,
        balance: dynamics.weight,
    })
}

/// Blue-noise descent on the closed unit box with the default domain
/// weight.
pub fn optimize_bounded(
    points: &PointSet,
    cfg: &KernelConfig,
    opt: &OptimizeConfig,
) -> Result<(PointSet, OptimizeTrace)> {
    optimize_bounded_weighted(points, cfg, opt, 1.0)
}

/// Same as `optimize_bounded` with an extra multiplier on the calibrated
/// domain attraction.
pub fn optimize_bounded_weighted(
    points: &PointSet,
    cfg: &KernelConfig,
    opt: &OptimizeConfig,
    domain_scale: f64,
) -> Result<(PointSet, OptimizeTrace)> {
    check_bounded(points, cfg)?;
    if !(domain_scale > 0.0) || !domain_scale.is_finite() {
        return Err(invalid("domain_scale must be positive and finite"));
    }
    let mut dynamics = BoundedDynamics::new(cfg, domain_scale);
    run_descent(points, &mut dynamics, opt)
}
