use crate::error::{invalid, Result};
use crate::kernel::KernelConfig;
use crate::optimize::{run_descent, Dynamics, OptimizeConfig, OptimizeTrace};
use crate::pairsum::{pair_reduce, pair_scalar_reduce};
use crate::points::{min_image, toroidal_wrap, Domain, PointSet};

/// Stack scratch bound; configs above this dimensionality are rejected at
/// construction.
pub(crate) const MAX_DIM: usize = 8;

/// Largest exponent coefficient 1/(2*energy_var) for which the factored
/// evaluation path is used. Beyond it the per-point exp tables would
/// overflow; the windowed direct path takes over (and is fast there anyway
/// because the interaction radius is small).
const FACTORED_C_MAX: f64 = 160.0;

/// Periodic pair field of one kernel width: evaluates per-pair energies and
/// gradient contributions over replica images, with two interchangeable
/// strategies.
///
/// Direct: per-axis image windows of radius `rc` around the wrapped
/// difference, one exp per image. Used for narrow kernels, where the
/// window holds a single image and the pair skip radius removes most
/// pairs entirely.
///
/// Factored: one exp for the base Gaussian exp(-c d^2), then per-point
/// tables B = exp(2 c x), C = exp(-2 c x) supply every image term as a
/// handful of multiplies, exp(-c (d - m)^2) = exp(-c d^2) (B_i C_j)^m
/// exp(-c m^2). Used for wide kernels, where every pair interacts and
/// several images contribute.
pub(crate) struct PairField {
    n: usize,
    dim: usize,
    c: f64,
    p: i64,
    rc: f64,
    cutoff2: f64,
    factored: bool,
    h: Vec<f64>,
    tb: Vec<f64>,
    tc: Vec<f64>,
}

impl PairField {
    pub(crate) fn new(cfg: &KernelConfig) -> Self {
        let c = 1.0 / (2.0 * cfg.energy_var);
        let cutoff2 = cfg.cutoff_dist2();
        let p = cfg.periods as i64;
        let factored = c <= FACTORED_C_MAX;
        let h = if factored {
            (0..=p).map(|m| (-c * (m * m) as f64).exp()).collect()
        } else {
            Vec::new()
        };
        Self {
            n: cfg.n,
            dim: cfg.dim,
            c,
            p,
            rc: cutoff2.sqrt(),
            cutoff2,
            factored,
            h,
            tb: Vec::new(),
            tc: Vec::new(),
        }
    }

    #[cfg(test)]
    fn force_direct(mut self) -> Self {
        self.factored = false;
        self
    }

    pub(crate) fn build_tables(&mut self, coords: &[f64]) {
        if !self.factored {
            return;
        }
        let len = coords.len();
        self.tb.clear();
        self.tc.clear();
        self.tb.reserve(len);
        self.tc.reserve(len);
        for &x in coords {
            let e = (2.0 * self.c * x).exp();
            self.tb.push(e);
            self.tc.push(e.recip());
        }
    }

    /// Sum of exp(-c (w - k)^2) and of (w - k) exp(-c (w - k)^2) over the
    /// image window, w in [0, 1).
    #[inline]
    fn axis_direct(&self, w: f64) -> (f64, f64) {
        let klo = ((w - self.rc).ceil() as i64).max(1 - self.p);
        let khi = ((w + self.rc).floor() as i64).min(self.p);
        let mut v = 0.0;
        let mut s = 0.0;
        let mut k = klo;
        while k <= khi {
            let x = w - k as f64;
            let t = (-self.c * x * x).exp();
            v += t;
            s += x * t;
            k += 1;
        }
        (v, s)
    }

    /// Same sums via the table route; `d` is the raw coordinate difference
    /// in (-1, 1). The image range is picked so the covered displacements
    /// match the wrapped-difference convention exactly.
    #[inline]
    fn axis_factored(&self, i: usize, j: usize, r: usize, d: f64) -> (f64, f64) {
        let ii = i * self.dim + r;
        let jj = j * self.dim + r;
        let base = (-self.c * d * d).exp();
        let gup = self.tb[ii] * self.tc[jj];
        let gdn = self.tc[ii] * self.tb[jj];
        let (mlo, mhi) = if d >= 0.0 {
            (1 - self.p, self.p)
        } else {
            (-self.p, self.p - 1)
        };
        let mut v = base;
        let mut s = d * base;
        let mut gp = gup;
        let mut m = 1;
        while m <= mhi {
            let t = base * gp * self.h[m as usize];
            v += t;
            s += (d - m as f64) * t;
            gp *= gup;
            m += 1;
        }
        gp = gdn;
        m = -1;
        while m >= mlo {
            let t = base * gp * self.h[(-m) as usize];
            v += t;
            s += (d - m as f64) * t;
            gp *= gdn;
            m -= 1;
        }
        (v, s)
    }

    /// Pair energy, plus the move contribution written to `g` when
    /// requested. Returns 0.0 for pairs beyond the skip radius.
    #[inline]
    fn pair_terms(&self, coords: &[f64], i: usize, j: usize, g: Option<&mut [f64]>) -> f64 {
        let dim = self.dim;
        let xi = &coords[i * dim..i * dim + dim];
        let xj = &coords[j * dim..j * dim + dim];
        let mut u = [0.0f64; MAX_DIM];
        let mut d2 = 0.0;
        for r in 0..dim {
            let d = min_image(xi[r] - xj[r]);
            u[r] = d;
            d2 += d * d;
        }
        if d2 > self.cutoff2 {
            return 0.0;
        }
        let mut vs = [0.0f64; MAX_DIM];
        let mut ss = [0.0f64; MAX_DIM];
        if self.factored {
            for r in 0..dim {
                let (v, s) = self.axis_factored(i, j, r, xi[r] - xj[r]);
                vs[r] = v;
                ss[r] = s;
            }
        } else {
            for r in 0..dim {
                let (v, s) = self.axis_direct(toroidal_wrap(u[r]));
                vs[r] = v;
                ss[r] = s;
            }
        }
        let mut e = 1.0;
        for r in 0..dim {
            e *= vs[r];
        }
        if let Some(g) = g {
            let mut pre = 1.0;
            for r in 0..dim {
                g[r] = ss[r] * pre;
                pre *= vs[r];
            }
            let mut suf = 1.0;
            for r in (0..dim).rev() {
                g[r] *= suf;
                suf *= vs[r];
            }
        }
        e
    }

    /// Move directions (sum of pair gradient terms) and normalizers (sum of
    /// pair energies) for every point.
    pub(crate) fn directions_into(
        &mut self,
        coords: &[f64],
        dirs: &mut Vec<f64>,
        norms: &mut Vec<f64>,
    ) {
        self.build_tables(coords);
        let (d, m) = pair_reduce(self.n, self.dim, |i, j, g| {
            self.pair_terms(coords, i, j, Some(g))
        });
        *dirs = d;
        *norms = m;
    }

    /// Sum of pair energies over unordered pairs.
    pub(crate) fn energy_sum(&mut self, coords: &[f64]) -> f64 {
        self.build_tables(coords);
        pair_scalar_reduce(self.n, |i, j| self.pair_terms(coords, i, j, None))
    }
}

fn check_compatible(points: &PointSet, cfg: &KernelConfig) -> Result<()> {
    if points.domain() != Domain::Torus {
        return Err(invalid("periodic point set required"));
    }
    if points.dim() != cfg.dim {
        return Err(invalid(format!(
            "kernel config is {}-dimensional but points are {}-dimensional",
            cfg.dim,
            points.dim()
        )));
    }
    if points.n() != cfg.n {
        return Err(invalid(format!(
            "kernel config sized for {} points but got {}",
            cfg.n,
            points.n()
        )));
    }
    Ok(())
}

/// Variance of the unit-mass Gaussian sum over the periodic unit cube,
/// up to a constant offset: pi * energy_var / (2 n) times the sum of pair
/// energies over ordered pairs.
pub fn bn_energy(points: &PointSet, cfg: &KernelConfig) -> Result<f64> {
    check_compatible(points, cfg)?;
    let mut field = PairField::new(cfg);
    Ok(std::f64::consts::PI * cfg.energy_var / cfg.n as f64 * field.energy_sum(points.coords()))
}

/// Exact gradient of `bn_energy` with respect to every coordinate,
/// row-major n x dim.
pub fn bn_gradient(points: &PointSet, cfg: &KernelConfig) -> Result<Vec<f64>> {
    check_compatible(points, cfg)?;
    let mut field = PairField::new(cfg);
    let mut dirs = Vec::new();
    let mut norms = Vec::new();
    field.directions_into(points.coords(), &mut dirs, &mut norms);
    let scale = -std::f64::consts::PI / cfg.n as f64;
    for d in &mut dirs {
        *d *= scale;
    }
    Ok(dirs)
}

struct UniformDynamics {
    field: PairField,
    energy_scale: f64,
}

impl Dynamics for UniformDynamics {
    fn directions(&mut self, coords: &[f64], dirs: &mut Vec<f64>, norms: &mut Vec<f64>) {
        self.field.directions_into(coords, dirs, norms);
    }

    fn energy(&mut self, coords: &[f64]) -> f64 {
        self.energy_scale * self.field.energy_sum(coords)
    }

    fn constrain(&self, x: f64) -> f64 {
        toroidal_wrap(x)
    }
}

/// Normalized Jacobi descent of the periodic blue-noise energy. Each point
/// moves along the sum of its pair gradient terms divided by the sum of its
/// pair energies; checkpoints enforce a non-increasing energy.
pub fn optimize_uniform(
    points: &PointSet,
    cfg: &KernelConfig,
    opt: &OptimizeConfig,
) -> Result<(PointSet, OptimizeTrace)> {
    check_compatible(points, cfg)?;
    let mut dynamics = UniformDynamics {
        field: PairField::new(cfg),
        energy_scale: std::f64::consts::PI * cfg.energy_var / cfg.n as f64,
    };
    run_descent(points, &mut dynamics, opt)
}
