use crate::density::DensityMap;
use crate::error::{invalid, Result};
use crate::init::weighted_random_init;
use crate::kernel::KernelConfig;
use crate::optimize::{run_descent, Dynamics, OptimizeConfig, OptimizeTrace};
use crate::pairsum::{pair_reduce, pair_scalar_reduce};
use crate::points::{min_image, toroidal_wrap, Domain, PointSet};
use crate::uniform::MAX_DIM;
use rayon::prelude::*;

/// Per-point kernel shaping factors. Narrow kernels (large a) sit in dense
/// regions, wide kernels in sparse ones. The fitting pass normalizes the
/// factors so their squares average to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeFactors {
    a: Vec<f64>,
}

impl ShapeFactors {
    pub fn from_values(a: Vec<f64>) -> Result<Self> {
        if a.is_empty() {
            return Err(invalid("shape factors must not be empty"));
        }
        if a.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(invalid("shape factors must be positive and finite"));
        }
        Ok(Self { a })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        Self::from_values(vec![1.0; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.a
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }
}

/// Effective shaping factor of a kernel pair: the harmonic mean
/// 2 ab / (a + b), dominated by the wider kernel.
pub fn mutual_shape(ak: f64, al: f64) -> f64 {
    debug_assert!(ak > 0.0 && al > 0.0);
    2.0 * ak * al / (ak + al)
}

/// Guard against isolated points whose density estimate underflows: a
/// normalized shape below this is meaningless but must stay positive.
const SHAPE_FLOOR: f64 = 1e-6;

fn shape_pass(coords: &[f64], dim: usize, torus: bool, sigma: f64, a: &mut Vec<f64>) {
    let n = a.len();
    let inv = 1.0 / (2.0 * sigma * sigma);
    // same support convention as the pair kernels: drop terms whose
    // exponent is beyond (9 sigma)^2 / (2 sigma^2)
    let support2 = 81.0 * sigma * sigma;
    let cur = a.clone();
    a.par_iter_mut().enumerate().for_each(|(k, ak)| {
        let xk = &coords[k * dim..k * dim + dim];
        let mut d = 0.0;
        for l in 0..n {
            if l == k {
                continue;
            }
            let xl = &coords[l * dim..l * dim + dim];
            let mut d2 = 0.0;
            for r in 0..dim {
                let u = if torus {
                    min_image(xk[r] - xl[r])
                } else {
                    xk[r] - xl[r]
                };
                d2 += u * u;
            }
            if cur[l] * d2 > support2 {
                continue;
            }
            d += cur[l] * (-cur[l] * d2 * inv).exp();
        }
        *ak = d;
    });
    let ms = a.iter().map(|v| v * v).sum::<f64>() / n as f64;
    let s = ms.sqrt();
    for v in a.iter_mut() {
        *v = if s > 0.0 { (*v / s).max(SHAPE_FLOOR) } else { 1.0 };
    }
}

/// Fit kernel shaping factors to the local point density: each factor is
/// pulled toward the shaped-kernel density estimate at its point, then the
/// set is normalized to unit mean square. One iteration per optimization
/// step suffices during optimization; reconstruction refits with 10.
pub fn shape_factors(points: &PointSet, sigma: f64, iterations: usize) -> Result<ShapeFactors> {
    if points.n() < 2 {
        return Err(invalid("shape fitting needs at least two points"));
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(invalid("sigma must be positive and finite"));
    }
    let torus = points.domain() == Domain::Torus;
    let mut a = vec![1.0; points.n()];
    for _ in 0..iterations {
        shape_pass(points.coords(), points.dim(), torus, sigma, &mut a);
    }
    ShapeFactors::from_values(a)
}

/// Point set, shaping factors, target density, and kernel width bundled
/// for the adaptive operations.
#[derive(Debug, Clone)]
pub struct AdaptiveState {
    pub points: PointSet,
    pub shapes: ShapeFactors,
    pub density: DensityMap,
    pub kcfg: KernelConfig,
}

impl AdaptiveState {
    pub fn new(
        points: PointSet,
        shapes: ShapeFactors,
        density: DensityMap,
        kcfg: KernelConfig,
    ) -> Result<Self> {
        if shapes.len() != points.n() {
            return Err(invalid("one shape factor per point required"));
        }
        if kcfg.n != points.n() || kcfg.dim != points.dim() {
            return Err(invalid("kernel config does not match the point set"));
        }
        Ok(Self { points, shapes, density, kcfg })
    }
}

/// Shaped pair terms: replica image sums per axis, with the pair's own
/// width. `w` must hold the wrapped (torus) or raw (box) per-axis
/// differences. Returns the image-summed kernel value and fills `grad`
/// (when given) with the per-axis displacement-weighted sums, i.e. the
/// direction a unit repulsion moves point i.
struct ShapedPair {
    c: f64,
    rc: f64,
    p: i64,
    torus: bool,
}

impl ShapedPair {
    #[inline]
    fn new(c0: f64, base_rc: f64, a_kl: f64, torus: bool) -> Self {
        let rc = base_rc / a_kl.sqrt();
        Self {
            c: c0 * a_kl,
            rc,
            p: (rc.ceil() as i64).max(1),
            torus,
        }
    }

    #[inline]
    fn axis(&self, w: f64) -> (f64, f64) {
        if !self.torus {
            let t = (-self.c * w * w).exp();
            return (t, w * t);
        }
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

    #[inline]
    fn eval(&self, u: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let dim = u.len();
        let mut vs = [0.0f64; MAX_DIM];
        let mut ss = [0.0f64; MAX_DIM];
        for r in 0..dim {
            let w = if self.torus { toroidal_wrap(u[r]) } else { u[r] };
            let (v, s) = self.axis(w);
            vs[r] = v;
            ss[r] = s;
        }
        let mut e = 1.0;
        for r in 0..dim {
            e *= vs[r];
        }
        if let Some(g) = grad {
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
}

/// Negative-kernel pixel grid derived from a density map: per-pixel
/// shaping factors follow the same density fixed point the point shapes
/// converge to, and the interaction amplitudes follow the density so the
/// lattice-summed pixel field equals the target pointwise, with total
/// pixel kernel mass equal to total point kernel mass (zero-mean field).
struct PixelField {
    /// (cx, cy, a_p, B_p) for every pixel with positive density: shaping
    /// factor and energy amplitude
    cells: Vec<(f64, f64, f64, f64)>,
}

impl PixelField {
    fn new(density: &DensityMap, n: usize) -> Self {
        let total = density.mass();
        let pix = (density.width() * density.height()) as f64;
        // density normalized to unit mean over the grid
        let norm = pix / total;
        let mut r1 = 0.0;
        let mut r3 = 0.0;
        for &v in density.values() {
            let r = v * norm;
            r1 += r;
            r3 += r * r * r;
        }
        let s = (r1 / r3).sqrt();
        let mut cells = Vec::new();
        for iy in 0..density.height() {
            for ix in 0..density.width() {
                let v = density.value_at(ix, iy);
                if v > 0.0 {
                    let (cx, cy) = density.pixel_center(ix, iy);
                    let rel = v * norm;
                    cells.push((cx, cy, rel * s, rel * n as f64 / pix));
                }
            }
        }
        Self { cells }
    }
}

fn pair_params(cfg: &KernelConfig) -> (f64, f64) {
    let c0 = 1.0 / (2.0 * cfg.energy_var);
    (c0, cfg.cutoff_dist2().sqrt())
}

/// Shaped-pair direction and mass sums for one point against the pixel
/// grid. Adds the attraction into `dir` (length dim) and returns the mass
/// contribution.
fn pixel_terms(
    x: &[f64],
    ak: f64,
    px: &PixelField,
    c0: f64,
    base_rc: f64,
    torus: bool,
    mut dir: Option<&mut [f64]>,
) -> (f64, f64) {
    let base_cut2 = base_rc * base_rc;
    let mut mass = 0.0;
    let mut energy = 0.0;
    let mut g = [0.0f64; 2];
    for &(cx, cy, ap, bp) in &px.cells {
        let mut u = [x[0] - cx, x[1] - cy];
        if torus {
            u[0] = min_image(u[0]);
            u[1] = min_image(u[1]);
        }
        let d2 = u[0] * u[0] + u[1] * u[1];
        let a = mutual_shape(ak, ap);
        if d2 * a > base_cut2 {
            continue;
        }
        let sp = ShapedPair::new(c0, base_rc, a, torus);
        let e = sp.eval(&u, dir.is_some().then_some(&mut g[..]));
        energy += bp * a * e;
        mass += bp * a * a * e;
        if let Some(dir) = dir.as_deref_mut() {
            dir[0] -= bp * a * a * g[0];
            dir[1] -= bp * a * a * g[1];
        }
    }
    (mass, energy)
}

/// Shaped point-pair interaction energy: (pi sigma^2 / n) times the sum
/// over ordered pairs of a_kl exp(-a_kl |x_k - x_l|^2 / (2 s2)), replica
/// images included on the torus. Reduces exactly to `bn_energy` when all
/// shapes are 1.
pub fn adaptive_energy(state: &AdaptiveState) -> f64 {
    let cfg = &state.kcfg;
    let (c0, base_rc) = pair_params(cfg);
    let torus = state.points.domain() == Domain::Torus;
    let coords = state.points.coords();
    let a = state.shapes.values();
    let dim = cfg.dim;
    let base_cut2 = base_rc * base_rc;
    let sum = pair_scalar_reduce(cfg.n, |i, j| {
        let akl = mutual_shape(a[i], a[j]);
        let mut u = [0.0f64; MAX_DIM];
        let mut d2 = 0.0;
        for r in 0..dim {
            let v = coords[i * dim + r] - coords[j * dim + r];
            u[r] = if torus { min_image(v) } else { v };
            d2 += u[r] * u[r];
        }
        if d2 * akl > base_cut2 {
            return 0.0;
        }
        let sp = ShapedPair::new(c0, base_rc, akl, torus);
        akl * sp.eval(&u[..dim], None)
    });
    let sigma2 = cfg.sigma_abs * cfg.sigma_abs;
    2.0 * std::f64::consts::PI * sigma2 / cfg.n as f64 * sum
}

/// Gradient of `adaptive_energy` with the shapes held fixed, row-major
/// n x dim: component k is -(pi/n) sum_l a_kl^2 exp(-a_kl |d|^2/(2 s2)) d.
pub fn adaptive_gradient(state: &AdaptiveState) -> Vec<f64> {
    let cfg = &state.kcfg;
    let (c0, base_rc) = pair_params(cfg);
    let torus = state.points.domain() == Domain::Torus;
    let coords = state.points.coords();
    let a = state.shapes.values();
    let dim = cfg.dim;
    let base_cut2 = base_rc * base_rc;
    let (mut dirs, _) = pair_reduce(cfg.n, dim, |i, j, g| {
        let akl = mutual_shape(a[i], a[j]);
        let mut u = [0.0f64; MAX_DIM];
        let mut d2 = 0.0;
        for r in 0..dim {
            let v = coords[i * dim + r] - coords[j * dim + r];
            u[r] = if torus { min_image(v) } else { v };
            d2 += u[r] * u[r];
        }
        if d2 * akl > base_cut2 {
            return 0.0;
        }
        let sp = ShapedPair::new(c0, base_rc, akl, torus);
        let e = sp.eval(&u[..dim], Some(g));
        let w = akl * akl;
        for v in g.iter_mut() {
            *v *= w;
        }
        w * e
    });
    let scale = -std::f64::consts::PI / cfg.n as f64;
    for v in dirs.iter_mut() {
        *v *= scale;
    }
    dirs
}

/// Attraction of one point toward the density pixels: minus the gradient
/// of the point-pixel cross energy, so the vector points toward dense
/// regions. Requires a 2D state.
pub fn pixel_attraction(state: &AdaptiveState, index: usize) -> Result<Vec<f64>> {
    let cfg = &state.kcfg;
    if cfg.dim != 2 {
        return Err(invalid("pixel terms are defined for 2D states"));
    }
    if index >= state.points.n() {
        return Err(invalid("point index out of range"));
    }
    let (c0, base_rc) = pair_params(cfg);
    let torus = state.points.domain() == Domain::Torus;
    let px = PixelField::new(&state.density, cfg.n);
    let mut dir = vec![0.0; 2];
    pixel_terms(
        state.points.point(index),
        state.shapes.values()[index],
        &px,
        c0,
        base_rc,
        torus,
        Some(&mut dir),
    );
    let scale = std::f64::consts::PI / cfg.n as f64;
    Ok(vec![dir[0] * scale, dir[1] * scale])
}

/// Point-pixel cross energy of the zero-mean field (the part that depends
/// on point positions): -(2 pi sigma^2 / n) sum_k sum_p B_p a_kp e_kp.
fn cross_energy(
    coords: &[f64],
    shapes: &[f64],
    px: &PixelField,
    c0: f64,
    base_rc: f64,
    torus: bool,
    sigma2: f64,
    n: usize,
) -> f64 {
    let total: f64 = (0..n)
        .into_par_iter()
        .map(|k| {
            let (_, e) = pixel_terms(&coords[k * 2..k * 2 + 2], shapes[k], px, c0, base_rc, torus, None);
            e
        })
        .sum();
    -2.0 * std::f64::consts::PI * sigma2 / n as f64 * total
}

struct AdaptiveDynamics {
    n: usize,
    dim: usize,
    c0: f64,
    base_rc: f64,
    sigma: f64,
    sigma2: f64,
    shapes: Vec<f64>,
    saved_shapes: Vec<f64>,
    fitted: bool,
    px: PixelField,
}

impl AdaptiveDynamics {
    fn refit(&mut self, coords: &[f64], passes: usize) {
        for _ in 0..passes {
            shape_pass(coords, self.dim, true, self.sigma, &mut self.shapes);
        }
    }
}

impl Dynamics for AdaptiveDynamics {
    fn directions(&mut self, coords: &[f64], dirs: &mut Vec<f64>, norms: &mut Vec<f64>) {
        let a = &self.shapes;
        let (c0, base_rc, dim) = (self.c0, self.base_rc, self.dim);
        let base_cut2 = base_rc * base_rc;
        let (mut d, mut m) = pair_reduce(self.n, dim, |i, j, g| {
            let akl = mutual_shape(a[i], a[j]);
            let mut u = [0.0f64; MAX_DIM];
            let mut d2 = 0.0;
            for r in 0..dim {
                let v = min_image(coords[i * dim + r] - coords[j * dim + r]);
                u[r] = v;
                d2 += v * v;
            }
            if d2 * akl > base_cut2 {
                return 0.0;
            }
            let sp = ShapedPair::new(c0, base_rc, akl, true);
            let e = sp.eval(&u[..dim], Some(g));
            let w = akl * akl;
            for v in g.iter_mut() {
                *v *= w;
            }
            w * e
        });
        let px = &self.px;
        d.par_chunks_mut(dim)
            .zip(m.par_iter_mut())
            .enumerate()
            .for_each(|(k, (dk, mk))| {
                let (mass, _) =
                    pixel_terms(&coords[k * dim..k * dim + dim], a[k], px, c0, base_rc, true, Some(dk));
                *mk += mass;
            });
        *dirs = d;
        *norms = m;
    }

    fn energy(&mut self, coords: &[f64]) -> f64 {
        let a = &self.shapes;
        let (c0, base_rc, dim) = (self.c0, self.base_rc, self.dim);
        let base_cut2 = base_rc * base_rc;
        let pair = pair_scalar_reduce(self.n, |i, j| {
            let akl = mutual_shape(a[i], a[j]);
            let mut u = [0.0f64; MAX_DIM];
            let mut d2 = 0.0;
            for r in 0..dim {
                let v = min_image(coords[i * dim + r] - coords[j * dim + r]);
                u[r] = v;
                d2 += v * v;
            }
            if d2 * akl > base_cut2 {
                return 0.0;
            }
            let sp = ShapedPair::new(c0, base_rc, akl, true);
            akl * sp.eval(&u[..dim], None)
        });
        let point = 2.0 * std::f64::consts::PI * self.sigma2 / self.n as f64 * pair;
        point + cross_energy(coords, a, &self.px, c0, base_rc, true, self.sigma2, self.n)
    }

    fn constrain(&self, x: f64) -> f64 {
        toroidal_wrap(x)
    }

    /// Shapes refit only between accepted blocks: the acceptance test then
    /// compares energies under identical shapes, while the fit itself is
    /// free to move the energy (the refreshed value becomes the baseline).
    fn checkpoint_update(&mut self, coords: &[f64]) -> bool {
        let passes = if self.fitted { 1 } else { 10 };
        self.fitted = true;
        self.refit(coords, passes);
        true
    }

    fn save(&mut self) {
        self.saved_shapes.clone_from(&self.shapes);
    }

    fn restore(&mut self) {
        self.shapes.clone_from(&self.saved_shapes);
    }
}

/// Density-adaptive optimization: weighted random start, then Jacobi
/// descent that alternates one shape-fitting pass with one position step
/// against shaped pair repulsion plus pixel attraction. Returns the final
/// points, their shapes, and the descent trace.
pub fn optimize_adaptive(
    density: &DensityMap,
    n: usize,
    kcfg: &KernelConfig,
    ocfg: &OptimizeConfig,
) -> Result<(PointSet, ShapeFactors, OptimizeTrace)> {
    if kcfg.dim != 2 {
        return Err(invalid("adaptive optimization works on 2D density maps"));
    }
    if kcfg.n != n {
        return Err(invalid("kernel config sized for a different point count"));
    }
    if n < 2 {
        return Err(invalid("adaptive optimization needs at least two points"));
    }
    ocfg.validate()?;
    let start = weighted_random_init(density, n, ocfg.seed)?;
    let (c0, base_rc) = pair_params(kcfg);
    let mut dynamics = AdaptiveDynamics {
        n,
        dim: 2,
        c0,
        base_rc,
        sigma: kcfg.sigma_abs,
        sigma2: kcfg.sigma_abs * kcfg.sigma_abs,
        shapes: vec![1.0; n],
        saved_shapes: vec![1.0; n],
        fitted: false,
        px: PixelField::new(density, n),
    };
    let (points, trace) = run_descent(&start, &mut dynamics, ocfg)?;
    let shapes = ShapeFactors::from_values(dynamics.shapes)?;
    Ok((points, shapes, trace))
}

/// Rasterize the shaped kernel sum A(x) = sum_k a_k exp(-a_k |x - x_k|^2 /
/// (2 sigma^2)) onto a width x height grid. With `mean_target` the image
/// is scaled to that mean and clipped to [0,1]; without it the image is
/// scaled so its maximum is 1.
pub fn reconstruct(
    points: &PointSet,
    shapes: &ShapeFactors,
    kcfg: &KernelConfig,
    width: usize,
    height: usize,
    mean_target: Option<f64>,
) -> Result<DensityMap> {
    if points.dim() != 2 {
        return Err(invalid("reconstruction renders 2D point sets"));
    }
    if shapes.len() != points.n() {
        return Err(invalid("one shape factor per point required"));
    }
    if kcfg.n != points.n() || kcfg.dim != 2 {
        return Err(invalid("kernel config does not match the point set"));
    }
    if width == 0 || height == 0 {
        return Err(invalid("image dimensions must be >= 1"));
    }
    let torus = points.domain() == Domain::Torus;
    let sigma2 = kcfg.sigma_abs * kcfg.sigma_abs;
    let inv = 1.0 / (2.0 * sigma2);
    let support2 = 81.0 * sigma2;
    let coords = points.coords();
    let a = shapes.values();
    let mut img = vec![0.0f64; width * height];
    img.par_chunks_mut(width).enumerate().for_each(|(iy, row)| {
        let cy = (iy as f64 + 0.5) / height as f64;
        for (ix, out) in row.iter_mut().enumerate() {
            let cx = (ix as f64 + 0.5) / width as f64;
            let mut acc = 0.0;
            for (k, &ak) in a.iter().enumerate() {
                let mut dx = cx - coords[k * 2];
                let mut dy = cy - coords[k * 2 + 1];
                if torus {
                    dx = min_image(dx);
                    dy = min_image(dy);
                }
                let d2 = dx * dx + dy * dy;
                if ak * d2 > support2 {
                    continue;
                }
                acc += ak * (-ak * d2 * inv).exp();
            }
            *out = acc;
        }
    });
    match mean_target {
        Some(m) => {
            if !(m > 0.0) || !m.is_finite() {
                return Err(invalid("mean target must be positive and finite"));
            }
            let mean = img.iter().sum::<f64>() / img.len() as f64;
            if !(mean > 0.0) {
                return Err(invalid("reconstruction field is empty"));
            }
            let s = m / mean;
            for v in img.iter_mut() {
                *v = (*v * s).min(1.0);
            }
        }
        None => {
            let max = img.iter().cloned().fold(0.0, f64::max);
            if !(max > 0.0) {
                return Err(invalid("reconstruction field is empty"));
            }
            for v in img.iter_mut() {
                *v /= max;
            }
        }
    }
    DensityMap::from_values(width, height, img)
}
