//! Monte Carlo integration harness: two integrand families with exact
//! reference values, an estimator, and variance-vs-N sweeps across
//! samplers. Sweeps randomize an optimized set by toroidal shifts, which
//! leave its energy invariant; random and stratified samplers draw fresh
//! sets per realization.

use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::init::{random_init, stratified_init};
use crate::kernel::{axis_replica_eval, KernelConfig};
use crate::optimize::OptimizeConfig;
use crate::pointfile::{read_points, write_points};
use crate::points::{toroidal_wrap, Domain, PointSet};
use crate::seed::{rng_for, Seed};
use crate::uniform::optimize_uniform;

const GAUSSIAN_CENTERS: usize = 64;
/// Nominal grid frequency the Gaussian width is tied to: sigma' = 512^(-1/dim).
const GAUSSIAN_GRID: f64 = 512.0;
/// Axes whose normal component is below this fraction of the normal's
/// length are integrated out exactly (dimension reduction).
const AXIS_DROP_REL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntegrandFamily {
    GaussianSum,
    Halfspace,
}

impl IntegrandFamily {
    pub fn label(&self) -> &'static str {
        match self {
            IntegrandFamily::GaussianSum => "gaussian_sum",
            IntegrandFamily::Halfspace => "halfspace",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampler {
    Gbn,
    Random,
    Stratified,
}

impl Sampler {
    pub fn label(&self) -> &'static str {
        match self {
            Sampler::Gbn => "gbn",
            Sampler::Random => "random",
            Sampler::Stratified => "stratified",
        }
    }
}

#[derive(Debug, Clone)]
enum IntegrandKind {
    /// row-major centers (64 x dim), kernel width, replica image count
    GaussianSum {
        centers: Vec<f64>,
        sigma_prime: f64,
        periods: usize,
    },
    /// indicator of normal . (x - anchor) <= 0 on the unit box
    Halfspace { anchor: Vec<f64>, normal: Vec<f64> },
}

/// An integrand on the unit torus/box together with its exact integral.
#[derive(Debug, Clone)]
pub struct IntegrandSpec {
    kind: IntegrandKind,
    dim: usize,
    exact: f64,
}

impl IntegrandSpec {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn exact_integral(&self) -> f64 {
        self.exact
    }

    pub fn family(&self) -> IntegrandFamily {
        match self.kind {
            IntegrandKind::GaussianSum { .. } => IntegrandFamily::GaussianSum,
            IntegrandKind::Halfspace { .. } => IntegrandFamily::Halfspace,
        }
    }

    /// Explicit halfspace instance; the exact integral is the closed-form
    /// halfspace-box intersection volume.
    pub fn halfspace(anchor: Vec<f64>, normal: Vec<f64>) -> Result<Self> {
        if anchor.is_empty() || anchor.len() != normal.len() {
            return Err(invalid("halfspace: anchor/normal length mismatch"));
        }
        if anchor.iter().chain(&normal).any(|v| !v.is_finite()) {
            return Err(invalid("halfspace: non-finite input"));
        }
        let exact = halfspace_box_volume(&anchor, &normal)?;
        Ok(Self {
            dim: anchor.len(),
            kind: IntegrandKind::Halfspace { anchor, normal },
            exact,
        })
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        match &self.kind {
            IntegrandKind::GaussianSum {
                centers,
                sigma_prime,
                periods,
            } => {
                let s2 = sigma_prime * sigma_prime;
                let mut total = 0.0;
                for c in centers.chunks_exact(self.dim) {
                    let mut prod = 1.0;
                    for r in 0..self.dim {
                        let d = toroidal_wrap(x[r] - c[r]);
                        prod *= axis_replica_eval(d, s2, *periods).value;
                    }
                    total += prod;
                }
                total
            }
            IntegrandKind::Halfspace { anchor, normal } => {
                let side: f64 = normal
                    .iter()
                    .zip(x.iter().zip(anchor))
                    .map(|(n, (x, p))| n * (x - p))
                    .sum();
                if side <= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Volume of {x in [0,1]^dim : normal . (x - anchor) <= 0} by
/// inclusion-exclusion over the box vertices. Axes with a negligible
/// normal component are integrated out; negative components are reflected
/// so the standard positive-coefficient formula applies.
fn halfspace_box_volume(anchor: &[f64], normal: &[f64]) -> Result<f64> {
    let len = normal.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(len > 0.0) {
        return Err(invalid("halfspace: zero normal"));
    }
    let mut b = normal.iter().zip(anchor).map(|(n, p)| n * p).sum::<f64>() / len;
    let mut coef: Vec<f64> = Vec::new();
    for &v in normal {
        let c = v / len;
        if c.abs() < AXIS_DROP_REL {
            continue;
        }
        if c < 0.0 {
            // reflect x -> 1 - x on this axis
            b -= c;
            coef.push(-c);
        } else {
            coef.push(c);
        }
    }
    let m = coef.len();
    let mut factorial = 1.0;
    let mut denom = 1.0;
    for (i, c) in coef.iter().enumerate() {
        factorial *= (i + 1) as f64;
        denom *= c;
    }
    let mut vol = 0.0;
    for mask in 0u32..(1 << m) {
        let mut t = b;
        for (i, c) in coef.iter().enumerate() {
            if mask >> i & 1 == 1 {
                t -= c;
            }
        }
        if t > 0.0 {
            let sign = if mask.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            vol += sign * t.powi(m as i32);
        }
    }
    Ok((vol / (factorial * denom)).clamp(0.0, 1.0))
}

/// Toroidal sum of 64 random Gaussians of width 512^(-1/dim); the exact
/// integral of each replica-summed Gaussian over the unit torus is
/// (sqrt(2 pi) sigma')^dim.
pub fn make_gaussian_sum(dim: usize, seed: Seed) -> Result<IntegrandSpec> {
    if dim == 0 {
        return Err(invalid("make_gaussian_sum: dim must be >= 1"));
    }
    let mut rng = rng_for(seed, 0);
    let centers: Vec<f64> = (0..GAUSSIAN_CENTERS * dim).map(|_| rng.gen::<f64>()).collect();
    let sigma_prime = GAUSSIAN_GRID.powf(-1.0 / dim as f64);
    let periods = (9.0 * sigma_prime).ceil().max(1.0) as usize;
    let exact = GAUSSIAN_CENTERS as f64
        * (2.0 * std::f64::consts::PI * sigma_prime * sigma_prime).powf(dim as f64 / 2.0);
    Ok(IntegrandSpec {
        kind: IntegrandKind::GaussianSum {
            centers,
            sigma_prime,
            periods,
        },
        dim,
        exact,
    })
}

/// Random halfspace: uniform anchor, isotropic normal direction.
pub fn make_halfspace(dim: usize, seed: Seed) -> Result<IntegrandSpec> {
    if dim == 0 {
        return Err(invalid("make_halfspace: dim must be >= 1"));
    }
    let mut rng = rng_for(seed, 0);
    let anchor: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>()).collect();
    loop {
        // Box-Muller pairs give an isotropic direction
        let normal: Vec<f64> = (0..dim)
            .map(|_| {
                let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
                let u2: f64 = rng.gen();
                (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
            })
            .collect();
        if normal.iter().map(|v| v * v).sum::<f64>().sqrt() > 1e-6 {
            return IntegrandSpec::halfspace(anchor, normal);
        }
    }
}

/// Plain Monte Carlo estimator: the mean of the integrand over the set.
pub fn estimate(spec: &IntegrandSpec, points: &PointSet) -> Result<f64> {
    if points.dim() != spec.dim {
        return Err(invalid(format!(
            "estimate: {}-dimensional integrand, {}-dimensional points",
            spec.dim,
            points.dim()
        )));
    }
    let n = points.n();
    let sum: f64 = points.iter_points().map(|p| spec.evaluate(p)).sum();
    Ok(sum / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceRow {
    pub n: usize,
    pub variance: f64,
    pub instances: usize,
    pub randomizations: usize,
}

/// Variance of the Monte Carlo estimate per point count, for one sampler
/// and integrand family.
#[derive(Debug, Clone)]
pub struct VarianceReport {
    pub sampler: Sampler,
    pub family: IntegrandFamily,
    pub dim: usize,
    pub rows: Vec<VarianceRow>,
}

impl VarianceReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("sampler,family,dim,N,variance,instances,randomizations\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{:e},{},{}\n",
                self.sampler.label(),
                self.family.label(),
                self.dim,
                r.n,
                r.variance,
                r.instances,
                r.randomizations
            ));
        }
        out
    }
}

fn make_integrand(family: IntegrandFamily, dim: usize, seed: Seed) -> Result<IntegrandSpec> {
    match family {
        IntegrandFamily::GaussianSum => make_gaussian_sum(dim, seed),
        IntegrandFamily::Halfspace => make_halfspace(dim, seed),
    }
}

fn cache_path(dir: &Path, n: usize, dim: usize, seed: Seed) -> PathBuf {
    dir.join(format!("gbn-d{dim}-n{n}-sr1000-seed{seed}.txt"))
}

/// The one optimized set a GBN sweep reuses across toroidal shifts:
/// relative kernel width 1, the full default iteration budget, cached on
/// disk when a directory is given.
pub fn gbn_sweep_set(
    n: usize,
    dim: usize,
    seed: Seed,
    cache_dir: Option<&Path>,
) -> Result<PointSet> {
    if let Some(dir) = cache_dir {
        let path = cache_path(dir, n, dim, seed);
        if path.is_file() {
            let pts = read_points(&path, Domain::Torus)?;
            if pts.n() == n && pts.dim() == dim {
                return Ok(pts);
            }
        }
    }
    let start = random_init(n, dim, seed)?;
    let pts = if n >= 2 {
        let kcfg = KernelConfig::new(1.0, n, dim)?;
        let (out, _) = optimize_uniform(&start, &kcfg, &OptimizeConfig::new(seed))?;
        out
    } else {
        start
    };
    if let Some(dir) = cache_dir {
        std::fs::create_dir_all(dir)?;
        write_points(&cache_path(dir, n, dim, seed), &pts)?;
    }
    Ok(pts)
}

fn derived_seed(seed: Seed, stream: u64) -> Seed {
    rng_for(seed, stream).gen::<u64>()
}

/// Variance of the estimator over instances x randomizations for each N.
///
/// Each instance draws a fresh integrand; each randomization draws a fresh
/// point set (random, stratified) or a fresh toroidal shift of the one
/// cached optimized set (gbn). The per-instance variance uses the unbiased
/// one-delta estimator and instances are averaged.
#[allow(clippy::too_many_arguments)]
pub fn variance_sweep(
    sampler: Sampler,
    family: IntegrandFamily,
    dim: usize,
    ns: &[usize],
    instances: usize,
    randomizations: usize,
    seed: Seed,
    cache_dir: Option<&Path>,
) -> Result<VarianceReport> {
    if dim == 0 || ns.is_empty() {
        return Err(invalid("variance_sweep: need dim >= 1 and at least one N"));
    }
    if instances == 0 || randomizations < 2 {
        return Err(invalid(
            "variance_sweep: need instances >= 1 and randomizations >= 2",
        ));
    }
    let specs: Vec<IntegrandSpec> = (0..instances)
        .map(|inst| {
            let s = rng_for(seed, 0xA000_0000 + inst as u64).gen::<u64>();
            make_integrand(family, dim, s)
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(ns.len());
    for (n_idx, &n) in ns.iter().enumerate() {
        if n == 0 {
            return Err(invalid("variance_sweep: N must be >= 1"));
        }
        let base_set = match sampler {
            Sampler::Gbn => Some(gbn_sweep_set(n, dim, seed, cache_dir)?),
            _ => None,
        };
        let stream0 = 0x1000_0000u64
            + (n_idx * instances) as u64 * randomizations as u64;
        let variances: Vec<f64> = (0..instances)
            .into_par_iter()
            .map(|inst| -> Result<f64> {
                let spec = &specs[inst];
                let mut ests = Vec::with_capacity(randomizations);
                for r in 0..randomizations {
                    let stream = stream0 + (inst * randomizations + r) as u64;
                    let pts = match sampler {
                        Sampler::Random => random_init(n, dim, derived_seed(seed, stream))?,
                        Sampler::Stratified => {
                            stratified_init(n, dim, derived_seed(seed, stream))?
                        }
                        Sampler::Gbn => {
                            let mut rng = rng_for(seed, stream);
                            let shift: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>()).collect();
                            base_set.as_ref().unwrap().toroidal_shift(&shift)?
                        }
                    };
                    ests.push(estimate(spec, &pts)?);
                }
                let mean = ests.iter().sum::<f64>() / randomizations as f64;
                let var = ests.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>()
                    / (randomizations - 1) as f64;
                Ok(var)
            })
            .collect::<Result<_>>()?;
        rows.push(VarianceRow {
            n,
            variance: variances.iter().sum::<f64>() / instances as f64,
            instances,
            randomizations,
        });
    }
    Ok(VarianceReport {
        sampler,
        family,
        dim,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::uniform::bn_energy;

    #[test]
    fn gaussian_sum_exact_integral_in_2d() {
        let spec = make_gaussian_sum(2, 9).unwrap();
        // 64 * 2 pi / 512 = pi / 4
        let want = std::f64::consts::PI / 4.0;
        assert!((spec.exact_integral() - want).abs() <= 1e-12 * want);
        assert_eq!(spec.dim(), 2);
        assert_eq!(spec.family(), IntegrandFamily::GaussianSum);
    }

    #[test]
    fn gaussian_value_at_a_center_is_at_least_one() {
        let spec = make_gaussian_sum(2, 11).unwrap();
        let IntegrandKind::GaussianSum { ref centers, .. } = spec.kind else {
            unreachable!()
        };
        let c = [centers[0], centers[1]];
        assert!(spec.evaluate(&c) >= 1.0);
    }

    #[test]
    fn random_estimates_converge_to_the_gaussian_exact() {
        let spec = make_gaussian_sum(2, 13).unwrap();
        let pts = random_init(65536, 2, 17).unwrap();
        let est = estimate(&spec, &pts).unwrap();
        // 4 sigma at var ~ 0.38 / 65536
        assert!(
            (est - spec.exact_integral()).abs() < 0.01,
            "{est} vs {}",
            spec.exact_integral()
        );
    }

    #[test]
    fn axis_aligned_halfspaces_have_known_volume() {
        let s = IntegrandSpec::halfspace(vec![0.3, 0.9], vec![1.0, 0.0]).unwrap();
        assert!((s.exact_integral() - 0.3).abs() <= 1e-14);
        let s = IntegrandSpec::halfspace(vec![0.3, 0.9], vec![-1.0, 0.0]).unwrap();
        assert!((s.exact_integral() - 0.7).abs() <= 1e-14);
        // diagonal through the center splits the square in half
        let s = IntegrandSpec::halfspace(vec![0.5, 0.5], vec![1.0, 1.0]).unwrap();
        assert!((s.exact_integral() - 0.5).abs() <= 1e-14);
        // plane past the box in either direction
        let s = IntegrandSpec::halfspace(vec![1.5, 0.5], vec![1.0, 0.0]).unwrap();
        assert_eq!(s.exact_integral(), 1.0);
        let s = IntegrandSpec::halfspace(vec![-0.5, 0.5], vec![1.0, 0.0]).unwrap();
        assert_eq!(s.exact_integral(), 0.0);
    }

    #[test]
    fn halfspace_volume_matches_a_monte_carlo_oracle() {
        for (dim, seed) in [(2usize, 21u64), (2, 22), (3, 23)] {
            let spec = make_halfspace(dim, seed).unwrap();
            let m = 10_000_000usize;
            let mut rng = rng_for(seed, 999);
            let mut hits = 0usize;
            let mut x = vec![0.0; dim];
            for _ in 0..m {
                for v in &mut x {
                    *v = rng.gen();
                }
                if spec.evaluate(&x) > 0.5 {
                    hits += 1;
                }
            }
            let p = hits as f64 / m as f64;
            let se = (p * (1.0 - p) / m as f64).sqrt().max(1e-9);
            let diff = (spec.exact_integral() - p).abs();
            assert!(
                diff <= 3.0 * se,
                "dim {dim} seed {seed}: exact {} vs mc {p} ({} se)",
                spec.exact_integral(),
                diff / se
            );
        }
    }

    #[test]
    fn halfspace_volume_stays_in_unit_range() {
        for seed in 0..50u64 {
            let spec = make_halfspace(2, seed).unwrap();
            let v = spec.exact_integral();
            assert!((0.0..=1.0).contains(&v), "{v}");
        }
    }

    #[test]
    fn degenerate_axis_reduces_dimension() {
        // a normal with a vanishing second component behaves as 1D
        let s = IntegrandSpec::halfspace(vec![0.4, 0.7], vec![2.0, 1e-15]).unwrap();
        assert!((s.exact_integral() - 0.4).abs() <= 1e-9);
    }

    #[test]
    fn rejects_bad_halfspace_and_estimator_inputs() {
        assert!(IntegrandSpec::halfspace(vec![0.5, 0.5], vec![0.0, 0.0]).is_err());
        assert!(IntegrandSpec::halfspace(vec![0.5], vec![1.0, 0.0]).is_err());
        assert!(make_gaussian_sum(0, 1).is_err());
        let spec = make_gaussian_sum(2, 1).unwrap();
        let pts = random_init(8, 3, 1).unwrap();
        assert!(estimate(&spec, &pts).is_err());
    }

    #[test]
    fn estimate_of_an_always_inside_halfspace_is_one() {
        let spec = IntegrandSpec::halfspace(vec![2.0, 0.5], vec![1.0, 0.0]).unwrap();
        let pts = random_init(64, 2, 3).unwrap();
        assert_eq!(estimate(&spec, &pts).unwrap(), 1.0);
    }

    #[test]
    fn random_variance_matches_published_small_n_values() {
        // N=1 variances: gaussian_sum 0.382, halfspace 1/6 (E[p(1-p)] over
        // uniform cut positions)
        let r = variance_sweep(
            Sampler::Random,
            IntegrandFamily::GaussianSum,
            2,
            &[1],
            20,
            100,
            2024,
            None,
        )
        .unwrap();
        let v = r.rows[0].variance;
        assert!((v - 0.382).abs() <= 0.1 * 0.382, "gaussian_sum N=1: {v}");
        let r = variance_sweep(
            Sampler::Random,
            IntegrandFamily::Halfspace,
            2,
            &[1],
            20,
            100,
            2024,
            None,
        )
        .unwrap();
        let v = r.rows[0].variance;
        assert!((v - 1.0 / 6.0).abs() <= 0.1 / 6.0, "halfspace N=1: {v}");
    }

    #[test]
    fn random_variance_follows_one_over_n() {
        let ns = [16usize, 64, 256];
        let r = variance_sweep(
            Sampler::Random,
            IntegrandFamily::GaussianSum,
            2,
            &ns,
            10,
            60,
            7,
            None,
        )
        .unwrap();
        let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
        let ys: Vec<f64> = r.rows.iter().map(|row| row.variance.ln()).collect();
        let xm = xs.iter().sum::<f64>() / xs.len() as f64;
        let ym = ys.iter().sum::<f64>() / ys.len() as f64;
        let slope = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (x - xm) * (y - ym))
            .sum::<f64>()
            / xs.iter().map(|x| (x - xm) * (x - xm)).sum::<f64>();
        assert!((slope + 1.0).abs() <= 0.1, "log-log slope {slope}");
    }

    #[test]
    fn stratified_beats_random_on_the_gaussian_family() {
        for &n in &[16usize, 64, 256] {
            let vr = variance_sweep(
                Sampler::Random,
                IntegrandFamily::GaussianSum,
                2,
                &[n],
                10,
                60,
                5,
                None,
            )
            .unwrap()
            .rows[0]
                .variance;
            let vs = variance_sweep(
                Sampler::Stratified,
                IntegrandFamily::GaussianSum,
                2,
                &[n],
                10,
                60,
                5,
                None,
            )
            .unwrap()
            .rows[0]
                .variance;
            assert!(vs < vr, "N={n}: stratified {vs} vs random {vr}");
        }
    }

    #[test]
    fn toroidal_shift_changes_estimates_but_not_energy() {
        let n = 64;
        let pts = gbn_sweep_set(n, 2, 3, None).unwrap();
        let cfg = KernelConfig::new(1.0, n, 2).unwrap();
        let e0 = bn_energy(&pts, &cfg).unwrap();
        let spec = make_gaussian_sum(2, 31).unwrap();
        let base = estimate(&spec, &pts).unwrap();
        let moved = pts.toroidal_shift(&[0.37, 0.61]).unwrap();
        let e1 = bn_energy(&moved, &cfg).unwrap();
        assert!((e0 - e1).abs() <= 1e-12 * e0.abs());
        assert!((estimate(&spec, &moved).unwrap() - base).abs() > 1e-6);
    }

    #[test]
    fn csv_report_has_the_contract_header() {
        let r = variance_sweep(
            Sampler::Random,
            IntegrandFamily::Halfspace,
            2,
            &[4, 16],
            3,
            10,
            1,
            None,
        )
        .unwrap();
        let csv = r.to_csv();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "sampler,family,dim,N,variance,instances,randomizations"
        );
        let row = lines.next().unwrap();
        assert!(row.starts_with("random,halfspace,2,4,"));
        assert!(row.ends_with(",3,10"));
        assert_eq!(lines.count(), 1);
    }

    #[test]
    fn gbn_sets_are_cached_and_reused() {
        let dir = tempfile::tempdir().unwrap();
        let a = gbn_sweep_set(16, 2, 11, Some(dir.path())).unwrap();
        let path = cache_path(dir.path(), 16, 2, 11);
        assert!(path.is_file());
        let b = gbn_sweep_set(16, 2, 11, Some(dir.path())).unwrap();
        assert_eq!(a.coords(), b.coords());
    }
}
