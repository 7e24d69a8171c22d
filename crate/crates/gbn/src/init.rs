use rand::Rng;

use crate::density::DensityMap;
use crate::error::{invalid, Result};
use crate::points::{Domain, PointSet};
use crate::seed::{rng_for, Seed};

/// i.i.d. uniform points on the torus. Point k draws from its own RNG
/// stream, so the result is independent of evaluation order.
pub fn random_init(n: usize, dim: usize, seed: Seed) -> Result<PointSet> {
    if n == 0 || dim == 0 {
        return Err(invalid("random_init: n and dim must be >= 1"));
    }
    let mut coords = Vec::with_capacity(n * dim);
    for k in 0..n {
        let mut rng = rng_for(seed, k as u64);
        for _ in 0..dim {
            coords.push(rng.gen::<f64>());
        }
    }
    PointSet::from_coords(dim, Domain::Torus, coords)
}

/// Jittered-grid start: n must be m^dim; one uniform draw per grid cell.
pub fn stratified_init(n: usize, dim: usize, seed: Seed) -> Result<PointSet> {
    if n == 0 || dim == 0 {
        return Err(invalid("stratified_init: n and dim must be >= 1"));
    }
    let m = integer_root(n, dim)
        .ok_or_else(|| invalid(format!("stratified_init: {n} is not a perfect {dim}-th power")))?;
    let cells = m as f64;
    let mut coords = Vec::with_capacity(n * dim);
    for cell in 0..n {
        let mut rng = rng_for(seed, cell as u64);
        // decode the cell index in base m, least-significant axis first
        let mut rest = cell;
        for _ in 0..dim {
            let i = rest % m;
            rest /= m;
            coords.push((i as f64 + rng.gen::<f64>()) / cells);
        }
    }
    PointSet::from_coords(dim, Domain::Torus, coords)
}

/// 2D density-proportional start: rejection-sample pixels, jitter within
/// the accepted pixel.
pub fn weighted_random_init(density: &DensityMap, n: usize, seed: Seed) -> Result<PointSet> {
    if n == 0 {
        return Err(invalid("weighted_random_init: n must be >= 1"));
    }
    let (w, h) = (density.width(), density.height());
    let vmax = density.max_value();
    let mut coords = Vec::with_capacity(n * 2);
    for k in 0..n {
        let mut rng = rng_for(seed, k as u64);
        loop {
            let ix = rng.gen_range(0..w);
            let iy = rng.gen_range(0..h);
            if rng.gen::<f64>() * vmax <= density.value_at(ix, iy) {
                coords.push((ix as f64 + rng.gen::<f64>()) / w as f64);
                coords.push((iy as f64 + rng.gen::<f64>()) / h as f64);
                break;
            }
        }
    }
    PointSet::from_coords(2, Domain::Torus, coords)
}

/// Exact integer dim-th root, if n = m^dim.
fn integer_root(n: usize, dim: usize) -> Option<usize> {
    let guess = (n as f64).powf(1.0 / dim as f64).round() as usize;
    for m in guess.saturating_sub(1)..=guess + 1 {
        if m.checked_pow(dim as u32) == Some(n) {
            return Some(m);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_init_shapes_and_ranges() {
        let ps = random_init(1, 2, 42).unwrap();
        assert_eq!((ps.n(), ps.dim()), (1, 2));
        assert!(ps.coords().iter().all(|c| (0.0..1.0).contains(c)));

        let ps = random_init(4, 8, 42).unwrap();
        assert_eq!(ps.coords().len(), 32);

        assert!(random_init(0, 2, 1).is_err());
        assert!(random_init(2, 0, 1).is_err());
    }

    #[test]
    fn random_init_means_near_half() {
        let ps = random_init(1000, 2, 7).unwrap();
        for axis in 0..2 {
            let mean: f64 =
                ps.iter_points().map(|p| p[axis]).sum::<f64>() / ps.n() as f64;
            assert!((mean - 0.5).abs() < 0.05, "axis {axis} mean {mean}");
        }
    }

    #[test]
    fn random_init_reproducible() {
        assert_eq!(random_init(64, 3, 9).unwrap(), random_init(64, 3, 9).unwrap());
        assert_ne!(random_init(64, 3, 9).unwrap(), random_init(64, 3, 10).unwrap());
    }

    #[test]
    fn stratified_occupies_every_cell() {
        for (n, dim) in [(4usize, 2usize), (16, 2), (8, 3)] {
            let m = integer_root(n, dim).unwrap();
            let ps = stratified_init(n, dim, 5).unwrap();
            let mut seen = vec![false; n];
            for p in ps.iter_points() {
                let mut cell = 0;
                for (axis, x) in p.iter().enumerate() {
                    let i = ((x * m as f64) as usize).min(m - 1);
                    cell += i * m.pow(axis as u32);
                }
                assert!(!seen[cell], "cell {cell} occupied twice");
                seen[cell] = true;
            }
            assert!(seen.iter().all(|&s| s));
        }
    }

    #[test]
    fn stratified_rejects_non_powers() {
        assert!(stratified_init(5, 2, 1).is_err());
        assert!(stratified_init(9, 2, 1).is_ok());
        assert!(stratified_init(27, 3, 1).is_ok());
        assert!(stratified_init(28, 3, 1).is_err());
    }

    #[test]
    fn weighted_respects_support() {
        // density only in the left half
        let mut vals = vec![0.0; 16];
        for iy in 0..4 {
            for ix in 0..2 {
                vals[iy * 4 + ix] = 1.0;
            }
        }
        let d = DensityMap::from_values(4, 4, vals).unwrap();
        let ps = weighted_random_init(&d, 500, 3).unwrap();
        assert!(ps.iter_points().all(|p| p[0] < 0.5));
    }

    #[test]
    fn weighted_constant_reduces_to_uniform() {
        let d = DensityMap::constant(8, 8, 1.0).unwrap();
        let ps = weighted_random_init(&d, 1000, 11).unwrap();
        for axis in 0..2 {
            let mean: f64 =
                ps.iter_points().map(|p| p[axis]).sum::<f64>() / ps.n() as f64;
            assert!((mean - 0.5).abs() < 0.05, "axis {axis} mean {mean}");
        }
    }

    #[test]
    fn weighted_two_level_occupancy_ratio() {
        // left half 0.75, right half 0.25: expect 3:1 occupancy
        let mut vals = vec![0.25; 64];
        for iy in 0..8 {
            for ix in 0..4 {
                vals[iy * 8 + ix] = 0.75;
            }
        }
        let d = DensityMap::from_values(8, 8, vals).unwrap();
        let ps = weighted_random_init(&d, 10000, 13).unwrap();
        let left = ps.iter_points().filter(|p| p[0] < 0.5).count();
        let ratio = left as f64 / (ps.n() - left) as f64;
        assert!((ratio - 3.0).abs() < 0.3, "ratio {ratio}");
    }

    #[test]
    fn weighted_chi_square_against_density() {
        // 4x4 two-level map; chi-square over pixels at n = 10^4 must pass
        // at the 0.01 level (critical value 30.58 for 15 dof)
        let mut vals = vec![0.25; 16];
        vals[0] = 1.0;
        vals[5] = 1.0;
        vals[10] = 1.0;
        vals[15] = 1.0;
        let d = DensityMap::from_values(4, 4, vals.clone()).unwrap();
        let n = 10_000usize;
        let ps = weighted_random_init(&d, n, 17).unwrap();
        let mut obs = vec![0.0f64; 16];
        for p in ps.iter_points() {
            let ix = ((p[0] * 4.0) as usize).min(3);
            let iy = ((p[1] * 4.0) as usize).min(3);
            obs[iy * 4 + ix] += 1.0;
        }
        let mass: f64 = vals.iter().sum();
        let chi2: f64 = (0..16)
            .map(|i| {
                let expect = n as f64 * vals[i] / mass;
                (obs[i] - expect).powi(2) / expect
            })
            .sum();
        assert!(chi2 < 30.58, "chi2 {chi2}");
    }
}
