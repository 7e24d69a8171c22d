use crate::error::{invalid, Result};
use crate::kernel::freq_weight;
use crate::points::{toroidal_dist2, Domain, PointSet};
use rayon::prelude::*;
use std::collections::BTreeMap;

/// Largest number of frequency-lattice bins a periodogram may hold.
const MAX_BINS: usize = 60_000_000;
/// Points are folded into the frequency grid in fixed blocks of this size
/// so the per-block phase tables stay cache-resident.
const POINT_BLOCK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Cplx {
    re: f64,
    im: f64,
}

impl Cplx {
    const ONE: Cplx = Cplx { re: 1.0, im: 0.0 };

    #[inline]
    fn mul(self, o: Cplx) -> Cplx {
        Cplx {
            re: self.re * o.re - self.im * o.im,
            im: self.re * o.im + self.im * o.re,
        }
    }

    #[inline]
    fn conj(self) -> Cplx {
        Cplx {
            re: self.re,
            im: -self.im,
        }
    }

    #[inline]
    fn norm_sq(self) -> f64 {
        self.re * self.re + self.im * self.im
    }
}

/// n-th root with exact integers recovered, so band edges and default
/// frequency ranges do not wobble off by one.
pub(crate) fn nth_root(n: usize, dim: usize) -> f64 {
    let x = (n as f64).powf(1.0 / dim as f64);
    let r = x.round();
    if r > 0.0 && (r as usize).checked_pow(dim as u32) == Some(n) {
        r
    } else {
        x
    }
}

/// Default analysis range: twice the points-per-axis rate, e.g. 64 for
/// 1024 points in 2D.
pub fn default_fmax(n: usize, dim: usize) -> usize {
    (2.0 * nth_root(n, dim) - 1e-9).ceil().max(1.0) as usize
}

/// Power spectrum of a point set over the integer frequency lattice
/// [-fmax, fmax]^dim, normalized so white noise sits at 1 away from DC.
/// `power` is stored row-major with axis 0 fastest; `realizations` counts
/// how many sets were averaged in.
#[derive(Debug, Clone)]
pub struct Periodogram {
    dim: usize,
    fmax: usize,
    n: usize,
    realizations: usize,
    power: Vec<f64>,
}

impl Periodogram {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn fmax(&self) -> usize {
        self.fmax
    }

    /// Number of points per analyzed set.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of realizations averaged into `power`.
    pub fn realizations(&self) -> usize {
        self.realizations
    }

    pub fn power(&self) -> &[f64] {
        &self.power
    }

    fn side(&self) -> usize {
        2 * self.fmax + 1
    }

    /// Flat index of a frequency vector; axis 0 is the least significant
    /// digit in base 2*fmax+1.
    pub fn index(&self, f: &[i64]) -> Result<usize> {
        if f.len() != self.dim {
            return Err(invalid("frequency vector has wrong dimension"));
        }
        let side = self.side() as i64;
        let m = self.fmax as i64;
        let mut idx = 0i64;
        for (r, &fr) in f.iter().enumerate().rev() {
            if fr.abs() > m {
                return Err(invalid(format!("frequency component {fr} out of range")));
            }
            idx = idx * side + (fr + m);
            let _ = r;
        }
        Ok(idx as usize)
    }

    pub fn power_at(&self, f: &[i64]) -> Result<f64> {
        Ok(self.power[self.index(f)?])
    }

    /// Decode a flat index back into a frequency vector.
    fn decode(&self, mut idx: usize, f: &mut [i64]) {
        let side = self.side();
        let m = self.fmax as i64;
        for fr in f.iter_mut() {
            *fr = (idx % side) as i64 - m;
            idx /= side;
        }
    }

    /// Fold another periodogram of the same shape into this one as
    /// additional realizations (running mean).
    pub fn merge(&mut self, other: &Periodogram) -> Result<()> {
        if self.dim != other.dim || self.fmax != other.fmax || self.n != other.n {
            return Err(invalid("periodogram shapes differ"));
        }
        let total = (self.realizations + other.realizations) as f64;
        let wa = self.realizations as f64 / total;
        let wb = other.realizations as f64 / total;
        for (a, b) in self.power.iter_mut().zip(&other.power) {
            *a = *a * wa + *b * wb;
        }
        self.realizations += other.realizations;
        Ok(())
    }
}

/// Exact power spectrum of one point set: |sum_k e^{-2 pi i f.x_k}|^2 / n
/// at every integer frequency with |f_r| <= fmax.
pub fn periodogram(points: &PointSet, fmax: usize) -> Result<Periodogram> {
    if fmax < 1 {
        return Err(invalid("fmax must be >= 1"));
    }
    if points.domain() != Domain::Torus {
        return Err(invalid("periodic point set required"));
    }
    let dim = points.dim();
    let n = points.n();
    let side = 2 * fmax + 1;
    let bins = side
        .checked_pow(dim as u32)
        .filter(|&b| b <= MAX_BINS)
        .ok_or_else(|| invalid("frequency grid too large"))?;

    let mut amps = vec![Cplx { re: 0.0, im: 0.0 }; bins];
    let coords = points.coords();

    for block_start in (0..n).step_by(POINT_BLOCK) {
        let block = block_start..(block_start + POINT_BLOCK).min(n);
        // phase tables: tables[point-in-block][axis][fmax + f] = e^{-2 pi i f x},
        // negative half mirrored by exact conjugation
        let tables: Vec<Vec<Cplx>> = block
            .clone()
            .flat_map(|k| {
                (0..dim).map(move |r| {
                    let x = coords[k * dim + r];
                    let mut t = vec![Cplx { re: 0.0, im: 0.0 }; side];
                    t[fmax] = Cplx::ONE;
                    for f in 1..=fmax {
                        let ang = 2.0 * std::f64::consts::PI * f as f64 * x;
                        let e = Cplx {
                            re: ang.cos(),
                            im: -ang.sin(),
                        };
                        t[fmax + f] = e;
                        t[fmax - f] = e.conj();
                    }
                    t
                })
            })
            .collect();

        let nblk = block.len();
        amps.par_chunks_mut(side)
            .enumerate()
            .for_each(|(row, out)| {
                // decode the row's tail digits (axes 1..dim)
                let mut tail = [0usize; 16];
                let mut idx = row;
                for t in tail.iter_mut().take(dim - 1) {
                    *t = idx % side;
                    idx /= side;
                }
                for k in 0..nblk {
                    let mut partial = Cplx::ONE;
                    for r in 1..dim {
                        partial = partial.mul(tables[k * dim + r][tail[r - 1]]);
                    }
                    let t0 = &tables[k * dim];
                    for (o, t) in out.iter_mut().zip(t0) {
                        *o = Cplx {
                            re: o.re + partial.re * t.re - partial.im * t.im,
                            im: o.im + partial.re * t.im + partial.im * t.re,
                        };
                    }
                }
            });
    }

    let inv_n = 1.0 / n as f64;
    let power: Vec<f64> = amps.iter().map(|a| a.norm_sq() * inv_n).collect();
    Ok(Periodogram {
        dim,
        fmax,
        n,
        realizations: 1,
        power,
    })
}

/// One exact-radius group of the radial power profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialEntry {
    /// Exact integer squared radius |f|^2.
    pub r2: u64,
    pub r: f64,
    pub mean_power: f64,
    /// Lattice points sharing this squared radius.
    pub count: usize,
}

/// Radially grouped power profile with exact integer radii (no annulus
/// binning). Covers every non-DC lattice point of the source periodogram.
#[derive(Debug, Clone)]
pub struct RadialProfile {
    pub entries: Vec<RadialEntry>,
    /// Noise-floor estimate from the low band (NaN when the band is empty).
    pub eps_estimate: f64,
}

/// Group periodogram bins by exact squared radius and average each group.
pub fn radial_profile(p: &Periodogram) -> RadialProfile {
    let mut groups: BTreeMap<u64, (f64, usize)> = BTreeMap::new();
    let mut f = vec![0i64; p.dim];
    for (idx, &pw) in p.power.iter().enumerate() {
        p.decode(idx, &mut f);
        let r2: i64 = f.iter().map(|&x| x * x).sum();
        if r2 == 0 {
            continue;
        }
        let e = groups.entry(r2 as u64).or_insert((0.0, 0));
        e.0 += pw;
        e.1 += 1;
    }
    let entries: Vec<RadialEntry> = groups
        .into_iter()
        .map(|(r2, (sum, count))| RadialEntry {
            r2,
            r: (r2 as f64).sqrt(),
            mean_power: sum / count as f64,
            count,
        })
        .collect();
    let mut profile = RadialProfile {
        entries,
        eps_estimate: f64::NAN,
    };
    if let Ok(eps) = noise_floor(&profile, p.n, p.dim) {
        profile.eps_estimate = eps;
    }
    profile
}

/// Mean power over the low band 0 < |f| <= 0.25 n^{1/dim}: the flat floor
/// a converged set settles to.
pub fn noise_floor(rp: &RadialProfile, n: usize, dim: usize) -> Result<f64> {
    let hi = 0.25 * nth_root(n, dim);
    let hi2 = (hi * hi * (1.0 + 1e-12)).floor() as u64;
    let mut sum = 0.0;
    let mut cnt = 0usize;
    for e in &rp.entries {
        if e.r2 > hi2 {
            break;
        }
        sum += e.mean_power;
        cnt += 1;
    }
    if cnt == 0 {
        return Err(invalid("no frequencies in the low band"));
    }
    Ok(sum / cnt as f64)
}

/// Per-ring anisotropy entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnisotropyEntry {
    pub r2: u64,
    pub r: f64,
    /// variance over the ring divided by its squared mean, in decibels.
    pub anisotropy_db: f64,
    pub count: usize,
}

/// Per-ring relative variance of an averaged periodogram, in decibels.
/// Rings with a single lattice point are excluded (variance undefined).
/// For isotropic noise averaged over R realizations the expected level is
/// -10 log10(R) dB.
pub fn anisotropy(p: &Periodogram) -> Result<Vec<AnisotropyEntry>> {
    if p.realizations < 2 {
        return Err(invalid("anisotropy needs an average over >= 2 realizations"));
    }
    let mut groups: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    let mut f = vec![0i64; p.dim];
    for (idx, &pw) in p.power.iter().enumerate() {
        p.decode(idx, &mut f);
        let r2: i64 = f.iter().map(|&x| x * x).sum();
        if r2 == 0 {
            continue;
        }
        groups.entry(r2 as u64).or_default().push(pw);
    }
    Ok(groups
        .into_iter()
        .filter(|(_, v)| v.len() >= 2)
        .map(|(r2, v)| {
            let m = v.len() as f64;
            let mean = v.iter().sum::<f64>() / m;
            let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (m - 1.0);
            let ratio = var / (mean * mean);
            AnisotropyEntry {
                r2,
                r: (r2 as f64).sqrt(),
                anisotropy_db: 10.0 * ratio.log10(),
                count: v.len(),
            }
        })
        .collect())
}

/// Spectrum of the Gaussian-blurred point sum: pointwise product with the
/// kernel transfer function at normalized frequency 2 pi f n^{-1/dim}.
pub fn filtered_power(p: &Periodogram, sigma_rel: f64) -> Periodogram {
    let spacing = 1.0 / nth_root(p.n, p.dim);
    let mut out = p.clone();
    let mut f = vec![0i64; p.dim];
    for (idx, pw) in out.power.iter_mut().enumerate() {
        p.decode(idx, &mut f);
        let f2: i64 = f.iter().map(|&x| x * x).sum();
        let w = 2.0 * std::f64::consts::PI * spacing;
        *pw *= freq_weight(w * w * f2 as f64, sigma_rel);
    }
    out
}

/// Smallest pairwise toroidal distance (the conflict radius).
pub fn min_toroidal_distance(points: &PointSet) -> Result<f64> {
    let n = points.n();
    if n < 2 {
        return Err(invalid("need at least two points"));
    }
    let mut best = f64::INFINITY;
    for i in 0..n {
        for j in (i + 1)..n {
            best = best.min(toroidal_dist2(&points.point(i), &points.point(j)));
        }
    }
    Ok(best.sqrt())
}

/// Least-squares fit of the exponential rising band of a converged
/// profile: ln(mean_power) regressed on r^2 over 0.25..0.55 of the
/// points-per-axis rate, each ring weighted by its multiplicity.
#[derive(Debug, Clone, Copy)]
pub struct RisingFit {
    /// Floor level extrapolated at r = 0.
    pub eps: f64,
    /// Growth rate per unit squared radius.
    pub scale: f64,
    /// Weighted coefficient of determination of the fit.
    pub r_squared: f64,
    /// Rings used.
    pub entries_used: usize,
}

pub fn fit_rising_band(rp: &RadialProfile, n: usize, dim: usize) -> Result<RisingFit> {
    let rate = nth_root(n, dim);
    let lo = 0.25 * rate;
    let hi = 0.55 * rate;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut ws = Vec::new();
    for e in &rp.entries {
        if e.r >= lo && e.r <= hi && e.mean_power > 0.0 {
            xs.push(e.r2 as f64);
            ys.push(e.mean_power.ln());
            ws.push(e.count as f64);
        }
    }
    if xs.len() < 3 {
        return Err(invalid("not enough rings in the rising band"));
    }
    let wsum: f64 = ws.iter().sum();
    let xm: f64 = xs.iter().zip(&ws).map(|(x, w)| x * w).sum::<f64>() / wsum;
    let ym: f64 = ys.iter().zip(&ws).map(|(y, w)| y * w).sum::<f64>() / wsum;
    let sxx: f64 = xs.iter().zip(&ws).map(|(x, w)| w * (x - xm) * (x - xm)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .zip(&ws)
        .map(|((x, y), w)| w * (x - xm) * (y - ym))
        .sum();
    let syy: f64 = ys.iter().zip(&ws).map(|(y, w)| w * (y - ym) * (y - ym)).sum();
    if sxx == 0.0 || syy == 0.0 {
        return Err(invalid("degenerate rising band"));
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let r_squared = (sxy * sxy) / (sxx * syy);
    Ok(RisingFit {
        eps: intercept.exp(),
        scale: slope,
        r_squared,
        entries_used: xs.len(),
    })
}
