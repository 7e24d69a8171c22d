use rayon::prelude::*;

/// Row-block size for parallel pair reduction. Fixed so that the merge
/// order (and therefore every rounding) is independent of worker count.
const BLOCK: usize = 64;

/// Deterministic reduction over unordered point pairs.
///
/// For every pair i < j the kernel fills an antisymmetric per-axis
/// contribution `g` (added to row i, subtracted from row j) and returns a
/// symmetric scalar (added to both rows of `norms`). A returned 0.0 means
/// "no interaction" and `g` is ignored, which lets kernels skip far pairs
/// without writing the buffer.
///
/// Work is partitioned into fixed row blocks; each block accumulates into
/// its own buffers sequentially and blocks are merged in ascending index
/// order, so results are bit-identical for any rayon pool size.
pub(crate) fn pair_reduce<F>(n: usize, dim: usize, f: F) -> (Vec<f64>, Vec<f64>)
where
    F: Fn(usize, usize, &mut [f64]) -> f64 + Sync,
{
    let nblocks = n.div_ceil(BLOCK);
    let parts: Vec<(Vec<f64>, Vec<f64>)> = (0..nblocks)
        .into_par_iter()
        .map(|b| {
            let lo = b * BLOCK;
            let hi = ((b + 1) * BLOCK).min(n);
            let mut dirs = vec![0.0; n * dim];
            let mut norms = vec![0.0; n];
            let mut g = vec![0.0; dim];
            for i in lo..hi {
                for j in (i + 1)..n {
                    let e = f(i, j, &mut g);
                    if e != 0.0 {
                        for r in 0..dim {
                            dirs[i * dim + r] += g[r];
                            dirs[j * dim + r] -= g[r];
                        }
                        norms[i] += e;
                        norms[j] += e;
                    }
                }
            }
            (dirs, norms)
        })
        .collect();

    let mut dirs = vec![0.0; n * dim];
    let mut norms = vec![0.0; n];
    for (pd, pn) in parts {
        for (d, p) in dirs.iter_mut().zip(&pd) {
            *d += p;
        }
        for (m, p) in norms.iter_mut().zip(&pn) {
            *m += p;
        }
    }
    (dirs, norms)
}

/// Deterministic sum of a symmetric scalar over unordered pairs i < j.
/// Same blocking scheme as `pair_reduce`; block totals are combined with
/// compensated summation in index order.
pub(crate) fn pair_scalar_reduce<F>(n: usize, f: F) -> f64
where
    F: Fn(usize, usize) -> f64 + Sync,
{
    let nblocks = n.div_ceil(BLOCK);
    let parts: Vec<f64> = (0..nblocks)
        .into_par_iter()
        .map(|b| {
            let lo = b * BLOCK;
            let hi = ((b + 1) * BLOCK).min(n);
            let mut acc = 0.0;
            for i in lo..hi {
                for j in (i + 1)..n {
                    acc += f(i, j);
                }
            }
            acc
        })
        .collect();

    // Neumaier compensation across blocks
    let mut sum = 0.0;
    let mut comp = 0.0;
    for p in parts {
        let t = sum + p;
        if sum.abs() >= p.abs() {
            comp += (sum - t) + p;
        } else {
            comp += (p - t) + sum;
        }
        sum = t;
    }
    sum + comp
}
