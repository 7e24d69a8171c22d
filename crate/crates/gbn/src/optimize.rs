use crate::error::{invalid, Result};
use crate::points::{Domain, PointSet};
use crate::seed::{rng_for, Seed};
use rand::Rng;

/// Settings shared by all point-set optimizers.
#[derive(Debug, Clone)]
pub struct OptimizeConfig {
    /// Number of Jacobi iterations.
    pub iterations: usize,
    /// Initial relaxation factor applied to every normalized step.
    pub lambda: f64,
    /// Cap on the Euclidean length of a single point move. Defaults to
    /// 0.5 * n^(-1/dim) when unset.
    pub max_move: Option<f64>,
    /// Energy is re-evaluated every this many iterations; an increase
    /// rolls the block back and halves lambda.
    pub check_every: usize,
    /// Seed for tie-breaking jitter (and any other randomness a specific
    /// optimizer needs during the run).
    pub seed: Seed,
}

impl OptimizeConfig {
    pub fn new(seed: Seed) -> Self {
        Self {
            iterations: 10_000,
            lambda: 1.0,
            max_move: None,
            check_every: 100,
            seed,
        }
    }

    pub fn with_iterations(mut self, iterations: usize) -> Self {
        self.iterations = iterations;
        self
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_max_move(mut self, max_move: f64) -> Self {
        self.max_move = Some(max_move);
        self
    }

    pub fn with_check_every(mut self, check_every: usize) -> Self {
        self.check_every = check_every;
        self
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.lambda <= 0.0 || !self.lambda.is_finite() {
            return Err(invalid("lambda must be positive and finite"));
        }
        if let Some(m) = self.max_move {
            if m <= 0.0 || !m.is_finite() {
                return Err(invalid("max_move must be positive and finite"));
            }
        }
        if self.check_every == 0 {
            return Err(invalid("check_every must be at least 1"));
        }
        Ok(())
    }
}

/// One accepted checkpoint of a descent run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub iteration: usize,
    pub energy: f64,
    /// Largest single-point move (Euclidean) seen since the previous
    /// accepted checkpoint.
    pub max_displacement: f64,
}

/// Checkpoint history of a descent run. Energies are non-increasing by
/// construction: a block whose energy rises is rolled back and retried
/// with a smaller relaxation factor.
#[derive(Debug, Clone, Default)]
pub struct OptimizeTrace {
    pub records: Vec<TraceRecord>,
    /// Relaxation factor in effect when the run finished.
    pub final_lambda: f64,
    /// Number of rejected blocks.
    pub rollbacks: usize,
}

impl OptimizeTrace {
    pub fn final_energy(&self) -> f64 {
        self.records.last().map(|r| r.energy).unwrap_or(f64::NAN)
    }
}

/// Problem-specific parts of a Jacobi descent: the move field, the energy
/// used for acceptance checks, and the domain constraint. Optimizers with
/// extra per-run state (e.g. shape factors refreshed each iteration) hook
/// into `before_step` / `save` / `restore`.
pub(crate) trait Dynamics {
    /// Fill `dirs` (n*dim, row-major) with the unnormalized move direction
    /// for every point and `norms` (n) with the positive normalizer that
    /// divides it.
    fn directions(&mut self, coords: &[f64], dirs: &mut Vec<f64>, norms: &mut Vec<f64>);

    /// Total energy of a configuration, on any fixed scale that is
    /// monotone in the true energy.
    fn energy(&mut self, coords: &[f64]) -> f64;

    /// Constrain one coordinate back into the domain.
    fn constrain(&self, x: f64) -> f64;

    /// Called once per iteration before `directions`.
    fn before_step(&mut self, _coords: &[f64]) {}

    /// Refresh auxiliary state at an accepted checkpoint (and once before
    /// the initial baseline). Return true when the refresh moves the
    /// energy scale so the baseline is re-measured. Keeping refreshes at
    /// checkpoint boundaries keeps the within-block acceptance comparison
    /// a pure position test; auxiliary jumps never trigger rollbacks.
    fn checkpoint_update(&mut self, _coords: &[f64]) -> bool {
        false
    }

    /// Snapshot auxiliary state at an accepted checkpoint.
    fn save(&mut self) {}

    /// Restore auxiliary state after a rejected block.
    fn restore(&mut self) {}
}

/// Relative distance under which two points count as coincident.
const COINCIDENT_REL: f64 = 1e-12;
/// Relative magnitude of the separating jitter.
const JITTER_REL: f64 = 1e-9;
/// Lambda is not halved below this fraction of its start value; a block
/// that still raises the energy at that scale is accepted as stagnation.
const LAMBDA_FLOOR_REL: f64 = 1e-12;
/// Normalizers at or below this threshold leave the point unmoved.
const NORM_FLOOR: f64 = 1e-300;

fn separate_coincident(coords: &mut [f64], dim: usize, domain: Domain, seed: Seed) {
    let n = coords.len() / dim;
    let mean_spacing = (n as f64).powf(-1.0 / dim as f64);
    let tol2 = (COINCIDENT_REL * mean_spacing).powi(2);
    let amp = JITTER_REL * mean_spacing;
    for j in 1..n {
        for i in 0..j {
            let mut d2 = 0.0;
            for r in 0..dim {
                let mut d = coords[i * dim + r] - coords[j * dim + r];
                if domain == Domain::Torus {
                    d = crate::points::min_image(d);
                }
                d2 += d * d;
            }
            if d2 < tol2 {
                let mut rng = rng_for(seed, j as u64);
                // random direction, rejection-free via Gaussian-ish sum
                let mut v: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>() - 0.5).collect();
                let len = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-30);
                for x in &mut v {
                    *x *= amp / len;
                }
                for r in 0..dim {
                    let moved = coords[j * dim + r] + v[r];
                    coords[j * dim + r] = match domain {
                        Domain::Torus => crate::points::toroidal_wrap(moved),
                        Domain::Box => moved.clamp(0.0, 1.0),
                    };
                }
                break;
            }
        }
    }
}

/// Normalized Jacobi descent with periodic energy checks, rollback on
/// increase, and lambda halving. Drives every optimizer in the crate.
pub(crate) fn run_descent<D: Dynamics>(
    points: &PointSet,
    dynamics: &mut D,
    cfg: &OptimizeConfig,
) -> Result<(PointSet, OptimizeTrace)> {
    cfg.validate()?;
    let n = points.n();
    let dim = points.dim();
    let domain = points.domain();
    let mut coords = points.coords().to_vec();
    separate_coincident(&mut coords, dim, domain, cfg.seed);

    let max_move = cfg
        .max_move
        .unwrap_or_else(|| 0.5 * (n as f64).powf(-1.0 / dim as f64));
    let mut lambda = cfg.lambda;
    let lambda_floor = cfg.lambda * LAMBDA_FLOOR_REL;

    let mut trace = OptimizeTrace {
        records: Vec::new(),
        final_lambda: lambda,
        rollbacks: 0,
    };

    let mut checkpoint = coords.clone();
    dynamics.checkpoint_update(&coords);
    dynamics.save();
    let mut checkpoint_energy = dynamics.energy(&coords);
    trace.records.push(TraceRecord {
        iteration: 0,
        energy: checkpoint_energy,
        max_displacement: 0.0,
    });

    let mut dirs: Vec<f64> = Vec::new();
    let mut norms: Vec<f64> = Vec::new();
    let mut block_start = 0usize; // iterations completed at last accepted checkpoint
    let mut block_max_disp = 0.0f64;
    let mut it = 0usize;
    while it < cfg.iterations {
        dynamics.before_step(&coords);
        dynamics.directions(&coords, &mut dirs, &mut norms);
        for i in 0..n {
            let m = norms[i];
            if m <= NORM_FLOOR {
                continue;
            }
            let row = &mut dirs[i * dim..(i + 1) * dim];
            let mut len2 = 0.0;
            for r in 0..dim {
                row[r] *= lambda / m;
                len2 += row[r] * row[r];
            }
            let len = len2.sqrt();
            let scale = if len > max_move { max_move / len } else { 1.0 };
            block_max_disp = block_max_disp.max(len * scale);
            for r in 0..dim {
                let x = coords[i * dim + r] + row[r] * scale;
                coords[i * dim + r] = dynamics.constrain(x);
            }
        }
        it += 1;

        if it % cfg.check_every == 0 || it == cfg.iterations {
            let e = dynamics.energy(&coords);
            if e > checkpoint_energy && lambda > lambda_floor {
                coords.copy_from_slice(&checkpoint);
                dynamics.restore();
                lambda *= 0.5;
                trace.rollbacks += 1;
                it = block_start;
                block_max_disp = 0.0;
            } else {
                checkpoint.copy_from_slice(&coords);
                let mut accepted_energy = e;
                if dynamics.checkpoint_update(&coords) {
                    accepted_energy = dynamics.energy(&coords);
                }
                dynamics.save();
                checkpoint_energy = accepted_energy;
                block_start = it;
                trace.records.push(TraceRecord {
                    iteration: it,
                    energy: accepted_energy,
                    max_displacement: block_max_disp,
                });
                block_max_disp = 0.0;
            }
        }
    }
    trace.final_lambda = lambda;

    let out = PointSet::from_parts_unchecked(dim, domain, coords);
    Ok((out, trace))
}
