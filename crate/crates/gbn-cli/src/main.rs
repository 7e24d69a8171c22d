//! Command-line front end: point-set optimization, stippling,
//! reconstruction, spectra, integration benchmarks, and zone-plate test
//! images. Exit codes: 0 success, 1 runtime or I/O failure, 2 usage.

mod pgm;

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use gbn::{
    default_fmax, optimize_adaptive, optimize_bounded, optimize_step, optimize_uniform,
    periodogram, radial_profile, random_init, read_points, reconstruct, shape_factors,
    variance_sweep, write_points, DensityMap, Domain, IntegrandFamily, KernelConfig,
    OptimizeConfig, OptimizeTrace, PointSet, Sampler, ShapeFactors,
};

#[derive(Parser)]
#[command(
    name = "gbn",
    version,
    about = "Gaussian blue-noise point sets: optimization, spectra, stippling, integration"
)]
struct Cli {
    /// Cap on worker threads (overrides the GBN_THREADS variable)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Optimize a blue-noise set on the torus or in the closed unit box
    Optimize(OptimizeArgs),
    /// Place density-adaptive points over a grayscale image
    Stipple(StippleArgs),
    /// Render the fitted kernel field of a point file as an image
    Reconstruct(ReconstructArgs),
    /// Power-spectrum image of a 2D point file
    Spectrum(SpectrumArgs),
    /// Radially averaged power spectrum as CSV
    Radial(RadialArgs),
    /// Monte Carlo integration variance sweep as CSV
    Bench(BenchArgs),
    /// Optimize a set whose spectrum is suppressed up to a harmonic cut
    Stepbn(StepbnArgs),
    /// Resample a zone plate through a point set
    Zoneplate(ZoneplateArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DomainArg {
    Torus,
    Box,
}

#[derive(Clone, Copy, ValueEnum)]
enum SamplerArg {
    Gbn,
    Random,
    Stratified,
}

impl From<SamplerArg> for Sampler {
    fn from(v: SamplerArg) -> Self {
        match v {
            SamplerArg::Gbn => Sampler::Gbn,
            SamplerArg::Random => Sampler::Random,
            SamplerArg::Stratified => Sampler::Stratified,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    GaussianSum,
    Halfspace,
}

impl From<FamilyArg> for IntegrandFamily {
    fn from(v: FamilyArg) -> Self {
        match v {
            FamilyArg::GaussianSum => IntegrandFamily::GaussianSum,
            FamilyArg::Halfspace => IntegrandFamily::Halfspace,
        }
    }
}

#[derive(Args)]
struct OptimizeArgs {
    /// Point count
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Kernel width relative to the mean spacing n^(-1/dim)
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 10_000)]
    iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = DomainArg::Torus)]
    domain: DomainArg,
    /// Output point file
    #[arg(long)]
    out: PathBuf,
    /// Optional CSV of descent checkpoints
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct StippleArgs {
    /// Grayscale PGM (P2 or P5, 8- or 16-bit)
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 2_000)]
    iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Treat dark pixels as dense (ink convention); default is
    /// brightness-as-density
    #[arg(long)]
    invert: bool,
    /// Per-axis cap on the attraction-field grid the image is averaged to
    #[arg(long, default_value_t = 64)]
    grid: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReconstructArgs {
    /// Input point file (2D)
    #[arg(long)]
    points: PathBuf,
    #[arg(long, default_value_t = 512)]
    width: usize,
    /// Defaults to --width
    #[arg(long)]
    height: Option<usize>,
    /// Kernel width relative to the mean spacing
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Shape-fitting passes before rendering
    #[arg(long, default_value_t = 10)]
    fit_iters: usize,
    /// Output PGM (16-bit)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SpectrumArgs {
    #[arg(long)]
    points: PathBuf,
    /// Frequency range per axis; default scales with the point count
    #[arg(long)]
    fmax: Option<usize>,
    /// Output PGM (16-bit, log-mapped power)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RadialArgs {
    #[arg(long)]
    points: PathBuf,
    #[arg(long)]
    fmax: Option<usize>,
    /// Output CSV: r2,r,power,count
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_enum)]
    sampler: SamplerArg,
    #[arg(long, value_enum)]
    family: FamilyArg,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Comma-separated point counts
    #[arg(long, value_delimiter = ',', default_values_t = [16usize, 64, 256, 1024])]
    ns: Vec<usize>,
    #[arg(long, default_value_t = 20)]
    instances: usize,
    #[arg(long, default_value_t = 100)]
    randomizations: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for cached optimized sets
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Output CSV
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct StepbnArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Highest harmonic (per axis) the kernel suppresses
    #[arg(long)]
    cut: usize,
    #[arg(long, default_value_t = 10_000)]
    iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ZoneplateArgs {
    /// Input point file (2D)
    #[arg(long)]
    points: PathBuf,
    #[arg(long, default_value_t = 512)]
    resolution: usize,
    /// Radial frequency (cycles per unit) reached at the image corner;
    /// default 2 sqrt(n)
    #[arg(long)]
    max_freq: Option<f64>,
    /// Splat kernel width; default 0.35 / sqrt(n)
    #[arg(long)]
    splat: Option<f64>,
    /// Output PGM (16-bit)
    #[arg(long)]
    out: PathBuf,
}

fn main() {
    let cli = Cli::parse();
    setup_threads(cli.threads);
    if let Err(e) = run(cli.cmd) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn setup_threads(flag: Option<usize>) {
    let env = std::env::var("GBN_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok());
    if let Some(t) = flag.or(env).filter(|&t| t > 0) {
        // ignore the error if a pool already exists (tests, repeated init)
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
}

fn run(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Optimize(a) => cmd_optimize(a),
        Cmd::Stipple(a) => cmd_stipple(a),
        Cmd::Reconstruct(a) => cmd_reconstruct(a),
        Cmd::Spectrum(a) => cmd_spectrum(a),
        Cmd::Radial(a) => cmd_radial(a),
        Cmd::Bench(a) => cmd_bench(a),
        Cmd::Stepbn(a) => cmd_stepbn(a),
        Cmd::Zoneplate(a) => cmd_zoneplate(a),
    }
}

fn cmd_optimize(a: OptimizeArgs) -> Result<()> {
    let kcfg = KernelConfig::new(a.sigma, a.n, a.dim)?;
    let ocfg = OptimizeConfig::new(a.seed).with_iterations(a.iters);
    let start = random_init(a.n, a.dim, a.seed)?;
    let (points, trace) = match a.domain {
        DomainArg::Torus => optimize_uniform(&start, &kcfg, &ocfg)?,
        DomainArg::Box => {
            let boxed = PointSet::from_coords(a.dim, Domain::Box, start.coords().to_vec())?;
            optimize_bounded(&boxed, &kcfg, &ocfg)?
        }
    };
    write_points(&a.out, &points)?;
    if let Some(path) = &a.trace {
        write_trace(path, &trace)?;
    }
    Ok(())
}

fn write_trace(path: &std::path::Path, trace: &OptimizeTrace) -> Result<()> {
    let mut csv = String::from("iteration,energy,max_displacement\n");
    for r in &trace.records {
        writeln!(csv, "{},{:e},{:e}", r.iteration, r.energy, r.max_displacement)?;
    }
    fs::write(path, csv).with_context(|| format!("writing {}", path.display()))
}

fn cmd_stipple(a: StippleArgs) -> Result<()> {
    if a.grid == 0 {
        bail!("grid cap must be >= 1");
    }
    let img = pgm::read_gray(&a.image)?;
    let mut vals = img.pixels;
    if a.invert {
        for v in &mut vals {
            *v = 1.0 - *v;
        }
    }
    let (w, h, vals) = shrink_to_grid(img.width, img.height, vals, a.grid);
    let density = DensityMap::from_values(w, h, vals)?;
    let kcfg = KernelConfig::new(a.sigma, a.n, 2)?;
    let ocfg = OptimizeConfig::new(a.seed).with_iterations(a.iters);
    let (points, _, _) = optimize_adaptive(&density, a.n, &kcfg, &ocfg)?;
    write_points(&a.out, &points)?;
    Ok(())
}

/// Box-average an image down so neither axis exceeds `cap` pixels.
fn shrink_to_grid(w: usize, h: usize, vals: Vec<f64>, cap: usize) -> (usize, usize, Vec<f64>) {
    let longest = w.max(h);
    if longest <= cap {
        return (w, h, vals);
    }
    let scale = cap as f64 / longest as f64;
    let w2 = ((w as f64 * scale).round() as usize).max(1);
    let h2 = ((h as f64 * scale).round() as usize).max(1);
    let mut sums = vec![0.0f64; w2 * h2];
    let mut counts = vec![0u32; w2 * h2];
    for iy in 0..h {
        let ty = (iy * h2 / h).min(h2 - 1);
        for ix in 0..w {
            let tx = (ix * w2 / w).min(w2 - 1);
            sums[ty * w2 + tx] += vals[iy * w + ix];
            counts[ty * w2 + tx] += 1;
        }
    }
    for (s, &c) in sums.iter_mut().zip(&counts) {
        if c > 0 {
            *s /= c as f64;
        }
    }
    (w2, h2, sums)
}

fn cmd_reconstruct(a: ReconstructArgs) -> Result<()> {
    let points = read_points(&a.points, Domain::Torus)?;
    if points.dim() != 2 {
        bail!("reconstruction needs a 2D point file");
    }
    let height = a.height.unwrap_or(a.width);
    let kcfg = KernelConfig::new(a.sigma, points.n(), 2)?;
    let shapes = if points.n() >= 2 {
        shape_factors(&points, kcfg.sigma_abs, a.fit_iters)?
    } else {
        ShapeFactors::from_values(vec![1.0])?
    };
    let field = reconstruct(&points, &shapes, &kcfg, a.width, height, None)?;
    pgm::write_gray16(&a.out, a.width, height, field.values())
}

fn cmd_spectrum(a: SpectrumArgs) -> Result<()> {
    let points = read_points(&a.points, Domain::Torus)?;
    if points.dim() != 2 {
        bail!("spectrum images need a 2D point file");
    }
    let fmax = a.fmax.unwrap_or_else(|| default_fmax(points.n(), 2));
    let p = periodogram(&points, fmax)?;
    let m = fmax as i64;
    let side = 2 * fmax + 1;
    let mut raw = vec![0.0f64; side * side];
    let mut pmax = 0.0f64;
    for fy in -m..=m {
        for fx in -m..=m {
            let pw = p.power_at(&[fx, fy])?;
            // rows top-down: positive fy on top
            let (ix, iy) = ((fx + m) as usize, (m - fy) as usize);
            if fx == 0 && fy == 0 {
                continue; // DC carries the point count; blank it
            }
            raw[iy * side + ix] = pw;
            pmax = pmax.max(pw);
        }
    }
    if !(pmax > 0.0) {
        bail!("spectrum is identically zero");
    }
    // log map over 8 decades below the peak
    let floor = pmax * 1e-8;
    let lg_floor = floor.ln();
    let span = pmax.ln() - lg_floor;
    let img: Vec<f64> = raw
        .iter()
        .map(|&pw| if pw > 0.0 { (pw.max(floor).ln() - lg_floor) / span } else { 0.0 })
        .collect();
    pgm::write_gray16(&a.out, side, side, &img)
}

fn cmd_radial(a: RadialArgs) -> Result<()> {
    let points = read_points(&a.points, Domain::Torus)?;
    let fmax = a.fmax.unwrap_or_else(|| default_fmax(points.n(), points.dim()));
    let profile = radial_profile(&periodogram(&points, fmax)?);
    let mut csv = String::from("r2,r,power,count\n");
    for e in &profile.entries {
        writeln!(csv, "{},{},{:e},{}", e.r2, e.r, e.mean_power, e.count)?;
    }
    fs::write(&a.out, csv).with_context(|| format!("writing {}", a.out.display()))
}

fn cmd_bench(a: BenchArgs) -> Result<()> {
    let report = variance_sweep(
        a.sampler.into(),
        a.family.into(),
        a.dim,
        &a.ns,
        a.instances,
        a.randomizations,
        a.seed,
        a.cache_dir.as_deref(),
    )?;
    fs::write(&a.out, report.to_csv()).with_context(|| format!("writing {}", a.out.display()))
}

fn cmd_stepbn(a: StepbnArgs) -> Result<()> {
    let start = random_init(a.n, a.dim, a.seed)?;
    let ocfg = OptimizeConfig::new(a.seed).with_iterations(a.iters);
    let points = optimize_step(&start, a.cut, &ocfg)?;
    write_points(&a.out, &points)
        .with_context(|| format!("writing {}", a.out.display()))?;
    Ok(())
}

fn cmd_zoneplate(a: ZoneplateArgs) -> Result<()> {
    let points = read_points(&a.points, Domain::Torus)?;
    if points.dim() != 2 {
        bail!("zone plates need a 2D point file");
    }
    if a.resolution == 0 {
        bail!("resolution must be >= 1");
    }
    let n = points.n() as f64;
    let max_freq = a.max_freq.unwrap_or(2.0 * n.sqrt());
    let splat = a.splat.unwrap_or(0.35 / n.sqrt());
    if !(max_freq > 0.0) || !(splat > 0.0) {
        bail!("max-freq and splat must be positive");
    }
    let res = a.resolution;
    // phase c*r^2 about the image center; instantaneous radial frequency
    // c*r/pi reaches max_freq at the corner
    let rmax = 0.5f64.sqrt();
    let c = std::f64::consts::PI * max_freq / rmax;
    let inv2s2 = 1.0 / (2.0 * splat * splat);
    let reach = (5.0 * splat * res as f64).ceil() as i64; // pixels
    let mut num = vec![0.0f64; res * res];
    let mut den = vec![0.0f64; res * res];
    for pt in points.iter_points() {
        let dxc = pt[0] - 0.5;
        let dyc = pt[1] - 0.5;
        let value = 0.5 + 0.5 * (c * (dxc * dxc + dyc * dyc)).sin();
        let px = pt[0] * res as f64;
        let py = pt[1] * res as f64;
        let ix0 = px.floor() as i64;
        let iy0 = py.floor() as i64;
        for iy in iy0 - reach..=iy0 + reach {
            let wy = iy.rem_euclid(res as i64) as usize;
            let cy = (iy as f64 + 0.5) / res as f64;
            let dy = cy - pt[1];
            for ix in ix0 - reach..=ix0 + reach {
                let wx = ix.rem_euclid(res as i64) as usize;
                let cx = (ix as f64 + 0.5) / res as f64;
                let dx = cx - pt[0];
                let w = (-(dx * dx + dy * dy) * inv2s2).exp();
                num[wy * res + wx] += w * value;
                den[wy * res + wx] += w;
            }
        }
    }
    let img: Vec<f64> = num
        .iter()
        .zip(&den)
        .map(|(&s, &w)| if w > 1e-12 { s / w } else { 0.5 })
        .collect();
    pgm::write_gray16(&a.out, res, res, &img)
}
