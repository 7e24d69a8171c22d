use std::fs;
use std::path::Path;
use std::process::Command;

fn gbn() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gbn"))
}

fn run_ok(args: &[&str]) {
    let out = gbn().args(args).output().unwrap();
    assert!(
        out.status.success(),
        "gbn {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn point_rows(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|l| l.split_whitespace().map(|t| t.parse().unwrap()).collect())
        .collect()
}

/// Minimal 16-bit P5 reader for checking emitted images.
fn read_pgm16(path: &Path) -> (usize, usize, Vec<u16>) {
    let data = fs::read(path).unwrap();
    let header = String::from_utf8_lossy(&data[..32]).to_string();
    let mut tok = header.split_ascii_whitespace();
    assert_eq!(tok.next().unwrap(), "P5");
    let w: usize = tok.next().unwrap().parse().unwrap();
    let h: usize = tok.next().unwrap().parse().unwrap();
    let maxval: usize = tok.next().unwrap().parse().unwrap();
    assert_eq!(maxval, 65535);
    let body = data.len() - 2 * w * h;
    let px = data[body..]
        .chunks_exact(2)
        .map(|b| u16::from_be_bytes([b[0], b[1]]))
        .collect();
    (w, h, px)
}

#[test]
fn optimize_writes_the_requested_shape_and_repeats_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.txt");
    let b = dir.path().join("b.txt");
    let trace = dir.path().join("t.csv");
    for out in [&a, &b] {
        run_ok(&[
            "optimize",
            "--n",
            "64",
            "--iters",
            "80",
            "--seed",
            "3",
            "--out",
            out.to_str().unwrap(),
            "--trace",
            trace.to_str().unwrap(),
        ]);
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let rows = point_rows(&a);
    assert_eq!(rows.len(), 64);
    assert!(rows.iter().all(|r| r.len() == 2));
    let t = fs::read_to_string(&trace).unwrap();
    assert!(t.starts_with("iteration,energy,max_displacement\n"));
    assert!(t.lines().count() >= 2);
}

#[test]
fn box_domain_points_stay_inside() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("box.txt");
    run_ok(&[
        "optimize",
        "--n",
        "48",
        "--iters",
        "60",
        "--domain",
        "box",
        "--out",
        out.to_str().unwrap(),
    ]);
    for row in point_rows(&out) {
        for v in row {
            assert!((0.0..=1.0).contains(&v), "{v}");
        }
    }
}

#[test]
fn eight_dimensional_output_has_eight_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d8.txt");
    run_ok(&[
        "optimize",
        "--n",
        "32",
        "--dim",
        "8",
        "--iters",
        "10",
        "--out",
        out.to_str().unwrap(),
    ]);
    let rows = point_rows(&out);
    assert_eq!(rows.len(), 32);
    assert!(rows.iter().all(|r| r.len() == 8));
}

#[test]
fn usage_errors_exit_with_code_2() {
    let out = gbn().args(["optimize", "--out", "x.txt"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn io_errors_exit_with_code_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = gbn()
        .args([
            "spectrum",
            "--points",
            dir.path().join("missing.txt").to_str().unwrap(),
            "--out",
            dir.path().join("s.pgm").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn radial_csv_of_a_tiny_file_has_rows() {
    let dir = tempfile::tempdir().unwrap();
    let pts = dir.path().join("p.txt");
    fs::write(&pts, "0.1 0.1\n0.6 0.6\n").unwrap();
    let out = dir.path().join("r.csv");
    run_ok(&[
        "radial",
        "--points",
        pts.to_str().unwrap(),
        "--fmax",
        "4",
        "--out",
        out.to_str().unwrap(),
    ]);
    let csv = fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "r2,r,power,count");
    assert!(lines.count() >= 1);
}

#[test]
fn spectrum_of_a_regular_grid_shows_the_comb() {
    let dir = tempfile::tempdir().unwrap();
    let pts = dir.path().join("grid.txt");
    let mut body = String::new();
    for iy in 0..16 {
        for ix in 0..16 {
            body.push_str(&format!(
                "{} {}\n",
                (ix as f64 + 0.5) / 16.0,
                (iy as f64 + 0.5) / 16.0
            ));
        }
    }
    fs::write(&pts, body).unwrap();
    let img = dir.path().join("s.pgm");
    run_ok(&[
        "spectrum",
        "--points",
        pts.to_str().unwrap(),
        "--fmax",
        "20",
        "--out",
        img.to_str().unwrap(),
    ]);
    let (w, h, px) = read_pgm16(&img);
    assert_eq!((w, h), (41, 41));
    // comb line at f = (16, 0): brightest; neighbor (15, 0) empty
    let comb = px[20 * 41 + (16 + 20)] as f64;
    let neighbor = px[20 * 41 + (15 + 20)] as f64;
    assert!(comb > 0.9 * 65535.0, "comb {comb}");
    assert!(neighbor < 0.2 * comb, "neighbor {neighbor} vs comb {comb}");
}

#[test]
fn bench_csv_header_matches_the_contract_and_repeats() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        run_ok(&[
            "bench",
            "--sampler",
            "random",
            "--family",
            "halfspace",
            "--ns",
            "4,16",
            "--instances",
            "3",
            "--randomizations",
            "8",
            "--seed",
            "1",
            "--out",
            out.to_str().unwrap(),
        ]);
    }
    let csv = fs::read_to_string(&a).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "sampler,family,dim,N,variance,instances,randomizations"
    );
    assert_eq!(lines.count(), 2);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn stipple_then_reconstruct_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("flat.pgm");
    let mut pgm = String::from("P2\n8 8\n255\n");
    for _ in 0..64 {
        pgm.push_str("200\n");
    }
    fs::write(&img, pgm).unwrap();
    let pts = dir.path().join("stipple.txt");
    run_ok(&[
        "stipple",
        "--image",
        img.to_str().unwrap(),
        "--n",
        "32",
        "--iters",
        "120",
        "--out",
        pts.to_str().unwrap(),
    ]);
    assert_eq!(point_rows(&pts).len(), 32);
    let recon = dir.path().join("recon.pgm");
    run_ok(&[
        "reconstruct",
        "--points",
        pts.to_str().unwrap(),
        "--width",
        "24",
        "--height",
        "24",
        "--out",
        recon.to_str().unwrap(),
    ]);
    let (w, h, px) = read_pgm16(&recon);
    assert_eq!((w, h), (24, 24));
    assert!(px.iter().any(|&v| v > 0));
}

#[test]
fn reconstructing_a_single_point_gives_one_blob() {
    let dir = tempfile::tempdir().unwrap();
    let pts = dir.path().join("one.txt");
    fs::write(&pts, "0.5 0.5\n").unwrap();
    let out = dir.path().join("blob.pgm");
    run_ok(&[
        "reconstruct",
        "--points",
        pts.to_str().unwrap(),
        "--width",
        "32",
        "--sigma",
        "0.1",
        "--out",
        out.to_str().unwrap(),
    ]);
    let (w, h, px) = read_pgm16(&out);
    assert_eq!((w, h), (32, 32));
    // peak at the center, dark at the corner
    let center = px[16 * 32 + 16];
    let corner = px[0];
    assert!(center > 60000, "center {center}");
    assert!(corner < center / 4, "corner {corner}");
}

#[test]
fn stepbn_writes_the_requested_set() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("step.txt");
    run_ok(&[
        "stepbn",
        "--n",
        "16",
        "--dim",
        "1",
        "--cut",
        "4",
        "--iters",
        "300",
        "--out",
        out.to_str().unwrap(),
    ]);
    let rows = point_rows(&out);
    assert_eq!(rows.len(), 16);
    assert!(rows.iter().all(|r| r.len() == 1));
}

#[test]
fn zoneplate_rejects_non_2d_points() {
    let dir = tempfile::tempdir().unwrap();
    let pts = dir.path().join("d1.txt");
    fs::write(&pts, "0.1\n0.5\n0.9\n").unwrap();
    let out = gbn()
        .args([
            "zoneplate",
            "--points",
            pts.to_str().unwrap(),
            "--out",
            dir.path().join("z.pgm").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    // empty file is an error too
    let empty = dir.path().join("empty.txt");
    fs::write(&empty, "# nothing\n").unwrap();
    let out = gbn()
        .args([
            "zoneplate",
            "--points",
            empty.to_str().unwrap(),
            "--out",
            dir.path().join("z.pgm").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

/// Ring coherence: split an annulus about (cx, cy) into thin sub-rings and
/// return the standard deviation of the sub-ring means. Coherent rings
/// register; incoherent splat noise averages out within each sub-ring.
fn radial_structure(px: &[u16], res: usize, cx: f64, cy: f64, rlo: f64, rhi: f64) -> f64 {
    let width = 0.005;
    let nb = ((rhi - rlo) / width).ceil() as usize;
    let mut sums = vec![0.0f64; nb];
    let mut counts = vec![0usize; nb];
    for iy in 0..res {
        for ix in 0..res {
            let dx = (ix as f64 + 0.5) / res as f64 - cx;
            let dy = (iy as f64 + 0.5) / res as f64 - cy;
            let r = (dx * dx + dy * dy).sqrt();
            if r >= rlo && r < rhi {
                let b = ((r - rlo) / width) as usize;
                sums[b] += px[iy * res + ix] as f64 / 65535.0;
                counts[b] += 1;
            }
        }
    }
    let means: Vec<f64> = sums
        .iter()
        .zip(&counts)
        .filter(|(_, &c)| c >= 10)
        .map(|(&s, &c)| s / c as f64)
        .collect();
    let m = means.iter().sum::<f64>() / means.len() as f64;
    (means.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / means.len() as f64).sqrt()
}

#[test]
fn zoneplate_rings_fade_for_blue_noise_but_alias_for_the_grid() {
    let dir = tempfile::tempdir().unwrap();
    let gbn_pts = dir.path().join("gbn.txt");
    run_ok(&[
        "optimize",
        "--n",
        "1024",
        "--iters",
        "2000",
        "--seed",
        "5",
        "--out",
        gbn_pts.to_str().unwrap(),
    ]);
    let grid_pts = dir.path().join("grid.txt");
    let mut body = String::new();
    for iy in 0..32 {
        for ix in 0..32 {
            body.push_str(&format!(
                "{} {}\n",
                (ix as f64 + 0.5) / 32.0,
                (iy as f64 + 0.5) / 32.0
            ));
        }
    }
    fs::write(&grid_pts, body).unwrap();

    let render = |pts: &Path, max_freq: &str, img: &Path| {
        run_ok(&[
            "zoneplate",
            "--points",
            pts.to_str().unwrap(),
            "--resolution",
            "256",
            "--max-freq",
            max_freq,
            "--splat",
            "0.025",
            "--out",
            img.to_str().unwrap(),
        ]);
        let (w, h, px) = read_pgm16(img);
        assert_eq!((w, h), (256, 256));
        px
    };

    // chirp reaching 2x the set's Nyquist (16 cycles/unit) at the corner:
    // rings below Nyquist stay, rings beyond fade into noise
    let img = dir.path().join("fade.pgm");
    let px = render(&gbn_pts, "32", &img);
    let near = radial_structure(&px, 256, 0.5, 0.5, 0.06, 0.23);
    let far = radial_structure(&px, 256, 0.5, 0.5, 0.49, 0.57);
    assert!(
        far < 0.1 * near,
        "beyond-Nyquist ring structure {far} vs in-band {near}"
    );

    // steep chirp sweeping through the grid's lattice frequency: the
    // (32, 0) replica goes to zero frequency at x = 0.5 + 32 * rmax / 64,
    // where the grid shows a coherent ghost plate and blue noise does not
    let ghost_of = |pts: &Path| {
        let img = dir.path().join("ghost.pgm");
        let px = render(pts, "64", &img);
        radial_structure(&px, 256, 0.8536, 0.5, 0.02, 0.10)
    };
    let gbn_ghost = ghost_of(&gbn_pts);
    let grid_ghost = ghost_of(&grid_pts);
    assert!(
        grid_ghost > 3.0 * gbn_ghost,
        "grid moire {grid_ghost} vs blue-noise residue {gbn_ghost}"
    );
}

#[test]
fn thread_cap_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("t1.txt");
    let b = dir.path().join("t2.txt");
    run_ok(&[
        "optimize", "--n", "64", "--iters", "60", "--seed", "9", "--threads", "1", "--out",
        a.to_str().unwrap(),
    ]);
    let out = gbn()
        .args([
            "optimize", "--n", "64", "--iters", "60", "--seed", "9", "--out",
            b.to_str().unwrap(),
        ])
        .env("GBN_THREADS", "2")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}
