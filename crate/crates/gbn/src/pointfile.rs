//! Plain-text point files: one point per line, whitespace-separated
//! coordinates, `#` starts a comment. The dimension is whatever column
//! count the first data line has. Values are written with 17 significant
//! digits so a write/read round trip is bit-exact.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{invalid, Error, Result};
use crate::points::{Domain, PointSet};

pub fn write_points(path: &Path, points: &PointSet) -> Result<()> {
    let file = File::create(path)?;
    let mut out = BufWriter::new(file);
    let dim = points.dim();
    for p in points.iter_points() {
        for r in 0..dim {
            if r > 0 {
                out.write_all(b" ")?;
            }
            write!(out, "{:.16e}", p[r])?;
        }
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_points(path: &Path, domain: Domain) -> Result<PointSet> {
    let file = File::open(path)?;
    let reader = BufReader::new(file);
    let mut coords: Vec<f64> = Vec::new();
    let mut dim = 0usize;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let data = match line.find('#') {
            Some(pos) => &line[..pos],
            None => &line[..],
        };
        let mut cols = 0usize;
        for tok in data.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| {
                Error::Parse(format!("{}:{}: bad number {tok:?}", path.display(), lineno + 1))
            })?;
            coords.push(v);
            cols += 1;
        }
        if cols == 0 {
            continue;
        }
        if dim == 0 {
            dim = cols;
        } else if cols != dim {
            return Err(Error::Parse(format!(
                "{}:{}: {cols} columns after lines with {dim}",
                path.display(),
                lineno + 1
            )));
        }
    }
    if dim == 0 {
        return Err(invalid(format!("{}: no points", path.display())));
    }
    PointSet::from_coords(dim, domain, coords)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::init::random_init;

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pts.txt");
        for dim in [1usize, 2, 4] {
            let pts = random_init(37, dim, 5 + dim as u64).unwrap();
            write_points(&path, &pts).unwrap();
            let back = read_points(&path, Domain::Torus).unwrap();
            assert_eq!(back.dim(), dim);
            assert_eq!(back.coords(), pts.coords());
        }
    }

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pts.txt");
        std::fs::write(
            &path,
            "# header\n\n0.25 0.5 # trailing note\n  \n0.75 0.125\n",
        )
        .unwrap();
        let pts = read_points(&path, Domain::Torus).unwrap();
        assert_eq!(pts.dim(), 2);
        assert_eq!(pts.coords(), &[0.25, 0.5, 0.75, 0.125]);
    }

    #[test]
    fn rejects_ragged_and_empty_files() {
        let dir = tempfile::tempdir().unwrap();
        let ragged = dir.path().join("ragged.txt");
        std::fs::write(&ragged, "0.1 0.2\n0.3\n").unwrap();
        assert!(read_points(&ragged, Domain::Torus).is_err());
        let empty = dir.path().join("empty.txt");
        std::fs::write(&empty, "# nothing\n").unwrap();
        assert!(read_points(&empty, Domain::Torus).is_err());
        let bad = dir.path().join("bad.txt");
        std::fs::write(&bad, "0.1 zebra\n").unwrap();
        assert!(read_points(&bad, Domain::Torus).is_err());
    }
}
