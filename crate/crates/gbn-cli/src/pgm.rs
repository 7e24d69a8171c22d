//! Minimal PGM support: P2/P5 reader (8- and 16-bit) and a 16-bit P5
//! writer. No external codecs.

use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};

pub struct Gray {
    pub width: usize,
    pub height: usize,
    /// row-major, top row first, values scaled to [0,1]
    pub pixels: Vec<f64>,
}

pub fn read_gray(path: &Path) -> Result<Gray> {
    let data = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    parse(&data).with_context(|| format!("parsing {}", path.display()))
}

fn parse(data: &[u8]) -> Result<Gray> {
    let mut pos = 0usize;
    let magic = token(data, &mut pos)?;
    let binary = match magic {
        b"P2" => false,
        b"P5" => true,
        _ => bail!("not a P2/P5 PGM file"),
    };
    let width: usize = ascii_int(token(data, &mut pos)?)?;
    let height: usize = ascii_int(token(data, &mut pos)?)?;
    let maxval: usize = ascii_int(token(data, &mut pos)?)?;
    if width == 0 || height == 0 {
        bail!("empty image");
    }
    if maxval == 0 || maxval > 65535 {
        bail!("unsupported maxval {maxval}");
    }
    let count = width * height;
    let scale = 1.0 / maxval as f64;
    let mut pixels = Vec::with_capacity(count);
    if binary {
        pos += 1; // the single whitespace byte after maxval
        let wide = maxval > 255;
        let need = count * if wide { 2 } else { 1 };
        let raw = data
            .get(pos..pos + need)
            .ok_or_else(|| anyhow!("truncated pixel data"))?;
        if wide {
            for b in raw.chunks_exact(2) {
                pixels.push(u16::from_be_bytes([b[0], b[1]]) as f64 * scale);
            }
        } else {
            for &b in raw {
                pixels.push(b as f64 * scale);
            }
        }
    } else {
        for _ in 0..count {
            pixels.push(ascii_int(token(data, &mut pos)?)? as f64 * scale);
        }
    }
    for p in &mut pixels {
        *p = p.min(1.0);
    }
    Ok(Gray {
        width,
        height,
        pixels,
    })
}

/// Next header token, skipping whitespace and # comments.
fn token<'a>(data: &'a [u8], pos: &mut usize) -> Result<&'a [u8]> {
    loop {
        while *pos < data.len() && data[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < data.len() && data[*pos] == b'#' {
            while *pos < data.len() && data[*pos] != b'\n' {
                *pos += 1;
            }
        } else {
            break;
        }
    }
    let start = *pos;
    while *pos < data.len() && !data[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        bail!("unexpected end of header");
    }
    Ok(&data[start..*pos])
}

fn ascii_int(tok: &[u8]) -> Result<usize> {
    Ok(std::str::from_utf8(tok)?.parse::<usize>()?)
}

/// Write a 16-bit binary PGM; values are clamped to [0,1].
pub fn write_gray16(path: &Path, width: usize, height: usize, pixels: &[f64]) -> Result<()> {
    if pixels.len() != width * height {
        bail!("pixel count does not match {width}x{height}");
    }
    let header = format!("P5\n{width} {height}\n65535\n");
    let mut out = Vec::with_capacity(header.len() + pixels.len() * 2);
    out.extend_from_slice(header.as_bytes());
    for &v in pixels {
        let q = (v.clamp(0.0, 1.0) * 65535.0).round() as u16;
        out.extend_from_slice(&q.to_be_bytes());
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}
