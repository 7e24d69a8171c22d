use crate::error::{invalid, Result};

/// Where a point set lives. Toroidal sets identify opposite faces of the
/// unit cube; bounded sets live on the closed unit box.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Torus,
    Box,
}

/// Wrap a coordinate onto the half-open unit interval [0, 1).
#[inline]
pub fn toroidal_wrap(x: f64) -> f64 {
    let w = x - x.floor();
    // for tiny negative x the subtraction rounds up to exactly 1.0
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

/// Nearest-image displacement on the unit torus, in [-0.5, 0.5).
#[inline]
pub fn min_image(delta: f64) -> f64 {
    delta - (delta + 0.5).floor()
}

/// Squared nearest-image distance between two points on the torus.
#[inline]
pub fn toroidal_dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = min_image(x - y);
            d * d
        })
        .sum()
}

/// A set of n points in d dimensions, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    dim: usize,
    domain: Domain,
    coords: Vec<f64>,
}

impl PointSet {
    /// Build a set from flat row-major coordinates.
    ///
    /// Toroidal coordinates are wrapped onto [0,1); bounded coordinates must
    /// already lie in the closed box.
    pub fn from_coords(dim: usize, domain: Domain, mut coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dim must be >= 1"));
        }
        if coords.len() % dim != 0 {
            return Err(invalid(format!(
                "coordinate count {} not divisible by dim {dim}",
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(invalid("non-finite coordinate"));
        }
        match domain {
            Domain::Torus => {
                for c in &mut coords {
                    *c = toroidal_wrap(*c);
                }
            }
            Domain::Box => {
                if coords.iter().any(|&c| !(0.0..=1.0).contains(&c)) {
                    return Err(invalid("bounded coordinates must lie in [0,1]"));
                }
            }
        }
        Ok(Self { dim, domain, coords })
    }

    pub fn n(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter_points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    /// Translate every point by `t` (wrapping). Toroidal sets only.
    pub fn toroidal_shift(&self, t: &[f64]) -> Result<Self> {
        if t.len() != self.dim {
            return Err(invalid("shift dimension mismatch"));
        }
        if self.domain != Domain::Torus {
            return Err(invalid("toroidal_shift requires a toroidal set"));
        }
        let coords = self
            .coords
            .chunks_exact(self.dim)
            .flat_map(|p| p.iter().zip(t).map(|(x, s)| toroidal_wrap(x + s)))
            .collect();
        Ok(Self {
            dim: self.dim,
            domain: Domain::Torus,
            coords,
        })
    }

    pub(crate) fn from_parts_unchecked(dim: usize, domain: Domain, coords: Vec<f64>) -> Self {
        Self { dim, domain, coords }
    }
}
