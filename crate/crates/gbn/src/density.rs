use crate::error::{invalid, Result};

/// A target point-density grid over the unit square.
///
/// Values lie in [0,1] with 1 = maximum density. Row-major storage,
/// `iy * width + ix`, with iy = 0 at y = 0. Image loaders are responsible
/// for flipping scanline order and inverting luminance (dark = dense).
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
    mass: f64,
}

impl DensityMap {
    pub fn from_values(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(invalid("density dimensions must be >= 1"));
        }
        if values.len() != width * height {
            return Err(invalid(format!(
                "density value count {} != {width}x{height}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite() || !(0.0..=1.0).contains(v)) {
            return Err(invalid("density values must lie in [0,1]"));
        }
        let mass: f64 = values.iter().sum();
        if !(mass > 0.0) {
            return Err(invalid("density mass must be positive"));
        }
        Ok(Self { width, height, values, mass })
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::from_values(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Sum of all pixel values.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    pub fn value_at(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.width + ix]
    }

    /// Nearest-pixel lookup for a unit-square position.
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let ix = ((x * self.width as f64) as usize).min(self.width - 1);
        let iy = ((y * self.height as f64) as usize).min(self.height - 1);
        self.value_at(ix, iy)
    }

    /// Center of pixel (ix, iy) in unit-square coordinates.
    pub fn pixel_center(&self, ix: usize, iy: usize) -> (f64, f64) {
        (
            (ix as f64 + 0.5) / self.width as f64,
            (iy as f64 + 0.5) / self.height as f64,
        )
    }
}
