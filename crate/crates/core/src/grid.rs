//! Periodic computational grids and scalar fields.
//!
//! The solver discretizes `R^n` (n = 1 or 2) on the torus `[-L, L)^n` with an
//! even number `N` of points per axis. Spectral operators are diagonal in the
//! DFT basis with frequencies `xi_j = pi j / L` for signed `j`. Because the
//! continuum problem lives on the whole space, every quantitative check is
//! restricted to an inner window `|x|_inf <= inner_radius` (at most `L / 2`),
//! keeping periodic wrap-around and boundary effects out of the reported
//! norms.

use crate::error::{Error, Result};
use std::io::{Read, Write};
use std::sync::Arc;

/// Geometry of the periodic grid.
#[derive(Debug)]
pub struct GridSpec {
    dim: u32,
    n_points: usize,
    half_width: f64,
    inner_radius: f64,
    axis: Vec<f64>,
    freq_sq: Vec<f64>,
}

impl GridSpec {
    /// Create a grid on `[-L, L)^dim` with `n_points` nodes per axis.
    ///
    /// `inner_radius` bounds the measurement window and must not exceed
    /// `L / 2`; `n_points` must be even and at least 8.
    pub fn new(dim: u32, n_points: usize, half_width: f64, inner_radius: f64) -> Result<Arc<Self>> {
        if !(dim == 1 || dim == 2) {
            return Err(Error::InvalidParameter(format!(
                "grid dimension must be 1 or 2, got {dim}"
            )));
        }
        if n_points < 8 || !n_points.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "grid size must be even and >= 8, got {n_points}"
            )));
        }
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "grid half-width must be positive, got {half_width}"
            )));
        }
        if !(inner_radius > 0.0) || inner_radius > half_width / 2.0 {
            return Err(Error::InvalidParameter(format!(
                "inner radius must lie in (0, L/2] = (0, {}], got {inner_radius}",
                half_width / 2.0
            )));
        }
        let h = 2.0 * half_width / n_points as f64;
        let axis: Vec<f64> = (0..n_points).map(|i| -half_width + h * i as f64).collect();
        let freq: Vec<f64> = (0..n_points)
            .map(|j| {
                let signed = if j <= n_points / 2 {
                    j as isize
                } else {
                    j as isize - n_points as isize
                };
                std::f64::consts::PI * signed as f64 / half_width
            })
            .collect();
        let freq_sq = freq.iter().map(|f| f * f).collect();
        Ok(Arc::new(GridSpec {
            dim,
            n_points,
            half_width,
            inner_radius,
            axis,
            freq_sq,
        }))
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    /// Nodes per axis.
    pub fn n_points(&self) -> usize {
        self.n_points
    }

    /// Total number of nodes (`N` in 1-D, `N^2` in 2-D).
    pub fn len(&self) -> usize {
        match self.dim {
            1 => self.n_points,
            _ => self.n_points * self.n_points,
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn inner_radius(&self) -> f64 {
        self.inner_radius
    }

    /// Mesh spacing.
    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.n_points as f64
    }

    /// Physical coordinates along one axis.
    pub fn axis(&self) -> &[f64] {
        &self.axis
    }

    /// Squared frequency `xi_j^2` along one axis (signed DFT ordering).
    pub fn freq_sq(&self) -> &[f64] {
        &self.freq_sq
    }

    /// Coordinates of the flat index `i`.
    pub fn coords(&self, i: usize) -> (f64, f64) {
        match self.dim {
            1 => (self.axis[i], 0.0),
            _ => (self.axis[i / self.n_points], self.axis[i % self.n_points]),
        }
    }

    /// Euclidean radius of the flat index `i`.
    pub fn radius(&self, i: usize) -> f64 {
        let (x, y) = self.coords(i);
        (x * x + y * y).sqrt()
    }

    /// Squared total frequency `|xi|^2` of the flat index `i`.
    pub fn freq_sq_at(&self, i: usize) -> f64 {
        match self.dim {
            1 => self.freq_sq[i],
            _ => self.freq_sq[i / self.n_points] + self.freq_sq[i % self.n_points],
        }
    }

    /// Whether the flat index `i` lies in the inner measurement window
    /// `max(|x|, |y|) <= inner_radius`.
    pub fn is_inner(&self, i: usize) -> bool {
        let (x, y) = self.coords(i);
        x.abs().max(y.abs()) <= self.inner_radius + 1e-12
    }

    /// Two grids are compatible when all geometric parameters agree.
    pub fn compatible(&self, other: &GridSpec) -> bool {
        self.dim == other.dim
            && self.n_points == other.n_points
            && self.half_width == other.half_width
            && self.inner_radius == other.inner_radius
    }
}

/// A real scalar field sampled on a [`GridSpec`].
#[derive(Debug, Clone)]
pub struct Field {
    grid: Arc<GridSpec>,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: &Arc<GridSpec>) -> Field {
        Field {
            grid: Arc::clone(grid),
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: &Arc<GridSpec>, value: f64) -> Field {
        Field {
            grid: Arc::clone(grid),
            values: vec![value; grid.len()],
        }
    }

    /// Build a field from a function of the physical coordinates.
    pub fn from_fn(grid: &Arc<GridSpec>, f: impl Fn(f64, f64) -> f64) -> Field {
        let values = (0..grid.len())
            .map(|i| {
                let (x, y) = grid.coords(i);
                f(x, y)
            })
            .collect();
        Field {
            grid: Arc::clone(grid),
            values,
        }
    }

    /// Build a radial field `f(|x|)`.
    pub fn from_radial(grid: &Arc<GridSpec>, f: impl Fn(f64) -> f64) -> Field {
        let values = (0..grid.len()).map(|i| f(grid.radius(i))).collect();
        Field {
            grid: Arc::clone(grid),
            values,
        }
    }

    pub fn from_values(grid: &Arc<GridSpec>, values: Vec<f64>) -> Result<Field> {
        if values.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "field length {} does not match grid length {}",
                values.len(),
                grid.len()
            )));
        }
        Ok(Field {
            grid: Arc::clone(grid),
            values,
        })
    }

    pub fn grid(&self) -> &Arc<GridSpec> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Sup norm over the whole torus.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Sup norm over the inner measurement window.
    pub fn sup_norm_inner(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .filter(|(i, _)| self.grid.is_inner(*i))
            .fold(0.0, |m, (_, v)| m.max(v.abs()))
    }

    /// Minimum value over the inner measurement window.
    pub fn min_inner(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .filter(|(i, _)| self.grid.is_inner(*i))
            .fold(f64::INFINITY, |m, (_, v)| m.min(*v))
    }

    /// Value at the node closest to the origin.
    pub fn at_origin(&self) -> f64 {
        let j = self.grid.n_points() / 2;
        match self.grid.dim() {
            1 => self.values[j],
            _ => self.values[j * self.grid.n_points() + j],
        }
    }

    /// Replace negative entries by zero (the sublinear source is only defined
    /// for non-negative states; spectral steps can undershoot slightly).
    pub fn clamp_non_negative(&mut self) {
        for v in &mut self.values {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
    }

    /// Pointwise map.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise binary combination with another field on the same grid.
    pub fn zip_with(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        if !self.grid.compatible(&other.grid) {
            return Err(Error::InvalidParameter(
                "cannot combine fields on incompatible grids".into(),
            ));
        }
        Ok(Field {
            grid: Arc::clone(&self.grid),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }
}

/// Serialize a field state: a one-line ASCII header `dim N L t`, then the
/// raw little-endian `f64` values in row-major order.
pub fn write_state<W: Write>(w: &mut W, field: &Field, t: f64) -> Result<()> {
    let g = field.grid();
    writeln!(w, "{} {} {} {}", g.dim(), g.n_points(), g.half_width(), t)?;
    let mut buf = Vec::with_capacity(field.values().len() * 8);
    for v in field.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

/// Deserialize a field state written by [`write_state`]. The caller supplies
/// the grid's inner radius (the header stores geometry only).
pub fn read_state<R: Read>(r: &mut R, inner_radius: f64) -> Result<(Field, f64)> {
    let mut header = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        r.read_exact(&mut byte)?;
        if byte[0] == b'\n' {
            break;
        }
        header.push(byte[0]);
        if header.len() > 256 {
            return Err(Error::Config("state header too long".into()));
        }
    }
    let header = String::from_utf8(header)
        .map_err(|_| Error::Config("state header is not valid UTF-8".into()))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 4 {
        return Err(Error::Config(format!(
            "state header must have 4 fields, got {}",
            parts.len()
        )));
    }
    let dim: u32 = parts[0]
        .parse()
        .map_err(|_| Error::Config("bad dim in state header".into()))?;
    let n: usize = parts[1]
        .parse()
        .map_err(|_| Error::Config("bad grid size in state header".into()))?;
    let half_width: f64 = parts[2]
        .parse()
        .map_err(|_| Error::Config("bad half-width in state header".into()))?;
    let t: f64 = parts[3]
        .parse()
        .map_err(|_| Error::Config("bad time in state header".into()))?;
    let grid = GridSpec::new(dim, n, half_width, inner_radius)?;
    let mut buf = vec![0u8; grid.len() * 8];
    r.read_exact(&mut buf)?;
    let values = buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((Field::from_values(&grid, values)?, t))
}
