//! Periodic 1-D grid, grid functions and discrete-calculus helpers.
//!
//! The state space is the flat circle of circumference `length` (default 2π),
//! discretized by `n` uniform nodes at `k * spacing`. Periodicity is realized
//! by index wrapping; there are no ghost cells.

use crate::error::{Error, Result};
use std::io::Write;

/// Uniform periodic discretization of the circle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorusGrid {
    n: usize,
    length: f64,
}

impl TorusGrid {
    /// Builds a grid with `n` nodes on a circle of circumference `length`.
    ///
    /// Rejects `n < 8` (scheme stencils undefined) and non-positive lengths.
    pub fn new(n: usize, length: f64) -> Result<Self> {
        if n < 8 {
            return Err(Error::GridTooCoarse { n });
        }
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::NonPositiveLength { length });
        }
        Ok(TorusGrid { n, length })
    }

    /// Grid with the default circumference 2π.
    pub fn standard(n: usize) -> Result<Self> {
        Self::new(n, std::f64::consts::TAU)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n as f64
    }

    /// Coordinate of node `k`.
    pub fn node(&self, k: usize) -> f64 {
        (k % self.n) as f64 * self.spacing()
    }

    /// All node coordinates.
    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |k| self.node(k))
    }

    /// Modular node index.
    pub fn wrap(&self, k: isize) -> usize {
        k.rem_euclid(self.n as isize) as usize
    }

    /// Geodesic diameter of the circle: length / 2.
    pub fn diameter(&self) -> f64 {
        self.length / 2.0
    }
}

/// One real value per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    grid: TorusGrid,
    values: Vec<f64>,
}

impl GridField {
    pub fn zeros(grid: TorusGrid) -> Self {
        GridField {
            grid,
            values: vec![0.0; grid.n()],
        }
    }

    pub fn constant(grid: TorusGrid, c: f64) -> Self {
        GridField {
            grid,
            values: vec![c; grid.n()],
        }
    }

    /// Wraps an existing value vector; every entry must be finite.
    pub fn from_values(grid: TorusGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::GridMismatch);
        }
        for (k, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteSample { x: grid.node(k) });
            }
        }
        Ok(GridField { grid, values })
    }

    /// Samples `f` at the grid nodes. Rejects non-finite samples.
    pub fn sample<F: Fn(f64) -> f64>(grid: TorusGrid, f: F) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.n());
        for k in 0..grid.n() {
            let x = grid.node(k);
            let v = f(x);
            if !v.is_finite() {
                return Err(Error::NonFiniteSample { x });
            }
            values.push(v);
        }
        Ok(GridField { grid, values })
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// max_k |a_k|.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// max_k |a_k - b_k|; the fields must share a grid.
    pub fn sup_dist(&self, other: &GridField) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    /// Maximal first-difference quotient over the periodic stencil,
    /// a discrete surrogate for the Lipschitz constant.
    pub fn lipschitz_estimate(&self) -> f64 {
        let dx = self.grid.spacing();
        let n = self.len();
        let mut m = 0.0f64;
        for k in 0..n {
            let d = (self.values[(k + 1) % n] - self.values[k]).abs() / dx;
            m = m.max(d);
        }
        m
    }

    /// Periodic linear interpolation at an arbitrary point.
    pub fn interp(&self, x: f64) -> f64 {
        let n = self.len();
        let dx = self.grid.spacing();
        let xi = x.rem_euclid(self.grid.length());
        let j = (xi / dx).floor() as usize % n;
        let theta = xi / dx - (xi / dx).floor();
        self.values[j] * (1.0 - theta) + self.values[(j + 1) % n] * theta
    }

    /// Adds a constant to every node.
    pub fn shift(&mut self, c: f64) {
        for v in &mut self.values {
            *v += c;
        }
    }

    pub fn shifted(&self, c: f64) -> GridField {
        let mut out = self.clone();
        out.shift(c);
        out
    }

    pub fn negated(&self) -> GridField {
        GridField {
            grid: self.grid,
            values: self.values.iter().map(|v| -v).collect(),
        }
    }

    /// Pointwise minimum with another field on the same grid.
    pub fn min_with(&self, other: &GridField) -> Result<GridField> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(GridField {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a.min(*b))
                .collect(),
        })
    }

    /// max_k (a_k - b_k), signed.
    pub fn max_signed_gap(&self, other: &GridField) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(f64::NEG_INFINITY, |m, (a, b)| m.max(a - b)))
    }

    /// Writes the field as CSV: header `x,value`, x with 12 significant digits.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "x,value")?;
        for (k, v) in self.values.iter().enumerate() {
            writeln!(w, "{:.11e},{:.11e}", self.grid.node(k), v)?;
        }
        Ok(())
    }
}

/// Ordered frames of a time-dependent grid function.
#[derive(Debug, Clone)]
pub struct SpaceTimeField {
    grid: TorusGrid,
    dt: f64,
    frames: Vec<GridField>,
}

impl SpaceTimeField {
    /// Starts a run from an initial frame; `dt` is the frame spacing.
    pub fn new(initial: GridField, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::InvalidSpec(format!("dt must be positive, got {dt}")));
        }
        Ok(SpaceTimeField {
            grid: initial.grid(),
            dt,
            frames: vec![initial],
        })
    }

    pub fn push(&mut self, frame: GridField) -> Result<()> {
        if frame.grid() != self.grid {
            return Err(Error::GridMismatch);
        }
        self.frames.push(frame);
        Ok(())
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn frames(&self) -> &[GridField] {
        &self.frames
    }

    pub fn frame(&self, i: usize) -> &GridField {
        &self.frames[i]
    }

    pub fn last(&self) -> &GridField {
        self.frames.last().expect("frame count >= 1")
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    pub fn duration(&self) -> f64 {
        (self.frames.len() - 1) as f64 * self.dt
    }
}
