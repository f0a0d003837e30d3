//! Planar scene geometry: the reconstruction grid, sensor deployments, and
//! the normalized-ellipse weight model that maps a transmitter–receiver link
//! to a sparse row of line-integral weights over grid points.
//!
//! Conventions fixed here and relied on everywhere else:
//! * Grid points are indexed column-major: site `i = ix + nx * iy`, with `ix`
//!   varying fastest. `vec`/`unvec` helpers and all CSV grid layouts follow it.
//! * The monitored area `A` is the rectangle covering the grid with a
//!   half-spacing margin on every side.
//! * A link weight is `1/sqrt(d(tx, rx))` when the grid point lies strictly
//!   inside the ellipse `d(tx, p) + d(rx, p) < d(tx, rx) + lambda/2`, else 0.
//!
//! All types here are immutable after construction except [`WeightMatrix`],
//! which grows append-only as measurements arrive.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "(f64, f64)", from = "(f64, f64)")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    /// Euclidean distance to another point.
    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl From<(f64, f64)> for Point {
    fn from(t: (f64, f64)) -> Self {
        Point { x: t.0, y: t.1 }
    }
}

impl From<Point> for (f64, f64) {
    fn from(p: Point) -> Self {
        (p.x, p.y)
    }
}

/// Axis-aligned rectangle; the monitored area `A`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Area {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl Area {
    /// Total boundary length.
    pub fn perimeter(&self) -> f64 {
        2.0 * ((self.xmax - self.xmin) + (self.ymax - self.ymin))
    }

    /// Whether `p` lies in the closed rectangle.
    pub fn contains(&self, p: &Point) -> bool {
        p.x >= self.xmin && p.x <= self.xmax && p.y >= self.ymin && p.y <= self.ymax
    }

    /// Point on the boundary at arc length `s` from the bottom-left corner,
    /// walking counterclockwise (bottom, right, top, left edges in order).
    ///
    /// `s` is taken modulo the perimeter, so any real value is accepted.
    pub fn boundary_point(&self, s: f64) -> Point {
        let w = self.xmax - self.xmin;
        let h = self.ymax - self.ymin;
        let per = self.perimeter();
        let mut s = s % per;
        if s < 0.0 {
            s += per;
        }
        if s < w {
            Point::new(self.xmin + s, self.ymin)
        } else if s < w + h {
            Point::new(self.xmax, self.ymin + (s - w))
        } else if s < 2.0 * w + h {
            Point::new(self.xmax - (s - w - h), self.ymax)
        } else {
            Point::new(self.xmin, self.ymax - (s - 2.0 * w - h))
        }
    }
}

/// Uniform rectangular grid of reconstruction points.
///
/// Grid point `(ix, iy)` sits at `(origin + ix*spacing, origin + iy*spacing)`
/// with 0-based `ix < nx`, `iy < ny`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub spacing: f64,
    pub origin: f64,
}

impl Grid {
    pub fn new(nx: usize, ny: usize, spacing: f64, origin: f64) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidConfig(format!(
                "grid dimensions must be positive, got {nx}x{ny}"
            )));
        }
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "grid spacing must be positive and finite, got {spacing}"
            )));
        }
        if !origin.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "grid origin must be finite, got {origin}"
            )));
        }
        Ok(Grid {
            nx,
            ny,
            spacing,
            origin,
        })
    }

    /// Number of grid points.
    pub fn n_points(&self) -> usize {
        self.nx * self.ny
    }

    /// Column-major site index of grid coordinates `(ix, iy)`.
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        debug_assert!(ix < self.nx && iy < self.ny);
        ix + self.nx * iy
    }

    /// Grid coordinates `(ix, iy)` of site `i`.
    pub fn coords(&self, i: usize) -> (usize, usize) {
        debug_assert!(i < self.n_points());
        (i % self.nx, i / self.nx)
    }

    /// Planar position of site `i`.
    pub fn point(&self, i: usize) -> Point {
        let (ix, iy) = self.coords(i);
        Point::new(
            self.origin + ix as f64 * self.spacing,
            self.origin + iy as f64 * self.spacing,
        )
    }

    /// Monitored area: the grid's bounding box padded by half a spacing.
    pub fn area(&self) -> Area {
        let half = 0.5 * self.spacing;
        Area {
            xmin: self.origin - half,
            xmax: self.origin + (self.nx - 1) as f64 * self.spacing + half,
            ymin: self.origin - half,
            ymax: self.origin + (self.ny - 1) as f64 * self.spacing + half,
        }
    }

    /// First-order (4-connected) neighborhood structure, truncated at edges.
    pub fn adjacency(&self) -> Adjacency {
        let n = self.n_points();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut indices = Vec::with_capacity(4 * n);
        offsets.push(0);
        for i in 0..n {
            let (ix, iy) = self.coords(i);
            if ix > 0 {
                indices.push(self.index(ix - 1, iy));
            }
            if ix + 1 < self.nx {
                indices.push(self.index(ix + 1, iy));
            }
            if iy > 0 {
                indices.push(self.index(ix, iy - 1));
            }
            if iy + 1 < self.ny {
                indices.push(self.index(ix, iy + 1));
            }
            offsets.push(indices.len());
        }
        Adjacency { offsets, indices }
    }

    /// Unordered neighbor pairs `(i, j)` with `i < j`, each edge listed once.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut edges = Vec::with_capacity(2 * self.n_points());
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                let i = self.index(ix, iy);
                if ix + 1 < self.nx {
                    edges.push((i, self.index(ix + 1, iy)));
                }
                if iy + 1 < self.ny {
                    edges.push((i, self.index(ix, iy + 1)));
                }
            }
        }
        edges
    }
}

/// Compressed adjacency lists of a grid's 4-connected neighborhoods.
#[derive(Debug, Clone)]
pub struct Adjacency {
    offsets: Vec<usize>,
    indices: Vec<usize>,
}

impl Adjacency {
    /// Neighbor site indices of site `i`.
    pub fn of(&self, i: usize) -> &[usize] {
        &self.indices[self.offsets[i]..self.offsets[i + 1]]
    }

    /// Number of sites.
    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Fixed sensor deployment; positions are immutable after construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SensorSet {
    positions: Vec<Point>,
}

impl SensorSet {
    pub fn new(positions: Vec<Point>) -> Self {
        SensorSet { positions }
    }

    /// `n` sensors equally spaced along the boundary of `area`, starting at
    /// the bottom-left corner and walking counterclockwise.
    pub fn on_boundary(area: &Area, n: usize) -> Self {
        let step = area.perimeter() / n as f64;
        let positions = (0..n)
            .map(|j| area.boundary_point(j as f64 * step))
            .collect();
        SensorSet { positions }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn position(&self, n: usize) -> Point {
        self.positions[n]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Point> {
        self.positions.iter()
    }
}

/// An ordered transmitter–receiver pair of sensor indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Link {
    pub tx: usize,
    pub rx: usize,
}

impl Link {
    pub fn new(tx: usize, rx: usize) -> Result<Self> {
        if tx == rx {
            return Err(Error::InvalidLink(format!(
                "transmitter and receiver must differ, both are sensor {tx}"
            )));
        }
        Ok(Link { tx, rx })
    }
}

/// Normalized ellipse weight of grid point `p` for the link `tx -> rx`.
///
/// Returns `1/sqrt(d(tx, rx))` when the detour `d(tx, p) + d(rx, p) - d(tx, rx)`
/// is strictly below `lambda/2`, and 0 otherwise. Errs when the endpoints
/// coincide, since the weight is undefined at distance zero.
pub fn ellipse_weight(tx: &Point, rx: &Point, p: &Point, lambda: f64) -> Result<f64> {
    let d = tx.distance(rx);
    if d <= 0.0 {
        return Err(Error::InvalidLink(format!(
            "link endpoints coincide at ({}, {})",
            tx.x, tx.y
        )));
    }
    if tx.distance(p) + rx.distance(p) < d + 0.5 * lambda {
        Ok(1.0 / d.sqrt())
    } else {
        Ok(0.0)
    }
}

/// Sparse weight vector of one link over a grid: sorted (site, weight) pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    dim: usize,
    entries: Vec<(usize, f64)>,
}

impl WeightVector {
    /// Builds from explicit entries; indices must be in range and strictly
    /// increasing after sorting (no duplicates).
    pub fn new(dim: usize, mut entries: Vec<(usize, f64)>) -> Result<Self> {
        entries.sort_unstable_by_key(|&(i, _)| i);
        for pair in entries.windows(2) {
            if pair[0].0 == pair[1].0 {
                return Err(Error::InvalidConfig(format!(
                    "duplicate weight entry for site {}",
                    pair[0].0
                )));
            }
        }
        if let Some(&(last, _)) = entries.last() {
            if last >= dim {
                return Err(Error::dims(dim, last + 1, "weight vector index"));
            }
        }
        Ok(WeightVector { dim, entries })
    }

    /// Weight vector of the link `tx -> rx` over all points of `grid`.
    pub fn from_link(grid: &Grid, tx: &Point, rx: &Point, lambda: f64) -> Result<Self> {
        let d = tx.distance(rx);
        if d <= 0.0 {
            return Err(Error::InvalidLink(format!(
                "link endpoints coincide at ({}, {})",
                tx.x, tx.y
            )));
        }
        let value = 1.0 / d.sqrt();
        let threshold = d + 0.5 * lambda;
        let mut entries = Vec::new();
        for i in 0..grid.n_points() {
            let p = grid.point(i);
            if tx.distance(&p) + rx.distance(&p) < threshold {
                entries.push((i, value));
            }
        }
        Ok(WeightVector {
            dim: grid.n_points(),
            entries,
        })
    }

    /// Length of the dense vector this represents.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of nonzero entries.
    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// Sorted (site, weight) pairs.
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.entries.iter().copied()
    }

    /// Dense copy.
    pub fn dense(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        for &(i, w) in &self.entries {
            v[i] = w;
        }
        v
    }

    /// Inner product with a dense vector.
    pub fn dot(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        self.entries.iter().map(|&(i, w)| w * x[i]).sum()
    }

    /// Adds `coef * w` into a dense accumulator.
    pub fn scatter_add(&self, coef: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim);
        for &(i, w) in &self.entries {
            out[i] += coef * w;
        }
    }

    /// Sum of `g(site, weight)` over nonzero entries.
    pub fn map_sum(&self, mut g: impl FnMut(usize, f64) -> f64) -> f64 {
        self.entries.iter().map(|&(i, w)| g(i, w)).sum()
    }
}

/// Append-only collection of link weight vectors, stored column-wise.
///
/// Column `tau` is measurement `tau`'s weight vector. The per-site running
/// sums of squared weights are maintained incrementally because the
/// reconstruction updates need them every iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    n_points: usize,
    columns: Vec<WeightVector>,
    row_sq_sums: Vec<f64>,
}

impl WeightMatrix {
    pub fn new(n_points: usize) -> Self {
        WeightMatrix {
            n_points,
            columns: Vec::new(),
            row_sq_sums: vec![0.0; n_points],
        }
    }

    /// Appends one column; its dimension must match the grid size.
    pub fn append_column(&mut self, w: WeightVector) -> Result<()> {
        if w.dim() != self.n_points {
            return Err(Error::dims(self.n_points, w.dim(), "weight matrix column"));
        }
        for (i, wi) in w.iter() {
            self.row_sq_sums[i] += wi * wi;
        }
        self.columns.push(w);
        Ok(())
    }

    /// Number of grid points (rows).
    pub fn n_points(&self) -> usize {
        self.n_points
    }

    /// Number of measurements (columns).
    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn column(&self, tau: usize) -> &WeightVector {
        &self.columns[tau]
    }

    pub fn columns(&self) -> impl Iterator<Item = &WeightVector> {
        self.columns.iter()
    }

    /// Per-site sums over columns of squared weights.
    pub fn row_sq_sums(&self) -> &[f64] {
        &self.row_sq_sums
    }
}

/// A full scene: grid, sensor deployment, and the ellipse width parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub grid: Grid,
    pub sensors: SensorSet,
    pub lambda: f64,
}

impl Scene {
    pub fn new(grid: Grid, sensors: SensorSet, lambda: f64) -> Result<Self> {
        let scene = Scene {
            grid,
            sensors,
            lambda,
        };
        scene.validate()?;
        Ok(scene)
    }

    /// Checks the scene invariants: positive ellipse width, valid grid, and
    /// every sensor inside the monitored area.
    pub fn validate(&self) -> Result<()> {
        Grid::new(
            self.grid.nx,
            self.grid.ny,
            self.grid.spacing,
            self.grid.origin,
        )?;
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "ellipse width lambda must be positive and finite, got {}",
                self.lambda
            )));
        }
        let area = self.grid.area();
        for (n, p) in self.sensors.iter().enumerate() {
            if !p.x.is_finite() || !p.y.is_finite() || !area.contains(p) {
                return Err(Error::InvalidConfig(format!(
                    "sensor {n} at ({}, {}) lies outside the monitored area",
                    p.x, p.y
                )));
            }
        }
        Ok(())
    }

    /// Weight vector of a sensor-index link.
    pub fn link_weights(&self, link: &Link) -> Result<WeightVector> {
        let tx = self.sensors.position(link.tx);
        let rx = self.sensors.position(link.rx);
        WeightVector::from_link(&self.grid, &tx, &rx, self.lambda)
    }

    /// Parses and validates a scene from its JSON form.
    pub fn from_json(text: &str) -> Result<Self> {
        let scene: Scene = serde_json::from_str(text)?;
        scene.validate()?;
        Ok(scene)
    }

    /// Serializes to pretty JSON.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serialization cannot fail")
    }
}
