//! Equal-area cell partition of the compact core: the fundamental polygon
//! with the horoballs `N(ε)` of its ideal vertices removed.
//!
//! Cells are columns `x ∈ [x_k, x_{k+1})` split into rows `y ∈ [y_j, y_{j+1})`.
//! Vertical lines are geodesics, so each column meets the polygon in a
//! connected vertical fiber; the area of a fiber piece is `1/a − 1/b`
//! exactly, and only the outer integral in `x` is numerical.

use serde::{Deserialize, Serialize};

use crate::hyperbolic::{BoundaryPoint, HPoint, Line};
use crate::quadrature::integrate;
use crate::surface::{SurfaceSpec, Vertex};
use crate::{Error, Result};

const AREA_TOL: f64 = 1e-12;
const BISECTIONS: usize = 200;

/// A removed horoball in Euclidean terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
enum Horoball {
    /// `y > height`.
    Above { height: f64 },
    /// Disk tangent to the real axis at `x`.
    Disk { x: f64, radius: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellPartition {
    pub eps_core: f64,
    /// Column boundaries in `x`.
    pub columns: Vec<f64>,
    /// Row boundaries in `y` per column; first is 0, last is ∞.
    pub rows: Vec<Vec<f64>>,
    /// Hyperbolic area per cell, column-major.
    pub areas: Vec<f64>,
    pub core_area: f64,
    horoballs: Vec<Horoball>,
}

/// Most nearly square `(columns, rows)` with `columns · rows = cells`.
pub fn grid_shape(cells: usize) -> (usize, usize) {
    let mut cols = (cells as f64).sqrt() as usize;
    while cols > 1 && !cells.is_multiple_of(cols) {
        cols -= 1;
    }
    let cols = cols.max(1);
    (cols, cells / cols)
}

struct Fibers<'a> {
    spec: &'a SurfaceSpec,
    horoballs: Vec<Horoball>,
}

impl Fibers<'_> {
    /// The polygon's vertical fiber at `x` with horoballs removed, as
    /// disjoint `y`-intervals in increasing order.
    fn fiber(&self, x: f64) -> Vec<(f64, f64)> {
        let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
        for side in &self.spec.sides {
            match side.line {
                Line::Vertical { x: vx } => {
                    if !side.is_outside(HPoint::new_unchecked(x, 1.0)) || (x - vx).abs() < 1e-15 {
                        continue;
                    }
                    return Vec::new();
                }
                Line::Circle { center, radius } => {
                    // factored to stay accurate next to the circle's feet
                    let d2 = (x - (center - radius)) * ((center + radius) - x);
                    if d2 <= 0.0 {
                        // fiber misses this side's circle: all of it is on one side
                        if side.inner_value(HPoint::new_unchecked(x, 1.0)) < 0.0 {
                            return Vec::new();
                        }
                        continue;
                    }
                    let ys = d2.sqrt();
                    let above = HPoint::new_unchecked(x, 2.0 * ys + 1.0);
                    if side.inner_value(above) > 0.0 {
                        lo = lo.max(ys);
                    } else {
                        hi = hi.min(ys);
                    }
                }
            }
        }
        if lo >= hi {
            return Vec::new();
        }
        let mut pieces = vec![(lo, hi)];
        for h in &self.horoballs {
            let (a, b) = match *h {
                Horoball::Above { height } => (height, f64::INFINITY),
                Horoball::Disk { x: cx, radius } => {
                    let dx = x - cx;
                    let d2 = (radius - dx) * (radius + dx);
                    if d2 <= 0.0 {
                        continue;
                    }
                    let root = d2.sqrt();
                    (dx * dx / (radius + root), radius + root)
                }
            };
            pieces = pieces
                .into_iter()
                .flat_map(|(p, q)| {
                    let mut out = Vec::new();
                    if p < a.min(q) {
                        out.push((p, a.min(q)));
                    }
                    if b.max(p) < q {
                        out.push((b.max(p), q));
                    }
                    out
                })
                .collect();
        }
        pieces
    }

    /// Area density of the fiber at `x` below height `y_max`.
    fn density(&self, x: f64, y_max: f64) -> f64 {
        self.fiber(x)
            .iter()
            .filter(|&&(a, _)| a < y_max)
            .map(|&(a, b)| 1.0 / a - 1.0 / b.min(y_max))
            .sum()
    }

    /// `x` values where the fiber structure changes.
    fn breakpoints(&self) -> Vec<f64> {
        let mut xs = Vec::new();
        for side in &self.spec.sides {
            if let Line::Circle { center, radius } = side.line {
                xs.extend([center - radius, center + radius]);
            }
        }
        for v in &self.spec.vertices {
            match v {
                Vertex::Ideal(BoundaryPoint::Finite(x)) => xs.push(*x),
                Vertex::Interior(p) => xs.push(p.x),
                Vertex::Ideal(BoundaryPoint::Infinity) => {}
            }
        }
        for h in &self.horoballs {
            if let Horoball::Disk { x, radius } = *h {
                xs.extend([x - radius, x + radius]);
            }
        }
        xs.sort_by(f64::total_cmp);
        xs.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
        xs
    }

    fn area(&self, x0: f64, x1: f64, y_max: f64, breaks: &[f64]) -> Result<f64> {
        let mut knots = vec![x0];
        knots.extend(breaks.iter().copied().filter(|&b| b > x0 && b < x1));
        knots.push(x1);
        let mut total = 0.0;
        for w in knots.windows(2) {
            total += integrate(|x| self.density(x, y_max), w[0], w[1], AREA_TOL)?;
        }
        Ok(total)
    }
}

fn horoballs(spec: &SurfaceSpec, eps: f64) -> Vec<Horoball> {
    let mut out = Vec::new();
    for cusp in &spec.cusps {
        for v in &cusp.vertices {
            let [_, _, c, d] = v.normalizer.entries();
            // height(z) = y / |cz + d|² for a unit-determinant normalizer
            if c == 0.0 {
                out.push(Horoball::Above { height: d * d / eps });
            } else {
                out.push(Horoball::Disk {
                    x: -d / c,
                    radius: eps / (2.0 * c * c),
                });
            }
        }
    }
    out
}

/// Solves `f(x) = target` for increasing `f` on `[lo, hi]`.
fn bisect(mut lo: f64, mut hi: f64, target: f64, f: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    for _ in 0..BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

impl CellPartition {
    pub fn build(spec: &SurfaceSpec, cells: usize, eps_core: f64) -> Result<Self> {
        if cells == 0 {
            return Err(Error::Config("cell count must be positive".into()));
        }
        if spec.is_cusped() && !(eps_core > 0.0 && eps_core <= 1.0) {
            return Err(Error::Config(format!("core epsilon {eps_core} is outside (0, 1]")));
        }
        let fibers = Fibers {
            spec,
            horoballs: horoballs(spec, eps_core),
        };
        let breaks = fibers.breakpoints();
        // geodesic sides are monotone in x, so the extent is set by the vertices
        let vertex_x: Vec<f64> = spec
            .vertices
            .iter()
            .filter_map(|v| match v {
                Vertex::Ideal(BoundaryPoint::Finite(x)) => Some(*x),
                Vertex::Interior(p) => Some(p.x),
                Vertex::Ideal(BoundaryPoint::Infinity) => None,
            })
            .collect();
        let x_min = vertex_x.iter().copied().fold(f64::INFINITY, f64::min);
        let x_max = vertex_x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let y_top = fibers
            .horoballs
            .iter()
            .filter_map(|h| match h {
                Horoball::Above { height } => Some(*height),
                Horoball::Disk { .. } => None,
            })
            .fold(f64::NEG_INFINITY, f64::max);
        let y_cap = if y_top.is_finite() {
            y_top
        } else {
            spec.vertices
                .iter()
                .filter_map(|v| match v {
                    Vertex::Interior(p) => Some(p.y),
                    Vertex::Ideal(_) => None,
                })
                .fold(0.0, f64::max)
                * 2.0
        };
        let core_area = fibers.area(x_min, x_max, f64::INFINITY, &breaks)?;
        let (n_cols, n_rows) = grid_shape(cells);

        let mut columns = vec![x_min];
        for k in 1..n_cols {
            let target = core_area * k as f64 / n_cols as f64;
            let prev = *columns.last().unwrap();
            columns.push(bisect(prev, x_max, target, |x| {
                fibers.area(x_min, x, f64::INFINITY, &breaks)
            })?);
        }
        columns.push(x_max);

        let mut rows = Vec::with_capacity(n_cols);
        let mut areas = Vec::with_capacity(cells);
        for k in 0..n_cols {
            let (x0, x1) = (columns[k], columns[k + 1]);
            let col_area = fibers.area(x0, x1, f64::INFINITY, &breaks)?;
            let mut ys = vec![0.0];
            for j in 1..n_rows {
                let target = col_area * j as f64 / n_rows as f64;
                // area below y grows with y; search in log scale
                let prev = ys.last().copied().unwrap_or(0.0f64).max(1e-300);
                let y = bisect(prev.ln(), y_cap.ln(), target, |ly| {
                    fibers.area(x0, x1, ly.exp(), &breaks)
                })?
                .exp();
                ys.push(y);
            }
            ys.push(f64::INFINITY);
            let mut below = 0.0;
            for j in 0..n_rows {
                let upto = if j + 1 == n_rows {
                    col_area
                } else {
                    fibers.area(x0, x1, ys[j + 1], &breaks)?
                };
                areas.push(upto - below);
                below = upto;
            }
            rows.push(ys);
        }
        Ok(CellPartition {
            eps_core,
            columns,
            rows,
            areas,
            core_area,
            horoballs: fibers.horoballs,
        })
    }

    pub fn len(&self) -> usize {
        self.areas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.areas.is_empty()
    }

    pub fn in_core(&self, z: HPoint) -> bool {
        self.horoballs.iter().all(|h| match *h {
            Horoball::Above { height } => z.y <= height,
            Horoball::Disk { x, radius } => (z.x - x).powi(2) + (z.y - radius).powi(2) >= radius * radius,
        })
    }

    /// Cell index of a point of the polygon, `None` inside the removed horoballs.
    pub fn locate(&self, z: HPoint) -> Option<usize> {
        if !self.in_core(z) {
            return None;
        }
        let n_cols = self.columns.len() - 1;
        let k = self.columns[1..n_cols].partition_point(|&b| b <= z.x);
        let ys = &self.rows[k];
        let n_rows = ys.len() - 1;
        let j = ys[1..n_rows].partition_point(|&b| b <= z.y);
        Some(k * n_rows + j)
    }

    pub fn area_fractions(&self) -> Vec<f64> {
        self.areas.iter().map(|a| a / self.core_area).collect()
    }
}
