//! Upper half-plane geometry: Möbius maps, boundary points, geodesic lines,
//! distances and line crossings.
//!
//! All types are plain immutable values. The point at infinity is an explicit
//! [`BoundaryPoint::Infinity`] variant and every formula spells out that case.

use std::f64::consts::PI;
use std::fmt;
use std::ops::Mul;

use serde::{Deserialize, Serialize};

use crate::tolerance::{EPS_ALG, EPS_GEOM, EPS_TRACE};
use crate::{Error, Result};

/// A point of the upper half-plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HPoint {
    pub x: f64,
    pub y: f64,
}

impl HPoint {
    pub fn new(x: f64, y: f64) -> Result<Self> {
        if !(y > 0.0) || !x.is_finite() || !y.is_finite() {
            return Err(Error::domain(format!("({x}, {y}) is not in the upper half-plane")));
        }
        Ok(HPoint { x, y })
    }

    /// Caller guarantees `y > 0`.
    pub const fn new_unchecked(x: f64, y: f64) -> Self {
        HPoint { x, y }
    }

    pub const I: HPoint = HPoint { x: 0.0, y: 1.0 };
}

/// A point of ∂ℍ = ℝ ∪ {∞}.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum BoundaryPoint {
    Finite(f64),
    Infinity,
}

impl BoundaryPoint {
    /// Real-line order with ∞ placed above every finite point.
    pub fn order_key(self) -> f64 {
        match self {
            BoundaryPoint::Finite(x) => x,
            BoundaryPoint::Infinity => f64::INFINITY,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, BoundaryPoint::Infinity)
    }

    pub fn approx_eq(self, other: BoundaryPoint, tol: f64) -> bool {
        match (self, other) {
            (BoundaryPoint::Infinity, BoundaryPoint::Infinity) => true,
            (BoundaryPoint::Finite(a), BoundaryPoint::Finite(b)) => (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs())),
            _ => false,
        }
    }
}

impl fmt::Display for BoundaryPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundaryPoint::Finite(x) => write!(f, "{x}"),
            BoundaryPoint::Infinity => write!(f, "inf"),
        }
    }
}

/// Real 2×2 matrix with unit determinant, acting on ℍ by fractional linear maps.
///
/// The representative is sign-canonical: the first nonzero entry of
/// `(a, b, c, d)` is positive, so `g` and `-g` compare equal.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoebiusMap {
    a: f64,
    b: f64,
    c: f64,
    d: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    Identity,
    Elliptic,
    Parabolic,
    Hyperbolic,
}

impl MoebiusMap {
    pub const IDENTITY: MoebiusMap = MoebiusMap {
        a: 1.0,
        b: 0.0,
        c: 0.0,
        d: 1.0,
    };

    /// Builds a map from any matrix with positive determinant, rescaling to
    /// determinant one.
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        let det = a * d - b * c;
        if !(det > 0.0) || !det.is_finite() {
            return Err(Error::domain(format!(
                "matrix [[{a}, {b}], [{c}, {d}]] has non-positive determinant {det}"
            )));
        }
        Ok(Self::from_raw(a, b, c, d))
    }

    fn from_raw(a: f64, b: f64, c: f64, d: f64) -> Self {
        let det = a * d - b * c;
        let (a, b, c, d) = if (det - 1.0).abs() <= 1e-14 {
            (a, b, c, d)
        } else {
            let s = det.sqrt();
            (a / s, b / s, c / s, d / s)
        };
        let first = [a, b, c, d].into_iter().find(|v| *v != 0.0).unwrap_or(1.0);
        if first < 0.0 {
            MoebiusMap {
                a: -a,
                b: -b,
                c: -c,
                d: -d,
            }
        } else {
            MoebiusMap { a, b, c, d }
        }
    }

    pub fn entries(&self) -> [f64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(&self) -> f64 {
        self.a + self.d
    }

    pub fn inverse(&self) -> Self {
        Self::from_raw(self.d, -self.b, -self.c, self.a)
    }

    pub fn compose(&self, rhs: &MoebiusMap) -> Self {
        Self::from_raw(
            self.a * rhs.a + self.b * rhs.c,
            self.a * rhs.b + self.b * rhs.d,
            self.c * rhs.a + self.d * rhs.c,
            self.c * rhs.b + self.d * rhs.d,
        )
    }

    pub fn pow(&self, n: u32) -> Self {
        (0..n).fold(Self::IDENTITY, |acc, _| acc.compose(self))
    }

    /// Conjugate `h g h⁻¹`.
    pub fn conjugate_by(&self, h: &MoebiusMap) -> Self {
        h.compose(self).compose(&h.inverse())
    }

    pub fn approx_eq(&self, other: &MoebiusMap, tol: f64) -> bool {
        self.entries()
            .iter()
            .zip(other.entries())
            .all(|(x, y)| (x - y).abs() <= tol * (1.0 + x.abs().max(y.abs())))
    }

    pub fn classify(&self) -> Classification {
        if self.approx_eq(&Self::IDENTITY, EPS_ALG) {
            return Classification::Identity;
        }
        let t = self.trace().abs();
        if t > 2.0 + EPS_TRACE {
            Classification::Hyperbolic
        } else if (t - 2.0).abs() <= EPS_TRACE {
            Classification::Parabolic
        } else {
            Classification::Elliptic
        }
    }

    pub fn is_hyperbolic(&self) -> bool {
        self.classify() == Classification::Hyperbolic
    }

    /// Translation length `2·arccosh(|tr|/2)` of a hyperbolic map.
    pub fn translation_length(&self) -> Result<f64> {
        self.require_hyperbolic()?;
        Ok(translation_length_from_trace(self.trace()))
    }

    fn require_hyperbolic(&self) -> Result<()> {
        match self.classify() {
            Classification::Hyperbolic => Ok(()),
            other => Err(Error::domain(format!(
                "{other:?} map {:?} has no translation axis",
                self.entries()
            ))),
        }
    }

    /// Fixed points as `(repelling, attracting)`.
    pub fn fixed_points(&self) -> Result<(BoundaryPoint, BoundaryPoint)> {
        self.require_hyperbolic()?;
        let (a, b, c, d) = (self.a, self.b, self.c, self.d);
        if c == 0.0 {
            // z ↦ (a z + b)/d with a/d ≠ 1: fixes ∞ and b/(d − a).
            let finite = BoundaryPoint::Finite(b / (d - a));
            return Ok(if a.abs() > d.abs() {
                (finite, BoundaryPoint::Infinity)
            } else {
                (BoundaryPoint::Infinity, finite)
            });
        }
        // c z² + (d − a) z − b = 0, solved without cancellation.
        let bq = d - a;
        let disc = (bq * bq + 4.0 * b * c).max(0.0).sqrt();
        let q = -0.5 * (bq + bq.signum_or_one() * disc);
        let r1 = q / c;
        let r2 = -b / q;
        let attracting = |z: f64| (c * z + d).abs() > 1.0;
        Ok(if attracting(r1) && !attracting(r2) {
            (BoundaryPoint::Finite(r2), BoundaryPoint::Finite(r1))
        } else if attracting(r2) && !attracting(r1) {
            (BoundaryPoint::Finite(r1), BoundaryPoint::Finite(r2))
        } else if (c * r1 + d).abs() > (c * r2 + d).abs() {
            (BoundaryPoint::Finite(r2), BoundaryPoint::Finite(r1))
        } else {
            (BoundaryPoint::Finite(r1), BoundaryPoint::Finite(r2))
        })
    }

    /// Unoriented translation axis.
    pub fn axis(&self) -> Result<BoundaryGeodesic> {
        let (r, a) = self.fixed_points()?;
        BoundaryGeodesic::new(r, a)
    }

    pub fn apply(&self, z: HPoint) -> HPoint {
        let den_re = self.c * z.x + self.d;
        let den_im = self.c * z.y;
        let den = den_re * den_re + den_im * den_im;
        let num_re = self.a * z.x + self.b;
        let num_im = self.a * z.y;
        HPoint {
            x: (num_re * den_re + num_im * den_im) / den,
            y: z.y / den,
        }
    }

    pub fn apply_boundary(&self, p: BoundaryPoint) -> BoundaryPoint {
        match p {
            BoundaryPoint::Infinity => {
                if self.c == 0.0 {
                    BoundaryPoint::Infinity
                } else {
                    BoundaryPoint::Finite(self.a / self.c)
                }
            }
            BoundaryPoint::Finite(x) => {
                let den = self.c * x + self.d;
                if den == 0.0 {
                    BoundaryPoint::Infinity
                } else {
                    BoundaryPoint::Finite((self.a * x + self.b) / den)
                }
            }
        }
    }

    pub fn apply_geodesic(&self, g: &BoundaryGeodesic) -> BoundaryGeodesic {
        let [p, q] = g.endpoints();
        BoundaryGeodesic::new_unchecked(self.apply_boundary(p), self.apply_boundary(q))
    }
}

trait SignumOrOne {
    fn signum_or_one(self) -> f64;
}

impl SignumOrOne for f64 {
    fn signum_or_one(self) -> f64 {
        if self < 0.0 {
            -1.0
        } else {
            1.0
        }
    }
}

impl Mul for MoebiusMap {
    type Output = MoebiusMap;

    fn mul(self, rhs: MoebiusMap) -> MoebiusMap {
        self.compose(&rhs)
    }
}

impl fmt::Display for MoebiusMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[[{}, {}], [{}, {}]]", self.a, self.b, self.c, self.d)
    }
}

pub fn translation_length_from_trace(trace: f64) -> f64 {
    2.0 * (trace.abs() / 2.0).acosh()
}

/// Largest `|trace|` of a hyperbolic element with translation length at most `t`.
pub fn trace_bound(t: f64) -> f64 {
    2.0 * (t / 2.0).cosh()
}

/// Hyperbolic distance, `cosh d = 1 + |z₁ − z₂|² / (2 y₁ y₂)`, evaluated via
/// `sinh(d/2)` to stay accurate for nearby points.
pub fn hyp_distance(z1: HPoint, z2: HPoint) -> f64 {
    let dx = z1.x - z2.x;
    let dy = z1.y - z2.y;
    let chord = (dx * dx + dy * dy).sqrt();
    2.0 * (chord / (2.0 * (z1.y * z2.y).sqrt())).asinh()
}

/// Euclidean model of a geodesic line in ℍ.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Line {
    Vertical { x: f64 },
    Circle { center: f64, radius: f64 },
}

impl Line {
    /// Hyperbolic distance from `z` to the line.
    pub fn distance(&self, z: HPoint) -> f64 {
        match *self {
            Line::Vertical { x } => ((z.x - x).abs() / z.y).asinh(),
            Line::Circle { center, radius } => {
                let dx = z.x - center;
                let pow = (dx - radius) * (dx + radius) + z.y * z.y;
                (pow.abs() / (2.0 * radius * z.y)).asinh()
            }
        }
    }

    /// Sign of the side of the line `z` lies on: for circles positive outside,
    /// for vertical lines positive to the right.
    pub fn side(&self, z: HPoint) -> f64 {
        match *self {
            Line::Vertical { x } => z.x - x,
            Line::Circle { center, radius } => {
                let dx = z.x - center;
                (dx - radius) * (dx + radius) + z.y * z.y
            }
        }
    }

    /// Angle in `[0, π)` of the unoriented tangent line at a point of the line.
    pub fn tangent_angle(&self, z: HPoint) -> f64 {
        match *self {
            Line::Vertical { .. } => PI / 2.0,
            Line::Circle { center, .. } => (z.x - center).atan2(-z.y).rem_euclid(PI),
        }
    }

    /// Arc-length coordinate along the line: `log tan(α/2)` for the circle
    /// angle α, `log y` for vertical lines. Increases from the right endpoint
    /// to the left one on circles and upwards on vertical lines.
    pub fn coordinate(&self, z: HPoint) -> f64 {
        match *self {
            Line::Vertical { .. } => z.y.ln(),
            Line::Circle { center, .. } => {
                // tan(α/2) = sin α / (1 + cos α) = y / (R + x − m)
                let dx = z.x - center;
                let r = (dx * dx + z.y * z.y).sqrt();
                if dx >= 0.0 {
                    (z.y / (r + dx)).ln()
                } else {
                    ((r - dx) / z.y).ln()
                }
            }
        }
    }

    pub fn point_at(&self, s: f64) -> HPoint {
        match *self {
            Line::Vertical { x } => HPoint { x, y: s.exp() },
            Line::Circle { center, radius } => {
                // α = 2 atan(e^s): cos α = −tanh s, sin α = sech s.
                HPoint {
                    x: center - radius * s.tanh(),
                    y: radius / s.cosh(),
                }
            }
        }
    }
}

/// An unoriented complete geodesic, stored by its two endpoints on ∂ℍ.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct BoundaryGeodesic {
    ends: [BoundaryPoint; 2],
}

impl PartialEq for BoundaryGeodesic {
    fn eq(&self, other: &Self) -> bool {
        self.ends == other.ends
    }
}

impl BoundaryGeodesic {
    pub fn new(p: BoundaryPoint, q: BoundaryPoint) -> Result<Self> {
        if p.approx_eq(q, EPS_ALG) {
            return Err(Error::domain(format!("degenerate geodesic with both ends at {p}")));
        }
        Ok(Self::new_unchecked(p, q))
    }

    pub fn finite(p: f64, q: f64) -> Result<Self> {
        Self::new(BoundaryPoint::Finite(p), BoundaryPoint::Finite(q))
    }

    pub fn vertical(x: f64) -> Self {
        Self::new_unchecked(BoundaryPoint::Finite(x), BoundaryPoint::Infinity)
    }

    fn new_unchecked(p: BoundaryPoint, q: BoundaryPoint) -> Self {
        let ends = if p.order_key() <= q.order_key() { [p, q] } else { [q, p] };
        BoundaryGeodesic { ends }
    }

    /// Endpoints in real-line order, ∞ last.
    pub fn endpoints(&self) -> [BoundaryPoint; 2] {
        self.ends
    }

    pub fn line(&self) -> Line {
        match self.ends {
            [BoundaryPoint::Finite(x), BoundaryPoint::Infinity] => Line::Vertical { x },
            [BoundaryPoint::Finite(u), BoundaryPoint::Finite(v)] => Line::Circle {
                center: 0.5 * (u + v),
                radius: 0.5 * (v - u).abs(),
            },
            _ => unreachable!("geodesic endpoints are distinct"),
        }
    }

    pub fn approx_eq(&self, other: &BoundaryGeodesic, tol: f64) -> bool {
        self.ends[0].approx_eq(other.ends[0], tol) && self.ends[1].approx_eq(other.ends[1], tol)
    }

    /// Whether the endpoint pairs interleave on ∂ℍ, i.e. the lines cross.
    pub fn is_linked(&self, other: &BoundaryGeodesic) -> bool {
        let lo = self.ends[0].order_key();
        let hi = self.ends[1].order_key();
        let inside = |p: BoundaryPoint| {
            let k = p.order_key();
            lo < k && k < hi
        };
        let shared = other.ends.iter().any(|e| e.order_key() == lo || e.order_key() == hi);
        !shared && (inside(other.ends[0]) != inside(other.ends[1]))
    }

    /// The geodesic through `z` whose tangent makes Euclidean angle `phi`
    /// with the positive real direction.
    pub fn through(z: HPoint, phi: f64) -> Self {
        let cos = phi.cos();
        if cos.abs() < 1e-15 {
            return Self::vertical(z.x);
        }
        let center = z.x + z.y * phi.tan();
        let radius = (z.y / cos).abs();
        Self::new_unchecked(
            BoundaryPoint::Finite(center - radius),
            BoundaryPoint::Finite(center + radius),
        )
    }
}

/// Crossing point of two linked geodesics together with the tangent angles.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineCrossing {
    pub point: HPoint,
    /// Tangent angle of the first line at the point, in `[0, π)`.
    pub phi1: f64,
    pub phi2: f64,
    /// Counterclockwise angle from the first line to the second, in `(0, π)`.
    pub theta: f64,
}

/// Intersection of two geodesics. `Ok(None)` for disjoint (unlinked) lines.
pub fn intersect_lines(g1: &BoundaryGeodesic, g2: &BoundaryGeodesic) -> Result<Option<LineCrossing>> {
    if g1.approx_eq(g2, EPS_ALG) {
        return Err(Error::domain(
            "identical geodesics meet tangentially, not transversally",
        ));
    }
    if !g1.is_linked(g2) {
        return Ok(None);
    }
    Ok(crossing_point(&g1.line(), &g2.line()).map(|point| angle_at(&g1.line(), &g2.line(), point)))
}

pub(crate) fn angle_at(l1: &Line, l2: &Line, point: HPoint) -> LineCrossing {
    let phi1 = l1.tangent_angle(point);
    let phi2 = l2.tangent_angle(point);
    let theta = (phi2 - phi1).rem_euclid(PI);
    LineCrossing {
        point,
        phi1,
        phi2,
        theta,
    }
}

/// Euclidean intersection of two lines known to cross.
pub(crate) fn crossing_point(l1: &Line, l2: &Line) -> Option<HPoint> {
    match (*l1, *l2) {
        (Line::Vertical { .. }, Line::Vertical { .. }) => None,
        (Line::Vertical { x }, Line::Circle { center, radius })
        | (Line::Circle { center, radius }, Line::Vertical { x }) => {
            let dx = x - center;
            let y2 = (radius - dx) * (radius + dx);
            (y2 > 0.0).then(|| HPoint { x, y: y2.sqrt() })
        }
        (Line::Circle { center: m1, radius: r1 }, Line::Circle { center: m2, radius: r2 }) => {
            if m1 == m2 {
                return None;
            }
            let x = 0.5 * (m1 + m2) + 0.5 * (r1 - r2) * (r1 + r2) / (m2 - m1);
            // evaluate the height on the smaller circle
            let (m, r) = if r1 <= r2 { (m1, r1) } else { (m2, r2) };
            let dx = x - m;
            let y2 = (r - dx) * (r + dx);
            (y2 > 0.0).then(|| HPoint { x, y: y2.sqrt() })
        }
    }
}

/// Whether `z` lies on `g` within the geometric tolerance.
pub fn on_geodesic(z: HPoint, g: &BoundaryGeodesic) -> bool {
    g.line().distance(z) < EPS_GEOM
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn m(a: f64, b: f64, c: f64, d: f64) -> MoebiusMap {
        MoebiusMap::new(a, b, c, d).unwrap()
    }

    #[test]
    fn classification_examples() {
        assert_eq!(m(2.0, 1.0, 1.0, 1.0).classify(), Classification::Hyperbolic);
        assert_eq!(m(1.0, 1.0, 0.0, 1.0).classify(), Classification::Parabolic);
        assert_eq!(m(0.0, 1.0, -1.0, 0.0).classify(), Classification::Elliptic);
        assert_eq!(m(-1.0, 0.0, 0.0, -1.0).classify(), Classification::Identity);
    }

    #[test]
    fn sign_canonical() {
        let g = m(2.0, 1.0, 1.0, 1.0);
        let h = m(-2.0, -1.0, -1.0, -1.0);
        assert_eq!(g, h);
        assert_eq!(g.classify(), h.classify());
    }

    #[test]
    fn translation_length_against_axis_minimization() {
        let g = m(2.0, 1.0, 1.0, 1.0);
        let l = g.translation_length().unwrap();
        assert_abs_diff_eq!(l, 2.0 * 1.5f64.acosh(), epsilon = 1e-12);
        assert_abs_diff_eq!(l, 1.9248473, epsilon = 1e-7);
        // oracle: minimize d(z, gz) over a grid of points spread around the axis
        let line = g.axis().unwrap().line();
        let mut best = f64::INFINITY;
        for i in -200..=200 {
            let p = line.point_at(i as f64 * 0.01);
            for j in 0..5 {
                let q = HPoint::new_unchecked(p.x + 0.01 * j as f64, p.y);
                best = best.min(hyp_distance(q, g.apply(q)));
            }
        }
        assert_abs_diff_eq!(best, l, epsilon = 1e-9);
        let g2 = g.pow(2);
        assert_abs_diff_eq!(g2.translation_length().unwrap(), 2.0 * l, epsilon = 1e-12);
    }

    #[test]
    fn translation_length_rejects_non_hyperbolic() {
        assert!(m(1.0, 1.0, 0.0, 1.0).translation_length().is_err());
        assert!(m(0.0, 1.0, -1.0, 0.0).axis().is_err());
    }

    #[test]
    fn axis_examples() {
        let g = m(2.0, 1.0, 1.0, 1.0);
        let axis = g.axis().unwrap();
        let s5 = 5f64.sqrt();
        let expected = BoundaryGeodesic::finite((1.0 - s5) / 2.0, (1.0 + s5) / 2.0).unwrap();
        assert!(axis.approx_eq(&expected, 1e-12));
        for e in axis.endpoints() {
            assert!(g.apply_boundary(e).approx_eq(e, 1e-9));
        }
        assert_eq!(axis, g.inverse().axis().unwrap());

        let lam = 3.0;
        let diag = m(lam, 0.0, 0.0, 1.0 / lam);
        let ax = diag.axis().unwrap();
        assert_eq!(ax, BoundaryGeodesic::vertical(0.0));
        let (rep, att) = diag.fixed_points().unwrap();
        assert_eq!(rep, BoundaryPoint::Finite(0.0));
        assert_eq!(att, BoundaryPoint::Infinity);
    }

    #[test]
    fn attracting_fixed_point() {
        let g = m(2.0, 1.0, 1.0, 1.0);
        let (_, att) = g.fixed_points().unwrap();
        let mut z = HPoint::I;
        for _ in 0..40 {
            z = g.apply(z);
        }
        assert!((z.x - att.order_key()).abs() < 1e-9);
    }

    #[test]
    fn distance_examples() {
        assert_abs_diff_eq!(
            hyp_distance(HPoint::I, HPoint::new_unchecked(0.0, 2.0)),
            2f64.ln(),
            epsilon = 1e-14
        );
        assert_eq!(hyp_distance(HPoint::I, HPoint::I), 0.0);
        assert_abs_diff_eq!(
            hyp_distance(HPoint::I, HPoint::new_unchecked(1.0, 1.0)),
            1.5f64.acosh(),
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(
            hyp_distance(HPoint::I, HPoint::new_unchecked(1.0, 1.0)),
            0.9624237,
            epsilon = 1e-7
        );
    }

    #[test]
    fn apply_examples() {
        let t = m(1.0, 1.0, 0.0, 1.0);
        assert_eq!(t.apply(HPoint::I), HPoint::new_unchecked(1.0, 1.0));
        let r = m(0.0, 1.0, -1.0, 0.0);
        let z = r.apply(HPoint::I);
        assert_abs_diff_eq!(z.x, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(z.y, 1.0, epsilon = 1e-15);
        let g = m(2.0, 1.0, 1.0, 1.0);
        assert_eq!(g.apply_boundary(BoundaryPoint::Finite(0.0)), BoundaryPoint::Finite(1.0));
        assert_eq!(g.apply_boundary(BoundaryPoint::Infinity), BoundaryPoint::Finite(2.0));
        assert_eq!(g.apply_boundary(BoundaryPoint::Finite(-1.0)), BoundaryPoint::Infinity);
    }

    #[test]
    fn intersect_examples() {
        let unit = BoundaryGeodesic::finite(-1.0, 1.0).unwrap();
        let imag = BoundaryGeodesic::vertical(0.0);
        let c = intersect_lines(&unit, &imag).unwrap().unwrap();
        assert_abs_diff_eq!(c.point.x, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(c.point.y, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(c.theta, PI / 2.0, epsilon = 1e-15);

        let far = BoundaryGeodesic::finite(2.0, 3.0).unwrap();
        assert!(intersect_lines(&imag, &far).unwrap().is_none());

        let v = BoundaryGeodesic::vertical(0.5);
        let c = intersect_lines(&unit, &v).unwrap().unwrap();
        assert_abs_diff_eq!(c.point.x, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(c.point.y, 0.75f64.sqrt(), epsilon = 1e-15);
        assert!(on_geodesic(c.point, &unit) && on_geodesic(c.point, &v));

        assert!(intersect_lines(&unit, &unit).is_err());
    }

    #[test]
    fn through_point_and_coordinates() {
        let z = HPoint::new_unchecked(0.3, 0.7);
        for phi in [0.1, 0.9, PI / 2.0, 2.0, 3.0] {
            let g = BoundaryGeodesic::through(z, phi);
            let line = g.line();
            assert!(line.distance(z) < 1e-12);
            assert_abs_diff_eq!(line.tangent_angle(z), phi.rem_euclid(PI), epsilon = 1e-12);
            let s = line.coordinate(z);
            let back = line.point_at(s);
            assert_abs_diff_eq!(back.x, z.x, epsilon = 1e-12);
            assert_abs_diff_eq!(back.y, z.y, epsilon = 1e-12);
            let q = line.point_at(s + 0.8);
            assert_abs_diff_eq!(hyp_distance(z, q), 0.8, epsilon = 1e-12);
        }
    }

    fn arb_map() -> impl Strategy<Value = MoebiusMap> {
        (-3.0f64..3.0, -3.0f64..3.0, -3.0f64..3.0, -3.0f64..3.0).prop_filter_map("det > 0.1", |(a, b, c, d)| {
            (a * d - b * c > 0.1).then(|| MoebiusMap::new(a, b, c, d).unwrap())
        })
    }

    fn arb_point() -> impl Strategy<Value = HPoint> {
        (-3.0f64..3.0, 0.05f64..4.0).prop_map(|(x, y)| HPoint::new_unchecked(x, y))
    }

    proptest! {
        #[test]
        fn isometry_invariance(g in arb_map(), z1 in arb_point(), z2 in arb_point()) {
            let d = hyp_distance(z1, z2);
            let dg = hyp_distance(g.apply(z1), g.apply(z2));
            prop_assert!((d - dg).abs() < 1e-9 * (1.0 + d));
            prop_assert!((g.det() - 1.0).abs() < 1e-12);
            prop_assert!((g.compose(&g.inverse()).det() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn axis_fidelity(g in arb_map(), s in -2.0f64..2.0) {
            prop_assume!(g.is_hyperbolic() && g.trace().abs() > 2.05);
            let l = g.translation_length().unwrap();
            let p = g.axis().unwrap().line().point_at(s);
            prop_assert!((hyp_distance(p, g.apply(p)) - l).abs() < 1e-8);
        }

        #[test]
        fn crossing_invariance(g in arb_map(), e in prop::array::uniform4(-3.0f64..3.0)) {
            let g1 = BoundaryGeodesic::finite(e[0], e[1]);
            let g2 = BoundaryGeodesic::finite(e[2], e[3]);
            prop_assume!(g1.is_ok() && g2.is_ok());
            let (g1, g2) = (g1.unwrap(), g2.unwrap());
            prop_assume!((e[0] - e[1]).abs() > 0.05 && (e[2] - e[3]).abs() > 0.05);
            let c = intersect_lines(&g1, &g2).unwrap();
            let cg = intersect_lines(&g.apply_geodesic(&g1), &g.apply_geodesic(&g2)).unwrap();
            prop_assert_eq!(c.is_some(), cg.is_some());
            if let (Some(c), Some(cg)) = (c, cg) {
                let moved = g.apply(c.point);
                prop_assert!(hyp_distance(moved, cg.point) < 1e-7);
                prop_assert!((c.theta - cg.theta).abs() < 1e-7);
            }
        }

        #[test]
        fn sign_flip_stable(g in arb_map()) {
            let [a, b, c, d] = g.entries();
            let h = MoebiusMap::new(-a, -b, -c, -d).unwrap();
            prop_assert_eq!(g, h);
            prop_assert_eq!(g.classify(), h.classify());
        }
    }
}
