//! Liouville measure on the space of geodesics: boxes of endpoint pairs,
//! geodesics crossing an arc, the surface normalization constants and a
//! seeded sampler for the local density `½ sin θ dθ dx`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::hyperbolic::{hyp_distance, BoundaryGeodesic, BoundaryPoint, HPoint, Line, MoebiusMap};
use crate::quadrature::integrate;
use crate::surface::SurfaceSpec;
use crate::{Error, Result};

/// An arc of `ℝ ∪ {∞}` from `start` to `end` in the positive direction
/// (increasing x, wrapping through ∞).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryArc {
    pub start: BoundaryPoint,
    pub end: BoundaryPoint,
}

impl BoundaryArc {
    pub fn new(start: BoundaryPoint, end: BoundaryPoint) -> Self {
        BoundaryArc { start, end }
    }

    pub fn finite(a: f64, b: f64) -> Self {
        BoundaryArc::new(BoundaryPoint::Finite(a), BoundaryPoint::Finite(b))
    }

    pub fn is_degenerate(&self) -> bool {
        self.start == self.end
    }

    /// Whether `p` lies in the closed arc.
    pub fn contains(&self, p: BoundaryPoint) -> bool {
        let (s, e, x) = (self.start.order_key(), self.end.order_key(), p.order_key());
        if s <= e {
            s <= x && x <= e
        } else {
            x >= s || x <= e
        }
    }

    pub fn map(&self, g: &MoebiusMap) -> Self {
        BoundaryArc::new(g.apply_boundary(self.start), g.apply_boundary(self.end))
    }
}

/// Geodesics with one endpoint in each arc.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryBox {
    pub first: BoundaryArc,
    pub second: BoundaryArc,
}

impl BoundaryBox {
    pub fn new(first: BoundaryArc, second: BoundaryArc) -> Result<Self> {
        let b = BoundaryBox { first, second };
        if !first.is_degenerate() && !second.is_degenerate() {
            let touches = first.contains(second.start)
                || first.contains(second.end)
                || second.contains(first.start)
                || second.contains(first.end);
            if touches {
                return Err(Error::domain("box arcs overlap"));
            }
        }
        Ok(b)
    }

    pub fn finite(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        BoundaryBox::new(BoundaryArc::finite(a, b), BoundaryArc::finite(c, d))
    }

    pub fn map(&self, g: &MoebiusMap) -> Result<Self> {
        BoundaryBox::new(self.first.map(g), self.second.map(g))
    }
}

/// `(p − q)`, or `None` when either point is ∞ (the factor cancels).
fn gap(p: BoundaryPoint, q: BoundaryPoint) -> Option<f64> {
    match (p, q) {
        (BoundaryPoint::Finite(x), BoundaryPoint::Finite(y)) => Some(x - y),
        _ => None,
    }
}

/// `|log |(a−c)(b−d) / ((a−d)(b−c))||`, with factors containing ∞ cancelled
/// symbolically.
pub fn box_measure(b: &BoundaryBox) -> f64 {
    if b.first.is_degenerate() || b.second.is_degenerate() {
        return 0.0;
    }
    let (a, bb) = (b.first.start, b.first.end);
    let (c, d) = (b.second.start, b.second.end);
    // each endpoint appears once in the numerator and once in the
    // denominator, so dropping both factors with ∞ leaves the limit
    let num = [gap(a, c), gap(bb, d)];
    let den = [gap(a, d), gap(bb, c)];
    let prod = |fs: [Option<f64>; 2]| fs.iter().flatten().product::<f64>();
    (prod(num) / prod(den)).abs().ln().abs()
}

/// Orientation-preserving isometry taking `z1` to `i` and `z2` to `e^s i`,
/// `s = d(z1, z2)`.
pub fn isometry_to_axis(z1: HPoint, z2: HPoint) -> Result<MoebiusMap> {
    if hyp_distance(z1, z2) == 0.0 {
        return Err(Error::domain("arc has zero length"));
    }
    let line = if (z1.x - z2.x).abs() <= 1e-14 * (1.0 + z1.x.abs()) {
        Line::Vertical { x: z1.x }
    } else {
        let m = (z2.x * z2.x + z2.y * z2.y - z1.x * z1.x - z1.y * z1.y) / (2.0 * (z2.x - z1.x));
        Line::Circle {
            center: m,
            radius: (z1.x - m).hypot(z1.y),
        }
    };
    // p is the endpoint behind z1, q the one ahead of z2
    let forward = line.coordinate(z2) > line.coordinate(z1);
    let (p, q) = match line {
        Line::Vertical { x } => (BoundaryPoint::Finite(x), BoundaryPoint::Infinity),
        Line::Circle { center, radius } => (
            BoundaryPoint::Finite(center + radius),
            BoundaryPoint::Finite(center - radius),
        ),
    };
    let (p, q) = if forward { (p, q) } else { (q, p) };
    // send p ↦ 0, q ↦ ∞
    let g = match (p, q) {
        (BoundaryPoint::Finite(p), BoundaryPoint::Finite(q)) => {
            if q > p {
                MoebiusMap::new(1.0, -p, -1.0, q)?
            } else {
                MoebiusMap::new(1.0, -p, 1.0, -q)?
            }
        }
        (BoundaryPoint::Finite(p), BoundaryPoint::Infinity) => MoebiusMap::new(1.0, -p, 0.0, 1.0)?,
        (BoundaryPoint::Infinity, BoundaryPoint::Finite(q)) => MoebiusMap::new(0.0, -1.0, 1.0, -q)?,
        _ => unreachable!("a geodesic has distinct endpoints"),
    };
    let y = g.apply(z1).y;
    Ok(MoebiusMap::new(1.0 / y, 0.0, 0.0, 1.0)?.compose(&g))
}

/// The two independent evaluations of the measure of geodesics crossing an arc.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArcMeasure {
    pub length: f64,
    /// `∫_0^s ∫_0^π ½ sin θ dθ dx` by adaptive quadrature.
    pub quadrature: f64,
    /// Sum of box measures over a dyadic box decomposition, extrapolated.
    pub boxes: f64,
    /// Dyadic levels used by the box path.
    pub levels: u32,
}

const QUAD_TOL: f64 = 1e-9;
const BOX_TOL: f64 = 1e-7;
const MAX_LEVEL: u32 = 10;
/// Tail cut in log-endpoint coordinates; the discarded mass is below e^{-2·TAIL}.
const TAIL: f64 = 12.0;

/// Crossing set of the axis segment `[i, e^s i]` as `(log|u|, log v)` with
/// `u < 0 < v`: the strip `0 ≤ log|u| + log v ≤ 2s`. Columns in `log v`
/// are replaced by the box over their sheared midpoint; the column error is
/// even in the width, so Romberg extrapolation applies.
fn column_sum(s: f64, columns: usize, back: &MoebiusMap) -> Result<f64> {
    let (lo, hi) = (-TAIL, s + TAIL);
    let h = (hi - lo) / columns as f64;
    let mut total = 0.0;
    for k in 0..columns {
        let b0 = lo + k as f64 * h;
        let b1 = b0 + h;
        let bm = 0.5 * (b0 + b1);
        let v_arc = BoundaryArc::finite(b0.exp(), b1.exp());
        let u_arc = BoundaryArc::finite(-(2.0 * s - bm).exp(), -(-bm).exp());
        // evaluated in the arc's own coordinates
        total += box_measure(&BoundaryBox::new(u_arc, v_arc)?.map(back)?);
    }
    Ok(total)
}

pub fn arc_crossing_measure(z1: HPoint, z2: HPoint) -> Result<ArcMeasure> {
    let to_axis = isometry_to_axis(z1, z2)?;
    let back = to_axis.inverse();
    let s = hyp_distance(z1, z2);
    let inner = integrate(|t| 0.5 * t.sin(), 0.0, PI, QUAD_TOL / (2.0 * s.max(1.0)))?;
    let quadrature = integrate(|_| inner, 0.0, s, QUAD_TOL)?;

    // Romberg table over dyadic column counts 2^0 .. 2^MAX_LEVEL
    let mut prev_row: Vec<f64> = Vec::new();
    let mut best = f64::NAN;
    let mut levels = 0;
    for level in 0..=MAX_LEVEL {
        let mut row = vec![column_sum(s, 1 << level, &back)?];
        for j in 1..=level as usize {
            let f = 4f64.powi(j as i32);
            let v = (f * row[j - 1] - prev_row[j - 1]) / (f - 1.0);
            row.push(v);
        }
        let estimate = *row.last().unwrap();
        levels = level;
        if level >= 2 && (estimate - best).abs() < BOX_TOL {
            best = estimate;
            break;
        }
        best = estimate;
        prev_row = row;
    }
    Ok(ArcMeasure {
        length: s,
        quadrature,
        boxes: best,
        levels,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceConstants {
    /// `ℓ_X(L_X) = π²(2g − 2 + n)`.
    pub liouville_length: f64,
    /// `i(L_X, L_X)`, equal to the above.
    pub self_intersection: f64,
    /// Pushforward of the intersection measure is this multiple of area.
    pub pushforward_factor: f64,
}

pub fn surface_constants(spec: &SurfaceSpec) -> SurfaceConstants {
    let c = PI * PI * spec.euler_magnitude();
    SurfaceConstants {
        liouville_length: c,
        self_intersection: c,
        pushforward_factor: PI / 2.0,
    }
}

/// Rectangle in `(x, θ)`: arc-length position `x` along a reference
/// geodesic and angle `θ` from its direction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiouvilleWindow {
    pub reference: BoundaryGeodesic,
    pub x: (f64, f64),
    pub theta: (f64, f64),
}

impl LiouvilleWindow {
    /// Full angle range over `[x0, x1]`.
    pub fn along(reference: BoundaryGeodesic, x0: f64, x1: f64) -> Self {
        LiouvilleWindow {
            reference,
            x: (x0, x1),
            theta: (0.0, PI),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiouvilleSample {
    pub x: f64,
    pub theta: f64,
    pub point: HPoint,
    pub geodesic: BoundaryGeodesic,
}

/// Samples with density proportional to `½ sin θ dθ dx` on the window.
pub fn sample_liouville(window: &LiouvilleWindow, count: usize, seed: u64) -> Result<Vec<LiouvilleSample>> {
    if count == 0 {
        return Err(Error::domain("sample count must be positive"));
    }
    let (t0, t1) = window.theta;
    if !(0.0..=PI).contains(&t0) || !(t0..=PI).contains(&t1) {
        return Err(Error::domain(format!("angle window [{t0}, {t1}] is not inside [0, π]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let line = window.reference.line();
    let (c0, c1) = (t0.cos(), t1.cos());
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let u: f64 = rng.gen();
        let w: f64 = rng.gen();
        let x = window.x.0 + u * (window.x.1 - window.x.0);
        // inverse CDF of sin θ restricted to [t0, t1]
        let theta = (c0 - w * (c0 - c1)).clamp(-1.0, 1.0).acos();
        let point = line.point_at(x);
        let geodesic = BoundaryGeodesic::through(point, line.tangent_angle(point) + theta);
        out.push(LiouvilleSample {
            x,
            theta,
            point,
            geodesic,
        });
    }
    Ok(out)
}

/// Analytic CDF of the angle law on `(0, π)`.
pub fn angle_cdf(theta: f64) -> f64 {
    0.5 * (1.0 - theta.clamp(0.0, PI).cos())
}
