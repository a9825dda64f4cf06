//! Concrete surfaces `ℍ/Γ` given by a convex fundamental polygon with side
//! pairings.
//!
//! Side conventions: side `k` runs from vertex `k` to vertex `k + 1` with the
//! polygon on its left. Crossing side `k` outward enters the neighbouring tile
//! `g·F` where `g` is the generator named by the side's letter; the side's
//! pairing map `g⁻¹` carries it onto its partner.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::hyperbolic::{hyp_distance, BoundaryGeodesic, BoundaryPoint, HPoint, Line, MoebiusMap};
use crate::tolerance::{EPS_ALG, EPS_GEOM};
use crate::words::{inverse_letter, letter_char, Letter, Word};
use crate::{Error, Result};

const NORMALIZE_STEP_LIMIT: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurfaceKind {
    PuncturedTorus,
    Genus2Octagon,
}

impl SurfaceKind {
    pub const NAMES: [&'static str; 2] = ["punctured_torus", "genus2_octagon"];

    pub fn name(self) -> &'static str {
        match self {
            SurfaceKind::PuncturedTorus => Self::NAMES[0],
            SurfaceKind::Genus2Octagon => Self::NAMES[1],
        }
    }

    pub fn build(self) -> Result<SurfaceSpec> {
        match self {
            SurfaceKind::PuncturedTorus => build_punctured_torus(),
            SurfaceKind::Genus2Octagon => build_genus2_octagon(),
        }
    }
}

impl FromStr for SurfaceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "punctured_torus" => Ok(SurfaceKind::PuncturedTorus),
            "genus2_octagon" => Ok(SurfaceKind::Genus2Octagon),
            _ => Err(Error::Config(format!(
                "unknown surface {s:?}; valid options: {}",
                Self::NAMES.join(", ")
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Vertex {
    Ideal(BoundaryPoint),
    Interior(HPoint),
}

#[derive(Clone, Debug)]
pub struct Generator {
    pub label: char,
    pub matrix: MoebiusMap,
}

#[derive(Clone, Debug)]
pub struct Side {
    pub index: usize,
    pub start: Vertex,
    pub end: Vertex,
    pub geodesic: BoundaryGeodesic,
    pub line: Line,
    pub partner: usize,
    /// Letter of the tile across this side.
    pub letter: Letter,
    /// Maps this side onto its partner; equals the inverse of the letter's matrix.
    pub pairing: MoebiusMap,
    interior_sign: f64,
}

impl Side {
    /// Positive inside the polygon's half-plane.
    pub fn inner_value(&self, z: HPoint) -> f64 {
        self.interior_sign * self.line.side(z)
    }

    pub fn is_outside(&self, z: HPoint) -> bool {
        self.inner_value(z) < 0.0 && self.line.distance(z) > EPS_GEOM
    }
}

/// One ideal vertex of the polygon seen as a lift of a cusp.
#[derive(Clone, Debug)]
pub struct CuspVertex {
    pub vertex: usize,
    pub point: BoundaryPoint,
    /// Sends the vertex to ∞ and conjugates its stabilizer to `z ↦ z + 1`.
    pub normalizer: MoebiusMap,
    /// Generator of the vertex stabilizer, `normalizer⁻¹ ∘ (z ↦ z+1) ∘ normalizer`.
    pub parabolic: MoebiusMap,
    pub parabolic_word: Word,
}

impl CuspVertex {
    /// Height in normalized coordinates; the horoball `N(r)` is `height > 1/r`.
    pub fn height(&self, z: HPoint) -> f64 {
        self.normalizer.apply(z).y
    }
}

#[derive(Clone, Debug)]
pub struct CuspData {
    pub vertices: Vec<CuspVertex>,
}

impl CuspData {
    /// The polygon vertex whose horoball piece is deepest at `z`, with its height.
    pub fn deepest(&self, z: HPoint) -> (usize, f64) {
        self.vertices
            .iter()
            .enumerate()
            .map(|(i, v)| (i, v.height(z)))
            .fold(
                (0, f64::NEG_INFINITY),
                |best, cur| if cur.1 > best.1 { cur } else { best },
            )
    }

    pub fn in_horoball(&self, z: HPoint, r: f64) -> bool {
        self.deepest(z).1 > 1.0 / r
    }
}

/// A finite-area hyperbolic surface with its fundamental polygon.
#[derive(Clone, Debug)]
pub struct SurfaceSpec {
    pub kind: SurfaceKind,
    pub generators: Vec<Generator>,
    pub vertices: Vec<Vertex>,
    pub sides: Vec<Side>,
    pub genus: u32,
    pub cusp_count: u32,
    pub cusps: Vec<CuspData>,
    /// Interior reference point.
    pub center: HPoint,
    letter_matrices: Vec<MoebiusMap>,
    side_of_letter: Vec<usize>,
    /// Largest distance from `center` to the polygon minus the `N(1)` cusp pieces.
    core_radius: f64,
}

impl SurfaceSpec {
    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    /// `2g − 2 + n`.
    pub fn euler_magnitude(&self) -> f64 {
        (2 * self.genus + self.cusp_count) as f64 - 2.0
    }

    pub fn expected_area(&self) -> f64 {
        2.0 * PI * self.euler_magnitude()
    }

    pub fn alphabet_size(&self) -> usize {
        self.letter_matrices.len()
    }

    pub fn letter_matrix(&self, x: Letter) -> Result<MoebiusMap> {
        self.letter_matrices.get(x as usize).copied().ok_or_else(|| {
            Error::domain(format!(
                "letter {} is not a generator of {}",
                letter_char(x),
                self.name()
            ))
        })
    }

    /// Index of the side across which lies the tile `x·F`.
    pub fn side_of_letter(&self, x: Letter) -> usize {
        self.side_of_letter[x as usize]
    }

    pub fn is_cusped(&self) -> bool {
        !self.cusps.is_empty()
    }

    pub fn cusp(&self) -> Result<&CuspData> {
        self.cusps
            .first()
            .ok_or_else(|| Error::domain(format!("{} has no cusps", self.name())))
    }

    pub fn core_radius(&self) -> f64 {
        self.core_radius
    }

    /// Closed polygon membership with tolerance ε_geom.
    pub fn contains(&self, z: HPoint) -> bool {
        self.sides.iter().all(|s| !s.is_outside(z))
    }

    /// Distance from `z` to the polygon. Exact for ideal polygons, a lower
    /// bound when sides are finite segments.
    pub fn distance_to_polygon(&self, z: HPoint) -> f64 {
        let mut best = f64::INFINITY;
        let mut outside = false;
        for s in &self.sides {
            if s.inner_value(z) < 0.0 {
                outside = true;
                best = best.min(s.line.distance(z));
            }
        }
        if outside {
            best
        } else {
            0.0
        }
    }

    /// Moves `z` into the closed polygon. Returns `(z′, h)` with `h·z = z′`.
    pub fn normalize_to_domain(&self, z: HPoint) -> Result<(HPoint, MoebiusMap)> {
        let mut cur = z;
        let mut h = MoebiusMap::IDENTITY;
        for _ in 0..NORMALIZE_STEP_LIMIT {
            // farthest violated side first; ties keep the lowest index
            let violated = self
                .sides
                .iter()
                .filter(|s| s.is_outside(cur))
                .map(|s| (s, s.line.distance(cur)))
                .fold(None::<(&Side, f64)>, |best, cur| match best {
                    Some(b) if b.1 >= cur.1 => Some(b),
                    _ => Some(cur),
                });
            let Some((side, _)) = violated else {
                return Ok((cur, h));
            };
            cur = side.pairing.apply(cur);
            h = side.pairing.compose(&h);
        }
        Err(Error::NumericalInstability(format!(
            "point ({}, {}) not located in the fundamental polygon after {NORMALIZE_STEP_LIMIT} steps",
            z.x, z.y
        )))
    }

    /// Interior angle at each vertex; zero at ideal vertices.
    pub fn vertex_angles(&self) -> Vec<f64> {
        let n = self.vertices.len();
        (0..n)
            .map(|k| match self.vertices[k] {
                Vertex::Ideal(_) => 0.0,
                Vertex::Interior(p) => {
                    let prev = &self.sides[(k + n - 1) % n];
                    let next = &self.sides[k];
                    let q_prev = vertex_point_on(prev.start, &prev.line);
                    let q_next = vertex_point_on(next.end, &next.line);
                    let t1 = tangent_toward(&prev.line, p, q_prev);
                    let t2 = tangent_toward(&next.line, p, q_next);
                    let cos = (t1.0 * t2.0 + t1.1 * t2.1) / (t1.0.hypot(t1.1) * t2.0.hypot(t2.1));
                    cos.clamp(-1.0, 1.0).acos()
                }
            })
            .collect()
    }

    /// Gauss–Bonnet area `(k − 2)π − Σ angles`.
    pub fn area(&self) -> Result<f64> {
        polygon_area(self.vertices.len(), &self.vertex_angles())
    }

    /// Checks pairings, cusp normalizers and the area formula.
    pub fn validate(&self) -> Result<()> {
        for s in &self.sides {
            let partner = &self.sides[s.partner];
            if partner.partner != s.index || s.partner == s.index {
                return Err(Error::Config(format!(
                    "side pairing is not an involution at side {}",
                    s.index
                )));
            }
            let img = [map_vertex(&s.pairing, s.start), map_vertex(&s.pairing, s.end)];
            let target = [partner.start, partner.end];
            let direct = vertex_close(img[0], target[0]) && vertex_close(img[1], target[1]);
            let swapped = vertex_close(img[0], target[1]) && vertex_close(img[1], target[0]);
            if !(direct || swapped) {
                return Err(Error::Config(format!(
                    "pairing of side {} does not carry it onto side {}",
                    s.index, partner.index
                )));
            }
            if !s
                .pairing
                .inverse()
                .approx_eq(&self.letter_matrices[s.letter as usize], EPS_ALG)
            {
                return Err(Error::Config(format!(
                    "side {} pairing disagrees with its letter",
                    s.index
                )));
            }
        }
        for g in &self.generators {
            if !g.matrix.is_hyperbolic() {
                return Err(Error::Config(format!("generator {} is not hyperbolic", g.label)));
            }
        }
        let translate = MoebiusMap::new(1.0, 1.0, 0.0, 1.0)?;
        for cusp in &self.cusps {
            for v in &cusp.vertices {
                let conj = v.normalizer.inverse().compose(&translate).compose(&v.normalizer);
                if !conj.approx_eq(&v.parabolic, EPS_ALG) {
                    return Err(Error::Config(format!(
                        "cusp normalizer at vertex {} is inconsistent",
                        v.vertex
                    )));
                }
                let from_word = self.word_matrix(&v.parabolic_word)?;
                if !from_word.approx_eq(&v.parabolic, EPS_ALG) {
                    return Err(Error::Config(format!("parabolic word at vertex {} is wrong", v.vertex)));
                }
            }
        }
        if 2 * self.genus + self.cusp_count <= 2 {
            return Err(Error::Config("surface is not of hyperbolic type".into()));
        }
        let area = self.area()?;
        if (area - self.expected_area()).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "polygon area {area} differs from 2π(2g−2+n) = {}",
                self.expected_area()
            )));
        }
        Ok(())
    }

    /// Ordered product of the letters' matrices.
    pub fn word_matrix(&self, word: &Word) -> Result<MoebiusMap> {
        word.letters()
            .iter()
            .try_fold(MoebiusMap::IDENTITY, |acc, &x| Ok(acc.compose(&self.letter_matrix(x)?)))
    }

    /// Human-readable description: generators, polygon, pairings, area.
    pub fn describe(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "surface: {}", self.name());
        let _ = writeln!(out, "genus: {}", self.genus);
        let _ = writeln!(out, "cusps: {}", self.cusp_count);
        for g in &self.generators {
            let _ = writeln!(out, "generator {}: {}", g.label, g.matrix);
        }
        for (k, v) in self.vertices.iter().enumerate() {
            let text = match v {
                Vertex::Ideal(p) => format!("ideal {p}"),
                Vertex::Interior(p) => format!("interior ({:.12}, {:.12})", p.x, p.y),
            };
            let _ = writeln!(out, "vertex {k}: {text}");
        }
        for s in &self.sides {
            let [p, q] = s.geodesic.endpoints();
            let _ = writeln!(
                out,
                "side {}: geodesic {{{p}, {q}}} letter {} partner {}",
                s.index,
                letter_char(s.letter),
                s.partner
            );
        }
        let area = self.area().unwrap_or(f64::NAN);
        let _ = writeln!(out, "area: {area:.12}");
        out
    }
}

fn polygon_area(vertex_count: usize, angles: &[f64]) -> Result<f64> {
    if vertex_count < 3 {
        return Err(Error::domain(format!(
            "polygon with {vertex_count} vertices is degenerate"
        )));
    }
    Ok((vertex_count as f64 - 2.0) * PI - angles.iter().sum::<f64>())
}

fn vertex_point_on(v: Vertex, line: &Line) -> HPoint {
    match v {
        Vertex::Interior(p) => p,
        Vertex::Ideal(_) => line.point_at(0.0),
    }
}

/// Euclidean tangent of `line` at `p` pointing toward `q` along the line.
fn tangent_toward(line: &Line, p: HPoint, q: HPoint) -> (f64, f64) {
    match *line {
        Line::Vertical { .. } => (0.0, (q.y - p.y).signum()),
        Line::Circle { center, .. } => {
            let t = (-p.y, p.x - center);
            if t.0 * (q.x - p.x) + t.1 * (q.y - p.y) >= 0.0 {
                t
            } else {
                (-t.0, -t.1)
            }
        }
    }
}

fn map_vertex(g: &MoebiusMap, v: Vertex) -> Vertex {
    match v {
        Vertex::Ideal(p) => Vertex::Ideal(g.apply_boundary(p)),
        Vertex::Interior(p) => Vertex::Interior(g.apply(p)),
    }
}

fn vertex_close(a: Vertex, b: Vertex) -> bool {
    match (a, b) {
        (Vertex::Ideal(p), Vertex::Ideal(q)) => p.approx_eq(q, EPS_GEOM),
        (Vertex::Interior(p), Vertex::Interior(q)) => hyp_distance(p, q) < EPS_GEOM,
        _ => false,
    }
}

struct SideInput {
    start: Vertex,
    end: Vertex,
    geodesic: BoundaryGeodesic,
    partner: usize,
    letter: Letter,
}

struct Assembly {
    kind: SurfaceKind,
    generators: Vec<Generator>,
    vertices: Vec<Vertex>,
    sides: Vec<SideInput>,
    genus: u32,
    cusp_count: u32,
    center: HPoint,
    /// `(vertex index, normalizer)` for each ideal vertex of the single cusp.
    cusp_normalizers: Vec<(usize, MoebiusMap)>,
}

fn assemble(a: Assembly) -> Result<SurfaceSpec> {
    let mut letter_matrices = Vec::with_capacity(2 * a.generators.len());
    for g in &a.generators {
        letter_matrices.push(g.matrix);
        letter_matrices.push(g.matrix.inverse());
    }
    let mut side_of_letter = vec![usize::MAX; letter_matrices.len()];
    let mut sides = Vec::with_capacity(a.sides.len());
    for (index, s) in a.sides.into_iter().enumerate() {
        let line = s.geodesic.line();
        let interior_sign = line.side(a.center).signum();
        side_of_letter[s.letter as usize] = index;
        sides.push(Side {
            index,
            start: s.start,
            end: s.end,
            geodesic: s.geodesic,
            line,
            partner: s.partner,
            letter: s.letter,
            pairing: letter_matrices[s.letter as usize].inverse(),
            interior_sign,
        });
    }
    if side_of_letter.contains(&usize::MAX) {
        return Err(Error::Config("every letter must label exactly one side".into()));
    }
    let mut spec = SurfaceSpec {
        kind: a.kind,
        generators: a.generators,
        vertices: a.vertices,
        sides,
        genus: a.genus,
        cusp_count: a.cusp_count,
        cusps: Vec::new(),
        center: a.center,
        letter_matrices,
        side_of_letter,
        core_radius: 0.0,
    };
    if !a.cusp_normalizers.is_empty() {
        let translate = MoebiusMap::new(1.0, 1.0, 0.0, 1.0)?;
        let mut vertices = Vec::new();
        for (vertex, normalizer) in a.cusp_normalizers {
            let Vertex::Ideal(point) = spec.vertices[vertex] else {
                return Err(Error::Config(format!("cusp vertex {vertex} is not ideal")));
            };
            let parabolic = normalizer.inverse().compose(&translate).compose(&normalizer);
            let parabolic_word = find_word(&spec, &parabolic, 8).ok_or_else(|| {
                Error::Config(format!(
                    "normalized parabolic at vertex {vertex} is not a short group word"
                ))
            })?;
            vertices.push(CuspVertex {
                vertex,
                point,
                normalizer,
                parabolic,
                parabolic_word,
            });
        }
        spec.cusps.push(CuspData { vertices });
    }
    spec.core_radius = compute_core_radius(&spec);
    spec.validate()?;
    Ok(spec)
}

/// Reduced word of length at most `max_len` whose matrix equals `target`.
fn find_word(spec: &SurfaceSpec, target: &MoebiusMap, max_len: usize) -> Option<Word> {
    let mut frontier: Vec<(Vec<Letter>, MoebiusMap)> = vec![(Vec::new(), MoebiusMap::IDENTITY)];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for (letters, m) in &frontier {
            for x in 0..spec.alphabet_size() as Letter {
                if letters.last() == Some(&inverse_letter(x)) {
                    continue;
                }
                let g = m.compose(&spec.letter_matrices[x as usize]);
                let mut w = letters.clone();
                w.push(x);
                if g.approx_eq(target, EPS_ALG) {
                    return Some(Word::from_letters(w));
                }
                next.push((w, g));
            }
        }
        frontier = next;
    }
    None
}

fn compute_core_radius(spec: &SurfaceSpec) -> f64 {
    let c = spec.center;
    let mut best: f64 = 0.0;
    for v in &spec.vertices {
        if let Vertex::Interior(p) = v {
            best = best.max(hyp_distance(c, *p));
        }
    }
    for cusp in &spec.cusps {
        for v in &cusp.vertices {
            // the boundary of N(1) at this vertex: normalized height 1
            let back = v.normalizer.inverse();
            let steps = 20_000;
            let half_width = 8.0;
            for i in 0..=steps {
                let x = -half_width + 2.0 * half_width * i as f64 / steps as f64;
                let z = back.apply(HPoint::new_unchecked(x, 1.0));
                if spec.contains(z) {
                    best = best.max(hyp_distance(c, z));
                }
            }
        }
    }
    // sampling step is below 1e-3 in arc length
    best + 1e-2
}

/// Ideal quadrilateral `∞, −1, 0, 1` with generators
/// `a = [[1,1],[1,2]]`, `b = [[1,−1],[−1,2]]`; the commutator is parabolic.
pub fn build_punctured_torus() -> Result<SurfaceSpec> {
    use BoundaryPoint::{Finite, Infinity};
    let a = MoebiusMap::new(1.0, 1.0, 1.0, 2.0)?;
    let b = MoebiusMap::new(1.0, -1.0, -1.0, 2.0)?;
    let ideal = |p| Vertex::Ideal(p);
    let vertices = vec![
        ideal(Infinity),
        ideal(Finite(-1.0)),
        ideal(Finite(0.0)),
        ideal(Finite(1.0)),
    ];
    let side = |k: usize, partner: usize, letter: Letter| -> Result<SideInput> {
        let (Vertex::Ideal(p), Vertex::Ideal(q)) = (vertices[k], vertices[(k + 1) % 4]) else {
            unreachable!()
        };
        Ok(SideInput {
            start: vertices[k],
            end: vertices[(k + 1) % 4],
            geodesic: BoundaryGeodesic::new(p, q)?,
            partner,
            letter,
        })
    };
    // letters: a = 0, A = 1, b = 2, B = 3
    let sides = vec![side(0, 2, 1)?, side(1, 3, 2)?, side(2, 0, 0)?, side(3, 1, 3)?];
    // width-6 cusp; each normalizer sends its vertex to ∞ and scales by 1/6
    let cusp_normalizers = vec![
        (0, MoebiusMap::new(1.0, 0.0, 0.0, 6.0)?),
        (1, MoebiusMap::new(0.0, -1.0, 6.0, 6.0)?),
        (2, MoebiusMap::new(0.0, -1.0, 6.0, 0.0)?),
        (3, MoebiusMap::new(0.0, -1.0, 6.0, -6.0)?),
    ];
    assemble(Assembly {
        kind: SurfaceKind::PuncturedTorus,
        generators: vec![Generator { label: 'a', matrix: a }, Generator { label: 'b', matrix: b }],
        vertices,
        sides,
        genus: 1,
        cusp_count: 1,
        center: HPoint::I,
        cusp_normalizers,
    })
}

/// Rotation about `i` by `phi` counterclockwise.
pub fn rotation_about_i(phi: f64) -> MoebiusMap {
    let (s, c) = (phi / 2.0).sin_cos();
    MoebiusMap::new(c, s, -s, c).expect("rotation has unit determinant")
}

/// Regular octagon centred at `i` with vertex angles `π/4`; opposite sides
/// are paired by translations through the centre.
pub fn build_genus2_octagon() -> Result<SurfaceSpec> {
    let sqrt2 = 2f64.sqrt();
    let circumradius = (3.0 + 2.0 * sqrt2).acosh();
    let inradius = (1.0 + sqrt2).acosh();
    let vertex_at = |angle: f64| rotation_about_i(angle).apply(HPoint::new_unchecked(0.0, circumradius.exp()));
    let vertices: Vec<Vertex> = (0..8)
        .map(|k| Vertex::Interior(vertex_at(k as f64 * PI / 4.0 - PI / 8.0)))
        .collect();
    let foot = inradius.exp();
    let base_side = BoundaryGeodesic::finite(-foot, foot)?;
    let shift = MoebiusMap::new((inradius).exp(), 0.0, 0.0, (-inradius).exp())?;
    let mut translations = Vec::new();
    for k in 0..4 {
        let rot = rotation_about_i(k as f64 * PI / 4.0);
        translations.push(shift.conjugate_by(&rot));
    }
    let generators: Vec<Generator> = translations
        .iter()
        .zip(['a', 'b', 'c', 'd'])
        .map(|(m, label)| Generator { label, matrix: *m })
        .collect();
    let mut sides = Vec::new();
    for k in 0..8usize {
        let rot = rotation_about_i(k as f64 * PI / 4.0);
        let letter = if k < 4 {
            2 * k as Letter
        } else {
            2 * (k - 4) as Letter + 1
        };
        sides.push(SideInput {
            start: vertices[k],
            end: vertices[(k + 1) % 8],
            geodesic: rot.apply_geodesic(&base_side),
            partner: (k + 4) % 8,
            letter,
        });
    }
    assemble(Assembly {
        kind: SurfaceKind::Genus2Octagon,
        generators,
        vertices,
        sides,
        genus: 2,
        cusp_count: 0,
        center: HPoint::I,
        cusp_normalizers: Vec::new(),
    })
}
