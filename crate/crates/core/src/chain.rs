//! A closed geodesic cut into chords of the fundamental polygon.
//!
//! Each chord is computed from scratch as the part inside the polygon of the
//! axis of a conjugate `H g H⁻¹`, where `H` is the product of the side
//! pairings applied so far. For integer groups the conjugates stay exact, so
//! rounding error does not accumulate along long chains.

use serde::{Deserialize, Serialize};

use crate::enumerate::ClosedGeodesicClass;
use crate::hyperbolic::{hyp_distance, intersect_lines, BoundaryGeodesic, BoundaryPoint, HPoint, Line, MoebiusMap};
use crate::surface::{SurfaceSpec, Vertex};
use crate::tolerance::EPS_GEOM;
use crate::words::{CyclicWord, Letter, Word};
use crate::{Error, Result};

const MAX_CHORDS: usize = 1_000_000;
const LENGTH_TOL: f64 = 1e-6;
const RESTARTS: usize = 3;

/// A geodesic line with a direction of travel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrientedGeodesic {
    pub from: BoundaryPoint,
    pub to: BoundaryPoint,
}

impl OrientedGeodesic {
    pub fn of_axis(g: &MoebiusMap) -> Result<Self> {
        let (from, to) = g.fixed_points()?;
        Ok(OrientedGeodesic { from, to })
    }

    pub fn unoriented(&self) -> BoundaryGeodesic {
        BoundaryGeodesic::new(self.from, self.to).expect("axis endpoints are distinct")
    }

    /// `+1` when travel increases the line coordinate of [`Line::coordinate`].
    pub fn direction(&self) -> f64 {
        match (self.from, self.to) {
            (_, BoundaryPoint::Infinity) => 1.0,
            (BoundaryPoint::Infinity, _) => -1.0,
            (BoundaryPoint::Finite(a), BoundaryPoint::Finite(b)) => {
                if b < a {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeodesicSegment {
    pub class_id: usize,
    pub pass: usize,
    pub start: HPoint,
    pub end: HPoint,
    pub geodesic: BoundaryGeodesic,
    /// Line coordinates of `start` and `end`; travel runs from the first to the second.
    pub s_start: f64,
    pub s_end: f64,
    pub entry_side: usize,
    pub exit_side: usize,
    pub length: f64,
}

impl GeodesicSegment {
    pub fn line(&self) -> Line {
        self.geodesic.line()
    }

    /// Coordinate interval `[lo, hi]` covered by the chord.
    pub fn coordinate_range(&self) -> (f64, f64) {
        (self.s_start.min(self.s_end), self.s_start.max(self.s_end))
    }

    pub fn point_at_fraction(&self, f: f64) -> HPoint {
        self.line().point_at(self.s_start + f * (self.s_end - self.s_start))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentChain {
    pub class_id: usize,
    pub segments: Vec<GeodesicSegment>,
    /// Letters of the sides crossed, in order; the cutting sequence.
    pub letter_trace: Word,
    pub length: f64,
    /// `K = Σ_{k ≤ k_max} k` of the class; weights every crossing of this chain.
    pub pass_weight: u64,
}

impl SegmentChain {
    pub fn total_segment_length(&self) -> f64 {
        self.segments.iter().map(|s| s.length).sum()
    }
}

pub fn trace_chain(class: &ClosedGeodesicClass, spec: &SurfaceSpec) -> Result<SegmentChain> {
    let mut chain = trace_matrix(spec, &class.matrix, class.id)?;
    chain.pass_weight = class.pass_weight();
    let traced = CyclicWord::new(&chain.letter_trace)?;
    if traced != class.word {
        return Err(Error::consistency(format!(
            "cutting sequence {traced} of class {} differs from its word {}",
            class.id, class.word
        )));
    }
    Ok(chain)
}

/// Cutting sequence of the closed geodesic of a hyperbolic element.
pub fn cutting_word(spec: &SurfaceSpec, g: &MoebiusMap) -> Result<Word> {
    Ok(trace_matrix(spec, g, 0)?.letter_trace)
}

/// Chord of the oriented axis inside the polygon: `(entry side, entry point,
/// exit side, exit point)`, or `None` if the axis misses the polygon.
fn chord(spec: &SurfaceSpec, axis: &OrientedGeodesic) -> Result<Option<Chord>> {
    let geodesic = axis.unoriented();
    let line = geodesic.line();
    let dir = axis.direction();
    let mut hits: Vec<(f64, usize, HPoint)> = Vec::with_capacity(2);
    for side in &spec.sides {
        if side.geodesic.approx_eq(&geodesic, 1e-12) {
            return Err(Error::NumericalInstability(format!(
                "closed geodesic runs along side {}",
                side.index
            )));
        }
        if let Some(c) = intersect_lines(&geodesic, &side.geodesic)? {
            if spec.contains(c.point) {
                hits.push((dir * line.coordinate(c.point), side.index, c.point));
            }
        }
    }
    if hits.is_empty() {
        return Ok(None);
    }
    for v in &spec.vertices {
        if let Vertex::Interior(p) = v {
            if hits.iter().any(|h| hyp_distance(h.2, *p) < EPS_GEOM) {
                return Err(Error::NumericalInstability(
                    "geodesic passes through a polygon vertex".into(),
                ));
            }
        }
    }
    hits.sort_by(|a, b| a.0.total_cmp(&b.0));
    if hits.len() != 2 {
        return Err(Error::NumericalInstability(format!(
            "axis meets the polygon boundary {} times",
            hits.len()
        )));
    }
    let (entry, exit) = (hits[0], hits[1]);
    Ok(Some(Chord {
        geodesic,
        entry_side: entry.1,
        entry: entry.2,
        exit_side: exit.1,
        exit: exit.2,
        s_start: entry.0 * dir,
        s_end: exit.0 * dir,
    }))
}

struct Chord {
    geodesic: BoundaryGeodesic,
    entry_side: usize,
    entry: HPoint,
    exit_side: usize,
    exit: HPoint,
    s_start: f64,
    s_end: f64,
}

/// Conjugate of `g` whose axis crosses the polygon, found by moving a point
/// of the axis into the polygon.
fn conjugate_into_polygon(spec: &SurfaceSpec, g: &MoebiusMap, offset: f64) -> Result<MoebiusMap> {
    let axis_line = g.axis()?.line();
    let (_, h) = spec.normalize_to_domain(axis_line.point_at(offset))?;
    Ok(g.conjugate_by(&h))
}

pub fn trace_matrix(spec: &SurfaceSpec, g: &MoebiusMap, class_id: usize) -> Result<SegmentChain> {
    let mut last_err = None;
    for attempt in 0..=RESTARTS {
        let start = if attempt == 0 && matches!(chord(spec, &OrientedGeodesic::of_axis(g)?), Ok(Some(_))) {
            *g
        } else {
            conjugate_into_polygon(spec, g, 1e-7 * attempt as f64)?
        };
        match trace_from(spec, &start, class_id) {
            Err(e @ Error::NumericalInstability(_)) => last_err = Some(e),
            other => return other,
        }
    }
    Err(last_err.expect("at least one attempt ran"))
}

fn trace_from(spec: &SurfaceSpec, start: &MoebiusMap, class_id: usize) -> Result<SegmentChain> {
    let length = start.translation_length()?;
    let mut current = *start;
    let mut segments = Vec::new();
    let mut letters: Vec<Letter> = Vec::new();
    let mut total = 0.0;
    let mut expected_entry: Option<usize> = None;
    while total < length - LENGTH_TOL * length.max(1.0) {
        if segments.len() >= MAX_CHORDS {
            return Err(Error::NumericalInstability(format!(
                "chain of class {class_id} does not close"
            )));
        }
        let axis = OrientedGeodesic::of_axis(&current)?;
        let c = chord(spec, &axis)?.ok_or_else(|| {
            Error::NumericalInstability(format!("conjugate axis of class {class_id} left the polygon"))
        })?;
        if let Some(e) = expected_entry {
            if e != c.entry_side {
                return Err(Error::NumericalInstability(format!(
                    "class {class_id}: entered through side {} instead of {e}",
                    c.entry_side
                )));
            }
        }
        let seg_len = (c.s_end - c.s_start).abs();
        total += seg_len;
        let side = &spec.sides[c.exit_side];
        letters.push(side.letter);
        segments.push(GeodesicSegment {
            class_id,
            pass: segments.len(),
            start: c.entry,
            end: c.exit,
            geodesic: c.geodesic,
            s_start: c.s_start,
            s_end: c.s_end,
            entry_side: c.entry_side,
            exit_side: c.exit_side,
            length: seg_len,
        });
        expected_entry = Some(side.partner);
        current = current.conjugate_by(&side.pairing);
    }
    if (total - length).abs() > LENGTH_TOL * length.max(1.0) {
        return Err(Error::NumericalInstability(format!(
            "class {class_id}: chord lengths sum to {total}, translation length is {length}"
        )));
    }
    if !current.approx_eq(start, 1e-6) || expected_entry != Some(segments[0].entry_side) {
        return Err(Error::NumericalInstability(format!(
            "chain of class {class_id} does not close up"
        )));
    }
    Ok(SegmentChain {
        class_id,
        segments,
        letter_trace: Word::from_letters(letters),
        length,
        pass_weight: 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enumerate::{enumerate_classes, EnumerationOptions};
    use crate::surface::{build_genus2_octagon, build_punctured_torus};
    use approx::assert_abs_diff_eq;

    fn class_of(spec: &SurfaceSpec, w: &str) -> ClosedGeodesicClass {
        let word: CyclicWord = w.parse().unwrap();
        let matrix = spec.word_matrix(word.word()).unwrap();
        ClosedGeodesicClass {
            id: 0,
            length: matrix.translation_length().unwrap(),
            word,
            matrix,
            max_power: 1,
        }
    }

    #[test]
    fn single_letter_chain() {
        let s = build_punctured_torus().unwrap();
        let c = trace_chain(&class_of(&s, "a"), &s).unwrap();
        assert_eq!(c.letter_trace.to_string(), "a");
        assert_eq!(c.segments.len(), 1);
        let seg = &c.segments[0];
        // enters through the side paired with the exit side
        assert_eq!(s.sides[seg.exit_side].letter, 0);
        assert_eq!(seg.entry_side, s.sides[seg.exit_side].partner);
        assert_abs_diff_eq!(c.total_segment_length(), c.length, epsilon = 1e-9);
    }

    #[test]
    fn two_letter_chain() {
        let s = build_punctured_torus().unwrap();
        let c = trace_chain(&class_of(&s, "ab"), &s).unwrap();
        assert_eq!(CyclicWord::new(&c.letter_trace).unwrap().to_string(), "ab");
        assert_eq!(c.segments.len(), 2);
    }

    #[test]
    fn chains_close_for_all_short_classes() {
        let s = build_punctured_torus().unwrap();
        for class in enumerate_classes(&s, 7.0, &EnumerationOptions::default()).unwrap() {
            let chain = trace_chain(&class, &s).unwrap();
            assert!((chain.total_segment_length() - class.length).abs() < 1e-6);
            assert_eq!(chain.letter_trace, *class.word.word());
            for (k, seg) in chain.segments.iter().enumerate() {
                assert!(seg.geodesic.line().distance(seg.start) < EPS_GEOM);
                assert!(seg.geodesic.line().distance(seg.end) < EPS_GEOM);
                let next = &chain.segments[(k + 1) % chain.segments.len()];
                let mapped = s.sides[seg.exit_side].pairing.apply(seg.end);
                assert!(hyp_distance(mapped, next.start) < 1e-8);
            }
        }
    }

    #[test]
    fn chain_starts_off_the_polygon() {
        let s = build_punctured_torus().unwrap();
        let class = class_of(&s, "aab");
        let b = s.letter_matrix(2).unwrap();
        let far = class.matrix.conjugate_by(&b.compose(&b));
        let chain = trace_matrix(&s, &far, 0).unwrap();
        assert_eq!(CyclicWord::new(&chain.letter_trace).unwrap(), class.word);
    }

    #[test]
    fn octagon_chain() {
        let s = build_genus2_octagon().unwrap();
        let g = s.letter_matrix(0).unwrap();
        let chain = trace_matrix(&s, &g, 0).unwrap();
        assert_eq!(chain.letter_trace.to_string(), "a");
        assert_abs_diff_eq!(
            chain.total_segment_length(),
            g.translation_length().unwrap(),
            epsilon = 1e-9
        );
    }
}
