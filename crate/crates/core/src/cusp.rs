//! Cusp excursions: maximal sub-arcs of a closed geodesic inside a horoball
//! neighbourhood, their winding, and crossing mass near the cusps.
//!
//! Every piece of a chain inside the horoball at a polygon vertex is read in
//! that vertex's normalized frame, where the cusp is `∞`, the stabilizer is
//! `z ↦ z + 1` and the geodesic is a semicircle `(m, R)`. Heights are
//! invariant under the stabilizer, so all pieces of one excursion share `R`
//! and the whole excursion is the part of that semicircle above the boundary
//! horocycle.

use std::collections::BTreeMap;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::chain::{GeodesicSegment, SegmentChain};
use crate::crossings::CrossingRecord;
use crate::hyperbolic::{HPoint, Line};
use crate::stats::least_squares_slope;
use crate::surface::{CuspData, SurfaceSpec};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExcursionRecord {
    pub class_id: usize,
    pub cusp: usize,
    /// Segment passes crossed, in travel order, with the polygon vertex whose
    /// horoball piece each pass runs through.
    pub pieces: Vec<(usize, usize)>,
    /// `floor(|Δx|)`, unsigned.
    pub winding: u64,
    pub delta_x: f64,
    pub length: f64,
    pub max_height: f64,
    /// Entry and exit on the boundary horocycle, in the normalized frame of
    /// the first piece's vertex.
    pub entry: HPoint,
    pub exit: HPoint,
    /// Copies of this excursion in `γ_T`: the class's pass weight.
    pub weight: u64,
}

impl ExcursionRecord {
    pub fn first_pass(&self) -> usize {
        self.pieces[0].0
    }

    pub fn last_pass(&self) -> usize {
        self.pieces[self.pieces.len() - 1].0
    }

    /// Winding read from the cutting sequence: sides crossed inside the
    /// horoball divided by the length of the cusp's parabolic word.
    pub fn letter_winding(&self, spec: &SurfaceSpec) -> u64 {
        let cycle = spec.cusps[self.cusp].vertices[0].parabolic_word.len().max(1);
        ((self.pieces.len() - 1) / cycle) as u64
    }

    /// The same excursion seen from the smaller neighbourhood `N(r)`, if it
    /// reaches it.
    pub fn restrict(&self, r: f64) -> Option<ExcursionRecord> {
        let h = 1.0 / r;
        if self.max_height <= h {
            return None;
        }
        let half = (self.max_height * self.max_height - h * h).sqrt();
        let m = 0.5 * (self.entry.x + self.exit.x);
        let dir = (self.exit.x - self.entry.x).signum();
        Some(ExcursionRecord {
            winding: (2.0 * half).floor() as u64,
            delta_x: 2.0 * half,
            length: 2.0 * (half / h).asinh(),
            entry: HPoint::new_unchecked(m - dir * half, h),
            exit: HPoint::new_unchecked(m + dir * half, h),
            ..self.clone()
        })
    }
}

/// One chord's stay in one vertex horoball.
#[derive(Clone, Copy, Debug)]
struct Piece {
    vertex: usize,
    /// Position along the chord where the piece starts, for ordering.
    order: f64,
    open_start: bool,
    open_end: bool,
    center: f64,
    radius: f64,
    /// +1 when travel increases the normalized x coordinate.
    dir: f64,
}

fn pieces_of(seg: &GeodesicSegment, spec: &SurfaceSpec, cusp: usize) -> Result<Vec<Piece>> {
    let mut out = Vec::new();
    let travel = (seg.s_end - seg.s_start).signum();
    for (vi, v) in spec.cusps[cusp].vertices.iter().enumerate() {
        let Line::Circle { center, radius } = v.normalizer.apply_geodesic(&seg.geodesic).line() else {
            return Err(Error::consistency(format!(
                "geodesic of class {} ends at a cusp",
                seg.class_id
            )));
        };
        if radius <= 1.0 {
            continue;
        }
        let w = (radius * radius - 1.0).sqrt();
        let xs = v.normalizer.apply(seg.start).x;
        let xe = v.normalizer.apply(seg.end).x;
        let (lo, hi) = (xs.min(xe), xs.max(xe));
        let (a, b) = (lo.max(center - w), hi.min(center + w));
        if a >= b {
            continue;
        }
        let dir = (xe - xs).signum();
        let inside = |x: f64| x > center - w && x < center + w;
        // order pieces by where they begin along the chord
        let first_x = if dir > 0.0 { a } else { b };
        let first_y = (radius * radius - (first_x - center).powi(2)).max(0.0).sqrt().max(1.0);
        let first = v.normalizer.inverse().apply(HPoint::new_unchecked(first_x, first_y));
        let order = (seg.line().coordinate(first) - seg.s_start) * travel;
        out.push(Piece {
            vertex: vi,
            order,
            open_start: inside(xs),
            open_end: inside(xe),
            center,
            radius,
            dir,
        });
    }
    out.sort_by(|p, q| p.order.total_cmp(&q.order));
    Ok(out)
}

/// Maximal sub-arcs of the chain inside `N(r)` of every cusp.
pub fn decompose_excursions(chain: &SegmentChain, spec: &SurfaceSpec, r: f64) -> Result<Vec<ExcursionRecord>> {
    if !spec.is_cusped() {
        return Err(Error::domain("surface has no cusps"));
    }
    if !(r > 0.0 && r <= 1.0) {
        return Err(Error::domain(format!("neighbourhood parameter {r} is outside (0, 1]")));
    }
    let mut all = Vec::new();
    for cusp in 0..spec.cusps.len() {
        let per_segment: Vec<Vec<Piece>> = chain
            .segments
            .iter()
            .map(|s| pieces_of(s, spec, cusp))
            .collect::<Result<_>>()?;
        let n = per_segment.len();
        let continues_into = |k: usize| -> bool {
            let last = per_segment[k].last();
            let next = per_segment[(k + 1) % n].first();
            matches!((last, next), (Some(l), Some(f)) if l.open_end && f.open_start)
        };
        let enclosed = per_segment
            .iter()
            .all(|ps| matches!(ps.as_slice(), [p] if p.open_start && p.open_end));
        if enclosed {
            return Err(Error::consistency(format!(
                "closed geodesic of class {} lies inside a horoball",
                chain.class_id
            )));
        }
        // start from a segment whose first piece opens inside it
        let start = (0..n).find(|&k| !continues_into((k + n - 1) % n)).unwrap_or(0);
        for step in 0..n {
            let k = (start + step) % n;
            for (pi, p) in per_segment[k].iter().enumerate() {
                if pi == 0 && continues_into((k + n - 1) % n) {
                    continue;
                }
                let mut pieces = vec![(k, p.vertex)];
                let mut j = k;
                let mut last_index = pi;
                while last_index + 1 == per_segment[j].len() && continues_into(j) {
                    j = (j + 1) % n;
                    last_index = 0;
                    pieces.push((j, per_segment[j][0].vertex));
                }
                let half = (p.radius * p.radius - 1.0).sqrt();
                let record = ExcursionRecord {
                    class_id: chain.class_id,
                    cusp,
                    pieces,
                    winding: (2.0 * half).floor() as u64,
                    delta_x: 2.0 * half,
                    length: 2.0 * half.asinh(),
                    max_height: p.radius,
                    entry: HPoint::new_unchecked(p.center - p.dir * half, 1.0),
                    exit: HPoint::new_unchecked(p.center + p.dir * half, 1.0),
                    weight: chain.pass_weight,
                };
                if r < 1.0 {
                    all.extend(record.restrict(r));
                } else {
                    all.push(record);
                }
            }
        }
    }
    all.sort_by_key(|e| (e.cusp, e.first_pass(), e.pieces[0].1));
    Ok(all)
}

/// `E_n(γ_T)` for the neighbourhood `N(1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExcursionHistogram {
    pub t: f64,
    /// `ℓ(γ_T)`, the normalizer.
    pub total_length: f64,
    /// `counts[n] = E_n`.
    pub counts: Vec<u64>,
    /// Minimum of `length − 2 log max(n, 1)` over all excursions.
    /// `None` without excursions.
    pub c_fit: Option<f64>,
    pub excursions: u64,
}

impl ExcursionHistogram {
    pub fn count(&self, n: usize) -> u64 {
        self.counts.get(n).copied().unwrap_or(0)
    }

    pub fn normalized(&self, n: usize) -> f64 {
        self.count(n) as f64 / self.total_length
    }

    /// Least-squares slope of `log E_n` against `log n` over `lo..=hi`,
    /// skipping empty bins. `None` with fewer than two nonempty bins.
    pub fn loglog_slope(&self, lo: usize, hi: usize) -> Option<f64> {
        let pts: Vec<(f64, f64)> = (lo.max(1)..=hi)
            .filter(|&n| self.count(n) > 0)
            .map(|n| ((n as f64).ln(), (self.count(n) as f64).ln()))
            .collect();
        least_squares_slope(&pts)
    }

    pub fn max_winding(&self) -> usize {
        self.counts.iter().rposition(|&c| c > 0).unwrap_or(0)
    }
}

/// `length − 2 log max(n, 1)`, the quantity bounded below by one constant.
pub fn length_excess(e: &ExcursionRecord) -> f64 {
    e.length - 2.0 * (e.winding.max(1) as f64).ln()
}

pub fn excursion_histogram(excursions: &[ExcursionRecord], chains: &[SegmentChain], t: f64) -> ExcursionHistogram {
    let total_length = chains.iter().map(|c| c.length * c.pass_weight as f64).sum();
    let mut counts = Vec::new();
    let mut c_fit: Option<f64> = None;
    for e in excursions {
        let n = e.winding as usize;
        if counts.len() <= n {
            counts.resize(n + 1, 0);
        }
        counts[n] += e.weight;
        let x = length_excess(e);
        c_fit = Some(c_fit.map_or(x, |c| c.min(x)));
    }
    ExcursionHistogram {
        t,
        total_length,
        counts,
        c_fit,
        excursions: excursions.len() as u64,
    }
}

/// Largest winding compatible with `length ≤ t` under `length ≥ 2 log n + c`.
pub fn winding_limit(t: f64, c: f64) -> f64 {
    ((t - c) / 2.0).exp() + 1.0
}

/// Maps `(cusp, class, pass, vertex)` to the excursion running through that
/// piece.
pub type PieceIndex = HashMap<(usize, usize, usize, usize), usize>;

pub fn piece_index(excursions: &[ExcursionRecord]) -> PieceIndex {
    let mut map = HashMap::new();
    for (i, e) in excursions.iter().enumerate() {
        for &(pass, vertex) in &e.pieces {
            map.insert((e.cusp, e.class_id, pass, vertex), i);
        }
    }
    map
}

/// Crossings inside `N(1)` between distinct excursions, keyed by the
/// excursion index pair `(lo, hi)`. Crossings that cannot be attributed
/// (points within rounding of the horocycle) are counted separately.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PairCrossings {
    pub counts: BTreeMap<(usize, usize), u64>,
    pub unattributed: u64,
}

impl PairCrossings {
    pub fn observe(&mut self, cusps: &[CuspData], index: &PieceIndex, r: &CrossingRecord) {
        for (cusp_id, cusp) in cusps.iter().enumerate() {
            let (v, h) = cusp.deepest(r.point);
            if h <= 1.0 {
                continue;
            }
            let a = index.get(&(cusp_id, r.class_i, r.pass_i, v));
            let b = index.get(&(cusp_id, r.class_j, r.pass_j, v));
            match (a, b) {
                (Some(&a), Some(&b)) if a != b => {
                    *self.counts.entry((a.min(b), a.max(b))).or_insert(0) += 1;
                }
                (Some(_), Some(_)) => {}
                _ => self.unattributed += 1,
            }
        }
    }

    pub fn merge(&mut self, other: PairCrossings) {
        for (k, c) in other.counts {
            *self.counts.entry(k).or_insert(0) += c;
        }
        self.unattributed += other.unattributed;
    }
}

pub fn excursion_pair_crossings(
    spec: &SurfaceSpec,
    excursions: &[ExcursionRecord],
    records: &[CrossingRecord],
) -> PairCrossings {
    let index = piece_index(excursions);
    let mut out = PairCrossings::default();
    for r in records {
        out.observe(&spec.cusps, &index, r);
    }
    out
}

/// Pairs violating `count ≤ 2 min(n, m) + 2`.
pub fn pair_bound_violations(excursions: &[ExcursionRecord], pairs: &PairCrossings) -> Vec<((usize, usize), u64)> {
    pairs
        .counts
        .iter()
        .filter(|(&(a, b), &c)| c > 2 * excursions[a].winding.min(excursions[b].winding) + 2)
        .map(|(&k, &c)| (k, c))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CuspMass {
    pub r: f64,
    pub t: f64,
    /// Ordered-convention weighted crossing mass inside `N(r)`.
    pub mass: f64,
    /// `mass / e^{2T}`.
    pub ratio: f64,
}

pub fn cusp_crossing_mass(spec: &SurfaceSpec, records: &[CrossingRecord], r: f64, t: f64) -> CuspMass {
    let mass: u64 = records
        .iter()
        .filter(|rec| spec.cusps.iter().any(|c| c.in_horoball(rec.point, r)))
        .map(|rec| 2 * rec.weight * u64::from(rec.multiplicity))
        .sum();
    let mass = mass as f64;
    CuspMass {
        r,
        t,
        mass,
        ratio: mass / (2.0 * t).exp(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::trace_chain;
    use crate::crossings::{find_crossings, CrossingOptions};
    use crate::enumerate::{enumerate_classes, ClosedGeodesicClass, EnumerationOptions};
    use crate::surface::build_punctured_torus;
    use crate::words::{CyclicWord, Word};

    fn chain_of(spec: &SurfaceSpec, word: &Word, id: usize) -> SegmentChain {
        let word = CyclicWord::from_any(word).unwrap();
        let matrix = spec.word_matrix(word.word()).unwrap();
        let class = ClosedGeodesicClass {
            id,
            length: matrix.translation_length().unwrap(),
            word,
            matrix,
            max_power: 1,
        };
        trace_chain(&class, spec).unwrap()
    }

    fn fixture(spec: &SurfaceSpec, n: usize) -> Word {
        let c = spec.cusps[0].vertices[0].parabolic_word.clone();
        "a".parse::<Word>().unwrap().concat(&c.repeat(n))
    }

    #[test]
    fn short_simple_geodesics_stay_low() {
        let s = build_punctured_torus().unwrap();
        let chain = chain_of(&s, &"a".parse().unwrap(), 0);
        assert!(decompose_excursions(&chain, &s, 0.1).unwrap().is_empty());
    }

    #[test]
    fn fixture_winding_follows_the_cusp_exponent() {
        let s = build_punctured_torus().unwrap();
        for n in 1..=10 {
            let chain = chain_of(&s, &fixture(&s, n), 0);
            let ex = decompose_excursions(&chain, &s, 1.0).unwrap();
            // at n = 1 the geodesic stays below N(1): winding 0
            let top = ex.iter().max_by(|a, b| a.delta_x.total_cmp(&b.delta_x));
            let winding = top.map_or(0, |e| e.winding);
            let letters = top.map_or(0, |e| e.letter_winding(&s));
            assert!(winding.abs_diff(n as u64) <= 1, "n = {n}: winding {winding}");
            assert!(letters.abs_diff(n as u64) <= 1, "n = {n}: letter winding {letters}");
            let total: f64 = ex.iter().map(|e| e.length).sum();
            assert!(total <= chain.length + 1e-9);
        }
    }

    #[test]
    fn excursion_invariants_over_a_full_run() {
        let s = build_punctured_torus().unwrap();
        let classes = enumerate_classes(&s, 8.0, &EnumerationOptions::default()).unwrap();
        let chains: Vec<SegmentChain> = classes.iter().map(|c| trace_chain(c, &s).unwrap()).collect();
        let mut all = Vec::new();
        for ch in &chains {
            let ex = decompose_excursions(ch, &s, 1.0).unwrap();
            let total: f64 = ex.iter().map(|e| e.length).sum();
            assert!(total <= ch.length + 1e-9);
            for e in &ex {
                assert!(e.letter_winding(&s).abs_diff(e.winding) <= 1, "{e:?}");
                assert!(e.length <= ch.length + 1e-9);
            }
            all.extend(ex);
        }
        let hist = excursion_histogram(&all, &chains, 8.0);
        let c = hist.c_fit.unwrap();
        assert!(c >= 0.0);
        assert!((hist.max_winding() as f64) <= winding_limit(8.0, c));
        let records = find_crossings(&s, &chains, &CrossingOptions::default());
        // excursions per class are indexed by their position in `all`
        let pairs = excursion_pair_crossings(&s, &all, &records);
        assert!(!pairs.counts.is_empty());
        assert!(pair_bound_violations(&all, &pairs).is_empty());
        let masses: Vec<f64> = [1.0, 0.5, 0.25, 0.125]
            .iter()
            .map(|&r| cusp_crossing_mass(&s, &records, r, 8.0).ratio)
            .collect();
        assert!(masses.windows(2).all(|w| w[0] >= w[1]));
        assert_eq!(cusp_crossing_mass(&s, &records, 1e-6, 8.0).mass, 0.0);
    }

    #[test]
    fn restriction_shrinks_excursions() {
        let s = build_punctured_torus().unwrap();
        let chain = chain_of(&s, &fixture(&s, 6), 0);
        let big = decompose_excursions(&chain, &s, 1.0).unwrap();
        let small = decompose_excursions(&chain, &s, 0.5).unwrap();
        assert!(small.len() <= big.len());
        for e in &small {
            assert!(e.max_height > 2.0);
            assert!((e.entry.y - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn slope_fit() {
        let h = ExcursionHistogram {
            t: 1.0,
            total_length: 1.0,
            counts: vec![0, 1000, 250, 111, 62],
            c_fit: Some(0.0),
            excursions: 0,
        };
        let s = h.loglog_slope(1, 4).unwrap();
        assert!((s + 2.0).abs() < 0.01, "{s}");
        assert_eq!(h.loglog_slope(5, 9), None);
    }
}
