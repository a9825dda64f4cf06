//! Transverse intersection points among segment chains.
//!
//! A pair of chords crosses when their lines are linked and the crossing
//! point lies on both chords. Points on the polygon boundary appear on two
//! paired sides; only the copy on the lower-indexed side of each pair is kept,
//! so every geometric crossing is reported once.
//!
//! The spatial index is a uniform grid over the Cayley disk image
//! `w = (z − i)/(z + i)` of the polygon, which keeps ideal polygons bounded.
//! Every chord is registered in all cells its arc may touch, and a crossing is
//! emitted only by the cell containing its point.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::chain::{GeodesicSegment, SegmentChain};
use crate::enumerate::ClosedGeodesicClass;
use crate::hyperbolic::{angle_at, crossing_point, hyp_distance, BoundaryGeodesic, HPoint, Line};
use crate::par::{self, Exec};
use crate::surface::SurfaceSpec;
use crate::tolerance::{EPS_GEOM, NEAR_TANGENT};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossingRecord {
    pub point: HPoint,
    /// `(class_i, pass_i) < (class_j, pass_j)` lexicographically.
    pub class_i: usize,
    pub class_j: usize,
    pub pass_i: usize,
    pub pass_j: usize,
    /// Tangent angles of the two chords at the point, in `[0, π)`.
    pub phi_i: f64,
    pub phi_j: f64,
    /// Counterclockwise angle from chord `i` to chord `j`, in `(0, π)`.
    pub theta: f64,
    pub weight: u64,
    pub multiplicity: u32,
    pub near_tangent: bool,
}

impl CrossingRecord {
    pub fn key(&self) -> (usize, usize, usize, usize) {
        (self.class_i, self.class_j, self.pass_i, self.pass_j)
    }
}

/// Consumer of crossings. Sinks built per grid cell are merged in cell order,
/// so a sink that only keeps integer or order-insensitive state is
/// deterministic regardless of scheduling.
pub trait CrossingSink: Send {
    fn accept(&mut self, record: &CrossingRecord);
    fn merge(&mut self, other: Self)
    where
        Self: Sized;
}

impl CrossingSink for Vec<CrossingRecord> {
    fn accept(&mut self, record: &CrossingRecord) {
        self.push(record.clone());
    }

    fn merge(&mut self, other: Self) {
        self.extend(other);
    }
}

impl<A: CrossingSink, B: CrossingSink> CrossingSink for (A, B) {
    fn accept(&mut self, record: &CrossingRecord) {
        self.0.accept(record);
        self.1.accept(record);
    }

    fn merge(&mut self, other: Self) {
        self.0.merge(other.0);
        self.1.merge(other.1);
    }
}

/// Geometric count and weight sum.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountSink {
    pub geometric: u64,
    pub weight: u64,
    pub self_crossings: u64,
}

impl CountSink {
    /// Ordered-pair total: each crossing counts for both orders of its lines.
    pub fn ordered_total(&self) -> u64 {
        2 * self.weight
    }
}

impl CrossingSink for CountSink {
    fn accept(&mut self, r: &CrossingRecord) {
        self.geometric += 1;
        self.weight += r.weight;
        self.self_crossings += u64::from(r.class_i == r.class_j);
    }

    fn merge(&mut self, other: Self) {
        self.geometric += other.geometric;
        self.weight += other.weight;
        self.self_crossings += other.self_crossings;
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CrossingOptions {
    pub exec: Exec,
    /// Grid cell size in disk coordinates; defaults to the median chord
    /// length clamped to `[0.05, 1]`.
    pub cell_size: Option<f64>,
}

/// A chord prepared for pair tests.
#[derive(Clone, Debug)]
pub struct PreparedSegment {
    pub class_id: usize,
    pub pass: usize,
    pub geodesic: BoundaryGeodesic,
    pub line: Line,
    pub lo: f64,
    pub hi: f64,
    pub weight: u64,
}

impl PreparedSegment {
    pub fn new(seg: &GeodesicSegment, weight: u64) -> Self {
        let (lo, hi) = seg.coordinate_range();
        PreparedSegment {
            class_id: seg.class_id,
            pass: seg.pass,
            geodesic: seg.geodesic,
            line: seg.line(),
            lo,
            hi,
            weight,
        }
    }

    fn covers(&self, p: HPoint) -> bool {
        let s = self.line.coordinate(p);
        s >= self.lo - EPS_GEOM && s <= self.hi + EPS_GEOM
    }
}

pub fn prepare(chains: &[SegmentChain]) -> Vec<PreparedSegment> {
    chains
        .iter()
        .flat_map(|c| c.segments.iter().map(move |s| PreparedSegment::new(s, c.pass_weight)))
        .collect()
}

/// Whether a point is attributed to this copy of the polygon.
pub fn owns_point(spec: &SurfaceSpec, p: HPoint) -> bool {
    let mut near: Option<usize> = None;
    for side in &spec.sides {
        if side.line.distance(p) <= EPS_GEOM {
            near.get_or_insert(side.index);
        } else if side.inner_value(p) < 0.0 {
            return false;
        }
    }
    match near {
        Some(s) => s < spec.sides[s].partner,
        None => true,
    }
}

/// The crossing of two chords, if they cross transversally at a point owned
/// by the polygon.
pub fn segment_crossing(spec: &SurfaceSpec, a: &PreparedSegment, b: &PreparedSegment) -> Option<CrossingRecord> {
    let (a, b) = match (a.class_id, a.pass).cmp(&(b.class_id, b.pass)) {
        std::cmp::Ordering::Less => (a, b),
        std::cmp::Ordering::Greater => (b, a),
        std::cmp::Ordering::Equal => return None,
    };
    // identical lines share both endpoints and are never linked
    if !a.geodesic.is_linked(&b.geodesic) {
        return None;
    }
    let p = crossing_point(&a.line, &b.line)?;
    if !a.covers(p) || !b.covers(p) || !owns_point(spec, p) {
        return None;
    }
    let c = angle_at(&a.line, &b.line, p);
    Some(CrossingRecord {
        point: p,
        class_i: a.class_id,
        class_j: b.class_id,
        pass_i: a.pass,
        pass_j: b.pass,
        phi_i: c.phi1,
        phi_j: c.phi2,
        theta: c.theta,
        weight: a.weight * b.weight,
        multiplicity: 1,
        near_tangent: c.theta.min(std::f64::consts::PI - c.theta) < NEAR_TANGENT,
    })
}

/// Cayley map to the unit disk.
pub fn to_disk(p: HPoint) -> (f64, f64) {
    let d = p.x * p.x + (p.y + 1.0) * (p.y + 1.0);
    ((p.x * p.x + p.y * p.y - 1.0) / d, -2.0 * p.x / d)
}

struct Grid {
    n: usize,
    h: f64,
}

impl Grid {
    fn index(&self, t: f64) -> usize {
        (((t + 1.0) / self.h).floor().max(0.0) as usize).min(self.n - 1)
    }

    fn cell_of(&self, (u, v): (f64, f64)) -> usize {
        self.index(v) * self.n + self.index(u)
    }

    /// All cells an arc between coordinates `lo` and `hi` of `line` may touch.
    fn cells_of(&self, line: &Line, lo: f64, hi: f64, out: &mut Vec<u32>) {
        let pa = to_disk(line.point_at(lo));
        let pb = to_disk(line.point_at(hi));
        let mut stack = vec![(lo, hi, pa, pb)];
        while let Some((sa, sb, pa, pb)) = stack.pop() {
            let chord = (pa.0 - pb.0).hypot(pa.1 - pb.1);
            if chord <= self.h / 4.0 || sb - sa < 1e-9 {
                // an arc of a circle spanning less than a half turn stays
                // within half its chord of the chord
                let pad = chord / 2.0 + 1e-12;
                let (x0, x1) = (self.index(pa.0.min(pb.0) - pad), self.index(pa.0.max(pb.0) + pad));
                let (y0, y1) = (self.index(pa.1.min(pb.1) - pad), self.index(pa.1.max(pb.1) + pad));
                for iy in y0..=y1 {
                    for ix in x0..=x1 {
                        out.push((iy * self.n + ix) as u32);
                    }
                }
            } else {
                let sm = 0.5 * (sa + sb);
                let pm = to_disk(line.point_at(sm));
                stack.push((sa, sm, pa, pm));
                stack.push((sm, sb, pm, pb));
            }
        }
    }
}

fn default_cell_size(segs: &[PreparedSegment]) -> f64 {
    if segs.is_empty() {
        return 1.0;
    }
    let mut lens: Vec<f64> = segs
        .iter()
        .map(|s| {
            let a = to_disk(s.line.point_at(s.lo));
            let b = to_disk(s.line.point_at(s.hi));
            (a.0 - b.0).hypot(a.1 - b.1)
        })
        .collect();
    lens.sort_by(f64::total_cmp);
    lens[lens.len() / 2].clamp(0.05, 1.0)
}

/// Streams every crossing among the chains into sinks built by `make_sink`.
pub fn find_crossings_into<S, F>(spec: &SurfaceSpec, chains: &[SegmentChain], opts: &CrossingOptions, make_sink: F) -> S
where
    S: CrossingSink,
    F: Fn() -> S + Sync,
{
    let segs = prepare(chains);
    find_prepared_into(spec, &segs, opts, make_sink)
}

pub fn find_prepared_into<S, F>(spec: &SurfaceSpec, segs: &[PreparedSegment], opts: &CrossingOptions, make_sink: F) -> S
where
    S: CrossingSink,
    F: Fn() -> S + Sync,
{
    let h = opts
        .cell_size
        .unwrap_or_else(|| default_cell_size(segs))
        .clamp(1e-3, 2.0);
    let grid = Grid {
        n: (2.0 / h).ceil() as usize,
        h,
    };
    let per_segment: Vec<Vec<u32>> = par::map(opts.exec, segs, |s| {
        let mut cells = Vec::new();
        grid.cells_of(&s.line, s.lo, s.hi, &mut cells);
        cells.sort_unstable();
        cells.dedup();
        cells
    });
    let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); grid.n * grid.n];
    for (i, cells) in per_segment.iter().enumerate() {
        for &c in cells {
            buckets[c as usize].push(i as u32);
        }
    }
    let occupied: Vec<usize> = (0..buckets.len()).filter(|&c| buckets[c].len() > 1).collect();
    let sinks = par::map(opts.exec, &occupied, |&cell| {
        let mut sink = make_sink();
        let members = &buckets[cell];
        for (k, &a) in members.iter().enumerate() {
            for &b in &members[k + 1..] {
                if let Some(r) = segment_crossing(spec, &segs[a as usize], &segs[b as usize]) {
                    if grid.cell_of(to_disk(r.point)) == cell {
                        sink.accept(&r);
                    }
                }
            }
        }
        sink
    });
    let mut total = make_sink();
    for s in sinks {
        total.merge(s);
    }
    total
}

pub fn sort_records(records: &mut [CrossingRecord]) {
    records.sort_by_key(|r| r.key());
}

/// All crossings, sorted by `(class_i, class_j, pass_i, pass_j)`.
pub fn find_crossings(spec: &SurfaceSpec, chains: &[SegmentChain], opts: &CrossingOptions) -> Vec<CrossingRecord> {
    let mut records: Vec<CrossingRecord> = find_crossings_into(spec, chains, opts, Vec::new);
    sort_records(&mut records);
    records
}

/// Oracle: every pair of chords tested directly.
pub fn brute_force_crossings(spec: &SurfaceSpec, chains: &[SegmentChain]) -> Vec<CrossingRecord> {
    let segs = prepare(chains);
    let mut records = Vec::new();
    for (k, a) in segs.iter().enumerate() {
        for b in &segs[k + 1..] {
            if let Some(r) = segment_crossing(spec, a, b) {
                records.push(r);
            }
        }
    }
    sort_records(&mut records);
    records
}

/// Crossings of every chord with one extra segment, e.g. a test arc. The
/// arc's records carry `class_j = usize::MAX`.
pub fn crossings_with_segment(
    spec: &SurfaceSpec,
    chains: &[SegmentChain],
    arc: &PreparedSegment,
) -> Vec<CrossingRecord> {
    let mut records: Vec<CrossingRecord> = prepare(chains)
        .iter()
        .filter_map(|s| segment_crossing(spec, s, arc))
        .collect();
    sort_records(&mut records);
    records
}

/// `i(γ_T, γ_T)` in the ordered convention: each geometric crossing between
/// roots contributes `2·K_i·K_j`.
pub fn weighted_total(records: &[CrossingRecord], classes: &[ClosedGeodesicClass]) -> Result<u64> {
    let mut total = 0u64;
    for r in records {
        let (Some(ci), Some(cj)) = (classes.get(r.class_i), classes.get(r.class_j)) else {
            return Err(Error::consistency(format!(
                "crossing refers to classes ({}, {}) but only {} classes are given",
                r.class_i,
                r.class_j,
                classes.len()
            )));
        };
        if ci.id != r.class_i || cj.id != r.class_j {
            return Err(Error::consistency("class list is not indexed by class id"));
        }
        total += 2 * ci.pass_weight() * cj.pass_weight() * u64::from(r.multiplicity);
    }
    Ok(total)
}

/// Merges records of the same class pair whose points lie within `delta`
/// (hyperbolic distance), summing weights. Records of different class pairs
/// are never merged.
pub fn multiplicity_collapse(records: &[CrossingRecord], delta: f64) -> Vec<CrossingRecord> {
    let mut sorted: Vec<CrossingRecord> = records.to_vec();
    sorted.sort_by(|a, b| {
        (a.class_i, a.class_j)
            .cmp(&(b.class_i, b.class_j))
            .then(a.point.x.total_cmp(&b.point.x))
            .then(a.point.y.total_cmp(&b.point.y))
    });
    let mut out: Vec<CrossingRecord> = Vec::with_capacity(sorted.len());
    let mut group_start = 0;
    for r in sorted {
        if out
            .last()
            .is_some_and(|l| (l.class_i, l.class_j) != (r.class_i, r.class_j))
        {
            group_start = out.len();
        }
        let merged = out[group_start..]
            .iter_mut()
            .rev()
            .find(|c| hyp_distance(c.point, r.point) <= delta);
        match merged {
            Some(c) => {
                c.weight += r.weight;
                c.multiplicity += r.multiplicity;
            }
            None => out.push(r),
        }
    }
    sort_records(&mut out);
    out
}

pub const TSV_HEADER: &str = "class_i\tclass_j\tpass_i\tpass_j\tx\ty\ttheta\tweight\tmultiplicity\tnear_tangent";

pub fn write_tsv<W: Write>(records: &[CrossingRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{TSV_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{:.15e}\t{:.15e}\t{:.15e}\t{}\t{}\t{}",
            r.class_i,
            r.class_j,
            r.pass_i,
            r.pass_j,
            r.point.x,
            r.point.y,
            r.theta,
            r.weight,
            r.multiplicity,
            u8::from(r.near_tangent)
        )?;
    }
    Ok(())
}
