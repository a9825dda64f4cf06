//! Equidistribution statistics for one cutoff `T` and the convergence report
//! that collects them over a sweep.
//!
//! A full cutoff is processed in one streaming pass over the crossings: a
//! [`StatsSink`] keeps only integer tallies (cell masses, an angle histogram,
//! cusp masses, excursion pair counts), so the record set is never held in
//! memory and the result does not depend on the schedule.
//!
//! Spatial and angle statistics only look at crossings in the compact core.
//! Crossings inside the removed horoballs enter the cusp-mass tallies and
//! nothing else.

use std::f64::consts::PI;
use std::sync::Arc;

use log::{info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chain::{trace_chain, SegmentChain};
use crate::crossings::{
    brute_force_crossings, crossings_with_segment, find_crossings, find_crossings_into, CountSink, CrossingOptions,
    CrossingRecord, CrossingSink, PreparedSegment,
};
use crate::cusp::{
    decompose_excursions, excursion_histogram, pair_bound_violations, piece_index, winding_limit, CuspMass,
    ExcursionHistogram, ExcursionRecord, PairCrossings, PieceIndex,
};
use crate::enumerate::ClosedGeodesicClass;
use crate::hyperbolic::{BoundaryGeodesic, HPoint, MoebiusMap};
use crate::liouville::{
    angle_cdf, arc_crossing_measure, box_measure, sample_liouville, surface_constants, BoundaryBox, LiouvilleWindow,
};
use crate::par::{self, Exec};
use crate::partition::CellPartition;
use crate::stats::{least_squares_slope, tv_distance, weighted_ks, Histogram};
use crate::surface::{CuspData, SurfaceSpec};
use crate::tolerance::ToleranceProfile;
use crate::words::{CyclicWord, Word};
use crate::{Error, Result};

pub const REPORT_VERSION: u32 = 1;
/// Resolution of the streamed angle histogram.
pub const ANGLE_BINS: usize = 1 << 16;
/// Below this many records the angle statistic is flagged as unreliable.
pub const MIN_ANGLE_RECORDS: u64 = 100;

/// A geodesic arc given by a start point, a tangent direction and a length.
/// It runs in the direction of increasing line coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArcSpec {
    pub start: HPoint,
    /// Euclidean angle of the tangent at `start`.
    pub direction: f64,
    pub length: f64,
}

impl Default for ArcSpec {
    fn default() -> Self {
        ArcSpec {
            start: HPoint::new_unchecked(0.2, 0.8),
            direction: 0.0,
            length: 1.0,
        }
    }
}

impl ArcSpec {
    /// The arc as a one-segment chain, checked to lie in the core.
    pub fn prepare(&self, spec: &SurfaceSpec, partition: &CellPartition) -> Result<PreparedSegment> {
        if !(self.length > 0.0) {
            return Err(Error::domain(format!("arc length {} is not positive", self.length)));
        }
        let geodesic = BoundaryGeodesic::through(self.start, self.direction);
        let line = geodesic.line();
        let lo = line.coordinate(self.start);
        let hi = lo + self.length;
        for k in 0..=64 {
            let z = line.point_at(lo + self.length * k as f64 / 64.0);
            if !spec.contains(z) {
                return Err(Error::domain(format!("arc leaves the fundamental polygon near {z:?}")));
            }
            if !partition.in_core(z) {
                return Err(Error::domain(format!("arc enters the cusp region near {z:?}")));
            }
        }
        Ok(PreparedSegment {
            class_id: usize::MAX,
            pass: 0,
            geodesic,
            line,
            lo,
            hi,
            weight: 1,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarnessConfig {
    pub cells: usize,
    pub eps_core: f64,
    pub direction_bins: usize,
    /// Sampling step along chains for the footprint measure.
    pub footprint_step: f64,
    pub cusp_radii: Vec<f64>,
    pub arc: ArcSpec,
    /// Base word `w` of the fixture family `w·cⁿ`.
    pub fixture_base: String,
    pub fixture_n_max: usize,
    /// Fixture members up to this `n` are also counted by brute force.
    pub fixture_pin_n: usize,
    pub seed: u64,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        HarnessConfig {
            cells: 25,
            eps_core: 0.2,
            direction_bins: 8,
            footprint_step: 0.02,
            cusp_radii: vec![0.5, 0.25, 0.125],
            arc: ArcSpec::default(),
            fixture_base: "a".into(),
            fixture_n_max: 30,
            fixture_pin_n: 5,
            seed: 1,
        }
    }
}

fn cell_tv(masses: &[f64], partition: &CellPartition) -> Result<f64> {
    tv_distance(masses, &partition.areas)
}

/// TV distance between crossing mass per cell and cell area, over the core.
pub fn spatial_tv(records: &[CrossingRecord], partition: &CellPartition) -> Result<f64> {
    let mut masses = vec![0.0; partition.len()];
    for r in records {
        if let Some(k) = partition.locate(r.point) {
            masses[k] += (r.weight * u64::from(r.multiplicity)) as f64;
        }
    }
    if masses.iter().all(|&m| m == 0.0) {
        return Err(Error::domain("no crossings in the core"));
    }
    cell_tv(&masses, partition)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngleKs {
    /// `None` without any eligible record.
    pub ks: Option<f64>,
    pub records: u64,
    /// Fewer than [`MIN_ANGLE_RECORDS`] records went in.
    pub low_count: bool,
}

/// Weighted KS distance of crossing angles from `(1 − cos θ)/2`, over
/// unflagged records in the core.
pub fn angle_ks(records: &[CrossingRecord], partition: &CellPartition) -> Result<AngleKs> {
    let samples: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| !r.near_tangent && partition.in_core(r.point))
        .map(|r| (r.theta, (r.weight * u64::from(r.multiplicity)) as f64))
        .collect();
    let n = samples.len() as u64;
    if n < MIN_ANGLE_RECORDS {
        warn!("angle statistic from only {n} records");
    }
    Ok(AngleKs {
        ks: (n > 0).then(|| weighted_ks(&samples, angle_cdf)).transpose()?,
        records: n,
        low_count: n < MIN_ANGLE_RECORDS,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthPoint {
    pub t: f64,
    /// `i(γ_T, γ_T)·π²(2g−2+n)/ℓ(γ_T)²`.
    pub r: f64,
    /// `i(γ_T, γ_T)·π²(2g−2+n)/e^{2T}`.
    pub r_prime: f64,
}

pub fn growth_point(spec: &SurfaceSpec, t: f64, ordered_total: u64, total_length: f64) -> GrowthPoint {
    let c = PI * PI * spec.euler_magnitude();
    let i = ordered_total as f64;
    GrowthPoint {
        t,
        r: i * c / (total_length * total_length),
        r_prime: i * c / (2.0 * t).exp(),
    }
}

pub fn growth_law(spec: &SurfaceSpec, rows: &[CutoffRow]) -> Vec<GrowthPoint> {
    if rows.len() < 3 {
        warn!("growth law from only {} cutoffs", rows.len());
    }
    rows.iter()
        .map(|r| growth_point(spec, r.t, r.ordered_total, r.total_length))
        .collect()
}

/// Length measure of the chains on `(cell × direction bin)` boxes,
/// direction taken mod π. Index `cell · bins + bin`.
pub fn footprint(chains: &[SegmentChain], partition: &CellPartition, bins: usize, step: f64, exec: Exec) -> Vec<f64> {
    let size = partition.len() * bins;
    let parts = par::map(exec, chains, |chain| {
        let mut mass = vec![0.0; size];
        for seg in &chain.segments {
            let line = seg.line();
            let n = (seg.length / step).ceil().max(1.0) as usize;
            let piece = seg.length / n as f64 * chain.pass_weight as f64;
            for i in 0..n {
                let z = line.point_at(seg.s_start + (i as f64 + 0.5) / n as f64 * (seg.s_end - seg.s_start));
                if let Some(cell) = partition.locate(z) {
                    let angle = line.tangent_angle(z).rem_euclid(PI);
                    let bin = ((angle / PI * bins as f64) as usize).min(bins - 1);
                    mass[cell * bins + bin] += piece;
                }
            }
        }
        mass
    });
    let mut total = vec![0.0; size];
    for part in parts {
        for (t, m) in total.iter_mut().zip(part) {
            *t += m;
        }
    }
    total
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FootprintStats {
    pub tv: f64,
    /// Largest over smallest direction-bin marginal.
    /// `None` when some direction bin is empty.
    pub direction_ratio: Option<f64>,
    /// Share of the length measure that falls in the core.
    pub core_fraction: f64,
}

pub fn footprint_tv(
    chains: &[SegmentChain],
    partition: &CellPartition,
    bins: usize,
    step: f64,
    exec: Exec,
) -> Result<FootprintStats> {
    if bins == 0 || !(step > 0.0) {
        return Err(Error::Config(
            "footprint needs direction bins and a positive step".into(),
        ));
    }
    let mass = footprint(chains, partition, bins, step, exec);
    let reference: Vec<f64> = partition
        .areas
        .iter()
        .flat_map(|&a| std::iter::repeat_n(a, bins))
        .collect();
    let tv = tv_distance(&mass, &reference)?;
    let mut marginal = vec![0.0; bins];
    for (i, m) in mass.iter().enumerate() {
        marginal[i % bins] += m;
    }
    let max = marginal.iter().copied().fold(0.0, f64::max);
    let min = marginal.iter().copied().fold(f64::INFINITY, f64::min);
    let total: f64 = chains
        .iter()
        .map(|c| c.total_segment_length() * c.pass_weight as f64)
        .sum();
    Ok(FootprintStats {
        tv,
        direction_ratio: (min > 0.0).then(|| max / min),
        core_fraction: mass.iter().sum::<f64>() / total,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArcStats {
    /// `None` when nothing crosses the arc.
    pub ks: Option<f64>,
    pub crossings: u64,
    pub weight: u64,
    pub length: f64,
    /// `weight / (length · ℓ(γ_T))`; reported only.
    pub constant: f64,
    /// Value of the constant for a uniformly spread curve: `2/(π·area)`.
    pub reference_constant: f64,
}

/// KS distance of weighted positions in `[0, 1]` from the uniform law.
pub fn uniform_ks(positions: &[(f64, f64)]) -> Result<f64> {
    weighted_ks(positions, |x| x.clamp(0.0, 1.0))
}

pub fn arc_equidistribution(
    spec: &SurfaceSpec,
    chains: &[SegmentChain],
    partition: &CellPartition,
    arc: &ArcSpec,
) -> Result<ArcStats> {
    let seg = arc.prepare(spec, partition)?;
    let records = crossings_with_segment(spec, chains, &seg);
    let positions: Vec<(f64, f64)> = records
        .iter()
        .map(|r| ((seg.line.coordinate(r.point) - seg.lo) / arc.length, r.weight as f64))
        .collect();
    let weight: u64 = records.iter().map(|r| r.weight).sum();
    let total_length: f64 = chains.iter().map(|c| c.length * c.pass_weight as f64).sum();
    Ok(ArcStats {
        ks: (!positions.is_empty()).then(|| uniform_ks(&positions)).transpose()?,
        crossings: records.len() as u64,
        weight,
        length: arc.length,
        constant: weight as f64 / (arc.length * total_length),
        reference_constant: 2.0 / (PI * spec.expected_area()),
    })
}

struct SinkContext {
    partition: CellPartition,
    cusps: Vec<CuspData>,
    radii: Vec<f64>,
    index: PieceIndex,
}

/// Streaming tallies over the crossings of one cutoff.
pub struct StatsSink {
    ctx: Arc<SinkContext>,
    pub counts: CountSink,
    pub near_tangent: u64,
    /// Crossing weight per cell.
    pub cells: Vec<u64>,
    /// Weighted angles of unflagged core crossings.
    pub angles: Histogram,
    pub angle_records: u64,
    /// Ordered-convention mass inside `N(r)` per configured radius.
    pub cusp_mass: Vec<u64>,
    pub pairs: PairCrossings,
}

impl StatsSink {
    fn new(ctx: Arc<SinkContext>) -> Self {
        StatsSink {
            counts: CountSink::default(),
            near_tangent: 0,
            cells: vec![0; ctx.partition.len()],
            angles: Histogram::new(0.0, PI, ANGLE_BINS),
            angle_records: 0,
            cusp_mass: vec![0; ctx.radii.len()],
            pairs: PairCrossings::default(),
            ctx,
        }
    }
}

impl CrossingSink for StatsSink {
    fn accept(&mut self, r: &CrossingRecord) {
        self.counts.accept(r);
        let w = r.weight * u64::from(r.multiplicity);
        self.near_tangent += u64::from(r.near_tangent);
        if let Some(k) = self.ctx.partition.locate(r.point) {
            self.cells[k] += w;
            if !r.near_tangent {
                self.angles.add(r.theta, w);
                self.angle_records += 1;
            }
        }
        for (i, &radius) in self.ctx.radii.iter().enumerate() {
            if self.ctx.cusps.iter().any(|c| c.in_horoball(r.point, radius)) {
                self.cusp_mass[i] += 2 * w;
            }
        }
        self.pairs.observe(&self.ctx.cusps, &self.ctx.index, r);
    }

    fn merge(&mut self, other: Self) {
        self.counts.merge(other.counts);
        self.near_tangent += other.near_tangent;
        for (a, b) in self.cells.iter_mut().zip(&other.cells) {
            *a += b;
        }
        self.angles.merge(&other.angles);
        self.angle_records += other.angle_records;
        for (a, b) in self.cusp_mass.iter_mut().zip(&other.cusp_mass) {
            *a += b;
        }
        self.pairs.merge(other.pairs);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExcursionSummary {
    pub histogram: ExcursionHistogram,
    /// `E_n / ℓ(γ_T)`.
    pub normalized: Vec<f64>,
    /// Log-log slope of `E_n` over `n ∈ [2, 20]`.
    pub slope_2_20: Option<f64>,
    pub max_winding: u64,
    /// Largest winding allowed by the cutoff given this run's `c_fit`.
    pub winding_limit: Option<f64>,
    /// Excursions whose cutting-sequence winding differs from the geometric
    /// one by more than 1.
    pub letter_mismatches: u64,
    /// Distinct excursion pairs that cross inside `N(1)`.
    pub crossing_pairs: u64,
    pub pair_violations: u64,
    pub unattributed_crossings: u64,
}

/// Every statistic of one cutoff.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutoffRow {
    pub t: f64,
    pub classes: u64,
    /// Classes counted with their powers.
    pub classes_with_powers: u64,
    pub segments: u64,
    /// `ℓ(γ_T)`.
    pub total_length: f64,
    /// `ℓ(γ_T)/e^T`.
    pub length_ratio: f64,
    pub geometric_crossings: u64,
    /// `i(γ_T, γ_T)`, ordered convention.
    pub ordered_total: u64,
    pub self_crossings: u64,
    pub near_tangent: u64,
    /// Share of the crossing weight that lies in the core.
    pub core_fraction: f64,
    pub growth_r: f64,
    pub growth_r_prime: f64,
    pub spatial_tv: f64,
    /// Per cell: `(core mass/ℓ(γ_T)²) / (area/(2π³(2g−2+n)²))`; reported only.
    pub cell_constants: Vec<f64>,
    pub angle: AngleKs,
    pub footprint: FootprintStats,
    pub arc: ArcStats,
    pub cusp_mass: Vec<CuspMass>,
    pub excursions: Option<ExcursionSummary>,
}

/// Chains of a list of classes, in class order.
pub fn trace_all(spec: &SurfaceSpec, classes: &[ClosedGeodesicClass], exec: Exec) -> Result<Vec<SegmentChain>> {
    par::try_map(exec, classes, |c| trace_chain(c, spec))
}

/// All `N(1)` excursions of the chains, in chain order.
pub fn all_excursions(spec: &SurfaceSpec, chains: &[SegmentChain], exec: Exec) -> Result<Vec<ExcursionRecord>> {
    if !spec.is_cusped() {
        return Ok(Vec::new());
    }
    Ok(par::try_map(exec, chains, |c| decompose_excursions(c, spec, 1.0))?
        .into_iter()
        .flatten()
        .collect())
}

/// Runs every per-cutoff statistic on the classes of `𝒢_T`.
pub fn analyze_cutoff(
    spec: &SurfaceSpec,
    classes: &[ClosedGeodesicClass],
    t: f64,
    cfg: &HarnessConfig,
    partition: &CellPartition,
    exec: Exec,
) -> Result<CutoffRow> {
    let chains = trace_all(spec, classes, exec)?;
    let excursions = all_excursions(spec, &chains, exec)?;
    let ctx = Arc::new(SinkContext {
        partition: partition.clone(),
        cusps: spec.cusps.clone(),
        radii: cfg.cusp_radii.clone(),
        index: piece_index(&excursions),
    });
    let opts = CrossingOptions { exec, cell_size: None };
    let sink = find_crossings_into(spec, &chains, &opts, || StatsSink::new(ctx.clone()));
    info!(
        "T = {t}: {} classes, {} geometric crossings",
        classes.len(),
        sink.counts.geometric
    );

    let total_length: f64 = chains.iter().map(|c| c.length * c.pass_weight as f64).sum();
    let ordered_total = sink.counts.ordered_total();
    let growth = growth_point(spec, t, ordered_total, total_length);
    let core_weight: u64 = sink.cells.iter().sum();
    let masses: Vec<f64> = sink.cells.iter().map(|&m| m as f64).collect();
    let spatial_tv = if core_weight == 0 {
        return Err(Error::domain(format!("no crossings in the core at T = {t}")));
    } else {
        cell_tv(&masses, partition)?
    };
    let chi = spec.euler_magnitude();
    let cell_constants = sink
        .cells
        .iter()
        .zip(&partition.areas)
        .map(|(&m, &a)| 2.0 * m as f64 / (total_length * total_length) * 2.0 * PI.powi(3) * chi * chi / a)
        .collect();
    if sink.angle_records < MIN_ANGLE_RECORDS {
        warn!("angle statistic at T = {t} from only {} records", sink.angle_records);
    }
    let angle = AngleKs {
        ks: (sink.angle_records > 0)
            .then(|| sink.angles.ks(angle_cdf))
            .transpose()?,
        records: sink.angle_records,
        low_count: sink.angle_records < MIN_ANGLE_RECORDS,
    };
    let footprint = footprint_tv(&chains, partition, cfg.direction_bins, cfg.footprint_step, exec)?;
    let arc = arc_equidistribution(spec, &chains, partition, &cfg.arc)?;
    let cusp_mass = cfg
        .cusp_radii
        .iter()
        .zip(&sink.cusp_mass)
        .map(|(&r, &m)| CuspMass {
            r,
            t,
            mass: m as f64,
            ratio: m as f64 / (2.0 * t).exp(),
        })
        .collect();
    let excursions = spec
        .is_cusped()
        .then(|| summarize_excursions(spec, &excursions, &chains, t, &sink.pairs));

    Ok(CutoffRow {
        t,
        classes: classes.len() as u64,
        classes_with_powers: classes.iter().map(|c| u64::from(c.max_power)).sum(),
        segments: chains.iter().map(|c| c.segments.len() as u64).sum(),
        total_length,
        length_ratio: total_length / t.exp(),
        geometric_crossings: sink.counts.geometric,
        ordered_total,
        self_crossings: sink.counts.self_crossings,
        near_tangent: sink.near_tangent,
        core_fraction: 2.0 * core_weight as f64 / ordered_total as f64,
        growth_r: growth.r,
        growth_r_prime: growth.r_prime,
        spatial_tv,
        cell_constants,
        angle,
        footprint,
        arc,
        cusp_mass,
        excursions,
    })
}

pub fn summarize_excursions(
    spec: &SurfaceSpec,
    excursions: &[ExcursionRecord],
    chains: &[SegmentChain],
    t: f64,
    pairs: &PairCrossings,
) -> ExcursionSummary {
    let histogram = excursion_histogram(excursions, chains, t);
    let normalized = (0..histogram.counts.len()).map(|n| histogram.normalized(n)).collect();
    let letter_mismatches = excursions
        .iter()
        .filter(|e| e.letter_winding(spec).abs_diff(e.winding) > 1)
        .count() as u64;
    ExcursionSummary {
        slope_2_20: histogram.loglog_slope(2, 20),
        max_winding: histogram.max_winding() as u64,
        winding_limit: histogram.c_fit.map(|c| winding_limit(t, c)),
        normalized,
        letter_mismatches,
        crossing_pairs: pairs.counts.len() as u64,
        pair_violations: pair_bound_violations(excursions, pairs).len() as u64,
        unattributed_crossings: pairs.unattributed,
        histogram,
    }
}

/// Ratios `(E_n/ℓ)(later) / (E_n/ℓ)(earlier)` for `n ≤ n_max`; `None` where
/// the earlier count is zero.
pub fn excursion_stability(earlier: &ExcursionHistogram, later: &ExcursionHistogram, n_max: usize) -> Vec<Option<f64>> {
    (0..=n_max)
        .map(|n| {
            let a = earlier.normalized(n);
            (a > 0.0).then(|| later.normalized(n) / a)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixtureRow {
    pub n: usize,
    pub word: String,
    /// `L(n)`.
    pub length: f64,
    /// `L(n) − 2 log n`; undefined at `n = 0`.
    pub excess: Option<f64>,
    /// `S(n)`, geometric self-crossings.
    pub self_crossings: u64,
    pub brute_force: Option<u64>,
    /// Largest excursion winding of the class.
    pub max_winding: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixtureTable {
    pub base: String,
    pub cusp_word: String,
    pub rows: Vec<FixtureRow>,
    /// Max minus min of `L(n) − 2 log n` over `n ∈ [5, n_max]`.
    pub excess_range: Option<f64>,
    /// Least-squares slope of `S(n)` over the brute-force range.
    pub pinned_slope: Option<f64>,
    pub pinned_intercept: Option<f64>,
    /// Least-squares slope of `S(n)` over all rows.
    pub slope: Option<f64>,
    /// Grid and brute-force counts agree on every pinned row.
    pub brute_force_agrees: bool,
    pub skipped: Vec<usize>,
}

/// Geometric self-crossings and length of the classes `w·cⁿ`, `c` the
/// parabolic word of the first cusp.
pub fn fixture_family(spec: &SurfaceSpec, base: &str, n_max: usize, pin_n: usize, exec: Exec) -> Result<FixtureTable> {
    if !spec.is_cusped() {
        return Err(Error::domain("fixture family needs a cusped surface"));
    }
    if n_max > 30 {
        return Err(Error::Config(format!("fixture n_max {n_max} exceeds 30")));
    }
    let w: Word = base.parse()?;
    let c = spec.cusps[0].vertices[0].parabolic_word.clone();
    let built = par::map_range(exec, n_max + 1, |n| -> Result<Option<FixtureRow>> {
        let word = w.concat(&c.repeat(n));
        let cyclic = CyclicWord::from_any(&word)?;
        let matrix = spec.word_matrix(cyclic.word())?;
        if !matrix.is_hyperbolic() {
            warn!("fixture member {word} is not hyperbolic; skipped");
            return Ok(None);
        }
        let class = ClosedGeodesicClass {
            id: 0,
            length: matrix.translation_length()?,
            word: cyclic,
            matrix,
            max_power: 1,
        };
        let chain = trace_chain(&class, spec)?;
        let chains = std::slice::from_ref(&chain);
        let records = find_crossings(spec, chains, &CrossingOptions::default());
        let brute_force = (n <= pin_n).then(|| brute_force_crossings(spec, chains).len() as u64);
        let max_winding = decompose_excursions(&chain, spec, 1.0)?
            .iter()
            .map(|e| e.winding)
            .max()
            .unwrap_or(0);
        Ok(Some(FixtureRow {
            n,
            word: word.to_string(),
            length: class.length,
            excess: (n > 0).then(|| class.length - 2.0 * (n as f64).ln()),
            self_crossings: records.len() as u64,
            brute_force,
            max_winding,
        }))
    });
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for (n, r) in built.into_iter().enumerate() {
        match r? {
            Some(row) => rows.push(row),
            None => skipped.push(n),
        }
    }
    let excess: Vec<f64> = rows.iter().filter(|r| r.n >= 5).filter_map(|r| r.excess).collect();
    let excess_range = (!excess.is_empty()).then(|| {
        excess.iter().copied().fold(f64::NEG_INFINITY, f64::max) - excess.iter().copied().fold(f64::INFINITY, f64::min)
    });
    let pinned: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| r.brute_force.map(|b| (r.n as f64, b as f64)))
        .collect();
    let pinned_slope = least_squares_slope(&pinned);
    let pinned_intercept = pinned_slope.map(|s| {
        let k = pinned.len() as f64;
        (pinned.iter().map(|p| p.1).sum::<f64>() - s * pinned.iter().map(|p| p.0).sum::<f64>()) / k
    });
    let all: Vec<(f64, f64)> = rows.iter().map(|r| (r.n as f64, r.self_crossings as f64)).collect();
    Ok(FixtureTable {
        base: w.to_string(),
        cusp_word: c.to_string(),
        brute_force_agrees: rows.iter().all(|r| r.brute_force.is_none_or(|b| b == r.self_crossings)),
        rows,
        excess_range,
        pinned_slope,
        pinned_intercept,
        slope: least_squares_slope(&all),
        skipped,
    })
}

/// Numerical checks of the Liouville measure computations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiouvilleCheck {
    pub boxes: usize,
    pub box_additivity_error: f64,
    pub moebius_invariance_error: f64,
    pub arcs: usize,
    /// Worst `|measure − length|` over both evaluation paths.
    pub arc_measure_error: f64,
    pub liouville_length: f64,
    pub expected_liouville_length: f64,
    pub pushforward_factor: f64,
    pub sampler_samples: usize,
    pub sampler_ks: f64,
}

pub fn liouville_check(spec: &SurfaceSpec, seed: u64) -> Result<LiouvilleCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let boxes = 200;
    let (mut additivity, mut invariance) = (0.0f64, 0.0f64);
    for _ in 0..boxes {
        let mut p: Vec<f64> = (0..4).map(|_| rng.gen_range(-5.0..5.0)).collect();
        p.sort_by(f64::total_cmp);
        if p.windows(2).any(|w| w[1] - w[0] < 1e-3) {
            continue;
        }
        let m = rng.gen_range(p[0]..p[1]);
        let whole = box_measure(&BoundaryBox::finite(p[0], p[1], p[2], p[3])?);
        let split = box_measure(&BoundaryBox::finite(p[0], m, p[2], p[3])?)
            + box_measure(&BoundaryBox::finite(m, p[1], p[2], p[3])?);
        additivity = additivity.max((whole - split).abs());
        let (a, b, c) = (
            rng.gen_range(0.5..2.0),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
        );
        let g = MoebiusMap::new(a, b, c, (1.0 + b * c) / a)?;
        let mapped = box_measure(&BoundaryBox::finite(p[0], p[1], p[2], p[3])?.map(&g)?);
        invariance = invariance.max((whole - mapped).abs());
    }
    let arcs = 50;
    let mut arc_err = 0.0f64;
    for _ in 0..arcs {
        let z1 = HPoint::new(rng.gen_range(-2.0..2.0), rng.gen_range(0.2..3.0))?;
        let z2 = HPoint::new(rng.gen_range(-2.0..2.0), rng.gen_range(0.2..3.0))?;
        let m = arc_crossing_measure(z1, z2)?;
        arc_err = arc_err
            .max((m.boxes - m.length).abs())
            .max((m.quadrature - m.length).abs());
    }
    let constants = surface_constants(spec);
    let samples = 10_000;
    let window = LiouvilleWindow::along(BoundaryGeodesic::vertical(0.0), 0.0, 1.0);
    let thetas: Vec<(f64, f64)> = sample_liouville(&window, samples, seed)?
        .iter()
        .map(|s| (s.theta, 1.0))
        .collect();
    Ok(LiouvilleCheck {
        boxes,
        box_additivity_error: additivity,
        moebius_invariance_error: invariance,
        arcs,
        arc_measure_error: arc_err,
        liouville_length: constants.liouville_length,
        expected_liouville_length: PI * PI * spec.euler_magnitude(),
        pushforward_factor: constants.pushforward_factor,
        sampler_samples: samples,
        sampler_ks: weighted_ks(&thetas, angle_cdf)?,
    })
}

/// A named pass/fail line of the report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: String,
    pub threshold: String,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub version: u32,
    pub surface: String,
    pub tolerance: ToleranceProfile,
    pub tolerance_hash: String,
    pub seed: u64,
    pub cache_version: u32,
    pub include_powers: bool,
    pub config: HarnessConfig,
    pub rows: Vec<CutoffRow>,
    pub growth: Vec<GrowthPoint>,
    /// `(E_n/ℓ)` ratios between each pair of consecutive cutoffs.
    pub excursion_stability: Vec<StabilityRow>,
    pub fixture: Option<FixtureTable>,
    pub liouville: LiouvilleCheck,
    pub checks: Vec<Check>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub from_t: f64,
    pub to_t: f64,
    pub ratios: Vec<Option<f64>>,
}

impl ConvergenceReport {
    pub fn row(&self, t: f64) -> Option<&CutoffRow> {
        self.rows.iter().find(|r| r.t == t)
    }

    /// Checks every statistic for finiteness and the row order.
    pub fn validate(&self) -> Result<()> {
        if self.rows.windows(2).any(|w| w[0].t >= w[1].t) {
            return Err(Error::consistency("report rows are not strictly increasing in T"));
        }
        for r in &self.rows {
            let values = [
                r.total_length,
                r.length_ratio,
                r.growth_r,
                r.growth_r_prime,
                r.spatial_tv,
                r.angle.ks.unwrap_or(0.0),
                r.footprint.tv,
                r.footprint.direction_ratio.unwrap_or(0.0),
                r.arc.ks.unwrap_or(0.0),
                r.arc.constant,
            ];
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::NumericalInstability(format!(
                    "non-finite statistic at T = {}",
                    r.t
                )));
            }
        }
        Ok(())
    }
}

#[allow(clippy::too_many_arguments)]
pub fn build_report(
    spec: &SurfaceSpec,
    rows: Vec<CutoffRow>,
    cfg: &HarnessConfig,
    tolerance: &ToleranceProfile,
    cache_version: u32,
    include_powers: bool,
    exec: Exec,
) -> Result<ConvergenceReport> {
    let growth = growth_law(spec, &rows);
    let excursion_stability = rows
        .windows(2)
        .filter_map(|w| match (&w[0].excursions, &w[1].excursions) {
            (Some(a), Some(b)) => Some(StabilityRow {
                from_t: w[0].t,
                to_t: w[1].t,
                ratios: excursion_stability(&a.histogram, &b.histogram, 10),
            }),
            _ => None,
        })
        .collect();
    let fixture = if spec.is_cusped() {
        Some(fixture_family(
            spec,
            &cfg.fixture_base,
            cfg.fixture_n_max,
            cfg.fixture_pin_n,
            exec,
        )?)
    } else {
        None
    };
    let liouville = liouville_check(spec, cfg.seed)?;
    let mut report = ConvergenceReport {
        version: REPORT_VERSION,
        surface: spec.name().to_string(),
        tolerance: tolerance.clone(),
        tolerance_hash: tolerance.content_hash(),
        seed: cfg.seed,
        cache_version,
        include_powers,
        config: cfg.clone(),
        rows,
        growth,
        excursion_stability,
        fixture,
        liouville,
        checks: Vec::new(),
    };
    report.validate()?;
    report.checks = evaluate_checks(&report);
    Ok(report)
}

fn check(name: &str, value: impl ToString, threshold: &str, pass: bool) -> Check {
    Check {
        name: name.to_string(),
        value: value.to_string(),
        threshold: threshold.to_string(),
        pass,
    }
}

fn strictly_decreasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] < w[0])
}

/// The named gates. A gate is only emitted when the cutoffs it refers to are
/// present in the report.
pub fn evaluate_checks(report: &ConvergenceReport) -> Vec<Check> {
    let mut out = Vec::new();
    let rows_at = |ts: &[f64]| -> Option<Vec<&CutoffRow>> { ts.iter().map(|&t| report.row(t)).collect() };
    let trend = [6.0, 8.0, 10.0];

    if let Some(rows) = rows_at(&[8.0, 9.0, 10.0]) {
        let ratios: Vec<f64> = rows.iter().map(|r| r.length_ratio).collect();
        out.push(check(
            "length_ratio_T8_T9_T10",
            format!("{ratios:?}"),
            "in [0.3, 3]",
            ratios.iter().all(|r| (0.3..=3.0).contains(r)),
        ));
    }
    if let Some(rows) = rows_at(&trend) {
        let tv: Vec<f64> = rows.iter().map(|r| r.footprint.tv).collect();
        out.push(check(
            "footprint_tv_T6_T8_T10",
            format!("{tv:?}"),
            "strictly decreasing, last < 0.15",
            strictly_decreasing(&tv) && tv[2] < 0.15,
        ));
        let tv: Vec<f64> = rows.iter().map(|r| r.spatial_tv).collect();
        out.push(check(
            "spatial_tv_T6_T8_T10",
            format!("{tv:?}"),
            "strictly decreasing, last < 0.1",
            strictly_decreasing(&tv) && tv[2] < 0.1,
        ));
    }
    if let Some(rows) = rows_at(&[8.0, 10.0]) {
        let (e8, e10) = ((rows[0].growth_r - 1.0).abs(), (rows[1].growth_r - 1.0).abs());
        out.push(check(
            "growth_r_T10",
            format!("r(8) = {}, r(10) = {}", rows[0].growth_r, rows[1].growth_r),
            "|r(10) − 1| < 0.3 and < |r(8) − 1|",
            e10 < 0.3 && e10 < e8,
        ));
    }
    if let Some(r) = report.row(10.0) {
        let ratio = r.footprint.direction_ratio.unwrap_or(f64::INFINITY);
        out.push(check("direction_ratio_T10", ratio, "< 1.5", ratio < 1.5));
        let ks = r.angle.ks.unwrap_or(f64::NAN);
        out.push(check("angle_ks_T10", ks, "< 0.05", ks < 0.05));
        let ks = r.arc.ks.unwrap_or(f64::NAN);
        out.push(check("arc_ks_T10", ks, "< 0.06", ks < 0.06));
        if let Some(e) = &r.excursions {
            let slope = e.slope_2_20.unwrap_or(f64::NAN);
            out.push(check("excursion_slope_T10", slope, "≤ −1.7", slope <= -1.7));
            out.push(check(
                "excursion_length_bound_T10",
                format!(
                    "c_fit = {:?}, max winding {} ≤ {:?}",
                    e.histogram.c_fit, e.max_winding, e.winding_limit
                ),
                "finite c_fit, windings within the implied limit",
                e.winding_limit.is_some_and(|l| (e.max_winding as f64) <= l),
            ));
            out.push(check(
                "excursion_pair_bound_T10",
                format!("{} violations over {} pairs", e.pair_violations, e.crossing_pairs),
                "0 violations",
                e.pair_violations == 0,
            ));
        }
    }
    if let Some(s) = report
        .excursion_stability
        .iter()
        .find(|s| s.from_t == 9.0 && s.to_t == 10.0)
    {
        let ok = s.ratios.iter().all(|r| r.is_some_and(|r| (0.5..=2.0).contains(&r)));
        out.push(check(
            "excursion_stability_T9_T10",
            format!("{:?}", s.ratios),
            "every ratio for n ≤ 10 in [0.5, 2]",
            ok,
        ));
    }
    for t in [9.0, 10.0] {
        if let Some(r) = report.row(t) {
            let ratios: Vec<f64> = r.cusp_mass.iter().map(|m| m.ratio).collect();
            out.push(check(
                &format!("cusp_mass_T{t}"),
                format!("{ratios:?}"),
                "strictly decreasing as r halves",
                strictly_decreasing(&ratios),
            ));
        }
    }
    let l = &report.liouville;
    out.push(check(
        "liouville_identities",
        format!(
            "additivity {:e}, invariance {:e}, arcs {:e}",
            l.box_additivity_error, l.moebius_invariance_error, l.arc_measure_error
        ),
        "1e-9, 1e-9, 1e-6",
        l.box_additivity_error < 1e-9 && l.moebius_invariance_error < 1e-9 && l.arc_measure_error < 1e-6,
    ));
    if let Some(f) = &report.fixture {
        let range = f.excess_range.unwrap_or(f64::NAN);
        let slope = f.slope.unwrap_or(f64::NAN);
        out.push(check("fixture_length_excess_range", range, "< 1.0", range < 1.0));
        out.push(check(
            "fixture_self_crossing_slope",
            format!("{slope} (pinned {:?})", f.pinned_slope),
            "in [0.8, 2.2], brute force agrees",
            (0.8..=2.2).contains(&slope) && f.brute_force_agrees,
        ));
    }
    out
}
