//! Closed geodesics up to a length cutoff, and orbit counting.
//!
//! Both searches walk the tiling by copies `g·F` of the fundamental polygon,
//! keeping a tile only if it comes within a fixed radius of a base point. For
//! ideal polygons the tiles form a tree (the Cayley tree of the free group), so
//! the kept tiles form a subtree and a plain depth-first search visits them
//! exactly once. Compact polygons fall back to a breadth-first search with a
//! visited set.
//!
//! Completeness of [`enumerate_classes`]: a closed geodesic of length `ℓ ≤ T`
//! meets the core `K` (polygon minus the `N(1)` cusp pieces). Lift a point
//! `p ∈ K`; some representative `g` of the class has its axis through `p`, so
//! `g·p` lies within `T` of `p` and the tile `g·F` lies within `T + R_K` of the
//! centre, where `R_K` bounds the distance from the centre to `K`.

use std::collections::{BTreeSet, HashSet, VecDeque};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use crate::hyperbolic::{hyp_distance, trace_bound, Classification, HPoint, MoebiusMap};
use crate::par::{self, Exec};
use crate::surface::{SurfaceSpec, Vertex};
use crate::words::{inverse_letter, CyclicWord, Letter, Word};
use crate::{Error, Result};

/// Default cap on visited tiles before the search aborts.
pub const DEFAULT_MAX_NODES: usize = 200_000_000;

/// Depth of the sequential prefix before subtrees are handed out in parallel.
const SPLIT_DEPTH: usize = 5;

/// One primitive closed geodesic together with the powers of it that fit
/// under the cutoff.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosedGeodesicClass {
    pub id: usize,
    /// Canonical cyclic word of the primitive root; equals its cutting sequence.
    pub word: CyclicWord,
    pub matrix: MoebiusMap,
    pub length: f64,
    /// Largest `k` with `k·ℓ ≤ T` (or 1 when powers are excluded).
    pub max_power: u32,
}

impl ClosedGeodesicClass {
    /// `K = Σ_{k ≤ k_max} k`: the number of passes summed over all powers.
    pub fn pass_weight(&self) -> u64 {
        let k = self.max_power as u64;
        k * (k + 1) / 2
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnumerationOptions {
    pub include_powers: bool,
    pub max_nodes: usize,
    pub exec: Exec,
}

impl Default for EnumerationOptions {
    fn default() -> Self {
        EnumerationOptions {
            include_powers: true,
            max_nodes: DEFAULT_MAX_NODES,
            exec: Exec::default(),
        }
    }
}

pub fn max_power(length: f64, t: f64, include_powers: bool) -> u32 {
    if length > t {
        0
    } else if include_powers {
        ((t / length).floor() as u32).max(1)
    } else {
        1
    }
}

/// Ordered product of generator matrices.
pub fn word_to_matrix(word: &Word, spec: &SurfaceSpec) -> Result<MoebiusMap> {
    spec.word_matrix(word)
}

fn check_cutoff(t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Config(format!("length cutoff must be positive, got {t}")));
    }
    Ok(())
}

/// All primitive unoriented closed geodesics of length at most `t`, sorted by
/// `(length, word)`.
pub fn enumerate_classes(spec: &SurfaceSpec, t: f64, opts: &EnumerationOptions) -> Result<Vec<ClosedGeodesicClass>> {
    check_cutoff(t)?;
    let radius = t + spec.core_radius();
    let bound = trace_bound(t) * (1.0 + 1e-12);
    let borderline = AtomicUsize::new(0);
    let words: BTreeSet<CyclicWord> = if is_tree_tiling(spec) {
        let parts = tree_search(
            spec,
            spec.center,
            radius,
            opts,
            |letters, g, out: &mut HashSet<CyclicWord>| {
                let tr = g.trace().abs();
                if tr > bound {
                    return Ok(());
                }
                match g.classify() {
                    Classification::Hyperbolic => {}
                    Classification::Parabolic if tr > 2.0 => {
                        borderline.fetch_add(1, Ordering::Relaxed);
                        return Ok(());
                    }
                    _ => return Ok(()),
                }
                let class = CyclicWord::from_any(&Word::from_letters(letters.to_vec()))?;
                if class.is_primitive() {
                    out.insert(class);
                }
                Ok(())
            },
        )?;
        parts.into_iter().flatten().collect()
    } else {
        let mut found = BTreeSet::new();
        let mut degenerate_lengths = BTreeSet::new();
        graph_search(spec, spec.center, radius, opts.max_nodes, |g| {
            let tr = g.trace().abs();
            if tr > bound || g.classify() != Classification::Hyperbolic {
                return Ok(());
            }
            match crate::chain::cutting_word(spec, g) {
                Ok(cut) => {
                    let class = CyclicWord::new(&cut)?;
                    if class.is_primitive() {
                        found.insert(class);
                    }
                }
                // axes along polygon edges or through vertices have no cutting sequence
                Err(Error::NumericalInstability(_)) => {
                    degenerate_lengths.insert((g.translation_length()? * 1e9).round() as i64);
                }
                Err(e) => return Err(e),
            }
            Ok(())
        })?;
        if !degenerate_lengths.is_empty() {
            log::warn!(
                "skipped geodesics running through polygon vertices or edges ({} distinct lengths)",
                degenerate_lengths.len()
            );
        }
        found
    };
    let skipped = borderline.load(Ordering::Relaxed);
    if skipped > 0 {
        log::warn!("excluded {skipped} numerically parabolic tiles with |trace| within 1e-10 of 2");
    }
    finish_classes(spec, words.into_iter().collect(), t, opts)
}

fn finish_classes(
    spec: &SurfaceSpec,
    words: Vec<CyclicWord>,
    t: f64,
    opts: &EnumerationOptions,
) -> Result<Vec<ClosedGeodesicClass>> {
    let mut classes = par::try_map(opts.exec, &words, |w| {
        let matrix = spec.word_matrix(w.word())?;
        let length = matrix.translation_length()?;
        Ok::<_, Error>((w.clone(), matrix, length))
    })?
    .into_iter()
    .filter(|(_, _, l)| *l <= t)
    .map(|(word, matrix, length)| ClosedGeodesicClass {
        id: 0,
        word,
        matrix,
        length,
        max_power: max_power(length, t, opts.include_powers),
    })
    .collect::<Vec<_>>();
    sort_and_number(&mut classes);
    Ok(classes)
}

fn sort_and_number(classes: &mut [ClosedGeodesicClass]) {
    classes.sort_by(|a, b| a.length.total_cmp(&b.length).then_with(|| a.word.cmp(&b.word)));
    for (i, c) in classes.iter_mut().enumerate() {
        c.id = i;
    }
}

/// The sub-list of classes with length at most `t`, renumbered, with `k_max`
/// recomputed for the smaller cutoff.
pub fn restrict_to(classes: &[ClosedGeodesicClass], t: f64, include_powers: bool) -> Vec<ClosedGeodesicClass> {
    let mut out: Vec<_> = classes
        .iter()
        .filter(|c| c.length <= t)
        .map(|c| ClosedGeodesicClass {
            max_power: max_power(c.length, t, include_powers),
            ..c.clone()
        })
        .collect();
    sort_and_number(&mut out);
    out
}

/// Oracle: every reduced word up to `max_len`, reduced to its conjugacy class.
/// Only meaningful for free groups.
pub fn brute_force_classes(spec: &SurfaceSpec, t: f64, max_len: usize) -> Result<Vec<ClosedGeodesicClass>> {
    check_cutoff(t)?;
    let mut found: BTreeSet<CyclicWord> = BTreeSet::new();
    let alphabet = spec.alphabet_size() as Letter;
    let mut stack: Vec<(Vec<Letter>, MoebiusMap)> = vec![(Vec::new(), MoebiusMap::IDENTITY)];
    while let Some((letters, g)) = stack.pop() {
        if !letters.is_empty() && g.is_hyperbolic() && g.translation_length()? <= t {
            let class = CyclicWord::from_any(&Word::from_letters(letters.clone()))?;
            if class.is_primitive() {
                found.insert(class);
            }
        }
        if letters.len() == max_len {
            continue;
        }
        for x in 0..alphabet {
            if letters.last() == Some(&inverse_letter(x)) {
                continue;
            }
            let mut next = letters.clone();
            next.push(x);
            stack.push((next, g.compose(&spec.letter_matrix(x)?)));
        }
    }
    finish_classes(
        spec,
        found.into_iter().collect(),
        t,
        &EnumerationOptions {
            exec: Exec::Sequential,
            ..Default::default()
        },
    )
}

/// `ℓ(γ_T) = Σ_roots Σ_{k ≤ k_max} k·ℓ(root)`.
pub fn count_length(classes: &[ClosedGeodesicClass]) -> f64 {
    // `sum` of no floats is −0.0
    classes
        .iter()
        .fold(0.0, |acc, c| acc + c.pass_weight() as f64 * c.length)
}

/// Number of orbit points `h·z₀` with `d(z₀, h·z₀) ≤ t`.
pub fn orbit_count(z0: HPoint, t: f64, spec: &SurfaceSpec, opts: &EnumerationOptions) -> Result<u64> {
    if !(t >= 0.0) {
        return Err(Error::Config(format!("orbit radius must be nonnegative, got {t}")));
    }
    let (base, _) = spec.normalize_to_domain(z0)?;
    let count = |g: &MoebiusMap| u64::from(hyp_distance(base, g.apply(base)) <= t);
    if is_tree_tiling(spec) {
        let parts = tree_search(spec, base, t, opts, |_, g, acc: &mut u64| {
            *acc += count(g);
            Ok(())
        })?;
        Ok(parts.into_iter().sum())
    } else {
        let mut total = 0;
        graph_search(spec, base, t, opts.max_nodes, |g| {
            total += count(g);
            Ok(())
        })?;
        Ok(total)
    }
}

pub fn is_tree_tiling(spec: &SurfaceSpec) -> bool {
    spec.vertices.iter().all(|v| matches!(v, Vertex::Ideal(_)))
}

/// Depth-first search over reduced words whose tiles come within `radius` of
/// `base` (which must lie in the polygon). Returns one accumulator per
/// parallel subtree, in a fixed order.
fn tree_search<R, F>(
    spec: &SurfaceSpec,
    base: HPoint,
    radius: f64,
    opts: &EnumerationOptions,
    visit: F,
) -> Result<Vec<R>>
where
    R: Default + Send,
    F: Fn(&[Letter], &MoebiusMap, &mut R) -> Result<()> + Sync,
{
    let alphabet = spec.alphabet_size() as Letter;
    let letters: Vec<MoebiusMap> = (0..alphabet).map(|x| spec.letter_matrix(x)).collect::<Result<_>>()?;
    let keep = |g: &MoebiusMap| spec.distance_to_polygon(g.inverse().apply(base)) <= radius;
    let visited = AtomicUsize::new(0);
    let aborted = AtomicBool::new(false);
    let deepest = AtomicUsize::new(0);

    // sequential prefix
    let mut head = R::default();
    let mut frontier: Vec<(Vec<Letter>, MoebiusMap)> = Vec::new();
    let mut stack = vec![(Vec::new(), MoebiusMap::IDENTITY)];
    while let Some((word, g)) = stack.pop() {
        visit(&word, &g, &mut head)?;
        visited.fetch_add(1, Ordering::Relaxed);
        for x in 0..alphabet {
            if word.last() == Some(&inverse_letter(x)) {
                continue;
            }
            let h = g.compose(&letters[x as usize]);
            if !keep(&h) {
                continue;
            }
            let mut w = word.clone();
            w.push(x);
            if w.len() >= SPLIT_DEPTH {
                frontier.push((w, h));
            } else {
                stack.push((w, h));
            }
        }
    }
    frontier.sort_by(|a, b| a.0.cmp(&b.0));

    let results = par::try_map(opts.exec, &frontier, |(word, g)| {
        let mut acc = R::default();
        let mut stack = vec![(word.clone(), *g)];
        while let Some((word, g)) = stack.pop() {
            if aborted.load(Ordering::Relaxed) {
                return Ok(acc);
            }
            visit(&word, &g, &mut acc)?;
            if visited.fetch_add(1, Ordering::Relaxed) >= opts.max_nodes {
                deepest.fetch_max(word.len(), Ordering::Relaxed);
                aborted.store(true, Ordering::Relaxed);
                return Ok(acc);
            }
            for x in 0..alphabet {
                if word.last() == Some(&inverse_letter(x)) {
                    continue;
                }
                let h = g.compose(&letters[x as usize]);
                if keep(&h) {
                    let mut w = word.clone();
                    w.push(x);
                    stack.push((w, h));
                }
            }
        }
        Ok::<_, Error>(acc)
    })?;
    if aborted.load(Ordering::Relaxed) {
        return Err(Error::Resource(format!(
            "tile search exceeded {} nodes at word length {}",
            opts.max_nodes,
            deepest.load(Ordering::Relaxed)
        )));
    }
    let mut out = Vec::with_capacity(results.len() + 1);
    out.push(head);
    out.extend(results);
    Ok(out)
}

/// Breadth-first search over tiles for tilings with finite vertices, where
/// distinct words can name the same tile. Tiles are keyed by the image of the
/// polygon's centre.
fn graph_search<F>(spec: &SurfaceSpec, base: HPoint, radius: f64, max_nodes: usize, mut visit: F) -> Result<()>
where
    F: FnMut(&MoebiusMap) -> Result<()>,
{
    let key = |g: &MoebiusMap| {
        let p = g.apply(spec.center);
        ((p.x * 1e8).round() as i64, (p.y.ln() * 1e8).round() as i64)
    };
    let alphabet = spec.alphabet_size() as Letter;
    let letters: Vec<MoebiusMap> = (0..alphabet).map(|x| spec.letter_matrix(x)).collect::<Result<_>>()?;
    let mut seen = HashSet::new();
    seen.insert(key(&MoebiusMap::IDENTITY));
    let mut queue = VecDeque::from([(MoebiusMap::IDENTITY, 0usize)]);
    while let Some((g, depth)) = queue.pop_front() {
        visit(&g)?;
        if seen.len() > max_nodes {
            return Err(Error::Resource(format!(
                "tile search exceeded {max_nodes} nodes at word length {depth}"
            )));
        }
        for m in &letters {
            let h = g.compose(m);
            if spec.distance_to_polygon(h.inverse().apply(base)) <= radius && seen.insert(key(&h)) {
                queue.push_back((h, depth + 1));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::{build_genus2_octagon, build_punctured_torus};
    use approx::assert_abs_diff_eq;

    fn opts() -> EnumerationOptions {
        EnumerationOptions::default()
    }

    #[test]
    fn word_matrices() {
        let s = build_punctured_torus().unwrap();
        let a = word_to_matrix(&"a".parse().unwrap(), &s).unwrap();
        assert_eq!(a.entries(), [1.0, 1.0, 1.0, 2.0]);
        let c = word_to_matrix(&"abAB".parse().unwrap(), &s).unwrap();
        assert!((c.trace().abs() - 2.0).abs() < 1e-12);
        assert!(word_to_matrix(&"ac".parse().unwrap(), &s).is_err());
    }

    #[test]
    fn small_cutoffs() {
        let s = build_punctured_torus().unwrap();
        let classes = enumerate_classes(&s, 2.0, &opts()).unwrap();
        let words: Vec<String> = classes.iter().map(|c| c.word.to_string()).collect();
        assert!(words.contains(&"a".to_string()) && words.contains(&"b".to_string()));
        assert!(!words.iter().any(|w| w == "abAB" || w == "aBAb"));
        for c in &classes {
            assert_abs_diff_eq!(c.length, 1.9248473, epsilon = 1e-7);
        }
        assert!(enumerate_classes(&s, 1.0, &opts()).unwrap().is_empty());
        assert!(enumerate_classes(&s, 0.0, &opts()).is_err());
    }

    #[test]
    fn agrees_with_brute_force_at_small_cutoff() {
        let s = build_punctured_torus().unwrap();
        let fast = enumerate_classes(&s, 3.5, &opts()).unwrap();
        let slow = brute_force_classes(&s, 3.5, 9).unwrap();
        assert_eq!(fast, slow);
        assert!(!fast.is_empty());
    }

    #[test]
    fn count_length_examples() {
        let s = build_punctured_torus().unwrap();
        let mut class = enumerate_classes(&s, 2.0, &opts()).unwrap().remove(0);
        class.length = 1.9;
        class.max_power = max_power(1.9, 2.0, true);
        assert_abs_diff_eq!(count_length(&[class.clone()]), 1.9);
        class.length = 0.9;
        class.max_power = max_power(0.9, 2.0, true);
        assert_abs_diff_eq!(count_length(&[class]), 2.7, epsilon = 1e-12);
    }

    #[test]
    fn restriction_matches_direct_enumeration() {
        let s = build_punctured_torus().unwrap();
        let big = enumerate_classes(&s, 6.0, &opts()).unwrap();
        let small = enumerate_classes(&s, 4.5, &opts()).unwrap();
        assert_eq!(restrict_to(&big, 4.5, true), small);
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let s = build_punctured_torus().unwrap();
        let seq = enumerate_classes(
            &s,
            6.0,
            &EnumerationOptions {
                exec: Exec::Sequential,
                ..opts()
            },
        )
        .unwrap();
        let par = enumerate_classes(
            &s,
            6.0,
            &EnumerationOptions {
                exec: Exec::Parallel,
                ..opts()
            },
        )
        .unwrap();
        assert_eq!(seq, par);
    }

    #[test]
    fn resource_guard() {
        let s = build_punctured_torus().unwrap();
        let err = enumerate_classes(
            &s,
            8.0,
            &EnumerationOptions {
                max_nodes: 1000,
                ..opts()
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::Resource(_)), "{err}");
        assert!(err.to_string().contains("word length"));
    }

    #[test]
    fn orbit_counts() {
        let s = build_punctured_torus().unwrap();
        let z0 = HPoint::new_unchecked(0.1, 1.3);
        assert_eq!(orbit_count(z0, 0.0, &s, &opts()).unwrap(), 1);
        let mut prev = 0;
        for t in [1.0, 2.0, 3.0, 4.0, 5.0] {
            let n = orbit_count(z0, t, &s, &opts()).unwrap();
            assert!(n >= prev);
            prev = n;
        }
        // oracle: unpruned search over all words of length <= 12
        let t = 3.0;
        let mut brute = 0u64;
        let mut stack: Vec<(Option<Letter>, MoebiusMap, usize)> = vec![(None, MoebiusMap::IDENTITY, 0)];
        while let Some((last, g, len)) = stack.pop() {
            if hyp_distance(z0, g.apply(z0)) <= t {
                brute += 1;
            }
            if len == 12 {
                continue;
            }
            for x in 0..4u8 {
                if last == Some(inverse_letter(x)) {
                    continue;
                }
                stack.push((Some(x), g.compose(&s.letter_matrix(x).unwrap()), len + 1));
            }
        }
        assert_eq!(orbit_count(z0, t, &s, &opts()).unwrap(), brute);
    }

    #[test]
    fn octagon_systole() {
        let s = build_genus2_octagon().unwrap();
        let classes = enumerate_classes(&s, 3.2, &opts()).unwrap();
        // the shortest curves join midpoints of opposite sides: length 2·inradius
        let inradius = (1.0 + 2f64.sqrt()).acosh();
        assert!(!classes.is_empty());
        assert_abs_diff_eq!(classes[0].length, 2.0 * inradius, epsilon = 1e-9);
        for c in &classes {
            assert!(c.length <= 3.2 && c.word.is_primitive());
        }
    }
}
