//! Distances between distributions.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Half the ℓ¹ distance between two nonnegative vectors after normalizing
/// each to total mass 1.
pub fn tv_distance(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::domain("distributions have different supports"));
    }
    let (sp, sq): (f64, f64) = (p.iter().sum(), q.iter().sum());
    if !(sp > 0.0) || !(sq > 0.0) {
        return Err(Error::domain("distribution has no mass"));
    }
    Ok(0.5 * p.iter().zip(q).map(|(a, b)| (a / sp - b / sq).abs()).sum::<f64>())
}

/// Kolmogorov–Smirnov distance of weighted samples `(value, weight)` from a
/// continuous CDF.
pub fn weighted_ks(samples: &[(f64, f64)], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    let total: f64 = samples.iter().map(|s| s.1).sum();
    if !(total > 0.0) {
        return Err(Error::domain("no samples"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut below = 0.0;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        // ties jump together
        let x = sorted[i].0;
        let mut w = 0.0;
        while i < sorted.len() && sorted[i].0 == x {
            w += sorted[i].1;
            i += 1;
        }
        let f = cdf(x);
        d = d.max((f - below / total).abs());
        below += w;
        d = d.max((f - below / total).abs());
    }
    Ok(d)
}

/// Fixed-bin weighted histogram on `[lo, hi)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub bins: Vec<u64>,
}

impl Histogram {
    pub fn new(lo: f64, hi: f64, bins: usize) -> Self {
        Histogram {
            lo,
            hi,
            bins: vec![0; bins.max(1)],
        }
    }

    pub fn bin_of(&self, x: f64) -> usize {
        let n = self.bins.len();
        (((x - self.lo) / (self.hi - self.lo) * n as f64).floor().max(0.0) as usize).min(n - 1)
    }

    pub fn add(&mut self, x: f64, weight: u64) {
        let b = self.bin_of(x);
        self.bins[b] += weight;
    }

    pub fn merge(&mut self, other: &Histogram) {
        for (a, b) in self.bins.iter_mut().zip(&other.bins) {
            *a += b;
        }
    }

    pub fn total(&self) -> u64 {
        self.bins.iter().sum()
    }

    /// KS distance evaluated at the bin edges. The true statistic exceeds
    /// it by at most the largest CDF increment over one bin.
    pub fn ks(&self, cdf: impl Fn(f64) -> f64) -> Result<f64> {
        let total = self.total();
        if total == 0 {
            return Err(Error::domain("empty histogram"));
        }
        let n = self.bins.len();
        let width = (self.hi - self.lo) / n as f64;
        let mut below = 0u64;
        let mut d: f64 = (cdf(self.lo)).abs();
        for (k, &c) in self.bins.iter().enumerate() {
            below += c;
            let edge = self.lo + (k + 1) as f64 * width;
            d = d.max((cdf(edge) - below as f64 / total as f64).abs());
        }
        Ok(d)
    }
}

pub fn least_squares_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn tv_examples() {
        assert_eq!(tv_distance(&[1.0, 1.0], &[2.0, 2.0]).unwrap(), 0.0);
        assert!((tv_distance(&[1.0, 0.0, 0.0], &[1.0, 1.0, 2.0]).unwrap() - 0.75).abs() < 1e-15);
        assert!(tv_distance(&[0.0], &[1.0]).is_err());
        assert!(tv_distance(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn ks_examples() {
        let cdf = |t: f64| 0.5 * (1.0 - t.cos());
        let d = weighted_ks(&[(PI / 2.0, 1.0); 10], cdf).unwrap();
        assert!((d - 0.5).abs() < 1e-15);
        let mut h = Histogram::new(0.0, PI, 1 << 16);
        h.add(PI / 2.0, 10);
        assert!((h.ks(cdf).unwrap() - 0.5).abs() < 1e-4);
        let uniform: Vec<(f64, f64)> = (0..1000).map(|i| ((i as f64 + 0.5) / 1000.0, 1.0)).collect();
        assert!(weighted_ks(&uniform, |x| x.clamp(0.0, 1.0)).unwrap() <= 0.0005 + 1e-12);
    }

    #[test]
    fn slopes() {
        let pts: Vec<(f64, f64)> = (1..10).map(|i| (i as f64, 3.0 - 2.0 * i as f64)).collect();
        assert!((least_squares_slope(&pts).unwrap() + 2.0).abs() < 1e-12);
        assert_eq!(least_squares_slope(&pts[..1]), None);
    }

    proptest! {
        #[test]
        fn tv_is_symmetric_bounded_and_relabel_invariant(
            p in prop::collection::vec(0.01f64..10.0, 2..30),
            seed in any::<u64>(),
        ) {
            let q: Vec<f64> = p.iter().enumerate().map(|(i, x)| x + ((seed >> (i % 64)) & 1) as f64).collect();
            let d = tv_distance(&p, &q).unwrap();
            prop_assert!((0.0..=1.0).contains(&d));
            prop_assert!((d - tv_distance(&q, &p).unwrap()).abs() < 1e-15);
            let (mut pr, mut qr) = (p.clone(), q.clone());
            pr.reverse();
            qr.reverse();
            prop_assert!((d - tv_distance(&pr, &qr).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn histogram_ks_tracks_exact_ks(xs in prop::collection::vec(0.0f64..1.0, 50..300)) {
            let mut h = Histogram::new(0.0, 1.0, 1 << 16);
            for &x in &xs {
                h.add(x, 1);
            }
            let exact = weighted_ks(&xs.iter().map(|&x| (x, 1.0)).collect::<Vec<_>>(), |x| x).unwrap();
            let binned = h.ks(|x| x).unwrap();
            prop_assert!(binned <= exact + 1e-12);
            prop_assert!(exact - binned <= 1.0 / 65536.0 + 1e-12);
        }
    }
}
