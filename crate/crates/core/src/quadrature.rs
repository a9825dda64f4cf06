//! Adaptive Gauss–Kronrod (7, 15) quadrature with an absolute tolerance.

use std::collections::BinaryHeap;

use crate::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

/// Gauss weights for the odd-indexed Kronrod nodes (and the centre).
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_INTERVALS: usize = 20_000;

/// One 15-point Kronrod estimate with its embedded Gauss difference.
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let pair = f(c - dx) + f(c + dx);
        kron += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kron * h, (kron - gauss).abs() * h)
}

/// `∫_a^b f` to absolute tolerance `tol` (or 1e-14 relative, whichever is
/// larger). Globally adaptive: the interval
/// with the largest error estimate is bisected until the summed estimate
/// meets the tolerance.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let mut heap = BinaryHeap::new();
    let (value, err) = gk15(&f, a, b);
    let (mut total, mut total_err) = (value, err);
    heap.push(Interval {
        lo: a,
        hi: b,
        value,
        err,
    });
    // below this the estimate is rounding noise
    let floor = |total: f64| tol.max(1e-14 * total.abs());
    while total_err > floor(total) {
        if !total.is_finite() {
            return Err(Error::NumericalInstability(format!(
                "integrand is not finite on [{a}, {b}]"
            )));
        }
        let worst = heap.pop().expect("heap holds every interval");
        let mid = 0.5 * (worst.lo + worst.hi);
        if heap.len() >= MAX_INTERVALS || mid <= worst.lo || mid >= worst.hi {
            return Err(Error::NumericalInstability(format!(
                "quadrature did not converge near [{}, {}] (error estimate {total_err:e})",
                worst.lo, worst.hi
            )));
        }
        total -= worst.value;
        total_err -= worst.err;
        for (lo, hi) in [(worst.lo, mid), (mid, worst.hi)] {
            let (value, err) = gk15(&f, lo, hi);
            total += value;
            total_err += err;
            heap.push(Interval { lo, hi, value, err });
        }
        // re-sum to keep cancellation from drifting the running totals
        if heap.len() % 64 == 0 {
            total = heap.iter().map(|i| i.value).sum();
            total_err = heap.iter().map(|i| i.err).sum();
        }
    }
    if !total.is_finite() {
        return Err(Error::NumericalInstability(format!(
            "integrand is not finite on [{a}, {b}]"
        )));
    }
    Ok(heap.iter().map(|i| i.value).sum())
}

struct Interval {
    lo: f64,
    hi: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Interval {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}

impl Eq for Interval {}

impl PartialOrd for Interval {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Interval {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&other.err)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn polynomials_are_exact() {
        // a 15-point Kronrod rule integrates degree 22 exactly
        let v = integrate(|x| x.powi(10) - 3.0 * x.powi(3), -1.0, 2.0, 1e-12).unwrap();
        let exact = (2f64.powi(11) + 1.0) / 11.0 - 0.75 * (16.0 - 1.0);
        assert!((v - exact).abs() < 1e-11);
    }

    #[test]
    fn smooth_and_peaked_integrands() {
        let v = integrate(|t| 0.5 * t.sin(), 0.0, PI, 1e-12).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        let v = integrate(|x| 1.0 / (1e-4 + x * x), -1.0, 1.0, 1e-9).unwrap();
        let exact = 2.0 * (1.0 / 1e-2f64) * (1.0 / 1e-2f64).atan();
        assert!((v - exact).abs() < 1e-7 * exact);
        assert_eq!(integrate(|x| x, 3.0, 3.0, 1e-9).unwrap(), 0.0);
    }

    #[test]
    fn singular_integrand_is_reported() {
        assert!(integrate(|x| 1.0 / x, 0.0, 1.0, 1e-12).is_err());
    }
}
