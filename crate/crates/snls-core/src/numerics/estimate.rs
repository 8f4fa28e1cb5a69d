//! Monte Carlo estimates with order-independent accumulation.
//!
//! Sums are kept as exact floating-point expansions and rounded once, so
//! merging batches gives bit-identical means to a single pass.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Exact sum of `f64` values as non-overlapping partials.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExactSum {
    partials: Vec<f64>,
}

impl ExactSum {
    pub fn add(&mut self, mut x: f64) {
        let mut i = 0;
        for j in 0..self.partials.len() {
            let mut y = self.partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                self.partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        self.partials.truncate(i);
        self.partials.push(x);
    }

    pub fn merge(&mut self, other: &ExactSum) {
        for &p in &other.partials {
            self.add(p);
        }
    }

    /// Correctly rounded value of the exact sum.
    pub fn value(&self) -> f64 {
        let p = &self.partials;
        if p.is_empty() {
            return 0.0;
        }
        let mut n = p.len() - 1;
        let mut hi = p[n];
        let mut lo = 0.0;
        while n > 0 {
            let x = hi;
            n -= 1;
            let y = p[n];
            hi = x + y;
            lo = y - (hi - x);
            if lo != 0.0 {
                break;
            }
        }
        if n > 0 && ((lo < 0.0 && p[n - 1] < 0.0) || (lo > 0.0 && p[n - 1] > 0.0)) {
            let y = lo * 2.0;
            let x = hi + y;
            if y == x - hi {
                hi = x;
            }
        }
        hi
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: Complex64,
    /// Standard error of the complex mean, `sqrt(E|X − m|² / n)`.
    pub stderr: f64,
    pub n: u64,
}

impl Estimate {
    /// Whether `|mean − target| < k·stderr`.
    pub fn agrees_with(&self, target: Complex64, k: f64) -> bool {
        (self.mean - target).norm() < k * self.stderr
    }

    /// `|mean − target| / stderr`.
    pub fn z_score(&self, target: Complex64) -> f64 {
        (self.mean - target).norm() / self.stderr
    }
}

/// Running sums for one complex observable.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Accumulator {
    re: ExactSum,
    im: ExactSum,
    sq: ExactSum,
    n: u64,
}

impl Accumulator {
    pub fn new() -> Accumulator {
        Accumulator::default()
    }

    pub fn push(&mut self, z: Complex64) {
        self.re.add(z.re);
        self.im.add(z.im);
        self.sq.add(z.norm_sqr());
        self.n += 1;
    }

    pub fn merge(&mut self, o: &Accumulator) {
        self.re.merge(&o.re);
        self.im.merge(&o.im);
        self.sq.merge(&o.sq);
        self.n += o.n;
    }

    pub fn estimate(&self) -> Estimate {
        let n = self.n as f64;
        if self.n == 0 {
            return Estimate { mean: Complex64::new(0.0, 0.0), stderr: f64::INFINITY, n: 0 };
        }
        let mean = Complex64::new(self.re.value() / n, self.im.value() / n);
        let var = if self.n > 1 { ((self.sq.value() - n * mean.norm_sqr()) / (n - 1.0)).max(0.0) } else { f64::INFINITY };
        Estimate { mean, stderr: (var / n).sqrt(), n: self.n }
    }
}

impl FromIterator<Complex64> for Accumulator {
    fn from_iter<I: IntoIterator<Item = Complex64>>(it: I) -> Self {
        let mut a = Accumulator::new();
        for z in it {
            a.push(z);
        }
        a
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_sum_is_order_independent() {
        let xs = [1e16, 1.0, -1e16, 3.5, 1e-3, -2.25e10, 2.25e10];
        let mut a = ExactSum::default();
        xs.iter().for_each(|&x| a.add(x));
        let mut b = ExactSum::default();
        xs.iter().rev().for_each(|&x| b.add(x));
        assert_eq!(a.value(), b.value());
        assert_eq!(a.value(), 4.501);
    }

    #[test]
    fn merge_matches_single_batch() {
        let zs: Vec<Complex64> = (0..1000).map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64).sqrt() * 1e-3)).collect();
        let whole: Accumulator = zs.iter().copied().collect();
        let mut left: Accumulator = zs[..313].iter().copied().collect();
        let right: Accumulator = zs[313..].iter().copied().collect();
        left.merge(&right);
        let (a, b) = (whole.estimate(), left.estimate());
        assert_eq!(a.mean, b.mean);
        assert!((a.stderr - b.stderr).abs() < 1e-12);
        assert_eq!(a.n, 1000);
    }
}
