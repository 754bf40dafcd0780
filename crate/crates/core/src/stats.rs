//! Small numerical helpers: compensated accumulation and fixed-order
//! reductions. Everything here is deterministic for a given input order,
//! which is what makes results independent of worker count.

/// Neumaier-compensated accumulator. Supports the rescaling needed by the
/// streaming log-sum-exp in the enumerator.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct Comp {
    sum: f64,
    c: f64,
}

impl Comp {
    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.c += (self.sum - t) + v;
        } else {
            self.c += (v - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn scale(&mut self, f: f64) {
        self.sum *= f;
        self.c *= f;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.c
    }
}

/// Sum in a balanced pairwise tree. The bracketing depends only on the slice
/// length, never on how the values were produced.
pub(crate) fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1..=8 => {
            let mut acc = 0.0;
            for x in xs {
                acc += x;
            }
            acc
        }
        n => {
            let (a, b) = xs.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

/// Mean and standard error of the mean, both from pairwise sums.
/// A single sample has zero standard error by convention.
pub(crate) fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    assert!(n > 0, "mean of an empty sample");
    let mean = pairwise_sum(xs) / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let sq: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&sq) / (n as f64 - 1.0);
    (mean, (var / n as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comp_recovers_cancelled_terms() {
        // Each term is below half an ulp of the running sum, so naive
        // accumulation drops them all; their total is ten ulps.
        let mut naive = 1.0;
        let mut acc = Comp::default();
        acc.add(1.0);
        for _ in 0..10 {
            acc.add(1e-16);
            naive += 1e-16;
        }
        assert_eq!(naive, 1.0);
        assert!((acc.value() - (1.0 + 1e-15)).abs() < 1e-16);
    }

    #[test]
    fn pairwise_matches_naive_on_small_input() {
        let xs: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 5050.0);
    }

    #[test]
    fn mean_and_se_basics() {
        let (m, se) = mean_and_se(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((se - 1.0).abs() < 1e-15);
        let (_, se1) = mean_and_se(&[5.0]);
        assert_eq!(se1, 0.0);
    }
}
