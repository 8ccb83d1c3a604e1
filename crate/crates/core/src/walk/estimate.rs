use serde::Serialize;

/// Sample mean with its standard error `s / sqrt(n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: u64,
}

impl Estimate {
    /// Number of standard errors separating the estimate from `value`.
    /// Zero when both the deviation and the standard error vanish.
    pub fn z_score(&self, value: f64) -> f64 {
        let dev = (self.mean - value).abs();
        if dev == 0.0 {
            0.0
        } else if self.stderr == 0.0 {
            f64::INFINITY
        } else {
            dev / self.stderr
        }
    }

    pub fn within(&self, value: f64, sigmas: f64) -> bool {
        self.z_score(value) <= sigmas
    }
}

/// Exact integer accumulator for non-negative integer samples.
///
/// Sums are integers, so merging partial tallies in any order gives the same
/// result; parallel and serial runs agree bit for bit.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Tally {
    pub n: u64,
    pub sum: u128,
    pub sum_sq: u128,
}

impl Tally {
    #[inline]
    pub fn push(&mut self, x: u64) {
        self.n += 1;
        self.sum += x as u128;
        self.sum_sq += (x as u128) * (x as u128);
    }

    pub fn merge(mut self, other: Tally) -> Tally {
        self.n += other.n;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
        self
    }

    pub fn estimate(&self) -> Estimate {
        estimate_from_sums(self.n, self.sum, self.sum_sq)
    }
}

pub(crate) fn estimate_from_sums(n: u64, sum: u128, sum_sq: u128) -> Estimate {
    assert!(n >= 1, "an estimate needs at least one sample");
    let nf = n as f64;
    let mean = sum as f64 / nf;
    if n == 1 {
        return Estimate {
            mean,
            stderr: 0.0,
            n,
        };
    }
    // n * sum_sq - sum^2 in exact integer arithmetic when it fits
    let var = match (n as u128).checked_mul(sum_sq).zip(sum.checked_mul(sum)) {
        Some((a, b)) => (a - b) as f64 / (nf * (nf - 1.0)),
        None => ((sum_sq as f64) - (sum as f64) * mean) / (nf - 1.0),
    };
    Estimate {
        mean,
        stderr: (var.max(0.0) / nf).sqrt(),
        n,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_textbook_formula() {
        let xs = [3u64, 7, 7, 19, 0, 4];
        let mut t = Tally::default();
        xs.iter().for_each(|&x| t.push(x));
        let e = t.estimate();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<u64>() as f64 / n;
        let var = xs.iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((e.mean - mean).abs() < 1e-12);
        assert!((e.stderr - (var / n).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn merge_is_order_free() {
        let mut a = Tally::default();
        let mut b = Tally::default();
        (0..50).for_each(|x| a.push(x));
        (50..80).for_each(|x| b.push(x * 3));
        assert_eq!(a.merge(b), b.merge(a));
    }

    #[test]
    fn constant_samples_have_zero_error() {
        let mut t = Tally::default();
        (0..10).for_each(|_| t.push(1));
        let e = t.estimate();
        assert_eq!(e.stderr, 0.0);
        assert!(e.within(1.0, 0.0));
    }
}
