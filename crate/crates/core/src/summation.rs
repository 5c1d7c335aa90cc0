//! Compensated summation and blocked, order-fixed parallel reduction.

use std::ops::Range;

use rayon::prelude::*;

/// Paths per reduction block. Block boundaries, and therefore the floating
/// point summation order, depend only on the path count.
pub const BLOCK_PATHS: u64 = 4096;

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    /// Folds another partial sum into this one.
    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.add(other.compensation);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// Splits `0..n_paths` into [`BLOCK_PATHS`]-sized ranges, evaluates `f` on
/// each in parallel and returns the results in block order.
pub fn map_blocks<T, F>(n_paths: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(Range<u64>) -> T + Sync,
{
    let blocks = n_paths.div_ceil(BLOCK_PATHS);
    (0..blocks)
        .into_par_iter()
        .map(|b| {
            let start = b * BLOCK_PATHS;
            f(start..(start + BLOCK_PATHS).min(n_paths))
        })
        .collect()
}
