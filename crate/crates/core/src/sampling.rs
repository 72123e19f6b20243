//! Deterministic low-discrepancy sample points for property checks.

use crate::point::Point;

const PRIMES: [u32; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

/// Radical inverse of `index` in `base`.
pub fn radical_inverse(mut index: u64, base: u32) -> f64 {
    let b = base as u64;
    let inv = 1.0 / base as f64;
    let mut scale = inv;
    let mut out = 0.0;
    while index > 0 {
        out += (index % b) as f64 * scale;
        index /= b;
        scale *= inv;
    }
    out
}

/// The first `n` Halton points in `[lo, hi]^dim` (index 0 skipped).
///
/// # Panics
/// If `dim` is zero or larger than 8.
pub fn halton_points(dim: usize, n: usize, lo: f64, hi: f64) -> Vec<Point> {
    assert!(
        (1..=PRIMES.len()).contains(&dim),
        "halton_points supports 1..=8 dimensions"
    );
    (1..=n as u64)
        .map(|i| {
            Point(
                (0..dim)
                    .map(|j| lo + (hi - lo) * radical_inverse(i, PRIMES[j]))
                    .collect(),
            )
        })
        .collect()
}
