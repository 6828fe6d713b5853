//! Medcouple: the median of a pairwise skewness kernel over all pairs of
//! points straddling the sample median.
//!
//! For `x_i <= m <= x_j` with `x_i < x_j` the kernel is
//! `h = ((x_j - m) - (m - x_i)) / (x_j - x_i)`. Pairs where both points
//! equal the median use the sign kernel over their positions inside the tied
//! block, so heavily quantized data still has a well-defined value.
//!
//! The kernel matrix (upper half sorted decreasing by row, lower half sorted
//! decreasing by column) is monotone in both directions, which lets the
//! selection run in `O(n log n)` without materializing the `n^2 / 4` pairs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::debug_assert_finite;
use super::summary::{midpoint, sorted_median};

/// Bands larger than this pick pivots from a random sample of entries.
const SAMPLE_ABOVE: usize = 1 << 24;
const PIVOT_SAMPLE: usize = 1 << 16;
/// Half-width of the sampled bracket, in standard deviations of the
/// sample rank.
const PIVOT_SPREAD: f64 = 3.0;
/// Fixed so the selection path is reproducible; the result never depends
/// on it.
const PIVOT_SAMPLE_SEED: u64 = 0x6d63_6f75_706c_6521;
/// Bands at most this large (or `p`) are resolved by direct selection.
const GATHER_MIN: usize = 1 << 20;

/// Below this many points the medcouple is reported as a degenerate zero.
pub const MEDCOUPLE_MIN_LEN: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Medcouple {
    /// Robust skewness in `[-1, 1]`.
    pub value: f64,
    /// Too few points to estimate skewness; `value` is 0.
    pub degenerate: bool,
}

pub fn medcouple(values: &[f64]) -> Medcouple {
    debug_assert_finite(values);
    let n = values.len();
    if n < MEDCOUPLE_MIN_LEN {
        return Medcouple {
            value: 0.0,
            degenerate: true,
        };
    }

    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    medcouple_sorted(&sorted)
}

/// [`medcouple`] over values sorted ascending.
pub fn medcouple_sorted(sorted: &[f64]) -> Medcouple {
    debug_assert_finite(sorted);
    debug_assert!(sorted.windows(2).all(|w| w[0] <= w[1]), "input not sorted");
    if sorted.len() < MEDCOUPLE_MIN_LEN {
        return Medcouple {
            value: 0.0,
            degenerate: true,
        };
    }
    let med = sorted_median(sorted);

    // Upper half: x >= m, decreasing, zeros (ties) last.
    // Lower half: x <= m, decreasing, zeros (ties) first.
    let first_upper = sorted.partition_point(|&x| x < med);
    let upper: Vec<f64> = sorted[first_upper..]
        .iter()
        .rev()
        .map(|&x| x - med)
        .collect();
    let past_lower = sorted.partition_point(|&x| x <= med);
    let lower: Vec<f64> = sorted[..past_lower]
        .iter()
        .rev()
        .map(|&x| x - med)
        .collect();

    let kernel = KernelMatrix {
        upper: &upper,
        lower: &lower,
    };
    let total = upper.len() * lower.len();
    let value = if total % 2 == 1 {
        kernel.kth_largest(total / 2)
    } else {
        let hi = kernel.kth_largest(total / 2 - 1);
        let lo = kernel.next_below(hi, total / 2);
        midpoint(lo, hi)
    };

    Medcouple {
        value: value.clamp(-1.0, 1.0),
        degenerate: false,
    }
}

struct KernelMatrix<'a> {
    /// `x - m` for `x >= m`, decreasing.
    upper: &'a [f64],
    /// `x - m` for `x <= m`, decreasing.
    lower: &'a [f64],
}

impl KernelMatrix<'_> {
    /// Entry `(i, j)`; non-increasing in both `i` and `j`.
    #[inline]
    fn h(&self, i: usize, j: usize) -> f64 {
        let a = self.upper[i];
        let b = self.lower[j];
        if a == 0.0 && b == 0.0 {
            // both at the median: sign kernel over the tied block
            let p = self.upper.len() as isize;
            match (p - 1 - i as isize - j as isize).signum() {
                1 => 1.0,
                -1 => -1.0,
                _ => 0.0,
            }
        } else {
            (a + b) / (a - b)
        }
    }

    /// Entry of rank `rank`, given that `value` is the entry of rank `rank - 1`.
    fn next_below(&self, value: f64, rank: usize) -> f64 {
        let (p, q) = (self.upper.len(), self.lower.len());
        let mut at_or_above = 0;
        let mut below = f64::NEG_INFINITY;
        let mut j = q;
        for i in 0..p {
            while j > 0 && self.h(i, j - 1) < value {
                j -= 1;
            }
            at_or_above += j;
            if j < q {
                below = below.max(self.h(i, j));
            }
        }
        if at_or_above > rank {
            value
        } else {
            below
        }
    }

    /// The entry of rank `rank` (0 = largest) among all `p * q` entries.
    fn kth_largest(&self, rank: usize) -> f64 {
        let p = self.upper.len();
        let q = self.lower.len();
        debug_assert!(rank < p * q);

        let mut band = Band {
            left: vec![0; p],
            right: vec![q; p],
            left_total: 0,
            right_total: p * q,
            above: vec![0; p],
            at_or_above: vec![0; p],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(PIVOT_SAMPLE_SEED);
        let mut row_medians: Vec<(f64, usize)> = Vec::with_capacity(p);
        let gather_at = p.max(GATHER_MIN);

        while band.size() > gather_at {
            let before = band.size();
            if before > SAMPLE_ABOVE {
                let (hi, lo) = self.sampled_pivots(&band, rank, &mut rng);
                if let Some(v) = self.narrow(&mut band, rank, hi, lo) {
                    return v;
                }
            }
            if band.size() * 2 > before {
                // sampling did not pay off; the weighted median of row
                // medians always discards at least a quarter
                row_medians.clear();
                for i in 0..p {
                    let (l, r) = (band.left[i], band.right[i]);
                    if l < r {
                        row_medians.push((self.h(i, l + (r - l - 1) / 2), r - l));
                    }
                }
                let pivot = weighted_median(&mut row_medians);
                if let Some(v) = self.narrow(&mut band, rank, pivot, pivot) {
                    return v;
                }
            }
        }

        let mut rest = Vec::with_capacity(band.size());
        for i in 0..p {
            rest.extend((band.left[i]..band.right[i]).map(|j| self.h(i, j)));
        }
        let idx = rank - band.left_total;
        let (_, nth, _) = rest.select_nth_unstable_by(idx, |a, b| b.total_cmp(a));
        *nth
    }

    /// Two candidate values expected to bracket the target rank, drawn from
    /// a uniform sample of the band.
    fn sampled_pivots(&self, band: &Band, rank: usize, rng: &mut ChaCha8Rng) -> (f64, f64) {
        let size = band.size() as u64;
        let mut draws: Vec<u64> = (0..PIVOT_SAMPLE)
            .map(|_| rng.random_range(0..size))
            .collect();
        draws.sort_unstable();
        let mut sample = Vec::with_capacity(PIVOT_SAMPLE);
        let mut row_start = 0u64;
        let mut d = 0;
        for i in 0..band.left.len() {
            let width = (band.right[i] - band.left[i]) as u64;
            while d < draws.len() && draws[d] < row_start + width {
                sample.push(self.h(i, band.left[i] + (draws[d] - row_start) as usize));
                d += 1;
            }
            row_start += width;
        }
        sample.sort_unstable_by(|a, b| b.total_cmp(a));
        let s = sample.len() as f64;
        let center = (rank - band.left_total) as f64 / size as f64 * s;
        let spread = PIVOT_SPREAD * s.sqrt();
        let hi = ((center - spread).max(0.0) as usize).min(sample.len() - 1);
        let lo = ((center + spread) as usize).min(sample.len() - 1);
        (sample[hi], sample[lo])
    }

    /// Shrinks the band to the side of `[lo, hi]` holding `rank`. Both pivots
    /// must be values inside the band. Returns the answer once every
    /// remaining candidate equals it.
    fn narrow(&self, band: &mut Band, rank: usize, hi: f64, lo: f64) -> Option<f64> {
        let q = self.lower.len();
        let p = self.upper.len();
        // Entries left of left[i] exceed every candidate and entries from
        // right[i] on fall below them, so both scans stay in the band.
        // above[i]: entries in row i strictly greater than hi
        let mut j = 0;
        let mut n_above = 0;
        for i in (0..p).rev() {
            j = j.max(band.left[i]);
            while j < band.right[i] && self.h(i, j) > hi {
                j += 1;
            }
            band.above[i] = j;
            n_above += j;
        }
        if rank < n_above {
            std::mem::swap(&mut band.right, &mut band.above);
            band.right_total = n_above;
            return None;
        }
        // at_or_above[i]: entries in row i that are >= lo
        let mut j = q;
        let mut n_at_or_above = 0;
        for i in 0..p {
            j = j.min(band.right[i]);
            while j > band.left[i] && self.h(i, j - 1) < lo {
                j -= 1;
            }
            band.at_or_above[i] = j;
            n_at_or_above += j;
        }
        if rank >= n_at_or_above {
            std::mem::swap(&mut band.left, &mut band.at_or_above);
            band.left_total = n_at_or_above;
            return None;
        }
        std::mem::swap(&mut band.left, &mut band.above);
        std::mem::swap(&mut band.right, &mut band.at_or_above);
        band.left_total = n_above;
        band.right_total = n_at_or_above;
        (hi == lo).then_some(hi)
    }
}

/// Candidate region of the kernel matrix: columns `left[i]..right[i]` of
/// each row `i`.
struct Band {
    left: Vec<usize>,
    right: Vec<usize>,
    left_total: usize,
    right_total: usize,
    above: Vec<usize>,
    at_or_above: Vec<usize>,
}

impl Band {
    fn size(&self) -> usize {
        self.right_total - self.left_total
    }
}

/// Lower weighted median of `(value, weight)` pairs. Reorders the input.
fn weighted_median(items: &mut [(f64, usize)]) -> f64 {
    let total: usize = items.iter().map(|&(_, w)| w).sum();
    let (mut lo, mut hi) = (0, items.len());
    // weight of everything left of `lo` in sorted order
    let mut before = 0;
    while lo < hi {
        let part = &mut items[lo..hi];
        let k = part.len() / 2;
        part.select_nth_unstable_by(k, |a, b| a.0.total_cmp(&b.0));
        let left: usize = part[..k].iter().map(|&(_, w)| w).sum();
        let through = before + left + part[k].1;
        if 2 * through < total {
            before = through;
            lo += k + 1;
        } else if k > 0 && 2 * (before + left) >= total {
            hi = lo + k;
        } else {
            return part[k].0;
        }
    }
    items.last().map(|&(v, _)| v).unwrap_or(0.0)
}

/// Quadratic-time evaluation over every kernel pair. Reference for
/// verifying [`medcouple`]; use that for real data.
pub fn medcouple_naive(values: &[f64]) -> Medcouple {
    if values.len() < MEDCOUPLE_MIN_LEN {
        return Medcouple {
            value: 0.0,
            degenerate: true,
        };
    }
    let mut xs = values.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    let m = if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    };
    let ties = xs.iter().filter(|&&x| x == m).count();
    let lower: Vec<f64> = xs.iter().copied().filter(|&x| x < m).collect();
    let upper: Vec<f64> = xs.iter().copied().filter(|&x| x > m).collect();
    let mut h = Vec::new();
    for &xi in &lower {
        for &xj in &upper {
            h.push(((xj - m) - (m - xi)) / (xj - xi));
        }
        // x_j tied at the median
        h.extend(std::iter::repeat_n(-1.0, ties));
    }
    for _ in 0..ties {
        h.extend(std::iter::repeat_n(1.0, upper.len()));
    }
    for i in 1..=ties {
        for j in 1..=ties {
            let s = i + j - 1;
            h.push(if s < ties {
                -1.0
            } else if s == ties {
                0.0
            } else {
                1.0
            });
        }
    }
    h.sort_by(f64::total_cmp);
    let k = h.len();
    let value = if k % 2 == 1 {
        h[k / 2]
    } else {
        (h[k / 2 - 1] + h[k / 2]) / 2.0
    };
    Medcouple {
        value,
        degenerate: false,
    }
}
