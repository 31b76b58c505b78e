//! Reshaping 1-D signals into period-indexed 2-D grids and back.
//!
//! A length-T signal is reflect-padded up to a multiple of lcm(p, align) and
//! reshaped row-major to height (T+pad)/p, width p. With align = p * 64 the
//! grid height stays divisible by 64, so three stride-4 downsamplings land on
//! an integral middle resolution.

use crate::error::{Error, Result};

/// A period-p view of a 1-D signal.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodGrid {
    /// Row-major height x period matrix.
    pub grid: Vec<f64>,
    pub period: usize,
    pub height: usize,
    pub original_len: usize,
    pub pad: usize,
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

/// Index into a reflect-extended signal (no repeated edge sample), bouncing
/// as often as needed so the pad may exceed the signal length.
fn reflect_index(i: usize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let j = i % period;
    if j < n {
        j
    } else {
        period - j
    }
}

/// Reflect-pad `x` on the right up to `target` samples.
pub fn reflect_pad_to(x: &[f64], target: usize) -> Vec<f64> {
    debug_assert!(target >= x.len());
    let n = x.len();
    let mut out = Vec::with_capacity(target);
    out.extend_from_slice(x);
    for i in n..target {
        out.push(x[reflect_index(i, n)]);
    }
    out
}

/// Reshape `x` into a period-`p` grid, reflect-padding to a multiple of
/// lcm(p, align) first.
pub fn periodify(x: &[f64], p: usize, align: usize) -> Result<PeriodGrid> {
    if p == 0 {
        return Err(Error::Config("period must be >= 1".into()));
    }
    if align == 0 {
        return Err(Error::Config("align must be >= 1".into()));
    }
    if x.is_empty() {
        return Err(Error::Shape("periodify of empty signal".into()));
    }
    let block = lcm(p, align);
    let padded_len = x.len().div_ceil(block) * block;
    let pad = padded_len - x.len();
    let grid = if pad == 0 {
        x.to_vec()
    } else {
        reflect_pad_to(x, padded_len)
    };
    Ok(PeriodGrid {
        grid,
        period: p,
        height: padded_len / p,
        original_len: x.len(),
        pad,
    })
}

/// Row-major flatten then truncate to the original length.
pub fn deperiodify(g: &PeriodGrid) -> Result<Vec<f64>> {
    if g.grid.len() != g.height * g.period {
        return Err(Error::Shape(format!(
            "grid metadata inconsistent: {} elements vs {}x{}",
            g.grid.len(),
            g.height,
            g.period
        )));
    }
    if g.original_len + g.pad != g.grid.len() {
        return Err(Error::Shape("original_len + pad != grid size".into()));
    }
    Ok(g.grid[..g.original_len].to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn random_signal(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = Rng::seed_from(seed);
        (0..n).map(|_| rng.uniform_in(-1.0, 1.0)).collect()
    }

    #[test]
    fn simple_grid_no_pad() {
        let g = periodify(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], 2, 1).unwrap();
        assert_eq!(g.height, 3);
        assert_eq!(g.period, 2);
        assert_eq!(g.pad, 0);
        assert_eq!(g.grid, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn p1_is_column_identity() {
        let x = random_signal(100, 5);
        let g = periodify(&x, 1, 1).unwrap();
        assert_eq!(g.height, 100);
        assert_eq!(deperiodify(&g).unwrap(), x);
    }

    #[test]
    fn table_alignment_case() {
        // 32768 with p=7, align=448 pads by 384 to 33152 = 4736 * 7
        let x = random_signal(32768, 6);
        let g = periodify(&x, 7, 448).unwrap();
        assert_eq!(g.pad, 384);
        assert_eq!(g.height, 4736);
        assert_eq!(g.grid.len(), 33152);
    }

    #[test]
    fn roundtrip_periods_by_lengths() {
        for &p in &[1usize, 2, 3, 5, 7] {
            for &len in &[100usize, 32768, 24001] {
                let x = random_signal(len, p as u64 * 1000 + len as u64);
                let g = periodify(&x, p, p * 64).unwrap();
                assert!(g.pad < p * 64, "pad {} for p {p} len {len}", g.pad);
                let y = deperiodify(&g).unwrap();
                assert_eq!(x, y, "roundtrip failed p={p} len={len}");
            }
        }
    }

    #[test]
    fn zero_grid_zero_signal() {
        let g = periodify(&[0.0; 12], 3, 1).unwrap();
        assert!(deperiodify(&g).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn pad_content_matches_direct_oracle() {
        // independent pad-then-reshape oracle: bounce-reflect indices
        let x = random_signal(10, 9);
        let g = periodify(&x, 7, 7).unwrap();
        assert_eq!(g.grid.len(), 14);
        let n = x.len();
        for (i, &v) in g.grid.iter().enumerate() {
            let idx = if i < n {
                i
            } else {
                // oracle: walk the reflection by hand
                let mut pos = i;
                let period = 2 * (n - 1);
                pos %= period;
                if pos >= n {
                    period - pos
                } else {
                    pos
                }
            };
            assert_eq!(v, x[idx], "at {i}");
        }
        // energy accounting: grid sum equals signal sum plus pad contribution
        let pad_sum: f64 = g.grid[n..].iter().sum();
        let sig_sum: f64 = x.iter().sum();
        let grid_sum: f64 = g.grid.iter().sum();
        assert!((grid_sum - sig_sum - pad_sum).abs() < 1e-12);
    }

    #[test]
    fn invalid_period_rejected() {
        assert!(periodify(&[1.0], 0, 1).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(128))]

            #[test]
            fn prop_roundtrip_identity(len in 1usize..5000, p in 1usize..9, seed in 0u64..1000) {
                let x = random_signal(len, seed);
                let g = periodify(&x, p, p * 64).unwrap();
                prop_assert_eq!(deperiodify(&g).unwrap(), x);
            }

            #[test]
            fn prop_height_times_period(len in 1usize..5000, p in 1usize..9) {
                let x = vec![0.5; len];
                let g = periodify(&x, p, p * 64).unwrap();
                prop_assert_eq!(g.height * g.period, g.original_len + g.pad);
                prop_assert!(g.pad < p * 64);
                prop_assert_eq!(g.height % 64, 0);
            }
        }
    }
}
