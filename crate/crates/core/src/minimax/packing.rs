//! Randomized greedy packings of binary strings, certified exhaustively.

use nalgebra::DMatrix;
use rand::Rng as _;
use serde::Serialize;

use crate::error::{dim_err, Error, Result};
use crate::seed;

/// Slack when comparing achieved and target log-counts.
const LOG_SLACK: f64 = 1e-12;

/// A fixed-length binary string packed into 64-bit words.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct BitString {
    len: usize,
    words: Vec<u64>,
}

impl BitString {
    pub fn zeros(len: usize) -> Self {
        BitString {
            len,
            words: vec![0; len.div_ceil(64)],
        }
    }

    pub fn from_indices(len: usize, ones: &[usize]) -> Self {
        let mut b = Self::zeros(len);
        for &i in ones {
            b.set(i, true);
        }
        b
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit {i} out of range for length {}", self.len);
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize, v: bool) {
        assert!(i < self.len, "bit {i} out of range for length {}", self.len);
        let mask = 1u64 << (i % 64);
        if v {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    pub fn weight(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn hamming(&self, other: &BitString) -> usize {
        assert_eq!(self.len, other.len);
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum()
    }

    /// Positions of the set bits, increasing.
    pub fn ones(&self) -> Vec<usize> {
        (0..self.len).filter(|&i| self.get(i)).collect()
    }

    /// Reads the string row-major as a `rows × cols` sign matrix,
    /// `0 ↦ −1` and `1 ↦ +1`.
    pub fn sign_matrix(&self, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
        if rows * cols != self.len {
            return Err(dim_err(format!(
                "{rows}x{cols} signs need {} bits, have {}",
                rows * cols,
                self.len
            )));
        }
        Ok(DMatrix::from_fn(rows, cols, |i, j| {
            if self.get(i * cols + j) {
                1.0
            } else {
                -1.0
            }
        }))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PackingSet {
    /// String length.
    pub universe: usize,
    /// Common Hamming weight, when the packing is constant-weight.
    pub weight: Option<usize>,
    pub min_distance: usize,
    pub members: Vec<BitString>,
    pub certified: bool,
}

impl PackingSet {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn log_count(&self) -> f64 {
        (self.members.len() as f64).ln()
    }

    /// Exhaustive check of lengths, weights and pairwise distances.
    pub fn verify(&self) -> Result<()> {
        for (i, a) in self.members.iter().enumerate() {
            if a.len() != self.universe {
                return Err(Error::Hypothesis(format!("member {i} has length {}", a.len())));
            }
            if let Some(w) = self.weight {
                if a.weight() != w {
                    return Err(Error::Hypothesis(format!(
                        "member {i} has weight {} != {w}",
                        a.weight()
                    )));
                }
            }
            for (j, b) in self.members.iter().enumerate().skip(i + 1) {
                let d = a.hamming(b);
                if d < self.min_distance {
                    return Err(Error::Hypothesis(format!(
                        "members {i} and {j} are {d} apart, need {}",
                        self.min_distance
                    )));
                }
            }
        }
        Ok(())
    }
}

/// `ln C(n, d)`
pub fn log_binomial(n: usize, d: usize) -> f64 {
    if d > n {
        return f64::NEG_INFINITY;
    }
    let d = d.min(n - d);
    (0..d).map(|i| ((n - i) as f64).ln() - ((i + 1) as f64).ln()).sum()
}

/// Smallest count `M ≥ 1` with `ln M ≥ target`.
fn target_count(target_log: f64) -> usize {
    let mut m = target_log.exp().floor().max(1.0) as usize;
    while (m as f64).ln() < target_log - LOG_SLACK {
        m += 1;
    }
    m
}

#[allow(clippy::too_many_arguments)]
fn greedy(
    universe: usize,
    weight: Option<usize>,
    min_distance: usize,
    target_log: f64,
    seed: u64,
    retry_budget: Option<usize>,
    capacity_log: f64,
    mut draw: impl FnMut(&mut seed::Rng) -> BitString,
) -> Result<PackingSet> {
    if !target_log.is_finite() {
        return Err(Error::Domain(format!(
            "target log-count must be finite, got {target_log}"
        )));
    }
    let want = target_count(target_log);
    let capacity = |achieved: usize| Error::Capacity {
        achieved,
        achieved_log: if achieved == 0 {
            f64::NEG_INFINITY
        } else {
            (achieved as f64).ln()
        },
        target_log,
    };
    if target_log > capacity_log + LOG_SLACK {
        return Err(capacity(0));
    }
    let budget = retry_budget.unwrap_or(200 * want);
    let mut rng = seed::stream(seed, "packing", 0);
    let mut members: Vec<BitString> = Vec::with_capacity(want);
    let mut draws = 0;
    while members.len() < want {
        if draws == budget {
            return Err(capacity(members.len()));
        }
        draws += 1;
        let cand = draw(&mut rng);
        if members.iter().all(|m| m.hamming(&cand) >= min_distance && *m != cand) {
            members.push(cand);
        }
    }
    let mut set = PackingSet {
        universe,
        weight,
        min_distance,
        members,
        certified: false,
    };
    set.verify()?;
    set.certified = true;
    Ok(set)
}

/// Constant-weight packing: `weight`-subsets of `[universe]` pairwise at
/// Hamming distance at least `min_distance`, grown until
/// `ln |members| ≥ target_log`. Draws are uniform; a candidate is kept
/// when it clears every kept member.
///
/// `retry_budget` (default `200 ×` the target count) caps candidate draws.
pub fn greedy_packing(
    universe: usize,
    weight: usize,
    min_distance: usize,
    target_log: f64,
    seed: u64,
    retry_budget: Option<usize>,
) -> Result<PackingSet> {
    if weight > universe {
        return Err(dim_err(format!("weight {weight} exceeds universe {universe}")));
    }
    if min_distance > 2 * weight {
        return Err(Error::Domain(format!(
            "min distance {min_distance} exceeds 2 x weight {weight}"
        )));
    }
    greedy(
        universe,
        Some(weight),
        min_distance,
        target_log,
        seed,
        retry_budget,
        log_binomial(universe, weight),
        |rng| {
            let idx = rand::seq::index::sample(rng, universe, weight).into_vec();
            BitString::from_indices(universe, &idx)
        },
    )
}

/// Support packing over `[p1]`: weight `k`, distance `⌈k/4⌉`, log-count
/// at least `(4/25) k ln(p1/k)`.
pub fn build_support_packing(p1: usize, k: usize, seed: u64) -> Result<PackingSet> {
    if k < 1 || 2 * k > p1 {
        return Err(dim_err(format!(
            "support packing needs 1 <= k <= p1/2, got k={k}, p1={p1}"
        )));
    }
    let target = 4.0 / 25.0 * k as f64 * (p1 as f64 / k as f64).ln();
    greedy_packing(p1, k, k.div_ceil(4), target, seed, None)
}

/// Packing of `rows × cols` sign matrices as bit strings: distance
/// `⌈min_fraction · rows · cols⌉`, log-count at least
/// `target_rate · rows · cols`.
pub fn build_sign_packing(
    rows: usize,
    cols: usize,
    min_fraction: f64,
    target_rate: f64,
    seed: u64,
) -> Result<PackingSet> {
    let len = rows * cols;
    if len == 0 {
        return Err(dim_err("sign matrices must be nonempty"));
    }
    if !(0.0..=1.0).contains(&min_fraction) || !(target_rate >= 0.0) {
        return Err(Error::Domain(format!(
            "need 0 <= min_fraction <= 1 and target_rate >= 0, got {min_fraction}, {target_rate}"
        )));
    }
    let min_distance = (min_fraction * len as f64 - 1e-9).ceil().max(0.0) as usize;
    greedy(
        len,
        None,
        min_distance,
        target_rate * len as f64,
        seed,
        None,
        len as f64 * std::f64::consts::LN_2,
        |rng| {
            let mut b = BitString::zeros(len);
            for i in 0..len {
                b.set(i, rng.random::<bool>());
            }
            b
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent re-check that does not use `BitString::hamming`.
    fn recheck(set: &PackingSet) {
        let bits: Vec<Vec<bool>> = set
            .members
            .iter()
            .map(|m| (0..m.len()).map(|i| m.get(i)).collect())
            .collect();
        for (i, a) in bits.iter().enumerate() {
            if let Some(w) = set.weight {
                assert_eq!(a.iter().filter(|&&b| b).count(), w);
            }
            for b in &bits[i + 1..] {
                let d = a.iter().zip(b).filter(|(x, y)| x != y).count();
                assert!(d >= set.min_distance);
            }
        }
    }

    #[test]
    fn bitstring_basics() {
        let a = BitString::from_indices(70, &[0, 5, 64, 69]);
        let b = BitString::from_indices(70, &[0, 6, 64]);
        assert_eq!(a.weight(), 4);
        assert_eq!(a.hamming(&b), 3);
        assert_eq!(a.ones(), vec![0, 5, 64, 69]);
        let s = BitString::from_indices(4, &[1, 2]).sign_matrix(2, 2).unwrap();
        assert_eq!(s, DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0]));
        assert!(a.sign_matrix(7, 7).is_err());
    }

    #[test]
    fn log_binomial_matches_small_cases() {
        assert!((log_binomial(16, 4) - 1820f64.ln()).abs() < 1e-12);
        assert_eq!(log_binomial(5, 0), 0.0);
        assert_eq!(log_binomial(3, 4), f64::NEG_INFINITY);
    }

    #[test]
    fn any_distinct_subsets_at_distance_two() {
        let set = greedy_packing(16, 4, 2, 1000f64.ln(), 1, Some(1_000_000)).unwrap();
        assert_eq!(set.len(), 1000);
        assert!(set.certified);
        recheck(&set);
    }

    #[test]
    fn moderate_target_succeeds() {
        let target = 4.0 / 25.0 * 10.0 * 10f64.ln();
        assert!((target - 3.684).abs() < 1e-3);
        let set = greedy_packing(100, 10, 3, target, 2, None).unwrap();
        assert!(set.len() >= 40 && set.log_count() >= target);
        recheck(&set);
    }

    #[test]
    fn target_above_counting_bound_fails() {
        let err = greedy_packing(6, 3, 2, 20f64.ln() + 0.01, 1, None).unwrap_err();
        assert!(matches!(err, Error::Capacity { achieved: 0, .. }));
        // feasible by counting but not at this distance
        let err = greedy_packing(6, 3, 6, 3f64.ln(), 1, Some(500)).unwrap_err();
        match err {
            Error::Capacity { achieved, .. } => assert!((1..=2).contains(&achieved)),
            e => panic!("{e}"),
        }
        assert!(greedy_packing(4, 5, 1, 0.0, 1, None).is_err());
        assert!(greedy_packing(10, 2, 5, 0.0, 1, None).is_err());
    }

    #[test]
    fn support_packings() {
        let set = build_support_packing(100, 8, 3).unwrap();
        assert!(set.log_count() >= 4.0 / 25.0 * 8.0 * 12.5f64.ln());
        assert_eq!(set.min_distance, 2);
        assert!(set.certified);
        recheck(&set);
        let half = build_support_packing(20, 10, 4).unwrap();
        assert!(half.log_count() >= 4.0 / 25.0 * 10.0 * 2f64.ln());
        recheck(&half);
        assert!(build_support_packing(10, 6, 1).is_err());
    }

    #[test]
    fn sign_packings() {
        let set = build_sign_packing(2, 10, 0.125, 0.12, 5).unwrap();
        assert!(set.log_count() >= 2.4);
        assert_eq!(set.min_distance, 3);
        assert_eq!(set.weight, None);
        recheck(&set);
        let tiny = build_sign_packing(1, 1, 0.125, 0.12, 5).unwrap();
        assert_eq!(tiny.len(), 2);
        assert_eq!(tiny.members[0].hamming(&tiny.members[1]), 1);
        assert_eq!(build_sign_packing(2, 10, 0.125, 0.12, 5).unwrap(), set);
    }
}
