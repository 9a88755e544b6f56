//! External clustering scores against ground-truth labels: accuracy under
//! the optimal one-to-one label matching, NMI, ARI and F1.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Counts `n_ij` of nodes in predicted cluster `i` and true class `j`.
///
/// Labels on both sides are compacted to `0..k` in ascending order of the
/// original ids, so the table never has empty rows or columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    counts: Vec<Vec<u64>>,
    row_sums: Vec<u64>,
    col_sums: Vec<u64>,
    total: u64,
}

fn compact(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut ids = BTreeMap::new();
    for &l in labels {
        ids.entry(l).or_insert(0usize);
    }
    for (k, v) in ids.values_mut().enumerate() {
        *v = k;
    }
    (labels.iter().map(|l| ids[l]).collect(), ids.len())
}

impl ContingencyTable {
    pub fn new(pred: &[usize], truth: &[usize]) -> Result<Self> {
        if pred.len() != truth.len() {
            return Err(Error::Labels(format!(
                "length mismatch: {} predicted vs {} true",
                pred.len(),
                truth.len()
            )));
        }
        if pred.is_empty() {
            return Err(Error::Labels("no labels to compare".into()));
        }
        let (p, kp) = compact(pred);
        let (t, kt) = compact(truth);
        let mut counts = vec![vec![0u64; kt]; kp];
        for (&i, &j) in p.iter().zip(&t) {
            counts[i][j] += 1;
        }
        let row_sums = counts.iter().map(|r| r.iter().sum()).collect();
        let col_sums = (0..kt).map(|j| counts.iter().map(|r| r[j]).sum()).collect();
        Ok(Self {
            counts,
            row_sums,
            col_sums,
            total: pred.len() as u64,
        })
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn row_sums(&self) -> &[u64] {
        &self.row_sums
    }

    pub fn col_sums(&self) -> &[u64] {
        &self.col_sums
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn num_pred(&self) -> usize {
        self.row_sums.len()
    }

    pub fn num_true(&self) -> usize {
        self.col_sums.len()
    }

    /// Maximum-weight matching of predicted clusters to true classes.
    /// `result[i]` is the true class matched to predicted cluster `i`, if any.
    ///
    /// Among matchings with the maximal matched count, the one with the largest
    /// summed per-pair F1 wins, so the choice does not depend on label order.
    pub fn optimal_matching(&self) -> Vec<Option<usize>> {
        let size = self.num_pred().max(self.num_true());
        // Per-pair F1 is at most 1, so the tie-break term sums below 1/2.
        let eps = 1.0 / (2.0 * size as f64 + 2.0);
        let cost: Vec<Vec<f64>> = (0..size)
            .map(|i| {
                (0..size)
                    .map(|j| match self.counts.get(i).and_then(|r| r.get(j)) {
                        Some(&c) => {
                            let pair_f1 = 2.0 * c as f64 / (self.row_sums[i] + self.col_sums[j]) as f64;
                            -(c as f64 + eps * pair_f1)
                        }
                        None => 0.0,
                    })
                    .collect()
            })
            .collect();
        let assign = hungarian_min(&cost);
        (0..self.num_pred())
            .map(|i| Some(assign[i]).filter(|&j| j < self.num_true()))
            .collect()
    }
}

/// Minimum-cost perfect assignment on a square matrix (shortest augmenting
/// paths with row/column potentials, O(n³)). Returns the column per row.
pub fn hungarian_min(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    const INF: f64 = f64::INFINITY;
    // 1-based arrays with a virtual column 0.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut min_to = vec![INF; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = INF;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < min_to[j] {
                        min_to[j] = cur;
                        way[j] = j0;
                    }
                    if min_to[j] < delta {
                        delta = min_to[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_to[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut col_of = vec![0usize; n];
    for j in 1..=n {
        col_of[row_of[j] - 1] = j - 1;
    }
    col_of
}

/// Fraction of nodes whose predicted cluster maps to their true class under
/// the best one-to-one relabeling.
pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let t = ContingencyTable::new(pred, truth)?;
    Ok(matched_count(&t) as f64 / t.total as f64)
}

fn matched_count(t: &ContingencyTable) -> u64 {
    t.optimal_matching()
        .iter()
        .enumerate()
        .filter_map(|(i, j)| j.map(|j| t.counts[i][j]))
        .sum()
}

fn entropy(sums: &[u64], total: f64) -> f64 {
    sums.iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            -p * p.ln()
        })
        .sum()
}

/// `2·MI / (H(pred) + H(truth))`. Two constant partitions score 1, one
/// constant partition against a non-constant one scores 0.
pub fn nmi(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let t = ContingencyTable::new(pred, truth)?;
    let n = t.total as f64;
    let hp = entropy(&t.row_sums, n);
    let ht = entropy(&t.col_sums, n);
    if hp == 0.0 && ht == 0.0 {
        return Ok(1.0);
    }
    if hp == 0.0 || ht == 0.0 {
        return Ok(0.0);
    }
    let mut mi = 0.0;
    for (i, row) in t.counts.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            if c > 0 {
                let c = c as f64;
                mi += c / n * (c * n / (t.row_sums[i] as f64 * t.col_sums[j] as f64)).ln();
            }
        }
    }
    Ok((2.0 * mi / (hp + ht)).clamp(0.0, 1.0))
}

fn choose2(x: u64) -> f64 {
    let x = x as f64;
    x * (x - 1.0) / 2.0
}

/// Adjusted Rand index. When the expected index equals its maximum (both
/// partitions trivial) the score is 1 for identical partitions, else 0.
pub fn ari(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let t = ContingencyTable::new(pred, truth)?;
    let index: f64 = t.counts.iter().flatten().map(|&c| choose2(c)).sum();
    let sum_rows: f64 = t.row_sums.iter().map(|&c| choose2(c)).sum();
    let sum_cols: f64 = t.col_sums.iter().map(|&c| choose2(c)).sum();
    let expected = sum_rows * sum_cols / choose2(t.total).max(f64::MIN_POSITIVE);
    let max_index = 0.5 * (sum_rows + sum_cols);
    let denom = max_index - expected;
    if denom == 0.0 {
        let identical = t.num_pred() == t.num_true()
            && t.counts.iter().all(|r| r.iter().filter(|&&c| c > 0).count() == 1);
        return Ok(if identical { 1.0 } else { 0.0 });
    }
    Ok((index - expected) / denom)
}

/// How F1 aggregates over clusters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum F1Mode {
    /// Per-class F1 under the accuracy matching, averaged over true classes.
    #[default]
    Macro,
    /// F1 over co-clustered node pairs.
    Pairwise,
}

impl fmt::Display for F1Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            F1Mode::Macro => "macro",
            F1Mode::Pairwise => "pairwise",
        })
    }
}

impl FromStr for F1Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "macro" => Ok(F1Mode::Macro),
            "pairwise" => Ok(F1Mode::Pairwise),
            other => Err(Error::Parameter(format!("unknown F1 mode `{other}`"))),
        }
    }
}

/// Macro F1 over true classes; a class with no matched cluster scores 0.
pub fn f1(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let t = ContingencyTable::new(pred, truth)?;
    let mut per_class = vec![0.0; t.num_true()];
    for (i, j) in t.optimal_matching().into_iter().enumerate() {
        let Some(j) = j else { continue };
        let hit = t.counts[i][j] as f64;
        if hit == 0.0 {
            continue;
        }
        let precision = hit / t.row_sums[i] as f64;
        let recall = hit / t.col_sums[j] as f64;
        per_class[j] = 2.0 * precision * recall / (precision + recall);
    }
    Ok(per_class.iter().sum::<f64>() / per_class.len() as f64)
}

pub fn pairwise_f1(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let t = ContingencyTable::new(pred, truth)?;
    let together: f64 = t.counts.iter().flatten().map(|&c| choose2(c)).sum();
    let pred_pairs: f64 = t.row_sums.iter().map(|&c| choose2(c)).sum();
    let true_pairs: f64 = t.col_sums.iter().map(|&c| choose2(c)).sum();
    if pred_pairs + true_pairs == 0.0 {
        return Ok(1.0);
    }
    Ok(2.0 * together / (pred_pairs + true_pairs))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scores {
    pub acc: f64,
    pub nmi: f64,
    pub ari: f64,
    pub f1: f64,
}

impl Scores {
    pub fn in_range(&self) -> bool {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        unit(self.acc) && unit(self.nmi) && unit(self.f1) && (-1.0..=1.0).contains(&self.ari)
    }
}

pub fn evaluate_all(pred: &[usize], truth: &[usize]) -> Result<Scores> {
    evaluate_all_with(pred, truth, F1Mode::Macro)
}

pub fn evaluate_all_with(pred: &[usize], truth: &[usize], mode: F1Mode) -> Result<Scores> {
    Ok(Scores {
        acc: accuracy(pred, truth)?,
        nmi: nmi(pred, truth)?,
        ari: ari(pred, truth)?,
        f1: match mode {
            F1Mode::Macro => f1(pred, truth)?,
            F1Mode::Pairwise => pairwise_f1(pred, truth)?,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const P: [usize; 4] = [0, 0, 1, 1];

    #[test]
    fn hand_examples() {
        assert_eq!(accuracy(&P, &[0, 1, 1, 1]).unwrap(), 0.75);
        assert_eq!(nmi(&P, &[0, 1, 0, 1]).unwrap(), 0.0);
        // Index 0, expected 2·2/6, max 2: (0 - 2/3) / (2 - 2/3).
        assert!((ari(&P, &[0, 1, 0, 1]).unwrap() + 0.5).abs() < 1e-15);
        assert!((f1(&P, &[0, 1, 1, 1]).unwrap() - (2.0 / 3.0 + 0.8) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn identical_partitions_score_one() {
        let l = [3, 3, 1, 7, 7, 1, 0];
        let s = evaluate_all(&l, &l).unwrap();
        assert_eq!((s.acc, s.nmi, s.ari, s.f1), (1.0, 1.0, 1.0, 1.0));
        let relabeled = [0, 0, 5, 2, 2, 5, 9];
        let s = evaluate_all(&relabeled, &l).unwrap();
        assert_eq!(s.acc, 1.0);
        assert!((s.nmi - 1.0).abs() < 1e-12);
        assert!((s.ari - 1.0).abs() < 1e-12);
        assert_eq!(s.f1, 1.0);
    }

    #[test]
    fn constant_partitions() {
        assert_eq!(nmi(&[0, 0, 0], &[1, 1, 1]).unwrap(), 1.0);
        assert_eq!(nmi(&[0, 0, 0, 0], &[0, 1, 0, 1]).unwrap(), 0.0);
        assert_eq!(ari(&[0, 0, 0], &[2, 2, 2]).unwrap(), 1.0);
        assert_eq!(ari(&[0, 1, 2], &[0, 0, 0]).unwrap(), 0.0);
        assert_eq!(ari(&[4], &[1]).unwrap(), 1.0);
    }

    #[test]
    fn length_mismatch_is_error() {
        assert!(accuracy(&[0, 1], &[0]).is_err());
        assert!(evaluate_all(&[], &[]).is_err());
    }

    #[test]
    fn unmatched_true_class_scores_zero_f1() {
        // One predicted cluster, two true classes.
        let v = f1(&[0, 0, 0, 0], &[0, 0, 0, 1]).unwrap();
        let class0 = 2.0 * 0.75 * 1.0 / 1.75;
        assert!((v - class0 / 2.0).abs() < 1e-15);
    }

    #[test]
    fn pairwise_f1_hand_value() {
        // Pred pairs {01, 23}, true pairs {12, 13, 23}: overlap 1.
        let v = pairwise_f1(&P, &[0, 1, 1, 1]).unwrap();
        assert!((v - 2.0 / 5.0).abs() < 1e-15);
    }

    #[test]
    fn hungarian_rectangular_padding() {
        let t = ContingencyTable::new(&[0, 0, 1, 2, 2, 2], &[1, 1, 0, 0, 0, 0]).unwrap();
        let m = t.optimal_matching();
        assert_eq!(m, vec![Some(1), None, Some(0)]);
    }

    fn brute_force_acc(pred: &[usize], truth: &[usize]) -> f64 {
        let t = ContingencyTable::new(pred, truth).unwrap();
        let k = t.num_pred().max(t.num_true());
        let mut perm: Vec<usize> = (0..k).collect();
        let mut best = 0u64;
        permute(&mut perm, 0, &mut |p| {
            let s: u64 = (0..t.num_pred())
                .filter(|&i| p[i] < t.num_true())
                .map(|i| t.counts()[i][p[i]])
                .sum();
            best = best.max(s);
        });
        best as f64 / pred.len() as f64
    }

    fn permute(v: &mut Vec<usize>, start: usize, f: &mut dyn FnMut(&[usize])) {
        if start == v.len() {
            f(v);
            return;
        }
        for i in start..v.len() {
            v.swap(start, i);
            permute(v, start + 1, f);
            v.swap(start, i);
        }
    }

    fn labels(max_k: usize) -> impl Strategy<Value = (Vec<usize>, Vec<usize>)> {
        (2usize..=30, 1..=max_k, 1..=max_k).prop_flat_map(|(n, kp, kt)| {
            (
                proptest::collection::vec(0..kp, n),
                proptest::collection::vec(0..kt, n),
            )
        })
    }

    proptest! {
        #[test]
        fn hungarian_accuracy_matches_brute_force((p, t) in labels(6)) {
            prop_assert!((accuracy(&p, &t).unwrap() - brute_force_acc(&p, &t)).abs() < 1e-15);
        }

        #[test]
        fn symmetric_and_relabel_invariant((p, t) in labels(5), shift in 1usize..50) {
            prop_assert!((ari(&p, &t).unwrap() - ari(&t, &p).unwrap()).abs() < 1e-12);
            prop_assert!((nmi(&p, &t).unwrap() - nmi(&t, &p).unwrap()).abs() < 1e-12);
            let p2: Vec<usize> = p.iter().map(|&l| (l * 7 + shift) % 97).collect();
            let t2: Vec<usize> = t.iter().map(|&l| 100 - l).collect();
            let a = evaluate_all(&p, &t).unwrap();
            let b = evaluate_all(&p2, &t2).unwrap();
            prop_assert!((a.acc - b.acc).abs() < 1e-12);
            prop_assert!((a.nmi - b.nmi).abs() < 1e-12);
            prop_assert!((a.ari - b.ari).abs() < 1e-12);
            prop_assert!((a.f1 - b.f1).abs() < 1e-12);
            prop_assert!(a.in_range());
        }

        #[test]
        fn majority_constant_prediction_beats_one_over_k((_, t) in labels(6)) {
            let k = t.iter().collect::<std::collections::BTreeSet<_>>().len();
            let acc = accuracy(&vec![0; t.len()], &t).unwrap();
            prop_assert!(acc >= 1.0 / k as f64 - 1e-15);
        }
    }
}
