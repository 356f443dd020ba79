//! Adjusted mutual information and the two evaluation protocols: total AMI
//! over full assignment histories and long-term AMI over static partitions.
//!
//! Unassigned (noise) points are given fresh unique labels before scoring so
//! they are never counted as one spurious cluster.
//!
//! All sums run over canonically sorted term lists, so scores are bitwise
//! invariant under label permutations of either argument.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::types::{AssignmentHistory, Partition, UNASSIGNED};

/// Joint label counts of two labelings over the same points, with marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct ContingencyTable {
    counts: ndarray::Array2<usize>,
    row_sums: Vec<usize>,
    col_sums: Vec<usize>,
    n: usize,
}

impl ContingencyTable {
    pub fn from_labels(a: &[i64], b: &[i64]) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::LengthMismatch {
                left: a.len(),
                right: b.len(),
            });
        }
        if a.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut a_index: HashMap<i64, usize> = HashMap::new();
        let mut b_index: HashMap<i64, usize> = HashMap::new();
        for &l in a {
            let next = a_index.len();
            a_index.entry(l).or_insert(next);
        }
        for &l in b {
            let next = b_index.len();
            b_index.entry(l).or_insert(next);
        }
        let (r, s) = (a_index.len(), b_index.len());
        let mut counts = ndarray::Array2::zeros((r, s));
        for (&la, &lb) in a.iter().zip(b.iter()) {
            counts[[a_index[&la], b_index[&lb]]] += 1;
        }
        let row_sums = counts
            .rows()
            .into_iter()
            .map(|row| row.sum())
            .collect::<Vec<usize>>();
        let col_sums = counts
            .columns()
            .into_iter()
            .map(|col| col.sum())
            .collect::<Vec<usize>>();
        Ok(Self {
            counts,
            row_sums,
            col_sums,
            n: a.len(),
        })
    }

    pub fn counts(&self) -> &ndarray::Array2<usize> {
        &self.counts
    }

    pub fn row_sums(&self) -> &[usize] {
        &self.row_sums
    }

    pub fn col_sums(&self) -> &[usize] {
        &self.col_sums
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

/// Sum a term list in a canonical order, so the result does not depend on
/// the order terms were produced in.
fn stable_sum(mut terms: Vec<f64>) -> f64 {
    terms.sort_by(f64::total_cmp);
    terms.iter().sum()
}

fn entropy(marginals: &[usize], n: usize) -> f64 {
    let n = n as f64;
    let terms = marginals
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| (c as f64 / n) * (n / c as f64).ln())
        .collect();
    stable_sum(terms)
}

fn mutual_information(table: &ContingencyTable) -> f64 {
    let n = table.n as f64;
    let mut terms = Vec::new();
    for (idx, &nij) in table.counts.indexed_iter() {
        if nij == 0 {
            continue;
        }
        let a = table.row_sums[idx.0] as f64;
        let b = table.col_sums[idx.1] as f64;
        let nij = nij as f64;
        terms.push((nij / n) * ((nij * n) / (a * b)).ln());
    }
    stable_sum(terms)
}

fn log_factorial_table(n: usize) -> Vec<f64> {
    let mut table = vec![0.0; n + 1];
    for i in 2..=n {
        table[i] = table[i - 1] + (i as f64).ln();
    }
    table
}

/// Expected mutual information of two labelings with the given marginals
/// under the hypergeometric (random permutation) model. Computed in log
/// space with a log-factorial table so large counts do not overflow.
pub fn expected_mutual_information(table: &ContingencyTable) -> f64 {
    let n = table.n;
    let nf = n as f64;
    let lf = log_factorial_table(n);
    let mut pair_terms = Vec::new();
    for &a in &table.row_sums {
        for &b in &table.col_sums {
            if a == 0 || b == 0 {
                continue;
            }
            let lo = (a + b).saturating_sub(n).max(1);
            let hi = a.min(b);
            let mut pair = 0.0;
            for nij in lo..=hi {
                let log_term = ((nf * nij as f64) / (a as f64 * b as f64)).ln();
                let log_prob = (lf[a] + lf[b]) + (lf[n - a] + lf[n - b])
                    - lf[n]
                    - lf[nij]
                    - (lf[a - nij] + lf[b - nij])
                    - lf[n + nij - a - b];
                pair += (nij as f64 / nf) * log_term * log_prob.exp();
            }
            pair_terms.push(pair);
        }
    }
    stable_sum(pair_terms)
}

/// Adjusted mutual information with arithmetic-mean entropy normalization:
///
/// ```text
/// AMI = (MI - E[MI]) / (mean(H(a), H(b)) - E[MI])
/// ```
///
/// Identical labelings (up to permutation) score exactly 1.0; two constant
/// labelings have a zero denominator and score 0 by convention.
pub fn ami(labels_a: &[i64], labels_b: &[i64]) -> Result<f64> {
    let table = ContingencyTable::from_labels(labels_a, labels_b)?;
    let mi = mutual_information(&table);
    let emi = expected_mutual_information(&table);
    let h_a = entropy(&table.row_sums, table.n);
    let h_b = entropy(&table.col_sums, table.n);
    let denominator = 0.5 * (h_a + h_b) - emi;
    if denominator == 0.0 {
        return Ok(0.0);
    }
    Ok((mi - emi) / denominator)
}

/// Replace every [`UNASSIGNED`] sentinel with a fresh label unused anywhere
/// else; non-sentinel labels pass through unchanged.
pub fn relabel_unassigned_unique(labels: &[i64]) -> Vec<i64> {
    let mut next = labels
        .iter()
        .filter(|&&l| l != UNASSIGNED)
        .max()
        .map_or(0, |&m| m + 1);
    labels
        .iter()
        .map(|&l| {
            if l == UNASSIGNED {
                let fresh = next;
                next += 1;
                fresh
            } else {
                l
            }
        })
        .collect()
}

/// Total AMI: flatten the assignment history to a length `T*N` vector, tile
/// the static ground truth `T` times, give unassigned points unique labels,
/// and score the pair.
pub fn total_ami(assignments: &AssignmentHistory, ground_truth: &Partition) -> Result<f64> {
    let (t_len, n) = assignments.labels().dim();
    if ground_truth.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "ground truth covers {} points, assignments have {n}",
            ground_truth.len()
        )));
    }
    let mut flat = Vec::with_capacity(t_len * n);
    let mut tiled = Vec::with_capacity(t_len * n);
    for t in 0..t_len {
        for i in 0..n {
            flat.push(assignments.labels()[[t, i]] as i64);
            tiled.push(ground_truth.labels()[i]);
        }
    }
    ami(
        &relabel_unassigned_unique(&flat),
        &relabel_unassigned_unique(&tiled),
    )
}

/// Long-term AMI: score two static partitions after giving unassigned
/// points unique labels.
pub fn long_term_ami(predicted: &Partition, ground_truth: &Partition) -> Result<f64> {
    if predicted.len() != ground_truth.len() {
        return Err(Error::ShapeMismatch(format!(
            "partitions cover {} and {} points",
            predicted.len(),
            ground_truth.len()
        )));
    }
    ami(
        &relabel_unassigned_unique(predicted.labels()),
        &relabel_unassigned_unique(ground_truth.labels()),
    )
}
