//! External clustering-quality indices against ground truth: Rand Index
//! and Normalized Mutual Information. Both are invariant to relabeling of
//! cluster ids on either side; natural logarithms throughout.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Cluster labels for N items, 1-based ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVector {
    labels: Vec<usize>,
}

impl LabelVector {
    pub fn new(labels: Vec<usize>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidArgument("label vector is empty".into()));
        }
        if labels.iter().any(|&l| l == 0) {
            return Err(Error::InvalidArgument("labels must be at least 1".into()));
        }
        Ok(Self { labels })
    }

    /// Convenience conversion from the 0-based labels the algorithms use.
    pub fn from_zero_based(labels: &[usize]) -> Result<Self> {
        Self::new(labels.iter().map(|&l| l + 1).collect())
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Compact 0-based ids in order of first appearance.
    fn compact(&self) -> Vec<usize> {
        let mut map = HashMap::new();
        self.labels
            .iter()
            .map(|&l| {
                let next = map.len();
                *map.entry(l).or_insert(next)
            })
            .collect()
    }
}

/// Contingency counts N_ij plus the marginals |G_i| and |A_j|.
fn contingency(truth: &LabelVector, pred: &LabelVector) -> Result<(Vec<Vec<f64>>, Vec<f64>, Vec<f64>)> {
    if truth.len() != pred.len() {
        return Err(Error::InvalidArgument(format!(
            "label vectors have lengths {} and {}",
            truth.len(),
            pred.len()
        )));
    }
    let a = truth.compact();
    let b = pred.compact();
    let ka = a.iter().max().unwrap() + 1;
    let kb = b.iter().max().unwrap() + 1;
    let mut counts = vec![vec![0.0; kb]; ka];
    for (&i, &j) in a.iter().zip(&b) {
        counts[i][j] += 1.0;
    }
    let rows: Vec<f64> = counts.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<f64> = (0..kb).map(|j| counts.iter().map(|r| r[j]).sum()).collect();
    Ok((counts, rows, cols))
}

fn choose2(x: f64) -> f64 {
    x * (x - 1.0) / 2.0
}

/// Rand Index (TP + TN) / (N(N−1)/2), computed from the contingency
/// table in O(N + K²).
pub fn rand_index(truth: &LabelVector, pred: &LabelVector) -> Result<f64> {
    let n = truth.len();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "Rand index needs at least two items".into(),
        ));
    }
    let (counts, rows, cols) = contingency(truth, pred)?;
    let pairs = choose2(n as f64);
    let tp: f64 = counts.iter().flatten().map(|&c| choose2(c)).sum();
    let same_truth: f64 = rows.iter().map(|&c| choose2(c)).sum();
    let same_pred: f64 = cols.iter().map(|&c| choose2(c)).sum();
    let tn = pairs - same_truth - same_pred + tp;
    Ok((tp + tn) / pairs)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NmiOutcome {
    pub value: f64,
    /// A single-cluster partition on either side makes the normalizer
    /// zero; the value is 0 by convention and this flag is raised.
    pub degenerate: bool,
}

/// Normalized Mutual Information with the square-root normalizer and the
/// 0·log 0 = 0 convention.
pub fn nmi_detailed(truth: &LabelVector, pred: &LabelVector) -> Result<NmiOutcome> {
    let n = truth.len() as f64;
    let (counts, rows, cols) = contingency(truth, pred)?;

    let mut numer = 0.0;
    for (i, row) in counts.iter().enumerate() {
        for (j, &nij) in row.iter().enumerate() {
            if nij > 0.0 {
                numer += nij * (n * nij / (rows[i] * cols[j])).ln();
            }
        }
    }
    let h_truth: f64 = -rows.iter().filter(|&&c| c > 0.0).map(|&c| c * (c / n).ln()).sum::<f64>();
    let h_pred: f64 = -cols.iter().filter(|&&c| c > 0.0).map(|&c| c * (c / n).ln()).sum::<f64>();
    let denom = (h_truth * h_pred).sqrt();
    if denom == 0.0 {
        return Ok(NmiOutcome {
            value: 0.0,
            degenerate: true,
        });
    }
    Ok(NmiOutcome {
        value: numer / denom,
        degenerate: false,
    })
}

pub fn nmi(truth: &LabelVector, pred: &LabelVector) -> Result<f64> {
    nmi_detailed(truth, pred).map(|o| o.value)
}
