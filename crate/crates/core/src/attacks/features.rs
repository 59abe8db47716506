use serde::{Deserialize, Serialize};

use crate::data::{Cell, ColumnKind, Table};
use crate::metrics::pearson;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMode {
    Naive,
    Correlation,
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Per numeric column (mean, median, population variance); per categorical
/// column (distinct categories, most frequent index, least frequent index
/// among those present). Missing cells are skipped.
pub fn feature_extract_naive(batch: &Table) -> Vec<f64> {
    let mut out = Vec::new();
    for (j, spec) in batch.schema().columns.iter().enumerate() {
        match spec.kind {
            ColumnKind::Continuous | ColumnKind::Mixed => {
                let mut v = batch.numeric_values(j);
                if v.is_empty() {
                    out.extend([0.0, 0.0, 0.0]);
                    continue;
                }
                v.sort_by(f64::total_cmp);
                let n = v.len() as f64;
                let mean = v.iter().sum::<f64>() / n;
                let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
                out.extend([mean, median(&v), var]);
            }
            ColumnKind::Categorical => {
                let mut counts = vec![0usize; spec.categorical_values.len()];
                for c in batch.column(j) {
                    if let Cell::Cat(k) = c {
                        counts[k] += 1;
                    }
                }
                let present: Vec<(usize, usize)> = counts.iter().copied().enumerate().filter(|c| c.1 > 0).collect();
                let most = present.iter().max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0))).map_or(0, |c| c.0);
                let least = present.iter().min_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(&b.0))).map_or(0, |c| c.0);
                out.extend([present.len() as f64, most as f64, least as f64]);
            }
        }
    }
    out
}

/// Expanded columns: numeric values (missing as 0) and one dummy per
/// category.
fn expanded_columns(batch: &Table) -> Vec<Vec<f64>> {
    let mut cols = Vec::new();
    for (j, spec) in batch.schema().columns.iter().enumerate() {
        match spec.kind {
            ColumnKind::Continuous | ColumnKind::Mixed => {
                cols.push(batch.column(j).map(|c| c.as_num().unwrap_or(0.0)).collect());
            }
            ColumnKind::Categorical => {
                for k in 0..spec.categorical_values.len() {
                    cols.push(batch.column(j).map(|c| f64::from(u8::from(c.as_cat() == Some(k)))).collect());
                }
            }
        }
    }
    cols
}

/// Upper triangle of the Pearson correlation matrix over numeric and
/// dummy-encoded categorical columns; constant columns give 0.
pub fn feature_extract_corr(batch: &Table) -> Vec<f64> {
    let cols = expanded_columns(batch);
    let mut out = Vec::with_capacity(cols.len() * cols.len().saturating_sub(1) / 2);
    for a in 0..cols.len() {
        for b in a + 1..cols.len() {
            out.push(pearson(&cols[a], &cols[b]).unwrap_or(0.0));
        }
    }
    out
}

pub fn feature_extract(batch: &Table, mode: FeatureMode) -> Vec<f64> {
    match mode {
        FeatureMode::Naive => feature_extract_naive(batch),
        FeatureMode::Correlation => feature_extract_corr(batch),
    }
}
