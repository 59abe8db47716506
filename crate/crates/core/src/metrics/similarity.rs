use serde::{Deserialize, Serialize};

use crate::data::{Cell, ColumnKind, Table};
use crate::error::{Error, Result};

/// Jensen-Shannon divergence (base 2) between two count vectors. The
/// shorter vector is zero-filled.
pub fn jsd(p_counts: &[f64], q_counts: &[f64]) -> Result<f64> {
    let k = p_counts.len().max(q_counts.len());
    let sp: f64 = p_counts.iter().sum();
    let sq: f64 = q_counts.iter().sum();
    if k == 0 || sp <= 0.0 || sq <= 0.0 {
        return Err(Error::EmptyDistribution);
    }
    let at = |v: &[f64], i: usize, s: f64| v.get(i).copied().unwrap_or(0.0) / s;
    let mut total = 0.0;
    for i in 0..k {
        let p = at(p_counts, i, sp);
        let q = at(q_counts, i, sq);
        let m = 0.5 * (p + q);
        if p > 0.0 {
            total += 0.5 * p * (p / m).log2();
        }
        if q > 0.0 {
            total += 0.5 * q * (q / m).log2();
        }
    }
    Ok(total.clamp(0.0, 1.0))
}

/// Empirical 1-Wasserstein distance, the area between the two CDFs. With
/// `normalize`, both samples are first min-max scaled by the range of `x`.
pub fn wasserstein_1d(x: &[f64], y: &[f64], normalize: bool) -> Result<f64> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::EmptyInput);
    }
    let (lo, hi) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    let scale = if normalize && hi > lo { hi - lo } else { 1.0 };
    let shift = if normalize { lo } else { 0.0 };
    let prep = |v: &[f64]| {
        let mut s: Vec<f64> = v.iter().map(|&a| (a - shift) / scale).collect();
        s.sort_by(f64::total_cmp);
        s
    };
    let (a, b) = (prep(x), prep(y));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut prev = a[0].min(b[0]);
    let mut area = 0.0;
    while i < a.len() || j < b.len() {
        let next = match (a.get(i), b.get(j)) {
            (Some(&u), Some(&v)) => u.min(v),
            (Some(&u), None) => u,
            (None, Some(&v)) => v,
            (None, None) => unreachable!(),
        };
        area += (i as f64 / na - j as f64 / nb).abs() * (next - prev);
        while i < a.len() && a[i] == next {
            i += 1;
        }
        while j < b.len() && b[j] == next {
            j += 1;
        }
        prev = next;
    }
    Ok(area)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSimilarity {
    pub column: String,
    /// `"jsd"` or `"wd"`.
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityReport {
    pub columns: Vec<ColumnSimilarity>,
    pub avg_jsd: f64,
    pub avg_wd: f64,
    pub diff_corr: f64,
    pub normalized: bool,
}

/// Category counts including a trailing missing bucket.
pub fn category_counts(t: &Table, j: usize) -> Vec<f64> {
    let n = t.schema().columns[j].categorical_values.len();
    let mut c = vec![0.0; n + 1];
    for cell in t.column(j) {
        match cell {
            Cell::Cat(k) => c[k] += 1.0,
            _ => c[n] += 1.0,
        }
    }
    c
}

/// Per-column JSD (categorical) and Wasserstein distance (continuous and
/// mixed, missing cells skipped), their averages, and the association
/// difference.
pub fn similarity_report(real: &Table, synth: &Table, normalize: bool) -> Result<SimilarityReport> {
    if !real.schema().compatible_with(synth.schema()) {
        return Err(Error::SchemaMismatch("real and synthetic tables differ".into()));
    }
    let mut columns = Vec::new();
    let (mut js, mut ws) = (Vec::new(), Vec::new());
    for (j, spec) in real.schema().columns.iter().enumerate() {
        match spec.kind {
            ColumnKind::Categorical => {
                let v = jsd(&category_counts(real, j), &category_counts(synth, j))?;
                js.push(v);
                columns.push(ColumnSimilarity {
                    column: spec.name.clone(),
                    metric: "jsd".into(),
                    value: v,
                });
            }
            ColumnKind::Continuous | ColumnKind::Mixed => {
                let v = wasserstein_1d(&real.numeric_values(j), &synth.numeric_values(j), normalize)?;
                ws.push(v);
                columns.push(ColumnSimilarity {
                    column: spec.name.clone(),
                    metric: "wd".into(),
                    value: v,
                });
            }
        }
    }
    let mean = |v: &[f64]| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
    Ok(SimilarityReport {
        columns,
        avg_jsd: mean(&js),
        avg_wd: mean(&ws),
        diff_corr: super::diff_corr(real, synth)?,
        normalized: normalize,
    })
}
