use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::data::{Cell, ColumnKind, Table};
use crate::error::{Error, Result};

/// Pairwise association between columns. Entry `(i, j)` is Pearson's r for
/// two numeric columns, Theil's U(i | j) for two categorical columns and
/// the correlation ratio for a categorical/numeric pair. Mixed columns act
/// as numeric against numeric columns and as their categorical-point
/// indicator against categorical columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationMatrix {
    pub columns: Vec<String>,
    pub values: Vec<f64>,
    /// Pairs set to 0 because one side was constant.
    pub constant_pairs: Vec<(usize, usize)>,
}

impl AssociationMatrix {
    pub fn n(&self) -> usize {
        self.columns.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n() + j]
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(",");
        s.push_str(&self.columns.join(","));
        s.push('\n');
        for i in 0..self.n() {
            s.push_str(&self.columns[i]);
            for j in 0..self.n() {
                s.push_str(&format!(",{}", self.get(i, j)));
            }
            s.push('\n');
        }
        s
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum View {
    Numeric,
    Categorical,
}

fn numeric_view(t: &Table, j: usize) -> Vec<Option<f64>> {
    t.column(j).map(|c| c.as_num()).collect()
}

/// Category per row; mixed columns map to their categorical point, with
/// extra codes for "continuous value" and "missing".
fn categorical_view(t: &Table, j: usize) -> Vec<Option<usize>> {
    let spec = &t.schema().columns[j];
    match spec.kind {
        ColumnKind::Categorical => t.column(j).map(|c| c.as_cat()).collect(),
        _ => {
            let points = &spec.mixed_categorical_points;
            t.column(j)
                .map(|c| {
                    Some(match c {
                        Cell::Num(x) => points.iter().position(|&p| p == x).unwrap_or(points.len()),
                        _ => points.len() + 1,
                    })
                })
                .collect()
        }
    }
}

pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    if x.len() < 2 {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

fn entropy(counts: impl Iterator<Item = f64>, n: f64) -> f64 {
    counts
        .filter(|&c| c > 0.0)
        .map(|c| {
            let p = c / n;
            -p * p.ln()
        })
        .sum()
}

/// Theil's uncertainty coefficient U(x | y): the fraction of the entropy of
/// `x` explained by `y`.
pub fn theils_u(x: &[usize], y: &[usize]) -> Option<f64> {
    let n = x.len() as f64;
    let mut cx: HashMap<usize, f64> = HashMap::new();
    let mut cy: HashMap<usize, f64> = HashMap::new();
    let mut cxy: HashMap<(usize, usize), f64> = HashMap::new();
    for (&a, &b) in x.iter().zip(y) {
        *cx.entry(a).or_default() += 1.0;
        *cy.entry(b).or_default() += 1.0;
        *cxy.entry((a, b)).or_default() += 1.0;
    }
    let hx = entropy(cx.values().copied(), n);
    if hx <= 0.0 {
        return None;
    }
    let hx_given_y: f64 = cxy
        .iter()
        .map(|(&(_, b), &c)| {
            let p_xy = c / n;
            let p_y = cy[&b] / n;
            -p_xy * (p_xy / p_y).ln()
        })
        .sum();
    Some(((hx - hx_given_y) / hx).clamp(0.0, 1.0))
}

/// Correlation ratio eta of numeric `y` given categories `x`.
pub fn correlation_ratio(x: &[usize], y: &[f64]) -> Option<f64> {
    let n = y.len() as f64;
    if y.is_empty() {
        return None;
    }
    let mean = y.iter().sum::<f64>() / n;
    let total: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    if total <= 0.0 {
        return None;
    }
    let mut groups: HashMap<usize, (f64, f64)> = HashMap::new();
    for (&c, &v) in x.iter().zip(y) {
        let e = groups.entry(c).or_default();
        e.0 += v;
        e.1 += 1.0;
    }
    let between: f64 = groups
        .values()
        .map(|&(s, k)| k * (s / k - mean).powi(2))
        .sum();
    Some((between / total).sqrt().clamp(0.0, 1.0))
}

fn paired<A: Copy, B: Copy>(a: &[Option<A>], b: &[Option<B>]) -> (Vec<A>, Vec<B>) {
    a.iter()
        .zip(b)
        .filter_map(|(x, y)| Some(((*x)?, (*y)?)))
        .unzip()
}

pub fn association_matrix(t: &Table) -> Result<AssociationMatrix> {
    if t.n_rows() < 2 {
        return Err(Error::TooFewRows {
            needed: 2,
            got: t.n_rows(),
        });
    }
    let schema = t.schema();
    let n = schema.len();
    let kinds: Vec<ColumnKind> = schema.columns.iter().map(|c| c.kind).collect();
    let nums: Vec<_> = (0..n).map(|j| (kinds[j] != ColumnKind::Categorical).then(|| numeric_view(t, j))).collect();
    let cats: Vec<_> = (0..n).map(|j| (kinds[j] != ColumnKind::Continuous).then(|| categorical_view(t, j))).collect();
    let mut values = vec![0.0; n * n];
    let mut constant_pairs = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let view = |k: usize, other: usize| match kinds[k] {
                ColumnKind::Continuous => View::Numeric,
                ColumnKind::Categorical => View::Categorical,
                ColumnKind::Mixed => {
                    if kinds[other] == ColumnKind::Categorical {
                        View::Categorical
                    } else {
                        View::Numeric
                    }
                }
            };
            let v = match (view(i, j), view(j, i)) {
                (View::Numeric, View::Numeric) => {
                    let (a, b) = paired(nums[i].as_ref().unwrap(), nums[j].as_ref().unwrap());
                    pearson(&a, &b)
                }
                (View::Categorical, View::Categorical) => {
                    let (a, b) = paired(cats[i].as_ref().unwrap(), cats[j].as_ref().unwrap());
                    theils_u(&a, &b)
                }
                (View::Categorical, View::Numeric) => {
                    let (a, b) = paired(cats[i].as_ref().unwrap(), nums[j].as_ref().unwrap());
                    correlation_ratio(&a, &b)
                }
                (View::Numeric, View::Categorical) => {
                    let (b, a) = paired(cats[j].as_ref().unwrap(), nums[i].as_ref().unwrap());
                    correlation_ratio(&b, &a)
                }
            };
            match v {
                Some(v) => values[i * n + j] = v,
                None => constant_pairs.push((i, j)),
            }
        }
    }
    Ok(AssociationMatrix {
        columns: schema.columns.iter().map(|c| c.name.clone()).collect(),
        values,
        constant_pairs,
    })
}

/// Frobenius norm of the difference between the association matrices.
pub fn diff_corr(real: &Table, synth: &Table) -> Result<f64> {
    if !real.schema().compatible_with(synth.schema()) {
        return Err(Error::SchemaMismatch("real and synthetic tables differ".into()));
    }
    let a = association_matrix(real)?;
    let b = association_matrix(synth)?;
    Ok(frobenius_diff(&a, &b))
}

pub fn frobenius_diff(a: &AssociationMatrix, b: &AssociationMatrix) -> f64 {
    a.values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ColumnSpec, TableSchema};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn table(columns: Vec<ColumnSpec>, rows: Vec<Vec<Cell>>) -> Table {
        Table::new(TableSchema::new(columns).unwrap(), rows).unwrap()
    }

    #[test]
    fn linear_pair_has_unit_pearson() {
        let rows = (0..20)
            .map(|i| vec![Cell::Num(i as f64), Cell::Num(2.0 * i as f64), Cell::Cat(i % 2)])
            .collect();
        let t = table(
            vec![
                ColumnSpec::continuous("x"),
                ColumnSpec::continuous("y"),
                ColumnSpec::categorical("c", ["a", "b"]).as_target(),
            ],
            rows,
        );
        let m = association_matrix(&t).unwrap();
        assert!((m.get(0, 1) - 1.0).abs() < 1e-12);
        assert!((m.get(2, 2) - 1.0).abs() < 1e-12);
        assert_eq!(diff_corr(&t, &t).unwrap(), 0.0);
    }

    #[test]
    fn independent_categoricals_have_small_u() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x: Vec<usize> = (0..50_000).map(|_| rng.random_range(0..4)).collect();
        let y: Vec<usize> = (0..50_000).map(|_| rng.random_range(0..3)).collect();
        assert!(theils_u(&x, &y).unwrap() < 0.01);
        assert!((theils_u(&x, &x).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn correlation_ratio_extremes() {
        let x = [0, 0, 1, 1];
        assert!((correlation_ratio(&x, &[1.0, 1.0, 5.0, 5.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!(correlation_ratio(&x, &[1.0, 5.0, 1.0, 5.0]).unwrap().abs() < 1e-12);
        assert_eq!(correlation_ratio(&x, &[2.0; 4]), None);
    }

    #[test]
    fn constant_column_is_flagged_not_fatal() {
        let rows = (0..10).map(|i| vec![Cell::Num(1.0), Cell::Cat(i % 2)]).collect();
        let t = table(
            vec![
                ColumnSpec::continuous("k"),
                ColumnSpec::categorical("c", ["a", "b"]).as_target(),
            ],
            rows,
        );
        let m = association_matrix(&t).unwrap();
        assert_eq!(m.get(0, 1), 0.0);
        assert!(m.constant_pairs.contains(&(0, 1)));
        assert!(m.constant_pairs.contains(&(0, 0)));
    }

    #[test]
    fn flipping_a_pearson_entry() {
        let mk = |sign: f64| {
            let rows = (0..20)
                .map(|i| vec![Cell::Num(i as f64), Cell::Num(sign * i as f64), Cell::Cat(0)])
                .collect();
            table(
                vec![
                    ColumnSpec::continuous("x"),
                    ColumnSpec::continuous("y"),
                    ColumnSpec::categorical("c", ["a"]).as_target(),
                ],
                rows,
            )
        };
        let d = diff_corr(&mk(1.0), &mk(-1.0)).unwrap();
        assert!((d - (2.0f64 * 4.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn mixed_column_views() {
        let rows = (0..40)
            .map(|i| {
                let v = if i % 2 == 0 { 0.0 } else { 10.0 + i as f64 };
                vec![Cell::Num(v), Cell::Num(v * 3.0), Cell::Cat(i % 2)]
            })
            .collect();
        let t = table(
            vec![
                ColumnSpec::mixed("m", [0.0]),
                ColumnSpec::continuous("x"),
                ColumnSpec::categorical("c", ["a", "b"]).as_target(),
            ],
            rows,
        );
        let m = association_matrix(&t).unwrap();
        assert!((m.get(0, 1) - 1.0).abs() < 1e-12);
        // the zero indicator fully determines the parity class
        assert!((m.get(0, 2) - 1.0).abs() < 1e-12);
        assert!((m.get(2, 0) - 1.0).abs() < 1e-12);
    }
}
