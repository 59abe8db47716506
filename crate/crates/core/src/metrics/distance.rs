use serde::{Deserialize, Serialize};

use crate::data::{Cell, ColumnKind, Table};
use crate::error::{Error, Result};

/// 5th-percentile distance statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistancePair {
    pub dcr: f64,
    pub nndr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyDistanceReport {
    /// Synthetic rows against their nearest real rows.
    pub real_synth: DistancePair,
    pub within_real: DistancePair,
    pub within_synth: DistancePair,
}

/// Embeds rows of both tables in a shared space: numeric values min-max
/// scaled over the combined range, categories one-hot scaled by `1/sqrt 2`
/// so that a mismatch contributes exactly 1 to the squared distance.
/// Mixed columns get their scaled numeric value (0 when not numeric) plus
/// a one-hot over {categorical points, continuous, missing}.
pub fn embed(real: &Table, synth: &Table) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let schema = real.schema();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let ranges: Vec<(f64, f64)> = (0..schema.len())
        .map(|j| {
            real.numeric_values(j)
                .into_iter()
                .chain(synth.numeric_values(j))
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)))
        })
        .collect();
    let embed_row = |row: &[Cell]| {
        let mut out = Vec::new();
        for (j, spec) in schema.columns.iter().enumerate() {
            let (lo, hi) = ranges[j];
            let scale = |x: f64| if hi > lo { (x - lo) / (hi - lo) } else { 0.0 };
            match spec.kind {
                ColumnKind::Continuous => out.push(row[j].as_num().map_or(0.0, scale)),
                ColumnKind::Categorical => {
                    let k = spec.categorical_values.len();
                    let mut oh = vec![0.0; k + 1];
                    oh[row[j].as_cat().unwrap_or(k)] = s;
                    out.extend(oh);
                }
                ColumnKind::Mixed => {
                    let points = &spec.mixed_categorical_points;
                    out.push(row[j].as_num().map_or(0.0, scale));
                    let mut oh = vec![0.0; points.len() + 2];
                    let slot = match row[j] {
                        Cell::Num(x) => points.iter().position(|&p| p == x).unwrap_or(points.len()),
                        _ => points.len() + 1,
                    };
                    oh[slot] = s;
                    out.extend(oh);
                }
            }
        }
        out
    };
    (
        real.rows().iter().map(|r| embed_row(r)).collect(),
        synth.rows().iter().map(|r| embed_row(r)).collect(),
    )
}

/// Numpy-style linear-interpolation percentile.
pub fn percentile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q / 100.0 * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        s += d * d;
    }
    s
}

/// Squared distance accumulated in the same order as [`sq_dist`],
/// abandoned once it exceeds `bound`.
fn sq_dist_bounded(a: &[f64], b: &[f64], bound: f64) -> Option<f64> {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        s += d * d;
        if s > bound {
            return None;
        }
    }
    Some(s)
}

/// Two smallest squared distances from `q` to `refs`, skipping index
/// `skip`.
fn two_nearest(q: &[f64], refs: &[Vec<f64>], skip: Option<usize>) -> (f64, f64) {
    let (mut d1, mut d2) = (f64::INFINITY, f64::INFINITY);
    for (i, r) in refs.iter().enumerate() {
        if Some(i) == skip {
            continue;
        }
        if let Some(d) = sq_dist_bounded(q, r, d2) {
            if d < d1 {
                d2 = d1;
                d1 = d;
            } else if d < d2 {
                d2 = d;
            }
        }
    }
    (d1, d2)
}

fn ratio(d1: f64, d2: f64) -> f64 {
    if d2 == 0.0 {
        0.0
    } else {
        d1 / d2
    }
}

/// Per-query `(dcr, nndr)` against `refs`; `within` excludes each query's
/// own index.
pub fn nearest_stats(queries: &[Vec<f64>], refs: &[Vec<f64>], within: bool) -> Vec<(f64, f64)> {
    queries
        .iter()
        .enumerate()
        .map(|(i, q)| {
            let (a, b) = two_nearest(q, refs, within.then_some(i));
            let (d1, d2) = (a.sqrt(), b.sqrt());
            (d1, ratio(d1, d2))
        })
        .collect()
}

fn summarize(stats: &[(f64, f64)]) -> DistancePair {
    let dcr: Vec<f64> = stats.iter().map(|s| s.0).collect();
    let nndr: Vec<f64> = stats.iter().map(|s| s.1).collect();
    DistancePair {
        dcr: percentile(&dcr, 5.0),
        nndr: percentile(&nndr, 5.0),
    }
}

pub fn dcr_nndr(real: &Table, synth: &Table) -> Result<PrivacyDistanceReport> {
    if !real.schema().compatible_with(synth.schema()) {
        return Err(Error::SchemaMismatch("real and synthetic tables differ".into()));
    }
    for t in [real, synth] {
        if t.n_rows() < 3 {
            return Err(Error::TooFewRows {
                needed: 3,
                got: t.n_rows(),
            });
        }
    }
    let (r, s) = embed(real, synth);
    Ok(PrivacyDistanceReport {
        real_synth: summarize(&nearest_stats(&s, &r, false)),
        within_real: summarize(&nearest_stats(&r, &r, true)),
        within_synth: summarize(&nearest_stats(&s, &s, true)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_interpolates() {
        let v: Vec<f64> = (0..=20).map(f64::from).collect();
        assert_eq!(percentile(&v, 5.0), 1.0);
        assert!((percentile(&[0.0, 10.0], 5.0) - 0.5).abs() < 1e-12);
        assert_eq!(percentile(&[3.0], 5.0), 3.0);
    }

    #[test]
    fn duplicate_neighbours_give_zero_ratio() {
        let refs = vec![vec![1.0], vec![1.0], vec![5.0]];
        let s = nearest_stats(&[vec![1.0]], &refs, false);
        assert_eq!(s[0], (0.0, 0.0));
    }

    fn brute(queries: &[Vec<f64>], refs: &[Vec<f64>], within: bool) -> Vec<(f64, f64)> {
        queries
            .iter()
            .enumerate()
            .map(|(i, q)| {
                let mut d: Vec<f64> = refs
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| !(within && *j == i))
                    .map(|(_, r)| sq_dist(q, r).sqrt())
                    .collect();
                d.sort_by(f64::total_cmp);
                (d[0], if d[1] == 0.0 { 0.0 } else { d[0] / d[1] })
            })
            .collect()
    }

    fn random_table(n: usize, seed: u64) -> Table {
        use crate::data::{ColumnSpec, TableSchema};
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let schema = TableSchema::new(vec![
            ColumnSpec::continuous("x"),
            ColumnSpec::mixed("m", [0.0]),
            ColumnSpec::categorical("y", ["a", "b", "c"]).as_target(),
        ])
        .unwrap();
        let rows = (0..n)
            .map(|_| {
                let m = if rng.random_bool(0.3) { 0.0 } else { rng.random_range(1.0..50.0) };
                vec![
                    Cell::Num(rng.random_range(0.0..10.0)),
                    Cell::Num(m),
                    Cell::Cat(rng.random_range(0..3)),
                ]
            })
            .collect();
        Table::new(schema, rows).unwrap()
    }

    #[test]
    fn pruned_scan_matches_brute_force_exactly() {
        let real = random_table(200, 1);
        let synth = random_table(200, 2);
        let (r, s) = embed(&real, &synth);
        assert_eq!(nearest_stats(&s, &r, false), brute(&s, &r, false));
        assert_eq!(nearest_stats(&r, &r, true), brute(&r, &r, true));
        for (d, q) in nearest_stats(&s, &s, true) {
            assert!(d >= 0.0 && (0.0..=1.0).contains(&q));
        }
    }

    #[test]
    fn identical_tables_have_zero_dcr() {
        let real = random_table(50, 3);
        let rep = dcr_nndr(&real, &real).unwrap();
        assert_eq!(rep.real_synth.dcr, 0.0);
        let other = dcr_nndr(&real, &random_table(50, 4)).unwrap();
        assert!(other.real_synth.dcr >= 0.0);
        assert!(matches!(dcr_nndr(&random_table(2, 0), &real), Err(Error::TooFewRows { .. })));
    }

    #[test]
    fn category_mismatch_costs_one() {
        let (a, b) = (random_table(3, 5), random_table(3, 6));
        let row = a.row(0);
        let mut other = row.to_vec();
        other[2] = Cell::Cat((row[2].as_cat().unwrap() + 1) % 3);
        let t = Table::new(a.schema().clone(), vec![other]).unwrap();
        let (et, _) = embed(&t, &b);
        let (e0, _) = embed(&Table::new(a.schema().clone(), vec![row.to_vec()]).unwrap(), &b);
        assert!((sq_dist(&e0[0], &et[0]) - 1.0).abs() < 1e-12);
    }
}
