//! Synthetic fixtures shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tabsynth::{Cell, ColumnSpec, Table, TableSchema};

/// Loan-shaped table: three continuous columns, one mixed column with a
/// zero spike, one four-way categorical and a binary target.
pub fn loan_table(n: usize, seed: u64) -> Table {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let schema = TableSchema::new(vec![
        ColumnSpec::continuous("age"),
        ColumnSpec::continuous("income"),
        ColumnSpec::continuous("balance"),
        ColumnSpec::mixed("mortgage", [0.0]),
        ColumnSpec::categorical("family", ["1", "2", "3", "4"]),
        ColumnSpec::categorical("loan", ["0", "1"]).as_target(),
    ])
    .expect("fixture schema is valid");
    let rows = (0..n)
        .map(|_| {
            let age = rng.random_range(23.0..67.0_f64).round();
            let income = if rng.random_bool(0.7) { 40.0 } else { 140.0 } + rng.random::<f64>() * 30.0;
            let balance = rng.random::<f64>().powi(3) * 10.0;
            let mortgage = if rng.random_bool(0.6) { 0.0 } else { 80.0 + rng.random::<f64>() * 200.0 };
            vec![
                Cell::Num(age),
                Cell::Num(income),
                Cell::Num(balance),
                Cell::Num(mortgage),
                Cell::Cat(rng.random_range(0..4)),
                Cell::Cat(usize::from(income > 120.0 && rng.random_bool(0.8))),
            ]
        })
        .collect();
    Table::new(schema, rows).expect("fixture rows match schema")
}

#[cfg(test)]
mod tests {
    #[test]
    fn fixture_is_deterministic() {
        let a = super::loan_table(50, 1);
        assert_eq!(a.rows(), super::loan_table(50, 1).rows());
        assert_eq!(a.n_rows(), 50);
    }
}
