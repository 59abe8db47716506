//! Typed tables: schema declaration, CSV ingestion, stratified splitting and
//! row subsampling.
//!
//! A [`Table`] is immutable once built. Categorical cells hold indices into
//! the column's `categorical_values`, which are either listed in the schema
//! or collected in order of first appearance while loading.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Continuous,
    Categorical,
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categorical_values: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub mixed_categorical_points: Vec<f64>,
    #[serde(default)]
    pub long_tail: bool,
    #[serde(default)]
    pub is_target: bool,
    /// Decoded values are rounded to the nearest integer.
    #[serde(default)]
    pub integer: bool,
}

impl ColumnSpec {
    pub fn continuous(name: impl Into<String>) -> Self {
        ColumnSpec {
            name: name.into(),
            kind: ColumnKind::Continuous,
            categorical_values: Vec::new(),
            mixed_categorical_points: Vec::new(),
            long_tail: false,
            is_target: false,
            integer: false,
        }
    }

    pub fn categorical<S: Into<String>>(
        name: impl Into<String>,
        values: impl IntoIterator<Item = S>,
    ) -> Self {
        ColumnSpec {
            kind: ColumnKind::Categorical,
            categorical_values: values.into_iter().map(Into::into).collect(),
            ..ColumnSpec::continuous(name)
        }
    }

    pub fn mixed(name: impl Into<String>, points: impl IntoIterator<Item = f64>) -> Self {
        ColumnSpec {
            kind: ColumnKind::Mixed,
            mixed_categorical_points: points.into_iter().collect(),
            ..ColumnSpec::continuous(name)
        }
    }

    pub fn with_long_tail(mut self) -> Self {
        self.long_tail = true;
        self
    }

    pub fn as_target(mut self) -> Self {
        self.is_target = true;
        self
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self.kind, ColumnKind::Continuous | ColumnKind::Mixed)
    }
}

fn default_sentinels() -> Vec<String> {
    vec![String::new(), "?".to_string()]
}

/// Column declarations plus the name of the target column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableSchema {
    pub columns: Vec<ColumnSpec>,
    pub target: String,
    /// Raw cell strings (after trimming) that denote a missing value.
    #[serde(default = "default_sentinels")]
    pub missing_sentinels: Vec<String>,
}

impl TableSchema {
    /// Builds a schema from columns where exactly one carries `is_target`.
    pub fn new(columns: Vec<ColumnSpec>) -> Result<Self> {
        let targets: Vec<&ColumnSpec> = columns.iter().filter(|c| c.is_target).collect();
        if targets.len() != 1 {
            return Err(Error::InvalidSchema(format!(
                "expected exactly one target column, found {}",
                targets.len()
            )));
        }
        let target = targets[0].name.clone();
        let schema = TableSchema {
            columns,
            target,
            missing_sentinels: default_sentinels(),
        };
        schema.validate()?;
        Ok(schema)
    }

    /// Parses a schema JSON document and resolves the target flag.
    pub fn from_json(text: &str) -> Result<Self> {
        let mut schema: TableSchema = serde_json::from_str(text)?;
        for c in &mut schema.columns {
            c.is_target = c.name == schema.target;
        }
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashMap::new();
        for (i, c) in self.columns.iter().enumerate() {
            if seen.insert(c.name.as_str(), i).is_some() {
                return Err(Error::InvalidSchema(format!("duplicate column `{}`", c.name)));
            }
            let mixed = c.kind == ColumnKind::Mixed;
            if mixed == c.mixed_categorical_points.is_empty() {
                return Err(Error::InvalidSchema(format!(
                    "column `{}`: mixed_categorical_points must be non-empty exactly for mixed columns",
                    c.name
                )));
            }
            if c.long_tail && !c.is_numeric() {
                return Err(Error::InvalidSchema(format!(
                    "column `{}`: long_tail requires a numeric column",
                    c.name
                )));
            }
            if c.kind != ColumnKind::Categorical && !c.categorical_values.is_empty() {
                return Err(Error::InvalidSchema(format!(
                    "column `{}`: categorical_values only apply to categorical columns",
                    c.name
                )));
            }
            if c.mixed_categorical_points.iter().any(|p| !p.is_finite()) {
                return Err(Error::InvalidSchema(format!(
                    "column `{}`: categorical points must be finite",
                    c.name
                )));
            }
        }
        let n_targets = self.columns.iter().filter(|c| c.is_target).count();
        if n_targets != 1 {
            return Err(Error::InvalidSchema(format!(
                "expected exactly one target column, found {n_targets}"
            )));
        }
        if self.columns[self.target_index()].name != self.target {
            return Err(Error::InvalidSchema(format!(
                "target `{}` does not name the flagged target column",
                self.target
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn target_index(&self) -> usize {
        self.columns
            .iter()
            .position(|c| c.is_target)
            .expect("validated schema has a target")
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    fn is_missing(&self, raw: &str) -> bool {
        self.missing_sentinels.iter().any(|s| s == raw)
    }

    /// True when both schemas declare the same column names and kinds.
    pub fn compatible_with(&self, other: &TableSchema) -> bool {
        self.columns.len() == other.columns.len()
            && self
                .columns
                .iter()
                .zip(&other.columns)
                .all(|(a, b)| a.name == b.name && a.kind == b.kind)
    }
}

/// One table cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Num(f64),
    /// Index into the column's `categorical_values`.
    Cat(usize),
    Missing,
}

impl Cell {
    pub fn as_num(&self) -> Option<f64> {
        match *self {
            Cell::Num(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_cat(&self) -> Option<usize> {
        match *self {
            Cell::Cat(k) => Some(k),
            _ => None,
        }
    }

    pub fn is_missing(&self) -> bool {
        matches!(self, Cell::Missing)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    schema: TableSchema,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    /// Validates every row against the schema.
    pub fn new(schema: TableSchema, rows: Vec<Vec<Cell>>) -> Result<Self> {
        schema.validate()?;
        let target = schema.target_index();
        for (r, row) in rows.iter().enumerate() {
            if row.len() != schema.len() {
                return Err(Error::RowArity {
                    expected: schema.len(),
                    got: row.len(),
                });
            }
            for (c, (cell, spec)) in row.iter().zip(&schema.columns).enumerate() {
                let bad = || Error::UnparsableCell {
                    row: r,
                    column: spec.name.clone(),
                    value: format!("{cell:?}"),
                };
                match (cell, spec.kind) {
                    (Cell::Missing, _) if c == target => {
                        return Err(Error::MissingTarget { row: r })
                    }
                    (Cell::Missing, ColumnKind::Continuous) => {
                        return Err(Error::MissingNotAllowed {
                            row: r,
                            column: spec.name.clone(),
                        })
                    }
                    (Cell::Missing, _) => {}
                    (Cell::Num(v), ColumnKind::Continuous | ColumnKind::Mixed) if v.is_finite() => {}
                    (Cell::Cat(k), ColumnKind::Categorical) if *k < spec.categorical_values.len() => {}
                    _ => return Err(bad()),
                }
            }
        }
        Ok(Table { schema, rows })
    }

    pub fn empty(schema: TableSchema) -> Self {
        Table {
            schema,
            rows: Vec::new(),
        }
    }

    pub fn schema(&self) -> &TableSchema {
        &self.schema
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, i: usize) -> &[Cell] {
        &self.rows[i]
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = Cell> + '_ {
        self.rows.iter().map(move |r| r[j])
    }

    /// Finite numeric values of column `j`, skipping missing cells.
    pub fn numeric_values(&self, j: usize) -> Vec<f64> {
        self.column(j).filter_map(|c| c.as_num()).collect()
    }

    /// Builds a table from a subset of rows (indices may repeat).
    pub fn select(&self, indices: &[usize]) -> Table {
        Table {
            schema: self.schema.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    /// Appends rows of `other`, which must share this table's schema.
    pub fn concat(&self, other: &Table) -> Result<Table> {
        if !self.schema.compatible_with(&other.schema) {
            return Err(Error::SchemaMismatch("concat of incompatible tables".into()));
        }
        let mut rows = self.rows.clone();
        rows.extend(other.rows.iter().cloned());
        Ok(Table {
            schema: self.schema.clone(),
            rows,
        })
    }

    /// Unchecked constructor for rows produced by the decoder.
    pub(crate) fn from_rows_unchecked(schema: TableSchema, rows: Vec<Vec<Cell>>) -> Table {
        Table { schema, rows }
    }

    pub fn into_rows(self) -> Vec<Vec<Cell>> {
        self.rows
    }

    /// Textual rendering of a cell as written to CSV.
    pub fn format_cell(&self, column: usize, cell: Cell) -> String {
        match cell {
            Cell::Num(v) => format!("{v}"),
            Cell::Cat(k) => self.schema.columns[column].categorical_values[k].clone(),
            Cell::Missing => String::new(),
        }
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(self.schema.columns.iter().map(|c| c.name.as_str()))?;
        for row in &self.rows {
            w.write_record(row.iter().enumerate().map(|(j, &c)| self.format_cell(j, c)))?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    pub fn write_csv_path(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Parses CSV text against `schema`. Column order in the header may differ
/// from the schema; unlisted categorical labels are appended in order of
/// first appearance.
pub fn read_csv<R: Read>(reader: R, schema: &TableSchema) -> Result<Table> {
    schema.validate()?;
    let mut schema = schema.clone();
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.is_empty() || (header.len() == 1 && header[0].trim().is_empty()) {
        return Err(Error::MissingHeader(schema.columns[0].name.clone()));
    }
    // header position -> schema index
    let mut mapping = Vec::with_capacity(header.len());
    for name in header.iter() {
        let name = name.trim();
        let idx = schema
            .index_of(name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))?;
        mapping.push(idx);
    }
    for c in &schema.columns {
        if !header.iter().any(|h| h.trim() == c.name) {
            return Err(Error::MissingHeader(c.name.clone()));
        }
    }
    let target = schema.target_index();
    let mut lookup: Vec<HashMap<String, usize>> = schema
        .columns
        .iter()
        .map(|c| {
            c.categorical_values
                .iter()
                .enumerate()
                .map(|(i, v)| (v.clone(), i))
                .collect()
        })
        .collect();

    let mut rows = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let mut row = vec![Cell::Missing; schema.len()];
        for (pos, raw) in record.iter().enumerate() {
            let Some(&j) = mapping.get(pos) else {
                return Err(Error::UnparsableCell {
                    row: r,
                    column: format!("#{pos}"),
                    value: raw.to_string(),
                });
            };
            let raw = raw.trim();
            let spec = &schema.columns[j];
            if schema.is_missing(raw) {
                if j == target {
                    return Err(Error::MissingTarget { row: r });
                }
                if spec.kind == ColumnKind::Continuous {
                    return Err(Error::MissingNotAllowed {
                        row: r,
                        column: spec.name.clone(),
                    });
                }
                continue;
            }
            row[j] = match spec.kind {
                ColumnKind::Continuous | ColumnKind::Mixed => match raw.parse::<f64>() {
                    Ok(v) if v.is_finite() => Cell::Num(v),
                    _ => {
                        return Err(Error::UnparsableCell {
                            row: r,
                            column: spec.name.clone(),
                            value: raw.to_string(),
                        })
                    }
                },
                ColumnKind::Categorical => {
                    let next = lookup[j].len();
                    let k = *lookup[j].entry(raw.to_string()).or_insert(next);
                    if k == next {
                        schema.columns[j].categorical_values.push(raw.to_string());
                    }
                    Cell::Cat(k)
                }
            };
        }
        if record.len() != mapping.len() {
            return Err(Error::RowArity {
                expected: mapping.len(),
                got: record.len(),
            });
        }
        rows.push(row);
    }
    Ok(Table { schema, rows })
}

pub fn load_csv(path: impl AsRef<Path>, schema: &TableSchema) -> Result<Table> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(std::io::BufReader::new(file), schema)
}

/// Splits per target class so each class contributes `round(ratio * n)`
/// rows (kept within `[1, n - 1]`) to the training side.
pub fn stratified_split(t: &Table, ratio: f64, seed: u64) -> Result<(Table, Table)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidSchema(format!("split ratio {ratio} not in (0, 1)")));
    }
    let target = t.schema.target_index();
    let spec = &t.schema.columns[target];
    if spec.kind != ColumnKind::Categorical {
        return Err(Error::InvalidSchema("stratified split needs a categorical target".into()));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); spec.categorical_values.len()];
    for (i, row) in t.rows.iter().enumerate() {
        match row[target] {
            Cell::Cat(k) => by_class[k].push(i),
            _ => return Err(Error::MissingTarget { row: i }),
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (k, mut idx) in by_class.into_iter().enumerate() {
        if idx.is_empty() {
            continue;
        }
        if idx.len() < 2 {
            return Err(Error::DegenerateClass {
                class: spec.categorical_values[k].clone(),
            });
        }
        idx.shuffle(&mut rng);
        let n = idx.len();
        let n_train = ((ratio * n as f64).round() as usize).clamp(1, n - 1);
        train.extend_from_slice(&idx[..n_train]);
        test.extend_from_slice(&idx[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((t.select(&train), t.select(&test)))
}

/// Uniform sample of `n` rows without replacement.
pub fn subsample_rows(t: &Table, n: usize, seed: u64) -> Result<Table> {
    if n > t.n_rows() {
        return Err(Error::NTooLarge {
            requested: n,
            available: t.n_rows(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let idx = rand::seq::index::sample(&mut rng, t.n_rows(), n).into_vec();
    Ok(t.select(&idx))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ab_schema() -> TableSchema {
        TableSchema::new(vec![
            ColumnSpec::continuous("a"),
            ColumnSpec::categorical("b", ["x", "y"]).as_target(),
        ])
        .unwrap()
    }

    #[test]
    fn parses_small_csv() {
        let t = read_csv("a,b\n1.0,x\n2.0,y\n".as_bytes(), &ab_schema()).unwrap();
        assert_eq!(t.n_rows(), 2);
        assert_eq!(t.row(0), &[Cell::Num(1.0), Cell::Cat(0)]);
        assert_eq!(t.row(1), &[Cell::Num(2.0), Cell::Cat(1)]);
    }

    #[test]
    fn header_order_is_free() {
        let t = read_csv("b,a\ny,3.5\n".as_bytes(), &ab_schema()).unwrap();
        assert_eq!(t.row(0), &[Cell::Num(3.5), Cell::Cat(1)]);
    }

    #[test]
    fn empty_and_question_mark_are_missing_in_mixed() {
        let schema = TableSchema::new(vec![
            ColumnSpec::mixed("m", [0.0]),
            ColumnSpec::categorical("t", Vec::<String>::new()).as_target(),
        ])
        .unwrap();
        let t = read_csv("m,t\n,a\n?,b\n0,a\n1.5,b\n".as_bytes(), &schema).unwrap();
        assert!(t.row(0)[0].is_missing());
        assert!(t.row(1)[0].is_missing());
        assert_eq!(t.row(2)[0], Cell::Num(0.0));
        assert_eq!(t.schema().columns[1].categorical_values, vec!["a", "b"]);
    }

    #[test]
    fn unparsable_continuous_cell() {
        let err = read_csv("a,b\nabc,x\n".as_bytes(), &ab_schema()).unwrap_err();
        assert!(matches!(err, Error::UnparsableCell { row: 0, .. }));
    }

    #[test]
    fn unknown_and_missing_headers() {
        let err = read_csv("a,b,c\n1,x,2\n".as_bytes(), &ab_schema()).unwrap_err();
        assert!(matches!(err, Error::UnknownColumn(c) if c == "c"));
        let err = read_csv("a\n1\n".as_bytes(), &ab_schema()).unwrap_err();
        assert!(matches!(err, Error::MissingHeader(c) if c == "b"));
    }

    #[test]
    fn missing_target_and_missing_continuous_rejected() {
        let err = read_csv("a,b\n1,\n".as_bytes(), &ab_schema()).unwrap_err();
        assert!(matches!(err, Error::MissingTarget { row: 0 }));
        let err = read_csv("a,b\n,x\n".as_bytes(), &ab_schema()).unwrap_err();
        assert!(matches!(err, Error::MissingNotAllowed { .. }));
    }

    #[test]
    fn schema_json_round_trip() {
        let text = r#"{"columns":[{"name":"age","kind":"continuous","long_tail":true},
            {"name":"cap","kind":"mixed","mixed_categorical_points":[0.0]},
            {"name":"y","kind":"categorical","categorical_values":["no","yes"]}],
            "target":"y"}"#;
        let s = TableSchema::from_json(text).unwrap();
        assert!(s.columns[2].is_target);
        assert_eq!(s.missing_sentinels, vec!["", "?"]);
        let again = TableSchema::from_json(&s.to_json().unwrap()).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn schema_validation() {
        assert!(TableSchema::new(vec![ColumnSpec::continuous("a")]).is_err());
        let mut bad = ColumnSpec::continuous("a").as_target();
        bad.mixed_categorical_points = vec![0.0];
        assert!(TableSchema::new(vec![bad]).is_err());
        let lt = ColumnSpec::categorical("c", ["x"]).with_long_tail().as_target();
        assert!(TableSchema::new(vec![lt]).is_err());
    }

    fn balanced(n: usize) -> Table {
        let rows = (0..n)
            .map(|i| vec![Cell::Num(i as f64), Cell::Cat(i % 2)])
            .collect();
        Table::new(ab_schema(), rows).unwrap()
    }

    #[test]
    fn stratified_split_is_proportional_and_deterministic() {
        let t = balanced(100);
        let (tr, te) = stratified_split(&t, 0.8, 7).unwrap();
        let count = |t: &Table, k| t.column(1).filter(|c| *c == Cell::Cat(k)).count();
        assert_eq!((count(&tr, 0), count(&tr, 1)), (40, 40));
        assert_eq!((count(&te, 0), count(&te, 1)), (10, 10));
        let (tr2, te2) = stratified_split(&t, 0.8, 7).unwrap();
        assert_eq!(tr, tr2);
        assert_eq!(te, te2);
        // union is a permutation of the input
        let mut ids: Vec<i64> = tr
            .column(0)
            .chain(te.column(0))
            .map(|c| c.as_num().unwrap() as i64)
            .collect();
        ids.sort();
        assert_eq!(ids, (0..100).collect::<Vec<_>>());
    }

    #[test]
    fn stratified_split_rejects_singleton_class() {
        let rows = vec![
            vec![Cell::Num(0.0), Cell::Cat(0)],
            vec![Cell::Num(1.0), Cell::Cat(0)],
            vec![Cell::Num(2.0), Cell::Cat(1)],
        ];
        let t = Table::new(ab_schema(), rows).unwrap();
        assert!(matches!(
            stratified_split(&t, 0.5, 0),
            Err(Error::DegenerateClass { .. })
        ));
    }

    #[test]
    fn adult_scale_split() {
        // 48 842 rows with a 76/24 label balance, as in the census income data.
        let rows = (0..48_842)
            .map(|i| vec![Cell::Num(i as f64), Cell::Cat(usize::from(i % 100 < 24))])
            .collect();
        let t = Table::new(ab_schema(), rows).unwrap();
        let (tr, te) = stratified_split(&t, 0.8, 1).unwrap();
        assert_eq!(tr.n_rows() / 1000, 39);
        assert_eq!(te.n_rows() / 1000, 9);
    }

    #[test]
    fn subsample_edges() {
        let t = balanced(10);
        let all = subsample_rows(&t, 10, 3).unwrap();
        let mut ids: Vec<i64> = all.column(0).map(|c| c.as_num().unwrap() as i64).collect();
        ids.sort();
        assert_eq!(ids, (0..10).collect::<Vec<_>>());
        assert_eq!(subsample_rows(&t, 0, 3).unwrap().n_rows(), 0);
        assert!(matches!(subsample_rows(&t, 11, 3), Err(Error::NTooLarge { .. })));
        assert_eq!(subsample_rows(&t, 4, 9).unwrap(), subsample_rows(&t, 4, 9).unwrap());
    }

    #[test]
    fn subsample_is_uniform() {
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        let t = balanced(20);
        let mut counts = [0usize; 20];
        for seed in 0..1000 {
            for c in subsample_rows(&t, 5, seed).unwrap().column(0) {
                counts[c.as_num().unwrap() as usize] += 1;
            }
        }
        let expected = 1000.0 * 5.0 / 20.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        let p = 1.0 - ChiSquared::new(19.0).unwrap().cdf(chi2);
        assert!(p > 0.01, "chi2 {chi2}, p {p}");
    }

    #[test]
    fn csv_round_trip_is_cell_exact() {
        let schema = TableSchema::new(vec![
            ColumnSpec::continuous("a"),
            ColumnSpec::mixed("m", [0.0]),
            ColumnSpec::categorical("c", Vec::<String>::new()).as_target(),
        ])
        .unwrap();
        let text = "a,m,c\n0.1,,u\n-3.25e-7,0,v\n1e300,2.5,u\n";
        let t = read_csv(text.as_bytes(), &schema).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let back = read_csv(buf.as_slice(), t.schema()).unwrap();
        assert_eq!(t, back);
    }
}
