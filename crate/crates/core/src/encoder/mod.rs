//! Reversible row encoding.
//!
//! Continuous columns use mode-specific normalization over a fitted
//! Gaussian mixture (`alpha` plus a mode one-hot `beta`); mixed columns add
//! one dedicated mode per categorical point (and one for missing values);
//! categorical columns become a one-hot `gamma`, with an extra class for
//! missing values when the fitted data had any. Numeric spans come first,
//! then categorical spans, each in schema order.

mod long_tail;
mod vgm;
mod wrap;

pub use long_tail::{long_tail_forward, long_tail_inverse, LongTailTransform};
pub use vgm::{
    fit_vgm, fit_vgm_with, msn_decode, msn_encode, sigma_floor, CandidateFit, VgmConfig,
    VgmFitReport, VgmModel,
};
pub use wrap::{square_side, square_unwrap, square_wrap, SquareMatrix};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{Cell, ColumnKind, Table, TableSchema};
use crate::error::{Error, Result};

/// Continuous part of a mixed column plus its dedicated point modes.
/// Mode slots are ordered: active mixture modes, categorical points, then
/// the missing-value mode when present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedModel {
    pub vgm: VgmModel,
    pub categorical_points: Vec<f64>,
    pub has_missing: bool,
}

impl MixedModel {
    pub fn n_modes(&self) -> usize {
        self.vgm.n_active() + self.categorical_points.len() + usize::from(self.has_missing)
    }

    fn point_slot(&self, x: f64) -> Option<usize> {
        self.categorical_points
            .iter()
            .position(|&p| p == x)
            .map(|i| self.vgm.n_active() + i)
    }

    fn missing_slot(&self) -> Option<usize> {
        self.has_missing.then(|| self.n_modes() - 1)
    }

    /// Returns `(alpha, slot)`; dedicated modes always have `alpha = 0`.
    pub fn encode(&self, cell: Cell, lt: Option<&LongTailTransform>) -> Result<(f64, usize)> {
        match cell {
            Cell::Missing => self
                .missing_slot()
                .map(|s| (0.0, s))
                .ok_or_else(|| Error::InvalidSchema("unexpected missing value in mixed column".into())),
            Cell::Num(x) => {
                if let Some(slot) = self.point_slot(x) {
                    return Ok((0.0, slot));
                }
                let x = match lt {
                    Some(t) => t.forward(x)?,
                    None => x,
                };
                let pos = self.vgm.select_mode(x);
                let (mu, sigma) = self.vgm.active_mode(pos);
                Ok((((x - mu) / (4.0 * sigma)).clamp(-1.0, 1.0), pos))
            }
            Cell::Cat(_) => Err(Error::InvalidSchema("categorical cell in mixed column".into())),
        }
    }

    pub fn decode(&self, alpha: f64, slot: usize, lt: Option<&LongTailTransform>) -> Cell {
        let n_vgm = self.vgm.n_active();
        if slot < n_vgm {
            let (mu, sigma) = self.vgm.active_mode(slot);
            let y = alpha * 4.0 * sigma + mu;
            Cell::Num(lt.map_or(y, |t| t.inverse(y)))
        } else if slot < n_vgm + self.categorical_points.len() {
            Cell::Num(self.categorical_points[slot - n_vgm])
        } else {
            Cell::Missing
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnTransform {
    Continuous {
        vgm: VgmModel,
        long_tail: Option<LongTailTransform>,
    },
    Mixed {
        model: MixedModel,
        long_tail: Option<LongTailTransform>,
    },
    Categorical {
        n_classes: usize,
        has_missing: bool,
    },
}

impl ColumnTransform {
    /// Width of the one-hot part (beta or gamma).
    pub fn one_hot_len(&self) -> usize {
        match self {
            ColumnTransform::Continuous { vgm, .. } => vgm.n_active(),
            ColumnTransform::Mixed { model, .. } => model.n_modes(),
            ColumnTransform::Categorical {
                n_classes,
                has_missing,
            } => n_classes + usize::from(*has_missing),
        }
    }

    pub fn is_numeric(&self) -> bool {
        !matches!(self, ColumnTransform::Categorical { .. })
    }
}

/// Where a column lives in the encoded vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Span {
    Numeric {
        column: usize,
        alpha_offset: usize,
        beta_offset: usize,
        beta_len: usize,
    },
    Categorical {
        column: usize,
        gamma_offset: usize,
        gamma_len: usize,
    },
}

impl Span {
    pub fn column(&self) -> usize {
        match *self {
            Span::Numeric { column, .. } | Span::Categorical { column, .. } => column,
        }
    }

    /// `(offset, len)` of the one-hot part.
    pub fn one_hot(&self) -> (usize, usize) {
        match *self {
            Span::Numeric {
                beta_offset,
                beta_len,
                ..
            } => (beta_offset, beta_len),
            Span::Categorical {
                gamma_offset,
                gamma_len,
                ..
            } => (gamma_offset, gamma_len),
        }
    }
}

/// A one-hot segment of the encoding and its position in the conditional
/// vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub column: usize,
    pub offset: usize,
    pub len: usize,
    pub cond_offset: usize,
    pub numeric: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodingLayout {
    pub spans: Vec<Span>,
    /// Encoded row width `T`.
    pub width: usize,
    /// Extended conditional vector width `E`.
    pub cond_width: usize,
    /// `ceil(sqrt(T + E))`: side of the discriminator's square input.
    pub side_d: usize,
    /// `ceil(sqrt(T))`: side of the generator's square output.
    pub side_g: usize,
}

impl EncodingLayout {
    pub fn from_transforms(transforms: &[ColumnTransform]) -> Self {
        let mut spans = Vec::new();
        let mut offset = 0;
        for (column, t) in transforms.iter().enumerate() {
            if t.is_numeric() {
                let beta_len = t.one_hot_len();
                spans.push(Span::Numeric {
                    column,
                    alpha_offset: offset,
                    beta_offset: offset + 1,
                    beta_len,
                });
                offset += 1 + beta_len;
            }
        }
        for (column, t) in transforms.iter().enumerate() {
            if !t.is_numeric() {
                let gamma_len = t.one_hot_len();
                spans.push(Span::Categorical {
                    column,
                    gamma_offset: offset,
                    gamma_len,
                });
                offset += gamma_len;
            }
        }
        let cond_width = spans.iter().map(|s| s.one_hot().1).sum();
        EncodingLayout {
            width: offset,
            cond_width,
            side_d: square_side(offset + cond_width),
            side_g: square_side(offset),
            spans,
        }
    }

    pub fn segments(&self) -> Vec<Segment> {
        let mut cond_offset = 0;
        self.spans
            .iter()
            .map(|s| {
                let (offset, len) = s.one_hot();
                let seg = Segment {
                    column: s.column(),
                    offset,
                    len,
                    cond_offset,
                    numeric: matches!(s, Span::Numeric { .. }),
                };
                cond_offset += len;
                seg
            })
            .collect()
    }

    pub fn span_of(&self, column: usize) -> Option<Span> {
        self.spans.iter().copied().find(|s| s.column() == column)
    }

    /// Offsets of all `alpha` slots.
    pub fn alpha_offsets(&self) -> Vec<usize> {
        self.spans
            .iter()
            .filter_map(|s| match *s {
                Span::Numeric { alpha_offset, .. } => Some(alpha_offset),
                _ => None,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub vgm: VgmConfig,
    /// Overrides the long-tail epsilon (default: 1% of the column range).
    pub long_tail_epsilon: Option<f64>,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            vgm: VgmConfig::default(),
            long_tail_epsilon: None,
        }
    }
}

/// Encoded training data: a row-major `n_rows x width` matrix plus, for
/// each one-hot segment, the selected class of every row.
#[derive(Debug, Clone)]
pub struct EncodedTable {
    pub data: Vec<f64>,
    pub n_rows: usize,
    pub width: usize,
    pub segment_classes: Vec<Vec<usize>>,
}

impl EncodedTable {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.width..(i + 1) * self.width]
    }
}

/// Fitted per-column transforms. Serializes to the JSON sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableEncoder {
    pub schema: TableSchema,
    pub transforms: Vec<ColumnTransform>,
    pub layout: EncodingLayout,
}

impl TableEncoder {
    pub fn fit(table: &Table, cfg: &EncoderConfig) -> Result<Self> {
        let schema = table.schema().clone();
        let mut transforms = Vec::with_capacity(schema.len());
        for (j, spec) in schema.columns.iter().enumerate() {
            let has_missing = table.column(j).any(|c| c.is_missing());
            let t = match spec.kind {
                ColumnKind::Categorical => ColumnTransform::Categorical {
                    n_classes: spec.categorical_values.len(),
                    has_missing,
                },
                ColumnKind::Continuous => {
                    let values = table.numeric_values(j);
                    let (values, long_tail) = apply_long_tail(values, spec.long_tail, cfg)?;
                    ColumnTransform::Continuous {
                        vgm: fit_vgm_with(&values, &cfg.vgm)?.0,
                        long_tail,
                    }
                }
                ColumnKind::Mixed => {
                    let points = &spec.mixed_categorical_points;
                    let cont: Vec<f64> = table
                        .numeric_values(j)
                        .into_iter()
                        .filter(|v| !points.contains(v))
                        .collect();
                    let (cont, long_tail) = if cont.is_empty() {
                        (cont, None)
                    } else {
                        apply_long_tail(cont, spec.long_tail, cfg)?
                    };
                    let vgm = if cont.is_empty() {
                        VgmModel::single(0.0, 1.0)
                    } else {
                        fit_vgm_with(&cont, &cfg.vgm)?.0
                    };
                    ColumnTransform::Mixed {
                        model: MixedModel {
                            vgm,
                            categorical_points: points.clone(),
                            has_missing,
                        },
                        long_tail,
                    }
                }
            };
            transforms.push(t);
        }
        let layout = EncodingLayout::from_transforms(&transforms);
        Ok(TableEncoder {
            schema,
            transforms,
            layout,
        })
    }

    pub fn width(&self) -> usize {
        self.layout.width
    }

    /// Encodes one row; also returns the selected class per one-hot segment.
    pub fn encode_row_with_classes(&self, row: &[Cell]) -> Result<(Vec<f64>, Vec<usize>)> {
        if row.len() != self.transforms.len() {
            return Err(Error::RowArity {
                expected: self.transforms.len(),
                got: row.len(),
            });
        }
        let mut out = vec![0.0; self.layout.width];
        let mut classes = Vec::with_capacity(self.layout.spans.len());
        for span in &self.layout.spans {
            let j = span.column();
            let cell = row[j];
            let name = || self.schema.columns[j].name.clone();
            match (span, &self.transforms[j]) {
                (
                    Span::Numeric {
                        alpha_offset,
                        beta_offset,
                        ..
                    },
                    ColumnTransform::Continuous { vgm, long_tail },
                ) => {
                    let x = cell.as_num().ok_or_else(|| Error::UnparsableCell {
                        row: 0,
                        column: name(),
                        value: format!("{cell:?}"),
                    })?;
                    let x = match long_tail {
                        Some(t) => t.forward(x)?,
                        None => x,
                    };
                    let pos = vgm.select_mode(x);
                    let (mu, sigma) = vgm.active_mode(pos);
                    out[*alpha_offset] = ((x - mu) / (4.0 * sigma)).clamp(-1.0, 1.0);
                    out[beta_offset + pos] = 1.0;
                    classes.push(pos);
                }
                (
                    Span::Numeric {
                        alpha_offset,
                        beta_offset,
                        ..
                    },
                    ColumnTransform::Mixed { model, long_tail },
                ) => {
                    let (alpha, slot) = model.encode(cell, long_tail.as_ref())?;
                    out[*alpha_offset] = alpha;
                    out[beta_offset + slot] = 1.0;
                    classes.push(slot);
                }
                (
                    Span::Categorical { gamma_offset, .. },
                    ColumnTransform::Categorical {
                        n_classes,
                        has_missing,
                    },
                ) => {
                    let k = match cell {
                        Cell::Cat(k) if k < *n_classes => k,
                        Cell::Missing if *has_missing => *n_classes,
                        _ => {
                            return Err(Error::UnparsableCell {
                                row: 0,
                                column: name(),
                                value: format!("{cell:?}"),
                            })
                        }
                    };
                    out[gamma_offset + k] = 1.0;
                    classes.push(k);
                }
                _ => unreachable!("layout built from the same transforms"),
            }
        }
        Ok((out, classes))
    }

    pub fn encode_row(&self, row: &[Cell]) -> Result<Vec<f64>> {
        self.encode_row_with_classes(row).map(|(v, _)| v)
    }

    pub fn encode_table(&self, table: &Table) -> Result<EncodedTable> {
        let width = self.layout.width;
        let n_seg = self.layout.spans.len();
        let mut data = Vec::with_capacity(table.n_rows() * width);
        let mut segment_classes = vec![Vec::with_capacity(table.n_rows()); n_seg];
        for (r, row) in table.rows().iter().enumerate() {
            let (v, classes) = self.encode_row_with_classes(row).map_err(|e| match e {
                Error::UnparsableCell { column, value, .. } => Error::UnparsableCell {
                    row: r,
                    column,
                    value,
                },
                other => other,
            })?;
            data.extend_from_slice(&v);
            for (s, k) in classes.into_iter().enumerate() {
                segment_classes[s].push(k);
            }
        }
        Ok(EncodedTable {
            data,
            n_rows: table.n_rows(),
            width,
            segment_classes,
        })
    }

    /// Inverts an encoded (or generated) vector. One-hot parts are read by
    /// argmax, so soft generator outputs decode to valid categories.
    pub fn decode_row(&self, v: &[f64]) -> Result<Vec<Cell>> {
        if v.len() != self.layout.width {
            return Err(Error::LayoutMismatch {
                expected: self.layout.width,
                got: v.len(),
            });
        }
        let mut row = vec![Cell::Missing; self.transforms.len()];
        for span in &self.layout.spans {
            let j = span.column();
            let (off, len) = span.one_hot();
            let slot = argmax(&v[off..off + len]);
            row[j] = match (span, &self.transforms[j]) {
                (Span::Numeric { alpha_offset, .. }, ColumnTransform::Continuous { vgm, long_tail }) => {
                    let (mu, sigma) = vgm.active_mode(slot);
                    let y = v[*alpha_offset] * 4.0 * sigma + mu;
                    Cell::Num(long_tail.map_or(y, |t| t.inverse(y)))
                }
                (Span::Numeric { alpha_offset, .. }, ColumnTransform::Mixed { model, long_tail }) => {
                    model.decode(v[*alpha_offset], slot, long_tail.as_ref())
                }
                (_, ColumnTransform::Categorical { n_classes, .. }) => {
                    if slot < *n_classes {
                        Cell::Cat(slot)
                    } else {
                        Cell::Missing
                    }
                }
                _ => unreachable!("layout built from the same transforms"),
            };
            if self.schema.columns[j].integer {
                if let Cell::Num(x) = row[j] {
                    row[j] = Cell::Num(x.round());
                }
            }
        }
        Ok(row)
    }

    /// Decodes a row-major matrix of `width`-long rows into a table.
    pub fn decode_rows(&self, data: &[f64]) -> Result<Table> {
        let w = self.layout.width;
        if w == 0 || data.len() % w != 0 {
            return Err(Error::LayoutMismatch {
                expected: w,
                got: data.len(),
            });
        }
        let rows = data
            .chunks(w)
            .map(|r| self.decode_row(r))
            .collect::<Result<Vec<_>>>()?;
        Ok(Table::from_rows_unchecked(self.schema.clone(), rows))
    }

    /// `(offset, len)` of the target column's one-hot, when categorical.
    pub fn target_segment(&self) -> Option<(usize, usize)> {
        match self.layout.span_of(self.schema.target_index())? {
            Span::Categorical {
                gamma_offset,
                gamma_len,
                ..
            } => Some((gamma_offset, gamma_len)),
            Span::Numeric { .. } => None,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

fn apply_long_tail(
    values: Vec<f64>,
    enabled: bool,
    cfg: &EncoderConfig,
) -> Result<(Vec<f64>, Option<LongTailTransform>)> {
    if !enabled {
        return Ok((values, None));
    }
    let t = LongTailTransform::fit(&values, cfg.long_tail_epsilon)?;
    let compressed = values.iter().map(|&x| t.forward(x)).collect::<Result<Vec<_>>>()?;
    Ok((compressed, Some(t)))
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}
