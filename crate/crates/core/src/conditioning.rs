//! Conditional vectors and training-by-sampling.
//!
//! Every one-hot segment of the encoding (mode indicators of numeric
//! columns and category one-hots) is a conditionable column. A condition
//! picks one segment uniformly, then one class inside it.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::encoder::{EncodedTable, EncodingLayout, Segment};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CondVector {
    /// 0/1 mask over the extended conditional width `E`.
    pub bits: Vec<f64>,
    /// Index into `EncodingLayout::segments()`.
    pub segment: usize,
    /// Schema column the segment belongs to.
    pub column: usize,
    pub class: usize,
}

impl CondVector {
    pub fn set_bit(&self) -> usize {
        self.bits.iter().position(|&b| b == 1.0).unwrap_or(0)
    }
}

/// Builds the condition selecting `class` of schema column `column`.
pub fn build_cond_vector(layout: &EncodingLayout, column: usize, class: usize) -> Result<CondVector> {
    let segments = layout.segments();
    let (segment, seg) = segments
        .iter()
        .enumerate()
        .find(|(_, s)| s.column == column)
        .ok_or(Error::OutOfRange { column, class })?;
    if class >= seg.len {
        return Err(Error::OutOfRange { column, class });
    }
    Ok(cond_for_segment(layout.cond_width, segment, seg, class))
}

fn cond_for_segment(width: usize, segment: usize, seg: &Segment, class: usize) -> CondVector {
    let mut bits = vec![0.0; width];
    bits[seg.cond_offset + class] = 1.0;
    CondVector {
        bits,
        segment,
        column: seg.column,
        class,
    }
}

/// Per-segment class counts from the training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreqStats {
    pub segments: Vec<Segment>,
    pub counts: Vec<Vec<u64>>,
    pub cond_width: usize,
}

impl FreqStats {
    pub fn from_encoded(layout: &EncodingLayout, data: &EncodedTable) -> Self {
        let segments = layout.segments();
        let counts = segments
            .iter()
            .zip(&data.segment_classes)
            .map(|(seg, classes)| {
                let mut c = vec![0u64; seg.len];
                for &k in classes {
                    c[k] += 1;
                }
                c
            })
            .collect();
        FreqStats {
            segments,
            counts,
            cond_width: layout.cond_width,
        }
    }

    /// Class PMF proportional to `ln(1 + count)`.
    pub fn log_pmf(&self, segment: usize) -> Vec<f64> {
        normalize(self.counts[segment].iter().map(|&c| (c as f64).ln_1p()))
    }

    /// Class PMF proportional to the raw counts.
    pub fn empirical_pmf(&self, segment: usize) -> Vec<f64> {
        normalize(self.counts[segment].iter().map(|&c| c as f64))
    }
}

fn normalize(w: impl Iterator<Item = f64>) -> Vec<f64> {
    let w: Vec<f64> = w.collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassWeighting {
    /// `ln(1 + count)`: oversamples minority classes during training.
    LogFrequency,
    /// Raw counts: reproduces the data marginals when sampling.
    Frequency,
}

/// Draws conditions and matching real rows.
#[derive(Debug, Clone)]
pub struct ConditionSampler {
    stats: FreqStats,
    eligible: Vec<usize>,
    log_dists: Vec<Option<WeightedIndex<f64>>>,
    freq_dists: Vec<Option<WeightedIndex<f64>>>,
    /// Rows per (segment, class).
    rows_by_class: Vec<Vec<Vec<usize>>>,
}

impl ConditionSampler {
    pub fn new(layout: &EncodingLayout, data: &EncodedTable) -> Result<Self> {
        let stats = FreqStats::from_encoded(layout, data);
        let mut rows_by_class: Vec<Vec<Vec<usize>>> =
            stats.segments.iter().map(|s| vec![Vec::new(); s.len]).collect();
        for (s, classes) in data.segment_classes.iter().enumerate() {
            for (row, &k) in classes.iter().enumerate() {
                rows_by_class[s][k].push(row);
            }
        }
        let mut sampler = Self::from_stats(stats)?;
        sampler.rows_by_class = rows_by_class;
        Ok(sampler)
    }

    /// A sampler without row lookups, for drawing conditions only.
    pub fn from_stats(stats: FreqStats) -> Result<Self> {
        let build = |w: Vec<f64>| WeightedIndex::new(w).ok();
        let log_dists: Vec<_> = stats
            .counts
            .iter()
            .map(|c| build(c.iter().map(|&x| (x as f64).ln_1p()).collect()))
            .collect();
        let freq_dists: Vec<_> = stats
            .counts
            .iter()
            .map(|c| build(c.iter().map(|&x| x as f64).collect()))
            .collect();
        let eligible: Vec<usize> = (0..stats.segments.len())
            .filter(|&s| log_dists[s].is_some())
            .collect();
        if eligible.is_empty() {
            return Err(Error::EmptyInput);
        }
        Ok(ConditionSampler {
            rows_by_class: Vec::new(),
            stats,
            eligible,
            log_dists,
            freq_dists,
        })
    }

    pub fn stats(&self) -> &FreqStats {
        &self.stats
    }

    /// Segments with at least one observed class.
    pub fn eligible_segments(&self) -> &[usize] {
        &self.eligible
    }

    pub fn sample<R: Rng + ?Sized>(&self, weighting: ClassWeighting, rng: &mut R) -> CondVector {
        let segment = self.eligible[rng.random_range(0..self.eligible.len())];
        let dist = match weighting {
            ClassWeighting::LogFrequency => &self.log_dists[segment],
            ClassWeighting::Frequency => &self.freq_dists[segment],
        };
        let class = dist.as_ref().expect("eligible segment").sample(rng);
        let seg = &self.stats.segments[segment];
        cond_for_segment(self.stats.cond_width, segment, seg, class)
    }

    /// Uniform draw, with replacement, among training rows whose encoding
    /// selects the condition's class.
    pub fn sample_row<R: Rng + ?Sized>(&self, cond: &CondVector, rng: &mut R) -> Option<usize> {
        let rows = self.rows_by_class.get(cond.segment)?.get(cond.class)?;
        if rows.is_empty() {
            None
        } else {
            Some(rows[rng.random_range(0..rows.len())])
        }
    }

    /// Derives the condition a given training row satisfies on `segment`.
    pub fn condition_of_row(&self, data: &EncodedTable, row: usize, segment: usize) -> CondVector {
        let class = data.segment_classes[segment][row];
        let seg = &self.stats.segments[segment];
        cond_for_segment(self.stats.cond_width, segment, seg, class)
    }
}

/// Training-by-sampling draw: uniform segment, class by `ln(1 + count)`.
pub fn sample_condition<R: Rng + ?Sized>(stats: &FreqStats, rng: &mut R) -> Result<CondVector> {
    Ok(ConditionSampler::from_stats(stats.clone())?.sample(ClassWeighting::LogFrequency, rng))
}

/// Cross-entropy between the condition mask and the generated
/// distribution of the selected segment. `generated` is a full encoded
/// row whose one-hot segments hold probabilities.
pub fn generator_cond_loss(
    generated: &[f64],
    layout: &EncodingLayout,
    cond: &CondVector,
) -> Result<f64> {
    if generated.len() != layout.width {
        return Err(Error::LayoutMismatch {
            expected: layout.width,
            got: generated.len(),
        });
    }
    let seg = layout
        .segments()
        .get(cond.segment)
        .copied()
        .ok_or(Error::InvalidCondition(format!("segment {}", cond.segment)))?;
    let probs = &generated[seg.offset..seg.offset + seg.len];
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-6 || probs.iter().any(|&p| p < 0.0) {
        return Err(Error::NonDistribution(total));
    }
    Ok(-probs[cond.class].max(f64::MIN_POSITIVE).ln())
}
