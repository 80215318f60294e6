//! Fault localization by behavior difference.
//!
//! A neuron's responsibility measures how far its post-activation values on
//! negative samples sit from its values on positive samples. Two scores are
//! provided:
//!
//! * [`responsibility_exact`]: the sum of all pairwise absolute differences
//!   between negative and positive states. Computed per neuron from sorted
//!   prefix sums, so it costs `O((|S_n| + |S_p|) log(|S_n| + |S_p|))` rather
//!   than a double loop.
//! * [`responsibility_fast`]: the absolute difference of the per-set sums
//!   (by default the per-set means). This is not the same quantity as the
//!   exact score: opposite-signed gaps cancel inside the sums.

use std::io::Write as _;
use std::path::Path;

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{RepairError, Result};
use crate::network::Network;

/// A neuron in a non-input layer: `layer` is in `1..num_states`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NeuronIndex {
    pub layer: usize,
    pub neuron: usize,
}

impl NeuronIndex {
    pub fn new(layer: usize, neuron: usize) -> Self {
        Self { layer, neuron }
    }
}

/// Per-neuron responsibility scores; `rows[i - 1]` belongs to layer `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponsibilityMatrix {
    pub rows: Vec<Vec<f64>>,
}

impl ResponsibilityMatrix {
    pub fn zeros_like(net: &Network) -> Self {
        Self {
            rows: net.layer_sizes()[1..].iter().map(|&d| vec![0.0; d]).collect(),
        }
    }

    pub fn num_layers(&self) -> usize {
        self.rows.len()
    }

    pub fn get(&self, idx: NeuronIndex) -> f64 {
        self.rows[idx.layer - 1][idx.neuron]
    }

    /// Element-wise accumulation.
    pub fn add_assign(&mut self, other: &ResponsibilityMatrix) -> Result<()> {
        if self.rows.len() != other.rows.len()
            || self.rows.iter().zip(&other.rows).any(|(a, b)| a.len() != b.len())
        {
            return Err(RepairError::Shape {
                expected: self.rows.len(),
                got: other.rows.len(),
                context: "responsibility matrix shapes",
            });
        }
        for (a, b) in self.rows.iter_mut().zip(&other.rows) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (NeuronIndex, f64)> + '_ {
        self.rows.iter().enumerate().flat_map(|(l, row)| {
            row.iter()
                .enumerate()
                .map(move |(j, &s)| (NeuronIndex::new(l + 1, j), s))
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("layer,neuron,score\n");
        for (idx, s) in self.iter() {
            out.push_str(&format!("{},{},{}\n", idx.layer, idx.neuron, s));
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }

    /// Parse the `layer,neuron,score` dump back into a matrix.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (i, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            let bad = || RepairError::InvalidConfig(format!("responsibility CSV line {}", i + 1));
            if cols.len() != 3 {
                return Err(bad());
            }
            let layer: usize = cols[0].parse().map_err(|_| bad())?;
            let neuron: usize = cols[1].parse().map_err(|_| bad())?;
            let score: f64 = cols[2].parse().map_err(|_| bad())?;
            if layer == 0 {
                return Err(bad());
            }
            if rows.len() < layer {
                rows.resize(layer, Vec::new());
            }
            let row = &mut rows[layer - 1];
            if row.len() != neuron {
                return Err(bad());
            }
            row.push(score);
        }
        Ok(Self { rows })
    }
}

/// How the fast score combines the two sums.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FastScaling {
    /// `|mean_n - mean_p|`
    #[default]
    Normalized,
    /// `|sum_n - sum_p|`
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum LocalizationMode {
    Exact,
    Fast { scaling: FastScaling },
}

impl Default for LocalizationMode {
    fn default() -> Self {
        LocalizationMode::Fast {
            scaling: FastScaling::Normalized,
        }
    }
}

fn traces(
    net: &Network,
    positives: ArrayView2<f64>,
    negatives: ArrayView2<f64>,
) -> Result<(Vec<Array2<f64>>, Vec<Array2<f64>>)> {
    if positives.nrows() == 0 {
        return Err(RepairError::EmptySampleSet("positive samples"));
    }
    if negatives.nrows() == 0 {
        return Err(RepairError::EmptySampleSet("negative samples"));
    }
    Ok((net.trace_batch(positives)?, net.trace_batch(negatives)?))
}

/// `sum_{a in neg} sum_{b in pos} |a - b|` for scalars, via sorting.
fn pairwise_abs_sum(neg: &[f64], pos: &[f64]) -> f64 {
    let mut sorted_pos = pos.to_vec();
    sorted_pos.sort_by(|a, b| a.total_cmp(b));
    let mut prefix = Vec::with_capacity(sorted_pos.len() + 1);
    prefix.push(0.0);
    for v in &sorted_pos {
        prefix.push(prefix.last().unwrap() + v);
    }
    let total = *prefix.last().unwrap();
    let p = sorted_pos.len() as f64;
    neg.iter()
        .map(|&a| {
            let below = sorted_pos.partition_point(|&b| b < a);
            let below_sum = prefix[below];
            let k = below as f64;
            (a * k - below_sum) + ((total - below_sum) - a * (p - k))
        })
        .sum()
}

pub fn responsibility_exact(
    net: &Network,
    positives: ArrayView2<f64>,
    negatives: ArrayView2<f64>,
) -> Result<ResponsibilityMatrix> {
    let (tp, tn) = traces(net, positives, negatives)?;
    let rows = (1..net.num_states())
        .map(|layer| {
            let (sp, sn) = (&tp[layer], &tn[layer]);
            (0..sp.ncols())
                .map(|j| {
                    let pos: Vec<f64> = sp.column(j).to_vec();
                    let neg: Vec<f64> = sn.column(j).to_vec();
                    pairwise_abs_sum(&neg, &pos)
                })
                .collect()
        })
        .collect();
    Ok(ResponsibilityMatrix { rows })
}

pub fn responsibility_fast(
    net: &Network,
    positives: ArrayView2<f64>,
    negatives: ArrayView2<f64>,
    scaling: FastScaling,
) -> Result<ResponsibilityMatrix> {
    let (tp, tn) = traces(net, positives, negatives)?;
    let (np, nn) = (positives.nrows() as f64, negatives.nrows() as f64);
    let rows = (1..net.num_states())
        .map(|layer| {
            let sum_p = tp[layer].sum_axis(Axis(0));
            let sum_n = tn[layer].sum_axis(Axis(0));
            sum_n
                .iter()
                .zip(sum_p.iter())
                .map(|(&a, &b)| match scaling {
                    FastScaling::Normalized => (a / nn - b / np).abs(),
                    FastScaling::Raw => (a - b).abs(),
                })
                .collect()
        })
        .collect();
    Ok(ResponsibilityMatrix { rows })
}

pub fn responsibility(
    net: &Network,
    positives: ArrayView2<f64>,
    negatives: ArrayView2<f64>,
    mode: LocalizationMode,
) -> Result<ResponsibilityMatrix> {
    match mode {
        LocalizationMode::Exact => responsibility_exact(net, positives, negatives),
        LocalizationMode::Fast { scaling } => responsibility_fast(net, positives, negatives, scaling),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub neurons: Vec<NeuronIndex>,
    /// Fewer neurons were available than requested.
    pub truncated: bool,
}

/// The `r` highest-scoring neurons, optionally from one layer only. Ties go
/// to the lower `(layer, neuron)`; the result is sorted by descending score.
pub fn select_top(
    matrix: &ResponsibilityMatrix,
    r: usize,
    layer_filter: Option<usize>,
) -> Result<Selection> {
    if r == 0 {
        return Err(RepairError::InvalidConfig("must select at least one neuron".into()));
    }
    if let Some(l) = layer_filter {
        if l == 0 || l > matrix.num_layers() {
            return Err(RepairError::InvalidConfig(format!(
                "layer filter {l} outside 1..={}",
                matrix.num_layers()
            )));
        }
    }
    let mut candidates: Vec<(NeuronIndex, f64)> = matrix
        .iter()
        .filter(|(idx, _)| layer_filter.is_none_or(|l| idx.layer == l))
        .collect();
    candidates.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let truncated = candidates.len() < r;
    candidates.truncate(r);
    Ok(Selection {
        neurons: candidates.into_iter().map(|(i, _)| i).collect(),
        truncated,
    })
}
