//! Repair reports and the improvement/drawdown metrics shared by both
//! repair modes.

use std::time::Duration;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{RepairError, Result};
use crate::localizer::NeuronIndex;
use crate::network::Network;
use crate::properties::{satisfies_rows, PropertySpec};
use crate::sampler::{collect_counts, derive_seed};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepairMode {
    Retrain,
    FineTune,
}

/// Held-out negatives and positives of one spec.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSet {
    pub spec_id: String,
    pub negatives: Array2<f64>,
    pub positives: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairReport {
    pub schema_version: u32,
    pub mode: RepairMode,
    /// Fraction of evaluation negatives that now satisfy their spec.
    pub improvement: f64,
    /// Fraction of evaluation positives that now violate their spec.
    pub drawdown: f64,
    pub localization_time_s: f64,
    pub total_time_s: f64,
    pub repaired_neurons: Vec<NeuronIndex>,
    pub eval_negatives: usize,
    pub eval_positives: usize,
    /// Training epochs (retraining) or swarm iterations (fine-tuning).
    pub iterations: usize,
    pub stop_reason: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub notes: Vec<String>,
}

impl RepairReport {
    pub fn new(mode: RepairMode, seed: u64) -> Self {
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            mode,
            improvement: 0.0,
            drawdown: 0.0,
            localization_time_s: 0.0,
            total_time_s: 0.0,
            repaired_neurons: Vec::new(),
            eval_negatives: 0,
            eval_positives: 0,
            iterations: 0,
            stop_reason: String::new(),
            seed,
            config: serde_json::Value::Null,
            notes: Vec::new(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Seconds rounded to milliseconds.
pub fn seconds(d: Duration) -> f64 {
    (d.as_secs_f64() * 1000.0).round() / 1000.0
}

pub(crate) fn spec_by_id<'a>(specs: &'a [PropertySpec], id: &str) -> Result<&'a PropertySpec> {
    specs
        .iter()
        .find(|s| s.id == id)
        .ok_or_else(|| RepairError::InvalidProperty(format!("no spec with id `{id}`")))
}

fn count_satisfying(net: &Network, spec: &PropertySpec, xs: ArrayView2<f64>) -> Result<usize> {
    if xs.nrows() == 0 {
        return Ok(0);
    }
    let ys = net.forward_batch(xs)?;
    Ok(satisfies_rows(&spec.post, ys.view()).into_iter().filter(|&b| b).count())
}

/// Counts behind improvement and drawdown for one network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OutcomeCounts {
    pub negatives: usize,
    pub negatives_fixed: usize,
    pub positives: usize,
    pub positives_broken: usize,
}

impl OutcomeCounts {
    /// Improvement; 1 when there is nothing to repair.
    pub fn improvement(&self) -> f64 {
        if self.negatives == 0 {
            1.0
        } else {
            self.negatives_fixed as f64 / self.negatives as f64
        }
    }

    pub fn drawdown(&self) -> f64 {
        if self.positives == 0 {
            0.0
        } else {
            self.positives_broken as f64 / self.positives as f64
        }
    }
}

/// Count fixed negatives and broken positives of `net` on `sets`.
pub fn outcome_counts(net: &Network, specs: &[PropertySpec], sets: &[EvalSet]) -> Result<OutcomeCounts> {
    let mut c = OutcomeCounts::default();
    for set in sets {
        let spec = spec_by_id(specs, &set.spec_id)?;
        c.negatives += set.negatives.nrows();
        c.negatives_fixed += count_satisfying(net, spec, set.negatives.view())?;
        c.positives += set.positives.nrows();
        c.positives_broken += set.positives.nrows() - count_satisfying(net, spec, set.positives.view())?;
    }
    Ok(c)
}

/// Fresh held-out negatives and in-box positives for each spec in
/// `spec_indices`. Missing negatives are tolerated; positives come from the
/// box only.
pub fn collect_eval_sets(
    net: &Network,
    specs: &[PropertySpec],
    spec_indices: &[usize],
    n_negatives: usize,
    n_positives: usize,
    max_draws: usize,
    seed: u64,
) -> Result<Vec<EvalSet>> {
    let mut out = Vec::with_capacity(spec_indices.len());
    for &i in spec_indices {
        let spec = &specs[i];
        let set = collect_counts(
            net,
            spec,
            n_negatives,
            n_positives,
            max_draws,
            &[0.0],
            None,
            derive_seed(seed, i as u64),
        );
        let set = match set {
            Ok(s) => s,
            // same seed and draws, so this keeps exactly the positives found
            Err(RepairError::PositivesUnavailable { found, .. }) => collect_counts(
                net,
                spec,
                n_negatives,
                found,
                max_draws,
                &[0.0],
                None,
                derive_seed(seed, i as u64),
            )?,
            Err(e) => return Err(e),
        };
        out.push(EvalSet {
            spec_id: spec.id.clone(),
            positives: set.in_box_positives(),
            negatives: set.negatives,
        });
    }
    Ok(out)
}

/// Improvement and drawdown of `after` relative to `before`. Only points
/// whose polarity under `before` matches their set are counted.
pub fn evaluate(
    before: &Network,
    after: &Network,
    specs: &[PropertySpec],
    sets: &[EvalSet],
    mode: RepairMode,
    seed: u64,
) -> Result<RepairReport> {
    let mut filtered = Vec::with_capacity(sets.len());
    let mut dropped = 0;
    for set in sets {
        let spec = spec_by_id(specs, &set.spec_id)?;
        let keep = |xs: &Array2<f64>, want: bool| -> Result<Array2<f64>> {
            if xs.nrows() == 0 {
                return Ok(xs.clone());
            }
            let ys = before.forward_batch(xs.view())?;
            let ok = satisfies_rows(&spec.post, ys.view());
            let idx: Vec<usize> = (0..ok.len()).filter(|&i| ok[i] == want).collect();
            Ok(xs.select(ndarray::Axis(0), &idx))
        };
        let negatives = keep(&set.negatives, false)?;
        let positives = keep(&set.positives, true)?;
        dropped += set.negatives.nrows() - negatives.nrows() + set.positives.nrows() - positives.nrows();
        filtered.push(EvalSet {
            spec_id: set.spec_id.clone(),
            negatives,
            positives,
        });
    }
    let counts = outcome_counts(after, specs, &filtered)?;
    let mut report = RepairReport::new(mode, seed);
    report.improvement = counts.improvement();
    report.drawdown = counts.drawdown();
    report.eval_negatives = counts.negatives;
    report.eval_positives = counts.positives;
    if dropped > 0 {
        report.notes.push(format!(
            "{dropped} evaluation points did not match their polarity under the original network and were ignored"
        ));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Activation, Layer};
    use crate::properties::{InputDomain, LinearAtom, OutputCondition};
    use ndarray::array;

    fn spec() -> PropertySpec {
        PropertySpec {
            id: "p".into(),
            pre: InputDomain::new(vec![-10.0], vec![10.0]).unwrap(),
            post: OutputCondition::all_of(vec![LinearAtom {
                coeffs: vec![1.0],
                rhs: 0.0,
                strict: false,
            }]),
        }
    }

    fn spec2() -> PropertySpec {
        PropertySpec {
            id: "p".into(),
            pre: InputDomain::new(vec![-10.0; 2], vec![10.0; 2]).unwrap(),
            post: spec().post,
        }
    }

    fn affine(w: [f64; 2], b: f64) -> Network {
        Network::new(vec![Layer::new(array![[w[0], w[1]]], array![b])], Activation::Relu).unwrap()
    }

    fn sets() -> Vec<EvalSet> {
        vec![EvalSet {
            spec_id: "p".into(),
            negatives: array![[1.0, 0.0], [0.0, 1.0]],
            positives: array![[-1.0, 0.0], [0.0, -1.0]],
        }]
    }

    #[test]
    fn unchanged_network() {
        let net = affine([1.0, 1.0], 0.0);
        let r = evaluate(&net, &net, &[spec2()], &sets(), RepairMode::FineTune, 0).unwrap();
        assert_eq!(r.improvement, 0.0);
        assert_eq!(r.drawdown, 0.0);
        assert_eq!((r.eval_negatives, r.eval_positives), (2, 2));
    }

    #[test]
    fn one_fixed_one_broken() {
        // y = x0 + x1 before, y = x1 - x0 after
        let before = affine([1.0, 1.0], 0.0);
        let after = affine([-1.0, 1.0], 0.0);
        let r = evaluate(&before, &after, &[spec2()], &sets(), RepairMode::Retrain, 0).unwrap();
        assert_eq!(r.improvement, 0.5);
        assert_eq!(r.drawdown, 0.5);
    }

    #[test]
    fn mislabeled_points_are_ignored() {
        let before = affine([1.0, 1.0], 0.0);
        let mut s = sets();
        s[0].negatives = array![[1.0, 0.0], [-1.0, -1.0]];
        let r = evaluate(&before, &before, &[spec2()], &s, RepairMode::Retrain, 0).unwrap();
        assert_eq!(r.eval_negatives, 1);
        assert_eq!(r.notes.len(), 1);
    }

    #[test]
    fn nothing_to_repair_counts_as_full_improvement() {
        assert_eq!(OutcomeCounts::default().improvement(), 1.0);
        assert_eq!(OutcomeCounts::default().drawdown(), 0.0);
    }

    #[test]
    fn json_round_trip() {
        let mut r = RepairReport::new(RepairMode::FineTune, 42);
        r.improvement = 0.75;
        r.repaired_neurons = vec![NeuronIndex::new(2, 3)];
        r.config = serde_json::json!({"alpha": 0.6});
        let back = RepairReport::from_json(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn rounding() {
        assert_eq!(seconds(Duration::from_micros(15_951_400)), 15.951);
    }
}
