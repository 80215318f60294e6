//! Retraining repair.
//!
//! Negative outputs are relabeled with nearby positive outputs, and the
//! network is retrained on `alpha * L_drp + beta * L_mpr` by mini-batch SGD.
//! `L_drp` measures the repair pairs and `L_mpr` a self-labeled preservation
//! set.

use std::time::Instant;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{RepairError, Result};
use crate::network::{LossNorm, Network};
use crate::properties::{satisfies_rows, InputDomain, OutputCondition, PropertySpec};
use crate::report::{
    collect_eval_sets, evaluate, outcome_counts, seconds, spec_by_id, EvalSet, OutcomeCounts,
    RepairMode, RepairReport,
};
use crate::sampler::{
    collect_counts, derive_seed, extract_negative_domains, geometric_delta_schedule, rebalance,
    sample_uniform, seeded_rng, LabeledSampleSet,
};

/// Relabel each negative output with the mean of its `k` nearest positive
/// outputs, or with the single nearest positive output when that mean
/// violates `post`. Ties in distance go to the lower index.
pub fn negative_correct(
    positive_outputs: ArrayView2<f64>,
    negative_outputs: ArrayView2<f64>,
    k: usize,
    post: &OutputCondition,
    metric: LossNorm,
) -> Result<Array2<f64>> {
    if positive_outputs.nrows() == 0 {
        return Err(RepairError::CorrectionImpossible(
            "no positive outputs to imitate".into(),
        ));
    }
    if k == 0 {
        return Err(RepairError::InvalidConfig("k must be at least 1".into()));
    }
    let n = positive_outputs.ncols();
    if negative_outputs.ncols() != n {
        return Err(RepairError::Shape {
            expected: n,
            got: negative_outputs.ncols(),
            context: "negative output width",
        });
    }
    post.validate(n)?;
    let k = k.min(positive_outputs.nrows());
    let rows: Vec<Result<Vec<f64>>> = (0..negative_outputs.nrows())
        .into_par_iter()
        .map(|i| correct_one(positive_outputs, negative_outputs.row(i), k, post, metric))
        .collect();
    let mut out = Array2::zeros((negative_outputs.nrows(), n));
    for (i, row) in rows.into_iter().enumerate() {
        out.row_mut(i).assign(&ArrayView1::from(&row?));
    }
    Ok(out)
}

fn correct_one(
    pos: ArrayView2<f64>,
    y: ArrayView1<f64>,
    k: usize,
    post: &OutputCondition,
    metric: LossNorm,
) -> Result<Vec<f64>> {
    let mut order: Vec<(f64, usize)> = pos
        .outer_iter()
        .enumerate()
        .map(|(j, p)| (metric.distance(p, y), j))
        .collect();
    let by_distance = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < order.len() {
        order.select_nth_unstable_by(k - 1, by_distance);
        order.truncate(k);
    }
    order.sort_by(by_distance);
    let mut mean = vec![0.0; pos.ncols()];
    for &(_, j) in &order {
        for (m, v) in mean.iter_mut().zip(pos.row(j)) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= k as f64;
    }
    if post.holds(&mean) {
        return Ok(mean);
    }
    let nearest = pos.row(order[0].1).to_vec();
    if post.holds(&nearest) {
        Ok(nearest)
    } else {
        Err(RepairError::CorrectionImpossible(
            "nearest positive output violates the post-condition".into(),
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    OriginalPositive,
    CorrectedNegative,
    PreservationSample,
}

/// Input/target pairs with where each pair came from.
#[derive(Debug, Clone, PartialEq)]
pub struct RepairDataset {
    pub inputs: Array2<f64>,
    pub targets: Array2<f64>,
    pub provenance: Vec<Provenance>,
    /// Spec each pair was produced for; `None` for preservation samples.
    pub spec_ids: Vec<Option<String>>,
}

impl RepairDataset {
    pub fn empty(input_dim: usize, output_dim: usize) -> Self {
        Self {
            inputs: Array2::zeros((0, input_dim)),
            targets: Array2::zeros((0, output_dim)),
            provenance: Vec::new(),
            spec_ids: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn count(&self, p: Provenance) -> usize {
        self.provenance.iter().filter(|&&q| q == p).count()
    }

    fn extend(&mut self, inputs: ArrayView2<f64>, targets: ArrayView2<f64>, p: Provenance, spec: Option<&str>) {
        if inputs.nrows() == 0 {
            return;
        }
        self.inputs = ndarray::concatenate![Axis(0), self.inputs.view(), inputs];
        self.targets = ndarray::concatenate![Axis(0), self.targets.view(), targets];
        self.provenance.extend(std::iter::repeat_n(p, inputs.nrows()));
        self.spec_ids
            .extend(std::iter::repeat_n(spec.map(str::to_owned), inputs.nrows()));
    }

    /// Self-labeled pairs `(x, N(x))`.
    pub fn preservation(net: &Network, inputs: ArrayView2<f64>) -> Result<Self> {
        let mut d = Self::empty(net.input_dim(), net.output_dim());
        if inputs.nrows() > 0 {
            let ys = net.forward_batch(inputs)?;
            d.extend(inputs, ys.view(), Provenance::PreservationSample, None);
        }
        Ok(d)
    }
}

/// Positives keep their own outputs; negatives get corrected labels.
pub fn build_repair_dataset(
    collections: &[LabeledSampleSet],
    specs: &[PropertySpec],
    k: usize,
    metric: LossNorm,
) -> Result<RepairDataset> {
    let first = collections
        .first()
        .ok_or(RepairError::EmptySampleSet("sample collections"))?;
    let mut d = RepairDataset::empty(first.positives.ncols(), first.positive_outputs.ncols());
    for c in collections {
        let spec = spec_by_id(specs, &c.spec_id)?;
        if c.num_positives() == 0 {
            return Err(RepairError::CorrectionImpossible(format!(
                "spec `{}` has no positive samples",
                c.spec_id
            )));
        }
        d.extend(
            c.positives.view(),
            c.positive_outputs.view(),
            Provenance::OriginalPositive,
            Some(&c.spec_id),
        );
        if c.num_negatives() > 0 {
            let labels = negative_correct(
                c.positive_outputs.view(),
                c.negative_outputs.view(),
                k,
                &spec.post,
                metric,
            )?;
            d.extend(
                c.negatives.view(),
                labels.view(),
                Provenance::CorrectedNegative,
                Some(&c.spec_id),
            );
        }
    }
    Ok(d)
}

/// `sum_i norm(N(x_i) - t_i)`.
pub fn dataset_loss(net: &Network, d: &RepairDataset, norm: LossNorm) -> Result<f64> {
    if d.is_empty() {
        return Ok(0.0);
    }
    let ys = net.forward_batch(d.inputs.view())?;
    Ok(ys
        .outer_iter()
        .zip(d.targets.outer_iter())
        .map(|(y, t)| norm.distance(y, t))
        .sum())
}

pub fn loss_drp(net: &Network, d_re: &RepairDataset, norm: LossNorm) -> Result<f64> {
    if d_re.is_empty() {
        return Err(RepairError::EmptySampleSet("repair dataset"));
    }
    dataset_loss(net, d_re, norm)
}

pub fn loss_mpr(net: &Network, d: &RepairDataset, norm: LossNorm) -> Result<f64> {
    dataset_loss(net, d, norm)
}

pub fn total_loss(
    net: &Network,
    d_re: &RepairDataset,
    d: &RepairDataset,
    alpha: f64,
    beta: f64,
    norm: LossNorm,
) -> Result<f64> {
    Ok(alpha * loss_drp(net, d_re, norm)? + beta * loss_mpr(net, d, norm)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrainConfig {
    pub alpha: f64,
    pub beta: f64,
    pub k: usize,
    pub norm: LossNorm,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub early_stop_window: usize,
    pub early_stop_tolerance: f64,
    /// Rescale each mini-batch gradient to at most this Euclidean norm.
    pub clip_norm: Option<f64>,
    pub seed: u64,
}

impl Default for RetrainConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            beta: 0.5,
            k: 5,
            norm: LossNorm::L2,
            learning_rate: 1e-3,
            batch_size: 64,
            max_epochs: 200,
            early_stop_window: 10,
            early_stop_tolerance: 1e-6,
            clip_norm: Some(100.0),
            seed: 42,
        }
    }
}

impl RetrainConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !unit(self.alpha) || !unit(self.beta) || (self.alpha + self.beta - 1.0).abs() > 1e-12 {
            return Err(RepairError::InvalidConfig(format!(
                "alpha and beta must lie in [0, 1] and sum to 1 (got {} and {})",
                self.alpha, self.beta
            )));
        }
        if self.k == 0 || self.batch_size == 0 || self.max_epochs == 0 || self.early_stop_window == 0 {
            return Err(RepairError::InvalidConfig(
                "k, batch size, epochs and early-stop window must be positive".into(),
            ));
        }
        if matches!(self.clip_norm, Some(c) if !(c > 0.0)) {
            return Err(RepairError::InvalidConfig("clip norm must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(RepairError::InvalidConfig("learning rate must be positive".into()));
        }
        Ok(())
    }
}

/// Result of [`retrain`], measured on the monitor sets.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrainOutcome {
    pub epochs: usize,
    pub best_epoch: usize,
    pub stop_reason: String,
    pub counts: OutcomeCounts,
    pub loss_history: Vec<f64>,
}

fn better(a: &OutcomeCounts, b: &OutcomeCounts, tol: f64) -> bool {
    let (ia, ib) = (a.improvement(), b.improvement());
    ia > ib + tol || ((ia - ib).abs() <= tol && a.drawdown() < b.drawdown() - tol)
}

/// Mini-batch SGD on `alpha * L_drp + beta * L_mpr`, starting from `net`.
///
/// After every epoch improvement is measured on `monitor`. Training stops
/// when every monitored negative is fixed, when improvement has not moved
/// for `early_stop_window` epochs, or at `max_epochs`. The checkpoint with
/// the best improvement (then lowest drawdown) is returned.
pub fn retrain(
    net: &Network,
    d: &RepairDataset,
    d_re: &RepairDataset,
    cfg: &RetrainConfig,
    specs: &[PropertySpec],
    monitor: &[EvalSet],
) -> Result<(Network, RetrainOutcome)> {
    cfg.validate()?;
    let initial = total_loss(net, d_re, d, cfg.alpha, cfg.beta, cfg.norm)?;
    let start_counts = outcome_counts(net, specs, monitor)?;
    let mut outcome = RetrainOutcome {
        epochs: 0,
        best_epoch: 0,
        stop_reason: String::new(),
        counts: start_counts,
        loss_history: vec![initial],
    };
    if loss_drp(net, d_re, cfg.norm)? == 0.0 {
        outcome.stop_reason = "converged".into();
        return Ok((net.clone(), outcome));
    }
    let mut items: Vec<(bool, usize)> = (0..d_re.len())
        .map(|i| (true, i))
        .chain((0..d.len()).map(|i| (false, i)))
        .collect();
    let mut rng = seeded_rng(cfg.seed);
    let mut cur = net.clone();
    let mut best = net.clone();
    let mut best_counts = start_counts;
    let mut prev_imp = start_counts.improvement();
    let mut stable = 0;
    for epoch in 1..=cfg.max_epochs {
        items.shuffle(&mut rng);
        for chunk in items.chunks(cfg.batch_size) {
            let re: Vec<usize> = chunk.iter().filter(|c| c.0).map(|c| c.1).collect();
            let pr: Vec<usize> = chunk.iter().filter(|c| !c.0).map(|c| c.1).collect();
            let mut grad = None;
            for (rows, data, w) in [(&re, d_re, cfg.alpha), (&pr, d, cfg.beta)] {
                if rows.is_empty() || w == 0.0 {
                    continue;
                }
                let g = cur
                    .gradient(
                        data.inputs.select(Axis(0), rows).view(),
                        data.targets.select(Axis(0), rows).view(),
                        cfg.norm,
                    )?
                    .scaled(w);
                match grad.as_mut() {
                    None => grad = Some(g),
                    Some(acc) => acc.add_scaled(&g, 1.0),
                }
            }
            if let Some(mut g) = grad {
                if let Some(c) = cfg.clip_norm {
                    let n = g.norm();
                    if n > c {
                        g = g.scaled(c / n);
                    }
                }
                cur.apply_gradient(&g, cfg.learning_rate);
            }
        }
        let loss = total_loss(&cur, d_re, d, cfg.alpha, cfg.beta, cfg.norm)?;
        if !loss.is_finite() {
            return Err(RepairError::Diverged { epoch, loss });
        }
        outcome.loss_history.push(loss);
        outcome.epochs = epoch;
        let counts = outcome_counts(&cur, specs, monitor)?;
        // without monitored negatives the latest weights are the checkpoint
        if counts.negatives == 0 || better(&counts, &best_counts, cfg.early_stop_tolerance) {
            best = cur.clone();
            best_counts = counts;
            outcome.best_epoch = epoch;
        }
        if counts.negatives > 0 && counts.negatives_fixed == counts.negatives {
            outcome.stop_reason = "all_negatives_fixed".into();
            break;
        }
        let imp = counts.improvement();
        if (imp - prev_imp).abs() <= cfg.early_stop_tolerance {
            stable += 1;
        } else {
            stable = 0;
        }
        prev_imp = imp;
        if stable >= cfg.early_stop_window {
            outcome.stop_reason = "early_stop".into();
            break;
        }
    }
    if outcome.stop_reason.is_empty() {
        outcome.stop_reason = "max_epochs".into();
    }
    outcome.counts = best_counts;
    Ok((best, outcome))
}

/// Sample sizes for the end-to-end retraining run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrainRunConfig {
    pub retrain: RetrainConfig,
    /// Training samples per spec, split by `negative_fraction`.
    pub train_samples: usize,
    pub negative_fraction: f64,
    pub preservation_samples: usize,
    /// Region the preservation set is drawn from; defaults to the bounding
    /// box of all spec boxes.
    pub preservation_domain: Option<InputDomain>,
    pub eval_negatives: usize,
    pub eval_positives: usize,
    pub probe_samples: usize,
    pub max_draws: usize,
}

impl Default for RetrainRunConfig {
    fn default() -> Self {
        Self {
            retrain: RetrainConfig::default(),
            train_samples: 10_000,
            negative_fraction: 0.1,
            preservation_samples: 10_000,
            preservation_domain: None,
            eval_negatives: 5_000,
            eval_positives: 5_000,
            probe_samples: 10_000,
            max_draws: 2_000_000,
        }
    }
}

pub(crate) fn bounding_box(specs: &[PropertySpec]) -> Result<InputDomain> {
    let first = specs.first().ok_or(RepairError::EmptySampleSet("specs"))?;
    let mut lo = first.pre.lower.clone();
    let mut hi = first.pre.upper.clone();
    for s in &specs[1..] {
        for j in 0..lo.len() {
            lo[j] = lo[j].min(s.pre.lower[j]);
            hi[j] = hi[j].max(s.pre.upper[j]);
        }
    }
    InputDomain::new(lo, hi)
}

/// Uniform draws from `domain` that satisfy every spec whose box contains
/// them.
pub fn sample_preservation_inputs(
    net: &Network,
    specs: &[PropertySpec],
    domain: &InputDomain,
    count: usize,
    seed: u64,
) -> Result<Array2<f64>> {
    let xs = sample_uniform(domain, count, seed)?;
    if count == 0 {
        return Ok(xs);
    }
    let ys = net.forward_batch(xs.view())?;
    let mut keep = vec![true; count];
    for spec in specs {
        let ok = satisfies_rows(&spec.post, ys.view());
        for i in 0..count {
            if !ok[i] && spec.pre.contains(&xs.row(i).to_vec()) {
                keep[i] = false;
            }
        }
    }
    let idx: Vec<usize> = (0..count).filter(|&i| keep[i]).collect();
    Ok(xs.select(Axis(0), &idx))
}

/// Sample, relabel, retrain and evaluate on fresh held-out sets.
pub fn repair_retrain(
    net: &Network,
    specs: &[PropertySpec],
    run: &RetrainRunConfig,
) -> Result<(Network, RepairReport)> {
    let started = Instant::now();
    run.retrain.validate()?;
    if !(run.negative_fraction > 0.0 && run.negative_fraction < 1.0) {
        return Err(RepairError::InvalidConfig(
            "negative fraction must lie in (0, 1)".into(),
        ));
    }
    let seed = run.retrain.seed;
    let negative = extract_negative_domains(net, specs, run.probe_samples, derive_seed(seed, 1))?;
    let mut report_config = serde_json::to_value(run)?;
    if negative.is_empty() {
        let mut report = RepairReport::new(RepairMode::Retrain, seed);
        report.improvement = 1.0;
        report.stop_reason = "no_negatives_found".into();
        report.config = report_config;
        report.total_time_s = seconds(started.elapsed());
        return Ok((net.clone(), report));
    }
    let n_neg = ((run.train_samples as f64) * run.negative_fraction).round().max(1.0) as usize;
    let n_pos = run.train_samples.saturating_sub(n_neg).max(1);
    let mut collections = Vec::with_capacity(negative.len());
    let mut notes = Vec::new();
    for &i in &negative {
        let spec = &specs[i];
        let set = collect_counts(
            net,
            spec,
            n_neg,
            n_pos,
            run.max_draws,
            &geometric_delta_schedule(&spec.pre, 10),
            run.preservation_domain.as_ref(),
            derive_seed(seed, 100 + i as u64),
        )?;
        let set = if set.num_negatives() < n_neg && set.num_negatives() > 0 {
            notes.push(format!(
                "spec `{}`: {} of {} requested negatives found, oversampled",
                spec.id,
                set.num_negatives(),
                n_neg
            ));
            rebalance(&set, run.negative_fraction, derive_seed(seed, 200 + i as u64))?.0
        } else {
            set
        };
        collections.push(set);
    }
    let d_re = build_repair_dataset(&collections, specs, run.retrain.k, run.retrain.norm)?;
    let domain = match &run.preservation_domain {
        Some(d) => d.clone(),
        None => bounding_box(specs)?,
    };
    let pres = sample_preservation_inputs(net, specs, &domain, run.preservation_samples, derive_seed(seed, 2))?;
    let d = RepairDataset::preservation(net, pres.view())?;
    let monitor: Vec<EvalSet> = collections
        .iter()
        .map(|c| EvalSet {
            spec_id: c.spec_id.clone(),
            negatives: c.negatives.clone(),
            positives: c.in_box_positives(),
        })
        .collect();
    let (repaired, outcome) = retrain(net, &d, &d_re, &run.retrain, specs, &monitor)?;
    let eval = collect_eval_sets(
        net,
        specs,
        &negative,
        run.eval_negatives,
        run.eval_positives,
        run.max_draws,
        derive_seed(seed, 3),
    )?;
    let mut report = evaluate(net, &repaired, specs, &eval, RepairMode::Retrain, seed)?;
    report.iterations = outcome.epochs;
    report.stop_reason = outcome.stop_reason;
    report.notes.extend(notes);
    if let serde_json::Value::Object(m) = &mut report_config {
        m.insert("repair_pairs".into(), d_re.len().into());
        m.insert("preservation_pairs".into(), d.len().into());
        m.insert("best_epoch".into(), outcome.best_epoch.into());
    }
    report.config = report_config;
    report.total_time_s = seconds(started.elapsed());
    Ok((repaired, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Activation, Layer};
    use crate::properties::LinearAtom;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;

    /// `y_j >= t`
    fn at_least(n: usize, j: usize, t: f64) -> OutputCondition {
        let mut coeffs = vec![0.0; n];
        coeffs[j] = -1.0;
        OutputCondition::all_of(vec![LinearAtom {
            coeffs,
            rhs: -t,
            strict: false,
        }])
    }

    #[test]
    fn k_nearest_mean_accepted() {
        let yp = array![[0.0, 2.0], [0.0, 4.0]];
        let yn = array![[0.0, 0.0]];
        let yc = negative_correct(yp.view(), yn.view(), 2, &at_least(2, 1, 1.0), LossNorm::L2).unwrap();
        assert_eq!(yc, array![[0.0, 3.0]]);
    }

    #[test]
    fn violating_mean_falls_back_to_nearest() {
        let yp = array![[2.0, 0.0], [-2.0, 0.0]];
        let yn = array![[0.0, 0.1]];
        let yc = negative_correct(yp.view(), yn.view(), 2, &at_least(2, 0, 1.0), LossNorm::L2).unwrap();
        // equal distances, lower index wins
        assert_eq!(yc, array![[2.0, 0.0]]);
    }

    #[test]
    fn k_one_is_nearest() {
        let yp = array![[5.0], [1.0], [3.0]];
        let yn = array![[2.9], [0.0]];
        let yc = negative_correct(yp.view(), yn.view(), 1, &at_least(1, 0, 0.0), LossNorm::L1).unwrap();
        assert_eq!(yc, array![[3.0], [1.0]]);
    }

    #[test]
    fn no_positives_is_an_error() {
        let yp = Array2::<f64>::zeros((0, 2));
        let yn = array![[0.0, 0.0]];
        let e = negative_correct(yp.view(), yn.view(), 3, &at_least(2, 0, 0.0), LossNorm::L2).unwrap_err();
        assert_eq!(e.kind(), "correction_impossible");
    }

    fn tiny() -> (Network, PropertySpec) {
        let net = Network::new(
            vec![
                Layer::new(array![[1.0, -1.0], [0.5, 0.5]], array![0.0, 0.1]),
                Layer::new(array![[1.0, 0.0], [0.0, 1.0]], array![0.0, 0.0]),
            ],
            Activation::Relu,
        )
        .unwrap();
        let spec = PropertySpec {
            id: "s".into(),
            pre: InputDomain::unit(2),
            post: at_least(2, 1, 0.4),
        };
        (net, spec)
    }

    fn collection(net: &Network, spec: &PropertySpec, seed: u64) -> LabeledSampleSet {
        collect_counts(net, spec, 2, 3, 10_000, &[0.0], None, seed).unwrap()
    }

    #[test]
    fn dataset_counts_and_label_safety() {
        let (net, spec) = tiny();
        let c = collection(&net, &spec, 1);
        assert_eq!((c.num_negatives(), c.num_positives()), (2, 3));
        let d = build_repair_dataset(&[c], &[spec.clone()], 5, LossNorm::L2).unwrap();
        assert_eq!(d.len(), 5);
        assert_eq!(d.count(Provenance::CorrectedNegative), 2);
        for i in 0..d.len() {
            if d.provenance[i] == Provenance::CorrectedNegative {
                assert!(spec.post.holds(&d.targets.row(i).to_vec()));
            }
        }
    }

    #[test]
    fn zero_negatives_keeps_self_labels() {
        let (net, spec) = tiny();
        let xs = array![[0.9, 0.9], [0.8, 0.7]];
        let ys = net.forward_batch(xs.view()).unwrap();
        let c = LabeledSampleSet {
            spec_id: "s".into(),
            domain: spec.pre.clone(),
            positives: xs.clone(),
            positive_outputs: ys.clone(),
            negatives: Array2::zeros((0, 2)),
            negative_outputs: Array2::zeros((0, 2)),
            delta_used: 0.0,
            neighbourhood_positives: 0,
        };
        let d = build_repair_dataset(&[c], &[spec], 5, LossNorm::L2).unwrap();
        assert_eq!(d.inputs, xs);
        assert_eq!(d.targets, ys);
        assert_eq!(loss_drp(&net, &d, LossNorm::L2).unwrap(), 0.0);
    }

    #[test]
    fn unit_distance_loss() {
        let net = Network::new(vec![Layer::new(array![[0.0], [0.0]], array![1.0, 0.0])], Activation::Relu).unwrap();
        let mut d = RepairDataset::empty(1, 2);
        d.extend(array![[0.3]].view(), array![[0.0, 0.0]].view(), Provenance::CorrectedNegative, None);
        assert_eq!(loss_drp(&net, &d, LossNorm::L2).unwrap(), 1.0);
        assert_eq!(loss_drp(&net, &d, LossNorm::L1).unwrap(), 1.0);
    }

    #[test]
    fn converged_start_returns_unchanged() {
        let (net, spec) = tiny();
        let xs = array![[0.9, 0.9]];
        let d = RepairDataset::preservation(&net, xs.view()).unwrap();
        let (out, o) = retrain(&net, &d, &d, &RetrainConfig::default(), &[spec], &[]).unwrap();
        assert_eq!(out, net);
        assert_eq!(o.epochs, 0);
    }

    #[test]
    fn alpha_one_ignores_preservation() {
        let (net, spec) = tiny();
        let c = collection(&net, &spec, 3);
        let d_re = build_repair_dataset(&[c], &[spec.clone()], 2, LossNorm::L2).unwrap();
        let pres = RepairDataset::preservation(&net, array![[0.1, 0.9], [0.5, 0.5]].view()).unwrap();
        let mut cfg = RetrainConfig {
            alpha: 1.0,
            beta: 0.0,
            max_epochs: 3,
            batch_size: 1_000,
            clip_norm: None,
            ..Default::default()
        };
        let (a, _) = retrain(&net, &pres, &d_re, &cfg, &[spec.clone()], &[]).unwrap();
        let empty = RepairDataset::empty(2, 2);
        let (b, _) = retrain(&net, &empty, &d_re, &cfg, &[spec.clone()], &[]).unwrap();
        // one full batch equals one step of the pure repair gradient
        cfg.max_epochs = 1;
        let (c, _) = retrain(&net, &pres, &d_re, &cfg, &[spec], &[]).unwrap();
        let mut manual = net.clone();
        let g = net.gradient(d_re.inputs.view(), d_re.targets.view(), LossNorm::L2).unwrap();
        manual.apply_gradient(&g, cfg.learning_rate);
        assert_eq!(a.params_flat(), b.params_flat());
        assert_ne!(a.params_flat(), net.params_flat());
        for (x, y) in c.params_flat().iter().zip(manual.params_flat()) {
            assert_abs_diff_eq!(*x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn invalid_weights_rejected() {
        let cfg = RetrainConfig {
            alpha: 0.7,
            beta: 0.4,
            ..Default::default()
        };
        assert_eq!(cfg.validate().unwrap_err().kind(), "invalid_config");
    }

    #[test]
    fn divergence_reported() {
        let (net, spec) = tiny();
        let c = collection(&net, &spec, 4);
        let d_re = build_repair_dataset(&[c], &[spec.clone()], 2, LossNorm::L2).unwrap();
        let cfg = RetrainConfig {
            learning_rate: 1e150,
            max_epochs: 50,
            clip_norm: None,
            ..Default::default()
        };
        let e = retrain(&net, &d_re, &d_re, &cfg, &[spec], &[]).unwrap_err();
        assert_eq!(e.kind(), "diverged");
    }

    #[test]
    fn deterministic() {
        let (net, spec) = tiny();
        let c = collection(&net, &spec, 5);
        let d_re = build_repair_dataset(&[c], &[spec.clone()], 2, LossNorm::L2).unwrap();
        let cfg = RetrainConfig {
            max_epochs: 5,
            batch_size: 2,
            ..Default::default()
        };
        let (a, _) = retrain(&net, &d_re, &d_re, &cfg, &[spec.clone()], &[]).unwrap();
        let (b, _) = retrain(&net, &d_re, &d_re, &cfg, &[spec], &[]).unwrap();
        assert_eq!(a, b);
    }

    fn outputs(n: usize, dim: usize) -> impl Strategy<Value = Array2<f64>> {
        proptest::collection::vec(-3.0..3.0f64, n * dim)
            .prop_map(move |v| Array2::from_shape_vec((n, dim), v).unwrap())
    }

    proptest! {
        #[test]
        fn loss_decomposes(
            w in proptest::collection::vec(-1.0..1.0f64, 6),
            alpha in 0.0..1.0f64,
            xs in outputs(4, 2),
            ts in outputs(4, 2),
        ) {
            let net = Network::new(
                vec![Layer::new(
                    Array2::from_shape_vec((2, 2), w[..4].to_vec()).unwrap(),
                    ndarray::Array1::from(w[4..].to_vec()),
                )],
                Activation::Tanh,
            ).unwrap();
            let mut d_re = RepairDataset::empty(2, 2);
            d_re.extend(xs.slice(ndarray::s![..2, ..]), ts.slice(ndarray::s![..2, ..]), Provenance::CorrectedNegative, None);
            let mut d = RepairDataset::empty(2, 2);
            d.extend(xs.slice(ndarray::s![2.., ..]), ts.slice(ndarray::s![2.., ..]), Provenance::PreservationSample, None);
            let beta = 1.0 - alpha;
            let total = total_loss(&net, &d_re, &d, alpha, beta, LossNorm::L2).unwrap();
            let parts = alpha * loss_drp(&net, &d_re, LossNorm::L2).unwrap()
                + beta * loss_mpr(&net, &d, LossNorm::L2).unwrap();
            prop_assert!((total - parts).abs() <= 1e-12 * (1.0 + parts.abs()));
            // independent per-pair sum
            let mut manual = 0.0;
            for i in 0..2 {
                let y = net.forward(&xs.row(i).to_vec()).unwrap();
                manual += y.iter().zip(ts.row(i)).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
            }
            let drp = loss_drp(&net, &d_re, LossNorm::L2).unwrap();
            prop_assert!((drp - manual).abs() <= 1e-12 * (1.0 + manual));
        }

        #[test]
        fn k_is_capped(yp in outputs(4, 2), yn in outputs(3, 2), extra in 0usize..10) {
            let post = at_least(2, 0, -10.0);
            let a = negative_correct(yp.view(), yn.view(), 4 + extra, &post, LossNorm::L2).unwrap();
            let b = negative_correct(yp.view(), yn.view(), 4, &post, LossNorm::L2).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn labels_always_safe(yp in outputs(6, 2), yn in outputs(5, 2), k in 1usize..8, t in -2.0..2.0f64) {
            let post = at_least(2, 1, t);
            // positives must satisfy the spec to be positives
            let keep: Vec<usize> = (0..6).filter(|&i| yp[[i, 1]] >= t).collect();
            prop_assume!(!keep.is_empty());
            let yp = yp.select(Axis(0), &keep);
            let yc = negative_correct(yp.view(), yn.view(), k, &post, LossNorm::L2).unwrap();
            prop_assert_eq!(yc.nrows(), yn.nrows());
            for row in yc.outer_iter() {
                prop_assert!(post.holds(&row.to_vec()));
            }
        }
    }
}
