//! Fine-tuning repair: localize the most responsible neurons, then search
//! their incoming weights and biases with a particle swarm.

use std::collections::BTreeSet;
use std::time::Instant;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{RepairError, Result};
use crate::localizer::{responsibility, select_top, LocalizationMode, NeuronIndex, ResponsibilityMatrix};
use crate::network::Network;
use crate::pso::{optimize_with_monitor, StopReason, SwarmConfig, SwarmInit};
use crate::properties::{satisfies_rows, PropertySpec};
use crate::report::{collect_eval_sets, evaluate, outcome_counts, seconds, EvalSet, RepairMode, RepairReport};
use crate::sampler::{collect_counts, derive_seed, extract_negative_domains, geometric_delta_schedule};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinetuneConfig {
    /// Neurons to repair.
    pub r: usize,
    pub alpha: f64,
    pub beta: f64,
    /// Restrict localization to one layer (1-based, output layer included).
    pub layer_filter: Option<usize>,
    /// `swarm.seed` is replaced by a stream derived from `seed`.
    pub swarm: SwarmConfig,
    /// Stop the search once the best candidate breaks more than this
    /// fraction of repair positives.
    pub drawdown_abort: f64,
    pub localization: LocalizationMode,
    pub repair_negatives: usize,
    pub repair_positives: usize,
    pub eval_negatives: usize,
    pub eval_positives: usize,
    pub probe_samples: usize,
    pub max_draws: usize,
    pub seed: u64,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        Self {
            r: 10,
            alpha: 0.6,
            beta: 0.4,
            layer_filter: None,
            swarm: SwarmConfig::default(),
            drawdown_abort: 0.05,
            localization: LocalizationMode::default(),
            repair_negatives: 10_000,
            repair_positives: 10_000,
            eval_negatives: 10_000,
            eval_positives: 10_000,
            probe_samples: 10_000,
            max_draws: 2_000_000,
            seed: 42,
        }
    }
}

impl FinetuneConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !unit(self.alpha) || !unit(self.beta) || (self.alpha + self.beta - 1.0).abs() > 1e-12 {
            return Err(RepairError::InvalidConfig(format!(
                "alpha and beta must lie in [0, 1] and sum to 1 (got {} and {})",
                self.alpha, self.beta
            )));
        }
        if self.r == 0 {
            return Err(RepairError::InvalidConfig("r must be at least 1".into()));
        }
        if !unit(self.drawdown_abort) {
            return Err(RepairError::InvalidConfig("drawdown_abort must lie in [0, 1]".into()));
        }
        if self.repair_negatives == 0 || self.repair_positives == 0 {
            return Err(RepairError::InvalidConfig("repair set sizes must be positive".into()));
        }
        Ok(())
    }
}

/// The incoming weight row and bias of each selected neuron, as one flat
/// vector.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuronWeightView {
    indices: Vec<NeuronIndex>,
    fan_in: Vec<usize>,
}

impl NeuronWeightView {
    pub fn new(net: &Network, indices: &[NeuronIndex]) -> Result<Self> {
        let mut seen = BTreeSet::new();
        let mut fan_in = Vec::with_capacity(indices.len());
        for &idx in indices {
            if idx.layer == 0 || idx.layer > net.layers().len() {
                return Err(RepairError::NeuronOutOfRange {
                    layer: idx.layer,
                    neuron: idx.neuron,
                });
            }
            let layer = &net.layers()[idx.layer - 1];
            if idx.neuron >= layer.outputs() {
                return Err(RepairError::NeuronOutOfRange {
                    layer: idx.layer,
                    neuron: idx.neuron,
                });
            }
            if !seen.insert(idx) {
                return Err(RepairError::DuplicateNeuron {
                    layer: idx.layer,
                    neuron: idx.neuron,
                });
            }
            fan_in.push(layer.inputs());
        }
        Ok(Self {
            indices: indices.to_vec(),
            fan_in,
        })
    }

    pub fn indices(&self) -> &[NeuronIndex] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.fan_in.iter().map(|f| f + 1).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Lowest layer touched, if any.
    pub fn first_layer(&self) -> Option<usize> {
        self.indices.iter().map(|i| i.layer).min()
    }

    pub fn extract(&self, net: &Network) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for idx in &self.indices {
            let layer = &net.layers()[idx.layer - 1];
            out.extend(layer.weights.row(idx.neuron).iter());
            out.push(layer.biases[idx.neuron]);
        }
        out
    }

    pub fn write(&self, net: &mut Network, values: &[f64]) -> Result<()> {
        if values.len() != self.len() {
            return Err(RepairError::Shape {
                expected: self.len(),
                got: values.len(),
                context: "neuron weight vector",
            });
        }
        let mut it = values.iter().copied();
        let layers = net.layers_mut();
        for (idx, &f) in self.indices.iter().zip(&self.fan_in) {
            let layer = &mut layers[idx.layer - 1];
            for w in layer.weights.row_mut(idx.neuron).iter_mut().take(f) {
                *w = it.next().expect("length checked");
            }
            layer.biases[idx.neuron] = it.next().expect("length checked");
        }
        Ok(())
    }
}

fn fractions(net: &Network, specs: &[PropertySpec], sets: &[EvalSet]) -> Result<(f64, f64)> {
    let c = outcome_counts(net, specs, sets)?;
    Ok((1.0 - c.improvement(), c.drawdown()))
}

/// `alpha * (negatives still violating) + beta * (positives now violating)`,
/// both as fractions pooled over `sets`.
pub fn fitness(
    candidate: &Network,
    sets: &[EvalSet],
    specs: &[PropertySpec],
    alpha: f64,
    beta: f64,
) -> Result<f64> {
    let (unexpected, drawdown) = fractions(candidate, specs, sets)?;
    Ok(alpha * unexpected + beta * drawdown)
}

struct CachedSet {
    post_index: usize,
    negatives: Array2<f64>,
    positives: Array2<f64>,
}

/// Evaluates candidates for one weight view, reusing the hidden states
/// below the first modified layer.
pub struct CandidateEvaluator<'a> {
    base: &'a Network,
    view: &'a NeuronWeightView,
    specs: &'a [PropertySpec],
    start_state: usize,
    sets: Vec<CachedSet>,
    total_negatives: usize,
    total_positives: usize,
}

impl<'a> CandidateEvaluator<'a> {
    pub fn new(
        base: &'a Network,
        view: &'a NeuronWeightView,
        specs: &'a [PropertySpec],
        sets: &[EvalSet],
    ) -> Result<Self> {
        let start_state = view.first_layer().map_or(base.layers().len(), |l| l - 1);
        let state_of = |xs: &Array2<f64>| -> Result<Array2<f64>> {
            if xs.nrows() == 0 {
                return Ok(Array2::zeros((0, base.layer_sizes()[start_state])));
            }
            let mut t = base.trace_batch(xs.view())?;
            Ok(t.swap_remove(start_state))
        };
        let mut cached = Vec::with_capacity(sets.len());
        for s in sets {
            let post_index = specs
                .iter()
                .position(|p| p.id == s.spec_id)
                .ok_or_else(|| RepairError::InvalidProperty(format!("no spec with id `{}`", s.spec_id)))?;
            cached.push(CachedSet {
                post_index,
                negatives: state_of(&s.negatives)?,
                positives: state_of(&s.positives)?,
            });
        }
        Ok(Self {
            base,
            view,
            specs,
            start_state,
            total_negatives: sets.iter().map(|s| s.negatives.nrows()).sum(),
            total_positives: sets.iter().map(|s| s.positives.nrows()).sum(),
            sets: cached,
        })
    }

    /// Fractions of negatives still violating and of positives now
    /// violating under the candidate weights.
    pub fn fractions(&self, values: &[f64]) -> Result<(f64, f64)> {
        let mut net = self.base.clone();
        self.view.write(&mut net, values)?;
        let (mut bad_neg, mut bad_pos) = (0usize, 0usize);
        for s in &self.sets {
            let post = &self.specs[s.post_index].post;
            if s.negatives.nrows() > 0 {
                let ys = net.forward_batch_from(self.start_state, s.negatives.view())?;
                bad_neg += satisfies_rows(post, ys.view()).iter().filter(|ok| !**ok).count();
            }
            if s.positives.nrows() > 0 {
                let ys = net.forward_batch_from(self.start_state, s.positives.view())?;
                bad_pos += satisfies_rows(post, ys.view()).iter().filter(|ok| !**ok).count();
            }
        }
        let frac = |k: usize, n: usize| if n == 0 { 0.0 } else { k as f64 / n as f64 };
        Ok((frac(bad_neg, self.total_negatives), frac(bad_pos, self.total_positives)))
    }

    pub fn fitness(&self, values: &[f64], alpha: f64, beta: f64) -> f64 {
        match self.fractions(values) {
            Ok((u, v)) => alpha * u + beta * v,
            Err(_) => f64::INFINITY,
        }
    }
}

/// Outcome of the swarm search over a fixed neuron selection.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub network: Network,
    pub fitness: f64,
    pub iterations: usize,
    pub stop_reason: String,
}

/// Search the weights of `neurons` against `repair_sets`. The original
/// weights seed particle 0.
pub fn search(
    net: &Network,
    specs: &[PropertySpec],
    neurons: &[NeuronIndex],
    repair_sets: &[EvalSet],
    cfg: &FinetuneConfig,
) -> Result<SearchOutcome> {
    let view = NeuronWeightView::new(net, neurons)?;
    let start = view.extract(net);
    let eval = CandidateEvaluator::new(net, &view, specs, repair_sets)?;
    let mut swarm = cfg.swarm.clone();
    swarm.seed = derive_seed(cfg.seed, 4);
    let (alpha, beta) = (cfg.alpha, cfg.beta);
    let mut admissible = start.clone();
    let mut admissible_fitness = eval.fitness(&start, alpha, beta);
    let mut admissible_fitness_seen = admissible_fitness;
    let mut aborted = false;
    let outcome = optimize_with_monitor(
        |x: &[f64]| eval.fitness(x, alpha, beta),
        &SwarmInit::Around(start.clone()),
        &swarm,
        |state| {
            if state.global_best_fitness >= admissible_fitness_seen {
                return true;
            }
            admissible_fitness_seen = state.global_best_fitness;
            match eval.fractions(&state.global_best) {
                Ok((_, v)) if v <= cfg.drawdown_abort => {
                    admissible = state.global_best.clone();
                    admissible_fitness = state.global_best_fitness;
                    true
                }
                _ => {
                    aborted = true;
                    false
                }
            }
        },
    )?;
    let (best, best_fitness) = if aborted {
        (admissible, admissible_fitness)
    } else {
        // the initial best may already exceed the abort threshold
        match eval.fractions(&outcome.best_position) {
            Ok((_, v)) if v <= cfg.drawdown_abort => (outcome.best_position, outcome.best_fitness),
            _ => (admissible, admissible_fitness),
        }
    };
    let mut network = net.clone();
    view.write(&mut network, &best)?;
    Ok(SearchOutcome {
        network,
        fitness: best_fitness,
        iterations: outcome.iterations,
        stop_reason: match outcome.stop_reason {
            StopReason::MaxIterations => "max_iterations",
            StopReason::Stagnation => "stagnation",
            StopReason::Monitor => "drawdown_abort",
        }
        .into(),
    })
}

/// Repair sets and the summed responsibility matrix over all negative
/// domains.
pub fn localize(
    net: &Network,
    specs: &[PropertySpec],
    negative_specs: &[usize],
    cfg: &FinetuneConfig,
) -> Result<(Vec<EvalSet>, ResponsibilityMatrix)> {
    let mut total = ResponsibilityMatrix::zeros_like(net);
    let mut sets = Vec::with_capacity(negative_specs.len());
    for &i in negative_specs {
        let spec = &specs[i];
        let set = collect_counts(
            net,
            spec,
            cfg.repair_negatives,
            cfg.repair_positives,
            cfg.max_draws,
            &geometric_delta_schedule(&spec.pre, 10),
            None,
            derive_seed(cfg.seed, 100 + i as u64),
        )?;
        if set.num_negatives() > 0 {
            let r = responsibility(net, set.positives.view(), set.negatives.view(), cfg.localization)?;
            total.add_assign(&r)?;
        }
        sets.push(EvalSet {
            spec_id: spec.id.clone(),
            negatives: set.negatives,
            positives: set.positives,
        });
    }
    Ok((sets, total))
}

/// Localize, search and evaluate on fresh held-out sets.
pub fn fine_tune(net: &Network, specs: &[PropertySpec], cfg: &FinetuneConfig) -> Result<(Network, RepairReport)> {
    let started = Instant::now();
    cfg.validate()?;
    if let Some(l) = cfg.layer_filter {
        if l == 0 || l > net.layers().len() {
            return Err(RepairError::InvalidConfig(format!(
                "layer {l} outside 1..={}",
                net.layers().len()
            )));
        }
    }
    for s in specs {
        s.validate_for(net)?;
    }
    let mut report = RepairReport::new(RepairMode::FineTune, cfg.seed);
    report.config = serde_json::to_value(cfg)?;
    let negative = extract_negative_domains(net, specs, cfg.probe_samples, derive_seed(cfg.seed, 1))?;
    if negative.is_empty() {
        report.improvement = 1.0;
        report.stop_reason = "no_negatives_found".into();
        report.total_time_s = seconds(started.elapsed());
        return Ok((net.clone(), report));
    }
    let loc_started = Instant::now();
    let (repair_sets, matrix) = localize(net, specs, &negative, cfg)?;
    let selection = select_top(&matrix, cfg.r, cfg.layer_filter)?;
    let localization_time = loc_started.elapsed();
    let found = search(net, specs, &selection.neurons, &repair_sets, cfg)?;
    let eval = collect_eval_sets(
        net,
        specs,
        &negative,
        cfg.eval_negatives,
        cfg.eval_positives,
        cfg.max_draws,
        derive_seed(cfg.seed, 3),
    )?;
    let mut report = RepairReport {
        config: report.config,
        ..evaluate(net, &found.network, specs, &eval, RepairMode::FineTune, cfg.seed)?
    };
    if selection.truncated {
        report
            .notes
            .push(format!("only {} neurons were available", selection.neurons.len()));
    }
    report.repaired_neurons = selection.neurons;
    report.iterations = found.iterations;
    report.stop_reason = found.stop_reason;
    report.localization_time_s = seconds(localization_time);
    report.total_time_s = seconds(started.elapsed());
    Ok((found.network, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Activation, Layer};
    use crate::properties::{InputDomain, LinearAtom, OutputCondition};
    use crate::sampler::sample_uniform;
    use ndarray::{array, Array1};
    use rand::Rng;

    fn random_net(sizes: &[usize], seed: u64) -> Network {
        let mut rng = crate::sampler::seeded_rng(seed);
        let layers = sizes
            .windows(2)
            .map(|w| {
                Layer::new(
                    Array2::from_shape_fn((w[1], w[0]), |_| rng.random_range(-1.0..1.0)),
                    Array1::from_shape_fn(w[1], |_| rng.random_range(-0.5..0.5)),
                )
            })
            .collect();
        Network::new(layers, Activation::Relu).unwrap()
    }

    fn y0_le_y1(n: usize) -> PropertySpec {
        let mut coeffs = vec![0.0; n];
        coeffs[0] = 1.0;
        coeffs[1] = -1.0;
        PropertySpec {
            id: "p".into(),
            pre: InputDomain::unit(3),
            post: OutputCondition::all_of(vec![LinearAtom {
                coeffs,
                rhs: 0.0,
                strict: false,
            }]),
        }
    }

    #[test]
    fn view_lengths() {
        let net = random_net(&[3, 4, 2], 1);
        let v = NeuronWeightView::new(&net, &[NeuronIndex::new(1, 2)]).unwrap();
        assert_eq!(v.len(), 4);
        let acas = random_net(&[5, 50, 50, 5], 2);
        let idx: Vec<_> = (0..10).map(|j| NeuronIndex::new(2, j)).collect();
        assert_eq!(NeuronWeightView::new(&acas, &idx).unwrap().len(), 510);
    }

    #[test]
    fn view_round_trip_is_bit_identical() {
        let net = random_net(&[3, 4, 2], 3);
        let idx = [NeuronIndex::new(2, 1), NeuronIndex::new(1, 0)];
        let v = NeuronWeightView::new(&net, &idx).unwrap();
        let mut copy = net.clone();
        v.write(&mut copy, &v.extract(&net)).unwrap();
        let bits = |n: &Network| n.params_flat().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&copy), bits(&net));
    }

    #[test]
    fn view_rejects_duplicates_and_out_of_range() {
        let net = random_net(&[3, 4, 2], 4);
        let e = NeuronWeightView::new(&net, &[NeuronIndex::new(1, 0), NeuronIndex::new(1, 0)]).unwrap_err();
        assert_eq!(e.kind(), "duplicate_neuron");
        let e = NeuronWeightView::new(&net, &[NeuronIndex::new(3, 0)]).unwrap_err();
        assert_eq!(e.kind(), "neuron_out_of_range");
        let e = NeuronWeightView::new(&net, &[NeuronIndex::new(1, 4)]).unwrap_err();
        assert_eq!(e.kind(), "neuron_out_of_range");
    }

    fn sets_for(net: &Network, spec: &PropertySpec, seed: u64) -> Vec<EvalSet> {
        let s = collect_counts(net, spec, 40, 40, 100_000, &[0.0], None, seed).unwrap();
        vec![EvalSet {
            spec_id: spec.id.clone(),
            negatives: s.negatives,
            positives: s.positives,
        }]
    }

    fn buggy() -> (Network, PropertySpec) {
        // search for a random net with both polarities in the unit cube
        for seed in 0.. {
            let net = random_net(&[3, 6, 6, 2], seed);
            let spec = y0_le_y1(2);
            let xs = sample_uniform(&spec.pre, 2_000, seed).unwrap();
            let ys = net.forward_batch(xs.view()).unwrap();
            let ok = satisfies_rows(&spec.post, ys.view()).iter().filter(|b| **b).count();
            if (400..1_600).contains(&ok) {
                return (net, spec);
            }
        }
        unreachable!()
    }

    #[test]
    fn original_net_fitness_is_alpha() {
        let (net, spec) = buggy();
        let sets = sets_for(&net, &spec, 7);
        let f = fitness(&net, &sets, &[spec], 0.6, 0.4).unwrap();
        assert!((f - 0.6).abs() < 1e-12);
    }

    #[test]
    fn evaluator_matches_reference_fitness() {
        let (net, spec) = buggy();
        let sets = sets_for(&net, &spec, 8);
        let specs = [spec];
        let idx = [NeuronIndex::new(2, 3), NeuronIndex::new(3, 1)];
        let view = NeuronWeightView::new(&net, &idx).unwrap();
        let eval = CandidateEvaluator::new(&net, &view, &specs, &sets).unwrap();
        let mut rng = crate::sampler::seeded_rng(9);
        for _ in 0..20 {
            let x: Vec<f64> = (0..view.len()).map(|_| rng.random_range(-2.0..2.0)).collect();
            let mut cand = net.clone();
            view.write(&mut cand, &x).unwrap();
            let reference = fitness(&cand, &sets, &specs, 0.6, 0.4).unwrap();
            assert!((eval.fitness(&x, 0.6, 0.4) - reference).abs() < 1e-12);
            assert!((0.0..=1.0).contains(&reference));
        }
    }

    #[test]
    fn alpha_one_ignores_positives() {
        let (net, spec) = buggy();
        let mut sets = sets_for(&net, &spec, 10);
        let specs = [spec];
        let mut cand = net.clone();
        cand.layers_mut()[2].biases[0] -= 0.3;
        let a = fitness(&cand, &sets, &specs, 1.0, 0.0).unwrap();
        sets[0].positives = sets[0].positives.slice(ndarray::s![..5, ..]).to_owned();
        let b = fitness(&cand, &sets, &specs, 1.0, 0.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn repaired_fitness_zero() {
        let net = Network::new(vec![Layer::new(array![[0.0, 0.0, 0.0], [0.0, 0.0, 0.0]], array![0.0, 1.0])], Activation::Relu)
            .unwrap();
        let spec = y0_le_y1(2);
        let sets = vec![EvalSet {
            spec_id: "p".into(),
            negatives: array![[0.1, 0.1, 0.1]],
            positives: array![[0.5, 0.5, 0.5]],
        }];
        assert_eq!(fitness(&net, &sets, &[spec], 0.6, 0.4).unwrap(), 0.0);
    }

    fn small_cfg() -> FinetuneConfig {
        FinetuneConfig {
            r: 3,
            repair_negatives: 200,
            repair_positives: 200,
            eval_negatives: 200,
            eval_positives: 200,
            probe_samples: 1_000,
            swarm: SwarmConfig {
                max_iters: 15,
                ..SwarmConfig::default()
            },
            ..FinetuneConfig::default()
        }
    }

    #[test]
    fn fine_tune_is_local_and_deterministic() {
        let (net, spec) = buggy();
        let specs = [spec];
        let cfg = small_cfg();
        let (a, ra) = fine_tune(&net, &specs, &cfg).unwrap();
        let (b, rb) = fine_tune(&net, &specs, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra.repaired_neurons, rb.repaired_neurons);
        assert_eq!(ra.improvement, rb.improvement);
        assert_eq!(ra.repaired_neurons.len(), 3);
        for (li, (la, lo)) in a.layers().iter().zip(net.layers()).enumerate() {
            for j in 0..la.outputs() {
                let picked = ra.repaired_neurons.contains(&NeuronIndex::new(li + 1, j));
                if !picked {
                    assert_eq!(la.weights.row(j), lo.weights.row(j));
                    assert_eq!(la.biases[j].to_bits(), lo.biases[j].to_bits());
                }
            }
        }
        assert!(ra.drawdown <= 1.0 && ra.improvement >= 0.0);
    }

    #[test]
    fn output_layer_filter_touches_only_output_layer() {
        let (net, spec) = buggy();
        let cfg = FinetuneConfig {
            layer_filter: Some(3),
            ..small_cfg()
        };
        let (a, r) = fine_tune(&net, &[spec], &cfg).unwrap();
        assert!(r.repaired_neurons.iter().all(|n| n.layer == 3));
        assert_eq!(r.repaired_neurons.len(), 2);
        assert!(r.notes.iter().any(|n| n.contains("only 2")));
        assert_eq!(a.layers()[0], net.layers()[0]);
        assert_eq!(a.layers()[1], net.layers()[1]);
    }

    #[test]
    fn nothing_to_repair() {
        let net = Network::new(vec![Layer::new(array![[0.0, 0.0, 0.0], [0.0, 0.0, 0.0]], array![0.0, 1.0])], Activation::Relu)
            .unwrap();
        let (out, r) = fine_tune(&net, &[y0_le_y1(2)], &small_cfg()).unwrap();
        assert_eq!(out, net);
        assert_eq!(r.improvement, 1.0);
        assert_eq!(r.stop_reason, "no_negatives_found");
    }

    #[test]
    fn zero_abort_threshold_never_breaks_positives() {
        let (net, spec) = buggy();
        let specs = [spec];
        let cfg = FinetuneConfig {
            drawdown_abort: 0.0,
            ..small_cfg()
        };
        let sets = sets_for(&net, &specs[0], 11);
        let idx = [NeuronIndex::new(3, 0), NeuronIndex::new(3, 1)];
        let out = search(&net, &specs, &idx, &sets, &cfg).unwrap();
        let (_, v) = fractions(&out.network, &specs, &sets).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn mode_equivalence_on_single_layer_top() {
        let net = random_net(&[3, 4, 4, 2], 12);
        let mut m = ResponsibilityMatrix::zeros_like(&net);
        m.rows[1] = vec![5.0, 9.0, 7.0, 8.0];
        m.rows[0] = vec![1.0, 0.5, 0.0, 0.2];
        let cross = select_top(&m, 3, None).unwrap();
        let wise = select_top(&m, 3, Some(2)).unwrap();
        assert_eq!(cross, wise);
    }
}
