//! Networks with a planted bug: a box of the input space where the safe
//! rule is violated, and nowhere else.
//!
//! The first hidden layer holds steep steps at the box edges, the second
//! combines them into a bump that is 1 inside the box and 0 outside, and
//! deeper layers re-step that bump. The remaining units are random features
//! that add a small smooth variation to the output. The output is
//! `y_good + variation + A * bump * (y_bad - y_good)`, with `A` set just past
//! the rule boundary so the violations are marginal.

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{RepairError, Result};
use crate::network::{Activation, Layer, Network};
use crate::properties::{satisfies_rows, InputDomain, LinearAtom, OutputCondition, PropertySpec};
use crate::sampler::{derive_seed, sample_uniform, seeded_rng, SeededRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedBugSpec {
    /// Layer sizes, input first; at least two hidden layers.
    pub topology: Vec<usize>,
    pub activation: Activation,
    /// Post-condition the network should satisfy outside the bug box.
    pub rule: OutputCondition,
    pub pre: InputDomain,
    /// Explicit bug box; derived from `rate` when absent.
    pub bug_region: Option<InputDomain>,
    /// Input dimensions the derived box constrains.
    pub bug_dims: usize,
    /// Target violation rate over `pre`.
    pub rate: f64,
    /// How far past the rule boundary the bug pushes outputs, relative to
    /// the distance from `y_good` to the boundary.
    pub overshoot: f64,
    pub seed: u64,
    pub property_id: String,
}

impl Default for PlantedBugSpec {
    fn default() -> Self {
        Self {
            topology: vec![5, 50, 50, 5],
            activation: Activation::Relu,
            rule: default_rule(5),
            pre: InputDomain::unit(5),
            bug_region: None,
            bug_dims: 2,
            rate: 0.1,
            overshoot: 0.25,
            seed: 42,
            property_id: "planted".into(),
        }
    }
}

impl PlantedBugSpec {
    /// Defaults adapted to a topology: unit input box and `y0 >= y1`.
    pub fn for_topology(topology: Vec<usize>, activation: Activation, rate: f64, seed: u64) -> Self {
        let m = topology.first().copied().unwrap_or(0);
        let n = topology.last().copied().unwrap_or(0);
        Self {
            rule: default_rule(n),
            pre: InputDomain::unit(m),
            bug_dims: 2.min(m.max(1)),
            topology,
            activation,
            rate,
            seed,
            ..Self::default()
        }
    }
}

/// `y1 - y0 <= 0`.
pub fn default_rule(n: usize) -> OutputCondition {
    let mut coeffs = vec![0.0; n];
    if n >= 2 {
        coeffs[0] = -1.0;
        coeffs[1] = 1.0;
    }
    OutputCondition::all_of(vec![LinearAtom {
        coeffs,
        rhs: 0.0,
        strict: false,
    }])
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedBug {
    pub network: Network,
    /// The safe rule over the whole pre box.
    pub property: PropertySpec,
    pub region: InputDomain,
    pub target_rate: f64,
    /// Violation rate of the network, by 10K-sample Monte Carlo.
    pub achieved_rate: f64,
    /// Fraction of the same samples inside the bug box.
    pub oracle_rate: f64,
    /// Achieved rate within 10% of the target.
    pub target_met: bool,
    /// Steepness of the edge steps, in units of input per unit of width.
    pub edge_steepness: f64,
}

impl PlantedBug {
    /// Exact membership in the bug box.
    pub fn in_bug_region(&self, x: &[f64]) -> bool {
        self.region.contains(x)
    }

    /// Whether `x` lies within the transition band around the box edges,
    /// where the network's steps are not yet saturated.
    pub fn near_edge(&self, x: &[f64]) -> bool {
        let band = 3.0 / self.edge_steepness;
        x.iter()
            .zip(self.region.lower.iter().zip(&self.region.upper))
            .zip(self.property.pre.lower.iter().zip(&self.property.pre.upper))
            .any(|((&v, (&lo, &hi)), (&plo, &phi))| {
                let constrained_lo = lo > plo;
                let constrained_hi = hi < phi;
                (constrained_lo && (v - lo).abs() < band) || (constrained_hi && (v - hi).abs() < band)
            })
    }
}

/// `step(z) = sum_k coeff_k * act(z + offset_k) + constant`, rising from 0
/// to 1 around `z = 0`.
struct StepBlock {
    offsets: Vec<f64>,
    coeffs: Vec<f64>,
    constant: f64,
}

fn step_block(act: Activation) -> StepBlock {
    match act {
        Activation::Tanh => StepBlock {
            offsets: vec![0.0],
            coeffs: vec![0.5],
            constant: 0.5,
        },
        _ => {
            // pair(z) = act(z + 1/2) - act(z - 1/2) runs from h0 to h1
            let (h0, h1) = match act {
                Activation::LeakyRelu { alpha } => (alpha, 1.0),
                _ => (0.0, 1.0),
            };
            let s = h1 - h0;
            StepBlock {
                offsets: vec![0.5, -0.5],
                coeffs: vec![1.0 / s, -1.0 / s],
                constant: -h0 / s,
            }
        }
    }
}

const BUMP_STEEPNESS: f64 = 8.0;
/// Edge steepness times the shortest box side. Sharper edges make hidden
/// states large enough to destabilize plain SGD.
const EDGE_SHARPNESS: f64 = 20.0;

fn normal(rng: &mut SeededRng) -> f64 {
    StandardNormal.sample(rng)
}

fn derive_region(spec: &PlantedBugSpec, rng: &mut SeededRng) -> Result<InputDomain> {
    let m = spec.pre.dim();
    let d = spec.bug_dims;
    if d == 0 || d > m {
        return Err(RepairError::InvalidConfig(format!(
            "bug_dims must lie in 1..={m}"
        )));
    }
    let frac = spec.rate.powf(1.0 / d as f64);
    let mut lo = spec.pre.lower.clone();
    let mut hi = spec.pre.upper.clone();
    for j in 0..d {
        let w = spec.pre.upper[j] - spec.pre.lower[j];
        let side = frac * w;
        // keep the box off the pre-box edges so every edge is a real edge
        let margin = 0.05 * w;
        let slack = (w - side - 2.0 * margin).max(0.0);
        let start = spec.pre.lower[j] + margin.min((w - side) / 2.0) + rng.random::<f64>() * slack;
        lo[j] = start;
        hi[j] = start + side;
    }
    InputDomain::new(lo, hi)
}

/// Output anchors: a satisfying `y_good`, a violating `y_bad`, and the
/// fraction `t` of the way from one to the other where the rule flips.
fn anchors(rule: &OutputCondition, n: usize, rng: &mut SeededRng) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let cands: Vec<Vec<f64>> = (0..400).map(|_| (0..n).map(|_| 2.0 * normal(rng)).collect()).collect();
    let good: Vec<&Vec<f64>> = cands.iter().filter(|y| rule.holds(y)).take(40).collect();
    let bad: Vec<&Vec<f64>> = cands.iter().filter(|y| !rule.holds(y)).take(40).collect();
    if good.is_empty() || bad.is_empty() {
        return Err(RepairError::Synthesis(
            "the rule is never or always satisfied on random outputs".into(),
        ));
    }
    let lerp = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect() };
    let mut best: Option<(f64, Vec<f64>, Vec<f64>, f64)> = None;
    for g in &good {
        for b in &bad {
            let (mut lo, mut hi) = (0.0, 1.0);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if rule.holds(&lerp(g, b, mid)) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let t = hi;
            let dist = t * g.iter().zip(b.iter()).map(|(x, y)| (y - x).powi(2)).sum::<f64>().sqrt();
            if best.as_ref().is_none_or(|bst| dist > bst.0) {
                best = Some((dist, (*g).clone(), (*b).clone(), t));
            }
        }
    }
    let (_, g, b, t) = best.expect("nonempty");
    Ok((g, b, t))
}

struct Plan {
    layers: Vec<Layer>,
    /// Random units of the last hidden layer.
    last_random: Vec<usize>,
    /// Bump units of the last hidden layer.
    last_bump: Vec<usize>,
}

fn hidden_layers(
    spec: &PlantedBugSpec,
    region: &InputDomain,
    s1: &[f64],
    block: &StepBlock,
    rng: &mut SeededRng,
) -> Result<Plan> {
    let sizes = &spec.topology;
    let m = sizes[0];
    let k = block.offsets.len();
    // (dimension, edge, sign): the step rises towards the box interior
    let mut edges = Vec::new();
    for j in 0..m {
        if region.lower[j] > spec.pre.lower[j] {
            edges.push((j, region.lower[j], 1.0));
        }
        if region.upper[j] < spec.pre.upper[j] {
            edges.push((j, region.upper[j], -1.0));
        }
    }
    if edges.is_empty() {
        return Err(RepairError::Synthesis("bug region covers the whole pre box".into()));
    }
    let relu_like = !matches!(spec.activation, Activation::Tanh);
    let spread = if relu_like { 2.0 } else { 1.0 };

    let mut layers = Vec::new();
    let mut prev_random: Vec<usize> = Vec::new();
    let mut prev_bump: Vec<usize> = Vec::new();
    for (li, w) in sizes.windows(2).take(sizes.len() - 2).enumerate() {
        let (fan, width) = (w[0], w[1]);
        let needed = if li == 0 { edges.len() * k } else { k };
        if width < needed + 1 {
            return Err(RepairError::Synthesis(format!(
                "hidden layer {} needs at least {} units",
                li + 1,
                needed + 1
            )));
        }
        let mut slots: Vec<usize> = (0..width).collect();
        slots.shuffle(rng);
        let (bug_slots, random_slots) = slots.split_at(needed);
        let mut weights = Array2::zeros((width, fan));
        let mut biases = Array1::zeros(width);
        if li == 0 {
            for (e, &(j, edge, sign)) in edges.iter().enumerate() {
                for (q, &off) in block.offsets.iter().enumerate() {
                    let u = bug_slots[e * k + q];
                    weights[[u, j]] = sign * s1[j];
                    biases[u] = -sign * s1[j] * edge + off;
                }
            }
            for &u in random_slots {
                for j in 0..fan {
                    let width_j = spec.pre.upper[j] - spec.pre.lower[j];
                    let c = 0.5 * (spec.pre.upper[j] + spec.pre.lower[j]);
                    let wj = normal(rng) * (spread / fan as f64).sqrt() * 2.0 / width_j;
                    weights[[u, j]] = wj;
                    biases[u] -= wj * c;
                }
                biases[u] += 0.1 * normal(rng);
            }
        } else {
            for (q, &off) in block.offsets.iter().enumerate() {
                let u = bug_slots[q];
                if li == 1 {
                    // every edge step is 1 inside the box; fire when all are
                    let n_edges = edges.len() as f64;
                    for e in 0..edges.len() {
                        for (p, &c) in block.coeffs.iter().enumerate() {
                            weights[[u, prev_bump[e * k + p]]] = BUMP_STEEPNESS * c;
                        }
                    }
                    biases[u] = BUMP_STEEPNESS * (n_edges * block.constant - (n_edges - 0.5)) + off;
                } else {
                    for (p, &c) in block.coeffs.iter().enumerate() {
                        weights[[u, prev_bump[p]]] = BUMP_STEEPNESS * c;
                    }
                    biases[u] = BUMP_STEEPNESS * (block.constant - 0.5) + off;
                }
            }
            for &u in random_slots {
                for &j in &prev_random {
                    weights[[u, j]] = normal(rng) * (spread / prev_random.len() as f64).sqrt();
                }
                biases[u] = 0.1 * normal(rng);
            }
        }
        prev_bump = bug_slots.to_vec();
        prev_random = random_slots.to_vec();
        layers.push(Layer::new(weights, biases));
    }
    Ok(Plan {
        layers,
        last_random: prev_random,
        last_bump: prev_bump,
    })
}

/// Build the planted-bug network and measure its violation rate.
pub fn make_buggy(spec: &PlantedBugSpec) -> Result<PlantedBug> {
    let sizes = &spec.topology;
    if sizes.len() < 4 {
        return Err(RepairError::Synthesis(
            "a planted bug needs at least two hidden layers".into(),
        ));
    }
    spec.activation.validate()?;
    spec.pre.validate()?;
    if spec.pre.dim() != sizes[0] {
        return Err(RepairError::Shape {
            expected: sizes[0],
            got: spec.pre.dim(),
            context: "pre box dimension",
        });
    }
    let n = *sizes.last().expect("checked");
    spec.rule.validate(n)?;
    if !(spec.rate > 0.0 && spec.rate < 1.0) {
        return Err(RepairError::InvalidConfig("rate must lie in (0, 1)".into()));
    }
    if !(spec.overshoot > 0.0) {
        return Err(RepairError::InvalidConfig("overshoot must be positive".into()));
    }
    let mut rng = seeded_rng(spec.seed);
    let region = match &spec.bug_region {
        Some(r) => {
            r.validate()?;
            if !r.is_subset_of(&spec.pre) {
                return Err(RepairError::InvalidConfig("bug region must lie inside the pre box".into()));
            }
            r.clone()
        }
        None => derive_region(spec, &mut rng)?,
    };
    let min_side = region
        .widths()
        .iter()
        .zip(spec.pre.widths())
        .filter(|(r, p)| *r < p)
        .map(|(r, _)| *r)
        .fold(f64::INFINITY, f64::min);
    if !(min_side > 0.0) {
        return Err(RepairError::Synthesis("bug region has an empty side".into()));
    }
    let steepness = EDGE_SHARPNESS / min_side;
    let s1 = vec![steepness; sizes[0]];
    let block = step_block(spec.activation);
    let plan = hidden_layers(spec, &region, &s1, &block, &mut rng)?;
    let (y_good, y_bad, t) = anchors(&spec.rule, n, &mut rng)?;
    let delta: Vec<f64> = y_good.iter().zip(&y_bad).map(|(g, b)| b - g).collect();
    let scale = {
        let a = t * (1.0 + spec.overshoot);
        let tip: Vec<f64> = y_good.iter().zip(&delta).map(|(g, d)| g + a * d).collect();
        if spec.rule.holds(&tip) {
            1.0
        } else {
            a
        }
    };
    let dist = t * delta.iter().map(|d| d * d).sum::<f64>().sqrt();

    let fan = sizes[sizes.len() - 2];
    let hidden = Network::new(plan.layers.clone(), spec.activation)?;
    let probe = sample_uniform(&spec.pre, 2_000, derive_seed(spec.seed, 1))?;
    let h = hidden_states(&hidden, probe.view())?;
    let mean_h = h.mean_axis(Axis(0)).expect("nonempty");
    let raw_v = Array2::from_shape_fn((n, fan), |(_, j)| {
        if plan.last_random.contains(&j) {
            normal(&mut rng)
        } else {
            0.0
        }
    });
    let raw_var = (&h - &mean_h).dot(&raw_v.t());
    let peak = raw_var
        .outer_iter()
        .map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0f64, f64::max);
    let mut amplitude = 0.5 * spec.overshoot.min(1.0) * dist;

    let check = sample_uniform(&spec.pre, 4_000, derive_seed(spec.seed, 2))?;
    let mut net;
    let mut tries = 0;
    loop {
        let factor = if peak > 0.0 { amplitude / peak } else { 0.0 };
        let mut w_out = &raw_v * factor;
        let mut b_out = Array1::from(y_good.clone()) - w_out.dot(&mean_h);
        for (q, &c) in block.coeffs.iter().enumerate() {
            for i in 0..n {
                w_out[[i, plan.last_bump[q]]] = scale * delta[i] * c;
            }
        }
        for i in 0..n {
            b_out[i] += scale * delta[i] * block.constant;
        }
        let mut layers = plan.layers.clone();
        layers.push(Layer::new(w_out, b_out));
        net = Network::new(layers, spec.activation)?;
        let candidate = PlantedBug {
            network: net.clone(),
            property: PropertySpec {
                id: spec.property_id.clone(),
                pre: spec.pre.clone(),
                post: spec.rule.clone(),
            },
            region: region.clone(),
            target_rate: spec.rate,
            achieved_rate: 0.0,
            oracle_rate: 0.0,
            target_met: false,
            edge_steepness: steepness,
        };
        let ys = net.forward_batch(check.view())?;
        let ok = satisfies_rows(&spec.rule, ys.view());
        let mismatches = (0..check.nrows())
            .filter(|&i| {
                let x = check.row(i).to_vec();
                !candidate.near_edge(&x) && ok[i] == candidate.in_bug_region(&x)
            })
            .count();
        if mismatches == 0 || tries >= 12 {
            break;
        }
        amplitude *= 0.5;
        tries += 1;
        if tries == 12 {
            amplitude = 0.0;
        }
    }

    let mc = sample_uniform(&spec.pre, 10_000, derive_seed(spec.seed, 3))?;
    let ys = net.forward_batch(mc.view())?;
    let violated = satisfies_rows(&spec.rule, ys.view()).iter().filter(|ok| !**ok).count();
    let inside = mc.outer_iter().filter(|x| region.contains(&x.to_vec())).count();
    let achieved_rate = violated as f64 / mc.nrows() as f64;
    Ok(PlantedBug {
        network: net,
        property: PropertySpec {
            id: spec.property_id.clone(),
            pre: spec.pre.clone(),
            post: spec.rule.clone(),
        },
        region,
        target_rate: spec.rate,
        achieved_rate,
        oracle_rate: inside as f64 / mc.nrows() as f64,
        target_met: (achieved_rate - spec.rate).abs() <= 0.1 * spec.rate,
        edge_steepness: steepness,
    })
}

/// Last hidden state of every row.
fn hidden_states(hidden: &Network, xs: ndarray::ArrayView2<f64>) -> Result<Array2<f64>> {
    let out = hidden.forward_batch(xs)?;
    // `hidden` ends in a hidden layer; undo the missing final activation
    Ok(out.mapv(|z| hidden.activation().apply(z)))
}
