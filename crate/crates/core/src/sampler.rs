//! Monte Carlo characterization of network behavior over property boxes.
//!
//! Samples drawn from a property's pre-condition box are split into
//! positives (post-condition holds) and negatives (violated). When the box
//! yields too few positives, positives are drawn from growing
//! δ-neighbourhoods of the box instead.

use std::io::Write as _;
use std::path::Path;

use ndarray::{concatenate, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{RepairError, Result};
use crate::network::Network;
use crate::properties::{delta_neighbourhood, satisfies_rows, InputDomain, PropertySpec};

pub type SeededRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derive an independent stream seed from a base seed and a stream tag.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn sample_uniform_with<R: Rng + ?Sized>(d: &InputDomain, count: usize, rng: &mut R) -> Array2<f64> {
    let m = d.dim();
    let mut out = Array2::zeros((count, m));
    for mut row in out.rows_mut() {
        for (j, v) in row.iter_mut().enumerate() {
            let (lo, hi) = (d.lower[j], d.upper[j]);
            *v = if lo == hi {
                lo
            } else {
                (lo + (hi - lo) * rng.random::<f64>()).min(hi)
            };
        }
    }
    out
}

/// `count` i.i.d. uniform points inside `d`, one per row.
pub fn sample_uniform(d: &InputDomain, count: usize, seed: u64) -> Result<Array2<f64>> {
    if count == 0 {
        return Err(RepairError::InvalidConfig("sample count must be at least 1".into()));
    }
    d.validate()?;
    Ok(sample_uniform_with(d, count, &mut seeded_rng(seed)))
}

/// Positive and negative samples of one spec with their network outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSampleSet {
    pub spec_id: String,
    pub domain: InputDomain,
    pub positives: Array2<f64>,
    pub positive_outputs: Array2<f64>,
    pub negatives: Array2<f64>,
    pub negative_outputs: Array2<f64>,
    /// Largest δ needed to find positives; 0 when the box itself sufficed.
    pub delta_used: f64,
    /// How many of `positives` came from outside the box.
    pub neighbourhood_positives: usize,
}

impl LabeledSampleSet {
    pub fn num_positives(&self) -> usize {
        self.positives.nrows()
    }

    pub fn num_negatives(&self) -> usize {
        self.negatives.nrows()
    }

    /// Positives that lie inside the spec's own box.
    pub fn in_box_positives(&self) -> Array2<f64> {
        select_rows(
            self.positives.view(),
            (0..self.num_positives()).filter(|&i| self.domain.contains(&self.positives.row(i).to_vec())),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollectConfig {
    /// Points drawn from the box (and from each neighbourhood tried).
    pub n_total: usize,
    pub min_positives: usize,
    /// Must start at 0 and increase strictly.
    pub delta_schedule: Vec<f64>,
    /// Global input box that neighbourhoods are clipped to.
    pub clamp: Option<InputDomain>,
}

impl CollectConfig {
    pub fn for_domain(domain: &InputDomain, n_total: usize, min_positives: usize) -> Self {
        Self {
            n_total,
            min_positives,
            delta_schedule: geometric_delta_schedule(domain, 10),
            clamp: None,
        }
    }
}

/// `[0, d0, 2 d0, 4 d0, ...]` with `d0` = 1% of the widest box edge.
pub fn geometric_delta_schedule(domain: &InputDomain, steps: usize) -> Vec<f64> {
    let widest = domain.widths().into_iter().fold(0.0f64, f64::max);
    let base = if widest > 0.0 { 0.01 * widest } else { 0.01 };
    std::iter::once(0.0)
        .chain((0..steps).map(|k| base * 2f64.powi(k as i32)))
        .collect()
}

fn validate_schedule(schedule: &[f64]) -> Result<()> {
    if schedule.first() != Some(&0.0) {
        return Err(RepairError::InvalidConfig("delta schedule must start at 0".into()));
    }
    if schedule.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(RepairError::InvalidConfig(
            "delta schedule must be strictly increasing".into(),
        ));
    }
    Ok(())
}

pub(crate) fn select_rows(a: ArrayView2<f64>, idx: impl IntoIterator<Item = usize>) -> Array2<f64> {
    let idx: Vec<usize> = idx.into_iter().collect();
    a.select(Axis(0), &idx)
}

fn split_by_polarity(
    net: &Network,
    spec: &PropertySpec,
    xs: ArrayView2<f64>,
) -> Result<(Array2<f64>, Array2<f64>, Array2<f64>, Array2<f64>)> {
    let ys = net.forward_batch(xs)?;
    let ok = satisfies_rows(&spec.post, ys.view());
    let pos: Vec<usize> = (0..ok.len()).filter(|&i| ok[i]).collect();
    let neg: Vec<usize> = (0..ok.len()).filter(|&i| !ok[i]).collect();
    Ok((
        select_rows(xs, pos.iter().copied()),
        select_rows(ys.view(), pos),
        select_rows(xs, neg.iter().copied()),
        select_rows(ys.view(), neg),
    ))
}

fn stack(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    concatenate(Axis(0), &[a.view(), b.view()]).expect("equal widths")
}

/// Top up `set` with positives drawn from successive δ-neighbourhoods.
fn relax_for_positives(
    net: &Network,
    spec: &PropertySpec,
    set: &mut LabeledSampleSet,
    draws: usize,
    min_positives: usize,
    cfg_schedule: &[f64],
    clamp: Option<&InputDomain>,
    rng: &mut SeededRng,
) -> Result<()> {
    for &delta in cfg_schedule.iter().skip(1) {
        if set.num_positives() >= min_positives {
            break;
        }
        let region = delta_neighbourhood(&spec.pre, delta, clamp);
        let xs = sample_uniform_with(&region, draws, rng);
        let (px, py, _, _) = split_by_polarity(net, spec, xs.view())?;
        let need = min_positives - set.num_positives();
        let take = need.min(px.nrows());
        if take > 0 {
            let px = px.slice(ndarray::s![..take, ..]).to_owned();
            let py = py.slice(ndarray::s![..take, ..]).to_owned();
            set.neighbourhood_positives += (0..take)
                .filter(|&i| !spec.pre.contains(&px.row(i).to_vec()))
                .count();
            set.positives = stack(&set.positives, &px);
            set.positive_outputs = stack(&set.positive_outputs, &py);
            set.delta_used = delta;
        }
    }
    if set.num_positives() < min_positives {
        return Err(RepairError::PositivesUnavailable {
            spec_id: spec.id.clone(),
            found: set.num_positives(),
            required: min_positives,
        });
    }
    Ok(())
}

/// Sample the spec's box, partition by polarity, and relax to
/// δ-neighbourhoods when fewer than `min_positives` positives were found.
pub fn collect(
    net: &Network,
    spec: &PropertySpec,
    cfg: &CollectConfig,
    seed: u64,
) -> Result<LabeledSampleSet> {
    spec.validate_for(net)?;
    validate_schedule(&cfg.delta_schedule)?;
    let mut rng = seeded_rng(seed);
    let xs = sample_uniform_with(&spec.pre, cfg.n_total.max(1), &mut rng);
    let (px, py, nx, ny) = split_by_polarity(net, spec, xs.view())?;
    let mut set = LabeledSampleSet {
        spec_id: spec.id.clone(),
        domain: spec.pre.clone(),
        positives: px,
        positive_outputs: py,
        negatives: nx,
        negative_outputs: ny,
        delta_used: 0.0,
        neighbourhood_positives: 0,
    };
    if set.num_positives() < cfg.min_positives {
        relax_for_positives(
            net,
            spec,
            &mut set,
            cfg.n_total.max(1),
            cfg.min_positives,
            &cfg.delta_schedule,
            cfg.clamp.as_ref(),
            &mut rng,
        )?;
    }
    Ok(set)
}

/// Draw from the box until `n_negatives` negatives and `n_positives`
/// positives are found or `max_draws` points have been drawn. Missing
/// positives are then taken from δ-neighbourhoods; missing negatives are
/// left missing (the returned set may hold fewer than requested).
pub fn collect_counts(
    net: &Network,
    spec: &PropertySpec,
    n_negatives: usize,
    n_positives: usize,
    max_draws: usize,
    delta_schedule: &[f64],
    clamp: Option<&InputDomain>,
    seed: u64,
) -> Result<LabeledSampleSet> {
    spec.validate_for(net)?;
    validate_schedule(delta_schedule)?;
    let mut rng = seeded_rng(seed);
    let m = net.input_dim();
    let n = net.output_dim();
    let mut set = LabeledSampleSet {
        spec_id: spec.id.clone(),
        domain: spec.pre.clone(),
        positives: Array2::zeros((0, m)),
        positive_outputs: Array2::zeros((0, n)),
        negatives: Array2::zeros((0, m)),
        negative_outputs: Array2::zeros((0, n)),
        delta_used: 0.0,
        neighbourhood_positives: 0,
    };
    let batch = (n_negatives + n_positives).clamp(256, 16_384);
    let mut drawn = 0;
    while drawn < max_draws && (set.num_negatives() < n_negatives || set.num_positives() < n_positives) {
        let count = batch.min(max_draws - drawn);
        let xs = sample_uniform_with(&spec.pre, count, &mut rng);
        drawn += count;
        let (px, py, nx, ny) = split_by_polarity(net, spec, xs.view())?;
        let take_p = (n_positives - set.num_positives().min(n_positives)).min(px.nrows());
        let take_n = (n_negatives - set.num_negatives().min(n_negatives)).min(nx.nrows());
        set.positives = stack(&set.positives, &px.slice(ndarray::s![..take_p, ..]).to_owned());
        set.positive_outputs = stack(&set.positive_outputs, &py.slice(ndarray::s![..take_p, ..]).to_owned());
        set.negatives = stack(&set.negatives, &nx.slice(ndarray::s![..take_n, ..]).to_owned());
        set.negative_outputs = stack(&set.negative_outputs, &ny.slice(ndarray::s![..take_n, ..]).to_owned());
    }
    if set.num_positives() < n_positives {
        relax_for_positives(
            net,
            spec,
            &mut set,
            batch,
            n_positives,
            delta_schedule,
            clamp,
            &mut rng,
        )?;
    }
    Ok(set)
}

/// Indices of specs whose box yields at least one negative among
/// `probe_samples` uniform draws.
pub fn extract_negative_domains(
    net: &Network,
    specs: &[PropertySpec],
    probe_samples: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for (i, spec) in specs.iter().enumerate() {
        spec.validate_for(net)?;
        let xs = sample_uniform(&spec.pre, probe_samples.max(1), derive_seed(seed, i as u64))?;
        let ys = net.forward_batch(xs.view())?;
        if satisfies_rows(&spec.post, ys.view()).iter().any(|ok| !ok) {
            out.push(i);
        }
    }
    Ok(out)
}

/// Oversample the scarcer polarity (with replacement) until negatives make
/// up `negative_fraction` of the set. Returns the set and whether anything
/// was resampled.
pub fn rebalance(
    set: &LabeledSampleSet,
    negative_fraction: f64,
    seed: u64,
) -> Result<(LabeledSampleSet, bool)> {
    if !(negative_fraction > 0.0 && negative_fraction < 1.0) {
        return Err(RepairError::InvalidConfig(
            "negative fraction must lie in (0, 1)".into(),
        ));
    }
    let (np, nn) = (set.num_positives(), set.num_negatives());
    if np == 0 || nn == 0 {
        return Ok((set.clone(), false));
    }
    let current = nn as f64 / (np + nn) as f64;
    let mut rng = seeded_rng(seed);
    let mut out = set.clone();
    let grow = |x: &Array2<f64>, y: &Array2<f64>, target: usize, rng: &mut SeededRng| {
        let have = x.nrows();
        let extra: Vec<usize> = (0..target.saturating_sub(have))
            .map(|_| rng.random_range(0..have))
            .collect();
        (
            stack(x, &x.select(Axis(0), &extra)),
            stack(y, &y.select(Axis(0), &extra)),
        )
    };
    if (current - negative_fraction).abs() < 1e-12 {
        return Ok((out, false));
    }
    if current < negative_fraction {
        let target = (negative_fraction / (1.0 - negative_fraction) * np as f64).ceil() as usize;
        let (x, y) = grow(&set.negatives, &set.negative_outputs, target, &mut rng);
        out.negatives = x;
        out.negative_outputs = y;
    } else {
        let target = ((1.0 - negative_fraction) / negative_fraction * nn as f64).ceil() as usize;
        let (x, y) = grow(&set.positives, &set.positive_outputs, target, &mut rng);
        out.positives = x;
        out.positive_outputs = y;
    }
    Ok((out, true))
}

/// Probability that a repaired network satisfies its property when positives
/// occur with probability `q`, a fraction `u` of negatives is repaired and a
/// fraction `v` of positives is broken.
pub fn satisfaction_probability(q: f64, u: f64, v: f64) -> Result<f64> {
    for (name, x) in [("q", q), ("u", u), ("v", v)] {
        if !(0.0..=1.0).contains(&x) {
            return Err(RepairError::InvalidConfig(format!("{name} = {x} is outside [0, 1]")));
        }
    }
    Ok(q * (1.0 - v) + (1.0 - q) * u)
}

/// Smallest `N` with `2 exp(-2 N eps^2) <= 1 - confidence` (two-sided
/// Hoeffding bound).
pub fn required_sample_size(epsilon: f64, confidence: f64) -> Result<u64> {
    if !(epsilon > 0.0) || !(confidence > 0.0 && confidence < 1.0) {
        return Err(RepairError::InvalidConfig(
            "need epsilon > 0 and confidence in (0, 1)".into(),
        ));
    }
    Ok(((2.0 / (1.0 - confidence)).ln() / (2.0 * epsilon * epsilon)).ceil() as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Positive,
    Negative,
}

/// One row of a sample-set CSV dump.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub spec_id: String,
    pub polarity: Polarity,
    pub input: Vec<f64>,
    pub output: Vec<f64>,
}

/// Write sample sets as CSV: `spec_id,polarity,x0..,y0..`.
pub fn write_samples_csv(sets: &[LabeledSampleSet], path: impl AsRef<Path>) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    let (m, n) = match sets.first() {
        Some(s) => (s.positives.ncols(), s.positive_outputs.ncols()),
        None => (0, 0),
    };
    let mut header = vec!["spec_id".to_string(), "polarity".to_string()];
    header.extend((0..m).map(|i| format!("x{i}")));
    header.extend((0..n).map(|i| format!("y{i}")));
    writeln!(out, "{}", header.join(","))?;
    for s in sets {
        for (pol, xs, ys) in [
            ("positive", &s.positives, &s.positive_outputs),
            ("negative", &s.negatives, &s.negative_outputs),
        ] {
            for (x, y) in xs.rows().into_iter().zip(ys.rows()) {
                let mut row = vec![s.spec_id.clone(), pol.to_string()];
                row.extend(x.iter().map(|v| v.to_string()));
                row.extend(y.iter().map(|v| v.to_string()));
                writeln!(out, "{}", row.join(","))?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_samples_csv(path: impl AsRef<Path>) -> Result<Vec<SampleRecord>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| RepairError::InvalidConfig("empty sample CSV".into()))?
        .split(',')
        .collect();
    let m = header.iter().filter(|h| h.starts_with('x')).count();
    let n = header.iter().filter(|h| h.starts_with('y')).count();
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 2 + m + n {
            return Err(RepairError::InvalidConfig(format!(
                "sample CSV row {}: expected {} columns, found {}",
                i + 2,
                2 + m + n,
                cols.len()
            )));
        }
        let polarity = match cols[1] {
            "positive" => Polarity::Positive,
            "negative" => Polarity::Negative,
            other => {
                return Err(RepairError::InvalidConfig(format!(
                    "sample CSV row {}: unknown polarity `{other}`",
                    i + 2
                )))
            }
        };
        let nums = cols[2..]
            .iter()
            .map(|c| {
                c.parse::<f64>().map_err(|_| {
                    RepairError::InvalidConfig(format!("sample CSV row {}: bad number `{c}`", i + 2))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(SampleRecord {
            spec_id: cols[0].to_string(),
            polarity,
            input: nums[..m].to_vec(),
            output: nums[m..].to_vec(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Activation, Layer};
    use crate::properties::{classify_sample, LinearAtom, OutputCondition, SampleClass};
    use ndarray::array;

    /// y = x0 on one input.
    fn passthrough() -> Network {
        Network::new(vec![Layer::new(array![[1.0]], array![0.0])], Activation::Relu).unwrap()
    }

    fn below(threshold: f64) -> OutputCondition {
        OutputCondition::all_of(vec![LinearAtom {
            coeffs: vec![1.0],
            rhs: threshold,
            strict: false,
        }])
    }

    #[test]
    fn degenerate_box_is_constant() {
        let d = InputDomain::new(vec![0.0, 1.0], vec![0.0, 1.0]).unwrap();
        let xs = sample_uniform(&d, 50, 3).unwrap();
        assert!(xs.rows().into_iter().all(|r| r[0] == 0.0 && r[1] == 1.0));
    }

    #[test]
    fn uniform_mean_and_determinism() {
        let d = InputDomain::unit(1);
        let xs = sample_uniform(&d, 10_000, 11).unwrap();
        let mean = xs.mean().unwrap();
        assert!((mean - 0.5).abs() < 0.02, "mean {mean}");
        assert_eq!(xs, sample_uniform(&d, 10_000, 11).unwrap());
        assert_ne!(xs, sample_uniform(&d, 10_000, 12).unwrap());
        assert!(sample_uniform(&d, 0, 1).is_err());
    }

    #[test]
    fn satisfied_everywhere_has_no_negatives() {
        let spec = PropertySpec {
            id: "ok".into(),
            pre: InputDomain::unit(1),
            post: below(5.0),
        };
        let net = passthrough();
        let set = collect(&net, &spec, &CollectConfig::for_domain(&spec.pre, 500, 10), 1).unwrap();
        assert_eq!(set.num_negatives(), 0);
        assert_eq!(set.num_positives(), 500);
        assert_eq!(set.delta_used, 0.0);
    }

    #[test]
    fn relaxation_finds_positives_at_first_useful_delta() {
        // box [0.5, 1] violates everywhere; positives need y <= 0.45
        let spec = PropertySpec {
            id: "all-bad".into(),
            pre: InputDomain::new(vec![0.5], vec![1.0]).unwrap(),
            post: below(0.45),
        };
        let net = passthrough();
        let cfg = CollectConfig {
            n_total: 400,
            min_positives: 5,
            delta_schedule: vec![0.0, 0.1, 0.2],
            clamp: None,
        };
        let set = collect(&net, &spec, &cfg, 5).unwrap();
        assert_eq!(set.num_positives(), 0 + 5);
        assert_eq!(set.delta_used, 0.1);
        assert_eq!(set.neighbourhood_positives, 5);
        assert!(set.positives.iter().all(|&x| x >= 0.4 && x <= 0.45));

        let tight = CollectConfig {
            delta_schedule: vec![0.0, 0.02, 0.04],
            ..cfg
        };
        assert!(matches!(
            collect(&net, &spec, &tight, 5),
            Err(RepairError::PositivesUnavailable { .. })
        ));
    }

    #[test]
    fn partition_is_sound() {
        let spec = PropertySpec {
            id: "half".into(),
            pre: InputDomain::unit(1),
            post: below(0.3),
        };
        let net = passthrough();
        let set = collect(&net, &spec, &CollectConfig::for_domain(&spec.pre, 1000, 1), 9).unwrap();
        for r in set.negatives.rows() {
            assert_eq!(classify_sample(&net, &spec, r.as_slice().unwrap()).unwrap(), SampleClass::Negative);
        }
        for r in set.positives.rows() {
            assert_eq!(classify_sample(&net, &spec, r.as_slice().unwrap()).unwrap(), SampleClass::Positive);
        }
        assert_eq!(collect(&net, &spec, &CollectConfig::for_domain(&spec.pre, 1000, 1), 9).unwrap(), set);
    }

    #[test]
    fn counts_and_rebalancing() {
        let spec = PropertySpec {
            id: "tenth".into(),
            pre: InputDomain::unit(1),
            post: below(0.95),
        };
        let net = passthrough();
        let set = collect_counts(&net, &spec, 200, 300, 100_000, &[0.0], None, 4).unwrap();
        assert_eq!(set.num_negatives(), 200);
        assert_eq!(set.num_positives(), 300);

        let natural = collect(&net, &spec, &CollectConfig::for_domain(&spec.pre, 2000, 1), 4).unwrap();
        let (bal, changed) = rebalance(&natural, 0.1, 1).unwrap();
        assert!(changed);
        let frac = bal.num_negatives() as f64 / (bal.num_negatives() + bal.num_positives()) as f64;
        assert!((frac - 0.1).abs() < 0.005, "{frac}");
    }

    #[test]
    fn probability_formula() {
        for q in [0.0, 0.3, 1.0] {
            assert_eq!(satisfaction_probability(q, 1.0, 0.0).unwrap(), 1.0);
        }
        assert!((satisfaction_probability(0.9, 1.0, 0.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((satisfaction_probability(0.5, 0.8, 0.1).unwrap() - 0.85).abs() < 1e-12);
        assert!(satisfaction_probability(1.2, 0.5, 0.5).is_err());
    }

    #[test]
    fn sample_size_bound() {
        assert_eq!(required_sample_size(0.5, 0.5).unwrap(), 3);
        assert_eq!(required_sample_size(0.01, 0.99).unwrap(), 26_492);
        for eps in [0.1, 0.05, 0.02] {
            let a = required_sample_size(eps, 0.95).unwrap() as i64;
            let b = required_sample_size(eps / 2.0, 0.95).unwrap() as i64;
            assert!((b - 4 * a).abs() <= 4, "{a} {b}");
        }
        assert!(required_sample_size(0.0, 0.5).is_err());
    }

    #[test]
    fn negative_domain_extraction() {
        let net = passthrough();
        let specs = vec![
            PropertySpec { id: "ok".into(), pre: InputDomain::unit(1), post: below(2.0) },
            PropertySpec { id: "bad".into(), pre: InputDomain::unit(1), post: below(0.5) },
        ];
        assert_eq!(extract_negative_domains(&net, &specs, 200, 0).unwrap(), vec![1]);
    }

    #[test]
    fn csv_round_trip() {
        let spec = PropertySpec {
            id: "half".into(),
            pre: InputDomain::unit(1),
            post: below(0.5),
        };
        let net = passthrough();
        let set = collect(&net, &spec, &CollectConfig::for_domain(&spec.pre, 20, 1), 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        write_samples_csv(std::slice::from_ref(&set), &path).unwrap();
        let recs = read_samples_csv(&path).unwrap();
        assert_eq!(recs.len(), 20);
        let negs = recs.iter().filter(|r| r.polarity == Polarity::Negative).count();
        assert_eq!(negs, set.num_negatives());
        assert_eq!(recs[0].input, set.positives.row(0).to_vec());
    }
}
