//! Property specifications: an axis-aligned input box (pre-condition) and a
//! disjunction of linear-inequality conjunctions over the outputs
//! (post-condition).

use std::path::Path;

use ndarray::{ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{RepairError, Result};
use crate::network::Network;

/// Axis-aligned box in the network's input space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDomain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl InputDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let d = Self { lower, upper };
        d.validate()?;
        Ok(d)
    }

    pub fn unit(dim: usize) -> Self {
        Self {
            lower: vec![0.0; dim],
            upper: vec![1.0; dim],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lower.len() != self.upper.len() {
            return Err(RepairError::InvalidProperty(format!(
                "box has {} lower and {} upper bounds",
                self.lower.len(),
                self.upper.len()
            )));
        }
        if self.lower.is_empty() {
            return Err(RepairError::InvalidProperty("box has no dimensions".into()));
        }
        for (i, (l, u)) in self.lower.iter().zip(&self.upper).enumerate() {
            if !(l.is_finite() && u.is_finite()) || l > u {
                return Err(RepairError::InvalidProperty(format!(
                    "dimension {i}: bounds [{l}, {u}] are not a nonempty finite interval"
                )));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| *v >= *l && *v <= *u)
    }

    /// `true` if `self` lies inside `other`.
    pub fn is_subset_of(&self, other: &InputDomain) -> bool {
        self.dim() == other.dim()
            && (0..self.dim())
                .all(|i| self.lower[i] >= other.lower[i] && self.upper[i] <= other.upper[i])
    }

    pub fn widths(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).collect()
    }

    pub fn volume(&self) -> f64 {
        self.widths().iter().product()
    }
}

/// Enlarge `d` by `delta` on every side, then intersect with `clamp`.
pub fn delta_neighbourhood(d: &InputDomain, delta: f64, clamp: Option<&InputDomain>) -> InputDomain {
    let mut lower: Vec<f64> = d.lower.iter().map(|l| l - delta).collect();
    let mut upper: Vec<f64> = d.upper.iter().map(|u| u + delta).collect();
    if let Some(c) = clamp {
        for i in 0..lower.len().min(c.dim()) {
            lower[i] = lower[i].max(c.lower[i]);
            upper[i] = upper[i].min(c.upper[i]);
        }
    }
    InputDomain { lower, upper }
}

/// `coeffs . y <= rhs`, or `<` when `strict`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearAtom {
    pub coeffs: Vec<f64>,
    pub rhs: f64,
    #[serde(default)]
    pub strict: bool,
}

impl LinearAtom {
    pub fn value(&self, y: &[f64]) -> f64 {
        self.coeffs.iter().zip(y).map(|(c, v)| c * v).sum()
    }

    pub fn holds(&self, y: &[f64]) -> bool {
        let lhs = self.value(y);
        if self.strict {
            lhs < self.rhs
        } else {
            lhs <= self.rhs
        }
    }

    /// `y_a - y_b <= 0` (or `< 0`).
    fn difference(n: usize, a: usize, b: usize, strict: bool) -> Self {
        let mut coeffs = vec![0.0; n];
        coeffs[a] = 1.0;
        coeffs[b] = -1.0;
        Self {
            coeffs,
            rhs: 0.0,
            strict,
        }
    }
}

/// One atom of a post-condition clause, as written in property files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Atom {
    Linear(LinearAtom),
    /// Output `i` is minimal (ties allowed).
    Argmin { argmin: usize },
    /// Output `i` is maximal (ties allowed).
    Argmax { argmax: usize },
    /// Some other output is strictly smaller than output `i`.
    NotArgmin { not_argmin: usize },
    /// Some other output is strictly larger than output `i`.
    NotArgmax { not_argmax: usize },
}

impl Atom {
    fn holds(&self, y: &[f64]) -> bool {
        match *self {
            Atom::Linear(ref a) => a.holds(y),
            Atom::Argmin { argmin: i } => y.iter().all(|v| y[i] <= *v),
            Atom::Argmax { argmax: i } => y.iter().all(|v| y[i] >= *v),
            Atom::NotArgmin { not_argmin: i } => y.iter().any(|v| *v < y[i]),
            Atom::NotArgmax { not_argmax: i } => y.iter().any(|v| *v > y[i]),
        }
    }

    /// Disjunctive normal form of this atom over `n` outputs.
    fn expand(&self, n: usize) -> Vec<Vec<LinearAtom>> {
        let others = |i: usize| (0..n).filter(move |&j| j != i);
        match *self {
            Atom::Linear(ref a) => vec![vec![a.clone()]],
            Atom::Argmin { argmin: i } => {
                vec![others(i).map(|j| LinearAtom::difference(n, i, j, false)).collect()]
            }
            Atom::Argmax { argmax: i } => {
                vec![others(i).map(|j| LinearAtom::difference(n, j, i, false)).collect()]
            }
            Atom::NotArgmin { not_argmin: i } => others(i)
                .map(|j| vec![LinearAtom::difference(n, j, i, true)])
                .collect(),
            Atom::NotArgmax { not_argmax: i } => others(i)
                .map(|j| vec![LinearAtom::difference(n, i, j, true)])
                .collect(),
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        let bad_index = |i: usize| {
            Err(RepairError::InvalidProperty(format!(
                "output index {i} out of range for {n} outputs"
            )))
        };
        match *self {
            Atom::Linear(ref a) => {
                if a.coeffs.len() != n {
                    return Err(RepairError::InvalidProperty(format!(
                        "atom has {} coefficients for {n} outputs",
                        a.coeffs.len()
                    )));
                }
                if a.coeffs.iter().any(|c| !c.is_finite()) || !a.rhs.is_finite() {
                    return Err(RepairError::InvalidProperty("non-finite atom".into()));
                }
                Ok(())
            }
            Atom::Argmin { argmin: i }
            | Atom::Argmax { argmax: i }
            | Atom::NotArgmin { not_argmin: i }
            | Atom::NotArgmax { not_argmax: i } => {
                if i >= n {
                    bad_index(i)
                } else {
                    Ok(())
                }
            }
        }
    }
}

/// Disjunction of conjunctions of atoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputCondition {
    pub clauses: Vec<Vec<Atom>>,
}

impl OutputCondition {
    /// Single-clause condition from linear atoms.
    pub fn all_of(atoms: Vec<LinearAtom>) -> Self {
        Self {
            clauses: vec![atoms.into_iter().map(Atom::Linear).collect()],
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.clauses.is_empty() {
            return Err(RepairError::InvalidProperty(
                "post-condition needs at least one clause".into(),
            ));
        }
        self.clauses
            .iter()
            .flatten()
            .try_for_each(|a| a.validate(n))
    }

    /// Expand shorthand atoms to a pure linear DNF.
    pub fn to_linear_dnf(&self, n: usize) -> Vec<Vec<LinearAtom>> {
        let mut out = Vec::new();
        for clause in &self.clauses {
            let mut partial: Vec<Vec<LinearAtom>> = vec![Vec::new()];
            for atom in clause {
                let alternatives = atom.expand(n);
                let mut next = Vec::with_capacity(partial.len() * alternatives.len());
                for p in &partial {
                    for alt in &alternatives {
                        let mut c = p.clone();
                        c.extend(alt.iter().cloned());
                        next.push(c);
                    }
                }
                partial = next;
            }
            out.extend(partial);
        }
        out
    }

    /// Dimension-unchecked satisfaction test.
    #[inline]
    pub fn holds(&self, y: &[f64]) -> bool {
        self.clauses
            .iter()
            .any(|clause| clause.iter().all(|a| a.holds(y)))
    }
}

/// `true` iff some clause of `post` has all atoms satisfied by `y`.
pub fn satisfies(post: &OutputCondition, y: &[f64], output_dim: usize) -> Result<bool> {
    if y.len() != output_dim {
        return Err(RepairError::Shape {
            expected: output_dim,
            got: y.len(),
            context: "output vector",
        });
    }
    Ok(post.holds(y))
}

/// Satisfaction of every row in a batch of outputs.
pub fn satisfies_rows(post: &OutputCondition, ys: ArrayView2<f64>) -> Vec<bool> {
    ys.rows().into_iter().map(|r| row_holds(post, r)).collect()
}

fn row_holds(post: &OutputCondition, y: ArrayView1<f64>) -> bool {
    match y.as_slice() {
        Some(s) => post.holds(s),
        None => post.holds(&y.to_vec()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertySpec {
    pub id: String,
    pub pre: InputDomain,
    pub post: OutputCondition,
}

impl PropertySpec {
    pub fn validate_for(&self, net: &Network) -> Result<()> {
        self.pre.validate()?;
        if self.pre.dim() != net.input_dim() {
            return Err(RepairError::InvalidProperty(format!(
                "spec `{}` has a {}-dimensional box for a {}-input network",
                self.id,
                self.pre.dim(),
                net.input_dim()
            )));
        }
        self.post.validate(net.output_dim())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleClass {
    Positive,
    Negative,
    OutsidePre,
}

pub fn classify_sample(net: &Network, spec: &PropertySpec, x: &[f64]) -> Result<SampleClass> {
    if x.len() != net.input_dim() {
        return Err(RepairError::Shape {
            expected: net.input_dim(),
            got: x.len(),
            context: "sample",
        });
    }
    if !spec.pre.contains(x) {
        return Ok(SampleClass::OutsidePre);
    }
    let y = net.forward(x)?;
    Ok(if satisfies(&spec.post, &y, net.output_dim())? {
        SampleClass::Positive
    } else {
        SampleClass::Negative
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecVerdict {
    pub id: String,
    pub satisfied: bool,
    pub samples: usize,
    pub negatives: usize,
    pub violation_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecSetVerdict {
    pub all_satisfied: bool,
    pub verdicts: Vec<SpecVerdict>,
}

/// Sampling-based verdict over a specification set: the set holds iff no
/// evidence point of any spec is a counterexample. Points outside a spec's
/// box are ignored.
pub fn spec_set_satisfied(
    net: &Network,
    specs: &[PropertySpec],
    evidence: &[ArrayView2<f64>],
) -> Result<SpecSetVerdict> {
    if specs.len() != evidence.len() {
        return Err(RepairError::Shape {
            expected: specs.len(),
            got: evidence.len(),
            context: "evidence sets per spec",
        });
    }
    let mut verdicts = Vec::with_capacity(specs.len());
    for (spec, points) in specs.iter().zip(evidence) {
        spec.validate_for(net)?;
        let ys = net.forward_batch(*points)?;
        let mut samples = 0;
        let mut negatives = 0;
        for (x, y) in points.rows().into_iter().zip(ys.rows()) {
            if !spec.pre.contains(&x.to_vec()) {
                continue;
            }
            samples += 1;
            if !row_holds(&spec.post, y) {
                negatives += 1;
            }
        }
        verdicts.push(SpecVerdict {
            id: spec.id.clone(),
            satisfied: negatives == 0,
            samples,
            negatives,
            violation_rate: if samples == 0 {
                0.0
            } else {
                negatives as f64 / samples as f64
            },
        });
    }
    Ok(SpecSetVerdict {
        all_satisfied: verdicts.iter().all(|v| v.satisfied),
        verdicts,
    })
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SpecFile {
    One(PropertySpec),
    Many(Vec<PropertySpec>),
    Wrapped { properties: Vec<PropertySpec> },
}

/// Parse a property document: a single spec, an array of specs, or
/// `{"properties": [...]}`.
pub fn parse_specs(text: &str) -> Result<Vec<PropertySpec>> {
    let file: SpecFile = serde_json::from_str(text)?;
    let specs = match file {
        SpecFile::One(s) => vec![s],
        SpecFile::Many(v) | SpecFile::Wrapped { properties: v } => v,
    };
    for s in &specs {
        s.pre.validate()?;
        if s.post.clauses.is_empty() {
            return Err(RepairError::InvalidProperty(format!(
                "spec `{}` has no post-condition clauses",
                s.id
            )));
        }
    }
    Ok(specs)
}

pub fn load_specs(path: impl AsRef<Path>) -> Result<Vec<PropertySpec>> {
    parse_specs(&std::fs::read_to_string(path)?)
}
