//! Particle swarm optimization (minimization).
//!
//! Each step updates every particle with
//!
//! ```text
//! v <- omega * v + U(0, c1) * (p_best - x) + U(0, c2) * (g_best - x)
//! x <- x + v
//! ```
//!
//! with a fresh uniform draw per dimension, then re-evaluates the fitness.
//! Fitness evaluations within a step run concurrently; every reduction is
//! done in particle order, so a run is fully determined by its seed.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{RepairError, Result};
use crate::sampler::{seeded_rng, SeededRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwarmConfig {
    /// Inertia weight.
    pub omega: f64,
    /// Cognitive coefficient.
    pub c1: f64,
    /// Social coefficient.
    pub c2: f64,
    pub particles: usize,
    pub max_iters: usize,
    /// Stop after this many consecutive steps without a global-best
    /// improvement.
    pub stagnation_window: usize,
    /// Per-dimension position bounds.
    pub bounds: Option<Vec<(f64, f64)>>,
    /// Per-component velocity limit.
    pub velocity_clamp: Option<f64>,
    /// Relative spread of the particles placed around an initial point.
    pub init_spread: f64,
    /// Minimum absolute spread per coordinate.
    pub init_floor: f64,
    pub seed: u64,
}

impl Default for SwarmConfig {
    fn default() -> Self {
        Self {
            omega: 0.8,
            c1: 0.41,
            c2: 0.41,
            particles: 20,
            max_iters: 100,
            stagnation_window: 10,
            bounds: None,
            velocity_clamp: None,
            init_spread: 0.1,
            init_floor: 0.01,
            seed: 42,
        }
    }
}

impl SwarmConfig {
    pub fn validate(&self, dim: usize) -> Result<()> {
        let bad = |m: &str| Err(RepairError::InvalidConfig(m.to_string()));
        if dim == 0 {
            return bad("search dimension must be at least 1");
        }
        if !(self.omega >= 0.0 && self.c1 >= 0.0 && self.c2 >= 0.0) {
            return bad("omega, c1 and c2 must be nonnegative");
        }
        if self.particles < 2 {
            return bad("a swarm needs at least two particles");
        }
        if self.max_iters == 0 || self.stagnation_window == 0 {
            return bad("max_iters and stagnation_window must be positive");
        }
        if let Some(b) = &self.bounds {
            if b.len() != dim {
                return bad("bounds must have one entry per dimension");
            }
            if b.iter().any(|(lo, hi)| !(lo <= hi)) {
                return bad("each bound needs lo <= hi");
            }
        }
        if matches!(self.velocity_clamp, Some(v) if !(v > 0.0)) {
            return bad("velocity clamp must be positive");
        }
        Ok(())
    }
}

/// Where the particles start.
#[derive(Debug, Clone, PartialEq)]
pub enum SwarmInit {
    /// Particle 0 at the point, the rest Gaussian-perturbed around it.
    Around(Vec<f64>),
    /// Uniform in a box.
    Uniform(Vec<(f64, f64)>),
    /// One position per particle.
    Explicit(Vec<Vec<f64>>),
}

impl SwarmInit {
    fn dim(&self) -> usize {
        match self {
            SwarmInit::Around(p) => p.len(),
            SwarmInit::Uniform(b) => b.len(),
            SwarmInit::Explicit(ps) => ps.first().map_or(0, Vec::len),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    pub fitness: f64,
    pub best_position: Vec<f64>,
    pub best_fitness: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwarmState {
    pub particles: Vec<Particle>,
    pub global_best: Vec<f64>,
    pub global_best_fitness: f64,
    pub iteration: usize,
}

fn sanitize(f: f64) -> f64 {
    if f.is_finite() {
        f
    } else {
        f64::INFINITY
    }
}

fn evaluate_all<F>(positions: &[Vec<f64>], fitness: &F) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    positions.par_iter().map(|p| sanitize(fitness(p))).collect()
}

fn clamp_to(bounds: &Option<Vec<(f64, f64)>>, x: &mut [f64]) {
    if let Some(b) = bounds {
        for (v, (lo, hi)) in x.iter_mut().zip(b) {
            *v = v.clamp(*lo, *hi);
        }
    }
}

/// A swarm together with its random stream.
pub struct Swarm {
    state: SwarmState,
    rng: SeededRng,
}

impl Swarm {
    pub fn new<F>(cfg: &SwarmConfig, init: &SwarmInit, fitness: &F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let dim = init.dim();
        cfg.validate(dim)?;
        let mut rng = seeded_rng(cfg.seed);
        let mut positions: Vec<Vec<f64>> = match init {
            SwarmInit::Around(center) => {
                let std_normal = Normal::new(0.0, 1.0).expect("valid normal");
                let mut ps = vec![center.clone()];
                for _ in 1..cfg.particles {
                    ps.push(
                        center
                            .iter()
                            .map(|&c| {
                                let sigma = (cfg.init_spread * c.abs()).max(cfg.init_floor);
                                c + sigma * std_normal.sample(&mut rng)
                            })
                            .collect(),
                    );
                }
                ps
            }
            SwarmInit::Uniform(b) => (0..cfg.particles)
                .map(|_| b.iter().map(|&(lo, hi)| lo + (hi - lo) * rng.random::<f64>()).collect())
                .collect(),
            SwarmInit::Explicit(ps) => {
                if ps.len() != cfg.particles || ps.iter().any(|p| p.len() != dim) {
                    return Err(RepairError::InvalidConfig(
                        "explicit initialization needs one full position per particle".into(),
                    ));
                }
                ps.clone()
            }
        };
        for p in &mut positions {
            clamp_to(&cfg.bounds, p);
        }
        let fits = evaluate_all(&positions, fitness);
        let particles: Vec<Particle> = positions
            .into_iter()
            .zip(fits)
            .map(|(p, f)| Particle {
                velocity: vec![0.0; dim],
                best_position: p.clone(),
                position: p,
                fitness: f,
                best_fitness: f,
            })
            .collect();
        let mut best = 0;
        for (i, p) in particles.iter().enumerate() {
            if p.best_fitness < particles[best].best_fitness {
                best = i;
            }
        }
        let state = SwarmState {
            global_best: particles[best].best_position.clone(),
            global_best_fitness: particles[best].best_fitness,
            particles,
            iteration: 0,
        };
        Ok(Self { state, rng })
    }

    pub fn state(&self) -> &SwarmState {
        &self.state
    }

    pub fn into_state(self) -> SwarmState {
        self.state
    }

    /// One velocity/position update plus re-evaluation. Returns whether the
    /// global best strictly improved.
    pub fn step<F>(&mut self, cfg: &SwarmConfig, fitness: &F) -> bool
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let g = self.state.global_best.clone();
        for p in &mut self.state.particles {
            for d in 0..p.position.len() {
                let r1 = cfg.c1 * self.rng.random::<f64>();
                let r2 = cfg.c2 * self.rng.random::<f64>();
                let x = p.position[d];
                let mut v = cfg.omega * p.velocity[d]
                    + r1 * (p.best_position[d] - x)
                    + r2 * (g[d] - x);
                if let Some(limit) = cfg.velocity_clamp {
                    v = v.clamp(-limit, limit);
                }
                p.velocity[d] = v;
                p.position[d] = x + v;
            }
            clamp_to(&cfg.bounds, &mut p.position);
        }
        let positions: Vec<Vec<f64>> = self.state.particles.iter().map(|p| p.position.clone()).collect();
        let fits = evaluate_all(&positions, fitness);
        let mut improved = false;
        for (p, f) in self.state.particles.iter_mut().zip(fits) {
            p.fitness = f;
            if f < p.best_fitness {
                p.best_fitness = f;
                p.best_position.clone_from(&p.position);
            }
            if f < self.state.global_best_fitness {
                self.state.global_best_fitness = f;
                self.state.global_best.clone_from(&p.position);
                improved = true;
            }
        }
        self.state.iteration += 1;
        improved
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxIterations,
    Stagnation,
    Monitor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsoOutcome {
    pub best_position: Vec<f64>,
    pub best_fitness: f64,
    pub iterations: usize,
    /// Global-best fitness after initialization and after every step.
    pub history: Vec<f64>,
    pub stop_reason: StopReason,
}

pub fn optimize<F>(fitness: F, init: &SwarmInit, cfg: &SwarmConfig) -> Result<PsoOutcome>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    optimize_with_monitor(fitness, init, cfg, |_| true)
}

/// Like [`optimize`], but `monitor` sees the state after every step and may
/// stop the run by returning `false`.
pub fn optimize_with_monitor<F, M>(
    fitness: F,
    init: &SwarmInit,
    cfg: &SwarmConfig,
    mut monitor: M,
) -> Result<PsoOutcome>
where
    F: Fn(&[f64]) -> f64 + Sync,
    M: FnMut(&SwarmState) -> bool,
{
    let mut swarm = Swarm::new(cfg, init, &fitness)?;
    let mut history = vec![swarm.state().global_best_fitness];
    let mut since_improvement = 0;
    let mut stop_reason = StopReason::MaxIterations;
    while swarm.state().iteration < cfg.max_iters {
        if swarm.step(cfg, &fitness) {
            since_improvement = 0;
        } else {
            since_improvement += 1;
        }
        history.push(swarm.state().global_best_fitness);
        if !monitor(swarm.state()) {
            stop_reason = StopReason::Monitor;
            break;
        }
        if since_improvement >= cfg.stagnation_window {
            stop_reason = StopReason::Stagnation;
            break;
        }
    }
    let state = swarm.into_state();
    Ok(PsoOutcome {
        best_position: state.global_best,
        best_fitness: state.global_best_fitness,
        iterations: state.iteration,
        history,
        stop_reason,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere(x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum()
    }

    #[test]
    fn zero_coefficients_freeze_positions() {
        let cfg = SwarmConfig {
            omega: 0.0,
            c1: 0.0,
            c2: 0.0,
            ..SwarmConfig::default()
        };
        let init = SwarmInit::Uniform(vec![(-1.0, 1.0); 3]);
        let mut swarm = Swarm::new(&cfg, &init, &sphere).unwrap();
        swarm.step(&cfg, &sphere);
        let after_one: Vec<Vec<f64>> = swarm.state().particles.iter().map(|p| p.position.clone()).collect();
        assert!(swarm.state().particles.iter().all(|p| p.velocity.iter().all(|&v| v == 0.0)));
        swarm.step(&cfg, &sphere);
        let after_two: Vec<Vec<f64>> = swarm.state().particles.iter().map(|p| p.position.clone()).collect();
        assert_eq!(after_one, after_two);
    }

    #[test]
    fn zero_attraction_keeps_inertia_only() {
        let cfg = SwarmConfig {
            particles: 2,
            ..SwarmConfig::default()
        };
        let init = SwarmInit::Explicit(vec![vec![0.0], vec![0.0]]);
        let mut swarm = Swarm::new(&cfg, &init, &sphere).unwrap();
        swarm.state.particles[0].velocity = vec![0.5];
        swarm.step(&cfg, &sphere);
        // particle 1: x = p_i = p_g = 0, v = 0 -> stays
        assert_eq!(swarm.state().particles[1].velocity, vec![0.0]);
        // particle 0 started at p_i = p_g = x, so only inertia acts
        assert_eq!(swarm.state().particles[0].velocity, vec![0.8 * 0.5]);
    }

    #[test]
    fn constant_fitness_stagnates_exactly() {
        let cfg = SwarmConfig::default();
        let out = optimize(|_| 1.0, &SwarmInit::Around(vec![1.0, 2.0]), &cfg).unwrap();
        assert_eq!(out.iterations, cfg.stagnation_window);
        assert_eq!(out.stop_reason, StopReason::Stagnation);
    }

    #[test]
    fn same_seed_same_trajectory() {
        let cfg = SwarmConfig::default();
        let init = SwarmInit::Uniform(vec![(-5.0, 5.0); 4]);
        let a = optimize(sphere, &init, &cfg).unwrap();
        let b = optimize(sphere, &init, &cfg).unwrap();
        assert_eq!(a, b);
        let c = optimize(sphere, &init, &SwarmConfig { seed: 7, ..cfg }).unwrap();
        assert_ne!(a.best_position, c.best_position);
    }

    #[test]
    fn non_finite_fitness_never_wins() {
        let cfg = SwarmConfig { max_iters: 20, ..SwarmConfig::default() };
        let f = |x: &[f64]| if x[0] > 0.0 { f64::NAN } else { sphere(x) };
        let out = optimize(f, &SwarmInit::Uniform(vec![(-1.0, 1.0)]), &cfg).unwrap();
        assert!(out.best_fitness.is_finite());
        assert!(out.best_position[0] <= 0.0);
    }

    #[test]
    fn bounds_are_respected() {
        let cfg = SwarmConfig {
            bounds: Some(vec![(0.5, 2.0); 3]),
            ..SwarmConfig::default()
        };
        let init = SwarmInit::Uniform(vec![(-3.0, 3.0); 3]);
        let mut swarm = Swarm::new(&cfg, &init, &sphere).unwrap();
        for _ in 0..30 {
            swarm.step(&cfg, &sphere);
            for p in &swarm.state().particles {
                assert!(p.position.iter().all(|&v| (0.5..=2.0).contains(&v)));
            }
        }
    }

    #[test]
    fn invalid_configs() {
        let init = SwarmInit::Around(vec![0.0]);
        let cfg = SwarmConfig { particles: 1, ..SwarmConfig::default() };
        assert!(Swarm::new(&cfg, &init, &sphere).is_err());
        let cfg = SwarmConfig { omega: -0.1, ..SwarmConfig::default() };
        assert!(Swarm::new(&cfg, &init, &sphere).is_err());
        assert!(Swarm::new(&SwarmConfig::default(), &SwarmInit::Around(vec![]), &sphere).is_err());
    }

    #[test]
    fn bests_are_monotone_and_personal() {
        let cfg = SwarmConfig::default();
        for seed in 0..5 {
            let cfg = SwarmConfig { seed, ..cfg.clone() };
            let rastrigin = |x: &[f64]| {
                x.iter()
                    .map(|v| v * v - 10.0 * (2.0 * std::f64::consts::PI * v).cos() + 10.0)
                    .sum::<f64>()
            };
            let init = SwarmInit::Uniform(vec![(-5.0, 5.0); 3]);
            let mut swarm = Swarm::new(&cfg, &init, &rastrigin).unwrap();
            let mut seen_best: Vec<f64> = swarm.state().particles.iter().map(|p| p.fitness).collect();
            let mut g = swarm.state().global_best_fitness;
            for _ in 0..40 {
                swarm.step(&cfg, &rastrigin);
                let s = swarm.state();
                assert!(s.global_best_fitness <= g);
                g = s.global_best_fitness;
                for (p, best) in s.particles.iter().zip(seen_best.iter_mut()) {
                    *best = best.min(p.fitness);
                    assert_eq!(p.best_fitness, *best);
                    assert_eq!(rastrigin(&p.best_position), p.best_fitness);
                    assert!(g <= p.best_fitness);
                }
            }
        }
    }
}
