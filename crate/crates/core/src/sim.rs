//! Synchronous simulation of the noisy LQR consensus protocol and Monte Carlo
//! aggregation of the consensus error.
//!
//! States are stacked agent-major: `X = [x_1ᵀ, …, x_Nᵀ]ᵀ`. Noise `η(t+1)` is
//! drawn during step `t` and stored at index `t+1`, where it perturbs the
//! broadcast `x̂(t+1) = x(t+1) + η(t+1)`.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DVector;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::gain::{build_gain_table, FeasibleWeightSet, GainError, GainTable, WeightPair};
use crate::graph::{disagreement_projector, DirectedGraph};
use crate::linalg::{kron_identity, Matrix};
use crate::privacy::{noise_scale, open_unit, sample_laplace, PrivacyLedger};
use crate::schedule::{PowerLawSchedule, Schedule};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Gain(#[from] GainError),
    #[error("expected {expected} initial states, got {got}")]
    InitialStateCount { expected: usize, got: usize },
    #[error("initial state of agent {agent} has dimension {got}, expected {expected}")]
    InitialStateDimension { agent: usize, expected: usize, got: usize },
    #[error("initial state of agent {0} is not finite")]
    NonFiniteState(usize),
    #[error("privacy budget epsilon must be positive and finite, got {0}")]
    InvalidEpsilon(f64),
    #[error("trial count must be at least 1")]
    NoTrials,
}

/// Everything needed to run the protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub graph: DirectedGraph,
    pub weights: Vec<WeightPair>,
    pub feasible: Vec<FeasibleWeightSet>,
    pub schedule: PowerLawSchedule,
    pub epsilon: f64,
    pub horizon: usize,
    /// Number of protocol steps; the trace covers `t = 0..=steps`.
    pub steps: usize,
    pub initial_states: Vec<Vec<f64>>,
    pub trials: usize,
    pub seed: u64,
    pub noise_enabled: bool,
}

impl SimConfig {
    pub fn num_agents(&self) -> usize {
        self.graph.num_agents()
    }

    /// State dimension `n`, taken from the chosen weight pairs.
    pub fn dim(&self) -> usize {
        self.weights.first().map_or(0, WeightPair::dim)
    }
}

/// Random stream for one trial: ChaCha8 keyed by the master seed, with the
/// trial index selecting one of its 2⁶⁴ independent streams.
pub fn trial_stream(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Validated configuration with its gain table and lifted projector.
#[derive(Debug, Clone)]
pub struct Scenario {
    config: SimConfig,
    gains: GainTable,
    projector: Matrix,
}

/// Result of one synchronous protocol step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub states: Vec<f64>,
    /// `η(t+1)`.
    pub noises: Vec<f64>,
    /// `‖Σ_j a_ij(x̂_j(t) − x_i(t))‖_∞` per agent.
    pub gaps: Vec<f64>,
    /// Laplace scale used for `η_i(t+1)`.
    pub scales: Vec<f64>,
    /// Agents whose scale collapsed to zero with a nonzero sensitivity.
    pub exact_release: Vec<bool>,
}

impl Scenario {
    pub fn new(config: SimConfig) -> Result<Self, SimError> {
        let num_agents = config.num_agents();
        let dim = config.dim();
        if config.initial_states.len() != num_agents {
            return Err(SimError::InitialStateCount { expected: num_agents, got: config.initial_states.len() });
        }
        for (agent, x) in config.initial_states.iter().enumerate() {
            if x.len() != dim {
                return Err(SimError::InitialStateDimension { agent, expected: dim, got: x.len() });
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(SimError::NonFiniteState(agent));
            }
        }
        if !(config.epsilon.is_finite() && config.epsilon > 0.0) {
            return Err(SimError::InvalidEpsilon(config.epsilon));
        }
        if config.trials == 0 {
            return Err(SimError::NoTrials);
        }
        let gains = build_gain_table(
            &config.graph,
            &config.weights,
            &config.feasible,
            &config.schedule,
            config.horizon,
            config.steps.max(1),
        )?;
        let projector = kron_identity(&disagreement_projector(num_agents), dim);
        Ok(Self { config, gains, projector })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn gains(&self) -> &GainTable {
        &self.gains
    }

    /// `P ⊗ I_n`.
    pub fn lifted_projector(&self) -> &Matrix {
        &self.projector
    }

    pub fn dim(&self) -> usize {
        self.config.dim()
    }

    pub fn num_agents(&self) -> usize {
        self.config.num_agents()
    }

    pub fn initial_stack(&self) -> Vec<f64> {
        self.config.initial_states.iter().flatten().copied().collect()
    }

    fn neighbor_sum(&self, states: &[f64], noises: &[f64], agent: usize) -> DVector<f64> {
        let n = self.dim();
        let own = &states[agent * n..(agent + 1) * n];
        let mut sum = DVector::zeros(n);
        for j in self.config.graph.in_neighbors(agent) {
            for k in 0..n {
                sum[k] += states[j * n + k] + noises[j * n + k] - own[k];
            }
        }
        sum
    }

    /// `‖Σ_j a_ij(x̂_j − x_i)‖_∞` for every agent.
    pub fn gaps(&self, states: &[f64], noises: &[f64]) -> Vec<f64> {
        (0..self.num_agents()).map(|i| self.neighbor_sum(states, noises, i).amax()).collect()
    }

    /// One synchronous step at time `t`. `rng` is consumed only when noise is
    /// enabled, `n` uniforms per agent in agent-major, component-minor order.
    pub fn step<R: RngCore + ?Sized>(&self, states: &[f64], noises: &[f64], t: usize, rng: &mut R) -> StepOutput {
        let n = self.dim();
        let num_agents = self.num_agents();
        let sched = &self.config.schedule;
        let (c_t, p_t) = (sched.c(t), sched.p(t));

        let mut next = states.to_vec();
        let mut next_noise = vec![0.0; n * num_agents];
        let mut gaps = Vec::with_capacity(num_agents);
        let mut scales = Vec::with_capacity(num_agents);
        let mut exact_release = Vec::with_capacity(num_agents);

        for agent in 0..num_agents {
            let sum = self.neighbor_sum(states, noises, agent);
            let gap = sum.amax();
            let u = self.gains.gain(agent, t) * &sum * c_t;
            for k in 0..n {
                next[agent * n + k] += u[k];
            }
            let delta = self.gains.sensitivity(agent, t);
            let scale = if self.config.noise_enabled {
                noise_scale(n, c_t, p_t, delta, gap, self.config.epsilon).expect("validated arguments")
            } else {
                0.0
            };
            if self.config.noise_enabled {
                for k in 0..n {
                    let draw = open_unit(rng);
                    next_noise[agent * n + k] = sample_laplace(scale, draw).expect("draw in (0, 1)");
                }
            }
            gaps.push(gap);
            scales.push(scale);
            exact_release.push(self.config.noise_enabled && scale == 0.0 && delta > 0.0);
        }
        StepOutput { states: next, noises: next_noise, gaps, scales, exact_release }
    }

    /// Runs `steps` protocol steps on the stream of trial `trial`.
    pub fn run_trial(&self, trial: u64) -> SimTrace {
        let mut rng = trial_stream(self.config.seed, trial);
        self.run_with(&mut rng, trial)
    }

    /// Like [`Scenario::run_trial`] with a caller-supplied stream.
    pub fn run_with<R: RngCore + ?Sized>(&self, rng: &mut R, trial: u64) -> SimTrace {
        let n = self.dim();
        let num_agents = self.num_agents();
        let steps = self.config.steps;
        let mut trace = SimTrace {
            trial,
            dim: n,
            num_agents,
            states: Vec::with_capacity(steps + 1),
            noises: Vec::with_capacity(steps + 1),
            deltas: Vec::with_capacity(steps + 1),
            lyapunov: Vec::with_capacity(steps + 1),
            gaps: Vec::with_capacity(steps + 1),
            scales: Vec::with_capacity(steps),
            exact_release: Vec::with_capacity(steps),
            ledger: PrivacyLedger::new(),
        };

        let mut states = self.initial_stack();
        let mut noises = vec![0.0; n * num_agents];
        for t in 0..steps {
            let out = self.step(&states, &noises, t, rng);
            trace.push_slice(&self.projector, &states, &noises, out.gaps);
            trace.scales.push(out.scales);
            trace.exact_release.push(out.exact_release);
            trace
                .ledger
                .record(t, self.config.epsilon, &self.config.schedule)
                .expect("steps recorded in order");
            states = out.states;
            noises = out.noises;
        }
        let gaps = self.gaps(&states, &noises);
        trace.push_slice(&self.projector, &states, &noises, gaps);
        trace
    }

    /// Sequential Monte Carlo over trials `0..trials`.
    pub fn run_monte_carlo(&self) -> MonteCarloSummary {
        let series: Vec<Vec<f64>> =
            (0..self.config.trials as u64).map(|k| self.run_trial(k).lyapunov).collect();
        MonteCarloSummary::from_lyapunov(&series)
    }
}

/// `δ = (P ⊗ I_n)X` and `V = δᵀδ`.
pub fn consensus_error(states: &[f64], lifted_projector: &Matrix) -> (DVector<f64>, f64) {
    let x = DVector::from_column_slice(states);
    let delta = lifted_projector * x;
    let v = delta.dot(&delta);
    (delta, v)
}

/// `Σ_i ‖x_i − mean‖²`, the projector-free form of `V`.
pub fn mean_deviation_energy(states: &[f64], dim: usize) -> f64 {
    let num_agents = states.len() / dim;
    let mut total = 0.0;
    for k in 0..dim {
        let mean = (0..num_agents).map(|i| states[i * dim + k]).sum::<f64>() / num_agents as f64;
        total += (0..num_agents)
            .map(|i| {
                let d = states[i * dim + k] - mean;
                d * d
            })
            .sum::<f64>();
    }
    total
}

/// Time-indexed record of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    trial: u64,
    dim: usize,
    num_agents: usize,
    states: Vec<Vec<f64>>,
    noises: Vec<Vec<f64>>,
    deltas: Vec<DVector<f64>>,
    lyapunov: Vec<f64>,
    gaps: Vec<Vec<f64>>,
    scales: Vec<Vec<f64>>,
    exact_release: Vec<Vec<bool>>,
    ledger: PrivacyLedger,
}

impl SimTrace {
    fn push_slice(&mut self, projector: &Matrix, states: &[f64], noises: &[f64], gaps: Vec<f64>) {
        let (delta, v) = consensus_error(states, projector);
        self.states.push(states.to_vec());
        self.noises.push(noises.to_vec());
        self.deltas.push(delta);
        self.lyapunov.push(v);
        self.gaps.push(gaps);
    }

    pub fn trial(&self) -> u64 {
        self.trial
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_agents(&self) -> usize {
        self.num_agents
    }

    /// Number of stored time slices (`steps + 1`).
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Stacked `X(t)`.
    pub fn stacked_state(&self, t: usize) -> &[f64] {
        &self.states[t]
    }

    pub fn state(&self, t: usize, agent: usize) -> &[f64] {
        &self.states[t][agent * self.dim..(agent + 1) * self.dim]
    }

    /// `η_i(t)`, the noise in the broadcast at time `t`.
    pub fn noise(&self, t: usize, agent: usize) -> &[f64] {
        &self.noises[t][agent * self.dim..(agent + 1) * self.dim]
    }

    pub fn delta(&self, t: usize) -> &DVector<f64> {
        &self.deltas[t]
    }

    pub fn lyapunov(&self) -> &[f64] {
        &self.lyapunov
    }

    pub fn gap(&self, t: usize, agent: usize) -> f64 {
        self.gaps[t][agent]
    }

    /// Scale of the Laplace law for `η_i(t+1)`; defined for `t < steps`.
    pub fn scale(&self, t: usize, agent: usize) -> f64 {
        self.scales[t][agent]
    }

    pub fn exact_release(&self, t: usize, agent: usize) -> bool {
        self.exact_release[t][agent]
    }

    pub fn exact_release_count(&self) -> usize {
        self.exact_release.iter().flatten().filter(|&&f| f).count()
    }

    pub fn ledger(&self) -> &PrivacyLedger {
        &self.ledger
    }
}

/// Cross-trial statistics of `V(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloSummary {
    pub trials: usize,
    pub mean_v: Vec<f64>,
    /// Normal-approximation 95% half-widths, zero for a single trial.
    pub half_width: Vec<f64>,
    pub max_mean_v: f64,
    pub final_mean_v: f64,
}

impl MonteCarloSummary {
    /// Reduces per-trial `V(t)` series, indexed by trial. The reduction visits
    /// trials in index order, so the result does not depend on how the series
    /// were produced.
    pub fn from_lyapunov(series: &[Vec<f64>]) -> Self {
        let trials = series.len();
        assert!(trials > 0, "at least one trial");
        let len = series[0].len();
        assert!(series.iter().all(|s| s.len() == len), "trials share one step grid");

        let mut mean_v = Vec::with_capacity(len);
        let mut half_width = Vec::with_capacity(len);
        for t in 0..len {
            // shifted by the first trial so identical trials give exactly zero spread
            let pivot = series[0][t];
            let (mut s1, mut s2) = (0.0, 0.0);
            for trial in series {
                let d = trial[t] - pivot;
                s1 += d;
                s2 += d * d;
            }
            let k = trials as f64;
            mean_v.push(pivot + s1 / k);
            let hw = if trials > 1 {
                let var = ((s2 - s1 * s1 / k) / (k - 1.0)).max(0.0);
                1.96 * libm::sqrt(var / k)
            } else {
                0.0
            };
            half_width.push(hw);
        }
        let max_mean_v = mean_v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let final_mean_v = *mean_v.last().expect("nonempty grid");
        Self { trials, mean_v, half_width, max_mean_v, final_mean_v }
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn paper_config() -> SimConfig {
        let graph = DirectedGraph::from_rows(&[[0, 1, 1, 0], [0, 0, 0, 1], [0, 0, 0, 1], [1, 0, 0, 0]]).unwrap();
        let w = WeightPair::scaled_identity(3, 8.0, 2.0).unwrap();
        let f = FeasibleWeightSet::grid(3, &[6.0, 7.0, 8.0], &[2.0, 3.0]).unwrap();
        SimConfig {
            graph,
            weights: vec![w; 4],
            feasible: vec![f; 4],
            schedule: PowerLawSchedule::new(1.0 / 15.0, 1.3, 1.1).unwrap(),
            epsilon: 5.0,
            horizon: 10,
            steps: 120,
            initial_states: vec![
                vec![1.0, 10.0, 20.0],
                vec![14.0, 20.0, 7.0],
                vec![30.0, 70.0, 50.0],
                vec![55.0, 43.0, 34.0],
            ],
            trials: 4,
            seed: 2025,
            noise_enabled: true,
        }
    }

    #[test]
    fn initial_consensus_error() {
        let s = Scenario::new(paper_config()).unwrap();
        let (delta, v) = consensus_error(&s.initial_stack(), s.lifted_projector());
        assert!((v - 4783.5).abs() < 1e-9);
        assert!((delta[0] - (1.0 - 25.0)).abs() < 1e-12);
        assert!((mean_deviation_energy(&s.initial_stack(), 3) - 4783.5).abs() < 1e-9);
    }

    #[test]
    fn identical_states_are_a_fixed_point() {
        let mut cfg = paper_config();
        cfg.initial_states = vec![vec![3.0, -1.0, 2.0]; 4];
        let s = Scenario::new(cfg).unwrap();
        let mut rng = trial_stream(1, 0);
        let x = s.initial_stack();
        let out = s.step(&x, &[0.0; 12], 0, &mut rng);
        assert_eq!(out.states, x);
        assert!(out.gaps.iter().all(|&g| g == 0.0));
        assert!(out.noises.iter().all(|&e| e == 0.0));
        assert!(out.exact_release.iter().all(|&f| f));
    }

    #[test]
    fn single_edge_update() {
        // n = 1, edge 2 → 1 only; the chain has root 2.
        let graph = DirectedGraph::from_rows(&[[0, 1], [0, 0]]).unwrap();
        let w = WeightPair::scaled_identity(1, 8.0, 2.0).unwrap();
        let f = FeasibleWeightSet::new(vec![w.clone()]).unwrap();
        let cfg = SimConfig {
            graph,
            weights: vec![w; 2],
            feasible: vec![f; 2],
            schedule: PowerLawSchedule::new(0.2, 1.3, 1.1).unwrap(),
            epsilon: 1.0,
            horizon: 4,
            steps: 3,
            initial_states: vec![vec![1.0], vec![5.0]],
            trials: 1,
            seed: 0,
            noise_enabled: false,
        };
        let s = Scenario::new(cfg).unwrap();
        let k = s.gains().gain(0, 0)[(0, 0)];
        let c = 0.2;
        let out = s.step(&[1.0, 5.0], &[0.0, 0.0], 0, &mut trial_stream(0, 0));
        assert!((out.states[0] - (1.0 + c * k * 4.0)).abs() < 1e-12);
        assert_eq!(out.states[1], 5.0);
    }

    #[test]
    fn zero_steps_keeps_initial_slice() {
        let mut cfg = paper_config();
        cfg.steps = 0;
        let trace = Scenario::new(cfg).unwrap().run_trial(0);
        assert_eq!(trace.len(), 1);
        assert!((trace.lyapunov()[0] - 4783.5).abs() < 1e-9);
        assert!(trace.ledger().is_empty());
    }

    #[test]
    fn trace_is_reproducible_and_consistent() {
        let s = Scenario::new(paper_config()).unwrap();
        let a = s.run_trial(3);
        assert_eq!(a, s.run_trial(3));
        assert_ne!(a.lyapunov(), s.run_trial(4).lyapunov());
        assert_eq!(a.len(), 121);
        assert_eq!(a.ledger().len(), 120);
        assert!(a.noise(0, 0).iter().all(|&e| e == 0.0));
        let sched = &s.config().schedule;
        for t in 0..120 {
            let (delta, v) = consensus_error(a.stacked_state(t), s.lifted_projector());
            assert!((&delta - a.delta(t)).amax() <= 1e-12);
            assert_eq!(v, a.lyapunov()[t]);
            for i in 0..4 {
                let b = noise_scale(3, sched.c(t), sched.p(t), s.gains().sensitivity(i, t), a.gap(t, i), 5.0).unwrap();
                assert_eq!(b, a.scale(t, i));
            }
        }
    }

    #[test]
    fn zero_sensitivity_matches_noiseless_run() {
        let mut cfg = paper_config();
        let w = cfg.weights[0].clone();
        cfg.feasible = vec![FeasibleWeightSet::new(vec![w]).unwrap(); 4];
        cfg.steps = 30;
        let noisy = Scenario::new(cfg.clone()).unwrap().run_trial(9);
        cfg.noise_enabled = false;
        let quiet = Scenario::new(cfg).unwrap().run_trial(9);
        assert_eq!(noisy.lyapunov(), quiet.lyapunov());
        for t in 0..=30 {
            assert_eq!(noisy.stacked_state(t), quiet.stacked_state(t));
        }
    }

    #[test]
    fn noiseless_paper_run_contracts() {
        let mut cfg = paper_config();
        cfg.noise_enabled = false;
        let trace = Scenario::new(cfg).unwrap().run_trial(0);
        let v = trace.lyapunov();
        assert!(v[120] < v[0]);
        assert!(v.iter().all(|&x| x <= 10.0 * v[0]));
    }

    #[test]
    fn single_trial_summary_is_that_trial() {
        let mut cfg = paper_config();
        cfg.trials = 1;
        let s = Scenario::new(cfg).unwrap();
        let summary = s.run_monte_carlo();
        assert_eq!(summary.mean_v, s.run_trial(0).lyapunov());
        assert!(summary.half_width.iter().all(|&h| h == 0.0));
    }

    #[test]
    fn noiseless_trials_have_zero_spread() {
        let mut cfg = paper_config();
        cfg.noise_enabled = false;
        cfg.trials = 5;
        cfg.steps = 20;
        let summary = Scenario::new(cfg).unwrap().run_monte_carlo();
        assert!(summary.half_width.iter().all(|&h| h == 0.0));
    }

    #[test]
    fn config_validation() {
        let mut cfg = paper_config();
        cfg.initial_states.pop();
        assert!(matches!(Scenario::new(cfg), Err(SimError::InitialStateCount { .. })));
        let mut cfg = paper_config();
        cfg.epsilon = 0.0;
        assert!(matches!(Scenario::new(cfg), Err(SimError::InvalidEpsilon(_))));
        let mut cfg = paper_config();
        cfg.trials = 0;
        assert!(matches!(Scenario::new(cfg), Err(SimError::NoTrials)));
        let mut cfg = paper_config();
        cfg.graph = DirectedGraph::empty(4).unwrap();
        assert!(matches!(Scenario::new(cfg), Err(SimError::Gain(GainError::NoSpanningTree))));
    }
}
