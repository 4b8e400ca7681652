//! Theoretical consensus-error bound `σ`, the a-priori envelope `V̄`, the
//! contraction constant `ρ_λ`, and the sequence envelope used to show
//! boundedness of recursively dominated sequences.

use alloc::vec::Vec;

use crate::gain::GainTable;
use crate::graph::{disagreement_projector, DirectedGraph, SpectralConstants};
use crate::linalg::{kron_identity, symmetric_eigenvalues, Matrix};
use crate::schedule::{
    compute_c3, kappa_epsilon, validate_assumptions, AssumptionReport, PowerLawSchedule, Schedule, ScheduleError,
};
use crate::sim::{consensus_error, Scenario};

/// Relative threshold separating positive eigenvalues from rounding noise.
pub const EIGEN_REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BoundsError {
    #[error("contraction constant ρ_λ is undefined ({0:?})")]
    RhoLambdaUndefined(RhoLambda),
    #[error("envelope V̄ undefined: q = {q:e} is not below 1")]
    VBarUndefined { q: f64 },
    #[error("first-term denominator 1 + c(0)²ρ_LΔ̄² − c(0)ρ_λ = {0} is not positive")]
    NonPositiveDenominator(f64),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
}

/// Where on the evaluation grid a gain was taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridPoint {
    Step(usize),
    /// The `c → 0` limit gain.
    Limit,
}

/// Smallest positive eigenvalue of `S_t = P̄K_tℒ̄ + (P̄K_tℒ̄)ᵀ` over the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RhoLambda {
    Defined { value: f64, at: GridPoint },
    /// `S_t` has an eigenvalue below `−1e−9·‖S_t‖` at `at`.
    Negative { at: GridPoint, eigenvalue: f64 },
    /// `S_t` has no positive eigenvalue at `at` (for example `K_t = 0`).
    NoPositive { at: GridPoint },
}

impl RhoLambda {
    pub fn value(&self) -> Option<f64> {
        match *self {
            RhoLambda::Defined { value, .. } => Some(value),
            _ => None,
        }
    }
}

/// Smallest positive eigenvalue of `S = P̄Kℒ̄ + (P̄Kℒ̄)ᵀ` for one block gain,
/// or the offending eigenvalue.
pub fn contraction_eigenvalue(projector: &Matrix, block_gain: &Matrix, laplacian: &Matrix) -> Result<f64, Option<f64>> {
    let m = projector * block_gain * laplacian;
    let s = &m + m.transpose();
    let eig = symmetric_eigenvalues(&s);
    let norm = eig.iter().map(|e| e.abs()).fold(0.0, f64::max);
    let tol = EIGEN_REL_TOL * norm;
    if let Some(&neg) = eig.iter().find(|&&e| e < -tol) {
        return Err(Some(neg));
    }
    eig.into_iter().find(|&e| e > tol).ok_or(None)
}

/// `ρ_λ` over `t = 0..=steps` of the table and the limit gain.
pub fn rho_lambda(graph: &DirectedGraph, table: &GainTable, dim: usize) -> RhoLambda {
    let projector = kron_identity(&disagreement_projector(graph.num_agents()), dim);
    let laplacian = graph.lifted_laplacian(dim);
    let grid = (0..=table.steps())
        .map(|t| (GridPoint::Step(t), table.block_gain(t)))
        .chain(core::iter::once((GridPoint::Limit, table.block_limit_gain())));

    let mut best: Option<(f64, GridPoint)> = None;
    for (at, k) in grid {
        match contraction_eigenvalue(&projector, &k, &laplacian) {
            Ok(value) => {
                if best.is_none_or(|(b, _)| value < b) {
                    best = Some((value, at));
                }
            }
            Err(Some(eigenvalue)) => return RhoLambda::Negative { at, eigenvalue },
            Err(None) => return RhoLambda::NoPositive { at },
        }
    }
    let (value, at) = best.expect("grid is nonempty");
    RhoLambda::Defined { value, at }
}

/// `V(1)`: one noiseless step from the initial states.
pub fn v1(scenario: &Scenario) -> f64 {
    let x0 = scenario.initial_stack();
    let zeros = alloc::vec![0.0; x0.len()];
    // η(0) = 0, so the step's states do not depend on the stream.
    let mut rng = crate::sim::trial_stream(0, 0);
    let out = scenario.step(&x0, &zeros, 0, &mut rng);
    consensus_error(&out.states, scenario.lifted_projector()).1
}

/// Constants entering `σ` and `V̄`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs {
    pub num_agents: usize,
    pub rho_l: f64,
    pub rho_a: f64,
    pub rho_lambda: f64,
    pub delta_bar: f64,
    pub kappa: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    /// Lower bound on `Σ_{t≥0} c(t)`, possibly infinite.
    pub sum_c: f64,
    pub c0: f64,
    pub v1: f64,
}

impl BoundInputs {
    /// `ρ_LΔ̄²C1 − ρ_λΣc(t)`.
    pub fn exponent(&self) -> f64 {
        let growth = self.rho_l * self.delta_bar * self.delta_bar * self.c1;
        if self.rho_lambda == 0.0 {
            growth
        } else {
            growth - self.rho_lambda * self.sum_c
        }
    }

    /// `1 + c(0)²ρ_LΔ̄² − c(0)ρ_λ`.
    pub fn denominator(&self) -> f64 {
        1.0 + self.c0 * self.c0 * self.rho_l * self.delta_bar * self.delta_bar - self.c0 * self.rho_lambda
    }

    /// `e^{exponent}/denominator`, the factor multiplying `V(1)`.
    pub fn first_factor(&self) -> Result<f64, BoundsError> {
        let den = self.denominator();
        if !(den > 0.0) {
            return Err(BoundsError::NonPositiveDenominator(den));
        }
        Ok(libm::exp(self.exponent()) / den)
    }

    fn noise_coupling(&self) -> f64 {
        2.0 * (self.num_agents as f64 - 1.0) * self.rho_a * self.kappa * self.delta_bar * self.delta_bar
    }

    /// `q = 2(N−1)ρ_Aκ_εΔ̄²C2·e^{exponent}`; `V̄` exists iff `q < 1`.
    pub fn q(&self) -> f64 {
        let coupling = self.noise_coupling() * self.c2;
        if coupling == 0.0 {
            0.0
        } else {
            coupling * libm::exp(self.exponent())
        }
    }
}

/// A-priori envelope of `E[V(t)]`.
pub fn v_bar(inputs: &BoundInputs) -> Result<f64, BoundsError> {
    let first = inputs.first_factor()?;
    let q = inputs.q();
    if !(q < 1.0) {
        return Err(BoundsError::VBarUndefined { q });
    }
    Ok(first * inputs.v1 / (1.0 - q))
}

/// `σ = e^{exponent}/denominator·V(1) + 2(N−1)ρ_Aκ_εΔ̄²C2C3V̄`.
pub fn sigma_bound(inputs: &BoundInputs, v_bar: f64) -> Result<f64, BoundsError> {
    let first = inputs.first_factor()? * inputs.v1;
    let coupling = inputs.noise_coupling() * inputs.c2 * inputs.c3;
    let second = if coupling == 0.0 { 0.0 } else { coupling * v_bar };
    Ok(first + second)
}

/// Envelope sequences for `a_n ≤ (1+c_n)a_{n−1} + d_n Σ_{k=1}^n a_{n−k}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lemma4Envelope {
    /// `β_n = (1 + c_n + n·d_n)β_{n−1}`, `β_0 = a_0`.
    pub envelope: Vec<f64>,
    /// `e^{Σ_{t=1}^n (c_t + t·d_t)}·a_0`.
    pub closed_form: Vec<f64>,
}

/// Builds the envelope for `n = 0..=t_max`. `c[n]` and `d[n]` hold the
/// coefficients of step `n`; index 0 is ignored.
pub fn lemma4_envelope(c: &[f64], d: &[f64], a0: f64, t_max: usize) -> Lemma4Envelope {
    assert!(c.len() > t_max && d.len() > t_max, "coefficients cover 1..=t_max");
    let mut envelope = Vec::with_capacity(t_max + 1);
    let mut closed_form = Vec::with_capacity(t_max + 1);
    envelope.push(a0);
    closed_form.push(a0);
    let mut beta = a0;
    let mut exponent = 0.0;
    for n in 1..=t_max {
        let growth = c[n] + n as f64 * d[n];
        beta *= 1.0 + growth;
        exponent += growth;
        envelope.push(beta);
        closed_form.push(libm::exp(exponent) * a0);
    }
    Lemma4Envelope { envelope, closed_form }
}

/// Everything the theory says about one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundsReport {
    pub spectral: SpectralConstants,
    pub delta_hat: f64,
    pub delta_bar: f64,
    pub kappa_eps: f64,
    pub rho_lambda: RhoLambda,
    pub c1: Result<f64, ScheduleError>,
    pub c2: Result<f64, ScheduleError>,
    pub c3: Result<f64, BoundsError>,
    /// Lower bound on `Σ c(t)`; infinite when the series diverges.
    pub sum_c: f64,
    pub v0: f64,
    pub v1: f64,
    /// `min_t 1 + c²(t)ρ_LΔ̄² − c(t)ρ_λ`, when `ρ_λ` is defined.
    pub contraction_margin: Option<f64>,
    pub q: Option<f64>,
    pub v_bar: Result<f64, BoundsError>,
    pub sigma: Result<f64, BoundsError>,
    /// `Σc(t)` diverges and `ρ_λ > 0`, so the first term of `σ` is 0.
    pub first_term_vanishes: bool,
    pub assumptions: AssumptionReport,
}

/// Default precision for the schedule constants.
pub const DEFAULT_PRECISION: f64 = 1e-10;

/// Sweep length for the contraction clause before the analytic tail.
pub const CONTRACTION_SWEEP: usize = 10_000;

impl BoundsReport {
    pub fn compute(scenario: &Scenario, precision: f64) -> Self {
        let cfg = scenario.config();
        let table = scenario.gains();
        let sched: &PowerLawSchedule = &cfg.schedule;
        let dim = scenario.dim();
        let num_agents = scenario.num_agents();

        let spectral = cfg.graph.spectral_constants();
        let delta_hat = table.delta_hat();
        let delta_bar = table.delta_bar();
        let kappa_eps = kappa_epsilon(dim, num_agents, delta_hat, cfg.epsilon).expect("epsilon validated");
        let rho = rho_lambda(&cfg.graph, table, dim);
        let rho_value = rho.value();

        let c1 = sched.c1_bounds(precision).map(|b| b.upper);
        let c2 = sched.c2_bounds(precision).map(|b| b.upper);
        let sum_c = sched.sum_c_bounds(precision).lower;
        let c3 = match rho_value {
            Some(rl) => compute_c3(sched, spectral.rho_l, rl, delta_bar, precision).map_err(BoundsError::from),
            None => Err(BoundsError::RhoLambdaUndefined(rho)),
        };

        let x0 = scenario.initial_stack();
        let v0 = consensus_error(&x0, scenario.lifted_projector()).1;
        let v1 = v1(scenario);

        let assumptions =
            validate_assumptions(sched, kappa_eps, spectral.rho_l, rho_value, delta_bar, CONTRACTION_SWEEP);
        let contraction_margin = rho_value.map(|_| 1.0 + assumptions.a4_contraction.value);

        let inputs = match (rho_value, &c1, &c2, &c3) {
            (Some(rho_lambda), Ok(c1), Ok(c2), Ok(c3)) => Some(BoundInputs {
                num_agents,
                rho_l: spectral.rho_l,
                rho_a: spectral.rho_a,
                rho_lambda,
                delta_bar,
                kappa: kappa_eps,
                c1: *c1,
                c2: *c2,
                c3: *c3,
                sum_c,
                c0: sched.c(0),
                v1,
            }),
            _ => None,
        };
        let first_term_vanishes = sum_c.is_infinite() && rho_value.is_some_and(|r| r > 0.0);

        let (q, v_bar, sigma) = match inputs {
            Some(inputs) => {
                let vb = v_bar(&inputs);
                let sigma = vb.clone().and_then(|vb| sigma_bound(&inputs, vb));
                (Some(inputs.q()), vb, sigma)
            }
            None => {
                let err = match (&c1, &c2, &c3) {
                    (Err(e), _, _) | (_, Err(e), _) => BoundsError::Schedule(e.clone()),
                    (_, _, Err(e)) => e.clone(),
                    _ => BoundsError::RhoLambdaUndefined(rho),
                };
                (None, Err(err.clone()), Err(err))
            }
        };

        Self {
            spectral,
            delta_hat,
            delta_bar,
            kappa_eps,
            rho_lambda: rho,
            c1,
            c2,
            c3,
            sum_c,
            v0,
            v1,
            contraction_margin,
            q,
            v_bar,
            sigma,
            first_term_vanishes,
            assumptions,
        }
    }
}
