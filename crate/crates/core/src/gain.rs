//! First-step gain of the finite-horizon LQR consensus cost, its sensitivity
//! over a feasible weight set, and the per-agent, per-step gain table.
//!
//! Completing the square in the local cost turns it into regulation of
//! `e_k = x_i(t+k) − (1/d)Σ_j a_ij x̂_j(t)` with `e_{k+1} = e_k + u_k`, input
//! weight `R` and state weight `Q̃ = c·d·Q` on `k = 1..T−1`. The optimal first
//! input is `u_0 = −(R + P_1)⁻¹P_1 e_0`, which equals
//! `c·K·Σ_j a_ij (x̂_j − x_i)` for `K = (R + P_1)⁻¹P_1 / (c·d)`.

use alloc::vec;
use alloc::vec::Vec;

use crate::graph::DirectedGraph;
use crate::linalg::{asymmetry, block_diagonal, inf_norm, spectral_norm, symmetric_eigenvalues, Matrix};
use crate::schedule::Schedule;

/// `c` used to evaluate the `c → 0` limit of the gain.
pub const LIMIT_SCALE: f64 = 1e-12;

/// Largest stacked dimension `T·n` the dense QP oracle accepts.
pub const ORACLE_MAX_DIM: usize = 64;

const SYMMETRY_TOL: f64 = 1e-9;
const PSD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GainError {
    #[error("weight matrix {which} is {rows}x{cols}, expected square {dim}x{dim}")]
    Shape { which: &'static str, rows: usize, cols: usize, dim: usize },
    #[error("weight matrix {which} is not symmetric (asymmetry {asymmetry:e})")]
    NotSymmetric { which: &'static str, asymmetry: f64 },
    #[error("weight matrix Q is not positive semidefinite (min eigenvalue {0:e})")]
    QNotPsd(f64),
    #[error("weight matrix R is not positive definite (min eigenvalue {0:e})")]
    RNotPd(f64),
    #[error("feasible weight set is empty")]
    EmptyFeasibleSet,
    #[error("feasible weight set mixes dimensions {0} and {1}")]
    MixedDimensions(usize, usize),
    #[error("horizon must be at least 1")]
    ZeroHorizon,
    #[error("gain scale c must be positive and finite, got {0}")]
    InvalidScale(f64),
    #[error("QP oracle dimension T·n = {0} exceeds {ORACLE_MAX_DIM}")]
    OracleTooLarge(usize),
    #[error("graph has no directed spanning tree")]
    NoSpanningTree,
    #[error("expected {expected} per-agent entries, got {got}")]
    AgentCount { expected: usize, got: usize },
    #[error("agent {agent}: chosen weight pair has dimension {got}, expected {expected}")]
    AgentDimension { agent: usize, expected: usize, got: usize },
    #[error("step count must be at least 1")]
    ZeroSteps,
}

/// Weight pair `(Q, R)` with `Q ⪰ 0`, `R ≻ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightPair {
    q: Matrix,
    r: Matrix,
}

impl WeightPair {
    /// Validates symmetry and definiteness. Slightly negative eigenvalues of
    /// `Q` (down to `-1e-10`) are clamped to zero.
    pub fn new(q: Matrix, r: Matrix) -> Result<Self, GainError> {
        let dim = r.nrows();
        for (which, m) in [("Q", &q), ("R", &r)] {
            if m.nrows() != dim || m.ncols() != dim || dim == 0 {
                return Err(GainError::Shape { which, rows: m.nrows(), cols: m.ncols(), dim });
            }
            let asym = asymmetry(m);
            if asym > SYMMETRY_TOL * (1.0 + m.amax()) {
                return Err(GainError::NotSymmetric { which, asymmetry: asym });
            }
        }
        let q = (&q + q.transpose()) * 0.5;
        let r = (&r + r.transpose()) * 0.5;

        let r_min = symmetric_eigenvalues(&r)[0];
        if !(r_min >= PSD_TOL) {
            return Err(GainError::RNotPd(r_min));
        }
        let eig = q.clone().symmetric_eigen();
        let q_min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        if !(q_min >= -PSD_TOL) {
            return Err(GainError::QNotPsd(q_min));
        }
        let q = if q_min < 0.0 {
            let clamped = eig.eigenvalues.map(|v| v.max(0.0));
            &eig.eigenvectors * Matrix::from_diagonal(&clamped) * eig.eigenvectors.transpose()
        } else {
            q
        };
        Ok(Self { q, r })
    }

    /// `(q·I_n, r·I_n)`.
    pub fn scaled_identity(dim: usize, q: f64, r: f64) -> Result<Self, GainError> {
        Self::new(Matrix::identity(dim, dim) * q, Matrix::identity(dim, dim) * r)
    }

    /// `(diag(q), diag(r))`.
    pub fn from_diagonals(q: &[f64], r: &[f64]) -> Result<Self, GainError> {
        let qm = Matrix::from_diagonal(&nalgebra::DVector::from_column_slice(q));
        let rm = Matrix::from_diagonal(&nalgebra::DVector::from_column_slice(r));
        Self::new(qm, rm)
    }

    pub fn dim(&self) -> usize {
        self.r.nrows()
    }

    pub fn q(&self) -> &Matrix {
        &self.q
    }

    pub fn r(&self) -> &Matrix {
        &self.r
    }

    /// Both matrices multiplied by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self { q: &self.q * factor, r: &self.r * factor }
    }
}

/// Nonempty finite set of candidate weight pairs of one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibleWeightSet {
    pairs: Vec<WeightPair>,
}

impl FeasibleWeightSet {
    pub fn new(pairs: Vec<WeightPair>) -> Result<Self, GainError> {
        let first = pairs.first().ok_or(GainError::EmptyFeasibleSet)?.dim();
        if let Some(p) = pairs.iter().find(|p| p.dim() != first) {
            return Err(GainError::MixedDimensions(first, p.dim()));
        }
        Ok(Self { pairs })
    }

    /// Cartesian product `{q·I} × {r·I}`.
    pub fn grid(dim: usize, qs: &[f64], rs: &[f64]) -> Result<Self, GainError> {
        let mut pairs = Vec::with_capacity(qs.len() * rs.len());
        for &q in qs {
            for &r in rs {
                pairs.push(WeightPair::scaled_identity(dim, q, r)?);
            }
        }
        Self::new(pairs)
    }

    pub fn pairs(&self) -> &[WeightPair] {
        &self.pairs
    }

    pub fn dim(&self) -> usize {
        self.pairs[0].dim()
    }
}

fn check_args(horizon: usize, c: f64) -> Result<(), GainError> {
    if horizon == 0 {
        return Err(GainError::ZeroHorizon);
    }
    if !(c.is_finite() && c > 0.0) {
        return Err(GainError::InvalidScale(c));
    }
    Ok(())
}

/// Gain `K` such that the optimal first input is `c·K·Σ_j a_ij(x̂_j − x_i)`,
/// by backward Riccati recursion.
pub fn riccati_gain(w: &WeightPair, horizon: usize, in_degree: usize, c: f64) -> Result<Matrix, GainError> {
    check_args(horizon, c)?;
    let n = w.dim();
    if in_degree == 0 || horizon == 1 {
        return Ok(Matrix::zeros(n, n));
    }
    let cd = c * in_degree as f64;
    let q_tilde = w.q() * cd;
    let r = w.r();

    // P_T = 0; P_k = Q̃ + P − P(R + P)⁻¹P for k = T−1 down to 1.
    let mut p = Matrix::zeros(n, n);
    for _ in 1..horizon {
        let m = r + &p;
        let chol = m.cholesky().expect("R + P is positive definite");
        let correction = &p * chol.solve(&p);
        p = &q_tilde + &p - correction;
        p = (&p + p.transpose()) * 0.5;
        debug_assert!(symmetric_eigenvalues(&p)[0] >= -PSD_TOL * (1.0 + p.amax()));
    }
    let chol = (r + &p).cholesky().expect("R + P_1 is positive definite");
    Ok(chol.solve(&p) / cd)
}

/// The same gain from the stacked quadratic program in `U = (u_0, …, u_{T−1})`.
///
/// The cost is `UᵀHU + 2e_0ᵀFᵀU + const` with `e_k = e_0 + S_k U`, where `S_k`
/// sums the first `k` inputs. Stationarity `HU = −F e_0` is solved densely and
/// the first block row of `−H⁻¹F` is the map `e_0 ↦ u_0`.
pub fn qp_oracle_gain(w: &WeightPair, horizon: usize, in_degree: usize, c: f64) -> Result<Matrix, GainError> {
    check_args(horizon, c)?;
    let n = w.dim();
    let dim = horizon * n;
    if dim > ORACLE_MAX_DIM {
        return Err(GainError::OracleTooLarge(dim));
    }
    if in_degree == 0 {
        return Ok(Matrix::zeros(n, n));
    }
    let cd = c * in_degree as f64;
    let q_tilde = w.q() * cd;

    let mut h = Matrix::zeros(dim, dim);
    for k in 0..horizon {
        h.view_mut((k * n, k * n), (n, n)).copy_from(w.r());
    }
    let mut f = Matrix::zeros(dim, n);
    for k in 1..horizon {
        let mut s_k = Matrix::zeros(n, dim);
        for m in 0..k {
            s_k.view_mut((0, m * n), (n, n)).fill_with_identity();
        }
        h += s_k.transpose() * &q_tilde * &s_k;
        f += s_k.transpose() * &q_tilde;
    }
    let solution = h.lu().solve(&f).expect("stacked Hessian is nonsingular");
    // u_0 = −first_block · e_0 and u_0 = −c·d·K·e_0
    Ok(solution.rows(0, n).into_owned() / cd)
}

/// Largest `‖K(w) − K(w′)‖_∞` over ordered pairs of the feasible set.
pub fn sensitivity(feasible: &FeasibleWeightSet, horizon: usize, in_degree: usize, c: f64) -> Result<f64, GainError> {
    let gains = feasible
        .pairs()
        .iter()
        .map(|w| riccati_gain(w, horizon, in_degree, c))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(max_pairwise_spread(&gains))
}

fn max_pairwise_spread(gains: &[Matrix]) -> f64 {
    let mut worst: f64 = 0.0;
    for a in gains {
        for b in gains {
            worst = worst.max(inf_norm(&(a - b)));
        }
    }
    worst
}

/// Gains and sensitivities for every agent at `t = 0..=steps` plus the
/// `c → 0` limit.
#[derive(Debug, Clone, PartialEq)]
pub struct GainTable {
    horizon: usize,
    steps: usize,
    in_degrees: Vec<usize>,
    // [agent][t]
    gains: Vec<Vec<Matrix>>,
    sensitivities: Vec<Vec<f64>>,
    limit_gains: Vec<Matrix>,
    limit_sensitivities: Vec<f64>,
    delta_hat: f64,
    delta_bar: f64,
}

impl GainTable {
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Last tabulated time index.
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn num_agents(&self) -> usize {
        self.in_degrees.len()
    }

    pub fn in_degree(&self, agent: usize) -> usize {
        self.in_degrees[agent]
    }

    pub fn gain(&self, agent: usize, t: usize) -> &Matrix {
        &self.gains[agent][t]
    }

    /// `Δ_{i,t}`.
    pub fn sensitivity(&self, agent: usize, t: usize) -> f64 {
        self.sensitivities[agent][t]
    }

    pub fn limit_gain(&self, agent: usize) -> &Matrix {
        &self.limit_gains[agent]
    }

    pub fn limit_sensitivity(&self, agent: usize) -> f64 {
        self.limit_sensitivities[agent]
    }

    /// `Δ̂ = max_i sup_t Δ_{i,t}` over the grid and the limit.
    pub fn delta_hat(&self) -> f64 {
        self.delta_hat
    }

    /// `Δ̄ = max_i sup_t ‖K_{i,t}‖₂` over the grid and the limit.
    pub fn delta_bar(&self) -> f64 {
        self.delta_bar
    }

    /// Block-diagonal `K_t = diag(K_{1,t}, …, K_{N,t})`.
    pub fn block_gain(&self, t: usize) -> Matrix {
        let blocks: Vec<Matrix> = self.gains.iter().map(|g| g[t].clone()).collect();
        block_diagonal(&blocks)
    }

    pub fn block_limit_gain(&self) -> Matrix {
        block_diagonal(&self.limit_gains)
    }
}

/// Tabulates gains for the chosen weights and sensitivities over each agent's
/// feasible set on `t = 0..=steps` and at `c = LIMIT_SCALE`.
pub fn build_gain_table(
    graph: &DirectedGraph,
    weights: &[WeightPair],
    feasible: &[FeasibleWeightSet],
    sched: &impl Schedule,
    horizon: usize,
    steps: usize,
) -> Result<GainTable, GainError> {
    let num_agents = graph.num_agents();
    if !graph.has_spanning_tree() {
        return Err(GainError::NoSpanningTree);
    }
    for got in [weights.len(), feasible.len()] {
        if got != num_agents {
            return Err(GainError::AgentCount { expected: num_agents, got });
        }
    }
    if horizon == 0 {
        return Err(GainError::ZeroHorizon);
    }
    if steps == 0 {
        return Err(GainError::ZeroSteps);
    }
    let dim = weights[0].dim();
    for (agent, (w, f)) in weights.iter().zip(feasible).enumerate() {
        for got in [w.dim(), f.dim()] {
            if got != dim {
                return Err(GainError::AgentDimension { agent, expected: dim, got });
            }
        }
    }

    let in_degrees: Vec<usize> = (0..num_agents).map(|i| graph.in_degree(i)).collect();
    let mut gains = vec![Vec::with_capacity(steps + 1); num_agents];
    let mut sensitivities = vec![Vec::with_capacity(steps + 1); num_agents];
    let mut limit_gains = Vec::with_capacity(num_agents);
    let mut limit_sensitivities = Vec::with_capacity(num_agents);
    let mut delta_hat: f64 = 0.0;
    let mut delta_bar: f64 = 0.0;

    for agent in 0..num_agents {
        let d = in_degrees[agent];
        let scales = (0..=steps).map(|t| sched.c(t)).chain(core::iter::once(LIMIT_SCALE));
        for (idx, c) in scales.enumerate() {
            let k = riccati_gain(&weights[agent], horizon, d, c)?;
            let delta = sensitivity(&feasible[agent], horizon, d, c)?;
            delta_hat = delta_hat.max(delta);
            delta_bar = delta_bar.max(spectral_norm(&k));
            if idx <= steps {
                gains[agent].push(k);
                sensitivities[agent].push(delta);
            } else {
                limit_gains.push(k);
                limit_sensitivities.push(delta);
            }
        }
    }

    Ok(GainTable {
        horizon,
        steps,
        in_degrees,
        gains,
        sensitivities,
        limit_gains,
        limit_sensitivities,
        delta_hat,
        delta_bar,
    })
}
