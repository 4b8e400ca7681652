//! Database adjacency over weight pairs, the consensus-gap-scaled Laplace
//! mechanism, and the sequential-composition privacy ledger.

use alloc::vec::Vec;

use rand_core::RngCore;

use crate::gain::WeightPair;
use crate::linalg::Matrix;
use crate::schedule::Schedule;

/// Entrywise tolerance when comparing trace-normalized pairs.
pub const NORMALIZED_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PrivacyError {
    #[error("databases have {0} and {1} agents")]
    LengthMismatch(usize, usize),
    #[error("agent {agent}: weight pairs have dimensions {left} and {right}")]
    DimensionMismatch { agent: usize, left: usize, right: usize },
    #[error("privacy budget epsilon must be positive, got {0}")]
    NonPositiveEpsilon(f64),
    #[error("noise scale argument {name} = {value} must be nonnegative")]
    NegativeArgument { name: &'static str, value: f64 },
    #[error("uniform draw {0} is outside (0, 1)")]
    UniformOutOfRange(f64),
    #[error("ledger expects step {expected}, got {got}")]
    OutOfOrder { expected: usize, got: usize },
}

/// One weight pair per agent.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightDatabase {
    entries: Vec<WeightPair>,
}

impl WeightDatabase {
    pub fn new(entries: Vec<WeightPair>) -> Self {
        Self { entries }
    }

    pub fn entries(&self) -> &[WeightPair] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// `(Q/τ, R/τ)` with `τ = tr(Q + R)`.
pub fn normalize_pair(w: &WeightPair) -> WeightPair {
    let tau = w.q().trace() + w.r().trace();
    w.scaled(1.0 / tau)
}

fn close(a: &Matrix, b: &Matrix) -> bool {
    (a - b).amax() <= NORMALIZED_TOL
}

/// True iff some agent `i` exists such that every other agent's normalized
/// pair agrees between the two databases. Identical databases are adjacent.
pub fn are_adjacent(left: &WeightDatabase, right: &WeightDatabase) -> Result<bool, PrivacyError> {
    if left.len() != right.len() {
        return Err(PrivacyError::LengthMismatch(left.len(), right.len()));
    }
    let mut differing = Vec::new();
    for (agent, (a, b)) in left.entries.iter().zip(&right.entries).enumerate() {
        if a.dim() != b.dim() {
            return Err(PrivacyError::DimensionMismatch { agent, left: a.dim(), right: b.dim() });
        }
        let (na, nb) = (normalize_pair(a), normalize_pair(b));
        if !(close(na.q(), nb.q()) && close(na.r(), nb.r())) {
            differing.push(agent);
        }
    }
    // A witness exists iff at most one agent differs.
    Ok(differing.len() <= 1)
}

/// Laplace scale `n·c(t)·p(t)·Δ_{i,t}·gap/ε`.
pub fn noise_scale(dim: usize, c_t: f64, p_t: f64, delta: f64, gap_inf: f64, epsilon: f64) -> Result<f64, PrivacyError> {
    if !(epsilon > 0.0) {
        return Err(PrivacyError::NonPositiveEpsilon(epsilon));
    }
    for (name, value) in [("c_t", c_t), ("p_t", p_t), ("delta", delta), ("gap_inf", gap_inf)] {
        if !(value >= 0.0) {
            return Err(PrivacyError::NegativeArgument { name, value });
        }
    }
    Ok(dim as f64 * c_t * p_t * delta * gap_inf / epsilon)
}

/// Inverse-CDF Laplace draw `−b·sgn(u−½)·ln(1 − 2|u−½|)`; `b = 0` yields 0.
pub fn sample_laplace(scale: f64, u: f64) -> Result<f64, PrivacyError> {
    if !(u > 0.0 && u < 1.0) {
        return Err(PrivacyError::UniformOutOfRange(u));
    }
    if !(scale >= 0.0) {
        return Err(PrivacyError::NegativeArgument { name: "scale", value: scale });
    }
    if scale == 0.0 {
        return Ok(0.0);
    }
    let centered = u - 0.5;
    let magnitude = -scale * libm::log1p(-2.0 * centered.abs());
    Ok(if centered < 0.0 { -magnitude } else { magnitude })
}

/// Uniform draw in the open interval `(0, 1)` from the top 52 bits of one
/// `u64`.
pub fn open_unit<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    const SCALE: f64 = 1.0 / (1u64 << 52) as f64;
    ((rng.next_u64() >> 12) as f64 + 0.5) * SCALE
}

/// Running record of per-step budgets `ε/p(t)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PrivacyLedger {
    steps: Vec<f64>,
    cumulative: f64,
}

impl PrivacyLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records `ε/p(t)` for the next step `t`.
    pub fn record(&mut self, t: usize, epsilon: f64, sched: &impl Schedule) -> Result<f64, PrivacyError> {
        if t != self.steps.len() {
            return Err(PrivacyError::OutOfOrder { expected: self.steps.len(), got: t });
        }
        if !(epsilon > 0.0) {
            return Err(PrivacyError::NonPositiveEpsilon(epsilon));
        }
        let eps_t = epsilon / sched.p(t);
        self.steps.push(eps_t);
        self.cumulative += eps_t;
        Ok(eps_t)
    }

    pub fn per_step(&self) -> &[f64] {
        &self.steps
    }

    /// Number of recorded steps.
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn cumulative(&self) -> f64 {
        self.cumulative
    }
}

/// Functional form of [`PrivacyLedger::record`].
pub fn ledger_step(
    mut ledger: PrivacyLedger,
    t: usize,
    epsilon: f64,
    sched: &impl Schedule,
) -> Result<PrivacyLedger, PrivacyError> {
    ledger.record(t, epsilon, sched)?;
    Ok(ledger)
}

/// Upper bound on `Σ_{t ≥ from_t} ε/(t+1)^γ`, infinite for `γ ≤ 1`.
///
/// Uses `ε·∫_{from_t}^∞ s^{−γ} ds`; for `from_t = 0` the first term is kept
/// explicitly so the integral starts at 1.
pub fn ledger_tail_bound(epsilon: f64, gamma: f64, from_t: usize) -> f64 {
    if gamma <= 1.0 {
        return f64::INFINITY;
    }
    if from_t == 0 {
        return epsilon + epsilon / (gamma - 1.0);
    }
    epsilon * libm::pow(from_t as f64, 1.0 - gamma) / (gamma - 1.0)
}
