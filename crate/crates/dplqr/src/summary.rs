//! Serializable view of a run, written as `summary.json`.
//!
//! JSON has no infinities or NaN. Quantities that can be non-finite or
//! undefined are wrapped in [`Quantity`], which emits `null` together with a
//! `defined` flag and a note.

use dplqr_core::bounds::{BoundsReport, GridPoint, RhoLambda};
use dplqr_core::schedule::{AssumptionReport, Check};
use dplqr_core::{GainTable, MonteCarloSummary, PrivacyLedger, SimConfig};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Quantity {
    pub defined: bool,
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Quantity {
    pub fn of(x: f64) -> Self {
        if x.is_finite() {
            Self { defined: true, value: Some(x), note: None }
        } else {
            let note = if x.is_nan() {
                "nan"
            } else if x > 0.0 {
                "+infinity"
            } else {
                "-infinity"
            };
            Self { defined: false, value: None, note: Some(note.to_owned()) }
        }
    }

    pub fn undefined(reason: impl ToString) -> Self {
        Self { defined: false, value: None, note: Some(reason.to_string()) }
    }

    pub fn from_result<E: std::fmt::Display>(r: &Result<f64, E>) -> Self {
        match r {
            Ok(x) => Self::of(*x),
            Err(e) => Self::undefined(e),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub command: &'static str,
    pub scenario: ScenarioInfo,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constants: Option<Constants>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundsInfo>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub assumptions: Option<AssumptionsInfo>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gains: Option<GainsInfo>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub monte_carlo: Option<MonteCarloInfo>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub privacy: Option<PrivacyInfo>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub leakage_window: Option<LeakageWindow>,
}

impl Summary {
    pub fn new(command: &'static str, cfg: &SimConfig) -> Self {
        Self {
            command,
            scenario: ScenarioInfo::new(cfg),
            constants: None,
            bounds: None,
            assumptions: None,
            gains: None,
            monte_carlo: None,
            privacy: None,
            leakage_window: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioInfo {
    pub num_agents: usize,
    pub dim: usize,
    pub horizon: usize,
    pub steps: usize,
    pub trials: usize,
    pub seed: u64,
    pub noise_enabled: bool,
    pub epsilon: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub laplacian: Vec<Vec<i64>>,
}

impl ScenarioInfo {
    fn new(cfg: &SimConfig) -> Self {
        let n = cfg.num_agents();
        let l = cfg.graph.laplacian_exact();
        Self {
            num_agents: n,
            dim: cfg.dim(),
            horizon: cfg.horizon,
            steps: cfg.steps,
            trials: cfg.trials,
            seed: cfg.seed,
            noise_enabled: cfg.noise_enabled,
            epsilon: cfg.epsilon,
            alpha: cfg.schedule.alpha(),
            beta: cfg.schedule.beta(),
            gamma: cfg.schedule.gamma(),
            laplacian: l.chunks(n).map(<[i64]>::to_vec).collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Constants {
    pub rho_l: f64,
    pub rho_a: f64,
    pub rho_lambda: RhoLambdaInfo,
    pub delta_hat: f64,
    pub delta_bar: f64,
    pub kappa_eps: f64,
    pub c1: Quantity,
    pub c2: Quantity,
    pub c3: Quantity,
    /// Lower bound on `Σ c(t)`.
    pub sum_c: Quantity,
}

#[derive(Debug, Clone, Serialize)]
pub struct RhoLambdaInfo {
    pub defined: bool,
    /// `defined`, `negative` or `no_positive`.
    pub status: &'static str,
    pub value: Option<f64>,
    /// Grid point deciding the value: a step index or `"limit"`.
    pub at: serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eigenvalue: Option<f64>,
}

fn grid_point(at: GridPoint) -> serde_json::Value {
    match at {
        GridPoint::Step(t) => t.into(),
        GridPoint::Limit => "limit".into(),
    }
}

impl From<RhoLambda> for RhoLambdaInfo {
    fn from(r: RhoLambda) -> Self {
        match r {
            RhoLambda::Defined { value, at } => {
                Self { defined: true, status: "defined", value: Some(value), at: grid_point(at), eigenvalue: None }
            }
            RhoLambda::Negative { at, eigenvalue } => Self {
                defined: false,
                status: "negative",
                value: None,
                at: grid_point(at),
                eigenvalue: Some(eigenvalue),
            },
            RhoLambda::NoPositive { at } => {
                Self { defined: false, status: "no_positive", value: None, at: grid_point(at), eigenvalue: None }
            }
        }
    }
}

impl From<&BoundsReport> for Constants {
    fn from(r: &BoundsReport) -> Self {
        Self {
            rho_l: r.spectral.rho_l,
            rho_a: r.spectral.rho_a,
            rho_lambda: r.rho_lambda.into(),
            delta_hat: r.delta_hat,
            delta_bar: r.delta_bar,
            kappa_eps: r.kappa_eps,
            c1: Quantity::from_result(&r.c1),
            c2: Quantity::from_result(&r.c2),
            c3: Quantity::from_result(&r.c3),
            sum_c: Quantity::of(r.sum_c),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundsInfo {
    pub v0: f64,
    pub v1: f64,
    pub q: Quantity,
    pub v_bar: Quantity,
    pub sigma: Quantity,
    /// `min_t 1 + c²(t)ρ_LΔ̄² − c(t)ρ_λ`.
    pub contraction_margin: Quantity,
    pub first_term_vanishes: bool,
}

impl From<&BoundsReport> for BoundsInfo {
    fn from(r: &BoundsReport) -> Self {
        let undefined_q = || Quantity::undefined(r.v_bar.as_ref().err().map_or(String::new(), ToString::to_string));
        Self {
            v0: r.v0,
            v1: r.v1,
            q: r.q.map_or_else(undefined_q, Quantity::of),
            v_bar: Quantity::from_result(&r.v_bar),
            sigma: Quantity::from_result(&r.sigma),
            contraction_margin: r
                .contraction_margin
                .map_or_else(|| Quantity::undefined("contraction constant undefined"), Quantity::of),
            first_term_vanishes: r.first_term_vanishes,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckInfo {
    pub passed: bool,
    pub analytic: bool,
    pub informational: bool,
    pub value: Quantity,
}

impl From<Check> for CheckInfo {
    fn from(c: Check) -> Self {
        Self { passed: c.passed, analytic: c.analytic, informational: c.informational, value: Quantity::of(c.value) }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AssumptionsInfo {
    pub all_pass: bool,
    /// Names of failing blocking clauses.
    pub failed: Vec<&'static str>,
    pub a2_summable_privacy: CheckInfo,
    pub a3_c_square_summable: CheckInfo,
    pub a3_noise_gain: CheckInfo,
    pub a3_weighted_summable: CheckInfo,
    pub a4_contraction: CheckInfo,
    pub l2_noise_footnote: CheckInfo,
}

/// Names of the blocking clauses, in [`AssumptionReport::blocking`] order.
pub const BLOCKING_NAMES: [&str; 5] =
    ["a2_summable_privacy", "a3_c_square_summable", "a3_noise_gain", "a3_weighted_summable", "a4_contraction"];

impl From<&AssumptionReport> for AssumptionsInfo {
    fn from(r: &AssumptionReport) -> Self {
        let failed = BLOCKING_NAMES.iter().zip(r.blocking()).filter(|(_, c)| !c.passed).map(|(n, _)| *n).collect();
        Self {
            all_pass: r.all_pass(),
            failed,
            a2_summable_privacy: r.a2_summable_privacy.into(),
            a3_c_square_summable: r.a3_c_square_summable.into(),
            a3_noise_gain: r.a3_noise_gain.into(),
            a3_weighted_summable: r.a3_weighted_summable.into(),
            a4_contraction: r.a4_contraction.into(),
            l2_noise_footnote: r.l2_noise_footnote.into(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GainsInfo {
    pub horizon: usize,
    pub steps: usize,
    pub delta_hat: f64,
    pub delta_bar: f64,
    pub agents: Vec<AgentGains>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AgentGains {
    pub agent: usize,
    pub in_degree: usize,
    /// `Δ_{i,t}` for `t = 0..=steps`.
    pub sensitivity: Vec<f64>,
    pub limit_sensitivity: f64,
    /// Row-major gain matrices for `t = 0..=steps`.
    pub gain: Vec<Vec<Vec<f64>>>,
    pub limit_gain: Vec<Vec<f64>>,
}

fn rows(m: &dplqr_core::Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl From<&GainTable> for GainsInfo {
    fn from(t: &GainTable) -> Self {
        let agents = (0..t.num_agents())
            .map(|i| AgentGains {
                agent: i + 1,
                in_degree: t.in_degree(i),
                sensitivity: (0..=t.steps()).map(|s| t.sensitivity(i, s)).collect(),
                limit_sensitivity: t.limit_sensitivity(i),
                gain: (0..=t.steps()).map(|s| rows(t.gain(i, s))).collect(),
                limit_gain: rows(t.limit_gain(i)),
            })
            .collect();
        Self { horizon: t.horizon(), steps: t.steps(), delta_hat: t.delta_hat(), delta_bar: t.delta_bar(), agents }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MonteCarloInfo {
    pub trials: usize,
    /// Mean of `V(t)` over trials, `t = 0..=steps`.
    pub mean_v: Vec<f64>,
    /// 95% normal-approximation half-width of `mean_v`.
    pub half_width: Vec<f64>,
    pub max_mean_v: f64,
    pub final_mean_v: f64,
    /// Releases whose noise scale collapsed to zero while the sensitivity
    /// was positive, summed over trials.
    pub exact_release_count: usize,
    pub checks: ConsensusChecks,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConsensusChecks {
    pub final_below_v0: bool,
    /// `null` when `σ` is undefined.
    pub final_within_sigma: Option<bool>,
    /// `null` when `V̄` is undefined.
    pub max_within_v_bar: Option<bool>,
    pub max_within_10_v0: bool,
}

impl MonteCarloInfo {
    pub fn new(mc: MonteCarloSummary, exact_release_count: usize, bounds: &BoundsReport) -> Self {
        let checks = ConsensusChecks {
            final_below_v0: mc.final_mean_v < bounds.v0,
            final_within_sigma: bounds.sigma.as_ref().ok().map(|s| mc.final_mean_v <= *s),
            max_within_v_bar: bounds.v_bar.as_ref().ok().map(|v| mc.max_mean_v <= *v),
            max_within_10_v0: mc.max_mean_v <= 10.0 * bounds.v0,
        };
        Self {
            trials: mc.trials,
            mean_v: mc.mean_v,
            half_width: mc.half_width,
            max_mean_v: mc.max_mean_v,
            final_mean_v: mc.final_mean_v,
            exact_release_count,
            checks,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PrivacyInfo {
    pub epsilon: f64,
    /// Number of noisy releases accounted, at `t = 0..releases`.
    pub releases: usize,
    /// `ε/p(t)` per release.
    pub per_step: Vec<f64>,
    pub cumulative: f64,
    /// Upper bound on `Σ_{t ≥ releases} ε/p(t)`.
    pub tail_bound: Quantity,
    /// `cumulative + tail_bound`: the budget over an unbounded horizon.
    pub total_bound: Quantity,
}

impl PrivacyInfo {
    pub fn new(ledger: &PrivacyLedger, epsilon: f64, gamma: f64) -> Self {
        let tail = dplqr_core::privacy::ledger_tail_bound(epsilon, gamma, ledger.len());
        Self {
            epsilon,
            releases: ledger.len(),
            per_step: ledger.per_step().to_vec(),
            cumulative: ledger.cumulative(),
            tail_bound: Quantity::of(tail),
            total_bound: Quantity::of(ledger.cumulative() + tail),
        }
    }
}

/// Leakage `Σ_{t=from_t}^{to_t} ε/p(t)` seen by an eavesdropper observing
/// every broadcast from `from_t` through `to_t`, both ends included.
#[derive(Debug, Clone, Serialize)]
pub struct LeakageWindow {
    pub from_t: usize,
    pub to_t: usize,
    pub cumulative: f64,
}

impl LeakageWindow {
    /// The window `0..=steps`.
    pub fn new(cfg: &SimConfig) -> Self {
        let mut ledger = PrivacyLedger::new();
        for t in 0..=cfg.steps {
            ledger.record(t, cfg.epsilon, &cfg.schedule).expect("epsilon validated, steps in order");
        }
        Self { from_t: 0, to_t: cfg.steps, cumulative: ledger.cumulative() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn non_finite_becomes_null() {
        let q = serde_json::to_value(Quantity::of(f64::INFINITY)).unwrap();
        assert_eq!(q, serde_json::json!({"defined": false, "value": null, "note": "+infinity"}));
        let q = serde_json::to_value(Quantity::of(2.5)).unwrap();
        assert_eq!(q, serde_json::json!({"defined": true, "value": 2.5}));
    }
}
