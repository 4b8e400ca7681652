//! Step-size and privacy-decay sequences `c(t)`, `p(t)`, the convergence
//! constants derived from them, and validators for the conditions the error
//! bound relies on.

use crate::series::{power_tail, sum_with_tail, SeriesBounds};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScheduleError {
    #[error("schedule parameter {name} = {value} out of range ({requirement})")]
    InvalidParameter { name: &'static str, value: f64, requirement: &'static str },
    #[error("privacy budget epsilon must be positive, got {0}")]
    NonPositiveEpsilon(f64),
    #[error("{series} diverges: {reason}")]
    Divergent { series: &'static str, reason: &'static str },
    #[error("tail product factor 1 + c²ρ_LΔ̄² - cρ_λ = {factor} is not positive at t = {t}")]
    NonPositiveFactor { t: usize, factor: f64 },
}

/// A pair of sequences `c(t) > 0` (gain scaling) and `p(t) > 0` (privacy decay).
pub trait Schedule {
    fn c(&self, t: usize) -> f64;
    fn p(&self, t: usize) -> f64;
}

/// `c(t) = α/(t+1)^β`, `p(t) = (t+1)^γ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawSchedule {
    alpha: f64,
    beta: f64,
    gamma: f64,
}

impl PowerLawSchedule {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self, ScheduleError> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(ScheduleError::InvalidParameter { name: "alpha", value: alpha, requirement: "finite, > 0" });
        }
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(ScheduleError::InvalidParameter { name: "beta", value: beta, requirement: "finite, >= 0" });
        }
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(ScheduleError::InvalidParameter { name: "gamma", value: gamma, requirement: "finite, >= 0" });
        }
        Ok(Self { alpha, beta, gamma })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `Σ_{t≥0} c²(t)`.
    pub fn c1_bounds(&self, precision: f64) -> Result<SeriesBounds, ScheduleError> {
        let p = 2.0 * self.beta;
        if p <= 1.0 {
            return Err(ScheduleError::Divergent { series: "C1 = Σ c²(t)", reason: "requires 2β > 1" });
        }
        let a2 = self.alpha * self.alpha;
        Ok(sum_with_tail(
            1,
            precision,
            |s| a2 * libm::pow(s as f64, -p),
            |m| power_tail(a2, p, m),
        ))
    }

    /// `Σ_{t≥1} t·c²(t)·c²(t−1)·p²(t−1)`.
    pub fn c2_bounds(&self, precision: f64) -> Result<SeriesBounds, ScheduleError> {
        let exponent = self.c2_exponent();
        if exponent >= -1.0 {
            return Err(ScheduleError::Divergent {
                series: "C2 = Σ t·c²(t)c²(t-1)p²(t-1)",
                reason: "requires 1 - 4β + 2γ < -1",
            });
        }
        let a4 = libm::pow(self.alpha, 4.0);
        let two_beta = 2.0 * self.beta;
        Ok(sum_with_tail(
            1,
            precision,
            |t| {
                let c_t = self.c(t);
                let c_prev = self.c(t - 1);
                let p_prev = self.p(t - 1);
                t as f64 * c_t * c_t * c_prev * c_prev * p_prev * p_prev
            },
            // summand = α⁴·t^q·(1 + 1/t)^{-2β} with q = 1 - 4β + 2γ
            |m| {
                let (lo, hi) = power_tail(a4, -exponent, m);
                (lo * libm::pow(1.0 + 1.0 / m as f64, -two_beta), hi)
            },
        ))
    }

    /// `Σ_{t≥0} c(t)`; infinite when `β ≤ 1`.
    pub fn sum_c_bounds(&self, precision: f64) -> SeriesBounds {
        if self.beta <= 1.0 {
            return SeriesBounds::divergent();
        }
        sum_with_tail(
            1,
            precision,
            |s| self.alpha * libm::pow(s as f64, -self.beta),
            |m| power_tail(self.alpha, self.beta, m),
        )
    }

    /// Growth exponent of the C2 summand, `1 - 4β + 2γ`.
    pub fn c2_exponent(&self) -> f64 {
        1.0 - 4.0 * self.beta + 2.0 * self.gamma
    }
}

impl Schedule for PowerLawSchedule {
    fn c(&self, t: usize) -> f64 {
        self.alpha / libm::pow(t as f64 + 1.0, self.beta)
    }

    fn p(&self, t: usize) -> f64 {
        libm::pow(t as f64 + 1.0, self.gamma)
    }
}

/// `κ_ε = 4n³N(N−1)Δ̂²/ε²`.
pub fn kappa_epsilon(dim: usize, num_agents: usize, delta_hat: f64, epsilon: f64) -> Result<f64, ScheduleError> {
    if !(epsilon > 0.0) {
        return Err(ScheduleError::NonPositiveEpsilon(epsilon));
    }
    let n = dim as f64;
    let big_n = num_agents as f64;
    Ok(4.0 * n * n * n * big_n * (big_n - 1.0) * delta_hat * delta_hat / (epsilon * epsilon))
}

/// Upper estimate of `C1 = Σ c²(t)`.
pub fn compute_c1(sched: &PowerLawSchedule, precision: f64) -> Result<f64, ScheduleError> {
    sched.c1_bounds(precision).map(|b| b.upper)
}

/// Upper estimate of `C2 = Σ_{t≥1} t·c²(t)c²(t−1)p²(t−1)`.
pub fn compute_c2(sched: &PowerLawSchedule, precision: f64) -> Result<f64, ScheduleError> {
    sched.c2_bounds(precision).map(|b| b.upper)
}

/// Upper bound on `sup_t Π_{j≥t} (1 + c²(j)ρ_LΔ̄² − c(j)ρ_λ)`.
///
/// Factors below a cutoff `M` are multiplied explicitly (as a log-sum). The
/// tail from `M` is closed with `ln(1+x) ≤ x − x²/2 + x³/3` (valid for
/// `x > −1`) and two-sided bounds on the power tails of `c`, `c²` and `c³`;
/// any tail starting past `M` is bounded by `exp(ρ_LΔ̄²·Σ_{j≥M} c²)`.
/// `precision` bounds the log-scale slack of the closure, so it is a relative
/// precision on the result.
pub fn compute_c3(
    sched: &PowerLawSchedule,
    rho_l: f64,
    rho_lambda: f64,
    delta_bar: f64,
    precision: f64,
) -> Result<f64, ScheduleError> {
    let growth = rho_l * delta_bar * delta_bar;
    let two_beta = 2.0 * sched.beta;
    if growth > 0.0 && two_beta <= 1.0 {
        return Err(ScheduleError::Divergent { series: "C3 tail product", reason: "requires 2β > 1" });
    }
    let factor = |j: usize| {
        let c = sched.c(j);
        1.0 + c * c * growth - c * rho_lambda
    };
    let rho = rho_lambda.max(0.0);
    // `a·b` with `0·∞ = 0`.
    let mul = |a: f64, b: f64| if a == 0.0 { 0.0 } else { a * b };

    // (upper bound on Σ_{j≥m} ln(1 + x_j), slack of that bound, max |x_j|)
    let closure = |m: usize| -> (f64, f64, f64) {
        let c_m = sched.c(m);
        let x_max = c_m * (c_m * growth + rho);
        let (c_lo, c_hi) = power_tail(sched.alpha, sched.beta, m + 1);
        if rho > 0.0 && c_lo.is_infinite() {
            // Σ c diverges faster than Σ c²: every tail product is 0.
            return (f64::NEG_INFINITY, 0.0, x_max);
        }
        let a2 = sched.alpha * sched.alpha;
        let (sq_lo, sq_hi) = power_tail(a2, two_beta, m + 1);
        let (_, cube_hi) = power_tail(a2 * sched.alpha, 3.0 * sched.beta, m + 1);
        let lin_hi = mul(growth, sq_hi) - mul(rho, c_lo);
        let lin_lo = mul(growth, sq_lo) - mul(rho, c_hi);
        // For j ≥ m: (ρ − c_m·g)⁺ c_j ≤ |x_j| ≤ (ρ + c_m·g) c_j.
        let shrink = (rho - c_m * growth).max(0.0);
        let square_lo = mul(shrink * shrink, sq_lo);
        let square_hi = mul(rho * rho, sq_hi) + mul(growth * growth * c_m * c_m, sq_hi);
        let cube = mul(libm::pow(rho + c_m * growth, 3.0), cube_hi);
        let upper = lin_hi - 0.5 * square_lo + cube / 3.0;
        // With |x| ≤ 1/2 the quartic remainder is at most 2·Σ|x|³.
        let slack = (lin_hi - lin_lo) + 0.5 * (square_hi - square_lo) + 3.0 * cube;
        (upper, slack, x_max)
    };

    let mut cutoff = 64usize;
    let tail_log = loop {
        let (upper, slack, x_max) = closure(cutoff);
        if x_max < 0.5 && slack < precision {
            break upper;
        }
        if cutoff >= crate::series::MAX_TERMS {
            // Tail factors are at least 1 − c(M)ρ_λ.
            let floor = 1.0 - sched.c(cutoff) * rho;
            if !(floor > 0.0) {
                return Err(ScheduleError::NonPositiveFactor { t: cutoff, factor: floor });
            }
            break upper;
        }
        cutoff *= 2;
    };
    let (_, sq_hi) = power_tail(sched.alpha * sched.alpha, two_beta, cutoff + 1);
    let beyond = libm::exp(mul(growth, sq_hi));

    let mut logs = alloc::vec::Vec::with_capacity(cutoff);
    for j in 0..cutoff {
        let f = factor(j);
        if !(f > 0.0) {
            return Err(ScheduleError::NonPositiveFactor { t: j, factor: f });
        }
        logs.push(libm::log(f));
    }
    let mut best = beyond.max(1.0);
    let mut suffix = tail_log;
    for &l in logs.iter().rev() {
        suffix += l;
        best = best.max(libm::exp(suffix));
    }
    Ok(best)
}

/// Outcome of one assumption clause.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Check {
    pub passed: bool,
    /// The verdict follows from closed-form reasoning rather than a finite sweep.
    pub analytic: bool,
    /// Failure does not invalidate the bound (reported for information).
    pub informational: bool,
    /// The quantity the verdict was decided on.
    pub value: f64,
}

impl Check {
    fn analytic(passed: bool, value: f64) -> Self {
        Self { passed, analytic: true, informational: false, value }
    }
}

/// Verdicts for the convergence and privacy conditions on a schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssumptionReport {
    /// `Σ 1/p(t) < ∞` ⇔ `γ > 1`; value is `γ`.
    pub a2_summable_privacy: Check,
    /// `Σ c²(t) < ∞` ⇔ `2β > 1`; value is `2β`.
    pub a3_c_square_summable: Check,
    /// `κ_ε c²(t)p²(t) ≤ 1 ∀t`; value is the supremum.
    pub a3_noise_gain: Check,
    /// `Σ t c²(t)c²(t−1)p²(t−1) < ∞` ⇔ `1 − 4β + 2γ < −1`; value is the exponent.
    pub a3_weighted_summable: Check,
    /// `c²(t)ρ_LΔ̄² − c(t)ρ_λ > −1 ∀t`; value is the minimum of the left side.
    pub a4_contraction: Check,
    /// `{c(t)p(t)} ∈ ℓ₂` ⇔ `2(β−γ) > 1`; informational. Value is `2(β−γ)`.
    pub l2_noise_footnote: Check,
}

impl AssumptionReport {
    /// True when every blocking clause passes.
    pub fn all_pass(&self) -> bool {
        self.blocking().iter().all(|c| c.passed)
    }

    pub fn blocking(&self) -> [Check; 5] {
        [
            self.a2_summable_privacy,
            self.a3_c_square_summable,
            self.a3_noise_gain,
            self.a3_weighted_summable,
            self.a4_contraction,
        ]
    }
}

/// Checks the schedule conditions in closed form for the power-law family.
///
/// `rho_lambda = None` means the contraction constant is undefined for this
/// configuration, in which case the contraction clause fails. `t_check` is
/// the explicit sweep length for that clause; beyond it the minimum of
/// `c²a − cb` over `c ∈ (0, c(t_check+1)]` is taken analytically.
pub fn validate_assumptions(
    sched: &PowerLawSchedule,
    kappa: f64,
    rho_l: f64,
    rho_lambda: Option<f64>,
    delta_bar: f64,
    t_check: usize,
) -> AssumptionReport {
    let (alpha, beta, gamma) = (sched.alpha, sched.beta, sched.gamma);

    let a2 = Check::analytic(gamma > 1.0, gamma);
    let a3a = Check::analytic(2.0 * beta > 1.0, 2.0 * beta);

    // κα²(t+1)^{2(γ−β)} is monotone in t.
    let noise_sup = if kappa == 0.0 {
        0.0
    } else if gamma <= beta {
        kappa * alpha * alpha
    } else {
        f64::INFINITY
    };
    let a3b = Check::analytic(noise_sup <= 1.0, noise_sup);

    let exponent = sched.c2_exponent();
    let a3c = Check::analytic(exponent < -1.0, exponent);

    let a4 = match rho_lambda {
        None => Check::analytic(false, f64::NAN),
        Some(rho_lambda) => {
            let growth = rho_l * delta_bar * delta_bar;
            let g = |c: f64| c * c * growth - c * rho_lambda;
            let swept = (0..=t_check).map(|t| g(sched.c(t))).fold(f64::INFINITY, f64::min);
            let c_cut = sched.c(t_check + 1);
            let beyond = if growth > 0.0 {
                let c_star = rho_lambda / (2.0 * growth);
                if c_star <= c_cut {
                    -rho_lambda * rho_lambda / (4.0 * growth)
                } else {
                    g(c_cut)
                }
            } else {
                -c_cut * rho_lambda
            };
            let min = swept.min(beyond);
            Check::analytic(min > -1.0, min)
        }
    };

    let l2 = 2.0 * (beta - gamma);
    let footnote = Check { passed: l2 > 1.0, analytic: true, informational: true, value: l2 };

    AssumptionReport {
        a2_summable_privacy: a2,
        a3_c_square_summable: a3a,
        a3_noise_gain: a3b,
        a3_weighted_summable: a3c,
        a4_contraction: a4,
        l2_noise_footnote: footnote,
    }
}

/// Finite-horizon check of the same clauses for an arbitrary schedule.
///
/// Every verdict is derived from `t = 0..horizon` only and is flagged
/// non-analytic: a passing result is evidence, not a proof.
pub fn validate_numeric(
    sched: &impl Schedule,
    kappa: f64,
    rho_l: f64,
    rho_lambda: Option<f64>,
    delta_bar: f64,
    horizon: usize,
) -> AssumptionReport {
    let numeric = |passed: bool, value: f64| Check { passed, analytic: false, informational: false, value };
    let mut inv_p = 0.0;
    let mut c_sq = 0.0;
    let mut weighted = 0.0;
    let mut cp_sq = 0.0;
    let mut noise_sup: f64 = 0.0;
    let mut min_a4 = f64::INFINITY;
    let growth = rho_l * delta_bar * delta_bar;
    for t in 0..=horizon {
        let (c, p) = (sched.c(t), sched.p(t));
        inv_p += 1.0 / p;
        c_sq += c * c;
        cp_sq += c * c * p * p;
        noise_sup = noise_sup.max(kappa * c * c * p * p);
        if t >= 1 {
            let (cp, pp) = (sched.c(t - 1), sched.p(t - 1));
            weighted += t as f64 * c * c * cp * cp * pp * pp;
        }
        if let Some(rl) = rho_lambda {
            min_a4 = min_a4.min(c * c * growth - c * rl);
        }
    }
    // Finite partial sums always pass; the values let callers eyeball growth.
    AssumptionReport {
        a2_summable_privacy: numeric(inv_p.is_finite(), inv_p),
        a3_c_square_summable: numeric(c_sq.is_finite(), c_sq),
        a3_noise_gain: numeric(noise_sup <= 1.0, noise_sup),
        a3_weighted_summable: numeric(weighted.is_finite(), weighted),
        a4_contraction: numeric(rho_lambda.is_some() && min_a4 > -1.0, min_a4),
        l2_noise_footnote: Check { passed: cp_sq.is_finite(), analytic: false, informational: true, value: cp_sq },
    }
}
