//! Partial sums with rigorous two-sided integral tail bounds.

/// Compensated (Neumaier) running sum.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Enclosure `[lower, upper]` of a series value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesBounds {
    pub lower: f64,
    pub upper: f64,
    /// Number of explicitly summed terms.
    pub terms: usize,
}

impl SeriesBounds {
    pub fn gap(&self) -> f64 {
        self.upper - self.lower
    }

    pub(crate) fn divergent() -> Self {
        Self { lower: f64::INFINITY, upper: f64::INFINITY, terms: 0 }
    }
}

/// Bounds on `Σ_{s ≥ m} coef·s^{-p}` for `m ≥ 1`.
///
/// Both bounds use convexity of `s^{-p}`: the trapezoid rule gives the lower
/// bound `∫_m^∞ + m^{-p}/2` and the midpoint rule the upper bound
/// `∫_{m-1/2}^∞`. Infinite when `p ≤ 1`.
pub(crate) fn power_tail(coef: f64, p: f64, m: usize) -> (f64, f64) {
    if coef == 0.0 {
        return (0.0, 0.0);
    }
    if p <= 1.0 {
        return (f64::INFINITY, f64::INFINITY);
    }
    let m = m as f64;
    let lower = coef * (libm::pow(m, 1.0 - p) / (p - 1.0) + 0.5 * libm::pow(m, -p));
    let upper = coef * libm::pow(m - 0.5, 1.0 - p) / (p - 1.0);
    (lower, upper)
}

/// Largest number of terms summed explicitly before settling for a wider
/// enclosure.
pub(crate) const MAX_TERMS: usize = 1 << 25;

/// Sums `term(s)` for `s = first, first+1, …` and closes the series with
/// `tail(m)`, a `(lower, upper)` bound on `Σ_{s ≥ m} term(s)`.
///
/// Stops at the first power-of-two checkpoint where the enclosure is narrower
/// than `precision`, or at [`MAX_TERMS`].
pub(crate) fn sum_with_tail(
    first: usize,
    precision: f64,
    term: impl Fn(usize) -> f64,
    tail: impl Fn(usize) -> (f64, f64),
) -> SeriesBounds {
    let mut acc = CompensatedSum::default();
    let mut s = first;
    let mut checkpoint = 64;
    loop {
        while s - first < checkpoint {
            acc.add(term(s));
            s += 1;
        }
        let (lo, hi) = tail(s);
        let partial = acc.value();
        let bounds = SeriesBounds { lower: partial + lo, upper: partial + hi, terms: s - first };
        if !(hi - lo >= precision) || checkpoint >= MAX_TERMS {
            return bounds;
        }
        checkpoint *= 2;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basel_enclosure() {
        let b = sum_with_tail(1, 1e-9, |s| 1.0 / (s * s) as f64, |m| power_tail(1.0, 2.0, m));
        let pi2_6 = core::f64::consts::PI * core::f64::consts::PI / 6.0;
        assert!(b.lower <= pi2_6 + 1e-13 && pi2_6 <= b.upper + 1e-13, "{b:?}");
        assert!(b.gap() < 1e-9);
    }

    #[test]
    fn divergent_tail_is_infinite() {
        assert_eq!(power_tail(1.0, 1.0, 10), (f64::INFINITY, f64::INFINITY));
        assert_eq!(power_tail(0.0, 0.5, 10), (0.0, 0.0));
    }

    #[test]
    fn compensated_sum_keeps_small_terms() {
        let mut s = CompensatedSum::default();
        s.add(1.0);
        for _ in 0..10 {
            s.add(1e-17);
        }
        assert!((s.value() - (1.0 + 1e-16)).abs() < 1e-18);
    }
}
