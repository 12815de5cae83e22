//! Scalar utilities for standard self-concordant analysis.
//!
//! `omega` and `omega_star` bound the growth of a self-concordant function
//! along a segment; `h` governs the switch from damped to full Newton steps.
//! The solver parameter triple `(beta, sigma, C)` must satisfy the contraction
//! conditions checked by [`SolverParams::validate`].

use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `tau - ln(1 + tau)` for `tau >= 0`.
pub fn omega(tau: f64) -> Result<f64> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::ScalarDomain { func: "omega", value: tau });
    }
    // ln_1p keeps the cancellation benign for small tau.
    Ok(tau - tau.ln_1p())
}

/// `-tau - ln(1 - tau)` for `0 <= tau < 1`.
pub fn omega_star(tau: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&tau) {
        return Err(Error::ScalarDomain { func: "omega_star", value: tau });
    }
    Ok(-tau - (-tau).ln_1p())
}

fn h_denominator(tau: f64) -> f64 {
    (1.0 - 2.0 * tau) * (1.0 - tau).powi(2) - tau * tau
}

/// The root of `(1-2t)(1-t)^2 - t^2` in `(0.3, 0.4)`, where `h` blows up.
pub fn c2() -> f64 {
    static ROOT: OnceLock<f64> = OnceLock::new();
    *ROOT.get_or_init(|| {
        // denominator is positive at 0.3 and negative at 0.4
        let (mut lo, mut hi) = (0.3_f64, 0.4_f64);
        while hi - lo > 1e-15 {
            let mid = 0.5 * (lo + hi);
            if h_denominator(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    })
}

/// Stage-switch function `tau (1 - 2 tau + 2 tau^2) / ((1 - 2 tau)(1 - tau)^2 - tau^2)`
/// on `[0, C2)`.
pub fn h(tau: f64) -> Result<f64> {
    if !(tau >= 0.0) || tau >= c2() {
        return Err(Error::ScalarDomain { func: "h", value: tau });
    }
    let den = h_denominator(tau);
    if den <= 0.0 {
        return Err(Error::ScalarDomain { func: "h", value: tau });
    }
    Ok(tau * (1.0 - 2.0 * tau + 2.0 * tau * tau) / den)
}

/// Inverse of [`h`] by bisection on `[0, C2 - 1e-9]` to absolute tolerance `1e-12`.
pub fn h_inv(y: f64) -> Result<f64> {
    if !(y >= 0.0) || !y.is_finite() {
        return Err(Error::ScalarDomain { func: "h_inv", value: y });
    }
    if y == 0.0 {
        return Ok(0.0);
    }
    let mut lo = 0.0;
    let mut hi = c2() - 1e-9;
    if h(hi)? <= y {
        return Ok(hi);
    }
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if h(mid)? < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Exponent in the `O(eps^{-nu})` LMO complexity: `1 + ln(1 - 2 beta) / ln(sigma)`.
pub fn nu_exponent(beta: f64, sigma: f64) -> Result<f64> {
    if !(0.0..0.5).contains(&beta) {
        return Err(Error::ScalarDomain { func: "nu_exponent(beta)", value: beta });
    }
    if !(sigma > 0.0 && sigma < 1.0) {
        return Err(Error::ScalarDomain { func: "nu_exponent(sigma)", value: sigma });
    }
    Ok(1.0 + (1.0 - 2.0 * beta).ln() / sigma.ln())
}

/// Relative slack accepted by [`SolverParams::validate`] on the two contraction
/// inequalities. Parameter pairs quoted to four digits sit just outside the
/// exact region.
pub const VALIDATION_SLACK: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverParams {
    /// Radius of the full-step region, in `(0, 0.5)`.
    pub beta: f64,
    /// Contraction factor per full step, in `(0, 1)`.
    pub sigma: f64,
    /// Ratio between `beta` and the initial subproblem accuracy, `> 1`.
    pub c_big: f64,
    /// Damped-stage accuracy fraction of `h_inv(beta)`, in `(0, 0.5)`.
    pub c_one: f64,
    /// Damped step scaling, in `(0, 1)`.
    pub delta: f64,
    /// Target accuracy; the solver stops once the certificate drops below it.
    pub eps: f64,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self { beta: 0.05, sigma: 0.17, c_big: 10.0, c_one: 0.25, delta: 0.95, eps: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub condition: &'static str,
    pub lhs: f64,
    pub rhs: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: lhs = {:.6} vs {:.6}", self.condition, self.lhs, self.rhs)
    }
}

/// Outcome of parameter validation; empty `violations` means valid.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamCheck {
    pub violations: Vec<Violation>,
}

impl ParamCheck {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ParamCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_valid() {
            return write!(f, "ok");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Left-hand sides of the two contraction inequalities for `(beta, C)`:
/// `1/(C(1-b)) + b/((1-2b)(1-b)^2)` (compared to sigma) and `1/C + 1/(1-2b)`
/// (compared to 2).
pub fn contraction_lhs(beta: f64, c_big: f64) -> (f64, f64) {
    let first = 1.0 / (c_big * (1.0 - beta)) + beta / ((1.0 - 2.0 * beta) * (1.0 - beta).powi(2));
    let second = 1.0 / c_big + 1.0 / (1.0 - 2.0 * beta);
    (first, second)
}

impl SolverParams {
    /// Validation with [`VALIDATION_SLACK`].
    pub fn validate(&self) -> ParamCheck {
        self.validate_with_slack(VALIDATION_SLACK)
    }

    pub fn validate_strict(&self) -> ParamCheck {
        self.validate_with_slack(0.0)
    }

    pub fn validate_with_slack(&self, slack: f64) -> ParamCheck {
        let mut violations = Vec::new();
        let mut open = |name: &'static str, value: f64, lo: f64, hi: f64| {
            if !(value > lo && value < hi) {
                let rhs = if value <= lo || value.is_nan() { lo } else { hi };
                violations.push(Violation { condition: name, lhs: value, rhs });
            }
        };
        open("beta in (0, 0.5)", self.beta, 0.0, 0.5);
        open("sigma in (0, 1)", self.sigma, 0.0, 1.0);
        open("C > 1", self.c_big, 1.0, f64::INFINITY);
        open("C1 in (0, 0.5)", self.c_one, 0.0, 0.5);
        open("delta in (0, 1)", self.delta, 0.0, 1.0);
        open("eps > 0", self.eps, 0.0, f64::INFINITY);
        if !violations.is_empty() {
            return ParamCheck { violations };
        }
        let (first, second) = contraction_lhs(self.beta, self.c_big);
        if first > self.sigma * (1.0 + slack) {
            violations.push(Violation {
                condition: "1/(C(1-beta)) + beta/((1-2beta)(1-beta)^2) <= sigma",
                lhs: first,
                rhs: self.sigma,
            });
        }
        if second > 2.0 * (1.0 + slack) {
            violations.push(Violation { condition: "1/C + 1/(1-2beta) <= 2", lhs: second, rhs: 2.0 });
        }
        ParamCheck { violations }
    }

    /// Initial subproblem accuracy `min(beta / C, C1 h_inv(beta))`.
    pub fn eta0(&self) -> Result<f64> {
        Ok((self.beta / self.c_big).min(self.c_one * h_inv(self.beta)?))
    }

    pub fn nu(&self) -> Result<f64> {
        nu_exponent(self.beta, self.sigma)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn omega_values() {
        assert_eq!(omega(0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(omega(1.0).unwrap(), 1.0 - 2f64.ln(), epsilon = 1e-15);
        assert!(omega(0.3).unwrap() < omega(0.4).unwrap());
        assert!(omega(-1e-3).is_err());
    }

    #[test]
    fn omega_star_values() {
        assert_eq!(omega_star(0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(omega_star(0.5).unwrap(), -0.5 - 0.5f64.ln(), epsilon = 1e-15);
        let big = omega_star(0.999).unwrap();
        assert!(big.is_finite() && big > 5.0);
        assert!(omega_star(1.0).is_err());
        assert!(omega_star(-0.1).is_err());
    }

    #[test]
    fn h_values() {
        assert_eq!(h(0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(h(0.1).unwrap(), 0.082 / 0.638, epsilon = 1e-14);
        assert!(h(c2()).is_err());
        assert!(h(0.36).is_err());
        assert!(h(-0.01).is_err());
    }

    #[test]
    fn h_inv_values() {
        assert_eq!(h_inv(0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(h_inv(h(0.1).unwrap()).unwrap(), 0.1, epsilon = 1e-10);
        assert_abs_diff_eq!(h_inv(0.05).unwrap(), 0.0453, epsilon = 1e-4);
        assert!(h_inv(1e6).unwrap() < c2());
    }

    #[test]
    fn nu_values() {
        assert_abs_diff_eq!(nu_exponent(0.05, 0.1668).unwrap(), 1.0588, epsilon = 1e-4);
        assert_eq!(nu_exponent(0.0, 0.3).unwrap(), 1.0);
        assert_abs_diff_eq!(nu_exponent(0.1, 0.2).unwrap(), 1.1386, epsilon = 1e-4);
    }

    #[test]
    fn validation_examples() {
        let base = SolverParams::default();
        assert!(base.validate_strict().is_valid());
        let quoted = SolverParams { sigma: 0.1668, ..base };
        assert!(!quoted.validate_strict().is_valid());
        assert!(quoted.validate().is_valid());
        let bad = SolverParams { beta: 0.2, sigma: 0.2, ..base };
        let check = bad.validate();
        assert!(!check.is_valid());
        assert_abs_diff_eq!(check.violations[0].lhs, 0.6458, epsilon = 1e-4);
        let ranges = SolverParams { c_one: 0.5, delta: 1.0, ..base };
        assert_eq!(ranges.validate().violations.len(), 2);
    }

    #[test]
    fn eta0_default() {
        let p = SolverParams::default();
        assert_abs_diff_eq!(p.eta0().unwrap(), 0.005, epsilon = 1e-15);
    }
}
