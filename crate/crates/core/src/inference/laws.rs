//! Limit laws of the EL statistic and their quantiles.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_ur, ln_gamma};

use super::InferenceError;

/// Limiting law of `-2 log R`.
///
/// `ChiSq(0)` is the point mass at zero (the sticky spider case).
/// `HalfMix(p)` is the equal mixture of `chi2_p` and `chi2_{p-1}`; for
/// `p = 1` it has an atom of mass 1/2 at zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "df", rename_all = "snake_case")]
pub enum LimitLaw {
    ChiSq(u32),
    HalfMix(u32),
}

impl std::fmt::Display for LimitLaw {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LimitLaw::ChiSq(q) => write!(f, "chi2({q})"),
            LimitLaw::HalfMix(p) => write!(f, "halfmix({p})"),
        }
    }
}

/// Upper tail `P(chi2_q > x)` via the regularized upper incomplete gamma function.
pub fn chi2_tail(q: u32, x: f64) -> Result<f64, InferenceError> {
    if q == 0 {
        return Err(InferenceError::InvalidDegrees(q));
    }
    if x.is_nan() {
        return Err(InferenceError::NotANumber);
    }
    Ok(chi2_tail_unchecked(q, x))
}

fn chi2_tail_unchecked(q: u32, x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else if x == f64::INFINITY {
        0.0
    } else {
        gamma_ur(0.5 * q as f64, 0.5 * x)
    }
}

fn chi2_density(q: u32, x: f64) -> f64 {
    if x <= 0.0 {
        return if q == 2 { 0.5 } else if q == 1 { f64::INFINITY } else { 0.0 };
    }
    let k = 0.5 * q as f64;
    ((k - 1.0) * x.ln() - 0.5 * x - k * std::f64::consts::LN_2 - ln_gamma(k)).exp()
}

/// `P(X > x)` for `chi2_q`, including the point mass for `q = 0`.
fn survival(q: u32, x: f64) -> f64 {
    if q == 0 {
        if x < 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        chi2_tail_unchecked(q, x)
    }
}

/// `P(X >= x)` for `chi2_q`.
fn survival_inclusive(q: u32, x: f64) -> f64 {
    if q == 0 {
        if x <= 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        chi2_tail_unchecked(q, x)
    }
}

impl LimitLaw {
    /// Right-continuous tail `P(X > x)`.
    pub fn tail(&self, x: f64) -> f64 {
        match *self {
            LimitLaw::ChiSq(q) => survival(q, x),
            LimitLaw::HalfMix(p) => 0.5 * survival(p, x) + 0.5 * survival(p.saturating_sub(1), x),
        }
    }

    /// `P(X >= x)`, the p-value of an observed statistic `x`.
    pub fn p_value(&self, x: f64) -> f64 {
        match *self {
            LimitLaw::ChiSq(q) => survival_inclusive(q, x),
            LimitLaw::HalfMix(p) => {
                0.5 * survival_inclusive(p, x) + 0.5 * survival_inclusive(p.saturating_sub(1), x)
            }
        }
    }

    fn validate(&self) -> Result<(), InferenceError> {
        match *self {
            LimitLaw::HalfMix(0) => Err(InferenceError::InvalidDegrees(0)),
            _ => Ok(()),
        }
    }

    /// Smallest `c` with `tail(c) <= alpha`.
    pub fn quantile(&self, alpha: f64) -> Result<f64, InferenceError> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(InferenceError::InvalidAlpha(alpha));
        }
        self.validate()?;
        if self.tail(0.0) <= alpha {
            return Ok(0.0);
        }
        Ok(match *self {
            LimitLaw::ChiSq(q) => chi2_quantile(q, alpha),
            LimitLaw::HalfMix(_) => bisect_tail(|c| self.tail(c), alpha),
        })
    }
}

fn bracket(tail: impl Fn(f64) -> f64, alpha: f64) -> f64 {
    let mut hi = 1.0;
    while tail(hi) > alpha {
        hi *= 2.0;
    }
    hi
}

fn bisect_tail(tail: impl Fn(f64) -> f64, alpha: f64) -> f64 {
    let mut hi = bracket(&tail, alpha);
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if tail(mid) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Newton on `tail(c) = alpha`, kept inside a bisection bracket.
fn chi2_quantile(q: u32, alpha: f64) -> f64 {
    let tail = |c: f64| chi2_tail_unchecked(q, c);
    let mut hi = bracket(tail, alpha);
    let mut lo = 0.0;
    let mut c = 0.5 * hi;
    for _ in 0..200 {
        let f = tail(c) - alpha;
        if f > 0.0 {
            lo = c;
        } else if f < 0.0 {
            hi = c;
        } else {
            return c;
        }
        let d = chi2_density(q, c);
        let newton = c + f / d;
        let next = if d.is_finite() && d > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - c).abs() <= 1e-15 * c.max(1.0) {
            return next;
        }
        c = next;
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn tail_at_zero() {
        assert_eq!(chi2_tail(1, 0.0).unwrap(), 1.0);
        assert!(chi2_tail(0, 1.0).is_err());
    }

    #[test]
    fn two_degrees_closed_form() {
        for c in [0.1, 1.0, 3.0, 10.0, 40.0] {
            assert_abs_diff_eq!(chi2_tail(2, c).unwrap(), (-c / 2.0).exp(), epsilon = 1e-12);
        }
        assert_abs_diff_eq!(chi2_tail(2, 3.0).unwrap(), 0.22313016, epsilon = 1e-8);
    }

    #[test]
    fn quantiles() {
        assert_abs_diff_eq!(LimitLaw::ChiSq(1).quantile(0.05).unwrap(), 3.841459, epsilon = 1e-6);
        assert_abs_diff_eq!(LimitLaw::HalfMix(1).quantile(0.05).unwrap(), 2.705543, epsilon = 1e-6);
        assert_eq!(LimitLaw::HalfMix(1).quantile(0.6).unwrap(), 0.0);
        assert_eq!(LimitLaw::ChiSq(0).quantile(0.05).unwrap(), 0.0);
        // chi2_2 quantile is -2 ln(alpha).
        assert_abs_diff_eq!(
            LimitLaw::ChiSq(2).quantile(0.01).unwrap(),
            -2.0 * 0.01f64.ln(),
            epsilon = 1e-9
        );
    }

    #[test]
    fn invalid_arguments() {
        assert!(LimitLaw::ChiSq(1).quantile(0.0).is_err());
        assert!(LimitLaw::ChiSq(1).quantile(1.0).is_err());
        assert!(LimitLaw::HalfMix(0).quantile(0.1).is_err());
    }

    #[test]
    fn half_mix_atom() {
        let h = LimitLaw::HalfMix(1);
        assert_eq!(h.tail(-1.0), 1.0);
        assert_eq!(h.tail(0.0), 0.5);
        assert_eq!(h.p_value(0.0), 1.0);
        assert_abs_diff_eq!(h.tail(2.0), 0.5 * chi2_tail(1, 2.0).unwrap(), epsilon = 1e-15);
    }

    #[test]
    fn quantile_inverts_tail() {
        for law in [LimitLaw::ChiSq(1), LimitLaw::ChiSq(3), LimitLaw::HalfMix(2), LimitLaw::HalfMix(1)] {
            for alpha in [0.001, 0.01, 0.05, 0.1, 0.3] {
                let c = law.quantile(alpha).unwrap();
                assert_abs_diff_eq!(law.tail(c), alpha, epsilon = 1e-9);
            }
        }
    }
}
