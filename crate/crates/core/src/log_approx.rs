//! Power-function approximation of the logarithm and truncated binomial
//! series for `x^{±c}`.
//!
//! `(x^{-a} − x^{a})/(2a)` lies between `ln(1/x)` and `e^{a·ln(1/x)}·ln(1/x)`,
//! so with `a = ln γ/ln(1/β)` it is a one-sided γ-approximation of the
//! logarithm on `[β, 1]`.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{out_of_range, Error, Result};

/// Multiplier in `degree ≤ C·max(1,c)/δ·ln(1/ε)`.
pub const DEGREE_CONSTANT: f64 = 20.0;
/// Hard cap on the truncation degree.
pub const MAX_DEGREE: usize = 20_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerExponent {
    pub a: f64,
    pub gamma: f64,
    pub beta: f64,
}

impl PowerExponent {
    /// An exponent no larger than `ln γ/ln(1/β)`, which keeps the factor
    /// at most γ on `[β, 1]`.
    pub fn new(a: f64, gamma: f64, beta: f64) -> Result<Self> {
        check_gamma_beta(gamma, beta)?;
        let cap = gamma.ln() / (1.0 / beta).ln();
        if !(a > 0.0 && a <= cap * (1.0 + 1e-12)) {
            return Err(out_of_range(format!("a = {a} not in (0, {cap}]")));
        }
        Ok(PowerExponent { a, gamma, beta })
    }
}

fn check_gamma_beta(gamma: f64, beta: f64) -> Result<()> {
    if !(gamma > 1.0 && gamma.is_finite()) {
        return Err(out_of_range(format!("gamma = {gamma} must exceed 1")));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(out_of_range(format!("beta = {beta} not in (0,1)")));
    }
    Ok(())
}

pub fn choose_exponent(gamma: f64, beta: f64) -> Result<PowerExponent> {
    check_gamma_beta(gamma, beta)?;
    Ok(PowerExponent { a: gamma.ln() / (1.0 / beta).ln(), gamma, beta })
}

/// `(x^{-a} − x^{a})/(2a·ln 2)`, an approximation of `log₂(1/x)` from above.
pub fn f_power_log(x: f64, a: f64) -> Result<f64> {
    if !(x > 0.0 && x <= 1.0) {
        return Err(out_of_range(format!("x = {x} not in (0,1]")));
    }
    if !(a > 0.0) {
        return Err(out_of_range(format!("a = {a} must be positive")));
    }
    let t = a * (1.0 / x).ln();
    Ok(t.sinh() / (a * LN_2))
}

/// `e^{a·ln(1/x)}`, an upper bound on `f_power_log(x,a)/log₂(1/x)`.
pub fn multiplicative_factor_bound(a: f64, x: f64) -> Result<f64> {
    if !(x > 0.0 && x <= 1.0) || !(a > 0.0 && a < 1.0) {
        return Err(out_of_range(format!("need x ∈ (0,1], a ∈ (0,1); got x = {x}, a = {a}")));
    }
    Ok((a * (1.0 / x).ln()).exp())
}

/// The exact ratio `f_power_log(x,a)/log₂(1/x) = sinh(t)/t`, `t = a·ln(1/x)`,
/// whose series is `1 + t²/3! + t⁴/5! + …`. Equals 1 at `x = 1`.
pub fn exact_factor(a: f64, x: f64) -> f64 {
    let t = a * (1.0 / x).ln();
    if t.abs() < 1e-8 {
        1.0 + t * t / 6.0
    } else {
        t.sinh() / t
    }
}

/// Generalized binomial coefficient `c(c−1)…(c−k+1)/k!`.
pub fn binom(c: f64, k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, j| acc * (c - (j - 1) as f64) / j as f64)
}

/// `Σ_{k=1}^{K} |binom(c,k)|` for `c ∈ (0,1]`.
pub fn abs_binom_partial_sum(c: f64, big_k: usize) -> f64 {
    let mut b = 1.0;
    let mut s = 0.0;
    for k in 1..=big_k {
        b *= (c - (k - 1) as f64) / k as f64;
        s += b.abs();
    }
    s
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    Even,
    Odd,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerTarget {
    PosPower,
    NegPower,
}

/// Truncated binomial series around `x = 1`.
///
/// Coefficients are kept in the shifted variable `y = x − 1`; the
/// polynomial is evaluated as its even extension `p(|x|)`, which is what
/// acts on singular values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaylorPolynomial {
    /// Coefficients of `(x−1)^k`, already multiplied by the normalization.
    pub shifted_coeffs: Vec<f64>,
    pub degree: usize,
    pub parity: Parity,
    pub target: PowerTarget,
    pub c: f64,
    pub delta: f64,
    /// The polynomial approximates `normalization·x^{±c}` on `[δ,1]`.
    pub normalization: f64,
    pub eps_cert: f64,
    /// Factor the series was divided by to keep `|p| ≤ 1`; 1 if untouched.
    pub rescale: f64,
}

impl TaylorPolynomial {
    pub fn eval(&self, x: f64) -> f64 {
        let y = x.abs() - 1.0;
        // Neumaier summation of b_k·y^k.
        let mut sum = 0.0;
        let mut comp = 0.0;
        let mut pow = 1.0;
        for &b in &self.shifted_coeffs {
            let t = b * pow;
            let s = sum + t;
            comp += if sum.abs() >= t.abs() { (sum - s) + t } else { (t - s) + sum };
            sum = s;
            pow *= y;
        }
        sum + comp
    }

    pub fn target_value(&self, x: f64) -> f64 {
        match self.target {
            PowerTarget::PosPower => self.normalization * x.powf(self.c),
            PowerTarget::NegPower => self.normalization * x.powf(-self.c),
        }
    }

    /// Expansion into powers of `x` (ill-conditioned beyond modest degree).
    pub fn monomial_coeffs(&self) -> Vec<f64> {
        let k = self.shifted_coeffs.len();
        let mut out = vec![0.0; k];
        // (x−1)^j = Σ_i binom(j,i) x^i (−1)^{j−i}
        for (j, &b) in self.shifted_coeffs.iter().enumerate() {
            let mut bin = 1.0;
            for i in 0..=j {
                let sign = if (j - i) % 2 == 0 { 1.0 } else { -1.0 };
                out[i] += b * bin * sign;
                bin = bin * (j - i) as f64 / (i + 1) as f64;
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("polynomial serializes")
    }
}

/// `C·max(1,c)/δ·ln(1/ε)`.
pub fn degree_ceiling(c: f64, delta: f64, eps: f64) -> f64 {
    DEGREE_CONSTANT * c.max(1.0) / delta * (1.0 / eps).ln()
}

fn check_series_args(c: f64, delta: f64, eps: f64) -> Result<()> {
    if !(c > 0.0 && c <= 1.0) {
        return Err(out_of_range(format!("c = {c} not in (0,1]")));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(out_of_range(format!("delta = {delta} not in (0,1]")));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(out_of_range(format!("eps = {eps} not in (0,1)")));
    }
    Ok(())
}

/// Approximates `x^c/2` on `[δ,1]`.
///
/// All tail terms of the series share one sign and grow as `x` decreases,
/// so the sup-error on `[δ,1]` is attained at `x = δ` and the truncation
/// degree is the smallest `K` whose partial sum there is within ε.
pub fn taylor_poly_pos(c: f64, delta: f64, eps: f64) -> Result<TaylorPolynomial> {
    check_series_args(c, delta, eps)?;
    let norm = 0.5;
    let y = delta - 1.0;
    let target = norm * delta.powf(c);
    let mut coeffs = vec![norm];
    let mut b = 1.0;
    let mut pow = 1.0;
    let mut at_delta = norm;
    let mut err = (at_delta - target).abs();
    while err > eps {
        let k = coeffs.len();
        if k > MAX_DEGREE {
            return Err(Error::Unreachable(format!("degree cap {MAX_DEGREE} reached for c={c}, δ={delta}, ε={eps}")));
        }
        b *= (c - (k - 1) as f64) / k as f64;
        pow *= y;
        coeffs.push(norm * b);
        at_delta += norm * b * pow;
        err = (at_delta - target).abs();
        if c == k as f64 {
            err = 0.0;
        }
    }
    Ok(TaylorPolynomial {
        degree: coeffs.len() - 1,
        shifted_coeffs: coeffs,
        parity: Parity::Even,
        target: PowerTarget::PosPower,
        c,
        delta,
        normalization: norm,
        eps_cert: err,
        rescale: 1.0,
    })
}

/// Approximates `(δ^c/2)·x^{-c}` on `[δ,1]`.
///
/// Every series term is nonnegative on `[0,1]`, so the error is largest at
/// `x = δ` and the magnitude is largest at `x = 0` where it equals
/// `(δ^c/2)·binom(K+c, K)`. When that exceeds 1 the polynomial is divided
/// by it and the normalization follows.
pub fn taylor_poly_neg(c: f64, delta: f64, eps: f64) -> Result<TaylorPolynomial> {
    check_series_args(c, delta, eps)?;
    let norm = 0.5 * delta.powf(c);
    let r = 1.0 - delta;
    let mut coeffs = vec![norm];
    // Terms in (1−x): t_k = (c)_k/k!·(1−x)^k.
    let mut rising = 1.0;
    let mut pow = 1.0;
    let mut at_delta = 1.0;
    let mut at_zero = 1.0;
    let mut err = (0.5 - norm * at_delta).abs();
    while err > eps {
        let k = coeffs.len();
        if k > MAX_DEGREE {
            return Err(Error::Unreachable(format!("degree cap {MAX_DEGREE} reached for c={c}, δ={delta}, ε={eps}")));
        }
        rising *= (c + (k - 1) as f64) / k as f64;
        pow *= r;
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        coeffs.push(norm * rising * sign);
        at_delta += rising * pow;
        at_zero += rising;
        err = (0.5 - norm * at_delta).abs();
    }
    let peak = norm * at_zero;
    let rescale = peak.max(1.0);
    if rescale > 1.0 {
        coeffs.iter_mut().for_each(|v| *v /= rescale);
    }
    Ok(TaylorPolynomial {
        degree: coeffs.len() - 1,
        shifted_coeffs: coeffs,
        parity: Parity::Even,
        target: PowerTarget::NegPower,
        c,
        delta,
        normalization: norm / rescale,
        eps_cert: err / rescale,
        rescale,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertReport {
    pub grid_points: usize,
    pub sup_error: f64,
    pub max_abs: f64,
    /// Extra factor applied because `max_abs` exceeded 1 (1 if none).
    pub rescale: f64,
    pub eps_cert: f64,
}

/// Grid check on a uniform grid plus Chebyshev nodes: sup-error on `[δ,1]`
/// and magnitude on `[−1,1]`. Rescales if the magnitude exceeds 1 and
/// raises `eps_cert` to the measured error if that is larger.
pub fn certify(poly: &mut TaylorPolynomial, grid_points: usize) -> Result<CertReport> {
    if grid_points < 1000 {
        return Err(out_of_range(format!("grid_points = {grid_points} < 1000")));
    }
    let g = grid_points;
    let cheb = |k: usize| (std::f64::consts::PI * (2 * k + 1) as f64 / (2 * g) as f64).cos();
    let mut max_abs: f64 = 0.0;
    for k in 0..=g {
        let x = -1.0 + 2.0 * k as f64 / g as f64;
        max_abs = max_abs.max(poly.eval(x).abs());
    }
    for k in 0..g {
        max_abs = max_abs.max(poly.eval(cheb(k)).abs());
    }
    let mut extra = 1.0;
    if max_abs > 1.0 {
        extra = max_abs;
        poly.shifted_coeffs.iter_mut().for_each(|v| *v /= extra);
        poly.normalization /= extra;
        poly.eps_cert /= extra;
        poly.rescale *= extra;
        max_abs = 1.0;
    }
    let d = poly.delta;
    let mut sup: f64 = 0.0;
    for k in 0..=g {
        let x = d + (1.0 - d) * k as f64 / g as f64;
        sup = sup.max((poly.eval(x) - poly.target_value(x)).abs());
    }
    for k in 0..g {
        let x = d + (1.0 - d) * 0.5 * (1.0 + cheb(k));
        sup = sup.max((poly.eval(x) - poly.target_value(x)).abs());
    }
    poly.eps_cert = poly.eps_cert.max(sup);
    Ok(CertReport { grid_points: g, sup_error: sup, max_abs, rescale: extra, eps_cert: poly.eps_cert })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponent_examples() {
        assert!((choose_exponent(2.0, 2f64.powi(-4)).unwrap().a - 0.25).abs() < 1e-15);
        assert!((choose_exponent(2.0, 2f64.powi(-8)).unwrap().a - 0.125).abs() < 1e-15);
        let e = choose_exponent(3.0, 0.01).unwrap();
        assert!((e.beta.powf(e.a / 2.0) - 1.0 / 3f64.sqrt()).abs() < 1e-14);
        assert!(choose_exponent(1.0, 0.5).is_err());
        assert!(choose_exponent(2.0, 1.0).is_err());
        assert!(PowerExponent::new(0.6, 2.0, 0.25).is_err());
    }

    #[test]
    fn power_log_examples() {
        assert_eq!(f_power_log(1.0, 0.3).unwrap(), 0.0);
        let v = f_power_log(0.5, 0.25).unwrap();
        let t = 0.25 * LN_2;
        assert!((v - t.sinh() / t).abs() < 1e-15);
        assert!((v - 1.005_012_2).abs() < 1e-7 && (v - 1.00502).abs() < 1e-5);
        assert!(f_power_log(0.0, 0.3).is_err());
        let g = multiplicative_factor_bound(0.25, 0.5).unwrap();
        assert!((g - 1.189_207_1).abs() < 1e-6 && v <= g);
        assert_eq!(multiplicative_factor_bound(0.25, 1.0).unwrap(), 1.0);
        let e = choose_exponent(2.0, 0.01).unwrap();
        assert!((multiplicative_factor_bound(e.a, e.beta).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn linear_series_terminates() {
        let p = taylor_poly_pos(1.0, 0.1, 1e-6).unwrap();
        assert_eq!(p.degree, 1);
        assert_eq!(p.eps_cert, 0.0);
        assert!((p.eval(0.3) - 0.15).abs() < 1e-15);
    }

    #[test]
    fn neg_series_at_unit_delta() {
        let p = taylor_poly_neg(0.5, 1.0, 1e-3).unwrap();
        assert!((p.eval(1.0) - 0.5).abs() <= 1e-3);
    }

    #[test]
    fn neg_normalization_matches_threshold() {
        let e = choose_exponent(2.0, 1.0 / 16.0).unwrap();
        let p = taylor_poly_neg(e.a, e.beta.sqrt(), 1e-3).unwrap();
        assert!((p.normalization * p.rescale - 0.5 / 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn certified_examples() {
        for (c, d, e, neg) in [(0.25, 0.1, 1e-3, false), (0.5, 0.25, 1e-3, true), (0.25, 0.05, 1e-4, false)] {
            let mut p = if neg { taylor_poly_neg(c, d, e) } else { taylor_poly_pos(c, d, e) }.unwrap();
            let rep = certify(&mut p, 100_000).unwrap();
            assert!(rep.sup_error <= e, "{rep:?}");
            assert!(rep.max_abs <= 1.0);
        }
    }

    #[test]
    fn partial_sum_identity() {
        for c in [0.1, 0.25, 0.5, 0.9, 1.0] {
            for k in [1, 5, 50, 500] {
                let s = abs_binom_partial_sum(c, k);
                assert!((s + binom(c - 1.0, k).abs() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn monomial_form_agrees_at_low_degree() {
        let p = taylor_poly_pos(0.5, 0.5, 1e-3).unwrap();
        let m = p.monomial_coeffs();
        for x in [0.5f64, 0.7, 1.0] {
            let v: f64 = m.iter().enumerate().map(|(i, c)| c * x.powi(i as i32)).sum();
            assert!((v - p.eval(x)).abs() < 1e-10);
        }
    }
}
