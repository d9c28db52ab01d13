//! Scalar special functions: the Gauss hypergeometric series with positive
//! integer parameters, the Jacobi theta function at zero argument, and
//! log-factorial / log-binomial helpers.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Hard cap on the number of terms summed by [`hyp2f1`].
pub const MAX_SERIES_TERMS: usize = 1_000_000;

/// A summed series together with how it was obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesValue<T> {
    pub value: T,
    pub terms_used: usize,
    pub converged: bool,
}

/// `2F1(a, b; c; x)` for positive integer parameters and `0 <= x < 1`.
///
/// Terms are generated by the ratio recursion
/// `t_{n+1} = t_n (a+n)(b+n) x / ((c+n)(n+1))` and summation stops once a term
/// falls below `1e-15` of the running sum while the ratio is below one.
pub fn hyp2f1<T: Real>(a: u32, b: u32, c: u32, x: T) -> Result<SeriesValue<T>> {
    hyp2f1_capped(a, b, c, x, MAX_SERIES_TERMS)
}

pub fn hyp2f1_capped<T: Real>(
    a: u32,
    b: u32,
    c: u32,
    x: T,
    max_terms: usize,
) -> Result<SeriesValue<T>> {
    if a == 0 || b == 0 || c == 0 {
        return Err(Error::Domain(format!(
            "2F1 parameters must be positive integers, got ({a}, {b}, {c})"
        )));
    }
    if !(x >= T::zero() && x < T::one()) {
        return Err(Error::Domain(format!(
            "2F1 argument must lie in [0, 1), got {}",
            x.as_f64()
        )));
    }
    let tol = T::series_tolerance();
    let (a, b, c) = (
        T::from_u32(a).unwrap(),
        T::from_u32(b).unwrap(),
        T::from_u32(c).unwrap(),
    );
    let mut term = T::one();
    let mut sum = T::one();
    let mut terms = 1;
    if x == T::zero() {
        return Ok(SeriesValue {
            value: sum,
            terms_used: terms,
            converged: true,
        });
    }
    while terms < max_terms {
        let n = T::from_count(terms - 1);
        let ratio = (a + n) * (b + n) / ((c + n) * (n + T::one())) * x;
        term *= ratio;
        sum += term;
        terms += 1;
        if term < tol * sum && ratio < T::one() {
            return Ok(SeriesValue {
                value: sum,
                terms_used: terms,
                converged: true,
            });
        }
    }
    Err(Error::NonConvergence {
        terms,
        partial: sum.as_f64(),
    })
}

/// `theta_3(0, q) = 1 + 2 sum_{n>=1} q^{n^2}` for `0 <= q < 1`.
pub fn jacobi_theta3_zero<T: Real>(q: T) -> Result<SeriesValue<T>> {
    if !(q >= T::zero() && q < T::one()) {
        return Err(Error::Domain(format!(
            "theta3 nome must lie in [0, 1), got {}",
            q.as_f64()
        )));
    }
    let tol = T::series_tolerance();
    let mut sum = T::one();
    let mut terms = 1;
    if q == T::zero() {
        return Ok(SeriesValue {
            value: sum,
            terms_used: terms,
            converged: true,
        });
    }
    let two = T::lit(2.0);
    // q^{n^2} = q^{(n-1)^2} * q^{2n-1}
    let mut power = T::one();
    let mut step = q;
    let q2 = q * q;
    while terms < MAX_SERIES_TERMS {
        power *= step;
        step *= q2;
        let term = two * power;
        sum += term;
        terms += 1;
        if term < tol * sum {
            return Ok(SeriesValue {
                value: sum,
                terms_used: terms,
                converged: true,
            });
        }
    }
    Err(Error::NonConvergence {
        terms,
        partial: sum.as_f64(),
    })
}

const LN_FACTORIAL_TABLE: usize = 1 << 14;

fn ln_factorial_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = Vec::with_capacity(LN_FACTORIAL_TABLE);
        table.push(0.0);
        let mut acc = 0.0f64;
        for i in 1..LN_FACTORIAL_TABLE {
            acc += (i as f64).ln();
            table.push(acc);
        }
        table
    })
}

/// `ln n!`, tabulated up to 16383 and from the Stirling series beyond.
pub fn ln_factorial(n: usize) -> f64 {
    let table = ln_factorial_table();
    if n < table.len() {
        return table[n];
    }
    let x = n as f64 + 1.0;
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    (x - 0.5) * x.ln() - x
        + 0.5 * (2.0 * std::f64::consts::PI).ln()
        + inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 / 1260.0))
}

/// `ln C(n, k)`; exactly zero for `k = 0` and `k = n`.
pub fn log_binomial<T: Real>(n: usize, k: usize) -> Result<T> {
    if k > n {
        return Err(Error::Domain(format!("binomial C({n}, {k}) with k > n")));
    }
    if k == 0 || k == n {
        return Ok(T::zero());
    }
    Ok(T::lit(
        ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k),
    ))
}

/// `ln C(n, k)` with out-of-range arguments mapped to `-inf` (a zero binomial).
#[cfg(test)]
pub(crate) fn ln_binomial_or_neg_inf(n: i64, k: i64) -> f64 {
    if n < 0 || k < 0 || k > n {
        f64::NEG_INFINITY
    } else {
        ln_factorial(n as usize) - ln_factorial(k as usize) - ln_factorial((n - k) as usize)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_series() {
        let v = hyp2f1::<f64>(1, 1, 1, 0.2).unwrap();
        assert!((v.value - 1.25).abs() < 1e-14);
        assert!(v.converged);
    }

    #[test]
    fn zero_argument_is_leading_term() {
        let v = hyp2f1::<f64>(2, 2, 1, 0.0).unwrap();
        assert_eq!(v.value, 1.0);
        assert_eq!(v.terms_used, 1);
    }

    #[test]
    fn matches_naive_summation() {
        // naive: sum of explicitly computed Pochhammer products
        let x = 0.2f64;
        let mut naive = 0.0;
        for n in 0..10_000u32 {
            let mut t = 1.0f64;
            for j in 0..n {
                let j = j as f64;
                t *= (2.0 + j) * (2.0 + j) / ((1.0 + j) * (j + 1.0)) * x;
            }
            naive += t;
            if t < 1e-300 {
                break;
            }
        }
        let v = hyp2f1::<f64>(2, 2, 1, x).unwrap();
        assert!(((v.value - naive) / naive).abs() < 1e-12);
    }

    #[test]
    fn hyp2f1_domain_and_cap() {
        assert!(matches!(hyp2f1::<f64>(1, 1, 1, 1.0), Err(Error::Domain(_))));
        assert!(matches!(
            hyp2f1::<f64>(1, 1, 1, -0.1),
            Err(Error::Domain(_))
        ));
        assert!(matches!(hyp2f1::<f64>(0, 1, 1, 0.1), Err(Error::Domain(_))));
        match hyp2f1_capped::<f64>(1, 1, 1, 0.999, 50) {
            Err(Error::NonConvergence { terms, partial }) => {
                assert_eq!(terms, 50);
                assert!(partial > 1.0);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn hyp2f1_single_precision() {
        let v = hyp2f1::<f32>(1, 1, 1, 0.2).unwrap();
        assert!((v.value - 1.25).abs() < 1e-6);
    }

    #[test]
    fn theta3_values() {
        assert_eq!(jacobi_theta3_zero::<f64>(0.0).unwrap().value, 1.0);
        let q = (-1.0f64).exp();
        let naive = 1.0 + 2.0 * (1..=50).map(|n| q.powi(n * n)).sum::<f64>();
        let v = jacobi_theta3_zero(q).unwrap();
        assert!((v.value - naive).abs() < 1e-14);
        // mu_n = 2/(1+theta3) e^{-n^2} sums to one
        let norm = 2.0 / (1.0 + v.value);
        let total: f64 = (0..50).map(|n: i32| norm * (-(n * n) as f64).exp()).sum();
        assert!((total - 1.0).abs() < 1e-14);
        assert!(matches!(jacobi_theta3_zero(1.0f64), Err(Error::Domain(_))));
    }

    #[test]
    fn log_binomial_small() {
        assert_eq!(log_binomial::<f64>(5, 0).unwrap(), 0.0);
        assert_eq!(log_binomial::<f64>(5, 5).unwrap(), 0.0);
        assert!((log_binomial::<f64>(4, 2).unwrap() - 6f64.ln()).abs() < 1e-14);
        assert!(matches!(log_binomial::<f64>(3, 4), Err(Error::Domain(_))));
    }

    #[test]
    fn log_binomial_large_exact() {
        use num_bigint::BigUint;
        let mut num = BigUint::from(1u32);
        for i in 51..=100u32 {
            num *= i;
        }
        let mut den = BigUint::from(1u32);
        for i in 1..=50u32 {
            den *= i;
        }
        let exact = num / den;
        // ln via decimal digits: value = mantissa * 10^exp
        let s = exact.to_string();
        let digits = s.len();
        let mantissa: f64 = format!("{}.{}", &s[..1], &s[1..18]).parse().unwrap();
        let exact_ln = mantissa.ln() + ((digits - 1) as f64) * 10f64.ln();
        let got = log_binomial::<f64>(100, 50).unwrap();
        assert!(((got - exact_ln) / exact_ln).abs() < 1e-12);
    }

    #[test]
    fn stirling_continuation() {
        let n = LN_FACTORIAL_TABLE - 1;
        let direct = ln_factorial(n) + ((n + 1) as f64).ln();
        let stirling = ln_factorial(n + 1);
        assert!(((direct - stirling) / direct).abs() < 1e-13);
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn binomial_series_identity(k in 0u32..12, x in 0.0f64..0.95) {
                let v = hyp2f1::<f64>(k + 1, 1, 1, x).unwrap().value;
                let exact = (1.0 - x).powi(-(k as i32 + 1));
                prop_assert!(((v - exact) / exact).abs() < 1e-10);
            }

            #[test]
            fn hyp2f1_monotone(a in 1u32..6, b in 1u32..6, c in 1u32..6, x in 0.0f64..0.9, dx in 0.0f64..0.05) {
                let lo = hyp2f1::<f64>(a, b, c, x).unwrap().value;
                let hi = hyp2f1::<f64>(a, b, c, x + dx).unwrap().value;
                prop_assert!(hi >= lo * (1.0 - 1e-14));
            }

            #[test]
            fn theta3_monotone(q in 0.0f64..0.9, dq in 1e-6f64..0.05) {
                let lo = jacobi_theta3_zero(q).unwrap().value;
                let hi = jacobi_theta3_zero(q + dq).unwrap().value;
                prop_assert!(hi > lo);
            }

            #[test]
            fn exp_log_binomial_exact(n in 0usize..=30, k in 0usize..=30) {
                prop_assume!(k <= n);
                let mut exact = 1u64;
                for i in 0..k as u64 {
                    exact = exact * (n as u64 - i) / (i + 1);
                }
                let got = log_binomial::<f64>(n, k).unwrap().exp();
                prop_assert!(((got - exact as f64) / exact as f64).abs() < 1e-12);
            }
        }
    }
}
