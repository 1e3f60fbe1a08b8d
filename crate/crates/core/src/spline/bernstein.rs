//! Bernstein polynomials on the reference interval `[0, 1]`.

use crate::error::{Error, Result};

fn binomial(n: usize, k: usize) -> f64 {
    let mut c = 1.0;
    for i in 0..k {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    c
}

/// `B_k(u) = C(p,k) u^k (1-u)^(p-k)` for `k = 0..=p`.
pub fn bernstein_eval(p: usize, u: f64) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::Domain {
            value: u,
            lo: 0.0,
            hi: 1.0,
        });
    }
    Ok(bernstein_unchecked(p, u))
}

pub(crate) fn bernstein_unchecked(p: usize, u: f64) -> Vec<f64> {
    // de Casteljau-style triangle keeps every intermediate non-negative
    let mut b = vec![0.0; p + 1];
    b[0] = 1.0;
    let v = 1.0 - u;
    for j in 1..=p {
        let mut saved = 0.0;
        for k in 0..j {
            let temp = b[k];
            b[k] = saved + v * temp;
            saved = u * temp;
        }
        b[j] = saved;
    }
    b
}

/// Values and first derivatives of the degree-`p` Bernstein basis.
pub fn bernstein_with_derivs(p: usize, u: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::Domain {
            value: u,
            lo: 0.0,
            hi: 1.0,
        });
    }
    Ok(bernstein_derivs_unchecked(p, u))
}

pub(crate) fn bernstein_derivs_unchecked(p: usize, u: f64) -> (Vec<f64>, Vec<f64>) {
    let values = bernstein_unchecked(p, u);
    let mut derivs = vec![0.0; p + 1];
    if p > 0 {
        let lower = bernstein_unchecked(p - 1, u);
        let pf = p as f64;
        for k in 0..=p {
            let left = if k > 0 { lower[k - 1] } else { 0.0 };
            let right = if k < p { lower[k] } else { 0.0 };
            derivs[k] = pf * (left - right);
        }
    }
    (values, derivs)
}

/// Closed-form binomial evaluation, kept for cross-checking.
pub fn bernstein_closed_form(p: usize, k: usize, u: f64) -> f64 {
    binomial(p, k) * u.powi(k as i32) * (1.0 - u).powi((p - k) as i32)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoint_and_midpoint() {
        assert_eq!(bernstein_eval(2, 0.0).unwrap(), vec![1.0, 0.0, 0.0]);
        assert_eq!(bernstein_eval(2, 0.5).unwrap(), vec![0.25, 0.5, 0.25]);
        assert!(bernstein_eval(2, 1.5).is_err());
    }

    #[test]
    fn cubic_matches_binomial_formula() {
        let b = bernstein_eval(3, 0.2).unwrap();
        // 0.8^3, 3*0.2*0.8^2, 3*0.04*0.8, 0.008
        let expect = [0.512, 0.384, 0.096, 0.008];
        for (k, (v, e)) in b.iter().zip(expect).enumerate() {
            assert!((v - e).abs() < 1e-15, "k={k}");
            assert!((v - bernstein_closed_form(3, k, 0.2)).abs() < 1e-15);
        }
    }

    #[test]
    fn derivatives_match_differences() {
        for p in 1..=6 {
            let u = 0.37;
            let h = 1e-6;
            let (_, d) = bernstein_with_derivs(p, u).unwrap();
            let bp = bernstein_eval(p, u + h).unwrap();
            let bm = bernstein_eval(p, u - h).unwrap();
            for k in 0..=p {
                let fd = (bp[k] - bm[k]) / (2.0 * h);
                assert!((fd - d[k]).abs() < 1e-6 * (1.0 + d[k].abs()));
            }
            assert!(d.iter().sum::<f64>().abs() < 1e-12);
        }
    }
}
