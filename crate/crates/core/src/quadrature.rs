//! Gauss-Legendre rules on the unit interval and the unit square.

use crate::error::{Error, Result};

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_1d(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(1..=16).contains(&n) {
        return Err(Error::argument(format!(
            "Gauss rule with {n} points not supported (1..=16)"
        )));
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    // Newton iteration on P_n over [-1, 1], then map to [0, 1]
    for i in 0..(n + 1) / 2 {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = 0.5 * (1.0 - x);
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    Ok((nodes, weights))
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

/// Tensor Gauss rule on `[0,1]^2`, first coordinate running fastest.
#[derive(Clone, Debug)]
pub struct GaussRule2D {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl GaussRule2D {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

pub fn gauss_rule(nu: usize, nv: usize) -> Result<GaussRule2D> {
    let (xu, wu) = gauss_1d(nu)?;
    let (xv, wv) = gauss_1d(nv)?;
    let mut points = Vec::with_capacity(nu * nv);
    let mut weights = Vec::with_capacity(nu * nv);
    for (b, &y) in xv.iter().enumerate() {
        for (a, &x) in xu.iter().enumerate() {
            points.push([x, y]);
            weights.push(wu[a] * wv[b]);
        }
    }
    Ok(GaussRule2D { points, weights })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_point_rule() {
        let r = gauss_rule(1, 1).unwrap();
        assert_eq!(r.points, vec![[0.5, 0.5]]);
        assert!((r.weights[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn two_points_integrate_cubic_product() {
        let r = gauss_rule(2, 2).unwrap();
        let s: f64 = r
            .points
            .iter()
            .zip(&r.weights)
            .map(|(p, w)| w * p[0].powi(3) * p[1].powi(3))
            .sum();
        assert!((s - 1.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn three_points_integrate_quintic() {
        // integral of (x^5 + 2 x^2 y^3 - y^4 + 3) over [0,1]^2 = 1/6 + 1/6 - 1/5 + 3
        let r = gauss_rule(3, 3).unwrap();
        let s: f64 = r
            .points
            .iter()
            .zip(&r.weights)
            .map(|(p, w)| {
                let (x, y) = (p[0], p[1]);
                w * (x.powi(5) + 2.0 * x * x * y.powi(3) - y.powi(4) + 3.0)
            })
            .sum();
        let exact = 1.0 / 6.0 + 1.0 / 6.0 - 0.2 + 3.0;
        assert!((s - exact).abs() < 1e-14);
    }

    #[test]
    fn exactness_up_to_all_supported_sizes() {
        for n in 1..=16 {
            let (x, w) = gauss_1d(n).unwrap();
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            let deg = 2 * n - 1;
            let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
            assert!((s - 1.0 / (deg as f64 + 1.0)).abs() < 1e-14, "n={n}");
            assert!(x.windows(2).all(|p| p[0] < p[1]));
        }
        assert!(gauss_1d(0).is_err());
        assert!(gauss_1d(17).is_err());
    }
}
