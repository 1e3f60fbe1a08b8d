use crate::assembly::{DiscreteSolution, MultipatchDomain};
use crate::error::Result;

/// Potential and flux density at one physical point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldSample {
    pub x: [f64; 2],
    pub patch: usize,
    /// Level of the active element containing the point.
    pub level: usize,
    pub az: f64,
    /// `B = (∂A/∂y, -∂A/∂x)`.
    pub b: [f64; 2],
}

impl FieldSample {
    pub fn b_magnitude(&self) -> f64 {
        self.b[0].hypot(self.b[1])
    }
}

/// Field at a parametric point of one patch.
pub(crate) fn sample_parametric(
    solution: &DiscreteSolution,
    domain: &MultipatchDomain,
    patch: usize,
    xi: f64,
    eta: f64,
) -> Result<FieldSample> {
    let (az, g, x) = solution.eval(domain, patch, xi, eta)?;
    let (level, _) = domain.patches[patch].space.locate(xi, eta)?;
    Ok(FieldSample {
        x,
        patch,
        level,
        az,
        b: [g[1], -g[0]],
    })
}

/// Parametric coordinates `(patch, xi, eta)` of a physical point, found by
/// Newton iteration on each patch whose control polygon box contains it.
pub fn locate_physical(domain: &MultipatchDomain, x: [f64; 2]) -> Option<(usize, f64, f64)> {
    let tol = 1e-12 * domain.scale();
    for (k, patch) in domain.patches.iter().enumerate() {
        let pts = &patch.geometry.net.points;
        let lo = pts
            .iter()
            .fold([f64::INFINITY; 2], |a, p| [a[0].min(p[0]), a[1].min(p[1])]);
        let hi = pts.iter().fold([f64::NEG_INFINITY; 2], |a, p| {
            [a[0].max(p[0]), a[1].max(p[1])]
        });
        if x[0] < lo[0] - tol || x[0] > hi[0] + tol || x[1] < lo[1] - tol || x[1] > hi[1] + tol {
            continue;
        }
        let ((u0, u1), (v0, v1)) = patch.geometry.parametric_domain();
        let (mut xi, mut eta) = (0.5 * (u0 + u1), 0.5 * (v0 + v1));
        for _ in 0..60 {
            let Ok((y, j)) = patch.geometry.eval_jacobian(xi, eta) else {
                break;
            };
            let r = [y[0] - x[0], y[1] - x[1]];
            if r[0].hypot(r[1]) <= tol {
                return Some((k, xi, eta));
            }
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            if det == 0.0 {
                break;
            }
            let dxi = (j[1][1] * r[0] - j[0][1] * r[1]) / det;
            let deta = (-j[1][0] * r[0] + j[0][0] * r[1]) / det;
            xi = (xi - dxi).clamp(u0, u1);
            eta = (eta - deta).clamp(v0, v1);
        }
    }
    None
}

/// `nx x ny` points spanning the bounding box of the control points.
pub fn sample_grid(domain: &MultipatchDomain, nx: usize, ny: usize) -> Vec<[f64; 2]> {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in &domain.patches {
        for q in &p.geometry.net.points {
            lo = [lo[0].min(q[0]), lo[1].min(q[1])];
            hi = [hi[0].max(q[0]), hi[1].max(q[1])];
        }
    }
    let t = |i: usize, n: usize| {
        if n < 2 {
            0.5
        } else {
            i as f64 / (n - 1) as f64
        }
    };
    (0..ny)
        .flat_map(|j| (0..nx).map(move |i| (i, j)))
        .map(|(i, j)| {
            [
                lo[0] + t(i, nx) * (hi[0] - lo[0]),
                lo[1] + t(j, ny) * (hi[1] - lo[1]),
            ]
        })
        .collect()
}

/// Potential and flux density at physical points. Points outside every
/// patch are skipped with a warning.
pub fn postprocess_b(
    solution: &DiscreteSolution,
    domain: &MultipatchDomain,
    points: &[[f64; 2]],
) -> Result<Vec<FieldSample>> {
    let mut out = Vec::with_capacity(points.len());
    for &x in points {
        match locate_physical(domain, x) {
            Some((k, xi, eta)) => out.push(sample_parametric(solution, domain, k, xi, eta)?),
            None => log::warn!("sample point {x:?} lies outside the domain, skipped"),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::solve_problem;
    use crate::physics::Magnetostatic;

    #[test]
    fn linear_potential_gives_uniform_field() {
        let d = MultipatchDomain::rectangle(2, 2, 1, (-1.0, 1.0), (0.0, 2.0)).unwrap();
        let s = solve_problem(&d, &Magnetostatic::with_boundary(|x| x[1])).unwrap();
        let pts = sample_grid(&d, 5, 4);
        let f = postprocess_b(&s, &d, &pts).unwrap();
        assert_eq!(f.len(), 20);
        for fs in &f {
            assert!(
                (fs.b[0] - 1.0).abs() < 1e-9 && fs.b[1].abs() < 1e-9,
                "{fs:?}"
            );
            assert!((fs.az - fs.x[1]).abs() < 1e-10);
        }
        let outside = postprocess_b(&s, &d, &[[5.0, 5.0]]).unwrap();
        assert!(outside.is_empty());
    }

    #[test]
    fn constant_potential_gives_zero_field() {
        let d = MultipatchDomain::unit_square(2, 3, 1).unwrap();
        let s = solve_problem(&d, &Magnetostatic::with_boundary(|_| 0.25)).unwrap();
        for fs in postprocess_b(&s, &d, &sample_grid(&d, 4, 4)).unwrap() {
            assert!((fs.az - 0.25).abs() < 1e-12);
            assert!(fs.b_magnitude() < 1e-10);
        }
    }
}
