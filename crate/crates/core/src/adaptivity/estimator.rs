use std::collections::BTreeMap;

use rayon::prelude::*;

use super::l2::{element_basis, element_field};
use super::{ElementKey, ErrorIndicators};
use crate::assembly::{
    assemble_with, boundary_projection, solve_indefinite, AssemblyRoute, DiscreteSolution, DofMap,
    MultipatchDomain, SparseMatrix,
};
use crate::error::{Error, Result};
use crate::physics::PhysicsProblem;
use crate::quadrature::gauss_rule;

/// Result of the two-mesh estimate.
#[derive(Clone, Debug)]
pub struct TwoMeshEstimate {
    /// The domain with every patch space refined once.
    pub fine_domain: MultipatchDomain,
    /// Error function `p` on the fine space, zero on the boundary.
    pub error_function: DiscreteSolution,
    /// Coarse solution from the same saddle system.
    pub coarse: DiscreteSolution,
    pub indicators: ErrorIndicators,
}

/// `(fine dof, coarse dof, a(fine, coarse))` over all fine elements.
fn coupling_triplets(
    coarse: &MultipatchDomain,
    fine: &MultipatchDomain,
    problem: &dyn PhysicsProblem,
    cdofs: &DofMap,
    fdofs: &DofMap,
) -> Result<Vec<(usize, usize, f64)>> {
    let mut trips = Vec::new();
    for (pi, (cp, fp)) in coarse.patches.iter().zip(&fine.patches).enumerate() {
        let deg = fp.space.degrees();
        let rule = gauss_rule(deg.0 + 1, deg.1 + 1)?;
        let mat = coarse.material(pi);
        let (cmap, fmap) = (cdofs.patch_dofs(pi), fdofs.patch_dofs(pi));
        let parts: Vec<Result<Vec<(usize, usize, f64)>>> = fp
            .space
            .elements()
            .par_iter()
            .map(|fel| {
                let ((u0, u1), (v0, v1)) = fel.bounds;
                let (l, e) = cp.space.locate(0.5 * (u0 + u1), 0.5 * (v0 + v1))?;
                let cel = &cp.space.elements()[cp.space.element_position(l, e).expect("active")];
                let (hu, hv) = fel.size();
                let nf = fel.functions.len();
                let nc = cel.functions.len();
                let mut k = vec![0.0; nf * nc];
                for (pt, w) in rule.points.iter().zip(&rule.weights) {
                    let (xi, eta) = fel.to_parametric(pt[0], pt[1]);
                    let (x, j) = fp.geometry.eval_jacobian(xi, eta)?;
                    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
                    if !(det > 0.0) {
                        return Err(Error::Geometry {
                            patch: pi,
                            element: Some((fel.level, fel.index)),
                            message: format!("Jacobian determinant {det:e}"),
                        });
                    }
                    let push = |g: [f64; 2]| {
                        [
                            (j[1][1] * g[0] - j[1][0] * g[1]) / det,
                            (-j[0][1] * g[0] + j[0][0] * g[1]) / det,
                        ]
                    };
                    let nu = problem.diffusion(&mat, x);
                    let dx = w * hu * hv * det * nu;
                    let (cs, ct) = cel.to_local(xi, eta);
                    let gf: Vec<[f64; 2]> = element_basis(fel, deg, pt[0], pt[1])
                        .1
                        .into_iter()
                        .map(push)
                        .collect();
                    let gc: Vec<[f64; 2]> = element_basis(cel, deg, cs, ct)
                        .1
                        .into_iter()
                        .map(push)
                        .collect();
                    for (a, ga) in gf.iter().enumerate() {
                        for (b, gb) in gc.iter().enumerate() {
                            k[a * nc + b] += dx * (ga[0] * gb[0] + ga[1] * gb[1]);
                        }
                    }
                }
                let mut out = Vec::with_capacity(nf * nc);
                for (a, &f) in fel.functions.iter().enumerate() {
                    for (b, &c) in cel.functions.iter().enumerate() {
                        out.push((fmap[f], cmap[c], k[a * nc + b]));
                    }
                }
                Ok(out)
            })
            .collect();
        for p in parts {
            trips.extend(p?);
        }
    }
    Ok(trips)
}

/// Two-mesh estimate: with `A` the fine stiffness and `B` the coarse
/// functions tested against fine ones, solve
///
/// `[[A, B], [B^T, 0]] [p; u] = [f; 0]`
///
/// with `p = 0` on the boundary and `u` carrying the Dirichlet data. Then
/// `eta_k^2 = int_k |grad p|^2` for every coarse element `k`.
pub fn estimate_two_mesh(
    domain: &MultipatchDomain,
    problem: &dyn PhysicsProblem,
) -> Result<TwoMeshEstimate> {
    for (k, p) in domain.patches.iter().enumerate() {
        if p.space.num_levels_in_use() >= p.space.max_levels() {
            return Err(Error::argument(format!(
                "patch {k}: the fine space needs a level beyond the {} available",
                p.space.max_levels()
            )));
        }
    }
    let fine = domain.map_spaces(|s| s.refine_all())?;
    let cdofs = DofMap::build(domain)?;
    let fine_sys = assemble_with(&fine, problem, AssemblyRoute::Bezier)?;
    let fdofs = &fine_sys.dofs;
    let g = boundary_projection(domain, problem, &cdofs)?;
    let fbnd = fdofs.boundary_dofs(&fine);

    let mut fidx = vec![usize::MAX; fdofs.num_dofs()];
    let mut nf = 0;
    for d in 0..fdofs.num_dofs() {
        if !fbnd.contains(&d) {
            fidx[d] = nf;
            nf += 1;
        }
    }
    let mut cidx = vec![usize::MAX; cdofs.num_dofs()];
    let mut nc = 0;
    for d in 0..cdofs.num_dofs() {
        if !g.contains_key(&d) {
            cidx[d] = nf + nc;
            nc += 1;
        }
    }

    let mut rhs = vec![0.0; nf + nc];
    for d in 0..fdofs.num_dofs() {
        if fidx[d] != usize::MAX {
            rhs[fidx[d]] = fine_sys.rhs[d];
        }
    }
    let mut trips: Vec<(usize, usize, f64)> = fine_sys
        .matrix
        .triplets()
        .filter(|&(r, c, _)| fidx[r] != usize::MAX && fidx[c] != usize::MAX)
        .map(|(r, c, v)| (fidx[r], fidx[c], v))
        .collect();
    for (fr, cc, v) in coupling_triplets(domain, &fine, problem, &cdofs, fdofs)? {
        let r = fidx[fr];
        if r == usize::MAX {
            continue;
        }
        match g.get(&cc) {
            Some(gv) => rhs[r] -= v * gv,
            None => {
                trips.push((r, cidx[cc], v));
                trips.push((cidx[cc], r, v));
            }
        }
    }
    let matrix = SparseMatrix::from_triplets(nf + nc, trips)?;
    let x = solve_indefinite(&matrix, &rhs)
        .map_err(|e| Error::Solver(format!("two-mesh saddle system: {e}")))?;

    let pcoef: Vec<f64> = (0..fdofs.num_dofs())
        .map(|d| {
            if fidx[d] == usize::MAX {
                0.0
            } else {
                x[fidx[d]]
            }
        })
        .collect();
    let ucoef: Vec<f64> = (0..cdofs.num_dofs())
        .map(|d| g.get(&d).copied().unwrap_or_else(|| x[cidx[d]]))
        .collect();
    let error_function = DiscreteSolution {
        coeffs: pcoef,
        dofs: fdofs.clone(),
    };
    let coarse = DiscreteSolution {
        coeffs: ucoef,
        dofs: cdofs,
    };
    let indicators = gradient_indicators(domain, &fine, &error_function)?;
    Ok(TwoMeshEstimate {
        fine_domain: fine,
        error_function,
        coarse,
        indicators,
    })
}

/// `int_k |grad p|^2` for each coarse element `k`, integrated over the fine
/// elements it contains.
fn gradient_indicators(
    coarse: &MultipatchDomain,
    fine: &MultipatchDomain,
    p: &DiscreteSolution,
) -> Result<ErrorIndicators> {
    let mut elements = Vec::new();
    let mut values = Vec::new();
    for (pi, (cp, fp)) in coarse.patches.iter().zip(&fine.patches).enumerate() {
        let deg = fp.space.degrees();
        let rule = gauss_rule(deg.0 + 1, deg.1 + 1)?;
        let coeffs = p.patch_coefficients(pi);
        let parts: Vec<Result<(usize, f64)>> = fp
            .space
            .elements()
            .par_iter()
            .map(|fel| {
                let ((u0, u1), (v0, v1)) = fel.bounds;
                let (l, e) = cp.space.locate(0.5 * (u0 + u1), 0.5 * (v0 + v1))?;
                let k = cp.space.element_position(l, e).expect("active");
                let (hu, hv) = fel.size();
                let mut s = 0.0;
                for (pt, w) in rule.points.iter().zip(&rule.weights) {
                    let (xi, eta) = fel.to_parametric(pt[0], pt[1]);
                    let (_, j) = fp.geometry.eval_jacobian(xi, eta)?;
                    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
                    let g = element_field(fel, deg, &coeffs, pt[0], pt[1]).1;
                    let gx = (j[1][1] * g[0] - j[1][0] * g[1]) / det;
                    let gy = (-j[0][1] * g[0] + j[0][0] * g[1]) / det;
                    s += w * hu * hv * det.abs() * (gx * gx + gy * gy);
                }
                Ok((k, s))
            })
            .collect();
        let mut acc = vec![0.0; cp.space.elements().len()];
        for r in parts {
            let (k, s) = r?;
            acc[k] += s;
        }
        for (el, v) in cp.space.elements().iter().zip(acc) {
            elements.push(ElementKey::new(pi, el.level, el.index));
            values.push(v);
        }
    }
    Ok(ErrorIndicators::new(elements, values, 0))
}

/// Indicator values keyed by element.
pub fn indicator_map(ind: &ErrorIndicators) -> BTreeMap<ElementKey, f64> {
    ind.elements
        .iter()
        .copied()
        .zip(ind.values.iter().copied())
        .collect()
}
