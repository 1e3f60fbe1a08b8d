use std::collections::BTreeMap;

use rayon::prelude::*;

use super::element::{
    contribution_bezier, element_stiffness_direct, ElementContribution, MapSample,
};
use super::sparse::{solve_spd, SparseMatrix};
use super::{side_cell_position, DofMap, MultipatchDomain, Side};
use crate::error::{Error, Result};
use crate::hierarchy::tensor_bernstein;
use crate::physics::PhysicsProblem;
use crate::quadrature::gauss_1d;

/// How element matrices are formed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AssemblyRoute {
    /// Bernstein integrals transformed by `C^e`.
    Bezier,
    /// Quadrature of directly evaluated hierarchical functions.
    Direct,
}

/// Assembled system before boundary conditions are applied.
#[derive(Clone, Debug)]
pub struct LinearSystem {
    pub matrix: SparseMatrix,
    pub rhs: Vec<f64>,
    /// Prescribed values of the boundary dofs.
    pub dirichlet: BTreeMap<usize, f64>,
    pub dofs: DofMap,
}

impl LinearSystem {
    /// Replace the prescribed boundary values by an explicit list. A dof
    /// listed twice with values differing by more than `1e-10` is an error.
    pub fn with_dirichlet_values(&self, values: &[(usize, f64)]) -> Result<LinearSystem> {
        let mut map: BTreeMap<usize, f64> = BTreeMap::new();
        for &(d, v) in values {
            if d >= self.rhs.len() {
                return Err(Error::config(format!(
                    "Dirichlet value for missing dof {d}"
                )));
            }
            if let Some(&old) = map.get(&d) {
                if (old - v).abs() > 1e-10 {
                    return Err(Error::config(format!(
                        "conflicting Dirichlet values {old} and {v} at dof {d}"
                    )));
                }
            }
            map.insert(d, v);
        }
        Ok(LinearSystem {
            matrix: self.matrix.clone(),
            rhs: self.rhs.clone(),
            dirichlet: map,
            dofs: self.dofs.clone(),
        })
    }
}

/// System on the free dofs after symmetric elimination of the prescribed
/// ones.
#[derive(Clone, Debug)]
pub struct ConstrainedSystem {
    pub matrix: SparseMatrix,
    pub rhs: Vec<f64>,
    /// Global dof of each free unknown.
    pub free: Vec<usize>,
    pub fixed: BTreeMap<usize, f64>,
    pub num_dofs: usize,
}

pub fn assemble(domain: &MultipatchDomain, problem: &dyn PhysicsProblem) -> Result<LinearSystem> {
    assemble_with(domain, problem, AssemblyRoute::Bezier)
}

pub fn assemble_with(
    domain: &MultipatchDomain,
    problem: &dyn PhysicsProblem,
    route: AssemblyRoute,
) -> Result<LinearSystem> {
    let dofs = DofMap::build(domain)?;
    let (matrix, rhs) = assemble_operator(domain, problem, route, &dofs)?;
    let dirichlet = boundary_projection(domain, problem, &dofs)?;
    Ok(LinearSystem {
        matrix,
        rhs,
        dirichlet,
        dofs,
    })
}

/// Element loop over all patches and scatter into the global matrix.
pub(crate) fn assemble_operator(
    domain: &MultipatchDomain,
    problem: &dyn PhysicsProblem,
    route: AssemblyRoute,
    dofs: &DofMap,
) -> Result<(SparseMatrix, Vec<f64>)> {
    let work: Vec<(usize, usize)> = domain
        .patches
        .iter()
        .enumerate()
        .flat_map(|(p, patch)| (0..patch.space.elements().len()).map(move |k| (p, k)))
        .collect();
    let contributions: Vec<Result<ElementContribution>> = work
        .par_iter()
        .map(|&(p, k)| {
            let patch = &domain.patches[p];
            let el = &patch.space.elements()[k];
            let mat = domain.material(p);
            match route {
                AssemblyRoute::Bezier => contribution_bezier(patch, p, el, &mat, problem),
                AssemblyRoute::Direct => element_stiffness_direct(patch, p, el, &mat, problem),
            }
        })
        .collect();
    let n = dofs.num_dofs();
    let mut rhs = vec![0.0; n];
    let mut trips = Vec::new();
    for (&(p, _), c) in work.iter().zip(contributions) {
        let c = c?;
        let map = dofs.patch_dofs(p);
        let g: Vec<usize> = c.functions.iter().map(|&f| map[f]).collect();
        for (a, &ga) in g.iter().enumerate() {
            rhs[ga] += c.load[a];
            for (b, &gb) in g.iter().enumerate() {
                trips.push((ga, gb, c.stiffness[(a, b)]));
            }
        }
    }
    Ok((SparseMatrix::from_triplets(n, trips)?, rhs))
}

/// Boundary coefficients from the joint L2 projection of the Dirichlet
/// data onto the trace space of all unglued sides.
pub fn boundary_projection(
    domain: &MultipatchDomain,
    problem: &dyn PhysicsProblem,
    dofs: &DofMap,
) -> Result<BTreeMap<usize, f64>> {
    let bdofs: Vec<usize> = dofs.boundary_dofs(domain).into_iter().collect();
    let local = |d: usize| bdofs.binary_search(&d).ok();
    let mut trips = Vec::new();
    let mut rhs = vec![0.0; bdofs.len()];
    for (p, side) in domain.boundary_sides() {
        let patch = &domain.patches[p];
        let (pu, pv) = patch.space.degrees();
        let (tx, tw) = gauss_1d(pu.max(pv) + 3)?;
        let map = dofs.patch_dofs(p);
        for el in patch.space.elements() {
            if side_cell_position(&patch.space, el.level, el.index, side).is_none() {
                continue;
            }
            let rows: Vec<Option<usize>> = el.functions.iter().map(|&f| local(map[f])).collect();
            let (hu, hv) = el.size();
            for (&t, &w) in tx.iter().zip(&tw) {
                let (s, r) = match side {
                    Side::West => (0.0, t),
                    Side::East => (1.0, t),
                    Side::South => (t, 0.0),
                    Side::North => (t, 1.0),
                };
                let (xi, eta) = el.to_parametric(s, r);
                let (x, jac) = patch.geometry.eval_jacobian(xi, eta)?;
                let (col, h) = if side.is_vertical() { (1, hv) } else { (0, hu) };
                let ds = w * h * (jac[0][col].powi(2) + jac[1][col].powi(2)).sqrt();
                let (b, _) = tensor_bernstein(pu, pv, s, r);
                let vals: Vec<f64> = (0..el.functions.len())
                    .map(|k| {
                        let c = el.extraction.matrix.row(k);
                        c.iter().zip(&b).map(|(c, b)| c * b).sum()
                    })
                    .collect();
                let g = problem.dirichlet(x);
                for (a, ra) in rows.iter().enumerate() {
                    let Some(ra) = *ra else { continue };
                    rhs[ra] += ds * g * vals[a];
                    for (c, rc) in rows.iter().enumerate() {
                        if let Some(rc) = *rc {
                            trips.push((ra, rc, ds * vals[a] * vals[c]));
                        }
                    }
                }
            }
        }
    }
    if rhs.iter().all(|&v| v == 0.0) {
        return Ok(bdofs.into_iter().map(|d| (d, 0.0)).collect());
    }
    let m = SparseMatrix::from_triplets(bdofs.len(), trips)?;
    let c = solve_spd(&m, &rhs)?;
    Ok(bdofs.into_iter().zip(c).collect())
}

/// Eliminate prescribed dofs symmetrically.
pub fn apply_dirichlet(sys: &LinearSystem) -> ConstrainedSystem {
    let n = sys.rhs.len();
    let mut index = vec![usize::MAX; n];
    let mut free = Vec::with_capacity(n);
    for d in 0..n {
        if !sys.dirichlet.contains_key(&d) {
            index[d] = free.len();
            free.push(d);
        }
    }
    let mut rhs: Vec<f64> = free.iter().map(|&d| sys.rhs[d]).collect();
    let mut trips = Vec::with_capacity(sys.matrix.nnz());
    for (r, c, v) in sys.matrix.triplets() {
        let ir = index[r];
        if ir == usize::MAX {
            continue;
        }
        match sys.dirichlet.get(&c) {
            Some(g) => rhs[ir] -= v * g,
            None => trips.push((ir, index[c], v)),
        }
    }
    ConstrainedSystem {
        matrix: SparseMatrix::from_triplets(free.len(), trips).expect("indices are in range"),
        rhs,
        free,
        fixed: sys.dirichlet.clone(),
        num_dofs: n,
    }
}

/// Solve a constrained system and return the full coefficient vector.
pub fn solve(sys: &ConstrainedSystem) -> Result<Vec<f64>> {
    let x = solve_spd(&sys.matrix, &sys.rhs)?;
    let mut out = vec![0.0; sys.num_dofs];
    for (&d, v) in sys.free.iter().zip(x) {
        out[d] = v;
    }
    for (&d, &v) in &sys.fixed {
        out[d] = v;
    }
    Ok(out)
}

/// Coefficients of a discrete field together with their numbering.
#[derive(Clone, Debug)]
pub struct DiscreteSolution {
    pub coeffs: Vec<f64>,
    pub dofs: DofMap,
}

/// Assemble, constrain and solve.
pub fn solve_problem(
    domain: &MultipatchDomain,
    problem: &dyn PhysicsProblem,
) -> Result<DiscreteSolution> {
    let sys = assemble(domain, problem)?;
    let coeffs = solve(&apply_dirichlet(&sys))?;
    Ok(DiscreteSolution {
        coeffs,
        dofs: sys.dofs,
    })
}

impl DiscreteSolution {
    pub fn zero(domain: &MultipatchDomain) -> Result<Self> {
        let dofs = DofMap::build(domain)?;
        Ok(Self {
            coeffs: vec![0.0; dofs.num_dofs()],
            dofs,
        })
    }

    /// Coefficients of the hierarchical functions of one patch.
    pub fn patch_coefficients(&self, patch: usize) -> Vec<f64> {
        self.dofs
            .patch_dofs(patch)
            .iter()
            .map(|&d| self.coeffs[d])
            .collect()
    }

    /// Value, physical gradient and physical point at a parametric point.
    pub fn eval(
        &self,
        domain: &MultipatchDomain,
        patch: usize,
        xi: f64,
        eta: f64,
    ) -> Result<(f64, [f64; 2], [f64; 2])> {
        let p = &domain.patches[patch];
        let basis = p.space.eval_hier_basis(xi, eta)?;
        let map = self.dofs.patch_dofs(patch);
        let mut u = 0.0;
        let mut g = [0.0; 2];
        for ((&f, &v), d) in basis
            .functions
            .iter()
            .zip(&basis.values)
            .zip(&basis.gradients)
        {
            let c = self.coeffs[map[f]];
            u += c * v;
            g[0] += c * d[0];
            g[1] += c * d[1];
        }
        let m = MapSample::at(p, patch, None, xi, eta)?;
        Ok((u, m.push(g), m.x))
    }

    /// `c^T K c` for a matrix over the same numbering.
    pub fn energy(&self, matrix: &SparseMatrix) -> f64 {
        let kc = matrix.matvec(&self.coeffs);
        kc.iter().zip(&self.coeffs).map(|(a, b)| a * b).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::tests::two_patches;
    use crate::physics::{FunctionProblem, Laplace};

    fn linear() -> FunctionProblem {
        FunctionProblem::from_exact(
            "linear",
            |x| 1.0 + 2.0 * x[0] - 3.0 * x[1],
            |_| [2.0, -3.0],
            |_| 0.0,
        )
    }

    #[test]
    fn zero_data_gives_zero_solution() {
        let d = MultipatchDomain::unit_square(2, 3, 1).unwrap();
        let s = solve_problem(&d, &Laplace).unwrap();
        assert!(s.coeffs.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn linear_patch_test_single_and_two_patches() {
        for d in [
            MultipatchDomain::unit_square(2, 3, 2).unwrap(),
            two_patches(2, 3, 2),
        ] {
            let d = d
                .refine(&vec![
                    std::collections::BTreeSet::from([(0, 0)]);
                    d.num_patches()
                ])
                .unwrap();
            let s = solve_problem(&d, &linear()).unwrap();
            for p in 0..d.num_patches() {
                for k in 0..7 {
                    let (xi, eta) = (0.13 * k as f64 + 0.05, 0.9 - 0.11 * k as f64);
                    let (u, g, x) = s.eval(&d, p, xi, eta).unwrap();
                    assert!((u - (1.0 + 2.0 * x[0] - 3.0 * x[1])).abs() < 1e-11, "u={u}");
                    assert!((g[0] - 2.0).abs() < 1e-9 && (g[1] + 3.0).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn bezier_and_direct_routes_agree() {
        let d = MultipatchDomain::unit_square(2, 4, 3).unwrap();
        let d = d
            .refine(&vec![std::collections::BTreeSet::from([
                (0, 0),
                (0, 1),
                (0, 4),
            ])])
            .unwrap();
        let d = d
            .refine(&vec![std::collections::BTreeSet::from([(1, 0)])])
            .unwrap();
        let a = assemble_with(&d, &linear(), AssemblyRoute::Bezier).unwrap();
        let b = assemble_with(&d, &linear(), AssemblyRoute::Direct).unwrap();
        let rel = a.matrix.frobenius_distance(&b.matrix) / a.matrix.frobenius_norm();
        assert!(rel < 1e-12, "{rel}");
        assert!(a.matrix.asymmetry() < 1e-14);
    }

    #[test]
    fn conflicting_values_rejected() {
        let d = MultipatchDomain::unit_square(1, 2, 1).unwrap();
        let sys = assemble(&d, &Laplace).unwrap();
        assert!(sys
            .with_dirichlet_values(&[(0, 1.0), (0, 1.0 + 1e-12)])
            .is_ok());
        assert!(sys.with_dirichlet_values(&[(0, 1.0), (0, 1.1)]).is_err());
    }

    #[test]
    fn unit_boundary_data_gives_unit_solution() {
        let one = FunctionProblem::from_exact("one", |_| 1.0, |_| [0.0, 0.0], |_| 0.0);
        let d = two_patches(2, 3, 1);
        let s = solve_problem(&d, &one).unwrap();
        assert!(s.coeffs.iter().all(|c| (c - 1.0).abs() < 1e-12));
    }
}
