use nalgebra::{DMatrix, DVector};

use super::{MaterialParams, Patch};
use crate::error::{Error, Result};
use crate::hierarchy::HierElement;
use crate::physics::PhysicsProblem;
use crate::quadrature::{gauss_rule, GaussRule2D};

/// Element matrix and load vector over a list of global function ids of one
/// patch.
#[derive(Clone, Debug)]
pub struct ElementContribution {
    pub functions: Vec<usize>,
    pub stiffness: DMatrix<f64>,
    pub load: DVector<f64>,
}

/// Gauss rule with `(p+1) x (q+1)` points.
pub(crate) fn element_rule(patch: &Patch) -> GaussRule2D {
    let (p, q) = patch.space.degrees();
    gauss_rule(p + 1, q + 1).expect("degree is at most 8")
}

/// Physical point, Jacobian determinant and the map from parametric to
/// physical gradients at a parametric point.
pub(crate) struct MapSample {
    pub x: [f64; 2],
    pub det: f64,
    inv_t: [[f64; 2]; 2],
}

impl MapSample {
    pub fn at(
        patch: &Patch,
        patch_id: usize,
        cell: Option<(usize, usize)>,
        xi: f64,
        eta: f64,
    ) -> Result<Self> {
        let (x, j) = patch.geometry.eval_jacobian(xi, eta)?;
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if !(det > 0.0) {
            return Err(Error::Geometry {
                patch: patch_id,
                element: cell,
                message: format!("Jacobian determinant {det:e} at parameter ({xi}, {eta})"),
            });
        }
        let inv_t = [
            [j[1][1] / det, -j[1][0] / det],
            [-j[0][1] / det, j[0][0] / det],
        ];
        Ok(Self { x, det, inv_t })
    }

    /// `J^{-T} g`.
    pub fn push(&self, g: [f64; 2]) -> [f64; 2] {
        [
            self.inv_t[0][0] * g[0] + self.inv_t[0][1] * g[1],
            self.inv_t[1][0] * g[0] + self.inv_t[1][1] * g[1],
        ]
    }
}

/// Stiffness and load of the tensor Bernstein basis on one element:
/// `K[a][b] = int nu grad B_a . grad B_b`, `F[a] = int f B_a + m . grad B_a`.
pub fn element_stiffness_bezier(
    patch: &Patch,
    patch_id: usize,
    el: &HierElement,
    material: &MaterialParams,
    problem: &dyn PhysicsProblem,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let rule = element_rule(patch);
    let (p, q) = patch.space.degrees();
    let n = (p + 1) * (q + 1);
    let (hu, hv) = el.size();
    let mut k = DMatrix::zeros(n, n);
    let mut f = DVector::zeros(n);
    let mut grads = vec![[0.0; 2]; n];
    for (pt, w) in rule.points.iter().zip(&rule.weights) {
        let (xi, eta) = el.to_parametric(pt[0], pt[1]);
        let map = MapSample::at(patch, patch_id, Some((el.level, el.index)), xi, eta)?;
        let (b, db) = crate::hierarchy::tensor_bernstein(p, q, pt[0], pt[1]);
        for (g, d) in grads.iter_mut().zip(&db) {
            *g = map.push([d[0] / hu, d[1] / hv]);
        }
        let dx = w * map.det * hu * hv;
        let nu = problem.diffusion(material, map.x);
        let src = problem.source(material, map.x);
        let m = problem.flux_source(material, map.x);
        for a in 0..n {
            let ga = grads[a];
            f[a] += dx * (src * b[a] + m[0] * ga[0] + m[1] * ga[1]);
            for c in a..n {
                let v = dx * nu * (ga[0] * grads[c][0] + ga[1] * grads[c][1]);
                k[(a, c)] += v;
            }
        }
    }
    for a in 0..n {
        for c in 0..a {
            k[(a, c)] = k[(c, a)];
        }
    }
    Ok((k, f))
}

/// `C K C^T`.
pub fn transform_element(k_bezier: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if k_bezier.nrows() != k_bezier.ncols() || c.ncols() != k_bezier.nrows() {
        return Err(Error::argument(format!(
            "cannot transform a {}x{} element matrix with a {}x{} operator",
            k_bezier.nrows(),
            k_bezier.ncols(),
            c.nrows(),
            c.ncols()
        )));
    }
    let mut k = c * k_bezier * c.transpose();
    // exact symmetry regardless of rounding in the products
    let n = k.nrows();
    for a in 0..n {
        for b in 0..a {
            let s = 0.5 * (k[(a, b)] + k[(b, a)]);
            k[(a, b)] = s;
            k[(b, a)] = s;
        }
    }
    Ok(k)
}

/// Element contribution through the Bezier route: Bernstein integrals
/// transformed by `C^e`.
pub(crate) fn contribution_bezier(
    patch: &Patch,
    patch_id: usize,
    el: &HierElement,
    material: &MaterialParams,
    problem: &dyn PhysicsProblem,
) -> Result<ElementContribution> {
    let (kb, fb) = element_stiffness_bezier(patch, patch_id, el, material, problem)?;
    let c = &el.extraction.matrix;
    Ok(ElementContribution {
        functions: el.functions.clone(),
        stiffness: transform_element(&kb, c)?,
        load: c * fb,
    })
}

/// Element contribution by quadrature of the hierarchical functions
/// evaluated directly (multi-level operator on Cox-de Boor values), without
/// Bezier extraction.
pub fn element_stiffness_direct(
    patch: &Patch,
    patch_id: usize,
    el: &HierElement,
    material: &MaterialParams,
    problem: &dyn PhysicsProblem,
) -> Result<ElementContribution> {
    let rule = element_rule(patch);
    let mut samples = Vec::with_capacity(rule.len());
    let mut ids: Vec<usize> = Vec::new();
    for pt in &rule.points {
        let (xi, eta) = el.to_parametric(pt[0], pt[1]);
        let s = patch.space.eval_direct_grad(xi, eta)?;
        ids.extend(&s.0);
        samples.push(s);
    }
    ids.sort_unstable();
    ids.dedup();
    let n = ids.len();
    let (hu, hv) = el.size();
    let mut k = DMatrix::zeros(n, n);
    let mut f = DVector::zeros(n);
    for ((pt, w), (sid, val, grad)) in rule.points.iter().zip(&rule.weights).zip(&samples) {
        let (xi, eta) = el.to_parametric(pt[0], pt[1]);
        let map = MapSample::at(patch, patch_id, Some((el.level, el.index)), xi, eta)?;
        let dx = w * map.det * hu * hv;
        let nu = problem.diffusion(material, map.x);
        let src = problem.source(material, map.x);
        let m = problem.flux_source(material, map.x);
        let pos: Vec<usize> = sid
            .iter()
            .map(|id| ids.binary_search(id).unwrap())
            .collect();
        let g: Vec<[f64; 2]> = grad.iter().map(|&d| map.push(d)).collect();
        for a in 0..sid.len() {
            f[pos[a]] += dx * (src * val[a] + m[0] * g[a][0] + m[1] * g[a][1]);
            for c in 0..sid.len() {
                k[(pos[a], pos[c])] += dx * nu * (g[a][0] * g[c][0] + g[a][1] * g[c][1]);
            }
        }
    }
    Ok(ElementContribution {
        functions: ids,
        stiffness: k,
        load: f,
    })
}
