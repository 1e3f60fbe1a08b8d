use rayon::prelude::*;

use super::ElementKey;
use crate::assembly::{DiscreteSolution, MultipatchDomain, Patch};
use crate::error::{Error, Result};
use crate::hierarchy::{tensor_bernstein, HierElement};
use crate::quadrature::{gauss_rule, GaussRule2D};

/// Extra Gauss points per direction beyond `p+1` for error integrals.
const EXTRA_POINTS: usize = 3;

pub(crate) fn error_rule(patch: &Patch) -> GaussRule2D {
    let (p, q) = patch.space.degrees();
    gauss_rule(p + 1 + EXTRA_POINTS, q + 1 + EXTRA_POINTS).expect("degree is at most 8")
}

/// Values and parametric gradients of the element's functions at local
/// coordinates `(s, t)`, in the order of `el.functions`.
pub(crate) fn element_basis(
    el: &HierElement,
    degrees: (usize, usize),
    s: f64,
    t: f64,
) -> (Vec<f64>, Vec<[f64; 2]>) {
    let (b, db) = tensor_bernstein(degrees.0, degrees.1, s, t);
    let c = &el.extraction.matrix;
    let (hu, hv) = el.size();
    let mut vals = vec![0.0; c.nrows()];
    let mut grads = vec![[0.0; 2]; c.nrows()];
    for r in 0..c.nrows() {
        for a in 0..c.ncols() {
            let w = c[(r, a)];
            vals[r] += w * b[a];
            grads[r][0] += w * db[a][0];
            grads[r][1] += w * db[a][1];
        }
        grads[r][0] /= hu;
        grads[r][1] /= hv;
    }
    (vals, grads)
}

/// Value and parametric gradient of `sum c_f N_f` on one element at local
/// coordinates `(s, t)`. `coeffs` is indexed by the patch's function ids.
pub(crate) fn element_field(
    el: &HierElement,
    degrees: (usize, usize),
    coeffs: &[f64],
    s: f64,
    t: f64,
) -> (f64, [f64; 2]) {
    let (vals, grads) = element_basis(el, degrees, s, t);
    let mut u = 0.0;
    let mut g = [0.0; 2];
    for ((&f, v), d) in el.functions.iter().zip(&vals).zip(&grads) {
        u += coeffs[f] * v;
        g[0] += coeffs[f] * d[0];
        g[1] += coeffs[f] * d[1];
    }
    (u, g)
}

/// `|det J|` and physical point at a parametric point.
fn jacobian(patch: &Patch, xi: f64, eta: f64) -> Result<([f64; 2], f64)> {
    let (x, j) = patch.geometry.eval_jacobian(xi, eta)?;
    Ok((x, (j[0][0] * j[1][1] - j[0][1] * j[1][0]).abs()))
}

/// Per-element squared L2 error `int_k |u - u_h|^2` against a function.
pub fn element_errors_exact(
    solution: &DiscreteSolution,
    domain: &MultipatchDomain,
    exact: &(dyn Fn([f64; 2]) -> f64 + Sync),
) -> Result<Vec<(ElementKey, f64)>> {
    let mut out = Vec::with_capacity(domain.num_active_elements());
    for (pi, patch) in domain.patches.iter().enumerate() {
        let coeffs = solution.patch_coefficients(pi);
        let rule = error_rule(patch);
        let deg = patch.space.degrees();
        let part: Vec<Result<(ElementKey, f64)>> = patch
            .space
            .elements()
            .par_iter()
            .map(|el| {
                let (hu, hv) = el.size();
                let mut e2 = 0.0;
                for (pt, w) in rule.points.iter().zip(&rule.weights) {
                    let (xi, eta) = el.to_parametric(pt[0], pt[1]);
                    let (x, det) = jacobian(patch, xi, eta)?;
                    let (uh, _) = element_field(el, deg, &coeffs, pt[0], pt[1]);
                    e2 += w * hu * hv * det * (exact(x) - uh).powi(2);
                }
                Ok((ElementKey::new(pi, el.level, el.index), e2))
            })
            .collect();
        for r in part {
            out.push(r?);
        }
    }
    Ok(out)
}

/// `(int |u - u_h|^2)^(1/2)` against a function.
pub fn l2_error(
    solution: &DiscreteSolution,
    domain: &MultipatchDomain,
    exact: &(dyn Fn([f64; 2]) -> f64 + Sync),
) -> Result<f64> {
    let parts = element_errors_exact(solution, domain, exact)?;
    Ok(parts.iter().map(|e| e.1).sum::<f64>().sqrt())
}

/// A solution on a space that refines the spaces being measured.
#[derive(Clone, Debug)]
pub struct Reference {
    pub domain: MultipatchDomain,
    pub solution: DiscreteSolution,
}

impl Reference {
    /// Per-element squared errors of `solution` on `domain`, integrated over
    /// the reference elements. Fails if the reference does not refine
    /// `domain`.
    pub fn element_errors(
        &self,
        solution: &DiscreteSolution,
        domain: &MultipatchDomain,
    ) -> Result<Vec<(ElementKey, f64)>> {
        if domain.num_patches() != self.domain.num_patches() {
            return Err(Error::argument(format!(
                "reference has {} patches, solution has {}",
                self.domain.num_patches(),
                domain.num_patches()
            )));
        }
        let mut out = Vec::with_capacity(domain.num_active_elements());
        for (pi, (patch, rpatch)) in domain.patches.iter().zip(&self.domain.patches).enumerate() {
            let (a, b) = (patch.space.level(0).space(), rpatch.space.level(0).space());
            if a.u.knot_vector().knots() != b.u.knot_vector().knots()
                || a.v.knot_vector().knots() != b.v.knot_vector().knots()
            {
                return Err(Error::argument(format!(
                    "patch {pi}: reference uses a different base mesh"
                )));
            }
            let coeffs = solution.patch_coefficients(pi);
            let rcoeffs = self.solution.patch_coefficients(pi);
            let rule = error_rule(rpatch);
            let deg = patch.space.degrees();
            let rdeg = rpatch.space.degrees();
            let space = &patch.space;
            let part: Vec<Result<(usize, f64)>> = rpatch
                .space
                .elements()
                .par_iter()
                .map(|rel| {
                    let ((u0, u1), (v0, v1)) = rel.bounds;
                    let (l, e) = space.locate(0.5 * (u0 + u1), 0.5 * (v0 + v1))?;
                    if l > rel.level {
                        return Err(Error::argument(format!(
                            "patch {pi}: element ({l}, {e}) is finer than the reference"
                        )));
                    }
                    let k = space
                        .element_position(l, e)
                        .expect("active element is cached");
                    let el = &space.elements()[k];
                    let (hu, hv) = rel.size();
                    let mut e2 = 0.0;
                    for (pt, w) in rule.points.iter().zip(&rule.weights) {
                        let (xi, eta) = rel.to_parametric(pt[0], pt[1]);
                        let (_, det) = jacobian(rpatch, xi, eta)?;
                        let (ur, _) = element_field(rel, rdeg, &rcoeffs, pt[0], pt[1]);
                        let (s, t) = el.to_local(xi, eta);
                        let (uh, _) = element_field(el, deg, &coeffs, s, t);
                        e2 += w * hu * hv * det * (ur - uh).powi(2);
                    }
                    Ok((k, e2))
                })
                .collect();
            let mut acc = vec![0.0; space.elements().len()];
            for r in part {
                let (k, e2) = r?;
                acc[k] += e2;
            }
            out.extend(
                space
                    .elements()
                    .iter()
                    .zip(acc)
                    .map(|(el, e2)| (ElementKey::new(pi, el.level, el.index), e2)),
            );
        }
        Ok(out)
    }

    pub fn l2_error(&self, solution: &DiscreteSolution, domain: &MultipatchDomain) -> Result<f64> {
        Ok(self
            .element_errors(solution, domain)?
            .iter()
            .map(|e| e.1)
            .sum::<f64>()
            .sqrt())
    }
}
