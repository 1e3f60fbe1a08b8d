use std::ops::Range;

use nalgebra::DMatrix;

use super::knots::{insert_knots_raw, KnotVector};
use crate::error::{Error, Result};

/// Dense linear map between two sets of basis functions together with the
/// global indices of its rows and columns.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtractionOperator {
    pub matrix: DMatrix<f64>,
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
}

impl ExtractionOperator {
    pub fn new(matrix: DMatrix<f64>, rows: Vec<usize>, cols: Vec<usize>) -> Self {
        debug_assert_eq!(matrix.nrows(), rows.len());
        debug_assert_eq!(matrix.ncols(), cols.len());
        Self { matrix, rows, cols }
    }

    pub fn column_sums(&self) -> Vec<f64> {
        self.matrix.column_iter().map(|c| c.sum()).collect()
    }
}

/// Univariate spline space: a clamped knot vector plus element bookkeeping.
#[derive(Clone, Debug)]
pub struct SplineSpace1D {
    kv: KnotVector,
    breakpoints: Vec<f64>,
    spans: Vec<usize>,
    // number of non-empty spans with knot index < k
    elements_before: Vec<usize>,
    greville: Vec<f64>,
    extraction: Vec<DMatrix<f64>>,
}

impl SplineSpace1D {
    pub fn new(kv: KnotVector) -> Self {
        let knots = kv.knots();
        let p = kv.degree();
        let n = kv.num_basis();
        let spans: Vec<usize> = (p..n).filter(|&i| knots[i] < knots[i + 1]).collect();
        let mut elements_before = Vec::with_capacity(knots.len() + 1);
        let mut count = 0;
        for k in 0..=knots.len() {
            elements_before.push(count);
            if k + 1 < knots.len() && knots[k] < knots[k + 1] {
                count += 1;
            }
        }
        let greville = (0..n)
            .map(|i| {
                if p == 0 {
                    0.5 * (knots[i] + knots[i + 1])
                } else {
                    knots[i + 1..=i + p].iter().sum::<f64>() / p as f64
                }
            })
            .collect();
        let extraction = spans.iter().map(|&s| local_extraction(&kv, s)).collect();
        Self {
            breakpoints: kv.breakpoints(),
            kv,
            spans,
            elements_before,
            greville,
            extraction,
        }
    }

    pub fn knot_vector(&self) -> &KnotVector {
        &self.kv
    }

    pub fn degree(&self) -> usize {
        self.kv.degree()
    }

    pub fn num_basis(&self) -> usize {
        self.kv.num_basis()
    }

    pub fn num_elements(&self) -> usize {
        self.spans.len()
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn greville(&self) -> &[f64] {
        &self.greville
    }

    pub fn element_bounds(&self, e: usize) -> (f64, f64) {
        (self.breakpoints[e], self.breakpoints[e + 1])
    }

    pub fn element_span(&self, e: usize) -> usize {
        self.spans[e]
    }

    /// Indices of the `p+1` functions supported on element `e`.
    pub fn element_functions(&self, e: usize) -> Range<usize> {
        let s = self.spans[e];
        s - self.degree()..s + 1
    }

    /// Elements covered by the support of function `i`.
    pub fn support_elements(&self, i: usize) -> Range<usize> {
        let p = self.degree();
        self.elements_before[i]..self.elements_before[i + p + 1]
    }

    /// Element containing `xi` (half-open, last element closed).
    pub fn locate(&self, xi: f64) -> Result<usize> {
        let span = self.kv.find_span(xi)?;
        Ok(self.elements_before[span])
    }

    /// Bezier extraction matrix of element `e`: rows are the supported
    /// B-splines (in order), columns the local Bernstein polynomials.
    pub fn element_extraction(&self, e: usize) -> &DMatrix<f64> {
        &self.extraction[e]
    }

    pub fn bezier_extraction(&self) -> Vec<ExtractionOperator> {
        (0..self.num_elements())
            .map(|e| {
                ExtractionOperator::new(
                    self.extraction[e].clone(),
                    self.element_functions(e).collect(),
                    (0..=self.degree()).collect(),
                )
            })
            .collect()
    }

    /// Space after splitting every element at its midpoint.
    pub fn refine_dyadic(&self) -> SplineSpace1D {
        let (fine, _) = self
            .kv
            .insert_knots(&self.kv.dyadic_midpoints())
            .expect("midpoints lie inside non-empty spans");
        SplineSpace1D::new(fine)
    }

    /// Two-scale relation for one dyadic refinement step. The matrix is
    /// fine x coarse: `N_i = sum_j S[j][i] N^_j`.
    pub fn subdivision_matrix(&self) -> ExtractionOperator {
        let (_, s) = self
            .kv
            .insert_knots(&self.kv.dyadic_midpoints())
            .expect("midpoints lie inside non-empty spans");
        let rows = (0..s.nrows()).collect();
        let cols = (0..s.ncols()).collect();
        ExtractionOperator::new(s, rows, cols)
    }
}

/// Extraction of one element by raising both of its end knots to
/// multiplicity `p` on the local knot window.
fn local_extraction(kv: &KnotVector, span: usize) -> DMatrix<f64> {
    let p = kv.degree();
    let knots = kv.knots();
    let window = &knots[span - p..=span + p + 1];
    let (a, b) = (knots[span], knots[span + 1]);
    let mut inserts = Vec::new();
    for x in [a, b] {
        let m = kv.multiplicity(x);
        if m < p {
            inserts.extend(std::iter::repeat(x).take(p - m));
        }
    }
    let (refined, t) = insert_knots_raw(window, p, &inserts);
    let fine_span = refined.partition_point(|&k| k <= a) - 1;
    let first = fine_span - p;
    DMatrix::from_fn(p + 1, p + 1, |i, k| t[(first + k, i)])
}

/// Tensor product of two univariate spaces. Functions and elements are
/// numbered with the `u` index running fastest.
#[derive(Clone, Debug)]
pub struct TensorSpace2D {
    pub u: SplineSpace1D,
    pub v: SplineSpace1D,
}

impl TensorSpace2D {
    pub fn new(u: SplineSpace1D, v: SplineSpace1D) -> Self {
        Self { u, v }
    }

    pub fn from_knots(u: KnotVector, v: KnotVector) -> Self {
        Self::new(SplineSpace1D::new(u), SplineSpace1D::new(v))
    }

    pub fn degrees(&self) -> (usize, usize) {
        (self.u.degree(), self.v.degree())
    }

    pub fn num_basis(&self) -> usize {
        self.u.num_basis() * self.v.num_basis()
    }

    pub fn basis_dims(&self) -> (usize, usize) {
        (self.u.num_basis(), self.v.num_basis())
    }

    pub fn element_dims(&self) -> (usize, usize) {
        (self.u.num_elements(), self.v.num_elements())
    }

    pub fn num_elements(&self) -> usize {
        self.u.num_elements() * self.v.num_elements()
    }

    pub fn function_index(&self, i: usize, j: usize) -> usize {
        i + self.u.num_basis() * j
    }

    pub fn function_pair(&self, f: usize) -> (usize, usize) {
        let n = self.u.num_basis();
        (f % n, f / n)
    }

    pub fn element_index(&self, eu: usize, ev: usize) -> usize {
        eu + self.u.num_elements() * ev
    }

    pub fn element_pair(&self, e: usize) -> (usize, usize) {
        let n = self.u.num_elements();
        (e % n, e / n)
    }

    /// Flat indices of the `(p+1)(q+1)` functions supported on an element,
    /// in local Bernstein order (`u` fastest).
    pub fn element_functions(&self, e: usize) -> Vec<usize> {
        let (eu, ev) = self.element_pair(e);
        let ru = self.u.element_functions(eu);
        self.v
            .element_functions(ev)
            .flat_map(|j| ru.clone().map(move |i| (i, j)))
            .map(|(i, j)| self.function_index(i, j))
            .collect()
    }

    pub fn refine_dyadic(&self) -> TensorSpace2D {
        TensorSpace2D::new(self.u.refine_dyadic(), self.v.refine_dyadic())
    }

    /// Nonzero tensor functions at a point: flat indices and values.
    pub fn eval_basis(&self, xi: f64, eta: f64) -> Result<(Vec<usize>, Vec<f64>)> {
        let (su, nu) = self.u.knot_vector().eval_basis(xi)?;
        let (sv, nv) = self.v.knot_vector().eval_basis(eta)?;
        let (p, q) = self.degrees();
        let mut idx = Vec::with_capacity((p + 1) * (q + 1));
        let mut val = Vec::with_capacity((p + 1) * (q + 1));
        for (b, vb) in nv.iter().enumerate() {
            for (a, va) in nu.iter().enumerate() {
                idx.push(self.function_index(su - p + a, sv - q + b));
                val.push(va * vb);
            }
        }
        Ok((idx, val))
    }

    /// Like [`eval_basis`](Self::eval_basis) with parametric gradients.
    pub fn eval_basis_grad(
        &self,
        xi: f64,
        eta: f64,
    ) -> Result<(Vec<usize>, Vec<f64>, Vec<[f64; 2]>)> {
        let (p, q) = self.degrees();
        let (su, du) = self.u.knot_vector().eval_basis_derivs(xi, p.min(1))?;
        let (sv, dv) = self.v.knot_vector().eval_basis_derivs(eta, q.min(1))?;
        let zero_u = vec![0.0; p + 1];
        let zero_v = vec![0.0; q + 1];
        let du1 = du.get(1).unwrap_or(&zero_u);
        let dv1 = dv.get(1).unwrap_or(&zero_v);
        let mut idx = Vec::with_capacity((p + 1) * (q + 1));
        let mut val = Vec::with_capacity((p + 1) * (q + 1));
        let mut grad = Vec::with_capacity((p + 1) * (q + 1));
        for b in 0..=q {
            for a in 0..=p {
                idx.push(self.function_index(su - p + a, sv - q + b));
                val.push(du[0][a] * dv[0][b]);
                grad.push([du1[a] * dv[0][b], du[0][a] * dv1[b]]);
            }
        }
        Ok((idx, val, grad))
    }
}

/// Control points of a tensor product map, `u` index fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlNet {
    pub points: Vec<[f64; 2]>,
}

impl ControlNet {
    pub fn new(points: Vec<[f64; 2]>) -> Self {
        Self { points }
    }
}

/// `C(xi) = sum_i N_i(xi) P_i`.
pub fn eval_curve<const D: usize>(
    kv: &KnotVector,
    points: &[[f64; D]],
    xi: f64,
) -> Result<[f64; D]> {
    if points.len() != kv.num_basis() {
        return Err(Error::argument(format!(
            "control point count {} does not match basis size {}",
            points.len(),
            kv.num_basis()
        )));
    }
    let (span, n) = kv.eval_basis(xi)?;
    let p = kv.degree();
    let mut out = [0.0; D];
    for (a, na) in n.iter().enumerate() {
        for (o, c) in out.iter_mut().zip(&points[span - p + a]) {
            *o += na * c;
        }
    }
    Ok(out)
}

/// Point on a tensor product surface.
pub fn eval_surface(ts: &TensorSpace2D, net: &ControlNet, xi: f64, eta: f64) -> Result<[f64; 2]> {
    Ok(eval_surface_jacobian(ts, net, xi, eta)?.0)
}

/// Point and Jacobian `J[r][c] = d x_r / d xi_c` of a surface map.
pub fn eval_surface_jacobian(
    ts: &TensorSpace2D,
    net: &ControlNet,
    xi: f64,
    eta: f64,
) -> Result<([f64; 2], [[f64; 2]; 2])> {
    if net.points.len() != ts.num_basis() {
        return Err(Error::argument(format!(
            "control net has {} points, space has {} functions",
            net.points.len(),
            ts.num_basis()
        )));
    }
    let (idx, val, grad) = ts.eval_basis_grad(xi, eta)?;
    let mut x = [0.0; 2];
    let mut jac = [[0.0; 2]; 2];
    for ((&f, &n), g) in idx.iter().zip(&val).zip(&grad) {
        let pt = net.points[f];
        for r in 0..2 {
            x[r] += n * pt[r];
            jac[r][0] += g[0] * pt[r];
            jac[r][1] += g[1] * pt[r];
        }
    }
    Ok((x, jac))
}

/// Geometry map of one patch.
#[derive(Clone, Debug)]
pub struct Geometry {
    pub space: TensorSpace2D,
    pub net: ControlNet,
}

impl Geometry {
    pub fn new(space: TensorSpace2D, net: ControlNet) -> Result<Self> {
        if net.points.len() != space.num_basis() {
            return Err(Error::argument(format!(
                "control net has {} points, space has {} functions",
                net.points.len(),
                space.num_basis()
            )));
        }
        Ok(Self { space, net })
    }

    /// Axis-aligned rectangle `[x0,x1] x [y0,y1]` represented exactly on the
    /// given space (control points at the Greville abscissae).
    pub fn rectangle(space: TensorSpace2D, x: (f64, f64), y: (f64, f64)) -> Self {
        let gu = space.u.greville().to_vec();
        let gv = space.v.greville().to_vec();
        let (u0, u1) = space.u.knot_vector().domain();
        let (v0, v1) = space.v.knot_vector().domain();
        let mut points = Vec::with_capacity(space.num_basis());
        for &b in &gv {
            for &a in &gu {
                let s = (a - u0) / (u1 - u0);
                let t = (b - v0) / (v1 - v0);
                points.push([x.0 + (x.1 - x.0) * s, y.0 + (y.1 - y.0) * t]);
            }
        }
        Self {
            space,
            net: ControlNet::new(points),
        }
    }

    pub fn eval(&self, xi: f64, eta: f64) -> Result<[f64; 2]> {
        eval_surface(&self.space, &self.net, xi, eta)
    }

    pub fn eval_jacobian(&self, xi: f64, eta: f64) -> Result<([f64; 2], [[f64; 2]; 2])> {
        eval_surface_jacobian(&self.space, &self.net, xi, eta)
    }

    pub fn parametric_domain(&self) -> ((f64, f64), (f64, f64)) {
        (
            self.space.u.knot_vector().domain(),
            self.space.v.knot_vector().domain(),
        )
    }
}
