use nalgebra::DMatrix;
use rayon::prelude::*;

use super::{CellState, HierarchicalSpace};
use crate::error::{Error, Result};
use crate::spline::{bernstein_derivs_unchecked, ExtractionOperator};

/// Sparse columns of a multi-level operator: for every tensor function of a
/// level, the `(global id, coefficient)` pairs of the hierarchical functions
/// that contain it, sorted by id.
type Columns = Vec<Vec<(usize, f64)>>;

#[derive(Clone, Debug)]
pub(crate) struct Cache {
    columns: Vec<Columns>,
    elements: Vec<HierElement>,
}

/// An active element with its multi-level Bezier operator.
#[derive(Clone, Debug)]
pub struct HierElement {
    pub level: usize,
    /// Flat cell index on its level.
    pub index: usize,
    /// Global ids of the hierarchical functions that are nonzero here.
    pub functions: Vec<usize>,
    /// `C^e`: rows follow `functions`, columns the local tensor Bernstein
    /// basis (`u` fastest).
    pub extraction: ExtractionOperator,
    /// Parametric bounds `((u0, u1), (v0, v1))`.
    pub bounds: ((f64, f64), (f64, f64)),
}

impl HierElement {
    pub fn size(&self) -> (f64, f64) {
        let ((u0, u1), (v0, v1)) = self.bounds;
        (u1 - u0, v1 - v0)
    }

    /// Local Bernstein coordinates of a parametric point.
    pub fn to_local(&self, xi: f64, eta: f64) -> (f64, f64) {
        let ((u0, u1), (v0, v1)) = self.bounds;
        (
            ((xi - u0) / (u1 - u0)).clamp(0.0, 1.0),
            ((eta - v0) / (v1 - v0)).clamp(0.0, 1.0),
        )
    }

    pub fn to_parametric(&self, s: f64, t: f64) -> (f64, f64) {
        let ((u0, u1), (v0, v1)) = self.bounds;
        (u0 + s * (u1 - u0), v0 + t * (v1 - v0))
    }
}

/// Hierarchical basis values at a point.
#[derive(Clone, Debug)]
pub struct BasisEval {
    /// Position of the element in [`HierarchicalSpace::elements`].
    pub element: usize,
    pub functions: Vec<usize>,
    pub values: Vec<f64>,
    /// Parametric gradients.
    pub gradients: Vec<[f64; 2]>,
}

/// Tensor Bernstein values and parametric-local gradients, `u` fastest.
pub(crate) fn tensor_bernstein(p: usize, q: usize, s: f64, t: f64) -> (Vec<f64>, Vec<[f64; 2]>) {
    let (bu, du) = bernstein_derivs_unchecked(p, s);
    let (bv, dv) = bernstein_derivs_unchecked(q, t);
    let mut vals = Vec::with_capacity((p + 1) * (q + 1));
    let mut grads = Vec::with_capacity((p + 1) * (q + 1));
    for b in 0..=q {
        for a in 0..=p {
            vals.push(bu[a] * bv[b]);
            grads.push([du[a] * bv[b], bu[a] * dv[b]]);
        }
    }
    (vals, grads)
}

impl HierarchicalSpace {
    fn cache(&self) -> &Cache {
        self.cache
            .get_or_init(|| std::sync::Arc::new(self.build_cache()))
    }

    /// Add `delta` to entry `(0, 0)` of the cached `C^e` of the `k`-th
    /// active element. Only the Bezier-extraction paths see the change; it
    /// exists so verification can demonstrate that it detects a bad operator.
    #[doc(hidden)]
    pub fn inject_extraction_fault(&mut self, k: usize, delta: f64) {
        let mut cache = self.cache().clone();
        cache.elements[k].extraction.matrix[(0, 0)] += delta;
        self.cache = std::sync::OnceLock::new();
        let _ = self.cache.set(std::sync::Arc::new(cache));
    }

    fn build_cache(&self) -> Cache {
        let columns = self.propagate(self.levels.len() - 1, true);
        let cells: Vec<(usize, usize)> = self.active_element_list();
        let elements = cells
            .par_iter()
            .map(|&(l, e)| self.make_element(&columns[l], l, e))
            .collect();
        Cache { columns, elements }
    }

    /// Columns of `M^glob_L` for every level up to `last`. With `prune`,
    /// level functions that cannot reach finer active cells are not carried
    /// into the next level, which leaves columns of functions outside the
    /// finer subdomain incomplete.
    fn propagate(&self, last: usize, prune: bool) -> Vec<Columns> {
        let mut out: Vec<Columns> = Vec::with_capacity(last + 1);
        let mut cols: Columns = vec![Vec::new(); self.levels[0].space.num_basis()];
        for (k, &f) in self.active[0].iter().enumerate() {
            cols[f].push((self.offsets[0] + k, 1.0));
        }
        out.push(cols);
        for l in 0..last {
            let coarse = &out[l];
            let lev = &self.levels[l];
            let fine_space = &self.levels[l + 1].space;
            let (cu, cv) = lev.children();
            let nu_coarse = lev.space.basis_dims().0;
            let mut fine: Columns = vec![Vec::new(); fine_space.num_basis()];
            for (f, col) in coarse.iter().enumerate() {
                if col.is_empty() || (prune && !self.support_meets_refined(l, f)) {
                    continue;
                }
                let (i, j) = (f % nu_coarse, f / nu_coarse);
                for &(jv, sv) in &cv[j] {
                    for &(ju, su) in &cu[i] {
                        let target = &mut fine[fine_space.function_index(ju, jv)];
                        let s = su * sv;
                        target.extend(col.iter().map(|&(id, c)| (id, c * s)));
                    }
                }
            }
            for (g, col) in fine.iter_mut().enumerate() {
                if self.truncated && !col.is_empty() && self.support_in_domain(l + 1, g) {
                    col.clear();
                } else {
                    merge_sorted(col);
                }
            }
            for (k, &g) in self.active[l + 1].iter().enumerate() {
                fine[g].push((self.offsets[l + 1] + k, 1.0));
            }
            out.push(fine);
        }
        out
    }

    fn make_element(&self, cols: &Columns, level: usize, index: usize) -> HierElement {
        let space = &self.levels[level].space;
        let (p, q) = space.degrees();
        let local = space.element_functions(index);
        let mut ids: Vec<usize> = local
            .iter()
            .flat_map(|&g| cols[g].iter().map(|&(id, _)| id))
            .collect();
        ids.sort_unstable();
        ids.dedup();
        let mut m = DMatrix::zeros(ids.len(), local.len());
        for (k, &g) in local.iter().enumerate() {
            for &(id, c) in &cols[g] {
                let r = ids.binary_search(&id).unwrap();
                m[(r, k)] = c;
            }
        }
        let (eu, ev) = space.element_pair(index);
        let e_u = space.u.element_extraction(eu);
        let e_v = space.v.element_extraction(ev);
        let n = (p + 1) * (q + 1);
        let kron = DMatrix::from_fn(n, n, |r, c| {
            e_u[(r % (p + 1), c % (p + 1))] * e_v[(r / (p + 1), c / (p + 1))]
        });
        let matrix = m * kron;
        HierElement {
            level,
            index,
            extraction: ExtractionOperator::new(matrix, ids.clone(), (0..n).collect()),
            functions: ids,
            bounds: (space.u.element_bounds(eu), space.v.element_bounds(ev)),
        }
    }

    /// Active elements sorted by `(level, index)`, with their operators.
    pub fn elements(&self) -> &[HierElement] {
        &self.cache().elements
    }

    /// Position in [`elements`](Self::elements) of an active cell.
    pub fn element_position(&self, level: usize, index: usize) -> Option<usize> {
        self.elements()
            .binary_search_by(|el| (el.level, el.index).cmp(&(level, index)))
            .ok()
    }

    /// `C^e` of an active cell.
    pub fn local_extraction(&self, level: usize, index: usize) -> Result<&ExtractionOperator> {
        if level >= self.levels.len()
            || index >= self.cells[level].len()
            || self.cells[level][index] != CellState::Active
        {
            return Err(Error::argument(format!(
                "element ({level}, {index}) is not active"
            )));
        }
        let k = self
            .element_position(level, index)
            .expect("active element is cached");
        Ok(&self.elements()[k].extraction)
    }

    /// Dense `M^glob_L`: one row per active function of levels `0..=L` (in
    /// global id order), one column per level `L` tensor function.
    pub fn global_multilevel_operator(&self, level: usize) -> Result<ExtractionOperator> {
        let deepest = self.num_levels_in_use().max(1) - 1;
        if level > deepest {
            return Err(Error::argument(format!(
                "level {level} is deeper than the deepest non-empty level {deepest}"
            )));
        }
        let cols = self.propagate(level, false);
        let n = self.offsets[level + 1];
        let m = self.levels[level].space.num_basis();
        let mut mat = DMatrix::zeros(n, m);
        for (g, col) in cols[level].iter().enumerate() {
            for &(id, c) in col {
                mat[(id, g)] = c;
            }
        }
        Ok(ExtractionOperator::new(
            mat,
            (0..n).collect(),
            (0..m).collect(),
        ))
    }

    /// Values and parametric gradients of the hierarchical functions that
    /// are nonzero at a point, through `C^e` and the Bernstein basis.
    pub fn eval_hier_basis(&self, xi: f64, eta: f64) -> Result<BasisEval> {
        let (l, e) = self.locate(xi, eta)?;
        let k = self
            .element_position(l, e)
            .expect("active element is cached");
        let el = &self.elements()[k];
        let (p, q) = self.degrees();
        let (s, t) = el.to_local(xi, eta);
        let (hu, hv) = el.size();
        let (b, db) = tensor_bernstein(p, q, s, t);
        let c = &el.extraction.matrix;
        let mut values = vec![0.0; c.nrows()];
        let mut gradients = vec![[0.0; 2]; c.nrows()];
        for r in 0..c.nrows() {
            for a in 0..c.ncols() {
                let w = c[(r, a)];
                values[r] += w * b[a];
                gradients[r][0] += w * db[a][0];
                gradients[r][1] += w * db[a][1];
            }
            gradients[r][0] /= hu;
            gradients[r][1] /= hv;
        }
        Ok(BasisEval {
            element: k,
            functions: el.functions.clone(),
            values,
            gradients,
        })
    }

    /// Hierarchical function values at a point through the multi-level
    /// operator applied to Cox-de Boor values of the element's level, without
    /// Bezier extraction. Returned ids are sorted.
    pub fn eval_direct(&self, xi: f64, eta: f64) -> Result<(Vec<usize>, Vec<f64>)> {
        let (l, _) = self.locate(xi, eta)?;
        let cols = &self.cache().columns[l];
        let (idx, vals) = self.levels[l].space.eval_basis(xi, eta)?;
        let mut acc: Vec<(usize, f64)> = Vec::new();
        for (&g, &v) in idx.iter().zip(&vals) {
            acc.extend(cols[g].iter().map(|&(id, c)| (id, c * v)));
        }
        merge_sorted(&mut acc);
        Ok(acc.into_iter().unzip())
    }

    /// Same as [`eval_direct`](Self::eval_direct) with parametric gradients.
    pub fn eval_direct_grad(
        &self,
        xi: f64,
        eta: f64,
    ) -> Result<(Vec<usize>, Vec<f64>, Vec<[f64; 2]>)> {
        let (l, _) = self.locate(xi, eta)?;
        let cols = &self.cache().columns[l];
        let (idx, vals, grads) = self.levels[l].space.eval_basis_grad(xi, eta)?;
        let mut acc: Vec<(usize, [f64; 3])> = Vec::new();
        for ((&g, &v), d) in idx.iter().zip(&vals).zip(&grads) {
            acc.extend(
                cols[g]
                    .iter()
                    .map(|&(id, c)| (id, [c * v, c * d[0], c * d[1]])),
            );
        }
        acc.sort_by_key(|a| a.0);
        let mut ids = Vec::new();
        let mut values = Vec::new();
        let mut gradients: Vec<[f64; 2]> = Vec::new();
        for (id, w) in acc {
            if ids.last() == Some(&id) {
                *values.last_mut().unwrap() += w[0];
                let g = gradients.last_mut().unwrap();
                g[0] += w[1];
                g[1] += w[2];
            } else {
                ids.push(id);
                values.push(w[0]);
                gradients.push([w[1], w[2]]);
            }
        }
        Ok((ids, values, gradients))
    }

    /// Expansion of active function `id` in the basis of level `target`.
    /// Exact on the cells of `target` that lie in that level's subdomain.
    pub fn expansion(&self, id: usize, target: usize) -> Vec<(usize, f64)> {
        self.cache().columns[target]
            .iter()
            .enumerate()
            .filter_map(|(g, col)| {
                col.binary_search_by_key(&id, |e| e.0)
                    .ok()
                    .map(|k| (g, col[k].1))
            })
            .collect()
    }
}

/// Sort by id (stable) and add up duplicates in their original order.
fn merge_sorted(col: &mut Vec<(usize, f64)>) {
    if col.len() < 2 {
        return;
    }
    col.sort_by_key(|e| e.0);
    let mut w = 0;
    for r in 1..col.len() {
        if col[r].0 == col[w].0 {
            col[w].1 += col[r].1;
        } else {
            w += 1;
            col[w] = col[r];
        }
    }
    col.truncate(w + 1);
}

#[cfg(test)]
mod tests {
    use super::super::tests::base;
    use super::super::*;

    fn corner() -> HierarchicalSpace {
        build_hierarchy(base(2, 4), 3)
            .unwrap()
            .refine_elements(&[(0, 0), (0, 1), (0, 4)])
            .unwrap()
    }

    #[test]
    fn unrefined_operators_are_tensor_extraction() {
        let hs = build_hierarchy(base(2, 4), 2).unwrap();
        let s = hs.level(0).space();
        for el in hs.elements() {
            let (eu, ev) = s.element_pair(el.index);
            let (eu_m, ev_m) = (s.u.element_extraction(eu), s.v.element_extraction(ev));
            assert_eq!(el.functions, s.element_functions(el.index));
            for r in 0..9 {
                for c in 0..9 {
                    let want = eu_m[(r % 3, c % 3)] * ev_m[(r / 3, c / 3)];
                    assert_eq!(el.extraction.matrix[(r, c)], want);
                }
            }
        }
        let m = hs.global_multilevel_operator(0).unwrap();
        assert_eq!(m.matrix, DMatrix::identity(36, 36));
        assert!(hs.global_multilevel_operator(1).is_err());
    }

    #[test]
    fn refined_once_everywhere_gives_subdivision() {
        // level 1 holds no active function until level 0 is touched, so
        // check the level-1 operator on a hierarchy with one refined cell
        let hs = build_hierarchy(base(2, 4), 2)
            .unwrap()
            .with_truncation(false);
        let r = hs.refine_elements(&[(0, 15)]).unwrap();
        let m = r.global_multilevel_operator(1).unwrap();
        let (su, sv) = r.level(0).subdivision();
        for id in 0..r.active_functions(0).len() {
            let f = r.active_functions(0)[id];
            let (i, j) = r.level(0).space().function_pair(f);
            for g in 0..100 {
                let (a, b) = (g % 10, g / 10);
                assert_eq!(m.matrix[(id, g)], su.matrix[(a, i)] * sv.matrix[(b, j)]);
            }
        }
    }

    #[test]
    fn column_sums_and_partition_of_unity() {
        let hs = corner();
        let hs = hs.refine_elements(&[(1, hs.children_of(0, 0)[0])]).unwrap();
        for el in hs.elements() {
            for s in el.extraction.column_sums() {
                assert!((s - 1.0).abs() < 1e-13);
            }
        }
        for k in 0..50 {
            let x = (k as f64 * 0.618034).fract();
            let y = (k as f64 * 0.414214).fract();
            let e = hs.eval_hier_basis(x, y).unwrap();
            assert!((e.values.iter().sum::<f64>() - 1.0).abs() < 1e-13);
            let g: [f64; 2] = e
                .gradients
                .iter()
                .fold([0.0; 2], |a, g| [a[0] + g[0], a[1] + g[1]]);
            assert!(g[0].abs() < 1e-11 && g[1].abs() < 1e-11);
            let (ids, vals) = hs.eval_direct(x, y).unwrap();
            for (id, v) in ids.iter().zip(&vals) {
                let r = e.functions.iter().position(|f| f == id);
                let w = r.map_or(0.0, |r| e.values[r]);
                assert!((v - w).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn hb_mode_loses_partition_of_unity() {
        let hs = corner().with_truncation(false);
        let e = hs.eval_hier_basis(0.1, 0.1).unwrap();
        assert!(e.values.iter().sum::<f64>() > 1.0 + 1e-3);
    }

    #[test]
    fn gradients_match_differences() {
        let hs = corner();
        let h = 1e-6;
        for &(x, y) in &[(0.1, 0.2), (0.31, 0.07), (0.6, 0.6), (0.9, 0.13)] {
            let e = hs.eval_hier_basis(x, y).unwrap();
            let (ids_px, px) = hs.eval_direct(x + h, y).unwrap();
            let (ids_mx, mx) = hs.eval_direct(x - h, y).unwrap();
            let (ids_py, py) = hs.eval_direct(x, y + h).unwrap();
            let (ids_my, my) = hs.eval_direct(x, y - h).unwrap();
            let at = |ids: &[usize], v: &[f64], f: usize| {
                ids.iter().position(|&i| i == f).map_or(0.0, |k| v[k])
            };
            for (r, &f) in e.functions.iter().enumerate() {
                let fx = (at(&ids_px, &px, f) - at(&ids_mx, &mx, f)) / (2.0 * h);
                let fy = (at(&ids_py, &py, f) - at(&ids_my, &my, f)) / (2.0 * h);
                let g = e.gradients[r];
                assert!((fx - g[0]).abs() < 1e-5 * (1.0 + g[0].abs()));
                assert!((fy - g[1]).abs() < 1e-5 * (1.0 + g[1].abs()));
            }
        }
    }

    #[test]
    fn inactive_element_has_no_operator() {
        let hs = corner();
        assert!(hs.local_extraction(0, 0).is_err());
        assert!(hs.local_extraction(0, 2).is_ok());
        assert!(hs.local_extraction(5, 0).is_err());
    }

    #[test]
    fn dump_lists_every_element() {
        let hs = corner();
        let d = hs.debug_dump();
        assert_eq!(
            d.lines().filter(|l| l.starts_with("element ")).count(),
            hs.num_active_elements()
        );
    }
}
