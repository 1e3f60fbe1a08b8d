//! Truncated hierarchical B-spline spaces over nested dyadic levels.
//!
//! Each level is the dyadic refinement of the previous one. The state of the
//! hierarchy is a per-level cell map; the active basis and the element-wise
//! multi-level Bezier operators are derived from it.

mod extraction;

use std::ops::Range;
use std::sync::{Arc, OnceLock};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::spline::{ExtractionOperator, TensorSpace2D};

pub(crate) use extraction::tensor_bernstein;
pub use extraction::{BasisEval, HierElement};

/// Role of a cell of one level in the hierarchy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CellState {
    /// Not part of the refined subdomain of this level.
    Outside,
    Active,
    /// Covered by active cells of finer levels.
    Refined,
}

type Stencil = Vec<Vec<(usize, f64)>>;

/// One level of the hierarchy: a tensor space and its two-scale relation to
/// the next level.
#[derive(Debug)]
pub struct LevelSpace {
    level: usize,
    space: TensorSpace2D,
    subdivision: OnceLock<(ExtractionOperator, ExtractionOperator)>,
    children: OnceLock<(Stencil, Stencil)>,
}

impl LevelSpace {
    fn new(level: usize, space: TensorSpace2D) -> Self {
        Self {
            level,
            space,
            subdivision: OnceLock::new(),
            children: OnceLock::new(),
        }
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn space(&self) -> &TensorSpace2D {
        &self.space
    }

    pub fn element_dims(&self) -> (usize, usize) {
        self.space.element_dims()
    }

    /// Univariate subdivision matrices `(S_u, S_v)` to the next level,
    /// fine x coarse.
    pub fn subdivision(&self) -> &(ExtractionOperator, ExtractionOperator) {
        self.subdivision.get_or_init(|| {
            (
                self.space.u.subdivision_matrix(),
                self.space.v.subdivision_matrix(),
            )
        })
    }

    /// Per coarse function, the nonzero `(fine index, coefficient)` pairs.
    pub(crate) fn children(&self) -> &(Stencil, Stencil) {
        self.children.get_or_init(|| {
            let (su, sv) = self.subdivision();
            (stencil(&su.matrix), stencil(&sv.matrix))
        })
    }

    /// Cell ranges `(u, v)` covered by the support of tensor function `f`.
    pub fn support_cells(&self, f: usize) -> (Range<usize>, Range<usize>) {
        let (i, j) = self.space.function_pair(f);
        (
            self.space.u.support_elements(i),
            self.space.v.support_elements(j),
        )
    }
}

fn stencil(s: &DMatrix<f64>) -> Stencil {
    (0..s.ncols())
        .map(|i| {
            (0..s.nrows())
                .filter(|&j| s[(j, i)] != 0.0)
                .map(|j| (j, s[(j, i)]))
                .collect()
        })
        .collect()
}

/// Hierarchical spline space on one patch.
///
/// Global function ids are ordered by level, then by flat tensor index.
#[derive(Clone, Debug)]
pub struct HierarchicalSpace {
    levels: Arc<Vec<LevelSpace>>,
    cells: Vec<Vec<CellState>>,
    active: Vec<Vec<usize>>,
    offsets: Vec<usize>,
    truncated: bool,
    cache: OnceLock<Arc<extraction::Cache>>,
}

/// Hierarchy with level 0 fully active and `max_levels - 1` empty levels.
pub fn build_hierarchy(base: TensorSpace2D, max_levels: usize) -> Result<HierarchicalSpace> {
    HierarchicalSpace::new(base, max_levels)
}

impl HierarchicalSpace {
    pub fn new(base: TensorSpace2D, max_levels: usize) -> Result<Self> {
        if max_levels == 0 {
            return Err(Error::argument("a hierarchy needs at least one level"));
        }
        let mut spaces = Vec::with_capacity(max_levels);
        spaces.push(base);
        for l in 1..max_levels {
            let next = spaces[l - 1].refine_dyadic();
            spaces.push(next);
        }
        let levels: Vec<LevelSpace> = spaces
            .into_iter()
            .enumerate()
            .map(|(l, s)| LevelSpace::new(l, s))
            .collect();
        let mut cells: Vec<Vec<CellState>> = levels
            .iter()
            .map(|l| vec![CellState::Outside; l.space.num_elements()])
            .collect();
        cells[0].fill(CellState::Active);
        Ok(Self::from_parts(Arc::new(levels), cells, true))
    }

    fn from_parts(
        levels: Arc<Vec<LevelSpace>>,
        cells: Vec<Vec<CellState>>,
        truncated: bool,
    ) -> Self {
        let active: Vec<Vec<usize>> = levels
            .iter()
            .zip(&cells)
            .map(|(lev, c)| {
                (0..lev.space.num_basis())
                    .filter(|&f| function_is_active(lev, c, f))
                    .collect()
            })
            .collect();
        let mut offsets = vec![0];
        for a in &active {
            offsets.push(offsets.last().unwrap() + a.len());
        }
        Self {
            levels,
            cells,
            active,
            offsets,
            truncated,
            cache: OnceLock::new(),
        }
    }

    /// Switch between truncated (THB, default) and plain hierarchical (HB)
    /// bases.
    pub fn with_truncation(&self, on: bool) -> Self {
        Self::from_parts(self.levels.clone(), self.cells.clone(), on)
    }

    pub fn is_truncated(&self) -> bool {
        self.truncated
    }

    pub fn max_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn degrees(&self) -> (usize, usize) {
        self.levels[0].space.degrees()
    }

    pub fn level(&self, l: usize) -> &LevelSpace {
        &self.levels[l]
    }

    pub fn levels(&self) -> &[LevelSpace] {
        &self.levels
    }

    /// Number of levels that hold at least one active element.
    pub fn num_levels_in_use(&self) -> usize {
        self.cells
            .iter()
            .rposition(|c| c.contains(&CellState::Active))
            .map_or(0, |l| l + 1)
    }

    pub fn cell_state(&self, level: usize, element: usize) -> CellState {
        self.cells[level][element]
    }

    pub fn cell_states(&self, level: usize) -> &[CellState] {
        &self.cells[level]
    }

    pub fn num_functions(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    /// Sorted tensor indices of the active functions of one level.
    pub fn active_functions(&self, level: usize) -> &[usize] {
        &self.active[level]
    }

    /// Level functions whose support lies in the next level's subdomain.
    pub fn deactivated_functions(&self, level: usize) -> Vec<usize> {
        let lev = &self.levels[level];
        (0..lev.space.num_basis())
            .filter(|&f| {
                let (ru, rv) = lev.support_cells(f);
                rv.flat_map(|ev| ru.clone().map(move |eu| (eu, ev)))
                    .all(|(eu, ev)| {
                        self.cells[level][lev.space.element_index(eu, ev)] == CellState::Refined
                    })
            })
            .collect()
    }

    pub fn active_elements(&self, level: usize) -> Vec<usize> {
        self.cells[level]
            .iter()
            .enumerate()
            .filter(|(_, s)| **s == CellState::Active)
            .map(|(e, _)| e)
            .collect()
    }

    pub fn num_active_elements(&self) -> usize {
        self.cells
            .iter()
            .map(|c| c.iter().filter(|s| **s == CellState::Active).count())
            .sum()
    }

    /// Active element counts per level.
    pub fn elements_per_level(&self) -> Vec<usize> {
        self.cells
            .iter()
            .map(|c| c.iter().filter(|s| **s == CellState::Active).count())
            .collect()
    }

    /// Global id of an active function.
    pub fn function_id(&self, level: usize, f: usize) -> Option<usize> {
        self.active[level]
            .binary_search(&f)
            .ok()
            .map(|k| self.offsets[level] + k)
    }

    /// `(level, tensor index)` of a global id.
    pub fn function_of(&self, id: usize) -> (usize, usize) {
        let level = self.offsets.partition_point(|&o| o <= id) - 1;
        (level, self.active[level][id - self.offsets[level]])
    }

    /// Parametric bounds `((u0, u1), (v0, v1))` of a cell.
    pub fn cell_bounds(&self, level: usize, element: usize) -> ((f64, f64), (f64, f64)) {
        let s = &self.levels[level].space;
        let (eu, ev) = s.element_pair(element);
        (s.u.element_bounds(eu), s.v.element_bounds(ev))
    }

    /// Active cell `(level, element)` containing a parametric point.
    pub fn locate(&self, xi: f64, eta: f64) -> Result<(usize, usize)> {
        for (l, lev) in self.levels.iter().enumerate() {
            let s = &lev.space;
            let e = s.element_index(s.u.locate(xi)?, s.v.locate(eta)?);
            match self.cells[l][e] {
                CellState::Active => return Ok((l, e)),
                CellState::Refined => continue,
                CellState::Outside => break,
            }
        }
        Err(Error::argument(format!(
            "no active element contains ({xi}, {eta})"
        )))
    }

    /// Split the given active cells `(level, element)` into their four
    /// children.
    pub fn refine_elements(&self, marked: &[(usize, usize)]) -> Result<HierarchicalSpace> {
        if marked.is_empty() {
            return Ok(self.clone());
        }
        let mut cells = self.cells.clone();
        for &(l, e) in marked {
            if l >= self.levels.len() || e >= cells[l].len() {
                return Err(Error::argument(format!(
                    "element ({l}, {e}) does not exist"
                )));
            }
            if cells[l][e] != CellState::Active {
                // repeated marks of a cell refined in this call are harmless
                if cells[l][e] == CellState::Refined && self.cells[l][e] == CellState::Active {
                    continue;
                }
                return Err(Error::argument(format!("element ({l}, {e}) is not active")));
            }
            if l + 1 >= self.levels.len() {
                return Err(Error::argument(format!(
                    "element ({l}, {e}) is already on the finest allowed level"
                )));
            }
            cells[l][e] = CellState::Refined;
            for c in self.children_of(l, e) {
                cells[l + 1][c] = CellState::Active;
            }
        }
        Ok(Self::from_parts(self.levels.clone(), cells, self.truncated))
    }

    /// Refine every active element once.
    pub fn refine_all(&self) -> Result<HierarchicalSpace> {
        let marked: Vec<(usize, usize)> = (0..self.levels.len())
            .flat_map(|l| self.active_elements(l).into_iter().map(move |e| (l, e)))
            .collect();
        self.refine_elements(&marked)
    }

    /// The four level `l+1` cells inside cell `e` of level `l`.
    pub fn children_of(&self, l: usize, e: usize) -> [usize; 4] {
        let (eu, ev) = self.levels[l].space.element_pair(e);
        let fine = &self.levels[l + 1].space;
        [
            fine.element_index(2 * eu, 2 * ev),
            fine.element_index(2 * eu + 1, 2 * ev),
            fine.element_index(2 * eu, 2 * ev + 1),
            fine.element_index(2 * eu + 1, 2 * ev + 1),
        ]
    }

    pub fn parent_of(&self, l: usize, e: usize) -> usize {
        let (eu, ev) = self.levels[l].space.element_pair(e);
        self.levels[l - 1].space.element_index(eu / 2, ev / 2)
    }

    /// Rebuild a hierarchy from its list of active cells.
    pub fn from_active_elements(
        base: TensorSpace2D,
        max_levels: usize,
        active: &[(usize, usize)],
    ) -> Result<HierarchicalSpace> {
        let empty = Self::new(base, max_levels)?;
        let mut cells: Vec<Vec<CellState>> = empty
            .cells
            .iter()
            .map(|c| vec![CellState::Outside; c.len()])
            .collect();
        for &(l, e) in active {
            if l >= max_levels || e >= cells[l].len() {
                return Err(Error::argument(format!(
                    "element ({l}, {e}) does not exist"
                )));
            }
            cells[l][e] = CellState::Active;
            let (mut lc, mut ec) = (l, e);
            while lc > 0 {
                ec = empty.parent_of(lc, ec);
                lc -= 1;
                if cells[lc][ec] == CellState::Active {
                    return Err(Error::argument(format!(
                        "active elements overlap at ({lc}, {ec})"
                    )));
                }
                cells[lc][ec] = CellState::Refined;
            }
        }
        // every refined cell must be fully covered by its children
        for l in 0..max_levels {
            for e in 0..cells[l].len() {
                let covered = match cells[l][e] {
                    CellState::Refined => empty
                        .children_of(l, e)
                        .iter()
                        .all(|&c| cells[l + 1][c] != CellState::Outside),
                    CellState::Outside => l > 0,
                    CellState::Active => true,
                };
                if !covered {
                    return Err(Error::argument(format!(
                        "active elements leave a gap at ({l}, {e})"
                    )));
                }
            }
        }
        Ok(Self::from_parts(empty.levels, cells, true))
    }

    /// All active cells as `(level, element)`, sorted.
    pub fn active_element_list(&self) -> Vec<(usize, usize)> {
        (0..self.levels.len())
            .flat_map(|l| self.active_elements(l).into_iter().map(move |e| (l, e)))
            .collect()
    }

    /// Remove from a level `l+1` coefficient vector the entries of functions
    /// whose support lies in the level `l+1` subdomain. Identity in HB mode.
    pub fn truncate_coefficients(&self, level: usize, coeffs: &[f64]) -> Result<Vec<f64>> {
        let fine = level + 1;
        if fine >= self.levels.len() {
            return Err(Error::argument(format!("level {level} has no finer level")));
        }
        let n = self.levels[fine].space.num_basis();
        if coeffs.len() != n {
            return Err(Error::argument(format!(
                "coefficient vector has length {}, level {fine} has {n} functions",
                coeffs.len()
            )));
        }
        let mut out = coeffs.to_vec();
        if self.truncated {
            for (f, c) in out.iter_mut().enumerate() {
                if self.support_in_domain(fine, f) {
                    *c = 0.0;
                }
            }
        }
        Ok(out)
    }

    /// Whether the support of level function `f` lies inside the level's
    /// subdomain.
    pub(crate) fn support_in_domain(&self, level: usize, f: usize) -> bool {
        let lev = &self.levels[level];
        let (ru, rv) = lev.support_cells(f);
        let cells = &self.cells[level];
        rv.flat_map(|ev| ru.clone().map(move |eu| (eu, ev)))
            .all(|(eu, ev)| cells[lev.space.element_index(eu, ev)] != CellState::Outside)
    }

    /// Whether the support of level function `f` touches a refined cell.
    pub(crate) fn support_meets_refined(&self, level: usize, f: usize) -> bool {
        let lev = &self.levels[level];
        let (ru, rv) = lev.support_cells(f);
        let cells = &self.cells[level];
        rv.flat_map(|ev| ru.clone().map(move |eu| (eu, ev)))
            .any(|(eu, ev)| cells[lev.space.element_index(eu, ev)] == CellState::Refined)
    }

    /// Text dump of all active elements and their operators.
    pub fn debug_dump(&self) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        let _ = writeln!(
            s,
            "hierarchy levels={} functions={} elements={} truncated={}",
            self.levels.len(),
            self.num_functions(),
            self.num_active_elements(),
            self.truncated
        );
        for el in self.elements() {
            let _ = writeln!(s, "element level={} index={}", el.level, el.index);
            let rows: Vec<String> = el.functions.iter().map(|r| r.to_string()).collect();
            let _ = writeln!(s, "rows {}", rows.join(" "));
            for r in 0..el.extraction.matrix.nrows() {
                let vals: Vec<String> = el
                    .extraction
                    .matrix
                    .row(r)
                    .iter()
                    .map(|v| format!("{v:.17e}"))
                    .collect();
                let _ = writeln!(s, "  {}", vals.join(" "));
            }
        }
        s
    }
}

fn function_is_active(lev: &LevelSpace, cells: &[CellState], f: usize) -> bool {
    let (ru, rv) = lev.support_cells(f);
    let mut any_active = false;
    for ev in rv {
        for eu in ru.clone() {
            match cells[lev.space.element_index(eu, ev)] {
                CellState::Outside => return false,
                CellState::Active => any_active = true,
                CellState::Refined => {}
            }
        }
    }
    any_active
}
