//! Galerkin assembly on Bezier elements, multipatch coupling, boundary
//! conditions and the linear solve.

mod dofs;
mod element;
mod sparse;
mod system;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hierarchy::{CellState, HierarchicalSpace};
use crate::spline::{Geometry, KnotVector, TensorSpace2D};

pub use dofs::DofMap;
pub use element::{
    element_stiffness_bezier, element_stiffness_direct, transform_element, ElementContribution,
};
pub use sparse::{solve_indefinite, solve_spd, SparseMatrix};
pub use system::{
    apply_dirichlet, assemble, assemble_with, boundary_projection, solve, solve_problem,
    AssemblyRoute, ConstrainedSystem, DiscreteSolution, LinearSystem,
};

/// Side of the parametric square.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// `u = u0`
    West,
    /// `u = u1`
    East,
    /// `v = v0`
    South,
    /// `v = v1`
    North,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::West, Side::East, Side::South, Side::North];

    /// Whether the side runs along `v` (constant `u`).
    pub fn is_vertical(self) -> bool {
        matches!(self, Side::West | Side::East)
    }

    pub fn parse(s: &str) -> Option<Side> {
        match s {
            "west" => Some(Side::West),
            "east" => Some(Side::East),
            "south" => Some(Side::South),
            "north" => Some(Side::North),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Side::West => "west",
            Side::East => "east",
            Side::South => "south",
            Side::North => "north",
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Two glued patch sides. With `reversed`, the tangential parameter of
/// side `b` runs opposite to that of side `a`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interface {
    pub a: usize,
    pub side_a: Side,
    pub b: usize,
    pub side_b: Side,
    pub reversed: bool,
}

impl Interface {
    pub fn describe(&self) -> String {
        format!(
            "patch {} {} / patch {} {}",
            self.a, self.side_a, self.b, self.side_b
        )
    }
}

/// Piecewise-constant material data.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    /// Relative permeability.
    pub mu_r: f64,
    /// Remanent flux density in tesla.
    pub br: [f64; 2],
    /// Source current density in A/m^2.
    pub jz: f64,
}

impl Default for MaterialParams {
    fn default() -> Self {
        Self {
            mu_r: 1.0,
            br: [0.0; 2],
            jz: 0.0,
        }
    }
}

/// One patch: geometry map, material tag and hierarchical solution space on
/// the same parametric domain.
#[derive(Clone, Debug)]
pub struct Patch {
    pub geometry: Arc<Geometry>,
    pub material: String,
    /// Factor (+1 or -1) applied to the material's remanence on this patch.
    pub orientation: f64,
    pub space: HierarchicalSpace,
}

impl Patch {
    pub fn new(
        geometry: Geometry,
        material: impl Into<String>,
        space: HierarchicalSpace,
    ) -> Result<Self> {
        let s = space.level(0).space();
        let dom = (s.u.knot_vector().domain(), s.v.knot_vector().domain());
        if dom != geometry.parametric_domain() {
            return Err(Error::argument(format!(
                "solution space domain {dom:?} differs from geometry domain {:?}",
                geometry.parametric_domain()
            )));
        }
        Ok(Self {
            geometry: Arc::new(geometry),
            material: material.into(),
            orientation: 1.0,
            space,
        })
    }

    /// Patch whose solution space starts from its geometry space.
    pub fn from_geometry(
        geometry: Geometry,
        material: impl Into<String>,
        max_levels: usize,
    ) -> Result<Self> {
        let space = HierarchicalSpace::new(geometry.space.clone(), max_levels)?;
        Self::new(geometry, material, space)
    }

    pub fn with_space(&self, space: HierarchicalSpace) -> Self {
        Self {
            geometry: self.geometry.clone(),
            material: self.material.clone(),
            orientation: self.orientation,
            space,
        }
    }

    pub fn with_orientation(mut self, orientation: f64) -> Self {
        self.orientation = orientation;
        self
    }
}

/// Patches glued along conforming interfaces.
#[derive(Clone, Debug)]
pub struct MultipatchDomain {
    pub patches: Vec<Patch>,
    pub interfaces: Vec<Interface>,
    pub materials: BTreeMap<String, MaterialParams>,
}

/// Cells per patch marked for refinement, as `(level, element)`.
pub type PatchMarks = Vec<BTreeSet<(usize, usize)>>;

impl MultipatchDomain {
    pub fn new(
        patches: Vec<Patch>,
        interfaces: Vec<Interface>,
        materials: BTreeMap<String, MaterialParams>,
    ) -> Result<Self> {
        for (k, p) in patches.iter().enumerate() {
            let m = materials.get(&p.material).ok_or_else(|| {
                Error::config(format!("patch {k} uses unknown material '{}'", p.material))
            })?;
            if !(m.mu_r > 0.0 && m.mu_r.is_finite()) {
                return Err(Error::config(format!(
                    "material '{}' has mu_r = {} (must be > 0)",
                    p.material, m.mu_r
                )));
            }
        }
        let mut seen = BTreeSet::new();
        for i in &interfaces {
            if i.a >= patches.len() || i.b >= patches.len() {
                return Err(Error::config(format!(
                    "interface {} references a missing patch",
                    i.describe()
                )));
            }
            if !seen.insert((i.a, i.side_a)) || !seen.insert((i.b, i.side_b)) {
                return Err(Error::config(format!(
                    "interface {} reuses a glued side",
                    i.describe()
                )));
            }
        }
        let domain = Self {
            patches,
            interfaces,
            materials,
        };
        domain.check_interfaces()?;
        Ok(domain)
    }

    /// Unit square `[0,1]^2` as one patch with `n x n` elements of degree
    /// `p` and material `"default"`.
    pub fn unit_square(p: usize, n: usize, max_levels: usize) -> Result<Self> {
        Self::rectangle(p, n, max_levels, (0.0, 1.0), (0.0, 1.0))
    }

    pub fn rectangle(
        p: usize,
        n: usize,
        max_levels: usize,
        x: (f64, f64),
        y: (f64, f64),
    ) -> Result<Self> {
        let kv = KnotVector::open_uniform(p, n, 0.0, 1.0)?;
        let geometry = Geometry::rectangle(TensorSpace2D::from_knots(kv.clone(), kv), x, y);
        let patch = Patch::from_geometry(geometry, "default", max_levels)?;
        let mut materials = BTreeMap::new();
        materials.insert("default".to_string(), MaterialParams::default());
        Self::new(vec![patch], Vec::new(), materials)
    }

    pub fn num_patches(&self) -> usize {
        self.patches.len()
    }

    /// Material of a patch with the patch orientation applied to `br`.
    pub fn material(&self, patch: usize) -> MaterialParams {
        let p = &self.patches[patch];
        let mut m = self.materials[&p.material];
        m.br = [m.br[0] * p.orientation, m.br[1] * p.orientation];
        m
    }

    pub fn num_active_elements(&self) -> usize {
        self.patches
            .iter()
            .map(|p| p.space.num_active_elements())
            .sum()
    }

    /// Length of the diagonal of the control point bounding box.
    pub fn scale(&self) -> f64 {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in &self.patches {
            for pt in &p.geometry.net.points {
                for d in 0..2 {
                    lo[d] = lo[d].min(pt[d]);
                    hi[d] = hi[d].max(pt[d]);
                }
            }
        }
        ((hi[0] - lo[0]).powi(2) + (hi[1] - lo[1]).powi(2))
            .sqrt()
            .max(f64::MIN_POSITIVE)
    }

    /// Patch sides not glued to another patch.
    pub fn boundary_sides(&self) -> Vec<(usize, Side)> {
        let glued: BTreeSet<(usize, Side)> = self
            .interfaces
            .iter()
            .flat_map(|i| [(i.a, i.side_a), (i.b, i.side_b)])
            .collect();
        (0..self.patches.len())
            .flat_map(|p| Side::ALL.into_iter().map(move |s| (p, s)))
            .filter(|ps| !glued.contains(ps))
            .collect()
    }

    /// Same geometry and materials with new solution spaces.
    pub fn with_spaces(&self, spaces: Vec<HierarchicalSpace>) -> Result<Self> {
        if spaces.len() != self.patches.len() {
            return Err(Error::argument("one space per patch is required"));
        }
        let patches = self
            .patches
            .iter()
            .zip(spaces)
            .map(|(p, s)| p.with_space(s))
            .collect();
        Ok(Self {
            patches,
            interfaces: self.interfaces.clone(),
            materials: self.materials.clone(),
        })
    }

    /// Apply `f` to every patch space.
    pub fn map_spaces(
        &self,
        f: impl Fn(&HierarchicalSpace) -> Result<HierarchicalSpace>,
    ) -> Result<Self> {
        let spaces = self
            .patches
            .iter()
            .map(|p| f(&p.space))
            .collect::<Result<Vec<_>>>()?;
        self.with_spaces(spaces)
    }

    /// Extend marks so that every marked cell touching a glued side has its
    /// neighbour across the interface marked as well, until nothing changes.
    pub fn mirror_marks(&self, marks: &mut PatchMarks) {
        loop {
            let mut added = false;
            for i in &self.interfaces {
                for (from, sf, to, st) in [
                    (i.a, i.side_a, i.b, i.side_b),
                    (i.b, i.side_b, i.a, i.side_a),
                ] {
                    let src = &self.patches[from].space;
                    let dst = &self.patches[to].space;
                    let new: Vec<(usize, usize)> = marks[from]
                        .iter()
                        .filter_map(|&(l, e)| {
                            let k = side_cell_position(src, l, e, sf)?;
                            let n = side_cell_count(dst, l, st);
                            let k = if i.reversed { n - 1 - k } else { k };
                            let e2 = side_cell(dst, l, st, k);
                            (dst.cell_state(l, e2) == CellState::Active).then_some((l, e2))
                        })
                        .collect();
                    for m in new {
                        added |= marks[to].insert(m);
                    }
                }
            }
            if !added {
                break;
            }
        }
    }

    /// Refine marked cells on every patch, mirroring across interfaces.
    pub fn refine(&self, marks: &PatchMarks) -> Result<Self> {
        let mut marks = marks.clone();
        marks.resize(self.patches.len(), BTreeSet::new());
        self.mirror_marks(&mut marks);
        let spaces = self
            .patches
            .iter()
            .zip(&marks)
            .map(|(p, m)| {
                p.space
                    .refine_elements(&m.iter().copied().collect::<Vec<_>>())
            })
            .collect::<Result<Vec<_>>>()?;
        self.with_spaces(spaces)
    }

    /// Geometric conformity of every interface at level 0.
    pub fn check_interfaces(&self) -> Result<()> {
        let tol = 1e-10 * self.scale();
        for i in &self.interfaces {
            let err = |msg: String| {
                Error::config(format!("non-conforming interface {}: {msg}", i.describe()))
            };
            let (pa, pb) = (&self.patches[i.a], &self.patches[i.b]);
            let ka = side_knots(&pa.space, i.side_a);
            let kb = side_knots(&pb.space, i.side_b);
            if ka.degree() != kb.degree() || ka.num_basis() != kb.num_basis() {
                return Err(err("side spaces differ in degree or size".into()));
            }
            let (a0, a1) = ka.domain();
            let (b0, b1) = kb.domain();
            let map = |t: f64| {
                let s = (t - a0) / (a1 - a0);
                let s = if i.reversed { 1.0 - s } else { s };
                b0 + s * (b1 - b0)
            };
            let mut mapped: Vec<f64> = ka.knots().iter().map(|&t| map(t)).collect();
            if i.reversed {
                mapped.reverse();
            }
            if mapped
                .iter()
                .zip(kb.knots())
                .any(|(x, y)| (x - y).abs() > 1e-12 * (b1 - b0))
            {
                return Err(err("side knot vectors do not match".into()));
            }
            // sample both traces at the breakpoints and element midpoints
            let bp = ka.breakpoints();
            let mut ts: Vec<f64> = bp.clone();
            ts.extend(bp.windows(2).map(|w| 0.5 * (w[0] + w[1])));
            for t in ts {
                let xa = pa.geometry.eval_side(i.side_a, t)?;
                let xb = pb.geometry.eval_side(i.side_b, map(t))?;
                let d = ((xa[0] - xb[0]).powi(2) + (xa[1] - xb[1]).powi(2)).sqrt();
                if d > tol {
                    return Err(err(format!("traces differ by {d:e} at side parameter {t}")));
                }
            }
        }
        Ok(())
    }
}

/// Base knot vector of the solution space along a side.
fn side_knots(space: &HierarchicalSpace, side: Side) -> KnotVector {
    let s = space.level(0).space();
    if side.is_vertical() {
        s.v.knot_vector().clone()
    } else {
        s.u.knot_vector().clone()
    }
}

/// Tangential position of a cell in the layer along `side`, if it touches it.
pub(crate) fn side_cell_position(
    space: &HierarchicalSpace,
    l: usize,
    e: usize,
    side: Side,
) -> Option<usize> {
    let s = space.level(l).space();
    let (eu, ev) = s.element_pair(e);
    let (nu, nv) = s.element_dims();
    match side {
        Side::West => (eu == 0).then_some(ev),
        Side::East => (eu + 1 == nu).then_some(ev),
        Side::South => (ev == 0).then_some(eu),
        Side::North => (ev + 1 == nv).then_some(eu),
    }
}

pub(crate) fn side_cell_count(space: &HierarchicalSpace, l: usize, side: Side) -> usize {
    let (nu, nv) = space.level(l).element_dims();
    if side.is_vertical() {
        nv
    } else {
        nu
    }
}

pub(crate) fn side_cell(space: &HierarchicalSpace, l: usize, side: Side, k: usize) -> usize {
    let s = space.level(l).space();
    let (nu, nv) = s.element_dims();
    match side {
        Side::West => s.element_index(0, k),
        Side::East => s.element_index(nu - 1, k),
        Side::South => s.element_index(k, 0),
        Side::North => s.element_index(k, nv - 1),
    }
}

impl Geometry {
    /// Point on a side at tangential parameter `t`.
    pub fn eval_side(&self, side: Side, t: f64) -> Result<[f64; 2]> {
        let ((u0, u1), (v0, v1)) = self.parametric_domain();
        match side {
            Side::West => self.eval(u0, t),
            Side::East => self.eval(u1, t),
            Side::South => self.eval(t, v0),
            Side::North => self.eval(t, v1),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `[0,2] x [0,1]` as two unit patches glued along `x = 1`.
    pub(crate) fn two_patches(p: usize, n: usize, levels: usize) -> MultipatchDomain {
        let left = MultipatchDomain::rectangle(p, n, levels, (0.0, 1.0), (0.0, 1.0)).unwrap();
        let right = MultipatchDomain::rectangle(p, n, levels, (1.0, 2.0), (0.0, 1.0)).unwrap();
        let patches = vec![left.patches[0].clone(), right.patches[0].clone()];
        let iface = Interface {
            a: 0,
            side_a: Side::East,
            b: 1,
            side_b: Side::West,
            reversed: false,
        };
        MultipatchDomain::new(patches, vec![iface], left.materials.clone()).unwrap()
    }

    #[test]
    fn boundary_sides_exclude_interfaces() {
        let d = two_patches(2, 2, 2);
        let b = d.boundary_sides();
        assert_eq!(b.len(), 6);
        assert!(!b.contains(&(0, Side::East)) && !b.contains(&(1, Side::West)));
    }

    #[test]
    fn mismatched_interface_is_rejected() {
        let d = two_patches(2, 2, 2);
        let bad = Interface {
            a: 0,
            side_a: Side::North,
            b: 1,
            side_b: Side::West,
            reversed: false,
        };
        let e =
            MultipatchDomain::new(d.patches.clone(), vec![bad], d.materials.clone()).unwrap_err();
        let msg = e.to_string();
        assert!(
            msg.contains("patch 0 north") && msg.contains("patch 1 west"),
            "{msg}"
        );
    }

    #[test]
    fn marks_are_mirrored() {
        let d = two_patches(2, 2, 3);
        let mut marks: PatchMarks = vec![BTreeSet::from([(0, 1)]), BTreeSet::new()];
        d.mirror_marks(&mut marks);
        assert_eq!(marks[1], BTreeSet::from([(0, 0)]));
        let r = d
            .refine(&vec![BTreeSet::from([(0, 3)]), BTreeSet::new()])
            .unwrap();
        assert_eq!(r.patches[1].space.cell_state(0, 2), CellState::Refined);
    }

    #[test]
    fn unknown_material_is_a_configuration_error() {
        let d = two_patches(2, 2, 2);
        let e = MultipatchDomain::new(d.patches.clone(), vec![], BTreeMap::new()).unwrap_err();
        assert!(matches!(e, Error::Configuration(_)));
    }
}
