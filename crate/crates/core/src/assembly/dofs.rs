use std::collections::BTreeSet;

use super::{MultipatchDomain, Patch, Side};
use crate::error::{Error, Result};

/// Global numbering of the hierarchical functions of all patches, with
/// coincident interface functions merged.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DofMap {
    offsets: Vec<usize>,
    dof_of: Vec<usize>,
    num_dofs: usize,
}

/// Active functions of one level with normal index 0 on a side, as
/// `(tangential index, global function id)`.
pub(crate) fn side_functions(patch: &Patch, level: usize, side: Side) -> Vec<(usize, usize)> {
    let space = &patch.space;
    let ts = space.level(level).space();
    let (nu, nv) = ts.basis_dims();
    space
        .active_functions(level)
        .iter()
        .filter_map(|&f| {
            let (i, j) = ts.function_pair(f);
            let t = match side {
                Side::West => (i == 0).then_some(j),
                Side::East => (i + 1 == nu).then_some(j),
                Side::South => (j == 0).then_some(i),
                Side::North => (j + 1 == nv).then_some(i),
            }?;
            Some((t, space.function_id(level, f).unwrap()))
        })
        .collect()
}

/// Physical anchor of a side function: the side point at its tangential
/// Greville abscissa.
fn anchor(patch: &Patch, level: usize, side: Side, t: usize) -> Result<[f64; 2]> {
    let ts = patch.space.level(level).space();
    let g = if side.is_vertical() {
        ts.v.greville()[t]
    } else {
        ts.u.greville()[t]
    };
    patch.geometry.eval_side(side, g)
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

impl DofMap {
    pub fn build(domain: &MultipatchDomain) -> Result<Self> {
        let mut offsets = vec![0];
        for p in &domain.patches {
            offsets.push(offsets.last().unwrap() + p.space.num_functions());
        }
        let total = *offsets.last().unwrap();
        let mut parent: Vec<usize> = (0..total).collect();
        let tol = 1e-10 * domain.scale();
        for iface in &domain.interfaces {
            let (pa, pb) = (&domain.patches[iface.a], &domain.patches[iface.b]);
            let levels = pa.space.max_levels().min(pb.space.max_levels());
            for l in 0..levels {
                let fa = side_functions(pa, l, iface.side_a);
                let fb = side_functions(pb, l, iface.side_b);
                let err = |msg: String| {
                    Error::config(format!(
                        "non-conforming interface {} at level {l}: {msg}",
                        iface.describe()
                    ))
                };
                if fa.len() != fb.len() {
                    return Err(err(format!(
                        "{} active side functions against {}",
                        fa.len(),
                        fb.len()
                    )));
                }
                let xb = fb
                    .iter()
                    .map(|&(t, _)| anchor(pb, l, iface.side_b, t))
                    .collect::<Result<Vec<_>>>()?;
                let mut used = vec![false; fb.len()];
                for &(t, ga) in &fa {
                    let xa = anchor(pa, l, iface.side_a, t)?;
                    let hit = xb.iter().enumerate().find(|(k, x)| {
                        !used[*k] && ((x[0] - xa[0]).powi(2) + (x[1] - xa[1]).powi(2)).sqrt() <= tol
                    });
                    let Some((k, _)) = hit else {
                        return Err(err(format!("no partner for the side function at {xa:?}")));
                    };
                    used[k] = true;
                    let ra = find(&mut parent, offsets[iface.a] + ga);
                    let rb = find(&mut parent, offsets[iface.b] + fb[k].1);
                    let (lo, hi) = (ra.min(rb), ra.max(rb));
                    parent[hi] = lo;
                }
            }
        }
        let mut dof_of = vec![usize::MAX; total];
        let mut num_dofs = 0;
        for x in 0..total {
            let r = find(&mut parent, x);
            if r == x {
                dof_of[x] = num_dofs;
                num_dofs += 1;
            } else {
                dof_of[x] = dof_of[r];
            }
        }
        Ok(Self {
            offsets,
            dof_of,
            num_dofs,
        })
    }

    pub fn num_dofs(&self) -> usize {
        self.num_dofs
    }

    pub fn dof(&self, patch: usize, function: usize) -> usize {
        self.dof_of[self.offsets[patch] + function]
    }

    /// Global dofs of all functions of a patch, indexed by function id.
    pub fn patch_dofs(&self, patch: usize) -> &[usize] {
        &self.dof_of[self.offsets[patch]..self.offsets[patch + 1]]
    }

    /// Dofs of functions that do not vanish on unglued sides.
    pub fn boundary_dofs(&self, domain: &MultipatchDomain) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        for (p, side) in domain.boundary_sides() {
            let patch = &domain.patches[p];
            for l in 0..patch.space.max_levels() {
                for (_, g) in side_functions(patch, l, side) {
                    out.insert(self.dof(p, g));
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::super::tests::two_patches;
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn interface_functions_are_merged() {
        let d = two_patches(2, 4, 2);
        let dm = DofMap::build(&d).unwrap();
        // 6x6 per patch, one shared column of 6
        assert_eq!(dm.num_dofs(), 66);
        for j in 0..6 {
            assert_eq!(dm.dof(0, 5 + 6 * j), dm.dof(1, 6 * j));
        }
        assert_eq!(dm.boundary_dofs(&d).len(), 2 * 6 + 2 * 11 - 4);
    }

    #[test]
    fn mirrored_refinement_stays_conforming() {
        let d = two_patches(2, 4, 3);
        let marks = vec![BTreeSet::from([(0, 3), (0, 7)]), BTreeSet::new()];
        let r = d.refine(&marks).unwrap();
        assert!(DofMap::build(&r).is_ok());
        // refining one side only breaks conformity
        let one = d
            .with_spaces(vec![r.patches[0].space.clone(), d.patches[1].space.clone()])
            .unwrap();
        let e = DofMap::build(&one).unwrap_err().to_string();
        assert!(e.contains("patch 0 east / patch 1 west"), "{e}");
    }
}
