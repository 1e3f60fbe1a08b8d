//! Field, mesh and run-state output.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::adaptivity::ConvergenceRecord;
use crate::assembly::{DiscreteSolution, MultipatchDomain};
use crate::error::{Error, Result};
use crate::hierarchy::HierarchicalSpace;
use crate::physics::FieldSample;

fn real9(v: f64) -> String {
    format!("{v:.8e}")
}

/// Samples of one patch on a `resolution x resolution` parametric grid,
/// `u` fastest.
pub fn patch_samples(
    solution: &DiscreteSolution,
    domain: &MultipatchDomain,
    patch: usize,
    resolution: usize,
) -> Result<Vec<FieldSample>> {
    if resolution < 2 {
        return Err(Error::argument(format!(
            "resolution {resolution} is below 2"
        )));
    }
    let ((u0, u1), (v0, v1)) = domain.patches[patch].geometry.parametric_domain();
    let t = |k: usize| k as f64 / (resolution - 1) as f64;
    let mut out = Vec::with_capacity(resolution * resolution);
    for j in 0..resolution {
        for i in 0..resolution {
            let xi = u0 + t(i) * (u1 - u0);
            let eta = v0 + t(j) * (v1 - v0);
            out.push(crate::physics::sample_parametric(
                solution, domain, patch, xi, eta,
            )?);
        }
    }
    Ok(out)
}

/// Legacy VTK structured grids, one complete dataset per patch, written one
/// after another. Point data: `Az`, `Bx`, `By`, `Bmag`, `level`.
pub fn export_fields(
    solution: &DiscreteSolution,
    domain: &MultipatchDomain,
    resolution: usize,
) -> Result<String> {
    let mut s = String::new();
    for p in 0..domain.num_patches() {
        let samples = patch_samples(solution, domain, p, resolution)?;
        let n = samples.len();
        let _ = writeln!(s, "# vtk DataFile Version 3.0");
        let _ = writeln!(s, "patch {p} material {}", domain.patches[p].material);
        let _ = writeln!(s, "ASCII");
        let _ = writeln!(s, "DATASET STRUCTURED_GRID");
        let _ = writeln!(s, "DIMENSIONS {resolution} {resolution} 1");
        let _ = writeln!(s, "POINTS {n} double");
        for f in &samples {
            let _ = writeln!(s, "{} {} {}", real9(f.x[0]), real9(f.x[1]), real9(0.0));
        }
        let _ = writeln!(s, "POINT_DATA {n}");
        let arrays: [(&str, &dyn Fn(&FieldSample) -> String); 5] = [
            ("Az", &|f| real9(f.az)),
            ("Bx", &|f| real9(f.b[0])),
            ("By", &|f| real9(f.b[1])),
            ("Bmag", &|f| real9(f.b_magnitude())),
            ("level", &|f| f.level.to_string()),
        ];
        for (name, get) in arrays {
            let ty = if name == "level" { "int" } else { "double" };
            let _ = writeln!(s, "SCALARS {name} {ty} 1");
            let _ = writeln!(s, "LOOKUP_TABLE default");
            for f in &samples {
                let _ = writeln!(s, "{}", get(f));
            }
        }
    }
    Ok(s)
}

/// Edge of a cell on a level, in index space: `(level, vertical, i, j)`.
/// A horizontal edge runs from vertex `(i, j)` to `(i+1, j)`, a vertical
/// one from `(i, j)` to `(i, j+1)`.
type EdgeKey = (usize, bool, usize, usize);

/// Distinct edges of the active cells of one hierarchy.
pub fn active_edges(space: &HierarchicalSpace) -> BTreeSet<EdgeKey> {
    let mut edges = BTreeSet::new();
    for (l, e) in space.active_element_list() {
        let (i, j) = space.level(l).space().element_pair(e);
        edges.insert((l, false, i, j));
        edges.insert((l, false, i, j + 1));
        edges.insert((l, true, i, j));
        edges.insert((l, true, i + 1, j));
    }
    edges
}

/// Points sampled along each edge in the mesh export.
const EDGE_POINTS: usize = 5;

/// One line per distinct active-cell edge of every patch:
/// `patch level npts x1 y1 ... xn yn`, points in physical coordinates.
pub fn export_mesh(domain: &MultipatchDomain) -> Result<String> {
    let mut s = String::from("# patch level npts x1 y1 ... xn yn\n");
    for (p, patch) in domain.patches.iter().enumerate() {
        for (l, vertical, i, j) in active_edges(&patch.space) {
            let ts = patch.space.level(l).space();
            let bu = ts.u.breakpoints();
            let bv = ts.v.breakpoints();
            let _ = write!(s, "{p} {l} {EDGE_POINTS}");
            for k in 0..EDGE_POINTS {
                let t = k as f64 / (EDGE_POINTS - 1) as f64;
                let (xi, eta) = if vertical {
                    (bu[i], bv[j] + t * (bv[j + 1] - bv[j]))
                } else {
                    (bu[i] + t * (bu[i + 1] - bu[i]), bv[j])
                };
                let x = patch.geometry.eval(xi, eta)?;
                let _ = write!(s, " {} {}", real9(x[0]), real9(x[1]));
            }
            s.push('\n');
        }
    }
    Ok(s)
}

/// Active cells of one patch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatchState {
    pub max_levels: usize,
    pub active: Vec<(usize, usize)>,
}

/// Everything needed to rebuild the final mesh and solution of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunState {
    pub problem: String,
    /// The run configuration as TOML.
    pub config: String,
    pub records: Vec<ConvergenceRecord>,
    pub patches: Vec<PatchState>,
    pub coefficients: Vec<f64>,
}

impl RunState {
    pub fn capture(
        problem: &str,
        config: String,
        records: Vec<ConvergenceRecord>,
        domain: &MultipatchDomain,
        solution: &DiscreteSolution,
    ) -> Self {
        Self {
            problem: problem.to_string(),
            config,
            records,
            patches: domain
                .patches
                .iter()
                .map(|p| PatchState {
                    max_levels: p.space.max_levels(),
                    active: p.space.active_element_list(),
                })
                .collect(),
            coefficients: solution.coeffs.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("state serializes")
    }

    pub fn from_json(text: &str, file: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            file: file.to_string(),
            line: e.line(),
            message: e.to_string(),
        })
    }

    /// Apply the stored active cells to a domain with the same base meshes.
    pub fn restore_domain(&self, base: &MultipatchDomain) -> Result<MultipatchDomain> {
        if base.num_patches() != self.patches.len() {
            return Err(Error::config(format!(
                "state has {} patches, geometry has {}",
                self.patches.len(),
                base.num_patches()
            )));
        }
        let spaces = base
            .patches
            .iter()
            .zip(&self.patches)
            .map(|(p, st)| {
                HierarchicalSpace::from_active_elements(
                    p.space.level(0).space().clone(),
                    st.max_levels,
                    &st.active,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        base.with_spaces(spaces)
    }

    pub fn restore_solution(&self, domain: &MultipatchDomain) -> Result<DiscreteSolution> {
        let mut s = DiscreteSolution::zero(domain)?;
        if s.coeffs.len() != self.coefficients.len() {
            return Err(Error::config(format!(
                "state has {} coefficients, the restored mesh has {} dofs",
                self.coefficients.len(),
                s.coeffs.len()
            )));
        }
        s.coeffs.clone_from(&self.coefficients);
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::solve_problem;
    use crate::physics::Magnetostatic;

    #[test]
    fn four_by_four_has_forty_edges() {
        let d = MultipatchDomain::unit_square(2, 4, 3).unwrap();
        assert_eq!(active_edges(&d.patches[0].space).len(), 40);
        let mesh = export_mesh(&d).unwrap();
        assert_eq!(mesh.lines().count(), 41);
        // an interior cell gains its 2 x 2 child grid
        let r = d.patches[0].space.refine_elements(&[(0, 5)]).unwrap();
        assert_eq!(active_edges(&r).len(), 52);
    }

    #[test]
    fn resolution_two_gives_corners() {
        let d = MultipatchDomain::unit_square(1, 1, 1).unwrap();
        let s = solve_problem(&d, &Magnetostatic::with_boundary(|_| 3.0)).unwrap();
        let f = patch_samples(&s, &d, 0, 2).unwrap();
        let xs: Vec<[f64; 2]> = f.iter().map(|f| f.x).collect();
        assert_eq!(xs, vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]);
        let vtk = export_fields(&s, &d, 2).unwrap();
        assert!(vtk.contains("DIMENSIONS 2 2 1"));
        assert!(vtk.contains("SCALARS Bmag double 1"));
        assert!(f
            .iter()
            .all(|f| (f.az - 3.0).abs() < 1e-12 && f.b_magnitude() < 1e-10));
        assert!(export_fields(&s, &d, 1).is_err());
    }

    #[test]
    fn state_round_trip() {
        let d = MultipatchDomain::unit_square(2, 2, 3).unwrap();
        let d = d.refine(&vec![[(0, 0)].into_iter().collect()]).unwrap();
        let s = solve_problem(&d, &crate::physics::poisson_peak_problem()).unwrap();
        let st = RunState::capture("poisson_peak", String::new(), Vec::new(), &d, &s);
        let back = RunState::from_json(&st.to_json(), "state.json").unwrap();
        assert_eq!(back, st);
        let base = MultipatchDomain::unit_square(2, 2, 1).unwrap();
        let d2 = back.restore_domain(&base).unwrap();
        let s2 = back.restore_solution(&d2).unwrap();
        assert_eq!(s2.coeffs, s.coeffs);
        assert_eq!(
            export_fields(&s2, &d2, 3).unwrap(),
            export_fields(&s, &d, 3).unwrap()
        );
    }
}
