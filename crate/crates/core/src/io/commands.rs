//! The `run` and `export` commands.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{ProblemKind, RunConfig};
use super::export::{export_fields, export_mesh, RunState};
use super::geometry::GeometryFile;
use crate::adaptivity::{
    adaptive_loop, convergence_csv, reference_solution, AdaptiveRun, ErrorSource, Reference,
};
use crate::assembly::{MaterialParams, MultipatchDomain};
use crate::error::{Error, Result};
use crate::hierarchy::HierarchicalSpace;
use crate::physics::{horseshoe_materials, poisson_peak_problem, Magnetostatic, PhysicsProblem};

/// Process exit code for an error: 2 for input problems, 3 for numerical
/// failures, 4 for I/O.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Configuration(_) | Error::Parse { .. } | Error::Argument(_) => 2,
        Error::Solver(_) | Error::Geometry { .. } | Error::Domain { .. } | Error::Internal(_) => 3,
        Error::Io { .. } => 4,
    }
}

/// Domain, problem and optional reference described by a config.
pub struct Setup {
    pub kind: ProblemKind,
    pub domain: MultipatchDomain,
    pub problem: Box<dyn PhysicsProblem>,
    pub reference: Option<Reference>,
}

impl Setup {
    pub fn error_source(&self) -> ErrorSource<'_> {
        self.reference
            .as_ref()
            .map_or(ErrorSource::Exact, ErrorSource::Reference)
    }
}

fn materials(cfg: &RunConfig) -> std::collections::BTreeMap<String, MaterialParams> {
    let mut m = horseshoe_materials();
    for (name, o) in &cfg.materials {
        let e = m.entry(name.clone()).or_default();
        if let Some(v) = o.mu_r {
            e.mu_r = v;
        }
        if let Some(v) = o.br {
            e.br = v;
        }
        if let Some(v) = o.jz {
            e.jz = v;
        }
    }
    m
}

/// Initial mesh of a config, before any adaptive refinement.
pub fn initial_domain(cfg: &RunConfig) -> Result<MultipatchDomain> {
    let kind = cfg.kind()?;
    let levels = cfg.adaptivity.max_levels;
    match kind {
        ProblemKind::PoissonPeak => MultipatchDomain::unit_square(
            cfg.problem.degree,
            cfg.problem.elements.unwrap_or(8),
            levels,
        ),
        _ => {
            let geo = match cfg.geometry_path() {
                Some(path) => GeometryFile::read(&path)?,
                None => GeometryFile::parse(
                    &crate::physics::horseshoe_geometry_text(),
                    "horseshoe.geo",
                )?,
            };
            if geo
                .patches
                .iter()
                .any(|p| p.degrees != (cfg.problem.degree, cfg.problem.degree))
            {
                return Err(Error::config(format!(
                    "problem.degree: {} differs from the geometry degrees (degree elevation is not supported)",
                    cfg.problem.degree
                )));
            }
            let mut d = geo.to_domain(&materials(cfg), levels)?;
            if let Some(n) = cfg.problem.elements {
                let base = d.patches[0].space.level(0).space().element_dims().0;
                let mut k = 0;
                while base << k < n {
                    k += 1;
                }
                if base << k != n
                    || d.patches
                        .iter()
                        .any(|p| p.space.level(0).space().element_dims() != (base, base))
                {
                    return Err(Error::config(format!(
                        "problem.elements: {n} is not a dyadic refinement of the geometry's {base} elements per direction"
                    )));
                }
                if k >= levels {
                    return Err(Error::config(format!(
                        "problem.elements: {k} initial refinements need more than adaptivity.max_levels = {levels}"
                    )));
                }
                for _ in 0..k {
                    d = d.map_spaces(|s| s.refine_all())?;
                }
            }
            Ok(d)
        }
    }
}

pub fn setup(cfg: &RunConfig) -> Result<Setup> {
    let kind = cfg.kind()?;
    let domain = initial_domain(cfg)?;
    let problem: Box<dyn PhysicsProblem> = match kind {
        ProblemKind::PoissonPeak => Box::new(poisson_peak_problem()),
        _ => Box::new(Magnetostatic::flux_wall()),
    };
    let reference = match (kind, cfg.problem.reference_depth) {
        (ProblemKind::PoissonPeak, _) | (_, None) => None,
        (_, Some(depth)) => {
            // depth refinements of the unrefined geometry mesh
            let base =
                domain.map_spaces(|s| HierarchicalSpace::new(s.level(0).space().clone(), 1))?;
            Some(reference_solution(&base, problem.as_ref(), depth)?)
        }
    };
    Ok(Setup {
        kind,
        domain,
        problem,
        reference,
    })
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Largest deviation from one of the sum of all basis functions at seeded
/// random points of every patch.
pub fn partition_of_unity_probe(
    domain: &MultipatchDomain,
    seed: u64,
    points: usize,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for p in &domain.patches {
        let ((u0, u1), (v0, v1)) = p.geometry.parametric_domain();
        for _ in 0..points {
            let xi = rng.gen_range(u0..=u1);
            let eta = rng.gen_range(v0..=v1);
            let b = p.space.eval_hier_basis(xi, eta)?;
            worst = worst.max((b.values.iter().sum::<f64>() - 1.0).abs());
        }
    }
    Ok(worst)
}

/// Outcome of `run`.
#[derive(Debug)]
pub struct RunOutput {
    pub directory: PathBuf,
    pub run: AdaptiveRun,
    pub partition_of_unity: f64,
}

/// Run the adaptive loop of a config and write `convergence.csv`,
/// `mesh_NNN.txt` per iteration, `fields.vtk` and `state.json` to `out`.
pub fn cmd_run(config: &Path, out: Option<&Path>) -> Result<RunOutput> {
    let cfg = RunConfig::read(config)?;
    let directory = match out {
        Some(o) => o.to_path_buf(),
        None => {
            let stem = config.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
            cfg.base_dir.join(format!("{stem}_run"))
        }
    };
    let s = setup(&cfg)?;
    let run = adaptive_loop(
        &s.domain,
        s.problem.as_ref(),
        &cfg.adaptivity,
        s.error_source(),
    )?;
    std::fs::create_dir_all(&directory).map_err(|e| Error::io(&directory, e))?;
    write(
        &directory.join("convergence.csv"),
        &convergence_csv(&run.records),
    )?;
    if cfg.export.mesh {
        for (k, st) in run.states.iter().enumerate() {
            write(
                &directory.join(format!("mesh_{k:03}.txt")),
                &export_mesh(&st.domain)?,
            )?;
        }
    }
    let last = run.final_state();
    if cfg.export.fields {
        write(
            &directory.join("fields.vtk"),
            &export_fields(&last.solution, &last.domain, cfg.export.resolution)?,
        )?;
    }
    let mut stored = cfg.clone();
    if let Some(g) = cfg.geometry_path() {
        stored.problem.geometry = Some(std::fs::canonicalize(&g).map_err(|e| Error::io(&g, e))?);
    }
    let state = RunState::capture(
        s.kind.name(),
        stored.to_toml(),
        run.records.clone(),
        &last.domain,
        &last.solution,
    );
    write(&directory.join("state.json"), &state.to_json())?;
    let partition_of_unity = partition_of_unity_probe(&last.domain, cfg.seed, 100)?;
    Ok(RunOutput {
        directory,
        run,
        partition_of_unity,
    })
}

/// What `export` writes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExportKind {
    Fields,
    Mesh,
}

/// Re-export the final fields or mesh of a finished run from its
/// `state.json`. Returns the written file.
pub fn cmd_export(what: ExportKind, from: &Path) -> Result<PathBuf> {
    let path = from.join("state.json");
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let state = RunState::from_json(&text, &path.display().to_string())?;
    let cfg = RunConfig::parse(&state.config, &path.display().to_string())?;
    cfg.validate()?;
    let base = initial_domain(&cfg)?;
    let domain = state.restore_domain(&base)?;
    let (name, body) = match what {
        ExportKind::Fields => {
            let solution = state.restore_solution(&domain)?;
            (
                "fields.vtk",
                export_fields(&solution, &domain, cfg.export.resolution)?,
            )
        }
        ExportKind::Mesh => ("mesh.txt", export_mesh(&domain)?),
    };
    let out = from.join(name);
    write(&out, &body)?;
    Ok(out)
}

/// Plain-text table of the convergence records.
pub fn summary_table(run: &AdaptiveRun) -> String {
    let mut s = format!(
        "{:>4} {:>8} {:>8} {:>14} {:>14}\n",
        "iter", "dofs", "elements", "l2_error", "estimator"
    );
    let f = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.6e}"));
    for r in &run.records {
        s.push_str(&format!(
            "{:>4} {:>8} {:>8} {:>14} {:>14}\n",
            r.iteration,
            r.dofs,
            r.elements,
            f(r.l2_error),
            f(r.estimator_total)
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str) -> PathBuf {
        let d = std::env::temp_dir().join(format!("thbez-{name}-{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&d);
        std::fs::create_dir_all(&d).unwrap();
        d
    }

    #[test]
    fn run_and_export_peak() {
        let dir = tmp("peak");
        let cfg = dir.join("peak.toml");
        std::fs::write(
            &cfg,
            "seed = 3\n[problem]\nname = \"poisson_peak\"\nelements = 4\n[adaptivity]\nmax_iterations = 0\n[export]\nresolution = 3\n",
        )
        .unwrap();
        let out = cmd_run(&cfg, None).unwrap();
        assert_eq!(out.directory, dir.join("peak_run"));
        let csv = std::fs::read_to_string(out.directory.join("convergence.csv")).unwrap();
        assert_eq!(csv.lines().count(), 2);
        assert!(out.partition_of_unity < 1e-12);
        let fields = std::fs::read(out.directory.join("fields.vtk")).unwrap();
        let written = cmd_export(ExportKind::Fields, &out.directory).unwrap();
        assert_eq!(std::fs::read(written).unwrap(), fields);
        let mesh = cmd_export(ExportKind::Mesh, &out.directory).unwrap();
        assert_eq!(
            std::fs::read_to_string(mesh).unwrap().lines().count(),
            1 + 40
        );
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::config("x")), 2);
        assert_eq!(exit_code(&Error::Solver("x".into())), 3);
        let dir = tmp("codes");
        let cfg = dir.join("bad.toml");
        std::fs::write(&cfg, "[problem]\nname = \"nope\"\n").unwrap();
        let e = cmd_run(&cfg, None).unwrap_err();
        assert_eq!(exit_code(&e), 2);
        assert!(e.to_string().contains("problem.name"));
        assert_eq!(
            exit_code(&cmd_run(&dir.join("missing.toml"), None).unwrap_err()),
            4
        );
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
