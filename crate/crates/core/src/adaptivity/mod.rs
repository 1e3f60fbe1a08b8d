//! Error estimation, marking and the adaptive solve loop.

mod estimator;
mod l2;

use std::collections::BTreeSet;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::assembly::{solve_problem, DiscreteSolution, MultipatchDomain, PatchMarks};
use crate::error::{Error, Result};
use crate::hierarchy::HierarchicalSpace;
use crate::physics::PhysicsProblem;

pub use estimator::{estimate_two_mesh, indicator_map, TwoMeshEstimate};
pub use l2::{element_errors_exact, l2_error, Reference};

/// An active element of one patch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ElementKey {
    pub patch: usize,
    pub level: usize,
    pub index: usize,
}

impl ElementKey {
    pub fn new(patch: usize, level: usize, index: usize) -> Self {
        Self {
            patch,
            level,
            index,
        }
    }

    /// Tie-break order for marking: level, index, patch.
    fn tie_key(&self) -> (usize, usize, usize) {
        (self.level, self.index, self.patch)
    }
}

/// Squared local error indicators of one iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorIndicators {
    pub elements: Vec<ElementKey>,
    /// `eta_k^2` per element.
    pub values: Vec<f64>,
    pub total: f64,
    pub iteration: usize,
}

impl ErrorIndicators {
    pub fn new(elements: Vec<ElementKey>, values: Vec<f64>, iteration: usize) -> Self {
        let total = values.iter().sum();
        Self {
            elements,
            values,
            total,
            iteration,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if theta > 0.0 && theta < 1.0 {
        Ok(())
    } else {
        Err(Error::config(format!("theta = {theta} must lie in (0, 1)")))
    }
}

/// Smallest prefix of the indicators sorted by decreasing value whose sum
/// reaches `theta` times the total. Equal values are ordered by level,
/// element index and patch.
pub fn mark_doerfler(ind: &ErrorIndicators, theta: f64) -> Result<Vec<ElementKey>> {
    check_theta(theta)?;
    if ind.values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::argument("indicators must be finite and nonnegative"));
    }
    let total: f64 = ind.values.iter().sum();
    if total == 0.0 {
        return Ok(Vec::new());
    }
    let mut order: Vec<usize> = (0..ind.len()).collect();
    order.sort_by(|&a, &b| {
        ind.values[b]
            .total_cmp(&ind.values[a])
            .then_with(|| ind.elements[a].tie_key().cmp(&ind.elements[b].tie_key()))
    });
    let target = theta * total;
    let mut acc = 0.0;
    let mut out = Vec::new();
    for k in order {
        out.push(ind.elements[k]);
        acc += ind.values[k];
        if acc >= target {
            break;
        }
    }
    Ok(out)
}

/// Elements whose local error `(int_k |u - u_h|^2)^(1/2)` exceeds `tol`.
/// `errors` holds the squared local errors.
pub fn mark_true_error(errors: &[(ElementKey, f64)], tol: f64) -> Vec<ElementKey> {
    errors
        .iter()
        .filter(|(_, e2)| e2.sqrt() > tol)
        .map(|(k, _)| *k)
        .collect()
}

/// How elements are selected for refinement.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MarkingMode {
    /// Dörfler marking on the two-mesh indicators.
    Estimator,
    /// Local true error (exact or reference) above the tolerance.
    TrueError,
    /// Every active element.
    All,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaptiveConfig {
    pub theta: f64,
    pub max_iterations: usize,
    /// Number of hierarchy levels the solution may use.
    pub max_levels: usize,
    pub marking: MarkingMode,
    /// Local error threshold for [`MarkingMode::TrueError`].
    pub tolerance: f64,
    /// Record elapsed seconds per iteration; zero otherwise, so records
    /// stay reproducible.
    pub wall_time: bool,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        Self {
            theta: 0.5,
            max_iterations: 5,
            max_levels: 6,
            marking: MarkingMode::Estimator,
            tolerance: 1e-8,
            wall_time: false,
        }
    }
}

impl AdaptiveConfig {
    pub fn validate(&self) -> Result<()> {
        check_theta(self.theta)?;
        if self.max_levels == 0 {
            return Err(Error::config("max_levels must be at least 1"));
        }
        if !(self.tolerance >= 0.0) {
            return Err(Error::config(format!(
                "tolerance = {} must be nonnegative",
                self.tolerance
            )));
        }
        Ok(())
    }
}

/// One row of the convergence history.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRecord {
    pub iteration: usize,
    pub dofs: usize,
    pub elements: usize,
    pub elements_per_level: Vec<usize>,
    pub l2_error: Option<f64>,
    pub estimator_total: Option<f64>,
    pub seconds: f64,
}

pub const CSV_HEADER: &str = "iter,dofs,elements,l2_error,estimator_total,seconds";

fn real17(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".to_string(), |v| format!("{v:.16e}"))
}

impl ConvergenceRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.iteration,
            self.dofs,
            self.elements,
            real17(self.l2_error),
            real17(self.estimator_total),
            real17(Some(self.seconds))
        )
    }
}

/// Header plus one row per record.
pub fn convergence_csv(records: &[ConvergenceRecord]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in records {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

/// Domain and solution of one iteration.
#[derive(Clone, Debug)]
pub struct IterationState {
    pub domain: MultipatchDomain,
    pub solution: DiscreteSolution,
    /// Elements marked after this solve, before mirroring.
    pub marked: Vec<ElementKey>,
}

#[derive(Clone, Debug)]
pub struct AdaptiveRun {
    pub records: Vec<ConvergenceRecord>,
    pub states: Vec<IterationState>,
}

impl AdaptiveRun {
    pub fn final_state(&self) -> &IterationState {
        self.states.last().expect("at least one solve")
    }
}

/// Where the true error comes from.
#[derive(Clone, Copy)]
pub enum ErrorSource<'a> {
    /// The problem's exact solution, if it has one.
    Exact,
    Reference(&'a Reference),
}

fn element_errors(
    source: ErrorSource<'_>,
    problem: &dyn PhysicsProblem,
    domain: &MultipatchDomain,
    solution: &DiscreteSolution,
) -> Result<Option<Vec<(ElementKey, f64)>>> {
    match source {
        ErrorSource::Reference(r) => r.element_errors(solution, domain).map(Some),
        ErrorSource::Exact => {
            if problem.exact([0.0; 2]).is_none() {
                return Ok(None);
            }
            let f = |x: [f64; 2]| problem.exact(x).unwrap_or(0.0);
            element_errors_exact(solution, domain, &f).map(Some)
        }
    }
}

/// Rebuild each patch space with `levels` levels, keeping its active cells.
pub fn with_level_capacity(domain: &MultipatchDomain, levels: usize) -> Result<MultipatchDomain> {
    domain.map_spaces(|s| {
        if s.max_levels() == levels {
            return Ok(s.clone());
        }
        HierarchicalSpace::from_active_elements(
            s.level(0).space().clone(),
            levels,
            &s.active_element_list(),
        )
        .map(|h| h.with_truncation(s.is_truncated()))
    })
}

fn record(
    iteration: usize,
    domain: &MultipatchDomain,
    solution: &DiscreteSolution,
    errors: Option<&[(ElementKey, f64)]>,
    estimator_total: Option<f64>,
    seconds: f64,
) -> ConvergenceRecord {
    let mut per_level: Vec<usize> = Vec::new();
    for p in &domain.patches {
        for (l, n) in p.space.elements_per_level().into_iter().enumerate() {
            if per_level.len() <= l {
                per_level.resize(l + 1, 0);
            }
            per_level[l] += n;
        }
    }
    while per_level.len() > 1 && per_level.last() == Some(&0) {
        per_level.pop();
    }
    ConvergenceRecord {
        iteration,
        dofs: solution.dofs.num_dofs(),
        elements: domain.num_active_elements(),
        elements_per_level: per_level,
        l2_error: errors.map(|e| e.iter().map(|x| x.1).sum::<f64>().sqrt()),
        estimator_total,
        seconds,
    }
}

/// Solve, estimate or measure, mark and refine until the iteration or level
/// budget is spent or nothing is marked.
pub fn adaptive_loop(
    domain: &MultipatchDomain,
    problem: &dyn PhysicsProblem,
    config: &AdaptiveConfig,
    source: ErrorSource<'_>,
) -> Result<AdaptiveRun> {
    config.validate()?;
    // one spare level for the two-mesh fine space
    let mut domain = with_level_capacity(domain, config.max_levels + 1)?;
    let mut records = Vec::new();
    let mut states = Vec::new();
    for it in 0..=config.max_iterations {
        let start = Instant::now();
        let solution = solve_problem(&domain, problem)?;
        let estimate = match config.marking {
            MarkingMode::Estimator => {
                let mut e = estimate_two_mesh(&domain, problem)?;
                e.indicators.iteration = it;
                Some(e)
            }
            _ => None,
        };
        let errors = element_errors(source, problem, &domain, &solution)?;
        let seconds = if config.wall_time {
            start.elapsed().as_secs_f64()
        } else {
            0.0
        };
        let total = estimate.as_ref().map(|e| e.indicators.total);
        records.push(record(
            it,
            &domain,
            &solution,
            errors.as_deref(),
            total,
            seconds,
        ));
        log::info!(
            "iteration {it}: {} dofs, {} elements, l2 {:?}, estimator {:?}",
            solution.dofs.num_dofs(),
            domain.num_active_elements(),
            records[it].l2_error,
            total
        );

        let marked = if it == config.max_iterations {
            Vec::new()
        } else {
            match config.marking {
                MarkingMode::Estimator => {
                    let ind = &estimate.as_ref().expect("estimator mode").indicators;
                    if ind.total < 1e-14 {
                        Vec::new()
                    } else {
                        mark_doerfler(ind, config.theta)?
                    }
                }
                MarkingMode::TrueError => {
                    let e = errors.as_ref().ok_or_else(|| {
                        Error::config("true-error marking needs an exact solution or a reference")
                    })?;
                    mark_true_error(e, config.tolerance)
                }
                MarkingMode::All => domain
                    .patches
                    .iter()
                    .enumerate()
                    .flat_map(|(p, patch)| {
                        patch
                            .space
                            .elements()
                            .iter()
                            .map(move |el| ElementKey::new(p, el.level, el.index))
                    })
                    .collect(),
            }
        };
        let refinable: Vec<ElementKey> = marked
            .iter()
            .copied()
            .filter(|k| k.level + 1 < config.max_levels)
            .collect();
        states.push(IterationState {
            domain: domain.clone(),
            solution,
            marked,
        });
        if refinable.is_empty() {
            break;
        }
        let mut marks: PatchMarks = vec![BTreeSet::new(); domain.num_patches()];
        for k in &refinable {
            marks[k.patch].insert((k.level, k.index));
        }
        domain = refine_with_growth(&domain, marks, config.max_levels)?;
    }
    Ok(AdaptiveRun { records, states })
}

/// Active cells of `space` touching cell `(l, e)`, found by probing just
/// outside its sides and corners.
fn touching_cells(space: &HierarchicalSpace, l: usize, e: usize) -> Vec<(usize, usize)> {
    let ((u0, u1), (v0, v1)) = space.cell_bounds(l, e);
    let (du, dv) = (1e-9 * (u1 - u0), 1e-9 * (v1 - v0));
    let us = [u0 - du, 0.5 * (u0 + u1), u1 + du];
    let vs = [v0 - dv, 0.5 * (v0 + v1), v1 + dv];
    let mut out = Vec::new();
    for &v in &vs {
        for &u in &us {
            if let Ok(c) = space.locate(u, v) {
                if c != (l, e) {
                    out.push(c);
                }
            }
        }
    }
    out
}

/// Refine the marked cells (mirrored across interfaces). Refining isolated
/// cells need not activate any new function, so while the number of
/// functions does not grow the marks are extended by the touching cells.
fn refine_with_growth(
    domain: &MultipatchDomain,
    mut marks: PatchMarks,
    max_levels: usize,
) -> Result<MultipatchDomain> {
    let count = |d: &MultipatchDomain| {
        d.patches
            .iter()
            .map(|p| p.space.num_functions())
            .sum::<usize>()
    };
    let before = count(domain);
    loop {
        domain.mirror_marks(&mut marks);
        let next = domain.refine(&marks)?;
        if count(&next) > before {
            return Ok(next);
        }
        let mut grown = false;
        for (p, m) in marks.iter_mut().enumerate() {
            let space = &domain.patches[p].space;
            let extra: Vec<(usize, usize)> = m
                .iter()
                .flat_map(|&(l, e)| touching_cells(space, l, e))
                .filter(|&(l, _)| l + 1 < max_levels)
                .collect();
            for c in extra {
                grown |= m.insert(c);
            }
        }
        if !grown {
            if next.num_active_elements() == domain.num_active_elements() {
                return Err(Error::Internal(format!(
                    "refinement of {} marked elements changed nothing",
                    marks.iter().map(|m| m.len()).sum::<usize>()
                )));
            }
            log::warn!("refinement adds no functions within the level limit");
            return Ok(next);
        }
        log::debug!(
            "extending marks to {} elements",
            marks.iter().map(|m| m.len()).sum::<usize>()
        );
    }
}

/// Solve on `steps + 1` successively uniformly refined meshes.
pub fn uniform_refinement(
    domain: &MultipatchDomain,
    problem: &dyn PhysicsProblem,
    steps: usize,
    source: ErrorSource<'_>,
) -> Result<AdaptiveRun> {
    let mut domain = with_level_capacity(domain, steps + 1)?;
    let mut records = Vec::new();
    let mut states = Vec::new();
    for it in 0..=steps {
        let solution = solve_problem(&domain, problem)?;
        let errors = element_errors(source, problem, &domain, &solution)?;
        records.push(record(it, &domain, &solution, errors.as_deref(), None, 0.0));
        states.push(IterationState {
            domain: domain.clone(),
            solution,
            marked: Vec::new(),
        });
        if it < steps {
            domain = domain.map_spaces(|s| s.refine_all())?;
        }
    }
    Ok(AdaptiveRun { records, states })
}

/// Solution after `depth` uniform refinements, for use as a reference.
pub fn reference_solution(
    domain: &MultipatchDomain,
    problem: &dyn PhysicsProblem,
    depth: usize,
) -> Result<Reference> {
    let mut d = with_level_capacity(domain, depth + 1)?;
    for _ in 0..depth {
        d = d.map_spaces(|s| s.refine_all())?;
    }
    let solution = solve_problem(&d, problem)?;
    Ok(Reference {
        domain: d,
        solution,
    })
}
