//! Built-in verification battery behind the `verify` command.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::adaptivity::{uniform_refinement, ErrorSource};
use crate::assembly::{assemble_with, AssemblyRoute, MultipatchDomain};
use crate::error::Result;
use crate::hierarchy::HierarchicalSpace;
use crate::physics::poisson_peak_problem;
use crate::spline::{KnotVector, TensorSpace2D};

/// Outcome of one check.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl std::fmt::Display for CheckResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(
            f,
            "{tag} {:<24} {} ({:.2} s)",
            self.name, self.detail, self.seconds
        )
    }
}

#[derive(Clone, Copy, Debug)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Corrupt one entry of one element operator before the assembly check.
    pub inject_fault: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            seed: 20240601,
            inject_fault: false,
        }
    }
}

/// Biquadratic hierarchy on the unit square with `levels` levels, each
/// level refining a random subset of the active cells of the one below.
pub fn random_hierarchy(rng: &mut impl Rng, levels: usize) -> Result<HierarchicalSpace> {
    let n = rng.gen_range(2..=5);
    let kv = KnotVector::open_uniform(2, n, 0.0, 1.0)?;
    let mut hs = HierarchicalSpace::new(TensorSpace2D::from_knots(kv.clone(), kv), levels)?;
    for l in 0..levels - 1 {
        let cells: Vec<(usize, usize)> = hs
            .active_elements(l)
            .into_iter()
            .filter(|_| rng.gen_bool(0.35))
            .map(|e| (l, e))
            .collect();
        hs = hs.refine_elements(&cells)?;
    }
    Ok(hs)
}

/// The randomized configurations shared by the pointwise checks.
pub fn random_configurations(seed: u64, count: usize) -> Result<Vec<HierarchicalSpace>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|k| random_hierarchy(&mut rng, 2 + k % 3))
        .collect()
}

fn point(rng: &mut impl Rng) -> (f64, f64) {
    (rng.gen_range(0.0..=1.0), rng.gen_range(0.0..=1.0))
}

/// Largest `|sum of active functions - 1|` at `points` random points of each
/// configuration.
pub fn partition_of_unity_error(
    spaces: &[HierarchicalSpace],
    seed: u64,
    points: usize,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for hs in spaces {
        for _ in 0..points {
            let (xi, eta) = point(&mut rng);
            let b = hs.eval_hier_basis(xi, eta)?;
            worst = worst.max((b.values.iter().sum::<f64>() - 1.0).abs());
        }
    }
    Ok(worst)
}

/// Largest deviation in the two-scale relation `N_i = sum_j S[j][i] N^_j`
/// between consecutive levels, in both directions, at random points.
pub fn subdivision_error(spaces: &[HierarchicalSpace], seed: u64, points: usize) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let full = |kv: &KnotVector, x: f64| -> Result<Vec<f64>> {
        let (span, vals) = kv.eval_basis(x)?;
        let mut out = vec![0.0; kv.num_basis()];
        for (k, v) in vals.into_iter().enumerate() {
            out[span - kv.degree() + k] = v;
        }
        Ok(out)
    };
    let mut worst = 0.0f64;
    for hs in spaces {
        for l in 0..hs.max_levels() - 1 {
            let (su, sv) = hs.level(l).subdivision();
            let pairs = [
                (&hs.level(l).space().u, &hs.level(l + 1).space().u, su),
                (&hs.level(l).space().v, &hs.level(l + 1).space().v, sv),
            ];
            for (coarse, fine, s) in pairs {
                for _ in 0..points {
                    let x: f64 = rng.gen_range(0.0..=1.0);
                    let nc = full(coarse.knot_vector(), x)?;
                    let nf = full(fine.knot_vector(), x)?;
                    for (i, c) in nc.iter().enumerate() {
                        let r: f64 = (0..nf.len()).map(|j| s.matrix[(j, i)] * nf[j]).sum();
                        worst = worst.max((r - c).abs());
                    }
                }
            }
        }
    }
    Ok(worst)
}

/// Largest difference between `C^e B` and direct evaluation through the
/// level basis and the multi-level operator, at `points` interior points
/// of every active element.
pub fn extraction_error(spaces: &[HierarchicalSpace], seed: u64, points: usize) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for hs in spaces {
        for el in hs.elements() {
            for _ in 0..points {
                let (s, t) = (rng.gen_range(0.01..0.99), rng.gen_range(0.01..0.99));
                let (xi, eta) = el.to_parametric(s, t);
                let b = hs.eval_hier_basis(xi, eta)?;
                let mut diff: BTreeMap<usize, f64> =
                    b.functions.iter().copied().zip(b.values).collect();
                let (ids, vals) = hs.eval_direct(xi, eta)?;
                for (id, v) in ids.into_iter().zip(vals) {
                    *diff.entry(id).or_default() -= v;
                }
                worst = diff.values().fold(worst, |m, d| m.max(d.abs()));
            }
        }
    }
    Ok(worst)
}

/// Unit square with `n x n` elements whose lower-left cell is refined twice,
/// so three levels are in use.
pub fn corner_refined_square(p: usize, n: usize) -> Result<MultipatchDomain> {
    let d = MultipatchDomain::unit_square(p, n, 3)?;
    let d = d.refine(&vec![[(0, 0)].into_iter().collect()])?;
    d.refine(&vec![[(1, 0)].into_iter().collect()])
}

/// Relative Frobenius distance between the Bezier-route and direct-route
/// stiffness matrices of the peak problem on `domain`.
pub fn assembly_route_error(domain: &MultipatchDomain) -> Result<f64> {
    let prob = poisson_peak_problem();
    let a = assemble_with(domain, &prob, AssemblyRoute::Bezier)?;
    let b = assemble_with(domain, &prob, AssemblyRoute::Direct)?;
    Ok(a.matrix.frobenius_distance(&b.matrix) / b.matrix.frobenius_norm())
}

/// Uniform peak-problem errors on `n0, 2 n0, ..` elements per direction
/// with degree `p`, as `(h, error)` pairs.
pub fn uniform_peak_errors(p: usize, n0: usize, steps: usize) -> Result<Vec<(f64, f64)>> {
    let d = MultipatchDomain::unit_square(p, n0, 1)?;
    let run = uniform_refinement(&d, &poisson_peak_problem(), steps, ErrorSource::Exact)?;
    Ok(run
        .records
        .iter()
        .enumerate()
        .map(|(k, r)| {
            (
                1.0 / (n0 << k) as f64,
                r.l2_error.expect("peak problem has an exact solution"),
            )
        })
        .collect())
}

/// Observed order between consecutive `(h, error)` pairs.
pub fn observed_orders(errors: &[(f64, f64)]) -> Vec<f64> {
    errors
        .windows(2)
        .map(|w| (w[0].1 / w[1].1).ln() / (w[0].0 / w[1].0).ln())
        .collect()
}

fn timed(name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> CheckResult {
    let start = Instant::now();
    let (passed, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
    CheckResult {
        name,
        passed,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    }
}

/// Run every check. Failures are reported in the results, not as errors.
pub fn run_battery(opts: VerifyOptions) -> Vec<CheckResult> {
    let spaces = random_configurations(opts.seed, 6);
    let spaces = match spaces {
        Ok(s) => s,
        Err(e) => {
            return vec![CheckResult {
                name: "configurations",
                passed: false,
                detail: format!("error: {e}"),
                seconds: 0.0,
            }]
        }
    };
    let mut out = Vec::new();
    out.push(timed("partition of unity", || {
        let e = partition_of_unity_error(&spaces, opts.seed + 1, 1000)?;
        Ok((
            e < 1e-12,
            format!(
                "max |sum - 1| = {e:.3e} over {} configurations",
                spaces.len()
            ),
        ))
    }));
    out.push(timed("two-scale relation", || {
        let e = subdivision_error(&spaces, opts.seed + 2, 20)?;
        Ok((e < 1e-12, format!("max deviation = {e:.3e}")))
    }));
    out.push(timed("element extraction", || {
        let e = extraction_error(&spaces, opts.seed + 3, 10)?;
        let n: usize = spaces.iter().map(|s| s.elements().len()).sum();
        Ok((
            e < 1e-12,
            format!("max |C B - direct| = {e:.3e} on {n} elements"),
        ))
    }));
    out.push(timed("assembly equivalence", || {
        let mut d = corner_refined_square(2, 4)?;
        if opts.inject_fault {
            d.patches[0].space.inject_extraction_fault(0, 0.25);
        }
        let e = assembly_route_error(&d)?;
        Ok((e < 1e-10, format!("relative Frobenius distance = {e:.3e}")))
    }));
    out.push(timed("convergence rate", || {
        let errs = uniform_peak_errors(2, 8, 4)?;
        let orders = observed_orders(&errs);
        let last = *orders.last().expect("several meshes");
        let list: Vec<String> = orders.iter().map(|o| format!("{o:.2}")).collect();
        Ok((
            (last - 3.0).abs() <= 0.2,
            format!("orders [{}], expected 3.0 +- 0.2", list.join(", ")),
        ))
    }));
    out
}
