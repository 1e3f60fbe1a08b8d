//! Adaptive refinement of the peak problem driven by the two-mesh error
//! estimator and Dörfler marking, compared with uniform refinement.
//!
//! ```text
//! cargo run --release --example adaptive_estimator
//! ```

use thbez::adaptivity::{
    adaptive_loop, convergence_csv, estimate_two_mesh, mark_doerfler, uniform_refinement,
    AdaptiveConfig, ErrorSource,
};
use thbez::assembly::MultipatchDomain;
use thbez::physics::poisson_peak_problem;
use thbez::Result;

pub fn run_example() -> Result<()> {
    let prob = poisson_peak_problem();
    let start = MultipatchDomain::unit_square(2, 8, 6)?;

    // one estimate by hand
    let est = estimate_two_mesh(&start, &prob)?;
    let marked = mark_doerfler(&est.indicators, 0.5)?;
    println!(
        "8 x 8 mesh: estimator total {:.4e} over {} elements, fine space {} dofs",
        est.indicators.total,
        est.indicators.len(),
        est.error_function.dofs.num_dofs()
    );
    println!(
        "Dörfler marking with theta = 0.5 selects {} elements:",
        marked.len()
    );
    for k in &marked {
        println!("  level {} element {}", k.level, k.index);
    }

    let cfg = AdaptiveConfig {
        theta: 0.5,
        max_iterations: 7,
        max_levels: 6,
        ..Default::default()
    };
    let run = adaptive_loop(&start, &prob, &cfg, ErrorSource::Exact)?;
    println!("\nadaptive run");
    print!("{}", convergence_csv(&run.records));
    println!(
        "\n{:>5} {:>7} {:>13} {:>13} {:>8}  elements per level",
        "iter", "dofs", "L2 error", "estimator", "ratio"
    );
    for r in &run.records {
        let (e, eta) = (r.l2_error.unwrap(), r.estimator_total.unwrap().sqrt());
        println!(
            "{:>5} {:>7} {:>13.4e} {:>13.4e} {:>8.2}  {:?}",
            r.iteration,
            r.dofs,
            e,
            eta,
            eta / e,
            r.elements_per_level
        );
    }

    let uni = uniform_refinement(
        &MultipatchDomain::unit_square(2, 8, 1)?,
        &prob,
        3,
        ErrorSource::Exact,
    )?;
    println!("\nuniform refinement");
    for r in &uni.records {
        println!(
            "{:>5} {:>7} {:>13.4e}",
            r.iteration,
            r.dofs,
            r.l2_error.unwrap()
        );
    }
    let best = run.records.last().unwrap();
    let matched = uni
        .records
        .iter()
        .find(|r| r.l2_error.unwrap() <= best.l2_error.unwrap());
    match matched {
        Some(u) => println!(
            "\nerror {:.2e}: adaptive needs {} dofs, uniform {} dofs",
            best.l2_error.unwrap(),
            best.dofs,
            u.dofs
        ),
        None => println!(
            "\nuniform refinement did not reach {:.2e} within 3 steps",
            best.l2_error.unwrap()
        ),
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
