//! 2D magnetostatics of a permanent-magnet horseshoe above an iron sheet:
//! solve for the vector potential with a flux wall, refine adaptively, and
//! report the flux density in each region.
//!
//! ```text
//! cargo run --release --example horseshoe_magnet
//! ```

use std::collections::BTreeMap;

use thbez::adaptivity::{adaptive_loop, AdaptiveConfig, ErrorSource};
use thbez::physics::{
    horseshoe_domain, postprocess_b, sample_grid, HorseshoeRegion, Magnetostatic,
};
use thbez::Result;

pub fn run_example() -> Result<()> {
    let domain = horseshoe_domain(4)?;
    println!(
        "{} patches, {} elements, {} interfaces",
        domain.num_patches(),
        domain.num_active_elements(),
        domain.interfaces.len()
    );
    let prob = Magnetostatic::flux_wall();
    let cfg = AdaptiveConfig {
        max_iterations: 3,
        max_levels: 4,
        ..Default::default()
    };
    let run = adaptive_loop(&domain, &prob, &cfg, ErrorSource::Exact)?;
    for r in &run.records {
        println!(
            "iteration {}: {} dofs, {} elements {:?}, estimator {:.3e}",
            r.iteration,
            r.dofs,
            r.elements,
            r.elements_per_level,
            r.estimator_total.unwrap()
        );
    }

    let last = run.final_state();
    let samples = postprocess_b(
        &last.solution,
        &last.domain,
        &sample_grid(&last.domain, 81, 71),
    )?;
    let mut by_region: BTreeMap<String, (usize, f64, [f64; 2])> = BTreeMap::new();
    for s in &samples {
        let region = format!(
            "{:?}",
            HorseshoeRegion::classify(s.x).expect("inside the box")
        );
        let e = by_region.entry(region).or_insert((0, 0.0, [0.0; 2]));
        e.0 += 1;
        if s.b_magnitude() > e.1 {
            e.1 = s.b_magnitude();
            e.2 = s.x;
        }
    }
    println!("\nlargest |B| per region on an 81 x 71 grid");
    for (region, (n, b, x)) in &by_region {
        println!(
            "  {region:<7} {n:>5} points  max |B| = {b:.3} T at ({:+.4}, {:+.4})",
            x[0], x[1]
        );
    }

    println!("\nB along the mid-height of the gap (y = -0.0025)");
    let line: Vec<[f64; 2]> = (0..=8)
        .map(|k| [-0.04 + 0.01 * k as f64, -0.0025])
        .collect();
    for s in postprocess_b(&last.solution, &last.domain, &line)? {
        println!(
            "  x = {:+.3}  A_z = {:+.4e}  B = ({:+.4}, {:+.4})",
            s.x[0], s.az, s.b[0], s.b[1]
        );
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
