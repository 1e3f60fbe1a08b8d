//! Truncated hierarchical B-splines: refine a corner of a biquadratic
//! space twice, list the active functions per level, and check that the
//! element operators `C^e` reproduce direct hierarchical evaluation and a
//! partition of unity.
//!
//! ```text
//! cargo run --example thb_refinement
//! ```

use thbez::hierarchy::HierarchicalSpace;
use thbez::spline::{KnotVector, TensorSpace2D};
use thbez::Result;

fn describe(hs: &HierarchicalSpace) {
    println!(
        "  {} functions, {} active elements, elements per level {:?}",
        hs.num_functions(),
        hs.num_active_elements(),
        hs.elements_per_level()
    );
    for l in 0..hs.num_levels_in_use() {
        println!(
            "    level {l}: active functions {:?}",
            hs.active_functions(l)
        );
    }
}

pub fn run_example() -> Result<()> {
    let kv = KnotVector::open_uniform(2, 4, 0.0, 1.0)?;
    let hs = HierarchicalSpace::new(TensorSpace2D::from_knots(kv.clone(), kv), 3)?;
    println!("4 x 4 biquadratic base space");
    describe(&hs);

    // lower-left 2 x 2 block of level 0, then the lower-left 2 x 2 block of level 1
    let hs = hs.refine_elements(&[(0, 0), (0, 1), (0, 4), (0, 5)])?;
    println!("\nrefined the lower-left quarter");
    describe(&hs);
    let hs = hs.refine_elements(&[(1, 0), (1, 1), (1, 8), (1, 9)])?;
    println!("\nrefined its lower-left quarter again");
    describe(&hs);

    let k = hs.element_position(0, 2).expect("active");
    let el = &hs.elements()[k];
    println!("\nC^e of level-0 element 2, functions {:?}:", el.functions);
    let c = &el.extraction.matrix;
    for r in 0..c.nrows() {
        let row: Vec<String> = (0..c.ncols())
            .map(|j| format!("{:6.3}", c[(r, j)]))
            .collect();
        println!("  {}", row.join(" "));
    }

    let plain = hs.with_truncation(false);
    let mut worst_thb = 0.0f64;
    let mut worst_hb = 0.0f64;
    let mut worst_route = 0.0f64;
    for j in 0..=40 {
        for i in 0..=40 {
            let (xi, eta) = (i as f64 / 40.0, j as f64 / 40.0);
            let b = hs.eval_hier_basis(xi, eta)?;
            worst_thb = worst_thb.max((b.values.iter().sum::<f64>() - 1.0).abs());
            let hb = plain.eval_hier_basis(xi, eta)?;
            worst_hb = worst_hb.max((hb.values.iter().sum::<f64>() - 1.0).abs());
            let (ids, vals) = hs.eval_direct(xi, eta)?;
            for (id, v) in ids.iter().zip(&vals) {
                let via = b
                    .functions
                    .iter()
                    .position(|f| f == id)
                    .map_or(0.0, |p| b.values[p]);
                worst_route = worst_route.max((via - v).abs());
            }
        }
    }
    println!("\non a 41 x 41 grid:");
    println!("  truncated basis:     max |sum - 1| = {worst_thb:.2e}");
    println!("  without truncation:  max |sum - 1| = {worst_hb:.2e}");
    println!("  C^e B against direct evaluation: {worst_route:.2e}");

    let m = hs.global_multilevel_operator(2)?;
    println!(
        "\nmulti-level operator to level 2: {} x {}, column sums in [{:.3}, {:.3}]",
        m.matrix.nrows(),
        m.matrix.ncols(),
        m.column_sums()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min),
        m.column_sums()
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    );
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
