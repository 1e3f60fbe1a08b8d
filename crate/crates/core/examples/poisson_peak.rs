//! Poisson problem with a Gaussian peak on the unit square: assemble with
//! both element routes, solve, and tabulate the L2 error under uniform
//! refinement for degrees 1 to 3.
//!
//! ```text
//! cargo run --release --example poisson_peak
//! ```

use thbez::assembly::{assemble_with, solve_problem, AssemblyRoute, MultipatchDomain};
use thbez::physics::poisson_peak_problem;
use thbez::verify::{corner_refined_square, observed_orders, uniform_peak_errors};
use thbez::Result;

pub fn run_example() -> Result<()> {
    let prob = poisson_peak_problem();

    let mesh = corner_refined_square(2, 4)?;
    let bezier = assemble_with(&mesh, &prob, AssemblyRoute::Bezier)?;
    let direct = assemble_with(&mesh, &prob, AssemblyRoute::Direct)?;
    println!(
        "corner-refined mesh: {} dofs, {} nonzeros, {} boundary dofs",
        bezier.dofs.num_dofs(),
        bezier.matrix.nnz(),
        bezier.dirichlet.len()
    );
    println!(
        "  Bezier vs direct stiffness: relative Frobenius distance {:.2e}, asymmetry {:.2e}",
        bezier.matrix.frobenius_distance(&direct.matrix) / direct.matrix.frobenius_norm(),
        bezier.matrix.asymmetry()
    );

    let d = MultipatchDomain::unit_square(2, 16, 1)?;
    let u = solve_problem(&d, &prob)?;
    let (value, grad, x) = u.eval(&d, 0, 0.5, 0.5)?;
    println!(
        "\n16 x 16: u_h{x:?} = {value:.6} (exact 1), |grad| {:.2e}",
        grad[0].hypot(grad[1])
    );

    for (p, steps) in [(1, 5), (2, 4), (3, 3)] {
        let errs = uniform_peak_errors(p, 8, steps)?;
        let orders = observed_orders(&errs);
        println!("\ndegree {p}: {:>6} {:>14} {:>7}", "h", "L2 error", "order");
        for (k, (h, e)) in errs.iter().enumerate() {
            let o = if k == 0 {
                String::from("-")
            } else {
                format!("{:.2}", orders[k - 1])
            };
            println!("          {h:>6.4} {e:>14.6e} {o:>7}");
        }
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
