//! B-spline basics: Cox-de Boor evaluation on a knot vector with a double
//! knot, curve evaluation, knot insertion, the two-scale relation and the
//! per-element Bezier extraction operators.
//!
//! ```text
//! cargo run --example spline_basics
//! ```

use thbez::spline::{bernstein_eval, eval_curve, KnotVector, SplineSpace1D};
use thbez::Result;

pub fn run_example() -> Result<()> {
    let kv = KnotVector::new(vec![0.0, 0.0, 0.0, 0.25, 0.5, 0.75, 0.75, 1.0, 1.0, 1.0], 2)?;
    println!(
        "knots {:?}, degree {}, {} functions",
        kv.knots(),
        kv.degree(),
        kv.num_basis()
    );

    println!("\nnonzero basis values");
    for xi in [0.0, 0.1, 0.3, 0.6, 0.75, 0.9, 1.0] {
        let (span, vals) = kv.eval_basis(xi)?;
        let sum: f64 = vals.iter().sum();
        println!("  xi = {xi:4.2}  span {span}  {vals:.4?}  sum {sum:.15}");
    }

    // the curve interpolates the control point of the C0 function at 0.75
    let points: Vec<[f64; 2]> = (0..kv.num_basis())
        .map(|i| [i as f64, ((i * i) % 5) as f64])
        .collect();
    let at = eval_curve(&kv, &points, 0.75)?;
    println!(
        "\ncurve at the double knot: {at:?} (control point 4 is {:?})",
        points[4]
    );

    let (fine, t) = kv.insert_knots(&[0.1, 0.6])?;
    let fine_points: Vec<[f64; 2]> = (0..t.nrows())
        .map(|j| {
            let mut p = [0.0; 2];
            for (i, q) in points.iter().enumerate() {
                p[0] += t[(j, i)] * q[0];
                p[1] += t[(j, i)] * q[1];
            }
            p
        })
        .collect();
    let mut drift = 0.0f64;
    for k in 0..=50 {
        let xi = k as f64 / 50.0;
        let a = eval_curve(&kv, &points, xi)?;
        let b = eval_curve(&fine, &fine_points, xi)?;
        drift = drift.max((a[0] - b[0]).abs().max((a[1] - b[1]).abs()));
    }
    println!(
        "after inserting 0.1 and 0.6: {} functions, curve moved by {drift:.2e}",
        fine.num_basis()
    );

    let uniform = SplineSpace1D::new(KnotVector::open_uniform(2, 4, 0.0, 1.0)?);
    let s = uniform.subdivision_matrix();
    println!(
        "\ndyadic subdivision matrix ({} x {}), fine x coarse:",
        s.matrix.nrows(),
        s.matrix.ncols()
    );
    for r in 0..s.matrix.nrows() {
        let row: Vec<String> = (0..s.matrix.ncols())
            .map(|c| format!("{:5.2}", s.matrix[(r, c)]))
            .collect();
        println!("  {}", row.join(" "));
    }

    let space = SplineSpace1D::new(kv.clone());
    println!("\nBezier extraction operators");
    for (e, op) in space.bezier_extraction().iter().enumerate() {
        println!(
            "  element {e} {:?}, functions {:?}",
            space.element_bounds(e),
            op.rows
        );
        for r in 0..op.matrix.nrows() {
            let row: Vec<String> = (0..op.matrix.ncols())
                .map(|c| format!("{:6.3}", op.matrix[(r, c)]))
                .collect();
            println!("    {}", row.join(" "));
        }
    }

    // N = C B on one element
    let e = 2;
    let (a, b) = space.element_bounds(e);
    let xi = a + 0.3 * (b - a);
    let bern = bernstein_eval(2, 0.3)?;
    let c = space.element_extraction(e);
    let (span, direct) = kv.eval_basis(xi)?;
    println!("\nelement {e} at xi = {xi}: span {span}");
    for r in 0..3 {
        let via: f64 = (0..3).map(|k| c[(r, k)] * bern[k]).sum();
        println!("  C B = {via:.15}   Cox-de Boor = {:.15}", direct[r]);
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
