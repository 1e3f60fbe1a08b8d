//! Every example runs to completion.

#[path = "../examples/adaptive_estimator.rs"]
mod adaptive_estimator;
#[path = "../examples/geometry_io.rs"]
mod geometry_io;
#[path = "../examples/horseshoe_magnet.rs"]
mod horseshoe_magnet;
#[path = "../examples/poisson_peak.rs"]
mod poisson_peak;
#[path = "../examples/spline_basics.rs"]
mod spline_basics;
#[path = "../examples/thb_refinement.rs"]
mod thb_refinement;

#[test]
fn spline_basics_runs() {
    spline_basics::run_example().unwrap();
}

#[test]
fn thb_refinement_runs() {
    thb_refinement::run_example().unwrap();
}

#[test]
fn poisson_peak_runs() {
    poisson_peak::run_example().unwrap();
}

#[test]
fn adaptive_estimator_runs() {
    adaptive_estimator::run_example().unwrap();
}

#[test]
fn horseshoe_magnet_runs() {
    horseshoe_magnet::run_example().unwrap();
}

#[test]
fn geometry_io_runs() {
    geometry_io::run_example().unwrap();
}
