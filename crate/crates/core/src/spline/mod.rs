//! Univariate and tensor-product B-splines, Bernstein polynomials, knot
//! insertion and Bezier extraction.

mod bernstein;
mod knots;
mod space;

pub(crate) use bernstein::bernstein_derivs_unchecked;
pub use bernstein::{bernstein_closed_form, bernstein_eval, bernstein_with_derivs};
pub use knots::{KnotVector, MAX_DEGREE};
pub use space::{
    eval_curve, eval_surface, eval_surface_jacobian, ControlNet, ExtractionOperator, Geometry,
    SplineSpace1D, TensorSpace2D,
};
