//! Problem definitions: coefficients, sources, boundary data and known
//! solutions.

mod field;
mod horseshoe;

use std::sync::Arc;

use crate::assembly::MaterialParams;

pub(crate) use field::sample_parametric;
pub use field::{locate_physical, postprocess_b, sample_grid, FieldSample};
pub use horseshoe::{
    horseshoe_domain, horseshoe_domain_from_generator, horseshoe_geometry_text,
    horseshoe_materials, HorseshoeRegion,
};

/// Vacuum permeability in H/m.
pub const MU0: f64 = 4.0e-7 * std::f64::consts::PI;

/// Scalar second-order problem `-div(nu grad u) = f - div m` with Dirichlet
/// data. The weak form is `int nu grad u . grad v = int f v + m . grad v`.
pub trait PhysicsProblem: Send + Sync {
    fn name(&self) -> &str;

    fn diffusion(&self, material: &MaterialParams, x: [f64; 2]) -> f64;

    fn source(&self, material: &MaterialParams, x: [f64; 2]) -> f64;

    /// Vector `m` of the load term `int m . grad v`.
    fn flux_source(&self, _material: &MaterialParams, _x: [f64; 2]) -> [f64; 2] {
        [0.0; 2]
    }

    fn dirichlet(&self, x: [f64; 2]) -> f64;

    fn exact(&self, _x: [f64; 2]) -> Option<f64> {
        None
    }

    fn exact_gradient(&self, _x: [f64; 2]) -> Option<[f64; 2]> {
        None
    }
}

/// `-Δu = 0` with `u = 0` on the boundary.
#[derive(Clone, Copy, Debug, Default)]
pub struct Laplace;

impl PhysicsProblem for Laplace {
    fn name(&self) -> &str {
        "laplace"
    }

    fn diffusion(&self, _: &MaterialParams, _: [f64; 2]) -> f64 {
        1.0
    }

    fn source(&self, _: &MaterialParams, _: [f64; 2]) -> f64 {
        0.0
    }

    fn dirichlet(&self, _: [f64; 2]) -> f64 {
        0.0
    }

    fn exact(&self, _: [f64; 2]) -> Option<f64> {
        Some(0.0)
    }

    fn exact_gradient(&self, _: [f64; 2]) -> Option<[f64; 2]> {
        Some([0.0; 2])
    }
}

type ScalarFn = Arc<dyn Fn([f64; 2]) -> f64 + Send + Sync>;
type VectorFn = Arc<dyn Fn([f64; 2]) -> [f64; 2] + Send + Sync>;

/// Poisson problem `-Δu = f` built from a known solution.
#[derive(Clone)]
pub struct FunctionProblem {
    name: String,
    u: ScalarFn,
    grad: VectorFn,
    source: ScalarFn,
}

impl FunctionProblem {
    /// From `u`, its gradient and its Laplacian; the source is `-Δu` and
    /// the Dirichlet data is `u`.
    pub fn from_exact(
        name: impl Into<String>,
        u: impl Fn([f64; 2]) -> f64 + Send + Sync + 'static,
        grad: impl Fn([f64; 2]) -> [f64; 2] + Send + Sync + 'static,
        laplacian: impl Fn([f64; 2]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            u: Arc::new(u),
            grad: Arc::new(grad),
            source: Arc::new(move |x| -laplacian(x)),
        }
    }
}

impl std::fmt::Debug for FunctionProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FunctionProblem")
            .field("name", &self.name)
            .finish()
    }
}

impl PhysicsProblem for FunctionProblem {
    fn name(&self) -> &str {
        &self.name
    }

    fn diffusion(&self, _: &MaterialParams, _: [f64; 2]) -> f64 {
        1.0
    }

    fn source(&self, _: &MaterialParams, x: [f64; 2]) -> f64 {
        (self.source)(x)
    }

    fn dirichlet(&self, x: [f64; 2]) -> f64 {
        (self.u)(x)
    }

    fn exact(&self, x: [f64; 2]) -> Option<f64> {
        Some((self.u)(x))
    }

    fn exact_gradient(&self, x: [f64; 2]) -> Option<[f64; 2]> {
        Some((self.grad)(x))
    }
}

/// Gaussian peak `u = exp(-α r²)` centred in the unit square.
#[derive(Clone, Copy, Debug)]
pub struct PoissonPeak {
    pub alpha: f64,
    pub center: [f64; 2],
}

impl Default for PoissonPeak {
    fn default() -> Self {
        Self {
            alpha: 100.0,
            center: [0.5, 0.5],
        }
    }
}

/// The peak benchmark with `α = 100`.
pub fn poisson_peak_problem() -> PoissonPeak {
    PoissonPeak::default()
}

impl PoissonPeak {
    fn r2(&self, x: [f64; 2]) -> f64 {
        (x[0] - self.center[0]).powi(2) + (x[1] - self.center[1]).powi(2)
    }

    pub fn value(&self, x: [f64; 2]) -> f64 {
        (-self.alpha * self.r2(x)).exp()
    }

    pub fn gradient(&self, x: [f64; 2]) -> [f64; 2] {
        let u = self.value(x);
        let a = self.alpha;
        [
            -2.0 * a * (x[0] - self.center[0]) * u,
            -2.0 * a * (x[1] - self.center[1]) * u,
        ]
    }

    /// `-Δu = (4α - 4α² r²) u`.
    pub fn minus_laplacian(&self, x: [f64; 2]) -> f64 {
        let a = self.alpha;
        (4.0 * a - 4.0 * a * a * self.r2(x)) * self.value(x)
    }
}

impl PhysicsProblem for PoissonPeak {
    fn name(&self) -> &str {
        "poisson_peak"
    }

    fn diffusion(&self, _: &MaterialParams, _: [f64; 2]) -> f64 {
        1.0
    }

    fn source(&self, _: &MaterialParams, x: [f64; 2]) -> f64 {
        self.minus_laplacian(x)
    }

    fn dirichlet(&self, x: [f64; 2]) -> f64 {
        self.value(x)
    }

    fn exact(&self, x: [f64; 2]) -> Option<f64> {
        Some(self.value(x))
    }

    fn exact_gradient(&self, x: [f64; 2]) -> Option<[f64; 2]> {
        Some(self.gradient(x))
    }
}

/// Scalar magnetostatics for the out-of-plane vector potential `A_z`:
///
/// `∂x(ν(-∂x A - Br_y)) - ∂y(ν(∂y A - Br_x)) = J_z`, `ν = 1/(μ0 μr)`,
///
/// with weak form `int ν grad A . grad v = int J_z v + ν (Br_x ∂y v - Br_y ∂x v)`.
#[derive(Clone, Default)]
pub struct Magnetostatic {
    boundary: Option<ScalarFn>,
}

impl Magnetostatic {
    /// Flux wall: `A_z = 0` on the outer boundary.
    pub fn flux_wall() -> Self {
        Self::default()
    }

    /// Prescribed `A_z` on the outer boundary.
    pub fn with_boundary(g: impl Fn([f64; 2]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            boundary: Some(Arc::new(g)),
        }
    }
}

impl std::fmt::Debug for Magnetostatic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Magnetostatic")
            .field("boundary", &self.boundary.as_ref().map(|_| "custom"))
            .finish()
    }
}

/// Integrand values of the magnetostatic weak form at one point: the
/// bilinear term for a trial/test gradient pair and the load for a test
/// value and gradient.
pub fn magnetostatic_weak_form(
    material: &MaterialParams,
    grad_trial: [f64; 2],
    test: f64,
    grad_test: [f64; 2],
) -> (f64, f64) {
    let nu = 1.0 / (MU0 * material.mu_r);
    let a = nu * (grad_trial[0] * grad_test[0] + grad_trial[1] * grad_test[1]);
    let l =
        material.jz * test + nu * (material.br[0] * grad_test[1] - material.br[1] * grad_test[0]);
    (a, l)
}

impl PhysicsProblem for Magnetostatic {
    fn name(&self) -> &str {
        "magnetostatic"
    }

    fn diffusion(&self, material: &MaterialParams, _: [f64; 2]) -> f64 {
        1.0 / (MU0 * material.mu_r)
    }

    fn source(&self, material: &MaterialParams, _: [f64; 2]) -> f64 {
        material.jz
    }

    fn flux_source(&self, material: &MaterialParams, _: [f64; 2]) -> [f64; 2] {
        let nu = 1.0 / (MU0 * material.mu_r);
        [-nu * material.br[1], nu * material.br[0]]
    }

    fn dirichlet(&self, x: [f64; 2]) -> f64 {
        self.boundary.as_ref().map_or(0.0, |g| g(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn peak_values() {
        let p = poisson_peak_problem();
        assert_eq!(p.value([0.5, 0.5]), 1.0);
        assert!((p.minus_laplacian([0.5, 0.5]) - 400.0).abs() < 1e-12);
        for &(x, y) in &[(0.1, 0.7), (0.33, 0.2), (0.9, 0.95)] {
            let u = p.value([x, y]);
            assert!((u - p.value([y, x])).abs() < 1e-15);
            assert!((u - p.value([1.0 - x, y])).abs() < 1e-15);
        }
    }

    #[test]
    fn peak_laplacian_matches_differences() {
        let p = poisson_peak_problem();
        let h = 1e-4;
        let x = [0.53, 0.46];
        let lap = (p.value([x[0] + h, x[1]])
            + p.value([x[0] - h, x[1]])
            + p.value([x[0], x[1] + h])
            + p.value([x[0], x[1] - h])
            - 4.0 * p.value(x))
            / (h * h);
        assert!((lap + p.minus_laplacian(x)).abs() < 1e-4 * p.minus_laplacian(x).abs());
    }

    #[test]
    fn weak_form_matches_problem_terms() {
        let m = MaterialParams {
            mu_r: 2.0,
            br: [0.3, -1.1],
            jz: 5.0,
        };
        let prob = Magnetostatic::flux_wall();
        let (gt, v, gv) = ([0.2, -0.4], 0.7, [1.5, 0.25]);
        let (a, l) = magnetostatic_weak_form(&m, gt, v, gv);
        let nu = prob.diffusion(&m, [0.0; 2]);
        assert!((a - nu * (gt[0] * gv[0] + gt[1] * gv[1])).abs() < 1e-9);
        let ms = prob.flux_source(&m, [0.0; 2]);
        let want = prob.source(&m, [0.0; 2]) * v + ms[0] * gv[0] + ms[1] * gv[1];
        assert!((l - want).abs() < 1e-9 * want.abs());
    }
}
