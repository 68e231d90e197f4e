//! The coefficient functionals `f`, `sigma`, `g` of the neutral equation and
//! their Nemytskii evaluation on the physical grid.
//!
//! `f` and `sigma` act pointwise on the delayed field `u(t - h, x)`; the
//! neutral term is `g(phi)(x) = int_0^1 b(x, phi(theta_g, y), y) dy`.

pub mod checks;
mod functions;

pub use functions::{junction, Kernel, KernelFn, Modulus, ScalarFn};

use crate::error::{Error, Result};
use crate::grid::PhysicalGrid;
use crate::segment::Segment;
use crate::spectral::SpectralOperator;

pub const DEFAULT_P: f64 = 3.0;
pub const DEFAULT_MG: f64 = 0.5;
pub const DEFAULT_ALPHA: f64 = 0.5;
pub const DEFAULT_GROWTH_K: f64 = 1.0;
/// Scale `c` of the built-in kernel `c sin(pi x) tanh(z)`.
pub const DEFAULT_KERNEL_SCALE: f64 = 0.2;

#[derive(Debug, Clone)]
pub struct CoefficientSet {
    pub f: ScalarFn,
    pub sigma: ScalarFn,
    pub kernel: Kernel,
    /// Point of the window read by the neutral term; `None` means `-h`.
    pub g_theta: Option<f64>,
    pub modulus: Modulus,
    pub growth_k: f64,
    pub lipschitz_mg: f64,
    /// Smoothness index of the space `H_alpha` the neutral term maps into.
    pub alpha: f64,
    pub p: f64,
    /// Number of quadrature intervals `P`; `None` means `4 N`.
    pub grid_points: Option<usize>,
}

impl CoefficientSet {
    /// The built-in non-Lipschitz example: `f = sigma` the log-type
    /// nonlinearity, `g` the bounded separable kernel.
    pub fn builtin(p: f64) -> Self {
        CoefficientSet {
            f: ScalarFn::PaperF { p },
            sigma: ScalarFn::PaperF { p },
            kernel: Kernel::Separable { c: DEFAULT_KERNEL_SCALE, z: ScalarFn::Tanh },
            g_theta: None,
            modulus: Modulus::PaperN,
            growth_k: DEFAULT_GROWTH_K,
            lipschitz_mg: DEFAULT_MG,
            alpha: DEFAULT_ALPHA,
            p,
            grid_points: None,
        }
    }

    /// `f = sigma = g = 0`: the linear heat equation.
    pub fn zero() -> Self {
        CoefficientSet {
            f: ScalarFn::Zero,
            sigma: ScalarFn::Zero,
            kernel: Kernel::Zero,
            ..CoefficientSet::builtin(DEFAULT_P)
        }
    }

    /// Range checks on the scalar constants.
    pub fn validate(&self) -> Result<()> {
        if !(self.p > 2.0 && self.p.is_finite()) {
            return Err(Error::Config(format!("coefficients.p must exceed 2, got {}", self.p)));
        }
        if !(self.lipschitz_mg > 0.0 && self.lipschitz_mg < 1.0) {
            return Err(Error::Config(format!(
                "coefficients.Mg must lie in (0, 1), got {}",
                self.lipschitz_mg
            )));
        }
        if !(2.0 * self.lipschitz_mg * self.lipschitz_mg < 1.0) {
            return Err(Error::Config(format!(
                "coefficients.Mg = {} violates 2 Mg^2 meas(D)^2 < 1",
                self.lipschitz_mg
            )));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Config(format!("coefficients.alpha must lie in (0, 1], got {}", self.alpha)));
        }
        if !(self.growth_k > 0.0 && self.growth_k.is_finite()) {
            return Err(Error::Config(format!("coefficients.K must be positive, got {}", self.growth_k)));
        }
        if let Some(0) = self.grid_points {
            return Err(Error::Config("coefficients.grid_points must be positive".into()));
        }
        Ok(())
    }

    /// `theta_g` for a window of length `h`.
    pub fn g_read_point(&self, h: f64) -> f64 {
        self.g_theta.unwrap_or(-h)
    }

    /// Quadrature grid for an operator with `op.n_modes()` modes.
    pub fn grid(&self, op: &SpectralOperator) -> PhysicalGrid {
        PhysicalGrid::new(op, self.grid_points.unwrap_or(4 * op.n_modes()))
    }
}

/// Noise multiplier `sigma(u(t - h, x))` on the physical grid.
#[derive(Debug, Clone, PartialEq)]
pub enum Multiplier {
    Constant(f64),
    Field(Vec<f64>),
}

impl Multiplier {
    pub fn is_zero(&self) -> bool {
        match self {
            Multiplier::Constant(c) => *c == 0.0,
            Multiplier::Field(v) => v.iter().all(|x| *x == 0.0),
        }
    }
}

/// Value of the neutral term with its `H_alpha` norm.
#[derive(Debug, Clone, PartialEq)]
pub struct GValue {
    pub coeffs: Vec<f64>,
    pub norm_alpha: f64,
}

/// Grid-sized scratch space for repeated Nemytskii evaluations.
#[derive(Debug, Clone)]
pub struct Workspace {
    field: Vec<f64>,
    aux: Vec<f64>,
}

impl Workspace {
    pub fn new(grid: &PhysicalGrid) -> Self {
        Workspace { field: vec![0.0; grid.len()], aux: vec![0.0; grid.len()] }
    }
}

/// Mode coefficients of the pointwise map `x -> s(u(x))`.
pub fn nemytskii_into(s: &ScalarFn, u: &[f64], grid: &PhysicalGrid, ws: &mut Workspace, out: &mut [f64]) {
    match *s {
        ScalarFn::Zero => out.iter_mut().for_each(|v| *v = 0.0),
        ScalarFn::Identity => out.copy_from_slice(u),
        ScalarFn::Linear(slope) => {
            for (o, v) in out.iter_mut().zip(u) {
                *o = slope * v;
            }
        }
        _ => {
            grid.synthesize_into(u, &mut ws.field);
            ws.field.iter_mut().for_each(|v| *v = s.eval(*v));
            grid.project_into(&ws.field, out);
        }
    }
}

/// Physical-grid multiplier field of `sigma(u)`.
pub fn multiplier(sigma: &ScalarFn, u: &[f64], grid: &PhysicalGrid) -> Multiplier {
    match sigma.as_constant() {
        Some(c) => Multiplier::Constant(c),
        None => {
            let mut field = vec![0.0; grid.len()];
            grid.synthesize_into(u, &mut field);
            field.iter_mut().for_each(|v| *v = sigma.eval(*v));
            Multiplier::Field(field)
        }
    }
}

/// Mode coefficients of `x -> int b(x, z(y), y) dy` where `z` has coefficients `read`.
pub fn kernel_into(kernel: &Kernel, read: &[f64], grid: &PhysicalGrid, ws: &mut Workspace, out: &mut [f64]) {
    match kernel {
        Kernel::Zero => out.iter_mut().for_each(|v| *v = 0.0),
        Kernel::Separable { c, z } => {
            grid.synthesize_into(read, &mut ws.field);
            let s: f64 = ws.field.iter().zip(grid.weights()).map(|(v, w)| w * z.eval(*v)).sum();
            for (o, e) in out.iter_mut().zip(grid.first_sine()) {
                *o = c * s * e;
            }
        }
        Kernel::General(b) => {
            grid.synthesize_into(read, &mut ws.field);
            let nodes = grid.nodes();
            let weights = grid.weights();
            for (i, &x) in nodes.iter().enumerate() {
                ws.aux[i] = ws
                    .field
                    .iter()
                    .zip(nodes)
                    .zip(weights)
                    .map(|((&z, &y), &w)| w * b(x, z, y))
                    .sum();
            }
            grid.project_into(&ws.aux, out);
        }
    }
}

fn check_aligned(seg: &Segment, grid: &PhysicalGrid) -> Result<()> {
    if seg.n_modes() != grid.n_modes() {
        return Err(Error::shape(grid.n_modes(), seg.n_modes()));
    }
    Ok(())
}

/// `f(u(t - h))` in mode coordinates.
pub fn eval_f(cs: &CoefficientSet, seg: &Segment, grid: &PhysicalGrid) -> Result<Vec<f64>> {
    check_aligned(seg, grid)?;
    let mut out = vec![0.0; grid.n_modes()];
    nemytskii_into(&cs.f, seg.oldest(), grid, &mut Workspace::new(grid), &mut out);
    Ok(out)
}

/// `sigma(u(t - h, .))` as a multiplier on the physical grid.
pub fn eval_sigma(cs: &CoefficientSet, seg: &Segment, grid: &PhysicalGrid) -> Result<Multiplier> {
    check_aligned(seg, grid)?;
    Ok(multiplier(&cs.sigma, seg.oldest(), grid))
}

/// `g(u_t)` in mode coordinates together with its `H_alpha` norm.
pub fn eval_g(cs: &CoefficientSet, seg: &Segment, grid: &PhysicalGrid, op: &SpectralOperator) -> Result<GValue> {
    check_aligned(seg, grid)?;
    let read = seg.evaluate(cs.g_read_point(seg.h()))?;
    let mut coeffs = vec![0.0; grid.n_modes()];
    kernel_into(&cs.kernel, &read, grid, &mut Workspace::new(grid), &mut coeffs);
    let norm_alpha = op.fractional_norm(cs.alpha, &coeffs)?;
    Ok(GValue { coeffs, norm_alpha })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{assemble_operator, OperatorDescriptor};
    use std::f64::consts::{PI, SQRT_2};
    use std::sync::Arc;

    fn setup(n: usize) -> (SpectralOperator, PhysicalGrid) {
        let op = assemble_operator(&OperatorDescriptor::laplacian(1.0), n).unwrap();
        let grid = PhysicalGrid::new(&op, 4 * n);
        (op, grid)
    }

    fn profile_segment(coeffs: &[f64]) -> Segment {
        Segment::constant(0.1, 0.025, coeffs).unwrap()
    }

    #[test]
    fn zero_f_gives_zero() {
        let (_, grid) = setup(6);
        let cs = CoefficientSet::zero();
        let seg = profile_segment(&[1.0, -2.0, 0.5, 0.0, 0.3, 0.1]);
        assert!(eval_f(&cs, &seg, &grid).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn identity_f_reproduces_delayed_state() {
        let (_, grid) = setup(6);
        let cs = CoefficientSet { f: ScalarFn::Identity, ..CoefficientSet::zero() };
        let values: Vec<Vec<f64>> = (0..5).map(|j| vec![j as f64, 1.0, -0.5, 0.2, 0.0, 0.7]).collect();
        let seg = Segment::from_values(0.1, 0.025, values).unwrap();
        let out = eval_f(&cs, &seg, &grid).unwrap();
        for (a, b) in out.iter().zip(seg.evaluate(-0.1).unwrap()) {
            assert!((a - b).abs() <= 1e-10);
        }
        // the generic quadrature path agrees as well
        let mut ws = Workspace::new(&grid);
        let mut generic = vec![0.0; 6];
        grid.synthesize_into(seg.oldest(), &mut ws.field);
        grid.project_into(&ws.field.clone(), &mut generic);
        for (a, b) in out.iter().zip(&generic) {
            assert!((a - b).abs() <= 1e-10);
        }
    }

    #[test]
    fn square_f_against_fine_quadrature() {
        let n = 4;
        let (op, grid) = setup(n);
        let c = 0.7;
        let cs = CoefficientSet { f: ScalarFn::Square, ..CoefficientSet::zero() };
        let mut e1 = vec![0.0; n];
        e1[0] = c;
        let seg = profile_segment(&e1);
        // reference: composite Simpson with 2^14 intervals on (c psi_1)^2 psi_k
        let fine = PhysicalGrid::new(&op, 1 << 14);
        let reference = fine.project_fn(|x| (c * SQRT_2 * (PI * x).sin()).powi(2));
        assert!((reference[0] - c * c * 8.0 * SQRT_2 / (3.0 * PI)).abs() < 1e-14);
        let dense = eval_f(&cs, &seg, &PhysicalGrid::new(&op, 256)).unwrap();
        let coarse = eval_f(&cs, &seg, &grid).unwrap();
        for k in 0..n {
            assert!((dense[k] - reference[k]).abs() < 1e-8, "{k}: {} vs {}", dense[k], reference[k]);
            assert!((coarse[k] - reference[k]).abs() < 1e-3, "{k}: {}", coarse[k] - reference[k]);
        }
        // even modes vanish by symmetry
        assert!(dense[1].abs() < 1e-14 && coarse[1].abs() < 1e-14);
    }

    #[test]
    fn sigma_multipliers() {
        let (_, grid) = setup(4);
        let seg = profile_segment(&[0.3, 0.0, -0.2, 0.1]);
        let one = CoefficientSet { sigma: ScalarFn::Constant(1.0), ..CoefficientSet::zero() };
        assert_eq!(eval_sigma(&one, &seg, &grid).unwrap(), Multiplier::Constant(1.0));
        assert!(eval_sigma(&CoefficientSet::zero(), &seg, &grid).unwrap().is_zero());

        let cs = CoefficientSet::builtin(3.0);
        let fmax = junction() * 6f64.powf(1.0 / 3.0);
        let big = profile_segment(&[5.0, -3.0, 2.0, 1.0]);
        for s in [&seg, &big] {
            let Multiplier::Field(m) = eval_sigma(&cs, s, &grid).unwrap() else { panic!() };
            assert!(m.iter().all(|v| (0.0..=fmax).contains(v)));
        }
    }

    #[test]
    fn linear_kernels_on_first_sine() {
        let n = 5;
        let (op, grid) = setup(n);
        let c = 1.3;
        // phi = c sin(pi y) = (c / sqrt 2) psi_1
        let mut read = vec![0.0; n];
        read[0] = c / SQRT_2;
        let seg = profile_segment(&read);

        // b = sin(pi x) sin(pi y) z: g = c (int sin^2) sin(pi x) = (c / 2) sin(pi x)
        let weighted = CoefficientSet {
            kernel: Kernel::General(Arc::new(|x: f64, z: f64, y: f64| (PI * x).sin() * (PI * y).sin() * z)),
            ..CoefficientSet::zero()
        };
        let g = eval_g(&weighted, &seg, &grid, &op).unwrap();
        assert!((g.coeffs[0] - c / (2.0 * SQRT_2)).abs() < 1e-14, "{:?}", g);
        assert!(g.coeffs[1..].iter().all(|v| v.abs() < 1e-14));
        assert!((g.norm_alpha - PI * c / (2.0 * SQRT_2)).abs() < 1e-13);

        // b = sin(pi x) z: g = (int c sin(pi y) dy) sin(pi x) = (2 c / pi) sin(pi x)
        let separable = CoefficientSet {
            kernel: Kernel::Separable { c: 1.0, z: ScalarFn::Identity },
            ..CoefficientSet::zero()
        };
        let gs = eval_g(&separable, &seg, &grid, &op).unwrap();
        let exact = 2.0 * c / PI / SQRT_2;
        assert!((gs.coeffs[0] - exact).abs() < 1e-5 * exact);
        let general = CoefficientSet {
            kernel: Kernel::General(Arc::new(|x: f64, z: f64, _y: f64| (PI * x).sin() * z)),
            ..CoefficientSet::zero()
        };
        let gg = eval_g(&general, &seg, &grid, &op).unwrap();
        for (a, b) in gg.coeffs.iter().zip(&gs.coeffs) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn tanh_kernel_on_zero_segment() {
        let (op, grid) = setup(4);
        let cs = CoefficientSet::builtin(3.0);
        let g = eval_g(&cs, &Segment::zeros(0.1, 0.025, 4).unwrap(), &grid, &op).unwrap();
        assert!(g.coeffs.iter().all(|v| *v == 0.0));
        assert!(Kernel::Zero.is_zero());
    }

    #[test]
    fn evaluation_is_deterministic() {
        let (op, grid) = setup(8);
        let cs = CoefficientSet::builtin(3.0);
        let seg = profile_segment(&[0.05, -0.02, 0.01, 0.3, 0.0, -0.1, 0.02, 0.001]);
        let a = (eval_f(&cs, &seg, &grid).unwrap(), eval_g(&cs, &seg, &grid, &op).unwrap());
        let b = (eval_f(&cs, &seg, &grid).unwrap(), eval_g(&cs, &seg, &grid, &op).unwrap());
        assert!(a.0.iter().zip(&b.0).all(|(x, y)| x.to_bits() == y.to_bits()));
        assert!(a.1.coeffs.iter().zip(&b.1.coeffs).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn validation() {
        assert!(CoefficientSet::builtin(3.0).validate().is_ok());
        let bad = CoefficientSet { lipschitz_mg: 1.2, ..CoefficientSet::builtin(3.0) };
        assert!(bad.validate().unwrap_err().to_string().contains("coefficients.Mg"));
        let corollary = CoefficientSet { lipschitz_mg: 0.75, ..CoefficientSet::builtin(3.0) };
        assert!(corollary.validate().is_err());
        assert!(CoefficientSet::builtin(2.0).validate().is_err());
    }
}
