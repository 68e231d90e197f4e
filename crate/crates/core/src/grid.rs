//! Physical-space collocation grid used by the Nemytskii maps: synthesis of
//! point values from mode coefficients and projection back by quadrature.

use crate::error::{Error, Result};
use crate::quadrature::simpson_rule;
use crate::spectral::SpectralOperator;

#[derive(Debug, Clone)]
pub struct PhysicalGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// `basis[i * n_modes + k] = psi_k(x_i)`
    basis: Vec<f64>,
    n_modes: usize,
    /// Projection of `sin(pi x)`, the x-profile of separable kernels.
    first_sine: Vec<f64>,
}

impl PhysicalGrid {
    /// Composite-Simpson grid with `intervals` subintervals (rounded up to even).
    pub fn new(op: &SpectralOperator, intervals: usize) -> Self {
        let (nodes, weights) = simpson_rule(intervals);
        let n_modes = op.n_modes();
        let mut basis = Vec::with_capacity(nodes.len() * n_modes);
        for &x in &nodes {
            for k in 0..n_modes {
                basis.push(op.basis_value(k, x));
            }
        }
        let mut grid = PhysicalGrid { nodes, weights, basis, n_modes, first_sine: Vec::new() };
        grid.first_sine = grid.project_fn(|x| (std::f64::consts::PI * x).sin());
        grid
    }

    /// Mode coefficients of `sin(pi x)`.
    pub fn first_sine(&self) -> &[f64] {
        &self.first_sine
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    /// `psi_k(x_i)`.
    pub fn basis_at(&self, i: usize) -> &[f64] {
        &self.basis[i * self.n_modes..(i + 1) * self.n_modes]
    }

    /// Point values `u(x_i) = sum_k c_k psi_k(x_i)`.
    pub fn synthesize_into(&self, coeffs: &[f64], field: &mut [f64]) {
        debug_assert_eq!(coeffs.len(), self.n_modes);
        for (i, out) in field.iter_mut().enumerate() {
            *out = self.basis_at(i).iter().zip(coeffs).map(|(b, c)| b * c).sum();
        }
    }

    pub fn synthesize(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        if coeffs.len() != self.n_modes {
            return Err(Error::shape(self.n_modes, coeffs.len()));
        }
        let mut field = vec![0.0; self.len()];
        self.synthesize_into(coeffs, &mut field);
        Ok(field)
    }

    /// Mode coefficients `c_k = sum_i w_i field_i psi_k(x_i)`.
    pub fn project_into(&self, field: &[f64], coeffs: &mut [f64]) {
        debug_assert_eq!(field.len(), self.len());
        coeffs.iter_mut().for_each(|c| *c = 0.0);
        for (i, (&v, &w)) in field.iter().zip(&self.weights).enumerate() {
            let wv = w * v;
            if wv == 0.0 {
                continue;
            }
            for (c, b) in coeffs.iter_mut().zip(self.basis_at(i)) {
                *c += wv * b;
            }
        }
    }

    pub fn project(&self, field: &[f64]) -> Result<Vec<f64>> {
        if field.len() != self.len() {
            return Err(Error::shape(self.len(), field.len()));
        }
        let mut coeffs = vec![0.0; self.n_modes];
        self.project_into(field, &mut coeffs);
        Ok(coeffs)
    }

    /// Projection of a physical-space function onto the modes.
    pub fn project_fn(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        let field: Vec<f64> = self.nodes.iter().map(|&x| f(x)).collect();
        let mut coeffs = vec![0.0; self.n_modes];
        self.project_into(&field, &mut coeffs);
        coeffs
    }

    /// `int_D v(x) dx` by the grid quadrature.
    pub fn integrate(&self, field: &[f64]) -> f64 {
        field.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{assemble_operator, OperatorDescriptor};
    use std::f64::consts::{PI, SQRT_2};

    #[test]
    fn synthesize_project_roundtrip() {
        let op = assemble_operator(&OperatorDescriptor::laplacian(1.0), 6).unwrap();
        let grid = PhysicalGrid::new(&op, 24);
        let c = vec![0.3, -1.0, 0.0, 2.5, 0.1, -0.7];
        let back = grid.project(&grid.synthesize(&c).unwrap()).unwrap();
        for (a, b) in c.iter().zip(&back) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn projection_of_first_sine() {
        let op = assemble_operator(&OperatorDescriptor::laplacian(1.0), 4).unwrap();
        let grid = PhysicalGrid::new(&op, 16);
        let c = grid.project_fn(|x| (PI * x).sin());
        assert!((c[0] - SQRT_2 / 2.0).abs() < 1e-14);
        assert!(c[1..].iter().all(|v| v.abs() < 1e-14));
    }
}
