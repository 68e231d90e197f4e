//! Diagonal spectral calculus for the 1-D elliptic operator `A u = (a(x) u')'`
//! on (0, 1) with homogeneous Dirichlet conditions.
//!
//! Everything is expressed in the eigenbasis of `-A`, so the semigroup
//! `S(t)`, the fractional powers `(-A)^alpha` and their products are
//! componentwise multiplications of mode vectors.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::simpson_rule;

pub const DEFAULT_N_MODES: usize = 32;
pub const DEFAULT_DELTA_FRACTION: f64 = 0.5;

/// Bounds of the logarithmic grid on which the decay constant is fitted.
pub const DECAY_GRID_T_MIN: f64 = 1e-6;
pub const DECAY_GRID_T_MAX: f64 = 1e2;
pub const DECAY_GRID_POINTS: usize = 2001;

const SYMMETRY_TOL: f64 = 1e-12;
/// Simpson intervals per mode (at least 32 modes' worth) for the stiffness integrals.
const STIFFNESS_INTERVALS_PER_MODE: usize = 16;

/// Diffusion coefficient `a(x)` on [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Diffusivity {
    Constant(f64),
    /// Samples on a uniform grid over [0, 1] (first sample at 0, last at 1),
    /// linearly interpolated in between.
    Tabulated(Vec<f64>),
}

impl Diffusivity {
    /// Tabulates `a` at `samples` uniformly spaced points.
    pub fn from_fn(a: impl Fn(f64) -> f64, samples: usize) -> Self {
        let samples = samples.max(2);
        let step = 1.0 / (samples - 1) as f64;
        Diffusivity::Tabulated((0..samples).map(|i| a(i as f64 * step)).collect())
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Diffusivity::Constant(a) => *a,
            Diffusivity::Tabulated(values) => {
                let last = values.len() - 1;
                let pos = x.clamp(0.0, 1.0) * last as f64;
                let i = (pos.floor() as usize).min(last.saturating_sub(1));
                let w = pos - i as f64;
                values[i] * (1.0 - w) + values[(i + 1).min(last)] * w
            }
        }
    }

    fn check_elliptic(&self) -> Result<()> {
        match self {
            Diffusivity::Constant(a) if *a > 0.0 && a.is_finite() => Ok(()),
            Diffusivity::Constant(a) => Err(Error::Ellipticity { x: 0.0, value: *a }),
            Diffusivity::Tabulated(values) => {
                if values.len() < 2 {
                    return Err(Error::Config(
                        "tabulated diffusivity needs at least two samples".into(),
                    ));
                }
                let step = 1.0 / (values.len() - 1) as f64;
                for (i, &v) in values.iter().enumerate() {
                    if !(v > 0.0 && v.is_finite()) {
                        return Err(Error::Ellipticity { x: i as f64 * step, value: v });
                    }
                }
                Ok(())
            }
        }
    }
}

/// How to build the operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorDescriptor {
    pub diffusivity: Diffusivity,
    /// delta = delta_fraction * mu_1, must lie in (0, 1).
    pub delta_fraction: f64,
}

impl OperatorDescriptor {
    pub fn laplacian(a: f64) -> Self {
        OperatorDescriptor {
            diffusivity: Diffusivity::Constant(a),
            delta_fraction: DEFAULT_DELTA_FRACTION,
        }
    }
}

/// The physical eigenbasis behind the mode coefficients.
#[derive(Debug, Clone)]
pub enum Basis {
    /// `e_n(x) = sqrt(2) sin(n pi x)`.
    Sine,
    /// Eigenvectors of the sine-Galerkin stiffness matrix; column `k` holds
    /// the sine coefficients of the k-th eigenfunction.
    Galerkin(DMatrix<f64>),
}

/// Spectrum of `-A` truncated to `n_modes` eigenpairs.
#[derive(Debug, Clone)]
pub struct SpectralOperator {
    eigenvalues: Vec<f64>,
    delta: f64,
    basis: Basis,
}

/// Constants of the decay bound `||(-A)^alpha S(t)|| <= C_alpha t^-alpha e^-delta t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayConstants {
    pub c_alpha: f64,
    pub delta: f64,
}

/// Builds the truncated operator. Constant `a` uses the analytic spectrum
/// `a (n pi)^2`; variable `a` diagonalizes the sine-Galerkin stiffness matrix
/// assembled with composite Simpson (see [`stiffness_matrix`]).
pub fn assemble_operator(desc: &OperatorDescriptor, n_modes: usize) -> Result<SpectralOperator> {
    if n_modes == 0 {
        return Err(Error::Domain("n_modes must be at least 1".into()));
    }
    if !(desc.delta_fraction > 0.0 && desc.delta_fraction < 1.0) {
        return Err(Error::Domain(format!(
            "delta_fraction must lie in (0, 1), got {}",
            desc.delta_fraction
        )));
    }
    desc.diffusivity.check_elliptic()?;

    let (eigenvalues, basis) = match &desc.diffusivity {
        Diffusivity::Constant(a) => {
            let mu = (1..=n_modes).map(|n| a * (n as f64 * PI).powi(2)).collect();
            (mu, Basis::Sine)
        }
        Diffusivity::Tabulated(_) => {
            let stiffness = stiffness_matrix(&desc.diffusivity, n_modes)?;
            let eig = SymmetricEigen::new(stiffness);
            let mut order: Vec<usize> = (0..n_modes).collect();
            order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
            let mut vectors = DMatrix::zeros(n_modes, n_modes);
            let mut mu = Vec::with_capacity(n_modes);
            for (col, &src) in order.iter().enumerate() {
                mu.push(eig.eigenvalues[src]);
                let v = eig.eigenvectors.column(src);
                // sign convention: largest component positive
                let pivot = v.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
                let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
                for row in 0..n_modes {
                    vectors[(row, col)] = sign * v[row];
                }
            }
            (mu, Basis::Galerkin(vectors))
        }
    };

    if eigenvalues[0] <= 0.0 {
        return Err(Error::Ellipticity { x: f64::NAN, value: eigenvalues[0] });
    }
    let delta = desc.delta_fraction * eigenvalues[0];
    Ok(SpectralOperator { eigenvalues, delta, basis })
}

/// `K_mn = int_0^1 a(x) e_m'(x) e_n'(x) dx` in the sine basis.
pub fn stiffness_matrix(a: &Diffusivity, n_modes: usize) -> Result<DMatrix<f64>> {
    let (nodes, weights) = simpson_rule(STIFFNESS_INTERVALS_PER_MODE * n_modes.max(32));
    let mut k = DMatrix::<f64>::zeros(n_modes, n_modes);
    let mut deriv = vec![0.0; n_modes];
    for (&x, &w) in nodes.iter().zip(&weights) {
        let ax = a.eval(x);
        if ax <= 0.0 {
            return Err(Error::Ellipticity { x, value: ax });
        }
        for (n, d) in deriv.iter_mut().enumerate() {
            let freq = (n + 1) as f64 * PI;
            *d = SQRT_2 * freq * (freq * x).cos();
        }
        for m in 0..n_modes {
            for n in 0..=m {
                k[(m, n)] += w * ax * deriv[m] * deriv[n];
            }
        }
    }
    for m in 0..n_modes {
        for n in 0..m {
            k[(n, m)] = k[(m, n)];
        }
    }
    let scale = k.amax().max(1.0);
    let asym = (&k - k.transpose()).amax();
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::Internal(format!("stiffness matrix asymmetric by {asym:e}")));
    }
    Ok(k)
}

impl SpectralOperator {
    /// Builds an operator from an explicit spectrum in the sine basis.
    pub fn from_eigenvalues(eigenvalues: Vec<f64>, delta: f64) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::Domain("empty spectrum".into()));
        }
        if eigenvalues.windows(2).any(|w| w[1] < w[0]) || eigenvalues[0] <= 0.0 {
            return Err(Error::Domain("eigenvalues must be positive and nondecreasing".into()));
        }
        if !(delta > 0.0 && delta < eigenvalues[0]) {
            return Err(Error::Domain(format!(
                "delta = {delta} must lie in (0, mu_1 = {})",
                eigenvalues[0]
            )));
        }
        Ok(SpectralOperator { eigenvalues, delta, basis: Basis::Sine })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn n_modes(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    /// Value of the k-th (0-based) eigenfunction at `x`.
    pub fn basis_value(&self, k: usize, x: f64) -> f64 {
        match &self.basis {
            Basis::Sine => SQRT_2 * ((k + 1) as f64 * PI * x).sin(),
            Basis::Galerkin(v) => (0..v.nrows())
                .map(|n| v[(n, k)] * SQRT_2 * ((n + 1) as f64 * PI * x).sin())
                .sum(),
        }
    }

    fn check_len(&self, coeffs: &[f64]) -> Result<()> {
        if coeffs.len() != self.n_modes() {
            return Err(Error::shape(self.n_modes(), coeffs.len()));
        }
        Ok(())
    }

    /// `S(t) v`: mode n scaled by `exp(-mu_n t)`.
    pub fn semigroup_apply(&self, t: f64, coeffs: &[f64]) -> Result<Vec<f64>> {
        if !(t >= 0.0) {
            return Err(Error::Domain(format!("semigroup time must be nonnegative, got {t}")));
        }
        self.check_len(coeffs)?;
        if t == 0.0 {
            return Ok(coeffs.to_vec());
        }
        Ok(coeffs
            .iter()
            .zip(&self.eigenvalues)
            .map(|(c, mu)| c * (-mu * t).exp())
            .collect())
    }

    /// `(-A)^alpha v`: mode n scaled by `mu_n^alpha`.
    pub fn fractional_apply(&self, alpha: f64, coeffs: &[f64]) -> Result<Vec<f64>> {
        self.check_len(coeffs)?;
        if alpha == 0.0 {
            return Ok(coeffs.to_vec());
        }
        Ok(coeffs
            .iter()
            .zip(&self.eigenvalues)
            .map(|(c, mu)| c * mu.powf(alpha))
            .collect())
    }

    /// `||v||_alpha = ||(-A)^alpha v||`.
    pub fn fractional_norm(&self, alpha: f64, coeffs: &[f64]) -> Result<f64> {
        self.check_len(coeffs)?;
        Ok(coeffs
            .iter()
            .zip(&self.eigenvalues)
            .map(|(c, mu)| (c * mu.powf(alpha)).powi(2))
            .sum::<f64>()
            .sqrt())
    }

    /// Exact operator norm of `(-A)^alpha S(t)` on the truncation:
    /// `max_n mu_n^alpha exp(-mu_n t)`.
    pub fn frac_semigroup_norm(&self, alpha: f64, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::Domain(format!("t must be positive, got {t}")));
        }
        Ok(self
            .eigenvalues
            .iter()
            .map(|&mu| mu.powf(alpha) * (-mu * t).exp())
            .fold(0.0, f64::max))
    }

    /// Smallest `C_alpha` with `||(-A)^alpha S(t)|| <= C_alpha t^-alpha e^-delta t`.
    ///
    /// The product `t^alpha e^{delta t} mu^alpha e^{-mu t}` is maximized over
    /// the logarithmic fitting grid, and additionally per mode at its interior
    /// maximizer `t* = alpha / (mu - delta)` (each mode's profile is unimodal
    /// in t), so the constant holds for every t > 0 and not only on the grid.
    pub fn lemma22_constants(&self, alpha: f64) -> DecayConstants {
        let delta = self.delta;
        let grid = log_grid(DECAY_GRID_T_MIN, DECAY_GRID_T_MAX, DECAY_GRID_POINTS);
        let mut c = grid
            .iter()
            .map(|&t| {
                let norm = self.frac_semigroup_norm(alpha, t).unwrap_or(0.0);
                t.powf(alpha) * (delta * t).exp() * norm
            })
            .fold(0.0, f64::max);
        for &mu in &self.eigenvalues {
            let peak = if alpha == 0.0 {
                // decreasing in t: supremum is the t -> 0 limit
                1.0
            } else {
                let t_star = alpha / (mu - delta);
                (mu * t_star).powf(alpha) * ((delta - mu) * t_star).exp()
            };
            c = c.max(peak);
        }
        DecayConstants { c_alpha: c, delta }
    }
}

/// `n` logarithmically spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}
