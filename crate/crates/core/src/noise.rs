//! Q-Wiener increments and exact per-mode stochastic-convolution increments.
//!
//! The covariance `Q` is diagonal in the operator eigenbasis, `Q e_k = lambda_k e_k`,
//! truncated to the same number of modes as the operator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::SpectralOperator;

#[derive(Debug, Clone, PartialEq)]
pub struct QWienerSpec {
    lambdas: Vec<f64>,
    trace: f64,
}

/// Built-in covariance spectra.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    /// `lambda_k = c k^-q`, `q > 1`.
    Power,
    /// `lambda_k = c 2^-k`.
    Geometric,
}

impl QWienerSpec {
    pub fn new(lambdas: Vec<f64>) -> Result<Self> {
        if let Some(bad) = lambdas.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
            return Err(Error::Domain(format!("covariance eigenvalue {bad} is not a nonnegative number")));
        }
        let trace = lambdas.iter().sum();
        Ok(QWienerSpec { lambdas, trace })
    }

    pub fn zero(n_modes: usize) -> Self {
        QWienerSpec { lambdas: vec![0.0; n_modes], trace: 0.0 }
    }

    /// Built-in spectrum on `n_modes` modes. With `trace_target` the scale `c`
    /// is chosen so the stored eigenvalues sum to it; otherwise `c = 1`.
    pub fn builtin(
        kind: NoiseKind,
        n_modes: usize,
        exponent: f64,
        trace_target: Option<f64>,
    ) -> Result<Self> {
        let raw: Vec<f64> = match kind {
            NoiseKind::Power => {
                if !(exponent > 1.0) {
                    return Err(Error::Domain(format!(
                        "power-law exponent must exceed 1, got {exponent}"
                    )));
                }
                (1..=n_modes).map(|k| (k as f64).powf(-exponent)).collect()
            }
            NoiseKind::Geometric => (1..=n_modes).map(|k| 0.5f64.powi(k as i32)).collect(),
        };
        let scale = match trace_target {
            Some(t) if t >= 0.0 => t / raw.iter().sum::<f64>(),
            Some(t) => return Err(Error::Domain(format!("trace target must be nonnegative, got {t}"))),
            None => 1.0,
        };
        QWienerSpec::new(raw.into_iter().map(|l| l * scale).collect())
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn trace(&self) -> f64 {
        self.trace
    }

    pub fn n_modes(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_zero(&self) -> bool {
        self.lambdas.iter().all(|l| *l == 0.0)
    }
}

/// Counter-based random stream: ChaCha8 keyed by `seed`, with `stream_id`
/// selecting an independent keystream.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        RngStream { seed, stream_id, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Fresh copy positioned at the start of the same stream.
    pub fn restart(&self) -> Self {
        RngStream::new(self.seed, self.stream_id)
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub fn fill_standard_normal(&mut self, out: &mut [f64]) {
        for z in out.iter_mut() {
            *z = self.rng.sample(StandardNormal);
        }
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }
}

/// `Delta W` over a step of length `dt`: component k ~ Normal(0, lambda_k dt).
pub fn sample_increment(spec: &QWienerSpec, dt: f64, rng: &mut RngStream) -> Result<Vec<f64>> {
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("dt must be positive, got {dt}")));
    }
    Ok(spec
        .lambdas
        .iter()
        .map(|l| (l * dt).sqrt() * rng.standard_normal())
        .collect())
}

/// Variance of `int_0^dt exp(-mu (dt - s)) sqrt(lambda) d beta(s)`.
pub fn ou_increment_variance(lambda: f64, mu: f64, dt: f64) -> f64 {
    if mu == 0.0 {
        return lambda * dt;
    }
    -lambda * (-2.0 * mu * dt).exp_m1() / (2.0 * mu)
}

/// Per-mode standard deviations of the exact stochastic-convolution increment.
pub fn ou_increment_std(spec: &QWienerSpec, op: &SpectralOperator, dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("dt must be positive, got {dt}")));
    }
    if spec.n_modes() != op.n_modes() {
        return Err(Error::shape(op.n_modes(), spec.n_modes()));
    }
    Ok(spec
        .lambdas
        .iter()
        .zip(op.eigenvalues())
        .map(|(&l, &mu)| ou_increment_variance(l, mu, dt).sqrt())
        .collect())
}

/// Exact sample of the per-step stochastic convolution for constant unit `sigma`.
pub fn ou_convolution_increment(
    spec: &QWienerSpec,
    op: &SpectralOperator,
    dt: f64,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    let std = ou_increment_std(spec, op, dt)?;
    Ok(std.into_iter().map(|s| s * rng.standard_normal()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{assemble_operator, OperatorDescriptor};
    use std::f64::consts::PI;

    fn mean_and_se(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, (var / n).sqrt())
    }

    #[test]
    fn trace_matches_sum() {
        let spec = QWienerSpec::builtin(NoiseKind::Power, 20, 2.0, Some(3.0)).unwrap();
        assert!((spec.trace() - 3.0).abs() < 1e-14);
        assert!((spec.trace() - spec.lambdas().iter().sum::<f64>()).abs() < 1e-14);
        let geo = QWienerSpec::builtin(NoiseKind::Geometric, 4, 0.0, None).unwrap();
        assert_eq!(geo.lambdas(), &[0.5, 0.25, 0.125, 0.0625]);
        assert!(QWienerSpec::new(vec![1.0, -0.1]).is_err());
        assert!(QWienerSpec::builtin(NoiseKind::Power, 4, 1.0, None).is_err());
    }

    #[test]
    fn degenerate_noise_is_zero() {
        let spec = QWienerSpec::zero(5);
        let op = assemble_operator(&OperatorDescriptor::laplacian(1.0), 5).unwrap();
        let mut rng = RngStream::new(1, 0);
        for _ in 0..10 {
            assert!(sample_increment(&spec, 0.1, &mut rng).unwrap().iter().all(|x| *x == 0.0));
            assert!(ou_convolution_increment(&spec, &op, 0.1, &mut rng)
                .unwrap()
                .iter()
                .all(|x| *x == 0.0));
        }
        assert!(sample_increment(&spec, 0.0, &mut rng).is_err());
    }

    #[test]
    fn increment_energy_matches_trace() {
        let spec = QWienerSpec::builtin(NoiseKind::Geometric, 10, 0.0, None).unwrap();
        let dt = 0.01;
        let mut rng = RngStream::new(7, 3);
        let energies: Vec<f64> = (0..100_000)
            .map(|_| sample_increment(&spec, dt, &mut rng).unwrap().iter().map(|x| x * x).sum())
            .collect();
        let (mean, se) = mean_and_se(&energies);
        assert!((mean - spec.trace() * dt).abs() < 3.0 * se, "{mean} vs {}", spec.trace() * dt);
    }

    #[test]
    fn unit_component_variance() {
        let spec = QWienerSpec::new(vec![1.0]).unwrap();
        let mut rng = RngStream::new(11, 0);
        let sq: Vec<f64> = (0..100_000)
            .map(|_| sample_increment(&spec, 1.0, &mut rng).unwrap()[0].powi(2))
            .collect();
        let (mean, se) = mean_and_se(&sq);
        assert!((mean - 1.0).abs() < 3.0 * se);
    }

    #[test]
    fn ou_variance_limits() {
        let mu = PI * PI;
        let stationary = ou_increment_variance(1.0, mu, 1e3);
        assert!((stationary - 1.0 / (2.0 * mu)).abs() < 1e-15);
        assert!((stationary - 0.050660).abs() < 1e-6);
        let dt = 1e-9;
        assert!((ou_increment_variance(2.0, mu, dt) / (2.0 * dt) - 1.0).abs() < 1e-7);
    }

    #[test]
    fn ou_exact_variance_law() {
        for (mu, lambda, dt, seed) in [(PI * PI, 1.0, 0.01, 1u64), (4.0 * PI * PI, 0.5, 0.1, 2), (50.0, 2.0, 1.0, 3)] {
            let op = SpectralOperator::from_eigenvalues(vec![mu], mu / 2.0).unwrap();
            let spec = QWienerSpec::new(vec![lambda]).unwrap();
            let mut rng = RngStream::new(seed, 0);
            let sq: Vec<f64> = (0..100_000)
                .map(|_| ou_convolution_increment(&spec, &op, dt, &mut rng).unwrap()[0].powi(2))
                .collect();
            let (mean, se) = mean_and_se(&sq);
            let expect = lambda * (1.0 - (-2.0 * mu * dt).exp()) / (2.0 * mu);
            assert!((mean - expect).abs() < 3.0 * se, "mu={mu}: {mean} vs {expect}");
        }
    }

    #[test]
    fn streams_are_independent_and_reproducible() {
        let n = 100_000;
        let mut a = RngStream::new(42, 0);
        let mut b = RngStream::new(42, 1);
        let xs: Vec<f64> = (0..n).map(|_| a.standard_normal()).collect();
        let ys: Vec<f64> = (0..n).map(|_| b.standard_normal()).collect();
        let corr = xs.iter().zip(&ys).map(|(x, y)| x * y).sum::<f64>() / n as f64;
        assert!(corr.abs() < 4.0 / (n as f64).sqrt(), "corr = {corr}");

        let mut again = RngStream::new(42, 0);
        let replay: Vec<f64> = (0..n).map(|_| again.standard_normal()).collect();
        assert!(xs.iter().zip(&replay).all(|(x, y)| x.to_bits() == y.to_bits()));
        let mut restarted = a.restart();
        assert_eq!(restarted.standard_normal().to_bits(), xs[0].to_bits());
    }
}
