//! Occupation-measure estimates of invariant measures and Monte Carlo tests
//! of tightness, invariance, time homogeneity and continuous dependence.

pub mod ks;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::RngStream;
use crate::segment::{l2_norm, Segment};
use crate::solver::{simulate_from, Model, SolverConfig, Trajectory};
use ks::{ks_critical, ks_statistic, KS_C_05};

/// Number of batches for batch-means standard errors.
pub const DEFAULT_BATCHES: usize = 25;

/// Finite-dimensional functional of a window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Observable {
    /// `||u_t||_C`.
    SegNorm,
    /// `||u(t)||`.
    StateNorm,
    /// Coefficient of mode `k` (0-based) of `u(t)`.
    Mode { k: usize },
    /// `sum_k w_k u_k(t)`.
    Linear { name: String, weights: Vec<f64> },
}

impl Observable {
    pub fn name(&self) -> String {
        match self {
            Observable::SegNorm => "seg_norm".into(),
            Observable::StateNorm => "state_norm".into(),
            Observable::Mode { k } => format!("mode_{}", k + 1),
            Observable::Linear { name, .. } => name.clone(),
        }
    }

    fn from_parts(&self, seg_norm: f64, state: &[f64]) -> f64 {
        match self {
            Observable::SegNorm => seg_norm,
            Observable::StateNorm => l2_norm(state),
            Observable::Mode { k } => state.get(*k).copied().unwrap_or(0.0),
            Observable::Linear { weights, .. } => weights.iter().zip(state).map(|(w, u)| w * u).sum(),
        }
    }

    pub fn eval(&self, seg: &Segment) -> f64 {
        let seg_norm = if matches!(self, Observable::SegNorm) { seg.sup_norm() } else { 0.0 };
        self.from_parts(seg_norm, seg.current())
    }
}

/// Window norm, state norm and the first three mode coefficients.
pub fn default_observables(n_modes: usize) -> Vec<Observable> {
    let mut obs = vec![Observable::SegNorm, Observable::StateNorm];
    obs.extend((0..n_modes.min(3)).map(|k| Observable::Mode { k }));
    obs
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureMeta {
    pub burn_in: f64,
    pub thin: usize,
    pub t_end: f64,
    /// `(seed, stream)` of every contributing trajectory, sorted.
    pub sources: Vec<(u64, u64)>,
}

/// Equal-weight occupation measure over post-burn-in snapshots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMeasure {
    pub observables: Vec<Observable>,
    /// One row per snapshot, one column per observable.
    pub samples: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    /// Sample index where each trajectory's block starts.
    pub blocks: Vec<usize>,
    /// Post-burn-in window checkpoints, for restarting from the measure.
    pub segments: Vec<Segment>,
    pub meta: MeasureMeta,
}

/// Mean and spread of one observable under a measure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub name: String,
    pub mean: f64,
    pub variance: f64,
    pub se_mean: f64,
    pub se_variance: f64,
}

fn sorted_by_source(trajs: &[Trajectory]) -> Vec<&Trajectory> {
    let mut refs: Vec<&Trajectory> = trajs.iter().collect();
    refs.sort_by_key(|t| (t.seed, t.stream));
    refs
}

/// Time average `(1 / (T - burn_in)) int delta_{u_t} dt` approximated by the
/// post-burn-in snapshots of each trajectory, keeping every `thin`-th one.
/// Trajectories are merged in `(seed, stream)` order.
pub fn krylov_bogoliubov(
    trajs: &[Trajectory],
    burn_in: f64,
    thin: usize,
    observables: &[Observable],
) -> Result<EmpiricalMeasure> {
    if thin == 0 {
        return Err(Error::Config("measure.thin must be at least 1".into()));
    }
    let mut samples = Vec::new();
    let mut blocks = Vec::new();
    let mut segments = Vec::new();
    let mut t_end: f64 = 0.0;
    let ordered = sorted_by_source(trajs);
    for traj in &ordered {
        let Some(&t_start) = traj.times.first() else { continue };
        t_end = t_end.max(traj.times.last().copied().unwrap_or(t_start) - t_start);
        blocks.push(samples.len());
        let post = traj.times.iter().enumerate().filter(|(_, t)| **t - t_start >= burn_in - 1e-9);
        for (i, _) in post.step_by(thin) {
            let row = observables
                .iter()
                .map(|o| o.from_parts(traj.seg_norms[i], &traj.snapshots[i]))
                .collect();
            samples.push(row);
        }
        segments.extend(
            traj.checkpoints.iter().filter(|c| c.time - t_start >= burn_in - 1e-9).map(|c| c.segment.clone()),
        );
    }
    if samples.is_empty() {
        return Err(Error::Config(format!("no snapshots after burn-in {burn_in} (run length {t_end})")));
    }
    blocks.retain(|b| *b < samples.len());
    blocks.dedup();
    let n = samples.len();
    Ok(EmpiricalMeasure {
        observables: observables.to_vec(),
        samples,
        weights: vec![1.0 / n as f64; n],
        blocks,
        segments,
        meta: MeasureMeta {
            burn_in,
            thin,
            t_end,
            sources: ordered.iter().map(|t| (t.seed, t.stream)).collect(),
        },
    })
}

impl EmpiricalMeasure {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.samples.iter().map(|r| r[j]).collect()
    }

    pub fn column_by_name(&self, name: &str) -> Option<Vec<f64>> {
        self.observables.iter().position(|o| o.name() == name).map(|j| self.column(j))
    }

    /// Batch boundaries: one batch per trajectory when there are enough
    /// trajectories, otherwise `n_batches` contiguous batches inside each one.
    fn batches(&self, n_batches: usize) -> Vec<(usize, usize)> {
        let mut ends: Vec<usize> = self.blocks.iter().skip(1).copied().collect();
        ends.push(self.len());
        let spans: Vec<(usize, usize)> = self.blocks.iter().copied().zip(ends).collect();
        if spans.len() >= n_batches {
            return spans;
        }
        let per = n_batches.div_ceil(spans.len());
        let mut out = Vec::new();
        for (a, b) in spans {
            let len = b - a;
            let k = per.min(len).max(1);
            for i in 0..k {
                let (s, e) = (a + i * len / k, a + (i + 1) * len / k);
                if e > s {
                    out.push((s, e));
                }
            }
        }
        out
    }

    /// Weighted mean and variance of observable `j`, with batch-means
    /// standard errors for both.
    pub fn summary(&self, j: usize, n_batches: usize) -> Summary {
        let x = self.column(j);
        let mean: f64 = x.iter().zip(&self.weights).map(|(v, w)| v * w).sum();
        let variance: f64 = x.iter().zip(&self.weights).map(|(v, w)| w * (v - mean).powi(2)).sum();
        let batches = self.batches(n_batches);
        let (mut bm, mut bv) = (Vec::new(), Vec::new());
        for (a, b) in &batches {
            let len = (b - a) as f64;
            bm.push(x[*a..*b].iter().sum::<f64>() / len);
            bv.push(x[*a..*b].iter().map(|v| (v - mean).powi(2)).sum::<f64>() / len);
        }
        Summary {
            name: self.observables[j].name(),
            mean,
            variance,
            se_mean: standard_error(&bm),
            se_variance: standard_error(&bv),
        }
    }

    pub fn summaries(&self, n_batches: usize) -> Vec<Summary> {
        (0..self.observables.len()).map(|j| self.summary(j, n_batches)).collect()
    }
}

/// Standard error of the mean of `xs` (0 for fewer than two values).
pub fn standard_error(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (var / n as f64).sqrt()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len().max(1) as f64
}

/// Runs `n` independent trajectories on streams `first_stream..first_stream + n`
/// in parallel; the result is ordered by stream.
pub fn run_ensemble(
    initial: &Segment,
    model: &Model,
    cfg: &SolverConfig,
    seed: u64,
    first_stream: u64,
    n: usize,
) -> Result<Vec<Trajectory>> {
    (0..n as u64)
        .into_par_iter()
        .map(|i| simulate_from(initial, 0.0, model, cfg, &mut RngStream::new(seed, first_stream + i)))
        .collect()
}

/// Tail probabilities `sup_t P{||u_t||_C > R}` estimated at checkpoint times.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TightnessReport {
    pub r_grid: Vec<f64>,
    pub estimates: Vec<f64>,
    pub n_trajectories: usize,
    pub checkpoint_times: Vec<f64>,
}

/// For each radius, the largest fraction of trajectories whose window norm
/// exceeds it over the common snapshot times. Radii are sorted ascending.
pub fn tightness_diagnostic(trajs: &[Trajectory], r_grid: &[f64]) -> Result<TightnessReport> {
    let n_times = trajs.iter().map(Trajectory::len).min().unwrap_or(0);
    if n_times < 2 {
        return Err(Error::Config("tightness needs at least two checkpoint times per trajectory".into()));
    }
    let mut r: Vec<f64> = r_grid.to_vec();
    r.sort_by(f64::total_cmp);
    let n = trajs.len() as f64;
    let estimates = r
        .iter()
        .map(|&radius| {
            (0..n_times)
                .map(|i| trajs.iter().filter(|t| t.seg_norms[i] > radius).count() as f64 / n)
                .fold(0.0, f64::max)
        })
        .collect();
    Ok(TightnessReport {
        r_grid: r,
        estimates,
        n_trajectories: trajs.len(),
        checkpoint_times: trajs[0].times[..n_times].to_vec(),
    })
}

/// Row of a test report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub statistic: String,
    pub estimate: f64,
    pub stderr: f64,
    pub threshold: f64,
    pub verdict: bool,
}

/// Comparison of one observable between two samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub observable: String,
    pub mean_a: f64,
    pub mean_b: f64,
    /// `mean_b - mean_a`.
    pub difference: f64,
    pub pooled_se: f64,
    pub ks: f64,
    pub ks_critical: f64,
}

impl Comparison {
    fn new(observable: String, a: &[f64], b: &[f64]) -> Self {
        let (ma, mb) = (mean(a), mean(b));
        let var = |x: &[f64], m: f64| {
            x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len().max(2) - 1) as f64 / x.len().max(1) as f64
        };
        Comparison {
            observable,
            mean_a: ma,
            mean_b: mb,
            difference: mb - ma,
            pooled_se: (var(a, ma) + var(b, mb)).sqrt(),
            ks: ks_statistic(a, b),
            ks_critical: ks_critical(a.len(), b.len(), KS_C_05),
        }
    }

    /// KS statistic below the 5% critical value.
    pub fn ks_pass(&self) -> bool {
        self.ks < self.ks_critical
    }

    /// Mean difference within `k` pooled standard errors.
    pub fn mean_within(&self, k: f64) -> bool {
        self.difference.abs() <= k * self.pooled_se
    }

    pub fn rows(&self) -> Vec<ReportRow> {
        vec![
            ReportRow {
                statistic: format!("{}:mean_difference", self.observable),
                estimate: self.difference,
                stderr: self.pooled_se,
                threshold: 3.0 * self.pooled_se,
                verdict: self.mean_within(3.0),
            },
            ReportRow {
                statistic: format!("{}:ks", self.observable),
                estimate: self.ks,
                stderr: f64::NAN,
                threshold: self.ks_critical,
                verdict: self.ks_pass(),
            },
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestReport {
    pub comparisons: Vec<Comparison>,
    pub n_a: usize,
    pub n_b: usize,
}

impl TestReport {
    pub fn all_ks_pass(&self) -> bool {
        self.comparisons.iter().all(Comparison::ks_pass)
    }

    pub fn rows(&self) -> Vec<ReportRow> {
        self.comparisons.iter().flat_map(Comparison::rows).collect()
    }
}

fn compare(observables: &[Observable], a: &[Segment], b: &[Segment]) -> TestReport {
    let comparisons = observables
        .iter()
        .map(|o| {
            let xa: Vec<f64> = a.iter().map(|s| o.eval(s)).collect();
            let xb: Vec<f64> = b.iter().map(|s| o.eval(s)).collect();
            Comparison::new(o.name(), &xa, &xb)
        })
        .collect();
    TestReport { comparisons, n_a: a.len(), n_b: b.len() }
}

fn evolve(seg: &Segment, t0: f64, model: &Model, cfg: &SolverConfig, rng: &mut RngStream) -> Result<Segment> {
    let run = SolverConfig { store_stride: cfg.n_steps().max(1), checkpoint_stride: 0, ..cfg.clone() };
    Ok(simulate_from(seg, t0, model, &run, rng)?.final_segment)
}

/// Draws `n_draws` windows from `mu` (with replacement), evolves each for time
/// `t` on its own stream, and compares the observables before and after.
/// Streams `first_stream..first_stream + n_draws` drive the evolution; the
/// draw itself uses stream `first_stream + n_draws`.
#[allow(clippy::too_many_arguments)]
pub fn invariance_test(
    mu: &EmpiricalMeasure,
    model: &Model,
    cfg: &SolverConfig,
    t: f64,
    observables: &[Observable],
    n_draws: usize,
    seed: u64,
    first_stream: u64,
) -> Result<TestReport> {
    if mu.segments.len() < 2 {
        return Err(Error::Config(format!(
            "the measure stores {} window checkpoints; at least 2 are needed",
            mu.segments.len()
        )));
    }
    if !(t > 0.0) {
        return Err(Error::Domain(format!("evolution time must be positive, got {t}")));
    }
    let mut picker = RngStream::new(seed, first_stream + n_draws as u64);
    let before: Vec<Segment> = (0..n_draws)
        .map(|_| {
            let i = ((picker.uniform() * mu.segments.len() as f64) as usize).min(mu.segments.len() - 1);
            mu.segments[i].clone()
        })
        .collect();
    let run = SolverConfig { t_end: t, ..cfg.clone() };
    let after: Vec<Segment> = before
        .par_iter()
        .enumerate()
        .map(|(i, s)| evolve(s, 0.0, model, &run, &mut RngStream::new(seed, first_stream + i as u64)))
        .collect::<Result<_>>()?;
    Ok(compare(observables, &before, &after))
}

/// Compares `u_t` started from `phi` at time `s` with `u_{t-s}` started at 0,
/// each over `n_samples` fresh streams. The simulator is autonomous, so this
/// validates the harness rather than new mathematics.
#[allow(clippy::too_many_arguments)]
pub fn homogeneity_test(
    phi: &Segment,
    s: f64,
    t: f64,
    model: &Model,
    cfg: &SolverConfig,
    observables: &[Observable],
    n_samples: usize,
    seed: u64,
) -> Result<TestReport> {
    if !(s >= 0.0 && t > s) {
        return Err(Error::Domain(format!("need 0 <= s < t, got s = {s}, t = {t}")));
    }
    let run = SolverConfig { t_end: t - s, ..cfg.clone() };
    let shifted: Vec<Segment> = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| evolve(phi, s, model, &run, &mut RngStream::new(seed, i)))
        .collect::<Result<_>>()?;
    let fresh: Vec<Segment> = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| evolve(phi, 0.0, model, &run, &mut RngStream::new(seed, n_samples as u64 + i)))
        .collect::<Result<_>>()?;
    Ok(compare(observables, &shifted, &fresh))
}

/// `E sup_{t <= T} ||u(t, phi) - u(t, psi)||^p` for one `psi`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DependencePoint {
    pub distance: f64,
    pub estimate: f64,
    pub stderr: f64,
}

/// Coupled Monte Carlo estimate for each `psi` in `psis`: path `i` of every
/// pair uses stream `i`, so `phi` and `psi` see the same noise.
#[allow(clippy::too_many_arguments)]
pub fn continuous_dependence_probe(
    phi: &Segment,
    psis: &[Segment],
    p: f64,
    t_end: f64,
    model: &Model,
    cfg: &SolverConfig,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<DependencePoint>> {
    let run = SolverConfig { t_end, store_stride: 1, checkpoint_stride: 0, ..cfg.clone() };
    let per_path: Vec<Vec<f64>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| -> Result<Vec<f64>> {
            let base = simulate_from(phi, 0.0, model, &run, &mut RngStream::new(seed, i))?;
            psis.iter()
                .map(|psi| {
                    let other = simulate_from(psi, 0.0, model, &run, &mut RngStream::new(seed, i))?;
                    let sup = base
                        .snapshots
                        .iter()
                        .zip(&other.snapshots)
                        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt())
                        .fold(0.0, f64::max);
                    Ok(sup.powf(p))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(psis
        .iter()
        .enumerate()
        .map(|(j, psi)| {
            let xs: Vec<f64> = per_path.iter().map(|row| row[j]).collect();
            Ok(DependencePoint {
                distance: phi.difference(psi)?.sup_norm(),
                estimate: mean(&xs),
                stderr: standard_error(&xs),
            })
        })
        .collect::<Result<_>>()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{CoefficientSet, ScalarFn};
    use crate::noise::{NoiseKind, QWienerSpec};
    use crate::solver::Checkpoint;
    use crate::spectral::{assemble_operator, OperatorDescriptor};

    fn model(n: usize, noise: QWienerSpec, coeffs: CoefficientSet, h: f64) -> Model {
        let op = assemble_operator(&OperatorDescriptor::laplacian(1.0), n).unwrap();
        Model::new(op, noise, coeffs, h).unwrap()
    }

    fn flat_trajectory(value: f64, n: usize, seed: u64, stream: u64) -> Trajectory {
        let seg = Segment::constant(0.1, 0.05, &[value, 0.0]).unwrap();
        Trajectory {
            seed,
            stream,
            times: (0..n).map(|i| i as f64 * 0.1).collect(),
            snapshots: vec![vec![value, 0.0]; n],
            seg_norms: vec![value.abs(); n],
            checkpoints: (0..n).map(|i| Checkpoint { time: i as f64 * 0.1, segment: seg.clone() }).collect(),
            max_fp_iters: 0,
            final_segment: seg,
        }
    }

    #[test]
    fn constant_trajectory_is_a_point_mass() {
        let traj = flat_trajectory(0.7, 50, 1, 0);
        let mu = krylov_bogoliubov(&[traj], 1.0, 2, &default_observables(2)).unwrap();
        assert!((mu.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        for s in mu.summaries(DEFAULT_BATCHES) {
            assert!(s.variance < 1e-28);
            assert!(s.se_mean < 1e-14);
        }
        assert_eq!(mu.len(), 20);
        assert!(krylov_bogoliubov(&[flat_trajectory(0.7, 5, 1, 0)], 10.0, 1, &default_observables(2)).is_err());
    }

    #[test]
    fn merge_is_order_independent() {
        let a = flat_trajectory(0.1, 20, 3, 1);
        let b = flat_trajectory(0.4, 20, 3, 0);
        let c = flat_trajectory(-0.2, 20, 2, 7);
        let obs = default_observables(2);
        let m1 = krylov_bogoliubov(&[a.clone(), b.clone(), c.clone()], 0.0, 1, &obs).unwrap();
        let m2 = krylov_bogoliubov(&[c, a, b], 0.0, 1, &obs).unwrap();
        assert_eq!(m1, m2);
        assert_eq!(m1.meta.sources, vec![(2, 7), (3, 0), (3, 1)]);
    }

    #[test]
    fn tightness_cases() {
        let zeros = vec![flat_trajectory(0.0, 10, 1, 0), flat_trajectory(0.0, 10, 1, 1)];
        let rep = tightness_diagnostic(&zeros, &[0.5, 0.1, 1.0]).unwrap();
        assert_eq!(rep.r_grid, vec![0.1, 0.5, 1.0]);
        assert!(rep.estimates.iter().all(|e| *e == 0.0));
        let mixed = vec![flat_trajectory(0.0, 10, 1, 0), flat_trajectory(0.3, 10, 1, 1)];
        let rep = tightness_diagnostic(&mixed, &[0.0, 0.2, 0.5]).unwrap();
        assert_eq!(rep.estimates, vec![0.5, 0.5, 0.0]);
        assert!(tightness_diagnostic(&[flat_trajectory(0.0, 1, 1, 0)], &[1.0]).is_err());
    }

    #[test]
    fn zero_fixed_point_is_invariant() {
        let n = 3;
        let m = model(n, QWienerSpec::builtin(NoiseKind::Geometric, n, 0.0, None).unwrap(), CoefficientSet::zero(), 0.1);
        let zero = Segment::zeros(0.1, 0.05, n).unwrap();
        let traj = Trajectory {
            seed: 0,
            stream: 0,
            times: vec![0.0, 1.0],
            snapshots: vec![vec![0.0; n]; 2],
            seg_norms: vec![0.0; 2],
            checkpoints: vec![Checkpoint { time: 0.0, segment: zero.clone() }, Checkpoint { time: 1.0, segment: zero }],
            max_fp_iters: 0,
            final_segment: Segment::zeros(0.1, 0.05, n).unwrap(),
        };
        let mu = krylov_bogoliubov(&[traj], 0.0, 1, &default_observables(n)).unwrap();
        let cfg = SolverConfig { dt: 0.05, ..SolverConfig::default() };
        let rep = invariance_test(&mu, &m, &cfg, 1.0, &default_observables(n), 20, 5, 0).unwrap();
        for c in &rep.comparisons {
            assert_eq!(c.ks, 0.0);
            assert_eq!(c.difference, 0.0);
        }
        let empty = EmpiricalMeasure { segments: Vec::new(), ..mu };
        assert!(invariance_test(&empty, &m, &cfg, 1.0, &default_observables(n), 20, 5, 0).is_err());
    }

    #[test]
    fn deterministic_homogeneity_is_exact() {
        let n = 3;
        let cs = CoefficientSet { f: ScalarFn::Tanh, ..CoefficientSet::builtin(3.0) };
        let m = model(n, QWienerSpec::zero(n), cs, 0.1);
        let phi = Segment::constant(0.1, 0.02, &[0.5, -0.2, 0.1]).unwrap();
        let cfg = SolverConfig { dt: 0.02, ..SolverConfig::default() };
        let rep = homogeneity_test(&phi, 1.0, 1.5, &m, &cfg, &default_observables(n), 10, 3).unwrap();
        for c in &rep.comparisons {
            assert_eq!(c.ks, 0.0);
            assert_eq!(c.difference, 0.0);
        }
    }

    #[test]
    fn coupled_identical_data_gives_zero() {
        let n = 3;
        let noise = QWienerSpec::builtin(NoiseKind::Geometric, n, 0.0, None).unwrap();
        let m = model(n, noise, CoefficientSet::builtin(3.0), 0.1);
        let phi = Segment::constant(0.1, 0.02, &[0.2, 0.0, 0.1]).unwrap();
        let psi = Segment::constant(0.1, 0.02, &[0.3, 0.0, 0.1]).unwrap();
        let cfg = SolverConfig { dt: 0.02, ..SolverConfig::default() };
        let pts = continuous_dependence_probe(&phi, &[phi.clone(), psi], 3.0, 0.5, &m, &cfg, 8, 11).unwrap();
        assert_eq!(pts[0].estimate, 0.0);
        assert!(pts[1].estimate > 0.0);
        assert!((pts[1].distance - 0.1).abs() < 1e-15);
    }

    #[test]
    fn ensemble_is_reproducible_and_ordered() {
        let n = 2;
        let noise = QWienerSpec::builtin(NoiseKind::Geometric, n, 0.0, None).unwrap();
        let m = model(n, noise, CoefficientSet::builtin(3.0), 0.1);
        let phi = Segment::zeros(0.1, 0.05, n).unwrap();
        let cfg = SolverConfig { dt: 0.05, t_end: 1.0, ..SolverConfig::default() };
        let a = run_ensemble(&phi, &m, &cfg, 9, 4, 6).unwrap();
        let b = run_ensemble(&phi, &m, &cfg, 9, 4, 6).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.iter().map(|t| t.stream).collect::<Vec<_>>(), vec![4, 5, 6, 7, 8, 9]);
    }
}
