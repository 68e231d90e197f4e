//! Numerical checks of the structural conditions on the coefficients.

use std::cell::Cell;

use serde::Serialize;

use super::{kernel_into, multiplier, nemytskii_into, CoefficientSet, Modulus, Multiplier, ScalarFn, Workspace};
use crate::error::{Error, Result};
use crate::grid::PhysicalGrid;
use crate::noise::{QWienerSpec, RngStream};
use crate::quadrature::adaptive_simpson;
use crate::segment::{l2_norm, Segment};
use crate::spectral::SpectralOperator;

/// Relative slack for rounding at equality cases of `|f(x) - f(y)|^p <= N(|x - y|^p)`.
pub const MODULUS_REL_SLACK: f64 = 1e-12;
/// Tolerance of the midpoint concavity and monotonicity tests.
const SHAPE_TOL: f64 = 1e-12;

/// `int_eps^1 ds / N(s)` by adaptive Simpson in the variable `v = -ln s`.
pub fn osgood_integral(n: &Modulus, eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Domain(format!("eps must lie in (0, 1), got {eps}")));
    }
    let v_max = -eps.ln();
    let mut cuts: Vec<f64> = vec![0.0];
    let mut v = 1.0;
    while v < v_max {
        cuts.push(v);
        v += 1.0;
    }
    for b in n.breakpoints() {
        if b > eps && b < 1.0 {
            cuts.push(-b.ln());
        }
    }
    cuts.push(v_max);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let singular = Cell::new(None);
    let integrand = |v: f64| {
        let s = (-v).exp();
        let ns = n.eval(s);
        if !(ns > 0.0) {
            singular.set(Some(s));
            return 0.0;
        }
        s / ns
    };
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let coarse = (b - a) / 6.0 * (integrand(a) + 4.0 * integrand(0.5 * (a + b)) + integrand(b));
        let tol = 1e-13 * coarse.abs().max(1e-300);
        total += adaptive_simpson(integrand, a, b, tol);
        if let Some(s) = singular.get() {
            return Err(Error::SingularModulus(s));
        }
    }
    Ok(total)
}

/// `eps_k = exp(-e^k)`, on which `ln ln(1/eps_k) = k`.
pub fn osgood_eps(k: u32) -> f64 {
    (-(k as f64).exp()).exp()
}

#[derive(Debug, Clone, Serialize)]
pub struct OsgoodReport {
    pub eps: Vec<f64>,
    pub values: Vec<f64>,
    /// Values increase without the increments dying out.
    pub diverges: bool,
    /// `N(0) = 0`, nondecreasing and concave on the sampled grid.
    pub admissible: bool,
    /// Both of the above: the uniqueness condition is certified.
    pub certified: bool,
}

/// Divergence heuristic along `eps_k`, `k = 1..=5`: the integrals must grow
/// strictly and the last increment must stay at least half the first. The
/// borderline `-s ln s` has constant unit increments there; convergent
/// integrals have increments decaying to zero.
pub fn osgood_report(n: &Modulus) -> Result<OsgoodReport> {
    let eps: Vec<f64> = (1..=5).map(osgood_eps).collect();
    let values = eps.iter().map(|&e| osgood_integral(n, e)).collect::<Result<Vec<f64>>>()?;
    let incr: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    let diverges = incr.iter().all(|d| *d > 0.0) && incr[incr.len() - 1] >= 0.5 * incr[0];
    let admissible = modulus_admissible(n);
    Ok(OsgoodReport { eps, values, diverges, admissible, certified: diverges && admissible })
}

/// `N(0) = 0`, nondecreasing, and midpoint concave over all pairs of a log grid on `[1e-12, 10]`.
pub fn modulus_admissible(n: &Modulus) -> bool {
    if n.eval(0.0) != 0.0 {
        return false;
    }
    let mut s: Vec<f64> = crate::spectral::log_grid(1e-12, 10.0, 240);
    s.insert(0, 0.0);
    s.extend(n.breakpoints());
    s.sort_by(f64::total_cmp);
    let vals: Vec<f64> = s.iter().map(|&x| n.eval(x)).collect();
    if vals.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return false;
    }
    if vals.windows(2).any(|w| w[1] < w[0] - SHAPE_TOL * w[0].abs()) {
        return false;
    }
    for i in 0..s.len() {
        for j in i + 1..s.len() {
            let mid = n.eval(0.5 * (s[i] + s[j]));
            let chord = 0.5 * (vals[i] + vals[j]);
            if mid < chord - SHAPE_TOL * chord.abs().max(f64::MIN_POSITIVE) {
                return false;
            }
        }
    }
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModulusCheck {
    pub n_pairs: usize,
    pub violations: usize,
    pub max_ratio: f64,
}

/// `|s(x) - s(y)|^p / N(|x - y|^p)` with the convention `0 / 0 = 0`.
pub fn modulus_ratio(s: &ScalarFn, n: &Modulus, p: f64, x: f64, y: f64) -> f64 {
    let lhs = (s.eval(x) - s.eval(y)).abs().powf(p);
    let rhs = n.eval((x - y).abs().powf(p));
    if lhs == 0.0 {
        0.0
    } else if rhs > 0.0 {
        lhs / rhs
    } else {
        f64::INFINITY
    }
}

/// Samples scalar pairs and tests `|s(x) - s(y)|^p <= N(|x - y|^p)`.
/// Every hundredth pair is drawn log-uniform in `[1e-12, e^-2]`, the rest
/// uniform on `[-1, 1]`.
pub fn modulus_bound_check(s: &ScalarFn, n: &Modulus, p: f64, n_samples: usize, rng: &mut RngStream) -> ModulusCheck {
    let (lo, hi) = (1e-12f64.ln(), super::junction().ln());
    let mut violations = 0;
    let mut max_ratio: f64 = 0.0;
    for i in 0..n_samples {
        let (x, y) = if i % 100 == 0 {
            ((lo + (hi - lo) * rng.uniform()).exp(), (lo + (hi - lo) * rng.uniform()).exp())
        } else {
            (2.0 * rng.uniform() - 1.0, 2.0 * rng.uniform() - 1.0)
        };
        let r = modulus_ratio(s, n, p, x, y);
        if r > 1.0 + MODULUS_REL_SLACK {
            violations += 1;
        }
        max_ratio = max_ratio.max(r);
    }
    ModulusCheck { n_pairs: n_samples, violations, max_ratio }
}

/// Random smooth window: mode `k` follows
/// `amp k^-2 (a_k + b_k cos(pi s) + c_k sin(pi s))`, `s = theta / h`,
/// with standard normal `a, b, c`.
pub fn random_segment(h: f64, dt: f64, n_modes: usize, amplitude: f64, rng: &mut RngStream) -> Result<Segment> {
    let draws: Vec<[f64; 3]> = (0..n_modes)
        .map(|_| [rng.standard_normal(), rng.standard_normal(), rng.standard_normal()])
        .collect();
    let m = crate::segment::steps_per_delay(h, dt)?;
    let values = (0..=m)
        .map(|j| {
            let s = std::f64::consts::PI * (j as f64 / m as f64 - 1.0);
            draws
                .iter()
                .enumerate()
                .map(|(k, d)| amplitude / ((k + 1) * (k + 1)) as f64 * (d[0] + d[1] * s.cos() + d[2] * s.sin()) / 3f64.sqrt())
                .collect()
        })
        .collect();
    Segment::from_values(h, dt, values)
}

fn log_uniform(rng: &mut RngStream, lo: f64, hi: f64) -> f64 {
    (lo.ln() + (hi.ln() - lo.ln()) * rng.uniform()).exp()
}

/// Estimate of a constant with its threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbeReport {
    pub estimate: f64,
    pub threshold: f64,
    pub n_samples: usize,
    pub pass: bool,
}

impl ProbeReport {
    fn new(estimate: f64, threshold: f64, n_samples: usize) -> Self {
        ProbeReport { estimate, threshold, n_samples, pass: estimate <= threshold }
    }

    pub fn margin(&self) -> f64 {
        self.threshold - self.estimate
    }
}

/// `max ||g(phi1) - g(phi2)||_alpha / ||phi1 - phi2||_C` over sampled pairs.
/// Half the pairs are independent windows; the other half are perturbations
/// `phi2 = phi1 + eps psi` with `eps` log-uniform in `[1e-4, 1]`.
pub fn lipschitz_probe_g(
    cs: &CoefficientSet,
    op: &SpectralOperator,
    grid: &PhysicalGrid,
    h: f64,
    dt: f64,
    n_samples: usize,
    rng: &mut RngStream,
) -> Result<ProbeReport> {
    let n = op.n_modes();
    let theta = cs.g_read_point(h);
    let mut ws = Workspace::new(grid);
    let (mut g1, mut g2) = (vec![0.0; n], vec![0.0; n]);
    let mut best: f64 = 0.0;
    let mut used = 0;
    for i in 0..n_samples {
        let amp = log_uniform(rng, 1e-2, 10.0);
        let a = random_segment(h, dt, n, amp, rng)?;
        let b = if i % 2 == 0 {
            random_segment(h, dt, n, log_uniform(rng, 1e-2, 10.0), rng)?
        } else {
            let pert = random_segment(h, dt, n, amp * log_uniform(rng, 1e-4, 1.0), rng)?;
            let values = a
                .nodes()
                .zip(pert.nodes())
                .map(|(x, y)| x.iter().zip(y).map(|(u, v)| u + v).collect())
                .collect();
            Segment::from_values(h, dt, values)?
        };
        let dist = a.difference(&b)?.sup_norm();
        if dist == 0.0 {
            continue;
        }
        kernel_into(&cs.kernel, &a.evaluate(theta)?, grid, &mut ws, &mut g1);
        kernel_into(&cs.kernel, &b.evaluate(theta)?, grid, &mut ws, &mut g2);
        let diff: Vec<f64> = g1.iter().zip(&g2).map(|(x, y)| x - y).collect();
        best = best.max(op.fractional_norm(cs.alpha, &diff)? / dist);
        used += 1;
    }
    Ok(ProbeReport::new(best, cs.lipschitz_mg, used))
}

/// `||sigma(phi) Q^1/2||_HS` for the multiplication operator `sigma(phi)`.
pub fn sigma_hs_norm(m: &Multiplier, noise: &QWienerSpec, grid: &PhysicalGrid) -> f64 {
    match m {
        Multiplier::Constant(c) => c.abs() * noise.trace().sqrt(),
        Multiplier::Field(field) => {
            let mut total = 0.0;
            for (k, lambda) in noise.lambdas().iter().enumerate() {
                if *lambda == 0.0 {
                    continue;
                }
                let sq: f64 = (0..grid.len())
                    .map(|i| grid.weights()[i] * (field[i] * grid.basis_at(i)[k]).powi(2))
                    .sum();
                total += lambda * sq;
            }
            total.sqrt()
        }
    }
}

/// `max (||f(phi)|| + ||sigma(phi)||_HS) / (1 + ||phi||_C)` over sampled windows
/// with amplitudes log-uniform in `[1e-3, 1e2]`.
pub fn growth_check(
    cs: &CoefficientSet,
    noise: &QWienerSpec,
    grid: &PhysicalGrid,
    h: f64,
    dt: f64,
    n_samples: usize,
    rng: &mut RngStream,
) -> Result<ProbeReport> {
    let n = grid.n_modes();
    if noise.n_modes() != n {
        return Err(Error::shape(n, noise.n_modes()));
    }
    let mut ws = Workspace::new(grid);
    let mut fv = vec![0.0; n];
    let mut best: f64 = 0.0;
    for _ in 0..n_samples {
        let amp = log_uniform(rng, 1e-3, 1e2);
        let seg = random_segment(h, dt, n, amp, rng)?;
        nemytskii_into(&cs.f, seg.oldest(), grid, &mut ws, &mut fv);
        let m = multiplier(&cs.sigma, seg.oldest(), grid);
        let ratio = (l2_norm(&fv) + sigma_hs_norm(&m, noise, grid)) / (1.0 + seg.sup_norm());
        best = best.max(ratio);
    }
    Ok(ProbeReport::new(best, cs.growth_k, n_samples))
}
