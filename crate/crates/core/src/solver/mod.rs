//! Exponential-Euler time stepping of the mild formulation.
//!
//! With `v = u + g(u_t)`, one step of length `dt` reads
//!
//! ```text
//! v(t + dt) = S(dt) v(t) + (I - S(dt)) g(u_t) + Phi_1(dt) f(u_t) + xi
//! ```
//!
//! i.e. `u(t + dt) = S(dt) u(t) + g(u_t) - g(u_{t+dt}) + Phi_1 f(u_t) + xi`,
//! where `Phi_1 = (1 - e^{-mu dt}) / mu` per mode, the neutral term is frozen
//! at the left endpoint inside the convolution (the integral of `A S` is then
//! exact), and `xi` is the exact Ornstein-Uhlenbeck increment multiplied by
//! `sigma(u(t - h))`.

pub mod contraction;
pub mod picard;

use serde::{Deserialize, Serialize};

use crate::coefficients::{kernel_into, multiplier, nemytskii_into, CoefficientSet, Multiplier, Workspace};
use crate::error::{Error, Result};
use crate::grid::PhysicalGrid;
use crate::noise::{ou_increment_std, QWienerSpec, RngStream};
use crate::segment::{l2_norm, steps_per_delay, Segment};
use crate::spectral::SpectralOperator;

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_FP_TOL: f64 = 1e-12;
pub const DEFAULT_FP_MAX: usize = 200;
pub const DEFAULT_PICARD_ITERS: usize = 8;
/// States with `||u|| > BLOWUP_NORM` abort the run.
pub const BLOWUP_NORM: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Direct,
    Picard,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_end: f64,
    pub fp_tol: f64,
    pub fp_max: usize,
    pub mode: Mode,
    pub picard_iters: usize,
    /// Snapshot every `store_stride` steps.
    pub store_stride: usize,
    /// Full-window checkpoints every `checkpoint_stride` steps (none if 0).
    pub checkpoint_stride: usize,
    /// Checkpoints are kept only from this time on.
    pub checkpoint_after: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            dt: DEFAULT_DT,
            t_end: 1.0,
            fp_tol: DEFAULT_FP_TOL,
            fp_max: DEFAULT_FP_MAX,
            mode: Mode::Direct,
            picard_iters: DEFAULT_PICARD_ITERS,
            store_stride: 1,
            checkpoint_stride: 0,
            checkpoint_after: 0.0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self, h: f64) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("solver.dt must be positive, got {}", self.dt)));
        }
        steps_per_delay(h, self.dt)?;
        if !(self.t_end >= self.dt * (1.0 - 1e-12)) {
            return Err(Error::Config(format!("solver.t_end = {} is shorter than dt = {}", self.t_end, self.dt)));
        }
        if !(self.fp_tol > 0.0) {
            return Err(Error::Config(format!("solver.fp_tol must be positive, got {}", self.fp_tol)));
        }
        if self.fp_max == 0 {
            return Err(Error::Config("solver.fp_max must be at least 1".into()));
        }
        if self.store_stride == 0 {
            return Err(Error::Config("solver.store_stride must be at least 1".into()));
        }
        if self.mode == Mode::Picard && self.picard_iters < 2 {
            return Err(Error::Config(format!("solver.picard_iters must be at least 2, got {}", self.picard_iters)));
        }
        Ok(())
    }

    /// Number of steps to reach `t_end`.
    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

/// Operator, noise and coefficients of one equation, with the quadrature grid.
#[derive(Debug, Clone)]
pub struct Model {
    pub op: SpectralOperator,
    pub noise: QWienerSpec,
    pub coeffs: CoefficientSet,
    pub grid: PhysicalGrid,
    pub h: f64,
}

impl Model {
    pub fn new(op: SpectralOperator, noise: QWienerSpec, coeffs: CoefficientSet, h: f64) -> Result<Self> {
        if noise.n_modes() != op.n_modes() {
            return Err(Error::shape(op.n_modes(), noise.n_modes()));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Config(format!("h must be positive, got {h}")));
        }
        coeffs.validate()?;
        let theta = coeffs.g_read_point(h);
        if !(theta >= -h && theta <= 0.0) {
            return Err(Error::Config(format!("coefficients.g_theta = {theta} outside [-h, 0]")));
        }
        let grid = coeffs.grid(&op);
        Ok(Model { op, noise, coeffs, grid, h })
    }

    pub fn n_modes(&self) -> usize {
        self.op.n_modes()
    }

    /// `g(u_t)` read from a window.
    pub fn g_of(&self, seg: &Segment) -> Result<Vec<f64>> {
        let read = seg.evaluate(self.coeffs.g_read_point(seg.h()))?;
        let mut out = vec![0.0; self.n_modes()];
        kernel_into(&self.coeffs.kernel, &read, &self.grid, &mut Workspace::new(&self.grid), &mut out);
        Ok(out)
    }
}

/// Which drift and diffusion a step uses.
#[derive(Debug, Clone, Copy)]
pub enum Forcing<'s> {
    /// `f` and `sigma` of the window being advanced.
    Own,
    /// `f` and `sigma` frozen to zero.
    None,
    /// `f` and `sigma` evaluated on another window (a previous Picard iterate).
    From(&'s Segment),
}

/// Outcome of one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub fp_iters: usize,
    pub norm: f64,
}

/// Per-run step engine holding the step-size dependent factors and scratch space.
pub struct Stepper<'m> {
    model: &'m Model,
    dt: f64,
    fp_tol: f64,
    fp_max: usize,
    decay: Vec<f64>,
    phi1: Vec<f64>,
    ou_std: Vec<f64>,
    /// `g` reads only known history when advancing.
    explicit: bool,
    theta_g: f64,
    ws: Workspace,
    field: Vec<f64>,
    f_val: Vec<f64>,
    xi: Vec<f64>,
    rhs: Vec<f64>,
    read: Vec<f64>,
    g_old: Vec<f64>,
    g_new: Vec<f64>,
    next: Vec<f64>,
    /// `g_old` matches the window passed to the next step.
    g_cached: bool,
    residuals: Vec<f64>,
}

impl<'m> Stepper<'m> {
    pub fn new(model: &'m Model, cfg: &SolverConfig) -> Result<Self> {
        cfg.validate(model.h)?;
        let dt = cfg.dt;
        let mu = model.op.eigenvalues();
        let decay = mu.iter().map(|m| (-m * dt).exp()).collect();
        let phi1 = mu.iter().map(|&m| if m == 0.0 { dt } else { -(-m * dt).exp_m1() / m }).collect();
        let ou_std = ou_increment_std(&model.noise, &model.op, dt)?;
        let theta_g = model.coeffs.g_read_point(model.h);
        let n = model.n_modes();
        Ok(Stepper {
            model,
            dt,
            fp_tol: cfg.fp_tol,
            fp_max: cfg.fp_max,
            decay,
            phi1,
            ou_std,
            explicit: model.coeffs.kernel.is_zero() || theta_g <= -dt * (1.0 - 1e-9),
            theta_g,
            ws: Workspace::new(&model.grid),
            field: vec![0.0; model.grid.len()],
            f_val: vec![0.0; n],
            xi: vec![0.0; n],
            rhs: vec![0.0; n],
            read: vec![0.0; n],
            g_old: vec![0.0; n],
            g_new: vec![0.0; n],
            next: vec![0.0; n],
            g_cached: false,
            residuals: Vec::new(),
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// True when no fixed-point iteration is needed.
    pub fn is_explicit(&self) -> bool {
        self.explicit
    }

    /// Successive-iterate differences of the last implicit solve.
    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    /// Forgets the cached `g(u_t)`; required before stepping a window other
    /// than the one produced by the previous call.
    pub fn reset(&mut self) {
        self.g_cached = false;
    }

    /// `g(u_t)` of the last completed step (the bracket is `u + g`).
    pub fn current_g(&self) -> &[f64] {
        &self.g_old
    }

    fn kernel(&mut self, seg: &Segment, theta: f64, out_new: bool) -> Result<()> {
        seg.evaluate_into(theta, &mut self.read)?;
        let out = if out_new { &mut self.g_new } else { &mut self.g_old };
        kernel_into(&self.model.coeffs.kernel, &self.read, &self.model.grid, &mut self.ws, out);
        Ok(())
    }

    /// Advances `seg` from `t` to `t + dt` in place using the standard normals `z`.
    pub fn advance(&mut self, seg: &mut Segment, z: &[f64], forcing: Forcing<'_>, t: f64) -> Result<StepInfo> {
        let model = self.model;
        let n = model.n_modes();
        if seg.n_modes() != n || z.len() != n {
            return Err(Error::shape(n, seg.n_modes().min(z.len())));
        }
        if (seg.dt() - self.dt).abs() > 1e-12 * self.dt {
            return Err(Error::Config(format!("window spacing {} differs from dt = {}", seg.dt(), self.dt)));
        }
        let has_g = !model.coeffs.kernel.is_zero();
        if has_g && !self.g_cached {
            self.kernel(seg, self.theta_g, false)?;
        } else if !has_g {
            self.g_old.iter_mut().for_each(|v| *v = 0.0);
        }

        let source = match forcing {
            Forcing::Own => Some(&*seg),
            Forcing::None => None,
            Forcing::From(other) => {
                if other.n_modes() != n {
                    return Err(Error::shape(n, other.n_modes()));
                }
                Some(other)
            }
        };
        let cs = &model.coeffs;
        match source {
            Some(src) if !cs.f.is_zero() => nemytskii_into(&cs.f, src.oldest(), &model.grid, &mut self.ws, &mut self.f_val),
            _ => self.f_val.iter_mut().for_each(|v| *v = 0.0),
        }
        let sigma = match source {
            Some(src) => multiplier(&cs.sigma, src.oldest(), &model.grid),
            None => Multiplier::Constant(0.0),
        };
        for k in 0..n {
            self.xi[k] = self.ou_std[k] * z[k];
        }
        match &sigma {
            Multiplier::Constant(c) => self.xi.iter_mut().for_each(|v| *v *= c),
            Multiplier::Field(m) => {
                model.grid.synthesize_into(&self.xi, &mut self.field);
                self.field.iter_mut().zip(m).for_each(|(v, s)| *v *= s);
                model.grid.project_into(&self.field, &mut self.xi);
            }
        }
        let u = seg.current();
        for k in 0..n {
            self.rhs[k] = self.decay[k] * u[k] + self.g_old[k] + self.phi1[k] * self.f_val[k] + self.xi[k];
        }

        self.residuals.clear();
        let mut fp_iters = 0;
        if !has_g {
            self.g_new.iter_mut().for_each(|v| *v = 0.0);
            seg.shift_append(&self.rhs)?;
        } else if self.explicit {
            // u(t + dt + theta_g) lies in the current window
            self.kernel(seg, self.theta_g + self.dt, true)?;
            for k in 0..n {
                self.next[k] = self.rhs[k] - self.g_new[k];
            }
            seg.shift_append(&self.next)?;
        } else {
            // start from u^(0) = u(t)
            self.next.copy_from_slice(seg.current());
            seg.shift_append(&self.next)?;
            loop {
                if fp_iters >= self.fp_max {
                    return Err(Error::NonConvergence {
                        iters: fp_iters,
                        residual: self.residuals.last().copied().unwrap_or(f64::NAN),
                    });
                }
                self.kernel(seg, self.theta_g, true)?;
                fp_iters += 1;
                let mut diff = 0.0;
                let cur = seg.current();
                for k in 0..n {
                    self.next[k] = self.rhs[k] - self.g_new[k];
                    diff += (self.next[k] - cur[k]).powi(2);
                }
                let diff = diff.sqrt();
                seg.set_current(&self.next);
                self.residuals.push(diff);
                if !diff.is_finite() {
                    return Err(Error::Blowup { t: t + self.dt, norm: diff });
                }
                if diff < self.fp_tol {
                    break;
                }
            }
            self.kernel(seg, self.theta_g, true)?;
        }
        std::mem::swap(&mut self.g_old, &mut self.g_new);
        self.g_cached = has_g;

        let norm = l2_norm(seg.current());
        if !(norm <= BLOWUP_NORM) {
            return Err(Error::Blowup { t: t + self.dt, norm });
        }
        Ok(StepInfo { fp_iters, norm })
    }
}

/// One step from the window `seg` at time `t`; returns `u(t + dt)` and the
/// number of fixed-point iterations. Draws `N` standard normals from `rng`.
pub fn step(model: &Model, seg: &Segment, cfg: &SolverConfig, rng: &mut RngStream) -> Result<(Vec<f64>, usize)> {
    let mut stepper = Stepper::new(model, cfg)?;
    let mut z = vec![0.0; model.n_modes()];
    rng.fill_standard_normal(&mut z);
    let mut next = seg.clone();
    let info = stepper.advance(&mut next, &z, Forcing::Own, 0.0)?;
    Ok((next.current().to_vec(), info.fp_iters))
}

/// Full window stored during a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub time: f64,
    pub segment: Segment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub seed: u64,
    pub stream: u64,
    pub times: Vec<f64>,
    pub snapshots: Vec<Vec<f64>>,
    /// `||u_t||_C` at the snapshot times.
    pub seg_norms: Vec<f64>,
    pub checkpoints: Vec<Checkpoint>,
    pub max_fp_iters: usize,
    pub final_segment: Segment,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `sup_t ||u(t)||` over the snapshots.
    pub fn max_state_norm(&self) -> f64 {
        self.snapshots.iter().map(|s| l2_norm(s)).fold(0.0, f64::max)
    }
}

/// Integrates from the window `initial` at time 0 to `cfg.t_end`.
pub fn simulate(initial: &Segment, model: &Model, cfg: &SolverConfig, rng: &mut RngStream) -> Result<Trajectory> {
    simulate_from(initial, 0.0, model, cfg, rng)
}

/// As [`simulate`], with the run starting at time `t0` and ending at `t0 + cfg.t_end`.
pub fn simulate_from(
    initial: &Segment,
    t0: f64,
    model: &Model,
    cfg: &SolverConfig,
    rng: &mut RngStream,
) -> Result<Trajectory> {
    let mut stepper = Stepper::new(model, cfg)?;
    if initial.n_modes() != model.n_modes() {
        return Err(Error::shape(model.n_modes(), initial.n_modes()));
    }
    if steps_per_delay(initial.h(), initial.dt())? != steps_per_delay(model.h, cfg.dt)? {
        return Err(Error::Config(format!(
            "initial window (h = {}, dt = {}) does not match h = {}, dt = {}",
            initial.h(),
            initial.dt(),
            model.h,
            cfg.dt
        )));
    }
    let n_steps = cfg.n_steps();
    let mut seg = initial.clone();
    let mut z = vec![0.0; model.n_modes()];
    let mut traj = Trajectory {
        seed: rng.seed(),
        stream: rng.stream_id(),
        times: Vec::with_capacity(n_steps / cfg.store_stride + 1),
        snapshots: Vec::with_capacity(n_steps / cfg.store_stride + 1),
        seg_norms: Vec::with_capacity(n_steps / cfg.store_stride + 1),
        checkpoints: Vec::new(),
        max_fp_iters: 0,
        final_segment: initial.clone(),
    };
    let record = |traj: &mut Trajectory, seg: &Segment, i: usize| {
        let t = t0 + i as f64 * cfg.dt;
        if i % cfg.store_stride == 0 {
            traj.times.push(t);
            traj.snapshots.push(seg.current().to_vec());
            traj.seg_norms.push(seg.sup_norm());
        }
        if cfg.checkpoint_stride > 0 && i % cfg.checkpoint_stride == 0 && t - t0 >= cfg.checkpoint_after - 1e-9 * cfg.dt {
            traj.checkpoints.push(Checkpoint { time: t, segment: seg.clone() });
        }
    };
    record(&mut traj, &seg, 0);
    for i in 0..n_steps {
        rng.fill_standard_normal(&mut z);
        let info = stepper.advance(&mut seg, &z, Forcing::Own, t0 + i as f64 * cfg.dt)?;
        traj.max_fp_iters = traj.max_fp_iters.max(info.fp_iters);
        record(&mut traj, &seg, i + 1);
    }
    traj.final_segment = seg;
    Ok(traj)
}
