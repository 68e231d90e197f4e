//! The delay window `u_t(theta) = u(t + theta)`, `theta in [-h, 0]`, stored on
//! a uniform grid of `m + 1` nodes with `h = m dt`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::PhysicalGrid;
use crate::spectral::SpectralOperator;

const RATIO_TOL: f64 = 1e-9;

/// Number of grid steps in the window, `m = h / dt`, which must be a positive integer.
pub fn steps_per_delay(h: f64, dt: f64) -> Result<usize> {
    if !(h > 0.0 && dt > 0.0) {
        return Err(Error::Config(format!("h and dt must be positive (h = {h}, dt = {dt})")));
    }
    let ratio = h / dt;
    let m = ratio.round();
    if m < 1.0 || (ratio - m).abs() > RATIO_TOL * ratio.max(1.0) {
        return Err(Error::Config(format!("h / dt = {ratio} is not a positive integer (h = {h}, dt = {dt})")));
    }
    Ok(m as usize)
}

/// Ring buffer of `m + 1` mode vectors; node `j` holds `u(t - h + j dt)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "SegmentRecord", try_from = "SegmentRecord")]
pub struct Segment {
    h: f64,
    dt: f64,
    m: usize,
    n_modes: usize,
    data: Vec<f64>,
    head: usize,
}

#[derive(Serialize, Deserialize)]
struct SegmentRecord {
    h: f64,
    dt: f64,
    values: Vec<Vec<f64>>,
}

impl From<Segment> for SegmentRecord {
    fn from(seg: Segment) -> Self {
        SegmentRecord { h: seg.h, dt: seg.dt, values: seg.to_vecs() }
    }
}

impl TryFrom<SegmentRecord> for Segment {
    type Error = Error;
    fn try_from(rec: SegmentRecord) -> Result<Self> {
        Segment::from_values(rec.h, rec.dt, rec.values)
    }
}

impl Segment {
    pub fn from_values(h: f64, dt: f64, values: Vec<Vec<f64>>) -> Result<Self> {
        let m = steps_per_delay(h, dt)?;
        if values.len() != m + 1 {
            return Err(Error::shape(m + 1, values.len()));
        }
        let n_modes = values[0].len();
        let mut data = Vec::with_capacity((m + 1) * n_modes);
        for v in &values {
            if v.len() != n_modes {
                return Err(Error::shape(n_modes, v.len()));
            }
            data.extend_from_slice(v);
        }
        Ok(Segment { h, dt, m, n_modes, data, head: 0 })
    }

    pub fn constant(h: f64, dt: f64, value: &[f64]) -> Result<Self> {
        let m = steps_per_delay(h, dt)?;
        let data = value.iter().copied().cycle().take((m + 1) * value.len()).collect();
        Ok(Segment { h, dt, m, n_modes: value.len(), data, head: 0 })
    }

    pub fn zeros(h: f64, dt: f64, n_modes: usize) -> Result<Self> {
        Segment::constant(h, dt, &vec![0.0; n_modes])
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Steps per window.
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    fn slot(&self, j: usize) -> usize {
        (self.head + j) % (self.m + 1)
    }

    /// Node `j`, i.e. `u(t - h + j dt)`.
    pub fn node(&self, j: usize) -> &[f64] {
        let s = self.slot(j) * self.n_modes;
        &self.data[s..s + self.n_modes]
    }

    /// `u(t)`.
    pub fn current(&self) -> &[f64] {
        self.node(self.m)
    }

    /// `u(t - h)`.
    pub fn oldest(&self) -> &[f64] {
        self.node(0)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..=self.m).map(move |j| self.node(j))
    }

    pub fn to_vecs(&self) -> Vec<Vec<f64>> {
        self.nodes().map(<[f64]>::to_vec).collect()
    }

    /// Grid approximation of `sup_theta ||u(t + theta)||`.
    pub fn sup_norm(&self) -> f64 {
        self.nodes().map(l2_norm).fold(0.0, f64::max)
    }

    /// Linear interpolation in theta; exact at nodes.
    pub fn evaluate(&self, theta: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.n_modes];
        self.evaluate_into(theta, &mut out)?;
        Ok(out)
    }

    pub fn evaluate_into(&self, theta: f64, out: &mut [f64]) -> Result<()> {
        if !(theta >= -self.h * (1.0 + 1e-12) && theta <= 0.0) {
            return Err(Error::Domain(format!("theta = {theta} outside [-{}, 0]", self.h)));
        }
        let pos = ((theta + self.h) / self.dt).clamp(0.0, self.m as f64);
        let near = pos.round();
        if (pos - near).abs() <= 1e-9 {
            out.copy_from_slice(self.node(near as usize));
            return Ok(());
        }
        let j = (pos.floor() as usize).min(self.m - 1);
        let w = pos - j as f64;
        for ((o, a), b) in out.iter_mut().zip(self.node(j)).zip(self.node(j + 1)) {
            *o = (1.0 - w) * a + w * b;
        }
        Ok(())
    }

    /// Advances the window by one step: drops the oldest node and appends `new_value`.
    pub fn shift_append(&mut self, new_value: &[f64]) -> Result<()> {
        if new_value.len() != self.n_modes {
            return Err(Error::shape(self.n_modes, new_value.len()));
        }
        let s = self.head * self.n_modes;
        self.data[s..s + self.n_modes].copy_from_slice(new_value);
        self.head = (self.head + 1) % (self.m + 1);
        Ok(())
    }

    /// Non-mutating form of [`Segment::shift_append`].
    pub fn shifted(&self, new_value: &[f64]) -> Result<Segment> {
        let mut next = self.clone();
        next.shift_append(new_value)?;
        Ok(next)
    }

    /// Overwrites `u(t)`; used by the implicit neutral solve.
    pub(crate) fn set_current(&mut self, value: &[f64]) {
        let s = self.slot(self.m) * self.n_modes;
        self.data[s..s + self.n_modes].copy_from_slice(value);
    }

    /// Pointwise difference `self - other` as a new segment.
    pub fn difference(&self, other: &Segment) -> Result<Segment> {
        if self.m != other.m || self.n_modes != other.n_modes {
            return Err(Error::shape(self.data.len(), other.data.len()));
        }
        let values = self
            .nodes()
            .zip(other.nodes())
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
            .collect();
        Segment::from_values(self.h, self.dt, values)
    }

    /// CSV dump with columns `theta, mode_1..mode_N`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["theta".to_string()];
        header.extend((1..=self.n_modes).map(|k| format!("mode_{k}")));
        w.write_record(&header)?;
        for (j, node) in self.nodes().enumerate() {
            let theta = -self.h + j as f64 * self.dt;
            let mut row = vec![format!("{theta}")];
            row.extend(node.iter().map(|v| format!("{v}")));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Time dependence of a separable initial profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeProfile {
    Constant,
    /// `1 + theta / h`: zero at `-h`, one at 0.
    Ramp,
}

/// Spatial shape of a separable initial profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum SpaceProfile {
    Zero,
    /// `amplitude * sin(k pi x)`
    Sine { k: usize, amplitude: f64 },
    /// `u(x) = value` on (0, 1).
    Uniform { value: f64 },
    /// Explicit mode coefficients.
    Modes { coeffs: Vec<f64> },
}

/// `phi(theta, x) = c(theta) * s(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialCondition {
    pub time: TimeProfile,
    pub space: SpaceProfile,
}

impl Default for InitialCondition {
    fn default() -> Self {
        InitialCondition { time: TimeProfile::Constant, space: SpaceProfile::Zero }
    }
}

/// Samples a separable initial condition at the window nodes.
pub fn from_initial_condition(
    phi: &InitialCondition,
    h: f64,
    dt: f64,
    op: &SpectralOperator,
) -> Result<Segment> {
    let m = steps_per_delay(h, dt)?;
    let n = op.n_modes();
    let profile = match &phi.space {
        SpaceProfile::Zero => vec![0.0; n],
        SpaceProfile::Modes { coeffs } => {
            if coeffs.len() != n {
                return Err(Error::shape(n, coeffs.len()));
            }
            coeffs.clone()
        }
        SpaceProfile::Sine { k, amplitude } => {
            let grid = PhysicalGrid::new(op, (4 * n).max(4 * k).max(1024));
            let freq = *k as f64 * std::f64::consts::PI;
            grid.project_fn(|x| amplitude * (freq * x).sin())
        }
        SpaceProfile::Uniform { value } => {
            let grid = PhysicalGrid::new(op, (4 * n).max(1024));
            grid.project_fn(|_| *value)
        }
    };
    let values = (0..=m)
        .map(|j| {
            let c = match phi.time {
                TimeProfile::Constant => 1.0,
                TimeProfile::Ramp => j as f64 / m as f64,
            };
            profile.iter().map(|v| c * v).collect()
        })
        .collect();
    Segment::from_values(h, dt, values)
}
