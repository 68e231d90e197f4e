//! Pathwise Picard iteration: iterate 0 solves the neutral linear equation
//! without drift and diffusion, iterate `n` uses `f` and `sigma` evaluated
//! along iterate `n - 1`. Every iterate is driven by the same noise path.

use serde::Serialize;

use super::{Forcing, Model, SolverConfig, Stepper, Trajectory};
use crate::error::{Error, Result};
use crate::noise::RngStream;
use crate::segment::Segment;

#[derive(Debug, Clone, Serialize)]
pub struct PicardIterate {
    pub iter: usize,
    pub trajectory: Trajectory,
    /// `sup_t ||u^(n)(t) - u^(n-1)(t)||` over all grid times; `None` for iterate 0.
    pub sup_diff: Option<f64>,
}

fn sup_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Internal(format!("iterate lengths differ: {} vs {}", a.len(), b.len())));
    }
    Ok(a.iter()
        .zip(b)
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt())
        .fold(0.0, f64::max))
}

/// Runs iterates `0..=cfg.picard_iters` from the window `initial`.
pub fn picard_run(initial: &Segment, model: &Model, cfg: &SolverConfig, rng: &mut RngStream) -> Result<Vec<PicardIterate>> {
    if cfg.picard_iters < 2 {
        return Err(Error::Config(format!("solver.picard_iters must be at least 2, got {}", cfg.picard_iters)));
    }
    let n = model.n_modes();
    let n_steps = cfg.n_steps();
    let mut normals = vec![0.0; n_steps * n];
    rng.fill_standard_normal(&mut normals);

    let mut out: Vec<PicardIterate> = Vec::with_capacity(cfg.picard_iters + 1);
    let mut previous: Option<Vec<Vec<f64>>> = None;
    for iter in 0..=cfg.picard_iters {
        let mut stepper = Stepper::new(model, cfg)?;
        let mut seg = initial.clone();
        let mut source = initial.clone();
        let mut states = Vec::with_capacity(n_steps + 1);
        states.push(seg.current().to_vec());
        let mut seg_norms = vec![seg.sup_norm()];
        let mut max_fp_iters = 0;
        for i in 0..n_steps {
            let z = normals
                .get(i * n..(i + 1) * n)
                .ok_or_else(|| Error::Internal("replayed noise path is too short".into()))?;
            let forcing = if previous.is_some() { Forcing::From(&source) } else { Forcing::None };
            let info = stepper.advance(&mut seg, z, forcing, i as f64 * cfg.dt)?;
            max_fp_iters = max_fp_iters.max(info.fp_iters);
            if let Some(prev) = &previous {
                source.shift_append(&prev[i + 1])?;
            }
            states.push(seg.current().to_vec());
            seg_norms.push(seg.sup_norm());
        }
        let diff = match &previous {
            Some(prev) => Some(sup_diff(&states, prev)?),
            None => None,
        };
        let keep: Vec<usize> = (0..=n_steps).step_by(cfg.store_stride).collect();
        let trajectory = Trajectory {
            seed: rng.seed(),
            stream: rng.stream_id(),
            times: keep.iter().map(|&i| i as f64 * cfg.dt).collect(),
            snapshots: keep.iter().map(|&i| states[i].clone()).collect(),
            seg_norms: keep.iter().map(|&i| seg_norms[i]).collect(),
            checkpoints: Vec::new(),
            max_fp_iters,
            final_segment: seg,
        };
        out.push(PicardIterate { iter, trajectory, sup_diff: diff });
        previous = Some(states);
    }
    Ok(out)
}
