//! TOML run configuration: loading, defaults, validation and the resolved dump.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::coefficients::{CoefficientSet, Kernel, Modulus, ScalarFn, DEFAULT_P};
use crate::error::{Error, Result};
use crate::measure::Observable;
use crate::noise::{NoiseKind, QWienerSpec};
use crate::segment::{from_initial_condition, steps_per_delay, InitialCondition, Segment, SpaceProfile, TimeProfile};
use crate::solver::{Model, SolverConfig};
use crate::spectral::{assemble_operator, Diffusivity, OperatorDescriptor, DEFAULT_DELTA_FRACTION, DEFAULT_N_MODES};

pub const DEFAULT_H: f64 = 0.1;
pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_NOISE_EXPONENT: f64 = 2.0;
pub const DEFAULT_TRAJECTORIES: usize = 20;
pub const DEFAULT_THIN: usize = 10;
pub const DEFAULT_R_GRID: [f64; 5] = [0.5, 1.0, 2.0, 4.0, 8.0];
pub const DEFAULT_INVARIANCE_T: f64 = 5.0;
pub const DEFAULT_DRAWS: usize = 500;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_const: Option<f64>,
    /// Samples of `a` on a uniform grid over [0, 1].
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_expr: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_modes: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_fraction: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<NoiseKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exponent: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace_target: Option<f64>,
    /// Explicit eigenvalues; overrides `kind`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambdas: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientsSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel: Option<String>,
    #[serde(rename = "N", skip_serializing_if = "Option::is_none")]
    pub modulus: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(rename = "Mg", skip_serializing_if = "Option::is_none")]
    pub mg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(rename = "K", skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g_theta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_points: Option<usize>,
}

/// User-declared linear functional `sum_k weights[k] u_k(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Functional {
    pub name: String,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trajectories: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub thin: Option<usize>,
    #[serde(rename = "R", skip_serializing_if = "Option::is_none")]
    pub r_grid: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub invariance_t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub draws: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub functionals: Option<Vec<Functional>>,
}

/// Values computed from the configuration, written to the resolved dump for
/// reference and ignored on load.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DerivedSection {
    pub mu_1: f64,
    pub delta: f64,
    pub steps_per_delay: usize,
}

/// The configuration file as written by the user.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(default)]
    pub operator: OperatorSection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub coefficients: CoefficientsSection,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub measure: MeasureSection,
    #[serde(default = "default_initial")]
    pub initial: InitialCondition,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derived: Option<DerivedSection>,
}

/// `0.1 sin(pi x)`, constant in `theta`.
pub fn default_initial() -> InitialCondition {
    InitialCondition { time: TimeProfile::Constant, space: SpaceProfile::Sine { k: 1, amplitude: 0.1 } }
}

/// Settings of the measure subcommands after defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureSettings {
    pub trajectories: usize,
    pub burn_in: f64,
    pub thin: usize,
    pub r_grid: Vec<f64>,
    pub invariance_t: f64,
    pub draws: usize,
    pub functionals: Vec<Functional>,
}

/// Fully validated configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub seed: u64,
    pub h: f64,
    pub operator: OperatorDescriptor,
    pub n_modes: usize,
    pub noise: QWienerSpec,
    pub coefficients: CoefficientSet,
    pub solver: SolverConfig,
    pub measure: MeasureSettings,
    pub initial: InitialCondition,
    /// The input with every default filled in.
    pub resolved: ConfigFile,
}

fn cfg_err(key: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("{key}: {msg}"))
}

/// Reads and validates a configuration file.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

/// Parses TOML text; errors carry the offending key path.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let de = toml::Deserializer::parse(text).map_err(|e| Error::Config(e.to_string()))?;
    let file: ConfigFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner().to_string();
        let inner = inner.trim();
        if path == "." {
            Error::Config(inner.to_string())
        } else {
            Error::Config(format!("{path}: {inner}"))
        }
    })?;
    resolve(file)
}

/// Applies defaults and validates.
pub fn resolve(file: ConfigFile) -> Result<RunConfig> {
    let seed = file.seed.unwrap_or(DEFAULT_SEED);
    let h = file.h.unwrap_or(DEFAULT_H);
    if !(h > 0.0 && h.is_finite()) {
        return Err(cfg_err("h", format!("delay must be positive, got {h}")));
    }

    let op_sec = &file.operator;
    let kind = op_sec.kind.clone().unwrap_or_else(|| "laplacian_1d".into());
    if kind != "laplacian_1d" {
        return Err(cfg_err("operator.kind", format!("unknown operator `{kind}` (expected laplacian_1d)")));
    }
    let diffusivity = match (&op_sec.a_const, &op_sec.a_expr) {
        (Some(_), Some(_)) => return Err(cfg_err("operator", "give either a_const or a_expr, not both")),
        (_, Some(samples)) => Diffusivity::Tabulated(samples.clone()),
        (a, None) => Diffusivity::Constant(a.unwrap_or(1.0)),
    };
    let n_modes = op_sec.n_modes.unwrap_or(DEFAULT_N_MODES);
    if n_modes == 0 {
        return Err(cfg_err("operator.n_modes", "must be at least 1"));
    }
    let delta_fraction = op_sec.delta_fraction.unwrap_or(DEFAULT_DELTA_FRACTION);
    let operator = OperatorDescriptor { diffusivity, delta_fraction };
    let op = assemble_operator(&operator, n_modes).map_err(|e| cfg_err("operator", e))?;

    let noise_sec = &file.noise;
    let noise_kind = noise_sec.kind.unwrap_or(NoiseKind::Geometric);
    let exponent = noise_sec.exponent.unwrap_or(DEFAULT_NOISE_EXPONENT);
    let noise = match &noise_sec.lambdas {
        Some(l) if l.len() != n_modes => {
            return Err(cfg_err("noise.lambdas", format!("expected {n_modes} values, got {}", l.len())))
        }
        Some(l) => QWienerSpec::new(l.clone()),
        None => QWienerSpec::builtin(noise_kind, n_modes, exponent, noise_sec.trace_target),
    }
    .map_err(|e| cfg_err("noise", e))?;

    let cs_sec = &file.coefficients;
    let p = cs_sec.p.unwrap_or(DEFAULT_P);
    let builtin = CoefficientSet::builtin(p);
    let scalar = |key: &str, v: &Option<String>, default: ScalarFn| -> Result<ScalarFn> {
        match v {
            Some(name) => ScalarFn::parse(name, p).map_err(|e| cfg_err(key, e)),
            None => Ok(default),
        }
    };
    let coefficients = CoefficientSet {
        f: scalar("coefficients.f", &cs_sec.f, builtin.f)?,
        sigma: scalar("coefficients.sigma", &cs_sec.sigma, builtin.sigma)?,
        kernel: match &cs_sec.kernel {
            Some(name) => Kernel::parse(name).map_err(|e| cfg_err("coefficients.kernel", e))?,
            None => builtin.kernel.clone(),
        },
        g_theta: cs_sec.g_theta,
        modulus: match &cs_sec.modulus {
            Some(name) => Modulus::parse(name).map_err(|e| cfg_err("coefficients.N", e))?,
            None => builtin.modulus,
        },
        growth_k: cs_sec.k.unwrap_or(builtin.growth_k),
        lipschitz_mg: cs_sec.mg.unwrap_or(builtin.lipschitz_mg),
        alpha: cs_sec.alpha.unwrap_or(builtin.alpha),
        p,
        grid_points: cs_sec.grid_points,
    };
    coefficients.validate()?;
    if let Some(theta) = coefficients.g_theta {
        if !(-h..=0.0).contains(&theta) {
            return Err(cfg_err("coefficients.g_theta", format!("must lie in [-h, 0] = [{}, 0], got {theta}", -h)));
        }
    }

    let solver = file.solver.clone();
    let m = steps_per_delay(h, solver.dt).map_err(|e| cfg_err("solver.dt", e))?;
    solver.validate(h)?;

    let ms = &file.measure;
    let t_end = solver.t_end;
    let measure = MeasureSettings {
        trajectories: ms.trajectories.unwrap_or(DEFAULT_TRAJECTORIES),
        burn_in: ms.burn_in.unwrap_or((2.0 * h).max(0.25 * t_end)),
        thin: ms.thin.unwrap_or(DEFAULT_THIN),
        r_grid: ms.r_grid.clone().unwrap_or_else(|| DEFAULT_R_GRID.to_vec()),
        invariance_t: ms.invariance_t.unwrap_or(DEFAULT_INVARIANCE_T),
        draws: ms.draws.unwrap_or(DEFAULT_DRAWS),
        functionals: ms.functionals.clone().unwrap_or_default(),
    };
    validate_measure(&measure, h, n_modes)?;

    let initial = file.initial.clone();
    if let SpaceProfile::Modes { coeffs } = &initial.space {
        if coeffs.len() != n_modes {
            return Err(cfg_err("initial.space.coeffs", format!("expected {n_modes} values, got {}", coeffs.len())));
        }
    }

    let resolved = ConfigFile {
        seed: Some(seed),
        h: Some(h),
        operator: OperatorSection {
            kind: Some(kind),
            a_const: op_sec.a_expr.is_none().then(|| op_sec.a_const.unwrap_or(1.0)),
            a_expr: op_sec.a_expr.clone(),
            n_modes: Some(n_modes),
            delta_fraction: Some(delta_fraction),
        },
        noise: NoiseSection {
            kind: noise_sec.lambdas.is_none().then_some(noise_kind),
            exponent: (noise_sec.lambdas.is_none() && noise_kind == NoiseKind::Power).then_some(exponent),
            trace_target: noise_sec.trace_target,
            lambdas: noise_sec.lambdas.clone(),
        },
        coefficients: CoefficientsSection {
            f: Some(cs_sec.f.clone().unwrap_or_else(|| coefficients.f.name())),
            sigma: Some(cs_sec.sigma.clone().unwrap_or_else(|| coefficients.sigma.name())),
            kernel: Some(cs_sec.kernel.clone().unwrap_or_else(|| coefficients.kernel.name())),
            modulus: Some(coefficients.modulus.name()),
            p: Some(p),
            mg: Some(coefficients.lipschitz_mg),
            alpha: Some(coefficients.alpha),
            k: Some(coefficients.growth_k),
            g_theta: Some(coefficients.g_read_point(h)),
            grid_points: Some(coefficients.grid_points.unwrap_or(4 * n_modes)),
        },
        solver: solver.clone(),
        measure: MeasureSection {
            trajectories: Some(measure.trajectories),
            burn_in: Some(measure.burn_in),
            thin: Some(measure.thin),
            r_grid: Some(measure.r_grid.clone()),
            invariance_t: Some(measure.invariance_t),
            draws: Some(measure.draws),
            functionals: Some(measure.functionals.clone()),
        },
        initial: initial.clone(),
        derived: Some(DerivedSection { mu_1: op.eigenvalues()[0], delta: op.delta(), steps_per_delay: m }),
    };

    Ok(RunConfig {
        seed,
        h,
        operator,
        n_modes,
        noise,
        coefficients,
        solver,
        measure,
        initial,
        resolved,
    })
}

fn validate_measure(m: &MeasureSettings, h: f64, n_modes: usize) -> Result<()> {
    if m.trajectories == 0 {
        return Err(cfg_err("measure.trajectories", "must be at least 1"));
    }
    if m.thin == 0 {
        return Err(cfg_err("measure.thin", "must be at least 1"));
    }
    if !(m.burn_in >= 2.0 * h) {
        return Err(cfg_err("measure.burn_in", format!("must be at least 2 h = {}, got {}", 2.0 * h, m.burn_in)));
    }
    if m.r_grid.is_empty() || m.r_grid.iter().any(|r| !(*r >= 0.0)) {
        return Err(cfg_err("measure.R", "radii must be a nonempty list of nonnegative numbers"));
    }
    if !(m.invariance_t > 0.0) {
        return Err(cfg_err("measure.invariance_t", "must be positive"));
    }
    if m.draws < 2 {
        return Err(cfg_err("measure.draws", "must be at least 2"));
    }
    for (i, f) in m.functionals.iter().enumerate() {
        if f.weights.len() != n_modes {
            return Err(cfg_err(
                &format!("measure.functionals[{i}].weights"),
                format!("expected {n_modes} values, got {}", f.weights.len()),
            ));
        }
    }
    Ok(())
}

impl RunConfig {
    pub fn model(&self) -> Result<Model> {
        let op = assemble_operator(&self.operator, self.n_modes)?;
        Model::new(op, self.noise.clone(), self.coefficients.clone(), self.h)
    }

    pub fn initial_segment(&self, model: &Model) -> Result<Segment> {
        from_initial_condition(&self.initial, self.h, self.solver.dt, &model.op)
    }

    /// Window norm, state norm, leading modes and the declared functionals.
    pub fn observables(&self) -> Vec<Observable> {
        let mut obs = crate::measure::default_observables(self.n_modes);
        obs.extend(
            self.measure
                .functionals
                .iter()
                .map(|f| Observable::Linear { name: f.name.clone(), weights: f.weights.clone() }),
        );
        obs
    }

    /// The resolved configuration as TOML.
    pub fn resolved_toml(&self) -> Result<String> {
        toml::to_string_pretty(&self.resolved).map_err(|e| Error::Internal(format!("cannot serialize config: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_defaults() {
        let cfg = parse_config("").unwrap();
        assert_eq!(cfg.n_modes, 32);
        assert_eq!(cfg.solver.dt, 1e-3);
        let dump = cfg.resolved_toml().unwrap();
        assert!(dump.contains("n_modes = 32"), "{dump}");
        assert!(dump.contains("dt = 0.001"), "{dump}");
        assert!(dump.contains("delta_fraction = 0.5"), "{dump}");
        let derived = cfg.resolved.derived.as_ref().unwrap();
        assert!((derived.delta - 0.5 * std::f64::consts::PI.powi(2)).abs() < 1e-12);
        assert!((derived.mu_1 - std::f64::consts::PI.powi(2)).abs() < 1e-12);
    }

    #[test]
    fn range_errors_name_the_key() {
        let err = parse_config("[coefficients]\nMg = 1.2\n").unwrap_err().to_string();
        assert!(err.contains("coefficients.Mg"), "{err}");
        let err = parse_config("h = 0.1\n[solver]\ndt = 0.03\n").unwrap_err().to_string();
        assert!(err.contains("solver.dt") && err.contains("not a positive integer"), "{err}");
        let err = parse_config("[operator]\nbogus = 1\n").unwrap_err().to_string();
        assert!(err.contains("operator") && err.contains("bogus"), "{err}");
        let err = parse_config("[solver]\nfp_tol = \"x\"\n").unwrap_err().to_string();
        assert!(err.contains("solver.fp_tol"), "{err}");
        let err = parse_config("[coefficients]\nf = \"cubic\"\n").unwrap_err().to_string();
        assert!(err.contains("coefficients.f"), "{err}");
        let err = parse_config("[measure]\nburn_in = 0.1\n").unwrap_err().to_string();
        assert!(err.contains("measure.burn_in"), "{err}");
    }

    #[test]
    fn resolved_dump_round_trips() {
        let text = r#"
seed = 7
h = 0.05
[operator]
n_modes = 6
[noise]
kind = "power"
exponent = 3.0
[coefficients]
kernel = "linear(0.1)"
[solver]
dt = 0.01
t_end = 2.0
[measure]
functionals = [{ name = "sum", weights = [1.0, 1.0, 1.0, 1.0, 1.0, 1.0] }]
[initial]
time = "ramp"
space = { shape = "uniform", value = 0.3 }
"#;
        let a = parse_config(text).unwrap();
        let dump = a.resolved_toml().unwrap();
        let b = parse_config(&dump).unwrap();
        assert_eq!(a.resolved, b.resolved);
        assert_eq!(b.resolved_toml().unwrap(), dump);
        assert_eq!(b.observables().last().unwrap().name(), "sum");
    }
}
