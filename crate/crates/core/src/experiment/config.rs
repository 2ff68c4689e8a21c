//! Experiment configuration files and the built-in presets.
//!
//! A config is a TOML document. `preset = "<name>"` starts from a built-in
//! preset and every other table or key overrides it (tables merge
//! recursively). Coordinates are absolute, in the units of the domain length.

use std::path::Path;

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::field::{boundary_actuator_map, gaussian_actuator_map, make_grid, ActuatorKind, ActuatorMap, Grid};
use crate::policy::{AdamConfig, Architecture, InitScheme};
use crate::spde::{InitialCondition, ModelKind, NoiseChannel, Simulator, SpdeModel};
use crate::train::{nodes_in_box, CostSpec, GradientMode, Problem, TargetRegion, TrainSettings};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kind: ModelKind,
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub boundary_values: [f64; 2],
    /// Noise amplitude; defaults to `1 / sqrt(rho)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default)]
    pub noise_channel: NoiseChannel,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub dim: usize,
    /// Domain side length `a`.
    pub extent: f64,
    /// Points per axis `J`.
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActuationSection {
    pub kind: ActuatorKind,
    /// Actuator centers (Gaussian actuation).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub centers: Vec<Vec<f64>>,
    /// Actuator variance `sigma_mu^2` (Gaussian actuation).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variance: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSection {
    /// `[lo, hi]` along x; omitted means every non-boundary node.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<[f64; 2]>,
    /// `[lo, hi]` along y (2D only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<[f64; 2]>,
    pub desired: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostSection {
    pub kappa: f64,
    pub regions: Vec<RegionSection>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    /// Horizon `T` in seconds.
    pub horizon: f64,
    pub dt: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSection {
    pub iterations: usize,
    pub rollouts: usize,
    pub rho: f64,
    pub learning_rate: f64,
    #[serde(default = "beta1")]
    pub beta1: f64,
    #[serde(default = "beta2")]
    pub beta2: f64,
    #[serde(default = "adam_epsilon")]
    pub adam_epsilon: f64,
    #[serde(default)]
    pub gradient_mode: GradientMode,
    /// Write a checkpoint every this many iterations (0 = final only).
    #[serde(default)]
    pub checkpoint_every: usize,
}

fn beta1() -> f64 {
    0.9
}

fn beta2() -> f64 {
    0.999
}

fn adam_epsilon() -> f64 {
    1e-8
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArchKind {
    Mlp,
    Cnn,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySection {
    pub arch: ArchKind,
    /// Hidden layer widths (MLP only).
    #[serde(default = "default_hidden")]
    pub hidden: Vec<usize>,
    /// Multiplier on the rectifier initialization (0 gives an all-zero policy).
    #[serde(default = "one")]
    pub init_scale: f64,
}

fn default_hidden() -> Vec<usize> {
    vec![64, 64]
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationSection {
    pub trials: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub seed: u64,
    /// Run directory, relative to the output root.
    pub output: String,
    pub model: ModelSection,
    pub grid: GridSection,
    pub actuation: ActuationSection,
    #[serde(default)]
    pub initial: InitialCondition,
    pub cost: CostSection,
    pub time: TimeSection,
    pub training: TrainingSection,
    pub policy: PolicySection,
    pub evaluation: EvaluationSection,
}

/// Tolerance on `T / dt` being an integer.
const STEP_TOLERANCE: f64 = 1e-9;

impl ExperimentConfig {
    /// Number of time steps `T / dt`, if integral.
    pub fn steps(&self) -> Option<usize> {
        let ratio = self.time.horizon / self.time.dt;
        let n = ratio.round();
        ((ratio - n).abs() <= STEP_TOLERANCE * ratio.abs().max(1.0) && n >= 1.0).then_some(n as usize)
    }

    /// Every invariant violation, in a stable order.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut check = |ok: bool, msg: String| {
            if !ok {
                out.push(msg);
            }
        };
        let t = &self.training;
        check(t.rho > 0.0 && t.rho.is_finite(), format!("training.rho must be positive, got {}", t.rho));
        check(t.iterations >= 1, "training.iterations must be at least 1".into());
        check(t.rollouts >= 1, "training.rollouts must be at least 1".into());
        check(
            t.learning_rate > 0.0 && t.learning_rate.is_finite(),
            format!("training.learning_rate must be positive, got {}", t.learning_rate),
        );
        check(
            (0.0..1.0).contains(&t.beta1) && (0.0..1.0).contains(&t.beta2) && t.adam_epsilon > 0.0,
            "ADAM constants must satisfy 0 <= beta < 1 and epsilon > 0".into(),
        );
        check(self.time.dt > 0.0, format!("time.dt must be positive, got {}", self.time.dt));
        check(self.time.horizon > 0.0, format!("time.horizon must be positive, got {}", self.time.horizon));
        if self.time.dt > 0.0 && self.time.horizon > 0.0 {
            check(
                self.steps().is_some(),
                format!(
                    "time.horizon / time.dt = {} is not an integer step count",
                    self.time.horizon / self.time.dt
                ),
            );
        }
        check(self.cost.kappa > 0.0, format!("cost.kappa must be positive, got {}", self.cost.kappa));
        check(!self.cost.regions.is_empty(), "cost.regions must not be empty".into());
        check(self.evaluation.trials >= 2, "evaluation.trials must be at least 2".into());
        let g = &self.grid;
        check(g.dim == model_dim(self.model.kind), format!("grid.dim {} does not match model {:?}", g.dim, self.model.kind));
        let boundary_model = self.model.kind == ModelKind::Heat1dBoundary;
        let boundary_act = self.actuation.kind == ActuatorKind::Boundary;
        check(
            boundary_model == boundary_act,
            format!("actuation {:?} does not fit model {:?}", self.actuation.kind, self.model.kind),
        );
        if self.actuation.kind == ActuatorKind::Gaussian {
            check(!self.actuation.centers.is_empty(), "actuation.centers must not be empty".into());
            check(
                self.actuation.variance.is_some_and(|v| v > 0.0),
                "actuation.variance must be given and positive".into(),
            );
            for c in &self.actuation.centers {
                check(c.len() == g.dim, format!("actuator center {c:?} needs {} coordinates", g.dim));
            }
        }
        for (i, r) in self.cost.regions.iter().enumerate() {
            for (axis, iv) in [("x", r.x), ("y", r.y)] {
                if let Some([lo, hi]) = iv {
                    check(
                        lo <= hi && lo >= 0.0 && hi <= g.extent,
                        format!("cost.regions[{i}].{axis} = [{lo}, {hi}] is outside [0, {}]", g.extent),
                    );
                }
            }
            check(g.dim == 2 || r.y.is_none(), format!("cost.regions[{i}].y is only valid in 2D"));
        }
        let arch_ok = match (self.policy.arch, g.dim) {
            (ArchKind::Mlp, _) => true,
            (ArchKind::Cnn, 2) => true,
            (ArchKind::Cnn, _) => false,
        };
        check(arch_ok, "the CNN policy needs a 2D grid".into());
        check(
            self.policy.init_scale >= 0.0 && self.policy.init_scale.is_finite(),
            "policy.init_scale must be non-negative".into(),
        );
        check(!self.output.trim().is_empty(), "output must not be empty".into());
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            // building the pieces catches the remaining grid/actuator errors
            self.problem()?;
            self.architecture()?.layers()?;
            Ok(())
        } else {
            Err(Error::Config(v.join("; ")))
        }
    }

    pub fn grid(&self) -> Result<std::sync::Arc<Grid>> {
        make_grid(self.grid.dim, self.grid.extent, self.grid.points)
    }

    pub fn model(&self) -> SpdeModel {
        let m = &self.model;
        let mut model = SpdeModel::new(m.kind, m.epsilon, self.training.rho)
            .with_boundary_values(m.boundary_values[0], m.boundary_values[1])
            .with_noise_channel(m.noise_channel);
        if let Some(a) = m.alpha {
            model = model.with_alpha(a);
        }
        if let Some(s) = m.sigma {
            model = model.with_sigma(s);
        }
        model
    }

    pub fn actuator_map(&self, grid: &std::sync::Arc<Grid>) -> Result<ActuatorMap> {
        match self.actuation.kind {
            ActuatorKind::Gaussian => gaussian_actuator_map(
                grid,
                &self.actuation.centers,
                self.actuation.variance.unwrap_or(f64::NAN),
            ),
            ActuatorKind::Boundary => boundary_actuator_map(grid),
        }
    }

    pub fn cost_spec(&self, grid: &Grid) -> Result<CostSpec> {
        let regions = self
            .cost
            .regions
            .iter()
            .map(|r| {
                let nodes = match (r.x, grid.dim()) {
                    (Some(x), _) => nodes_in_box(grid, x, r.y),
                    // every node off the boundary; 2D cells are all interior
                    (None, 1) => (1..grid.points() - 1).collect(),
                    (None, _) => match r.y {
                        Some(y) => nodes_in_box(grid, [0.0, grid.extent()], Some(y)),
                        None => (0..grid.node_count()).collect(),
                    },
                };
                TargetRegion {
                    nodes,
                    desired: r.desired,
                }
            })
            .collect();
        CostSpec::new(grid, regions, self.cost.kappa)
    }

    pub fn problem(&self) -> Result<Problem> {
        let steps = self
            .steps()
            .ok_or_else(|| Error::Config("time.horizon / time.dt is not an integer".into()))?;
        let grid = self.grid()?;
        let map = self.actuator_map(&grid)?;
        let simulator = Simulator::new(&self.model(), &map, self.time.dt)?;
        Ok(Problem {
            simulator,
            cost: self.cost_spec(&grid)?,
            initial: self.initial.clone(),
            steps,
        })
    }

    pub fn architecture(&self) -> Result<Architecture> {
        let outputs = match self.actuation.kind {
            ActuatorKind::Gaussian => self.actuation.centers.len(),
            ActuatorKind::Boundary => 2,
        };
        match self.policy.arch {
            ArchKind::Mlp => Ok(Architecture::Mlp {
                inputs: self.grid.points.pow(self.grid.dim as u32),
                hidden: self.policy.hidden.clone(),
                outputs,
            }),
            ArchKind::Cnn if self.grid.dim == 2 => Ok(Architecture::Cnn {
                side: self.grid.points,
                outputs,
            }),
            ArchKind::Cnn => Err(Error::Config("the CNN policy needs a 2D grid".into())),
        }
    }

    pub fn init_scheme(&self) -> InitScheme {
        match self.policy.init_scale {
            0.0 => InitScheme::Zero,
            1.0 => InitScheme::Rectifier,
            s => InitScheme::Scaled(s),
        }
    }

    pub fn train_settings(&self) -> TrainSettings {
        let t = &self.training;
        TrainSettings {
            iterations: t.iterations,
            rollouts: t.rollouts,
            rho: t.rho,
            adam: AdamConfig {
                learning_rate: t.learning_rate,
                beta1: t.beta1,
                beta2: t.beta2,
                epsilon: t.adam_epsilon,
            },
            gradient_mode: t.gradient_mode,
            seed: self.seed,
        }
    }

    /// The resolved config as TOML.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }
}

fn model_dim(kind: ModelKind) -> usize {
    kind.dim()
}

/// Names of the built-in presets.
pub const PRESET_NAMES: [&str; 5] = ["heat-1d", "burgers-1d", "nagumo-1d", "heat-2d", "heat-1d-boundary"];

fn gaussian_regions_1d(a: f64, spans: &[([f64; 2], f64)]) -> Vec<RegionSection> {
    spans
        .iter()
        .map(|&([lo, hi], desired)| RegionSection {
            x: Some([lo * a, hi * a]),
            y: None,
            desired,
        })
        .collect()
}

fn training(iterations: usize, rollouts: usize, learning_rate: f64) -> TrainingSection {
    TrainingSection {
        iterations,
        rollouts,
        rho: 10.0,
        learning_rate,
        beta1: beta1(),
        beta2: beta2(),
        adam_epsilon: adam_epsilon(),
        gradient_mode: GradientMode::FullGraph,
        checkpoint_every: 100,
    }
}

fn mlp() -> PolicySection {
    PolicySection {
        arch: ArchKind::Mlp,
        hidden: default_hidden(),
        init_scale: 1.0,
    }
}

pub fn preset(name: &str) -> Option<ExperimentConfig> {
    let cfg = match name {
        "heat-1d" => {
            let a = 1.0;
            ExperimentConfig {
                name: name.into(),
                seed: 1,
                output: name.into(),
                model: ModelSection {
                    kind: ModelKind::Heat1dDirichlet,
                    epsilon: 1.0,
                    alpha: None,
                    boundary_values: [0.0, 0.0],
                    sigma: None,
                    noise_channel: NoiseChannel::Field,
                },
                grid: GridSection {
                    dim: 1,
                    extent: a,
                    points: 64,
                },
                actuation: ActuationSection {
                    kind: ActuatorKind::Gaussian,
                    centers: [0.2, 0.35, 0.5, 0.65, 0.8].iter().map(|c| vec![c * a]).collect(),
                    variance: Some((0.1 * a) * (0.1 * a)),
                },
                initial: InitialCondition::Zero,
                cost: CostSection {
                    kappa: 1e-3,
                    regions: gaussian_regions_1d(a, &[([0.18, 0.22], 1.0), ([0.48, 0.52], 0.5), ([0.78, 0.82], 1.0)]),
                },
                time: TimeSection { horizon: 1.0, dt: 0.01 },
                training: training(1000, 50, 0.01),
                policy: mlp(),
                evaluation: EvaluationSection { trials: 200 },
            }
        }
        "burgers-1d" => {
            let a = 1.0;
            ExperimentConfig {
                name: name.into(),
                seed: 1,
                output: name.into(),
                model: ModelSection {
                    kind: ModelKind::Burgers1dDirichlet,
                    epsilon: 0.1,
                    alpha: None,
                    boundary_values: [1.0, 1.0],
                    sigma: None,
                    noise_channel: NoiseChannel::Field,
                },
                grid: GridSection {
                    dim: 1,
                    extent: a,
                    points: 64,
                },
                actuation: ActuationSection {
                    kind: ActuatorKind::Gaussian,
                    centers: [0.2, 0.3, 0.5, 0.7, 0.8].iter().map(|c| vec![c * a]).collect(),
                    variance: Some((0.1 * a) * (0.1 * a)),
                },
                initial: InitialCondition::Zero,
                cost: CostSection {
                    kappa: 100.0,
                    regions: gaussian_regions_1d(a, &[([0.18, 0.22], 2.0), ([0.48, 0.52], 1.0), ([0.78, 0.82], 2.0)]),
                },
                time: TimeSection { horizon: 1.0, dt: 0.01 },
                training: training(1000, 100, 0.01),
                policy: mlp(),
                evaluation: EvaluationSection { trials: 200 },
            }
        }
        "nagumo-1d" => {
            let a = 5.0;
            ExperimentConfig {
                name: name.into(),
                seed: 1,
                output: name.into(),
                model: ModelSection {
                    kind: ModelKind::Nagumo1dNeumann,
                    epsilon: 1.0,
                    alpha: Some(-0.5),
                    boundary_values: [0.0, 0.0],
                    sigma: None,
                    noise_channel: NoiseChannel::Field,
                },
                grid: GridSection {
                    dim: 1,
                    extent: a,
                    points: 64,
                },
                actuation: ActuationSection {
                    kind: ActuatorKind::Gaussian,
                    centers: [0.7, 0.8, 0.9].iter().map(|c| vec![c * a]).collect(),
                    variance: Some((0.1 * a) * (0.1 * a)),
                },
                initial: InitialCondition::Sigmoid {
                    center: 2.0,
                    width: 2f64.sqrt(),
                },
                cost: CostSection {
                    kappa: 1e-3,
                    regions: gaussian_regions_1d(a, &[([0.7, 0.99], 0.0)]),
                },
                time: TimeSection { horizon: 3.5, dt: 0.01 },
                training: training(1000, 50, 0.003),
                policy: mlp(),
                evaluation: EvaluationSection { trials: 200 },
            }
        }
        "heat-2d" => {
            let a = 0.25;
            let centers = [[0.2, 0.5], [0.5, 0.2], [0.5, 0.5], [0.5, 0.8], [0.8, 0.5]];
            let regions = centers
                .iter()
                .map(|&[cx, cy]| RegionSection {
                    x: Some([(cx - 0.02) * a, (cx + 0.02) * a]),
                    y: Some([(cy - 0.02) * a, (cy + 0.02) * a]),
                    desired: if cx == 0.5 && cy == 0.5 { 0.5 } else { 1.0 },
                })
                .collect();
            ExperimentConfig {
                name: name.into(),
                seed: 1,
                output: name.into(),
                model: ModelSection {
                    kind: ModelKind::Heat2dDirichlet,
                    epsilon: 1.0,
                    alpha: None,
                    boundary_values: [0.0, 0.0],
                    sigma: None,
                    noise_channel: NoiseChannel::Field,
                },
                grid: GridSection {
                    dim: 2,
                    extent: a,
                    points: 32,
                },
                actuation: ActuationSection {
                    kind: ActuatorKind::Gaussian,
                    centers: centers.iter().map(|&[x, y]| vec![x * a, y * a]).collect(),
                    variance: Some((0.1 * a) * (0.1 * a)),
                },
                initial: InitialCondition::Gaussian { std: 0.0 },
                cost: CostSection { kappa: 1e-3, regions },
                time: TimeSection { horizon: 1.0, dt: 0.02 },
                training: training(1000, 50, 0.1),
                policy: PolicySection {
                    arch: ArchKind::Cnn,
                    hidden: Vec::new(),
                    init_scale: 1.0,
                },
                evaluation: EvaluationSection { trials: 200 },
            }
        }
        "heat-1d-boundary" => ExperimentConfig {
            name: name.into(),
            seed: 1,
            output: name.into(),
            model: ModelSection {
                kind: ModelKind::Heat1dBoundary,
                epsilon: 1.0,
                alpha: None,
                boundary_values: [0.0, 0.0],
                sigma: None,
                noise_channel: NoiseChannel::Field,
            },
            grid: GridSection {
                dim: 1,
                extent: 1.0,
                points: 64,
            },
            actuation: ActuationSection {
                kind: ActuatorKind::Boundary,
                centers: Vec::new(),
                variance: None,
            },
            initial: InitialCondition::Zero,
            cost: CostSection {
                kappa: 1e-3,
                regions: vec![RegionSection {
                    x: None,
                    y: None,
                    desired: 3.0,
                }],
            },
            time: TimeSection { horizon: 1.5, dt: 0.01 },
            training: training(1000, 200, 0.01),
            policy: mlp(),
            evaluation: EvaluationSection { trials: 200 },
        },
        _ => return None,
    };
    Some(cfg)
}

fn merge(base: &mut Table, over: Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// 1-based line of the first `key =` (or `[...key]` header) in `text`.
fn line_of_key(text: &str, key: &str) -> Option<usize> {
    text.lines().position(|line| {
        let l = line.trim_start();
        let bare = l
            .strip_prefix(key)
            .is_some_and(|rest| rest.trim_start().starts_with('='));
        let quoted = l
            .strip_prefix(&format!("\"{key}\""))
            .is_some_and(|rest| rest.trim_start().starts_with('='));
        let header = l.starts_with('[')
            && l.trim_end()
                .trim_end_matches(']')
                .rsplit(['.', '['])
                .next()
                .is_some_and(|last| last.trim() == key);
        bare || quoted || header
    })
    .map(|i| i + 1)
}

fn locate_serde_error(text: &str, msg: &str) -> String {
    // serde reports unknown keys as "unknown field `name`"
    let key = msg
        .split("unknown field `")
        .nth(1)
        .or_else(|| msg.split("unknown variant `").nth(1))
        .and_then(|rest| rest.split('`').next());
    match key.and_then(|k| line_of_key(text, k).map(|l| (k, l))) {
        Some((k, line)) => format!("line {line}: invalid key or value `{k}`: {msg}"),
        None => msg.to_string(),
    }
}

/// Parses and resolves a config document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut doc: Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    let table = match doc.remove("preset") {
        Some(Value::String(name)) => {
            let base = preset(&name).ok_or_else(|| {
                Error::Config(format!(
                    "line {}: unknown preset {name:?} (available: {})",
                    line_of_key(text, "preset").unwrap_or(1),
                    PRESET_NAMES.join(", ")
                ))
            })?;
            let mut base = Table::try_from(&base).map_err(|e| Error::Config(e.to_string()))?;
            if !doc.contains_key("output") && doc.contains_key("name") {
                if let Some(n) = doc.get("name").cloned() {
                    base.insert("output".into(), n);
                }
            }
            merge(&mut base, doc);
            base
        }
        Some(_) => return Err(Error::Config("`preset` must be a string".into())),
        None => doc,
    };
    let config: ExperimentConfig = table
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(locate_serde_error(text, e.message())))?;
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_is_valid_and_round_trips() {
        for name in PRESET_NAMES {
            let cfg = preset(name).unwrap();
            cfg.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
            let back = parse_config(&cfg.to_toml()).unwrap();
            assert_eq!(back, cfg, "{name}");
            let via_preset = parse_config(&format!("preset = \"{name}\"\n")).unwrap();
            assert_eq!(via_preset, cfg);
        }
    }

    #[test]
    fn nagumo_preset_values() {
        let c = parse_config("preset = \"nagumo-1d\"").unwrap();
        assert_eq!(c.grid.extent, 5.0);
        assert_eq!(c.model.epsilon, 1.0);
        assert_eq!(c.model.alpha, Some(-0.5));
        assert_eq!((c.time.dt, c.time.horizon), (0.01, 3.5));
        assert_eq!((c.training.rollouts, c.training.iterations), (50, 1000));
        assert_eq!(c.cost.kappa, 1e-3);
        assert_eq!(c.actuation.centers.len(), 3);
        assert_eq!(c.steps(), Some(350));
    }

    #[test]
    fn heat_2d_preset_values() {
        let c = parse_config("preset = \"heat-2d\"").unwrap();
        assert_eq!((c.grid.extent, c.grid.points, c.grid.dim), (0.25, 32, 2));
        assert_eq!((c.time.dt, c.time.horizon), (0.02, 1.0));
        assert_eq!((c.training.rollouts, c.training.iterations), (50, 1000));
        assert_eq!(c.cost.kappa, 1e-3);
        assert_eq!(c.actuation.centers.len(), 5);
        assert_eq!(c.policy.arch, ArchKind::Cnn);
        let problem = c.problem().unwrap();
        for r in &problem.cost.regions {
            assert!(!r.nodes.is_empty());
        }
    }

    #[test]
    fn boundary_and_burgers_presets() {
        let b = preset("heat-1d-boundary").unwrap();
        assert_eq!((b.model.epsilon, b.training.rho, b.time.horizon, b.time.dt), (1.0, 10.0, 1.5, 0.01));
        assert_eq!((b.training.rollouts, b.training.iterations), (200, 1000));
        let g = preset("burgers-1d").unwrap();
        assert_eq!(g.cost.kappa, 100.0);
        let desired: Vec<f64> = g.cost.regions.iter().map(|r| r.desired).collect();
        assert_eq!(desired, vec![2.0, 1.0, 2.0]);
        assert_eq!(g.cost.regions[0].x, Some([0.18, 0.22]));
    }

    #[test]
    fn non_integral_step_count_is_rejected() {
        let err = parse_config("preset = \"heat-1d\"\n[time]\nhorizon = 1.0\ndt = 0.3\n").unwrap_err();
        assert!(err.to_string().contains("not an integer"), "{err}");
    }

    #[test]
    fn overrides_merge_into_presets() {
        let c = parse_config("preset = \"heat-1d\"\nname = \"quick\"\n[training]\niterations = 5\n").unwrap();
        assert_eq!(c.training.iterations, 5);
        assert_eq!(c.training.rollouts, 50);
        assert_eq!(c.output, "quick");
    }

    #[test]
    fn unknown_keys_report_their_line() {
        let err = parse_config("preset = \"heat-1d\"\n\n[training]\niterations = 5\nlearnrate = 0.1\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 5") && msg.contains("learnrate"), "{msg}");
    }

    #[test]
    fn syntax_errors_report_their_line() {
        let err = parse_config("preset = \"heat-1d\"\n[training\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn unknown_preset_is_rejected() {
        assert!(parse_config("preset = \"wave-3d\"").is_err());
    }

    #[test]
    fn all_violations_are_listed() {
        let mut c = preset("heat-1d").unwrap();
        c.training.rho = -1.0;
        c.evaluation.trials = 1;
        let v = c.violations();
        assert_eq!(v.len(), 2, "{v:?}");
    }
}
