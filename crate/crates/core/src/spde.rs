//! Semi-implicit Euler steppers for the controlled SPDE models and the
//! rollout that records the noise and policy inner products.
//!
//! Every model treats diffusion implicitly and everything else (reaction,
//! advection, control, noise) explicitly:
//!
//! ```text
//! (I - eps dt L) x+ = x + dt F(x) + dt Phi + sigma dW
//! ```
//!
//! 1D systems are tridiagonal and factored once per stepper; the 2D system is
//! solved by conjugate gradient.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{check_same_grid, sample_noise, ActuatorKind, ActuatorMap, Field, Grid, NoiseIncrement};
use crate::linalg::{conjugate_gradient, Tridiagonal};

/// Relative residual at which the 2D conjugate-gradient solve stops.
pub const CG_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Heat1dDirichlet,
    Heat2dDirichlet,
    Burgers1dDirichlet,
    Nagumo1dNeumann,
    Heat1dBoundary,
}

impl ModelKind {
    pub fn dim(self) -> usize {
        match self {
            ModelKind::Heat2dDirichlet => 2,
            _ => 1,
        }
    }

    fn has_dirichlet_nodes(self) -> bool {
        matches!(self, ModelKind::Heat1dDirichlet | ModelKind::Burgers1dDirichlet)
    }
}

/// Where the additive noise enters the dynamics.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseChannel {
    /// Space-time white noise on every node.
    #[default]
    Field,
    /// Noise projected onto the span of the actuator shape functions, so that
    /// control and noise share one channel. For the boundary model this drops
    /// the interior noise and keeps only the boundary-flux noise.
    Actuated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpdeModel {
    pub kind: ModelKind,
    pub epsilon: f64,
    /// Nagumo reaction threshold.
    pub alpha: Option<f64>,
    /// Dirichlet values at the left and right ends (1D Dirichlet models).
    pub boundary_values: [f64; 2],
    /// Noise amplitude multiplying `dW`.
    pub sigma: f64,
    pub rho: f64,
    pub noise_channel: NoiseChannel,
}

impl SpdeModel {
    /// A model with `sigma = 1 / sqrt(rho)`, zero boundary values and field noise.
    pub fn new(kind: ModelKind, epsilon: f64, rho: f64) -> Self {
        Self {
            kind,
            epsilon,
            alpha: None,
            boundary_values: [0.0, 0.0],
            sigma: 1.0 / rho.sqrt(),
            rho,
            noise_channel: NoiseChannel::Field,
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = Some(alpha);
        self
    }

    pub fn with_boundary_values(mut self, left: f64, right: f64) -> Self {
        self.boundary_values = [left, right];
        self
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn with_noise_channel(mut self, channel: NoiseChannel) -> Self {
        self.noise_channel = channel;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidModel(msg));
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return bad(format!("rho must be positive, got {}", self.rho));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma must be non-negative, got {}", self.sigma));
        }
        match (self.kind, self.alpha) {
            (ModelKind::Nagumo1dNeumann, None) => return bad("the Nagumo model needs alpha".into()),
            (ModelKind::Nagumo1dNeumann, Some(_)) => {}
            (_, Some(_)) => return bad("alpha is only meaningful for the Nagumo model".into()),
            _ => {}
        }
        if self.kind == ModelKind::Heat2dDirichlet && self.boundary_values != [0.0, 0.0] {
            return bad("the 2D heat model only supports homogeneous Dirichlet data".into());
        }
        Ok(())
    }
}

/// Explicit inputs to one implicit step.
#[derive(Clone, Copy, Debug)]
pub struct StepForcing<'a> {
    /// Pointwise control field `Phi = m^T u` (distributed models).
    pub control: &'a [f64],
    /// Boundary flux controls `(u_1, u_2)` (boundary model).
    pub flux: [f64; 2],
    /// Pointwise noise increments `dW_j`, before the `sigma` scaling.
    pub noise: &'a [f64],
    /// Standard normals driving the two boundary fluxes (boundary model).
    pub flux_noise: [f64; 2],
}

#[derive(Clone, Debug)]
enum ImplicitSolve {
    Tridiagonal(Tridiagonal),
    Cg,
}

/// Time stepper with the implicit operator prepared for a fixed `(model, dt)`.
#[derive(Clone, Debug)]
pub struct Stepper {
    model: SpdeModel,
    grid: Arc<Grid>,
    dt: f64,
    // eps dt / dx^2
    r: f64,
    solve: ImplicitSolve,
}

impl Stepper {
    pub fn new(model: &SpdeModel, grid: &Arc<Grid>, dt: f64) -> Result<Self> {
        model.validate()?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidModel(format!("time step must be positive, got {dt}")));
        }
        if grid.dim() != model.kind.dim() {
            return Err(Error::GridMismatch(format!(
                "{:?} needs a {}D grid, got {}D",
                model.kind,
                model.kind.dim(),
                grid.dim()
            )));
        }
        let dx = grid.spacing();
        let r = model.epsilon * dt / (dx * dx);
        let j = grid.points();
        let solve = match model.kind {
            ModelKind::Heat1dDirichlet | ModelKind::Burgers1dDirichlet => {
                let n = j - 2;
                ImplicitSolve::Tridiagonal(Tridiagonal::factor(
                    &vec![-r; n],
                    &vec![1.0 + 2.0 * r; n],
                    &vec![-r; n],
                )?)
            }
            ModelKind::Nagumo1dNeumann | ModelKind::Heat1dBoundary => {
                let mut lower = vec![-r; j];
                let mut upper = vec![-r; j];
                // ghost-node reflection doubles the inward coupling at both ends
                upper[0] = -2.0 * r;
                lower[j - 1] = -2.0 * r;
                ImplicitSolve::Tridiagonal(Tridiagonal::factor(&lower, &vec![1.0 + 2.0 * r; j], &upper)?)
            }
            ModelKind::Heat2dDirichlet => ImplicitSolve::Cg,
        };
        Ok(Self {
            model: model.clone(),
            grid: Arc::clone(grid),
            dt,
            r,
            solve,
        })
    }

    pub fn model(&self) -> &SpdeModel {
        &self.model
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Overwrites the Dirichlet nodes of a 1D state with the boundary values.
    pub fn apply_boundary_values(&self, x: &mut Field) {
        if self.model.kind.has_dirichlet_nodes() {
            let v = x.values_mut();
            let n = v.len();
            v[0] = self.model.boundary_values[0];
            v[n - 1] = self.model.boundary_values[1];
        }
    }

    pub fn step(&self, x: &Field, forcing: &StepForcing<'_>) -> Result<Field> {
        check_same_grid(x.grid(), &self.grid)?;
        let nodes = self.grid.node_count();
        for (len, what) in [(forcing.control.len(), "control field"), (forcing.noise.len(), "noise field")] {
            if len != nodes {
                return Err(Error::Shape {
                    expected: nodes,
                    found: len,
                    context: what,
                });
            }
        }
        let xv = x.values();
        let dt = self.dt;
        let sigma = self.model.sigma;
        let dx = self.grid.spacing();
        let j = self.grid.points();
        let out = match self.model.kind {
            ModelKind::Heat1dDirichlet | ModelKind::Burgers1dDirichlet => {
                let [left, right] = self.model.boundary_values;
                let burgers = self.model.kind == ModelKind::Burgers1dDirichlet;
                let mut rhs: Vec<f64> = (1..j - 1)
                    .map(|i| {
                        let mut v = xv[i] + dt * forcing.control[i] + sigma * forcing.noise[i];
                        if burgers {
                            v -= dt * xv[i] * (xv[i + 1] - xv[i - 1]) / (2.0 * dx);
                        }
                        v
                    })
                    .collect();
                rhs[0] += self.r * left;
                rhs[j - 3] += self.r * right;
                self.tridiagonal().solve_in_place(&mut rhs);
                let mut out = Vec::with_capacity(j);
                out.push(left);
                out.extend_from_slice(&rhs);
                out.push(right);
                out
            }
            ModelKind::Nagumo1dNeumann => {
                let alpha = self.model.alpha.expect("validated");
                let mut rhs: Vec<f64> = (0..j)
                    .map(|i| {
                        let h = xv[i];
                        h + dt * h * (1.0 - h) * (h - alpha) + dt * forcing.control[i] + sigma * forcing.noise[i]
                    })
                    .collect();
                self.tridiagonal().solve_in_place(&mut rhs);
                rhs
            }
            ModelKind::Heat1dBoundary => {
                let mut rhs: Vec<f64> = (0..j).map(|i| xv[i] + sigma * forcing.noise[i]).collect();
                // h_x(0) = g_0, h_x(a) = g_1 through ghost nodes x_{-1} = x_1 - 2 dx g_0, x_J = x_{J-2} + 2 dx g_1
                let flux_scale = sigma / dt.sqrt();
                let g0 = forcing.flux[0] + flux_scale * forcing.flux_noise[0];
                let g1 = forcing.flux[1] + flux_scale * forcing.flux_noise[1];
                let eps_dt = self.model.epsilon * dt;
                rhs[0] -= eps_dt * 2.0 * g0 / dx;
                rhs[j - 1] += eps_dt * 2.0 * g1 / dx;
                self.tridiagonal().solve_in_place(&mut rhs);
                rhs
            }
            ModelKind::Heat2dDirichlet => {
                let rhs: Vec<f64> = (0..nodes)
                    .map(|i| xv[i] + dt * forcing.control[i] + sigma * forcing.noise[i])
                    .collect();
                let mut sol = xv.to_vec();
                let r = self.r;
                let apply = |v: &[f64], out: &mut [f64]| apply_heat_2d(v, out, j, r);
                conjugate_gradient(apply, &rhs, &mut sol, CG_TOLERANCE, 10 * j * j)?;
                sol
            }
        };
        Field::new(&self.grid, out)
    }

    fn tridiagonal(&self) -> &Tridiagonal {
        match &self.solve {
            ImplicitSolve::Tridiagonal(t) => t,
            ImplicitSolve::Cg => unreachable!("1D model with a CG solver"),
        }
    }
}

/// `out = (I - r L) v` for the cell-centered 5-point Laplacian with zero
/// Dirichlet data on the faces (ghost value `-v` across each face).
fn apply_heat_2d(v: &[f64], out: &mut [f64], j: usize, r: f64) {
    for iy in 0..j {
        for ix in 0..j {
            let k = iy * j + ix;
            let c = v[k];
            let west = if ix > 0 { v[k - 1] } else { -c };
            let east = if ix + 1 < j { v[k + 1] } else { -c };
            let south = if iy > 0 { v[k - j] } else { -c };
            let north = if iy + 1 < j { v[k + j] } else { -c };
            out[k] = c - r * (west + east + south + north - 4.0 * c);
        }
    }
}

fn distributed_forcing<'a>(u_field: &'a Field, w: &'a [f64]) -> StepForcing<'a> {
    StepForcing {
        control: u_field.values(),
        flux: [0.0, 0.0],
        noise: w,
        flux_noise: [0.0, 0.0],
    }
}

fn expect_kind(model: &SpdeModel, kind: ModelKind) -> Result<()> {
    if model.kind != kind {
        return Err(Error::InvalidModel(format!("expected a {kind:?} model, got {:?}", model.kind)));
    }
    Ok(())
}

fn one_step(x: &Field, u_field: &Field, w: &NoiseIncrement, model: &SpdeModel, kind: ModelKind) -> Result<Field> {
    expect_kind(model, kind)?;
    check_same_grid(x.grid(), u_field.grid())?;
    check_same_grid(x.grid(), w.grid())?;
    let stepper = Stepper::new(model, x.grid(), w.dt())?;
    let dw = w.increment_field();
    stepper.step(x, &distributed_forcing(u_field, &dw))
}

pub fn step_heat_1d(x: &Field, u_field: &Field, w: &NoiseIncrement, model: &SpdeModel) -> Result<Field> {
    one_step(x, u_field, w, model, ModelKind::Heat1dDirichlet)
}

pub fn step_heat_2d(x: &Field, u_field: &Field, w: &NoiseIncrement, model: &SpdeModel) -> Result<Field> {
    one_step(x, u_field, w, model, ModelKind::Heat2dDirichlet)
}

pub fn step_burgers_1d(x: &Field, u_field: &Field, w: &NoiseIncrement, model: &SpdeModel) -> Result<Field> {
    one_step(x, u_field, w, model, ModelKind::Burgers1dDirichlet)
}

pub fn step_nagumo_1d(x: &Field, u_field: &Field, w: &NoiseIncrement, model: &SpdeModel) -> Result<Field> {
    one_step(x, u_field, w, model, ModelKind::Nagumo1dNeumann)
}

/// Heat step with flux boundary controls `h_x(0) = u_1 + sigma xi_1 / sqrt(dt)`
/// and `h_x(a) = u_2 + sigma xi_2 / sqrt(dt)`; `interior` is the distributed noise.
pub fn step_heat_1d_boundary(
    x: &Field,
    u: [f64; 2],
    w_boundary: [f64; 2],
    interior: &NoiseIncrement,
    model: &SpdeModel,
) -> Result<Field> {
    expect_kind(model, ModelKind::Heat1dBoundary)?;
    check_same_grid(x.grid(), interior.grid())?;
    let stepper = Stepper::new(model, x.grid(), interior.dt())?;
    let dw = interior.increment_field();
    let zero = vec![0.0; dw.len()];
    stepper.step(
        x,
        &StepForcing {
            control: &zero,
            flux: u,
            noise: &dw,
            flux_noise: w_boundary,
        },
    )
}

/// Initial state of a rollout.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialCondition {
    #[default]
    Zero,
    Constant { value: f64 },
    /// `(1 + exp(-(center - x) / width))^{-1}`.
    Sigmoid { center: f64, width: f64 },
    /// Independent `N(0, std^2)` values per node.
    Gaussian { std: f64 },
}

impl InitialCondition {
    pub fn sample<R: Rng + ?Sized>(&self, grid: &Arc<Grid>, rng: &mut R) -> Field {
        match *self {
            InitialCondition::Zero => Field::zeros(grid),
            InitialCondition::Constant { value } => Field::constant(grid, value),
            InitialCondition::Sigmoid { center, width } => {
                Field::from_fn(grid, |p| 1.0 / (1.0 + (-(center - p[0]) / width).exp()))
            }
            InitialCondition::Gaussian { std } => {
                let values = (0..grid.node_count())
                    .map(|_| std * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                Field::new(grid, values).expect("sized from grid")
            }
        }
    }

    /// Whether sampling consumes random draws.
    pub fn is_random(&self) -> bool {
        matches!(self, InitialCondition::Gaussian { std } if *std != 0.0)
    }
}

/// A feedback law `u = phi(X)` producing one value per actuator.
pub trait Controller: Sync {
    fn outputs(&self) -> usize;
    fn control(&self, state: &Field) -> Result<Vec<f64>>;
}

/// The uncontrolled system.
#[derive(Clone, Copy, Debug)]
pub struct ZeroControl(pub usize);

impl Controller for ZeroControl {
    fn outputs(&self) -> usize {
        self.0
    }

    fn control(&self, _state: &Field) -> Result<Vec<f64>> {
        Ok(vec![0.0; self.0])
    }
}

/// Noise drawn for one step.
#[derive(Clone, Debug)]
pub struct StepNoise {
    pub field: NoiseIncrement,
    /// Boundary-flux normals (boundary model only).
    pub boundary: Option<[f64; 2]>,
}

/// One sampled trajectory together with the per-step Girsanov records.
#[derive(Clone, Debug)]
pub struct Trajectory {
    /// `X_0 .. X_T`; shorter if the run diverged.
    pub states: Vec<Field>,
    /// `u_t = phi(X_{t-1})` for `t = 1..T`.
    pub controls: Vec<Vec<f64>>,
    pub noise: Vec<StepNoise>,
    /// `b_t = <m, dW_t>` per actuator, so that `N_t = u_t . b_t`.
    pub noise_projection: Vec<Vec<f64>>,
    /// `N_t = <Phi_t, dW_t>`.
    pub noise_terms: Vec<f64>,
    /// `P_t = u_t^T M u_t` (integrand of the policy inner product).
    pub policy_terms: Vec<f64>,
    pub dt: f64,
    /// Set when a step produced a non-finite state; the offending state is dropped.
    pub diverged: bool,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.controls.len()
    }

    pub fn terminal(&self) -> &Field {
        self.states.last().expect("trajectory has an initial state")
    }

    /// `sum_t N_t`.
    pub fn noise_sum(&self) -> f64 {
        self.noise_terms.iter().sum()
    }

    /// `sum_t P_t dt`.
    pub fn policy_sum(&self) -> f64 {
        self.policy_terms.iter().sum::<f64>() * self.dt
    }

    /// `exp(-sqrt(rho) sum N - rho/2 sum P dt)`, the change of measure from the
    /// controlled to the uncontrolled path law.
    pub fn radon_nikodym(&self, rho: f64) -> f64 {
        (-rho.sqrt() * self.noise_sum() - 0.5 * rho * self.policy_sum()).exp()
    }
}

/// A model, grid, actuation and time step bundled for repeated rollouts.
#[derive(Clone, Debug)]
pub struct Simulator {
    stepper: Stepper,
    map: ActuatorMap,
}

impl Simulator {
    pub fn new(model: &SpdeModel, map: &ActuatorMap, dt: f64) -> Result<Self> {
        let stepper = Stepper::new(model, map.grid(), dt)?;
        let boundary_model = model.kind == ModelKind::Heat1dBoundary;
        let boundary_map = map.kind() == ActuatorKind::Boundary;
        if boundary_model != boundary_map {
            return Err(Error::InvalidActuator(format!(
                "{:?} actuation does not fit the {:?} model",
                map.kind(),
                model.kind
            )));
        }
        Ok(Self {
            stepper,
            map: map.clone(),
        })
    }

    pub fn stepper(&self) -> &Stepper {
        &self.stepper
    }

    pub fn model(&self) -> &SpdeModel {
        self.stepper.model()
    }

    pub fn map(&self) -> &ActuatorMap {
        &self.map
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.map.grid()
    }

    pub fn dt(&self) -> f64 {
        self.stepper.dt()
    }

    /// Samples the initial state and pins Dirichlet boundary nodes.
    pub fn initial_state<R: Rng + ?Sized>(&self, ic: &InitialCondition, rng: &mut R) -> Field {
        let mut x = ic.sample(self.grid(), rng);
        self.stepper.apply_boundary_values(&mut x);
        x
    }

    fn draw_noise<R: Rng + ?Sized>(&self, rng: &mut R) -> StepNoise {
        let field = sample_noise(self.grid(), self.dt(), rng);
        let boundary = (self.model().kind == ModelKind::Heat1dBoundary)
            .then(|| [rng.sample(StandardNormal), rng.sample(StandardNormal)]);
        StepNoise { field, boundary }
    }

    /// Runs `steps` steps of the closed loop from `x0`.
    pub fn rollout<R: Rng + ?Sized>(
        &self,
        controller: &dyn Controller,
        x0: &Field,
        steps: usize,
        rng: &mut R,
    ) -> Result<Trajectory> {
        check_same_grid(x0.grid(), self.grid())?;
        if steps == 0 {
            return Err(Error::InvalidModel("a rollout needs at least one step".into()));
        }
        if controller.outputs() != self.map.count() {
            return Err(Error::Shape {
                expected: self.map.count(),
                found: controller.outputs(),
                context: "controller outputs vs actuators",
            });
        }
        let boundary = self.model().kind == ModelKind::Heat1dBoundary;
        let actuated = self.model().noise_channel == NoiseChannel::Actuated;
        let dt = self.dt();
        let nodes = self.grid().node_count();
        let flux_pair_scale = (dt * self.grid().spacing()).sqrt();
        let zero_field = vec![0.0; nodes];

        let mut traj = Trajectory {
            states: Vec::with_capacity(steps + 1),
            controls: Vec::with_capacity(steps),
            noise: Vec::with_capacity(steps),
            noise_projection: Vec::with_capacity(steps),
            noise_terms: Vec::with_capacity(steps),
            policy_terms: Vec::with_capacity(steps),
            dt,
            diverged: false,
        };
        traj.states.push(x0.clone());
        for _ in 0..steps {
            let x = traj.states.last().expect("non-empty");
            let u = controller.control(x)?;
            let noise = self.draw_noise(rng);
            let proj: Vec<f64> = match noise.boundary {
                // the flux normals act as the noise increments on the two boundary nodes
                Some(xi) => xi.iter().map(|v| v * flux_pair_scale).collect(),
                None => self.map.project_noise(&noise.field),
            };
            let n_t: f64 = u.iter().zip(&proj).map(|(a, b)| a * b).sum();
            let p_t = self.map.quadratic(&u);

            let next = if boundary {
                let dw = if actuated { zero_field.clone() } else { noise.field.increment_field() };
                self.stepper.step(
                    x,
                    &StepForcing {
                        control: &zero_field,
                        flux: [u[0], u[1]],
                        noise: &dw,
                        flux_noise: noise.boundary.expect("boundary model"),
                    },
                )?
            } else {
                let phi = self.map.control_field(&u)?;
                let mut dw = noise.field.increment_field();
                if actuated {
                    dw = self.map.project_onto_span(&dw)?;
                }
                self.stepper.step(x, &distributed_forcing(&phi, &dw))?
            };

            traj.controls.push(u);
            traj.noise.push(noise);
            traj.noise_projection.push(proj);
            traj.noise_terms.push(n_t);
            traj.policy_terms.push(p_t);
            if !next.is_finite() {
                traj.diverged = true;
                break;
            }
            traj.states.push(next);
        }
        Ok(traj)
    }
}

/// Convenience wrapper building a [`Simulator`] for a single rollout.
pub fn rollout<R: Rng + ?Sized>(
    model: &SpdeModel,
    map: &ActuatorMap,
    controller: &dyn Controller,
    x0: &Field,
    steps: usize,
    dt: f64,
    rng: &mut R,
) -> Result<Trajectory> {
    Simulator::new(model, map, dt)?.rollout(controller, x0, steps, rng)
}
