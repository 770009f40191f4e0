//! Iterative methods as deterministic step functions over [`SolverState`].
//!
//! The accelerated backward-forward (ABF) iteration is
//!
//! ```text
//! y_{k+1} = x_k − s ∇f(x_k)
//! z_{k+1} = y_{k+1} + λ_{k+1}(y_{k+1} − y_k) + (λ_{k+1} s / γ_k)(z_k − x_k)
//! γ_{k+1} = (1 + λ_{k+1}) s
//! x_{k+1} = prox(γ_{k+1}, z_{k+1})
//! ```
//!
//! FISTA and FISTA-SC apply the prox with step `s` and extrapolate after it;
//! plain proximal gradient has no momentum at all.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::diagnostics::Recorder;
use crate::error::{Error, Result};
use crate::problem::ProblemInstance;
use crate::prox::ProxOracle;
use crate::schedule::{gamma_next, ConvexSchedule, ScheduleConfig, StronglyConvexSchedule, Variant};
use crate::trajectory::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Abf,
    AbfSc,
    Fista,
    FistaSc,
    Pg,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Abf, Method::AbfSc, Method::Fista, Method::FistaSc, Method::Pg];

    pub fn name(self) -> &'static str {
        match self {
            Method::Abf => "abf",
            Method::AbfSc => "abf_sc",
            Method::Fista => "fista",
            Method::FistaSc => "fista_sc",
            Method::Pg => "pg",
        }
    }

    /// Whether the iteration carries the `z` sequence and `γ_k`.
    pub fn is_abf_family(self) -> bool {
        matches!(self, Method::Abf | Method::AbfSc)
    }

    pub fn needs_strong_convexity(self) -> bool {
        matches!(self, Method::AbfSc | Method::FistaSc)
    }

    /// Point at which the function gap is reported.
    pub fn eval_point(self) -> EvalPoint {
        match self {
            Method::Fista | Method::FistaSc => EvalPoint::Y,
            _ => EvalPoint::X,
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::config("method", format!("unknown method {s:?}")))
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Which iterate the logged `F_gap` refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalPoint {
    X,
    Y,
}

/// Inertial schedule carried by a state.
#[derive(Debug, Clone, PartialEq)]
pub enum Momentum {
    Convex(ConvexSchedule),
    StronglyConvex(StronglyConvexSchedule),
    None,
}

impl Momentum {
    fn advance(&mut self) -> f64 {
        match self {
            Momentum::Convex(sched) => sched.advance(),
            Momentum::StronglyConvex(sc) => sc.lambda(),
            Momentum::None => 0.0,
        }
    }
}

/// Live iterate of any method.
///
/// For the ABF family `z` is present and `x = prox(γ, z)`. For FISTA-type
/// methods `y` is the prox output and `x` the extrapolated point. For plain
/// proximal gradient `y == x`. The gradient and `f`, `g` values at `x` are
/// cached so each steady-state iteration costs one gradient and one prox.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub method: Method,
    pub k: usize,
    pub step: f64,
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub z: Option<DVector<f64>>,
    pub gamma: f64,
    pub momentum: Momentum,
    /// `λ_k`, the coefficient used to produce this state (0 at `k = 0`).
    pub lambda: f64,
    pub grad_x: DVector<f64>,
    pub f_x: f64,
    pub g_x: f64,
    /// `F` at the evaluation point of the method.
    pub objective: f64,
}

impl SolverState {
    /// `t_k` for convex schedules.
    pub fn t(&self) -> Option<f64> {
        match &self.momentum {
            Momentum::Convex(s) => Some(s.t()),
            _ => None,
        }
    }

    /// `θ` for the strongly convex ABF schedule.
    pub fn theta(&self) -> Option<f64> {
        match &self.momentum {
            Momentum::StronglyConvex(s) if self.method == Method::AbfSc => Some(s.theta()),
            _ => None,
        }
    }

    /// `lim γ_k`: `2s` under the convex schedule, `(1 + λ)s` under the
    /// constant one.
    pub fn limit_gamma(&self) -> f64 {
        match &self.momentum {
            Momentum::Convex(_) => 2.0 * self.step,
            Momentum::StronglyConvex(sc) => gamma_next(sc.lambda(), self.step),
            Momentum::None => self.step,
        }
    }

    /// `y_{k+1}` as the next step will produce it (ABF family and PG need no
    /// prox; FISTA needs one).
    pub fn peek_next_y(&self, instance: &ProblemInstance) -> DVector<f64> {
        let forward = &self.x - &self.grad_x * self.step;
        match self.method {
            Method::Abf | Method::AbfSc => forward,
            Method::Fista | Method::FistaSc | Method::Pg => instance.g.prox(self.step, &forward),
        }
    }

    fn is_finite(&self) -> bool {
        let finite = |v: &DVector<f64>| v.iter().all(|c| c.is_finite());
        finite(&self.x) && finite(&self.y) && self.z.as_ref().is_none_or(finite) && self.gamma.is_finite()
    }

    fn diverged(&self) -> Error {
        Error::Diverged {
            iteration: self.k,
            x_norm: self.x.norm(),
            y_norm: self.y.norm(),
            z_norm: self.z.as_ref().map_or(0.0, |z| z.norm()),
        }
    }
}

fn check_step(instance: &ProblemInstance, s: f64) -> Result<()> {
    let max = 1.0 / instance.lipschitz();
    if s > 0.0 && s <= max {
        Ok(())
    } else {
        Err(Error::config("step", format!("must lie in (0, 1/L = {max}], got {s}")))
    }
}

fn start_point(instance: &ProblemInstance, start: Option<&DVector<f64>>) -> Result<DVector<f64>> {
    let n = instance.dimension();
    match start {
        Some(v) if v.len() != n => Err(Error::Dimension {
            expected: n,
            actual: v.len(),
        }),
        Some(v) => Ok(v.clone()),
        None => Ok(DVector::zeros(n)),
    }
}

#[allow(clippy::too_many_arguments)]
fn abf_state(
    method: Method,
    instance: &ProblemInstance,
    s: f64,
    momentum: Momentum,
    x: DVector<f64>,
    y: DVector<f64>,
    z: DVector<f64>,
    grad_x: DVector<f64>,
) -> SolverState {
    let f_x = instance.f.value(&x);
    let g_x = instance.g.value(&x);
    SolverState {
        method,
        k: 0,
        step: s,
        x,
        y,
        z: Some(z),
        gamma: s,
        momentum,
        lambda: 0.0,
        grad_x,
        f_x,
        g_x,
        objective: f_x + g_x,
    }
}

/// Convex ABF start: `γ_0 = s`, `z_0 = y_0 − γ_0∇f(y_0)`,
/// `x_0 = prox(γ_0, z_0)`. `y_0` defaults to zero.
pub fn abf_init(
    instance: &ProblemInstance,
    s: f64,
    schedule: &ScheduleConfig,
    y0: Option<&DVector<f64>>,
) -> Result<SolverState> {
    check_step(instance, s)?;
    let sched = ConvexSchedule::new(schedule)?;
    let y = start_point(instance, y0)?;
    let z = &y - instance.f.gradient(&y) * s;
    let x = instance.g.prox(s, &z);
    let grad_x = instance.f.gradient(&x);
    let state = abf_state(Method::Abf, instance, s, Momentum::Convex(sched), x, y, z, grad_x);
    if state.is_finite() {
        Ok(state)
    } else {
        Err(state.diverged())
    }
}

/// Strongly convex ABF start: `γ_0 = s`, `x_0 = prox(γ_0, z_0)`,
/// `y_0 = x_0 − s∇f(x_0)`. `z_0` defaults to zero.
pub fn abf_sc_init(instance: &ProblemInstance, s: f64, z0: Option<&DVector<f64>>) -> Result<SolverState> {
    check_step(instance, s)?;
    let sched = StronglyConvexSchedule::from_step(instance.strong_convexity(), s)?;
    let z = start_point(instance, z0)?;
    let x = instance.g.prox(s, &z);
    let grad_x = instance.f.gradient(&x);
    let y = &x - &grad_x * s;
    let state = abf_state(
        Method::AbfSc,
        instance,
        s,
        Momentum::StronglyConvex(sched),
        x,
        y,
        z,
        grad_x,
    );
    if state.is_finite() {
        Ok(state)
    } else {
        Err(state.diverged())
    }
}

fn abf_advance(state: &SolverState, instance: &ProblemInstance) -> SolverState {
    let s = state.step;
    let mut momentum = state.momentum.clone();
    let lambda = momentum.advance();
    let z_k = state.z.as_ref().expect("ABF state carries z");

    let y_next = &state.x - &state.grad_x * s;
    let z_next = &y_next + (&y_next - &state.y) * lambda + (z_k - &state.x) * (lambda * s / state.gamma);
    let gamma = gamma_next(lambda, s);
    let x_next = instance.g.prox(gamma, &z_next);

    let grad_x = instance.f.gradient(&x_next);
    let f_x = instance.f.value(&x_next);
    let g_x = instance.g.value(&x_next);
    SolverState {
        method: state.method,
        k: state.k + 1,
        step: s,
        x: x_next,
        y: y_next,
        z: Some(z_next),
        gamma,
        momentum,
        lambda,
        grad_x,
        f_x,
        g_x,
        objective: f_x + g_x,
    }
}

/// One convex ABF iteration.
pub fn abf_step(state: &SolverState, instance: &ProblemInstance) -> Result<SolverState> {
    if state.method != Method::Abf {
        return Err(Error::config(
            "method",
            format!("abf_step applied to a {} state", state.method),
        ));
    }
    finish(abf_advance(state, instance))
}

/// One strongly convex ABF iteration (constant `λ`).
pub fn abf_sc_step(state: &SolverState, instance: &ProblemInstance) -> Result<SolverState> {
    if state.method != Method::AbfSc {
        return Err(Error::config(
            "method",
            format!("abf_sc_step applied to a {} state", state.method),
        ));
    }
    finish(abf_advance(state, instance))
}

fn finish(next: SolverState) -> Result<SolverState> {
    if next.is_finite() {
        Ok(next)
    } else {
        Err(next.diverged())
    }
}

fn forward_backward_state(
    method: Method,
    instance: &ProblemInstance,
    s: f64,
    momentum: Momentum,
    start: DVector<f64>,
) -> SolverState {
    let grad_x = instance.f.gradient(&start);
    let f_x = instance.f.value(&start);
    let g_x = instance.g.value(&start);
    let objective = if g_x == f64::INFINITY { f64::INFINITY } else { f_x + g_x };
    SolverState {
        method,
        k: 0,
        step: s,
        x: start.clone(),
        y: start,
        z: None,
        gamma: s,
        momentum,
        lambda: 0.0,
        grad_x,
        f_x,
        g_x,
        objective,
    }
}

/// FISTA start `x_0 = y_0`, momentum `k/(k + α)`.
pub fn fista_init(instance: &ProblemInstance, s: f64, alpha: f64, start: Option<&DVector<f64>>) -> Result<SolverState> {
    check_step(instance, s)?;
    let sched = ConvexSchedule::new(&ScheduleConfig {
        variant: Variant::Nesterov,
        alpha,
        ..Default::default()
    })?;
    let start = start_point(instance, start)?;
    Ok(forward_backward_state(
        Method::Fista,
        instance,
        s,
        Momentum::Convex(sched),
        start,
    ))
}

/// FISTA-SC start `x_0 = y_0`, momentum `(1 − √(μ/L))/(1 + √(μ/L))`.
pub fn fista_sc_init(instance: &ProblemInstance, s: f64, start: Option<&DVector<f64>>) -> Result<SolverState> {
    check_step(instance, s)?;
    let sched = StronglyConvexSchedule::from_condition(instance.strong_convexity(), instance.lipschitz())?;
    let start = start_point(instance, start)?;
    Ok(forward_backward_state(
        Method::FistaSc,
        instance,
        s,
        Momentum::StronglyConvex(sched),
        start,
    ))
}

/// Proximal gradient start.
pub fn pg_init(instance: &ProblemInstance, s: f64, start: Option<&DVector<f64>>) -> Result<SolverState> {
    check_step(instance, s)?;
    let start = start_point(instance, start)?;
    Ok(forward_backward_state(Method::Pg, instance, s, Momentum::None, start))
}

fn forward_backward_advance(state: &SolverState, instance: &ProblemInstance) -> SolverState {
    let s = state.step;
    let mut momentum = state.momentum.clone();
    let lambda = momentum.advance();
    let y_next = instance.g.prox(s, &(&state.x - &state.grad_x * s));
    let x_next = if state.method == Method::Pg {
        y_next.clone()
    } else {
        &y_next + (&y_next - &state.y) * lambda
    };
    let grad_x = instance.f.gradient(&x_next);
    let f_x = instance.f.value(&x_next);
    let g_x = instance.g.value(&x_next);
    let objective = if state.method == Method::Pg {
        f_x + g_x
    } else {
        instance.objective(&y_next)
    };
    SolverState {
        method: state.method,
        k: state.k + 1,
        step: s,
        x: x_next,
        y: y_next,
        z: None,
        gamma: s,
        momentum,
        lambda,
        grad_x,
        f_x,
        g_x,
        objective,
    }
}

/// One FISTA iteration:
/// `y_{k+1} = prox(s, x_k − s∇f(x_k))`, `x_{k+1} = y_{k+1} + k/(k+α)(y_{k+1} − y_k)`.
pub fn fista_step(state: &SolverState, instance: &ProblemInstance) -> Result<SolverState> {
    if state.method != Method::Fista {
        return Err(Error::config(
            "method",
            format!("fista_step applied to a {} state", state.method),
        ));
    }
    finish(forward_backward_advance(state, instance))
}

/// One FISTA-SC iteration with constant momentum.
pub fn fista_sc_step(state: &SolverState, instance: &ProblemInstance) -> Result<SolverState> {
    if state.method != Method::FistaSc {
        return Err(Error::config(
            "method",
            format!("fista_sc_step applied to a {} state", state.method),
        ));
    }
    finish(forward_backward_advance(state, instance))
}

/// One proximal-gradient iteration `x_{k+1} = prox(s, x_k − s∇f(x_k))`.
pub fn pg_step(state: &SolverState, instance: &ProblemInstance) -> Result<SolverState> {
    if state.method != Method::Pg {
        return Err(Error::config(
            "method",
            format!("pg_step applied to a {} state", state.method),
        ));
    }
    finish(forward_backward_advance(state, instance))
}

/// Dispatches to the step function of `state.method`.
pub fn step(state: &SolverState, instance: &ProblemInstance) -> Result<SolverState> {
    match state.method {
        Method::Abf => abf_step(state, instance),
        Method::AbfSc => abf_sc_step(state, instance),
        Method::Fista => fista_step(state, instance),
        Method::FistaSc => fista_sc_step(state, instance),
        Method::Pg => pg_step(state, instance),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Stopping {
    #[default]
    None,
    /// Stop once `‖x − prox(s, x − s∇f(x))‖ ≤ tol·(1 + ‖x‖)`.
    FixedPointTol(f64),
}

fn default_record_every() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub method: Method,
    /// Step `s`; `1/L` when absent.
    #[serde(default)]
    pub step: Option<f64>,
    pub max_iterations: usize,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    #[serde(default)]
    pub stopping: Stopping,
    /// `y_0` for ABF, `z_0` for ABF-SC, `x_0 = y_0` otherwise. Zero when absent.
    #[serde(default)]
    pub start: Option<Vec<f64>>,
}

impl RunConfig {
    pub fn new(method: Method, max_iterations: usize) -> Self {
        RunConfig {
            method,
            step: None,
            max_iterations,
            schedule: ScheduleConfig::default(),
            record_every: 1,
            stopping: Stopping::None,
            start: None,
        }
    }

    pub fn step_for(&self, instance: &ProblemInstance) -> f64 {
        self.step.unwrap_or(1.0 / instance.lipschitz())
    }

    /// Builds the initial state for the configured method.
    pub fn init(&self, instance: &ProblemInstance) -> Result<SolverState> {
        if self.record_every == 0 {
            return Err(Error::config("record_every", "must be >= 1"));
        }
        if let Stopping::FixedPointTol(tol) = self.stopping {
            if tol.is_nan() || tol <= 0.0 {
                return Err(Error::config(
                    "stopping.fixed_point_tol",
                    format!("must be > 0, got {tol}"),
                ));
            }
        }
        let s = self.step_for(instance);
        let start = self.start.as_ref().map(|v| DVector::from_column_slice(v));
        let start = start.as_ref();
        match self.method {
            Method::Abf => abf_init(instance, s, &self.schedule, start),
            Method::AbfSc => abf_sc_init(instance, s, start),
            Method::Fista => fista_init(instance, s, self.schedule.alpha, start),
            Method::FistaSc => fista_sc_init(instance, s, start),
            Method::Pg => pg_init(instance, s, start),
        }
    }
}

/// Runs `config.max_iterations` steps (or until the fixed-point stopping
/// rule fires), recording certificates every `record_every` steps. The
/// initial and final iterates are always recorded.
///
/// Configuration errors are returned as `Err`. Divergence is not: the
/// partial trajectory is returned with `divergence` set.
pub fn run(instance: &ProblemInstance, config: &RunConfig) -> Result<Trajectory> {
    let mut state = config.init(instance)?;
    let mut recorder = Recorder::new(instance, &state)?;
    let mut records = Vec::new();
    let mut divergence = None;

    for _ in 0..config.max_iterations {
        if let Stopping::FixedPointTol(tol) = config.stopping {
            if instance.fixed_point_residual(&state.x, state.step) <= tol * (1.0 + state.x.norm()) {
                break;
            }
        }
        let next = match step(&state, instance) {
            Ok(next) => next,
            Err(e) => {
                divergence = Some(e);
                break;
            }
        };
        let record = recorder.observe(&state, &next.y)?;
        if state.k % config.record_every == 0 {
            records.push(record);
        }
        state = next;
    }

    if divergence.is_none() {
        let y_next = state.peek_next_y(instance);
        records.push(recorder.observe(&state, &y_next)?);
    }

    Ok(Trajectory {
        method: config.method,
        eval_point: config.method.eval_point(),
        step: state.step,
        lipschitz: instance.lipschitz(),
        strong_convexity: instance.strong_convexity(),
        instance: instance.descriptor.as_ref().map(|d| d.label()),
        records,
        final_state: state,
        divergence,
    })
}
