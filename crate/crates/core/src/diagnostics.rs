//! Certificate quantities, Lyapunov energies and rate bounds.
//!
//! Every inequality here is exact in exact arithmetic. Comparisons use
//! `tol = 1e-12 + 1e-10 · scale`, where `scale` is the largest magnitude of
//! the terms entering the compared expression.

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::problem::ProblemInstance;
use crate::prox::{ProxOracle, Regularizer};
use crate::solvers::{Method, Momentum, SolverState};

pub const ATOL: f64 = 1e-12;
pub const RTOL: f64 = 1e-10;

/// `1e-12 + 1e-10 · scale`.
pub fn tolerance(scale: f64) -> f64 {
    ATOL + RTOL * scale.abs()
}

/// `8` units in the last place of `scale`.
pub fn ulps8(scale: f64) -> f64 {
    8.0 * f64::EPSILON * scale.abs()
}

/// A computed quantity together with the magnitude of the terms it was
/// formed from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Certificate {
    pub value: f64,
    pub scale: f64,
}

impl Certificate {
    pub fn tolerance(&self) -> f64 {
        tolerance(self.scale)
    }

    /// `value + tol`, nonnegative when the certificate is nonnegative up to
    /// roundoff.
    pub fn slack(&self) -> f64 {
        self.value + self.tolerance()
    }
}

/// Minimizer data used by all certificates. Never taken from a run under
/// test.
#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    pub minimizer: DVector<f64>,
    pub minimum: f64,
    pub f_min: f64,
    pub g_min: f64,
    pub gradient: DVector<f64>,
}

impl Reference {
    pub fn of(instance: &ProblemInstance) -> Result<Self> {
        let (minimizer, minimum) = instance.reference()?;
        let f_min = instance.f.value(&minimizer);
        let g_min = instance.g.value(&minimizer);
        let gradient = instance.f.gradient(&minimizer);
        Ok(Reference {
            minimizer,
            minimum,
            f_min,
            g_min,
            gradient,
        })
    }
}

fn finite_g(g: &Regularizer, x: &DVector<f64>) -> Result<f64> {
    let v = g.value(x);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::OutsideDomain {
            point: format!("{:?}", x.as_slice()),
        })
    }
}

/// `⟨u, x − x*⟩ − (h(x) − h(x*))` with its magnitude scale.
fn convexity_gap(u: &DVector<f64>, x: &DVector<f64>, x_star: &DVector<f64>, hx: f64, h_star: f64) -> Certificate {
    let d = x - x_star;
    let inner = u.dot(&d);
    Certificate {
        value: inner - (hx - h_star),
        scale: (u.norm() * d.norm()).max(hx.abs()).max(h_star.abs()),
    }
}

/// `η = ⟨(z − x)/γ, x − x*⟩ − (g(x) − g(x*))` from raw iterates.
pub fn eta_at(
    x: &DVector<f64>,
    z: &DVector<f64>,
    gamma: f64,
    x_star: &DVector<f64>,
    g: &Regularizer,
) -> Result<Certificate> {
    let gx = finite_g(g, x)?;
    let gs = finite_g(g, x_star)?;
    let sub = (z - x) / gamma;
    Ok(convexity_gap(&sub, x, x_star, gx, gs))
}

/// `η_k` of an ABF-family state.
pub fn eta(state: &SolverState, x_star: &DVector<f64>, g: &Regularizer) -> Result<Certificate> {
    let z = state
        .z
        .as_ref()
        .ok_or_else(|| Error::config("method", format!("eta needs the z sequence, {} has none", state.method)))?;
    eta_at(&state.x, z, state.gamma, x_star, g)
}

/// `ψ = ⟨∇f(x), x − x*⟩ − (f(x) − f(x*))` from cached values.
pub fn psi_at(grad_x: &DVector<f64>, x: &DVector<f64>, f_x: f64, x_star: &DVector<f64>, f_star: f64) -> Certificate {
    convexity_gap(grad_x, x, x_star, f_x, f_star)
}

/// `ψ_k` at the gradient point of a state.
pub fn psi(state: &SolverState, x_star: &DVector<f64>, f: &dyn crate::problem::SmoothOracle) -> Certificate {
    psi_at(&state.grad_x, &state.x, state.f_x, x_star, f.value(x_star))
}

/// Inputs shared by both energies: iterates `x_k, y_k, y_{k+1}`, the gap
/// `F(x_k) − F*` and the certificates at `k`.
#[derive(Debug, Clone, Copy)]
pub struct CertificateInputs<'a> {
    pub x: &'a DVector<f64>,
    pub y: &'a DVector<f64>,
    pub y_next: &'a DVector<f64>,
    pub x_star: &'a DVector<f64>,
    pub gap: Certificate,
    pub eta: Certificate,
    pub psi: Certificate,
    pub s: f64,
}

/// An energy value with both evaluations of its `R_k` term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Energy {
    pub value: f64,
    pub scale: f64,
    pub r_sum: f64,
    pub r_square: f64,
    pub r_scale: f64,
}

impl Energy {
    /// Sum and completed-square forms of `R_k` agree to 8 ulps of the `R`
    /// term scale.
    pub fn forms_agree(&self) -> bool {
        (self.r_sum - self.r_square).abs() <= ulps8(self.r_scale)
    }

    pub fn tolerance(&self) -> f64 {
        tolerance(self.scale)
    }
}

/// `E_k = s t²(F(x_k) − F*) + s(t − 1)η_k + s(t − 1)ψ_k + R_k` with
/// `R_k = t(t−1)/2 ‖Δy‖² + (t−1)⟨Δy, x − x*⟩ + ½‖x − x*‖²`, `Δy = y_{k+1} − y_k`.
pub fn energy_convex(inputs: &CertificateInputs<'_>, t: f64) -> Energy {
    let s = inputs.s;
    let dy = inputs.y_next - inputs.y;
    let e = inputs.x - inputs.x_star;
    let dy2 = dy.norm_squared();
    let e2 = e.norm_squared();
    let a = t * (t - 1.0) / 2.0 * dy2;
    let b = (t - 1.0) * dy.dot(&e);
    let c = 0.5 * e2;
    let r_sum = a + b + c;
    let r_square = 0.5 * (&dy * (t - 1.0) + &e).norm_squared() + (t - 1.0) / 2.0 * dy2;
    let r_scale = a.max((t - 1.0) * dy2.sqrt() * e2.sqrt()).max(c);

    let gap_term = s * t * t * inputs.gap.value;
    let eta_term = s * (t - 1.0) * inputs.eta.value;
    let psi_term = s * (t - 1.0) * inputs.psi.value;
    let scale = (s * t * t * inputs.gap.scale)
        .max(s * (t - 1.0) * inputs.eta.scale)
        .max(s * (t - 1.0) * inputs.psi.scale)
        .max(r_scale);
    Energy {
        value: gap_term + eta_term + psi_term + r_sum,
        scale,
        r_sum,
        r_square,
        r_scale,
    }
}

/// `E_k = F(x_k) − F* + θ/(1+θ)(η_k + ψ_k) + R_k` with
/// `R_k = ‖Δy‖²/(2s(1+θ)) + θ/(s(1+θ))⟨Δy, x − x*⟩ + θ²‖x − x*‖²/(2s(1+θ))`.
pub fn energy_sc(inputs: &CertificateInputs<'_>, theta: f64) -> Energy {
    let s = inputs.s;
    let dy = inputs.y_next - inputs.y;
    let e = inputs.x - inputs.x_star;
    let dy2 = dy.norm_squared();
    let e2 = e.norm_squared();
    let denom = s * (1.0 + theta);
    let a = dy2 / (2.0 * denom);
    let b = theta / denom * dy.dot(&e);
    let c = theta * theta * e2 / (2.0 * denom);
    let r_sum = a + b + c;
    let r_square = (&dy + &e * theta).norm_squared() / (2.0 * denom);
    let r_scale = a.max(theta / denom * dy2.sqrt() * e2.sqrt()).max(c);

    let w = theta / (1.0 + theta);
    let scale = inputs
        .gap
        .scale
        .max(w * inputs.eta.scale)
        .max(w * inputs.psi.scale)
        .max(r_scale);
    Energy {
        value: inputs.gap.value + w * inputs.eta.value + w * inputs.psi.value + r_sum,
        scale,
        r_sum,
        r_square,
        r_scale,
    }
}

/// `‖y_0 − x*‖² / (2 s t_k²)`.
pub fn bound_thm_convex(t: f64, s: f64, y0: &DVector<f64>, x_star: &DVector<f64>) -> f64 {
    (y0 - x_star).norm_squared() / (2.0 * s * t * t)
}

/// `F(x_0) − F* + θ/(1+θ) η_0 + θ/(2s) ‖x_0 − x*‖²`.
pub fn sc_initial_bound(gap0: f64, eta0: f64, theta: f64, s: f64, x0: &DVector<f64>, x_star: &DVector<f64>) -> f64 {
    gap0 + theta / (1.0 + theta) * eta0 + theta / (2.0 * s) * (x0 - x_star).norm_squared()
}

/// `(1 − θ)^k · E_0 bound`.
pub fn bound_thm_sc(k: usize, theta: f64, e0_bound: f64) -> f64 {
    (1.0 - theta).powi(k.min(i32::MAX as usize) as i32) * e0_bound
}

/// FISTA with momentum `k/(k+α)`:
/// `F(y_k) − F* ≤ (α−1)² ‖y_0 − x*‖² / (2 s (k + α − 2)²)` for `k ≥ 1`.
pub fn bound_fista(k: usize, alpha: f64, s: f64, y0: &DVector<f64>, x_star: &DVector<f64>) -> Option<f64> {
    (k >= 1).then(|| {
        let d = k as f64 + alpha - 2.0;
        (alpha - 1.0).powi(2) * (y0 - x_star).norm_squared() / (2.0 * s * d * d)
    })
}

/// FISTA-SC with `s = 1/L`:
/// `F(y_k) − F* ≤ (1 − √(μ/L))^k (F(y_0) − F* + μ/2 ‖y_0 − x*‖²)`.
pub fn bound_fista_sc(k: usize, q: f64, gap0: f64, mu: f64, y0: &DVector<f64>, x_star: &DVector<f64>) -> f64 {
    (1.0 - q.sqrt()).powi(k.min(i32::MAX as usize) as i32) * (gap0 + mu / 2.0 * (y0 - x_star).norm_squared())
}

/// Proximal gradient: `F(x_k) − F* ≤ ‖x_0 − x*‖² / (2 s k)` for `k ≥ 1`.
pub fn bound_pg(k: usize, s: f64, x0: &DVector<f64>, x_star: &DVector<f64>) -> Option<f64> {
    (k >= 1).then(|| (x0 - x_star).norm_squared() / (2.0 * s * k as f64))
}

/// Prox-descent inequality
/// `F(y − sG) ≤ F(x) + ⟨G, y − x⟩ − (s/2)‖G‖²` with
/// `G = (y − prox(s, y − s∇f(y)))/s`. Returns right side minus left side.
pub fn prox_descent_check(y: &DVector<f64>, x: &DVector<f64>, s: f64, instance: &ProblemInstance) -> Certificate {
    let p = instance.prox_grad_step(y, s);
    let g_map = (y - &p) / s;
    let lhs = instance.objective(&p);
    let fx = instance.objective(x);
    let d = y - x;
    let half = s / 2.0 * g_map.norm_squared();
    let rhs = fx + g_map.dot(&d) - half;
    Certificate {
        value: rhs - lhs,
        scale: lhs.abs().max(fx.abs()).max(g_map.norm() * d.norm()).max(half),
    }
}

/// Distances of the iterate triple from `y* = x* − s∇f(x*)` and
/// `z* = x* − γ_∞∇f(x*)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FixedPointResiduals {
    pub y: f64,
    pub z: f64,
}

/// `‖y_k − x_k + s∇f(x_k)‖` and `‖z_k − x_k + γ_∞∇f(x_k)‖` for ABF-family
/// states, where `γ_∞` is `2s` under the convex schedule and `(1 + λ)s`
/// under the constant one.
pub fn fixed_point_residuals(state: &SolverState) -> Option<FixedPointResiduals> {
    let z = state.z.as_ref()?;
    let s = state.step;
    let y = (&state.y - &state.x + &state.grad_x * s).norm();
    let z = (z - &state.x + &state.grad_x * state.limit_gamma()).norm();
    Some(FixedPointResiduals { y, z })
}

/// One logged iteration. Fields that do not apply to a method are `None`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRecord {
    pub k: usize,
    pub t: Option<f64>,
    pub theta: Option<f64>,
    pub gamma: f64,
    /// `F − F*` at the method's evaluation point.
    pub f_gap: f64,
    pub gap_scale: f64,
    pub eta: Option<Certificate>,
    /// `ψ_k` at the gradient point `x_k`.
    pub psi: Certificate,
    /// `‖∇f(x_k) − ∇f(x*)‖² / (2L)`.
    pub psi_floor: f64,
    /// `μ/2 ‖x_k − x*‖²` when `μ > 0`.
    pub psi_strong_floor: Option<f64>,
    pub energy: Option<Energy>,
    pub bound: Option<f64>,
    pub residual_y: Option<f64>,
    pub residual_z: Option<f64>,
    pub grad_drift: f64,
    pub y_increment: f64,
    pub dist_to_min: f64,
    /// `s Σ_{j<k} t_j ψ_j` (convex ABF).
    pub sum_t_psi: Option<f64>,
    /// `s Σ_{j<k} t_j η_{j+1}` (convex ABF).
    pub sum_t_eta: Option<f64>,
}

/// Turns consecutive states into records. Must observe every iteration so
/// that the running sums are complete.
#[derive(Debug)]
pub struct Recorder<'a> {
    instance: &'a ProblemInstance,
    reference: Reference,
    method: Method,
    step: f64,
    alpha: f64,
    origin: DVector<f64>,
    initial_gap: f64,
    sc_e0_bound: Option<f64>,
    prev: Option<(f64, f64)>,
    sum_t_psi: f64,
    sum_t_eta: f64,
}

impl<'a> Recorder<'a> {
    /// Captures `y_0` (or `x_0`) and the initial quantities the bounds need.
    pub fn new(instance: &'a ProblemInstance, initial: &SolverState) -> Result<Self> {
        let reference = Reference::of(instance)?;
        Self::with_reference(instance, initial, reference)
    }

    pub fn with_reference(instance: &'a ProblemInstance, initial: &SolverState, reference: Reference) -> Result<Self> {
        let initial_gap = initial.objective - reference.minimum;
        let sc_e0_bound = match initial.theta() {
            Some(theta) => {
                let eta0 = eta(initial, &reference.minimizer, &instance.g)?;
                Some(sc_initial_bound(
                    initial_gap,
                    eta0.value,
                    theta,
                    initial.step,
                    &initial.x,
                    &reference.minimizer,
                ))
            }
            None => None,
        };
        let alpha = match &initial.momentum {
            Momentum::Convex(sched) => sched.alpha(),
            _ => 3.0,
        };
        Ok(Recorder {
            instance,
            reference,
            method: initial.method,
            step: initial.step,
            alpha,
            origin: initial.y.clone(),
            initial_gap,
            sc_e0_bound,
            prev: None,
            sum_t_psi: 0.0,
            sum_t_eta: 0.0,
        })
    }

    pub fn reference(&self) -> &Reference {
        &self.reference
    }

    fn bound(&self, state: &SolverState) -> Option<f64> {
        let x_star = &self.reference.minimizer;
        let s = self.step;
        match self.method {
            Method::Abf => state.t().map(|t| bound_thm_convex(t, s, &self.origin, x_star)),
            Method::AbfSc => Some(bound_thm_sc(state.k, state.theta()?, self.sc_e0_bound?)),
            Method::Fista => bound_fista(state.k, self.alpha, s, &self.origin, x_star),
            Method::FistaSc => {
                let lip = self.instance.lipschitz();
                if (s * lip - 1.0).abs() > 4.0 * f64::EPSILON {
                    return None;
                }
                let mu = self.instance.strong_convexity();
                Some(bound_fista_sc(
                    state.k,
                    mu / lip,
                    self.initial_gap,
                    mu,
                    &self.origin,
                    x_star,
                ))
            }
            Method::Pg => bound_pg(state.k, s, &self.origin, x_star),
        }
    }

    /// Record for `state` (iteration `k`) given `y_{k+1}`.
    pub fn observe(&mut self, state: &SolverState, y_next: &DVector<f64>) -> Result<TrajectoryRecord> {
        let r = &self.reference;
        let x_star = &r.minimizer;
        let lip = self.instance.lipschitz();
        let mu = self.instance.strong_convexity();

        let gap = Certificate {
            value: state.objective - r.minimum,
            scale: state.objective.abs().max(r.minimum.abs()),
        };
        let eta_k = if self.method.is_abf_family() {
            Some(eta(state, x_star, &self.instance.g)?)
        } else {
            None
        };
        let psi_k = psi_at(&state.grad_x, &state.x, state.f_x, x_star, r.f_min);
        let drift = (&state.grad_x - &r.gradient).norm();
        let dist = (&state.x - x_star).norm();

        let energy = eta_k.and_then(|eta_k| {
            let inputs = CertificateInputs {
                x: &state.x,
                y: &state.y,
                y_next,
                x_star,
                gap,
                eta: eta_k,
                psi: psi_k,
                s: self.step,
            };
            match (state.t(), state.theta()) {
                (Some(t), _) => Some(energy_convex(&inputs, t)),
                (None, Some(theta)) => Some(energy_sc(&inputs, theta)),
                _ => None,
            }
        });

        let (sum_t_psi, sum_t_eta) = if self.method == Method::Abf {
            let t = state.t().unwrap_or(1.0);
            if let Some((t_prev, psi_prev)) = self.prev {
                self.sum_t_psi += self.step * t_prev * psi_prev;
                self.sum_t_eta += self.step * t_prev * eta_k.map_or(0.0, |e| e.value);
            }
            self.prev = Some((t, psi_k.value));
            (Some(self.sum_t_psi), Some(self.sum_t_eta))
        } else {
            (None, None)
        };

        let residuals = fixed_point_residuals(state);
        Ok(TrajectoryRecord {
            k: state.k,
            t: state.t(),
            theta: state.theta(),
            gamma: state.gamma,
            f_gap: gap.value,
            gap_scale: gap.scale,
            eta: eta_k,
            psi: psi_k,
            psi_floor: drift * drift / (2.0 * lip),
            psi_strong_floor: (mu > 0.0).then(|| mu / 2.0 * dist * dist),
            energy,
            bound: self.bound(state),
            residual_y: residuals.map(|r| r.y),
            residual_z: residuals.map(|r| r.z),
            grad_drift: drift,
            y_increment: (y_next - &state.y).norm(),
            dist_to_min: dist,
            sum_t_psi,
            sum_t_eta,
        })
    }
}

/// Per-step ratio `exp(slope)` of a least-squares fit of `ln v` against `k`
/// over the later half of the points lying above `floor`. `None` when
/// fewer than three points qualify.
pub fn geometric_ratio(points: &[(usize, f64)], floor: f64) -> Option<f64> {
    let above: Vec<(f64, f64)> = points
        .iter()
        .filter(|(_, v)| *v > floor && v.is_finite())
        .map(|&(k, v)| (k as f64, v.ln()))
        .collect();
    let late = &above[above.len() / 2..];
    if late.len() < 3 {
        return None;
    }
    let n = late.len() as f64;
    let mean_k = late.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_v = late.iter().map(|p| p.1).sum::<f64>() / n;
    let (num, den) = late.iter().fold((0.0, 0.0), |(num, den), &(k, v)| {
        (num + (k - mean_k) * (v - mean_v), den + (k - mean_k) * (k - mean_k))
    });
    (den > 0.0).then(|| (num / den).exp())
}

/// Least-squares slope of `ln v` against `ln k` over records with
/// `k ∈ [lo, hi]` and `v > 0`.
pub fn loglog_slope(points: &[(usize, f64)], lo: usize, hi: usize) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(k, v)| *k >= lo && *k <= hi && *k > 0 && *v > 0.0)
        .map(|&(k, v)| ((k as f64).ln(), v.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let (num, den) = pts.iter().fold((0.0, 0.0), |(a, b), &(x, y)| {
        (a + (x - mx) * (y - my), b + (x - mx) * (x - mx))
    });
    (den > 0.0).then(|| num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{lasso_from_parts, make_lasso, make_quadratic, quadratic_from_parts};
    use crate::schedule::ScheduleConfig;
    use crate::solvers::{abf_init, abf_step};
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(xs)
    }

    fn half_square() -> ProblemInstance {
        quadratic_from_parts(DMatrix::from_element(1, 1, 1.0), v(&[0.0]), Regularizer::Zero).unwrap()
    }

    #[test]
    fn psi_scalar_example() {
        let inst = half_square();
        let c = psi_at(&v(&[2.0]), &v(&[2.0]), 2.0, &v(&[0.0]), 0.0);
        assert_eq!(c.value, 2.0);
        assert_eq!(psi_at(&v(&[0.0]), &v(&[0.0]), 0.0, &v(&[0.0]), 0.0).value, 0.0);
        let st = abf_init(&inst, 1.0, &ScheduleConfig::default(), Some(&v(&[1.0]))).unwrap();
        assert_eq!(psi(&st, &v(&[0.0]), inst.f.as_ref()).value, 0.0);
    }

    #[test]
    fn eta_vanishes_without_regularizer() {
        let inst = make_quadratic(5, 10.0, 3).unwrap();
        let xs = inst.known_minimizer.clone().unwrap();
        let mut st = abf_init(&inst, 1.0, &ScheduleConfig::default(), None).unwrap();
        for _ in 0..5 {
            let e = eta(&st, &xs, &inst.g).unwrap();
            assert_eq!(e.value, 0.0);
            st = abf_step(&st, &inst).unwrap();
        }
    }

    #[test]
    fn eta_rejects_points_outside_domain() {
        let g = Regularizer::boxed(vec![0.0], vec![1.0]).unwrap();
        let err = eta_at(&v(&[2.0]), &v(&[3.0]), 1.0, &v(&[0.5]), &g).unwrap_err();
        assert!(matches!(err, Error::OutsideDomain { .. }));
    }

    #[test]
    fn eta_at_minimizer_is_zero() {
        let g = Regularizer::L1 { weight: 1.0 };
        let c = eta_at(&v(&[2.0, 0.0]), &v(&[3.0, 0.5]), 1.0, &v(&[2.0, 0.0]), &g).unwrap();
        assert_eq!(c.value, 0.0);
    }

    #[test]
    fn convex_energy_at_start_collapses() {
        let inst = make_lasso(20, 40, 0.5, 7).unwrap();
        let (xs, fstar) = inst.reference().unwrap();
        let s = 1.0 / inst.lipschitz();
        let st = abf_init(&inst, s, &ScheduleConfig::default(), None).unwrap();
        let y1 = st.peek_next_y(&inst);
        let gap = st.objective - fstar;
        let inputs = CertificateInputs {
            x: &st.x,
            y: &st.y,
            y_next: &y1,
            x_star: &xs,
            gap: Certificate { value: gap, scale: 1.0 },
            eta: eta(&st, &xs, &inst.g).unwrap(),
            psi: psi(&st, &xs, inst.f.as_ref()),
            s,
        };
        let e = energy_convex(&inputs, 1.0);
        let expected = s * gap + 0.5 * (&st.x - &xs).norm_squared();
        assert!((e.value - expected).abs() <= ulps8(expected));
        assert!(e.forms_agree());
    }

    #[test]
    fn energies_vanish_at_fixed_point() {
        let xs = v(&[1.0, -2.0]);
        let zero = Certificate { value: 0.0, scale: 0.0 };
        let inputs = CertificateInputs {
            x: &xs,
            y: &xs,
            y_next: &xs,
            x_star: &xs,
            gap: zero,
            eta: zero,
            psi: zero,
            s: 0.5,
        };
        assert_eq!(energy_convex(&inputs, 7.3).value, 0.0);
        assert_eq!(energy_sc(&inputs, 0.3).value, 0.0);
    }

    #[test]
    fn r_forms_agree_on_random_vectors() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let zero = Certificate { value: 0.0, scale: 0.0 };
        for _ in 0..200 {
            let mut draw = || {
                DVector::from_fn(30, |_, _| {
                    <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
                })
            };
            let (x, y, y1, xs) = (draw(), draw(), draw(), draw());
            let inputs = CertificateInputs {
                x: &x,
                y: &y,
                y_next: &y1,
                x_star: &xs,
                gap: zero,
                eta: zero,
                psi: zero,
                s: 0.37,
            };
            for t in [1.0, 1.618, 17.0, 1234.5] {
                let e = energy_convex(&inputs, t);
                assert!(e.forms_agree(), "{e:?}");
            }
            for theta in [0.01, 0.5, 1.0] {
                let e = energy_sc(&inputs, theta);
                assert!(e.forms_agree(), "{e:?}");
                assert!(e.r_square >= 0.0);
            }
        }
    }

    #[test]
    fn bound_examples() {
        let y0 = v(&[3.0, 4.0]);
        let xs = v(&[0.0, 0.0]);
        assert_eq!(bound_thm_convex(1.0, 0.5, &y0, &xs), 25.0);
        assert_eq!(bound_thm_convex(5.0, 0.5, &xs, &xs), 0.0);
        assert_eq!(bound_thm_sc(0, 0.3, 2.0), 2.0);
        assert_eq!(bound_thm_sc(1, 1.0, 2.0), 0.0);
        assert_relative_eq!(bound_thm_sc(2, 0.5, 2.0), 0.5);
        assert_eq!(bound_fista(0, 3.0, 1.0, &y0, &xs), None);
        assert_eq!(bound_fista(1, 3.0, 1.0, &y0, &xs), Some(12.5));
        assert_eq!(bound_pg(2, 1.0, &y0, &xs), Some(6.25));
        let e0 = sc_initial_bound(1.0, 0.0, 0.5, 1.0, &y0, &xs);
        assert_eq!(e0, 1.0 + 0.25 * 25.0);
    }

    #[test]
    fn prox_descent_zero_at_minimizer() {
        let inst = lasso_from_parts(DMatrix::from_element(1, 1, 1.0), v(&[3.0]), 1.0).unwrap();
        let xs = inst.known_minimizer.clone().unwrap();
        let c = prox_descent_check(&xs, &xs, 1.0, &inst);
        assert!(c.value.abs() <= c.tolerance());
    }

    #[test]
    fn prox_descent_sampled() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for inst in [make_quadratic(6, 30.0, 2).unwrap(), make_lasso(8, 12, 0.3, 4).unwrap()] {
            let s = 1.0 / inst.lipschitz();
            for _ in 0..100 {
                let mut draw = || {
                    DVector::from_fn(inst.dimension(), |_, _| {
                        3.0 * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
                    })
                };
                let (y, x) = (draw(), draw());
                assert!(prox_descent_check(&y, &x, s, &inst).slack() >= 0.0);
            }
        }
    }

    #[test]
    fn residuals_vanish_at_fixed_point_triple() {
        let inst = make_lasso(6, 10, 0.4, 1).unwrap();
        let (xs, _) = inst.reference().unwrap();
        let s = 1.0 / inst.lipschitz();
        let mut st = abf_init(&inst, s, &ScheduleConfig::default(), None).unwrap();
        let grad = inst.f.gradient(&xs);
        st.x = xs.clone();
        st.y = &xs - &grad * s;
        st.z = Some(&xs - &grad * (2.0 * s));
        st.grad_x = grad;
        let r = fixed_point_residuals(&st).unwrap();
        let scale = xs.norm() + 2.0 * s * st.grad_x.norm();
        assert!(r.y <= ulps8(scale) && r.z <= ulps8(scale), "{r:?}");
    }

    #[test]
    fn geometric_fit_recovers_rate() {
        let pts: Vec<(usize, f64)> = (0..200).map(|k| (k, 5.0 * 0.9f64.powi(k as i32))).collect();
        let r = geometric_ratio(&pts, 1e-300).unwrap();
        assert_relative_eq!(r, 0.9, max_relative = 1e-10);
        assert_eq!(geometric_ratio(&pts[..2], 0.0), None);
        let pts: Vec<(usize, f64)> = (1..500).map(|k| (k, 3.0 / (k * k) as f64)).collect();
        assert_relative_eq!(loglog_slope(&pts, 10, 400).unwrap(), -2.0, max_relative = 1e-10);
    }
}
