//! Pass/fail evaluation of every certificate over a trajectory, plus the
//! instance-level checks that do not depend on a run.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::diagnostics::{geometric_ratio, prox_descent_check, tolerance, ulps8, TrajectoryRecord, ATOL};
use crate::error::Result;
use crate::problem::{check_gradient, reference_solve, ProblemInstance, ReferenceOptions};
use crate::prox::ProxOracle;
use crate::solvers::{run, Method, RunConfig};
use crate::trajectory::Trajectory;

/// Absolute allowance on the partial-sum checks.
pub const SUM_ALLOWANCE: f64 = 1e-8;
/// Allowed excess of a fitted contraction ratio over its theoretical rate.
pub const GAP_RATE_ALLOWANCE: f64 = 0.05;
pub const DRIFT_RATE_ALLOWANCE: f64 = 0.1;
const DRIFT_FIT_DECADES: f64 = 1e-8;
/// Relative accuracy demanded of gradients against central differences.
pub const GRADIENT_CHECK_TOL: f64 = 1e-6;
/// Gradient spread allowed between two minimizers.
pub const SOLUTION_GRADIENT_TOL: f64 = 1e-6;

const MAX_LISTED: usize = 20;

/// Result of one named check. `worst_slack` is the smallest margin seen;
/// a negative value means the check failed there.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub worst_slack: f64,
    pub evaluated: usize,
    /// Iteration (or sample) indices of the first failures.
    pub violations: Vec<usize>,
}

#[derive(Debug)]
struct Check {
    name: &'static str,
    worst: f64,
    evaluated: usize,
    failures: usize,
    listed: Vec<usize>,
}

impl Check {
    fn new(name: &'static str) -> Self {
        Check {
            name,
            worst: f64::INFINITY,
            evaluated: 0,
            failures: 0,
            listed: Vec::new(),
        }
    }

    fn observe(&mut self, index: usize, slack: f64) {
        self.evaluated += 1;
        if slack.is_nan() {
            self.worst = f64::NAN;
        } else if !self.worst.is_nan() {
            self.worst = self.worst.min(slack);
        }
        if slack.is_nan() || slack < 0.0 {
            self.failures += 1;
            if self.listed.len() < MAX_LISTED {
                self.listed.push(index);
            }
        }
    }

    fn finish(self) -> CheckOutcome {
        CheckOutcome {
            name: self.name,
            passed: self.failures == 0,
            worst_slack: self.worst,
            evaluated: self.evaluated,
            violations: self.listed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub checks: Vec<CheckOutcome>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn violations(&self) -> Vec<&'static str> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name).collect()
    }

    pub fn get(&self, name: &str) -> Option<&CheckOutcome> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Optional absolute ceilings for the late-stage trend checks.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct TrendOptions {
    pub increment_ceiling: Option<f64>,
    pub drift_ceiling: Option<f64>,
}

fn energy_of(r: &TrajectoryRecord) -> Option<(f64, f64)> {
    r.energy.map(|e| (e.value, e.scale))
}

/// Pointwise certificates: nonnegativity, energy behaviour and rate bounds.
pub fn invariant_checks(traj: &Trajectory) -> Vec<CheckOutcome> {
    let recs = &traj.records;
    let s = traj.step;
    let mut eta = Check::new("eta_nonnegative");
    let mut psi = Check::new("psi_nonnegative");
    let mut psi_floor = Check::new("psi_gradient_floor");
    let mut psi_strong = Check::new("psi_strong_convexity_floor");
    let mut r_nonneg = Check::new("r_nonnegative");
    let mut r_forms = Check::new("r_forms_agree");
    let mut bound = Check::new("rate_bound");
    let mut initial = Check::new(match traj.method {
        Method::AbfSc => "initial_energy_bound",
        _ => "initial_energy_identity",
    });
    let mut energy = Check::new(match traj.method {
        Method::AbfSc => "energy_contraction",
        _ => "energy_monotone",
    });

    for (i, r) in recs.iter().enumerate() {
        if let Some(e) = r.eta {
            eta.observe(r.k, e.slack());
        }
        psi.observe(r.k, r.psi.slack());
        psi_floor.observe(r.k, r.psi.value - r.psi_floor + tolerance(r.psi.scale.max(r.psi_floor)));
        if let Some(floor) = r.psi_strong_floor {
            psi_strong.observe(r.k, r.psi.value - floor + tolerance(r.psi.scale.max(floor)));
        }
        if let Some(e) = r.energy {
            r_nonneg.observe(r.k, e.r_sum.min(e.r_square) + tolerance(e.r_scale));
            r_forms.observe(r.k, ulps8(e.r_scale) - (e.r_sum - e.r_square).abs());
        }
        if let Some(b) = r.bound {
            bound.observe(r.k, b + tolerance(b) - r.f_gap);
        }
        if r.k == 0 {
            if let Some((e0, scale)) = energy_of(r) {
                match traj.method {
                    Method::Abf => {
                        let identity = s * r.f_gap + 0.5 * r.dist_to_min * r.dist_to_min;
                        initial.observe(0, ulps8(scale.max(identity.abs())) - (e0 - identity).abs());
                    }
                    Method::AbfSc => {
                        if let Some(b) = r.bound {
                            initial.observe(0, b + tolerance(scale.max(b)) - e0);
                        }
                    }
                    _ => {}
                }
            }
        }
        if i > 0 {
            let prev = &recs[i - 1];
            if let (Some((e_prev, sc_prev)), Some((e_cur, sc_cur))) = (energy_of(prev), energy_of(r)) {
                let tol = tolerance(sc_prev.max(sc_cur));
                let allowed = match r.theta {
                    Some(theta) => (1.0 - theta).powi((r.k - prev.k) as i32) * e_prev,
                    None => e_prev,
                };
                energy.observe(r.k, allowed + tol - e_cur);
            }
        }
    }

    [
        eta, psi, psi_floor, psi_strong, r_nonneg, r_forms, bound, initial, energy,
    ]
    .into_iter()
    .filter(|c| c.evaluated > 0)
    .map(Check::finish)
    .collect()
}

fn decile_max(recs: &[TrajectoryRecord], field: impl Fn(&TrajectoryRecord) -> f64) -> Option<(f64, f64)> {
    let n = recs.len();
    if n < 10 {
        return None;
    }
    let w = n / 10;
    let head = recs[..w].iter().map(&field).fold(0.0, f64::max);
    let tail = recs[n - w..].iter().map(&field).fold(0.0, f64::max);
    Some((head, tail))
}

/// Trajectory-level checks: partial sums bounded by `E_0`, weighted
/// certificate ceilings, late-stage decay and fitted contraction rates.
pub fn trend_checks(traj: &Trajectory, options: &TrendOptions) -> Vec<CheckOutcome> {
    let recs = &traj.records;
    let s = traj.step;
    let lip = traj.lipschitz;
    let e0 = recs
        .first()
        .filter(|r| r.k == 0)
        .and_then(|r| r.energy)
        .map(|e| e.value);
    let mut out = Vec::new();

    if let (Method::Abf, Some(e0)) = (traj.method, e0) {
        let mut sum_psi = Check::new("sum_t_psi_bounded");
        let mut sum_eta = Check::new("sum_t_eta_bounded");
        let mut weighted = Check::new("weighted_psi_ceiling");
        let mut increment = Check::new("increment_ceiling");
        let mut drift = Check::new("drift_ceiling");
        for r in recs {
            let t = r.t.unwrap_or(1.0);
            if let Some(v) = r.sum_t_psi {
                sum_psi.observe(r.k, e0 + SUM_ALLOWANCE - v);
            }
            if let Some(v) = r.sum_t_eta {
                sum_eta.observe(r.k, e0 + SUM_ALLOWANCE - v);
            }
            let wpsi = (t - 1.0) * r.psi.value;
            weighted.observe(r.k, e0 / s + tolerance((e0 / s).max((t - 1.0) * r.psi.scale)) - wpsi);
            let inc = (t - 1.0) / 2.0 * r.y_increment * r.y_increment;
            increment.observe(r.k, e0 + tolerance(e0.max(inc)) - inc);
            if t > 1.0 {
                let ceiling = 2.0 * lip * e0 / (s * (t - 1.0));
                let d2 = r.grad_drift * r.grad_drift;
                drift.observe(r.k, ceiling + tolerance(ceiling.max(d2)) - d2);
            }
        }
        out.extend([sum_psi, sum_eta, weighted, increment, drift]);
    }

    if traj.method.is_abf_family() {
        let mut inc_decay = Check::new("increment_decay");
        if let Some((head, tail)) = decile_max(recs, |r| r.y_increment) {
            let ceiling = options.increment_ceiling.unwrap_or(f64::INFINITY);
            inc_decay.observe(recs.len(), head.min(ceiling) + ATOL - tail);
        }
        let mut drift_decay = Check::new("drift_decay");
        if let Some((head, tail)) = decile_max(recs, |r| r.grad_drift) {
            let ceiling = options.drift_ceiling.unwrap_or(f64::INFINITY);
            drift_decay.observe(recs.len(), head.min(ceiling) + ATOL - tail);
        }
        out.extend([inc_decay, drift_decay]);
    }

    let rate = match traj.method {
        Method::AbfSc => recs.first().and_then(|r| r.theta),
        Method::FistaSc if traj.strong_convexity > 0.0 => Some((traj.strong_convexity / lip).sqrt()),
        _ => None,
    };
    if let Some(theta) = rate {
        let eps = f64::EPSILON;
        let gap_scale = recs.iter().map(|r| r.gap_scale).fold(1.0, f64::max);
        let gaps: Vec<(usize, f64)> = recs.iter().map(|r| (r.k, r.f_gap)).collect();
        let mut gap_rate = Check::new("gap_contraction_rate");
        if let Some(ratio) = geometric_ratio(&gaps, 1e3 * eps * gap_scale) {
            gap_rate.observe(recs.len(), (1.0 - theta) + GAP_RATE_ALLOWANCE - ratio);
        }
        out.push(gap_rate);
        if traj.method == Method::AbfSc {
            // the drift is measured against a reference minimizer accurate to
            // about 1e-10, so the fit stops eight decades below the peak
            let peak = recs.iter().map(|r| r.grad_drift).fold(0.0, f64::max);
            let drifts: Vec<(usize, f64)> = recs.iter().map(|r| (r.k, r.grad_drift)).collect();
            let mut drift_rate = Check::new("drift_contraction_rate");
            if let Some(ratio) = geometric_ratio(&drifts, DRIFT_FIT_DECADES * peak) {
                drift_rate.observe(recs.len(), (1.0 - theta).sqrt() + DRIFT_RATE_ALLOWANCE - ratio);
            }
            out.push(drift_rate);
        }
    }

    out.into_iter().filter(|c| c.evaluated > 0).map(Check::finish).collect()
}

/// Invariant and trend checks together. A diverged run adds a failing
/// `finite_iterates` check.
pub fn verify_trajectory(traj: &Trajectory, options: &TrendOptions) -> VerificationReport {
    let mut checks = invariant_checks(traj);
    checks.extend(trend_checks(traj, options));
    if traj.divergence.is_some() {
        let mut c = Check::new("finite_iterates");
        c.observe(traj.final_state.k, f64::NEG_INFINITY);
        checks.push(c.finish());
    }
    VerificationReport { checks }
}

fn sample(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| {
        scale * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut *rng)
    })
}

/// Prox-descent at `samples` random pairs, gradient against central
/// differences, and gradient agreement of two minimizers reached from
/// different starts.
pub fn instance_checks(instance: &ProblemInstance, s: f64, samples: usize, seed: u64) -> Result<Vec<CheckOutcome>> {
    let n = instance.dimension();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (x_star, _) = instance.reference()?;
    let spread = 1.0 + x_star.norm() / (n as f64).sqrt();

    let mut descent = Check::new("prox_descent");
    for i in 0..samples {
        let y = &x_star + sample(&mut rng, n, spread);
        let mut x = &x_star + sample(&mut rng, n, spread);
        if !instance.g.value(&x).is_finite() {
            x = instance.g.prox(s, &x);
        }
        descent.observe(i, prox_descent_check(&y, &x, s, instance).slack());
    }

    let mut gradient = Check::new("gradient_oracle");
    for i in 0..samples.min(10) {
        let p = &x_star + sample(&mut rng, n, spread);
        gradient.observe(i, GRADIENT_CHECK_TOL - check_gradient(instance.f.as_ref(), &p, 1e-5));
    }

    let first = reference_solve(instance, &ReferenceOptions::default())?;
    let second = reference_solve(
        instance,
        &ReferenceOptions {
            start: Some(sample(&mut rng, n, 10.0 * spread)),
            ..Default::default()
        },
    )?;
    let spread_grad = (instance.f.gradient(&first.minimizer) - instance.f.gradient(&second.minimizer)).norm();
    let mut constant = Check::new("gradient_constant_on_solutions");
    constant.observe(0, SOLUTION_GRADIENT_TOL - spread_grad);

    Ok(vec![descent.finish(), gradient.finish(), constant.finish()])
}

/// Runs `config` and evaluates every applicable check.
pub fn verify_run(
    instance: &ProblemInstance,
    config: &RunConfig,
    seed: u64,
) -> Result<(Trajectory, VerificationReport)> {
    let traj = run(instance, config)?;
    let mut report = verify_trajectory(&traj, &TrendOptions::default());
    report.checks.extend(instance_checks(instance, traj.step, 100, seed)?);
    Ok((traj, report))
}
