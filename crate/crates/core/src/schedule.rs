//! Inertial parameter sequences.
//!
//! The convex regime uses the sequence `t_0 = 1`,
//! `t_{k+1} = (m + √(m² + 4 t_k²)) / 2` with `λ_{k+1} = (t_k − 1) / t_{k+1}`,
//! or the closed form `t_k = (k + α − 1)/(α − 1)` which gives
//! `λ_{k+1} = k / (k + α)`. The strongly convex regime uses the constant
//! `λ = (1 − θ)/(1 + θ)` with `θ = √(μ s)`. In both regimes the prox step
//! is `γ_{k+1} = (1 + λ_{k+1}) s`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `t_{k+1}` from `t_k`. Satisfies `t_{k+1}(t_{k+1} − m) = t_k²`.
pub fn next_t(t: f64, m: f64) -> f64 {
    (m + (m * m + 4.0 * t * t).sqrt()) / 2.0
}

/// `λ_{k+1} = (t_k − 1) / t_{k+1}`.
pub fn lambda_from_t(t: f64, t_next: f64) -> f64 {
    (t - 1.0) / t_next
}

/// `λ_{k+1} = k / (k + α)`; requires `α ≥ 3`.
pub fn lambda_nesterov(k: usize, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let k = k as f64;
    Ok(k / (k + alpha))
}

/// `γ_{k+1} = (1 + λ_{k+1}) s`.
pub fn gamma_next(lambda: f64, s: f64) -> f64 {
    (1.0 + lambda) * s
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha >= 3.0 {
        Ok(())
    } else {
        Err(Error::config("schedule.alpha", format!("must be >= 3, got {alpha}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// The `t_k` recursion with parameter `m`.
    #[default]
    #[serde(alias = "tk_recursion")]
    Tk,
    /// `λ_{k+1} = k/(k + α)`.
    #[serde(alias = "nesterov_alpha")]
    Nesterov,
}

/// User-facing schedule options (`schedule.variant`, `schedule.m`,
/// `schedule.alpha`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    pub variant: Variant,
    pub m: f64,
    pub alpha: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            variant: Variant::Tk,
            m: 1.0,
            alpha: 3.0,
        }
    }
}

/// Convex-regime schedule. Holds `t_k` and `k`, advanced one step at a time.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexSchedule {
    variant: Variant,
    m: f64,
    alpha: f64,
    t: f64,
    k: usize,
}

impl ConvexSchedule {
    pub fn new(config: &ScheduleConfig) -> Result<Self> {
        match config.variant {
            Variant::Tk => {
                if !(config.m > 0.0 && config.m <= 1.0) {
                    return Err(Error::config(
                        "schedule.m",
                        format!("must lie in (0, 1], got {}", config.m),
                    ));
                }
            }
            Variant::Nesterov => check_alpha(config.alpha)?,
        }
        Ok(ConvexSchedule {
            variant: config.variant,
            m: config.m,
            alpha: config.alpha,
            t: 1.0,
            k: 0,
        })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Moves from `k` to `k + 1` and returns `λ_{k+1}`.
    pub fn advance(&mut self) -> f64 {
        let lambda = match self.variant {
            Variant::Tk => {
                let t_next = next_t(self.t, self.m);
                let lambda = lambda_from_t(self.t, t_next);
                self.t = t_next;
                lambda
            }
            Variant::Nesterov => {
                let k = self.k as f64;
                self.t = (k + self.alpha) / (self.alpha - 1.0);
                k / (k + self.alpha)
            }
        };
        self.k += 1;
        lambda
    }
}

/// Strongly convex regime: `θ = √(μ s)`, `λ = (1 − θ)/(1 + θ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StronglyConvexSchedule {
    theta: f64,
    lambda: f64,
}

impl StronglyConvexSchedule {
    /// `θ = √(μ s)`. Fails if `μ ≤ 0` or `μ s > 1`.
    pub fn from_step(mu: f64, s: f64) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::config(
                "mu",
                format!("strongly convex schedule needs mu > 0, got {mu}"),
            ));
        }
        Self::with_theta((mu * s).sqrt())
    }

    /// `θ = √(μ / L)`, the constant used by the FISTA-SC momentum.
    pub fn from_condition(mu: f64, lipschitz: f64) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::config(
                "mu",
                format!("strongly convex schedule needs mu > 0, got {mu}"),
            ));
        }
        Self::with_theta((mu / lipschitz).sqrt())
    }

    pub fn with_theta(theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta <= 1.0) {
            return Err(Error::config("theta", format!("must lie in (0, 1], got {theta}")));
        }
        Ok(StronglyConvexSchedule {
            theta,
            lambda: (1.0 - theta) / (1.0 + theta),
        })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn first_values() {
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert_eq!(next_t(1.0, 1.0), phi);
        let t2 = next_t(phi, 1.0);
        // oracle: the positive root of u(u − 1) = φ², evaluated independently
        let root = 0.5 + (0.25 + phi * phi).sqrt();
        assert_relative_eq!(t2, root, max_relative = 1e-15);
        assert_relative_eq!(t2, 2.193_527_085_331_054, max_relative = 1e-12);
        assert_relative_eq!(t2 * (t2 - 1.0), phi * phi, max_relative = 1e-15);
    }

    #[test]
    fn lambda_values() {
        assert_eq!(lambda_from_t(1.0, next_t(1.0, 1.0)), 0.0);
        let phi = next_t(1.0, 1.0);
        let t2 = next_t(phi, 1.0);
        assert_relative_eq!(lambda_from_t(phi, t2), (phi - 1.0) / t2, max_relative = 1e-15);
        assert_relative_eq!(lambda_from_t(phi, t2), 0.281_753_525_125_320_8, max_relative = 1e-12);
    }

    #[test]
    fn nesterov_lambda() {
        assert_eq!(lambda_nesterov(0, 3.0).unwrap(), 0.0);
        assert_eq!(lambda_nesterov(0, 7.5).unwrap(), 0.0);
        assert_eq!(lambda_nesterov(3, 3.0).unwrap(), 0.5);
        assert!(lambda_nesterov(1_000_000, 3.0).unwrap() > 0.99999);
        assert!(matches!(lambda_nesterov(1, 2.5), Err(Error::Config { .. })));
    }

    #[test]
    fn gamma_values() {
        assert_eq!(gamma_next(0.0, 0.3), 0.3);
        assert_relative_eq!(gamma_next(1.0 / 3.0, 0.3), 0.4, max_relative = 1e-15);
        let g = gamma_next(1.0 - 1e-12, 0.3);
        assert!(g < 0.6 && (0.6 - g) < 1e-11);
    }

    #[test]
    fn nesterov_variant_matches_closed_form() {
        let cfg = ScheduleConfig {
            variant: Variant::Nesterov,
            alpha: 4.0,
            ..Default::default()
        };
        let mut sched = ConvexSchedule::new(&cfg).unwrap();
        assert_eq!(sched.t(), 1.0);
        for k in 0..50 {
            let t_k = sched.t();
            let lambda = sched.advance();
            assert_relative_eq!(lambda, lambda_nesterov(k, 4.0).unwrap(), max_relative = 1e-15);
            assert_relative_eq!(lambda, lambda_from_t(t_k, sched.t()), max_relative = 1e-14);
            // the inequality the energy argument needs
            assert!(t_k * t_k >= sched.t() * (sched.t() - 1.0) * (1.0 - 1e-15));
        }
    }

    #[test]
    fn rejects_bad_configs() {
        let bad_m = ScheduleConfig {
            m: 1.5,
            ..Default::default()
        };
        assert!(ConvexSchedule::new(&bad_m).is_err());
        let zero_m = ScheduleConfig {
            m: 0.0,
            ..Default::default()
        };
        assert!(ConvexSchedule::new(&zero_m).is_err());
        let bad_alpha = ScheduleConfig {
            variant: Variant::Nesterov,
            alpha: 2.0,
            ..Default::default()
        };
        assert!(ConvexSchedule::new(&bad_alpha).is_err());
        assert!(StronglyConvexSchedule::from_step(0.0, 1.0).is_err());
        assert!(StronglyConvexSchedule::from_step(2.0, 1.0).is_err());
    }

    #[test]
    fn strongly_convex_parameters() {
        let sc = StronglyConvexSchedule::from_step(0.25, 1.0).unwrap();
        assert_eq!(sc.theta(), 0.5);
        assert_relative_eq!(sc.lambda(), 1.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(gamma_next(sc.lambda(), 1.0), 4.0 / 3.0, max_relative = 1e-15);
        let unit = StronglyConvexSchedule::from_step(1.0, 1.0).unwrap();
        assert_eq!(unit.lambda(), 0.0);
    }

    #[test]
    fn config_json_keys() {
        let cfg: ScheduleConfig = serde_json::from_str(r#"{"variant":"nesterov","alpha":5}"#).unwrap();
        assert_eq!(cfg.variant, Variant::Nesterov);
        assert_eq!(cfg.alpha, 5.0);
        assert_eq!(cfg.m, 1.0);
        assert!(serde_json::from_str::<ScheduleConfig>(r#"{"beta":1}"#).is_err());
    }

    proptest! {
        #[test]
        fn recursion_properties(m in 0.05f64..=1.0, steps in 1usize..400) {
            let cfg = ScheduleConfig { m, ..Default::default() };
            let mut sched = ConvexSchedule::new(&cfg).unwrap();
            let mut prev_lambda = -1.0;
            for k in 0..steps {
                let t = sched.t();
                prop_assert!(t >= 1.0);
                prop_assert!(t >= 1.0 + k as f64 * m / 2.0);
                let lambda = sched.advance();
                let t1 = sched.t();
                prop_assert!((0.0..1.0).contains(&lambda));
                prop_assert!(lambda >= prev_lambda);
                prev_lambda = lambda;
                prop_assert!(t * t >= t1 * (t1 - 1.0));
                let g = gamma_next(lambda, 0.5);
                prop_assert!((0.5..1.0).contains(&g));
            }
        }

        #[test]
        fn theta_squared_is_mu_s(mu in 1e-4f64..1.0, s in 1e-3f64..1.0) {
            let sc = StronglyConvexSchedule::from_step(mu, s).unwrap();
            prop_assert!((sc.theta() * sc.theta() - mu * s).abs() <= 4.0 * f64::EPSILON * mu * s);
            prop_assert!((0.0..1.0).contains(&sc.lambda()));
        }
    }
}
