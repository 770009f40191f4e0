use nalgebra::DVector;

use abf_core::diagnostics::{geometric_ratio, loglog_slope, Reference};
use abf_core::problem::{make_lasso, make_quadratic, make_regularized_quadratic, ProblemInstance};
use abf_core::prox::{ProxOracle, Regularizer};
use abf_core::schedule::ScheduleConfig;
use abf_core::solvers::{abf_init, abf_step, run, Method, RunConfig};

fn tol(scale: f64) -> f64 {
    1e-12 + 1e-10 * scale.abs()
}

fn lasso7() -> ProblemInstance {
    make_lasso(20, 40, 0.5, 7).unwrap()
}

#[test]
fn fista_lasso_rate_is_at_least_inverse_square() {
    let inst = lasso7();
    let traj = run(&inst, &RunConfig::new(Method::Fista, 2000)).unwrap();
    let floor = 1e3 * f64::EPSILON * traj.records.iter().map(|r| r.gap_scale).fold(1.0, f64::max);
    let points: Vec<_> = traj.records.iter().map(|r| (r.k, r.f_gap.max(floor))).collect();
    let slope = loglog_slope(&points, 100, 2000).unwrap();
    assert!(slope <= -1.9, "slope {slope}");
}

#[test]
fn fista_sc_contracts_at_accelerated_rate() {
    let inst = make_quadratic(20, 100.0, 1).unwrap();
    let traj = run(&inst, &RunConfig::new(Method::FistaSc, 300)).unwrap();
    let floor = 1e3 * f64::EPSILON * traj.records.iter().map(|r| r.gap_scale).fold(1.0, f64::max);
    let points: Vec<_> = traj.records.iter().map(|r| (r.k, r.f_gap)).collect();
    let ratio = geometric_ratio(&points, floor).unwrap();
    let q = (inst.strong_convexity() / inst.lipschitz()).sqrt();
    assert!(ratio <= 1.0 - q + 0.05, "ratio {ratio}");
}

#[test]
fn abf_small_quadratic_under_bound_after_100_steps() {
    let inst = make_quadratic(2, 10.0, 4).unwrap();
    let reference = Reference::of(&inst).unwrap();
    let s = 1.0 / inst.lipschitz();
    let traj = run(&inst, &RunConfig::new(Method::Abf, 100)).unwrap();
    let mut t = 1.0_f64;
    for _ in 0..100 {
        t = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
    }
    let bound = reference.minimizer.norm_squared() / (2.0 * s * t * t);
    let gap = traj.final_state.objective - reference.minimum;
    assert!(gap <= bound + tol(bound), "{gap} > {bound}");
}

#[test]
fn lasso_gap_below_bound_at_500() {
    let inst = lasso7();
    let traj = run(&inst, &RunConfig::new(Method::Abf, 500)).unwrap();
    let r = &traj.records[500];
    let bound = r.bound.unwrap();
    assert!(r.f_gap <= bound + tol(bound));
    assert!(bound / r.f_gap.max(f64::MIN_POSITIVE) > 1.0);
}

#[test]
fn abf_sc_quadratic_bound_200_steps() {
    let inst = make_quadratic(20, 100.0, 1).unwrap();
    let traj = run(&inst, &RunConfig::new(Method::AbfSc, 200)).unwrap();
    for r in &traj.records {
        let b = r.bound.unwrap();
        assert!(r.f_gap <= b + tol(b), "k={}", r.k);
    }
}

#[test]
fn eta_at_step_ten_matches_raw_recomputation() {
    let inst = lasso7();
    let reference = Reference::of(&inst).unwrap();
    let traj = run(&inst, &RunConfig::new(Method::Abf, 10)).unwrap();
    let recorded = traj.records[10].eta.unwrap().value;

    let s = 1.0 / inst.lipschitz();
    let mut state = abf_init(&inst, s, &ScheduleConfig::default(), None).unwrap();
    for _ in 0..10 {
        state = abf_step(&state, &inst).unwrap();
    }
    let z = state.z.as_ref().unwrap();
    let sub: Vec<f64> = z
        .iter()
        .zip(state.x.iter())
        .map(|(zi, xi)| (zi - xi) / state.gamma)
        .collect();
    let inner: f64 = sub
        .iter()
        .zip(state.x.iter().zip(reference.minimizer.iter()))
        .map(|(u, (x, xs))| u * (x - xs))
        .sum();
    let l1 = |v: &DVector<f64>| 0.5 * v.iter().map(|c| c.abs()).sum::<f64>();
    let expected = inner - (l1(&state.x) - l1(&reference.minimizer));
    assert!(recorded >= -tol(expected.abs()));
    assert!(
        (recorded - expected).abs() <= tol(inner.abs().max(l1(&state.x))),
        "{recorded} vs {expected}"
    );
}

#[test]
fn psi_dominates_strong_convexity_term() {
    let inst = make_regularized_quadratic(20, 100.0, Regularizer::L1 { weight: 0.5 }, 1).unwrap();
    let reference = Reference::of(&inst).unwrap();
    let mu = inst.strong_convexity();
    let s = 1.0 / inst.lipschitz();
    let mut state = abf_core::solvers::abf_sc_init(&inst, s, None).unwrap();
    for _ in 0..300 {
        let psi = abf_core::diagnostics::psi(&state, &reference.minimizer, inst.f.as_ref());
        let floor = mu / 2.0 * (&state.x - &reference.minimizer).norm_squared();
        assert!(psi.value >= floor - tol(psi.scale.max(floor)), "k={}", state.k);
        state = abf_core::solvers::abf_sc_step(&state, &inst).unwrap();
    }
}

#[test]
fn sc_initial_energy_below_stated_bound() {
    for inst in [
        make_quadratic(20, 100.0, 1).unwrap(),
        make_regularized_quadratic(20, 100.0, Regularizer::L1 { weight: 0.5 }, 1).unwrap(),
    ] {
        let traj = run(&inst, &RunConfig::new(Method::AbfSc, 1)).unwrap();
        let r = &traj.records[0];
        let e0 = r.energy.unwrap().value;
        let bound = r.bound.unwrap();
        assert!(e0 <= bound + tol(bound), "{e0} > {bound}");
        assert!(bound >= r.f_gap);
    }
}

#[test]
fn unit_condition_sc_bound_is_zero_after_first_step() {
    let inst = make_quadratic(5, 1.0, 3).unwrap();
    let traj = run(&inst, &RunConfig::new(Method::AbfSc, 5)).unwrap();
    assert_eq!(traj.records[0].theta, Some(1.0));
    for r in &traj.records[1..] {
        assert_eq!(r.bound, Some(0.0));
        assert!(r.f_gap <= tol(r.gap_scale), "k={} gap={}", r.k, r.f_gap);
    }
}

#[test]
fn start_at_minimizer_stays_and_sums_vanish() {
    for inst in [make_quadratic(6, 10.0, 2).unwrap(), make_lasso(6, 12, 0.5, 2).unwrap()] {
        let reference = Reference::of(&inst).unwrap();
        let mut config = RunConfig::new(Method::Abf, 50);
        config.start = Some(reference.minimizer.as_slice().to_vec());
        let traj = run(&inst, &config).unwrap();
        let first = &traj.records[0];
        assert!(first.bound.unwrap() == 0.0);
        for r in &traj.records {
            assert!(r.dist_to_min <= 1e-9, "k={} dist={}", r.k, r.dist_to_min);
            assert!(r.sum_t_psi.unwrap().abs() <= 1e-12);
            assert!(r.sum_t_eta.unwrap().abs() <= 1e-12);
        }
    }
}

#[test]
fn sc_gradient_drift_decays_geometrically() {
    let inst = make_regularized_quadratic(20, 100.0, Regularizer::L1 { weight: 0.5 }, 1).unwrap();
    let traj = run(&inst, &RunConfig::new(Method::AbfSc, 300)).unwrap();
    let peak = traj.records.iter().map(|r| r.grad_drift).fold(0.0, f64::max);
    let points: Vec<_> = traj.records.iter().map(|r| (r.k, r.grad_drift)).collect();
    let ratio = geometric_ratio(&points, 1e-8 * peak).unwrap();
    let theta = traj.records[0].theta.unwrap();
    assert!(ratio <= (1.0 - theta).sqrt() + 0.1, "ratio {ratio}");
}

#[test]
fn lasso_energy_monotone_and_forms_agree() {
    let inst = lasso7();
    let traj = run(&inst, &RunConfig::new(Method::Abf, 2000)).unwrap();
    for w in traj.records.windows(2) {
        let (a, b) = (w[0].energy.unwrap(), w[1].energy.unwrap());
        assert!(b.value <= a.value + tol(a.scale.max(b.scale)), "k={}", w[1].k);
        assert!(a.forms_agree(), "k={}", w[0].k);
    }
}

#[test]
fn prox_of_final_iterate_is_consistent() {
    let inst = lasso7();
    let traj = run(&inst, &RunConfig::new(Method::Abf, 50)).unwrap();
    let st = &traj.final_state;
    let again = inst.g.prox(st.gamma, st.z.as_ref().unwrap());
    assert_eq!(again, st.x);
}
