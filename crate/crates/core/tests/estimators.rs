use actinfo::inference::{
    joint_mle, lower_bound_actinfo, mle_tilt, nonparam_actinfo, p0_max, param_actinfo, param_variance_nuisance,
    param_variance_nuisance_with_steps, theta_star, two_sample_actinfo, ParametricFamily, QEstimator,
};
use actinfo::info::actinfo;
use actinfo::models::{build_machine, MachineModel, MachineSystem};
use actinfo::sampling::{sample_iid, RandomSource};
use proptest::prelude::*;

fn machine(d: usize, a: f64, b: f64, theta: f64) -> MachineSystem {
    build_machine(&MachineModel::new(d, a, b, theta).unwrap()).unwrap()
}

#[test]
fn tilting_mle_recovers_theta() {
    let sys = machine(5, 0.2, 1.0, 1.5);
    let s = sample_iid(&sys.equilibrium(), 100_000, &mut RandomSource::new(31));
    let t = mle_tilt(&s, &sys.family).unwrap();
    assert!((t - 1.5).abs() <= 0.05, "theta_hat = {t}");
}

#[test]
fn estimators_are_consistent() {
    // Q outside the tilted family, so the two targets differ
    let sys = machine(5, 0.2, 1.0, 0.0);
    let mut w: Vec<f64> = sys.equilibrium().mass().to_vec();
    w[3] *= 4.0;
    w[30] *= 3.0;
    let total: f64 = w.iter().sum();
    let q = actinfo::Distribution::new(sys.space.clone(), w.iter().map(|v| v / total).collect()).unwrap();
    let np_truth = actinfo(&q, &sys.null, &sys.target).unwrap();
    let ts = theta_star(&q, &sys.family).unwrap();
    let par_truth = sys.family.actinfo_equilibrium(&sys.target, ts).unwrap();

    let mut prev = (f64::INFINITY, f64::INFINITY);
    for (k, n) in [1_000usize, 10_000, 100_000].into_iter().enumerate() {
        // average absolute error over replicates, so the trend is not seed luck
        let (mut e_np, mut e_par) = (0.0, 0.0);
        for r in 0..20u64 {
            let s = sample_iid(&q, n, &mut RandomSource::substream(100 + k as u64, r));
            e_np += (nonparam_actinfo(&s, &sys.target, sys.null.mass()[31]).unwrap().estimate - np_truth).abs();
            e_par += (param_actinfo(&s, &sys.family, &sys.target).unwrap().estimate - par_truth).abs();
        }
        assert!(e_np < prev.0 && e_par < prev.1, "n = {n}: {e_np} {e_par} after {prev:?}");
        prev = (e_np, e_par);
    }
}

#[test]
fn score_vanishes_at_interior_mle() {
    let sys = machine(5, -0.2, 0.5, 0.0);
    for seed in 0..20 {
        let s = sample_iid(&sys.family.tilt(0.8), 300, &mut RandomSource::new(seed));
        let t = mle_tilt(&s, &sys.family).unwrap();
        assert!(t >= 0.0);
        if t > 0.0 && t.is_finite() {
            let mean = s.draws().iter().map(|&x| sys.spec.values()[x]).sum::<f64>() / s.len() as f64;
            assert!((mean - sys.family.tilted_moments(t).0).abs() <= 1e-10);
        }
    }
}

#[test]
fn joint_mle_recovers_machine_parameters() {
    let sys = machine(5, 0.0, 0.5, 1.5);
    let fam = sys.parametric_family();
    let s = sample_iid(&fam.distribution(&[1.5, 0.5]).unwrap(), 100_000, &mut RandomSource::new(5));
    let est = joint_mle(&s, &fam).unwrap();
    assert!((est[0] - 1.5).abs() <= 0.1 && (est[1] - 0.5).abs() <= 0.1, "{est:?}");

    let v = param_variance_nuisance(&s, &fam, &sys.target, &est).unwrap();
    assert!(v.is_finite() && v > 0.0);
    let halved = param_variance_nuisance_with_steps(&s, &fam, &sys.target, &est, 0.5e-5, 0.5e-4).unwrap();
    assert!(((v - halved) / v).abs() <= 1e-3, "{v} vs {halved}");
}

#[test]
fn null_maximum_over_rate_ratio() {
    let sys = machine(5, 0.2, 1.0, 0.0);
    let grid: Vec<f64> = (1..=20).map(|k| k as f64 * 0.05).collect();
    let fam0 = sys.null_family();
    let probs: Vec<f64> = grid.iter().map(|&b| fam0.distribution(&[b]).unwrap().mass()[31]).collect();
    assert!(probs.windows(2).all(|w| w[0] < w[1]));
    let (value, argmax) = p0_max(&fam0, &sys.target, &grid).unwrap();
    assert!((argmax - 1.0).abs() < 1e-9);
    assert!((value - 1.0 / 32.0).abs() < 1e-12);
    let (single, at) = p0_max(&fam0, &sys.target, &[0.5]).unwrap();
    assert_eq!(at, 0.5);
    assert!((single - sys_null_at(0.5)).abs() < 1e-15);
}

fn sys_null_at(b: f64) -> f64 {
    machine(5, 0.2, b, 0.0).null.mass()[31]
}

#[test]
fn two_sample_machine_estimate() {
    let sys = machine(5, 0.0, 0.5, 2.5);
    let q = sys.equilibrium();
    let truth = actinfo(&q, &sys.null, &sys.target).unwrap();
    let mut rng = RandomSource::new(77);
    let x = sample_iid(&q, 10_000, &mut rng);
    let x0 = sample_iid(&sys.null, 10_000, &mut rng);
    let fam = sys.parametric_family();
    let np = two_sample_actinfo(&x, &x0, &sys.null_family(), &sys.target, QEstimator::Nonparametric).unwrap();
    assert!(np.covers(truth), "{np:?} vs {truth}");
    let par = two_sample_actinfo(&x, &x0, &sys.null_family(), &sys.target, QEstimator::Parametric(&fam)).unwrap();
    assert!(par.covers(truth), "{par:?} vs {truth}");
    assert_eq!(par.n0, Some(10_000));
    assert!(par.variance >= 0.0 && np.xi_hat.is_some());
}

#[test]
fn cosmology_single_observation() {
    let s = actinfo::StateSpace::new(vec!["outside".into(), "inside".into()]).unwrap();
    let a = actinfo::TargetSet::new(s.clone(), vec![1]).unwrap();
    let one = actinfo::sampling::SampleSet::new(s, vec![1], "universe", None).unwrap();
    let p0max = 2.0 * 0.01 * (-1f64).exp();
    let r = lower_bound_actinfo(&one, &a, p0max, QEstimator::Nonparametric, None).unwrap();
    assert!((r.estimate + p0max.ln()).abs() < 1e-14);
    assert!((r.estimate - (1.0 - 0.01f64.ln() - 2f64.ln())).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn lower_bound_never_exceeds_known_null(seed in 0u64..10_000, inflate in 1.0f64..5.0, n in 1usize..400) {
        let sys = machine(4, 0.25, 0.7, 0.0);
        let q = sys.family.tilt(2.0);
        let s = sample_iid(&q, n, &mut RandomSource::new(seed));
        let p0a = sys.null.mass()[15];
        let known = nonparam_actinfo(&s, &sys.target, p0a).unwrap();
        let bound = lower_bound_actinfo(&s, &sys.target, (p0a * inflate).min(1.0), QEstimator::Nonparametric, Some(p0a)).unwrap();
        prop_assert!(bound.estimate <= known.estimate);
        prop_assert!(bound.bias.unwrap() <= 0.0);
    }
}
