mod common;

use rcmdp_core::driver::{self, Adversary, Oracle, SampleSizes, TrainingConfig, WarmStart};
use rcmdp_core::error::Error;
use rcmdp_core::instances::{random_rcmdp, slater_instance};
use rcmdp_core::model::{self, SoftmaxPolicy};
use rcmdp_core::policy_md::{DualMode, InnerIterations, MdConfig};
use rcmdp_core::tma::{self, CpiConfig, GEstimator, Schedule, TmaConfig};
use rcmdp_core::uncertainty::{self, NonRectSet, Norm, RectSet, UncertaintySet};

fn tma_adversary(t_prime: usize) -> Adversary {
    Adversary::Tma(TmaConfig::new(0.1, 1.0, Schedule::Geometric, t_prime, GEstimator::Exact).unwrap())
}

fn config(md: MdConfig, adversary: Adversary, iterations: usize) -> TrainingConfig {
    TrainingConfig {
        iterations,
        md,
        adversary,
        dual_mode: DualMode::Augmented { bound: None },
        eta_lambda: 1.0,
        oracle: Oracle::Exact,
        warm_start: WarmStart::Previous,
        seed: 7,
    }
}

#[test]
fn zero_radius_without_constraints_reaches_the_optimum() {
    for seed in 0..3 {
        let inst = random_rcmdp(4, 3, 0, 0.9, seed).unwrap();
        let spec = &inst.spec;
        let set = UncertaintySet::Rect(RectSet::uniform(inst.nominal.clone(), Norm::Linf, 0.0).unwrap());
        let md = MdConfig::new(0.1, 1.0, InnerIterations::Fixed(20), spec.gamma()).unwrap();
        let out = driver::run_training(spec, &set, &config(md, tma_adversary(3), 300)).unwrap();

        let best = common::rho_dot(spec, &common::optimal_values(&inst.nominal, spec.cost0(), spec.gamma()));
        let last = out.log.rows.last().unwrap();
        assert!((last.value - best).abs() <= 1e-4, "seed {seed}: {} vs {best}", last.value);
        assert_eq!(last.kernel_linf_dev, 0.0);
        assert!(out.dual.lambda().is_empty());
    }
}

#[test]
fn frozen_zero_multipliers_leave_a_pure_value_adversary() {
    let inst = random_rcmdp(4, 2, 1, 0.8, 3).unwrap();
    let spec = &inst.spec;
    let set = UncertaintySet::Rect(RectSet::uniform(inst.nominal.clone(), Norm::Linf, 0.05).unwrap());
    let md = MdConfig::new(0.5, 0.2, InnerIterations::Fixed(5), spec.gamma()).unwrap();
    let mut cfg = config(md, tma_adversary(20), 15);
    cfg.dual_mode = DualMode::Frozen;
    cfg.warm_start = WarmStart::Nominal;
    let out = driver::run_training(spec, &set, &cfg).unwrap();

    assert!(out.log.rows.iter().all(|r| r.lambda == [0.0]));
    let Adversary::Tma(tma_cfg) = cfg.adversary else { unreachable!() };
    let direct = tma::approximate_tma(&out.policy, spec.cost0(), &set, &tma_cfg, spec, &inst.nominal).unwrap();
    let gap = direct.kernel.linf_distance(&out.kernel);
    assert!(gap <= 1e-12, "kernel gap {gap}");
    let last = out.log.rows.last().unwrap();
    assert!((last.lagrangian - last.value).abs() <= 1e-12);
}

fn sampled_config(spec: &rcmdp_core::model::RcmdpSpec, sizes: SampleSizes, k: usize, t: usize, t_prime: usize) -> TrainingConfig {
    let md = MdConfig::new(0.5, 0.2, InnerIterations::Fixed(t), spec.gamma()).unwrap();
    let mut cfg = config(md, tma_adversary(t_prime), k);
    cfg.oracle = Oracle::Sampled(sizes);
    cfg
}

const SIZES: SampleSizes = SampleSizes {
    m_v: 30,
    n_v: 12,
    m_q: 4,
    n_q: 10,
    m_g: 3,
    n_g: 8,
};

#[test]
fn sampled_runs_are_reproducible() {
    let inst = random_rcmdp(3, 2, 1, 0.8, 5).unwrap();
    let set = UncertaintySet::Rect(RectSet::uniform(inst.nominal.clone(), Norm::L1, 0.1).unwrap());
    let cfg = sampled_config(&inst.spec, SIZES, 4, 3, 2);
    let a = driver::run_training(&inst.spec, &set, &cfg).unwrap();
    let b = driver::run_training(&inst.spec, &set, &cfg).unwrap();
    assert_eq!(a, b);

    let mut other = cfg;
    other.seed += 1;
    let c = driver::run_training(&inst.spec, &set, &other).unwrap();
    assert_ne!(a.log.rows, c.log.rows);
}

#[test]
fn budget_matches_closed_form() {
    let inst = random_rcmdp(3, 2, 2, 0.8, 9).unwrap();
    let (s, a) = (3u64, 2u64);
    let (k, t, t_prime) = (5usize, 3usize, 2usize);
    let set = UncertaintySet::Rect(RectSet::uniform(inst.nominal.clone(), Norm::Linf, 0.05).unwrap());
    let out = driver::run_training(&inst.spec, &set, &sampled_config(&inst.spec, SIZES, k, t, t_prime)).unwrap();

    let sz = |x: usize| x as u64;
    let v = (k as u64 + 1) * sz(SIZES.m_v * SIZES.n_v);
    let q = (k * t) as u64 * s * a * sz(SIZES.m_q * SIZES.n_q);
    let g = (k * t_prime) as u64 * s * s * a * sz(SIZES.m_g * SIZES.n_g);
    assert_eq!(out.ledger.v_queries, v);
    assert_eq!(out.ledger.q_queries, q);
    assert_eq!(out.ledger.g_queries, g);
    assert_eq!(out.log.rows.last().unwrap().budget_t, v + q + g);
    assert!(out.log.rows.windows(2).all(|w| w[0].budget_t <= w[1].budget_t));
    assert_eq!(out.log.rows.len(), k);
}

#[test]
fn exact_mode_spends_no_samples() {
    let inst = random_rcmdp(3, 2, 1, 0.8, 2).unwrap();
    let set = UncertaintySet::Rect(RectSet::uniform(inst.nominal.clone(), Norm::L2, 0.1).unwrap());
    let md = MdConfig::new(0.5, 0.2, InnerIterations::Fixed(2), inst.spec.gamma()).unwrap();
    let out = driver::run_training(&inst.spec, &set, &config(md, tma_adversary(2), 3)).unwrap();
    assert!(out.log.rows.iter().all(|r| r.budget_t == 0));
}

#[test]
fn every_logged_kernel_lies_in_the_set() {
    let inst = random_rcmdp(3, 2, 1, 0.8, 4).unwrap();
    for set in [
        UncertaintySet::Rect(RectSet::uniform(inst.nominal.clone(), Norm::L1, 0.1).unwrap()),
        UncertaintySet::NonRect(NonRectSet::new(inst.nominal.clone(), 0.1).unwrap()),
    ] {
        let md = MdConfig::new(0.5, 0.2, InnerIterations::Fixed(3), inst.spec.gamma()).unwrap();
        let adversary = match set {
            UncertaintySet::Rect(_) => tma_adversary(5),
            UncertaintySet::NonRect(_) => Adversary::Cpi(CpiConfig::new(1e-3, 200).unwrap()),
        };
        let out = driver::run_training(&inst.spec, &set, &config(md, adversary, 6)).unwrap();
        assert!(uncertainty::contains(&out.kernel, &set).inside);
        for row in &out.log.rows {
            assert!(row.lambda.iter().all(|&l| l >= 0.0));
            assert!(row.pkl_step >= -1e-12);
        }
    }
}

#[test]
fn slater_instance_meets_the_constraint_on_average() {
    let gamma = 0.5;
    let inst = slater_instance(gamma, 1).unwrap();
    let set = UncertaintySet::Rect(RectSet::uniform(inst.nominal.clone(), Norm::Linf, 0.05).unwrap());
    let md = MdConfig::theory(gamma, 1, 1.0, InnerIterations::LogLambda { base: 5, scale: 2.0 }).unwrap();
    let out = driver::run_training(&inst.spec, &set, &config(md, tma_adversary(30), 200)).unwrap();
    let avg = out.log.average_constraints()[0];
    assert!(avg <= 0.05, "average constraint cost {avg}");
}

#[test]
fn errors_carry_the_iteration_index() {
    // an instance whose uniform policy violates the constraint starts at lambda = 0, so a zero
    // bound passes initialisation and first breaks in the update of iteration 0
    let inst = (0..50)
        .map(|seed| random_rcmdp(3, 2, 1, 0.8, seed).unwrap())
        .find(|inst| {
            let uniform = SoftmaxPolicy::uniform(3, 2);
            model::all_values(&uniform, &inst.nominal, &inst.spec).unwrap()[1] > 0.1
        })
        .expect("some seed violates the constraint");
    let set = UncertaintySet::Rect(RectSet::uniform(inst.nominal.clone(), Norm::Linf, 0.05).unwrap());
    let md = MdConfig::new(0.5, 0.2, InnerIterations::Fixed(1), inst.spec.gamma()).unwrap();
    let mut cfg = config(md, tma_adversary(2), 5);
    cfg.dual_mode = DualMode::Augmented { bound: Some(0.0) };
    match driver::run_training(&inst.spec, &set, &cfg) {
        Err(Error::MacroIteration { k, source }) => {
            assert_eq!(k, 0);
            assert!(matches!(*source, Error::DualBound { .. }), "{source:?}");
        }
        other => panic!("expected an iteration error, got {other:?}"),
    }
}
