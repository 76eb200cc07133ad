use rcmdp_core::instances::{random_policy, random_rcmdp};
use rcmdp_core::model::{self, CostTable, RcmdpSpec, SoftmaxPolicy, TransitionKernel};
use rcmdp_core::protocol::{evaluate_row, penalized_return, robustness_sweep, sweep_plan};
use rcmdp_core::sampling::{Purpose, StreamKey};
use rcmdp_core::uncertainty::{Norm, RectSet, Sign};

#[test]
fn penalized_return_table() {
    let cases: &[(f64, &[f64], f64, f64, f64)] = &[
        (10.0, &[2.0, -1.0], 5.0, 0.0, 5.0),
        (3.0, &[-1.0, -0.5], 5.0, 3.0, 10.5),
        (3.0, &[2.0], 0.0, 3.0, 3.0),
        (-1.0, &[0.5, 0.25, -2.0], 2.0, -2.5, 1.5),
        (0.0, &[], 4.0, 0.0, 0.0),
    ];
    for &(v, c, lmax, pen, signed) in cases {
        let (a, b) = penalized_return(v, c, lmax).unwrap();
        assert_eq!((a, b), (pen, signed), "v={v} c={c:?} lmax={lmax}");
    }
    assert!(penalized_return(1.0, &[1.0], -0.5).is_err());
}

#[test]
fn sweep_has_one_row_per_level_and_sign_vector() {
    let inst = random_rcmdp(4, 2, 2, 0.9, 1).unwrap();
    let policy = random_policy(4, 2, 1.0, &mut StreamKey::new(1, Purpose::Other(9)).rng());
    for groups in [vec![0, 0, 0, 0], vec![0, 1, 0, 1], vec![0, 1, 2, 3]] {
        let n = *groups.iter().max().unwrap() + 1;
        let set = RectSet::uniform(inst.nominal.clone(), Norm::Linf, 0.1)
            .unwrap()
            .with_groups(groups)
            .unwrap();
        for levels in [vec![], vec![0.5], vec![0.0, 0.25, 0.5, 1.0]] {
            let table = robustness_sweep(&policy, &set, &levels, &inst.spec, 1.0).unwrap();
            assert_eq!(table.rows.len(), levels.len() << n);
            assert_eq!(table.n_constraints, 2);
            let plan = sweep_plan(&levels, n);
            for (row, (x, signs)) in table.rows.iter().zip(plan) {
                assert_eq!(row.level, x);
                assert_eq!(row.signs, signs);
            }
        }
    }
}

#[test]
fn zero_level_rows_equal_the_nominal_evaluation() {
    let inst = random_rcmdp(3, 3, 1, 0.9, 2).unwrap();
    let policy = random_policy(3, 3, 2.0, &mut StreamKey::new(2, Purpose::Other(9)).rng());
    let set = RectSet::uniform(inst.nominal.clone(), Norm::L1, 0.2)
        .unwrap()
        .with_groups(vec![0, 1, 1])
        .unwrap();
    let nominal = model::all_values(&policy, &inst.nominal, &inst.spec).unwrap();
    let table = robustness_sweep(&policy, &set, &[0.0, 0.7], &inst.spec, 2.0).unwrap();
    for row in table.rows.iter().filter(|r| r.level == 0.0) {
        assert_eq!(row.ret.to_bits(), (-nominal[0]).to_bits());
        for (c, v) in row.constraints.iter().zip(&nominal[1..]) {
            assert_eq!(c.to_bits(), v.to_bits());
        }
    }
    assert!(table.rows.iter().filter(|r| r.level == 0.7).any(|r| r.ret != -nominal[0]));
}

#[test]
fn aligned_distortion_lowers_the_return_monotonically() {
    // state 1 is costly; the Plus direction moves mass towards it
    let nominal = TransitionKernel::new(2, 1, vec![0.5, 0.5, 0.5, 0.5]).unwrap();
    let cost = CostTable::state_action(2, 1, vec![0.0, 1.0]).unwrap();
    let spec = RcmdpSpec::new(2, 1, vec![0.5, 0.5], cost, vec![], 0.9).unwrap();
    let policy = SoftmaxPolicy::uniform(2, 1);
    let set = RectSet::uniform(nominal, Norm::Linf, 0.3)
        .unwrap()
        .with_groups(vec![0, 0])
        .unwrap();

    let levels: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
    let returns: Vec<f64> = levels
        .iter()
        .map(|&x| evaluate_row(&policy, &set, x, &[Sign::Plus], &spec, 0.0).unwrap().ret)
        .collect();
    assert!(returns.windows(2).all(|w| w[1] <= w[0]), "{returns:?}");
    assert!(returns[20] < returns[0]);

    // full distortion reaches the boundary row (0.2, 0.8): with m = 0.2 V0 + 0.8 V1,
    // V0 = 0.9 m and V1 = 1 + 0.9 m give m = 8, so V(rho) = (7.2 + 8.2) / 2
    assert!((returns[20] + 7.7).abs() <= 1e-9, "{}", returns[20]);

    let opposite: Vec<f64> = levels
        .iter()
        .map(|&x| evaluate_row(&policy, &set, x, &[Sign::Minus], &spec, 0.0).unwrap().ret)
        .collect();
    assert!(opposite.windows(2).all(|w| w[1] >= w[0]));
}

#[test]
fn invalid_sweeps_are_rejected() {
    let inst = random_rcmdp(2, 2, 0, 0.9, 3).unwrap();
    let policy = SoftmaxPolicy::uniform(2, 2);
    let set = RectSet::uniform(inst.nominal.clone(), Norm::Linf, 0.1).unwrap();
    assert!(robustness_sweep(&policy, &set, &[1.5], &inst.spec, 1.0).is_err());
    assert!(evaluate_row(&policy, &set, 0.5, &[Sign::Plus], &inst.spec, 1.0).is_err());
    assert!(robustness_sweep(&policy, &set, &[0.5], &inst.spec, -1.0).is_err());
}
