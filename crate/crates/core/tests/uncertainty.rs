mod common;

use proptest::prelude::*;
use rand::Rng;
use rcmdp_core::instances::random_kernel;
use rcmdp_core::uncertainty::{distortion_boundary, lmo_row_l1, lmo_row_l2, lmo_row_linf, project_row_l1};
use rcmdp_core::*;

/// `n` repeated once per state, so the kernel has `n.len()` states, one action and identical rows.
fn tile(n: &[f64]) -> Vec<f64> {
    n.iter().cycle().take(n.len() * n.len()).copied().collect()
}

fn rect(n: &[f64], norm: Norm, r: f64) -> UncertaintySet {
    let k = TransitionKernel::new(n.len(), 1, tile(n)).unwrap();
    RectSet::uniform(k, norm, r).unwrap().into()
}

/// Brute-force projection onto the l1-ball-simplex in three dimensions on a grid of step `h`.
fn grid_projection_l1(y: &[f64], n: &[f64], r: f64, h: f64) -> Vec<f64> {
    let steps = (1.0 / h).round() as usize;
    let mut best = (f64::INFINITY, vec![0.0; 3]);
    for i in 0..=steps {
        for j in 0..=steps - i {
            let x = [i as f64 * h, j as f64 * h, (steps - i - j) as f64 * h];
            if Norm::L1.distance(&x, n) > r + 1e-12 {
                continue;
            }
            let d: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
            if d < best.0 {
                best = (d, x.to_vec());
            }
        }
    }
    best.1
}

#[test]
fn l1_projection_matches_grid_search() {
    let mut rng = common::rng(8);
    for _ in 0..5 {
        let n = common::random_simplex(3, &mut rng);
        let y: Vec<f64> = n.iter().map(|v| v + rng.gen_range(-0.5..0.5)).collect();
        let x = project_row_l1(&y, &n, 0.2);
        let oracle = grid_projection_l1(&y, &n, 0.2, 1e-3);
        for (a, b) in x.iter().zip(&oracle) {
            assert!((a - b).abs() <= 2e-3, "{x:?} vs {oracle:?}");
        }
    }
}

#[test]
fn nominal_is_contained_with_full_slack() {
    let mut rng = common::rng(1);
    let k = random_kernel(3, 2, 0.1, &mut rng);
    for norm in [Norm::L1, Norm::L2, Norm::Linf] {
        let set: UncertaintySet = RectSet::uniform(k.clone(), norm, 0.07).unwrap().into();
        let c = contains(&k, &set);
        assert!(c.inside);
        assert_eq!(c.violation, 0.0);
        assert!((c.slack - 0.07).abs() < 1e-15);
    }
}

#[test]
fn perturbed_row_is_reported_outside() {
    let set = rect(&[0.5, 0.5], Norm::Linf, 0.1);
    let outside = TransitionKernel::new(2, 1, tile(&[0.61, 0.39])).unwrap();
    let c = contains(&outside, &set);
    assert!(!c.inside);
    assert!((c.violation - 0.01).abs() < 1e-12);
}

#[test]
fn projection_is_feasible_and_feasible_points_are_fixed() {
    let set = rect(&[0.5, 0.5], Norm::Linf, 0.1);
    let p = project(&tile(&[0.7, 0.3]), &set).unwrap();
    assert!((p.as_slice()[0] - 0.6).abs() < 1e-12);
    assert!((p.as_slice()[3] - 0.4).abs() < 1e-12);
    let inside = project(&tile(&[0.55, 0.45]), &set).unwrap();
    assert_eq!(inside.as_slice(), tile(&[0.55, 0.45]).as_slice());
}

#[test]
fn failing_inputs() {
    let set = rect(&[0.5, 0.5], Norm::L2, 0.1);
    assert!(matches!(project(&[f64::NAN, 0.0, 0.5, 0.5], &set), Err(Error::NonFinite { .. })));
    assert!(matches!(project(&[0.5], &set), Err(Error::Dimension { .. })));
    assert!(matches!(linear_maximize(&[f64::INFINITY, 0.0, 0.0, 0.0], &set), Err(Error::NonFinite { .. })));
}

#[test]
fn lmo_examples() {
    let set = rect(&[0.5, 0.5], Norm::Linf, 0.1);
    assert_eq!(&linear_maximize(&[0.0; 4], &set).unwrap(), set.nominal());
    let p = linear_maximize(&[1.0, 0.0, 0.0, 0.0], &set).unwrap();
    assert!((p.as_slice()[0] - 0.6).abs() < 1e-15 && (p.as_slice()[1] - 0.4).abs() < 1e-15);
    // rows with a constant direction stay nominal
    assert_eq!(p.row(1, 0), &[0.5, 0.5]);

    let third = 1.0 / 3.0;
    let p = lmo_row_l1(&[3.0, 1.0, 2.0], &[third; 3], 0.2);
    assert!((p[0] - (third + 0.1)).abs() < 1e-15);
    assert!((p[1] - (third - 0.1)).abs() < 1e-15);
    assert!((p[2] - third).abs() < 1e-15);
}

#[test]
fn l1_lmo_matches_vertex_enumeration() {
    // maximise over all points moving mass between pairs of coordinates on a fine grid
    let mut rng = common::rng(77);
    for _ in 0..20 {
        let n = common::random_simplex(3, &mut rng);
        let g: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let p = lmo_row_l1(&g, &n, 0.3);
        let best = common::dot(&g, &p);
        let steps = 600;
        for i in 0..=steps {
            for j in 0..=steps - i {
                let x = [i as f64 / steps as f64, j as f64 / steps as f64, (steps - i - j) as f64 / steps as f64];
                if Norm::L1.distance(&x, &n) <= 0.3 {
                    assert!(common::dot(&g, &x) <= best + 1e-12);
                }
            }
        }
    }
}

#[test]
fn zero_radius_pins_rows() {
    let mut rng = common::rng(4);
    let k = random_kernel(3, 2, 0.1, &mut rng);
    for norm in [Norm::L1, Norm::L2, Norm::Linf] {
        let set: UncertaintySet = RectSet::uniform(k.clone(), norm, 0.0).unwrap().into();
        let dir: Vec<f64> = (0..18).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let lmo = linear_maximize(&dir, &set).unwrap();
        assert!(lmo.linf_distance(&k) < 1e-15);
        let shifted: Vec<f64> = k.as_slice().iter().zip(&dir).map(|(a, b)| a + b).collect();
        assert!(project(&shifted, &set).unwrap().linf_distance(&k) < 1e-15);
    }
}

#[test]
fn distortion_levels() {
    let mut rng = common::rng(12);
    let k = random_kernel(3, 2, 0.2, &mut rng);
    let set = RectSet::uniform(k.clone(), Norm::Linf, 0.1).unwrap();
    let plus = vec![Sign::Plus; 3];
    assert_eq!(distort(&set, 0.0, &plus).unwrap(), k);

    let full = distort(&set, 1.0, &plus).unwrap();
    let half = distort(&set, 0.5, &plus).unwrap();
    for s in 0..3 {
        for a in 0..2 {
            let b = distortion_boundary(&set, s, a, Sign::Plus);
            let n = k.row(s, a);
            for i in 0..3 {
                assert!((full.row(s, a)[i] - b[i]).abs() < 1e-15);
                assert!((half.row(s, a)[i] - (n[i] + 0.25 * (b[i] - n[i]))).abs() < 1e-15);
            }
        }
    }
    assert!(distort(&set, 1.5, &plus).is_err());
    assert!(distort(&set, 0.5, &plus[..2]).is_err());
}

#[test]
fn grouped_distortion_uses_one_sign_per_group() {
    let mut rng = common::rng(13);
    let k = random_kernel(4, 2, 0.2, &mut rng);
    let set = RectSet::uniform(k, Norm::Linf, 0.1).unwrap().with_groups(vec![0, 0, 1, 1]).unwrap();
    assert_eq!(set.n_groups(), 2);
    let p = distort(&set, 1.0, &[Sign::Plus, Sign::Minus]).unwrap();
    assert_eq!(p.row(0, 0), distortion_boundary(&set, 0, 0, Sign::Plus).as_slice());
    assert_eq!(p.row(3, 1), distortion_boundary(&set, 3, 1, Sign::Minus).as_slice());
    assert!(contains(&p, &set.clone().into()).inside);
}

fn set_strategy() -> impl Strategy<Value = (u64, usize, usize, u8, f64)> {
    (any::<u64>(), 2usize..=5, 1usize..=3, 0u8..4, 0.01f64..0.5)
}

fn build_set(seed: u64, ns: usize, na: usize, kind: u8, r: f64) -> UncertaintySet {
    let mut rng = common::rng(seed);
    let k = random_kernel(ns, na, 0.05, &mut rng);
    match kind {
        0 => RectSet::uniform(k, Norm::Linf, r).unwrap().into(),
        1 => RectSet::uniform(k, Norm::L1, r).unwrap().into(),
        2 => RectSet::uniform(k, Norm::L2, r).unwrap().into(),
        _ => NonRectSet::new(k, r).unwrap().into(),
    }
}

fn random_feasible(set: &UncertaintySet, rng: &mut impl Rng) -> TransitionKernel {
    let n = set.nominal().as_slice();
    let y: Vec<f64> = n.iter().map(|v| v + rng.gen_range(-0.3..0.3)).collect();
    project(&y, set).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn projection_is_idempotent_nonexpansive_and_feasible((seed, ns, na, kind, r) in set_strategy()) {
        let set = build_set(seed, ns, na, kind, r);
        let mut rng = common::rng(seed ^ 0xabc);
        let len = ns * na * ns;
        let y1: Vec<f64> = (0..len).map(|_| rng.gen_range(-0.5..1.0)).collect();
        let y2: Vec<f64> = (0..len).map(|_| rng.gen_range(-0.5..1.0)).collect();
        let p1 = project(&y1, &set).unwrap();
        let p2 = project(&y2, &set).unwrap();
        prop_assert!(contains(&p1, &set).inside);
        let again = project(p1.as_slice(), &set).unwrap();
        prop_assert!(again.linf_distance(&p1) <= 1e-9);
        let d_in = Norm::L2.distance(&y1, &y2);
        let d_out = Norm::L2.distance(p1.as_slice(), p2.as_slice());
        prop_assert!(d_out <= d_in + 1e-9);
    }

    #[test]
    fn lmo_beats_nominal_and_feasible_points((seed, ns, na, kind, r) in set_strategy()) {
        let set = build_set(seed, ns, na, kind, r);
        let mut rng = common::rng(seed ^ 0xdef);
        let g: Vec<f64> = (0..ns * na * ns).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let best = linear_maximize(&g, &set).unwrap();
        prop_assert!(contains(&best, &set).inside);
        let obj = common::dot(&g, best.as_slice());
        prop_assert!(obj >= common::dot(&g, set.nominal().as_slice()) - 1e-12);
        for _ in 0..50 {
            let p = random_feasible(&set, &mut rng);
            prop_assert!(obj >= common::dot(&g, p.as_slice()) - 1e-8);
        }
    }

    #[test]
    fn rectangular_lmo_decomposes_by_row((seed, ns, na, kind, r) in set_strategy()) {
        let kind = kind % 3;
        let set = build_set(seed, ns, na, kind, r);
        let UncertaintySet::Rect(rect_set) = &set else { unreachable!() };
        let mut rng = common::rng(seed ^ 0x123);
        let g: Vec<f64> = (0..ns * na * ns).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let joint = linear_maximize(&g, &set).unwrap();
        let row_lmo = match rect_set.norm() {
            Norm::L1 => lmo_row_l1,
            Norm::L2 => lmo_row_l2,
            Norm::Linf => lmo_row_linf,
        };
        for s in 0..ns {
            for a in 0..na {
                let base = (s * na + a) * ns;
                let alone = row_lmo(&g[base..base + ns], rect_set.nominal().row(s, a), r);
                let joint_obj = common::dot(&g[base..base + ns], joint.row(s, a));
                prop_assert!((common::dot(&g[base..base + ns], &alone) - joint_obj).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn lmo_objective_grows_with_budget((seed, ns, na, kind, r) in set_strategy()) {
        let small = build_set(seed, ns, na, kind, r);
        let large = build_set(seed, ns, na, kind, r * 1.5);
        let mut rng = common::rng(seed ^ 0x456);
        let g: Vec<f64> = (0..ns * na * ns).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let a = common::dot(&g, linear_maximize(&g, &small).unwrap().as_slice());
        let b = common::dot(&g, linear_maximize(&g, &large).unwrap().as_slice());
        prop_assert!(b >= a - 1e-10);
    }
}
