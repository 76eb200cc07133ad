//! Built-in problem instances: seeded random RCMDPs and two hand-built chains.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::Result;
use crate::model::{CostTable, RcmdpSpec, SoftmaxPolicy, TransitionKernel};
use crate::sampling::{Purpose, StreamKey};

/// A problem together with its nominal kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub spec: RcmdpSpec,
    pub nominal: TransitionKernel,
}

/// Kernel with every row drawn uniformly and bounded away from zero by `floor / S`.
pub fn random_kernel<R: Rng + ?Sized>(n_states: usize, n_actions: usize, floor: f64, rng: &mut R) -> TransitionKernel {
    let mut p = Vec::with_capacity(n_states * n_actions * n_states);
    for _ in 0..n_states * n_actions {
        let row: Vec<f64> = (0..n_states).map(|_| rng.gen::<f64>() + floor).collect();
        let sum: f64 = row.iter().sum();
        p.extend(row.into_iter().map(|x| x / sum));
    }
    TransitionKernel::from_raw(n_states, n_actions, p)
}

/// Softmax policy with logits uniform in `[-spread, spread]`.
pub fn random_policy<R: Rng + ?Sized>(n_states: usize, n_actions: usize, spread: f64, rng: &mut R) -> SoftmaxPolicy {
    let theta = (0..n_states * n_actions)
        .map(|_| rng.gen_range(-spread..=spread))
        .collect();
    SoftmaxPolicy::from_logits(n_states, n_actions, theta).expect("bounded logits")
}

fn random_rho<R: Rng + ?Sized>(n_states: usize, rng: &mut R) -> Vec<f64> {
    let raw: Vec<f64> = (0..n_states).map(|_| rng.gen::<f64>() + 0.1).collect();
    normalized(raw)
}

fn normalized(mut v: Vec<f64>) -> Vec<f64> {
    let sum: f64 = v.iter().sum();
    for x in v.iter_mut() {
        *x /= sum;
    }
    // absorb rounding into the largest entry so the sum is 1 to machine precision
    let err = 1.0 - v.iter().sum::<f64>();
    let big = (0..v.len()).fold(0, |b, i| if v[i] > v[b] { i } else { b });
    v[big] += err;
    v
}

fn random_costs<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect()
}

/// Random RCMDP with uniform costs in `[-1, 1]`, `m` constraints and a positive start distribution.
pub fn random_rcmdp(n_states: usize, n_actions: usize, m: usize, gamma: f64, seed: u64) -> Result<Instance> {
    let mut rng = StreamKey::new(seed, Purpose::Other(1)).rng();
    let nominal = random_kernel(n_states, n_actions, 0.05, &mut rng);
    let rho = random_rho(n_states, &mut rng);
    let sa = n_states * n_actions;
    let cost0 = CostTable::state_action(n_states, n_actions, random_costs(sa, &mut rng))?;
    let costs = (0..m)
        .map(|_| CostTable::state_action(n_states, n_actions, random_costs(sa, &mut rng)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Instance {
        spec: RcmdpSpec::new(n_states, n_actions, rho, cost0, costs, gamma)?,
        nominal,
    })
}

/// Random 5-state, 3-action instance with one constraint and a built-in strictly safe action.
///
/// Action 2 is expensive but has constraint cost at most `-0.1` everywhere,
/// so always choosing it satisfies the constraint with slack `0.1 / (1 - gamma)`
/// under every kernel. The other actions are cheap and mostly unsafe.
pub fn slater_instance(gamma: f64, seed: u64) -> Result<Instance> {
    let (ns, na) = (5, 3);
    let mut rng = StreamKey::new(seed, Purpose::Other(2)).rng();
    let nominal = random_kernel(ns, na, 0.1, &mut rng);
    let rho = random_rho(ns, &mut rng);
    let mut c0 = Vec::with_capacity(ns * na);
    let mut c1 = Vec::with_capacity(ns * na);
    for _ in 0..ns {
        for a in 0..na {
            if a == na - 1 {
                c0.push(rng.gen_range(0.3..=0.8));
                c1.push(rng.gen_range(-0.5..=-0.1));
            } else {
                c0.push(rng.gen_range(-0.8..=0.2));
                c1.push(rng.gen_range(-0.1..=0.8));
            }
        }
    }
    let spec = RcmdpSpec::new(
        ns,
        na,
        rho,
        CostTable::state_action(ns, na, c0)?,
        vec![CostTable::state_action(ns, na, c1)?],
        gamma,
    )?;
    Ok(Instance { spec, nominal })
}

/// Two states where the cheap action is unsafe.
///
/// Action 0 ("fast") costs `-1` but risks the unsafe state 1; action 1
/// ("slow") costs `0` and moves towards state 0. The constraint cost is `+1`
/// in state 1 and `-0.5` in state 0, so the constraint pulls the policy away
/// from the objective's preference.
pub fn tension_chain(gamma: f64) -> Result<Instance> {
    let p = vec![
        // s = 0
        0.4, 0.6, // fast
        0.95, 0.05, // slow
        // s = 1
        0.3, 0.7, // fast
        0.8, 0.2, // slow
    ];
    let nominal = TransitionKernel::new(2, 2, p)?;
    let c0 = CostTable::state_action(2, 2, vec![-1.0, 0.0, -1.0, 0.0])?;
    let c1 = CostTable::state_action(2, 2, vec![-0.5, -0.5, 1.0, 1.0])?;
    let spec = RcmdpSpec::new(2, 2, vec![0.9, 0.1], c0, vec![c1], gamma)?;
    Ok(Instance { spec, nominal })
}

/// Five stock levels, orders of 0, 1 or 2 units, random demand of 0, 1 or 2 units.
///
/// The objective charges holding and shortage costs; the constraint charges
/// ordering effort against a fixed allowance.
pub fn inventory_chain(gamma: f64) -> Result<Instance> {
    let (ns, na) = (5usize, 3usize);
    let demand = [0.3, 0.45, 0.25];
    let mut p = vec![0.0; ns * na * ns];
    let mut c0 = Vec::with_capacity(ns * na);
    let mut c1 = Vec::with_capacity(ns * na);
    for s in 0..ns {
        for a in 0..na {
            let stocked = (s + a).min(ns - 1);
            let mut shortage = 0.0;
            for (d, &pd) in demand.iter().enumerate() {
                let next = stocked.saturating_sub(d);
                p[(s * na + a) * ns + next] += pd;
                if d > stocked {
                    shortage += pd * (d - stocked) as f64;
                }
            }
            let holding = 0.1 * stocked as f64;
            c0.push((holding + 0.6 * shortage).min(1.0) - 0.3);
            c1.push(0.5 * a as f64 - 0.4);
        }
    }
    let nominal = TransitionKernel::new(ns, na, p)?;
    let spec = RcmdpSpec::new(
        ns,
        na,
        vec![0.2; ns],
        CostTable::state_action(ns, na, c0)?,
        vec![CostTable::state_action(ns, na, c1)?],
        gamma,
    )?;
    Ok(Instance { spec, nominal })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instances_are_valid_and_reproducible() {
        let a = random_rcmdp(4, 3, 2, 0.9, 11).unwrap();
        let b = random_rcmdp(4, 3, 2, 0.9, 11).unwrap();
        assert_eq!(a, b);
        assert!(a.nominal.max_row_deviation() < 1e-12);
        slater_instance(0.5, 3).unwrap();
        tension_chain(0.9).unwrap();
        let inv = inventory_chain(0.9).unwrap();
        assert!(inv.nominal.max_row_deviation() < 1e-12);
    }
}
