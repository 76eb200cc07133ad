//! Independent reference computations used as test oracles.
//!
//! Nothing here calls the optimisers under test: values come from plain
//! fixed-point iteration and worst cases from brute-force vertex enumeration.

#![allow(dead_code)]

use rand::Rng;
use rcmdp_core::sampling::{Purpose, StreamKey};
use rcmdp_core::{CostTable, RcmdpSpec, StochasticPolicy, TransitionKernel};

pub fn rng(seed: u64) -> rand_chacha::ChaCha8Rng {
    StreamKey::new(seed, Purpose::Other(999)).rng()
}

/// Policy values by iterating the Bellman operator to a fixed point.
pub fn iterate_value(policy: &dyn StochasticPolicy, kernel: &TransitionKernel, cost: &CostTable, gamma: f64) -> Vec<f64> {
    let (ns, na) = (kernel.n_states(), kernel.n_actions());
    let mut v = vec![0.0; ns];
    loop {
        let mut next = vec![0.0; ns];
        for s in 0..ns {
            for a in 0..na {
                let row = kernel.row(s, a);
                let q: f64 = (0..ns).map(|n| row[n] * (cost.at(s, a, n) + gamma * v[n])).sum();
                next[s] += policy.prob(s, a) * q;
            }
        }
        let diff = next.iter().zip(&v).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        v = next;
        if diff < 1e-15 {
            return v;
        }
    }
}

/// Truncated discounted visitation `(1-gamma) sum_{l <= horizon} gamma^l P(s_l = s)`.
pub fn power_occupancy(policy: &dyn StochasticPolicy, kernel: &TransitionKernel, rho: &[f64], gamma: f64, horizon: usize) -> Vec<f64> {
    let (ns, na) = (kernel.n_states(), kernel.n_actions());
    let mut dist = rho.to_vec();
    let mut occ = vec![0.0; ns];
    let mut w = 1.0 - gamma;
    for _ in 0..=horizon {
        for s in 0..ns {
            occ[s] += w * dist[s];
        }
        let mut next = vec![0.0; ns];
        for s in 0..ns {
            for a in 0..na {
                let pa = dist[s] * policy.prob(s, a);
                for (n, p) in kernel.row(s, a).iter().enumerate() {
                    next[n] += pa * p;
                }
            }
        }
        dist = next;
        w *= gamma;
    }
    occ
}

/// Optimal (minimal) values by value iteration.
pub fn optimal_values(kernel: &TransitionKernel, cost: &CostTable, gamma: f64) -> Vec<f64> {
    let (ns, na) = (kernel.n_states(), kernel.n_actions());
    let mut v = vec![0.0; ns];
    loop {
        let next: Vec<f64> = (0..ns)
            .map(|s| {
                (0..na)
                    .map(|a| {
                        let row = kernel.row(s, a);
                        (0..ns).map(|n| row[n] * (cost.at(s, a, n) + gamma * v[n])).sum::<f64>()
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let diff = next.iter().zip(&v).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        v = next;
        if diff < 1e-14 {
            return v;
        }
    }
}

/// Optimum of the KL-regularised problem `min E sum gamma^l (c + alpha log(pi / anchor))`.
///
/// Returns the optimal values and policy table.
pub fn soft_value_iteration(
    anchor: &dyn StochasticPolicy,
    kernel: &TransitionKernel,
    cost: &CostTable,
    alpha: f64,
    gamma: f64,
) -> (Vec<f64>, Vec<f64>) {
    let (ns, na) = (kernel.n_states(), kernel.n_actions());
    let mut v = vec![0.0; ns];
    let q_of = |v: &[f64]| -> Vec<f64> {
        let mut q = vec![0.0; ns * na];
        for s in 0..ns {
            for a in 0..na {
                let row = kernel.row(s, a);
                q[s * na + a] = (0..ns).map(|n| row[n] * (cost.at(s, a, n) + gamma * v[n])).sum();
            }
        }
        q
    };
    loop {
        let q = q_of(&v);
        let next: Vec<f64> = (0..ns)
            .map(|s| {
                let m = (0..na).map(|a| q[s * na + a]).fold(f64::INFINITY, f64::min);
                let z: f64 = (0..na).map(|a| anchor.prob(s, a) * (-(q[s * na + a] - m) / alpha).exp()).sum();
                m - alpha * z.ln()
            })
            .collect();
        let diff = next.iter().zip(&v).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        v = next;
        if diff < 1e-14 {
            break;
        }
    }
    let q = q_of(&v);
    let mut pi = vec![0.0; ns * na];
    for s in 0..ns {
        let m = (0..na).map(|a| q[s * na + a]).fold(f64::INFINITY, f64::min);
        let w: Vec<f64> = (0..na).map(|a| anchor.prob(s, a) * (-(q[s * na + a] - m) / alpha).exp()).collect();
        let z: f64 = w.iter().sum();
        for a in 0..na {
            pi[s * na + a] = w[a] / z;
        }
    }
    (v, pi)
}

/// Vertices of `{x in simplex : lo <= x <= hi}`: one free coordinate, all others at a bound.
pub fn box_simplex_vertices(lo: &[f64], hi: &[f64]) -> Vec<Vec<f64>> {
    let n = lo.len();
    let mut out = Vec::new();
    for free in 0..n {
        for mask in 0..(1usize << (n - 1)) {
            let mut x = vec![0.0; n];
            let mut bit = 0;
            let mut used = 0.0;
            for i in 0..n {
                if i == free {
                    continue;
                }
                x[i] = if mask >> bit & 1 == 1 { hi[i] } else { lo[i] };
                used += x[i];
                bit += 1;
            }
            x[free] = 1.0 - used;
            if x[free] >= lo[free] - 1e-12 && x[free] <= hi[free] + 1e-12 {
                out.push(x);
            }
        }
    }
    out
}

/// Worst-case (maximal) values of a fixed policy over an l-infinity rectangular set,
/// by robust value iteration with vertex enumeration per row. Returns values and the maximising kernel.
pub fn robust_values_linf(
    policy: &dyn StochasticPolicy,
    nominal: &TransitionKernel,
    radius: f64,
    cost: &CostTable,
    gamma: f64,
) -> (Vec<f64>, Vec<f64>) {
    let (ns, na) = (nominal.n_states(), nominal.n_actions());
    let verts: Vec<Vec<Vec<f64>>> = (0..ns * na)
        .map(|row| {
            let n = nominal.row(row / na, row % na);
            let lo: Vec<f64> = n.iter().map(|x| (x - radius).max(0.0)).collect();
            let hi: Vec<f64> = n.iter().map(|x| (x + radius).min(1.0)).collect();
            box_simplex_vertices(&lo, &hi)
        })
        .collect();
    let mut v = vec![0.0; ns];
    let mut choice = vec![0usize; ns * na];
    loop {
        let mut next = vec![0.0; ns];
        for s in 0..ns {
            for a in 0..na {
                let row = s * na + a;
                let (best, idx) = verts[row]
                    .iter()
                    .enumerate()
                    .map(|(i, p)| ((0..ns).map(|n| p[n] * (cost.at(s, a, n) + gamma * v[n])).sum::<f64>(), i))
                    .fold((f64::NEG_INFINITY, 0), |b, x| if x.0 > b.0 { x } else { b });
                choice[row] = idx;
                next[s] += policy.prob(s, a) * best;
            }
        }
        let diff = next.iter().zip(&v).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        v = next;
        if diff < 1e-14 {
            break;
        }
    }
    let kernel = (0..ns * na).flat_map(|row| verts[row][choice[row]].clone()).collect();
    (v, kernel)
}

/// Uniformly random point of the simplex.
pub fn random_simplex<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    let e: Vec<f64> = (0..n).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn rho_dot(spec: &RcmdpSpec, v: &[f64]) -> f64 {
    dot(spec.rho(), v)
}
