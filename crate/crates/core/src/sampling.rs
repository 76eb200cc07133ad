//! Seeded rollouts, Monte-Carlo estimators and the generative-model query ledger.
//!
//! Every estimator draws from ChaCha8 streams keyed by
//! `(seed, purpose, k, t, replicate)`, so results depend only on the key and
//! never on evaluation order.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::math;
use crate::model::{CostTable, RcmdpSpec, SoftmaxPolicy, StochasticPolicy, TransitionKernel};

/// What a random stream is used for; part of the stream key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    Value,
    QValue,
    GValue,
    Rollout,
    Noise,
    Other(u64),
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Value => 1,
            Purpose::QValue => 2,
            Purpose::GValue => 3,
            Purpose::Rollout => 4,
            Purpose::Noise => 5,
            Purpose::Other(x) => 0x100 + x,
        }
    }
}

/// Identifies one independent random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub seed: u64,
    pub purpose: Purpose,
    pub k: u64,
    pub t: u64,
    pub replicate: u64,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

impl StreamKey {
    pub fn new(seed: u64, purpose: Purpose) -> Self {
        StreamKey {
            seed,
            purpose,
            k: 0,
            t: 0,
            replicate: 0,
        }
    }

    pub fn at(self, k: u64, t: u64) -> Self {
        StreamKey { k, t, ..self }
    }

    pub fn replicate(self, replicate: u64) -> Self {
        StreamKey { replicate, ..self }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut h = splitmix64(self.seed);
        let mut seed = [0u8; 32];
        let parts = [self.purpose.tag(), self.k, self.t, self.replicate];
        for (chunk, part) in seed.chunks_mut(8).zip(parts) {
            h = splitmix64(h ^ splitmix64(part));
            chunk.copy_from_slice(&h.to_le_bytes());
        }
        ChaCha8Rng::from_seed(seed)
    }
}

/// Index drawn from a probability vector by inverse-CDF sampling.
#[inline]
pub fn draw<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

/// How a rollout begins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Start<'a> {
    State(usize),
    Distribution(&'a [f64]),
    /// First action fixed.
    StateAction(usize, usize),
    /// First action and first successor fixed.
    Transition(usize, usize, usize),
}

/// One simulated path. `states` holds `horizon + 1` entries: the last is the state reached after the final action.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
    /// Row-major `horizon x n_costs` per-step costs `c_i(s_l, a_l, s_{l+1})`.
    pub costs: Vec<f64>,
    pub n_costs: usize,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn step_costs(&self, l: usize) -> &[f64] {
        &self.costs[l * self.n_costs..(l + 1) * self.n_costs]
    }

    /// `sum_l gamma^l c_i(s_l, a_l, s_{l+1})`.
    pub fn discounted_return(&self, i: usize, gamma: f64) -> f64 {
        let mut g = 1.0;
        let mut total = 0.0;
        for l in 0..self.len() {
            total += g * self.costs[l * self.n_costs + i];
            g *= gamma;
        }
        total
    }
}

fn first_state<R: Rng + ?Sized>(start: Start<'_>, rng: &mut R) -> usize {
    match start {
        Start::State(s) | Start::StateAction(s, _) | Start::Transition(s, _, _) => s,
        Start::Distribution(rho) => draw(rho, rng),
    }
}

/// Walks `horizon` transitions, calling `visit(l, s, a, s')` for each.
fn rollout<P, R, F>(policy: &P, kernel: &TransitionKernel, start: Start<'_>, horizon: usize, rng: &mut R, mut visit: F)
where
    P: StochasticPolicy + ?Sized,
    R: Rng + ?Sized,
    F: FnMut(usize, usize, usize, usize),
{
    let mut s = first_state(start, rng);
    for l in 0..horizon {
        let (a, next) = match (l, start) {
            (0, Start::Transition(_, a, n)) => (a, n),
            (0, Start::StateAction(_, a)) => (a, draw(kernel.row(s, a), rng)),
            _ => {
                let a = draw(policy.action_row(s), rng);
                (a, draw(kernel.row(s, a), rng))
            }
        };
        visit(l, s, a, next);
        s = next;
    }
}

fn check_start(start: Start<'_>, n_states: usize, n_actions: usize) -> Result<()> {
    let (s, a, n) = match start {
        Start::State(s) => (s, 0, 0),
        Start::Distribution(rho) => {
            if rho.len() != n_states {
                return Err(Error::dim("start distribution", n_states, rho.len()));
            }
            (0, 0, 0)
        }
        Start::StateAction(s, a) => (s, a, 0),
        Start::Transition(s, a, n) => (s, a, n),
    };
    if s >= n_states || n >= n_states {
        return Err(Error::dim("start state", n_states, s.max(n)));
    }
    if a >= n_actions {
        return Err(Error::dim("start action", n_actions, a));
    }
    Ok(())
}

/// Simulates one trajectory, recording every cost table at each step.
pub fn sample_trajectory<P, R>(
    policy: &P,
    kernel: &TransitionKernel,
    costs: &[&CostTable],
    start: Start<'_>,
    horizon: usize,
    rng: &mut R,
) -> Result<Trajectory>
where
    P: StochasticPolicy + ?Sized,
    R: Rng + ?Sized,
{
    if horizon == 0 {
        return Err(Error::param("horizon", 0.0, "must be at least 1"));
    }
    check_start(start, kernel.n_states(), kernel.n_actions())?;
    let mut states = Vec::with_capacity(horizon + 1);
    let mut actions = Vec::with_capacity(horizon);
    let mut out = Vec::with_capacity(horizon * costs.len());
    let mut last = 0;
    rollout(policy, kernel, start, horizon, rng, |_, s, a, n| {
        states.push(s);
        actions.push(a);
        out.extend(costs.iter().map(|c| c.at(s, a, n)));
        last = n;
    });
    states.push(last);
    Ok(Trajectory {
        states,
        actions,
        costs: out,
        n_costs: costs.len(),
    })
}

fn check_counts(m: usize, n: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::param("sample count M", 0.0, "must be at least 1"));
    }
    if n == 0 {
        return Err(Error::param("horizon N", 0.0, "must be at least 1"));
    }
    Ok(())
}

/// Mean truncated discounted return from `rho` for each cost table; one set of rollouts serves all tables.
pub fn estimate_v<P: StochasticPolicy + ?Sized>(
    policy: &P,
    kernel: &TransitionKernel,
    costs: &[&CostTable],
    m_v: usize,
    n_v: usize,
    spec: &RcmdpSpec,
    key: StreamKey,
) -> Result<Vec<f64>> {
    check_counts(m_v, n_v)?;
    spec.check_policy(policy)?;
    spec.check_kernel(kernel)?;
    let gamma = spec.gamma();
    let discounts: Vec<f64> = (0..n_v).map(|l| math::powf(gamma, l as f64)).collect();
    let mut sums = vec![0.0; costs.len()];
    let mut rng = key.rng();
    for _ in 0..m_v {
        rollout(policy, kernel, Start::Distribution(spec.rho()), n_v, &mut rng, |l, s, a, n| {
            for (acc, c) in sums.iter_mut().zip(costs) {
                *acc += discounts[l] * c.at(s, a, n);
            }
        });
    }
    Ok(sums.into_iter().map(|x| x / m_v as f64).collect())
}

/// Monte-Carlo estimate of the KL-regularised state-action values.
///
/// The first step is evaluated exactly; the tail from `l = 1` to `n_q - 1`
/// accumulates `gamma^l [c(s_l, a_l, s_{l+1}) + alpha KL(pi_t || pi_k)(s_l)]`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_q_reg(
    policy_t: &SoftmaxPolicy,
    anchor: &SoftmaxPolicy,
    kernel: &TransitionKernel,
    c_tilde: &CostTable,
    alpha: f64,
    m_q: usize,
    n_q: usize,
    spec: &RcmdpSpec,
    key: StreamKey,
) -> Result<Vec<f64>> {
    check_counts(m_q, n_q)?;
    spec.check_policy(policy_t)?;
    spec.check_policy(anchor)?;
    spec.check_kernel(kernel)?;
    spec.check_cost(c_tilde)?;
    let (ns, na) = (spec.n_states(), spec.n_actions());
    let gamma = spec.gamma();
    let kl = state_kl(policy_t, anchor);
    let discounts: Vec<f64> = (0..n_q).map(|l| math::powf(gamma, l as f64)).collect();
    let mut q = Vec::with_capacity(ns * na);
    for s in 0..ns {
        for a in 0..na {
            let mut rng = key.replicate((s * na + a) as u64).rng();
            let mut tail = 0.0;
            for _ in 0..m_q {
                rollout(policy_t, kernel, Start::StateAction(s, a), n_q, &mut rng, |l, sl, al, nl| {
                    if l > 0 {
                        tail += discounts[l] * (c_tilde.at(sl, al, nl) + alpha * kl[sl]);
                    }
                });
            }
            let head = c_tilde.expected(s, a, kernel.row(s, a)) - alpha * anchor.log_prob(s, a);
            q.push(head + tail / m_q as f64);
        }
    }
    Ok(q)
}

/// Per-state `KL(pi_t(.|s) || pi_k(.|s))`.
pub fn state_kl(policy_t: &SoftmaxPolicy, anchor: &SoftmaxPolicy) -> Vec<f64> {
    let na = policy_t.n_actions();
    (0..policy_t.n_states())
        .map(|s| {
            (0..na)
                .map(|a| policy_t.prob(s, a) * (policy_t.log_prob(s, a) - anchor.log_prob(s, a)))
                .sum()
        })
        .collect()
}

/// Mean truncated return conditioned on `(s_0, a_0, s_1) = (s, a, s')`, for every triple.
pub fn estimate_g<P: StochasticPolicy + ?Sized>(
    policy: &P,
    kernel: &TransitionKernel,
    cost: &CostTable,
    m_g: usize,
    n_g: usize,
    spec: &RcmdpSpec,
    key: StreamKey,
) -> Result<Vec<f64>> {
    check_counts(m_g, n_g)?;
    spec.check_policy(policy)?;
    spec.check_kernel(kernel)?;
    spec.check_cost(cost)?;
    let (ns, na) = (spec.n_states(), spec.n_actions());
    let gamma = spec.gamma();
    let discounts: Vec<f64> = (0..n_g).map(|l| math::powf(gamma, l as f64)).collect();
    let mut g = Vec::with_capacity(ns * na * ns);
    for s in 0..ns {
        for a in 0..na {
            for next in 0..ns {
                let triple = ((s * na + a) * ns + next) as u64;
                let mut rng = key.replicate(triple).rng();
                let mut total = 0.0;
                for _ in 0..m_g {
                    rollout(policy, kernel, Start::Transition(s, a, next), n_g, &mut rng, |l, sl, al, nl| {
                        total += discounts[l] * cost.at(sl, al, nl);
                    });
                }
                g.push(total / m_g as f64);
            }
        }
    }
    Ok(g)
}

/// Generative-model queries spent so far, by purpose. One query is one simulated transition.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BudgetLedger {
    pub v_queries: u64,
    pub q_queries: u64,
    pub g_queries: u64,
}

impl BudgetLedger {
    pub fn total(&self) -> u64 {
        self.v_queries + self.q_queries + self.g_queries
    }

    /// One value estimate: `M_V` rollouts of `N_V` steps.
    pub fn charge_v(&mut self, m_v: usize, n_v: usize) {
        self.v_queries += (m_v * n_v) as u64;
    }

    /// One Q-table estimate: `M_Q` rollouts of `N_Q` steps for each of the `S A` pairs.
    pub fn charge_q(&mut self, n_states: usize, n_actions: usize, m_q: usize, n_q: usize) {
        self.q_queries += (n_states * n_actions * m_q * n_q) as u64;
    }

    /// One G-table estimate: `M_G` rollouts of `N_G` steps for each of the `S^2 A` triples.
    pub fn charge_g(&mut self, n_states: usize, n_actions: usize, m_g: usize, n_g: usize) {
        self.g_queries += (n_states * n_states * n_actions * m_g * n_g) as u64;
    }
}

/// Hoeffding sample count for i.i.d. variables with range `[-bound, bound]`: `ceil(2 bound^2 / eps^2 ln(2/delta))`.
pub fn hoeffding_samples(bound: f64, eps: f64, delta: f64) -> Result<usize> {
    check_eps_delta(eps, delta)?;
    Ok(math::ceil(2.0 * bound * bound / (eps * eps) * math::ln(2.0 / delta)) as usize)
}

/// Horizon with truncation bias `2 step_bound gamma^N / (1 - gamma) <= eps`.
pub fn truncation_horizon(gamma: f64, eps: f64, step_bound: f64) -> Result<usize> {
    if !(eps > 0.0) {
        return Err(Error::param("epsilon", eps, "must be positive"));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::param("gamma", gamma, "must lie in (0, 1)"));
    }
    let ratio = 2.0 * step_bound / ((1.0 - gamma) * eps);
    if ratio <= 1.0 {
        return Ok(1);
    }
    Ok((math::ceil(math::ln(ratio) / math::ln(1.0 / gamma)) as usize).max(1))
}

fn check_eps_delta(eps: f64, delta: f64) -> Result<()> {
    if !(eps > 0.0) {
        return Err(Error::param("epsilon", eps, "must be positive"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::param("delta", delta, "must lie in (0, 1)"));
    }
    Ok(())
}

/// `M_V = ceil(2 / ((1 - gamma)^2 eps^2) ln(2 / delta))` for costs in `[-1, 1]`.
pub fn value_samples(gamma: f64, eps: f64, delta: f64) -> Result<usize> {
    hoeffding_samples(1.0 / (1.0 - gamma), eps, delta)
}

/// `N_V = ceil(log_{1/gamma}(2 / ((1 - gamma) eps)))`.
pub fn value_horizon(gamma: f64, eps: f64) -> Result<usize> {
    truncation_horizon(gamma, eps, 1.0)
}

/// `M_G = ceil(2 gamma^{-2N} / (1 - gamma)^2 ln(2 S^2 A t' / delta))`.
pub fn g_samples(gamma: f64, n_g: usize, n_states: usize, n_actions: usize, t_prime: usize, delta: f64) -> Result<usize> {
    check_eps_delta(1.0, delta)?;
    let scale = 2.0 * math::powf(gamma, -2.0 * n_g as f64) / ((1.0 - gamma) * (1.0 - gamma));
    let union = (2 * n_states * n_states * n_actions * t_prime) as f64 / delta;
    Ok(math::ceil(scale * math::ln(union)) as usize)
}

/// Bound `2 C gamma^N / (1 - gamma)` on `||G_hat - G||_inf` that holds with the sizes of [`g_samples`].
pub fn g_error_bound(cost_bound: f64, gamma: f64, n_g: usize) -> f64 {
    2.0 * cost_bound * math::powf(gamma, n_g as f64) / (1.0 - gamma)
}

/// Sample sizes for the value and regularised-Q estimators of one macro-iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MacroSampleSizes {
    pub m_v: usize,
    pub n_v: usize,
    pub m_q: usize,
    pub n_q: usize,
}

impl MacroSampleSizes {
    /// Sizes targeting accuracy `eps` with failure probability `delta_k`, given `||lambda_k||_1` and `t_k`.
    pub fn for_iteration(gamma: f64, eps: f64, delta_k: f64, lambda_l1: f64, t_k: usize) -> Result<Self> {
        let scale = lambda_l1.max(1.0) + eps * t_k as f64;
        Ok(MacroSampleSizes {
            m_v: value_samples(gamma, eps, delta_k)?,
            n_v: value_horizon(gamma, eps)?,
            m_q: math::ceil(math::ln(2.0 / delta_k) * scale * scale / (eps * eps)) as usize,
            n_q: truncation_horizon(gamma, eps, scale)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stream_keys_are_distinct_and_stable() {
        let a = StreamKey::new(7, Purpose::Value);
        let x: u64 = a.rng().gen();
        let y: u64 = a.rng().gen();
        let z: u64 = a.replicate(1).rng().gen();
        let w: u64 = StreamKey::new(7, Purpose::QValue).rng().gen();
        assert_eq!(x, y);
        assert_ne!(x, z);
        assert_ne!(x, w);
    }

    #[test]
    fn g_sample_size_example() {
        assert_eq!(g_samples(0.5, 2, 2, 2, 1, 0.1).unwrap(), 650);
    }

    #[test]
    fn value_horizon_example() {
        assert_eq!(value_horizon(0.5, 0.1).unwrap(), 6);
    }

    #[test]
    fn ledger_sums_parts() {
        let mut l = BudgetLedger::default();
        l.charge_v(10, 3);
        l.charge_q(2, 2, 5, 4);
        l.charge_g(2, 2, 1, 1);
        assert_eq!(l.total(), 30 + 80 + 8);
    }

    #[test]
    fn draw_skips_zero_mass() {
        let mut rng = StreamKey::new(1, Purpose::Other(0)).rng();
        for _ in 0..1000 {
            assert_eq!(draw(&[0.0, 1.0, 0.0], &mut rng), 1);
        }
    }
}
