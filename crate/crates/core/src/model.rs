//! Tabular RCMDP data model and exact evaluation by dense linear solves.
//!
//! All tables are flat row-major vectors: state-action tables are indexed
//! `s * A + a`, kernels and next-state tables `(s * A + a) * S + s'`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{self, Lu};

/// Row-sum tolerance for kernels and distributions built in memory.
pub const ROW_TOLERANCE: f64 = 1e-10;
/// Largest row-sum deviation that file loaders repair by renormalising.
pub const RENORMALIZE_LIMIT: f64 = 1e-6;

/// Whether a cost depends on the successor state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostShape {
    StateAction,
    StateActionState,
}

/// Cost table `c(s, a)` or `c(s, a, s')`. State-action tables broadcast over `s'`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostTable {
    n_states: usize,
    n_actions: usize,
    shape: CostShape,
    data: Vec<f64>,
}

impl CostTable {
    pub fn state_action(n_states: usize, n_actions: usize, data: Vec<f64>) -> Result<Self> {
        Self::with_shape(n_states, n_actions, CostShape::StateAction, data)
    }

    pub fn state_action_state(n_states: usize, n_actions: usize, data: Vec<f64>) -> Result<Self> {
        Self::with_shape(n_states, n_actions, CostShape::StateActionState, data)
    }

    fn with_shape(n_states: usize, n_actions: usize, shape: CostShape, data: Vec<f64>) -> Result<Self> {
        let expected = match shape {
            CostShape::StateAction => n_states * n_actions,
            CostShape::StateActionState => n_states * n_actions * n_states,
        };
        if data.len() != expected {
            return Err(Error::dim("cost table", expected, data.len()));
        }
        if data.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite { what: "cost table" });
        }
        Ok(CostTable {
            n_states,
            n_actions,
            shape,
            data,
        })
    }

    pub fn constant(n_states: usize, n_actions: usize, value: f64) -> Self {
        CostTable {
            n_states,
            n_actions,
            shape: CostShape::StateAction,
            data: vec![value; n_states * n_actions],
        }
    }

    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Self::constant(n_states, n_actions, 0.0)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn shape(&self) -> CostShape {
        self.shape
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn at(&self, s: usize, a: usize, next: usize) -> f64 {
        match self.shape {
            CostShape::StateAction => self.data[s * self.n_actions + a],
            CostShape::StateActionState => {
                self.data[(s * self.n_actions + a) * self.n_states + next]
            }
        }
    }

    /// `E_{s' ~ row}[c(s, a, s')]`.
    #[inline]
    pub fn expected(&self, s: usize, a: usize, row: &[f64]) -> f64 {
        match self.shape {
            CostShape::StateAction => self.data[s * self.n_actions + a],
            CostShape::StateActionState => {
                let base = (s * self.n_actions + a) * self.n_states;
                math::dot(&self.data[base..base + self.n_states], row)
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// `base + sum_j weights[j] * others[j]`, promoted to next-state shape if any input has it.
    pub fn combine(base: &CostTable, others: &[CostTable], weights: &[f64]) -> Result<CostTable> {
        if others.len() != weights.len() {
            return Err(Error::dim("cost weights", others.len(), weights.len()));
        }
        let (s_n, a_n) = (base.n_states, base.n_actions);
        for o in others {
            if o.n_states != s_n || o.n_actions != a_n {
                return Err(Error::dim("cost table states", s_n, o.n_states));
            }
        }
        let next_dep = base.shape == CostShape::StateActionState
            || others.iter().any(|o| o.shape == CostShape::StateActionState);
        if !next_dep {
            let mut data = base.data.clone();
            for (o, &w) in others.iter().zip(weights) {
                for (d, c) in data.iter_mut().zip(&o.data) {
                    *d += w * c;
                }
            }
            return CostTable::state_action(s_n, a_n, data);
        }
        let mut data = Vec::with_capacity(s_n * a_n * s_n);
        for s in 0..s_n {
            for a in 0..a_n {
                for n in 0..s_n {
                    let mut c = base.at(s, a, n);
                    for (o, &w) in others.iter().zip(weights) {
                        c += w * o.at(s, a, n);
                    }
                    data.push(c);
                }
            }
        }
        CostTable::state_action_state(s_n, a_n, data)
    }

    /// Returns `scale * self`.
    pub fn scaled(&self, scale: f64) -> CostTable {
        CostTable {
            data: self.data.iter().map(|c| c * scale).collect(),
            ..self.clone()
        }
    }
}

/// Row-stochastic transition kernel `p(s' | s, a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionKernel {
    n_states: usize,
    n_actions: usize,
    p: Vec<f64>,
}

impl TransitionKernel {
    /// Builds a kernel, rejecting rows that deviate from the simplex by more than [`ROW_TOLERANCE`].
    pub fn new(n_states: usize, n_actions: usize, p: Vec<f64>) -> Result<Self> {
        let k = Self::shape_checked(n_states, n_actions, p)?;
        let dev = k.max_row_deviation();
        if dev > ROW_TOLERANCE {
            return Err(Error::InvalidDistribution {
                what: "transition kernel row",
                deviation: dev,
            });
        }
        Ok(k)
    }

    /// Builds a kernel, renormalising rows whose sum is off by at most [`RENORMALIZE_LIMIT`].
    pub fn renormalized(n_states: usize, n_actions: usize, p: Vec<f64>) -> Result<Self> {
        let mut k = Self::shape_checked(n_states, n_actions, p)?;
        let dev = k.max_row_deviation();
        if dev > RENORMALIZE_LIMIT {
            return Err(Error::InvalidDistribution {
                what: "transition kernel row",
                deviation: dev,
            });
        }
        k.renormalize_rows();
        Ok(k)
    }

    fn shape_checked(n_states: usize, n_actions: usize, p: Vec<f64>) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::param("kernel size", 0.0, "needs at least one state and action"));
        }
        let expected = n_states * n_actions * n_states;
        if p.len() != expected {
            return Err(Error::dim("transition kernel", expected, p.len()));
        }
        if p.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { what: "transition kernel" });
        }
        Ok(TransitionKernel {
            n_states,
            n_actions,
            p,
        })
    }

    /// Worst violation of nonnegativity or unit row sum.
    pub fn max_row_deviation(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for row in self.p.chunks(self.n_states) {
            let sum: f64 = row.iter().sum();
            worst = worst.max((sum - 1.0).abs());
            for &x in row {
                worst = worst.max(-x);
            }
        }
        worst
    }

    pub(crate) fn renormalize_rows(&mut self) {
        for row in self.p.chunks_mut(self.n_states) {
            for x in row.iter_mut() {
                if *x < 0.0 {
                    *x = 0.0;
                }
            }
            let sum: f64 = row.iter().sum();
            for x in row.iter_mut() {
                *x /= sum;
            }
        }
    }

    pub(crate) fn from_raw(n_states: usize, n_actions: usize, p: Vec<f64>) -> Self {
        debug_assert_eq!(p.len(), n_states * n_actions * n_states);
        TransitionKernel {
            n_states,
            n_actions,
            p,
        }
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        let v = 1.0 / n_states as f64;
        Self::from_raw(n_states, n_actions, vec![v; n_states * n_actions * n_states])
    }

    /// Deterministic kernel with `next(s, a)` as the unique successor.
    pub fn deterministic(n_states: usize, n_actions: usize, next: impl Fn(usize, usize) -> usize) -> Result<Self> {
        let mut p = vec![0.0; n_states * n_actions * n_states];
        for s in 0..n_states {
            for a in 0..n_actions {
                let n = next(s, a);
                if n >= n_states {
                    return Err(Error::dim("deterministic successor", n_states, n));
                }
                p[(s * n_actions + a) * n_states + n] = 1.0;
            }
        }
        Ok(Self::from_raw(n_states, n_actions, p))
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn n_rows(&self) -> usize {
        self.n_states * self.n_actions
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.p
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.p
    }

    #[inline]
    pub fn row(&self, s: usize, a: usize) -> &[f64] {
        let base = (s * self.n_actions + a) * self.n_states;
        &self.p[base..base + self.n_states]
    }

    #[inline]
    pub fn prob(&self, s: usize, a: usize, next: usize) -> f64 {
        self.p[(s * self.n_actions + a) * self.n_states + next]
    }

    pub fn rows(&self) -> core::slice::Chunks<'_, f64> {
        self.p.chunks(self.n_states)
    }

    /// Largest absolute entrywise difference.
    pub fn linf_distance(&self, other: &TransitionKernel) -> f64 {
        self.p
            .iter()
            .zip(&other.p)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// `<self, table>` over all `(s, a, s')` entries.
    pub fn inner(&self, table: &[f64]) -> f64 {
        math::dot(&self.p, table)
    }

    /// Convex combination `(1 - beta) * self + beta * other`.
    pub fn mix(&self, other: &TransitionKernel, beta: f64) -> TransitionKernel {
        let p = self
            .p
            .iter()
            .zip(&other.p)
            .map(|(a, b)| (1.0 - beta) * a + beta * b)
            .collect();
        Self::from_raw(self.n_states, self.n_actions, p)
    }

    pub(crate) fn same_shape(&self, other: &TransitionKernel) -> Result<()> {
        if self.n_states != other.n_states {
            return Err(Error::dim("kernel states", self.n_states, other.n_states));
        }
        if self.n_actions != other.n_actions {
            return Err(Error::dim("kernel actions", self.n_actions, other.n_actions));
        }
        Ok(())
    }
}

/// Any stationary policy given by a row-major `S x A` probability table.
pub trait StochasticPolicy {
    fn n_states(&self) -> usize;
    fn n_actions(&self) -> usize;
    fn probs(&self) -> &[f64];

    #[inline]
    fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs()[s * self.n_actions() + a]
    }

    #[inline]
    fn action_row(&self, s: usize) -> &[f64] {
        let a = self.n_actions();
        &self.probs()[s * a..(s + 1) * a]
    }
}

/// Softmax policy `pi(a|s) = exp(theta[s,a]) / sum_a' exp(theta[s,a'])`.
///
/// Logits are kept recentred so that they equal the log-probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxPolicy {
    n_states: usize,
    n_actions: usize,
    log_probs: Vec<f64>,
    probs: Vec<f64>,
}

impl SoftmaxPolicy {
    pub fn from_logits(n_states: usize, n_actions: usize, theta: Vec<f64>) -> Result<Self> {
        if theta.len() != n_states * n_actions {
            return Err(Error::dim("policy logits", n_states * n_actions, theta.len()));
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFinite { what: "policy logits" });
        }
        let mut log_probs = theta;
        for row in log_probs.chunks_mut(n_actions) {
            let z = math::log_sum_exp(row);
            for t in row.iter_mut() {
                *t -= z;
            }
        }
        let probs: Vec<f64> = log_probs.iter().map(|&l| math::exp(l)).collect();
        if probs.iter().any(|&p| p <= 0.0) {
            return Err(Error::InvalidParameter {
                name: "policy logits",
                value: f64::NEG_INFINITY,
                reason: "softmax probability underflowed to zero",
            });
        }
        Ok(SoftmaxPolicy {
            n_states,
            n_actions,
            log_probs,
            probs,
        })
    }

    /// Softmax policy matching a strictly positive probability table.
    pub fn from_probs(n_states: usize, n_actions: usize, probs: &[f64]) -> Result<Self> {
        if probs.iter().any(|&p| !(p > 0.0)) {
            return Err(Error::InvalidDistribution {
                what: "softmax policy (requires positive probabilities)",
                deviation: probs.iter().fold(f64::INFINITY, |m, &p| m.min(p)),
            });
        }
        Self::from_logits(n_states, n_actions, probs.iter().map(|&p| math::ln(p)).collect())
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Self::from_logits(n_states, n_actions, vec![0.0; n_states * n_actions])
            .expect("uniform logits are finite")
    }

    pub fn logits(&self) -> &[f64] {
        &self.log_probs
    }

    #[inline]
    pub fn log_prob(&self, s: usize, a: usize) -> f64 {
        self.log_probs[s * self.n_actions + a]
    }
}

impl StochasticPolicy for SoftmaxPolicy {
    fn n_states(&self) -> usize {
        self.n_states
    }
    fn n_actions(&self) -> usize {
        self.n_actions
    }
    fn probs(&self) -> &[f64] {
        &self.probs
    }
}

/// Arbitrary tabular policy; zero probabilities (deterministic policies) allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularPolicy {
    n_states: usize,
    n_actions: usize,
    probs: Vec<f64>,
}

impl TabularPolicy {
    pub fn new(n_states: usize, n_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != n_states * n_actions {
            return Err(Error::dim("policy table", n_states * n_actions, probs.len()));
        }
        for row in probs.chunks(n_actions) {
            let sum: f64 = row.iter().sum();
            let neg = row.iter().fold(0.0f64, |m, &p| m.max(-p));
            let dev = (sum - 1.0).abs().max(neg);
            if dev > ROW_TOLERANCE || !sum.is_finite() {
                return Err(Error::InvalidDistribution {
                    what: "policy row",
                    deviation: dev,
                });
            }
        }
        Ok(TabularPolicy {
            n_states,
            n_actions,
            probs,
        })
    }

    /// Deterministic policy choosing `actions[s]` in state `s`.
    pub fn deterministic(n_actions: usize, actions: &[usize]) -> Result<Self> {
        let n_states = actions.len();
        let mut probs = vec![0.0; n_states * n_actions];
        for (s, &a) in actions.iter().enumerate() {
            if a >= n_actions {
                return Err(Error::dim("deterministic action", n_actions, a));
            }
            probs[s * n_actions + a] = 1.0;
        }
        Ok(TabularPolicy {
            n_states,
            n_actions,
            probs,
        })
    }
}

impl StochasticPolicy for TabularPolicy {
    fn n_states(&self) -> usize {
        self.n_states
    }
    fn n_actions(&self) -> usize {
        self.n_actions
    }
    fn probs(&self) -> &[f64] {
        &self.probs
    }
}

/// Tabular RCMDP without the uncertainty set: sizes, start distribution, costs and discount.
#[derive(Debug, Clone, PartialEq)]
pub struct RcmdpSpec {
    n_states: usize,
    n_actions: usize,
    rho: Vec<f64>,
    cost0: CostTable,
    costs: Vec<CostTable>,
    gamma: f64,
}

impl RcmdpSpec {
    pub fn new(
        n_states: usize,
        n_actions: usize,
        rho: Vec<f64>,
        cost0: CostTable,
        costs: Vec<CostTable>,
        gamma: f64,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::param("n_states/n_actions", 0.0, "must be positive"));
        }
        if rho.len() != n_states {
            return Err(Error::dim("start distribution", n_states, rho.len()));
        }
        let sum: f64 = rho.iter().sum();
        if (sum - 1.0).abs() > 1e-12 || !sum.is_finite() {
            return Err(Error::InvalidDistribution {
                what: "start distribution",
                deviation: (sum - 1.0).abs(),
            });
        }
        if let Some(&r) = rho.iter().find(|&&r| !(r > 0.0)) {
            return Err(Error::param("rho(s)", r, "every start probability must be positive"));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::param("gamma", gamma, "must lie in (0, 1)"));
        }
        for c in core::iter::once(&cost0).chain(&costs) {
            if c.n_states != n_states || c.n_actions != n_actions {
                return Err(Error::dim("cost table states", n_states, c.n_states));
            }
            if let Some(&v) = c.data.iter().find(|v| v.abs() > 1.0) {
                return Err(Error::CostOutOfRange { value: v });
            }
        }
        Ok(RcmdpSpec {
            n_states,
            n_actions,
            rho,
            cost0,
            costs,
            gamma,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }
    pub fn n_actions(&self) -> usize {
        self.n_actions
    }
    pub fn n_constraints(&self) -> usize {
        self.costs.len()
    }
    pub fn rho(&self) -> &[f64] {
        &self.rho
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn cost0(&self) -> &CostTable {
        &self.cost0
    }
    pub fn costs(&self) -> &[CostTable] {
        &self.costs
    }

    /// Same problem with a different discount factor.
    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Self::new(
            self.n_states,
            self.n_actions,
            self.rho.clone(),
            self.cost0.clone(),
            self.costs.clone(),
            gamma,
        )
    }

    /// Same problem with the constraint tables dropped.
    pub fn without_constraints(&self) -> Self {
        RcmdpSpec {
            costs: Vec::new(),
            ..self.clone()
        }
    }

    pub fn check_kernel(&self, kernel: &TransitionKernel) -> Result<()> {
        if kernel.n_states != self.n_states {
            return Err(Error::dim("kernel states", self.n_states, kernel.n_states));
        }
        if kernel.n_actions != self.n_actions {
            return Err(Error::dim("kernel actions", self.n_actions, kernel.n_actions));
        }
        Ok(())
    }

    pub(crate) fn check_policy<P: StochasticPolicy + ?Sized>(&self, policy: &P) -> Result<()> {
        if policy.n_states() != self.n_states {
            return Err(Error::dim("policy states", self.n_states, policy.n_states()));
        }
        if policy.n_actions() != self.n_actions {
            return Err(Error::dim("policy actions", self.n_actions, policy.n_actions()));
        }
        Ok(())
    }

    pub(crate) fn check_cost(&self, cost: &CostTable) -> Result<()> {
        if cost.n_states != self.n_states {
            return Err(Error::dim("cost states", self.n_states, cost.n_states));
        }
        if cost.n_actions != self.n_actions {
            return Err(Error::dim("cost actions", self.n_actions, cost.n_actions));
        }
        Ok(())
    }

    fn check_all<P: StochasticPolicy + ?Sized>(&self, policy: &P, kernel: &TransitionKernel) -> Result<()> {
        self.check_policy(policy)?;
        self.check_kernel(kernel)
    }
}

/// Discounted state and state-action visitation distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyPair {
    pub d_state: Vec<f64>,
    pub d_state_action: Vec<f64>,
}

/// Per-state values and the value at the start distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueFunction {
    pub per_state: Vec<f64>,
    pub at_rho: f64,
}

/// State-to-state matrix `P_pi(s, s') = sum_a pi(a|s) p(s'|s,a)`.
pub fn policy_transition<P: StochasticPolicy + ?Sized>(policy: &P, kernel: &TransitionKernel) -> Vec<f64> {
    let (ns, na) = (kernel.n_states, kernel.n_actions);
    let mut m = vec![0.0; ns * ns];
    for s in 0..ns {
        for a in 0..na {
            let w = policy.prob(s, a);
            if w == 0.0 {
                continue;
            }
            for (dst, &p) in m[s * ns..(s + 1) * ns].iter_mut().zip(kernel.row(s, a)) {
                *dst += w * p;
            }
        }
    }
    m
}

/// Expected one-step cost under the policy, `c_pi(s)`.
pub fn policy_cost<P: StochasticPolicy + ?Sized>(policy: &P, kernel: &TransitionKernel, cost: &CostTable) -> Vec<f64> {
    (0..kernel.n_states)
        .map(|s| {
            (0..kernel.n_actions)
                .map(|a| policy.prob(s, a) * cost.expected(s, a, kernel.row(s, a)))
                .sum()
        })
        .collect()
}

fn identity_minus(m: &[f64], n: usize, gamma: f64, transpose: bool) -> Vec<f64> {
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let v = if transpose { m[j * n + i] } else { m[i * n + j] };
            a[i * n + j] = if i == j { 1.0 } else { 0.0 } - gamma * v;
        }
    }
    a
}

/// Discounted occupancy `d = (1 - gamma) rho + gamma P_pi^T d`, solved directly.
pub fn occupancy<P: StochasticPolicy + ?Sized>(
    policy: &P,
    kernel: &TransitionKernel,
    spec: &RcmdpSpec,
) -> Result<OccupancyPair> {
    spec.check_all(policy, kernel)?;
    let n = spec.n_states;
    let pp = policy_transition(policy, kernel);
    let lu = Lu::factor(identity_minus(&pp, n, spec.gamma, true), n)?;
    let rhs: Vec<f64> = spec.rho.iter().map(|r| (1.0 - spec.gamma) * r).collect();
    let mut d = lu.solve(&rhs);
    let total: f64 = d.iter().sum();
    for x in d.iter_mut() {
        *x /= total;
    }
    let na = spec.n_actions;
    let mut dsa = vec![0.0; n * na];
    for s in 0..n {
        for a in 0..na {
            dsa[s * na + a] = d[s] * policy.prob(s, a);
        }
    }
    Ok(OccupancyPair {
        d_state: d,
        d_state_action: dsa,
    })
}

/// Policy value for an arbitrary cost table, from `(I - gamma P_pi) V = c_pi`.
pub fn value<P: StochasticPolicy + ?Sized>(
    policy: &P,
    kernel: &TransitionKernel,
    cost: &CostTable,
    spec: &RcmdpSpec,
) -> Result<ValueFunction> {
    spec.check_all(policy, kernel)?;
    spec.check_cost(cost)?;
    let n = spec.n_states;
    let pp = policy_transition(policy, kernel);
    let lu = Lu::factor(identity_minus(&pp, n, spec.gamma, false), n)?;
    let per_state = lu.solve(&policy_cost(policy, kernel, cost));
    let at_rho = math::dot(&per_state, &spec.rho);
    Ok(ValueFunction { per_state, at_rho })
}

/// Values of `c_0` and every constraint-cost at `rho`, in that order.
pub fn all_values<P: StochasticPolicy + ?Sized>(
    policy: &P,
    kernel: &TransitionKernel,
    spec: &RcmdpSpec,
) -> Result<Vec<f64>> {
    spec.check_all(policy, kernel)?;
    let n = spec.n_states;
    let pp = policy_transition(policy, kernel);
    let lu = Lu::factor(identity_minus(&pp, n, spec.gamma, false), n)?;
    Ok(core::iter::once(&spec.cost0)
        .chain(&spec.costs)
        .map(|c| math::dot(&lu.solve(&policy_cost(policy, kernel, c)), &spec.rho))
        .collect())
}

/// State-action values `Q(s,a) = E[c(s,a,s')] + gamma E[V(s')]`.
pub fn q_values<P: StochasticPolicy + ?Sized>(
    policy: &P,
    kernel: &TransitionKernel,
    cost: &CostTable,
    spec: &RcmdpSpec,
) -> Result<Vec<f64>> {
    let v = value(policy, kernel, cost, spec)?;
    Ok(q_from_values(kernel, cost, &v.per_state, spec.gamma))
}

pub(crate) fn q_from_values(kernel: &TransitionKernel, cost: &CostTable, v: &[f64], gamma: f64) -> Vec<f64> {
    let (ns, na) = (kernel.n_states, kernel.n_actions);
    let mut q = Vec::with_capacity(ns * na);
    for s in 0..ns {
        for a in 0..na {
            let row = kernel.row(s, a);
            q.push(cost.expected(s, a, row) + gamma * math::dot(row, v));
        }
    }
    q
}

/// Lagrangian cost `c_0 + sum_j lambda_j c_j`.
pub fn lagrangian_cost(spec: &RcmdpSpec, lambda: &[f64]) -> Result<CostTable> {
    if lambda.len() != spec.costs.len() {
        return Err(Error::dim("multipliers", spec.costs.len(), lambda.len()));
    }
    if let Some(&l) = lambda.iter().find(|&&l| !(l >= 0.0)) {
        return Err(Error::param("lambda", l, "multipliers must be nonnegative"));
    }
    CostTable::combine(&spec.cost0, &spec.costs, lambda)
}

/// Lagrangian value at `rho` for nonnegative multipliers.
pub fn lagrangian_value<P: StochasticPolicy + ?Sized>(
    policy: &P,
    kernel: &TransitionKernel,
    lambda: &[f64],
    spec: &RcmdpSpec,
) -> Result<f64> {
    let cost = lagrangian_cost(spec, lambda)?;
    Ok(value(policy, kernel, &cost, spec)?.at_rho)
}

/// Action next-state values `G(s,a,s') = c(s,a,s') + gamma V(s')`.
pub fn g_values<P: StochasticPolicy + ?Sized>(
    policy: &P,
    kernel: &TransitionKernel,
    cost: &CostTable,
    spec: &RcmdpSpec,
) -> Result<Vec<f64>> {
    let v = value(policy, kernel, cost, spec)?;
    Ok(g_from_values(cost, &v.per_state, spec.gamma))
}

pub(crate) fn g_from_values(cost: &CostTable, v: &[f64], gamma: f64) -> Vec<f64> {
    let (ns, na) = (cost.n_states, cost.n_actions);
    let mut g = Vec::with_capacity(ns * na * ns);
    for s in 0..ns {
        for a in 0..na {
            for n in 0..ns {
                g.push(cost.at(s, a, n) + gamma * v[n]);
            }
        }
    }
    g
}

/// Which of the two cross-kernel performance-difference identities to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerfDiffForm {
    /// Occupancy under `q`, next-state values under `p`.
    OccupancyOfSecond,
    /// Occupancy under `p`, next-state values under `q`.
    OccupancyOfFirst,
}

/// Both sides of `V_p(rho) - V_q(rho) = 1/(1-gamma) sum_s d(s) sum_a pi(a|s) <p - q, G(s,a,.)>`.
pub fn perf_diff_terms<P: StochasticPolicy + ?Sized>(
    policy: &P,
    kernel_p: &TransitionKernel,
    kernel_q: &TransitionKernel,
    cost: &CostTable,
    spec: &RcmdpSpec,
    form: PerfDiffForm,
) -> Result<(f64, f64)> {
    let vp = value(policy, kernel_p, cost, spec)?;
    let vq = value(policy, kernel_q, cost, spec)?;
    let lhs = vp.at_rho - vq.at_rho;
    let (occ, g) = match form {
        PerfDiffForm::OccupancyOfSecond => (
            occupancy(policy, kernel_q, spec)?,
            g_from_values(cost, &vp.per_state, spec.gamma),
        ),
        PerfDiffForm::OccupancyOfFirst => (
            occupancy(policy, kernel_p, spec)?,
            g_from_values(cost, &vq.per_state, spec.gamma),
        ),
    };
    let (ns, na) = (spec.n_states, spec.n_actions);
    let mut rhs = 0.0;
    for s in 0..ns {
        let mut inner = 0.0;
        for a in 0..na {
            let base = (s * na + a) * ns;
            let diff: f64 = (0..ns)
                .map(|n| (kernel_p.row(s, a)[n] - kernel_q.row(s, a)[n]) * g[base + n])
                .sum();
            inner += policy.prob(s, a) * diff;
        }
        rhs += occ.d_state[s] * inner;
    }
    Ok((lhs, rhs / (1.0 - spec.gamma)))
}

/// `max_s d(s) / rho(s)` for the given policy and kernel.
pub fn mismatch_coefficient<P: StochasticPolicy + ?Sized>(
    policy: &P,
    kernel: &TransitionKernel,
    spec: &RcmdpSpec,
) -> Result<f64> {
    let occ = occupancy(policy, kernel, spec)?;
    Ok(occ
        .d_state
        .iter()
        .zip(&spec.rho)
        .fold(0.0, |m, (d, r)| m.max(d / r)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_state() -> RcmdpSpec {
        RcmdpSpec::new(
            1,
            2,
            vec![1.0],
            CostTable::constant(1, 2, 1.0),
            vec![],
            0.9,
        )
        .unwrap()
    }

    #[test]
    fn single_state_occupancy_is_one() {
        let spec = single_state();
        let k = TransitionKernel::uniform(1, 2);
        let occ = occupancy(&SoftmaxPolicy::uniform(1, 2), &k, &spec).unwrap();
        assert!((occ.d_state[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn deterministic_cycle_occupancy() {
        // 0 -> 1 -> 0, rho = (1, 0+): occupancy is the alternating geometric series
        let spec = RcmdpSpec::new(
            2,
            1,
            vec![1.0 - 1e-300, 1e-300],
            CostTable::zeros(2, 1),
            vec![],
            0.5,
        )
        .unwrap();
        let k = TransitionKernel::deterministic(2, 1, |s, _| 1 - s).unwrap();
        let occ = occupancy(&SoftmaxPolicy::uniform(2, 1), &k, &spec).unwrap();
        assert!((occ.d_state[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((occ.d_state[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn constant_cost_value_is_geometric() {
        let spec = single_state().with_gamma(0.5).unwrap();
        let v = value(
            &SoftmaxPolicy::uniform(1, 2),
            &TransitionKernel::uniform(1, 2),
            spec.cost0(),
            &spec,
        )
        .unwrap();
        assert!((v.per_state[0] - 2.0).abs() < 1e-12);
        assert!((v.at_rho - 2.0).abs() < 1e-12);
    }

    #[test]
    fn myopic_g_equals_cost() {
        let cost = CostTable::state_action_state(1, 1, vec![0.25]).unwrap();
        let g = g_from_values(&cost, &[123.0], 0.0);
        assert_eq!(g, vec![0.25]);
    }

    #[test]
    fn spec_rejects_bad_inputs() {
        let bad_rho = RcmdpSpec::new(2, 1, vec![1.0, 0.0], CostTable::zeros(2, 1), vec![], 0.5);
        assert!(matches!(bad_rho, Err(Error::InvalidParameter { .. })));
        let bad_cost = RcmdpSpec::new(1, 1, vec![1.0], CostTable::constant(1, 1, 1.5), vec![], 0.5);
        assert!(matches!(bad_cost, Err(Error::CostOutOfRange { .. })));
        let bad_gamma = RcmdpSpec::new(1, 1, vec![1.0], CostTable::zeros(1, 1), vec![], 1.0);
        assert!(matches!(bad_gamma, Err(Error::InvalidParameter { .. })));
    }

    #[test]
    fn kernel_renormalisation_limits() {
        let ok = TransitionKernel::renormalized(1, 1, vec![1.0 + 5e-7]).unwrap();
        assert_eq!(ok.as_slice(), &[1.0]);
        assert!(TransitionKernel::renormalized(1, 1, vec![1.0 + 2e-6]).is_err());
        assert!(TransitionKernel::new(1, 1, vec![1.0 + 1e-9]).is_err());
    }

    #[test]
    fn negative_multiplier_rejected() {
        let spec = RcmdpSpec::new(
            1,
            1,
            vec![1.0],
            CostTable::zeros(1, 1),
            vec![CostTable::zeros(1, 1)],
            0.5,
        )
        .unwrap();
        assert!(lagrangian_cost(&spec, &[-0.1]).is_err());
    }

    #[test]
    fn identical_kernels_have_zero_perf_diff() {
        let spec = RcmdpSpec::new(
            2,
            2,
            vec![0.5, 0.5],
            CostTable::state_action(2, 2, vec![0.1, -0.2, 0.3, 0.9]).unwrap(),
            vec![],
            0.7,
        )
        .unwrap();
        let k = TransitionKernel::uniform(2, 2);
        let pi = SoftmaxPolicy::uniform(2, 2);
        for form in [PerfDiffForm::OccupancyOfSecond, PerfDiffForm::OccupancyOfFirst] {
            let (l, r) = perf_diff_terms(&pi, &k, &k, spec.cost0(), &spec, form).unwrap();
            assert_eq!(l, 0.0);
            assert_eq!(r, 0.0);
        }
    }
}
