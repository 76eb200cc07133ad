//! Softmax policy mirror descent on the regularised augmented Lagrangian, and multiplier updates.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{self, Lu};
use crate::model::{
    self, CostTable, OccupancyPair, RcmdpSpec, SoftmaxPolicy, StochasticPolicy, TransitionKernel, ValueFunction,
};
use crate::sampling::{self, BudgetLedger, StreamKey};

/// How the multipliers evolve between macro-iterations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DualMode {
    /// `lambda' = max(-eta v, lambda + eta v)`; costs use `lambda + eta v`. An optional bound is enforced as an error.
    Augmented { bound: Option<f64> },
    /// `lambda' = clip(lambda + eta v, 0, lambda_max)`; costs use `lambda`.
    Clipped { lambda_max: f64 },
    /// Multipliers never change; costs use `lambda`.
    Frozen,
}

/// Multipliers, their step size and the latest constraint-value estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct DualState {
    lambda: Vec<f64>,
    eta_lambda: f64,
    last_vhat: Vec<f64>,
    mode: DualMode,
}

impl DualState {
    /// First multipliers from the initial constraint estimates: `max(0, -eta v0)` (clipped to the cap in clipped mode).
    pub fn initialize(vhat0: &[f64], eta_lambda: f64, mode: DualMode) -> Result<Self> {
        check_vhat(vhat0)?;
        let lambda = vhat0
            .iter()
            .map(|&v| {
                let l = (-eta_lambda * v).max(0.0);
                match mode {
                    DualMode::Clipped { lambda_max } => l.min(lambda_max),
                    DualMode::Frozen => 0.0,
                    DualMode::Augmented { .. } => l,
                }
            })
            .collect();
        Self::new(lambda, eta_lambda, vhat0.to_vec(), mode)
    }

    pub fn new(lambda: Vec<f64>, eta_lambda: f64, last_vhat: Vec<f64>, mode: DualMode) -> Result<Self> {
        if !(eta_lambda > 0.0 && eta_lambda.is_finite()) {
            return Err(Error::param("eta_lambda", eta_lambda, "must be positive"));
        }
        if lambda.len() != last_vhat.len() {
            return Err(Error::dim("multiplier estimates", lambda.len(), last_vhat.len()));
        }
        match mode {
            DualMode::Clipped { lambda_max } if !(lambda_max >= 0.0) => {
                return Err(Error::param("lambda_max", lambda_max, "must be nonnegative"));
            }
            DualMode::Augmented { bound: Some(b) } if !(b >= 0.0) => {
                return Err(Error::param("lambda bound", b, "must be nonnegative"));
            }
            _ => {}
        }
        check_vhat(&last_vhat)?;
        let state = DualState {
            lambda,
            eta_lambda,
            last_vhat,
            mode,
        };
        state.check_nonnegative()?;
        state.check_bound()?;
        Ok(state)
    }

    /// Fixed multipliers that [`dual_update`] leaves untouched.
    pub fn frozen(lambda: Vec<f64>, eta_lambda: f64) -> Result<Self> {
        let m = lambda.len();
        Self::new(lambda, eta_lambda, alloc::vec![0.0; m], DualMode::Frozen)
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn eta_lambda(&self) -> f64 {
        self.eta_lambda
    }

    pub fn last_vhat(&self) -> &[f64] {
        &self.last_vhat
    }

    pub fn mode(&self) -> DualMode {
        self.mode
    }

    pub fn n_constraints(&self) -> usize {
        self.lambda.len()
    }

    /// Multipliers that weight the constraint costs in the policy step.
    pub fn cost_weights(&self) -> Vec<f64> {
        match self.mode {
            DualMode::Augmented { .. } => self
                .lambda
                .iter()
                .zip(&self.last_vhat)
                .map(|(l, v)| l + self.eta_lambda * v)
                .collect(),
            DualMode::Clipped { .. } | DualMode::Frozen => self.lambda.clone(),
        }
    }

    /// `F = 1 + sum lambda + eta_lambda m / (1 - gamma)`, bounding the augmented cost.
    pub fn cost_bound(&self, gamma: f64) -> f64 {
        1.0 + self.lambda.iter().sum::<f64>() + self.eta_lambda * self.lambda.len() as f64 / (1.0 - gamma)
    }

    fn check_nonnegative(&self) -> Result<()> {
        match self.lambda.iter().position(|&l| !(l >= 0.0)) {
            Some(j) => Err(Error::MultiplierInvariant {
                property: 1,
                index: j,
                value: self.lambda[j],
            }),
            None => Ok(()),
        }
    }

    fn check_bound(&self) -> Result<()> {
        let bound = match self.mode {
            DualMode::Augmented { bound: Some(b) } => b,
            DualMode::Clipped { lambda_max } => lambda_max,
            _ => return Ok(()),
        };
        match self.lambda.iter().position(|&l| l > bound) {
            Some(j) => Err(Error::DualBound {
                index: j,
                value: self.lambda[j],
                bound,
            }),
            None => Ok(()),
        }
    }
}

fn check_vhat(v: &[f64]) -> Result<()> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite { what: "constraint estimates" });
    }
    Ok(())
}

/// Multiplier step given fresh constraint estimates at `(pi_{k+1}, p_{k+1})`.
pub fn dual_update(dual: &DualState, vhat: &[f64]) -> Result<DualState> {
    if vhat.len() != dual.lambda.len() {
        return Err(Error::dim("constraint estimates", dual.lambda.len(), vhat.len()));
    }
    check_vhat(vhat)?;
    let eta = dual.eta_lambda;
    let lambda = match dual.mode {
        DualMode::Augmented { .. } => dual
            .lambda
            .iter()
            .zip(vhat)
            .map(|(&l, &v)| (-eta * v).max(l + eta * v))
            .collect(),
        DualMode::Clipped { lambda_max } => dual
            .lambda
            .iter()
            .zip(vhat)
            .map(|(&l, &v)| (l + eta * v).clamp(0.0, lambda_max))
            .collect(),
        DualMode::Frozen => dual.lambda.clone(),
    };
    DualState::new(lambda, eta, vhat.to_vec(), dual.mode)
}

/// Checks the four multiplier bounds for the augmented rule.
///
/// `previous` is `None` for the initial state. Properties: (1) `lambda >= 0`;
/// (2) `lambda + eta v >= 0`; (3) initially `lambda^2 <= (eta v)^2`;
/// (4) afterwards `lambda^2 >= (eta v)^2`.
pub fn check_multiplier_properties(state: &DualState, previous: Option<&DualState>) -> Result<()> {
    if !matches!(state.mode, DualMode::Augmented { .. }) {
        return state.check_nonnegative();
    }
    let eta = state.eta_lambda;
    let tol = 1e-12;
    for (j, (&l, &v)) in state.lambda.iter().zip(&state.last_vhat).enumerate() {
        let ev = eta * v;
        let fail = |property: u8, value: f64| Error::MultiplierInvariant {
            property,
            index: j,
            value,
        };
        if !(l >= 0.0) {
            return Err(fail(1, l));
        }
        if l + ev < -tol {
            return Err(fail(2, l + ev));
        }
        let scale = tol * (1.0 + l * l + ev * ev);
        match previous {
            None if l * l > ev * ev + scale => return Err(fail(3, l)),
            Some(_) if l * l < ev * ev - scale => return Err(fail(4, l)),
            _ => {}
        }
    }
    Ok(())
}

/// `c_0 + sum_j (lambda_j + eta v_j) c_j` (or the plain Lagrangian cost outside augmented mode).
pub fn augmented_cost(spec: &RcmdpSpec, dual: &DualState) -> Result<CostTable> {
    if dual.n_constraints() != spec.n_constraints() {
        return Err(Error::dim("multipliers", spec.n_constraints(), dual.n_constraints()));
    }
    CostTable::combine(spec.cost0(), spec.costs(), &dual.cost_weights())
}

/// Number of mirror-descent steps per macro-iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InnerIterations {
    Fixed(usize),
    /// `base + ceil(scale ln(max(1, ||lambda||_1)))`.
    LogLambda { base: usize, scale: f64 },
}

impl InnerIterations {
    pub fn count(&self, lambda: &[f64]) -> usize {
        match *self {
            InnerIterations::Fixed(n) => n,
            InnerIterations::LogLambda { base, scale } => {
                let l1: f64 = lambda.iter().map(|l| l.abs()).sum();
                base + math::ceil(scale * math::ln(l1.max(1.0))) as usize
            }
        }
    }
}

/// Policy step size, regularisation strength and inner-loop length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MdConfig {
    pub eta: f64,
    pub alpha: f64,
    pub inner: InnerIterations,
}

impl MdConfig {
    pub fn new(eta: f64, alpha: f64, inner: InnerIterations, gamma: f64) -> Result<Self> {
        let cfg = MdConfig { eta, alpha, inner };
        cfg.validate(gamma)?;
        Ok(cfg)
    }

    /// Settings `alpha = 2 gamma^2 m eta_lambda / (1 - gamma)^3`, `eta = (1 - gamma) / alpha`.
    pub fn theory(gamma: f64, m: usize, eta_lambda: f64, inner: InnerIterations) -> Result<Self> {
        let alpha = 2.0 * gamma * gamma * m as f64 * eta_lambda / math::powf(1.0 - gamma, 3.0);
        if !(alpha > 0.0) {
            return Err(Error::param("alpha", alpha, "theory settings need m >= 1"));
        }
        Self::new((1.0 - gamma) / alpha, alpha, inner, gamma)
    }

    pub fn validate(&self, gamma: f64) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::param("eta", self.eta, "must be positive"));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::param("alpha", self.alpha, "must be nonnegative"));
        }
        if self.eta * self.alpha / (1.0 - gamma) > 1.0 + 1e-12 {
            return Err(Error::param("eta", self.eta, "eta * alpha must not exceed 1 - gamma"));
        }
        Ok(())
    }
}

fn reg_state_cost(
    policy_t: &SoftmaxPolicy,
    anchor: &SoftmaxPolicy,
    kernel: &TransitionKernel,
    c_tilde: &CostTable,
    alpha: f64,
) -> Vec<f64> {
    let na = policy_t.n_actions();
    (0..policy_t.n_states())
        .map(|s| {
            (0..na)
                .map(|a| {
                    let kl = policy_t.log_prob(s, a) - anchor.log_prob(s, a);
                    policy_t.prob(s, a) * (c_tilde.expected(s, a, kernel.row(s, a)) + alpha * kl)
                })
                .sum()
        })
        .collect()
}

fn check_reg_inputs(
    policy_t: &SoftmaxPolicy,
    anchor: &SoftmaxPolicy,
    kernel: &TransitionKernel,
    c_tilde: &CostTable,
    alpha: f64,
    spec: &RcmdpSpec,
) -> Result<()> {
    spec.check_policy(policy_t)?;
    spec.check_policy(anchor)?;
    spec.check_kernel(kernel)?;
    spec.check_cost(c_tilde)?;
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::param("alpha", alpha, "must be nonnegative"));
    }
    Ok(())
}

/// KL-regularised value `E sum gamma^l (c(s_l, a_l) + alpha log(pi_t / pi_k)(a_l | s_l))`.
pub fn regularized_value(
    policy_t: &SoftmaxPolicy,
    anchor: &SoftmaxPolicy,
    kernel: &TransitionKernel,
    c_tilde: &CostTable,
    alpha: f64,
    spec: &RcmdpSpec,
) -> Result<ValueFunction> {
    check_reg_inputs(policy_t, anchor, kernel, c_tilde, alpha, spec)?;
    let n = spec.n_states();
    let pp = model::policy_transition(policy_t, kernel);
    let mut a = pp;
    for i in 0..n {
        for j in 0..n {
            let v = a[i * n + j];
            a[i * n + j] = if i == j { 1.0 } else { 0.0 } - spec.gamma() * v;
        }
    }
    let lu = Lu::factor(a, n)?;
    let per_state = lu.solve(&reg_state_cost(policy_t, anchor, kernel, c_tilde, alpha));
    let at_rho = math::dot(&per_state, spec.rho());
    Ok(ValueFunction { per_state, at_rho })
}

/// Regularised state-action values `c(s,a) + alpha log(1/pi_k(a|s)) + gamma E V_reg(s')`.
pub fn regularized_q(
    policy_t: &SoftmaxPolicy,
    anchor: &SoftmaxPolicy,
    kernel: &TransitionKernel,
    c_tilde: &CostTable,
    alpha: f64,
    spec: &RcmdpSpec,
) -> Result<Vec<f64>> {
    let v = regularized_value(policy_t, anchor, kernel, c_tilde, alpha, spec)?;
    let mut q = model::q_from_values(kernel, c_tilde, &v.per_state, spec.gamma());
    let na = spec.n_actions();
    for (i, qi) in q.iter_mut().enumerate() {
        *qi -= alpha * anchor.log_prob(i / na, i % na);
    }
    Ok(q)
}

/// Closed-form step `pi' ∝ pi_t^{1 - eta alpha / (1 - gamma)} exp(-eta q / (1 - gamma))`, in log space.
pub fn md_update(policy_t: &SoftmaxPolicy, q_hat: &[f64], eta: f64, alpha: f64, gamma: f64) -> Result<SoftmaxPolicy> {
    let (ns, na) = (policy_t.n_states(), policy_t.n_actions());
    if q_hat.len() != ns * na {
        return Err(Error::dim("Q table", ns * na, q_hat.len()));
    }
    if q_hat.iter().any(|q| !q.is_finite()) {
        return Err(Error::NonFinite { what: "Q estimate" });
    }
    let keep = 1.0 - eta * alpha / (1.0 - gamma);
    if keep < -1e-12 {
        return Err(Error::param("eta", eta, "eta * alpha must not exceed 1 - gamma"));
    }
    let keep = keep.max(0.0);
    let step = eta / (1.0 - gamma);
    let logits: Vec<f64> = policy_t
        .logits()
        .iter()
        .zip(q_hat)
        .map(|(&l, &q)| keep * l - step * q)
        .collect();
    SoftmaxPolicy::from_logits(ns, na, logits)
}

/// Occupancy-weighted divergence `sum_s d(s) sum_a pi_a log(pi_a / pi_b)`.
pub fn pseudo_kl(policy_a: &SoftmaxPolicy, policy_b: &SoftmaxPolicy, occupancy_of_a: &OccupancyPair) -> f64 {
    let na = policy_a.n_actions();
    occupancy_of_a
        .d_state
        .iter()
        .enumerate()
        .map(|(s, &d)| {
            if d == 0.0 {
                return 0.0;
            }
            let kl: f64 = (0..na)
                .map(|a| policy_a.prob(s, a) * (policy_a.log_prob(s, a) - policy_b.log_prob(s, a)))
                .sum();
            d * kl
        })
        .sum()
}

/// Source of the regularised Q-values inside the inner loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QEstimator {
    Exact,
    /// Rollouts for iteration `t` use the stream `key.at(key.k, t)`.
    MonteCarlo { m_q: usize, n_q: usize, key: StreamKey },
}

/// Result of one inner mirror-descent loop.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerLoopOutcome {
    pub policy: SoftmaxPolicy,
    /// Exact regularised objective at `rho` before the first step and after each step.
    pub trace: Vec<f64>,
    pub ledger: BudgetLedger,
}

/// Runs `t_k` mirror-descent steps from the anchor on the fixed kernel and augmented cost.
pub fn policy_inner_loop(
    anchor: &SoftmaxPolicy,
    kernel: &TransitionKernel,
    c_tilde: &CostTable,
    cfg: &MdConfig,
    t_k: usize,
    estimator: QEstimator,
    spec: &RcmdpSpec,
) -> Result<InnerLoopOutcome> {
    cfg.validate(spec.gamma())?;
    let mut policy = anchor.clone();
    let mut ledger = BudgetLedger::default();
    let mut trace = Vec::with_capacity(t_k + 1);
    trace.push(regularized_value(&policy, anchor, kernel, c_tilde, cfg.alpha, spec)?.at_rho);
    for t in 0..t_k {
        let q = match estimator {
            QEstimator::Exact => regularized_q(&policy, anchor, kernel, c_tilde, cfg.alpha, spec)?,
            QEstimator::MonteCarlo { m_q, n_q, key } => {
                ledger.charge_q(spec.n_states(), spec.n_actions(), m_q, n_q);
                sampling::estimate_q_reg(
                    &policy,
                    anchor,
                    kernel,
                    c_tilde,
                    cfg.alpha,
                    m_q,
                    n_q,
                    spec,
                    key.at(key.k, t as u64),
                )?
            }
        };
        policy = md_update(&policy, &q, cfg.eta, cfg.alpha, spec.gamma())?;
        trace.push(regularized_value(&policy, anchor, kernel, c_tilde, cfg.alpha, spec)?.at_rho);
    }
    Ok(InnerLoopOutcome { policy, trace, ledger })
}
