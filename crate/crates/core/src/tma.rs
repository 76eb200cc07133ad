//! The adversary: projected transition mirror ascent and conservative policy iteration over kernels.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::model::{self, CostTable, OccupancyPair, RcmdpSpec, StochasticPolicy, TransitionKernel};
use crate::sampling::{self, BudgetLedger, StreamKey};
use crate::uncertainty::{self, UncertaintySet};

/// Step-size schedule for kernel ascent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schedule {
    Fixed,
    /// `eta_p(t) = eta_p(0) / gamma^t`.
    Geometric,
}

/// Source of the action next-state values used by each ascent step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GEstimator {
    Exact,
    /// Step `t` draws from `key.at(key.k, t)`.
    MonteCarlo { m_g: usize, n_g: usize, key: StreamKey },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TmaConfig {
    pub eta_p0: f64,
    pub alpha_p: f64,
    pub schedule: Schedule,
    pub t_prime: usize,
    pub estimator: GEstimator,
    /// Ceiling on the geometric step size. Past it the step already lands on the LMO vertex, and larger
    /// steps only cost precision in the projection.
    pub eta_p_max: f64,
}

impl TmaConfig {
    pub fn new(eta_p0: f64, alpha_p: f64, schedule: Schedule, t_prime: usize, estimator: GEstimator) -> Result<Self> {
        let cfg = TmaConfig {
            eta_p0,
            alpha_p,
            schedule,
            t_prime,
            estimator,
            eta_p_max: 1e6,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta_p0 > 0.0 && self.eta_p0.is_finite()) {
            return Err(Error::param("eta_p0", self.eta_p0, "must be positive"));
        }
        if !(self.alpha_p > 0.0 && self.alpha_p.is_finite()) {
            return Err(Error::param("alpha_p", self.alpha_p, "must be positive"));
        }
        if self.t_prime == 0 {
            return Err(Error::param("t_prime", 0.0, "must be at least 1"));
        }
        if !(self.eta_p_max >= self.eta_p0) {
            return Err(Error::param("eta_p_max", self.eta_p_max, "must be at least eta_p0"));
        }
        Ok(())
    }

    /// `eta_p(t)`.
    pub fn step_size(&self, t: usize, gamma: f64) -> f64 {
        match self.schedule {
            Schedule::Fixed => self.eta_p0,
            Schedule::Geometric => (self.eta_p0 * math::powf(gamma, -(t as f64))).min(self.eta_p_max),
        }
    }
}

/// `(1/(1-gamma)) d(s) pi(a|s) G(s,a,s')` for an arbitrary cost table.
pub fn transition_gradient_for_cost<P: StochasticPolicy + ?Sized>(
    policy: &P,
    kernel: &TransitionKernel,
    cost: &CostTable,
    spec: &RcmdpSpec,
) -> Result<Vec<f64>> {
    let g = model::g_values(policy, kernel, cost, spec)?;
    let occ = model::occupancy(policy, kernel, spec)?;
    Ok(weight_by_occupancy(&g, &occ, spec))
}

fn weight_by_occupancy(g: &[f64], occ: &OccupancyPair, spec: &RcmdpSpec) -> Vec<f64> {
    let ns = spec.n_states();
    let scale = 1.0 / (1.0 - spec.gamma());
    g.chunks(ns)
        .zip(&occ.d_state_action)
        .flat_map(|(row, &w)| row.iter().map(move |x| scale * w * x))
        .collect()
}

/// Gradient of the Lagrangian value with respect to the kernel entries.
pub fn transition_gradient<P: StochasticPolicy + ?Sized>(
    policy: &P,
    kernel: &TransitionKernel,
    lambda: &[f64],
    spec: &RcmdpSpec,
) -> Result<Vec<f64>> {
    let cost = model::lagrangian_cost(spec, lambda)?;
    transition_gradient_for_cost(policy, kernel, &cost, spec)
}

/// One ascent step `project(p + (eta_p / alpha_p) (1/(1-gamma)) d(s,a) G(s,a,.))`.
pub fn tma_step(
    kernel_t: &TransitionKernel,
    g_hat: &[f64],
    occupancy: &OccupancyPair,
    step: f64,
    gamma: f64,
    set: &UncertaintySet,
) -> Result<TransitionKernel> {
    let ns = kernel_t.n_states();
    if g_hat.len() != kernel_t.as_slice().len() {
        return Err(Error::dim("G table", kernel_t.as_slice().len(), g_hat.len()));
    }
    if occupancy.d_state_action.len() != kernel_t.n_rows() {
        return Err(Error::dim("occupancy", kernel_t.n_rows(), occupancy.d_state_action.len()));
    }
    if g_hat.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite { what: "G estimate" });
    }
    let scale = step / (1.0 - gamma);
    let candidate: Vec<f64> = kernel_t
        .as_slice()
        .chunks(ns)
        .zip(g_hat.chunks(ns))
        .zip(&occupancy.d_state_action)
        .flat_map(|((p, g), &w)| p.iter().zip(g).map(move |(pi, gi)| pi + scale * w * gi))
        .collect();
    uncertainty::project(&candidate, set)
}

/// Result of an approximate-TMA run.
#[derive(Debug, Clone, PartialEq)]
pub struct TmaOutcome {
    pub kernel: TransitionKernel,
    /// Exact adversarial value at `rho` for the starting kernel and after each step.
    pub values: Vec<f64>,
    pub ledger: BudgetLedger,
}

/// `t'` ascent steps on the value of `cost` under `policy`, starting from `start`.
pub fn approximate_tma<P: StochasticPolicy + ?Sized>(
    policy: &P,
    cost: &CostTable,
    set: &UncertaintySet,
    cfg: &TmaConfig,
    spec: &RcmdpSpec,
    start: &TransitionKernel,
) -> Result<TmaOutcome> {
    cfg.validate()?;
    spec.check_cost(cost)?;
    start.same_shape(set.nominal())?;
    let mut kernel = start.clone();
    let mut ledger = BudgetLedger::default();
    let mut values = Vec::with_capacity(cfg.t_prime + 1);
    values.push(model::value(policy, &kernel, cost, spec)?.at_rho);
    for t in 0..cfg.t_prime {
        let occ = model::occupancy(policy, &kernel, spec)?;
        let g = match cfg.estimator {
            GEstimator::Exact => model::g_values(policy, &kernel, cost, spec)?,
            GEstimator::MonteCarlo { m_g, n_g, key } => {
                ledger.charge_g(spec.n_states(), spec.n_actions(), m_g, n_g);
                sampling::estimate_g(policy, &kernel, cost, m_g, n_g, spec, key.at(key.k, t as u64))?
            }
        };
        let step = cfg.step_size(t, spec.gamma()) / cfg.alpha_p;
        kernel = tma_step(&kernel, &g, &occ, step, spec.gamma(), set)?;
        values.push(model::value(policy, &kernel, cost, spec)?.at_rho);
    }
    Ok(TmaOutcome {
        kernel,
        values,
        ledger,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CpiConfig {
    pub eps_prime: f64,
    pub max_iters: usize,
}

impl CpiConfig {
    pub fn new(eps_prime: f64, max_iters: usize) -> Result<Self> {
        if !(eps_prime > 0.0) {
            return Err(Error::param("eps_prime", eps_prime, "must be positive"));
        }
        Ok(CpiConfig { eps_prime, max_iters })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CpiStatus {
    Converged,
    MaxIters,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CpiOutcome {
    pub kernel: TransitionKernel,
    /// Frank-Wolfe gap at every visited iterate, including the last.
    pub gaps: Vec<f64>,
    pub status: CpiStatus,
}

impl CpiOutcome {
    pub fn final_gap(&self) -> f64 {
        *self.gaps.last().expect("at least one gap is always recorded")
    }
}

/// Conservative step size `min(1, gap (1-gamma)^3 / (4 gamma^2))`.
pub fn cpi_step_size(gap: f64, gamma: f64) -> f64 {
    (gap * math::powf(1.0 - gamma, 3.0) / (4.0 * gamma * gamma)).min(1.0)
}

/// Frank-Wolfe ascent on the kernel with conservative mixing, stopping once the gap is at most `eps_prime`.
pub fn cpi<P: StochasticPolicy + ?Sized>(
    policy: &P,
    cost: &CostTable,
    set: &UncertaintySet,
    cfg: &CpiConfig,
    spec: &RcmdpSpec,
    start: &TransitionKernel,
) -> Result<CpiOutcome> {
    spec.check_cost(cost)?;
    start.same_shape(set.nominal())?;
    let mut kernel = start.clone();
    let mut gaps = Vec::new();
    for _ in 0..=cfg.max_iters {
        let grad = transition_gradient_for_cost(policy, &kernel, cost, spec)?;
        let target = uncertainty::linear_maximize(&grad, set)?;
        let gap: f64 = grad
            .iter()
            .zip(target.as_slice().iter().zip(kernel.as_slice()))
            .map(|(g, (q, p))| g * (q - p))
            .sum();
        gaps.push(gap);
        if gap <= cfg.eps_prime {
            return Ok(CpiOutcome {
                kernel,
                gaps,
                status: CpiStatus::Converged,
            });
        }
        if gaps.len() > cfg.max_iters {
            break;
        }
        kernel = kernel.mix(&target, cpi_step_size(gap, spec.gamma()));
    }
    Ok(CpiOutcome {
        kernel,
        gaps,
        status: CpiStatus::MaxIters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cpi_step_example() {
        assert!((cpi_step_size(0.1, 0.5) - 0.0125).abs() < 1e-15);
        assert_eq!(cpi_step_size(100.0, 0.5), 1.0);
    }

    #[test]
    fn geometric_schedule_grows_and_caps() {
        let mut cfg = TmaConfig::new(1.0, 1.0, Schedule::Geometric, 3, GEstimator::Exact).unwrap();
        assert!((cfg.step_size(2, 0.5) - 4.0).abs() < 1e-15);
        cfg.eta_p_max = 3.0;
        assert_eq!(cfg.step_size(2, 0.5), 3.0);
    }
}
