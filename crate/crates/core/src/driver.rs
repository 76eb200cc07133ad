//! The primal-dual training loop: inner policy mirror descent, adversarial kernel update, multiplier step.

use alloc::boxed::Box;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::{self, CostTable, RcmdpSpec, SoftmaxPolicy, TransitionKernel};
use crate::policy_md::{self, DualMode, DualState, MdConfig, QEstimator};
use crate::sampling::{self, BudgetLedger, Purpose, StreamKey};
use crate::tma::{self, CpiConfig, GEstimator, TmaConfig};
use crate::uncertainty::{self, UncertaintySet};

/// Inner solver for the adversarial kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Adversary {
    Tma(TmaConfig),
    Cpi(CpiConfig),
}

/// Kernel each adversarial solve starts from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WarmStart {
    Previous,
    Nominal,
}

/// Explicit Monte-Carlo sample counts and horizons.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleSizes {
    pub m_v: usize,
    pub n_v: usize,
    pub m_q: usize,
    pub n_q: usize,
    pub m_g: usize,
    pub n_g: usize,
}

/// Exact linear-solve oracles, or Monte-Carlo estimates from the generative model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Oracle {
    Exact,
    Sampled(SampleSizes),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingConfig {
    pub iterations: usize,
    pub md: MdConfig,
    pub adversary: Adversary,
    pub dual_mode: DualMode,
    pub eta_lambda: f64,
    pub oracle: Oracle,
    pub warm_start: WarmStart,
    pub seed: u64,
}

/// One macro-iteration's record. Values are exact even when training on estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub k: usize,
    /// `V_{pi_{k+1}, p_{k+1}}(rho)` for the objective cost.
    pub value: f64,
    /// Constraint values at the same pair.
    pub constraint_values: Vec<f64>,
    /// `V_{pi_{k+1}, p_{k+1}}(rho; lambda_k)`, the Lagrangian against which the kernel was optimised.
    pub lagrangian: f64,
    /// Multipliers after the update, `lambda_{k+1}`.
    pub lambda: Vec<f64>,
    pub kernel_linf_dev: f64,
    /// Occupancy-weighted divergence between consecutive policies.
    pub pkl_step: f64,
    /// Generative-model queries spent so far, including the initial estimate.
    pub budget_t: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunLog {
    pub n_constraints: usize,
    pub rows: Vec<RunRow>,
}

impl RunLog {
    /// Mean of each constraint value over all rows.
    pub fn average_constraints(&self) -> Vec<f64> {
        let n = self.rows.len().max(1) as f64;
        (0..self.n_constraints)
            .map(|j| self.rows.iter().map(|r| r.constraint_values[j]).sum::<f64>() / n)
            .collect()
    }

    pub fn average_lagrangian(&self) -> f64 {
        let n = self.rows.len().max(1) as f64;
        self.rows.iter().map(|r| r.lagrangian).sum::<f64>() / n
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingOutcome {
    pub policy: SoftmaxPolicy,
    pub kernel: TransitionKernel,
    pub dual: DualState,
    pub log: RunLog,
    pub ledger: BudgetLedger,
}

fn constraint_estimates(
    policy: &SoftmaxPolicy,
    kernel: &TransitionKernel,
    spec: &RcmdpSpec,
    cfg: &TrainingConfig,
    k: u64,
    ledger: &mut BudgetLedger,
) -> Result<Vec<f64>> {
    match cfg.oracle {
        Oracle::Exact => Ok(model::all_values(policy, kernel, spec)?[1..].to_vec()),
        Oracle::Sampled(sizes) => {
            let tables: Vec<&CostTable> = spec.costs().iter().collect();
            ledger.charge_v(sizes.m_v, sizes.n_v);
            let key = StreamKey::new(cfg.seed, Purpose::Value).at(k, 0);
            sampling::estimate_v(policy, kernel, &tables, sizes.m_v, sizes.n_v, spec, key)
        }
    }
}

fn at_iteration<T>(k: usize, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::MacroIteration {
        k,
        source: Box::new(e),
    })
}

/// Runs `cfg.iterations` macro-iterations from the uniform policy and the nominal kernel.
pub fn run_training(spec: &RcmdpSpec, set: &UncertaintySet, cfg: &TrainingConfig) -> Result<TrainingOutcome> {
    run_training_observed(spec, set, cfg, |_, _, _| {})
}

/// [`run_training`] that also hands every iterate to `observe` as
/// `(k, pi_{k+1}, lambda_k)`, where `lambda_k` are the multipliers the kernel was optimised against.
pub fn run_training_observed<F>(spec: &RcmdpSpec, set: &UncertaintySet, cfg: &TrainingConfig, mut observe: F) -> Result<TrainingOutcome>
where
    F: FnMut(usize, &SoftmaxPolicy, &[f64]),
{
    cfg.md.validate(spec.gamma())?;
    spec.check_kernel(set.nominal())?;
    let (ns, na) = (spec.n_states(), spec.n_actions());
    let nominal = set.nominal().clone();
    let mut ledger = BudgetLedger::default();
    let mut policy = SoftmaxPolicy::uniform(ns, na);
    let mut kernel = nominal.clone();

    let vhat0 = constraint_estimates(&policy, &kernel, spec, cfg, 0, &mut ledger)?;
    let mut dual = DualState::initialize(&vhat0, cfg.eta_lambda, cfg.dual_mode)?;
    policy_md::check_multiplier_properties(&dual, None)?;

    let mut log = RunLog {
        n_constraints: spec.n_constraints(),
        rows: Vec::with_capacity(cfg.iterations),
    };
    for k in 0..cfg.iterations {
        let step = (|| -> Result<(SoftmaxPolicy, TransitionKernel, DualState, RunRow)> {
            let c_tilde = policy_md::augmented_cost(spec, &dual)?;
            let t_k = cfg.md.inner.count(dual.lambda());
            let q_est = match cfg.oracle {
                Oracle::Exact => QEstimator::Exact,
                Oracle::Sampled(s) => QEstimator::MonteCarlo {
                    m_q: s.m_q,
                    n_q: s.n_q,
                    key: StreamKey::new(cfg.seed, Purpose::QValue).at(k as u64, 0),
                },
            };
            let inner = policy_md::policy_inner_loop(&policy, &kernel, &c_tilde, &cfg.md, t_k, q_est, spec)?;
            ledger.q_queries += inner.ledger.q_queries;
            let next_policy = inner.policy;

            let lag_cost = model::lagrangian_cost(spec, dual.lambda())?;
            let start = match cfg.warm_start {
                WarmStart::Previous => &kernel,
                WarmStart::Nominal => &nominal,
            };
            let next_kernel = match cfg.adversary {
                Adversary::Tma(tma_cfg) => {
                    let mut tma_cfg = tma_cfg;
                    tma_cfg.estimator = match cfg.oracle {
                        Oracle::Exact => GEstimator::Exact,
                        Oracle::Sampled(s) => GEstimator::MonteCarlo {
                            m_g: s.m_g,
                            n_g: s.n_g,
                            key: StreamKey::new(cfg.seed, Purpose::GValue).at(k as u64, 0),
                        },
                    };
                    let out = tma::approximate_tma(&next_policy, &lag_cost, set, &tma_cfg, spec, start)?;
                    ledger.g_queries += out.ledger.g_queries;
                    out.kernel
                }
                Adversary::Cpi(cpi_cfg) => tma::cpi(&next_policy, &lag_cost, set, &cpi_cfg, spec, start)?.kernel,
            };
            let feasibility = uncertainty::contains(&next_kernel, set);
            if !feasibility.inside {
                return Err(Error::ProjectionFailed {
                    residual: feasibility.violation,
                });
            }

            let exact = model::all_values(&next_policy, &next_kernel, spec)?;
            let lagrangian = exact[0]
                + exact[1..]
                    .iter()
                    .zip(dual.lambda())
                    .map(|(v, l)| v * l)
                    .sum::<f64>();
            let vhat = constraint_estimates(&next_policy, &next_kernel, spec, cfg, k as u64 + 1, &mut ledger)?;
            let next_dual = policy_md::dual_update(&dual, &vhat)?;
            policy_md::check_multiplier_properties(&next_dual, Some(&dual))?;

            let occ = model::occupancy(&next_policy, &next_kernel, spec)?;
            let row = RunRow {
                k,
                value: exact[0],
                constraint_values: exact[1..].to_vec(),
                lagrangian,
                lambda: next_dual.lambda().to_vec(),
                kernel_linf_dev: next_kernel.linf_distance(&nominal),
                pkl_step: policy_md::pseudo_kl(&next_policy, &policy, &occ),
                budget_t: ledger.total(),
            };
            Ok((next_policy, next_kernel, next_dual, row))
        })();
        let (p, kern, d, row) = at_iteration(k, step)?;
        observe(k, &p, dual.lambda());
        policy = p;
        kernel = kern;
        dual = d;
        log.rows.push(row);
    }
    Ok(TrainingOutcome {
        policy,
        kernel,
        dual,
        log,
        ledger,
    })
}
