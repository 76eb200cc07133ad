//! Invariant suite for the `check` subcommand.
//!
//! Each check runs on the configured instance with seeded random policies and
//! kernels, and reports the worst discrepancy it saw against its tolerance.

use rand::Rng;
use rcmdp_core::instances::{random_kernel, random_policy};
use rcmdp_core::policy_md::{self, DualMode, DualState};
use rcmdp_core::sampling::{Purpose, StreamKey};
use rcmdp_core::tma::{self, GEstimator, Schedule, TmaConfig};
use rcmdp_core::{
    model, uncertainty, PerfDiffForm, RcmdpSpec, SoftmaxPolicy, StochasticPolicy, TransitionKernel, UncertaintySet,
};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub worst: f64,
    pub tolerance: f64,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.worst <= self.tolerance
    }
}

const TRIALS: usize = 10;

fn worst_of(name: &'static str, tolerance: f64, errs: impl IntoIterator<Item = rcmdp_core::Result<f64>>) -> CheckResult {
    let worst = errs.into_iter().fold(0.0f64, |w, e| match e {
        Ok(e) if e.is_nan() => f64::INFINITY,
        Ok(e) => w.max(e),
        Err(_) => f64::INFINITY,
    });
    CheckResult { name, worst, tolerance }
}

/// A kernel inside `set`, a random fraction of the way to a random kernel, projected back.
fn random_member<R: Rng>(set: &UncertaintySet, rng: &mut R) -> rcmdp_core::Result<TransitionKernel> {
    let nominal = set.nominal();
    let other = random_kernel(nominal.n_states(), nominal.n_actions(), 0.05, rng);
    let mixed = nominal.mix(&other, rng.gen::<f64>());
    uncertainty::project(mixed.as_slice(), set)
}

pub fn run_checks(spec: &RcmdpSpec, set: &UncertaintySet, seed: u64) -> Vec<CheckResult> {
    let (ns, na, m) = (spec.n_states(), spec.n_actions(), spec.n_constraints());
    let gamma = spec.gamma();
    let mut rng = StreamKey::new(seed, Purpose::Other(100)).rng();
    let policies: Vec<SoftmaxPolicy> = (0..TRIALS).map(|_| random_policy(ns, na, 2.0, &mut rng)).collect();
    let kernels: Vec<TransitionKernel> = (0..TRIALS)
        .map(|_| random_member(set, &mut rng))
        .collect::<rcmdp_core::Result<_>>()
        .unwrap_or_default();
    let lambdas: Vec<Vec<f64>> = (0..TRIALS)
        .map(|_| (0..m).map(|_| rng.gen_range(0.0..3.0)).collect())
        .collect();
    let mut out = Vec::new();

    out.push(CheckResult {
        name: "nominal kernel rows sum to one",
        worst: set.nominal().max_row_deviation(),
        tolerance: 1e-10,
    });

    out.push(CheckResult {
        name: "sampled kernels lie in the set",
        worst: if kernels.len() == TRIALS {
            kernels
                .iter()
                .map(|k| uncertainty::contains(k, set).violation)
                .fold(0.0, f64::max)
        } else {
            f64::INFINITY
        },
        tolerance: 1e-8,
    });

    out.push(worst_of(
        "occupancy solves the flow equation",
        1e-10,
        policies.iter().zip(&kernels).map(|(pi, p)| {
            let occ = model::occupancy(pi, p, spec)?;
            let step = model::policy_transition(pi, p);
            let residual = (0..ns)
                .map(|n| {
                    let inflow: f64 = (0..ns).map(|s| occ.d_state[s] * step[s * ns + n]).sum();
                    (occ.d_state[n] - (1.0 - gamma) * spec.rho()[n] - gamma * inflow).abs()
                })
                .fold(0.0, f64::max);
            let mass = (occ.d_state.iter().sum::<f64>() - 1.0).abs();
            Ok(residual.max(mass))
        }),
    ));

    out.push(worst_of(
        "values within the cost bound",
        1e-9,
        policies.iter().zip(&kernels).map(|(pi, p)| {
            let mut excess = 0.0f64;
            for cost in std::iter::once(spec.cost0()).chain(spec.costs()) {
                let bound = cost.max_abs() / (1.0 - gamma);
                let v = model::value(pi, p, cost, spec)?;
                excess = v.per_state.iter().fold(excess, |e, x| e.max(x.abs() - bound));
            }
            Ok(excess)
        }),
    ));

    out.push(worst_of(
        "Lagrangian value equals the weighted sum",
        1e-9,
        policies.iter().zip(&kernels).zip(&lambdas).map(|((pi, p), l)| {
            let direct = model::lagrangian_value(pi, p, l, spec)?;
            let v = model::all_values(pi, p, spec)?;
            let sum = v[0] + v[1..].iter().zip(l).map(|(a, b)| a * b).sum::<f64>();
            Ok((direct - sum).abs())
        }),
    ));

    out.push(worst_of(
        "performance difference across kernels",
        1e-9,
        policies.iter().zip(&kernels).flat_map(|(pi, q)| {
            [PerfDiffForm::OccupancyOfSecond, PerfDiffForm::OccupancyOfFirst].map(|form| {
                let (lhs, rhs) = model::perf_diff_terms(pi, set.nominal(), q, spec.cost0(), spec, form)?;
                Ok((lhs - rhs).abs())
            })
        }),
    ));

    out.push(worst_of(
        "mismatch coefficient at least one",
        0.0,
        policies.iter().zip(&kernels).map(|(pi, p)| {
            let mc = model::mismatch_coefficient(pi, p, spec)?;
            Ok(if mc.is_finite() { (1.0 - 1e-12 - mc).max(0.0) } else { f64::INFINITY })
        }),
    ));

    let mut fd_rng = StreamKey::new(seed, Purpose::Other(101)).rng();
    out.push(worst_of(
        "transition gradient matches finite differences",
        1e-4,
        policies.iter().zip(&kernels).zip(&lambdas).map(|((pi, p), l)| {
            let grad = tma::transition_gradient(pi, p, l, spec)?;
            // zero-sum direction per row keeps the perturbed rows on the simplex plane
            let dir: Vec<f64> = p
                .as_slice()
                .chunks(ns)
                .flat_map(|_| {
                    let raw: Vec<f64> = (0..ns).map(|_| fd_rng.gen_range(-1.0..1.0)).collect();
                    let mean = raw.iter().sum::<f64>() / ns as f64;
                    raw.into_iter().map(move |x| x - mean)
                })
                .collect();
            let cost = model::lagrangian_cost(spec, l)?;
            let h = 1e-6;
            let shifted = |sign: f64| {
                let raw: Vec<f64> = p.as_slice().iter().zip(&dir).map(|(a, d)| a + sign * h * d).collect();
                TransitionKernel::new(ns, na, raw)
            };
            let vp = model::value(pi, &shifted(1.0)?, &cost, spec)?.at_rho;
            let vm = model::value(pi, &shifted(-1.0)?, &cost, spec)?.at_rho;
            let fd = (vp - vm) / (2.0 * h);
            let an: f64 = grad.iter().zip(&dir).map(|(g, d)| g * d).sum();
            Ok((fd - an).abs() / an.abs().max(1e-3))
        }),
    ));

    let tma_cfg = TmaConfig::new(0.1, 1.0, Schedule::Geometric, 20, GEstimator::Exact).expect("fixed settings are valid");
    out.push(worst_of(
        "kernel ascent never decreases the Lagrangian",
        1e-10,
        policies.iter().zip(&lambdas).map(|(pi, l)| {
            let cost = model::lagrangian_cost(spec, l)?;
            let run = tma::approximate_tma(pi, &cost, set, &tma_cfg, spec, set.nominal())?;
            Ok(run.values.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max))
        }),
    ));

    out.push(worst_of(
        "mirror-descent step has normalised rows",
        1e-12,
        policies.iter().zip(&kernels).map(|(pi, p)| {
            let q = model::q_values(pi, p, spec.cost0(), spec)?;
            let next = policy_md::md_update(pi, &q, 0.5 * (1.0 - gamma), 1.0, gamma)?;
            Ok(next
                .probs()
                .chunks(na)
                .map(|r| (r.iter().sum::<f64>() - 1.0).abs())
                .fold(0.0, f64::max))
        }),
    ));

    out.push(worst_of(
        "multiplier invariants along a dual sequence",
        0.0,
        (0..TRIALS).map(|_| {
            let mut vhat: Vec<f64> = (0..m).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let mut dual = DualState::initialize(&vhat, 0.5, DualMode::Augmented { bound: None })?;
            policy_md::check_multiplier_properties(&dual, None)?;
            for _ in 0..20 {
                vhat = (0..m).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let next = policy_md::dual_update(&dual, &vhat)?;
                policy_md::check_multiplier_properties(&next, Some(&dual))?;
                dual = next;
            }
            Ok(0.0)
        }),
    ));

    out
}
