//! Turns a config into core objects and runs training and sweeps.

use std::path::Path;

use rayon::prelude::*;
use rcmdp_core::driver::{self, Adversary, Oracle, SampleSizes, TrainingConfig, TrainingOutcome, WarmStart};
use rcmdp_core::instances::{self, Instance};
use rcmdp_core::policy_md::{DualMode, InnerIterations, MdConfig};
use rcmdp_core::protocol::{self, SweepTable};
use rcmdp_core::sampling::{self, MacroSampleSizes};
use rcmdp_core::tma::{CpiConfig, GEstimator, Schedule, TmaConfig};
use rcmdp_core::{NonRectSet, Norm, RcmdpSpec, RectSet, StochasticPolicy, TransitionKernel, UncertaintySet};

use crate::config::{
    DualChoice, ExperimentConfig, InnerSolver, Mode, NormChoice, ProblemConfig, SamplingBlock, ScheduleChoice,
    UncertaintyConfig, WarmStartChoice,
};
use crate::error::{HarnessError, Result};
use crate::spec_file::SpecFile;

/// A fully resolved experiment.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub spec: RcmdpSpec,
    pub set: UncertaintySet,
    pub training: TrainingConfig,
    pub levels: Vec<f64>,
    pub lambda_max: f64,
}

/// Loads or generates the problem; relative spec paths resolve against `base_dir`.
pub fn load_problem(problem: &ProblemConfig, base_dir: &Path) -> Result<(RcmdpSpec, TransitionKernel)> {
    let built = match *problem {
        ProblemConfig::File { ref path } => return SpecFile::load(&base_dir.join(path)),
        ProblemConfig::Random {
            states,
            actions,
            constraints,
            gamma,
            seed,
        } => instances::random_rcmdp(states, actions, constraints, gamma, seed),
        ProblemConfig::Slater { gamma, seed } => instances::slater_instance(gamma, seed),
        ProblemConfig::Tension { gamma } => instances::tension_chain(gamma),
        ProblemConfig::Inventory { gamma } => instances::inventory_chain(gamma),
    };
    let Instance { spec, nominal } = built.map_err(HarnessError::core("building the problem"))?;
    Ok((spec, nominal))
}

pub fn build_set(cfg: &UncertaintyConfig, nominal: TransitionKernel) -> Result<UncertaintySet> {
    let set = match cfg {
        UncertaintyConfig::Rect { norm, radius, groups } => {
            let norm = match norm {
                NormChoice::L1 => Norm::L1,
                NormChoice::L2 => Norm::L2,
                NormChoice::Linf => Norm::Linf,
            };
            let mut set = RectSet::uniform(nominal, norm, *radius).map_err(HarnessError::core("uncertainty set"))?;
            if let Some(g) = groups {
                set = set.with_groups(g.clone()).map_err(HarnessError::core("uncertainty set"))?;
            }
            UncertaintySet::Rect(set)
        }
        UncertaintyConfig::NonRect { budget } => {
            UncertaintySet::NonRect(NonRectSet::new(nominal, *budget).map_err(HarnessError::core("uncertainty set"))?)
        }
    };
    Ok(set)
}

fn sample_sizes(s: &SamplingBlock, spec: &RcmdpSpec, inner: usize, t_prime: usize) -> Result<SampleSizes> {
    let gamma = spec.gamma();
    let ctx = HarnessError::core("sample sizes");
    let derived = (|| -> rcmdp_core::Result<SampleSizes> {
        let macro_sizes = MacroSampleSizes::for_iteration(gamma, s.eps, s.delta, s.lambda_l1, inner)?;
        let n_g = match s.n_g {
            Some(n) => n,
            None => sampling::truncation_horizon(gamma, s.eps, 1.0 + s.lambda_l1)?,
        };
        let m_g = match s.m_g {
            Some(m) => m,
            None => sampling::g_samples(gamma, n_g, spec.n_states(), spec.n_actions(), t_prime, s.delta)?,
        };
        Ok(SampleSizes {
            m_v: s.m_v.unwrap_or(macro_sizes.m_v),
            n_v: s.n_v.unwrap_or(macro_sizes.n_v),
            m_q: s.m_q.unwrap_or(macro_sizes.m_q),
            n_q: s.n_q.unwrap_or(macro_sizes.n_q),
            m_g,
            n_g,
        })
    })();
    let sizes = derived.map_err(ctx)?;
    let counts = [sizes.m_v, sizes.n_v, sizes.m_q, sizes.n_q, sizes.m_g, sizes.n_g];
    if counts.contains(&0) {
        return Err(HarnessError::Invalid("sample counts and horizons must be at least 1".into()));
    }
    Ok(sizes)
}

impl Experiment {
    pub fn from_config(cfg: &ExperimentConfig, base_dir: &Path) -> Result<Self> {
        let (spec, nominal) = load_problem(&cfg.problem, base_dir)?;
        spec.check_kernel(&nominal).map_err(HarnessError::core("nominal kernel"))?;
        let set = build_set(&cfg.uncertainty, nominal)?;
        let gamma = spec.gamma();

        let inner = match cfg.md.inner_scale {
            None => InnerIterations::Fixed(cfg.md.inner_iterations),
            Some(scale) => InnerIterations::LogLambda {
                base: cfg.md.inner_iterations,
                scale,
            },
        };
        let md = match (cfg.md.eta, cfg.md.alpha) {
            (None, None) => MdConfig::theory(gamma, spec.n_constraints(), cfg.dual.eta_lambda, inner),
            (None, Some(alpha)) => MdConfig::new((1.0 - gamma) / alpha, alpha, inner, gamma),
            (Some(eta), alpha) => MdConfig::new(eta, alpha.unwrap_or(0.0), inner, gamma),
        }
        .map_err(HarnessError::core("md block"))?;

        let tma = TmaConfig {
            eta_p0: cfg.tma.eta_p0,
            alpha_p: cfg.tma.alpha_p,
            schedule: match cfg.tma.schedule {
                ScheduleChoice::Fixed => Schedule::Fixed,
                ScheduleChoice::Geometric => Schedule::Geometric,
            },
            t_prime: cfg.tma.steps,
            estimator: GEstimator::Exact,
            eta_p_max: cfg.tma.eta_p_max,
        };
        tma.validate().map_err(HarnessError::core("tma block"))?;
        let adversary = match cfg.inner_solver {
            InnerSolver::Tma => Adversary::Tma(tma),
            InnerSolver::Cpi => Adversary::Cpi(
                CpiConfig::new(cfg.cpi.eps_prime, cfg.cpi.max_iters).map_err(HarnessError::core("cpi block"))?,
            ),
        };
        let dual_mode = match cfg.dual.mode {
            DualChoice::Augmented => DualMode::Augmented { bound: cfg.dual.bound },
            DualChoice::Clipped => DualMode::Clipped {
                lambda_max: cfg
                    .dual
                    .lambda_max
                    .ok_or_else(|| HarnessError::Invalid("clipped duals need dual.lambda_max".into()))?,
            },
            DualChoice::Frozen => DualMode::Frozen,
        };
        let oracle = match cfg.mode {
            Mode::Exact => Oracle::Exact,
            Mode::Sampled => Oracle::Sampled(sample_sizes(&cfg.sampling, &spec, cfg.md.inner_iterations, cfg.tma.steps)?),
        };
        if cfg.iterations == 0 {
            return Err(HarnessError::Invalid("iterations must be at least 1".into()));
        }
        if let Some(x) = cfg.sweep.levels.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(HarnessError::Invalid(format!("sweep level {x} outside [0, 1]")));
        }
        if !(cfg.sweep.lambda_max >= 0.0) {
            return Err(HarnessError::Invalid("sweep.lambda_max must be nonnegative".into()));
        }

        Ok(Experiment {
            spec,
            set,
            training: TrainingConfig {
                iterations: cfg.iterations,
                md,
                adversary,
                dual_mode,
                eta_lambda: cfg.dual.eta_lambda,
                oracle,
                warm_start: match cfg.warm_start {
                    WarmStartChoice::Previous => WarmStart::Previous,
                    WarmStartChoice::Nominal => WarmStart::Nominal,
                },
                seed: cfg.seed,
            },
            levels: cfg.sweep.levels.clone(),
            lambda_max: cfg.sweep.lambda_max,
        })
    }

    pub fn train(&self) -> Result<TrainingOutcome> {
        driver::run_training(&self.spec, &self.set, &self.training).map_err(HarnessError::core("training"))
    }

    /// Number of sign dimensions in the sweep.
    pub fn n_groups(&self) -> Result<usize> {
        Ok(self.rect_set()?.n_groups())
    }

    fn rect_set(&self) -> Result<&RectSet> {
        match &self.set {
            UncertaintySet::Rect(r) => Ok(r),
            UncertaintySet::NonRect(_) => Err(HarnessError::Invalid(
                "the robustness sweep needs a rectangular uncertainty set".into(),
            )),
        }
    }

    /// Evaluates `policy` on every distorted kernel, in parallel, rows in plan order.
    pub fn sweep<P: StochasticPolicy + Sync + ?Sized>(&self, policy: &P) -> Result<SweepTable> {
        let set = self.rect_set()?;
        let rows = protocol::sweep_plan(&self.levels, set.n_groups())
            .into_par_iter()
            .map(|(x, signs)| protocol::evaluate_row(policy, set, x, &signs, &self.spec, self.lambda_max))
            .collect::<rcmdp_core::Result<Vec<_>>>()
            .map_err(HarnessError::core("robustness sweep"))?;
        Ok(SweepTable {
            n_constraints: self.spec.n_constraints(),
            rows,
        })
    }
}
