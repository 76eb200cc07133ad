//! Robustness sweep over distorted kernels and penalised-return statistics.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::{self, RcmdpSpec, StochasticPolicy};
use crate::uncertainty::{self, RectSet, Sign};

/// `(v - lambda_max sum max(0, c_j), v - lambda_max sum c_j)`.
pub fn penalized_return(v: f64, c: &[f64], lambda_max: f64) -> Result<(f64, f64)> {
    if !(lambda_max >= 0.0) {
        return Err(Error::param("lambda_max", lambda_max, "must be nonnegative"));
    }
    let positive: f64 = c.iter().map(|x| x.max(0.0)).sum();
    let signed: f64 = c.iter().sum();
    Ok((v - lambda_max * positive, v - lambda_max * signed))
}

/// One evaluation of the policy on a distorted kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub level: f64,
    pub signs: Vec<Sign>,
    /// Negated objective cost, `-V(rho)`.
    pub ret: f64,
    /// Constraint values `V^j(rho)`.
    pub constraints: Vec<f64>,
    pub r_pen: f64,
    pub r_pen_signed: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepTable {
    pub n_constraints: usize,
    pub rows: Vec<SweepRow>,
}

/// Every `(level, signs)` pair in output order: levels outermost, signs in [`Sign::enumerate`] order.
pub fn sweep_plan(levels: &[f64], n_groups: usize) -> Vec<(f64, Vec<Sign>)> {
    let signs = Sign::enumerate(n_groups);
    levels
        .iter()
        .flat_map(|&x| signs.iter().map(move |s| (x, s.clone())))
        .collect()
}

/// Evaluates the policy exactly on `distort(set, level, signs)`.
pub fn evaluate_row<P: StochasticPolicy + ?Sized>(
    policy: &P,
    set: &RectSet,
    level: f64,
    signs: &[Sign],
    spec: &RcmdpSpec,
    lambda_max: f64,
) -> Result<SweepRow> {
    let kernel = uncertainty::distort(set, level, signs)?;
    let values = model::all_values(policy, &kernel, spec)?;
    let ret = -values[0];
    let constraints = values[1..].to_vec();
    let (r_pen, r_pen_signed) = penalized_return(ret, &constraints, lambda_max)?;
    Ok(SweepRow {
        level,
        signs: signs.to_vec(),
        ret,
        constraints,
        r_pen,
        r_pen_signed,
    })
}

/// One row per distortion level and sign vector, `|levels| * 2^n` rows in total.
pub fn robustness_sweep<P: StochasticPolicy + ?Sized>(
    policy: &P,
    set: &RectSet,
    levels: &[f64],
    spec: &RcmdpSpec,
    lambda_max: f64,
) -> Result<SweepTable> {
    let rows = sweep_plan(levels, set.n_groups())
        .into_iter()
        .map(|(x, signs)| evaluate_row(policy, set, x, &signs, spec, lambda_max))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepTable {
        n_constraints: spec.n_constraints(),
        rows,
    })
}
