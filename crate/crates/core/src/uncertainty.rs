//! Uncertainty sets over transition kernels.
//!
//! Rectangular sets constrain each row `p(.|s,a)` to a norm ball around the
//! nominal row intersected with the simplex. The non-rectangular set is a
//! single Euclidean ball over the whole flattened kernel. Projections and
//! linear maximisation are solved through their KKT conditions: a scalar
//! multiplier per constraint, found by bisection, followed by an exact
//! active-set recomputation of the simplex shift.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::model::TransitionKernel;

/// Feasibility tolerance used by [`contains`].
pub const FEASIBILITY_TOLERANCE: f64 = 1e-8;

const BISECTION_STEPS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    L1,
    L2,
    Linf,
}

impl Norm {
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        let diffs = a.iter().zip(b).map(|(x, y)| x - y);
        match self {
            Norm::L1 => diffs.map(f64::abs).sum(),
            Norm::L2 => math::sqrt(diffs.map(|d| d * d).sum()),
            Norm::Linf => diffs.fold(0.0, |m, d| m.max(d.abs())),
        }
    }
}

/// `(s,a)`-rectangular set `{p : ||p(.|s,a) - nominal(.|s,a)|| <= radius(s,a)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct RectSet {
    nominal: TransitionKernel,
    norm: Norm,
    radius: Vec<f64>,
    groups: Vec<usize>,
}

impl RectSet {
    /// Zero radii are accepted and pin the corresponding rows to the nominal.
    pub fn new(nominal: TransitionKernel, norm: Norm, radius: Vec<f64>) -> Result<Self> {
        let rows = nominal.n_rows();
        if radius.len() != rows {
            return Err(Error::dim("radius table", rows, radius.len()));
        }
        if let Some(&r) = radius.iter().find(|r| !(**r >= 0.0 && r.is_finite())) {
            return Err(Error::param("radius", r, "radii must be finite and nonnegative"));
        }
        let groups = (0..nominal.n_states()).collect();
        Ok(RectSet {
            nominal,
            norm,
            radius,
            groups,
        })
    }

    pub fn uniform(nominal: TransitionKernel, norm: Norm, radius: f64) -> Result<Self> {
        let rows = nominal.n_rows();
        Self::new(nominal, norm, vec![radius; rows])
    }

    /// Assigns each state to a distortion group; group ids must be `0..n` without gaps.
    pub fn with_groups(mut self, groups: Vec<usize>) -> Result<Self> {
        if groups.len() != self.nominal.n_states() {
            return Err(Error::dim("distortion groups", self.nominal.n_states(), groups.len()));
        }
        let n = groups.iter().max().map_or(0, |g| g + 1);
        for g in 0..n {
            if !groups.contains(&g) {
                return Err(Error::param("distortion groups", g as f64, "group ids must be contiguous"));
            }
        }
        self.groups = groups;
        Ok(self)
    }

    pub fn nominal(&self) -> &TransitionKernel {
        &self.nominal
    }

    pub fn norm(&self) -> Norm {
        self.norm
    }

    pub fn radius(&self, s: usize, a: usize) -> f64 {
        self.radius[s * self.nominal.n_actions() + a]
    }

    pub fn max_radius(&self) -> f64 {
        self.radius.iter().fold(0.0, |m, &r| m.max(r))
    }

    pub fn groups(&self) -> &[usize] {
        &self.groups
    }

    /// Number of independent sign dimensions used by [`distort`].
    pub fn n_groups(&self) -> usize {
        self.groups.iter().max().map_or(0, |g| g + 1)
    }

    fn project_row(&self, row: usize, y: &[f64]) -> Result<Vec<f64>> {
        let n = nominal_row(&self.nominal, row);
        let r = self.radius[row];
        let x = match self.norm {
            Norm::Linf => project_row_linf(y, n, r),
            Norm::L1 => project_row_l1(y, n, r),
            Norm::L2 => project_row_l2(y, n, r),
        };
        let violation = row_violation(&x, n, r, self.norm);
        if violation > 1e-9 {
            return Err(Error::ProjectionFailed { residual: violation });
        }
        Ok(x)
    }

    fn lmo_row(&self, row: usize, g: &[f64]) -> Vec<f64> {
        let n = nominal_row(&self.nominal, row);
        if is_constant(g) {
            return n.to_vec();
        }
        let r = self.radius[row];
        match self.norm {
            Norm::Linf => lmo_row_linf(g, n, r),
            Norm::L1 => lmo_row_l1(g, n, r),
            Norm::L2 => lmo_row_l2(g, n, r),
        }
    }
}

/// Non-rectangular set `{p : ||p - nominal||_2 <= budget}` over the whole kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct NonRectSet {
    nominal: TransitionKernel,
    budget: f64,
}

impl NonRectSet {
    pub fn new(nominal: TransitionKernel, budget: f64) -> Result<Self> {
        if !(budget > 0.0 && budget.is_finite()) {
            return Err(Error::param("budget", budget, "must be positive and finite"));
        }
        Ok(NonRectSet { nominal, budget })
    }

    pub fn nominal(&self) -> &TransitionKernel {
        &self.nominal
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }
}

/// Either kind of uncertainty set.
#[derive(Debug, Clone, PartialEq)]
pub enum UncertaintySet {
    Rect(RectSet),
    NonRect(NonRectSet),
}

impl UncertaintySet {
    pub fn nominal(&self) -> &TransitionKernel {
        match self {
            UncertaintySet::Rect(r) => &r.nominal,
            UncertaintySet::NonRect(n) => &n.nominal,
        }
    }
}

impl From<RectSet> for UncertaintySet {
    fn from(s: RectSet) -> Self {
        UncertaintySet::Rect(s)
    }
}

impl From<NonRectSet> for UncertaintySet {
    fn from(s: NonRectSet) -> Self {
        UncertaintySet::NonRect(s)
    }
}

/// Outcome of a membership test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Containment {
    pub inside: bool,
    /// Largest violation of any constraint (0 when inside).
    pub violation: f64,
    /// Smallest remaining radius, `min (radius - distance)`; negative when outside the ball.
    pub slack: f64,
}

fn nominal_row(k: &TransitionKernel, row: usize) -> &[f64] {
    let n = k.n_states();
    &k.as_slice()[row * n..(row + 1) * n]
}

fn simplex_violation(x: &[f64]) -> f64 {
    let sum: f64 = x.iter().sum();
    x.iter().fold((sum - 1.0).abs(), |m, &v| m.max(-v))
}

fn row_violation(x: &[f64], n: &[f64], r: f64, norm: Norm) -> f64 {
    simplex_violation(x).max(norm.distance(x, n) - r)
}

/// Rows whose spread is at rounding level carry no direction.
fn is_constant(g: &[f64]) -> bool {
    let (lo, hi) = g.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    hi - lo <= 1e-13 * (1.0 + lo.abs().max(hi.abs()))
}

fn check_shape(k: &TransitionKernel, len: usize) -> Result<()> {
    let expected = k.as_slice().len();
    if len != expected {
        return Err(Error::dim("kernel-shaped table", expected, len));
    }
    Ok(())
}

/// Values `u_i - tau` over the listed coordinates, with `tau` chosen so they sum to `c`.
///
/// Works with offsets from the mean so that large `u` do not swamp an O(1) result.
fn shift_to_sum(u: &[f64], c: f64) -> Vec<f64> {
    let k = u.len() as f64;
    let mean = u.iter().sum::<f64>() / k;
    let d: Vec<f64> = u.iter().map(|v| v - mean).collect();
    let fix = (c - d.iter().sum::<f64>()) / k;
    d.into_iter().map(|v| v + fix).collect()
}

/// `max(0, a_i - tau)` with `tau` such that the entries sum to `c > 0`.
fn water_fill(a: &[f64], c: f64) -> Vec<f64> {
    let mut order: Vec<usize> = (0..a.len()).collect();
    order.sort_by(|&i, &j| a[j].total_cmp(&a[i]));
    // The active set is a prefix of the sorted order; grow it while the next entry stays above the level.
    let mut k = 1;
    while k < a.len() {
        let top: Vec<f64> = order[..=k].iter().map(|&i| a[i]).collect();
        if shift_to_sum(&top, c)[k] <= 0.0 {
            break;
        }
        k += 1;
    }
    let top: Vec<f64> = order[..k].iter().map(|&i| a[i]).collect();
    let mut x = vec![0.0; a.len()];
    for (&i, v) in order[..k].iter().zip(shift_to_sum(&top, c)) {
        x[i] = v;
    }
    x
}

/// Euclidean projection of `y` onto the probability simplex.
pub fn project_simplex(y: &[f64]) -> Vec<f64> {
    water_fill(y, 1.0)
}

/// Projection onto `{x in simplex : |x_i - n_i| <= r}`.
///
/// The row sum of `clamp(y - tau, lo, hi)` is piecewise linear in `tau` with
/// kinks at `y_i - hi_i` and `y_i - lo_i`. The crossing segment is located
/// among those kinks and the free coordinates are then solved exactly.
pub fn project_row_linf(y: &[f64], n: &[f64], r: f64) -> Vec<f64> {
    let dim = y.len();
    let lo: Vec<f64> = n.iter().map(|v| (v - r).max(0.0)).collect();
    let hi: Vec<f64> = n.iter().map(|v| (v + r).min(1.0)).collect();
    // kink (j, bound): tau = y_j - bound_j; coordinate i sits at y_i - y_j + bound_j there
    let mut kinks: Vec<(usize, bool)> = (0..dim).flat_map(|j| [(j, true), (j, false)]).collect();
    let bound = |j: usize, upper: bool| if upper { hi[j] } else { lo[j] };
    let key = |&(j, upper): &(usize, bool)| y[j] - bound(j, upper);
    kinks.sort_by(|a, b| key(a).total_cmp(&key(b)));
    let sum_at = |(j, upper): (usize, bool)| -> f64 {
        (0..dim)
            .map(|i| ((y[i] - y[j]) + bound(j, upper)).clamp(lo[i], hi[i]))
            .sum()
    };
    // first kink with sum <= 1; the sum is nonincreasing along the sorted kinks
    let (mut a, mut b) = (0usize, kinks.len() - 1);
    if sum_at(kinks[a]) <= 1.0 {
        b = a;
    }
    while b - a > 1 {
        let mid = (a + b) / 2;
        if sum_at(kinks[mid]) > 1.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    let at_b = kinks[b];
    let left = if b > 0 { key(&kinks[b - 1]) } else { key(&at_b) };
    let right = key(&at_b);
    let mut x = vec![0.0; dim];
    let mut free = Vec::new();
    let mut fixed = 0.0;
    for i in 0..dim {
        // coordinate i is free on the open segment (left, right) iff its kinks bracket it
        if y[i] - hi[i] >= right {
            x[i] = hi[i];
            fixed += hi[i];
        } else if y[i] - lo[i] <= left {
            x[i] = lo[i];
            fixed += lo[i];
        } else {
            free.push(i);
        }
    }
    if free.is_empty() {
        return (0..dim)
            .map(|i| ((y[i] - y[at_b.0]) + bound(at_b.0, at_b.1)).clamp(lo[i], hi[i]))
            .collect();
    }
    let u: Vec<f64> = free.iter().map(|&i| y[i]).collect();
    for (&i, v) in free.iter().zip(shift_to_sum(&u, 1.0 - fixed)) {
        x[i] = v.clamp(lo[i], hi[i]);
    }
    x
}

/// For fixed `mu`, the minimiser over the simplex of `0.5||x - y||^2 + mu ||x - n||_1`.
fn l1_prox_on_simplex(y: &[f64], n: &[f64], mu: f64) -> Vec<f64> {
    let at = |tau: f64| -> Vec<f64> {
        y.iter()
            .zip(n)
            .map(|(&yi, &ni)| {
                let z = yi - tau - ni;
                let soft = if z > mu {
                    z - mu
                } else if z < -mu {
                    z + mu
                } else {
                    0.0
                };
                (ni + soft).max(0.0)
            })
            .collect()
    };
    let sum_at = |tau: f64| -> f64 { at(tau).iter().sum() };
    let spread = y.iter().zip(n).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let ymax = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ymin = y.iter().copied().fold(f64::INFINITY, f64::min);
    let mut t_lo = ymin - spread - mu - 1.0;
    let mut t_hi = ymax + mu + 1.0;
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (t_lo + t_hi);
        if mid <= t_lo || mid >= t_hi {
            break;
        }
        if sum_at(mid) > 1.0 {
            t_lo = mid;
        } else {
            t_hi = mid;
        }
    }
    let tau = 0.5 * (t_lo + t_hi);
    let x = at(tau);
    // Coordinates on a sloped piece move one-for-one with tau; solve for it exactly.
    let mut sloped = Vec::new();
    let mut u = Vec::new();
    let mut fixed = 0.0;
    for i in 0..y.len() {
        let z = y[i] - tau - n[i];
        if z > mu {
            sloped.push(i);
            u.push(y[i] - mu);
        } else if z < -mu && x[i] > 0.0 {
            sloped.push(i);
            u.push(y[i] + mu);
        } else {
            fixed += x[i];
        }
    }
    if sloped.is_empty() {
        return x;
    }
    let mut exact = x.clone();
    for (&i, v) in sloped.iter().zip(shift_to_sum(&u, 1.0 - fixed)) {
        exact[i] = v;
    }
    if simplex_violation(&exact) <= simplex_violation(&x) {
        exact
    } else {
        x
    }
}

/// Projection onto `{x in simplex : ||x - n||_1 <= r}`.
pub fn project_row_l1(y: &[f64], n: &[f64], r: f64) -> Vec<f64> {
    let x0 = project_simplex(y);
    if Norm::L1.distance(&x0, n) <= r {
        return x0;
    }
    if r == 0.0 {
        return n.to_vec();
    }
    let dist = |mu: f64| Norm::L1.distance(&l1_prox_on_simplex(y, n, mu), n);
    l1_prox_on_simplex(y, n, bisect_decreasing(dist, r))
}

/// `x = max(0, (y + mu n - tau) / (1 + mu))` with `tau` fixing the row sum.
fn l2_shrink(y: &[f64], n: &[f64], mu: f64) -> Vec<f64> {
    let a: Vec<f64> = y.iter().zip(n).map(|(yi, ni)| (yi + mu * ni) / (1.0 + mu)).collect();
    water_fill(&a, 1.0)
}

/// Projection onto `{x in simplex : ||x - n||_2 <= r}`.
pub fn project_row_l2(y: &[f64], n: &[f64], r: f64) -> Vec<f64> {
    let x0 = project_simplex(y);
    if Norm::L2.distance(&x0, n) <= r {
        return x0;
    }
    if r == 0.0 {
        return n.to_vec();
    }
    let dist = |mu: f64| Norm::L2.distance(&l2_shrink(y, n, mu), n);
    let mu = bisect_decreasing(dist, r);
    l2_shrink(y, n, mu)
}

/// Smallest `mu >= 0` (up to bisection precision) with `f(mu) <= target`, for nonincreasing `f`.
fn bisect_decreasing(f: impl Fn(f64) -> f64, target: f64) -> f64 {
    let mut hi = 1.0;
    while f(hi) > target {
        hi *= 2.0;
        if hi > 1e300 {
            return hi;
        }
    }
    let mut lo = 0.0;
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Greedy maximiser of `<g, x>` over the box-simplex row: fill the largest `g` first.
pub fn lmo_row_linf(g: &[f64], n: &[f64], r: f64) -> Vec<f64> {
    let mut x: Vec<f64> = n.iter().map(|v| (v - r).max(0.0)).collect();
    let mut mass = 1.0 - x.iter().sum::<f64>();
    let mut order: Vec<usize> = (0..g.len()).collect();
    order.sort_by(|&i, &j| g[j].total_cmp(&g[i]));
    for i in order {
        if mass <= 0.0 {
            break;
        }
        let room = (n[i] + r).min(1.0) - x[i];
        let add = room.min(mass);
        x[i] += add;
        mass -= add;
    }
    x
}

/// Maximiser of `<g, x>` over the l1-ball-simplex row: move `r/2` of mass to the best outcome.
pub fn lmo_row_l1(g: &[f64], n: &[f64], r: f64) -> Vec<f64> {
    let best = (0..g.len()).fold(0, |b, i| if g[i] > g[b] { i } else { b });
    let mut x = n.to_vec();
    let mut budget = (0.5 * r).min(1.0 - n[best]);
    let mut order: Vec<usize> = (0..g.len()).filter(|&i| g[i] < g[best]).collect();
    order.sort_by(|&i, &j| g[i].total_cmp(&g[j]));
    for i in order {
        if budget <= 0.0 {
            break;
        }
        let take = x[i].min(budget);
        x[i] -= take;
        x[best] += take;
        budget -= take;
    }
    x
}

/// `x = max(0, n + (g - tau) / mu)` with `tau` fixing the row sum.
fn l2_tilt(g: &[f64], n: &[f64], mu: f64) -> Vec<f64> {
    let a: Vec<f64> = g.iter().zip(n).map(|(gi, ni)| ni + gi / mu).collect();
    water_fill(&a, 1.0)
}

fn simplex_vertex_lmo(g: &[f64]) -> Vec<f64> {
    let best = (0..g.len()).fold(0, |b, i| if g[i] > g[b] { i } else { b });
    let mut x = vec![0.0; g.len()];
    x[best] = 1.0;
    x
}

/// Maximiser of `<g, x>` over the l2-ball-simplex row.
pub fn lmo_row_l2(g: &[f64], n: &[f64], r: f64) -> Vec<f64> {
    if r == 0.0 {
        return n.to_vec();
    }
    let vertex = simplex_vertex_lmo(g);
    if Norm::L2.distance(&vertex, n) <= r {
        return vertex;
    }
    // Distance to the nominal shrinks as mu grows; the ball constraint is active at the optimum.
    let dist = |mu: f64| Norm::L2.distance(&l2_tilt(g, n, mu), n);
    let mut mu = bisect_decreasing(dist, r);
    if mu == 0.0 {
        mu = f64::MIN_POSITIVE;
    }
    l2_tilt(g, n, mu)
}

/// Euclidean projection of a kernel-shaped table onto the set.
pub fn project(candidate: &[f64], set: &UncertaintySet) -> Result<TransitionKernel> {
    let nominal = set.nominal();
    check_shape(nominal, candidate.len())?;
    if candidate.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { what: "projection candidate" });
    }
    let ns = nominal.n_states();
    match set {
        UncertaintySet::Rect(rect) => {
            let mut out = Vec::with_capacity(candidate.len());
            for (row, y) in candidate.chunks(ns).enumerate() {
                out.extend(rect.project_row(row, y)?);
            }
            Ok(TransitionKernel::from_raw(ns, nominal.n_actions(), out))
        }
        UncertaintySet::NonRect(nr) => project_nonrect(candidate, nr),
    }
}

fn nonrect_shrink(y: &[f64], n: &[f64], ns: usize, mu: f64) -> Vec<f64> {
    y.chunks(ns)
        .zip(n.chunks(ns))
        .flat_map(|(yr, nr)| l2_shrink(yr, nr, mu))
        .collect()
}

fn project_nonrect(y: &[f64], set: &NonRectSet) -> Result<TransitionKernel> {
    let ns = set.nominal.n_states();
    let n = set.nominal.as_slice();
    let x0 = nonrect_shrink(y, n, ns, 0.0);
    let x = if Norm::L2.distance(&x0, n) <= set.budget {
        x0
    } else {
        let mu = bisect_decreasing(|mu| Norm::L2.distance(&nonrect_shrink(y, n, ns, mu), n), set.budget);
        nonrect_shrink(y, n, ns, mu)
    };
    let k = TransitionKernel::from_raw(ns, set.nominal.n_actions(), x);
    let c = contains(&k, &UncertaintySet::NonRect(set.clone()));
    if c.violation > 1e-9 {
        return Err(Error::ProjectionFailed { residual: c.violation });
    }
    Ok(k)
}

/// Membership test with tolerance [`FEASIBILITY_TOLERANCE`].
pub fn contains(kernel: &TransitionKernel, set: &UncertaintySet) -> Containment {
    let nominal = set.nominal();
    if kernel.same_shape(nominal).is_err() {
        return Containment {
            inside: false,
            violation: f64::INFINITY,
            slack: f64::NEG_INFINITY,
        };
    }
    let ns = nominal.n_states();
    let mut violation: f64 = 0.0;
    let mut slack = f64::INFINITY;
    for row in kernel.rows() {
        violation = violation.max(simplex_violation(row));
    }
    match set {
        UncertaintySet::Rect(rect) => {
            for (i, (row, nrow)) in kernel.rows().zip(nominal.as_slice().chunks(ns)).enumerate() {
                let room = rect.radius[i] - rect.norm.distance(row, nrow);
                slack = slack.min(room);
                violation = violation.max(-room);
            }
        }
        UncertaintySet::NonRect(nr) => {
            let room = nr.budget - Norm::L2.distance(kernel.as_slice(), nominal.as_slice());
            slack = room;
            violation = violation.max(-room);
        }
    }
    Containment {
        inside: violation <= FEASIBILITY_TOLERANCE,
        violation,
        slack,
    }
}

/// Maximiser of `<direction, p>` over the set. Constant rows return the nominal row.
pub fn linear_maximize(direction: &[f64], set: &UncertaintySet) -> Result<TransitionKernel> {
    let nominal = set.nominal();
    check_shape(nominal, direction.len())?;
    if direction.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { what: "LMO direction" });
    }
    let ns = nominal.n_states();
    let na = nominal.n_actions();
    let out = match set {
        UncertaintySet::Rect(rect) => direction
            .chunks(ns)
            .enumerate()
            .flat_map(|(row, g)| rect.lmo_row(row, g))
            .collect(),
        UncertaintySet::NonRect(nr) => lmo_nonrect(direction, nr)?,
    };
    Ok(TransitionKernel::from_raw(ns, na, out))
}

fn nonrect_tilt(g: &[f64], n: &[f64], ns: usize, mu: f64) -> Vec<f64> {
    g.chunks(ns)
        .zip(n.chunks(ns))
        .flat_map(|(gr, nr)| {
            if is_constant(gr) {
                nr.to_vec()
            } else {
                l2_tilt(gr, nr, mu)
            }
        })
        .collect()
}

fn lmo_nonrect(g: &[f64], set: &NonRectSet) -> Result<Vec<f64>> {
    let ns = set.nominal.n_states();
    let n = set.nominal.as_slice();
    let vertex: Vec<f64> = g
        .chunks(ns)
        .zip(n.chunks(ns))
        .flat_map(|(gr, nr)| {
            if is_constant(gr) {
                nr.to_vec()
            } else {
                simplex_vertex_lmo(gr)
            }
        })
        .collect();
    if Norm::L2.distance(&vertex, n) <= set.budget {
        return Ok(vertex);
    }
    let mu = bisect_decreasing(|mu| Norm::L2.distance(&nonrect_tilt(g, n, ns, mu), n), set.budget);
    let x = nonrect_tilt(g, n, ns, mu.max(f64::MIN_POSITIVE));
    let over = Norm::L2.distance(&x, n) - set.budget;
    if over > 1e-9 {
        return Err(Error::LmoFailed { residual: over });
    }
    Ok(x)
}

/// Sign of a distortion direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    /// All `2^n` sign vectors in binary order, `Plus` before `Minus`.
    pub fn enumerate(n: usize) -> Vec<Vec<Sign>> {
        (0..1usize << n)
            .map(|bits| {
                (0..n)
                    .map(|i| if bits >> (n - 1 - i) & 1 == 0 { Sign::Plus } else { Sign::Minus })
                    .collect()
            })
            .collect()
    }
}

/// Boundary row reached at full distortion in the given direction.
///
/// The upper boundary pushes mass towards higher-indexed successors as far as
/// the set allows; the lower boundary pushes it towards lower indices.
pub fn distortion_boundary(set: &RectSet, s: usize, a: usize, sign: Sign) -> Vec<f64> {
    let ns = set.nominal.n_states();
    let scale = if ns > 1 { 1.0 / (ns - 1) as f64 } else { 1.0 };
    let tilt: Vec<f64> = (0..ns)
        .map(|i| {
            let t = i as f64 * scale;
            match sign {
                Sign::Plus => t,
                Sign::Minus => -t,
            }
        })
        .collect();
    set.lmo_row(s * set.nominal.n_actions() + a, &tilt)
}

/// Kernel moved a fraction `x^2` of the way from the nominal to the signed boundary in each group.
pub fn distort(set: &RectSet, x: f64, signs: &[Sign]) -> Result<TransitionKernel> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::param("distortion level", x, "must lie in [0, 1]"));
    }
    if signs.len() != set.n_groups() {
        return Err(Error::dim("distortion signs", set.n_groups(), signs.len()));
    }
    if x == 0.0 {
        return Ok(set.nominal.clone());
    }
    let ns = set.nominal.n_states();
    let na = set.nominal.n_actions();
    let w = x * x;
    let mut p = Vec::with_capacity(ns * na * ns);
    for s in 0..ns {
        let sign = signs[set.groups[s]];
        for a in 0..na {
            let b = distortion_boundary(set, s, a, sign);
            let n = set.nominal.row(s, a);
            let mut row: Vec<f64> = n.iter().zip(&b).map(|(ni, bi)| ni + w * (bi - ni)).collect();
            let sum: f64 = row.iter().sum();
            for v in row.iter_mut() {
                *v = v.max(0.0) / sum;
            }
            p.extend(row);
        }
    }
    Ok(TransitionKernel::from_raw(ns, na, p))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn linf_projection_two_outcomes() {
        let x = project_row_linf(&[0.7, 0.3], &[0.5, 0.5], 0.1);
        assert!(close(&x, &[0.6, 0.4], 1e-12), "{x:?}");
    }

    #[test]
    fn feasible_rows_are_fixed_points() {
        let n = [0.2, 0.3, 0.5];
        let y = [0.25, 0.3, 0.45];
        assert!(close(&project_row_linf(&y, &n, 0.1), &y, 1e-12));
        assert!(close(&project_row_l1(&y, &n, 0.2), &y, 1e-12));
        assert!(close(&project_row_l2(&y, &n, 0.2), &y, 1e-12));
    }

    #[test]
    fn linf_lmo_two_outcomes() {
        let x = lmo_row_linf(&[1.0, 0.0], &[0.5, 0.5], 0.1);
        assert!(close(&x, &[0.6, 0.4], 1e-15));
    }

    #[test]
    fn l1_lmo_moves_half_radius() {
        let third = 1.0 / 3.0;
        let x = lmo_row_l1(&[3.0, 1.0, 2.0], &[third; 3], 0.2);
        assert!(close(&x, &[third + 0.1, third - 0.1, third], 1e-15));
    }

    #[test]
    fn simplex_projection_example() {
        let x = project_simplex(&[0.9, 0.8, -0.3]);
        assert!(close(&x, &[0.55, 0.45, 0.0], 1e-15));
    }

    #[test]
    fn sign_enumeration_order() {
        let all = Sign::enumerate(2);
        assert_eq!(all.len(), 4);
        assert_eq!(all[0], vec![Sign::Plus, Sign::Plus]);
        assert_eq!(all[3], vec![Sign::Minus, Sign::Minus]);
    }
}
