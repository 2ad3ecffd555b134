//! Certified input synthesis from one recorded triple.
//!
//! The non-convex input program is split in two. First a scalar convex
//! feasibility problem over the interval half-width `p` is solved. Then an
//! input whose half-width `w(u, u_held)` equals the chosen `p` is recovered on
//! the sphere `‖u − u_held‖₂ = (p − fixed)/g_sup`.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::barrier::BarrierSpec;
use crate::bounds::{self, error_bound, gronwall_term, w_bound, w_fixed_part};
use crate::dataset::{SampleSet, SampleTriple};
use crate::error::{check_dim, Error, Result};
use crate::linalg;
use crate::model::{LipschitzSpec, SynthesisConfig};
use crate::oracle::{finite_difference_rate, select_sample, DynamicsInterval, SampleSelector, SelectorRegistry};
use crate::qp::box_min_cost;
use crate::region::BoxRegion;

/// Sign pairs `(s₁, s₂)` of the four constraint families, in reporting order.
pub const SIGNS: [(f64, f64); 4] = [(1.0, -1.0), (-1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)];

const ROOT_TOL: f64 = 1e-12;

/// Data of `c_{s₁,s₂}(p) = 2L_h‖ẋ + s₁p·1‖₂ + s₂(∇h·1)p − ∇h·ẋ − rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintData {
    pub xdot: Vec<f64>,
    pub grad: Vec<f64>,
    pub grad_dot_xdot: f64,
    pub grad_dot_ones: f64,
    /// `α(h(x)) − gronwall_term`
    pub rhs: f64,
    pub l_h: f64,
    pub alpha_h: f64,
    pub gronwall_term: f64,
}

impl ConstraintData {
    /// Assemble from raw parts; `rhs` is used as given.
    pub fn from_parts(xdot: Vec<f64>, grad: Vec<f64>, rhs: f64, l_h: f64) -> Self {
        Self {
            grad_dot_xdot: linalg::dot(&grad, &xdot),
            grad_dot_ones: grad.iter().sum(),
            xdot,
            grad,
            rhs,
            l_h,
            alpha_h: f64::NAN,
            gronwall_term: f64::NAN,
        }
    }

    pub fn constraint(&self, s1: f64, s2: f64, p: f64) -> f64 {
        2.0 * self.l_h * linalg::shifted_norm(&self.xdot, s1 * p) + s2 * self.grad_dot_ones * p
            - self.grad_dot_xdot
            - self.rhs
    }

    /// All four constraint values at `p`, in [`SIGNS`] order.
    pub fn values(&self, p: f64) -> [f64; 4] {
        SIGNS.map(|(s1, s2)| self.constraint(s1, s2, p))
    }

    /// Unconstrained minimizer of `c_{s₁,s₂}` over `ℝ` (±∞ when monotone).
    fn minimizer(&self, s1: f64, s2: f64) -> f64 {
        let n = self.xdot.len() as f64;
        let k = 2.0 * self.l_h;
        let sum: f64 = self.xdot.iter().sum();
        let sq: f64 = self.xdot.iter().map(|v| v * v).sum();
        // ‖ẋ + s₁p·1‖² = n·(p + s₁Σẋ/n)² + c0 with c0 ≥ 0
        let c0 = (sq - sum * sum / n).max(0.0);
        let d = -s2 * self.grad_dot_ones;
        let offset = s1 * sum / n;
        if d >= k * n.sqrt() {
            return f64::INFINITY;
        }
        if d <= -k * n.sqrt() {
            return f64::NEG_INFINITY;
        }
        let shifted = if c0 == 0.0 || d == 0.0 {
            0.0
        } else {
            d * (c0 / (n * (k * k * n - d * d))).sqrt()
        };
        shifted - offset
    }
}

pub fn build_constraints(
    x_now: &[f64],
    interval: &DynamicsInterval,
    barrier: &BarrierSpec,
    spec: &LipschitzSpec,
    dt: f64,
) -> Result<ConstraintData> {
    check_dim("state", spec.state_dim(), x_now.len())?;
    check_dim("interval center", spec.state_dim(), interval.center.len())?;
    let h = barrier.h(x_now);
    if h < 0.0 {
        return Err(Error::UnsafeState { h });
    }
    let grad = barrier.grad_h(x_now);
    let alpha_h = barrier.alpha(h);
    let g = gronwall_term(dt, barrier, spec)?;
    Ok(ConstraintData {
        alpha_h,
        gronwall_term: g,
        ..ConstraintData::from_parts(interval.center.clone(), grad, alpha_h - g, barrier.l_h())
    })
}

/// Bisection on a bracket `[a, b]` where `feasible(a) != feasible(b)`.
/// Returns the bracket end on the feasible side.
fn bisect(mut a: f64, mut b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let a_feasible = f(a) <= 0.0;
    for _ in 0..200 {
        if (b - a).abs() <= ROOT_TOL * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        let mid = 0.5 * (a + b);
        if (f(mid) <= 0.0) == a_feasible {
            a = mid;
        } else {
            b = mid;
        }
    }
    if a_feasible {
        a
    } else {
        b
    }
}

/// Sublevel set `{p ∈ [lo, hi] : c(p) ≤ 0}` of one convex constraint.
fn sublevel(c: &ConstraintData, s1: f64, s2: f64, lo: f64, hi: f64) -> Option<(f64, f64)> {
    let f = |p: f64| c.constraint(s1, s2, p);
    let pm = c.minimizer(s1, s2).clamp(lo, hi);
    if f(pm) > 0.0 {
        return None;
    }
    let left = if f(lo) <= 0.0 { lo } else { bisect(lo, pm, f) };
    let right = if f(hi) <= 0.0 { hi } else { bisect(pm, hi, f) };
    Some((left, right))
}

/// Feasible `p` values: the intersection of the four convex sublevel sets with `[p_lo, p_hi]`.
pub fn feasible_p_interval(c: &ConstraintData, p_lo: f64, p_hi: f64) -> Option<(f64, f64)> {
    if !(p_lo <= p_hi) {
        return None;
    }
    let mut out = (p_lo, p_hi);
    for (s1, s2) in SIGNS {
        let (a, b) = sublevel(c, s1, s2, p_lo, p_hi)?;
        out = (out.0.max(a), out.1.min(b));
        if out.0 > out.1 {
            return None;
        }
    }
    Some(out)
}

fn snap_into(region: &BoxRegion, u: Vec<f64>) -> Option<Vec<f64>> {
    let scale = region
        .lo()
        .iter()
        .chain(region.hi())
        .fold(1.0_f64, |a, v| a.max(v.abs()));
    region
        .contains_with_tol(&u, 1e-12 * scale)
        .then(|| region.clamp(&u))
}

/// Cheapest input on the sphere `‖u − u_held‖₂ = radius` inside the input box.
///
/// Exact for one input. For `m > 1` the sphere is probed along the `2m` axis
/// directions, the direction toward the unconstrained minimizer `0`, and the
/// negative cost gradient `−R·u_held`.
pub fn recover_at_radius(radius: f64, u_held: &[f64], cfg: &SynthesisConfig) -> Option<Vec<f64>> {
    if radius <= 0.0 {
        return snap_into(&cfg.input_box, u_held.to_vec());
    }
    let m = u_held.len();
    let mut dirs: Vec<Vec<f64>> = Vec::with_capacity(2 * m + 2);
    for s in 0..m {
        for sign in [-1.0, 1.0] {
            let mut d = vec![0.0; m];
            d[s] = sign;
            dirs.push(d);
        }
    }
    if m > 1 {
        let toward_zero: Vec<f64> = u_held.iter().map(|v| -v).collect();
        let grad = &cfg.cost_matrix * nalgebra::DVector::from_column_slice(u_held);
        let descent: Vec<f64> = grad.iter().map(|v| -v).collect();
        for d in [toward_zero, descent] {
            let len = linalg::norm(&d);
            if len > 0.0 {
                dirs.push(d.iter().map(|v| v / len).collect());
            }
        }
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    for d in dirs {
        if let Some(u) = snap_into(&cfg.input_box, linalg::axpy(u_held, radius, &d)) {
            let cost = cfg.cost(&u);
            if best.as_ref().map_or(true, |(c, _)| cost < *c) {
                best = Some((cost, u));
            }
        }
    }
    best.map(|(_, u)| u)
}

/// Recover an input realizing half-width `p_star` for the given sample.
///
/// Returns `Ok(None)` when the sphere misses the input box.
pub fn recover_control(
    p_star: f64,
    sample: &SampleTriple,
    x_now: &[f64],
    cfg: &SynthesisConfig,
    spec: &LipschitzSpec,
) -> Result<Option<Vec<f64>>> {
    check_dim("sample input", cfg.input_dim(), sample.u_held.len())?;
    let fixed = w_fixed_part(x_now, sample, spec)?;
    let budget = p_star - fixed;
    if budget < -1e-9 * (1.0 + fixed.abs()) {
        return Err(Error::InvalidValue {
            what: "p_star",
            reason: format!("{p_star} is below the fixed part {fixed}"),
        });
    }
    let budget = budget.max(0.0);
    if spec.g_sup() == 0.0 {
        // w does not depend on u: only p = fixed is realizable, by any input.
        return Ok((budget <= 1e-9 * (1.0 + fixed.abs())).then(|| box_min_cost(&cfg.cost_matrix, &cfg.input_box)));
    }
    Ok(recover_at_radius(budget / spec.g_sup(), &sample.u_held, cfg))
}

/// What a [`PSelection`] strategy sees.
pub struct RecoveryProblem<'a> {
    pub feasible: (f64, f64),
    pub fixed_part: f64,
    pub sample: &'a SampleTriple,
    pub x_now: &'a [f64],
    pub cfg: &'a SynthesisConfig,
    pub spec: &'a LipschitzSpec,
}

impl RecoveryProblem<'_> {
    fn recover(&self, p: f64) -> Result<Option<Vec<f64>>> {
        recover_control(p, self.sample, self.x_now, self.cfg, self.spec)
    }
}

/// Picks the half-width `p` inside the feasible interval, and the input realizing it.
pub trait PSelection: Send + Sync {
    fn name(&self) -> &'static str;
    fn choose(&self, problem: &RecoveryProblem<'_>) -> Result<Option<(f64, Vec<f64>)>>;
}

/// Largest feasible `p` whose sphere still meets the input box (searched downward by bisection).
pub struct MaxFeasible;

impl PSelection for MaxFeasible {
    fn name(&self) -> &'static str {
        "max-feasible"
    }

    fn choose(&self, pr: &RecoveryProblem<'_>) -> Result<Option<(f64, Vec<f64>)>> {
        let (lo, hi) = pr.feasible;
        if let Some(u) = pr.recover(hi)? {
            return Ok(Some((hi, u)));
        }
        let Some(mut u_lo) = pr.recover(lo)? else {
            return Ok(None);
        };
        let (mut a, mut b) = (lo, hi);
        for _ in 0..200 {
            if b - a <= ROOT_TOL * (1.0 + b.abs()) {
                break;
            }
            let mid = 0.5 * (a + b);
            match pr.recover(mid)? {
                Some(u) => {
                    a = mid;
                    u_lo = u;
                }
                None => b = mid,
            }
        }
        Ok(Some((a, u_lo)))
    }
}

/// Feasible `p` whose recovered input has the smallest cost `uᵀRu`.
///
/// Exact for one input. Candidate radii are the interval ends and the radius
/// reaching the unconstrained minimizer; for `m > 1` a uniform radius sweep is added.
pub struct MinCost;

impl MinCost {
    const SWEEP: usize = 32;
}

impl PSelection for MinCost {
    fn name(&self) -> &'static str {
        "min-cost"
    }

    fn choose(&self, pr: &RecoveryProblem<'_>) -> Result<Option<(f64, Vec<f64>)>> {
        let (lo, hi) = pr.feasible;
        let g = pr.spec.g_sup();
        let mut ps = vec![lo, hi];
        if g > 0.0 {
            let r_lo = ((lo - pr.fixed_part) / g).max(0.0);
            let r_hi = ((hi - pr.fixed_part) / g).max(r_lo);
            let to_origin = linalg::norm(&pr.sample.u_held).clamp(r_lo, r_hi);
            ps.push(pr.fixed_part + g * to_origin);
            if pr.cfg.input_dim() > 1 {
                ps.extend((1..Self::SWEEP).map(|i| lo + (hi - lo) * i as f64 / Self::SWEEP as f64));
            }
        }
        let mut best: Option<(f64, f64, Vec<f64>)> = None;
        for p in ps {
            let p = p.clamp(lo, hi);
            if let Some(u) = pr.recover(p)? {
                let cost = pr.cfg.cost(&u);
                if best.as_ref().map_or(true, |(c, _, _)| cost < *c) {
                    best = Some((cost, p, u));
                }
            }
        }
        Ok(best.map(|(_, p, u)| (p, u)))
    }
}

type PSelectionCtor = fn() -> Box<dyn PSelection>;

pub struct PSelectionRegistry {
    ctors: BTreeMap<&'static str, PSelectionCtor>,
}

impl Default for PSelectionRegistry {
    fn default() -> Self {
        let mut r = Self {
            ctors: BTreeMap::new(),
        };
        r.register("max-feasible", || Box::new(MaxFeasible));
        r.register("min-cost", || Box::new(MinCost));
        r
    }
}

impl PSelectionRegistry {
    pub fn register(&mut self, name: &'static str, ctor: PSelectionCtor) {
        self.ctors.insert(name, ctor);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.ctors.keys().copied().collect()
    }

    pub fn build(&self, name: &str) -> Result<Box<dyn PSelection>> {
        self.ctors
            .get(name)
            .map(|c| c())
            .ok_or_else(|| Error::UnknownStrategy {
                kind: "p selection",
                name: name.into(),
                available: self.names().join(", "),
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlDecision {
    pub u_star: Vec<f64>,
    pub p_star: f64,
    pub ball_radius: f64,
    pub cost: f64,
    /// `−c_{s₁,s₂}(p*)` in [`SIGNS`] order; all nonnegative.
    pub margins: [f64; 4],
    /// Slack of the two certified barrier inequalities evaluated at `w(u*)`.
    pub certified_slack: [f64; 2],
    pub sample: usize,
    pub fixed_part: f64,
    pub h: f64,
    pub alpha_h: f64,
    pub gronwall_term: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InfeasibleReason {
    /// No `p` in the realizable range satisfies the four constraints.
    EmptyInterval,
    /// Feasible `p` exist but none is realized by an input in the box.
    Unrealizable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InfeasibilityReport {
    pub reason: InfeasibleReason,
    pub sample: usize,
    pub p_range: (f64, f64),
    /// Constraint margins `−c(p)` at the lower end of the realizable range.
    pub margins: [f64; 4],
    pub h: f64,
    pub alpha_h: f64,
    pub gronwall_term: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SynthesisOutcome {
    Solved(ControlDecision),
    Infeasible(InfeasibilityReport),
}

/// Reusable synthesis pipeline with pluggable sample selection and `p` selection.
pub struct Synthesizer {
    selector: Box<dyn SampleSelector>,
    p_selection: Box<dyn PSelection>,
    cfg: SynthesisConfig,
    spec: LipschitzSpec,
    barrier: BarrierSpec,
}

impl Synthesizer {
    pub fn new(
        selector: Box<dyn SampleSelector>,
        p_selection: Box<dyn PSelection>,
        cfg: SynthesisConfig,
        spec: LipschitzSpec,
        barrier: BarrierSpec,
    ) -> Result<Self> {
        check_dim("dataset state", spec.state_dim(), selector.samples().state_dim())?;
        check_dim("dataset input", cfg.input_dim(), selector.samples().input_dim())?;
        check_dim("Lipschitz input", cfg.input_dim(), spec.input_dim())?;
        Ok(Self {
            selector,
            p_selection,
            cfg,
            spec,
            barrier,
        })
    }

    /// Build with strategies looked up by name.
    pub fn from_names(
        samples: Arc<SampleSet>,
        selector: &str,
        p_selection: &str,
        cfg: SynthesisConfig,
        spec: LipschitzSpec,
        barrier: BarrierSpec,
    ) -> Result<Self> {
        let sel = SelectorRegistry::default().build(selector, samples, &spec)?;
        let ps = PSelectionRegistry::default().build(p_selection)?;
        Self::new(sel, ps, cfg, spec, barrier)
    }

    pub fn samples(&self) -> &Arc<SampleSet> {
        self.selector.samples()
    }

    pub fn config(&self) -> &SynthesisConfig {
        &self.cfg
    }

    pub fn spec(&self) -> &LipschitzSpec {
        &self.spec
    }

    pub fn barrier(&self) -> &BarrierSpec {
        &self.barrier
    }

    pub fn step(&self, x_now: &[f64]) -> Result<SynthesisOutcome> {
        let h = self.barrier.h(x_now);
        if h < 0.0 {
            return Err(Error::UnsafeState { h });
        }
        let idx = self.selector.select(x_now, &[])?;
        solve_with_sample(
            x_now,
            idx,
            self.samples().get(idx),
            &self.cfg,
            &self.spec,
            &self.barrier,
            self.p_selection.as_ref(),
        )
    }
}

/// One synthesis step with exhaustive sample selection and cost-minimizing `p`.
pub fn synthesize_step(
    x_now: &[f64],
    samples: &SampleSet,
    cfg: &SynthesisConfig,
    spec: &LipschitzSpec,
    barrier: &BarrierSpec,
) -> Result<SynthesisOutcome> {
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let h = barrier.h(x_now);
    if h < 0.0 {
        return Err(Error::UnsafeState { h });
    }
    let idx = select_sample(x_now, &[], samples, spec)?;
    solve_with_sample(x_now, idx, samples.get(idx), cfg, spec, barrier, &MinCost)
}

/// Steps after sample selection: constraints, `p` interval, recovery, post-hoc check.
pub fn solve_with_sample(
    x_now: &[f64],
    idx: usize,
    sample: &SampleTriple,
    cfg: &SynthesisConfig,
    spec: &LipschitzSpec,
    barrier: &BarrierSpec,
    p_selection: &dyn PSelection,
) -> Result<SynthesisOutcome> {
    let xdot = finite_difference_rate(sample)?;
    let fixed = w_fixed_part(x_now, sample, spec)?;
    let interval = DynamicsInterval {
        center: xdot,
        half_width: fixed,
        source: idx,
    };
    let c = build_constraints(x_now, &interval, barrier, spec, cfg.dt)?;
    let h = barrier.h(x_now);
    let p_range = (fixed, fixed + spec.g_sup() * cfg.input_box.max_distance_from(&sample.u_held));

    let infeasible = |reason| {
        SynthesisOutcome::Infeasible(InfeasibilityReport {
            reason,
            sample: idx,
            p_range,
            margins: c.values(p_range.0).map(|v| -v),
            h,
            alpha_h: c.alpha_h,
            gronwall_term: c.gronwall_term,
        })
    };

    let Some(feasible) = feasible_p_interval(&c, p_range.0, p_range.1) else {
        return Ok(infeasible(InfeasibleReason::EmptyInterval));
    };
    let problem = RecoveryProblem {
        feasible,
        fixed_part: fixed,
        sample,
        x_now,
        cfg,
        spec,
    };
    let Some((p_star, u_star)) = p_selection.choose(&problem)? else {
        return Ok(infeasible(InfeasibleReason::Unrealizable));
    };

    let w = w_bound(x_now, sample, &u_star, spec)?;
    if (w.total - p_star).abs() > 1e-6 {
        return Err(Error::InvalidValue {
            what: "recovered input",
            reason: format!("w(u*) = {} differs from p* = {p_star}", w.total),
        });
    }
    let certified_slack = certified_slack(&c, &w, barrier, spec, cfg.dt)?;
    if certified_slack.iter().any(|s| *s < -1e-9 * (1.0 + c.rhs.abs())) {
        return Err(Error::InvalidValue {
            what: "recovered input",
            reason: format!("barrier inequalities violated post hoc: {certified_slack:?}"),
        });
    }
    Ok(SynthesisOutcome::Solved(ControlDecision {
        cost: cfg.cost(&u_star),
        ball_radius: if spec.g_sup() > 0.0 {
            (p_star - fixed).max(0.0) / spec.g_sup()
        } else {
            0.0
        },
        margins: c.values(p_star).map(|v| -v),
        certified_slack,
        u_star,
        p_star,
        sample: idx,
        fixed_part: fixed,
        h,
        alpha_h: c.alpha_h,
        gronwall_term: c.gronwall_term,
    }))
}

/// `∇h·(ẋ ± w·1) + α(h) − E(Δt, w)` for both signs.
pub fn certified_slack(
    c: &ConstraintData,
    w: &bounds::WBound,
    barrier: &BarrierSpec,
    spec: &LipschitzSpec,
    dt: f64,
) -> Result<[f64; 2]> {
    let e = error_bound(dt, w, &c.xdot, barrier, spec)?;
    Ok([1.0, -1.0].map(|s| c.grad_dot_xdot + s * w.total * c.grad_dot_ones + c.alpha_h - e.total))
}

/// Both sides of the per-step feasibility requirement at half-width `interval.half_width`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasibilityDiagnostics {
    pub gronwall_term: f64,
    pub alpha_h: f64,
    /// `gronwall_term − α(h)`
    pub lhs: f64,
    /// `∇h·(ẋ ± w1) − 2L_h·max‖ẋ ± w1‖₂`, `+` then `−`
    pub rhs: [f64; 2],
    /// `rhs − lhs`; nonnegative exactly when the step is certifiable at this `w`.
    pub margins: [f64; 2],
}

pub fn feasibility_margin(
    x_now: &[f64],
    interval: &DynamicsInterval,
    barrier: &BarrierSpec,
    spec: &LipschitzSpec,
    dt: f64,
) -> Result<FeasibilityDiagnostics> {
    check_dim("state", spec.state_dim(), x_now.len())?;
    let g = gronwall_term(dt, barrier, spec)?;
    let alpha_h = barrier.alpha(barrier.h(x_now));
    let grad = barrier.grad_h(x_now);
    let w = interval.half_width;
    let spread = linalg::shifted_norm(&interval.center, w).max(linalg::shifted_norm(&interval.center, -w));
    let gx = linalg::dot(&grad, &interval.center);
    let g1: f64 = grad.iter().sum();
    let rhs = [1.0, -1.0].map(|s| gx + s * w * g1 - 2.0 * barrier.l_h() * spread);
    let lhs = g - alpha_h;
    Ok(FeasibilityDiagnostics {
        gronwall_term: g,
        alpha_h,
        lhs,
        rhs,
        margins: rhs.map(|r| r - lhs),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::barrier::{AlphaLipschitz, BandBarrier, HalfSpaceBarrier};
    use crate::model::FallbackPolicy;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn scalar_cfg(dt: f64) -> SynthesisConfig {
        SynthesisConfig::new(
            dt,
            BoxRegion::symmetric(&[4.0]).unwrap(),
            DMatrix::from_row_slice(1, 1, &[1.0]),
            BoxRegion::symmetric(&[2.0]).unwrap(),
            10,
            FallbackPolicy::FailStop,
        )
        .unwrap()
    }

    fn motor(kappa: f64) -> (LipschitzSpec, BarrierSpec) {
        let ob = BoxRegion::new(vec![-1.0, -2.5], vec![1.0, 2.5]).unwrap();
        let spec = LipschitzSpec::new(
            vec![39.3153, 1.6599],
            vec![vec![32.2293], vec![22.9478]],
            391.4,
            83.8,
            &BoxRegion::symmetric(&[4.0]).unwrap(),
        )
        .unwrap();
        let b = BarrierSpec::new(
            Arc::new(BandBarrier {
                dim: 2,
                index: 0,
                center: 0.0,
                radius: 1.0,
            }),
            kappa,
            &ob,
            AlphaLipschitz::Composite,
        )
        .unwrap();
        (spec, b)
    }

    // ẋ = u with h = 1 − x; Θ = 0 so every term has a closed form.
    fn integrator() -> (LipschitzSpec, BarrierSpec, SampleSet) {
        let ib = BoxRegion::symmetric(&[4.0]).unwrap();
        let spec = LipschitzSpec::new(vec![0.0], vec![vec![0.0]], 4.0, 1.0, &ib).unwrap();
        let b = BarrierSpec::new(
            Arc::new(HalfSpaceBarrier {
                normal: vec![1.0],
                offset: 1.0,
            }),
            1.0,
            &BoxRegion::symmetric(&[2.0]).unwrap(),
            AlphaLipschitz::Composite,
        )
        .unwrap();
        let s = SampleSet::new(vec![SampleTriple::new(vec![0.0], vec![0.0], vec![0.0], 0.0, 0.01).unwrap()]).unwrap();
        (spec, b, s)
    }

    #[test]
    fn motor_gradient_and_rhs_at_zero_dt() {
        let (spec, b) = motor(1.0);
        let x = [0.5, 0.75];
        let iv = DynamicsInterval {
            center: vec![1.0, -2.0],
            half_width: 0.0,
            source: 0,
        };
        let c = build_constraints(&x, &iv, &b, &spec, 0.0).unwrap();
        assert_eq!(c.grad, vec![-1.0, 0.0]);
        assert_eq!(c.gronwall_term, 0.0);
        assert_eq!(c.rhs, 0.75);
        // 2·L_h·‖ẋ‖ − ∇h·ẋ − rhs with L_h = 2, ‖ẋ‖ = √5, ∇h·ẋ = −1
        let at_zero = 4.0 * 5f64.sqrt() + 1.0 - 0.75;
        for v in c.values(0.0) {
            assert_relative_eq!(v, at_zero, max_relative = 1e-15);
        }
    }

    #[test]
    fn unsafe_state_is_refused() {
        let (spec, b) = motor(1.0);
        let iv = DynamicsInterval {
            center: vec![0.0, 0.0],
            half_width: 0.0,
            source: 0,
        };
        assert!(matches!(
            build_constraints(&[1.5, 0.0], &iv, &b, &spec, 0.01),
            Err(Error::UnsafeState { .. })
        ));
    }

    #[test]
    fn huge_rhs_gives_full_range() {
        let c = ConstraintData::from_parts(vec![3.0, -1.0], vec![-1.0, 0.5], 1e9, 2.0);
        assert_eq!(feasible_p_interval(&c, 0.5, 7.0), Some((0.5, 7.0)));
    }

    #[test]
    fn infeasible_at_origin_and_increasing_gives_empty() {
        // ∇h·1 = 0, ẋ ≥ 0 componentwise: the s₁ = +1 families increase on p ≥ 0.
        let c = ConstraintData::from_parts(vec![1.0, 2.0], vec![1.0, -1.0], 0.5, 1.0);
        assert!(c.values(0.0).iter().all(|v| *v > 0.0));
        assert_eq!(feasible_p_interval(&c, 0.0, 10.0), None);
    }

    #[test]
    fn minimizer_is_stationary() {
        let c = ConstraintData::from_parts(vec![0.3, -1.2, 2.0], vec![0.4, 0.1, 0.2], 0.0, 0.5);
        for (s1, s2) in SIGNS {
            let p = c.minimizer(s1, s2);
            assert!(p.is_finite());
            let f = |q: f64| c.constraint(s1, s2, q);
            for d in [1e-3, 1e-2, 0.1, 1.0] {
                assert!(f(p) <= f(p + d) + 1e-12 && f(p) <= f(p - d) + 1e-12);
            }
        }
    }

    #[test]
    fn steep_gradient_makes_constraint_monotone() {
        // |∇h·1| ≥ 2L_h√n: the linear term dominates the norm.
        let c = ConstraintData::from_parts(vec![1.0], vec![5.0], 0.0, 1.0);
        assert_eq!(c.minimizer(1.0, -1.0), f64::INFINITY);
        assert_eq!(c.minimizer(1.0, 1.0), f64::NEG_INFINITY);
    }

    #[test]
    fn recovery_cases() {
        let cfg = scalar_cfg(0.01);
        assert_eq!(recover_at_radius(2.0, &[1.0], &cfg), Some(vec![-1.0]));
        assert_eq!(recover_at_radius(2.0, &[3.0], &cfg), Some(vec![1.0]));
        assert_eq!(recover_at_radius(0.0, &[3.0], &cfg), Some(vec![3.0]));
        assert_eq!(recover_at_radius(9.0, &[0.0], &cfg), None);
    }

    #[test]
    fn integrator_step_has_closed_form() {
        // w = |u|, E = κ·dt + 2|u|, so the binding family reads 3w ≤ κ(h − dt).
        let (spec, b, s) = integrator();
        let cfg = scalar_cfg(0.01);
        let bound = (0.5 - 0.01) / 3.0;

        let SynthesisOutcome::Solved(d) = synthesize_step(&[0.5], &s, &cfg, &spec, &b).unwrap() else {
            panic!("expected a solution");
        };
        assert_eq!(d.u_star, vec![0.0]);
        assert_eq!(d.p_star, 0.0);

        let sel = SelectorRegistry::default().build("scan", Arc::new(s), &spec).unwrap();
        let synth = Synthesizer::new(sel, Box::new(MaxFeasible), cfg, spec, b).unwrap();
        let SynthesisOutcome::Solved(d) = synth.step(&[0.5]).unwrap() else {
            panic!("expected a solution");
        };
        assert_relative_eq!(d.p_star, bound, max_relative = 1e-9);
        assert_relative_eq!(d.u_star[0].abs(), bound, max_relative = 1e-9);
        assert_relative_eq!(d.ball_radius, bound, max_relative = 1e-9);
        assert!(d.certified_slack.iter().all(|v| *v >= -1e-12));
    }

    #[test]
    fn integrator_infeasible_close_to_boundary() {
        let (spec, b, s) = integrator();
        // h = 0.005 < dt: the Grönwall term alone exceeds α(h).
        let out = synthesize_step(&[0.995], &s, &scalar_cfg(0.01), &spec, &b).unwrap();
        let SynthesisOutcome::Infeasible(r) = out else {
            panic!("expected infeasibility");
        };
        assert_eq!(r.reason, InfeasibleReason::EmptyInterval);
        assert!(r.margins.iter().any(|m| *m < 0.0));
        assert!(matches!(
            synthesize_step(&[1.5], &s, &scalar_cfg(0.01), &spec, &b),
            Err(Error::UnsafeState { .. })
        ));
    }

    #[test]
    fn unknown_strategy_names() {
        assert!(matches!(PSelectionRegistry::default().build("nope"), Err(Error::UnknownStrategy { .. })));
        assert_eq!(PSelectionRegistry::default().names(), vec!["max-feasible", "min-cost"]);
    }

    #[test]
    fn feasibility_margin_matches_constraints() {
        let (spec, b) = motor(1e6);
        let iv = DynamicsInterval {
            center: vec![-5.0, 3.0],
            half_width: 200.0,
            source: 0,
        };
        let x = [0.2, 0.1];
        let fm = feasibility_margin(&x, &iv, &b, &spec, 0.01).unwrap();
        let c = build_constraints(&x, &iv, &b, &spec, 0.01).unwrap();
        let v = c.values(200.0);
        // Each margin is minus the larger of the two s₁ families sharing s₂.
        assert_relative_eq!(fm.margins[0], -v[0].max(v[1]), max_relative = 1e-12);
        assert_relative_eq!(fm.margins[1], -v[2].max(v[3]), max_relative = 1e-12);
    }

    fn grid_interval(c: &ConstraintData, lo: f64, hi: f64, step: f64) -> (Option<(f64, f64)>, usize) {
        let n = ((hi - lo) / step).ceil() as usize;
        let mut runs = 0;
        let mut prev = false;
        let mut first = None;
        let mut last = None;
        for i in 0..=n {
            let p = (lo + i as f64 * step).min(hi);
            let ok = c.values(p).iter().all(|v| *v <= 0.0);
            if ok {
                first.get_or_insert(p);
                last = Some(p);
                if !prev {
                    runs += 1;
                }
            }
            prev = ok;
        }
        (first.zip(last), runs)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn interval_matches_grid(
            xdot in prop::collection::vec(-3.0..3.0f64, 1..4),
            gseed in prop::collection::vec(-2.0..2.0f64, 3),
            rhs in -5.0..40.0f64,
            l_h in 0.1..2.0f64,
        ) {
            let grad: Vec<f64> = gseed[..xdot.len()].to_vec();
            let c = ConstraintData::from_parts(xdot, grad, rhs, l_h);
            let (grid, runs) = grid_interval(&c, 0.0, 5.0, 1e-3);
            prop_assert!(runs <= 1);
            match (feasible_p_interval(&c, 0.0, 5.0), grid) {
                (Some((a, b)), Some((ga, gb))) => {
                    prop_assert!((a - ga).abs() <= 2e-3 && (b - gb).abs() <= 2e-3);
                }
                (None, None) => {}
                // A feasible sliver narrower than the grid step.
                (Some((a, b)), None) => prop_assert!(b - a < 1e-3),
                (None, Some(_)) => prop_assert!(false, "grid finds feasible points the solver misses"),
            }
        }

        #[test]
        fn smaller_p_never_grows_the_ball(
            u_held in -4.0..4.0f64,
            p1 in 0.0..300.0f64,
            p2 in 0.0..300.0f64,
        ) {
            let (spec, _) = motor(1.0);
            let s = SampleTriple::new(vec![0.1, 0.2], vec![u_held], vec![0.1, 0.2], 0.0, 0.01).unwrap();
            let fixed = w_fixed_part(&[0.1, 0.2], &s, &spec).unwrap();
            let cfg = scalar_cfg(0.01);
            let (lo, hi) = if p1 <= p2 { (p1, p2) } else { (p2, p1) };
            let ra = recover_control(fixed + lo, &s, &[0.1, 0.2], &cfg, &spec).unwrap();
            let rb = recover_control(fixed + hi, &s, &[0.1, 0.2], &cfg, &spec).unwrap();
            if let (Some(a), Some(b)) = (ra, rb) {
                prop_assert!((a[0] - u_held).abs() <= (b[0] - u_held).abs() + 1e-9);
            }
        }
    }
}
