//! Sampled-data closed-loop simulation, dataset generation, the known-dynamics
//! baseline and the safety monitor.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::barrier::BarrierSpec;
use crate::controller::{Controller, StepDiagnostics};
use crate::dataset::SampleTriple;
use crate::error::{check_dim, Error, Result};
use crate::linalg;
use crate::model::SynthesisConfig;
use crate::plant::{ControlAffine, Plant};
use crate::qp;
use crate::region::BoxRegion;

fn rk4_step(plant: &dyn Plant, x: &[f64], u: &[f64], h: f64) -> Vec<f64> {
    let k1 = plant.rate(x, u);
    let k2 = plant.rate(&linalg::axpy(x, 0.5 * h, &k1), u);
    let k3 = plant.rate(&linalg::axpy(x, 0.5 * h, &k2), u);
    let k4 = plant.rate(&linalg::axpy(x, h, &k3), u);
    x.iter()
        .enumerate()
        .map(|(i, xi)| xi + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

/// One held-input period, integrated with classic RK4 on `substeps` equal steps.
#[derive(Debug, Clone, PartialEq)]
pub struct ZohSegment {
    pub x_next: Vec<f64>,
    /// `(time since segment start, state)` for substeps `1..=substeps`.
    pub fine: Vec<(f64, Vec<f64>)>,
}

impl ZohSegment {
    /// Offset of the first fine point outside `region`, if any.
    pub fn first_exit(&self, region: &BoxRegion) -> Option<f64> {
        self.fine.iter().find(|(_, x)| !region.contains(x)).map(|(t, _)| *t)
    }
}

pub fn integrate_zoh(plant: &dyn Plant, x0: &[f64], u: &[f64], dt: f64, substeps: usize) -> Result<ZohSegment> {
    check_dim("state", plant.state_dim(), x0.len())?;
    check_dim("input", plant.input_dim(), u.len())?;
    if substeps == 0 {
        return Err(Error::InvalidValue {
            what: "substeps",
            reason: "must be at least 1".into(),
        });
    }
    let h = dt / substeps as f64;
    let mut x = x0.to_vec();
    let mut fine = Vec::with_capacity(substeps);
    for i in 1..=substeps {
        x = rk4_step(plant, &x, u, h);
        let t = if i == substeps { dt } else { i as f64 * h };
        fine.push((t, x.clone()));
    }
    Ok(ZohSegment { x_next: x, fine })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub sample_times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Held input for each period; one fewer than `states`.
    pub inputs: Vec<Vec<f64>>,
    pub fine_trace: Vec<(f64, Vec<f64>)>,
    pub min_h: f64,
    /// Time of the first fine-trace state outside the operating box.
    pub box_exit: Option<f64>,
}

impl Trajectory {
    fn start(x0: &[f64], h0: f64) -> Self {
        Self {
            sample_times: vec![0.0],
            states: vec![x0.to_vec()],
            inputs: Vec::new(),
            fine_trace: vec![(0.0, x0.to_vec())],
            min_h: h0,
            box_exit: None,
        }
    }

    /// Input in effect at fine-trace row `i` (the last input is repeated at the final row).
    pub fn input_at_row(&self, i: usize, substeps: usize) -> Option<&[f64]> {
        if self.inputs.is_empty() {
            return None;
        }
        let period = (i / substeps.max(1)).min(self.inputs.len() - 1);
        Some(&self.inputs[period])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub x: Vec<f64>,
    pub h: f64,
    pub u: Vec<f64>,
    pub diagnostics: StepDiagnostics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Halt {
    pub step: usize,
    pub t: f64,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct ClosedLoopRun {
    pub trajectory: Trajectory,
    pub steps: Vec<StepRecord>,
    pub halted: Option<Halt>,
    pub substeps: usize,
}

/// Closed loop: the controller sees only the sampled state; the input is held
/// for `dt` while the plant is integrated at `cfg.substeps` resolution.
pub fn run_closed_loop(
    plant: &dyn Plant,
    controller: &mut dyn Controller,
    x0: &[f64],
    dt: f64,
    horizon_steps: usize,
    cfg: &SynthesisConfig,
    barrier: &BarrierSpec,
) -> Result<ClosedLoopRun> {
    check_dim("initial state", plant.state_dim(), x0.len())?;
    let h0 = barrier.h(x0);
    if h0 < 0.0 {
        return Err(Error::UnsafeState { h: h0 });
    }
    let mut traj = Trajectory::start(x0, h0);
    if !cfg.operating_box.contains(x0) {
        traj.box_exit = Some(0.0);
    }
    let mut steps = Vec::with_capacity(horizon_steps);
    let mut halted = None;
    let mut x = x0.to_vec();
    for z in 0..horizon_steps {
        let t = z as f64 * dt;
        let step = match controller.control(t, &x) {
            Ok(s) => s,
            Err(e) => {
                halted = Some(Halt {
                    step: z,
                    t,
                    reason: e.to_string(),
                });
                break;
            }
        };
        let seg = integrate_zoh(plant, &x, &step.u, dt, cfg.substeps)?;
        if traj.box_exit.is_none() {
            traj.box_exit = seg.first_exit(&cfg.operating_box).map(|off| t + off);
        }
        let t_next = (z + 1) as f64 * dt;
        let n_fine = seg.fine.len();
        for (i, (off, xf)) in seg.fine.into_iter().enumerate() {
            traj.min_h = traj.min_h.min(barrier.h(&xf));
            let tf = if i + 1 == n_fine { t_next } else { t + off };
            traj.fine_trace.push((tf, xf));
        }
        steps.push(StepRecord {
            t,
            h: barrier.h(&x),
            x: x.clone(),
            u: step.u.clone(),
            diagnostics: step.diagnostics,
        });
        traj.inputs.push(step.u);
        x = seg.x_next;
        traj.sample_times.push(t_next);
        traj.states.push(x.clone());
    }
    Ok(ClosedLoopRun {
        trajectory: traj,
        steps,
        halted,
        substeps: cfg.substeps,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetPlan {
    pub n_traj: usize,
    pub n_steps: usize,
    pub dt: f64,
    pub substeps: usize,
}

/// Random open-loop runs: initial states uniform over the operating box, held
/// inputs uniform over the input box. Keeps triples that start inside the box
/// with `h(x_start) ≥ 0`. Deterministic under `seed` (one RNG stream per run).
pub fn generate_dataset(
    plant: &dyn Plant,
    plan: DatasetPlan,
    input_box: &BoxRegion,
    operating_box: &BoxRegion,
    barrier: &BarrierSpec,
    seed: u64,
) -> Result<Vec<SampleTriple>> {
    if plan.n_traj == 0 || plan.n_steps == 0 {
        return Err(Error::InvalidValue {
            what: "dataset plan",
            reason: "n_traj and n_steps must be at least 1".into(),
        });
    }
    if !(plan.dt > 0.0) {
        return Err(Error::InvalidValue {
            what: "dataset dt",
            reason: format!("must be positive, got {}", plan.dt),
        });
    }
    check_dim("input box", plant.input_dim(), input_box.dim())?;
    check_dim("operating box", plant.state_dim(), operating_box.dim())?;
    let runs: Vec<Result<Vec<SampleTriple>>> = (0..plan.n_traj)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let mut x = operating_box.sample(&mut rng);
            let mut out = Vec::new();
            for z in 0..plan.n_steps {
                let u = input_box.sample(&mut rng);
                let seg = integrate_zoh(plant, &x, &u, plan.dt, plan.substeps)?;
                if barrier.h(&x) >= 0.0 && operating_box.contains(&x) {
                    let t0 = z as f64 * plan.dt;
                    let t1 = (z + 1) as f64 * plan.dt;
                    out.push(SampleTriple::new(x.clone(), u, seg.x_next.clone(), t0, t1)?);
                }
                x = seg.x_next;
                if x.iter().any(|v| !v.is_finite()) {
                    break;
                }
            }
            Ok(out)
        })
        .collect();
    let mut all = Vec::new();
    for r in runs {
        all.extend(r?);
    }
    Ok(all)
}

/// Known-dynamics barrier QP: `min uᵀRu` s.t. `∇h·f + ∇h·g·u + α(h) ≥ 0`, `u ∈ U`.
pub fn baseline_cbf_qp(
    x: &[f64],
    plant: &dyn ControlAffine,
    barrier: &BarrierSpec,
    cfg: &SynthesisConfig,
) -> Result<Vec<f64>> {
    let h = barrier.h(x);
    if h < 0.0 {
        return Err(Error::UnsafeState { h });
    }
    let (a, b) = baseline_constraint(x, plant, barrier);
    qp::halfspace_box_qp(&cfg.cost_matrix, &a, b, &cfg.input_box).ok_or_else(|| Error::Infeasible {
        t: f64::NAN,
        reason: "baseline half-space does not meet the input box".into(),
    })
}

/// `(a, b)` with the baseline constraint written as `a·u ≥ b`.
pub fn baseline_constraint(x: &[f64], plant: &dyn ControlAffine, barrier: &BarrierSpec) -> (Vec<f64>, f64) {
    let grad = barrier.grad_h(x);
    let f = plant.drift(x);
    let g = plant.input_gain(x);
    let m = plant.input_dim();
    let a: Vec<f64> = (0..m).map(|s| grad.iter().zip(&g).map(|(gj, row)| gj * row[s]).sum()).collect();
    let b = -(linalg::dot(&grad, &f) + barrier.alpha(barrier.h(x)));
    (a, b)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SafetyReport {
    pub min_h: f64,
    /// `(fine-trace row, time)` of the first state with `h < 0`.
    pub first_violation: Option<(usize, f64)>,
    /// `(t, h)` along the fine trace.
    pub margin: Vec<(f64, f64)>,
    pub mean_boundary_distance: f64,
    pub min_boundary_distance: f64,
}

pub fn safety_monitor(traj: &Trajectory, barrier: &BarrierSpec) -> SafetyReport {
    let margin: Vec<(f64, f64)> = traj.fine_trace.iter().map(|(t, x)| (*t, barrier.h(x))).collect();
    let first_violation = margin.iter().position(|(_, h)| *h < 0.0).map(|i| (i, margin[i].0));
    let dists: Vec<f64> = traj
        .fine_trace
        .iter()
        .map(|(_, x)| barrier.barrier().boundary_distance(x))
        .collect();
    SafetyReport {
        min_h: margin.iter().map(|(_, h)| *h).fold(f64::INFINITY, f64::min),
        first_violation,
        margin,
        mean_boundary_distance: dists.iter().sum::<f64>() / dists.len().max(1) as f64,
        min_boundary_distance: dists.iter().cloned().fold(f64::INFINITY, f64::min),
    }
}

/// One row of a sampling-period sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct DtSweepRow {
    pub dt: f64,
    pub gronwall_term: f64,
    pub probe_states: usize,
    /// Fraction of the probe states with a certified input.
    pub feasible_fraction: f64,
    pub closed_loop_steps: usize,
    pub closed_loop_certified: usize,
    pub min_h: f64,
    pub halted: bool,
}

/// For each period: the Grönwall term, certified-input coverage of a fixed
/// grid of safe states (`probe_per_axis` points per axis of the operating box),
/// and one closed-loop run from `x0`. Periods are evaluated concurrently.
#[allow(clippy::too_many_arguments)]
pub fn sweep_dt(
    plant: &dyn Plant,
    samples: &std::sync::Arc<crate::dataset::SampleSet>,
    dts: &[f64],
    cfg: &SynthesisConfig,
    spec: &crate::model::LipschitzSpec,
    barrier: &BarrierSpec,
    selection: (&str, &str),
    x0: &[f64],
    horizon_s: f64,
    probe_per_axis: usize,
) -> Result<Vec<DtSweepRow>> {
    use crate::controller::{SynthesizedController, StepStatus};
    use crate::synthesis::{SynthesisOutcome, Synthesizer};

    let probes: Vec<Vec<f64>> = cfg
        .operating_box
        .grid(probe_per_axis)
        .into_iter()
        .filter(|x| barrier.h(x) >= 0.0)
        .collect();
    dts.par_iter()
        .map(|&dt| {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(Error::InvalidValue {
                    what: "dt",
                    reason: format!("sampling period must be positive, got {dt}"),
                });
            }
            let mut c = cfg.clone();
            c.dt = dt;
            let gronwall_term = crate::bounds::gronwall_term(dt, barrier, spec)?;
            let synth = Synthesizer::from_names(samples.clone(), selection.0, selection.1, c.clone(), spec.clone(), barrier.clone())?;
            let mut feasible = 0;
            for x in &probes {
                if let SynthesisOutcome::Solved(_) = synth.step(x)? {
                    feasible += 1;
                }
            }
            let mut ctl = SynthesizedController::new(synth, c.fallback_policy);
            let steps = (horizon_s / dt).round() as usize;
            let run = run_closed_loop(plant, &mut ctl, x0, dt, steps, &c, barrier)?;
            Ok(DtSweepRow {
                dt,
                gronwall_term,
                probe_states: probes.len(),
                feasible_fraction: feasible as f64 / probes.len().max(1) as f64,
                closed_loop_steps: run.steps.len(),
                closed_loop_certified: run
                    .steps
                    .iter()
                    .filter(|s| s.diagnostics.status == StepStatus::Certified)
                    .count(),
                min_h: run.trajectory.min_h,
                halted: run.halted.is_some(),
            })
        })
        .collect()
}
