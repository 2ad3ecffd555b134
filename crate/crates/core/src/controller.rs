//! Sampled-state feedback controllers, selectable by name.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::barrier::BarrierSpec;
use crate::dataset::SampleSet;
use crate::error::{Error, Result};
use crate::model::{FallbackPolicy, LipschitzSpec, SynthesisConfig};
use crate::plant::ControlAffine;
use crate::sim::{baseline_cbf_qp, baseline_constraint};
use crate::synthesis::{InfeasibleReason, SynthesisOutcome, Synthesizer};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepStatus {
    /// Input certified by the data-driven constraints.
    Certified,
    /// Known-dynamics QP solution.
    Baseline,
    /// Uncertified input applied by the fallback policy.
    Fallback,
}

impl StepStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Certified => "certified",
            Self::Baseline => "baseline",
            Self::Fallback => "fallback",
        }
    }
}

/// Per-step record. Fields that do not apply to a controller are `NaN`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    pub status: StepStatus,
    pub sample: Option<usize>,
    pub p_star: f64,
    pub ball_radius: f64,
    pub margins: [f64; 4],
    pub gronwall_term: f64,
}

impl StepDiagnostics {
    fn blank(status: StepStatus) -> Self {
        Self {
            status,
            sample: None,
            p_star: f64::NAN,
            ball_radius: f64::NAN,
            margins: [f64::NAN; 4],
            gronwall_term: f64::NAN,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlStep {
    pub u: Vec<f64>,
    pub diagnostics: StepDiagnostics,
}

pub trait Controller: Send {
    fn name(&self) -> &'static str;
    /// Input to hold over the period starting at `t`, given only the sampled state.
    fn control(&mut self, t: f64, x: &[f64]) -> Result<ControlStep>;
}

/// Data-driven certified controller. Has no access to the plant.
pub struct SynthesizedController {
    synth: Synthesizer,
    fallback: FallbackPolicy,
}

impl SynthesizedController {
    pub fn new(synth: Synthesizer, fallback: FallbackPolicy) -> Self {
        Self { synth, fallback }
    }

    fn fall_back(&self, t: f64, x: &[f64], reason: String, mut diag: StepDiagnostics) -> Result<ControlStep> {
        match self.fallback {
            FallbackPolicy::FailStop => Err(Error::Infeasible { t, reason }),
            FallbackPolicy::ReuseNearestSampleInput => {
                let i = self.synth.samples().nearest(x);
                let u = self.synth.config().input_box.clamp(&self.synth.samples().get(i).u_held);
                diag.status = StepStatus::Fallback;
                diag.sample = Some(i);
                Ok(ControlStep { u, diagnostics: diag })
            }
        }
    }
}

impl Controller for SynthesizedController {
    fn name(&self) -> &'static str {
        "synth"
    }

    fn control(&mut self, t: f64, x: &[f64]) -> Result<ControlStep> {
        match self.synth.step(x) {
            Ok(SynthesisOutcome::Solved(d)) => Ok(ControlStep {
                diagnostics: StepDiagnostics {
                    status: StepStatus::Certified,
                    sample: Some(d.sample),
                    p_star: d.p_star,
                    ball_radius: d.ball_radius,
                    margins: d.margins,
                    gronwall_term: d.gronwall_term,
                },
                u: d.u_star,
            }),
            Ok(SynthesisOutcome::Infeasible(r)) => {
                let why = match r.reason {
                    InfeasibleReason::EmptyInterval => "no feasible interval half-width",
                    InfeasibleReason::Unrealizable => "no input realizes a feasible half-width",
                };
                let diag = StepDiagnostics {
                    margins: r.margins,
                    gronwall_term: r.gronwall_term,
                    ..StepDiagnostics::blank(StepStatus::Fallback)
                };
                self.fall_back(t, x, why.into(), diag)
            }
            Err(Error::UnsafeState { h }) => {
                self.fall_back(t, x, format!("state outside safe set (h = {h})"), StepDiagnostics::blank(StepStatus::Fallback))
            }
            Err(e) => Err(e),
        }
    }
}

/// Barrier QP with the true split dynamics.
pub struct BaselineController {
    plant: Arc<dyn ControlAffine>,
    barrier: BarrierSpec,
    cfg: SynthesisConfig,
}

impl BaselineController {
    pub fn new(plant: Arc<dyn ControlAffine>, barrier: BarrierSpec, cfg: SynthesisConfig) -> Self {
        Self { plant, barrier, cfg }
    }
}

impl Controller for BaselineController {
    fn name(&self) -> &'static str {
        "baseline"
    }

    fn control(&mut self, t: f64, x: &[f64]) -> Result<ControlStep> {
        match baseline_cbf_qp(x, self.plant.as_ref(), &self.barrier, &self.cfg) {
            Ok(u) => {
                let (a, b) = baseline_constraint(x, self.plant.as_ref(), &self.barrier);
                let slack = crate::linalg::dot(&a, &u) - b;
                let mut diag = StepDiagnostics::blank(StepStatus::Baseline);
                diag.margins[0] = slack;
                Ok(ControlStep { u, diagnostics: diag })
            }
            Err(e) if self.cfg.fallback_policy == FallbackPolicy::FailStop => Err(match e {
                Error::Infeasible { reason, .. } => Error::Infeasible { t, reason },
                other => other,
            }),
            Err(_) => {
                // Least-violating vertex of the input box.
                let (a, _) = baseline_constraint(x, self.plant.as_ref(), &self.barrier);
                let u: Vec<f64> = a
                    .iter()
                    .zip(self.cfg.input_box.lo().iter().zip(self.cfg.input_box.hi()))
                    .map(|(ai, (l, h))| if *ai >= 0.0 { *h } else { *l })
                    .collect();
                Ok(ControlStep {
                    u,
                    diagnostics: StepDiagnostics::blank(StepStatus::Fallback),
                })
            }
        }
    }
}

/// Everything a controller constructor may draw on. The synthesized controller
/// reads only the dataset; `known_plant` exists for the baseline.
pub struct ControllerContext {
    pub cfg: SynthesisConfig,
    pub spec: LipschitzSpec,
    pub barrier: BarrierSpec,
    pub samples: Option<Arc<SampleSet>>,
    pub known_plant: Option<Arc<dyn ControlAffine>>,
    pub sample_selection: String,
    pub p_selection: String,
}

type ControllerCtor = fn(&ControllerContext) -> Result<Box<dyn Controller>>;

pub struct ControllerRegistry {
    ctors: BTreeMap<&'static str, ControllerCtor>,
}

impl Default for ControllerRegistry {
    fn default() -> Self {
        let mut r = Self {
            ctors: BTreeMap::new(),
        };
        r.register("synth", |ctx| {
            let samples = ctx
                .samples
                .clone()
                .ok_or_else(|| Error::Config("the synthesized controller needs a dataset".into()))?;
            let synth = Synthesizer::from_names(
                samples,
                &ctx.sample_selection,
                &ctx.p_selection,
                ctx.cfg.clone(),
                ctx.spec.clone(),
                ctx.barrier.clone(),
            )?;
            Ok(Box::new(SynthesizedController::new(synth, ctx.cfg.fallback_policy)))
        });
        r.register("baseline", |ctx| {
            let plant = ctx
                .known_plant
                .clone()
                .ok_or_else(|| Error::Config("the baseline controller needs the plant model".into()))?;
            Ok(Box::new(BaselineController::new(plant, ctx.barrier.clone(), ctx.cfg.clone())))
        });
        r
    }
}

impl ControllerRegistry {
    pub fn register(&mut self, name: &'static str, ctor: ControllerCtor) {
        self.ctors.insert(name, ctor);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.ctors.keys().copied().collect()
    }

    pub fn build(&self, name: &str, ctx: &ControllerContext) -> Result<Box<dyn Controller>> {
        let ctor = self.ctors.get(name).ok_or_else(|| Error::UnknownStrategy {
            kind: "controller",
            name: name.into(),
            available: self.names().join(", "),
        })?;
        ctor(ctx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::barrier::{AlphaLipschitz, HalfSpaceBarrier};
    use crate::dataset::SampleTriple;
    use crate::plant::Plant;
    use crate::region::BoxRegion;
    use nalgebra::DMatrix;

    #[derive(Debug)]
    struct Pushed;

    impl Plant for Pushed {
        fn state_dim(&self) -> usize {
            1
        }
        fn input_dim(&self) -> usize {
            1
        }
        fn rate(&self, _x: &[f64], u: &[f64]) -> Vec<f64> {
            vec![10.0 + u[0]]
        }
    }

    impl ControlAffine for Pushed {
        fn drift(&self, _x: &[f64]) -> Vec<f64> {
            vec![10.0]
        }
        fn input_gain(&self, _x: &[f64]) -> Vec<Vec<f64>> {
            vec![vec![1.0]]
        }
        fn as_plant(self: Arc<Self>) -> Arc<dyn Plant> {
            self
        }
    }

    fn context(policy: FallbackPolicy) -> ControllerContext {
        let ib = BoxRegion::symmetric(&[4.0]).unwrap();
        let ob = BoxRegion::symmetric(&[2.0]).unwrap();
        let barrier = BarrierSpec::new(
            Arc::new(HalfSpaceBarrier {
                normal: vec![1.0],
                offset: 1.0,
            }),
            1.0,
            &ob,
            AlphaLipschitz::Composite,
        )
        .unwrap();
        let samples = SampleSet::new(vec![
            SampleTriple::new(vec![0.0], vec![2.5], vec![0.0], 0.0, 0.01).unwrap(),
            SampleTriple::new(vec![0.9], vec![-1.5], vec![0.9], 0.0, 0.01).unwrap(),
        ])
        .unwrap();
        ControllerContext {
            spec: LipschitzSpec::new(vec![0.0], vec![vec![0.0]], 4.0, 1.0, &ib).unwrap(),
            cfg: SynthesisConfig::new(0.01, ib, DMatrix::from_row_slice(1, 1, &[1.0]), ob, 10, policy).unwrap(),
            barrier,
            samples: Some(Arc::new(samples)),
            known_plant: Some(Arc::new(Pushed)),
            sample_selection: "scan".into(),
            p_selection: "min-cost".into(),
        }
    }

    #[test]
    fn registry_lookup_and_missing_inputs() {
        let reg = ControllerRegistry::default();
        assert_eq!(reg.names(), vec!["baseline", "synth"]);
        let ctx = context(FallbackPolicy::FailStop);
        assert_eq!(reg.build("synth", &ctx).unwrap().name(), "synth");
        assert!(matches!(reg.build("mpc", &ctx), Err(Error::UnknownStrategy { .. })));
        let no_data = ControllerContext { samples: None, ..context(FallbackPolicy::FailStop) };
        assert!(matches!(reg.build("synth", &no_data), Err(Error::Config(_))));
        let no_plant = ControllerContext { known_plant: None, ..context(FallbackPolicy::FailStop) };
        assert!(matches!(reg.build("baseline", &no_plant), Err(Error::Config(_))));
    }

    #[test]
    fn certified_step_reports_diagnostics() {
        let mut c = ControllerRegistry::default().build("synth", &context(FallbackPolicy::FailStop)).unwrap();
        let s = c.control(0.0, &[0.0]).unwrap();
        assert_eq!(s.diagnostics.status, StepStatus::Certified);
        assert_eq!(s.diagnostics.sample, Some(0));
        assert!(s.diagnostics.margins.iter().all(|m| *m >= 0.0));
    }

    #[test]
    fn fallback_policies_near_boundary() {
        // h = 0.005 < dt·κ: no certified input exists.
        let reg = ControllerRegistry::default();
        let mut stop = reg.build("synth", &context(FallbackPolicy::FailStop)).unwrap();
        assert!(matches!(stop.control(0.3, &[0.995]), Err(Error::Infeasible { t, .. }) if t == 0.3));

        let mut reuse = reg.build("synth", &context(FallbackPolicy::ReuseNearestSampleInput)).unwrap();
        let s = reuse.control(0.3, &[0.995]).unwrap();
        assert_eq!(s.diagnostics.status, StepStatus::Fallback);
        assert_eq!(s.diagnostics.sample, Some(1));
        assert_eq!(s.u, vec![-1.5]);
        let s = reuse.control(0.4, &[1.2]).unwrap();
        assert_eq!(s.diagnostics.status, StepStatus::Fallback);
    }

    #[test]
    fn baseline_fallback_takes_least_violating_vertex() {
        // ẋ = 10 + u needs u ≤ (1 − x) − 10, outside U = [−4, 4].
        let reg = ControllerRegistry::default();
        let mut stop = reg.build("baseline", &context(FallbackPolicy::FailStop)).unwrap();
        assert!(matches!(stop.control(0.2, &[0.5]), Err(Error::Infeasible { .. })));
        let mut reuse = reg.build("baseline", &context(FallbackPolicy::ReuseNearestSampleInput)).unwrap();
        let s = reuse.control(0.2, &[0.5]).unwrap();
        assert_eq!(s.u, vec![-4.0]);
        assert_eq!(s.diagnostics.status, StepStatus::Fallback);
    }
}
