//! TOML experiment configuration.
//!
//! ```toml
//! seed = 7
//!
//! [plant]
//! name = "dc-motor"              # see PlantRegistry
//!
//! [barrier]
//! kind = "band"                  # h = radius² − (x[index] − center)²
//! index = 0
//! center = 0.0
//! radius = 1.0
//! kappa = 1e6                    # α(h) = κh
//! alpha_lipschitz = "composite"  # or "strict"
//!
//! [lipschitz]
//! l_f = [39.3153, 1.6599]
//! l_g = [[32.2293], [22.9478]]
//! beta_norm = 391.43
//! g_sup = 83.78
//!
//! [synthesis]
//! dt = 0.01
//! input_lo = [-4.0]
//! input_hi = [4.0]
//! cost_matrix = [[1.0]]
//! operating_lo = [-1.0, -2.5]
//! operating_hi = [1.0, 2.5]
//! substeps = 100
//! fallback = "fail-stop"         # or "reuse-nearest-sample-input"
//! p_selection = "min-cost"       # or "max-feasible"
//! sample_selection = "pruned"    # or "scan", "nearest-rescored"
//!
//! [dataset]
//! n_traj = 200
//! n_steps = 1000
//! dt = 0.01
//! substeps = 10
//!
//! [run]
//! x0 = [0.5, 0.75]
//! horizon_steps = 1000
//! ```
//!
//! A half-space barrier uses `kind = "half-space"` with `normal` and `offset`
//! (`h = offset − normal·x`).

use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::barrier::{AlphaLipschitz, BandBarrier, Barrier, BarrierSpec, HalfSpaceBarrier};
use crate::error::{check_dim, Error, Result};
use crate::model::{FallbackPolicy, LipschitzSpec, SynthesisConfig};
use crate::plant::{ControlAffine, PlantRegistry};
use crate::region::BoxRegion;
use crate::sim::DatasetPlan;

/// The shipped DC-motor configuration.
pub const DEFAULT_CONFIG: &str = include_str!("../../../configs/dc_motor.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub plant: PlantSection,
    pub barrier: BarrierSection,
    pub lipschitz: LipschitzSection,
    pub synthesis: SynthesisSection,
    pub dataset: DatasetSection,
    pub run: RunSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSection {
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BarrierShape {
    Band { index: usize, center: f64, radius: f64 },
    HalfSpace { normal: Vec<f64>, offset: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierSection {
    #[serde(flatten)]
    pub shape: BarrierShape,
    pub kappa: f64,
    #[serde(default)]
    pub alpha_lipschitz: AlphaLipschitz,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LipschitzSection {
    pub l_f: Vec<f64>,
    pub l_g: Vec<Vec<f64>>,
    pub beta_norm: f64,
    pub g_sup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisSection {
    pub dt: f64,
    pub input_lo: Vec<f64>,
    pub input_hi: Vec<f64>,
    pub cost_matrix: Vec<Vec<f64>>,
    pub operating_lo: Vec<f64>,
    pub operating_hi: Vec<f64>,
    pub substeps: usize,
    pub fallback: FallbackPolicy,
    pub p_selection: String,
    pub sample_selection: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    pub n_traj: usize,
    pub n_steps: usize,
    pub dt: f64,
    pub substeps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub x0: Vec<f64>,
    pub horizon_steps: usize,
}

/// Validated, ready-to-use objects built from a [`Config`].
#[derive(Debug, Clone)]
pub struct Experiment {
    pub seed: u64,
    pub plant: Arc<dyn ControlAffine>,
    pub spec: LipschitzSpec,
    pub barrier: BarrierSpec,
    pub cfg: SynthesisConfig,
    pub plan: DatasetPlan,
    pub x0: Vec<f64>,
    pub horizon_steps: usize,
    pub p_selection: String,
    pub sample_selection: String,
}

impl Default for Config {
    fn default() -> Self {
        Self::parse(DEFAULT_CONFIG).expect("shipped configuration parses")
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn build(&self) -> Result<Experiment> {
        let cfg_err = |e: Error| Error::Config(e.to_string());
        let plant = PlantRegistry::default().build(&self.plant.name).map_err(cfg_err)?;
        let (n, m) = (plant.state_dim(), plant.input_dim());

        let s = &self.synthesis;
        let input_box = BoxRegion::new(s.input_lo.clone(), s.input_hi.clone()).map_err(cfg_err)?;
        let operating_box = BoxRegion::new(s.operating_lo.clone(), s.operating_hi.clone()).map_err(cfg_err)?;
        check_dim("input box", m, input_box.dim()).map_err(cfg_err)?;
        check_dim("operating box", n, operating_box.dim()).map_err(cfg_err)?;
        if s.cost_matrix.len() != m || s.cost_matrix.iter().any(|r| r.len() != m) {
            return Err(Error::Config(format!("cost_matrix must be {m}×{m}")));
        }
        let flat: Vec<f64> = s.cost_matrix.iter().flatten().copied().collect();
        let cfg = SynthesisConfig::new(
            s.dt,
            input_box.clone(),
            DMatrix::from_row_slice(m, m, &flat),
            operating_box.clone(),
            s.substeps,
            s.fallback,
        )
        .map_err(cfg_err)?;

        let l = &self.lipschitz;
        check_dim("l_f", n, l.l_f.len()).map_err(cfg_err)?;
        let spec = LipschitzSpec::new(l.l_f.clone(), l.l_g.clone(), l.beta_norm, l.g_sup, &input_box).map_err(cfg_err)?;

        let shape: Arc<dyn Barrier> = match &self.barrier.shape {
            BarrierShape::Band { index, center, radius } => {
                if *index >= n {
                    return Err(Error::Config(format!("barrier index {index} out of range for state dimension {n}")));
                }
                if !(*radius > 0.0) {
                    return Err(Error::Config(format!("barrier radius must be positive, got {radius}")));
                }
                Arc::new(BandBarrier {
                    dim: n,
                    index: *index,
                    center: *center,
                    radius: *radius,
                })
            }
            BarrierShape::HalfSpace { normal, offset } => Arc::new(HalfSpaceBarrier {
                normal: normal.clone(),
                offset: *offset,
            }),
        };
        let barrier = BarrierSpec::new(shape, self.barrier.kappa, &operating_box, self.barrier.alpha_lipschitz).map_err(cfg_err)?;

        let d = &self.dataset;
        if d.n_traj == 0 || d.n_steps == 0 {
            return Err(Error::Config("dataset n_traj and n_steps must be at least 1".into()));
        }
        if !(d.dt > 0.0) || d.substeps == 0 {
            return Err(Error::Config("dataset dt must be positive and substeps at least 1".into()));
        }
        check_dim("x0", n, self.run.x0.len()).map_err(cfg_err)?;

        Ok(Experiment {
            seed: self.seed,
            plant,
            spec,
            barrier,
            cfg,
            plan: DatasetPlan {
                n_traj: d.n_traj,
                n_steps: d.n_steps,
                dt: d.dt,
                substeps: d.substeps,
            },
            x0: self.run.x0.clone(),
            horizon_steps: self.run.horizon_steps,
            p_selection: s.p_selection.clone(),
            sample_selection: s.sample_selection.clone(),
        })
    }
}
