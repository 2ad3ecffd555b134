//! Plant models. The synthesizer only ever sees the [`Plant`] rate through
//! recorded samples; [`ControlAffine`] split accessors are reserved for the
//! test harness and the known-dynamics baseline.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg;
use crate::region::BoxRegion;

pub trait Plant: Send + Sync + fmt::Debug {
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    /// `f(x) + g(x)u`
    fn rate(&self, x: &[f64], u: &[f64]) -> Vec<f64>;
}

pub trait ControlAffine: Plant {
    fn drift(&self, x: &[f64]) -> Vec<f64>;
    /// `g(x)` as `n` rows of length `m`.
    fn input_gain(&self, x: &[f64]) -> Vec<Vec<f64>>;

    /// Lossy upcast for callers that only need the rate.
    fn as_plant(self: Arc<Self>) -> Arc<dyn Plant>;
}

fn affine_rate<P: ControlAffine + ?Sized>(p: &P, x: &[f64], u: &[f64]) -> Vec<f64> {
    let f = p.drift(x);
    let gu = linalg::mat_vec(&p.input_gain(x), u);
    f.iter().zip(gu).map(|(a, b)| a + b).collect()
}

/// Armature-controlled DC motor: `x = [rotor current, angular velocity]`,
/// input is the stator current.
#[derive(Debug, Clone, Copy, Default)]
pub struct DcMotor;

impl DcMotor {
    pub const A11: f64 = 39.3153;
    pub const B1: f64 = 19.1083;
    pub const A22: f64 = 1.6599;
    pub const B2: f64 = 3.3333;
    pub const G1: f64 = 32.2293;
    pub const G2: f64 = 22.9478;
}

impl Plant for DcMotor {
    fn state_dim(&self) -> usize {
        2
    }

    fn input_dim(&self) -> usize {
        1
    }

    fn rate(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        affine_rate(self, x, u)
    }
}

impl ControlAffine for DcMotor {
    fn drift(&self, x: &[f64]) -> Vec<f64> {
        vec![-Self::A11 * x[0] + Self::B1, -Self::A22 * x[1] - Self::B2]
    }

    fn input_gain(&self, x: &[f64]) -> Vec<Vec<f64>> {
        vec![vec![-Self::G1 * x[1]], vec![Self::G2 * x[0]]]
    }

    fn as_plant(self: Arc<Self>) -> Arc<dyn Plant> {
        self
    }
}

/// `ẋ = u` in one dimension; all Lipschitz constants vanish.
#[derive(Debug, Clone, Copy, Default)]
pub struct ScalarIntegrator;

impl Plant for ScalarIntegrator {
    fn state_dim(&self) -> usize {
        1
    }

    fn input_dim(&self) -> usize {
        1
    }

    fn rate(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        affine_rate(self, x, u)
    }
}

impl ControlAffine for ScalarIntegrator {
    fn drift(&self, _x: &[f64]) -> Vec<f64> {
        vec![0.0]
    }

    fn input_gain(&self, _x: &[f64]) -> Vec<Vec<f64>> {
        vec![vec![1.0]]
    }

    fn as_plant(self: Arc<Self>) -> Arc<dyn Plant> {
        self
    }
}

/// Planar unicycle-like kinematics with a decaying drift:
/// `ẋ₁ = −a x₁ + u₁`, `ẋ₂ = −a x₂ + x₁ u₂`. Two inputs, used to exercise `m > 1`.
#[derive(Debug, Clone, Copy)]
pub struct CoupledPair {
    pub decay: f64,
}

impl Default for CoupledPair {
    fn default() -> Self {
        Self { decay: 0.5 }
    }
}

impl Plant for CoupledPair {
    fn state_dim(&self) -> usize {
        2
    }

    fn input_dim(&self) -> usize {
        2
    }

    fn rate(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        affine_rate(self, x, u)
    }
}

impl ControlAffine for CoupledPair {
    fn drift(&self, x: &[f64]) -> Vec<f64> {
        vec![-self.decay * x[0], -self.decay * x[1]]
    }

    fn input_gain(&self, x: &[f64]) -> Vec<Vec<f64>> {
        vec![vec![1.0, 0.0], vec![0.0, x[0]]]
    }

    fn as_plant(self: Arc<Self>) -> Arc<dyn Plant> {
        self
    }
}

type PlantCtor = fn() -> Arc<dyn ControlAffine>;

/// Built-in plants, selectable by name.
pub struct PlantRegistry {
    ctors: BTreeMap<&'static str, PlantCtor>,
}

impl Default for PlantRegistry {
    fn default() -> Self {
        let mut r = Self {
            ctors: BTreeMap::new(),
        };
        r.register("dc-motor", || Arc::new(DcMotor));
        r.register("scalar-integrator", || Arc::new(ScalarIntegrator));
        r.register("coupled-pair", || Arc::new(CoupledPair::default()));
        r
    }
}

impl PlantRegistry {
    pub fn register(&mut self, name: &'static str, ctor: PlantCtor) {
        self.ctors.insert(name, ctor);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.ctors.keys().copied().collect()
    }

    pub fn build(&self, name: &str) -> Result<Arc<dyn ControlAffine>> {
        self.ctors
            .get(name)
            .map(|c| c())
            .ok_or_else(|| Error::UnknownStrategy {
                kind: "plant",
                name: name.into(),
                available: self.names().join(", "),
            })
    }
}

/// Grid estimates of `sup ‖f(x)+g(x)u‖₂` and `sup ‖g(x)‖` over the two boxes.
///
/// Exact for plants whose rate is affine in `x` for fixed `u` (maxima of convex
/// functions over boxes sit at vertices, which the grid contains).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Suprema {
    pub beta_norm: f64,
    pub g_sup: f64,
}

pub fn grid_suprema(
    plant: &dyn ControlAffine,
    operating_box: &BoxRegion,
    input_box: &BoxRegion,
    per_axis: usize,
) -> Suprema {
    let xs = operating_box.grid(per_axis);
    let us = input_box.grid(per_axis);
    let mut beta: f64 = 0.0;
    let mut g_sup: f64 = 0.0;
    for x in &xs {
        g_sup = g_sup.max(linalg::spectral_norm(&plant.input_gain(x)));
        for u in &us {
            beta = beta.max(linalg::norm(&plant.rate(x, u)));
        }
    }
    Suprema {
        beta_norm: beta,
        g_sup,
    }
}
