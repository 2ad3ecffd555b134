//! Safe-set functions `h` and the class-K function `α` paired with them.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::region::BoxRegion;

/// A continuously differentiable safe-set function; the safe set is `{h ≥ 0}`.
pub trait Barrier: Send + Sync + fmt::Debug {
    fn state_dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    fn gradient(&self, x: &[f64]) -> Vec<f64>;

    /// Upper bound on `‖∇h‖₂` over `region`.
    fn gradient_bound(&self, region: &BoxRegion) -> f64;

    /// Signed Euclidean distance to `{h = 0}` (positive inside the safe set).
    fn boundary_distance(&self, x: &[f64]) -> f64;

    /// Boundary planes `x[axis] = value` for plotting, if the boundary is axis-aligned.
    fn axis_boundaries(&self) -> Vec<(usize, f64)> {
        Vec::new()
    }
}

/// `h(x) = r² − (x[index] − c)²`: the slab `|x[index] − c| ≤ r`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandBarrier {
    pub dim: usize,
    pub index: usize,
    pub center: f64,
    pub radius: f64,
}

impl Barrier for BandBarrier {
    fn state_dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        let d = x[self.index] - self.center;
        self.radius * self.radius - d * d
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim];
        g[self.index] = -2.0 * (x[self.index] - self.center);
        g
    }

    fn gradient_bound(&self, region: &BoxRegion) -> f64 {
        let lo = region.lo()[self.index] - self.center;
        let hi = region.hi()[self.index] - self.center;
        2.0 * lo.abs().max(hi.abs())
    }

    fn boundary_distance(&self, x: &[f64]) -> f64 {
        self.radius - (x[self.index] - self.center).abs()
    }

    fn axis_boundaries(&self) -> Vec<(usize, f64)> {
        vec![
            (self.index, self.center - self.radius),
            (self.index, self.center + self.radius),
        ]
    }
}

/// `h(x) = offset − normal·x`.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfSpaceBarrier {
    pub normal: Vec<f64>,
    pub offset: f64,
}

impl Barrier for HalfSpaceBarrier {
    fn state_dim(&self) -> usize {
        self.normal.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.offset - linalg::dot(&self.normal, x)
    }

    fn gradient(&self, _x: &[f64]) -> Vec<f64> {
        self.normal.iter().map(|a| -a).collect()
    }

    fn gradient_bound(&self, _region: &BoxRegion) -> f64 {
        linalg::norm(&self.normal)
    }

    fn boundary_distance(&self, x: &[f64]) -> f64 {
        self.value(x) / linalg::norm(&self.normal)
    }

    fn axis_boundaries(&self) -> Vec<(usize, f64)> {
        let nz: Vec<usize> = (0..self.normal.len()).filter(|&i| self.normal[i] != 0.0).collect();
        match nz.as_slice() {
            [i] => vec![(*i, self.offset / self.normal[*i])],
            _ => Vec::new(),
        }
    }
}

/// Which Lipschitz constant multiplies `‖x − x′‖₂` in the α-difference term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlphaLipschitz {
    /// Constant of the composite `α∘h`, i.e. `κ·L_h`.
    #[default]
    Composite,
    /// Constant of `α` alone, `κ`.
    Strict,
}

/// Barrier function together with `α(h) = κh` and the constants the bounds need.
#[derive(Debug, Clone)]
pub struct BarrierSpec {
    barrier: Arc<dyn Barrier>,
    kappa: f64,
    l_h: f64,
    l_alpha_eff: f64,
}

impl BarrierSpec {
    /// `l_h` is taken from the barrier's gradient bound over `operating_box`.
    pub fn new(
        barrier: Arc<dyn Barrier>,
        kappa: f64,
        operating_box: &BoxRegion,
        mode: AlphaLipschitz,
    ) -> Result<Self> {
        if barrier.state_dim() != operating_box.dim() {
            return Err(Error::Dimension {
                what: "barrier state",
                expected: operating_box.dim(),
                got: barrier.state_dim(),
            });
        }
        if !(kappa.is_finite() && kappa > 0.0) {
            return Err(Error::InvalidValue {
                what: "kappa",
                reason: format!("must be positive, got {kappa}"),
            });
        }
        let l_h = barrier.gradient_bound(operating_box);
        if !(l_h.is_finite() && l_h > 0.0) {
            return Err(Error::InvalidValue {
                what: "l_h",
                reason: format!("barrier gradient bound must be positive, got {l_h}"),
            });
        }
        let l_alpha_eff = match mode {
            AlphaLipschitz::Composite => kappa * l_h,
            AlphaLipschitz::Strict => kappa,
        };
        Ok(Self {
            barrier,
            kappa,
            l_h,
            l_alpha_eff,
        })
    }

    pub fn h(&self, x: &[f64]) -> f64 {
        self.barrier.value(x)
    }

    pub fn grad_h(&self, x: &[f64]) -> Vec<f64> {
        self.barrier.gradient(x)
    }

    pub fn alpha(&self, h: f64) -> f64 {
        self.kappa * h
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn l_h(&self) -> f64 {
        self.l_h
    }

    pub fn l_alpha_eff(&self) -> f64 {
        self.l_alpha_eff
    }

    pub fn barrier(&self) -> &Arc<dyn Barrier> {
        &self.barrier
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn motor_box() -> BoxRegion {
        BoxRegion::new(vec![-1.0, -2.5], vec![1.0, 2.5]).unwrap()
    }

    fn motor_band() -> BandBarrier {
        BandBarrier {
            dim: 2,
            index: 0,
            center: 0.0,
            radius: 1.0,
        }
    }

    #[test]
    fn band_gradient_at_reference_state() {
        let b = motor_band();
        assert_eq!(b.gradient(&[0.5, 0.75]), vec![-1.0, 0.0]);
        assert_eq!(b.value(&[0.5, 0.75]), 0.75);
    }

    #[test]
    fn gradient_norm_within_l_h() {
        let ob = motor_box();
        let spec = BarrierSpec::new(Arc::new(motor_band()), 1.0, &ob, AlphaLipschitz::Composite).unwrap();
        assert_eq!(spec.l_h(), 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            let x = ob.sample(&mut rng);
            assert!(linalg::norm(&spec.grad_h(&x)) <= spec.l_h());
        }
    }

    #[test]
    fn alpha_is_class_k() {
        let ob = motor_box();
        let spec = BarrierSpec::new(Arc::new(motor_band()), 3.0, &ob, AlphaLipschitz::Composite).unwrap();
        assert_eq!(spec.alpha(0.0), 0.0);
        let pts: Vec<f64> = (-20..=20).map(|i| i as f64 * 0.1).collect();
        assert!(pts.windows(2).all(|w| spec.alpha(w[0]) < spec.alpha(w[1])));
    }

    #[test]
    fn alpha_modes() {
        let ob = motor_box();
        let c = BarrierSpec::new(Arc::new(motor_band()), 3.0, &ob, AlphaLipschitz::Composite).unwrap();
        let s = BarrierSpec::new(Arc::new(motor_band()), 3.0, &ob, AlphaLipschitz::Strict).unwrap();
        assert_eq!(c.l_alpha_eff(), 6.0);
        assert_eq!(s.l_alpha_eff(), 3.0);
    }

    #[test]
    fn rejects_nonpositive_kappa() {
        let ob = motor_box();
        assert!(BarrierSpec::new(Arc::new(motor_band()), 0.0, &ob, AlphaLipschitz::Composite).is_err());
    }

    #[test]
    fn half_space_distance() {
        let b = HalfSpaceBarrier {
            normal: vec![3.0, 4.0],
            offset: 10.0,
        };
        assert_eq!(b.boundary_distance(&[0.0, 0.0]), 2.0);
        assert_eq!(b.gradient_bound(&motor_box()), 5.0);
    }
}
