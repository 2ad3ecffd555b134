//! Shared domain types: Lipschitz data and synthesis configuration.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::bounds;
use crate::error::{check_dim, Error, Result};
use crate::region::BoxRegion;

/// Known regularity constants of the unknown dynamics `ẋ = f(x) + g(x)u`.
///
/// `l_f[j]` bounds the Lipschitz constant of `f_j`, `l_g[j][s]` that of `g_{j,s}`.
/// `beta_norm` bounds `‖f(x) + g(x)u‖₂` and `g_sup` bounds `‖g(x)‖` over the
/// operating region and input box. `theta_max` is the maximum of
/// `θ(u) = √Σ_j (L_fj + Σ_s L_gjs |u_s|)²` over the input box.
#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzSpec {
    l_f: Vec<f64>,
    l_g: Vec<Vec<f64>>,
    beta_norm: f64,
    g_sup: f64,
    theta_max: f64,
}

impl LipschitzSpec {
    pub fn new(
        l_f: Vec<f64>,
        l_g: Vec<Vec<f64>>,
        beta_norm: f64,
        g_sup: f64,
        input_box: &BoxRegion,
    ) -> Result<Self> {
        let n = l_f.len();
        if n == 0 {
            return Err(Error::InvalidValue {
                what: "l_f",
                reason: "state dimension must be at least 1".into(),
            });
        }
        check_dim("l_g rows", n, l_g.len())?;
        let m = input_box.dim();
        for row in &l_g {
            check_dim("l_g columns", m, row.len())?;
        }
        let all = l_f.iter().chain(l_g.iter().flatten());
        for v in all.chain([&beta_norm, &g_sup]) {
            if !(v.is_finite() && *v >= 0.0) {
                return Err(Error::InvalidValue {
                    what: "Lipschitz constant",
                    reason: format!("{v} is negative or non-finite"),
                });
            }
        }

        let mut spec = Self {
            l_f,
            l_g,
            beta_norm,
            g_sup,
            theta_max: 0.0,
        };
        // θ is nondecreasing in every |u_s|, so the max sits at the vertex of largest magnitude.
        spec.theta_max = bounds::theta(&input_box.max_abs_vertex(), &spec)?;
        Ok(spec)
    }

    pub fn state_dim(&self) -> usize {
        self.l_f.len()
    }

    pub fn input_dim(&self) -> usize {
        self.l_g.first().map_or(0, Vec::len)
    }

    pub fn l_f(&self) -> &[f64] {
        &self.l_f
    }

    pub fn l_g(&self) -> &[Vec<f64>] {
        &self.l_g
    }

    pub fn beta_norm(&self) -> f64 {
        self.beta_norm
    }

    pub fn g_sup(&self) -> f64 {
        self.g_sup
    }

    pub fn theta_max(&self) -> f64 {
        self.theta_max
    }
}

/// Free-function form of [`LipschitzSpec::new`].
pub fn make_lipschitz_spec(
    l_f: Vec<f64>,
    l_g: Vec<Vec<f64>>,
    beta_norm: f64,
    g_sup: f64,
    input_box: &BoxRegion,
) -> Result<LipschitzSpec> {
    LipschitzSpec::new(l_f, l_g, beta_norm, g_sup, input_box)
}

/// What the synthesized controller does when no certified input exists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FallbackPolicy {
    /// Stop the run and report infeasibility.
    FailStop,
    /// Apply the held input of the Euclidean-nearest sample (uncertified).
    ReuseNearestSampleInput,
}

impl std::str::FromStr for FallbackPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fail-stop" => Ok(Self::FailStop),
            "reuse-nearest-sample-input" => Ok(Self::ReuseNearestSampleInput),
            other => Err(Error::UnknownStrategy {
                kind: "fallback policy",
                name: other.into(),
                available: "fail-stop, reuse-nearest-sample-input".into(),
            }),
        }
    }
}

impl std::fmt::Display for FallbackPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::FailStop => "fail-stop",
            Self::ReuseNearestSampleInput => "reuse-nearest-sample-input",
        })
    }
}

#[derive(Debug, Clone)]
pub struct SynthesisConfig {
    pub dt: f64,
    pub input_box: BoxRegion,
    pub cost_matrix: DMatrix<f64>,
    pub operating_box: BoxRegion,
    pub substeps: usize,
    pub fallback_policy: FallbackPolicy,
}

impl SynthesisConfig {
    pub fn new(
        dt: f64,
        input_box: BoxRegion,
        cost_matrix: DMatrix<f64>,
        operating_box: BoxRegion,
        substeps: usize,
        fallback_policy: FallbackPolicy,
    ) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidValue {
                what: "dt",
                reason: format!("sampling period must be positive, got {dt}"),
            });
        }
        if substeps == 0 {
            return Err(Error::InvalidValue {
                what: "substeps",
                reason: "must be at least 1".into(),
            });
        }
        let m = input_box.dim();
        if cost_matrix.nrows() != m || cost_matrix.ncols() != m {
            return Err(Error::Dimension {
                what: "cost matrix",
                expected: m,
                got: cost_matrix.nrows().max(cost_matrix.ncols()),
            });
        }
        let asym = (&cost_matrix - cost_matrix.transpose()).abs().max();
        if asym > 1e-12 * (1.0 + cost_matrix.abs().max()) {
            return Err(Error::InvalidValue {
                what: "cost matrix",
                reason: "not symmetric".into(),
            });
        }
        let min_eig = cost_matrix
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if min_eig <= 0.0 {
            return Err(Error::InvalidValue {
                what: "cost matrix",
                reason: format!("not positive definite (smallest eigenvalue {min_eig})"),
            });
        }
        Ok(Self {
            dt,
            input_box,
            cost_matrix,
            operating_box,
            substeps,
            fallback_policy,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_box.dim()
    }

    pub fn state_dim(&self) -> usize {
        self.operating_box.dim()
    }

    /// `uᵀRu`
    pub fn cost(&self, u: &[f64]) -> f64 {
        let v = nalgebra::DVector::from_column_slice(u);
        (v.transpose() * &self.cost_matrix * &v)[(0, 0)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_box() -> BoxRegion {
        BoxRegion::symmetric(&[4.0]).unwrap()
    }

    #[test]
    fn rejects_negative_constant() {
        let err = LipschitzSpec::new(vec![-1.0], vec![vec![0.0]], 1.0, 1.0, &unit_box());
        assert!(matches!(err, Err(Error::InvalidValue { .. })));
    }

    #[test]
    fn rejects_dimension_mismatch() {
        let err = LipschitzSpec::new(vec![1.0, 2.0], vec![vec![0.0]], 1.0, 1.0, &unit_box());
        assert!(matches!(err, Err(Error::Dimension { .. })));
        let err = LipschitzSpec::new(vec![1.0], vec![vec![0.0, 1.0]], 1.0, 1.0, &unit_box());
        assert!(matches!(err, Err(Error::Dimension { .. })));
    }

    #[test]
    fn zero_constants_give_zero_theta() {
        let s = LipschitzSpec::new(vec![0.0, 0.0], vec![vec![0.0], vec![0.0]], 1.0, 1.0, &unit_box())
            .unwrap();
        assert_eq!(s.theta_max(), 0.0);
    }

    #[test]
    fn input_independent_theta() {
        let s = LipschitzSpec::new(vec![1.0], vec![vec![0.0]], 1.0, 1.0, &unit_box()).unwrap();
        assert_eq!(s.theta_max(), 1.0);
    }

    #[test]
    fn cost_matrix_must_be_positive_definite() {
        let ob = BoxRegion::symmetric(&[1.0]).unwrap();
        let bad = DMatrix::from_row_slice(1, 1, &[0.0]);
        assert!(SynthesisConfig::new(0.01, unit_box(), bad, ob.clone(), 10, FallbackPolicy::FailStop).is_err());
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        let b2 = BoxRegion::symmetric(&[1.0, 1.0]).unwrap();
        assert!(SynthesisConfig::new(0.01, b2, asym, ob.clone(), 10, FallbackPolicy::FailStop).is_err());
        let ok = DMatrix::from_row_slice(1, 1, &[2.0]);
        let cfg = SynthesisConfig::new(0.01, unit_box(), ok, ob, 10, FallbackPolicy::FailStop).unwrap();
        assert_eq!(cfg.cost(&[3.0]), 18.0);
    }

    #[test]
    fn rejects_bad_dt_and_substeps() {
        let ob = BoxRegion::symmetric(&[1.0]).unwrap();
        let r = DMatrix::from_row_slice(1, 1, &[1.0]);
        assert!(SynthesisConfig::new(0.0, unit_box(), r.clone(), ob.clone(), 10, FallbackPolicy::FailStop).is_err());
        assert!(SynthesisConfig::new(0.01, unit_box(), r, ob, 0, FallbackPolicy::FailStop).is_err());
    }
}
