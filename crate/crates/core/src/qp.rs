//! Tiny box-constrained quadratic programs `min uᵀRu + qᵀu` with `R ≻ 0`.

use nalgebra::DMatrix;

use crate::linalg;
use crate::region::BoxRegion;

/// Cyclic coordinate descent on `uᵀRu + qᵀu` over a box. Exact after one sweep for diagonal `R`.
pub fn box_qp(cost: &DMatrix<f64>, linear: &[f64], region: &BoxRegion) -> Vec<f64> {
    let m = region.dim();
    let mut u = region.clamp(&vec![0.0; m]);
    for _ in 0..2000 {
        let mut change: f64 = 0.0;
        for s in 0..m {
            let off: f64 = (0..m).filter(|&t| t != s).map(|t| cost[(s, t)] * u[t]).sum();
            // ∂/∂u_s: 2(R_ss u_s + off) + q_s = 0
            let v = ((-0.5 * linear[s] - off) / cost[(s, s)]).clamp(region.lo()[s], region.hi()[s]);
            change = change.max((v - u[s]).abs());
            u[s] = v;
        }
        if change < 1e-15 {
            break;
        }
    }
    u
}

/// Minimizer of `uᵀRu` over a box.
pub fn box_min_cost(cost: &DMatrix<f64>, region: &BoxRegion) -> Vec<f64> {
    box_qp(cost, &vec![0.0; region.dim()], region)
}

/// `max_{u ∈ box} a·u`
pub fn box_support(a: &[f64], region: &BoxRegion) -> f64 {
    a.iter()
        .zip(region.lo().iter().zip(region.hi()))
        .map(|(ai, (l, h))| (ai * l).max(ai * h))
        .sum()
}

/// `min uᵀRu` s.t. `a·u ≥ b`, `u ∈ box`; `None` when the half-space misses the box.
pub fn halfspace_box_qp(cost: &DMatrix<f64>, a: &[f64], b: f64, region: &BoxRegion) -> Option<Vec<f64>> {
    if box_support(a, region) < b {
        return None;
    }
    if region.dim() == 1 {
        let (lo, hi) = (region.lo()[0], region.hi()[0]);
        let (lo, hi) = if a[0] > 0.0 {
            (lo.max(b / a[0]), hi)
        } else if a[0] < 0.0 {
            (lo, hi.min(b / a[0]))
        } else {
            (lo, hi)
        };
        if lo > hi {
            return None;
        }
        return Some(vec![0.0_f64.clamp(lo, hi)]);
    }
    let u0 = box_min_cost(cost, region);
    if linalg::dot(a, &u0) >= b {
        return Some(u0);
    }
    // Dual ascent on λ ≥ 0: u(λ) = argmin uᵀRu − λ a·u over the box; a·u(λ) is nondecreasing.
    let at = |lambda: f64| {
        let q: Vec<f64> = a.iter().map(|v| -lambda * v).collect();
        box_qp(cost, &q, region)
    };
    let mut hi = 1.0;
    let mut u_hi = at(hi);
    let mut doublings = 0;
    while linalg::dot(a, &u_hi) < b {
        hi *= 2.0;
        u_hi = at(hi);
        doublings += 1;
        if doublings > 200 {
            return None;
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let u = at(mid);
        if linalg::dot(a, &u) >= b {
            hi = mid;
            u_hi = u;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    Some(u_hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ib1() -> BoxRegion {
        BoxRegion::symmetric(&[4.0]).unwrap()
    }

    #[test]
    fn scalar_cases() {
        let r = DMatrix::identity(1, 1);
        assert_eq!(halfspace_box_qp(&r, &[1.0], -3.0, &ib1()), Some(vec![0.0]));
        assert_eq!(halfspace_box_qp(&r, &[2.0], 4.0, &ib1()), Some(vec![2.0]));
        assert_eq!(halfspace_box_qp(&r, &[1.0], 10.0, &ib1()), None);
        assert_eq!(halfspace_box_qp(&r, &[-1.0], 1.0, &ib1()), Some(vec![-1.0]));
    }

    #[test]
    fn two_inputs_projection() {
        // min ‖u‖² s.t. u₁ + u₂ ≥ 2 → (1, 1)
        let r = DMatrix::identity(2, 2);
        let b = BoxRegion::symmetric(&[4.0, 4.0]).unwrap();
        let u = halfspace_box_qp(&r, &[1.0, 1.0], 2.0, &b).unwrap();
        assert!((u[0] - 1.0).abs() < 1e-9 && (u[1] - 1.0).abs() < 1e-9, "{u:?}");
        // box-clipped: u₁ ≤ 0.5 forces u₂ = 1.5
        let b = BoxRegion::new(vec![-4.0, -4.0], vec![0.5, 4.0]).unwrap();
        let u = halfspace_box_qp(&r, &[1.0, 1.0], 2.0, &b).unwrap();
        assert!((u[0] - 0.5).abs() < 1e-9 && (u[1] - 1.5).abs() < 1e-9, "{u:?}");
    }

    #[test]
    fn box_min_with_coupling() {
        let r = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let b = BoxRegion::new(vec![1.0, -4.0], vec![3.0, 4.0]).unwrap();
        // u₁ = 1 (clipped), then u₂ = −u₁/2
        let u = box_min_cost(&r, &b);
        assert!((u[0] - 1.0).abs() < 1e-12 && (u[1] + 0.5).abs() < 1e-12);
    }
}
