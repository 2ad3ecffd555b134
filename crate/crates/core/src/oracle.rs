//! Data-driven evaluation of the unknown dynamics from a single recorded triple.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::barrier::BarrierSpec;
use crate::bounds::{self, w_bound, w_fixed_part};
use crate::dataset::{SampleSet, SampleTriple};
use crate::error::{check_dim, Error, Result};
use crate::linalg;
use crate::model::LipschitzSpec;

/// `[center − w·1, center + w·1]`, guaranteed to contain `f(x_now) + g(x_now)u`.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsInterval {
    pub center: Vec<f64>,
    pub half_width: f64,
    pub source: usize,
}

impl DynamicsInterval {
    pub fn contains(&self, rate: &[f64]) -> bool {
        rate.len() == self.center.len()
            && rate
                .iter()
                .zip(&self.center)
                .all(|(r, c)| (r - c).abs() <= self.half_width)
    }
}

/// `(x_end − x_start)/(t_end − t_start)`
pub fn finite_difference_rate(sample: &SampleTriple) -> Result<Vec<f64>> {
    let dur = sample.duration();
    if !(dur > 0.0) {
        return Err(Error::NonPositiveDuration {
            t_start: sample.t_start,
            t_end: sample.t_end,
        });
    }
    Ok(sample
        .x_end
        .iter()
        .zip(&sample.x_start)
        .map(|(b, a)| (b - a) / dur)
        .collect())
}

/// Interval around the sample's mean rate, widened by `w(u, u_held)`.
///
/// `source` is recorded as `usize::MAX`; callers that know the sample index set it.
pub fn dynamics_interval(
    x_now: &[f64],
    u: &[f64],
    sample: &SampleTriple,
    spec: &LipschitzSpec,
    barrier: &BarrierSpec,
) -> Result<DynamicsInterval> {
    check_dim("state", barrier.barrier().state_dim(), x_now.len())?;
    let center = finite_difference_rate(sample)?;
    let w = w_bound(x_now, sample, u, spec)?;
    Ok(DynamicsInterval {
        center,
        half_width: w.total,
        source: usize::MAX,
    })
}

/// Linear-scan argmin of the `w` fixed part; ties go to the smallest index.
/// `u_hint` is accepted for metrics that depend on the candidate input; the
/// default metric ignores it.
pub fn select_sample(x_now: &[f64], _u_hint: &[f64], samples: &SampleSet, spec: &LipschitzSpec) -> Result<usize> {
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut best = (f64::INFINITY, 0usize);
    for (i, t) in samples.triples().iter().enumerate() {
        let s = w_fixed_part(x_now, t, spec)?;
        if s < best.0 {
            best = (s, i);
        }
    }
    Ok(best.1)
}

/// Strategy for picking the triple that widens the dynamics interval least.
pub trait SampleSelector: Send + Sync {
    fn name(&self) -> &'static str;
    fn samples(&self) -> &Arc<SampleSet>;
    fn select(&self, x_now: &[f64], u_hint: &[f64]) -> Result<usize>;
}

/// Exhaustive scan.
pub struct ScanSelector {
    samples: Arc<SampleSet>,
    spec: LipschitzSpec,
}

impl SampleSelector for ScanSelector {
    fn name(&self) -> &'static str {
        "scan"
    }

    fn samples(&self) -> &Arc<SampleSet> {
        &self.samples
    }

    fn select(&self, x_now: &[f64], u_hint: &[f64]) -> Result<usize> {
        select_sample(x_now, u_hint, &self.samples, &self.spec)
    }
}

/// Exact argmin with pruning.
///
/// The score `θ_k(‖x − x_k‖ + s_k)` is bounded below by its intercept
/// `θ_k·s_k`; visiting triples in order of increasing intercept lets the scan
/// stop as soon as the next intercept exceeds the best score found.
pub struct PrunedSelector {
    samples: Arc<SampleSet>,
    theta: Vec<f64>,
    spread: Vec<f64>,
    order: Vec<usize>,
}

impl PrunedSelector {
    pub fn new(samples: Arc<SampleSet>, spec: &LipschitzSpec) -> Result<Self> {
        let n = (spec.state_dim() as f64).sqrt();
        let mut theta = Vec::with_capacity(samples.len());
        let mut spread = Vec::with_capacity(samples.len());
        for t in samples.triples() {
            check_dim("sample state", spec.state_dim(), t.x_start.len())?;
            theta.push(bounds::theta(&t.u_held, spec)?);
            spread.push(n * spec.beta_norm() * bounds::growth_factor(spec.theta_max(), t.duration())?);
        }
        let mut order: Vec<usize> = (0..samples.len()).collect();
        order.sort_by(|&a, &b| (theta[a] * spread[a]).total_cmp(&(theta[b] * spread[b])).then(a.cmp(&b)));
        Ok(Self {
            samples,
            theta,
            spread,
            order,
        })
    }
}

impl SampleSelector for PrunedSelector {
    fn name(&self) -> &'static str {
        "pruned"
    }

    fn samples(&self) -> &Arc<SampleSet> {
        &self.samples
    }

    fn select(&self, x_now: &[f64], _u_hint: &[f64]) -> Result<usize> {
        check_dim("state", self.samples.state_dim(), x_now.len())?;
        let mut best = (f64::INFINITY, usize::MAX);
        for &i in &self.order {
            let intercept = self.theta[i] * self.spread[i];
            if intercept > best.0 {
                break;
            }
            let d = linalg::dist(x_now, &self.samples.get(i).x_start);
            let score = self.theta[i] * (d + self.spread[i]);
            if score < best.0 || (score == best.0 && i < best.1) {
                best = (score, i);
            }
        }
        Ok(best.1)
    }
}

/// Heuristic: rescore the Euclidean-nearest candidates from the spatial index,
/// scanning everything when `θ(u_held)` varies by more than [`Self::THETA_SPREAD`].
/// Not exact when the duration term dominates the distance term.
pub struct NearestRescoredSelector {
    samples: Arc<SampleSet>,
    spec: LipschitzSpec,
    full_scan: bool,
}

impl NearestRescoredSelector {
    pub const CANDIDATES: usize = 32;
    pub const THETA_SPREAD: f64 = 10.0;

    pub fn new(samples: Arc<SampleSet>, spec: &LipschitzSpec) -> Result<Self> {
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for t in samples.triples() {
            let th = bounds::theta(&t.u_held, spec)?;
            lo = lo.min(th);
            hi = hi.max(th);
        }
        let full_scan = !(lo > 0.0) || hi / lo > Self::THETA_SPREAD;
        Ok(Self {
            samples,
            spec: spec.clone(),
            full_scan,
        })
    }
}

impl SampleSelector for NearestRescoredSelector {
    fn name(&self) -> &'static str {
        "nearest-rescored"
    }

    fn samples(&self) -> &Arc<SampleSet> {
        &self.samples
    }

    fn select(&self, x_now: &[f64], u_hint: &[f64]) -> Result<usize> {
        if self.full_scan {
            return select_sample(x_now, u_hint, &self.samples, &self.spec);
        }
        let mut best = (f64::INFINITY, usize::MAX);
        for i in self.samples.k_nearest(x_now, Self::CANDIDATES) {
            let s = w_fixed_part(x_now, self.samples.get(i), &self.spec)?;
            if s < best.0 || (s == best.0 && i < best.1) {
                best = (s, i);
            }
        }
        Ok(best.1)
    }
}

type SelectorCtor = fn(Arc<SampleSet>, &LipschitzSpec) -> Result<Box<dyn SampleSelector>>;

pub struct SelectorRegistry {
    ctors: BTreeMap<&'static str, SelectorCtor>,
}

impl Default for SelectorRegistry {
    fn default() -> Self {
        let mut r = Self {
            ctors: BTreeMap::new(),
        };
        r.register("scan", |s, spec| {
            Ok(Box::new(ScanSelector {
                samples: s,
                spec: spec.clone(),
            }))
        });
        r.register("pruned", |s, spec| Ok(Box::new(PrunedSelector::new(s, spec)?)));
        r.register("nearest-rescored", |s, spec| {
            Ok(Box::new(NearestRescoredSelector::new(s, spec)?))
        });
        r
    }
}

impl SelectorRegistry {
    pub fn register(&mut self, name: &'static str, ctor: SelectorCtor) {
        self.ctors.insert(name, ctor);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.ctors.keys().copied().collect()
    }

    pub fn build(&self, name: &str, samples: Arc<SampleSet>, spec: &LipschitzSpec) -> Result<Box<dyn SampleSelector>> {
        let ctor = self.ctors.get(name).ok_or_else(|| Error::UnknownStrategy {
            kind: "sample selector",
            name: name.into(),
            available: self.names().join(", "),
        })?;
        ctor(samples, spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::barrier::{AlphaLipschitz, BandBarrier};
    use crate::region::BoxRegion;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn spec() -> LipschitzSpec {
        LipschitzSpec::new(
            vec![39.3153, 1.6599],
            vec![vec![32.2293], vec![22.9478]],
            400.0,
            53.0,
            &BoxRegion::symmetric(&[4.0]).unwrap(),
        )
        .unwrap()
    }

    fn barrier() -> BarrierSpec {
        BarrierSpec::new(
            Arc::new(BandBarrier {
                dim: 2,
                index: 0,
                center: 0.0,
                radius: 1.0,
            }),
            1.0,
            &BoxRegion::new(vec![-1.0, -2.5], vec![1.0, 2.5]).unwrap(),
            AlphaLipschitz::Composite,
        )
        .unwrap()
    }

    #[test]
    fn rate_is_quotient() {
        let t = SampleTriple::new(vec![0.0, 0.0], vec![0.0], vec![1.0, 2.0], 3.0, 4.0).unwrap();
        assert_eq!(finite_difference_rate(&t).unwrap(), vec![1.0, 2.0]);
        let still = SampleTriple::new(vec![0.2, 0.1], vec![0.0], vec![0.2, 0.1], 0.0, 0.5).unwrap();
        assert_eq!(finite_difference_rate(&still).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn rate_rejects_bad_duration() {
        let t = SampleTriple {
            x_start: vec![0.0],
            u_held: vec![0.0],
            x_end: vec![1.0],
            t_start: 1.0,
            t_end: 0.5,
        };
        assert!(matches!(finite_difference_rate(&t), Err(Error::NonPositiveDuration { .. })));
    }

    #[test]
    fn half_width_grows_with_input_distance() {
        let t = SampleTriple::new(vec![0.4, 0.7], vec![1.0], vec![0.41, 0.69], 0.0, 0.01).unwrap();
        let x = [0.5, 0.75];
        let widths: Vec<f64> = [1.0, 1.5, 2.0, 3.0, -4.0]
            .iter()
            .map(|&u| dynamics_interval(&x, &[u], &t, &spec(), &barrier()).unwrap().half_width)
            .collect();
        assert!(widths.windows(2).all(|w| w[0] < w[1]));
    }

    fn random_set(rng: &mut ChaCha8Rng, n: usize) -> Arc<SampleSet> {
        let triples = (0..n)
            .map(|_| {
                let x = vec![rng.gen_range(-1.0..1.0), rng.gen_range(-2.5..2.5)];
                let dur = if rng.gen_bool(0.5) { 0.01 } else { rng.gen_range(1e-4..0.02) };
                SampleTriple::new(x.clone(), vec![rng.gen_range(-4.0..4.0)], x, 0.0, dur).unwrap()
            })
            .collect();
        Arc::new(SampleSet::new(triples).unwrap())
    }

    #[test]
    fn single_sample_is_selected() {
        let t = SampleTriple::new(vec![0.9, 2.0], vec![3.0], vec![0.9, 2.0], 0.0, 0.01).unwrap();
        let set = Arc::new(SampleSet::new(vec![t]).unwrap());
        for name in SelectorRegistry::default().names() {
            let sel = SelectorRegistry::default().build(name, set.clone(), &spec()).unwrap();
            assert_eq!(sel.select(&[0.0, 0.0], &[0.0]).unwrap(), 0);
        }
    }

    #[test]
    fn coincident_short_sample_wins() {
        let x = vec![0.2, -0.3];
        let far = SampleTriple::new(vec![0.25, -0.3], vec![0.0], vec![0.25, -0.3], 0.0, 0.01).unwrap();
        let here = SampleTriple::new(x.clone(), vec![0.0], x.clone(), 0.0, 1e-12).unwrap();
        let set = SampleSet::new(vec![far, here]).unwrap();
        assert_eq!(select_sample(&x, &[0.0], &set, &spec()).unwrap(), 1);
    }

    #[test]
    fn pruned_matches_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let set = random_set(&mut rng, 1000);
        let s = spec();
        let pruned = PrunedSelector::new(set.clone(), &s).unwrap();
        for _ in 0..1000 {
            let q = [rng.gen_range(-1.0..1.0), rng.gen_range(-2.5..2.5)];
            // independent brute force over the formula
            let brute = (0..set.len())
                .map(|i| (w_fixed_part(&q, set.get(i), &s).unwrap(), i))
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
                .unwrap()
                .1;
            assert_eq!(pruned.select(&q, &[0.0]).unwrap(), brute);
            assert_eq!(select_sample(&q, &[0.0], &set, &s).unwrap(), brute);
        }
    }

    #[test]
    fn unknown_selector_name() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let set = random_set(&mut rng, 3);
        assert!(matches!(
            SelectorRegistry::default().build("fastest", set, &spec()),
            Err(Error::UnknownStrategy { .. })
        ));
    }
}
