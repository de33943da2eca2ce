//! Synthetic two-dimensional scenarios with hand-placed decision regions.
//!
//! Three deterministic classifiers (ground truth, system A, system B) partition
//! the plane, and a Gaussian mixture decides where samples land. Placing mass
//! in the region where both systems are wrong, with their wrong labels either
//! matching or not, separates misclassification agreement from error
//! consistency.
//!
//! Sampling uses ChaCha8 (`rand_chacha::ChaCha8Rng::seed_from_u64`); normal
//! draws use `rand_distr::StandardNormal`. Outputs are identical for identical
//! seeds.
//!
//! # Preset geometry
//!
//! Labels are `c1`, `c2`, `c3`. Ground truth is `c2` for `y >= 6`, `c3` for
//! `y <= -6` and `c1` in the band between. Both systems agree with the truth
//! in the band for `x < 0`. For `x >= 0`:
//!
//! | zone               | truth | A                        | B (agreeing)   | B (disagreeing) |
//! |--------------------|-------|--------------------------|----------------|-----------------|
//! | top `y >= 6`       | c2    | c2                       | c1             | c1              |
//! | band, `y >= 0`     | c1    | c2                       | c2             | c3              |
//! | band, `y < 0`      | c1    | c3                       | c3             | c2              |
//! | bottom `y <= -6`   | c3    | c1                       | c3             | c3              |

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::domain::{GroundTruth, LabelVocabulary, SystemRun};
use crate::error::{AlignError, Result};

/// The set `{ p : normal · p <= offset }`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfPlane {
    pub normal: [f64; 2],
    pub offset: f64,
}

impl HalfPlane {
    pub fn new(normal: [f64; 2], offset: f64) -> Self {
        HalfPlane { normal, offset }
    }

    /// `x <= v`
    pub fn x_at_most(v: f64) -> Self {
        HalfPlane::new([1.0, 0.0], v)
    }

    /// `x >= v`
    pub fn x_at_least(v: f64) -> Self {
        HalfPlane::new([-1.0, 0.0], -v)
    }

    /// `y <= v`
    pub fn y_at_most(v: f64) -> Self {
        HalfPlane::new([0.0, 1.0], v)
    }

    /// `y >= v`
    pub fn y_at_least(v: f64) -> Self {
        HalfPlane::new([0.0, -1.0], -v)
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        self.normal[0] * p[0] + self.normal[1] * p[1] <= self.offset
    }
}

/// A convex region (intersection of half-planes) carrying a class label.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub label: usize,
    pub constraints: Vec<HalfPlane>,
}

impl Region {
    pub fn new(label: usize, constraints: Vec<HalfPlane>) -> Self {
        Region { label, constraints }
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        self.constraints.iter().all(|h| h.contains(p))
    }
}

/// Priority-ordered regions plus a catch-all label. Boundaries are closed, so a
/// point on a shared edge goes to the earlier region.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionClassifier {
    pub regions: Vec<Region>,
    pub fallback: usize,
}

impl RegionClassifier {
    pub fn new(regions: Vec<Region>, fallback: usize) -> Self {
        RegionClassifier { regions, fallback }
    }

    fn max_label(&self) -> usize {
        self.regions.iter().map(|r| r.label).fold(self.fallback, usize::max)
    }
}

pub fn classify(c: &RegionClassifier, point: [f64; 2]) -> usize {
    c.regions
        .iter()
        .find(|r| r.contains(point))
        .map_or(c.fallback, |r| r.label)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianComponent {
    pub center: [f64; 2],
    pub sigma: f64,
    pub weight: f64,
}

/// Mixture of isotropic Gaussians.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleDistribution {
    components: Vec<GaussianComponent>,
}

impl SampleDistribution {
    pub fn new(components: Vec<GaussianComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(AlignError::InvalidScenario("mixture has no components".into()));
        }
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if components.iter().any(|c| !positive(c.sigma) || !positive(c.weight)) {
            return Err(AlignError::InvalidScenario("sigma and weight must be positive".into()));
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(AlignError::InvalidScenario(format!("mixture weights sum to {total}")));
        }
        Ok(SampleDistribution { components })
    }

    pub fn components(&self) -> &[GaussianComponent] {
        &self.components
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> [f64; 2] {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut chosen = self.components.last().expect("non-empty");
        for c in &self.components {
            acc += c.weight;
            if u < acc {
                chosen = c;
                break;
            }
        }
        let dx: f64 = rng.sample(StandardNormal);
        let dy: f64 = rng.sample(StandardNormal);
        [
            chosen.center[0] + chosen.sigma * dx,
            chosen.center[1] + chosen.sigma * dy,
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub labels: Vec<String>,
    pub truth: RegionClassifier,
    pub system_a: RegionClassifier,
    pub system_b: RegionClassifier,
    pub distribution: SampleDistribution,
    pub samples: usize,
    pub seed: u64,
}

impl Scenario {
    pub fn with_samples(mut self, samples: usize) -> Self {
        self.samples = samples;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// A drawn scenario: the sampled points and the three label sets.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSample {
    pub points: Vec<(String, [f64; 2])>,
    pub truth: GroundTruth,
    pub run_a: SystemRun,
    pub run_b: SystemRun,
}

/// Draws `samples` points and labels them with all three classifiers.
/// Instance ids are zero-padded so lexicographic and draw order agree.
pub fn sample_scenario(s: &Scenario) -> Result<ScenarioSample> {
    if s.samples == 0 {
        return Err(AlignError::InvalidScenario("sample count must be at least 1".into()));
    }
    let vocab = Arc::new(LabelVocabulary::new(s.labels.iter().cloned())?);
    for c in [&s.truth, &s.system_a, &s.system_b] {
        if c.max_label() >= vocab.len() {
            return Err(AlignError::InvalidScenario(
                "classifier label outside vocabulary".into(),
            ));
        }
    }
    let width = s.samples.to_string().len().max(6);
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let mut points = Vec::with_capacity(s.samples);
    let mut truth = BTreeMap::new();
    let mut a = BTreeMap::new();
    let mut b = BTreeMap::new();
    for i in 0..s.samples {
        let p = s.distribution.draw(&mut rng);
        let id = format!("s{i:0width$}");
        truth.insert(id.clone(), classify(&s.truth, p));
        a.insert(id.clone(), classify(&s.system_a, p));
        b.insert(id.clone(), classify(&s.system_b, p));
        points.push((id, p));
    }
    Ok(ScenarioSample {
        points,
        truth: GroundTruth::from_indices(vocab.clone(), truth)?,
        run_a: SystemRun::from_indices("A", vocab.clone(), a)?,
        run_b: SystemRun::from_indices("B", vocab, b)?,
    })
}

pub const JOINTLY_CORRECT_MASS: &str = "jointly-correct-mass";
pub const DISAGREEMENT_MASS: &str = "disagreement-mass";
pub const DUAL_ERROR_AGREEING: &str = "dual-error-agreeing";
pub const DUAL_ERROR_DISAGREEING: &str = "dual-error-disagreeing";

pub const DEFAULT_SAMPLES: usize = 10_000;
pub const DEFAULT_SEED: u64 = 7;

const C1: usize = 0;
const C2: usize = 1;
const C3: usize = 2;

fn truth_classifier() -> RegionClassifier {
    RegionClassifier::new(
        vec![
            Region::new(C2, vec![HalfPlane::y_at_least(6.0)]),
            Region::new(C3, vec![HalfPlane::y_at_most(-6.0)]),
        ],
        C1,
    )
}

fn system_a() -> RegionClassifier {
    RegionClassifier::new(
        vec![
            Region::new(C2, vec![HalfPlane::y_at_least(6.0)]),
            Region::new(C1, vec![HalfPlane::y_at_most(-6.0), HalfPlane::x_at_least(0.0)]),
            Region::new(C3, vec![HalfPlane::y_at_most(-6.0)]),
            Region::new(C1, vec![HalfPlane::x_at_most(0.0)]),
            Region::new(C2, vec![HalfPlane::y_at_least(0.0)]),
        ],
        C3,
    )
}

fn system_b(agreeing: bool) -> RegionClassifier {
    let (upper, lower) = if agreeing { (C2, C3) } else { (C3, C2) };
    RegionClassifier::new(
        vec![
            Region::new(C1, vec![HalfPlane::y_at_least(6.0), HalfPlane::x_at_least(0.0)]),
            Region::new(C2, vec![HalfPlane::y_at_least(6.0)]),
            Region::new(C3, vec![HalfPlane::y_at_most(-6.0)]),
            Region::new(C1, vec![HalfPlane::x_at_most(0.0)]),
            Region::new(upper, vec![HalfPlane::y_at_least(0.0)]),
        ],
        lower,
    )
}

fn component(x: f64, y: f64, weight: f64) -> GaussianComponent {
    GaussianComponent {
        center: [x, y],
        sigma: 1.0,
        weight,
    }
}

/// Jointly correct: both systems right.
const ZONE_CORRECT: (f64, f64) = (-5.0, 0.0);
/// Both systems wrong; the band straddles `y = 0` where their wrong labels flip.
const ZONE_DUAL_ERROR: (f64, f64) = (5.0, 0.0);
/// Only A right.
const ZONE_A_ONLY: (f64, f64) = (5.0, 10.0);
/// Only B right.
const ZONE_B_ONLY: (f64, f64) = (5.0, -10.0);

fn scenario(name: &str, agreeing: bool, mix: &[((f64, f64), f64)]) -> Scenario {
    let distribution = SampleDistribution::new(mix.iter().map(|&((x, y), w)| component(x, y, w)).collect())
        .expect("preset mixtures are valid");
    Scenario {
        name: name.to_string(),
        labels: vec!["c1".into(), "c2".into(), "c3".into()],
        truth: truth_classifier(),
        system_a: system_a(),
        system_b: system_b(agreeing),
        distribution,
        samples: DEFAULT_SAMPLES,
        seed: DEFAULT_SEED,
    }
}

/// The four named presets, each at 10,000 samples and seed 7.
pub fn scenario_presets() -> Vec<Scenario> {
    vec![
        scenario(
            JOINTLY_CORRECT_MASS,
            true,
            &[(ZONE_CORRECT, 0.9), (ZONE_DUAL_ERROR, 0.1)],
        ),
        scenario(
            DISAGREEMENT_MASS,
            true,
            &[(ZONE_CORRECT, 0.2), (ZONE_A_ONLY, 0.4), (ZONE_B_ONLY, 0.4)],
        ),
        scenario(
            DUAL_ERROR_AGREEING,
            true,
            &[(ZONE_CORRECT, 0.4), (ZONE_DUAL_ERROR, 0.4), (ZONE_A_ONLY, 0.2)],
        ),
        scenario(
            DUAL_ERROR_DISAGREEING,
            false,
            &[(ZONE_CORRECT, 0.4), (ZONE_DUAL_ERROR, 0.4), (ZONE_A_ONLY, 0.2)],
        ),
    ]
}

pub fn preset(name: &str) -> Result<Scenario> {
    scenario_presets()
        .into_iter()
        .find(|s| s.name == name)
        .ok_or_else(|| {
            AlignError::Usage(format!(
                "unknown preset `{name}` (expected {JOINTLY_CORRECT_MASS}|{DISAGREEMENT_MASS}|{DUAL_ERROR_AGREEING}|{DUAL_ERROR_DISAGREEING})"
            ))
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::build_joint_view;
    use crate::kappa::{error_consistency, misclassification_agreement};

    #[test]
    fn classify_interior_and_boundary() {
        let t = truth_classifier();
        assert_eq!(classify(&t, [-3.0, 0.0]), C1);
        assert_eq!(classify(&t, [0.0, 9.0]), C2);
        // y = 6 lies on both the top region's edge and the catch-all; priority wins
        assert_eq!(classify(&t, [0.0, 6.0]), C2);
        let a = system_a();
        // x = 0 is the edge of the correct band and of the wrong half; earlier region wins
        assert_eq!(classify(&a, [0.0, 1.0]), C1);
        assert_eq!(classify(&a, [0.1, 1.0]), C2);
        assert_eq!(classify(&a, [0.1, -1.0]), C3);
    }

    #[test]
    fn classify_grid_matches_predicates() {
        let a = system_a();
        let b = system_b(false);
        for i in 0..100 {
            for j in 0..100 {
                let p = [-20.0 + 0.4 * f64::from(i), -20.0 + 0.4 * f64::from(j)];
                let (x, y) = (p[0], p[1]);
                let want_a = if y >= 6.0 {
                    C2
                } else if y <= -6.0 {
                    if x >= 0.0 {
                        C1
                    } else {
                        C3
                    }
                } else if x <= 0.0 {
                    C1
                } else if y >= 0.0 {
                    C2
                } else {
                    C3
                };
                let want_b = if y >= 6.0 {
                    if x >= 0.0 {
                        C1
                    } else {
                        C2
                    }
                } else if y <= -6.0 {
                    C3
                } else if x <= 0.0 {
                    C1
                } else if y >= 0.0 {
                    C3
                } else {
                    C2
                };
                assert_eq!(classify(&a, p), want_a, "A at {p:?}");
                assert_eq!(classify(&b, p), want_b, "B at {p:?}");
            }
        }
    }

    #[test]
    fn same_seed_same_sample() {
        let s = preset(DUAL_ERROR_AGREEING).unwrap().with_samples(500);
        assert_eq!(sample_scenario(&s).unwrap(), sample_scenario(&s).unwrap());
        let other = sample_scenario(&s.clone().with_seed(8)).unwrap();
        assert_ne!(sample_scenario(&s).unwrap().points, other.points);
    }

    #[test]
    fn collapsed_mixture_is_jointly_correct() {
        let mut s = preset(JOINTLY_CORRECT_MASS).unwrap().with_samples(200);
        s.distribution = SampleDistribution::new(vec![GaussianComponent {
            center: [-5.0, 0.0],
            sigma: 1e-12,
            weight: 1.0,
        }])
        .unwrap();
        let d = sample_scenario(&s).unwrap();
        let view = build_joint_view(&d.truth, &d.run_a, &d.run_b).unwrap();
        assert_eq!(view.jointly_correct(), 200);
        assert_eq!(error_consistency(&view).value, Some(1.0));
    }

    #[test]
    fn invalid_scenarios() {
        assert!(SampleDistribution::new(vec![component(0.0, 0.0, 0.5)]).is_err());
        assert!(SampleDistribution::new(vec![]).is_err());
        let s = preset(DISAGREEMENT_MASS).unwrap().with_samples(0);
        assert!(sample_scenario(&s).is_err());
        assert!(preset("nope").is_err());
    }

    #[test]
    fn preset_orderings() {
        let metrics = |name: &str| {
            let d = sample_scenario(&preset(name).unwrap()).unwrap();
            let view = build_joint_view(&d.truth, &d.run_a, &d.run_b).unwrap();
            (error_consistency(&view).value, misclassification_agreement(&view).value)
        };
        let (ec_correct, _) = metrics(JOINTLY_CORRECT_MASS);
        assert!(ec_correct.unwrap() > 0.95);
        let (ec_disagree, _) = metrics(DISAGREEMENT_MASS);
        assert!(ec_disagree.unwrap() < 0.0);
        let (ec_a, ma_a) = metrics(DUAL_ERROR_AGREEING);
        let (ec_d, ma_d) = metrics(DUAL_ERROR_DISAGREEING);
        assert!((ec_a.unwrap() - ec_d.unwrap()).abs() < 0.05);
        assert!(ma_a.unwrap() - ma_d.unwrap() > 0.5);
    }
}
