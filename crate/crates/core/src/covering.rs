//! Lifting sampled loops from the lens space `S^{2n-1}/Z_m` back to the sphere.
//!
//! Points of the quotient are stored as sphere representatives. A loop is lifted
//! greedily: each next sample is replaced by the member of its `Z_m`-orbit nearest
//! the current lifted point. When every step is shorter than half the minimal orbit
//! separation `s = min_p min_{j≠0} |φ^j(p) - p|`, that choice is unique. The deck
//! element of a closed loop is the `j` with `φ^j(start) = end`.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::orbits::{sample_orbit, OrbitError, TwistedOrbit};
use crate::par;
use crate::symplectic::{FlowOptions, PhasePoint, RotationTwist, StarShapedModel};

/// Largest allowed deviation of a sample from the unit sphere.
pub const UNIT_TOL: f64 = 1e-8;
/// Largest allowed `|φ^j(start) - end|` for a loop to count as closed.
pub const CLOSURE_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LiftError {
    #[error("loop needs at least two samples")]
    TooFewSamples,
    #[error("sample {index} has {found} coordinates, twist expects {expected}")]
    DimensionMismatch { index: usize, expected: usize, found: usize },
    #[error("sample {index} has norm {norm}, expected 1")]
    NotUnitNorm { index: usize, norm: f64 },
    #[error("ambiguous lift at step {step}: distance {distance:e} is not below the bound {bound:e} (margin {margin:e})")]
    AmbiguousStep { step: usize, distance: f64, bound: f64, margin: f64 },
    #[error("loop is not closed in the quotient: nearest deck image of the start is {gap:e} from the end")]
    NotClosed { gap: f64 },
    #[error("basepoint {index} is out of range for {len} samples")]
    BasepointOutOfRange { index: usize, len: usize },
    #[error("cannot concatenate loops with different twists")]
    TwistMismatch,
    #[error(transparent)]
    Orbit(#[from] OrbitError),
}

/// The deck transformation `φ^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DeckElement {
    pub exponent: u32,
    pub m: u32,
}

impl DeckElement {
    pub fn new(exponent: i64, m: u32) -> Self {
        DeckElement { exponent: exponent.rem_euclid(m.max(1) as i64) as u32, m: m.max(1) }
    }

    pub fn identity(m: u32) -> Self {
        Self::new(0, m)
    }

    pub fn compose(self, other: DeckElement) -> DeckElement {
        debug_assert_eq!(self.m, other.m);
        Self::new(self.exponent as i64 + other.exponent as i64, self.m)
    }

    pub fn inverse(self) -> DeckElement {
        Self::new(-(self.exponent as i64), self.m)
    }

    pub fn is_identity(self) -> bool {
        self.exponent == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuotientLoop {
    pub samples: Vec<PhasePoint>,
    pub twist: RotationTwist,
}

impl QuotientLoop {
    pub fn new(samples: Vec<PhasePoint>, twist: RotationTwist) -> Result<Self, LiftError> {
        let l = QuotientLoop { samples, twist };
        l.validate()?;
        Ok(l)
    }

    /// Parses `{"twist": {"m": .., "k": [..]}, "samples": [[x1, y1, ..], ..]}`.
    pub fn from_json(text: &str) -> Result<Self, String> {
        let raw: QuotientLoop = serde_json::from_str(text).map_err(|e| e.to_string())?;
        raw.validate().map_err(|e| e.to_string())?;
        Ok(raw)
    }

    pub fn validate(&self) -> Result<(), LiftError> {
        if self.samples.len() < 2 {
            return Err(LiftError::TooFewSamples);
        }
        for (index, p) in self.samples.iter().enumerate() {
            if p.dim() != self.twist.n() {
                return Err(LiftError::DimensionMismatch { index, expected: self.twist.n(), found: p.dim() });
            }
            let norm = p.norm();
            if (norm - 1.0).abs() > UNIT_TOL {
                return Err(LiftError::NotUnitNorm { index, norm });
            }
        }
        Ok(())
    }

    /// Distance from the last sample to the nearest point of the first sample's orbit.
    pub fn closure_gap(&self) -> f64 {
        let last = self.samples.last().expect("validated");
        nearest_image(&self.twist, &self.samples[0], last).1
    }

    pub fn is_closed(&self) -> bool {
        self.closure_gap() <= CLOSURE_TOL
    }

    /// `self` followed by `other`; the first sample of `other` is dropped since it
    /// represents the same quotient point as the last sample of `self`.
    pub fn concat(&self, other: &QuotientLoop) -> Result<QuotientLoop, LiftError> {
        if self.twist != other.twist {
            return Err(LiftError::TwistMismatch);
        }
        let mut samples = self.samples.clone();
        samples.extend(other.samples.iter().skip(1).cloned());
        QuotientLoop::new(samples, self.twist.clone())
    }

    /// The loop with every sample replaced by its canonical representative.
    pub fn canonical(&self) -> QuotientLoop {
        QuotientLoop {
            samples: self.samples.iter().map(|p| canonical_representative(&self.twist, p)).collect(),
            twist: self.twist.clone(),
        }
    }
}

/// `(j, |φ^j(p) - target|)` minimizing the distance, smallest `j` on ties.
fn nearest_image(twist: &RotationTwist, p: &PhasePoint, target: &PhasePoint) -> (u32, f64) {
    (0..twist.m())
        .map(|j| (j, twist.apply_power(p, j as i64).distance(target)))
        .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
}

/// `min_{j≠0} |φ^j(p) - p|`, or the sphere diameter 2 when `m = 1`.
pub fn orbit_separation(twist: &RotationTwist, p: &PhasePoint) -> f64 {
    (1..twist.m())
        .map(|j| twist.apply_power(p, j as i64).distance(p))
        .fold(2.0, f64::min)
}

/// Orbit member whose largest coordinate has the smallest argument in `[0, 2π)`.
pub fn canonical_representative(twist: &RotationTwist, p: &PhasePoint) -> PhasePoint {
    let max = p.0.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let lead = p.0.iter().position(|c| c.norm() >= max - 1e-12).unwrap_or(0);
    (0..twist.m() as i64)
        .map(|j| twist.apply_power(p, j))
        .min_by(|a, b| a.0[lead].arg().rem_euclid(TAU).total_cmp(&b.0[lead].arg().rem_euclid(TAU)))
        .expect("m ≥ 1")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lift {
    pub points: Vec<PhasePoint>,
    /// `points[i] = φ^{sheets[i]}(input sample)` for the loop as traversed from the basepoint.
    pub sheets: Vec<u32>,
    pub deck: DeckElement,
    /// Half the minimal orbit separation minus the longest lifting step.
    pub margin: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub deck: u32,
    pub contractible: bool,
    pub margin: f64,
}

impl Lift {
    pub fn certificate(&self) -> Certificate {
        Certificate { deck: self.deck.exponent, contractible: self.deck.is_identity(), margin: self.margin }
    }
}

/// Lifts a closed quotient loop starting at sample `basepoint`.
///
/// For `basepoint > 0` the loop is traversed from that sample around to itself.
pub fn lift_loop(l: &QuotientLoop, basepoint: usize) -> Result<Lift, LiftError> {
    l.validate()?;
    let len = l.samples.len();
    if basepoint >= len {
        return Err(LiftError::BasepointOutOfRange { index: basepoint, len });
    }
    let gap = l.closure_gap();
    if gap > CLOSURE_TOL {
        return Err(LiftError::NotClosed { gap });
    }
    let order: Vec<&PhasePoint> = if basepoint == 0 {
        l.samples.iter().collect()
    } else {
        l.samples[basepoint..len - 1].iter().chain(&l.samples[..=basepoint]).collect()
    };
    let separation = order.iter().map(|p| orbit_separation(&l.twist, p)).fold(f64::INFINITY, f64::min);
    let bound = 0.5 * separation;

    let mut points = vec![order[0].clone()];
    let mut sheets = vec![0];
    let mut longest = 0.0f64;
    for (step, next) in order.iter().enumerate().skip(1) {
        let current = points.last().expect("nonempty");
        let (j, distance) = nearest_image(&l.twist, next, current);
        if distance >= bound {
            return Err(LiftError::AmbiguousStep { step, distance, bound, margin: bound - distance });
        }
        longest = longest.max(distance);
        points.push(l.twist.apply_power(next, j as i64));
        sheets.push(j);
    }
    let (j, _) = nearest_image(&l.twist, order[0], points.last().expect("nonempty"));
    Ok(Lift { points, sheets, deck: DeckElement::new(j as i64, l.twist.m()), margin: bound - longest })
}

/// Lifts many loops, in input order.
pub fn lift_many(loops: &[QuotientLoop]) -> Vec<Result<Lift, LiftError>> {
    par::map(loops, |l| lift_loop(l, 0))
}

/// Projects one period of the orbit radially onto the unit sphere and lifts its image
/// in the lens space back to the sphere.
///
/// The orbit may be twisted by any power of `twist`; the lift recovers that power.
pub fn classify_orbit_loop(
    orbit: &TwistedOrbit,
    model: &StarShapedModel,
    twist: &RotationTwist,
    samples: usize,
) -> Result<Lift, LiftError> {
    let points = sample_orbit(orbit, model, samples.max(2), &FlowOptions::default())?;
    let unit: Vec<PhasePoint> = points.iter().map(|p| p.scale(1.0 / p.norm())).collect();
    let quotient = QuotientLoop::new(unit, twist.clone())?.canonical();
    lift_loop(&quotient, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orbits::analytic_orbit;
    use crate::symplectic::{sample_directions, RadialProfile};
    use num_complex::Complex64;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    /// `z ↦ e^{iθ(t)} z` sampled at `t = i/N`, `θ` running from 0 to `2π turns/m`.
    fn arc(twist: &RotationTwist, z: &PhasePoint, turns: i64, samples: usize) -> QuotientLoop {
        let m = twist.m() as f64;
        let pts = (0..=samples)
            .map(|i| {
                let theta = TAU * turns as f64 / m * i as f64 / samples as f64;
                z.mul_scalar(Complex64::from_polar(1.0, theta))
            })
            .collect();
        QuotientLoop::new(pts, twist.clone()).unwrap()
    }

    #[test]
    fn constant_loop() {
        let twist = RotationTwist::uniform(3, 2);
        let z = sample_directions(2, 1).remove(0);
        let l = QuotientLoop::new(vec![z.clone(); 5], twist).unwrap();
        let lift = lift_loop(&l, 0).unwrap();
        assert!(lift.points.iter().all(|p| *p == z));
        assert_eq!(lift.deck.exponent, 0);
        assert!(lift.certificate().contractible);
    }

    #[test]
    fn arc_to_generator_and_its_powers() {
        let twist = RotationTwist::uniform(2, 2);
        let z = sample_directions(2, 1).remove(0);
        let one = arc(&twist, &z, 1, 16);
        assert_eq!(lift_loop(&one, 0).unwrap().deck.exponent, 1);
        let two = one.concat(&arc(&twist, &twist.apply(&z), 1, 16)).unwrap();
        assert_eq!(lift_loop(&two, 0).unwrap().deck.exponent, 0);
    }

    #[test]
    fn lift_reproduces_the_quotient_loop() {
        let twist = RotationTwist::uniform(5, 3);
        let z = sample_directions(3, 1).remove(0);
        let l = arc(&twist, &z, 2, 40);
        let scrambled: Vec<PhasePoint> =
            l.samples.iter().enumerate().map(|(i, p)| twist.apply_power(p, (i * 3 % 5) as i64)).collect();
        let l = QuotientLoop::new(scrambled, twist.clone()).unwrap();
        let lift = lift_loop(&l, 0).unwrap();
        for ((p, q), &j) in lift.points.iter().zip(&l.samples).zip(&lift.sheets) {
            assert_eq!(*p, twist.apply_power(q, j as i64));
            assert!(canonical_representative(&twist, p).distance(&canonical_representative(&twist, q)) < 1e-12);
        }
        assert_eq!(lift.deck.exponent, 2);
    }

    #[test]
    fn coarse_sampling_is_rejected() {
        let twist = RotationTwist::uniform(4, 2);
        let z = sample_directions(2, 1).remove(0);
        // an eighth of a turn per sample: both neighbouring orbit points are equally far
        match lift_loop(&arc(&twist, &z, 1, 2), 0) {
            Err(LiftError::AmbiguousStep { step: 1, margin, .. }) => assert!(margin <= 0.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn open_paths_and_bad_input() {
        let twist = RotationTwist::uniform(3, 2);
        let z = sample_directions(2, 1).remove(0);
        let half = z.mul_scalar(Complex64::from_polar(1.0, 0.3));
        let open = QuotientLoop::new(vec![z.clone(), half], twist.clone()).unwrap();
        assert!(matches!(lift_loop(&open, 0), Err(LiftError::NotClosed { .. })));
        assert!(matches!(QuotientLoop::new(vec![z.scale(2.0), z.clone()], twist.clone()), Err(LiftError::NotUnitNorm { index: 0, .. })));
        assert!(matches!(QuotientLoop::new(vec![z.clone()], twist.clone()), Err(LiftError::TooFewSamples)));
        let l = arc(&twist, &z, 1, 8);
        assert!(matches!(lift_loop(&l, 9), Err(LiftError::BasepointOutOfRange { .. })));
    }

    #[test]
    fn loop_json_roundtrip() {
        let text = r#"{"twist": {"m": 2, "k": [1, 1]}, "samples": [[1, 0, 0, 0], [0.7071067811865476, 0.7071067811865476, 0, 0], [0, 1, 0, 0], [-0.7071067811865476, 0.7071067811865476, 0, 0], [-1, 0, 0, 0]]}"#;
        let l = QuotientLoop::from_json(text).unwrap();
        assert_eq!(l.samples.len(), 5);
        assert_eq!(lift_loop(&l, 0).unwrap().deck.exponent, 1);
        assert!(QuotientLoop::from_json(r#"{"twist": {"m": 2, "k": [1]}, "samples": [[2, 0]]}"#).is_err());
    }

    #[test]
    fn orbit_classification() {
        let z = sample_directions(2, 1).remove(0);
        let sphere = StarShapedModel::round_sphere(2);
        for m in [2u32, 4] {
            let twist = RotationTwist::uniform(m, 2);
            let orbit = analytic_orbit(&twist, &z, PI * (m as f64 - 1.0) / m as f64).unwrap();
            let lift = classify_orbit_loop(&orbit, &sphere, &twist, 64).unwrap();
            assert_eq!(lift.deck.exponent, 1);
            assert!(lift.margin > 0.0);
        }
        let untwisted = RotationTwist::uniform(1, 2);
        let closed = analytic_orbit(&untwisted, &z, PI).unwrap();
        assert_eq!(classify_orbit_loop(&closed, &sphere, &untwisted, 64).unwrap().deck.exponent, 0);
        // an orbit closing up after φ²: e^{-2iτ} = e^{iπ}
        let twist = RotationTwist::uniform(4, 2);
        let orbit = analytic_orbit(&RotationTwist::uniform(2, 2), &z, PI / 2.0).unwrap();
        assert_eq!(classify_orbit_loop(&orbit, &sphere, &twist, 64).unwrap().deck.exponent, 2);
    }

    #[test]
    fn orbit_classification_on_numeric_model() {
        let model = StarShapedModel::radial(2, RadialProfile::Ellipsoid { axes: vec![1.0, 1.0] }).unwrap();
        let twist = RotationTwist::uniform(2, 2);
        let orbit = analytic_orbit(&twist, &sample_directions(2, 1)[0], PI / 2.0).unwrap();
        let lift = classify_orbit_loop(&orbit, &model, &twist, 64).unwrap();
        assert_eq!(lift.certificate().deck, 1);
        assert!(!lift.certificate().contractible);
    }

    #[test]
    fn deck_group_law() {
        let a = DeckElement::new(3, 5);
        let b = DeckElement::new(4, 5);
        assert_eq!(a.compose(b).exponent, 2);
        assert!(a.compose(a.inverse()).is_identity());
        assert_eq!(DeckElement::new(-1, 5).exponent, 4);
    }

    #[test]
    fn batch_lifting_keeps_order() {
        let twist = RotationTwist::uniform(3, 2);
        let z = sample_directions(2, 1).remove(0);
        let loops: Vec<QuotientLoop> = (0..6).map(|t| arc(&twist, &z, t, 12 * t.max(1) as usize)).collect();
        let decks: Vec<u32> = lift_many(&loops).into_iter().map(|r| r.unwrap().deck.exponent).collect();
        assert_eq!(decks, vec![0, 1, 2, 0, 1, 2]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn deck_is_independent_of_basepoint(m in 2u32..7, turns in 0i64..7, seed in 0usize..50, base in 0usize..30) {
            let twist = RotationTwist::uniform(m, 2);
            let z = sample_directions(2, seed + 1).remove(seed);
            let l = arc(&twist, &z, turns, 30 + 10 * turns as usize);
            let a = lift_loop(&l, 0).unwrap().deck;
            let b = lift_loop(&l, base % l.samples.len()).unwrap().deck;
            prop_assert_eq!(a, b);
            prop_assert_eq!(a.exponent as i64, turns % m as i64);
        }

        #[test]
        fn concatenation_is_a_homomorphism(m in 2u32..7, t1 in 0i64..5, t2 in 0i64..5, seed in 0usize..20) {
            let twist = RotationTwist::uniform(m, 3);
            let z = sample_directions(3, seed + 1).remove(seed);
            let first = arc(&twist, &z, t1, 40);
            let end = first.samples.last().unwrap().clone();
            let second = arc(&twist, &end, t2, 40);
            let d1 = lift_loop(&first, 0).unwrap().deck;
            let d2 = lift_loop(&second, 0).unwrap().deck;
            prop_assert_eq!(lift_loop(&first.concat(&second).unwrap(), 0).unwrap().deck, d1.compose(d2));
        }

        #[test]
        fn refinement_keeps_the_deck(m in 2u32..7, turns in 0i64..5, seed in 0usize..20) {
            let twist = RotationTwist::uniform(m, 2);
            let z = sample_directions(2, seed + 1).remove(seed);
            let coarse = arc(&twist, &z, turns, 4 * turns.max(1) as usize);
            if let Ok(lift) = lift_loop(&coarse, 0) {
                let fine = arc(&twist, &z, turns, 8 * turns.max(1) as usize);
                prop_assert_eq!(lift_loop(&fine, 0).unwrap().deck, lift.deck);
            }
        }
    }
}
