//! Conley–Zehnder indices of unitary paths, tracked eigenvalue by eigenvalue.
//!
//! A unitary path `[0, 1] → U(n)` that stays diagonalizable is stored as `n`
//! continuous angle tracks `θ_j(t)` of its eigenvalues `e^{iθ_j(t)}`. With
//! `w = -θ/2π` the number of clockwise turns, a track contributes
//!
//! * `2⌊w(1)⌋ + 1` when its endpoint is off the identity, and
//! * `2 w(1)` when `w(1)` is an integer (the averaged Robbin–Salamon endpoint term),
//!
//! minus the same expression at `w(0)` so that the index is additive under
//! catenation. The orientation is fixed so that `t ↦ e^{-2iτt} I_n` receives
//! `n (2⌊τ/π⌋ + 1)`; at `τ_k = π(mk - 1)/m` this is `(2k - 1) n`.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::ops::{Add, Sub};

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ode::Tolerances;
use crate::orbits::TwistedOrbit;
use crate::symplectic::{reeb_flow_with_differential, GeometryError, StarShapedModel};

const INTEGER_TOL: f64 = 1e-9;
const MAX_REFINE_DEPTH: usize = 24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CzError {
    #[error("path needs at least two samples")]
    TooShort,
    #[error("track {track} has {found} samples, expected {expected}")]
    Shape { track: usize, found: usize, expected: usize },
    #[error("track {track} jumps by {jump:.3} rad between samples {sample} and {}", sample + 1)]
    Discontinuous { track: usize, sample: usize, jump: f64 },
    #[error("sample times must increase from 0 to 1")]
    BadTimes,
    #[error("matrix is not complex-linear (defect {defect:e})")]
    NotComplexLinear { defect: f64 },
    #[error("matrix is not unitary (defect {defect:e})")]
    NotUnitary { defect: f64 },
    #[error("eigenvalue decomposition failed at t = {t}")]
    Eigen { t: f64 },
    #[error("could not resolve eigenvalue crossing near t = {t}")]
    Unresolved { t: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Index value in half-integer units.
/// Serialized as an integer when integral and as a float otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Deserialize)]
#[serde(try_from = "f64")]
pub struct CzIndex {
    halves: i64,
}

impl CzIndex {
    pub const ZERO: CzIndex = CzIndex { halves: 0 };

    pub fn from_integer(v: i64) -> Self {
        CzIndex { halves: 2 * v }
    }

    pub fn from_halves(halves: i64) -> Self {
        CzIndex { halves }
    }

    pub fn halves(self) -> i64 {
        self.halves
    }

    pub fn as_integer(self) -> Option<i64> {
        (self.halves % 2 == 0).then_some(self.halves / 2)
    }

    pub fn as_f64(self) -> f64 {
        self.halves as f64 / 2.0
    }
}

impl From<CzIndex> for f64 {
    fn from(c: CzIndex) -> f64 {
        c.as_f64()
    }
}

impl Serialize for CzIndex {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.as_integer() {
            Some(v) => s.serialize_i64(v),
            None => s.serialize_f64(self.as_f64()),
        }
    }
}

impl TryFrom<f64> for CzIndex {
    type Error = String;

    fn try_from(v: f64) -> Result<Self, String> {
        let h = 2.0 * v;
        if h.fract() == 0.0 && h.is_finite() {
            Ok(CzIndex { halves: h as i64 })
        } else {
            Err(format!("{v} is not a half-integer"))
        }
    }
}

impl fmt::Display for CzIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.as_integer() {
            Some(v) => write!(f, "{v}"),
            None => write!(f, "{}/2", self.halves),
        }
    }
}

impl Add for CzIndex {
    type Output = CzIndex;
    fn add(self, rhs: CzIndex) -> CzIndex {
        CzIndex { halves: self.halves + rhs.halves }
    }
}

impl Sub for CzIndex {
    type Output = CzIndex;
    fn sub(self, rhs: CzIndex) -> CzIndex {
        CzIndex { halves: self.halves - rhs.halves }
    }
}

impl std::iter::Sum for CzIndex {
    fn sum<I: Iterator<Item = CzIndex>>(iter: I) -> CzIndex {
        iter.fold(CzIndex::ZERO, Add::add)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitaryPath {
    times: Vec<f64>,
    tracks: Vec<Vec<f64>>,
}

impl UnitaryPath {
    pub fn new(times: Vec<f64>, tracks: Vec<Vec<f64>>) -> Result<Self, CzError> {
        if times.len() < 2 {
            return Err(CzError::TooShort);
        }
        if times[0] != 0.0 || *times.last().unwrap() != 1.0 || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CzError::BadTimes);
        }
        for (track, theta) in tracks.iter().enumerate() {
            if theta.len() != times.len() {
                return Err(CzError::Shape { track, found: theta.len(), expected: times.len() });
            }
            if let Some((sample, jump)) = theta
                .windows(2)
                .map(|w| (w[1] - w[0]).abs())
                .enumerate()
                .find(|(_, j)| !(*j < PI))
            {
                return Err(CzError::Discontinuous { track, sample, jump });
            }
        }
        Ok(UnitaryPath { times, tracks })
    }

    /// Samples `t ↦ (θ_1(t), ..., θ_n(t))` at `samples + 1` equally spaced times.
    pub fn from_angle_fn<F>(samples: usize, f: F) -> Result<Self, CzError>
    where
        F: Fn(f64) -> Vec<f64>,
    {
        let samples = samples.max(1);
        let times: Vec<f64> = (0..=samples).map(|i| i as f64 / samples as f64).collect();
        let values: Vec<Vec<f64>> = times.iter().map(|&t| f(t)).collect();
        let n = values[0].len();
        let tracks = (0..n).map(|j| values.iter().map(|v| v[j]).collect()).collect();
        Self::new(times, tracks)
    }

    /// `t ↦ e^{-2iτt} I_n`.
    pub fn rotation(tau: f64, n: usize, samples: usize) -> Self {
        let samples = samples.max((4.0 * tau.abs()).ceil() as usize + 1);
        Self::from_angle_fn(samples, |t| vec![-2.0 * tau * t; n]).expect("linear tracks are continuous")
    }

    /// Tracks eigenvalues of a unitary-valued function, refining by bisection
    /// wherever consecutive samples move an angle by `π/2` or more or disagree with
    /// the track through the midpoint.
    pub fn from_unitary_fn<F>(samples: usize, f: F) -> Result<Self, CzError>
    where
        F: Fn(f64) -> Result<DMatrix<Complex64>, CzError>,
    {
        let samples = samples.max(1);
        let start = eigen_angles(&f(0.0)?, 0.0)?;
        let mut times = vec![0.0];
        let mut values = vec![start];
        for i in 1..=samples {
            let t = i as f64 / samples as f64;
            let t_prev = *times.last().unwrap();
            track_segment(&f, t_prev, t, &mut times, &mut values, 0)?;
        }
        let n = values[0].len();
        let tracks = (0..n).map(|j| values.iter().map(|v| v[j]).collect()).collect();
        Self::new(times, tracks)
    }

    /// The linearized flow `Ψ_t = Dφ_{τt}` along a twisted orbit, as a unitary path.
    ///
    /// Fails with [`CzError::NotUnitary`] for hypersurfaces whose linearized Reeb
    /// flow leaves `U(n)`.
    pub fn from_orbit(
        orbit: &TwistedOrbit,
        model: &StarShapedModel,
        samples: usize,
        tol: Tolerances,
    ) -> Result<Self, CzError> {
        let n = model.n();
        if model.is_round_sphere() {
            return Ok(Self::rotation(orbit.tau, n, samples));
        }
        let samples = samples.max((4.0 * orbit.tau.abs()).ceil() as usize + 1);
        Self::from_unitary_fn(samples, |t| {
            let (_, d) = reeb_flow_with_differential(&orbit.z0, orbit.tau * t, model, tol)?;
            complex_unitary(&d)
        })
    }

    pub fn n(&self) -> usize {
        self.tracks.len()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn tracks(&self) -> &[Vec<f64>] {
        &self.tracks
    }

    pub fn end_angles(&self) -> Vec<f64> {
        self.tracks.iter().map(|t| *t.last().unwrap()).collect()
    }

    /// Catenation with `other` run after `self`, where `other` starts at the identity
    /// and commutes with `self`'s endpoint (diagonal in the same basis): angles add.
    pub fn then(&self, other: &UnitaryPath) -> Result<UnitaryPath, CzError> {
        if other.n() != self.n() {
            return Err(CzError::Shape { track: 0, found: other.n(), expected: self.n() });
        }
        let mut times: Vec<f64> = self.times.iter().map(|t| 0.5 * t).collect();
        times.extend(other.times[1..].iter().map(|t| 0.5 + 0.5 * t));
        let tracks = self
            .tracks
            .iter()
            .zip(&other.tracks)
            .map(|(a, b)| {
                let end = *a.last().unwrap();
                let start = b[0];
                let mut track = a.clone();
                track.extend(b[1..].iter().map(|th| end + th - start));
                track
            })
            .collect();
        UnitaryPath::new(times, tracks)
    }
}

fn track_segment<F>(
    f: &F,
    t0: f64,
    t1: f64,
    times: &mut Vec<f64>,
    values: &mut Vec<Vec<f64>>,
    depth: usize,
) -> Result<(), CzError>
where
    F: Fn(f64) -> Result<DMatrix<Complex64>, CzError>,
{
    let prev = values.last().unwrap().clone();
    let raw = eigen_angles(&f(t1)?, t1)?;
    let next = match_angles(&prev, &raw);
    let mid_t = 0.5 * (t0 + t1);
    let mid = match_angles(&prev, &eigen_angles(&f(mid_t)?, mid_t)?);
    let via_mid = match_angles(&mid, &raw);
    let max_jump = max_diff(&prev, &next);
    let consistent = max_diff(&next, &via_mid) < 1e-6;
    if max_jump < PI / 2.0 && consistent {
        times.push(t1);
        values.push(next);
        return Ok(());
    }
    if depth >= MAX_REFINE_DEPTH {
        return Err(CzError::Unresolved { t: t1 });
    }
    track_segment(f, t0, mid_t, times, values, depth + 1)?;
    track_segment(f, mid_t, t1, times, values, depth + 1)
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Pairs each previous angle with the nearest unused eigenvalue, continued onto the
/// branch closest to the previous value.
fn match_angles(prev: &[f64], raw: &[f64]) -> Vec<f64> {
    let mut used = vec![false; raw.len()];
    prev.iter()
        .map(|&p| {
            let (best, delta) = raw
                .iter()
                .enumerate()
                .filter(|(i, _)| !used[*i])
                .map(|(i, &a)| (i, wrap(a - p)))
                .min_by(|x, y| x.1.abs().total_cmp(&y.1.abs()))
                .expect("as many eigenvalues as tracks");
            used[best] = true;
            p + delta
        })
        .collect()
}

/// Reduces an angle into `(-π, π]`.
fn wrap(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

fn eigen_angles(u: &DMatrix<Complex64>, t: f64) -> Result<Vec<f64>, CzError> {
    let schur = Schur::try_new(u.clone(), 1e-14, 10_000).ok_or(CzError::Eigen { t })?;
    let (_, tri) = schur.unpack();
    Ok((0..tri.nrows()).map(|i| tri[(i, i)].arg()).collect())
}

/// Reads a real `2n x 2n` matrix as a complex `n x n` one, checking complex linearity
/// and unitarity to `1e-8`.
pub fn complex_unitary(d: &DMatrix<f64>) -> Result<DMatrix<Complex64>, CzError> {
    let n = d.nrows() / 2;
    let mut u = DMatrix::zeros(n, n);
    let mut defect = 0.0f64;
    for r in 0..n {
        for c in 0..n {
            let (a, b) = (d[(2 * r, 2 * c)], d[(2 * r + 1, 2 * c)]);
            defect = defect
                .max((d[(2 * r, 2 * c + 1)] + b).abs())
                .max((d[(2 * r + 1, 2 * c + 1)] - a).abs());
            u[(r, c)] = Complex64::new(a, b);
        }
    }
    if defect > 1e-8 {
        return Err(CzError::NotComplexLinear { defect });
    }
    let gram = u.adjoint() * &u - DMatrix::<Complex64>::identity(n, n);
    let defect = gram.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if defect > 1e-8 {
        return Err(CzError::NotUnitary { defect });
    }
    Ok(u)
}

/// Endpoint term in half-units: `2(2⌊w⌋ + 1)` off the identity, `4w` on it.
fn endpoint_halves(theta: f64) -> i64 {
    let w = -theta / TAU;
    let nearest = w.round();
    if (w - nearest).abs() <= INTEGER_TOL {
        4 * nearest as i64
    } else {
        2 * (2 * w.floor() as i64 + 1)
    }
}

pub fn cz_index_unitary(path: &UnitaryPath) -> CzIndex {
    path.tracks
        .iter()
        .map(|track| {
            CzIndex::from_halves(endpoint_halves(*track.last().unwrap()) - endpoint_halves(track[0]))
        })
        .sum()
}

/// Grading `2kn + ind` of the critical point of Morse index `morse_index` on the `k`-th sphere.
pub fn grading(k: i64, morse_index: i64, n: usize) -> i64 {
    2 * k * n as i64 + morse_index
}

pub fn relative_index(a: &UnitaryPath, b: &UnitaryPath) -> CzIndex {
    cz_index_unitary(a) - cz_index_unitary(b)
}

/// Closed form `n (2⌊τ/π⌋ + 1)` for `τ/π ∉ Z`, used as a cross-check.
pub fn rotation_index_closed_form(tau: f64, n: usize) -> Option<i64> {
    let q = tau / PI;
    (q.fract() != 0.0).then(|| n as i64 * (2 * q.floor() as i64 + 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tau_k(m: u32, k: i64) -> f64 {
        PI / m as f64 * (m as i64 * k - 1) as f64
    }

    #[test]
    fn anchor_values() {
        let p = UnitaryPath::rotation(PI / 2.0, 2, 16);
        assert_eq!(cz_index_unitary(&p), CzIndex::from_integer(2));
        let p = UnitaryPath::rotation(-PI / 2.0, 2, 16);
        assert_eq!(cz_index_unitary(&p), CzIndex::from_integer(-2));
        let id = UnitaryPath::from_angle_fn(4, |_| vec![0.0; 3]).unwrap();
        assert_eq!(cz_index_unitary(&id), CzIndex::ZERO);
        for m in 2..6 {
            for n in 1..4 {
                for k in -3..4 {
                    let p = UnitaryPath::rotation(tau_k(m, k), n, 8);
                    assert_eq!(cz_index_unitary(&p), CzIndex::from_integer((2 * k - 1) * n as i64));
                }
            }
        }
    }

    #[test]
    fn gradings() {
        assert_eq!(grading(1, 0, 2), 4);
        assert_eq!(grading(0, 3, 2), 3);
        assert_eq!(grading(0, 0, 2), 0);
        assert_eq!(grading(-1, 1, 3), -5);
    }

    #[test]
    fn relative_indices() {
        for n in [2usize, 3] {
            for k in -2..3 {
                let upper = UnitaryPath::rotation(tau_k(3, k + 1), n, 8);
                let lower = UnitaryPath::rotation(tau_k(3, k), n, 8);
                assert_eq!(relative_index(&upper, &lower), CzIndex::from_integer(2 * n as i64));
                assert_eq!(relative_index(&lower, &lower), CzIndex::ZERO);
            }
        }
        let a = UnitaryPath::rotation(tau_k(2, 1), 3, 8);
        let b = UnitaryPath::rotation(tau_k(2, 0), 3, 8);
        assert_eq!(relative_index(&a, &b), CzIndex::from_integer(6));
    }

    #[test]
    fn degenerate_endpoint_term() {
        // a full clockwise turn ends on the identity: w = 1 contributes 2
        let p = UnitaryPath::rotation(PI, 1, 8);
        assert_eq!(cz_index_unitary(&p), CzIndex::from_integer(2));
        assert_eq!(rotation_index_closed_form(PI, 1), None);
        let p = UnitaryPath::rotation(-PI, 2, 8);
        assert_eq!(cz_index_unitary(&p), CzIndex::from_integer(-4));
    }

    #[test]
    fn discontinuous_tracks_are_rejected() {
        let err = UnitaryPath::new(vec![0.0, 0.5, 1.0], vec![vec![0.0, 0.1, 3.5]]).unwrap_err();
        assert!(matches!(err, CzError::Discontinuous { track: 0, sample: 1, .. }));
        assert!(matches!(UnitaryPath::new(vec![0.0], vec![vec![0.0]]), Err(CzError::TooShort)));
        assert!(matches!(UnitaryPath::new(vec![0.0, 0.7], vec![vec![0.0, 0.0]]), Err(CzError::BadTimes)));
    }

    #[test]
    fn eigen_tracking_without_crossings_follows_each_track() {
        // rates 1 and 1.2 over τ = 1: angles never meet mod 2π
        let q = DMatrix::from_row_slice(2, 2, &[0.6, 0.8, -0.8, 0.6]).map(|x| Complex64::new(x, 0.0));
        let path = UnitaryPath::from_unitary_fn(4, |t| {
            let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
                Complex64::from_polar(1.0, -2.0 * t),
                Complex64::from_polar(1.0, -2.4 * t),
            ]));
            Ok(&q * d * q.adjoint())
        })
        .unwrap();
        let mut ends = path.end_angles();
        ends.sort_by(f64::total_cmp);
        assert!((ends[0] + 2.4).abs() < 1e-9 && (ends[1] + 2.0).abs() < 1e-9, "{ends:?}");
    }

    #[test]
    fn eigen_tracking_recovers_rotation_with_distinct_speeds() {
        // diag(e^{-2i t τ a_j}) with a basis change, so the eigenvalues are not on the diagonal
        let speeds = [1.0, -0.6, 2.3];
        let q = {
            let h = DMatrix::from_fn(3, 3, |r, c| Complex64::new((r + 2 * c) as f64 * 0.3, (r * c) as f64 * 0.2 - 0.1));
            let herm = &h + h.adjoint();
            // unitary via Cayley transform of a Hermitian matrix
            let i = Complex64::new(0.0, 1.0);
            let id = DMatrix::<Complex64>::identity(3, 3);
            (&id - herm.map(|x| x * i)) * (&id + herm.map(|x| x * i)).try_inverse().unwrap()
        };
        let tau = 4.0;
        let path = UnitaryPath::from_unitary_fn(8, |t| {
            let d = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                3,
                speeds.iter().map(|s| Complex64::from_polar(1.0, -2.0 * tau * t * s)),
            ));
            Ok(&q * d * q.adjoint())
        })
        .unwrap();
        // tracks may trade places where eigenvalues cross, so compare the angle sum
        // and the end angles mod 2π
        let ends = path.end_angles();
        let total: f64 = speeds.iter().map(|s| -2.0 * tau * s).sum();
        assert!((ends.iter().sum::<f64>() - total).abs() < 1e-8);
        let mut reduced: Vec<f64> = ends.iter().map(|a| a.rem_euclid(TAU)).collect();
        reduced.sort_by(f64::total_cmp);
        let mut expected: Vec<f64> = speeds.iter().map(|s| (-2.0 * tau * s).rem_euclid(TAU)).collect();
        expected.sort_by(f64::total_cmp);
        for (a, b) in reduced.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
        let closed: i64 = speeds.iter().map(|s| rotation_index_closed_form(tau * s, 1).unwrap()).sum();
        assert_eq!(cz_index_unitary(&path), CzIndex::from_integer(closed));
    }

    #[test]
    fn non_unitary_is_rejected() {
        let mut d = DMatrix::<f64>::identity(4, 4);
        d[(0, 0)] = 2.0;
        d[(1, 1)] = 2.0;
        assert!(matches!(complex_unitary(&d), Err(CzError::NotUnitary { .. })));
        d[(0, 1)] = 1.0;
        assert!(matches!(complex_unitary(&d), Err(CzError::NotComplexLinear { .. })));
    }

    #[test]
    fn half_integer_display() {
        assert_eq!(CzIndex::from_halves(5).to_string(), "5/2");
        assert_eq!(CzIndex::from_integer(-3).to_string(), "-3");
        assert_eq!(serde_json::to_string(&CzIndex::from_halves(3)).unwrap(), "1.5");
        assert_eq!(serde_json::to_string(&CzIndex::from_integer(-4)).unwrap(), "-4");
        for c in [CzIndex::from_halves(3), CzIndex::from_integer(-4)] {
            let back: CzIndex = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
            assert_eq!(back, c);
        }
    }

    proptest! {
        #[test]
        fn closed_form_on_tau_grid(tau in -12.0f64..12.0, n in 1usize..5) {
            prop_assume!((tau / PI).fract().abs() > 1e-6);
            let p = UnitaryPath::rotation(tau, n, 4);
            prop_assert_eq!(cz_index_unitary(&p), CzIndex::from_integer(rotation_index_closed_form(tau, n).unwrap()));
        }

        #[test]
        fn loop_shift_adds_two_n(tau in -6.0f64..6.0, n in 1usize..4) {
            prop_assume!((tau / PI).fract().abs() > 1e-6);
            let path = UnitaryPath::rotation(tau, n, 8);
            let full_loop = UnitaryPath::rotation(PI, n, 8);
            let shifted = path.then(&full_loop).unwrap();
            prop_assert_eq!(cz_index_unitary(&shifted) - cz_index_unitary(&path), CzIndex::from_integer(2 * n as i64));
        }

        #[test]
        fn catenation_is_additive_for_loops(tau in -6.0f64..6.0, turns in -3i64..4, n in 1usize..4) {
            prop_assume!((tau / PI).fract().abs() > 1e-6);
            let path = UnitaryPath::rotation(tau, n, 8);
            let rotation_loop = UnitaryPath::rotation(PI * turns as f64, n, 8);
            let cat = path.then(&rotation_loop).unwrap();
            prop_assert_eq!(cz_index_unitary(&cat), cz_index_unitary(&path) + cz_index_unitary(&rotation_loop));
        }
    }
}
