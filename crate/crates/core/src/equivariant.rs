//! Morse–Bott pearl complex of the round sphere under a free rotation with its `Z_m`
//! quotient. Tate homology of the cyclic group serves as an independent check.
//!
//! For a twist with all exponents equal to `k` mod `m`, the critical manifold of the
//! twisted action functional is one copy of `S^{2n-1}` per branch `l`. The auxiliary
//! function `f(z) = Σ j|z_j|²` has the coordinate circles `C_c = {|z_c| = 1}` as
//! critical manifolds, of Morse–Bott index `2(c - 1)`. On each circle
//! `h(t) = cos(2πmt)` (with `z_c = e^{2πit}`) has maxima at `t = i/m` and minima at
//! `t = (i - ½)/m`, labelled by `i ∈ Z_m`. The twist rotates `C_c` by `k/m` of a turn
//! and therefore shifts both label sets by `k`.
//!
//! Generator `(l, c, max i)` sits in degree `2ln + 2(c - 1) + 1` and `(l, c, min i)`
//! in degree `2ln + 2(c - 1)`, so every degree carries exactly `m` generators.
//! Odd-degree boundaries (maximum to the two adjacent minima on one circle) are
//! `A = I + S` with `S` the cyclic shift; even-degree boundaries (minimum on one
//! circle to every maximum on the circle below, or on the top circle of the previous
//! pearl) are the all-ones matrix. Both commute with `S`, and `𝟙·A = A·𝟙 = 0`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::complex::{ComplexError, CyclicAction, GradedF2Complex, HomologyEntry, HomologyTable};
use crate::cz::grading;
use crate::f2::F2Matrix;
use crate::par;
use crate::symplectic::RotationTwist;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EquivariantError {
    #[error("window [{lo}, {hi}] holds {pearls} pearl(s); at least 2 are needed")]
    WindowTooSmall { lo: i64, hi: i64, pearls: i64 },
    #[error("exponents {exponents:?} are not all congruent mod {m}; only the common-exponent complex is built")]
    MixedExponents { m: u32, exponents: Vec<i64> },
    #[error("n must be at least 1")]
    ZeroDimension,
    #[error("twist fixes the coordinate subspace spanned by {coordinates:?}; fixed-set homology is only computed for free rotations")]
    NonFreeFixedSet { coordinates: Vec<usize> },
    #[error(transparent)]
    Complex(#[from] ComplexError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PearlComplexSpec {
    pub n: usize,
    pub twist: RotationTwist,
    /// Inclusive range of branches `l`.
    pub window: (i64, i64),
}

impl PearlComplexSpec {
    pub fn new(twist: RotationTwist, window: (i64, i64)) -> Self {
        PearlComplexSpec { n: twist.n(), twist, window }
    }

    pub fn pearls(&self) -> i64 {
        self.window.1 - self.window.0 + 1
    }

    pub fn m(&self) -> usize {
        self.twist.m() as usize
    }

    /// Degree range covered by the pearls of the window.
    pub fn degree_range(&self) -> (i64, i64) {
        let n = self.n;
        (grading(self.window.0, 0, n), grading(self.window.1, 2 * n as i64 - 1, n))
    }

    fn check(&self) -> Result<i64, EquivariantError> {
        if self.n == 0 {
            return Err(EquivariantError::ZeroDimension);
        }
        let pearls = self.pearls();
        if pearls < 2 {
            return Err(EquivariantError::WindowTooSmall { lo: self.window.0, hi: self.window.1, pearls });
        }
        self.twist.common_exponent().ok_or_else(|| EquivariantError::MixedExponents {
            m: self.twist.m(),
            exponents: self.twist.exponents().to_vec(),
        })
    }
}

/// `I + S`, column `j` hitting rows `j` and `j + 1` mod `m`.
pub fn ladder_matrix(m: usize) -> F2Matrix {
    F2Matrix::cyclic_ladder(m)
}

pub fn norm_matrix(m: usize) -> F2Matrix {
    F2Matrix::all_ones(m, m)
}

pub fn build_pearl_complex(spec: &PearlComplexSpec) -> Result<GradedF2Complex, EquivariantError> {
    let k = spec.check()?;
    let m = spec.m();
    let n = spec.n;
    let (d_min, d_max) = spec.degree_range();
    let shift = k.rem_euclid(m as i64) as usize;
    let perm: Vec<usize> = (0..m).map(|i| (i + shift) % m).collect();
    let mut generators = Vec::new();
    let mut boundaries = Vec::new();
    let mut permutations = Vec::new();
    for d in d_min..=d_max {
        let local = d - grading(spec.window.0, 0, n);
        let pearl = spec.window.0 + local.div_euclid(2 * n as i64);
        let morse = local.rem_euclid(2 * n as i64);
        let circle = morse / 2 + 1;
        let kind = if morse % 2 == 1 { "max" } else { "min" };
        generators.push((0..m).map(|i| format!("l{pearl}:c{circle}:{kind}{i}")).collect());
        permutations.push(perm.clone());
        boundaries.push(if d == d_min {
            F2Matrix::zeros(0, m)
        } else if morse % 2 == 1 {
            ladder_matrix(m)
        } else {
            norm_matrix(m)
        });
    }
    let complex = GradedF2Complex::new(d_min, generators, boundaries, Some(CyclicAction { order: m, permutations }))?;
    complex.validate()?;
    Ok(complex)
}

/// `Ĥ_d(C_m; F_2)` for `d` in `degrees`, from the complete periodic resolution
/// `… → F_2[C_m] --(t-1)--> F_2[C_m] --N--> F_2[C_m] --(t-1)--> …` tensored with the
/// trivial module. Every entry is reliable since the complex is periodic.
pub fn tate_homology(m: u32, degrees: (i64, i64)) -> HomologyTable {
    let m = m.max(1) as usize;
    let t_minus_one = group_ring_element(m, &[0, 1]);
    let norm = group_ring_element(m, &(0..m).collect::<Vec<_>>());
    // induced map on F_2 ⊗ F_2[C_m] = F_2: the augmentation of the element, read off
    // as the weight of the image of the identity
    let coinvariant = |x: &F2Matrix| (0..m).filter(|&r| x.get(r, 0)).count() % 2;
    let boundary_rank = |d: i64| if d.rem_euclid(2) == 1 { coinvariant(&t_minus_one) } else { coinvariant(&norm) };
    let entries = (degrees.0..=degrees.1)
        .map(|d| HomologyEntry { degree: d, dim: 1 - boundary_rank(d) - boundary_rank(d + 1), reliable: true })
        .collect();
    HomologyTable { entries }
}

/// Multiplication by `Σ_{p ∈ powers} t^p` on `F_2[C_m]` in the basis `1, t, …, t^{m-1}`.
fn group_ring_element(m: usize, powers: &[usize]) -> F2Matrix {
    let mut out = F2Matrix::zeros(m, m);
    for c in 0..m {
        for &p in powers {
            out.flip((c + p) % m, c);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegreeComparison {
    pub d: i64,
    pub dim_quotient: usize,
    pub dim_tate: usize,
    #[serde(rename = "match")]
    pub matches: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HomologyReport {
    pub m: u32,
    pub n: usize,
    pub window: (i64, i64),
    pub degrees: Vec<DegreeComparison>,
}

impl HomologyReport {
    pub fn all_match(&self) -> bool {
        self.degrees.iter().all(|d| d.matches)
    }

    pub fn mismatches(&self) -> Vec<i64> {
        self.degrees.iter().filter(|d| !d.matches).map(|d| d.d).collect()
    }
}

/// Interior homology of the quotient pearl complex against Tate homology.
pub fn compare_with_oracle(spec: &PearlComplexSpec) -> Result<HomologyReport, EquivariantError> {
    let quotient = build_pearl_complex(spec)?.quotient_by_action()?.homology()?;
    let (lo, hi) = spec.degree_range();
    let tate = tate_homology(spec.twist.m(), (lo, hi));
    let degrees = quotient
        .interior()
        .map(|e| {
            let dim_tate = tate.dim(e.degree).expect("same degree range");
            DegreeComparison { d: e.degree, dim_quotient: e.dim, dim_tate, matches: e.dim == dim_tate }
        })
        .collect();
    Ok(HomologyReport { m: spec.twist.m(), n: spec.n, window: spec.window, degrees })
}

/// Runs [`compare_with_oracle`] for every `(m, n)` with the uniform twist `k = 1`,
/// in the order `m` outer, `n` inner.
pub fn sweep(ms: &[u32], ns: &[usize], window: (i64, i64)) -> Vec<Result<HomologyReport, EquivariantError>> {
    let points: Vec<(u32, usize)> = ms.iter().flat_map(|&m| ns.iter().map(move |&n| (m, n))).collect();
    par::map(&points, |&(m, n)| compare_with_oracle(&PearlComplexSpec::new(RotationTwist::uniform(m, n), window)))
}

/// Homology of the fixed set of `φ` on the sphere, for twists acting freely.
///
/// A free rotation has no fixed points, so the complex is empty and every degree is 0.
pub fn fixed_set_homology(twist: &RotationTwist, degrees: (i64, i64)) -> Result<HomologyTable, EquivariantError> {
    let fixed: Vec<usize> = (0..twist.n()).filter(|&j| twist.reduced(j) == twist.m() as i64).map(|j| j + 1).collect();
    if !fixed.is_empty() {
        return Err(EquivariantError::NonFreeFixedSet { coordinates: fixed });
    }
    let table = GradedF2Complex::empty(degrees.0, degrees.1)?.homology()?;
    Ok(HomologyTable {
        entries: table.entries.into_iter().map(|e| HomologyEntry { reliable: true, ..e }).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::brute_force_homology;
    use proptest::prelude::*;

    fn spec(m: u32, n: usize, window: (i64, i64)) -> PearlComplexSpec {
        PearlComplexSpec::new(RotationTwist::uniform(m, n), window)
    }

    fn quotient_dims(m: u32, n: usize, window: (i64, i64)) -> Vec<usize> {
        let c = build_pearl_complex(&spec(m, n, window)).unwrap();
        c.quotient_by_action().unwrap().homology().unwrap().interior().map(|e| e.dim).collect()
    }

    #[test]
    fn quotient_examples() {
        let even = quotient_dims(2, 2, (0, 2));
        assert!(!even.is_empty() && even.iter().all(|&d| d == 1));
        assert!(quotient_dims(3, 2, (0, 2)).iter().all(|&d| d == 0));
    }

    #[test]
    fn untwisted_complex_is_acyclic() {
        let c = build_pearl_complex(&spec(1, 2, (0, 2))).unwrap();
        assert!(c.homology().unwrap().interior().all(|e| e.dim == 0));
    }

    #[test]
    fn layout_and_labels() {
        let c = build_pearl_complex(&spec(3, 2, (0, 1))).unwrap();
        assert_eq!((c.d_min(), c.d_max()), (0, 7));
        assert_eq!(c.generators(0), ["l0:c1:min0", "l0:c1:min1", "l0:c1:min2"]);
        assert_eq!(c.generators(3)[1], "l0:c2:max1");
        assert_eq!(c.generators(4)[0], "l1:c1:min0");
        assert_eq!(*c.boundary(3).unwrap(), F2Matrix::cyclic_ladder(3));
        assert_eq!(*c.boundary(4).unwrap(), F2Matrix::all_ones(3, 3));
        assert!(c.degrees().all(|d| c.rank_of(d) == 3));
    }

    #[test]
    fn invalid_pearl_specs_are_rejected() {
        assert!(matches!(build_pearl_complex(&spec(2, 2, (1, 1))), Err(EquivariantError::WindowTooSmall { pearls: 1, .. })));
        let mixed = PearlComplexSpec::new(RotationTwist::new(4, vec![1, 3]).unwrap(), (0, 2));
        assert!(matches!(build_pearl_complex(&mixed), Err(EquivariantError::MixedExponents { .. })));
    }

    #[test]
    fn tate_examples() {
        assert!(tate_homology(2, (-3, 3)).entries.iter().all(|e| e.dim == 1));
        assert!(tate_homology(3, (-3, 3)).entries.iter().all(|e| e.dim == 0));
        assert!(tate_homology(1, (-3, 3)).entries.iter().all(|e| e.dim == 0));
    }

    #[test]
    fn tate_matches_truncated_periodic_complex() {
        // oracle: build the tensored periodic complex on a wide window and enumerate
        for m in 1..=6u32 {
            let parity = (m % 2) as u8;
            let lo: i64 = -6;
            let hi = 6;
            let gens: Vec<Vec<String>> = (lo..=hi).map(|d| vec![format!("e{d}")]).collect();
            let bounds: Vec<F2Matrix> = (lo..=hi)
                .map(|d| {
                    if d == lo {
                        F2Matrix::zeros(0, 1)
                    } else if d.rem_euclid(2) == 1 {
                        F2Matrix::zeros(1, 1)
                    } else {
                        F2Matrix::from_rows(&[[parity]], 1).unwrap()
                    }
                })
                .collect();
            let c = GradedF2Complex::new(lo, gens, bounds, None).unwrap();
            let brute = brute_force_homology(&c);
            let tate = tate_homology(m, (lo + 1, hi - 1));
            for (d, dim) in brute.into_iter().filter(|(d, _)| *d > lo && *d < hi) {
                assert_eq!(tate.dim(d), Some(dim), "m = {m}, d = {d}");
            }
        }
    }

    #[test]
    fn oracle_grid() {
        for m in 2..=6 {
            for n in [2, 3] {
                let report = compare_with_oracle(&spec(m, n, (0, 3))).unwrap();
                assert!(report.all_match(), "{report:?}");
                let expected = usize::from(m % 2 == 0);
                assert!(report.degrees.iter().all(|d| d.dim_quotient == expected));
            }
        }
    }

    #[test]
    fn sweep_preserves_order() {
        let reports = sweep(&[2, 3, 4], &[2, 3], (0, 2));
        let keys: Vec<(u32, usize)> = reports.iter().map(|r| r.as_ref().map(|r| (r.m, r.n)).unwrap()).collect();
        assert_eq!(keys, vec![(2, 2), (2, 3), (3, 2), (3, 3), (4, 2), (4, 3)]);
    }

    #[test]
    fn report_json_shape() {
        let report = compare_with_oracle(&spec(2, 2, (0, 1))).unwrap();
        let v: serde_json::Value = serde_json::to_value(&report).unwrap();
        assert_eq!(v["window"], serde_json::json!([0, 1]));
        assert_eq!(v["degrees"][0]["match"], serde_json::json!(true));
        assert!(v["degrees"][0].get("dim_quotient").is_some());
    }

    #[test]
    fn fixed_set_of_free_rotation_has_no_homology() {
        let table = fixed_set_homology(&RotationTwist::uniform(3, 2), (0, 4)).unwrap();
        assert!(table.entries.iter().all(|e| e.dim == 0));
        let identity = RotationTwist::uniform(1, 2);
        assert!(matches!(fixed_set_homology(&identity, (0, 4)), Err(EquivariantError::NonFreeFixedSet { .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn boundary_squares_to_zero_and_action_is_free(m in 1u32..=12, n in 2usize..=3, lo in -3i64..3, len in 2i64..4, k in 1i64..12) {
            prop_assume!(gcd(k, m as i64) == 1);
            let twist = RotationTwist::new(m, vec![k; n]).unwrap();
            let c = build_pearl_complex(&PearlComplexSpec::new(twist, (lo, lo + len - 1))).unwrap();
            prop_assert!(c.validate().is_ok());
            prop_assert!(c.homology().unwrap().interior().all(|e| e.dim == 0));
        }

        #[test]
        fn periodicity_in_the_branch(m in 1u32..=8, n in 2usize..=3, k in -3i64..3) {
            let a = quotient_or_plain(m, n, (k, k + 1));
            let b = quotient_or_plain(m, n, (k + 1, k + 2));
            prop_assert_eq!(a.shifted(2 * n as i64), b);
        }
    }

    fn quotient_or_plain(m: u32, n: usize, window: (i64, i64)) -> HomologyTable {
        let c = build_pearl_complex(&spec(m, n, window)).unwrap();
        c.quotient_by_action().unwrap().homology().unwrap()
    }

    fn gcd(a: i64, b: i64) -> i64 {
        if b == 0 {
            a.abs()
        } else {
            gcd(b, a % b)
        }
    }
}
