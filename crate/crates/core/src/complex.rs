//! Z-graded chain complexes over GF(2) on a finite window of degrees.
//!
//! `boundaries[i]` is the matrix of `∂_d : C_d → C_{d-1}` for `d = d_min + i`, with
//! one column per generator of `C_d`. The lowest boundary maps into the truncated
//! degree `d_min - 1` and therefore has zero rows. Homology at the two window edges
//! depends on data outside the window and is flagged unreliable.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::f2::{F2Error, F2Matrix};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ComplexError {
    #[error("empty degree window [{d_min}, {d_max}]")]
    EmptyWindow { d_min: i64, d_max: i64 },
    #[error("expected {expected} entries in `{field}`, found {found}")]
    Length { field: &'static str, expected: usize, found: usize },
    #[error("boundary in degree {degree} is {rows}x{cols}, expected {expected_rows}x{expected_cols}")]
    Shape {
        degree: i64,
        rows: usize,
        cols: usize,
        expected_rows: usize,
        expected_cols: usize,
    },
    #[error("∂∘∂ ≠ 0: composite ∂_{}∘∂_{degree} has a nonzero entry at ({row}, {col})", degree - 1)]
    BoundarySquare { degree: i64, row: usize, col: usize },
    #[error("action on degree {degree} is not a permutation of {size} generators")]
    InvalidPermutation { degree: i64, size: usize },
    #[error("action generator on degree {degree} does not have order dividing {order}")]
    ActionOrder { degree: i64, order: usize },
    #[error("action is not free: g^{power} fixes generator {generator} in degree {degree}")]
    NotFree { degree: i64, generator: usize, power: usize },
    #[error("action does not commute with ∂ in degree {degree}")]
    NotEquivariant { degree: i64 },
    #[error("complex carries no group action")]
    MissingAction,
    #[error(transparent)]
    F2(#[from] F2Error),
}

/// A cyclic group `Z_order` acting by permutations of generators.
///
/// `permutations[i][g]` is the image of generator `g` of degree `d_min + i` under
/// the group generator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CyclicAction {
    pub order: usize,
    pub permutations: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GradedF2Complex {
    d_min: i64,
    generators: Vec<Vec<String>>,
    boundaries: Vec<F2Matrix>,
    action: Option<CyclicAction>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HomologyEntry {
    pub degree: i64,
    pub dim: usize,
    pub reliable: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HomologyTable {
    pub entries: Vec<HomologyEntry>,
}

impl HomologyTable {
    pub fn dim(&self, degree: i64) -> Option<usize> {
        self.entries.iter().find(|e| e.degree == degree).map(|e| e.dim)
    }

    pub fn interior(&self) -> impl Iterator<Item = &HomologyEntry> {
        self.entries.iter().filter(|e| e.reliable)
    }

    /// Shifts every degree by `by`.
    pub fn shifted(&self, by: i64) -> HomologyTable {
        HomologyTable {
            entries: self
                .entries
                .iter()
                .map(|e| HomologyEntry { degree: e.degree + by, ..*e })
                .collect(),
        }
    }
}

impl GradedF2Complex {
    /// Builds a complex on degrees `d_min ..= d_min + generators.len() - 1`.
    ///
    /// Checks shapes only; use [`GradedF2Complex::validate`] for ∂² = 0 and the action.
    pub fn new(
        d_min: i64,
        generators: Vec<Vec<String>>,
        boundaries: Vec<F2Matrix>,
        action: Option<CyclicAction>,
    ) -> Result<Self, ComplexError> {
        if generators.is_empty() {
            return Err(ComplexError::EmptyWindow { d_min, d_max: d_min - 1 });
        }
        if boundaries.len() != generators.len() {
            return Err(ComplexError::Length {
                field: "boundaries",
                expected: generators.len(),
                found: boundaries.len(),
            });
        }
        for (i, b) in boundaries.iter().enumerate() {
            let expected_rows = if i == 0 { 0 } else { generators[i - 1].len() };
            let expected_cols = generators[i].len();
            if b.rows() != expected_rows || b.cols() != expected_cols {
                return Err(ComplexError::Shape {
                    degree: d_min + i as i64,
                    rows: b.rows(),
                    cols: b.cols(),
                    expected_rows,
                    expected_cols,
                });
            }
        }
        if let Some(a) = &action {
            if a.permutations.len() != generators.len() {
                return Err(ComplexError::Length {
                    field: "action.permutations",
                    expected: generators.len(),
                    found: a.permutations.len(),
                });
            }
        }
        Ok(GradedF2Complex { d_min, generators, boundaries, action })
    }

    /// Complex with no generators in any degree of `[d_min, d_max]`.
    pub fn empty(d_min: i64, d_max: i64) -> Result<Self, ComplexError> {
        if d_max < d_min {
            return Err(ComplexError::EmptyWindow { d_min, d_max });
        }
        let len = (d_max - d_min + 1) as usize;
        Self::new(d_min, vec![Vec::new(); len], vec![F2Matrix::zeros(0, 0); len], None)
    }

    pub fn d_min(&self) -> i64 {
        self.d_min
    }

    pub fn d_max(&self) -> i64 {
        self.d_min + self.generators.len() as i64 - 1
    }

    pub fn degrees(&self) -> std::ops::RangeInclusive<i64> {
        self.d_min..=self.d_max()
    }

    fn idx(&self, degree: i64) -> Option<usize> {
        self.degrees().contains(&degree).then(|| (degree - self.d_min) as usize)
    }

    pub fn generators(&self, degree: i64) -> &[String] {
        self.idx(degree).map_or(&[], |i| &self.generators[i])
    }

    pub fn rank_of(&self, degree: i64) -> usize {
        self.generators(degree).len()
    }

    pub fn boundary(&self, degree: i64) -> Option<&F2Matrix> {
        self.idx(degree).map(|i| &self.boundaries[i])
    }

    pub fn action(&self) -> Option<&CyclicAction> {
        self.action.as_ref()
    }

    pub fn total_generators(&self) -> usize {
        self.generators.iter().map(Vec::len).sum()
    }

    /// Alternating sum of ranks over the window.
    pub fn euler_characteristic(&self) -> i64 {
        self.degrees()
            .map(|d| if d.rem_euclid(2) == 0 { 1 } else { -1 } * self.rank_of(d) as i64)
            .sum()
    }

    /// Checks ∂∘∂ = 0 on every degree whose composite lies inside the window, and,
    /// when an action is attached, that it is a free `Z_order` action commuting with ∂.
    pub fn validate(&self) -> Result<(), ComplexError> {
        for d in self.d_min + 1..=self.d_max() {
            let upper = self.boundary(d).expect("degree in window");
            let lower = self.boundary(d - 1).expect("degree in window");
            let composite = lower.matmul(upper)?;
            if let Some((row, col)) = composite.first_nonzero() {
                return Err(ComplexError::BoundarySquare { degree: d, row, col });
            }
        }
        if let Some(action) = &self.action {
            self.validate_action(action)?;
        }
        Ok(())
    }

    fn validate_action(&self, action: &CyclicAction) -> Result<(), ComplexError> {
        if action.order == 0 {
            return Err(ComplexError::ActionOrder { degree: self.d_min, order: 0 });
        }
        for (i, perm) in action.permutations.iter().enumerate() {
            let degree = self.d_min + i as i64;
            let size = self.generators[i].len();
            let mut seen = vec![false; size];
            if perm.len() != size {
                return Err(ComplexError::InvalidPermutation { degree, size });
            }
            for &p in perm {
                if p >= size || std::mem::replace(&mut seen[p], true) {
                    return Err(ComplexError::InvalidPermutation { degree, size });
                }
            }
            for g in 0..size {
                let mut x = g;
                for power in 1..=action.order {
                    x = perm[x];
                    if power < action.order && x == g {
                        return Err(ComplexError::NotFree { degree, generator: g, power });
                    }
                }
                if x != g {
                    return Err(ComplexError::ActionOrder { degree, order: action.order });
                }
            }
        }
        for (i, b) in self.boundaries.iter().enumerate() {
            let rows: &[usize] = if i == 0 { &[] } else { &action.permutations[i - 1] };
            if b.permuted(rows, &action.permutations[i]) != *b {
                return Err(ComplexError::NotEquivariant { degree: self.d_min + i as i64 });
            }
        }
        Ok(())
    }

    /// `dim ker ∂_d - rank ∂_{d+1}` per degree; the window edges are flagged unreliable.
    pub fn homology(&self) -> Result<HomologyTable, ComplexError> {
        self.validate()?;
        let d_max = self.d_max();
        let entries = self
            .degrees()
            .map(|d| {
                let kernel = self.boundary(d).expect("degree in window").nullspace_dim();
                let image = if d < d_max {
                    self.boundary(d + 1).expect("degree in window").rank()
                } else {
                    0
                };
                HomologyEntry { degree: d, dim: kernel - image, reliable: d > self.d_min && d < d_max }
            })
            .collect();
        Ok(HomologyTable { entries })
    }

    /// Orbit complex of the attached free action.
    ///
    /// Generators of the quotient are orbits, labelled by their lowest-index member;
    /// the boundary of an orbit is the image of the boundary of that representative,
    /// with coefficients summed mod 2 over each target orbit.
    pub fn quotient_by_action(&self) -> Result<GradedF2Complex, ComplexError> {
        let action = self.action.as_ref().ok_or(ComplexError::MissingAction)?;
        self.validate()?;
        // orbit_of[i][g] = orbit index of generator g; reps[i][o] = representative of orbit o
        let mut orbit_of = Vec::with_capacity(self.generators.len());
        let mut reps = Vec::with_capacity(self.generators.len());
        for perm in &action.permutations {
            let mut of = vec![usize::MAX; perm.len()];
            let mut r = Vec::new();
            for g in 0..perm.len() {
                if of[g] != usize::MAX {
                    continue;
                }
                let mut x = g;
                loop {
                    of[x] = r.len();
                    x = perm[x];
                    if x == g {
                        break;
                    }
                }
                r.push(g);
            }
            orbit_of.push(of);
            reps.push(r);
        }
        let generators: Vec<Vec<String>> = reps
            .iter()
            .zip(&self.generators)
            .map(|(r, labels)| r.iter().map(|&g| labels[g].clone()).collect())
            .collect();
        let boundaries = self
            .boundaries
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let rows = if i == 0 { 0 } else { reps[i - 1].len() };
                let mut q = F2Matrix::zeros(rows, reps[i].len());
                for (o, &g) in reps[i].iter().enumerate() {
                    for r in 0..b.rows() {
                        if b.get(r, g) {
                            q.flip(orbit_of[i - 1][r], o);
                        }
                    }
                }
                q
            })
            .collect();
        GradedF2Complex::new(self.d_min, generators, boundaries, None)
    }

    /// Restriction to the degrees `[d_lo, d_hi]`; the new lowest boundary is dropped.
    pub fn truncate(&self, d_lo: i64, d_hi: i64) -> Result<GradedF2Complex, ComplexError> {
        if d_hi < d_lo || d_lo < self.d_min || d_hi > self.d_max() {
            return Err(ComplexError::EmptyWindow { d_min: d_lo, d_max: d_hi });
        }
        let (lo, hi) = ((d_lo - self.d_min) as usize, (d_hi - self.d_min) as usize);
        let generators = self.generators[lo..=hi].to_vec();
        let mut boundaries = self.boundaries[lo..=hi].to_vec();
        boundaries[0] = F2Matrix::zeros(0, generators[0].len());
        let action = self.action.as_ref().map(|a| CyclicAction {
            order: a.order,
            permutations: a.permutations[lo..=hi].to_vec(),
        });
        GradedF2Complex::new(d_lo, generators, boundaries, action)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&ComplexRecord::from(self)).expect("complex serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ComplexJsonError> {
        let record: ComplexRecord = serde_json::from_str(text)?;
        Ok(record.try_into()?)
    }
}

#[derive(Debug, Error)]
pub enum ComplexJsonError {
    #[error("malformed complex JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Complex(#[from] ComplexError),
}

/// On-disk layout: `degrees` is `[d_min, d_max]`, `boundaries[i]` lists the rows of `∂_{d_min+i}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComplexRecord {
    pub degrees: [i64; 2],
    pub generators: Vec<Vec<String>>,
    pub boundaries: Vec<Vec<Vec<u8>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<CyclicAction>,
}

impl From<&GradedF2Complex> for ComplexRecord {
    fn from(c: &GradedF2Complex) -> Self {
        ComplexRecord {
            degrees: [c.d_min(), c.d_max()],
            generators: c.generators.clone(),
            boundaries: c.boundaries.iter().map(F2Matrix::to_rows).collect(),
            action: c.action.clone(),
        }
    }
}

impl TryFrom<ComplexRecord> for GradedF2Complex {
    type Error = ComplexError;

    fn try_from(r: ComplexRecord) -> Result<Self, ComplexError> {
        let [d_min, d_max] = r.degrees;
        if d_max < d_min {
            return Err(ComplexError::EmptyWindow { d_min, d_max });
        }
        let len = (d_max - d_min + 1) as usize;
        if r.generators.len() != len {
            return Err(ComplexError::Length { field: "generators", expected: len, found: r.generators.len() });
        }
        if r.boundaries.len() != len {
            return Err(ComplexError::Length { field: "boundaries", expected: len, found: r.boundaries.len() });
        }
        let boundaries = r
            .boundaries
            .iter()
            .enumerate()
            .map(|(i, rows)| F2Matrix::from_rows(rows, r.generators[i].len()))
            .collect::<Result<Vec<_>, _>>()?;
        GradedF2Complex::new(d_min, r.generators, boundaries, r.action)
    }
}

/// Homology dimensions by enumerating every chain in each degree.
///
/// Exponential in the number of generators per degree; a test oracle only.
pub fn brute_force_homology(c: &GradedF2Complex) -> Vec<(i64, usize)> {
    fn apply(m: &F2Matrix, mask: u32) -> u32 {
        let mut out = 0;
        for col in 0..m.cols() {
            if mask >> col & 1 == 1 {
                for row in 0..m.rows() {
                    if m.get(row, col) {
                        out ^= 1 << row;
                    }
                }
            }
        }
        out
    }
    c.degrees()
        .map(|d| {
            let size = c.rank_of(d);
            let cycles = (0u32..1 << size)
                .filter(|&v| apply(c.boundary(d).unwrap(), v) == 0)
                .count();
            let boundaries: std::collections::HashSet<u32> = match c.boundary(d + 1) {
                Some(b) => (0u32..1 << c.rank_of(d + 1)).map(|v| apply(b, v)).collect(),
                None => [0].into_iter().collect(),
            };
            let dim = (cycles / boundaries.len()).trailing_zeros() as usize;
            (d, dim)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn labels(prefix: &str, count: usize) -> Vec<String> {
        (0..count).map(|i| format!("{prefix}{i}")).collect()
    }

    /// Ladder alternating A (odd degrees) and the all-ones matrix (even degrees),
    /// with the cyclic shift action.
    fn ladder(m: usize, d_min: i64, d_max: i64) -> GradedF2Complex {
        let len = (d_max - d_min + 1) as usize;
        let generators: Vec<_> = (d_min..=d_max).map(|d| labels(&format!("d{d}:"), m)).collect();
        let boundaries = (d_min..=d_max)
            .map(|d| {
                if d == d_min {
                    F2Matrix::zeros(0, m)
                } else if d.rem_euclid(2) == 1 {
                    F2Matrix::cyclic_ladder(m)
                } else {
                    F2Matrix::all_ones(m, m)
                }
            })
            .collect();
        let shift: Vec<usize> = (0..m).map(|i| (i + 1) % m).collect();
        let action = CyclicAction { order: m, permutations: vec![shift; len] };
        GradedF2Complex::new(d_min, generators, boundaries, Some(action)).unwrap()
    }

    #[test]
    fn ladder_is_a_complex_for_every_m() {
        for m in 1..=8 {
            ladder(m, -3, 6).validate().unwrap();
        }
    }

    #[test]
    fn zero_boundaries_validate() {
        let c = GradedF2Complex::new(
            0,
            vec![labels("a", 1), labels("b", 1), labels("c", 1)],
            vec![F2Matrix::zeros(0, 1), F2Matrix::zeros(1, 1), F2Matrix::zeros(1, 1)],
            None,
        )
        .unwrap();
        c.validate().unwrap();
        let h = c.homology().unwrap();
        assert_eq!(h.entries.iter().map(|e| e.dim).collect::<Vec<_>>(), vec![1, 1, 1]);
        assert_eq!(h.interior().count(), 1);
    }

    #[test]
    fn identity_squared_is_rejected() {
        let c = GradedF2Complex::new(
            0,
            vec![labels("a", 1), labels("b", 1), labels("c", 1)],
            vec![F2Matrix::zeros(0, 1), F2Matrix::identity(1), F2Matrix::identity(1)],
            None,
        )
        .unwrap();
        assert_eq!(c.validate(), Err(ComplexError::BoundarySquare { degree: 2, row: 0, col: 0 }));
        assert!(c.homology().is_err());
    }

    #[test]
    fn alternating_complex_is_acyclic() {
        // Z2 -1-> Z2 -0-> Z2 -1-> Z2 ...
        let n = 8;
        let boundaries = (0..n)
            .map(|d| match d {
                0 => F2Matrix::zeros(0, 1),
                d if d % 2 == 1 => F2Matrix::identity(1),
                _ => F2Matrix::zeros(1, 1),
            })
            .collect();
        let c = GradedF2Complex::new(0, vec![labels("g", 1); n], boundaries, None).unwrap();
        assert!(c.homology().unwrap().interior().all(|e| e.dim == 0));
    }

    #[test]
    fn shape_errors() {
        let err = GradedF2Complex::new(
            0,
            vec![labels("a", 2), labels("b", 1)],
            vec![F2Matrix::zeros(0, 2), F2Matrix::zeros(1, 1)],
            None,
        )
        .unwrap_err();
        assert!(matches!(err, ComplexError::Shape { degree: 1, expected_rows: 2, .. }));
        assert!(GradedF2Complex::empty(3, 2).is_err());
    }

    #[test]
    fn empty_complex_has_zero_homology() {
        let h = GradedF2Complex::empty(-2, 2).unwrap().homology().unwrap();
        assert!(h.entries.iter().all(|e| e.dim == 0));
    }

    #[test]
    fn quotient_of_even_ladder_has_zero_boundaries() {
        let q = ladder(2, 0, 7).quotient_by_action().unwrap();
        assert!(q.degrees().all(|d| q.rank_of(d) == 1));
        assert!(q.degrees().all(|d| q.boundary(d).unwrap().is_zero()));
        assert!(q.homology().unwrap().interior().all(|e| e.dim == 1));
    }

    #[test]
    fn quotient_of_odd_ladder_alternates() {
        let q = ladder(3, 0, 7).quotient_by_action().unwrap();
        for d in 1..=7 {
            let b = q.boundary(d).unwrap();
            // A descends to 1+1 = 0, the all-ones matrix to 3 = 1
            assert_eq!(b.get(0, 0), d % 2 == 0, "degree {d}");
        }
        assert!(q.homology().unwrap().interior().all(|e| e.dim == 0));
    }

    #[test]
    fn trivial_action_with_declared_order_is_not_free() {
        let mut c = ladder(3, 0, 3);
        c.action = Some(CyclicAction { order: 3, permutations: vec![vec![0, 1, 2]; 4] });
        assert!(matches!(c.quotient_by_action(), Err(ComplexError::NotFree { power: 1, .. })));
    }

    #[test]
    fn order_one_quotient_is_identity() {
        let c = ladder(1, 0, 5);
        let q = c.quotient_by_action().unwrap();
        assert_eq!(q.generators, c.generators);
        assert_eq!(q.boundaries, c.boundaries);
        assert!(q.action().is_none());
    }

    #[test]
    fn non_equivariant_action_is_rejected() {
        let mut c = ladder(3, 0, 3);
        // reflection does not commute with A
        c.action = Some(CyclicAction { order: 2, permutations: vec![vec![0, 2, 1]; 4] });
        assert!(c.quotient_by_action().is_err());
        let mut c = ladder(4, 0, 3);
        c.action = Some(CyclicAction { order: 4, permutations: vec![vec![3, 2, 1, 0]; 4] });
        assert!(matches!(c.validate(), Err(ComplexError::ActionOrder { .. }) | Err(ComplexError::NotFree { .. })));
        let mut c = ladder(4, 0, 3);
        c.action = Some(CyclicAction { order: 2, permutations: vec![vec![2, 3, 0, 1]; 4] });
        c.validate().unwrap();
        let mut c = ladder(4, 0, 3);
        c.action = Some(CyclicAction { order: 2, permutations: vec![vec![1, 0, 3, 2]; 4] });
        assert!(matches!(c.validate(), Err(ComplexError::NotEquivariant { degree: 1 })));
        assert_eq!(ladder(2, 0, 1).truncate(0, 0).unwrap().quotient_by_action().unwrap().rank_of(0), 1);
        let plain = GradedF2Complex::empty(0, 1).unwrap();
        assert_eq!(plain.quotient_by_action(), Err(ComplexError::MissingAction));
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let c = ladder(3, -2, 2);
        let text = c.to_json();
        let back = GradedF2Complex::from_json(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_json(), text);
        assert!(text.starts_with(r#"{"degrees":[-2,2],"generators":[["d-2:0""#));
    }

    #[test]
    fn malformed_json_is_rejected() {
        let bad = r#"{"degrees":[0,1],"generators":[["a"],["b"]],"boundaries":[[],[[2]]]}"#;
        assert!(matches!(
            GradedF2Complex::from_json(bad),
            Err(ComplexJsonError::Complex(ComplexError::F2(F2Error::InvalidEntry { .. })))
        ));
        let bad = r#"{"degrees":[0,1],"generators":[["a"]],"boundaries":[[]]}"#;
        assert!(GradedF2Complex::from_json(bad).is_err());
    }

    /// Random complex: each column of ∂_d is drawn from ker ∂_{d-1}, enumerated by brute force.
    fn random_complex(sizes: Vec<usize>, seeds: Vec<u64>) -> GradedF2Complex {
        let mut boundaries: Vec<F2Matrix> = vec![F2Matrix::zeros(0, sizes[0])];
        for i in 1..sizes.len() {
            let lower = &boundaries[i - 1];
            let kernel: Vec<u32> = (0u32..1 << sizes[i - 1])
                .filter(|&v| {
                    let bits: Vec<bool> = (0..sizes[i - 1]).map(|b| v >> b & 1 == 1).collect();
                    lower.mul_vec(&bits).unwrap().iter().all(|&x| !x)
                })
                .collect();
            let mut m = F2Matrix::zeros(sizes[i - 1], sizes[i]);
            let mut state = seeds[i];
            for col in 0..sizes[i] {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let v = kernel[(state >> 33) as usize % kernel.len()];
                for row in 0..sizes[i - 1] {
                    m.set(row, col, v >> row & 1 == 1);
                }
            }
            boundaries.push(m);
        }
        let generators = sizes.iter().enumerate().map(|(d, &s)| labels(&format!("{d}:"), s)).collect();
        GradedF2Complex::new(0, generators, boundaries, None).unwrap()
    }

    proptest! {
        #[test]
        fn homology_matches_enumeration(
            sizes in proptest::collection::vec(0usize..=4, 5),
            seeds in proptest::collection::vec(any::<u64>(), 5),
        ) {
            let c = random_complex(sizes, seeds);
            let h = c.homology().unwrap();
            let oracle = brute_force_homology(&c);
            for (entry, (d, dim)) in h.entries.iter().zip(oracle) {
                prop_assert_eq!(entry.degree, d);
                prop_assert_eq!(entry.dim, dim);
            }
        }

        #[test]
        fn truncation_keeps_interior_homology(
            sizes in proptest::collection::vec(0usize..=4, 7),
            seeds in proptest::collection::vec(any::<u64>(), 7),
        ) {
            let c = random_complex(sizes, seeds);
            let inner = c.truncate(1, 5).unwrap().homology().unwrap();
            let outer = c.homology().unwrap();
            for e in inner.interior() {
                prop_assert_eq!(Some(e.dim), outer.dim(e.degree));
            }
        }

        #[test]
        fn euler_characteristic_multiplies_under_free_quotient(m in 1usize..8, lo in -4i64..4, len in 1i64..6) {
            let c = ladder(m, lo, lo + len);
            let q = c.quotient_by_action().unwrap();
            prop_assert_eq!(q.euler_characteristic() * m as i64, c.euler_characteristic());
        }
    }
}
