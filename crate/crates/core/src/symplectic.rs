//! Geometry of `(C^n, λ)` with `λ = i/4 Σ (z̄ dz - z dz̄) = ½ Σ (y dx - x dy)`.
//!
//! A star-shaped hypersurface is described as the unit level set of a
//! 2-homogeneous function `K(z) = |z|² / ρ(z/|z|)²`. Euler's identity gives
//! `λ(-i∇K) = K`, and `-i∇K` is symplectically dual to `dK`, so on `Σ = {K = 1}`
//! the Reeb field of `λ|_Σ` is `R = -i∇K`. For the round sphere this is `R(z) = -2iz`.
//!
//! Points are stored as complex vectors; the real layout used for Jacobians is
//! `[x_1, y_1, x_2, y_2, ...]`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ode::{self, OdeError, Tolerances};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("point is off the hypersurface: |K - 1| = {deviation:e} > {tol:e}")]
    OffHypersurface { deviation: f64, tol: f64 },
    #[error("the origin has no Liouville normalization")]
    ZeroPoint,
    #[error("rotation modulus must be positive")]
    ZeroModulus,
    #[error("exponent k_{index} = {k} is not coprime to m = {m}")]
    NonCoprime { index: usize, k: i64, m: u32 },
    #[error("a twist needs at least one exponent")]
    EmptyTwist,
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("invalid weight profile: {0}")]
    InvalidWeight(String),
    #[error("profile is not invariant under the rotation: max |ρ(φx) - ρ(x)| = {deviation:e}")]
    NotInvariant { deviation: f64 },
    #[error("energy drift {drift:e} exceeds {tol:e}")]
    EnergyDrift { drift: f64, tol: f64 },
    #[error("integration failed: {0}")]
    Integration(#[from] OdeError),
}

/// A point of `C^n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<f64>", try_from = "Vec<f64>")]
pub struct PhasePoint(pub Vec<Complex64>);

impl PhasePoint {
    pub fn new(coords: Vec<Complex64>) -> Self {
        PhasePoint(coords)
    }

    /// Unit vector along the `j`-th complex axis.
    pub fn axis(n: usize, j: usize) -> Self {
        let mut z = vec![Complex64::new(0.0, 0.0); n];
        z[j] = Complex64::new(1.0, 0.0);
        PhasePoint(z)
    }

    /// From `[x_1, y_1, ..., x_n, y_n]`.
    pub fn from_real(v: &[f64]) -> Result<Self, GeometryError> {
        if v.len() % 2 != 0 || v.is_empty() {
            return Err(GeometryError::DimensionMismatch { expected: 2 * (v.len() / 2).max(1), found: v.len() });
        }
        Ok(PhasePoint(v.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect()))
    }

    pub fn to_real(&self) -> Vec<f64> {
        self.0.iter().flat_map(|c| [c.re, c.im]).collect()
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn distance(&self, other: &PhasePoint) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn scale(&self, s: f64) -> PhasePoint {
        PhasePoint(self.0.iter().map(|c| c * s).collect())
    }

    pub fn mul_scalar(&self, c: Complex64) -> PhasePoint {
        PhasePoint(self.0.iter().map(|z| z * c).collect())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Real inner product `Re Σ conj(a_j) b_j`.
    pub fn real_dot(&self, other: &PhasePoint) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a.conj() * b).re).sum()
    }
}

impl From<PhasePoint> for Vec<f64> {
    fn from(p: PhasePoint) -> Vec<f64> {
        p.to_real()
    }
}

impl TryFrom<Vec<f64>> for PhasePoint {
    type Error = GeometryError;

    fn try_from(v: Vec<f64>) -> Result<Self, GeometryError> {
        PhasePoint::from_real(&v)
    }
}

fn check_dim(expected: usize, found: usize) -> Result<(), GeometryError> {
    if expected == found {
        Ok(())
    } else {
        Err(GeometryError::DimensionMismatch { expected, found })
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// The rotation `φ(z)^j = e^{2πi k_j/m} z^j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawTwist")]
pub struct RotationTwist {
    m: u32,
    k: Vec<i64>,
}

#[derive(Deserialize)]
struct RawTwist {
    m: u32,
    k: Vec<i64>,
}

impl TryFrom<RawTwist> for RotationTwist {
    type Error = GeometryError;

    fn try_from(r: RawTwist) -> Result<Self, GeometryError> {
        RotationTwist::new(r.m, r.k)
    }
}

impl RotationTwist {
    pub fn new(m: u32, k: Vec<i64>) -> Result<Self, GeometryError> {
        if m == 0 {
            return Err(GeometryError::ZeroModulus);
        }
        if k.is_empty() {
            return Err(GeometryError::EmptyTwist);
        }
        if let Some((index, &kj)) = k.iter().enumerate().find(|(_, &kj)| gcd(kj, m as i64) != 1) {
            return Err(GeometryError::NonCoprime { index, k: kj, m });
        }
        Ok(RotationTwist { m, k })
    }

    /// `φ(z) = e^{2πi/m} z` on `C^n`.
    pub fn uniform(m: u32, n: usize) -> Self {
        RotationTwist::new(m, vec![1; n]).expect("1 is coprime to every modulus")
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn exponents(&self) -> &[i64] {
        &self.k
    }

    pub fn n(&self) -> usize {
        self.k.len()
    }

    /// Exponent `k_j` reduced into `1..=m`.
    pub fn reduced(&self, j: usize) -> i64 {
        let m = self.m as i64;
        let r = self.k[j].rem_euclid(m);
        if r == 0 {
            m
        } else {
            r
        }
    }

    /// The common reduced exponent when all `k_j` agree mod `m`.
    pub fn common_exponent(&self) -> Option<i64> {
        let first = self.reduced(0);
        (0..self.n()).all(|j| self.reduced(j) == first).then_some(first)
    }

    /// `e^{2πi p k_j / m}`: the phase by which `φ^p` multiplies coordinate `j`.
    pub fn phase(&self, j: usize, power: i64) -> Complex64 {
        let m = self.m as i64;
        let e = (self.k[j] * power).rem_euclid(m);
        Complex64::from_polar(1.0, 2.0 * PI * e as f64 / m as f64)
    }

    pub fn apply_power(&self, z: &PhasePoint, power: i64) -> PhasePoint {
        debug_assert_eq!(z.dim(), self.n());
        PhasePoint(z.0.iter().enumerate().map(|(j, c)| c * self.phase(j, power)).collect())
    }

    pub fn apply(&self, z: &PhasePoint) -> PhasePoint {
        self.apply_power(z, 1)
    }

    /// Real `2n x 2n` matrix of `Dφ^p`.
    pub fn differential(&self, power: i64) -> DMatrix<f64> {
        let n = self.n();
        let mut d = DMatrix::zeros(2 * n, 2 * n);
        for j in 0..n {
            write_complex_block(&mut d, j, j, self.phase(j, power));
        }
        d
    }
}

/// Writes the real 2x2 block of multiplication by `c` at complex position `(r, col)`.
pub(crate) fn write_complex_block(d: &mut DMatrix<f64>, r: usize, col: usize, c: Complex64) {
    d[(2 * r, 2 * col)] = c.re;
    d[(2 * r, 2 * col + 1)] = -c.im;
    d[(2 * r + 1, 2 * col)] = c.im;
    d[(2 * r + 1, 2 * col + 1)] = c.re;
}

/// Real matrix of multiplication by `c` on `C^n`.
pub fn complex_scalar_matrix(n: usize, c: Complex64) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(2 * n, 2 * n);
    for j in 0..n {
        write_complex_block(&mut d, j, j, c);
    }
    d
}

/// Radius function on the unit sphere, written in terms of the squared moduli
/// `s_j = |u_j|²` of the unit vector. Such profiles are invariant under every
/// diagonal rotation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum RadialProfile {
    /// `ρ ≡ radius`.
    Constant { radius: f64 },
    /// `Σ |z_j|² / a_j² = 1`.
    Ellipsoid { axes: Vec<f64> },
    /// `ρ(u) = base + Σ c_j s_j²`.
    Quartic { base: f64, coeffs: Vec<f64> },
}

impl RadialProfile {
    fn validate(&self, n: usize) -> Result<(), GeometryError> {
        match self {
            RadialProfile::Constant { radius } if !(radius.is_finite() && *radius > 0.0) => {
                Err(GeometryError::InvalidProfile(format!("radius {radius} must be positive")))
            }
            RadialProfile::Ellipsoid { axes } => {
                check_dim(n, axes.len())?;
                if axes.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
                    return Err(GeometryError::InvalidProfile("ellipsoid axes must be positive".into()));
                }
                Ok(())
            }
            RadialProfile::Quartic { base, coeffs } => {
                check_dim(n, coeffs.len())?;
                let worst: f64 = coeffs.iter().map(|c| c.min(0.0)).sum();
                if !(base + worst > 0.0) || coeffs.iter().any(|c| !c.is_finite()) {
                    return Err(GeometryError::InvalidProfile(format!(
                        "quartic profile is not bounded away from zero (min {})",
                        base + worst
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// `ρ` and `∂ρ/∂s_j` at the squared moduli `s`.
    fn eval(&self, s: &[f64]) -> (f64, Vec<f64>) {
        match self {
            RadialProfile::Constant { radius } => (*radius, vec![0.0; s.len()]),
            RadialProfile::Ellipsoid { axes } => {
                let q: f64 = s.iter().zip(axes).map(|(s, a)| s / (a * a)).sum();
                let rho = q.powf(-0.5);
                let d = axes.iter().map(|a| -0.5 * rho.powi(3) / (a * a)).collect();
                (rho, d)
            }
            RadialProfile::Quartic { base, coeffs } => {
                let rho = base + s.iter().zip(coeffs).map(|(s, c)| c * s * s).sum::<f64>();
                let d = s.iter().zip(coeffs).map(|(s, c)| 2.0 * c * s).collect();
                (rho, d)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StarShapedModel {
    RoundSphere { n: usize },
    RadialProfile { n: usize, profile: RadialProfile },
}

impl StarShapedModel {
    pub fn round_sphere(n: usize) -> Self {
        StarShapedModel::RoundSphere { n }
    }

    pub fn radial(n: usize, profile: RadialProfile) -> Result<Self, GeometryError> {
        profile.validate(n)?;
        Ok(StarShapedModel::RadialProfile { n, profile })
    }

    pub fn n(&self) -> usize {
        match self {
            StarShapedModel::RoundSphere { n } | StarShapedModel::RadialProfile { n, .. } => *n,
        }
    }

    pub fn is_round_sphere(&self) -> bool {
        matches!(self, StarShapedModel::RoundSphere { .. })
    }

    fn squared_moduli(z: &PhasePoint) -> (f64, Vec<f64>) {
        let r2 = z.norm_sqr();
        (r2, z.0.iter().map(|c| c.norm_sqr() / r2).collect())
    }

    /// Radius of `Σ` in the direction of `u` (not necessarily unit).
    pub fn radius(&self, u: &PhasePoint) -> f64 {
        match self {
            StarShapedModel::RoundSphere { .. } => 1.0,
            StarShapedModel::RadialProfile { profile, .. } => profile.eval(&Self::squared_moduli(u).1).0,
        }
    }

    /// `K(z) = |z|² / ρ(z/|z|)²`; `Σ = K⁻¹(1)`.
    pub fn level(&self, z: &PhasePoint) -> f64 {
        match self {
            StarShapedModel::RoundSphere { .. } => z.norm_sqr(),
            StarShapedModel::RadialProfile { profile, .. } => {
                let (r2, s) = Self::squared_moduli(z);
                if r2 == 0.0 {
                    return 0.0;
                }
                let rho = profile.eval(&s).0;
                r2 / (rho * rho)
            }
        }
    }

    /// Real gradient of `K`, packed as `∂K/∂x_j + i ∂K/∂y_j`.
    pub fn level_gradient(&self, z: &PhasePoint) -> PhasePoint {
        match self {
            StarShapedModel::RoundSphere { .. } => z.scale(2.0),
            StarShapedModel::RadialProfile { profile, .. } => {
                let (r2, s) = Self::squared_moduli(z);
                if r2 == 0.0 {
                    return z.clone();
                }
                let (rho, d) = profile.eval(&s);
                let weighted: f64 = d.iter().zip(&s).map(|(d, s)| d * s).sum();
                // ∇s_j = (2/r²)(z_j e_j - s_j z), so
                // ∇K = 2z/ρ² - (4/ρ³) Σ_j ∂ρ/∂s_j (z_j e_j - s_j z).
                PhasePoint(
                    z.0.iter()
                        .zip(&d)
                        .map(|(c, dj)| c * (2.0 / (rho * rho) - 4.0 / rho.powi(3) * (dj - weighted)))
                        .collect(),
                )
            }
        }
    }

    /// The 2-homogeneous extension `-i∇K` of the Reeb field to `C^n \ {0}`.
    pub fn reeb_extension(&self, z: &PhasePoint) -> PhasePoint {
        self.level_gradient(z).mul_scalar(Complex64::new(0.0, -1.0))
    }

    /// Real `2n x 2n` Jacobian of [`StarShapedModel::reeb_extension`].
    pub fn reeb_jacobian(&self, z: &PhasePoint) -> DMatrix<f64> {
        let n = self.n();
        match self {
            StarShapedModel::RoundSphere { .. } => complex_scalar_matrix(n, Complex64::new(0.0, -2.0)),
            StarShapedModel::RadialProfile { .. } => {
                // central differences of the analytic field
                let h = 1e-6 * z.norm().max(1.0);
                let base = z.to_real();
                let mut jac = DMatrix::zeros(2 * n, 2 * n);
                let mut probe = base.clone();
                for c in 0..2 * n {
                    probe[c] = base[c] + h;
                    let plus = self.reeb_extension(&PhasePoint::from_real(&probe).unwrap()).to_real();
                    probe[c] = base[c] - h;
                    let minus = self.reeb_extension(&PhasePoint::from_real(&probe).unwrap()).to_real();
                    probe[c] = base[c];
                    for r in 0..2 * n {
                        jac[(r, c)] = (plus[r] - minus[r]) / (2.0 * h);
                    }
                }
                jac
            }
        }
    }

    /// Radial projection onto `Σ`.
    pub fn project(&self, z: &PhasePoint) -> Result<PhasePoint, GeometryError> {
        let k = self.level(z);
        if !(k > 0.0) || !z.is_finite() {
            return Err(GeometryError::ZeroPoint);
        }
        Ok(z.scale(k.sqrt().recip()))
    }

    pub fn surface_deviation(&self, z: &PhasePoint) -> f64 {
        (self.level(z) - 1.0).abs()
    }

    pub fn check_on_surface(&self, z: &PhasePoint, tol: f64) -> Result<(), GeometryError> {
        check_dim(self.n(), z.dim())?;
        let deviation = self.surface_deviation(z);
        if deviation <= tol {
            Ok(())
        } else {
            Err(GeometryError::OffHypersurface { deviation, tol })
        }
    }

    /// Largest `|ρ(φx) - ρ(x)|` over a deterministic set of sample directions.
    pub fn invariance_defect(&self, twist: &RotationTwist, samples: usize) -> f64 {
        sample_directions(self.n(), samples)
            .iter()
            .map(|u| (self.radius(&twist.apply(u)) - self.radius(u)).abs())
            .fold(0.0, f64::max)
    }
}

/// Quasi-random unit vectors (golden-ratio sequence), for deterministic sampling.
pub fn sample_directions(n: usize, count: usize) -> Vec<PhasePoint> {
    let g = 0.618_033_988_749_894_9_f64;
    (0..count)
        .map(|i| {
            let z: Vec<Complex64> = (0..n)
                .map(|j| {
                    let a = ((i * (2 * n) + 2 * j) as f64 * g + 0.1).fract() * 2.0 - 1.0;
                    let b = ((i * (2 * n) + 2 * j + 1) as f64 * g + 0.3).fract() * 2.0 - 1.0;
                    Complex64::new(a, b)
                })
                .collect();
            let p = PhasePoint(z);
            let norm = p.norm();
            p.scale(1.0 / norm)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowOptions {
    pub ode: Tolerances,
    /// `|K(z) - 1|` accepted as "on the hypersurface".
    pub surface_tol: f64,
    /// Allowed drift of `K` along a numerically integrated orbit.
    pub energy_tol: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions { ode: Tolerances::default(), surface_tol: 1e-9, energy_tol: 1e-8 }
    }
}

/// `λ_z(v) = ½ Σ (y_j dx_j(v) - x_j dy_j(v)) = -½ Σ Im(z̄_j v_j)`.
pub fn liouville_form(z: &PhasePoint, v: &PhasePoint) -> Result<f64, GeometryError> {
    check_dim(z.dim(), v.dim())?;
    Ok(-0.5 * z.0.iter().zip(&v.0).map(|(a, b)| (a.conj() * b).im).sum::<f64>())
}

/// The Liouville vector field `X = ½ Σ (x ∂_x + y ∂_y)` flows by `x ↦ e^{t/2} x`.
pub fn liouville_flow(x: &PhasePoint, t: f64) -> PhasePoint {
    x.scale((0.5 * t).exp())
}

/// Reeb vector field at a point of `Σ`.
pub fn reeb_field(z: &PhasePoint, model: &StarShapedModel, surface_tol: f64) -> Result<PhasePoint, GeometryError> {
    model.check_on_surface(z, surface_tol)?;
    Ok(model.reeb_extension(z))
}

/// Flow of the homogeneous Reeb extension for time `t`, without the on-surface precondition.
///
/// Exact `e^{-2it} z` on the round sphere; adaptive Runge–Kutta otherwise.
pub fn reeb_extension_flow(
    z: &PhasePoint,
    t: f64,
    model: &StarShapedModel,
    tol: Tolerances,
) -> Result<PhasePoint, GeometryError> {
    check_dim(model.n(), z.dim())?;
    match model {
        StarShapedModel::RoundSphere { .. } => Ok(z.mul_scalar(Complex64::from_polar(1.0, -2.0 * t))),
        StarShapedModel::RadialProfile { .. } => {
            let mut y = z.to_real();
            ode::integrate(
                |_, y, dy| {
                    let v = model.reeb_extension(&PhasePoint::from_real(y).unwrap()).to_real();
                    dy.copy_from_slice(&v);
                },
                0.0,
                t,
                &mut y,
                tol,
            )?;
            PhasePoint::from_real(&y)
        }
    }
}

/// Reeb flow on `Σ` with the level drift checked against `opts.energy_tol`.
pub fn reeb_flow(
    z: &PhasePoint,
    t: f64,
    model: &StarShapedModel,
    opts: &FlowOptions,
) -> Result<PhasePoint, GeometryError> {
    model.check_on_surface(z, opts.surface_tol)?;
    let out = reeb_extension_flow(z, t, model, opts.ode)?;
    let drift = (model.level(&out) - model.level(z)).abs();
    if drift > opts.energy_tol {
        return Err(GeometryError::EnergyDrift { drift, tol: opts.energy_tol });
    }
    Ok(out)
}

/// Reeb extension flow together with its real `2n x 2n` differential at `z`.
pub fn reeb_flow_with_differential(
    z: &PhasePoint,
    t: f64,
    model: &StarShapedModel,
    tol: Tolerances,
) -> Result<(PhasePoint, DMatrix<f64>), GeometryError> {
    check_dim(model.n(), z.dim())?;
    let dim = 2 * model.n();
    match model {
        StarShapedModel::RoundSphere { n } => {
            let c = Complex64::from_polar(1.0, -2.0 * t);
            Ok((z.mul_scalar(c), complex_scalar_matrix(*n, c)))
        }
        StarShapedModel::RadialProfile { .. } => {
            // state = [point; column-major variation matrix]
            let mut y = z.to_real();
            y.extend(DMatrix::<f64>::identity(dim, dim).iter());
            ode::integrate(
                |_, y, dy| {
                    let p = PhasePoint::from_real(&y[..dim]).unwrap();
                    dy[..dim].copy_from_slice(&model.reeb_extension(&p).to_real());
                    let jac = model.reeb_jacobian(&p);
                    let var = DMatrix::from_column_slice(dim, dim, &y[dim..]);
                    dy[dim..].copy_from_slice((jac * var).as_slice());
                },
                0.0,
                t,
                &mut y,
                tol,
            )?;
            let p = PhasePoint::from_real(&y[..dim])?;
            Ok((p, DMatrix::from_column_slice(dim, dim, &y[dim..])))
        }
    }
}

/// Moves `x` along the Liouville flow onto `Σ`; returns the image and the flow time `δ`
/// with `φ^X_δ(x) ∈ Σ`. On the round sphere `δ = -2 log|x|`.
pub fn normalize_to_hypersurface(x: &PhasePoint, model: &StarShapedModel) -> Result<(PhasePoint, f64), GeometryError> {
    check_dim(model.n(), x.dim())?;
    let r = x.norm();
    if r == 0.0 || !r.is_finite() {
        return Err(GeometryError::ZeroPoint);
    }
    let delta = 2.0 * (model.radius(x) / r).ln();
    Ok((liouville_flow(x, delta), delta))
}

pub fn normalize_to_sphere(x: &PhasePoint) -> Result<(PhasePoint, f64), GeometryError> {
    normalize_to_hypersurface(x, &StarShapedModel::round_sphere(x.dim()))
}

/// Quintic smoothstep `6x⁵ - 15x⁴ + 10x³` clamped to `[0, 1]`.
fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * x * (x * (6.0 * x - 15.0) + 10.0)
}

fn smoothstep_derivative(x: f64) -> f64 {
    if !(0.0..=1.0).contains(&x) {
        return 0.0;
    }
    30.0 * x * x * (1.0 - x) * (1.0 - x)
}

/// Antiderivative of the smoothstep with value 0 at 0; equals `x - 1/2` for `x ≥ 1`.
fn smoothstep_integral(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        x - 0.5
    } else {
        x.powi(4) * (x * (x - 3.0) + 2.5)
    }
}

/// `H(z) = ½(β(K(z)) - 1)` where `β` is `1/2` below `1/2 - ε`, the identity on
/// `[1/2 + ε, 3/2 - ε]`, `3/2` above `3/2 + ε`, with smoothstep collars in between.
#[derive(Debug, Clone, PartialEq)]
pub struct DefiningHamiltonian {
    model: StarShapedModel,
    eps: f64,
}

pub const DEFAULT_MOLLIFIER_WIDTH: f64 = 0.05;

impl DefiningHamiltonian {
    pub fn new(model: StarShapedModel, eps: f64) -> Result<Self, GeometryError> {
        if !(eps > 0.0 && eps < 0.5) {
            return Err(GeometryError::InvalidProfile(format!("mollifier width {eps} outside (0, 1/2)")));
        }
        Ok(DefiningHamiltonian { model, eps })
    }

    pub fn model(&self) -> &StarShapedModel {
        &self.model
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn beta(&self, r: f64) -> f64 {
        let e = self.eps;
        let w = 2.0 * e;
        // β' is the lower collar ramp minus the upper one; integrate both.
        0.5 + w * smoothstep_integral((r - (0.5 - e)) / w) - w * smoothstep_integral((r - (1.5 - e)) / w)
    }

    pub fn beta_prime(&self, r: f64) -> f64 {
        let e = self.eps;
        let w = 2.0 * e;
        smoothstep((r - (0.5 - e)) / w) - smoothstep((r - (1.5 - e)) / w)
    }

    pub fn beta_second(&self, r: f64) -> f64 {
        let e = self.eps;
        let w = 2.0 * e;
        (smoothstep_derivative((r - (0.5 - e)) / w) - smoothstep_derivative((r - (1.5 - e)) / w)) / w
    }

    pub fn value(&self, z: &PhasePoint) -> f64 {
        0.5 * (self.beta(self.model.level(z)) - 1.0)
    }

    /// `X_H = β'(K) (-i∇K)`, normalized so that `X_H = R` on `Σ`.
    pub fn vector_field(&self, z: &PhasePoint) -> PhasePoint {
        self.model.reeb_extension(z).scale(self.beta_prime(self.model.level(z)))
    }

    /// Autonomous flow of `X_H`. `K` is conserved, so on the round sphere this is
    /// `e^{-2iβ'(|z|²)t} z`.
    pub fn flow(&self, z: &PhasePoint, t: f64, tol: Tolerances) -> Result<PhasePoint, GeometryError> {
        check_dim(self.model.n(), z.dim())?;
        match &self.model {
            StarShapedModel::RoundSphere { .. } => {
                let speed = self.beta_prime(z.norm_sqr());
                Ok(z.mul_scalar(Complex64::from_polar(1.0, -2.0 * speed * t)))
            }
            StarShapedModel::RadialProfile { .. } => self.flow_weighted(z, t, &WeightProfile::Constant, tol),
        }
    }

    /// Flow of the time-dependent field `χ(t) X_H` from time 0 to `t`.
    pub fn flow_weighted(
        &self,
        z: &PhasePoint,
        t: f64,
        chi: &WeightProfile,
        tol: Tolerances,
    ) -> Result<PhasePoint, GeometryError> {
        check_dim(self.model.n(), z.dim())?;
        let mut y = z.to_real();
        ode::integrate(
            |s, y, dy| {
                let v = self.vector_field(&PhasePoint::from_real(y).unwrap()).to_real();
                let w = chi.value(s);
                for (d, v) in dy.iter_mut().zip(v) {
                    *d = w * v;
                }
            },
            0.0,
            t,
            &mut y,
            tol,
        )?;
        PhasePoint::from_real(&y)
    }
}

/// Time reparametrization weight `χ` on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum WeightProfile {
    /// `χ ≡ 1`.
    Constant,
    /// Smoothstep-derivative bump supported in `[start, end] ⊂ (0, 1/2)`, total mass 1.
    Bump { start: f64, end: f64 },
}

impl WeightProfile {
    pub fn bump(start: f64, end: f64) -> Result<Self, GeometryError> {
        if !(0.0 < start && start < end && end < 0.5) {
            return Err(GeometryError::InvalidWeight(format!("support [{start}, {end}] must lie in (0, 1/2)")));
        }
        Ok(WeightProfile::Bump { start, end })
    }

    pub fn value(&self, t: f64) -> f64 {
        match *self {
            WeightProfile::Constant => 1.0,
            WeightProfile::Bump { start, end } => smoothstep_derivative((t - start) / (end - start)) / (end - start),
        }
    }

    /// `τ(t) = ∫_0^t χ`.
    pub fn integral(&self, t: f64) -> f64 {
        match *self {
            WeightProfile::Constant => t,
            WeightProfile::Bump { start, end } => smoothstep((t - start) / (end - start)),
        }
    }
}

/// Sup-norm deviation between the flow of `χ X_H` and the autonomous flow of `X_H`
/// at the reparametrized time `τ(s) = ∫_0^s χ`, over `checkpoints` equally spaced
/// times in `(0, t]`.
pub fn reparametrized_flow_check(
    chi: &WeightProfile,
    hamiltonian: &DefiningHamiltonian,
    z: &PhasePoint,
    t: f64,
    checkpoints: usize,
    tol: Tolerances,
) -> Result<f64, GeometryError> {
    if let WeightProfile::Bump { start, end } = *chi {
        WeightProfile::bump(start, end)?;
    }
    let checkpoints = checkpoints.max(1);
    let mut current = z.clone();
    let mut s_prev = 0.0;
    let mut worst = 0.0f64;
    for i in 1..=checkpoints {
        let s = t * i as f64 / checkpoints as f64;
        // integrate χ X_H on [s_prev, s] by shifting the weight
        let mut y = current.to_real();
        ode::integrate(
            |u, y, dy| {
                let v = hamiltonian.vector_field(&PhasePoint::from_real(y).unwrap()).to_real();
                let w = chi.value(u);
                for (d, v) in dy.iter_mut().zip(v) {
                    *d = w * v;
                }
            },
            s_prev,
            s,
            &mut y,
            tol,
        )?;
        current = PhasePoint::from_real(&y)?;
        let reference = hamiltonian.flow(z, chi.integral(s), tol)?;
        worst = worst.max(current.distance(&reference));
        s_prev = s;
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    RoundSphere,
    RadialProfile,
}

/// JSON model description: `{"kind", "n", "twist": {"m", "k"}, "profile"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub kind: ModelKind,
    pub n: usize,
    pub twist: RotationTwist,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<RadialProfile>,
    /// Verify `ρ∘φ = ρ` by sampling when set.
    #[serde(default)]
    pub phi_invariant: bool,
}

impl ModelFile {
    pub fn from_json(text: &str) -> Result<Self, String> {
        serde_json::from_str(text).map_err(|e| e.to_string())
    }

    pub fn into_parts(self) -> Result<(StarShapedModel, RotationTwist), GeometryError> {
        check_dim(self.n, self.twist.n())?;
        let model = match (self.kind, self.profile) {
            (ModelKind::RoundSphere, _) => StarShapedModel::round_sphere(self.n),
            (ModelKind::RadialProfile, Some(p)) => StarShapedModel::radial(self.n, p)?,
            (ModelKind::RadialProfile, None) => {
                return Err(GeometryError::InvalidProfile("radial_profile model without `profile`".into()))
            }
        };
        if self.phi_invariant {
            let deviation = model.invariance_defect(&self.twist, 64);
            if deviation > 1e-12 {
                return Err(GeometryError::NotInvariant { deviation });
            }
        }
        Ok((model, self.twist))
    }
}
