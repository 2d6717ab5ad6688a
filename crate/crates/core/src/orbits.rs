//! Twisted periodic Reeb orbits: `γ(t) = φ^R_{τt}(z)` with `γ(1) = φ(γ(0))`.
//!
//! On the round sphere `φ^R_t(z) = e^{-2it} z`, so the twist condition on coordinate
//! `j` reads `e^{-2iτ} = e^{2πi k_j/m}` wherever `z_j ≠ 0`. Coordinates whose exponents
//! agree mod `m` form one critical component (a sphere in their coordinate subspace)
//! with periods `τ = π(m l - k)/m`, `l ∈ Z`.
//!
//! Numerical orbits are found by Gauss–Newton on
//! `(z, τ) ↦ (φ^R_τ(z) - φ(z), K(z) - 1, ⟨z - z_seed, R(z_seed)⟩)`. The last row is a
//! Poincaré section removing the shift along the orbit; the remaining degeneracy of a
//! Morse–Bott component is handled by taking minimum-norm steps.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cz::{cz_index_unitary, CzError, CzIndex, UnitaryPath};
use crate::par;
use crate::symplectic::{
    liouville_form, reeb_extension_flow, reeb_flow, reeb_flow_with_differential, DefiningHamiltonian, FlowOptions,
    GeometryError, PhasePoint, RotationTwist, StarShapedModel,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OrbitError {
    #[error("empty window [{lo}, {hi}]")]
    EmptyWindow { lo: i64, hi: i64 },
    #[error("dimension mismatch: model has n = {model}, twist has n = {twist}")]
    DimensionMismatch { model: usize, twist: usize },
    #[error("shooting did not converge: {0}")]
    NonConvergence(ShootDiagnostic),
    #[error("singular Jacobian at iteration {iteration}")]
    SingularJacobian { iteration: usize },
    #[error("loop violates the twisted boundary condition: |γ_N - φ(γ_0)| = {gap:e}")]
    TwistBoundary { gap: f64 },
    #[error("loop needs at least two samples")]
    TooFewSamples,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Index(#[from] CzError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    MaxIterations,
    /// `τ` left the allowed neighbourhood of the seed.
    Drift,
    /// No damped step reduced the residual.
    LineSearch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShootDiagnostic {
    pub reason: FailureReason,
    pub iterations: usize,
    pub residual: f64,
    pub tau: f64,
    pub seed_tau: f64,
}

impl std::fmt::Display for ShootDiagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{:?} after {} iterations (residual {:.3e}, tau {:.6} from seed {:.6})",
            self.reason, self.iterations, self.residual, self.tau, self.seed_tau
        )
    }
}

/// A certified twisted Reeb orbit. `support` lists the 1-based coordinates with `z_j ≠ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwistedOrbit {
    pub z0: PhasePoint,
    pub tau: f64,
    pub support: Vec<usize>,
    pub residual: f64,
    pub component_id: String,
    pub iterations: usize,
}

/// One row of the spectrum: a critical component at period `tau`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEntry {
    pub tau: f64,
    pub support: Vec<usize>,
    pub dim: usize,
    pub index: Option<CzIndex>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumTable {
    pub window: (i64, i64),
    pub entries: Vec<SpectrumEntry>,
}

impl SpectrumTable {
    pub fn taus(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.tau).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("tau,support,dim,index\n");
        for e in &self.entries {
            let support: Vec<String> = e.support.iter().map(ToString::to_string).collect();
            let index = e.index.map(|i| i.to_string()).unwrap_or_default();
            s.push_str(&format!("{},{},{},{}\n", fmt_sig(e.tau), support.join(" "), e.dim, index));
        }
        s
    }
}

/// Formats with 12 significant digits.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let v: f64 = format!("{x:.11e}").parse().expect("valid float");
    if (1e-5..1e16).contains(&v.abs()) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// Coordinate classes: 0-based coordinates grouped by exponent mod `m`, ordered by first member.
fn exponent_classes(twist: &RotationTwist) -> Vec<(i64, Vec<usize>)> {
    let mut classes: Vec<(i64, Vec<usize>)> = Vec::new();
    for j in 0..twist.n() {
        let r = twist.reduced(j);
        match classes.iter_mut().find(|(k, _)| *k == r) {
            Some((_, members)) => members.push(j),
            None => classes.push((r, vec![j])),
        }
    }
    classes
}

/// `τ = π(m l - k)/m`.
pub fn period(m: u32, k: i64, l: i64) -> f64 {
    PI * (m as i64 * l - k) as f64 / m as f64
}

/// Twisted spectrum of the round sphere over branches `l ∈ [window.0, window.1]`.
pub fn analytic_spectrum(twist: &RotationTwist, n: usize, window: (i64, i64)) -> Result<SpectrumTable, OrbitError> {
    if window.1 < window.0 {
        return Err(OrbitError::EmptyWindow { lo: window.0, hi: window.1 });
    }
    if twist.n() != n {
        return Err(OrbitError::DimensionMismatch { model: n, twist: twist.n() });
    }
    let m = twist.m();
    let mut entries = Vec::new();
    for (k, members) in exponent_classes(twist) {
        for l in window.0..=window.1 {
            let tau = period(m, k, l);
            let path = UnitaryPath::rotation(tau, n, 8);
            entries.push(SpectrumEntry {
                tau,
                support: members.iter().map(|j| j + 1).collect(),
                dim: 2 * members.len() - 1,
                index: Some(cz_index_unitary(&path)),
            });
        }
    }
    entries.sort_by(|a, b| a.tau.total_cmp(&b.tau));
    Ok(SpectrumTable { window, entries })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JacobianMode {
    FiniteDifference,
    Variational,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShootOptions {
    pub flow: FlowOptions,
    /// Converged when the full residual vector has norm below this.
    pub residual_tol: f64,
    pub max_iterations: usize,
    pub fd_step: f64,
    pub jacobian: JacobianMode,
    pub max_halvings: usize,
    /// Largest allowed `|τ - τ_seed|`.
    pub max_tau_drift: f64,
}

impl Default for ShootOptions {
    fn default() -> Self {
        ShootOptions {
            flow: FlowOptions::default(),
            residual_tol: 1e-8,
            max_iterations: 50,
            fd_step: 1e-6,
            jacobian: JacobianMode::FiniteDifference,
            max_halvings: 8,
            max_tau_drift: 0.5,
        }
    }
}

struct ShootingProblem<'a> {
    model: &'a StarShapedModel,
    twist: &'a RotationTwist,
    anchor: Vec<f64>,
    normal: Vec<f64>,
    opts: &'a ShootOptions,
}

impl ShootingProblem<'_> {
    fn residual(&self, x: &[f64]) -> Result<DVector<f64>, OrbitError> {
        let dim = x.len() - 1;
        let z = PhasePoint::from_real(&x[..dim])?;
        let tau = x[dim];
        let flowed = reeb_extension_flow(&z, tau, self.model, self.opts.flow.ode)?.to_real();
        let target = self.twist.apply(&z).to_real();
        let mut r = DVector::zeros(dim + 2);
        for i in 0..dim {
            r[i] = flowed[i] - target[i];
        }
        r[dim] = self.model.level(&z) - 1.0;
        r[dim + 1] = (0..dim).map(|i| (x[i] - self.anchor[i]) * self.normal[i]).sum();
        Ok(r)
    }

    fn jacobian(&self, x: &[f64], r0: &DVector<f64>) -> Result<DMatrix<f64>, OrbitError> {
        let dim = x.len() - 1;
        match self.opts.jacobian {
            JacobianMode::FiniteDifference => {
                let mut jac = DMatrix::zeros(dim + 2, dim + 1);
                let mut probe = x.to_vec();
                for c in 0..=dim {
                    let h = self.opts.fd_step;
                    probe[c] = x[c] + h;
                    let up = self.residual(&probe)?;
                    probe[c] = x[c] - h;
                    let down = self.residual(&probe)?;
                    probe[c] = x[c];
                    jac.set_column(c, &((up - down) / (2.0 * h)));
                }
                let _ = r0;
                Ok(jac)
            }
            JacobianMode::Variational => {
                let z = PhasePoint::from_real(&x[..dim])?;
                let tau = x[dim];
                let (end, d) = reeb_flow_with_differential(&z, tau, self.model, self.opts.flow.ode)?;
                let mut jac = DMatrix::zeros(dim + 2, dim + 1);
                let flow_part = d - self.twist.differential(1);
                jac.view_mut((0, 0), (dim, dim)).copy_from(&flow_part);
                let velocity = self.model.reeb_extension(&end).to_real();
                for i in 0..dim {
                    jac[(i, dim)] = velocity[i];
                }
                let grad = self.model.level_gradient(&z).to_real();
                for i in 0..dim {
                    jac[(dim, i)] = grad[i];
                    jac[(dim + 1, i)] = self.normal[i];
                }
                Ok(jac)
            }
        }
    }
}

/// Minimum-norm least-squares solution of `J δ = -r`.
fn min_norm_step(jac: &DMatrix<f64>, r: &DVector<f64>) -> Option<DVector<f64>> {
    let svd = jac.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if !(smax > 0.0) {
        return None;
    }
    let eps = smax * 1e-10;
    svd.solve(&(-r), eps).ok()
}

/// Newton shooting for a twisted orbit near `(seed_z, seed_tau)`.
pub fn shoot_orbit(
    model: &StarShapedModel,
    twist: &RotationTwist,
    seed_z: &PhasePoint,
    seed_tau: f64,
    opts: &ShootOptions,
) -> Result<TwistedOrbit, OrbitError> {
    if model.n() != twist.n() {
        return Err(OrbitError::DimensionMismatch { model: model.n(), twist: twist.n() });
    }
    let z = model.project(seed_z)?;
    let dim = 2 * model.n();
    let problem = ShootingProblem {
        model,
        twist,
        anchor: z.to_real(),
        normal: model.reeb_extension(&z).to_real(),
        opts,
    };
    let mut x: Vec<f64> = z.to_real();
    x.push(seed_tau);
    let mut r = problem.residual(&x)?;
    let mut norm = r.norm();
    let diagnostic = |reason, iterations, residual, tau| {
        OrbitError::NonConvergence(ShootDiagnostic { reason, iterations, residual, tau, seed_tau })
    };

    for iteration in 0..=opts.max_iterations {
        if norm <= opts.residual_tol {
            let z0 = model.project(&PhasePoint::from_real(&x[..dim])?)?;
            let tau = x[dim];
            let residual = twist_residual(model, twist, &z0, tau, &opts.flow)?;
            return Ok(certified(model, twist, z0, tau, residual, iteration));
        }
        if iteration == opts.max_iterations {
            break;
        }
        let jac = problem.jacobian(&x, &r)?;
        let step = min_norm_step(&jac, &r).ok_or(OrbitError::SingularJacobian { iteration })?;
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, s)| a + alpha * s).collect();
            if let Ok(tr) = problem.residual(&trial) {
                if tr.norm() < norm {
                    accepted = Some((trial, tr));
                    break;
                }
            }
            alpha *= 0.5;
        }
        let Some((trial, tr)) = accepted else {
            return Err(diagnostic(FailureReason::LineSearch, iteration, norm, x[dim]));
        };
        x = trial;
        r = tr;
        norm = r.norm();
        if (x[dim] - seed_tau).abs() > opts.max_tau_drift {
            return Err(diagnostic(FailureReason::Drift, iteration + 1, norm, x[dim]));
        }
    }
    Err(diagnostic(FailureReason::MaxIterations, opts.max_iterations, norm, x[dim]))
}

/// `|φ^R_τ(z) - φ(z)|`.
pub fn twist_residual(
    model: &StarShapedModel,
    twist: &RotationTwist,
    z: &PhasePoint,
    tau: f64,
    flow: &FlowOptions,
) -> Result<f64, OrbitError> {
    let end = reeb_flow(z, tau, model, flow)?;
    Ok(end.distance(&twist.apply(z)))
}

const SUPPORT_TOL: f64 = 1e-6;

fn certified(
    model: &StarShapedModel,
    twist: &RotationTwist,
    z0: PhasePoint,
    tau: f64,
    residual: f64,
    iterations: usize,
) -> TwistedOrbit {
    let support: Vec<usize> = z0
        .0
        .iter()
        .enumerate()
        .filter(|(_, c)| c.norm() > SUPPORT_TOL)
        .map(|(j, _)| j + 1)
        .collect();
    let branch = winding_branch(model, twist, &z0, tau);
    let ids: Vec<String> = support.iter().map(ToString::to_string).collect();
    let component_id = match branch {
        Some(l) => format!("S{{{}}}:l{l}", ids.join(",")),
        None => format!("S{{{}}}", ids.join(",")),
    };
    TwistedOrbit { z0, tau, support, residual, component_id, iterations }
}

/// The branch `l` of an orbit, read off from the winding of its largest coordinate:
/// the argument of that coordinate changes by `2π(k/m - l)` over one period.
pub fn winding_branch(model: &StarShapedModel, twist: &RotationTwist, z0: &PhasePoint, tau: f64) -> Option<i64> {
    let (j, _) = z0.0.iter().enumerate().max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))?;
    let steps = (8.0 * tau.abs()).ceil().max(8.0) as usize;
    let mut current = z0.clone();
    let mut total = 0.0;
    let tol = FlowOptions::default().ode;
    for _ in 0..steps {
        let next = reeb_extension_flow(&current, tau / steps as f64, model, tol).ok()?;
        total += (next.0[j] / current.0[j]).arg();
        current = next;
    }
    let k = twist.reduced(j) as f64;
    let m = twist.m() as f64;
    Some((k / m - total / (2.0 * PI)).round() as i64)
}

/// The analytic orbit through `z` at period `tau` (round sphere only), with its residual.
pub fn analytic_orbit(twist: &RotationTwist, z: &PhasePoint, tau: f64) -> Result<TwistedOrbit, OrbitError> {
    let model = StarShapedModel::round_sphere(twist.n());
    let residual = twist_residual(&model, twist, z, tau, &FlowOptions::default())?;
    Ok(certified(&model, twist, z.clone(), tau, residual, 0))
}

/// `γ_i = φ^R_{τ i/N}(z0)` for `i = 0..=N`.
pub fn sample_orbit(orbit: &TwistedOrbit, model: &StarShapedModel, samples: usize, flow: &FlowOptions) -> Result<Vec<PhasePoint>, OrbitError> {
    let samples = samples.max(1);
    let dt = orbit.tau / samples as f64;
    let mut out = Vec::with_capacity(samples + 1);
    out.push(orbit.z0.clone());
    for i in 0..samples {
        let next = match model {
            StarShapedModel::RoundSphere { .. } => reeb_extension_flow(&orbit.z0, dt * (i + 1) as f64, model, flow.ode)?,
            StarShapedModel::RadialProfile { .. } => reeb_extension_flow(&out[i], dt, model, flow.ode)?,
        };
        out.push(next);
    }
    Ok(out)
}

/// `∫γ*λ` over the inscribed polygon through `N + 1` orbit samples.
///
/// Along a chord from `p` to `q` the integral of `λ` is `λ_p(q)`, so this is the
/// trapezoidal rule on the piecewise-linear loop; the error is `O(N⁻²)`.
pub fn action(orbit: &TwistedOrbit, model: &StarShapedModel, samples: usize) -> Result<f64, OrbitError> {
    let points = sample_orbit(orbit, model, samples, &FlowOptions::default())?;
    let mut total = 0.0;
    for w in points.windows(2) {
        total += liouville_form(&w[0], &w[1])?;
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonodromyReport {
    /// Real `2n x 2n` matrix of `D(φ ∘ φ^R_{-τ})` at `z0`, row-major.
    pub matrix: Vec<Vec<f64>>,
    /// `dim ker(M - I)` on `T_{z0}Σ`.
    pub tangent_kernel_dim: usize,
    /// `dim ker(M - I)` on the contact plane `ξ_{z0}`.
    pub xi_kernel_dim: usize,
    /// Operator norm of `M - I` restricted to `T_{z0}Σ`.
    pub tangent_deviation: f64,
    pub xi_deviation: f64,
}

pub const KERNEL_TOL: f64 = 1e-7;

/// Orthonormal basis (as columns) of the orthogonal complement of `constraints`.
fn complement_basis(dim: usize, constraints: &[Vec<f64>]) -> DMatrix<f64> {
    let c = DMatrix::from_fn(constraints.len(), dim, |r, col| constraints[r][col]);
    let gram = &c * c.transpose();
    let inv = gram.try_inverse().expect("independent constraints");
    let proj = DMatrix::<f64>::identity(dim, dim) - c.transpose() * inv * &c;
    let eig = SymmetricEigen::new(proj);
    let cols: Vec<DVector<f64>> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 0.5)
        .map(|(i, _)| eig.eigenvectors.column(i).into_owned())
        .collect();
    DMatrix::from_columns(&cols)
}

fn restricted_kernel(m: &DMatrix<f64>, basis: &DMatrix<f64>) -> (usize, f64) {
    let dim = m.nrows();
    let shifted = m - DMatrix::<f64>::identity(dim, dim);
    let restricted = basis.transpose() * shifted * basis;
    let sv = restricted.singular_values();
    (sv.iter().filter(|&&s| s <= KERNEL_TOL).count(), sv.max())
}

/// Linearization of `φ ∘ φ^R_{-τ}` at the base point, restricted to `T_{z0}Σ` and to `ξ_{z0}`.
pub fn monodromy(
    orbit: &TwistedOrbit,
    model: &StarShapedModel,
    twist: &RotationTwist,
    flow: &FlowOptions,
) -> Result<MonodromyReport, OrbitError> {
    let z = &orbit.z0;
    let dim = 2 * model.n();
    let (_, back) = reeb_flow_with_differential(z, -orbit.tau, model, flow.ode)?;
    let m = twist.differential(1) * back;
    let normal = model.level_gradient(z).to_real();
    // λ_z(v) = ½ Σ (y_j v_xj - x_j v_yj)
    let real = z.to_real();
    let lambda: Vec<f64> = (0..dim).map(|i| if i % 2 == 0 { 0.5 * real[i + 1] } else { -0.5 * real[i - 1] }).collect();
    let tangent = complement_basis(dim, std::slice::from_ref(&normal));
    let xi = complement_basis(dim, &[normal, lambda]);
    let (tangent_kernel_dim, tangent_deviation) = restricted_kernel(&m, &tangent);
    let (xi_kernel_dim, xi_deviation) = restricted_kernel(&m, &xi);
    Ok(MonodromyReport {
        matrix: (0..dim).map(|r| (0..dim).map(|c| m[(r, c)]).collect()).collect(),
        tangent_kernel_dim,
        xi_kernel_dim,
        tangent_deviation,
        xi_deviation,
    })
}

/// Conley–Zehnder index of the linearized flow along the orbit.
pub fn orbit_index(orbit: &TwistedOrbit, model: &StarShapedModel, samples: usize) -> Result<CzIndex, OrbitError> {
    let path = UnitaryPath::from_orbit(orbit, model, samples, FlowOptions::default().ode)?;
    Ok(cz_index_unitary(&path))
}

/// Discrete `L²` norm of the gradient of the twisted action functional on a sampled loop
/// `γ_0, ..., γ_N` with `γ_N = φ(γ_0)`: the loop part `γ̇ - τ X_H(γ)` by central
/// differences (extended across the seam by the twist), and the multiplier part `∫ H∘γ`.
pub fn gradient_residual(
    samples: &[PhasePoint],
    tau: f64,
    hamiltonian: &DefiningHamiltonian,
    twist: &RotationTwist,
    boundary_tol: f64,
) -> Result<f64, OrbitError> {
    if samples.len() < 3 {
        return Err(OrbitError::TooFewSamples);
    }
    let n = samples.len() - 1;
    let gap = samples[n].distance(&twist.apply(&samples[0]));
    if gap > boundary_tol {
        return Err(OrbitError::TwistBoundary { gap });
    }
    let h = 1.0 / n as f64;
    let before_start = twist.apply_power(&samples[n - 1], -1);
    let mut loop_part = 0.0;
    let mut energy = 0.0;
    for i in 0..n {
        let prev = if i == 0 { &before_start } else { &samples[i - 1] };
        let next = &samples[i + 1];
        let field = hamiltonian.vector_field(&samples[i]);
        let mut sq = 0.0;
        for ((a, b), x) in next.0.iter().zip(&prev.0).zip(&field.0) {
            sq += ((a - b) / (2.0 * h) - x * tau).norm_sqr();
        }
        loop_part += h * sq;
        energy += h * hamiltonian.value(&samples[i]);
    }
    Ok((loop_part + energy * energy).sqrt())
}

/// Spectrum of a numerical model by shooting from each coordinate axis.
///
/// Seeds use the round-sphere period scaled by `ρ(e_j)²`, which is exact on ellipsoids.
/// Converged orbits are merged when their periods agree to `1e-6`.
pub fn numeric_spectrum(
    model: &StarShapedModel,
    twist: &RotationTwist,
    window: (i64, i64),
    opts: &ShootOptions,
) -> Result<SpectrumTable, OrbitError> {
    if window.1 < window.0 {
        return Err(OrbitError::EmptyWindow { lo: window.0, hi: window.1 });
    }
    let n = model.n();
    let seeds: Vec<(usize, f64)> = exponent_classes(twist)
        .into_iter()
        .flat_map(|(k, members)| {
            members.into_iter().flat_map(move |j| (window.0..=window.1).map(move |l| (j, k, l)))
        })
        .map(|(j, k, l)| {
            let axis = PhasePoint::axis(n, j);
            let scale = model.radius(&axis).powi(2);
            (j, scale * period(twist.m(), k, l))
        })
        .collect();
    let results = par::map(&seeds, |&(j, tau)| -> Result<SpectrumEntry, OrbitError> {
        let seed = seed_near_axis(n, j);
        let orbit = shoot_orbit(model, twist, &seed, tau, opts)?;
        let report = monodromy(&orbit, model, twist, &opts.flow)?;
        let index = orbit_index(&orbit, model, 64).ok();
        Ok(SpectrumEntry { tau: orbit.tau, support: orbit.support, dim: report.tangent_kernel_dim, index })
    });
    let mut entries: Vec<SpectrumEntry> = Vec::new();
    for r in results {
        let e = r?;
        match entries.iter_mut().find(|x| (x.tau - e.tau).abs() <= 1e-6) {
            Some(existing) => {
                for s in e.support {
                    if !existing.support.contains(&s) {
                        existing.support.push(s);
                    }
                }
                existing.support.sort_unstable();
                existing.dim = existing.dim.max(e.dim);
            }
            None => entries.push(e),
        }
    }
    entries.sort_by(|a, b| a.tau.total_cmp(&b.tau));
    Ok(SpectrumTable { window, entries })
}

/// Axis `e_j`; used as a shooting seed.
fn seed_near_axis(n: usize, j: usize) -> PhasePoint {
    PhasePoint::axis(n, j)
}
