//! Formal stability of relative equilibria.
//!
//! The augmented Hamiltonian is
//! `H_ξ = E − Σ Γᵣ⟨ξ, Xᵣ⟩_H + Σ (λᵣ/2)(⟨Xᵣ,Xᵣ⟩_H + 1)` with the pair energy
//! `E = −(1/4π) Σ_{r<s} ΓᵣΓₛ ln((a+1)/(a−1))`, `a = ⟨Xᵣ,Xₛ⟩_H`. Its gradient is
//! the stationarity system solved by [`re_multipliers`]. Formal stability is
//! definiteness of the Hessian of `H_ξ` on a two-dimensional symplectic normal
//! space spanned by `η`, `ζ`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix2, Matrix3, OMatrix, U3, U9};
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{momentum, Configuration};
use crate::equilibria::{
    bisect, is_relative_equilibrium, isosceles_fixed_gamma2, isosceles_geodesic, re_shape, REReport,
    ReShape, TOL_RE,
};
use crate::error::{Error, Result};
use crate::hypgeo::{hcross, minkowski_dot, HPoint, Vec3};
use crate::sl2::{classify_momentum, default_momentum_tol, AlgebraElement, MomentumType};

const T: [f64; 3] = [1.0, 1.0, -1.0];

fn tmat() -> Matrix3<f64> {
    Matrix3::from_diagonal(&Vec3::new(1.0, 1.0, -1.0))
}

fn tvec(v: &Vec3) -> Vec3 {
    Vec3::new(v.x, v.y, -v.z)
}

/// Gradient of `H_ξ` in ambient coordinates, flattened `(X₁, …, X_N)`.
pub fn augmented_gradient(config: &Configuration, xi: &AlgebraElement, lambdas: &[f64]) -> DVector<f64> {
    let n = config.len();
    let pts = config.points();
    let gam = config.gammas();
    let mut g = DVector::zeros(3 * n);
    for r in 0..n {
        let mut s = Vec3::zeros();
        for p in 0..n {
            if p != r {
                let a = minkowski_dot(pts[r].vec(), pts[p].vec());
                s += pts[p].vec() * (gam[p] / (a * a - 1.0));
            }
        }
        let inner = s * (gam[r] / (2.0 * PI)) - xi.vec() * gam[r] + pts[r].vec() * lambdas[r];
        for i in 0..3 {
            g[3 * r + i] = T[i] * inner[i];
        }
    }
    g
}

/// Analytic Hessian of `H_ξ`. `ξ` enters linearly and drops out; it is taken
/// for symmetry with [`augmented_gradient`].
pub fn augmented_hessian(config: &Configuration, _xi: &AlgebraElement, lambdas: &[f64]) -> DMatrix<f64> {
    let n = config.len();
    let pts = config.points();
    let gam = config.gammas();
    let t = tmat();
    let mut h = DMatrix::zeros(3 * n, 3 * n);
    for r in 0..n {
        let mut diag = t * lambdas[r];
        for s in 0..n {
            if s == r {
                continue;
            }
            let a = minkowski_dot(pts[r].vec(), pts[s].vec());
            let l = a * a - 1.0;
            let f1 = -2.0 / l;
            let f2 = 4.0 * a / (l * l);
            let c = -gam[r] * gam[s] / (4.0 * PI);
            let (tr, ts) = (tvec(pts[r].vec()), tvec(pts[s].vec()));
            diag += ts * ts.transpose() * (c * f2);
            let off = (ts * tr.transpose() * f2 + t * f1) * c;
            h.fixed_view_mut::<3, 3>(3 * r, 3 * s).copy_from(&off);
        }
        h.fixed_view_mut::<3, 3>(3 * r, 3 * r).copy_from(&diag);
    }
    h
}

/// Two tangent directions `η`, `ζ` spanning a symplectic normal space.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalBasis {
    pub eta: Vec<Vec3>,
    pub zeta: Vec<Vec3>,
    pub d1: Vec3,
    pub d2: Vec3,
    pub coeffs_a: Vec<f64>,
    pub coeffs_b: Vec<f64>,
}

impl NormalBasis {
    /// The `3N × 2` matrix `[η ζ]`.
    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.eta.len();
        DMatrix::from_fn(3 * n, 2, |row, col| {
            let v = if col == 0 { &self.eta } else { &self.zeta };
            v[row / 3][row % 3]
        })
    }
}

/// Kernel of `a ↦ Σ Γᵢ aᵢ (D ×_H Xᵢ)`, normalised to `max|aᵢ| = 1` with that
/// component positive.
fn direction_kernel(config: &Configuration, d: &Vec3) -> Result<Vec<f64>> {
    let cols: Vec<Vec3> = config
        .points()
        .iter()
        .zip(config.gammas())
        .map(|(p, g)| hcross(d, p.vec()) * *g)
        .collect();
    let m = Matrix3::from_columns(&cols);
    let svd = m.svd(false, true);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let s = svd.singular_values;
    let (smax, smid) = (s[order[0]], s[order[1]]);
    if smax == 0.0 || smid <= 1e-8 * smax {
        return Err(Error::DegenerateBasis(format!(
            "kernel of the momentum-tangency system has dimension > 1 (singular values {:.3e}, {:.3e}, {:.3e})",
            s[order[0]], s[order[1]], s[order[2]]
        )));
    }
    let v_t = svd.v_t.expect("requested V^T");
    let row = v_t.row(order[2]);
    let mut a: Vec<f64> = row.iter().copied().collect();
    let amax = a
        .iter()
        .copied()
        .max_by(|x, y| x.abs().total_cmp(&y.abs()))
        .expect("three entries");
    for v in a.iter_mut() {
        *v /= amax;
    }
    Ok(a)
}

/// `η = (aᵢ D₁ ×_H Xᵢ)`, `ζ = (bᵢ D₂ ×_H Xᵢ)` for three vortices.
pub fn symplectic_normal_basis(config: &Configuration, d1: &Vec3, d2: &Vec3) -> Result<NormalBasis> {
    if config.len() != 3 {
        return Err(Error::InvalidInput("symplectic normal basis needs three vortices".into()));
    }
    let mu = momentum(config);
    if mu.0.norm() <= default_momentum_tol(&mu) {
        return Err(Error::DegenerateMomentum);
    }
    let plane = d1.cross(d2);
    if plane.norm() <= 1e-12 * d1.norm() * d2.norm() {
        return Err(Error::DegenerateBasis("D1 and D2 are parallel".into()));
    }
    for (i, p) in config.points().iter().enumerate() {
        if plane.dot(p.vec()).abs() <= 1e-10 * plane.norm() * p.vec().norm() {
            return Err(Error::InvalidDirections(i));
        }
    }
    let a = direction_kernel(config, d1)?;
    let b = direction_kernel(config, d2)?;
    let eta: Vec<Vec3> = config.points().iter().zip(&a).map(|(p, c)| hcross(d1, p.vec()) * *c).collect();
    let zeta: Vec<Vec3> = config.points().iter().zip(&b).map(|(p, c)| hcross(d2, p.vec()) * *c).collect();

    // η, ζ and the isotropy-orbit direction (μ ×_H Xᵢ) must be independent
    let orbit: Vec<Vec3> = config.points().iter().map(|p| hcross(&mu.0, p.vec())).collect();
    let mut m = OMatrix::<f64, U9, U3>::zeros();
    for (col, v) in [&eta, &zeta, &orbit].into_iter().enumerate() {
        let norm = v.iter().map(|w| w.norm_squared()).sum::<f64>().sqrt();
        for (i, w) in v.iter().enumerate() {
            for k in 0..3 {
                m[(3 * i + k, col)] = w[k] / norm;
            }
        }
    }
    let sv = m.singular_values();
    if sv.min() <= 1e-8 * sv.max() {
        return Err(Error::DegenerateBasis(format!(
            "eta, zeta and the orbit direction are dependent (smallest singular value {:.3e})",
            sv.min()
        )));
    }
    Ok(NormalBasis { eta, zeta, d1: *d1, d2: *d2, coeffs_a: a, coeffs_b: b })
}

/// Default directions `D₁ = X₁+X₂`, `D₂ = X₂+X₃`; for collinear triples, whose
/// geodesic plane contains every vortex, falls back to `D₁ = X₁+X₂+n`,
/// `D₂ = n` with `n` the unit normal `X₁ ×_H X₃`.
pub fn default_normal_basis(config: &Configuration) -> Result<NormalBasis> {
    let p = config.points();
    if p.len() != 3 {
        return Err(Error::InvalidInput("symplectic normal basis needs three vortices".into()));
    }
    let d1 = p[0].vec() + p[1].vec();
    let d2 = p[1].vec() + p[2].vec();
    match symplectic_normal_basis(config, &d1, &d2) {
        Err(Error::InvalidDirections(_)) | Err(Error::DegenerateBasis(_)) => {
            let n = hcross(p[0].vec(), p[2].vec());
            let n = n / n.norm();
            symplectic_normal_basis(config, &(d1 + n), &n)
        }
        other => other,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FormalClass {
    Definite,
    Indefinite,
    Degenerate,
}

/// `1e−9 · ‖Q‖²`.
pub fn default_q_tol(q: &Matrix2<f64>) -> f64 {
    1e-9 * q.norm_squared()
}

pub fn definiteness(q: &Matrix2<f64>, tol: f64) -> FormalClass {
    let det = q.determinant();
    if det > tol {
        FormalClass::Definite
    } else if det < -tol {
        FormalClass::Indefinite
    } else {
        FormalClass::Degenerate
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RestrictedHessian {
    pub q: Matrix2<f64>,
    pub basis: NormalBasis,
    pub report: REReport,
}

/// `Q = Bᵀ Hess(H_ξ) B` with `B = [η ζ]` from an explicit direction pair.
pub fn restricted_hessian_with(config: &Configuration, d1: &Vec3, d2: &Vec3) -> Result<RestrictedHessian> {
    let report = certified(config)?;
    let basis = symplectic_normal_basis(config, d1, d2)?;
    Ok(project(config, basis, report))
}

/// `Q = Bᵀ Hess(H_ξ) B` with the default direction choice.
pub fn restricted_hessian(config: &Configuration) -> Result<RestrictedHessian> {
    let report = certified(config)?;
    let basis = default_normal_basis(config)?;
    Ok(project(config, basis, report))
}

fn certified(config: &Configuration) -> Result<REReport> {
    let (ok, report) = is_relative_equilibrium(config, TOL_RE)?;
    if !ok {
        return Err(Error::NotRelativeEquilibrium { residual: report.residual });
    }
    Ok(report)
}

fn project(config: &Configuration, basis: NormalBasis, report: REReport) -> RestrictedHessian {
    let h = augmented_hessian(config, &report.xi, &report.lambdas);
    let b = basis.matrix();
    let q = b.transpose() * h * b;
    let q = Matrix2::new(q[(0, 0)], 0.5 * (q[(0, 1)] + q[(1, 0)]), 0.5 * (q[(0, 1)] + q[(1, 0)]), q[(1, 1)]);
    RestrictedHessian { q, basis, report }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Modality {
    GmuStable,
    GStable,
    LeafwiseOnly,
    NotFormallyStable,
    ZeroMomentumCase,
    /// Degenerate restricted Hessian at a regular momentum value.
    Undetermined,
}

impl Modality {
    pub fn code(&self) -> u8 {
        match self {
            Modality::GmuStable => 0,
            Modality::GStable => 1,
            Modality::LeafwiseOnly => 2,
            Modality::NotFormallyStable => 3,
            Modality::ZeroMomentumCase => 4,
            Modality::Undetermined => 5,
        }
    }
}

/// Sweep code for cells that do not yield a valid configuration.
pub const INVALID_CELL: u8 = 6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityVerdict {
    pub formal: Option<FormalClass>,
    pub momentum_type: MomentumType,
    pub modality: Modality,
    pub restricted_hessian: Option<[[f64; 2]; 2]>,
    pub det_mu: f64,
    /// Stable modulo the full group.
    pub g_stable: bool,
    /// Nonlinear instability is known (indefinite equilateral triangles).
    pub known_unstable: bool,
}

fn modality_for(formal: FormalClass, kind: MomentumType) -> Modality {
    match (formal, kind) {
        (FormalClass::Definite, MomentumType::Elliptic) => Modality::GmuStable,
        (FormalClass::Definite, _) => Modality::GStable,
        (FormalClass::Indefinite, _) => Modality::NotFormallyStable,
        (FormalClass::Degenerate, _) => Modality::Undetermined,
    }
}

pub fn classify_stability(config: &Configuration) -> Result<StabilityVerdict> {
    let n = config.len();
    if !(n == 2 || n == 3) {
        return Err(Error::InvalidInput(format!("stability needs 2 or 3 vortices, got {n}")));
    }
    let report = match certified(config) {
        Ok(r) => r,
        Err(Error::NotRelativeEquilibrium { residual }) => {
            return Err(Error::ContractViolation(format!(
                "configuration is not a relative equilibrium (residual {residual:e})"
            )))
        }
        Err(e) => return Err(e),
    };
    let mu = momentum(config);
    let class = classify_momentum(&mu, default_momentum_tol(&mu));
    if n == 2 {
        let modality = if class.kind == MomentumType::Elliptic { Modality::GmuStable } else { Modality::LeafwiseOnly };
        return Ok(StabilityVerdict {
            formal: None,
            momentum_type: class.kind,
            modality,
            restricted_hessian: None,
            det_mu: class.det,
            g_stable: true,
            known_unstable: false,
        });
    }
    if class.kind == MomentumType::Zero {
        return Ok(StabilityVerdict {
            formal: None,
            momentum_type: class.kind,
            modality: Modality::ZeroMomentumCase,
            restricted_hessian: None,
            det_mu: class.det,
            g_stable: report.xi.det() > 0.0,
            known_unstable: false,
        });
    }
    let basis = default_normal_basis(config)?;
    let rh = project(config, basis, report);
    let formal = definiteness(&rh.q, default_q_tol(&rh.q));
    let equilateral = re_shape(config) == Some(ReShape::Equilateral);
    Ok(StabilityVerdict {
        formal: Some(formal),
        momentum_type: class.kind,
        modality: modality_for(formal, class.kind),
        restricted_hessian: Some([[rh.q[(0, 0)], rh.q[(0, 1)]], [rh.q[(1, 0)], rh.q[(1, 1)]]]),
        det_mu: class.det,
        g_stable: formal == FormalClass::Definite,
        known_unstable: formal == FormalClass::Indefinite && equilateral,
    })
}

/// Closed-form two-vortex verdict at separation `c`: `G_μ`-stable iff the
/// strengths share a sign or `c < |ln|Γ₁| − ln|Γ₂||`.
pub fn two_vortex_stability(gamma1: f64, gamma2: f64, c: f64) -> Result<StabilityVerdict> {
    if !(c > 0.0) || gamma1 * gamma2 == 0.0 {
        return Err(Error::InvalidInput(format!(
            "need c > 0 and nonzero strengths, got c = {c}, Γ = ({gamma1}, {gamma2})"
        )));
    }
    let threshold = (gamma1.abs().ln() - gamma2.abs().ln()).abs();
    let gmu = gamma1 * gamma2 > 0.0 || c < threshold;
    let h = (0.5 * c).sinh();
    let pair = Configuration::new(vec![HPoint::lift(h, 0.0), HPoint::lift(-h, 0.0)], vec![gamma1, gamma2])?;
    let mu = momentum(&pair);
    let class = classify_momentum(&mu, default_momentum_tol(&mu));
    Ok(StabilityVerdict {
        formal: None,
        momentum_type: class.kind,
        modality: if gmu { Modality::GmuStable } else { Modality::LeafwiseOnly },
        restricted_hessian: None,
        det_mu: class.det,
        g_stable: true,
        known_unstable: false,
    })
}

/// `det μ = Γ₁² + Γ₂² + 2Γ₁Γ₂ cosh c` for a pair at distance `c`.
pub fn two_vortex_det_mu(gamma1: f64, gamma2: f64, c: f64) -> f64 {
    gamma1 * gamma1 + gamma2 * gamma2 + 2.0 * gamma1 * gamma2 * c.cosh()
}

/// The isosceles closed-form criterion `A = (512 A₁ + A₂)/Γ₁`.
pub fn a_poly(gamma1: f64, gamma2: f64, a: f64) -> f64 {
    let (g1, g2) = (gamma1, gamma2);
    let p = |k: i32| a.powi(k);
    let a1 = g1 * g1 * p(9) - 2.0 * g1 * p(8) * (g1 - g2 / 4.0)
        + p(7) * (-1.25 * g1 * g1 + 2.0 * g1 * g2)
        + 2.0 * p(6) * (g1 + g2 / 4.0) * (g1 - g2)
        + g1 * p(5) / 4.0 * (g1 - 8.0 * g2)
        + g2 * p(4) / 16.0 * (8.0 * g2 + g1)
        - g1 * g2 / 32.0 * (p(2) - 0.5);
    let a2 = g1 * p(5) + 0.5 * g2 * p(4) - 1.25 * g1 * p(3) - 11.0 / 8.0 * g2 * p(2) + 0.25 * g1 * a - g2 / 8.0;
    (512.0 * a1 + a2) / g1
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    pub a: f64,
    pub gamma2: f64,
    pub verdict_code: u8,
    pub a_value: f64,
    pub det_mu: f64,
    pub det_q: Option<f64>,
    /// Within the band around the zero-momentum curve `Γ₂ = 2aΓ₁`.
    pub on_zero_momentum_curve: bool,
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 }).collect()
}

fn sweep_cell(gamma1: f64, a: f64, gamma2: f64) -> SweepCell {
    let a_value = a_poly(gamma1, gamma2, a);
    let on_curve = (gamma2 - 2.0 * a * gamma1).abs() <= 1e-9 * (1.0 + gamma2.abs());
    let mut cell = SweepCell {
        a,
        gamma2,
        verdict_code: INVALID_CELL,
        a_value,
        det_mu: f64::NAN,
        det_q: None,
        on_zero_momentum_curve: on_curve,
    };
    let Ok(config) = isosceles_geodesic(gamma1, gamma2, a) else {
        return cell;
    };
    cell.det_mu = momentum(&config).det();
    if let Ok(v) = classify_stability(&config) {
        cell.verdict_code = v.modality.code();
        cell.det_q = v.restricted_hessian.map(|q| q[0][0] * q[1][1] - q[0][1] * q[1][0]);
    }
    cell
}

fn with_pool<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    let threads = std::env::var("HYPERVORTEX_THREADS").ok().and_then(|s| s.parse::<usize>().ok());
    match threads.and_then(|n| rayon::ThreadPoolBuilder::new().num_threads(n).build().ok()) {
        Some(pool) => pool.install(f),
        None => f(),
    }
}

/// Classifies the isosceles geodesic family `Γ = (Γ₁, Γ₂, Γ₁)` on a
/// `resolution × resolution` grid, `a` outer and `Γ₂` inner.
pub fn sweep_isosceles(
    gamma1: f64,
    a_range: (f64, f64),
    gamma2_range: (f64, f64),
    resolution: usize,
) -> Result<Vec<SweepCell>> {
    if resolution < 2 {
        return Err(Error::InvalidInput(format!("resolution must be at least 2, got {resolution}")));
    }
    if !(a_range.0 < a_range.1 && a_range.1 < -1.0) {
        return Err(Error::InvalidInput(format!("a range must satisfy a_min < a_max < -1, got {a_range:?}")));
    }
    if !(gamma2_range.0 < gamma2_range.1) || gamma1 == 0.0 {
        return Err(Error::InvalidInput(format!("bad Γ2 range {gamma2_range:?} or Γ1 = {gamma1}")));
    }
    let av = linspace(a_range.0, a_range.1, resolution);
    let gv = linspace(gamma2_range.0, gamma2_range.1, resolution);
    let cells: Vec<(f64, f64)> = av.iter().flat_map(|&a| gv.iter().map(move |&g| (a, g))).collect();
    Ok(with_pool(|| cells.par_iter().map(|&(a, g)| sweep_cell(gamma1, a, g)).collect()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumInterval {
    /// Every sign change of `a ↦ A(Γ₁, Γ₁a/(1−a), a)` on `[−50, −1)`.
    pub roots: Vec<f64>,
    /// The two roots nearest `−1.15`, if there are at least two.
    pub interval: Option<(f64, f64)>,
}

/// Sign changes of `A` along the closed-form fixed-equilibrium curve.
pub fn equilibrium_interval(gamma1: f64) -> Result<EquilibriumInterval> {
    if gamma1 == 0.0 {
        return Err(Error::InvalidInput("Γ1 must be nonzero".into()));
    }
    let f = |a: f64| a_poly(gamma1, isosceles_fixed_gamma2(gamma1, a).expect("a <= -1"), a);
    // offsets −1 − a spaced logarithmically from 1e−6 to 49
    let n = 20000;
    let grid: Vec<f64> = (0..=n)
        .map(|i| {
            let t = (1e-6f64).ln() + (49f64.ln() - (1e-6f64).ln()) * i as f64 / n as f64;
            -1.0 - t.exp()
        })
        .collect();
    let vals: Vec<f64> = grid.iter().map(|&a| f(a)).collect();
    let mut roots = Vec::new();
    for i in 0..n {
        if vals[i] == 0.0 {
            roots.push(grid[i]);
        } else if vals[i + 1] != 0.0 && vals[i].signum() != vals[i + 1].signum() {
            roots.push(bisect(&f, grid[i], grid[i + 1], vals[i], 1e-10));
        }
    }
    roots.sort_by(|a, b| b.total_cmp(a));
    let interval = if roots.len() >= 2 {
        let mut near = roots.clone();
        near.sort_by(|x, y| (x + 1.15).abs().total_cmp(&(y + 1.15).abs()));
        let (p, q) = (near[0], near[1]);
        Some((p.min(q), p.max(q)))
    } else {
        None
    };
    Ok(EquilibriumInterval { roots, interval })
}
