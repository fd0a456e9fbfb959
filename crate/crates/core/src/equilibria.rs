//! Relative equilibria: the linear `(ξ, λ)` system, the equilateral and
//! geodesic families, and fixed equilibria.
//!
//! A configuration is a relative equilibrium when for every vortex
//! `ξ = (1/2π) Σ_{p≠r} Γ_p X_p / L_pr + (λᵣ/Γᵣ) Xᵣ` for one common `ξ`.
//! The motion is then `Ẋᵣ = 2 ξ ×_H Xᵣ`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SMatrix};
use serde::Serialize;

use crate::calibration::flow_constant;
use crate::dynamics::{evolve_by_flow, momentum, pair_l, velocity, Configuration};
use crate::error::{Error, Result};
use crate::hypgeo::{coplanarity, hcross, minkowski_dot, HPoint, Vec3};
use crate::sl2::{AlgebraElement, GroupElement};

/// Default certificate tolerance on the scaled stationarity residual.
pub const TOL_RE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct REReport {
    pub xi: AlgebraElement,
    pub lambdas: Vec<f64>,
    /// `‖A s − b‖ / max|Γ|` of the least-squares solution.
    pub residual: f64,
}

fn interaction_sum(points: &[HPoint], gammas: &[f64], r: usize) -> Vec3 {
    let mut s = Vec3::zeros();
    for (p, (q, g)) in points.iter().zip(gammas).enumerate() {
        if p != r {
            s += q.vec() * (g / pair_l(points[r].vec(), q.vec()));
        }
    }
    s / (2.0 * PI)
}

/// Least-squares solution of `ξ − νᵣ Xᵣ = (1/2π) Σ Γ_p X_p / L_pr`,
/// `λᵣ = Γᵣ νᵣ`, over all `3N` equations.
pub fn re_multipliers(config: &Configuration) -> Result<REReport> {
    let n = config.len();
    let pts = config.points();
    let gam = config.gammas();
    let mut a = DMatrix::zeros(3 * n, 3 + n);
    let mut b = DVector::zeros(3 * n);
    for r in 0..n {
        let s = interaction_sum(pts, gam, r);
        for i in 0..3 {
            a[(3 * r + i, i)] = 1.0;
            a[(3 * r + i, 3 + r)] = -pts[r].vec()[i];
            b[3 * r + i] = s[i];
        }
    }
    let svd = a.clone().svd(true, true);
    let sol = svd
        .solve(&b, 1e-14)
        .map_err(|e| Error::Indeterminate(format!("least squares failed: {e}")))?;
    let scale = gam.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    let residual = (&a * &sol - &b).norm() / scale;
    Ok(REReport {
        xi: AlgebraElement::new(sol[0], sol[1], sol[2]),
        lambdas: (0..n).map(|r| gam[r] * sol[3 + r]).collect(),
        residual,
    })
}

pub fn is_relative_equilibrium(config: &Configuration, tol_re: f64) -> Result<(bool, REReport)> {
    let rep = re_multipliers(config)?;
    Ok((rep.residual <= tol_re, rep))
}

/// The motion of a relative equilibrium, `Xᵣ(t) = exp(−tξ) · Xᵣ`, written as
/// the flow of `−c ξ ×_H (·)` with the calibrated constant `c`.
pub fn re_trajectory(config: &Configuration, xi: &AlgebraElement, t: f64) -> Configuration {
    evolve_by_flow(config, &xi.scale(-flow_constant()), t)
}

/// Velocity predicted by the angular velocity, `−c ξ ×_H Xᵣ`.
pub fn re_velocity(config: &Configuration, xi: &AlgebraElement) -> Vec<Vec3> {
    let k = -flow_constant();
    config.points().iter().map(|p| hcross(xi.vec(), p.vec()) * k).collect()
}

/// Three points at common height with `⟨Xᵢ,Xⱼ⟩_H = −k`.
pub fn make_equilateral(k: f64, gammas: [f64; 3]) -> Result<Configuration> {
    if !(k > 1.0) {
        return Err(Error::InvalidInput(format!("equilateral size k must exceed 1, got {k}")));
    }
    let r = (2.0 * (k - 1.0) / 3.0).sqrt();
    let pts = (0..3)
        .map(|i| {
            let th = 2.0 * PI * i as f64 / 3.0;
            HPoint::lift(r * th.cos(), r * th.sin())
        })
        .collect();
    Configuration::new(pts, gammas.to_vec())
}

/// `ξ = μ / (2π(k² − 1))` for an equilateral configuration of size `k`.
pub fn equilateral_angular_velocity(config: &Configuration) -> AlgebraElement {
    let k = -minkowski_dot(config.point(0).vec(), config.point(1).vec());
    momentum(config).scale(1.0 / (2.0 * PI * (k * k - 1.0)))
}

/// `det μ = 2k Σ_{i<j} ΓᵢΓⱼ + Σ Γᵢ²` for an equilateral triangle of size `k`.
pub fn equilateral_det_mu(k: f64, gammas: [f64; 3]) -> f64 {
    let [a, b, c] = gammas;
    2.0 * k * (a * b + b * c + a * c) + a * a + b * b + c * c
}

/// Canonical collinear triple `X₁ = (x₁,0,·)`, `X₂` at the apex,
/// `X₃ = (−x₃,0,·)`, with its three `L` values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeodesicGeometry {
    pub points: [HPoint; 3],
    pub l12: f64,
    pub l23: f64,
    pub l13: f64,
}

impl GeodesicGeometry {
    pub fn with_gammas(&self, gammas: [f64; 3]) -> Result<Configuration> {
        Configuration::new(self.points.to_vec(), gammas.to_vec())
    }
}

pub fn geodesic_config(x1: f64, x3: f64) -> Result<GeodesicGeometry> {
    if !(x1 > 0.0 && x3 > 0.0) {
        return Err(Error::InvalidInput(format!("x1 and x3 must be positive, got {x1}, {x3}")));
    }
    let p1 = HPoint::lift(x1, 0.0);
    let p3 = HPoint::lift(-x3, 0.0);
    Ok(GeodesicGeometry {
        points: [p1, HPoint::apex(), p3],
        l12: x1 * x1,
        l23: x3 * x3,
        l13: pair_l(p1.vec(), p3.vec()),
    })
}

/// `√L₂₃(L₁₃−L₁₂)Γ₁ + √L₁₃(L₂₃−L₁₂)Γ₂ + √L₁₂(L₂₃−L₁₃)Γ₃`.
pub fn geodesic_re_residual(gammas: [f64; 3], l12: f64, l23: f64, l13: f64) -> f64 {
    let [g1, g2, g3] = gammas;
    l23.sqrt() * (l13 - l12) * g1 + l13.sqrt() * (l23 - l12) * g2 + l12.sqrt() * (l23 - l13) * g3
}

/// The `Γ₃` that makes the canonical geodesic triple a relative equilibrium.
pub fn solve_geodesic_gamma(x1: f64, x3: f64, gamma1: f64, gamma2: f64) -> Result<f64> {
    let g = geodesic_config(x1, x3)?;
    let coef = g.l12.sqrt() * (g.l23 - g.l13);
    if coef.abs() < 1e-12 {
        return Err(Error::Indeterminate(format!(
            "Γ3 coefficient {coef:e} vanishes (L23 = L13)"
        )));
    }
    Ok(-geodesic_re_residual([gamma1, gamma2, 0.0], g.l12, g.l23, g.l13) / coef)
}

/// All `x₃ ∈ (10⁻³, x3_max]` for which the canonical triple with first leg
/// `x₁` and strengths `Γ` is a relative equilibrium.
pub fn solve_geodesic_geometry(gammas: [f64; 3], x1: f64, x3_max: f64) -> Result<Vec<f64>> {
    if !(x1 > 0.0) {
        return Err(Error::InvalidInput(format!("x1 must be positive, got {x1}")));
    }
    let f = |x3: f64| -> f64 {
        let g = geodesic_config(x1, x3).expect("positive legs");
        geodesic_re_residual(gammas, g.l12, g.l23, g.l13)
    };
    let (lo, hi) = (1e-3f64.ln(), x3_max.ln());
    let n = 4000;
    let grid: Vec<f64> = (0..=n).map(|i| (lo + (hi - lo) * i as f64 / n as f64).exp()).collect();
    let vals: Vec<f64> = grid.iter().map(|&x| f(x)).collect();
    let mut roots = Vec::new();
    for i in 0..n {
        let (a, b) = (grid[i], grid[i + 1]);
        let (fa, fb) = (vals[i], vals[i + 1]);
        if fa == 0.0 {
            roots.push(a);
        } else if fa.signum() != fb.signum() && fb != 0.0 {
            roots.push(bisect(&f, a, b, fa, 1e-12));
        }
    }
    if vals[n] == 0.0 {
        roots.push(grid[n]);
    }
    Ok(roots)
}

pub(crate) fn bisect(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, mut fa: f64, tol: f64) -> f64 {
    while (b - a).abs() > tol {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
        if m == a && m == b {
            break;
        }
    }
    0.5 * (a + b)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedEquilibriumReport {
    /// `true` iff every vortex velocity vanishes within tolerance.
    pub is_fixed: bool,
    pub velocity_norm: f64,
    /// `‖Σ Γᵢ(Γⱼ+Γₖ) Xᵢ‖ / scale` for three vortices.
    pub algebraic_residual: Option<f64>,
    pub algebraic_condition: Option<bool>,
}

/// Tests `Ẋ ≡ 0`, reporting the three-vortex algebraic condition
/// `Σ Γᵢ(Γⱼ+Γₖ) Xᵢ = 0` alongside.
pub fn is_fixed_equilibrium(config: &Configuration, tol: f64) -> Result<FixedEquilibriumReport> {
    let velocity_norm = velocity(config)?.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let (algebraic_residual, algebraic_condition) = if config.len() == 3 {
        let g = config.gammas();
        let mut sum = Vec3::zeros();
        let mut scale = 0.0;
        for i in 0..3 {
            let (j, k) = ((i + 1) % 3, (i + 2) % 3);
            let w = g[i] * (g[j] + g[k]);
            sum += config.point(i).vec() * w;
            scale += w.abs() * config.point(i).vec().norm();
        }
        let res = sum.norm() / scale.max(f64::MIN_POSITIVE);
        (Some(res), Some(res <= tol))
    } else {
        (None, None)
    };
    Ok(FixedEquilibriumReport {
        is_fixed: velocity_norm <= tol,
        velocity_norm,
        algebraic_residual,
        algebraic_condition,
    })
}

/// `Γ₂ = Γ₁ a / (1 − a)`, the closed-form isosceles fixed-equilibrium strength.
pub fn isosceles_fixed_gamma2(gamma1: f64, a: f64) -> Result<f64> {
    if a > -1.0 {
        return Err(Error::InvalidInput(format!("a = <X1,X2>_H must be <= -1, got {a}")));
    }
    Ok(gamma1 * a / (1.0 - a))
}

/// `Γ₂ = Γ₁ / (2a)`: the middle strength at which the canonical isosceles
/// geodesic triple has vanishing velocity.
pub fn isosceles_stationary_gamma2(gamma1: f64, a: f64) -> Result<f64> {
    if a > -1.0 {
        return Err(Error::InvalidInput(format!("a = <X1,X2>_H must be <= -1, got {a}")));
    }
    Ok(gamma1 / (2.0 * a))
}

/// Isosceles geodesic configuration `Γ = (Γ₁, Γ₂, Γ₁)` with `⟨X₁,X₂⟩_H = a`.
pub fn isosceles_geodesic(gamma1: f64, gamma2: f64, a: f64) -> Result<Configuration> {
    if !(a < -1.0) {
        return Err(Error::InvalidInput(format!("a must be < -1, got {a}")));
    }
    let x = (a * a - 1.0).sqrt();
    geodesic_config(x, x)?.with_gammas([gamma1, gamma2, gamma1])
}

/// Shape of a three-vortex configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ReShape {
    Equilateral,
    Geodesic,
    Neither,
}

pub fn re_shape(config: &Configuration) -> Option<ReShape> {
    if config.len() != 3 {
        return None;
    }
    let p = config.points();
    let d = |i: usize, j: usize| -minkowski_dot(p[i].vec(), p[j].vec());
    let (a, b, c) = (d(0, 1).acosh(), d(1, 2).acosh(), d(0, 2).acosh());
    if (a - b).abs() <= 1e-6 && (b - c).abs() <= 1e-6 && (a - c).abs() <= 1e-6 {
        return Some(ReShape::Equilateral);
    }
    let scale = p.iter().map(|q| q.vec().norm()).product::<f64>();
    if coplanarity(&p[0], &p[1], &p[2]).abs() <= 1e-6 * scale.max(1.0) {
        return Some(ReShape::Geodesic);
    }
    Some(ReShape::Neither)
}

/// A group element taking `X₂` to the apex and `X₁` to the positive
/// `x` axis, with the resulting canonical legs.
#[derive(Debug, Clone, Copy)]
pub struct GeodesicFrame {
    pub g: GroupElement,
    pub x1: f64,
    /// `−x` coordinate of the moved `X₃`; positive when `X₂` lies between.
    pub x3: f64,
    /// `y` coordinate of the moved `X₃`; zero for a geodesic triple.
    pub off_line: f64,
}

pub fn canonical_geodesic_frame(config: &Configuration) -> Result<GeodesicFrame> {
    if config.len() != 3 {
        return Err(Error::InvalidInput("canonical frame needs three vortices".into()));
    }
    let to_apex = GroupElement::to_apex(config.point(1));
    let p1 = to_apex.act(config.point(0));
    let rot = GroupElement::rotation(-p1.y().atan2(p1.x()));
    let g = rot.compose(&to_apex);
    let q1 = g.act(config.point(0));
    let q3 = g.act(config.point(2));
    Ok(GeodesicFrame { g, x1: q1.x(), x3: -q3.x(), off_line: q3.y() })
}

/// Homogeneous linear system in `(ξ, ν, Γ)` whose kernel gives the vortex
/// strengths making fixed positions a relative equilibrium. Returns the
/// smallest singular value relative to the largest, and the corresponding
/// `Γ` normalised to unit max-norm.
pub fn re_gamma_nullspace(points: &[HPoint; 3]) -> (f64, [f64; 3]) {
    let mut m = SMatrix::<f64, 9, 9>::zeros();
    for r in 0..3 {
        for i in 0..3 {
            let row = 3 * r + i;
            m[(row, i)] = 1.0;
            m[(row, 3 + r)] = -points[r].vec()[i];
            for p in 0..3 {
                if p != r {
                    let l = pair_l(points[r].vec(), points[p].vec());
                    m[(row, 6 + p)] = -points[p].vec()[i] / (2.0 * PI * l);
                }
            }
        }
    }
    let svd = m.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let (imin, smin) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, s)| (i, *s))
        .expect("nine singular values");
    let smax = svd.singular_values.max();
    let row = v_t.row(imin);
    let g = [row[6], row[7], row[8]];
    let n = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let g = if n > 0.0 { g.map(|x| x / n) } else { g };
    (smin / smax, g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypgeo::hdistance;
    use crate::sl2::{classify_momentum, default_momentum_tol, MomentumType};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_vortices_are_always_relative_equilibria() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let c = Configuration::from_xy(&[
                (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(0.2..2.0)),
                (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), -rng.random_range(0.2..2.0)),
            ])
            .unwrap();
            assert!(re_multipliers(&c).unwrap().residual <= 1e-10);
        }
    }

    #[test]
    fn equilateral_angular_velocity_value() {
        let c = make_equilateral(2.0, [1.0, 1.0, 1.0]).unwrap();
        let rep = re_multipliers(&c).unwrap();
        assert!(rep.residual <= 1e-10);
        // ξ = μ/(2πL), L = 3, μ = (0, 0, 3√(5/3))
        let expect = Vec3::new(0.0, 0.0, 3.0 * (5.0f64 / 3.0).sqrt() / (6.0 * PI));
        assert_abs_diff_eq!(rep.xi.0, expect, epsilon = 1e-12);
        assert_abs_diff_eq!(expect.z, 0.205468, epsilon = 1e-6);
        assert_abs_diff_eq!(equilateral_angular_velocity(&c).0, expect, epsilon = 1e-14);
    }

    #[test]
    fn generic_triple_is_not_an_re() {
        let c = Configuration::from_xy(&[(0.3, 0.1, 1.0), (-0.8, 0.5, 0.7), (0.2, -1.1, -1.3)]).unwrap();
        assert!(re_multipliers(&c).unwrap().residual > 1e-4);
    }

    #[test]
    fn single_vortex_is_an_re() {
        let c = Configuration::from_xy(&[(0.4, 0.2, 1.5)]).unwrap();
        let (ok, rep) = is_relative_equilibrium(&c, TOL_RE).unwrap();
        assert!(ok);
        assert_eq!(rep.residual, 0.0);
    }

    #[test]
    fn make_equilateral_examples() {
        assert!(make_equilateral(1.0, [1.0; 3]).is_err());
        let c = make_equilateral(2.0, [1.0, 2.0, -0.5]).unwrap();
        for (i, j) in [(0, 1), (1, 2), (0, 2)] {
            assert_abs_diff_eq!(minkowski_dot(c.point(i).vec(), c.point(j).vec()), -2.0, epsilon = 1e-12);
            assert_abs_diff_eq!(hdistance(c.point(i), c.point(j)).unwrap(), 1.316958, epsilon = 1e-6);
        }
        let tiny = make_equilateral(1.0 + 1e-12, [1.0; 3]).unwrap();
        assert!(tiny.points().iter().all(|p| (p.vec() - HPoint::apex().vec()).norm() < 1e-5));
        assert!(is_relative_equilibrium(&c, TOL_RE).unwrap().0);
        assert!(coplanarity(c.point(0), c.point(1), c.point(2)).abs() > 1e-3);
    }

    #[test]
    fn geodesic_config_examples() {
        let g = geodesic_config(0.7, 0.7).unwrap();
        assert_eq!(g.l12, g.l23);
        assert_eq!(coplanarity(&g.points[0], &g.points[1], &g.points[2]), 0.0);
        let g = geodesic_config(1.0, 2.0).unwrap();
        let d13 = hdistance(&g.points[0], &g.points[2]).unwrap();
        assert_abs_diff_eq!(d13, 1f64.asinh() + 2f64.asinh(), epsilon = 1e-14);
    }

    #[test]
    fn geodesic_residual_examples() {
        let g = geodesic_config(0.9, 0.9).unwrap();
        assert_eq!(geodesic_re_residual([1.0, -3.0, 1.0], g.l12, g.l23, g.l13), 0.0);
        assert!(geodesic_re_residual([1.0, -3.0, 1.2], g.l12, g.l23, g.l13).abs() > 1e-3);
        let g = geodesic_config(1.0, 2.0).unwrap();
        let base = geodesic_re_residual([1.0, 0.5, -0.3], g.l12, g.l23, g.l13);
        assert_abs_diff_eq!(geodesic_re_residual([2.5, 1.25, -0.75], g.l12, g.l23, g.l13), 2.5 * base, epsilon = 1e-12);
    }

    #[test]
    fn solve_geodesic_gamma_examples() {
        assert_abs_diff_eq!(solve_geodesic_gamma(0.8, 0.8, 1.0, -2.7).unwrap(), 1.0, epsilon = 1e-14);
        let g3 = solve_geodesic_gamma(1.0, 2.0, 1.0, 1.0).unwrap();
        let c = geodesic_config(1.0, 2.0).unwrap().with_gammas([1.0, 1.0, g3]).unwrap();
        assert!(re_multipliers(&c).unwrap().residual <= 1e-8);
        let g3b = solve_geodesic_gamma(1.0, 2.0, 3.0, 3.0).unwrap();
        assert_abs_diff_eq!(g3b, 3.0 * g3, epsilon = 1e-12);
    }

    #[test]
    fn solve_geodesic_geometry_examples() {
        let roots = solve_geodesic_geometry([1.0, -0.4, 1.0], 0.9, 1e3).unwrap();
        assert!(roots.iter().any(|r| (r - 0.9).abs() < 1e-9), "{roots:?}");
        let roots = solve_geodesic_geometry([1.0, 1.0, 1.0], 1.0, 1e3).unwrap();
        assert!(!roots.is_empty());
        for gam in [[1.0, 1.0, 1.0], [1.0, -0.3, 2.0], [2.0, 0.5, -1.0]] {
            for x3 in solve_geodesic_geometry(gam, 1.0, 1e3).unwrap() {
                if x3 > 50.0 {
                    continue;
                }
                let c = geodesic_config(1.0, x3).unwrap().with_gammas(gam).unwrap();
                assert!(re_multipliers(&c).unwrap().residual <= 1e-8, "x3 = {x3}");
            }
        }
    }

    #[test]
    fn perturbed_geodesic_is_not_an_re() {
        let g3 = solve_geodesic_gamma(1.0, 2.0, 1.0, 1.0).unwrap();
        let c = geodesic_config(1.0, 2.0).unwrap().with_gammas([1.0, 1.0, g3 * 1.1]).unwrap();
        assert!(!is_relative_equilibrium(&c, TOL_RE).unwrap().0);
    }

    #[test]
    fn equilateral_is_never_fixed() {
        let c = make_equilateral(2.0, [1.0, 1.0, 1.0]).unwrap();
        let rep = is_fixed_equilibrium(&c, 1e-10).unwrap();
        assert!(!rep.is_fixed);
        assert!(rep.velocity_norm > 1e-3);
    }

    #[test]
    fn isosceles_fixed_gamma2_examples() {
        assert_eq!(isosceles_fixed_gamma2(1.0, -1.0).unwrap(), -0.5);
        assert_abs_diff_eq!(isosceles_fixed_gamma2(1.0, -2.0).unwrap(), -2.0 / 3.0, epsilon = 1e-15);
        assert!(isosceles_fixed_gamma2(1.0, -0.5).is_err());
    }

    #[test]
    fn stationary_isosceles_has_zero_velocity() {
        for a in [-1.1, -1.5, -2.0, -4.0] {
            let g2 = isosceles_stationary_gamma2(1.0, a).unwrap();
            let c = isosceles_geodesic(1.0, g2, a).unwrap();
            let rep = is_fixed_equilibrium(&c, 1e-10).unwrap();
            assert!(rep.is_fixed, "a = {a}: {rep:?}");
            // on this family Σ_{i<j} ΓᵢΓⱼ = 1 + 1/a
            assert_abs_diff_eq!(c.pair_gamma_sum(), 1.0 + 1.0 / a, epsilon = 1e-14);
        }
    }

    #[test]
    fn re_shape_tags() {
        let c = make_equilateral(1.7, [1.0, 2.0, 3.0]).unwrap();
        assert_eq!(re_shape(&c), Some(ReShape::Equilateral));
        let g = geodesic_config(1.0, 2.0).unwrap().with_gammas([1.0, 1.0, 1.0]).unwrap();
        assert_eq!(re_shape(&g), Some(ReShape::Geodesic));
        let n = Configuration::from_xy(&[(0.3, 0.1, 1.0), (-0.8, 0.5, 0.7), (0.2, -1.1, -1.3)]).unwrap();
        assert_eq!(re_shape(&n), Some(ReShape::Neither));
    }

    #[test]
    fn canonical_frame_recovers_legs() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let (x1, x3) = (rng.random_range(0.3..2.0), rng.random_range(0.3..2.0));
            let c = geodesic_config(x1, x3).unwrap().with_gammas([1.0, 1.0, 1.0]).unwrap();
            let g = GroupElement::random(&mut rng, 0.6);
            let f = canonical_geodesic_frame(&c.act(&g)).unwrap();
            assert_abs_diff_eq!(f.x1, x1, epsilon = 1e-9);
            assert_abs_diff_eq!(f.x3, x3, epsilon = 1e-9);
            assert_abs_diff_eq!(f.off_line, 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn nullspace_detects_re_positions() {
        let g = geodesic_config(1.0, 2.0).unwrap();
        let (s, gam) = re_gamma_nullspace(&g.points);
        assert!(s < 1e-12);
        let c = g.with_gammas(gam).unwrap();
        assert!(re_multipliers(&c).unwrap().residual <= 1e-8);
        let generic = [HPoint::lift(0.3, 0.1), HPoint::lift(-0.8, 0.5), HPoint::lift(0.2, -1.1)];
        assert!(re_gamma_nullspace(&generic).0 > 1e-6);
    }

    fn signed() -> impl Strategy<Value = f64> {
        prop_oneof![0.5..2.0f64, -2.0..-0.5f64]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn equilateral_re_with_nonzero_momentum(k in 1.05..5.0f64, g in prop::array::uniform3(signed())) {
            let c = make_equilateral(k, g).unwrap();
            let (ok, rep) = is_relative_equilibrium(&c, TOL_RE).unwrap();
            prop_assert!(ok, "{}", rep.residual);
            prop_assert!(momentum(&c).0.norm() > 0.0);
            let v = velocity(&c).unwrap();
            for (a, b) in v.iter().zip(re_velocity(&c, &rep.xi)) {
                prop_assert!((a - b).norm() <= 1e-9);
            }
            let det = momentum(&c).det();
            prop_assert!((det - equilateral_det_mu(k, g)).abs() <= 1e-9 * (1.0 + det.abs()));
        }

        #[test]
        fn geodesic_re_momentum_is_zero_or_elliptic(
            x1 in 0.3..2.5f64, x3 in 0.3..2.5f64, g1 in signed(), g2 in signed()
        ) {
            prop_assume!((x1 - x3).abs() > 0.05);
            let g3 = solve_geodesic_gamma(x1, x3, g1, g2).unwrap();
            prop_assume!(g3.abs() > 1e-3 && g3.abs() < 50.0);
            let c = geodesic_config(x1, x3).unwrap().with_gammas([g1, g2, g3]).unwrap();
            let (ok, rep) = is_relative_equilibrium(&c, TOL_RE).unwrap();
            prop_assert!(ok, "{}", rep.residual);
            let mu = momentum(&c);
            let kind = classify_momentum(&mu, default_momentum_tol(&mu)).kind;
            prop_assert!(matches!(kind, MomentumType::Zero | MomentumType::Elliptic), "{kind:?}");
            let v = velocity(&c).unwrap();
            for (a, b) in v.iter().zip(re_velocity(&c, &rep.xi)) {
                prop_assert!((a - b).norm() <= 1e-9 * (1.0 + a.norm()));
            }
        }

        #[test]
        fn isosceles_non_geodesic_triangles_admit_no_re(
            r in 0.3..2.0f64, phi in 0.2..1.3f64
        ) {
            // X₂ at the apex, X₁, X₃ mirror images off the geodesic through them
            let pts = [
                HPoint::lift(r * phi.cos(), r * phi.sin()),
                HPoint::apex(),
                HPoint::lift(-r * phi.cos(), r * phi.sin()),
            ];
            let (s, gam) = re_gamma_nullspace(&pts);
            let equilateral_like = {
                let d12 = hdistance(&pts[0], &pts[1]).unwrap();
                let d13 = hdistance(&pts[0], &pts[2]).unwrap();
                (d12 - d13).abs() < 1e-3
            };
            prop_assume!(!equilateral_like);
            if s < 1e-10 && gam.iter().all(|g| g.abs() > 1e-6) {
                let c = Configuration::new(pts.to_vec(), gam.to_vec()).unwrap();
                let shape = re_shape(&c).unwrap();
                prop_assert!(
                    re_multipliers(&c).unwrap().residual > TOL_RE || shape != ReShape::Neither
                );
            }
        }
    }
}
