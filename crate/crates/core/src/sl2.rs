//! The symmetry layer: SL(2,ℝ), its Lie algebra and the coadjoint picture.
//!
//! A traceless matrix `[[x, y+z], [y−z, −x]]` is identified with the ambient
//! vector `(x, y, z)`. Under this identification the matrix commutator is
//! `−2` times the hyperbolic cross product, `det ρ = −⟨ρ̌,ρ̌⟩_H`, and the
//! coadjoint action `μ ↦ gμg⁻¹` is the Möbius matrix `g̃` acting on `μ̌`.
//! Dual elements use the same carrier as algebra elements.

use std::fmt;

use nalgebra::{Matrix2, Matrix3};
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hypgeo::{hcross, minkowski_dot, HPoint, Vec3};

const DET_TOL: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-12;
const EXP_SERIES_WINDOW: f64 = 1e-12;

/// An element of SL(2,ℝ), `[[a, b], [c, d]]` with `ad − bc = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupElement {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl GroupElement {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        let det = a * d - b * c;
        if (det - 1.0).abs() > DET_TOL {
            return Err(Error::InvalidInput(format!(
                "group element has determinant {det}, expected 1"
            )));
        }
        Ok(GroupElement { a, b, c, d })
    }

    pub fn identity() -> Self {
        GroupElement { a: 1.0, b: 0.0, c: 0.0, d: 1.0 }
    }

    pub fn from_matrix(m: &Matrix2<f64>) -> Result<Self> {
        Self::new(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)])
    }

    pub fn matrix(&self) -> Matrix2<f64> {
        Matrix2::new(self.a, self.b, self.c, self.d)
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn inverse(&self) -> Self {
        GroupElement { a: self.d, b: -self.b, c: -self.c, d: self.a }
    }

    pub fn compose(&self, other: &Self) -> Self {
        let m = self.matrix() * other.matrix();
        GroupElement { a: m[(0, 0)], b: m[(0, 1)], c: m[(1, 0)], d: m[(1, 1)] }
    }

    /// Rotation of H₂ about the apex by angle `theta` (counter-clockwise in
    /// the `(x, y)` chart).
    pub fn rotation(theta: f64) -> Self {
        let (s, c) = (0.5 * theta).sin_cos();
        GroupElement { a: c, b: -s, c: s, d: c }
    }

    /// Boost along the `x` axis taking the apex to `(sinh s, 0, cosh s)`.
    pub fn boost_x(s: f64) -> Self {
        let (sh, ch) = ((0.5 * s).sinh(), (0.5 * s).cosh());
        GroupElement { a: ch, b: -sh, c: -sh, d: ch }
    }

    /// An element taking `p` to the apex.
    pub fn to_apex(p: &HPoint) -> Self {
        let r = p.x().hypot(p.y());
        let theta = p.y().atan2(p.x());
        let s = r.asinh();
        // p = R(θ) B(s) apex
        Self::boost_x(-s).compose(&Self::rotation(-theta))
    }

    /// A random element `exp(ξ₁)·exp(ξ₂)` with algebra coordinates drawn
    /// uniformly from `[−scale, scale]`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, scale: f64) -> Self {
        let mut draw = || {
            AlgebraElement::new(
                rng.random_range(-scale..=scale),
                rng.random_range(-scale..=scale),
                rng.random_range(-scale..=scale),
            )
        };
        let (x1, x2) = (draw(), draw());
        algebra_exp(&x1, 1.0).compose(&algebra_exp(&x2, 1.0))
    }

    /// The normalised Möbius matrix `g̃` acting on the hyperboloid model.
    pub fn mobius_lift(&self) -> Matrix3<f64> {
        let GroupElement { a, b, c, d } = *self;
        let (a2, b2, c2, d2) = (a * a, b * b, c * c, d * d);
        Matrix3::new(
            a * d + b * c,
            -(a * c - b * d),
            -(a * c + b * d),
            -(a * b - c * d),
            0.5 * (a2 - b2 - c2 + d2),
            0.5 * (a2 + b2 - c2 - d2),
            -(a * b + c * d),
            0.5 * (a2 - b2 + c2 - d2),
            0.5 * (a2 + b2 + c2 + d2),
        )
    }

    /// `g · X = g̃ X̌`.
    pub fn act(&self, p: &HPoint) -> HPoint {
        HPoint::from_vec_unchecked(self.mobius_lift() * p.vec())
    }

    /// Acts on an arbitrary ambient vector (tangent vectors, momenta).
    pub fn act_vec(&self, v: &Vec3) -> Vec3 {
        self.mobius_lift() * v
    }
}

/// `g̃` as a free function.
pub fn mobius_lift(g: &GroupElement) -> Matrix3<f64> {
    g.mobius_lift()
}

/// An element of 𝔰𝔩(2,ℝ) (or of its dual) in ̌-coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlgebraElement(pub Vec3);

/// Dual elements share the algebra carrier; the pairing is the only place the
/// distinction matters.
pub type DualElement = AlgebraElement;

impl AlgebraElement {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        AlgebraElement(Vec3::new(x, y, z))
    }

    pub fn zero() -> Self {
        AlgebraElement(Vec3::zeros())
    }

    pub fn vec(&self) -> &Vec3 {
        &self.0
    }

    /// `[[x, y+z], [y−z, −x]]`.
    pub fn hat(&self) -> Matrix2<f64> {
        hat(&self.0)
    }

    pub fn scale(&self, s: f64) -> Self {
        AlgebraElement(self.0 * s)
    }

    /// `det` of the matrix form, `−⟨v,v⟩_H`.
    pub fn det(&self) -> f64 {
        -minkowski_dot(&self.0, &self.0)
    }
}

impl From<Vec3> for AlgebraElement {
    fn from(v: Vec3) -> Self {
        AlgebraElement(v)
    }
}

pub fn hat(v: &Vec3) -> Matrix2<f64> {
    Matrix2::new(v.x, v.y + v.z, v.y - v.z, -v.x)
}

/// Inverse of [`hat`]; refuses matrices that are not traceless.
pub fn vee(m: &Matrix2<f64>) -> Result<Vec3> {
    let scale = m.abs().max().max(1.0);
    if (m[(0, 0)] + m[(1, 1)]).abs() > TRACE_TOL * scale {
        return Err(Error::ContractViolation(format!(
            "vee of a matrix with trace {}",
            m[(0, 0)] + m[(1, 1)]
        )));
    }
    Ok(Vec3::new(
        0.5 * (m[(0, 0)] - m[(1, 1)]),
        0.5 * (m[(0, 1)] + m[(1, 0)]),
        0.5 * (m[(0, 1)] - m[(1, 0)]),
    ))
}

/// `Ad*_{g⁻¹} μ = g μ g⁻¹`, computed by matrix conjugation.
pub fn coadjoint(g: &GroupElement, mu: &DualElement) -> DualElement {
    let m = g.matrix() * mu.hat() * g.inverse().matrix();
    // conjugation preserves the trace exactly up to roundoff
    AlgebraElement(Vec3::new(
        0.5 * (m[(0, 0)] - m[(1, 1)]),
        0.5 * (m[(0, 1)] + m[(1, 0)]),
        0.5 * (m[(0, 1)] - m[(1, 0)]),
    ))
}

/// Matrix commutator `[ξ, η] = ξη − ηξ`.
pub fn bracket(xi: &AlgebraElement, eta: &AlgebraElement) -> AlgebraElement {
    let (p, q) = (xi.hat(), eta.hat());
    let m = p * q - q * p;
    AlgebraElement(Vec3::new(m[(0, 0)], 0.5 * (m[(0, 1)] + m[(1, 0)]), 0.5 * (m[(0, 1)] - m[(1, 0)])))
}

/// The natural pairing `⟨μ, ξ⟩ = ½ tr(ξμ)`.
pub fn pairing(mu: &DualElement, xi: &AlgebraElement) -> f64 {
    0.5 * (xi.hat() * mu.hat()).trace()
}

/// Conjugacy class of the coadjoint isotropy subgroup of `μ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MomentumType {
    Zero,
    Elliptic,
    Parabolic,
    Hyperbolic,
}

impl MomentumType {
    pub fn as_str(&self) -> &'static str {
        match self {
            MomentumType::Zero => "zero",
            MomentumType::Elliptic => "elliptic",
            MomentumType::Parabolic => "parabolic",
            MomentumType::Hyperbolic => "hyperbolic",
        }
    }

    /// The matrix family of the isotropy subgroup, up to conjugacy.
    pub fn isotropy_description(&self) -> &'static str {
        match self {
            MomentumType::Zero => "whole group SL(2,R)",
            MomentumType::Elliptic => "rotations SO(2): [[cos t, sin t], [-sin t, cos t]]",
            MomentumType::Parabolic => "upper-triangular unipotent: [[1, t], [0, 1]]",
            MomentumType::Hyperbolic => "diagonal: [[t, 0], [0, 1/t]], t > 0",
        }
    }
}

impl fmt::Display for MomentumType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which component of a two-component orbit (elliptic sheets, parabolic
/// half-cones) a momentum value lies on: the sign of `μ̌.z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Sheet {
    Upper,
    Lower,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentumClass {
    #[serde(rename = "type")]
    pub kind: MomentumType,
    pub det: f64,
    pub sheet: Option<Sheet>,
}

/// `1e−9 · max(1, ‖μ̌‖²)`: `det μ` is quadratic in `μ̌`.
pub fn default_momentum_tol(mu: &DualElement) -> f64 {
    1e-9 * mu.0.norm_squared().max(1.0)
}

pub fn classify_momentum(mu: &DualElement, tol: f64) -> MomentumClass {
    let det = mu.det();
    let kind = if mu.0.norm() <= tol {
        MomentumType::Zero
    } else if det > tol {
        MomentumType::Elliptic
    } else if det < -tol {
        MomentumType::Hyperbolic
    } else {
        MomentumType::Parabolic
    };
    let sheet = match kind {
        MomentumType::Elliptic | MomentumType::Parabolic => Some(if mu.0.z > 0.0 {
            Sheet::Upper
        } else {
            Sheet::Lower
        }),
        _ => None,
    };
    MomentumClass { kind, det, sheet }
}

/// Closed-form `exp(tξ)` for a traceless `2×2` matrix. With `M = tξ` and
/// `Δ = −det M` one has `M² = Δ I`.
pub fn algebra_exp(xi: &AlgebraElement, t: f64) -> GroupElement {
    let m = xi.hat() * t;
    let delta = -m.determinant();
    let id = Matrix2::identity();
    let e = if delta.abs() < EXP_SERIES_WINDOW {
        id + m + m * m * 0.5
    } else if delta > 0.0 {
        let r = delta.sqrt();
        id * r.cosh() + m * (r.sinh() / r)
    } else {
        let r = (-delta).sqrt();
        id * r.cos() + m * (r.sin() / r)
    };
    GroupElement { a: e[(0, 0)], b: e[(0, 1)], c: e[(1, 0)], d: e[(1, 1)] }
}

/// Point `exp(tμ) · ν` of the `SL(2,ℝ)_μ`-orbit through `ν`; the curve is the
/// conic cut from H₂ by a plane `H`-normal to `μ̌`.
pub fn orbit_curve(mu: &DualElement, nu: &HPoint, t: f64) -> Result<HPoint> {
    if mu.0.norm() == 0.0 {
        return Err(Error::DegenerateMomentum);
    }
    Ok(algebra_exp(mu, t).act(nu))
}

/// The generating vector field of the one-parameter group `exp(tξ)` on ℝ³ is
/// `v ↦ c · ξ̌ ×_H v` for a fixed constant `c`; returns the least-squares
/// estimate of `c` at one probe by central differences.
pub fn generator_ratio(xi: &AlgebraElement, v: &Vec3, h: f64) -> f64 {
    let fwd = algebra_exp(xi, h).act_vec(v);
    let bwd = algebra_exp(xi, -h).act_vec(v);
    let deriv = (fwd - bwd) / (2.0 * h);
    let w = hcross(&xi.0, v);
    deriv.dot(&w) / w.norm_squared()
}
