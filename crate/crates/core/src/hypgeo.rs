//! Hyperboloid model of the hyperbolic plane.
//!
//! Points live on the upper sheet `z² − x² − y² = 1, z > 0` embedded in ℝ³
//! with the Lorentzian inner product `⟨u,v⟩_H = u.x v.x + u.y v.y − u.z v.z`.
//! A point is always stored with its full ambient coordinates; the `z`
//! coordinate is recomputed from `(x, y)` whenever a point is re-projected.

use nalgebra::Vector3;

use crate::error::{Error, Result};

/// Ambient carrier for points, tangent vectors and Lie algebra coordinates.
pub type Vec3 = Vector3<f64>;

/// On-manifold tolerance for `⟨v,v⟩_H = −1` and for clamping `arccosh`.
pub const TOL_H2: f64 = 1e-12;

/// Hyperbolic inner product.
#[inline]
pub fn minkowski_dot(u: &Vec3, v: &Vec3) -> f64 {
    u.x * v.x + u.y * v.y - u.z * v.z
}

/// Hyperbolic cross product. The result is `⟨·,·⟩_H`-orthogonal to both factors.
#[inline]
pub fn hcross(u: &Vec3, v: &Vec3) -> Vec3 {
    Vec3::new(
        u.y * v.z - u.z * v.y,
        u.z * v.x - u.x * v.z,
        -u.x * v.y + u.y * v.x,
    )
}

/// The `3×3` matrix of `v ↦ u ×_H v`.
pub fn hcross_matrix(u: &Vec3) -> nalgebra::Matrix3<f64> {
    nalgebra::Matrix3::new(
        0.0, -u.z, u.y, //
        u.z, 0.0, -u.x, //
        u.y, -u.x, 0.0,
    )
}

/// A point on the upper sheet of the hyperboloid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HPoint(Vec3);

impl HPoint {
    /// Validates an ambient vector as a point of H₂. Residuals up to
    /// `TOL_H2 · max(1, z²)` are accepted, which is the roundoff scale of
    /// `z² − x² − y²`.
    pub fn new(v: Vec3) -> Result<Self> {
        if !(v.x.is_finite() && v.y.is_finite() && v.z.is_finite()) {
            return Err(Error::InvalidPoint(format!("non-finite coordinates {v:?}")));
        }
        let residual = (minkowski_dot(&v, &v) + 1.0).abs();
        if residual > TOL_H2 * v.z.powi(2).max(1.0) || v.z < 1.0 - TOL_H2 {
            return Err(Error::InvalidPoint(format!(
                "({}, {}, {}) has <v,v>_H + 1 = {residual:e}",
                v.x, v.y, v.z
            )));
        }
        Ok(HPoint(v))
    }

    /// Canonical chart: `(x, y) ↦ (x, y, √(1 + x² + y²))`.
    pub fn lift(x: f64, y: f64) -> Self {
        HPoint(Vec3::new(x, y, (1.0 + x * x + y * y).sqrt()))
    }

    /// Wraps an ambient vector known to be on H₂ up to roundoff, e.g. the
    /// image of a valid point under a Möbius matrix.
    pub(crate) fn from_vec_unchecked(v: Vec3) -> Self {
        HPoint(v)
    }

    /// The apex `(0, 0, 1)`.
    pub fn apex() -> Self {
        HPoint(Vec3::new(0.0, 0.0, 1.0))
    }

    /// Projects an arbitrary ambient vector back onto H₂ by discarding `z`.
    pub fn renormalize(v: &Vec3) -> Self {
        Self::lift(v.x, v.y)
    }

    #[inline]
    pub fn vec(&self) -> &Vec3 {
        &self.0
    }

    #[inline]
    pub fn x(&self) -> f64 {
        self.0.x
    }

    #[inline]
    pub fn y(&self) -> f64 {
        self.0.y
    }

    #[inline]
    pub fn z(&self) -> f64 {
        self.0.z
    }

    /// `|⟨v,v⟩_H + 1|`.
    pub fn residual(&self) -> f64 {
        (minkowski_dot(&self.0, &self.0) + 1.0).abs()
    }
}

impl From<HPoint> for Vec3 {
    fn from(p: HPoint) -> Vec3 {
        p.0
    }
}

/// `renormalize` as a free function, for symmetry with the other primitives.
pub fn renormalize(v: &Vec3) -> HPoint {
    HPoint::renormalize(v)
}

/// `lift` as a free function.
pub fn lift(x: f64, y: f64) -> HPoint {
    HPoint::lift(x, y)
}

/// Hyperbolic distance `arccosh(−⟨p,q⟩_H)`.
pub fn hdistance(p: &HPoint, q: &HPoint) -> Result<f64> {
    cosh_distance(p, q).map(f64::acosh)
}

/// `−⟨p,q⟩_H`, clamped to 1 inside the roundoff window.
pub fn cosh_distance(p: &HPoint, q: &HPoint) -> Result<f64> {
    let c = -minkowski_dot(p.vec(), q.vec());
    if c >= 1.0 {
        Ok(c)
    } else if c >= 1.0 - TOL_H2 * p.z().max(q.z()).powi(2) {
        Ok(1.0)
    } else {
        Err(Error::InvalidPoint(format!(
            "-<p,q>_H = {c} < 1; inputs are not both on H2"
        )))
    }
}

/// `⟨p1, p2 ×_H p3⟩_H`; zero iff the three points lie on one geodesic.
pub fn coplanarity(p1: &HPoint, p2: &HPoint, p3: &HPoint) -> f64 {
    minkowski_dot(p1.vec(), &hcross(p2.vec(), p3.vec()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn minkowski_dot_examples() {
        let apex = Vec3::new(0.0, 0.0, 1.0);
        assert_eq!(minkowski_dot(&apex, &apex), -1.0);
        let ex = Vec3::new(1.0, 0.0, 0.0);
        assert_eq!(minkowski_dot(&ex, &ex), 1.0);
        assert_eq!(minkowski_dot(&Vec3::new(0.75, 0.0, 1.25), &apex), -1.25);
    }

    #[test]
    fn hcross_examples() {
        let u = Vec3::new(0.3, -1.2, 2.0);
        assert_eq!(hcross(&u, &u), Vec3::zeros());
        assert_eq!(
            hcross(&Vec3::new(1.0, 0.0, 0.0), &Vec3::new(0.0, 1.0, 0.0)),
            Vec3::new(0.0, 0.0, -1.0)
        );
        assert_eq!(
            hcross(&Vec3::new(0.0, 0.0, 1.0), &Vec3::new(1.0, 0.0, 0.0)),
            Vec3::new(0.0, 1.0, 0.0)
        );
    }

    #[test]
    fn hcross_matrix_matches_product() {
        let u = Vec3::new(0.3, -1.2, 2.0);
        let v = Vec3::new(-0.7, 0.4, 1.1);
        assert_abs_diff_eq!(hcross_matrix(&u) * v, hcross(&u, &v), epsilon = 1e-15);
    }

    #[test]
    fn distance_examples() {
        let p = lift(0.0, 0.0);
        let q = lift(0.75, 0.0);
        assert_eq!(hdistance(&p, &p).unwrap(), 0.0);
        assert_abs_diff_eq!(hdistance(&p, &q).unwrap(), 2f64.ln(), epsilon = 1e-15);
        assert_eq!(hdistance(&p, &q).unwrap(), hdistance(&q, &p).unwrap());
    }

    #[test]
    fn distance_rejects_off_manifold() {
        // Second sheet point sneaks past `HPoint` only via the private constructor.
        let p = HPoint(Vec3::new(0.0, 0.0, 1.0));
        let q = HPoint(Vec3::new(0.0, 0.0, -1.0));
        assert!(matches!(hdistance(&p, &q), Err(Error::InvalidPoint(_))));
    }

    #[test]
    fn lift_examples() {
        assert_eq!(*lift(0.0, 0.0).vec(), Vec3::new(0.0, 0.0, 1.0));
        assert_eq!(*lift(0.75, 0.0).vec(), Vec3::new(0.75, 0.0, 1.25));
        assert_eq!(*lift(3.0, 4.0).vec(), Vec3::new(3.0, 4.0, 26f64.sqrt()));
    }

    #[test]
    fn renormalize_examples() {
        assert_eq!(
            *renormalize(&Vec3::new(0.0, 0.0, 1.0001)).vec(),
            Vec3::new(0.0, 0.0, 1.0)
        );
        assert_eq!(
            *renormalize(&Vec3::new(1.0, 0.0, 1.5)).vec(),
            Vec3::new(1.0, 0.0, 2f64.sqrt())
        );
    }

    #[test]
    fn new_validates() {
        assert!(HPoint::new(Vec3::new(0.0, 0.0, 1.0)).is_ok());
        assert!(HPoint::new(Vec3::new(0.0, 0.0, -1.0)).is_err());
        assert!(HPoint::new(Vec3::new(1.0, 0.0, 1.0)).is_err());
        assert!(HPoint::new(Vec3::new(f64::NAN, 0.0, 1.0)).is_err());
    }

    #[test]
    fn coplanarity_examples() {
        let (a, b, c) = (lift(1.0, 0.0), lift(-0.3, 0.0), lift(2.0, 0.0));
        assert_eq!(coplanarity(&a, &b, &c), 0.0);
        let (a, b, c) = (lift(1.0, 0.2), lift(-0.3, 0.5), lift(0.4, -1.0));
        let v = coplanarity(&a, &b, &c);
        assert!(v.abs() > 1e-3);
        assert_abs_diff_eq!(coplanarity(&a, &c, &b), -v, epsilon = 1e-14);
    }

    fn coord() -> impl Strategy<Value = f64> {
        -3.0..3.0f64
    }

    fn vec3() -> impl Strategy<Value = Vec3> {
        (coord(), coord(), coord()).prop_map(|(x, y, z)| Vec3::new(x, y, z))
    }

    proptest! {
        #[test]
        fn cross_is_h_orthogonal(u in vec3(), v in vec3()) {
            let w = hcross(&u, &v);
            prop_assert!(minkowski_dot(&w, &u).abs() <= 1e-12);
            prop_assert!(minkowski_dot(&w, &v).abs() <= 1e-12);
        }

        #[test]
        fn reverse_cauchy_schwarz(x1 in coord(), y1 in coord(), x2 in coord(), y2 in coord()) {
            let p = lift(x1, y1);
            let q = lift(x2, y2);
            prop_assert!(-minkowski_dot(p.vec(), q.vec()) >= 1.0 - 1e-12);
        }

        #[test]
        fn triangle_inequality(a in (coord(), coord()), b in (coord(), coord()), c in (coord(), coord())) {
            let (p, q, r) = (lift(a.0, a.1), lift(b.0, b.1), lift(c.0, c.1));
            let pq = hdistance(&p, &q).unwrap();
            let qr = hdistance(&q, &r).unwrap();
            let pr = hdistance(&p, &r).unwrap();
            prop_assert!(pr <= pq + qr + 1e-10);
        }

        #[test]
        fn lift_projection_identity(x in coord(), y in coord()) {
            let p = lift(x, y);
            prop_assert_eq!(lift(p.x(), p.y()), p);
            prop_assert!(p.residual() <= TOL_H2 * p.z().powi(2));
            let r = renormalize(p.vec());
            prop_assert_eq!(renormalize(r.vec()), r);
        }
    }
}
