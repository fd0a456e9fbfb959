//! Phase space, vector field, conserved quantities and time integration.

use std::f64::consts::PI;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypgeo::{hcross, hcross_matrix, hdistance, minkowski_dot, HPoint, Vec3, TOL_H2};
use crate::sl2::{AlgebraElement, DualElement, GroupElement};

/// Minimum pairwise distance accepted by [`Configuration::new`].
pub const MIN_SEPARATION: f64 = 1e-9;
/// Distance below which the integrator refuses to continue.
pub const COLLISION_GUARD: f64 = 1e-6;
const L_FLOOR: f64 = 1e-14;

/// `N` distinct vortices with nonzero strengths.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    points: Vec<HPoint>,
    gammas: Vec<f64>,
}

impl Configuration {
    pub fn new(points: Vec<HPoint>, gammas: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput("configuration needs at least one vortex".into()));
        }
        if points.len() != gammas.len() {
            return Err(Error::InvalidInput(format!(
                "{} points but {} vortex strengths",
                points.len(),
                gammas.len()
            )));
        }
        for (i, g) in gammas.iter().enumerate() {
            if *g == 0.0 || !g.is_finite() {
                return Err(Error::InvalidInput(format!("vortex {i} has strength {g}")));
            }
        }
        for i in 0..points.len() {
            for j in i + 1..points.len() {
                let d = hdistance(&points[i], &points[j])?;
                if d <= MIN_SEPARATION {
                    return Err(Error::Collision { i, j, separation: d });
                }
            }
        }
        Ok(Configuration { points, gammas })
    }

    /// Builds a configuration from chart coordinates `(x, y, Γ)`.
    pub fn from_xy(vortices: &[(f64, f64, f64)]) -> Result<Self> {
        let points = vortices.iter().map(|&(x, y, _)| HPoint::lift(x, y)).collect();
        let gammas = vortices.iter().map(|v| v.2).collect();
        Self::new(points, gammas)
    }

    pub(crate) fn from_parts_unchecked(points: Vec<HPoint>, gammas: Vec<f64>) -> Self {
        Configuration { points, gammas }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[HPoint] {
        &self.points
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    pub fn point(&self, i: usize) -> &HPoint {
        &self.points[i]
    }

    /// Same points, new strengths.
    pub fn with_gammas(&self, gammas: Vec<f64>) -> Result<Self> {
        Self::new(self.points.clone(), gammas)
    }

    /// `g · (X₁, …, X_N)`; distances are preserved so no revalidation.
    pub fn act(&self, g: &GroupElement) -> Self {
        let m = g.mobius_lift();
        self.map_points(&m)
    }

    fn map_points(&self, m: &Matrix3<f64>) -> Self {
        Configuration {
            points: self
                .points
                .iter()
                .map(|p| HPoint::from_vec_unchecked(m * p.vec()))
                .collect(),
            gammas: self.gammas.clone(),
        }
    }

    /// `Σ_{i<j} Γᵢ Γⱼ`.
    pub fn pair_gamma_sum(&self) -> f64 {
        let g = &self.gammas;
        let mut s = 0.0;
        for i in 0..g.len() {
            for j in i + 1..g.len() {
                s += g[i] * g[j];
            }
        }
        s
    }

    /// Largest `|⟨Xᵢ,Xᵢ⟩_H + 1|`.
    pub fn h2_residual(&self) -> f64 {
        self.points.iter().map(HPoint::residual).fold(0.0, f64::max)
    }

    /// Smallest pairwise hyperbolic distance (infinite for `N = 1`).
    pub fn min_separation(&self) -> (f64, usize, usize) {
        let mut best = (f64::INFINITY, 0, 0);
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                let c = -minkowski_dot(self.points[i].vec(), self.points[j].vec());
                let d = c.max(1.0).acosh();
                if d < best.0 {
                    best = (d, i, j);
                }
            }
        }
        best
    }

    fn flat(&self) -> Vec<f64> {
        self.points.iter().flat_map(|p| [p.x(), p.y(), p.z()]).collect()
    }
}

/// `L = ⟨Xᵣ,X_p⟩²_H − 1 = sinh² d`.
pub(crate) fn pair_l(u: &Vec3, v: &Vec3) -> f64 {
    let a = minkowski_dot(u, v);
    a * a - 1.0
}

fn velocity_raw(points: &[Vec3], gammas: &[f64], out: &mut [Vec3]) -> Result<()> {
    let n = points.len();
    for r in 0..n {
        let mut acc = Vec3::zeros();
        for p in 0..n {
            if p == r {
                continue;
            }
            let l = pair_l(&points[r], &points[p]);
            if l.abs() < L_FLOOR {
                return Err(Error::Collision {
                    i: r.min(p),
                    j: r.max(p),
                    separation: l.max(0.0).sqrt().asinh(),
                });
            }
            acc += hcross(&points[p], &points[r]) * (gammas[p] / l);
        }
        out[r] = acc / PI;
    }
    Ok(())
}

/// `Ẋᵣ = (1/π) Σ_{p≠r} Γ_p (X_p ×_H Xᵣ) / L_pr`.
pub fn velocity(config: &Configuration) -> Result<Vec<Vec3>> {
    let pts: Vec<Vec3> = config.points.iter().map(|p| *p.vec()).collect();
    let mut out = vec![Vec3::zeros(); pts.len()];
    velocity_raw(&pts, &config.gammas, &mut out)?;
    Ok(out)
}

/// `H = −(1/4π) Σ_{i≠j} Γᵢ Γⱼ ln[(⟨Xᵢ,Xⱼ⟩_H + 1)/(⟨Xᵢ,Xⱼ⟩_H − 1)]`, summed over
/// ordered pairs.
pub fn hamiltonian(config: &Configuration) -> Result<f64> {
    let pts = &config.points;
    let g = &config.gammas;
    let mut s = 0.0;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let c = -minkowski_dot(pts[i].vec(), pts[j].vec());
            if c - 1.0 <= 0.0 {
                return Err(Error::Collision { i, j, separation: 0.0 });
            }
            s += g[i] * g[j] * ((c - 1.0) / (c + 1.0)).ln();
        }
    }
    // each unordered pair appears twice in the ordered sum
    Ok(-2.0 * s / (4.0 * PI))
}

/// `J = Σ Γᵢ Xᵢ`.
pub fn momentum(config: &Configuration) -> DualElement {
    let v = config
        .points
        .iter()
        .zip(&config.gammas)
        .fold(Vec3::zeros(), |acc, (p, g)| acc + p.vec() * *g);
    AlgebraElement(v)
}

/// Per-vortex KKS form `ω(μ)(u, v) = μ·(u ×_H v) / (2‖μ‖²)` with the
/// Euclidean dot product and norm.
pub fn kks_form(mu: &HPoint, u: &Vec3, v: &Vec3) -> Result<f64> {
    let m = mu.vec();
    for (name, w) in [("u", u), ("v", v)] {
        let t = minkowski_dot(w, m);
        if t.abs() > 1e-9 * w.norm().max(1.0) * m.norm() {
            return Err(Error::ContractViolation(format!(
                "{name} is not tangent at the base point (<{name},mu>_H = {t:e})"
            )));
        }
    }
    Ok(m.dot(&hcross(u, v)) / (2.0 * m.norm_squared()))
}

/// Applies `exp(t M_ξ)`, `M_ξ v = ξ ×_H v`, to every point.
///
/// `M³ = q M` with `q = ⟨ξ,ξ⟩_H`, which gives the closed form
/// `I + s(t) M + c(t) M²`.
pub fn evolve_by_flow(config: &Configuration, xi: &AlgebraElement, t: f64) -> Configuration {
    config.map_points(&flow_matrix(xi, t))
}

pub fn flow_matrix(xi: &AlgebraElement, t: f64) -> Matrix3<f64> {
    let m = hcross_matrix(xi.vec());
    let q = minkowski_dot(xi.vec(), xi.vec());
    let x = q * t * t;
    let (s, c) = if x.abs() < 1e-8 {
        (t * (1.0 + x / 6.0), t * t * (0.5 + x / 24.0))
    } else if q > 0.0 {
        let r = q.sqrt();
        ((r * t).sinh() / r, ((r * t).cosh() - 1.0) / q)
    } else {
        let r = (-q).sqrt();
        ((r * t).sin() / r, ((r * t).cos() - 1.0) / q)
    };
    Matrix3::identity() + m * s + m * m * c
}

/// Tolerances and step control for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub renormalize_each_step: bool,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_step: 0.1,
            renormalize_each_step: true,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0 && self.max_step > 0.0) {
            return Err(Error::InvalidInput(format!(
                "integrator tolerances and max_step must be positive: {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    pub config: Configuration,
    /// Energy, [`hamiltonian`].
    pub h: f64,
    pub mu: Vec3,
    pub h2_residual: f64,
    pub stats: StepStats,
}

impl TrajectorySample {
    fn new(t: f64, config: Configuration, stats: StepStats) -> Result<Self> {
        Ok(TrajectorySample {
            t,
            h: hamiltonian(&config)?,
            mu: momentum(&config).0,
            h2_residual: config.h2_residual(),
            config,
            stats,
        })
    }
}

// Dormand–Prince 5(4) tableau. The field is autonomous so the nodes are not needed.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

struct Rhs<'a> {
    gammas: &'a [f64],
    pts: Vec<Vec3>,
    out: Vec<Vec3>,
}

impl Rhs<'_> {
    fn eval(&mut self, y: &[f64], dy: &mut [f64]) -> Result<()> {
        for (p, c) in self.pts.iter_mut().zip(y.chunks_exact(3)) {
            *p = Vec3::new(c[0], c[1], c[2]);
        }
        velocity_raw(&self.pts, self.gammas, &mut self.out)?;
        for (d, v) in dy.chunks_exact_mut(3).zip(&self.out) {
            d.copy_from_slice(v.as_slice());
        }
        Ok(())
    }
}

fn to_config(y: &[f64], gammas: &[f64]) -> Configuration {
    let points = y
        .chunks_exact(3)
        .map(|c| HPoint::from_vec_unchecked(Vec3::new(c[0], c[1], c[2])))
        .collect();
    Configuration::from_parts_unchecked(points, gammas.to_vec())
}

fn renormalize_flat(y: &mut [f64]) {
    for c in y.chunks_exact_mut(3) {
        c[2] = (1.0 + c[0] * c[0] + c[1] * c[1]).sqrt();
    }
}

/// Adaptive Dormand–Prince 5(4) integration of the vortex field.
///
/// Samples are taken at every multiple of `sample_dt` below `t_end` and at
/// `t_end` itself; steps are shortened to land on sample times exactly. After
/// each accepted step the points are projected back to H₂ if requested.
pub fn integrate(
    config: &Configuration,
    t_end: f64,
    icfg: &IntegratorConfig,
    sample_dt: f64,
) -> Result<Vec<TrajectorySample>> {
    let mut samples = Vec::new();
    integrate_with(config, t_end, icfg, sample_dt, |s| {
        samples.push(s.clone());
        Ok(())
    })?;
    Ok(samples)
}

/// As [`integrate`], handing each sample to `sink` as soon as it is taken.
/// On failure every sample before the failure has already been delivered.
pub fn integrate_with(
    config: &Configuration,
    t_end: f64,
    icfg: &IntegratorConfig,
    sample_dt: f64,
    mut sink: impl FnMut(&TrajectorySample) -> Result<()>,
) -> Result<StepStats> {
    icfg.validate()?;
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidInput(format!("t_end must be positive, got {t_end}")));
    }
    if !(sample_dt > 0.0) {
        return Err(Error::InvalidInput(format!("sample_dt must be positive, got {sample_dt}")));
    }
    let gammas = config.gammas();
    let dim = 3 * config.len();
    let mut rhs = Rhs { gammas, pts: vec![Vec3::zeros(); config.len()], out: vec![Vec3::zeros(); config.len()] };

    let mut stats = StepStats::default();
    let mut last = TrajectorySample::new(0.0, config.clone(), stats)?;
    sink(&last)?;
    let n_regular = (t_end / sample_dt).floor() as usize;
    let mut targets: Vec<f64> = (1..=n_regular).map(|k| k as f64 * sample_dt).collect();
    if targets.last().is_none_or(|&t| t_end - t > 1e-12 * t_end) {
        targets.push(t_end);
    } else if let Some(last) = targets.last_mut() {
        *last = t_end;
    }

    let mut y = config.flat();
    let mut k = vec![vec![0.0; dim]; 7];
    let mut ytmp = vec![0.0; dim];
    let mut ynew = vec![0.0; dim];
    let mut t = 0.0;
    let mut h = icfg.max_step.min(sample_dt).min(1e-2);

    let fail = |t: f64, reason: String, last: &TrajectorySample| Error::IntegrationFailure {
        t,
        reason,
        last: Box::new(last.clone()),
    };

    if let Err(e) = rhs.eval(&y, &mut k[0]) {
        return Err(fail(0.0, e.to_string(), &last));
    }

    for &target in &targets {
        while t < target {
            let mut land = false;
            // stretch by up to 1% rather than leave a sliver before the target
            if t + 1.01 * h >= target {
                h = target - t;
                land = true;
            }
            if h < 1e-14 * t.abs().max(1.0) {
                return Err(fail(t, format!("step size underflow (h = {h:e})"), &last));
            }
            let mut stage_err = None;
            for s in 1..7 {
                for i in 0..dim {
                    let mut acc = y[i];
                    for (j, kj) in k.iter().enumerate().take(s) {
                        acc += h * A[s][j] * kj[i];
                    }
                    ytmp[i] = acc;
                }
                if let Err(e) = rhs.eval(&ytmp, &mut k[s]) {
                    stage_err = Some(e);
                    break;
                }
            }
            if stage_err.is_some() {
                stats.rejected += 1;
                h *= 0.2;
                continue;
            }
            let mut err_sq = 0.0;
            for i in 0..dim {
                let mut hi5 = y[i];
                let mut diff = 0.0;
                for s in 0..7 {
                    hi5 += h * B5[s] * k[s][i];
                    diff += h * (B5[s] - B4[s]) * k[s][i];
                }
                ynew[i] = hi5;
                let sc = icfg.abs_tol + icfg.rel_tol * y[i].abs().max(hi5.abs());
                err_sq += (diff / sc).powi(2);
            }
            let err = (err_sq / dim as f64).sqrt();
            if err <= 1.0 {
                t = if land { target } else { t + h };
                if icfg.renormalize_each_step {
                    renormalize_flat(&mut ynew);
                }
                std::mem::swap(&mut y, &mut ynew);
                stats.accepted += 1;
                let cfg = to_config(&y, gammas);
                let (d, i, j) = cfg.min_separation();
                if d < COLLISION_GUARD {
                    return Err(fail(
                        t,
                        format!("near collision of vortices {i} and {j} (distance {d:e})"),
                        &last,
                    ));
                }
                if let Err(e) = rhs.eval(&y, &mut k[0]) {
                    return Err(fail(t, e.to_string(), &last));
                }
                let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if !land {
                    h = (h * factor).min(icfg.max_step);
                } else {
                    // keep the controller's step rather than the shortened one
                    h = (h * factor).max(h).min(icfg.max_step);
                }
            } else {
                stats.rejected += 1;
                h *= (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
            }
        }
        let cfg = to_config(&y, gammas);
        match TrajectorySample::new(t, cfg, stats) {
            Ok(s) => last = s,
            Err(e) => return Err(fail(t, e.to_string(), &last)),
        }
        sink(&last)?;
    }
    Ok(stats)
}

/// Largest `|⟨Xᵢ,Xᵢ⟩_H + 1|` over a trajectory.
pub fn max_h2_residual(samples: &[TrajectorySample]) -> f64 {
    samples.iter().map(|s| s.h2_residual).fold(0.0, f64::max)
}

/// Drift of the conserved quantities relative to the first sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Drift {
    pub delta_h: f64,
    pub delta_mu: f64,
    pub max_h2_residual: f64,
}

pub fn drift(samples: &[TrajectorySample]) -> Drift {
    let first = &samples[0];
    let mut d = Drift { delta_h: 0.0, delta_mu: 0.0, max_h2_residual: 0.0 };
    for s in samples {
        d.delta_h = d.delta_h.max((s.h - first.h).abs());
        d.delta_mu = d.delta_mu.max((s.mu - first.mu).norm());
        d.max_h2_residual = d.max_h2_residual.max(s.h2_residual);
    }
    d
}

/// Within the on-manifold tolerance at every sample.
pub fn on_manifold(samples: &[TrajectorySample]) -> bool {
    samples.iter().all(|s| s.h2_residual <= TOL_H2)
}

/// Projects an ambient vector onto the tangent plane of H₂ at `p`.
pub fn tangent_projection(p: &HPoint, w: &Vec3) -> Vec3 {
    w + p.vec() * minkowski_dot(w, p.vec())
}
