//! The model Dehn twist on T*Sⁿ.
//!
//! The cotangent bundle of the round sphere is realized as pairs (u, v) of
//! vectors in ℝ^{n+1} with |v| = 1 and ⟨u,v⟩ = 0. The norm function |u|
//! generates a circle action σ_t off the zero section; composing its flow
//! with an angle profile R′ gives the model twist, which extends over the
//! zero section by the antipodal map.

use crate::tol::Tol;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TwistError {
    #[error("circle flow is undefined on the zero section")]
    ZeroSection,
    #[error("invalid cotangent point: {reason}")]
    InvalidPoint { reason: String },
    #[error("invalid profile: {reason}")]
    BadProfile { reason: String },
    #[error("no solution: requested angle {angle} exceeds the profile range")]
    NoSolution { angle: f64 },
}

/// Point (u, v) with |v| = 1, ⟨u,v⟩ = 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CotangentPoint {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl CotangentPoint {
    pub fn new(u: Vec<f64>, v: Vec<f64>, tol: &Tol) -> Result<CotangentPoint, TwistError> {
        if u.len() != v.len() {
            return Err(TwistError::InvalidPoint {
                reason: format!("dimension mismatch {} vs {}", u.len(), v.len()),
            });
        }
        let vn = norm(&v);
        if (vn - 1.0).abs() > tol.arith.max(1e-12) {
            return Err(TwistError::InvalidPoint {
                reason: format!("|v| = {vn} is not 1"),
            });
        }
        let ip = dot(&u, &v);
        if ip.abs() > tol.arith.max(1e-12) * (1.0 + norm(&u)) {
            return Err(TwistError::InvalidPoint {
                reason: format!("<u,v> = {ip} is not 0"),
            });
        }
        Ok(CotangentPoint { u, v })
    }

    pub fn covector_norm(&self) -> f64 {
        norm(&self.u)
    }

    pub fn dist(&self, o: &CotangentPoint) -> f64 {
        let du: f64 = self
            .u
            .iter()
            .zip(&o.u)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let dv: f64 = self
            .v
            .iter()
            .zip(&o.v)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        (du + dv).sqrt()
    }

    /// Constraint drift: max(| |v|−1 |, |⟨u,v⟩|).
    pub fn constraint_residual(&self) -> f64 {
        (norm(&self.v) - 1.0).abs().max(dot(&self.u, &self.v).abs())
    }
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Spherical distance between unit vectors.
pub fn sphere_distance(a: &[f64], b: &[f64]) -> f64 {
    dot(a, b).clamp(-1.0, 1.0).acos()
}

/// Angle profile R with support radius λ. The built-in families are the
/// quadratic profile R(t) = −(λ−t)²/(4λ) on [0, λ] (strictly concave and
/// decreasing, R′(0) = 1/2) and a cosine profile that in addition satisfies
/// the reflection identity R(−t) = R(t) − t for every t. Tabulated profiles
/// are interpolated linearly from a (t, R, R′) grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum AngleProfile {
    Quadratic { lambda: f64 },
    Cosine { lambda: f64 },
    Tabulated { lambda: f64, grid: Vec<[f64; 3]> },
}

impl AngleProfile {
    pub fn quadratic(lambda: f64) -> Result<AngleProfile, TwistError> {
        if lambda <= 0.0 || !lambda.is_finite() {
            return Err(TwistError::BadProfile {
                reason: format!("support radius {lambda} must be positive"),
            });
        }
        Ok(AngleProfile::Quadratic { lambda })
    }

    pub fn cosine(lambda: f64) -> Result<AngleProfile, TwistError> {
        if lambda <= 0.0 || !lambda.is_finite() {
            return Err(TwistError::BadProfile {
                reason: format!("support radius {lambda} must be positive"),
            });
        }
        Ok(AngleProfile::Cosine { lambda })
    }

    /// Parses a profile from its JSON form, e.g.
    /// `{"family":"quadratic","lambda":0.5}` or
    /// `{"family":"tabulated","lambda":0.5,"grid":[[t, R, R'], ...]}`.
    pub fn from_json_str(text: &str) -> Result<AngleProfile, TwistError> {
        let prof: AngleProfile =
            serde_json::from_str(text).map_err(|e| TwistError::BadProfile {
                reason: e.to_string(),
            })?;
        match &prof {
            AngleProfile::Quadratic { lambda } => AngleProfile::quadratic(*lambda),
            AngleProfile::Cosine { lambda } => AngleProfile::cosine(*lambda),
            AngleProfile::Tabulated { lambda, grid } => {
                AngleProfile::tabulated(*lambda, grid.clone())
            }
        }
    }

    /// Loads a tabulated profile; the grid must be sorted in t, start at 0
    /// and reach λ.
    pub fn tabulated(lambda: f64, grid: Vec<[f64; 3]>) -> Result<AngleProfile, TwistError> {
        if lambda <= 0.0 {
            return Err(TwistError::BadProfile {
                reason: "support radius must be positive".into(),
            });
        }
        if grid.len() < 2 || grid[0][0] != 0.0 || grid.last().unwrap()[0] < lambda {
            return Err(TwistError::BadProfile {
                reason: "grid must start at t = 0 and cover [0, lambda]".into(),
            });
        }
        if grid.windows(2).any(|w| w[1][0] <= w[0][0]) {
            return Err(TwistError::BadProfile {
                reason: "grid abscissae must be strictly increasing".into(),
            });
        }
        Ok(AngleProfile::Tabulated { lambda, grid })
    }

    pub fn lambda(&self) -> f64 {
        match *self {
            AngleProfile::Quadratic { lambda }
            | AngleProfile::Cosine { lambda }
            | AngleProfile::Tabulated { lambda, .. } => lambda,
        }
    }

    pub fn r(&self, t: f64) -> f64 {
        let lambda = self.lambda();
        if t >= lambda {
            return 0.0;
        }
        match self {
            AngleProfile::Quadratic { lambda } => {
                let d = lambda - t;
                -d * d / (4.0 * lambda)
            }
            AngleProfile::Cosine { lambda } => {
                t / 2.0
                    + lambda / std::f64::consts::PI
                        * (std::f64::consts::FRAC_PI_2 * t / lambda).cos()
                    - lambda / 2.0
            }
            AngleProfile::Tabulated { grid, .. } => interpolate(grid, t, 1),
        }
    }

    pub fn r_prime(&self, t: f64) -> f64 {
        let lambda = self.lambda();
        if t >= lambda {
            return 0.0;
        }
        match self {
            AngleProfile::Quadratic { lambda } => (lambda - t) / (2.0 * lambda),
            AngleProfile::Cosine { lambda } => {
                0.5 * (1.0 - (std::f64::consts::FRAC_PI_2 * t / lambda).sin())
            }
            AngleProfile::Tabulated { grid, .. } => interpolate(grid, t, 2),
        }
    }

    /// Second derivative; central finite difference for tabulated profiles.
    pub fn r_second(&self, t: f64) -> f64 {
        let lambda = self.lambda();
        if t >= lambda {
            return 0.0;
        }
        match self {
            AngleProfile::Quadratic { lambda } => -1.0 / (2.0 * lambda),
            AngleProfile::Cosine { lambda } => {
                -std::f64::consts::FRAC_PI_4 / lambda
                    * (std::f64::consts::FRAC_PI_2 * t / lambda).cos()
            }
            AngleProfile::Tabulated { .. } => {
                let h = (lambda * 1e-5).max(1e-9);
                (self.r_prime((t + h).min(lambda)) - self.r_prime((t - h).max(0.0)))
                    / ((t + h).min(lambda) - (t - h).max(0.0))
            }
        }
    }

    /// Samples R′ ≥ 0 and R″ < 0 on [0, λ).
    pub fn is_concave(&self, samples: usize) -> bool {
        let lambda = self.lambda();
        (0..samples).all(|k| {
            let t = lambda * (k as f64) / (samples as f64);
            self.r_prime(t) >= 0.0 && self.r_second(t) < 0.0
        })
    }
}

fn interpolate(grid: &[[f64; 3]], t: f64, col: usize) -> f64 {
    let idx = grid.partition_point(|row| row[0] <= t);
    if idx == 0 {
        return grid[0][col];
    }
    if idx >= grid.len() {
        return grid[grid.len() - 1][col];
    }
    let (lo, hi) = (grid[idx - 1], grid[idx]);
    let s = (t - lo[0]) / (hi[0] - lo[0]);
    lo[col] + s * (hi[col] - lo[col])
}

/// Circle flow σ_t(u,v) = (cos t · u − sin t · |u| v, cos t · v + sin t · u/|u|).
pub fn sigma(pt: &CotangentPoint, t: f64) -> Result<CotangentPoint, TwistError> {
    let mu = pt.covector_norm();
    if mu == 0.0 {
        return Err(TwistError::ZeroSection);
    }
    let (c, s) = (t.cos(), t.sin());
    let n = pt.u.len();
    let mut u = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    for k in 0..n {
        u.push(c * pt.u[k] - s * mu * pt.v[k]);
        v.push(c * pt.v[k] + s * pt.u[k] / mu);
    }
    Ok(CotangentPoint { u, v })
}

/// The model twist: σ at angle 2πR′(|u|) off the zero section, the antipodal
/// map on it, the identity outside the support radius.
pub fn model_twist(pt: &CotangentPoint, prof: &AngleProfile) -> CotangentPoint {
    twist_with_direction(pt, prof, 1.0)
}

/// Inverse model twist (negated angle function, same antipodal extension).
pub fn model_twist_inverse(pt: &CotangentPoint, prof: &AngleProfile) -> CotangentPoint {
    twist_with_direction(pt, prof, -1.0)
}

fn twist_with_direction(pt: &CotangentPoint, prof: &AngleProfile, dir: f64) -> CotangentPoint {
    let mu = pt.covector_norm();
    if mu == 0.0 {
        return CotangentPoint {
            u: pt.u.clone(),
            v: pt.v.iter().map(|x| -x).collect(),
        };
    }
    if mu >= prof.lambda() {
        return pt.clone();
    }
    let angle = dir * 2.0 * std::f64::consts::PI * prof.r_prime(mu);
    sigma(pt, angle).expect("off the zero section")
}

/// The unique intersection of the twisted fiber over `y0` with the fiber
/// over `y1`: solves 2πR′(m) = d(y0, y1) by bisection (R′ is strictly
/// decreasing for concave profiles) and rebuilds the point in closed form.
pub fn fiber_intersection(
    y0: &[f64],
    y1: &[f64],
    prof: &AngleProfile,
    tol: &Tol,
) -> Result<CotangentPoint, TwistError> {
    if (norm(y0) - 1.0).abs() > 1e-9 || (norm(y1) - 1.0).abs() > 1e-9 {
        return Err(TwistError::InvalidPoint {
            reason: "base points must be unit vectors".into(),
        });
    }
    let d = sphere_distance(y0, y1);
    let two_pi = 2.0 * std::f64::consts::PI;
    if d > two_pi * prof.r_prime(0.0) + 1e-12 {
        return Err(TwistError::NoSolution { angle: d });
    }
    let lambda = prof.lambda();
    // bisection on f(m) = 2πR′(m) − d over [0, λ]
    let mut lo = 0.0f64;
    let mut hi = lambda;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let f = two_pi * prof.r_prime(mid) - d;
        if f.abs() < tol.solver * 1e-2 {
            lo = mid;
            hi = mid;
            break;
        }
        if f > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    let m = 0.5 * (lo + hi);
    let theta = two_pi * prof.r_prime(m);

    // z = σ_θ(m·û, y0) with û chosen so the rotated base lands on y1.
    let n = y0.len();
    let cos_t = theta.cos();
    let sin_t = theta.sin();
    let u_hat: Vec<f64> = if sin_t.abs() > 1e-9 {
        (0..n).map(|k| (y1[k] - cos_t * y0[k]) / sin_t).collect()
    } else if d < 1e-9 {
        // y1 = y0 and θ = 0: support-edge fiber point; pick a deterministic
        // direction orthogonal to y0.
        orthogonal_direction(y0)
    } else {
        // antipodal case: m = 0 and the covector vanishes
        vec![0.0; n]
    };
    let u: Vec<f64> = (0..n)
        .map(|k| m * (cos_t * u_hat[k] - sin_t * y0[k]))
        .collect();
    let v: Vec<f64> = y1.to_vec();
    CotangentPoint::new(u, v, &Tol::new(1e-6, tol.relation, tol.solver))
}

fn orthogonal_direction(y: &[f64]) -> Vec<f64> {
    let n = y.len();
    // seed with the coordinate axis least aligned with y, then project
    let (axis, _) = y
        .iter()
        .enumerate()
        .map(|(k, c)| (k, c.abs()))
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .unwrap();
    let mut e = vec![0.0; n];
    e[axis] = 1.0;
    let ip = dot(&e, y);
    for k in 0..n {
        e[k] -= ip * y[k];
    }
    let en = norm(&e);
    e.iter().map(|x| x / en).collect()
}

/// Area profile of the twist: K(μ) = 2π(R′(μ)·μ − R(μ)).
pub fn area_k(mu: f64, prof: &AngleProfile) -> f64 {
    2.0 * std::f64::consts::PI * (prof.r_prime(mu) * mu - prof.r(mu))
}

/// Counts solution clusters of the fiber-intersection problem by sweeping
/// covector directions over the fiber at `y0`: for each direction the
/// rotation angle is optimized in closed form, the matching covector norm is
/// recovered from the profile, and the candidate is confirmed by running the
/// actual twist map. The twisted and untwisted fibers intersect once for
/// concave profiles and base points in general position, so a count above 1
/// flags a spurious solution. Degenerate pairs (equal base points) hit along
/// a whole sphere and are outside the census.
pub fn fiber_intersection_clusters(
    y0: &[f64],
    y1: &[f64],
    prof: &AngleProfile,
    n_dir: usize,
    hit_tol: f64,
    link_radius: f64,
) -> usize {
    let lambda = prof.lambda();
    let dirs = tangent_directions(y0, n_dir);
    let two_pi = 2.0 * std::f64::consts::PI;
    let c1 = dot(y0, y1);
    let mut hits: Vec<CotangentPoint> = Vec::new();
    for dir in &dirs {
        // base of the twisted point: cos(θ)·y0 + sin(θ)·û; best θ in [0, π]
        let c2 = dot(dir, y1);
        let theta = c2.atan2(c1).clamp(0.0, std::f64::consts::PI);
        // invert θ = 2πR′(m) by bisection
        let (mut lo, mut hi) = (0.0f64, lambda);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if two_pi * prof.r_prime(mid) > theta {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let m = 0.5 * (lo + hi);
        let p = CotangentPoint {
            u: dir.iter().map(|c| m * c).collect(),
            v: y0.to_vec(),
        };
        let tp = model_twist(&p, prof);
        if fiber_miss(&tp, y1) < hit_tol {
            hits.push(tp);
        }
    }
    cluster_count(&hits, link_radius)
}

/// Distance of a point to the fiber over y1 (base deviation).
fn fiber_miss(p: &CotangentPoint, y1: &[f64]) -> f64 {
    p.v.iter()
        .zip(y1)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Deterministic spread of unit directions orthogonal to y (generalized
/// Fibonacci spiral in the tangent hyperplane).
fn tangent_directions(y: &[f64], count: usize) -> Vec<Vec<f64>> {
    let n = y.len();
    // orthonormal basis of y-perp by Gram-Schmidt over the coordinate axes
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for axis in 0..n {
        let mut e = vec![0.0; n];
        e[axis] = 1.0;
        let ip = dot(&e, y);
        for k in 0..n {
            e[k] -= ip * y[k];
        }
        for b in &basis {
            let ip = dot(&e, b);
            for k in 0..n {
                e[k] -= ip * b[k];
            }
        }
        let en = norm(&e);
        if en > 1e-8 {
            basis.push(e.iter().map(|x| x / en).collect());
        }
        if basis.len() == n - 1 {
            break;
        }
    }
    let dim = basis.len();
    let golden = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
    (0..count)
        .map(|i| {
            // low-discrepancy point on S^{dim-1}
            let mut c = vec![0.0; dim];
            match dim {
                1 => c[0] = if i % 2 == 0 { 1.0 } else { -1.0 },
                2 => {
                    let a = golden * i as f64;
                    c[0] = a.cos();
                    c[1] = a.sin();
                }
                _ => {
                    let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
                    let r = (1.0 - z * z).sqrt();
                    let a = golden * i as f64;
                    c[0] = r * a.cos();
                    c[1] = r * a.sin();
                    c[2] = z;
                    // spill any extra dimensions with deterministic phases
                    for (j, cj) in c.iter_mut().enumerate().skip(3) {
                        *cj = ((i as f64 + 1.0) * (j as f64 + 1.0)).sin() * 0.5;
                    }
                    let cn = norm(&c);
                    for cj in c.iter_mut() {
                        *cj /= cn;
                    }
                }
            }
            let mut dir = vec![0.0; n];
            for (cj, b) in c.iter().zip(&basis) {
                for k in 0..n {
                    dir[k] += cj * b[k];
                }
            }
            dir
        })
        .collect()
}

fn cluster_count(points: &[CotangentPoint], link_radius: f64) -> usize {
    let n = points.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if points[i].dist(&points[j]) < link_radius {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri] = rj;
                }
            }
        }
    }
    (0..n).filter(|&i| find(&mut parent, i) == i).count()
}
