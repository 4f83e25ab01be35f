//! SU(2) as unit quaternions and su(2) as 3-vectors.
//!
//! A group element is a unit quaternion q = w + x·i + y·j + z·k; the matrix
//! picture is available through [`Su2::to_matrix`] for debugging only. An
//! algebra element is the coefficient vector of a pure-imaginary quaternion,
//! and carries the pairing ⟨a,b⟩ = −Tr(ab), so that the squared norm of
//! (ξ₁, ξ₂, ξ₃) is 2(ξ₁² + ξ₂² + ξ₃²). With this convention the exponential
//! is a bijection from the open ball of radius π√2 onto SU(2) ∖ {−I}.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Radius of the principal ball: |log g| < π√2 for every g ≠ −I.
pub const PI_SQRT2: f64 = std::f64::consts::PI * std::f64::consts::SQRT_2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Su2Error {
    /// log is undefined at −I.
    #[error("logarithm is singular at -I (distance {dist:.3e})")]
    SingularLog { dist: f64 },
    /// A quaternion whose norm is too far from 1 to renormalize honestly.
    #[error("quaternion norm {norm} is not close to 1")]
    NotUnit { norm: f64 },
}

/// Group element: unit quaternion (w, x, y, z).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct Su2 {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl From<Su2> for [f64; 4] {
    fn from(q: Su2) -> Self {
        [q.w, q.x, q.y, q.z]
    }
}

impl TryFrom<[f64; 4]> for Su2 {
    type Error = Su2Error;
    fn try_from(c: [f64; 4]) -> Result<Self, Su2Error> {
        Su2::new(c[0], c[1], c[2], c[3])
    }
}

impl Su2 {
    pub const IDENTITY: Su2 = Su2 {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub const MINUS_IDENTITY: Su2 = Su2 {
        w: -1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    /// Builds a group element from quaternion coordinates, renormalizing.
    /// Rejects inputs whose norm deviates from 1 by more than 1e-6.
    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Result<Su2, Su2Error> {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        if !(n.is_finite() && (n - 1.0).abs() < 1e-6) {
            return Err(Su2Error::NotUnit { norm: n });
        }
        Ok(Su2 {
            w: w / n,
            x: x / n,
            y: y / n,
            z: z / n,
        })
    }

    /// Same, but accepts any nonzero quaternion (used by tests and samplers).
    pub fn from_unnormalized(w: f64, x: f64, y: f64, z: f64) -> Su2 {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        Su2 {
            w: w / n,
            x: x / n,
            y: y / n,
            z: z / n,
        }
    }

    fn renormalized(self) -> Su2 {
        let n = (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt();
        Su2 {
            w: self.w / n,
            x: self.x / n,
            y: self.y / n,
            z: self.z / n,
        }
    }

    /// Group product, renormalized after every multiplication.
    pub fn mul(self, o: Su2) -> Su2 {
        let (a0, a1, a2, a3) = (self.w, self.x, self.y, self.z);
        let (b0, b1, b2, b3) = (o.w, o.x, o.y, o.z);
        Su2 {
            w: a0 * b0 - a1 * b1 - a2 * b2 - a3 * b3,
            x: a0 * b1 + a1 * b0 + a2 * b3 - a3 * b2,
            y: a0 * b2 - a1 * b3 + a2 * b0 + a3 * b1,
            z: a0 * b3 + a1 * b2 - a2 * b1 + a3 * b0,
        }
        .renormalized()
    }

    /// Inverse (= quaternion conjugate on the unit sphere).
    pub fn inv(self) -> Su2 {
        Su2 {
            w: self.w,
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }

    pub fn neg(self) -> Su2 {
        Su2 {
            w: -self.w,
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }

    /// Integer power by repeated squaring.
    pub fn powi(self, n: i64) -> Su2 {
        if n < 0 {
            return self.inv().powi(-n);
        }
        let mut acc = Su2::IDENTITY;
        let mut base = self;
        let mut k = n;
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.mul(base);
            }
            base = base.mul(base);
            k >>= 1;
        }
        acc
    }

    /// A·B·A⁻¹·B⁻¹.
    pub fn commutator(a: Su2, b: Su2) -> Su2 {
        a.mul(b).mul(a.inv()).mul(b.inv())
    }

    /// Conjugation g·h·g⁻¹.
    pub fn conj_by(self, g: Su2) -> Su2 {
        g.mul(self).mul(g.inv())
    }

    /// Euclidean 4-distance; both arguments are unit quaternions.
    pub fn dist(self, o: Su2) -> f64 {
        let dw = self.w - o.w;
        let dx = self.x - o.x;
        let dy = self.y - o.y;
        let dz = self.z - o.z;
        (dw * dw + dx * dx + dy * dy + dz * dz).sqrt()
    }

    pub fn approx_eq(self, o: Su2, tol: f64) -> bool {
        self.dist(o) <= tol
    }

    /// Rotation angle of the conjugacy class, in [0, π]. Two elements are
    /// conjugate iff their angles agree; the angle of −I is π.
    pub fn conjugacy_angle(self) -> f64 {
        let vn = (self.x * self.x + self.y * self.y + self.z * self.z).sqrt();
        vn.atan2(self.w)
    }

    /// Adjoint action on the algebra: Ad_g ξ = g ξ g⁻¹ as pure quaternions.
    pub fn adjoint(self, xi: Su2Vector) -> Su2Vector {
        // (0, xi) conjugated by self; the real part stays 0 to rounding.
        let (a0, a1, a2, a3) = (self.w, self.x, self.y, self.z);
        let (b1, b2, b3) = (xi.x, xi.y, xi.z);
        // p = q * (0, b)
        let p0 = -a1 * b1 - a2 * b2 - a3 * b3;
        let p1 = a0 * b1 + a2 * b3 - a3 * b2;
        let p2 = a0 * b2 - a1 * b3 + a3 * b1;
        let p3 = a0 * b3 + a1 * b2 - a2 * b1;
        // r = p * q⁻¹
        let (c0, c1, c2, c3) = (a0, -a1, -a2, -a3);
        Su2Vector {
            x: p0 * c1 + p1 * c0 + p2 * c3 - p3 * c2,
            y: p0 * c2 - p1 * c3 + p2 * c0 + p3 * c1,
            z: p0 * c3 + p1 * c2 - p2 * c1 + p3 * c0,
        }
    }

    /// Lie-group logarithm. Fails on (a neighborhood of) −I.
    pub fn log(self) -> Result<Su2Vector, Su2Error> {
        let dist = self.dist(Su2::MINUS_IDENTITY);
        if dist <= 1e-9 {
            return Err(Su2Error::SingularLog { dist });
        }
        let vn = (self.x * self.x + self.y * self.y + self.z * self.z).sqrt();
        if vn < 1e-300 {
            return Ok(Su2Vector::ZERO);
        }
        let angle = vn.atan2(self.w);
        let f = angle / vn;
        Ok(Su2Vector {
            x: f * self.x,
            y: f * self.y,
            z: f * self.z,
        })
    }

    /// 2×2 complex matrix form [[w+zi, y+xi], [−y+xi, w−zi]], entries as
    /// (re, im) pairs. Debug aid only.
    pub fn to_matrix(self) -> [[(f64, f64); 2]; 2] {
        [
            [(self.w, self.z), (self.y, self.x)],
            [(-self.y, self.x), (self.w, -self.z)],
        ]
    }

    /// Haar-uniform sample (uniform on S³).
    pub fn haar<R: Rng + ?Sized>(rng: &mut R) -> Su2 {
        loop {
            let w = standard_normal(rng);
            let x = standard_normal(rng);
            let y = standard_normal(rng);
            let z = standard_normal(rng);
            let n2 = w * w + x * x + y * y + z * z;
            if n2 > 1e-12 {
                return Su2::from_unnormalized(w, x, y, z);
            }
        }
    }
}

// Box-Muller; keeps the dependency list to `rand` itself.
fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Algebra element: coefficients of a pure-imaginary quaternion.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Su2Vector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl From<[f64; 3]> for Su2Vector {
    fn from(c: [f64; 3]) -> Self {
        Su2Vector {
            x: c[0],
            y: c[1],
            z: c[2],
        }
    }
}

impl From<Su2Vector> for [f64; 3] {
    fn from(v: Su2Vector) -> Self {
        [v.x, v.y, v.z]
    }
}

impl Su2Vector {
    pub const ZERO: Su2Vector = Su2Vector {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub fn new(x: f64, y: f64, z: f64) -> Su2Vector {
        Su2Vector { x, y, z }
    }

    /// Norm from ⟨a,b⟩ = −Tr(ab): √2 times the euclidean length, so that
    /// |log(−I)| = π√2.
    pub fn norm(self) -> f64 {
        std::f64::consts::SQRT_2 * self.euclid_norm()
    }

    pub fn euclid_norm(self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn add(self, o: Su2Vector) -> Su2Vector {
        Su2Vector {
            x: self.x + o.x,
            y: self.y + o.y,
            z: self.z + o.z,
        }
    }

    pub fn sub(self, o: Su2Vector) -> Su2Vector {
        Su2Vector {
            x: self.x - o.x,
            y: self.y - o.y,
            z: self.z - o.z,
        }
    }

    pub fn neg(self) -> Su2Vector {
        Su2Vector {
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }

    pub fn scale(self, t: f64) -> Su2Vector {
        Su2Vector {
            x: t * self.x,
            y: t * self.y,
            z: t * self.z,
        }
    }

    pub fn dist(self, o: Su2Vector) -> f64 {
        self.sub(o).euclid_norm()
    }

    /// Lie-group exponential: exp maps the open ball |ξ| < π√2 bijectively
    /// onto SU(2) ∖ {−I}, and the sphere |ξ| = π√2 to −I.
    pub fn exp(self) -> Su2 {
        let r = self.euclid_norm();
        let (c, s) = if r < 1e-8 {
            // sin(r)/r to second order
            (1.0 - r * r / 2.0, 1.0 - r * r / 6.0)
        } else {
            (r.cos(), r.sin() / r)
        };
        Su2::from_unnormalized(c, s * self.x, s * self.y, s * self.z)
    }

    /// Uniform sample in the closed ball of paper-norm `frac` · π√2.
    pub fn random_in_ball<R: Rng + ?Sized>(rng: &mut R, frac: f64) -> Su2Vector {
        let max_euclid = frac * std::f64::consts::PI;
        loop {
            let x = rng.gen_range(-max_euclid..=max_euclid);
            let y = rng.gen_range(-max_euclid..=max_euclid);
            let z = rng.gen_range(-max_euclid..=max_euclid);
            let v = Su2Vector { x, y, z };
            if v.euclid_norm() <= max_euclid {
                return v;
            }
        }
    }
}
