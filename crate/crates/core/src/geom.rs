//! Fixed-size vector helpers for points in 1, 2 or 3 spatial dimensions.
//!
//! Vectors are stored as `[f64; 3]` with unused trailing components kept at
//! zero, so norms and dot products can loop over all three lanes regardless
//! of the active dimension.

pub type Vect = [f64; 3];

pub const ZERO: Vect = [0.0, 0.0, 0.0];

#[inline]
pub fn dot(a: &Vect, b: &Vect) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn norm(a: &Vect) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn add(a: &Vect, b: &Vect) -> Vect {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub(a: &Vect, b: &Vect) -> Vect {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn scale(a: &Vect, s: f64) -> Vect {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn axpy(a: &Vect, s: f64, b: &Vect) -> Vect {
    [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]]
}

#[inline]
pub fn lerp(a: &Vect, b: &Vect, f: f64) -> Vect {
    [
        a[0] + f * (b[0] - a[0]),
        a[1] + f * (b[1] - a[1]),
        a[2] + f * (b[2] - a[2]),
    ]
}

#[inline]
pub fn dist(a: &Vect, b: &Vect) -> f64 {
    norm(&sub(a, b))
}

pub fn is_finite(a: &Vect) -> bool {
    a.iter().all(|c| c.is_finite())
}

/// Normalize the first `dim` components to a unit vector; zero input falls
/// back to the first coordinate axis.
pub fn unit(a: &Vect, dim: usize) -> Vect {
    let mut out = ZERO;
    let n = norm(a);
    if n == 0.0 {
        out[0] = 1.0;
        return out;
    }
    for k in 0..dim {
        out[k] = a[k] / n;
    }
    out
}
