//! Small fixed-size vector helpers.

pub type V3 = [f64; 3];

#[inline]
pub fn sub(a: V3, b: V3) -> V3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn add(a: V3, b: V3) -> V3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn scale(s: f64, a: V3) -> V3 {
    [s * a[0], s * a[1], s * a[2]]
}

#[inline]
pub fn dot3(a: V3, b: V3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross(a: V3, b: V3) -> V3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

#[inline]
pub fn norm3(a: V3) -> f64 {
    dot3(a, a).sqrt()
}

#[inline]
pub fn unit(a: V3) -> V3 {
    scale(1.0 / norm3(a), a)
}

/// Six times the signed volume of the tetrahedron (a, b, c, d).
#[inline]
pub fn det6(a: V3, b: V3, c: V3, d: V3) -> f64 {
    dot3(sub(b, a), cross(sub(c, a), sub(d, a)))
}

/// Inverse of a 3x3 matrix given by rows; returns (inverse rows, determinant).
pub fn inv3(m: [V3; 3]) -> ([V3; 3], f64) {
    let det = dot3(m[0], cross(m[1], m[2]));
    let c0 = cross(m[1], m[2]);
    let c1 = cross(m[2], m[0]);
    let c2 = cross(m[0], m[1]);
    // columns of the inverse are c_i / det
    let inv = [
        [c0[0] / det, c1[0] / det, c2[0] / det],
        [c0[1] / det, c1[1] / det, c2[1] / det],
        [c0[2] / det, c1[2] / det, c2[2] / det],
    ];
    (inv, det)
}

/// An orthonormal pair completing `n` to a right-handed frame.
pub fn tangent_frame(n: V3) -> (V3, V3) {
    let a = if n[0].abs() <= n[1].abs() && n[0].abs() <= n[2].abs() {
        [1.0, 0.0, 0.0]
    } else if n[1].abs() <= n[2].abs() {
        [0.0, 1.0, 0.0]
    } else {
        [0.0, 0.0, 1.0]
    };
    let t1 = unit(cross(n, a));
    let t2 = cross(n, t1);
    (t1, t2)
}
