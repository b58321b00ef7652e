//! 2-vectors and 2x2 matrices.

pub type Vec2 = [f64; 2];
pub type Mat2 = [[f64; 2]; 2];

pub const ZERO2: Mat2 = [[0.0; 2]; 2];
pub const IDENT2: Mat2 = [[1.0, 0.0], [0.0, 1.0]];

pub fn outer(a: Vec2, b: Vec2) -> Mat2 {
    [[a[0] * b[0], a[0] * b[1]], [a[1] * b[0], a[1] * b[1]]]
}

pub fn scale(a: Mat2, s: f64) -> Mat2 {
    [[a[0][0] * s, a[0][1] * s], [a[1][0] * s, a[1][1] * s]]
}

pub fn add(a: Mat2, b: Mat2) -> Mat2 {
    [
        [a[0][0] + b[0][0], a[0][1] + b[0][1]],
        [a[1][0] + b[1][0], a[1][1] + b[1][1]],
    ]
}

pub fn sub(a: Mat2, b: Mat2) -> Mat2 {
    add(a, scale(b, -1.0))
}

pub fn vscale(a: Vec2, s: f64) -> Vec2 {
    [a[0] * s, a[1] * s]
}

pub fn vadd(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] + b[0], a[1] + b[1]]
}

pub fn norm(a: Vec2) -> f64 {
    a[0].hypot(a[1])
}

pub fn trace(a: Mat2) -> f64 {
    a[0][0] + a[1][1]
}

/// Symmetric part.
pub fn sym(a: Mat2) -> Mat2 {
    let o = 0.5 * (a[0][1] + a[1][0]);
    [[a[0][0], o], [o, a[1][1]]]
}

/// Largest absolute entry.
pub fn max_abs(a: Mat2) -> f64 {
    a.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn eig_sym(a: Mat2) -> [f64; 2] {
    let m = 0.5 * (a[0][0] + a[1][1]);
    let d = 0.5 * (a[0][0] - a[1][1]);
    let r = d.hypot(a[0][1]);
    [m - r, m + r]
}
