//! Real 2x2 matrices acting on the upper half-plane.

use num_complex::Complex64;

pub type Mat2 = [[f64; 2]; 2];

pub const IDENTITY: Mat2 = [[1.0, 0.0], [0.0, 1.0]];

pub fn mul(a: &Mat2, b: &Mat2) -> Mat2 {
    [
        [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
        [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
    ]
}

/// Inverse of a determinant-one matrix.
pub fn inverse(a: &Mat2) -> Mat2 {
    [[a[1][1], -a[0][1]], [-a[1][0], a[0][0]]]
}

pub fn trace(a: &Mat2) -> f64 {
    a[0][0] + a[1][1]
}

pub fn det(a: &Mat2) -> f64 {
    a[0][0] * a[1][1] - a[0][1] * a[1][0]
}

pub fn power(a: &Mat2, m: u32) -> Mat2 {
    (0..m).fold(IDENTITY, |acc, _| mul(&acc, a))
}

pub fn conj(h: &Mat2, g: &Mat2) -> Mat2 {
    mul(&mul(h, g), &inverse(h))
}

pub fn frobenius_sq(a: &Mat2) -> f64 {
    a.iter().flatten().map(|v| v * v).sum()
}

/// Distance in PSL(2,R): min over the sign of the entrywise max difference.
pub fn psl_distance(a: &Mat2, b: &Mat2) -> f64 {
    let mut plus: f64 = 0.0;
    let mut minus: f64 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            plus = plus.max((a[i][j] - b[i][j]).abs());
            minus = minus.max((a[i][j] + b[i][j]).abs());
        }
    }
    plus.min(minus)
}

/// Hyperbolic displacement `d(i, g i)`.
pub fn displacement(a: &Mat2) -> f64 {
    (0.5 * frobenius_sq(a)).max(1.0).acosh()
}

pub fn apply(a: &Mat2, z: Complex64) -> Complex64 {
    (z * a[0][0] + a[0][1]) / (z * a[1][0] + a[1][1])
}

pub fn derivative(a: &Mat2, z: Complex64) -> Complex64 {
    let d = z * a[1][0] + a[1][1];
    1.0 / (d * d)
}

/// Real fixed points of a hyperbolic element, `(repelling, attracting)`;
/// `None` stands for the point at infinity.
pub fn fixed_points(g: &Mat2) -> (Option<f64>, Option<f64>) {
    let [[a, b], [c, d]] = *g;
    if c.abs() < 1e-300 {
        let x = b / (d - a);
        // z -> (a/d) z + b/d: infinity attracts iff |a/d| > 1
        return if (a / d).abs() > 1.0 { (Some(x), None) } else { (None, Some(x)) };
    }
    let disc = ((d - a) * (d - a) + 4.0 * b * c).max(0.0).sqrt();
    let r1 = (a - d + disc) / (2.0 * c);
    let r2 = (a - d - disc) / (2.0 * c);
    let att = |x: f64| (c * x + d).powi(2) > 1.0;
    if att(r1) {
        (Some(r2), Some(r1))
    } else {
        (Some(r1), Some(r2))
    }
}

/// An orientation-preserving Mobius map sending `i e^s` onto the axis of `g`,
/// with `s -> -inf` at the repelling point.
pub fn axis_frame(g: &Mat2) -> Mat2 {
    match fixed_points(g) {
        (Some(x1), Some(x2)) => {
            if x2 > x1 {
                let k = (x2 - x1).sqrt();
                [[x2 / k, x1 / k], [1.0 / k, 1.0 / k]]
            } else {
                let k = (x1 - x2).sqrt();
                [[x2 / k, -x1 / k], [1.0 / k, -1.0 / k]]
            }
        }
        (Some(x), None) => [[1.0, x], [0.0, 1.0]],
        // z -> x - 1/z sends i e^s to x + i e^{-s}
        (None, Some(x)) => [[x, -1.0], [1.0, 0.0]],
        (None, None) => IDENTITY,
    }
}
