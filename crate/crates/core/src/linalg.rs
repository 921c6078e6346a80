//! Closed-form 2x2 linear algebra.

#[allow(unused_imports)]
use num_traits::Float;

pub type Mat2 = [[f64; 2]; 2];

pub fn det(m: &Mat2) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

pub fn solve(m: &Mat2, b: [f64; 2]) -> Option<[f64; 2]> {
    let d = det(m);
    let scale = m.iter().flatten().fold(0.0_f64, |a, v| a.max(v.abs()));
    if d.abs() <= 1e-14 * scale * scale || !d.is_finite() {
        return None;
    }
    Some([
        (b[0] * m[1][1] - m[0][1] * b[1]) / d,
        (m[0][0] * b[1] - b[0] * m[1][0]) / d,
    ])
}

pub fn mul_vec(m: &Mat2, v: [f64; 2]) -> [f64; 2] {
    [
        m[0][0] * v[0] + m[0][1] * v[1],
        m[1][0] * v[0] + m[1][1] * v[1],
    ]
}

/// Eigen-decomposition of a real 2x2 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eigen2 {
    pub re: [f64; 2],
    pub im: [f64; 2],
    /// Unit eigenvectors for a real spectrum (ordered like `re`, ascending).
    /// For a complex pair these are the normalized real and imaginary parts of
    /// the eigenvector belonging to `re[0] + i im[0]`.
    pub vectors: [[f64; 2]; 2],
}

pub fn eigen(m: &Mat2) -> Eigen2 {
    let tr = m[0][0] + m[1][1];
    let dt = det(m);
    let half = 0.5 * tr;
    let disc = half * half - dt;
    if disc >= 0.0 {
        let s = disc.sqrt();
        // Avoid cancellation for the smaller-magnitude root.
        let (l1, l2) = if half >= 0.0 {
            let big = half + s;
            (if big != 0.0 { dt / big } else { 0.0 }, big)
        } else {
            let big = half - s;
            (big, if big != 0.0 { dt / big } else { 0.0 })
        };
        let (lo, hi) = if l1 <= l2 { (l1, l2) } else { (l2, l1) };
        Eigen2 {
            re: [lo, hi],
            im: [0.0, 0.0],
            vectors: [real_vector(m, lo), real_vector(m, hi)],
        }
    } else {
        let w = (-disc).sqrt();
        // (A - lambda I) v = 0 with lambda = half + i w, take v = (m01, lambda - m00).
        let (vr, vi) = if m[0][1].abs() >= m[1][0].abs() {
            ([m[0][1], half - m[0][0]], [0.0, w])
        } else {
            ([half - m[1][1], m[1][0]], [w, 0.0])
        };
        Eigen2 {
            re: [half, half],
            im: [w, -w],
            vectors: [unit(vr), unit(vi)],
        }
    }
}

fn real_vector(m: &Mat2, lambda: f64) -> [f64; 2] {
    let a = m[0][0] - lambda;
    let b = m[0][1];
    let c = m[1][0];
    let d = m[1][1] - lambda;
    // Pick the better-conditioned row of (A - lambda I).
    let v = if a.abs() + b.abs() >= c.abs() + d.abs() {
        [b, -a]
    } else {
        [d, -c]
    };
    if v[0] == 0.0 && v[1] == 0.0 {
        // A = lambda I: any direction is an eigenvector.
        return [1.0, 0.0];
    }
    unit(v)
}

pub fn unit(v: [f64; 2]) -> [f64; 2] {
    let n = v[0].hypot(v[1]);
    if n == 0.0 {
        v
    } else {
        [v[0] / n, v[1] / n]
    }
}
