//! Axis-angle helpers.

use nalgebra::{Matrix3, Vector3};

/// Below this angle the Rodrigues formula switches to its Taylor series.
pub const SMALL_ANGLE: f64 = 1e-8;

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Rotation matrix for an axis-angle vector (radians).
pub fn rodrigues(w: &Vector3<f64>) -> Matrix3<f64> {
    let angle = w.norm();
    let k = skew(w);
    if angle < SMALL_ANGLE {
        // exp([w]x) = I + [w]x + [w]x^2 / 2 + O(|w|^3)
        return Matrix3::identity() + k + 0.5 * k * k;
    }
    let a = angle.sin() / angle;
    let b = (1.0 - angle.cos()) / (angle * angle);
    Matrix3::identity() + a * k + b * k * k
}

/// Inverse of [`rodrigues`] for a proper rotation matrix.
pub fn log_rotation(r: &Matrix3<f64>) -> Vector3<f64> {
    let cos = ((r.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let angle = cos.acos();
    let v = Vector3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]);
    if angle < 1e-6 {
        return 0.5 * v;
    }
    if std::f64::consts::PI - angle < 1e-6 {
        // Near pi the antisymmetric part vanishes; read the axis off R + I.
        let m = r + Matrix3::identity();
        let col = (0..3)
            .map(|c| m.column(c).into_owned())
            .max_by(|a, b| a.norm().total_cmp(&b.norm()))
            .unwrap_or_else(Vector3::x);
        let axis = col.normalize();
        let sign = if axis.dot(&v) < 0.0 { -1.0 } else { 1.0 };
        return sign * angle * axis;
    }
    v * (angle / (2.0 * angle.sin()))
}

/// Geodesic angle between two rotations.
pub fn rotation_angle_between(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    let rel = a.transpose() * b;
    let cos = ((rel.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    // acos loses precision near zero; the antisymmetric part does not.
    let v = Vector3::new(
        rel[(2, 1)] - rel[(1, 2)],
        rel[(0, 2)] - rel[(2, 0)],
        rel[(1, 0)] - rel[(0, 1)],
    );
    (0.5 * v.norm()).atan2(cos)
}

/// Closest proper rotation to `m` in the Frobenius sense.
pub fn nearest_rotation(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let u = svd.u.expect("svd u requested");
    let v_t = svd.v_t.expect("svd v_t requested");
    let d = (u * v_t).determinant().signum();
    let fix = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d));
    u * fix * v_t
}

/// Checks orthonormality and unit determinant to `tol`.
pub fn is_rotation(r: &Matrix3<f64>, tol: f64) -> bool {
    let e = r.transpose() * r - Matrix3::identity();
    e.amax() <= tol && (r.determinant() - 1.0).abs() <= tol
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Rotation3;

    #[test]
    fn rodrigues_matches_nalgebra() {
        for w in [
            Vector3::new(0.3, -0.2, 0.9),
            Vector3::new(1e-10, 0.0, -2e-10),
            Vector3::new(0.0, 3.0, 0.0),
        ] {
            let ours = rodrigues(&w);
            let theirs = Rotation3::new(w).into_inner();
            assert!((ours - theirs).amax() < 1e-14, "{w:?}");
        }
    }

    #[test]
    fn log_inverts_exp() {
        for w in [
            Vector3::new(0.3, -0.2, 0.9),
            Vector3::new(1e-9, 0.0, 0.0),
            Vector3::new(0.0, 0.0, std::f64::consts::PI - 1e-8),
            Vector3::new(-1.0, 2.0, 0.5).normalize() * 2.5,
        ] {
            let back = log_rotation(&rodrigues(&w));
            assert!((back - w).norm() < 1e-6, "{w:?} -> {back:?}");
        }
    }

    #[test]
    fn nearest_rotation_projects() {
        let r = rodrigues(&Vector3::new(0.4, 0.1, -0.3));
        let noisy = r * 3.0 + Matrix3::new(0.01, 0.0, 0.0, 0.0, -0.02, 0.0, 0.0, 0.0, 0.005);
        let p = nearest_rotation(&noisy);
        assert!(is_rotation(&p, 1e-12));
        assert!(rotation_angle_between(&p, &r) < 0.01);
    }

    #[test]
    fn small_angle_between() {
        let a = rodrigues(&Vector3::new(0.1, 0.2, 0.3));
        let b = a * rodrigues(&Vector3::new(1e-9, 0.0, 0.0));
        assert!((rotation_angle_between(&a, &b) - 1e-9).abs() < 1e-15);
    }
}
