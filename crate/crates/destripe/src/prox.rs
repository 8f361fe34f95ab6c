//! Closed-form proximal and dual-projection operators for the penalty terms
//! used by the solvers: l1 sparsity, box constraints, per-voxel l2 ball
//! projection (dual of the isotropic l2,1 norm), the conjugate prox of a
//! shifted l1 term, and the Huber function.

/// Soft threshold `sign(x) * max(|x| - lambda, 0)`.
#[inline]
pub fn soft_threshold(x: f64, lambda: f64) -> f64 {
    if x > lambda {
        x - lambda
    } else if x < -lambda {
        x + lambda
    } else {
        0.0
    }
}

/// Element-wise prox of `lambda * |x|`.
pub fn prox_l1(field: &mut [f64], lambda: f64) {
    for v in field {
        *v = soft_threshold(*v, lambda);
    }
}

/// Element-wise clamp to [0, 1]; the prox of the unit-box indicator.
pub fn project_box01(field: &mut [f64]) {
    for v in field {
        *v = v.clamp(0.0, 1.0);
    }
}

/// Per-voxel projection of gradient vectors onto the l2 ball of `radius`.
///
/// `planes` holds `n_channels` concatenated planes of equal length; the
/// vector at voxel i collects element i of every plane. Each vector g maps
/// to `g / max(1, |g|_2 / radius)`.
pub fn project_l2_ball_groups(planes: &mut [f64], n_channels: usize, radius: f64) {
    assert!(n_channels > 0 && planes.len() % n_channels == 0);
    let plane = planes.len() / n_channels;
    for i in 0..plane {
        let mut sq = 0.0;
        for c in 0..n_channels {
            let v = planes[c * plane + i];
            sq += v * v;
        }
        let norm = sq.sqrt();
        if norm > radius {
            let scale = radius / norm;
            for c in 0..n_channels {
                planes[c * plane + i] *= scale;
            }
        }
    }
}

/// Prox of `sigma * f*` where `f(q) = |b - q|_1`: element-wise
/// `clamp(y - sigma * b, -1, 1)` (the Moreau conjugate of the shifted l1).
pub fn prox_conjugate_l1_shifted(y: &mut [f64], sigma: f64, shift: &[f64]) {
    debug_assert_eq!(y.len(), shift.len());
    for (v, &b) in y.iter_mut().zip(shift) {
        *v = (*v - sigma * b).clamp(-1.0, 1.0);
    }
}

/// Scalar prox of `lambda * phi_eps` where `phi_eps` is the Huber function
/// (`x^2 / (2 eps)` inside `|x| <= eps`, `|x| - eps/2` outside).
///
/// Branch analysis on the 1D optimality condition: the quadratic region
/// shrinks by `1 / (1 + lambda/eps)`, the linear region soft-thresholds.
#[inline]
pub fn prox_huber_scalar(x: f64, lambda: f64, eps: f64) -> f64 {
    debug_assert!(lambda > 0.0 && eps > 0.0);
    if x.abs() <= eps + lambda {
        x / (1.0 + lambda / eps)
    } else {
        x - lambda * x.signum()
    }
}

/// Element-wise prox of `lambda * phi_eps`.
pub fn prox_huber(field: &mut [f64], lambda: f64, eps: f64) {
    for v in field {
        *v = prox_huber_scalar(*v, lambda, eps);
    }
}
