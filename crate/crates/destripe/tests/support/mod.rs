//! Shared helpers for integration tests: independent numeric oracles
//! (golden-section prox minimization, projected-subgradient descent on the
//! destriping objective, power iteration) and synthetic data builders.
//!
//! Oracles here deliberately avoid the library's operator implementations
//! wherever they are used to check one.

#![allow(dead_code)]

use destripe::gsr::GsrParams;
use destripe::synth::{PhantomSpec, PhantomStructure, StripeLength, StripeSpec};
use destripe::volume::{Dims, Volume};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn random_unit_volume(dims: Dims, rng: &mut ChaCha8Rng) -> Volume {
    let data: Vec<f64> = (0..dims.len()).map(|_| rng.random::<f64>()).collect();
    Volume::from_vec(dims, data).unwrap()
}

pub fn random_signed_field(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    cov / (va.sqrt() * vb.sqrt())
}

// ---------------------------------------------------------------------------
// golden-section oracle with stable pairwise comparisons

/// Golden-section minimizer driven by `diff(a, b) ~ g(a) - g(b)`. Stable
/// difference evaluation resolves the argmin to machine precision instead of
/// the sqrt(eps * g) floor of comparing two rounded objective values.
pub fn golden_min_by(diff: impl Fn(f64, f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let inv_phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    for _ in 0..120 {
        if diff(c, d) < 0.0 {
            hi = d;
            d = c;
            c = hi - inv_phi * (hi - lo);
        } else {
            lo = c;
            c = d;
            d = lo + inv_phi * (hi - lo);
        }
    }
    0.5 * (lo + hi)
}

/// Difference of the prox quadratic 0.5 (t - x)^2 between points a and b.
pub fn quad_diff(a: f64, b: f64, x: f64) -> f64 {
    0.5 * (a - b) * (a + b - 2.0 * x)
}

/// `|c - t| - |c - s|` with error proportional to |t - s|.
pub fn abs_gap(c: f64, t: f64, s: f64) -> f64 {
    if t <= c && s <= c {
        s - t
    } else if t >= c && s >= c {
        t - s
    } else {
        (c - t).abs() - (c - s).abs()
    }
}

/// Huber function value.
pub fn huber(t: f64, eps: f64) -> f64 {
    if t.abs() <= eps {
        t * t / (2.0 * eps)
    } else {
        t.abs() - eps / 2.0
    }
}

/// `huber(a) - huber(b)` evaluated branch-wise so same-branch points keep
/// precision proportional to |a - b|.
pub fn huber_diff(a: f64, b: f64, eps: f64) -> f64 {
    let (qa, qb) = (a.abs() <= eps, b.abs() <= eps);
    match (qa, qb) {
        (true, true) => (a - b) * (a + b) / (2.0 * eps),
        (false, false) if a.signum() == b.signum() => {
            if a >= 0.0 {
                a - b
            } else {
                b - a
            }
        }
        _ => huber(a, eps) - huber(b, eps),
    }
}

// ---------------------------------------------------------------------------
// projected-subgradient oracle for the destriping objective (vertical
// stripes, 2D), independent of the library's operators

/// Minimizes
///   mu1 |grad u|_{2,1} + |D_y (u0 - u)|_1 + mu2 |u0 - u|_1  over u in [0,1]
/// by projected subgradient descent with diminishing steps (1/sqrt(t) for
/// the first half, geometric decay afterwards), tracking the best objective.
pub fn gsr_subgradient_oracle(u0: &Volume, params: &GsrParams, iters: usize) -> f64 {
    let dims = u0.dims();
    assert!(
        dims.is_2d(),
        "oracle covers the 2D vertical-stripe objective"
    );
    let (nx, ny) = (dims.nx, dims.ny);
    let n = dims.len();
    let u0d = u0.data();
    let idx = |x: usize, y: usize| y * nx + x;

    let objective = |u: &[f64]| -> f64 {
        let mut obj = 0.0;
        for y in 0..ny {
            for x in 0..nx {
                let dx = if x + 1 < nx {
                    u[idx(x + 1, y)] - u[idx(x, y)]
                } else {
                    0.0
                };
                let dy = if y + 1 < ny {
                    u[idx(x, y + 1)] - u[idx(x, y)]
                } else {
                    0.0
                };
                obj += params.mu1 * (dx * dx + dy * dy).sqrt();
                let s = u0d[idx(x, y)] - u[idx(x, y)];
                obj += params.mu2 * s.abs();
                if y + 1 < ny {
                    let s_hi = u0d[idx(x, y + 1)] - u[idx(x, y + 1)];
                    obj += (s_hi - s).abs();
                }
            }
        }
        obj
    };

    let mut u: Vec<f64> = u0d.to_vec();
    let mut g = vec![0.0; n];
    let mut best = objective(&u);

    let half = iters / 2;
    let a0 = 0.05;
    let a_half = a0 / (half.max(1) as f64).sqrt();
    let q = (1e-10f64 / a_half).powf(1.0 / half.max(1) as f64);

    for t in 0..iters {
        g.iter_mut().for_each(|v| *v = 0.0);
        for y in 0..ny {
            for x in 0..nx {
                let dx = if x + 1 < nx {
                    u[idx(x + 1, y)] - u[idx(x, y)]
                } else {
                    0.0
                };
                let dy = if y + 1 < ny {
                    u[idx(x, y + 1)] - u[idx(x, y)]
                } else {
                    0.0
                };
                let nrm = (dx * dx + dy * dy).sqrt();
                if nrm > 0.0 {
                    let (px, py) = (dx / nrm, dy / nrm);
                    if x + 1 < nx {
                        g[idx(x + 1, y)] += params.mu1 * px;
                        g[idx(x, y)] -= params.mu1 * px;
                    }
                    if y + 1 < ny {
                        g[idx(x, y + 1)] += params.mu1 * py;
                        g[idx(x, y)] -= params.mu1 * py;
                    }
                }
                if y + 1 < ny {
                    let s_hi = u0d[idx(x, y + 1)] - u[idx(x, y + 1)];
                    let s_lo = u0d[idx(x, y)] - u[idx(x, y)];
                    let sgn = (s_hi - s_lo).signum();
                    g[idx(x, y + 1)] -= sgn;
                    g[idx(x, y)] += sgn;
                }
                let s = u0d[idx(x, y)] - u[idx(x, y)];
                g[idx(x, y)] -= params.mu2 * s.signum();
            }
        }
        let step = if t < half {
            a0 / ((t + 1) as f64).sqrt()
        } else {
            a_half * q.powi((t - half) as i32)
        };
        for i in 0..n {
            u[i] = (u[i] - step * g[i]).clamp(0.0, 1.0);
        }
        if t % 50 == 0 || t + 1 == iters {
            let obj = objective(&u);
            if obj < best {
                best = obj;
            }
        }
    }
    best
}

// ---------------------------------------------------------------------------
// synthetic data builders shared by the efficacy criteria

pub fn efficacy_phantom_spec(dims: Dims) -> PhantomSpec {
    PhantomSpec {
        dims,
        structure: PhantomStructure::Blobs,
        count: 14,
        radius_range: (8.0, 36.0),
        intensity_range: (0.4, 0.55),
        background: 0.4,
        smoothness: 1.5,
    }
}

pub fn efficacy_stripe_spec(direction: f64) -> StripeSpec {
    StripeSpec {
        direction,
        width_range: (1.0, 3.0),
        length: StripeLength::FullExtent,
        amplitude: 0.18,
        density: 0.18,
    }
}

pub fn oblique_phantom_spec(dims: Dims) -> PhantomSpec {
    PhantomSpec {
        dims,
        structure: PhantomStructure::Blobs,
        count: 10,
        radius_range: (6.0, 24.0),
        intensity_range: (0.4, 0.6),
        background: 0.35,
        smoothness: 1.5,
    }
}

pub fn oblique_stripe_spec(direction: f64) -> StripeSpec {
    StripeSpec {
        direction,
        width_range: (1.0, 3.0),
        length: StripeLength::FullExtent,
        amplitude: 0.25,
        density: 0.25,
    }
}

/// Asserts the feasibility contract on a solver output: clean in [0, 1]
/// exactly and additive reconstruction to 1e-12.
pub fn assert_feasible(dec: &destripe::volume::StripeDecomposition, input: &Volume, label: &str) {
    let (lo, hi) = dec.clean.min_max();
    assert!(
        lo >= 0.0 && hi <= 1.0,
        "{label}: clean outside [0,1]: [{lo}, {hi}]"
    );
    let residual = dec.reconstruction_residual(input);
    assert!(residual <= 1e-12, "{label}: additive residual {residual}");
}
