//! Solver-level property tests beyond the acceptance criteria: coarse
//! objective monotonicity, the weight-scaling rule, joint multi-direction
//! removal, stacked operator-norm bounds, and a small-instance check of the
//! convolutional solver against an independent proximal-gradient oracle.

mod support;

use std::f64::consts::{FRAC_PI_2, FRAC_PI_3};

use destripe::diffops::{
    adjoint_diff, forward_diff, oblique_diff, oblique_diff_adjoint, operator_norm_bound,
    DiffOperator,
};
use destripe::gsr::{solve_gsr, GsrParams, SolverSettings};
use destripe::metrics::psnr;
use destripe::synth::{corrupt, make_phantom, make_stripes};
use destripe::volume::{Axis, Dims, StripeDirection, Volume};
use destripe::vsnr::{make_gabor_patterns, solve_vsnr, GaborPattern, VsnrParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::*;

/// Coarse monotonicity: the objective at the final iteration never exceeds
/// the objective at iteration 100 (the method is not strictly monotone, but
/// this large-scale decrease holds on every test image).
#[test]
fn objective_decreases_in_the_large() {
    let dims = Dims::d2(24, 24).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for trial in 0..3 {
        let u0 = if trial == 0 {
            random_unit_volume(dims, &mut rng)
        } else {
            let clean = make_phantom(&efficacy_phantom_spec(dims), trial).unwrap();
            let stripes = make_stripes(&efficacy_stripe_spec(FRAC_PI_2), dims, trial + 9).unwrap();
            corrupt(&clean, &stripes).unwrap().volume
        };
        let params = GsrParams {
            mu1: 0.3,
            mu2: 0.01,
            ..Default::default()
        };
        let mut settings = SolverSettings::with_iters(25_000);
        settings.log_stride = 100;
        let (_, report) = solve_gsr(&u0, &params, &settings).unwrap();
        let at_100 = report
            .objective_trace
            .iter()
            .find(|(it, _)| *it == 100)
            .map(|(_, v)| *v)
            .unwrap();
        assert!(
            report.final_objective <= at_100 + 1e-12,
            "trial {trial}: {} at end vs {} at iteration 100",
            report.final_objective,
            at_100
        );
    }
}

/// Unit-width vertical stripes at the default weights (1/3, 1/300): the
/// destriped image scores a higher PSNR against the clean phantom than the
/// corrupted input does.
#[test]
fn default_weights_improve_psnr_on_unit_width_stripes() {
    let dims = Dims::d2(128, 128).unwrap();
    let clean = make_phantom(&efficacy_phantom_spec(dims), 4).unwrap();
    let stripes = make_stripes(
        &destripe::synth::StripeSpec {
            direction: FRAC_PI_2,
            width_range: (1.0, 1.0),
            length: destripe::synth::StripeLength::FullExtent,
            amplitude: 0.18,
            density: 0.15,
        },
        dims,
        40,
    )
    .unwrap();
    let u0 = corrupt(&clean, &stripes).unwrap().volume;
    let (dec, _) = solve_gsr(
        &u0,
        &GsrParams::default(), // mu = (1/3, 1/300)
        &SolverSettings::with_iters(2000),
    )
    .unwrap();
    let gain = psnr(&dec.clean, &clean).unwrap() - psnr(&u0, &clean).unwrap();
    assert!(gain > 0.0, "gain {gain:.2} dB");
}

/// Scaling rule: holding mu1/mu2 fixed while scaling both weights up removes
/// at least as much stripe mass (|s|_1 nondecreasing in the common factor).
#[test]
fn weight_scaling_controls_stripe_mass() {
    let dims = Dims::d2(96, 96).unwrap();
    let clean = make_phantom(&efficacy_phantom_spec(dims), 2).unwrap();
    let stripes = make_stripes(&efficacy_stripe_spec(FRAC_PI_2), dims, 20).unwrap();
    let u0 = corrupt(&clean, &stripes).unwrap().volume;
    let settings = SolverSettings::with_iters(1500);

    let mut masses = Vec::new();
    for scale in [0.25, 0.5, 1.0, 2.0, 4.0] {
        let params = GsrParams {
            mu1: 0.25 * scale,
            mu2: 0.01 * scale,
            ..Default::default()
        };
        let (dec, _) = solve_gsr(&u0, &params, &settings).unwrap();
        masses.push(dec.stripes.data().iter().map(|v| v.abs()).sum::<f64>());
    }
    for pair in masses.windows(2) {
        assert!(
            pair[1] >= pair[0] - 1e-9,
            "stripe mass not monotone: {masses:?}"
        );
    }
}

/// Two stripe families at pi/2 and pi/3 are removed jointly by a two-term
/// directional sum.
#[test]
fn two_direction_families_removed_jointly() {
    let dims = Dims::d2(128, 128).unwrap();
    let clean = make_phantom(&oblique_phantom_spec(dims), 1).unwrap();
    let mk = |theta: f64, seed: u64| {
        make_stripes(
            &destripe::synth::StripeSpec {
                direction: theta,
                width_range: (1.0, 2.0),
                length: destripe::synth::StripeLength::FullExtent,
                amplitude: 0.12,
                density: 0.12,
            },
            dims,
            seed,
        )
        .unwrap()
    };
    let s1 = mk(FRAC_PI_2, 10);
    let s2 = mk(FRAC_PI_3, 11);
    let both = Volume::from_vec(
        dims,
        s1.data()
            .iter()
            .zip(s2.data())
            .map(|(&a, &b)| (a + b).clamp(-1.0, 1.0))
            .collect(),
    )
    .unwrap();
    let pair = corrupt(&clean, &both).unwrap();
    assert!(pair.exact_ground_truth());
    let u0 = pair.volume;

    let params = GsrParams {
        mu1: 1.0,
        mu2: 0.01,
        directions: vec![
            StripeDirection::from_angle(FRAC_PI_2).unwrap(),
            StripeDirection::from_angle(FRAC_PI_3).unwrap(),
        ],
        ..Default::default()
    };
    let (dec, report) = solve_gsr(&u0, &params, &SolverSettings::with_iters(4000)).unwrap();
    assert!(!report.fell_back_to_input);
    let gain = psnr(&dec.clean, &clean).unwrap() - psnr(&u0, &clean).unwrap();
    assert!(gain >= 3.0, "joint removal gained only {gain:.2} dB");
}

/// Reference-free curtaining separates clean phantoms from their striped
/// copies on every seed.
#[test]
fn curtaining_orders_clean_above_striped_on_all_seeds() {
    let dims = Dims::d2(128, 128).unwrap();
    for seed in 0..10u64 {
        let clean = make_phantom(&efficacy_phantom_spec(dims), seed).unwrap();
        let stripes = make_stripes(&efficacy_stripe_spec(FRAC_PI_2), dims, seed + 77).unwrap();
        let striped = corrupt(&clean, &stripes).unwrap().volume;
        let c_clean = destripe::metrics::curtaining(&clean, FRAC_PI_2)
            .unwrap()
            .score;
        let c_striped = destripe::metrics::curtaining(&striped, FRAC_PI_2)
            .unwrap()
            .score;
        assert!(
            c_clean > c_striped,
            "seed {seed}: clean {c_clean:.4} vs striped {c_striped:.4}"
        );
    }
}

/// The Fourier filter raises the curtaining score of a striped phantom.
#[test]
fn fourier_filter_improves_curtaining() {
    use destripe::fourier::{filter_volume, FourierFilterParams};
    let dims = Dims::d2(128, 128).unwrap();
    let clean = make_phantom(&efficacy_phantom_spec(dims), 6).unwrap();
    let stripes = make_stripes(&efficacy_stripe_spec(FRAC_PI_2), dims, 66).unwrap();
    let striped = corrupt(&clean, &stripes).unwrap().volume;
    let dec = filter_volume(&striped, &FourierFilterParams::default()).unwrap();
    assert!(dec.reconstruction_residual(&striped) <= 1e-12);
    let before = destripe::metrics::curtaining(&striped, FRAC_PI_2)
        .unwrap()
        .score;
    let after = destripe::metrics::curtaining(&dec.clean, FRAC_PI_2)
        .unwrap()
        .score;
    assert!(after > before, "curtaining {before:.4} -> {after:.4}");
}

/// Power-iteration estimates of the solver's stacked operators never exceed
/// the bound used to pick step sizes.
#[test]
fn stacked_norm_bounds_dominate_power_iteration() {
    let dims = Dims::d2(16, 16).unwrap();
    let n = dims.len();
    let mut rng = ChaCha8Rng::seed_from_u64(33);

    for (rho_z, theta) in [(1.0, 1.2), (0.5, FRAC_PI_3), (0.0, 2.6)] {
        // stack: gradient (x, y) plus a vertical and an oblique channel
        let apply = |u: &[f64]| -> Vec<f64> {
            let v = Volume::from_vec(dims, u.to_vec()).unwrap();
            let mut out = Vec::with_capacity(4 * n);
            out.extend_from_slice(forward_diff(&v, Axis::X).data());
            out.extend_from_slice(forward_diff(&v, Axis::Y).data());
            out.extend_from_slice(forward_diff(&v, Axis::Y).data());
            out.extend_from_slice(oblique_diff(&v, theta).unwrap().data());
            out
        };
        let adjoint = |p: &[f64]| -> Vec<f64> {
            let mut acc = vec![0.0; n];
            for (chunk, op) in p.chunks_exact(n).zip(0..4) {
                let part = match op {
                    0 => adjoint_diff(chunk, dims, Axis::X).unwrap(),
                    1 | 2 => adjoint_diff(chunk, dims, Axis::Y).unwrap(),
                    _ => oblique_diff_adjoint(chunk, dims, theta).unwrap(),
                };
                for (a, v) in acc.iter_mut().zip(part) {
                    *a += v;
                }
            }
            acc
        };

        let mut x = random_signed_field(n, &mut rng);
        let mut estimate = 0.0f64;
        for _ in 0..200 {
            let z = adjoint(&apply(&x));
            let nz = norm2(&z);
            estimate = nz.sqrt();
            x.iter_mut().zip(&z).for_each(|(xi, &zi)| *xi = zi / nz);
        }

        let bound = operator_norm_bound(&DiffOperator::Stack(vec![
            DiffOperator::Forward(Axis::X),
            DiffOperator::Forward(Axis::Y),
            DiffOperator::Weighted {
                axis: Axis::Z,
                weight: rho_z,
            },
            DiffOperator::Forward(Axis::Y),
            DiffOperator::Oblique(theta),
        ]));
        assert!(
            estimate <= bound + 1e-9,
            "estimate {estimate} exceeds bound {bound}"
        );
    }
}

// ---------------------------------------------------------------------------
// small-instance oracle for the convolutional solver: proximal gradient with
// momentum over the weight maps, using direct spatial convolutions

struct SpatialKernel {
    k: Vec<f64>,
    hx: isize,
    hy: isize,
    w: usize,
}

impl SpatialKernel {
    fn of(p: &GaborPattern) -> Self {
        let (w, h) = p.extent();
        SpatialKernel {
            k: p.kernel().to_vec(),
            hx: (w as isize - 1) / 2,
            hy: (h as isize - 1) / 2,
            w,
        }
    }

    fn conv(&self, lambda: &[f64], nx: usize, ny: usize) -> Vec<f64> {
        let mut out = vec![0.0; nx * ny];
        for y in 0..ny as isize {
            for x in 0..nx as isize {
                let mut acc = 0.0;
                for dy in -self.hy..=self.hy {
                    for dx in -self.hx..=self.hx {
                        let kv = self.k[(dy + self.hy) as usize * self.w + (dx + self.hx) as usize];
                        let sx = (x - dx).rem_euclid(nx as isize) as usize;
                        let sy = (y - dy).rem_euclid(ny as isize) as usize;
                        acc += kv * lambda[sy * nx + sx];
                    }
                }
                out[y as usize * nx + x as usize] = acc;
            }
        }
        out
    }

    fn corr(&self, t: &[f64], nx: usize, ny: usize) -> Vec<f64> {
        let mut out = vec![0.0; nx * ny];
        for y in 0..ny as isize {
            for x in 0..nx as isize {
                let mut acc = 0.0;
                for dy in -self.hy..=self.hy {
                    for dx in -self.hx..=self.hx {
                        let kv = self.k[(dy + self.hy) as usize * self.w + (dx + self.hx) as usize];
                        let sx = (x + dx).rem_euclid(nx as isize) as usize;
                        let sy = (y + dy).rem_euclid(ny as isize) as usize;
                        acc += kv * t[sy * nx + sx];
                    }
                }
                out[y as usize * nx + x as usize] = acc;
            }
        }
        out
    }
}

fn vsnr_objective_direct(
    lambda: &[f64],
    kers: &[SpatialKernel],
    u0: &[f64],
    nx: usize,
    ny: usize,
    alphas: &[f64; 3],
    eps: f64,
) -> f64 {
    let n = nx * ny;
    let mut s = vec![0.0; n];
    for (i, ker) in kers.iter().enumerate() {
        for (sv, cv) in s
            .iter_mut()
            .zip(ker.conv(&lambda[i * n..(i + 1) * n], nx, ny))
        {
            *sv += cv;
        }
    }
    let u: Vec<f64> = u0.iter().zip(&s).map(|(&a, &b)| a - b).collect();
    let mut obj = 0.0;
    for y in 0..ny {
        for x in 0..nx {
            let gx = if x + 1 < nx {
                u[y * nx + x + 1] - u[y * nx + x]
            } else {
                0.0
            };
            let gy = if y + 1 < ny {
                u[(y + 1) * nx + x] - u[y * nx + x]
            } else {
                0.0
            };
            obj += huber((gx * gx + gy * gy).sqrt(), eps);
        }
    }
    for (i, &a) in alphas.iter().enumerate() {
        obj += a * lambda[i * n..(i + 1) * n]
            .iter()
            .map(|v| v.abs())
            .sum::<f64>();
    }
    obj
}

/// Proximal-gradient descent (with momentum) on the convolutional objective,
/// entirely through direct spatial convolutions and finite differences.
fn vsnr_prox_gradient_oracle(
    u0: &[f64],
    kers: &[SpatialKernel],
    nx: usize,
    ny: usize,
    alphas: &[f64; 3],
    eps: f64,
    iters: usize,
) -> f64 {
    let n = nx * ny;

    // Lipschitz bound of the smooth part by power iteration on (grad C)^T (grad C)
    let smooth_quadratic = |x: &[f64]| -> Vec<f64> {
        let mut s = vec![0.0; n];
        for (i, ker) in kers.iter().enumerate() {
            for (sv, cv) in s.iter_mut().zip(ker.conv(&x[i * n..(i + 1) * n], nx, ny)) {
                *sv += cv;
            }
        }
        let mut rx = vec![0.0; n];
        let mut ry = vec![0.0; n];
        for y in 0..ny {
            for x in 0..nx {
                rx[y * nx + x] = if x + 1 < nx {
                    s[y * nx + x + 1] - s[y * nx + x]
                } else {
                    0.0
                };
                ry[y * nx + x] = if y + 1 < ny {
                    s[(y + 1) * nx + x] - s[y * nx + x]
                } else {
                    0.0
                };
            }
        }
        let mut gt = vec![0.0; n];
        for y in 0..ny {
            for x in 0..nx {
                let mut v = 0.0;
                if x > 0 {
                    v += rx[y * nx + x - 1];
                }
                if x + 1 < nx {
                    v -= rx[y * nx + x];
                }
                if y > 0 {
                    v += ry[(y - 1) * nx + x];
                }
                if y + 1 < ny {
                    v -= ry[y * nx + x];
                }
                gt[y * nx + x] = v;
            }
        }
        let mut z = vec![0.0; 3 * n];
        for (i, ker) in kers.iter().enumerate() {
            for (zv, cv) in z[i * n..(i + 1) * n].iter_mut().zip(ker.corr(&gt, nx, ny)) {
                *zv = cv;
            }
        }
        z
    };
    let mut x: Vec<f64> = (0..3 * n)
        .map(|i| ((i * 2654435761) % 1000) as f64 / 1000.0 - 0.5)
        .collect();
    let mut l_est = 0.0f64;
    for _ in 0..60 {
        let z = smooth_quadratic(&x);
        let nz = norm2(&z);
        if nz == 0.0 {
            break;
        }
        l_est = nz;
        x.iter_mut().zip(&z).for_each(|(xi, &zi)| *xi = zi / nz);
    }
    let step = 1.0 / (1.2 * l_est / eps).max(1e-6);

    let mut lam = vec![0.0; 3 * n];
    let mut lam_prev = lam.clone();
    let mut z_pt = lam.clone();
    let mut best = f64::INFINITY;
    for t in 0..iters {
        // gradient of the smooth part at the extrapolated point
        let mut s = vec![0.0; n];
        for (i, ker) in kers.iter().enumerate() {
            for (sv, cv) in s
                .iter_mut()
                .zip(ker.conv(&z_pt[i * n..(i + 1) * n], nx, ny))
            {
                *sv += cv;
            }
        }
        let u: Vec<f64> = u0.iter().zip(&s).map(|(&a, &b)| a - b).collect();
        let mut rho_x = vec![0.0; n];
        let mut rho_y = vec![0.0; n];
        for y in 0..ny {
            for x in 0..nx {
                let gx = if x + 1 < nx {
                    u[y * nx + x + 1] - u[y * nx + x]
                } else {
                    0.0
                };
                let gy = if y + 1 < ny {
                    u[(y + 1) * nx + x] - u[y * nx + x]
                } else {
                    0.0
                };
                let m = (gx * gx + gy * gy).sqrt();
                let scale = if m <= eps { 1.0 / eps } else { 1.0 / m };
                rho_x[y * nx + x] = gx * scale;
                rho_y[y * nx + x] = gy * scale;
            }
        }
        let mut gt = vec![0.0; n];
        for y in 0..ny {
            for x in 0..nx {
                let mut v = 0.0;
                if x > 0 {
                    v += rho_x[y * nx + x - 1];
                }
                if x + 1 < nx {
                    v -= rho_x[y * nx + x];
                }
                if y > 0 {
                    v += rho_y[(y - 1) * nx + x];
                }
                if y + 1 < ny {
                    v -= rho_y[y * nx + x];
                }
                gt[y * nx + x] = v;
            }
        }
        lam_prev.copy_from_slice(&lam);
        for (i, ker) in kers.iter().enumerate() {
            let ct = ker.corr(&gt, nx, ny);
            let thr = step * alphas[i];
            for (l, (z, c)) in lam[i * n..(i + 1) * n]
                .iter_mut()
                .zip(z_pt[i * n..(i + 1) * n].iter().zip(ct))
            {
                // gradient of the smooth part w.r.t. lambda is -C^T grad^T rho
                let cand = *z + step * c;
                let shrunk = if cand > thr {
                    cand - thr
                } else if cand < -thr {
                    cand + thr
                } else {
                    0.0
                };
                *l = shrunk.clamp(-1.0, 1.0);
            }
        }
        let momentum = t as f64 / (t as f64 + 3.0);
        for ((z, &l), &lp) in z_pt.iter_mut().zip(&lam).zip(&lam_prev) {
            *z = l + momentum * (l - lp);
        }
        if t % 100 == 0 || t + 1 == iters {
            best = best.min(vsnr_objective_direct(&lam, kers, u0, nx, ny, alphas, eps));
        }
    }
    best
}

/// Tiny-instance equivalence: the convolutional solver's final objective
/// matches the independent proximal-gradient oracle within 1e-3.
#[test]
fn vsnr_small_instance_matches_oracle() {
    let (nx, ny) = (8, 8);
    let dims = Dims::d2(nx, ny).unwrap();
    let scales = [(2.0, 0.5), (3.0, 0.7), (5.0, 0.9)];
    let patterns = make_gabor_patterns(FRAC_PI_2, &scales).unwrap();
    let kers: Vec<SpatialKernel> = patterns.iter().map(SpatialKernel::of).collect();
    let alphas = [0.5, 0.5, 0.5];
    let eps = 1e-2;

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for instance in 0..3 {
        let data: Vec<f64> = (0..nx * ny).map(|_| rng.random::<f64>()).collect();
        let u0 = Volume::from_vec(dims, data.clone()).unwrap();
        let params = VsnrParams {
            alphas,
            epsilon: eps,
            settings: SolverSettings::with_iters(25_000),
        };
        let outcome = solve_vsnr(&u0, &patterns, &params).unwrap();
        let oracle = vsnr_prox_gradient_oracle(&data, &kers, nx, ny, &alphas, eps, 60_000);
        let gap = (outcome.report.final_objective - oracle).abs();
        assert!(
            gap <= 1e-3,
            "instance {instance}: solver {} vs oracle {oracle} (gap {gap:.2e})",
            outcome.report.final_objective
        );
    }
}
