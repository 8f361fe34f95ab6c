//! Variational stationary noise remover: models the stripe field as a sum of
//! convolutions of sparse weight maps with elementary Gabor-derived patterns,
//!
//!   min  |grad(u0 - s)|_{1,eps} + sum_i alpha_i |lambda_i|_1
//!   s.t. s = sum_i lambda_i * psi_i,  |lambda|_inf <= 1,
//!
//! solved with the same primal-dual loop as the general stripe remover.
//! Convolutions run in the frequency domain with periodic extension.

use rustfft::num_complex::Complex64;

use crate::diffops::{forward_diff_adjoint_add, forward_diff_into};
use crate::error::{Error, Result};
use crate::fft::Fft2;
use crate::gsr::{SolveReport, SolverSettings};
use crate::pdhg::run_loop;
use crate::prox::{project_l2_ball_groups, soft_threshold};
use crate::volume::{Axis, StripeDecomposition, Volume};
use std::time::Instant;

/// Nominal length class of an elementary pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatternScale {
    Short,
    Medium,
    Long,
}

/// Elementary stripe pattern: the real part of a Gabor filter (zero carrier
/// frequency, anisotropic Gaussian envelope elongated along the stripe
/// direction), normalized to unit l2 norm.
#[derive(Debug, Clone)]
pub struct GaborPattern {
    kernel: Vec<f64>,
    half_x: usize,
    half_y: usize,
    pub scale: PatternScale,
}

impl GaborPattern {
    /// Kernel stored row-major with extent (2*half_x+1) x (2*half_y+1).
    pub fn kernel(&self) -> &[f64] {
        &self.kernel
    }

    pub fn extent(&self) -> (usize, usize) {
        (2 * self.half_x + 1, 2 * self.half_y + 1)
    }

    pub fn l2_norm(&self) -> f64 {
        self.kernel.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Default (sigma_along, sigma_across) pairs in pixels for the short, medium
/// and long patterns.
pub const DEFAULT_PATTERN_SCALES: [(f64, f64); 3] = [(3.0, 0.5), (9.0, 0.8), (27.0, 1.0)];

/// Builds the three elementary patterns elongated along direction `theta`
/// with the given (sigma_along, sigma_across) envelope sizes.
pub fn make_gabor_patterns(theta: f64, scales: &[(f64, f64); 3]) -> Result<[GaborPattern; 3]> {
    if !(0.0..std::f64::consts::PI).contains(&theta) {
        return Err(Error::InvalidParameter(format!(
            "pattern direction {theta} must lie in [0, pi)"
        )));
    }
    let labels = [
        PatternScale::Short,
        PatternScale::Medium,
        PatternScale::Long,
    ];
    let mut out = Vec::with_capacity(3);
    for (&(s_along, s_across), &scale) in scales.iter().zip(&labels) {
        if !(s_along > 0.0 && s_across > 0.0) {
            return Err(Error::InvalidParameter(
                "pattern sigmas must be positive".into(),
            ));
        }
        let (c, s) = (theta.cos(), theta.sin());
        // 3-sigma bounding box of the rotated envelope
        let half_x = (3.0 * (s_along * c.abs() + s_across * s.abs())).ceil() as usize;
        let half_y = (3.0 * (s_along * s.abs() + s_across * c.abs())).ceil() as usize;
        let w = 2 * half_x + 1;
        let h = 2 * half_y + 1;
        let mut kernel = vec![0.0; w * h];
        for iy in 0..h {
            let y = iy as f64 - half_y as f64;
            for ix in 0..w {
                let x = ix as f64 - half_x as f64;
                let along = x * c + y * s;
                let across = -x * s + y * c;
                kernel[iy * w + ix] = (-along * along / (2.0 * s_along * s_along)
                    - across * across / (2.0 * s_across * s_across))
                    .exp();
            }
        }
        let norm = kernel.iter().map(|v| v * v).sum::<f64>().sqrt();
        for v in &mut kernel {
            *v /= norm;
        }
        out.push(GaborPattern {
            kernel,
            half_x,
            half_y,
            scale,
        });
    }
    Ok(out.try_into().expect("three patterns"))
}

#[derive(Debug, Clone)]
pub struct VsnrParams {
    /// Sparsity weights for the three weight maps.
    pub alphas: [f64; 3],
    /// Huber smoothing of the gradient norm.
    pub epsilon: f64,
    pub settings: SolverSettings,
}

impl Default for VsnrParams {
    fn default() -> Self {
        VsnrParams {
            alphas: [3.0, 5.0, 10.0],
            epsilon: 1e-2,
            settings: SolverSettings::default(),
        }
    }
}

impl VsnrParams {
    pub fn validate(&self) -> Result<()> {
        if self.alphas.iter().any(|a| !(*a > 0.0)) {
            return Err(Error::InvalidParameter("alphas must be positive".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidParameter("epsilon must be positive".into()));
        }
        Ok(())
    }
}

/// Embeds a pattern at the origin of an nx-by-ny grid with periodic
/// wraparound and returns its unnormalized 2D FFT.
fn pattern_spectrum(pattern: &GaborPattern, nx: usize, ny: usize, fft: &Fft2) -> Vec<Complex64> {
    let mut buf = vec![Complex64::default(); nx * ny];
    let (hx, hy) = (pattern.half_x as isize, pattern.half_y as isize);
    let w = 2 * pattern.half_x + 1;
    for dy in -hy..=hy {
        let jy = dy.rem_euclid(ny as isize) as usize;
        for dx in -hx..=hx {
            let jx = dx.rem_euclid(nx as isize) as usize;
            let k = pattern.kernel[(dy + hy) as usize * w + (dx + hx) as usize];
            buf[jy * nx + jx] += Complex64::new(k, 0.0);
        }
    }
    fft.forward(&mut buf);
    buf
}

/// Periodic convolution of a weight map with a pattern (frequency domain).
pub fn convolve_pattern(
    weights: &[f64],
    nx: usize,
    ny: usize,
    pattern: &GaborPattern,
) -> Result<Vec<f64>> {
    if weights.len() != nx * ny {
        return Err(Error::DimsMismatch(format!(
            "weight map length {} does not match {}x{}",
            weights.len(),
            nx,
            ny
        )));
    }
    let fft = Fft2::new(nx, ny);
    let psi = pattern_spectrum(pattern, nx, ny, &fft);
    let mut buf: Vec<Complex64> = weights.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft.forward(&mut buf);
    for (v, p) in buf.iter_mut().zip(&psi) {
        *v *= p;
    }
    fft.inverse(&mut buf);
    Ok(buf.iter().map(|c| c.re).collect())
}

/// Everything the VSNR solve produces: the decomposition, the solve report,
/// and the final weight maps (one per pattern).
#[derive(Debug, Clone)]
pub struct VsnrOutcome {
    pub decomposition: StripeDecomposition,
    pub report: SolveReport,
    pub weights: [Vec<f64>; 3],
}

impl VsnrOutcome {
    /// Max-norm over all weight maps.
    pub fn weight_inf_norm(&self) -> f64 {
        self.weights
            .iter()
            .flat_map(|w| w.iter())
            .map(|v| v.abs())
            .fold(0.0, f64::max)
    }
}

/// Huber penalty of the per-pixel gradient magnitude.
fn huber_tv(gx: &[f64], gy: &[f64], eps: f64) -> f64 {
    gx.iter()
        .zip(gy)
        .map(|(&a, &b)| {
            let m = (a * a + b * b).sqrt();
            if m <= eps {
                m * m / (2.0 * eps)
            } else {
                m - eps / 2.0
            }
        })
        .sum()
}

/// s = sum_i lambda_i * psi_i, evaluated through the pattern spectra.
fn stripe_from_weights(lambda: &[f64], spectra: &[Vec<Complex64>], fft: &Fft2, out: &mut [f64]) {
    let n = out.len();
    let mut acc = vec![Complex64::default(); n];
    let mut cbuf = vec![Complex64::default(); n];
    for (i, spec) in spectra.iter().enumerate() {
        for (c, &v) in cbuf.iter_mut().zip(&lambda[i * n..(i + 1) * n]) {
            *c = Complex64::new(v, 0.0);
        }
        fft.forward(&mut cbuf);
        for (a, (c, p)) in acc.iter_mut().zip(cbuf.iter().zip(spec)) {
            *a += c * p;
        }
    }
    fft.inverse(&mut acc);
    for (o, a) in out.iter_mut().zip(&acc) {
        *o = a.re;
    }
}

/// Runs VSNR on a 2D image with values in [0, 1].
pub fn solve_vsnr(
    u0: &Volume,
    patterns: &[GaborPattern; 3],
    params: &VsnrParams,
) -> Result<VsnrOutcome> {
    params.validate()?;
    let dims = u0.dims();
    if !dims.is_2d() {
        return Err(Error::InvalidParameter(format!(
            "vsnr operates on 2D slices, got dims {dims}"
        )));
    }
    if !u0.is_finite() {
        return Err(Error::NonFinite);
    }
    if !u0.in_unit_range() {
        return Err(Error::NotNormalized);
    }

    let start = Instant::now();
    let (nx, ny) = (dims.nx, dims.ny);
    let n = dims.len();
    let fft = Fft2::new(nx, ny);
    let spectra: Vec<Vec<Complex64>> = patterns
        .iter()
        .map(|p| pattern_spectrum(p, nx, ny, &fft))
        .collect();

    // |K| <= |grad| * |C| with |C| read off the pattern spectra
    let mut c_norm: f64 = 0.0;
    for f in 0..n {
        let sq: f64 = spectra.iter().map(|s| s[f].norm_sqr()).sum();
        c_norm = c_norm.max(sq.sqrt());
    }
    let l = 8.0f64.sqrt() * c_norm;
    let cfg = params.settings.resolve(l)?;

    // shift b = grad u0 for the dual prox
    let mut bx = vec![0.0; n];
    let mut by = vec![0.0; n];
    forward_diff_into(u0.data(), dims, Axis::X, &mut bx);
    forward_diff_into(u0.data(), dims, Axis::Y, &mut by);

    let eps = params.epsilon;
    let alphas = params.alphas;

    let apply_k = {
        let fft = &fft;
        let spectra = &spectra;
        let mut s_local = vec![0.0; n];
        move |lambda: &[f64], out: &mut [f64]| {
            stripe_from_weights(lambda, spectra, fft, &mut s_local);
            let (qx, qy) = out.split_at_mut(n);
            forward_diff_into(&s_local, dims, Axis::X, qx);
            forward_diff_into(&s_local, dims, Axis::Y, qy);
        }
    };

    let apply_kt = {
        let fft = &fft;
        let spectra = &spectra;
        let mut t = vec![0.0; n];
        let mut tbuf = vec![Complex64::default(); n];
        let mut cbuf = vec![Complex64::default(); n];
        move |q: &[f64], out: &mut [f64]| {
            t.fill(0.0);
            forward_diff_adjoint_add(&q[..n], dims, Axis::X, 1.0, &mut t);
            forward_diff_adjoint_add(&q[n..], dims, Axis::Y, 1.0, &mut t);
            for (c, &v) in tbuf.iter_mut().zip(&t) {
                *c = Complex64::new(v, 0.0);
            }
            fft.forward(&mut tbuf);
            for (i, spec) in spectra.iter().enumerate() {
                for (c, (tv, p)) in cbuf.iter_mut().zip(tbuf.iter().zip(spec)) {
                    *c = tv * p.conj();
                }
                fft.inverse(&mut cbuf);
                for (o, c) in out[i * n..(i + 1) * n].iter_mut().zip(&cbuf) {
                    *o = c.re;
                }
            }
        }
    };

    let prox_g = move |lambda: &mut [f64], tau: f64| {
        for (i, &alpha) in alphas.iter().enumerate() {
            let t = tau * alpha;
            for v in &mut lambda[i * n..(i + 1) * n] {
                *v = soft_threshold(*v, t).clamp(-1.0, 1.0);
            }
        }
    };

    let prox_fstar = move |q: &mut [f64], sigma: f64| {
        let scale = 1.0 / (1.0 + sigma * eps);
        let (qx, qy) = q.split_at_mut(n);
        for (v, &b) in qx.iter_mut().zip(&bx) {
            *v = (*v - sigma * b) * scale;
        }
        for (v, &b) in qy.iter_mut().zip(&by) {
            *v = (*v - sigma * b) * scale;
        }
        project_l2_ball_groups(q, 2, 1.0);
    };

    let mut objective = {
        let fft = &fft;
        let spectra = &spectra;
        let mut s_local = vec![0.0; n];
        let mut gx = vec![0.0; n];
        let mut gy = vec![0.0; n];
        let u0_data = u0.data().to_vec();
        move |lambda: &[f64]| {
            stripe_from_weights(lambda, spectra, fft, &mut s_local);
            let u: Vec<f64> = u0_data.iter().zip(&s_local).map(|(&a, &b)| a - b).collect();
            forward_diff_into(&u, dims, Axis::X, &mut gx);
            forward_diff_into(&u, dims, Axis::Y, &mut gy);
            let mut obj = huber_tv(&gx, &gy, eps);
            for (i, &alpha) in alphas.iter().enumerate() {
                obj += alpha
                    * lambda[i * n..(i + 1) * n]
                        .iter()
                        .map(|v| v.abs())
                        .sum::<f64>();
            }
            obj
        }
    };

    let do_nothing = objective(&vec![0.0; 3 * n]);
    let (lambda, trace) = run_loop(
        vec![0.0; 3 * n],
        2 * n,
        &cfg,
        apply_k,
        apply_kt,
        prox_g,
        prox_fstar,
        &mut objective,
    );

    let (lambda, fell_back, final_objective) = if trace.final_objective <= do_nothing {
        (lambda, false, trace.final_objective)
    } else {
        (vec![0.0; 3 * n], true, do_nothing)
    };

    let mut s_buf = vec![0.0; n];
    stripe_from_weights(&lambda, &spectra, &fft, &mut s_buf);
    let clean_data: Vec<f64> = u0.data().iter().zip(&s_buf).map(|(&a, &b)| a - b).collect();
    let clean = Volume::from_vec(dims, clean_data)?;
    let decomposition = StripeDecomposition::from_clean(u0, clean)?;
    let constraint_residual = decomposition.reconstruction_residual(u0);

    let weights: [Vec<f64>; 3] = [
        lambda[..n].to_vec(),
        lambda[n..2 * n].to_vec(),
        lambda[2 * n..].to_vec(),
    ];

    Ok(VsnrOutcome {
        decomposition,
        report: SolveReport {
            iterations: trace.iterations,
            objective_trace: trace.objective_trace,
            final_objective,
            wall_time: start.elapsed(),
            constraint_residual,
            fell_back_to_input: fell_back,
        },
        weights,
    })
}
