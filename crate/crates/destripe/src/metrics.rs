//! Image quality metrics: PSNR, multi-scale SSIM, and a reference-free
//! curtaining score measuring how strongly Fourier power concentrates in the
//! band orthogonal to the stripe direction.
//!
//! Metrics are computed on raw (unclipped) method outputs; clipping is an
//! export concern.

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::{signed_freq, Fft2};
use crate::volume::Volume;

/// MS-SSIM scale weights from the canonical five-level construction.
const MS_SSIM_WEIGHTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];
const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_C1: f64 = 1e-4; // (k1 * L)^2 with k1 = 0.01, unit dynamic range
const SSIM_C2: f64 = 9e-4; // (k2 * L)^2 with k2 = 0.03

/// Collected scores for one image (pair). Reference-based metrics are `None`
/// when no reference was supplied; `flags` records such conditions.
#[derive(Debug, Clone)]
pub struct MetricReport {
    pub psnr: Option<f64>,
    pub ms_ssim: Option<f64>,
    pub curtaining: Option<f64>,
    pub flags: Vec<String>,
}

/// Peak signal-to-noise ratio in dB: `-10 log10(MSE)` for unit dynamic
/// range. Identical images give +infinity.
pub fn psnr(u: &Volume, reference: &Volume) -> Result<f64> {
    if u.dims() != reference.dims() {
        return Err(Error::DimsMismatch(format!(
            "psnr: {} vs {}",
            u.dims(),
            reference.dims()
        )));
    }
    let n = u.dims().len() as f64;
    let mse: f64 = u
        .data()
        .iter()
        .zip(reference.data())
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum::<f64>()
        / n;
    if mse == 0.0 {
        Ok(f64::INFINITY)
    } else {
        Ok(-10.0 * mse.log10())
    }
}

fn gaussian_window() -> Vec<f64> {
    let half = (SSIM_WINDOW / 2) as isize;
    let mut w: Vec<f64> = (-half..=half)
        .map(|i| (-((i * i) as f64) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let sum: f64 = w.iter().sum();
    for v in &mut w {
        *v /= sum;
    }
    w
}

/// Separable valid-mode convolution with a symmetric 1D kernel.
fn convolve_valid(src: &[f64], nx: usize, ny: usize, kernel: &[f64]) -> (Vec<f64>, usize, usize) {
    let k = kernel.len();
    let ox = nx - k + 1;
    // rows
    let mut tmp = vec![0.0; ox * ny];
    for y in 0..ny {
        for x in 0..ox {
            let mut acc = 0.0;
            for (i, &kv) in kernel.iter().enumerate() {
                acc += kv * src[y * nx + x + i];
            }
            tmp[y * ox + x] = acc;
        }
    }
    // columns
    let oy = ny - k + 1;
    let mut out = vec![0.0; ox * oy];
    for y in 0..oy {
        for x in 0..ox {
            let mut acc = 0.0;
            for (i, &kv) in kernel.iter().enumerate() {
                acc += kv * tmp[(y + i) * ox + x];
            }
            out[y * ox + x] = acc;
        }
    }
    (out, ox, oy)
}

/// Mean contrast-structure and luminance terms of SSIM over one scale.
fn ssim_terms(u: &[f64], v: &[f64], nx: usize, ny: usize, window: &[f64]) -> (f64, f64) {
    let uu: Vec<f64> = u.iter().map(|a| a * a).collect();
    let vv: Vec<f64> = v.iter().map(|a| a * a).collect();
    let uv: Vec<f64> = u.iter().zip(v).map(|(a, b)| a * b).collect();

    let (mu_u, ox, oy) = convolve_valid(u, nx, ny, window);
    let (mu_v, _, _) = convolve_valid(v, nx, ny, window);
    let (m_uu, _, _) = convolve_valid(&uu, nx, ny, window);
    let (m_vv, _, _) = convolve_valid(&vv, nx, ny, window);
    let (m_uv, _, _) = convolve_valid(&uv, nx, ny, window);

    let mut cs_sum = 0.0;
    let mut l_sum = 0.0;
    let n = ox * oy;
    for i in 0..n {
        let su = m_uu[i] - mu_u[i] * mu_u[i];
        let sv = m_vv[i] - mu_v[i] * mu_v[i];
        let suv = m_uv[i] - mu_u[i] * mu_v[i];
        cs_sum += (2.0 * suv + SSIM_C2) / (su + sv + SSIM_C2);
        l_sum +=
            (2.0 * mu_u[i] * mu_v[i] + SSIM_C1) / (mu_u[i] * mu_u[i] + mu_v[i] * mu_v[i] + SSIM_C1);
    }
    (cs_sum / n as f64, l_sum / n as f64)
}

/// 2x2 mean downsampling (trailing odd row/column dropped).
fn downsample2(src: &[f64], nx: usize, ny: usize) -> (Vec<f64>, usize, usize) {
    let ox = nx / 2;
    let oy = ny / 2;
    let mut out = vec![0.0; ox * oy];
    for y in 0..oy {
        for x in 0..ox {
            let i = 2 * y * nx + 2 * x;
            out[y * ox + x] = 0.25 * (src[i] + src[i + 1] + src[i + nx] + src[i + nx + 1]);
        }
    }
    (out, ox, oy)
}

/// Multi-scale SSIM value plus the number of pyramid levels actually used.
#[derive(Debug, Clone, Copy)]
pub struct MsSsim {
    pub value: f64,
    pub levels: usize,
}

/// Multi-scale SSIM with the canonical five-level weights, 11x11 Gaussian
/// window (sigma 1.5) and stabilizers k1 = 0.01, k2 = 0.03 on unit range.
///
/// Images too small for five levels use as many levels as fit (window-sized
/// or larger) with the weights renormalized; `levels` reports the reduction.
/// Negative contrast-structure means clamp to zero before exponentiation, so
/// the value stays in [0, 1]. 3D volumes score the mean over x-y slices.
pub fn ms_ssim(u: &Volume, reference: &Volume) -> Result<MsSsim> {
    if u.dims() != reference.dims() {
        return Err(Error::DimsMismatch(format!(
            "ms_ssim: {} vs {}",
            u.dims(),
            reference.dims()
        )));
    }
    let dims = u.dims();
    let mut total = 0.0;
    let mut levels_min = usize::MAX;
    for z in 0..dims.nz {
        let r = ms_ssim_slice(u.slice(z), reference.slice(z), dims.nx, dims.ny)?;
        total += r.value;
        levels_min = levels_min.min(r.levels);
    }
    Ok(MsSsim {
        value: total / dims.nz as f64,
        levels: levels_min,
    })
}

fn ms_ssim_slice(u: &[f64], v: &[f64], nx: usize, ny: usize) -> Result<MsSsim> {
    let mut levels = 0;
    let (mut tx, mut ty) = (nx, ny);
    while levels < 5 && tx >= SSIM_WINDOW && ty >= SSIM_WINDOW {
        levels += 1;
        tx /= 2;
        ty /= 2;
    }
    if levels == 0 {
        return Err(Error::InvalidParameter(format!(
            "image {nx}x{ny} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window"
        )));
    }
    let weight_sum: f64 = MS_SSIM_WEIGHTS[..levels].iter().sum();
    let window = gaussian_window();

    let mut cur_u = u.to_vec();
    let mut cur_v = v.to_vec();
    let (mut cx, mut cy) = (nx, ny);
    let mut value = 1.0;
    for level in 0..levels {
        let (cs, l) = ssim_terms(&cur_u, &cur_v, cx, cy, &window);
        let w = MS_SSIM_WEIGHTS[level] / weight_sum;
        value *= cs.max(0.0).powf(w);
        if level == levels - 1 {
            value *= l.max(0.0).powf(w);
        } else {
            let (du, ox, oy) = downsample2(&cur_u, cx, cy);
            let (dv, _, _) = downsample2(&cur_v, cx, cy);
            cur_u = du;
            cur_v = dv;
            cx = ox;
            cy = oy;
        }
    }
    Ok(MsSsim { value, levels })
}

/// Curtaining score in [0, 1]; stripe-free isotropic images score near 1,
/// heavily striped images near 0.
#[derive(Debug, Clone, Copy)]
pub struct Curtaining {
    pub score: f64,
    /// Set when the AC spectrum is empty (e.g. constant image).
    pub degenerate: bool,
}

/// Band half-width (bins along the stripe direction) of the curtaining score.
pub const CURTAINING_BAND: f64 = 2.0;
/// Radius of the excluded low-frequency disk.
pub const CURTAINING_EXCLUDE_RADIUS: f64 = 5.0;

/// Reference-free stripe measure: compares mean spectral power inside the
/// band through the origin orthogonal to the stripes (excluding a
/// low-frequency disk) against the mean power outside it:
/// `1 - clamp((in - out) / (in + out), 0, 1)`. 3D volumes score the mean
/// over x-y slices.
pub fn curtaining(v: &Volume, theta0: f64) -> Result<Curtaining> {
    let dims = v.dims();
    let fft = Fft2::new(dims.nx, dims.ny);
    let mut score_sum = 0.0;
    let mut degenerate = false;
    for z in 0..dims.nz {
        let c = curtaining_slice(v.slice(z), dims.nx, dims.ny, theta0, &fft);
        score_sum += c.score;
        degenerate |= c.degenerate;
    }
    Ok(Curtaining {
        score: score_sum / dims.nz as f64,
        degenerate,
    })
}

fn curtaining_slice(slice: &[f64], nx: usize, ny: usize, theta0: f64, fft: &Fft2) -> Curtaining {
    let mut buf: Vec<Complex64> = slice.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft.forward(&mut buf);
    let (dx, dy) = (theta0.cos(), theta0.sin());
    let r2 = CURTAINING_EXCLUDE_RADIUS * CURTAINING_EXCLUDE_RADIUS;
    let mut band_sum = 0.0;
    let mut band_n = 0usize;
    let mut out_sum = 0.0;
    let mut out_n = 0usize;
    for jy in 0..ny {
        let cy = signed_freq(jy, ny);
        for jx in 0..nx {
            let cx = signed_freq(jx, nx);
            if cx * cx + cy * cy <= r2 {
                continue;
            }
            let power = buf[jy * nx + jx].norm_sqr();
            let along = cx * dx + cy * dy;
            if along.abs() <= CURTAINING_BAND {
                band_sum += power;
                band_n += 1;
            } else {
                out_sum += power;
                out_n += 1;
            }
        }
    }
    let band_mean = if band_n > 0 {
        band_sum / band_n as f64
    } else {
        0.0
    };
    let out_mean = if out_n > 0 {
        out_sum / out_n as f64
    } else {
        0.0
    };
    let total = band_mean + out_mean;
    if total == 0.0 {
        return Curtaining {
            score: 1.0,
            degenerate: true,
        };
    }
    let contrast = ((band_mean - out_mean) / total).clamp(0.0, 1.0);
    Curtaining {
        score: 1.0 - contrast,
        degenerate: false,
    }
}

/// Computes every applicable metric for an image, with PSNR and MS-SSIM only
/// when a reference is available.
pub fn evaluate(u: &Volume, reference: Option<&Volume>, theta0: f64) -> Result<MetricReport> {
    let mut flags = Vec::new();
    let (psnr_v, ms_ssim_v) = match reference {
        Some(r) => {
            let p = psnr(u, r)?;
            let m = ms_ssim(u, r)?;
            if m.levels < 5 {
                flags.push(format!("ms_ssim reduced to {} levels", m.levels));
            }
            (Some(p), Some(m.value))
        }
        None => {
            flags.push("psnr unavailable: no reference".into());
            flags.push("ms_ssim unavailable: no reference".into());
            (None, None)
        }
    };
    let c = curtaining(u, theta0)?;
    if c.degenerate {
        flags.push("curtaining degenerate: empty AC spectrum".into());
    }
    Ok(MetricReport {
        psnr: psnr_v,
        ms_ssim: ms_ssim_v,
        curtaining: Some(c.score),
        flags,
    })
}
