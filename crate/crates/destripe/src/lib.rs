//! Stripe artifact removal for 2D and 3D grayscale images.
//!
//! The crate bundles three destriping methods behind one additive
//! decomposition contract (`input = clean + stripes`):
//!
//! - [`gsr`]: a variational general stripe remover combining total variation,
//!   directional difference penalties and stripe sparsity, minimized with a
//!   primal-dual method. Handles 2D/3D data, oblique and multi-directional
//!   stripes, and anisotropic z weighting.
//! - [`vsnr`]: a variational stationary noise remover expressing stripes as
//!   convolutions of sparse weight maps with Gabor-derived patterns.
//! - [`fourier`]: a directional Fourier-damping filter on angular wedges.
//!
//! Supporting modules provide quality metrics ([`metrics`]: PSNR, MS-SSIM and
//! a reference-free curtaining score), a seedable phantom-plus-stripes
//! generator for ground-truth validation ([`synth`]), and image file I/O
//! ([`io`]).

pub mod diffops;
mod error;
mod fft;
pub mod fourier;
pub mod gsr;
pub mod io;
pub mod metrics;
mod pdhg;
pub mod prox;
pub mod synth;
pub mod volume;
pub mod vsnr;

pub use error::{Error, Result};
pub use gsr::{solve_gsr, solve_gsr_oblique, GsrParams, SolveReport, SolverSettings};
pub use volume::{
    denormalize, normalize, Axis, Dims, NormalizeRecord, RawSamples, StripeDecomposition,
    StripeDirection, Volume,
};
