//! Image/volume data model: dimensions, axis conventions, value normalization
//! and the additive clean-plus-stripes decomposition shared by all methods.
//!
//! Conventions used throughout the crate:
//! - Axis order is (x, y, z). A volume with `nz == 1` is a 2D image.
//! - Memory layout is x-fastest: `index(x, y, z) = x + nx * (y + ny * z)`,
//!   so each x-y slice is one contiguous block of `nx * ny` samples.
//! - Stripes run along the y axis by default.

use crate::error::{Error, Result};

/// Volume dimensions `(nx, ny, nz)`. `nz = 1` denotes a 2D image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl Dims {
    pub fn new(nx: usize, ny: usize, nz: usize) -> Result<Self> {
        if nx == 0 || ny == 0 || nz == 0 {
            return Err(Error::InvalidParameter(format!(
                "dims components must be >= 1, got ({nx}, {ny}, {nz})"
            )));
        }
        Ok(Dims { nx, ny, nz })
    }

    pub fn d2(nx: usize, ny: usize) -> Result<Self> {
        Dims::new(nx, ny, 1)
    }

    /// Total number of voxels.
    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_2d(&self) -> bool {
        self.nz == 1
    }

    /// Number of samples in one x-y slice.
    pub fn slice_len(&self) -> usize {
        self.nx * self.ny
    }

    /// Flat index of voxel (x, y, z); x varies fastest.
    #[inline]
    pub fn idx(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.nx * (y + self.ny * z)
    }
}

impl std::fmt::Display for Dims {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.nx, self.ny, self.nz)
    }
}

/// A coordinate axis of the volume.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// Direction of stripe artifacts: either a coordinate axis or an in-plane
/// angle theta in [0, pi), measured so that theta = pi/2 is the y axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StripeDirection {
    Axis(Axis),
    Oblique(f64),
}

impl StripeDirection {
    /// Builds a direction from an in-plane angle, folding into [0, pi) and
    /// snapping to the x/y axes when within 1e-9 so that axis-aligned cases
    /// take the exact finite-difference path.
    pub fn from_angle(theta: f64) -> Result<Self> {
        if !theta.is_finite() {
            return Err(Error::InvalidParameter(
                "stripe angle must be finite".into(),
            ));
        }
        let mut t = theta % std::f64::consts::PI;
        if t < 0.0 {
            t += std::f64::consts::PI;
        }
        Ok(Self::from_folded_angle(t))
    }

    fn from_folded_angle(t: f64) -> Self {
        const SNAP: f64 = 1e-9;
        if t.abs() < SNAP || (std::f64::consts::PI - t).abs() < SNAP {
            StripeDirection::Axis(Axis::X)
        } else if (t - std::f64::consts::FRAC_PI_2).abs() < SNAP {
            StripeDirection::Axis(Axis::Y)
        } else {
            StripeDirection::Oblique(t)
        }
    }

    /// Canonical form: oblique angles that coincide with an axis collapse to it.
    pub fn canonical(self) -> Self {
        match self {
            StripeDirection::Axis(a) => StripeDirection::Axis(a),
            StripeDirection::Oblique(t) => Self::from_folded_angle(t),
        }
    }

    /// The in-plane angle of this direction (z maps to pi/2 for reporting).
    pub fn angle(&self) -> f64 {
        match self {
            StripeDirection::Axis(Axis::X) => 0.0,
            StripeDirection::Axis(Axis::Y) | StripeDirection::Axis(Axis::Z) => {
                std::f64::consts::FRAC_PI_2
            }
            StripeDirection::Oblique(t) => *t,
        }
    }
}

/// Dense double-precision scalar field over a 2D/3D grid.
///
/// Values are immutable after construction; share `&Volume` freely across
/// threads. Normalized volumes hold values in [0, 1]; difference fields and
/// stripe fields reuse the same container with signed values.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    dims: Dims,
    data: Vec<f64>,
}

impl Volume {
    pub fn zeros(dims: Dims) -> Self {
        Volume {
            dims,
            data: vec![0.0; dims.len()],
        }
    }

    pub fn from_vec(dims: Dims, data: Vec<f64>) -> Result<Self> {
        if data.len() != dims.len() {
            return Err(Error::DimsMismatch(format!(
                "data length {} does not match dims {} ({} voxels)",
                data.len(),
                dims,
                dims.len()
            )));
        }
        Ok(Volume { dims, data })
    }

    pub fn constant(dims: Dims, value: f64) -> Self {
        Volume {
            dims,
            data: vec![value; dims.len()],
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> f64 {
        self.data[self.dims.idx(x, y, z)]
    }

    /// Contiguous x-y slice at depth `z`.
    pub fn slice(&self, z: usize) -> &[f64] {
        let n = self.dims.slice_len();
        &self.data[z * n..(z + 1) * n]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn min_max(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &v in &self.data {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }

    /// True if every value lies in [0, 1].
    pub fn in_unit_range(&self) -> bool {
        self.data.iter().all(|&v| (0.0..=1.0).contains(&v))
    }
}

/// How raw samples were mapped into [0, 1]; needed to invert the transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormalizeRecord {
    /// Integer source scaled by 1 / (2^bits - 1).
    BitDepth { bits: u8 },
    /// Float source rescaled affinely from [min, max] to [0, 1].
    MinMax {
        min: f64,
        max: f64,
        degenerate: bool,
    },
}

impl NormalizeRecord {
    pub fn is_degenerate(&self) -> bool {
        matches!(
            self,
            NormalizeRecord::MinMax {
                degenerate: true,
                ..
            }
        )
    }
}

/// Raw image samples as read from or written to files.
#[derive(Debug, Clone, PartialEq)]
pub enum RawSamples {
    U8(Vec<u8>),
    U16(Vec<u16>),
    F32(Vec<f32>),
}

impl RawSamples {
    pub fn len(&self) -> usize {
        match self {
            RawSamples::U8(v) => v.len(),
            RawSamples::U16(v) => v.len(),
            RawSamples::F32(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Maps raw samples into a [0, 1] volume and records the transform.
///
/// Integer sources divide by full scale (2^bits - 1); float sources rescale
/// min-max. An all-constant float input normalizes to the constant clamped
/// to [0, 1] and the record is flagged degenerate.
pub fn normalize(raw: &RawSamples, dims: Dims) -> Result<(Volume, NormalizeRecord)> {
    if raw.len() != dims.len() {
        return Err(Error::DimsMismatch(format!(
            "sample count {} does not match dims {}",
            raw.len(),
            dims
        )));
    }
    match raw {
        RawSamples::U8(v) => {
            let scale = 1.0 / 255.0;
            let data = v.iter().map(|&s| s as f64 * scale).collect();
            Ok((
                Volume::from_vec(dims, data)?,
                NormalizeRecord::BitDepth { bits: 8 },
            ))
        }
        RawSamples::U16(v) => {
            let scale = 1.0 / 65535.0;
            let data = v.iter().map(|&s| s as f64 * scale).collect();
            Ok((
                Volume::from_vec(dims, data)?,
                NormalizeRecord::BitDepth { bits: 16 },
            ))
        }
        RawSamples::F32(v) => {
            if v.iter().any(|s| !s.is_finite()) {
                return Err(Error::NonFinite);
            }
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for &s in v {
                let s = s as f64;
                lo = lo.min(s);
                hi = hi.max(s);
            }
            if lo == hi {
                let c = lo.clamp(0.0, 1.0);
                let data = vec![c; v.len()];
                return Ok((
                    Volume::from_vec(dims, data)?,
                    NormalizeRecord::MinMax {
                        min: lo,
                        max: hi,
                        degenerate: true,
                    },
                ));
            }
            let inv = 1.0 / (hi - lo);
            let data = v.iter().map(|&s| (s as f64 - lo) * inv).collect();
            Ok((
                Volume::from_vec(dims, data)?,
                NormalizeRecord::MinMax {
                    min: lo,
                    max: hi,
                    degenerate: false,
                },
            ))
        }
    }
}

/// Inverts `normalize`. Integer targets quantize with round-half-even after
/// clamping to [0, 1]; float targets invert the affine map exactly. Bit
/// depths up to 8 produce u8 samples, up to 16 produce u16 (files only ever
/// record 8 or 16, but odd depths like 12-bit quantize correctly too).
pub fn denormalize(v: &Volume, record: &NormalizeRecord) -> RawSamples {
    match record {
        NormalizeRecord::BitDepth { bits } => {
            let bits = (*bits).clamp(1, 16);
            let scale = ((1u32 << bits) - 1) as f64;
            if bits <= 8 {
                RawSamples::U8(
                    v.data()
                        .iter()
                        .map(|&x| (x.clamp(0.0, 1.0) * scale).round_ties_even() as u8)
                        .collect(),
                )
            } else {
                RawSamples::U16(
                    v.data()
                        .iter()
                        .map(|&x| (x.clamp(0.0, 1.0) * scale).round_ties_even() as u16)
                        .collect(),
                )
            }
        }
        NormalizeRecord::MinMax { min, max, .. } => {
            let span = max - min;
            RawSamples::F32(v.data().iter().map(|&x| (x * span + min) as f32).collect())
        }
    }
}

pub(crate) fn quantize_u8(x: f64) -> u8 {
    (x.clamp(0.0, 1.0) * 255.0).round_ties_even() as u8
}

pub(crate) fn quantize_u16(x: f64) -> u16 {
    (x.clamp(0.0, 1.0) * 65535.0).round_ties_even() as u16
}

/// Additive decomposition of a corrupted image into a clean image `u` and a
/// stripe field `s` with `u + s == u0`.
#[derive(Debug, Clone)]
pub struct StripeDecomposition {
    pub clean: Volume,
    pub stripes: Volume,
}

impl StripeDecomposition {
    /// Builds the decomposition from the input and the clean estimate, so the
    /// stripe field is `input - clean` by construction.
    pub fn from_clean(input: &Volume, clean: Volume) -> Result<Self> {
        if input.dims() != clean.dims() {
            return Err(Error::DimsMismatch(format!(
                "input dims {} vs clean dims {}",
                input.dims(),
                clean.dims()
            )));
        }
        let stripes: Vec<f64> = input
            .data()
            .iter()
            .zip(clean.data())
            .map(|(&u0, &u)| u0 - u)
            .collect();
        let stripes = Volume::from_vec(input.dims(), stripes)?;
        Ok(StripeDecomposition { clean, stripes })
    }

    pub fn dims(&self) -> Dims {
        self.clean.dims()
    }

    /// Max-norm of `clean + stripes - input`.
    pub fn reconstruction_residual(&self, input: &Volume) -> f64 {
        self.clean
            .data()
            .iter()
            .zip(self.stripes.data())
            .zip(input.data())
            .map(|((&u, &s), &u0)| (u + s - u0).abs())
            .fold(0.0, f64::max)
    }
}
