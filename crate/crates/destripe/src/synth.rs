//! Seedable generator of clean phantoms and additive stripe fields, giving
//! ground-truth pairs for validating destriping methods. Generation is
//! deterministic per (spec, seed); the RNG is ChaCha8.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::volume::{Dims, Volume};

/// Identity of the generator RNG, recorded in output metadata so frozen
/// regression values stay portable.
pub const RNG_ALGORITHM: &str = "chacha8";

/// A clamped fraction above this marks a pair unsuitable for
/// exact-ground-truth tests.
pub const MAX_EXACT_CLAMPED_FRACTION: f64 = 0.05;

// Generator outputs snap to this dyadic grid (2^-20, far below any imaging
// precision) so that clean + stripes and its inverse are exact in f64.
const VALUE_GRID: f64 = 1_048_576.0;

#[inline]
fn snap_to_grid(v: f64) -> f64 {
    (v * VALUE_GRID).round() / VALUE_GRID
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhantomStructure {
    /// Hard balls of constant intensity.
    Spheres,
    /// Smooth Gaussian bumps.
    Blobs,
    /// Balls with a brighter rim and dimmer interior.
    Cells,
}

#[derive(Debug, Clone)]
pub struct PhantomSpec {
    pub dims: Dims,
    pub structure: PhantomStructure,
    pub count: usize,
    pub radius_range: (f64, f64),
    pub intensity_range: (f64, f64),
    pub background: f64,
    /// Gaussian blur applied after placing structures; 0 disables.
    pub smoothness: f64,
}

impl PhantomSpec {
    fn validate(&self) -> Result<()> {
        let (r0, r1) = self.radius_range;
        let (i0, i1) = self.intensity_range;
        if !(r0 > 0.0 && r1 >= r0) {
            return Err(Error::InvalidParameter(format!(
                "radius range ({r0}, {r1}) must be positive and ordered"
            )));
        }
        if !(0.0..=1.0).contains(&i0) || !(0.0..=1.0).contains(&i1) || i1 < i0 {
            return Err(Error::InvalidParameter(format!(
                "intensity range ({i0}, {i1}) must be ordered within [0, 1]"
            )));
        }
        if !(0.0..=1.0).contains(&self.background) {
            return Err(Error::InvalidParameter(format!(
                "background {} must lie in [0, 1]",
                self.background
            )));
        }
        if self.smoothness < 0.0 {
            return Err(Error::InvalidParameter("smoothness must be >= 0".into()));
        }
        Ok(())
    }
}

fn sample_range(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Generates a clean phantom with values in [0, 1]; deterministic per seed.
pub fn make_phantom(spec: &PhantomSpec, seed: u64) -> Result<Volume> {
    spec.validate()?;
    let dims = spec.dims;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = vec![spec.background; dims.len()];

    for _ in 0..spec.count {
        let cx = rng.random_range(0.0..dims.nx as f64);
        let cy = rng.random_range(0.0..dims.ny as f64);
        let cz = if dims.nz > 1 {
            rng.random_range(0.0..dims.nz as f64)
        } else {
            0.5
        };
        let radius = sample_range(&mut rng, spec.radius_range.0, spec.radius_range.1);
        let intensity = sample_range(&mut rng, spec.intensity_range.0, spec.intensity_range.1);

        // bounding box keeps placement linear in structure size
        let reach = radius.ceil() as isize + 1;
        let x_lo = ((cx as isize) - reach).max(0) as usize;
        let x_hi = (((cx as isize) + reach) as usize).min(dims.nx - 1);
        let y_lo = ((cy as isize) - reach).max(0) as usize;
        let y_hi = (((cy as isize) + reach) as usize).min(dims.ny - 1);
        let z_lo = ((cz as isize) - reach).max(0) as usize;
        let z_hi = (((cz as isize) + reach) as usize).min(dims.nz - 1);

        for z in z_lo..=z_hi {
            for y in y_lo..=y_hi {
                for x in x_lo..=x_hi {
                    let dx = x as f64 + 0.5 - cx;
                    let dy = y as f64 + 0.5 - cy;
                    let dz = if dims.nz > 1 {
                        z as f64 + 0.5 - cz
                    } else {
                        0.0
                    };
                    let d = (dx * dx + dy * dy + dz * dz).sqrt();
                    let v = match spec.structure {
                        PhantomStructure::Spheres => {
                            if d <= radius {
                                intensity
                            } else {
                                continue;
                            }
                        }
                        PhantomStructure::Blobs => {
                            let s = radius / 2.0;
                            intensity * (-d * d / (2.0 * s * s)).exp()
                        }
                        PhantomStructure::Cells => {
                            if d <= radius {
                                // brighter membrane, dimmer interior
                                if d >= 0.8 * radius {
                                    intensity
                                } else {
                                    0.6 * intensity
                                }
                            } else {
                                continue;
                            }
                        }
                    };
                    let cell = &mut data[dims.idx(x, y, z)];
                    *cell = cell.max(v.max(spec.background));
                }
            }
        }
    }

    if spec.smoothness > 0.0 {
        gaussian_blur(&mut data, dims, spec.smoothness);
    }
    for v in &mut data {
        *v = snap_to_grid(v.clamp(0.0, 1.0));
    }
    Volume::from_vec(dims, data)
}

/// Separable Gaussian blur with replicate boundary.
fn gaussian_blur(data: &mut [f64], dims: Dims, sigma: f64) {
    let half = (3.0 * sigma).ceil() as isize;
    let mut kernel: Vec<f64> = (-half..=half)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = kernel.iter().sum();
    for k in &mut kernel {
        *k /= sum;
    }

    let (nx, ny, nz) = (dims.nx as isize, dims.ny as isize, dims.nz as isize);
    let axes: [(isize, fn(isize, isize, isize, Dims) -> usize); 3] = [
        (nx, |x, y, z, d| d.idx(x as usize, y as usize, z as usize)),
        (ny, |y, x, z, d| d.idx(x as usize, y as usize, z as usize)),
        (nz, |z, x, y, d| d.idx(x as usize, y as usize, z as usize)),
    ];
    let mut scratch = vec![0.0; data.len()];
    for (axis_idx, &(len, index)) in axes.iter().enumerate() {
        if len == 1 {
            continue;
        }
        let (other_a, other_b) = match axis_idx {
            0 => (ny, nz),
            1 => (nx, nz),
            _ => (nx, ny),
        };
        for a in 0..other_a {
            for b in 0..other_b {
                for i in 0..len {
                    let mut acc = 0.0;
                    for (k, &kv) in kernel.iter().enumerate() {
                        let j = (i + k as isize - half).clamp(0, len - 1);
                        acc += kv * data[index(j, a, b, dims)];
                    }
                    scratch[index(i, a, b, dims)] = acc;
                }
            }
        }
        data.copy_from_slice(&scratch);
    }
}

/// Stripe length model along the stripe direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StripeLength {
    FullExtent,
    /// Segment lengths drawn uniformly from this range, in pixels.
    Segments {
        min: f64,
        max: f64,
    },
}

#[derive(Debug, Clone)]
pub struct StripeSpec {
    /// Stripe direction angle; pi/2 is vertical.
    pub direction: f64,
    /// Stripe widths in pixels, sampled uniformly.
    pub width_range: (f64, f64),
    pub length: StripeLength,
    /// Amplitudes are drawn uniformly from [-amplitude, amplitude].
    pub amplitude: f64,
    /// Target covered area fraction in [0, 1].
    pub density: f64,
}

impl StripeSpec {
    fn validate(&self) -> Result<()> {
        if !(0.0..std::f64::consts::PI).contains(&self.direction) {
            return Err(Error::InvalidParameter(format!(
                "stripe direction {} must lie in [0, pi)",
                self.direction
            )));
        }
        let (w0, w1) = self.width_range;
        if !(w0 > 0.0 && w1 >= w0) {
            return Err(Error::InvalidParameter(format!(
                "width range ({w0}, {w1}) must be positive and ordered"
            )));
        }
        if !(0.0..=1.0).contains(&self.amplitude) {
            return Err(Error::InvalidParameter(format!(
                "amplitude {} must lie in [0, 1]",
                self.amplitude
            )));
        }
        if !(0.0..=1.0).contains(&self.density) {
            return Err(Error::InvalidParameter(format!(
                "density {} must lie in [0, 1]",
                self.density
            )));
        }
        if let StripeLength::Segments { min, max } = self.length {
            if !(min > 0.0 && max >= min) {
                return Err(Error::InvalidParameter(format!(
                    "segment length range ({min}, {max}) must be positive and ordered"
                )));
            }
        }
        Ok(())
    }
}

/// Generates a signed stripe field in [-1, 1]; deterministic per seed.
/// Slices of a 3D volume receive independent stripe patterns.
pub fn make_stripes(spec: &StripeSpec, dims: Dims, seed: u64) -> Result<Volume> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = vec![0.0; dims.len()];

    // snap axis-aligned directions so width-1 vertical stripes are exact columns
    let (mut dx, mut dy) = (spec.direction.cos(), spec.direction.sin());
    for v in [&mut dx, &mut dy] {
        let r = v.round();
        if (*v - r).abs() < 1e-12 {
            *v = r;
        }
    }
    // perpendicular extent of the slice across the stripe direction
    let perp = (-dy, dx);
    let corners = [
        (0.0, 0.0),
        (dims.nx as f64, 0.0),
        (0.0, dims.ny as f64),
        (dims.nx as f64, dims.ny as f64),
    ];
    let mut p_lo = f64::INFINITY;
    let mut p_hi = f64::NEG_INFINITY;
    let mut a_lo = f64::INFINITY;
    let mut a_hi = f64::NEG_INFINITY;
    for (x, y) in corners {
        let p = x * perp.0 + y * perp.1;
        let a = x * dx + y * dy;
        p_lo = p_lo.min(p);
        p_hi = p_hi.max(p);
        a_lo = a_lo.min(a);
        a_hi = a_hi.max(a);
    }
    let mean_width = 0.5 * (spec.width_range.0 + spec.width_range.1);
    let n_stripes = ((spec.density * (p_hi - p_lo)) / mean_width).round() as usize;

    let nx = dims.nx;
    for z in 0..dims.nz {
        let plane = &mut data[z * dims.slice_len()..(z + 1) * dims.slice_len()];
        for _ in 0..n_stripes {
            let offset = rng.random_range(p_lo..p_hi);
            let width = sample_range(&mut rng, spec.width_range.0, spec.width_range.1);
            let amp = rng.random_range(-spec.amplitude..=spec.amplitude);
            let segment = match spec.length {
                StripeLength::FullExtent => None,
                StripeLength::Segments { min, max } => {
                    let len = sample_range(&mut rng, min, max);
                    let start = rng.random_range(a_lo..a_hi);
                    Some((start, start + len))
                }
            };
            for y in 0..dims.ny {
                for x in 0..nx {
                    let px = x as f64 + 0.5;
                    let py = y as f64 + 0.5;
                    let p = px * perp.0 + py * perp.1;
                    // pixel coverage of the band: unit ramp at each edge,
                    // so oblique stripes vary smoothly instead of stair-stepping
                    let coverage = (width * 0.5 + 0.5 - (p - offset).abs()).clamp(0.0, 1.0);
                    if coverage == 0.0 {
                        continue;
                    }
                    if let Some((s0, s1)) = segment {
                        let a = px * dx + py * dy;
                        if a < s0 || a > s1 {
                            continue;
                        }
                    }
                    plane[y * nx + x] += amp * coverage;
                }
            }
        }
    }

    for v in &mut data {
        *v = snap_to_grid(v.clamp(-1.0, 1.0));
    }
    Volume::from_vec(dims, data)
}

/// Result of adding stripes onto a clean image.
#[derive(Debug, Clone)]
pub struct CorruptOutcome {
    pub volume: Volume,
    /// Fraction of voxels where the sum left [0, 1] and was clamped.
    pub clamped_fraction: f64,
}

impl CorruptOutcome {
    /// True when the pair supports exact ground-truth tests (no clamping).
    pub fn exact_ground_truth(&self) -> bool {
        self.clamped_fraction == 0.0
    }
}

/// Element-wise `clean + stripes`, clamped to [0, 1], reporting how much
/// clamping occurred.
pub fn corrupt(clean: &Volume, stripes: &Volume) -> Result<CorruptOutcome> {
    if clean.dims() != stripes.dims() {
        return Err(Error::DimsMismatch(format!(
            "clean dims {} vs stripes dims {}",
            clean.dims(),
            stripes.dims()
        )));
    }
    let mut clamped = 0usize;
    let data: Vec<f64> = clean
        .data()
        .iter()
        .zip(stripes.data())
        .map(|(&c, &s)| {
            let sum = c + s;
            let out = sum.clamp(0.0, 1.0);
            if out != sum {
                clamped += 1;
            }
            out
        })
        .collect();
    Ok(CorruptOutcome {
        volume: Volume::from_vec(clean.dims(), data)?,
        clamped_fraction: clamped as f64 / clean.dims().len() as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn base_phantom_spec(dims: Dims) -> PhantomSpec {
        PhantomSpec {
            dims,
            structure: PhantomStructure::Blobs,
            count: 8,
            radius_range: (4.0, 12.0),
            intensity_range: (0.35, 0.5),
            background: 0.25,
            smoothness: 1.0,
        }
    }

    #[test]
    fn zero_count_gives_uniform_background() {
        let dims = Dims::d2(16, 16).unwrap();
        let spec = PhantomSpec {
            count: 0,
            smoothness: 0.0,
            ..base_phantom_spec(dims)
        };
        let v = make_phantom(&spec, 1).unwrap();
        assert!(v.data().iter().all(|&x| x == 0.25));
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let dims = Dims::new(24, 24, 2).unwrap();
        let spec = base_phantom_spec(dims);
        let a = make_phantom(&spec, 42).unwrap();
        let b = make_phantom(&spec, 42).unwrap();
        assert_eq!(a.data(), b.data());
        let c = make_phantom(&spec, 43).unwrap();
        assert_ne!(a.data(), c.data());
    }

    #[test]
    fn phantom_values_stay_in_unit_range() {
        let dims = Dims::d2(48, 48).unwrap();
        let spec = PhantomSpec {
            count: 30,
            ..base_phantom_spec(dims)
        };
        let v = make_phantom(&spec, 7).unwrap();
        assert!(v.in_unit_range());
    }

    #[test]
    fn centered_sphere_interior_is_above_background() {
        // place a deterministic sphere by construction: a one-structure spec
        // whose random center lands somewhere; instead check directly with a
        // hand-rolled field through the public api using many seeds
        let dims = Dims::d2(32, 32).unwrap();
        let spec = PhantomSpec {
            structure: PhantomStructure::Spheres,
            count: 1,
            radius_range: (6.0, 6.0),
            intensity_range: (0.5, 0.5),
            background: 0.2,
            smoothness: 0.0,
            dims,
        };
        let v = make_phantom(&spec, 3).unwrap();
        // exactly the ball voxels are raised; find its extent geometrically
        let above: Vec<usize> = (0..dims.len())
            .filter(|&i| v.data()[i] > 0.2 + 1e-12)
            .collect();
        assert!(!above.is_empty());
        for &i in &above {
            assert!((v.data()[i] - 0.5).abs() < 1e-12);
        }
        // ball area close to pi r^2
        let area = above.len() as f64;
        assert!((area - std::f64::consts::PI * 36.0).abs() < 30.0);
    }

    #[test]
    fn zero_density_gives_zero_field() {
        let dims = Dims::d2(32, 32).unwrap();
        let spec = StripeSpec {
            direction: FRAC_PI_2,
            width_range: (1.0, 2.0),
            length: StripeLength::FullExtent,
            amplitude: 0.3,
            density: 0.0,
        };
        let s = make_stripes(&spec, dims, 5).unwrap();
        assert!(s.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn vertical_unit_width_stripes_are_constant_columns() {
        let dims = Dims::d2(40, 24).unwrap();
        let spec = StripeSpec {
            direction: FRAC_PI_2,
            width_range: (1.0, 1.0),
            length: StripeLength::FullExtent,
            amplitude: 0.25,
            density: 0.2,
        };
        let s = make_stripes(&spec, dims, 11).unwrap();
        for x in 0..dims.nx {
            let column: Vec<f64> = (0..dims.ny).map(|y| s.get(x, y, 0)).collect();
            for v in &column {
                assert_eq!(*v, column[0], "column {x} not constant");
            }
        }
        assert!(s.data().iter().any(|&v| v != 0.0));
    }

    #[test]
    fn stripe_mass_tracks_density_and_amplitude() {
        let dims = Dims::d2(128, 128).unwrap();
        let spec = StripeSpec {
            direction: FRAC_PI_2,
            width_range: (1.0, 3.0),
            length: StripeLength::FullExtent,
            amplitude: 0.4,
            density: 0.15,
        };
        let mut total = 0.0;
        for seed in 0..10 {
            let s = make_stripes(&spec, dims, seed).unwrap();
            total += s.data().iter().map(|v| v.abs()).sum::<f64>() / dims.len() as f64;
        }
        let mean = total / 10.0;
        let expected = spec.density * spec.amplitude / 2.0;
        assert!(
            (mean - expected).abs() <= 0.1 * expected,
            "mean {mean} vs expected {expected}"
        );
    }

    #[test]
    fn segmented_stripes_cover_less_than_full_extent() {
        let dims = Dims::d2(64, 64).unwrap();
        let full = StripeSpec {
            direction: FRAC_PI_2,
            width_range: (1.0, 2.0),
            length: StripeLength::FullExtent,
            amplitude: 0.3,
            density: 0.2,
        };
        let seg = StripeSpec {
            length: StripeLength::Segments {
                min: 8.0,
                max: 16.0,
            },
            ..full.clone()
        };
        let mass = |spec: &StripeSpec| {
            (0..5)
                .map(|seed| {
                    make_stripes(spec, dims, seed)
                        .unwrap()
                        .data()
                        .iter()
                        .filter(|v| **v != 0.0)
                        .count()
                })
                .sum::<usize>()
        };
        assert!(mass(&seg) < mass(&full));
    }

    #[test]
    fn corrupt_examples() {
        let dims = Dims::d2(8, 4).unwrap();
        let clean = Volume::constant(dims, 0.5);
        let zero = Volume::zeros(dims);
        let out = corrupt(&clean, &zero).unwrap();
        assert_eq!(out.volume.data(), clean.data());
        assert_eq!(out.clamped_fraction, 0.0);

        let mut stripe_data = vec![0.0; dims.len()];
        for y in 0..4 {
            stripe_data[dims.idx(3, y, 0)] = 0.2;
        }
        let stripes = Volume::from_vec(dims, stripe_data).unwrap();
        let out = corrupt(&clean, &stripes).unwrap();
        for y in 0..4 {
            assert!((out.volume.get(3, y, 0) - 0.7).abs() < 1e-15);
            assert!((out.volume.get(0, y, 0) - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn clamped_fraction_matches_brute_force() {
        let dims = Dims::d2(16, 16).unwrap();
        let clean = Volume::constant(dims, 0.9);
        let spec = StripeSpec {
            direction: FRAC_PI_2,
            width_range: (1.0, 2.0),
            length: StripeLength::FullExtent,
            amplitude: 0.5,
            density: 0.4,
        };
        let stripes = make_stripes(&spec, dims, 9).unwrap();
        let out = corrupt(&clean, &stripes).unwrap();
        let brute = clean
            .data()
            .iter()
            .zip(stripes.data())
            .filter(|(&c, &s)| {
                let sum = c + s;
                !(0.0..=1.0).contains(&sum)
            })
            .count();
        assert!((out.clamped_fraction - brute as f64 / 256.0).abs() < 1e-15);
        if out.clamped_fraction > MAX_EXACT_CLAMPED_FRACTION {
            assert!(!out.exact_ground_truth());
        }
    }

    #[test]
    fn ground_truth_identity_when_no_clamping() {
        let dims = Dims::d2(32, 32).unwrap();
        let clean = Volume::constant(dims, 0.5);
        let spec = StripeSpec {
            direction: FRAC_PI_2,
            width_range: (1.0, 2.0),
            length: StripeLength::FullExtent,
            amplitude: 0.2,
            density: 0.2,
        };
        let stripes = make_stripes(&spec, dims, 21).unwrap();
        let out = corrupt(&clean, &stripes).unwrap();
        assert!(out.exact_ground_truth());
        for i in 0..dims.len() {
            assert_eq!(out.volume.data()[i] - stripes.data()[i], clean.data()[i]);
        }
    }
}
