//! Image ingestion and export: multi-page grayscale TIFF (8/16-bit unsigned
//! or 32-bit float), 2D grayscale PNG (8/16-bit), and raw little-endian f32
//! with a text sidecar describing the dims.
//!
//! Reading normalizes into [0, 1] and keeps the provenance; integer export
//! clips to [0, 1] before quantizing, float export writes values unclipped.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use tiff::decoder::{Decoder, DecodingResult};
use tiff::encoder::{colortype, TiffEncoder};
use tiff::ColorType;

use crate::error::{Error, Result};
use crate::volume::{
    normalize, quantize_u16, quantize_u8, Dims, NormalizeRecord, RawSamples, Volume,
};

/// Float samples already inside [0, 1] load unchanged (identity record);
/// anything else is min-max rescaled like `normalize`.
fn normalize_float_file(samples: Vec<f32>, dims: Dims) -> Result<(Volume, NormalizeRecord)> {
    if samples.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite);
    }
    if samples.iter().all(|s| (0.0..=1.0).contains(s)) {
        let data: Vec<f64> = samples.iter().map(|&s| s as f64).collect();
        return Ok((
            Volume::from_vec(dims, data)?,
            NormalizeRecord::MinMax {
                min: 0.0,
                max: 1.0,
                degenerate: false,
            },
        ));
    }
    normalize(&RawSamples::F32(samples), dims)
}

/// A normalized volume plus where its values came from.
#[derive(Debug, Clone)]
pub struct LoadedVolume {
    pub volume: Volume,
    pub record: NormalizeRecord,
    pub path: PathBuf,
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn tiff_err(path: &Path, source: tiff::TiffError) -> Error {
    Error::Tiff {
        path: path.to_path_buf(),
        source,
    }
}

fn unsupported(path: &Path, reason: impl Into<String>) -> Error {
    Error::UnsupportedFormat {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

/// Reads a 2D/3D grayscale image by extension (.tif/.tiff, .png, .raw) and
/// normalizes it to [0, 1].
pub fn read_image(path: &Path) -> Result<LoadedVolume> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .unwrap_or_default();
    match ext.as_str() {
        "tif" | "tiff" => read_tiff(path),
        "png" => read_png(path),
        "raw" => read_raw(path),
        other => Err(unsupported(
            path,
            format!("unknown extension '{other}' (expected tif/tiff, png, or raw)"),
        )),
    }
}

fn read_tiff(path: &Path) -> Result<LoadedVolume> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut decoder = Decoder::new(BufReader::new(file)).map_err(|e| tiff_err(path, e))?;

    let mut pages_u8: Vec<Vec<u8>> = Vec::new();
    let mut pages_u16: Vec<Vec<u16>> = Vec::new();
    let mut pages_f32: Vec<Vec<f32>> = Vec::new();
    let mut dims_xy: Option<(usize, usize)> = None;

    loop {
        let color = decoder.colortype().map_err(|e| tiff_err(path, e))?;
        match color {
            ColorType::Gray(_) => {}
            other => {
                return Err(unsupported(
                    path,
                    format!("only grayscale TIFF is supported, got {other:?}"),
                ))
            }
        }
        let (w, h) = decoder.dimensions().map_err(|e| tiff_err(path, e))?;
        let (w, h) = (w as usize, h as usize);
        match dims_xy {
            None => dims_xy = Some((w, h)),
            Some(d) if d != (w, h) => {
                return Err(unsupported(path, "TIFF pages differ in size"));
            }
            _ => {}
        }
        match decoder.read_image().map_err(|e| tiff_err(path, e))? {
            DecodingResult::U8(data) => pages_u8.push(data),
            DecodingResult::U16(data) => pages_u16.push(data),
            DecodingResult::F32(data) => pages_f32.push(data),
            other => {
                return Err(unsupported(
                    path,
                    format!("unsupported TIFF sample format {other:?}"),
                ))
            }
        }
        if !decoder.more_images() {
            break;
        }
        decoder.next_image().map_err(|e| tiff_err(path, e))?;
    }

    let (nx, ny) = dims_xy.ok_or_else(|| unsupported(path, "TIFF has no pages"))?;
    let kinds = [
        !pages_u8.is_empty(),
        !pages_u16.is_empty(),
        !pages_f32.is_empty(),
    ];
    if kinds.iter().filter(|k| **k).count() != 1 {
        return Err(unsupported(path, "TIFF pages mix sample formats"));
    }
    let raw = if !pages_u8.is_empty() {
        RawSamples::U8(pages_u8.concat())
    } else if !pages_u16.is_empty() {
        RawSamples::U16(pages_u16.concat())
    } else {
        RawSamples::F32(pages_f32.concat())
    };
    let nz = raw.len() / (nx * ny);
    let dims = Dims::new(nx, ny, nz)?;
    let (volume, record) = match raw {
        RawSamples::F32(samples) => normalize_float_file(samples, dims)?,
        other => normalize(&other, dims)?,
    };
    Ok(LoadedVolume {
        volume,
        record,
        path: path.to_path_buf(),
    })
}

fn read_png(path: &Path) -> Result<LoadedVolume> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let decoder = png::Decoder::new(BufReader::new(file));
    let mut reader = decoder.read_info().map_err(|e| Error::Png {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let mut buf = vec![0u8; reader.output_buffer_size().unwrap_or(0)];
    let info = reader.next_frame(&mut buf).map_err(|e| Error::Png {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    if info.color_type != png::ColorType::Grayscale {
        return Err(unsupported(
            path,
            format!("only grayscale PNG is supported, got {:?}", info.color_type),
        ));
    }
    let (nx, ny) = (info.width as usize, info.height as usize);
    let dims = Dims::d2(nx, ny)?;
    let raw = match info.bit_depth {
        png::BitDepth::Eight => RawSamples::U8(buf[..nx * ny].to_vec()),
        png::BitDepth::Sixteen => {
            let mut samples = Vec::with_capacity(nx * ny);
            for pair in buf[..2 * nx * ny].chunks_exact(2) {
                samples.push(u16::from_be_bytes([pair[0], pair[1]]));
            }
            RawSamples::U16(samples)
        }
        other => {
            return Err(unsupported(
                path,
                format!("unsupported PNG bit depth {other:?}"),
            ))
        }
    };
    let (volume, record) = normalize(&raw, dims)?;
    Ok(LoadedVolume {
        volume,
        record,
        path: path.to_path_buf(),
    })
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".dims");
    PathBuf::from(p)
}

fn read_raw(path: &Path) -> Result<LoadedVolume> {
    let sidecar = sidecar_path(path);
    let dims_text = std::fs::read_to_string(&sidecar).map_err(|e| io_err(&sidecar, e))?;
    let parts: Vec<usize> = dims_text
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| unsupported(&sidecar, "sidecar must hold 'nx ny nz'"))?;
    if parts.len() != 3 {
        return Err(unsupported(
            &sidecar,
            "sidecar must hold exactly 'nx ny nz'",
        ));
    }
    let dims = Dims::new(parts[0], parts[1], parts[2])?;

    let mut file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes).map_err(|e| io_err(path, e))?;
    if bytes.len() != 4 * dims.len() {
        return Err(unsupported(
            path,
            format!(
                "raw file holds {} bytes but dims {} require {}",
                bytes.len(),
                dims,
                4 * dims.len()
            ),
        ));
    }
    let samples: Vec<f32> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    let (volume, record) = normalize_float_file(samples, dims)?;
    Ok(LoadedVolume {
        volume,
        record,
        path: path.to_path_buf(),
    })
}

/// Sample format of an exported image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Tiff8,
    Tiff16,
    /// 32-bit float TIFF, written unclipped.
    TiffF32,
    Png8,
    Png16,
    /// Raw little-endian f32 plus dims sidecar, written unclipped.
    RawF32,
}

impl ExportFormat {
    /// Picks a format from the path extension: TIFF defaults to 16-bit,
    /// `--float` callers should pass TiffF32/RawF32 explicitly.
    pub fn from_extension(path: &Path) -> Result<Self> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .unwrap_or_default();
        match ext.as_str() {
            "tif" | "tiff" => Ok(ExportFormat::Tiff16),
            "png" => Ok(ExportFormat::Png16),
            "raw" => Ok(ExportFormat::RawF32),
            other => Err(unsupported(
                path,
                format!("cannot infer export format from extension '{other}'"),
            )),
        }
    }

    pub fn is_float(&self) -> bool {
        matches!(self, ExportFormat::TiffF32 | ExportFormat::RawF32)
    }
}

/// Export controls.
#[derive(Debug, Clone, Copy)]
pub struct ExportOptions {
    pub format: ExportFormat,
    /// Map a signed stripe field from [-1, 1] to [0, 1] via (s + 1) / 2
    /// before clipping/quantization (integer formats only).
    pub shift_signed: bool,
}

impl ExportOptions {
    pub fn new(format: ExportFormat) -> Self {
        ExportOptions {
            format,
            shift_signed: false,
        }
    }
}

/// Writes a volume (or signed field) to disk. Integer formats clip to [0, 1]
/// and quantize round-half-even; float formats keep values unclipped. Output
/// bytes are deterministic for fixed input and options.
pub fn write_image(v: &Volume, path: &Path, options: &ExportOptions) -> Result<()> {
    let dims = v.dims();
    let shifted: Option<Vec<f64>> = if options.shift_signed && !options.format.is_float() {
        Some(v.data().iter().map(|&s| (s + 1.0) * 0.5).collect())
    } else {
        None
    };
    let data: &[f64] = shifted.as_deref().unwrap_or_else(|| v.data());

    match options.format {
        ExportFormat::Tiff8 | ExportFormat::Tiff16 | ExportFormat::TiffF32 => {
            let file = File::create(path).map_err(|e| io_err(path, e))?;
            let mut enc = TiffEncoder::new(BufWriter::new(file)).map_err(|e| tiff_err(path, e))?;
            for z in 0..dims.nz {
                let slice = &data[z * dims.slice_len()..(z + 1) * dims.slice_len()];
                match options.format {
                    ExportFormat::Tiff8 => {
                        let page: Vec<u8> = slice.iter().map(|&x| quantize_u8(x)).collect();
                        enc.write_image::<colortype::Gray8>(dims.nx as u32, dims.ny as u32, &page)
                            .map_err(|e| tiff_err(path, e))?;
                    }
                    ExportFormat::Tiff16 => {
                        let page: Vec<u16> = slice.iter().map(|&x| quantize_u16(x)).collect();
                        enc.write_image::<colortype::Gray16>(dims.nx as u32, dims.ny as u32, &page)
                            .map_err(|e| tiff_err(path, e))?;
                    }
                    _ => {
                        let page: Vec<f32> = slice.iter().map(|&x| x as f32).collect();
                        enc.write_image::<colortype::Gray32Float>(
                            dims.nx as u32,
                            dims.ny as u32,
                            &page,
                        )
                        .map_err(|e| tiff_err(path, e))?;
                    }
                }
            }
            Ok(())
        }
        ExportFormat::Png8 | ExportFormat::Png16 => {
            if !dims.is_2d() {
                return Err(unsupported(path, "PNG export requires a 2D volume"));
            }
            let file = File::create(path).map_err(|e| io_err(path, e))?;
            let mut enc = png::Encoder::new(BufWriter::new(file), dims.nx as u32, dims.ny as u32);
            enc.set_color(png::ColorType::Grayscale);
            let bytes: Vec<u8> = match options.format {
                ExportFormat::Png8 => {
                    enc.set_depth(png::BitDepth::Eight);
                    data.iter().map(|&x| quantize_u8(x)).collect()
                }
                _ => {
                    enc.set_depth(png::BitDepth::Sixteen);
                    data.iter()
                        .flat_map(|&x| quantize_u16(x).to_be_bytes())
                        .collect()
                }
            };
            let mut writer = enc.write_header().map_err(|e| Error::Png {
                path: path.to_path_buf(),
                reason: e.to_string(),
            })?;
            writer.write_image_data(&bytes).map_err(|e| Error::Png {
                path: path.to_path_buf(),
                reason: e.to_string(),
            })?;
            Ok(())
        }
        ExportFormat::RawF32 => {
            let mut file = BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?);
            for &x in data {
                file.write_all(&(x as f32).to_le_bytes())
                    .map_err(|e| io_err(path, e))?;
            }
            file.flush().map_err(|e| io_err(path, e))?;
            let sidecar = sidecar_path(path);
            std::fs::write(&sidecar, format!("{} {} {}\n", dims.nx, dims.ny, dims.nz))
                .map_err(|e| io_err(&sidecar, e))?;
            Ok(())
        }
    }
}
