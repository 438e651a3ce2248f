//! Image and map file formats, plus BSDS-style dataset discovery.
//!
//! * Binary PGM (`P5`) with maxval 255 or 65535 (16-bit samples big-endian).
//! * PNG grayscale, 8 or 16 bit. Color PNGs are converted to luminance.
//! * `SCF1` raw float maps: the ASCII bytes `SCF1`, then little-endian `u32`
//!   width, `u32` height and a `u32` zero, followed by row-major
//!   little-endian `f32` samples.
//!
//! 8-bit samples load as `v / 255` and 16-bit as `v / 65535`. Writing
//! quantizes with round-half-to-even.

use std::fs;
use std::io::Cursor;
use std::path::{Path, PathBuf};

use crate::congruency::EdgeStrengthMap;
use crate::error::{Error, Result};
use crate::image::{to_grayscale, Image, RgbImage, LUMA_B, LUMA_G, LUMA_R};
use crate::thinning::EdgeMap;

pub const SCF_MAGIC: &[u8; 4] = b"SCF1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Pgm,
    Png,
    Scf,
}

impl ImageFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase());
        match ext.as_deref() {
            Some("pgm") => Ok(ImageFormat::Pgm),
            Some("png") => Ok(ImageFormat::Png),
            Some("scf") => Ok(ImageFormat::Scf),
            _ => Err(Error::Format(format!(
                "{}: unsupported extension (expected .pgm, .png or .scf)",
                path.display()
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitDepth {
    Eight,
    Sixteen,
}

fn quantize(v: f64, max: f64) -> u32 {
    (v.clamp(0.0, 1.0) * max).round_ties_even() as u32
}

// ---------------------------------------------------------------- PGM

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderCursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b' ' | b'\t' | b'\n' | b'\r' | 0x0b | 0x0c => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::Format(format!("PGM header: missing {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .unwrap()
            .parse()
            .map_err(|_| Error::Format(format!("PGM header: bad {what}")))
    }
}

pub fn decode_pgm(bytes: &[u8]) -> Result<Image> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(Error::Format("bad magic: expected binary PGM (P5)".into()));
    }
    let mut cur = HeaderCursor { bytes, pos: 2 };
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::Format("PGM header: zero dimension".into()));
    }
    let depth = match maxval {
        255 => BitDepth::Eight,
        65535 => BitDepth::Sixteen,
        other => return Err(Error::Format(format!("unsupported maxval {other}"))),
    };
    // Exactly one whitespace byte separates the header from the raster.
    if cur.pos >= bytes.len() || !bytes[cur.pos].is_ascii_whitespace() {
        return Err(Error::Format(
            "PGM header: missing separator before raster".into(),
        ));
    }
    let raster = &bytes[cur.pos + 1..];
    let n = width * height;
    let data: Vec<f64> = match depth {
        BitDepth::Eight => {
            if raster.len() < n {
                return Err(Error::Format(format!(
                    "truncated PGM: {} of {n} samples",
                    raster.len()
                )));
            }
            raster[..n].iter().map(|&b| b as f64 / 255.0).collect()
        }
        BitDepth::Sixteen => {
            if raster.len() < 2 * n {
                return Err(Error::Format(format!(
                    "truncated PGM: {} of {} bytes",
                    raster.len(),
                    2 * n
                )));
            }
            raster[..2 * n]
                .chunks_exact(2)
                .map(|b| u16::from_be_bytes([b[0], b[1]]) as f64 / 65535.0)
                .collect()
        }
    };
    Image::new(width, height, data)
}

pub fn encode_pgm(img: &Image, depth: BitDepth) -> Vec<u8> {
    let (max, bytes_per) = match depth {
        BitDepth::Eight => (255u32, 1),
        BitDepth::Sixteen => (65535u32, 2),
    };
    let mut out = format!("P5\n{} {}\n{max}\n", img.width(), img.height()).into_bytes();
    out.reserve(img.len() * bytes_per);
    for &v in img.data() {
        let q = quantize(v, max as f64);
        match depth {
            BitDepth::Eight => out.push(q as u8),
            BitDepth::Sixteen => out.extend_from_slice(&(q as u16).to_be_bytes()),
        }
    }
    out
}

// ---------------------------------------------------------------- PNG

fn png_error(e: impl std::fmt::Display) -> Error {
    Error::Format(format!("PNG: {e}"))
}

pub fn decode_png(bytes: &[u8]) -> Result<Image> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder.read_info().map_err(png_error)?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::Format("PNG: image too large".into()))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(png_error)?;
    let (w, h) = (info.width as usize, info.height as usize);
    let channels = match info.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::GrayscaleAlpha => 2,
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        png::ColorType::Indexed => return Err(Error::Format("PNG: palette not expanded".into())),
    };
    let sixteen = info.bit_depth == png::BitDepth::Sixteen;
    let bytes_per = if sixteen { 2 } else { 1 };
    let mut samples = Vec::with_capacity(w * h * channels);
    for row in buf.chunks(info.line_size).take(h) {
        let row = &row[..w * channels * bytes_per];
        if sixteen {
            samples.extend(
                row.chunks_exact(2)
                    .map(|b| u16::from_be_bytes([b[0], b[1]]) as u32),
            );
        } else {
            samples.extend(row.iter().map(|&b| b as u32));
        }
    }
    if channels <= 2 {
        let max = if sixteen { 65535.0 } else { 255.0 };
        let data = samples
            .chunks_exact(channels)
            .map(|px| px[0] as f64 / max)
            .collect();
        return Image::new(w, h, data);
    }
    if !sixteen {
        let mut inter = Vec::with_capacity(w * h * 3);
        for px in samples.chunks_exact(channels) {
            inter.extend([px[0] as u8, px[1] as u8, px[2] as u8]);
        }
        return to_grayscale(&RgbImage::from_interleaved(w, h, &inter)?);
    }
    let data = samples
        .chunks_exact(channels)
        .map(|px| {
            ((LUMA_R * px[0] as f64 + LUMA_G * px[1] as f64 + LUMA_B * px[2] as f64) / 65535.0)
                .clamp(0.0, 1.0)
        })
        .collect();
    Image::new(w, h, data)
}

pub fn encode_png(img: &Image, depth: BitDepth) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, img.width() as u32, img.height() as u32);
        enc.set_color(png::ColorType::Grayscale);
        let raster: Vec<u8> = match depth {
            BitDepth::Eight => {
                enc.set_depth(png::BitDepth::Eight);
                img.data()
                    .iter()
                    .map(|&v| quantize(v, 255.0) as u8)
                    .collect()
            }
            BitDepth::Sixteen => {
                enc.set_depth(png::BitDepth::Sixteen);
                img.data()
                    .iter()
                    .flat_map(|&v| (quantize(v, 65535.0) as u16).to_be_bytes())
                    .collect()
            }
        };
        let mut writer = enc.write_header().map_err(png_error)?;
        writer.write_image_data(&raster).map_err(png_error)?;
        writer.finish().map_err(png_error)?;
    }
    Ok(out)
}

// ---------------------------------------------------------------- SCF1

pub fn encode_scf(img: &Image) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 4 * img.len());
    out.extend_from_slice(SCF_MAGIC);
    out.extend_from_slice(&(img.width() as u32).to_le_bytes());
    out.extend_from_slice(&(img.height() as u32).to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    for &v in img.data() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

/// Decodes an `SCF1` map; samples are the stored `f32` values widened.
pub fn decode_scf(bytes: &[u8]) -> Result<Image> {
    if bytes.len() < 16 || &bytes[..4] != SCF_MAGIC {
        return Err(Error::Format("bad magic: expected SCF1".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
    let (w, h, reserved) = (word(4), word(8), word(12));
    if reserved != 0 {
        return Err(Error::Format(
            "SCF1: reserved header word is not zero".into(),
        ));
    }
    let n = w * h;
    let body = &bytes[16..];
    if body.len() < 4 * n {
        return Err(Error::Format(format!(
            "truncated SCF1: {} of {} bytes",
            body.len(),
            4 * n
        )));
    }
    let data = body[..4 * n]
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
        .collect();
    Image::new(w, h, data)
}

// ---------------------------------------------------------------- files

pub fn read_image(path: &Path) -> Result<Image> {
    let format = ImageFormat::from_path(path)?;
    let bytes = fs::read(path)?;
    match format {
        ImageFormat::Pgm => decode_pgm(&bytes),
        ImageFormat::Png => decode_png(&bytes),
        ImageFormat::Scf => decode_scf(&bytes),
    }
    .map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Reads a binary edge map; any non-zero sample is an edge.
pub fn read_edge_map(path: &Path) -> Result<EdgeMap> {
    Ok(EdgeMap::from_image(&read_image(path)?))
}

/// Reads a strength map, rejecting samples outside `[0, 1]`.
pub fn read_strength_map(path: &Path) -> Result<EdgeStrengthMap> {
    EdgeStrengthMap::new(read_image(path)?)
}

fn write_with_depth(path: &Path, img: &Image, depth: BitDepth) -> Result<()> {
    let bytes = match ImageFormat::from_path(path)? {
        ImageFormat::Pgm => encode_pgm(img, depth),
        ImageFormat::Png => encode_png(img, depth)?,
        ImageFormat::Scf => encode_scf(img),
    };
    fs::write(path, bytes)?;
    Ok(())
}

/// Writes an intensity image with 8-bit samples.
pub fn write_image(path: &Path, img: &Image) -> Result<()> {
    write_with_depth(path, img, BitDepth::Eight)
}

/// Writes a strength map with 16-bit samples.
pub fn write_strength_map(path: &Path, map: &EdgeStrengthMap) -> Result<()> {
    write_with_depth(path, map.as_image(), BitDepth::Sixteen)
}

/// Writes an edge map as 8-bit 0 / 255.
pub fn write_edge_map(path: &Path, edges: &EdgeMap) -> Result<()> {
    write_with_depth(path, &edges.to_image(), BitDepth::Eight)
}

/// Writes the lossless `SCF1` sidecar regardless of extension.
pub fn write_raw_map(path: &Path, map: &EdgeStrengthMap) -> Result<()> {
    fs::write(path, encode_scf(map.as_image()))?;
    Ok(())
}

pub fn read_raw_map(path: &Path) -> Result<Image> {
    decode_scf(&fs::read(path)?)
}

// ---------------------------------------------------------------- datasets

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetEntry {
    pub id: String,
    pub image: PathBuf,
    pub gt: PathBuf,
}

impl DatasetEntry {
    /// Loads the image and ground truth, checking that their sizes agree.
    pub fn load(&self) -> Result<(Image, EdgeMap)> {
        let img = read_image(&self.image)?;
        let gt = read_edge_map(&self.gt)?;
        if img.width() != gt.width() || img.height() != gt.height() {
            return Err(Error::DimensionMismatch(format!(
                "{}: image {}x{} but ground truth {}x{}",
                self.id,
                img.width(),
                img.height(),
                gt.width(),
                gt.height()
            )));
        }
        Ok((img, gt))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Dataset {
    pub entries: Vec<DatasetEntry>,
    pub warnings: Vec<String>,
}

fn image_files(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if !path.is_file() || ImageFormat::from_path(&path).is_err() {
            continue;
        }
        if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
            files.push((stem.to_string(), path));
        }
    }
    files.sort();
    Ok(files)
}

/// Pairs `images/<id>.*` with `gt/<id>.*` under `dir`, sorted by id.
pub fn ingest_dataset(dir: &Path) -> Result<Dataset> {
    let images = image_files(&dir.join("images"))?;
    let gts = image_files(&dir.join("gt"))?;
    let mut dataset = Dataset::default();
    for (id, path) in &images {
        match gts.iter().find(|(g, _)| g == id) {
            Some((_, gt)) => dataset.entries.push(DatasetEntry {
                id: id.clone(),
                image: path.clone(),
                gt: gt.clone(),
            }),
            None => dataset
                .warnings
                .push(format!("{}: no matching ground truth", path.display())),
        }
    }
    for (id, path) in &gts {
        if !images.iter().any(|(i, _)| i == id) {
            dataset
                .warnings
                .push(format!("{}: no matching image", path.display()));
        }
    }
    if dataset.entries.is_empty() {
        return Err(Error::Empty(format!(
            "{}: no image / ground-truth pairs found",
            dir.display()
        )));
    }
    Ok(dataset)
}

#[cfg(test)]
mod tests {
    use rand::{rngs::StdRng, Rng, SeedableRng};

    use super::*;

    fn random_image(w: usize, h: usize, seed: u64) -> Image {
        let mut rng = StdRng::seed_from_u64(seed);
        Image::from_fn(w, h, |_, _| rng.random::<f64>())
    }

    #[test]
    fn pgm8_round_trip_within_quantization() {
        let img = random_image(13, 7, 1);
        let back = decode_pgm(&encode_pgm(&img, BitDepth::Eight)).unwrap();
        for (a, b) in img.data().iter().zip(back.data()) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-12);
        }
    }

    #[test]
    fn pgm16_round_trip_within_quantization() {
        let img = random_image(9, 11, 2);
        let back = decode_pgm(&encode_pgm(&img, BitDepth::Sixteen)).unwrap();
        for (a, b) in img.data().iter().zip(back.data()) {
            assert!((a - b).abs() <= 0.5 / 65535.0 + 1e-12);
        }
    }

    #[test]
    fn pgm_header_with_comments() {
        let mut bytes = b"P5\n# made by hand\n2 1\n# max\n255\n".to_vec();
        bytes.extend([0, 255]);
        let img = decode_pgm(&bytes).unwrap();
        assert_eq!(img.data(), &[0.0, 1.0]);
    }

    #[test]
    fn pgm_errors() {
        assert!(
            matches!(decode_pgm(b"P6\n1 1\n255\n\0\0\0"), Err(Error::Format(m)) if m.contains("magic"))
        );
        assert!(
            matches!(decode_pgm(b"P5\n2 2\n255\n\0\0"), Err(Error::Format(m)) if m.contains("truncated"))
        );
        assert!(
            matches!(decode_pgm(b"P5\n1 1\n1023\n\0\0"), Err(Error::Format(m)) if m.contains("maxval"))
        );
    }

    #[test]
    fn half_to_even_quantization() {
        // 0.5/65535 * 65535 = 0.5 rounds to 0, 1.5 rounds to 2.
        let img = Image::new(2, 1, vec![0.5 / 65535.0, 1.5 / 65535.0]).unwrap();
        let bytes = encode_pgm(&img, BitDepth::Sixteen);
        let raster = &bytes[bytes.len() - 4..];
        assert_eq!(raster, &[0, 0, 0, 2]);
    }

    #[test]
    fn png_round_trip() {
        let img = random_image(10, 6, 3);
        for depth in [BitDepth::Eight, BitDepth::Sixteen] {
            let back = decode_png(&encode_png(&img, depth).unwrap()).unwrap();
            let tol = match depth {
                BitDepth::Eight => 0.5 / 255.0,
                BitDepth::Sixteen => 0.5 / 65535.0,
            };
            for (a, b) in img.data().iter().zip(back.data()) {
                assert!((a - b).abs() <= tol + 1e-12);
            }
        }
    }

    #[test]
    fn scf_round_trip_is_bit_exact() {
        let img = random_image(7, 5, 4).map(|v| v as f32 as f64);
        let bytes = encode_scf(&img);
        assert_eq!(&bytes[..4], b"SCF1");
        assert_eq!(&bytes[4..16], &[7, 0, 0, 0, 5, 0, 0, 0, 0, 0, 0, 0]);
        let back = decode_scf(&bytes).unwrap();
        assert!(img
            .data()
            .iter()
            .zip(back.data())
            .all(|(a, b)| a.to_bits() == b.to_bits()));
        assert!(decode_scf(&bytes[..20]).is_err());
        assert!(decode_scf(b"SCF2\0\0\0\0\0\0\0\0\0\0\0\0").is_err());
    }

    fn touch_pgm(path: &Path) {
        fs::write(path, encode_pgm(&Image::filled(4, 4, 0.0), BitDepth::Eight)).unwrap();
    }

    #[test]
    fn dataset_pairs_and_orphans() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir(dir.path().join("images")).unwrap();
        fs::create_dir(dir.path().join("gt")).unwrap();
        for id in ["c", "a", "b"] {
            touch_pgm(&dir.path().join("images").join(format!("{id}.pgm")));
            touch_pgm(&dir.path().join("gt").join(format!("{id}.pgm")));
        }
        touch_pgm(&dir.path().join("images/orphan.pgm"));
        let ds = ingest_dataset(dir.path()).unwrap();
        let ids: Vec<_> = ds.entries.iter().map(|e| e.id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
        assert_eq!(ds.warnings.len(), 1);
        assert!(ds.entries[0].load().is_ok());
    }

    #[test]
    fn dataset_mixed_extensions() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir(dir.path().join("images")).unwrap();
        fs::create_dir(dir.path().join("gt")).unwrap();
        touch_pgm(&dir.path().join("images/a.pgm"));
        fs::write(
            dir.path().join("gt/a.png"),
            encode_png(&Image::filled(4, 4, 0.0), BitDepth::Eight).unwrap(),
        )
        .unwrap();
        assert_eq!(ingest_dataset(dir.path()).unwrap().entries.len(), 1);
    }

    #[test]
    fn dataset_errors() {
        let dir = tempfile::tempdir().unwrap();
        assert!(ingest_dataset(dir.path()).is_err());
        fs::create_dir(dir.path().join("images")).unwrap();
        fs::create_dir(dir.path().join("gt")).unwrap();
        assert!(matches!(ingest_dataset(dir.path()), Err(Error::Empty(_))));
    }
}
