//! Grayscale image grid, color conversion and the separable filters shared
//! by the detectors.
//!
//! Every filter reads out-of-bounds samples by clamping coordinates to the
//! nearest edge pixel (replicate padding).

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Row-major grid of finite real samples, nominally in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::param(
                "dimensions",
                "width and height must be positive",
            ));
        }
        if data.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{} samples for a {width}x{height} image",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::param(
                "samples",
                format!("non-finite sample at index {i}"),
            ));
        }
        Ok(Image {
            width,
            height,
            data,
        })
    }

    /// # Panics
    /// If either dimension is zero or `value` is not finite.
    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        assert!(width > 0 && height > 0 && value.is_finite());
        Image {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel.
    ///
    /// # Panics
    /// If either dimension is zero or `f` returns a non-finite value.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(width > 0 && height > 0);
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                let v = f(x, y);
                assert!(v.is_finite(), "non-finite sample at ({x}, {y})");
                data.push(v);
            }
        }
        Image {
            width,
            height,
            data,
        }
    }

    pub(crate) fn from_vec_unchecked(width: usize, height: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), width * height);
        Image {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Sample with replicate padding for signed coordinates.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> f64 {
        let xc = x.clamp(0, self.width as isize - 1) as usize;
        let yc = y.clamp(0, self.height as isize - 1) as usize;
        self.data[yc * self.width + xc]
    }

    pub fn row(&self, y: usize) -> &[f64] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    pub fn same_size(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Applies `f` to every sample.
    ///
    /// # Panics
    /// If `f` produces a non-finite value.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Image {
        let data: Vec<f64> = self.data.iter().map(|&v| f(v)).collect();
        assert!(data.iter().all(|v| v.is_finite()));
        Image::from_vec_unchecked(self.width, self.height, data)
    }

    pub fn max_value(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Three 8-bit channel planes of equal size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub r: Vec<u8>,
    pub g: Vec<u8>,
    pub b: Vec<u8>,
}

impl RgbImage {
    /// Splits interleaved `RGBRGB...` bytes into planes.
    pub fn from_interleaved(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        if bytes.len() != width * height * 3 {
            return Err(Error::DimensionMismatch(format!(
                "{} bytes for a {width}x{height} RGB image",
                bytes.len()
            )));
        }
        let mut r = Vec::with_capacity(width * height);
        let mut g = Vec::with_capacity(width * height);
        let mut b = Vec::with_capacity(width * height);
        for px in bytes.chunks_exact(3) {
            r.push(px[0]);
            g.push(px[1]);
            b.push(px[2]);
        }
        Ok(RgbImage {
            width,
            height,
            r,
            g,
            b,
        })
    }
}

pub const LUMA_R: f64 = 0.299;
pub const LUMA_G: f64 = 0.587;
pub const LUMA_B: f64 = 0.114;

/// Rec. 601 luminance scaled to `[0, 1]`.
pub fn to_grayscale(rgb: &RgbImage) -> Result<Image> {
    let n = rgb.width * rgb.height;
    for (name, plane) in [("red", &rgb.r), ("green", &rgb.g), ("blue", &rgb.b)] {
        if plane.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{name} channel has {} samples, expected {n}",
                plane.len()
            )));
        }
    }
    let data = (0..n)
        .map(|i| {
            let l = LUMA_R * rgb.r[i] as f64 + LUMA_G * rgb.g[i] as f64 + LUMA_B * rgb.b[i] as f64;
            (l / 255.0).clamp(0.0, 1.0)
        })
        .collect();
    Image::new(rgb.width, rgb.height, data)
}

/// Sampled Gaussian of odd length `window`, normalized to unit sum.
pub fn gaussian_kernel(window: usize, sigma: f64) -> Result<Vec<f64>> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::param(
            "window",
            format!("must be odd and positive, got {window}"),
        ));
    }
    if !sigma.is_finite() || sigma <= 0.0 {
        return Err(Error::param(
            "sigma",
            format!("must be positive, got {sigma}"),
        ));
    }
    let r = (window / 2) as f64;
    let mut k: Vec<f64> = (0..window)
        .map(|i| {
            let d = i as f64 - r;
            (-(d * d) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    Ok(k)
}

/// Separable Gaussian blur with replicate padding.
pub fn gaussian_smooth(img: &Image, window: usize, sigma: f64) -> Result<Image> {
    let kernel = gaussian_kernel(window, sigma)?;
    if window > img.width.min(img.height) {
        return Err(Error::param(
            "window",
            format!(
                "{window} exceeds the smaller image dimension {}",
                img.width.min(img.height)
            ),
        ));
    }
    Ok(convolve_separable(img, &kernel))
}

fn convolve_separable(img: &Image, kernel: &[f64]) -> Image {
    let (w, h) = (img.width, img.height);
    let r = (kernel.len() / 2) as isize;

    let mut horiz = vec![0.0; w * h];
    horiz.par_chunks_mut(w).enumerate().for_each(|(y, out)| {
        let y = y as isize;
        for (x, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (i, &kv) in kernel.iter().enumerate() {
                acc += kv * img.get_clamped(x as isize + i as isize - r, y);
            }
            *o = acc;
        }
    });

    let mut out = vec![0.0; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (x, o) in row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (i, &kv) in kernel.iter().enumerate() {
                let yy = (y as isize + i as isize - r).clamp(0, h as isize - 1) as usize;
                acc += kv * horiz[yy * w + x];
            }
            *o = acc;
        }
    });
    Image::from_vec_unchecked(w, h, out)
}

/// Horizontal and vertical derivative estimates, same size as the source.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    pub width: usize,
    pub height: usize,
    pub gx: Vec<f64>,
    pub gy: Vec<f64>,
}

impl GradientField {
    #[inline]
    pub fn at(&self, x: usize, y: usize) -> (f64, f64) {
        let i = y * self.width + x;
        (self.gx[i], self.gy[i])
    }

    pub fn magnitude(&self) -> Image {
        let data = self
            .gx
            .iter()
            .zip(&self.gy)
            .map(|(gx, gy)| gx.hypot(*gy))
            .collect();
        Image::from_vec_unchecked(self.width, self.height, data)
    }
}

/// 3x3 Sobel operator without the 1/8 normalization.
pub fn sobel_gradients(img: &Image) -> Result<GradientField> {
    if img.width < 3 || img.height < 3 {
        return Err(Error::ImageTooSmall(format!(
            "sobel needs at least 3x3, got {}x{}",
            img.width, img.height
        )));
    }
    let (w, h) = (img.width, img.height);
    let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..h)
        .into_par_iter()
        .map(|y| {
            let y = y as isize;
            let mut gx = Vec::with_capacity(w);
            let mut gy = Vec::with_capacity(w);
            for x in 0..w as isize {
                let p = |dx: isize, dy: isize| img.get_clamped(x + dx, y + dy);
                gx.push(
                    (p(1, -1) + 2.0 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2.0 * p(-1, 0) + p(-1, 1)),
                );
                gy.push(
                    (p(-1, 1) + 2.0 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2.0 * p(0, -1) + p(1, -1)),
                );
            }
            (gx, gy)
        })
        .collect();
    let mut gx = Vec::with_capacity(w * h);
    let mut gy = Vec::with_capacity(w * h);
    for (rx, ry) in rows {
        gx.extend(rx);
        gy.extend(ry);
    }
    Ok(GradientField {
        width: w,
        height: h,
        gx,
        gy,
    })
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
    fn grayscale_known_pixels() {
        let rgb = RgbImage::from_interleaved(2, 1, &[255, 255, 255, 255, 0, 0]).unwrap();
        let g = to_grayscale(&rgb).unwrap();
        assert_eq!(g.get(0, 0), 1.0);
        assert!((g.get(1, 0) - 0.299).abs() < 1e-15);
    }

    #[test]
    fn grayscale_matches_scalar_formula() {
        let mut rng = StdRng::seed_from_u64(7);
        let bytes: Vec<u8> = (0..8 * 8 * 3).map(|_| rng.random()).collect();
        let rgb = RgbImage::from_interleaved(8, 8, &bytes).unwrap();
        let g = to_grayscale(&rgb).unwrap();
        for (i, px) in bytes.chunks_exact(3).enumerate() {
            let expect =
                (0.299 * px[0] as f64 + 0.587 * px[1] as f64 + 0.114 * px[2] as f64) / 255.0;
            assert!((g.data()[i] - expect).abs() < 1e-15);
            assert!((0.0..=1.0).contains(&g.data()[i]));
        }
    }

    #[test]
    fn grayscale_rejects_mismatched_channels() {
        let rgb = RgbImage {
            width: 2,
            height: 2,
            r: vec![0; 4],
            g: vec![0; 3],
            b: vec![0; 4],
        };
        assert!(matches!(
            to_grayscale(&rgb),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn smoothing_preserves_constants() {
        let img = Image::filled(12, 9, 0.4);
        let out = gaussian_smooth(&img, 7, 3.5).unwrap();
        assert!(out.data().iter().all(|v| (v - 0.4).abs() < 1e-15));
    }

    #[test]
    fn smoothing_impulse_reproduces_kernel() {
        let mut img = Image::filled(15, 15, 0.0);
        img.data[7 * 15 + 7] = 1.0;
        let out = gaussian_smooth(&img, 7, 3.5).unwrap();
        let k = gaussian_kernel(7, 3.5).unwrap();
        for y in 0..15 {
            for x in 0..15 {
                let (dx, dy) = (x as isize - 7, y as isize - 7);
                let expect = if dx.abs() <= 3 && dy.abs() <= 3 {
                    k[(dx + 3) as usize] * k[(dy + 3) as usize]
                } else {
                    0.0
                };
                assert!((out.get(x, y) - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn smoothing_matches_direct_2d_convolution() {
        let img = random_image(16, 16, 3);
        let out = gaussian_smooth(&img, 7, 3.5).unwrap();
        // Direct 2-D oracle with the outer-product kernel.
        let k = gaussian_kernel(7, 3.5).unwrap();
        for y in 0..16isize {
            for x in 0..16isize {
                let mut acc = 0.0;
                for j in -3..=3isize {
                    for i in -3..=3isize {
                        acc += k[(i + 3) as usize]
                            * k[(j + 3) as usize]
                            * img.get_clamped(x + i, y + j);
                    }
                }
                assert!((out.get(x as usize, y as usize) - acc).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn smoothing_commutes_with_offset() {
        let img = random_image(16, 12, 11);
        let shifted = img.map(|v| v + 0.3);
        let a = gaussian_smooth(&img, 5, 1.2).unwrap();
        let b = gaussian_smooth(&shifted, 5, 1.2).unwrap();
        for (u, v) in a.data().iter().zip(b.data()) {
            assert!((u + 0.3 - v).abs() <= 1e-12);
        }
    }

    #[test]
    fn smoothing_rejects_bad_parameters() {
        let img = Image::filled(10, 10, 0.0);
        assert!(gaussian_smooth(&img, 4, 1.0).is_err());
        assert!(gaussian_smooth(&img, 3, 0.0).is_err());
        assert!(gaussian_smooth(&img, 3, -1.0).is_err());
        assert!(gaussian_smooth(&img, 11, 1.0).is_err());
    }

    #[test]
    fn sobel_constant_is_zero() {
        let g = sobel_gradients(&Image::filled(5, 4, 0.7)).unwrap();
        assert!(g.gx.iter().chain(&g.gy).all(|&v| v == 0.0));
    }

    #[test]
    fn sobel_vertical_step() {
        let c = 4;
        let img = Image::from_fn(10, 8, |x, _| if x <= c { 0.0 } else { 1.0 });
        let g = sobel_gradients(&img).unwrap();
        // Direct kernel application oracle.
        for y in 0..8 {
            for x in 0..10 {
                let (gx, gy) = g.at(x, y);
                let expect = if x == c || x == c + 1 { 4.0 } else { 0.0 };
                assert_eq!(gx, expect);
                assert_eq!(gy, 0.0);
            }
        }
    }

    #[test]
    fn sobel_horizontal_ramp() {
        let w = 12;
        let img = Image::from_fn(w, 6, |x, _| x as f64 / w as f64);
        let g = sobel_gradients(&img).unwrap();
        for y in 1..5 {
            for x in 1..w - 1 {
                let (gx, gy) = g.at(x, y);
                assert!((gx - 8.0 / w as f64).abs() < 1e-12);
                assert_eq!(gy, 0.0);
            }
        }
    }

    #[test]
    fn sobel_too_small() {
        assert!(matches!(
            sobel_gradients(&Image::filled(2, 5, 0.0)),
            Err(Error::ImageTooSmall(_))
        ));
    }
}
