//! Non-maximum suppression and thresholding into binary edge maps.

use rayon::prelude::*;

use crate::congruency::EdgeStrengthMap;
use crate::error::{Error, Result};
use crate::image::{gaussian_smooth, sobel_gradients, GradientField, Image};

/// Binary edge / non-edge grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeMap {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl EdgeMap {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 || data.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{} flags for a {width}x{height} edge map",
                data.len()
            )));
        }
        Ok(EdgeMap {
            width,
            height,
            data,
        })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        EdgeMap {
            width,
            height,
            data: vec![false; width * height],
        }
    }

    /// Marks every pixel whose sample is strictly positive.
    pub fn from_image(img: &Image) -> Self {
        EdgeMap {
            width: img.width(),
            height: img.height(),
            data: img.data().iter().map(|&v| v > 0.0).collect(),
        }
    }

    /// 1.0 on edges, 0.0 elsewhere.
    pub fn to_image(&self) -> Image {
        Image::from_vec_unchecked(
            self.width,
            self.height,
            self.data
                .iter()
                .map(|&e| if e { 1.0 } else { 0.0 })
                .collect(),
        )
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
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, edge: bool) {
        self.data[y * self.width + x] = edge;
    }

    #[inline]
    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&e| e).count()
    }

    pub fn same_size(&self, other: &EdgeMap) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Coordinates `(x, y)` of every edge pixel in row-major order.
    pub fn pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &e)| e)
            .map(move |(i, _)| (i % self.width, i / self.width))
    }
}

/// Window and sigma of the Gaussian that integrates the structure tensor
/// when orienting the strength map; `None` uses the pointwise gradient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NmsOptions {
    pub orientation_smoothing: Option<(usize, f64)>,
}

impl Default for NmsOptions {
    fn default() -> Self {
        NmsOptions {
            orientation_smoothing: Some((3, 0.8)),
        }
    }
}

/// Dominant gradient axis of `map` from its Sobel structure tensor.
///
/// The returned vectors have the direction of the tensor's principal
/// eigenvector and length equal to the tensor trace, so flat neighborhoods
/// come out as zero. Unlike the raw gradient this stays well defined on the
/// crest of a symmetric ridge, where Sobel itself vanishes.
pub fn structure_orientation(
    map: &Image,
    smoothing: Option<(usize, f64)>,
) -> Result<GradientField> {
    let g = sobel_gradients(map)?;
    let Some((window, sigma)) = smoothing else {
        return Ok(g);
    };
    let (w, h) = (g.width, g.height);
    let comp = |f: &dyn Fn(f64, f64) -> f64| {
        let data = g.gx.iter().zip(&g.gy).map(|(&x, &y)| f(x, y)).collect();
        gaussian_smooth(&Image::from_vec_unchecked(w, h, data), window, sigma)
    };
    let jxx = comp(&|x, _| x * x)?;
    let jxy = comp(&|x, y| x * y)?;
    let jyy = comp(&|_, y| y * y)?;
    let mut gx = Vec::with_capacity(w * h);
    let mut gy = Vec::with_capacity(w * h);
    for i in 0..w * h {
        let (a, b, c) = (jxx.data()[i], jxy.data()[i], jyy.data()[i]);
        let trace = a + c;
        if trace <= 0.0 {
            gx.push(0.0);
            gy.push(0.0);
            continue;
        }
        // Half-angle of (a - c, 2b), without trigonometry.
        let r = ((a - c) * (a - c) + 4.0 * b * b).sqrt();
        let cos2 = if r > 0.0 { (a - c) / r } else { 1.0 };
        let cos = (0.5 * (1.0 + cos2)).max(0.0).sqrt();
        let sin = (0.5 * (1.0 - cos2)).max(0.0).sqrt().copysign(b);
        gx.push(trace * cos);
        gy.push(trace * sin);
    }
    Ok(GradientField {
        width: w,
        height: h,
        gx,
        gy,
    })
}

#[inline]
fn bilinear(img: &Image, x: f64, y: f64) -> f64 {
    let x = x.clamp(0.0, (img.width() - 1) as f64);
    let y = y.clamp(0.0, (img.height() - 1) as f64);
    let (x0, y0) = (x.floor() as usize, y.floor() as usize);
    let (x1, y1) = (
        (x0 + 1).min(img.width() - 1),
        (y0 + 1).min(img.height() - 1),
    );
    let (fx, fy) = (x - x0 as f64, y - y0 as f64);
    let top = (1.0 - fx) * img.get(x0, y0) + fx * img.get(x1, y0);
    let bottom = (1.0 - fx) * img.get(x0, y1) + fx * img.get(x1, y1);
    (1.0 - fy) * top + fy * bottom
}

/// Keeps a pixel only if it is a maximum of `magnitude` along the direction
/// given by `gradients`; everything else becomes 0.
///
/// Neighbors one pixel away along the unit gradient are read by bilinear
/// interpolation. The direction is first flipped into the canonical half
/// plane (`dx > 0`, or `dx == 0` and `dy > 0`). The pixel must be strictly
/// greater than its forward neighbor and at least equal to the backward one,
/// so a plateau two pixels wide keeps exactly its forward-most pixel while a
/// flat region keeps nothing. Pixels with zero gradient are suppressed.
pub fn suppress_non_maxima(magnitude: &Image, gradients: &GradientField) -> Result<Image> {
    if magnitude.width() != gradients.width || magnitude.height() != gradients.height {
        return Err(Error::DimensionMismatch(
            "gradient field and magnitude differ in size".into(),
        ));
    }
    let (w, h) = (magnitude.width(), magnitude.height());
    let mut out = vec![0.0; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (x, o) in row.iter_mut().enumerate() {
            let v = magnitude.get(x, y);
            let (mut gx, mut gy) = gradients.at(x, y);
            let norm = (gx * gx + gy * gy).sqrt();
            if norm == 0.0 || v <= 0.0 {
                continue;
            }
            gx /= norm;
            gy /= norm;
            if gx < 0.0 || (gx == 0.0 && gy < 0.0) {
                gx = -gx;
                gy = -gy;
            }
            let (xf, yf) = (x as f64, y as f64);
            let forward = bilinear(magnitude, xf + gx, yf + gy);
            let backward = bilinear(magnitude, xf - gx, yf - gy);
            if v > forward && v >= backward {
                *o = v;
            }
        }
    });
    Ok(Image::from_vec_unchecked(w, h, out))
}

/// Non-maximum suppression of a strength map using its own orientation.
pub fn nms(sc: &EdgeStrengthMap) -> Result<EdgeStrengthMap> {
    nms_with(sc, NmsOptions::default())
}

pub fn nms_with(sc: &EdgeStrengthMap, options: NmsOptions) -> Result<EdgeStrengthMap> {
    if sc.width() < 3 || sc.height() < 3 {
        return Err(Error::ImageTooSmall(format!(
            "non-maximum suppression needs at least 3x3, got {}x{}",
            sc.width(),
            sc.height()
        )));
    }
    let orientation = structure_orientation(sc.as_image(), options.orientation_smoothing)?;
    let thinned = suppress_non_maxima(sc.as_image(), &orientation)?;
    Ok(EdgeStrengthMap::from_image_unchecked(thinned))
}

fn check_thresholds(low: f64, high: f64) -> Result<()> {
    for (name, v) in [("low", low), ("high", high)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::param(name, format!("{v} is outside [0, 1]")));
        }
    }
    if low > high {
        return Err(Error::param(
            "low",
            format!("{low} exceeds high threshold {high}"),
        ));
    }
    Ok(())
}

/// Thresholds a thinned map.
///
/// With `low == high` every pixel `>= high` is an edge; otherwise pixels
/// `>= high` seed a flood fill that spreads through 8-connected pixels
/// `>= low`. Zero-valued pixels are never edges.
pub fn binarize(thinned: &EdgeStrengthMap, low: f64, high: f64) -> Result<EdgeMap> {
    check_thresholds(low, high)?;
    Ok(hysteresis(thinned.as_image(), low, high))
}

pub(crate) fn hysteresis(values: &Image, low: f64, high: f64) -> EdgeMap {
    let (w, h) = (values.width(), values.height());
    let data = values.data();
    let strong = |v: f64| v > 0.0 && v >= high;
    if low == high {
        return EdgeMap {
            width: w,
            height: h,
            data: data.iter().map(|&v| strong(v)).collect(),
        };
    }
    let weak = |v: f64| v > 0.0 && v >= low;
    let mut edges = vec![false; w * h];
    let mut stack = Vec::new();
    for seed in 0..w * h {
        if edges[seed] || !strong(data[seed]) {
            continue;
        }
        edges[seed] = true;
        stack.push(seed);
        while let Some(i) = stack.pop() {
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            for dy in -1..=1isize {
                for dx in -1..=1isize {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if !edges[j] && weak(data[j]) {
                        edges[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
    }
    EdgeMap {
        width: w,
        height: h,
        data: edges,
    }
}
