//! Synthetic test scenes with exact ground truth, and reproducible noise.
//!
//! # Noise generator
//!
//! Noise is drawn from SplitMix64 used in counter mode: the `n`-th 64-bit
//! word for seed `s` is the SplitMix64 output finalizer applied to
//! `s + (n + 1) * 0x9E3779B97F4A7C15` (wrapping). Pixel `i` (row-major) uses
//! words `2i` and `2i + 1`, turned into uniforms in `(0, 1]` from their top
//! 53 bits, and one Box-Muller cosine draw. Every pixel's sample depends only
//! on `(seed, i)`, so generation order cannot change the output.

use crate::error::{Error, Result};
use crate::image::Image;
use crate::thinning::EdgeMap;

pub const BACKGROUND: f64 = 0.25;
pub const RECTANGLE_LEVEL: f64 = 0.75;
pub const DISK_LEVEL: f64 = 0.55;
pub const TRIANGLE_LEVEL: f64 = 0.9;
pub const MIN_SCENE_SIDE: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    /// Inclusive row and column bounds.
    Rectangle {
        r0: usize,
        c0: usize,
        r1: usize,
        c1: usize,
        level: f64,
    },
    /// Pixel centers within `radius` of `(cx, cy)`.
    Disk {
        cx: f64,
        cy: f64,
        radius: f64,
        level: f64,
    },
    /// Right angle at the bottom-left corner `(c0, r1)`; legs along row `r1`
    /// and column `c0`, hypotenuse from `(c0, r0)` to `(c1, r1)`.
    RightTriangle {
        r0: usize,
        c0: usize,
        r1: usize,
        c1: usize,
        level: f64,
    },
}

impl Shape {
    pub fn contains(&self, x: usize, y: usize) -> bool {
        match *self {
            Shape::Rectangle { r0, c0, r1, c1, .. } => {
                (r0..=r1).contains(&y) && (c0..=c1).contains(&x)
            }
            Shape::Disk { cx, cy, radius, .. } => {
                let (dx, dy) = (x as f64 - cx, y as f64 - cy);
                dx * dx + dy * dy <= radius * radius
            }
            Shape::RightTriangle { r0, c0, r1, c1, .. } => {
                if x < c0 || y > r1 || y < r0 {
                    return false;
                }
                // (x - c0) / (c1 - c0) <= (y - r0) / (r1 - r0), in integers.
                (x - c0) * (r1 - r0) <= (y - r0) * (c1 - c0)
            }
        }
    }

    pub fn level(&self) -> f64 {
        match *self {
            Shape::Rectangle { level, .. }
            | Shape::Disk { level, .. }
            | Shape::RightTriangle { level, .. } => level,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthScene {
    pub image: Image,
    pub gt: EdgeMap,
    pub shapes: Vec<Shape>,
}

/// Fixed layout of a rectangle, a disk and a right triangle on a flat
/// background, scaled to the requested size.
///
/// Ground truth marks every shape pixel that has an 8-neighbor with a
/// different region label, i.e. the one-pixel boundary on the shape side.
pub fn make_shapes(width: usize, height: usize) -> Result<SynthScene> {
    if width < MIN_SCENE_SIDE || height < MIN_SCENE_SIDE {
        return Err(Error::ImageTooSmall(format!(
            "synthetic scenes need at least {MIN_SCENE_SIDE}x{MIN_SCENE_SIDE}, got {width}x{height}"
        )));
    }
    let (w, h) = (width, height);
    let shapes = vec![
        Shape::Rectangle {
            r0: h / 8,
            c0: w / 8,
            r1: 3 * h / 8,
            c1: 7 * w / 16,
            level: RECTANGLE_LEVEL,
        },
        Shape::Disk {
            cx: (3 * w / 4) as f64,
            cy: (h / 4) as f64,
            radius: (w.min(h) / 7) as f64,
            level: DISK_LEVEL,
        },
        Shape::RightTriangle {
            r0: 9 * h / 16,
            c0: w / 8,
            r1: 7 * h / 8,
            c1: w / 2,
            level: TRIANGLE_LEVEL,
        },
    ];

    // Label 0 is background, k + 1 is shape k; later shapes win overlaps.
    let mut labels = vec![0u8; w * h];
    for (k, s) in shapes.iter().enumerate() {
        for y in 0..h {
            for x in 0..w {
                if s.contains(x, y) {
                    labels[y * w + x] = k as u8 + 1;
                }
            }
        }
    }
    let image = Image::from_fn(w, h, |x, y| match labels[y * w + x] {
        0 => BACKGROUND,
        l => shapes[l as usize - 1].level(),
    });
    let mut gt = EdgeMap::empty(w, h);
    for y in 0..h {
        for x in 0..w {
            let l = labels[y * w + x];
            if l == 0 {
                continue;
            }
            let boundary = (-1..=1isize).any(|dy| {
                (-1..=1isize).any(|dx| {
                    let (nx, ny) = (x as isize + dx, y as isize + dy);
                    nx >= 0
                        && ny >= 0
                        && (nx as usize) < w
                        && (ny as usize) < h
                        && labels[ny as usize * w + nx as usize] != l
                })
            });
            if boundary {
                gt.set(x, y, true);
            }
        }
    }
    Ok(SynthScene { image, gt, shapes })
}

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// The `counter`-th SplitMix64 output for `seed`.
#[inline]
pub fn splitmix64_at(seed: u64, counter: u64) -> u64 {
    let mut z = seed.wrapping_add(counter.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
fn unit_open_closed(word: u64) -> f64 {
    ((word >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal sample for pixel `index`.
#[inline]
pub fn normal_at(seed: u64, index: u64) -> f64 {
    let u1 = unit_open_closed(splitmix64_at(seed, 2 * index));
    let u2 = unit_open_closed(splitmix64_at(seed, 2 * index + 1));
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Adds white Gaussian noise with standard deviation `sigma_255 / 255` and
/// clamps to `[0, 1]`.
pub fn add_gaussian_noise(img: &Image, sigma_255: f64, seed: u64) -> Result<Image> {
    if !sigma_255.is_finite() || sigma_255 < 0.0 {
        return Err(Error::param(
            "sigma",
            format!("must be non-negative, got {sigma_255}"),
        ));
    }
    if sigma_255 == 0.0 {
        return Ok(img.clone());
    }
    let sigma = sigma_255 / 255.0;
    let data = img
        .data()
        .iter()
        .enumerate()
        .map(|(i, &v)| (v + sigma * normal_at(seed, i as u64)).clamp(0.0, 1.0))
        .collect();
    Image::new(img.width(), img.height(), data)
}
