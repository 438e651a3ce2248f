//! Summed-area tables.
//!
//! The table is stored with a leading zero row and column, so `raw(r, c)` is
//! the sum of all samples strictly above row `r` and strictly left of column
//! `c`. Treating the image as piecewise constant over unit cells, `raw` is the
//! exact integral of that function over `[0, c) x [0, r)`, and bilinear
//! interpolation of `raw` gives the exact integral for fractional corners.
//! That is what lets [`SummedAreaTable::area_sum`] average over footprints
//! that do not align with the pixel grid.

use crate::image::Image;

#[derive(Debug, Clone, PartialEq)]
pub struct SummedAreaTable {
    width: usize,
    height: usize,
    table: Vec<f64>,
}

impl SummedAreaTable {
    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    /// Inclusive cumulative sum over rows `<= row` and columns `<= col`.
    #[inline]
    pub fn entry(&self, row: usize, col: usize) -> f64 {
        self.raw(row + 1, col + 1)
    }

    /// Exclusive prefix integral; `row <= height`, `col <= width`.
    #[inline]
    pub fn raw(&self, row: usize, col: usize) -> f64 {
        self.table[row * (self.width + 1) + col]
    }

    #[inline]
    pub(crate) fn stride(&self) -> usize {
        self.width + 1
    }

    #[inline]
    pub(crate) fn table(&self) -> &[f64] {
        &self.table
    }

    /// Sum over the inclusive box `[r0, r1] x [c0, c1]` in four lookups.
    #[inline]
    pub fn box_sum(&self, r0: usize, c0: usize, r1: usize, c1: usize) -> f64 {
        debug_assert!(r0 <= r1 && c0 <= c1 && r1 < self.height && c1 < self.width);
        self.raw(r1 + 1, c1 + 1) - self.raw(r0, c1 + 1) - self.raw(r1 + 1, c0) + self.raw(r0, c0)
    }

    /// Integral of the piecewise-constant image over `[0, x) x [0, y)` for
    /// real `x in [0, width]`, `y in [0, height]`.
    pub fn prefix_integral(&self, x: f64, y: f64) -> f64 {
        debug_assert!((0.0..=self.width as f64).contains(&x));
        debug_assert!((0.0..=self.height as f64).contains(&y));
        let (c, fx) = split(x, self.width);
        let (r, fy) = split(y, self.height);
        let c1 = (c + 1).min(self.width);
        let r1 = (r + 1).min(self.height);
        let top = (1.0 - fx) * self.raw(r, c) + fx * self.raw(r, c1);
        let bottom = (1.0 - fx) * self.raw(r1, c) + fx * self.raw(r1, c1);
        (1.0 - fy) * top + fy * bottom
    }

    /// Area-weighted sum over the real rectangle `[x0, x1) x [y0, y1)`.
    pub fn area_sum(&self, x0: f64, y0: f64, x1: f64, y1: f64) -> f64 {
        self.prefix_integral(x1, y1) - self.prefix_integral(x0, y1) - self.prefix_integral(x1, y0)
            + self.prefix_integral(x0, y0)
    }
}

#[inline]
fn split(v: f64, max: usize) -> (usize, f64) {
    let i = (v.floor() as usize).min(max);
    (i, v - i as f64)
}

pub fn integral_image(img: &Image) -> SummedAreaTable {
    let (w, h) = (img.width(), img.height());
    let stride = w + 1;
    let mut table = vec![0.0; stride * (h + 1)];
    for y in 0..h {
        let mut run = 0.0;
        let src = img.row(y);
        for x in 0..w {
            run += src[x];
            table[(y + 1) * stride + x + 1] = table[y * stride + x + 1] + run;
        }
    }
    SummedAreaTable {
        width: w,
        height: h,
        table,
    }
}
