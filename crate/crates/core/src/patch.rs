//! Multiscale local patches.
//!
//! Around every pixel, square windows of each configured side are cut out,
//! area-averaged down to the smallest side, and stripped of their mean. The
//! resulting vectors (one per scale) are what the congruency measure compares.
//!
//! Two routes produce the same vectors: the explicit composition
//! [`extract_patch`] → [`downsample_patch`] → [`remove_dc`], and
//! [`MultiscaleSampler`], which reads every downsampled cell from a
//! summed-area table in constant time.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::Image;
use crate::integral::{integral_image, SummedAreaTable};

pub const DEFAULT_MAX_SIDE: usize = 11;
pub const RECOMMENDED_MAX_GAP: usize = 4;
pub const DEFAULT_ALPHA: f64 = 0.5;

/// Named scale configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalePreset {
    /// 3, 5, 7
    Fine,
    /// 3, 7, 11
    WideGap,
    /// 5, 7, 9
    Medium,
    /// 7, 9, 11
    Coarse,
}

impl ScalePreset {
    pub const ALL: [ScalePreset; 4] = [
        ScalePreset::Fine,
        ScalePreset::WideGap,
        ScalePreset::Medium,
        ScalePreset::Coarse,
    ];

    pub fn sides(self) -> [usize; 3] {
        match self {
            ScalePreset::Fine => [3, 5, 7],
            ScalePreset::WideGap => [3, 7, 11],
            ScalePreset::Medium => [5, 7, 9],
            ScalePreset::Coarse => [7, 9, 11],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ScalePreset::Fine => "fine",
            ScalePreset::WideGap => "wide-gap",
            ScalePreset::Medium => "medium",
            ScalePreset::Coarse => "coarse",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == name)
    }
}

/// Ordered odd patch sides plus the noise factor used by the threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleSet {
    sides: Vec<usize>,
    alpha: f64,
}

impl ScaleSet {
    pub fn new(sides: Vec<usize>, alpha: f64) -> Result<Self> {
        Self::with_max_side(sides, alpha, DEFAULT_MAX_SIDE)
    }

    /// Like [`ScaleSet::new`] with a custom cap on the largest side.
    pub fn with_max_side(sides: Vec<usize>, alpha: f64, max_side: usize) -> Result<Self> {
        if sides.is_empty() {
            return Err(Error::param("scales", "at least one scale is required"));
        }
        if let Some(s) = sides.iter().find(|&&s| s.is_multiple_of(2)) {
            return Err(Error::param("scales", format!("side {s} is not odd")));
        }
        if sides.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::param("scales", "sides must be strictly increasing"));
        }
        let largest = *sides.last().unwrap();
        if largest > max_side {
            return Err(Error::param(
                "scales",
                format!("largest side {largest} exceeds the cap {max_side}"),
            ));
        }
        if !alpha.is_finite() || alpha < 0.0 {
            return Err(Error::param(
                "alpha",
                format!("must be non-negative, got {alpha}"),
            ));
        }
        Ok(ScaleSet { sides, alpha })
    }

    pub fn preset(preset: ScalePreset, alpha: f64) -> Result<Self> {
        Self::new(preset.sides().to_vec(), alpha)
    }

    #[inline]
    pub fn sides(&self) -> &[usize] {
        &self.sides
    }

    #[inline]
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        Self::with_max_side(self.sides.clone(), alpha, usize::MAX)
    }

    /// Number of scales, K.
    #[inline]
    pub fn len(&self) -> usize {
        self.sides.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.sides.is_empty()
    }

    #[inline]
    pub fn base_side(&self) -> usize {
        self.sides[0]
    }

    #[inline]
    pub fn largest_side(&self) -> usize {
        *self.sides.last().unwrap()
    }

    /// Length of every patch vector, `S_1^2`.
    #[inline]
    pub fn vector_len(&self) -> usize {
        self.sides[0] * self.sides[0]
    }

    /// Human-readable notes for consecutive gaps wider than recommended.
    pub fn gap_warnings(&self) -> Vec<String> {
        self.sides
            .windows(2)
            .filter(|w| w[1] - w[0] > RECOMMENDED_MAX_GAP)
            .map(|w| {
                format!(
                    "gap between scales {} and {} exceeds {RECOMMENDED_MAX_GAP}; edges will broaden",
                    w[0], w[1]
                )
            })
            .collect()
    }

    pub(crate) fn check_fits(&self, img: &Image) -> Result<()> {
        let limit = img.width().min(img.height());
        if self.largest_side() > limit {
            return Err(Error::ImageTooSmall(format!(
                "scale {} exceeds the smaller image dimension {limit}",
                self.largest_side()
            )));
        }
        Ok(())
    }
}

impl Default for ScaleSet {
    fn default() -> Self {
        ScaleSet {
            sides: ScalePreset::Fine.sides().to_vec(),
            alpha: DEFAULT_ALPHA,
        }
    }
}

/// Square window of samples, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    side: usize,
    values: Vec<f64>,
}

impl Patch {
    pub fn new(side: usize, values: Vec<f64>) -> Result<Self> {
        if side.is_multiple_of(2) {
            return Err(Error::param("side", format!("{side} is not odd")));
        }
        if values.len() != side * side {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {side}x{side} patch",
                values.len()
            )));
        }
        Ok(Patch { side, values })
    }

    #[inline]
    pub fn side(&self) -> usize {
        self.side
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.side + col]
    }
}

/// DC-free flattened patch.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchVector(Vec<f64>);

impl PatchVector {
    #[inline]
    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for PatchVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

fn check_side(side: usize) -> Result<()> {
    if side == 0 || side.is_multiple_of(2) {
        return Err(Error::param("side", format!("{side} is not odd")));
    }
    Ok(())
}

/// `side x side` window centered on column `x`, row `y`, replicate-padded.
pub fn extract_patch(img: &Image, x: usize, y: usize, side: usize) -> Result<Patch> {
    check_side(side)?;
    if side > img.width().min(img.height()) {
        return Err(Error::ImageTooSmall(format!(
            "patch side {side} exceeds image {}x{}",
            img.width(),
            img.height()
        )));
    }
    let r = (side / 2) as isize;
    let mut values = Vec::with_capacity(side * side);
    for dy in -r..=r {
        for dx in -r..=r {
            values.push(img.get_clamped(x as isize + dx, y as isize + dy));
        }
    }
    Ok(Patch { side, values })
}

/// Coverage of source cell `[s, s+1)` by target cell `t` when `source`
/// cells are stretched over `target` cells, as a fraction of the target
/// cell's extent.
fn coverage_weights(source: usize, target: usize) -> Vec<Vec<(usize, f64)>> {
    let ratio = source as f64 / target as f64;
    (0..target)
        .map(|t| {
            let lo = (t * source) as f64 / target as f64;
            let hi = ((t + 1) * source) as f64 / target as f64;
            (lo.floor() as usize..(hi.ceil() as usize).min(source))
                .filter_map(|s| {
                    let w = hi.min(s as f64 + 1.0) - lo.max(s as f64);
                    (w > 0.0).then_some((s, w / ratio))
                })
                .collect()
        })
        .collect()
}

/// Area-average resampling to `target_side`.
pub fn downsample_patch(patch: &Patch, target_side: usize) -> Result<Patch> {
    check_side(target_side)?;
    if target_side > patch.side {
        return Err(Error::param(
            "target_side",
            format!(
                "{target_side} is larger than the source side {}",
                patch.side
            ),
        ));
    }
    if target_side == patch.side {
        return Ok(patch.clone());
    }
    let weights = coverage_weights(patch.side, target_side);
    let mut values = Vec::with_capacity(target_side * target_side);
    for row_w in &weights {
        for col_w in &weights {
            let mut acc = 0.0;
            for &(r, wr) in row_w {
                for &(c, wc) in col_w {
                    acc += wr * wc * patch.get(r, c);
                }
            }
            values.push(acc);
        }
    }
    Ok(Patch {
        side: target_side,
        values,
    })
}

/// Flattens row-major and subtracts the mean.
pub fn remove_dc(patch: &Patch) -> PatchVector {
    let mean = patch.values.iter().sum::<f64>() / patch.values.len() as f64;
    PatchVector(patch.values.iter().map(|v| v - mean).collect())
}

/// Per-pixel, per-scale patch vectors for a whole image.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchVectorField {
    width: usize,
    height: usize,
    scales: usize,
    dim: usize,
    data: Vec<f64>,
}

impl PatchVectorField {
    pub(crate) fn from_parts(
        width: usize,
        height: usize,
        scales: usize,
        dim: usize,
        data: Vec<f64>,
    ) -> Self {
        debug_assert_eq!(data.len(), width * height * scales * dim);
        PatchVectorField {
            width,
            height,
            scales,
            dim,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn scales(&self) -> usize {
        self.scales
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Vector for scale index `k` at column `x`, row `y`.
    pub fn vector(&self, x: usize, y: usize, k: usize) -> &[f64] {
        let start = ((y * self.width + x) * self.scales + k) * self.dim;
        &self.data[start..start + self.dim]
    }

    /// All K vectors at a pixel, concatenated.
    pub fn vectors_at(&self, x: usize, y: usize) -> &[f64] {
        let stride = self.scales * self.dim;
        let start = (y * self.width + x) * stride;
        &self.data[start..start + stride]
    }
}

#[derive(Debug, Clone, Copy)]
struct Corner {
    lo: usize,
    rem: usize,
}

#[derive(Debug, Clone)]
struct ScaleGeometry {
    radius: usize,
    corners: Vec<Corner>,
    /// Per grid corner, row-major: offset into the concatenated interpolated
    /// tables relative to the patch origin.
    offsets: Vec<usize>,
    inv_cell_area: f64,
}

/// Upper bound on the memory spent on interpolated tables.
const TABLE_BUDGET_BYTES: usize = 512 << 20;

/// Constant-time patch vector extraction backed by a summed-area table of
/// the replicate-padded image.
///
/// Cell corners fall on multiples of `S_k / S_1`, so their fractional parts
/// are `rem / S_1`. For each fractional pair `(rem_y, rem_x)` in use, the
/// table is bilinearly pre-interpolated once, turning every corner into a
/// single read. Above a memory budget corners are interpolated on the fly.
#[derive(Debug, Clone)]
pub struct MultiscaleSampler {
    width: usize,
    height: usize,
    pad: usize,
    base: usize,
    sat: SummedAreaTable,
    geometry: Vec<ScaleGeometry>,
    /// Interpolated tables laid end to end, one per fractional pair in use.
    shifted: Option<Vec<f64>>,
}

impl MultiscaleSampler {
    pub fn new(img: &Image, scales: &ScaleSet) -> Result<Self> {
        scales.check_fits(img)?;
        let pad = scales.largest_side() / 2;
        let (w, h) = (img.width(), img.height());
        // Vectors are DC-free, so the global mean is removed before
        // accumulation to keep the table entries small.
        let mean = img.data().iter().sum::<f64>() / img.len() as f64;
        let padded = Image::from_fn(w + 2 * pad, h + 2 * pad, |x, y| {
            img.get_clamped(x as isize - pad as isize, y as isize - pad as isize) - mean
        });
        let sat = integral_image(&padded);
        let stride = sat.stride();
        let table_len = sat.table().len();
        let base = scales.base_side();

        let mut ids: Vec<Option<usize>> = vec![None; base * base];
        let mut pairs = Vec::new();
        let geometry: Vec<ScaleGeometry> = scales
            .sides()
            .iter()
            .map(|&side| {
                let corners: Vec<Corner> = (0..=base)
                    .map(|t| Corner {
                        lo: t * side / base,
                        rem: t * side % base,
                    })
                    .collect();
                let mut offsets = Vec::with_capacity(corners.len() * corners.len());
                for cy in &corners {
                    for cx in &corners {
                        let key = cy.rem * base + cx.rem;
                        let id = *ids[key].get_or_insert_with(|| {
                            pairs.push((cy.rem, cx.rem));
                            pairs.len() - 1
                        });
                        offsets.push(id * table_len + cy.lo * stride + cx.lo);
                    }
                }
                let cell = side as f64 / base as f64;
                ScaleGeometry {
                    radius: side / 2,
                    corners,
                    offsets,
                    inv_cell_area: 1.0 / (cell * cell),
                }
            })
            .collect();

        let fits = pairs.len() * table_len * std::mem::size_of::<f64>() <= TABLE_BUDGET_BYTES;
        let shifted = fits.then(|| {
            let mut flat = vec![0.0; pairs.len() * table_len];
            flat.par_chunks_mut(table_len)
                .zip(&pairs)
                .for_each(|(dst, &(ry, rx))| shifted_table(&sat, ry, rx, base, dst));
            flat
        });

        Ok(MultiscaleSampler {
            width: w,
            height: h,
            pad,
            base,
            sat,
            geometry,
            shifted,
        })
    }

    pub fn scales(&self) -> usize {
        self.geometry.len()
    }

    pub fn dim(&self) -> usize {
        self.base * self.base
    }

    /// Writes the K patch vectors at `(x, y)` into `out` (length K * dim),
    /// scale-major. `grid` is scratch of length `(base + 1)^2`.
    pub fn vectors_into(&self, x: usize, y: usize, out: &mut [f64], grid: &mut [f64]) {
        debug_assert!(x < self.width && y < self.height);
        let n = self.base + 1;
        let dim = self.dim();
        debug_assert_eq!(out.len(), dim * self.geometry.len());
        debug_assert_eq!(grid.len(), n * n);

        for (geo, vec) in self.geometry.iter().zip(out.chunks_exact_mut(dim)) {
            let x0 = x + self.pad - geo.radius;
            let y0 = y + self.pad - geo.radius;
            match &self.shifted {
                Some(flat) => {
                    let origin = &flat[y0 * self.sat.stride() + x0..];
                    for (g, &off) in grid.iter_mut().zip(&geo.offsets) {
                        *g = origin[off];
                    }
                }
                None => {
                    for (u, cy) in geo.corners.iter().enumerate() {
                        for (t, cx) in geo.corners.iter().enumerate() {
                            grid[u * n + t] = interpolate(
                                &self.sat,
                                y0 + cy.lo,
                                x0 + cx.lo,
                                cy.rem,
                                cx.rem,
                                self.base,
                            );
                        }
                    }
                }
            }
            let mut sum = 0.0;
            for r in 0..self.base {
                let (top, bottom) = (&grid[r * n..(r + 1) * n], &grid[(r + 1) * n..(r + 2) * n]);
                for c in 0..self.base {
                    let v = (bottom[c + 1] - top[c + 1] - bottom[c] + top[c]) * geo.inv_cell_area;
                    vec[r * self.base + c] = v;
                    sum += v;
                }
            }
            let mean = sum / dim as f64;
            vec.iter_mut().for_each(|v| *v -= mean);
        }
    }

    pub fn scratch(&self) -> (Vec<f64>, Vec<f64>) {
        (
            vec![0.0; self.dim() * self.scales()],
            vec![0.0; (self.base + 1) * (self.base + 1)],
        )
    }
}

/// Prefix integral at `(row + rem_y / base, col + rem_x / base)`.
#[inline]
fn interpolate(
    sat: &SummedAreaTable,
    row: usize,
    col: usize,
    rem_y: usize,
    rem_x: usize,
    base: usize,
) -> f64 {
    let fy = rem_y as f64 / base as f64;
    let fx = rem_x as f64 / base as f64;
    let r1 = if rem_y == 0 { row } else { row + 1 };
    let c1 = if rem_x == 0 { col } else { col + 1 };
    let top = (1.0 - fx) * sat.raw(row, col) + fx * sat.raw(row, c1);
    let bottom = (1.0 - fx) * sat.raw(r1, col) + fx * sat.raw(r1, c1);
    (1.0 - fy) * top + fy * bottom
}

fn shifted_table(sat: &SummedAreaTable, rem_y: usize, rem_x: usize, base: usize, out: &mut [f64]) {
    let table = sat.table();
    let stride = sat.stride();
    let rows = table.len() / stride;
    let fy = rem_y as f64 / base as f64;
    let fx = rem_x as f64 / base as f64;
    // The last row and column are only ever read with a zero fraction.
    let mut horizontal = vec![0.0; stride];
    let lerp_row = |r: usize, dst: &mut [f64]| {
        let src = &table[r * stride..(r + 1) * stride];
        for (d, pair) in dst.iter_mut().zip(src.windows(2)) {
            *d = (1.0 - fx) * pair[0] + fx * pair[1];
        }
        dst[stride - 1] = src[stride - 1];
    };
    let mut below = vec![0.0; stride];
    lerp_row(0, &mut horizontal);
    for r in 0..rows {
        let dst = &mut out[r * stride..(r + 1) * stride];
        if r + 1 < rows {
            lerp_row(r + 1, &mut below);
            for ((d, &t), &b) in dst.iter_mut().zip(&horizontal).zip(&below) {
                *d = (1.0 - fy) * t + fy * b;
            }
            std::mem::swap(&mut horizontal, &mut below);
        } else {
            dst.copy_from_slice(&horizontal);
        }
    }
}

/// Patch vectors for every pixel through the summed-area fast path.
pub fn patch_field(img: &Image, scales: &ScaleSet) -> Result<PatchVectorField> {
    let sampler = MultiscaleSampler::new(img, scales)?;
    let (w, h) = (img.width(), img.height());
    let per_pixel = sampler.dim() * sampler.scales();
    let mut data = vec![0.0; w * h * per_pixel];
    data.par_chunks_mut(w * per_pixel)
        .enumerate()
        .for_each(|(y, row)| {
            let (_, mut grid) = sampler.scratch();
            for (x, out) in row.chunks_exact_mut(per_pixel).enumerate() {
                sampler.vectors_into(x, y, out, &mut grid);
            }
        });
    Ok(PatchVectorField::from_parts(
        w,
        h,
        scales.len(),
        sampler.dim(),
        data,
    ))
}
