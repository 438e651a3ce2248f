//! Explicit-loop reference implementations.
//!
//! Nothing here touches a summed-area table: every patch is cut out, resampled
//! with per-cell coverage weights and centered one pixel at a time. These are
//! slow on purpose and serve as the oracle for the fast paths.

use crate::congruency::{noise_threshold, EdgeStrengthMap, AMPLITUDE_GUARD};
use crate::error::Result;
use crate::image::Image;
use crate::patch::{downsample_patch, extract_patch, remove_dc, PatchVectorField, ScaleSet};

pub fn patch_field_naive(img: &Image, scales: &ScaleSet) -> Result<PatchVectorField> {
    scales.check_fits(img)?;
    let (w, h) = (img.width(), img.height());
    let mut data = Vec::with_capacity(w * h * scales.len() * scales.vector_len());
    for y in 0..h {
        for x in 0..w {
            for &side in scales.sides() {
                let patch = extract_patch(img, x, y, side)?;
                let small = downsample_patch(&patch, scales.base_side())?;
                data.extend(remove_dc(&small).into_inner());
            }
        }
    }
    Ok(PatchVectorField::from_parts(
        w,
        h,
        scales.len(),
        scales.vector_len(),
        data,
    ))
}

/// Two-pass congruency map without prefiltering.
pub fn spectrum_congruency_naive(img: &Image, scales: &ScaleSet) -> Result<EdgeStrengthMap> {
    let field = patch_field_naive(img, scales)?;
    let (w, h) = (img.width(), img.height());
    let k = scales.len();
    let dim = scales.vector_len();

    let mut energy = Vec::with_capacity(w * h);
    let mut amplitude = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let mut e2 = 0.0;
            for s in 0..dim {
                let mut sum = 0.0;
                for scale in 0..k {
                    sum += field.vector(x, y, scale)[s];
                }
                e2 += sum * sum;
            }
            let mut a = 0.0;
            for scale in 0..k {
                let v = field.vector(x, y, scale);
                let mut n2 = 0.0;
                for c in v {
                    n2 += c * c;
                }
                a += n2.sqrt();
            }
            energy.push(e2.sqrt());
            amplitude.push(a);
        }
    }

    let t = noise_threshold(&energy, scales.alpha())?.threshold;
    let sc = energy
        .iter()
        .zip(&amplitude)
        .map(|(&e, &a)| {
            if a < AMPLITUDE_GUARD {
                0.0
            } else {
                ((e - t).max(0.0) / a).min(1.0)
            }
        })
        .collect();
    EdgeStrengthMap::new(Image::from_vec_unchecked(w, h, sc))
}
