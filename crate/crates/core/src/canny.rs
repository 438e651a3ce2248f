//! Canny edge detector, used as the comparison baseline.

use crate::error::{Error, Result};
use crate::image::{gaussian_smooth, sobel_gradients, Image};
use crate::thinning::{hysteresis, suppress_non_maxima, EdgeMap};

/// Gaussian scale commonly used for the baseline.
pub const DEFAULT_SIGMA: f64 = std::f64::consts::SQRT_2;

/// Smoothing window used for a given sigma: `2 * ceil(3 sigma) + 1`.
pub fn window_for_sigma(sigma: f64) -> usize {
    2 * (3.0 * sigma).ceil() as usize + 1
}

/// Gradient magnitude of the smoothed image divided by its maximum, and
/// thinned by non-maximum suppression along the gradient.
///
/// All-zero for an image with no gradient at all.
pub fn thinned_gradient(img: &Image, sigma: f64) -> Result<Image> {
    if !sigma.is_finite() || sigma <= 0.0 {
        return Err(Error::param(
            "sigma",
            format!("must be positive, got {sigma}"),
        ));
    }
    let smoothed = gaussian_smooth(img, window_for_sigma(sigma), sigma)?;
    let grad = sobel_gradients(&smoothed)?;
    let mag = grad.magnitude();
    let max = mag.max_value();
    if max <= 0.0 {
        return Ok(Image::filled(img.width(), img.height(), 0.0));
    }
    let normalized = mag.map(|v| v / max);
    suppress_non_maxima(&normalized, &grad)
}

/// Canny edges with hysteresis thresholds relative to the maximum gradient.
pub fn canny(img: &Image, sigma: f64, low: f64, high: f64) -> Result<EdgeMap> {
    if !(0.0..=1.0).contains(&low) || !(0.0..=1.0).contains(&high) || low > high {
        return Err(Error::param(
            "thresholds",
            format!("need 0 <= low <= high <= 1, got low={low} high={high}"),
        ));
    }
    let thinned = thinned_gradient(img, sigma)?;
    Ok(hysteresis(&thinned, low, high))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_image_has_no_edges() {
        let e = canny(&Image::filled(32, 32, 0.4), DEFAULT_SIGMA, 0.1, 0.3).unwrap();
        assert_eq!(e.count(), 0);
    }

    #[test]
    fn vertical_step_gives_one_line() {
        let img = Image::from_fn(48, 40, |x, _| if x < 24 { 0.2 } else { 0.8 });
        let e = canny(&img, DEFAULT_SIGMA, 0.1, 0.3).unwrap();
        for y in 1..39 {
            let cols: Vec<usize> = (0..48).filter(|&x| e.get(x, y)).collect();
            assert_eq!(cols.len(), 1, "row {y}: {cols:?}");
            // Boundary lies between columns 23 and 24.
            assert!((cols[0] as f64 - 23.5).abs() <= 1.0);
        }
    }

    #[test]
    fn invariant_to_brightness_and_contrast() {
        let img = Image::from_fn(40, 40, |x, y| {
            let d = ((x as f64 - 20.0).powi(2) + (y as f64 - 18.0).powi(2)).sqrt();
            if d < 11.0 {
                0.6
            } else {
                0.2
            }
        });
        let base = canny(&img, DEFAULT_SIGMA, 0.1, 0.3).unwrap();
        let shifted = canny(&img.map(|v| v + 0.15), DEFAULT_SIGMA, 0.1, 0.3).unwrap();
        let scaled = canny(&img.map(|v| v * 1.5), DEFAULT_SIGMA, 0.1, 0.3).unwrap();
        assert_eq!(base, shifted);
        assert_eq!(base, scaled);
    }

    #[test]
    fn rejects_bad_parameters() {
        let img = Image::filled(32, 32, 0.0);
        assert!(canny(&img, 0.0, 0.1, 0.2).is_err());
        assert!(canny(&img, 1.0, 0.3, 0.2).is_err());
        assert!(canny(&img, 1.0, -0.1, 0.2).is_err());
        assert_eq!(window_for_sigma(DEFAULT_SIGMA), 11);
    }
}
