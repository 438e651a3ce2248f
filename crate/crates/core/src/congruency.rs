//! Spectrum congruency: agreement of the multiscale patch vectors at a pixel.
//!
//! With `x_k` the DC-free vector of scale `k`, the local energy is
//! `E = ||sum_k x_k||`, the amplitude sum is `A = sum_k ||x_k||`, and
//! `SC = max(E - T, 0) / A` with the noise threshold `T = alpha * mean(E)`.
//!
//! Both norms are invariant under any orthonormal change of basis, so the
//! map is computed directly on the patch vectors (the identity basis).
//! [`project`] and [`congruency_in_basis`] exist to check that invariance.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::{gaussian_smooth, Image};
use crate::patch::{MultiscaleSampler, ScaleSet};

/// Below this amplitude sum a pixel has no structure and `SC = 0`.
pub const AMPLITUDE_GUARD: f64 = 1e-12;

const GRAM_TOLERANCE: f64 = 1e-10;

/// `N` mutually orthonormal vectors of length `N`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthonormalBasis {
    dim: usize,
    vectors: Vec<f64>,
}

impl OrthonormalBasis {
    /// Validates that the Gram matrix is the identity within 1e-10.
    pub fn new(dim: usize, vectors: Vec<f64>) -> Result<Self> {
        if dim == 0 || vectors.len() != dim * dim {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a basis of dimension {dim}",
                vectors.len()
            )));
        }
        let basis = OrthonormalBasis { dim, vectors };
        for i in 0..dim {
            for j in i..dim {
                let g = dot(basis.vector(i), basis.vector(j));
                let expect = if i == j { 1.0 } else { 0.0 };
                if (g - expect).abs() > GRAM_TOLERANCE {
                    return Err(Error::param(
                        "basis",
                        format!("not orthonormal: <v{i}, v{j}> = {g}"),
                    ));
                }
            }
        }
        Ok(basis)
    }

    pub fn identity(dim: usize) -> Self {
        let mut vectors = vec![0.0; dim * dim];
        for i in 0..dim {
            vectors[i * dim + i] = 1.0;
        }
        OrthonormalBasis { dim, vectors }
    }

    /// Orthonormalizes `dim` row vectors with modified Gram-Schmidt.
    pub fn gram_schmidt(dim: usize, mut rows: Vec<f64>) -> Result<Self> {
        if dim == 0 || rows.len() != dim * dim {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for {dim} vectors of length {dim}",
                rows.len()
            )));
        }
        for i in 0..dim {
            for j in 0..i {
                let (done, rest) = rows.split_at_mut(i * dim);
                let vj = &done[j * dim..(j + 1) * dim];
                let vi = &mut rest[..dim];
                let p = dot(vi, vj);
                vi.iter_mut().zip(vj).for_each(|(a, b)| *a -= p * b);
            }
            let vi = &mut rows[i * dim..(i + 1) * dim];
            let n = dot(vi, vi).sqrt();
            if n < 1e-10 {
                return Err(Error::param(
                    "basis",
                    "input vectors are linearly dependent",
                ));
            }
            vi.iter_mut().for_each(|a| *a /= n);
        }
        Self::new(dim, rows)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn vector(&self, n: usize) -> &[f64] {
        &self.vectors[n * self.dim..(n + 1) * self.dim]
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Coefficients `y_s = <vec, v_s>` for every basis vector.
pub fn project(vec: &[f64], basis: &OrthonormalBasis) -> Result<Vec<f64>> {
    if vec.len() != basis.dim {
        return Err(Error::DimensionMismatch(format!(
            "vector of length {} against a basis of dimension {}",
            vec.len(),
            basis.dim
        )));
    }
    Ok((0..basis.dim).map(|s| dot(vec, basis.vector(s))).collect())
}

/// Local energy, amplitude sum and congruency at one pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Congruency {
    pub energy: f64,
    pub amplitude_sum: f64,
    pub sc: f64,
}

#[inline]
fn ratio(energy: f64, amplitude_sum: f64, threshold: f64) -> f64 {
    if amplitude_sum < AMPLITUDE_GUARD {
        0.0
    } else {
        ((energy - threshold).max(0.0) / amplitude_sum).min(1.0)
    }
}

fn check_vectors<V: AsRef<[f64]>>(vectors: &[V], threshold: f64) -> Result<usize> {
    let first = vectors
        .first()
        .ok_or_else(|| Error::Empty("at least one vector is required".into()))?;
    let len = first.as_ref().len();
    if let Some(v) = vectors.iter().find(|v| v.as_ref().len() != len) {
        return Err(Error::DimensionMismatch(format!(
            "vector lengths {} and {} differ",
            len,
            v.as_ref().len()
        )));
    }
    if threshold.is_nan() || threshold < 0.0 {
        return Err(Error::param(
            "threshold",
            format!("must be non-negative, got {threshold}"),
        ));
    }
    Ok(len)
}

/// Identity-basis evaluation of energy, amplitude and congruency.
pub fn congruency_of_vectors<V: AsRef<[f64]>>(vectors: &[V], threshold: f64) -> Result<Congruency> {
    let len = check_vectors(vectors, threshold)?;
    let mut energy_sq = 0.0;
    for s in 0..len {
        let sum: f64 = vectors.iter().map(|v| v.as_ref()[s]).sum();
        energy_sq += sum * sum;
    }
    let amplitude_sum: f64 = vectors
        .iter()
        .map(|v| v.as_ref().iter().map(|c| c * c).sum::<f64>().sqrt())
        .sum();
    let energy = energy_sq.sqrt();
    Ok(Congruency {
        energy,
        amplitude_sum,
        sc: ratio(energy, amplitude_sum, threshold),
    })
}

/// Same quantities computed from the coefficients in `basis`.
pub fn congruency_in_basis<V: AsRef<[f64]>>(
    vectors: &[V],
    basis: &OrthonormalBasis,
    threshold: f64,
) -> Result<Congruency> {
    check_vectors(vectors, threshold)?;
    let coeffs = vectors
        .iter()
        .map(|v| project(v.as_ref(), basis))
        .collect::<Result<Vec<_>>>()?;
    congruency_of_vectors(&coeffs, threshold)
}

/// Noise threshold derived from the mean energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub alpha: f64,
    pub mu: f64,
    pub threshold: f64,
}

/// `mu` is the arithmetic mean over all pixels, summed in row-major order.
pub fn noise_threshold(energy: &[f64], alpha: f64) -> Result<NoiseModel> {
    if energy.is_empty() {
        return Err(Error::Empty("energy map has no pixels".into()));
    }
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(Error::param(
            "alpha",
            format!("must be non-negative, got {alpha}"),
        ));
    }
    let mu = energy.iter().sum::<f64>() / energy.len() as f64;
    Ok(NoiseModel {
        alpha,
        mu,
        threshold: alpha * mu,
    })
}

/// Per-pixel edge strength in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeStrengthMap(Image);

impl EdgeStrengthMap {
    pub fn new(img: Image) -> Result<Self> {
        if let Some(v) = img.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::param(
                "strength",
                format!("value {v} outside [0, 1]"),
            ));
        }
        Ok(EdgeStrengthMap(img))
    }

    pub(crate) fn from_image_unchecked(img: Image) -> Self {
        debug_assert!(img.data().iter().all(|v| (0.0..=1.0).contains(v)));
        EdgeStrengthMap(img)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.0.width()
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.0.height()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.0.get(x, y)
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        self.0.data()
    }

    pub fn as_image(&self) -> &Image {
        &self.0
    }

    pub fn into_image(self) -> Image {
        self.0
    }
}

/// Per-pixel energy and amplitude sum.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyMaps {
    pub width: usize,
    pub height: usize,
    pub energy: Vec<f64>,
    pub amplitude_sum: Vec<f64>,
}

/// Gaussian prefilter applied before patch extraction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prefilter {
    pub window: usize,
    pub sigma: f64,
}

impl Prefilter {
    /// 7x7 window with standard deviation 3.5, for strongly noisy input.
    pub const NOISY: Prefilter = Prefilter {
        window: 7,
        sigma: 3.5,
    };
}

/// First pass: energy and amplitude sum at every pixel.
pub fn energy_maps(img: &Image, scales: &ScaleSet) -> Result<EnergyMaps> {
    let sampler = MultiscaleSampler::new(img, scales)?;
    let (w, h) = (img.width(), img.height());
    let dim = sampler.dim();
    let mut energy = vec![0.0; w * h];
    let mut amplitude_sum = vec![0.0; w * h];
    energy
        .par_chunks_mut(w)
        .zip(amplitude_sum.par_chunks_mut(w))
        .enumerate()
        .for_each(|(y, (e_row, a_row))| {
            let (mut vecs, mut grid) = sampler.scratch();
            let mut summed = vec![0.0; dim];
            for x in 0..w {
                sampler.vectors_into(x, y, &mut vecs, &mut grid);
                summed.iter_mut().for_each(|s| *s = 0.0);
                let mut amp = 0.0;
                for v in vecs.chunks_exact(dim) {
                    let mut n2 = 0.0;
                    for (s, c) in summed.iter_mut().zip(v) {
                        *s += c;
                        n2 += c * c;
                    }
                    amp += n2.sqrt();
                }
                e_row[x] = summed.iter().map(|s| s * s).sum::<f64>().sqrt();
                a_row[x] = amp;
            }
        });
    Ok(EnergyMaps {
        width: w,
        height: h,
        energy,
        amplitude_sum,
    })
}

/// Second pass: applies the noise threshold to precomputed maps.
pub fn congruency_from_energy(
    maps: &EnergyMaps,
    alpha: f64,
) -> Result<(EdgeStrengthMap, NoiseModel)> {
    let noise = noise_threshold(&maps.energy, alpha)?;
    let sc: Vec<f64> = maps
        .energy
        .par_iter()
        .zip(&maps.amplitude_sum)
        .map(|(&e, &a)| ratio(e, a, noise.threshold))
        .collect();
    Ok((
        EdgeStrengthMap::from_image_unchecked(Image::from_vec_unchecked(
            maps.width,
            maps.height,
            sc,
        )),
        noise,
    ))
}

/// Edge-strength map of `img` with an optional Gaussian prefilter.
pub fn spectrum_congruency_map(
    img: &Image,
    scales: &ScaleSet,
    prefilter: Option<Prefilter>,
) -> Result<EdgeStrengthMap> {
    let filtered;
    let src = match prefilter {
        Some(p) => {
            filtered = gaussian_smooth(img, p.window, p.sigma)?;
            &filtered
        }
        None => img,
    };
    let maps = energy_maps(src, scales)?;
    Ok(congruency_from_energy(&maps, scales.alpha())?.0)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::FRAC_1_SQRT_2;

    use rand::{rngs::StdRng, Rng, SeedableRng};

    use super::*;

    #[test]
    fn identity_projection_is_identity() {
        let v = [0.3, -1.2, 0.5, 2.0];
        assert_eq!(project(&v, &OrthonormalBasis::identity(4)).unwrap(), v);
    }

    #[test]
    fn rotated_basis_projection() {
        let h = FRAC_1_SQRT_2;
        let basis = OrthonormalBasis::new(2, vec![h, h, -h, h]).unwrap();
        let y = project(&[1.0, 0.0], &basis).unwrap();
        assert!((y[0] - h).abs() < 1e-15 && (y[1] + h).abs() < 1e-15);
    }

    #[test]
    fn projection_preserves_norm() {
        let mut rng = StdRng::seed_from_u64(4);
        let basis = OrthonormalBasis::gram_schmidt(
            9,
            (0..81).map(|_| rng.random_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let v: Vec<f64> = (0..9).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y = project(&v, &basis).unwrap();
        let n = |a: &[f64]| a.iter().map(|c| c * c).sum::<f64>().sqrt();
        assert!((n(&v) - n(&y)).abs() < 1e-10);
    }

    #[test]
    fn projection_errors() {
        assert!(project(&[1.0, 2.0], &OrthonormalBasis::identity(3)).is_err());
        assert!(OrthonormalBasis::new(2, vec![1.0, 0.0, 1.0, 0.0]).is_err());
        assert!(OrthonormalBasis::new(2, vec![1.0, 0.0, 0.0, 1.1]).is_err());
    }

    #[test]
    fn congruency_analytic_cases() {
        let u = [1.0, 0.0];
        let c = congruency_of_vectors(&[u, u, u], 0.0).unwrap();
        assert_eq!((c.energy, c.amplitude_sum, c.sc), (3.0, 3.0, 1.0));

        let c = congruency_of_vectors(&[[1.0, 0.0], [0.0, 1.0]], 0.0).unwrap();
        assert!((c.energy - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(c.amplitude_sum, 2.0);
        assert!((c.sc - FRAC_1_SQRT_2).abs() < 1e-15);

        let c = congruency_of_vectors(&[[1.0, 0.0], [-1.0, 0.0]], 0.0).unwrap();
        assert_eq!((c.energy, c.sc), (0.0, 0.0));

        let c = congruency_of_vectors(&[[0.0; 4], [0.0; 4]], 0.0).unwrap();
        assert_eq!(c.sc, 0.0);
    }

    #[test]
    fn congruency_rejects_bad_input() {
        assert!(congruency_of_vectors(&[vec![1.0, 0.0], vec![1.0]], 0.0).is_err());
        let none: [[f64; 2]; 0] = [];
        assert!(congruency_of_vectors(&none, 0.0).is_err());
        assert!(congruency_of_vectors(&[[1.0]], -1.0).is_err());
    }

    #[test]
    fn threshold_model() {
        assert_eq!(noise_threshold(&[1.0, 2.0], 0.0).unwrap().threshold, 0.0);
        let m = noise_threshold(&[0.8; 10], 0.5).unwrap();
        assert!((m.threshold - 0.4).abs() < 1e-15);
        assert!(noise_threshold(&[], 0.5).is_err());
        assert!(noise_threshold(&[1.0], -0.5).is_err());

        let mut rng = StdRng::seed_from_u64(12);
        let e: Vec<f64> = (0..1000).map(|_| rng.random::<f64>() * 3.0).collect();
        let mut acc = 0.0;
        for v in &e {
            acc += v;
        }
        let m = noise_threshold(&e, 1.5).unwrap();
        assert!((m.mu - acc / 1000.0).abs() <= 1e-12);
        assert!((m.threshold - 1.5 * m.mu).abs() <= 1e-12);
    }

    #[test]
    fn constant_image_has_no_congruency() {
        let sc = spectrum_congruency_map(&Image::filled(20, 20, 0.3), &ScaleSet::default(), None)
            .unwrap();
        assert!(sc.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_scale_is_fully_congruent() {
        let mut rng = StdRng::seed_from_u64(8);
        let img = Image::from_fn(16, 16, |_, _| rng.random::<f64>());
        let scales = ScaleSet::new(vec![3], 0.0).unwrap();
        let maps = energy_maps(&img, &scales).unwrap();
        let (sc, _) = congruency_from_energy(&maps, 0.0).unwrap();
        for (i, &v) in sc.values().iter().enumerate() {
            if maps.amplitude_sum[i] >= AMPLITUDE_GUARD {
                assert!((v - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sc_non_increasing_in_alpha() {
        let mut rng = StdRng::seed_from_u64(15);
        let img = Image::from_fn(20, 18, |_, _| rng.random::<f64>());
        let maps = energy_maps(&img, &ScaleSet::default()).unwrap();
        let mut prev = congruency_from_energy(&maps, 0.0).unwrap().0;
        for alpha in [0.25, 0.5, 1.0, 2.5] {
            let next = congruency_from_energy(&maps, alpha).unwrap().0;
            for (a, b) in prev.values().iter().zip(next.values()) {
                assert!(b <= a);
            }
            prev = next;
        }
    }

    #[test]
    fn energy_bounded_by_amplitude() {
        let mut rng = StdRng::seed_from_u64(16);
        let img = Image::from_fn(20, 20, |_, _| rng.random::<f64>());
        let maps = energy_maps(&img, &ScaleSet::default()).unwrap();
        for (e, a) in maps.energy.iter().zip(&maps.amplitude_sum) {
            assert!(*e >= 0.0 && *e <= a + 1e-9);
        }
    }
}
