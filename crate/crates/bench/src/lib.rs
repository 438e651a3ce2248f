//! Shared inputs for the criterion benchmarks.

use speccon_core::{add_gaussian_noise, make_shapes, Image};

/// Noisy synthetic scene of the given size with a fixed seed.
pub fn bench_image(width: usize, height: usize) -> Image {
    let scene = make_shapes(width, height).expect("scene size");
    add_gaussian_noise(&scene.image, 20.0, 1).expect("noise")
}
