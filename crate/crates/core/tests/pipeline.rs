use speccon_core::{
    add_gaussian_noise, binarize, canny, eval::fom, make_shapes, nms, spectrum_congruency_map,
    Image, Prefilter, ScaleSet,
};

fn step(width: usize, height: usize, at: usize) -> Image {
    Image::from_fn(width, height, |x, _| if x < at { 0.0 } else { 1.0 })
}

#[test]
fn thresholded_step_is_one_pixel_wide_at_the_boundary() {
    let img = step(64, 64, 32);
    let sc =
        spectrum_congruency_map(&img, &ScaleSet::new(vec![3, 5, 7], 0.5).unwrap(), None).unwrap();
    let edges = binarize(&nms(&sc).unwrap(), 0.5, 0.5).unwrap();
    for y in 4..60 {
        let cols: Vec<usize> = (0..64).filter(|&x| edges.get(x, y)).collect();
        assert_eq!(cols.len(), 1, "row {y}: {cols:?}");
        assert!(cols[0].abs_diff(32) <= 1, "row {y}: {cols:?}");
    }
}

#[test]
fn single_scale_without_threshold_is_saturated() {
    let img = Image::from_fn(24, 20, |x, y| ((x * 31 + y * 17) % 11) as f64 / 10.0);
    let sc = spectrum_congruency_map(&img, &ScaleSet::new(vec![3], 0.0).unwrap(), None).unwrap();
    let maps =
        speccon_core::congruency::energy_maps(&img, &ScaleSet::new(vec![3], 0.0).unwrap()).unwrap();
    for (v, a) in sc.values().iter().zip(&maps.amplitude_sum) {
        if *a >= speccon_core::congruency::AMPLITUDE_GUARD {
            assert!((v - 1.0).abs() < 1e-12, "{v}");
        }
    }
}

#[test]
fn constant_image_has_no_strength() {
    let img = Image::filled(40, 30, 0.37);
    let sc = spectrum_congruency_map(&img, &ScaleSet::default(), Some(Prefilter::NOISY)).unwrap();
    assert!(sc.values().iter().all(|&v| v == 0.0));
}

#[test]
fn detectors_recover_clean_shapes() {
    let scene = make_shapes(128, 128).unwrap();
    let sc = spectrum_congruency_map(&scene.image, &ScaleSet::default(), None).unwrap();
    let ours = binarize(&nms(&sc).unwrap(), 0.3, 0.3).unwrap();
    assert!(fom(&ours, &scene.gt, 1.0 / 9.0).unwrap() > 0.7);
    let theirs = canny(&scene.image, std::f64::consts::SQRT_2, 0.1, 0.3).unwrap();
    assert!(fom(&theirs, &scene.gt, 1.0 / 9.0).unwrap() > 0.7);
}

#[test]
fn moderate_noise_keeps_shapes_detectable() {
    let scene = make_shapes(128, 128).unwrap();
    let noisy = add_gaussian_noise(&scene.image, 30.0, 7).unwrap();
    let scales = ScaleSet::new(vec![3, 5, 7], 1.5).unwrap();
    let sc = spectrum_congruency_map(&noisy, &scales, Some(Prefilter::NOISY)).unwrap();
    let edges = binarize(&nms(&sc).unwrap(), 0.1, 0.3).unwrap();
    assert!(fom(&edges, &scene.gt, 1.0 / 9.0).unwrap() > 0.7);
}
