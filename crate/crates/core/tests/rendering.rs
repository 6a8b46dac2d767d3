mod common;

use common::*;
use msfuse::data::{cie1931_cmf, cie_d65};
use msfuse::image::ColorSpace;
use msfuse::spectral::{flat_field_color, render_image, ReflectanceCube, WavelengthGrid};
use rand::Rng;

#[test]
fn matches_triple_loop() {
    let mut r = rng(11);
    for _ in 0..100 {
        let grid = random_grid(&mut r);
        let cube = random_cube(&mut r, &grid);
        let illum = random_spectrum(&mut r, &grid);
        let channels = r.gen_range(1..8);
        let sens = random_sensitivities(&mut r, &grid, channels);
        let img = render_image(&cube, &illum, &sens, ColorSpace::MsRaw).unwrap();
        assert_eq!(img.mask(), cube.mask());
        assert_eq!(img.color_space(), ColorSpace::MsRaw);
        for (c, plane) in render_triple_loop(&cube, &illum, &sens).iter().enumerate() {
            for (a, b) in img.channel(c).iter().zip(plane) {
                assert!((a - b).abs() <= 1e-12 * b.abs(), "{a} vs {b}");
            }
        }
    }
}

#[test]
fn white_surface_renders_flat_field() {
    let mut r = rng(12);
    let grid = WavelengthGrid::visible_10nm();
    let illum = random_spectrum(&mut r, &grid);
    let sens = random_sensitivities(&mut r, &grid, 3);
    let cube = ReflectanceCube::uniform(3, 2, grid.clone(), &vec![1.0; grid.count()]).unwrap();
    let img = render_image(&cube, &illum, &sens, ColorSpace::CameraRaw).unwrap();
    let ff = flat_field_color(&illum, &sens).unwrap();
    for (c, v) in ff.iter().enumerate() {
        for a in img.channel(c) {
            assert!((a - v).abs() <= 1e-12 * v);
        }
    }
}

#[test]
fn normalized_d65_white_has_unit_luminance() {
    let grid = WavelengthGrid::visible_10nm();
    let cmf = cie1931_cmf(&grid).unwrap();
    let d65 = cie_d65(&grid).unwrap().normalized_luminance(&cmf).unwrap();
    let white = flat_field_color(&d65, &cmf).unwrap();
    assert!((white[1] - 1.0).abs() < 1e-12);
    // tabulated D65 under the 2 degree observer on a 10 nm grid
    assert!(
        (white[0] - 0.9505).abs() < 2e-3 && (white[2] - 1.089).abs() < 3e-3,
        "{white:?}"
    );
}

#[test]
fn grid_mismatch_is_rejected() {
    let mut r = rng(13);
    let a = WavelengthGrid::new(400.0, 700.0, 10.0).unwrap();
    let b = WavelengthGrid::new(400.0, 700.0, 20.0).unwrap();
    let cube = random_cube(&mut r, &a);
    let sens = random_sensitivities(&mut r, &a, 3);
    assert!(render_image(&cube, &random_spectrum(&mut r, &b), &sens, ColorSpace::CameraRaw).is_err());
}
