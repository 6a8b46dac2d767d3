mod common;

use common::small_config;
use msfuse::colorimetry::{image_metric_mean, Metric, Summation};
use msfuse::dataset::{generate_dataset, Split};
use msfuse::illum_est::{EstimatorOverrides, EstimatorRegistry, IlluminantEstimate};
use msfuse::image::scale_exposure;
use msfuse::pipeline::{correct_with_estimate, traditional_correct};

#[test]
fn every_estimator_is_exposure_homogeneous() {
    let ds = generate_dataset(&small_config()).unwrap();
    let reg = EstimatorRegistry::with_builtins();
    for name in reg.names() {
        let est = reg.create(&name, &EstimatorOverrides::default()).unwrap();
        for t in ds.split(Split::Test) {
            let (base, prov) = traditional_correct(&t.rgb, &ds.camera, est.as_ref()).unwrap();
            let rep = image_metric_mean(&base, &t.gt, Metric::Reproduction, &ds.white, Summation::Kahan).unwrap();
            for alpha in [0.75, 0.5] {
                let (out, p2) =
                    traditional_correct(&scale_exposure(&t.rgb, alpha).unwrap(), &ds.camera, est.as_ref()).unwrap();
                assert!((p2.cct.kelvin - prov.cct.kelvin).abs() < 1e-6);
                for c in 0..3 {
                    for (o, b) in out.channel(c).iter().zip(base.channel(c)) {
                        assert!((o - alpha * b).abs() <= 1e-10 * (alpha * b).abs().max(1e-12), "{name}");
                    }
                }
                let gt = scale_exposure(&t.gt, alpha).unwrap();
                let r2 = image_metric_mean(&out, &gt, Metric::Reproduction, &ds.white, Summation::Kahan).unwrap();
                assert!((r2.mean - rep.mean).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn oracle_estimate_neutralizes_the_white_reference() {
    let ds = generate_dataset(&small_config()).unwrap();
    let t = &ds.triplets[0];
    let est = IlluminantEstimate::from_raw(t.meta.gt_illuminant_rgb.to_vec()).unwrap();
    let (out, prov) = correct_with_estimate(&t.rgb, &ds.camera, est).unwrap();
    assert!(prov.cct.kelvin.is_finite() && !prov.cct.singular);
    assert_eq!(out.mask(), t.rgb.mask());
}
