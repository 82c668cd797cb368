mod common;

use std::f64::consts::FRAC_PI_2;

use depthbench_core::geometry::{
    axis_angle_to_transform, backproject, compute_warp, disp_to_depth, reproject,
    synthesize_view, warp_image, DepthMap, DepthRange, DisparityMap, Intrinsics, RigidTransform,
    Synthesized, WarpField,
};
use depthbench_core::grid::{Grid, Image};
use depthbench_core::losses::{
    apply_predictive_mask, berhu_loss, feature_reconstruction_loss, log_l1_loss, multi_scale_loss,
    photometric_loss, static_automask, virtual_stereo_loss, FeatureDistance, LossMap,
    PhotometricConfig, PredictiveMask, PredictiveMaskKind,
};
use depthbench_core::regularizers::{
    explainability_reg, occlusion_loss, smoothness_loss, OcclusionVariant, SmoothnessConfig,
};
use nalgebra::{Point3, Vector3};
use rand::Rng;

#[test]
fn rodrigues_quarter_turn() {
    let t = axis_angle_to_transform(Vector3::new(0.0, 0.0, FRAC_PI_2), Vector3::zeros());
    let p = t.apply(&Point3::new(1.0, 0.0, 0.0));
    assert!((p - Point3::new(0.0, 1.0, 0.0)).norm() < 1e-15);
    let tiny = axis_angle_to_transform(Vector3::new(1e-12, 0.0, 0.0), Vector3::zeros());
    assert!((tiny.rotation() - nalgebra::Matrix3::identity()).norm() < 1e-11);
}

#[test]
fn compose_then_inverse_is_identity() {
    let mut rng = common::rng(21);
    for _ in 0..20 {
        let a = axis_angle_to_transform(
            Vector3::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)),
            Vector3::new(rng.gen_range(-5.0..5.0), 0.3, -1.0),
        );
        let b = axis_angle_to_transform(Vector3::new(0.1, -0.4, 0.2), Vector3::new(1.0, 2.0, 3.0));
        let p = Point3::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(1.0..9.0));
        let ab = a.compose(&b);
        assert!((ab.apply(&p) - a.apply(&b.apply(&p))).norm() < 1e-12);
        assert!((ab.inverse().apply(&ab.apply(&p)) - p).norm() < 1e-12);
    }
}

#[test]
fn rotation_must_be_orthonormal() {
    let skew = nalgebra::Matrix3::new(1.0, 0.1, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
    assert!(RigidTransform::new(skew, Vector3::zeros()).is_err());
}

#[test]
fn disparity_endpoints_and_monotonicity() {
    let range = DepthRange::new(0.1, 100.0).unwrap();
    let disp = DisparityMap::new(Grid::from_fn(11, 1, |x, _| x as f64 / 10.0)).unwrap();
    let depth = disp_to_depth(&disp, &range);
    assert_eq!(depth.get(0, 0), Some(100.0));
    assert_eq!(depth.get(10, 0), Some(0.1));
    for x in 1..11 {
        assert!(depth.get(x, 0).unwrap() < depth.get(x - 1, 0).unwrap());
    }
    assert!(DepthRange::new(1.0, 1.0).is_err());
    assert!(DisparityMap::new(Grid::filled(1, 1, 1.5)).is_err());
}

#[test]
fn backprojection_uses_pixel_centres() {
    let k = Intrinsics::new(2.0, 4.0, 1.0, 1.0, 3, 3).unwrap();
    let depth = DepthMap::new(Grid::from_vec(3, 3, vec![2.0, 0.0, 2.0, 0.0, 5.0, 0.0, 0.0, 0.0, 4.0]).unwrap());
    let cloud = backproject(&depth, &k).unwrap();
    let pts: Vec<[f64; 3]> = cloud.points().iter().map(|p| [p.x, p.y, p.z]).collect();
    assert_eq!(pts, [[-1.0, -0.5, 2.0], [1.0, -0.5, 2.0], [0.0, 0.0, 5.0], [2.0, 1.0, 4.0]]);
}

#[test]
fn behind_camera_points_are_masked() {
    let k = common::small_intrinsics(8, 8);
    let back = RigidTransform::from_translation(Vector3::new(0.0, 0.0, -5.0));
    let r = reproject(3.0, 3.0, 2.0, &k, &back);
    assert!(!r.in_front());
    let warp = compute_warp(&DepthMap::constant(8, 8, 2.0), &k, &back).unwrap();
    assert!(warp.coords().iter().all(Option::is_none));
}

#[test]
fn identity_warp_reproduces_support() {
    let mut rng = common::rng(22);
    let img = common::random_image(&mut rng, 13, 9, 3);
    let synth = warp_image(&img, &WarpField::identity(13, 9));
    assert_eq!(synth.image, img);
    assert_eq!(synth.valid.count_true(), 13 * 9);
}

#[test]
fn synthesis_agrees_with_oracle_on_random_scenes() {
    let mut rng = common::rng(23);
    for _ in 0..10 {
        let (w, h) = (12, 10);
        let k = common::small_intrinsics(w, h);
        let d = rng.gen_range(2.0..10.0);
        let t = rng.gen_range(-0.3..0.3);
        let support = Grid::from_fn(w, h, |_, _| rng.gen::<f64>());
        let synth = synthesize_view(
            &DepthMap::constant(w, h, d),
            &Image::gray(support.clone()),
            &k,
            &RigidTransform::from_translation(Vector3::new(t, 0.0, 0.0)),
        )
        .unwrap();
        let oracle = common::oracle_planar_shift(&support, k.fx, t, d);
        for (x, y, want) in oracle.indexed_iter() {
            if let Some(v) = want {
                assert!((synth.image.plane(0)[(x, y)] - v).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn photometric_loss_masks_invalid_synthesis() {
    let mut rng = common::rng(24);
    let target = common::random_image(&mut rng, 10, 8, 3);
    let mut synth = Synthesized::all_valid(common::random_image(&mut rng, 10, 8, 3));
    synth.valid[(3, 3)] = false;
    let l = photometric_loss(&target, &synth, &PhotometricConfig::default()).unwrap();
    assert!(!l.valid[(3, 3)]);
    assert_eq!(l.valid.count_true(), 79);
    let l1 = photometric_loss(&target, &synth, &PhotometricConfig::l1_only()).unwrap();
    let want: f64 = (0..3).map(|c| (target.plane(c)[(0, 0)] - synth.image.plane(c)[(0, 0)]).abs()).sum::<f64>() / 3.0;
    assert!((l1.values[(0, 0)] - want).abs() < 1e-12);
}

#[test]
fn automask_keeps_moving_pixels() {
    let ones = |v: f64| LossMap::all_valid(Grid::filled(4, 4, v));
    let keep = static_automask(&[ones(0.1)], &[ones(0.5)]).unwrap();
    assert_eq!(keep.count_true(), 16);
    let keep = static_automask(&[ones(0.5)], &[ones(0.5)]).unwrap();
    assert_eq!(keep.count_true(), 0, "ties are masked");
    assert!(static_automask(&[ones(0.1)], &[]).is_err());
}

#[test]
fn predictive_masks() {
    let loss = LossMap::all_valid(Grid::filled(2, 2, 2.0));
    let expl = PredictiveMask::new(PredictiveMaskKind::Explainability, Grid::filled(2, 2, 0.25)).unwrap();
    assert!(apply_predictive_mask(&loss, &expl).unwrap().values.iter().all(|&v| v == 0.5));
    let unc = PredictiveMask::new(PredictiveMaskKind::Uncertainty, Grid::filled(2, 2, 0.0)).unwrap();
    assert!(apply_predictive_mask(&loss, &unc).unwrap().values.iter().all(|&v| v == 2.0));
    assert!(PredictiveMask::new(PredictiveMaskKind::Explainability, Grid::filled(1, 1, 1.5)).is_err());

    let ones = PredictiveMask::new(PredictiveMaskKind::Explainability, Grid::filled(3, 3, 1.0)).unwrap();
    assert_eq!(explainability_reg(&ones).unwrap(), 0.0);
    let zeros = PredictiveMask::new(PredictiveMaskKind::Explainability, Grid::filled(3, 3, 0.0)).unwrap();
    assert!((explainability_reg(&zeros).unwrap() - (1e7f64).ln()).abs() < 1e-9);
    assert!(explainability_reg(&unc).is_err());
}

#[test]
fn regression_losses() {
    let proxy = DepthMap::new(Grid::from_vec(4, 1, vec![1.0, 2.0, 3.0, 0.0]).unwrap());
    let pred = DepthMap::new(Grid::from_vec(4, 1, vec![1.0, 2.5, 8.0, 4.0]).unwrap());
    // |e| = 0, 0.5, 5 on jointly valid pixels; tau = 1.
    let (l, state) = berhu_loss(&pred, &proxy, None).unwrap();
    assert_eq!(state.threshold, 1.0);
    assert!((l - (0.0 + 0.5 + 13.0) / 3.0).abs() < 1e-12);
    let (l, _) = berhu_loss(&pred, &proxy, Some(10.0)).unwrap();
    assert!((l - 5.5 / 3.0).abs() < 1e-12);
    assert!(berhu_loss(&pred, &proxy, Some(-1.0)).is_err());
    let (l, state) = berhu_loss(&proxy, &proxy, None).unwrap();
    assert_eq!((l, state.threshold), (0.0, 0.0));

    let want = (0.0f64.ln_1p() + 0.5f64.ln_1p() + 5.0f64.ln_1p()) / 3.0;
    assert!((log_l1_loss(&pred, &proxy).unwrap() - want).abs() < 1e-12);
}

#[test]
fn virtual_stereo_consistency() {
    let disp = DisparityMap::new(Grid::filled(3, 2, 0.5)).unwrap();
    let mut warped = Synthesized::all_valid(Image::gray(Grid::filled(3, 2, 0.25)));
    assert!((virtual_stereo_loss(&disp, &warped).unwrap() - 0.25).abs() < 1e-15);
    warped.valid = Grid::filled(3, 2, false);
    assert!(virtual_stereo_loss(&disp, &warped).is_err());
}

#[test]
fn smoothness_properties() {
    let flat = Grid::filled(8, 8, 0.3);
    assert_eq!(smoothness_loss(&flat, None, &SmoothnessConfig { edge_aware: false, ..SmoothnessConfig::default() }).unwrap(), 0.0);
    let ramp = Grid::from_fn(8, 8, |x, _| 0.1 + 0.05 * x as f64);
    let second = SmoothnessConfig { order: 2, edge_aware: false, ..SmoothnessConfig::default() };
    assert!(smoothness_loss(&ramp, None, &second).unwrap() < 1e-15, "second order ignores linear ramps");
    let first = SmoothnessConfig { edge_aware: false, ..SmoothnessConfig::default() };
    assert!(smoothness_loss(&ramp, None, &first).unwrap() > 0.0);
    assert!(smoothness_loss(&ramp, None, &SmoothnessConfig::default()).is_err(), "edge-aware needs an image");

    // A strong image edge where the disparity jumps lowers the penalty.
    let step = Grid::from_fn(8, 8, |x, _| if x < 4 { 0.2 } else { 0.8 });
    let edge_img = Image::gray(Grid::from_fn(8, 8, |x, _| if x < 4 { 0.0 } else { 1.0 }));
    let flat_img = Image::gray(Grid::filled(8, 8, 0.5));
    let cfg = SmoothnessConfig::default();
    assert!(smoothness_loss(&step, Some(&edge_img), &cfg).unwrap() < smoothness_loss(&step, Some(&flat_img), &cfg).unwrap());
}

#[test]
fn occlusion_variants() {
    let d = Grid::from_vec(2, 2, vec![0.0, 0.5, 1.0, 0.5]).unwrap();
    assert_eq!(occlusion_loss(&d, OcclusionVariant::Background), 0.5);
    assert_eq!(occlusion_loss(&d, OcclusionVariant::Foreground), 0.5);
    let near = Grid::filled(2, 2, 0.9);
    assert!(occlusion_loss(&near, OcclusionVariant::Background) > occlusion_loss(&near, OcclusionVariant::Foreground));
}

#[test]
fn multi_scale_upsamples_and_averages() {
    let scales = vec![
        DisparityMap::new(Grid::filled(8, 4, 0.5)).unwrap(),
        DisparityMap::new(Grid::filled(4, 2, 0.25)).unwrap(),
    ];
    let r = multi_scale_loss(&scales, 8, 4, |d| {
        assert_eq!(d.dims(), (8, 4));
        Ok(d.values()[(0, 0)])
    })
    .unwrap();
    assert_eq!(r.per_scale, vec![0.5, 0.25]);
    assert_eq!(r.mean, 0.375);
    let odd = vec![DisparityMap::new(Grid::filled(3, 2, 0.5)).unwrap()];
    assert!(multi_scale_loss(&odd, 8, 4, |_| Ok(0.0)).is_err());
}

#[test]
fn feature_loss_is_zero_for_identical_features() {
    let mut rng = common::rng(25);
    let feats = common::random_image(&mut rng, 9, 7, 4);
    let warp = WarpField::identity(9, 7);
    let l = feature_reconstruction_loss(&feats, std::slice::from_ref(&feats), std::slice::from_ref(&warp), FeatureDistance::L2).unwrap();
    assert_eq!(l, 0.0);
    let other = common::random_image(&mut rng, 9, 7, 4);
    let one = feature_reconstruction_loss(&feats, std::slice::from_ref(&other), std::slice::from_ref(&warp), FeatureDistance::L2).unwrap();
    let best = feature_reconstruction_loss(&feats, &[other, feats.clone()], &[warp.clone(), warp.clone()], FeatureDistance::L2).unwrap();
    assert!(one > 0.0 && best == 0.0);
    let wrong = common::random_image(&mut rng, 9, 7, 2);
    assert!(feature_reconstruction_loss(&feats, &[wrong], &[warp], FeatureDistance::L2).is_err());
}
