//! Property tests for the codec, contact geometry, spatial index, and file
//! loaders.

use camf::autodiff::Array;
use camf::dct;
use camf::geom::{
    self, distance_map, extract_contact_points, normalize_to_contact, Pose, SceneCloud,
};
use camf::io::{motion_file, scene_file, track_file};
use proptest::prelude::*;

fn finite_coord() -> impl Strategy<Value = f64> {
    -10.0..10.0f64
}

fn points(min: usize, max: usize) -> impl Strategy<Value = Vec<[f64; 3]>> {
    prop::collection::vec([finite_coord(), finite_coord(), finite_coord()], min..=max)
        .prop_map(|v| v.into_iter().map(|[a, b, c]| [a, b, c]).collect())
}

// Contact values underflow to exactly 0 beyond d/sigma ~ 38.6 (exp(-745) is
// the f64 floor), far outside the 2.5 m sampling radius the pipeline uses.
// Contact properties are therefore exercised at desk-scale ranges.
fn near_coord() -> impl Strategy<Value = f64> {
    -3.0..3.0f64
}

fn near_points(min: usize, max: usize) -> impl Strategy<Value = Vec<[f64; 3]>> {
    prop::collection::vec([near_coord(), near_coord(), near_coord()], min..=max)
        .prop_map(|v| v.into_iter().map(|[a, b, c]| [a, b, c]).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dct_is_linear(
        a in prop::collection::vec(-5.0..5.0f64, 8),
        b in prop::collection::vec(-5.0..5.0f64, 8),
        alpha in -3.0..3.0f64,
        beta in -3.0..3.0f64,
    ) {
        let xa = Array::from_vec(&[8, 1], a.clone()).unwrap();
        let xb = Array::from_vec(&[8, 1], b.clone()).unwrap();
        let mixed: Vec<f64> = a.iter().zip(&b).map(|(x, y)| alpha * x + beta * y).collect();
        let xm = Array::from_vec(&[8, 1], mixed).unwrap();
        let ca = dct::dct_forward(&xa, 8).unwrap().coeffs;
        let cb = dct::dct_forward(&xb, 8).unwrap().coeffs;
        let cm = dct::dct_forward(&xm, 8).unwrap().coeffs;
        for i in 0..8 {
            let expect = alpha * ca.data()[i] + beta * cb.data()[i];
            prop_assert!((cm.data()[i] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn dct_roundtrip_and_truncation_monotone(x in prop::collection::vec(-5.0..5.0f64, 12)) {
        let arr = Array::from_vec(&[12, 1], x).unwrap();
        let full = dct::dct_forward(&arr, 12).unwrap();
        let back = dct::idct(&full, 12).unwrap();
        prop_assert!(back.max_abs_diff(&arr) < 1e-9);
        let mut last_err = f64::INFINITY;
        for l in 1..=12 {
            let c = dct::dct_forward(&arr, l).unwrap();
            let rec = dct::idct(&c, 12).unwrap();
            let err: f64 = rec
                .data()
                .iter()
                .zip(arr.data())
                .map(|(p, q)| (p - q) * (p - q))
                .sum::<f64>()
                .sqrt();
            prop_assert!(err <= last_err + 1e-9, "L={l}: {err} > {last_err}");
            last_err = err;
        }
    }

    #[test]
    fn contact_values_in_unit_interval_and_monotone(
        joints in near_points(2, 5),
        scene_pts in near_points(1, 30),
        sigma in 0.3..0.6f64,
    ) {
        let pose = Pose::new(joints, 0).unwrap();
        let scene = SceneCloud::new(scene_pts).unwrap();
        let d = distance_map(&pose, &scene).unwrap();
        let c = normalize_to_contact(&d, sigma).unwrap();
        for i in 0..c.len() {
            let (cv, dv) = (c.data()[i], d.values().data()[i]);
            prop_assert!(cv > 0.0 && cv <= 1.0);
            prop_assert!((cv == 1.0) == (dv == 0.0));
        }
        // strictly monotone: larger distance gives strictly smaller value
        for i in 0..c.len() {
            for j in 0..c.len() {
                if d.values().data()[i] < d.values().data()[j] {
                    prop_assert!(c.data()[i] > c.data()[j]);
                }
            }
        }
    }

    #[test]
    fn extraction_epsilon_limits(
        joints in near_points(2, 4),
        scene_pts in near_points(1, 20),
    ) {
        let pose = Pose::new(joints.clone(), 0).unwrap();
        let scene = SceneCloud::new(scene_pts).unwrap();
        let c = normalize_to_contact(&distance_map(&pose, &scene).unwrap(), 0.4).unwrap();
        // epsilon -> 0: every joint in contact (contact values are > 0)
        let q = extract_contact_points(&c, &scene, 1e-300).unwrap();
        for j in 0..pose.num_joints() {
            prop_assert_eq!(q.at(&[j, 3]), 1.0);
        }
        // epsilon -> 1: only joints coincident with a scene point remain
        let q = extract_contact_points(&c, &scene, 1.0 - 1e-12).unwrap();
        for j in 0..pose.num_joints() {
            let coincident = scene
                .points()
                .iter()
                .any(|p| *p == joints[j]);
            if !coincident {
                prop_assert_eq!(q.at(&[j, 3]), 0.0);
            }
        }
    }

    #[test]
    fn contact_argmax_is_distance_argmin(
        joints in near_points(2, 4),
        scene_pts in near_points(2, 25),
    ) {
        let pose = Pose::new(joints, 0).unwrap();
        let scene = SceneCloud::new(scene_pts).unwrap();
        let d = distance_map(&pose, &scene).unwrap();
        let c = normalize_to_contact(&d, 0.4).unwrap();
        let q = extract_contact_points(&c, &scene, 1e-300).unwrap();
        let n = scene.len();
        for j in 0..pose.num_joints() {
            // flagged point must be at the globally minimal distance
            let picked = [q.at(&[j, 0]), q.at(&[j, 1]), q.at(&[j, 2])];
            let d_min = (0..n).map(|i| d.at(j, i)).fold(f64::INFINITY, f64::min);
            let picked_idx = scene.points().iter().position(|p| *p == picked).unwrap();
            prop_assert_eq!(d.at(j, picked_idx), d_min);
        }
    }

    #[test]
    fn spatial_index_equals_brute_force(
        pts in points(1, 120),
        queries in points(1, 20),
        radius in 0.1..5.0f64,
    ) {
        let scene = SceneCloud::new(pts.clone()).unwrap();
        let index = geom::build_spatial_index(&scene);
        for q in &queries {
            prop_assert_eq!(index.nearest(q), geom::spatial::brute_force_nearest(&pts, q));
            prop_assert_eq!(
                index.within_radius(q, radius),
                geom::spatial::brute_force_within_radius(&pts, q, radius)
            );
        }
    }

    #[test]
    fn loaders_never_panic_on_corrupt_bytes(bytes in prop::collection::vec(any::<u8>(), 0..400)) {
        let _ = scene_file::scene_from_binary(&bytes);
        let _ = motion_file::motion_from_binary(&bytes);
        let _ = track_file::track_from_binary(&bytes);
        if let Ok(text) = std::str::from_utf8(&bytes) {
            let _ = scene_file::scene_from_text(text);
            let _ = motion_file::motion_from_text(text);
            let _ = track_file::track_from_text(text);
        }
    }

    #[test]
    fn checkpoint_loader_never_panics(bytes in prop::collection::vec(any::<u8>(), 0..400)) {
        let _ = camf::autodiff::Params::from_bytes(&bytes);
    }
}
