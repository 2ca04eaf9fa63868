use std::sync::Arc;

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use depowder::geometry::{rotation_angle_between, transform_cloud, PointCloud, RigidPose};
use depowder::harness::{track_frames, translation_error_cm, rotation_error_deg};
use depowder::simulator::{generate_sequence, Keyframe, MotionScript, PartKind, PartModel, Scene};
use depowder::tracker::{init_tracker, Strategy, TrackerConfig, TrackerError};

fn part(kind: PartKind) -> Arc<PartModel> {
    Arc::new(PartModel::procedural(kind))
}

fn cfg(part: &PartModel, strategy: Strategy) -> TrackerConfig {
    TrackerConfig {
        strategy,
        xi_cm: part.xi_cm,
        phase_gating: false,
        ..TrackerConfig::default()
    }
}

/// Exact, uncluttered scene: no noise, no cull, nothing buried.
fn clean_scene(part: &Arc<PartModel>, pose: RigidPose) -> Scene {
    let mut scene = Scene::new(part.clone(), pose, 1).with_visibility(1.0).with_noise(0.0);
    scene.render.cull = false;
    scene
}

#[test]
fn exact_scan_keeps_the_whole_model() {
    let owl = part(PartKind::Owl);
    let pose = RigidPose::random(&mut ChaCha8Rng::seed_from_u64(3), 0.1);
    let scan = transform_cloud(&owl.cad, &pose);
    for s in [Strategy::ConditionalUpdate, Strategy::Continuous] {
        let state = init_tracker(owl.cad.clone(), pose, &scan, &cfg(&owl, s)).unwrap();
        assert_eq!(state.template().indices, (0..owl.cad.len()).collect::<Vec<_>>());
    }
}

#[test]
fn powder_cut_keeps_points_near_the_exposed_half() {
    let cup = part(PartKind::Cup);
    let pose = RigidPose::from_rpy_deg([10.0, -5.0, 40.0], Vector3::new(0.01, 0.02, 0.05));
    let posed = transform_cloud(&cup.cad, &pose);
    let b = posed.aabb().unwrap();
    let cut = 0.5 * (b.min.z + b.max.z);
    let above: Vec<usize> = (0..posed.len()).filter(|&i| posed[i].z > cut).collect();
    let scan = posed.select(&above);
    let c = cfg(&cup, Strategy::ConditionalUpdate);
    let xi = c.xi_m();
    let state = init_tracker(cup.cad.clone(), pose, &scan, &c).unwrap();
    let idx = &state.template().indices;
    // Every exposed point, plus buried points within xi of one.
    let expected: Vec<usize> = (0..posed.len())
        .filter(|&i| above.iter().any(|&j| (posed[i] - posed[j]).norm() < xi))
        .collect();
    assert_eq!(idx, &expected);
    assert!(above.iter().all(|i| idx.contains(i)));
    assert!(idx.iter().all(|&i| posed[i].z > cut - xi));
}

#[test]
fn scan_beyond_xi_is_an_empty_template() {
    let cube = part(PartKind::Cube);
    let pose = RigidPose::identity();
    let far = transform_cloud(&cube.cad, &RigidPose::from_translation(Vector3::new(0.5, 0.0, 0.0)));
    let err = init_tracker(cube.cad.clone(), pose, &far, &cfg(&cube, Strategy::ConditionalUpdate)).unwrap_err();
    assert_eq!(err, TrackerError::EmptyTemplate);
}

#[test]
fn identical_scans_are_a_fixed_point() {
    let owl = part(PartKind::Owl);
    let pose = RigidPose::from_rpy_deg([0.0, 0.0, 25.0], Vector3::new(0.0, 0.0, 0.03));
    let frames = generate_sequence(&clean_scene(&owl, pose), None, 10.0, 1.0).unwrap();
    let scan = &frames[0].points;
    for s in Strategy::ALL {
        let mut state = init_tracker(owl.cad.clone(), pose, scan, &cfg(&owl, s)).unwrap();
        let mut prev = state.step(scan).unwrap().pose;
        for _ in 0..5 {
            let next = state.step(scan).unwrap().pose;
            assert!(next.translation_distance(&prev) < 1e-4, "{s}");
            assert!(rotation_angle_between(&next, &prev) < 0.05, "{s}");
            prev = next;
        }
    }
}

#[test]
fn follows_a_millimeter_per_frame_slide() {
    let cube = part(PartKind::Cube);
    let start = RigidPose::from_rpy_deg([0.0, 0.0, 15.0], Vector3::new(0.0, 0.0, 0.03));
    let end = start.with_translation(start.translation() + Vector3::new(0.099, 0.0, 0.0));
    let script = MotionScript::new(vec![Keyframe { time: 0.0, pose: start }, Keyframe { time: 9.9, pose: end }]).unwrap();
    let frames = generate_sequence(&clean_scene(&cube, start), Some(&script), 10.0, 10.0).unwrap();
    assert_eq!(frames.len(), 100);
    let step = frames[0].truth_pose.translation_distance(&frames[1].truth_pose);
    assert!((step - 0.001).abs() < 1e-12);
    for s in Strategy::ALL {
        let run = track_frames(&frames, cube.cad.clone(), start, &cfg(&cube, s));
        assert_eq!(run.lost_at, None, "{s}");
        let last = run.poses().pop().unwrap();
        let truth = frames.last().unwrap().truth_pose;
        assert!(translation_error_cm(&last, &truth) < 0.1, "{s}");
        assert!(rotation_error_deg(&last, &truth) < 0.5, "{s}");
    }
}

#[test]
fn vanilla_never_changes_its_template() {
    let pipe = part(PartKind::Pipe);
    let start = RigidPose::from_rpy_deg([5.0, 0.0, 60.0], Vector3::new(0.0, 0.0, 0.04));
    let end = RigidPose::from_rpy_deg([5.0, 0.0, 100.0], Vector3::new(0.06, 0.0, 0.04));
    let script = MotionScript::new(vec![Keyframe { time: 0.0, pose: start }, Keyframe { time: 4.0, pose: end }]).unwrap();
    let scene = Scene::new(pipe.clone(), start, 5).with_visibility(0.5);
    let frames = generate_sequence(&scene, Some(&script), 10.0, 4.0).unwrap();
    let run = track_frames(&frames, pipe.cad.clone(), start, &cfg(&pipe, Strategy::Vanilla));
    assert!(!run.records.is_empty());
    assert!(run.records.iter().all(|r| r.template_points == pipe.cad.len() && !r.template_updated));
}

#[test]
fn runs_are_reproducible_bit_for_bit() {
    let prop = part(PartKind::Propeller);
    let pose = RigidPose::from_rpy_deg([0.0, 8.0, 0.0], Vector3::new(0.0, 0.0, 0.03));
    let scene = Scene::new(prop.clone(), pose, 9).with_visibility(0.6);
    let frames = generate_sequence(&scene, None, 10.0, 2.0).unwrap();
    for s in Strategy::ALL {
        let a = track_frames(&frames, prop.cad.clone(), pose, &cfg(&prop, s));
        let b = track_frames(&frames, prop.cad.clone(), pose, &cfg(&prop, s));
        assert_eq!(a.records.len(), b.records.len());
        assert!(a.records.iter().zip(&b.records).all(|(x, y)| x.bitwise_eq(y)), "{s}");
    }
}

#[test]
fn failed_step_leaves_the_state_alone() {
    let cube = part(PartKind::Cube);
    let pose = RigidPose::identity();
    let scan = transform_cloud(&cube.cad, &pose);
    let mut state = init_tracker(cube.cad.clone(), pose, &scan, &cfg(&cube, Strategy::Continuous)).unwrap();
    state.step(&scan).unwrap();
    let before = state.clone();
    let tiny = PointCloud::new(scan[..2].to_vec()).unwrap();
    assert!(matches!(state.step(&tiny), Err(TrackerError::TooFewPoints { .. })));
    let far = transform_cloud(&scan, &RigidPose::from_translation(Vector3::new(1.0, 0.0, 0.0)));
    assert!(matches!(state.step(&far), Err(TrackerError::TrackingLost(_))));
    assert_eq!(state.pose(), before.pose());
    assert_eq!(state.template(), before.template());
    assert_eq!(state.frame_index(), before.frame_index());
}
